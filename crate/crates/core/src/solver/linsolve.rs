//! Five-point structured sparse matrices, ILU(0) and preconditioned BiCGSTAB.

use crate::error::{Error, Result};

/// Row `k` reads `diag[k] x[k] + west[k] x[k-1] + east[k] x[k+1] + south[k] x[k-nx] + north[k] x[k+nx]`.
/// Couplings that would leave the grid must be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil5 {
    pub nx: usize,
    pub ny: usize,
    pub diag: Vec<f64>,
    pub west: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

impl Stencil5 {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        let n = nx * ny;
        Stencil5 {
            nx,
            ny,
            diag: vec![0.0; n],
            west: vec![0.0; n],
            east: vec![0.0; n],
            south: vec![0.0; n],
            north: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn clear(&mut self) {
        for v in [&mut self.diag, &mut self.west, &mut self.east, &mut self.south, &mut self.north] {
            v.iter_mut().for_each(|a| *a = 0.0);
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nx = self.nx;
        let n = self.len();
        for k in 0..n {
            let mut s = self.diag[k] * x[k];
            if k >= 1 {
                s += self.west[k] * x[k - 1];
            }
            if k + 1 < n {
                s += self.east[k] * x[k + 1];
            }
            if k >= nx {
                s += self.south[k] * x[k - nx];
            }
            if k + nx < n {
                s += self.north[k] * x[k + nx];
            }
            y[k] = s;
        }
    }
}

/// Incomplete LU with zero fill for a [`Stencil5`] matrix.
pub struct Ilu0 {
    nx: usize,
    pivots: Vec<f64>,
}

impl Ilu0 {
    pub fn new(a: &Stencil5) -> Result<Self> {
        let nx = a.nx;
        let n = a.len();
        let mut d = vec![0.0; n];
        for k in 0..n {
            let mut v = a.diag[k];
            if k >= 1 && a.west[k] != 0.0 {
                v -= a.west[k] * a.east[k - 1] / d[k - 1];
            }
            if k >= nx && a.south[k] != 0.0 {
                v -= a.south[k] * a.north[k - nx] / d[k - nx];
            }
            if v == 0.0 || !v.is_finite() {
                return Err(Error::LinearSolver(format!("zero pivot in ILU(0) at row {k}")));
            }
            d[k] = v;
        }
        Ok(Ilu0 { nx, pivots: d })
    }

    /// Solves `M z = r` in place (`z` holds `r` on entry).
    pub fn solve_in_place(&self, a: &Stencil5, z: &mut [f64]) {
        let nx = self.nx;
        let n = z.len();
        let d = &self.pivots;
        for k in 0..n {
            let mut v = z[k];
            if k >= 1 {
                v -= a.west[k] * z[k - 1];
            }
            if k >= nx {
                v -= a.south[k] * z[k - nx];
            }
            z[k] = v / d[k];
        }
        for k in (0..n).rev() {
            let mut v = 0.0;
            if k + 1 < n {
                v += a.east[k] * z[k + 1];
            }
            if k + nx < n {
                v += a.north[k] * z[k + nx];
            }
            z[k] -= v / d[k];
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB; `x` carries the initial guess.
pub fn bicgstab(a: &Stencil5, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.len();
    let ilu = Ilu0::new(a)?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let mut res = norm(&r) / bnorm;
    if res <= tol {
        return Ok(SolveStats { iterations: 0, relative_residual: res });
    }
    let mut restarts = 0;
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // breakdown: restart from the current residual
            restarts += 1;
            if restarts > 10 {
                break;
            }
            a.apply(x, &mut r);
            for k in 0..n {
                r[k] = b[k] - r[k];
            }
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|q| *q = 0.0);
            v.iter_mut().for_each(|q| *q = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        p_hat.copy_from_slice(&p);
        ilu.solve_in_place(a, &mut p_hat);
        a.apply(&p_hat, &mut v);
        alpha = rho / dot(&r_hat, &v);
        // r becomes s
        for k in 0..n {
            r[k] -= alpha * v[k];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            for k in 0..n {
                x[k] += alpha * p_hat[k];
            }
            return Ok(SolveStats { iterations: it, relative_residual: res });
        }
        s_hat.copy_from_slice(&r);
        ilu.solve_in_place(a, &mut s_hat);
        a.apply(&s_hat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] -= omega * t[k];
        }
        res = norm(&r) / bnorm;
        if !res.is_finite() {
            return Err(Error::LinearSolver("BiCGSTAB produced a non-finite residual".into()));
        }
        if res <= tol {
            return Ok(SolveStats { iterations: it, relative_residual: res });
        }
    }
    // recompute the true residual before giving up
    a.apply(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    res = norm(&r) / bnorm;
    if res <= tol {
        return Ok(SolveStats { iterations: max_iter, relative_residual: res });
    }
    Err(Error::LinearSolver(format!(
        "BiCGSTAB stalled at relative residual {res:.3e} after {max_iter} iterations"
    )))
}
