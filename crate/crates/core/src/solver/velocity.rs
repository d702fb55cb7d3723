//! Prescribed divergence-free airflow from a discrete stream function.
//!
//! The stream function lives on grid nodes. Face velocities are its staggered
//! differences, so the discrete divergence of every cell telescopes to zero.

use serde::{Deserialize, Serialize};

use super::linsolve::{bicgstab, Stencil5};
use crate::error::{Error, Result};
use crate::mesh::{CellKind, DuctWall, StructuredGrid};

/// Face-normal velocities on the staggered grid, m/s.
///
/// `u[j * (nx + 1) + i]` is the x-velocity on the vertical face at `x_faces[i]`
/// of row `j`; `v[j * nx + i]` the y-velocity on the horizontal face at
/// `y_faces[j]` of column `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityField {
    pub nx: usize,
    pub ny: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        VelocityField { nx, ny, u: vec![0.0; (nx + 1) * ny], v: vec![0.0; nx * (ny + 1)] }
    }

    pub fn west(&self, i: usize, j: usize) -> f64 {
        self.u[j * (self.nx + 1) + i]
    }

    pub fn east(&self, i: usize, j: usize) -> f64 {
        self.u[j * (self.nx + 1) + i + 1]
    }

    pub fn south(&self, i: usize, j: usize) -> f64 {
        self.v[j * self.nx + i]
    }

    pub fn north(&self, i: usize, j: usize) -> f64 {
        self.v[(j + 1) * self.nx + i]
    }

    /// Net outflow of cell `(i, j)`, m^2/s.
    pub fn divergence(&self, i: usize, j: usize, dx: f64, dy: f64) -> f64 {
        (self.east(i, j) - self.west(i, j)) * dy + (self.north(i, j) - self.south(i, j)) * dx
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, &s| m.max(s.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|&s| s == 0.0)
    }

    pub fn max_fluid_divergence(&self, grid: &StructuredGrid) -> f64 {
        grid.domain
            .fluid
            .iter()
            .map(|&k| {
                let (i, j) = grid.ij(k);
                self.divergence(i, j, grid.dx(), grid.dy()).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_fluid_connected(grid: &StructuredGrid) -> Result<()> {
    let (nx, ny) = (grid.nx, grid.ny);
    let fluid = &grid.domain.fluid;
    let Some(&start) = grid.domain.inlet.first().map(|f| &f.cell) else {
        return Err(Error::DisconnectedFluid("grid has no inlet".into()));
    };
    if grid.mask[start] != CellKind::Fluid {
        return Err(Error::DisconnectedFluid("inlet is blocked by a solid".into()));
    }
    let mut seen = vec![false; grid.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(k) = stack.pop() {
        count += 1;
        let (i, j) = grid.ij(k);
        let nbs = [
            (i > 0).then(|| k - 1),
            (i + 1 < nx).then(|| k + 1),
            (j > 0).then(|| k - nx),
            (j + 1 < ny).then(|| k + nx),
        ];
        for nb in nbs.into_iter().flatten() {
            if !seen[nb] && grid.mask[nb] == CellKind::Fluid {
                seen[nb] = true;
                stack.push(nb);
            }
        }
    }
    if count != fluid.len() {
        return Err(Error::DisconnectedFluid(format!(
            "{} of {} fluid cells are not reachable from the inlet",
            fluid.len() - count,
            fluid.len()
        )));
    }
    for f in &grid.domain.outlet {
        if !seen[f.cell] {
            return Err(Error::DisconnectedFluid("outlet is not reachable from the inlet".into()));
        }
    }
    Ok(())
}

/// Dirichlet stream-function values on the cabinet boundary nodes.
fn boundary_psi(grid: &StructuredGrid, flux: f64) -> Vec<Option<f64>> {
    let (nx, ny) = (grid.nx, grid.ny);
    let g = &grid.geometry;
    let h = g.cabinet_height;
    let sign = match g.duct_wall {
        DuctWall::Left => -1.0,
        DuctWall::Right => 1.0,
    };
    let duct_i = match g.duct_wall {
        DuctWall::Left => 0,
        DuctWall::Right => nx,
    };
    let mut psi = vec![None; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            if i != 0 && i != nx && j != 0 && j != ny {
                continue;
            }
            let y = grid.y_faces[j];
            let value = if i == duct_i {
                let inlet_base = h - g.inlet_height;
                if y <= g.outlet_height {
                    sign * flux * (y / g.outlet_height)
                } else if y < inlet_base {
                    sign * flux
                } else {
                    sign * flux * (1.0 - (y - inlet_base) / g.inlet_height)
                }
            } else {
                0.0
            };
            psi[j * (nx + 1) + i] = Some(value);
        }
    }
    psi
}

fn solve_laplace(grid: &StructuredGrid, fixed: &[Option<f64>]) -> Result<Vec<f64>> {
    let (mx, my) = (grid.nx + 1, grid.ny + 1);
    let (ax, ay) = (1.0 / grid.dx().powi(2), 1.0 / grid.dy().powi(2));
    let mut a = Stencil5::zeros(mx, my);
    let mut b = vec![0.0; mx * my];
    let mut x = vec![0.0; mx * my];
    for j in 0..my {
        for i in 0..mx {
            let k = j * mx + i;
            if let Some(v) = fixed[k] {
                a.diag[k] = 1.0;
                b[k] = v;
                x[k] = v;
                continue;
            }
            // interior node: all four neighbours exist
            a.diag[k] = 2.0 * (ax + ay);
            let nbs = [(k - 1, ax, 0), (k + 1, ax, 1), (k - mx, ay, 2), (k + mx, ay, 3)];
            for (nb, w, dir) in nbs {
                if let Some(v) = fixed[nb] {
                    b[k] += w * v;
                } else {
                    match dir {
                        0 => a.west[k] = -w,
                        1 => a.east[k] = -w,
                        2 => a.south[k] = -w,
                        _ => a.north[k] = -w,
                    }
                }
            }
        }
    }
    bicgstab(&a, &b, &mut x, 1e-13, 20_000)?;
    Ok(x)
}

/// Potential-flow surrogate for the cabinet airflow at inlet speed `u_in`.
///
/// The obstacle (food and shelf) is held at one stream-function value, the mean
/// of an obstacle-free solve over its nodes, so no flow crosses it.
pub fn build_velocity_field(grid: &StructuredGrid, u_in: f64) -> Result<VelocityField> {
    if !u_in.is_finite() || u_in < 0.0 {
        return Err(Error::InvalidArgument(format!("inlet speed {u_in} must be finite and >= 0")));
    }
    check_fluid_connected(grid)?;
    let (nx, ny) = (grid.nx, grid.ny);
    if u_in == 0.0 {
        return Ok(VelocityField::zeros(nx, ny));
    }
    let flux = u_in * grid.geometry.inlet_height;
    let mut fixed = boundary_psi(grid, flux);
    let first = solve_laplace(grid, &fixed)?;

    let mut obstacle = vec![false; (nx + 1) * (ny + 1)];
    for k in 0..grid.len() {
        if grid.mask[k].is_solid() {
            let (i, j) = grid.ij(k);
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                obstacle[(j + dj) * (nx + 1) + i + di] = true;
            }
        }
    }
    let nodes: Vec<usize> = (0..obstacle.len()).filter(|&k| obstacle[k]).collect();
    if nodes.iter().any(|&k| fixed[k].is_some()) {
        return Err(Error::DisconnectedFluid("solid obstacle touches the cabinet boundary".into()));
    }
    let psi = if nodes.is_empty() {
        first
    } else {
        let mean = nodes.iter().map(|&k| first[k]).sum::<f64>() / nodes.len() as f64;
        for &k in &nodes {
            fixed[k] = Some(mean);
        }
        solve_laplace(grid, &fixed)?
    };
    if psi.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("stream function".into()));
    }

    let (dx, dy) = (grid.dx(), grid.dy());
    let node = |i: usize, j: usize| psi[j * (nx + 1) + i];
    let mut vel = VelocityField::zeros(nx, ny);
    for j in 0..ny {
        for i in 0..=nx {
            vel.u[j * (nx + 1) + i] = (node(i, j + 1) - node(i, j)) / dy;
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            vel.v[j * nx + i] = -(node(i + 1, j) - node(i, j)) / dx;
        }
    }
    Ok(vel)
}
