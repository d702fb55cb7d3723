//! ROM-regularised least-squares reconstruction, the a-priori bound and error metrics.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::materials::{FreezerMaterials, ThermalModel};
use crate::mesh::CellKind;
use crate::observation::ObservationMatrix;
use crate::rom::PODBasis;

/// Relative threshold below which `G` is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

/// `G = W^T Phi_n` with its SVD.
#[derive(Debug, Clone)]
pub struct CrossGramian {
    pub g: DMatrix<f64>,
    pub s_hat: Vec<f64>,
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
}

impl CrossGramian {
    pub fn from_matrix(g: DMatrix<f64>) -> Result<Self> {
        let (m, n) = g.shape();
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("empty cross-Gramian".into()));
        }
        if n > m {
            return Err(Error::WellPosedness { n, m });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cross-Gramian".into()));
        }
        let svd = g.clone().svd(true, true);
        let s = svd.singular_values.as_slice().to_vec();
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
        let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
        let v_t = DMatrix::from_rows(&order.iter().map(|&i| v_t.row(i).into_owned()).collect::<Vec<_>>());
        let s_hat = order.iter().map(|&i| s[i]).collect();
        Ok(CrossGramian { g, s_hat, u, v_t })
    }

    pub fn n(&self) -> usize {
        self.g.ncols()
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    /// Smallest singular value `S_n`.
    pub fn smallest(&self) -> f64 {
        *self.s_hat.last().expect("non-empty")
    }
}

pub fn cross_gramian(w: &ObservationMatrix, basis: &PODBasis, n: usize) -> Result<CrossGramian> {
    if n > w.m() {
        return Err(Error::WellPosedness { n, m: w.m() });
    }
    let phi = basis.truncated(n)?;
    CrossGramian::from_matrix(w.cross(&phi)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub residual: f64,
}

/// Minimises `||l - G c||` through the cached SVD.
pub fn solve_normal_equations(g: &CrossGramian, ell: &[f64]) -> Result<LeastSquares> {
    check_len("measurement vector", g.m(), ell.len())?;
    let s1 = g.s_hat[0];
    let sn = g.smallest();
    if !(s1 > 0.0) || sn < RANK_TOL * s1 {
        return Err(Error::IllConditioned { smallest: sn, condition: if sn > 0.0 { s1 / sn } else { f64::INFINITY } });
    }
    let l = DVector::from_column_slice(ell);
    let mut y = g.u.tr_mul(&l);
    for (yi, si) in y.iter_mut().zip(&g.s_hat) {
        *yi /= si;
    }
    let c = g.v_t.tr_mul(&y);
    let residual = (&l - &g.g * &c).norm();
    Ok(LeastSquares { coefficients: c.as_slice().to_vec(), residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub n: usize,
    pub coefficients: Vec<f64>,
    pub field: Vec<f64>,
    pub residual: f64,
}

/// Precomputed reconstruction operator for one `(W, Phi_n)` pair.
pub struct Reconstructor<'a> {
    basis: &'a PODBasis,
    phi: DMatrix<f64>,
    gramian: CrossGramian,
    mean_obs: Option<Vec<f64>>,
}

impl<'a> Reconstructor<'a> {
    pub fn new(basis: &'a PODBasis, w: &ObservationMatrix, n: usize) -> Result<Self> {
        check_len("observation rows", basis.field_len(), w.field_len)?;
        let gramian = cross_gramian(w, basis, n)?;
        let mean_obs = basis.mean.as_ref().map(|m| w.apply_transpose(m)).transpose()?;
        Ok(Reconstructor { basis, phi: basis.truncated(n)?, gramian, mean_obs })
    }

    pub fn gramian(&self) -> &CrossGramian {
        &self.gramian
    }

    pub fn reconstruct(&self, ell: &[f64]) -> Result<ReconstructionResult> {
        let shifted: Vec<f64> = match &self.mean_obs {
            Some(mo) => {
                check_len("measurement vector", mo.len(), ell.len())?;
                ell.iter().zip(mo).map(|(a, b)| a - b).collect()
            }
            None => ell.to_vec(),
        };
        let ls = solve_normal_equations(&self.gramian, &shifted)?;
        let mut field = &self.phi * DVector::from_column_slice(&ls.coefficients);
        if let Some(m) = &self.basis.mean {
            field += DVector::from_column_slice(m);
        }
        Ok(ReconstructionResult {
            n: self.gramian.n(),
            coefficients: ls.coefficients,
            field: field.as_slice().to_vec(),
            residual: ls.residual,
        })
    }
}

pub fn reconstruct(basis: &PODBasis, w: &ObservationMatrix, n: usize, ell: &[f64]) -> Result<ReconstructionResult> {
    Reconstructor::new(basis, w, n)?.reconstruct(ell)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub n: usize,
    pub s_hat_n: f64,
    pub tail: f64,
    /// `tail / s_hat_n`, or infinity when `s_hat_n` vanishes.
    pub e: f64,
}

/// `e(n) = tail_energy(n) / S_n` for every `n` in `ns`.
pub fn apriori_bound_curve(basis: &PODBasis, w: &ObservationMatrix, ns: &[usize]) -> Result<Vec<BoundPoint>> {
    let upper = w.m().min(basis.n_max());
    let top = match ns.iter().max() {
        Some(&t) => t,
        None => return Ok(Vec::new()),
    };
    if ns.iter().any(|&n| n == 0 || n > upper) {
        return Err(Error::InvalidArgument(format!("bound curve needs 1 <= n <= {upper}")));
    }
    let g_full = w.cross(&basis.truncated(top)?)?;
    ns.iter()
        .map(|&n| {
            let g = g_full.columns(0, n).into_owned();
            let s = g.singular_values();
            let s_hat_n = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let tail = basis.tail_energy(n)?;
            let degenerate = !(s_hat_n > RANK_TOL * s.max());
            let e = if degenerate { f64::INFINITY } else if tail == 0.0 { 0.0 } else { tail / s_hat_n };
            Ok(BoundPoint { n, s_hat_n, tail, e })
        })
        .collect()
}

/// Default range `1..=min(m, n_max) - 1`.
pub fn default_bound_range(basis: &PODBasis, w: &ObservationMatrix) -> Vec<usize> {
    let upper = w.m().min(basis.n_max());
    (1..upper.max(1)).collect()
}

/// `argmin e(n)`, ties resolved toward the smaller `n`.
pub fn select_rom_dimension(curve: &[BoundPoint]) -> Result<usize> {
    let mut best: Option<&BoundPoint> = None;
    for p in curve.iter().filter(|p| p.e.is_finite()) {
        match best {
            Some(b) if p.e > b.e || (p.e == b.e && p.n > b.n) => {}
            _ => best = Some(p),
        }
    }
    best.map(|p| p.n).ok_or_else(|| Error::Undefined("every bound value is infinite".into()))
}

/// `||T_gt - T*|| / ||T_gt|| * 100`.
pub fn relative_l2_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len("estimate", truth.len(), estimate.len())?;
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Undefined("relative error of a zero ground truth".into()));
    }
    let diff = truth.iter().zip(estimate).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(100.0 * diff / norm)
}

/// `|P - P*| / |mean(P)| * 100` per instant.
pub fn local_relative_error(truth: &[f64], estimate: &[f64]) -> Result<Vec<f64>> {
    check_len("estimate series", truth.len(), estimate.len())?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty series".into()));
    }
    let avg = (truth.iter().sum::<f64>() / truth.len() as f64).abs();
    if avg == 0.0 {
        return Err(Error::Undefined("local error with zero time-average".into()));
    }
    Ok(truth.iter().zip(estimate).map(|(a, b)| 100.0 * (a - b).abs() / avg).collect())
}

/// Trapezoidal time integral divided by the duration.
pub fn accumulated_error(times: &[f64], series: &[f64]) -> Result<f64> {
    check_len("series", times.len(), series.len())?;
    match series.len() {
        0 => Err(Error::InvalidArgument("empty series".into())),
        1 => Ok(series[0]),
        _ => {
            let duration = times[times.len() - 1] - times[0];
            if !(duration > 0.0) {
                return Err(Error::InvalidArgument("series times must increase".into()));
            }
            let integral: f64 = times
                .windows(2)
                .zip(series.windows(2))
                .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
                .sum();
            Ok(integral / duration)
        }
    }
}

/// Time derivative in °C/h: centred inside, one-sided at the ends. `times` in seconds.
pub fn freezing_rate(times: &[f64], series: &[f64]) -> Result<Vec<f64>> {
    check_len("series", times.len(), series.len())?;
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidArgument("freezing rate needs at least two samples".into()));
    }
    Ok((0..n)
        .map(|i| {
            let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
            3600.0 * (series[b] - series[a]) / (times[b] - times[a])
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedFields {
    /// Liquid fraction per food cell and instant.
    pub liquid_fraction: Vec<Vec<f64>>,
    /// Volumetric heat capacity per food cell and instant.
    pub heat_capacity: Vec<Vec<f64>>,
}

pub fn derived_quantities(materials: &FreezerMaterials, food_cells: &[usize], fields: &[Vec<f64>]) -> DerivedFields {
    let pick = |f: &dyn Fn(f64) -> f64| -> Vec<Vec<f64>> {
        fields.iter().map(|t| food_cells.iter().map(|&k| f(t[k])).collect()).collect()
    };
    DerivedFields {
        liquid_fraction: pick(&|t| materials.liquid_fraction(t)),
        heat_capacity: pick(&|t| materials.heat_capacity(CellKind::Food, t)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSeries {
    pub name: String,
    pub cell: usize,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    pub error: Vec<f64>,
    pub rate_truth: Vec<f64>,
    pub rate_estimate: Vec<f64>,
    pub rate_error: Vec<f64>,
    pub accumulated: f64,
    pub rate_accumulated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    /// Relative l2 error per snapshot, percent.
    pub relative_l2: Vec<f64>,
    pub time_averaged: f64,
    pub accumulated: f64,
    pub local: Vec<LocalSeries>,
}

/// Compares two time series of fields. `points` are `(name, cell)` pairs.
pub fn error_report(times: &[f64], truth: &[Vec<f64>], estimate: &[Vec<f64>], points: &[(String, usize)]) -> Result<ErrorReport> {
    check_len("truth series", times.len(), truth.len())?;
    check_len("estimate series", times.len(), estimate.len())?;
    if times.is_empty() {
        return Err(Error::InvalidArgument("no snapshots to evaluate".into()));
    }
    let relative_l2 = truth.iter().zip(estimate).map(|(a, b)| relative_l2_error(a, b)).collect::<Result<Vec<_>>>()?;
    let time_averaged = relative_l2.iter().sum::<f64>() / relative_l2.len() as f64;
    let accumulated = accumulated_error(times, &relative_l2)?;
    let mut local = Vec::new();
    for (name, cell) in points {
        let t: Vec<f64> = truth.iter().map(|f| f[*cell]).collect();
        let e: Vec<f64> = estimate.iter().map(|f| f[*cell]).collect();
        let error = local_relative_error(&t, &e)?;
        let (rate_truth, rate_estimate, rate_error, rate_accumulated) = if times.len() >= 2 {
            let rt = freezing_rate(times, &t)?;
            let re = freezing_rate(times, &e)?;
            let err = local_relative_error(&rt, &re).unwrap_or_else(|_| vec![0.0; rt.len()]);
            let acc = accumulated_error(times, &err)?;
            (rt, re, err, acc)
        } else {
            (Vec::new(), Vec::new(), Vec::new(), 0.0)
        };
        local.push(LocalSeries {
            name: name.clone(),
            cell: *cell,
            accumulated: accumulated_error(times, &error)?,
            truth: t,
            estimate: e,
            error,
            rate_truth,
            rate_estimate,
            rate_error,
            rate_accumulated,
        });
    }
    Ok(ErrorReport { times: times.to_vec(), relative_l2, time_averaged, accumulated, local })
}

impl ErrorReport {
    /// `t,value` rows of the relative l2 error.
    pub fn l2_csv(&self) -> String {
        let mut s = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.relative_l2) {
            let _ = writeln!(s, "{t},{v}");
        }
        s
    }

    /// One row per instant with truth, estimate and error at every control point.
    pub fn local_csv(&self) -> String {
        let mut s = String::from("t");
        for p in &self.local {
            let _ = write!(
                s,
                ",{0}_truth,{0}_estimate,{0}_error,{0}_rate_truth,{0}_rate_estimate,{0}_rate_error",
                p.name
            );
        }
        s.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t}");
            for p in &self.local {
                let r = |v: &Vec<f64>| v.get(i).copied().unwrap_or(f64::NAN);
                let _ = write!(
                    s,
                    ",{},{},{},{},{},{}",
                    p.truth[i],
                    p.estimate[i],
                    p.error[i],
                    r(&p.rate_truth),
                    r(&p.rate_estimate),
                    r(&p.rate_error)
                );
            }
            s.push('\n');
        }
        s
    }
}

pub fn bound_csv(curve: &[BoundPoint]) -> String {
    let mut s = String::from("n,value\n");
    for p in curve {
        let _ = writeln!(s, "{},{}", p.n, p.e);
    }
    s
}
