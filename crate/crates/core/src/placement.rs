//! Greedy observability-maximising sensor selection and the nested-ring baseline.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::estimation::{error_report, ErrorReport, Reconstructor};
use crate::format::SnapshotSet;
use crate::observation::{ObservationMatrix, PixelSensor};
use crate::rom::PODBasis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Selected pool indices in selection order.
    pub indices: Vec<usize>,
    /// Objective maximised at each step (empty for the regular layout).
    pub objectives: Vec<f64>,
}

/// Singular values of the rows `rows` of `r` plus `extra`, in non-increasing order.
fn stacked_singular_values(r: &DMatrix<f64>, rows: &[usize], extra: usize) -> Vec<f64> {
    let n = r.ncols();
    let mut m = DMatrix::zeros(rows.len() + 1, n);
    for (a, &k) in rows.iter().chain(std::iter::once(&extra)).enumerate() {
        m.row_mut(a).copy_from(&r.row(k));
    }
    let mut s = m.singular_values().as_slice().to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Algorithm 1: step 1 maximises `||w^T Phi||`, steps `2..=n` the `i`-th singular
/// value of the grown cross-Gramian, later steps its `n`-th singular value.
/// Ties go to the lowest pool index.
pub fn greedy_place(phi: &DMatrix<f64>, pool: &ObservationMatrix, m_target: usize) -> Result<Placement> {
    let n = phi.ncols();
    if n == 0 {
        return Err(Error::InvalidArgument("basis has no columns".into()));
    }
    if m_target < n {
        return Err(Error::WellPosedness { n, m: m_target });
    }
    let r = pool.cross(phi)?;
    let total = pool.m();
    let mut taken = vec![false; total];
    let mut indices = Vec::with_capacity(m_target);
    let mut objectives = Vec::with_capacity(m_target);
    for step in 1..=m_target {
        let rank = step.min(n);
        let best = (0..total)
            .into_par_iter()
            .filter(|&c| !taken[c])
            .map(|c| {
                let value = if step == 1 {
                    r.row(c).norm()
                } else {
                    stacked_singular_values(&r, &indices, c)[rank - 1]
                };
                (c, value)
            })
            .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
        let (c, value) = best.ok_or(Error::PoolExhausted { selected: indices.len() })?;
        taken[c] = true;
        indices.push(c);
        objectives.push(value);
    }
    Ok(Placement { indices, objectives })
}

/// Nested rectangular rings of the pixel tiling, outermost first; pool order within a ring.
pub fn regular_placement(pool: &[PixelSensor], m_target: usize) -> Result<Placement> {
    if m_target == 0 {
        return Err(Error::InvalidArgument("m_target must be at least 1".into()));
    }
    if m_target > pool.len() {
        return Err(Error::PoolExhausted { selected: pool.len() });
    }
    let px = pool.iter().map(|s| s.tile.0).max().unwrap_or(0) + 1;
    let py = pool.iter().map(|s| s.tile.1).max().unwrap_or(0) + 1;
    let ring = |s: &PixelSensor| {
        let (i, j) = s.tile;
        i.min(j).min(px - 1 - i).min(py - 1 - j)
    };
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by_key(|&k| (ring(&pool[k]), k));
    order.truncate(m_target);
    Ok(Placement { indices: order, objectives: Vec::new() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementEvaluation {
    pub m: usize,
    pub n: usize,
    pub s_hat_n: f64,
    pub reports: Vec<ErrorReport>,
    /// Mean over runs of the time-averaged relative l2 error.
    pub time_averaged: f64,
}

/// Reconstructs every snapshot of `runs` from the sensors of `placement`.
pub fn evaluate_placement(
    placement: &Placement,
    basis: &PODBasis,
    n: usize,
    pool: &ObservationMatrix,
    runs: &[SnapshotSet],
    points: &[(String, usize)],
) -> Result<PlacementEvaluation> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no test runs given".into()));
    }
    let w = pool.select(&placement.indices)?;
    let rec = Reconstructor::new(basis, &w, n)?;
    let mut reports = Vec::with_capacity(runs.len());
    for run in runs {
        check_len("test field", basis.field_len(), run.field_len)?;
        let truth: Vec<Vec<f64>> = run.snapshots.iter().map(|s| s.temperature.clone()).collect();
        let estimate = truth
            .iter()
            .map(|t| Ok(rec.reconstruct(&w.apply_transpose(t)?)?.field))
            .collect::<Result<Vec<_>>>()?;
        let times: Vec<f64> = run.snapshots.iter().map(|s| s.time).collect();
        reports.push(error_report(&times, &truth, &estimate, points)?);
    }
    let time_averaged = reports.iter().map(|r| r.time_averaged).sum::<f64>() / reports.len() as f64;
    Ok(PlacementEvaluation { m: w.m(), n, s_hat_n: rec.gramian().smallest(), reports, time_averaged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use crate::observation::{ObservationMode, SparseColumn};

    fn canonical_pool(n: usize) -> ObservationMatrix {
        ObservationMatrix {
            field_len: n,
            mode: ObservationMode::UnitNorm,
            columns: (0..n).map(|k| SparseColumn { cells: vec![k], weights: vec![1.0] }).collect(),
        }
    }

    #[test]
    fn single_mode_picks_its_support() {
        let phi = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let p = greedy_place(&phi, &canonical_pool(3), 1).unwrap();
        assert_eq!(p.indices, vec![0]);
        assert_eq!(p.objectives, vec![1.0]);
    }

    #[test]
    fn three_candidate_example() {
        let r = 0.5f64.sqrt();
        let phi = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, r, 0.0, r]);
        let p = greedy_place(&phi, &canonical_pool(3), 3).unwrap();
        assert_eq!(p.indices, vec![0, 1, 2]);
        assert!((p.objectives[0] - 1.0).abs() < 1e-15);
        assert!((p.objectives[1] - r).abs() < 1e-14);
        assert!((p.objectives[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn argument_errors() {
        let phi = DMatrix::identity(3, 2);
        assert!(matches!(greedy_place(&phi, &canonical_pool(3), 1), Err(Error::WellPosedness { .. })));
        assert!(matches!(greedy_place(&phi, &canonical_pool(3), 4), Err(Error::PoolExhausted { selected: 3 })));
    }

    fn tiles(px: usize, py: usize) -> Vec<PixelSensor> {
        let mut v = Vec::new();
        for j in 0..py {
            for i in 0..px {
                v.push(PixelSensor {
                    rect: Rect::new(i as f64, j as f64, i as f64 + 1.0, j as f64 + 1.0),
                    tile: (i, j),
                    cell_indices: vec![j * px + i],
                    cell_areas: vec![1.0],
                });
            }
        }
        v
    }

    #[test]
    fn outer_ring_first() {
        let pool = tiles(4, 4);
        let p = regular_placement(&pool, 12).unwrap();
        let mut got = p.indices.clone();
        got.sort();
        assert_eq!(got, vec![0, 1, 2, 3, 4, 7, 8, 11, 12, 13, 14, 15]);
        let all = regular_placement(&pool, 16).unwrap();
        assert_eq!(all.indices.len(), 16);
        assert!(regular_placement(&pool, 17).is_err());
    }
}
