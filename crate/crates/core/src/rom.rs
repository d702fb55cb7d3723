//! Snapshot matrix assembly and the truncated SVD (POD) basis.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::format::{read_array, read_f64s, read_len, write_f64s, SnapshotSet};
use crate::mesh::hex_string;
use crate::solver::ParameterSample;

pub const ROM_MAGIC: &[u8; 5] = b"FROM1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub run: usize,
    pub time: f64,
    pub params: ParameterSample,
}

#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    /// N x K, one snapshot per column.
    pub data: DMatrix<f64>,
    pub column_meta: Vec<ColumnMeta>,
    pub grid_hash: [u8; 32],
    /// Mean field removed from every column, when requested.
    pub mean: Option<Vec<f64>>,
}

impl SnapshotMatrix {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }
}

/// Concatenates runs column-wise in run/time order.
pub fn assemble_snapshots(runs: &[SnapshotSet], subtract_mean: bool) -> Result<SnapshotMatrix> {
    let first = runs.first().ok_or_else(|| Error::InvalidArgument("no snapshot runs given".into()))?;
    let n = first.field_len;
    let mut cols = Vec::new();
    let mut meta = Vec::new();
    for (run, set) in runs.iter().enumerate() {
        if set.grid_hash != first.grid_hash {
            return Err(Error::GridMismatch(format!(
                "run {run} has grid {} but run 0 has {}",
                hex_string(&set.grid_hash),
                hex_string(&first.grid_hash)
            )));
        }
        check_len("snapshot field", n, set.field_len)?;
        for s in &set.snapshots {
            cols.push(DVector::from_column_slice(&s.temperature));
            meta.push(ColumnMeta { run, time: s.time, params: s.params });
        }
    }
    if cols.is_empty() {
        return Err(Error::InvalidArgument("snapshot runs contain no snapshots".into()));
    }
    let mut data = DMatrix::from_columns(&cols);
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("snapshot matrix".into()));
    }
    let mean = subtract_mean.then(|| {
        let m: Vec<f64> = data.row_iter().map(|r| r.mean()).collect();
        for mut c in data.column_iter_mut() {
            for (v, mu) in c.iter_mut().zip(&m) {
                *v -= mu;
            }
        }
        m
    });
    Ok(SnapshotMatrix { data, column_meta: meta, grid_hash: first.grid_hash, mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PODBasis {
    /// N x n_max, orthonormal columns.
    pub phi: DMatrix<f64>,
    /// Leading singular values, non-increasing.
    pub sigma: Vec<f64>,
    /// Sum of the squared singular values beyond `n_max`.
    pub residual_sq: f64,
    pub grid_hash: [u8; 32],
    pub mean: Option<Vec<f64>>,
}

/// Thin SVD of `a`, singular values sorted non-increasing.
fn thin_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    if a.nrows() > a.ncols() {
        // QR first keeps the dense SVD at K x K
        let qr = a.clone().qr();
        let q = qr.q();
        let svd = qr.r().svd(true, false);
        let u = q * svd.u.expect("requested U");
        sort_svd(u, svd.singular_values.as_slice().to_vec())
    } else {
        let svd = a.clone().svd(true, false);
        sort_svd(svd.u.expect("requested U"), svd.singular_values.as_slice().to_vec())
    }
}

fn sort_svd(u: DMatrix<f64>, s: Vec<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let cols: Vec<DVector<f64>> = order.iter().map(|&i| u.column(i).into_owned()).collect();
    let u = DMatrix::from_columns(&cols);
    (u, order.iter().map(|&i| s[i].max(0.0)).collect())
}

/// Flips each column so that its largest-magnitude entry is positive.
fn fix_signs(phi: &mut DMatrix<f64>) {
    for mut c in phi.column_iter_mut() {
        let mut best = 0usize;
        for (i, v) in c.iter().enumerate() {
            if v.abs() > c[best].abs() {
                best = i;
            }
        }
        if c[best] < 0.0 {
            c.neg_mut();
        }
    }
}

pub fn compute_pod(a: &SnapshotMatrix, n_max: usize) -> Result<PODBasis> {
    pod_impl(a, n_max, None)
}

/// POD in the area-weighted inner product. Rows are scaled by `sqrt(area / mean area)`
/// before the SVD and unscaled afterwards, so a uniform grid gives the plain basis.
pub fn compute_pod_weighted(a: &SnapshotMatrix, n_max: usize, cell_area: &[f64]) -> Result<PODBasis> {
    check_len("cell areas", a.rows(), cell_area.len())?;
    if cell_area.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("cell areas must be positive".into()));
    }
    pod_impl(a, n_max, Some(cell_area))
}

fn pod_impl(a: &SnapshotMatrix, n_max: usize, area: Option<&[f64]>) -> Result<PODBasis> {
    let limit = a.rows().min(a.cols());
    if n_max == 0 || n_max > limit {
        return Err(Error::InvalidArgument(format!("n_max = {n_max} must lie in [1, {limit}]")));
    }
    let scale: Option<Vec<f64>> = area.map(|w| {
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        w.iter().map(|x| (x / mean).sqrt()).collect()
    });
    let (u, s) = match &scale {
        Some(sc) => {
            let mut d = a.data.clone();
            for (i, mut row) in d.row_iter_mut().enumerate() {
                row *= sc[i];
            }
            thin_svd(&d)
        }
        None => thin_svd(&a.data),
    };
    let mut phi = u.columns(0, n_max).into_owned();
    if let Some(sc) = &scale {
        for (i, mut row) in phi.row_iter_mut().enumerate() {
            row /= sc[i];
        }
    }
    fix_signs(&mut phi);
    let residual_sq = s[n_max..].iter().map(|x| x * x).sum();
    Ok(PODBasis {
        phi,
        sigma: s[..n_max].to_vec(),
        residual_sq,
        grid_hash: a.grid_hash,
        mean: a.mean.clone(),
    })
}

impl PODBasis {
    pub fn field_len(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.sigma.len()
    }

    /// `||A||_F^2`, the sum of all squared singular values.
    pub fn total_energy(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>() + self.residual_sq
    }

    /// `sqrt(sum_{i>n} s_i^2) / sqrt(sum s_i^2)`.
    pub fn tail_energy(&self, n: usize) -> Result<f64> {
        if n > self.n_max() {
            return Err(Error::InvalidArgument(format!("n = {n} exceeds n_max = {}", self.n_max())));
        }
        let total = self.total_energy();
        if total == 0.0 {
            return Err(Error::Undefined("tail energy of a zero snapshot matrix".into()));
        }
        let tail: f64 = self.sigma[n..].iter().map(|s| s * s).sum::<f64>() + self.residual_sq;
        Ok((tail / total).sqrt())
    }

    pub fn truncated(&self, n: usize) -> Result<DMatrix<f64>> {
        if n == 0 || n > self.n_max() {
            return Err(Error::InvalidArgument(format!("n = {n} must lie in [1, {}]", self.n_max())));
        }
        Ok(self.phi.columns(0, n).into_owned())
    }

    /// `||(I - Phi_n Phi_n^T) t||_2`, with the mean removed first when present.
    pub fn projection_residual(&self, n: usize, t: &[f64]) -> Result<f64> {
        check_len("field", self.field_len(), t.len())?;
        let phi = self.truncated(n)?;
        let mut v = DVector::from_column_slice(t);
        if let Some(m) = &self.mean {
            v -= DVector::from_column_slice(m);
        }
        let c = phi.tr_mul(&v);
        Ok((v - phi * c).norm())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(ROM_MAGIC)?;
        w.write_all(&(self.field_len() as u64).to_le_bytes())?;
        w.write_all(&(self.n_max() as u64).to_le_bytes())?;
        w.write_all(&self.grid_hash)?;
        w.write_all(&[u8::from(self.mean.is_some())])?;
        write_f64s(w, &[self.residual_sq])?;
        write_f64s(w, &self.sigma)?;
        write_f64s(w, self.phi.as_slice())?;
        if let Some(m) = &self.mean {
            write_f64s(w, m)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let magic: [u8; 5] = read_array(r)?;
        if &magic != ROM_MAGIC {
            return Err(Error::Format("not a FROM1 basis file".into()));
        }
        let n = read_len(r)?;
        let n_max = read_len(r)?;
        let grid_hash: [u8; 32] = read_array(r)?;
        let flag: [u8; 1] = read_array(r)?;
        if flag[0] > 1 {
            return Err(Error::Format(format!("invalid mean flag {}", flag[0])));
        }
        let residual_sq = read_f64s(r, 1)?[0];
        let sigma = read_f64s(r, n_max)?;
        let phi = DMatrix::from_vec(n, n_max, read_f64s(r, n * n_max)?);
        let mean = if flag[0] == 1 { Some(read_f64s(r, n)?) } else { None };
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format("trailing bytes after FROM1 payload".into()));
        }
        Ok(PODBasis { phi, sigma, residual_sq, grid_hash, mean })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        PODBasis::read_from(&mut BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Snapshot;

    fn matrix(data: DMatrix<f64>) -> SnapshotMatrix {
        let k = data.ncols();
        SnapshotMatrix {
            data,
            column_meta: (0..k).map(|i| ColumnMeta { run: 0, time: i as f64, params: ParameterSample::mean() }).collect(),
            grid_hash: [1; 32],
            mean: None,
        }
    }

    fn run(hash: u8, base: f64) -> SnapshotSet {
        let snaps = (0..3)
            .map(|t| Snapshot {
                time: t as f64,
                params: ParameterSample::mean(),
                temperature: vec![base + t as f64, 2.0 * base, 0.5],
            })
            .collect();
        SnapshotSet::new([hash; 32], 3, snaps).unwrap()
    }

    #[test]
    fn columns_follow_run_then_time() {
        let a = assemble_snapshots(&[run(0, 1.0), run(0, 10.0)], false).unwrap();
        assert_eq!(a.cols(), 6);
        let firsts: Vec<f64> = (0..6).map(|k| a.data[(0, k)]).collect();
        assert_eq!(firsts, vec![1.0, 2.0, 3.0, 10.0, 11.0, 12.0]);
        assert_eq!(a.column_meta[4].run, 1);
        assert_eq!(a.column_meta[4].time, 1.0);
    }

    #[test]
    fn mean_subtraction_of_constant_columns() {
        let snaps = (0..4)
            .map(|t| Snapshot { time: t as f64, params: ParameterSample::mean(), temperature: vec![3.0, -1.0] })
            .collect();
        let set = SnapshotSet::new([0; 32], 2, snaps).unwrap();
        let a = assemble_snapshots(&[set], true).unwrap();
        assert!(a.data.iter().all(|&v| v == 0.0));
        assert_eq!(a.mean, Some(vec![3.0, -1.0]));
    }

    #[test]
    fn assembly_errors() {
        assert!(assemble_snapshots(&[], false).is_err());
        assert!(matches!(assemble_snapshots(&[run(0, 1.0), run(1, 1.0)], false), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn identity_matrix() {
        let b = compute_pod(&matrix(DMatrix::identity(3, 3)), 3).unwrap();
        for s in &b.sigma {
            assert!((s - 1.0).abs() < 1e-14);
        }
        for c in b.phi.column_iter() {
            assert_eq!(c.iter().filter(|v| (v.abs() - 1.0).abs() < 1e-14).count(), 1);
        }
    }

    #[test]
    fn scaled_canonical_columns() {
        let mut a = DMatrix::zeros(4, 2);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 1.0;
        let b = compute_pod(&matrix(a), 2).unwrap();
        assert!((b.sigma[0] - 2.0).abs() < 1e-14 && (b.sigma[1] - 1.0).abs() < 1e-14);
        assert!((b.phi[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((b.phi[(1, 1)] - 1.0).abs() < 1e-14);
        assert!((b.tail_energy(1).unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(b.tail_energy(2).unwrap(), 0.0);
        assert_eq!(b.tail_energy(0).unwrap(), 1.0);
    }

    #[test]
    fn equal_spectrum_tail() {
        let b = compute_pod(&matrix(DMatrix::identity(4, 4)), 4).unwrap();
        assert!((b.tail_energy(2).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rank_one_matrix() {
        let u = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
        let v = DVector::from_vec(vec![3.0, 1.0, 2.0]);
        let b = compute_pod(&matrix(&u * v.transpose()), 2).unwrap();
        assert!(b.sigma[1] <= 1e-10 * b.sigma[0]);
    }

    #[test]
    fn n_max_range_and_zero_matrix() {
        let a = matrix(DMatrix::zeros(5, 3));
        assert!(compute_pod(&a, 0).is_err());
        assert!(compute_pod(&a, 4).is_err());
        let b = compute_pod(&a, 2).unwrap();
        assert!(matches!(b.tail_energy(1), Err(Error::Undefined(_))));
    }

    #[test]
    fn sign_convention_and_orthonormality() {
        let a = DMatrix::from_fn(30, 8, |i, j| ((i * 7 + j * 3) as f64).sin() + 0.1 * (i as f64) * (j as f64 - 3.0));
        let b = compute_pod(&matrix(a), 6).unwrap();
        let gram = b.phi.tr_mul(&b.phi);
        assert!((gram - DMatrix::identity(6, 6)).amax() < 1e-12);
        for c in b.phi.column_iter() {
            let big = c.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
        assert!(b.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn wide_matrices_work() {
        let a = DMatrix::from_fn(4, 9, |i, j| (i as f64 + 1.0) * ((j as f64) * 0.3).cos() + (i * j) as f64 * 0.01);
        let b = compute_pod(&matrix(a), 4).unwrap();
        assert!((b.phi.tr_mul(&b.phi) - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn uniform_area_weighting_is_neutral() {
        let a = matrix(DMatrix::from_fn(12, 5, |i, j| ((i + 2 * j) as f64).cos()));
        let plain = compute_pod(&a, 3).unwrap();
        let weighted = compute_pod_weighted(&a, 3, &[0.25; 12]).unwrap();
        assert!((plain.phi.clone() - weighted.phi).amax() < 1e-12);
    }

    #[test]
    fn projection_residual_of_member_is_zero() {
        let a = matrix(DMatrix::from_fn(10, 4, |i, j| ((i * (j + 1)) as f64).sin()));
        let b = compute_pod(&a, 4).unwrap();
        let t: Vec<f64> = b.phi.column(1).iter().map(|v| 3.0 * v).collect();
        assert!(b.projection_residual(2, &t).unwrap() < 1e-12);
        assert!(b.projection_residual(1, &t).unwrap() > 1.0);
    }

    #[test]
    fn from1_round_trip() {
        let mut a = matrix(DMatrix::from_fn(6, 4, |i, j| (i as f64 - j as f64).powi(2)));
        a.mean = Some(vec![0.5; 6]);
        let b = compute_pod(&a, 3).unwrap();
        let mut bytes = Vec::new();
        b.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..5], b"FROM1");
        let back = PODBasis::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, b);
        assert!(PODBasis::read_from(&mut &bytes[..bytes.len() - 1]).is_err());
    }
}
