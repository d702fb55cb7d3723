//! Pixel sensors and the observation matrix `W`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mesh::{hex_string, CellKind, Rect, StructuredGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Normalised indicator: column has unit Euclidean norm.
    #[default]
    UnitNorm,
    /// Area-weighted mean over the pixel.
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelSensor {
    pub rect: Rect,
    /// Pixel position in the tiling, column then row.
    pub tile: (usize, usize),
    pub cell_indices: Vec<usize>,
    pub cell_areas: Vec<f64>,
}

impl PixelSensor {
    pub fn area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    pub fn weights(&self, mode: ObservationMode) -> Vec<f64> {
        match mode {
            ObservationMode::UnitNorm => {
                // cell_area / sqrt(pixel_area), then scaled to unit length
                let raw: Vec<f64> = self.cell_areas.iter().map(|a| a / self.area().sqrt()).collect();
                let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
                raw.iter().map(|w| w / norm).collect()
            }
            ObservationMode::Average => {
                let total = self.area();
                self.cell_areas.iter().map(|a| a / total).collect()
            }
        }
    }
}

fn cells_per_pixel(pixel: f64, cell: f64, axis: &str) -> Result<usize> {
    let ratio = pixel / cell;
    let r = ratio.round();
    if !(pixel > 0.0) || r < 1.0 || (ratio - r).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "pixel size {pixel} is not an integer multiple of the {axis} cell size {cell}"
        )));
    }
    Ok(r as usize)
}

/// Tiles the cabinet with square pixels anchored at the origin. Pixels on the
/// top and right edges are clipped to the cabinet; pixels touching any cell
/// rejected by `include` are dropped whole.
pub fn build_pixel_grid<F>(grid: &StructuredGrid, pixel_size: f64, include: F) -> Result<Vec<PixelSensor>>
where
    F: Fn(CellKind) -> bool,
{
    let cx = cells_per_pixel(pixel_size, grid.dx(), "x")?;
    let cy = cells_per_pixel(pixel_size, grid.dy(), "y")?;
    let px = grid.nx.div_ceil(cx);
    let py = grid.ny.div_ceil(cy);
    let mut out = Vec::new();
    for pj in 0..py {
        for pi in 0..px {
            let (i0, i1) = (pi * cx, ((pi + 1) * cx).min(grid.nx));
            let (j0, j1) = (pj * cy, ((pj + 1) * cy).min(grid.ny));
            let mut cells = Vec::with_capacity(cx * cy);
            for j in j0..j1 {
                for i in i0..i1 {
                    cells.push(grid.index(i, j));
                }
            }
            if cells.iter().any(|&k| !include(grid.mask[k])) {
                continue;
            }
            out.push(PixelSensor {
                rect: Rect::new(grid.x_faces[i0], grid.y_faces[j0], grid.x_faces[i1], grid.y_faces[j1]),
                tile: (pi, pj),
                cell_areas: cells.iter().map(|&k| grid.cell_area[k]).collect(),
                cell_indices: cells,
            });
        }
    }
    Ok(out)
}

/// Rebuilds sensors from rectangles: each covers the cells whose centroids it contains.
pub fn sensors_from_rects(grid: &StructuredGrid, rects: &[Rect]) -> Result<Vec<PixelSensor>> {
    let (dx, dy) = (grid.dx(), grid.dy());
    rects
        .iter()
        .map(|r| {
            let i0 = (r.x0 / dx).round() as usize;
            let i1 = ((r.x1 / dx).round() as usize).min(grid.nx);
            let j0 = (r.y0 / dy).round() as usize;
            let j1 = ((r.y1 / dy).round() as usize).min(grid.ny);
            if i0 >= i1 || j0 >= j1 {
                return Err(Error::InvalidArgument(format!("sensor rectangle {r:?} covers no cells")));
            }
            let cells: Vec<usize> = (j0..j1).flat_map(|j| (i0..i1).map(move |i| (i, j))).map(|(i, j)| grid.index(i, j)).collect();
            let side = (r.width().max(r.height())).max(f64::MIN_POSITIVE);
            Ok(PixelSensor {
                rect: *r,
                tile: ((r.x0 / side).round() as usize, (r.y0 / side).round() as usize),
                cell_areas: cells.iter().map(|&k| grid.cell_area[k]).collect(),
                cell_indices: cells,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumn {
    pub cells: Vec<usize>,
    pub weights: Vec<f64>,
}

/// `W` in R^{N x m}, stored column-sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub field_len: usize,
    pub mode: ObservationMode,
    pub columns: Vec<SparseColumn>,
}

pub fn assemble_observer(sensors: &[PixelSensor], field_len: usize, mode: ObservationMode) -> Result<ObservationMatrix> {
    if sensors.is_empty() {
        return Err(Error::InvalidArgument("no sensors given".into()));
    }
    let mut owner: HashMap<usize, usize> = HashMap::new();
    let mut columns = Vec::with_capacity(sensors.len());
    for (s, sensor) in sensors.iter().enumerate() {
        if sensor.cell_indices.is_empty() {
            return Err(Error::InvalidArgument(format!("sensor {s} covers no cells")));
        }
        for &k in &sensor.cell_indices {
            if k >= field_len {
                return Err(Error::InvalidArgument(format!("sensor {s} references cell {k} outside the field")));
            }
            if let Some(&other) = owner.get(&k) {
                return Err(Error::OverlappingSensors(other, s));
            }
            owner.insert(k, s);
        }
        columns.push(SparseColumn { cells: sensor.cell_indices.clone(), weights: sensor.weights(mode) });
    }
    Ok(ObservationMatrix { field_len, mode, columns })
}

impl ObservationMatrix {
    pub fn m(&self) -> usize {
        self.columns.len()
    }

    /// `W^T t`.
    pub fn apply_transpose(&self, t: &[f64]) -> Result<Vec<f64>> {
        check_len("field", self.field_len, t.len())?;
        Ok(self
            .columns
            .iter()
            .map(|c| c.cells.iter().zip(&c.weights).map(|(&k, w)| w * t[k]).sum())
            .collect())
    }

    /// `W^T Phi` for a dense `N x n` matrix.
    pub fn cross(&self, phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len("basis rows", self.field_len, phi.nrows())?;
        let mut g = DMatrix::zeros(self.m(), phi.ncols());
        for (r, c) in self.columns.iter().enumerate() {
            for (&k, &w) in c.cells.iter().zip(&c.weights) {
                for j in 0..phi.ncols() {
                    g[(r, j)] += w * phi[(k, j)];
                }
            }
        }
        Ok(g)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.field_len, self.m());
        for (r, c) in self.columns.iter().enumerate() {
            for (&k, &v) in c.cells.iter().zip(&c.weights) {
                w[(k, r)] = v;
            }
        }
        w
    }

    /// Keeps the listed columns, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<ObservationMatrix> {
        let columns = indices
            .iter()
            .map(|&i| {
                self.columns
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("sensor index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        if columns.is_empty() {
            return Err(Error::InvalidArgument("no sensors selected".into()));
        }
        Ok(ObservationMatrix { field_len: self.field_len, mode: self.mode, columns })
    }
}

/// `l = W^T t` plus optional seeded Gaussian noise.
pub fn measure(w: &ObservationMatrix, t: &[f64], noise_sd: f64, seed: u64) -> Result<Vec<f64>> {
    let mut ell = w.apply_transpose(t)?;
    if noise_sd < 0.0 || !noise_sd.is_finite() {
        return Err(Error::InvalidArgument(format!("noise standard deviation {noise_sd} must be >= 0")));
    }
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut ell {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(ell)
}

/// JSON sensor layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub grid_hash: String,
    pub mode: ObservationMode,
    pub sensors: Vec<Rect>,
    /// Greedy audit trail, when the layout came from a placement run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objectives: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl SensorLayout {
    pub fn new(grid: &StructuredGrid, mode: ObservationMode, sensors: &[PixelSensor]) -> Self {
        SensorLayout {
            grid_hash: grid.hash_hex(),
            mode,
            sensors: sensors.iter().map(|s| s.rect).collect(),
            objectives: None,
            config_hash: None,
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn observer(&self, grid: &StructuredGrid) -> Result<ObservationMatrix> {
        if self.grid_hash != grid.hash_hex() {
            return Err(Error::GridMismatch(format!(
                "sensor layout built for grid {} but the grid is {}",
                self.grid_hash,
                hex_string(&grid.hash())
            )));
        }
        let sensors = sensors_from_rects(grid, &self.sensors)?;
        assemble_observer(&sensors, grid.len(), self.mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_grid, CaseGeometry};

    fn paper_grid() -> StructuredGrid {
        build_grid(&CaseGeometry::paper(), 70, 80).unwrap()
    }

    fn box_grid(size: f64, n: usize) -> StructuredGrid {
        let g = CaseGeometry {
            cabinet_width: size,
            cabinet_height: size,
            food_width: size / 4.0,
            food_height: size / 4.0,
            shelf_width: size / 2.0,
            shelf_thickness: size / n as f64,
            inlet_height: size / 4.0,
            outlet_height: size / 4.0,
            food_anchor: (size / 4.0, size / 2.0),
            shelf_y: size / 2.0,
            shelf_x: Some(size / 4.0),
            ..CaseGeometry::paper()
        };
        build_grid(&g, n, n).unwrap()
    }

    #[test]
    fn four_pixels_on_small_cabinet() {
        let g = box_grid(0.04, 8);
        let p = build_pixel_grid(&g, 0.02, |_| true).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|s| s.cell_indices.len() == 16));
    }

    #[test]
    fn paper_pixel_counts() {
        let g = paper_grid();
        let full = build_pixel_grid(&g, 0.02, |_| true).unwrap();
        let no_food = build_pixel_grid(&g, 0.02, |k| k != CellKind::Food).unwrap();
        // 17.5 x 20 pixels: the right-hand column is clipped to 1 cm
        assert_eq!(full.len(), 360);
        assert_eq!(no_food.len(), 352);
        let area: f64 = full.iter().map(|s| s.area()).sum();
        assert!((area - 0.35 * 0.40).abs() < 1e-12);
    }

    #[test]
    fn pixel_size_must_align() {
        let g = paper_grid();
        assert!(build_pixel_grid(&g, 0.013, |_| true).is_err());
        assert!(build_pixel_grid(&g, 0.0, |_| true).is_err());
    }

    #[test]
    fn weights_for_four_equal_cells() {
        let s = PixelSensor {
            rect: Rect::new(0.0, 0.0, 0.02, 0.02),
            tile: (0, 0),
            cell_indices: vec![0, 1, 2, 3],
            cell_areas: vec![1e-4; 4],
        };
        for w in s.weights(ObservationMode::UnitNorm) {
            assert!((w - 0.5).abs() < 1e-15);
        }
        for w in s.weights(ObservationMode::Average) {
            assert!((w - 0.25).abs() < 1e-15);
        }
        let w = assemble_observer(std::slice::from_ref(&s), 4, ObservationMode::UnitNorm).unwrap();
        assert!((measure(&w, &[10.0; 4], 0.0, 0).unwrap()[0] - 20.0).abs() < 1e-12);
        let w = assemble_observer(&[s], 4, ObservationMode::Average).unwrap();
        assert!((measure(&w, &[10.0; 4], 0.0, 0).unwrap()[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_pixels_are_orthonormal() {
        let g = paper_grid();
        let p = build_pixel_grid(&g, 0.02, |_| true).unwrap();
        let w = assemble_observer(&p, g.len(), ObservationMode::UnitNorm).unwrap().to_dense();
        let gram = w.tr_mul(&w);
        assert!((gram - DMatrix::identity(p.len(), p.len())).amax() < 1e-12);
    }

    #[test]
    fn overlap_is_rejected() {
        let g = paper_grid();
        let p = build_pixel_grid(&g, 0.02, |_| true).unwrap();
        let dup = vec![p[3].clone(), p[5].clone(), p[3].clone()];
        assert!(matches!(assemble_observer(&dup, g.len(), ObservationMode::UnitNorm), Err(Error::OverlappingSensors(0, 2))));
        assert!(assemble_observer(&[], g.len(), ObservationMode::UnitNorm).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let g = paper_grid();
        let p = build_pixel_grid(&g, 0.04, |_| true).unwrap();
        let w = assemble_observer(&p, g.len(), ObservationMode::Average).unwrap();
        let t = vec![1.0; g.len()];
        assert_eq!(measure(&w, &t, 0.0, 1).unwrap(), measure(&w, &t, 0.0, 2).unwrap());
        let a = measure(&w, &t, 0.1, 9).unwrap();
        assert_eq!(a, measure(&w, &t, 0.1, 9).unwrap());
        assert_ne!(a, measure(&w, &t, 0.1, 10).unwrap());
        assert!(measure(&w, &t[1..], 0.0, 0).is_err());
    }

    #[test]
    fn layout_round_trip() {
        let g = paper_grid();
        let p = build_pixel_grid(&g, 0.02, |k| k != CellKind::Food).unwrap();
        let layout = SensorLayout::new(&g, ObservationMode::UnitNorm, &p);
        let json = serde_json::to_string(&layout).unwrap();
        let back: SensorLayout = serde_json::from_str(&json).unwrap();
        let w0 = assemble_observer(&p, g.len(), ObservationMode::UnitNorm).unwrap();
        assert_eq!(back.observer(&g).unwrap(), w0);
        let other = build_grid(&CaseGeometry::paper(), 35, 40).unwrap();
        assert!(matches!(back.observer(&other), Err(Error::GridMismatch(_))));
    }
}
