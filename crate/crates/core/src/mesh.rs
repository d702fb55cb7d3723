//! Freezer cross-section geometry and the uniform structured finite-volume grid.
//!
//! Cells are numbered row-major from the lower-left corner: `index = j * nx + i`,
//! with `i` running along x. The cabinet occupies `[0, W] x [0, H]`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Minimum cell count per direction.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuctWall {
    Left,
    Right,
}

/// Dimensions of the 2D freezer section, SI units.
///
/// `shelf_y` is the height of the shelf's top surface; the shelf extends
/// `shelf_thickness` below it and the food slab rests on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseGeometry {
    pub cabinet_width: f64,
    pub cabinet_height: f64,
    pub food_width: f64,
    pub food_height: f64,
    pub shelf_width: f64,
    pub shelf_thickness: f64,
    pub inlet_height: f64,
    pub outlet_height: f64,
    pub food_anchor: (f64, f64),
    pub shelf_y: f64,
    /// Left end of the shelf. Defaults to a shelf centred in the cabinet.
    #[serde(default)]
    pub shelf_x: Option<f64>,
    /// Wall carrying both ducts (inlet on top, outlet at the bottom). The
    /// remainder of that wall is the adiabatic rear wall.
    #[serde(default = "default_duct_wall")]
    pub duct_wall: DuctWall,
}

fn default_duct_wall() -> DuctWall {
    DuctWall::Left
}

impl CaseGeometry {
    /// The freezer of the reference case: 0.35 x 0.40 m cabinet, 0.08 x 0.03 m
    /// salmon slab on a 0.25 m glass shelf at mid-height.
    pub fn paper() -> Self {
        CaseGeometry {
            cabinet_width: 0.35,
            cabinet_height: 0.40,
            food_width: 0.08,
            food_height: 0.03,
            shelf_width: 0.25,
            shelf_thickness: 0.002,
            inlet_height: 0.12,
            outlet_height: 0.06,
            food_anchor: (0.14, 0.20),
            shelf_y: 0.20,
            shelf_x: None,
            duct_wall: DuctWall::Left,
        }
    }

    pub fn shelf_left(&self) -> f64 {
        self.shelf_x
            .unwrap_or(0.5 * (self.cabinet_width - self.shelf_width))
    }

    pub fn food_rect(&self) -> Rect {
        let (x0, y0) = self.food_anchor;
        Rect::new(x0, y0, x0 + self.food_width, y0 + self.food_height)
    }

    pub fn shelf_rect(&self) -> Rect {
        let x0 = self.shelf_left();
        Rect::new(
            x0,
            self.shelf_y - self.shelf_thickness,
            x0 + self.shelf_width,
            self.shelf_y,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("cabinet_width", self.cabinet_width),
            ("cabinet_height", self.cabinet_height),
            ("food_width", self.food_width),
            ("food_height", self.food_height),
            ("shelf_width", self.shelf_width),
            ("shelf_thickness", self.shelf_thickness),
            ("inlet_height", self.inlet_height),
            ("outlet_height", self.outlet_height),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Geometry(format!("{name} must be strictly positive, got {v}")));
            }
        }
        if self.inlet_height + self.outlet_height >= self.cabinet_height {
            return Err(Error::Geometry(format!(
                "inlet_height + outlet_height = {} must be below cabinet_height = {}",
                self.inlet_height + self.outlet_height,
                self.cabinet_height
            )));
        }
        let cabinet = Rect::new(0.0, 0.0, self.cabinet_width, self.cabinet_height);
        let food = self.food_rect();
        if !cabinet.strictly_contains(&food) {
            return Err(Error::Geometry(format!(
                "food rectangle {food:?} is not strictly inside the cabinet"
            )));
        }
        let shelf = self.shelf_rect();
        if !cabinet.contains(&shelf) {
            return Err(Error::Geometry(format!(
                "shelf rectangle {shelf:?} lies outside the cabinet"
            )));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn contains(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    pub fn strictly_contains(&self, other: &Rect) -> bool {
        other.x0 > self.x0 && other.x1 < self.x1 && other.y0 > self.y0 && other.y1 < self.y1
    }

    /// True when the interiors intersect.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Fluid,
    Food,
    Shelf,
}

impl CellKind {
    pub fn is_solid(self) -> bool {
        !matches!(self, CellKind::Fluid)
    }

    fn code(self) -> u8 {
        match self {
            CellKind::Fluid => 0,
            CellKind::Food => 1,
            CellKind::Shelf => 2,
        }
    }
}

/// Cell side, used to name boundary faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    West,
    East,
    South,
    North,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Inlet,
    Outlet,
    /// Cabinet walls exchanging heat with the environment.
    Wall,
    /// Adiabatic section of the duct wall between the ducts.
    RearWall,
    /// Interior face between a fluid cell and a solid cell.
    SolidFluid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
}

/// Cell index sets and boundary-face lists per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMask {
    pub fluid: Vec<usize>,
    pub food: Vec<usize>,
    pub shelf: Vec<usize>,
    pub inlet: Vec<BoundaryFace>,
    pub outlet: Vec<BoundaryFace>,
    pub walls: Vec<BoundaryFace>,
    pub rear_wall: Vec<BoundaryFace>,
    pub solid_fluid: Vec<BoundaryFace>,
}

impl DomainMask {
    pub fn segment(&self, segment: Segment) -> &[BoundaryFace] {
        match segment {
            Segment::Inlet => &self.inlet,
            Segment::Outlet => &self.outlet,
            Segment::Wall => &self.walls,
            Segment::RearWall => &self.rear_wall,
            Segment::SolidFluid => &self.solid_fluid,
        }
    }
}

/// Uniform structured grid with material labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid {
    pub nx: usize,
    pub ny: usize,
    pub x_faces: Vec<f64>,
    pub y_faces: Vec<f64>,
    pub cell_area: Vec<f64>,
    pub mask: Vec<CellKind>,
    /// Geometry after snapping every rectangle to grid faces.
    pub geometry: CaseGeometry,
    pub domain: DomainMask,
}

fn faces(length: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| length * k as f64 / n as f64).collect()
}

fn snap(faces: &[f64], v: f64) -> usize {
    let h = faces[1] - faces[0];
    let k = (v / h).round();
    (k.max(0.0) as usize).min(faces.len() - 1)
}

/// Builds the grid and snaps the food, shelf and duct extents onto its faces.
pub fn build_grid(geom: &CaseGeometry, nx: usize, ny: usize) -> Result<StructuredGrid> {
    if nx < MIN_CELLS || ny < MIN_CELLS {
        return Err(Error::Geometry(format!(
            "grid {nx}x{ny} is too coarse, at least {MIN_CELLS} cells per direction are required"
        )));
    }
    geom.validate()?;
    let xf = faces(geom.cabinet_width, nx);
    let yf = faces(geom.cabinet_height, ny);

    let food = geom.food_rect();
    let (fi0, fi1) = (snap(&xf, food.x0), snap(&xf, food.x1));
    let (fj0, fj1) = (snap(&yf, food.y0), snap(&yf, food.y1));
    if fi1 < fi0 + 2 || fj1 < fj0 + 2 {
        return Err(Error::Geometry(format!(
            "grid {nx}x{ny} resolves the food slab with {}x{} cells, at least 2 per direction are required",
            fi1.saturating_sub(fi0),
            fj1.saturating_sub(fj0)
        )));
    }
    if fi0 == 0 || fj0 == 0 || fi1 == nx || fj1 == ny {
        return Err(Error::Geometry(
            "snapped food slab touches the cabinet boundary".into(),
        ));
    }

    let shelf = geom.shelf_rect();
    let (si0, si1) = (snap(&xf, shelf.x0), snap(&xf, shelf.x1));
    let sj1 = snap(&yf, shelf.y1);
    let mut sj0 = snap(&yf, shelf.y0);
    if sj0 >= sj1 {
        // thinner than a cell: keep one cell layer below the top surface
        if sj1 == 0 {
            return Err(Error::Geometry("shelf collapses onto the cabinet floor".into()));
        }
        sj0 = sj1 - 1;
    }
    if si1 <= si0 {
        return Err(Error::Geometry("shelf is narrower than one cell".into()));
    }
    if fj0 != sj1 {
        return Err(Error::Geometry(format!(
            "food slab bottom (y = {}) does not rest on the shelf top (y = {})",
            yf[fj0], yf[sj1]
        )));
    }
    if fi0 < si0 || fi1 > si1 {
        return Err(Error::Geometry("food slab overhangs the shelf".into()));
    }

    let inlet_cells = snap(&yf, geom.inlet_height).max(1);
    let outlet_cells = snap(&yf, geom.outlet_height).max(1);
    if inlet_cells + outlet_cells >= ny {
        return Err(Error::Geometry("ducts cover the whole duct wall after snapping".into()));
    }

    let mut snapped = geom.clone();
    snapped.food_anchor = (xf[fi0], yf[fj0]);
    snapped.food_width = xf[fi1] - xf[fi0];
    snapped.food_height = yf[fj1] - yf[fj0];
    snapped.shelf_x = Some(xf[si0]);
    snapped.shelf_width = xf[si1] - xf[si0];
    snapped.shelf_y = yf[sj1];
    snapped.shelf_thickness = yf[sj1] - yf[sj0];
    snapped.inlet_height = yf[inlet_cells];
    snapped.outlet_height = yf[outlet_cells];

    let n = nx * ny;
    let mut mask = vec![CellKind::Fluid; n];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if (fi0..fi1).contains(&i) && (fj0..fj1).contains(&j) {
                mask[k] = CellKind::Food;
            } else if (si0..si1).contains(&i) && (sj0..sj1).contains(&j) {
                mask[k] = CellKind::Shelf;
            }
        }
    }
    let cell_area = (0..n)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            (xf[i + 1] - xf[i]) * (yf[j + 1] - yf[j])
        })
        .collect();

    let domain = classify(nx, ny, &mask, geom.duct_wall, inlet_cells, outlet_cells);
    Ok(StructuredGrid {
        nx,
        ny,
        x_faces: xf,
        y_faces: yf,
        cell_area,
        mask,
        geometry: snapped,
        domain,
    })
}

fn classify(
    nx: usize,
    ny: usize,
    mask: &[CellKind],
    duct_wall: DuctWall,
    inlet_cells: usize,
    outlet_cells: usize,
) -> DomainMask {
    let mut d = DomainMask {
        fluid: Vec::new(),
        food: Vec::new(),
        shelf: Vec::new(),
        inlet: Vec::new(),
        outlet: Vec::new(),
        walls: Vec::new(),
        rear_wall: Vec::new(),
        solid_fluid: Vec::new(),
    };
    for (k, kind) in mask.iter().enumerate() {
        match kind {
            CellKind::Fluid => d.fluid.push(k),
            CellKind::Food => d.food.push(k),
            CellKind::Shelf => d.shelf.push(k),
        }
    }
    let (duct_side, duct_i) = match duct_wall {
        DuctWall::Left => (Side::West, 0),
        DuctWall::Right => (Side::East, nx - 1),
    };
    let other_side = if duct_side == Side::West { Side::East } else { Side::West };
    let other_i = if duct_i == 0 { nx - 1 } else { 0 };
    for j in 0..ny {
        let face = BoundaryFace { cell: j * nx + duct_i, side: duct_side };
        if j >= ny - inlet_cells {
            d.inlet.push(face);
        } else if j < outlet_cells {
            d.outlet.push(face);
        } else {
            d.rear_wall.push(face);
        }
        d.walls.push(BoundaryFace { cell: j * nx + other_i, side: other_side });
    }
    for i in 0..nx {
        d.walls.push(BoundaryFace { cell: i, side: Side::South });
        d.walls.push(BoundaryFace { cell: (ny - 1) * nx + i, side: Side::North });
    }
    // each interior solid/fluid face once, owned by its fluid cell
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if mask[k] != CellKind::Fluid {
                continue;
            }
            let neighbours = [
                (i > 0).then(|| (k - 1, Side::West)),
                (i + 1 < nx).then(|| (k + 1, Side::East)),
                (j > 0).then(|| (k - nx, Side::South)),
                (j + 1 < ny).then(|| (k + nx, Side::North)),
            ];
            for (nb, side) in neighbours.into_iter().flatten() {
                if mask[nb].is_solid() {
                    d.solid_fluid.push(BoundaryFace { cell: k, side });
                }
            }
        }
    }
    d
}

impl StructuredGrid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        self.x_faces[1] - self.x_faces[0]
    }

    pub fn dy(&self) -> f64 {
        self.y_faces[1] - self.y_faces[0]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn centroid(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (
            0.5 * (self.x_faces[i] + self.x_faces[i + 1]),
            0.5 * (self.y_faces[j] + self.y_faces[j + 1]),
        )
    }

    pub fn cell_rect(&self, k: usize) -> Rect {
        let (i, j) = self.ij(k);
        Rect::new(self.x_faces[i], self.y_faces[j], self.x_faces[i + 1], self.y_faces[j + 1])
    }

    pub fn cabinet(&self) -> Rect {
        Rect::new(0.0, 0.0, self.geometry.cabinet_width, self.geometry.cabinet_height)
    }

    /// Cell containing `(x, y)`; points on a shared face go to the lower-index cell.
    pub fn locate_point(&self, x: f64, y: f64) -> Result<usize> {
        if !self.cabinet().contains_point(x, y) {
            return Err(Error::OutsideDomain { x, y });
        }
        let i = self.x_faces[1..].partition_point(|&f| f < x);
        let j = self.y_faces[1..].partition_point(|&f| f < y);
        Ok(self.index(i.min(self.nx - 1), j.min(self.ny - 1)))
    }

    /// SHA-256 over the grid resolution, face coordinates, labels and duct layout.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"frost-grid-v1");
        h.update((self.nx as u64).to_le_bytes());
        h.update((self.ny as u64).to_le_bytes());
        for f in self.x_faces.iter().chain(&self.y_faces) {
            h.update(f.to_le_bytes());
        }
        h.update(self.mask.iter().map(|m| m.code()).collect::<Vec<_>>());
        for seg in [&self.domain.inlet, &self.domain.outlet, &self.domain.rear_wall] {
            h.update((seg.len() as u64).to_le_bytes());
            for f in seg {
                h.update((f.cell as u64).to_le_bytes());
            }
        }
        h.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        hex_string(&self.hash())
    }

    pub fn cells_of(&self, kind: CellKind) -> &[usize] {
        match kind {
            CellKind::Fluid => &self.domain.fluid,
            CellKind::Food => &self.domain.food,
            CellKind::Shelf => &self.domain.shelf,
        }
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_grid() -> StructuredGrid {
        build_grid(&CaseGeometry::paper(), 70, 80).unwrap()
    }

    #[test]
    fn paper_geometry_cell_counts() {
        let g = paper_grid();
        assert_eq!(g.len(), 5600);
        assert_eq!(g.domain.food.len(), 16 * 6);
        assert!((g.dx() - 0.005).abs() < 1e-15);
        let (fx, fy) = g.geometry.food_anchor;
        for &k in &g.domain.food {
            let (cx, cy) = g.centroid(k);
            assert!(cx > fx && cx < fx + g.geometry.food_width);
            assert!(cy > fy && cy < fy + g.geometry.food_height);
        }
    }

    #[test]
    fn areas_sum_to_cabinet() {
        let g = paper_grid();
        let total: f64 = g.cell_area.iter().sum();
        assert!((total - 0.35 * 0.40).abs() / (0.35 * 0.40) < 1e-12);
        assert!(g.cell_area.iter().all(|&a| a > 0.0));
        assert!(g.x_faces.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn masks_partition_the_grid() {
        let g = paper_grid();
        let d = &g.domain;
        assert_eq!(d.fluid.len() + d.food.len() + d.shelf.len(), g.len());
        let mut seen = vec![false; g.len()];
        for &k in d.fluid.iter().chain(&d.food).chain(&d.shelf) {
            assert!(!seen[k]);
            seen[k] = true;
        }
    }

    #[test]
    fn boundary_faces_belong_to_one_segment() {
        let g = paper_grid();
        let d = &g.domain;
        let mut all: Vec<(usize, Side)> = [&d.inlet, &d.outlet, &d.walls, &d.rear_wall, &d.solid_fluid]
            .iter()
            .flat_map(|s| s.iter().map(|f| (f.cell, f.side)))
            .collect();
        let n = all.len();
        all.sort_by_key(|&(c, s)| (c, s as u8));
        all.dedup();
        assert_eq!(all.len(), n);
        assert_eq!(d.inlet.len(), 24);
        assert_eq!(d.outlet.len(), 12);
        assert_eq!(d.rear_wall.len(), 80 - 36);
    }

    #[test]
    fn snapping_is_idempotent() {
        let g = paper_grid();
        let again = build_grid(&g.geometry, 70, 80).unwrap();
        assert_eq!(g, again);
        let off = CaseGeometry { food_anchor: (0.1412, 0.2008), ..CaseGeometry::paper() };
        let g2 = build_grid(&off, 70, 80).unwrap();
        assert_eq!(g2.geometry.food_anchor, g.geometry.food_anchor);
        assert_eq!(build_grid(&g2.geometry, 70, 80).unwrap(), g2);
    }

    #[test]
    fn thin_shelf_keeps_one_cell() {
        let g = paper_grid();
        assert_eq!(g.domain.shelf.len(), 50);
        assert!((g.geometry.shelf_thickness - 0.005).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_geometry() {
        let geom = CaseGeometry { food_width: 0.0, ..CaseGeometry::paper() };
        assert!(matches!(build_grid(&geom, 70, 80), Err(Error::Geometry(_))));
        let geom = CaseGeometry { food_anchor: (0.30, 0.20), ..CaseGeometry::paper() };
        assert!(build_grid(&geom, 70, 80).is_err());
        let geom = CaseGeometry { inlet_height: 0.3, outlet_height: 0.1, ..CaseGeometry::paper() };
        assert!(build_grid(&geom, 70, 80).is_err());
        assert!(build_grid(&CaseGeometry::paper(), 7, 80).is_err());
    }

    #[test]
    fn coarse_grid_follows_two_cell_rule() {
        match build_grid(&CaseGeometry::paper(), 8, 8) {
            Ok(g) => assert!(!g.domain.food.is_empty()),
            Err(Error::Geometry(msg)) => assert!(msg.contains("at least 2")),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn locate_point_rules() {
        let g = paper_grid();
        assert_eq!(g.locate_point(0.0, 0.0).unwrap(), 0);
        let (ax, ay) = g.geometry.food_anchor;
        let p1 = g.locate_point(ax + 0.052, ay + 0.015).unwrap();
        assert_eq!(g.mask[p1], CellKind::Food);
        let x = g.x_faces[10];
        let k = g.locate_point(x, 0.001).unwrap();
        assert_eq!(g.ij(k), (9, 0));
        assert_eq!(g.locate_point(0.35, 0.40).unwrap(), g.len() - 1);
        assert!(matches!(g.locate_point(0.36, 0.1), Err(Error::OutsideDomain { .. })));
        assert!(g.locate_point(-1e-9, 0.1).is_err());
    }

    #[test]
    fn hash_distinguishes_grids() {
        let a = paper_grid();
        let b = build_grid(&CaseGeometry::paper(), 35, 40).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), paper_grid().hash());
    }
}
