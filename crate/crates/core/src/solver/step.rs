//! Implicit finite-volume time stepping of the conjugate energy equation.
//!
//! Every cell carries `dH/dt + div(u H) = div(lambda grad T) + s`, where `H(T)`
//! is the volumetric enthalpy (`rho cp T` in air). The time derivative uses the
//! BDF coefficients on `H`; the non-linear capacity is linearised around the
//! latest Picard iterate, `H(T) ~ H(T_k) + C(T_k) (T - T_k)`. Advection is
//! implicit first-order upwind plus a deferred WENO3/Lax-Friedrichs correction
//! evaluated at the latest iterate, so converged steps carry the high-order flux.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bdf::{bdf2opt_coefficients, BdfCoefficients, CHI_DEFAULT};
use super::linsolve::{bicgstab, Stencil5};
use super::params::ParameterSample;
use super::velocity::{build_velocity_field, VelocityField};
use super::weno::{lax_friedrichs_face_flux, weno3_weight, weno3_with_weight};
use crate::error::{check_len, Error, Result};
use crate::materials::ThermalModel;
use crate::mesh::{BoundaryFace, CellKind, Side, StructuredGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub chi: f64,
    /// Picard stops when `max |T_{k+1} - T_k| / max(1, max |T_{k+1}|)` drops below this.
    pub picard_tol: f64,
    pub max_picard_iters: usize,
    /// History depth of the Anderson acceleration of the Picard loop; 0 disables it.
    pub anderson_depth: usize,
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    /// Insulation layer of the cabinet walls.
    pub wall_conductivity: f64,
    pub wall_thickness: f64,
    /// When false the shelf is removed from the thermal solve (adiabatic, frozen temperature).
    pub shelf_conducts: bool,
    /// When false inlet and outlet are closed and adiabatic; requires still air.
    pub open_ducts: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            chi: CHI_DEFAULT,
            picard_tol: 1e-6,
            max_picard_iters: 50,
            anderson_depth: 5,
            linear_tol: 1e-10,
            max_linear_iters: 2000,
            wall_conductivity: 0.026,
            wall_thickness: 0.05,
            shelf_conducts: true,
            open_ducts: true,
        }
    }
}

/// Past temperature levels, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    levels: Vec<Vec<f64>>,
    steps: usize,
    time: f64,
}

impl History {
    pub fn new(initial: Vec<f64>, time: f64) -> Self {
        History { levels: vec![initial], steps: 0, time }
    }

    pub fn current(&self) -> &[f64] {
        &self.levels[0]
    }

    pub fn level(&self, back: usize) -> Option<&[f64]> {
        self.levels.get(back).map(|v| v.as_slice())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn push(&mut self, field: Vec<f64>, dt: f64) {
        self.levels.insert(0, field);
        self.levels.truncate(3);
        self.steps += 1;
        self.time += dt;
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: Vec<f64>,
    pub picard_iterations: usize,
    /// Relative change after every Picard iteration.
    pub changes: Vec<f64>,
}

/// Anderson mixing for the fixed point `x = G(x)`.
struct Anderson {
    depth: usize,
    /// Differences of successive residuals `G(x) - x` and images `G(x)`.
    d_res: Vec<Vec<f64>>,
    d_img: Vec<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson { depth, d_res: Vec::new(), d_img: Vec::new(), last: None }
    }

    /// Next iterate given the current iterate `x` and its image `g = G(x)`.
    fn next(&mut self, x: &[f64], g: Vec<f64>) -> Vec<f64> {
        if self.depth == 0 {
            return g;
        }
        let f: Vec<f64> = g.iter().zip(x).map(|(a, b)| a - b).collect();
        if let Some((f_old, g_old)) = self.last.take() {
            self.d_res.push(f.iter().zip(&f_old).map(|(a, b)| a - b).collect());
            self.d_img.push(g.iter().zip(&g_old).map(|(a, b)| a - b).collect());
            if self.d_res.len() > self.depth {
                self.d_res.remove(0);
                self.d_img.remove(0);
            }
        }
        self.last = Some((f.clone(), g.clone()));
        let m = self.d_res.len();
        if m == 0 {
            return g;
        }
        let df = DMatrix::from_fn(f.len(), m, |i, j| self.d_res[j][i]);
        let gamma = match df.clone().svd(true, true).solve(&DVector::from_column_slice(&f), 1e-10 * df.norm()) {
            Ok(v) if v.iter().all(|c| c.is_finite()) => v,
            _ => {
                self.d_res.clear();
                self.d_img.clear();
                return g;
            }
        };
        let mut out = g;
        for (j, dg) in self.d_img.iter().enumerate() {
            for (o, d) in out.iter_mut().zip(dg) {
                *o -= gamma[j] * d;
            }
        }
        out
    }
}

/// WENO weights per face and cell conductivities, frozen after a few Picard
/// iterations so that switching between stencils or table pieces cannot make
/// the loop cycle.
struct WenoWeights {
    left: Vec<f64>,
    right: Vec<f64>,
    lambda: Vec<f64>,
    frozen: bool,
}

impl WenoWeights {
    fn new(n: usize) -> Self {
        // two faces (east, north) per cell
        WenoWeights { left: vec![0.0; 2 * n], right: vec![0.0; 2 * n], lambda: Vec::new(), frozen: false }
    }
}

/// Picard iteration after which the lagged coefficients stop being updated.
const WENO_FREEZE_ITER: usize = 4;

/// Full-state snapshot of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub params: ParameterSample,
    pub temperature: Vec<f64>,
}

pub struct ForwardSolver<'a, M: ThermalModel + ?Sized> {
    grid: &'a StructuredGrid,
    materials: &'a M,
    settings: SolverSettings,
    params: ParameterSample,
    velocity: VelocityField,
    blended: BdfCoefficients,
}

#[derive(Clone, Copy)]
enum Dir {
    East,
    North,
}

impl<'a, M: ThermalModel + ?Sized> ForwardSolver<'a, M> {
    pub fn new(
        grid: &'a StructuredGrid,
        materials: &'a M,
        settings: SolverSettings,
        params: ParameterSample,
    ) -> Result<Self> {
        params.validate()?;
        let blended = bdf2opt_coefficients(settings.chi)?;
        let velocity = if settings.open_ducts {
            build_velocity_field(grid, params.u_in)?
        } else {
            if params.u_in != 0.0 {
                return Err(Error::InvalidArgument("closed ducts require u_in = 0".into()));
            }
            VelocityField::zeros(grid.nx, grid.ny)
        };
        Ok(ForwardSolver { grid, materials, settings, params, velocity, blended })
    }

    pub fn velocity(&self) -> &VelocityField {
        &self.velocity
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn params(&self) -> &ParameterSample {
        &self.params
    }

    /// Equivalent thermal resistance of the walls, or `None` when insulated.
    pub fn wall_resistance(&self) -> Option<f64> {
        (self.params.h_ext > 0.0).then(|| {
            1.0 / self.params.h_ext + self.settings.wall_thickness / self.settings.wall_conductivity
        })
    }

    fn active(&self, kind: CellKind) -> bool {
        self.settings.shelf_conducts || kind != CellKind::Shelf
    }

    /// Coefficients used for the next step of `history` (start-up rule included).
    pub fn coefficients_for(&self, history: &History) -> BdfCoefficients {
        BdfCoefficients::for_step(history.steps().min(history.levels.len()), self.blended)
    }

    /// Computes the next temperature level. `source` is a volumetric heat source
    /// (W m^-3) per cell evaluated at the new time level.
    pub fn advance_step(&self, history: &History, dt: f64, source: Option<&[f64]>) -> Result<StepOutcome> {
        let grid = self.grid;
        let n = grid.len();
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
        }
        check_len("temperature field", n, history.current().len())?;
        if let Some(s) = source {
            check_len("source field", n, s.len())?;
        }
        let coeffs = self.coefficients_for(history);

        // history part of the BDF enthalpy derivative
        let mut past = vec![0.0; n];
        for (back, &c) in coeffs.0[1..].iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let level = history
                .level(back)
                .ok_or_else(|| Error::InvalidArgument("not enough history levels".into()))?;
            for k in 0..n {
                past[k] += c * self.materials.enthalpy(grid.mask[k], level[k]);
            }
        }

        let t_n = history.current();
        let mut tk: Vec<f64> = match history.level(1) {
            Some(prev) if history.steps() >= 1 => {
                t_n.iter().zip(prev).map(|(a, b)| 2.0 * a - b).collect()
            }
            _ => t_n.to_vec(),
        };
        let single_pass = self.materials.is_linear() && self.velocity.is_zero();
        let mut a = Stencil5::zeros(grid.nx, grid.ny);
        let mut b = vec![0.0; n];
        let mut changes = Vec::new();
        let mut accel = Anderson::new(self.settings.anderson_depth);
        let mut weights = WenoWeights::new(n);
        for it in 1..=self.settings.max_picard_iters {
            weights.frozen = it > WENO_FREEZE_ITER;
            self.assemble(&tk, t_n, &past, coeffs, dt, source, &mut weights, &mut a, &mut b);
            // Jacobi row scaling: residuals in temperature units
            for k in 0..n {
                let d = a.diag[k];
                a.diag[k] = 1.0;
                a.west[k] /= d;
                a.east[k] /= d;
                a.south[k] /= d;
                a.north[k] /= d;
                b[k] /= d;
            }
            let mut x = tk.clone();
            bicgstab(&a, &b, &mut x, self.settings.linear_tol, self.settings.max_linear_iters)?;
            if let Some(k) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("temperature in cell {k}")));
            }
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let change = x.iter().zip(&tk).fold(0.0f64, |m, (p, q)| m.max((p - q).abs())) / scale;
            changes.push(change);
            if single_pass || change < self.settings.picard_tol {
                return Ok(StepOutcome { field: x, picard_iterations: it, changes });
            }
            tk = accel.next(&tk, x);
        }
        let last = *changes.last().unwrap_or(&f64::NAN);
        Err(Error::PicardDivergence { iterations: self.settings.max_picard_iters, history: changes, last })
    }

    /// Advances `history` by one step in place.
    pub fn step(&self, history: &mut History, dt: f64, source: Option<&[f64]>) -> Result<StepOutcome> {
        let out = self.advance_step(history, dt, source)?;
        history.push(out.field.clone(), dt);
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        tk: &[f64],
        t_n: &[f64],
        past: &[f64],
        coeffs: BdfCoefficients,
        dt: f64,
        source: Option<&[f64]>,
        weights: &mut WenoWeights,
        a: &mut Stencil5,
        b: &mut [f64],
    ) {
        let grid = self.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let m = self.materials;
        a.clear();
        b.iter_mut().for_each(|v| *v = 0.0);
        let c1 = coeffs.0[0];

        if !weights.frozen || weights.lambda.is_empty() {
            weights.lambda = (0..grid.len()).map(|k| m.conductivity(grid.mask[k], tk[k])).collect();
        }
        let lambda = std::mem::take(&mut weights.lambda);
        for k in 0..grid.len() {
            let kind = grid.mask[k];
            if !self.active(kind) {
                a.diag[k] = 1.0;
                b[k] = t_n[k];
                continue;
            }
            let vol = grid.cell_area[k];
            let h = m.enthalpy(kind, tk[k]);
            let mut cap = m.heat_capacity(kind, tk[k]);
            let jump = tk[k] - t_n[k];
            if jump.abs() > 1e-9 {
                // chord slope keeps narrow dips of the fitted capacity from stalling the iteration
                let chord = (h - m.enthalpy(kind, t_n[k])) / jump;
                cap = cap.max(chord);
            }
            a.diag[k] += vol * c1 * cap / dt;
            b[k] -= vol / dt * (c1 * (h - cap * tk[k]) + past[k]);
            if let Some(s) = source {
                b[k] += vol * s[k];
            }
        }

        let rho_cp = m.heat_capacity(CellKind::Fluid, 0.0);
        for j in 0..ny {
            for i in 0..nx {
                let p = grid.index(i, j);
                if i + 1 < nx {
                    self.interior_face(p, p + 1, Dir::East, tk, &lambda, rho_cp, weights, a, b);
                }
                if j + 1 < ny {
                    self.interior_face(p, p + nx, Dir::North, tk, &lambda, rho_cp, weights, a, b);
                }
            }
        }
        self.boundary_faces(&lambda, rho_cp, a, b);
        weights.lambda = lambda;
    }

    #[allow(clippy::too_many_arguments)]
    fn interior_face(
        &self,
        p: usize,
        q: usize,
        dir: Dir,
        tk: &[f64],
        lambda: &[f64],
        rho_cp: f64,
        weights: &mut WenoWeights,
        a: &mut Stencil5,
        b: &mut [f64],
    ) {
        let grid = self.grid;
        let (kp, kq) = (grid.mask[p], grid.mask[q]);
        if !self.active(kp) || !self.active(kq) {
            return;
        }
        let (i, j) = grid.ij(p);
        let (len, dist, u) = match dir {
            Dir::East => (grid.dy(), grid.dx(), self.velocity.east(i, j)),
            Dir::North => (grid.dx(), grid.dy(), self.velocity.north(i, j)),
        };
        let (lp, lq) = (lambda[p], lambda[q]);
        let coef = if lp + lq > 0.0 { 2.0 * lp * lq / (lp + lq) * len / dist } else { 0.0 };
        a.diag[p] += coef;
        a.diag[q] += coef;
        match dir {
            Dir::East => {
                a.east[p] -= coef;
                a.west[q] -= coef;
            }
            Dir::North => {
                a.north[p] -= coef;
                a.south[q] -= coef;
            }
        }

        if u == 0.0 {
            return;
        }
        let flux = rho_cp * u * len;
        if flux > 0.0 {
            a.diag[p] += flux;
            match dir {
                Dir::East => a.west[q] -= flux,
                Dir::North => a.south[q] -= flux,
            }
        } else {
            match dir {
                Dir::East => a.east[p] += flux,
                Dir::North => a.north[p] += flux,
            }
            a.diag[q] -= flux;
        }

        // deferred high-order correction
        let behind_p = self.upstream_neighbour(p, dir, false);
        let ahead_q = self.upstream_neighbour(q, dir, true);
        let phi_pm = behind_p.map_or(tk[p], |k| tk[k]);
        let phi_qp = ahead_q.map_or(tk[q], |k| tk[k]);
        let slot = match dir {
            Dir::East => 2 * p,
            Dir::North => 2 * p + 1,
        };
        if !weights.frozen {
            weights.left[slot] = weno3_weight(phi_pm, tk[p], tk[q]);
            weights.right[slot] = weno3_weight(phi_qp, tk[q], tk[p]);
        }
        let phi_l = weno3_with_weight(phi_pm, tk[p], tk[q], weights.left[slot]);
        let phi_r = weno3_with_weight(phi_qp, tk[q], tk[p], weights.right[slot]);
        let high = rho_cp * len * lax_friedrichs_face_flux(phi_l, phi_r, u, u.abs());
        let low = flux * if flux > 0.0 { tk[p] } else { tk[q] };
        let corr = high - low;
        b[p] -= corr;
        b[q] += corr;
    }

    /// Fluid neighbour of `k` one cell further along `dir` (`forward`) or against it.
    fn upstream_neighbour(&self, k: usize, dir: Dir, forward: bool) -> Option<usize> {
        let grid = self.grid;
        let (i, j) = grid.ij(k);
        let nb = match (dir, forward) {
            (Dir::East, true) => (i + 1 < grid.nx).then(|| k + 1),
            (Dir::East, false) => (i > 0).then(|| k - 1),
            (Dir::North, true) => (j + 1 < grid.ny).then(|| k + grid.nx),
            (Dir::North, false) => (j > 0).then(|| k - grid.nx),
        };
        nb.filter(|&k| grid.mask[k] == CellKind::Fluid)
    }

    fn face_geometry(&self, f: &BoundaryFace) -> (f64, f64, f64) {
        // (length, centre-to-face distance, outward normal velocity)
        let (i, j) = self.grid.ij(f.cell);
        let v = &self.velocity;
        match f.side {
            Side::West => (self.grid.dy(), 0.5 * self.grid.dx(), -v.west(i, j)),
            Side::East => (self.grid.dy(), 0.5 * self.grid.dx(), v.east(i, j)),
            Side::South => (self.grid.dx(), 0.5 * self.grid.dy(), -v.south(i, j)),
            Side::North => (self.grid.dx(), 0.5 * self.grid.dy(), v.north(i, j)),
        }
    }

    fn boundary_faces(&self, lambda: &[f64], rho_cp: f64, a: &mut Stencil5, b: &mut [f64]) {
        let d = &self.grid.domain;
        let mask = &self.grid.mask;
        if self.settings.open_ducts {
            let t_in = self.params.t_cold;
            for f in &d.inlet {
                let (len, half, un) = self.face_geometry(f);
                let inflow = rho_cp * (-un).max(0.0) * len;
                let cond = lambda[f.cell] * len / half;
                a.diag[f.cell] += cond + un.max(0.0) * rho_cp * len;
                b[f.cell] += (inflow + cond) * t_in;
            }
            for f in &d.outlet {
                let (len, _, un) = self.face_geometry(f);
                // zero-gradient: any backflow carries the cell's own temperature
                a.diag[f.cell] += rho_cp * un * len;
            }
        }
        if let Some(r_wall) = self.wall_resistance() {
            let t_ext = self.params.t_ext;
            for f in &d.walls {
                if !self.active(mask[f.cell]) {
                    continue;
                }
                let (len, _, _) = self.face_geometry(f);
                let g = len / r_wall;
                a.diag[f.cell] += g;
                b[f.cell] += g * t_ext;
            }
        }
    }
}

/// Simulates one case from thermal equilibrium with the environment and keeps
/// every `snapshot_stride`-th level (the initial state included).
pub fn run_case<M: ThermalModel + ?Sized>(
    grid: &StructuredGrid,
    materials: &M,
    settings: &SolverSettings,
    params: ParameterSample,
    dt: f64,
    t_final: f64,
    snapshot_stride: usize,
) -> Result<Vec<Snapshot>> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!("final time {t_final} must be >= 0")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    if snapshot_stride == 0 {
        return Err(Error::InvalidArgument("snapshot stride must be at least 1".into()));
    }
    let solver = ForwardSolver::new(grid, materials, settings.clone(), params)?;
    let steps = (t_final / dt).round() as usize;
    let mut history = History::new(vec![params.t_ext; grid.len()], 0.0);
    let mut out = vec![Snapshot { time: 0.0, params, temperature: history.current().to_vec() }];
    for s in 1..=steps {
        solver.step(&mut history, dt, None)?;
        if s % snapshot_stride == 0 {
            out.push(Snapshot {
                time: s as f64 * dt,
                params,
                temperature: history.current().to_vec(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{ConstantMaterials, FreezerMaterials};
    use crate::mesh::{build_grid, CaseGeometry};

    fn coarse() -> StructuredGrid {
        build_grid(&CaseGeometry::paper(), 35, 40).unwrap()
    }

    fn insulated() -> ParameterSample {
        ParameterSample { u_in: 0.0, t_cold: -20.0, t_ext: 20.0, h_ext: 0.0 }
    }

    fn closed() -> SolverSettings {
        SolverSettings { open_ducts: false, ..SolverSettings::default() }
    }

    #[test]
    fn uniform_insulated_state_is_steady() {
        let g = coarse();
        let m = FreezerMaterials::default();
        let s = ForwardSolver::new(&g, &m, closed(), insulated()).unwrap();
        let mut h = History::new(vec![4.0; g.len()], 0.0);
        for _ in 0..4 {
            s.step(&mut h, 2.0, None).unwrap();
        }
        assert!(h.current().iter().all(|&t| (t - 4.0).abs() < 1e-12));
    }

    #[test]
    fn startup_uses_low_order_first() {
        let g = coarse();
        let m = FreezerMaterials::default();
        let s = ForwardSolver::new(&g, &m, closed(), insulated()).unwrap();
        let mut h = History::new(vec![4.0; g.len()], 0.0);
        assert_eq!(s.coefficients_for(&h), BdfCoefficients::BDF1);
        s.step(&mut h, 1.0, None).unwrap();
        assert_eq!(s.coefficients_for(&h), BdfCoefficients::BDF1);
        s.step(&mut h, 1.0, None).unwrap();
        assert_eq!(s.coefficients_for(&h), BdfCoefficients::BDF2);
        s.step(&mut h, 1.0, None).unwrap();
        assert_eq!(s.coefficients_for(&h).0, bdf2opt_coefficients(0.52).unwrap().0);
        assert_eq!(h.steps(), 3);
        assert!((h.time() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = coarse();
        let m = FreezerMaterials::default();
        assert!(ForwardSolver::new(&g, &m, closed(), ParameterSample::mean()).is_err());
        let s = ForwardSolver::new(&g, &m, closed(), insulated()).unwrap();
        let h = History::new(vec![1.0; 3], 0.0);
        assert!(matches!(s.advance_step(&h, 1.0, None), Err(Error::DimensionMismatch { .. })));
        let h = History::new(vec![1.0; g.len()], 0.0);
        assert!(s.advance_step(&h, 0.0, None).is_err());
    }

    #[test]
    fn picard_budget_exhaustion_reports_history() {
        let g = coarse();
        let m = FreezerMaterials::default();
        let settings = SolverSettings { max_picard_iters: 1, picard_tol: 1e-300, ..SolverSettings::default() };
        let s = ForwardSolver::new(&g, &m, settings, ParameterSample::mean()).unwrap();
        let h = History::new(vec![22.0; g.len()], 0.0);
        match s.advance_step(&h, 2.0, None) {
            Err(Error::PicardDivergence { iterations, history, .. }) => {
                assert_eq!(iterations, 1);
                assert_eq!(history.len(), 1);
            }
            other => panic!("expected Picard failure, got {other:?}"),
        }
    }

    #[test]
    fn nan_state_is_detected() {
        let g = coarse();
        let m = ConstantMaterials { fluid: (1.0, 1.0), food: (1.0, 1.0), shelf: (1.0, 1.0) };
        let s = ForwardSolver::new(&g, &m, closed(), insulated()).unwrap();
        let mut t = vec![1.0; g.len()];
        t[5] = f64::NAN;
        let h = History::new(t, 0.0);
        assert!(s.advance_step(&h, 1.0, None).is_err());
    }

    #[test]
    fn inlet_cooling_respects_maximum_principle() {
        let g = coarse();
        let m = FreezerMaterials::default();
        let p = ParameterSample::mean();
        let s = ForwardSolver::new(&g, &m, SolverSettings::default(), p).unwrap();
        let t0 = p.t_ext;
        let h = History::new(vec![t0; g.len()], 0.0);
        let out = s.advance_step(&h, 2.0, None).unwrap();
        let min = out.field.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = out.field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min >= p.t_cold - 0.005 * (t0 - p.t_cold), "min {min}");
        assert!(max <= t0 + 1e-9);
        assert!(min < t0);
    }

    #[test]
    fn zero_final_time_returns_initial_state() {
        let g = coarse();
        let m = FreezerMaterials::default();
        let p = ParameterSample::mean();
        let snaps = run_case(&g, &m, &SolverSettings::default(), p, 2.0, 0.0, 10).unwrap();
        assert_eq!(snaps.len(), 1);
        assert!(snaps[0].temperature.iter().all(|&t| t == p.t_ext));
        assert_eq!(snaps[0].time, 0.0);
    }

    #[test]
    fn snapshot_cadence() {
        let g = coarse();
        let m = FreezerMaterials::default();
        let snaps = run_case(&g, &m, &SolverSettings::default(), ParameterSample::mean(), 2.0, 40.0, 5).unwrap();
        let times: Vec<f64> = snaps.iter().map(|s| s.time).collect();
        assert_eq!(times, vec![0.0, 10.0, 20.0, 30.0, 40.0]);
    }
}
