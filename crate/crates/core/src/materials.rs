//! Thermophysical properties: temperature-dependent food properties following the
//! effective heat capacity method, constant air and glass properties.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::CellKind;

pub const T_MIN: f64 = -25.0;
pub const T_MAX: f64 = 25.0;

/// Cubic in T with coefficients that change on right-closed temperature intervals.
///
/// `breakpoints` has one more entry than `coefficients`; interval `k` is
/// `(breakpoints[k], breakpoints[k + 1]]`, except the first one which also
/// includes its left end.
#[derive(Debug, Serialize, Deserialize)]
pub struct PiecewiseCubicProperty {
    pub breakpoints: Vec<f64>,
    pub coefficients: Vec<[f64; 4]>,
    #[serde(skip)]
    clamped: AtomicU64,
}

impl Clone for PiecewiseCubicProperty {
    fn clone(&self) -> Self {
        PiecewiseCubicProperty {
            breakpoints: self.breakpoints.clone(),
            coefficients: self.coefficients.clone(),
            clamped: AtomicU64::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for PiecewiseCubicProperty {
    fn eq(&self, other: &Self) -> bool {
        self.breakpoints == other.breakpoints && self.coefficients == other.coefficients
    }
}

impl PiecewiseCubicProperty {
    pub fn new(breakpoints: Vec<f64>, coefficients: Vec<[f64; 4]>) -> Result<Self> {
        let p = PiecewiseCubicProperty { breakpoints, coefficients, clamped: AtomicU64::new(0) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.breakpoints;
        if b.len() != self.coefficients.len() + 1 || self.coefficients.is_empty() {
            return Err(Error::InvalidArgument(
                "piecewise cubic needs one more breakpoint than coefficient rows".into(),
            ));
        }
        if b.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("breakpoints must be strictly increasing".into()));
        }
        if b[0] > T_MIN || b[b.len() - 1] < T_MAX {
            return Err(Error::InvalidArgument(format!(
                "intervals must cover [{T_MIN}, {T_MAX}] degC"
            )));
        }
        if self.coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("property coefficient".into()));
        }
        Ok(())
    }

    /// Volumetric heat capacity of salmon, J m^-3 K^-1.
    pub fn salmon_heat_capacity() -> Self {
        Self::new(
            vec![-25.0, -5.0, -3.5, 0.0, 25.0],
            vec![
                [4.298e7, 7.166e6, 4.199e5, 8.031e3],
                [3.046e10, 1.906e10, 4.002e9, 2.817e8],
                [-4.604e6, -1.037e8, -1.095e8, -4.260e7],
                [4.365e6, -3.228e5, 2.535e4, -5.838e2],
            ],
        )
        .expect("built-in table is valid")
    }

    /// Thermal conductivity of salmon, W m^-1 K^-1.
    pub fn salmon_conductivity() -> Self {
        Self::new(
            vec![-25.0, -5.0, -3.5, 0.0, 25.0],
            vec![
                [5.654e-1, -9.014e-2, -4.038e-3, -6.721e-5],
                [-3.276e-1, -5.611e-1, -9.160e-2, -5.767e-3],
                [5.202e-1, 1.181e-2, 2.707e-2, 1.081e-3],
                [5.122e-1, -3.900e-3, 3.585e-4, -7.767e-6],
            ],
        )
        .expect("built-in table is valid")
    }

    /// Index of the interval holding `t` (right-closed rule).
    pub fn interval(&self, t: f64) -> usize {
        let last = self.coefficients.len() - 1;
        // number of interior breakpoints strictly below t
        let k = self.breakpoints[1..self.breakpoints.len() - 1].partition_point(|&b| b < t);
        k.min(last)
    }

    fn clamp(&self, t: f64) -> f64 {
        let (lo, hi) = (self.breakpoints[0], self.breakpoints[self.breakpoints.len() - 1]);
        if t < lo || t > hi {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            t.clamp(lo, hi)
        } else {
            t
        }
    }

    /// Evaluates the property; temperatures outside the table are clamped and counted.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t.is_nan() {
            return Err(Error::NonFinite("temperature is NaN".into()));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        let t = self.clamp(t);
        let a = &self.coefficients[self.interval(t)];
        a[0] + t * (a[1] + t * (a[2] + t * a[3]))
    }

    /// Analytic dT-derivative of the active cubic.
    pub fn derivative(&self, t: f64) -> f64 {
        let a = &self.coefficients[self.interval(t)];
        a[1] + t * (2.0 * a[2] + t * 3.0 * a[3])
    }

    /// Number of evaluations that fell outside the table and were clamped.
    pub fn clamp_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirProperties {
    pub rho: f64,
    pub cp: f64,
    pub lambda: f64,
    pub turbulent_conductivity_multiplier: f64,
}

impl Default for AirProperties {
    /// Dry air at 0 degC.
    fn default() -> Self {
        AirProperties { rho: 1.292, cp: 1006.0, lambda: 0.0243, turbulent_conductivity_multiplier: 10.0 }
    }
}

impl AirProperties {
    pub fn rho_cp(&self) -> f64 {
        self.rho * self.cp
    }

    /// Molecular conductivity augmented by the turbulent-mixing surrogate.
    pub fn effective_conductivity(&self) -> f64 {
        self.lambda * (1.0 + self.turbulent_conductivity_multiplier)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.rho, self.cp, self.lambda].iter().all(|v| v.is_finite() && *v > 0.0)
            && self.turbulent_conductivity_multiplier.is_finite()
            && self.turbulent_conductivity_multiplier >= 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid air properties {self:?}")));
        }
        Ok(())
    }
}

/// Constant-property solid (glass shelf).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolidProperties {
    pub lambda: f64,
    pub rho_c: f64,
}

impl Default for SolidProperties {
    fn default() -> Self {
        SolidProperties { lambda: 1.0, rho_c: 1.68e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum LiquidFractionMode {
    /// Linear ramp between solidus and liquidus.
    Linear { solidus: f64, liquidus: f64 },
    /// Normalised latent (excess) enthalpy over the freezing range.
    Enthalpy { solidus: f64, liquidus: f64 },
}

impl Default for LiquidFractionMode {
    fn default() -> Self {
        LiquidFractionMode::Linear { solidus: -5.0, liquidus: 0.0 }
    }
}

/// Properties consumed by the forward solver, dispatched on the cell label.
pub trait ThermalModel: Sync {
    fn heat_capacity(&self, kind: CellKind, t: f64) -> f64;
    fn conductivity(&self, kind: CellKind, t: f64) -> f64;
    /// Volumetric enthalpy relative to an arbitrary per-material reference.
    fn enthalpy(&self, kind: CellKind, t: f64) -> f64;
    /// True when no property depends on temperature.
    fn is_linear(&self) -> bool;
}

/// Constant properties per material; used for verification problems.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantMaterials {
    pub fluid: (f64, f64),
    pub food: (f64, f64),
    pub shelf: (f64, f64),
}

impl ConstantMaterials {
    fn get(&self, kind: CellKind) -> (f64, f64) {
        match kind {
            CellKind::Fluid => self.fluid,
            CellKind::Food => self.food,
            CellKind::Shelf => self.shelf,
        }
    }
}

impl ThermalModel for ConstantMaterials {
    fn heat_capacity(&self, kind: CellKind, _t: f64) -> f64 {
        self.get(kind).0
    }
    fn conductivity(&self, kind: CellKind, _t: f64) -> f64 {
        self.get(kind).1
    }
    fn enthalpy(&self, kind: CellKind, t: f64) -> f64 {
        self.get(kind).0 * t
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// Lower bound applied to the fitted food heat capacity inside the solver.
/// The printed cubics dip below zero just above -5 degC and just below 0 degC.
pub const HEAT_CAPACITY_FLOOR: f64 = 5.0e5;

const TABLE_STEP: f64 = 1e-3;

/// Salmon slab in air on a glass shelf.
#[derive(Debug, Clone)]
pub struct FreezerMaterials {
    pub food_heat_capacity: PiecewiseCubicProperty,
    pub food_conductivity: PiecewiseCubicProperty,
    pub air: AirProperties,
    pub shelf: SolidProperties,
    pub liquid_fraction: LiquidFractionMode,
    // floored food enthalpy sampled every TABLE_STEP from T_MIN
    enthalpy_table: Vec<f64>,
    // cumulative positive excess enthalpy for the enthalpy-mode liquid fraction
    excess_table: Vec<f64>,
}

impl Default for FreezerMaterials {
    fn default() -> Self {
        Self::new(
            PiecewiseCubicProperty::salmon_heat_capacity(),
            PiecewiseCubicProperty::salmon_conductivity(),
            AirProperties::default(),
            SolidProperties::default(),
            LiquidFractionMode::default(),
        )
    }
}

impl FreezerMaterials {
    pub fn new(
        food_heat_capacity: PiecewiseCubicProperty,
        food_conductivity: PiecewiseCubicProperty,
        air: AirProperties,
        shelf: SolidProperties,
        liquid_fraction: LiquidFractionMode,
    ) -> Self {
        let n = ((T_MAX - T_MIN) / TABLE_STEP).round() as usize;
        let floored = |t: f64| food_heat_capacity.eval_unchecked(t).max(HEAT_CAPACITY_FLOOR);
        let mut enthalpy_table = Vec::with_capacity(n + 1);
        let mut h = 0.0;
        let mut prev = floored(T_MIN);
        enthalpy_table.push(0.0);
        for k in 1..=n {
            let cur = floored(T_MIN + k as f64 * TABLE_STEP);
            h += 0.5 * (prev + cur) * TABLE_STEP;
            enthalpy_table.push(h);
            prev = cur;
        }
        let excess_table = match liquid_fraction {
            LiquidFractionMode::Enthalpy { solidus, liquidus } => {
                let c0 = food_heat_capacity.eval_unchecked(solidus);
                let c1 = food_heat_capacity.eval_unchecked(liquidus);
                let m = ((liquidus - solidus) / TABLE_STEP).round().max(1.0) as usize;
                let step = (liquidus - solidus) / m as f64;
                let excess = |t: f64| {
                    let sensible = c0 + (c1 - c0) * (t - solidus) / (liquidus - solidus);
                    (food_heat_capacity.eval_unchecked(t) - sensible).max(0.0)
                };
                let mut acc = vec![0.0];
                let mut prev = excess(solidus);
                for k in 1..=m {
                    let cur = excess(solidus + k as f64 * step);
                    let last = *acc.last().unwrap();
                    acc.push(last + 0.5 * (prev + cur) * step);
                    prev = cur;
                }
                acc
            }
            LiquidFractionMode::Linear { .. } => Vec::new(),
        };
        FreezerMaterials {
            food_heat_capacity,
            food_conductivity,
            air,
            shelf,
            liquid_fraction,
            enthalpy_table,
            excess_table,
        }
    }

    /// Fraction of unfrozen material at temperature `t`.
    pub fn liquid_fraction(&self, t: f64) -> f64 {
        match self.liquid_fraction {
            LiquidFractionMode::Linear { solidus, liquidus } => {
                ((t - solidus) / (liquidus - solidus)).clamp(0.0, 1.0)
            }
            LiquidFractionMode::Enthalpy { solidus, liquidus } => {
                if t <= solidus {
                    return 0.0;
                }
                if t >= liquidus {
                    return 1.0;
                }
                let total = *self.excess_table.last().unwrap();
                if total <= 0.0 {
                    return (t - solidus) / (liquidus - solidus);
                }
                let m = self.excess_table.len() - 1;
                let s = (t - solidus) / (liquidus - solidus) * m as f64;
                let k = (s.floor() as usize).min(m - 1);
                let f = s - k as f64;
                let e = self.excess_table[k] * (1.0 - f) + self.excess_table[k + 1] * f;
                (e / total).clamp(0.0, 1.0)
            }
        }
    }

    fn food_enthalpy(&self, t: f64) -> f64 {
        let n = self.enthalpy_table.len() - 1;
        if t <= T_MIN {
            let c = self.food_heat_capacity.eval_unchecked(T_MIN).max(HEAT_CAPACITY_FLOOR);
            return c * (t - T_MIN);
        }
        if t >= T_MAX {
            let c = self.food_heat_capacity.eval_unchecked(T_MAX).max(HEAT_CAPACITY_FLOOR);
            return self.enthalpy_table[n] + c * (t - T_MAX);
        }
        let s = (t - T_MIN) / TABLE_STEP;
        let k = (s.floor() as usize).min(n - 1);
        let f = s - k as f64;
        self.enthalpy_table[k] * (1.0 - f) + self.enthalpy_table[k + 1] * f
    }
}

impl ThermalModel for FreezerMaterials {
    fn heat_capacity(&self, kind: CellKind, t: f64) -> f64 {
        match kind {
            CellKind::Fluid => self.air.rho_cp(),
            CellKind::Shelf => self.shelf.rho_c,
            CellKind::Food => self.food_heat_capacity.eval_unchecked(t).max(HEAT_CAPACITY_FLOOR),
        }
    }

    fn conductivity(&self, kind: CellKind, t: f64) -> f64 {
        match kind {
            CellKind::Fluid => self.air.effective_conductivity(),
            CellKind::Shelf => self.shelf.lambda,
            CellKind::Food => self.food_conductivity.eval_unchecked(t),
        }
    }

    fn enthalpy(&self, kind: CellKind, t: f64) -> f64 {
        match kind {
            CellKind::Fluid => self.air.rho_cp() * t,
            CellKind::Shelf => self.shelf.rho_c * t,
            CellKind::Food => self.food_enthalpy(t),
        }
    }

    fn is_linear(&self) -> bool {
        false
    }
}

/// Unfrozen fraction with the default linear map on [-5, 0] degC.
pub fn liquid_fraction(t: f64) -> f64 {
    ((t + 5.0) / 5.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn heat_capacity_rows() {
        let p = PiecewiseCubicProperty::salmon_heat_capacity();
        let v = p.eval(10.0).unwrap();
        assert!((v - 3.0882e6).abs() / 3.0882e6 < 1e-12, "{v}");
        let expected = 4.298e7 - 7.166e7 + 4.199e7 - 8.031e6;
        let v = p.eval(-10.0).unwrap();
        assert!((v - expected).abs() / expected < 1e-12);
        assert!((v - 5.279e6).abs() < 1.0e3);
    }

    #[test]
    fn conductivity_rows() {
        let p = PiecewiseCubicProperty::salmon_conductivity();
        assert!((p.eval(-10.0).unwrap() - 1.13021).abs() < 1e-12);
        assert_eq!(p.eval(0.0).unwrap(), 0.5202);
    }

    #[test]
    fn breakpoints_are_right_closed() {
        let p = PiecewiseCubicProperty::salmon_conductivity();
        assert_eq!(p.interval(-25.0), 0);
        assert_eq!(p.interval(-5.0), 0);
        assert_eq!(p.interval(-3.5), 1);
        assert_eq!(p.interval(0.0), 2);
        assert_eq!(p.interval(25.0), 3);
        assert_eq!(p.interval(-4.999), 1);
        assert_eq!(p.interval(1e-9), 3);
    }

    #[test]
    fn clamps_and_counts() {
        let p = PiecewiseCubicProperty::salmon_conductivity();
        assert_eq!(p.eval(-30.0).unwrap(), p.eval(-25.0).unwrap());
        assert_eq!(p.eval(40.0).unwrap(), p.eval(25.0).unwrap());
        assert_eq!(p.clamp_count(), 2);
        assert!(matches!(p.eval(f64::NAN), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(PiecewiseCubicProperty::new(vec![-25.0, 0.0], vec![[1.0; 4], [1.0; 4]]).is_err());
        assert!(PiecewiseCubicProperty::new(vec![-20.0, 25.0], vec![[1.0; 4]]).is_err());
        assert!(PiecewiseCubicProperty::new(vec![-25.0, -25.0, 25.0], vec![[1.0; 4]; 2]).is_err());
    }

    #[test]
    fn table_round_trips_through_json() {
        let p = PiecewiseCubicProperty::salmon_heat_capacity();
        let s = serde_json::to_string(&p).unwrap();
        let q: PiecewiseCubicProperty = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn liquid_fraction_limits() {
        assert_eq!(liquid_fraction(-25.0), 0.0);
        assert_eq!(liquid_fraction(20.0), 1.0);
        assert!((liquid_fraction(-2.5) - 0.5).abs() < 1e-15);
        let m = FreezerMaterials::default();
        assert!((m.liquid_fraction(-2.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn enthalpy_mode_is_monotone_and_bounded() {
        let m = FreezerMaterials::new(
            PiecewiseCubicProperty::salmon_heat_capacity(),
            PiecewiseCubicProperty::salmon_conductivity(),
            AirProperties::default(),
            SolidProperties::default(),
            LiquidFractionMode::Enthalpy { solidus: -5.0, liquidus: 0.0 },
        );
        assert_eq!(m.liquid_fraction(-6.0), 0.0);
        assert_eq!(m.liquid_fraction(1.0), 1.0);
        let mut prev = 0.0;
        for k in 0..=1000 {
            let f = m.liquid_fraction(-5.0 + 5.0 * k as f64 / 1000.0);
            assert!(f >= prev && (0.0..=1.0).contains(&f));
            prev = f;
        }
    }

    #[test]
    fn cell_dispatch() {
        let m = FreezerMaterials::default();
        assert!((m.heat_capacity(CellKind::Food, 10.0) - 3.0882e6).abs() < 1.0);
        assert_eq!(m.heat_capacity(CellKind::Fluid, -12.0), 1.292 * 1006.0);
        assert_eq!(m.heat_capacity(CellKind::Fluid, 7.0), 1.292 * 1006.0);
        assert_eq!(m.conductivity(CellKind::Shelf, 3.0), 1.0);
        assert!((m.conductivity(CellKind::Fluid, 0.0) - 0.0243 * 11.0).abs() < 1e-15);
        assert!(m.heat_capacity(CellKind::Food, -4.99) >= HEAT_CAPACITY_FLOOR);
    }

    #[test]
    fn food_enthalpy_slope_matches_capacity() {
        let m = FreezerMaterials::default();
        for &t in &[-20.0, -10.0, 5.0, 20.0] {
            let h = 1e-2;
            let slope = (m.enthalpy(CellKind::Food, t + h) - m.enthalpy(CellKind::Food, t - h)) / (2.0 * h);
            let c = m.heat_capacity(CellKind::Food, t);
            assert!((slope - c).abs() / c < 1e-4, "t={t}: {slope} vs {c}");
        }
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(t in -24.9f64..24.9) {
            for p in [PiecewiseCubicProperty::salmon_heat_capacity(), PiecewiseCubicProperty::salmon_conductivity()] {
                let h = 1e-5;
                // stay inside one interval
                prop_assume!(p.interval(t - h) == p.interval(t + h));
                let fd = (p.eval(t + h).unwrap() - p.eval(t - h).unwrap()) / (2.0 * h);
                let an = p.derivative(t);
                let tol = 1e-8 * (an.abs() + p.eval(t).unwrap().abs());
                prop_assert!((fd - an).abs() <= tol,
                    "t={} fd={} an={}", t, fd, an);
            }
        }

        #[test]
        fn liquid_fraction_is_monotone(mut ts in proptest::collection::vec(-30.0f64..30.0, 2..50)) {
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let fs: Vec<f64> = ts.iter().map(|&t| liquid_fraction(t)).collect();
            prop_assert!(fs.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
