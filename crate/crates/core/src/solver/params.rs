//! Boundary-condition parameters and their seeded uniform sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const U_IN_RANGE: (f64, f64) = (0.15, 0.25);
pub const T_COLD_RANGE: (f64, f64) = (-26.0, -18.0);
pub const T_EXT_RANGE: (f64, f64) = (18.0, 26.0);
pub const H_EXT_RANGE: (f64, f64) = (0.4, 1.2);

/// One forward-simulation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterSample {
    /// Inlet air speed, m/s.
    pub u_in: f64,
    /// Inlet air temperature, degC.
    pub t_cold: f64,
    /// Ambient temperature outside the cabinet, degC.
    pub t_ext: f64,
    /// External convection coefficient, W m^-2 K^-1. Zero insulates the walls.
    pub h_ext: f64,
}

impl ParameterSample {
    /// Midpoint of every sampling range.
    pub fn mean() -> Self {
        ParameterSample { u_in: 0.2, t_cold: -22.0, t_ext: 22.0, h_ext: 0.8 }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.u_in, self.t_cold, self.t_ext, self.h_ext]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        ParameterSample { u_in: a[0], t_cold: a[1], t_ext: a[2], h_ext: a[3] }
    }

    pub fn in_sampling_range(&self) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(self.u_in, U_IN_RANGE)
            && inside(self.t_cold, T_COLD_RANGE)
            && inside(self.t_ext, T_EXT_RANGE)
            && inside(self.h_ext, H_EXT_RANGE)
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter sample {self:?}")));
        }
        if self.u_in < 0.0 || self.h_ext < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inlet speed and external convection must be non-negative: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Independent uniform draws of every component, reproducible from `seed`.
pub fn sample_parameters(count: usize, seed: u64) -> Result<Vec<ParameterSample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    Ok((0..count)
        .map(|_| ParameterSample {
            u_in: draw(U_IN_RANGE),
            t_cold: draw(T_COLD_RANGE),
            t_ext: draw(T_EXT_RANGE),
            h_ext: draw(H_EXT_RANGE),
        })
        .collect())
}
