//! Backward differentiation coefficients, including the BDF2/BDF3 blend.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight used in all production runs.
pub const CHI_DEFAULT: f64 = 0.52;

const BDF2: [f64; 4] = [1.5, -2.0, 0.5, 0.0];
const BDF3: [f64; 4] = [11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0];

/// Coefficients of `dT/dt ~ (c1 T^{n+1} + c2 T^n + c3 T^{n-1} + c4 T^{n-2}) / dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BdfCoefficients(pub [f64; 4]);

impl BdfCoefficients {
    pub const BDF1: BdfCoefficients = BdfCoefficients([1.0, -1.0, 0.0, 0.0]);
    pub const BDF2: BdfCoefficients = BdfCoefficients(BDF2);

    /// Number of past levels referenced (1 to 3).
    pub fn levels(&self) -> usize {
        if self.0[3] != 0.0 {
            3
        } else if self.0[2] != 0.0 {
            2
        } else {
            1
        }
    }

    /// Start-up rule: implicit Euler for the first two steps, BDF2 for the third,
    /// the blended scheme afterwards.
    pub fn for_step(step: usize, blended: BdfCoefficients) -> BdfCoefficients {
        match step {
            0 | 1 => Self::BDF1,
            2 => Self::BDF2,
            _ => blended,
        }
    }
}

/// `chi * BDF2 + (1 - chi) * BDF3`.
pub fn bdf2opt_coefficients(chi: f64) -> Result<BdfCoefficients> {
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::InvalidArgument(format!("chi = {chi} outside [0, 1]")));
    }
    let mut c = [0.0; 4];
    for i in 0..4 {
        c[i] = chi * BDF2[i] + (1.0 - chi) * BDF3[i];
    }
    Ok(BdfCoefficients(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints() {
        assert_eq!(bdf2opt_coefficients(1.0).unwrap().0, [1.5, -2.0, 0.5, 0.0]);
        let c = bdf2opt_coefficients(0.0).unwrap().0;
        let want = [11.0 / 6.0, -3.0, 1.5, -1.0 / 3.0];
        for i in 0..4 {
            assert!((c[i] - want[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn production_weight() {
        let c = bdf2opt_coefficients(0.52).unwrap().0;
        let want = [1.66, -2.48, 0.98, -0.16];
        for i in 0..4 {
            assert!((c[i] - want[i]).abs() < 1e-14, "{c:?}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(bdf2opt_coefficients(-0.1).is_err());
        assert!(bdf2opt_coefficients(1.5).is_err());
        assert!(bdf2opt_coefficients(f64::NAN).is_err());
    }

    #[test]
    fn startup_sequence() {
        let b = bdf2opt_coefficients(0.52).unwrap();
        assert_eq!(BdfCoefficients::for_step(0, b), BdfCoefficients::BDF1);
        assert_eq!(BdfCoefficients::for_step(1, b), BdfCoefficients::BDF1);
        assert_eq!(BdfCoefficients::for_step(2, b), BdfCoefficients::BDF2);
        assert_eq!(BdfCoefficients::for_step(7, b), b);
        assert_eq!(b.levels(), 3);
    }

    proptest! {
        #[test]
        fn consistency_identities(chi in 0.0f64..=1.0) {
            let c = bdf2opt_coefficients(chi).unwrap().0;
            prop_assert!(c.iter().sum::<f64>().abs() < 1e-14);
            prop_assert!((-c[1] - 2.0 * c[2] - 3.0 * c[3] - 1.0).abs() < 1e-14);
        }
    }
}
