//! Third-order WENO face reconstruction and the Lax-Friedrichs flux.

/// Regularisation of the smoothness indicators.
pub const WENO_EPS: f64 = 1e-6;

const D0: f64 = 1.0 / 3.0;
const D1: f64 = 2.0 / 3.0;

/// Reconstructs the value at the face between cells `i` and `i + 1`, upwinded
/// from the `i` side, from the three centred values `phi_{i-1}, phi_i, phi_{i+1}`.
pub fn weno3_face_value(phi_im1: f64, phi_i: f64, phi_ip1: f64) -> f64 {
    weno3_with_weight(phi_im1, phi_i, phi_ip1, weno3_weight(phi_im1, phi_i, phi_ip1))
}

/// Nonlinear weight `w0` of the upwind-biased sub-stencil.
pub fn weno3_weight(phi_im1: f64, phi_i: f64, phi_ip1: f64) -> f64 {
    let beta0 = (phi_im1 - phi_i).powi(2);
    let beta1 = (phi_i - phi_ip1).powi(2);
    let alpha0 = D0 / (beta0 + WENO_EPS).powi(2);
    let alpha1 = D1 / (beta1 + WENO_EPS).powi(2);
    alpha0 / (alpha0 + alpha1)
}

/// Face value for a given weight `w0` (`w1 = 1 - w0`).
pub fn weno3_with_weight(phi_im1: f64, phi_i: f64, phi_ip1: f64, w0: f64) -> f64 {
    let s0 = 0.5 * (3.0 * phi_i - phi_im1);
    let s1 = 0.5 * (phi_i + phi_ip1);
    // written as s1 + w0 (s0 - s1) so that equal sub-stencil values are returned exactly
    s1 + w0 * (s0 - s1)
}

/// Lax-Friedrichs flux from the two one-sided face states.
pub fn lax_friedrichs_face_flux(phi_l: f64, phi_r: f64, u_face: f64, alpha: f64) -> f64 {
    0.5 * (u_face * (phi_l + phi_r) - alpha * (phi_r - phi_l))
}
