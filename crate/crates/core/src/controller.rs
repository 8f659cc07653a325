//! Certainty-equivalence adaptive tracking law.
//!
//! Each follower converts its observer estimate into a reference velocity
//! `q_r' = C S(omega_i) eta_i - alpha (q_i - C eta_i)`, forms the slip
//! `s_i = q_i' - q_r'` and applies
//!
//! ```text
//! tau_i       = -K s_i + Y_i theta_hat_i
//! theta_hat_i' = -Lambda^-1 Y_iᵀ s_i
//! Y_i = Y(q_i, q_i', q_r'', q_r')
//! ```
//!
//! With that sign `V_i = ½ (sᵀ M s + θ̃ᵀ Λ θ̃)` satisfies `V_i' = -sᵀ K s`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::observer::{s_of, ObserverGains};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub observer: ObserverGains,
    pub alpha: f64,
    pub k_gain: DMatrix<f64>,
    /// Diagonal of `Lambda`.
    pub lambda_diag: DVector<f64>,
}

impl ControllerGains {
    pub fn new(observer: ObserverGains, alpha: f64, k_gain: DMatrix<f64>, lambda_diag: DVector<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("gains.alpha", format!("must be positive, got {alpha}")));
        }
        if !k_gain.is_square() || k_gain.nrows() == 0 {
            return Err(Error::invalid("gains.K", "must be a nonempty square matrix"));
        }
        if k_gain.iter().any(|x| !x.is_finite()) || (&k_gain - k_gain.transpose()).amax() > 1e-12 {
            return Err(Error::invalid("gains.K", "must be finite and symmetric"));
        }
        let min_eig = k_gain.clone().symmetric_eigenvalues().min();
        if min_eig.is_nan() || min_eig <= 0.0 {
            return Err(Error::invalid(
                "gains.K",
                format!("must be positive definite (min eigenvalue {min_eig})"),
            ));
        }
        if lambda_diag.is_empty() || lambda_diag.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::invalid("gains.Lambda", "diagonal entries must be positive"));
        }
        Ok(Self {
            observer,
            alpha,
            k_gain,
            lambda_diag,
        })
    }

    /// Scalar gains `K = k I_n` and `Lambda = lambda I_p`.
    pub fn uniform(
        observer: ObserverGains,
        alpha: f64,
        k: f64,
        dof: usize,
        lambda: f64,
        params: usize,
    ) -> Result<Self> {
        Self::new(
            observer,
            alpha,
            DMatrix::identity(dof, dof) * k,
            DVector::from_element(params, lambda),
        )
    }
}

pub fn reference_velocity(
    q: &DVector<f64>,
    eta: &DVector<f64>,
    omega_hat: &DVector<f64>,
    c_out: &DMatrix<f64>,
    alpha: f64,
) -> DVector<f64> {
    let c_eta = c_out * eta;
    c_out * (s_of(omega_hat) * eta) - (q - c_eta) * alpha
}

pub fn slip(q_dot: &DVector<f64>, q_ref_dot: &DVector<f64>) -> DVector<f64> {
    q_dot - q_ref_dot
}

/// Derivative of [`reference_velocity`] given the observer rates at the same instant.
pub fn reference_accel(
    q_dot: &DVector<f64>,
    eta: &DVector<f64>,
    eta_dot: &DVector<f64>,
    omega_hat: &DVector<f64>,
    omega_dot: &DVector<f64>,
    c_out: &DMatrix<f64>,
    alpha: f64,
) -> DVector<f64> {
    c_out * (s_of(omega_hat) * eta_dot) + c_out * (s_of(omega_dot) * eta) - (q_dot - c_out * eta_dot) * alpha
}

pub fn torque(s: &DVector<f64>, y: &DMatrix<f64>, theta_hat: &DVector<f64>, k_gain: &DMatrix<f64>) -> DVector<f64> {
    y * theta_hat - k_gain * s
}

pub fn theta_hat_rate(s: &DVector<f64>, y: &DMatrix<f64>, lambda_diag: &DVector<f64>) -> DVector<f64> {
    -(y.transpose() * s).component_div(lambda_diag)
}

/// `½ (sᵀ M s + θ̃ᵀ Λ θ̃)`.
pub fn agent_lyapunov(
    s: &DVector<f64>,
    mass: &DMatrix<f64>,
    theta_tilde: &DVector<f64>,
    lambda_diag: &DVector<f64>,
) -> f64 {
    0.5 * (s.dot(&(mass * s)) + theta_tilde.component_mul(theta_tilde).dot(lambda_diag))
}

/// Residual of `e' + alpha e = s - mu1 C e_v`, where `e = q - C eta`.
pub fn tracking_residual(
    e_dot: &DVector<f64>,
    e: &DVector<f64>,
    s: &DVector<f64>,
    e_v: &DVector<f64>,
    c_out: &DMatrix<f64>,
    alpha: f64,
    mu1: f64,
) -> DVector<f64> {
    e_dot + e * alpha - s + c_out * e_v * mu1
}
