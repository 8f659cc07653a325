//! Euler-Lagrange followers `M(q) q'' + C(q, q') q' + G(q) = tau`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Gravitational acceleration used when a scenario does not override it.
pub const STANDARD_GRAVITY: f64 = 9.8;

/// Condition number of `M(q)` beyond which the forward dynamics is refused.
pub const MAX_INERTIA_CONDITION: f64 = 1e12;

/// Parameter vectors `(a1, .., a5)` of the six two-link arms in the reference scenario.
pub const REFERENCE_ARM_PARAMETERS: [[f64; 5]; 6] = [
    [0.64, 1.10, 0.08, 0.64, 0.32],
    [0.76, 1.17, 0.14, 0.93, 0.44],
    [0.91, 1.26, 0.22, 1.27, 0.58],
    [1.10, 1.36, 0.32, 1.67, 0.73],
    [1.21, 1.16, 0.12, 1.45, 1.03],
    [1.31, 1.56, 0.22, 1.65, 1.33],
];

/// Mechanical plant that is linear in an unknown parameter vector.
///
/// `regressor(q, q_dot, a, b) * parameters() == M(q) a + C(q, q_dot) b + G(q)` for all
/// `a`, `b`, and `mass_matrix_rate - 2 coriolis_matrix` is skew symmetric.
pub trait EulerLagrange: std::fmt::Debug + Send + Sync {
    fn dof(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn parameters(&self) -> DVector<f64>;
    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64>;
    /// Time derivative of `M(q(t))` along velocity `q_dot`.
    fn mass_matrix_rate(&self, q: &DVector<f64>, q_dot: &DVector<f64>) -> DMatrix<f64>;
    fn coriolis_matrix(&self, q: &DVector<f64>, q_dot: &DVector<f64>) -> DMatrix<f64>;
    fn gravity_vector(&self, q: &DVector<f64>) -> DVector<f64>;
    /// Does not depend on the parameter vector.
    fn regressor(&self, q: &DVector<f64>, q_dot: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub q: DVector<f64>,
    pub q_dot: DVector<f64>,
}

impl PlantState {
    pub fn at_rest(dof: usize) -> Self {
        Self {
            q: DVector::zeros(dof),
            q_dot: DVector::zeros(dof),
        }
    }
}

/// `q'' = M(q)^-1 (tau - C(q, q') q' - G(q))`.
pub fn plant_accel<P: EulerLagrange + ?Sized>(
    plant: &P,
    state: &PlantState,
    tau: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = plant.dof();
    check_dim("plant position", n, state.q.len())?;
    check_dim("plant velocity", n, state.q_dot.len())?;
    check_dim("plant torque", n, tau.len())?;
    let m = plant.mass_matrix(&state.q);
    let condition = symmetric_condition(&m);
    if condition.is_nan() || condition > MAX_INERTIA_CONDITION {
        return Err(Error::Singular { condition });
    }
    let rhs = tau - plant.coriolis_matrix(&state.q, &state.q_dot) * &state.q_dot - plant.gravity_vector(&state.q);
    m.cholesky().map(|c| c.solve(&rhs)).ok_or(Error::Singular { condition })
}

fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = if m.nrows() == 2 {
        // closed form for the common 2x2 case
        let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - r, mean + r)
    } else {
        let eig = m.clone().symmetric_eigenvalues();
        (eig.min(), eig.max())
    };
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Planar two-link arm with parameters `(a1, .., a5)`:
/// inertia `[[a1 + a2 + 2 a3 cos q2, a2 + a3 cos q2], [a2 + a3 cos q2, a2]]`,
/// gravity `(a4 g cos q1 + a5 g cos(q1 + q2), a5 g cos(q1 + q2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLinkArm {
    theta: [f64; 5],
    gravity: f64,
}

impl TwoLinkArm {
    /// Grid resolution used to confirm `M(q)` is positive definite for every elbow angle.
    pub const PD_GRID: usize = 720;

    pub fn new(theta: [f64; 5], gravity: f64) -> Result<Self> {
        if theta.iter().any(|x| !x.is_finite()) || !gravity.is_finite() {
            return Err(Error::invalid("arm parameters", "theta and gravity must be finite"));
        }
        if theta[0] <= 0.0 || theta[1] <= 0.0 {
            return Err(Error::invalid(
                "arm parameters",
                format!("a1 and a2 must be positive, got {} and {}", theta[0], theta[1]),
            ));
        }
        let arm = Self { theta, gravity };
        let worst = arm.min_inertia_eigenvalue();
        if worst <= 0.0 {
            return Err(Error::invalid(
                "arm parameters",
                format!("inertia matrix is not positive definite (min eigenvalue {worst:.3e})"),
            ));
        }
        Ok(arm)
    }

    pub fn with_standard_gravity(theta: [f64; 5]) -> Result<Self> {
        Self::new(theta, STANDARD_GRAVITY)
    }

    pub fn theta(&self) -> [f64; 5] {
        self.theta
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Smallest eigenvalue of `M` over an evenly spaced elbow-angle grid on `[0, 2π)`.
    pub fn min_inertia_eigenvalue(&self) -> f64 {
        (0..Self::PD_GRID)
            .map(|k| {
                let q2 = 2.0 * std::f64::consts::PI * k as f64 / Self::PD_GRID as f64;
                let m = self.mass_matrix(&DVector::from_vec(vec![0.0, q2]));
                m.symmetric_eigenvalues().min()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

impl EulerLagrange for TwoLinkArm {
    fn dof(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        5
    }

    fn parameters(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.theta)
    }

    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let [a1, a2, a3, _, _] = self.theta;
        let c2 = q[1].cos();
        let off = a2 + a3 * c2;
        DMatrix::from_row_slice(2, 2, &[a1 + a2 + 2.0 * a3 * c2, off, off, a2])
    }

    fn mass_matrix_rate(&self, q: &DVector<f64>, q_dot: &DVector<f64>) -> DMatrix<f64> {
        let a3 = self.theta[2];
        let d = -a3 * q[1].sin() * q_dot[1];
        DMatrix::from_row_slice(2, 2, &[2.0 * d, d, d, 0.0])
    }

    fn coriolis_matrix(&self, q: &DVector<f64>, q_dot: &DVector<f64>) -> DMatrix<f64> {
        let a3 = self.theta[2];
        let s2 = q[1].sin();
        DMatrix::from_row_slice(
            2,
            2,
            &[
                -a3 * s2 * q_dot[1],
                -a3 * s2 * (q_dot[0] + q_dot[1]),
                a3 * s2 * q_dot[0],
                0.0,
            ],
        )
    }

    fn gravity_vector(&self, q: &DVector<f64>) -> DVector<f64> {
        let [_, _, _, a4, a5] = self.theta;
        let g = self.gravity;
        let c12 = (q[0] + q[1]).cos();
        DVector::from_vec(vec![a4 * g * q[0].cos() + a5 * g * c12, a5 * g * c12])
    }

    fn regressor(&self, q: &DVector<f64>, q_dot: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
        let g = self.gravity;
        let (s2, c2) = q[1].sin_cos();
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        let sum = a[0] + a[1];
        DMatrix::from_row_slice(
            2,
            5,
            &[
                a[0],
                sum,
                2.0 * c2 * a[0] + c2 * a[1] - s2 * q_dot[1] * b[0] - s2 * (q_dot[0] + q_dot[1]) * b[1],
                g * c1,
                g * c12,
                0.0,
                sum,
                c2 * a[0] + s2 * q_dot[0] * b[0],
                0.0,
                g * c12,
            ],
        )
    }
}
