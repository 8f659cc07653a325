//! Harmonic leader `v' = S(omega) v`, `q0 = C v`, with unknown frequencies.
//!
//! The generator is block diagonal with one 2x2 rotation block `omega_k * [[0, 1], [-1, 0]]`
//! per tone, so the state dimension is always even.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::check::ConditionReport;
use crate::error::{check_dim, Error, Result};

/// Block-diagonal skew-symmetric generator `diag(z) ⊗ [[0, 1], [-1, 0]]`.
///
/// Entries are placed rather than computed, so `S + Sᵀ` is exactly zero. Any real `z`
/// is accepted here; only [`LeaderModel`] insists on positive frequencies.
pub fn harmonic_generator(z: &[f64]) -> DMatrix<f64> {
    let m = 2 * z.len();
    let mut s = DMatrix::zeros(m, m);
    for (k, &zk) in z.iter().enumerate() {
        s[(2 * k, 2 * k + 1)] = zk;
        s[(2 * k + 1, 2 * k)] = -zk;
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderModel {
    omega: DVector<f64>,
    v0: DVector<f64>,
    output: DMatrix<f64>,
}

impl LeaderModel {
    pub fn new(omega: DVector<f64>, v0: DVector<f64>, output: DMatrix<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::invalid("leader.omega", "at least one frequency is required"));
        }
        if let Some(w) = omega.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(
                "leader.omega",
                format!("frequencies must be finite and strictly positive, got {w}"),
            ));
        }
        check_dim(
            "leader.v0 length (2 x number of frequencies)",
            2 * omega.len(),
            v0.len(),
        )?;
        check_dim("leader.C column count", v0.len(), output.ncols())?;
        if output.nrows() == 0 {
            return Err(Error::invalid("leader.C", "output matrix needs at least one row"));
        }
        if v0.iter().chain(output.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("leader", "v0 and C must be finite"));
        }
        Ok(Self { omega, v0, output })
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub fn v0(&self) -> &DVector<f64> {
        &self.v0
    }

    pub fn output_matrix(&self) -> &DMatrix<f64> {
        &self.output
    }

    /// Number of tones.
    pub fn tones(&self) -> usize {
        self.omega.len()
    }

    pub fn state_dim(&self) -> usize {
        self.v0.len()
    }

    pub fn output_dim(&self) -> usize {
        self.output.nrows()
    }

    pub fn generator(&self) -> DMatrix<f64> {
        harmonic_generator(self.omega.as_slice())
    }

    /// Exact solution. Block `k` equals `A_k (sin(w_k t + psi_k), cos(w_k t + psi_k))` with
    /// `A_k` the block norm of `v0` and `psi_k = atan2(v0[2k], v0[2k+1])`; it is evaluated
    /// as the rotation of `v0` by `w_k t` so that `state_at(0) == v0` exactly.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.v0.len());
        for (k, &w) in self.omega.iter().enumerate() {
            let (a, b) = (self.v0[2 * k], self.v0[2 * k + 1]);
            let (s, c) = (w * t).sin_cos();
            v[2 * k] = a * c + b * s;
            v[2 * k + 1] = b * c - a * s;
        }
        v
    }

    /// Amplitude and phase `(A_k, psi_k)` of every tone.
    pub fn amplitude_phase(&self) -> Vec<(f64, f64)> {
        (0..self.tones())
            .map(|k| {
                let (a, b) = (self.v0[2 * k], self.v0[2 * k + 1]);
                (a.hypot(b), a.atan2(b))
            })
            .collect()
    }

    /// `(q0, q0_dot) = (C v, C S(omega) v)`.
    pub fn output(&self, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        check_dim("leader state", self.v0.len(), v.len())?;
        let q0 = &self.output * v;
        let q0_dot = &self.output * (self.generator() * v);
        Ok((q0, q0_dot))
    }

    /// Distinct frequencies and no zero block in `v0`: the leader state is then
    /// persistently exciting and frequency estimates converge.
    pub fn check_excitation(&self) -> ConditionReport {
        for i in 0..self.omega.len() {
            for j in (i + 1)..self.omega.len() {
                if self.omega[i] == self.omega[j] {
                    return ConditionReport::fail(format!(
                        "frequencies {} and {} coincide (both {})",
                        i + 1,
                        j + 1,
                        self.omega[i]
                    ));
                }
            }
        }
        for k in 0..self.omega.len() {
            if self.v0[2 * k] == 0.0 && self.v0[2 * k + 1] == 0.0 {
                return ConditionReport::fail(format!(
                    "initial state block {} (components {}, {}) is zero",
                    k + 1,
                    2 * k + 1,
                    2 * k + 2
                ));
            }
        }
        ConditionReport::pass()
    }

    /// Closed-form samples on `0, dt, 2dt, ..` up to and including `t_end`.
    pub fn sample(&self, dt: f64, t_end: f64) -> (Vec<f64>, Vec<DVector<f64>>) {
        let steps = (t_end / dt).round() as usize;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|&t| self.state_at(t)).collect();
        (times, values)
    }
}

/// Persistent-excitation verdict for a sampled signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeReport {
    pub window: f64,
    pub offset: f64,
    pub epsilon: f64,
    pub min_gram_eig: f64,
    pub is_pe: bool,
}

/// Relative PE threshold: one tenth of the mean per-component squared amplitude.
pub fn default_pe_threshold(values: &[DVector<f64>]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let dim = values[0].len().max(1) as f64;
    let mean_sq = values.iter().map(|v| v.norm_squared()).sum::<f64>() / values.len() as f64;
    0.1 * mean_sq / dim
}

/// Sliding-window Gram test `(1/T0) ∫_t^{t+T0} f fᵀ ds ≥ ε I` for all window starts
/// `t ≥ offset`, stride one sample, trapezoid quadrature.
///
/// The window is rounded to a whole number of samples and the Gram is normalised by
/// that rounded length.
pub fn pe_gram(times: &[f64], values: &[DVector<f64>], window: f64, offset: f64, epsilon: f64) -> Result<PeReport> {
    check_dim("PE sample values", times.len(), values.len())?;
    if times.len() < 3 {
        return Err(Error::invalid("PE samples", "at least 3 samples are required"));
    }
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::invalid("PE window", format!("must be positive, got {window}")));
    }
    let dim = values[0].len();
    if dim == 0 || values.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid(
            "PE samples",
            "all samples must share one nonzero dimension",
        ));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::invalid("PE samples", "times must increase"));
    }
    for (k, pair) in times.windows(2).enumerate() {
        if ((pair[1] - pair[0]) - dt).abs() > 1e-9 {
            return Err(Error::invalid(
                "PE samples",
                format!("spacing is not uniform at sample {k} (t = {})", pair[0]),
            ));
        }
    }
    let last = times[times.len() - 1];
    if offset < times[0] - 1e-9 || last + 1e-9 < offset + 2.0 * window {
        return Err(Error::invalid(
            "PE samples",
            format!(
                "samples cover [{}, {last}] but offset + 2 x window = {} is required",
                times[0],
                offset + 2.0 * window
            ),
        ));
    }
    let w = (window / dt).round().max(1.0) as usize;
    let len = w as f64 * dt;

    // cumulative trapezoid integral of f fᵀ
    let mut cum = Vec::with_capacity(times.len());
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    cum.push(acc.clone());
    let mut prev = &values[0] * values[0].transpose();
    for v in &values[1..] {
        let cur = v * v.transpose();
        acc += (&prev + &cur) * (0.5 * dt);
        cum.push(acc.clone());
        prev = cur;
    }

    let first = times.iter().position(|&t| t >= offset - 1e-9).unwrap_or(0);
    let mut min_eig = f64::INFINITY;
    for start in first..times.len() - w {
        let gram = (&cum[start + w] - &cum[start]) / len;
        let sym = (&gram + gram.transpose()) * 0.5;
        min_eig = min_eig.min(sym.symmetric_eigenvalues().min());
    }
    Ok(PeReport {
        window,
        offset,
        epsilon,
        min_gram_eig: min_eig,
        is_pe: min_eig >= epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c_out() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 4, &[1., 0., 0., 0., 0., 0., 1., 0.])
    }

    fn reference() -> LeaderModel {
        LeaderModel::new(
            DVector::from_vec(vec![4., 2.]),
            DVector::from_vec(vec![1., 0., 1., 0.]),
            c_out(),
        )
        .unwrap()
    }

    // fixed-step RK4 on v' = S v, kept separate from the engine integrator
    fn rk4_linear(s: &DMatrix<f64>, v0: &DVector<f64>, h: f64, steps: usize) -> Vec<DVector<f64>> {
        let mut out = vec![v0.clone()];
        let mut v = v0.clone();
        for _ in 0..steps {
            let k1 = s * &v;
            let k2 = s * (&v + &k1 * (h / 2.0));
            let k3 = s * (&v + &k2 * (h / 2.0));
            let k4 = s * (&v + &k3 * h);
            v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            out.push(v.clone());
        }
        out
    }

    #[test]
    fn generator_blocks() {
        let s = harmonic_generator(&[4., 2.]);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[0., 4., 0., 0., -4., 0., 0., 0., 0., 0., 0., 2., 0., 0., -2., 0.],
        );
        assert_eq!(s, expected);
        assert_eq!(
            harmonic_generator(&[1.]),
            DMatrix::from_row_slice(2, 2, &[0., 1., -1., 0.])
        );
        assert_eq!(harmonic_generator(&[0.]), DMatrix::zeros(2, 2));
        assert_eq!(&s + s.transpose(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn model_validation() {
        let bad_freq = LeaderModel::new(DVector::from_vec(vec![4., 0.]), DVector::zeros(4), c_out());
        assert!(matches!(bad_freq, Err(Error::Invalid { .. })));
        let bad_dim = LeaderModel::new(DVector::from_vec(vec![4., 2.]), DVector::zeros(3), c_out());
        assert!(matches!(bad_dim, Err(Error::Dimension { .. })));
        let bad_c = LeaderModel::new(DVector::from_vec(vec![4., 2.]), DVector::zeros(4), DMatrix::zeros(2, 3));
        assert!(matches!(bad_c, Err(Error::Dimension { .. })));
    }

    #[test]
    fn closed_form_known_values() {
        let leader = reference();
        assert_eq!(leader.state_at(0.0), DVector::from_vec(vec![1., 0., 1., 0.]));
        let v = leader.state_at(PI / 8.0);
        let expected = DVector::from_vec(vec![0., -1., FRAC_1_SQRT_2, -FRAC_1_SQRT_2]);
        assert!((v - expected).amax() < 1e-15);
    }

    #[test]
    fn rotation_form_matches_amplitude_phase_form() {
        let leader = LeaderModel::new(
            DVector::from_vec(vec![4., 2., 0.7]),
            DVector::from_vec(vec![0.3, -1.2, 0., 2.0, -0.5, 0.]),
            DMatrix::identity(6, 6),
        )
        .unwrap();
        for t in [0.0, 0.37, 5.0, 29.9] {
            let v = leader.state_at(t);
            for (k, (amp, psi)) in leader.amplitude_phase().into_iter().enumerate() {
                let w = leader.omega()[k];
                assert!((v[2 * k] - amp * (w * t + psi).sin()).abs() < 1e-14);
                assert!((v[2 * k + 1] - amp * (w * t + psi).cos()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn closed_form_matches_rk4_at_pi_over_8() {
        let leader = reference();
        let steps = 10_000;
        let h = PI / 8.0 / steps as f64;
        let traj = rk4_linear(&leader.generator(), leader.v0(), h, steps);
        assert!((traj[steps].clone() - leader.state_at(PI / 8.0)).amax() < 1e-12);
    }

    #[test]
    fn outputs() {
        let leader = reference();
        let v = DVector::from_vec(vec![1., 0., 1., 0.]);
        let (q0, q0_dot) = leader.output(&v).unwrap();
        assert_eq!(q0, DVector::from_vec(vec![1., 1.]));
        assert_eq!(q0_dot, DVector::from_vec(vec![0., 0.]));
        let (z, zd) = leader.output(&DVector::zeros(4)).unwrap();
        assert_eq!(z, DVector::zeros(2));
        assert_eq!(zd, DVector::zeros(2));
        assert!(matches!(
            leader.output(&DVector::zeros(3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn excitation_check() {
        assert!(reference().check_excitation().satisfied);
        let same = LeaderModel::new(
            DVector::from_vec(vec![3., 3.]),
            DVector::from_vec(vec![1., 0., 1., 0.]),
            c_out(),
        )
        .unwrap();
        let r = same.check_excitation();
        assert!(!r.satisfied);
        assert!(r.diagnostic.unwrap().contains("coincide"));
        let zero_block = LeaderModel::new(
            DVector::from_vec(vec![4., 2.]),
            DVector::from_vec(vec![1., 0., 0., 0.]),
            c_out(),
        )
        .unwrap();
        let r = zero_block.check_excitation();
        assert!(!r.satisfied);
        assert!(r.diagnostic.unwrap().contains("block 2"));
    }

    #[test]
    fn pe_constant_signal_is_rank_one() {
        let dt = 1e-2;
        let times: Vec<f64> = (0..=2000).map(|k| k as f64 * dt).collect();
        let values = vec![DVector::from_vec(vec![1., 0.]); times.len()];
        let r = pe_gram(&times, &values, 5.0, 0.0, 0.1).unwrap();
        assert!(r.min_gram_eig.abs() < 1e-12);
        assert!(!r.is_pe);
    }

    #[test]
    fn pe_unit_circle_gram_is_half_identity() {
        let dt = 1e-3;
        let t_end = 3.0 * 2.0 * PI;
        let n = (t_end / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let values: Vec<_> = times
            .iter()
            .map(|t| DVector::from_vec(vec![t.sin(), t.cos()]))
            .collect();
        let r = pe_gram(&times, &values, 2.0 * PI, 0.0, 0.1).unwrap();
        // window is rounded to whole samples: off-period by at most dt/2
        assert!((r.min_gram_eig - 0.5).abs() < 1e-3, "{}", r.min_gram_eig);
        assert!(r.is_pe);
    }

    #[test]
    fn pe_reference_leader() {
        let leader = reference();
        let (times, values) = leader.sample(1e-3, 4.0 * PI + 1.0);
        let r = pe_gram(&times, &values, 2.0 * PI, 0.0, 0.1).unwrap();
        assert!(r.is_pe, "{r:?}");
        assert!(r.min_gram_eig > 0.4);
    }

    #[test]
    fn pe_input_validation() {
        let times = vec![0.0, 0.1, 0.3, 0.4];
        let values = vec![DVector::from_vec(vec![1.0]); 4];
        assert!(pe_gram(&times, &values, 0.1, 0.0, 0.1).is_err());
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let values = vec![DVector::from_vec(vec![1.0]); 10];
        // span 0.9 < 2 x 1.0
        assert!(pe_gram(&times, &values, 1.0, 0.0, 0.1).is_err());
        assert!(pe_gram(&times[..2], &values[..2], 0.1, 0.0, 0.1).is_err());
    }

    #[test]
    fn default_threshold_is_relative() {
        let values = vec![DVector::from_vec(vec![1., 0., 1., 0.]); 4];
        assert!((default_pe_threshold(&values) - 0.05).abs() < 1e-15);
        let scaled: Vec<_> = values.iter().map(|v| v * 10.0).collect();
        assert!((default_pe_threshold(&scaled) - 5.0).abs() < 1e-12);
    }

    fn random_leader(w_max: f64) -> impl Strategy<Value = LeaderModel> {
        (1usize..4).prop_flat_map(move |l| {
            (
                proptest::collection::vec(0.5f64..w_max, l),
                proptest::collection::vec(-1.0f64..1.0, 2 * l),
            )
                .prop_map(move |(w, v0)| {
                    LeaderModel::new(
                        DVector::from_vec(w),
                        DVector::from_vec(v0),
                        DMatrix::identity(2 * l, 2 * l),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn closed_form_matches_rk4(leader in random_leader(6.0)) {
            let h = 1e-3;
            let traj = rk4_linear(&leader.generator(), leader.v0(), h, 30_000);
            let norm0 = leader.v0().norm();
            let mut worst = 0.0f64;
            for (k, v) in traj.iter().enumerate() {
                let exact = leader.state_at(k as f64 * h);
                worst = worst.max((v - &exact).amax());
                prop_assert!((exact.norm() - norm0).abs() < 1e-8);
                prop_assert!((v.norm() - norm0).abs() < 1e-6);
            }
            prop_assert!(worst <= 1e-8, "max deviation {worst}");
        }

        /// Above ~6 rad/s the RK4 phase error `w^5 h^4 / 120` per step exceeds 1e-8 over
        /// 30 s, so the comparison is made against that bound instead.
        #[test]
        fn closed_form_matches_rk4_within_phase_error_bound(leader in random_leader(10.0)) {
            let h = 1e-3;
            let steps = 30_000;
            let traj = rk4_linear(&leader.generator(), leader.v0(), h, steps);
            let exact = leader.state_at(steps as f64 * h);
            let w_max = leader.omega().max();
            let bound = 1e-8 + 1.1 * steps as f64 * w_max.powi(5) * h.powi(4) / 120.0 * leader.v0().norm();
            prop_assert!((&traj[steps] - exact).amax() <= bound);
        }

        #[test]
        fn excited_leaders_are_pe(leader in random_leader(10.0)) {
            prop_assume!(leader.check_excitation().satisfied);
            prop_assume!((0..leader.tones()).all(|k| leader.v0().rows(2 * k, 2).norm() > 0.05));
            let w = leader.omega();
            prop_assume!((0..w.len()).all(|i| (0..i).all(|j| (w[i] - w[j]).abs() > 0.1)));
            let w_min = leader.omega().min();
            let window = 2.0 * PI / w_min;
            let (times, values) = leader.sample(5e-3, 2.0 * window + 0.1);
            let r = pe_gram(&times, &values, window, 0.0, 0.0).unwrap();
            prop_assert!(r.min_gram_eig > 0.0, "{r:?}");
        }
    }
}
