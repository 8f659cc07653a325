//! Adaptive distributed observer for a harmonic leader with unknown frequencies.
//!
//! Each follower runs
//!
//! ```text
//! eta_i'   = S(omega_i) eta_i + mu1 * e_vi
//! omega_i' = mu2 * phi(e_vi) eta_i
//! e_vi     = sum_{j in N_i} a_ij (eta_j - eta_i),   eta_0 = v
//! ```
//!
//! using only its own estimates and those of its neighbors. The frequency update relies on
//! the identity `xᵀ S(z) y = zᵀ phi(x) y`, which makes
//! `V = ½ (η̃ᵀ (H ⊗ I) η̃ + ω̃ᵀ ω̃ / mu2)` nonincreasing along solutions.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::leader::harmonic_generator;
use crate::topology::{CouplingMatrices, Digraph};

/// `(m/2) x m` matrix whose row `k` holds `-x[2k+1]` at column `2k` and `x[2k]` at
/// column `2k+1` (zero-based).
pub fn phi(x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = x.len();
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::invalid(
            "phi argument",
            format!("dimension must be even and positive, got {m}"),
        ));
    }
    let mut p = DMatrix::zeros(m / 2, m);
    for k in 0..m / 2 {
        p[(k, 2 * k)] = -x[2 * k + 1];
        p[(k, 2 * k + 1)] = x[2 * k];
    }
    Ok(p)
}

/// Generator evaluated at an arbitrary (possibly negative) frequency estimate.
pub fn s_of(z: &DVector<f64>) -> DMatrix<f64> {
    harmonic_generator(z.as_slice())
}

// phi(x) y computed without building the matrix
fn phi_apply(x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len() / 2, |k, _| x[2 * k] * y[2 * k + 1] - x[2 * k + 1] * y[2 * k])
}

// S(z) y computed without building the matrix
fn s_apply(z: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(y.len(), |r, _| {
        let k = r / 2;
        if r % 2 == 0 {
            z[k] * y[r + 1]
        } else {
            -z[k] * y[r - 1]
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains {
    pub mu1: f64,
    pub mu2: f64,
}

impl ObserverGains {
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        for (name, v) in [("gains.mu1", mu1), ("gains.mu2", mu2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self { mu1, mu2 })
    }
}

/// Per-follower leader-state and frequency estimates, follower `i` at index `i - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub eta: Vec<DVector<f64>>,
    pub omega_hat: Vec<DVector<f64>>,
}

impl ObserverState {
    pub fn followers(&self) -> usize {
        self.eta.len()
    }

    pub(crate) fn validate(&self, followers: usize, m: usize) -> Result<()> {
        check_dim("observer follower count", followers, self.eta.len())?;
        check_dim("observer follower count", followers, self.omega_hat.len())?;
        for (eta, w) in self.eta.iter().zip(&self.omega_hat) {
            check_dim("eta_i dimension", m, eta.len())?;
            check_dim("omega_i dimension", m / 2, w.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRates {
    pub eta_dot: Vec<DVector<f64>>,
    pub omega_dot: Vec<DVector<f64>>,
}

/// Neighbor-sum consensus errors `e_vi = sum_j a_ij (eta_j - eta_i)` with `eta_0 = v`.
pub fn consensus_errors(eta: &[DVector<f64>], v: &DVector<f64>, g: &Digraph) -> Vec<DVector<f64>> {
    (1..=eta.len())
        .map(|i| {
            let own = &eta[i - 1];
            let mut e = DVector::zeros(own.len());
            for &(j, w) in g.neighbors(i) {
                let other = if j == 0 { v } else { &eta[j - 1] };
                e += (other - own) * w;
            }
            e
        })
        .collect()
}

/// Stacked form `e_v = -(H ⊗ I_m) η̃`.
pub fn stacked_consensus_error(h: &DMatrix<f64>, eta_tilde: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = eta_tilde.len();
    (0..n)
        .map(|i| {
            let mut e = DVector::zeros(eta_tilde[i].len());
            for j in 0..n {
                e -= &eta_tilde[j] * h[(i, j)];
            }
            e
        })
        .collect()
}

fn check_inputs(state: &ObserverState, v: &DVector<f64>, g: &Digraph) -> Result<()> {
    if !v.len().is_multiple_of(2) {
        return Err(Error::invalid("leader state", "dimension must be even"));
    }
    state.validate(g.follower_count(), v.len())
}

/// Right-hand side of the adaptive observer for every follower.
pub fn observer_rhs(
    state: &ObserverState,
    v: &DVector<f64>,
    g: &Digraph,
    gains: ObserverGains,
) -> Result<ObserverRates> {
    check_inputs(state, v, g)?;
    let ev = consensus_errors(&state.eta, v, g);
    Ok(adaptive_rates(state, &ev, gains))
}

pub(crate) fn adaptive_rates(state: &ObserverState, ev: &[DVector<f64>], gains: ObserverGains) -> ObserverRates {
    let mut eta_dot = Vec::with_capacity(ev.len());
    let mut omega_dot = Vec::with_capacity(ev.len());
    for ((eta, w), e) in state.eta.iter().zip(&state.omega_hat).zip(ev) {
        eta_dot.push(s_apply(w, eta) + e * gains.mu1);
        omega_dot.push(phi_apply(e, eta) * gains.mu2);
    }
    ObserverRates { eta_dot, omega_dot }
}

/// Observers that are handed the true frequency, kept as comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownFrequencyObserver {
    /// Every follower uses `S(omega)` directly.
    Static,
    /// Followers run frequency consensus `omega_i' = mu2 sum_j a_ij (omega_j - omega_i)`
    /// with `omega_0 = omega`, so only the leader's children see the true value.
    Consensus,
}

pub fn known_frequency_observer_rhs(
    variant: KnownFrequencyObserver,
    state: &ObserverState,
    v: &DVector<f64>,
    omega: &DVector<f64>,
    g: &Digraph,
    gains: ObserverGains,
) -> Result<ObserverRates> {
    check_inputs(state, v, g)?;
    check_dim("true frequency", v.len() / 2, omega.len())?;
    let ev = consensus_errors(&state.eta, v, g);
    let n = state.followers();
    let mut eta_dot = Vec::with_capacity(n);
    let mut omega_dot = Vec::with_capacity(n);
    for i in 1..=n {
        let eta = &state.eta[i - 1];
        match variant {
            KnownFrequencyObserver::Static => {
                eta_dot.push(s_apply(omega, eta) + &ev[i - 1] * gains.mu1);
                omega_dot.push(DVector::zeros(omega.len()));
            }
            KnownFrequencyObserver::Consensus => {
                let own = &state.omega_hat[i - 1];
                let mut ew = DVector::zeros(omega.len());
                for &(j, w) in g.neighbors(i) {
                    let other = if j == 0 { omega } else { &state.omega_hat[j - 1] };
                    ew += (other - own) * w;
                }
                eta_dot.push(s_apply(own, eta) + &ev[i - 1] * gains.mu1);
                omega_dot.push(ew * gains.mu2);
            }
        }
    }
    Ok(ObserverRates { eta_dot, omega_dot })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverErrors {
    pub eta_tilde: Vec<DVector<f64>>,
    pub omega_tilde: Vec<DVector<f64>>,
    pub e_v: Vec<DVector<f64>>,
    pub lyapunov: f64,
}

/// Estimation errors, consensus errors and `V = ½ (η̃ᵀ (H ⊗ I) η̃ + ω̃ᵀ ω̃ / mu2)`.
pub fn observer_errors(
    state: &ObserverState,
    v: &DVector<f64>,
    omega_true: &DVector<f64>,
    g: &Digraph,
    coupling: &CouplingMatrices,
    mu2: f64,
) -> Result<ObserverErrors> {
    check_inputs(state, v, g)?;
    check_dim("true frequency", v.len() / 2, omega_true.len())?;
    let eta_tilde: Vec<_> = state.eta.iter().map(|e| e - v).collect();
    let omega_tilde: Vec<_> = state.omega_hat.iter().map(|w| w - omega_true).collect();
    let e_v = consensus_errors(&state.eta, v, g);
    let lyapunov = observer_lyapunov(&coupling.h, &eta_tilde, &omega_tilde, mu2);
    Ok(ObserverErrors {
        eta_tilde,
        omega_tilde,
        e_v,
        lyapunov,
    })
}

pub fn observer_lyapunov(h: &DMatrix<f64>, eta_tilde: &[DVector<f64>], omega_tilde: &[DVector<f64>], mu2: f64) -> f64 {
    let n = eta_tilde.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            if h[(i, j)] != 0.0 {
                quad += h[(i, j)] * eta_tilde[i].dot(&eta_tilde[j]);
            }
        }
    }
    let freq: f64 = omega_tilde.iter().map(|w| w.norm_squared()).sum();
    0.5 * (quad + freq / mu2)
}

/// Observer bound to a graph and gains; warns once when the graph is not admissible.
#[derive(Debug, Clone)]
pub struct AdaptiveObserver {
    graph: Digraph,
    coupling: CouplingMatrices,
    gains: ObserverGains,
}

impl AdaptiveObserver {
    pub fn new(graph: Digraph, gains: ObserverGains) -> Self {
        let report = graph.check_leader_connectivity();
        if !report.satisfied {
            log::warn!("adaptive observer on an inadmissible graph: {report}");
        }
        let coupling = graph.coupling_matrices();
        Self { graph, coupling, gains }
    }

    pub fn graph(&self) -> &Digraph {
        &self.graph
    }

    pub fn coupling(&self) -> &CouplingMatrices {
        &self.coupling
    }

    pub fn gains(&self) -> ObserverGains {
        self.gains
    }

    pub fn rhs(&self, state: &ObserverState, v: &DVector<f64>) -> Result<ObserverRates> {
        observer_rhs(state, v, &self.graph, self.gains)
    }

    pub fn errors(&self, state: &ObserverState, v: &DVector<f64>, omega_true: &DVector<f64>) -> Result<ObserverErrors> {
        observer_errors(state, v, omega_true, &self.graph, &self.coupling, self.gains.mu2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Edge;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn single() -> Digraph {
        Digraph::new(2, [Edge::unit(0, 1)]).unwrap()
    }

    fn chain3() -> Digraph {
        Digraph::new(3, [Edge::unit(0, 1), Edge::unit(1, 2), Edge::unit(2, 1)]).unwrap()
    }

    fn gains() -> ObserverGains {
        ObserverGains::new(10.0, 20.0).unwrap()
    }

    #[test]
    fn phi_pattern() {
        let p = phi(&dv(&[1., 0., 1., 0.])).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 4, &[0., 1., 0., 0., 0., 0., 0., 1.]));
        let p = phi(&dv(&[1., 0., 0., 1.])).unwrap();
        assert_eq!(p, DMatrix::from_row_slice(2, 4, &[0., 1., 0., 0., 0., 0., -1., 0.]));
        assert_eq!(phi(&DVector::zeros(4)).unwrap(), DMatrix::zeros(2, 4));
        assert!(phi(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn s_of_blocks() {
        assert_eq!(s_of(&dv(&[0., 0.])), DMatrix::zeros(4, 4));
        let s = s_of(&dv(&[1., 2.]));
        assert_eq!(
            s.view((0, 0), (2, 2)),
            DMatrix::from_row_slice(2, 2, &[0., 1., -1., 0.])
        );
        assert_eq!(
            s.view((2, 2), (2, 2)),
            DMatrix::from_row_slice(2, 2, &[0., 2., -2., 0.])
        );
        assert_eq!(s.view((0, 2), (2, 2)), DMatrix::zeros(2, 2));
    }

    #[test]
    fn bilinear_identity_worked_example() {
        let (z, x, y) = (dv(&[1., 2.]), dv(&[1., 0., 0., 1.]), dv(&[0., 1., 1., 0.]));
        assert_eq!(s_of(&z) * &y, dv(&[1., 0., 0., -2.]));
        assert_eq!(phi(&x).unwrap() * &y, dv(&[1., -1.]));
        let lhs = x.dot(&(s_of(&z) * &y));
        let rhs = z.dot(&(phi(&x).unwrap() * &y));
        assert_eq!(lhs, -1.0);
        assert_eq!(rhs, -1.0);
    }

    #[test]
    fn matrix_free_products_match_matrices() {
        let mut rng = rand_chacha_like(3);
        for _ in 0..100 {
            let z = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let x = DVector::from_fn(6, |_, _| rng.random_range(-5.0..5.0));
            let y = DVector::from_fn(6, |_, _| rng.random_range(-5.0..5.0));
            assert!((s_apply(&z, &y) - s_of(&z) * &y).amax() < 1e-14);
            assert!((phi_apply(&x, &y) - phi(&x).unwrap() * &y).amax() < 1e-14);
        }
    }

    fn rand_chacha_like(seed: u64) -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(seed)
    }

    #[test]
    fn rhs_single_follower_from_zero() {
        let state = ObserverState {
            eta: vec![dv(&[0., 0.])],
            omega_hat: vec![dv(&[0.])],
        };
        let r = observer_rhs(&state, &dv(&[1., 0.]), &single(), gains()).unwrap();
        assert_eq!(r.eta_dot[0], dv(&[10., 0.]));
        assert_eq!(r.omega_dot[0], dv(&[0.]));
    }

    #[test]
    fn rhs_single_follower_offset() {
        let state = ObserverState {
            eta: vec![dv(&[0., 1.])],
            omega_hat: vec![dv(&[1.])],
        };
        let r = observer_rhs(&state, &dv(&[1., 0.]), &single(), gains()).unwrap();
        assert_eq!(r.eta_dot[0], dv(&[11., -10.]));
        assert_eq!(r.omega_dot[0], dv(&[20.]));
    }

    #[test]
    fn synchronized_point_is_fixed() {
        let v = dv(&[0.3, -0.2, 1.0, 0.5]);
        let w = dv(&[4., 2.]);
        let state = ObserverState {
            eta: vec![v.clone(), v.clone()],
            omega_hat: vec![w.clone(), w.clone()],
        };
        let r = observer_rhs(&state, &v, &chain3(), gains()).unwrap();
        let vdot = harmonic_generator(w.as_slice()) * &v;
        for i in 0..2 {
            assert_eq!(r.omega_dot[i], DVector::zeros(2));
            assert!((&r.eta_dot[i] - &vdot).amax() < 1e-15);
        }
        let cm = chain3().coupling_matrices();
        let errs = observer_errors(&state, &v, &w, &chain3(), &cm, 20.0).unwrap();
        assert_eq!(errs.lyapunov, 0.0);
        assert!(errs.e_v.iter().all(|e| e.amax() == 0.0));
    }

    #[test]
    fn lyapunov_quadratic_form() {
        let g = chain3();
        let cm = g.coupling_matrices();
        let v = dv(&[0.5, 0.5]);
        let w = dv(&[1.0]);
        let state = ObserverState {
            eta: vec![&v + dv(&[1., 0.]), v.clone()],
            omega_hat: vec![w.clone(), w.clone()],
        };
        let errs = observer_errors(&state, &v, &w, &g, &cm, 20.0).unwrap();
        assert!((errs.lyapunov - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let state = ObserverState {
            eta: vec![dv(&[0., 0., 0., 0.])],
            omega_hat: vec![dv(&[0.])],
        };
        assert!(matches!(
            observer_rhs(&state, &dv(&[1., 0., 0., 0.]), &single(), gains()),
            Err(Error::Dimension { .. })
        ));
        assert!(ObserverGains::new(10.0, 0.0).is_err());
        assert!(ObserverGains::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn baselines() {
        let g = chain3();
        let v = dv(&[1., 0.]);
        let w = dv(&[3.]);
        let at_truth = ObserverState {
            eta: vec![v.clone(), v.clone()],
            omega_hat: vec![w.clone(), w.clone()],
        };
        let r = known_frequency_observer_rhs(KnownFrequencyObserver::Static, &at_truth, &v, &w, &g, gains()).unwrap();
        assert_eq!(r.eta_dot[0], harmonic_generator(&[3.]) * &v);

        let r =
            known_frequency_observer_rhs(KnownFrequencyObserver::Consensus, &at_truth, &v, &w, &g, gains()).unwrap();
        let vdot = harmonic_generator(&[3.]) * &v;
        for i in 0..2 {
            assert_eq!(r.eta_dot[i], vdot);
            assert_eq!(r.omega_dot[i], DVector::zeros(1));
        }

        let off = ObserverState {
            eta: vec![v.clone(), v.clone()],
            omega_hat: vec![dv(&[1.]), dv(&[1.])],
        };
        let r = known_frequency_observer_rhs(KnownFrequencyObserver::Consensus, &off, &v, &w, &g, gains()).unwrap();
        // follower 1 hears the leader and follower 2 (which agrees with it)
        assert_eq!(r.omega_dot[0], dv(&[20.0 * (3.0 - 1.0)]));
        assert_eq!(r.omega_dot[1], dv(&[0.0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn neighbor_sum_matches_stacked_form(
            g in crate::topology::tests::admissible_graph(),
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha_like(seed);
            let m = 4;
            let v = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
            let eta: Vec<_> = (0..g.follower_count())
                .map(|_| DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0)))
                .collect();
            let tilde: Vec<_> = eta.iter().map(|e| e - &v).collect();
            let direct = consensus_errors(&eta, &v, &g);
            let stacked = stacked_consensus_error(&g.coupling_matrices().h, &tilde);
            for (a, b) in direct.iter().zip(&stacked) {
                prop_assert!((a - b).amax() <= 1e-12);
            }
        }
    }
}
