use crate::error::{Error, Result};

/// Classical fourth-order Runge-Kutta step for `x' = f(t, x)`.
///
/// Every stage derivative is checked for finiteness; the error names the stage time and
/// the index of the first offending component.
pub fn rk4_step<F>(mut rhs: F, state: &[f64], t: f64, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = checked(rhs(t, state)?, t, state.len())?;
    rk4_step_with_first_stage(rhs, state, t, h, &k1)
}

/// Same as [`rk4_step`] with `f(t, x)` already evaluated.
pub fn rk4_step_with_first_stage<F>(mut rhs: F, state: &[f64], t: f64, h: f64, k1: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = state.len();
    let half = 0.5 * h;
    let probe = |k: &[f64], scale: f64| -> Vec<f64> { state.iter().zip(k).map(|(x, d)| x + scale * d).collect() };

    let k2 = checked(rhs(t + half, &probe(k1, half))?, t + half, n)?;
    let k3 = checked(rhs(t + half, &probe(&k2, half))?, t + half, n)?;
    let k4 = checked(rhs(t + h, &probe(&k3, h))?, t + h, n)?;

    let sixth = h / 6.0;
    let next: Vec<f64> = (0..n)
        .map(|i| state[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    checked(next, t + h, n)
}

fn checked(v: Vec<f64>, t: f64, n: usize) -> Result<Vec<f64>> {
    if v.len() != n {
        return Err(Error::Dimension {
            context: "integrator stage derivative",
            expected: n,
            found: v.len(),
        });
    }
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(v),
        Some(i) => Err(Error::Integration {
            t,
            component: format!("state component {i}"),
        }),
    }
}
