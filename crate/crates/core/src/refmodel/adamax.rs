use crate::error::{Error, Result};

/// AdaMax optimizer state for a flat parameter vector.
///
/// Per step `t`:
/// ```text
/// m <- beta1 * m + (1 - beta1) * g
/// u <- max(beta2 * u, |g|)
/// theta <- theta - alpha / (1 - beta1^t) * m / u
/// ```
/// Components with `u == 0` (no gradient seen yet) are left unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaMaxState {
    pub m: Vec<f64>,
    pub u: Vec<f64>,
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

pub const DEFAULT_ALPHA: f64 = 0.002;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;

impl AdaMaxState {
    pub fn new(len: usize, alpha: f64) -> Self {
        AdaMaxState::with_betas(len, alpha, DEFAULT_BETA1, DEFAULT_BETA2)
    }

    pub fn with_betas(len: usize, alpha: f64, beta1: f64, beta2: f64) -> Self {
        AdaMaxState {
            m: vec![0.0; len],
            u: vec![0.0; len],
            t: 0,
            alpha,
            beta1,
            beta2,
        }
    }
}

pub fn adamax_step(params: &mut [f64], grads: &[f64], s: &mut AdaMaxState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: grads.len(),
        });
    }
    if s.m.len() != params.len() || s.u.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            got: s.m.len(),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(i));
    }
    s.t += 1;
    let step = s.alpha / (1.0 - s.beta1.powi(s.t as i32));
    for ((theta, &g), (m, u)) in params
        .iter_mut()
        .zip(grads)
        .zip(s.m.iter_mut().zip(s.u.iter_mut()))
    {
        *m = s.beta1 * *m + (1.0 - s.beta1) * g;
        *u = (s.beta2 * *u).max(g.abs());
        if *u > 0.0 {
            *theta -= step * *m / *u;
        }
    }
    Ok(())
}
