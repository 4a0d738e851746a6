//! Membrane dynamics: the porosity sigmoid, the reaction law, and the two
//! semi-implicit Euler updates.
//!
//! Per interface node and step of size `dt`, with the switching rate chosen
//! from the old state:
//!
//! ```text
//! v' = (v - dt/c_m * I_m + dW/c_m) / (1 + dt/c_m * (S0 + S1 w))
//! w' = (w + dt * r * beta(v)) / (1 + dt * r),   r = rate(tau_max)
//! tau_max = tau_ep if beta(v) >= w else tau_res
//! ```
//!
//! The stiff linear decay of `v` is implicit; the current, the noise and the
//! coupling are explicit. The `w` update is a convex combination of `w` and
//! `beta(v)`, so `w` stays in [0, 1] for every step size without clamping.

use crate::fem::PhysParams;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MembraneError {
    #[error("non-finite input at node {node}")]
    NonFinite { node: usize },
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
}

/// How the switching time constant enters the `w` update.
///
/// `Rate` uses `r = 1 / tau_max`, which is consistent with the reaction law
/// `dw/dt = (beta - w) / tau` as `dt -> 0` and makes electropermeabilization
/// (tau_ep = 1) faster than resealing (tau_res = 10). `Literal` multiplies by
/// `tau_max` itself, reproducing the discrete formula verbatim at the price of
/// inverting the two speeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauConvention {
    #[default]
    Rate,
    Literal,
}

impl TauConvention {
    #[inline]
    pub fn rate(self, tau: f64) -> f64 {
        match self {
            TauConvention::Rate => 1.0 / tau,
            TauConvention::Literal => tau,
        }
    }
}

/// Membrane state on the interface at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneState {
    pub t: f64,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl MembraneState {
    pub fn zero(n: usize) -> Self {
        MembraneState {
            t: 0.0,
            v: vec![0.0; n],
            w: vec![0.0; n],
        }
    }
}

/// Porosity sigmoid `(1 + tanh(k_ep (|xi| - V_th))) / 2`, even, non-decreasing
/// in `|xi|`, with values in [0, 1].
#[inline]
pub fn beta(xi: f64, params: &PhysParams) -> f64 {
    0.5 * (1.0 + (params.k_ep * (xi.abs() - params.v_th)).tanh())
}

/// Reaction law: relaxation of `w` toward `beta(v)` at the electroporation
/// rate when opening and the resealing rate when closing. Equals
/// `max((beta - w)/tau_ep, (beta - w)/tau_res)` because `tau_ep <= tau_res`.
#[inline]
pub fn f_rhs(v: f64, w: f64, params: &PhysParams) -> f64 {
    let b = beta(v, params);
    if b >= w {
        (b - w) / params.tau_ep
    } else {
        (b - w) / params.tau_res
    }
}

/// One semi-implicit step of the porosity equation. The switching test
/// `beta(v) >= w` uses the old iterate.
pub fn step_w(
    v: &[f64],
    w: &[f64],
    dt: f64,
    params: &PhysParams,
    convention: TauConvention,
) -> Result<Vec<f64>, MembraneError> {
    if !(dt > 0.0) {
        return Err(MembraneError::BadStep(dt));
    }
    check_finite(v)?;
    check_finite(w)?;
    Ok(v.iter()
        .zip(w)
        .map(|(&vi, &wi)| {
            let b = beta(vi, params);
            let tau = if b >= wi {
                params.tau_ep
            } else {
                params.tau_res
            };
            let r = convention.rate(tau);
            (wi + dt * r * b) / (1.0 + dt * r)
        })
        .collect())
}

/// One semi-implicit step of the potential-jump equation. `i_m` is the
/// membrane current at the old state; `dw_noise` is the already-sampled noise
/// increment `b(v) dW` per node.
pub fn step_v(
    v: &[f64],
    w: &[f64],
    i_m: &[f64],
    dw_noise: &[f64],
    dt: f64,
    params: &PhysParams,
) -> Result<Vec<f64>, MembraneError> {
    if !(dt > 0.0) {
        return Err(MembraneError::BadStep(dt));
    }
    check_finite(v)?;
    check_finite(w)?;
    check_finite(i_m)?;
    check_finite(dw_noise)?;
    let cm = params.c_m;
    Ok((0..v.len())
        .map(|s| {
            let numer = v[s] - dt / cm * i_m[s] + dw_noise[s] / cm;
            let denom = 1.0 + dt / cm * (params.s0 + params.s1 * w[s]);
            numer / denom
        })
        .collect())
}

fn check_finite(xs: &[f64]) -> Result<(), MembraneError> {
    for (node, x) in xs.iter().enumerate() {
        if !x.is_finite() {
            return Err(MembraneError::NonFinite { node });
        }
    }
    Ok(())
}

/// Strong-convergence study of the jump update on the decoupled scalar test:
/// with zero membrane current and `S1 = 0` the scheme integrates the
/// Ornstein-Uhlenbeck equation `dv = -(S0/c_m) v dt + (alpha/c_m) dW`, whose
/// exact one-step map is known. All refinement levels and the exact reference
/// consume one shared Brownian path through its fine grid.
#[derive(Debug, Clone)]
pub struct OuConvergence {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// Fitted strong order (slope of log error against log dt).
    pub order: f64,
}

pub fn ou_strong_convergence(
    levels: usize,
    n_paths: usize,
    seed: u64,
) -> Result<OuConvergence, crate::noise::NoiseError> {
    use crate::noise::{NoiseKind, NoiseModel};

    assert!(levels >= 2, "need at least two refinement levels");
    let params = PhysParams {
        s1: 0.0,
        ..PhysParams::reference(0.0)
    };
    let theta = params.s0 / params.c_m;
    let alpha = 0.5;
    let v0 = 1.0;
    let t_final = 1.0;
    let coarsest = 32u64; // steps at the coarsest level
    let finest_steps = coarsest << (levels - 1);
    let fine_per_step = 16u64;
    let n_fine = finest_steps * fine_per_step;
    let fine_dt = t_final / n_fine as f64;
    let model = NoiseModel::new(NoiseKind::AdditiveUniform { alpha }, seed, fine_dt)?;

    // Exact one-step map over a fine step: conditional mean decay plus an
    // increment with the exact stationary-consistent variance, driven by the
    // same fine-grid normal.
    let decay = (-theta * fine_dt).exp();
    let kick = alpha / params.c_m * ((1.0 - (-2.0 * theta * fine_dt).exp()) / (2.0 * theta)).sqrt();
    let sqrt_fine = fine_dt.sqrt();

    let mut sum_sq = vec![0.0f64; levels];
    for path_id in 0..n_paths {
        let path = model.path(path_id as u32);
        let mut v_ref = v0;
        for j in 0..n_fine {
            let xi = path.increment(0, j, 1) / sqrt_fine;
            v_ref = decay * v_ref + kick * xi;
        }
        for (level, sum) in sum_sq.iter_mut().enumerate() {
            let steps = coarsest << level;
            let dt = t_final / steps as f64;
            let per = n_fine / steps;
            let mut v = vec![v0];
            let w = vec![0.0];
            let i_m = vec![0.0];
            for k in 0..steps {
                let dw = alpha * path.increment(0, k * per, per);
                v = step_v(&v, &w, &i_m, &[dw], dt, &params).expect("finite OU iteration");
            }
            *sum += (v[0] - v_ref).powi(2);
        }
    }
    let errors: Vec<f64> = sum_sq.iter().map(|s| (s / n_paths as f64).sqrt()).collect();
    let dts: Vec<f64> = (0..levels)
        .map(|l| t_final / (coarsest << l) as f64)
        .collect();
    let (order, _, _) = crate::stats::loglog_slope(&dts, &errors, 0..levels)
        .expect("positive errors in the fit window");
    Ok(OuConvergence { dts, errors, order })
}
