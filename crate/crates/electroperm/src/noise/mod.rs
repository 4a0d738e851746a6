//! Reproducible Brownian forcing on the interface.
//!
//! Increments live on a fine grid of step `fine_dt`; a solver step consumes
//! the sum of the fine increments it covers, so dyadic step refinements see
//! consistent restrictions of one underlying path. Because the generator is
//! counter-based there is no stored state: any (trajectory, mode, fine-step)
//! increment can be produced independently, in any order, on any worker.

mod philox;

pub use philox::{philox4x32, standard_normal};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("time {t} is not aligned to the fine grid (fine_dt = {fine_dt})")]
    Misaligned { t: f64, fine_dt: f64 },
    #[error("noise model has {model} mode(s), path carries {path}")]
    ModeMismatch { model: usize, path: usize },
    #[error("noise model invalid: {0}")]
    BadModel(String),
}

/// Whether a Karhunen-Loeve mode forces additively or multiplies the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeMap {
    Additive,
    Multiplicative,
}

/// One truncated Karhunen-Loeve mode: eigenvalue, node-sampled eigenfunction,
/// and how it couples to the state.
#[derive(Debug, Clone)]
pub struct KlMode {
    pub eigenvalue: f64,
    pub values: Vec<f64>,
    pub map: ModeMap,
}

#[derive(Debug, Clone)]
pub enum NoiseKind {
    /// One scalar Brownian motion, every node receives `alpha * dW`.
    AdditiveUniform { alpha: f64 },
    /// One scalar Brownian motion, node `s` receives `alpha * v[s] * dW`.
    LinearMultiplicative { alpha: f64 },
    /// Finite mode sum `sum_k sqrt(gamma_k) e_k[s] dW_k`, each mode additive
    /// or multiplied by the state.
    TruncatedKl { modes: Vec<KlMode> },
}

/// Noise description: kind, seed discipline and fine-grid resolution.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
    pub fine_dt: f64,
    /// Optional per-node spatial profile for the additive model; `None` means
    /// the uniform profile.
    pub profile: Option<Vec<f64>>,
    /// Precomputed per-mode node amplitudes `sqrt(gamma_k) * e_k[s]`.
    kl_amplitudes: Vec<Vec<f64>>,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, seed: u64, fine_dt: f64) -> Result<Self, NoiseError> {
        if !(fine_dt > 0.0) || !fine_dt.is_finite() {
            return Err(NoiseError::BadModel(format!(
                "fine_dt must be positive and finite, got {fine_dt}"
            )));
        }
        match &kind {
            NoiseKind::AdditiveUniform { alpha } | NoiseKind::LinearMultiplicative { alpha } => {
                if !(*alpha >= 0.0) {
                    return Err(NoiseError::BadModel(format!(
                        "alpha must be nonnegative, got {alpha}"
                    )));
                }
            }
            NoiseKind::TruncatedKl { modes } => {
                if modes.is_empty() {
                    return Err(NoiseError::BadModel(
                        "KL truncation needs at least one mode".into(),
                    ));
                }
                let n = modes[0].values.len();
                for (k, m) in modes.iter().enumerate() {
                    if !(m.eigenvalue >= 0.0) {
                        return Err(NoiseError::BadModel(format!(
                            "KL eigenvalue {k} is negative: {}",
                            m.eigenvalue
                        )));
                    }
                    if m.values.len() != n {
                        return Err(NoiseError::BadModel(format!(
                            "KL mode {k} has {} node values, mode 0 has {n}",
                            m.values.len()
                        )));
                    }
                }
            }
        }
        let kl_amplitudes = match &kind {
            NoiseKind::TruncatedKl { modes } => modes
                .iter()
                .map(|m| {
                    let s = m.eigenvalue.sqrt();
                    m.values.iter().map(|&e| s * e).collect()
                })
                .collect(),
            _ => Vec::new(),
        };
        Ok(NoiseModel {
            kind,
            seed,
            fine_dt,
            profile: None,
            kl_amplitudes,
        })
    }

    /// Attach a per-node profile to the additive model.
    pub fn with_profile(mut self, profile: Vec<f64>) -> Result<Self, NoiseError> {
        if !matches!(self.kind, NoiseKind::AdditiveUniform { .. }) {
            return Err(NoiseError::BadModel(
                "a node profile is only meaningful for the additive model".into(),
            ));
        }
        self.profile = Some(profile);
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        match &self.kind {
            NoiseKind::AdditiveUniform { .. } | NoiseKind::LinearMultiplicative { .. } => 1,
            NoiseKind::TruncatedKl { modes } => modes.len(),
        }
    }

    /// Per-trajectory Brownian path on this model's fine grid.
    pub fn path(&self, trajectory: u32) -> BrownianPath {
        BrownianPath {
            seed: self.seed,
            trajectory,
            fine_dt: self.fine_dt,
            n_modes: self.n_modes(),
        }
    }

    /// Validate KL eigenfunction orthonormality in the mass inner product of
    /// the given interface edges.
    pub fn validate_kl_orthonormality(
        &self,
        trace_edges: &[(usize, usize, f64)],
    ) -> Result<(), NoiseError> {
        let NoiseKind::TruncatedKl { modes } = &self.kind else {
            return Ok(());
        };
        let mass_dot = |a: &[f64], b: &[f64]| {
            let mut acc = 0.0;
            for &(i, j, len) in trace_edges {
                acc += len / 3.0 * (a[i] * b[i] + a[j] * b[j])
                    + len / 6.0 * (a[i] * b[j] + a[j] * b[i]);
            }
            acc
        };
        for p in 0..modes.len() {
            for q in 0..=p {
                let dot = mass_dot(&modes[p].values, &modes[q].values);
                let target = if p == q { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-8 {
                    return Err(NoiseError::BadModel(format!(
                        "KL eigenfunctions {p} and {q} are not orthonormal: <e{p}, e{q}> = {dot}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Seeded view of one trajectory's Brownian motions. Nothing is cached: the
/// counter-based generator regenerates any fine increment on demand.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    seed: u64,
    trajectory: u32,
    fine_dt: f64,
    n_modes: usize,
}

impl BrownianPath {
    pub fn fine_dt(&self) -> f64 {
        self.fine_dt
    }

    /// Standard-normal draw for one fine step of one mode.
    #[inline]
    fn normal(&self, mode: u32, fine_index: u64) -> f64 {
        standard_normal(
            [
                fine_index as u32,
                (fine_index >> 32) as u32,
                mode,
                self.trajectory,
            ],
            [self.seed as u32, (self.seed >> 32) as u32],
        )
    }

    /// Brownian increment of one mode over `n_fine` fine steps starting at
    /// `start_index`, summed in ascending index order.
    pub fn increment(&self, mode: u32, start_index: u64, n_fine: u64) -> f64 {
        let sqrt_dt = self.fine_dt.sqrt();
        let mut acc = 0.0;
        for k in 0..n_fine {
            acc += self.normal(mode, start_index + k) * sqrt_dt;
        }
        acc
    }

    fn align(&self, t: f64) -> Result<u64, NoiseError> {
        let idx = (t / self.fine_dt).round();
        if idx < 0.0 || (idx * self.fine_dt - t).abs() > 1e-9 * t.abs().max(self.fine_dt) {
            return Err(NoiseError::Misaligned {
                t,
                fine_dt: self.fine_dt,
            });
        }
        Ok(idx as u64)
    }

    fn align_span(&self, dt: f64) -> Result<u64, NoiseError> {
        let n = (dt / self.fine_dt).round();
        if n < 1.0 || (n * self.fine_dt - dt).abs() > 1e-9 * dt.abs().max(self.fine_dt) {
            return Err(NoiseError::Misaligned {
                t: dt,
                fine_dt: self.fine_dt,
            });
        }
        Ok(n as u64)
    }
}

/// Sampled noise increment `b(v) dW` over `[t, t + dt]`, one value per
/// interface node.
pub fn sample_increment(
    model: &NoiseModel,
    path: &BrownianPath,
    v: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>, NoiseError> {
    if path.n_modes != model.n_modes() {
        return Err(NoiseError::ModeMismatch {
            model: model.n_modes(),
            path: path.n_modes,
        });
    }
    let start = path.align(t)?;
    let n_fine = path.align_span(dt)?;
    let n = v.len();
    match &model.kind {
        NoiseKind::AdditiveUniform { alpha } => {
            let dw = path.increment(0, start, n_fine);
            Ok(match &model.profile {
                None => vec![alpha * dw; n],
                Some(profile) => profile.iter().map(|p| p * (alpha * dw)).collect(),
            })
        }
        NoiseKind::LinearMultiplicative { alpha } => {
            let dw = path.increment(0, start, n_fine);
            Ok(v.iter().map(|&vs| alpha * vs * dw).collect())
        }
        NoiseKind::TruncatedKl { modes } => {
            let mut out = vec![0.0; n];
            for (k, mode) in modes.iter().enumerate() {
                let dw = path.increment(k as u32, start, n_fine);
                let amp = &model.kl_amplitudes[k];
                match mode.map {
                    ModeMap::Additive => {
                        for s in 0..n {
                            out[s] += amp[s] * dw;
                        }
                    }
                    ModeMap::Multiplicative => {
                        for s in 0..n {
                            out[s] += amp[s] * v[s] * dw;
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Refinement-consistency probe: the coarse increment over `n_fine` fine steps
/// and the explicit sum of the covered fine increments. Both are computed by
/// the same ascending summation, so they agree exactly.
pub fn coarsen_check(path: &BrownianPath, t: f64, n_fine: u64) -> Result<(f64, f64), NoiseError> {
    let start = path.align(t)?;
    let coarse = path.increment(0, start, n_fine);
    let mut sum = 0.0;
    for k in 0..n_fine {
        sum += path.increment(0, start + k, 1);
    }
    Ok((coarse, sum))
}
