//! Trajectory and ensemble orchestration.
//!
//! Per step: solve the potential at the old state, sample the noise
//! increment, update the jump semi-implicitly, then update the porosity from
//! the old jump. Trajectories are independent units of work; the factorized
//! system is shared read-only, each worker owns its Brownian path, and the
//! ensemble result is ordered by trajectory id so worker count and execution
//! order never change the output.

use crate::fem::{FemError, PhysParams, SaddleSystem};
use crate::membrane::{self, MembraneError, TauConvention};
use crate::mesh::{GeometrySpec, MeshGeometry};
use crate::noise::{sample_increment, KlMode, ModeMap, NoiseError, NoiseKind, NoiseModel};
use crate::stats::l2_norm_sq_edges;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("trajectory {trajectory}: non-finite state at step {step}, node {node}")]
    NonFinite {
        trajectory: usize,
        step: usize,
        node: usize,
    },
    #[error(
        "trajectory {trajectory}: porosity left [0, 1] at step {step}, node {node} (w = {value})"
    )]
    PorosityOutOfBox {
        trajectory: usize,
        step: usize,
        node: usize,
        value: f64,
    },
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("trajectory data inconsistent: {0}")]
    BadData(String),
}

/// Noise description at configuration level; turned into a [`NoiseModel`]
/// once the interface size is known.
#[derive(Debug, Clone)]
pub enum NoiseSpecKind {
    Additive {
        alpha: f64,
        /// Optional per-node profile overriding the uniform one.
        profile: Option<Vec<f64>>,
    },
    LinearMultiplicative {
        alpha: f64,
    },
    TruncatedKl {
        eigenvalues: Vec<f64>,
        /// `values[k][s]`: eigenfunction k sampled at trace node s.
        values: Vec<Vec<f64>>,
        maps: Vec<ModeMap>,
    },
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub kind: NoiseSpecKind,
    /// Fine increments per solver step (dyadic refinement headroom).
    pub fine_substeps: u32,
}

impl NoiseSpec {
    pub fn additive(alpha: f64) -> Self {
        NoiseSpec {
            kind: NoiseSpecKind::Additive {
                alpha,
                profile: None,
            },
            fine_substeps: 16,
        }
    }

    pub fn linear_multiplicative(alpha: f64) -> Self {
        NoiseSpec {
            kind: NoiseSpecKind::LinearMultiplicative { alpha },
            fine_substeps: 16,
        }
    }

    /// Build the node-level model for a trace space of `n_nodes` nodes.
    pub fn build(
        &self,
        dt: f64,
        seed: u64,
        n_nodes: usize,
        trace_edges: &[(usize, usize, f64)],
    ) -> Result<NoiseModel, SimError> {
        if self.fine_substeps == 0 {
            return Err(SimError::BadConfig(
                "fine_substeps must be at least 1".into(),
            ));
        }
        let fine_dt = dt / self.fine_substeps as f64;
        let model = match &self.kind {
            NoiseSpecKind::Additive { alpha, profile } => {
                let m =
                    NoiseModel::new(NoiseKind::AdditiveUniform { alpha: *alpha }, seed, fine_dt)?;
                match profile {
                    Some(p) => {
                        if p.len() != n_nodes {
                            return Err(SimError::BadConfig(format!(
                                "noise profile has {} entries, interface has {n_nodes} nodes",
                                p.len()
                            )));
                        }
                        m.with_profile(p.clone())?
                    }
                    None => m,
                }
            }
            NoiseSpecKind::LinearMultiplicative { alpha } => NoiseModel::new(
                NoiseKind::LinearMultiplicative { alpha: *alpha },
                seed,
                fine_dt,
            )?,
            NoiseSpecKind::TruncatedKl {
                eigenvalues,
                values,
                maps,
            } => {
                if eigenvalues.len() != values.len() || eigenvalues.len() != maps.len() {
                    return Err(SimError::BadConfig(format!(
                        "KL spec inconsistent: {} eigenvalues, {} eigenfunctions, {} maps",
                        eigenvalues.len(),
                        values.len(),
                        maps.len()
                    )));
                }
                let modes: Vec<KlMode> = eigenvalues
                    .iter()
                    .zip(values)
                    .zip(maps)
                    .map(|((&eigenvalue, v), &map)| {
                        if v.len() != n_nodes {
                            return Err(SimError::BadConfig(format!(
                                "KL eigenfunction has {} entries, interface has {n_nodes} nodes",
                                v.len()
                            )));
                        }
                        Ok(KlMode {
                            eigenvalue,
                            values: v.clone(),
                            map,
                        })
                    })
                    .collect::<Result<_, _>>()?;
                let m = NoiseModel::new(NoiseKind::TruncatedKl { modes }, seed, fine_dt)?;
                m.validate_kl_orthonormality(trace_edges)?;
                m
            }
        };
        Ok(model)
    }
}

/// What a trajectory records.
#[derive(Debug, Clone)]
pub struct RecordSpec {
    /// Polar angles whose nearest interface node is sampled each step.
    pub angles: Vec<f64>,
    /// Record squared interface norms of `v` and `w` each step.
    pub norms: bool,
    /// Full state snapshot every this many steps; 0 disables snapshots.
    pub snapshot_stride: usize,
}

impl Default for RecordSpec {
    fn default() -> Self {
        RecordSpec {
            angles: vec![std::f64::consts::PI],
            norms: true,
            snapshot_stride: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub geometry: GeometrySpec,
    pub physics: PhysParams,
    pub dt: f64,
    pub t_final: f64,
    pub t_burn_in: f64,
    pub noise: NoiseSpec,
    pub n_trajectories: usize,
    pub base_seed: u64,
    pub record: RecordSpec,
    pub tau_convention: TauConvention,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.geometry
            .validate()
            .map_err(|e| SimError::BadConfig(e.to_string()))?;
        self.physics
            .validate()
            .map_err(|e| SimError::BadConfig(e.to_string()))?;
        if !(self.dt > 0.0) {
            return Err(SimError::BadConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_burn_in >= 0.0 && self.t_burn_in < self.t_final) {
            return Err(SimError::BadConfig(format!(
                "need 0 <= t_burn_in < t_final, got {} and {}",
                self.t_burn_in, self.t_final
            )));
        }
        if self.n_trajectories < 1 {
            return Err(SimError::BadConfig(
                "n_trajectories must be at least 1".into(),
            ));
        }
        let steps = (self.t_final / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final {
            return Err(SimError::BadConfig(format!(
                "t_final = {} is not a whole number of steps of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Full interface snapshots, taken every `stride` steps (and at the final step).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshots {
    pub stride: usize,
    pub thetas: Vec<f64>,
    pub times: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

/// Everything recorded along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub trajectory_id: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub norm_v_sq: Vec<f64>,
    pub norm_w_sq: Vec<f64>,
    /// Actual polar angles of the recorded nodes.
    pub angles: Vec<f64>,
    /// `v_at[a][k]`: jump at recorded angle `a`, step `k`.
    pub v_at: Vec<Vec<f64>>,
    pub w_at: Vec<Vec<f64>>,
    pub snapshots: Option<Snapshots>,
}

/// Run one trajectory from the standard zero initial data.
pub fn run_trajectory(
    config: &SimConfig,
    mesh: &MeshGeometry,
    system: &SaddleSystem,
    trajectory_id: usize,
) -> Result<TrajectoryRecord, SimError> {
    let n = system.n_trace;
    run_trajectory_from(
        config,
        mesh,
        system,
        trajectory_id,
        &vec![0.0; n],
        &vec![0.0; n],
    )
}

/// Run one trajectory from explicit initial data (used by perturbation
/// studies; the porosity must start inside [0, 1]).
pub fn run_trajectory_from(
    config: &SimConfig,
    mesh: &MeshGeometry,
    system: &SaddleSystem,
    trajectory_id: usize,
    initial_v: &[f64],
    initial_w: &[f64],
) -> Result<TrajectoryRecord, SimError> {
    config.validate()?;
    let n = system.n_trace;
    if mesh.dof_map.n_trace != n {
        return Err(SimError::BadConfig(
            "mesh and assembled system disagree on the trace space".into(),
        ));
    }
    if trajectory_id > u32::MAX as usize {
        return Err(SimError::BadConfig(
            "trajectory id exceeds the seed-stream width".into(),
        ));
    }
    if initial_v.len() != n || initial_w.len() != n {
        return Err(SimError::BadConfig(format!(
            "initial data has {} / {} entries, interface has {n} nodes",
            initial_v.len(),
            initial_w.len()
        )));
    }
    if initial_v.iter().chain(initial_w).any(|x| !x.is_finite()) {
        return Err(SimError::BadConfig("initial data must be finite".into()));
    }
    if initial_w.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
        return Err(SimError::BadConfig(
            "initial porosity must lie in [0, 1]".into(),
        ));
    }
    let trace_edges = system.trace_edge_list();
    let model = config
        .noise
        .build(config.dt, config.base_seed, n, trace_edges)?;
    let path = model.path(trajectory_id as u32);
    let record_nodes: Vec<(f64, usize)> = config
        .record
        .angles
        .iter()
        .map(|&a| {
            let dof = mesh.trace_dof_at_angle(a);
            let node = mesh
                .interface_nodes
                .iter()
                .find(|nd| mesh.dof_map.trace[nd.vertex] == Some(dof))
                .expect("trace dof has a node");
            (node.theta, dof)
        })
        .collect();

    let steps = config.n_steps();
    let dt = config.dt;
    let params = &config.physics;
    let mut v = initial_v.to_vec();
    let mut w = initial_w.to_vec();
    let mut i_m = vec![0.0f64; n];

    let mut times = Vec::with_capacity(steps + 1);
    let mut norm_v_sq = Vec::with_capacity(steps + 1);
    let mut norm_w_sq = Vec::with_capacity(steps + 1);
    let mut v_at = vec![Vec::with_capacity(steps + 1); record_nodes.len()];
    let mut w_at = vec![Vec::with_capacity(steps + 1); record_nodes.len()];
    let mut snapshots = (config.record.snapshot_stride > 0).then(|| Snapshots {
        stride: config.record.snapshot_stride,
        thetas: system.trace_thetas().to_vec(),
        times: Vec::new(),
        v: Vec::new(),
        w: Vec::new(),
    });

    // Pre-build the reduced map so the stepping loop is a dense matvec.
    system.reduced_dtn()?;

    let record = |k: usize,
                  v: &[f64],
                  w: &[f64],
                  times: &mut Vec<f64>,
                  nv: &mut Vec<f64>,
                  nw: &mut Vec<f64>,
                  v_at: &mut Vec<Vec<f64>>,
                  w_at: &mut Vec<Vec<f64>>,
                  snapshots: &mut Option<Snapshots>| {
        let t = k as f64 * dt;
        times.push(t);
        if config.record.norms {
            nv.push(l2_norm_sq_edges(v, trace_edges));
            nw.push(l2_norm_sq_edges(w, trace_edges));
        }
        for (slot, &(_, dof)) in record_nodes.iter().enumerate() {
            v_at[slot].push(v[dof]);
            w_at[slot].push(w[dof]);
        }
        if let Some(s) = snapshots {
            if k % s.stride == 0 || k == steps {
                s.times.push(t);
                s.v.push(v.to_vec());
                s.w.push(w.to_vec());
            }
        }
    };

    record(
        0,
        &v,
        &w,
        &mut times,
        &mut norm_v_sq,
        &mut norm_w_sq,
        &mut v_at,
        &mut w_at,
        &mut snapshots,
    );

    for k in 0..steps {
        let t = k as f64 * dt;
        system.apply_dtn(&v, params.g_at(t), &mut i_m)?;
        let dw = sample_increment(&model, &path, &v, t, dt)?;
        let v_new = membrane::step_v(&v, &w, &i_m, &dw, dt, params)
            .map_err(|e| lift_membrane(e, trajectory_id, k))?;
        let w_new = membrane::step_w(&v, &w, dt, params, config.tau_convention)
            .map_err(|e| lift_membrane(e, trajectory_id, k))?;
        if let Some(node) = v_new.iter().position(|x| !x.is_finite()) {
            return Err(SimError::NonFinite {
                trajectory: trajectory_id,
                step: k + 1,
                node,
            });
        }
        if let Some(node) = w_new.iter().position(|x| !x.is_finite()) {
            return Err(SimError::NonFinite {
                trajectory: trajectory_id,
                step: k + 1,
                node,
            });
        }
        // The porosity update is a convex combination, so leaving [0, 1] can
        // only mean a scheme bug; abort rather than clamp.
        if let Some(node) = w_new.iter().position(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(SimError::PorosityOutOfBox {
                trajectory: trajectory_id,
                step: k + 1,
                node,
                value: w_new[node],
            });
        }
        v = v_new;
        w = w_new;
        record(
            k + 1,
            &v,
            &w,
            &mut times,
            &mut norm_v_sq,
            &mut norm_w_sq,
            &mut v_at,
            &mut w_at,
            &mut snapshots,
        );
    }

    Ok(TrajectoryRecord {
        trajectory_id,
        seed: config.base_seed,
        times,
        norm_v_sq,
        norm_w_sq,
        angles: record_nodes.iter().map(|&(theta, _)| theta).collect(),
        v_at,
        w_at,
        snapshots,
    })
}

fn lift_membrane(e: MembraneError, trajectory: usize, step: usize) -> SimError {
    match e {
        MembraneError::NonFinite { node } => SimError::NonFinite {
            trajectory,
            step,
            node,
        },
        MembraneError::BadStep(dt) => SimError::BadConfig(format!("bad step size {dt}")),
    }
}

/// Run the whole ensemble on a worker pool. Each entry is the result for the
/// matching trajectory id; a failed trajectory does not abort the others.
pub fn run_monte_carlo(
    config: &SimConfig,
    mesh: &MeshGeometry,
    system: &SaddleSystem,
    workers: usize,
) -> Vec<Result<TrajectoryRecord, SimError>> {
    if let Err(e) = config.validate() {
        return vec![Err(e)];
    }
    let ids: Vec<usize> = (0..config.n_trajectories).collect();
    run_selected(config, mesh, system, &ids, workers)
        .into_iter()
        .map(|(_, r)| r)
        .collect()
}

/// Run a chosen subset of trajectory ids (restart support). Results come back
/// paired with their ids, in the order given.
pub fn run_selected(
    config: &SimConfig,
    mesh: &MeshGeometry,
    system: &SaddleSystem,
    ids: &[usize],
    workers: usize,
) -> Vec<(usize, Result<TrajectoryRecord, SimError>)> {
    if ids.is_empty() {
        return Vec::new();
    }
    if let Err(e) = config.validate() {
        return vec![(ids[0], Err(e))];
    }
    // Build the shared reduced map up front so workers never race on it.
    if let Err(e) = system.reduced_dtn() {
        return vec![(ids[0], Err(e.into()))];
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            return vec![(
                ids[0],
                Err(SimError::BadConfig(format!("worker pool: {e}"))),
            )]
        }
    };
    pool.install(|| {
        ids.par_iter()
            .map(|&id| (id, run_trajectory(config, mesh, system, id)))
            .collect()
    })
}

#[cfg(test)]
mod tests;
