//! Saddle-point finite elements for the interface transmission problem.
//!
//! Unknowns are the intra potential, the extra potential, and the membrane
//! current on the interface (a Lagrange multiplier enforcing the prescribed
//! jump). The P1 weak form is assembled into one sparse symmetric indefinite
//! matrix, factorized once with a sparse LU, and reused for every solve. The
//! jump-to-current map realized by the factorization is the discrete
//! Dirichlet-to-Neumann-type operator driving the membrane dynamics.

mod oracle;

pub use oracle::dtn_oracle;

use crate::mesh::{MeshGeometry, OuterBc, Region};
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use std::sync::OnceLock;
use thiserror::Error;

/// Largest interface node count for which a dense jump-to-current matrix may
/// be formed.
pub const DTN_DENSE_GUARD: usize = 2000;

const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid physical parameters: {0}")]
    BadParams(String),
    #[error("invalid oracle geometry: {0}")]
    BadGeometry(String),
    #[error("singular saddle-point matrix ({dim} unknowns, gauge {gauge}): {detail}")]
    Singular {
        dim: usize,
        gauge: &'static str,
        detail: String,
    },
    #[error("non-finite entry in solve input")]
    NonFiniteInput,
    #[error(
        "linear-system residual {residual:e} exceeds tolerance {tol:e}; factorization corrupted?"
    )]
    Residual { residual: f64, tol: f64 },
    #[error("interface has {found} trace nodes, dense map guarded at {DTN_DENSE_GUARD}")]
    TraceGuard { found: usize },
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
}

/// Eigenvalues of the symmetrized pencil `sym(A) x = mu M x` with `M`
/// symmetric positive definite, ascending. Used to check coercivity of the
/// discrete jump-to-current operator against the trace mass.
pub fn generalized_symmetric_eigenvalues(
    a: &[Vec<f64>],
    m: &[Vec<f64>],
) -> Result<Vec<f64>, FemError> {
    let n = a.len();
    if n == 0 || m.len() != n {
        return Err(FemError::Eigen("dimension mismatch".into()));
    }
    let a_sym = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let m_sym = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let em = m_sym
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| FemError::Eigen(format!("mass matrix: {e:?}")))?;
    let s = em.S().column_vector();
    for i in 0..n {
        if !(s[i] > 0.0) {
            return Err(FemError::Eigen(format!(
                "mass matrix is not positive definite (eigenvalue {})",
                s[i]
            )));
        }
    }
    // Whitening transform W = Q diag(s^-1/2) Q^T turns the pencil into an
    // ordinary symmetric eigenproblem for W sym(A) W.
    let q = em.U();
    let q_scaled = faer::Mat::<f64>::from_fn(n, n, |i, j| q[(i, j)] / s[j].sqrt());
    let w = &q_scaled * q.transpose();
    let t = &w * &a_sym * &w;
    let et = t
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| FemError::Eigen(format!("whitened operator: {e:?}")))?;
    let ts = et.S().column_vector();
    let mut eigs: Vec<f64> = (0..n).map(|i| ts[i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eigs)
}

/// Excitation waveform: the applied field is `g_amplitude * shape(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GWaveform {
    Constant,
    /// Field on for `t_on <= t < t_off`, zero outside.
    Pulse {
        t_on: f64,
        t_off: f64,
    },
}

/// Physical parameters of the coupled model (dimensionless).
#[derive(Debug, Clone, PartialEq)]
pub struct PhysParams {
    pub sigma_i: f64,
    pub sigma_e: f64,
    pub c_m: f64,
    /// Membrane conductivity before electropermeabilization.
    pub s0: f64,
    /// Maximal conductivity increase; the membrane conducts `s0 + s1 * w`.
    pub s1: f64,
    pub tau_ep: f64,
    pub tau_res: f64,
    /// Steepness of the porosity sigmoid.
    pub k_ep: f64,
    /// Threshold potential of the porosity sigmoid.
    pub v_th: f64,
    /// Strength of the applied field along the x axis.
    pub g_amplitude: f64,
    pub g_waveform: GWaveform,
}

impl PhysParams {
    /// Reference dimensionless coefficient set used by the shipped presets.
    pub fn reference(g_amplitude: f64) -> Self {
        PhysParams {
            sigma_i: 0.239,
            sigma_e: 2.632,
            c_m: 1.0,
            s0: 1.0,
            s1: 10001.0,
            tau_ep: 1.0,
            tau_res: 10.0,
            k_ep: 40.0,
            v_th: 2.5,
            g_amplitude,
            g_waveform: GWaveform::Constant,
        }
    }

    pub fn validate(&self) -> Result<(), FemError> {
        let positive = [
            ("sigma_i", self.sigma_i),
            ("sigma_e", self.sigma_e),
            ("c_m", self.c_m),
            ("s0", self.s0),
            ("tau_ep", self.tau_ep),
            ("tau_res", self.tau_res),
            ("k_ep", self.k_ep),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(FemError::BadParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.s1 >= 0.0) || !self.s1.is_finite() {
            return Err(FemError::BadParams(format!(
                "s1 must be nonnegative, got {}",
                self.s1
            )));
        }
        if self.tau_ep > self.tau_res {
            return Err(FemError::BadParams(format!(
                "tau_ep = {} must not exceed tau_res = {}",
                self.tau_ep, self.tau_res
            )));
        }
        if !self.g_amplitude.is_finite() || !self.v_th.is_finite() {
            return Err(FemError::BadParams(
                "g_amplitude and v_th must be finite".into(),
            ));
        }
        if let GWaveform::Pulse { t_on, t_off } = self.g_waveform {
            if !(t_on <= t_off) {
                return Err(FemError::BadParams(format!(
                    "pulse requires t_on <= t_off, got [{t_on}, {t_off})"
                )));
            }
        }
        Ok(())
    }

    /// Applied-field value at time `t`.
    pub fn g_at(&self, t: f64) -> f64 {
        match self.g_waveform {
            GWaveform::Constant => self.g_amplitude,
            GWaveform::Pulse { t_on, t_off } => {
                if t >= t_on && t < t_off {
                    self.g_amplitude
                } else {
                    0.0
                }
            }
        }
    }
}

/// Bulk potentials and the membrane current from one saddle-point solve.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub u_intra: Vec<f64>,
    pub u_extra: Vec<f64>,
    /// Membrane current at the trace nodes: the outward intra-side flux
    /// including the applied-field contribution.
    pub i_m: Vec<f64>,
}

/// Dense jump-to-current map extracted from the factorization: applying it is
/// a small dense matvec, which is what the time stepper uses instead of a
/// sparse back-substitution per step.
#[derive(Debug, Clone)]
pub struct ReducedDtn {
    n: usize,
    /// Row-major nodal map: `i_m = d * v + g * g_response`.
    d: Vec<f64>,
    g_response: Vec<f64>,
}

impl ReducedDtn {
    pub fn apply(&self, v: &[f64], g: f64, out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (i, out_i) in out.iter_mut().enumerate() {
            let row = &self.d[i * self.n..(i + 1) * self.n];
            let mut acc = g * self.g_response[i];
            for (dij, vj) in row.iter().zip(v) {
                acc += dij * vj;
            }
            *out_i = acc;
        }
    }
}

/// Assembled and factorized saddle-point system. Immutable after assembly and
/// safe to share across trajectory workers.
pub struct SaddleSystem {
    pub n_intra: usize,
    pub n_extra: usize,
    pub n_trace: usize,
    dim: usize,
    has_gauge: bool,
    /// Raw (duplicate-summed-on-compress) triplets kept for residual checks.
    entries: Vec<Triplet<usize, usize, f64>>,
    matrix_norm1: f64,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    rhs_g_unit: Vec<f64>,
    /// Interface edges as (trace dof, trace dof, length).
    trace_edges: Vec<(usize, usize, f64)>,
    /// Polar angle of each trace node.
    thetas: Vec<f64>,
    reduced: OnceLock<ReducedDtn>,
}

pub fn assemble(mesh: &MeshGeometry, params: &PhysParams) -> Result<SaddleSystem, FemError> {
    params.validate()?;
    let n_i = mesh.dof_map.n_intra;
    let n_e = mesh.dof_map.n_extra;
    let n_t = mesh.dof_map.n_trace;
    let has_gauge = mesh.outer_bc == OuterBc::Periodic;
    let dim = n_i + n_e + n_t + usize::from(has_gauge);
    let extra_off = n_i;
    let trace_off = n_i + n_e;

    let mut entries: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut rhs_g_unit = vec![0.0; dim];

    // Bulk stiffness and the unit applied-field load, one P1 triangle at a time.
    for tri in &mesh.triangles {
        let (sigma, dofs): (f64, &[Option<usize>]) = match tri.region {
            Region::Intra => (params.sigma_i, &mesh.dof_map.intra),
            Region::Extra => (params.sigma_e, &mesh.dof_map.extra),
        };
        let off = match tri.region {
            Region::Intra => 0,
            Region::Extra => extra_off,
        };
        let [a, b, c] = tri.vertices;
        let (xa, ya) = mesh.vertices[a];
        let (xb, yb) = mesh.vertices[b];
        let (xc, yc) = mesh.vertices[c];
        let area = 0.5 * ((xb - xa) * (yc - ya) - (xc - xa) * (yb - ya));
        // Gradient coefficients: grad(phi_p) = (bv[p], cv[p]) / (2 area).
        let bv = [yb - yc, yc - ya, ya - yb];
        let cv = [xc - xb, xa - xc, xb - xa];
        let verts = [a, b, c];
        for p in 0..3 {
            let Some(dp) = dofs[verts[p]] else { continue };
            // Unit-g load: -sigma * integral of d/dx phi_p.
            rhs_g_unit[off + dp] -= sigma * bv[p] / 2.0;
            for q in 0..3 {
                let Some(dq) = dofs[verts[q]] else { continue };
                let k = sigma * (bv[p] * bv[q] + cv[p] * cv[q]) / (4.0 * area);
                entries.push(Triplet::new(off + dp, off + dq, k));
            }
        }
    }

    // Interface coupling: P1 x P1 edge mass between each potential trace and
    // the multiplier, with the constraint row negated so the matrix is symmetric.
    let trace_edges = mesh.trace_edges();
    for e in &mesh.interface_edges {
        let [va, vb] = e.vertices;
        let (xa, ya) = mesh.vertices[va];
        let (xb, yb) = mesh.vertices[vb];
        let len = ((xb - xa).powi(2) + (yb - ya).powi(2)).sqrt();
        let ta = mesh.dof_map.trace[va].expect("interface vertex trace dof");
        let tb = mesh.dof_map.trace[vb].expect("interface vertex trace dof");
        let ia = mesh.dof_map.intra[va].expect("interface vertex intra dof");
        let ib = mesh.dof_map.intra[vb].expect("interface vertex intra dof");
        let ea = mesh.dof_map.extra[va].expect("interface vertex extra dof");
        let eb = mesh.dof_map.extra[vb].expect("interface vertex extra dof");
        for (pot, trc, w) in [
            (ia, ta, len / 3.0),
            (ia, tb, len / 6.0),
            (ib, ta, len / 6.0),
            (ib, tb, len / 3.0),
        ] {
            entries.push(Triplet::new(pot, trace_off + trc, -w));
            entries.push(Triplet::new(trace_off + trc, pot, -w));
        }
        for (pot, trc, w) in [
            (ea, ta, len / 3.0),
            (ea, tb, len / 6.0),
            (eb, ta, len / 6.0),
            (eb, tb, len / 3.0),
        ] {
            entries.push(Triplet::new(extra_off + pot, trace_off + trc, w));
            entries.push(Triplet::new(trace_off + trc, extra_off + pot, w));
        }
    }

    // Gauge: with a periodic exterior the potential pair is defined up to a
    // shared constant; one multiplier pins the mean of the extra potential.
    if has_gauge {
        let gauge = dim - 1;
        for d in 0..n_e {
            entries.push(Triplet::new(extra_off + d, gauge, 1.0));
            entries.push(Triplet::new(gauge, extra_off + d, 1.0));
        }
    }

    let matrix =
        SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &entries).map_err(|e| {
            FemError::Singular {
                dim,
                gauge: if has_gauge {
                    "mean(u_e) = 0"
                } else {
                    "dirichlet boundary"
                },
                detail: format!("assembly failed: {e:?}"),
            }
        })?;
    let mut col_abs = vec![0.0f64; dim];
    for t in &entries {
        col_abs[t.col] += t.val.abs();
    }
    let matrix_norm1 = col_abs.iter().fold(0.0f64, |a, &b| a.max(b));

    let lu = matrix.sp_lu().map_err(|e| FemError::Singular {
        dim,
        gauge: if has_gauge {
            "mean(u_e) = 0"
        } else {
            "dirichlet boundary"
        },
        detail: format!("sparse LU failed: {e:?} ({n_i} intra, {n_e} extra, {n_t} trace dofs)"),
    })?;

    let thetas = mesh.interface_nodes.iter().map(|n| n.theta).collect();

    Ok(SaddleSystem {
        n_intra: n_i,
        n_extra: n_e,
        n_trace: n_t,
        dim,
        has_gauge,
        entries,
        matrix_norm1,
        lu,
        rhs_g_unit,
        trace_edges,
        thetas,
        reduced: OnceLock::new(),
    })
}

impl SaddleSystem {
    pub fn has_gauge(&self) -> bool {
        self.has_gauge
    }

    /// Polar angles of the trace nodes, in trace-DOF order.
    pub fn trace_thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Interface edges as (trace dof, trace dof, length).
    pub fn trace_edge_list(&self) -> &[(usize, usize, f64)] {
        &self.trace_edges
    }

    /// Consistent-mass product `M v` on the trace space.
    pub fn trace_mass_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_trace];
        for &(a, b, len) in &self.trace_edges {
            out[a] += len / 3.0 * v[a] + len / 6.0 * v[b];
            out[b] += len / 6.0 * v[a] + len / 3.0 * v[b];
        }
        out
    }

    fn rhs_for(&self, v: &[f64], g: f64) -> Vec<f64> {
        let trace_off = self.n_intra + self.n_extra;
        let mut rhs: Vec<f64> = self.rhs_g_unit.iter().map(|&r| g * r).collect();
        let mv = self.trace_mass_apply(v);
        for (j, mvj) in mv.iter().enumerate() {
            rhs[trace_off + j] = -mvj;
        }
        rhs
    }

    fn residual_norm(&self, x: &faer::Mat<f64>, col: usize, rhs: &[f64]) -> f64 {
        let mut r: Vec<f64> = rhs.to_vec();
        for t in &self.entries {
            r[t.row] -= t.val * x[(t.col, col)];
        }
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Solve the transmission problem for a prescribed jump `v` (trace-DOF
    /// order) and applied-field strength `g`.
    pub fn solve_potential(&self, v: &[f64], g: f64) -> Result<PotentialSolution, FemError> {
        if v.len() != self.n_trace {
            return Err(FemError::BadParams(format!(
                "jump vector has {} entries, trace space has {}",
                v.len(),
                self.n_trace
            )));
        }
        if !g.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(FemError::NonFiniteInput);
        }
        let rhs = self.rhs_for(v, g);
        let b = faer::Mat::<f64>::from_fn(self.dim, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let xn = (0..self.dim).map(|i| x[(i, 0)].powi(2)).sum::<f64>().sqrt();
        let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let res = self.residual_norm(&x, 0, &rhs);
        let tol = RESIDUAL_TOL * (self.matrix_norm1 * xn + bn) + 1e-300;
        if res > tol {
            return Err(FemError::Residual { residual: res, tol });
        }
        let trace_off = self.n_intra + self.n_extra;
        Ok(PotentialSolution {
            u_intra: (0..self.n_intra).map(|i| x[(i, 0)]).collect(),
            u_extra: (0..self.n_extra)
                .map(|i| x[(self.n_intra + i, 0)])
                .collect(),
            i_m: (0..self.n_trace).map(|i| x[(trace_off + i, 0)]).collect(),
        })
    }

    /// Dense reduced jump-to-current map, built once from `n_trace + 1` solves
    /// and cached. The columns are checked against the factorization residual.
    pub fn reduced_dtn(&self) -> Result<&ReducedDtn, FemError> {
        if let Some(r) = self.reduced.get() {
            return Ok(r);
        }
        let n = self.n_trace;
        let trace_off = self.n_intra + self.n_extra;
        let mut rhs_cols: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rhs_cols.push(self.rhs_for(&e, 0.0));
        }
        rhs_cols.push(self.rhs_for(&vec![0.0; n], 1.0));
        let b = faer::Mat::<f64>::from_fn(self.dim, n + 1, |i, j| rhs_cols[j][i]);
        let x = self.lu.solve(&b);
        for (j, rhs) in rhs_cols.iter().enumerate() {
            let xn = (0..self.dim).map(|i| x[(i, j)].powi(2)).sum::<f64>().sqrt();
            let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let res = self.residual_norm(&x, j, rhs);
            let tol = RESIDUAL_TOL * (self.matrix_norm1 * xn + bn) + 1e-300;
            if res > tol {
                return Err(FemError::Residual { residual: res, tol });
            }
        }
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = x[(trace_off + i, j)];
            }
        }
        let g_response: Vec<f64> = (0..n).map(|i| x[(trace_off + i, n)]).collect();
        let _ = self.reduced.set(ReducedDtn { n, d, g_response });
        Ok(self.reduced.get().expect("reduced map just set"))
    }

    /// Membrane current for a jump `v` and field `g` through the reduced map.
    pub fn apply_dtn(&self, v: &[f64], g: f64, out: &mut [f64]) -> Result<(), FemError> {
        self.reduced_dtn()?.apply(v, g, out);
        Ok(())
    }

    /// Galerkin matrix of the jump-to-current map on the trace space:
    /// entry (i, j) is the current response to the j-th nodal basis jump,
    /// tested against the i-th basis function. Symmetric up to the solver
    /// residual; its generalized eigenvalues against the trace mass are the
    /// discrete flux coefficients.
    pub fn dtn_matrix(&self) -> Result<Vec<Vec<f64>>, FemError> {
        if self.n_trace > DTN_DENSE_GUARD {
            return Err(FemError::TraceGuard {
                found: self.n_trace,
            });
        }
        let reduced = self.reduced_dtn()?;
        let n = self.n_trace;
        let mut out = vec![vec![0.0; n]; n];
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|i| reduced.d[i * n + j]).collect();
            let mcol = self.trace_mass_apply(&col);
            for i in 0..n {
                out[i][j] = mcol[i];
            }
        }
        Ok(out)
    }

    /// Trace mass matrix, dense (same guard as the jump-to-current matrix).
    pub fn trace_mass_matrix(&self) -> Result<Vec<Vec<f64>>, FemError> {
        if self.n_trace > DTN_DENSE_GUARD {
            return Err(FemError::TraceGuard {
                found: self.n_trace,
            });
        }
        let n = self.n_trace;
        let mut m = vec![vec![0.0; n]; n];
        for &(a, b, len) in &self.trace_edges {
            m[a][a] += len / 3.0;
            m[b][b] += len / 3.0;
            m[a][b] += len / 6.0;
            m[b][a] += len / 6.0;
        }
        Ok(m)
    }

    /// Projection coefficient of the current response onto the mode
    /// `cos(n theta)`: the discrete flux coefficient compared against
    /// [`dtn_oracle`] on the concentric geometry.
    pub fn flux_coefficient(&self, mode: u32) -> Result<f64, FemError> {
        let v: Vec<f64> = self
            .thetas
            .iter()
            .map(|&t| (mode as f64 * t).cos())
            .collect();
        let sol = self.solve_potential(&v, 0.0)?;
        let mv = self.trace_mass_apply(&v);
        let num: f64 = mv.iter().zip(&sol.i_m).map(|(a, b)| a * b).sum();
        let den: f64 = mv.iter().zip(&v).map(|(a, b)| a * b).sum();
        Ok(num / den)
    }

    /// Dense assembled matrix; for inspection and small-system tests.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.dim]; self.dim];
        for t in &self.entries {
            m[t.row][t.col] += t.val;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}
