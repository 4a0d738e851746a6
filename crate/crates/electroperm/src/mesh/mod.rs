//! Conforming triangular meshes of a domain with an embedded circular cell.
//!
//! The mesh is boundary-fitted: interface vertices lie exactly on the circle,
//! every interface edge separates one intra triangle from one extra triangle,
//! and interface vertices carry two potential DOFs (one per side) plus one
//! trace DOF, because the potential is discontinuous across the membrane.

mod generate;
mod io;

pub use generate::generate_mesh;
pub use io::{import_mesh, read_mesh, write_mesh};

use thiserror::Error;

/// Relative tolerance for "vertex lies on the circle" checks.
const CIRCLE_TOL: f64 = 1e-10;
/// Absolute tolerance for periodic tangential matching.
const PERIODIC_TOL: f64 = 1e-10;
/// Triangles with area below this are considered degenerate.
const AREA_TOL: f64 = 1e-14;
/// A circle resolved by fewer interface nodes than this is rejected.
pub const MIN_INTERFACE_NODES: usize = 16;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("infeasible geometry: {0}")]
    Infeasible(String),
    #[error("target_h too coarse to resolve circle: {found} interface nodes (need >= {MIN_INTERFACE_NODES})")]
    TooCoarse { found: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mesh invariant `{name}` violated: {detail}")]
    Invariant { name: &'static str, detail: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Boundary condition kind on the outer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterBc {
    Periodic,
    DirichletZero,
}

/// Shape of the outer boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterShape {
    /// Square `(0, side)^2`.
    Square,
    /// Circle of the given radius concentric with the cell. Used by the
    /// separable validation geometry.
    Disk { radius: f64 },
}

/// Geometry description consumed by the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    /// Side length of the square domain (dimensionless, 1.0 in all presets).
    pub domain_side: f64,
    pub cell_center: (f64, f64),
    pub cell_radius: f64,
    /// Target mesh size; the generator keeps every edge below `2 * target_h`.
    pub target_h: f64,
    pub outer_bc: OuterBc,
    pub outer_shape: OuterShape,
}

impl GeometrySpec {
    /// Unit square with an embedded circular cell.
    pub fn square(cell_center: (f64, f64), cell_radius: f64, target_h: f64, bc: OuterBc) -> Self {
        GeometrySpec {
            domain_side: 1.0,
            cell_center,
            cell_radius,
            target_h,
            outer_bc: bc,
            outer_shape: OuterShape::Square,
        }
    }

    /// Concentric disk-in-disk geometry with a grounded outer circle.
    /// This is the separable geometry the closed-form flux oracle applies to.
    pub fn disk_in_disk(r_inner: f64, r_outer: f64, target_h: f64) -> Self {
        GeometrySpec {
            domain_side: 2.0 * r_outer,
            cell_center: (0.0, 0.0),
            cell_radius: r_inner,
            target_h,
            outer_bc: OuterBc::DirichletZero,
            outer_shape: OuterShape::Disk { radius: r_outer },
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.target_h > 0.0) {
            return Err(MeshError::Infeasible(format!(
                "target_h must be positive, got {}",
                self.target_h
            )));
        }
        if !(self.cell_radius > 0.0) {
            return Err(MeshError::Infeasible(format!(
                "cell_radius must be positive, got {}",
                self.cell_radius
            )));
        }
        let (cx, cy) = self.cell_center;
        let reach = self.cell_radius + self.target_h;
        match self.outer_shape {
            OuterShape::Square => {
                let s = self.domain_side;
                if !(s > 0.0) {
                    return Err(MeshError::Infeasible(format!(
                        "domain_side must be positive, got {s}"
                    )));
                }
                if cx - reach < 0.0 || cx + reach > s || cy - reach < 0.0 || cy + reach > s {
                    return Err(MeshError::Infeasible(format!(
                        "cell (center ({cx}, {cy}), radius {}) not separated from the square boundary by target_h = {}",
                        self.cell_radius, self.target_h
                    )));
                }
            }
            OuterShape::Disk { radius } => {
                let off = (cx * cx + cy * cy).sqrt();
                if !(radius > 0.0) || off + reach > radius {
                    return Err(MeshError::Infeasible(format!(
                        "cell radius {} + clearance {} does not fit inside outer disk radius {radius}",
                        self.cell_radius, self.target_h
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Region tag of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Intra,
    Extra,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangle {
    pub vertices: [usize; 3],
    pub region: Region,
}

/// Oriented interface edge with its intra-to-extra unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceEdge {
    pub vertices: [usize; 2],
    pub normal: (f64, f64),
}

/// Interface vertex together with its polar angle about the cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceNode {
    pub vertex: usize,
    pub theta: f64,
}

/// Degree-of-freedom numbering. Interface vertices appear in both potential
/// spaces (the potential jumps across the membrane) and in the trace space.
/// Periodic slave vertices share their master's extra DOF; Dirichlet boundary
/// vertices carry no extra DOF.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub intra: Vec<Option<usize>>,
    pub extra: Vec<Option<usize>>,
    pub trace: Vec<Option<usize>>,
    pub n_intra: usize,
    pub n_extra: usize,
    pub n_trace: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshGeometry {
    pub vertices: Vec<(f64, f64)>,
    pub triangles: Vec<Triangle>,
    /// Ordered CCW along the circle; `vertices[0] -> vertices[1]` runs CCW.
    pub interface_edges: Vec<InterfaceEdge>,
    /// Sorted by strictly increasing theta in (-pi, pi].
    pub interface_nodes: Vec<InterfaceNode>,
    /// (slave, master) vertex pairs; empty unless the outer BC is periodic.
    pub periodic_pairs: Vec<(usize, usize)>,
    pub dof_map: DofMap,
    pub outer_bc: OuterBc,
    /// Cell center recovered from the interface vertices (least-squares circle).
    pub cell_center: (f64, f64),
    /// Cell radius recovered from the interface vertices.
    pub cell_radius: f64,
}

impl MeshGeometry {
    /// Total length of the interface polygon.
    pub fn interface_measure(&self) -> f64 {
        self.interface_edges
            .iter()
            .map(|e| {
                let (x0, y0) = self.vertices[e.vertices[0]];
                let (x1, y1) = self.vertices[e.vertices[1]];
                ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt()
            })
            .sum()
    }

    /// Sum of triangle areas for one region.
    pub fn region_area(&self, region: Region) -> f64 {
        self.triangles
            .iter()
            .filter(|t| t.region == region)
            .map(|t| triangle_area(&self.vertices, t.vertices))
            .sum()
    }

    /// Trace DOF index of the interface node closest to the polar angle `theta`.
    pub fn trace_dof_at_angle(&self, theta: f64) -> usize {
        let wrap = |d: f64| {
            let mut d = d.abs() % (2.0 * std::f64::consts::PI);
            if d > std::f64::consts::PI {
                d = 2.0 * std::f64::consts::PI - d;
            }
            d
        };
        let node = self
            .interface_nodes
            .iter()
            .min_by(|a, b| {
                wrap(a.theta - theta)
                    .partial_cmp(&wrap(b.theta - theta))
                    .unwrap()
            })
            .expect("mesh has interface nodes");
        self.dof_map.trace[node.vertex].expect("interface node has a trace dof")
    }

    /// Interface edges as (trace DOF, trace DOF, length) triples.
    pub fn trace_edges(&self) -> Vec<(usize, usize, f64)> {
        self.interface_edges
            .iter()
            .map(|e| {
                let (x0, y0) = self.vertices[e.vertices[0]];
                let (x1, y1) = self.vertices[e.vertices[1]];
                let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
                let t0 = self.dof_map.trace[e.vertices[0]].expect("interface vertex trace dof");
                let t1 = self.dof_map.trace[e.vertices[1]].expect("interface vertex trace dof");
                (t0, t1, len)
            })
            .collect()
    }

    /// Outer-boundary vertices, found topologically: endpoints of non-interface
    /// edges that belong to exactly one triangle.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let interface: std::collections::HashSet<(usize, usize)> = self
            .interface_edges
            .iter()
            .map(|e| {
                let [u, v] = e.vertices;
                (u.min(v), u.max(v))
            })
            .collect();
        boundary_vertices_raw(self.vertices.len(), &self.triangles, &interface)
    }
}

fn boundary_vertices_raw(
    n_vertices: usize,
    triangles: &[Triangle],
    interface_keys: &std::collections::HashSet<(usize, usize)>,
) -> Vec<usize> {
    use std::collections::HashMap;
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        let [a, b, c] = t.vertices;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let key = (u.min(v), u.max(v));
            *count.entry(key).or_insert(0) += 1;
        }
    }
    let mut on_boundary = vec![false; n_vertices];
    for (&(u, v), &n) in &count {
        if n == 1 && !interface_keys.contains(&(u, v)) {
            on_boundary[u] = true;
            on_boundary[v] = true;
        }
    }
    (0..n_vertices).filter(|&v| on_boundary[v]).collect()
}

pub(crate) fn triangle_area(vertices: &[(f64, f64)], v: [usize; 3]) -> f64 {
    let (x0, y0) = vertices[v[0]];
    let (x1, y1) = vertices[v[1]];
    let (x2, y2) = vertices[v[2]];
    0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
}

/// Least-squares circle through a point set (Kasa fit). Exact when the points
/// lie exactly on a circle, independent of their distribution along it.
fn fit_circle(points: &[(f64, f64)]) -> Result<((f64, f64), f64), MeshError> {
    let n = points.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in points {
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    // Solve for the center in centered coordinates to keep the system well scaled.
    let (mut suu, mut suv, mut svv, mut suw, mut svw) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (u, v) = (x - mx, y - my);
        let w = u * u + v * v;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suw += u * w;
        svw += v * w;
    }
    let det = suu * svv - suv * suv;
    if det.abs() < 1e-30 {
        return Err(MeshError::Invariant {
            name: "interface_on_circle",
            detail: "interface vertices are collinear; cannot fit a circle".into(),
        });
    }
    let uc = 0.5 * (svv * suw - suv * svw) / det;
    let vc = 0.5 * (suu * svw - suv * suw) / det;
    let center = (mx + uc, my + vc);
    let radius = points
        .iter()
        .map(|&(x, y)| ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    Ok((center, radius))
}

/// Assemble interface structure, DOF numbering and run all validations on raw
/// mesh data. Shared by the generator and the importer so imported meshes are
/// held to exactly the same invariants.
pub(crate) fn finalize_mesh(
    vertices: Vec<(f64, f64)>,
    mut triangles: Vec<Triangle>,
    raw_interface: Vec<[usize; 2]>,
    periodic_pairs: Vec<(usize, usize)>,
    outer_bc: OuterBc,
) -> Result<MeshGeometry, MeshError> {
    use std::collections::{HashMap, HashSet};

    let nv = vertices.len();
    for (i, t) in triangles.iter().enumerate() {
        for &v in &t.vertices {
            if v >= nv {
                return Err(MeshError::Invariant {
                    name: "vertex_index",
                    detail: format!(
                        "triangle {i} references vertex {v} out of range ({nv} vertices)"
                    ),
                });
            }
        }
    }
    for (i, e) in raw_interface.iter().enumerate() {
        for &v in e {
            if v >= nv {
                return Err(MeshError::Invariant {
                    name: "vertex_index",
                    detail: format!(
                        "interface edge {i} references vertex {v} out of range ({nv} vertices)"
                    ),
                });
            }
        }
    }
    for (i, &(s, m)) in periodic_pairs.iter().enumerate() {
        if s >= nv || m >= nv {
            return Err(MeshError::Invariant {
                name: "vertex_index",
                detail: format!(
                    "periodic pair {i} references a vertex out of range ({nv} vertices)"
                ),
            });
        }
    }

    // Orientation: make every triangle CCW, reject degenerate ones.
    for (i, t) in triangles.iter_mut().enumerate() {
        let a = triangle_area(&vertices, t.vertices);
        if a.abs() <= AREA_TOL {
            return Err(MeshError::Invariant {
                name: "triangle_area",
                detail: format!("triangle {i} is degenerate (area {a:e})"),
            });
        }
        if a < 0.0 {
            t.vertices.swap(1, 2);
        }
    }

    // Edge-to-triangle incidence.
    let mut edge_tris: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, t) in triangles.iter().enumerate() {
        let [a, b, c] = t.vertices;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            edge_tris.entry((u.min(v), u.max(v))).or_default().push(i);
        }
    }

    let interface_keys: HashSet<(usize, usize)> = raw_interface
        .iter()
        .map(|&[u, v]| (u.min(v), u.max(v)))
        .collect();
    if interface_keys.len() != raw_interface.len() {
        return Err(MeshError::Invariant {
            name: "interface_conformity",
            detail: "duplicate interface edge".into(),
        });
    }

    // Every interface edge must separate exactly one intra and one extra triangle.
    for (i, &[u, v]) in raw_interface.iter().enumerate() {
        let key = (u.min(v), u.max(v));
        let tris = edge_tris.get(&key).map(Vec::as_slice).unwrap_or(&[]);
        let n_intra = tris
            .iter()
            .filter(|&&t| triangles[t].region == Region::Intra)
            .count();
        let n_extra = tris
            .iter()
            .filter(|&&t| triangles[t].region == Region::Extra)
            .count();
        if tris.len() != 2 || n_intra != 1 || n_extra != 1 {
            return Err(MeshError::Invariant {
                name: "interface_conformity",
                detail: format!(
                    "interface edge {i} ({u}, {v}) borders {n_intra} intra and {n_extra} extra triangles (need exactly 1 and 1)"
                ),
            });
        }
    }
    // Completeness: any edge shared by an intra and an extra triangle must be listed.
    for (&(u, v), tris) in &edge_tris {
        if tris.len() == 2 {
            let r0 = triangles[tris[0]].region;
            let r1 = triangles[tris[1]].region;
            if r0 != r1 && !interface_keys.contains(&(u, v)) {
                return Err(MeshError::Invariant {
                    name: "interface_conformity",
                    detail: format!(
                        "region-boundary edge ({u}, {v}) is not listed as an interface edge"
                    ),
                });
            }
        }
    }

    // Interface vertices, circle fit, polar ordering.
    let mut iface_vertex_set: Vec<usize> = raw_interface.iter().flatten().copied().collect();
    iface_vertex_set.sort_unstable();
    iface_vertex_set.dedup();
    if iface_vertex_set.len() < MIN_INTERFACE_NODES {
        return Err(MeshError::TooCoarse {
            found: iface_vertex_set.len(),
        });
    }
    let pts: Vec<(f64, f64)> = iface_vertex_set.iter().map(|&v| vertices[v]).collect();
    let (center, radius) = fit_circle(&pts)?;
    for &v in &iface_vertex_set {
        let (x, y) = vertices[v];
        let d = ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt();
        if (d - radius).abs() > CIRCLE_TOL * radius {
            return Err(MeshError::Invariant {
                name: "interface_on_circle",
                detail: format!(
                    "interface vertex {v} at distance {d} from fitted center (radius {radius}, tol {:e})",
                    CIRCLE_TOL * radius
                ),
            });
        }
    }

    let mut interface_nodes: Vec<InterfaceNode> = iface_vertex_set
        .iter()
        .map(|&v| {
            let (x, y) = vertices[v];
            let mut theta = (y - center.1).atan2(x - center.0);
            // Keep theta in (-pi, pi]: fold the -pi seam onto +pi.
            if theta <= -std::f64::consts::PI + 1e-12 {
                theta += 2.0 * std::f64::consts::PI;
            }
            InterfaceNode { vertex: v, theta }
        })
        .collect();
    interface_nodes.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
    for pair in interface_nodes.windows(2) {
        if pair[1].theta <= pair[0].theta {
            return Err(MeshError::Invariant {
                name: "interface_theta_ordering",
                detail: format!(
                    "interface vertices {} and {} have non-increasing polar angles",
                    pair[0].vertex, pair[1].vertex
                ),
            });
        }
    }

    // Orient interface edges CCW and point normals from intra to extra
    // (radially outward for a cell that is the intra region).
    let interface_edges: Vec<InterfaceEdge> = raw_interface
        .iter()
        .map(|&[u, v]| {
            let (x0, y0) = vertices[u];
            let (x1, y1) = vertices[v];
            // CCW along the circle: the edge direction crossed with the radius
            // vector at the midpoint must be positive.
            let (mx, my) = (0.5 * (x0 + x1) - center.0, 0.5 * (y0 + y1) - center.1);
            let (dx, dy) = (x1 - x0, y1 - y0);
            let ccw = mx * dy - my * dx > 0.0;
            let (a, b) = if ccw { (u, v) } else { (v, u) };
            let (ax, ay) = vertices[a];
            let (bx, by) = vertices[b];
            let (ex, ey) = (bx - ax, by - ay);
            let len = (ex * ex + ey * ey).sqrt();
            // Right-hand normal of a CCW edge points away from the center.
            InterfaceEdge {
                vertices: [a, b],
                normal: (ey / len, -ex / len),
            }
        })
        .collect();
    for (i, e) in interface_edges.iter().enumerate() {
        let (x0, y0) = vertices[e.vertices[0]];
        let (x1, y1) = vertices[e.vertices[1]];
        let (mx, my) = (0.5 * (x0 + x1) - center.0, 0.5 * (y0 + y1) - center.1);
        if e.normal.0 * mx + e.normal.1 * my <= 0.0 {
            return Err(MeshError::Invariant {
                name: "interface_normal_orientation",
                detail: format!("interface edge {i} normal does not point from intra to extra"),
            });
        }
    }

    // Periodic pairing checks: a slave matches its master in the tangential
    // coordinate on the opposite edge, or is a corner mapped to the master corner.
    if outer_bc == OuterBc::Periodic {
        let slaves: HashSet<usize> = periodic_pairs.iter().map(|&(s, _)| s).collect();
        if slaves.len() != periodic_pairs.len() {
            return Err(MeshError::Invariant {
                name: "periodic_pairing",
                detail: "a slave vertex appears in more than one periodic pair".into(),
            });
        }
        for &(s, m) in &periodic_pairs {
            if slaves.contains(&m) {
                return Err(MeshError::Invariant {
                    name: "periodic_pairing",
                    detail: format!("master vertex {m} is itself a slave"),
                });
            }
            let (xs, ys) = vertices[s];
            let (xm, ym) = vertices[m];
            let dx = (xs - xm).abs();
            let dy = (ys - ym).abs();
            let x_pair = dy <= PERIODIC_TOL && dx > PERIODIC_TOL;
            let y_pair = dx <= PERIODIC_TOL && dy > PERIODIC_TOL;
            let corner = dx > PERIODIC_TOL && dy > PERIODIC_TOL;
            if !(x_pair || y_pair || corner) {
                return Err(MeshError::Invariant {
                    name: "periodic_pairing",
                    detail: format!(
                        "slave {s} at ({xs}, {ys}) does not match master {m} at ({xm}, {ym}) in a tangential coordinate"
                    ),
                });
            }
        }
    } else if !periodic_pairs.is_empty() {
        return Err(MeshError::Invariant {
            name: "periodic_pairing",
            detail: "periodic pairs present but outer BC is not periodic".into(),
        });
    }

    // DOF numbering.
    let mut touches_intra = vec![false; nv];
    let mut touches_extra = vec![false; nv];
    for t in &triangles {
        for &v in &t.vertices {
            match t.region {
                Region::Intra => touches_intra[v] = true,
                Region::Extra => touches_extra[v] = true,
            }
        }
    }
    let mut intra = vec![None; nv];
    let mut n_intra = 0;
    for v in 0..nv {
        if touches_intra[v] {
            intra[v] = Some(n_intra);
            n_intra += 1;
        }
    }

    let slave_to_master: HashMap<usize, usize> = periodic_pairs.iter().copied().collect();
    let dirichlet: HashSet<usize> = if outer_bc == OuterBc::DirichletZero {
        boundary_vertices_raw(nv, &triangles, &interface_keys)
            .into_iter()
            .collect()
    } else {
        HashSet::new()
    };

    let mut extra = vec![None; nv];
    let mut n_extra = 0;
    for v in 0..nv {
        if touches_extra[v] && !slave_to_master.contains_key(&v) && !dirichlet.contains(&v) {
            extra[v] = Some(n_extra);
            n_extra += 1;
        }
    }
    // Slaves inherit the master's DOF.
    for (&s, &m) in &slave_to_master {
        if touches_extra[s] {
            extra[s] = extra[m];
            if extra[m].is_none() {
                return Err(MeshError::Invariant {
                    name: "periodic_pairing",
                    detail: format!("slave {s} maps to master {m} which carries no extra DOF"),
                });
            }
        }
    }

    let mut trace = vec![None; nv];
    for (k, node) in interface_nodes.iter().enumerate() {
        trace[node.vertex] = Some(k);
    }
    let n_trace = interface_nodes.len();

    // Interface vertices must carry both potential DOFs.
    for node in &interface_nodes {
        let v = node.vertex;
        if intra[v].is_none() || extra[v].is_none() {
            return Err(MeshError::Invariant {
                name: "interface_dof_duplication",
                detail: format!("interface vertex {v} is missing an intra-side or extra-side DOF"),
            });
        }
    }

    Ok(MeshGeometry {
        vertices,
        triangles,
        interface_edges,
        interface_nodes,
        periodic_pairs,
        dof_map: DofMap {
            intra,
            extra,
            trace,
            n_intra,
            n_extra,
            n_trace,
        },
        outer_bc,
        cell_center: center,
        cell_radius: radius,
    })
}

#[cfg(test)]
mod tests;
