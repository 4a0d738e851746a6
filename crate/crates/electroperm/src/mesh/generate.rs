//! Structured boundary-fitted generator: polar fan inside the cell, a circular
//! annulus of split quadrilaterals around the interface, and rings blended from
//! the annulus out to the square (or outer circle) boundary.
//!
//! All rings share one set of spoke angles, so interface vertices land exactly
//! on the circle and opposite square-boundary vertices match exactly under the
//! periodic identification.

use super::{
    finalize_mesh, GeometrySpec, MeshError, MeshGeometry, OuterBc, OuterShape, Region, Triangle,
};
use std::f64::consts::PI;

/// Number of spokes: a power-of-two multiple of 16 so that halving `target_h`
/// exactly doubles the angular resolution (clean refinement ratios) and the
/// four diagonal spokes hit the square corners exactly.
fn spoke_count(spec: &GeometrySpec) -> usize {
    let h = spec.target_h;
    let outer_perimeter = match spec.outer_shape {
        OuterShape::Square => 4.0 * spec.domain_side,
        OuterShape::Disk { radius } => 2.0 * PI * radius,
    };
    let raw = (outer_perimeter / (1.6 * h))
        .max(2.0 * PI * spec.cell_radius / (1.5 * h))
        .max(16.0);
    let k = (raw / 16.0).log2().ceil().max(0.0) as u32;
    16usize << k
}

/// Point on the outer boundary for spoke `k`, parameterised by equal arc length
/// per spoke so boundary edges stay uniform. Spoke angles are
/// `theta_k = -pi + 2 pi (k + 1) / n`; the diagonal spokes map to the corners.
fn outer_point(spec: &GeometrySpec, n: usize, k: usize) -> (f64, f64) {
    match spec.outer_shape {
        OuterShape::Disk { radius } => {
            let theta = theta_of(n, k);
            (
                spec.cell_center.0 + radius * theta.cos(),
                spec.cell_center.1 + radius * theta.sin(),
            )
        }
        OuterShape::Square => {
            let s = spec.domain_side;
            // Fraction through the full angle sweep, from -pi.
            // Each quarter [-pi..-pi/2..0..pi/2..pi] covers one boundary piece
            // anchored so that theta = -3pi/4, -pi/4, pi/4, 3pi/4 are corners.
            let theta = theta_of(n, k);
            // Position along the edge containing this spoke.
            if theta > -3.0 * PI / 4.0 && theta <= -PI / 4.0 {
                // bottom edge: from (0,0) at -3pi/4 to (s,0) at -pi/4
                let f = (theta + 3.0 * PI / 4.0) / (PI / 2.0);
                (s * f, 0.0)
            } else if theta > -PI / 4.0 && theta <= PI / 4.0 {
                // right edge: from (s,0) to (s,s)
                let f = (theta + PI / 4.0) / (PI / 2.0);
                (s, s * f)
            } else if theta > PI / 4.0 && theta <= 3.0 * PI / 4.0 {
                // top edge: from (s,s) to (0,s)
                let f = (theta - PI / 4.0) / (PI / 2.0);
                (s * (1.0 - f), s)
            } else {
                // left edge: from (0,s) at 3pi/4 to (0,0) at 5pi/4 == -3pi/4
                let theta = if theta <= 0.0 {
                    theta + 2.0 * PI
                } else {
                    theta
                };
                let f = (theta - 3.0 * PI / 4.0) / (PI / 2.0);
                (0.0, s * (1.0 - f))
            }
        }
    }
}

fn theta_of(n: usize, k: usize) -> f64 {
    -PI + 2.0 * PI * (k as f64 + 1.0) / n as f64
}

pub fn generate_mesh(spec: &GeometrySpec) -> Result<MeshGeometry, MeshError> {
    spec.validate()?;
    let h = spec.target_h;
    let r = spec.cell_radius;
    let (cx, cy) = spec.cell_center;
    if h > r {
        return Err(MeshError::Infeasible(format!(
            "target_h = {h} exceeds cell_radius = {r}; the cell cannot be resolved"
        )));
    }

    let n = spoke_count(spec);
    let thetas: Vec<f64> = (0..n).map(|k| theta_of(n, k)).collect();
    let ring_pt = |rad: f64, k: usize| (cx + rad * thetas[k].cos(), cy + rad * thetas[k].sin());

    let mut vertices: Vec<(f64, f64)> = Vec::new();
    let mut triangles: Vec<Triangle> = Vec::new();

    // --- Intra: center point plus m_in polar rings, outermost on the circle.
    let m_in = ((r / h).ceil() as usize).max(2);
    let center_idx = vertices.len();
    vertices.push((cx, cy));
    let mut ring_start = Vec::with_capacity(m_in);
    for j in 1..=m_in {
        let rad = r * j as f64 / m_in as f64;
        ring_start.push(vertices.len());
        for k in 0..n {
            vertices.push(ring_pt(rad, k));
        }
    }
    // Fan around the center.
    for k in 0..n {
        let a = ring_start[0] + k;
        let b = ring_start[0] + (k + 1) % n;
        triangles.push(Triangle {
            vertices: [center_idx, a, b],
            region: Region::Intra,
        });
    }
    // Quad rings inside the cell.
    for j in 0..m_in - 1 {
        push_quad_ring(
            &mut triangles,
            &vertices,
            ring_start[j],
            ring_start[j + 1],
            n,
            Region::Intra,
        );
    }
    let gamma_start = ring_start[m_in - 1];

    // --- Circular annulus hugging the interface from outside.
    let clearance = match spec.outer_shape {
        OuterShape::Square => {
            let s = spec.domain_side;
            (cx - r).min(s - cx - r).min(cy - r).min(s - cy - r)
        }
        OuterShape::Disk { radius } => radius - ((cx * cx + cy * cy).sqrt() + r),
    };
    let annulus_w = h.min(0.5 * clearance);
    let annulus_start = vertices.len();
    for k in 0..n {
        vertices.push(ring_pt(r + annulus_w, k));
    }
    push_quad_ring(
        &mut triangles,
        &vertices,
        gamma_start,
        annulus_start,
        n,
        Region::Extra,
    );

    // --- Blend rings from the annulus out to the outer boundary.
    let outer: Vec<(f64, f64)> = (0..n).map(|k| outer_point(spec, n, k)).collect();
    let max_gap = (0..n)
        .map(|k| {
            let (ax, ay) = vertices[annulus_start + k];
            let (bx, by) = outer[k];
            ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt()
        })
        .fold(0.0f64, f64::max);
    let m_out = ((max_gap / h).ceil() as usize).max(1);
    let mut prev_start = annulus_start;
    for j in 1..=m_out {
        let s = j as f64 / m_out as f64;
        let this_start = vertices.len();
        for k in 0..n {
            let (ax, ay) = vertices[annulus_start + k];
            let (bx, by) = outer[k];
            vertices.push((ax + s * (bx - ax), ay + s * (by - ay)));
        }
        push_quad_ring(
            &mut triangles,
            &vertices,
            prev_start,
            this_start,
            n,
            Region::Extra,
        );
        prev_start = this_start;
    }
    let boundary_start = prev_start;

    // --- Interface edges: consecutive vertices of the circle ring.
    let raw_interface: Vec<[usize; 2]> = (0..n)
        .map(|k| [gamma_start + k, gamma_start + (k + 1) % n])
        .collect();

    // --- Periodic pairing on the square boundary.
    let mut periodic_pairs = Vec::new();
    if spec.outer_bc == OuterBc::Periodic {
        if spec.outer_shape != OuterShape::Square {
            return Err(MeshError::Infeasible(
                "periodic boundary conditions require a square outer boundary".into(),
            ));
        }
        // Spoke indices of the four corners.
        let corner = |frac: f64| -> usize {
            // theta = -pi + 2 pi (k+1)/n  =>  k = (theta + pi) n / (2 pi) - 1
            let kf = (frac + 1.0) * n as f64 / 2.0 - 1.0;
            kf.round() as usize
        };
        let k_br = corner(-0.25); // (s, 0), theta = -pi/4
        let k_tr = corner(0.25); // (s, s), theta = pi/4
        let k_tl = corner(0.75); // (0, s), theta = 3pi/4
        let k_bl = corner(-0.75); // (0, 0), theta = -3pi/4
        let master_corner = boundary_start + k_bl;
        for &k in &[k_br, k_tr, k_tl] {
            periodic_pairs.push((boundary_start + k, master_corner));
        }
        // Right edge interior -> left edge: reflection theta -> pi - theta.
        for k in (k_br + 1)..k_tr {
            let km = (3 * n / 2).checked_sub(k + 2).expect("spoke index") % n;
            periodic_pairs.push((boundary_start + k, boundary_start + km));
        }
        // Top edge interior -> bottom edge: reflection theta -> -theta.
        for k in (k_tr + 1)..k_tl {
            let km = (2 * n - k - 2) % n;
            periodic_pairs.push((boundary_start + k, boundary_start + km));
        }
    }

    let mesh = finalize_mesh(
        vertices,
        triangles,
        raw_interface,
        periodic_pairs,
        spec.outer_bc,
    )?;

    // Post-conditions the structured construction is supposed to guarantee.
    let max_edge = max_edge_length(&mesh);
    if max_edge > 2.0 * h {
        return Err(MeshError::Invariant {
            name: "max_edge_length",
            detail: format!("max edge {max_edge} exceeds 2 * target_h = {}", 2.0 * h),
        });
    }
    Ok(mesh)
}

fn max_edge_length(mesh: &MeshGeometry) -> f64 {
    let mut max = 0.0f64;
    for t in &mesh.triangles {
        let [a, b, c] = t.vertices;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let (x0, y0) = mesh.vertices[u];
            let (x1, y1) = mesh.vertices[v];
            max = max.max(((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt());
        }
    }
    max
}

/// Two triangles per quad, split along the shorter diagonal.
fn push_quad_ring(
    triangles: &mut Vec<Triangle>,
    vertices: &[(f64, f64)],
    inner_start: usize,
    outer_start: usize,
    n: usize,
    region: Region,
) {
    let d2 = |u: usize, v: usize| {
        let (x0, y0) = vertices[u];
        let (x1, y1) = vertices[v];
        (x1 - x0).powi(2) + (y1 - y0).powi(2)
    };
    for k in 0..n {
        let k1 = (k + 1) % n;
        let a = inner_start + k;
        let b = inner_start + k1;
        let c = outer_start + k1;
        let d = outer_start + k;
        if d2(a, c) <= d2(b, d) {
            triangles.push(Triangle {
                vertices: [a, b, c],
                region,
            });
            triangles.push(Triangle {
                vertices: [a, c, d],
                region,
            });
        } else {
            triangles.push(Triangle {
                vertices: [a, b, d],
                region,
            });
            triangles.push(Triangle {
                vertices: [b, c, d],
                region,
            });
        }
    }
}
