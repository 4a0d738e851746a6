use super::*;
use std::f64::consts::PI;

fn square_spec(h: f64) -> GeometrySpec {
    GeometrySpec::square((0.5, 0.5), 0.25, h, OuterBc::Periodic)
}

#[test]
fn interface_nodes_on_circle() {
    let mesh = generate_mesh(&square_spec(0.05)).unwrap();
    for node in &mesh.interface_nodes {
        let (x, y) = mesh.vertices[node.vertex];
        let d = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
        assert!((d - 0.25).abs() <= 1e-10 * 0.25, "node at distance {d}");
    }
}

#[test]
fn intra_area_matches_disk() {
    let mesh = generate_mesh(&square_spec(0.05)).unwrap();
    let area = mesh.region_area(Region::Intra);
    let exact = PI * 0.25 * 0.25;
    assert!(
        (area - exact).abs() <= 0.02 * exact,
        "intra area {area} vs {exact}"
    );
}

#[test]
fn periodic_pairs_match_tangentially() {
    let mesh = generate_mesh(&square_spec(0.05)).unwrap();
    assert!(!mesh.periodic_pairs.is_empty());
    // Every vertex on the x = 0 edge must have a partner on x = 1 with equal y;
    // corner vertices relate through the shared master corner instead.
    let resolve = |v: usize| -> usize {
        mesh.periodic_pairs
            .iter()
            .find(|&&(s, _)| s == v)
            .map(|&(_, m)| m)
            .unwrap_or(v)
    };
    let on_left: Vec<usize> = (0..mesh.vertices.len())
        .filter(|&v| mesh.vertices[v].0.abs() <= 1e-12)
        .collect();
    assert!(!on_left.is_empty());
    for &v in &on_left {
        let y = mesh.vertices[v].1;
        let partner = (0..mesh.vertices.len()).find(|&u| {
            let (xu, yu) = mesh.vertices[u];
            (xu - 1.0).abs() <= 1e-10 && (yu - y).abs() <= 1e-10
        });
        let partner = partner.expect("left-edge vertex has an x = 1 counterpart");
        let is_corner = y.abs() <= 1e-10 || (y - 1.0).abs() <= 1e-10;
        if is_corner {
            assert_eq!(
                resolve(v),
                resolve(partner),
                "corners must share one master"
            );
        } else {
            let direct = mesh
                .periodic_pairs
                .iter()
                .any(|&(s, m)| s == partner && m == v);
            assert!(direct, "vertex {partner} on x = 1 is not a slave of {v}");
        }
    }
}

#[test]
fn refinement_orders() {
    let hs = [0.1, 0.05, 0.025];
    let mut area_err = Vec::new();
    let mut circ_err = Vec::new();
    for &h in &hs {
        let mesh = generate_mesh(&square_spec(h)).unwrap();
        area_err.push((mesh.region_area(Region::Intra) - PI * 0.0625).abs());
        circ_err.push((mesh.interface_measure() - 2.0 * PI * 0.25).abs());
    }
    for k in 0..2 {
        assert!(area_err[k + 1] < area_err[k], "area error not decreasing");
        assert!(
            circ_err[k + 1] < circ_err[k],
            "circumference error not decreasing"
        );
        let p_area = (area_err[k] / area_err[k + 1]).log2();
        let p_circ = (circ_err[k] / circ_err[k + 1]).log2();
        assert!(p_area >= 1.8, "area order {p_area}");
        assert!(p_circ >= 1.8, "circumference order {p_circ}");
    }
}

#[test]
fn interface_measure_close_to_circumference() {
    let mesh = generate_mesh(&square_spec(0.05)).unwrap();
    let exact = 2.0 * PI * 0.25;
    let len = mesh.interface_measure();
    assert!(len < exact, "polygon length must fall short of the circle");
    assert!((len - exact).abs() <= 0.01 * exact);
}

#[test]
fn theta_ordering_and_gaps() {
    let h = 0.05;
    let mesh = generate_mesh(&square_spec(h)).unwrap();
    let thetas: Vec<f64> = mesh.interface_nodes.iter().map(|n| n.theta).collect();
    for pair in thetas.windows(2) {
        assert!(pair[1] > pair[0]);
    }
    assert!(*thetas.first().unwrap() > -PI);
    assert!(*thetas.last().unwrap() <= PI + 1e-15);
    let max_gap = 3.0 * h / 0.25;
    for pair in thetas.windows(2) {
        assert!(pair[1] - pair[0] <= max_gap);
    }
    let wrap = thetas.first().unwrap() + 2.0 * PI - thetas.last().unwrap();
    assert!(wrap <= max_gap);
}

#[test]
fn dof_map_is_bijective_per_space() {
    let mesh = generate_mesh(&square_spec(0.05)).unwrap();
    let check = |dofs: &[Option<usize>], n: usize, dedup_slaves: bool| {
        let mut seen = vec![false; n];
        for (v, d) in dofs.iter().enumerate() {
            if let Some(d) = *d {
                assert!(d < n, "dof {d} out of range {n}");
                if dedup_slaves && mesh.periodic_pairs.iter().any(|&(s, _)| s == v) {
                    continue;
                }
                assert!(!seen[d], "dof {d} assigned twice");
                seen[d] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "a dof index was skipped");
    };
    check(&mesh.dof_map.intra, mesh.dof_map.n_intra, false);
    check(&mesh.dof_map.extra, mesh.dof_map.n_extra, true);
    check(&mesh.dof_map.trace, mesh.dof_map.n_trace, false);
}

#[test]
fn every_interface_vertex_has_three_dofs() {
    let mesh = generate_mesh(&square_spec(0.1)).unwrap();
    for node in &mesh.interface_nodes {
        let v = node.vertex;
        assert!(mesh.dof_map.intra[v].is_some());
        assert!(mesh.dof_map.extra[v].is_some());
        assert!(mesh.dof_map.trace[v].is_some());
    }
}

#[test]
fn roundtrip_is_identical() {
    for bc in [OuterBc::Periodic, OuterBc::DirichletZero] {
        let mesh = generate_mesh(&GeometrySpec::square((0.5, 0.5), 0.25, 0.1, bc)).unwrap();
        let text = write_mesh(&mesh);
        let back = read_mesh(&text).unwrap();
        assert_eq!(mesh, back);
    }
}

#[test]
fn disk_in_disk_roundtrip() {
    let mesh = generate_mesh(&GeometrySpec::disk_in_disk(0.25, 0.5, 0.05)).unwrap();
    let text = write_mesh(&mesh);
    let back = read_mesh(&text).unwrap();
    assert_eq!(mesh, back);
}

#[test]
fn out_of_range_vertex_is_a_parse_error() {
    let text = "emesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 99 intra\ninterface 0\n";
    match read_mesh(text) {
        Err(MeshError::Parse { line, msg }) => {
            assert_eq!(line, 7);
            assert!(msg.contains("triangle 0"), "message: {msg}");
            assert!(msg.contains("99"), "message: {msg}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn missing_region_tag_is_a_parse_error() {
    let text = "emesh 1\nvertices 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 2\ninterface 0\n";
    match read_mesh(text) {
        Err(MeshError::Parse { msg, .. }) => assert!(msg.contains("region tag missing"), "{msg}"),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn interface_edge_between_two_intra_triangles_is_rejected() {
    let mesh = generate_mesh(&square_spec(0.1)).unwrap();
    let mut bad = mesh.clone();
    // Flip the extra triangle adjacent to the first interface edge.
    let [u, v] = bad.interface_edges[0].vertices;
    let idx = bad
        .triangles
        .iter()
        .position(|t| {
            t.region == Region::Extra && t.vertices.contains(&u) && t.vertices.contains(&v)
        })
        .unwrap();
    bad.triangles[idx].region = Region::Intra;
    let text = write_mesh(&bad);
    match read_mesh(&text) {
        Err(MeshError::Invariant { name, detail }) => {
            assert_eq!(name, "interface_conformity");
            assert!(detail.contains("2 intra"), "detail: {detail}");
        }
        other => panic!("expected invariant violation, got {other:?}"),
    }
}

#[test]
fn too_few_interface_nodes_rejected_on_import() {
    // Hand-built octagonal "cell": 8 interface nodes, below the minimum.
    let mut text = String::from("emesh 1\nvertices 17\n0 0\n");
    for k in 0..8 {
        let th = 2.0 * PI * k as f64 / 8.0;
        text.push_str(&format!("{} {}\n", th.cos(), th.sin()));
    }
    for k in 0..8 {
        let th = 2.0 * PI * k as f64 / 8.0;
        text.push_str(&format!("{} {}\n", 2.0 * th.cos(), 2.0 * th.sin()));
    }
    text.push_str("triangles 24\n");
    for k in 0..8 {
        text.push_str(&format!("0 {} {} intra\n", 1 + k, 1 + (k + 1) % 8));
    }
    for k in 0..8 {
        let (a, b) = (1 + k, 1 + (k + 1) % 8);
        let (c, d) = (9 + (k + 1) % 8, 9 + k);
        text.push_str(&format!("{a} {b} {c} extra\n"));
        text.push_str(&format!("{a} {c} {d} extra\n"));
    }
    text.push_str("interface 8\n");
    for k in 0..8 {
        text.push_str(&format!("{} {}\n", 1 + k, 1 + (k + 1) % 8));
    }
    match read_mesh(&text) {
        Err(MeshError::TooCoarse { found }) => assert_eq!(found, 8),
        other => panic!("expected TooCoarse, got {other:?}"),
    }
}

#[test]
fn cell_touching_boundary_is_infeasible() {
    let spec = GeometrySpec::square((0.5, 0.5), 0.47, 0.05, OuterBc::Periodic);
    match generate_mesh(&spec) {
        Err(MeshError::Infeasible(msg)) => assert!(msg.contains("not separated"), "{msg}"),
        other => panic!("expected Infeasible, got {other:?}"),
    }
}

#[test]
fn refinement_shrinks_circumference_deficit_by_factor_four() {
    let coarse = generate_mesh(&square_spec(0.05)).unwrap();
    let fine = generate_mesh(&square_spec(0.025)).unwrap();
    let exact = 2.0 * PI * 0.25;
    let d0 = exact - coarse.interface_measure();
    let d1 = exact - fine.interface_measure();
    let ratio = d0 / d1;
    assert!(
        (3.2..=4.8).contains(&ratio),
        "deficit ratio {ratio}, expected about 4"
    );
}

#[test]
fn max_edge_below_twice_target_h() {
    for &h in &[0.1, 0.05, 0.025] {
        let mesh = generate_mesh(&square_spec(h)).unwrap();
        let mut max = 0.0f64;
        for t in &mesh.triangles {
            let [a, b, c] = t.vertices;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let (x0, y0) = mesh.vertices[u];
                let (x1, y1) = mesh.vertices[v];
                max = max.max(((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt());
            }
        }
        assert!(max <= 2.0 * h, "h = {h}: max edge {max}");
    }
}

#[test]
fn all_triangles_ccw_and_nondegenerate() {
    let mesh = generate_mesh(&square_spec(0.05)).unwrap();
    for t in &mesh.triangles {
        let a = triangle_area(&mesh.vertices, t.vertices);
        assert!(a > 1e-14, "triangle area {a}");
    }
}
