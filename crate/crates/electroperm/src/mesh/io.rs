//! Plain-text mesh format.
//!
//! ```text
//! emesh 1
//! vertices N
//! x y            (N lines)
//! triangles M
//! v0 v1 v2 region    (M lines, region in {intra, extra})
//! interface K
//! v0 v1          (K lines)
//! periodic P     (optional)
//! slave master   (P lines)
//! ```
//!
//! Whitespace-separated ASCII decimal; `#` starts a comment.

use super::{finalize_mesh, MeshError, MeshGeometry, OuterBc, Region, Triangle};
use std::fmt::Write as _;
use std::path::Path;

pub fn write_mesh(mesh: &MeshGeometry) -> String {
    let mut out = String::new();
    out.push_str("emesh 1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for &(x, y) in &mesh.vertices {
        let _ = writeln!(out, "{x} {y}");
    }
    let _ = writeln!(out, "triangles {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let region = match t.region {
            Region::Intra => "intra",
            Region::Extra => "extra",
        };
        let _ = writeln!(
            out,
            "{} {} {} {region}",
            t.vertices[0], t.vertices[1], t.vertices[2]
        );
    }
    let _ = writeln!(out, "interface {}", mesh.interface_edges.len());
    for e in &mesh.interface_edges {
        let _ = writeln!(out, "{} {}", e.vertices[0], e.vertices[1]);
    }
    if !mesh.periodic_pairs.is_empty() {
        let _ = writeln!(out, "periodic {}", mesh.periodic_pairs.len());
        for &(s, m) in &mesh.periodic_pairs {
            let _ = writeln!(out, "{s} {m}");
        }
    }
    out
}

pub fn import_mesh(path: &Path) -> Result<MeshGeometry, MeshError> {
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_mesh(&text)
}

struct Lines<'a> {
    // (1-based line number, tokens)
    items: std::vec::IntoIter<(usize, Vec<&'a str>)>,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let items: Vec<(usize, Vec<&'a str>)> = text
            .lines()
            .enumerate()
            .filter_map(|(i, line)| {
                let body = line.split('#').next().unwrap_or("");
                let tokens: Vec<&str> = body.split_whitespace().collect();
                if tokens.is_empty() {
                    None
                } else {
                    Some((i + 1, tokens))
                }
            })
            .collect();
        let last_line = items.last().map(|(n, _)| *n).unwrap_or(0);
        Lines {
            items: items.into_iter(),
            last_line,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        self.items.next().ok_or(MeshError::Parse {
            line: self.last_line + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("{what}: `{tok}` is not a non-negative integer"),
    })
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64, MeshError> {
    let v: f64 = tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("{what}: `{tok}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(MeshError::Parse {
            line,
            msg: format!("{what}: `{tok}` is not finite"),
        });
    }
    Ok(v)
}

pub fn read_mesh(text: &str) -> Result<MeshGeometry, MeshError> {
    let mut lines = Lines::new(text);

    let (ln, header) = lines.next("header `emesh 1`")?;
    if header != ["emesh", "1"] {
        return Err(MeshError::Parse {
            line: ln,
            msg: format!("expected header `emesh 1`, found `{}`", header.join(" ")),
        });
    }

    let (ln, toks) = lines.next("`vertices N`")?;
    if toks.len() != 2 || toks[0] != "vertices" {
        return Err(MeshError::Parse {
            line: ln,
            msg: "expected `vertices N`".into(),
        });
    }
    let nv = parse_usize(toks[1], ln, "vertex count")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let (ln, toks) = lines.next("vertex coordinates")?;
        if toks.len() != 2 {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("vertex {i}: expected `x y`, found {} tokens", toks.len()),
            });
        }
        let x = parse_f64(toks[0], ln, "vertex x")?;
        let y = parse_f64(toks[1], ln, "vertex y")?;
        vertices.push((x, y));
    }

    let (ln, toks) = lines.next("`triangles M`")?;
    if toks.len() != 2 || toks[0] != "triangles" {
        return Err(MeshError::Parse {
            line: ln,
            msg: "expected `triangles M`".into(),
        });
    }
    let nt = parse_usize(toks[1], ln, "triangle count")?;
    let mut triangles = Vec::with_capacity(nt);
    for i in 0..nt {
        let (ln, toks) = lines.next("triangle line")?;
        if toks.len() != 4 {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!(
                    "triangle {i}: expected `v0 v1 v2 region`, found {} tokens (region tag missing?)",
                    toks.len()
                ),
            });
        }
        let v0 = parse_usize(toks[0], ln, &format!("triangle {i} vertex"))?;
        let v1 = parse_usize(toks[1], ln, &format!("triangle {i} vertex"))?;
        let v2 = parse_usize(toks[2], ln, &format!("triangle {i} vertex"))?;
        for &v in &[v0, v1, v2] {
            if v >= nv {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("triangle {i} references vertex {v} out of range ({nv} vertices)"),
                });
            }
        }
        let region = match toks[3] {
            "intra" => Region::Intra,
            "extra" => Region::Extra,
            other => {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!(
                        "triangle {i}: unknown region tag `{other}` (expected intra|extra)"
                    ),
                })
            }
        };
        triangles.push(Triangle {
            vertices: [v0, v1, v2],
            region,
        });
    }

    let (ln, toks) = lines.next("`interface K`")?;
    if toks.len() != 2 || toks[0] != "interface" {
        return Err(MeshError::Parse {
            line: ln,
            msg: "expected `interface K`".into(),
        });
    }
    let nk = parse_usize(toks[1], ln, "interface edge count")?;
    let mut raw_interface = Vec::with_capacity(nk);
    for i in 0..nk {
        let (ln, toks) = lines.next("interface edge line")?;
        if toks.len() != 2 {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("interface edge {i}: expected `v0 v1`"),
            });
        }
        let v0 = parse_usize(toks[0], ln, &format!("interface edge {i} vertex"))?;
        let v1 = parse_usize(toks[1], ln, &format!("interface edge {i} vertex"))?;
        for &v in &[v0, v1] {
            if v >= nv {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!(
                        "interface edge {i} references vertex {v} out of range ({nv} vertices)"
                    ),
                });
            }
        }
        raw_interface.push([v0, v1]);
    }

    let mut periodic_pairs = Vec::new();
    if let Some((ln, toks)) = lines.items.next() {
        if toks.len() != 2 || toks[0] != "periodic" {
            return Err(MeshError::Parse {
                line: ln,
                msg: "expected optional `periodic P` section or end of file".into(),
            });
        }
        let np = parse_usize(toks[1], ln, "periodic pair count")?;
        for i in 0..np {
            let (ln, toks) = lines.next("periodic pair line")?;
            if toks.len() != 2 {
                return Err(MeshError::Parse {
                    line: ln,
                    msg: format!("periodic pair {i}: expected `slave master`"),
                });
            }
            let s = parse_usize(toks[0], ln, &format!("periodic pair {i} slave"))?;
            let m = parse_usize(toks[1], ln, &format!("periodic pair {i} master"))?;
            periodic_pairs.push((s, m));
        }
        if let Some((ln, _)) = lines.items.next() {
            return Err(MeshError::Parse {
                line: ln,
                msg: "trailing content after periodic section".into(),
            });
        }
    }

    let outer_bc = if periodic_pairs.is_empty() {
        OuterBc::DirichletZero
    } else {
        OuterBc::Periodic
    };
    finalize_mesh(vertices, triangles, raw_interface, periodic_pairs, outer_bc)
}
