//! Run manifest: config identity, tool version, mesh statistics, per-phase
//! wall clock and a checksummed inventory of every produced file. Timestamps
//! live here and only here, so data files stay byte-identical across re-runs.

use crate::config::fnv1a64;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub config_hash: u64,
    pub version: String,
    pub mesh_vertices: usize,
    pub mesh_triangles: usize,
    pub mesh_interface_nodes: usize,
    /// (phase name, wall-clock milliseconds)
    pub phases: Vec<(String, f64)>,
    /// (file name, FNV-1a 64 content hash)
    pub files: Vec<(String, u64)>,
}

impl RunManifest {
    pub fn new(config_hash: u64) -> Self {
        RunManifest {
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..Default::default()
        }
    }

    pub fn record_mesh(&mut self, mesh: &crate::mesh::MeshGeometry) {
        self.mesh_vertices = mesh.vertices.len();
        self.mesh_triangles = mesh.triangles.len();
        self.mesh_interface_nodes = mesh.dof_map.n_trace;
    }

    pub fn add_phase(&mut self, name: &str, elapsed: std::time::Duration) {
        self.phases
            .push((name.to_string(), elapsed.as_secs_f64() * 1e3));
    }

    pub fn add_file(&mut self, name: &str, contents: &[u8]) {
        self.files.push((name.to_string(), fnv1a64(contents)));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "electroperm manifest");
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "config_hash = {:016x}", self.config_hash);
        let _ = writeln!(out, "mesh.vertices = {}", self.mesh_vertices);
        let _ = writeln!(out, "mesh.triangles = {}", self.mesh_triangles);
        let _ = writeln!(out, "mesh.interface_nodes = {}", self.mesh_interface_nodes);
        for (name, ms) in &self.phases {
            let _ = writeln!(out, "phase.{name}.ms = {ms:.3}");
        }
        for (name, hash) in &self.files {
            let _ = writeln!(out, "file.{name} = {hash:016x}");
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}
