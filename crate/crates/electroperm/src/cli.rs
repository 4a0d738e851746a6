//! Command-line pipeline: mesh generation/validation, ensemble runs, ensemble
//! statistics and the analytic oracles.
//!
//! Exit codes: 0 success, 2 geometry, 3 solver, 4 numerics, 5 data
//! inconsistency, 64 usage.

use crate::config::{Config, ConfigError};
use crate::fem::{assemble, dtn_oracle, FemError};
use crate::manifest::RunManifest;
use crate::membrane::ou_strong_convergence;
use crate::mesh::{generate_mesh, import_mesh, write_mesh, GeometrySpec, MeshError};
use crate::record_io::{
    read_trajectory_csv, write_slope_report, write_snapshots_csv, write_std_decay_csv,
    write_time_avg_csv, write_trajectory_csv,
};
use crate::sim::{run_selected, SimError};
use crate::stats::EnsembleStats;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_GEOMETRY: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_NUMERICS: i32 = 4;
pub const EXIT_DATA: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

const USAGE: &str = "\
usage: electroperm <command> [options]

commands:
  mesh    --config PATH --out FILE [--validate-only]
          generate a mesh from the config geometry, or validate an existing
          mesh file in place (no output is written with --validate-only)
  run     --config PATH --out DIR [--workers N] [--seed S] [--trajectories K]
          run the Monte-Carlo ensemble; one CSV per trajectory plus
          config.resolved and manifest.txt. Completed trajectories found in
          the output directory are kept if their config hash matches.
  stats   RUNDIR [--out DIR]
          compute running time averages, ensemble standard deviations and the
          decay-slope fit from a run directory (default output RUNDIR/stats)
  oracle  dtn [--mode N] [--h H] [--dump FILE] | ou [--levels K]
          compare the solver against the closed-form flux coefficients on
          concentric disks (optionally dumping the dense jump-to-current
          matrix as CSV, one row per interface node), or fit the strong order
          of the jump update on the exactly integrable scalar test

options:
  --workers N   worker threads (default: ELECTROPERM_WORKERS or all cores)
";

struct Args {
    command: String,
    positional: Vec<String>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
    trajectories: Option<usize>,
    validate_only: bool,
    mode: Option<u32>,
    h: Option<f64>,
    levels: Option<usize>,
    dump: Option<PathBuf>,
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("error: {msg}");
    eprint!("{USAGE}");
    EXIT_USAGE
}

fn parse_args(args: &[String]) -> Result<Args, String> {
    let mut it = args.iter();
    let command = it.next().ok_or("missing command")?.clone();
    let mut parsed = Args {
        command,
        positional: Vec::new(),
        config: None,
        out: None,
        workers: None,
        seed: None,
        trajectories: None,
        validate_only: false,
        mode: None,
        h: None,
        levels: None,
        dump: None,
    };
    while let Some(arg) = it.next() {
        let mut take = |name: &str| -> Result<String, String> {
            it.next()
                .map(String::clone)
                .ok_or(format!("{name} expects a value"))
        };
        match arg.as_str() {
            "--config" => parsed.config = Some(PathBuf::from(take("--config")?)),
            "--out" => parsed.out = Some(PathBuf::from(take("--out")?)),
            "--workers" => {
                parsed.workers = Some(
                    take("--workers")?
                        .parse()
                        .map_err(|_| "--workers expects an integer")?,
                )
            }
            "--seed" => {
                parsed.seed = Some(
                    take("--seed")?
                        .parse()
                        .map_err(|_| "--seed expects an integer")?,
                )
            }
            "--trajectories" => {
                parsed.trajectories = Some(
                    take("--trajectories")?
                        .parse()
                        .map_err(|_| "--trajectories expects an integer")?,
                )
            }
            "--validate-only" => parsed.validate_only = true,
            "--mode" => {
                parsed.mode = Some(
                    take("--mode")?
                        .parse()
                        .map_err(|_| "--mode expects a non-negative integer")?,
                )
            }
            "--h" => parsed.h = Some(take("--h")?.parse().map_err(|_| "--h expects a number")?),
            "--levels" => {
                parsed.levels = Some(
                    take("--levels")?
                        .parse()
                        .map_err(|_| "--levels expects an integer")?,
                )
            }
            "--dump" => parsed.dump = Some(PathBuf::from(take("--dump")?)),
            other if other.starts_with("--") => return Err(format!("unknown option {other}")),
            other => parsed.positional.push(other.to_string()),
        }
    }
    Ok(parsed)
}

fn workers_of(args: &Args) -> usize {
    args.workers
        .or_else(|| {
            std::env::var("ELECTROPERM_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(usize::from)
                .unwrap_or(1)
        })
        .max(1)
}

fn mesh_exit(e: &MeshError) -> i32 {
    eprintln!("error: {e}");
    EXIT_GEOMETRY
}

fn fem_exit(e: &FemError) -> i32 {
    eprintln!("error: {e}");
    match e {
        FemError::BadParams(_) | FemError::BadGeometry(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    }
}

fn sim_exit(e: &SimError) -> i32 {
    eprintln!("error: {e}");
    match e {
        SimError::NonFinite { .. } | SimError::PorosityOutOfBox { .. } => EXIT_NUMERICS,
        SimError::Fem(f) => match f {
            FemError::BadParams(_) | FemError::BadGeometry(_) => EXIT_USAGE,
            _ => EXIT_SOLVER,
        },
        SimError::BadData(_) => EXIT_DATA,
        SimError::Noise(_) | SimError::BadConfig(_) => EXIT_USAGE,
    }
}

fn config_exit(e: &ConfigError) -> i32 {
    eprintln!("error: {e}");
    EXIT_USAGE
}

fn load_config(args: &Args) -> Result<Config, i32> {
    let Some(path) = &args.config else {
        return Err(usage_error("--config is required"));
    };
    let mut config = Config::from_file(path).map_err(|e| config_exit(&e))?;
    if let Some(seed) = args.seed {
        config
            .set("mc.base_seed", &seed.to_string())
            .expect("known key");
    }
    if let Some(k) = args.trajectories {
        config
            .set("mc.trajectories", &k.to_string())
            .expect("known key");
    }
    Ok(config)
}

pub fn run(args: Vec<String>) -> i32 {
    let parsed = match parse_args(&args) {
        Ok(p) => p,
        Err(msg) => return usage_error(&msg),
    };
    match parsed.command.as_str() {
        "mesh" => cmd_mesh(&parsed),
        "run" => cmd_run(&parsed),
        "stats" => cmd_stats(&parsed),
        "oracle" => cmd_oracle(&parsed),
        other => usage_error(&format!("unknown command `{other}`")),
    }
}

fn cmd_mesh(args: &Args) -> i32 {
    let Some(out) = &args.out else {
        return usage_error("mesh requires --out FILE");
    };
    if args.validate_only {
        match import_mesh(out) {
            Ok(mesh) => {
                println!(
                    "mesh ok: {} vertices, {} triangles, {} interface nodes, {} periodic pairs",
                    mesh.vertices.len(),
                    mesh.triangles.len(),
                    mesh.dof_map.n_trace,
                    mesh.periodic_pairs.len()
                );
                return EXIT_OK;
            }
            Err(e) => return mesh_exit(&e),
        }
    }
    let config = match load_config(args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let spec: GeometrySpec = match config.geometry() {
        Ok(g) => g,
        Err(e) => return config_exit(&e),
    };
    let mut manifest = RunManifest::new(config.hash());
    let t0 = Instant::now();
    let mesh = match generate_mesh(&spec) {
        Ok(m) => m,
        Err(e) => return mesh_exit(&e),
    };
    manifest.add_phase("generate", t0.elapsed());
    manifest.record_mesh(&mesh);
    let text = write_mesh(&mesh);
    manifest.add_file(
        out.file_name().and_then(|s| s.to_str()).unwrap_or("mesh"),
        text.as_bytes(),
    );
    if let Err(e) = std::fs::write(out, &text) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return EXIT_DATA;
    }
    let manifest_path = out.with_extension("manifest");
    if let Err(e) = manifest.write_to(&manifest_path) {
        eprintln!("error: cannot write {}: {e}", manifest_path.display());
        return EXIT_DATA;
    }
    println!(
        "wrote {} ({} vertices, {} triangles, {} interface nodes)",
        out.display(),
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.dof_map.n_trace
    );
    EXIT_OK
}

fn trajectory_file(dir: &Path, id: usize) -> PathBuf {
    dir.join(format!("trajectory_{id:03}.csv"))
}

fn cmd_run(args: &Args) -> i32 {
    let Some(out_dir) = &args.out else {
        return usage_error("run requires --out DIR");
    };
    let config = match load_config(args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let sim_config = match config.sim_config() {
        Ok(c) => c,
        Err(e) => return config_exit(&e),
    };
    if let Err(e) = sim_config.validate() {
        return sim_exit(&e);
    }
    let hash = config.hash();
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_DATA;
    }

    let mut manifest = RunManifest::new(hash);
    let t0 = Instant::now();
    let mesh = match generate_mesh(&sim_config.geometry) {
        Ok(m) => m,
        Err(e) => return mesh_exit(&e),
    };
    manifest.add_phase("mesh", t0.elapsed());
    manifest.record_mesh(&mesh);
    let t0 = Instant::now();
    let system = match assemble(&mesh, &sim_config.physics) {
        Ok(s) => s,
        Err(e) => return fem_exit(&e),
    };
    manifest.add_phase("assemble", t0.elapsed());

    // Restart scan: completed trajectories with a matching hash are kept.
    let expected_rows = sim_config.n_steps() + 1;
    let mut to_run = Vec::new();
    for id in 0..sim_config.n_trajectories {
        let path = trajectory_file(out_dir, id);
        if path.exists() {
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return EXIT_DATA;
                }
            };
            match read_trajectory_csv(&text) {
                Ok((rec, file_hash)) => {
                    if file_hash != hash {
                        eprintln!(
                            "error: {} was produced under config hash {file_hash:016x}, current config hashes to {hash:016x}",
                            path.display()
                        );
                        return EXIT_DATA;
                    }
                    if rec.times.len() == expected_rows {
                        continue; // complete, keep it
                    }
                    to_run.push(id); // incomplete checkpoint, redo
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_DATA;
                }
            }
        } else {
            to_run.push(id);
        }
    }

    let workers = workers_of(args);
    let t0 = Instant::now();
    let results = run_selected(&sim_config, &mesh, &system, &to_run, workers);
    manifest.add_phase("trajectories", t0.elapsed());

    let mut failures: Vec<(usize, SimError)> = Vec::new();
    for (id, result) in results {
        match result {
            Ok(rec) => {
                let text = write_trajectory_csv(&rec, hash);
                let path = trajectory_file(out_dir, id);
                manifest.add_file(
                    path.file_name().and_then(|s| s.to_str()).unwrap_or(""),
                    text.as_bytes(),
                );
                if let Err(e) = std::fs::write(&path, &text) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return EXIT_DATA;
                }
                if let Some(snap) = &rec.snapshots {
                    let stext = write_snapshots_csv(snap);
                    let spath = out_dir.join(format!("trajectory_{id:03}_snapshots.csv"));
                    manifest.add_file(
                        spath.file_name().and_then(|s| s.to_str()).unwrap_or(""),
                        stext.as_bytes(),
                    );
                    if let Err(e) = std::fs::write(&spath, &stext) {
                        eprintln!("error: cannot write {}: {e}", spath.display());
                        return EXIT_DATA;
                    }
                }
            }
            Err(e) => {
                eprintln!("trajectory {id} failed: {e}");
                failures.push((id, e));
            }
        }
    }

    let resolved = format!("# config_hash {hash:016x}\n{}", config.canonical());
    manifest.add_file("config.resolved", resolved.as_bytes());
    if let Err(e) = std::fs::write(out_dir.join("config.resolved"), &resolved) {
        eprintln!("error: cannot write config.resolved: {e}");
        return EXIT_DATA;
    }
    if let Err(e) = manifest.write_to(&out_dir.join("manifest.txt")) {
        eprintln!("error: cannot write manifest.txt: {e}");
        return EXIT_DATA;
    }

    if let Some((_, first)) = failures.first() {
        eprintln!(
            "{} of {} trajectories failed; completed results are on disk",
            failures.len(),
            sim_config.n_trajectories
        );
        return sim_exit(first);
    }
    println!(
        "run complete: {} trajectories in {}",
        sim_config.n_trajectories,
        out_dir.display()
    );
    EXIT_OK
}

fn cmd_stats(args: &Args) -> i32 {
    let Some(run_dir) = args.positional.first().map(PathBuf::from) else {
        return usage_error("stats requires a RUNDIR argument");
    };
    let out_dir = args.out.clone().unwrap_or_else(|| run_dir.join("stats"));
    let resolved_path = run_dir.join("config.resolved");
    let resolved = match std::fs::read_to_string(&resolved_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", resolved_path.display());
            return EXIT_DATA;
        }
    };
    let stored_hash = resolved
        .lines()
        .find_map(|l| l.strip_prefix("# config_hash "))
        .and_then(|h| u64::from_str_radix(h.trim(), 16).ok());
    let Some(stored_hash) = stored_hash else {
        eprintln!("error: {} carries no config hash", resolved_path.display());
        return EXIT_DATA;
    };
    let config = match Config::parse(&resolved) {
        Ok(c) => c,
        Err(e) => return config_exit(&e),
    };
    let t_burn_in: f64 = match config.get("time.t_burn_in").parse() {
        Ok(v) => v,
        Err(_) => {
            eprintln!("error: config.resolved has a malformed time.t_burn_in");
            return EXIT_DATA;
        }
    };

    // Collect trajectory files in id order.
    let mut records = Vec::new();
    let mut entries: Vec<PathBuf> = match std::fs::read_dir(&run_dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|s| s.to_str())
                    .map(|s| {
                        s.starts_with("trajectory_")
                            && s.ends_with(".csv")
                            && !s.contains("snapshots")
                    })
                    .unwrap_or(false)
            })
            .collect(),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", run_dir.display());
            return EXIT_DATA;
        }
    };
    entries.sort();
    if entries.is_empty() {
        eprintln!("error: {} contains no trajectory CSVs", run_dir.display());
        return EXIT_DATA;
    }
    for path in &entries {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return EXIT_DATA;
            }
        };
        match read_trajectory_csv(&text) {
            Ok((rec, file_hash)) => {
                if file_hash != stored_hash {
                    eprintln!(
                        "error: {} carries config hash {file_hash:016x}, run is {stored_hash:016x}",
                        path.display()
                    );
                    return EXIT_DATA;
                }
                records.push(rec);
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_DATA;
            }
        }
    }
    let times = records[0].times.clone();
    for rec in &records[1..] {
        if rec.times != times {
            eprintln!(
                "error: trajectory {} uses a different time grid",
                rec.trajectory_id
            );
            return EXIT_DATA;
        }
    }

    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return EXIT_DATA;
    }
    let ids: Vec<usize> = records.iter().map(|r| r.trajectory_id).collect();
    let series_v: Vec<Vec<f64>> = records.iter().map(|r| r.norm_v_sq.clone()).collect();
    let series_w: Vec<Vec<f64>> = records.iter().map(|r| r.norm_w_sq.clone()).collect();

    let write = |name: &str, text: &str| -> Result<(), i32> {
        std::fs::write(out_dir.join(name), text).map_err(|e| {
            eprintln!("error: cannot write {name}: {e}");
            EXIT_DATA
        })
    };

    if records.len() >= 2 {
        let stats_v = match EnsembleStats::compute(&times, &series_v, t_burn_in) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_DATA;
            }
        };
        // Only running averages are reported for w; the deviation-decay
        // diagnostics concern the jump.
        let avg_w: Result<Vec<Vec<f64>>, _> = series_w
            .iter()
            .map(|s| crate::stats::running_time_average(&times, s, t_burn_in, &stats_v.t_grid))
            .collect();
        let avg_w = match avg_w {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_DATA;
            }
        };
        let mut w_text = String::from("t");
        for id in &ids {
            w_text.push_str(&format!(",traj_{id:03}"));
        }
        w_text.push('\n');
        for k in 0..stats_v.t_grid.len() {
            w_text.push_str(&format!("{}", stats_v.t_grid[k]));
            for row in &avg_w {
                w_text.push_str(&format!(",{}", row[k]));
            }
            w_text.push('\n');
        }
        for (name, text) in [
            ("time_avg_v.csv", write_time_avg_csv(&stats_v, &ids)),
            ("time_avg_w.csv", w_text),
            ("std_decay.csv", write_std_decay_csv(&stats_v)),
            (
                "slope.txt",
                write_slope_report(&stats_v, "time_avg_norm_v_sq"),
            ),
        ] {
            if let Err(code) = write(name, &text) {
                return code;
            }
        }
        match stats_v.slope_fit {
            Some(fit) => println!(
                "stats written to {} (slope {:.4}, r^2 {:.4})",
                out_dir.display(),
                fit.slope,
                fit.r_squared
            ),
            None => println!(
                "stats written to {} (deviation degenerate, no slope fit)",
                out_dir.display()
            ),
        }
    } else {
        // A single trajectory still gets its running time averages.
        let start = 1.1 * t_burn_in;
        let grid: Vec<f64> = times.iter().copied().filter(|&t| t >= start).collect();
        let avg_v = match crate::stats::running_time_average(&times, &series_v[0], t_burn_in, &grid)
        {
            Ok(a) => a,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_DATA;
            }
        };
        let avg_w = crate::stats::running_time_average(&times, &series_w[0], t_burn_in, &grid)
            .expect("same grid as v");
        let mut v_text = String::from("t,traj_000\n");
        let mut w_text = String::from("t,traj_000\n");
        for k in 0..grid.len() {
            v_text.push_str(&format!("{},{}\n", grid[k], avg_v[k]));
            w_text.push_str(&format!("{},{}\n", grid[k], avg_w[k]));
        }
        if let Err(code) = write("time_avg_v.csv", &v_text) {
            return code;
        }
        if let Err(code) = write("time_avg_w.csv", &w_text) {
            return code;
        }
        println!(
            "stats written to {} (single trajectory, no ensemble deviation)",
            out_dir.display()
        );
    }
    EXIT_OK
}

fn cmd_oracle(args: &Args) -> i32 {
    match args.positional.first().map(String::as_str) {
        Some("dtn") => {
            let mode = args.mode.unwrap_or(1);
            if mode > 8 {
                return usage_error("--mode must be between 0 and 8");
            }
            let h = args.h.unwrap_or(0.05);
            if !(h > 0.0 && h <= 0.1) {
                return usage_error("--h must lie in (0, 0.1]");
            }
            let (r1, r2) = (0.25, 0.5);
            let spec = GeometrySpec::disk_in_disk(r1, r2, h);
            let mesh = match generate_mesh(&spec) {
                Ok(m) => m,
                Err(e) => return mesh_exit(&e),
            };
            let params = crate::fem::PhysParams::reference(0.0);
            let system = match assemble(&mesh, &params) {
                Ok(s) => s,
                Err(e) => return fem_exit(&e),
            };
            let fem_value = match system.flux_coefficient(mode) {
                Ok(v) => v,
                Err(e) => return fem_exit(&e),
            };
            if let Some(dump) = &args.dump {
                // Dense jump-to-current matrix, one row per interface node.
                let matrix = match system.dtn_matrix() {
                    Ok(m) => m,
                    Err(e) => return fem_exit(&e),
                };
                let mut text = String::new();
                for row in &matrix {
                    let fields: Vec<String> = row.iter().map(f64::to_string).collect();
                    text.push_str(&fields.join(","));
                    text.push('\n');
                }
                if let Err(e) = std::fs::write(dump, text) {
                    eprintln!("error: cannot write {}: {e}", dump.display());
                    return EXIT_DATA;
                }
                println!(
                    "wrote jump-to-current matrix ({0} x {0}) to {1}",
                    matrix.len(),
                    dump.display()
                );
            }
            let exact = dtn_oracle(r1, r2, params.sigma_i, params.sigma_e, mode)
                .expect("valid oracle geometry");
            println!("mode n = {mode} on concentric disks r1 = {r1}, r2 = {r2}, h = {h}");
            println!("closed-form lambda_n = {exact}");
            println!("solver lambda_n      = {fem_value}");
            if mode == 0 {
                println!("absolute error       = {:e}", fem_value.abs());
                if fem_value.abs() <= 1e-8 {
                    println!("PASS (|lambda_0| <= 1e-8)");
                    EXIT_OK
                } else {
                    println!("FAIL (|lambda_0| > 1e-8)");
                    EXIT_NUMERICS
                }
            } else {
                let rel = (fem_value - exact).abs() / exact;
                println!("relative error       = {rel:.6}");
                if rel <= 0.05 {
                    println!("PASS (relative error <= 5%)");
                    EXIT_OK
                } else {
                    println!("FAIL (relative error > 5%)");
                    EXIT_NUMERICS
                }
            }
        }
        Some("ou") => {
            let levels = args.levels.unwrap_or(4);
            if !(2..=8).contains(&levels) {
                return usage_error("--levels must be between 2 and 8");
            }
            let report = match ou_strong_convergence(levels, 200, 1234) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_NUMERICS;
                }
            };
            println!("strong error of the jump update against the exact integrator, T = 1");
            println!("{:>12} {:>14}", "dt", "rms error");
            for (dt, err) in report.dts.iter().zip(&report.errors) {
                println!("{dt:>12.6} {err:>14.6e}");
            }
            println!("fitted strong order = {:.4}", report.order);
            if report.order >= 0.8 {
                println!("PASS (order >= 0.8)");
                EXIT_OK
            } else {
                println!("FAIL (order < 0.8)");
                EXIT_NUMERICS
            }
        }
        Some(other) => usage_error(&format!("unknown oracle `{other}` (expected dtn|ou)")),
        None => usage_error("oracle requires a kind: dtn or ou"),
    }
}
