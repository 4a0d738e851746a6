//! Flat key-value run configuration.
//!
//! A config file is a list of `section.key = value` lines with `#` comments.
//! Every physical coefficient maps to a documented key with the reference
//! dimensionless values as defaults, so a preset only states what it changes.
//! The canonical serialization (sorted keys, shortest float form) is what the
//! run hash is computed from; command-line overrides are applied before
//! hashing.

use crate::fem::{GWaveform, PhysParams};
use crate::membrane::TauConvention;
use crate::mesh::{GeometrySpec, OuterBc, OuterShape};
use crate::noise::ModeMap;
use crate::sim::{NoiseSpec, NoiseSpecKind, RecordSpec, SimConfig};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {msg}")]
    BadValue { key: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// FNV-1a 64-bit hash; used for config identity and file checksums.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Directory resolved-relative paths are anchored at.
    base_dir: PathBuf,
}

const KEYS: &[(&str, &str)] = &[
    ("geometry.domain_side", "1.0"),
    ("geometry.cell_center_x", "0.5"),
    ("geometry.cell_center_y", "0.5"),
    ("geometry.cell_radius", "0.25"),
    ("geometry.target_h", "0.02"),
    ("geometry.outer_bc", "periodic"),
    ("geometry.outer_shape", "square"),
    ("physics.sigma_i", "0.239"),
    ("physics.sigma_e", "2.632"),
    ("physics.c_m", "1.0"),
    ("physics.s0", "1.0"),
    ("physics.s1", "10001.0"),
    ("physics.tau_ep", "1.0"),
    ("physics.tau_res", "10.0"),
    ("physics.k_ep", "40.0"),
    ("physics.v_th", "2.5"),
    ("physics.g_amplitude", "0.0"),
    ("physics.g_waveform", "constant"),
    ("time.dt", "0.01"),
    ("time.t_final", "300.0"),
    ("time.t_burn_in", "30.0"),
    ("noise.kind", "additive"),
    ("noise.alpha", "0.5"),
    ("noise.fine_substeps", "16"),
    ("noise.kl_file", ""),
    ("noise.kl_eigenvalues", ""),
    ("noise.kl_maps", ""),
    ("noise.profile_file", ""),
    ("mc.trajectories", "50"),
    ("mc.base_seed", "42"),
    ("record.angles", "3.141592653589793"),
    ("record.norms", "true"),
    ("record.snapshot_stride", "0"),
    ("sim.tau_convention", "rate"),
];

impl Default for Config {
    fn default() -> Self {
        Config {
            values: KEYS
                .iter()
                .map(|&(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut config = Config::parse(&text)?;
        config.base_dir = base_dir;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut config = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Parse {
                    line: i + 1,
                    msg: format!("expected `key = value`, found `{line}`"),
                });
            };
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !self.values.contains_key(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn f64_of(&self, key: &str) -> Result<f64, ConfigError> {
        self.get(key).parse().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            msg: format!("`{}` is not a number", self.get(key)),
        })
    }

    fn u64_of(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key).parse().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            msg: format!("`{}` is not a non-negative integer", self.get(key)),
        })
    }

    fn bool_of(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(ConfigError::BadValue {
                key: key.into(),
                msg: format!("`{other}` is not true|false"),
            }),
        }
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.get(key);
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    msg: format!("`{s}` is not a number"),
                })
            })
            .collect()
    }

    /// Canonical serialization: every key, sorted, one per line.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        // Referenced data files are part of the run identity; the hash lines
        // are comments so the canonical form stays parseable.
        for key in ["noise.kl_file", "noise.profile_file"] {
            let path = self.get(key);
            if !path.is_empty() {
                if let Ok(bytes) = std::fs::read(self.resolve(path)) {
                    let _ = writeln!(out, "# {key}.content_hash = {:016x}", fnv1a64(&bytes));
                }
            }
        }
        out
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn geometry(&self) -> Result<GeometrySpec, ConfigError> {
        let outer_bc = match self.get("geometry.outer_bc") {
            "periodic" => OuterBc::Periodic,
            "dirichlet_zero" => OuterBc::DirichletZero,
            other => {
                return Err(ConfigError::BadValue {
                    key: "geometry.outer_bc".into(),
                    msg: format!("`{other}` is not periodic|dirichlet_zero"),
                })
            }
        };
        let outer_shape = match self.get("geometry.outer_shape") {
            "square" => OuterShape::Square,
            other => match other
                .strip_prefix("disk:")
                .and_then(|r| r.parse::<f64>().ok())
            {
                Some(radius) => OuterShape::Disk { radius },
                None => {
                    return Err(ConfigError::BadValue {
                        key: "geometry.outer_shape".into(),
                        msg: format!("`{other}` is not square|disk:<radius>"),
                    })
                }
            },
        };
        Ok(GeometrySpec {
            domain_side: self.f64_of("geometry.domain_side")?,
            cell_center: (
                self.f64_of("geometry.cell_center_x")?,
                self.f64_of("geometry.cell_center_y")?,
            ),
            cell_radius: self.f64_of("geometry.cell_radius")?,
            target_h: self.f64_of("geometry.target_h")?,
            outer_bc,
            outer_shape,
        })
    }

    pub fn physics(&self) -> Result<PhysParams, ConfigError> {
        let g_waveform = match self.get("physics.g_waveform") {
            "constant" => GWaveform::Constant,
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts.as_slice() {
                    ["pulse", on, off] => match (on.parse(), off.parse()) {
                        (Ok(t_on), Ok(t_off)) => GWaveform::Pulse { t_on, t_off },
                        _ => {
                            return Err(ConfigError::BadValue {
                                key: "physics.g_waveform".into(),
                                msg: format!("`{other}` is not constant|pulse:<t_on>:<t_off>"),
                            })
                        }
                    },
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "physics.g_waveform".into(),
                            msg: format!("`{other}` is not constant|pulse:<t_on>:<t_off>"),
                        })
                    }
                }
            }
        };
        Ok(PhysParams {
            sigma_i: self.f64_of("physics.sigma_i")?,
            sigma_e: self.f64_of("physics.sigma_e")?,
            c_m: self.f64_of("physics.c_m")?,
            s0: self.f64_of("physics.s0")?,
            s1: self.f64_of("physics.s1")?,
            tau_ep: self.f64_of("physics.tau_ep")?,
            tau_res: self.f64_of("physics.tau_res")?,
            k_ep: self.f64_of("physics.k_ep")?,
            v_th: self.f64_of("physics.v_th")?,
            g_amplitude: self.f64_of("physics.g_amplitude")?,
            g_waveform,
        })
    }

    fn noise(&self) -> Result<NoiseSpec, ConfigError> {
        let fine_substeps = self.u64_of("noise.fine_substeps")? as u32;
        let kind = match self.get("noise.kind") {
            "additive" => {
                let profile_file = self.get("noise.profile_file");
                let profile = if profile_file.is_empty() {
                    None
                } else {
                    let path = self.resolve(profile_file);
                    let text =
                        std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                            path: path.display().to_string(),
                            source,
                        })?;
                    let vals: Result<Vec<f64>, _> = text
                        .lines()
                        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
                        .map(|l| l.trim().parse::<f64>())
                        .collect();
                    Some(vals.map_err(|_| ConfigError::BadValue {
                        key: "noise.profile_file".into(),
                        msg: "profile file must hold one number per line".into(),
                    })?)
                };
                NoiseSpecKind::Additive {
                    alpha: self.f64_of("noise.alpha")?,
                    profile,
                }
            }
            "linear_multiplicative" => NoiseSpecKind::LinearMultiplicative {
                alpha: self.f64_of("noise.alpha")?,
            },
            "truncated_kl" => {
                let eigenvalues = self.f64_list("noise.kl_eigenvalues")?;
                let maps: Result<Vec<ModeMap>, ConfigError> = self
                    .get("noise.kl_maps")
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| match s.trim() {
                        "additive" => Ok(ModeMap::Additive),
                        "multiplicative" => Ok(ModeMap::Multiplicative),
                        other => Err(ConfigError::BadValue {
                            key: "noise.kl_maps".into(),
                            msg: format!("`{other}` is not additive|multiplicative"),
                        }),
                    })
                    .collect();
                let maps = maps?;
                let file = self.get("noise.kl_file");
                if file.is_empty() {
                    return Err(ConfigError::BadValue {
                        key: "noise.kl_file".into(),
                        msg: "truncated_kl requires a mode data file".into(),
                    });
                }
                let path = self.resolve(file);
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                // One row per interface node, one column per mode.
                let mut rows: Vec<Vec<f64>> = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let row: Result<Vec<f64>, _> =
                        line.split(',').map(|s| s.trim().parse::<f64>()).collect();
                    rows.push(row.map_err(|_| ConfigError::BadValue {
                        key: "noise.kl_file".into(),
                        msg: format!("line {}: non-numeric field", i + 1),
                    })?);
                }
                let n_modes = rows.first().map(Vec::len).unwrap_or(0);
                if n_modes == 0 || rows.iter().any(|r| r.len() != n_modes) {
                    return Err(ConfigError::BadValue {
                        key: "noise.kl_file".into(),
                        msg: "mode file must be rectangular with at least one column".into(),
                    });
                }
                if eigenvalues.len() != n_modes || maps.len() != n_modes {
                    return Err(ConfigError::BadValue {
                        key: "noise.kl_eigenvalues".into(),
                        msg: format!(
                            "mode file has {n_modes} columns but {} eigenvalues and {} maps given",
                            eigenvalues.len(),
                            maps.len()
                        ),
                    });
                }
                let values: Vec<Vec<f64>> = (0..n_modes)
                    .map(|k| rows.iter().map(|r| r[k]).collect())
                    .collect();
                NoiseSpecKind::TruncatedKl {
                    eigenvalues,
                    values,
                    maps,
                }
            }
            other => {
                return Err(ConfigError::BadValue {
                    key: "noise.kind".into(),
                    msg: format!("`{other}` is not additive|linear_multiplicative|truncated_kl"),
                })
            }
        };
        Ok(NoiseSpec {
            kind,
            fine_substeps,
        })
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let tau_convention = match self.get("sim.tau_convention") {
            "rate" => TauConvention::Rate,
            "literal" => TauConvention::Literal,
            other => {
                return Err(ConfigError::BadValue {
                    key: "sim.tau_convention".into(),
                    msg: format!("`{other}` is not rate|literal"),
                })
            }
        };
        Ok(SimConfig {
            geometry: self.geometry()?,
            physics: self.physics()?,
            dt: self.f64_of("time.dt")?,
            t_final: self.f64_of("time.t_final")?,
            t_burn_in: self.f64_of("time.t_burn_in")?,
            noise: self.noise()?,
            n_trajectories: self.u64_of("mc.trajectories")? as usize,
            base_seed: self.u64_of("mc.base_seed")?,
            record: RecordSpec {
                angles: self.f64_list("record.angles")?,
                norms: self.bool_of("record.norms")?,
                snapshot_stride: self.u64_of("record.snapshot_stride")? as usize,
            },
            tau_convention,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build_a_valid_sim_config() {
        let config = Config::default();
        let sim = config.sim_config().unwrap();
        assert_eq!(sim.physics.s1, 10001.0);
        assert_eq!(sim.physics.sigma_i, 0.239);
        assert_eq!(sim.physics.k_ep, 40.0);
        assert_eq!(sim.physics.v_th, 2.5);
        assert_eq!(sim.n_trajectories, 50);
        sim.validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_comments() {
        let text = "

# a comment
time.dt = 0.02   # inline comment
noise.kind = linear_multiplicative
mc.trajectories = 7
";
        let config = Config::parse(text).unwrap();
        let sim = config.sim_config().unwrap();
        assert_eq!(sim.dt, 0.02);
        assert_eq!(sim.n_trajectories, 7);
        assert!(matches!(
            sim.noise.kind,
            NoiseSpecKind::LinearMultiplicative { alpha } if alpha == 0.5
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            Config::parse("physics.sigma_x = 3"),
            Err(ConfigError::UnknownKey(_))
        ));
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        match Config::parse("time.dt = 0.01\nnot a kv line") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn hash_tracks_content_not_formatting() {
        let a = Config::parse("time.dt = 0.02").unwrap();
        let b = Config::parse("# different layout\ntime.dt   =   0.02\n").unwrap();
        let c = Config::parse("time.dt = 0.01").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn pulse_waveform_parses() {
        let config = Config::parse("physics.g_waveform = pulse:1.5:4.0").unwrap();
        let p = config.physics().unwrap();
        assert_eq!(
            p.g_waveform,
            GWaveform::Pulse {
                t_on: 1.5,
                t_off: 4.0
            }
        );
    }

    #[test]
    fn fnv_reference_values() {
        // FNV-1a 64 published test values.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
