use super::*;
use crate::fem::{assemble, GWaveform};
use crate::mesh::{generate_mesh, OuterBc};
use std::f64::consts::PI;

fn small_config(alpha: f64, g: f64) -> SimConfig {
    SimConfig {
        geometry: GeometrySpec::square((0.5, 0.5), 0.25, 0.1, OuterBc::Periodic),
        physics: PhysParams::reference(g),
        dt: 0.01,
        t_final: 1.0,
        t_burn_in: 0.1,
        noise: NoiseSpec::additive(alpha),
        n_trajectories: 4,
        base_seed: 42,
        record: RecordSpec::default(),
        tau_convention: TauConvention::Rate,
    }
}

fn build(config: &SimConfig) -> (MeshGeometry, SaddleSystem) {
    let mesh = generate_mesh(&config.geometry).unwrap();
    let system = assemble(&mesh, &config.physics).unwrap();
    (mesh, system)
}

#[test]
fn zero_noise_zero_field_stays_at_rest() {
    let config = small_config(0.0, 0.0);
    let (mesh, system) = build(&config);
    let rec = run_trajectory(&config, &mesh, &system, 0).unwrap();
    assert!(rec.norm_v_sq.iter().all(|&x| x == 0.0));
    assert!(rec.norm_w_sq.iter().all(|&x| x == 0.0));
    assert!(rec.v_at[0].iter().all(|&x| x == 0.0));
    assert_eq!(rec.times.len(), 101);
}

#[test]
fn same_seed_is_bit_identical() {
    let config = small_config(0.5, 10.0);
    let (mesh, system) = build(&config);
    let a = run_trajectory(&config, &mesh, &system, 2).unwrap();
    let b = run_trajectory(&config, &mesh, &system, 2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn different_trajectories_differ() {
    let config = small_config(0.5, 10.0);
    let (mesh, system) = build(&config);
    let a = run_trajectory(&config, &mesh, &system, 0).unwrap();
    let b = run_trajectory(&config, &mesh, &system, 1).unwrap();
    assert_ne!(a.v_at, b.v_at);
}

#[test]
fn ensemble_of_one_reduces_to_single_trajectory() {
    let mut config = small_config(0.5, 10.0);
    config.n_trajectories = 1;
    let (mesh, system) = build(&config);
    let single = run_trajectory(&config, &mesh, &system, 0).unwrap();
    let ensemble = run_monte_carlo(&config, &mesh, &system, 2);
    assert_eq!(ensemble.len(), 1);
    assert_eq!(*ensemble[0].as_ref().unwrap(), single);
}

#[test]
fn worker_count_does_not_change_results() {
    let config = small_config(0.5, 10.0);
    let (mesh, system) = build(&config);
    let a = run_monte_carlo(&config, &mesh, &system, 1);
    let b = run_monte_carlo(&config, &mesh, &system, 4);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.as_ref().unwrap(), y.as_ref().unwrap());
    }
}

#[test]
fn porosity_stays_in_unit_box_in_coupled_run() {
    let mut config = small_config(0.5, 30.0);
    config.t_final = 3.0;
    config.record.snapshot_stride = 1;
    let (mesh, system) = build(&config);
    let rec = run_trajectory(&config, &mesh, &system, 0).unwrap();
    let snaps = rec.snapshots.unwrap();
    for wrow in &snaps.w {
        for &w in wrow {
            assert!((0.0..=1.0).contains(&w), "w = {w}");
        }
    }
}

#[test]
fn pole_angle_is_recorded_exactly() {
    let config = small_config(0.0, 5.0);
    let (mesh, system) = build(&config);
    let rec = run_trajectory(&config, &mesh, &system, 0).unwrap();
    assert_eq!(rec.angles.len(), 1);
    assert!((rec.angles[0] - PI).abs() <= 1e-12);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = small_config(0.5, 1.0);
    c.t_burn_in = 2.0; // >= t_final
    assert!(matches!(c.validate(), Err(SimError::BadConfig(_))));
    let mut c = small_config(0.5, 1.0);
    c.t_final = 1.005; // not a whole number of steps
    assert!(matches!(c.validate(), Err(SimError::BadConfig(_))));
    let mut c = small_config(0.5, 1.0);
    c.n_trajectories = 0;
    assert!(matches!(c.validate(), Err(SimError::BadConfig(_))));
}

#[test]
fn pulse_field_switches_off() {
    let mut config = small_config(0.0, 40.0);
    config.physics.g_waveform = GWaveform::Pulse {
        t_on: 0.0,
        t_off: 0.3,
    };
    config.t_final = 2.0;
    let (mesh, system) = build(&config);
    let rec = run_trajectory(&config, &mesh, &system, 0).unwrap();
    let v = &rec.v_at[0];
    let k_on = (0.25 / config.dt) as usize;
    assert!(v[k_on].abs() > 0.1, "field on: v = {}", v[k_on]);
    // Well after switch-off the jump has decayed by orders of magnitude.
    let tail = v.last().unwrap().abs();
    assert!(tail <= 1e-3 * v[k_on].abs(), "tail {tail}");
}
