//! Behavioral studies of the coupled time stepper: deterministic event
//! ordering, ensemble sanity bands, step refinement and stability under
//! initial-data perturbations.

use electroperm::fem::{assemble, PhysParams, SaddleSystem};
use electroperm::membrane::TauConvention;
use electroperm::mesh::{generate_mesh, GeometrySpec, MeshGeometry, OuterBc};
use electroperm::sim::{
    run_monte_carlo, run_trajectory, run_trajectory_from, NoiseSpec, RecordSpec, SimConfig,
};

fn desk_config(h: f64, alpha: f64, g: f64, t_final: f64) -> SimConfig {
    SimConfig {
        geometry: GeometrySpec::square((0.5, 0.5), 0.25, h, OuterBc::Periodic),
        physics: PhysParams::reference(g),
        dt: 0.01,
        t_final,
        t_burn_in: 0.1 * t_final,
        noise: NoiseSpec::additive(alpha),
        n_trajectories: 1,
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
fn deterministic_run_reproduces_the_event_ordering() {
    // Zero noise, constant field: the pole jump rises, crosses the threshold,
    // peaks, then decays, while the pole porosity only grows and saturates.
    let config = desk_config(0.1, 0.0, 100_000.0, 30.0);
    let (mesh, system) = build(&config);
    let rec = run_trajectory(&config, &mesh, &system, 0).unwrap();
    let v = &rec.v_at[0];
    let w = &rec.w_at[0];
    let cross = v
        .iter()
        .position(|&x| x > config.physics.v_th)
        .expect("jump crosses the threshold");
    assert!(v[..cross].iter().all(|&x| x <= config.physics.v_th));
    let (k_peak, v_peak) =
        v.iter().enumerate().fold(
            (0, f64::MIN),
            |acc, (k, &x)| if x > acc.1 { (k, x) } else { acc },
        );
    assert!(v_peak > config.physics.v_th);
    assert!(k_peak >= cross);
    assert!(k_peak < v.len() - 1, "peak must not sit at the end");
    assert!(
        *v.last().unwrap() < v_peak,
        "jump must decay after its peak"
    );
    for pair in w.windows(2) {
        assert!(
            pair[1] >= pair[0],
            "porosity decreased: {} -> {}",
            pair[0],
            pair[1]
        );
    }
    assert!(*w.last().unwrap() >= 0.9, "w(T) = {}", w.last().unwrap());
}

#[test]
fn mean_band_brackets_most_trajectories() {
    // The +-1 standard-deviation band around the ensemble mean of the pole
    // jump brackets roughly the Gaussian share of trajectories.
    let mut config = desk_config(0.1, 0.5, 100_000.0, 20.0);
    config.n_trajectories = 24;
    let (mesh, system) = build(&config);
    let records: Vec<_> = run_monte_carlo(&config, &mesh, &system, 4)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let n_steps = records[0].v_at[0].len();
    let mut inside_fraction_sum = 0.0;
    let mut counted = 0usize;
    for k in 0..n_steps {
        let vals: Vec<f64> = records.iter().map(|r| r.v_at[0][k]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() as f64 - 1.0);
        let std = var.sqrt();
        let inside = vals.iter().filter(|&&v| (v - mean).abs() <= std).count();
        inside_fraction_sum += inside as f64 / vals.len() as f64;
        counted += 1;
    }
    let avg_fraction = inside_fraction_sum / counted as f64;
    println!("average bracketing fraction: {avg_fraction:.3}");
    assert!(avg_fraction >= 0.60, "fraction {avg_fraction}");
}

#[test]
fn sup_norm_moment_is_stable_under_ensemble_doubling() {
    let make = |n: usize| {
        let mut config = desk_config(0.1, 0.5, 100_000.0, 20.0);
        config.n_trajectories = n;
        config
    };
    let config = make(6);
    let (mesh, system) = build(&config);
    let sup_mean = |config: &SimConfig| -> f64 {
        let records = run_monte_carlo(config, &mesh, &system, 4);
        let sups: Vec<f64> = records
            .into_iter()
            .map(|r| r.unwrap().norm_v_sq.iter().fold(f64::MIN, |a, &b| a.max(b)))
            .collect();
        sups.iter().sum::<f64>() / sups.len() as f64
    };
    let small = sup_mean(&config);
    let large = sup_mean(&make(12));
    assert!(small.is_finite() && large.is_finite());
    let rel = (large - small).abs() / small;
    println!("sup-moment means: {small} vs {large} (rel {rel:.4})");
    assert!(rel <= 0.2, "relative change {rel}");
}

#[test]
fn zero_noise_norm_series_refines_at_first_order() {
    // Moderate conductivity rise keeps every rate resolved on the coarsest
    // level, so halving dt shrinks the sup distance between consecutive
    // solutions at the scheme's first order. The run still crosses the
    // threshold and saturates the porosity.
    let mut base = desk_config(0.1, 0.0, 50.0, 2.0);
    base.physics.s1 = 100.0;
    let (mesh, system) = build(&base);
    let run_with_dt = |dt: f64| -> Vec<f64> {
        let mut config = base.clone();
        config.dt = dt;
        run_trajectory(&config, &mesh, &system, 0)
            .unwrap()
            .norm_v_sq
    };
    let dts = [0.02, 0.01, 0.005, 0.0025, 0.00125];
    let series: Vec<Vec<f64>> = dts.iter().map(|&dt| run_with_dt(dt)).collect();
    let diffs: Vec<f64> = series
        .windows(2)
        .map(|pair| {
            pair[0]
                .iter()
                .enumerate()
                .map(|(k, &x)| (x - pair[1][2 * k]).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    println!("consecutive-level sup differences: {diffs:?}");
    for k in 0..diffs.len() - 1 {
        let order = (diffs[k] / diffs[k + 1]).log2();
        assert!(
            order >= 0.8,
            "order {order} between {} and {}",
            dts[k],
            dts[k + 1]
        );
    }
}

#[test]
fn perturbed_initial_data_stays_close_on_shared_noise() {
    // Same Brownian path, initial jump perturbed by 1e-8: trajectories stay
    // within 1e-4 in the sup norm over the whole window.
    let config = desk_config(0.05, 0.5, 100_000.0, 30.0);
    let (mesh, system) = build(&config);
    let n = system.n_trace;
    let base =
        run_trajectory_from(&config, &mesh, &system, 0, &vec![0.0; n], &vec![0.0; n]).unwrap();
    let perturbed =
        run_trajectory_from(&config, &mesh, &system, 0, &vec![1e-8; n], &vec![0.0; n]).unwrap();
    let mut max_diff = 0.0f64;
    for (a, b) in base.v_at[0].iter().zip(&perturbed.v_at[0]) {
        max_diff = max_diff.max((a - b).abs());
    }
    for (a, b) in base.w_at[0].iter().zip(&perturbed.w_at[0]) {
        max_diff = max_diff.max((a - b).abs());
    }
    println!("sup distance under 1e-8 perturbation: {max_diff:e}");
    assert!(max_diff <= 1e-4, "sup distance {max_diff:e}");
}

#[test]
fn literal_tau_convention_reseals_faster() {
    // Pulse forcing, then watch the pole porosity decay once the field stops:
    // the literal reading multiplies by tau_res = 10 and reseals much faster
    // than the rate reading's 1/tau_res = 0.1.
    let mut config = desk_config(0.1, 0.0, 100_000.0, 10.0);
    config.physics.g_waveform = electroperm::fem::GWaveform::Pulse {
        t_on: 0.0,
        t_off: 2.0,
    };
    let (mesh, system) = build(&config);
    let rate = run_trajectory(&config, &mesh, &system, 0).unwrap();
    let mut literal_config = config.clone();
    literal_config.tau_convention = TauConvention::Literal;
    let literal = run_trajectory(&literal_config, &mesh, &system, 0).unwrap();
    let w_rate = *rate.w_at[0].last().unwrap();
    let w_literal = *literal.w_at[0].last().unwrap();
    println!("w(T) rate convention: {w_rate}, literal convention: {w_literal}");
    assert!(
        w_literal < 0.1 * w_rate,
        "literal should reseal much faster"
    );
}
