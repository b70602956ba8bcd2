//! End-to-end identification runs on the bench scenario: simulate the plant
//! with known friction, corrupt the measurements, and recover the ten
//! parameters with the adaptive observer.

use furuta_core::model::{reference, State, StaticWeights};
use furuta_core::sim::{add_noise, simulate, SimConfig, Trajectory};
use furuta_core::uas::{
    identify, AdaptationConfig, AdaptationLaw, NussbaumSpec, ObserverState, N_PARAMS,
};
use furuta_core::PhysicalParams;

const PHI: f64 = 1.0;
const DT: f64 = 1e-3;
const DURATION: f64 = 35.0;
const SEED: u64 = 42;
const K0: f64 = 6.7;

/// True friction parameters of the bench plant, arm joint first.
fn truth() -> [f64; N_PARAMS] {
    let mut z = [0.0; N_PARAMS];
    z[..5].copy_from_slice(&reference::friction_arm().to_array());
    z[5..].copy_from_slice(&reference::friction_pendulum().to_array());
    z
}

/// Initial parameter guesses for the bench identification run (about an
/// order of magnitude above the true values).
pub fn initial_guesses() -> [f64; N_PARAMS] {
    [
        5.135e-3, 5.875e-3, 2.531e-3, 4.853e-2, 1.029e-1, //
        5.705e-3, 6.683e-3, 2.399e-3, 4.820e-2, 9.720e-2,
    ]
}

fn adaptation_config() -> AdaptationConfig {
    AdaptationConfig {
        z_lower: [2.22e-16; N_PARAMS],
        z_upper: [
            0.0750, 0.0750, 0.0100, 0.0100, 0.1, 0.150, 0.151, 0.0100, 0.0100, 0.100,
        ],
        lambda_lower: [50.0; N_PARAMS],
        lambda_upper: [1.0; N_PARAMS],
        gamma: 0.0,
        law: AdaptationLaw::Bounded,
        threshold: 0.01,
        averaging: false,
    }
}

fn plant() -> PhysicalParams {
    reference::physical_params(PHI)
}

fn truth_trajectory(p: &PhysicalParams) -> Trajectory {
    simulate(
        p,
        &reference::friction_arm(),
        &reference::friction_pendulum(),
        &StaticWeights,
        State::new(0.0, 120f64.to_radians(), 0.0, 0.0),
        &SimConfig {
            dt: DT,
            duration: DURATION,
            seed: SEED,
            noise_sigma: 0.0,
            noise_enabled: false,
        },
        None,
    )
    .unwrap()
}

fn run_identification(measured: &Trajectory) -> furuta_core::IdentificationReport {
    let p = plant();
    let init = ObserverState::from_measurement(&measured.states[0], K0, initial_guesses());
    identify(
        measured,
        &p,
        &adaptation_config(),
        &NussbaumSpec::mittag_leffler(1.0, 3.0),
        init,
        &StaticWeights,
    )
    .unwrap()
}

fn max_rel_error(est: &[f64; N_PARAMS]) -> f64 {
    let truth = truth();
    (0..N_PARAMS)
        .map(|n| (est[n] - truth[n]).abs() / truth[n])
        .fold(0.0, f64::max)
}

#[test]
fn noisy_run_identifies_all_parameters_within_ten_percent() {
    let p = plant();
    let truth_traj = truth_trajectory(&p);
    let sigma = 0.1f64.to_radians(); // 0.1 deg on every channel
    let measured = add_noise(&truth_traj, sigma, SEED);
    let report = run_identification(&measured);
    assert!(report.converged(), "min e norm = {}", report.min_e_norm);
    let err = max_rel_error(&report.estimates.unwrap());
    println!(
        "noisy run: crossing at {:?} s, max rel error {:.2}%",
        report.crossing_time,
        err * 100.0
    );
    assert!(err <= 0.10, "max relative error {:.2}%", err * 100.0);
}

#[test]
fn noise_free_run_converges_with_accurate_validation_fit() {
    // Without noise the error decays below the threshold later (no noise
    // dips to trip it early), so the snapshot sits further down the decay;
    // the estimates stay close enough for a near-perfect replay fit.
    let p = plant();
    let truth_traj = truth_trajectory(&p);
    let report = run_identification(&truth_traj);
    assert!(report.converged(), "min e norm = {}", report.min_e_norm);
    let est = report.estimates.unwrap();
    println!(
        "noise-free: max rel error {:.2}%",
        max_rel_error(&est) * 100.0
    );

    let val = simulate(
        &p,
        &furuta_core::FrictionParams::from_array([est[0], est[1], est[2], est[3], est[4]]),
        &furuta_core::FrictionParams::from_array([est[5], est[6], est[7], est[8], est[9]]),
        &StaticWeights,
        truth_traj.states[0],
        &SimConfig {
            dt: DT,
            duration: DURATION,
            seed: 0,
            noise_sigma: 0.0,
            noise_enabled: false,
        },
        None,
    )
    .unwrap();
    for ch in [furuta_core::Channel::Theta0, furuta_core::Channel::Theta1] {
        let fit = furuta_core::metrics::goodness_of_fit(&truth_traj.channel(ch), &val.channel(ch))
            .unwrap();
        println!("noise-free validation fit {ch:?}: {fit:.2}%");
        assert!(fit >= 90.0, "{ch:?} fit = {fit}");
    }
}

#[test]
fn gain_state_is_non_decreasing_and_settles() {
    let p = plant();
    let truth_traj = truth_trajectory(&p);
    let measured = add_noise(&truth_traj, 0.1f64.to_radians(), SEED);
    let report = run_identification(&measured);
    let k = &report.trace.k;
    for w in k.windows(2) {
        assert!(w[1] >= w[0], "k decreased: {} -> {}", w[0], w[1]);
    }
    let last_second = (1.0 / DT) as usize;
    let dk = k[k.len() - 1] - k[k.len() - 1 - last_second];
    println!(
        "k(end) = {:.4}, growth over final second = {dk:.2e}",
        k[k.len() - 1]
    );
    assert!(dk < 1e-4, "k still growing: {dk}");
}

#[test]
fn estimates_stay_inside_adaptation_envelope() {
    // Every estimate trajectory must remain within the widest interval the
    // adaptation law can reach: from its start toward the corridor, plus the
    // gamma-driven slack.
    let p = plant();
    let truth_traj = truth_trajectory(&p);
    let measured = add_noise(&truth_traj, 0.1f64.to_radians(), SEED);
    let report = run_identification(&measured);
    let cfg = adaptation_config();
    let sup_e = report.trace.e_norm.iter().copied().fold(0.0f64, f64::max);
    let z0 = initial_guesses();
    for n in 0..N_PARAMS {
        let slack = cfg.gamma * sup_e / (cfg.lambda_lower[n] + cfg.lambda_upper[n]) + 1e-12;
        let lo = z0[n].min(cfg.z_lower[n]) - slack;
        let hi = z0[n].max(cfg.z_upper[n]) + slack;
        for row in &report.trace.z_hat {
            assert!(
                row[n] >= lo && row[n] <= hi,
                "parameter {} left [{lo}, {hi}]: {}",
                n + 1,
                row[n]
            );
        }
    }
}

#[test]
fn five_percent_low_estimates_still_fit_above_95() {
    // An estimate set sitting about 5% below the true values (the accuracy
    // class this identification achieves) must still replay the motion with
    // fits well above 95% on both joints.
    let estimates: [f64; N_PARAMS] = [
        4.793e-4, 5.740e-4, 2.424e-4, 4.742e-3, 9.479e-3, //
        5.740e-4, 6.688e-4, 2.424e-4, 4.742e-3, 9.479e-3,
    ];
    let p = plant();
    let truth_traj = truth_trajectory(&p);
    let val = simulate(
        &p,
        &furuta_core::FrictionParams::from_array([
            estimates[0],
            estimates[1],
            estimates[2],
            estimates[3],
            estimates[4],
        ]),
        &furuta_core::FrictionParams::from_array([
            estimates[5],
            estimates[6],
            estimates[7],
            estimates[8],
            estimates[9],
        ]),
        &StaticWeights,
        truth_traj.states[0],
        &SimConfig {
            dt: DT,
            duration: DURATION,
            seed: 0,
            noise_sigma: 0.0,
            noise_enabled: false,
        },
        None,
    )
    .unwrap();
    for ch in [furuta_core::Channel::Theta0, furuta_core::Channel::Theta1] {
        let fit = furuta_core::metrics::goodness_of_fit(&truth_traj.channel(ch), &val.channel(ch))
            .unwrap();
        assert!(fit >= 95.0, "{ch:?} fit = {fit:.2}%");
    }
}

#[test]
fn error_norm_crosses_threshold_while_motion_persists() {
    let p = plant();
    let truth_traj = truth_trajectory(&p);
    let measured = add_noise(&truth_traj, 0.1f64.to_radians(), SEED);
    let report = run_identification(&measured);
    let rose = report.trace.e_norm.iter().any(|&e| e >= 0.01);
    assert!(rose, "error never exceeded the threshold");
    let t = report.crossing_time.expect("no crossing");
    assert!(t > 0.0 && t < DURATION, "crossing at {t}");
}
