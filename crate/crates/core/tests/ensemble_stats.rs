//! Law-of-total-variance checks on trajectory ensembles: the covariance of
//! the conditional means plus the conditional covariance must reproduce the
//! unconditional covariance. Each case runs 2000 trajectories and requires
//! every moment within 4 standard errors; a corrupted-gain run must fail the
//! same check.

use dmpa::dynamics::steady_state_numeric;
use dmpa::params::{DetuningSign, RotatingFrameParams, Scheme};
use dmpa::trajectory::{ensemble_validate, TrajectoryOptions};

const N_TRAJ: usize = 2000;
const T_END: f64 = 20.0;

fn driven_point() -> RotatingFrameParams {
    RotatingFrameParams::qnd(1.0, 2.0, DetuningSign::Minus)
        .with_measurement(1.0, 1.0)
        .with_thermal(1.0)
}

#[test]
fn total_variance_driven() {
    let p = driven_point();
    let rep = ensemble_validate(
        &p,
        Scheme::Dmpa,
        N_TRAJ,
        T_END,
        2101,
        &TrajectoryOptions::default(),
    )
    .unwrap();
    assert!(rep.pass, "z-scores: {:?}", rep.z_scores);
}

#[test]
fn total_variance_evading() {
    let p = RotatingFrameParams::bare(1.0).with_measurement(1.0, 1.0);
    let rep = ensemble_validate(
        &p,
        Scheme::Bae,
        N_TRAJ,
        T_END,
        2102,
        &TrajectoryOptions::default(),
    )
    .unwrap();
    assert!(rep.pass, "z-scores: {:?}", rep.z_scores);
}

/// Without monitoring the means never move, so the identity degenerates to
/// conditional covariance == unconditional covariance and every z is zero.
#[test]
fn total_variance_unmonitored() {
    let p = RotatingFrameParams::qnd(1.0, 1.0, DetuningSign::Minus).with_thermal(1.0);
    let rep = ensemble_validate(
        &p,
        Scheme::Dmpa,
        N_TRAJ,
        T_END,
        2103,
        &TrajectoryOptions::default(),
    )
    .unwrap();
    assert!(rep.pass, "z-scores: {:?}", rep.z_scores);
    for e in &rep.entries {
        assert!(
            e.z.abs() < 1e-9,
            "{} drifted without measurement: z = {}",
            e.name,
            e.z
        );
    }
}

/// Negative control: halving the Kalman gain (record untouched) breaks the
/// mean/covariance bookkeeping, so the identity must detectably fail.
#[test]
fn corrupted_gain_fails() {
    let p = driven_point();
    let opts = TrajectoryOptions {
        gain_scale: 0.5,
        ..TrajectoryOptions::default()
    };
    let rep = ensemble_validate(&p, Scheme::Dmpa, N_TRAJ, T_END, 2104, &opts).unwrap();
    assert!(!rep.pass, "halved gain went undetected: {:?}", rep.z_scores);
}

/// The ensemble identity holds out of steady state too, but by t = 20/gamma
/// the conditional covariance entering it must agree with the stationary
/// solver; guards against the report silently comparing transients.
#[test]
fn conditional_covariance_settles() {
    let p = driven_point();
    let stationary = steady_state_numeric(&p, Scheme::Dmpa).unwrap();
    let rep = ensemble_validate(
        &p,
        Scheme::Dmpa,
        100,
        T_END,
        2105,
        &TrajectoryOptions::default(),
    )
    .unwrap();
    let v_unc: f64 = rep
        .entries
        .iter()
        .find(|e| e.name == "v_x")
        .map(|e| e.expected)
        .unwrap();
    assert!(
        v_unc > stationary.v_x,
        "unconditional x variance {v_unc} should exceed conditional {}",
        stationary.v_x
    );
}
