//! The RK4 oracle against the closed-form transition maps.

mod common;

use common::{max_abs_diff, random_states};
use threelp::analysis::{
    com_work_per_distance, economy_body, human_ds_ratio, kinetic_energy_range, segment_work_per_distance,
    GaitTrajectory,
};
use threelp::gaits::{solve_gait, ScenarioSpec};
use threelp::model::{idx, Vec23};
use threelp::oracle::{
    energy_balance, integrate, integrate_batch, positive_work, push_closed_form, OracleConfig, OracleSpan, Push,
};
use threelp::transition::StrideMap;
use threelp::{BodyParams, BodySize, StrideTiming};

fn adult() -> (BodyParams, StrideTiming) {
    (BodyParams::preset(BodySize::Adult), StrideTiming::new(0.3, 0.5).unwrap())
}

fn walking_state() -> (BodyParams, StrideTiming, Vec23) {
    let (p, t) = adult();
    let g = solve_gait(&p, &t, 1.0, ScenarioSpec::PseudoPassive, 1.0).unwrap();
    (p, t, g.q0)
}

#[test]
fn stride_end_matches_closed_form() {
    let (p, t) = adult();
    let map = StrideMap::cached(&p, &t).unwrap();
    let q0s = random_states(11, 20);
    let ends = integrate_batch(&p, &t, &q0s, &OracleConfig::default()).unwrap();
    let worst = q0s.iter().zip(&ends).map(|(q, e)| max_abs_diff(&(map.h() * q), e)).fold(0.0, f64::max);
    assert!(worst <= 1e-7, "stride discrepancy {worst:e}");
}

#[test]
fn single_support_matches_closed_form() {
    let (p, t) = adult();
    let map = StrideMap::cached(&p, &t).unwrap();
    let starts: Vec<Vec23> = random_states(12, 10).iter().map(|q| map.h_ds_end() * q).collect();
    let config = OracleConfig { span: OracleSpan::Single, ..Default::default() };
    let ends = integrate_batch(&p, &t, &starts, &config).unwrap();
    let worst = starts.iter().zip(&ends).map(|(q, e)| max_abs_diff(&(map.h_ss_end() * q), e)).fold(0.0, f64::max);
    assert!(worst <= 1e-8, "single-support discrepancy {worst:e}");
}

#[test]
fn recorded_trajectory_follows_the_map() {
    let (p, t, q0) = walking_state();
    let map = StrideMap::cached(&p, &t).unwrap();
    let config = OracleConfig { step: 1e-4, record_every: 100, ..Default::default() };
    let traj = integrate(&p, &t, &q0, &config).unwrap();
    assert!(traj.times.len() > 5);
    assert_eq!(*traj.times.last().unwrap(), t.stride());
    for (time, q) in traj.times.iter().zip(&traj.states) {
        let closed = map.at(*time).unwrap() * q0;
        assert!(max_abs_diff(&closed, q) < 1e-8, "t = {time}");
    }
}

#[test]
fn fourth_order_convergence() {
    let (p, t) = adult();
    let map = StrideMap::cached(&p, &t).unwrap();
    let q0s = random_states(13, 3);
    let error = |step: f64| {
        let ends = integrate_batch(&p, &t, &q0s, &OracleConfig { step, ..Default::default() }).unwrap();
        q0s.iter().zip(&ends).map(|(q, e)| max_abs_diff(&(map.h() * q), e)).fold(0.0, f64::max)
    };
    // steps that divide both phases evenly
    let errors: Vec<f64> = [2.5e-3, 1.25e-3, 6.25e-4].iter().map(|&h| error(h)).collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((12.0..20.0).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn zero_push_changes_nothing() {
    let (p, t, q0) = walking_state();
    let map = StrideMap::cached(&p, &t).unwrap();
    let push = Push { start: 0.4, duration: 0.1, wrench: [0.0; 4] };
    let closed = push_closed_form(&map, &q0, &push).unwrap();
    assert!(max_abs_diff(&closed, &(map.h() * q0)) < 1e-12);
    let step = 1e-4;
    let plain = integrate(&p, &t, &q0, &OracleConfig { step, ..Default::default() }).unwrap();
    let pushed = integrate(&p, &t, &q0, &OracleConfig { step, push: Some(push), ..Default::default() }).unwrap();
    assert!(max_abs_diff(plain.end(), pushed.end()) < 1e-12);
}

#[test]
fn push_over_single_support_equals_wrench_in_state() {
    let (p, t, q0) = walking_state();
    let map = StrideMap::cached(&p, &t).unwrap();
    let wrench = [30.0, -10.0, 4.0, 2.0];
    let push = Push { start: t.t_ds(), duration: t.t_ss(), wrench };
    let pushed = push_closed_form(&map, &q0, &push).unwrap();
    let mut mid = map.h_ds_end() * q0;
    for (k, i) in idx::W.enumerate() {
        mid[i] = wrench[k];
    }
    let mut direct = map.h_ss_end() * mid;
    for i in idx::W {
        direct[i] = q0[i];
    }
    assert!(max_abs_diff(&pushed, &direct) < 1e-10);

    // a push over the whole stride is the wrench carried by the initial state
    let whole = Push { start: 0.0, duration: t.stride(), wrench };
    let mut q_w = q0;
    for (k, i) in idx::W.enumerate() {
        q_w[i] = wrench[k];
    }
    let step = 1e-4;
    let scheduled = integrate(&p, &t, &q0, &OracleConfig { step, push: Some(whole), ..Default::default() }).unwrap();
    let carried = integrate(&p, &t, &q_w, &OracleConfig { step, ..Default::default() }).unwrap();
    let mut a = *scheduled.end();
    let mut b = *carried.end();
    for i in idx::W {
        a[i] = 0.0;
        b[i] = 0.0;
    }
    assert!(max_abs_diff(&a, &b) < 1e-12);
}

#[test]
fn sagittal_push_mid_stride() {
    let (p, t, q0) = walking_state();
    let map = StrideMap::cached(&p, &t).unwrap();
    let push = Push { start: 0.35, duration: 0.1, wrench: [50.0, 0.0, 0.0, 0.0] };
    let closed = push_closed_form(&map, &q0, &push).unwrap();
    let oracle = integrate(&p, &t, &q0, &OracleConfig { push: Some(push), ..Default::default() }).unwrap();
    let err = max_abs_diff(&closed, oracle.end());
    assert!(err <= 1e-7, "push discrepancy {err:e}");
    // the push is visible in the end state
    assert!(max_abs_diff(&closed, &(map.h() * q0)) > 1e-3);
}

#[test]
fn pushes_outside_the_stride_are_rejected() {
    let (p, t, q0) = walking_state();
    let map = StrideMap::cached(&p, &t).unwrap();
    let push = Push { start: 0.75, duration: 0.1, wrench: [50.0, 0.0, 0.0, 0.0] };
    assert!(push_closed_form(&map, &q0, &push).is_err());
    assert!(integrate(&p, &t, &q0, &OracleConfig { push: Some(push), ..Default::default() }).is_err());
}

#[test]
fn power_balances_kinetic_energy() {
    let (p, t) = adult();
    for q0 in random_states(14, 2) {
        let balance = energy_balance(&p, &t, &q0, 1e-4).unwrap();
        assert!(balance.relative_error() <= 1e-5, "{balance:?}");
        assert!(balance.kinetic_change.abs() > 1.0, "test state should change energy: {balance:?}");
    }
}

/// Unimodal over the stride: one rise and one fall of the CoM kinetic energy.
fn com_energy_turns(traj: &GaitTrajectory, n: usize) -> usize {
    let total = traj.timing().stride();
    let e: Vec<f64> = (0..=n).map(|j| traj.kinetic_energy(total * j as f64 / n as f64).unwrap()).collect();
    e.windows(3).filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0).count()
}

#[test]
fn work_per_distance_matches_integrated_power() {
    let p = economy_body();
    let (v, f) = (1.6, 1.8);
    let t = StrideTiming::from_ratio(1.0 / f, human_ds_ratio(v)).unwrap();
    let gait = solve_gait(&p, &t, v, ScenarioSpec::PseudoPassive, 1.0).unwrap();
    let scale = p.total_mass() * v * t.stride();
    let oracle = positive_work(&p, &t, &gait.q0, 5e-5).unwrap();

    let segment = segment_work_per_distance(&gait).unwrap();
    let rel = (segment - oracle.segments / scale).abs() / segment;
    assert!(rel <= 1e-4, "segment work {segment} vs oracle {} ({rel:e})", oracle.segments / scale);

    // the CoM range equals the positive work only when the energy rises once per stride
    let traj = GaitTrajectory::of(&gait).unwrap();
    let com = com_work_per_distance(&gait).unwrap();
    let (lo, hi) = kinetic_energy_range(&traj).unwrap();
    assert!((com - (hi - lo) / scale).abs() < 1e-15);
    let turns = com_energy_turns(&traj, 4000);
    if turns <= 2 {
        let rel = (com - oracle.com / scale).abs() / com;
        assert!(rel <= 1e-4, "CoM work {com} vs oracle {} ({rel:e})", oracle.com / scale);
    } else {
        assert!(oracle.com / scale >= com * (1.0 - 1e-4), "positive work bounds the range from above");
        eprintln!("CoM energy has {turns} turns per stride; range {com} < positive work {}", oracle.com / scale);
    }
}
