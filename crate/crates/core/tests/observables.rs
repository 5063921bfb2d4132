use wasep::engine::{
    replay, Direction, EngineState, JumpRecord, JumpRecorder, SimParams,
};
use wasep::lattice::Configuration;
use wasep::observables::{
    moving_current_closed_form, CurrentTally, FieldKit, FrameShift, IntegralTerm, IntegralTracker,
    TestFunction,
};
use wasep::Error;

fn record(t: f64, bond: u32, direction: Direction) -> JumpRecord {
    JumpRecord {
        time_fixed: (t * 4_294_967_296.0) as u64,
        bond,
        direction,
    }
}

#[test]
fn conservation_identity_on_trajectories() {
    for (a, rho, seed) in [(1.0, 0.3, 1u64), (0.0, 0.5, 2), (2.0, 0.7, 3)] {
        let params = SimParams::ssep(16, 1.0, a, rho).unwrap().with_seed(seed);
        let mut engine = EngineState::init(&params).unwrap();
        let start = engine.config().clone();
        let mut tally = CurrentTally::new(params.len(), FrameShift::from_params(&params));
        engine.run_until_with(0.7, &mut tally).unwrap();
        let len = params.len();
        for x in 0..len {
            let left = tally.current_fixed((x + len - 1) % len).unwrap();
            let right = tally.current_fixed(x).unwrap();
            let change = engine.config().get(x) as i64 - start.get(x) as i64;
            assert_eq!(left - right, change, "site {x}");
        }
    }
}

#[test]
fn moving_equals_fixed_without_asymmetry() {
    let params = SimParams::ssep(16, 1.0, 0.0, 0.3).unwrap().with_seed(5);
    let frame = FrameShift::from_params(&params);
    assert!(frame.is_static());
    let origins: Vec<usize> = (0..params.len()).collect();
    let mut tally = CurrentTally::new(params.len(), frame).with_moving(&origins);
    let mut engine = EngineState::init(&params).unwrap();
    for t in [0.1, 0.4, 1.0] {
        engine.run_until_with(t, &mut tally).unwrap();
        tally.sync(t, engine.config());
        for (i, &x) in origins.iter().enumerate() {
            assert_eq!(tally.current_moving(i).unwrap(), tally.current_fixed(x).unwrap());
        }
    }
}

#[test]
fn moving_current_matches_closed_form() {
    // a β'(ρ) = 0.4 → the frame moves 6.4 sites per unit time at n = 16
    let params = SimParams::ssep(16, 1.0, 1.0, 0.3).unwrap().with_seed(8);
    let frame = FrameShift::from_params(&params);
    let origins = [0usize, 5, 17, 63];
    let mut tally = CurrentTally::new(params.len(), frame).with_moving(&origins);
    let mut engine = EngineState::init(&params).unwrap();
    for t in [0.05, 0.3, 0.77, 1.5, 2.0] {
        engine.run_until_with(t, &mut tally).unwrap();
        tally.sync(t, engine.config());
        let k = tally.frame_offset();
        assert_eq!(k, frame.lattice_offset(t));
        for (i, &x) in origins.iter().enumerate() {
            let want = moving_current_closed_form(tally.current_fixed(x).unwrap(), x, k, engine.config());
            assert_eq!(tally.current_moving(i).unwrap(), want, "t={t} origin {x}");
        }
    }
}

#[test]
fn scripted_loops() {
    // one particle walking k = 3 times around a 6-site torus
    let mut config = Configuration::new(vec![1, 0, 0, 0, 0, 0]).unwrap();
    let mut records = Vec::new();
    let mut t = 0.0;
    for _ in 0..3 {
        for b in 0..6 {
            t += 0.01;
            records.push(record(t, b, Direction::Forward));
        }
    }
    let mut tally = CurrentTally::new(6, FrameShift::none(6));
    replay(&mut config, &records, &mut tally).unwrap();
    for x in 0..6 {
        assert_eq!(tally.current_fixed(x).unwrap(), 3);
    }
}

#[test]
fn frame_passing_a_frozen_particle() {
    // n = 4, γ = 1, velocity 1: d_lat(t) = 4t
    let frame = FrameShift {
        velocity: 1.0,
        n: 4,
        gamma: 1.0,
    };
    let mut config = Configuration::empty(8).unwrap();
    config.set(3, 1);
    let mut tally = CurrentTally::new(8, frame).with_moving(&[0]);
    tally.sync(1.0, &config);
    assert_eq!(tally.frame_offset(), 4);
    assert_eq!(tally.current_moving(0).unwrap(), -1);

    let full = Configuration::full(8).unwrap();
    let mut tally = CurrentTally::new(8, frame).with_moving(&[2]);
    tally.sync(1.3, &full);
    assert_eq!(tally.frame_offset(), 5);
    assert_eq!(tally.current_moving(0).unwrap(), -5);
}

#[test]
fn frame_moving_left_releases_particles() {
    let frame = FrameShift {
        velocity: -1.0,
        n: 4,
        gamma: 1.0,
    };
    let full = Configuration::full(8).unwrap();
    let mut tally = CurrentTally::new(8, frame).with_moving(&[0]);
    tally.sync(0.5, &full);
    assert_eq!(tally.frame_offset(), -2);
    assert_eq!(tally.current_moving(0).unwrap(), 2);
}

#[test]
fn wrapping_frame_fails() {
    let frame = FrameShift {
        velocity: 1.0,
        n: 4,
        gamma: 1.0,
    };
    let config = Configuration::empty(8).unwrap();
    let mut tally = CurrentTally::new(8, frame).with_moving(&[0]);
    tally.sync(2.5, &config);
    assert!(matches!(tally.current_moving(0), Err(Error::FrameWrapped { .. })));
}

#[test]
fn untracked_bonds_fail() {
    let tally = CurrentTally::with_bonds(8, &[1, 2], FrameShift::none(4));
    assert!(tally.current_fixed(2).is_ok());
    assert!(matches!(tally.current_fixed(5), Err(Error::UntrackedBond(5))));
}

#[test]
fn frozen_system_has_no_current() {
    let params = SimParams::ssep(4, 1.0, 1.0, 0.5).unwrap();
    let mut engine = EngineState::with_config(&params, Configuration::full(16).unwrap(), 0).unwrap();
    let mut tally = CurrentTally::new(16, FrameShift::none(4));
    engine.run_until_with(1.0, &mut tally).unwrap();
    assert!(tally.fixed_counts().iter().all(|&j| j == 0));
}

/// Gauss-Legendre 5-point rule on [t0, t1].
fn gl5(f: impl Fn(f64) -> f64, t0: f64, t1: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let c = 0.5 * (t0 + t1);
    let h = 0.5 * (t1 - t0);
    X.iter().zip(&W).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

fn integrator_matches_piecewise_quadrature(a: f64, rho: f64, h: TestFunction) {
    let params = SimParams::ssep(16, 1.0, a, rho).unwrap().with_seed(21);
    let kit = FieldKit::new(&params).unwrap();
    let mut engine = EngineState::init(&params).unwrap();
    let start = engine.config().clone();
    let horizon = 0.4;
    let mut i_track =
        IntegralTracker::new(&kit, &h, IntegralTerm::Symmetric, &start, horizon).unwrap();
    let mut a_track =
        IntegralTracker::new(&kit, &h, IntegralTerm::Asymmetric, &start, horizon).unwrap();
    let mut log = JumpRecorder::default();
    engine
        .run_until_with(horizon, &mut (&mut i_track, &mut a_track, &mut log))
        .unwrap();
    let got_i = i_track.value_at(horizon).unwrap();
    let got_a = a_track.value_at(horizon).unwrap();

    let mut config = start;
    let (mut want_i, mut want_a, mut last) = (0.0, 0.0, 0.0);
    let mut segment = |config: &Configuration, t0: f64, t1: f64| {
        want_i += gl5(|s| kit.i_term_increment(config, &h, s).unwrap(), t0, t1);
        want_a += gl5(|s| kit.a_term_increment(config, &h, s).unwrap(), t0, t1);
    };
    for ev in &log.events {
        segment(&config, last, ev.time);
        config.swap_bond(ev.bond);
        last = ev.time;
    }
    segment(&config, last, horizon);
    assert!(!log.events.is_empty());
    let tol = |x: f64| 1e-9 * x.abs().max(1.0);
    assert!((got_i - want_i).abs() < tol(want_i), "I: {got_i} vs {want_i}");
    assert!((got_a - want_a).abs() < tol(want_a), "A: {got_a} vs {want_a}");
}

#[test]
fn exact_integrals_static_frame() {
    integrator_matches_piecewise_quadrature(1.0, 0.5, TestFunction::bump(0.2, 0.9, 4));
}

#[test]
fn exact_integrals_moving_frame() {
    // ρ = 0.3: the frame moves at 0.4 macroscopic units per unit time
    integrator_matches_piecewise_quadrature(1.0, 0.3, TestFunction::bump(-0.4, 0.9, 6));
    integrator_matches_piecewise_quadrature(1.0, 0.3, TestFunction::gaussian_density(0.0, 0.2));
}
