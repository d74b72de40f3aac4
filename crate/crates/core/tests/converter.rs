use chaosmask::control::{boost_controller_step, buck_switch_state, ramp_value, BoostControllerState, RampParams};
use chaosmask::dynamics::*;
use chaosmask::sim::{run_for, BoostSim, BuckDrive, BuckSim, Converter};
use chaosmask::Error;

fn boost_on_field(p: BoostParams) -> impl Fn(&Vec2) -> Vec2 {
    move |x: &Vec2| {
        let (a, b) = boost_rhs(&BoostState::from_vec(*x), &p, SwitchPhase::On);
        [a, b]
    }
}

#[test]
fn buck_rhs_matches_hand_substitution() {
    let p = BuckParams::default();
    let (di, _) = buck_rhs(&BuckState::new(1.0, 0.0), &p, SwitchPhase::On);
    assert!((di - 100.0).abs() < 1e-9);
    let (di, _) = buck_rhs(&BuckState::new(0.0, 0.0), &p, SwitchPhase::Off);
    assert_eq!(di, 0.0);

    // sensed-current term, leak through R1 and the source term, written out separately
    let (i, v) = (1.0, 1.0);
    let sensed = i * ((p.r1 + p.r2) / (p.c * p.r1 * p.r2) - p.r_l / p.l);
    let leak = v / (p.r1 * p.c);
    let source = p.v_in / p.l;
    let oracle = sensed - leak + source;
    let (_, dv) = buck_rhs(&BuckState::new(i, v), &p, SwitchPhase::On);
    assert!((dv - oracle).abs() < 1e-9 * oracle.abs());
    assert!((dv - 2227.66).abs() < 0.01, "{dv}");
}

#[test]
fn boost_rhs_examples() {
    let p = BoostParams::default();
    for st in [BoostState::new(0.0, 0.0), BoostState::new(3.0, 17.0)] {
        assert_eq!(boost_rhs(&st, &p, SwitchPhase::On).0, 10_000.0);
    }
    assert_eq!(boost_rhs(&BoostState::new(2.0, 10.0), &p, SwitchPhase::Off).0, 0.0);
    let dv = boost_rhs(&BoostState::new(1.0, 0.0), &p, SwitchPhase::Off).1;
    assert!((dv - 1.0 / 12e-6).abs() < 1e-6);
}

#[cfg(not(feature = "flipped_capacitor_sign"))]
#[test]
fn rk4_tracks_capacitor_discharge_over_one_time_constant() {
    let p = BoostParams::default();
    let rc = p.r * p.c;
    let h = p.t_clk / 2000.0;
    let field = boost_on_field(p);
    let mut x = [0.0, 10.0];
    let n = (rc / h).round() as usize;
    for _ in 0..n {
        x = step_segment(&field, x, h).unwrap();
    }
    let exact = 10.0 * (-(n as f64) * h / rc).exp();
    assert!(((x[1] - exact) / exact).abs() < 1e-9);
    assert!((exact - 10.0 / std::f64::consts::E).abs() < 1e-9);

    // one step across the whole time constant
    let single = step_segment(&field, [0.0, 10.0], rc).unwrap()[1];
    let taylor4 = 10.0 * (1.0 - 1.0 + 0.5 - 1.0 / 6.0 + 1.0 / 24.0);
    assert!((single - taylor4).abs() < 1e-12);
}

#[test]
fn rk4_ramp_and_zero_step() {
    let field = boost_on_field(BoostParams::default());
    let x = step_segment(&field, [0.0, 12.0], 50e-6).unwrap();
    assert_eq!(x[0], 0.5);
    assert_eq!(step_segment(&field, [0.3, 12.0], 0.0).unwrap(), [0.3, 12.0]);
    let blow = step_segment(|_: &Vec2| [f64::INFINITY, 0.0], [1.0, 2.0], 1e-3);
    assert!(matches!(blow, Err(Error::NumericBlowUp { .. })));
}

#[test]
fn event_location_examples() {
    let cfg = IntegratorConfig::for_period(100e-6);
    let t = locate_event(|t| t - 0.5, 0.0, 1.0, &cfg).unwrap();
    assert!((t - 0.5).abs() <= 1e-10);
    assert_eq!(locate_event(|t| t, 0.0, 1.0, &cfg).unwrap(), 0.0);
    assert!(matches!(locate_event(|_| 1.0, 0.0, 1.0, &cfg), Err(Error::NoEvent { .. })));

    // boost current ramp reaching 0.3 A: analytic crossing at 0.3 / (V_in / L)
    let p = BoostParams { i_ref: 0.3, ..BoostParams::default() };
    let field = boost_on_field(p);
    let t = locate_event(|t| step_segment(&field, [0.0, 10.0], t).unwrap()[0] - p.i_ref, 0.0, 100e-6, &cfg).unwrap();
    assert!((t - 0.3 * p.l / p.v_in).abs() <= cfg.event_tolerance);
}

#[test]
fn ideal_gain_examples() {
    assert_eq!(ideal_gain(ConverterKind::Buck, 0.5, 24.0).unwrap(), 12.0);
    assert_eq!(ideal_gain(ConverterKind::Boost, 0.5, 10.0).unwrap(), 10.0);
    assert_eq!(ideal_gain(ConverterKind::Buck, 0.0, 99.0).unwrap(), 0.0);
    assert!(ideal_gain(ConverterKind::Boost, 1.0, 10.0).is_err());
    assert!(ideal_gain(ConverterKind::Buck, -0.1, 10.0).is_err());
}

#[test]
fn ramp_and_comparator_examples() {
    let r = RampParams::default();
    assert!((ramp_value(0.0, &r) - 3.8).abs() < 1e-12);
    assert!((ramp_value(r.period() / 4.0, &r) - 6.0).abs() < 1e-12);
    assert!((ramp_value(r.period(), &r) - 3.8).abs() < 1e-9);
    assert_eq!(buck_switch_state(5.0, 6.0), SwitchPhase::On);
    assert_eq!(buck_switch_state(7.0, 6.0), SwitchPhase::Off);
    assert_eq!(buck_switch_state(6.0, 6.0), SwitchPhase::Off);
}

#[test]
fn controller_examples() {
    let p = BoostParams::default();
    let off = BoostControllerState { phase: SwitchPhase::Off, last_clock_index: 3 };
    assert_eq!(boost_controller_step(off, 0.0, 4.0 * p.t_clk, &p).phase, SwitchPhase::On);
    let on = BoostControllerState { phase: SwitchPhase::On, last_clock_index: 3 };
    assert_eq!(boost_controller_step(on, p.i_ref, 3.5 * p.t_clk, &p).phase, SwitchPhase::Off);
    let next = boost_controller_step(on, 0.1, 4.0 * p.t_clk, &p);
    assert_eq!(next, BoostControllerState { phase: SwitchPhase::On, last_clock_index: 4 });
}

#[test]
fn boost_run_is_deterministic() {
    let p = BoostParams { i_ref: 3.2, ..BoostParams::default() };
    let make = || BoostSim::new(p, IntegratorConfig::for_period(p.t_clk), BoostState::new(0.0, 10.0)).unwrap();
    let (mut a, mut b) = (make(), make());
    run_for(&mut a, 50.0 * p.t_clk).unwrap();
    run_for(&mut b, 50.0 * p.t_clk).unwrap();
    assert_eq!(a.state_vec(), b.state_vec());
}

#[test]
fn buck_comparator_drive_follows_integrator_voltage() {
    // with the comparator input pinned above the ramp top the switch never closes
    let ramp = RampParams::default();
    let mut sim = BuckSim::new(
        BuckParams::default(),
        ramp,
        IntegratorConfig::for_period(ramp.period()),
        BuckDrive::External(9.0),
        BuckState::new(0.1, 9.0),
    )
    .unwrap();
    assert_eq!(sim.phase, SwitchPhase::Off);
    run_for(&mut sim, 3.0 * ramp.period()).unwrap();
    assert_eq!(sim.switch_count, 0);
    assert!(sim.state.i.abs() < 0.1);
}

#[test]
fn clock_edge_above_reference_reports_no_switching() {
    // v_c below V_in lets the current climb past I_ref while the switch is open
    let p = BoostParams { i_ref: 1.0, ..BoostParams::default() };
    let mut sim = BoostSim::new(p, IntegratorConfig::for_period(p.t_clk), BoostState::new(1.5, 5.0)).unwrap();
    assert_eq!(sim.ctl.phase, SwitchPhase::Off);
    let mut events = Vec::new();
    for _ in 0..2001 {
        sim.step_with_events(|e| events.push(e)).unwrap();
    }
    assert!(events.is_empty(), "{events:?}");
    assert_eq!(sim.switch_count, 0);
}
