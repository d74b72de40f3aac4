//! Event-driven simulation of a single converter on a fixed time grid.
//!
//! Each grid step of length `h` is integrated with RK4 and split at every
//! switching instant. Switching instants are located by bisection, each
//! trial point being re-integrated from the start of the current segment.

use crate::control::{boost_controller_step, buck_switch_state, ramp_value, BoostControllerState, RampParams};
use crate::dynamics::{
    bisect_bracket, boost_rhs, buck_rhs, rk4, Bracket, BoostParams, BoostState, BuckParams, BuckState,
    IntegratorConfig, SwitchPhase, Vec2,
};
use crate::error::{Error, Result};

/// Upper bound on switching events inside one grid step before the step is
/// declared to be chattering.
const MAX_EVENTS_PER_STEP: usize = 64;

/// A switching instant inside a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    /// Phase entered at `t`.
    pub phase: SwitchPhase,
    pub state: Vec2,
}

/// Whether a guard value calls for leaving `phase`.
///
/// An ON phase ends when its guard reaches zero, an OFF phase only once the
/// guard is strictly positive; this breaks comparator ties toward OFF.
#[inline]
fn guard_violated(phase: SwitchPhase, g: f64) -> bool {
    if phase.is_on() {
        g >= 0.0
    } else {
        g > 0.0
    }
}

/// Integrates `[t0, t1]` starting in `phase`, switching whenever the signed
/// `guard(phase, t, x)` says the current phase is no longer valid.
///
/// The guard is checked at the start (an immediate switch) and at the end of
/// every segment; a violation at the end is bracketed by bisection, each
/// trial re-integrated from the segment start, and the crossing is placed by
/// linear interpolation inside the final bracket. Double crossings inside
/// one step are not resolved.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate_switched<F, G, E>(
    mut x: Vec2,
    mut phase: SwitchPhase,
    t0: f64,
    t1: f64,
    rhs: F,
    guard: G,
    cfg: &IntegratorConfig,
    mut on_event: E,
) -> Result<(Vec2, SwitchPhase)>
where
    F: Fn(SwitchPhase, &Vec2) -> Vec2,
    G: Fn(SwitchPhase, f64, &Vec2) -> f64,
    E: FnMut(SwitchEvent),
{
    let mut start = t0;
    let mut events = 0usize;
    if guard_violated(phase, guard(phase, start, &x)) {
        phase = phase.flipped();
        events += 1;
        on_event(SwitchEvent {
            t: start,
            phase,
            state: x,
        });
    }
    while start < t1 {
        let field = |y: &Vec2| rhs(phase, y);
        let end_state = rk4(&field, x, t1 - start);
        if !end_state.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericBlowUp {
                t: start,
                last_good: x.to_vec(),
            });
        }
        let g_end = guard(phase, t1, &end_state);
        if !guard_violated(phase, g_end) {
            return Ok((end_state, phase));
        }
        let seg_start = start;
        let seg_x = x;
        let bracket = bisect_bracket(
            |t| guard(phase, t, &rk4(&field, seg_x, t - seg_start)),
            |g| guard_violated(phase, g),
            Bracket {
                lo: seg_start,
                hi: t1,
                g_lo: guard(phase, seg_start, &seg_x),
                g_hi: g_end,
            },
            cfg,
        )?;
        let mut t_event = bracket.interpolate();
        if t_event <= seg_start {
            t_event = bracket.hi;
        }
        x = rk4(&field, seg_x, t_event - seg_start);
        start = t_event;
        phase = phase.flipped();
        events += 1;
        on_event(SwitchEvent {
            t: start,
            phase,
            state: x,
        });
        if events > MAX_EVENTS_PER_STEP {
            return Err(Error::Domain(format!(
                "switch chattering near t = {start} s ({events} events in one step)"
            )));
        }
    }
    Ok((x, phase))
}

/// A converter advanced one grid step at a time.
pub trait Converter: Clone {
    /// Current simulation time (s).
    fn time(&self) -> f64;
    fn state_vec(&self) -> Vec2;
    /// Overwrites the continuous state, keeping the controller state.
    fn set_state_vec(&mut self, x: Vec2);
    /// Integrator grid step (s).
    fn step_size(&self) -> f64;
    /// Controller period: ramp period for the buck, clock period for the boost.
    fn control_period(&self) -> f64;
    /// Advances by exactly one grid step.
    fn step(&mut self) -> Result<()>;
}

/// What decides the buck switch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BuckDrive {
    /// Comparator on the converter's own error-integrator voltage.
    Integrator,
    /// Comparator on an externally supplied voltage, held over the step.
    External(f64),
    /// Comparator bypassed: ON for the first `duty` fraction of each ramp period.
    FixedDuty(f64),
}

#[derive(Debug, Clone)]
pub struct BuckSim {
    pub params: BuckParams,
    pub ramp: RampParams,
    pub integrator: IntegratorConfig,
    pub drive: BuckDrive,
    pub state: BuckState,
    pub phase: SwitchPhase,
    steps: u64,
    /// Grid steps that ended with negative inductor current.
    pub negative_current_steps: u64,
    /// Time spent in the ON phase (s), accumulated over all steps.
    pub on_time: f64,
    pub switch_count: u64,
}

impl BuckSim {
    pub fn new(
        params: BuckParams,
        ramp: RampParams,
        integrator: IntegratorConfig,
        drive: BuckDrive,
        initial: BuckState,
    ) -> Result<Self> {
        params.validate()?;
        ramp.validate()?;
        integrator.validate()?;
        let mut sim = BuckSim {
            params,
            ramp,
            integrator,
            drive,
            state: initial,
            phase: SwitchPhase::Off,
            steps: 0,
            negative_current_steps: 0,
            on_time: 0.0,
            switch_count: 0,
        };
        sim.phase = sim.rule(0.0, &initial.to_vec());
        Ok(sim)
    }

    fn rule(&self, t: f64, x: &Vec2) -> SwitchPhase {
        match self.drive {
            BuckDrive::Integrator => buck_switch_state(x[1], ramp_value(t, &self.ramp)),
            BuckDrive::External(v) => buck_switch_state(v, ramp_value(t, &self.ramp)),
            BuckDrive::FixedDuty(_) => {
                if guard_violated(SwitchPhase::On, self.guard(SwitchPhase::On, t, x)) {
                    SwitchPhase::Off
                } else {
                    SwitchPhase::On
                }
            }
        }
    }

    /// Signed switching function for the current phase (see [`guard_violated`]).
    fn guard(&self, phase: SwitchPhase, t: f64, x: &Vec2) -> f64 {
        let toward_off = match self.drive {
            BuckDrive::Integrator => x[1] - ramp_value(t, &self.ramp),
            BuckDrive::External(v) => v - ramp_value(t, &self.ramp),
            BuckDrive::FixedDuty(duty) => {
                let cycles = t * self.ramp.frequency + self.ramp.phase_offset;
                (cycles - cycles.floor()) - duty
            }
        };
        if phase.is_on() {
            toward_off
        } else {
            -toward_off
        }
    }

    /// Like [`Converter::step`], reporting every switching instant.
    pub fn step_with_events<E: FnMut(SwitchEvent)>(&mut self, mut on_event: E) -> Result<()> {
        let h = self.integrator.step;
        let t0 = self.steps as f64 * h;
        let t1 = (self.steps + 1) as f64 * h;
        let params = self.params;
        let mut on_time = 0.0;
        let mut last_t = t0;
        let mut last_phase = self.phase;
        let mut switches = 0u64;
        let (x, phase) = integrate_switched(
            self.state.to_vec(),
            self.phase,
            t0,
            t1,
            |ph, y| {
                let (a, b) = buck_rhs(&BuckState::from_vec(*y), &params, ph);
                [a, b]
            },
            |ph, t, y| self.guard(ph, t, y),
            &self.integrator,
            |ev| {
                if last_phase.is_on() {
                    on_time += ev.t - last_t;
                }
                last_t = ev.t;
                last_phase = ev.phase;
                switches += 1;
                on_event(ev);
            },
        )
        .map_err(|e| match e {
            Error::NumericBlowUp { last_good, .. } => Error::NumericBlowUp { t: t0, last_good },
            other => other,
        })?;
        if last_phase.is_on() {
            on_time += t1 - last_t;
        }
        self.on_time += on_time;
        self.switch_count += switches;
        self.state = BuckState::from_vec(x);
        self.phase = phase;
        self.steps += 1;
        if self.state.i < 0.0 {
            self.negative_current_steps += 1;
        }
        Ok(())
    }
}

impl Converter for BuckSim {
    fn time(&self) -> f64 {
        self.steps as f64 * self.integrator.step
    }

    fn state_vec(&self) -> Vec2 {
        self.state.to_vec()
    }

    fn set_state_vec(&mut self, x: Vec2) {
        self.state = BuckState::from_vec(x);
    }

    fn step_size(&self) -> f64 {
        self.integrator.step
    }

    fn control_period(&self) -> f64 {
        self.ramp.period()
    }

    fn step(&mut self) -> Result<()> {
        self.step_with_events(|_| {})
    }
}

#[derive(Debug, Clone)]
pub struct BoostSim {
    pub params: BoostParams,
    pub integrator: IntegratorConfig,
    pub state: BoostState,
    pub ctl: BoostControllerState,
    steps: u64,
    pub negative_current_steps: u64,
    pub switch_count: u64,
}

impl BoostSim {
    pub fn new(params: BoostParams, integrator: IntegratorConfig, initial: BoostState) -> Result<Self> {
        params.validate()?;
        integrator.validate()?;
        let ctl = boost_controller_step(BoostControllerState::default(), initial.i, 0.0, &params);
        Ok(BoostSim {
            params,
            integrator,
            state: initial,
            ctl,
            steps: 0,
            negative_current_steps: 0,
            switch_count: 0,
        })
    }

    /// Like [`Converter::step`], reporting every switching instant.
    pub fn step_with_events<E: FnMut(SwitchEvent)>(&mut self, mut on_event: E) -> Result<()> {
        let h = self.integrator.step;
        let t0 = self.steps as f64 * h;
        let t1 = (self.steps + 1) as f64 * h;
        let p = self.params;
        let mut x = self.state.to_vec();
        let mut ctl = self.ctl;
        let mut t = t0;
        let mut switches = 0u64;
        loop {
            let before = ctl;
            ctl = boost_controller_step(ctl, x[0], t, &p);
            // an edge that finds i >= I_ref leaves the switch open: no transition
            let closed_by_edge = before.phase == SwitchPhase::Off && ctl.phase == SwitchPhase::On;
            if closed_by_edge {
                switches += 1;
                on_event(SwitchEvent {
                    t,
                    phase: SwitchPhase::On,
                    state: x,
                });
            }
            if ctl.phase == SwitchPhase::Off && before.phase == SwitchPhase::On {
                switches += 1;
                on_event(SwitchEvent {
                    t,
                    phase: SwitchPhase::Off,
                    state: x,
                });
            }
            if t >= t1 {
                break;
            }
            let next_edge = (ctl.last_clock_index + 1) as f64 * p.t_clk;
            let seg_end = if next_edge < t1 { next_edge } else { t1 };
            let (nx, phase) = integrate_switched(
                x,
                ctl.phase,
                t,
                seg_end,
                |ph, y| {
                    let (a, b) = boost_rhs(&BoostState::from_vec(*y), &p, ph);
                    [a, b]
                },
                |ph, _, y| if ph.is_on() { y[0] - p.i_ref } else { -1.0 },
                &self.integrator,
                |ev| {
                    switches += 1;
                    on_event(ev);
                },
            )
            .map_err(|e| match e {
                Error::NumericBlowUp { last_good, .. } => Error::NumericBlowUp { t, last_good },
                other => other,
            })?;
            x = nx;
            ctl.phase = phase;
            t = seg_end;
        }
        self.state = BoostState::from_vec(x);
        self.ctl = ctl;
        self.steps += 1;
        self.switch_count += switches;
        if self.state.i < 0.0 {
            self.negative_current_steps += 1;
        }
        Ok(())
    }
}

impl Converter for BoostSim {
    fn time(&self) -> f64 {
        self.steps as f64 * self.integrator.step
    }

    fn state_vec(&self) -> Vec2 {
        self.state.to_vec()
    }

    fn set_state_vec(&mut self, x: Vec2) {
        self.state = BoostState::from_vec(x);
    }

    fn step_size(&self) -> f64 {
        self.integrator.step
    }

    fn control_period(&self) -> f64 {
        self.params.t_clk
    }

    fn step(&mut self) -> Result<()> {
        self.step_with_events(|_| {})
    }
}

/// Densely recorded trajectory: the state after every grid step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec2>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }
}

/// Runs `sim` for `duration` seconds, recording every grid step (including the initial state).
pub fn record<C: Converter>(sim: &mut C, duration: f64) -> Result<Trajectory> {
    let steps = steps_for(duration, sim.step_size());
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
    };
    traj.t.push(sim.time());
    traj.x.push(sim.state_vec());
    for _ in 0..steps {
        sim.step()?;
        traj.t.push(sim.time());
        traj.x.push(sim.state_vec());
    }
    Ok(traj)
}

/// Advances `sim` by `duration` seconds without recording.
pub fn run_for<C: Converter>(sim: &mut C, duration: f64) -> Result<()> {
    for _ in 0..steps_for(duration, sim.step_size()) {
        sim.step()?;
    }
    Ok(())
}

/// Number of grid steps covering `duration`, tolerant of rounding in the ratio.
pub(crate) fn steps_for(duration: f64, step: f64) -> usize {
    let ratio = duration / step;
    (ratio + 1e-9 * ratio.max(1.0)).floor().max(0.0) as usize
}
