//! Switching laws: the buck's ramp comparator and the boost's clocked
//! current-mode controller.

use crate::dynamics::{BoostParams, SwitchPhase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampShape {
    /// Rises over the first half period, falls over the second.
    Triangle,
    /// Rises over the full period, then resets.
    Sawtooth,
}

impl std::str::FromStr for RampShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triangle" => Ok(RampShape::Triangle),
            "sawtooth" => Ok(RampShape::Sawtooth),
            other => Err(Error::Domain(format!("unknown ramp shape `{other}`"))),
        }
    }
}

impl std::fmt::Display for RampShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RampShape::Triangle => "triangle",
            RampShape::Sawtooth => "sawtooth",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampParams {
    pub v_lower: f64,
    pub v_upper: f64,
    pub frequency: f64,
    pub shape: RampShape,
    /// Time shift as a fraction of the period, in `[0, 1)`.
    pub phase_offset: f64,
}

impl Default for RampParams {
    fn default() -> Self {
        RampParams {
            v_lower: 3.8,
            v_upper: 8.2,
            frequency: 2500.0,
            shape: RampShape::Triangle,
            phase_offset: 0.0,
        }
    }
}

impl RampParams {
    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_lower.is_finite() && self.v_upper.is_finite() && self.v_upper > self.v_lower) {
            return Err(Error::invalid("ramp.v_upper", "must exceed ramp.v_lower"));
        }
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(Error::invalid("ramp.frequency", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.phase_offset) {
            return Err(Error::invalid("ramp.phase_offset", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Ramp voltage at time `t`.
pub fn ramp_value(t: f64, ramp: &RampParams) -> f64 {
    let cycles = t * ramp.frequency + ramp.phase_offset;
    let frac = cycles - cycles.floor();
    let span = ramp.v_upper - ramp.v_lower;
    let unit = match ramp.shape {
        RampShape::Triangle => {
            if frac < 0.5 {
                2.0 * frac
            } else {
                2.0 - 2.0 * frac
            }
        }
        RampShape::Sawtooth => frac,
    };
    ramp.v_lower + span * unit
}

/// Buck comparator: ON iff the control voltage is strictly below the ramp.
pub fn buck_switch_state(v_cmp: f64, v_ramp: f64) -> SwitchPhase {
    if v_cmp < v_ramp {
        SwitchPhase::On
    } else {
        SwitchPhase::Off
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoostControllerState {
    pub phase: SwitchPhase,
    /// Index `n` of the last clock edge (at `n * t_clk`) that has been consumed.
    pub last_clock_index: u64,
}

impl Default for BoostControllerState {
    /// Switch closed by the clock edge at `t = 0`.
    fn default() -> Self {
        BoostControllerState {
            phase: SwitchPhase::On,
            last_clock_index: 0,
        }
    }
}

/// Index of the latest clock edge at or before `t`.
///
/// Times within `1e-9` of a clock period below an edge count as on the edge,
/// so that `n * t_clk` maps back to `n` despite rounding.
pub fn clock_index_at(t: f64, t_clk: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    let cycles = t / t_clk;
    let nearest = cycles.round();
    if (cycles - nearest).abs() <= 1e-9 {
        nearest as u64
    } else {
        cycles.floor() as u64
    }
}

/// Advances the current-mode state machine to time `t` given the inductor current `i`.
///
/// A clock edge newer than `last_clock_index` closes an open switch; edges
/// arriving while the switch is closed are consumed without effect. The
/// switch then opens if the current has reached `i_ref`.
pub fn boost_controller_step(
    ctl: BoostControllerState,
    i: f64,
    t: f64,
    params: &BoostParams,
) -> BoostControllerState {
    let mut next = ctl;
    let edge = clock_index_at(t, params.t_clk);
    if edge > next.last_clock_index {
        next.last_clock_index = edge;
        next.phase = SwitchPhase::On;
    }
    if next.phase.is_on() && i >= params.i_ref {
        next.phase = SwitchPhase::Off;
    }
    next
}
