//! The masking link: transmitter, channel and receiver advanced in lockstep.
//!
//! At every integrator step the transmitter forms the composite
//! `g1 * v_io + g2 * v_c + s(t)` from its buck error-integrator voltage and
//! boost capacitor voltage. The composite drives the transmitter's own buck
//! comparator and is sent through the channel. The receiver feeds the
//! received composite to its buck comparator, runs its boost from the shared
//! clock, and subtracts its regenerated mask from the received composite.
//!
//! The composite is exchanged once per step and held over the step at both
//! ends, so with an ideal channel both buck comparators see bit-identical
//! inputs.

use crate::channel::ChannelModel;
use crate::control::RampParams;
use crate::dynamics::{BoostParams, BoostState, BuckParams, BuckState, IntegratorConfig};
use crate::error::{Error, Result};
use crate::sim::{steps_for, BoostSim, BuckDrive, BuckSim, Converter};
use crate::waveform::Waveform;

#[derive(Debug, Clone, PartialEq)]
pub enum MessageSource {
    Sine { amplitude: f64, frequency: f64, phase: f64 },
    /// Zero-mean symmetric triangle, rising from 0 to `amplitude` over the first quarter period.
    Triangle { amplitude: f64, frequency: f64 },
    /// Linearly interpolated samples starting at `t = 0`.
    Samples { step: f64, values: Vec<f64> },
    Silence,
}

impl MessageSource {
    pub fn validate(&self) -> Result<()> {
        let check_wave = |amplitude: f64, frequency: f64| {
            if !(amplitude.is_finite() && amplitude >= 0.0) {
                return Err(Error::invalid("message.amplitude", "must be finite and >= 0"));
            }
            if !(frequency.is_finite() && frequency > 0.0) {
                return Err(Error::invalid("message.frequency", "must be > 0"));
            }
            Ok(())
        };
        match self {
            MessageSource::Sine {
                amplitude,
                frequency,
                phase,
            } => {
                check_wave(*amplitude, *frequency)?;
                if !phase.is_finite() {
                    return Err(Error::invalid("message.phase", "must be finite"));
                }
                Ok(())
            }
            MessageSource::Triangle {
                amplitude,
                frequency,
            } => check_wave(*amplitude, *frequency),
            MessageSource::Samples { step, values } => {
                if !(step.is_finite() && *step > 0.0) {
                    return Err(Error::invalid("message.step", "must be > 0"));
                }
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("message.values", "must be non-empty and finite"));
                }
                Ok(())
            }
            MessageSource::Silence => Ok(()),
        }
    }
}

/// Message value at time `t`.
pub fn message_value(src: &MessageSource, t: f64) -> Result<f64> {
    match src {
        MessageSource::Sine {
            amplitude,
            frequency,
            phase,
        } => Ok(amplitude * (std::f64::consts::TAU * frequency * t + phase).sin()),
        MessageSource::Triangle {
            amplitude,
            frequency,
        } => {
            let cycles = t * frequency;
            let frac = cycles - cycles.floor();
            let unit = if frac < 0.25 {
                4.0 * frac
            } else if frac < 0.75 {
                2.0 - 4.0 * frac
            } else {
                4.0 * frac - 4.0
            };
            Ok(amplitude * unit)
        }
        MessageSource::Samples { step, values } => {
            let last = (values.len().saturating_sub(1)) as f64 * step;
            if !(0.0..=last).contains(&t) || values.is_empty() {
                return Err(Error::Domain(format!(
                    "t = {t} s outside the sampled message [0, {last}]"
                )));
            }
            let pos = t / step;
            let k = (pos.floor() as usize).min(values.len() - 1);
            if k + 1 >= values.len() {
                return Ok(values[k]);
            }
            let w = pos - k as f64;
            Ok(values[k] + w * (values[k + 1] - values[k]))
        }
        MessageSource::Silence => Ok(0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskingGains {
    pub g1: f64,
    pub g2: f64,
}

impl Default for MaskingGains {
    fn default() -> Self {
        MaskingGains { g1: 1.0, g2: 1.0 }
    }
}

impl MaskingGains {
    pub fn validate(&self) -> Result<()> {
        if !self.g1.is_finite() {
            return Err(Error::invalid("gains.g1", "must be finite"));
        }
        if !self.g2.is_finite() {
            return Err(Error::invalid("gains.g2", "must be finite"));
        }
        Ok(())
    }

    /// The chaotic mask `g1 * x1 + g2 * x2`.
    pub fn mask(&self, x1: f64, x2: f64) -> f64 {
        self.g1 * x1 + self.g2 * x2
    }
}

/// `g1 * x1 + g2 * x2 + s`, evaluated as `mask + s`.
pub fn compose_masked(x1: f64, x2: f64, s: f64, gains: &MaskingGains) -> f64 {
    gains.mask(x1, x2) + s
}

/// Continuous starting state of one end of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialState {
    pub buck: BuckState,
    pub boost: BoostState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub buck: BuckParams,
    pub boost: BoostParams,
    pub ramp: RampParams,
    pub gains: MaskingGains,
    pub integrator: IntegratorConfig,
    /// Simulated time (s).
    pub duration: f64,
    /// Spacing of the emitted waveforms (s); a whole multiple of the integrator step.
    pub sample_step: f64,
    /// Samples before this time are excluded from recovery metrics (s).
    pub transient_cut: f64,
    pub tx_initial: InitialState,
    pub rx_initial: InitialState,
    /// Start the receiver from the transmitter's initial state instead of `rx_initial`.
    pub rx_seeded: bool,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.buck.validate()?;
        self.boost.validate()?;
        self.ramp.validate()?;
        self.gains.validate()?;
        self.integrator.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid("link.duration", "must be > 0"));
        }
        if !(self.transient_cut.is_finite()
            && self.transient_cut >= 0.0
            && self.transient_cut < self.duration)
        {
            return Err(Error::invalid(
                "link.transient_cut",
                "must satisfy 0 <= transient_cut < duration",
            ));
        }
        if !(self.sample_step.is_finite() && self.sample_step >= self.integrator.step) {
            return Err(Error::invalid(
                "link.sample_step",
                "must be at least integrator.step",
            ));
        }
        let ratio = self.sample_step / self.integrator.step;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(Error::invalid(
                "link.sample_step",
                "must be a whole multiple of integrator.step",
            ));
        }
        for (name, st) in [("tx", &self.tx_initial), ("rx", &self.rx_initial)] {
            let vals = [st.buck.i, st.buck.v_io, st.boost.i, st.boost.v_c];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(name, "initial state must be finite"));
            }
        }
        Ok(())
    }

    pub(crate) fn steps_per_sample(&self) -> usize {
        (self.sample_step / self.integrator.step).round() as usize
    }
}

/// One end of the link: a composite-driven buck and a clock-driven boost.
#[derive(Debug, Clone)]
pub struct EndState {
    pub buck: BuckSim,
    pub boost: BoostSim,
}

impl EndState {
    pub fn new(
        buck: BuckParams,
        boost: BoostParams,
        ramp: RampParams,
        integrator: IntegratorConfig,
        initial: InitialState,
    ) -> Result<Self> {
        Ok(EndState {
            buck: BuckSim::new(buck, ramp, integrator, BuckDrive::External(0.0), initial.buck)?,
            boost: BoostSim::new(boost, integrator, initial.boost)?,
        })
    }

    pub fn time(&self) -> f64 {
        self.buck.time()
    }

    /// `(i, v_io, I, v_c)`.
    pub fn state4(&self) -> [f64; 4] {
        [
            self.buck.state.i,
            self.buck.state.v_io,
            self.boost.state.i,
            self.boost.state.v_c,
        ]
    }

    pub fn mask(&self, gains: &MaskingGains) -> f64 {
        gains.mask(self.buck.state.v_io, self.boost.state.v_c)
    }

    /// Advances both converters one step with the buck comparator held at `v_cmp`.
    fn advance(&mut self, v_cmp: f64) -> Result<()> {
        self.buck.drive = BuckDrive::External(v_cmp);
        self.buck.step()?;
        self.boost.step()
    }

    pub fn negative_current_steps(&self) -> u64 {
        self.buck.negative_current_steps + self.boost.negative_current_steps
    }
}

/// Forms the composite at the transmitter's current time and advances it one step.
///
/// Returns the composite that was transmitted for this step.
pub fn transmitter_step(
    tx: &mut EndState,
    gains: &MaskingGains,
    src: &MessageSource,
) -> Result<f64> {
    let s = message_value(src, tx.time())?;
    let composite = tx.mask(gains) + s;
    tx.advance(composite)?;
    Ok(composite)
}

/// Subtracts the receiver's regenerated mask from the received composite and
/// advances the receiver one step driven by that composite.
///
/// Returns the recovered message sample for this step.
pub fn receiver_step(rx: &mut EndState, gains: &MaskingGains, composite_received: f64) -> Result<f64> {
    let recovered = composite_received - rx.mask(gains);
    rx.advance(composite_received)?;
    Ok(recovered)
}

/// A receiver parameter that can be perturbed for mismatch studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReceiverParam {
    BuckVin,
    BuckL,
    BuckC,
    BuckRl,
    BuckR1,
    BuckR2,
    BoostVin,
    BoostL,
    BoostC,
    BoostR,
    BoostIref,
}

impl ReceiverParam {
    pub const ALL: [ReceiverParam; 11] = [
        ReceiverParam::BuckVin,
        ReceiverParam::BuckL,
        ReceiverParam::BuckC,
        ReceiverParam::BuckRl,
        ReceiverParam::BuckR1,
        ReceiverParam::BuckR2,
        ReceiverParam::BoostVin,
        ReceiverParam::BoostL,
        ReceiverParam::BoostC,
        ReceiverParam::BoostR,
        ReceiverParam::BoostIref,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverParam::BuckVin => "buck.v_in",
            ReceiverParam::BuckL => "buck.l",
            ReceiverParam::BuckC => "buck.c",
            ReceiverParam::BuckRl => "buck.r_l",
            ReceiverParam::BuckR1 => "buck.r1",
            ReceiverParam::BuckR2 => "buck.r2",
            ReceiverParam::BoostVin => "boost.v_in",
            ReceiverParam::BoostL => "boost.l",
            ReceiverParam::BoostC => "boost.c",
            ReceiverParam::BoostR => "boost.r",
            ReceiverParam::BoostIref => "boost.i_ref",
        }
    }

    fn slot<'a>(self, buck: &'a mut BuckParams, boost: &'a mut BoostParams) -> &'a mut f64 {
        match self {
            ReceiverParam::BuckVin => &mut buck.v_in,
            ReceiverParam::BuckL => &mut buck.l,
            ReceiverParam::BuckC => &mut buck.c,
            ReceiverParam::BuckRl => &mut buck.r_l,
            ReceiverParam::BuckR1 => &mut buck.r1,
            ReceiverParam::BuckR2 => &mut buck.r2,
            ReceiverParam::BoostVin => &mut boost.v_in,
            ReceiverParam::BoostL => &mut boost.l,
            ReceiverParam::BoostC => &mut boost.c,
            ReceiverParam::BoostR => &mut boost.r,
            ReceiverParam::BoostIref => &mut boost.i_ref,
        }
    }
}

impl std::str::FromStr for ReceiverParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReceiverParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown receiver parameter `{s}`")))
    }
}

impl std::fmt::Display for ReceiverParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scales one receiver parameter by `1 + delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamOverride {
    pub param: ReceiverParam,
    pub delta: f64,
}

impl ParamOverride {
    pub fn apply(&self, buck: &mut BuckParams, boost: &mut BoostParams) {
        *self.param.slot(buck, boost) *= 1.0 + self.delta;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkResult {
    pub composite: Waveform,
    pub recovered: Waveform,
    pub message: Waveform,
    /// Euclidean distance between the two ends' `(i, v_io, I, v_c)`.
    pub sync_error: Waveform,
    /// Receiver mask minus transmitter mask, `g1 dv_io + g2 dv_c`.
    pub mask_error: Waveform,
    /// Grid steps ending with negative inductor current (transmitter, receiver).
    pub negative_current_steps: (u64, u64),
}

fn distance4(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Builds both ends from `cfg` and runs the link over `cfg.duration`.
pub fn run_link(
    cfg: &LinkConfig,
    src: &MessageSource,
    channel: &ChannelModel,
    rx_param_override: Option<ParamOverride>,
) -> Result<LinkResult> {
    cfg.validate()?;
    let tx = EndState::new(cfg.buck, cfg.boost, cfg.ramp, cfg.integrator, cfg.tx_initial)?;
    let (mut rx_buck, mut rx_boost) = (cfg.buck, cfg.boost);
    if let Some(ov) = rx_param_override {
        ov.apply(&mut rx_buck, &mut rx_boost);
    }
    let rx_initial = if cfg.rx_seeded {
        cfg.tx_initial
    } else {
        cfg.rx_initial
    };
    let rx = EndState::new(rx_buck, rx_boost, cfg.ramp, cfg.integrator, rx_initial)?;
    run_link_from(cfg, tx, rx, src, channel)
}

/// Runs the link from explicitly constructed ends. Both must be at `t = 0`.
pub fn run_link_from(
    cfg: &LinkConfig,
    mut tx: EndState,
    mut rx: EndState,
    src: &MessageSource,
    channel: &ChannelModel,
) -> Result<LinkResult> {
    cfg.validate()?;
    src.validate()?;
    channel.validate()?;
    let steps = steps_for(cfg.duration, cfg.integrator.step);
    let every = cfg.steps_per_sample();
    let n_samples = steps / every;
    let mut composite = Vec::with_capacity(n_samples);
    let mut recovered = Vec::with_capacity(n_samples);
    let mut message = Vec::with_capacity(n_samples);
    let mut sync_error = Vec::with_capacity(n_samples);
    let mut mask_error = Vec::with_capacity(n_samples);
    for k in 0..steps {
        let record = k % every == 0 && composite.len() < n_samples;
        if record {
            sync_error.push(distance4(tx.state4(), rx.state4()));
            mask_error.push(rx.mask(&cfg.gains) - tx.mask(&cfg.gains));
            message.push(message_value(src, tx.time())?);
        }
        let sent = transmitter_step(&mut tx, &cfg.gains, src)?;
        let received = channel.apply(sent, k as u64);
        let rec = receiver_step(&mut rx, &cfg.gains, received)?;
        if record {
            composite.push(sent);
            recovered.push(rec);
        }
    }
    let wf = |samples| Waveform::new(0.0, cfg.sample_step, samples);
    Ok(LinkResult {
        composite: wf(composite)?,
        recovered: wf(recovered)?,
        message: wf(message)?,
        sync_error: wf(sync_error)?,
        mask_error: wf(mask_error)?,
        negative_current_steps: (tx.negative_current_steps(), rx.negative_current_steps()),
    })
}
