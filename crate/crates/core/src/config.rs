//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, keys are dotted
//! (`buck.v_in = 60`). Unknown keys are rejected; missing keys keep their
//! defaults. When `integrator.step` is not given it follows `boost.t_clk / 2000`.

use std::fs;
use std::path::Path;

use crate::analysis::{LyapunovSettings, SweepParam, SweepSettings};
use crate::channel::ChannelModel;
use crate::control::RampShape;
use crate::defaults;
use crate::dynamics::{ConverterKind, IntegratorConfig};
use crate::error::{Error, Result};
use crate::link::{LinkConfig, MessageSource, ReceiverParam};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Ideal,
    Awgn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            kind: ChannelKind::Ideal,
            sigma: 0.0,
            seed: 42,
        }
    }
}

impl ChannelConfig {
    pub fn model(&self) -> ChannelModel {
        match self.kind {
            ChannelKind::Ideal => ChannelModel::Ideal,
            ChannelKind::Awgn => ChannelModel::Awgn {
                sigma: self.sigma,
                seed: self.seed,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Sine,
    Triangle,
    Silence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageConfig {
    pub kind: MessageKind,
    pub amplitude: f64,
    pub frequency: f64,
    /// Sine phase (rad).
    pub phase: f64,
}

impl Default for MessageConfig {
    fn default() -> Self {
        MessageConfig {
            kind: MessageKind::Sine,
            amplitude: 0.5,
            frequency: 50.0,
            phase: 0.0,
        }
    }
}

impl MessageConfig {
    pub fn source(&self) -> MessageSource {
        match self.kind {
            MessageKind::Sine => MessageSource::Sine {
                amplitude: self.amplitude,
                frequency: self.frequency,
                phase: self.phase,
            },
            MessageKind::Triangle => MessageSource::Triangle {
                amplitude: self.amplitude,
                frequency: self.frequency,
            },
            MessageKind::Silence => MessageSource::Silence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub parameter: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub transient_periods: usize,
    pub samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let (lo, hi, points) = defaults::BOOST_SWEEP;
        let s = SweepSettings::default();
        SweepConfig {
            parameter: SweepParam::BoostIref,
            lo,
            hi,
            points,
            transient_periods: s.transient_periods,
            samples: s.samples,
        }
    }
}

impl SweepConfig {
    pub fn settings(&self) -> SweepSettings {
        SweepSettings {
            transient_periods: self.transient_periods,
            samples: self.samples,
        }
    }
}

/// Lyapunov run; times are in controller periods of the chosen converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig {
    pub system: ConverterKind,
    pub epsilon0: f64,
    pub renorm_periods: f64,
    pub horizon_periods: f64,
    pub transient_periods: f64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            system: ConverterKind::Buck,
            epsilon0: 1e-6,
            renorm_periods: 1.0,
            horizon_periods: 1000.0,
            transient_periods: 100.0,
        }
    }
}

impl LyapunovConfig {
    pub fn settings(&self, period: f64) -> LyapunovSettings {
        LyapunovSettings {
            epsilon0: self.epsilon0,
            renorm_interval: self.renorm_periods * period,
            horizon: self.horizon_periods * period,
            transient: self.transient_periods * period,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityConfig {
    pub parameter: ReceiverParam,
    pub deltas: Vec<f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            parameter: ReceiverParam::BuckL,
            deltas: vec![-0.05, -0.02, -0.01, 0.0, 0.01, 0.02, 0.05],
        }
    }
}

/// Every setting a CLI run can depend on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub link: LinkConfig,
    pub channel: ChannelConfig,
    pub message: MessageConfig,
    pub sweep: SweepConfig,
    pub lyapunov: LyapunovConfig,
    pub sensitivity: SensitivityConfig,
}

trait Value: Sized {
    fn parse(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

impl Value for f64 {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{s}` is not a finite number"))
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

macro_rules! integer_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse(s: &str) -> std::result::Result<Self, String> {
                s.parse::<$t>().map_err(|_| format!("`{s}` is not a non-negative integer"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
integer_value!(u64, u32, usize);

impl Value for bool {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        s.parse::<bool>().map_err(|_| format!("`{s}` is not true or false"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Value for Vec<f64> {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|c| <f64 as Value>::parse(c.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(|v| v.render()).collect::<Vec<_>>().join(", ")
    }
}

/// Enumerations spelled by a fixed set of words.
macro_rules! word_value {
    ($t:ty { $($word:literal => $variant:expr),* $(,)? }) => {
        impl Value for $t {
            fn parse(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($word => Ok($variant),)*
                    _ => Err(format!("`{s}` is not one of: {}", [$($word),*].join(", "))),
                }
            }
            fn render(&self) -> String {
                $(if *self == $variant { return $word.to_string(); })*
                unreachable!()
            }
        }
    };
}

word_value!(RampShape { "triangle" => RampShape::Triangle, "sawtooth" => RampShape::Sawtooth });
word_value!(ChannelKind { "ideal" => ChannelKind::Ideal, "awgn" => ChannelKind::Awgn });
word_value!(MessageKind {
    "sine" => MessageKind::Sine,
    "triangle" => MessageKind::Triangle,
    "silence" => MessageKind::Silence,
});
word_value!(ConverterKind { "buck" => ConverterKind::Buck, "boost" => ConverterKind::Boost });
word_value!(SweepParam { "buck.v_in" => SweepParam::BuckVin, "boost.i_ref" => SweepParam::BoostIref });

impl Value for ReceiverParam {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        s.parse().map_err(|e: Error| e.to_string())
    }
    fn render(&self) -> String {
        self.name().to_string()
    }
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+;)*) => {
        /// All recognised keys, in the order [`save_config`] writes them.
        pub const KEYS: &[&str] = &[$($key),*];

        fn set_field(cfg: &mut RunConfig, key: &str, value: &str) -> Option<std::result::Result<(), String>> {
            match key {
                $($key => Some(Value::parse(value).map(|v| cfg$(.$field)+ = v)),)*
                _ => None,
            }
        }

        fn field_entries(cfg: &RunConfig) -> Vec<(&'static str, String)> {
            vec![$(($key, cfg$(.$field)+.render())),*]
        }
    };
}

config_keys! {
    "buck.v_in" => link.buck.v_in;
    "buck.l" => link.buck.l;
    "buck.c" => link.buck.c;
    "buck.r_l" => link.buck.r_l;
    "buck.r1" => link.buck.r1;
    "buck.r2" => link.buck.r2;
    "buck.r_sense" => link.buck.r_sense;
    "boost.v_in" => link.boost.v_in;
    "boost.l" => link.boost.l;
    "boost.c" => link.boost.c;
    "boost.r" => link.boost.r;
    "boost.i_ref" => link.boost.i_ref;
    "boost.t_clk" => link.boost.t_clk;
    "ramp.v_lower" => link.ramp.v_lower;
    "ramp.v_upper" => link.ramp.v_upper;
    "ramp.frequency" => link.ramp.frequency;
    "ramp.shape" => link.ramp.shape;
    "ramp.phase_offset" => link.ramp.phase_offset;
    "gains.g1" => link.gains.g1;
    "gains.g2" => link.gains.g2;
    "integrator.step" => link.integrator.step;
    "integrator.event_tolerance" => link.integrator.event_tolerance;
    "integrator.max_bisections" => link.integrator.max_bisections;
    "link.duration" => link.duration;
    "link.sample_step" => link.sample_step;
    "link.transient_cut" => link.transient_cut;
    "link.rx_seeded" => link.rx_seeded;
    "tx.buck.i" => link.tx_initial.buck.i;
    "tx.buck.v_io" => link.tx_initial.buck.v_io;
    "tx.boost.i" => link.tx_initial.boost.i;
    "tx.boost.v_c" => link.tx_initial.boost.v_c;
    "rx.buck.i" => link.rx_initial.buck.i;
    "rx.buck.v_io" => link.rx_initial.buck.v_io;
    "rx.boost.i" => link.rx_initial.boost.i;
    "rx.boost.v_c" => link.rx_initial.boost.v_c;
    "channel.kind" => channel.kind;
    "channel.sigma" => channel.sigma;
    "channel.seed" => channel.seed;
    "message.kind" => message.kind;
    "message.amplitude" => message.amplitude;
    "message.frequency" => message.frequency;
    "message.phase" => message.phase;
    "sweep.parameter" => sweep.parameter;
    "sweep.lo" => sweep.lo;
    "sweep.hi" => sweep.hi;
    "sweep.points" => sweep.points;
    "sweep.transient_periods" => sweep.transient_periods;
    "sweep.samples" => sweep.samples;
    "lyapunov.system" => lyapunov.system;
    "lyapunov.epsilon0" => lyapunov.epsilon0;
    "lyapunov.renorm_periods" => lyapunov.renorm_periods;
    "lyapunov.horizon_periods" => lyapunov.horizon_periods;
    "lyapunov.transient_periods" => lyapunov.transient_periods;
    "sensitivity.parameter" => sensitivity.parameter;
    "sensitivity.deltas" => sensitivity.deltas;
}

fn invalid_to_config(err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } => Error::ConfigValue { key: name, message: reason },
        other => other,
    }
}

fn config_value(key: &str, message: impl Into<String>) -> Error {
    Error::ConfigValue {
        key: key.to_string(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match set_field(self, key, value.trim()) {
            None => Err(config_value(key, "unknown key")),
            Some(Err(message)) => Err(config_value(key, message)),
            Some(Ok(())) => Ok(()),
        }
    }

    /// `(key, value)` for every setting, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        field_entries(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate().map_err(invalid_to_config)?;
        self.channel.model().validate().map_err(invalid_to_config)?;
        self.message.source().validate().map_err(invalid_to_config)?;
        let s = &self.sweep;
        if !(s.lo < s.hi) {
            return Err(config_value("sweep.hi", "must exceed sweep.lo"));
        }
        if s.points < 2 {
            return Err(config_value("sweep.points", "must be at least 2"));
        }
        if s.samples == 0 {
            return Err(config_value("sweep.samples", "must be at least 1"));
        }
        let l = &self.lyapunov;
        if !(l.epsilon0 > 0.0) {
            return Err(config_value("lyapunov.epsilon0", "must be > 0"));
        }
        if !(l.renorm_periods > 0.0) {
            return Err(config_value("lyapunov.renorm_periods", "must be > 0"));
        }
        if !(l.horizon_periods >= l.renorm_periods) {
            return Err(config_value(
                "lyapunov.horizon_periods",
                "must be at least lyapunov.renorm_periods",
            ));
        }
        if !(l.transient_periods >= 0.0) {
            return Err(config_value("lyapunov.transient_periods", "must be >= 0"));
        }
        if self.sensitivity.deltas.iter().any(|d| *d <= -1.0) {
            return Err(config_value("sensitivity.deltas", "every delta must exceed -1"));
        }
        Ok(())
    }
}

fn split_line(raw: &str) -> Option<&str> {
    let line = raw.split('#').next().unwrap_or("").trim();
    (!line.is_empty()).then_some(line)
}

/// Parses config text, then applies `overrides` (`key=value`) in order, then validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut step_given = false;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let Some(line) = split_line(raw) else { continue };
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigParse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        cfg.set(key, value).map_err(|e| match e {
            Error::ConfigValue { key, message } => Error::ConfigParse {
                line: line_no,
                message: format!("`{key}`: {message}"),
            },
            other => other,
        })?;
        step_given |= key == "integrator.step";
    }
    for ov in overrides {
        let Some((key, value)) = ov.split_once('=') else {
            return Err(config_value(ov, "override must look like key=value"));
        };
        let key = key.trim();
        cfg.set(key, value)?;
        step_given |= key == "integrator.step";
    }
    if !step_given {
        cfg.link.integrator.step = IntegratorConfig::for_period(cfg.link.boost.t_clk).step;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

/// Renders every setting, one `key = value` line each.
pub fn config_to_string(cfg: &RunConfig) -> String {
    let mut out = String::from("# chaosmask run configuration\n");
    for (key, value) in cfg.entries() {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    }
    out
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    fs::write(path, config_to_string(cfg))?;
    Ok(())
}
