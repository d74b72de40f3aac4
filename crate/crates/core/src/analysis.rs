//! Nonlinear-dynamics and link-quality instrumentation.
//!
//! Stroboscopic sampling, bifurcation sweeps, two-trajectory Lyapunov
//! estimates, sensitive-dependence checks, recovery metrics and receiver
//! mismatch studies. Every sweep point or mismatch delta is an isolated
//! deterministic simulation; parallel evaluation preserves input order.

use rayon::prelude::*;

use crate::channel::ChannelModel;
use crate::control::RampParams;
use crate::dynamics::{
    BoostParams, BoostState, BuckParams, BuckState, ConverterKind, IntegratorConfig, Vec2,
};
use crate::error::{Error, Result};
use crate::link::{
    run_link, transmitter_step, EndState, LinkConfig, MessageSource, ParamOverride, ReceiverParam,
};
use crate::sim::{run_for, steps_for, BoostSim, BuckDrive, BuckSim, Converter, Trajectory};
use crate::waveform::Waveform;

/// Stroboscopic sample times `transient_cut + offset + n * period` that fit in `duration`.
pub fn sample_times(duration: f64, transient_cut: f64, period: f64, offset: f64) -> Vec<f64> {
    let span = duration - transient_cut - offset;
    if span < 0.0 {
        return Vec::new();
    }
    let ratio = span / period;
    let n = (ratio + 1e-9 * ratio.max(1.0)).floor() as usize;
    (0..=n)
        .map(|k| transient_cut + offset + k as f64 * period)
        .collect()
}

fn lerp(a: Vec2, b: Vec2, w: f64) -> Vec2 {
    [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
}

/// States at `t = transient_cut + offset + n * period`, linearly interpolated
/// between the two bracketing grid points of a recorded trajectory.
pub fn poincare_sample(
    traj: &Trajectory,
    period: f64,
    offset: f64,
    transient_cut: f64,
) -> Result<Vec<Vec2>> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Domain("stroboscopic period must be > 0".into()));
    }
    if traj.t.len() < 2 {
        return Err(Error::Domain("trajectory too short to sample".into()));
    }
    let t_start = traj.t[0];
    let duration = traj.duration() - t_start;
    let h = traj.t[1] - traj.t[0];
    let last = traj.t.len() - 1;
    Ok(sample_times(duration, transient_cut, period, offset)
        .into_iter()
        .map(|ts| {
            let pos = (ts / h).max(0.0);
            let k = (pos.floor() as usize).min(last);
            if k == last {
                return traj.x[last];
            }
            let w = ((ts + t_start) - traj.t[k]) / (traj.t[k + 1] - traj.t[k]);
            lerp(traj.x[k], traj.x[k + 1], w.clamp(0.0, 1.0))
        })
        .collect())
}

/// Streams `sim` forward and returns `count` stroboscopic states, the first
/// taken at `sim.time() + transient_cut + offset`.
pub fn stroboscopic_run<C: Converter>(
    sim: &mut C,
    transient_cut: f64,
    period: f64,
    offset: f64,
    count: usize,
) -> Result<Vec<Vec2>> {
    let h = sim.step_size();
    let t_start = sim.time();
    let mut out = Vec::with_capacity(count);
    let mut prev_t = sim.time();
    let mut prev_x = sim.state_vec();
    for n in 0..count {
        let target = t_start + transient_cut + offset + n as f64 * period;
        while sim.time() < target - 1e-9 * h {
            prev_t = sim.time();
            prev_x = sim.state_vec();
            sim.step()?;
        }
        let (t1, x1) = (sim.time(), sim.state_vec());
        if (t1 - target).abs() <= 1e-9 * h || t1 == prev_t {
            out.push(x1);
        } else {
            out.push(lerp(prev_x, x1, (target - prev_t) / (t1 - prev_t)));
        }
    }
    Ok(out)
}

/// Number of clusters among `values` when consecutive sorted values closer
/// than `rel_tol * max(|a|, |b|)` are merged.
pub fn count_clusters(values: &[f64], rel_tol: f64) -> usize {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return 0;
    }
    sorted.sort_by(f64::total_cmp);
    1 + sorted
        .windows(2)
        .filter(|w| w[1] - w[0] > rel_tol * w[0].abs().max(w[1].abs()))
        .count()
}

/// Swept parameter of a standalone converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    BuckVin,
    BoostIref,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::BuckVin => "buck.v_in",
            SweepParam::BoostIref => "boost.i_ref",
        }
    }

    pub fn system(self) -> ConverterKind {
        match self {
            SweepParam::BuckVin => ConverterKind::Buck,
            SweepParam::BoostIref => ConverterKind::Boost,
        }
    }

    /// Resolves a parameter name for the given converter; only whitelisted names are accepted.
    pub fn parse(system: ConverterKind, name: &str) -> Result<Self> {
        let short = name.rsplit('.').next().unwrap_or(name);
        match (system, short) {
            (ConverterKind::Buck, "v_in") => Ok(SweepParam::BuckVin),
            (ConverterKind::Boost, "i_ref") => Ok(SweepParam::BoostIref),
            _ => Err(Error::Domain(format!(
                "parameter `{name}` cannot be swept for {system:?}"
            ))),
        }
    }
}

/// Everything needed to build a standalone converter simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConverterSetup {
    pub buck: BuckParams,
    pub ramp: RampParams,
    pub boost: BoostParams,
    pub buck_initial: BuckState,
    pub boost_initial: BoostState,
    /// Integrator override; `None` uses `period / 2000` of the simulated converter.
    pub integrator: Option<IntegratorConfig>,
}

impl ConverterSetup {
    pub fn buck_sim(&self) -> Result<BuckSim> {
        let integ = self
            .integrator
            .unwrap_or_else(|| IntegratorConfig::for_period(self.ramp.period()));
        BuckSim::new(self.buck, self.ramp, integ, BuckDrive::Integrator, self.buck_initial)
    }

    pub fn boost_sim(&self) -> Result<BoostSim> {
        let integ = self
            .integrator
            .unwrap_or_else(|| IntegratorConfig::for_period(self.boost.t_clk));
        BoostSim::new(self.boost, integ, self.boost_initial)
    }

    fn with_param(&self, param: SweepParam, value: f64) -> Self {
        let mut s = self.clone();
        match param {
            SweepParam::BuckVin => s.buck.v_in = value,
            SweepParam::BoostIref => s.boost.i_ref = value,
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationPoint {
    pub value: f64,
    /// Stroboscopic samples of the recorded component (buck `v_io`, boost `i`).
    pub samples: Vec<f64>,
    /// Set when the simulation at this value failed; `samples` is then empty.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationData {
    pub parameter: String,
    pub points: Vec<BifurcationPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    /// Controller periods discarded before sampling.
    pub transient_periods: usize,
    /// Stroboscopic samples kept per parameter value.
    pub samples: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            transient_periods: DEFAULT_TRANSIENT_PERIODS,
            samples: 200,
        }
    }
}

/// Controller periods discarded as transient by default.
pub const DEFAULT_TRANSIENT_PERIODS: usize = 100;

/// Evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Stroboscopic samples of one converter at one parameter setting.
pub fn stroboscopic_component(
    setup: &ConverterSetup,
    system: ConverterKind,
    settings: &SweepSettings,
) -> Result<Vec<f64>> {
    match system {
        ConverterKind::Buck => {
            let mut sim = setup.buck_sim()?;
            let period = sim.control_period();
            let pts = stroboscopic_run(
                &mut sim,
                settings.transient_periods as f64 * period,
                period,
                0.0,
                settings.samples,
            )?;
            Ok(pts.into_iter().map(|x| x[1]).collect())
        }
        ConverterKind::Boost => {
            let mut sim = setup.boost_sim()?;
            let period = sim.control_period();
            let pts = stroboscopic_run(
                &mut sim,
                settings.transient_periods as f64 * period,
                period,
                0.0,
                settings.samples,
            )?;
            Ok(pts.into_iter().map(|x| x[0]).collect())
        }
    }
}

/// Sweeps `param` over `n_points` values in `[lo, hi]`, each from a fresh simulation.
pub fn bifurcation_sweep(
    base: &ConverterSetup,
    param: SweepParam,
    lo: f64,
    hi: f64,
    n_points: usize,
    settings: &SweepSettings,
) -> Result<BifurcationData> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain(format!("sweep range requires lo < hi, got [{lo}, {hi}]")));
    }
    if n_points < 2 {
        return Err(Error::Domain("sweep needs at least 2 points".into()));
    }
    let points = linspace(lo, hi, n_points)
        .into_par_iter()
        .map(|value| {
            let setup = base.with_param(param, value);
            match stroboscopic_component(&setup, param.system(), settings) {
                Ok(samples) => BifurcationPoint {
                    value,
                    samples,
                    failure: None,
                },
                Err(e) => BifurcationPoint {
                    value,
                    samples: Vec::new(),
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(BifurcationData {
        parameter: param.name().to_string(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSettings {
    /// Initial and renormalized separation (Euclidean, mixed units).
    pub epsilon0: f64,
    pub renorm_interval: f64,
    pub horizon: f64,
    pub transient: f64,
}

fn norm2(a: Vec2, b: Vec2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Largest Lyapunov exponent (1/s) by two-trajectory renormalization.
///
/// After the transient, a companion trajectory is started `epsilon0` away
/// along `(1, 1)/sqrt(2)`. Every `renorm_interval` the growth
/// `log(d / epsilon0)` is accumulated and the companion is restarted from the
/// reference at separation `epsilon0` in the current direction, sharing the
/// reference's controller state.
pub fn lyapunov_estimate<C: Converter>(mut sim: C, settings: &LyapunovSettings) -> Result<f64> {
    let LyapunovSettings {
        epsilon0,
        renorm_interval,
        horizon,
        transient,
    } = *settings;
    if !(epsilon0 > 0.0 && renorm_interval > 0.0 && horizon >= renorm_interval) {
        return Err(Error::Domain(
            "lyapunov requires epsilon0 > 0 and horizon >= renorm_interval > 0".into(),
        ));
    }
    run_for(&mut sim, transient)?;
    let steps_per_interval = steps_for(renorm_interval, sim.step_size()).max(1);
    let intervals = steps_for(horizon, renorm_interval).max(1);
    let interval_time = steps_per_interval as f64 * sim.step_size();
    let mut dir = [std::f64::consts::FRAC_1_SQRT_2; 2];
    let mut sum_log = 0.0;
    for _ in 0..intervals {
        let x = sim.state_vec();
        let mut companion = sim.clone();
        companion.set_state_vec([x[0] + epsilon0 * dir[0], x[1] + epsilon0 * dir[1]]);
        for _ in 0..steps_per_interval {
            sim.step()?;
            companion.step()?;
        }
        let (a, b) = (sim.state_vec(), companion.state_vec());
        let d = norm2(a, b);
        if !d.is_finite() {
            return Err(Error::NumericBlowUp {
                t: sim.time(),
                last_good: a.to_vec(),
            });
        }
        if d > 0.0 {
            sum_log += (d / epsilon0).ln();
            dir = [(b[0] - a[0]) / d, (b[1] - a[1]) / d];
        } else {
            // collapsed onto the reference: maximal contraction within float resolution
            sum_log += (f64::EPSILON * a[0].abs().max(a[1].abs()).max(1.0) / epsilon0).ln();
        }
    }
    Ok(sum_log / (intervals as f64 * interval_time))
}

/// Growth of a small transmitter perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    pub initial_offset: f64,
    pub max_distance: f64,
    /// First time (relative to the perturbation) at which the distance exceeded `100 * initial_offset`.
    pub time_to_100x: Option<f64>,
}

impl DivergenceReport {
    pub fn growth(&self) -> f64 {
        self.max_distance / self.initial_offset
    }
}

/// Runs two transmitters that differ by `offset` in `v_io` after `warmup`
/// seconds and tracks their `(i, v_io, I, v_c)` distance over `horizon`.
pub fn transmitter_divergence(
    cfg: &LinkConfig,
    src: &MessageSource,
    offset: f64,
    warmup: f64,
    horizon: f64,
) -> Result<DivergenceReport> {
    cfg.validate()?;
    let mut a = EndState::new(cfg.buck, cfg.boost, cfg.ramp, cfg.integrator, cfg.tx_initial)?;
    for _ in 0..steps_for(warmup, cfg.integrator.step) {
        transmitter_step(&mut a, &cfg.gains, src)?;
    }
    let mut b = a.clone();
    b.buck.state.v_io += offset;
    let mut report = DivergenceReport {
        initial_offset: offset.abs(),
        max_distance: 0.0,
        time_to_100x: None,
    };
    let h = cfg.integrator.step;
    for k in 0..steps_for(horizon, h) {
        transmitter_step(&mut a, &cfg.gains, src)?;
        transmitter_step(&mut b, &cfg.gains, src)?;
        let d = a
            .state4()
            .iter()
            .zip(b.state4())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        report.max_distance = report.max_distance.max(d);
        if report.time_to_100x.is_none() && d > 100.0 * report.initial_offset {
            report.time_to_100x = Some((k + 1) as f64 * h);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryMetrics {
    pub rmse: f64,
    /// `rmse / rms(message)`; NaN when the message is silent.
    pub relative_rmse: f64,
    /// Pearson correlation; NaN when either signal is constant.
    pub correlation: f64,
    /// `20 log10(rms(message) / rmse)`; `+inf` when `rmse == 0`.
    pub snr_db: f64,
}

impl RecoveryMetrics {
    pub fn snr_is_infinite(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn message_is_silent(&self) -> bool {
        self.relative_rmse.is_nan()
    }
}

pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Pearson correlation of two equally long slices.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return f64::NAN;
    }
    let mean = |v: &[f64]| v[..n].iter().sum::<f64>() / n as f64;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

fn check_aligned(a: &Waveform, b: &Waveform) -> Result<()> {
    if a.step != b.step || a.t0 != b.t0 || a.len() != b.len() {
        return Err(Error::Domain(
            "waveforms must share t0, step and length".into(),
        ));
    }
    Ok(())
}

/// Metrics of `recovered` against `message` over samples with `t > transient_cut`.
pub fn recovery_metrics(
    message: &Waveform,
    recovered: &Waveform,
    transient_cut: f64,
) -> Result<RecoveryMetrics> {
    check_aligned(message, recovered)?;
    let k0 = message.first_index_after(transient_cut);
    if k0 >= message.len() {
        return Err(Error::Domain(format!(
            "no samples after transient_cut = {transient_cut} s"
        )));
    }
    let s = &message.samples[k0..];
    let r = &recovered.samples[k0..];
    let rmse = (s
        .iter()
        .zip(r)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        / s.len() as f64)
        .sqrt();
    let rms_s = rms(s);
    let relative_rmse = if rms_s > 0.0 { rmse / rms_s } else { f64::NAN };
    let snr_db = if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (rms_s / rmse).log10()
    };
    Ok(RecoveryMetrics {
        rmse,
        relative_rmse,
        correlation: pearson(s, r),
        snr_db,
    })
}

/// Correlation between two aligned waveforms over samples with `t > transient_cut`.
pub fn waveform_correlation(a: &Waveform, b: &Waveform, transient_cut: f64) -> Result<f64> {
    check_aligned(a, b)?;
    let k0 = a.first_index_after(transient_cut);
    Ok(pearson(&a.samples[k0..], &b.samples[k0..]))
}

/// Maximum of each consecutive window of `window` samples.
pub fn window_maxima(wf: &Waveform, window: usize) -> Vec<f64> {
    wf.samples
        .chunks(window.max(1))
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// One `run_link` per delta with only `param` of the receiver scaled by `1 + delta`.
pub fn mismatch_sensitivity(
    cfg: &LinkConfig,
    src: &MessageSource,
    channel: &ChannelModel,
    param: ReceiverParam,
    deltas: &[f64],
) -> Result<Vec<(f64, RecoveryMetrics)>> {
    if let Some(bad) = deltas.iter().find(|d| !d.is_finite() || **d <= -1.0) {
        return Err(Error::Domain(format!("invalid mismatch delta {bad}")));
    }
    deltas
        .par_iter()
        .map(|&delta| {
            let result = run_link(cfg, src, channel, Some(ParamOverride { param, delta }))?;
            let metrics = recovery_metrics(&result.message, &result.recovered, cfg.transient_cut)?;
            Ok((delta, metrics))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sample_count_formula() {
        assert_eq!(sample_times(1.0, 0.2, 0.1, 0.0).len(), 9);
        assert_eq!(sample_times(1.0, 0.2, 0.1, 0.05).len(), 8);
        assert_eq!(sample_times(0.1, 0.2, 0.1, 0.0).len(), 0);
    }

    #[test]
    fn poincare_interpolates_between_grid_points() {
        let traj = Trajectory {
            t: (0..=10).map(|k| k as f64 * 0.1).collect(),
            x: (0..=10).map(|k| [k as f64, 2.0 * k as f64]).collect(),
        };
        let pts = poincare_sample(&traj, 0.25, 0.0, 0.1).unwrap();
        // t = 0.1, 0.35, 0.6, 0.85
        assert_eq!(pts.len(), 4);
        assert!((pts[1][0] - 3.5).abs() < 1e-9);
        assert!((pts[3][1] - 17.0).abs() < 1e-9);
        assert!(poincare_sample(&traj, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cluster_counting() {
        assert_eq!(count_clusters(&[1.0, 1.0 + 1e-9, 2.0, 2.0], 1e-6), 2);
        assert_eq!(count_clusters(&[], 1e-6), 0);
        assert_eq!(count_clusters(&[1.0, 1.1, 1.2], 1e-3), 3);
    }

    #[test]
    fn sweep_rejects_degenerate_range() {
        let setup = crate::defaults::converter_setup();
        let err = bifurcation_sweep(&setup, SweepParam::BoostIref, 1.0, 1.0, 5, &SweepSettings::default());
        assert!(matches!(err, Err(Error::Domain(_))));
        assert!(bifurcation_sweep(&setup, SweepParam::BoostIref, 1.0, 2.0, 1, &SweepSettings::default()).is_err());
        assert!(SweepParam::parse(ConverterKind::Buck, "i_ref").is_err());
        assert_eq!(SweepParam::parse(ConverterKind::Boost, "boost.i_ref").unwrap(), SweepParam::BoostIref);
    }

    fn wf(samples: Vec<f64>) -> Waveform {
        Waveform::new(0.0, 1e-3, samples).unwrap()
    }

    #[test]
    fn metrics_exact_and_inverted() {
        let s: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.05).sin()).collect();
        let m = recovery_metrics(&wf(s.clone()), &wf(s.clone()), 0.0).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.relative_rmse, 0.0);
        assert!((m.correlation - 1.0).abs() < 1e-12);
        assert!(m.snr_is_infinite());
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let m = recovery_metrics(&wf(s), &wf(neg), 0.0).unwrap();
        assert!((m.correlation + 1.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_silent_message_flagged() {
        let m = recovery_metrics(&wf(vec![0.0; 10]), &wf(vec![0.1; 10]), 0.0).unwrap();
        assert!(m.message_is_silent());
        assert!((m.rmse - 0.1).abs() < 1e-15);
    }

    #[test]
    fn metrics_reject_misaligned() {
        let a = wf(vec![0.0; 10]);
        let b = Waveform::new(0.5, 1e-3, vec![0.0; 10]).unwrap();
        assert!(recovery_metrics(&a, &b, 0.0).is_err());
        assert!(recovery_metrics(&a, &a, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn metrics_shift_invariant_and_scale_covariant(
            seed in 0u64..1000, scale in 0.01..100.0f64, shift in -10.0..10.0f64,
        ) {
            let s: Vec<f64> = (0..400).map(|k| ((k as f64) * 0.07 + seed as f64).sin()).collect();
            let r: Vec<f64> = s.iter().enumerate().map(|(k, v)| v + 0.05 * ((k as f64) * 1.3 + seed as f64).cos()).collect();
            let base = recovery_metrics(&wf(s.clone()), &wf(r.clone()), 0.0505).unwrap();
            let shifted = recovery_metrics(
                &Waveform::new(shift, 1e-3, s.clone()).unwrap(),
                &Waveform::new(shift, 1e-3, r.clone()).unwrap(),
                0.0505 + shift,
            ).unwrap();
            prop_assert!((shifted.rmse - base.rmse).abs() <= 1e-12 * base.rmse.max(1e-300));
            let scaled = recovery_metrics(
                &wf(s.iter().map(|v| v * scale).collect()),
                &wf(r.iter().map(|v| v * scale).collect()),
                0.0505,
            ).unwrap();
            prop_assert!((scaled.rmse - scale * base.rmse).abs() <= 1e-9 * scale * base.rmse);
            prop_assert!((scaled.relative_rmse - base.relative_rmse).abs() <= 1e-9 * base.relative_rmse);
            prop_assert!((scaled.correlation - base.correlation).abs() <= 1e-9);
            prop_assert!((scaled.snr_db - base.snr_db).abs() <= 1e-9);
        }
    }
}
