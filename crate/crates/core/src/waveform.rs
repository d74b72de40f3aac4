use crate::error::{Error, Result};

/// Uniformly sampled signal: sample `n` is taken at `t0 + n * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub t0: f64,
    pub step: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(t0: f64, step: f64, samples: Vec<f64>) -> Result<Self> {
        let wf = Waveform { t0, step, samples };
        wf.validate()?;
        Ok(wf)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid("waveform.step", "must be > 0"));
        }
        if !self.t0.is_finite() {
            return Err(Error::invalid("waveform.t0", "must be finite"));
        }
        if let Some(n) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("waveform.samples", format!("sample {n} is not finite")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_at(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.step
    }

    /// `(t, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples
            .iter()
            .enumerate()
            .map(move |(n, &v)| (self.time_at(n), v))
    }

    /// Index of the first sample strictly after `t`.
    pub fn first_index_after(&self, t: f64) -> usize {
        if t < self.t0 {
            return 0;
        }
        let k = ((t - self.t0) / self.step).floor() as usize + 1;
        k.min(self.samples.len())
    }
}
