//! Synthetic RSVP recordings: AR(1) background per channel plus a raised-cosine
//! deflection after every target onset on a subset of channels.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::epochs::{samples_for_ms, WINDOW_MS};
use super::{Event, RawRecording};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct P300Config {
    pub latency_ms: f64,
    /// Full width of the raised-cosine bump.
    pub width_ms: f64,
    pub amplitude: f64,
    /// Channels carrying the bump.
    pub channels: Vec<usize>,
}

impl Default for P300Config {
    fn default() -> Self {
        Self {
            latency_ms: 300.0,
            width_ms: 200.0,
            amplitude: 1.0,
            channels: (20..35).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub ar_coefficient: f64,
    /// Stationary standard deviation of the background.
    pub std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            ar_coefficient: 0.9,
            std: 1.0,
        }
    }
}

/// Per-subject perturbations, drawn once per subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubjectVariation {
    pub latency_std_ms: f64,
    /// Std of the multiplicative amplitude factor around 1.
    pub amplitude_scale_std: f64,
}

impl Default for SubjectVariation {
    fn default() -> Self {
        Self {
            latency_std_ms: 20.0,
            amplitude_scale_std: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_subjects: usize,
    pub n_channels: usize,
    pub n_chars: usize,
    /// Target characters spelled per subject; each is shown `n_repetitions` times.
    pub n_trials_per_subject: usize,
    pub n_repetitions: usize,
    pub sampling_rate: f64,
    pub soa_ms: f64,
    /// Extra recording on both ends so every shifted window stays in bounds.
    pub jitter_margin_ms: i64,
    pub p300: P300Config,
    pub noise: NoiseConfig,
    pub variation: SubjectVariation,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_subjects: 11,
            n_channels: 55,
            n_chars: 30,
            n_trials_per_subject: 60,
            n_repetitions: 10,
            sampling_rate: 200.0,
            soa_ms: 116.0,
            jitter_margin_ms: 120,
            p300: P300Config::default(),
            noise: NoiseConfig::default(),
            variation: SubjectVariation::default(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_subjects == 0 || self.n_channels == 0 || self.n_trials_per_subject == 0 {
            return fail("subject, channel and trial counts must be positive".into());
        }
        if self.n_repetitions == 0 {
            return fail("n_repetitions must be positive".into());
        }
        if self.n_chars < 2 || self.n_chars > usize::from(u16::MAX) {
            return fail(format!("n_chars = {} must be in 2..=65535", self.n_chars));
        }
        if !(self.sampling_rate > 0.0) || !(self.soa_ms > 0.0) {
            return fail("sampling_rate and soa_ms must be positive".into());
        }
        if self.soa_ms * self.sampling_rate / 1000.0 < 1.0 {
            return fail("soa_ms is shorter than one sample".into());
        }
        if self.jitter_margin_ms < 0 {
            return fail("jitter_margin_ms must be non-negative".into());
        }
        samples_for_ms(WINDOW_MS.0, self.sampling_rate)?;
        samples_for_ms(WINDOW_MS.1, self.sampling_rate)?;
        samples_for_ms(self.jitter_margin_ms, self.sampling_rate)?;
        let p = &self.p300;
        if !(p.amplitude >= 0.0) || !(p.width_ms > 0.0) || !p.latency_ms.is_finite() {
            return fail("p300 amplitude must be ≥ 0, width positive, latency finite".into());
        }
        if let Some(&c) = p.channels.iter().find(|&&c| c >= self.n_channels) {
            return fail(format!("p300 channel {c} ≥ n_channels {}", self.n_channels));
        }
        if !(self.noise.std > 0.0) || !(self.noise.ar_coefficient.abs() < 1.0) {
            return fail("noise std must be positive and |ar_coefficient| < 1".into());
        }
        let v = &self.variation;
        if !(v.latency_std_ms >= 0.0) || !(v.amplitude_scale_std >= 0.0) {
            return fail("variation stds must be non-negative".into());
        }
        let events = self.n_trials_per_subject * self.n_repetitions;
        if u32::try_from(events).is_err() {
            return fail("too many presentation sequences".into());
        }
        Ok(())
    }

    pub fn events_per_subject(&self) -> usize {
        self.n_trials_per_subject * self.n_repetitions * self.n_chars
    }
}

/// One recording per subject, generated in parallel; deterministic in `config.seed`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<RawRecording>> {
    config.validate()?;
    (0..config.n_subjects)
        .into_par_iter()
        .map(|s| generate_subject(config, s))
        .collect()
}

fn raised_cosine(t_ms: f64, center: f64, width: f64) -> f64 {
    let d = t_ms - center;
    if d.abs() >= width / 2.0 {
        0.0
    } else {
        0.5 * (1.0 + (2.0 * std::f64::consts::PI * d / width).cos())
    }
}

/// The recording of subject `index` alone; identical to the corresponding
/// element of [`generate_synthetic`].
pub fn generate_subject(config: &SyntheticConfig, index: usize) -> Result<RawRecording> {
    config.validate()?;
    let subject_index = u16::try_from(index)
        .map_err(|_| Error::Config(format!("subject index {index} exceeds u16")))?;
    let root = seed::derive_indexed(config.seed, "subject", index as u64);
    let fs = config.sampling_rate;

    let mut rng = seed::rng(seed::derive(root, "variation"));
    let z_lat: f64 = rng.sample(StandardNormal);
    let z_amp: f64 = rng.sample(StandardNormal);
    let latency = config.p300.latency_ms + config.variation.latency_std_ms * z_lat;
    let amplitude =
        config.p300.amplitude * (1.0 + config.variation.amplitude_scale_std * z_amp).max(0.0);

    let lead = (samples_for_ms(config.jitter_margin_ms - WINDOW_MS.0, fs)?) as usize;
    let tail = (samples_for_ms(config.jitter_margin_ms + WINDOW_MS.1, fs)?) as usize;
    let n_events = config.events_per_subject();
    let soa = config.soa_ms * fs / 1000.0;
    let onset = |k: usize| lead + (k as f64 * soa).round() as usize;
    let total = onset(n_events.saturating_sub(1)) + tail + 1;

    let mut rng = seed::rng(seed::derive(root, "layout"));
    let mut events = Vec::with_capacity(n_events);
    let mut order: Vec<u16> = (0..config.n_chars as u16).collect();
    for set in 0..config.n_trials_per_subject {
        let target = rng.random_range(0..config.n_chars) as u16;
        for rep in 0..config.n_repetitions {
            order.shuffle(&mut rng);
            let trial_id = (set * config.n_repetitions + rep) as u32;
            for &c in &order {
                events.push(Event {
                    onset_sample: onset(events.len()),
                    char_id: c,
                    trial_id,
                    is_target: c == target,
                });
            }
        }
    }

    let mut signal = Array2::<f64>::zeros((config.n_channels, total));
    let phi = config.noise.ar_coefficient;
    let innovation = config.noise.std * (1.0 - phi * phi).sqrt();
    for (ch, mut row) in signal.outer_iter_mut().enumerate() {
        let mut rng = seed::rng(seed::derive_indexed(root, "noise", ch as u64));
        let mut x = config.noise.std * rng.sample::<f64, _>(StandardNormal);
        for v in row.iter_mut() {
            *v = x;
            x = phi * x + innovation * rng.sample::<f64, _>(StandardNormal);
        }
    }

    if amplitude > 0.0 {
        let half = config.p300.width_ms / 2.0;
        let first = ((latency - half) * fs / 1000.0).floor() as i64;
        let last = ((latency + half) * fs / 1000.0).ceil() as i64;
        let profile: Vec<(i64, f64)> = (first..=last)
            .map(|k| {
                let t_ms = k as f64 * 1000.0 / fs;
                (k, amplitude * raised_cosine(t_ms, latency, config.p300.width_ms))
            })
            .filter(|&(_, v)| v > 0.0)
            .collect();
        for ev in events.iter().filter(|e| e.is_target) {
            for &(k, v) in &profile {
                let t = ev.onset_sample as i64 + k;
                if t < 0 || t >= total as i64 {
                    continue;
                }
                for &ch in &config.p300.channels {
                    signal[[ch, t as usize]] += v;
                }
            }
        }
    }

    Ok(RawRecording {
        signal,
        sampling_rate: fs,
        events,
        subject_id: format!("subject{:02}", index + 1),
        subject_index,
    })
}
