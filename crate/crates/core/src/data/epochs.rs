use ndarray::{Array3, ArrayView1, ArrayViewMut1, Axis};

use super::{EpochSet, RawRecording};
use crate::error::{Error, Result};

/// Epoch window around each stimulus onset, in ms.
pub const WINDOW_MS: (i64, i64) = (-200, 800);

/// Onset shifts of the temporal-noise sweep, in ms.
pub const JITTER_LEVELS_MS: [i64; 6] = [-120, -80, -40, 40, 80, 120];

/// Converts a duration to a whole number of samples, rejecting fractional results.
pub fn samples_for_ms(ms: i64, sampling_rate: f64) -> Result<i64> {
    let exact = ms as f64 * sampling_rate / 1000.0;
    let rounded = exact.round();
    if (exact - rounded).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "{ms} ms is {exact} samples at {sampling_rate} Hz, not a whole number"
        )));
    }
    Ok(rounded as i64)
}

struct Windows {
    starts: Vec<usize>,
    len: usize,
}

fn window_starts(rec: &RawRecording, window_ms: (i64, i64), jitter_ms: i64) -> Result<Windows> {
    let (lo_ms, hi_ms) = window_ms;
    if hi_ms <= lo_ms {
        return Err(Error::Config(format!(
            "window [{lo_ms}, {hi_ms}] ms is empty"
        )));
    }
    let fs = rec.sampling_rate;
    let lo = samples_for_ms(lo_ms, fs)?;
    let len = (samples_for_ms(hi_ms, fs)? - lo) as usize;
    let shift = samples_for_ms(jitter_ms, fs)?;
    let total = rec.signal.ncols() as i64;
    let mut starts = Vec::with_capacity(rec.events.len());
    let mut offending = Vec::new();
    for (i, ev) in rec.events.iter().enumerate() {
        let start = ev.onset_sample as i64 + shift + lo;
        if start < 0 || start + len as i64 > total {
            offending.push(i);
        } else {
            starts.push(start as usize);
        }
    }
    if !offending.is_empty() {
        return Err(Error::WindowOutOfBounds { events: offending });
    }
    Ok(Windows { starts, len })
}

fn with_metadata(rec: &RawRecording, data: Array3<f64>, sampling_rate: f64) -> EpochSet {
    EpochSet {
        data,
        labels: rec.events.iter().map(|e| u8::from(e.is_target)).collect(),
        char_ids: rec.events.iter().map(|e| e.char_id).collect(),
        trial_ids: rec.events.iter().map(|e| e.trial_id).collect(),
        subject_ids: vec![rec.subject_index; rec.events.len()],
        onsets: rec.events.iter().map(|e| e.onset_sample as i64).collect(),
        sampling_rate,
    }
}

/// Cuts one epoch per event at `onset + jitter` over `window_ms`.
pub fn extract_epochs(rec: &RawRecording, window_ms: (i64, i64), jitter_ms: i64) -> Result<EpochSet> {
    let w = window_starts(rec, window_ms, jitter_ms)?;
    let channels = rec.signal.nrows();
    let mut data = Array3::zeros((w.starts.len(), channels, w.len));
    for (mut epoch, &start) in data.outer_iter_mut().zip(&w.starts) {
        epoch.assign(&rec.signal.slice(ndarray::s![.., start..start + w.len]));
    }
    Ok(with_metadata(rec, data, rec.sampling_rate))
}

fn block_means(src: ArrayView1<f64>, factor: usize, mut dst: ArrayViewMut1<f64>) {
    for (j, out) in dst.iter_mut().enumerate() {
        let mut sum = 0.0;
        for k in 0..factor {
            sum += src[j * factor + k];
        }
        *out = sum / factor as f64;
    }
}

fn check_factor(n_samples: usize, factor: usize) -> Result<()> {
    if factor == 0 || !n_samples.is_multiple_of(factor) {
        return Err(Error::Config(format!(
            "{n_samples} samples are not divisible by factor {factor}"
        )));
    }
    Ok(())
}

/// Block-mean decimation by `factor`.
pub fn downsample(epochs: &EpochSet, factor: usize) -> Result<EpochSet> {
    let (n, c, s) = epochs.data.dim();
    check_factor(s, factor)?;
    let mut data = Array3::zeros((n, c, s / factor));
    for (src, mut dst) in epochs.data.outer_iter().zip(data.outer_iter_mut()) {
        for (row, out) in src.axis_iter(Axis(0)).zip(dst.axis_iter_mut(Axis(0))) {
            block_means(row, factor, out);
        }
    }
    Ok(EpochSet {
        data,
        sampling_rate: epochs.sampling_rate / factor as f64,
        ..epochs.clone_metadata()
    })
}

/// `downsample(extract_epochs(..), factor)` without materializing the
/// full-rate windows. Bit-identical to the two-step pipeline.
pub fn extract_downsampled(
    rec: &RawRecording,
    window_ms: (i64, i64),
    jitter_ms: i64,
    factor: usize,
) -> Result<EpochSet> {
    let w = window_starts(rec, window_ms, jitter_ms)?;
    check_factor(w.len, factor)?;
    let channels = rec.signal.nrows();
    let mut data = Array3::zeros((w.starts.len(), channels, w.len / factor));
    for (mut epoch, &start) in data.outer_iter_mut().zip(&w.starts) {
        for (ch, out) in epoch.axis_iter_mut(Axis(0)).enumerate() {
            let src = rec.signal.slice(ndarray::s![ch, start..start + w.len]);
            block_means(src, factor, out);
        }
    }
    Ok(with_metadata(rec, data, rec.sampling_rate / factor as f64))
}

impl EpochSet {
    fn clone_metadata(&self) -> EpochSet {
        EpochSet {
            data: Array3::zeros((0, 0, 0)),
            labels: self.labels.clone(),
            char_ids: self.char_ids.clone(),
            trial_ids: self.trial_ids.clone(),
            subject_ids: self.subject_ids.clone(),
            onsets: self.onsets.clone(),
            sampling_rate: self.sampling_rate,
        }
    }
}
