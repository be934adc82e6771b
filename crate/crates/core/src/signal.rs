//! Shared signal types: channel-by-sample matrices, recordings and flagged
//! time intervals.

use crate::error::{Error, Result};

/// Channels x samples matrix of amplitudes in microvolts, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    n_channels: usize,
    n_samples: usize,
    data: Vec<f64>,
}

impl SignalMatrix {
    pub fn new(n_channels: usize, n_samples: usize, data: Vec<f64>) -> Result<Self> {
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::Size(format!(
                "signal matrix must be non-empty, got {n_channels}x{n_samples}"
            )));
        }
        if data.len() != n_channels * n_samples {
            return Err(Error::structure(format!(
                "expected {} values for {n_channels}x{n_samples}, got {}",
                n_channels * n_samples,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite amplitude at channel {}, sample {}",
                pos / n_samples,
                pos % n_samples
            )));
        }
        Ok(Self {
            n_channels,
            n_samples,
            data,
        })
    }

    pub fn zeros(n_channels: usize, n_samples: usize) -> Self {
        assert!(n_channels > 0 && n_samples > 0);
        Self {
            n_channels,
            n_samples,
            data: vec![0.0; n_channels * n_samples],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_samples = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_samples) {
            return Err(Error::structure("rows have unequal lengths"));
        }
        Self::new(rows.len(), n_samples, rows.concat())
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_channels, self.n_samples)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.n_samples..(ch + 1) * self.n_samples]
    }

    pub fn row_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.data[ch * self.n_samples..(ch + 1) * self.n_samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_samples)
    }

    pub fn get(&self, ch: usize, t: usize) -> f64 {
        self.data[ch * self.n_samples + t]
    }

    pub fn set(&mut self, ch: usize, t: usize, v: f64) {
        self.data[ch * self.n_samples + t] = v;
    }

    /// Sum of squared amplitudes over every entry.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Copy of samples `[start, start + len)` of every channel.
    pub fn columns(&self, start: usize, len: usize) -> Result<SignalMatrix> {
        if len == 0 || start + len > self.n_samples {
            return Err(Error::Range(format!(
                "sample range {start}..{} outside 0..{}",
                start + len,
                self.n_samples
            )));
        }
        let mut data = Vec::with_capacity(self.n_channels * len);
        for row in self.rows() {
            data.extend_from_slice(&row[start..start + len]);
        }
        Ok(SignalMatrix {
            n_channels: self.n_channels,
            n_samples: len,
            data,
        })
    }

    /// Writes `block` into this matrix starting at sample `start`.
    pub(crate) fn put_columns(&mut self, start: usize, block: &SignalMatrix) {
        assert_eq!(block.n_channels, self.n_channels);
        assert!(start + block.n_samples <= self.n_samples);
        for ch in 0..self.n_channels {
            self.row_mut(ch)[start..start + block.n_samples].copy_from_slice(block.row(ch));
        }
    }
}

/// A recording: labelled channels sampled at an integer rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub patient_id: String,
    pub channels: Vec<String>,
    pub fs: u32,
    pub samples: SignalMatrix,
    pub precision_bits: u32,
}

impl Recording {
    pub fn new(
        patient_id: impl Into<String>,
        channels: Vec<String>,
        fs: u32,
        samples: SignalMatrix,
        precision_bits: u32,
    ) -> Result<Self> {
        if fs == 0 {
            return Err(Error::Domain("sampling rate must be positive".into()));
        }
        if channels.len() != samples.n_channels() {
            return Err(Error::structure(format!(
                "{} channel labels for {} channels",
                channels.len(),
                samples.n_channels()
            )));
        }
        Ok(Self {
            patient_id: patient_id.into(),
            channels,
            fs,
            samples,
            precision_bits,
        })
    }

    /// Recording length in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.n_samples() as f64 / f64::from(self.fs)
    }
}

/// A flagged interval in seconds from the start of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagSection {
    pub start_s: f64,
    pub end_s: f64,
    pub label: String,
}

impl FlagSection {
    pub fn new(start_s: f64, end_s: f64, label: impl Into<String>) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite()) || start_s < 0.0 || end_s <= start_s {
            return Err(Error::format(format!(
                "invalid flag interval [{start_s}, {end_s}]"
            )));
        }
        Ok(Self {
            start_s,
            end_s,
            label: label.into(),
        })
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Length of the intersection with `other`, zero when disjoint.
    pub fn overlap(&self, other: &FlagSection) -> f64 {
        (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0)
    }
}
