//! Distortion and rate figures.

use crate::container::CompressedRecord;
use crate::error::{Error, Result};
use crate::signal::SignalMatrix;

/// Bits per sample of the uncompressed recordings.
pub const BASELINE_BPS: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDistortionPoint {
    pub target_bps: f64,
    /// Payload plus side-info bits per original sample. Fixed header bits
    /// are left out.
    pub achieved_bps: f64,
    pub cr: f64,
    pub prd: f64,
}

fn check_dims(x: &SignalMatrix, xhat: &SignalMatrix) -> Result<()> {
    if x.dims() != xhat.dims() {
        return Err(Error::Metric(format!(
            "dimension mismatch: {:?} vs {:?}",
            x.dims(),
            xhat.dims()
        )));
    }
    Ok(())
}

/// `100 * sqrt(sum (x - xhat)^2 / sum x^2)` over every sample.
pub fn prd(x: &SignalMatrix, xhat: &SignalMatrix) -> Result<f64> {
    check_dims(x, xhat)?;
    prd_slices(x.data(), xhat.data())
}

pub(crate) fn prd_slices(x: &[f64], xhat: &[f64]) -> Result<f64> {
    let den: f64 = x.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::Metric("PRD of a zero-energy reference is undefined".into()));
    }
    let num: f64 = x.iter().zip(xhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(100.0 * (num / den).sqrt())
}

/// PRD with each channel's mean taken out of the reference energy.
pub fn prd_mean_removed(x: &SignalMatrix, xhat: &SignalMatrix) -> Result<f64> {
    check_dims(x, xhat)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for ch in 0..x.n_channels() {
        let (a, b) = (x.row(ch), xhat.row(ch));
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        for (u, v) in a.iter().zip(b) {
            num += (u - v) * (u - v);
            den += (u - mean) * (u - mean);
        }
    }
    if den == 0.0 {
        return Err(Error::Metric("reference has no energy around its mean".into()));
    }
    Ok(100.0 * (num / den).sqrt())
}

pub fn achieved_bps(record: &CompressedRecord) -> f64 {
    let samples = f64::from(record.n_channels) * f64::from(record.n_samples);
    (record.payload_bits() + record.side_info_bits()) as f64 / samples
}

pub fn compression_ratio(achieved_bps: f64) -> f64 {
    BASELINE_BPS / achieved_bps
}

pub fn rd_point(
    original: &SignalMatrix,
    record: &CompressedRecord,
    reconstruction: &SignalMatrix,
) -> Result<RateDistortionPoint> {
    if original.dims() != (record.n_channels as usize, record.n_samples as usize) {
        return Err(Error::Metric("container dimensions differ from the original".into()));
    }
    let achieved = achieved_bps(record);
    if achieved <= 0.0 {
        return Err(Error::Metric("container holds no coded bits".into()));
    }
    Ok(RateDistortionPoint {
        target_bps: record.target_bps,
        achieved_bps: achieved,
        cr: compression_ratio(achieved),
        prd: prd(original, reconstruction)?,
    })
}
