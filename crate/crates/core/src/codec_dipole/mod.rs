//! Dipole-fit coding: one equivalent current dipole per window, its
//! forward projection as the prediction, and the residual coded with a
//! 2D or 1D wavelet coder chosen by how smooth the residual is.
//!
//! Per-window side info, all of it charged to the bit budget:
//!
//! ```text
//! f32 x3 position | u16 W | 3W moments, 12-bit two's complement, packed
//! | f32 moment scale | u8 residual coder | f64 residual scale | u32 bits
//! ```
//!
//! A global preamble holds the channel labels so the decoder can rebuild
//! the head model; like the container header it is not charged.

pub mod fit;
pub mod head;

use nalgebra::DMatrix;

use crate::bits::{BitReader, BitWriter, Bitstream};
use crate::codec_spiht2d::check_bps;
use crate::container::{ByteReader, ByteWriter, CodecId, CompressedRecord, VERSION};
use crate::error::{Error, Result};
use crate::signal::SignalMatrix;
use crate::spiht::{self, SpihtShape};
use crate::wavelet::{band_spans, dwt1d, dwt2d, idwt1d, idwt2d, max_levels, WaveletPyramid1D, WaveletPyramid2D};

pub use fit::{fit_window, DipoleState, FitResult};
pub use head::HeadModel;
use fit::{from_dmatrix, solve_moments, to_dmatrix};

const MOMENT_BITS: u32 = 12;
const MOMENT_MAX: i32 = (1 << (MOMENT_BITS - 1)) - 1;
/// Fixed per-window side-info bytes besides the packed moments.
const WINDOW_FIXED_BYTES: usize = 12 + 2 + 4 + 1 + 8 + 4;
const SMOOTH_CUTOFF_HZ: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleConfig {
    pub window: usize,
    pub smooth_thresh: f64,
    pub precision_bits: u32,
}

impl Default for DipoleConfig {
    fn default() -> Self {
        Self {
            window: 512,
            smooth_thresh: 0.7,
            precision_bits: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualCoder {
    None = 0,
    TwoD = 1,
    OneD = 2,
}

impl ResidualCoder {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Self::None),
            1 => Ok(Self::TwoD),
            2 => Ok(Self::OneD),
            _ => Err(Error::format(format!("unknown residual coder {v}"))),
        }
    }
}

/// Share of the residual energy below 32 Hz, from a 5-level wavelet split
/// of each channel, pooled over channels. A silent residual counts as
/// perfectly smooth.
pub fn smoothness(residual: &SignalMatrix, fs: f64) -> Result<f64> {
    let n = residual.n_samples();
    let levels = max_levels(n, 5);
    if levels == 0 {
        return Err(Error::Size(format!("{n} samples are too few for a smoothness estimate")));
    }
    let spans = band_spans(levels, fs);
    let (mut low, mut total) = (0.0, 0.0);
    for row in residual.rows() {
        let pyr = dwt1d(row, levels)?;
        let bands = std::iter::once(&pyr.approx).chain(pyr.details.iter());
        for (band, (lo, hi)) in bands.zip(&spans) {
            let e: f64 = band.iter().map(|c| c * c).sum();
            total += e;
            // A band straddling the cutoff contributes pro rata.
            let below = ((SMOOTH_CUTOFF_HZ.min(*hi) - lo) / (hi - lo)).clamp(0.0, 1.0);
            low += e * below;
        }
    }
    Ok(if total == 0.0 { 1.0 } else { low / total })
}

fn residual_levels_2d(c: usize, w: usize) -> usize {
    4.min(c.ilog2() as usize).min(w.ilog2() as usize)
}

fn residual_levels_1d(w: usize) -> usize {
    max_levels(w, 5)
}

fn window_side_bytes(w: usize) -> usize {
    WINDOW_FIXED_BYTES + (3 * w * MOMENT_BITS as usize).div_ceil(8)
}

struct CodedMoments {
    scale: f32,
    values: Vec<i32>,
}

/// Sample-major (x, y, z) triples on a symmetric 12-bit grid.
fn quantize_moments(m: &DMatrix<f64>) -> CodedMoments {
    let peak = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let scale = (peak / f64::from(MOMENT_MAX)) as f32;
    let values = if scale > 0.0 {
        let s = f64::from(scale);
        (0..m.ncols())
            .flat_map(|t| (0..3).map(move |k| (t, k)))
            .map(|(t, k)| ((m[(k, t)] / s).round() as i32).clamp(-MOMENT_MAX, MOMENT_MAX))
            .collect()
    } else {
        vec![0; 3 * m.ncols()]
    };
    CodedMoments { scale, values }
}

fn moment_matrix(c: &CodedMoments, w: usize) -> DMatrix<f64> {
    let s = f64::from(c.scale);
    DMatrix::from_fn(3, w, |k, t| f64::from(c.values[3 * t + k]) * s)
}

fn projection(model: &HeadModel, p: [f32; 3], m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = model.lead_field(p.map(f64::from))?;
    Ok(l * m)
}

/// Rounds the fitted position to `f32`, pulling it inward if rounding
/// lands it outside the head.
fn stored_position(p: [f64; 3], radius: f64) -> [f32; 3] {
    let mut q = p.map(|v| v as f32);
    while head::norm(q.map(f64::from)) >= radius {
        q = q.map(|v| v * (1.0 - 1e-6));
    }
    q
}

fn encode_residual(
    r: &SignalMatrix,
    coder: ResidualCoder,
    precision: u32,
    budget: usize,
) -> Result<(f64, Bitstream, SignalMatrix)> {
    let (c, w) = r.dims();
    match coder {
        ResidualCoder::None => Ok((0.0, Bitstream::default(), SignalMatrix::zeros(c, w))),
        ResidualCoder::TwoD => {
            let levels = residual_levels_2d(c, w);
            let pyr = dwt2d(r, levels)?;
            let q = spiht::quantize(&pyr.coeffs, precision)?;
            let shape = SpihtShape::TwoD { rows: c, cols: w, levels };
            let bits = spiht::encode(&q.values, shape, budget)?;
            let dec = decode_residual(&bits, q.scale, coder, c, w)?;
            Ok((q.scale, bits, dec))
        }
        ResidualCoder::OneD => {
            let levels = residual_levels_1d(w);
            let mut flat = Vec::with_capacity(c * w);
            for row in r.rows() {
                flat.extend(dwt1d(row, levels)?.to_flat());
            }
            let q = spiht::quantize(&flat, precision)?;
            let shape = SpihtShape::OneD { len: w, levels, count: c };
            let bits = spiht::encode(&q.values, shape, budget)?;
            let dec = decode_residual(&bits, q.scale, coder, c, w)?;
            Ok((q.scale, bits, dec))
        }
    }
}

fn decode_residual(bits: &Bitstream, scale: f64, coder: ResidualCoder, c: usize, w: usize) -> Result<SignalMatrix> {
    match coder {
        ResidualCoder::None => Ok(SignalMatrix::zeros(c, w)),
        ResidualCoder::TwoD => {
            let levels = residual_levels_2d(c, w);
            let shape = SpihtShape::TwoD { rows: c, cols: w, levels };
            let coeffs = spiht::dequantize(&spiht::decode(bits, shape)?, scale);
            idwt2d(&WaveletPyramid2D { levels, rows: c, cols: w, coeffs })
        }
        ResidualCoder::OneD => {
            let levels = residual_levels_1d(w);
            let shape = SpihtShape::OneD { len: w, levels, count: c };
            let coeffs = spiht::dequantize(&spiht::decode(bits, shape)?, scale);
            let mut out = SignalMatrix::zeros(c, w);
            for (ch, chunk) in coeffs.chunks(w).enumerate() {
                let row = idwt1d(&WaveletPyramid1D::from_flat(chunk, w, levels)?)?;
                out.row_mut(ch).copy_from_slice(&row);
            }
            Ok(out)
        }
    }
}

fn add(a: &DMatrix<f64>, b: &SignalMatrix) -> SignalMatrix {
    let mut out = b.clone();
    for ch in 0..out.n_channels() {
        for (t, v) in out.row_mut(ch).iter_mut().enumerate() {
            *v += a[(ch, t)];
        }
    }
    out
}

/// Everything the decoder learns about one window.
pub struct WindowInfo {
    pub position: [f32; 3],
    pub len: usize,
    pub moment_scale: f32,
    pub moments: Vec<i32>,
    pub coder: ResidualCoder,
    pub residual_scale: f64,
    pub residual_bits: usize,
}

fn write_window(w: &mut ByteWriter, info: &WindowInfo) {
    for v in info.position {
        w.f32(v);
    }
    w.u16(info.len as u16);
    let mut bw = BitWriter::new();
    for &v in &info.moments {
        bw.put_bits((v as u32 & ((1 << MOMENT_BITS) - 1)) as u64, MOMENT_BITS).expect("uncapped writer");
    }
    w.bytes(bw.finish().as_bytes());
    w.f32(info.moment_scale);
    w.u8(info.coder as u8);
    w.f64(info.residual_scale);
    w.u32(info.residual_bits as u32);
}

fn read_window(r: &mut ByteReader) -> Result<WindowInfo> {
    let position = [r.f32()?, r.f32()?, r.f32()?];
    let len = r.u16()? as usize;
    let n = 3 * len;
    let packed = r.take((n * MOMENT_BITS as usize).div_ceil(8))?;
    let mut br = BitReader::new(packed, n * MOMENT_BITS as usize);
    let moments = (0..n)
        .map(|_| {
            let raw = br.get_bits(MOMENT_BITS).expect("length checked above") as i32;
            // Sign-extend from 12 bits.
            (raw << (32 - MOMENT_BITS)) >> (32 - MOMENT_BITS)
        })
        .collect();
    Ok(WindowInfo {
        position,
        len,
        moments,
        moment_scale: r.f32()?,
        coder: ResidualCoder::from_u8(r.u8()?)?,
        residual_scale: r.f64()?,
        residual_bits: r.u32()? as usize,
    })
}

/// Per-window diagnostics from [`compress_detailed`].
#[derive(Debug, Clone)]
pub struct WindowReport {
    pub start: usize,
    pub len: usize,
    pub rho: f64,
    pub smoothness: f64,
    pub coder: ResidualCoder,
}

pub fn compress<S: AsRef<str>>(
    m: &SignalMatrix,
    labels: &[S],
    fs: u32,
    target_bps: f64,
    cfg: &DipoleConfig,
) -> Result<CompressedRecord> {
    compress_detailed(m, labels, fs, target_bps, cfg).map(|(r, _)| r)
}

pub fn compress_detailed<S: AsRef<str>>(
    m: &SignalMatrix,
    labels: &[S],
    fs: u32,
    target_bps: f64,
    cfg: &DipoleConfig,
) -> Result<(CompressedRecord, Vec<WindowReport>)> {
    check_bps(target_bps)?;
    if cfg.window < 8 || cfg.window > 32767 {
        return Err(Error::Config(format!("dipole window {} outside 8..=32767", cfg.window)));
    }
    let (c, n) = m.dims();
    if labels.len() != c {
        return Err(Error::Config(format!("{} labels for {c} channels", labels.len())));
    }
    let model = HeadModel::from_labels(labels)?;
    if n < 8 {
        return Err(Error::Size(format!("{n} samples are too few for a dipole fit")));
    }
    let mut side = ByteWriter::new();
    side.u16(c as u16);
    for l in labels {
        let l = l.as_ref().as_bytes();
        side.u8(l.len().min(255) as u8);
        side.bytes(&l[..l.len().min(255)]);
    }
    side.u8(cfg.precision_bits as u8);
    let wins = crate::codec_spiht2d::windows(n, cfg.window);
    side.u32(wins.len() as u32);
    let mut payload = BitWriter::new();
    let mut reports = Vec::with_capacity(wins.len());
    let mut max_scale = 0.0_f64;
    for (start, len) in wins {
        let w = m.columns(start, len)?;
        let budget = (target_bps * (c * len) as f64).floor() as usize;
        let side_bits = 8 * window_side_bytes(len);
        if side_bits > budget {
            return Err(Error::Budget(format!(
                "dipole side info needs {side_bits} bits per window, budget is {budget}"
            )));
        }
        let fitted = fit_window(&w, &model)?;
        // Closed loop: moments are re-solved at the stored position and the
        // residual is taken against what the decoder will rebuild.
        let position = stored_position(fitted.dipole.position, model.radius);
        let wm = to_dmatrix(&w);
        let moments = if w.energy() == 0.0 {
            DMatrix::zeros(3, len)
        } else {
            solve_moments(&model.lead_field(position.map(f64::from))?, &wm)?
        };
        let coded = quantize_moments(&moments);
        let proj = projection(&model, position, &moment_matrix(&coded, len))?;
        let residual = from_dmatrix(&(wm - &proj));
        let smooth = smoothness(&residual, f64::from(fs))?;
        let left = budget - side_bits;
        let coder = if left < spiht::MIN_BUDGET_BITS || residual.energy() == 0.0 {
            ResidualCoder::None
        } else if smooth >= cfg.smooth_thresh && c >= 2 && residual_levels_2d(c, len) >= 1 {
            ResidualCoder::TwoD
        } else {
            ResidualCoder::OneD
        };
        let (rscale, bits, _) = encode_residual(&residual, coder, cfg.precision_bits, left)?;
        let coder = if rscale == 0.0 { ResidualCoder::None } else { coder };
        let bits = if coder == ResidualCoder::None { Bitstream::default() } else { bits };
        max_scale = max_scale.max(rscale);
        write_window(
            &mut side,
            &WindowInfo {
                position,
                len,
                moment_scale: coded.scale,
                moments: coded.values,
                coder,
                residual_scale: rscale,
                residual_bits: bits.len_bits(),
            },
        );
        payload.append(&bits).expect("uncapped writer");
        reports.push(WindowReport {
            start,
            len,
            rho: fitted.rho,
            smoothness: smooth,
            coder,
        });
    }
    let payload = payload.finish();
    let record = CompressedRecord {
        codec: CodecId::Dipole,
        version: VERSION,
        n_channels: c as u32,
        n_samples: n as u32,
        fs,
        levels: 4,
        target_bps,
        quant_scale: max_scale,
        side_info: side.finish(),
        declared_payload_bits: payload.len_bits() as u64,
        payload,
    };
    Ok((record, reports))
}

/// Length of the label preamble, which the rate target does not cover.
pub fn preamble_bits(rec: &CompressedRecord) -> Result<usize> {
    let mut r = ByteReader::new(&rec.side_info);
    read_preamble(&mut r)?;
    Ok(8 * (rec.side_info.len() - r.rest().len()))
}

fn read_preamble(r: &mut ByteReader) -> Result<(Vec<String>, u32, usize)> {
    let c = r.u16()? as usize;
    let labels = (0..c)
        .map(|_| {
            let n = r.u8()? as usize;
            String::from_utf8(r.take(n)?.to_vec()).map_err(|_| Error::format("channel label is not UTF-8"))
        })
        .collect::<Result<Vec<_>>>()?;
    let precision = u32::from(r.u8()?);
    let count = r.u32()? as usize;
    Ok((labels, precision, count))
}

pub fn decompress(rec: &CompressedRecord) -> Result<SignalMatrix> {
    if rec.codec != CodecId::Dipole {
        return Err(Error::format(format!("expected a dipole container, got {}", rec.codec.name())));
    }
    let (c, n) = (rec.n_channels as usize, rec.n_samples as usize);
    let mut r = ByteReader::new(&rec.side_info);
    let (labels, _precision, count) = read_preamble(&mut r)?;
    if labels.len() != c {
        return Err(Error::structure("label count disagrees with the header"));
    }
    let model = HeadModel::from_labels(&labels).map_err(|e| Error::format(e.to_string()))?;
    let mut out = SignalMatrix::zeros(c, n);
    let (mut start, mut pos) = (0, 0);
    for _ in 0..count {
        let info = read_window(&mut r)?;
        if start + info.len > n {
            return Err(Error::structure("windows run past the declared sample count"));
        }
        let coded = CodedMoments {
            scale: info.moment_scale,
            values: info.moments,
        };
        let proj = projection(&model, info.position, &moment_matrix(&coded, info.len))
            .map_err(|e| Error::format(e.to_string()))?;
        let bits = rec.payload.slice(pos, info.residual_bits);
        pos += info.residual_bits;
        let res = decode_residual(&bits, info.residual_scale, info.coder, c, info.len)?;
        out.put_columns(start, &add(&proj, &res));
        start += info.len;
    }
    if start != n || !r.is_done() {
        return Err(Error::structure("windows do not cover the declared sample count"));
    }
    Ok(out)
}
