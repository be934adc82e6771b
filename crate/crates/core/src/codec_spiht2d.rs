//! Channel-by-time matrix coding with a 2D wavelet transform and 2D SPIHT.
//!
//! Each window is mean-removed per channel, its rows are reordered so that
//! strongly correlated channels sit next to each other, and the matrix is
//! zero-padded to a multiple of `2^levels` in both directions before the
//! transform. The side info needed to undo this is stored losslessly.

use crate::bits::BitWriter;
use crate::container::{ByteReader, ByteWriter, CodecId, CompressedRecord, VERSION};
use crate::error::{Error, Result};
use crate::signal::SignalMatrix;
use crate::spiht::{self, SpihtShape};
use crate::wavelet::{dwt2d, idwt2d, WaveletPyramid2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spiht2dConfig {
    pub levels: usize,
    pub precision_bits: u32,
    /// Samples per compression unit. A shorter tail joins the last unit.
    pub window: usize,
}

impl Default for Spiht2dConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            precision_bits: 16,
            window: 65536,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocSideInfo {
    /// `channel_order[k]` is the original index of output row `k`.
    pub channel_order: Vec<usize>,
    pub channel_means: Vec<f64>,
    pub pad_rows: usize,
    pub pad_cols: usize,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

/// Greedy chain through the correlation matrix: start at the channel with
/// the largest mean |r| to the rest, then repeatedly append the unused
/// channel best correlated with the last one. Rows must be mean-free.
pub fn correlation_order(m: &SignalMatrix) -> Vec<usize> {
    const TIE: f64 = 1e-12;
    let c = m.n_channels();
    let mut r = vec![0.0; c * c];
    for i in 0..c {
        r[i * c + i] = 1.0;
        for j in i + 1..c {
            let v = pearson(m.row(i), m.row(j));
            r[i * c + j] = v;
            r[j * c + i] = v;
        }
    }
    let mut start = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..c {
        let s = (0..c).filter(|&j| j != i).map(|j| r[i * c + j].abs()).sum::<f64>();
        if s > best + TIE {
            best = s;
            start = i;
        }
    }
    let mut order = vec![start];
    let mut used = vec![false; c];
    used[start] = true;
    while order.len() < c {
        let last = *order.last().unwrap();
        let mut pick = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for j in (0..c).filter(|&j| !used[j]) {
            if r[last * c + j] > best + TIE {
                best = r[last * c + j];
                pick = j;
            }
        }
        used[pick] = true;
        order.push(pick);
    }
    order
}

/// Mean removal, correlation ordering and zero padding to a multiple of
/// `2^levels` rows and columns.
pub fn preprocess(m: &SignalMatrix, levels: usize) -> Result<(SignalMatrix, PreprocSideInfo)> {
    let (c, n) = m.dims();
    if c < 2 {
        return Err(Error::Size(format!("need at least 2 channels, got {c}")));
    }
    let unit = 1usize << levels;
    let means: Vec<f64> = m.rows().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let mut centred = m.clone();
    for (ch, mean) in means.iter().enumerate() {
        centred.row_mut(ch).iter_mut().for_each(|v| *v -= mean);
    }
    let order = correlation_order(&centred);
    let (pr, pc) = (c.div_ceil(unit) * unit, n.div_ceil(unit) * unit);
    let mut out = SignalMatrix::zeros(pr, pc);
    for (k, &ch) in order.iter().enumerate() {
        out.row_mut(k)[..n].copy_from_slice(centred.row(ch));
    }
    let side = PreprocSideInfo {
        channel_order: order,
        channel_means: means,
        pad_rows: pr - c,
        pad_cols: pc - n,
    };
    Ok((out, side))
}

pub fn unpreprocess(m: &SignalMatrix, side: &PreprocSideInfo) -> Result<SignalMatrix> {
    let c = side.channel_order.len();
    let (pr, pc) = m.dims();
    if side.channel_means.len() != c || pr != c + side.pad_rows || pc <= side.pad_cols {
        return Err(Error::structure(format!(
            "{pr}x{pc} matrix does not match side info for {c} channels"
        )));
    }
    let mut seen = vec![false; c];
    for &ch in &side.channel_order {
        if ch >= c || std::mem::replace(&mut seen[ch], true) {
            return Err(Error::structure("channel order is not a permutation"));
        }
    }
    let n = pc - side.pad_cols;
    let mut out = SignalMatrix::zeros(c, n);
    for (k, &ch) in side.channel_order.iter().enumerate() {
        let mean = side.channel_means[ch];
        for (o, v) in out.row_mut(ch).iter_mut().zip(&m.row(k)[..n]) {
            *o = v + mean;
        }
    }
    Ok(out)
}

/// Start and length of each compression unit.
pub(crate) fn windows(n: usize, window: usize) -> Vec<(usize, usize)> {
    let window = window.max(1);
    let full = (n / window).max(1);
    (0..full)
        .map(|i| {
            let start = i * window;
            let len = if i + 1 == full { n - start } else { window };
            (start, len)
        })
        .collect()
}

pub(crate) fn check_bps(target_bps: f64) -> Result<()> {
    if !(target_bps > 0.0 && target_bps <= 16.0) {
        return Err(Error::Config(format!("target bit rate {target_bps} outside (0, 16]")));
    }
    Ok(())
}

fn write_side(w: &mut ByteWriter, side: &PreprocSideInfo) {
    w.u16(side.channel_order.len() as u16);
    for &ch in &side.channel_order {
        w.u16(ch as u16);
    }
    for &m in &side.channel_means {
        w.f64(m);
    }
    w.u16(side.pad_rows as u16);
    w.u32(side.pad_cols as u32);
}

fn read_side(r: &mut ByteReader) -> Result<PreprocSideInfo> {
    let c = r.u16()? as usize;
    let channel_order = (0..c).map(|_| r.u16().map(usize::from)).collect::<Result<_>>()?;
    let channel_means = (0..c).map(|_| r.f64()).collect::<Result<_>>()?;
    Ok(PreprocSideInfo {
        channel_order,
        channel_means,
        pad_rows: r.u16()? as usize,
        pad_cols: r.u32()? as usize,
    })
}

pub fn compress(m: &SignalMatrix, fs: u32, target_bps: f64, cfg: &Spiht2dConfig) -> Result<CompressedRecord> {
    check_bps(target_bps)?;
    let (c, n) = m.dims();
    let unit = 1usize << cfg.levels;
    if c < unit || n < unit {
        return Err(Error::Size(format!(
            "{c}x{n} window is too small for {} levels",
            cfg.levels
        )));
    }
    if c > u16::MAX as usize {
        return Err(Error::Size(format!("{c} channels exceed the container limit")));
    }
    let mut side = ByteWriter::new();
    let mut payload = BitWriter::new();
    let mut max_scale = 0.0_f64;
    let wins = windows(n, cfg.window);
    side.u8(cfg.precision_bits as u8);
    side.u32(wins.len() as u32);
    for (start, len) in wins {
        let w = m.columns(start, len)?;
        let (pre, info) = preprocess(&w, cfg.levels)?;
        let pyr = dwt2d(&pre, cfg.levels)?;
        let q = spiht::quantize(&pyr.coeffs, cfg.precision_bits)?;
        let budget = (target_bps * (c * len) as f64).floor() as usize;
        let shape = SpihtShape::TwoD {
            rows: pyr.rows,
            cols: pyr.cols,
            levels: cfg.levels,
        };
        let bits = spiht::encode(&q.values, shape, budget)?;
        max_scale = max_scale.max(q.scale);
        side.u32(len as u32);
        write_side(&mut side, &info);
        side.f64(q.scale);
        side.u32(bits.len_bits() as u32);
        payload.append(&bits).expect("uncapped writer");
    }
    let payload = payload.finish();
    Ok(CompressedRecord {
        codec: CodecId::Spiht2d,
        version: VERSION,
        n_channels: c as u32,
        n_samples: n as u32,
        fs,
        levels: cfg.levels as u16,
        target_bps,
        quant_scale: max_scale,
        side_info: side.finish(),
        declared_payload_bits: payload.len_bits() as u64,
        payload,
    })
}

pub fn decompress(rec: &CompressedRecord) -> Result<SignalMatrix> {
    if rec.codec != CodecId::Spiht2d {
        return Err(Error::format(format!("expected a spiht2d container, got {}", rec.codec.name())));
    }
    let (c, n) = (rec.n_channels as usize, rec.n_samples as usize);
    let levels = rec.levels as usize;
    let mut r = ByteReader::new(&rec.side_info);
    let _precision = r.u8()?;
    let count = r.u32()? as usize;
    let mut out = SignalMatrix::zeros(c, n);
    let (mut start, mut bit_pos) = (0usize, 0usize);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let info = read_side(&mut r)?;
        let scale = r.f64()?;
        let nbits = r.u32()? as usize;
        if info.channel_order.len() != c || start + len > n {
            return Err(Error::structure("window side info disagrees with the header"));
        }
        let (rows, cols) = (c + info.pad_rows, len + info.pad_cols);
        let bits = rec.payload.slice(bit_pos, nbits);
        bit_pos += nbits;
        let shape = SpihtShape::TwoD { rows, cols, levels };
        let values = spiht::decode(&bits, shape)?;
        let pyr = WaveletPyramid2D {
            levels,
            rows,
            cols,
            coeffs: spiht::dequantize(&values, scale),
        };
        let block = unpreprocess(&idwt2d(&pyr)?, &info)?;
        out.put_columns(start, &block);
        start += len;
    }
    if start != n || !r.is_done() {
        return Err(Error::structure("windows do not cover the declared sample count"));
    }
    Ok(out)
}
