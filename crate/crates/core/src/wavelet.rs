//! Multilevel biorthogonal 9/7 wavelet analysis and synthesis.
//!
//! The transform is computed with the four-step lifting factorisation and
//! whole-sample symmetric extension at both borders, so a length-`n` signal
//! splits into `ceil(n/2)` low-pass and `floor(n/2)` high-pass coefficients
//! and no padding is needed for odd lengths. The outputs are scaled so that
//! the low-pass filter has DC gain `sqrt(2)` and the high-pass filter has
//! Nyquist gain `sqrt(2)`, which keeps coefficient energy close to signal
//! energy at every level.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::signal::SignalMatrix;

const ALPHA: f64 = -1.586_134_342_059_924;
const BETA: f64 = -0.052_980_118_572_961;
const GAMMA: f64 = 0.882_911_075_530_934;
const DELTA: f64 = 0.443_506_852_043_971;
const K: f64 = 1.230_174_104_914_001;

const LOW_GAIN: f64 = SQRT_2 / K;
const HIGH_GAIN: f64 = K / SQRT_2;

#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    // Period of the whole-sample symmetric extension.
    let period = 2 * (n - 1);
    if period == 0 {
        return 0;
    }
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn lift_odd(x: &mut [f64], c: f64) {
    let n = x.len();
    for i in (1..n).step_by(2) {
        let r = mirror(i as isize + 1, n);
        x[i] += c * (x[i - 1] + x[r]);
    }
}

fn lift_even(x: &mut [f64], c: f64) {
    let n = x.len();
    for i in (0..n).step_by(2) {
        let l = mirror(i as isize - 1, n);
        let r = mirror(i as isize + 1, n);
        x[i] += c * (x[l] + x[r]);
    }
}

/// One analysis step in place: the first `ceil(n/2)` entries of `x` become
/// the low band and the rest the high band. `scratch` must hold `n` values.
fn analyze(x: &mut [f64], scratch: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        return;
    }
    lift_odd(x, ALPHA);
    lift_even(x, BETA);
    lift_odd(x, GAMMA);
    lift_even(x, DELTA);
    let n_low = n.div_ceil(2);
    for i in 0..n {
        if i % 2 == 0 {
            scratch[i / 2] = x[i] * LOW_GAIN;
        } else {
            scratch[n_low + i / 2] = x[i] * HIGH_GAIN;
        }
    }
    x.copy_from_slice(&scratch[..n]);
}

fn synthesize(x: &mut [f64], scratch: &mut [f64]) {
    let n = x.len();
    if n < 2 {
        return;
    }
    let n_low = n.div_ceil(2);
    for i in 0..n {
        scratch[i] = if i % 2 == 0 {
            x[i / 2] / LOW_GAIN
        } else {
            x[n_low + i / 2] / HIGH_GAIN
        };
    }
    x.copy_from_slice(&scratch[..n]);
    lift_even(x, -DELTA);
    lift_odd(x, -GAMMA);
    lift_even(x, -BETA);
    lift_odd(x, -ALPHA);
}

/// Lengths of the approximation at each level: `[n, ceil(n/2), ...]`,
/// `levels + 1` entries.
pub fn approx_lengths(n: usize, levels: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(levels + 1);
    let mut m = n;
    out.push(m);
    for _ in 0..levels {
        m = m.div_ceil(2);
        out.push(m);
    }
    out
}

/// Largest depth usable on a length-`n` axis, capped at `max`.
pub fn max_levels(n: usize, max: usize) -> usize {
    let mut l = 0;
    while l < max && n >= 1 << (l + 1) {
        l += 1;
    }
    l
}

fn check_depth(n: usize, levels: usize, what: &str) -> Result<()> {
    if levels == 0 {
        return Err(Error::Size("transform depth must be at least 1".into()));
    }
    if levels >= usize::BITS as usize || n < 1 << levels {
        return Err(Error::Size(format!(
            "{what} of length {n} is too short for {levels} levels"
        )));
    }
    Ok(())
}

/// Coefficients of an `L`-level 1D analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid1D {
    pub levels: usize,
    pub approx: Vec<f64>,
    /// Detail bands from level `L` (coarsest) down to level 1.
    pub details: Vec<Vec<f64>>,
    pub original_len: usize,
}

impl WaveletPyramid1D {
    /// Band lengths in flat order: approximation, then details `L..=1`.
    pub fn band_lengths(original_len: usize, levels: usize) -> Vec<usize> {
        let a = approx_lengths(original_len, levels);
        let mut out = vec![a[levels]];
        for l in (1..=levels).rev() {
            out.push(a[l - 1] / 2);
        }
        out
    }

    pub fn zeros(original_len: usize, levels: usize) -> Self {
        let lens = Self::band_lengths(original_len, levels);
        Self {
            levels,
            approx: vec![0.0; lens[0]],
            details: lens[1..].iter().map(|&n| vec![0.0; n]).collect(),
            original_len,
        }
    }

    /// Flat Mallat layout `[approx | d_L | ... | d_1]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.original_len);
        out.extend_from_slice(&self.approx);
        for d in &self.details {
            out.extend_from_slice(d);
        }
        out
    }

    pub fn from_flat(flat: &[f64], original_len: usize, levels: usize) -> Result<Self> {
        let lens = Self::band_lengths(original_len, levels);
        if flat.len() != lens.iter().sum::<usize>() {
            return Err(Error::structure(format!(
                "{} coefficients for a {levels}-level pyramid of length {original_len}",
                flat.len()
            )));
        }
        let mut bands = Vec::with_capacity(lens.len());
        let mut off = 0;
        for n in lens {
            bands.push(flat[off..off + n].to_vec());
            off += n;
        }
        let approx = bands.remove(0);
        Ok(Self {
            levels,
            approx,
            details: bands,
            original_len,
        })
    }

    pub fn energy(&self) -> f64 {
        self.approx.iter().chain(self.details.iter().flatten()).map(|c| c * c).sum()
    }

    fn validate(&self) -> Result<()> {
        let lens = Self::band_lengths(self.original_len, self.levels);
        if self.details.len() != self.levels {
            return Err(Error::structure(format!(
                "pyramid declares {} levels but holds {} detail bands",
                self.levels,
                self.details.len()
            )));
        }
        if self.approx.len() != lens[0]
            || self.details.iter().zip(&lens[1..]).any(|(d, &n)| d.len() != n)
        {
            return Err(Error::structure("sub-band lengths do not match the declared shape"));
        }
        Ok(())
    }
}

/// `levels`-deep 1D analysis.
pub fn dwt1d(signal: &[f64], levels: usize) -> Result<WaveletPyramid1D> {
    check_depth(signal.len(), levels, "signal")?;
    let mut work = signal.to_vec();
    let mut scratch = vec![0.0; signal.len()];
    let lens = approx_lengths(signal.len(), levels);
    let mut details = Vec::with_capacity(levels);
    for l in 0..levels {
        let n = lens[l];
        analyze(&mut work[..n], &mut scratch);
        details.push(work[lens[l + 1]..n].to_vec());
    }
    details.reverse();
    Ok(WaveletPyramid1D {
        levels,
        approx: work[..lens[levels]].to_vec(),
        details,
        original_len: signal.len(),
    })
}

pub fn idwt1d(pyr: &WaveletPyramid1D) -> Result<Vec<f64>> {
    pyr.validate()?;
    let mut work = pyr.to_flat();
    let mut scratch = vec![0.0; work.len()];
    let lens = approx_lengths(pyr.original_len, pyr.levels);
    for l in (0..pyr.levels).rev() {
        synthesize(&mut work[..lens[l]], &mut scratch);
    }
    Ok(work)
}

/// 2D coefficients kept in the Mallat layout of the input matrix: the
/// `LL_L` block sits top-left and each level's `HL`, `LH`, `HH` blocks
/// surround the approximation of the previous level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid2D {
    pub levels: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` coefficients.
    pub coeffs: Vec<f64>,
}

/// Orientation of a 2D detail band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Low-pass across rows, high-pass along each row.
    HL,
    /// High-pass across rows, low-pass along each row.
    LH,
    HH,
}

impl WaveletPyramid2D {
    pub fn original_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn ll_dims(&self) -> (usize, usize) {
        (
            approx_lengths(self.rows, self.levels)[self.levels],
            approx_lengths(self.cols, self.levels)[self.levels],
        )
    }

    pub fn ll(&self) -> Vec<f64> {
        let (r, c) = self.ll_dims();
        self.block(0..r, 0..c)
    }

    /// Detail band at `level` (1 = finest).
    pub fn subband(&self, level: usize, o: Orientation) -> Vec<f64> {
        assert!((1..=self.levels).contains(&level));
        let ra = approx_lengths(self.rows, self.levels);
        let ca = approx_lengths(self.cols, self.levels);
        let (r_lo, r_hi) = (ra[level], ra[level - 1]);
        let (c_lo, c_hi) = (ca[level], ca[level - 1]);
        match o {
            Orientation::HL => self.block(0..r_lo, c_lo..c_hi),
            Orientation::LH => self.block(r_lo..r_hi, 0..c_lo),
            Orientation::HH => self.block(r_lo..r_hi, c_lo..c_hi),
        }
    }

    fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Vec<f64> {
        rows.flat_map(|r| {
            let base = r * self.cols;
            self.coeffs[base + cols.start..base + cols.end].iter().copied()
        })
        .collect()
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

fn column_pass(data: &mut [f64], cols: usize, n_rows: usize, n_cols: usize, forward: bool) {
    let mut col = vec![0.0; n_rows];
    let mut scratch = vec![0.0; n_rows];
    for c in 0..n_cols {
        for r in 0..n_rows {
            col[r] = data[r * cols + c];
        }
        if forward {
            analyze(&mut col, &mut scratch);
        } else {
            synthesize(&mut col, &mut scratch);
        }
        for r in 0..n_rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// Separable `levels`-deep analysis of a matrix: rows first, then columns.
pub fn dwt2d(m: &SignalMatrix, levels: usize) -> Result<WaveletPyramid2D> {
    let (rows, cols) = m.dims();
    check_depth(rows, levels, "matrix column")?;
    check_depth(cols, levels, "matrix row")?;
    let mut data = m.data().to_vec();
    let ra = approx_lengths(rows, levels);
    let ca = approx_lengths(cols, levels);
    let mut scratch = vec![0.0; cols.max(rows)];
    for l in 0..levels {
        let (nr, nc) = (ra[l], ca[l]);
        for r in 0..nr {
            analyze(&mut data[r * cols..r * cols + nc], &mut scratch);
        }
        column_pass(&mut data, cols, nr, nc, true);
    }
    Ok(WaveletPyramid2D {
        levels,
        rows,
        cols,
        coeffs: data,
    })
}

pub fn idwt2d(pyr: &WaveletPyramid2D) -> Result<SignalMatrix> {
    let (rows, cols) = (pyr.rows, pyr.cols);
    if pyr.coeffs.len() != rows * cols {
        return Err(Error::structure("2D pyramid coefficient count mismatch"));
    }
    check_depth(rows, pyr.levels, "matrix column")?;
    check_depth(cols, pyr.levels, "matrix row")?;
    let mut data = pyr.coeffs.clone();
    let ra = approx_lengths(rows, pyr.levels);
    let ca = approx_lengths(cols, pyr.levels);
    let mut scratch = vec![0.0; cols.max(rows)];
    for l in (0..pyr.levels).rev() {
        let (nr, nc) = (ra[l], ca[l]);
        column_pass(&mut data, cols, nr, nc, false);
        for r in 0..nr {
            synthesize(&mut data[r * cols..r * cols + nc], &mut scratch);
        }
    }
    SignalMatrix::new(rows, cols, data)
}

/// Canonical EEG rhythm bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rhythm {
    Delta = 0,
    Theta = 1,
    Alpha = 2,
    Beta = 3,
    Gamma = 4,
}

impl Rhythm {
    pub const ALL: [Rhythm; 5] = [
        Rhythm::Delta,
        Rhythm::Theta,
        Rhythm::Alpha,
        Rhythm::Beta,
        Rhythm::Gamma,
    ];

    /// Band edges in Hz.
    pub fn edges(self) -> (f64, f64) {
        match self {
            Rhythm::Delta => (0.0, 4.0),
            Rhythm::Theta => (4.0, 8.0),
            Rhythm::Alpha => (8.0, 13.0),
            Rhythm::Beta => (13.0, 30.0),
            Rhythm::Gamma => (30.0, 100.0),
        }
    }

    /// Rhythm that overlaps `[lo, hi]` the most. Bands that miss every
    /// rhythm go to the nearest one so no energy is dropped.
    pub fn for_band(lo: f64, hi: f64) -> Rhythm {
        let mut best = (Rhythm::Delta, f64::NEG_INFINITY);
        for r in Rhythm::ALL {
            let (a, b) = r.edges();
            let overlap = hi.min(b) - lo.max(a);
            // Negative values measure the gap to a non-overlapping band.
            if overlap > best.1 {
                best = (r, overlap);
            }
        }
        best.0
    }
}

/// Per-rhythm energies in squared microvolts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BandEnergyVector(pub [f64; 5]);

impl BandEnergyVector {
    pub fn get(&self, r: Rhythm) -> f64 {
        self.0[r as usize]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Energy in the theta, alpha and beta bands (roughly 3-30 Hz).
    pub fn mid_band(&self) -> f64 {
        self.get(Rhythm::Theta) + self.get(Rhythm::Alpha) + self.get(Rhythm::Beta)
    }

    /// Unit-sum copy, or `None` when the total energy is zero.
    pub fn normalized(&self) -> Option<BandEnergyVector> {
        let t = self.total();
        (t > 0.0).then(|| BandEnergyVector(self.0.map(|e| e / t)))
    }

    pub fn distance(&self, other: &BandEnergyVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Frequency span `[lo, hi]` of each flat-order band of a pyramid.
pub fn band_spans(levels: usize, fs: f64) -> Vec<(f64, f64)> {
    let nyq = fs / 2.0;
    let mut out = vec![(0.0, nyq / f64::from(1u32 << levels))];
    for k in (1..=levels).rev() {
        let hi = nyq / f64::from(1u32 << (k - 1));
        out.push((hi / 2.0, hi));
    }
    out
}

/// Assigns each dyadic sub-band's energy to the rhythm it overlaps most.
pub fn band_energies(pyr: &WaveletPyramid1D, fs: f64) -> BandEnergyVector {
    assert!(fs > 0.0, "sampling rate must be positive");
    let spans = band_spans(pyr.levels, fs);
    let mut out = [0.0; 5];
    let bands = std::iter::once(&pyr.approx).chain(pyr.details.iter());
    for (band, (lo, hi)) in bands.zip(spans) {
        let e: f64 = band.iter().map(|c| c * c).sum();
        out[Rhythm::for_band(lo, hi) as usize] += e;
    }
    BandEnergyVector(out)
}
