#![allow(dead_code)]

pub mod filter_bank;

use eegcodec::SignalMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Resonant AR(2) noise: a rough stand-in for one EEG rhythm.
pub fn ar2(rng: &mut ChaCha8Rng, n: usize, f: f64, r: f64, fs: f64) -> Vec<f64> {
    let a1 = 2.0 * r * (TAU * f / fs).cos();
    let a2 = -r * r;
    let (mut x1, mut x2) = (0.0, 0.0);
    let mut out = Vec::with_capacity(n + 200);
    for _ in 0..n + 200 {
        let x = a1 * x1 + a2 * x2 + rng.gen_range(-1.0..1.0);
        out.push(x);
        x2 = x1;
        x1 = x;
    }
    out.split_off(200)
}

/// Background activity: a few shared rhythm sources mixed into `c`
/// channels, plus a little channel-private noise. Amplitudes in the tens
/// of microvolts.
pub fn background(rng: &mut ChaCha8Rng, c: usize, n: usize, fs: f64) -> SignalMatrix {
    let sources: Vec<Vec<f64>> = [(2.0, 0.97), (6.0, 0.95), (10.0, 0.97), (20.0, 0.9)]
        .iter()
        .map(|&(f, r)| ar2(rng, n, f, r, fs))
        .collect();
    let mut m = SignalMatrix::zeros(c, n);
    for ch in 0..c {
        let w: Vec<f64> = (0..sources.len()).map(|_| rng.gen_range(0.2..1.0)).collect();
        let private = ar2(rng, n, 8.0, 0.8, fs);
        let row = m.row_mut(ch);
        for t in 0..n {
            row[t] = sources.iter().zip(&w).map(|(s, a)| a * s[t]).sum::<f64>() + 0.3 * private[t];
        }
    }
    m
}

/// One background segment of `period` samples repeated to length `n`.
pub fn periodic(rng: &mut ChaCha8Rng, c: usize, n: usize, period: usize, fs: f64) -> SignalMatrix {
    let seg = background(rng, c, period, fs);
    let mut m = SignalMatrix::zeros(c, n);
    for ch in 0..c {
        for t in 0..n {
            m.set(ch, t, seg.get(ch, t % period));
        }
    }
    m
}

/// Adds `amp * sin(2 pi f t)` on every channel over `[start_s, end_s)`.
pub fn add_burst(m: &mut SignalMatrix, fs: f64, start_s: f64, end_s: f64, f: f64, amp: f64) {
    let a = (start_s * fs) as usize;
    let b = ((end_s * fs) as usize).min(m.n_samples());
    for ch in 0..m.n_channels() {
        let row = m.row_mut(ch);
        for (t, v) in row.iter_mut().enumerate().take(b).skip(a) {
            *v += amp * (TAU * f * t as f64 / fs).sin();
        }
    }
}

/// Power of a real sequence in `[lo, hi)` Hz from a direct DFT.
pub fn dft_band_power(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let mut p = 0.0;
    for k in 0..=n / 2 {
        let f = k as f64 * fs / n as f64;
        if f < lo || f >= hi {
            continue;
        }
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let ang = TAU * (k * t % n) as f64 / n as f64;
            re += v * ang.cos();
            im -= v * ang.sin();
        }
        let w = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
        p += w * (re * re + im * im);
    }
    p / n as f64
}

/// Uniform point in the ball of radius `r`.
pub fn in_ball(rng: &mut ChaCha8Rng, r: f64) -> [f64; 3] {
    loop {
        let p = [0, 1, 2].map(|_| rng.gen_range(-r..r));
        if p.iter().map(|v| v * v).sum::<f64>() < r * r {
            return p;
        }
    }
}

/// 3 x n moment trajectory: a few sinusoids per axis, rotating the dipole.
pub fn moment_trajectory(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Vec<[f64; 3]> {
    let comps: Vec<[(f64, f64, f64); 3]> = (0..3)
        .map(|_| [0, 1, 2].map(|_| (rng.gen_range(1.0..20.0), rng.gen_range(0.0..TAU), rng.gen_range(0.3..1.5))))
        .collect();
    (0..n)
        .map(|t| {
            let x = t as f64 / fs;
            [0, 1, 2].map(|k| comps.iter().map(|c| c[k].2 * (TAU * c[k].0 * x + c[k].1).sin()).sum())
        })
        .collect()
}

/// Channels x n potentials of the dipole at `p` with the given moments.
pub fn project(model: &eegcodec::codec_dipole::HeadModel, p: [f64; 3], q: &[[f64; 3]]) -> SignalMatrix {
    let l = model.lead_field(p).unwrap();
    let mut m = SignalMatrix::zeros(model.n_channels(), q.len());
    for ch in 0..model.n_channels() {
        for (t, qt) in q.iter().enumerate() {
            m.set(ch, t, (0..3).map(|k| l[(ch, k)] * qt[k]).sum());
        }
    }
    m
}

/// Single-dipole data with a slowly wandering source, one position per
/// `hold` samples.
pub fn dipole_recording(rng: &mut ChaCha8Rng, model: &eegcodec::codec_dipole::HeadModel, n: usize, hold: usize, fs: f64) -> SignalMatrix {
    let r = model.radius;
    let mut m = SignalMatrix::zeros(model.n_channels(), n);
    let mut start = 0;
    while start < n {
        let len = hold.min(n - start);
        let mut p = in_ball(rng, 0.5 * r);
        p[2] = p[2].abs() * 0.5 + 0.2 * r;
        let q = moment_trajectory(rng, len, fs);
        let block = project(model, p, &q);
        for ch in 0..model.n_channels() {
            m.row_mut(ch)[start..start + len].copy_from_slice(block.row(ch));
        }
        start += len;
    }
    m
}

/// Adds a 10 Hz burst on `[start_s, end_s)` whose mid-band energy is
/// `(factor - 1)` times the recording's median epoch statistic, so the
/// burst epochs sit near `factor` times the baseline.
pub fn inject_burst(m: &mut SignalMatrix, fs: u32, start_s: f64, end_s: f64, factor: f64) {
    let stat = eegcodec::detection::epoch_statistic(m, fs, 2.0).unwrap();
    let mut s = stat.clone();
    s.sort_by(f64::total_cmp);
    let med = s[s.len() / 2];
    let epoch = 2.0 * fs as f64;
    let amp = (2.0 * (factor - 1.0) * med / epoch).sqrt();
    add_burst(m, fs as f64, start_s, end_s, 10.0, amp);
}

/// Smallest objective over a 5 x 5 x 5 grid spanning the cube of side
/// 1.6 R, skipping points outside the search region.
pub fn grid_minimum(model: &eegcodec::codec_dipole::HeadModel, w: &SignalMatrix) -> f64 {
    let wm = nalgebra::DMatrix::from_row_slice(w.n_channels(), w.n_samples(), w.data());
    let s = &wm * wm.transpose();
    let tr = s.trace();
    let r = model.radius;
    let axis = |i: usize| -0.8 * r + 0.4 * r * i as f64;
    let mut best = f64::INFINITY;
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                if let Some(g) = eegcodec::codec_dipole::fit::objective(model, &s, tr, [axis(i), axis(j), axis(k)]) {
                    best = best.min(g);
                }
            }
        }
    }
    best
}

/// Integers with wavelet-like decay: large near the coarse corner.
pub fn pyramid_like(rng: &mut ChaCha8Rng, shape: eegcodec::spiht::SpihtShape) -> Vec<i32> {
    let n = shape.coefficient_count();
    (0..n)
        .map(|i| {
            let mag = 4000.0 / (1.0 + i as f64 / 8.0);
            let v = rng.gen_range(-mag..mag);
            v.round() as i32
        })
        .collect()
}

pub fn int_mse(a: &[i32], b: &[i32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum::<f64>()
        / a.len() as f64
}
