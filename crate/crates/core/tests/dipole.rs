mod common;

use common::*;
use eegcodec::codec_dipole::fit::seeds;
use eegcodec::codec_dipole::head::{potential, HEAD_RADIUS, STANDARD_BIPOLAR};
use eegcodec::codec_dipole::{self, compress, decompress, fit_window, smoothness, DipoleConfig, HeadModel};
use eegcodec::codec_spiht2d::{self, Spiht2dConfig};
use eegcodec::metrics::prd;
use eegcodec::{Error, SignalMatrix};
use rand::Rng;

const R: f64 = HEAD_RADIUS;

/// Legendre-series potential of a dipole in a homogeneous unit-conductivity
/// sphere, summed term by term. Independent of the closed form under test.
fn series_potential(r: [f64; 3], p: [f64; 3], q: [f64; 3]) -> f64 {
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let b = dot(p, p).sqrt();
    let rh = r.map(|v| v / R);
    let ph = p.map(|v| v / b);
    let x = dot(rh, ph).clamp(-1.0, 1.0);
    let s = (1.0 - x * x).sqrt();
    let t = [0, 1, 2].map(|k| (rh[k] - x * ph[k]) / s);
    let (qr, qt) = (dot(q, ph), dot(q, t));
    let f = b / R;
    // P_n and P_n' by recurrence.
    let (mut p0, mut p1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    let mut sum = 0.0;
    let mut fp = 1.0;
    for n in 1..2000usize {
        let nf = n as f64;
        let term = (2.0 * nf + 1.0) / nf * fp * (nf * qr * p1 + qt * s * d1);
        sum += term;
        if fp < 1e-18 {
            break;
        }
        let p2 = ((2.0 * nf + 1.0) * x * p1 - nf * p0) / (nf + 1.0);
        let d2 = d0 + (2.0 * nf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
        fp *= f;
    }
    sum / (4.0 * std::f64::consts::PI * R * R)
}

fn surface_point(rng: &mut rand_chacha::ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = in_ball(rng, 1.0);
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 0.1 {
            return v.map(|a| a / n * R);
        }
    }
}

#[test]
fn closed_form_matches_the_series() {
    let mut rng = rng(31);
    let mut worst = 0.0_f64;
    for _ in 0..2000 {
        let r = surface_point(&mut rng);
        let p = in_ball(&mut rng, 0.7 * R);
        let q = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
        let a = potential(r, p, q, R);
        let b = series_potential(r, p, q);
        let scale = 1.0 / (4.0 * std::f64::consts::PI * R * R);
        worst = worst.max((a - b).abs() / scale);
    }
    assert!(worst < 1e-9, "max scaled difference {worst}");
}

#[test]
fn lead_field_is_linear_in_the_moment() {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    let mut rng = rng(32);
    let p = in_ball(&mut rng, 0.5 * R);
    let q1 = moment_trajectory(&mut rng, 16, 256.0);
    let q2 = moment_trajectory(&mut rng, 16, 256.0);
    let (a, b) = (1.7, -0.4);
    let mix: Vec<[f64; 3]> = q1.iter().zip(&q2).map(|(x, y)| [0, 1, 2].map(|k| a * x[k] + b * y[k])).collect();
    let (m1, m2, mm) = (project(&model, p, &q1), project(&model, p, &q2), project(&model, p, &mix));
    for i in 0..mm.data().len() {
        let want = a * m1.data()[i] + b * m2.data()[i];
        assert!((mm.data()[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
    }
    let double: Vec<[f64; 3]> = q1.iter().map(|x| x.map(|v| 2.0 * v)).collect();
    let md = project(&model, p, &double);
    for (x, y) in md.data().iter().zip(m1.data()) {
        assert!((x - 2.0 * y).abs() <= 1e-12 * y.abs().max(1.0));
    }
}

#[test]
fn known_dipoles_are_recovered() {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    let mut rng = rng(33);
    for _ in 0..10 {
        let p = in_ball(&mut rng, 0.9 * R);
        let q = moment_trajectory(&mut rng, 64, 256.0);
        let w = project(&model, p, &q);
        let fit = fit_window(&w, &model).unwrap();
        let err = fit.dipole.position.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(err < 1e-3 * R, "position error {} R", err / R);
        assert!(fit.rho < 1e-8, "rho {}", fit.rho);
        assert!(fit.trace.windows(2).all(|t| t[1] <= t[0]));
    }
}

#[test]
fn grid_search_never_beats_the_fit() {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    let mut rng = rng(34);
    for _ in 0..5 {
        // Two sources plus noise, so the optimum is not trivially zero.
        let w1 = project(&model, in_ball(&mut rng, 0.5 * R), &moment_trajectory(&mut rng, 64, 256.0));
        let w2 = project(&model, in_ball(&mut rng, 0.5 * R), &moment_trajectory(&mut rng, 64, 256.0));
        let data: Vec<f64> = w1
            .data()
            .iter()
            .zip(w2.data())
            .map(|(a, b)| a + 0.3 * b + rng.gen_range(-0.5..0.5))
            .collect();
        let w = SignalMatrix::new(w1.n_channels(), 64, data).unwrap();
        let fit = fit_window(&w, &model).unwrap();
        let g = grid_minimum(&model, &w);
        assert!(g >= fit.objective * (1.0 - 1e-6), "grid {g} < fit {}", fit.objective);
    }
}

#[test]
fn zero_window_convention() {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    let fit = fit_window(&SignalMatrix::zeros(23, 32), &model).unwrap();
    assert_eq!(fit.rho, 0.0);
    assert_eq!(fit.dipole.position, seeds(R)[0]);
    assert!(fit.dipole.moments.iter().all(|&v| v == 0.0));
}

#[test]
fn fit_preconditions() {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    assert!(matches!(fit_window(&SignalMatrix::zeros(23, 7), &model), Err(Error::Size(_))));
    assert!(matches!(fit_window(&SignalMatrix::zeros(5, 64), &model), Err(Error::Structure(_))));
}

#[test]
fn white_noise_smoothness_matches_the_spectrum() {
    let mut rng = rng(35);
    for _ in 0..5 {
        let m = SignalMatrix::new(4, 2048, (0..4 * 2048).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let s = smoothness(&m, 256.0).unwrap();
        let (mut low, mut total) = (0.0, 0.0);
        for row in m.rows() {
            low += dft_band_power(row, 256.0, 0.0, 32.0);
            total += dft_band_power(row, 256.0, 0.0, 129.0);
        }
        assert!((s - low / total).abs() < 0.05, "wavelet {s} vs dft {}", low / total);
    }
}

#[test]
fn single_dipole_data_codes_well_at_two_bps() {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    let mut rng = rng(36);
    let m = dipole_recording(&mut rng, &model, 2048, 512, 256.0);
    let c = compress(&m, &STANDARD_BIPOLAR, 256, 2.0, &DipoleConfig::default()).unwrap();
    assert!(c.payload_bits() + c.side_info_bits() - codec_dipole::preamble_bits(&c).unwrap() <= 2 * 23 * 2048);
    let out = decompress(&c).unwrap();
    let pd = prd(&m, &out).unwrap();
    assert!(pd < 5.0, "dipole prd {pd}");
    let s = codec_spiht2d::compress(&m, 256, 2.0, &Spiht2dConfig::default()).unwrap();
    let ps = prd(&m, &codec_spiht2d::decompress(&s).unwrap()).unwrap();
    assert!(pd < ps, "dipole {pd} vs spiht2d {ps}");
}

#[test]
fn zero_recording_gives_zero_output() {
    let m = SignalMatrix::zeros(23, 1024);
    let c = compress(&m, &STANDARD_BIPOLAR, 256, 2.0, &DipoleConfig::default()).unwrap();
    assert_eq!(c.payload_bits(), 0);
    assert_eq!(decompress(&c).unwrap(), m);
}

#[test]
fn recompressing_the_output_does_not_lose_more() {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    let mut rng = rng(37);
    let mut m = dipole_recording(&mut rng, &model, 1024, 512, 256.0);
    let noise: Vec<f64> = (0..m.data().len()).map(|_| rng.gen_range(-0.2..0.2)).collect();
    m.data_mut().iter_mut().zip(&noise).for_each(|(v, e)| *v += e);
    let cfg = DipoleConfig::default();
    let once = decompress(&compress(&m, &STANDARD_BIPOLAR, 256, 3.0, &cfg).unwrap()).unwrap();
    let twice = decompress(&compress(&once, &STANDARD_BIPOLAR, 256, 3.0, &cfg).unwrap()).unwrap();
    let p1 = prd(&m, &once).unwrap();
    let p2 = prd(&once, &twice).unwrap();
    assert!(p2 <= p1 + 1e-6, "second pass {p2} vs first {p1}");
}

#[test]
fn too_few_channels_for_the_side_info_is_a_budget_error() {
    let m = SignalMatrix::new(2, 512, (0..1024).map(|t| (t as f64 * 0.1).sin()).collect()).unwrap();
    let r = compress(&m, &["C3-P3", "C4-P4"], 256, 2.0, &DipoleConfig::default());
    assert!(matches!(r, Err(Error::Budget(_))));
}
