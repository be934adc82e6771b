//! Acceptance criteria. Runs as a plain binary and prints one PASS/FAIL line
//! per criterion, including its wall time against the allowed limit.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::filter_bank::{naive_dwt, naive_level};
use common::*;
use eegcodec::codec::{compress_matrix, decompress, CodecSettings};
use eegcodec::codec_dictionary::{DictionaryConfig, DictionaryDecoder, DictionaryEncoder};
use eegcodec::codec_dipole::head::STANDARD_BIPOLAR;
use eegcodec::codec_dipole::{fit_window, HeadModel};
use eegcodec::detection::{aggregate, detect_matrix, match_flags, DetectionReport, DetectorConfig};
use eegcodec::metrics::prd;
use eegcodec::spiht::{decode, encode, quantize, SpihtShape};
use eegcodec::wavelet::{dwt1d, dwt2d, idwt1d, idwt2d, max_levels};
use eegcodec::{CodecId, FlagSection, SignalMatrix};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// Per-patient (detections, tp %, fp) for one method and rate.
type Column = [(usize, f64, usize); 12];

const DETECTIONS: [usize; 12] = [6, 1, 9, 6, 8, 25, 5, 2, 10, 2, 4, 9];

fn column(tp: [f64; 12], fp: [usize; 12]) -> Column {
    std::array::from_fn(|i| (DETECTIONS[i], tp[i], fp[i]))
}

fn table() -> Vec<(&'static str, Column, f64, f64)> {
    vec![
        (
            "dipole 2 bps",
            column(
                [83.33, 100.0, 88.89, 100.0, 87.5, 88.0, 100.0, 100.0, 100.0, 100.0, 100.0, 77.78],
                [1, 0, 1, 0, 1, 3, 0, 0, 0, 0, 0, 2],
            ),
            93.79,
            0.67,
        ),
        (
            "dipole 4 bps",
            column(
                [100.0, 100.0, 100.0, 50.0, 87.5, 100.0, 100.0, 100.0, 100.0, 100.0, 75.0, 100.0],
                [0, 0, 0, 3, 1, 0, 0, 0, 0, 0, 1, 0],
            ),
            92.71,
            0.42,
        ),
        (
            "dictionary 2 bps",
            column(
                [100.0, 100.0, 88.89, 33.33, 100.0, 100.0, 100.0, 100.0, 60.0, 100.0, 75.0, 77.78],
                [0, 0, 1, 4, 0, 0, 0, 0, 4, 0, 1, 2],
            ),
            86.25,
            1.00,
        ),
        (
            "dictionary 4 bps",
            column(
                [83.33, 100.0, 100.0, 50.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 75.0, 88.89],
                [1, 0, 0, 3, 0, 0, 0, 0, 0, 0, 1, 1],
            ),
            91.44,
            0.5,
        ),
        (
            "spiht2d 2 bps",
            column(
                [83.33, 100.0, 88.89, 16.67, 100.0, 60.0, 100.0, 100.0, 90.0, 100.0, 75.0, 77.78],
                [1, 0, 1, 5, 0, 10, 0, 0, 1, 0, 1, 2],
            ),
            82.64,
            1.75,
        ),
        (
            "spiht2d 4 bps",
            column(
                [100.0, 100.0, 88.89, 0.0, 100.0, 96.0, 100.0, 100.0, 80.0, 100.0, 100.0, 88.89],
                [0, 0, 1, 6, 0, 1, 0, 0, 2, 0, 0, 1],
            ),
            87.81,
            0.92,
        ),
    ]
}

fn table_averages() -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, col, tp_avg, fp_avg) in table() {
        let reports: Vec<DetectionReport> = col
            .iter()
            .map(|&(n, tp, fp)| DetectionReport {
                ground_truth_count: n,
                tp_count: (tp * n as f64 / 100.0).round() as usize,
                tp_percent: Some(tp),
                fp_count: fp,
            })
            .collect();
        let s = aggregate(&reports).map_err(|e| e.to_string())?;
        let tp = s.mean_tp_percent.ok_or("no TP mean")?;
        let (dt, df) = ((tp - tp_avg).abs(), (s.mean_fp - fp_avg).abs());
        ensure(dt <= 0.01 && df <= 0.01, || format!("{name}: got {tp:.4}/{:.4}, published {tp_avg}/{fp_avg}", s.mean_fp))?;
        worst = worst.max(dt).max(df);
    }
    Ok(format!("six averages reproduced, largest deviation {worst:.4}"))
}

fn sec(a: f64, b: f64) -> FlagSection {
    FlagSection::new(a, b, "s").unwrap()
}

fn overlap_rule() -> Outcome {
    let originals: Vec<FlagSection> = (0..6).map(|i| sec(1000.0 * i as f64, 1000.0 * i as f64 + 120.0)).collect();
    // Five sections overlap by 60 s or more, the sixth lands elsewhere.
    let mut compressed: Vec<FlagSection> = (0..5).map(|i| sec(1000.0 * i as f64 + 60.0, 1000.0 * i as f64 + 200.0)).collect();
    compressed.push(sec(5500.0, 5600.0));
    let r = match_flags(&originals, &compressed);
    ensure(r.tp_count == 5 && r.fp_count == 1, || format!("5 of 6: {r:?}"))?;
    let pct = r.tp_percent.ok_or("no percentage")?;
    ensure((pct * 100.0).round() / 100.0 == 83.33, || format!("5 of 6 gives {pct}"))?;

    let r = match_flags(&[sec(0.0, 100.0)], &[sec(41.0, 200.0)]);
    ensure(r.tp_count == 0 && r.fp_count == 1 && r.tp_percent == Some(0.0), || format!("59 s: {r:?}"))?;

    let r = match_flags(&originals, &originals);
    ensure(r.tp_percent == Some(100.0) && r.fp_count == 0, || format!("identical: {r:?}"))?;
    Ok("5/6 -> 83.33%/1, 59 s -> 0/1, identical -> 100%/0".into())
}

fn naive_dwt2d(m: &SignalMatrix, levels: usize) -> Vec<f64> {
    let (rows, cols) = m.dims();
    let mut d = m.data().to_vec();
    let (mut nr, mut nc) = (rows, cols);
    for _ in 0..levels {
        for r in 0..nr {
            let (l, h) = naive_level(&d[r * cols..r * cols + nc]);
            d[r * cols..r * cols + nc].copy_from_slice(&[l, h].concat());
        }
        for c in 0..nc {
            let col: Vec<f64> = (0..nr).map(|r| d[r * cols + c]).collect();
            let (l, h) = naive_level(&col);
            for (r, v) in l.into_iter().chain(h).enumerate() {
                d[r * cols + c] = v;
            }
        }
        nr = nr.div_ceil(2);
        nc = nc.div_ceil(2);
    }
    d
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn transforms() -> Outcome {
    let mut r = rng(101);
    let (mut rt, mut oracle) = (0.0f64, 0.0f64);
    for i in 0..100 {
        if i % 2 == 0 {
            let n = r.gen_range(16..3000);
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(-100.0..100.0)).collect();
            let levels = r.gen_range(1..=max_levels(n, 6));
            let p = dwt1d(&x, levels).map_err(|e| e.to_string())?;
            oracle = oracle.max(max_abs_diff(&p.to_flat(), &naive_dwt(&x, levels)));
            rt = rt.max(max_abs_diff(&idwt1d(&p).map_err(|e| e.to_string())?, &x));
        } else {
            let (rows, cols) = (r.gen_range(4..48), r.gen_range(8..300));
            let data = (0..rows * cols).map(|_| r.gen_range(-100.0..100.0)).collect();
            let m = SignalMatrix::new(rows, cols, data).unwrap();
            let levels = r.gen_range(1..=max_levels(rows.min(cols), 4));
            let p = dwt2d(&m, levels).map_err(|e| e.to_string())?;
            oracle = oracle.max(max_abs_diff(&p.coeffs, &naive_dwt2d(&m, levels)));
            rt = rt.max(max_abs_diff(idwt2d(&p).map_err(|e| e.to_string())?.data(), m.data()));
        }
    }
    ensure(rt < 1e-8 && oracle < 1e-10, || format!("round trip {rt:e}, oracle {oracle:e}"))?;
    Ok(format!("100 inputs: round trip {rt:.1e}, filter bank {oracle:.1e}"))
}

/// A random shape and integer coefficients for it, either from a real
/// transform of noise or from a synthetic decaying profile.
fn random_pyramid(r: &mut rand_chacha::ChaCha8Rng, i: usize) -> (SpihtShape, Vec<i32>) {
    if i % 4 == 3 {
        let len = r.gen_range(64..4000);
        let levels = r.gen_range(1..=max_levels(len, 6));
        let shape = SpihtShape::OneD { len, levels, count: 1 };
        let x = ar2(r, len, 10.0, 0.95, 256.0);
        let p = dwt1d(&x, levels).unwrap();
        return (shape, quantize(&p.to_flat(), 16).unwrap().values);
    }
    let (rows, cols) = (r.gen_range(8..40), r.gen_range(16..256));
    let levels = r.gen_range(1..=max_levels(rows.min(cols), 4));
    let shape = SpihtShape::TwoD { rows, cols, levels };
    if i % 2 == 0 {
        let m = background(r, rows, cols, 256.0);
        let p = dwt2d(&m, levels).unwrap();
        (shape, quantize(&p.coeffs, 16).unwrap().values)
    } else {
        (shape, pyramid_like(r, shape))
    }
}

fn spiht_contract() -> Outcome {
    let mut r = rng(102);
    let mut checked = 0;
    for i in 0..200 {
        let (shape, v) = random_pyramid(&mut r, i);
        for bps in [0.5, 1.0, 2.0, 4.0, 16.0] {
            let budget = (bps * v.len() as f64) as usize;
            let s = encode(&v, shape, budget).map_err(|e| e.to_string())?;
            ensure(s.len_bits() <= budget, || format!("{shape:?} at {bps} bps: {} > {budget}", s.len_bits()))?;
            checked += 1;
        }
        let full = encode(&v, shape, usize::MAX).map_err(|e| e.to_string())?;
        ensure(decode(&full, shape).map_err(|e| e.to_string())? == v, || format!("{shape:?} not lossless"))?;
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let e = int_mse(&v, &decode(&full.prefix(full.len_bits() * k / 10), shape).map_err(|e| e.to_string())?);
            ensure(e <= last, || format!("{shape:?}: prefix {k}/10 MSE {e} > {last}"))?;
            last = e;
        }
    }
    Ok(format!("{checked} budgeted streams within budget, 200 lossless, prefix MSE monotone"))
}

fn dipole_oracle() -> Outcome {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    let radius = model.radius;
    let mut r = rng(103);
    let (mut worst_pos, mut worst_rho) = (0.0f64, 0.0f64);
    let grid_ok = |w: &SignalMatrix, f: f64| grid_minimum(&model, w) >= f * (1.0 - 1e-6);
    for i in 0..50 {
        let p = in_ball(&mut r, 0.9 * radius);
        let w = project(&model, p, &moment_trajectory(&mut r, 64, 256.0));
        let fit = fit_window(&w, &model).map_err(|e| e.to_string())?;
        let err = fit.dipole.position.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        ensure(err < 1e-3 * radius && fit.rho < 1e-8, || format!("dipole {i}: error {:.2e} R, rho {:.2e}", err / radius, fit.rho))?;
        ensure(grid_ok(&w, fit.objective), || format!("dipole {i}: grid beats the fit"))?;
        worst_pos = worst_pos.max(err / radius);
        worst_rho = worst_rho.max(fit.rho);
    }
    // Two sources plus noise, where the optimum objective is well above zero.
    for i in 0..10 {
        let w1 = project(&model, in_ball(&mut r, 0.5 * radius), &moment_trajectory(&mut r, 64, 256.0));
        let w2 = project(&model, in_ball(&mut r, 0.5 * radius), &moment_trajectory(&mut r, 64, 256.0));
        let data = w1.data().iter().zip(w2.data()).map(|(a, b)| a + 0.3 * b + r.gen_range(-0.5..0.5)).collect();
        let w = SignalMatrix::new(w1.n_channels(), 64, data).unwrap();
        let fit = fit_window(&w, &model).map_err(|e| e.to_string())?;
        ensure(grid_ok(&w, fit.objective), || format!("noisy window {i}: grid beats the fit"))?;
    }
    Ok(format!("50 dipoles: position error <= {worst_pos:.1e} R, rho <= {worst_rho:.1e}; grid never better"))
}

fn codec_prd(m: &SignalMatrix, codec: CodecId, bps: f64) -> Result<f64, String> {
    let settings = CodecSettings::default();
    let labels = &STANDARD_BIPOLAR[..m.n_channels()];
    let rec = compress_matrix(m, labels, 256, codec, bps, &settings).map_err(|e| format!("{}: {e}", codec.name()))?;
    let out = decompress(&rec).map_err(|e| format!("{}: {e}", codec.name()))?;
    prd(m, &out).map_err(|e| e.to_string())
}

fn dipole_signal(seed: u64) -> SignalMatrix {
    let model = HeadModel::from_labels(&STANDARD_BIPOLAR).unwrap();
    dipole_recording(&mut rng(seed), &model, 4096, 512, 256.0)
}

fn method_ordering() -> Outcome {
    let m = dipole_signal(104);
    let [dp, di, sp] = [CodecId::Dipole, CodecId::Dictionary, CodecId::Spiht2d].map(|c| codec_prd(&m, c, 2.0));
    let (dp, di, sp) = (dp?, di?, sp?);
    ensure(dp < di && dp < sp, || format!("dipole data: dipole {dp:.3}%, dictionary {di:.3}%, spiht2d {sp:.3}%"))?;
    let p = periodic(&mut rng(105), 23, 16 * 1024, 1024, 256.0);
    let (pdi, psp) = (codec_prd(&p, CodecId::Dictionary, 2.0)?, codec_prd(&p, CodecId::Spiht2d, 2.0)?);
    ensure(pdi < psp, || format!("periodic data: dictionary {pdi:.3}%, spiht2d {psp:.3}%"))?;
    Ok(format!(
        "dipole data PRD: dipole {dp:.3}%, dictionary {di:.3}%, spiht2d {sp:.3}%; periodic: dictionary {pdi:.3}%, spiht2d {psp:.3}%"
    ))
}

fn rate_distortion() -> Outcome {
    let mut r = rng(106);
    let mut burst = background(&mut r, 23, 300 * 256, 256.0);
    inject_burst(&mut burst, 256, 150.0, 210.0, 8.0);
    let signals = [
        ("background", background(&mut r, 23, 60 * 256, 256.0)),
        ("dipole", dipole_signal(107)),
        ("periodic", periodic(&mut r, 23, 16 * 1024, 1024, 256.0)),
        ("burst", burst),
    ];
    let mut n = 0;
    for (name, m) in &signals {
        for codec in [CodecId::Spiht2d, CodecId::Dictionary, CodecId::Dipole] {
            let (p2, p4) = (codec_prd(m, codec, 2.0)?, codec_prd(m, codec, 4.0)?);
            ensure(p4 <= p2, || format!("{name}/{}: 4 bps {p4:.4}% > 2 bps {p2:.4}%", codec.name()))?;
            n += 1;
        }
    }
    Ok(format!("{n} codec/signal pairs, PRD at 4 bps never above 2 bps"))
}

fn dictionary_sync() -> Outcome {
    let mut r = rng(108);
    let cfg = DictionaryConfig { epoch: 256, capacity: 6, tau: 0.3, ..Default::default() };
    let pool: Vec<Vec<f64>> = (0..10).map(|_| background(&mut r, 1, 256, 256.0).row(0).to_vec()).collect();
    let mut enc = DictionaryEncoder::new(cfg, 256.0).map_err(|e| e.to_string())?;
    let mut dec = DictionaryDecoder::new(cfg, 256.0).map_err(|e| e.to_string())?;
    let mut refs = 0;
    for i in 0..1000 {
        let seg: Vec<f64> = if r.gen_bool(0.2) {
            let f = r.gen_range(1.0..60.0);
            ar2(&mut r, 256, f, 0.95, 256.0)
        } else {
            let gain = r.gen_range(0.5..2.0);
            pool[r.gen_range(0..pool.len())].iter().map(|v| v * gain + r.gen_range(-0.5..0.5)).collect()
        };
        let budget = r.gen_range(16..2048);
        let e = enc.encode_segment(&seg, budget).map_err(|e| e.to_string())?;
        refs += matches!(e.mode, eegcodec::codec_dictionary::SegmentMode::Reference(_)) as usize;
        let d = dec.decode_segment(e.mode, e.scale, &e.bits).map_err(|e| e.to_string())?;
        ensure(d == e.reconstruction, || format!("segment {i}: reconstructions differ"))?;
        ensure(enc.list() == dec.list(), || format!("segment {i}: reference lists differ"))?;
    }
    Ok(format!("1000 segments ({refs} by reference), lists identical after every step"))
}

fn detection_pipeline() -> Outcome {
    let mut r = rng(109);
    let mut m = background(&mut r, 23, 600 * 256, 256.0);
    inject_burst(&mut m, 256, 300.0, 360.0, 8.0);
    let cfg = DetectorConfig::default();
    let original = detect_matrix(&m, 256, &cfg).map_err(|e| e.to_string())?;
    ensure(!original.is_empty(), || "burst not detected on the original".into())?;
    let mut lines = Vec::new();
    for codec in [CodecId::Spiht2d, CodecId::Dictionary, CodecId::Dipole] {
        let rec = compress_matrix(&m, &STANDARD_BIPOLAR, 256, codec, 4.0, &CodecSettings::default()).map_err(|e| e.to_string())?;
        let out = decompress(&rec).map_err(|e| e.to_string())?;
        let secs = detect_matrix(&out, 256, &cfg).map_err(|e| e.to_string())?;
        let rep = match_flags(&original, &secs);
        ensure(rep.tp_count == original.len(), || format!("{}: {rep:?} from {secs:?}", codec.name()))?;
        lines.push(format!("{} TP {}/{} FP {}", codec.name(), rep.tp_count, original.len(), rep.fp_count));
    }
    Ok(lines.join(", "))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 9] = [
        ("table averages", 1, table_averages),
        ("overlap rule", 1, overlap_rule),
        ("transform correctness", 10, transforms),
        ("SPIHT contract", 60, spiht_contract),
        ("dipole oracle", 120, dipole_oracle),
        ("method ordering", 120, method_ordering),
        ("rate-distortion", 60, rate_distortion),
        ("dictionary synchrony", 30, dictionary_sync),
        ("detector pipeline", 120, detection_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let el = t.elapsed();
        let res = res.and_then(|d| {
            if el < Duration::from_secs(limit) {
                Ok(d)
            } else {
                Err(format!("took {:.1}s, limit {limit}s", el.as_secs_f64()))
            }
        });
        let (tag, detail) = match res {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {}. {name} [{:.2}s < {limit}s]: {detail}", i + 1, el.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
