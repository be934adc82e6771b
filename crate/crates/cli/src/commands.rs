use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use eegcodec::container::MAGIC;
use eegcodec::detection::{aggregate, detect, detect_matrix, match_flags, report_csv, DetectionReport};
use eegcodec::ingest::{fitting_gain, read_flags, read_recording, write_raw};
use eegcodec::metrics::{achieved_bps, compression_ratio, prd, prd_mean_removed};
use eegcodec::{codec, CodecId, CompressedRecord, Error, Recording, Result, SignalMatrix};

use crate::config::RunConfig;

fn read_container(path: &Path) -> Result<CompressedRecord> {
    CompressedRecord::from_bytes(&fs::read(path)?)
}

fn fmt_cr(achieved: f64) -> String {
    if achieved > 0.0 {
        format!("{:.4}", compression_ratio(achieved))
    } else {
        "inf".into()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.4}"))
}

pub fn compress(cfg: &RunConfig, input: &Path, output: &Path) -> Result<()> {
    let codec = cfg
        .codec
        .ok_or_else(|| Error::Config("no codec given; use --codec or codec= in the config file".into()))?;
    let rec = read_recording(input)?;
    let out = codec::compress(&rec, codec, cfg.target_bps, &cfg.settings)?;
    fs::write(output, out.to_bytes())?;
    let achieved = achieved_bps(&out);
    println!("codec={} target_bps={} achieved_bps={achieved:.4} cr={}", codec.name(), cfg.target_bps, fmt_cr(achieved));
    if let Some(path) = &cfg.report {
        let text = format!(
            "codec,target_bps,achieved_bps,cr\n{},{},{achieved:.4},{}\n",
            codec.name(),
            cfg.target_bps,
            fmt_cr(achieved)
        );
        fs::write(path, text)?;
    }
    Ok(())
}

pub fn decompress(input: &Path, output: &Path) -> Result<()> {
    let rec = read_container(input)?;
    if rec.is_truncated() {
        eprintln!(
            "warning: payload truncated ({} of {} bits); writing a best-effort reconstruction",
            rec.payload_bits(),
            rec.declared_payload_bits
        );
    }
    let m = codec::decompress(&rec)?;
    write_raw(output, &m, rec.fs, fitting_gain(&m))
}

/// A reconstruction given either as a container or as a recording file.
fn load_reconstruction(path: &Path, original: &Recording) -> Result<(Recording, Option<CompressedRecord>)> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        let c = CompressedRecord::from_bytes(&bytes)?;
        let m = codec::decompress(&c)?;
        let rec = Recording::new(original.patient_id.clone(), original.channels.clone(), c.fs, m, original.precision_bits)?;
        Ok((rec, Some(c)))
    } else {
        Ok((read_recording(path)?, None))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub prd: f64,
    pub prd_mean_removed: Option<f64>,
    pub achieved_bps: Option<f64>,
    pub detection: Option<DetectionReport>,
}

/// Where the reference detections come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FlagSource {
    None,
    /// Run the detector on the original too.
    Detect,
    File(PathBuf),
}

pub fn evaluate_files(cfg: &RunConfig, original: &Path, reconstructed: &Path, flags: &FlagSource) -> Result<Evaluation> {
    let orig = read_recording(original)?;
    let (recon, container) = load_reconstruction(reconstructed, &orig)?;
    evaluate(cfg, &orig.samples, orig.fs, &recon.samples, container.as_ref(), flags)
}

fn evaluate(
    cfg: &RunConfig,
    orig: &SignalMatrix,
    fs: u32,
    recon: &SignalMatrix,
    container: Option<&CompressedRecord>,
    flags: &FlagSource,
) -> Result<Evaluation> {
    if orig.dims() != recon.dims() {
        return Err(Error::Metric(format!("dimensions differ: {:?} vs {:?}", orig.dims(), recon.dims())));
    }
    let detection = match flags {
        FlagSource::None => None,
        FlagSource::Detect => Some(match_flags(
            &detect_matrix(orig, fs, &cfg.detector)?,
            &detect_matrix(recon, fs, &cfg.detector)?,
        )),
        FlagSource::File(p) => Some(match_flags(&read_flags(p)?, &detect_matrix(recon, fs, &cfg.detector)?)),
    };
    Ok(Evaluation {
        prd: prd(orig, recon)?,
        prd_mean_removed: prd_mean_removed(orig, recon).ok(),
        achieved_bps: container.map(achieved_bps),
        detection,
    })
}

pub fn evaluation_csv(e: &Evaluation) -> String {
    let mut s = String::from("prd,prd_mean_removed,achieved_bps,cr,detections,tp_percent,fp_count\n");
    let cr = e.achieved_bps.map_or_else(|| "NA".into(), fmt_cr);
    let det = e.detection.map_or_else(
        || "NA,NA,NA".to_string(),
        |d| format!("{},{},{}", d.ground_truth_count, fmt_opt(d.tp_percent), d.fp_count),
    );
    writeln!(
        s,
        "{:.4},{},{},{cr},{det}",
        e.prd,
        fmt_opt(e.prd_mean_removed),
        fmt_opt(e.achieved_bps)
    )
    .unwrap();
    s
}

pub fn plot_csv(points: &[(f64, Option<f64>)]) -> String {
    let mut s = String::from("prd,tp_percent\n");
    for (p, tp) in points {
        writeln!(s, "{p:.4},{}", fmt_opt(*tp)).unwrap();
    }
    s
}

pub fn run_evaluate(cfg: &RunConfig, original: &Path, reconstructed: &Path, flags: &FlagSource, plot: Option<&Path>) -> Result<()> {
    let e = evaluate_files(cfg, original, reconstructed, flags)?;
    let csv = evaluation_csv(&e);
    print!("{csv}");
    if let Some(path) = &cfg.report {
        fs::write(path, &csv)?;
    }
    if let Some(path) = plot {
        fs::write(path, plot_csv(&[(e.prd, e.detection.and_then(|d| d.tp_percent))]))?;
    }
    Ok(())
}

/// One Table-I-shaped CSV per codec and rate, a scatter file of
/// (PRD, TP %) points and a gnuplot script that draws it.
pub fn batch(cfg: &RunConfig, inputs: &[PathBuf], rates: &[f64], out_dir: &Path) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Config("batch needs at least one input".into()));
    }
    for &r in rates {
        if !(r > 0.0 && r <= 16.0) {
            return Err(Error::Config(format!("bps must be in (0, 16], got {r}")));
        }
    }
    let codecs = match cfg.codec {
        Some(c) => vec![c],
        None => vec![CodecId::Dipole, CodecId::Dictionary, CodecId::Spiht2d],
    };
    fs::create_dir_all(out_dir)?;
    let recordings = inputs.iter().map(read_recording).collect::<Result<Vec<_>>>()?;
    let truth = recordings
        .iter()
        .map(|r| detect(r, &cfg.detector))
        .collect::<Result<Vec<_>>>()?;
    let mut points = String::from("codec,bps,patient,prd,tp_percent\n");
    let mut summary = String::from("codec,bps,mean_prd,mean_tp_percent,mean_fp\n");
    let mut series = Vec::new();
    for &c in &codecs {
        for &bps in rates {
            let mut reports = Vec::with_capacity(recordings.len());
            let mut prds = Vec::with_capacity(recordings.len());
            for (rec, orig_flags) in recordings.iter().zip(&truth) {
                let packed = codec::compress(rec, c, bps, &cfg.settings)?;
                let recon = codec::decompress(&packed)?;
                let p = prd(&rec.samples, &recon)?;
                let rep = match_flags(orig_flags, &detect_matrix(&recon, rec.fs, &cfg.detector)?);
                writeln!(points, "{},{bps},{},{p:.4},{}", c.name(), rec.patient_id, fmt_opt(rep.tp_percent)).unwrap();
                reports.push(rep);
                prds.push(p);
            }
            let name = format!("table_{}_{bps}bps.csv", c.name());
            fs::write(out_dir.join(&name), report_csv(&reports)?)?;
            let s = aggregate(&reports)?;
            let mean_prd = prds.iter().sum::<f64>() / prds.len() as f64;
            writeln!(summary, "{},{bps},{mean_prd:.4},{},{:.2}", c.name(), fmt_opt(s.mean_tp_percent), s.mean_fp).unwrap();
            series.push((c.name(), bps));
        }
    }
    fs::write(out_dir.join("points.csv"), points)?;
    fs::write(out_dir.join("summary.csv"), summary)?;
    fs::write(out_dir.join("plot.gp"), gnuplot_script(&series))?;
    if let Some(path) = &cfg.report {
        fs::copy(out_dir.join("summary.csv"), path)?;
    }
    Ok(())
}

fn gnuplot_script(series: &[(&str, f64)]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key outside\nset xlabel 'PRD (%)'\nset ylabel 'TP (%)'\nset yrange [0:105]\nplot \\\n",
    );
    let lines: Vec<String> = series
        .iter()
        .map(|(c, b)| {
            format!("  'points.csv' using (stringcolumn(1) eq '{c}' && $2 == {b} ? $4 : 1/0):5 with points title '{c} {b} bps'")
        })
        .collect();
    s.push_str(&lines.join(", \\\n"));
    s.push('\n');
    s
}
