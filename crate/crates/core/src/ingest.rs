//! Reading recordings and flag annotations from disk.
//!
//! Two signal formats are understood:
//!
//! * EDF: the 256-byte fixed header, one 256-byte header per signal, then
//!   data records of little-endian `i16` samples. Digital values are mapped
//!   to physical units by the per-signal linear calibration and converted to
//!   microvolts.
//! * Raw fallback (`NCR1`): a small self-describing header followed by
//!   channel-major `i16` samples scaled by a single gain.
//!
//! Flag files are UTF-8 text, one `start_s end_s label` triple per line.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{FlagSection, Recording, SignalMatrix};

const EDF_FIXED_HEADER: usize = 256;
const EDF_SIGNAL_HEADER: usize = 256;
pub const RAW_MAGIC: &[u8; 4] = b"NCR1";
const RAW_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

/// Reads a recording, dispatching on the file's leading bytes.
pub fn read_recording(path: impl AsRef<Path>) -> Result<Recording> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(RAW_MAGIC) {
        parse_raw(&bytes, &stem(path.as_ref()))
    } else {
        parse_edf(&bytes)
    }
}

/// Reads an EDF file. Raw-fallback files are accepted as well.
pub fn read_edf(path: impl AsRef<Path>) -> Result<Recording> {
    read_recording(path)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn ascii_field(bytes: &[u8], what: &str) -> Result<String> {
    std::str::from_utf8(bytes)
        .map(|s| s.trim().to_string())
        .map_err(|_| Error::format(format!("EDF field `{what}` is not ASCII")))
}

fn numeric_field<T: std::str::FromStr>(bytes: &[u8], what: &str) -> Result<T> {
    let text = ascii_field(bytes, what)?;
    text.parse()
        .map_err(|_| Error::format(format!("EDF field `{what}` is not numeric: {text:?}")))
}

fn microvolt_factor(unit: &str) -> f64 {
    match unit.to_ascii_lowercase().as_str() {
        "v" => 1e6,
        "mv" => 1e3,
        "nv" => 1e-3,
        // "uV", "µV" and anything unrecognised are taken as microvolts.
        _ => 1.0,
    }
}

struct EdfSignal {
    label: String,
    unit: String,
    phys_min: f64,
    phys_max: f64,
    dig_min: f64,
    dig_max: f64,
    samples_per_record: usize,
}

/// Parses an in-memory EDF file.
pub fn parse_edf(bytes: &[u8]) -> Result<Recording> {
    if bytes.len() < EDF_FIXED_HEADER {
        return Err(Error::format("file shorter than the EDF fixed header"));
    }
    let version = ascii_field(&bytes[0..8], "version")?;
    if version != "0" {
        return Err(Error::format(format!("unsupported EDF version {version:?}")));
    }
    let patient_id = ascii_field(&bytes[8..88], "patient")?;
    let header_len: usize = numeric_field(&bytes[184..192], "header bytes")?;
    let n_records: i64 = numeric_field(&bytes[236..244], "number of records")?;
    let record_dur: f64 = numeric_field(&bytes[244..252], "record duration")?;
    let ns: usize = numeric_field(&bytes[252..256], "number of signals")?;
    if ns == 0 {
        return Err(Error::format("EDF declares zero signals"));
    }
    if header_len != EDF_FIXED_HEADER + ns * EDF_SIGNAL_HEADER {
        return Err(Error::format(format!(
            "header length {header_len} inconsistent with {ns} signals"
        )));
    }
    if bytes.len() < header_len {
        return Err(Error::format("file shorter than its declared header"));
    }
    if !(record_dur > 0.0) {
        return Err(Error::format("record duration must be positive"));
    }

    // Per-signal fields are stored column-wise: all labels, then all
    // transducers, and so on.
    let sig = &bytes[EDF_FIXED_HEADER..header_len];
    let mut offset = 0;
    let mut column = |width: usize| {
        let start = offset;
        offset += width * ns;
        (0..ns)
            .map(move |i| start + i * width..start + (i + 1) * width)
            .collect::<Vec<_>>()
    };
    let labels = column(16);
    let _transducer = column(80);
    let units = column(8);
    let phys_min = column(8);
    let phys_max = column(8);
    let dig_min = column(8);
    let dig_max = column(8);
    let _prefilter = column(80);
    let spr = column(8);

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let s = EdfSignal {
            label: ascii_field(&sig[labels[i].clone()], "label")?,
            unit: ascii_field(&sig[units[i].clone()], "physical dimension")?,
            phys_min: numeric_field(&sig[phys_min[i].clone()], "physical minimum")?,
            phys_max: numeric_field(&sig[phys_max[i].clone()], "physical maximum")?,
            dig_min: numeric_field(&sig[dig_min[i].clone()], "digital minimum")?,
            dig_max: numeric_field(&sig[dig_max[i].clone()], "digital maximum")?,
            samples_per_record: numeric_field(&sig[spr[i].clone()], "samples per record")?,
        };
        if s.dig_max <= s.dig_min {
            return Err(Error::format(format!(
                "signal {:?}: digital maximum not above minimum",
                s.label
            )));
        }
        signals.push(s);
    }

    let spr0 = signals[0].samples_per_record;
    if spr0 == 0 || signals.iter().any(|s| s.samples_per_record != spr0) {
        return Err(Error::structure(
            "signals have inconsistent samples per record",
        ));
    }
    let fs_f = spr0 as f64 / record_dur;
    let fs = fs_f.round();
    if (fs - fs_f).abs() > 1e-9 || fs < 1.0 {
        return Err(Error::structure(format!(
            "non-integer sampling rate {fs_f} Hz"
        )));
    }

    let record_bytes = 2 * spr0 * ns;
    let data = &bytes[header_len..];
    let n_records = if n_records < 0 {
        data.len() / record_bytes
    } else {
        n_records as usize
    };
    if n_records == 0 {
        return Err(Error::structure("EDF contains no data records"));
    }
    if data.len() < n_records * record_bytes {
        return Err(Error::structure(format!(
            "truncated data: {} bytes for {n_records} records of {record_bytes} bytes",
            data.len()
        )));
    }

    let n_samples = n_records * spr0;
    let mut out = vec![0.0; ns * n_samples];
    for (i, s) in signals.iter().enumerate() {
        let gain = (s.phys_max - s.phys_min) / (s.dig_max - s.dig_min);
        let to_uv = microvolt_factor(&s.unit);
        let row = &mut out[i * n_samples..(i + 1) * n_samples];
        for r in 0..n_records {
            let base = r * record_bytes + i * 2 * spr0;
            for k in 0..spr0 {
                let b = base + 2 * k;
                let d = f64::from(i16::from_le_bytes([data[b], data[b + 1]]));
                row[r * spr0 + k] = ((d - s.dig_min) * gain + s.phys_min) * to_uv;
            }
        }
    }

    Recording::new(
        patient_id,
        signals.into_iter().map(|s| s.label).collect(),
        fs as u32,
        SignalMatrix::new(ns, n_samples, out)?,
        16,
    )
}

/// Writes `rec` as a plain EDF file with one-second data records.
///
/// Each channel gets its own calibration spanning its amplitude range, so the
/// round trip is exact to within half a digital step.
pub fn write_edf(path: impl AsRef<Path>, rec: &Recording) -> Result<()> {
    fs::write(path, encode_edf(rec)?)?;
    Ok(())
}

fn pad_field(out: &mut Vec<u8>, text: &str, width: usize) {
    let mut field: Vec<u8> = text.bytes().take(width).collect();
    field.resize(width, b' ');
    out.extend_from_slice(&field);
}

fn fmt_num(v: f64) -> String {
    // EDF numeric fields are eight characters wide.
    for prec in (0..=6).rev() {
        let s = format!("{v:.prec$}");
        if s.len() <= 8 {
            return s;
        }
    }
    format!("{v:.0}")
}

pub fn encode_edf(rec: &Recording) -> Result<Vec<u8>> {
    let fs = rec.fs as usize;
    let n = rec.samples.n_samples();
    if !n.is_multiple_of(fs) {
        return Err(Error::structure(
            "EDF writer needs a whole number of seconds",
        ));
    }
    let ns = rec.samples.n_channels();
    let n_records = n / fs;
    let mut out = Vec::new();
    pad_field(&mut out, "0", 8);
    pad_field(&mut out, &rec.patient_id, 80);
    pad_field(&mut out, "", 80);
    pad_field(&mut out, "01.01.01", 8);
    pad_field(&mut out, "00.00.00", 8);
    pad_field(&mut out, &(EDF_FIXED_HEADER + ns * EDF_SIGNAL_HEADER).to_string(), 8);
    pad_field(&mut out, "", 44);
    pad_field(&mut out, &n_records.to_string(), 8);
    pad_field(&mut out, "1", 8);
    pad_field(&mut out, &ns.to_string(), 4);

    let ranges: Vec<(f64, f64)> = rec
        .samples
        .rows()
        .map(|r| {
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // Round outward so the printed bounds still cover the data.
            let (lo, hi) = (lo.floor() - 1.0, hi.ceil() + 1.0);
            (lo, hi)
        })
        .collect();

    for l in &rec.channels {
        pad_field(&mut out, l, 16);
    }
    for _ in 0..ns {
        pad_field(&mut out, "", 80);
    }
    for _ in 0..ns {
        pad_field(&mut out, "uV", 8);
    }
    for (lo, _) in &ranges {
        pad_field(&mut out, &fmt_num(*lo), 8);
    }
    for (_, hi) in &ranges {
        pad_field(&mut out, &fmt_num(*hi), 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, "-32768", 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, "32767", 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, "", 80);
    }
    for _ in 0..ns {
        pad_field(&mut out, &fs.to_string(), 8);
    }
    for _ in 0..ns {
        pad_field(&mut out, "", 32);
    }

    let ranges: Vec<(f64, f64)> = ranges
        .iter()
        .map(|(lo, hi)| (fmt_num(*lo).parse().unwrap(), fmt_num(*hi).parse().unwrap()))
        .collect();
    for r in 0..n_records {
        for (ch, (lo, hi)) in ranges.iter().enumerate() {
            let gain = (hi - lo) / 65535.0;
            for &v in &rec.samples.row(ch)[r * fs..(r + 1) * fs] {
                let d = ((v - lo) / gain - 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Parses a raw-fallback (`NCR1`) byte buffer.
pub fn parse_raw(bytes: &[u8], patient_id: &str) -> Result<Recording> {
    if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
        return Err(Error::format("missing NCR1 raw header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let n_channels = u32_at(4) as usize;
    let n_samples = u32_at(8) as usize;
    let fs = u32_at(12);
    let gain = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if !gain.is_finite() || gain < 0.0 {
        return Err(Error::format(format!("invalid raw gain {gain}")));
    }
    let body = &bytes[RAW_HEADER_LEN..];
    let expected = n_channels
        .checked_mul(n_samples)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| Error::format("raw dimensions overflow"))?;
    if body.len() != expected {
        return Err(Error::structure(format!(
            "raw body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(2)
        .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) * gain)
        .collect();
    let samples = SignalMatrix::new(n_channels, n_samples, data)?;
    let channels = (0..n_channels).map(|i| format!("ch{i}")).collect();
    Recording::new(patient_id, channels, fs, samples, 16)
}

/// Serialises a matrix in the raw-fallback format with the given gain.
///
/// Samples are rounded to the nearest multiple of `gain`; values that are
/// already exact multiples survive a write/read cycle bit for bit.
pub fn encode_raw(m: &SignalMatrix, fs: u32, gain: f64) -> Result<Vec<u8>> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::Config(format!("raw gain must be positive, got {gain}")));
    }
    let mut out = Vec::with_capacity(RAW_HEADER_LEN + 2 * m.data().len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&(m.n_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(m.n_samples() as u32).to_le_bytes());
    out.extend_from_slice(&fs.to_le_bytes());
    out.extend_from_slice(&gain.to_le_bytes());
    for &v in m.data() {
        let q = (v / gain).round();
        if q < f64::from(i16::MIN) || q > f64::from(i16::MAX) {
            return Err(Error::Range(format!(
                "sample {v} does not fit 16 bits at gain {gain}"
            )));
        }
        out.extend_from_slice(&(q as i16).to_le_bytes());
    }
    Ok(out)
}

/// Smallest gain that keeps every sample of `m` within 16 bits.
pub fn fitting_gain(m: &SignalMatrix) -> f64 {
    let peak = m.data().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        1.0
    } else {
        peak / f64::from(i16::MAX)
    }
}

pub fn write_raw(path: impl AsRef<Path>, m: &SignalMatrix, fs: u32, gain: f64) -> Result<()> {
    fs::write(path, encode_raw(m, fs, gain)?)?;
    Ok(())
}

/// Sub-matrix covering `[start_s, start_s + dur_s)`, aligned by flooring
/// `start_s * fs`.
pub fn slice(m: &SignalMatrix, fs: u32, start_s: f64, dur_s: f64) -> Result<SignalMatrix> {
    let fs_f = f64::from(fs);
    let duration = m.n_samples() as f64 / fs_f;
    if !(start_s >= 0.0 && dur_s > 0.0) || start_s + dur_s > duration + 1e-9 {
        return Err(Error::Range(format!(
            "window [{start_s}, {}) outside recording of {duration} s",
            start_s + dur_s
        )));
    }
    let start = (start_s * fs_f + 1e-9).floor() as usize;
    let len = ((dur_s * fs_f).round() as usize).min(m.n_samples().saturating_sub(start));
    m.columns(start, len)
}

impl Recording {
    pub fn slice(&self, start_s: f64, dur_s: f64) -> Result<SignalMatrix> {
        slice(&self.samples, self.fs, start_s, dur_s)
    }
}

/// Parses flag text: blank lines and `#` comments are skipped.
pub fn parse_flags(text: &str) -> Result<Vec<FlagSection>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut num = |what: &str| -> Result<f64> {
            let tok = parts
                .next()
                .ok_or_else(|| Error::format(format!("line {}: missing {what}", lineno + 1)))?;
            tok.parse().map_err(|_| {
                Error::format(format!("line {}: {what} {tok:?} is not numeric", lineno + 1))
            })
        };
        let start = num("start")?;
        let end = num("end")?;
        let label = parts.collect::<Vec<_>>().join(" ");
        let section = FlagSection::new(start, end, label)
            .map_err(|e| Error::format(format!("line {}: {e}", lineno + 1)))?;
        out.push(section);
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(out)
}

pub fn read_flags(path: impl AsRef<Path>) -> Result<Vec<FlagSection>> {
    parse_flags(&fs::read_to_string(path)?)
}

pub fn format_flags(flags: &[FlagSection]) -> String {
    let mut s = String::new();
    for f in flags {
        s.push_str(&format!("{} {} {}\n", f.start_s, f.end_s, f.label));
    }
    s
}

pub fn write_flags(path: impl AsRef<Path>, flags: &[FlagSection]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_flags(flags).as_bytes())?;
    Ok(())
}
