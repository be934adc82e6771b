//! Per-channel segment coding against a dynamic reference list.
//!
//! Every channel is cut into fixed-length segments. A segment whose
//! normalised rhythm-band energies lie close to a stored reference is coded
//! as the wavelet-domain difference to that reference (`REF`); otherwise the
//! segment pyramid itself is coded (`LIT`) and its decoded version joins the
//! list. Decoder and encoder insert the same decoded pyramids, so their lists
//! never diverge.
//!
//! While encoding, a segment is flagged as seizure-like when its 3-30 Hz
//! energy is at least `flag_k` times the median of the previous
//! `flag_history` segments and no reference matched it.

use std::collections::VecDeque;

use crate::bits::{BitWriter, Bitstream};
use crate::codec_spiht2d::check_bps;
use crate::container::{ByteReader, ByteWriter, CodecId, CompressedRecord, VERSION};
use crate::error::{Error, Result};
use crate::ingest::{format_flags, parse_flags};
use crate::signal::{FlagSection, SignalMatrix};
use crate::spiht::{self, SpihtShape};
use crate::wavelet::{band_energies, dwt1d, idwt1d, max_levels, BandEnergyVector, WaveletPyramid1D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryConfig {
    /// Segment length in samples.
    pub epoch: usize,
    /// Upper bound on the transform depth; the epoch may force fewer.
    pub levels: usize,
    pub tau: f64,
    pub capacity: usize,
    pub precision_bits: u32,
    pub flag_history: usize,
    pub flag_k: f64,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            epoch: 1024,
            levels: 5,
            tau: 0.15,
            capacity: 64,
            precision_bits: 16,
            flag_history: 30,
            flag_k: 5.0,
        }
    }
}

impl DictionaryConfig {
    pub fn depth(&self) -> usize {
        max_levels(self.epoch, self.levels)
    }

    fn validate(&self) -> Result<()> {
        if self.epoch < 2 || self.depth() == 0 {
            return Err(Error::Config(format!("epoch length {} is too short", self.epoch)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1]", self.tau)));
        }
        if self.capacity == 0 || self.capacity > u16::MAX as usize {
            return Err(Error::Config(format!("capacity {} outside 1..=65535", self.capacity)));
        }
        if self.flag_history == 0 || !(self.flag_k > 0.0) {
            return Err(Error::Config("flag history and factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEntry {
    pub id: u32,
    pub pyramid: WaveletPyramid1D,
    /// Unit-sum band energies of `pyramid`.
    pub features: BandEnergyVector,
    pub use_count: u32,
    pub last_used: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceList {
    entries: Vec<ReferenceEntry>,
    capacity: usize,
    next_id: u32,
}

impl ReferenceList {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::new(),
            capacity,
            next_id: 0,
        }
    }

    pub fn entries(&self) -> &[ReferenceEntry] {
        &self.entries
    }

    pub fn ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.id).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, id: u32) -> Option<&ReferenceEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Inserts a pyramid, evicting the least recently used entry when full.
    /// Zero-energy pyramids are refused. Returns the new id.
    pub fn insert(&mut self, pyramid: WaveletPyramid1D, fs: f64, now: u64) -> Option<u32> {
        let features = band_energies(&pyramid, fs).normalized()?;
        if self.entries.len() >= self.capacity {
            let victim = self
                .entries
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| (e.last_used, e.id))
                .map(|(i, _)| i)
                .unwrap();
            self.entries.remove(victim);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.entries.push(ReferenceEntry {
            id,
            pyramid,
            features,
            use_count: 0,
            last_used: now,
        });
        Some(id)
    }

    fn touch(&mut self, id: u32, now: u64) {
        if let Some(e) = self.entries.iter_mut().find(|e| e.id == id) {
            e.use_count += 1;
            e.last_used = now;
        }
    }
}

/// Normalised band energies of a segment; `None` for a silent segment.
pub fn features(seg: &[f64], fs: f64, levels: usize) -> Result<Option<BandEnergyVector>> {
    Ok(band_energies(&dwt1d(seg, levels)?, fs).normalized())
}

/// Nearest entry within `tau`, ties to the lower id.
pub fn match_entry<'a>(f: &BandEnergyVector, list: &'a ReferenceList, tau: f64) -> Option<(&'a ReferenceEntry, f64)> {
    let mut best: Option<(&ReferenceEntry, f64)> = None;
    for e in list.entries() {
        let d = f.distance(&e.features);
        let better = match best {
            None => true,
            Some((b, bd)) => d < bd || (d == bd && e.id < b.id),
        };
        if better {
            best = Some((e, d));
        }
    }
    best.filter(|&(_, d)| d <= tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentMode {
    Literal,
    Reference(u32),
}

#[derive(Debug, Clone)]
pub struct EncodedSegment {
    pub mode: SegmentMode,
    pub scale: f64,
    pub bits: Bitstream,
    /// What the decoder will output for this segment.
    pub reconstruction: Vec<f64>,
    pub flagged: bool,
}

fn median(v: impl Iterator<Item = f64>) -> f64 {
    let mut s: Vec<f64> = v.collect();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Encoder state for one channel.
pub struct DictionaryEncoder {
    cfg: DictionaryConfig,
    fs: f64,
    list: ReferenceList,
    counter: u64,
    history: VecDeque<f64>,
}

impl DictionaryEncoder {
    pub fn new(cfg: DictionaryConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            fs,
            list: ReferenceList::new(cfg.capacity),
            counter: 0,
            history: VecDeque::with_capacity(cfg.flag_history + 1),
        })
    }

    pub fn list(&self) -> &ReferenceList {
        &self.list
    }

    /// Codes one segment of exactly `epoch` samples.
    pub fn encode_segment(&mut self, seg: &[f64], budget_bits: usize) -> Result<EncodedSegment> {
        let cfg = &self.cfg;
        if seg.len() != cfg.epoch {
            return Err(Error::Size(format!("segment of {} samples, expected {}", seg.len(), cfg.epoch)));
        }
        if budget_bits < spiht::MIN_BUDGET_BITS {
            return Err(Error::Budget(format!("{budget_bits} bits per segment is below the minimum")));
        }
        let levels = cfg.depth();
        let pyr = dwt1d(seg, levels)?;
        let energies = band_energies(&pyr, self.fs);
        let feats = energies.normalized();
        let flat = pyr.to_flat();
        let matched = feats.and_then(|f| match_entry(&f, &self.list, cfg.tau)).map(|(e, _)| e);

        let mid = energies.mid_band();
        let flagged = self.history.len() >= cfg.flag_history
            && mid > 0.0
            && mid >= cfg.flag_k * median(self.history.iter().copied())
            && matched.is_none();
        self.history.push_back(mid);
        if self.history.len() > cfg.flag_history {
            self.history.pop_front();
        }

        // A reference that leaves more energy than it removes is useless.
        let reference = matched.and_then(|e| {
            let base = e.pyramid.to_flat();
            let residual = sub(&flat, &base);
            let re: f64 = residual.iter().map(|v| v * v).sum();
            (re < pyr.energy()).then_some((e.id, base, residual))
        });
        let shape = SpihtShape::one_d(cfg.epoch, levels);
        let (mode, target, base) = match reference {
            Some((id, base, residual)) => (SegmentMode::Reference(id), residual, Some(base)),
            None => (SegmentMode::Literal, flat, None),
        };
        let q = spiht::quantize(&target, cfg.precision_bits)?;
        let bits = spiht::encode(&q.values, shape, budget_bits)?;
        let decoded = spiht::dequantize(&spiht::decode(&bits, shape)?, q.scale);
        let coeffs = match &base {
            Some(b) => add(b, &decoded),
            None => decoded,
        };
        let rec_pyr = WaveletPyramid1D::from_flat(&coeffs, cfg.epoch, levels)?;
        let reconstruction = idwt1d(&rec_pyr)?;
        let now = self.counter;
        match mode {
            SegmentMode::Reference(id) => self.list.touch(id, now),
            SegmentMode::Literal => {
                self.list.insert(rec_pyr, self.fs, now);
            }
        }
        self.counter += 1;
        Ok(EncodedSegment {
            mode,
            scale: q.scale,
            bits,
            reconstruction,
            flagged,
        })
    }
}

/// Decoder state for one channel.
pub struct DictionaryDecoder {
    epoch: usize,
    levels: usize,
    fs: f64,
    list: ReferenceList,
    counter: u64,
}

impl DictionaryDecoder {
    pub fn new(cfg: DictionaryConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            epoch: cfg.epoch,
            levels: cfg.depth(),
            fs,
            list: ReferenceList::new(cfg.capacity),
            counter: 0,
        })
    }

    pub fn list(&self) -> &ReferenceList {
        &self.list
    }

    pub fn decode_segment(&mut self, mode: SegmentMode, scale: f64, bits: &Bitstream) -> Result<Vec<f64>> {
        let shape = SpihtShape::one_d(self.epoch, self.levels);
        let decoded = spiht::dequantize(&spiht::decode(bits, shape)?, scale);
        let coeffs = match mode {
            SegmentMode::Reference(id) => {
                let e = self
                    .list
                    .get(id)
                    .ok_or_else(|| Error::structure(format!("segment refers to unknown entry {id}")))?;
                add(&e.pyramid.to_flat(), &decoded)
            }
            SegmentMode::Literal => decoded,
        };
        let pyr = WaveletPyramid1D::from_flat(&coeffs, self.epoch, self.levels)?;
        let out = idwt1d(&pyr)?;
        let now = self.counter;
        match mode {
            SegmentMode::Reference(id) => self.list.touch(id, now),
            SegmentMode::Literal => {
                self.list.insert(pyr, self.fs, now);
            }
        }
        self.counter += 1;
        Ok(out)
    }
}

/// Merges runs of flagged segments into sections, in seconds.
fn flag_sections(flags: &[bool], epoch: usize, n: usize, fs: f64, label: &str) -> Vec<FlagSection> {
    let mut out = Vec::new();
    let mut s = 0;
    while s < flags.len() {
        if !flags[s] {
            s += 1;
            continue;
        }
        let mut e = s;
        while e < flags.len() && flags[e] {
            e += 1;
        }
        let start = (s * epoch) as f64 / fs;
        let end = ((e * epoch).min(n)) as f64 / fs;
        if end > start {
            out.push(FlagSection {
                start_s: start,
                end_s: end,
                label: label.to_string(),
            });
        }
        s = e;
    }
    out
}

pub struct DictionaryOutput {
    pub record: CompressedRecord,
    pub flags: Vec<FlagSection>,
}

pub fn compress(m: &SignalMatrix, fs: u32, target_bps: f64, cfg: &DictionaryConfig) -> Result<DictionaryOutput> {
    check_bps(target_bps)?;
    cfg.validate()?;
    let (c, n) = m.dims();
    let e = cfg.epoch;
    let budget = (target_bps * e as f64).floor() as usize;
    if budget < spiht::MIN_BUDGET_BITS {
        return Err(Error::Budget(format!(
            "{target_bps} bps leaves {budget} bits per {e}-sample segment"
        )));
    }
    let segs = n.div_ceil(e);
    let mut side = ByteWriter::new();
    side.u32(e as u32);
    side.u8(cfg.depth() as u8);
    side.u8(cfg.precision_bits as u8);
    side.u16(cfg.capacity as u16);
    let mut payload = BitWriter::new();
    let mut flags = Vec::new();
    let mut max_scale = 0.0_f64;
    let mut seg = vec![0.0; e];
    for ch in 0..c {
        let mut enc = DictionaryEncoder::new(*cfg, f64::from(fs))?;
        let mut flagged = Vec::with_capacity(segs);
        let row = m.row(ch);
        for s in 0..segs {
            let part = &row[s * e..((s + 1) * e).min(n)];
            seg[..part.len()].copy_from_slice(part);
            seg[part.len()..].fill(0.0);
            let out = enc.encode_segment(&seg, budget)?;
            match out.mode {
                SegmentMode::Literal => side.u8(0),
                SegmentMode::Reference(id) => {
                    side.u8(1);
                    side.u32(id);
                }
            }
            side.f64(out.scale);
            side.u32(out.bits.len_bits() as u32);
            payload.append(&out.bits).expect("uncapped writer");
            max_scale = max_scale.max(out.scale);
            flagged.push(out.flagged);
        }
        flags.extend(flag_sections(&flagged, e, n, f64::from(fs), &format!("seizure-like:ch{ch}")));
    }
    flags.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let text = format_flags(&flags);
    side.u32(text.len() as u32);
    side.bytes(text.as_bytes());
    let payload = payload.finish();
    let record = CompressedRecord {
        codec: CodecId::Dictionary,
        version: VERSION,
        n_channels: c as u32,
        n_samples: n as u32,
        fs,
        levels: cfg.depth() as u16,
        target_bps,
        quant_scale: max_scale,
        side_info: side.finish(),
        declared_payload_bits: payload.len_bits() as u64,
        payload,
    };
    Ok(DictionaryOutput { record, flags })
}

/// Per-segment metadata as stored in the side info.
pub struct SegmentInfo {
    pub mode: SegmentMode,
    pub scale: f64,
    pub bits: usize,
}

pub struct DictionarySideInfo {
    pub cfg: DictionaryConfig,
    /// Channel-major.
    pub segments: Vec<Vec<SegmentInfo>>,
    pub flags: Vec<FlagSection>,
}

pub fn read_side_info(rec: &CompressedRecord) -> Result<DictionarySideInfo> {
    if rec.codec != CodecId::Dictionary {
        return Err(Error::format(format!("expected a dictionary container, got {}", rec.codec.name())));
    }
    let mut r = ByteReader::new(&rec.side_info);
    let epoch = r.u32()? as usize;
    let levels = r.u8()? as usize;
    let precision_bits = u32::from(r.u8()?);
    let capacity = r.u16()? as usize;
    let cfg = DictionaryConfig {
        epoch,
        levels,
        capacity,
        precision_bits,
        ..Default::default()
    };
    cfg.validate().map_err(|e| Error::format(e.to_string()))?;
    if cfg.depth() != levels {
        return Err(Error::format("stored depth does not fit the epoch length"));
    }
    let segs = (rec.n_samples as usize).div_ceil(epoch);
    let mut segments = Vec::with_capacity(rec.n_channels as usize);
    for _ in 0..rec.n_channels {
        let mut ch = Vec::with_capacity(segs);
        for _ in 0..segs {
            let mode = match r.u8()? {
                0 => SegmentMode::Literal,
                1 => SegmentMode::Reference(r.u32()?),
                m => return Err(Error::format(format!("unknown segment mode {m}"))),
            };
            ch.push(SegmentInfo {
                mode,
                scale: r.f64()?,
                bits: r.u32()? as usize,
            });
        }
        segments.push(ch);
    }
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|_| Error::format("flag list is not UTF-8"))?;
    let flags = parse_flags(text)?;
    if !r.is_done() {
        return Err(Error::format("trailing bytes after the flag list"));
    }
    Ok(DictionarySideInfo { cfg, segments, flags })
}

pub fn decompress(rec: &CompressedRecord) -> Result<SignalMatrix> {
    let side = read_side_info(rec)?;
    let (c, n) = (rec.n_channels as usize, rec.n_samples as usize);
    let e = side.cfg.epoch;
    let mut out = SignalMatrix::zeros(c, n);
    let mut pos = 0;
    for (ch, segs) in side.segments.iter().enumerate() {
        let mut dec = DictionaryDecoder::new(side.cfg, f64::from(rec.fs))?;
        for (s, info) in segs.iter().enumerate() {
            let bits = rec.payload.slice(pos, info.bits);
            pos += info.bits;
            let seg = dec.decode_segment(info.mode, info.scale, &bits)?;
            let end = ((s + 1) * e).min(n);
            out.row_mut(ch)[s * e..end].copy_from_slice(&seg[..end - s * e]);
        }
    }
    Ok(out)
}
