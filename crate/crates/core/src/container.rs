//! The `NCC1` container shared by all codecs.
//!
//! ```text
//! magic "NCC1" | u8 codec_id | u8 version | u32 n_channels | u32 n_samples
//! | u32 fs | u16 levels | f64 target_bps | f64 quant_scale
//! | u32 side_info_len | side_info | u64 payload_bit_len | payload bytes
//! ```
//!
//! All integers and floats are little-endian. The payload is packed
//! MSB-first and its final byte is zero-padded.

use crate::bits::Bitstream;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NCC1";
pub const VERSION: u8 = 1;
const FIXED_LEN: usize = 4 + 1 + 1 + 4 + 4 + 4 + 2 + 8 + 8 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodecId {
    Spiht2d = 1,
    Dictionary = 2,
    Dipole = 3,
}

impl CodecId {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(CodecId::Spiht2d),
            2 => Ok(CodecId::Dictionary),
            3 => Ok(CodecId::Dipole),
            _ => Err(Error::format(format!("unknown codec id {v}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CodecId::Spiht2d => "spiht2d",
            CodecId::Dictionary => "dictionary",
            CodecId::Dipole => "dipole",
        }
    }
}

impl std::str::FromStr for CodecId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spiht2d" => Ok(CodecId::Spiht2d),
            "dictionary" => Ok(CodecId::Dictionary),
            "dipole" => Ok(CodecId::Dipole),
            _ => Err(Error::Config(format!("unknown codec {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedRecord {
    pub codec: CodecId,
    pub version: u8,
    pub n_channels: u32,
    pub n_samples: u32,
    pub fs: u32,
    pub levels: u16,
    pub target_bps: f64,
    pub quant_scale: f64,
    pub side_info: Vec<u8>,
    pub payload: Bitstream,
    /// Payload length declared in the header; larger than
    /// `payload.len_bits()` when the file was cut short.
    pub declared_payload_bits: u64,
}

impl CompressedRecord {
    pub fn is_truncated(&self) -> bool {
        (self.payload.len_bits() as u64) < self.declared_payload_bits
    }

    pub fn header_bits(&self) -> usize {
        FIXED_LEN * 8
    }

    pub fn side_info_bits(&self) -> usize {
        self.side_info.len() * 8
    }

    pub fn payload_bits(&self) -> usize {
        self.payload.len_bits()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_LEN + self.side_info.len() + self.payload.as_bytes().len());
        out.extend_from_slice(MAGIC);
        out.push(self.codec as u8);
        out.push(self.version);
        out.extend_from_slice(&self.n_channels.to_le_bytes());
        out.extend_from_slice(&self.n_samples.to_le_bytes());
        out.extend_from_slice(&self.fs.to_le_bytes());
        out.extend_from_slice(&self.levels.to_le_bytes());
        out.extend_from_slice(&self.target_bps.to_le_bytes());
        out.extend_from_slice(&self.quant_scale.to_le_bytes());
        out.extend_from_slice(&(self.side_info.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.side_info);
        out.extend_from_slice(&(self.payload.len_bits() as u64).to_le_bytes());
        out.extend_from_slice(self.payload.as_bytes());
        out
    }

    /// Parses a container. A payload shorter than declared is accepted and
    /// flagged through [`CompressedRecord::is_truncated`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::format("missing NCC1 magic"));
        }
        let codec = CodecId::from_u8(r.u8()?)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported container version {version}")));
        }
        let n_channels = r.u32()?;
        let n_samples = r.u32()?;
        let fs = r.u32()?;
        let levels = r.u16()?;
        let target_bps = r.f64()?;
        let quant_scale = r.f64()?;
        let side_len = r.u32()? as usize;
        let side_info = r.take(side_len)?.to_vec();
        let declared = r.u64()?;
        if n_channels == 0 || n_samples == 0 || fs == 0 {
            return Err(Error::format("container declares an empty signal"));
        }
        if !(target_bps.is_finite() && quant_scale.is_finite() && quant_scale >= 0.0) {
            return Err(Error::format("container header holds invalid floats"));
        }
        let rest = r.rest();
        let need = usize::try_from(declared.div_ceil(8))
            .map_err(|_| Error::format("payload length overflows"))?;
        let avail = rest.len().min(need);
        let bits = (declared as usize).min(avail * 8);
        Ok(Self {
            codec,
            version,
            n_channels,
            n_samples,
            fs,
            levels,
            target_bps,
            quant_scale,
            side_info,
            payload: Bitstream::from_bytes(rest[..avail].to_vec(), bits),
            declared_payload_bits: declared,
        })
    }
}

/// Little-endian writer for side-info blobs.
#[derive(Default)]
pub struct ByteWriter(Vec<u8>);

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn finish(self) -> Vec<u8> {
        self.0
    }
}

pub struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("unexpected end of header data"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn rest(&mut self) -> &'a [u8] {
        let s = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        s
    }
    pub fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}
