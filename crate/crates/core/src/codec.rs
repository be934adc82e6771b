//! One entry point over the three codecs.

use crate::codec_dictionary::{self, DictionaryConfig};
use crate::codec_dipole::{self, DipoleConfig};
use crate::codec_spiht2d::{self, Spiht2dConfig};
use crate::container::{CodecId, CompressedRecord};
use crate::error::Result;
use crate::signal::{Recording, SignalMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CodecSettings {
    pub spiht2d: Spiht2dConfig,
    pub dictionary: DictionaryConfig,
    pub dipole: DipoleConfig,
}

pub fn compress(rec: &Recording, codec: CodecId, target_bps: f64, settings: &CodecSettings) -> Result<CompressedRecord> {
    compress_matrix(&rec.samples, &rec.channels, rec.fs, codec, target_bps, settings)
}

pub fn compress_matrix<S: AsRef<str>>(
    m: &SignalMatrix,
    labels: &[S],
    fs: u32,
    codec: CodecId,
    target_bps: f64,
    settings: &CodecSettings,
) -> Result<CompressedRecord> {
    match codec {
        CodecId::Spiht2d => codec_spiht2d::compress(m, fs, target_bps, &settings.spiht2d),
        CodecId::Dictionary => codec_dictionary::compress(m, fs, target_bps, &settings.dictionary).map(|o| o.record),
        CodecId::Dipole => codec_dipole::compress(m, labels, fs, target_bps, &settings.dipole),
    }
}

pub fn decompress(rec: &CompressedRecord) -> Result<SignalMatrix> {
    match rec.codec {
        CodecId::Spiht2d => codec_spiht2d::decompress(rec),
        CodecId::Dictionary => codec_dictionary::decompress(rec),
        CodecId::Dipole => codec_dipole::decompress(rec),
    }
}
