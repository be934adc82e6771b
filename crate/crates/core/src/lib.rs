//! Lossy multichannel EEG compression with three codecs (2D SPIHT,
//! dictionary of reference segments, dipole fitting), plus rate/distortion
//! metrics and a seizure-onset proxy detector for judging what survives
//! compression.

pub mod bits;
pub mod codec;
pub mod codec_dictionary;
pub mod codec_dipole;
pub mod codec_spiht2d;
pub mod container;
pub mod detection;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod signal;
pub mod spiht;
pub mod wavelet;

pub use codec::{compress, decompress, CodecSettings};
pub use container::{CodecId, CompressedRecord};
pub use error::{Error, Result};
pub use signal::{FlagSection, Recording, SignalMatrix};
