//! Run configuration: defaults, then a key=value file, then command-line
//! flags.

use std::fs;
use std::path::{Path, PathBuf};

use eegcodec::detection::DetectorConfig;
use eegcodec::{CodecId, CodecSettings, Error, Result};

/// Values that may come from either the config file or a flag. `None`
/// means "not given here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub codec: Option<CodecId>,
    pub bps: Option<f64>,
    pub epoch: Option<usize>,
    pub tau: Option<f64>,
    pub capacity: Option<usize>,
    pub window: Option<usize>,
    pub smooth_thresh: Option<f64>,
    pub detector_k: Option<f64>,
    pub report: Option<PathBuf>,
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merged(self, other: Overrides) -> Overrides {
        Overrides {
            codec: other.codec.or(self.codec),
            bps: other.bps.or(self.bps),
            epoch: other.epoch.or(self.epoch),
            tau: other.tau.or(self.tau),
            capacity: other.capacity.or(self.capacity),
            window: other.window.or(self.window),
            smooth_thresh: other.smooth_thresh.or(self.smooth_thresh),
            detector_k: other.detector_k.or(self.detector_k),
            report: other.report.or(self.report),
        }
    }

    pub fn parse_file(text: &str) -> Result<Overrides> {
        let mut o = Overrides::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            let (key, value) = (key.trim().replace('-', "_"), value.trim());
            let bad = |e: &dyn std::fmt::Display| Error::Config(format!("line {}: {key}: {e}", i + 1));
            match key.as_str() {
                "codec" => o.codec = Some(value.parse()?),
                "bps" => o.bps = Some(value.parse().map_err(|e| bad(&e))?),
                "epoch" => o.epoch = Some(value.parse().map_err(|e| bad(&e))?),
                "tau" => o.tau = Some(value.parse().map_err(|e| bad(&e))?),
                "capacity" => o.capacity = Some(value.parse().map_err(|e| bad(&e))?),
                "window" => o.window = Some(value.parse().map_err(|e| bad(&e))?),
                "smooth_thresh" => o.smooth_thresh = Some(value.parse().map_err(|e| bad(&e))?),
                "detector_k" => o.detector_k = Some(value.parse().map_err(|e| bad(&e))?),
                "report" => o.report = Some(PathBuf::from(value)),
                _ => return Err(Error::Config(format!("line {}: unknown key {key:?}", i + 1))),
            }
        }
        Ok(o)
    }

    pub fn load(path: Option<&Path>, flags: Overrides) -> Result<Overrides> {
        let base = match path {
            Some(p) => Overrides::parse_file(&fs::read_to_string(p)?)?,
            None => Overrides::default(),
        };
        Ok(base.merged(flags))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Batch runs default to all codecs when this is unset.
    pub codec: Option<CodecId>,
    pub target_bps: f64,
    pub settings: CodecSettings,
    pub detector: DetectorConfig,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(o: &Overrides) -> Result<RunConfig> {
        let target_bps = o.bps.unwrap_or(2.0);
        if !(target_bps > 0.0 && target_bps <= 16.0) {
            return Err(Error::Config(format!("bps must be in (0, 16], got {target_bps}")));
        }
        let codec = o.codec;
        let mut settings = CodecSettings::default();
        if let Some(e) = o.epoch {
            settings.dictionary.epoch = e;
        }
        if let Some(t) = o.tau {
            settings.dictionary.tau = t;
        }
        if let Some(c) = o.capacity {
            settings.dictionary.capacity = c;
        }
        if let Some(w) = o.window {
            settings.dipole.window = w;
            settings.spiht2d.window = w;
        }
        if let Some(s) = o.smooth_thresh {
            settings.dipole.smooth_thresh = s;
        }
        let mut detector = DetectorConfig::default();
        if let Some(k) = o.detector_k {
            if !(k > 1.0 && k.is_finite()) {
                return Err(Error::Config(format!("detector k must exceed 1, got {k}")));
            }
            detector.k = k;
        }
        if o.report.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
            return Err(Error::Config("empty report path".into()));
        }
        Ok(RunConfig { codec, target_bps, settings, detector, report: o.report.clone() })
    }
}
