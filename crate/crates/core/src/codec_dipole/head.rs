//! Homogeneous spherical head model and its analytic lead field.
//!
//! Coordinates: `x` points to the nose, `y` to the left ear, `z` to the
//! vertex. Electrode directions follow the 10-20 layout on an idealised
//! sphere.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const HEAD_RADIUS: f64 = 0.09;
pub const CONDUCTIVITY: f64 = 1.0;

/// The 23-channel longitudinal bipolar montage used for scalp recordings
/// at 256 Hz. Channels labelled `ch0`, `ch1`, ... are mapped onto it in
/// order.
pub const STANDARD_BIPOLAR: [&str; 23] = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4", "F4-C4", "C4-P4",
    "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ", "P7-T7", "T7-FT9", "FT9-FT10",
    "FT10-T8", "T8-P8",
];

/// `(azimuth, elevation)` in degrees; azimuth grows towards the left ear.
fn angles(name: &str) -> Option<(f64, f64)> {
    Some(match name {
        "FPZ" => (0.0, 0.0),
        "FP1" => (18.0, 0.0),
        "FP2" => (-18.0, 0.0),
        "F7" => (54.0, 0.0),
        "F8" => (-54.0, 0.0),
        "FT7" => (72.0, 0.0),
        "FT8" => (-72.0, 0.0),
        "T7" | "T3" => (90.0, 0.0),
        "T8" | "T4" => (-90.0, 0.0),
        "TP7" => (108.0, 0.0),
        "TP8" => (-108.0, 0.0),
        "P7" | "T5" => (126.0, 0.0),
        "P8" | "T6" => (-126.0, 0.0),
        "O1" => (162.0, 0.0),
        "O2" => (-162.0, 0.0),
        "OZ" => (180.0, 0.0),
        "FZ" => (0.0, 45.0),
        "CZ" => (0.0, 90.0),
        "PZ" => (180.0, 45.0),
        "F3" => (40.0, 40.0),
        "F4" => (-40.0, 40.0),
        "C3" => (90.0, 45.0),
        "C4" => (-90.0, 45.0),
        "P3" => (140.0, 40.0),
        "P4" => (-140.0, 40.0),
        "FT9" => (72.0, -18.0),
        "FT10" => (-72.0, -18.0),
        _ => return None,
    })
}

/// Unit vector of a 10-20 electrode name (case-insensitive).
pub fn electrode_direction(name: &str) -> Option<[f64; 3]> {
    let (az, el) = angles(&name.trim().to_ascii_uppercase())?;
    let (az, el) = (az.to_radians(), el.to_radians());
    Some([el.cos() * az.cos(), el.cos() * az.sin(), el.sin()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivation {
    Referential(usize),
    /// First electrode minus second.
    Bipolar(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadModel {
    pub radius: f64,
    pub electrode_names: Vec<String>,
    /// Positions on the sphere, in metres.
    pub electrodes: Vec<[f64; 3]>,
    pub channels: Vec<Derivation>,
}

fn is_generic(label: &str) -> bool {
    label
        .strip_prefix("ch")
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

const REFERENCES: [&str; 6] = ["REF", "AVG", "AV", "LE", "A1", "A2"];

impl HeadModel {
    /// Builds the model from channel labels such as `FP1-F7` or `Cz`.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("no channels".into()));
        }
        if labels.iter().all(|l| is_generic(l.as_ref())) {
            if labels.len() > STANDARD_BIPOLAR.len() {
                return Err(Error::Config(format!(
                    "{} unlabelled channels; at most {} can be mapped to the default montage",
                    labels.len(),
                    STANDARD_BIPOLAR.len()
                )));
            }
            return Self::from_labels(&STANDARD_BIPOLAR[..labels.len()]);
        }
        let mut model = HeadModel {
            radius: HEAD_RADIUS,
            electrode_names: Vec::new(),
            electrodes: Vec::new(),
            channels: Vec::with_capacity(labels.len()),
        };
        for label in labels {
            let raw = label.as_ref().trim().to_ascii_uppercase();
            let raw = raw.strip_prefix("EEG ").unwrap_or(&raw).trim().to_string();
            let mut parts: Vec<&str> = raw.split('-').map(str::trim).collect();
            // Duplicated derivations carry a numeric suffix, e.g. `T8-P8-1`.
            if parts.len() == 3 && parts[2].bytes().all(|c| c.is_ascii_digit()) {
                parts.pop();
            }
            let unknown = || Error::Config(format!("channel {:?} has no electrode position", label.as_ref()));
            let d = match parts.as_slice() {
                [a] => Derivation::Referential(model.electrode(a).ok_or_else(unknown)?),
                [a, b] if REFERENCES.contains(b) || b.is_empty() || b.bytes().all(|c| c.is_ascii_digit()) => {
                    Derivation::Referential(model.electrode(a).ok_or_else(unknown)?)
                }
                [a, b] => {
                    let (i, j) = (model.electrode(a).ok_or_else(unknown)?, model.electrode(b).ok_or_else(unknown)?);
                    if i == j {
                        return Err(Error::Config(format!("channel {raw} subtracts an electrode from itself")));
                    }
                    Derivation::Bipolar(i, j)
                }
                _ => return Err(unknown()),
            };
            model.channels.push(d);
        }
        Ok(model)
    }

    fn electrode(&mut self, name: &str) -> Option<usize> {
        let dir = electrode_direction(name)?;
        if let Some(i) = self.electrode_names.iter().position(|n| n == name) {
            return Some(i);
        }
        self.electrode_names.push(name.to_string());
        self.electrodes.push(dir.map(|c| c * self.radius));
        Some(self.electrodes.len() - 1)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// Channels x 3 matrix mapping a dipole moment at `p` to channel
    /// potentials.
    pub fn lead_field(&self, p: [f64; 3]) -> Result<DMatrix<f64>> {
        if norm(p) >= self.radius {
            return Err(Error::Domain(format!("dipole at {p:?} is not inside the head")));
        }
        let unit: Vec<[f64; 3]> = self
            .electrodes
            .iter()
            .map(|&e| unit_potentials(e, p, self.radius))
            .collect();
        Ok(DMatrix::from_fn(self.channels.len(), 3, |ch, k| match self.channels[ch] {
            Derivation::Referential(e) => unit[e][k],
            Derivation::Bipolar(a, b) => unit[a][k] - unit[b][k],
        }))
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    dot(v, v).sqrt()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Potentials at surface point `r` (|r| = `radius`) due to unit moments
/// along x, y and z placed at `p`, for a homogeneous sphere.
pub fn unit_potentials(r: [f64; 3], p: [f64; 3], radius: f64) -> [f64; 3] {
    let d = [r[0] - p[0], r[1] - p[1], r[2] - p[2]];
    let dn = norm(d);
    let a = 2.0 / (dn * dn * dn);
    let den = radius * dn * (radius * radius - dot(r, p) + radius * dn);
    let k = 1.0 / (4.0 * std::f64::consts::PI * CONDUCTIVITY);
    [0, 1, 2].map(|i| k * (a * d[i] + (r[i] * dn + radius * d[i]) / den))
}

/// Potential at `r` from moment `q` at `p`.
pub fn potential(r: [f64; 3], p: [f64; 3], q: [f64; 3], radius: f64) -> f64 {
    dot(unit_potentials(r, p, radius), q)
}
