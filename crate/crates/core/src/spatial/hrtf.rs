//! HRTF sets: directory loader and a synthetic spherical-head set.
//!
//! Directory layout: `index.txt` with one `azimuth elevation file.wav` row
//! per direction (degrees, azimuth positive to the right, `#` comments),
//! and one stereo WAV per row holding the left/right impulse responses.

use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Head-related impulse responses on a set of directions (listener frame:
/// forward, left, up).
#[derive(Debug, Clone, PartialEq)]
pub struct HrtfSet {
    pub directions: Vec<Vec3>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl HrtfSet {
    pub fn new(directions: Vec<Vec3>, left: Vec<Vec<f64>>, right: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        let set = HrtfSet {
            directions: directions
                .into_iter()
                .map(|d| d.normalized().ok_or_else(|| Error::InvalidInput("zero HRTF direction".into())))
                .collect::<Result<_>>()?,
            left,
            right,
            sample_rate,
        };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<()> {
        let n = self.directions.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty HRTF set".into()));
        }
        if self.left.len() != n || self.right.len() != n {
            return Err(Error::InvalidInput("HRTF filter count does not match directions".into()));
        }
        let len = self.left[0].len();
        if len == 0 || self.left.iter().chain(&self.right).any(|h| h.len() != len) {
            return Err(Error::InvalidInput("HRTF filters must share one non-zero length".into()));
        }
        if self.left.iter().chain(&self.right).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("HRTF filters contain non-finite samples".into()));
        }
        if n < 4 || !spans_space(&self.directions) {
            return Err(Error::DegenerateGeometry(
                "HRTF set needs at least 4 non-coplanar directions".into(),
            ));
        }
        Ok(())
    }

    pub fn filter_len(&self) -> usize {
        self.left[0].len()
    }

    /// Index of the angularly nearest direction; ties go to the lowest index.
    pub fn nearest(&self, direction: Vec3) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, d) in self.directions.iter().enumerate() {
            let v = d.dot(direction);
            if v > best_dot {
                best_dot = v;
                best = i;
            }
        }
        best
    }

    /// Synthetic set from a rigid spherical head (first-order head shadow
    /// and Woodworth-style arrival times) on a regular grid.
    pub fn spherical_head(sample_rate: u32, step_deg: f64) -> Self {
        let mut directions = vec![Vec3::from_az_el_deg(0.0, -90.0)];
        let rings = (180.0 / step_deg).round() as usize;
        for r in 1..rings {
            let el = -90.0 + r as f64 * step_deg;
            let per_ring = (360.0 / step_deg).round() as usize;
            for a in 0..per_ring {
                directions.push(Vec3::from_az_el_deg(a as f64 * step_deg, el));
            }
        }
        directions.push(Vec3::from_az_el_deg(0.0, 90.0));
        let fs = sample_rate as f64;
        let (left, right) = directions
            .iter()
            .map(|d| (ear_response(d.y, fs), ear_response(-d.y, fs)))
            .unzip();
        HrtfSet {
            directions,
            left,
            right,
            sample_rate,
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let index = std::fs::read_to_string(dir.join("index.txt"))?;
        let mut directions = Vec::new();
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut rate = None;
        for (lineno, line) in index.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse {
                field: format!("index.txt:{}", lineno + 1),
                message: "expected `azimuth elevation file`".into(),
            };
            if fields.len() != 3 {
                return Err(bad());
            }
            let az: f64 = fields[0].parse().map_err(|_| bad())?;
            let el: f64 = fields[1].parse().map_err(|_| bad())?;
            let (channels, fs) = crate::io::read_wav(&dir.join(fields[2]))?;
            if channels.len() != 2 {
                return Err(Error::InvalidInput(format!("{} is not stereo", fields[2])));
            }
            match rate {
                None => rate = Some(fs),
                Some(r) if r != fs => return Err(Error::RateMismatch(r, fs)),
                _ => {}
            }
            let mut ch = channels.into_iter();
            directions.push(Vec3::from_az_el_deg(az, el));
            left.push(ch.next().unwrap_or_default());
            right.push(ch.next().unwrap_or_default());
        }
        HrtfSet::new(directions, left, right, rate.unwrap_or(0))
    }
}

fn spans_space(dirs: &[Vec3]) -> bool {
    let a = dirs[0];
    let Some(b) = dirs.iter().find(|&&b| (b - a).norm() > 1e-9) else {
        return false;
    };
    let Some(m) = dirs.iter().map(|&c| (*b - a).cross(c - a)).find(|m| m.norm() > 1e-9) else {
        return false;
    };
    dirs.iter().any(|&d| m.dot(d - a).abs() > 1e-9)
}

pub const HEAD_RADIUS: f64 = 0.0875;
const HRIR_LEN: usize = 256;
/// Bulk delay keeping the earliest ear response causal.
const HRIR_BULK: f64 = 48.0;

/// Response of the ear whose axis makes `cos_theta` with the source direction.
fn ear_response(cos_theta: f64, fs: f64) -> Vec<f64> {
    let c = 343.0;
    let a = HEAD_RADIUS;
    let theta = cos_theta.clamp(-1.0, 1.0).acos();
    // Brown & Duda head shadow
    let (alpha_min, theta_min) = (0.1, 150f64.to_radians());
    let alpha = (1.0 + alpha_min / 2.0) + (1.0 - alpha_min / 2.0) * (theta / theta_min * std::f64::consts::PI).cos();
    let w0 = c / a;
    let delay = if theta < std::f64::consts::FRAC_PI_2 {
        -(a / c) * theta.cos()
    } else {
        (a / c) * (theta - std::f64::consts::FRAC_PI_2)
    };
    let tau = HRIR_BULK / fs + delay;
    let n = HRIR_LEN;
    let spec: Vec<Complex64> = (0..n)
        .map(|k| {
            let f = dsp::bin_freq(k, n, fs);
            let signed = if k <= n / 2 { f } else { -f };
            let w = 2.0 * std::f64::consts::PI * signed;
            let shadow = Complex64::new(1.0, alpha * w / (2.0 * w0)) / Complex64::new(1.0, w / (2.0 * w0));
            shadow * Complex64::from_polar(1.0, -w * tau)
        })
        .collect();
    dsp::irfft(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_set_is_valid_and_symmetric() {
        let set = HrtfSet::spherical_head(44100, 10.0);
        set.validate().unwrap();
        let front = set.nearest(Vec3::X);
        assert_eq!(set.directions[front], Vec3::from_az_el_deg(0.0, 0.0));
        assert_eq!(set.left[front], set.right[front]);
    }

    #[test]
    fn nearest_tie_breaks_low() {
        let dirs = vec![Vec3::X, Vec3::Y, Vec3::Z, -Vec3::X, -Vec3::Y];
        let h = vec![vec![1.0]; 5];
        let set = HrtfSet::new(dirs, h.clone(), h, 44100).unwrap();
        let mid = (Vec3::X + Vec3::Y).normalized().unwrap();
        assert_eq!(set.nearest(mid), 0);
    }

    #[test]
    fn coplanar_sets_rejected() {
        let dirs = vec![Vec3::X, Vec3::Y, -Vec3::X, -Vec3::Y];
        let h = vec![vec![1.0]; 4];
        assert!(HrtfSet::new(dirs, h.clone(), h, 44100).is_err());
    }
}
