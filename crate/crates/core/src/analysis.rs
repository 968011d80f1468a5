//! Objective impulse-response metrics.

use crate::bands::{self, BAND_CENTERS};
use crate::error::{Error, Result};
use crate::postproc;
use crate::scene::{surface_area, volume, RoomSpec};
use crate::spatial::ImpulseResponse;

/// Lowest level an EDC reports, in dB.
pub const EDC_FLOOR_DB: f64 = -120.0;

/// Schroeder backward-integrated energy decay, 0 dB at the first sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EdcCurve {
    pub values: Vec<f64>,
    pub sample_rate: u32,
}

impl EdcCurve {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate as f64
    }

    /// Index of the first sample at or below `level_db`.
    pub fn crossing(&self, level_db: f64) -> Option<usize> {
        self.values.iter().position(|&v| v <= level_db)
    }

    /// Least-squares slope (dB/s) between two levels.
    pub fn slope_between(&self, upper_db: f64, lower_db: f64) -> Result<f64> {
        let start = self.crossing(upper_db).unwrap_or(0);
        let end = self
            .crossing(lower_db)
            .ok_or_else(|| Error::InsufficientDecay(format!("EDC never reaches {lower_db} dB")))?;
        if end <= start + 1 {
            return Err(Error::InsufficientDecay("decay range spans fewer than 3 samples".into()));
        }
        let pts = (start..=end).map(|i| (self.time(i), self.values[i]));
        Ok(line_fit(pts).1)
    }
}

/// `(intercept, slope)` of the least-squares line.
fn line_fit(pts: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in pts {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    ((sy - slope * sx) / n, slope)
}

pub fn schroeder_edc(x: &[f64], sample_rate: u32) -> Result<EdcCurve> {
    let total: f64 = x.iter().map(|v| v * v).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidInput("EDC of an all-zero or non-finite signal".into()));
    }
    let mut values = vec![0.0; x.len()];
    let mut acc = 0.0;
    for i in (0..x.len()).rev() {
        acc += x[i] * x[i];
        values[i] = acc;
    }
    for v in &mut values {
        *v = (10.0 * (*v / total).log10()).max(EDC_FLOOR_DB);
    }
    values[0] = 0.0;
    Ok(EdcCurve { values, sample_rate })
}

/// Reverberation time from the -5 to -35 dB range of the EDC.
pub fn t30(edc: &EdcCurve) -> Result<f64> {
    let slope = edc.slope_between(-5.0, -35.0)?;
    if !(slope < 0.0) {
        return Err(Error::InsufficientDecay("EDC does not decay".into()));
    }
    Ok(-60.0 / slope)
}

/// Broadband T30 of a signal.
pub fn t30_of(x: &[f64], sample_rate: u32) -> Result<f64> {
    t30(&schroeder_edc(x, sample_rate)?)
}

/// T30 per octave band, `(centre, result)`.
pub fn octave_band_t30(x: &[f64], sample_rate: u32) -> Vec<(f64, Result<f64>)> {
    bands::split(x, sample_rate as f64)
        .into_iter()
        .zip(BAND_CENTERS)
        .map(|(band, fc)| (fc, t30_of(&band, sample_rate)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NedProfile {
    /// Window centre times in seconds.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Window length in seconds.
    pub window: f64,
}

impl NedProfile {
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.iter().position(|&x| x >= t - 1e-12)?;
        Some(self.values[i])
    }
}

pub const NED_WINDOW: f64 = 0.025;
pub const NED_HOP: f64 = 0.001;

/// Fraction of samples of a Gaussian beyond one standard deviation.
const ERFC_INV_SQRT2: f64 = 0.317_310_507_862_914_1;

/// Normalized echo density with a rectangular window, one value per hop.
pub fn ned(x: &[f64], sample_rate: u32, window: f64) -> Result<NedProfile> {
    let fs = sample_rate as f64;
    let w = (window * fs).round() as usize;
    if w < 2 {
        return Err(Error::InvalidInput("NED window shorter than 2 samples".into()));
    }
    if w > x.len() {
        return Err(Error::InvalidInput(format!(
            "NED window of {w} samples exceeds signal length {}",
            x.len()
        )));
    }
    let hop = ((NED_HOP * fs).round() as usize).max(1);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut start = 0;
    while start + w <= x.len() {
        let seg = &x[start..start + w];
        let mean = seg.iter().sum::<f64>() / w as f64;
        let sd = (seg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w as f64).sqrt();
        let count = if sd > 0.0 { seg.iter().filter(|v| (*v - mean).abs() > sd).count() } else { 0 };
        times.push((start as f64 + w as f64 / 2.0) / fs);
        values.push(count as f64 / w as f64 / ERFC_INV_SQRT2);
        start += hop;
    }
    Ok(NedProfile { times, values, window })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSlopeFit {
    /// dB/s before and after the knee.
    pub slope1: f64,
    pub slope2: f64,
    pub knee_time: f64,
    pub knee_level: f64,
    /// Mean squared error, dB².
    pub residual: f64,
}

/// Residual of the best single line over the same range `dual_slope_fit` uses.
pub fn single_slope_residual(edc: &EdcCurve) -> Result<f64> {
    let pts = fit_points(edc)?;
    let (a, b) = line_fit(pts.iter().copied());
    Ok(pts.iter().map(|(t, y)| (y - a - b * t).powi(2)).sum::<f64>() / pts.len() as f64)
}

/// EDC points (one per millisecond) from -5 dB down to 15 dB above the
/// level at 90 % of the decay's length, but no lower than -80 dB. The
/// margin keeps the truncation bend of the integral out of the fit.
fn fit_points(edc: &EdcCurve) -> Result<Vec<(f64, f64)>> {
    let last = edc.values.iter().rposition(|&v| v > EDC_FLOOR_DB).unwrap_or(0);
    let end_level = edc.values[last * 9 / 10];
    let lower = (end_level + 15.0).max(-80.0);
    if lower > -45.0 {
        return Err(Error::InsufficientDecay(format!(
            "usable EDC range ends at {lower:.1} dB; a two-slope fit needs at least -45 dB"
        )));
    }
    let start = edc.crossing(-5.0).unwrap_or(0);
    let end = edc.crossing(lower).unwrap_or(last);
    let step = ((edc.sample_rate as f64 / 1000.0).round() as usize).max(1);
    Ok((start..=end).step_by(step).map(|i| (edc.time(i), edc.values[i])).collect())
}

/// Continuous two-segment line fit to the EDC with the knee searched on a
/// 0.5 dB grid of EDC levels.
pub fn dual_slope_fit(edc: &EdcCurve) -> Result<DualSlopeFit> {
    let pts = fit_points(edc)?;
    let top = pts[0].1;
    let bottom = pts[pts.len() - 1].1;
    let mut best: Option<DualSlopeFit> = None;
    let mut level = top - 5.0;
    while level >= bottom + 5.0 {
        if let Some(k) = pts.iter().position(|p| p.1 <= level) {
            let tk = pts[k].0;
            if let Some(fit) = hinge_fit(&pts, tk) {
                if best.is_none_or(|b| fit.residual < b.residual) {
                    best = Some(fit);
                }
            }
        }
        level -= 0.5;
    }
    best.ok_or_else(|| Error::InsufficientDecay("no knee candidate in the EDC range".into()))
}

/// Least squares for `y = a + b1·min(t - tk, 0) + b2·max(t - tk, 0)`.
fn hinge_fit(pts: &[(f64, f64)], tk: f64) -> Option<DualSlopeFit> {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(t, y) in pts {
        let row = [1.0, (t - tk).min(0.0), (t - tk).max(0.0)];
        for i in 0..3 {
            aty[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let [a, b1, b2] = solve3(ata, aty)?;
    let residual = pts
        .iter()
        .map(|&(t, y)| (y - a - b1 * (t - tk).min(0.0) - b2 * (t - tk).max(0.0)).powi(2))
        .sum::<f64>()
        / pts.len() as f64;
    Some(DualSlopeFit {
        slope1: b1,
        slope2: b2,
        knee_time: tk,
        knee_level: a.min(0.0),
        residual,
    })
}

fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        v.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..3 {
                    m[r][c] -= f * m[col][c];
                }
                v[r] -= f * v[col];
            }
        }
    }
    Some([v[0] / m[0][0], v[1] / m[1][1], v[2] / m[2][2]])
}

pub const DEFAULT_RANGE: (f64, f64) = (100.0, 16000.0);

/// Mean absolute difference (dB) of the third-octave smoothed magnitude
/// spectra, sampled on a 1/12-octave grid over `range`.
pub fn spectral_deviation(a: &ImpulseResponse, b: &ImpulseResponse, range: (f64, f64)) -> Result<f64> {
    Ok(postproc::deviation(a, b, range)?.0)
}

/// Mean free path 4V/S in meters.
pub fn mean_free_path(room: &RoomSpec) -> f64 {
    4.0 * volume(room) / surface_area(room)
}

/// Direct-to-reverberant ratio in dB. The direct window is centred on the
/// first sample reaching half the peak magnitude; a response with no
/// energy outside it is reported as +120 dB.
pub fn drr(x: &[f64], sample_rate: u32, direct_window: f64) -> Result<f64> {
    let peak = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::InvalidInput("DRR of an all-zero signal".into()));
    }
    let first = x.iter().position(|v| v.abs() >= 0.5 * peak).unwrap_or(0);
    let half = (direct_window / 2.0 * sample_rate as f64).round() as usize;
    let lo = first.saturating_sub(half);
    let hi = (first + half + 1).min(x.len());
    let direct: f64 = x[lo..hi].iter().map(|v| v * v).sum();
    let total: f64 = x.iter().map(|v| v * v).sum();
    let rest = total - direct;
    if rest <= 0.0 {
        return Ok(120.0);
    }
    Ok((10.0 * (direct / rest).log10()).min(120.0))
}
