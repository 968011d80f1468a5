//! Loudspeaker layouts and vector-base amplitude panning.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Optional per-channel level and delay correction applied at render time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub gain_db: Vec<f64>,
    pub delay_samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoudspeakerLayout {
    /// Speaker positions (listener frame: forward, left, up), meters.
    pub positions: Vec<Vec3>,
    /// Listening position the directions are taken from.
    pub center: Vec3,
    /// Unit vectors from the centre to each speaker.
    pub directions: Vec<Vec3>,
    /// Convex-hull triangulation of the directions.
    pub triangles: Vec<[usize; 3]>,
    inverses: Vec<[[f64; 3]; 3]>,
    pub calibration: Option<Calibration>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    #[serde(default)]
    center: Vec3,
    positions: Vec<Vec3>,
    #[serde(default)]
    calibration: Option<Calibration>,
}

/// Sparse panning gains.
#[derive(Debug, Clone, PartialEq)]
pub struct VbapGains {
    /// `(speaker, gain)` pairs, gains positive, `Σg² = 1`.
    pub gains: Vec<(usize, f64)>,
    /// Set when no triangle encloses the direction and the nearest one was used.
    pub fallback: bool,
}

impl LoudspeakerLayout {
    pub fn new(positions: Vec<Vec3>, center: Vec3) -> Result<Self> {
        let mut directions = Vec::with_capacity(positions.len());
        for (i, p) in positions.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::validation(format!("positions[{i}]"), "must be finite"));
            }
            if positions[..i].iter().any(|q| q.distance(*p) < 1e-6) {
                return Err(Error::validation(format!("positions[{i}]"), "duplicate speaker position"));
            }
            let d = (*p - center)
                .normalized()
                .ok_or_else(|| Error::validation(format!("positions[{i}]"), "speaker at the centre"))?;
            if directions.iter().any(|q: &Vec3| q.distance(d) < 1e-9) {
                return Err(Error::validation(format!("positions[{i}]"), "duplicate speaker direction"));
            }
            directions.push(d);
        }
        // faces whose plane contains the centre cannot pan and are dropped
        let (triangles, inverses): (Vec<_>, Vec<_>) = convex_hull(&directions)?
            .into_iter()
            .filter_map(|t| invert([directions[t[0]], directions[t[1]], directions[t[2]]]).map(|inv| (t, inv)))
            .unzip();
        if triangles.is_empty() {
            return Err(Error::DegenerateGeometry("no usable speaker triangles".into()));
        }
        Ok(LoudspeakerLayout {
            positions,
            center,
            directions,
            triangles,
            inverses,
            calibration: None,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn with_calibration(mut self, calibration: Calibration) -> Result<Self> {
        if calibration.gain_db.len() != self.len() || calibration.delay_samples.len() != self.len() {
            return Err(Error::validation("calibration", "one entry per speaker required"));
        }
        self.calibration = Some(calibration);
        Ok(self)
    }

    /// JSON file: `{"center": [x,y,z], "positions": [[x,y,z], ...],
    /// "calibration": {"gain_db": [...], "delay_samples": [...]}}`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let file: LayoutFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            field: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
        let layout = LoudspeakerLayout::new(file.positions, file.center)?;
        match file.calibration {
            Some(c) => layout.with_calibration(c),
            None => Ok(layout),
        }
    }

    /// Index of the speaker closest to straight ahead.
    pub fn frontal(&self) -> usize {
        let mut best = 0;
        for (i, d) in self.directions.iter().enumerate() {
            if d.dot(Vec3::X) > self.directions[best].dot(Vec3::X) {
                best = i;
            }
        }
        best
    }
}

/// 86 speakers on a sphere of radius 2.4 m centred 1.8 m above the floor:
/// 48 at 0° elevation, 12 at ±30°, 6 at ±60° and one at each pole. Every
/// ring starts at azimuth 0°, so speaker 0 is straight ahead.
pub fn array_preset_86() -> LoudspeakerLayout {
    let center = Vec3::new(0.0, 0.0, 1.8);
    let radius = 2.4;
    let rings: [(f64, usize); 7] = [
        (0.0, 48),
        (30.0, 12),
        (-30.0, 12),
        (60.0, 6),
        (-60.0, 6),
        (90.0, 1),
        (-90.0, 1),
    ];
    let mut positions = Vec::with_capacity(86);
    for (el, count) in rings {
        for k in 0..count {
            let az = 360.0 * k as f64 / count as f64;
            positions.push(center + Vec3::from_az_el_deg(az, el) * radius);
        }
    }
    LoudspeakerLayout::new(positions, center).expect("preset layout is valid")
}

fn det(m: [Vec3; 3]) -> f64 {
    m[0].dot(m[1].cross(m[2]))
}

/// Rows of the inverse of the matrix whose columns are `m`.
fn invert(m: [Vec3; 3]) -> Option<[[f64; 3]; 3]> {
    let d = det(m);
    if d.abs() < 1e-9 {
        return None;
    }
    let r0 = m[1].cross(m[2]) / d;
    let r1 = m[2].cross(m[0]) / d;
    let r2 = m[0].cross(m[1]) / d;
    Some([r0.to_array(), r1.to_array(), r2.to_array()])
}

/// Incremental convex hull; faces are wound counter-clockwise seen from outside.
fn convex_hull(points: &[Vec3]) -> Result<Vec<[usize; 3]>> {
    let eps = 1e-9;
    let degenerate = || Error::DegenerateGeometry("speaker directions do not span 3-D space".into());
    let n = points.len();
    if n < 4 {
        return Err(degenerate());
    }
    let i0 = 0;
    let i1 = (1..n)
        .max_by(|&a, &b| points[a].distance(points[i0]).total_cmp(&points[b].distance(points[i0])))
        .ok_or_else(degenerate)?;
    let line = points[i1] - points[i0];
    let i2 = (0..n)
        .max_by(|&a, &b| {
            line.cross(points[a] - points[i0])
                .norm()
                .total_cmp(&line.cross(points[b] - points[i0]).norm())
        })
        .ok_or_else(degenerate)?;
    let normal = line.cross(points[i2] - points[i0]);
    if normal.norm() < eps {
        return Err(degenerate());
    }
    let i3 = (0..n)
        .max_by(|&a, &b| {
            normal
                .dot(points[a] - points[i0])
                .abs()
                .total_cmp(&normal.dot(points[b] - points[i0]).abs())
        })
        .ok_or_else(degenerate)?;
    if normal.dot(points[i3] - points[i0]).abs() < eps {
        return Err(degenerate());
    }
    let inside = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
    let orient = |f: [usize; 3]| -> [usize; 3] {
        let nrm = (points[f[1]] - points[f[0]]).cross(points[f[2]] - points[f[0]]);
        if nrm.dot(points[f[0]] - inside) < 0.0 {
            [f[0], f[2], f[1]]
        } else {
            f
        }
    };
    let mut faces: Vec<[usize; 3]> = vec![
        orient([i0, i1, i2]),
        orient([i0, i1, i3]),
        orient([i0, i2, i3]),
        orient([i1, i2, i3]),
    ];
    let seed = [i0, i1, i2, i3];
    for p in 0..n {
        if seed.contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces
            .iter()
            .map(|f| {
                let nrm = (points[f[1]] - points[f[0]]).cross(points[f[2]] - points[f[0]]);
                let nrm = nrm / nrm.norm();
                nrm.dot(points[p] - points[f[0]]) > eps
            })
            .collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut horizon = Vec::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let shared = faces.iter().zip(&visible).any(|(g, &gv)| {
                    gv && (0..3).any(|k| g[k] == b && g[(k + 1) % 3] == a)
                });
                if !shared {
                    horizon.push((a, b));
                }
            }
        }
        let mut kept: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, &v)| !v)
            .map(|(f, _)| *f)
            .collect();
        kept.extend(horizon.into_iter().map(|(a, b)| [a, b, p]));
        faces = kept;
    }
    Ok(faces)
}

/// Panning gains for a unit direction in the layout frame.
pub fn vbap_gains(direction: Vec3, layout: &LoudspeakerLayout) -> VbapGains {
    let d = direction.normalized().unwrap_or(Vec3::X);
    let solve = |inv: &[[f64; 3]; 3]| -> [f64; 3] {
        std::array::from_fn(|r| inv[r][0] * d.x + inv[r][1] * d.y + inv[r][2] * d.z)
    };
    let tol = 1e-9;
    let mut best: Option<(usize, [f64; 3])> = None;
    let mut best_min = f64::NEG_INFINITY;
    for (t, inv) in layout.inverses.iter().enumerate() {
        let g = solve(inv);
        let min = g[0].min(g[1]).min(g[2]);
        // the triangle must lie on the same side as the direction
        if g.iter().sum::<f64>() <= 0.0 {
            continue;
        }
        if min > best_min {
            best_min = min;
            best = Some((t, g));
            if min >= -tol {
                break;
            }
        }
    }
    let Some((t, g)) = best else {
        let nearest = (0..layout.len())
            .max_by(|&a, &b| layout.directions[a].dot(d).total_cmp(&layout.directions[b].dot(d)))
            .unwrap_or(0);
        return VbapGains {
            gains: vec![(nearest, 1.0)],
            fallback: true,
        };
    };
    let fallback = best_min < -tol;
    let g = g.map(|v| if v > 1e-12 { v } else { 0.0 });
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tri = layout.triangles[t];
    let mut gains: Vec<(usize, f64)> = (0..3)
        .filter(|&k| g[k] > 0.0)
        .map(|k| (tri[k], g[k] / norm))
        .collect();
    gains.sort_by_key(|&(i, _)| i);
    VbapGains { gains, fallback }
}
