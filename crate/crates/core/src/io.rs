//! WAV and CSV files, run manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scene::{serialize_scene, RenderingProfile, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFormat {
    Pcm16,
    Pcm24,
    #[default]
    Float32,
}

/// Channels of a WAV file as `f64` in [-1, 1], plus the sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<Vec<f64>>, u32)> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let n = spec.channels as usize;
    if n == 0 {
        return Err(Error::InvalidInput("WAV file has no channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 2f64.powi(bits as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
        (fmt, bits) => {
            return Err(Error::InvalidInput(format!("unsupported WAV format {fmt:?} {bits}-bit")));
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n); n];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % n].push(v);
    }
    Ok((channels, spec.sample_rate))
}

/// Write equal-length channels. Integer formats clip to full scale.
pub fn write_wav(path: &Path, channels: &[Vec<f64>], sample_rate: u32, format: SampleFormat) -> Result<()> {
    if channels.is_empty() || channels.len() > u16::MAX as usize {
        return Err(Error::InvalidInput(format!("cannot write {} channels", channels.len())));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidInput("channels differ in length".into()));
    }
    if channels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite samples".into()));
    }
    let (bits, sample_format) = match format {
        SampleFormat::Pcm16 => (16, hound::SampleFormat::Int),
        SampleFormat::Pcm24 => (24, hound::SampleFormat::Int),
        SampleFormat::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: bits,
        sample_format,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    let full = 2f64.powi(bits as i32 - 1);
    for i in 0..len {
        for c in channels {
            match format {
                SampleFormat::Float32 => w.write_sample(c[i] as f32)?,
                _ => w.write_sample((c[i] * full).round().clamp(-full, full - 1.0) as i32)?,
            }
        }
    }
    w.finalize()?;
    Ok(())
}

/// One metric value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub channel: usize,
    /// Octave-band centre in Hz, or "broadband".
    pub band: String,
    pub value: f64,
    pub unit: String,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(["metric", "channel", "band", "value", "unit"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column curve, e.g. EDC or NED against time.
pub fn write_curve_csv(path: &Path, x_name: &str, y_name: &str, points: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([x_name, y_name])?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus rows of arbitrary string records.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to re-run a simulation and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool_version: String,
    /// SHA-256 of the canonical scene JSON.
    pub scene_hash: String,
    pub scene: serde_json::Value,
    pub profile_name: String,
    pub profile: RenderingProfile,
    pub seed: u64,
    pub output_mode: String,
    pub duration: f64,
    #[serde(default)]
    pub sample_format: SampleFormat,
    /// HRTF directory or layout file used, when not the built-in ones.
    #[serde(default)]
    pub hrtf: Option<String>,
    #[serde(default)]
    pub layout: Option<String>,
    /// `(file name, sha256)` per written file.
    pub outputs: Vec<(String, String)>,
    pub metrics: Vec<MetricRow>,
}

impl RunManifest {
    pub fn scene_hash(scene: &SceneSpec) -> String {
        sha256_hex(serialize_scene(scene).as_bytes())
    }

    pub fn scene_value(scene: &SceneSpec) -> Result<serde_json::Value> {
        Ok(serde_json::from_str(&serialize_scene(scene))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            field: e.path().to_string(),
            message: e.into_inner().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_exact_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let ch = vec![vec![0.5, -0.25, 0.125], vec![0.0, 1.0, -1.0]];
        write_wav(&p, &ch, 48000, SampleFormat::Float32).unwrap();
        let (back, fs) = read_wav(&p).unwrap();
        assert_eq!(fs, 48000);
        assert_eq!(back, ch);
    }

    #[test]
    fn pcm_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        for (fmt, bits) in [(SampleFormat::Pcm16, 16), (SampleFormat::Pcm24, 24)] {
            let p = dir.path().join(format!("{bits}.wav"));
            let ch = vec![vec![0.3, -0.7, 0.999]];
            write_wav(&p, &ch, 44100, fmt).unwrap();
            let (back, _) = read_wav(&p).unwrap();
            let lsb = 2f64.powi(1 - bits);
            for (a, b) in back[0].iter().zip(&ch[0]) {
                assert!((a - b).abs() <= lsb);
            }
        }
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
