use std::path::{Path, PathBuf};

use alodsim_core::analysis::{self, EdcCurve};
use alodsim_core::io::{self, MetricRow, RunManifest, SampleFormat};
use alodsim_core::scene::{parse_scene, preset, serialize_scene, PRESET_NAMES, PROFILE_NAMES};
use alodsim_core::spatial::{array_preset_86, ChannelSemantics};
use alodsim_core::stimuli::{self, BandLevels, Stimulus};
use alodsim_core::{postproc, simulate as render_scene};
use alodsim_core::{HrtfSet, ImpulseResponse, LoudspeakerLayout, OutputMode, RenderingProfile, SceneSpec, SimulationOptions};

use crate::failure::{CmdResult, Failure};
use crate::{AnalyzeArgs, Format, MatchArgs, Mode, PresetsArgs, RenderArgs, SimulateArgs, StimulusArgs, StimulusKind};

const METRICS: [&str; 6] = ["t30", "t30-bands", "edc", "ned", "drr", "dual-slope"];
const SUMMARY_DIRECT_WINDOW: f64 = 0.005;
const CURVE_HOP: f64 = 0.001;

impl From<Format> for SampleFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::F32 => SampleFormat::Float32,
            Format::Pcm16 => SampleFormat::Pcm16,
            Format::Pcm24 => SampleFormat::Pcm24,
        }
    }
}

impl From<Mode> for OutputMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Binaural => OutputMode::Binaural,
            Mode::Array => OutputMode::Array,
            Mode::Diotic => OutputMode::Diotic,
            Mode::Mono => OutputMode::Mono,
        }
    }
}

fn mode_name(m: OutputMode) -> &'static str {
    match m {
        OutputMode::Binaural => "binaural",
        OutputMode::Array => "array",
        OutputMode::Diotic => "diotic",
        OutputMode::Mono => "mono",
    }
}

/// Fully resolved simulation inputs, as recorded in a manifest.
struct Plan {
    scene: SceneSpec,
    profile: RenderingProfile,
    mode: OutputMode,
    duration: f64,
    format: SampleFormat,
    hrtf: Option<String>,
    layout: Option<String>,
}

fn load_profile(arg: &str) -> Result<RenderingProfile, Failure> {
    match RenderingProfile::named(arg) {
        Ok(p) => Ok(p),
        Err(named) if !Path::new(arg).is_file() => Err(named.into()),
        Err(_) => {
            let text = std::fs::read_to_string(arg)?;
            let profile: RenderingProfile =
                serde_json::from_str(&text).map_err(|e| Failure::new("parse", format!("profile `{arg}`: {e}")))?;
            profile.validate()?;
            Ok(profile)
        }
    }
}

fn load_layout(arg: &str) -> Result<LoudspeakerLayout, Failure> {
    if arg == "86-preset" {
        Ok(array_preset_86())
    } else {
        Ok(LoudspeakerLayout::load(Path::new(arg))?)
    }
}

impl Plan {
    fn from_args(a: &SimulateArgs) -> Result<Self, Failure> {
        let mut scene = match (&a.scene, &a.preset) {
            (Some(path), None) => parse_scene(&std::fs::read_to_string(path)?)?,
            (None, Some(name)) => preset(name)?,
            _ => return Err(Failure::new("usage", "exactly one of --scene, --preset or --replay is required")),
        };
        if let Some(seed) = a.seed {
            scene.seed = seed;
        }
        let profile = match &a.profile {
            Some(p) => load_profile(p)?,
            None => RenderingProfile::for_scene(&scene)?,
        };
        let mode = a.output_mode.map(OutputMode::from).unwrap_or(profile.output_mode);
        let duration = a.duration.unwrap_or_else(|| alodsim_core::pipeline::default_duration(&scene));
        Ok(Plan {
            scene,
            profile,
            mode,
            duration,
            format: a.format.into(),
            hrtf: a.hrtf.as_ref().map(|p| p.display().to_string()),
            layout: a.layout.clone(),
        })
    }

    fn from_manifest(m: &RunManifest) -> Result<Self, Failure> {
        let mut scene = parse_scene(&m.scene.to_string())?;
        scene.seed = m.seed;
        if RunManifest::scene_hash(&scene) != m.scene_hash {
            return Err(Failure::new("replay-mismatch", "scene does not match the manifest's scene hash"));
        }
        Ok(Plan {
            scene,
            profile: m.profile.clone(),
            mode: m.output_mode.parse()?,
            duration: m.duration,
            format: m.sample_format,
            hrtf: m.hrtf.clone(),
            layout: m.layout.clone(),
        })
    }

    fn options(&self) -> Result<SimulationOptions, Failure> {
        Ok(SimulationOptions {
            duration: Some(self.duration),
            output_mode: Some(self.mode),
            hrtf: self.hrtf.as_deref().map(|d| HrtfSet::load(Path::new(d))).transpose()?,
            layout: self.layout.as_deref().map(load_layout).transpose()?,
        })
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    sibling(out, "manifest.json")
}

/// `<dir>/<stem>.<suffix>` for a file `<dir>/<stem>.<ext>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn summary_metrics(ir: &ImpulseResponse) -> Vec<MetricRow> {
    let mut rows = Vec::new();
    for (c, ch) in ir.channels.iter().enumerate() {
        if let Ok(t) = analysis::t30_of(ch, ir.sample_rate) {
            rows.push(row("t30", c, "broadband", t, "s"));
        }
        if let Ok(d) = analysis::drr(ch, ir.sample_rate, SUMMARY_DIRECT_WINDOW) {
            rows.push(row("drr", c, "broadband", d, "dB"));
        }
    }
    rows
}

fn row(metric: &str, channel: usize, band: &str, value: f64, unit: &str) -> MetricRow {
    MetricRow {
        metric: metric.into(),
        channel,
        band: band.into(),
        value,
        unit: unit.into(),
    }
}

pub fn simulate(a: SimulateArgs) -> CmdResult {
    let (plan, expected) = match &a.replay {
        Some(path) => {
            let m = RunManifest::load(path)?;
            let expected = m.outputs.first().map(|o| o.1.clone());
            (Plan::from_manifest(&m)?, expected)
        }
        None => (Plan::from_args(&a)?, None),
    };
    let ir = render_scene(&plan.scene, &plan.profile, &plan.options()?)?;
    io::write_wav(&a.out, &ir.channels, ir.sample_rate, plan.format)?;
    let hash = io::sha256_hex(&std::fs::read(&a.out)?);
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        scene_hash: RunManifest::scene_hash(&plan.scene),
        scene: RunManifest::scene_value(&plan.scene)?,
        profile_name: plan.profile.name.clone(),
        profile: plan.profile.clone(),
        seed: plan.scene.seed,
        output_mode: mode_name(plan.mode).into(),
        duration: plan.duration,
        sample_format: plan.format,
        hrtf: plan.hrtf.clone(),
        layout: plan.layout.clone(),
        outputs: vec![(file_name(&a.out), hash.clone())],
        metrics: summary_metrics(&ir),
    };
    manifest.save(&manifest_path(&a.out))?;
    match expected {
        Some(want) if want != hash => Err(Failure::new(
            "replay-mismatch",
            format!("output hash {hash} differs from manifest {want}"),
        )),
        _ => Ok(()),
    }
}

fn curve_columns(n_channels: usize, unit: &str) -> Vec<String> {
    std::iter::once("time_s".to_string())
        .chain((0..n_channels).map(|c| format!("ch{c}_{unit}")))
        .collect()
}

fn write_curves(path: &Path, header: &[String], times: &[f64], columns: &[Vec<f64>]) -> CmdResult {
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(i, t)| std::iter::once(t.to_string()).chain(columns.iter().map(|c| c[i].to_string())).collect())
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_table_csv(path, &header, &rows)?;
    Ok(())
}

fn edc_curves(edcs: &[EdcCurve], fs: u32) -> (Vec<f64>, Vec<Vec<f64>>) {
    let hop = ((CURVE_HOP * fs as f64).round() as usize).max(1);
    let len = edcs[0].values.len();
    let idx: Vec<usize> = (0..len).step_by(hop).collect();
    let times = idx.iter().map(|&i| edcs[0].time(i)).collect();
    let columns = edcs.iter().map(|e| idx.iter().map(|&i| e.values[i]).collect()).collect();
    (times, columns)
}

pub fn analyze(a: AnalyzeArgs) -> CmdResult {
    let metrics: Vec<String> = a.metrics.iter().map(|m| m.trim().to_lowercase()).filter(|m| !m.is_empty()).collect();
    if let Some(bad) = metrics.iter().find(|m| !METRICS.contains(&m.as_str())) {
        return Err(Failure::new("unknown", format!("unknown metric `{bad}`")));
    }
    if metrics.is_empty() {
        return Err(Failure::new("usage", "no metrics requested"));
    }
    let (channels, fs) = io::read_wav(&a.input)?;
    if channels.iter().all(|c| c.is_empty()) {
        return Err(Failure::new("invalid-input", format!("`{}` contains no samples", a.input.display())));
    }
    let mut rows = Vec::new();
    let edcs = || -> Result<Vec<EdcCurve>, Failure> {
        Ok(channels.iter().map(|c| analysis::schroeder_edc(c, fs)).collect::<Result<_, _>>()?)
    };
    for metric in &metrics {
        match metric.as_str() {
            "t30" => {
                for (c, e) in edcs()?.iter().enumerate() {
                    rows.push(row("t30", c, "broadband", analysis::t30(e)?, "s"));
                }
            }
            "t30-bands" => {
                for (c, ch) in channels.iter().enumerate() {
                    for (fc, t) in analysis::octave_band_t30(ch, fs) {
                        rows.push(row("t30", c, &format!("{fc}"), t?, "s"));
                    }
                }
            }
            "drr" => {
                for (c, ch) in channels.iter().enumerate() {
                    rows.push(row("drr", c, "broadband", analysis::drr(ch, fs, a.direct_window)?, "dB"));
                }
            }
            "dual-slope" => {
                for (c, e) in edcs()?.iter().enumerate() {
                    let fit = analysis::dual_slope_fit(e)?;
                    rows.push(row("dual-slope-t30-early", c, "broadband", -60.0 / fit.slope1, "s"));
                    rows.push(row("dual-slope-t30-late", c, "broadband", -60.0 / fit.slope2, "s"));
                    rows.push(row("dual-slope-knee-time", c, "broadband", fit.knee_time, "s"));
                    rows.push(row("dual-slope-knee-level", c, "broadband", fit.knee_level, "dB"));
                    rows.push(row("dual-slope-residual", c, "broadband", fit.residual, "dB2"));
                }
            }
            "edc" => {
                let (times, columns) = edc_curves(&edcs()?, fs);
                write_curves(&sibling(&a.out, "edc.csv"), &curve_columns(channels.len(), "db"), &times, &columns)?;
            }
            "ned" => {
                let profiles = channels
                    .iter()
                    .map(|c| analysis::ned(c, fs, analysis::NED_WINDOW))
                    .collect::<Result<Vec<_>, _>>()?;
                let columns: Vec<Vec<f64>> = profiles.iter().map(|p| p.values.clone()).collect();
                write_curves(&sibling(&a.out, "ned.csv"), &curve_columns(channels.len(), "ned"), &profiles[0].times, &columns)?;
            }
            _ => unreachable!(),
        }
    }
    io::write_metrics_csv(&a.out, &rows)?;
    Ok(())
}

pub fn stimulus(a: StimulusArgs) -> CmdResult {
    let stim = match a.kind {
        StimulusKind::PinkPulse => stimuli::pink_pulse(a.sample_rate, a.duration.unwrap_or(0.5))?,
        StimulusKind::PinkVariant => {
            let levels = match (&a.levels, a.random_seed) {
                (Some(l), _) => {
                    let arr: [i8; 10] = l.as_slice().try_into().map_err(|_| {
                        Failure::new("invalid-input", format!("--levels needs 10 values, got {}", l.len()))
                    })?;
                    BandLevels::new(arr)?
                }
                (None, Some(seed)) => BandLevels::random(seed),
                (None, None) => BandLevels::flat(),
            };
            stimuli::pink_pulse_variant(&levels, a.sample_rate, a.duration.unwrap_or(0.5))?
        }
        StimulusKind::Ess => {
            let f2 = a.f2.unwrap_or(a.sample_rate as f64 / 2.0);
            stimuli::ess_generate(a.f1, f2, a.duration.unwrap_or(3.2), a.sample_rate)?
        },
    };
    io::write_wav(&a.out, &[stim.samples], stim.sample_rate, a.format.into())?;
    Ok(())
}

fn semantics_for(n: usize) -> ChannelSemantics {
    match n {
        1 => ChannelSemantics::Mono,
        2 => ChannelSemantics::BinauralLR,
        _ => ChannelSemantics::ArrayIndexed,
    }
}

fn read_ir(path: &Path) -> Result<ImpulseResponse, Failure> {
    let (channels, fs) = io::read_wav(path)?;
    if channels.iter().all(|c| c.is_empty()) {
        return Err(Failure::new("invalid-input", format!("`{}` contains no samples", path.display())));
    }
    let n = channels.len();
    Ok(ImpulseResponse::new(channels, fs, semantics_for(n)))
}

pub fn render(a: RenderArgs) -> CmdResult {
    let ir = read_ir(&a.ir)?;
    let (mut stim, fs) = io::read_wav(&a.stimulus)?;
    if stim.len() != 1 {
        return Err(Failure::new("invalid-input", format!("stimulus must be mono, got {} channels", stim.len())));
    }
    let out = stimuli::convolve(&Stimulus::external(stim.remove(0), fs), &ir)?;
    io::write_wav(&a.out, &out.channels, out.sample_rate, a.format.into())?;
    Ok(())
}

pub fn match_spectra(a: MatchArgs) -> CmdResult {
    let sim = read_ir(&a.sim)?;
    let reference = read_ir(&a.reference)?;
    let m = postproc::match_spectrum(&sim, &reference, (a.range[0], a.range[1]))?;
    io::write_wav(&a.out, &m.corrected.channels, m.corrected.sample_rate, a.format.into())?;
    let r = &m.report;
    let rows: Vec<Vec<String>> = [
        ("residual_mean", r.residual_mean_db, "dB"),
        ("residual_rms", r.residual_rms_db, "dB"),
        ("residual_max", r.residual_max_db, "dB"),
        ("initial_mean", r.initial_mean_db, "dB"),
        ("range_low", r.band_range.0, "Hz"),
        ("range_high", r.band_range.1, "Hz"),
        ("clamped", if r.clamped { 1.0 } else { 0.0 }, "bool"),
        ("filter_taps", r.filter_taps.len() as f64, "samples"),
    ]
    .iter()
    .map(|(q, v, u)| vec![q.to_string(), v.to_string(), u.to_string()])
    .collect();
    let report = a.report.clone().unwrap_or_else(|| sibling(&a.out, "report.csv"));
    io::write_table_csv(&report, &["quantity", "value", "unit"], &rows)?;
    Ok(())
}

pub fn presets(a: PresetsArgs) -> CmdResult {
    match &a.dump {
        Some(name) => {
            let json = serialize_scene(&preset(name)?);
            match &a.out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        None => {
            for name in PRESET_NAMES {
                println!("scene\t{name}");
            }
            for name in PROFILE_NAMES {
                println!("profile\t{name}");
            }
        }
    }
    Ok(())
}
