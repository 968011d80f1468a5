//! Rendering a [`SpatialIR`] to concrete channels.
//!
//! Every tap becomes a short mono segment: a scaled impulse when its band
//! gains are flat, otherwise a zero-phase FIR realising the band gains
//! (convolved with the diffuse burst when present). Segments and tail streams
//! are then routed to channels by their direction in the listener frame.

use rustfft::num_complex::Complex64;

use super::hrtf::HrtfSet;
use super::vbap::{vbap_gains, LoudspeakerLayout};
use crate::bands::{self, Bands};
use crate::dsp;
use crate::error::{Error, Result};
use crate::geom::{Frame, Vec3};
use crate::ism::{ReflectionTap, SpatialIR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSemantics {
    BinauralLR,
    ArrayIndexed,
    Mono,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    /// Equal-length channels.
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
    pub semantics: ChannelSemantics,
}

impl ImpulseResponse {
    /// Pads channels to a common length.
    pub fn new(mut channels: Vec<Vec<f64>>, sample_rate: u32, semantics: ChannelSemantics) -> Self {
        let len = channels.iter().map(Vec::len).max().unwrap_or(0);
        for c in &mut channels {
            c.resize(len, 0.0);
        }
        ImpulseResponse {
            channels,
            sample_rate,
            semantics,
        }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// First channel.
    pub fn into_mono(self) -> Vec<f64> {
        self.channels.into_iter().next().unwrap_or_default()
    }

    pub fn is_finite(&self) -> bool {
        self.channels.iter().flatten().all(|v| v.is_finite())
    }
}

/// Length of the zero-phase band kernel; its centre sits at `KERNEL_LEN / 2`.
const KERNEL_LEN: usize = 2048;
const KERNEL_CENTER: usize = KERNEL_LEN / 2;

/// Windowed zero-phase FIR whose response follows the per-band gains.
fn band_kernel(gains: &Bands, fs: f64) -> Vec<f64> {
    let spec = (0..KERNEL_LEN)
        .map(|k| Complex64::new(bands::gain_at(gains, dsp::bin_freq(k, KERNEL_LEN, fs)), 0.0))
        .collect();
    let h = dsp::irfft(spec);
    (0..KERNEL_LEN)
        .map(|i| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / KERNEL_LEN as f64).cos();
            h[(i + KERNEL_LEN - KERNEL_CENTER) % KERNEL_LEN] * w
        })
        .collect()
}

/// Mono segment of a tap and the (possibly negative) sample index of its first value.
fn tap_segment(tap: &ReflectionTap, fs: f64) -> (isize, Vec<f64>) {
    let at = (tap.delay * fs).round() as isize;
    let flat = bands::is_uniform(&tap.amplitude)
        && tap.diffuse_burst.as_ref().is_none_or(|b| bands::is_uniform(&b.amplitude));
    if flat {
        let mut seg = vec![tap.amplitude[0]];
        if let Some(b) = &tap.diffuse_burst {
            let burst = b.samples(fs);
            seg.resize(burst.len(), 0.0);
            for (s, v) in seg.iter_mut().zip(burst) {
                *s += b.amplitude[0] * v;
            }
        }
        return (at, seg);
    }
    let mut seg = band_kernel(&tap.amplitude, fs);
    if let Some(b) = &tap.diffuse_burst {
        let burst = dsp::convolve(&b.samples(fs), &band_kernel(&b.amplitude, fs));
        seg.resize(seg.len().max(burst.len()), 0.0);
        for (s, v) in seg.iter_mut().zip(burst) {
            *s += v;
        }
    }
    (at - KERNEL_CENTER as isize, seg)
}

fn add_at(buf: &mut Vec<f64>, at: isize, seg: &[f64], gain: f64) {
    let skip = (-at).max(0) as usize;
    if skip >= seg.len() {
        return;
    }
    let start = at.max(0) as usize;
    let end = start + seg.len() - skip;
    if buf.len() < end {
        buf.resize(end, 0.0);
    }
    for (o, v) in buf[start..end].iter_mut().zip(&seg[skip..]) {
        *o += gain * v;
    }
}

/// Routes every component of `ir` through `sink`, which adds a mono segment
/// arriving from a listener-frame direction into its channel buffers. Taps
/// and tail are accumulated separately so the signature can be applied.
fn render_with(
    ir: &SpatialIR,
    n_channels: usize,
    mut sink: impl FnMut(&mut [Vec<f64>], Vec3, isize, &[f64]),
) -> Vec<Vec<f64>> {
    let fs = ir.fs();
    let frame = Frame::from_forward(ir.orientation);
    let mut taps = vec![Vec::new(); n_channels];
    for tap in &ir.taps {
        let (at, seg) = tap_segment(tap, fs);
        sink(&mut taps, frame.to_local(tap.doa), at, &seg);
    }
    let mut tail = vec![Vec::new(); n_channels];
    if let Some(t) = &ir.tail {
        for (stream, dir) in t.streams.iter().zip(&t.directions) {
            sink(&mut tail, frame.to_local(*dir), t.start as isize, stream);
        }
    }
    let mut out = match &ir.signature {
        Some(sig) => {
            if sig.applies_to_tail {
                mix(&mut taps, &tail);
                tail.iter_mut().for_each(Vec::clear);
            }
            taps.iter().map(|c| dsp::convolve(c, &sig.samples)).collect()
        }
        None => taps,
    };
    mix(&mut out, &tail);
    let len = out.iter().map(Vec::len).max().unwrap_or(0).max(ir.span());
    for c in &mut out {
        c.resize(len, 0.0);
    }
    out
}

fn mix(acc: &mut [Vec<f64>], other: &[Vec<f64>]) {
    for (a, b) in acc.iter_mut().zip(other) {
        if a.len() < b.len() {
            a.resize(b.len(), 0.0);
        }
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Sum of all components without directional processing.
pub fn render_mono(ir: &SpatialIR) -> ImpulseResponse {
    let channels = render_with(ir, 1, |buf, _, at, seg| add_at(&mut buf[0], at, seg, 1.0));
    ImpulseResponse::new(channels, ir.sample_rate, ChannelSemantics::Mono)
}

/// Two-channel render using the nearest HRTF direction of every component.
pub fn binauralize(ir: &SpatialIR, hrtf: &HrtfSet) -> Result<ImpulseResponse> {
    if hrtf.sample_rate != ir.sample_rate {
        return Err(Error::RateMismatch(ir.sample_rate, hrtf.sample_rate));
    }
    if hrtf.directions.is_empty() {
        return Err(Error::InvalidInput("empty HRTF set".into()));
    }
    let channels = render_with(ir, 2, |buf, dir, at, seg| {
        let i = hrtf.nearest(dir);
        add_at(&mut buf[0], at, &dsp::convolve(seg, &hrtf.left[i]), 1.0);
        add_at(&mut buf[1], at, &dsp::convolve(seg, &hrtf.right[i]), 1.0);
    });
    Ok(ImpulseResponse::new(channels, ir.sample_rate, ChannelSemantics::BinauralLR))
}

/// One channel per loudspeaker, panned with VBAP. Calibration, when present,
/// is applied to the finished feeds.
pub fn render_array(ir: &SpatialIR, layout: &LoudspeakerLayout) -> ImpulseResponse {
    let mut channels = render_with(ir, layout.len(), |buf, dir, at, seg| {
        for (spk, g) in vbap_gains(dir, layout).gains {
            add_at(&mut buf[spk], at, seg, g);
        }
    });
    if let Some(cal) = &layout.calibration {
        for ((c, db), d) in channels.iter_mut().zip(&cal.gain_db).zip(&cal.delay_samples) {
            let g = dsp::from_db20(*db);
            let mut shifted = vec![0.0; *d];
            shifted.extend(c.iter().map(|v| v * g));
            *c = shifted;
        }
    }
    ImpulseResponse::new(channels, ir.sample_rate, ChannelSemantics::ArrayIndexed)
}

/// Left channel presented to both ears.
pub fn diotic(ir: &ImpulseResponse) -> Result<ImpulseResponse> {
    if ir.n_channels() != 2 {
        return Err(Error::InvalidInput(format!(
            "diotic collapse needs 2 channels, got {}",
            ir.n_channels()
        )));
    }
    let left = ir.channels[0].clone();
    Ok(ImpulseResponse::new(vec![left.clone(), left], ir.sample_rate, ChannelSemantics::BinauralLR))
}

/// Left channel of a binaural render fed to the frontal loudspeaker only.
pub fn diotic_array(ir: &ImpulseResponse, layout: &LoudspeakerLayout) -> Result<ImpulseResponse> {
    if ir.n_channels() != 2 {
        return Err(Error::InvalidInput(format!(
            "diotic collapse needs 2 channels, got {}",
            ir.n_channels()
        )));
    }
    let mut channels = vec![vec![0.0; ir.len()]; layout.len()];
    channels[layout.frontal()] = ir.channels[0].clone();
    Ok(ImpulseResponse::new(channels, ir.sample_rate, ChannelSemantics::ArrayIndexed))
}
