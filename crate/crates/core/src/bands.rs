//! Octave-band grid (125 Hz to 16 kHz) and a complementary zero-phase filterbank.

use rustfft::num_complex::Complex64;

use crate::dsp;

pub const N_BANDS: usize = 8;

/// Nominal octave-band centre frequencies in Hz.
pub const BAND_CENTERS: [f64; N_BANDS] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0];

/// Per-band values on the octave grid.
pub type Bands = [f64; N_BANDS];

pub fn uniform(v: f64) -> Bands {
    [v; N_BANDS]
}

/// True when every band holds exactly the same value.
pub fn is_uniform(b: &Bands) -> bool {
    b.iter().all(|&v| v == b[0])
}

pub fn mean(b: &Bands) -> f64 {
    b.iter().sum::<f64>() / N_BANDS as f64
}

/// Mean of squared values (band-averaged energy of an amplitude vector).
pub fn mean_square(b: &Bands) -> f64 {
    b.iter().map(|v| v * v).sum::<f64>() / N_BANDS as f64
}

pub fn map(b: &Bands, f: impl Fn(f64) -> f64) -> Bands {
    let mut out = *b;
    out.iter_mut().for_each(|v| *v = f(*v));
    out
}

pub fn mul(a: &Bands, b: &Bands) -> Bands {
    std::array::from_fn(|i| a[i] * b[i])
}

/// Crossover width in octaves (raised-cosine transition centred on each edge).
const TRANSITION_OCT: f64 = 0.5;

/// Crossover frequencies between adjacent bands (geometric midpoints).
pub fn crossovers() -> [f64; N_BANDS - 1] {
    std::array::from_fn(|i| (BAND_CENTERS[i] * BAND_CENTERS[i + 1]).sqrt())
}

/// Smooth lowpass with unit passband below `edge`.
fn lowpass_at(edge: f64, f: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    let x = (f / edge).log2() / TRANSITION_OCT;
    if x <= -0.5 {
        1.0
    } else if x >= 0.5 {
        0.0
    } else {
        let c = (std::f64::consts::PI * (x + 0.5) / 2.0).cos();
        c * c
    }
}

/// Magnitude of band `b` at frequency `f`. The masks of all bands sum to one
/// at every frequency, so splitting and re-summing is the identity.
pub fn band_mask(b: usize, f: f64) -> f64 {
    let edges = crossovers();
    let upper = if b < N_BANDS - 1 { lowpass_at(edges[b], f) } else { 1.0 };
    let lower = if b > 0 { lowpass_at(edges[b - 1], f) } else { 0.0 };
    upper - lower
}

/// Interpolated per-band gain at frequency `f` (mask-weighted sum).
pub fn gain_at(gains: &Bands, f: f64) -> f64 {
    (0..N_BANDS).map(|b| gains[b] * band_mask(b, f)).sum()
}

/// Padding (samples) used around zero-phase band filtering.
pub const FILTER_PAD: usize = 4096;

/// Split a signal into the eight octave bands (zero-phase).
pub fn split(x: &[f64], fs: f64) -> Vec<Vec<f64>> {
    (0..N_BANDS)
        .map(|b| dsp::zero_phase_filter(x, fs, FILTER_PAD, |f| band_mask(b, f)))
        .collect()
}

/// Sum of per-band buffers, each filtered by its own band mask. One FFT per
/// non-empty band plus a single inverse transform.
pub fn combine(buffers: &[Vec<f64>], fs: f64) -> Vec<f64> {
    let len = buffers.iter().map(Vec::len).max().unwrap_or(0);
    if len == 0 {
        return Vec::new();
    }
    let n = dsp::next_pow2(len + 2 * FILTER_PAD);
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for (b, buf) in buffers.iter().enumerate().take(N_BANDS) {
        if buf.iter().all(|&v| v == 0.0) {
            continue;
        }
        let spec = dsp::rfft(buf, n);
        for (k, (a, s)) in acc.iter_mut().zip(spec).enumerate() {
            *a += s * band_mask(b, dsp::bin_freq(k, n, fs));
        }
    }
    let mut y = dsp::irfft(acc);
    y.truncate(len);
    y
}
