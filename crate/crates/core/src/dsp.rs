//! FFT helpers, linear convolution and minimum-phase reconstruction.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Forward FFT of a real signal zero-padded (or truncated) to `n` points.
pub fn rfft(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().take(n).map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    plan(n, false).process(&mut buf);
    buf
}

/// Inverse FFT returning the real part, normalized by `1/n`.
pub fn irfft(mut spec: Vec<Complex64>) -> Vec<f64> {
    let n = spec.len();
    plan(n, true).process(&mut spec);
    let scale = 1.0 / n as f64;
    spec.into_iter().map(|c| c.re * scale).collect()
}

pub fn fft_in_place(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, true).process(buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
}

/// Frequency in Hz of FFT bin `k` for an `n`-point transform, folded to [0, fs/2].
pub fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    let k = if k <= n / 2 { k } else { n - k };
    k as f64 * fs / n as f64
}

/// Time-domain linear convolution, O(len(a)·len(b)).
pub fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

/// Linear convolution. Output length is `len(a) + len(b) - 1`.
///
/// Short kernels are convolved directly, otherwise FFT overlap-add is used
/// with blocks sized from the shorter operand.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.len() <= 32 {
        return convolve_direct(long, short);
    }
    let out_len = long.len() + short.len() - 1;
    let full_n = next_pow2(out_len);
    let block = next_pow2(short.len()) * 4;
    if block >= full_n {
        let sa = rfft(long, full_n);
        let sb = rfft(short, full_n);
        let prod = sa.iter().zip(&sb).map(|(x, y)| x * y).collect();
        let mut y = irfft(prod);
        y.truncate(out_len);
        return y;
    }
    overlap_add(long, short, block)
}

fn overlap_add(long: &[f64], short: &[f64], n: usize) -> Vec<f64> {
    let step = n - short.len() + 1;
    let kernel = rfft(short, n);
    let mut out = vec![0.0; long.len() + short.len() - 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for start in (0..long.len()).step_by(step) {
        let seg = &long[start..(start + step).min(long.len())];
        if seg.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (i, c) in buf.iter_mut().enumerate() {
            *c = Complex64::new(seg.get(i).copied().unwrap_or(0.0), 0.0);
        }
        fft_in_place(&mut buf);
        for (c, k) in buf.iter_mut().zip(&kernel) {
            *c *= k;
        }
        ifft_in_place(&mut buf);
        let valid = (seg.len() + short.len() - 1).min(out.len() - start);
        for (o, c) in out[start..start + valid].iter_mut().zip(&buf) {
            *o += c.re;
        }
    }
    out
}

/// Minimum-phase impulse response (length `n`) whose magnitude response on the
/// `n`-point FFT grid is `magnitude`, via the folded real cepstrum.
///
/// `magnitude` must hold `n` non-negative values laid out like an FFT of a real
/// signal (bin k and bin n-k equal). Zeros are floored at -300 dB.
pub fn minimum_phase(magnitude: &[f64]) -> Vec<f64> {
    let n = magnitude.len();
    let floor = 1e-15;
    let log_mag: Vec<Complex64> = magnitude
        .iter()
        .map(|&m| Complex64::new(m.max(floor).ln(), 0.0))
        .collect();
    let mut cep = log_mag;
    ifft_in_place(&mut cep);
    for k in 1..n {
        if k < n.div_ceil(2) {
            cep[k] *= 2.0;
        } else if !(n % 2 == 0 && k == n / 2) {
            cep[k] = Complex64::new(0.0, 0.0);
        }
    }
    // keep real part only, the cepstrum of a real log-magnitude is real
    for c in cep.iter_mut() {
        c.im = 0.0;
    }
    fft_in_place(&mut cep);
    for c in cep.iter_mut() {
        *c = c.exp();
    }
    ifft_in_place(&mut cep);
    cep.into_iter().map(|c| c.re).collect()
}

/// Real cepstrum of a signal on an `n`-point grid.
pub fn real_cepstrum(x: &[f64], n: usize) -> Vec<f64> {
    let spec = rfft(x, n);
    let logm: Vec<Complex64> = spec
        .iter()
        .map(|c| Complex64::new(c.norm().max(1e-300).ln(), 0.0))
        .collect();
    irfft(logm)
}

/// Zero-phase filtering with a real frequency mask `gain(f)`.
///
/// The signal is padded by `pad` samples on both sides before the circular
/// FFT so that the (symmetric) filter tails do not wrap.
pub fn zero_phase_filter(x: &[f64], fs: f64, pad: usize, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = next_pow2(x.len() + 2 * pad);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, &v) in x.iter().enumerate() {
        buf[i] = Complex64::new(v, 0.0);
    }
    fft_in_place(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        *c *= gain(bin_freq(k, n, fs));
    }
    ifft_in_place(&mut buf);
    // ringing before sample 0 wraps into the padded tail and is discarded
    buf[..x.len()].iter().map(|c| c.re).collect()
}

/// Energy (sum of squares).
pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn db10(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db20(x: f64) -> f64 {
    20.0 * x.log10()
}

pub fn from_db20(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn fft_convolution_matches_direct() {
        for (na, nb) in [(1000, 1000), (5000, 37), (33, 4096), (7000, 300)] {
            let a = random(na, 1);
            let b = random(nb, 2);
            let fast = convolve(&a, &b);
            let slow = convolve_direct(&a, &b);
            assert_eq!(fast.len(), na + nb - 1);
            let err = fast.iter().zip(&slow).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{na}x{nb}: {err}");
        }
    }

    #[test]
    fn minimum_phase_preserves_magnitude() {
        let n = 512;
        let mag: Vec<f64> = (0..n)
            .map(|k| {
                let f = bin_freq(k, n, 1.0);
                1.0 + 4.0 * (-((f - 0.1) / 0.03).powi(2)).exp()
            })
            .collect();
        let h = minimum_phase(&mag);
        let spec = rfft(&h, n);
        for (c, m) in spec.iter().zip(&mag) {
            assert!((c.norm() - m).abs() < 1e-9);
        }
        // minimum-phase energy is front-loaded
        let e = energy(&h);
        assert!(energy(&h[..32]) / e > 0.9);
    }

    #[test]
    fn zero_phase_identity_mask() {
        let x = random(300, 3);
        let y = zero_phase_filter(&x, 48000.0, 64, |_| 1.0);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
