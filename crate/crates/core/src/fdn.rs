//! Feedback delay network for the diffuse tail.
//!
//! Delay lines are pre-filled with noise carrying the expected diffuse
//! decay envelope, so the tail is dense from its first sample. The level
//! follows the diffuse-field power `4πc / (V·fs) · 10^(-6t/T60)` per sample
//! for a unit source, with `t` measured from emission.

use crate::bands::{self, Bands, N_BANDS};
use crate::error::{Error, Result};
use crate::geom::{fibonacci_sphere, Vec3};
use crate::ism::{gaussian, ReflectionTap, SpatialIR, Tail, TapKind};
use crate::rng;
use crate::scene::{volume, DecayTarget, RoomSpec};

pub const DEFAULT_LINES: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct FdnConfig {
    pub sample_rate: u32,
    /// Delay per line in samples; pairwise coprime.
    pub delays: Vec<usize>,
    /// Orthogonal `n × n` matrix, row-major.
    pub feedback_matrix: Vec<f64>,
    pub t60: Bands,
    /// Per-line, per-band attenuation applied at each line input.
    pub line_gains: Vec<Bands>,
    pub output_directions: Vec<Vec3>,
    /// Sample index of the first tail sample.
    pub onset: usize,
    /// Total output power per sample at the onset, per band, before `input_gain`.
    pub onset_power: Bands,
    /// Amplitude scale of the whole tail.
    pub input_gain: f64,
    pub seed: u64,
}

impl FdnConfig {
    pub fn n_lines(&self) -> usize {
        self.delays.len()
    }

    /// Move the onset to `onset` samples, keeping the analytic level.
    pub fn with_onset(mut self, onset: usize) -> Self {
        let dt = (onset as f64 - self.onset as f64) / self.sample_rate as f64;
        for b in 0..N_BANDS {
            self.onset_power[b] *= decay_factor(dt, self.t60[b]);
        }
        self.onset = onset;
        self
    }

    /// Expected output power per sample at absolute sample `n`, band `b`.
    pub fn power_at(&self, b: usize, n: usize) -> f64 {
        let dt = (n as f64 - self.onset as f64) / self.sample_rate as f64;
        self.input_gain.powi(2) * self.onset_power[b] * decay_factor(dt, self.t60[b])
    }
}

/// Energy decay factor `10^(-6t/T60)`.
pub fn decay_factor(t: f64, t60: f64) -> f64 {
    10f64.powf(-6.0 * t / t60)
}

/// Per-sample gain of a line of `delay` samples: `10^(-3d / (fs·T60))`.
pub fn line_gain(delay: usize, fs: f64, t60: f64) -> f64 {
    10f64.powf(-3.0 * delay as f64 / (fs * t60))
}

/// Diffuse power per sample for a unit source at 1 m.
pub fn diffuse_power(volume: f64, c: f64, fs: f64) -> f64 {
    4.0 * std::f64::consts::PI * c / (volume * fs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSlopeConfig {
    pub primary: FdnConfig,
    pub secondary: FdnConfig,
    pub onset_level_db: f64,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Line delays from the room's axial, face-diagonal and space-diagonal
/// lengths; lines beyond seven reuse the set at half scale, and so on.
pub fn room_delays(dims: Vec3, n_lines: usize, fs: f64, c: f64) -> Result<Vec<usize>> {
    let Vec3 { x, y, z } = dims;
    let lengths = [
        x,
        y,
        z,
        (x * x + y * y).sqrt(),
        (x * x + z * z).sqrt(),
        (y * y + z * z).sqrt(),
        (x * x + y * y + z * z).sqrt(),
    ];
    let mut delays: Vec<usize> = Vec::with_capacity(n_lines);
    for i in 0..n_lines {
        let scale = 0.5f64.powi((i / lengths.len()) as i32);
        let raw = lengths[i % lengths.len()] * scale * fs / c;
        if !(raw >= 2.0) {
            return Err(Error::Infeasible(format!(
                "room too small for {n_lines} distinct delay lines at {fs} Hz"
            )));
        }
        let mut d = raw.round() as usize;
        while delays.iter().any(|&p| gcd(p, d) != 1) {
            d += 1;
        }
        delays.push(d);
    }
    Ok(delays)
}

/// Random orthogonal matrix: Gaussian entries, modified Gram-Schmidt applied
/// twice for orthogonality to machine precision.
pub fn random_orthogonal(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::derive(seed, "fdn-matrix", n as u64);
    // columns stored contiguously
    let mut cols: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| gaussian(&mut r)).collect()).collect();
    for _ in 0..2 {
        for j in 0..n {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let p: f64 = done[k].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                for (v, q) in rest[0].iter_mut().zip(&done[k]) {
                    *v -= p * q;
                }
            }
            let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            cols[j].iter_mut().for_each(|v| *v /= norm);
        }
    }
    let mut m = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            m[i * n + j] = *v;
        }
    }
    m
}

/// `‖MᵀM − I‖∞` for a row-major square matrix.
pub fn orthogonality_error(m: &[f64], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

pub fn design_fdn(room: &RoomSpec, target: &DecayTarget, fs: u32, c: f64, seed: u64) -> Result<FdnConfig> {
    design_fdn_with(room, &target.t30_bands, fs, c, seed, DEFAULT_LINES)
}

pub fn design_fdn_with(room: &RoomSpec, t60: &Bands, fs: u32, c: f64, seed: u64, n_lines: usize) -> Result<FdnConfig> {
    if t60.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Infeasible("T60 must be positive".into()));
    }
    let f = fs as f64;
    let delays = room_delays(room.dims, n_lines, f, c)?;
    let line_gains = delays
        .iter()
        .map(|&d| bands::map(t60, |t| line_gain(d, f, t)))
        .collect();
    Ok(FdnConfig {
        sample_rate: fs,
        feedback_matrix: random_orthogonal(n_lines, seed),
        t60: *t60,
        line_gains,
        output_directions: fibonacci_sphere(n_lines),
        onset: 0,
        onset_power: bands::uniform(diffuse_power(volume(room), c, f)),
        input_gain: 1.0,
        seed,
        delays,
    })
}

/// Running network state; exposes the stored energy for conservation checks.
#[derive(Debug, Clone)]
pub struct FdnState {
    n: usize,
    matrix: Vec<f64>,
    gains: Vec<f64>,
    buffers: Vec<Vec<f64>>,
    pos: Vec<usize>,
    out: Vec<f64>,
}

impl FdnState {
    pub fn new(delays: &[usize], matrix: Vec<f64>, gains: Vec<f64>) -> Self {
        let n = delays.len();
        assert_eq!(matrix.len(), n * n);
        assert_eq!(gains.len(), n);
        FdnState {
            n,
            matrix,
            gains,
            buffers: delays.iter().map(|&d| vec![0.0; d]).collect(),
            pos: vec![0; n],
            out: vec![0.0; n],
        }
    }

    /// Overwrite the pending contents of `line`; `samples[j]` leaves the line
    /// `j` steps from now.
    pub fn fill(&mut self, line: usize, samples: &[f64]) {
        let buf = &mut self.buffers[line];
        let d = buf.len();
        for (j, v) in samples.iter().take(d).enumerate() {
            buf[(self.pos[line] + j) % d] = *v;
        }
    }

    /// Advance one sample; returns the line outputs.
    pub fn step(&mut self) -> &[f64] {
        for i in 0..self.n {
            self.out[i] = self.buffers[i][self.pos[i]];
        }
        for i in 0..self.n {
            let row = &self.matrix[i * self.n..(i + 1) * self.n];
            let v: f64 = row.iter().zip(&self.out).map(|(a, b)| a * b).sum();
            let p = self.pos[i];
            self.buffers[i][p] = self.gains[i] * v;
            self.pos[i] = (p + 1) % self.buffers[i].len();
        }
        &self.out
    }

    pub fn stored_energy(&self) -> f64 {
        self.buffers.iter().flatten().map(|v| v * v).sum()
    }
}

/// Bands sharing identical keys, in first-appearance order.
fn band_groups<K: PartialEq + Copy>(keys: [K; N_BANDS]) -> Vec<(K, Vec<usize>)> {
    let mut groups: Vec<(K, Vec<usize>)> = Vec::new();
    for (b, k) in keys.iter().enumerate() {
        match groups.iter_mut().find(|(g, _)| g == k) {
            Some((_, members)) => members.push(b),
            None => groups.push((*k, vec![b])),
        }
    }
    groups
}

fn fill_noise(seed: u64, line: usize, len: usize) -> Vec<f64> {
    let mut r = rng::derive(seed, "fdn-fill", line as u64);
    (0..len).map(|_| gaussian(&mut r)).collect()
}

/// Network of `lines` with the first `outputs` lines emitted. `power(b, n)`
/// gives the expected per-line power at absolute sample `n` in band `b`
/// and is used for the pre-fill.
struct Network<'a> {
    delays: Vec<usize>,
    matrix: Vec<f64>,
    /// Per line, per band gain.
    gains: Vec<Bands>,
    t60_key: Vec<Bands>,
    noise_seeds: Vec<(u64, usize)>,
    outputs: usize,
    onset: usize,
    fs: f64,
    power: &'a dyn Fn(usize, usize, usize) -> f64,
}

impl Network<'_> {
    fn run(&self, len: usize) -> Vec<Vec<f64>> {
        let n = self.delays.len();
        // bands whose gains coincide on every line share one run
        let keys: [u64; N_BANDS] = std::array::from_fn(|b| {
            let mut h = 0xcbf2_9ce4_8422_2325u64;
            for g in &self.t60_key {
                h = (h ^ g[b].to_bits()).wrapping_mul(0x0000_0100_0000_01B3);
            }
            h
        });
        let groups = band_groups(keys);
        let noise: Vec<Vec<f64>> = self
            .noise_seeds
            .iter()
            .zip(&self.delays)
            .map(|(&(seed, line), &d)| fill_noise(seed, line, d))
            .collect();
        let mut out = vec![vec![0.0; len]; self.outputs];
        for (_, members) in &groups {
            let b0 = members[0];
            let gains: Vec<f64> = self.gains.iter().map(|g| g[b0]).collect();
            let mut state = FdnState::new(&self.delays, self.matrix.clone(), gains);
            for line in 0..n {
                let fill: Vec<f64> = noise[line]
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * (self.power)(b0, line, self.onset + j).sqrt())
                    .collect();
                state.fill(line, &fill);
            }
            let mut streams = vec![vec![0.0; len]; self.outputs];
            for t in 0..len {
                let y = state.step();
                for (s, v) in streams.iter_mut().zip(y) {
                    s[t] = *v;
                }
            }
            if groups.len() > 1 {
                let mask = |f: f64| members.iter().map(|&b| bands::band_mask(b, f)).sum::<f64>();
                for s in &mut streams {
                    *s = crate::dsp::zero_phase_filter(s, self.fs, bands::FILTER_PAD, mask);
                }
            }
            for (o, s) in out.iter_mut().zip(streams) {
                for (a, v) in o.iter_mut().zip(s) {
                    *a += v;
                }
            }
        }
        out
    }
}

/// Run the network from its onset to sample `total_len`.
pub fn run_fdn(config: &FdnConfig, total_len: usize) -> Result<Tail> {
    if total_len <= config.onset {
        return Err(Error::InvalidInput(format!(
            "duration of {total_len} samples ends before the tail onset at {}",
            config.onset
        )));
    }
    let n = config.n_lines();
    let power = |b: usize, _line: usize, t: usize| config.power_at(b, t) / n as f64;
    let net = Network {
        delays: config.delays.clone(),
        matrix: config.feedback_matrix.clone(),
        gains: config.line_gains.clone(),
        t60_key: vec![config.t60],
        noise_seeds: (0..n).map(|i| (config.seed, i)).collect(),
        outputs: n,
        onset: config.onset,
        fs: config.sample_rate as f64,
        power: &power,
    };
    Ok(Tail {
        start: config.onset,
        streams: net.run(total_len - config.onset),
        directions: config.output_directions.clone(),
    })
}

/// Secondary network for a late, slower decay. Its gain puts the
/// intersection of the two EDC asymptotes at `onset_level_db` relative to
/// the total energy `early_energy + tail energy`.
pub fn design_dual_slope(
    room: &RoomSpec,
    target: &DecayTarget,
    fs: u32,
    c: f64,
    seed: u64,
    primary: FdnConfig,
    early_energy: f64,
) -> Result<DualSlopeConfig> {
    let slope = target
        .second_slope
        .ok_or_else(|| Error::InvalidInput("decay target has no second slope".into()))?;
    if !(slope.onset_level_db < -20.0) {
        return Err(Error::validation("second_slope.onset_level_db", "must be below -20 dB"));
    }
    if target.t30_bands.iter().any(|&t| !(slope.t30_2 > t)) {
        return Err(Error::Infeasible(format!(
            "second slope T60 {} s must exceed the primary T60 in every band",
            slope.t30_2
        )));
    }
    let secondary = design_fdn_with(
        room,
        &bands::uniform(slope.t30_2),
        fs,
        c,
        rng::derive_seed(seed, "secondary", 0),
        primary.n_lines(),
    )?
    .with_onset(primary.onset);
    let gain = secondary_gain(&primary, slope.t30_2, slope.onset_level_db, early_energy);
    Ok(DualSlopeConfig {
        secondary: FdnConfig {
            onset_power: primary.onset_power,
            input_gain: gain * primary.input_gain,
            ..secondary
        },
        primary,
        onset_level_db: slope.onset_level_db,
    })
}

/// Closed-form amplitude ratio of the secondary tail to the primary one.
fn secondary_gain(primary: &FdnConfig, t2: f64, level_db: f64, early_energy: f64) -> f64 {
    let fs = primary.sample_rate as f64;
    let lambda = 10f64.powf(level_db / 10.0);
    let ratios: Vec<f64> = (0..N_BANDS)
        .map(|b| {
            let k1 = 6.0 * 10f64.ln() / primary.t60[b];
            let k2 = 6.0 * 10f64.ln() / t2;
            let p1 = primary.power_at(b, primary.onset);
            let a = p1 * fs / k1;
            let delta = (a / (lambda * (early_energy + a))).ln() / k1;
            let bb = a * (-(k1 - k2) * delta).exp();
            let p2 = bb * k2 / fs;
            p2 / p1
        })
        .collect();
    (ratios.iter().sum::<f64>() / N_BANDS as f64).max(0.0).sqrt()
}

/// Primary plus secondary tails, summed line by line.
pub fn run_dual_slope(config: &DualSlopeConfig, total_len: usize) -> Result<Tail> {
    let mut tail = run_fdn(&config.primary, total_len)?;
    if config.secondary.input_gain == 0.0 {
        return Ok(tail);
    }
    let second = run_fdn(&config.secondary, total_len)?;
    for (a, b) in tail.streams.iter_mut().zip(&second.streams) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
    Ok(tail)
}

/// Two networks exchanging energy through a rotation by `asin(k)`: the
/// primary lines receive `k` of the secondary's outputs and vice versa.
/// Only the primary lines are emitted. `power(b, n)` is the expected total
/// primary output power at sample `n`; secondary lines get the same
/// per-line power.
pub fn run_coupled(
    primary: &FdnConfig,
    secondary: &FdnConfig,
    k: f64,
    total_len: usize,
    power: &dyn Fn(usize, usize) -> f64,
) -> Result<Tail> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::InvalidInput(format!("coupling gain {k} outside [0, 1)")));
    }
    if total_len <= primary.onset {
        return Err(Error::InvalidInput("duration ends before the tail onset".into()));
    }
    let n = primary.n_lines();
    if secondary.n_lines() != n {
        return Err(Error::InvalidInput("coupled networks need equal line counts".into()));
    }
    // [[cA, sA], [-sD, cD]] is orthogonal for orthogonal A and D
    let m = 2 * n;
    let s = k;
    let c = (1.0 - s * s).sqrt();
    let mut matrix = vec![0.0; m * m];
    let (a, d) = (&primary.feedback_matrix, &secondary.feedback_matrix);
    for i in 0..n {
        for j in 0..n {
            matrix[i * m + j] = c * a[i * n + j];
            matrix[i * m + n + j] = s * a[i * n + j];
            matrix[(n + i) * m + j] = -s * d[i * n + j];
            matrix[(n + i) * m + n + j] = c * d[i * n + j];
        }
    }
    let per_line = |b: usize, _line: usize, t: usize| power(b, t) / n as f64;
    let mut t60_key = vec![primary.t60; n];
    t60_key.extend(vec![secondary.t60; n]);
    let net = Network {
        delays: primary.delays.iter().chain(&secondary.delays).copied().collect(),
        matrix,
        gains: primary.line_gains.iter().chain(&secondary.line_gains).copied().collect(),
        t60_key,
        noise_seeds: (0..n).map(|i| (primary.seed, i)).chain((0..n).map(|i| (secondary.seed, i))).collect(),
        outputs: n,
        onset: primary.onset,
        fs: primary.sample_rate as f64,
        power: &per_line,
    };
    Ok(Tail {
        start: primary.onset,
        streams: net.run(total_len - primary.onset),
        directions: primary.output_directions.clone(),
    })
}

/// Tail onset: the earliest arrival among the highest-order image taps, or
/// `direct_delay` when there are none.
pub fn tail_onset(early: &SpatialIR, direct_delay: f64) -> f64 {
    let images = || early.taps.iter().filter(|t| t.kind == TapKind::Image);
    match images().map(|t| t.order).max() {
        None | Some(0) => images().map(|t| t.delay).fold(direct_delay, f64::min),
        Some(top) => images()
            .filter(|t| t.order == top)
            .map(|t| t.delay)
            .fold(f64::INFINITY, f64::min),
    }
}

/// Attach the tail; taps are left untouched.
pub fn splice(mut early: SpatialIR, tail: Tail) -> SpatialIR {
    early.tail = Some(tail);
    early
}

/// Broadband energy of the taps (bursts included), averaged over bands.
pub fn early_energy(taps: &[ReflectionTap]) -> f64 {
    taps.iter().map(|t| bands::mean(&t.band_energy())).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::DecayTarget;

    fn living() -> RoomSpec {
        RoomSpec::fitted(
            "l",
            Vec3::ZERO,
            Vec3::new(4.97, 3.78, 2.71),
            DecayTarget::broadband(0.54),
            0.3,
        )
        .unwrap()
    }

    #[test]
    fn gain_formula() {
        assert!((line_gain(1000, 44100.0, 1.0) - 0.855_1).abs() < 1e-4);
        assert!((line_gain(1000, 44100.0, 1e12) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn delays_are_coprime_and_physical() {
        let d = room_delays(Vec3::new(4.97, 3.78, 2.71), 12, 44100.0, 343.0).unwrap();
        assert_eq!(d.len(), 12);
        // Lx * fs / c = 639.0
        assert!((d[0] as f64 - 4.97 * 44100.0 / 343.0).abs() < 3.0, "{}", d[0]);
        for i in 0..12 {
            for j in 0..i {
                assert_eq!(gcd(d[i], d[j]), 1);
            }
        }
        assert!(room_delays(Vec3::new(0.001, 0.001, 0.001), 12, 44100.0, 343.0).is_err());
    }

    #[test]
    fn matrix_is_orthogonal() {
        for n in [4, 12, 24] {
            let m = random_orthogonal(n, 5);
            assert!(orthogonality_error(&m, n) < 1e-12);
        }
    }

    #[test]
    fn lossless_network_conserves_energy() {
        let delays = room_delays(Vec3::new(4.97, 3.78, 2.71), 12, 44100.0, 343.0).unwrap();
        let mut st = FdnState::new(&delays, random_orthogonal(12, 1), vec![1.0; 12]);
        for (i, d) in delays.iter().enumerate() {
            st.fill(i, &fill_noise(9, i, *d));
        }
        let e0 = st.stored_energy();
        for _ in 0..10_000 {
            st.step();
        }
        assert!((st.stored_energy() - e0).abs() / e0 < 1e-6);
    }

    #[test]
    fn zero_gains_fall_silent() {
        let mut cfg = design_fdn(&living(), &DecayTarget::broadband(0.54), 44100, 343.0, 1).unwrap();
        cfg.line_gains = vec![bands::uniform(0.0); 12];
        let tail = run_fdn(&cfg, 4000).unwrap();
        let longest = *cfg.delays.iter().max().unwrap();
        for s in &tail.streams {
            assert!(s[longest..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn per_band_groups_follow_targets() {
        let mut t = bands::uniform(0.54);
        t[0] = 0.8;
        let groups = band_groups(t.map(f64::to_bits));
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].1, vec![0]);
    }
}
