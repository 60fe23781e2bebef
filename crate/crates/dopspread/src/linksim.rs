//! OFDM uplink link-level simulation.
//!
//! This module closes the loop from spectral theory to a communication
//! metric: it simulates a cyclic-prefix OFDM uplink through the weighted,
//! Doppler-compensated beamformer bank and a random scattering channel, and
//! counts symbol errors.  Residual Doppler spread that the bank fails
//! to remove shows up as inter-carrier interference and, at high SNR, as an
//! error floor — which is exactly what the spread-minimising weights from
//! [`crate::weighting`] are meant to push down.
//!
//! # Signal chain
//!
//! Per frame, with `N` subcarriers, CP length `N_cp`, `N_s = N + N_cp`
//! samples per block, and `B` blocks (block 0 is the pilot):
//!
//! 1. **Modulation.** Every block carries i.i.d. constellation symbols
//!    (16-QAM by default, unit average power); a unitary IFFT and a cyclic
//!    prefix produce the serial stream.  Block `m`'s data part occupies
//!    absolute sample indices `[m·N_s, m·N_s + N)`, its prefix the `N_cp`
//!    indices before — so the pilot's data part starts at absolute time zero
//!    and Doppler phases advance continuously through block boundaries.
//! 2. **Transmit precoding.** Antenna `r` transmits
//!    `u_r Σ_q e^{-j2πδ_r c_q} e^{-jφ_q} e^{-jω_d c_q t_j} · s(j)`:
//!    every branch of the bank steers at its own direction and derotates by
//!    its own Doppler hypothesis.  The whole frame is rescaled to an exact
//!    average transmit power of one per sample (summed over antennas), so
//!    SNR comparisons between weightings are power-fair.
//! 3. **Channel.** `P` scatterers with departure angles uniform in the
//!    served region, arrival angles uniform in `(0, π)`, i.i.d. phases and
//!    amplitudes `1/√P`, Doppler `e^{+jω_d cosθ_p t}` per ray (the mobile
//!    transmits, so Doppler rides on the departure angle).  The tap profile
//!    is a single zero-delay tap by default; extra taps add sample-delayed
//!    copies of the scattered field with the power split evenly, and every
//!    delay fits inside the cyclic prefix so the per-subcarrier channel
//!    stays multiplicative.  Complex white noise of variance
//!    `σ² = 10^{-SNR/10}` is added per receive antenna.
//! 4. **Receiver.** CP removal, unitary FFT, per-subcarrier least-squares
//!    channel estimate from the pilot block, maximum-ratio combining across
//!    the receive array, and nearest-neighbour constellation decisions.
//!
//! # Pairing
//!
//! [`run_ser_sweep`] derives all frame randomness (symbols, bank phases,
//! scattering environment, noise) from per-frame seeds that depend only on
//! the master seed and the frame index.  Two sweeps with the same seed
//! therefore push the *same* payloads through the *same* channels with the
//! *same* noise, whatever the weights or SNR grid — the equal-vs-optimal
//! comparison is paired, and the unit-variance noise is merely scaled
//! across SNR points.

use crate::array::{make_bank, AodRegion, ArrayGeometry, BankLayout, BeamformerBank};
use crate::channel::{fill_phase_walk, zgemm_rowmajor, zgemm_rowmajor_timemajor};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// Floor applied to the MRC denominator so a dead subcarrier yields garbage
/// decisions (counted as errors) instead of NaNs.
const MRC_DEN_FLOOR: f64 = 1e-300;

fn cis(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

/// The unit-average-power 16-QAM alphabet, `(a + jb)/√10` with
/// `a, b ∈ {-3, -1, 1, 3}`, enumerated real-part-major.
fn qam16() -> [Complex64; 16] {
    let s = 1.0 / 10f64.sqrt();
    let levels = [-3.0, -1.0, 1.0, 3.0];
    let mut out = [Complex64::new(0.0, 0.0); 16];
    for (ia, &a) in levels.iter().enumerate() {
        for (ib, &b) in levels.iter().enumerate() {
            out[4 * ia + ib] = Complex64::new(a * s, b * s);
        }
    }
    out
}

/// Nearest 16-QAM level index per axis (decision thresholds at `±2/√10`
/// and 0).
fn slice_level(x: f64) -> usize {
    let t = 2.0 / 10f64.sqrt();
    if x < -t {
        0
    } else if x < 0.0 {
        1
    } else if x < t {
        2
    } else {
        3
    }
}

/// Nearest 16-QAM symbol index for a soft value.
fn slice_qam16(z: Complex64) -> usize {
    4 * slice_level(z.re) + slice_level(z.im)
}

/// The unit-average-power QPSK alphabet, `(a + jb)/√2` with `a, b ∈ {-1, 1}`,
/// enumerated real-part-major.
fn qpsk() -> [Complex64; 4] {
    let s = 1.0 / 2f64.sqrt();
    let levels = [-1.0, 1.0];
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (ia, &a) in levels.iter().enumerate() {
        for (ib, &b) in levels.iter().enumerate() {
            out[2 * ia + ib] = Complex64::new(a * s, b * s);
        }
    }
    out
}

/// Nearest QPSK symbol index for a soft value (decision axes at zero).
fn slice_qpsk(z: Complex64) -> usize {
    2 * usize::from(z.re >= 0.0) + usize::from(z.im >= 0.0)
}

/// Payload constellation carried by the data (and pilot) blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    /// 16-QAM with unit average symbol power.
    Qam16,
    /// QPSK with unit average symbol power.
    Qpsk,
}

impl Constellation {
    /// Number of constellation points.
    pub fn order(self) -> usize {
        match self {
            Constellation::Qam16 => 16,
            Constellation::Qpsk => 4,
        }
    }

    fn alphabet(self) -> Vec<Complex64> {
        match self {
            Constellation::Qam16 => qam16().to_vec(),
            Constellation::Qpsk => qpsk().to_vec(),
        }
    }

    fn slice(self, z: Complex64) -> usize {
        match self {
            Constellation::Qam16 => slice_qam16(z),
            Constellation::Qpsk => slice_qpsk(z),
        }
    }
}

/// Cyclic-prefix OFDM numerology.
///
/// A frame holds `blocks` blocks of `n_subcarriers + cp_len` samples each;
/// block 0 is the pilot.  `block_duration` is the duration of one full
/// block including its prefix, so the sample interval is
/// `block_duration / (n_subcarriers + cp_len)`.  The tap profile defaults
/// to a single zero-delay tap and the constellation to 16-QAM; see
/// [`OfdmConfig::with_taps`] and [`OfdmConfig::with_constellation`].
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmConfig {
    n_subcarriers: usize,
    cp_len: usize,
    blocks: usize,
    block_duration: f64,
    taps: Vec<usize>,
    constellation: Constellation,
}

impl OfdmConfig {
    /// Validates and builds a numerology.
    pub fn new(
        n_subcarriers: usize,
        cp_len: usize,
        blocks: usize,
        block_duration: f64,
    ) -> Result<Self> {
        if n_subcarriers < 2 {
            return Err(Error::Domain(format!(
                "need at least two subcarriers, got {n_subcarriers}"
            )));
        }
        if cp_len > n_subcarriers {
            return Err(Error::Domain(format!(
                "cyclic prefix of {cp_len} exceeds the symbol length {n_subcarriers}"
            )));
        }
        if blocks < 2 {
            return Err(Error::Domain(
                "frame needs a pilot block and at least one data block".into(),
            ));
        }
        if !(block_duration > 0.0) || !block_duration.is_finite() {
            return Err(Error::Domain(format!(
                "block duration must be positive and finite, got {block_duration}"
            )));
        }
        Ok(Self {
            n_subcarriers,
            cp_len,
            blocks,
            block_duration,
            taps: vec![0],
            constellation: Constellation::Qam16,
        })
    }

    /// Replaces the tap-delay profile (whole samples, one entry per path).
    ///
    /// Every delay must fit inside the cyclic prefix, which is what makes
    /// the per-subcarrier channel exactly multiplicative after CP removal.
    pub fn with_taps(mut self, taps: &[usize]) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Domain(
                "tap profile needs at least one delay".into(),
            ));
        }
        if let Some(&bad) = taps.iter().find(|&&d| d > self.cp_len) {
            return Err(Error::Domain(format!(
                "tap delay of {bad} samples exceeds the cyclic prefix length {}",
                self.cp_len
            )));
        }
        self.taps = taps.to_vec();
        Ok(self)
    }

    /// Switches the payload constellation.
    pub fn with_constellation(mut self, constellation: Constellation) -> Self {
        self.constellation = constellation;
        self
    }

    /// Subcarrier count `N`.
    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    /// Cyclic-prefix length in samples.
    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    /// Tap-delay profile in samples.
    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    /// Payload constellation.
    pub fn constellation(&self) -> Constellation {
        self.constellation
    }

    /// Blocks per frame (pilot included).
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Duration of one block including its prefix, in seconds.
    pub fn block_duration(&self) -> f64 {
        self.block_duration
    }

    /// Samples per block, `N + N_cp`.
    pub fn samples_per_block(&self) -> usize {
        self.n_subcarriers + self.cp_len
    }

    /// Sample interval in seconds.
    pub fn sample_duration(&self) -> f64 {
        self.block_duration / self.samples_per_block() as f64
    }

    /// Samples per frame.
    pub fn frame_samples(&self) -> usize {
        self.blocks * self.samples_per_block()
    }

    /// Payload symbols per frame (pilot block excluded).
    pub fn data_symbols_per_frame(&self) -> usize {
        (self.blocks - 1) * self.n_subcarriers
    }
}

/// Everything that defines the simulated link apart from the weights, the
/// SNR grid, and the frame budget.
#[derive(Debug, Clone)]
pub struct LinkScenario {
    /// Transmit (mobile-side) array.
    pub tx_geometry: ArrayGeometry,
    /// Receive (base-station-side) array.
    pub rx_geometry: ArrayGeometry,
    /// Angular region served by the bank; scatterer departure angles are
    /// drawn uniformly from it.
    pub region: AodRegion,
    /// Number of bank branches.
    pub branch_count: usize,
    /// Bank grid layout (phases are redrawn per frame, so the layout must
    /// be a grid, not [`BankLayout::Explicit`]).
    pub layout: BankLayout,
    /// Maximum Doppler frequency `f_d` in Hz.
    pub doppler_hz: f64,
    /// Scatterers per frame.
    pub scatterer_count: usize,
    /// OFDM numerology.
    pub ofdm: OfdmConfig,
}

impl LinkScenario {
    fn validate(&self, weights: Option<&[Complex64]>) -> Result<()> {
        if self.branch_count == 0 {
            return Err(Error::Domain("bank needs at least one branch".into()));
        }
        if matches!(self.layout, BankLayout::Explicit) {
            return Err(Error::Domain(
                "link simulation redraws bank phases per frame and needs a grid layout, \
                 not Explicit"
                    .into(),
            ));
        }
        if !self.doppler_hz.is_finite() || self.doppler_hz < 0.0 {
            return Err(Error::Domain(format!(
                "Doppler frequency must be finite and nonnegative, got {}",
                self.doppler_hz
            )));
        }
        if self.scatterer_count == 0 {
            return Err(Error::Domain("need at least one scatterer".into()));
        }
        if let Some(u) = weights {
            if u.len() != self.tx_geometry.element_count() {
                return Err(Error::Dimension(format!(
                    "weight vector has {} entries for {} transmit elements",
                    u.len(),
                    self.tx_geometry.element_count()
                )));
            }
            if u.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
                return Err(Error::Domain("weights must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Errors-and-trials tally at one SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerPoint {
    /// Signal-to-noise ratio in dB.
    pub snr_db: f64,
    /// Payload symbols decided incorrectly.
    pub symbol_errors: u64,
    /// Payload symbols transmitted.
    pub symbols: u64,
}

impl SerPoint {
    /// Symbol error rate.
    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols as f64
    }

    /// Half-width of the normal-approximation 95% confidence interval.
    pub fn ci95_half_width(&self) -> f64 {
        let p = self.ser();
        1.96 * (p * (1.0 - p) / self.symbols as f64).sqrt()
    }
}

/// Per-frame QAM payload: symbol indices and their complex values for all
/// blocks (block 0 is the pilot).
struct FramePayload {
    indices: Vec<u8>,
    values: Vec<Complex64>,
}

fn draw_payload(ofdm: &OfdmConfig, seed: u64) -> FramePayload {
    let alphabet = ofdm.constellation.alphabet();
    let order = ofdm.constellation.order() as u8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = ofdm.blocks * ofdm.n_subcarriers;
    let indices: Vec<u8> = (0..count).map(|_| rng.gen_range(0..order)).collect();
    let values = indices.iter().map(|&i| alphabet[i as usize]).collect();
    FramePayload { indices, values }
}

/// Unitary-IFFT modulation plus cyclic prefix: returns the serial stream of
/// `blocks·(N+N_cp)` samples laid out block after block, prefix first.
fn modulate_frame(
    payload: &FramePayload,
    ofdm: &OfdmConfig,
    ifft: &dyn Fft<f64>,
    scratch: &mut [Complex64],
) -> Vec<Complex64> {
    let n = ofdm.n_subcarriers;
    let cp = ofdm.cp_len;
    let ns = ofdm.samples_per_block();
    let unitary = 1.0 / (n as f64).sqrt();
    let mut stream = vec![Complex64::new(0.0, 0.0); ofdm.frame_samples()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..ofdm.blocks {
        buf.copy_from_slice(&payload.values[m * n..(m + 1) * n]);
        ifft.process_with_scratch(&mut buf, scratch);
        for v in &mut buf {
            *v *= unitary;
        }
        stream[m * ns..m * ns + cp].copy_from_slice(&buf[n - cp..]);
        stream[m * ns + cp..(m + 1) * ns].copy_from_slice(&buf);
    }
    stream
}

/// Builds the `M × T` transmit matrix: per-branch steering, phase, and
/// Doppler derotation applied to the serial stream, then an exact rescale
/// to unit average power per sample summed over antennas.
fn build_transmit(
    geom: &ArrayGeometry,
    bank: &BeamformerBank,
    weights: Option<&[Complex64]>,
    omega_d: f64,
    t_start: f64,
    t_step: f64,
    stream: &[Complex64],
) -> Result<Vec<Complex64>> {
    let m = geom.element_count();
    let q = bank.branch_count();
    let t_len = stream.len();
    let one = Complex64::new(1.0, 0.0);

    let mut a_b = vec![Complex64::new(0.0, 0.0); m * q];
    for (r, &d) in geom.displacements().iter().enumerate() {
        let u_r = weights.map_or(one, |u| u[r]);
        let row = &mut a_b[r * q..(r + 1) * q];
        for (qi, v) in row.iter_mut().enumerate() {
            *v = u_r * cis(-TAU * d * bank.direction_cosines()[qi] - bank.phases()[qi]);
        }
    }

    // Time-major branch walk e^{-j ω_d c_q t_j} with the stream folded in.
    let rates: Vec<f64> = bank
        .direction_cosines()
        .iter()
        .map(|&c| -omega_d * c)
        .collect();
    let mut e = vec![Complex64::new(0.0, 0.0); t_len * q];
    fill_phase_walk(&rates, t_start, t_step, t_len, &mut e);
    for (j, &s) in stream.iter().enumerate() {
        for v in &mut e[j * q..(j + 1) * q] {
            *v *= s;
        }
    }

    let mut x = vec![Complex64::new(0.0, 0.0); m * t_len];
    zgemm_rowmajor_timemajor(m, q, t_len, &a_b, &e, &mut x);

    let power: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::Numeric(format!(
            "transmit frame power is degenerate ({power}); weights may be all zero"
        )));
    }
    let rescale = (t_len as f64 / power).sqrt();
    for v in &mut x {
        *v *= rescale;
    }
    Ok(x)
}

/// A random flat-fading scattering environment for one frame.
struct Environment {
    /// Departure-angle cosines, one per scatterer.
    tx_cos: Vec<f64>,
    /// Scatterer phases.
    phases: Vec<f64>,
    /// Arrival-angle cosines, one per scatterer.
    rx_cos: Vec<f64>,
}

fn draw_environment(region: &AodRegion, count: usize, seed: u64) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tx_cos: Vec<f64> = (0..count)
        .map(|_| rng.gen_range(region.theta_l()..region.theta_r()).cos())
        .collect();
    let phases: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..TAU)).collect();
    let rx_cos: Vec<f64> = (0..count)
        .map(|_| rng.gen_range(0.0..PI).cos())
        .collect();
    Environment {
        tx_cos,
        phases,
        rx_cos,
    }
}

/// Propagates the transmit matrix through the scattering environment:
/// returns the noiseless `V_rx × T` receive matrix.
fn apply_scatter_channel(
    tx_geom: &ArrayGeometry,
    rx_geom: &ArrayGeometry,
    env: &Environment,
    omega_d: f64,
    t_start: f64,
    t_step: f64,
    x: &[Complex64],
    t_len: usize,
) -> Vec<Complex64> {
    let m = tx_geom.element_count();
    let nrx = rx_geom.element_count();
    let p = env.tx_cos.len();
    let amp = 1.0 / (p as f64).sqrt();

    // Ray pickup A[p, r] = (e^{jφ_p}/√P) e^{j2πδ_r cosθ_p}.
    let mut a_env = vec![Complex64::new(0.0, 0.0); p * m];
    for (pi, (&x_p, &ph)) in env.tx_cos.iter().zip(&env.phases).enumerate() {
        let row = &mut a_env[pi * m..(pi + 1) * m];
        for (r, v) in row.iter_mut().enumerate() {
            *v = amp * cis(ph + TAU * tx_geom.displacements()[r] * x_p);
        }
    }
    let mut c = vec![Complex64::new(0.0, 0.0); p * t_len];
    zgemm_rowmajor(p, m, t_len, &a_env, x, &mut c);

    // Per-ray Doppler walk e^{+j ω_d cosθ_p t_j}, folded into C row by row.
    for (pi, &x_p) in env.tx_cos.iter().enumerate() {
        let rate = omega_d * x_p;
        let mut z = cis(rate * t_start);
        let step = cis(rate * t_step);
        for v in &mut c[pi * t_len..(pi + 1) * t_len] {
            *v *= z;
            z *= step;
        }
    }

    // Receive steering B[v, p] = e^{j2πδ^rx_v cosξ_p}.
    let mut b_rx = vec![Complex64::new(0.0, 0.0); nrx * p];
    for (v, &d) in rx_geom.displacements().iter().enumerate() {
        let row = &mut b_rx[v * p..(v + 1) * p];
        for (pi, w) in row.iter_mut().enumerate() {
            *w = cis(TAU * d * env.rx_cos[pi]);
        }
    }
    let mut y = vec![Complex64::new(0.0, 0.0); nrx * t_len];
    zgemm_rowmajor(nrx, p, t_len, &b_rx, &c, &mut y);
    y
}

/// Sums sample-delayed copies of the noiseless receive matrix, one per tap,
/// splitting the scattered power evenly across taps.
///
/// Every rotation in the chain rides on the emission clock, so delaying the
/// assembled receive stream is the same as delaying symbols, compensation
/// and channel rotations together.  Samples that would reach before the
/// frame start fall inside the pilot's prefix, which the detector never
/// reads, and are left at zero.
fn spread_over_taps(y: Vec<Complex64>, nrx: usize, t_len: usize, taps: &[usize]) -> Vec<Complex64> {
    if taps == [0] {
        return y;
    }
    let gain = 1.0 / (taps.len() as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); nrx * t_len];
    for v in 0..nrx {
        let src = &y[v * t_len..(v + 1) * t_len];
        let dst = &mut out[v * t_len..(v + 1) * t_len];
        for &d in taps {
            for (o, &s) in dst[d..].iter_mut().zip(src[..t_len - d].iter()) {
                *o += gain * s;
            }
        }
    }
    out
}

/// CP removal, unitary FFT, LS pilot estimate, MRC, and nearest-neighbour
/// decisions: returns the number of payload symbol errors in the frame.
fn detect_frame(
    rx: &[Complex64],
    nrx: usize,
    payload: &FramePayload,
    ofdm: &OfdmConfig,
    fft: &dyn Fft<f64>,
    scratch: &mut [Complex64],
) -> u64 {
    let n = ofdm.n_subcarriers;
    let cp = ofdm.cp_len;
    let ns = ofdm.samples_per_block();
    let blocks = ofdm.blocks;
    let t_len = ofdm.frame_samples();
    let unitary = 1.0 / (n as f64).sqrt();

    let mut yf = vec![Complex64::new(0.0, 0.0); nrx * blocks * n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for v in 0..nrx {
        for m in 0..blocks {
            let start = v * t_len + m * ns + cp;
            buf.copy_from_slice(&rx[start..start + n]);
            fft.process_with_scratch(&mut buf, scratch);
            let out = &mut yf[(v * blocks + m) * n..(v * blocks + m + 1) * n];
            for (o, &b) in out.iter_mut().zip(buf.iter()) {
                *o = b * unitary;
            }
        }
    }

    // Least-squares channel estimate from the pilot block.
    let mut h = vec![Complex64::new(0.0, 0.0); nrx * n];
    let mut den = vec![0.0f64; n];
    for v in 0..nrx {
        for k in 0..n {
            let est = yf[(v * blocks) * n + k] / payload.values[k];
            h[v * n + k] = est;
            den[k] += est.norm_sqr();
        }
    }

    let mut errors = 0u64;
    for m in 1..blocks {
        for k in 0..n {
            let mut num = Complex64::new(0.0, 0.0);
            for v in 0..nrx {
                num += h[v * n + k].conj() * yf[(v * blocks + m) * n + k];
            }
            let z = num / den[k].max(MRC_DEN_FLOOR);
            if ofdm.constellation.slice(z) != payload.indices[m * n + k] as usize {
                errors += 1;
            }
        }
    }
    errors
}

/// Runs one frame end to end and returns the payload error count at each
/// SNR point.  All randomness derives from `frame_seed`; the noise is drawn
/// once at unit variance and only scaled per SNR point.
#[allow(clippy::too_many_arguments)]
fn frame_errors(
    scenario: &LinkScenario,
    weights: Option<&[Complex64]>,
    snr_db: &[f64],
    frame_seed: u64,
    ifft: &dyn Fft<f64>,
    fft: &dyn Fft<f64>,
) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
    let payload_seed: u64 = rng.gen();
    let bank_seed: u64 = rng.gen();
    let env_seed: u64 = rng.gen();
    let noise_seed: u64 = rng.gen();

    let ofdm = &scenario.ofdm;
    let t_len = ofdm.frame_samples();
    let t_step = ofdm.sample_duration();
    let t_start = -(ofdm.cp_len as f64) * t_step;
    let omega_d = TAU * scenario.doppler_hz;
    let nrx = scenario.rx_geometry.element_count();

    let mut scratch = vec![
        Complex64::new(0.0, 0.0);
        ifft.get_inplace_scratch_len().max(fft.get_inplace_scratch_len())
    ];
    let payload = draw_payload(ofdm, payload_seed);
    let stream = modulate_frame(&payload, ofdm, ifft, &mut scratch);
    let bank = make_bank(
        &scenario.region,
        scenario.branch_count,
        scenario.layout,
        bank_seed,
    )?;
    let x = build_transmit(
        &scenario.tx_geometry,
        &bank,
        weights,
        omega_d,
        t_start,
        t_step,
        &stream,
    )?;
    let env = draw_environment(&scenario.region, scenario.scatterer_count, env_seed);
    let y = apply_scatter_channel(
        &scenario.tx_geometry,
        &scenario.rx_geometry,
        &env,
        omega_d,
        t_start,
        t_step,
        &x,
        t_len,
    );
    let y = spread_over_taps(y, nrx, t_len, ofdm.taps());

    // Unit-variance complex noise, drawn once and reused at every SNR.
    let mut nrng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise: Vec<Complex64> = (0..nrx * t_len)
        .map(|_| {
            let re: f64 = nrng.sample(StandardNormal);
            let im: f64 = nrng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();

    let mut errors = Vec::with_capacity(snr_db.len());
    let mut noisy = vec![Complex64::new(0.0, 0.0); nrx * t_len];
    for &snr in snr_db {
        let sigma2 = 10f64.powf(-snr / 10.0);
        let amp = (sigma2 / 2.0).sqrt();
        for (o, (&s, &w)) in noisy.iter_mut().zip(y.iter().zip(&noise)) {
            *o = s + amp * w;
        }
        errors.push(detect_frame(
            &noisy,
            nrx,
            &payload,
            ofdm,
            fft,
            &mut scratch,
        ));
    }
    Ok(errors)
}

/// Simulates `frames` OFDM frames at every SNR point and tallies payload
/// symbol errors.
///
/// `weights` are the per-element transmit weights (`None` for uniform); the
/// transmit power is rescaled to exactly one per sample either way, so
/// different weightings compete at equal radiated power.  Results are
/// bit-reproducible for a fixed seed regardless of thread count, and
/// paired across calls that share a seed (see the module docs).
pub fn run_ser_sweep(
    scenario: &LinkScenario,
    weights: Option<&[Complex64]>,
    snr_db: &[f64],
    frames: usize,
    seed: u64,
) -> Result<Vec<SerPoint>> {
    scenario.validate(weights)?;
    if snr_db.is_empty() {
        return Err(Error::Domain("SNR grid must be nonempty".into()));
    }
    if snr_db.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("SNR grid must be finite".into()));
    }
    if frames == 0 {
        return Err(Error::Domain("need at least one frame".into()));
    }

    let n = scenario.ofdm.n_subcarriers();
    let mut planner = FftPlanner::new();
    let ifft: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(n);
    let fft: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let frame_seeds: Vec<u64> = (0..frames).map(|_| master.gen()).collect();

    let per_frame: Result<Vec<Vec<u64>>> = frame_seeds
        .par_iter()
        .map(|&fs| frame_errors(scenario, weights, snr_db, fs, ifft.as_ref(), fft.as_ref()))
        .collect();
    let per_frame = per_frame?;

    let symbols = (frames * scenario.ofdm.data_symbols_per_frame()) as u64;
    Ok(snr_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| SerPoint {
            snr_db: snr,
            symbol_errors: per_frame.iter().map(|f| f[i]).sum(),
            symbols,
        })
        .collect())
}
