//! Monte Carlo channel generation and spectral estimation.
//!
//! This module provides the empirical side of the toolkit: it draws random
//! scattering environments, synthesises the equivalent scalar channel that a
//! weighted Doppler-compensated beamformer bank produces, and estimates the
//! power spectral density of that channel from simulated time traces.  The
//! estimate can then be compared against the closed-form prediction from
//! [`crate::spectrum`].
//!
//! # Channel model
//!
//! A scattering environment is a set of `P` rays at departure angles
//! `θ_p` inside the served angular region, with amplitudes `α_p` and i.i.d.
//! phases `φ_p`.  Each branch `q` of the beamformer bank points at `ϑ_q`
//! (direction cosine `c_q = cos ϑ_q`), applies the per-element weights
//! `u_r`, and derotates its output by its own Doppler hypothesis
//! `exp(-j ω_d c_q t)`.  Summing the branches yields the equivalent scalar
//! channel
//!
//! ```text
//!             1
//! g(t) = ─────────  Σ_r u_r · F_r(t) · H_r(t),
//!          M √Q
//!
//! F_r(t) = Σ_p α_p e^{j φ_p} e^{j 2π δ_r cos θ_p} e^{j ω_d cos θ_p · t},
//! H_r(t) = Σ_q e^{-j φ_q} e^{-j 2π δ_r c_q} e^{-j ω_d c_q · t},
//! ```
//!
//! where `δ_r` are the element displacements in wavelengths and `ω_d` is the
//! maximum Doppler in rad/s.  Each ray/branch pair therefore survives with
//! the *residual* frequency `ω_d (cos θ_p − c_q)`, which is what the window
//! formalism in [`crate::spectrum`] describes in distribution.
//!
//! The factorisation above turns the naive `M·P·Q·T` evaluation into two
//! matrix products (`M×P · P×T` and `M×Q · Q×T`) followed by an elementwise
//! combine, which is what [`equivalent_channel`] implements.
//!
//! # Spectral estimation
//!
//! [`numerical_psd`] averages biased lag products over many independent
//! environment realisations and transforms them to a two-sided spectrum.
//! The correlation convention matches the analytic one used throughout the
//! crate: `R(τ) = E{g(t) g*(t+τ)}` and `P(ω) = ∫ R(τ) e^{-jωτ} dτ`, so a ray
//! ahead of its compensating branch (positive residual frequency) shows up
//! at negative `ω` exactly as the closed-form window does.

use crate::array::{make_bank, AodRegion, ArrayGeometry, BankLayout, BeamformerBank};
use crate::error::{Error, Result};
use crate::spectrum::PsdCurve;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Relative tolerance for deciding that a time grid is uniformly spaced.
const SPACING_TOL: f64 = 1e-9;

/// Number of realisations each worker accumulates before its partial sum is
/// handed back.  Partial sums are reduced in chunk order, so results are
/// bit-reproducible for a fixed seed regardless of thread count.
const REDUCE_CHUNK: usize = 32;

fn cis(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

/// A finite set of scattering rays inside an angular region.
///
/// Each ray has a departure angle (radians), a real amplitude, and a phase.
/// Sets drawn by [`draw_scatterers`] use equal amplitudes `1/√P` so that the
/// expected ray power sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererSet {
    angles: Vec<f64>,
    gains: Vec<f64>,
    phases: Vec<f64>,
}

impl ScattererSet {
    /// Builds a scatterer set from explicit rays.
    ///
    /// All angles must lie inside `region`, and all slices must have the
    /// same nonzero length with finite entries and nonnegative gains.
    pub fn explicit(
        region: &AodRegion,
        angles: Vec<f64>,
        gains: Vec<f64>,
        phases: Vec<f64>,
    ) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Domain(
                "scatterer set needs at least one ray".into(),
            ));
        }
        if gains.len() != angles.len() || phases.len() != angles.len() {
            return Err(Error::Dimension(format!(
                "scatterer set slices disagree in length: {} angles, {} gains, {} phases",
                angles.len(),
                gains.len(),
                phases.len()
            )));
        }
        for &a in &angles {
            if !a.is_finite() || !region.contains(a) {
                return Err(Error::Domain(format!(
                    "scatterer angle {a} lies outside the angular region"
                )));
            }
        }
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::Domain(
                "scatterer gains must be finite and nonnegative".into(),
            ));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("scatterer phases must be finite".into()));
        }
        Ok(Self {
            angles,
            gains,
            phases,
        })
    }

    /// Departure angles in radians.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Ray amplitudes.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Ray phases in radians.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Number of rays.
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    /// Whether the set is empty (never true for a constructed set).
    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

/// Draws `count` rays with angles uniform over the angular region, equal
/// amplitudes `1/√count`, and phases uniform over `[0, 2π)`.
///
/// The draw order is fixed (all angles first, then all phases), so a given
/// seed always produces the same set.
pub fn draw_scatterers(region: &AodRegion, count: usize, seed: u64) -> Result<ScattererSet> {
    if count == 0 {
        return Err(Error::Domain(
            "scatterer set needs at least one ray".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angles: Vec<f64> = (0..count)
        .map(|_| rng.gen_range(region.theta_l()..region.theta_r()))
        .collect();
    let phases: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..TAU)).collect();
    let gain = 1.0 / (count as f64).sqrt();
    Ok(ScattererSet {
        angles,
        gains: vec![gain; count],
        phases,
    })
}

/// A sampled equivalent-channel trace `g(t_k)` on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannelTrace {
    samples: Vec<Complex64>,
    t_start: f64,
    t_step: f64,
}

impl EquivalentChannelTrace {
    /// Channel samples, one per requested time.
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// First sample time in seconds.
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    /// Sample spacing in seconds (zero for a single-sample trace).
    pub fn t_step(&self) -> f64 {
        self.t_step
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Whether the trace is empty (never true for a constructed trace).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Validates a time grid and returns `(t_start, t_step)`.
fn uniform_grid_params(times: &[f64]) -> Result<(f64, f64)> {
    if times.is_empty() {
        return Err(Error::Domain(
            "channel trace needs at least one sample time".into(),
        ));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("sample times must be finite".into()));
    }
    if times.len() == 1 {
        return Ok((times[0], 0.0));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::Domain(
            "sample times must be strictly increasing".into(),
        ));
    }
    for k in 1..times.len() {
        if ((times[k] - times[k - 1]) - dt).abs() > SPACING_TOL * dt {
            return Err(Error::Domain(format!(
                "sample times must be uniformly spaced: step {} at index {k} differs from {dt}",
                times[k] - times[k - 1]
            )));
        }
    }
    Ok((times[0], dt))
}

/// Row-major complex matrix product `C = A · B` where `A` is `m×k` row-major
/// and `B` is `k×n` stored *time-major* (entry `(i, j)` at `j·k + i`).
pub(crate) fn zgemm_rowmajor_timemajor(
    m: usize,
    k: usize,
    n: usize,
    a: &[Complex64],
    b: &[Complex64],
    c: &mut [Complex64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    // Complex64 is repr(C) { re: f64, im: f64 }, layout-compatible with
    // [f64; 2] as cgemm expects.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// Row-major complex matrix product `C = A · B` with `A` `m×k`, `B` `k×n`,
/// and `C` `m×n`, all row-major.
pub(crate) fn zgemm_rowmajor(
    m: usize,
    k: usize,
    n: usize,
    a: &[Complex64],
    b: &[Complex64],
    c: &mut [Complex64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            k as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            n as isize,
            1,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// Fills a time-major `t_len × cols` buffer with `exp(j · rate_i · t_k)`
/// using one rotation per column and a lockstep recurrence down the rows.
///
/// `rates[i]` is the angular rate (rad/s) of column `i`.  The recurrence
/// costs one complex multiply per entry; its phase drift over `t_len` steps
/// is bounded by `t_len` ulps, far below the Monte Carlo noise floor of any
/// realistic run.
pub(crate) fn fill_phase_walk(
    rates: &[f64],
    t_start: f64,
    t_step: f64,
    t_len: usize,
    out: &mut [Complex64],
) {
    let cols = rates.len();
    assert_eq!(out.len(), t_len * cols);
    for (i, &rate) in rates.iter().enumerate() {
        out[i] = cis(rate * t_start);
    }
    if t_len == 1 {
        return;
    }
    let steps: Vec<Complex64> = rates.iter().map(|&rate| cis(rate * t_step)).collect();
    for t in 1..t_len {
        let (done, rest) = out.split_at_mut(t * cols);
        let prev = &done[(t - 1) * cols..];
        for (i, v) in rest[..cols].iter_mut().enumerate() {
            *v = prev[i] * steps[i];
        }
    }
}

/// Synthesises the equivalent scalar channel `g(t)` of a weighted,
/// Doppler-compensated beamformer bank over a uniform time grid.
///
/// * `weights` — per-element weights `u_r`; `None` means all-ones (uniform).
/// * `omega_d` — maximum Doppler `ω_d = 2π f_d` in rad/s (zero freezes the
///   channel in time).
/// * `times` — sample instants in seconds; must be uniformly spaced and
///   strictly increasing (a single instant is allowed).
///
/// The evaluation is exact up to rounding: it factorises the triple sum
/// into two matrix products as described in the module docs, so it scales
/// as `M·T·(P+Q)` rather than `M·P·Q·T`.
pub fn equivalent_channel(
    geom: &ArrayGeometry,
    bank: &BeamformerBank,
    scatterers: &ScattererSet,
    weights: Option<&[Complex64]>,
    omega_d: f64,
    times: &[f64],
) -> Result<EquivalentChannelTrace> {
    let m = geom.element_count();
    if let Some(u) = weights {
        if u.len() != m {
            return Err(Error::Dimension(format!(
                "weight vector has {} entries for {} elements",
                u.len(),
                m
            )));
        }
        if u.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::Domain("weights must be finite".into()));
        }
    }
    if !omega_d.is_finite() || omega_d < 0.0 {
        return Err(Error::Domain(format!(
            "maximum Doppler must be finite and nonnegative, got {omega_d}"
        )));
    }
    let (t_start, t_step) = uniform_grid_params(times)?;
    let t_len = times.len();
    let p_count = scatterers.len();
    let q_count = bank.branch_count();

    // Ray-side factor A_F[r, p] = α_p e^{j φ_p} e^{j 2π δ_r x_p}.
    let ray_cos: Vec<f64> = scatterers.angles().iter().map(|a| a.cos()).collect();
    let mut a_f = vec![Complex64::new(0.0, 0.0); m * p_count];
    for (r, &d) in geom.displacements().iter().enumerate() {
        let row = &mut a_f[r * p_count..(r + 1) * p_count];
        for (p, v) in row.iter_mut().enumerate() {
            *v = scatterers.gains()[p] * cis(scatterers.phases()[p] + TAU * d * ray_cos[p]);
        }
    }

    // Branch-side factor A_H[r, q] = e^{-j φ_q} e^{-j 2π δ_r c_q}.
    let branch_cos = bank.direction_cosines();
    let mut a_h = vec![Complex64::new(0.0, 0.0); m * q_count];
    for (r, &d) in geom.displacements().iter().enumerate() {
        let row = &mut a_h[r * q_count..(r + 1) * q_count];
        for (q, v) in row.iter_mut().enumerate() {
            *v = cis(-bank.phases()[q] - TAU * d * branch_cos[q]);
        }
    }

    // Doppler phase walks for both factors (time-major).
    let ray_rates: Vec<f64> = ray_cos.iter().map(|&x| omega_d * x).collect();
    let branch_rates: Vec<f64> = branch_cos.iter().map(|&c| -omega_d * c).collect();
    let mut e_p = vec![Complex64::new(0.0, 0.0); t_len * p_count];
    let mut e_q = vec![Complex64::new(0.0, 0.0); t_len * q_count];
    fill_phase_walk(&ray_rates, t_start, t_step, t_len, &mut e_p);
    fill_phase_walk(&branch_rates, t_start, t_step, t_len, &mut e_q);

    // F = A_F · E_P and H = A_H · E_Q, both M×T row-major.
    let mut f_mat = vec![Complex64::new(0.0, 0.0); m * t_len];
    let mut h_mat = vec![Complex64::new(0.0, 0.0); m * t_len];
    zgemm_rowmajor_timemajor(m, p_count, t_len, &a_f, &e_p, &mut f_mat);
    zgemm_rowmajor_timemajor(m, q_count, t_len, &a_h, &e_q, &mut h_mat);

    // g(t) = (1/(M√Q)) Σ_r u_r F_r(t) H_r(t).
    let one = Complex64::new(1.0, 0.0);
    let mut samples = vec![Complex64::new(0.0, 0.0); t_len];
    for r in 0..m {
        let u_r = weights.map_or(one, |u| u[r]);
        let f_row = &f_mat[r * t_len..(r + 1) * t_len];
        let h_row = &h_mat[r * t_len..(r + 1) * t_len];
        for (t, s) in samples.iter_mut().enumerate() {
            *s += u_r * f_row[t] * h_row[t];
        }
    }
    let scale = 1.0 / (m as f64 * (q_count as f64).sqrt());
    for s in &mut samples {
        *s *= scale;
    }
    Ok(EquivalentChannelTrace {
        samples,
        t_start,
        t_step,
    })
}

/// Overwrites `buf` with the circular lag products of `g` zero-padded to
/// `buf.len()`: afterwards `buf[k] = Σ_t g(t+k) g*(t)` exactly (no
/// wraparound) for `0 ≤ k ≤ buf.len() − g.len()`.
///
/// `fwd`/`inv` must be plans of length `buf.len()`, and `scratch` must be at
/// least as long as either plan's in-place scratch requirement.
fn circular_lag_products(
    g: &[Complex64],
    fwd: &dyn Fft<f64>,
    inv: &dyn Fft<f64>,
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    assert!(buf.len() >= 2 * g.len());
    buf[..g.len()].copy_from_slice(g);
    for v in &mut buf[g.len()..] {
        *v = Complex64::new(0.0, 0.0);
    }
    fwd.process_with_scratch(buf, scratch);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    inv.process_with_scratch(buf, scratch);
    let s = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= s;
    }
}

/// Configuration of the Monte Carlo spectrum estimator.
///
/// `n_points` is the number of retained correlation lags; the estimator
/// simulates traces of `4·n_points` samples and reports the spectrum on a
/// grid of `2·n_points` frequencies.  It must be a power of two (the
/// internal transforms have length `8·n_points`) and at least 256 so that
/// the lag truncation bias stays well below the Monte Carlo noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsdEstimatorConfig {
    n_points: usize,
    realizations: usize,
    scatterer_count: usize,
    seed: u64,
}

impl PsdEstimatorConfig {
    /// Creates a configuration with the default ray count (256).
    pub fn new(n_points: usize, realizations: usize, seed: u64) -> Result<Self> {
        if !n_points.is_power_of_two() || n_points < 256 {
            return Err(Error::Domain(format!(
                "lag count must be a power of two ≥ 256, got {n_points}"
            )));
        }
        if realizations == 0 {
            return Err(Error::Domain(
                "estimator needs at least one realization".into(),
            ));
        }
        Ok(Self {
            n_points,
            realizations,
            scatterer_count: 256,
            seed,
        })
    }

    /// Overrides the number of rays drawn per realization.
    pub fn with_scatterer_count(mut self, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Domain(
                "estimator needs at least one ray per realization".into(),
            ));
        }
        self.scatterer_count = count;
        Ok(self)
    }

    /// Retained lag count.
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Number of independent environment realizations.
    pub fn realizations(&self) -> usize {
        self.realizations
    }

    /// Rays per realization.
    pub fn scatterer_count(&self) -> usize {
        self.scatterer_count
    }

    /// Master seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Estimates the equivalent-channel power spectral density by Monte Carlo.
///
/// For each realization a fresh scatterer set and fresh bank phases are
/// drawn (the bank grid itself is fixed by `layout`/`q_count`), a trace of
/// `4·n_points` samples is synthesised, and biased lag products
/// `R̂(k) = (1/N) Σ_t g(t) g*(t+k)` are accumulated.  The averaged lags are
/// transformed with the crate-wide sign convention `P(ω) = ∫ R e^{-jωτ} dτ`
/// to a two-sided spectrum on `2·n_points` frequencies.
///
/// For `f_d > 0` the sampling interval is `1/(8 μ f_d)`, which places the
/// grid edges at four times the spectral support half-width `μ ω_d`; the
/// returned curve carries `ω_d` so its abscissa is the normalised `ω/ω_d`.
/// For `f_d = 0` the channel is static; the curve is returned on a raw
/// rad/s grid (sampling interval 1 s) with no Doppler normalisation.
///
/// The estimate is bit-reproducible for a fixed seed regardless of thread
/// count: per-realization seeds are pre-drawn from the master seed, and
/// partial sums are reduced in a fixed order.
pub fn numerical_psd(
    geom: &ArrayGeometry,
    region: &AodRegion,
    q_count: usize,
    layout: BankLayout,
    weights: Option<&[Complex64]>,
    f_d: f64,
    cfg: &PsdEstimatorConfig,
) -> Result<PsdCurve> {
    let m = geom.element_count();
    if let Some(u) = weights {
        if u.len() != m {
            return Err(Error::Dimension(format!(
                "weight vector has {} entries for {} elements",
                u.len(),
                m
            )));
        }
    }
    if matches!(layout, BankLayout::Explicit) {
        return Err(Error::Domain(
            "estimator redraws bank phases per realization and needs a grid layout, not Explicit"
                .into(),
        ));
    }
    if !f_d.is_finite() || f_d < 0.0 {
        return Err(Error::Domain(format!(
            "Doppler frequency must be finite and nonnegative, got {f_d}"
        )));
    }
    let n = cfg.n_points;
    let trace_len = 4 * n;
    let fft_len = 2 * trace_len;
    let mu = region.mu();
    let omega_d = TAU * f_d;
    let t_samp = if f_d > 0.0 { 1.0 / (8.0 * mu * f_d) } else { 1.0 };
    let times: Vec<f64> = (0..trace_len).map(|k| k as f64 * t_samp).collect();

    let mut planner = FftPlanner::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(fft_len);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(fft_len);
    let fwd_half: Arc<dyn Fft<f64>> = planner.plan_fft_forward(2 * n);

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.realizations).map(|_| master.gen()).collect();

    let scratch_len = fwd
        .get_inplace_scratch_len()
        .max(inv.get_inplace_scratch_len());
    let partials: Result<Vec<Vec<Complex64>>> = seeds
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            let mut buf = vec![Complex64::new(0.0, 0.0); fft_len];
            let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
            for &s in chunk {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let scat_seed: u64 = rng.gen();
                let bank_seed: u64 = rng.gen();
                let scatterers = draw_scatterers(region, cfg.scatterer_count, scat_seed)?;
                let bank = make_bank(region, q_count, layout, bank_seed)?;
                let trace =
                    equivalent_channel(geom, &bank, &scatterers, weights, omega_d, &times)?;
                circular_lag_products(trace.samples(), fwd.as_ref(), inv.as_ref(), &mut buf, &mut scratch);
                for (a, v) in acc.iter_mut().zip(&buf[..n]) {
                    *a += v;
                }
            }
            Ok(acc)
        })
        .collect();
    let partials = partials?;
    let mut lag_sum = vec![Complex64::new(0.0, 0.0); n];
    for part in &partials {
        for (a, v) in lag_sum.iter_mut().zip(part) {
            *a += v;
        }
    }

    // Biased, realization-averaged lags in the R(τ) = E{g(t) g*(t+τ)}
    // convention (the FFT pipeline produces Σ g(t+k) g*(t), hence the
    // conjugate).
    let norm = 1.0 / (trace_len as f64 * cfg.realizations as f64);
    let rhat: Vec<Complex64> = lag_sum.iter().map(|c| c.conj() * norm).collect();

    // Two-sided spectrum from one-sided lags: P(ω_i) = T·(2 Re Σ_{k≥0} R̂(k)
    // e^{-j ω_i k T} − R̂(0)), evaluated by a length-2n forward FFT.
    let two_n = 2 * n;
    let mut sbuf = vec![Complex64::new(0.0, 0.0); two_n];
    sbuf[..n].copy_from_slice(&rhat);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd_half.get_inplace_scratch_len()];
    fwd_half.process_with_scratch(&mut sbuf, &mut scratch);
    let r0 = rhat[0].re;
    let mut grid = Vec::with_capacity(two_n);
    let mut values = Vec::with_capacity(two_n);
    for i in 0..two_n {
        let bin = (i + n) % two_n; // fftshift: put ω = 0 at index n
        let omega = TAU * (i as f64 - n as f64) / (two_n as f64 * t_samp);
        grid.push(if f_d > 0.0 { omega / omega_d } else { omega });
        values.push((t_samp * (2.0 * sbuf[bin].re - r0)).max(0.0));
    }
    PsdCurve::new(grid, values, if f_d > 0.0 { omega_d } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_geom(m: usize) -> ArrayGeometry {
        ArrayGeometry::ula(m, 0.45).unwrap()
    }

    #[test]
    fn scatterer_draw_is_deterministic_and_in_region() {
        let region = AodRegion::new(0.4, 2.0).unwrap();
        let a = draw_scatterers(&region, 64, 7).unwrap();
        let b = draw_scatterers(&region, 64, 7).unwrap();
        assert_eq!(a, b);
        let c = draw_scatterers(&region, 64, 8).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
        for &ang in a.angles() {
            assert!(region.contains(ang));
        }
        let expected_gain = 1.0 / 8.0;
        for &g in a.gains() {
            assert_eq!(g, expected_gain);
        }
        for &p in a.phases() {
            assert!((0.0..TAU).contains(&p));
        }
        assert!(draw_scatterers(&region, 0, 1).is_err());
    }

    #[test]
    fn explicit_scatterers_are_validated() {
        let region = AodRegion::new(0.5, 2.5).unwrap();
        assert!(ScattererSet::explicit(&region, vec![1.0], vec![1.0], vec![0.0]).is_ok());
        // Angle outside the region.
        assert!(ScattererSet::explicit(&region, vec![0.1], vec![1.0], vec![0.0]).is_err());
        // Length mismatch.
        assert!(matches!(
            ScattererSet::explicit(&region, vec![1.0, 1.1], vec![1.0], vec![0.0, 0.0]),
            Err(Error::Dimension(_))
        ));
        // Empty.
        assert!(ScattererSet::explicit(&region, vec![], vec![], vec![]).is_err());
        // Negative gain.
        assert!(ScattererSet::explicit(&region, vec![1.0], vec![-1.0], vec![0.0]).is_err());
        // Non-finite phase.
        assert!(ScattererSet::explicit(&region, vec![1.0], vec![1.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn single_pair_channel_has_constant_modulus() {
        // One ray and one branch leave a single residual tone, whose
        // modulus |Σ_r u_r e^{j 2π δ_r (x − c)}| / M must not move in time.
        let geom = test_geom(6);
        let region = AodRegion::new(0.3, 2.8).unwrap();
        let theta_p = 1.1;
        let theta_q = 1.9;
        let scat = ScattererSet::explicit(&region, vec![theta_p], vec![1.0], vec![0.7]).unwrap();
        let bank = BeamformerBank::explicit(&region, vec![theta_q], vec![1.3]).unwrap();
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 1e-4).collect();
        let trace =
            equivalent_channel(&geom, &bank, &scat, None, TAU * 500.0, &times).unwrap();

        let residual = theta_p.cos() - theta_q.cos();
        let expected: f64 = geom
            .displacements()
            .iter()
            .map(|&d| cis(TAU * d * residual))
            .sum::<Complex64>()
            .norm()
            / geom.element_count() as f64;
        for s in trace.samples() {
            assert!(
                (s.norm() - expected).abs() < 1e-12,
                "modulus {} drifted from {expected}",
                s.norm()
            );
        }
    }

    #[test]
    fn zero_doppler_trace_is_constant() {
        let geom = test_geom(4);
        let region = AodRegion::jakes();
        let scat = draw_scatterers(&region, 32, 5).unwrap();
        let bank = make_bank(&region, 8, BankLayout::EquiCos, 9).unwrap();
        let times: Vec<f64> = (0..64).map(|k| k as f64 * 0.01).collect();
        let trace = equivalent_channel(&geom, &bank, &scat, None, 0.0, &times).unwrap();
        let first = trace.samples()[0];
        for &s in trace.samples() {
            assert_eq!(s, first, "static channel must not move between samples");
        }
    }

    #[test]
    fn factorized_channel_matches_direct_triple_sum() {
        let geom = ArrayGeometry::new(vec![0.0, 0.43, 1.12]).unwrap();
        let region = AodRegion::new(0.4, 2.6).unwrap();
        let scat = ScattererSet::explicit(
            &region,
            vec![0.5, 1.2, 1.9, 2.5],
            vec![0.5, 1.0, 0.25, 0.8],
            vec![0.1, 2.2, 4.4, 5.5],
        )
        .unwrap();
        let bank = BeamformerBank::explicit(&region, vec![0.9, 2.1], vec![0.3, 1.7]).unwrap();
        let weights = [
            Complex64::new(0.8, -0.1),
            Complex64::new(1.0, 0.4),
            Complex64::new(-0.2, 0.9),
        ];
        let omega_d = TAU * 750.0;
        let times: Vec<f64> = (0..6).map(|k| 2e-4 + k as f64 * 1.25e-4).collect();
        let trace =
            equivalent_channel(&geom, &bank, &scat, Some(&weights), omega_d, &times).unwrap();

        let m = geom.element_count() as f64;
        let q_count = bank.branch_count() as f64;
        for (ti, &t) in times.iter().enumerate() {
            let mut direct = Complex64::new(0.0, 0.0);
            for (r, &d) in geom.displacements().iter().enumerate() {
                for p in 0..scat.len() {
                    let x = scat.angles()[p].cos();
                    for q in 0..bank.branch_count() {
                        let c = bank.direction_cosines()[q];
                        direct += weights[r]
                            * scat.gains()[p]
                            * cis(
                                scat.phases()[p] - bank.phases()[q]
                                    + TAU * d * (x - c)
                                    + omega_d * (x - c) * t,
                            );
                    }
                }
            }
            direct /= m * q_count.sqrt();
            let got = trace.samples()[ti];
            assert!(
                (got - direct).norm() < 1e-12 * direct.norm().max(1.0),
                "sample {ti}: factorized {got} vs direct {direct}"
            );
        }
    }

    #[test]
    fn uniform_weights_match_default_path_bitwise() {
        let geom = test_geom(5);
        let region = AodRegion::jakes();
        let scat = draw_scatterers(&region, 24, 11).unwrap();
        let bank = make_bank(&region, 6, BankLayout::EquiCos, 13).unwrap();
        let times: Vec<f64> = (0..128).map(|k| k as f64 * 5e-5).collect();
        let ones = vec![Complex64::new(1.0, 0.0); 5];
        let a = equivalent_channel(&geom, &bank, &scat, None, TAU * 900.0, &times).unwrap();
        let b =
            equivalent_channel(&geom, &bank, &scat, Some(&ones), TAU * 900.0, &times).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn channel_rejects_bad_inputs() {
        let geom = test_geom(3);
        let region = AodRegion::jakes();
        let scat = draw_scatterers(&region, 4, 1).unwrap();
        let bank = make_bank(&region, 4, BankLayout::EquiCos, 2).unwrap();
        let good_times: Vec<f64> = (0..4).map(|k| k as f64 * 0.1).collect();
        // Wrong weight length.
        let short = vec![Complex64::new(1.0, 0.0); 2];
        assert!(matches!(
            equivalent_channel(&geom, &bank, &scat, Some(&short), 1.0, &good_times),
            Err(Error::Dimension(_))
        ));
        // Non-finite weight.
        let nan = vec![Complex64::new(f64::NAN, 0.0); 3];
        assert!(
            equivalent_channel(&geom, &bank, &scat, Some(&nan), 1.0, &good_times).is_err()
        );
        // Negative or non-finite Doppler.
        assert!(equivalent_channel(&geom, &bank, &scat, None, -1.0, &good_times).is_err());
        assert!(
            equivalent_channel(&geom, &bank, &scat, None, f64::INFINITY, &good_times).is_err()
        );
        // Empty, non-increasing, non-uniform, and non-finite time grids.
        assert!(equivalent_channel(&geom, &bank, &scat, None, 1.0, &[]).is_err());
        assert!(equivalent_channel(&geom, &bank, &scat, None, 1.0, &[0.0, 0.0]).is_err());
        assert!(
            equivalent_channel(&geom, &bank, &scat, None, 1.0, &[0.0, 0.1, 0.3]).is_err()
        );
        assert!(
            equivalent_channel(&geom, &bank, &scat, None, 1.0, &[0.0, f64::NAN]).is_err()
        );
        // A single sample time is fine.
        let single = equivalent_channel(&geom, &bank, &scat, None, 1.0, &[0.5]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.t_step(), 0.0);
    }

    #[test]
    fn gemm_helpers_match_direct_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut draw = |len: usize| -> Vec<Complex64> {
            (0..len)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        };
        let (m, k, n) = (3, 4, 5);
        let a = draw(m * k);
        let b_row = draw(k * n);
        // Same matrix in time-major storage: entry (i, j) at j·k + i.
        let mut b_tm = vec![Complex64::new(0.0, 0.0); k * n];
        for i in 0..k {
            for j in 0..n {
                b_tm[j * k + i] = b_row[i * n + j];
            }
        }
        let mut c_row = vec![Complex64::new(0.0, 0.0); m * n];
        let mut c_tm = vec![Complex64::new(0.0, 0.0); m * n];
        zgemm_rowmajor(m, k, n, &a, &b_row, &mut c_row);
        zgemm_rowmajor_timemajor(m, k, n, &a, &b_tm, &mut c_tm);
        for i in 0..m {
            for j in 0..n {
                let direct: Complex64 = (0..k).map(|l| a[i * k + l] * b_row[l * n + j]).sum();
                assert!((c_row[i * n + j] - direct).norm() < 1e-13);
                assert!((c_tm[i * n + j] - direct).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn phase_walk_matches_direct_evaluation() {
        let rates = [3.0, -7.5, 0.0, 11.25];
        let t_start = 0.3;
        let t_step = 0.07;
        let t_len = 300;
        let mut walk = vec![Complex64::new(0.0, 0.0); t_len * rates.len()];
        fill_phase_walk(&rates, t_start, t_step, t_len, &mut walk);
        for t in 0..t_len {
            for (i, &rate) in rates.iter().enumerate() {
                let direct = cis(rate * (t_start + t as f64 * t_step));
                let got = walk[t * rates.len() + i];
                assert!(
                    (got - direct).norm() < 1e-11,
                    "walk drifted at t={t}, col={i}: {got} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn lag_products_match_direct_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g: Vec<Complex64> = (0..16)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(32);
        let inv = planner.plan_fft_inverse(32);
        let mut buf = vec![Complex64::new(0.0, 0.0); 32];
        let mut scratch = vec![
            Complex64::new(0.0, 0.0);
            fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())
        ];
        circular_lag_products(&g, fwd.as_ref(), inv.as_ref(), &mut buf, &mut scratch);
        for k in 0..16 {
            let mut direct = Complex64::new(0.0, 0.0);
            for t in 0..16 - k {
                direct += g[t + k] * g[t].conj();
            }
            assert!(
                (buf[k] - direct).norm() < 1e-12 * direct.norm().max(1.0),
                "lag {k}: fft {} vs direct {direct}",
                buf[k]
            );
        }
    }

    #[test]
    fn estimator_config_is_validated() {
        assert!(PsdEstimatorConfig::new(256, 1, 0).is_ok());
        // Not a power of two.
        assert!(PsdEstimatorConfig::new(300, 1, 0).is_err());
        // Below the minimum lag count.
        assert!(PsdEstimatorConfig::new(128, 1, 0).is_err());
        // No realizations.
        assert!(PsdEstimatorConfig::new(256, 0, 0).is_err());
        // Ray-count override.
        let cfg = PsdEstimatorConfig::new(256, 2, 3)
            .unwrap()
            .with_scatterer_count(32)
            .unwrap();
        assert_eq!(cfg.scatterer_count(), 32);
        assert!(cfg.with_scatterer_count(0).is_err());
    }

    #[test]
    fn estimator_rejects_bad_inputs() {
        let geom = test_geom(2);
        let region = AodRegion::jakes();
        let cfg = PsdEstimatorConfig::new(256, 1, 0).unwrap();
        // Explicit layout has no grid to redraw phases on.
        assert!(numerical_psd(
            &geom,
            &region,
            4,
            BankLayout::Explicit,
            None,
            100.0,
            &cfg
        )
        .is_err());
        // Weight-length mismatch.
        let w = vec![Complex64::new(1.0, 0.0); 3];
        assert!(matches!(
            numerical_psd(&geom, &region, 4, BankLayout::EquiCos, Some(&w), 100.0, &cfg),
            Err(Error::Dimension(_))
        ));
        // Negative Doppler.
        assert!(
            numerical_psd(&geom, &region, 4, BankLayout::EquiCos, None, -5.0, &cfg).is_err()
        );
    }

    #[test]
    fn estimator_is_seed_deterministic() {
        let geom = test_geom(2);
        let region = AodRegion::jakes();
        let cfg = PsdEstimatorConfig::new(256, 4, 77)
            .unwrap()
            .with_scatterer_count(16)
            .unwrap();
        let a = numerical_psd(&geom, &region, 4, BankLayout::EquiCos, None, 200.0, &cfg)
            .unwrap();
        let b = numerical_psd(&geom, &region, 4, BankLayout::EquiCos, None, 200.0, &cfg)
            .unwrap();
        assert_eq!(a, b);
        let cfg2 = PsdEstimatorConfig::new(256, 4, 78)
            .unwrap()
            .with_scatterer_count(16)
            .unwrap();
        let c = numerical_psd(&geom, &region, 4, BankLayout::EquiCos, None, 200.0, &cfg2)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn estimator_grid_spans_four_support_widths() {
        let geom = test_geom(2);
        let region = AodRegion::new(0.4, 2.1).unwrap();
        let mu = region.mu();
        let cfg = PsdEstimatorConfig::new(256, 1, 5)
            .unwrap()
            .with_scatterer_count(8)
            .unwrap();
        let curve = numerical_psd(&geom, &region, 4, BankLayout::EquiCos, None, 350.0, &cfg)
            .unwrap();
        let n = 256;
        let grid = curve.omega_tilde();
        assert_eq!(grid.len(), 2 * n);
        assert!((grid[0] + 4.0 * mu).abs() < 1e-12);
        assert!((grid[n] - 0.0).abs() < 1e-12);
        let last_expected = 4.0 * mu * (n as f64 - 1.0) / n as f64;
        assert!((grid[2 * n - 1] - last_expected).abs() < 1e-12);
        assert!((curve.omega_d() - TAU * 350.0).abs() < 1e-12);
    }

    #[test]
    fn static_channel_spectrum_concentrates_at_zero() {
        // With f_d = 0 the trace is constant, the biased lags decay
        // linearly, and the spectrum is a Fejér-like kernel peaked at ω = 0.
        let geom = test_geom(3);
        let region = AodRegion::jakes();
        let cfg = PsdEstimatorConfig::new(256, 2, 21)
            .unwrap()
            .with_scatterer_count(16)
            .unwrap();
        let curve = numerical_psd(&geom, &region, 4, BankLayout::EquiCos, None, 0.0, &cfg)
            .unwrap();
        assert_eq!(curve.omega_d(), 0.0);
        let values = curve.values();
        let peak = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 256, "static spectrum must peak at ω = 0");
        let total: f64 = values.iter().sum();
        assert!(
            values[256] > 0.5 * total,
            "zero bin holds {} of {total}",
            values[256]
        );
    }

    #[test]
    fn estimated_mass_sits_inside_the_support() {
        // Loose smoke check that most estimated power lands on |ω̃| ≤ μ;
        // the tight statistical comparison against the closed form lives in
        // the integration suite.
        let geom = test_geom(4);
        let region = AodRegion::jakes();
        let cfg = PsdEstimatorConfig::new(256, 48, 3)
            .unwrap()
            .with_scatterer_count(64)
            .unwrap();
        let curve = numerical_psd(&geom, &region, 16, BankLayout::EquiCos, None, 120.0, &cfg)
            .unwrap();
        let grid = curve.omega_tilde();
        let values = curve.values();
        let total: f64 = values.iter().sum();
        let inside: f64 = grid
            .iter()
            .zip(values)
            .filter(|(w, _)| w.abs() <= 1.25 * region.mu())
            .map(|(_, v)| v)
            .sum();
        assert!(total > 0.0);
        assert!(
            inside > 0.85 * total,
            "only {inside} of {total} inside the support band"
        );
    }

    #[test]
    fn ensemble_power_is_flat_across_time() {
        // The random phases make the equivalent channel wide-sense
        // stationary, so E|g(t)|² cannot depend on t: the empirical
        // variance of the per-time ensemble power stays below 2% of its
        // mean, which is pure Monte Carlo jitter.
        let geom = test_geom(4);
        let region = AodRegion::jakes();
        let f_d = 200.0;
        let omega_d = TAU * f_d;
        let t_step = 1.0 / (8.0 * region.mu() * f_d);
        let times: Vec<f64> = (0..64).map(|k| k as f64 * t_step).collect();
        let realizations = 400usize;
        let mut master = ChaCha8Rng::seed_from_u64(88);
        let mut power = vec![0.0f64; times.len()];
        for _ in 0..realizations {
            let scat_seed: u64 = master.gen();
            let bank_seed: u64 = master.gen();
            let scatterers = draw_scatterers(&region, 64, scat_seed).unwrap();
            let bank = make_bank(&region, 4, BankLayout::EquiCos, bank_seed).unwrap();
            let trace =
                equivalent_channel(&geom, &bank, &scatterers, None, omega_d, &times).unwrap();
            for (p, s) in power.iter_mut().zip(trace.samples()) {
                *p += s.norm_sqr();
            }
        }
        for p in &mut power {
            *p /= realizations as f64;
        }
        let mean = power.iter().sum::<f64>() / power.len() as f64;
        let var =
            power.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / power.len() as f64;
        assert!(mean > 0.0, "degenerate ensemble power {mean}");
        assert!(
            var < 0.02 * mean,
            "per-time power variance {var} exceeds 2% of the mean {mean}"
        );
    }

    #[test]
    fn estimator_l2_error_shrinks_as_realizations_double() {
        use crate::spectrum::{psd_analytic, WindowFunction};
        // Doubling the ensemble size tightens the match to the exact
        // curve.  The improvement is monotone in expectation only, so one
        // non-monotone step is tolerated across five doublings.  The bank
        // is kept dense enough (64 branches) that the closed-form window
        // sits well below the Monte Carlo error at every ensemble size.
        let geom = test_geom(4);
        let region = AodRegion::jakes();
        let win = WindowFunction::equi_cos_jakes();
        let f_d = 300.0;
        let omega_d = TAU * f_d;
        let mu = region.mu();
        let mut dist = Vec::new();
        for k in 0..6 {
            let realizations = 8usize << k;
            let cfg = PsdEstimatorConfig::new(512, realizations, 424_242)
                .unwrap()
                .with_scatterer_count(64)
                .unwrap();
            let est =
                numerical_psd(&geom, &region, 64, BankLayout::EquiCos, None, f_d, &cfg).unwrap();
            let omegas: Vec<f64> = (0..est.len()).map(|i| est.omega_at(i)).collect();
            let (analytic, excluded) =
                psd_analytic(&geom, &region, &win, omega_d, &omegas, None).unwrap();
            assert!(excluded.is_empty());
            let (mut num, mut den) = (0.0f64, 0.0f64);
            for i in 0..omegas.len() {
                if est.omega_tilde()[i].abs() > mu * (1.0 + 1e-12) {
                    continue;
                }
                let d = est.values()[i] - analytic.values()[i];
                num += d * d;
                den += analytic.values()[i] * analytic.values()[i];
            }
            dist.push((num / den).sqrt());
        }
        let non_monotone = dist.windows(2).filter(|w| w[1] >= w[0]).count();
        assert!(
            non_monotone <= 1,
            "more than one non-monotone step in the L2 distances {dist:?}"
        );
        assert!(
            dist.last().unwrap() < dist.first().unwrap(),
            "no overall improvement: {dist:?}"
        );
    }
}
