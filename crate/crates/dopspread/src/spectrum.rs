//! Window functions, beam functions, and the analytic channel PSD.
//!
//! After per-branch Doppler compensation, the equivalent channel's power
//! spectral density factorizes on the normalized frequency `ω̃ = ω/ω_d`:
//!
//! ```text
//! P(ω) = (1/ω_d) · |𝒢(ω̃)|² · 𝒲(ω̃),
//! ```
//!
//! with all support confined to `|ω̃| ≤ μ = cos θ_L − cos θ_R`.
//!
//! * The **beam function** `|𝒢(ω̃)|² = |(1/M) Σ_r u_r e^{-j2πδ_r ω̃}|²`
//!   depends only on the array and its weights — it is the array's power
//!   pattern read along the cosine axis.
//! * The **window function** `𝒲(ω̃)` depends only on the departure-angle
//!   region and the branch-direction layout. Every window integrates to `2π`
//!   over its support.
//!
//! Window family (all stated for the autocorrelation/spectrum convention
//! `R(τ) = E{g(t)g*(t+τ)}`, `P(ω) = ∫R e^{-jωτ}dτ`, used consistently
//! throughout this crate):
//!
//! * **Discrete bank** — a finite bank of `Q` branches at directions `ϑ_q`:
//!   `𝒲(ω̃) = (2π/(θ_R−θ_L)) Σ_{q∈S(ω̃)} p_q / √(1−(ω̃−cos ϑ_q)²)`, where
//!   `S(ω̃)` is the set of branches whose compensated image covers `ω̃` and
//!   `p_q` are branch power fractions (uniform `1/Q` by default). Its
//!   inverse-square-root spikes at `cos ϑ_q ± 1` smooth out as `Q` grows.
//! * **Equi-cosine, closed form** — the `Q → ∞` limit of a bank uniform in
//!   `cos ϑ`: an arccos ramp up to a flat top.
//! * **Equi-cosine, full half-plane** — the same limit for the isotropic
//!   region `[0, π]`: `𝒲(ω̃) = arccos(|ω̃| − 1)` on `|ω̃| ≤ 2`.
//! * **Equi-angle, integral form** — the `Q → ∞` limit of a bank uniform in
//!   `ϑ` itself, kept as a one-dimensional integral evaluated on demand.
//! * **Equi-angle, full half-plane** — that limit for `[0, π]`, reducible to
//!   a complete elliptic integral of the first kind:
//!   `𝒲(ω̃) = (2/π)·F(π/2, √(1−ω̃²/4)) = 1/agm(1, |ω̃|/2)`, finite (`= 1`)
//!   at the support edges and logarithmically divergent at `ω̃ = 0`.

use crate::array::{AodRegion, ArrayGeometry, BeamformerBank};
use crate::error::{Error, Result};
use crate::quad::{integrate_real, uniform_edges};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

/// Arithmetic–geometric mean of `a ≥ b ≥ 0`. `agm(1, 0) = 0`.
fn agm(mut a: f64, mut b: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    for _ in 0..64 {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind,
/// `F(π/2, k) = ∫₀^{π/2} dφ/√(1 − k² sin²φ)`, for modulus `k ∈ [0, 1)`.
///
/// Evaluated as `π/(2·agm(1, √(1−k²)))`; relative error is at the rounding
/// level (≤ 10⁻¹⁰ guaranteed). `k ≥ 1` or `k < 0` is a domain error.
pub fn elliptic_f_complete(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!(
            "elliptic modulus must lie in [0, 1), got {k}"
        )));
    }
    let kp = ((1.0 - k) * (1.0 + k)).sqrt();
    Ok(PI / (2.0 * agm(1.0, kp)))
}

/// Which analytic form a [`WindowFunction`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowVariant {
    DiscreteBank,
    EquiCosClosed,
    EquiCosJakes,
    EquiAngleIntegral,
    EquiAngleJakes,
}

#[derive(Debug, Clone)]
enum WindowKind {
    DiscreteBank {
        region: AodRegion,
        bank: BeamformerBank,
        /// Per-branch power fractions, summing to 1.
        branch_weights: Vec<f64>,
    },
    EquiCosClosed {
        region: AodRegion,
    },
    EquiCosJakes,
    EquiAngleIntegral {
        region: AodRegion,
    },
    EquiAngleJakes,
}

/// Doppler window `𝒲(ω̃)`: the residual-spread profile of a compensator
/// layout over a departure-angle region. Construct via the associated
/// functions; evaluate with [`WindowFunction::eval`] or [`window_eval`].
#[derive(Debug, Clone)]
pub struct WindowFunction {
    kind: WindowKind,
}

impl WindowFunction {
    /// Finite-bank window with uniform branch power.
    pub fn discrete_bank(region: &AodRegion, bank: &BeamformerBank) -> Result<Self> {
        let q = bank.branch_count();
        Ok(Self {
            kind: WindowKind::DiscreteBank {
                region: *region,
                bank: bank.clone(),
                branch_weights: vec![1.0 / q as f64; q],
            },
        })
    }

    /// Finite-bank window with branch power proportional to a power-azimuth
    /// density `ρ(ϑ)` sampled at the branch directions: `p_q ∝ ρ(ϑ_q)`,
    /// normalized to sum to 1 so total window mass stays `2π`.
    ///
    /// This generalization beyond uniform scattering is provided as a hook
    /// and has not been validated against simulation.
    pub fn discrete_bank_with_pas(
        region: &AodRegion,
        bank: &BeamformerBank,
        density: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let raw: Vec<f64> = bank.directions().iter().map(|&d| density(d)).collect();
        if raw.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::Domain(
                "power-azimuth density must be finite and nonnegative at every branch direction"
                    .into(),
            ));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain(
                "power-azimuth density vanishes at every branch direction".into(),
            ));
        }
        Ok(Self {
            kind: WindowKind::DiscreteBank {
                region: *region,
                bank: bank.clone(),
                branch_weights: raw.into_iter().map(|p| p / total).collect(),
            },
        })
    }

    /// Closed-form limit window of a dense cosine-uniform bank over `region`.
    pub fn equi_cos_closed(region: &AodRegion) -> Self {
        Self {
            kind: WindowKind::EquiCosClosed { region: *region },
        }
    }

    /// Closed-form limit window of a dense cosine-uniform bank over the full
    /// half-plane `[0, π]`.
    pub fn equi_cos_jakes() -> Self {
        Self {
            kind: WindowKind::EquiCosJakes,
        }
    }

    /// Integral-form limit window of a dense angle-uniform bank over `region`.
    pub fn equi_angle_integral(region: &AodRegion) -> Self {
        Self {
            kind: WindowKind::EquiAngleIntegral { region: *region },
        }
    }

    /// Elliptic limit window of a dense angle-uniform bank over `[0, π]`.
    pub fn equi_angle_jakes() -> Self {
        Self {
            kind: WindowKind::EquiAngleJakes,
        }
    }

    /// Which analytic form this window is.
    pub fn variant(&self) -> WindowVariant {
        match &self.kind {
            WindowKind::DiscreteBank { .. } => WindowVariant::DiscreteBank,
            WindowKind::EquiCosClosed { .. } => WindowVariant::EquiCosClosed,
            WindowKind::EquiCosJakes => WindowVariant::EquiCosJakes,
            WindowKind::EquiAngleIntegral { .. } => WindowVariant::EquiAngleIntegral,
            WindowKind::EquiAngleJakes => WindowVariant::EquiAngleJakes,
        }
    }

    /// The departure-angle region the window was built over, if it carries
    /// one (the full-half-plane variants are regionless by construction).
    pub fn region(&self) -> Option<&AodRegion> {
        match &self.kind {
            WindowKind::DiscreteBank { region, .. }
            | WindowKind::EquiCosClosed { region }
            | WindowKind::EquiAngleIntegral { region } => Some(region),
            _ => None,
        }
    }

    /// Half-width `μ` of the support `|ω̃| ≤ μ`.
    pub fn support_mu(&self) -> f64 {
        match &self.kind {
            WindowKind::DiscreteBank { region, .. }
            | WindowKind::EquiCosClosed { region }
            | WindowKind::EquiAngleIntegral { region } => region.mu(),
            WindowKind::EquiCosJakes | WindowKind::EquiAngleJakes => 2.0,
        }
    }

    /// Points strictly inside the support where the window is unbounded (the
    /// bank's `cos ϑ_q ± 1` spikes; the logarithmic point `ω̃ = 0` of the
    /// elliptic window). Quadrature over the window must use these as panel
    /// edges. Sorted, deduplicated.
    pub fn singular_points(&self) -> Vec<f64> {
        let mu = self.support_mu();
        let mut pts = match &self.kind {
            WindowKind::DiscreteBank { bank, .. } => bank
                .direction_cosines()
                .iter()
                .flat_map(|c| [c - 1.0, c + 1.0])
                .filter(|p| p.abs() < mu)
                .collect(),
            WindowKind::EquiAngleJakes => vec![0.0],
            _ => Vec::new(),
        };
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    }

    pub(crate) fn discrete_parts(&self) -> Option<(&AodRegion, &BeamformerBank, &[f64])> {
        match &self.kind {
            WindowKind::DiscreteBank {
                region,
                bank,
                branch_weights,
            } => Some((region, bank, branch_weights)),
            _ => None,
        }
    }

    /// Evaluate `𝒲(ω̃)`. Nonnegative; `+∞` exactly at unbounded points;
    /// `0` outside the support.
    pub fn eval(&self, omega_tilde: f64) -> f64 {
        let w = omega_tilde;
        match &self.kind {
            WindowKind::DiscreteBank {
                region,
                bank,
                branch_weights,
            } => {
                let mu = region.mu();
                if w.abs() > mu {
                    return 0.0;
                }
                let prefactor = TAU / (region.theta_r() - region.theta_l());
                let c_l = region.theta_l().cos();
                let c_r = region.theta_r().cos();
                let mut sum = 0.0;
                for (&c_q, p) in bank.direction_cosines().iter().zip(branch_weights) {
                    let active = if w < 0.0 {
                        c_q >= c_r && c_q <= w + c_l
                    } else {
                        c_q >= w + c_r && c_q <= c_l
                    };
                    if active {
                        let arg = 1.0 - (w - c_q) * (w - c_q);
                        if arg <= 0.0 {
                            // Active boundary coincides with the branch spike.
                            return f64::INFINITY;
                        }
                        sum += p / arg.sqrt();
                    }
                }
                prefactor * sum
            }
            WindowKind::EquiCosClosed { region } => {
                let mu = region.mu();
                if w.abs() > mu {
                    return 0.0;
                }
                let prefactor = TAU / (region.theta_r() - region.theta_l());
                if w < 0.0 {
                    let x = (region.theta_r().cos() - w).clamp(-1.0, 1.0);
                    prefactor * (x.acos() - region.theta_l()) / mu
                } else {
                    let x = (region.theta_l().cos() - w).clamp(-1.0, 1.0);
                    prefactor * (region.theta_r() - x.acos()) / mu
                }
            }
            WindowKind::EquiCosJakes => {
                if w.abs() > 2.0 {
                    0.0
                } else {
                    (w.abs() - 1.0).acos()
                }
            }
            WindowKind::EquiAngleIntegral { region } => {
                let mu = region.mu();
                if w.abs() > mu {
                    return 0.0;
                }
                let width = region.theta_r() - region.theta_l();
                let prefactor = TAU / (width * width);
                let (lo, hi) = if w < 0.0 {
                    (region.theta_r().cos(), w + region.theta_l().cos())
                } else {
                    (w + region.theta_r().cos(), region.theta_l().cos())
                };
                match eai_raw_integral(lo, hi, w) {
                    Ok(v) => prefactor * v,
                    // The transformed integrand is smooth except in corner
                    // configurations where the window itself is unbounded.
                    Err(_) => f64::INFINITY,
                }
            }
            WindowKind::EquiAngleJakes => {
                if w.abs() > 2.0 {
                    0.0
                } else if w == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / agm(1.0, 0.5 * w.abs())
                }
            }
        }
    }
}

/// `∫_{lo}^{hi} dx / (√(1−x²)·√(1−(x−w)²))` — the angle-uniform limit window
/// before its prefactor.
///
/// Both factors can vanish at an interval endpoint (regions touching the
/// endfire directions), so the interval is split at its midpoint and each
/// half is integrated under the cosine substitution that removes whichever
/// factor is singular at its outer endpoint; the substituted integrands are
/// smooth in the interior.
fn eai_raw_integral(lo: f64, hi: f64, w: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let mid = 0.5 * (lo + hi);
    let lower = eai_half(lo, mid, w, lo)?;
    let upper = eai_half(mid, hi, w, hi)?;
    Ok(lower + upper)
}

/// Integrate one half-interval `[a, b]`, choosing the substitution that
/// regularizes the factor closest to zero at the outer endpoint `x_e`.
fn eai_half(a: f64, b: f64, w: f64, x_e: f64) -> Result<f64> {
    let factor_plain = 1.0 - x_e * x_e;
    let factor_shift = 1.0 - (x_e - w) * (x_e - w);
    let tol = 1e-10;
    let budget = 4000;
    if factor_plain <= factor_shift {
        // x = cos ψ removes the 1/√(1−x²) factor.
        let lo = b.clamp(-1.0, 1.0).acos();
        let hi = a.clamp(-1.0, 1.0).acos();
        if hi <= lo {
            return Ok(0.0);
        }
        integrate_real(
            |psi| {
                let arg = 1.0 - (psi.cos() - w) * (psi.cos() - w);
                1.0 / arg.max(1e-300).sqrt()
            },
            &uniform_edges(lo, hi, 8),
            tol,
            budget,
        )
    } else {
        // x = w + cos φ removes the 1/√(1−(x−w)²) factor.
        let lo = (b - w).clamp(-1.0, 1.0).acos();
        let hi = (a - w).clamp(-1.0, 1.0).acos();
        if hi <= lo {
            return Ok(0.0);
        }
        integrate_real(
            |phi| {
                let x = w + phi.cos();
                let arg = 1.0 - x * x;
                1.0 / arg.max(1e-300).sqrt()
            },
            &uniform_edges(lo, hi, 8),
            tol,
            budget,
        )
    }
}

/// Evaluate a window at one normalized frequency. See
/// [`WindowFunction::eval`].
pub fn window_eval(win: &WindowFunction, omega_tilde: f64) -> f64 {
    win.eval(omega_tilde)
}

/// Indices of the bank branches contributing to the window at `ω̃`: branch
/// `q` contributes iff the compensated image of the region under branch `q`
/// covers `ω̃` (inclusive bounds). Empty outside the support.
pub fn contributing_set(
    region: &AodRegion,
    bank: &BeamformerBank,
    omega_tilde: f64,
) -> Vec<usize> {
    let w = omega_tilde;
    if w.abs() > region.mu() || w.is_nan() {
        return Vec::new();
    }
    let c_l = region.theta_l().cos();
    let c_r = region.theta_r().cos();
    bank.direction_cosines()
        .iter()
        .enumerate()
        .filter(|(_, &c_q)| {
            if w < 0.0 {
                c_q >= c_r && c_q <= w + c_l
            } else {
                c_q >= w + c_r && c_q <= c_l
            }
        })
        .map(|(q, _)| q)
        .collect()
}

/// Beam function `|𝒢(ω̃)|² = |(1/M) Σ_r u_r e^{-j2πδ_r ω̃}|²`, evaluated by
/// direct summation for any geometry. `weights = None` is the all-ones
/// weighting.
pub fn beam_function(
    geom: &ArrayGeometry,
    omega_tilde: f64,
    weights: Option<&[Complex64]>,
) -> Result<f64> {
    if !omega_tilde.is_finite() {
        return Err(Error::Domain(format!(
            "beam function argument must be finite, got {omega_tilde}"
        )));
    }
    let m = geom.element_count();
    if let Some(u) = weights {
        if u.len() != m {
            return Err(Error::Dimension(format!(
                "weights length {} != array size {m}",
                u.len()
            )));
        }
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (r, &d) in geom.displacements().iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -TAU * d * omega_tilde);
        sum += match weights {
            Some(u) => u[r] * phase,
            None => phase,
        };
    }
    Ok((sum / m as f64).norm_sqr())
}

/// Closed-form beam function of a uniformly weighted uniform linear array,
/// `sin²(χMω̃) / (M² sin²(χω̃))` with `χ = π d/λ` — the Fejér/Dirichlet
/// kernel profile, periodic in `ω̃` with period `λ/d`.
///
/// Near the removable singularities `χω̃ = kπ` (where `|sin χω̃| < 10⁻⁸`)
/// the quadratic expansion `1 − (M²−1)x²/3`, `x = χω̃ − kπ`, is used.
///
/// This is an independent cross-check for [`beam_function`] on uniform
/// linear arrays, not a replacement for it.
pub fn ula_beam_closed_form(m: usize, d_over_lambda: f64, omega_tilde: f64) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("array needs at least one element".into()));
    }
    if !(d_over_lambda > 0.0) || !d_over_lambda.is_finite() {
        return Err(Error::Domain(format!(
            "element spacing must be positive and finite, got {d_over_lambda}"
        )));
    }
    if !omega_tilde.is_finite() {
        return Err(Error::Domain(format!(
            "beam function argument must be finite, got {omega_tilde}"
        )));
    }
    let mf = m as f64;
    let chi = PI * d_over_lambda * omega_tilde;
    let s = chi.sin();
    if s.abs() < 1e-8 {
        let x = chi - (chi / PI).round() * PI;
        Ok((1.0 - (mf * mf - 1.0) * x * x / 3.0).max(0.0))
    } else {
        let num = (mf * chi).sin();
        Ok((num * num) / (mf * mf * s * s))
    }
}

/// A sampled power spectral density on the normalized frequency grid.
///
/// `omega_d > 0` ties the normalized grid to physical frequency via
/// `ω = ω̃·ω_d`. The degenerate static case `omega_d = 0` stores absolute
/// frequencies in the grid directly (see [`PsdCurve::omega_at`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PsdCurve {
    omega_tilde: Vec<f64>,
    values: Vec<f64>,
    omega_d: f64,
}

impl PsdCurve {
    /// Build a curve, validating that the grid is strictly increasing and
    /// finite, values are finite and nonnegative, and lengths match.
    pub fn new(omega_tilde: Vec<f64>, values: Vec<f64>, omega_d: f64) -> Result<Self> {
        if omega_tilde.len() != values.len() {
            return Err(Error::Dimension(format!(
                "grid length {} != value length {}",
                omega_tilde.len(),
                values.len()
            )));
        }
        if !omega_tilde.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain("PSD grid must be finite".into()));
        }
        if omega_tilde.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("PSD grid must be strictly increasing".into()));
        }
        if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::Domain(
                "PSD values must be finite and nonnegative".into(),
            ));
        }
        if !(omega_d >= 0.0) || !omega_d.is_finite() {
            return Err(Error::Domain(format!(
                "omega_d must be finite and nonnegative, got {omega_d}"
            )));
        }
        Ok(Self {
            omega_tilde,
            values,
            omega_d,
        })
    }

    /// Normalized frequency grid `ω̃`.
    pub fn omega_tilde(&self) -> &[f64] {
        &self.omega_tilde
    }

    /// PSD values, one per grid point.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Angular Doppler spread scale `ω_d = 2πf_d` (0 for a static channel).
    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.omega_tilde.len()
    }

    /// Whether the curve holds no points.
    pub fn is_empty(&self) -> bool {
        self.omega_tilde.is_empty()
    }

    /// Physical angular frequency of grid point `i`: `ω̃_i·ω_d`, or the grid
    /// value itself when `omega_d = 0` (static channels store absolute
    /// frequencies).
    pub fn omega_at(&self, i: usize) -> f64 {
        if self.omega_d > 0.0 {
            self.omega_tilde[i] * self.omega_d
        } else {
            self.omega_tilde[i]
        }
    }
}

/// Evaluate the analytic PSD `P(ω) = (1/ω_d)|𝒢(ω/ω_d)|²𝒲(ω/ω_d)` on a grid
/// of physical angular frequencies.
///
/// Grid points where the window is unbounded (bank spikes, the elliptic
/// window's origin) cannot carry a finite sample; they are omitted from the
/// curve and returned separately in the second element.
///
/// `region` must be the region the window was built over (support widths
/// must agree); `omega_d` must be positive; `omega_grid` strictly
/// increasing; `weights` (if present) must match the array size.
pub fn psd_analytic(
    geom: &ArrayGeometry,
    region: &AodRegion,
    win: &WindowFunction,
    omega_d: f64,
    omega_grid: &[f64],
    weights: Option<&[Complex64]>,
) -> Result<(PsdCurve, Vec<f64>)> {
    if !(omega_d > 0.0) || !omega_d.is_finite() {
        return Err(Error::Domain(format!(
            "omega_d must be positive and finite, got {omega_d}"
        )));
    }
    if (win.support_mu() - region.mu()).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "window support half-width {} does not match region cosine width {}",
            win.support_mu(),
            region.mu()
        )));
    }
    if omega_grid.is_empty() {
        return Err(Error::Domain("frequency grid must be nonempty".into()));
    }
    if !omega_grid.iter().all(|x| x.is_finite()) {
        return Err(Error::Domain("frequency grid must be finite".into()));
    }
    if omega_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "frequency grid must be strictly increasing".into(),
        ));
    }
    if let Some(u) = weights {
        if u.len() != geom.element_count() {
            return Err(Error::Dimension(format!(
                "weights length {} != array size {}",
                u.len(),
                geom.element_count()
            )));
        }
    }

    let mut grid = Vec::with_capacity(omega_grid.len());
    let mut values = Vec::with_capacity(omega_grid.len());
    let mut excluded = Vec::new();
    for &omega in omega_grid {
        let wt = omega / omega_d;
        let wval = win.eval(wt);
        if wval.is_infinite() {
            excluded.push(omega);
            continue;
        }
        let bval = beam_function(geom, wt, weights)?;
        grid.push(wt);
        values.push(bval * wval / omega_d);
    }
    let curve = PsdCurve::new(grid, values, omega_d)?;
    Ok((curve, excluded))
}
