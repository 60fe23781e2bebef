//! Array geometry, departure-angle regions, steering vectors, and
//! beamformer direction banks.
//!
//! The transmit array is a collinear set of elements aligned with the
//! velocity vector, described by displacements `δ_r` in carrier wavelengths
//! with `δ_0 = 0`. A plane wave departing at angle `θ` (measured against the
//! velocity vector, `θ ∈ [0, π]`) accumulates the phase `2π δ_r cos θ` at
//! element `r`, so the steering vector is `a_r(θ) = e^{j2πδ_r cos θ}`.
//!
//! Scatterers are confined to an angular region `[θ_L, θ_R]`. Its image
//! under the cosine map has width `μ = cos θ_L − cos θ_R`, which is exactly
//! the width of the residual Doppler support after per-branch compensation —
//! every spectral quantity downstream is parameterized by `μ`.
//!
//! A [`BeamformerBank`] is the set of branch directions `ϑ_q` the
//! compensator steers at, together with i.i.d. uniform branch phases `φ_q`
//! that decorrelate the branches. Generated banks place `Q` directions at
//! the interior nodes of a `Q + 2`-point uniform grid over the region —
//! either in the angle domain or in the cosine domain — so the directions
//! straddle the region center symmetrically and never sit on the region
//! boundary.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

/// Collinear array described by element displacements in carrier wavelengths.
///
/// Invariants: at least one element, `δ_0 = 0`, strictly increasing, finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    displacements: Vec<f64>,
}

impl ArrayGeometry {
    /// Build from explicit displacements.
    pub fn new(displacements: Vec<f64>) -> Result<Self> {
        if displacements.is_empty() {
            return Err(Error::Domain("array needs at least one element".into()));
        }
        if !displacements.iter().all(|d| d.is_finite()) {
            return Err(Error::Domain("array displacements must be finite".into()));
        }
        if displacements[0] != 0.0 {
            return Err(Error::Domain(format!(
                "first array displacement must be 0, got {}",
                displacements[0]
            )));
        }
        if displacements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "array displacements must be strictly increasing".into(),
            ));
        }
        Ok(Self { displacements })
    }

    /// Uniform linear array: `m` elements spaced `d_over_lambda` wavelengths.
    pub fn ula(m: usize, d_over_lambda: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::Domain("array needs at least one element".into()));
        }
        if !(d_over_lambda > 0.0) || !d_over_lambda.is_finite() {
            return Err(Error::Domain(format!(
                "element spacing must be positive and finite, got {d_over_lambda}"
            )));
        }
        Ok(Self {
            displacements: (0..m).map(|r| r as f64 * d_over_lambda).collect(),
        })
    }

    /// Element displacements in wavelengths.
    pub fn displacements(&self) -> &[f64] {
        &self.displacements
    }

    /// Number of elements `M`.
    pub fn element_count(&self) -> usize {
        self.displacements.len()
    }
}

/// Angular region `[θ_L, θ_R]` containing all departure angles.
///
/// Invariant: `0 ≤ θ_L < θ_R ≤ π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AodRegion {
    theta_l: f64,
    theta_r: f64,
}

impl AodRegion {
    /// Build a region from its angular bounds (radians).
    pub fn new(theta_l: f64, theta_r: f64) -> Result<Self> {
        if !theta_l.is_finite() || !theta_r.is_finite() {
            return Err(Error::Domain("region bounds must be finite".into()));
        }
        if !(0.0..=PI).contains(&theta_l) || !(0.0..=PI).contains(&theta_r) {
            return Err(Error::Domain(format!(
                "region bounds must lie in [0, pi], got [{theta_l}, {theta_r}]"
            )));
        }
        if theta_l >= theta_r {
            return Err(Error::Domain(format!(
                "region must have theta_l < theta_r, got [{theta_l}, {theta_r}]"
            )));
        }
        Ok(Self { theta_l, theta_r })
    }

    /// The full half-plane `[0, π]`: isotropic scattering.
    pub fn jakes() -> Self {
        Self {
            theta_l: 0.0,
            theta_r: PI,
        }
    }

    /// Lower angular bound (radians).
    pub fn theta_l(&self) -> f64 {
        self.theta_l
    }

    /// Upper angular bound (radians).
    pub fn theta_r(&self) -> f64 {
        self.theta_r
    }

    /// Width of the region's image under the cosine map:
    /// `μ = cos θ_L − cos θ_R`. The residual Doppler support is `|ω̃| ≤ μ`.
    pub fn mu(&self) -> f64 {
        self.theta_l.cos() - self.theta_r.cos()
    }

    /// Whether `theta` lies inside the closed region.
    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_l && theta <= self.theta_r
    }
}

/// How the branch directions of a bank are laid out over the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankLayout {
    /// Directions uniform in `cos ϑ` over the region's cosine image.
    EquiCos,
    /// Directions uniform in `ϑ` over the angular region.
    EquiAngle,
    /// Directions supplied verbatim by the caller.
    Explicit,
}

/// A set of compensator branch directions with their randomizing phases.
///
/// Invariants: at least one branch, directions and phases equal in length,
/// all finite, directions inside `[0, π]`.
///
/// Direction cosines are cached at construction: for a cosine-domain grid
/// they are the exact grid values (not the lossy `cos(acos(·))` roundtrip),
/// so spike locations and contributing-set boundaries land on exact floats.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerBank {
    directions: Vec<f64>,
    cosines: Vec<f64>,
    phases: Vec<f64>,
    layout: BankLayout,
}

impl BeamformerBank {
    /// Build a bank from caller-supplied directions and phases. Directions
    /// must lie inside `region`; lengths must match.
    pub fn explicit(region: &AodRegion, directions: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Domain("bank needs at least one branch".into()));
        }
        if directions.len() != phases.len() {
            return Err(Error::Dimension(format!(
                "bank has {} directions but {} phases",
                directions.len(),
                phases.len()
            )));
        }
        if !directions.iter().chain(phases.iter()).all(|x| x.is_finite()) {
            return Err(Error::Domain(
                "bank directions and phases must be finite".into(),
            ));
        }
        if let Some(bad) = directions.iter().find(|&&d| !region.contains(d)) {
            return Err(Error::Domain(format!(
                "bank direction {bad} outside region [{}, {}]",
                region.theta_l(),
                region.theta_r()
            )));
        }
        let cosines = directions.iter().map(|d| d.cos()).collect();
        Ok(Self {
            directions,
            cosines,
            phases,
            layout: BankLayout::Explicit,
        })
    }

    /// Branch directions `ϑ_q` (radians).
    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    /// Cached cosines `cos ϑ_q`, exact for cosine-domain grids.
    pub fn direction_cosines(&self) -> &[f64] {
        &self.cosines
    }

    /// Branch phases `φ_q` (radians).
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Direction layout tag.
    pub fn layout(&self) -> BankLayout {
        self.layout
    }

    /// Number of branches `Q`.
    pub fn branch_count(&self) -> usize {
        self.directions.len()
    }
}

/// Generate a `q_count`-branch bank over `region` with the given grid layout
/// and phases drawn i.i.d. uniform over `[0, 2π)` from a seeded generator.
///
/// Directions sit at the interior nodes of a uniform `q_count + 2`-point
/// grid: for [`BankLayout::EquiCos`] the grid is uniform in `cos ϑ`
/// (`cos ϑ_k = cos θ_R + k (cos θ_L − cos θ_R)/(Q+1)`, `k = 1..Q`), for
/// [`BankLayout::EquiAngle`] uniform in `ϑ`
/// (`ϑ_k = θ_L + k (θ_R − θ_L)/(Q+1)`). A single branch lands on the
/// region's center in the respective domain. [`BankLayout::Explicit`] is not
/// a grid and is rejected; use [`BeamformerBank::explicit`] instead.
pub fn make_bank(
    region: &AodRegion,
    q_count: usize,
    layout: BankLayout,
    seed: u64,
) -> Result<BeamformerBank> {
    if q_count < 1 {
        return Err(Error::Domain("bank needs at least one branch".into()));
    }
    let (directions, cosines): (Vec<f64>, Vec<f64>) = match layout {
        BankLayout::EquiCos => {
            let c_r = region.theta_r().cos();
            let c_l = region.theta_l().cos();
            (1..=q_count)
                .map(|k| {
                    let c = (c_r + (c_l - c_r) * k as f64 / (q_count as f64 + 1.0))
                        .clamp(-1.0, 1.0);
                    (c.acos(), c)
                })
                .unzip()
        }
        BankLayout::EquiAngle => (1..=q_count)
            .map(|k| {
                let d = region.theta_l()
                    + (region.theta_r() - region.theta_l()) * k as f64 / (q_count as f64 + 1.0);
                (d, d.cos())
            })
            .unzip(),
        BankLayout::Explicit => {
            return Err(Error::Domain(
                "explicit layout requires explicit directions; use BeamformerBank::explicit".into(),
            ));
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..q_count).map(|_| rng.gen_range(0.0..TAU)).collect();
    Ok(BeamformerBank {
        directions,
        cosines,
        phases,
        layout,
    })
}

/// Steering vector `a_r(θ) = e^{j2πδ_r cos θ}` for a departure angle
/// `θ ∈ [0, π]`.
pub fn steering_vector(geom: &ArrayGeometry, theta: f64) -> Result<Vec<Complex64>> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "departure angle {theta} outside [0, pi]"
        )));
    }
    let c = theta.cos();
    Ok(geom
        .displacements()
        .iter()
        .map(|&d| Complex64::from_polar(1.0, TAU * d * c))
        .collect())
}

/// Complex beam gain of the weighted array towards departure angle `θ` for a
/// branch steered at `ϑ`:
///
/// ```text
/// G(θ, ϑ) = (1/M) Σ_r u_r e^{j2πδ_r (cos θ − cos ϑ)}.
/// ```
///
/// `weights = None` means the all-ones (uniform) weighting.
pub fn beam_gain(
    geom: &ArrayGeometry,
    theta: f64,
    vartheta: f64,
    weights: Option<&[Complex64]>,
) -> Result<Complex64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!(
            "departure angle {theta} outside [0, pi]"
        )));
    }
    if !(0.0..=PI).contains(&vartheta) {
        return Err(Error::Domain(format!(
            "branch direction {vartheta} outside [0, pi]"
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
    let x = theta.cos() - vartheta.cos();
    let mut sum = Complex64::new(0.0, 0.0);
    for (r, &d) in geom.displacements().iter().enumerate() {
        let phase = Complex64::from_polar(1.0, TAU * d * x);
        sum += match weights {
            Some(u) => u[r] * phase,
            None => phase,
        };
    }
    Ok(sum / m as f64)
}

/// Power normalization factor `η` of the full compensator: with per-branch
/// transmit vectors `(1/(M√Q)) diag(u) a*(ϑ_q) e^{-jφ_q}`, the superposed
/// steady-state vector is
///
/// ```text
/// v = Σ_q (1/(M√Q)) diag(u) a(ϑ_q) e^{jφ_q},
/// ```
///
/// and `η = 1/‖v‖₂` scales the transmitter to unit average power. A bank
/// whose branches cancel exactly (`‖v‖ = 0`) cannot be normalized and is
/// reported as a numeric error.
pub fn normalization_eta(
    geom: &ArrayGeometry,
    bank: &BeamformerBank,
    weights: Option<&[Complex64]>,
) -> Result<f64> {
    let m = geom.element_count();
    if let Some(u) = weights {
        if u.len() != m {
            return Err(Error::Dimension(format!(
                "weights length {} != array size {m}",
                u.len()
            )));
        }
    }
    let q = bank.branch_count();
    let scale = 1.0 / (m as f64 * (q as f64).sqrt());
    let mut norm_sq = 0.0;
    for (r, &d) in geom.displacements().iter().enumerate() {
        let mut v_r = Complex64::new(0.0, 0.0);
        for (&c_q, &phi) in bank.direction_cosines().iter().zip(bank.phases()) {
            v_r += Complex64::from_polar(1.0, TAU * d * c_q + phi);
        }
        if let Some(u) = weights {
            v_r *= u[r];
        }
        norm_sq += (v_r * scale).norm_sqr();
    }
    let norm = norm_sq.sqrt();
    // Cancellation floor: each v_r sums Q unit phasors (times u_r), so a
    // genuine superposition has norm far above the Q·ε rounding residue a
    // perfectly cancelling bank leaves behind.
    let u_norm = match weights {
        Some(u) => u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(),
        None => (m as f64).sqrt(),
    };
    if norm <= scale * u_norm * q as f64 * 1e-12 {
        return Err(Error::Numeric(
            "bank branches cancel; transmit power normalization is undefined".into(),
        ));
    }
    Ok(1.0 / norm)
}
