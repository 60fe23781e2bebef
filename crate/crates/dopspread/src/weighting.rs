//! Doppler-spread-minimizing antenna weighting.
//!
//! Applying a weight `u_r` per array branch shapes the beam function, and
//! with it every spectral moment of the compensated channel. Both moments
//! that matter are quadratic forms in the weight vector:
//!
//! ```text
//! uᴴ C_k u = M² ∫ ω̃ᵏ |𝒢(ω̃)|² 𝒲(ω̃) dω̃,      (C_k)_{rs} = I_k(δ_r − δ_s),
//! I_k(Δ)   = ∫ ω̃ᵏ 𝒲(ω̃) e^{j2πΔω̃} dω̃,
//! ```
//!
//! so the root-mean-square Doppler spread of the weighted channel is
//!
//! ```text
//! σ_DS(u) = ω_d √( uᴴC₂u / uᴴC₀u ),
//! ```
//!
//! and minimizing it over `u` is the generalized Hermitian eigenvalue
//! problem `C₂u = λC₀u`: the optimal weights are the eigenvector of the
//! smallest eigenvalue `λ_min`, and the attained spread is `ω_d√λ_min`.
//!
//! Entry assembly exploits two structural facts. First, `I_k(−Δ) =
//! conj(I_k(Δ))` (the integrand's non-oscillatory part is real), so the
//! matrices are Hermitian by construction. Second, entries depend on the
//! displacements only through the difference `δ_r − δ_s`; distinct
//! differences are deduplicated before any integral runs, which collapses a
//! uniform linear array to `2M − 1` integrals per moment (the matrices are
//! Toeplitz).
//!
//! Discrete-bank windows are integrated branch by branch under the
//! substitution `ω̃ = cos ϑ_q + sin φ`, which removes each branch's
//! inverse-square-root factor *exactly* — the substituted integrand is
//! analytic, so the per-entry tolerance of `10⁻⁹` is actually certified,
//! which raw quadrature against the spiky window cannot do (its error
//! estimate saturates near singular panels; see the quadrature module docs).

use crate::array::{AodRegion, ArrayGeometry, BeamformerBank};
use crate::error::{Error, Result};
use crate::quad::{integrate_complex, uniform_edges};
use crate::spectrum::WindowFunction;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Absolute accuracy requested of each moment-matrix entry.
const ENTRY_TOL: f64 = 1e-9;

/// Displacement differences closer than this collapse into one integral.
const DIFF_TOL: f64 = 1e-10;

fn cis(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

/// Hard cap on the panel edges one moment integral may allocate. Reaching
/// it means the oscillation `e^{j2πΔω̃}` is too fast to integrate at the
/// requested accuracy within sane memory; the caller gets a numeric error
/// instead of an unbounded allocation.
const MAX_MOMENT_EDGES: f64 = 2e6;

/// Insert uniform interior edges between the mandatory breakpoints so each
/// panel spans at most about half a period of `e^{j2πΔω̃}`.
fn densify(pts: &[f64], delta_abs: f64) -> Result<Vec<f64>> {
    let per_unit = 2.0 * (delta_abs + 1.0);
    let span = pts.last().unwrap() - pts[0];
    let needed = span * per_unit + pts.len() as f64;
    if !(needed <= MAX_MOMENT_EDGES) {
        return Err(Error::Numeric(format!(
            "oscillatory moment quadrature would need about {needed:.0} panel edges \
             (cap {MAX_MOMENT_EDGES:.0}); displacement difference {delta_abs} is too \
             large for the requested accuracy"
        )));
    }
    let mut edges: Vec<f64> = Vec::new();
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]) * per_unit).ceil().max(1.0) as usize;
        let sub = uniform_edges(w[0], w[1], n);
        if !edges.is_empty() {
            edges.pop();
        }
        edges.extend(sub);
    }
    Ok(edges)
}

/// Panel edges for a closed-form window moment integral: support endpoints,
/// the two-sided definition's breakpoint at 0, the window's unbounded points,
/// and the square-root kinks of the arccos ramps (where their clamp
/// saturates), densified against the oscillation.
fn closed_form_edges(win: &WindowFunction, delta_abs: f64) -> Result<Vec<f64>> {
    let mu = win.support_mu();
    let mut pts = vec![-mu, 0.0, mu];
    for p in win.singular_points() {
        if p.abs() < mu {
            pts.push(p);
        }
    }
    if let Some(region) = win.region() {
        for k in [region.theta_r().cos() + 1.0, region.theta_l().cos() - 1.0] {
            if k > -mu && k < mu {
                pts.push(k);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    densify(&pts, delta_abs)
}

fn closed_form_moment(win: &WindowFunction, k: i32, delta: f64) -> Result<Complex64> {
    let edges = closed_form_edges(win, delta.abs())?;
    let budget = 8 * edges.len() + 4000;
    integrate_complex(
        |w| cis(TAU * delta * w) * (w.powi(k) * win.eval(w)),
        &edges,
        ENTRY_TOL,
        budget,
    )
}

/// Discrete-bank moment integral, branch by branch.
///
/// Branch `q` is active on `ω̃ ∈ [cos ϑ_q − cos θ_L, cos ϑ_q − cos θ_R]` and
/// contributes `w_q / √(1 − (ω̃ − cos ϑ_q)²)` there. Substituting
/// `ω̃ = cos ϑ_q + sin φ` cancels the square-root factor against `dω̃`:
///
/// ```text
/// ∫ ω̃ᵏ e^{j2πΔω̃} / √(1−(ω̃−c_q)²) dω̃ = ∫ (c_q + sin φ)ᵏ e^{j2πΔ(c_q+sinφ)} dφ
/// ```
///
/// over the q-independent interval `φ ∈ [asin(−cos θ_L), asin(−cos θ_R)]`.
fn discrete_bank_moment(
    region: &AodRegion,
    bank: &BeamformerBank,
    branch_weights: &[f64],
    k: i32,
    delta: f64,
) -> Result<Complex64> {
    let prefactor = TAU / (region.theta_r() - region.theta_l());
    let phi_lo = (-region.theta_l().cos()).clamp(-1.0, 1.0).asin();
    let phi_hi = (-region.theta_r().cos()).clamp(-1.0, 1.0).asin();
    let q_count = bank.branch_count() as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for (&c_q, &p_q) in bank.direction_cosines().iter().zip(branch_weights) {
        let w_q = prefactor * p_q;
        if w_q <= 0.0 {
            continue;
        }
        // Keep the window's two-sided breakpoint ω̃ = 0 as a panel edge:
        // sin φ₀ = −cos ϑ_q.
        let phi0 = (-c_q).clamp(-1.0, 1.0).asin();
        let mut pts = vec![phi_lo, phi_hi];
        if phi0 > phi_lo + 1e-12 && phi0 < phi_hi - 1e-12 {
            pts.insert(1, phi0);
        }
        let edges = densify(&pts, delta.abs())?;
        let budget = 8 * edges.len() + 2000;
        let branch = integrate_complex(
            |phi| {
                let w = c_q + phi.sin();
                cis(TAU * delta * w) * w.powi(k)
            },
            &edges,
            ENTRY_TOL / (q_count * w_q),
            budget,
        )?;
        total += branch * w_q;
    }
    Ok(total)
}

/// `I_k(Δ) = ∫ ω̃ᵏ 𝒲(ω̃) e^{j2πΔω̃} dω̃` over the window support.
fn moment_integral(win: &WindowFunction, k: i32, delta: f64) -> Result<Complex64> {
    let v = if let Some((region, bank, weights)) = win.discrete_parts() {
        discrete_bank_moment(region, bank, weights, k, delta)
    } else {
        closed_form_moment(win, k, delta)
    }
    .map_err(|e| {
        Error::Numeric(format!(
            "moment integral I_{k}(Δ) failed at displacement difference Δ = {delta}: {e}"
        ))
    })?;
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Numeric(format!(
            "moment integral I_{k}(Δ) is non-finite at Δ = {delta} (window unbounded at a sampled point)"
        )));
    }
    Ok(v)
}

/// The spectral-moment matrix pair `(C₀, C₂)` of an array/window
/// combination. `uᴴC₀u` is (M² times) the weighted window mass, `uᴴC₂u` the
/// weighted second moment; their ratio sets the Doppler spread.
///
/// Both matrices are Hermitian by construction; `C₀` is positive definite
/// for every window with nonvanishing support.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrices {
    c0: DMatrix<Complex64>,
    c2: DMatrix<Complex64>,
}

impl CMatrices {
    /// Wrap caller-supplied moment matrices (mainly for testing and for
    /// pencils obtained elsewhere). Both must be square, equal-sized, finite
    /// and Hermitian to rounding accuracy; they are re-hermitized exactly.
    pub fn from_matrices(c0: DMatrix<Complex64>, c2: DMatrix<Complex64>) -> Result<Self> {
        if c0.nrows() == 0 {
            return Err(Error::Dimension("moment matrices must be nonempty".into()));
        }
        if !c0.is_square() || !c2.is_square() || c0.nrows() != c2.nrows() {
            return Err(Error::Dimension(format!(
                "moment matrices must be square and equal-sized, got {}x{} and {}x{}",
                c0.nrows(),
                c0.ncols(),
                c2.nrows(),
                c2.ncols()
            )));
        }
        for (name, m) in [("C0", &c0), ("C2", &c2)] {
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Domain(format!("{name} must be finite")));
            }
            let dev = (m - m.adjoint()).norm();
            if dev > 1e-8 * (1.0 + m.norm()) {
                return Err(Error::Domain(format!(
                    "{name} deviates from Hermitian by {dev:.3e}"
                )));
            }
        }
        let herm = |m: &DMatrix<Complex64>| (m + m.adjoint()).scale(0.5);
        Ok(Self {
            c0: herm(&c0),
            c2: herm(&c2),
        })
    }

    /// Zeroth-moment (power) matrix `C₀`.
    pub fn c0(&self) -> &DMatrix<Complex64> {
        &self.c0
    }

    /// Second-moment matrix `C₂`.
    pub fn c2(&self) -> &DMatrix<Complex64> {
        &self.c2
    }

    /// Array size `M` the matrices were assembled for.
    pub fn element_count(&self) -> usize {
        self.c0.nrows()
    }
}

/// Assemble `(C₀, C₂)` for an array and window over a departure-angle
/// region. Each entry is accurate to `10⁻⁹` absolute.
///
/// The window's support half-width must match the region's cosine width `μ`
/// (the window must have been built over the same region).
pub fn assemble_c_matrices(
    geom: &ArrayGeometry,
    region: &AodRegion,
    win: &WindowFunction,
) -> Result<CMatrices> {
    if (win.support_mu() - region.mu()).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "window support half-width {} does not match region cosine width {}",
            win.support_mu(),
            region.mu()
        )));
    }
    let d = geom.displacements();
    let m = d.len();

    // Distinct nonnegative displacement differences; a uniform linear array
    // has only 2M−1 across both moments' Toeplitz structure.
    let mut diffs: Vec<f64> = Vec::with_capacity(m * (m + 1) / 2);
    for s in 0..m {
        for r in 0..=s {
            diffs.push(d[s] - d[r]);
        }
    }
    diffs.sort_by(f64::total_cmp);
    let mut reps: Vec<f64> = Vec::new();
    for &x in &diffs {
        if reps.last().map_or(true, |&l| x - l > DIFF_TOL) {
            reps.push(x);
        }
    }

    // One integral pair per difference class, in parallel; collect preserves
    // order, so results are independent of the thread count.
    let moments: Vec<Result<(Complex64, Complex64)>> = reps
        .par_iter()
        .map(|&dd| Ok((moment_integral(win, 0, dd)?, moment_integral(win, 2, dd)?)))
        .collect();
    let mut i0 = Vec::with_capacity(reps.len());
    let mut i2 = Vec::with_capacity(reps.len());
    for r in moments {
        let (a, b) = r?;
        i0.push(a);
        i2.push(b);
    }

    let lookup = |dd: f64| -> usize {
        let idx = reps.partition_point(|&r| r < dd - DIFF_TOL);
        debug_assert!((reps[idx] - dd).abs() <= DIFF_TOL);
        idx
    };

    let mut c0 = DMatrix::zeros(m, m);
    let mut c2 = DMatrix::zeros(m, m);
    for s in 0..m {
        for r in 0..=s {
            let idx = lookup(d[s] - d[r]);
            let (a, b) = (i0[idx], i2[idx]);
            if r == s {
                // I_k(0) is exactly real (the kernel degenerates to 1).
                c0[(r, r)] = Complex64::new(a.re, 0.0);
                c2[(r, r)] = Complex64::new(b.re, 0.0);
            } else {
                c0[(s, r)] = a;
                c0[(r, s)] = a.conj();
                c2[(s, r)] = b;
                c2[(r, s)] = b.conj();
            }
        }
    }
    Ok(CMatrices { c0, c2 })
}

/// The uniform (all-ones) weight vector for an `m`-element array.
pub fn equal_weights(m: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); m]
}

fn weight_vector(m: usize, weights: Option<&[Complex64]>) -> Result<DVector<Complex64>> {
    match weights {
        Some(u) => {
            if u.len() != m {
                return Err(Error::Dimension(format!(
                    "weights length {} != array size {m}",
                    u.len()
                )));
            }
            if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Domain("weights must be finite".into()));
            }
            Ok(DVector::from_column_slice(u))
        }
        None => Ok(DVector::from_element(m, Complex64::new(1.0, 0.0))),
    }
}

fn hermitian_form(a: &DMatrix<Complex64>, u: &DVector<Complex64>) -> f64 {
    (u.adjoint() * a * u)[(0, 0)].re
}

/// Doppler spread `σ_DS = ω_d √(uᴴC₂u / uᴴC₀u)` from pre-assembled moment
/// matrices. `weights = None` is the uniform weighting. A weight vector in
/// the null space of `C₀` (no transmitted window power) is rejected.
pub fn doppler_spread_from_matrices(
    cm: &CMatrices,
    omega_d: f64,
    weights: Option<&[Complex64]>,
) -> Result<f64> {
    if !omega_d.is_finite() || omega_d < 0.0 {
        return Err(Error::Domain(format!(
            "omega_d must be finite and nonnegative, got {omega_d}"
        )));
    }
    let u = weight_vector(cm.element_count(), weights)?;
    let den = hermitian_form(&cm.c0, &u);
    if !(den > 0.0) {
        return Err(Error::Domain(format!(
            "weights carry no window power (uHC0u = {den:.3e} <= 0)"
        )));
    }
    let num = hermitian_form(&cm.c2, &u).max(0.0);
    Ok(omega_d * (num / den).sqrt())
}

/// Doppler spread of the weighted channel: assembles the moment matrices for
/// this array/region/window and evaluates `σ_DS(u)`. Linear in `ω_d` and
/// invariant to a complex rescaling of the weights.
pub fn doppler_spread(
    geom: &ArrayGeometry,
    region: &AodRegion,
    win: &WindowFunction,
    omega_d: f64,
    weights: Option<&[Complex64]>,
) -> Result<f64> {
    let cm = assemble_c_matrices(geom, region, win)?;
    doppler_spread_from_matrices(&cm, omega_d, weights)
}

enum SqrtFactor {
    /// `C₀ = LLᴴ`, `L` lower triangular.
    Cholesky(DMatrix<Complex64>),
    /// `C₀ = V diag(λ) Vᴴ`; stores `V` and `λ^{-1/2}`.
    Eigen(DMatrix<Complex64>, Vec<f64>),
}

/// Solve `C₂u = λC₀u` for the smallest eigenvalue: returns the
/// spread-minimizing weight vector and `λ_min` (so the attained spread is
/// `ω_d√λ_min`).
///
/// The pencil is reduced to an ordinary Hermitian problem via the Cholesky
/// factor of `C₀` (`B = L⁻¹C₂L⁻ᴴ`, `u = L⁻ᴴv`), with an eigendecomposition
/// square root as fallback when a pivot is too small; a `C₀` that is
/// numerically singular is a domain error. The returned vector is normalized
/// so its largest-modulus entry is exactly `1 + 0j`, which fixes the
/// eigenvector's arbitrary phase and scale deterministically. The
/// eigenpair's residual is verified against the original pencil before
/// returning.
pub fn optimal_weights(cm: &CMatrices) -> Result<(Vec<Complex64>, f64)> {
    let m = cm.element_count();
    let scale = cm.c0.diagonal().iter().map(|z| z.re).sum::<f64>() / m as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Domain(format!(
            "C0 has nonpositive mean diagonal {scale:.3e}; not a valid power matrix"
        )));
    }

    let factor = match Cholesky::new(cm.c0.clone()) {
        Some(ch) => {
            let l = ch.unpack();
            let min_pivot = l
                .diagonal()
                .iter()
                .map(|z| z.re)
                .fold(f64::INFINITY, f64::min);
            if min_pivot * min_pivot >= 1e-12 * scale {
                Some(SqrtFactor::Cholesky(l))
            } else {
                None
            }
        }
        None => None,
    };
    let factor = match factor {
        Some(f) => f,
        None => {
            // Nearly singular for the direct factorization: diagonalize, and
            // reject only if the spectrum confirms singularity.
            let se = SymmetricEigen::new(cm.c0.clone());
            let lam_max = se
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let lam_min = se.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(lam_min > 1e-12 * lam_max.max(scale)) {
                return Err(Error::Domain(format!(
                    "C0 is numerically singular (eigenvalues in [{lam_min:.3e}, {lam_max:.3e}]); \
                     the weight problem is ill-posed"
                )));
            }
            let inv_sqrt: Vec<f64> = se.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
            SqrtFactor::Eigen(se.eigenvectors, inv_sqrt)
        }
    };

    // B = L⁻¹C₂L⁻ᴴ: with X = L⁻¹C₂ and C₂ Hermitian, B = L⁻¹Xᴴ.
    let b = match &factor {
        SqrtFactor::Cholesky(l) => {
            let x = l
                .solve_lower_triangular(&cm.c2)
                .ok_or_else(|| Error::Numeric("triangular solve of C2 failed".into()))?;
            l.solve_lower_triangular(&x.adjoint())
                .ok_or_else(|| Error::Numeric("triangular solve of C2 failed".into()))?
        }
        SqrtFactor::Eigen(v, inv_sqrt) => {
            let t = v.adjoint() * &cm.c2 * v;
            DMatrix::from_fn(m, m, |i, j| t[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
        }
    };
    let b = (&b + &b.adjoint()).scale(0.5);

    let se = SymmetricEigen::new(b);
    let mut imin = 0;
    for i in 1..m {
        if se.eigenvalues[i] < se.eigenvalues[imin] {
            imin = i;
        }
    }
    let lambda_min = se.eigenvalues[imin];
    let v_min = se.eigenvectors.column(imin).into_owned();

    let u_raw: DVector<Complex64> = match &factor {
        SqrtFactor::Cholesky(l) => l
            .adjoint()
            .solve_upper_triangular(&v_min)
            .ok_or_else(|| Error::Numeric("triangular back-substitution failed".into()))?,
        SqrtFactor::Eigen(v, inv_sqrt) => {
            let scaled = DVector::from_fn(m, |i, _| v_min[i] * inv_sqrt[i]);
            v * scaled
        }
    };

    // Pin the largest-modulus entry to exactly 1 + 0j.
    let mut imax = 0;
    for i in 1..m {
        if u_raw[i].norm_sqr() > u_raw[imax].norm_sqr() {
            imax = i;
        }
    }
    let peak = u_raw[imax];
    let peak_sq = peak.norm_sqr();
    if !(peak_sq > 0.0) {
        return Err(Error::Numeric("eigenvector collapsed to zero".into()));
    }
    let u: Vec<Complex64> = u_raw.iter().map(|&z| z * peak.conj() / peak_sq).collect();

    // Verify the eigenpair on the original pencil.
    let uv = DVector::from_column_slice(&u);
    let resid = (&cm.c2 * &uv - (&cm.c0 * &uv) * Complex64::from(lambda_min)).norm();
    let bound = 1e-8 * cm.c2.norm() * uv.norm();
    if resid > bound {
        return Err(Error::Numeric(format!(
            "generalized eigenpair residual {resid:.3e} exceeds bound {bound:.3e}"
        )));
    }
    Ok((u, lambda_min))
}

/// Ratio of mean sidelobe power to main-lobe peak power of the weighted
/// array's beam function, measured on a dense 8001-point grid over
/// `ω̃ ∈ [−2, 2]` (the widest possible Doppler support).
///
/// The main lobe is delimited on each side of the power peak by the first
/// null — detected as a sign change of the demodulated beam envelope
/// `Re{𝒢(ω̃)e^{j2πδ_mid ω̃}}` (`δ_mid` the array midpoint, which makes the
/// envelope real for symmetric weightings), or as a local power minimum
/// below `peak/100` for weightings whose envelope does not cross zero.
///
/// A single-element array has no sidelobes to measure, and a weighting
/// without a detectable null on both sides cannot be scored; both are domain
/// errors.
pub fn sidelobe_mainlobe_ratio(geom: &ArrayGeometry, weights: &[Complex64]) -> Result<f64> {
    const GRID: usize = 8001;
    let d = geom.displacements();
    let m = d.len();
    if m < 2 {
        return Err(Error::Domain(
            "sidelobe analysis needs at least two array elements".into(),
        ));
    }
    if weights.len() != m {
        return Err(Error::Dimension(format!(
            "weights length {} != array size {m}",
            weights.len()
        )));
    }
    if weights.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("weights must be finite".into()));
    }
    if weights.iter().map(|z| z.norm_sqr()).sum::<f64>() <= 0.0 {
        return Err(Error::Domain("weights must not be all zero".into()));
    }

    let d_mid = 0.5 * (d[0] + d[m - 1]);
    let mut power = vec![0.0; GRID];
    let mut env = vec![0.0; GRID];
    for i in 0..GRID {
        let wt = -2.0 + 4.0 * i as f64 / (GRID - 1) as f64;
        let mut g = Complex64::new(0.0, 0.0);
        for (u, &dr) in weights.iter().zip(d) {
            g += u * cis(-TAU * dr * wt);
        }
        g /= m as f64;
        power[i] = g.norm_sqr();
        env[i] = (g * cis(TAU * d_mid * wt)).re;
    }

    let mut ipk = 0;
    for i in 1..GRID {
        if power[i] > power[ipk] {
            ipk = i;
        }
    }
    let peak = power[ipk];
    if !(peak > 0.0) {
        return Err(Error::Numeric(
            "beam pattern vanished on the analysis grid".into(),
        ));
    }

    let mut right = None;
    for i in (ipk + 1)..(GRID - 1) {
        if env[i] * env[i + 1] <= 0.0
            || (power[i] < peak / 100.0 && power[i] <= power[i - 1] && power[i] <= power[i + 1])
        {
            right = Some(i);
            break;
        }
    }
    let mut left = None;
    let mut i = ipk;
    while i > 1 {
        i -= 1;
        if env[i] * env[i - 1] <= 0.0
            || (power[i] < peak / 100.0 && power[i] <= power[i - 1] && power[i] <= power[i + 1])
        {
            left = Some(i);
            break;
        }
    }
    let (Some(l), Some(r)) = (left, right) else {
        return Err(Error::Domain(
            "no null found on both sides of the beam peak; main lobe is undelimited".into(),
        ));
    };

    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &p) in power.iter().enumerate() {
        if i < l || i > r {
            sum += p;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Domain(
            "main lobe spans the whole analysis grid".into(),
        ));
    }
    Ok(sum / count as f64 / peak)
}
