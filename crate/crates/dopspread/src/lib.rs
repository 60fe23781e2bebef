//! Doppler spectrum analysis for angle-domain compensated mobile MIMO uplinks.
//!
//! A transmitter moving at speed `v` sees every propagation path Doppler-shifted
//! by `f_d·cos θ`, where `θ` is the angle of departure measured against the
//! velocity vector and `f_d = v/λ` is the maximum Doppler frequency. A
//! transmit array can pre-compensate those shifts per beamforming branch: each
//! branch is steered towards a direction `ϑ_q` and de-rotated at the Doppler
//! frequency it would see from exactly that direction. What survives is the
//! *residual* spread between the true departure angles and the branch
//! directions. This crate computes that residual spectrum exactly and finds
//! the antenna weights that minimize it.
//!
//! The central analytical object is the factorized power spectral density of
//! the compensated equivalent channel,
//!
//! ```text
//! P(ω) = (1/ω_d) · |𝒢(ω/ω_d)|² · 𝒲(ω/ω_d),      ω_d = 2π f_d,
//! ```
//!
//! where `|𝒢|²` is a beam-pattern factor determined purely by the array
//! geometry and its weights, and `𝒲` is a window factor determined purely by
//! the departure-angle region and the branch-direction layout. Everything
//! downstream — Doppler spread, optimal weights, link-level symbol error
//! rates — builds on this factorization.
//!
//! # Modules
//!
//! * [`array`] — array geometry, steering vectors, beamformer direction banks.
//! * [`spectrum`] — window functions, beam functions, the analytic PSD.
//! * [`channel`] — Monte Carlo scattering channels and the numerical PSD
//!   estimate that validates the analytic one.
//! * [`weighting`] — spectral-moment matrices, Doppler spread, and the
//!   generalized-eigenvalue weight design.
//! * [`linksim`] — an OFDM uplink simulator measuring the symbol-error-rate
//!   impact of the weight designs.
//! * [`quad`] — the adaptive Gauss–Kronrod quadrature the analytic routines
//!   are built on.
//!
//! # Conventions
//!
//! Autocorrelations are defined as `R(τ) = E{g(t) g*(t+τ)}` and spectra as
//! `P(ω) = ∫ R(τ) e^{-jωτ} dτ`; all analytic and numerical routines in this
//! crate follow this one convention consistently. Frequencies `ω` are in
//! rad/s; the normalized variable `ω̃ = ω/ω_d` is dimensionless. Array
//! displacements are in carrier wavelengths. Angles are in radians everywhere
//! except the command-line boundary.
//!
//! All randomized routines take explicit `u64` seeds and are deterministic for
//! a fixed seed, independent of worker-thread count.

pub mod array;
pub mod channel;
pub mod error;
pub mod linksim;
pub mod quad;
pub mod spectrum;
pub mod weighting;

pub use error::{Error, Result};
