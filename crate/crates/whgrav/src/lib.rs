//! Exact solutions of the dimensionally reduced Einstein field equations by
//! canonical Wiener-Hopf factorization.
//!
//! For spacetimes with two commuting Killing vectors the vacuum field
//! equations reduce to an integrable system on the half plane of Weyl
//! coordinates `(ρ, v)` with `ρ > 0`: the matrix field equation
//!
//! ```text
//! d(ρ ⋆ A) = 0,      A = M⁻¹ dM,
//! ```
//!
//! where `⋆` is the Hodge star of the two-dimensional base metric
//! (`⋆dρ = −λ dv`, `⋆dv = dρ`, with `λ = −1` for one timelike Killing vector
//! and `λ = +1` for none). This crate constructs solutions `M(ρ, v)` from
//! *monodromy data*: a diagonal matrix function `𝓜(ω)` of the spectral
//! parameter, pulled back to a closed contour `Γ` in the auxiliary τ-plane
//! through the spectral relation
//!
//! ```text
//! ω = v + (λ/2) ρ (λ − τ²)/τ .
//! ```
//!
//! A canonical (bounded) Wiener-Hopf factorization of each diagonal channel
//! of `𝓜` on `Γ` yields both the field `M(ρ, v)` and the generating function
//! `X(τ, ρ, v)` of the associated linear system, evaluated by contour
//! quadrature, by exact partial fractions, or by closed zero/pole products
//! depending on the shape of the channel.
//!
//! On top of the factorization the crate provides:
//!
//! * meromorphic deformations of a solution by unimodular pairs of simple
//!   zero/pole factors, and the Abelian group operations (multiply, invert)
//!   on diagonal solutions over a common contour;
//! * reconstruction of the four-dimensional metric data: the norm `Δ` of the
//!   Killing vector, the twist potential (identically zero for diagonal
//!   data), and the conformal factor `ψ` obtained by integrating an exact
//!   one-form built from `A`;
//! * numerical verification of every structural identity — the field
//!   equation itself, the linear (Lax) system, the symmetry and
//!   normalization constraints of the factorization, the reconstruction of
//!   `A` from τ-Taylor coefficients of `X`, and conservation of the
//!   Kac-Moody current attached to a spectral point;
//! * three closed-form solution families used as cross-checks and CLI
//!   presets: cylindrical (Bessel-type) waves, Kasner power-law solutions,
//!   and a gravitational pulse wave.
//!
//! The `whgrav` binary exposes the same operations as subcommands
//! (`factorize`, `verify`, `deform`, `compose`, `invert`, `metric`,
//! `current`, `example`) reading and writing JSON and CSV documents.

pub mod cauchy;
pub mod cli;
pub mod contour;
pub mod currents;
pub mod error;
pub mod factorize;
pub mod grid;
pub mod metric;
pub mod monodromy;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};

/// Complex scalar used throughout: double-precision complex numbers.
pub type C = num_complex::Complex64;

#[cfg(doctest)]
mod book_doctests;
