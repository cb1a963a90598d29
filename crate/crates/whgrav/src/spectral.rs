//! The spectral relation between the monodromy variable ω and the contour
//! variable τ, and the algebra of its two roots.
//!
//! At a base point `(ρ, v)` the relation is
//!
//! ```text
//! ω = v + (λ/2) ρ (λ − τ²)/τ ,
//! ```
//!
//! equivalently `λρτ² + 2(ω−v)τ − ρ = 0`. For fixed ω the two τ-roots are
//!
//! ```text
//! φ  = [ −λ(ω−v) + √((ω−v)² + λρ²) ] / ρ ,      φ̃ = −λ/φ ,
//! ```
//!
//! (principal square root), so the roots form an orbit of the involution
//! `i_λ(τ) = −λ/τ` and their product is exactly `−λ`. On an `i_λ`-invariant
//! contour this pairing means one root of each pair lies inside precisely
//! when the other lies outside. The factorized form of the relation,
//!
//! ```text
//! ω − ω₀ = (−λρ / 2τ) (τ − φ) (τ − φ̃) ,     {φ, φ̃} roots for ω₀,
//! ```
//!
//! underlies the closed zero/pole factorizations of rational monodromy
//! channels.
//!
//! Implicit differentiation of the quadratic gives the root derivatives
//! used by the Lax system and current checks:
//!
//! ```text
//! ∂φ/∂ρ = (φ/ρ)(λ − φ²)/(λ + φ²),   ∂φ/∂v = 2λφ²/(ρ(λ + φ²)),
//! ∂φ/∂ω = −∂φ/∂v ,
//! ```
//!
//! the last equality because ω and v enter only through ω − v.

use crate::contour::Lambda;
use crate::error::{Error, Result};
use crate::C;
use serde::Serialize;

/// A point of the Weyl half plane, `ρ > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeylPoint {
    pub rho: f64,
    pub v: f64,
}

impl WeylPoint {
    pub fn new(rho: f64, v: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() || !v.is_finite() {
            return Err(Error::RhoAxis);
        }
        Ok(WeylPoint { rho, v })
    }
}

/// The two roots of the spectral relation for one ω, as an involution pair.
#[derive(Clone, Copy, Debug)]
pub struct RootPair {
    /// Principal-branch root.
    pub phi: C,
    /// The other root, `−λ/φ`.
    pub phi_tilde: C,
}

/// Relative threshold on `|(ω−v)² + λρ²|` below which the two roots are
/// considered indistinguishable (a spectral branch point).
const BRANCH_TOL: f64 = 1e-12;

/// ω as a function of τ at the base point.
pub fn spectral_map(lambda: Lambda, point: &WeylPoint, tau: C) -> C {
    let l = lambda.sign();
    point.v + 0.5 * l * point.rho * (l - tau * tau) / tau
}

/// The τ-roots of the spectral relation for `ω`. Fails within the
/// branch-point exclusion zone where the square root degenerates.
pub fn spectral_roots(lambda: Lambda, point: &WeylPoint, omega: C) -> Result<RootPair> {
    let l = lambda.sign();
    let u = omega - point.v;
    let mut disc = u * u + l * point.rho * point.rho;
    if disc.im == 0.0 {
        // Canonicalize −0.0 so a discriminant on the negative real axis
        // always takes the branch from above; otherwise the root labeling
        // would depend on the rounding path that produced ω − v.
        disc.im = 0.0;
    }
    let scale = u.norm_sqr() + point.rho * point.rho;
    if disc.norm() <= BRANCH_TOL * scale {
        return Err(Error::BranchPoint {
            magnitude: disc.norm(),
        });
    }
    let phi = (-l * u + disc.sqrt()) / point.rho;
    Ok(RootPair {
        phi,
        phi_tilde: -l / phi,
    })
}

/// Derivatives of a root with respect to the base point and ω.
#[derive(Clone, Copy, Debug)]
pub struct RootDerivatives {
    pub d_rho: C,
    pub d_v: C,
    pub d_omega: C,
}

/// Derivatives of whichever root `phi` of the pair is passed in, holding ω
/// fixed for `d_rho`/`d_v`. Fails if the root sits at an involution fixed
/// point (`λ + φ² = 0`), where the pair degenerates.
pub fn root_derivatives(lambda: Lambda, point: &WeylPoint, phi: C) -> Result<RootDerivatives> {
    let l = lambda.sign();
    let denom = l + phi * phi;
    if denom.norm() <= BRANCH_TOL * (1.0 + phi.norm_sqr()) {
        return Err(Error::BranchPoint {
            magnitude: denom.norm(),
        });
    }
    let d_v = 2.0 * l * phi * phi / (point.rho * denom);
    Ok(RootDerivatives {
        d_rho: (phi / point.rho) * (l - phi * phi) / denom,
        d_v,
        d_omega: -d_v,
    })
}

/// Of the two roots, the one closer to `prev`; used to keep a consistent
/// branch while sweeping the base point.
pub fn nearer_root(prev: C, pair: &RootPair) -> C {
    if (pair.phi - prev).norm() <= (pair.phi_tilde - prev).norm() {
        pair.phi
    } else {
        pair.phi_tilde
    }
}
