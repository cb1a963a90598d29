//! The conserved current attached to a solution family: per channel,
//! `q(ω) = X⁻¹∂_ωX` evaluated along the spectral root `τ = φ_ω`, and the
//! one-form `Ĵ = ⋆dq`. Conservation `d⋆Ĵ = 0` holds because `⋆Ĵ` is
//! itself exact, so the finite-difference residual measures nothing but
//! the consistency of the assembled components; it is the loop-algebra
//! analogue of the field equation and is checked the same way.
//!
//! Everything here differentiates real factorization output. The only
//! closed form is the deformed power-law family's, used as an oracle.

use crate::contour::Lambda;
use crate::error::Result;
use crate::grid::Grid;
use crate::spectral::{nearer_root, root_derivatives, spectral_roots, WeylPoint};
use crate::verify::{fd_grid, stencil_vec, tracked_roots, ResidualReport, Solver};
use crate::C;
use rayon::prelude::*;
use std::io;

/// Components of the current one-form over a grid, layout
/// `[point][channel]`.
#[derive(Clone, Debug)]
pub struct CurrentField {
    grid: Grid,
    lambda: Lambda,
    /// The spectral-plane value the current is attached to (for the
    /// diagnostic [`star_dx`], the fixed `τ` instead).
    omega: C,
    nchannels: usize,
    j_rho: Vec<Vec<C>>,
    j_v: Vec<Vec<C>>,
}

impl CurrentField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn omega(&self) -> C {
        self.omega
    }

    pub fn nchannels(&self) -> usize {
        self.nchannels
    }

    pub fn j_rho(&self) -> &[Vec<C>] {
        &self.j_rho
    }

    pub fn j_v(&self) -> &[Vec<C>] {
        &self.j_v
    }

    /// Largest channel-sum of any component over the grid. The current of
    /// a unimodular family is traceless, so this is a roundoff-level
    /// number for well-formed input.
    pub fn max_trace_deviation(&self) -> f64 {
        let sum = |rows: &[Vec<C>]| {
            rows.iter()
                .map(|ch| ch.iter().sum::<C>().norm())
                .fold(0.0f64, f64::max)
        };
        sum(&self.j_rho).max(sum(&self.j_v))
    }
}

/// `q = X⁻¹∂_ωX` at one point: the τ-log-derivative of every channel's
/// `X` at the tracked root, times the root's motion `∂_ωφ`.
fn q_at(
    solver: &Solver,
    lambda: Lambda,
    point: &WeylPoint,
    omega: C,
    phi_guess: C,
) -> Result<Vec<C>> {
    let sol = solver(point)?;
    let pair = spectral_roots(lambda, point, omega)?;
    let root = nearer_root(phi_guess, &pair);
    let d_omega = root_derivatives(lambda, point, root)?.d_omega;
    sol.channels()
        .iter()
        .map(|ch| Ok(ch.x.log_deriv(root)? * d_omega))
        .collect()
}

/// Assemble `Ĵ = ⋆dq` over a grid by pointwise 4th-order stencils:
/// `Ĵ_ρ = ∂_v q`, `Ĵ_v = −λ ∂_ρ q`. The root branch is tracked over the
/// grid and held consistent across each stencil.
pub fn kac_moody_current(solver: &Solver, grid: &Grid, omega: C, h: f64) -> Result<CurrentField> {
    let probe = solver(&grid.point(0, 0))?;
    let lambda = probe.lambda();
    let nchannels = probe.channels().len();
    let lam = lambda.sign();
    let roots = tracked_roots(lambda, grid, omega)?;
    let indexed: Vec<(usize, usize)> = grid.points().map(|(i, j, _)| (i, j)).collect();
    let pairs: Vec<(Vec<C>, Vec<C>)> = indexed
        .par_iter()
        .map(|&(i, j)| {
            let center = grid.point(i, j);
            let phi = roots[grid.idx(i, j)];
            let q_shift = |drho: f64, dv: f64| -> Result<Vec<C>> {
                let p = WeylPoint::new(center.rho + drho, center.v + dv)?;
                q_at(solver, lambda, &p, omega, phi)
            };
            let d_v = stencil_vec(&|s| q_shift(0.0, s), h, nchannels)?;
            let d_rho = stencil_vec(&|s| q_shift(s, 0.0), h, nchannels)?;
            let j_v: Vec<C> = d_rho.iter().map(|d| -lam * d).collect();
            Ok((d_v, j_v))
        })
        .collect::<Result<_>>()?;
    let (j_rho, j_v) = pairs.into_iter().unzip();
    Ok(CurrentField {
        grid: *grid,
        lambda,
        omega,
        nchannels,
        j_rho,
        j_v,
    })
}

/// Closed form of the current for the deformed power-law family with
/// exponent pair `(n, −n)` at `λ = −1`, as a function of the tracked root
/// `φ = φ_ω`. Channel 1; channel 2 is its negative. The deformation
/// center `a` does not appear: its only contribution to `q` is constant
/// over the plane and dies under `⋆d`.
pub fn power_family_current_closed_form(n: i32, point: &WeylPoint, phi: C) -> (C, C) {
    let n = f64::from(n);
    let rho2 = point.rho * point.rho;
    let phi2 = phi * phi;
    let den = rho2 * (phi2 - 1.0).powi(3);
    let j_rho = 4.0 * n * phi2 * (phi2 + 1.0) / den;
    let j_v = 8.0 * n * phi2 * phi / den;
    (j_rho, j_v)
}

/// Finite-difference residual of the conservation law `d⋆Ĵ = 0`, i.e.
/// `|λ ∂_ρ Ĵ_ρ + ∂_v Ĵ_v|` per point and channel.
pub fn current_conservation_residual(j: &CurrentField) -> Result<ResidualReport> {
    let d_rho = fd_grid(&j.grid, &j.j_rho, j.nchannels, true)?;
    let d_v = fd_grid(&j.grid, &j.j_v, j.nchannels, false)?;
    let lam = j.lambda.sign();
    let mut per_channel = vec![0.0f64; j.nchannels];
    for idx in 0..j.grid.len() {
        for c in 0..j.nchannels {
            per_channel[c] = per_channel[c].max((lam * d_rho[idx][c] + d_v[idx][c]).norm());
        }
    }
    Ok(ResidualReport {
        check: "current_conservation".into(),
        max_residual: per_channel.iter().fold(0.0f64, |a, &b| a.max(b)),
        per_channel_max: per_channel,
        grid: j.grid,
        refinement_ratio: None,
    })
}

/// Diagnostic variant: `⋆dX` at a fixed spectral-plane point `τ` (no root
/// tracking, no `∂_ω` weight). Not conserved in general; useful when
/// bisecting a disagreement between the assembled current and a closed
/// form, to separate root-tracking issues from factorization issues.
pub fn star_dx(solver: &Solver, grid: &Grid, tau: C, h: f64) -> Result<CurrentField> {
    let probe = solver(&grid.point(0, 0))?;
    let lambda = probe.lambda();
    let nchannels = probe.channels().len();
    let lam = lambda.sign();
    let indexed: Vec<(usize, usize)> = grid.points().map(|(i, j, _)| (i, j)).collect();
    let pairs: Vec<(Vec<C>, Vec<C>)> = indexed
        .par_iter()
        .map(|&(i, j)| {
            let center = grid.point(i, j);
            let x_shift = |drho: f64, dv: f64| -> Result<Vec<C>> {
                let p = WeylPoint::new(center.rho + drho, center.v + dv)?;
                solver(&p)?.x_at(tau)
            };
            let d_v = stencil_vec(&|s| x_shift(0.0, s), h, nchannels)?;
            let d_rho = stencil_vec(&|s| x_shift(s, 0.0), h, nchannels)?;
            let j_v: Vec<C> = d_rho.iter().map(|d| -lam * d).collect();
            Ok((d_v, j_v))
        })
        .collect::<Result<_>>()?;
    let (j_rho, j_v) = pairs.into_iter().unzip();
    Ok(CurrentField {
        grid: *grid,
        lambda,
        omega: tau,
        nchannels,
        j_rho,
        j_v,
    })
}

/// Write the current components as CSV: one row per grid point, real and
/// imaginary parts of every channel's `Ĵ_ρ` and `Ĵ_v`.
pub fn write_current_csv(out: &mut dyn io::Write, j: &CurrentField) -> io::Result<()> {
    write!(out, "rho,v")?;
    for c in 1..=j.nchannels {
        write!(out, ",j_rho_{c}_re,j_rho_{c}_im,j_v_{c}_re,j_v_{c}_im")?;
    }
    writeln!(out)?;
    for (i, jj, p) in j.grid.points() {
        let idx = j.grid.idx(i, jj);
        write!(out, "{:.16e},{:.16e}", p.rho, p.v)?;
        for c in 0..j.nchannels {
            let (r, v) = (j.j_rho[idx][c], j.j_v[idx][c]);
            write!(
                out,
                ",{:.16e},{:.16e},{:.16e},{:.16e}",
                r.re, r.im, v.re, v.im
            )?;
        }
        writeln!(out)?;
    }
    Ok(())
}
