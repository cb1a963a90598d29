//! Reconstruction of four-dimensional metric data from a two-channel
//! solution: the coset parametrization (Δ, B̃), the conformal factor ψ by
//! path quadrature of its gradient system, closed-form ψ for the built-in
//! families, the Kasner exponents and line element, and the Bessel kernels
//! the cylindrical-wave forms are built on.
//!
//! A 2×2 solution `M` with det 1 encodes the stationary block as
//! `M = [[Δ + B̃²/Δ, B̃/Δ], [B̃/Δ, 1/Δ]]`; the remaining metric function ψ
//! solves `∂_ρψ = ¼ρ Tr(A_ρ² − λA_v²)`, `∂_vψ = ½ρ Tr(A_ρ A_v)`, whose
//! integrability is exactly the field equation, so the path-independence
//! residual reported by [`integrate_psi`] doubles as a solution check.

pub mod bessel;

use crate::contour::Lambda;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::spectral::WeylPoint;
use crate::verify::OneFormA;
use crate::C;
use bessel::{bessel_j, BesselOrder};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use std::io;

/// Tolerance for treating channel values as real.
pub const REALNESS_TOL: f64 = 1e-9;
/// Tolerance on det M = 1 and on the m₁₁ consistency relation when
/// extracting (Δ, B̃).
pub const COSET_TOL: f64 = 1e-8;

/// A symmetric 2×2 matrix of solution values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl SymMat2 {
    /// Build from four entries, refusing asymmetric input.
    pub fn from_entries(m11: f64, m12: f64, m21: f64, m22: f64) -> Result<SymMat2> {
        let scale = 1.0 + m12.abs().max(m21.abs());
        if (m12 - m21).abs() > COSET_TOL * scale {
            return Err(Error::Precondition(format!(
                "matrix is not a coset representative: asymmetry {:.3e}",
                (m12 - m21).abs()
            )));
        }
        Ok(SymMat2 {
            m11,
            m12: 0.5 * (m12 + m21),
            m22,
        })
    }

    /// Build from the two channel values of a diagonal solution.
    pub fn from_diagonal_channels(values: &[C]) -> Result<SymMat2> {
        if values.len() != 2 {
            return Err(Error::Config(format!(
                "metric extraction needs exactly 2 channels, got {}",
                values.len()
            )));
        }
        for (j, m) in values.iter().enumerate() {
            if m.im.abs() > REALNESS_TOL * (1.0 + m.norm()) {
                return Err(Error::Precondition(format!(
                    "channel {j} value {m} is not real; restrict to the real-valued domain"
                )));
            }
        }
        let mat = SymMat2 {
            m11: values[0].re,
            m12: 0.0,
            m22: values[1].re,
        };
        let det = mat.det();
        if (det - 1.0).abs() > COSET_TOL {
            return Err(Error::Precondition(format!(
                "matrix is not a coset representative: det = {det}"
            )));
        }
        Ok(mat)
    }

    /// The inverse of [`SymMat2::extract_delta_b`]: the det-1 symmetric
    /// matrix carrying the pair (Δ, B̃).
    pub fn assemble(delta: f64, b_tilde: f64) -> Result<SymMat2> {
        if delta == 0.0 || !delta.is_finite() {
            return Err(Error::Config(format!(
                "Δ must be finite and nonzero, got {delta}"
            )));
        }
        Ok(SymMat2 {
            m11: delta + b_tilde * b_tilde / delta,
            m12: b_tilde / delta,
            m22: 1.0 / delta,
        })
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    /// Read off Δ = 1/m₂₂ and B̃ = m₁₂/m₂₂, checking det 1 and the
    /// redundancy m₁₁ = Δ + B̃²/Δ.
    pub fn extract_delta_b(&self) -> Result<(f64, f64)> {
        if self.m22 == 0.0 {
            return Err(Error::Precondition(
                "matrix is not a coset representative: m22 = 0".into(),
            ));
        }
        let det = self.det();
        if (det - 1.0).abs() > COSET_TOL {
            return Err(Error::Precondition(format!(
                "matrix is not a coset representative: det = {det}"
            )));
        }
        let delta = 1.0 / self.m22;
        let b_tilde = self.m12 / self.m22;
        let rebuilt = delta + b_tilde * b_tilde / delta;
        if (rebuilt - self.m11).abs() > COSET_TOL * (1.0 + self.m11.abs()) {
            return Err(Error::Precondition(format!(
                "matrix is not a coset representative: m11 = {} but Δ + B̃²/Δ = {rebuilt}",
                self.m11
            )));
        }
        Ok((delta, b_tilde))
    }
}

/// Which points of a grid of channel values are real within
/// [`REALNESS_TOL`]; metric assembly is restricted to this mask.
pub fn realness_mask(m_values: &[Vec<C>]) -> Vec<bool> {
    m_values
        .iter()
        .map(|channels| {
            channels
                .iter()
                .all(|m| m.im.abs() <= REALNESS_TOL * (1.0 + m.norm()))
        })
        .collect()
}

/// ψ over a grid, from quadrature of its gradient system.
#[derive(Clone, Debug)]
pub struct PsiGrid {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// max over grid points of |ψ via the (ρ then v) path − ψ via the
    /// (v then ρ) path|; small only if the one-form is closed, i.e. if the
    /// input solves the field equation.
    pub path_independence_residual: f64,
}

/// Simpson intervals per grid-cell-sized path segment. 32 keeps the
/// composite error near 1e−10 even for integrands with 1/ρ-type growth on
/// coarse grids (error per segment ~ (Δ/n)⁴·Δ·f⁗/180).
const PSI_SUPERSAMPLE: usize = 32;

fn simpson<F>(f: &F, a: f64, b: f64, intervals: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + ?Sized,
{
    if a == b {
        return Ok(0.0);
    }
    let n = intervals.max(2) & !1;
    let h = (b - a) / n as f64;
    let mut sum = f(a)? + f(b)?;
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * k as f64)?;
    }
    Ok(sum * h / 3.0)
}

/// Cumulative line integrals ∫_start^{t} f for every target t in the
/// ascending list `targets`, marching outward from `start`.
fn cumulative_line<F>(f: &F, start: f64, targets: &[f64], step_hint: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + ?Sized,
{
    let intervals = |len: f64| -> usize {
        let cells = (len.abs() / step_hint).ceil().max(1.0) as usize;
        cells * PSI_SUPERSAMPLE
    };
    let mut out = vec![0.0; targets.len()];
    let first_above = targets.partition_point(|&t| t < start);
    let mut acc = 0.0;
    let mut prev = start;
    for k in first_above..targets.len() {
        acc += simpson(f, prev, targets[k], intervals(targets[k] - prev))?;
        out[k] = acc;
        prev = targets[k];
    }
    acc = 0.0;
    prev = start;
    for k in (0..first_above).rev() {
        acc += simpson(f, prev, targets[k], intervals(targets[k] - prev))?;
        out[k] = acc;
        prev = targets[k];
    }
    Ok(out)
}

/// Integrate the ψ gradient system over the one-form's grid, anchored at
/// `base_point` with ψ(base) = `constant`. Primary values follow the
/// ρ-leg-then-v-leg path; the reported residual compares against the
/// opposite leg order at every grid point.
pub fn integrate_psi(a: &OneFormA, base_point: &WeylPoint, constant: f64) -> Result<PsiGrid> {
    let grid = *a.grid();
    if grid.rho(0) <= 0.0 {
        return Err(Error::RhoAxis);
    }
    let lam = a.lambda().sign();
    let sampler = a.sampler();

    // ∂_ρψ and ∂_vψ as functions of the point, from the channel traces.
    let s1 = sampler.clone();
    let d_rho_psi = move |rho: f64, v: f64| -> Result<f64> {
        let (ar, av) = s1(&WeylPoint::new(rho, v)?)?;
        let mut tr = C::new(0.0, 0.0);
        for (r, w) in ar.iter().zip(&av) {
            tr += r * r - lam * w * w;
        }
        Ok(0.25 * rho * tr.re)
    };
    let s2 = sampler;
    let d_v_psi = move |rho: f64, v: f64| -> Result<f64> {
        let (ar, av) = s2(&WeylPoint::new(rho, v)?)?;
        let mut tr = C::new(0.0, 0.0);
        for (r, w) in ar.iter().zip(&av) {
            tr += r * w;
        }
        Ok(0.5 * rho * tr.re)
    };

    let rhos: Vec<f64> = (0..grid.nrho).map(|i| grid.rho(i)).collect();
    let vs: Vec<f64> = (0..grid.nv).map(|j| grid.v(j)).collect();

    // Path order 1: ρ-leg at v_base, then v-leg at each ρ_i.
    let rho_leg = cumulative_line(
        &|rho| d_rho_psi(rho, base_point.v),
        base_point.rho,
        &rhos,
        grid.drho,
    )?;
    let v_legs: Vec<Vec<f64>> = rhos
        .par_iter()
        .map(|&rho| cumulative_line(&|v| d_v_psi(rho, v), base_point.v, &vs, grid.dv))
        .collect::<Result<_>>()?;

    // Path order 2: v-leg at ρ_base, then ρ-leg at each v_j.
    let v_leg = cumulative_line(&|v| d_v_psi(base_point.rho, v), base_point.v, &vs, grid.dv)?;
    let rho_legs: Vec<Vec<f64>> = vs
        .par_iter()
        .map(|&v| cumulative_line(&|rho| d_rho_psi(rho, v), base_point.rho, &rhos, grid.drho))
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; grid.len()];
    let mut residual = 0.0f64;
    for i in 0..grid.nrho {
        for j in 0..grid.nv {
            let first = constant + rho_leg[i] + v_legs[i][j];
            let second = constant + v_leg[j] + rho_legs[j][i];
            values[grid.idx(i, j)] = first;
            residual = residual.max((first - second).abs());
        }
    }
    Ok(PsiGrid {
        grid,
        values,
        path_independence_residual: residual,
    })
}

/// Closed-form ψ of the single-mode cylindrical wave with parameters
/// (k, a, b): with β = 2b e^{−ak} and x = kρ,
/// ψ = β² [k²ρ²(J₀(x)² + J₁(x)²) − 2k cos²(kv) ρ J₀(x) J₁(x)],
/// normalized so ψ → 0 on the axis.
pub fn einstein_rosen_psi(k: f64, a: f64, b: f64, point: &WeylPoint) -> f64 {
    let beta = 2.0 * b * (-a * k).exp();
    let x = k * point.rho;
    let j0 = bessel_j(BesselOrder::Zero, x);
    let j1 = bessel_j(BesselOrder::One, x);
    let cos_kv = (k * point.v).cos();
    beta * beta
        * (k * k * point.rho * point.rho * (j0 * j0 + j1 * j1)
            - 2.0 * k * cos_kv * cos_kv * point.rho * j0 * j1)
}

/// Closed-form ψ of the pulse wave with parameters (a, b), normalized so
/// ψ → 0 on the axis.
pub fn pulse_psi(a: f64, b: f64, point: &WeylPoint) -> Result<f64> {
    if a == 0.0 {
        return Err(Error::Config("pulse ψ requires a ≠ 0".into()));
    }
    let (rho2, v2, a2) = (point.rho * point.rho, point.v * point.v, a * a);
    let u = a2 + rho2 - v2;
    let d = u * u + 4.0 * a2 * v2;
    Ok(b * b / a2
        * (1.0 - 2.0 * a2 * rho2 * (u * u - 4.0 * a2 * v2) / (d * d) + (rho2 - a2 - v2) / d.sqrt()))
}

/// The three Kasner exponents attached to a positive integer n, as exact
/// rationals over the common denominator n² − n + 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KasnerExponents {
    pub n: u32,
    pub p1: BigRational,
    pub p2: BigRational,
    pub p3: BigRational,
}

impl KasnerExponents {
    pub fn sum(&self) -> BigRational {
        &self.p1 + &self.p2 + &self.p3
    }

    pub fn sum_of_squares(&self) -> BigRational {
        &self.p1 * &self.p1 + &self.p2 * &self.p2 + &self.p3 * &self.p3
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [
            self.p1.to_f64().expect("exponent fits f64"),
            self.p2.to_f64().expect("exponent fits f64"),
            self.p3.to_f64().expect("exponent fits f64"),
        ]
    }
}

/// p₁ = n(n−1)/(n²−n+1), p₂ = (1−n)/(n²−n+1), p₃ = n/(n²−n+1). Both
/// identities Σp = Σp² = 1 hold exactly and are asserted here; 0 ≤ p₁ < 1
/// always, so the exponent triple (1, 0, 0) is unreachable for any n.
pub fn kasner_exponents(n: u32) -> Result<KasnerExponents> {
    if n < 1 {
        return Err(Error::Config("Kasner exponents need n ≥ 1".into()));
    }
    let big = |x: i64| BigInt::from(x);
    let nn = i64::from(n);
    let den = big(nn) * big(nn) - big(nn) + big(1);
    let p1 = BigRational::new(big(nn) * big(nn - 1), den.clone());
    let p2 = BigRational::new(big(1 - nn), den.clone());
    let p3 = BigRational::new(big(nn), den);
    let e = KasnerExponents { n, p1, p2, p3 };
    assert!(e.sum().is_one(), "exponent sum identity failed");
    assert!(
        e.sum_of_squares().is_one(),
        "exponent square-sum identity failed"
    );
    assert!(!e.p1.is_negative() && e.p1 < BigRational::one());
    Ok(e)
}

/// Choice of the ψ integration constant in the Kasner line element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntegrationConstant {
    /// c = 2^{−2n}/(1−p₁)², the value for which the coordinate change maps
    /// e^ψ(dρ² ↔ dt²) exactly onto the normalized form below.
    Standard,
    Explicit(f64),
}

/// Descriptor of the four-dimensional line element
/// −dt² + t^{2p₁}dx₁² + t^{2p₂}dx₂² + t^{2p₃}dx₃² reached from the
/// solution diag((½ρ)^{2n}, (½ρ)^{−2n}) with e^ψ = c ρ^{2n²}, via
/// ρ = t^{1−p₁}, v = (1−p₁)x₁.
#[derive(Clone, Debug, Serialize)]
pub struct KasnerLineElement {
    pub n: u32,
    pub exponents: [f64; 3],
    pub exponents_exact: [String; 3],
    pub c: f64,
    /// ρ = t to this power (equals 1 − p₁ = 1/(n²−n+1)).
    pub t_power_for_rho: f64,
    /// v = this factor times x₁ (also 1 − p₁).
    pub x1_factor_for_v: f64,
}

pub fn kasner_line_element(n: u32, constant: IntegrationConstant) -> Result<KasnerLineElement> {
    let e = kasner_exponents(n)?;
    let one_minus_p1 = (BigRational::one() - &e.p1)
        .to_f64()
        .expect("1 − p₁ fits f64");
    let c = match constant {
        IntegrationConstant::Standard => 2f64.powi(-2 * n as i32) / (one_minus_p1 * one_minus_p1),
        IntegrationConstant::Explicit(c) => c,
    };
    Ok(KasnerLineElement {
        n,
        exponents: e.as_f64(),
        exponents_exact: [e.p1.to_string(), e.p2.to_string(), e.p3.to_string()],
        c,
        t_power_for_rho: one_minus_p1,
        x1_factor_for_v: one_minus_p1,
    })
}

/// Per-point metric data over a grid, with the validity mask.
#[derive(Clone, Debug)]
pub struct MetricData {
    pub grid: Grid,
    pub lambda: Lambda,
    /// Signs of dρ² and dv² in the 2-d line element; σ·ε = λ.
    pub sigma: i8,
    pub epsilon: i8,
    pub base_point: WeylPoint,
    pub integration_constant: f64,
    pub delta: Vec<f64>,
    pub b_field: Vec<f64>,
    pub psi: Vec<f64>,
    /// True where all channels are real and Δ > 0; Δ and B are NaN outside
    /// the mask.
    pub real_mask: Vec<bool>,
}

/// Assemble metric data from per-point channel values (layout
/// `m_values[point][channel]`) and an already-integrated ψ grid.
pub fn metric_data(
    m_values: &[Vec<C>],
    psi: &PsiGrid,
    lambda: Lambda,
    signs: (i8, i8),
    base_point: WeylPoint,
    integration_constant: f64,
) -> Result<MetricData> {
    let (sigma, epsilon) = signs;
    if sigma.abs() != 1 || epsilon.abs() != 1 || i64::from(sigma * epsilon) != lambda.sign() as i64
    {
        return Err(Error::Config(format!(
            "sign pair (σ, ε) = ({sigma}, {epsilon}) incompatible with λ = {}",
            lambda.sign()
        )));
    }
    if m_values.len() != psi.grid.len() {
        return Err(Error::Config(format!(
            "{} value rows for a grid of {} points",
            m_values.len(),
            psi.grid.len()
        )));
    }
    let mut delta = Vec::with_capacity(m_values.len());
    let mut b_field = Vec::with_capacity(m_values.len());
    let mut mask = Vec::with_capacity(m_values.len());
    for channels in m_values {
        match SymMat2::from_diagonal_channels(channels).and_then(|m| m.extract_delta_b()) {
            Ok((d, b)) if d > 0.0 => {
                delta.push(d);
                b_field.push(b);
                mask.push(true);
            }
            _ => {
                delta.push(f64::NAN);
                b_field.push(f64::NAN);
                mask.push(false);
            }
        }
    }
    Ok(MetricData {
        grid: psi.grid,
        lambda,
        sigma,
        epsilon,
        base_point,
        integration_constant,
        delta,
        b_field,
        psi: psi.values.clone(),
        real_mask: mask,
    })
}

/// Default sign pair for a given λ: (1, −1) in the wave sector, (1, 1) in
/// the static one.
pub fn default_signs(lambda: Lambda) -> (i8, i8) {
    match lambda {
        Lambda::Minus => (1, -1),
        Lambda::Plus => (1, 1),
    }
}

/// CSV export: header `rho,v,delta,b,psi,real_mask`, one row per grid
/// point in row-major (ρ outer, v inner) order, floats at 17 significant
/// digits, LF line endings.
pub fn write_metric_csv(out: &mut dyn io::Write, data: &MetricData) -> io::Result<()> {
    writeln!(out, "rho,v,delta,b,psi,real_mask")?;
    for i in 0..data.grid.nrho {
        for j in 0..data.grid.nv {
            let p = data.grid.idx(i, j);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                data.grid.rho(i),
                data.grid.v(j),
                data.delta[p],
                data.b_field[p],
                data.psi[p],
                data.real_mask[p]
            )?;
        }
    }
    Ok(())
}
