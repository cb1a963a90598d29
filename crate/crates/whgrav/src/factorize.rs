//! Canonical solutions from monodromy data, and the operations that build
//! new solutions from old: meromorphic deformations and the Abelian
//! multiply/invert structure on diagonal solutions over a common contour.
//!
//! Each diagonal channel `f(ω)` of the monodromy, pulled back to the
//! contour through the spectral relation, factorizes canonically as
//! `f(ω(τ)) = f₋(τ) · M · X(τ)` with `X(0) = 1` and `f₋(∞) = 1`; the pair
//! `(M, X)` is the solution data at the base point. Three backends realize
//! the factorization, dispatched on the channel's shape:
//!
//! * **Rational zero/pole products** for power channels `(ω − a)^N`. The
//!   spectral relation factorizes as `ω − a = (−λρ/2τ)(τ − φ)(τ − φ̃)`, so
//!   `M = (λρ τ_out/2)^N` and `X = ((τ − τ_out)/(−τ_out))^N` exactly, where
//!   `τ_out` is whichever root is assigned to the outside.
//! * **Exact partial fractions** for `exp`-channels with rational exponent.
//!   The pulled-back exponent decomposes over the root pairs `q` of every
//!   ω-pole `p` (residue `r`) as `Σ_q A_q/(τ − q)` with
//!   `A_q = −2 r q² / (λρ (q² + λ))`; the plus projection keeps the
//!   outside-root terms and `log M = −Σ_{q outside} A_q/q`.
//! * **Contour quadrature** on the closed-form exponent, or on an unwrapped
//!   logarithm when no single-valued exponent exists, for everything else.
//!
//! Root assignment is geometric by default (each root pair splits one
//! inside, one outside, because the contour is `i_λ`-invariant and the two
//! roots are involution images of each other). A declared
//! [`RootPlacement`] overrides geometry and analytically continues the
//! solution family into parameter regions where the preferred root has
//! crossed the contour; every verified identity is algebraic in the root
//! assignment, so the continued solutions satisfy them verbatim.

use crate::cauchy::{
    scalar_canonical_factorization, scalar_canonical_factorization_from_log, BoundarySamples,
    ContinuousLog, ScalarFactorization,
};
use crate::contour::{Contour, ContourSpec, Lambda, PointLocation};
use crate::error::{Error, Result};
use crate::monodromy::{validate_on_contour, ChannelExpr, MonodromyDoc};
use crate::spectral::{spectral_map, spectral_roots, RootPair, WeylPoint};
use crate::C;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// How a channel's factorization was computed. Ordered by cost, cheapest
/// first, so combining channels can keep the costliest backend as the label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    RationalZeroPole,
    PartialFraction,
    QuadratureCauchy,
}

/// Assignment of each spectral root pair to the inside/outside of the
/// contour.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootPlacement {
    /// Locate the principal root geometrically (the other root then sits on
    /// the opposite side automatically).
    #[default]
    Geometric,
    /// Declare the principal root `φ` inside regardless of geometry.
    PhiInside,
    /// Declare the companion root `φ̃ = −λ/φ` inside regardless of geometry.
    PhiTildeInside,
}

impl std::str::FromStr for RootPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(RootPlacement::Geometric),
            "phi-inside" => Ok(RootPlacement::PhiInside),
            "phi-tilde-inside" => Ok(RootPlacement::PhiTildeInside),
            other => Err(Error::Config(format!(
                "unknown root placement {other:?}; expected geometric, phi-inside, or phi-tilde-inside"
            ))),
        }
    }
}

/// Split a root pair as `(inside, outside)` under the given placement.
/// A root on the contour itself can be assigned to neither side.
pub fn select_roots(
    placement: RootPlacement,
    contour: &Contour,
    pair: &RootPair,
) -> Result<(C, C)> {
    // A root inside the discretization collar can be assigned to neither
    // side: the factors would carry a zero or pole the quadrature cannot
    // separate from the contour. Refused regardless of placement.
    for root in [pair.phi, pair.phi_tilde] {
        if contour.distance_to(root) < contour.collar() {
            return Err(Error::RootOnContour { root });
        }
    }
    match placement {
        RootPlacement::Geometric => match contour.locate(pair.phi) {
            PointLocation::Inside => Ok((pair.phi, pair.phi_tilde)),
            PointLocation::Outside => Ok((pair.phi_tilde, pair.phi)),
            PointLocation::OnContour => Err(Error::RootOnContour { root: pair.phi }),
        },
        RootPlacement::PhiInside | RootPlacement::PhiTildeInside => {
            if placement == RootPlacement::PhiInside {
                Ok((pair.phi, pair.phi_tilde))
            } else {
                Ok((pair.phi_tilde, pair.phi))
            }
        }
    }
}

/// The [`select_roots`] rule as a reusable closure over one contour.
pub fn root_selector(
    placement: RootPlacement,
    contour: &Contour,
) -> impl Fn(&RootPair) -> Result<(C, C)> + '_ {
    move |pair| select_roots(placement, contour, pair)
}

/// One term of a pulled-back partial-fraction exponent.
#[derive(Clone, Copy, Debug)]
pub struct PartialFractionTerm {
    /// The τ-plane pole `q` (a spectral root).
    pub root: C,
    /// Its residue `A_q`.
    pub residue: C,
    /// Whether `q` was assigned to the inside of the contour.
    pub inside: bool,
}

/// Exact decomposition `g(ω(τ)) = Σ_q A_q/(τ − q)` of a rational exponent,
/// split by root placement.
#[derive(Clone, Debug)]
pub struct PartialFractionSplit {
    pub terms: Vec<PartialFractionTerm>,
    /// `(P⁺ g∘ω)(0) = −Σ_{q outside} A_q/q`, i.e. `log M`.
    pub plus_at_zero: C,
}

impl PartialFractionSplit {
    /// The full pulled-back exponent at `τ`.
    pub fn exponent_at(&self, tau: C) -> C {
        self.terms.iter().map(|t| t.residue / (tau - t.root)).sum()
    }

    /// The normalized plus part `P⁺(g∘ω)(τ) − (P⁺ g∘ω)(0) = log X(τ)`.
    pub fn plus_log_at(&self, tau: C) -> C {
        self.terms
            .iter()
            .filter(|t| !t.inside)
            .map(|t| t.residue * (1.0 / (tau - t.root) + 1.0 / t.root))
            .sum()
    }
}

/// Decompose the pullback of a rational exponent with ω-plane poles
/// `(p, r)` into τ-plane partial fractions over the spectral root pairs,
/// assigning each pair through `selector`. Every pole contributes both
/// roots; because the root product is `−λ`, the full sum vanishes at
/// `τ = 0` and `τ = ∞`, which is what makes the split exact.
pub fn partial_fraction_projection<S>(
    lambda: Lambda,
    point: &WeylPoint,
    omega_poles: &[(C, C)],
    selector: S,
) -> Result<PartialFractionSplit>
where
    S: Fn(&RootPair) -> Result<(C, C)>,
{
    let l = lambda.sign();
    let mut terms = Vec::with_capacity(2 * omega_poles.len());
    let mut plus_at_zero = C::new(0.0, 0.0);
    for &(p, r) in omega_poles {
        let pair = spectral_roots(lambda, point, p)?;
        let (inside, outside) = selector(&pair)?;
        for (q, is_inside) in [(inside, true), (outside, false)] {
            // A_q = r / ω'(q) with ω'(τ) = −(λρ/2)(τ² + λ)/τ².
            let a = -2.0 * r * q * q / (l * point.rho * (q * q + l));
            if !is_inside {
                plus_at_zero -= a / q;
            }
            terms.push(PartialFractionTerm {
                root: q,
                residue: a,
                inside: is_inside,
            });
        }
    }
    Ok(PartialFractionSplit {
        terms,
        plus_at_zero,
    })
}

/// The generating function `X(τ)` of one channel, in whatever closed or
/// sampled form the backend produced. All variants satisfy `X(0) = 1`.
#[derive(Clone)]
pub enum XFactor {
    /// The constant 1.
    One,
    /// `Π ((τ − z)/(−z))^m` over `(z, m)` pairs.
    ZeroPole(Vec<(C, i32)>),
    /// `exp Σ r (1/(τ − q) + 1/q)` over `(q, r)` pairs.
    ExpRational(Vec<(C, C)>),
    /// `exp[P⁺ log f(τ) − (P⁺ log f)(0)]` by contour quadrature.
    Quadrature(Arc<ScalarFactorization>),
    /// Reciprocal of an inner factor.
    Recip(Box<XFactor>),
    /// Product of factors.
    Product(Vec<XFactor>),
}

impl std::fmt::Debug for XFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            XFactor::One => write!(f, "One"),
            XFactor::ZeroPole(v) => f.debug_tuple("ZeroPole").field(v).finish(),
            XFactor::ExpRational(v) => f.debug_tuple("ExpRational").field(v).finish(),
            XFactor::Quadrature(q) => {
                write!(f, "Quadrature({} nodes)", q.contour().node_count())
            }
            XFactor::Recip(x) => f.debug_tuple("Recip").field(x).finish(),
            XFactor::Product(v) => f.debug_tuple("Product").field(v).finish(),
        }
    }
}

fn merge_keyed<V: Copy>(acc: &mut Vec<(C, V)>, key: C, value: V, add: impl Fn(V, V) -> V) {
    if let Some(slot) = acc
        .iter_mut()
        .find(|(k, _)| k.re.to_bits() == key.re.to_bits() && k.im.to_bits() == key.im.to_bits())
    {
        slot.1 = add(slot.1, value);
    } else {
        acc.push((key, value));
    }
}

impl XFactor {
    /// Evaluate `X(τ)`. Quadrature-backed factors refuse points inside the
    /// contour's collar (except the nodes themselves, which use the
    /// regularized boundary values).
    pub fn eval(&self, tau: C) -> Result<C> {
        Ok(match self {
            XFactor::One => C::new(1.0, 0.0),
            XFactor::ZeroPole(pairs) => {
                let mut acc = C::new(1.0, 0.0);
                for &(z, m) in pairs {
                    acc *= ((tau - z) / (-z)).powi(m);
                }
                acc
            }
            XFactor::ExpRational(terms) => {
                let mut s = C::new(0.0, 0.0);
                for &(q, r) in terms {
                    s += r * (1.0 / (tau - q) + 1.0 / q);
                }
                s.exp()
            }
            XFactor::Quadrature(fact) => fact.plus_at(tau)?,
            XFactor::Recip(x) => x.eval(tau)?.inv(),
            XFactor::Product(fs) => {
                let mut acc = C::new(1.0, 0.0);
                for f in fs {
                    acc *= f.eval(tau)?;
                }
                acc
            }
        })
    }

    /// `d/dτ log X` at `τ`. For quadrature factors `τ` must be strictly
    /// inside the contour, beyond the collar.
    pub fn log_deriv(&self, tau: C) -> Result<C> {
        Ok(match self {
            XFactor::One => C::new(0.0, 0.0),
            XFactor::ZeroPole(pairs) => {
                let mut s = C::new(0.0, 0.0);
                for &(z, m) in pairs {
                    s += m as f64 / (tau - z);
                }
                s
            }
            XFactor::ExpRational(terms) => {
                let mut s = C::new(0.0, 0.0);
                for &(q, r) in terms {
                    let d = tau - q;
                    s -= r / (d * d);
                }
                s
            }
            XFactor::Quadrature(fact) => fact.plus_log_derivative_at(tau)?,
            XFactor::Recip(x) => -x.log_deriv(tau)?,
            XFactor::Product(fs) => {
                let mut s = C::new(0.0, 0.0);
                for f in fs {
                    s += f.log_deriv(tau)?;
                }
                s
            }
        })
    }

    /// Taylor coefficients `[t_1, …, t_m]` of `log X(τ) = Σ_{j≥1} t_j τ^j`
    /// at the origin.
    pub fn log_taylor(&self, m_max: usize) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); m_max];
        self.add_log_taylor(&mut out, 1.0);
        out
    }

    fn add_log_taylor(&self, out: &mut [C], sign: f64) {
        match self {
            XFactor::One => {}
            XFactor::ZeroPole(pairs) => {
                // log(1 − τ/z) = −Σ_j τ^j/(j z^j)
                for &(z, m) in pairs {
                    let mut zj = z;
                    for (j, slot) in out.iter_mut().enumerate() {
                        *slot -= sign * m as f64 / ((j + 1) as f64 * zj);
                        zj *= z;
                    }
                }
            }
            XFactor::ExpRational(terms) => {
                // r(1/(τ−q) + 1/q) = −r Σ_{j≥1} τ^j/q^{j+1}
                for &(q, r) in terms {
                    let mut qj = q * q;
                    for slot in out.iter_mut() {
                        *slot -= sign * r / qj;
                        qj *= q;
                    }
                }
            }
            XFactor::Quadrature(fact) => {
                let t = fact.plus_log_taylor(out.len());
                for (j, slot) in out.iter_mut().enumerate() {
                    *slot += sign * t[j + 1];
                }
            }
            XFactor::Recip(x) => x.add_log_taylor(out, -sign),
            XFactor::Product(fs) => {
                for f in fs {
                    f.add_log_taylor(out, sign);
                }
            }
        }
    }

    /// Taylor coefficients `[x_0 = 1, x_1, …, x_m]` of `X` at the origin,
    /// from `log X` by the exponential recurrence.
    pub fn taylor(&self, m_max: usize) -> Vec<C> {
        series_exp(&self.log_taylor(m_max))
    }

    /// Structurally simplify: flatten products, cancel matched zero/pole and
    /// rational-exponent data, push reciprocals into closed forms.
    pub fn simplified(self) -> XFactor {
        match self {
            XFactor::Recip(inner) => match inner.simplified() {
                XFactor::One => XFactor::One,
                XFactor::ZeroPole(v) => {
                    XFactor::ZeroPole(v.into_iter().map(|(z, m)| (z, -m)).collect())
                }
                XFactor::ExpRational(v) => {
                    XFactor::ExpRational(v.into_iter().map(|(q, r)| (q, -r)).collect())
                }
                XFactor::Product(fs) => XFactor::Product(
                    fs.into_iter()
                        .map(|f| XFactor::Recip(Box::new(f)))
                        .collect(),
                )
                .simplified(),
                other => XFactor::Recip(Box::new(other)),
            },
            XFactor::Product(fs) => {
                let mut zero_pole: Vec<(C, i32)> = Vec::new();
                let mut exp_rational: Vec<(C, C)> = Vec::new();
                let mut rest: Vec<XFactor> = Vec::new();
                let mut stack: Vec<XFactor> = fs.into_iter().rev().collect();
                while let Some(f) = stack.pop() {
                    match f.simplified() {
                        XFactor::One => {}
                        XFactor::ZeroPole(v) => {
                            for (z, m) in v {
                                merge_keyed(&mut zero_pole, z, m, |a, b| a + b);
                            }
                        }
                        XFactor::ExpRational(v) => {
                            for (q, r) in v {
                                merge_keyed(&mut exp_rational, q, r, |a, b| a + b);
                            }
                        }
                        XFactor::Product(inner) => stack.extend(inner.into_iter().rev()),
                        other => rest.push(other),
                    }
                }
                zero_pole.retain(|&(_, m)| m != 0);
                exp_rational.retain(|&(_, r)| r != C::new(0.0, 0.0));
                if !exp_rational.is_empty() {
                    rest.insert(0, XFactor::ExpRational(exp_rational));
                }
                if !zero_pole.is_empty() {
                    rest.insert(0, XFactor::ZeroPole(zero_pole));
                }
                match rest.len() {
                    0 => XFactor::One,
                    1 => rest.pop().expect("one element"),
                    _ => XFactor::Product(rest),
                }
            }
            other => other,
        }
    }
}

/// Exponentiate a Taylor series: given `[t_1, …, t_m]` of `log X`, return
/// `[x_0, …, x_m]` of `X` via `x_k = (1/k) Σ_{j=1..k} j t_j x_{k−j}`.
fn series_exp(t: &[C]) -> Vec<C> {
    let m = t.len();
    let mut x = vec![C::new(0.0, 0.0); m + 1];
    x[0] = C::new(1.0, 0.0);
    for k in 1..=m {
        let mut s = C::new(0.0, 0.0);
        for j in 1..=k {
            s += t[j - 1] * j as f64 * x[k - j];
        }
        x[k] = s / k as f64;
    }
    x
}

/// One factorized channel: the field value `M`, a smooth branch of its
/// logarithm, and the generating function `X`.
#[derive(Clone, Debug)]
pub struct ChannelSolution {
    pub m: C,
    pub log_m: C,
    pub x: XFactor,
    pub backend: Backend,
}

/// Options controlling [`canonical_solve_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveOptions {
    pub placement: RootPlacement,
    /// Route every channel through contour quadrature, ignoring rational
    /// structure. Quadrature always factorizes the geometric assignment;
    /// use it to cross-check the closed-form backends where the placement
    /// is geometric.
    pub force_quadrature: bool,
}

/// A solution of the reduced field equations at one base point: the
/// per-channel `(M, X)` data over a shared contour, plus everything needed
/// to re-solve at other points (monodromy, placement, deformation).
#[derive(Clone)]
pub struct CanonicalSolution {
    point: WeylPoint,
    lambda: Lambda,
    contour: Arc<Contour>,
    channels: Vec<ChannelSolution>,
    doc: MonodromyDoc,
    options: SolveOptions,
    deformation: Option<DeformationSpec>,
}

impl std::fmt::Debug for CanonicalSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CanonicalSolution")
            .field("point", &self.point)
            .field("lambda", &self.lambda)
            .field("nodes", &self.contour.node_count())
            .field("channels", &self.channels)
            .field("placement", &self.options.placement)
            .field("deformed", &self.deformation.is_some())
            .finish()
    }
}

/// Solve the factorization problem with geometric root placement.
pub fn canonical_solve(
    doc: &MonodromyDoc,
    contour: &Arc<Contour>,
    point: &WeylPoint,
) -> Result<CanonicalSolution> {
    canonical_solve_with(doc, contour, point, SolveOptions::default())
}

/// Solve the factorization problem with explicit options.
pub fn canonical_solve_with(
    doc: &MonodromyDoc,
    contour: &Arc<Contour>,
    point: &WeylPoint,
    options: SolveOptions,
) -> Result<CanonicalSolution> {
    validate_on_contour(doc, contour, point)?;
    let channels = doc
        .channels
        .iter()
        .map(|expr| {
            solve_channel(
                expr,
                doc.lambda,
                contour,
                point,
                options.placement,
                options.force_quadrature,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CanonicalSolution {
        point: *point,
        lambda: doc.lambda,
        contour: contour.clone(),
        channels,
        doc: doc.clone(),
        options,
        deformation: None,
    })
}

fn solve_channel(
    expr: &ChannelExpr,
    lambda: Lambda,
    contour: &Arc<Contour>,
    point: &WeylPoint,
    placement: RootPlacement,
    force_quadrature: bool,
) -> Result<ChannelSolution> {
    if force_quadrature {
        return quadrature_channel(expr, lambda, contour, point);
    }
    if let ChannelExpr::Monomial { a, n } = expr {
        return monomial_channel(*a, *n, lambda, contour, point, placement);
    }
    if let Some(poles) = expr.rational_exponent_poles() {
        return partial_fraction_channel(&poles, lambda, contour, point, placement);
    }
    if expr.has_closed_exponent() {
        return quadrature_channel(expr, lambda, contour, point);
    }
    if let ChannelExpr::Product { factors } = expr {
        // Mixed products (powers times transcendental exponentials):
        // factorize factor by factor; the projection is linear in the log,
        // so constants multiply and plus factors multiply.
        let mut m = C::new(1.0, 0.0);
        let mut log_m = C::new(0.0, 0.0);
        let mut xs = Vec::with_capacity(factors.len());
        let mut backend = Backend::RationalZeroPole;
        for f in factors {
            let sol = solve_channel(f, lambda, contour, point, placement, false)?;
            m *= sol.m;
            log_m += sol.log_m;
            backend = backend.max(sol.backend);
            xs.push(sol.x);
        }
        return Ok(ChannelSolution {
            m,
            log_m,
            x: XFactor::Product(xs).simplified(),
            backend,
        });
    }
    quadrature_channel(expr, lambda, contour, point)
}

fn monomial_channel(
    a: f64,
    n: i32,
    lambda: Lambda,
    contour: &Arc<Contour>,
    point: &WeylPoint,
    placement: RootPlacement,
) -> Result<ChannelSolution> {
    let pair = spectral_roots(lambda, point, C::from(a))?;
    let (_, outside) = select_roots(placement, contour, &pair)?;
    let c = 0.5 * lambda.sign() * point.rho * outside;
    Ok(ChannelSolution {
        m: c.powi(n),
        log_m: c.ln() * n as f64,
        x: XFactor::ZeroPole(vec![(outside, n)]),
        backend: Backend::RationalZeroPole,
    })
}

fn partial_fraction_channel(
    omega_poles: &[(C, C)],
    lambda: Lambda,
    contour: &Arc<Contour>,
    point: &WeylPoint,
    placement: RootPlacement,
) -> Result<ChannelSolution> {
    let split = partial_fraction_projection(
        lambda,
        point,
        omega_poles,
        root_selector(placement, contour),
    )?;
    let outside_terms: Vec<(C, C)> = split
        .terms
        .iter()
        .filter(|t| !t.inside)
        .map(|t| (t.root, t.residue))
        .collect();
    Ok(ChannelSolution {
        m: split.plus_at_zero.exp(),
        log_m: split.plus_at_zero,
        x: XFactor::ExpRational(outside_terms),
        backend: Backend::PartialFraction,
    })
}

fn quadrature_channel(
    expr: &ChannelExpr,
    lambda: Lambda,
    contour: &Arc<Contour>,
    point: &WeylPoint,
) -> Result<ChannelSolution> {
    let fact = if expr.has_closed_exponent() {
        let e = expr.clone();
        let p = *point;
        let samples = BoundarySamples::from_fn(contour.clone(), move |tau| {
            e.exponent(spectral_map(lambda, &p, tau))
                .expect("closed exponent checked before dispatch")
        });
        scalar_canonical_factorization_from_log(ContinuousLog::from_exponent(samples))?
    } else {
        let e = expr.clone();
        let p = *point;
        let samples = BoundarySamples::from_fn(contour.clone(), move |tau| {
            e.evaluate(spectral_map(lambda, &p, tau))
        });
        scalar_canonical_factorization(&samples)?
    };
    let log_m = fact.c0();
    Ok(ChannelSolution {
        m: log_m.exp(),
        log_m,
        x: XFactor::Quadrature(Arc::new(fact)),
        backend: Backend::QuadratureCauchy,
    })
}

impl CanonicalSolution {
    pub fn point(&self) -> WeylPoint {
        self.point
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn contour(&self) -> &Arc<Contour> {
        &self.contour
    }

    pub fn channels(&self) -> &[ChannelSolution] {
        &self.channels
    }

    pub fn monodromy(&self) -> &MonodromyDoc {
        &self.doc
    }

    pub fn options(&self) -> SolveOptions {
        self.options
    }

    pub fn deformation(&self) -> Option<&DeformationSpec> {
        self.deformation.as_ref()
    }

    #[cfg(test)]
    pub(crate) fn set_channels_for_test(&mut self, channels: Vec<ChannelSolution>) {
        self.channels = channels;
    }

    /// Field values `M_j` per channel.
    pub fn m_values(&self) -> Vec<C> {
        self.channels.iter().map(|c| c.m).collect()
    }

    /// Smooth log branches of the field values.
    pub fn log_m_values(&self) -> Vec<C> {
        self.channels.iter().map(|c| c.log_m).collect()
    }

    /// `X_j(τ)` for every channel.
    pub fn x_at(&self, tau: C) -> Result<Vec<C>> {
        self.channels.iter().map(|c| c.x.eval(tau)).collect()
    }

    /// `|Π_j M_j − 1|`: the determinant constraint at this point.
    pub fn det_deviation(&self) -> f64 {
        let det: C = self.channels.iter().map(|c| c.m).product();
        (det - 1.0).norm()
    }

    /// Re-solve the same problem (monodromy, options, deformation) at a
    /// different base point.
    pub fn resolve_at(&self, point: &WeylPoint) -> Result<CanonicalSolution> {
        let base = canonical_solve_with(&self.doc, &self.contour, point, self.options)?;
        match &self.deformation {
            Some(spec) => deform_solution(&base, spec),
            None => Ok(base),
        }
    }

    /// Serialize to a self-contained document (re-solvable, with `taylor`
    /// coefficients of every `X` for downstream consumers).
    pub fn to_document(&self, taylor_terms: usize) -> SolutionDocument {
        SolutionDocument {
            lambda: self.lambda,
            rho: self.point.rho,
            v: self.point.v,
            contour: self.contour.to_spec(),
            placement: self.options.placement,
            monodromy: self.doc.clone(),
            deformation: self.deformation.clone(),
            channels: self
                .channels
                .iter()
                .map(|c| ChannelDocument {
                    backend: c.backend,
                    m: c.m,
                    log_m: c.log_m,
                    x_taylor: c.x.taylor(taylor_terms),
                })
                .collect(),
        }
    }
}

/// A zero/pole deformation point: at the spectral value `omega`, multiply
/// the channel's `X` by the unimodular factor
/// `[(τ_out/τ_in)(τ − τ_in)/(τ − τ_out)]^multiplicity` and scale `M` by
/// `(τ_in/τ_out)^multiplicity`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct DeformationPoint {
    pub omega: C,
    pub multiplicity: i32,
}

/// A meromorphic deformation: zero/pole points per channel. Valid only if
/// for every distinct `omega` the multiplicities summed across channels
/// vanish, which keeps the channel product (the determinant) at 1.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct DeformationSpec {
    pub per_channel: Vec<Vec<DeformationPoint>>,
}

impl DeformationSpec {
    pub fn validate(&self, nchannels: usize) -> Result<()> {
        if self.per_channel.len() != nchannels {
            return Err(Error::Config(format!(
                "deformation spec has {} channels, solution has {nchannels}",
                self.per_channel.len()
            )));
        }
        let mut sums: Vec<(C, i64)> = Vec::new();
        for points in &self.per_channel {
            for dp in points {
                if !dp.omega.re.is_finite() || !dp.omega.im.is_finite() {
                    return Err(Error::Config("deformation point has non-finite ω".into()));
                }
                if dp.multiplicity == 0 {
                    return Err(Error::Config(
                        "deformation point has zero multiplicity".into(),
                    ));
                }
                merge_keyed(&mut sums, dp.omega, dp.multiplicity as i64, |a, b| a + b);
            }
        }
        for (omega, sum) in sums {
            if sum != 0 {
                return Err(Error::Config(format!(
                    "deformation multiplicities at ω = {omega} sum to {sum}; they must \
                     cancel across channels to preserve the determinant"
                )));
            }
        }
        Ok(())
    }

    /// The spec of the inverse solution.
    pub fn negated(&self) -> DeformationSpec {
        DeformationSpec {
            per_channel: self
                .per_channel
                .iter()
                .map(|points| {
                    points
                        .iter()
                        .map(|dp| DeformationPoint {
                            omega: dp.omega,
                            multiplicity: -dp.multiplicity,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Concatenate two specs channel by channel.
    pub fn merged(&self, other: &DeformationSpec) -> Result<DeformationSpec> {
        if self.per_channel.len() != other.per_channel.len() {
            return Err(Error::Config(
                "cannot merge deformation specs with different channel counts".into(),
            ));
        }
        Ok(DeformationSpec {
            per_channel: self
                .per_channel
                .iter()
                .zip(&other.per_channel)
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect(),
        })
    }
}

/// The simplest valid deformation of a two-channel solution: multiplicity
/// `+m` on the first channel and `−m` on the second, at the same `omega`.
pub fn unimodular_pair(omega: C, multiplicity: i32) -> DeformationSpec {
    DeformationSpec {
        per_channel: vec![
            vec![DeformationPoint {
                omega,
                multiplicity,
            }],
            vec![DeformationPoint {
                omega,
                multiplicity: -multiplicity,
            }],
        ],
    }
}

/// Apply a meromorphic deformation. Each deformation point multiplies the
/// channel's `X` by a rational factor `R` with `R(0) = 1` whose zero sits
/// at the inside root and whose pole sits at the outside root of its
/// `omega`; `M` picks up the constant `(τ_in/τ_out)^m`. The monodromy
/// document is untouched: `R(τ) R(i_λ τ)` is the constant `τ_out/τ_in`, so
/// the deformation factors cancel out of the reconstruction of `𝓜` and the
/// deformed solution realizes the *same* monodromy.
pub fn deform_solution(
    solution: &CanonicalSolution,
    spec: &DeformationSpec,
) -> Result<CanonicalSolution> {
    spec.validate(solution.channels.len())?;
    let mut out = solution.clone();
    for (channel, points) in out.channels.iter_mut().zip(&spec.per_channel) {
        for dp in points {
            let pair = spectral_roots(out.lambda, &out.point, dp.omega)?;
            let (inside, outside) = select_roots(out.options.placement, &out.contour, &pair)?;
            let zp =
                XFactor::ZeroPole(vec![(inside, dp.multiplicity), (outside, -dp.multiplicity)]);
            let prev = std::mem::replace(&mut channel.x, XFactor::One);
            channel.x = XFactor::Product(vec![prev, zp]).simplified();
            let ratio = inside / outside;
            channel.m *= ratio.powi(dp.multiplicity);
            channel.log_m += ratio.ln() * dp.multiplicity as f64;
        }
    }
    out.deformation = Some(match &solution.deformation {
        None => spec.clone(),
        Some(existing) => existing.merged(spec)?,
    });
    Ok(out)
}

/// Channelwise inverse: `M → M⁻¹`, `X → X⁻¹`, monodromy inverted.
pub fn invert_solution(solution: &CanonicalSolution) -> CanonicalSolution {
    CanonicalSolution {
        point: solution.point,
        lambda: solution.lambda,
        contour: solution.contour.clone(),
        channels: solution
            .channels
            .iter()
            .map(|c| ChannelSolution {
                m: c.m.inv(),
                log_m: -c.log_m,
                x: XFactor::Recip(Box::new(c.x.clone())).simplified(),
                backend: c.backend,
            })
            .collect(),
        doc: solution.doc.inverse(),
        options: solution.options,
        deformation: solution.deformation.as_ref().map(DeformationSpec::negated),
    }
}

/// Channelwise product of two solutions. Requires the *identical* contour
/// object (same `Arc`), the same base point, and the same root placement,
/// so that all quadrature data is node-for-node compatible.
pub fn multiply_solutions(
    a: &CanonicalSolution,
    b: &CanonicalSolution,
) -> Result<CanonicalSolution> {
    if !Arc::ptr_eq(&a.contour, &b.contour) {
        return Err(Error::ContourMismatch);
    }
    if a.point.rho != b.point.rho || a.point.v != b.point.v {
        return Err(Error::PointMismatch {
            rho_a: a.point.rho,
            v_a: a.point.v,
            rho_b: b.point.rho,
            v_b: b.point.v,
        });
    }
    if a.options.placement != b.options.placement {
        return Err(Error::Precondition(
            "solutions use different root placements and cannot be multiplied".into(),
        ));
    }
    let doc = a.doc.product(&b.doc)?;
    let channels = a
        .channels
        .iter()
        .zip(&b.channels)
        .map(|(ca, cb)| ChannelSolution {
            m: ca.m * cb.m,
            log_m: ca.log_m + cb.log_m,
            x: XFactor::Product(vec![ca.x.clone(), cb.x.clone()]).simplified(),
            backend: ca.backend.max(cb.backend),
        })
        .collect();
    let deformation = match (&a.deformation, &b.deformation) {
        (None, None) => None,
        (Some(d), None) | (None, Some(d)) => Some(d.clone()),
        (Some(da), Some(db)) => Some(da.merged(db)?),
    };
    Ok(CanonicalSolution {
        point: a.point,
        lambda: a.lambda,
        contour: a.contour.clone(),
        channels,
        doc,
        options: a.options,
        deformation,
    })
}

/// JSON form of one factorized channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelDocument {
    pub backend: Backend,
    pub m: C,
    pub log_m: C,
    /// Taylor coefficients `x_0, x_1, …` of `X` at `τ = 0`.
    pub x_taylor: Vec<C>,
}

/// Self-contained JSON form of a solution: everything needed to rebuild it
/// (monodromy, contour profile, placement, deformation) plus the computed
/// channel data for consumers and for integrity checking.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub lambda: Lambda,
    pub rho: f64,
    pub v: f64,
    pub contour: ContourSpec,
    pub placement: RootPlacement,
    pub monodromy: MonodromyDoc,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub deformation: Option<DeformationSpec>,
    pub channels: Vec<ChannelDocument>,
}

/// Integrity tolerance when re-solving a stored document.
const DOCUMENT_TOL: f64 = 1e-9;

impl SolutionDocument {
    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution document serializes")
    }

    /// Rebuild the solution on a caller-provided contour (which must match
    /// the stored profile; sharing one contour across documents is how
    /// group operations on stored solutions become possible).
    pub fn solve_on(&self, contour: &Arc<Contour>) -> Result<CanonicalSolution> {
        if contour.to_spec() != self.contour {
            return Err(Error::Precondition(
                "provided contour does not match the document's contour profile".into(),
            ));
        }
        if self.lambda != self.monodromy.lambda {
            return Err(Error::Config(
                "document lambda disagrees with its monodromy lambda".into(),
            ));
        }
        let point = WeylPoint::new(self.rho, self.v)?;
        let options = SolveOptions {
            placement: self.placement,
            force_quadrature: false,
        };
        let mut solution = canonical_solve_with(&self.monodromy, contour, &point, options)?;
        if let Some(spec) = &self.deformation {
            solution = deform_solution(&solution, spec)?;
        }
        if solution.channels.len() != self.channels.len() {
            return Err(Error::Config(format!(
                "document has {} channel records for {} monodromy channels",
                self.channels.len(),
                solution.channels.len()
            )));
        }
        for (j, (got, stored)) in solution.channels.iter().zip(&self.channels).enumerate() {
            let dev = (got.m - stored.m).norm() / (1.0 + stored.m.norm());
            if dev > DOCUMENT_TOL {
                return Err(Error::Precondition(format!(
                    "stored M in channel {j} deviates from its recomputation by {dev:.3e}; \
                     the document is stale or corrupted"
                )));
            }
        }
        Ok(solution)
    }

    /// Rebuild the solution on a freshly constructed contour.
    pub fn solve(&self) -> Result<CanonicalSolution> {
        let contour = Contour::from_spec(&self.contour)?;
        self.solve_on(&contour)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::Bump;
    use crate::monodromy::{Family, Term};
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn circle(n: usize) -> Arc<Contour> {
        Contour::unit_circle(Lambda::Minus, n).unwrap()
    }

    const POWER_CENTER: f64 = 1.1125;

    fn reference_point() -> WeylPoint {
        WeylPoint::new(1.0, 0.0).unwrap()
    }

    fn phi_inside() -> SolveOptions {
        SolveOptions {
            placement: RootPlacement::PhiInside,
            force_quadrature: false,
        }
    }

    #[test]
    fn power_channel_reference_values() {
        // At (ρ, v) = (1, 0) with center 1.1125 the root pair is exactly
        // (1.6, 0.625): the discriminant 1.1125² − 1 = 0.4875².
        let doc = Family::Kasner {
            a: POWER_CENTER,
            n: 2,
        }
        .document();
        let contour = circle(256);
        let sol = canonical_solve_with(&doc, &contour, &reference_point(), phi_inside()).unwrap();
        let pair =
            spectral_roots(Lambda::Minus, &reference_point(), C::from(POWER_CENTER)).unwrap();
        assert!((pair.phi - 1.6).norm() < 1e-14);
        assert!((pair.phi_tilde - 0.625).norm() < 1e-14);
        // With φ declared inside, the outside root is 0.625 and
        // M = (λρ τ_out/2)² = (−0.3125)² exactly.
        assert!((sol.channels()[0].m - 0.09765625).norm() < 1e-15);
        assert!((sol.channels()[1].m - 1.0 / 0.09765625).norm() < 1e-12);
        assert_eq!(sol.channels()[0].backend, Backend::RationalZeroPole);
        for x in sol.x_at(C::new(0.0, 0.0)).unwrap() {
            assert_eq!(x, C::new(1.0, 0.0));
        }
        assert!(sol.det_deviation() < 1e-14);
    }

    #[test]
    fn deformation_merges_into_the_power_solution() {
        let doc = Family::Kasner {
            a: POWER_CENTER,
            n: 2,
        }
        .document();
        let contour = circle(256);
        let sol = canonical_solve_with(&doc, &contour, &reference_point(), phi_inside()).unwrap();
        let deformed = deform_solution(&sol, &unimodular_pair(C::from(POWER_CENTER), 1)).unwrap();
        // M picks up (τ_in/τ_out) = 1.6/0.625: (ρ/2)² at ρ = 1.
        assert!((deformed.channels()[0].m - 0.25).norm() < 1e-12);
        assert!((deformed.channels()[1].m - 4.0).norm() < 1e-12);
        // X merges into a single zero/pole list with both roots to power 1.
        match &deformed.channels()[0].x {
            XFactor::ZeroPole(pairs) => {
                assert_eq!(pairs.len(), 2);
                let mut mults: Vec<i32> = pairs.iter().map(|&(_, m)| m).collect();
                mults.sort_unstable();
                assert_eq!(mults, vec![1, 1]);
            }
            other => panic!("expected merged zero/pole factor, got {other:?}"),
        }
        // The monodromy document is untouched by the deformation.
        assert_eq!(deformed.monodromy(), sol.monodromy());
        // R-factor value at the origin is exactly 1, so X(0) stays 1.
        for x in deformed.x_at(C::new(0.0, 0.0)).unwrap() {
            assert_eq!(x, C::new(1.0, 0.0));
        }
    }

    #[test]
    fn quadrature_reproduces_the_cylindrical_closed_form() {
        let family = Family::EinsteinRosen {
            k: 1.0,
            a: 1.0,
            b: 0.35,
        };
        let doc = family.document();
        let contour = circle(256);
        let point = WeylPoint::new(1.3, 0.45).unwrap();
        let sol = canonical_solve(&doc, &contour, &point).unwrap();
        assert_eq!(sol.channels()[0].backend, Backend::QuadratureCauchy);
        let expect = family.log_delta(&point).exp();
        assert!(
            (sol.channels()[0].m - expect).norm() < 1e-12,
            "{} vs {expect}",
            sol.channels()[0].m
        );
        assert!((sol.channels()[0].m * sol.channels()[1].m - 1.0).norm() < 1e-13);
    }

    #[test]
    fn partial_fractions_agree_with_quadrature_for_the_pulse() {
        let family = Family::Pulse { a: 1.0, b: 0.4 };
        let doc = family.document();
        let contour = circle(256);
        let point = WeylPoint::new(1.2, -0.7).unwrap();
        let exact = canonical_solve(&doc, &contour, &point).unwrap();
        assert_eq!(exact.channels()[0].backend, Backend::PartialFraction);
        let quad = canonical_solve_with(
            &doc,
            &contour,
            &point,
            SolveOptions {
                placement: RootPlacement::Geometric,
                force_quadrature: true,
            },
        )
        .unwrap();
        assert_eq!(quad.channels()[0].backend, Backend::QuadratureCauchy);
        for j in 0..2 {
            assert!((exact.channels()[j].m - quad.channels()[j].m).norm() < 1e-11);
            assert!((exact.channels()[j].log_m - quad.channels()[j].log_m).norm() < 1e-11);
        }
        for tau in [C::new(0.2, 0.1), C::new(0.0, -0.3), C::new(0.45, 0.0)] {
            let xe = exact.x_at(tau).unwrap();
            let xq = quad.x_at(tau).unwrap();
            for j in 0..2 {
                assert!((xe[j] - xq[j]).norm() < 1e-10, "τ = {tau}, channel {j}");
            }
        }
        // And both agree with the closed form of the field value.
        let expect = family.log_delta(&point).exp();
        assert!((exact.channels()[0].m - expect).norm() < 1e-12);
    }

    #[test]
    fn power_channel_agrees_with_its_quadrature_factorization() {
        // Geometric placement at (1, 0): φ = 1.6 sits outside the circle.
        let doc = Family::Kasner {
            a: POWER_CENTER,
            n: 2,
        }
        .document();
        let contour = circle(256);
        let point = reference_point();
        let exact = canonical_solve(&doc, &contour, &point).unwrap();
        let quad = canonical_solve_with(
            &doc,
            &contour,
            &point,
            SolveOptions {
                placement: RootPlacement::Geometric,
                force_quadrature: true,
            },
        )
        .unwrap();
        for j in 0..2 {
            assert!(
                (exact.channels()[j].m - quad.channels()[j].m).norm() < 1e-10,
                "channel {j}: {} vs {}",
                exact.channels()[j].m,
                quad.channels()[j].m
            );
        }
        let tau = C::new(0.3, -0.2);
        let xe = exact.x_at(tau).unwrap();
        let xq = quad.x_at(tau).unwrap();
        for j in 0..2 {
            assert!((xe[j] - xq[j]).norm() < 1e-10);
        }
    }

    #[test]
    fn roots_on_the_contour_are_refused() {
        // At (1, 0.5) with center 1.1125 the discriminant is negative and
        // the complex roots have unit modulus: they sit exactly on the
        // circle. Equivalently the channel pole lies on the contour image,
        // which the document validation refuses before any factorization.
        let doc = Family::Kasner {
            a: POWER_CENTER,
            n: 2,
        }
        .document();
        let contour = circle(256);
        let point = WeylPoint::new(1.0, 0.5).unwrap();
        match canonical_solve(&doc, &contour, &point) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("pole"), "{msg}"),
            other => panic!("expected pole-clearance refusal, got {other:?}"),
        }
        // Just past the wall the roots are real, a hair off the circle:
        // the pole clears the image but the roots sit inside the node
        // collar, so selection refuses them under either placement.
        let near = WeylPoint::new(1.0, POWER_CENTER - 1.0008).unwrap();
        match canonical_solve(&doc, &contour, &near) {
            Err(Error::RootOnContour { .. }) => {}
            other => panic!("expected RootOnContour, got {other:?}"),
        }
        match canonical_solve_with(&doc, &contour, &near, phi_inside()) {
            Err(Error::RootOnContour { .. }) => {}
            other => panic!("expected RootOnContour, got {other:?}"),
        }
        // A contour bulged outward around the root's angle contains it:
        // geometric placement succeeds and puts φ inside.
        let bulged = Contour::deformed(
            Lambda::Minus,
            256,
            vec![Bump {
                center: 0.91166,
                width: 0.35,
                amplitude: 0.4,
            }],
        )
        .unwrap();
        let sol = canonical_solve(&doc, &bulged, &point).unwrap();
        let pair = spectral_roots(Lambda::Minus, &point, C::from(POWER_CENTER)).unwrap();
        assert_eq!(bulged.locate(pair.phi), PointLocation::Inside);
        for x in sol.x_at(C::new(0.0, 0.0)).unwrap() {
            assert_eq!(x, C::new(1.0, 0.0));
        }
    }

    #[test]
    fn group_laws_hold_over_a_shared_contour() {
        let contour = circle(256);
        let point = WeylPoint::new(1.1, 0.3).unwrap();
        let doc1 = Family::EinsteinRosen {
            k: 1.0,
            a: 1.0,
            b: 0.3,
        }
        .document();
        let doc2 = Family::EinsteinRosen {
            k: 2.0,
            a: 1.0,
            b: -0.2,
        }
        .document();
        let s1 = canonical_solve(&doc1, &contour, &point).unwrap();
        let s2 = canonical_solve(&doc2, &contour, &point).unwrap();

        // Product of solutions = solution of the product document.
        let prod = multiply_solutions(&s1, &s2).unwrap();
        let direct = canonical_solve(&doc1.product(&doc2).unwrap(), &contour, &point).unwrap();
        for j in 0..2 {
            assert!((prod.channels()[j].m - direct.channels()[j].m).norm() < 1e-12);
        }
        let tau = C::new(0.25, 0.15);
        let xp = prod.x_at(tau).unwrap();
        let xd = direct.x_at(tau).unwrap();
        for j in 0..2 {
            assert!((xp[j] - xd[j]).norm() < 1e-11);
        }

        // Inverse gives the identity solution.
        let ident = multiply_solutions(&s1, &invert_solution(&s1)).unwrap();
        for j in 0..2 {
            assert!((ident.channels()[j].m - 1.0).norm() < 1e-14);
            assert!((ident.x_at(tau).unwrap()[j] - 1.0).norm() < 1e-12);
        }

        // Associativity of the field values.
        let s3 = canonical_solve(
            &Family::Pulse { a: 1.0, b: 0.25 }.document(),
            &contour,
            &point,
        )
        .unwrap();
        let left = multiply_solutions(&multiply_solutions(&s1, &s2).unwrap(), &s3).unwrap();
        let right = multiply_solutions(&s1, &multiply_solutions(&s2, &s3).unwrap()).unwrap();
        for j in 0..2 {
            assert!((left.channels()[j].m - right.channels()[j].m).norm() < 1e-14);
        }

        // Distinct contour objects are refused even with matching profiles,
        // and so are mismatched base points.
        let other_contour = circle(256);
        let s1b = canonical_solve(&doc1, &other_contour, &point).unwrap();
        assert!(matches!(
            multiply_solutions(&s1b, &s2),
            Err(Error::ContourMismatch)
        ));
        let shifted = WeylPoint::new(1.1, 0.4).unwrap();
        let s2b = canonical_solve(&doc2, &contour, &shifted).unwrap();
        assert!(matches!(
            multiply_solutions(&s1, &s2b),
            Err(Error::PointMismatch { .. })
        ));
    }

    #[test]
    fn deformation_specs_are_validated() {
        let contour = circle(128);
        let point = WeylPoint::new(1.0, 0.0).unwrap();
        let sol = canonical_solve(
            &Family::Pulse { a: 1.0, b: 0.3 }.document(),
            &contour,
            &point,
        )
        .unwrap();
        // Unbalanced multiplicities break the determinant.
        let bad = DeformationSpec {
            per_channel: vec![
                vec![DeformationPoint {
                    omega: C::from(5.0),
                    multiplicity: 1,
                }],
                vec![],
            ],
        };
        assert!(matches!(deform_solution(&sol, &bad), Err(Error::Config(_))));
        // Channel count must match.
        let wrong_channels = DeformationSpec {
            per_channel: vec![vec![]],
        };
        assert!(matches!(
            deform_solution(&sol, &wrong_channels),
            Err(Error::Config(_))
        ));
        // Zero multiplicity is meaningless.
        let zero = DeformationSpec {
            per_channel: vec![
                vec![DeformationPoint {
                    omega: C::from(5.0),
                    multiplicity: 0,
                }],
                vec![DeformationPoint {
                    omega: C::from(5.0),
                    multiplicity: 0,
                }],
            ],
        };
        assert!(matches!(
            deform_solution(&sol, &zero),
            Err(Error::Config(_))
        ));
        // A balanced pair goes through and leaves the determinant at 1.
        let good = deform_solution(&sol, &unimodular_pair(C::from(5.0), 2)).unwrap();
        assert!(good.det_deviation() < 1e-12);
    }

    #[test]
    fn taylor_coefficients_reproduce_x() {
        let contour = circle(256);
        let point = WeylPoint::new(1.2, -0.7).unwrap();
        let solutions = vec![
            canonical_solve(
                &Family::Pulse { a: 1.0, b: 0.4 }.document(),
                &contour,
                &point,
            )
            .unwrap(),
            canonical_solve(
                &Family::EinsteinRosen {
                    k: 1.0,
                    a: 1.0,
                    b: 0.3,
                }
                .document(),
                &contour,
                &point,
            )
            .unwrap(),
            canonical_solve(
                &Family::Kasner { a: 4.0, n: 3 }.document(),
                &contour,
                &point,
            )
            .unwrap(),
        ];
        for sol in &solutions {
            for channel in sol.channels() {
                let coeffs = channel.x.taylor(24);
                assert_eq!(coeffs[0], C::new(1.0, 0.0));
                for angle in [0.0, 1.7, 4.1] {
                    let tau = C::from_polar(0.12, angle);
                    let series: C = coeffs
                        .iter()
                        .rev()
                        .fold(C::new(0.0, 0.0), |acc, c| acc * tau + c);
                    let direct = channel.x.eval(tau).unwrap();
                    assert!(
                        (series - direct).norm() < 1e-12,
                        "backend {:?}: {series} vs {direct}",
                        channel.backend
                    );
                }
            }
        }
    }

    #[test]
    fn solution_documents_roundtrip_and_detect_corruption() {
        let contour = circle(128);
        let point = WeylPoint::new(1.2, -0.7).unwrap();
        let sol = canonical_solve(
            &Family::Pulse { a: 1.0, b: 0.4 }.document(),
            &contour,
            &point,
        )
        .unwrap();
        let deformed = deform_solution(&sol, &unimodular_pair(C::from(5.0), 1)).unwrap();
        let doc = deformed.to_document(16);
        let json = doc.to_json();
        let parsed = SolutionDocument::from_json(&json).unwrap();
        let rebuilt = parsed.solve().unwrap();
        for j in 0..2 {
            assert!((rebuilt.channels()[j].m - deformed.channels()[j].m).norm() < 1e-13);
        }
        assert_eq!(rebuilt.deformation(), deformed.deformation());

        // Tampered field values are rejected on rebuild.
        let mut corrupted = parsed.clone();
        corrupted.channels[0].m += C::new(1e-3, 0.0);
        assert!(matches!(corrupted.solve(), Err(Error::Precondition(_))));

        // solve_on refuses a contour with a different profile.
        let other = circle(64);
        assert!(matches!(
            parsed.solve_on(&other),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn mixed_product_channels_combine_backends() {
        // (ω − a)^2 · exp(cos-term): zero/pole for the power factor plus
        // quadrature for the transcendental one.
        let power = ChannelExpr::Monomial { a: 4.0, n: 2 };
        let wave = ChannelExpr::ExpSum {
            terms: vec![Term::Cos {
                c: 0.3,
                k: 1.0,
                damping_a: 1.0,
            }],
        };
        let doc = MonodromyDoc {
            lambda: Lambda::Minus,
            channels: vec![
                ChannelExpr::Product {
                    factors: vec![power.clone(), wave.clone()],
                },
                ChannelExpr::Product {
                    factors: vec![power.inverse(), wave.inverse()],
                },
            ],
        };
        let contour = circle(256);
        let point = WeylPoint::new(1.0, 0.2).unwrap();
        let sol = canonical_solve(&doc, &contour, &point).unwrap();
        assert_eq!(sol.channels()[0].backend, Backend::QuadratureCauchy);
        // Cross-check against the product of the separately solved parts.
        let power_doc = MonodromyDoc {
            lambda: Lambda::Minus,
            channels: vec![power.clone(), power.inverse()],
        };
        let wave_doc = MonodromyDoc {
            lambda: Lambda::Minus,
            channels: vec![wave.clone(), wave.inverse()],
        };
        let sp = canonical_solve(&power_doc, &contour, &point).unwrap();
        let sw = canonical_solve(&wave_doc, &contour, &point).unwrap();
        let expect = multiply_solutions(&sp, &sw).unwrap();
        for j in 0..2 {
            assert!((sol.channels()[j].m - expect.channels()[j].m).norm() < 1e-11);
        }
        let tau = C::new(0.2, 0.2);
        let xa = sol.x_at(tau).unwrap();
        let xb = expect.x_at(tau).unwrap();
        for j in 0..2 {
            assert!((xa[j] - xb[j]).norm() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn deformation_factor_symmetry_constant(
            radius in 0.2f64..0.8,
            angle in 0.0f64..TAU,
            mult in 1i32..4,
            tau_radius in 0.15f64..2.5,
            tau_angle in 0.0f64..TAU,
            plus in proptest::bool::ANY,
        ) {
            let lambda = if plus { Lambda::Plus } else { Lambda::Minus };
            let inside = C::from_polar(radius, angle);
            let outside = -lambda.sign() / inside;
            let tau = C::from_polar(tau_radius, tau_angle);
            prop_assume!((tau - inside).norm() > 0.05 && (tau - outside).norm() > 0.05);
            let mirrored = -lambda.sign() / tau;
            prop_assume!((mirrored - inside).norm() > 0.05 && (mirrored - outside).norm() > 0.05);
            let r = XFactor::ZeroPole(vec![(inside, mult), (outside, -mult)]);
            // R(0) = 1 exactly.
            prop_assert_eq!(r.eval(C::new(0.0, 0.0))?, C::new(1.0, 0.0));
            // R(τ) · R(i_λ τ) is the constant (τ_out/τ_in)^mult.
            let alpha = (outside / inside).powi(mult);
            let product = r.eval(tau)? * r.eval(mirrored)?;
            prop_assert!(
                (product - alpha).norm() < 1e-10 * alpha.norm().max(1.0),
                "{product} vs {alpha}"
            );
        }

        #[test]
        fn partial_fractions_reconstruct_the_pulled_back_exponent(
            pole_re in -3.0f64..3.0,
            pole_im in 0.5f64..2.0,
            res_re in -2.0f64..2.0,
            res_im in -2.0f64..2.0,
            rho in 0.5f64..2.0,
            v in -1.0f64..1.0,
            tau_radius in 0.2f64..2.0,
            tau_angle in 0.0f64..TAU,
        ) {
            let point = WeylPoint::new(rho, v).unwrap();
            let pole = C::new(pole_re, pole_im);
            let residue = C::new(res_re, res_im);
            let contour = circle(64);
            let pair = spectral_roots(Lambda::Minus, &point, pole);
            prop_assume!(pair.is_ok());
            let pair = pair.unwrap();
            let selection = select_roots(RootPlacement::Geometric, &contour, &pair);
            prop_assume!(selection.is_ok());
            let tau = C::from_polar(tau_radius, tau_angle);
            prop_assume!((tau - pair.phi).norm() > 0.1 && (tau - pair.phi_tilde).norm() > 0.1);
            let split = partial_fraction_projection(
                Lambda::Minus,
                &point,
                &[(pole, residue)],
                root_selector(RootPlacement::Geometric, &contour),
            )?;
            let direct = residue / (spectral_map(Lambda::Minus, &point, tau) - pole);
            let decomposed = split.exponent_at(tau);
            prop_assert!(
                (decomposed - direct).norm() < 1e-9 * (1.0 + direct.norm()),
                "{decomposed} vs {direct}"
            );
        }
    }
}
