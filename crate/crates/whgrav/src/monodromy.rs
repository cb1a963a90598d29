//! Diagonal monodromy data: a small expression grammar for the channels of
//! `𝓜(ω)`, its JSON form, evaluation on a contour through the spectral
//! relation, and the built-in solution families.
//!
//! A monodromy document holds `λ` and one expression per diagonal channel.
//! Channel expressions are either `exp` of a sum of elementary terms
//! (damped cosines/sines, simple and quadratic inverse-linear terms,
//! monomials in ω), an integer power `(ω − a)^N`, or a product of such
//! expressions. The grammar is closed under inversion and channelwise
//! products, which is what the solution group operations need, and each
//! shape maps onto a factorization backend: `exp`-sums of rational terms
//! admit exact partial fractions, powers `(ω − a)^N` admit closed zero/pole
//! splits, and everything else is handled by contour quadrature on the
//! closed-form exponent.
//!
//! Composing a document on a contour pulls every channel back through
//! `ω(τ)` and validates three structural requirements: no channel pole may
//! come near the image of the contour, the channels must multiply to 1
//! (unimodularity, so the 2×2 matrix has determinant one), and the pulled
//! back samples must be invariant under the contour involution, which holds
//! identically because `ω(i_λ τ) = ω(τ)`.

use crate::cauchy::BoundarySamples;
use crate::contour::{Contour, Lambda};
use crate::error::{Error, Result};
use crate::spectral::{spectral_map, WeylPoint};
use crate::C;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// One additive term of an `exp`-sum channel exponent.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Term {
    /// `c · e^{−damping_a·k} · cos(kω)`
    Cos { c: f64, k: f64, damping_a: f64 },
    /// `c · e^{−damping_a·k} · sin(kω)`
    Sin { c: f64, k: f64, damping_a: f64 },
    /// `c / (ω − a)`
    InvLinear { c: f64, a: f64 },
    /// `c / (ω² + a²)`
    InvQuad { c: f64, a: f64 },
    /// `c · ω^p`
    Pow { c: f64, p: u32 },
}

impl Term {
    fn evaluate(&self, omega: C) -> C {
        match *self {
            Term::Cos { c, k, damping_a } => (k * omega).cos() * (c * (-damping_a * k).exp()),
            Term::Sin { c, k, damping_a } => (k * omega).sin() * (c * (-damping_a * k).exp()),
            Term::InvLinear { c, a } => C::from(c) / (omega - a),
            Term::InvQuad { c, a } => C::from(c) / (omega * omega + a * a),
            Term::Pow { c, p } => omega.powu(p) * c,
        }
    }

    fn negated(&self) -> Term {
        match *self {
            Term::Cos { c, k, damping_a } => Term::Cos {
                c: -c,
                k,
                damping_a,
            },
            Term::Sin { c, k, damping_a } => Term::Sin {
                c: -c,
                k,
                damping_a,
            },
            Term::InvLinear { c, a } => Term::InvLinear { c: -c, a },
            Term::InvQuad { c, a } => Term::InvQuad { c: -c, a },
            Term::Pow { c, p } => Term::Pow { c: -c, p },
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            Term::Cos { c, k, damping_a } | Term::Sin { c, k, damping_a } => {
                if damping_a < 0.0 {
                    return Err(Error::Config("damping_a must be nonnegative".into()));
                }
                c.is_finite() && k.is_finite() && damping_a.is_finite()
            }
            Term::InvLinear { c, a } => c.is_finite() && a.is_finite(),
            Term::InvQuad { c, a } => {
                if !(a > 0.0) {
                    return Err(Error::Config(
                        "inv_quad requires a > 0 (poles at ±ia off the real axis)".into(),
                    ));
                }
                c.is_finite() && a.is_finite()
            }
            Term::Pow { c, p } => {
                if p > 16 {
                    return Err(Error::Config(format!("pow exponent {p} is too large")));
                }
                c.is_finite()
            }
        };
        if !finite {
            return Err(Error::Config("term has non-finite parameters".into()));
        }
        Ok(())
    }

    /// Poles of the term in the ω-plane, with residues.
    fn omega_poles(&self) -> Vec<(C, C)> {
        match *self {
            Term::InvLinear { c, a } => vec![(C::from(a), C::from(c))],
            Term::InvQuad { c, a } => {
                // c/(ω²+a²) = c/[(ω−ia)(ω+ia)]: residues ±c/(2ia).
                let ia = C::new(0.0, a);
                vec![(ia, c / (2.0 * ia)), (-ia, -c / (2.0 * ia))]
            }
            _ => Vec::new(),
        }
    }

    /// True for terms expressible in partial fractions over ω.
    fn is_rational(&self) -> bool {
        matches!(self, Term::InvLinear { .. } | Term::InvQuad { .. })
    }
}

/// One diagonal channel of the monodromy matrix.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelExpr {
    /// `exp( Σ terms )`
    ExpSum { terms: Vec<Term> },
    /// `(ω − a)^N`
    Monomial {
        a: f64,
        #[serde(rename = "N")]
        n: i32,
    },
    /// Product of sub-expressions.
    Product { factors: Vec<ChannelExpr> },
}

impl ChannelExpr {
    /// Channel value at `ω`.
    pub fn evaluate(&self, omega: C) -> C {
        match self {
            ChannelExpr::ExpSum { terms } => {
                terms.iter().map(|t| t.evaluate(omega)).sum::<C>().exp()
            }
            ChannelExpr::Monomial { a, n } => (omega - *a).powi(*n),
            ChannelExpr::Product { factors } => factors.iter().map(|f| f.evaluate(omega)).product(),
        }
    }

    /// A single-valued logarithm of the channel, when the grammar provides
    /// one in closed form (everything built from `exp`-sums).
    pub fn exponent(&self, omega: C) -> Option<C> {
        match self {
            ChannelExpr::ExpSum { terms } => Some(terms.iter().map(|t| t.evaluate(omega)).sum()),
            ChannelExpr::Monomial { .. } => None,
            ChannelExpr::Product { factors } => {
                factors.iter().map(|f| f.exponent(omega)).sum::<Option<C>>()
            }
        }
    }

    /// The reciprocal channel, structurally.
    pub fn inverse(&self) -> ChannelExpr {
        match self {
            ChannelExpr::ExpSum { terms } => ChannelExpr::ExpSum {
                terms: terms.iter().map(Term::negated).collect(),
            },
            ChannelExpr::Monomial { a, n } => ChannelExpr::Monomial { a: *a, n: -n },
            ChannelExpr::Product { factors } => ChannelExpr::Product {
                factors: factors.iter().map(ChannelExpr::inverse).collect(),
            },
        }
    }

    /// Channelwise product, merging `exp`-sums structurally.
    pub fn product(&self, other: &ChannelExpr) -> ChannelExpr {
        match (self, other) {
            (ChannelExpr::ExpSum { terms: a }, ChannelExpr::ExpSum { terms: b }) => {
                ChannelExpr::ExpSum {
                    terms: a.iter().chain(b).copied().collect(),
                }
            }
            (ChannelExpr::Product { factors: a }, ChannelExpr::Product { factors: b }) => {
                ChannelExpr::Product {
                    factors: a.iter().chain(b).cloned().collect(),
                }
            }
            (ChannelExpr::Product { factors }, other) => ChannelExpr::Product {
                factors: factors.iter().cloned().chain([other.clone()]).collect(),
            },
            (one, ChannelExpr::Product { factors }) => ChannelExpr::Product {
                factors: [one.clone()]
                    .into_iter()
                    .chain(factors.iter().cloned())
                    .collect(),
            },
            (a, b) => ChannelExpr::Product {
                factors: vec![a.clone(), b.clone()],
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelExpr::ExpSum { terms } => terms.iter().try_for_each(Term::validate),
            ChannelExpr::Monomial { a, n } => {
                if !a.is_finite() {
                    return Err(Error::Config("monomial center must be finite".into()));
                }
                if n.unsigned_abs() > 64 {
                    return Err(Error::Config(format!("monomial power {n} is too large")));
                }
                Ok(())
            }
            ChannelExpr::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::Config("product channel needs factors".into()));
                }
                factors.iter().try_for_each(ChannelExpr::validate)
            }
        }
    }

    /// All ω-plane poles of the channel or of its exponent (they coincide
    /// as far as proximity validation is concerned).
    pub fn omega_poles(&self) -> Vec<(C, C)> {
        match self {
            ChannelExpr::ExpSum { terms } => terms.iter().flat_map(Term::omega_poles).collect(),
            ChannelExpr::Monomial { a, n } => {
                if *n < 0 {
                    vec![(C::from(*a), C::from(0.0))]
                } else {
                    Vec::new()
                }
            }
            ChannelExpr::Product { factors } => {
                factors.iter().flat_map(ChannelExpr::omega_poles).collect()
            }
        }
    }

    /// For a channel built entirely from `exp`-sums of rational terms, the
    /// pole/residue list of the merged exponent; `None` when any part is
    /// transcendental or a power factor.
    pub fn rational_exponent_poles(&self) -> Option<Vec<(C, C)>> {
        match self {
            ChannelExpr::ExpSum { terms } => {
                if terms.iter().all(Term::is_rational) {
                    Some(terms.iter().flat_map(Term::omega_poles).collect())
                } else {
                    None
                }
            }
            ChannelExpr::Monomial { .. } => None,
            ChannelExpr::Product { factors } => {
                let mut all = Vec::new();
                for f in factors {
                    all.extend(f.rational_exponent_poles()?);
                }
                Some(all)
            }
        }
    }

    /// True when [`ChannelExpr::exponent`] yields a closed-form,
    /// single-valued logarithm (everything built from `exp`-sums).
    pub fn has_closed_exponent(&self) -> bool {
        match self {
            ChannelExpr::ExpSum { .. } => true,
            ChannelExpr::Monomial { .. } => false,
            ChannelExpr::Product { factors } => {
                factors.iter().all(ChannelExpr::has_closed_exponent)
            }
        }
    }
}

/// A diagonal monodromy matrix: `λ` plus one expression per channel.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MonodromyDoc {
    pub lambda: Lambda,
    pub channels: Vec<ChannelExpr>,
}

impl MonodromyDoc {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::Config("monodromy needs at least one channel".into()));
        }
        self.channels.iter().try_for_each(ChannelExpr::validate)
    }

    /// The inverse matrix (channelwise reciprocal).
    pub fn inverse(&self) -> MonodromyDoc {
        MonodromyDoc {
            lambda: self.lambda,
            channels: self.channels.iter().map(ChannelExpr::inverse).collect(),
        }
    }

    /// The channelwise product. Both documents must have the same λ and
    /// channel count.
    pub fn product(&self, other: &MonodromyDoc) -> Result<MonodromyDoc> {
        if self.lambda != other.lambda {
            return Err(Error::Config(
                "cannot multiply monodromies with different lambda".into(),
            ));
        }
        if self.channels.len() != other.channels.len() {
            return Err(Error::Config(
                "cannot multiply monodromies with different channel counts".into(),
            ));
        }
        Ok(MonodromyDoc {
            lambda: self.lambda,
            channels: self
                .channels
                .iter()
                .zip(&other.channels)
                .map(|(a, b)| a.product(b))
                .collect(),
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: MonodromyDoc = serde_json::from_str(json)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("monodromy serializes")
    }
}

/// Minimum allowed distance between any channel pole and the contour image
/// `ω(Γ)`, relative to the pole scale.
const POLE_CLEARANCE: f64 = 1e-6;

fn point_segment_distance(p: C, a: C, b: C) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sqr();
    if len_sq == 0.0 {
        return (p - a).norm();
    }
    let ap = p - a;
    let t = ((ap.re * ab.re + ap.im * ab.im) / len_sq).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}
/// Unimodularity (determinant) tolerance on the contour.
const DET_TOL: f64 = 1e-10;

/// Validate a document against a contour at a base point: λ agreement,
/// pole clearance from `ω(Γ)`, and unimodularity of the channel product on
/// every node.
pub fn validate_on_contour(
    doc: &MonodromyDoc,
    contour: &Arc<Contour>,
    point: &WeylPoint,
) -> Result<()> {
    doc.validate()?;
    if doc.lambda != contour.lambda() {
        return Err(Error::Config(format!(
            "monodromy has lambda {}, contour has {}",
            doc.lambda.sign(),
            contour.lambda().sign()
        )));
    }
    let omegas: Vec<C> = contour
        .nodes()
        .iter()
        .map(|n| spectral_map(doc.lambda, point, n.tau))
        .collect();
    for channel in &doc.channels {
        for (pole, _) in channel.omega_poles() {
            // Measure against the image polyline, not just the node images:
            // a pole can sit squarely between two consecutive ω(τ_k).
            let min_dist = (0..omegas.len())
                .map(|k| {
                    let a = omegas[k];
                    let b = omegas[(k + 1) % omegas.len()];
                    point_segment_distance(pole, a, b)
                })
                .fold(f64::INFINITY, f64::min);
            if min_dist < POLE_CLEARANCE * (1.0 + pole.norm()) {
                return Err(Error::Precondition(format!(
                    "channel pole at ω = {pole} lies within {min_dist:.3e} of the contour image"
                )));
            }
        }
    }
    let mut worst = 0.0f64;
    for w in &omegas {
        let det: C = doc.channels.iter().map(|ch| ch.evaluate(*w)).product();
        worst = worst.max((det - 1.0).norm());
    }
    if worst > DET_TOL {
        return Err(Error::Config(format!(
            "channels are not unimodular: max |det − 1| = {worst:.3e} on the contour"
        )));
    }
    Ok(())
}

/// Pull every channel back to the contour: samples of `𝓜_j(ω(τ_k))` with
/// closed-form evaluators, after full validation.
pub fn compose_on_contour(
    doc: &MonodromyDoc,
    contour: &Arc<Contour>,
    point: &WeylPoint,
) -> Result<Vec<BoundarySamples>> {
    validate_on_contour(doc, contour, point)?;
    let lambda = doc.lambda;
    let point = *point;
    Ok(doc
        .channels
        .iter()
        .map(|ch| {
            let ch = ch.clone();
            BoundarySamples::from_fn(contour.clone(), move |tau| {
                ch.evaluate(spectral_map(lambda, &point, tau))
            })
        })
        .collect())
}

/// Maximum relative deviation of the pulled-back samples under the contour
/// involution, `max_{j,k} |𝓜_j(i_λ τ_k) − 𝓜_j(τ_k)|`. Identically zero in
/// exact arithmetic because `ω(i_λ τ) = ω(τ)`.
pub fn symmetry_residual(
    doc: &MonodromyDoc,
    contour: &Arc<Contour>,
    point: &WeylPoint,
) -> Result<f64> {
    let samples = compose_on_contour(doc, contour, point)?;
    let mut worst = 0.0f64;
    for s in &samples {
        let scale = s.values().iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        for k in 0..contour.node_count() {
            let mirrored = s.values()[contour.mirror_index(k)];
            worst = worst.max((mirrored - s.values()[k]).norm() / scale);
        }
    }
    Ok(worst)
}

/// The built-in closed-form solution families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// Cylindrical standing wave: channels `exp(±4b e^{−ak} cos(kω))`.
    EinsteinRosen { k: f64, a: f64, b: f64 },
    /// Power-law solution: channels `(ω − a)^{±N}`.
    Kasner { a: f64, n: i32 },
    /// Gravitational pulse wave: channels `exp(±4ab/(ω² + a²))`.
    Pulse { a: f64, b: f64 },
}

impl Family {
    /// The two-channel monodromy document (λ = −1 for all three families).
    pub fn document(&self) -> MonodromyDoc {
        let channel = match *self {
            Family::EinsteinRosen { k, a, b } => ChannelExpr::ExpSum {
                terms: vec![Term::Cos {
                    c: 4.0 * b,
                    k,
                    damping_a: a,
                }],
            },
            Family::Kasner { a, n } => ChannelExpr::Monomial { a, n },
            Family::Pulse { a, b } => ChannelExpr::ExpSum {
                terms: vec![Term::InvQuad { c: 4.0 * a * b, a }],
            },
        };
        MonodromyDoc {
            lambda: Lambda::Minus,
            channels: vec![channel.clone(), channel.inverse()],
        }
    }

    /// Closed-form `log M` per channel (the canonical factorization constant
    /// with geometric root placement on the unit circle).
    pub fn log_m_closed_form(&self, point: &WeylPoint) -> Vec<C> {
        let u = self.log_delta(point);
        vec![u, -u]
    }

    /// Closed-form `log Δ = log M₁` of the canonical solution.
    pub fn log_delta(&self, point: &WeylPoint) -> C {
        match *self {
            Family::EinsteinRosen { k, a, b } => {
                let j0 = crate::metric::bessel::bessel_j(
                    crate::metric::bessel::BesselOrder::Zero,
                    k * point.rho,
                );
                C::from(4.0 * b * (-a * k).exp() * (k * point.v).cos() * j0)
            }
            Family::Kasner { a, n } => {
                // log[(λρ τ_out / 2)^N] for the root pair of ω = a, with the
                // geometrically outside root on the unit circle.
                let pair = crate::spectral::spectral_roots(Lambda::Minus, point, C::from(a))
                    .expect("family parameters avoid branch points");
                let out = if pair.phi.norm() > 1.0 {
                    pair.phi
                } else {
                    pair.phi_tilde
                };
                (C::from(-0.5 * point.rho) * out).ln() * n as f64
            }
            Family::Pulse { a, b } => {
                // 2b (s₊ + s₋) with s± = ((a ∓ iv)² + ρ²)^{−1/2}. For a > 0
                // the radicand stays off the negative real axis, so the
                // principal branch is smooth on the whole half plane. Equals
                // 4b ∫₀^∞ e^{−ak} cos(kv) J₀(kρ) dk by the Laplace transform
                // of J₀.
                let wp = C::new(a, -point.v);
                let wm = C::new(a, point.v);
                let sp = (wp * wp + point.rho * point.rho).sqrt().inv();
                let sm = (wm * wm + point.rho * point.rho).sqrt().inv();
                2.0 * b * (sp + sm)
            }
        }
    }

    /// Closed-form one-form `A = M⁻¹dM` per channel:
    /// `(A_ρ, A_v)` as two vectors indexed by channel.
    pub fn one_form_closed_form(&self, point: &WeylPoint) -> (Vec<C>, Vec<C>) {
        let (du_rho, du_v) = self.log_delta_gradient(point);
        (vec![du_rho, -du_rho], vec![du_v, -du_v])
    }

    /// Gradient of `log Δ` in closed form.
    pub fn log_delta_gradient(&self, point: &WeylPoint) -> (C, C) {
        use crate::metric::bessel::{bessel_j, BesselOrder};
        match *self {
            Family::EinsteinRosen { k, a, b } => {
                let beta = 4.0 * b * (-a * k).exp();
                let j0 = bessel_j(BesselOrder::Zero, k * point.rho);
                let j1 = bessel_j(BesselOrder::One, k * point.rho);
                let du_rho = -beta * k * (k * point.v).cos() * j1;
                let du_v = -beta * k * (k * point.v).sin() * j0;
                (C::from(du_rho), C::from(du_v))
            }
            Family::Kasner { a, n } => {
                // d log M = N [dρ/ρ + dτ_out/τ_out].
                let pair = crate::spectral::spectral_roots(Lambda::Minus, point, C::from(a))
                    .expect("family parameters avoid branch points");
                let out = if pair.phi.norm() > 1.0 {
                    pair.phi
                } else {
                    pair.phi_tilde
                };
                let d = crate::spectral::root_derivatives(Lambda::Minus, point, out)
                    .expect("root off the fixed points");
                let n = n as f64;
                (n * (1.0 / point.rho + d.d_rho / out), n * d.d_v / out)
            }
            Family::Pulse { a, b } => {
                // u = 2b(s₊ + s₋) with s± = ((a ∓ iv)² + ρ²)^{−1/2};
                // ∂_ρ s = −ρ s³, ∂_v s± = ±i(a ∓ iv) s±³.
                let i = C::new(0.0, 1.0);
                let wp = C::new(a, -point.v);
                let wm = C::new(a, point.v);
                let sp = (wp * wp + point.rho * point.rho).sqrt().inv();
                let sm = (wm * wm + point.rho * point.rho).sqrt().inv();
                let sp3 = sp * sp * sp;
                let sm3 = sm * sm * sm;
                let du_rho = -2.0 * b * point.rho * (sp3 + sm3);
                let du_v = 2.0 * b * (i * wp * sp3 - i * wm * sm3);
                (du_rho, du_v)
            }
        }
    }
}

/// `∫₀^∞ e^{−ak} cos(kω) dk` by composite Simpson quadrature, truncated
/// where the damped envelope is below roundoff. Converges for
/// `|Im ω| < a`; the closed form is `a/(a² + ω²)`. This is the independent
/// route used to cross-check the pulse monodromy.
pub fn damped_cosine_integral(a: f64, omega: C) -> Result<C> {
    let margin = a - omega.im.abs();
    if !(margin > 0.0) {
        return Err(Error::Precondition(format!(
            "damped cosine integral diverges: |Im ω| = {} ≥ a = {a}",
            omega.im.abs()
        )));
    }
    let kmax = 40.0 / margin;
    // The integrand is Re e^{(iω−a)k} up to a bounded mix, so its
    // derivatives scale as powers of s = √(a² + |ω|²). Fixing h·s keeps
    // the composite-Simpson error near h⁴s⁴/(90·margin) ≈ 1e−10.
    let scale = (a * a + omega.norm_sqr()).sqrt();
    let steps = ((kmax * scale * 120.0).ceil() as usize).clamp(4_000, 2_000_000);
    let steps = steps + steps % 2;
    let h = kmax / steps as f64;
    let f = |k: f64| (k * omega).cos() * (-a * k).exp();
    let mut sum = f(0.0) + f(kmax);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    Ok(sum * (h / 3.0))
}
