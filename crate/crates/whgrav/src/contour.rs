//! Closed quadrature contours in the τ-plane, invariant under the
//! involution `i_λ(τ) = −λ/τ`.
//!
//! A contour here is a star-shaped analytic curve `τ(θ) = r(θ) e^{iθ}`
//! together with `N` equispaced-in-θ trapezoid nodes. The radial profile is
//! either the unit circle or the circle deformed by smooth angular bumps.
//! Profiles are *symmetrized* so that the curve is exactly invariant under
//! `i_λ`: writing the raw bump profile as `g₀(θ)`, the curve uses
//!
//! ```text
//! log r(θ) = [g₀(θ) − g₀(σθ)] / 2,     σθ = −θ (λ = −1),  π − θ (λ = +1),
//! ```
//!
//! which forces `r(σθ) = 1/r(θ)`. Consequently the involution maps the node
//! set onto itself by an index permutation ([`Contour::mirror_index`]), the
//! two fixed points `±√(−λ)` lie exactly on the curve, and any point is
//! inside the contour precisely when its involution image is outside.
//!
//! Trapezoid quadrature on an analytic periodic integrand converges
//! spectrally, so moments `∮ τ^m dτ` of a well-resolved contour vanish to
//! near machine precision; [`Contour::is_admissible`] turns that into a
//! constructive diagnostic and the constructors reject contours that
//! fail it.

use crate::error::{Error, Result};
use crate::C;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// Sign of the base metric: `λ = −1` (one timelike Killing vector) or
/// `λ = +1` (Euclidean reduction). Serialized as the integer −1 or 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Lambda {
    /// λ = −1.
    Minus,
    /// λ = +1.
    Plus,
}

impl Lambda {
    /// The value of λ as a float.
    pub fn sign(self) -> f64 {
        match self {
            Lambda::Minus => -1.0,
            Lambda::Plus => 1.0,
        }
    }

    /// Parse from the integer representation.
    pub fn from_i64(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Lambda::Minus),
            1 => Ok(Lambda::Plus),
            other => Err(Error::Config(format!(
                "lambda must be -1 or 1, got {other}"
            ))),
        }
    }

    /// The positive fixed point of the involution `i_λ(τ) = −λ/τ`:
    /// `1` for λ = −1 and `i` for λ = +1.
    pub fn fixed_point(self) -> C {
        match self {
            Lambda::Minus => C::new(1.0, 0.0),
            Lambda::Plus => C::new(0.0, 1.0),
        }
    }
}

impl Serialize for Lambda {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.sign() as i64)
    }
}

impl<'de> Deserialize<'de> for Lambda {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Lambda::from_i64(v).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// One smooth angular bump of the radial profile, a von Mises lobe
/// `amplitude · exp[(cos(θ − center) − 1)/width²]` added to `log r` before
/// symmetrization. Being entire and exactly 2π-periodic it keeps the
/// contour analytic.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Bump {
    /// Angle (radians) at which the lobe peaks.
    pub center: f64,
    /// Angular width; the lobe has effectively decayed beyond ~3·width.
    pub width: f64,
    /// Peak value contributed to `log r` before symmetrization. Positive
    /// pushes the curve outward around `center`, negative pulls it in.
    pub amplitude: f64,
}

impl Bump {
    fn value(&self, theta: f64) -> f64 {
        let w2 = self.width * self.width;
        self.amplitude * (((theta - self.center).cos() - 1.0) / w2).exp()
    }

    fn deriv(&self, theta: f64) -> f64 {
        let w2 = self.width * self.width;
        let c = (theta - self.center).cos();
        let s = (theta - self.center).sin();
        self.amplitude * ((c - 1.0) / w2).exp() * (-s / w2)
    }
}

/// One quadrature node: the point `τ_k = r(θ_k) e^{iθ_k}`, the curve
/// velocity `τ'(θ_k)`, and the trapezoid weight `w_k = τ'(θ_k) · 2π/N`, so
/// that `∮ f dτ ≈ Σ f(τ_k) w_k`.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub tau: C,
    pub dtau_dtheta: C,
    pub weight: C,
}

/// Where a point sits relative to the contour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLocation {
    Inside,
    Outside,
    OnContour,
}

/// Serialized form of a contour: profile data only, nodes are rebuilt.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContourSpec {
    Circle {
        lambda: Lambda,
        nodes: usize,
    },
    Deformed {
        lambda: Lambda,
        nodes: usize,
        bumps: Vec<Bump>,
    },
}

/// One named admissibility diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityCheck {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Result of [`Contour::is_admissible`].
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub checks: Vec<AdmissibilityCheck>,
}

impl AdmissibilityReport {
    fn failure_summary(&self) -> String {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| {
                format!(
                    "{} residual {:.3e} exceeds {:.3e}",
                    c.name, c.residual, c.tolerance
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// A star-shaped, `i_λ`-invariant quadrature contour.
///
/// Constructed through [`Contour::unit_circle`] or [`Contour::deformed`];
/// both validate the node count and run the admissibility diagnostics.
/// Contours are immutable and shared via [`Arc`]; solution-composition
/// operations require the *identical* `Arc` so that quadrature data is
/// guaranteed to match node for node.
#[derive(Debug)]
pub struct Contour {
    lambda: Lambda,
    bumps: Vec<Bump>,
    nodes: Vec<Node>,
    min_radius: f64,
    max_radius: f64,
    max_node_gap: f64,
}

/// Relative tolerance for deciding that a point sits on the contour.
const GEOM_TOL: f64 = 1e-9;
/// Tolerance on the relative deviation of quadrature moments.
const MOMENT_TOL: f64 = 1e-9;
/// Tolerance for exact-symmetry diagnostics (pure roundoff budget).
const SYMMETRY_TOL: f64 = 1e-12;

impl Contour {
    /// The unit circle with `n` nodes (`n` even, at least 8).
    pub fn unit_circle(lambda: Lambda, n: usize) -> Result<Arc<Self>> {
        Self::deformed(lambda, n, Vec::new())
    }

    /// The unit circle deformed by `bumps`, symmetrized to exact
    /// `i_λ`-invariance, with `n` nodes. Fails if the requested profile
    /// does not pass the admissibility diagnostics at this resolution
    /// (e.g. bumps too narrow for `n` nodes).
    pub fn deformed(lambda: Lambda, n: usize, bumps: Vec<Bump>) -> Result<Arc<Self>> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::Config(format!(
                "node count must be an even integer ≥ 8, got {n}"
            )));
        }
        for (i, b) in bumps.iter().enumerate() {
            if !(b.width > 0.0) || !b.width.is_finite() {
                return Err(Error::Config(format!(
                    "bump {i} has non-positive width {}",
                    b.width
                )));
            }
            if !b.center.is_finite() || !b.amplitude.is_finite() {
                return Err(Error::Config(format!("bump {i} has non-finite parameters")));
            }
        }
        let contour = Self::build(lambda, n, bumps);
        let report = contour.is_admissible();
        if !report.admissible {
            return Err(Error::InadmissibleContour(report.failure_summary()));
        }
        Ok(Arc::new(contour))
    }

    fn build(lambda: Lambda, n: usize, bumps: Vec<Bump>) -> Self {
        let mut contour = Contour {
            lambda,
            bumps,
            nodes: Vec::with_capacity(n),
            min_radius: f64::INFINITY,
            max_radius: 0.0,
            max_node_gap: 0.0,
        };
        let step = TAU / n as f64;
        for k in 0..n {
            let theta = step * k as f64;
            let (r, s_deriv) = contour.radius_and_log_deriv(theta);
            let e = C::from_polar(1.0, theta);
            let tau = r * e;
            // dτ/dθ = (r' + i r) e^{iθ} = r (s' + i) e^{iθ} with s = log r.
            let dtau = tau * C::new(s_deriv, 1.0);
            contour.nodes.push(Node {
                tau,
                dtau_dtheta: dtau,
                weight: dtau * step,
            });
            contour.min_radius = contour.min_radius.min(r);
            contour.max_radius = contour.max_radius.max(r);
        }
        for k in 0..n {
            let gap = (contour.nodes[(k + 1) % n].tau - contour.nodes[k].tau).norm();
            contour.max_node_gap = contour.max_node_gap.max(gap);
        }
        contour
    }

    /// Rebuild the same profile with a different node count.
    pub fn with_node_count(&self, n: usize) -> Result<Arc<Self>> {
        Self::deformed(self.lambda, n, self.bumps.clone())
    }

    fn sigma(&self, theta: f64) -> f64 {
        match self.lambda {
            Lambda::Minus => -theta,
            Lambda::Plus => PI - theta,
        }
    }

    fn raw_log(&self, theta: f64) -> f64 {
        self.bumps.iter().map(|b| b.value(theta)).sum()
    }

    fn raw_log_deriv(&self, theta: f64) -> f64 {
        self.bumps.iter().map(|b| b.deriv(theta)).sum()
    }

    /// Radius `r(θ)` of the symmetrized profile.
    pub fn radius(&self, theta: f64) -> f64 {
        let s = 0.5 * (self.raw_log(theta) - self.raw_log(self.sigma(theta)));
        s.exp()
    }

    fn radius_and_log_deriv(&self, theta: f64) -> (f64, f64) {
        let s = 0.5 * (self.raw_log(theta) - self.raw_log(self.sigma(theta)));
        // d/dθ g₀(σθ) = −g₀'(σθ) for both reflections σ.
        let s_deriv = 0.5 * (self.raw_log_deriv(theta) + self.raw_log_deriv(self.sigma(theta)));
        (s.exp(), s_deriv)
    }

    /// The curve point at angle `θ`.
    pub fn point_at(&self, theta: f64) -> C {
        C::from_polar(self.radius(theta), theta)
    }

    /// λ of this contour.
    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    /// Number of quadrature nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All nodes in order of increasing θ.
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// The bumps of the (pre-symmetrization) profile; empty for a circle.
    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// Node angle `θ_k = 2πk/N`.
    pub fn theta(&self, k: usize) -> f64 {
        TAU * k as f64 / self.nodes.len() as f64
    }

    /// Largest node radius.
    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    /// Smallest node radius.
    pub fn min_radius(&self) -> f64 {
        self.min_radius
    }

    /// The involution `i_λ(τ) = −λ/τ`.
    pub fn involution(&self, tau: C) -> C {
        -self.lambda.sign() / tau
    }

    /// Both fixed points `±√(−λ)` of the involution.
    pub fn fixed_points(&self) -> (C, C) {
        let p = self.lambda.fixed_point();
        (p, -p)
    }

    /// Index permutation realizing the involution on the node set:
    /// `i_λ(τ_k) = τ_{mirror_index(k)}` exactly (up to roundoff).
    pub fn mirror_index(&self, k: usize) -> usize {
        let n = self.nodes.len();
        match self.lambda {
            Lambda::Minus => (n - k) % n,
            Lambda::Plus => (n / 2 + n - k) % n,
        }
    }

    /// Distance from `p` to the node polygon.
    pub fn distance_to(&self, p: C) -> f64 {
        let n = self.nodes.len();
        let mut best = f64::INFINITY;
        for k in 0..n {
            let a = self.nodes[k].tau;
            let b = self.nodes[(k + 1) % n].tau;
            best = best.min(segment_distance(a, b, p));
        }
        best
    }

    /// Twice the largest node spacing: quadrature evaluations closer to the
    /// curve than this are refused as unreliable.
    pub fn collar(&self) -> f64 {
        2.0 * self.max_node_gap
    }

    /// Locate `p` relative to the contour. Points within
    /// `1e-9 · max_radius` of the node polygon report `OnContour`.
    pub fn locate(&self, p: C) -> PointLocation {
        if self.distance_to(p) < GEOM_TOL * self.max_radius {
            return PointLocation::OnContour;
        }
        if winding_number(&self.nodes, p) != 0 {
            PointLocation::Inside
        } else {
            PointLocation::Outside
        }
    }

    /// Run the admissibility diagnostics:
    ///
    /// * the node polygon winds exactly once around the origin;
    /// * both involution fixed points lie on the curve;
    /// * the involution permutes the node set (exact symmetrization);
    /// * quadrature moments `∮ τ^m dτ` vanish for `m ∈ {−3,−2,0,1,2,3}`
    ///   and `∮ dτ/τ = 2πi`, all to relative accuracy 1e−9, which is the
    ///   practical test that `N` nodes resolve the profile.
    pub fn is_admissible(&self) -> AdmissibilityReport {
        let mut checks = Vec::new();

        let w = winding_number(&self.nodes, C::new(0.0, 0.0));
        checks.push(AdmissibilityCheck {
            name: "encircles_origin_once",
            residual: (w - 1) as f64,
            tolerance: 0.5,
            pass: w == 1,
        });

        let (fp, fm) = self.fixed_points();
        let mut fixed_res: f64 = 0.0;
        for p in [fp, fm] {
            let theta = p.im.atan2(p.re);
            fixed_res = fixed_res.max((self.point_at(theta) - p).norm());
        }
        checks.push(AdmissibilityCheck {
            name: "fixed_points_on_curve",
            residual: fixed_res,
            tolerance: SYMMETRY_TOL,
            pass: fixed_res < SYMMETRY_TOL,
        });

        let mut inv_res: f64 = 0.0;
        for k in 0..self.nodes.len() {
            let image = self.involution(self.nodes[k].tau);
            let mirror = self.nodes[self.mirror_index(k)].tau;
            inv_res = inv_res.max((image - mirror).norm());
        }
        checks.push(AdmissibilityCheck {
            name: "node_involution_invariance",
            residual: inv_res,
            tolerance: SYMMETRY_TOL,
            pass: inv_res < SYMMETRY_TOL,
        });

        let mut moment_res: f64 = 0.0;
        for m in [-3i32, -2, 0, 1, 2, 3] {
            let mut sum = C::new(0.0, 0.0);
            let mut scale = 0.0;
            for node in &self.nodes {
                let t = node.tau.powi(m);
                sum += t * node.weight;
                scale += (t * node.weight).norm();
            }
            moment_res = moment_res.max(sum.norm() / scale.max(f64::MIN_POSITIVE));
        }
        let mut cauchy_sum = C::new(0.0, 0.0);
        for node in &self.nodes {
            cauchy_sum += node.weight / node.tau;
        }
        let cauchy_res = (cauchy_sum / C::new(0.0, TAU) - 1.0).norm();
        moment_res = moment_res.max(cauchy_res);
        checks.push(AdmissibilityCheck {
            name: "quadrature_moments",
            residual: moment_res,
            tolerance: MOMENT_TOL,
            pass: moment_res < MOMENT_TOL,
        });

        AdmissibilityReport {
            admissible: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    /// Serialize the profile.
    pub fn to_spec(&self) -> ContourSpec {
        if self.bumps.is_empty() {
            ContourSpec::Circle {
                lambda: self.lambda,
                nodes: self.nodes.len(),
            }
        } else {
            ContourSpec::Deformed {
                lambda: self.lambda,
                nodes: self.nodes.len(),
                bumps: self.bumps.clone(),
            }
        }
    }

    /// Rebuild a contour from its serialized profile.
    pub fn from_spec(spec: &ContourSpec) -> Result<Arc<Self>> {
        match spec {
            ContourSpec::Circle { lambda, nodes } => Self::unit_circle(*lambda, *nodes),
            ContourSpec::Deformed {
                lambda,
                nodes,
                bumps,
            } => Self::deformed(*lambda, *nodes, bumps.clone()),
        }
    }

    /// Parse a contour from its JSON document.
    pub fn from_json(json: &str) -> Result<Arc<Self>> {
        let spec: ContourSpec = serde_json::from_str(json)?;
        Self::from_spec(&spec)
    }

    /// Whether two contours were built from the same profile data.
    pub fn same_spec(&self, other: &Contour) -> bool {
        self.lambda == other.lambda
            && self.nodes.len() == other.nodes.len()
            && self.bumps == other.bumps
    }

    /// True if the profile is the exact unit circle.
    pub fn is_unit_circle(&self) -> bool {
        self.bumps.is_empty()
    }
}

/// Winding number of the closed node polygon around `p` (nonzero rule).
fn winding_number(nodes: &[Node], p: C) -> i32 {
    let mut wn = 0;
    let n = nodes.len();
    for k in 0..n {
        let a = nodes[k].tau;
        let b = nodes[(k + 1) % n].tau;
        if a.im <= p.im {
            if b.im > p.im && is_left(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b.im <= p.im && is_left(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn is_left(a: C, b: C, p: C) -> f64 {
    (b.re - a.re) * (p.im - a.im) - (p.re - a.re) * (b.im - a.im)
}

fn segment_distance(a: C, b: C, p: C) -> f64 {
    let ab = b - a;
    let ap = p - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return ap.norm();
    }
    let t = ((ap.re * ab.re + ap.im * ab.im) / len2).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}
