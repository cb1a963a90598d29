//! Cauchy-kernel quadrature, winding indices, and canonical scalar
//! Wiener-Hopf factorization on a contour.
//!
//! The analytic projections of a function `f` sampled on a closed contour
//! `Γ` are
//!
//! ```text
//! (P⁺f)(τ) =  (1/2πi) ∮ f(z)/(z−τ) dz      for τ inside Γ,
//! (P⁻f)(τ) = −(1/2πi) ∮ f(z)/(z−τ) dz      for τ outside Γ,
//! ```
//!
//! so that `f = P⁺f + P⁻f` on `Γ`, `P⁺f` extends holomorphically inside,
//! `P⁻f` outside with `(P⁻f)(∞) = 0`, and constants land on the plus side.
//! On the contour itself the boundary values are obtained by the regularized
//! (Plemelj) form
//!
//! ```text
//! (P⁺f)(τ₀) = f(τ₀) + (1/2πi) ∮ [f(z) − f(τ₀)]/(z − τ₀) dz ,
//! ```
//!
//! whose integrand is smooth (it tends to `f'(τ₀)` at `z = τ₀`), so the same
//! spectrally accurate trapezoid rule applies on the nodes; the derivative at
//! a node comes from FFT differentiation in the curve parameter.
//!
//! A nowhere-zero sample with winding index 0 then factorizes canonically:
//!
//! ```text
//! f = f₋ · c · f₊ ,   f₊ = exp[P⁺ log f − (P⁺ log f)(0)] ,
//!                     f₋ = exp[P⁻ log f] ,   c = exp[(P⁺ log f)(0)] ,
//! ```
//!
//! with `f₊` holomorphic and nonzero inside (`f₊(0) = 1`), `f₋` outside
//! (`f₋(∞) = 1`), and all of `f`'s size collected in the constant `c`.
//! Off-contour evaluation refuses points within a collar of two node
//! spacings of the curve, where the discrete Cauchy kernel loses accuracy;
//! points on the nodes themselves use the Plemelj form instead.

use crate::contour::{Contour, PointLocation};
use crate::error::{Error, Result};
use crate::C;
use rustfft::FftPlanner;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, OnceLock};

/// Shared closed-form evaluator backing a sampled function.
pub type ClosedForm = Arc<dyn Fn(C) -> C + Send + Sync>;

/// Hard ceiling for automatic node doubling during phase unwrapping.
pub const MAX_REFINE_NODES: usize = 4096;

/// Relative threshold below which a sample counts as vanishing on `Γ`.
const ZERO_TOL: f64 = 1e-12;

/// A function known by its values on the nodes of a contour, optionally
/// backed by a closed-form evaluator (which enables resampling and
/// evaluation of boundary factors off the curve).
#[derive(Clone)]
pub struct BoundarySamples {
    contour: Arc<Contour>,
    values: Vec<C>,
    closed_form: Option<ClosedForm>,
}

impl std::fmt::Debug for BoundarySamples {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundarySamples")
            .field("nodes", &self.values.len())
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl BoundarySamples {
    /// Sample `f` on the contour nodes, keeping `f` for resampling.
    pub fn from_fn<F>(contour: Arc<Contour>, f: F) -> Self
    where
        F: Fn(C) -> C + Send + Sync + 'static,
    {
        let f: ClosedForm = Arc::new(f);
        Self::from_closed_form(contour, f)
    }

    /// Same as [`BoundarySamples::from_fn`] for an already-shared evaluator.
    pub fn from_closed_form(contour: Arc<Contour>, f: ClosedForm) -> Self {
        let values = contour.nodes().iter().map(|n| f(n.tau)).collect();
        BoundarySamples {
            contour,
            values,
            closed_form: Some(f),
        }
    }

    /// Wrap raw node values (no closed form available).
    pub fn from_values(contour: Arc<Contour>, values: Vec<C>) -> Result<Self> {
        if values.len() != contour.node_count() {
            return Err(Error::Config(format!(
                "expected {} samples, got {}",
                contour.node_count(),
                values.len()
            )));
        }
        Ok(BoundarySamples {
            contour,
            values,
            closed_form: None,
        })
    }

    pub fn contour(&self) -> &Arc<Contour> {
        &self.contour
    }

    pub fn values(&self) -> &[C] {
        &self.values
    }

    pub fn closed_form(&self) -> Option<&ClosedForm> {
        self.closed_form.as_ref()
    }

    /// Resample on the same profile with `n` nodes (needs a closed form).
    pub fn resampled(&self, n: usize) -> Result<Self> {
        let f = self.closed_form.clone().ok_or_else(|| {
            Error::Precondition("resampling requires a closed-form sample".into())
        })?;
        let contour = self.contour.with_node_count(n)?;
        Ok(Self::from_closed_form(contour, f))
    }

    fn guard_off_contour(&self, tau: C, want: PointLocation) -> Result<()> {
        let dist = self.contour.distance_to(tau);
        let collar = self.contour.collar();
        if dist < collar {
            return Err(Error::OnContourCollar {
                point: tau,
                dist,
                collar,
            });
        }
        let loc = self.contour.locate(tau);
        if loc != want {
            return Err(Error::Precondition(format!(
                "point {tau} is {loc:?}, expected {want:?}"
            )));
        }
        Ok(())
    }

    fn cauchy_sum(&self, tau: C) -> C {
        let mut sum = C::new(0.0, 0.0);
        for (v, node) in self.values.iter().zip(self.contour.nodes()) {
            sum += v * node.weight / (node.tau - tau);
        }
        sum / C::new(0.0, TAU)
    }

    /// `(P⁺f)(τ)` for `τ` strictly inside the contour (beyond the collar).
    pub fn cauchy_plus(&self, tau: C) -> Result<C> {
        self.guard_off_contour(tau, PointLocation::Inside)?;
        Ok(self.cauchy_sum(tau))
    }

    /// `(P⁻f)(τ)` for `τ` strictly outside the contour (beyond the collar).
    pub fn cauchy_minus(&self, tau: C) -> Result<C> {
        self.guard_off_contour(tau, PointLocation::Outside)?;
        Ok(-self.cauchy_sum(tau))
    }

    /// `df/dτ` on every node by FFT differentiation in θ.
    pub fn spectral_derivative(&self) -> Vec<C> {
        let n = self.values.len();
        let mut buf = self.values.clone();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        for (j, c) in buf.iter_mut().enumerate() {
            // Signed frequency; the Nyquist mode has no well-defined
            // derivative direction and is dropped.
            let m = if j < n / 2 {
                j as f64
            } else if j == n / 2 {
                0.0
            } else {
                j as f64 - n as f64
            };
            *c *= C::new(0.0, m);
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter()
            .zip(self.contour.nodes())
            .map(|(d, node)| d * scale / node.dtau_dtheta)
            .collect()
    }

    /// Plemelj boundary values `(P⁺f)(τ_k)` on every node.
    pub fn plus_boundary_values(&self) -> Vec<C> {
        let nodes = self.contour.nodes();
        let n = nodes.len();
        let deriv = self.spectral_derivative();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let t0 = nodes[k].tau;
            let f0 = self.values[k];
            let mut sum = deriv[k] * nodes[k].weight;
            for j in 0..n {
                if j != k {
                    sum += (self.values[j] - f0) * nodes[j].weight / (nodes[j].tau - t0);
                }
            }
            out.push(f0 + sum / C::new(0.0, TAU));
        }
        out
    }

    /// Plemelj boundary values `(P⁻f)(τ_k) = f(τ_k) − (P⁺f)(τ_k)`.
    pub fn minus_boundary_values(&self) -> Vec<C> {
        self.plus_boundary_values()
            .iter()
            .zip(&self.values)
            .map(|(p, v)| v - p)
            .collect()
    }
}

/// A continuous (unwrapped) logarithm of a nowhere-zero sample, together
/// with its winding index around the origin.
#[derive(Debug)]
pub struct ContinuousLog {
    samples: BoundarySamples,
    log_values: Vec<C>,
    index: i64,
    /// When true, the closed form of `samples` evaluates the *logarithm*
    /// itself (single-valued), not the underlying function; off-contour
    /// continuation then needs no branch alignment.
    log_is_exact: bool,
}

impl ContinuousLog {
    /// Unwrap the phase of `f` along the contour. Adjacent-node phase
    /// increments must stay below π/2; if they do not and a closed form is
    /// available, the sampling is doubled (up to [`MAX_REFINE_NODES`])
    /// before giving up. The returned log lives on the possibly refined
    /// contour, anchored to the principal branch at node 0.
    pub fn unwrap(samples: &BoundarySamples) -> Result<Self> {
        let mut current = samples.clone();
        loop {
            match Self::try_unwrap(&current) {
                Ok(log) => return Ok(log),
                Err(Error::InsufficientResolution {
                    node,
                    increment,
                    nodes,
                }) => {
                    let doubled = nodes * 2;
                    if current.closed_form().is_none() || doubled > MAX_REFINE_NODES {
                        return Err(Error::InsufficientResolution {
                            node,
                            increment,
                            nodes,
                        });
                    }
                    current = current.resampled(doubled)?;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn try_unwrap(samples: &BoundarySamples) -> Result<Self> {
        let v = samples.values();
        let n = v.len();
        let max_mag = v.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        for (k, z) in v.iter().enumerate() {
            if z.norm() < ZERO_TOL * max_mag || max_mag == 0.0 {
                return Err(Error::ZeroOnContour {
                    node: k,
                    magnitude: z.norm(),
                });
            }
        }
        let mut increments = Vec::with_capacity(n);
        for k in 0..n {
            let ratio = v[(k + 1) % n] / v[k];
            let d = ratio.arg();
            if d.abs() >= PI / 2.0 {
                return Err(Error::InsufficientResolution {
                    node: k,
                    increment: d,
                    nodes: n,
                });
            }
            increments.push(d);
        }
        let total: f64 = increments.iter().sum();
        let index = (total / TAU).round() as i64;
        if (total - TAU * index as f64).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "phase unwrap inconsistent: total increment {total:.6} is not a multiple of 2π"
            )));
        }
        let mut log_values = Vec::with_capacity(n);
        let mut phase = v[0].arg();
        log_values.push(C::new(v[0].norm().ln(), phase));
        for k in 0..n - 1 {
            phase += increments[k];
            log_values.push(C::new(v[k + 1].norm().ln(), phase));
        }
        Ok(ContinuousLog {
            samples: samples.clone(),
            log_values,
            index,
            log_is_exact: false,
        })
    }

    /// Treat `exponent` as an already-continuous logarithm sampled on the
    /// contour (e.g. a closed-form exponent of `f = e^g`). Such a log is
    /// single-valued, so the winding index is 0 by construction.
    pub fn from_exponent(exponent: BoundarySamples) -> Self {
        let log_values = exponent.values().to_vec();
        ContinuousLog {
            samples: exponent,
            log_values,
            index: 0,
            log_is_exact: true,
        }
    }

    /// Winding index of the underlying function around the origin.
    pub fn index(&self) -> i64 {
        self.index
    }

    /// The contour actually carrying the log (refinement may have replaced
    /// the one originally sampled).
    pub fn contour(&self) -> &Arc<Contour> {
        self.samples.contour()
    }

    /// The unwrapped log values on the nodes.
    pub fn log_values(&self) -> &[C] {
        &self.log_values
    }

    /// The log samples as a [`BoundarySamples`] without closed form.
    fn log_samples(&self) -> BoundarySamples {
        BoundarySamples {
            contour: self.samples.contour().clone(),
            values: self.log_values.clone(),
            closed_form: None,
        }
    }

    /// Closed-form log at `τ`, branch-aligned to the nearest node. For an
    /// exact log this is a plain evaluation; otherwise the principal log of
    /// the sample's closed form is shifted by the multiple of 2πi that
    /// matches the unwrapped branch, which is reliable as long as the log
    /// at `τ` stays within π/2 of the nearest node's value.
    fn aligned_log(&self, tau: C) -> Result<C> {
        let f = self.samples.closed_form().ok_or_else(|| {
            Error::Precondition("off-contour continuation requires a closed-form sample".into())
        })?;
        if self.log_is_exact {
            return Ok(f(tau));
        }
        let raw = f(tau).ln();
        let (j, _) = self
            .contour()
            .nodes()
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.tau - tau)
                    .norm()
                    .partial_cmp(&(b.tau - tau).norm())
                    .unwrap()
            })
            .expect("contour has nodes");
        let anchor = self.log_values[j];
        let m = ((anchor.im - raw.im) / TAU).round();
        let aligned = raw + C::new(0.0, TAU * m);
        if (aligned - anchor).norm()
            > PI / 2.0 + (self.samples.values()[j].norm().ln() - anchor.re).abs()
        {
            return Err(Error::Precondition(format!(
                "cannot align log branch at {tau}: too far from contour values"
            )));
        }
        Ok(aligned)
    }
}

/// Canonical scalar Wiener-Hopf factorization `f = f₋ · c · f₊`.
pub struct ScalarFactorization {
    log: ContinuousLog,
    c0: C,
    plus_bv: OnceLock<Vec<C>>,
}

impl std::fmt::Debug for ScalarFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarFactorization")
            .field("log", &self.log)
            .field("c0", &self.c0)
            .finish()
    }
}

/// Factorize a nowhere-zero, index-0 sample. An index other than 0 is a
/// hard obstruction and reported as [`Error::NonzeroIndex`].
pub fn scalar_canonical_factorization(samples: &BoundarySamples) -> Result<ScalarFactorization> {
    let log = ContinuousLog::unwrap(samples)?;
    ScalarFactorization::from_log(log)
}

/// Factorize from an already-continuous logarithm (e.g. a closed-form
/// exponent), skipping the unwrap.
pub fn scalar_canonical_factorization_from_log(log: ContinuousLog) -> Result<ScalarFactorization> {
    ScalarFactorization::from_log(log)
}

impl ScalarFactorization {
    fn from_log(log: ContinuousLog) -> Result<Self> {
        if log.index() != 0 {
            return Err(Error::NonzeroIndex { index: log.index() });
        }
        // c₀ = (P⁺ log f)(0); the origin is interior to every admissible
        // contour, and comfortably far from it, so the plain kernel is fine.
        let mut sum = C::new(0.0, 0.0);
        for (g, node) in log.log_values().iter().zip(log.contour().nodes()) {
            sum += g * node.weight / node.tau;
        }
        let c0 = sum / C::new(0.0, TAU);
        Ok(ScalarFactorization {
            log,
            c0,
            plus_bv: OnceLock::new(),
        })
    }

    /// The contour carrying the factorization.
    pub fn contour(&self) -> &Arc<Contour> {
        self.log.contour()
    }

    /// The constant factor `c = exp[(P⁺ log f)(0)]`.
    pub fn normalization(&self) -> C {
        self.c0.exp()
    }

    /// `(P⁺ log f)(0)`.
    pub fn c0(&self) -> C {
        self.c0
    }

    /// Taylor coefficients of `P⁺ log f` at the origin, orders `0..=m_max`:
    /// `c_m = (1/2πi) ∮ log f(z) / z^{m+1} dz`.
    pub fn plus_log_taylor(&self, m_max: usize) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); m_max + 1];
        for (g, node) in self.log.log_values().iter().zip(self.log.contour().nodes()) {
            let mut p = node.weight / node.tau;
            for c in out.iter_mut() {
                *c += g * p;
                p /= node.tau;
            }
        }
        for c in out.iter_mut() {
            *c /= C::new(0.0, TAU);
        }
        out
    }

    fn plus_boundary(&self) -> &[C] {
        self.plus_bv
            .get_or_init(|| self.log.log_samples().plus_boundary_values())
    }

    fn nearest_node(&self, tau: C) -> Option<usize> {
        let contour = self.log.contour();
        let (j, d) = contour
            .nodes()
            .iter()
            .enumerate()
            .map(|(j, n)| (j, (n.tau - tau).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        (d < 1e-9 * contour.max_radius()).then_some(j)
    }

    /// The normalized plus factor `f₊(τ) = exp[P⁺ log f(τ) − c₀]`,
    /// holomorphic and nonzero inside `Γ` with `f₊(0) = 1`. Evaluates by
    /// quadrature inside, by the Plemelj form exactly on a node, and by
    /// closed-form continuation outside.
    pub fn plus_at(&self, tau: C) -> Result<C> {
        Ok((self.plus_log_at(tau)? - self.c0).exp())
    }

    /// `P⁺ log f` at `τ` (inside, on a node, or continued outside).
    pub fn plus_log_at(&self, tau: C) -> Result<C> {
        if let Some(j) = self.nearest_node(tau) {
            return Ok(self.plus_boundary()[j]);
        }
        let samples = self.log.log_samples();
        match self.log.contour().locate(tau) {
            PointLocation::Inside => samples.cauchy_plus(tau),
            PointLocation::Outside => {
                // Continuation across Γ: P⁺g = g − P⁻g, and P⁻g is directly
                // computable outside.
                let g = self.log.aligned_log(tau)?;
                Ok(g - samples.cauchy_minus(tau)?)
            }
            PointLocation::OnContour => Err(Error::OnContourCollar {
                point: tau,
                dist: self.log.contour().distance_to(tau),
                collar: self.log.contour().collar(),
            }),
        }
    }

    /// `d/dτ (P⁺ log f)` at `τ` strictly inside `Γ` (beyond the collar):
    /// `(1/2πi) ∮ log f(z)/(z − τ)² dz`.
    pub fn plus_log_derivative_at(&self, tau: C) -> Result<C> {
        self.log
            .log_samples()
            .guard_off_contour(tau, PointLocation::Inside)?;
        let mut sum = C::new(0.0, 0.0);
        for (g, node) in self.log.log_values().iter().zip(self.log.contour().nodes()) {
            let d = node.tau - tau;
            sum += g * node.weight / (d * d);
        }
        Ok(sum / C::new(0.0, TAU))
    }

    /// The minus factor `f₋(τ) = exp[P⁻ log f(τ)]`, holomorphic and nonzero
    /// outside `Γ` with `f₋(∞) = 1`.
    pub fn minus_at(&self, tau: C) -> Result<C> {
        if let Some(j) = self.nearest_node(tau) {
            let g = self.log.log_values()[j];
            return Ok((g - self.plus_boundary()[j]).exp());
        }
        let samples = self.log.log_samples();
        let log_minus = match self.log.contour().locate(tau) {
            PointLocation::Outside => samples.cauchy_minus(tau)?,
            PointLocation::Inside => {
                let g = self.log.aligned_log(tau)?;
                g - samples.cauchy_plus(tau)?
            }
            PointLocation::OnContour => {
                return Err(Error::OnContourCollar {
                    point: tau,
                    dist: self.log.contour().distance_to(tau),
                    collar: self.log.contour().collar(),
                })
            }
        };
        Ok(log_minus.exp())
    }

    /// Residual of the factorization identity `f = f₋ · c · f₊` over all
    /// nodes, relative to `max |f|`.
    pub fn identity_residual(&self) -> f64 {
        let plus = self.plus_boundary();
        let scale = self
            .log
            .samples
            .values()
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        let mut worst = 0.0f64;
        for (k, g) in self.log.log_values().iter().enumerate() {
            let f = g.exp();
            let reconstructed =
                (g - plus[k]).exp() * self.normalization() * (plus[k] - self.c0).exp();
            worst = worst.max((f - reconstructed).norm() / scale);
        }
        worst
    }
}

/// Additive Fourier split on the unit circle: returns the coefficient
/// vectors `(a, b)` with `f(τ) ≈ Σ_{m≥0} a_m τ^m + Σ_{m≥1} b_m τ^{−m}`
/// (`a` has length `N/2`, `b` length `N/2 − 1` so the ambiguous Nyquist
/// mode is dropped). This is an independent route to the projections used
/// to cross-check the Cauchy quadrature; it only applies to the circle.
pub fn fourier_split(samples: &BoundarySamples) -> Result<(Vec<C>, Vec<C>)> {
    let contour = samples.contour();
    if !contour.is_unit_circle() {
        return Err(Error::Precondition(
            "fourier_split applies only to unit-circle contours".into(),
        ));
    }
    let n = contour.node_count();
    let mut buf = samples.values().to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let plus: Vec<C> = (0..n / 2).map(|j| buf[j] * scale).collect();
    let minus: Vec<C> = (1..n / 2).map(|m| buf[n - m] * scale).collect();
    Ok((plus, minus))
}

/// Evaluate the plus series from [`fourier_split`] at `τ`.
pub fn eval_plus_series(coeffs: &[C], tau: C) -> C {
    coeffs
        .iter()
        .rev()
        .fold(C::new(0.0, 0.0), |acc, c| acc * tau + c)
}

/// Evaluate the minus series from [`fourier_split`] at `τ`.
pub fn eval_minus_series(coeffs: &[C], tau: C) -> C {
    let w = 1.0 / tau;
    let mut acc = C::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = (acc + c) * w;
    }
    acc
}

/// `J_order(x)` by unit-circle contour quadrature of the generating
/// function: `J_m(x) = (1/2πi) ∮ e^{x(z − 1/z)/2} z^{−m} dz/z`, i.e. the
/// mean of `e^{i x sin θ} e^{−i m θ}` over the circle. The node count grows
/// with `|x|` so the Fourier tail of the integrand (whose coefficients are
/// again Bessel values) is below roundoff. This is the reference
/// implementation the series/asymptotic evaluator is tested against.
pub fn bessel_contour_j(order: u32, x: f64) -> f64 {
    let n = bessel_node_count(x);
    let mut sum = 0.0;
    for k in 0..n {
        let theta = TAU * k as f64 / n as f64;
        sum += (x * theta.sin() - order as f64 * theta).cos();
    }
    sum / n as f64
}

/// `J₀(x)` by contour quadrature; see [`bessel_contour_j`].
pub fn bessel_contour_j0(x: f64) -> f64 {
    bessel_contour_j(0, x)
}

fn bessel_node_count(x: f64) -> usize {
    let x = x.abs();
    let n = (x + 22.0 * x.cbrt() + 40.0).ceil() as usize;
    (n + n % 2).max(64)
}
