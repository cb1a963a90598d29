//! Error type shared by the library and the CLI.
//!
//! Errors fall into two classes that the CLI maps to distinct exit codes:
//! *configuration* errors (malformed input documents, unknown presets,
//! inconsistent flags — exit code 2) and *precondition* errors (inputs that
//! parse fine but violate a mathematical requirement of the requested
//! operation, such as a root sitting on the contour or a nonzero winding
//! index — exit code 3). Verification findings are ordinary values, not
//! errors; the CLI reports them and exits 1 when a check fails.

use crate::C;
use thiserror::Error;

/// Everything that can go wrong constructing or transforming solutions.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input (documents, flags, parameters).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// JSON (de)serialization failure.
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// Filesystem failure.
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    /// A constructed contour failed its own admissibility diagnostics.
    #[error("contour is not admissible: {0}")]
    InadmissibleContour(String),

    /// Evaluation point too close to the contour for stable quadrature.
    #[error(
        "point {point} lies in the quadrature collar of the contour \
         (distance {dist:.3e} < collar {collar:.3e}); evaluate on a node or \
         further from the curve"
    )]
    OnContourCollar { point: C, dist: f64, collar: f64 },

    /// A sampled function vanishes (or nearly vanishes) on the contour, so
    /// no continuous logarithm exists.
    #[error("sample vanishes on the contour: |f| = {magnitude:.3e} at node {node}")]
    ZeroOnContour { node: usize, magnitude: f64 },

    /// Winding index obstruction to a canonical factorization.
    #[error("winding index {index} ≠ 0: the sample admits no canonical factorization")]
    NonzeroIndex { index: i64 },

    /// Phase increments between adjacent nodes stayed too large even after
    /// refining the sampling, so the unwrapped logarithm is unreliable.
    #[error(
        "insufficient contour resolution: phase increment {increment:.3} rad \
         between nodes {node} and {} at {nodes} nodes", node + 1
    )]
    InsufficientResolution {
        node: usize,
        increment: f64,
        nodes: usize,
    },

    /// The spectral square root degenerates: `(ω−v)² + λρ²` is too close to
    /// zero to separate the two roots.
    #[error(
        "spectral branch point: |(ω−v)² + λρ²| = {magnitude:.3e} is below the exclusion threshold"
    )]
    BranchPoint { magnitude: f64 },

    /// A root of the spectral relation falls on the contour, so it can be
    /// assigned neither to the inside nor to the outside.
    #[error("spectral root τ = {root} lies on the contour")]
    RootOnContour { root: C },

    /// Group operations combine solutions only over the identical contour
    /// object (same nodes, same quadrature).
    #[error("solutions live on different contours; compose/invert require the identical contour")]
    ContourMismatch,

    /// Group operations combine solutions only at the same base point.
    #[error("solutions live at different points: ({rho_a}, {v_a}) vs ({rho_b}, {v_b})")]
    PointMismatch {
        rho_a: f64,
        v_a: f64,
        rho_b: f64,
        v_b: f64,
    },

    /// ψ reconstruction needs ρ bounded away from the axis.
    #[error("grid or base point touches the axis ρ ≤ 0; ψ integration requires ρ > 0")]
    RhoAxis,

    /// Catch-all precondition violation with a human-readable description.
    #[error("{0}")]
    Precondition(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code class used by the CLI: 2 for configuration problems,
    /// 3 for precondition violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Io(_) => 2,
            _ => 3,
        }
    }

    /// Stable machine-readable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
            Error::InadmissibleContour(_) => "inadmissible_contour",
            Error::OnContourCollar { .. } => "on_contour_collar",
            Error::ZeroOnContour { .. } => "zero_on_contour",
            Error::NonzeroIndex { .. } => "nonzero_index",
            Error::InsufficientResolution { .. } => "insufficient_resolution",
            Error::BranchPoint { .. } => "branch_point",
            Error::RootOnContour { .. } => "root_on_contour",
            Error::ContourMismatch => "contour_mismatch",
            Error::PointMismatch { .. } => "point_mismatch",
            Error::RhoAxis => "rho_axis",
            Error::Precondition(_) => "precondition",
        }
    }
}
