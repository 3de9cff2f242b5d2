//! Pinned numerical tolerances and defaults. Every check states which of
//! these it used, so reports stay auditable.

/// Relative degeneracy threshold on |det D(x)|; below it the metric value
/// is flagged rather than extrapolated.
pub const DEGENERACY_REL: f64 = 1e-12;

/// Hermitian deviation accepted for an evaluated metric value.
pub const HERMITIAN_SOFT: f64 = 1e-10;

/// Hermitian defect budget for an assembled curvature form matrix.
pub const NAKANO_DEFECT_SOFT: f64 = 1e-6;

/// Defect level treated as an implementation bug (hard error).
pub const NAKANO_DEFECT_HARD: f64 = 1e-4;

/// "Semipositive" means min eigenvalue ≥ −PSD_REL·(1+‖matrix‖).
pub const PSD_REL: f64 = 1e-8;

/// Default finite-difference step factor (scaled per coordinate).
pub const FD_STEP: f64 = 1e-3;

/// Alternating-minimization defaults for the rank-one curvature minimum.
pub const GRIFFITHS_RESTARTS: usize = 8;
pub const GRIFFITHS_ITERS: usize = 50;
pub const GRIFFITHS_CONV: f64 = 1e-10;

/// Sub-mean-value test defaults.
pub const PSH_CIRCLE_SAMPLES: usize = 64;
pub const PSH_POINTS: usize = 200;
pub const PSH_DIRECTIONS: usize = 8;
pub const PSH_RADII_FRACTIONS: [f64; 3] = [0.05, 0.1, 0.2];
pub const PSH_TOL: f64 = 1e-7;

/// Mollifier quadrature: Gauss–Legendre nodes per real axis over the
/// support cube, and per-axis node count for the radial normalization.
pub const KERNEL_NODES_PER_AXIS: usize = 24;
pub const KERNEL_RADIAL_NODES: usize = 32;

/// Dyadic-shell integrability defaults.
pub const SHELL_K_MIN: i32 = 3;
pub const SHELL_K_MAX: i32 = 14;
pub const SHELL_SAMPLES: usize = 20_000;
/// Decay-rate dead band, in units of log 2 per shell.
pub const SHELL_RATE_BAND: f64 = 0.1;
/// Shells whose sample tail index is at or below this are treated as
/// having non-finite means (divisor-type singularity crossing the shell).
pub const SHELL_TAIL_ALPHA: f64 = 1.1;
