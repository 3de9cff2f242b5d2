//! Numerical laboratory for singular Hermitian metrics on holomorphic
//! vector bundles over coordinate charts: quotient metrics induced by
//! global sections, Chern curvature with Nakano/Griffiths positivity
//! tests, plurisubharmonicity probes, mollifier regularization, and local
//! square-integrability classification.

pub mod cli;
pub mod curvature;
pub mod expr;
pub mod integrability;
pub mod metric;
pub mod positivity;
pub mod psh;
pub mod regularize;
pub mod reproduce;
pub mod scenario;
pub mod tol;
pub mod util;
