//! Pathwise quadratic variation of càdlàg paths along partition sequences.
//!
//! Paths are right-continuous step functions with explicitly declared jumps.
//! For a refining sequence of partitions `π_n` the crate computes the
//! realized variations `q_n`, `s_n` and `p_n`, estimates their limit, and
//! decides how the sequence converges: uniformly, or only in the Skorokhod
//! J1 topology (which is what happens as soon as the path jumps off the
//! partition points).
//!
//! ```
//! use cadlag_qv::{q_n, p_n, CadlagPath, PartitionScheme};
//!
//! let t0 = 0.70710678;
//! let x = CadlagPath::step(1.0, 0.0, &[(t0, 1.0)])?;
//! let dyadic = PartitionScheme::dyadic(1.0)?;
//! for n in 4..=10 {
//!     let p = dyadic.generate(n)?;
//!     assert_eq!(q_n(&x, &p)?.evaluate(t0)?, 1.0);
//!     assert_eq!(p_n(&x, &p)?.evaluate(t0)?, 0.0);
//! }
//! # Ok::<(), cadlag_qv::Error>(())
//! ```

pub mod calculus;
pub mod convergence;
pub mod error;
pub mod io;
pub mod mc;
pub mod measures;
pub mod multidim;
pub mod partitions;
pub mod paths;
pub mod qv;
pub mod skorokhod;

pub use convergence::Mode;
pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, TestFunction};
pub use multidim::{matrix_q_n, matrix_qv_limit, MatrixStepPath};
pub use partitions::{Partition, PartitionScheme};
pub use paths::{CadlagPath, Knot, VectorCadlagPath};
pub use qv::{
    lebesgue_decompose, limit_estimate, mu_n, p_n, q_n, qv_limit, s_n, LimitOptions, QvLimit,
    StepIncreasing,
};
pub use skorokhod::{j1_distance_compact, j1_distance_halfline, uniform_distance, TimeChange};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/partitions.md")]
    mod partitions {}
    #[doc = include_str!("../../../book/src/variations.md")]
    mod variations {}
    #[doc = include_str!("../../../book/src/limits.md")]
    mod limits {}
    #[doc = include_str!("../../../book/src/skorokhod.md")]
    mod skorokhod {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/ito.md")]
    mod ito {}
    #[doc = include_str!("../../../book/src/covariation.md")]
    mod covariation {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
