//! Stepfunction kernel calculus for bipartite graph limits.
//!
//! The crate provides, in rough dependency order:
//!
//! - [`kernel`]: stepfunction kernels on the unit square with the full
//!   operation algebra (products, operator products, direct sums,
//!   symmetrisation, sixth powers, common refinement) plus conversions
//!   from finite bipartite [`graph`]s;
//! - [`norms`]: measure-weighted L^p norms, exact and heuristic cut norms,
//!   the cut metric and cut distance, homogeneity/regularity checks;
//! - [`spectral`]: measure-weighted singular value decomposition of kernel
//!   operators and the constructive weak regularisation of the sixth-power
//!   kernel;
//! - [`finfield`]: arithmetic for prime-power finite fields and for
//!   Frobenius-twisted cyclic groups;
//! - [`defgraphs`]: the fixed catalog of definable bipartite graph families
//!   with case classification and predicted limit stepfunctions;
//! - [`algreg`]: sixth-power path profiles, tolerance clustering, block
//!   density regularity decompositions and the accumulation-point scanner;
//! - [`expander`]: quadruple-map image statistics and moderate-expansion
//!   probes for a small catalog of two-variable morphisms.

pub mod algreg;
pub mod defgraphs;
pub mod error;
pub mod expander;
pub mod finfield;
pub mod graph;
pub mod kernel;
pub mod matrix;
pub mod norms;
pub mod spectral;

pub(crate) mod util;

pub use error::{Error, Result};
pub use graph::BipartiteGraph;
pub use kernel::{Side, StepKernel};
pub use matrix::Matrix;
