//! Second-order supervised domain alignment on SPD matrices.
//!
//! Per-class scatter matrices of a source and a target feature stream are
//! pulled together under the Frobenius, JBLD or AIRM distance. Distances are
//! evaluated after an exact Nyström self-projection that shrinks each class
//! pair from the ambient feature dimension to `N + N*` without changing the
//! distance value, so the eigendecompositions stay small.

pub mod align;
pub mod bench;
pub mod distance;
pub mod error;
pub mod gradcheck;
pub mod invariance;
pub mod io;
pub mod metrics;
pub mod model;
pub mod nystrom;
pub mod random;
pub mod scatter;
pub mod spd;
pub mod trainer;

pub use align::{AlignConfig, LossParts, Objective};
pub use distance::{dist_sq, grad_dist_sq, DistanceKind};
pub use error::{Error, Result};
pub use model::{Activation, Classifier, Encoder, SingleStream, TwoStreamModel};
pub use scatter::FeatureBlock;
pub use spd::SymMatrix;
