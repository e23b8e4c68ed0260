//! Numerical toolkit for non-signalling boxes and steering assemblages:
//! polytope membership, box and quantum relative entropies, the relative
//! entropies of nonlocality and steering, LOSR wirings, and the checks
//! showing that nonlocal boxes and steerable assemblages cannot be
//! broadcast by free operations.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`.

pub mod assemblages;
pub mod behaviors;
pub mod divergence;
pub mod error;
pub mod index;
pub mod losr;
mod lp;
pub mod polytopes;
pub mod quantum;
pub mod sampling;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

pub use behaviors::{NsReport, Scenario};

pub type ProbVector = tensor::ProbVector<f64>;
pub type JointTable = tensor::JointTable<f64>;
pub type Behavior = behaviors::Behavior<f64>;
pub type VertexCatalogue = polytopes::VertexCatalogue<f64>;
pub type MembershipResult = polytopes::MembershipResult<f64>;
pub type LosrMap = losr::LosrMap<f64>;
pub type CMatrix = quantum::CMatrix<f64>;
pub type Povm = quantum::Povm<f64>;
pub type KrausChannel = quantum::KrausChannel<f64>;
pub type Assemblage = assemblages::Assemblage<f64>;
