//! Numerical laboratory for positive rank-one perturbations of positive
//! C₀-semigroups on AM-spaces of continuous functions.

pub mod density;
pub mod dyson_phillips;
pub mod error;
pub mod extrapolation;
pub mod lattice;
pub mod oracle;
pub mod perturbation;
pub mod semigroup;

pub use density::{Density, Segment};
pub use dyson_phillips::{DpConfig, EvolutionPath, EvolutionResult};
pub use error::{Error, Result};
pub use extrapolation::{ExtrapolatedElement, Monotonicity, Representation};
pub use lattice::{GridFunction, Space};
pub use perturbation::{DeschReport, RankOnePerturbation};
pub use semigroup::{GeneratorKind, GeneratorSpec};
