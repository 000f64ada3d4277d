//! Deterministic approximating systems for compartment-membership probabilities.

mod equations;
pub mod frechet;
pub mod frechet_system;
pub mod layout;
pub mod ledger;
pub mod mean_field;
pub mod post;
pub mod solve;
pub mod system;

pub use frechet::{frechet_bounds, DomainError};
pub use frechet_system::{
    generic_bounding_rhs, generic_bounding_rhs_with, refined_bounding_rhs, refined_bounding_rhs_with, FrechetSystem,
};
pub use layout::{configuration_marginals, BoundState, LayoutError, StateLayout};
pub use ledger::{CorrelationLedger, CovarianceSign};
pub use mean_field::{mean_field_rhs, mean_field_rhs_eliminating, MeanFieldSystem};
pub use post::{combine_bounds, eliminate_impossible};
pub use solve::{integrate, ClipLog, Solution};
pub use system::{ApproxSystem, BuilderKind, OwnGain, RhsSpec};
