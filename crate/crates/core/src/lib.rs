//! Networked compartmental spreading processes: exact and Monte Carlo oracles,
//! and deterministic systems whose trajectories bound (or approximate) each
//! node's compartment-membership probabilities.
//!
//! ```
//! use spreadbound::{catalog, bounds, grid::TimeGrid, integrate::IntegrationPolicy, graph::Graph};
//!
//! let model = catalog::build_model(
//!     catalog::CatalogKind::Sis,
//!     Graph::complete(3).unwrap(),
//!     &catalog::params(&[("beta", 0.5), ("delta", 1.0)]),
//! ).unwrap();
//! let rhs = bounds::generic_bounding_rhs::<f64>(&model);
//! let x0 = rhs.layout().initial_state(&[0.0, 1.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
//! let grid = TimeGrid::uniform(0.0, 2.0, 0.5).unwrap();
//! let sol = bounds::integrate(&rhs, x0, &grid, &IntegrationPolicy::default(), "generic").unwrap();
//! assert_eq!(sol.bundle.grid().len(), 5);
//! ```

pub mod bounds;
pub mod bundle;
pub mod catalog;
pub mod description;
pub mod exact;
pub mod graph;
pub mod grid;
pub mod instances;
pub mod integrate;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod ssa;

pub use bundle::{Aggregation, Role, RunMetadata, SeriesKey, TrajectoryBundle};
pub use catalog::{CatalogKind, CatalogError};
pub use graph::Graph;
pub use grid::TimeGrid;
pub use model::{CompartmentalModel, Configuration, RawModel};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Double-precision forms of the generic types.
pub type RhsSpecF64 = bounds::RhsSpec<f64>;
pub type RhsSpecF32 = bounds::RhsSpec<f32>;
pub type BoundStateF64 = bounds::BoundState<f64>;
