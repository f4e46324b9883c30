//! Distributionally robust optimization over optimal-transport
//! neighborhoods: discrete transport costs and worst-case expectations,
//! robust risk closed forms and duals, profile-function inference,
//! data-driven radius selection, confidence regions, and simulation
//! utilities used by the `wdro` command-line tool.

pub mod cli;
pub mod dataset;
pub mod estimators;
pub mod inference;
pub mod norms;
pub mod profile;
pub mod radius;
pub(crate) mod optim;
pub mod ot;
pub mod rng;
pub mod simlab;
pub mod simplex;
pub(crate) mod univariate;
pub mod worstcase;

pub use ot::{CostSpec, Coupling, DiscreteDistribution};
pub use worstcase::{EstimatingModel, RobustRisk};
