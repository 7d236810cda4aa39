//! Computational outage in complexity-constrained centralized RAN uplinks.
//!
//! The crate simulates LTE uplink transport blocks whose turbo decoding
//! effort is charged against a per-RAP budget (local processing) or a budget
//! pooled across a cloud group (cloud processing). Modules:
//!
//! * [`link_model`]: MCS catalog, per-iteration CBLER curves, TB segmentation
//!   and effort sampling,
//! * [`mcs_policy`]: max-rate and computationally aware MCS selection,
//! * [`cell_sim`]: single-cell Rayleigh-fading sweeps,
//! * [`net_geometry`]: RAP layouts, Voronoi cells, user drops and SINR,
//! * [`cloud_sched`]: local vs cloud budgets and the low-SINR-first scheduler,
//! * [`experiments`]: configuration, orchestration and result files.
//!
//! Numeric kernels are generic over [`num::Real`]; the aliases below fix the
//! scalar used by the simulators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cell_sim;
pub mod cloud_sched;
pub mod experiments;
pub mod link_model;
pub mod mcs_policy;
pub mod net_geometry;
pub mod num;
pub mod rng;
pub mod stats;

/// Scalar used by the Monte Carlo drivers.
pub type Scalar = f64;

pub type McsEntry = link_model::McsEntry<Scalar>;
pub type McsCatalog = link_model::McsCatalog<Scalar>;
pub type Waterfall = link_model::Waterfall<Scalar>;
pub type TabulatedCurve = link_model::TabulatedCurve<Scalar>;
pub type Point = net_geometry::Point<Scalar>;
pub type Rect = net_geometry::Rect<Scalar>;
pub type ConvexPolygon = net_geometry::ConvexPolygon<Scalar>;
pub type NetworkLayout = net_geometry::NetworkLayout<Scalar>;
