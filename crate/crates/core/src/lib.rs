//! Desk-scale data-center simulation and migration-aware VM consolidation.
//!
//! The library models a pool of homogeneous machines under a three-tier tree
//! network, estimates live-migration costs with an iterative pre-copy model,
//! and searches per-cluster migration maps that maximize released machines
//! per unit of migration overhead. Three consolidators are provided: an ant
//! colony system driven by the overhead-aware objective ([`acs`]), a
//! first-fit-decreasing heuristic and a max-min ant system baseline
//! ([`baselines`]).
//!
//! Everything is generic over the floating-point type via [`Scalar`];
//! [`Real`] fixes the default precision used by the harness. All randomness
//! flows through caller-provided seeded RNGs, so equal seeds give bitwise
//! equal results.

// Validation deliberately writes `!(x > 0)` instead of `x <= 0`: the negated
// form also rejects NaN, which must never pass a config check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acs;
pub mod baselines;
pub mod context;
pub mod error;
pub mod metrics;
pub mod model;
pub mod overhead;
pub mod scalar;
pub mod topology;
pub mod workload;

pub use context::{ClusterContext, Consolidation};
pub use error::{Error, Result};
pub use model::{
    objective_value, validate_map, MapViolation, MigrationMap, ObjectiveParams, PhysicalMachine,
    PmId, ResourceVector, VirtualMachine, VmId,
};
pub use overhead::{
    aggregate, compute_caps, estimate_migration, unified_overhead, MigrationConfig,
    MigrationEstimate, MigrationNetwork, NormalizationCaps, OverheadReport,
};
pub use scalar::Scalar;
pub use topology::{form_clusters, Cluster, NetworkModel, TreeTopology};
pub use workload::{generate, vm_count, DataCenter, GenConfig, SweepKind};

/// Default scalar precision of the harness.
pub type Real = f64;
