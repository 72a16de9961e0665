//! Multitask learning toolkit for Boolean functions over the hypercube:
//! a simultaneous boosting engine for sparse large-margin halfspaces, the
//! matching sample-size calculators and experiment harness, and a threshold
//! secret-sharing construction with its attribute-efficient learner and
//! brute-force multitask learner.

pub mod boosting;
pub mod concepts;
pub mod config;
pub mod data;
pub mod evaluation;
pub mod hardness;
pub mod seed;
pub mod verify;

pub use boosting::{boost, steps_for_target, BoostRun, TaskEnsemble, WeakLearnerClass};
pub use concepts::{Concept, InputDistribution, ParityConcept, SparseHalfspace};
pub use data::{HypercubeExample, MultitaskDataset, ProblemDims, TaskDataset};
pub use seed::SeedSpec;
