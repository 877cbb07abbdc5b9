//! Content-analysis toolkit for judgement panels: parse specialist
//! judgements, retain items by concordance or content-validity cuts, build
//! the item-by-specialist agreement matrix, test panel homogeneity with
//! Cochran's Q (exact, permutation, or asymptotic), estimate the pipeline's
//! power by simulation, and survey specialist subgroups exhaustively.
//!
//! Every randomized routine takes an explicit seed and returns the same
//! result on any number of worker threads.

pub mod cochran;
pub mod condition;
pub mod error;
pub mod judgement;
pub mod power;
pub mod rng;
pub mod subgroup;

pub use cochran::{run_test, Method, PermutationBudget, QTestResult, TestDecision};
pub use condition::{
    apply_condition, build_w_matrix, ConditionSpec, RetentionResult, RowSelection, WMatrix,
};
pub use error::{Error, Result};
pub use judgement::{parse_judgement_csv, DimensionLabel, JudgementMatrix};
pub use power::{
    builtin_scenarios, estimate_power, simulate_judgements, PowerEstimate, ScenarioSpec,
};
pub use subgroup::{analyze_subgroups, SubgroupReport};
