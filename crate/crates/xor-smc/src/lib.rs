//! XOR-hashing solver for satisfiability modulo counting (SMC): decide
//! formulas that combine Boolean structure with model-counting thresholds
//! by compiling the counting side into random parity constraints and
//! asking a SAT oracle once.

pub mod circuit;
pub mod discretize;
pub mod encode;
pub mod error;
pub mod formula;
pub mod instance;
pub mod oracle;
pub mod shelter;
pub mod smc;
pub mod supply;
pub mod xorhash;

pub use circuit::{circuit_from_clauses, tseitin, tseitin_assert, Circuit, Gate, InputBinding};
pub use error::{Error, Result};
pub use formula::{CnfFormula, Lit, Var, VarRange};
pub use oracle::{count_exact, solve, OracleBackend, OracleConfig, SatResult, SatStatus};
pub use smc::{
    alpha, build_xor_smc_formula, compute_t, maximize_threshold, xor_binary, xor_smc,
    CountingTerm, Decision, SmcInstance, SolveParams, ThresholdSearch,
};
pub use xorhash::{encode_parity, sample_parity, HashRng, ParityConstraint};
pub use discretize::{embed_product, embed_weight, DiscretizedIndicator, WeightTable};
pub use instance::{load_instance, parse_instance};
pub use shelter::{
    count_paths_exact, encode_shelter, evaluate_assignment, improve_placement,
    local_search_baseline, solve_shelter, RoadGraph, ShelterOutcome, ShelterSolution,
};
pub use supply::{
    encode_supply, evaluate_plan, generate_network, parse_supply, random_feasible_plan,
    solve_supply, trade_survives, EventModel, SupplyNetwork, SupplyOutcome, TradingPlan,
};
