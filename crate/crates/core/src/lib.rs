//! First-order and total Sobol' indices of stochastic simulators.
//!
//! A stochastic simulator `Y = f(X, Z)` is analysed through the deterministic
//! quantity of interest `Q(X) = E[φ(X, Z) | X]`. Each `Q` value is replaced
//! by the mean of `m` repeated runs, at `n` explored inputs and at their
//! pick-frozen counterparts. A fixed budget of `T = n m` runs per branch is
//! split using a pilot estimate of the intrinsic noise, with
//! `m ≈ (2 ρ²)^{1/3} T^{1/3}`. Index ratios are reported raw and with their
//! denominator shifted by a small `h`.
//!
//! ```
//! use snmc::{run_estimation, EstimationConfig, GroupSpec, LinearModel, Qoi};
//!
//! let model = LinearModel::new(1.0).unwrap();
//! let groups = GroupSpec::singletons(2).unwrap();
//! let config = EstimationConfig { budget: 20_000, seed: 7, ..Default::default() };
//! let run = run_estimation(&model, &Qoi::Identity, &groups, &config).unwrap();
//! let s2 = run.report.first_order[1].regularized;
//! assert!((s2 - 0.8).abs() < 0.1);
//! ```

pub mod allocation;
pub mod bench;
pub mod benchmarks;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod external;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod svg;
pub mod table;

pub use allocation::{
    completion_plan, estimate_rho, m_opt, plan, AllocationPlan, BudgetLedger, CompletionPlan,
    RhoEstimate, RhoMode, Strategy,
};
pub use bench::{
    rate_fit, run_experiment, summarize, ExperimentConfig, ReplicationRecord, StrategySummary,
};
pub use benchmarks::{Builtin, IshigamiModel, LinearModel};
pub use error::{Error, Result};
pub use estimators::{
    asymptotic_plateau, g, g_shift, grad_g, hessian_g, theta_hat, total_from_complement,
    IndexChoice, RepetitionBlock, SobolEstimate, ThetaTriple,
};
pub use external::ExternalModel;
pub use model::{
    evaluate_phi, Group, GroupSpec, InputDistribution, InputSpec, Phi, Qoi, StochasticModel,
};
pub use pipeline::{run_estimation, run_pilot, Estimation, EstimationConfig, EstimationReport};
pub use rng::{NoiseStream, Role, StreamKey};
pub use table::{Branch, EvaluationTable};
