//! Exact ground truth for the confounded bandit and the discrete environments.

mod bandit;
mod mdp;

pub use bandit::{
    bandit_confounded_estimates, bandit_empirical_check, bandit_true_values, BanditAnalysis, BehaviorPolicy,
    EmpiricalCheck,
};
pub use mdp::{
    exact_policy_eval, finite_horizon_return, model_for, start_value, value_iteration, DiscreteModel, Outcome,
    TabularModel,
};
