//! Bayesian context trees: exact inference over variable-memory Markov
//! chain models of discrete time series.
//!
//! A [`CountTree`] summarises the data once. The exact routines in [`exact`]
//! then compute the prior-predictive likelihood, the MAP model and the top-k
//! models from it. [`mcmc`] samples models and parameters, and [`predict`]
//! runs sequential prediction.

pub mod alphabet;
pub mod count_tree;
pub mod error;
pub mod exact;
pub mod likelihood;
pub mod logprob;
pub mod mcmc;
pub mod model;
pub mod posterior;
pub mod predict;
pub mod prior;
pub mod simulate;

pub use alphabet::{Alphabet, Series, Symbol};
pub use count_tree::{CountTree, NodeId, TreeOptions};
pub use error::{BctError, Result};
pub use exact::{bct_map, ctw, ctw_update, kbct, CtwState};
pub use likelihood::{CountVector, DirichletHyper, ParamSet};
pub use logprob::LogProb;
pub use model::{count_models, Context, TreeModel};
pub use prior::{default_beta, enumerate_models, model_prior, PriorConfig};
