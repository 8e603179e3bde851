//! Estimated probabilities, marginal likelihoods and likelihoods under fixed parameters.
//!
//! The estimated probability of a count vector `a` under a Dirichlet(γ) prior is
//!
//! ```text
//! P_e(a, γ) = Γ(M') / Γ(M + M') · Π_j Γ(a_j + γ_j) / Γ(γ_j),   M = Σ a_j, M' = Σ γ_j
//! ```
//!
//! which for γ = (1/2, .., 1/2) is the Krichevsky–Trofimov estimator.

use crate::alphabet::{Series, Symbol};
use crate::count_tree::CountTree;
use crate::error::{BctError, Result};
use crate::logprob::LogProb;
use crate::model::{Context, TreeModel};
use libm::lgamma as ln_gamma;
use std::collections::{BTreeMap, HashMap};

/// Dirichlet hyperparameters for the per-leaf parameter prior.
///
/// One vector applies at every context unless a context has its own override.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletHyper {
    default: Vec<f64>,
    overrides: HashMap<Context, Vec<f64>>,
}

impl DirichletHyper {
    /// Dir(1/2, .., 1/2) at every context.
    pub fn jeffreys(m: usize) -> Self {
        DirichletHyper {
            default: vec![0.5; m],
            overrides: HashMap::new(),
        }
    }

    /// Dir(g, .., g) at every context.
    pub fn symmetric(m: usize, g: f64) -> Result<Self> {
        Self::new(vec![g; m])
    }

    pub fn new(default: Vec<f64>) -> Result<Self> {
        check_gamma(&default)?;
        Ok(DirichletHyper {
            default,
            overrides: HashMap::new(),
        })
    }

    /// Sets the hyperparameters used at one specific context.
    pub fn with_context(mut self, context: Context, gamma: Vec<f64>) -> Result<Self> {
        check_gamma(&gamma)?;
        if gamma.len() != self.default.len() {
            return Err(BctError::HyperLength {
                got: gamma.len(),
                expected: self.default.len(),
            });
        }
        self.overrides.insert(context, gamma);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.default.len()
    }

    pub fn default_vector(&self) -> &[f64] {
        &self.default
    }

    pub fn overrides(&self) -> &HashMap<Context, Vec<f64>> {
        &self.overrides
    }

    pub fn has_overrides(&self) -> bool {
        !self.overrides.is_empty()
    }

    pub fn is_jeffreys(&self) -> bool {
        self.overrides.is_empty() && self.default.iter().all(|&g| g == 0.5)
    }

    /// The vector `γ_s` for context `s`.
    pub fn at(&self, context: &[Symbol]) -> &[f64] {
        if self.overrides.is_empty() {
            return &self.default;
        }
        self.overrides
            .get(context)
            .map(Vec::as_slice)
            .unwrap_or(&self.default)
    }
}

fn check_gamma(gamma: &[f64]) -> Result<()> {
    match gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        Some(&g) => Err(BctError::InvalidHyperparameter(g)),
        None => Ok(()),
    }
}

/// A count vector `a_s` with its total `M_s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountVector(pub Vec<u64>);

impl CountVector {
    pub fn zeros(m: usize) -> Self {
        CountVector(vec![0; m])
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl std::ops::Deref for CountVector {
    type Target = [u64];

    fn deref(&self) -> &[u64] {
        &self.0
    }
}

/// `ln P_e(a)` with the default Dir(1/2, .., 1/2) prior. All-zero counts give 0.
pub fn estimated_prob(a: &[u64]) -> LogProb {
    let m = a.len() as f64;
    let total: u64 = a.iter().sum();
    if total == 0 {
        return LogProb::ONE;
    }
    let ln_half = ln_gamma(0.5);
    let mut v = ln_gamma(m / 2.0) - ln_gamma(total as f64 + m / 2.0);
    for &c in a {
        if c > 0 {
            v += ln_gamma(c as f64 + 0.5) - ln_half;
        }
    }
    LogProb(v)
}

/// `ln P_e(a, γ)` for an arbitrary positive hyperparameter vector.
pub fn estimated_prob_dirichlet(a: &[u64], gamma: &[f64]) -> Result<LogProb> {
    check_gamma(gamma)?;
    if gamma.len() != a.len() {
        return Err(BctError::HyperLength {
            got: gamma.len(),
            expected: a.len(),
        });
    }
    Ok(LogProb(ln_pe_gamma_unchecked(a, gamma)))
}

pub(crate) fn ln_pe_gamma_unchecked(a: &[u64], gamma: &[f64]) -> f64 {
    let total: u64 = a.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let mprime: f64 = gamma.iter().sum();
    let mut v = ln_gamma(mprime) - ln_gamma(total as f64 + mprime);
    for (&c, &g) in a.iter().zip(gamma) {
        if c > 0 {
            v += ln_gamma(c as f64 + g) - ln_gamma(g);
        }
    }
    v
}

/// Log of the sequential factor `(a_j + γ_j) / (M + M')` by which `P_e`
/// grows when symbol `j` is appended to counts `a` (taken before the increment).
#[inline]
pub fn sequential_factor(a: &[u64], gamma: &[f64], j: Symbol) -> f64 {
    let total: u64 = a.iter().sum();
    let mprime: f64 = gamma.iter().sum();
    ((a[j as usize] as f64 + gamma[j as usize]) / (total as f64 + mprime)).ln()
}

/// `ln P(x | T) = Σ_{s ∈ T} ln P_e(a_s)`. Leaves absent from the count tree contribute 0.
pub fn marginal_likelihood(tree: &CountTree, model: &TreeModel) -> Result<LogProb> {
    if model.depth() > tree.max_depth() {
        return Err(BctError::ModelTooDeep {
            model_depth: model.depth(),
            max_depth: tree.max_depth(),
        });
    }
    Ok(LogProb(
        model.leaves().iter().map(|s| tree.log_pe_at(s)).sum(),
    ))
}

/// Per-leaf probability vectors `θ_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    m: usize,
    theta: BTreeMap<Context, Vec<f64>>,
}

impl ParamSet {
    /// Validates that each vector has length m, is nonnegative and sums to 1 within 1e-12.
    pub fn new(m: usize, theta: BTreeMap<Context, Vec<f64>>) -> Result<Self> {
        for (s, v) in &theta {
            if v.len() != m {
                return Err(BctError::InvalidParameters {
                    context: s.clone(),
                    reason: format!("length {} instead of {m}", v.len()),
                });
            }
            if v.iter().any(|&p| p.is_nan() || p < 0.0) {
                return Err(BctError::InvalidParameters {
                    context: s.clone(),
                    reason: "negative entry".into(),
                });
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(BctError::InvalidParameters {
                    context: s.clone(),
                    reason: format!("entries sum to {total}"),
                });
            }
        }
        Ok(ParamSet { m, theta })
    }

    pub fn from_pairs<I: IntoIterator<Item = (Context, Vec<f64>)>>(
        m: usize,
        pairs: I,
    ) -> Result<Self> {
        Self::new(m, pairs.into_iter().collect())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, s: &[Symbol]) -> Option<&[f64]> {
        self.theta.get(s).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Context, &Vec<f64>)> {
        self.theta.iter()
    }

    pub fn insert(&mut self, s: Context, v: Vec<f64>) {
        self.theta.insert(s, v);
    }

    /// Errors unless every leaf of `model` has a parameter vector.
    pub fn check_covers(&self, model: &TreeModel) -> Result<()> {
        match model.leaves().iter().find(|s| !self.theta.contains_key(*s)) {
            Some(s) => Err(BctError::MissingParameters(s.clone())),
            None => Ok(()),
        }
    }
}

/// Leaf count vectors of `model` over `series`, computed directly from the data.
pub fn leaf_counts(series: &Series, model: &TreeModel) -> Result<BTreeMap<Context, CountVector>> {
    let depth = model.depth();
    if series.context().len() < depth {
        return Err(BctError::InsufficientContext {
            needed: depth,
            available: series.context().len(),
        });
    }
    let mut counts: BTreeMap<Context, CountVector> = BTreeMap::new();
    for (i, &x) in series.data().iter().enumerate() {
        let past = series.preceding(i, depth);
        let leaf = model.context_leaf(&past)?;
        counts
            .entry(leaf.clone())
            .or_insert_with(|| CountVector::zeros(series.m()))
            .0[x as usize] += 1;
    }
    Ok(counts)
}

/// `ln P(x | θ, T) = Σ_s Σ_j a_s(j) ln θ_s(j)`; `-inf` when an observed transition has probability 0.
pub fn likelihood_given_params(
    series: &Series,
    model: &TreeModel,
    theta: &ParamSet,
) -> Result<LogProb> {
    theta.check_covers(model)?;
    let counts = leaf_counts(series, model)?;
    let mut total = 0.0;
    for (s, a) in &counts {
        let th = theta.get(s).expect("covered above");
        for (j, &c) in a.iter().enumerate() {
            if c > 0 {
                total += c as f64 * th[j].ln();
            }
        }
    }
    Ok(LogProb(total))
}
