//! Posterior quantities over models and parameters.

use crate::alphabet::Symbol;
use crate::count_tree::CountTree;
use crate::error::{BctError, Result};
use crate::exact::ctw;
use crate::likelihood::{marginal_likelihood, DirichletHyper};
use crate::logprob::LogProb;
use crate::model::{Context, TreeModel};
use crate::prior::{model_prior, PriorConfig};
use std::collections::BTreeMap;

/// `ln π(T) + ln P(x|T)`.
pub fn log_joint(tree: &CountTree, model: &TreeModel, beta: f64) -> Result<LogProb> {
    let cfg = PriorConfig::new(tree.m(), tree.max_depth(), beta)?;
    Ok(model_prior(model, &cfg)? + marginal_likelihood(tree, model)?)
}

/// `π(T|x) = π(T) P(x|T) / P*_D(x)`.
pub fn model_posterior(tree: &CountTree, model: &TreeModel, beta: f64) -> Result<f64> {
    Ok(log_model_posterior(tree, model, beta)?.prob())
}

pub fn log_model_posterior(tree: &CountTree, model: &TreeModel, beta: f64) -> Result<LogProb> {
    Ok(log_joint(tree, model, beta)? - ctw(tree, beta)?)
}

/// `ln [P(x|T) / P(x|T')]`, summed over the leaves the two models do not share.
pub fn bayes_factor(tree: &CountTree, a: &TreeModel, b: &TreeModel) -> Result<f64> {
    for t in [a, b] {
        if t.depth() > tree.max_depth() {
            return Err(BctError::ModelTooDeep {
                model_depth: t.depth(),
                max_depth: tree.max_depth(),
            });
        }
    }
    let only_a: f64 = a
        .leaves()
        .difference(b.leaves())
        .map(|s| tree.log_pe_at(s))
        .sum();
    let only_b: f64 = b
        .leaves()
        .difference(a.leaves())
        .map(|s| tree.log_pe_at(s))
        .sum();
    Ok(only_a - only_b)
}

/// Dirichlet parameters `a_s + γ_s` of the conditional posterior of `θ_s` at each leaf.
pub fn full_conditional(
    tree: &CountTree,
    model: &TreeModel,
    hyper: &DirichletHyper,
) -> Result<BTreeMap<Context, Vec<f64>>> {
    if hyper.m() != tree.m() {
        return Err(BctError::HyperLength {
            got: hyper.m(),
            expected: tree.m(),
        });
    }
    Ok(model
        .leaves()
        .iter()
        .map(|s| {
            let a = tree.counts_at(s);
            let g = hyper.at(s);
            (
                s.clone(),
                a.iter().zip(g).map(|(&c, &g)| c as f64 + g).collect(),
            )
        })
        .collect())
}

/// Estimates of `θ_s(j)` from the counts at a single leaf.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEstimates {
    /// `a(j) / M`; absent when `M = 0`.
    pub mle: Option<f64>,
    /// Posterior mean `(a(j) + γ(j)) / (M + M')`.
    pub post_mean: f64,
    /// Mode of the conditional posterior.
    pub cond_map: f64,
    /// Set when some `a(i) + γ(i) < 1`, so the mode lies on the simplex boundary.
    pub cond_map_boundary: bool,
}

pub fn point_estimates(a: &[u64], j: Symbol, gamma: &[f64]) -> Result<PointEstimates> {
    if gamma.len() != a.len() {
        return Err(BctError::HyperLength {
            got: gamma.len(),
            expected: a.len(),
        });
    }
    if let Some(&g) = gamma.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
        return Err(BctError::InvalidHyperparameter(g));
    }
    let j = j as usize;
    if j >= a.len() {
        return Err(BctError::SymbolOutOfRange {
            symbol: j,
            size: a.len(),
        });
    }
    let total: u64 = a.iter().sum();
    let alpha: Vec<f64> = a.iter().zip(gamma).map(|(&c, &g)| c as f64 + g).collect();
    let sum: f64 = alpha.iter().sum();
    let mle = (total > 0).then(|| a[j] as f64 / total as f64);
    let post_mean = alpha[j] / sum;
    let boundary = alpha.iter().any(|&x| x < 1.0);
    let cond_map = if !boundary {
        let denom = sum - a.len() as f64;
        if denom > 0.0 {
            (alpha[j] - 1.0) / denom
        } else {
            1.0 / a.len() as f64
        }
    } else {
        boundary_mode(&alpha, j)
    };
    Ok(PointEstimates {
        mle,
        post_mean,
        cond_map,
        cond_map_boundary: boundary,
    })
}

/// Coordinate `j` of the boundary mode: coordinates with `α < 1` are zero and
/// the rest follow the mode formula on their face. With every `α < 1` the
/// vertex of the largest `α` is used.
fn boundary_mode(alpha: &[f64], j: usize) -> f64 {
    let inside: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] >= 1.0).collect();
    if inside.is_empty() {
        let best = (0..alpha.len()).fold(0, |b, i| if alpha[i] > alpha[b] { i } else { b });
        return if j == best { 1.0 } else { 0.0 };
    }
    if alpha[j] < 1.0 {
        return 0.0;
    }
    let excess: f64 = inside.iter().map(|&i| alpha[i] - 1.0).sum();
    if excess > 0.0 {
        (alpha[j] - 1.0) / excess
    } else {
        1.0 / inside.len() as f64
    }
}

/// Mean over the sampled models of `E(θ_s(j) | x, T)`, using the leaf of each
/// model that covers context `s`.
pub fn rao_blackwell_estimate(
    trace: &[TreeModel],
    tree: &CountTree,
    s: &[Symbol],
    j: Symbol,
    hyper: &DirichletHyper,
) -> Result<f64> {
    rao_blackwell_weighted(trace.iter().map(|t| (t, 1u64)), tree, s, j, hyper)
}

/// [`rao_blackwell_estimate`] over `(model, multiplicity)` pairs.
pub fn rao_blackwell_weighted<'a, I>(
    samples: I,
    tree: &CountTree,
    s: &[Symbol],
    j: Symbol,
    hyper: &DirichletHyper,
) -> Result<f64>
where
    I: IntoIterator<Item = (&'a TreeModel, u64)>,
{
    let mut cache: BTreeMap<Context, f64> = BTreeMap::new();
    let (mut acc, mut n) = (0.0, 0u64);
    for (model, w) in samples {
        let leaf = model.context_leaf(s)?;
        let mean = match cache.get(leaf) {
            Some(&v) => v,
            None => {
                let v = point_estimates(&tree.counts_at(leaf), j, hyper.at(leaf))?.post_mean;
                cache.insert(leaf.clone(), v);
                v
            }
        };
        acc += mean * w as f64;
        n += w;
    }
    if n == 0 {
        return Err(BctError::EmptyTrace);
    }
    Ok(acc / n as f64)
}

/// One model's line in a [`PosteriorReport`].
#[derive(Clone, Debug)]
pub struct ReportEntry {
    pub model: TreeModel,
    pub log_prior: f64,
    pub log_posterior: f64,
    pub log_joint: f64,
}

impl ReportEntry {
    pub fn prior(&self) -> f64 {
        self.log_prior.exp()
    }

    pub fn posterior(&self) -> f64 {
        self.log_posterior.exp()
    }
}

/// Posterior summary of a list of models with their pairwise log-odds.
#[derive(Clone, Debug)]
pub struct PosteriorReport {
    pub entries: Vec<ReportEntry>,
    pub log_evidence: f64,
    /// `log_odds[i][k] = ln π(T_i|x) - ln π(T_k|x)`.
    pub log_odds: Vec<Vec<f64>>,
}

impl PosteriorReport {
    pub fn new(tree: &CountTree, models: &[TreeModel], beta: f64) -> Result<Self> {
        let cfg = PriorConfig::new(tree.m(), tree.max_depth(), beta)?;
        let log_evidence = ctw(tree, beta)?.ln();
        let mut entries = Vec::with_capacity(models.len());
        for model in models {
            let log_prior = model_prior(model, &cfg)?.ln();
            let log_joint = log_prior + marginal_likelihood(tree, model)?.ln();
            entries.push(ReportEntry {
                model: model.clone(),
                log_prior,
                log_posterior: log_joint - log_evidence,
                log_joint,
            });
        }
        let log_odds = entries
            .iter()
            .map(|a| {
                entries
                    .iter()
                    .map(|b| a.log_posterior - b.log_posterior)
                    .collect()
            })
            .collect();
        Ok(PosteriorReport {
            entries,
            log_evidence,
            log_odds,
        })
    }

    pub fn odds(&self, i: usize, k: usize) -> f64 {
        self.log_odds[i][k].exp()
    }
}
