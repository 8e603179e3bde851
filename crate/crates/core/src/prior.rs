//! The model prior `π_D(T; β) = α^{|T|-1} β^{|T|-L_D(T)}` and model enumeration.

use crate::error::{BctError, Result};
use crate::logprob::LogProb;
use crate::model::{count_models, count_models_capped, TreeModel};

/// Default cap on the number of models [`enumerate_models`] will produce.
pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

/// `β = 1 - 2^{-(m-1)}`.
pub fn default_beta(m: usize) -> f64 {
    1.0 - 0.5f64.powi(m as i32 - 1)
}

/// Prior hyperparameters for alphabet size `m` and maximum depth `depth`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PriorConfig {
    m: usize,
    depth: usize,
    beta: f64,
}

impl PriorConfig {
    pub fn new(m: usize, depth: usize, beta: f64) -> Result<Self> {
        if m < 2 {
            return Err(BctError::AlphabetTooSmall(m));
        }
        check_beta(beta)?;
        Ok(PriorConfig { m, depth, beta })
    }

    /// Uses [`default_beta`].
    pub fn with_default_beta(m: usize, depth: usize) -> Self {
        PriorConfig {
            m,
            depth,
            beta: default_beta(m),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `α = (1-β)^{1/(m-1)}`.
    pub fn alpha(&self) -> f64 {
        (1.0 - self.beta).powf(1.0 / (self.m as f64 - 1.0))
    }

    pub fn ln_alpha(&self) -> f64 {
        (-self.beta).ln_1p() / (self.m as f64 - 1.0)
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(BctError::InvalidBeta(beta))
    }
}

pub(crate) fn check_beta_half(beta: f64) -> Result<()> {
    check_beta(beta)?;
    if beta < 0.5 {
        return Err(BctError::BetaBelowHalf(beta));
    }
    Ok(())
}

/// `ln π_D(T; β)`.
pub fn model_prior(model: &TreeModel, cfg: &PriorConfig) -> Result<LogProb> {
    if model.depth() > cfg.depth {
        return Err(BctError::ModelTooDeep {
            model_depth: model.depth(),
            max_depth: cfg.depth,
        });
    }
    let leaves = model.num_leaves() as f64;
    let at_depth = model.leaves_at_depth(cfg.depth) as f64;
    let mut v = (leaves - 1.0) * cfg.ln_alpha();
    if leaves > at_depth {
        v += (leaves - at_depth) * cfg.beta.ln();
    }
    Ok(LogProb(v))
}

/// Every proper m-ary tree of depth at most `depth`, each exactly once.
///
/// Λ comes first; the remaining trees are ordered by their subtree indices,
/// child 0 most significant, recursively.
pub fn enumerate_models(m: usize, depth: usize) -> Result<ModelIter> {
    enumerate_models_capped(m, depth, DEFAULT_ENUM_CAP)
}

pub fn enumerate_models_capped(m: usize, depth: usize, cap: u64) -> Result<ModelIter> {
    if m < 2 {
        return Err(BctError::AlphabetTooSmall(m));
    }
    if count_models_capped(m, depth, cap).is_none() {
        return Err(BctError::EnumerationInfeasible {
            count: count_models(m, depth).to_string(),
            cap,
        });
    }
    let subtrees = if depth == 0 {
        Vec::new()
    } else {
        enumerate_models_capped(m, depth - 1, cap)?.collect()
    };
    Ok(ModelIter {
        m,
        subtrees,
        idx: None,
        done: false,
    })
}

/// Iterator returned by [`enumerate_models`].
pub struct ModelIter {
    m: usize,
    subtrees: Vec<TreeModel>,
    idx: Option<Vec<usize>>,
    done: bool,
}

impl Iterator for ModelIter {
    type Item = TreeModel;

    fn next(&mut self) -> Option<TreeModel> {
        if self.done {
            return None;
        }
        let Some(idx) = self.idx.as_mut() else {
            if self.subtrees.is_empty() {
                self.done = true;
            } else {
                self.idx = Some(vec![0; self.m]);
            }
            return Some(TreeModel::root(self.m));
        };
        let parts: Vec<TreeModel> = idx.iter().map(|&i| self.subtrees[i].clone()).collect();
        let model = TreeModel::join(&parts).expect("subtrees share the alphabet");
        // odometer, last coordinate fastest
        let mut j = self.m;
        loop {
            if j == 0 {
                self.done = true;
                break;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < self.subtrees.len() {
                break;
            }
            idx[j] = 0;
        }
        Some(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logprob::log_sum_exp;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn default_beta_values() {
        assert_eq!(default_beta(2), 0.5);
        assert_eq!(default_beta(3), 0.75);
        assert_eq!(default_beta(4), 0.875);
    }

    #[test]
    fn alpha_identity() {
        for m in 2..6 {
            for beta in [0.1, 0.5, 0.9] {
                let c = PriorConfig::new(m, 3, beta).unwrap();
                assert!((c.alpha().powi(m as i32 - 1) + beta - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn root_prior() {
        let lam = TreeModel::root(2);
        let c0 = PriorConfig::new(2, 0, 0.5).unwrap();
        assert_eq!(model_prior(&lam, &c0).unwrap().ln(), 0.0);
        let c3 = PriorConfig::new(2, 3, 0.3).unwrap();
        assert!((model_prior(&lam, &c3).unwrap().ln() - 0.3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn binary_depth_two_priors() {
        let c = PriorConfig::new(2, 2, 0.5).unwrap();
        let p = |t: &TreeModel| model_prior(t, &c).unwrap().prob();
        assert!((p(&TreeModel::root(2)) - 0.5).abs() < 1e-15);
        let models: Vec<TreeModel> = enumerate_models(2, 2).unwrap().collect();
        for t in &models[1..] {
            assert!((p(t) - 0.125).abs() < 1e-15, "{t}");
        }
        let total: f64 = models.iter().map(p).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn too_deep_model_rejected() {
        let c = PriorConfig::new(2, 1, 0.5).unwrap();
        let r = model_prior(&TreeModel::complete(2, 2), &c);
        assert!(matches!(r, Err(BctError::ModelTooDeep { .. })));
    }

    #[test]
    fn invalid_beta_rejected() {
        assert!(PriorConfig::new(2, 1, 0.0).is_err());
        assert!(PriorConfig::new(2, 1, 1.0).is_err());
        assert!(matches!(
            check_beta_half(0.4),
            Err(BctError::BetaBelowHalf(_))
        ));
    }

    #[test]
    fn enumeration_small_cases() {
        let d1: Vec<_> = enumerate_models(2, 1).unwrap().collect();
        assert_eq!(d1, vec![TreeModel::root(2), TreeModel::complete(2, 1)]);
        let t1: Vec<_> = enumerate_models(3, 1).unwrap().collect();
        assert_eq!(t1, vec![TreeModel::root(3), TreeModel::complete(3, 1)]);
        for (m, d) in [(2, 2), (2, 3), (2, 4), (3, 2), (4, 2)] {
            let all: Vec<_> = enumerate_models(m, d).unwrap().collect();
            let distinct: BTreeSet<_> = all.iter().cloned().collect();
            assert_eq!(all.len(), distinct.len());
            assert_eq!(all.len().to_string(), count_models(m, d).to_string());
            assert!(all.iter().all(|t| t.depth() <= d));
        }
    }

    #[test]
    fn enumeration_cap() {
        assert!(matches!(
            enumerate_models(2, 6),
            Err(BctError::EnumerationInfeasible { .. })
        ));
        assert!(enumerate_models_capped(2, 3, 26).is_ok());
        assert!(enumerate_models_capped(2, 3, 25).is_err());
    }

    #[test]
    fn normalization() {
        for (m, dmax) in [(2usize, 4usize), (3, 2)] {
            for d in 0..=dmax {
                for beta in [0.3, 0.5, default_beta(m), 0.9] {
                    let c = PriorConfig::new(m, d, beta).unwrap();
                    let lp: Vec<f64> = enumerate_models(m, d)
                        .unwrap()
                        .map(|t| model_prior(&t, &c).unwrap().ln())
                        .collect();
                    assert!(log_sum_exp(&lp).abs() < 1e-10, "m={m} d={d} beta={beta}");
                }
            }
        }
    }

    fn random_tree(m: usize, depth: usize, splits: usize, rng: &mut ChaCha8Rng) -> TreeModel {
        let mut t = TreeModel::root(m);
        for _ in 0..splits {
            let grow: Vec<_> = t.growable_leaves(depth).into_iter().cloned().collect();
            if grow.is_empty() {
                break;
            }
            let s = &grow[rng.random_range(0..grow.len())];
            t = t.split(s).unwrap();
        }
        t
    }

    #[test]
    fn union_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..100 {
            let m = 2 + i % 3;
            let d = 1 + i % 4;
            let t = loop {
                let t = random_tree(m, d, rng.random_range(1..12), &mut rng);
                if !t.is_root() {
                    break t;
                }
            };
            let beta = [0.3, 0.5, 0.8][i % 3];
            let c = PriorConfig::new(m, d, beta).unwrap();
            let c1 = PriorConfig::new(m, d - 1, beta).unwrap();
            let parts: f64 = t
                .subtrees()
                .unwrap()
                .iter()
                .map(|s| model_prior(s, &c1).unwrap().ln())
                .sum();
            let lhs = model_prior(&t, &c).unwrap().ln();
            let rhs = (m as f64 - 1.0) * c.ln_alpha() + parts;
            assert!((lhs - rhs).abs() < 1e-12, "{t}");
        }
    }

    proptest! {
        #[test]
        fn branch_ratio_law(seed in any::<u64>(), m in 2usize..5, d in 1usize..5, beta in 0.05f64..0.95) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree(m, d, rng.random_range(0..8), &mut rng);
            let grow: Vec<_> = t.growable_leaves(d).into_iter().cloned().collect();
            prop_assume!(!grow.is_empty());
            let s = &grow[rng.random_range(0..grow.len())];
            let t2 = t.split(s).unwrap();
            let c = PriorConfig::new(m, d, beta).unwrap();
            let ratio = model_prior(&t2, &c).unwrap().ln() - model_prior(&t, &c).unwrap().ln();
            let expected = if s.len() + 1 < d {
                (1.0 - beta).ln() + (m as f64 - 1.0) * beta.ln()
            } else {
                (1.0 - beta).ln() - beta.ln()
            };
            prop_assert!((ratio - expected).abs() < 1e-12);
        }
    }
}
