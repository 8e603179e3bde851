//! Sampling from variable-memory chains, minimal models and fixture chains.

use crate::alphabet::{Alphabet, Series, Symbol};
use crate::error::{BctError, Result};
use crate::likelihood::ParamSet;
use crate::model::{child, Context, TreeModel};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// The generator used throughout the crate, seeded deterministically.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws `x_1..x_n` from the chain `(model, θ)` started from `context`
/// (time order, at least `d(model)` symbols).
pub fn sample_chain<R: Rng>(
    model: &TreeModel,
    theta: &ParamSet,
    n: usize,
    context: &[Symbol],
    rng: &mut R,
) -> Result<Series> {
    let m = model.m();
    theta.check_covers(model)?;
    let depth = model.depth();
    if context.len() < depth {
        return Err(BctError::InsufficientContext {
            needed: depth,
            available: context.len(),
        });
    }
    let mut dists: HashMap<&Context, WeightedIndex<f64>> = HashMap::new();
    for leaf in model.leaves() {
        let p = theta.get(leaf).expect("covered");
        let dist =
            WeightedIndex::new(p.iter().copied()).map_err(|e| BctError::InvalidParameters {
                context: leaf.clone(),
                reason: e.to_string(),
            })?;
        dists.insert(leaf, dist);
    }
    let mut full: Vec<Symbol> = context.to_vec();
    full.reserve(n);
    let mut past: Vec<Symbol> = Vec::with_capacity(depth);
    for _ in 0..n {
        past.clear();
        past.extend(full.iter().rev().take(depth));
        let leaf = model.context_leaf(&past)?;
        full.push(dists[leaf].sample(rng) as Symbol);
    }
    let data = full.split_off(context.len());
    Series::new(Alphabet::numeric(m)?, full, data)
}

/// Merges every sibling m-tuple of leaves with identical parameters (within
/// 1e-12) into its parent, until no such tuple remains.
pub fn minimal_model(model: &TreeModel, theta: &ParamSet) -> Result<(TreeModel, ParamSet)> {
    theta.check_covers(model)?;
    let m = model.m();
    let mut t = model.clone();
    let mut th = ParamSet::from_pairs(
        m,
        t.leaves()
            .iter()
            .map(|s| (s.clone(), theta.get(s).expect("covered").to_vec())),
    )?;
    loop {
        let mergeable = t.prunable_nodes().into_iter().find(|s| {
            let first = th.get(&child(s, 0)).expect("leaf");
            (1..m).all(|j| {
                let other = th.get(&child(s, j as Symbol)).expect("leaf");
                first.iter().zip(other).all(|(a, b)| (a - b).abs() <= 1e-12)
            })
        });
        let Some(s) = mergeable else { break };
        let shared = th.get(&child(&s, 0)).expect("leaf").to_vec();
        t = t.merge(&s)?;
        th = ParamSet::from_pairs(
            m,
            t.leaves().iter().map(|l| {
                let v = if *l == s {
                    shared.clone()
                } else {
                    th.get(l).expect("kept leaf").to_vec()
                };
                (l.clone(), v)
            }),
        )?;
    }
    Ok((t, th))
}

/// A named chain used in tests and experiments.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub model: TreeModel,
    pub theta: ParamSet,
}

/// Names accepted by [`fixture`].
pub const FIXTURES: [&str; 3] = ["ternary5", "renewal", "lag3"];

impl Fixture {
    /// `n` observations preceded by a context of `max_depth` symbols, all
    /// drawn from the chain started in the all-zero past.
    pub fn sample<R: Rng>(&self, n: usize, max_depth: usize, rng: &mut R) -> Result<Series> {
        let start = vec![0; self.model.depth()];
        let s = sample_chain(&self.model, &self.theta, n + max_depth, &start, rng)?;
        Series::consume_prefix(s.alphabet().clone(), s.data().to_vec(), max_depth)
    }

    pub fn m(&self) -> usize {
        self.model.m()
    }
}

fn leaves_from(m: usize, spec: &[(&str, Vec<f64>)]) -> (TreeModel, ParamSet) {
    let pairs: Vec<(Context, Vec<f64>)> = spec
        .iter()
        .map(|(s, p)| (s.bytes().map(|b| b - b'0').collect(), p.clone()))
        .collect();
    let model =
        TreeModel::from_leaves(m, pairs.iter().map(|p| p.0.clone())).expect("fixture is proper");
    let theta = ParamSet::from_pairs(m, pairs).expect("fixture parameters are valid");
    (model, theta)
}

/// Looks up a fixture chain by name.
///
/// * `ternary5`: ternary chain of depth 5 with 13 leaves.
/// * `renewal`: binary chain whose next symbol depends on the number of 1s
///   since the last 0, up to 8 (parameter values are approximate).
/// * `lag3`: 6-symbol chain where `x_n` depends on `x_{n-3}` only.
pub fn fixture(name: &str) -> Result<Fixture> {
    match name {
        "ternary5" => {
            let (model, theta) = leaves_from(
                3,
                &[
                    ("1", vec![0.4, 0.4, 0.2]),
                    ("2", vec![0.2, 0.4, 0.4]),
                    ("00", vec![0.4, 0.2, 0.4]),
                    ("01", vec![0.3, 0.6, 0.1]),
                    ("022", vec![0.5, 0.3, 0.2]),
                    ("0212", vec![0.1, 0.3, 0.6]),
                    ("0211", vec![0.05, 0.25, 0.7]),
                    ("0210", vec![0.35, 0.55, 0.1]),
                    ("0202", vec![0.1, 0.2, 0.7]),
                    ("0201", vec![0.8, 0.05, 0.15]),
                    ("02002", vec![0.7, 0.2, 0.1]),
                    ("02001", vec![0.1, 0.1, 0.8]),
                    ("02000", vec![0.3, 0.45, 0.25]),
                ],
            );
            Ok(Fixture {
                name: "ternary5",
                model,
                theta,
            })
        }
        "renewal" => {
            let p0 = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95];
            let mut spec: Vec<(String, Vec<f64>)> = (0..8)
                .map(|k| (format!("{}0", "1".repeat(k)), vec![p0[k], 1.0 - p0[k]]))
                .collect();
            spec.push(("1".repeat(8), vec![p0[8], 1.0 - p0[8]]));
            let spec: Vec<(&str, Vec<f64>)> =
                spec.iter().map(|(s, p)| (s.as_str(), p.clone())).collect();
            let (model, theta) = leaves_from(2, &spec);
            Ok(Fixture {
                name: "renewal",
                model,
                theta,
            })
        }
        "lag3" => {
            let q: [[f64; 6]; 6] = [
                [0.5, 0.2, 0.1, 0.0, 0.05, 0.15],
                [0.4, 0.0, 0.4, 0.2, 0.0, 0.0],
                [0.3, 0.1, 0.23, 0.12, 0.05, 0.2],
                [0.05, 0.1, 0.05, 0.05, 0.03, 0.72],
                [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                [0.1, 0.2, 0.3, 0.2, 0.05, 0.15],
            ];
            let model = TreeModel::complete(6, 3);
            let theta = ParamSet::from_pairs(
                6,
                model
                    .leaves()
                    .iter()
                    .map(|s| (s.clone(), q[s[2] as usize].to_vec())),
            )
            .expect("rows of Q are distributions");
            Ok(Fixture {
                name: "lag3",
                model,
                theta,
            })
        }
        other => Err(BctError::UnknownFixture(other.to_string())),
    }
}

/// Binary spike train: after a spike (1) the next `refractory` bins are 0,
/// then each bin spikes independently with probability `rate`.
pub fn spike_train<R: Rng>(
    n: usize,
    rate: f64,
    refractory: usize,
    max_depth: usize,
    rng: &mut R,
) -> Result<Series> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(BctError::InvalidParameters {
            context: Vec::new(),
            reason: format!("spike rate {rate}"),
        });
    }
    let total = n + max_depth;
    let mut out = Vec::with_capacity(total);
    let mut quiet = 0usize;
    for _ in 0..total {
        let x = if quiet > 0 {
            quiet -= 1;
            0
        } else if rng.random_bool(rate) {
            quiet = refractory;
            1
        } else {
            0
        };
        out.push(x);
    }
    Series::consume_prefix(Alphabet::numeric(2)?, out, max_depth)
}
