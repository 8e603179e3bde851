//! Metropolis samplers over model space.
//!
//! The random-walk (RW) sampler adds or removes one m-branch per step. The
//! jump sampler also proposes, with probability `p`, a uniform draw from a
//! precomputed set `T*` of high-posterior models. Either can be combined
//! with Gibbs draws of `θ` from its full conditional.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; chain `c` of a
//! multi-chain run uses stream `c` of that generator.

use crate::alphabet::Symbol;
use crate::count_tree::CountTree;
use crate::error::{BctError, Result};
use crate::likelihood::{DirichletHyper, ParamSet};
use crate::model::{child, Context, Neighbor, TreeModel};
use crate::posterior::{full_conditional, log_joint};
use crate::prior::check_beta;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use std::collections::{HashMap, HashSet};
use std::io::Write;

/// Which proposal kernel to use.
#[derive(Clone, Debug)]
pub enum Sampler {
    RandomWalk,
    /// Jump with probability `p` to a uniform element of `top`.
    Jump {
        p: f64,
        top: Vec<TreeModel>,
    },
}

#[derive(Clone, Debug)]
pub struct McmcConfig {
    /// Number of iterations `N`.
    pub iterations: usize,
    /// Fraction of the iterations discarded as burn-in.
    pub burn_in: f64,
    pub seed: u64,
    pub beta: f64,
    pub sampler: Sampler,
    /// Starting model; Λ when absent.
    pub initial: Option<TreeModel>,
    /// When set, each recorded iteration also draws `θ` at the leaf covering
    /// this context from its full conditional.
    pub theta_probe: Option<Context>,
}

impl McmcConfig {
    /// RW sampler from Λ with 10% burn-in.
    pub fn new(iterations: usize, seed: u64, beta: f64) -> Self {
        McmcConfig {
            iterations,
            burn_in: 0.1,
            seed,
            beta,
            sampler: Sampler::RandomWalk,
            initial: None,
            theta_probe: None,
        }
    }

    pub fn with_jump(mut self, p: f64, top: Vec<TreeModel>) -> Self {
        self.sampler = Sampler::Jump { p, top };
        self
    }

    fn validate(&self, tree: &CountTree) -> Result<()> {
        check_beta(self.beta)?;
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(BctError::InvalidBurnIn(self.burn_in));
        }
        if let Sampler::Jump { p, top } = &self.sampler {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(BctError::InvalidJumpProbability(*p));
            }
            if top.is_empty() {
                return Err(BctError::EmptyTopSet);
            }
            for t in top {
                check_model(t, tree)?;
            }
        }
        if let Some(t) = &self.initial {
            check_model(t, tree)?;
        }
        Ok(())
    }
}

fn check_model(t: &TreeModel, tree: &CountTree) -> Result<()> {
    if t.m() != tree.m() {
        return Err(BctError::ImproperModel(format!(
            "model alphabet {} differs from data alphabet {}",
            t.m(),
            tree.m()
        )));
    }
    if t.depth() > tree.max_depth() {
        return Err(BctError::ModelTooDeep {
            model_depth: t.depth(),
            max_depth: tree.max_depth(),
        });
    }
    Ok(())
}

/// Result of one Metropolis step.
#[derive(Clone, Debug)]
pub struct Step {
    pub model: TreeModel,
    pub accepted: bool,
    /// `ln r(T, T')` of the proposal; `None` when no move was proposed.
    pub log_ratio: Option<f64>,
}

/// The fixed ingredients of a kernel: data, prior and the jump set.
struct Kernel<'a> {
    tree: &'a CountTree,
    m: usize,
    depth: usize,
    lb: f64,
    lnb: f64,
    jump: Option<JumpSet>,
}

/// Jump probability, the top models, their set, and their log joint probabilities.
type JumpSet = (f64, Vec<TreeModel>, HashSet<TreeModel>, Vec<f64>);

impl<'a> Kernel<'a> {
    fn new(tree: &'a CountTree, cfg: &McmcConfig) -> Result<Self> {
        cfg.validate(tree)?;
        let jump = match &cfg.sampler {
            Sampler::RandomWalk => None,
            Sampler::Jump { p, top } => {
                let set: HashSet<TreeModel> = top.iter().cloned().collect();
                let lj = top
                    .iter()
                    .map(|t| log_joint(tree, t, cfg.beta).map(|v| v.ln()))
                    .collect::<Result<_>>()?;
                Some((*p, top.clone(), set, lj))
            }
        };
        Ok(Kernel {
            tree,
            m: tree.m(),
            depth: tree.max_depth(),
            lb: cfg.beta.ln(),
            lnb: (-cfg.beta).ln_1p(),
            jump,
        })
    }

    /// `ln [π(T'|x) / π(T|x)]` for `T'` obtained by splitting leaf `s`.
    fn log_grow_odds(&self, s: &[Symbol]) -> f64 {
        let prior = if s.len() + 1 < self.depth {
            self.lnb + (self.m as f64 - 1.0) * self.lb
        } else {
            self.lnb - self.lb
        };
        let kids: f64 = (0..self.m)
            .map(|j| self.tree.log_pe_at(&child(s, j as Symbol)))
            .sum();
        prior + kids - self.tree.log_pe_at(s)
    }

    fn log_odds(&self, nb: &Neighbor) -> f64 {
        match nb {
            Neighbor::Grow(s) => self.log_grow_odds(s),
            Neighbor::Prune(s) => -self.log_grow_odds(s),
        }
    }

    /// RW proposal probability `q(T'|T)` for the neighbour `T'` of `from`.
    fn q(&self, from: &TreeModel, nb: &Neighbor) -> f64 {
        if from.is_root() {
            1.0
        } else if from.is_complete(self.depth) {
            1.0 / from.num_prunable() as f64
        } else {
            match nb {
                Neighbor::Grow(_) => 0.5 / from.num_growable(self.depth) as f64,
                Neighbor::Prune(_) => 0.5 / from.num_prunable() as f64,
            }
        }
    }

    fn propose_rw<R: Rng>(&self, from: &TreeModel, rng: &mut R) -> Option<(TreeModel, Neighbor)> {
        if self.depth == 0 {
            return None;
        }
        let grow = if from.is_root() {
            true
        } else if from.is_complete(self.depth) {
            false
        } else {
            rng.random_bool(0.5)
        };
        if grow {
            let leaves = from.growable_leaves(self.depth);
            let s = leaves[rng.random_range(0..leaves.len())].clone();
            let to = from.split(&s).expect("growable leaf");
            Some((to, Neighbor::Grow(s)))
        } else {
            let nodes = from.prunable_nodes();
            debug_assert!(
                !nodes.is_empty(),
                "a proper tree other than Λ has a prunable node"
            );
            let s = nodes[rng.random_range(0..nodes.len())].clone();
            let to = from.merge(&s).expect("prunable node");
            Some((to, Neighbor::Prune(s)))
        }
    }

    /// `ln r(T, T')` of the RW sampler for a neighbouring pair.
    fn log_rw_ratio(&self, from: &TreeModel, to: &TreeModel, nb: &Neighbor) -> f64 {
        let back = reverse(nb);
        self.log_odds(nb) + self.q(to, &back).ln() - self.q(from, nb).ln()
    }

    /// `ln r(T, T')` of the jump sampler. `lj` gives `ln π(T) P(x|T)` for
    /// non-neighbouring pairs.
    fn log_jump_ratio(&self, from: &TreeModel, to: &TreeModel, lj: impl Fn() -> (f64, f64)) -> f64 {
        let (p, top, set, _) = self.jump.as_ref().expect("jump kernel");
        let pk = p / top.len() as f64;
        let in_from = set.contains(from);
        let in_to = set.contains(to);
        match from.neighbor(to) {
            Some(nb) => {
                let back = reverse(&nb);
                let num = (1.0 - p) * self.q(to, &back) + if in_from { pk } else { 0.0 };
                let den = (1.0 - p) * self.q(from, &nb) + if in_to { pk } else { 0.0 };
                self.log_odds(&nb) + num.ln() - den.ln()
            }
            None => {
                if from == to {
                    0.0
                } else if !in_from {
                    f64::NEG_INFINITY
                } else {
                    let (lf, lt) = lj();
                    lt - lf
                }
            }
        }
    }
}

fn reverse(nb: &Neighbor) -> Neighbor {
    match nb {
        Neighbor::Grow(s) => Neighbor::Prune(s.clone()),
        Neighbor::Prune(s) => Neighbor::Grow(s.clone()),
    }
}

fn accept<R: Rng>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// One step of the RW sampler from `current`.
pub fn rw_step<R: Rng>(
    current: &TreeModel,
    tree: &CountTree,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<Step> {
    let cfg = McmcConfig {
        sampler: Sampler::RandomWalk,
        ..cfg.clone()
    };
    let k = Kernel::new(tree, &cfg)?;
    check_model(current, tree)?;
    Ok(match k.propose_rw(current, rng) {
        None => Step {
            model: current.clone(),
            accepted: false,
            log_ratio: None,
        },
        Some((to, nb)) => {
            let r = k.log_rw_ratio(current, &to, &nb);
            if accept(r, rng) {
                Step {
                    model: to,
                    accepted: true,
                    log_ratio: Some(r),
                }
            } else {
                Step {
                    model: current.clone(),
                    accepted: false,
                    log_ratio: Some(r),
                }
            }
        }
    })
}

/// One step of the jump sampler from `current`; `cfg.sampler` must be [`Sampler::Jump`].
pub fn jump_step<R: Rng>(
    current: &TreeModel,
    tree: &CountTree,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<Step> {
    if !matches!(cfg.sampler, Sampler::Jump { .. }) {
        return Err(BctError::EmptyTopSet);
    }
    let k = Kernel::new(tree, cfg)?;
    check_model(current, tree)?;
    let lj_current = log_joint(tree, current, cfg.beta)?.ln();
    Ok(jump_move(&k, current, lj_current, rng).0)
}

/// Returns the step and the log joint of the resulting model.
fn jump_move<R: Rng>(k: &Kernel, current: &TreeModel, lj_current: f64, rng: &mut R) -> (Step, f64) {
    let (p, top, _, top_lj) = k.jump.as_ref().expect("jump kernel");
    let (to, to_lj) = if rng.random_bool(*p) {
        let i = rng.random_range(0..top.len());
        (top[i].clone(), Some(top_lj[i]))
    } else {
        match k.propose_rw(current, rng) {
            Some((to, _)) => (to, None),
            None => {
                return (
                    Step {
                        model: current.clone(),
                        accepted: false,
                        log_ratio: None,
                    },
                    lj_current,
                )
            }
        }
    };
    let r = k.log_jump_ratio(current, &to, || {
        (
            lj_current,
            to_lj.expect("non-neighbour proposals come from T*"),
        )
    });
    if accept(r, rng) {
        let lj = match (to_lj, current.neighbor(&to)) {
            (Some(v), _) => v,
            (None, Some(nb)) => lj_current + k.log_odds(&nb),
            (None, None) => lj_current,
        };
        (
            Step {
                model: to,
                accepted: true,
                log_ratio: Some(r),
            },
            lj,
        )
    } else {
        (
            Step {
                model: current.clone(),
                accepted: false,
                log_ratio: Some(r),
            },
            lj_current,
        )
    }
}

/// `ln r(T, T')` that the configured sampler would use for the move `from → to`.
///
/// For the RW sampler `to` must be a neighbour of `from`.
pub fn log_acceptance_ratio(
    from: &TreeModel,
    to: &TreeModel,
    tree: &CountTree,
    cfg: &McmcConfig,
) -> Result<f64> {
    let k = Kernel::new(tree, cfg)?;
    match &cfg.sampler {
        Sampler::RandomWalk => {
            let nb = from.neighbor(to).ok_or_else(|| {
                BctError::ImproperModel("RW moves join neighbouring models only".into())
            })?;
            Ok(k.log_rw_ratio(from, to, &nb))
        }
        Sampler::Jump { .. } => {
            let lf = log_joint(tree, from, cfg.beta)?.ln();
            let lt = log_joint(tree, to, cfg.beta)?.ln();
            Ok(k.log_jump_ratio(from, to, || (lf, lt)))
        }
    }
}

/// Independent Dirichlet draws of `θ_s` from the full conditional at every leaf.
pub fn gibbs_theta<R: Rng>(
    model: &TreeModel,
    tree: &CountTree,
    hyper: &DirichletHyper,
    rng: &mut R,
) -> Result<ParamSet> {
    let fc = full_conditional(tree, model, hyper)?;
    let pairs: Vec<(Context, Vec<f64>)> = fc
        .into_iter()
        .map(|(s, alpha)| (s, dirichlet(&alpha, rng)))
        .collect();
    ParamSet::from_pairs(tree.m(), pairs)
}

/// A Dirichlet draw via normalised Gamma variates.
pub(crate) fn dirichlet<R: Rng>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
            .collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 {
            return g.into_iter().map(|x| x / total).collect();
        }
    }
}

/// Visited models after burn-in, with summaries.
#[derive(Clone, Debug)]
pub struct Trace {
    models: Vec<TreeModel>,
    /// Iteration index, model id and acceptance flag of each recorded state.
    records: Vec<(usize, u32, bool)>,
    theta: Vec<Vec<f64>>,
    proposals: u64,
    accepted: u64,
    max_depth: usize,
}

impl Trace {
    /// Number of recorded states.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct visited models, indexed by model id in order of first visit.
    pub fn models(&self) -> &[TreeModel] {
        &self.models
    }

    /// The recorded states in order.
    pub fn samples(&self) -> impl Iterator<Item = &TreeModel> + '_ {
        self.records.iter().map(|r| &self.models[r.1 as usize])
    }

    pub fn model_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.records.iter().map(|r| r.1)
    }

    /// Share of proposed moves that were accepted over all iterations;
    /// `None` when nothing was proposed.
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.proposals > 0).then(|| self.accepted as f64 / self.proposals as f64)
    }

    /// `(model, visits)` sorted by decreasing visits, ties by model id.
    pub fn visit_counts(&self) -> Vec<(&TreeModel, u64)> {
        let mut counts = vec![0u64; self.models.len()];
        for r in &self.records {
            counts[r.1 as usize] += 1;
        }
        let mut out: Vec<(usize, u64)> = counts
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        out.into_iter().map(|(i, c)| (&self.models[i], c)).collect()
    }

    /// Empirical posterior frequency of `model`.
    pub fn frequency(&self, model: &TreeModel) -> f64 {
        match self.models.iter().position(|t| t == model) {
            Some(id) => {
                self.records.iter().filter(|r| r.1 as usize == id).count() as f64
                    / self.len() as f64
            }
            None => 0.0,
        }
    }

    /// Indicator series `1{T^(t) = model}`, for standard errors.
    pub fn indicator(&self, model: &TreeModel) -> Vec<f64> {
        let id = self.models.iter().position(|t| t == model);
        self.records
            .iter()
            .map(|r| if Some(r.1 as usize) == id { 1.0 } else { 0.0 })
            .collect()
    }

    /// Depth `d(T^(t))` of each recorded state.
    pub fn depths(&self) -> Vec<usize> {
        self.samples().map(|t| t.depth()).collect()
    }

    /// Empirical distribution of `d(T)` on `0..=D`.
    pub fn depth_histogram(&self) -> Vec<f64> {
        let depths: Vec<usize> = self.models.iter().map(|t| t.depth()).collect();
        let mut h = vec![0.0; self.max_depth + 1];
        for r in &self.records {
            h[depths[r.1 as usize]] += 1.0;
        }
        let n = self.len() as f64;
        h.iter_mut().for_each(|x| *x /= n);
        h
    }

    /// `θ` draws at the probe leaf, one per recorded state.
    pub fn theta_samples(&self) -> &[Vec<f64>] {
        &self.theta
    }

    /// Tab-separated `iteration, model_id, depth, accepted`, with a header line.
    pub fn write_table<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration\tmodel_id\tdepth\taccepted")?;
        for &(t, id, acc) in &self.records {
            writeln!(
                w,
                "{t}\t{id}\t{}\t{}",
                self.models[id as usize].depth(),
                acc as u8
            )?;
        }
        Ok(())
    }
}

/// Runs the configured chain. States `T^(b+1), .., T^(N)` are recorded,
/// where `b = ⌊burn_in · N⌋`; with `N = 0` the trace holds `T^(0)` only.
pub fn run_chain(cfg: &McmcConfig, tree: &CountTree) -> Result<Trace> {
    run_chain_on_stream(cfg, tree, 0)
}

/// Runs `chains` independent chains concurrently on streams `0..chains`.
pub fn run_chains(cfg: &McmcConfig, tree: &CountTree, chains: usize) -> Result<Vec<Trace>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains as u64)
            .map(|c| scope.spawn(move || run_chain_on_stream(cfg, tree, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}

fn run_chain_on_stream(cfg: &McmcConfig, tree: &CountTree, stream: u64) -> Result<Trace> {
    let kernel = Kernel::new(tree, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut current = cfg
        .initial
        .clone()
        .unwrap_or_else(|| TreeModel::root(tree.m()));
    let mut lj = log_joint(tree, &current, cfg.beta)?.ln();
    let hyper = tree.hyper().clone();
    let n = cfg.iterations;
    let burn = (cfg.burn_in * n as f64).floor() as usize;

    let mut ids: HashMap<TreeModel, u32> = HashMap::new();
    let mut trace = Trace {
        models: Vec::new(),
        records: Vec::with_capacity(n - burn + 1),
        theta: Vec::new(),
        proposals: 0,
        accepted: 0,
        max_depth: tree.max_depth(),
    };
    let mut current_id: Option<u32> = None;
    let mut record = |trace: &mut Trace,
                      model: &TreeModel,
                      id: &mut Option<u32>,
                      t: usize,
                      acc: bool,
                      rng: &mut ChaCha8Rng|
     -> Result<()> {
        let mid = match id {
            Some(i) => *i,
            None => {
                let next = ids.len() as u32;
                let i = *ids.entry(model.clone()).or_insert_with(|| {
                    trace.models.push(model.clone());
                    next
                });
                *id = Some(i);
                i
            }
        };
        trace.records.push((t, mid, acc));
        if let Some(s) = &cfg.theta_probe {
            let leaf = model.context_leaf(s)?;
            let alpha: Vec<f64> = tree
                .counts_at(leaf)
                .iter()
                .zip(hyper.at(leaf))
                .map(|(&c, &g)| c as f64 + g)
                .collect();
            trace.theta.push(dirichlet(&alpha, rng));
        }
        Ok(())
    };

    if n == 0 {
        record(&mut trace, &current, &mut current_id, 0, false, &mut rng)?;
        return Ok(trace);
    }
    for t in 1..=n {
        let step = if kernel.jump.is_some() {
            let (step, new_lj) = jump_move(&kernel, &current, lj, &mut rng);
            lj = new_lj;
            step
        } else {
            match kernel.propose_rw(&current, &mut rng) {
                None => Step {
                    model: current.clone(),
                    accepted: false,
                    log_ratio: None,
                },
                Some((to, nb)) => {
                    let r = kernel.log_rw_ratio(&current, &to, &nb);
                    if accept(r, &mut rng) {
                        Step {
                            model: to,
                            accepted: true,
                            log_ratio: Some(r),
                        }
                    } else {
                        Step {
                            model: current.clone(),
                            accepted: false,
                            log_ratio: Some(r),
                        }
                    }
                }
            }
        };
        if step.log_ratio.is_some() {
            trace.proposals += 1;
        }
        if step.accepted {
            trace.accepted += 1;
            if step.model != current {
                current = step.model;
                current_id = None;
            }
        }
        if t > burn {
            record(
                &mut trace,
                &current,
                &mut current_id,
                t,
                step.accepted,
                &mut rng,
            )?;
        }
    }
    Ok(trace)
}

/// Batch-means standard error of the mean of `xs`.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(xs.len().max(2));
    let size = xs.len() / b;
    if size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| xs[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mu = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    (var / b as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{Alphabet, Series};
    use crate::exact::kbct;
    use crate::exact::testutil::random_series;
    use crate::posterior::model_posterior;
    use crate::prior::enumerate_models;

    fn tiny_tree() -> CountTree {
        let s = Series::new(Alphabet::numeric(2).unwrap(), vec![0], vec![0, 1, 0]).unwrap();
        CountTree::build(&s, 1).unwrap()
    }

    #[test]
    fn root_always_proposes_complete_depth_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_series(&mut rng, 3, 3, 50);
        let t = CountTree::build(&s, 3).unwrap();
        let k = Kernel::new(&t, &McmcConfig::new(1, 0, 0.75)).unwrap();
        for _ in 0..20 {
            let (to, nb) = k.propose_rw(&TreeModel::root(3), &mut rng).unwrap();
            assert_eq!(to, TreeModel::complete(3, 1));
            assert_eq!(nb, Neighbor::Grow(vec![]));
        }
    }

    #[test]
    fn tiny_ratio_from_root() {
        // D = 1: q(T_c(1)|Λ) = 1 and q(Λ|T_c(1)) = m^0 = 1, posterior odds 1
        let t = tiny_tree();
        let cfg = McmcConfig::new(1, 0, 0.5);
        let r = log_acceptance_ratio(&TreeModel::root(2), &TreeModel::complete(2, 1), &t, &cfg)
            .unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn grow_into_complete_tree_factor() {
        // T has one growable leaf left; T' = T_c(D): q(T|T') / q(T'|T) = m^{-(D-1)} / (1/2)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (m, d) = (2usize, 3usize);
        let s = random_series(&mut rng, m, d, 80);
        let t = CountTree::build(&s, d).unwrap();
        let full = TreeModel::complete(m, d);
        let from = full.merge(&[0, 1]).unwrap();
        let cfg = McmcConfig::new(1, 0, 0.5);
        let r = log_acceptance_ratio(&from, &full, &t, &cfg).unwrap();
        let odds = crate::posterior::log_joint(&t, &full, 0.5).unwrap().ln()
            - crate::posterior::log_joint(&t, &from, 0.5).unwrap().ln();
        let expected = odds + (2.0 * (m as f64).powi(-(d as i32 - 1))).ln();
        assert!((r - expected).abs() < 1e-10);
    }

    #[test]
    fn detailed_balance_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = rng.random_range(2..=3);
            let d = rng.random_range(1..=4);
            let s = random_series(&mut rng, m, d, 100);
            let t = CountTree::build(&s, d).unwrap();
            let top: Vec<_> = kbct(&t, 0.5, 4).unwrap().into_iter().map(|x| x.0).collect();
            for cfg in [
                McmcConfig::new(1, 0, 0.5),
                McmcConfig::new(1, 0, 0.5).with_jump(0.3, top.clone()),
            ] {
                let k = Kernel::new(&t, &cfg).unwrap();
                let mut cur = TreeModel::root(m);
                for _ in 0..40 {
                    let (to, _) = k.propose_rw(&cur, &mut rng).unwrap();
                    assert!(to.depth() <= d);
                    assert!(TreeModel::from_leaves(m, to.leaves().iter().cloned()).is_ok());
                    let fwd = log_acceptance_ratio(&cur, &to, &t, &cfg).unwrap();
                    let bwd = log_acceptance_ratio(&to, &cur, &t, &cfg).unwrap();
                    assert!((fwd + bwd).abs() < 1e-9);
                    cur = to;
                }
                for a in &top {
                    for b in &top {
                        if let Sampler::Jump { .. } = cfg.sampler {
                            let fwd = log_acceptance_ratio(a, b, &t, &cfg).unwrap();
                            let bwd = log_acceptance_ratio(b, a, &t, &cfg).unwrap();
                            assert!((fwd + bwd).abs() < 1e-9);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn jump_from_outside_top_set_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_series(&mut rng, 2, 3, 100);
        let t = CountTree::build(&s, 3).unwrap();
        let target = TreeModel::complete(2, 3);
        let cfg = McmcConfig::new(1, 0, 0.5).with_jump(0.5, vec![target.clone()]);
        let r = log_acceptance_ratio(&TreeModel::root(2), &target, &t, &cfg).unwrap();
        assert_eq!(r, f64::NEG_INFINITY);
    }

    #[test]
    fn jump_ratio_between_neighbours_in_top_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_series(&mut rng, 2, 3, 100);
        let t = CountTree::build(&s, 3).unwrap();
        let a = TreeModel::complete(2, 1);
        let b = a.split(&[0]).unwrap();
        let p = 0.4;
        let cfg =
            McmcConfig::new(1, 0, 0.5).with_jump(p, vec![a.clone(), b.clone(), TreeModel::root(2)]);
        let pk = p / 3.0;
        // q(b|a): a is neither Λ nor complete at depth 3; 2 growable leaves
        let q_ab = 0.5 / 2.0;
        // q(a|b): one prunable node (0)
        let q_ba = 0.5 / 1.0;
        let odds = crate::posterior::log_joint(&t, &b, 0.5).unwrap().ln()
            - crate::posterior::log_joint(&t, &a, 0.5).unwrap().ln();
        let expected = odds + ((1.0 - p) * q_ba + pk).ln() - ((1.0 - p) * q_ab + pk).ln();
        let r = log_acceptance_ratio(&a, &b, &t, &cfg).unwrap();
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_and_depth_zero() {
        let t = tiny_tree();
        let tr = run_chain(&McmcConfig::new(0, 1, 0.5), &t).unwrap();
        assert_eq!(tr.len(), 1);
        assert!(tr.acceptance_rate().is_none());
        let s = Series::new(Alphabet::numeric(2).unwrap(), vec![], vec![0, 1, 1]).unwrap();
        let t0 = CountTree::build(&s, 0).unwrap();
        let tr0 = run_chain(&McmcConfig::new(100, 1, 0.5), &t0).unwrap();
        assert_eq!(tr0.len(), 90);
        assert!(tr0.samples().all(|m| m.is_root()));
        assert_eq!(tr0.depth_histogram(), vec![1.0]);
    }

    #[test]
    fn trace_length_and_determinism() {
        let t = tiny_tree();
        let cfg = McmcConfig::new(1000, 42, 0.5);
        let a = run_chain(&cfg, &t).unwrap();
        let b = run_chain(&cfg, &t).unwrap();
        assert_eq!(a.len(), 900);
        assert_eq!(
            a.model_ids().collect::<Vec<_>>(),
            b.model_ids().collect::<Vec<_>>()
        );
        let total: u64 = a.visit_counts().iter().map(|x| x.1).sum();
        assert_eq!(total, 900);
        let h = a.depth_histogram();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        a.write_table(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 901);
    }

    #[test]
    fn chains_use_distinct_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_series(&mut rng, 2, 3, 60);
        let t = CountTree::build(&s, 3).unwrap();
        let traces = run_chains(&McmcConfig::new(500, 9, 0.5), &t, 2).unwrap();
        let a: Vec<_> = traces[0].samples().cloned().collect();
        let b: Vec<_> = traces[1].samples().cloned().collect();
        assert_ne!(a, b);
        let single = run_chain(&McmcConfig::new(500, 9, 0.5), &t).unwrap();
        assert_eq!(single.samples().cloned().collect::<Vec<_>>(), a);
    }

    #[test]
    fn tiny_frequencies_match_posterior() {
        let t = tiny_tree();
        let tr = run_chain(&McmcConfig::new(100_000, 3, 0.5), &t).unwrap();
        let lam = TreeModel::root(2);
        let x = tr.indicator(&lam);
        let f = tr.frequency(&lam);
        let se = batch_means_se(&x, 50);
        assert!((f - 0.5).abs() < 3.0 * se + 1e-3, "f={f} se={se}");
    }

    #[test]
    fn small_instance_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = random_series(&mut rng, 2, 2, 40);
        let t = CountTree::build(&s, 2).unwrap();
        for cfg in [
            McmcConfig::new(100_000, 5, 0.5),
            McmcConfig::new(100_000, 5, 0.5).with_jump(
                0.5,
                kbct(&t, 0.5, 2).unwrap().into_iter().map(|x| x.0).collect(),
            ),
        ] {
            let tr = run_chain(&cfg, &t).unwrap();
            for model in enumerate_models(2, 2).unwrap() {
                let p = model_posterior(&t, &model, 0.5).unwrap();
                if p < 0.01 {
                    continue;
                }
                let se = batch_means_se(&tr.indicator(&model), 50);
                assert!(
                    (tr.frequency(&model) - p).abs() < 3.0 * se + 2e-3,
                    "{model}: {} vs {p}",
                    tr.frequency(&model)
                );
            }
        }
    }

    #[test]
    fn gibbs_mean_and_determinism() {
        let t = tiny_tree();
        let h = DirichletHyper::jeffreys(2);
        let lam = TreeModel::root(2);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                gibbs_theta(&lam, &t, &h, &mut rng)
                    .unwrap()
                    .get(&[])
                    .unwrap()[0]
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        // Beta(2.5, 1.5): variance = ab / ((a+b)^2 (a+b+1))
        let sd = (2.5f64 * 1.5 / (16.0 * 5.0)).sqrt();
        assert!((mean - 0.625).abs() < 3.0 * sd / (n as f64).sqrt());
        let a = gibbs_theta(
            &TreeModel::complete(2, 1),
            &t,
            &h,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let b = gibbs_theta(
            &TreeModel::complete(2, 1),
            &t,
            &h,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let t = tiny_tree();
        let mut cfg = McmcConfig::new(10, 0, 0.5);
        cfg.burn_in = 1.0;
        assert!(matches!(
            run_chain(&cfg, &t),
            Err(BctError::InvalidBurnIn(_))
        ));
        let cfg = McmcConfig::new(10, 0, 0.5).with_jump(0.5, vec![]);
        assert!(matches!(run_chain(&cfg, &t), Err(BctError::EmptyTopSet)));
        let cfg = McmcConfig::new(10, 0, 0.5).with_jump(1.0, vec![TreeModel::root(2)]);
        assert!(matches!(
            run_chain(&cfg, &t),
            Err(BctError::InvalidJumpProbability(_))
        ));
    }
}
