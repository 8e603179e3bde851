use crate::alphabet::{Series, Symbol};
use crate::count_tree::{CountTree, NodeId, TreeOptions};
use crate::error::Result;
use crate::likelihood;
use crate::logprob::{log_add_exp, LogProb};
use crate::prior::check_beta;

/// Prior predictive likelihood `ln P*_D(x)` by the CTW recursion.
pub fn ctw(tree: &CountTree, beta: f64) -> Result<LogProb> {
    check_beta(beta)?;
    let pw = weighted(tree, beta);
    Ok(LogProb(pw[0]))
}

/// `ln P_w` for every stored node, children before parents.
pub(crate) fn weighted(tree: &CountTree, beta: f64) -> Vec<f64> {
    let (lb, lnb) = (beta.ln(), (-beta).ln_1p());
    let mut pw = vec![0.0; tree.num_nodes()];
    for id in (0..tree.num_nodes() as NodeId).rev() {
        pw[id as usize] = node_weight(tree, &pw, id, lb, lnb);
    }
    pw
}

#[inline]
fn node_weight(tree: &CountTree, pw: &[f64], id: NodeId, lb: f64, lnb: f64) -> f64 {
    let pe = tree.log_pe(id);
    if tree.depth_of(id) == tree.max_depth() {
        return pe;
    }
    let mut prod = 0.0;
    if tree.has_children(id) {
        for j in 0..tree.m() {
            if let Some(c) = tree.child(id, j as Symbol) {
                prod += pw[c as usize];
            }
        }
    }
    log_add_exp(lb + pe, lnb + prod)
}

/// Counts plus weighted probabilities, maintained under appends in O(D).
#[derive(Clone, Debug)]
pub struct CtwState {
    tree: CountTree,
    pw: Vec<f64>,
    beta: f64,
    lb: f64,
    lnb: f64,
    path: Vec<NodeId>,
}

impl CtwState {
    pub fn new(tree: CountTree, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let pw = weighted(&tree, beta);
        Ok(CtwState {
            tree,
            pw,
            beta,
            lb: beta.ln(),
            lnb: (-beta).ln_1p(),
            path: Vec::new(),
        })
    }

    /// Builds the state for `series` with default options.
    pub fn from_series(series: &Series, max_depth: usize, beta: f64) -> Result<Self> {
        Self::new(
            CountTree::build_with(series, max_depth, &TreeOptions::default())?,
            beta,
        )
    }

    pub fn tree(&self) -> &CountTree {
        &self.tree
    }

    pub fn into_tree(self) -> CountTree {
        self.tree
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Current `ln P*_D(x)`.
    pub fn log_evidence(&self) -> LogProb {
        LogProb(self.pw[0])
    }

    /// `ln P_w` at a stored node.
    pub fn log_pw(&self, id: NodeId) -> f64 {
        self.pw[id as usize]
    }

    /// Nodes touched by the most recent update, root first.
    pub fn last_path(&self) -> &[NodeId] {
        &self.path
    }

    /// Appends `symbol` and returns the new `ln P*_D`.
    pub fn update(&mut self, symbol: Symbol) -> Result<LogProb> {
        self.tree.push_into(symbol, &mut self.path)?;
        self.pw.resize(self.tree.num_nodes(), 0.0);
        for &id in self.path.iter().rev() {
            self.pw[id as usize] = node_weight(&self.tree, &self.pw, id, self.lb, self.lnb);
        }
        Ok(self.log_evidence())
    }

    /// `ln P*_D(x, a) - ln P*_D(x)` for every symbol `a`, without changing the state.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn log_predictive(&self) -> Vec<f64> {
        let tree = &self.tree;
        let m = tree.m();
        let depth = tree.max_depth();
        let ctx = tree.recent_context();
        let stored = tree.current_path();
        let hyper = tree.hyper();
        let overrides = hyper.has_overrides();
        let mut out = vec![0.0; m];
        let zero = vec![0u64; m];
        // per depth: counts, ln P_e, and the summed ln P_w of the off-path children
        let mut levels: Vec<(&[u64], f64, f64)> = Vec::with_capacity(depth + 1);
        for d in 0..=depth {
            match stored.get(d) {
                Some(&id) => {
                    let mut others = 0.0;
                    if d < depth {
                        for j in 0..m {
                            if j as Symbol != ctx[d] {
                                if let Some(c) = tree.child(id, j as Symbol) {
                                    others += self.pw[c as usize];
                                }
                            }
                        }
                    }
                    levels.push((tree.counts(id), tree.log_pe(id), others));
                }
                None => levels.push((&zero, 0.0, 0.0)),
            }
        }
        for (a, slot) in out.iter_mut().enumerate() {
            let mut below = 0.0;
            for d in (0..=depth).rev() {
                let (counts, pe, others) = levels[d];
                let gamma = if overrides {
                    hyper.at(&ctx[..d])
                } else {
                    hyper.default_vector()
                };
                let pe_new = pe + likelihood::sequential_factor(counts, gamma, a as Symbol);
                below = if d == depth {
                    pe_new
                } else {
                    log_add_exp(self.lb + pe_new, self.lnb + others + below)
                };
            }
            *slot = below - self.pw[0];
        }
        out
    }
}

/// Streaming update: appends `symbol` and returns the new `ln P*_D`.
pub fn ctw_update(state: &mut CtwState, symbol: Symbol) -> Result<LogProb> {
    state.update(symbol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::exact::testutil::{brute_force, random_series};
    use crate::logprob::log_sum_exp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Series {
        Series::new(Alphabet::numeric(2).unwrap(), vec![0], vec![0, 1, 0]).unwrap()
    }

    #[test]
    fn tiny_evidence() {
        let t = CountTree::build(&tiny(), 1).unwrap();
        assert!((ctw(&t, 0.5).unwrap().prob() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn depth_zero_is_pe() {
        let s = Series::new(Alphabet::numeric(3).unwrap(), vec![], vec![0, 2, 2, 1, 0]).unwrap();
        let t = CountTree::build(&s, 0).unwrap();
        assert_eq!(
            ctw(&t, 0.3).unwrap().ln(),
            likelihood::estimated_prob(&[2, 1, 2]).ln()
        );
    }

    #[test]
    fn rejects_bad_beta() {
        let t = CountTree::build(&tiny(), 1).unwrap();
        assert!(ctw(&t, 1.0).is_err());
        assert!(ctw(&t, 0.2).is_ok());
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let m = rng.random_range(2..=3);
            let d = rng.random_range(0..=3);
            let s = {
                let n = rng.random_range(0..=30);
                random_series(&mut rng, m, d, n)
            };
            let t = CountTree::build(&s, d).unwrap();
            for beta in [0.5, crate::prior::default_beta(m), 0.2] {
                let joint: Vec<f64> = brute_force(&t, beta).into_iter().map(|(_, v)| v).collect();
                let got = ctw(&t, beta).unwrap().ln();
                assert!((got - log_sum_exp(&joint)).abs() < 1e-9, "m={m} d={d}");
            }
        }
    }

    #[test]
    fn update_extends_tiny() {
        let mut st = CtwState::new(CountTree::build(&tiny(), 1).unwrap(), 0.5).unwrap();
        let v = st.update(0).unwrap();
        assert_eq!(st.last_path().len(), 2);
        let s2 = Series::new(Alphabet::numeric(2).unwrap(), vec![0], vec![0, 1, 0, 0]).unwrap();
        let batch = ctw(&CountTree::build(&s2, 1).unwrap(), 0.5).unwrap();
        assert!((v.ln() - batch.ln()).abs() < 1e-12);
    }

    #[test]
    fn shadow_prediction_matches_commit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let m = rng.random_range(2..=4);
            let d = rng.random_range(0..=4);
            let s = {
                let n = rng.random_range(0..=40);
                random_series(&mut rng, m, d, n)
            };
            let hyper = if rng.random_bool(0.5) {
                crate::likelihood::DirichletHyper::symmetric(m, 0.8).unwrap()
            } else {
                crate::likelihood::DirichletHyper::jeffreys(m)
                    .with_context(vec![0], vec![2.0; m])
                    .unwrap()
            };
            let opts = TreeOptions {
                hyper: Some(hyper),
                ..Default::default()
            };
            let st = CtwState::new(CountTree::build_with(&s, d, &opts).unwrap(), 0.6).unwrap();
            let pred = st.log_predictive();
            let total: f64 = pred.iter().map(|p| p.exp()).sum();
            assert!((total - 1.0).abs() < 1e-10);
            for (a, &p) in pred.iter().enumerate() {
                let mut c = st.clone();
                let after = c.update(a as Symbol).unwrap();
                assert!((after.ln() - st.log_evidence().ln() - p).abs() < 1e-10);
            }
        }
    }
}
