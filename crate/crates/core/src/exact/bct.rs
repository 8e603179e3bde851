use crate::alphabet::Symbol;
use crate::count_tree::{CountTree, NodeId};
use crate::error::Result;
use crate::logprob::LogProb;
use crate::model::{child, Context, TreeModel};
use crate::prior::check_beta_half;

/// Relative tolerance under which the two branches of the max count as tied.
pub(crate) const TIE_TOL: f64 = 1e-9;

/// True when the prune branch `a` attains the max of `a` and `b`, ties included.
#[inline]
pub(crate) fn prune_wins(a: f64, b: f64) -> bool {
    a >= b || (b - a) <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// The MAP model `T*_1` and `ln P_{m,λ} = ln π(T*_1) + ln P(x|T*_1)`.
///
/// Requires `β ≥ 1/2`. Among tied maxima the smallest tree is returned.
pub fn bct_map(tree: &CountTree, beta: f64) -> Result<(TreeModel, LogProb)> {
    check_beta_half(beta)?;
    let (lb, lnb) = (beta.ln(), (-beta).ln_1p());
    let depth = tree.max_depth();
    let m = tree.m();
    let mut pm = vec![0.0; tree.num_nodes()];
    let mut pruned = vec![true; tree.num_nodes()];
    for id in (0..tree.num_nodes() as NodeId).rev() {
        let d = tree.depth_of(id);
        let pe = tree.log_pe(id);
        if d == depth {
            pm[id as usize] = pe;
            continue;
        }
        // an absent child is an all-zero subtree, whose maximum is β above depth D and 1 at D
        let absent = if d + 1 == depth { 0.0 } else { lb };
        let prod: f64 = (0..m)
            .map(|j| {
                tree.child(id, j as Symbol)
                    .map_or(absent, |c| pm[c as usize])
            })
            .sum();
        let (a, b) = (lb + pe, lnb + prod);
        if prune_wins(a, b) {
            pm[id as usize] = a;
        } else {
            pm[id as usize] = b;
            pruned[id as usize] = false;
        }
    }
    let mut leaves: Vec<Context> = Vec::new();
    let mut stack: Vec<(NodeId, Context)> = vec![(tree.root(), Vec::new())];
    while let Some((id, ctx)) = stack.pop() {
        if pruned[id as usize] {
            leaves.push(ctx);
            continue;
        }
        for j in 0..m as Symbol {
            match tree.child(id, j) {
                Some(c) => stack.push((c, child(&ctx, j))),
                None => leaves.push(child(&ctx, j)),
            }
        }
    }
    let model = TreeModel::from_leaves(m, leaves).expect("pruning yields a proper tree");
    Ok((model, LogProb(pm[0])))
}
