use crate::alphabet::Symbol;
use crate::count_tree::{CountTree, NodeId};
use crate::error::{BctError, Result};
use crate::exact::bct::TIE_TOL;
use crate::logprob::LogProb;
use crate::model::{child, Context, TreeModel};
use crate::prior::check_beta_half;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Default cap on the estimated work `nodes * k * m`.
pub const DEFAULT_WORK_CAP: u64 = 4_000_000_000;

/// Per-child 1-based indices into the children's lists; empty means the
/// node is a leaf (the `β P_e` branch).
pub type PositionVector = Vec<u32>;

#[derive(Clone, Debug)]
struct Entry {
    value: f64,
    pos: PositionVector,
}

/// The `k` models with the largest joint probability `π(T) P(x|T)`, in
/// decreasing order, each with its `ln` joint probability.
///
/// Fewer than `k` models are returned only when the model space is smaller.
pub fn kbct(tree: &CountTree, beta: f64, k: usize) -> Result<Vec<(TreeModel, LogProb)>> {
    kbct_with_cap(tree, beta, k, DEFAULT_WORK_CAP)
}

pub fn kbct_with_cap(
    tree: &CountTree,
    beta: f64,
    k: usize,
    work_cap: u64,
) -> Result<Vec<(TreeModel, LogProb)>> {
    check_beta_half(beta)?;
    if k == 0 {
        return Err(BctError::ZeroK);
    }
    let m = tree.m();
    let estimate = (tree.num_nodes() as u64)
        .saturating_mul(k as u64)
        .saturating_mul(m as u64);
    if estimate > work_cap {
        return Err(BctError::WorkCapExceeded {
            estimate,
            cap: work_cap,
        });
    }
    let (lb, lnb) = (beta.ln(), (-beta).ln_1p());
    let depth = tree.max_depth();

    // lists for all-zero subtrees, one per depth
    let mut zero: Vec<Vec<Entry>> = vec![Vec::new(); depth + 1];
    zero[depth] = vec![Entry {
        value: 0.0,
        pos: Vec::new(),
    }];
    for d in (0..depth).rev() {
        let kids: Vec<&[Entry]> = vec![&zero[d + 1]; m];
        zero[d] = merge(lb, lnb, &kids, k);
    }

    let mut lists: Vec<Vec<Entry>> = vec![Vec::new(); tree.num_nodes()];
    for id in (0..tree.num_nodes() as NodeId).rev() {
        let d = tree.depth_of(id);
        let pe = tree.log_pe(id);
        let list = if d == depth {
            vec![Entry {
                value: pe,
                pos: Vec::new(),
            }]
        } else {
            let kids: Vec<&[Entry]> = (0..m)
                .map(|j| match tree.child(id, j as Symbol) {
                    Some(c) => lists[c as usize].as_slice(),
                    None => zero[d + 1].as_slice(),
                })
                .collect();
            merge(lb + pe, lnb, &kids, k)
        };
        lists[id as usize] = list;
    }

    let root = &lists[0];
    let mut out = Vec::with_capacity(root.len());
    for (rank, entry) in root.iter().enumerate() {
        let model = extract(tree, &lists, &zero, rank);
        out.push((model, LogProb(entry.value)));
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum NodeRef {
    Stored(NodeId),
    Zero(usize),
}

fn extract(tree: &CountTree, lists: &[Vec<Entry>], zero: &[Vec<Entry>], rank: usize) -> TreeModel {
    let m = tree.m();
    let mut leaves: Vec<Context> = Vec::new();
    let mut stack: Vec<(NodeRef, usize, Context)> =
        vec![(NodeRef::Stored(tree.root()), rank, Vec::new())];
    while let Some((node, i, ctx)) = stack.pop() {
        let entry = match node {
            NodeRef::Stored(id) => &lists[id as usize][i],
            NodeRef::Zero(d) => &zero[d][i],
        };
        if entry.pos.is_empty() {
            leaves.push(ctx);
            continue;
        }
        for j in 0..m {
            let next = match node {
                NodeRef::Stored(id) => match tree.child(id, j as Symbol) {
                    Some(c) => NodeRef::Stored(c),
                    None => NodeRef::Zero(tree.depth_of(id) + 1),
                },
                NodeRef::Zero(d) => NodeRef::Zero(d + 1),
            };
            stack.push((next, entry.pos[j] as usize - 1, child(&ctx, j as Symbol)));
        }
    }
    TreeModel::from_leaves(m, leaves).expect("extraction yields a proper tree")
}

struct Candidate {
    value: f64,
    idx: Vec<u32>,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// Larger value first; equal values by lexicographically smaller indices.
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Top `k` of `{prune} ∪ {ln(1-β) + Σ_j kids[j][i_j]}`.
///
/// Products are generated best-first over the index lattice. A tuple's
/// successors increment one coordinate at or after its last nonzero one, so
/// every tuple has a unique predecessor and is generated once.
fn merge(prune: f64, lnb: f64, kids: &[&[Entry]], k: usize) -> Vec<Entry> {
    let m = kids.len();
    let mut products: Vec<Entry> = Vec::with_capacity(k);
    let mut heap = BinaryHeap::new();
    let start: f64 = lnb + kids.iter().map(|l| l[0].value).sum::<f64>();
    heap.push(Candidate {
        value: start,
        idx: vec![0; m],
    });
    while products.len() < k {
        let Some(c) = heap.pop() else { break };
        let last = c.idx.iter().rposition(|&i| i > 0).unwrap_or(0);
        for j in last..m {
            let next = c.idx[j] as usize + 1;
            if next < kids[j].len() {
                let mut idx = c.idx.clone();
                idx[j] += 1;
                let value = lnb
                    + idx
                        .iter()
                        .zip(kids)
                        .map(|(&i, l)| l[i as usize].value)
                        .sum::<f64>();
                heap.push(Candidate { value, idx });
            }
        }
        products.push(Entry {
            value: c.value,
            pos: c.idx.iter().map(|&i| i + 1).collect(),
        });
    }
    let tol = TIE_TOL * prune.abs().max(1.0);
    let at = products
        .iter()
        .position(|p| p.value <= prune + tol)
        .unwrap_or(products.len());
    if at < k {
        products.insert(
            at,
            Entry {
                value: prune,
                pos: Vec::new(),
            },
        );
        products.truncate(k);
    }
    products
}
