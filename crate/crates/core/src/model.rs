//! Proper m-ary context tree models.
//!
//! A model is identified with its leaf set. Each leaf is a context written
//! most-recent-symbol first, so the leaf `[0, 1]` matches a past in which
//! `x_{i-1} = 0` and `x_{i-2} = 1`.

use crate::alphabet::Symbol;
use crate::error::{BctError, Result};
use num_bigint::BigUint;
use std::collections::BTreeSet;
use std::fmt;

/// A context, most recent symbol first. The empty context is the root.
pub type Context = Vec<Symbol>;

/// A proper m-ary tree, stored as its set of leaves.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeModel {
    m: usize,
    leaves: BTreeSet<Context>,
}

/// How two neighbouring models differ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Neighbor {
    /// The second model adds the m children of this leaf of the first.
    Grow(Context),
    /// The second model removes the m leaf children of this node of the first.
    Prune(Context),
}

impl TreeModel {
    /// The model containing only the root, written Λ.
    pub fn root(m: usize) -> Self {
        let mut leaves = BTreeSet::new();
        leaves.insert(Vec::new());
        TreeModel { m, leaves }
    }

    /// The complete tree of depth `depth`.
    pub fn complete(m: usize, depth: usize) -> Self {
        let mut level: Vec<Context> = vec![Vec::new()];
        for _ in 0..depth {
            level = level
                .iter()
                .flat_map(|s| {
                    (0..m).map(move |j| {
                        let mut c = s.clone();
                        c.push(j as Symbol);
                        c
                    })
                })
                .collect();
        }
        TreeModel {
            m,
            leaves: level.into_iter().collect(),
        }
    }

    /// Builds a model from its leaves, checking that the tree is proper.
    pub fn from_leaves<I: IntoIterator<Item = Context>>(m: usize, leaves: I) -> Result<Self> {
        if m < 2 {
            return Err(BctError::AlphabetTooSmall(m));
        }
        let leaves: BTreeSet<Context> = leaves.into_iter().collect();
        if leaves.is_empty() {
            return Err(BctError::ImproperModel("empty leaf set".into()));
        }
        let mut internal: BTreeSet<Context> = BTreeSet::new();
        for leaf in &leaves {
            if let Some(&s) = leaf.iter().find(|&&s| s as usize >= m) {
                return Err(BctError::SymbolOutOfRange {
                    symbol: s as usize,
                    size: m,
                });
            }
            for len in 0..leaf.len() {
                internal.insert(leaf[..len].to_vec());
            }
        }
        if let Some(leaf) = leaves.iter().find(|l| internal.contains(*l)) {
            return Err(BctError::ImproperModel(format!(
                "leaf {leaf:?} is also an internal node"
            )));
        }
        for node in &internal {
            for j in 0..m {
                let mut child = node.clone();
                child.push(j as Symbol);
                if !leaves.contains(&child) && !internal.contains(&child) {
                    return Err(BctError::ImproperModel(format!(
                        "internal node {node:?} is missing child {j}"
                    )));
                }
            }
        }
        Ok(TreeModel { m, leaves })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn leaves(&self) -> &BTreeSet<Context> {
        &self.leaves
    }

    pub fn contains_leaf(&self, s: &[Symbol]) -> bool {
        self.leaves.contains(s)
    }

    /// Number of leaves, `|T|`.
    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Depth of the deepest leaf, `d(T)`.
    pub fn depth(&self) -> usize {
        self.leaves.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_root(&self) -> bool {
        self.leaves.len() == 1 && self.leaves.iter().next().is_some_and(Vec::is_empty)
    }

    /// Number of leaves at depth exactly `depth`, `L_D(T)`.
    pub fn leaves_at_depth(&self, depth: usize) -> usize {
        self.leaves.iter().filter(|l| l.len() == depth).count()
    }

    pub fn is_complete(&self, depth: usize) -> bool {
        self.leaves.len() == self.m.pow(depth as u32)
            && self.leaves.iter().all(|l| l.len() == depth)
    }

    /// All internal nodes (proper prefixes of leaves).
    pub fn internal_nodes(&self) -> BTreeSet<Context> {
        let mut internal = BTreeSet::new();
        for leaf in &self.leaves {
            for len in 0..leaf.len() {
                internal.insert(leaf[..len].to_vec());
            }
        }
        internal
    }

    /// Leaves at depth below `max_depth`, which the random-walk sampler may split.
    pub fn growable_leaves(&self, max_depth: usize) -> Vec<&Context> {
        self.leaves.iter().filter(|l| l.len() < max_depth).collect()
    }

    /// Internal nodes whose m children are all leaves. Their number is `N_D(T)`.
    pub fn prunable_nodes(&self) -> Vec<Context> {
        self.internal_nodes()
            .into_iter()
            .filter(|s| (0..self.m).all(|j| self.leaves.contains(&child(s, j as Symbol))))
            .collect()
    }

    /// `|T| - L_D(T)` for `D = max_depth`.
    pub fn num_growable(&self, max_depth: usize) -> usize {
        self.leaves.iter().filter(|l| l.len() < max_depth).count()
    }

    /// `N_D(T)`, the number of internal nodes whose children are all leaves.
    pub fn num_prunable(&self) -> usize {
        self.leaves
            .iter()
            .filter(|l| l.last() == Some(&0))
            .filter(|l| {
                let parent = &l[..l.len() - 1];
                (1..self.m).all(|j| self.leaves.contains(&child(parent, j as Symbol)))
            })
            .count()
    }

    /// Replaces leaf `s` by its m children.
    pub fn split(&self, s: &[Symbol]) -> Result<TreeModel> {
        if !self.leaves.contains(s) {
            return Err(BctError::ImproperModel(format!("{s:?} is not a leaf")));
        }
        let mut leaves = self.leaves.clone();
        leaves.remove(s);
        for j in 0..self.m {
            leaves.insert(child(s, j as Symbol));
        }
        Ok(TreeModel { m: self.m, leaves })
    }

    /// Removes the m leaf children of `s`, making `s` a leaf.
    pub fn merge(&self, s: &[Symbol]) -> Result<TreeModel> {
        let children: Vec<Context> = (0..self.m).map(|j| child(s, j as Symbol)).collect();
        if !children.iter().all(|c| self.leaves.contains(c)) {
            return Err(BctError::ImproperModel(format!(
                "children of {s:?} are not all leaves"
            )));
        }
        let mut leaves = self.leaves.clone();
        for c in &children {
            leaves.remove(c);
        }
        leaves.insert(s.to_vec());
        Ok(TreeModel { m: self.m, leaves })
    }

    /// The unique leaf that is a prefix of `context` (the context map `C`).
    ///
    /// `context` lists past symbols most recent first and must be at least as
    /// long as the path to the matching leaf.
    pub fn context_leaf(&self, context: &[Symbol]) -> Result<&Context> {
        for len in 0..=context.len() {
            if let Some(leaf) = self.leaves.get(&context[..len]) {
                return Ok(leaf);
            }
        }
        Err(BctError::ContextTooShort { len: context.len() })
    }

    /// Returns how `other` differs from `self` when the two models differ by
    /// exactly one branch of m leaves.
    pub fn neighbor(&self, other: &TreeModel) -> Option<Neighbor> {
        if self.m != other.m {
            return None;
        }
        let m = self.m;
        let (small, large, grow) = if other.leaves.len() == self.leaves.len() + m - 1 {
            (self, other, true)
        } else if self.leaves.len() == other.leaves.len() + m - 1 {
            (other, self, false)
        } else {
            return None;
        };
        let only_small: Vec<&Context> = small.leaves.difference(&large.leaves).collect();
        if only_small.len() != 1 {
            return None;
        }
        let s = only_small[0];
        let only_large: BTreeSet<&Context> = large.leaves.difference(&small.leaves).collect();
        let expected: BTreeSet<Context> = (0..m).map(|j| child(s, j as Symbol)).collect();
        if only_large.len() != m || !expected.iter().all(|c| only_large.contains(c)) {
            return None;
        }
        Some(if grow {
            Neighbor::Grow(s.clone())
        } else {
            Neighbor::Prune(s.clone())
        })
    }

    /// The m subtrees hanging off the root, each re-rooted. `None` for Λ.
    pub fn subtrees(&self) -> Option<Vec<TreeModel>> {
        if self.is_root() {
            return None;
        }
        let mut parts: Vec<BTreeSet<Context>> = vec![BTreeSet::new(); self.m];
        for leaf in &self.leaves {
            parts[leaf[0] as usize].insert(leaf[1..].to_vec());
        }
        Some(
            parts
                .into_iter()
                .map(|leaves| TreeModel { m: self.m, leaves })
                .collect(),
        )
    }

    /// Hangs the m given trees below a new root.
    pub fn join(subtrees: &[TreeModel]) -> Result<TreeModel> {
        let m = subtrees.len();
        if m < 2 {
            return Err(BctError::AlphabetTooSmall(m));
        }
        let mut leaves = BTreeSet::new();
        for (j, t) in subtrees.iter().enumerate() {
            if t.m != m {
                return Err(BctError::ImproperModel("subtree alphabet mismatch".into()));
            }
            for leaf in &t.leaves {
                let mut c = Vec::with_capacity(leaf.len() + 1);
                c.push(j as Symbol);
                c.extend_from_slice(leaf);
                leaves.insert(c);
            }
        }
        Ok(TreeModel { m, leaves })
    }
}

impl fmt::Debug for TreeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TreeModel {
    /// Leaves as digit strings, e.g. `{0, 10, 11}`; Λ prints as `{λ}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, leaf) in self.leaves.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if leaf.is_empty() {
                write!(f, "λ")?;
            } else if self.m <= 10 {
                for s in leaf {
                    write!(f, "{s}")?;
                }
            } else {
                let parts: Vec<String> = leaf.iter().map(|s| s.to_string()).collect();
                write!(f, "{}", parts.join("."))?;
            }
        }
        write!(f, "}}")
    }
}

pub(crate) fn child(s: &[Symbol], j: Symbol) -> Context {
    let mut c = Vec::with_capacity(s.len() + 1);
    c.extend_from_slice(s);
    c.push(j);
    c
}

/// Number of proper m-ary trees of depth at most `depth`:
/// `N_0 = 1`, `N_d = 1 + N_{d-1}^m`.
pub fn count_models(m: usize, depth: usize) -> BigUint {
    let mut n = BigUint::from(1u32);
    for _ in 0..depth {
        n = n.pow(m as u32) + 1u32;
    }
    n
}

/// `count_models` if it does not exceed `cap`, without computing huge powers.
pub(crate) fn count_models_capped(m: usize, depth: usize, cap: u64) -> Option<u64> {
    let mut n: u64 = 1;
    for _ in 0..depth {
        let next = (n as u128).checked_pow(m as u32)? + 1;
        if next > cap as u128 {
            return None;
        }
        n = next as u64;
    }
    Some(n)
}
