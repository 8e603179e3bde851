//! The context count tree `T_MAX`.
//!
//! Nodes live in a flat arena. A node that has been descended through owns a
//! block of exactly m child slots; an empty slot stands for a zero-count leaf,
//! so the tree is proper without storing those siblings. Children are always
//! created after their parent, hence iterating node ids in decreasing order
//! visits every child before its parent.

use crate::alphabet::{Series, Symbol};
use crate::error::{BctError, Result};
use crate::likelihood::{self, CountVector, DirichletHyper};
use crate::model::Context;
use std::collections::VecDeque;

pub type NodeId = u32;

const NONE: u32 = u32::MAX;
pub(crate) const ROOT: NodeId = 0;

/// Options for building a count tree.
#[derive(Clone, Debug, Default)]
pub struct TreeOptions {
    pub hyper: Option<DirichletHyper>,
    /// Maximum number of stored nodes; exceeding it is an error.
    pub node_cap: Option<usize>,
}

/// Counts `a_s` and `ln P_e(a_s)` for every context of length ≤ D seen in the data.
#[derive(Clone, Debug)]
pub struct CountTree {
    m: usize,
    max_depth: usize,
    hyper: DirichletHyper,
    node_cap: usize,
    counts: Vec<u64>,
    child_block: Vec<u32>,
    blocks: Vec<u32>,
    depth: Vec<u16>,
    log_pe: Vec<f64>,
    /// The D symbols preceding the next observation, most recent first.
    recent: VecDeque<Symbol>,
    n: u64,
}

impl CountTree {
    /// An empty tree for alphabet size `m` and maximum depth `max_depth`,
    /// conditioned on `context` (time order; its last `max_depth` symbols are used).
    pub fn empty(
        m: usize,
        max_depth: usize,
        context: &[Symbol],
        options: &TreeOptions,
    ) -> Result<Self> {
        if m < 2 {
            return Err(BctError::AlphabetTooSmall(m));
        }
        if m > 256 {
            return Err(BctError::AlphabetTooLarge(m));
        }
        if max_depth > u16::MAX as usize {
            return Err(BctError::DepthTooLarge(max_depth));
        }
        if context.len() < max_depth {
            return Err(BctError::InsufficientContext {
                needed: max_depth,
                available: context.len(),
            });
        }
        if let Some(&s) = context.iter().find(|&&s| s as usize >= m) {
            return Err(BctError::SymbolOutOfRange {
                symbol: s as usize,
                size: m,
            });
        }
        let hyper = options
            .hyper
            .clone()
            .unwrap_or_else(|| DirichletHyper::jeffreys(m));
        if hyper.m() != m {
            return Err(BctError::HyperLength {
                got: hyper.m(),
                expected: m,
            });
        }
        let node_cap = options
            .node_cap
            .unwrap_or(usize::MAX)
            .min(NONE as usize - 1);
        let recent: VecDeque<Symbol> = context.iter().rev().take(max_depth).copied().collect();
        Ok(CountTree {
            m,
            max_depth,
            hyper,
            node_cap,
            counts: vec![0; m],
            child_block: vec![NONE],
            blocks: Vec::new(),
            depth: vec![0],
            log_pe: vec![0.0],
            recent,
            n: 0,
        })
    }

    /// Builds `T_MAX` for `series` with the default Dir(1/2, .., 1/2) prior.
    pub fn build(series: &Series, max_depth: usize) -> Result<Self> {
        Self::build_with(series, max_depth, &TreeOptions::default())
    }

    pub fn build_with(series: &Series, max_depth: usize, options: &TreeOptions) -> Result<Self> {
        let mut tree = Self::empty(series.m(), max_depth, series.context(), options)?;
        let ctx_len = series.context().len();
        let full = series.full();
        for pos in ctx_len..full.len() {
            let x = full[pos];
            let mut node = ROOT;
            tree.counts[x as usize] += 1;
            for d in 1..=max_depth {
                node = tree.child_or_create(node, full[pos - d], d)?;
                tree.counts[node as usize * tree.m + x as usize] += 1;
            }
        }
        tree.n = series.len() as u64;
        tree.recent = full.iter().rev().take(max_depth).copied().collect();
        tree.compute_log_pe();
        Ok(tree)
    }

    fn child_or_create(&mut self, node: NodeId, j: Symbol, child_depth: usize) -> Result<NodeId> {
        let m = self.m;
        let mut block = self.child_block[node as usize];
        if block == NONE {
            block = (self.blocks.len() / m) as u32;
            self.blocks.extend(std::iter::repeat_n(NONE, m));
            self.child_block[node as usize] = block;
        }
        let slot = block as usize * m + j as usize;
        let existing = self.blocks[slot];
        if existing != NONE {
            return Ok(existing);
        }
        if self.depth.len() >= self.node_cap {
            return Err(BctError::NodeBudgetExceeded { cap: self.node_cap });
        }
        let id = self.depth.len() as NodeId;
        self.counts.extend(std::iter::repeat_n(0, m));
        self.child_block.push(NONE);
        self.depth.push(child_depth as u16);
        self.log_pe.push(0.0);
        self.blocks[slot] = id;
        Ok(id)
    }

    fn compute_log_pe(&mut self) {
        let m = self.m;
        if self.hyper.has_overrides() {
            let mut values = vec![0.0; self.num_nodes()];
            self.for_each_node(|id, ctx| {
                let a = &self.counts[id as usize * m..(id as usize + 1) * m];
                values[id as usize] = likelihood::ln_pe_gamma_unchecked(a, self.hyper.at(ctx));
            });
            self.log_pe = values;
        } else if self.hyper.is_jeffreys() {
            for id in 0..self.num_nodes() {
                self.log_pe[id] =
                    likelihood::estimated_prob(&self.counts[id * m..(id + 1) * m]).ln();
            }
        } else {
            let gamma = self.hyper.default_vector().to_vec();
            for id in 0..self.num_nodes() {
                self.log_pe[id] =
                    likelihood::ln_pe_gamma_unchecked(&self.counts[id * m..(id + 1) * m], &gamma);
            }
        }
    }

    /// Appends one observation, updating counts and `ln P_e` at the D+1
    /// contexts that precede it. Returns the touched nodes, root first.
    pub fn push(&mut self, symbol: Symbol) -> Result<Vec<NodeId>> {
        let mut path = Vec::with_capacity(self.max_depth + 1);
        self.push_into(symbol, &mut path)?;
        Ok(path)
    }

    /// Like [`push`](Self::push) but writes the touched nodes into `path`.
    pub fn push_into(&mut self, symbol: Symbol, path: &mut Vec<NodeId>) -> Result<()> {
        if symbol as usize >= self.m {
            return Err(BctError::SymbolOutOfRange {
                symbol: symbol as usize,
                size: self.m,
            });
        }
        path.clear();
        let mut node = ROOT;
        path.push(node);
        for d in 1..=self.max_depth {
            node = self.child_or_create(node, self.recent[d - 1], d)?;
            path.push(node);
        }
        let m = self.m;
        let overrides = self.hyper.has_overrides();
        let ctx: Vec<Symbol> = if overrides {
            self.recent.iter().copied().collect()
        } else {
            Vec::new()
        };
        for (d, &id) in path.iter().enumerate() {
            let i = id as usize;
            let gamma = if overrides {
                self.hyper.at(&ctx[..d])
            } else {
                self.hyper.default_vector()
            };
            let a = &self.counts[i * m..(i + 1) * m];
            self.log_pe[i] += likelihood::sequential_factor(a, gamma, symbol);
            self.counts[i * m + symbol as usize] += 1;
        }
        self.n += 1;
        if self.max_depth > 0 {
            self.recent.pop_back();
            self.recent.push_front(symbol);
        }
        Ok(())
    }

    /// Existing nodes along the context preceding the next observation, root first.
    /// The list stops early where the path leaves the stored tree.
    pub fn current_path(&self) -> Vec<NodeId> {
        let mut path = vec![ROOT];
        let mut node = ROOT;
        for d in 0..self.max_depth {
            match self.child(node, self.recent[d]) {
                Some(c) => {
                    path.push(c);
                    node = c;
                }
                None => break,
            }
        }
        path
    }

    /// The D symbols preceding the next observation, most recent first.
    pub fn recent_context(&self) -> Vec<Symbol> {
        self.recent.iter().copied().collect()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn hyper(&self) -> &DirichletHyper {
        &self.hyper
    }

    /// Number of observations counted.
    pub fn observations(&self) -> u64 {
        self.n
    }

    /// Number of stored nodes.
    pub fn num_nodes(&self) -> usize {
        self.depth.len()
    }

    pub fn root(&self) -> NodeId {
        ROOT
    }

    pub fn counts(&self, id: NodeId) -> &[u64] {
        let i = id as usize;
        &self.counts[i * self.m..(i + 1) * self.m]
    }

    pub fn log_pe(&self, id: NodeId) -> f64 {
        self.log_pe[id as usize]
    }

    pub fn depth_of(&self, id: NodeId) -> usize {
        self.depth[id as usize] as usize
    }

    pub fn has_children(&self, id: NodeId) -> bool {
        self.child_block[id as usize] != NONE
    }

    /// The stored child `s j`, or `None` for a zero-count (implicit) child.
    #[inline]
    pub fn child(&self, id: NodeId, j: Symbol) -> Option<NodeId> {
        let block = self.child_block[id as usize];
        if block == NONE {
            return None;
        }
        let c = self.blocks[block as usize * self.m + j as usize];
        (c != NONE).then_some(c)
    }

    /// The node for `context` (most recent symbol first), if stored.
    pub fn find(&self, context: &[Symbol]) -> Option<NodeId> {
        let mut node = ROOT;
        for &j in context {
            node = self.child(node, j)?;
        }
        Some(node)
    }

    /// `ln P_e(a_s)`; 0 for contexts not in the tree.
    pub fn log_pe_at(&self, context: &[Symbol]) -> f64 {
        self.find(context).map_or(0.0, |id| self.log_pe(id))
    }

    /// `a_s`; all zeros for contexts not in the tree.
    pub fn counts_at(&self, context: &[Symbol]) -> CountVector {
        match self.find(context) {
            Some(id) => CountVector(self.counts(id).to_vec()),
            None => CountVector::zeros(self.m),
        }
    }

    /// Visits every stored node with its context, parents before children.
    pub fn for_each_node<F: FnMut(NodeId, &[Symbol])>(&self, mut f: F) {
        let mut stack: Vec<(NodeId, Context)> = vec![(ROOT, Vec::new())];
        while let Some((id, ctx)) = stack.pop() {
            f(id, &ctx);
            for j in (0..self.m).rev() {
                if let Some(c) = self.child(id, j as Symbol) {
                    let mut cc = ctx.clone();
                    cc.push(j as Symbol);
                    stack.push((c, cc));
                }
            }
        }
    }

    /// Stores every context up to depth D, turning all implicit zero-count
    /// nodes into explicit ones. Only sensible for tiny `m^D`.
    pub fn materialize_complete(&mut self) -> Result<()> {
        let mut frontier = vec![ROOT];
        for d in 1..=self.max_depth {
            let mut next = Vec::with_capacity(frontier.len() * self.m);
            for &id in &frontier {
                for j in 0..self.m {
                    next.push(self.child_or_create(id, j as Symbol, d)?);
                }
            }
            frontier = next;
        }
        Ok(())
    }

    /// Checks the structural invariants: each stored node at depth < D with
    /// nonzero counts has children, and its counts equal the sum over its children.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let m = self.m;
        for id in 0..self.num_nodes() as NodeId {
            let d = self.depth_of(id);
            if d > self.max_depth {
                return Err(format!("node {id} at depth {d} beyond {}", self.max_depth));
            }
            if d == self.max_depth || self.counts(id).iter().all(|&c| c == 0) {
                continue;
            }
            if !self.has_children(id) {
                return Err(format!("node {id} at depth {d} has counts but no children"));
            }
            let mut sum = vec![0u64; m];
            for j in 0..m {
                if let Some(c) = self.child(id, j as Symbol) {
                    for (acc, &v) in sum.iter_mut().zip(self.counts(c)) {
                        *acc += v;
                    }
                }
            }
            if sum != self.counts(id) {
                return Err(format!(
                    "node {id}: children counts {sum:?} != {:?}",
                    self.counts(id)
                ));
            }
        }
        Ok(())
    }
}
