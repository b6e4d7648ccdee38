//! Node-level fold assignment for dyadic cross-fitting.
//!
//! Folds partition *nodes*, not dyads. Fold `k` scores the dyads with both
//! endpoints inside `I_k` and trains nuisances on the dyads with both endpoints
//! outside it, so the two sets never share a node.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{DyadError, Result};
use crate::sample::DyadIndex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl FoldPartition {
    /// Uniformly random partition of `n_nodes` into `k` folds whose sizes
    /// differ by at most one, the first `n_nodes % k` folds being larger.
    pub fn random<R: Rng + ?Sized>(n_nodes: usize, k: usize, rng: &mut R) -> Result<Self> {
        check_sizes(n_nodes, k)?;
        let mut perm: Vec<usize> = (0..n_nodes).collect();
        perm.shuffle(rng);
        Self::from_order(&perm, k)
    }

    /// Cut a node ordering into `k` contiguous blocks with the floor/remainder rule.
    pub fn from_order(order: &[usize], k: usize) -> Result<Self> {
        let n = order.len();
        check_sizes(n, k)?;
        let (base, extra) = (n / k, n % k);
        let mut assignment = vec![usize::MAX; n];
        let mut members = Vec::with_capacity(k);
        let mut start = 0;
        for fold in 0..k {
            let size = base + usize::from(fold < extra);
            let mut block: Vec<usize> = order[start..start + size].to_vec();
            for &node in &block {
                if node >= n || assignment[node] != usize::MAX {
                    return Err(DyadError::InvalidArgument("node order is not a permutation".into()));
                }
                assignment[node] = fold;
            }
            block.sort_unstable();
            members.push(block);
            start += size;
        }
        Ok(Self { assignment, members })
    }

    /// Build from an explicit fold id per node.
    pub fn from_assignment(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(DyadError::InvalidArgument(format!("need K >= 2 folds, got {k}")));
        }
        let mut members = vec![Vec::new(); k];
        for (node, &f) in assignment.iter().enumerate() {
            if f >= k {
                return Err(DyadError::FoldIndex { k: f, folds: k });
            }
            members[f].push(node);
        }
        if members.iter().any(|m| m.len() < 2) {
            return Err(DyadError::FoldTooSmall { n_nodes: assignment.len(), k });
        }
        Ok(Self { assignment, members })
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn fold_of(&self, node: usize) -> usize {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Sorted node ids of fold `k`.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Ordered dyads with both endpoints in fold `k`.
    pub fn eval_dyads(&self, k: usize) -> Result<Vec<DyadIndex>> {
        self.check_fold(k)?;
        Ok(all_pairs(&self.members[k]))
    }

    /// Ordered dyads with both endpoints outside fold `k`.
    pub fn train_dyads(&self, k: usize) -> Result<Vec<DyadIndex>> {
        self.check_fold(k)?;
        let rest: Vec<usize> = (0..self.n_nodes()).filter(|&i| self.assignment[i] != k).collect();
        Ok(all_pairs(&rest))
    }

    /// Transport the assignment through a node relabelling `old -> perm[old]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut assignment = vec![0; self.n_nodes()];
        for (old, &f) in self.assignment.iter().enumerate() {
            assignment[perm[old]] = f;
        }
        Self::from_assignment(assignment, self.k())
    }

    fn check_fold(&self, k: usize) -> Result<()> {
        if k >= self.k() {
            return Err(DyadError::FoldIndex { k, folds: self.k() });
        }
        Ok(())
    }
}

fn check_sizes(n_nodes: usize, k: usize) -> Result<()> {
    if k < 2 {
        return Err(DyadError::InvalidArgument(format!("need K >= 2 folds, got {k}")));
    }
    if n_nodes < 2 * k {
        return Err(DyadError::FoldTooSmall { n_nodes, k });
    }
    Ok(())
}

fn all_pairs(nodes: &[usize]) -> Vec<DyadIndex> {
    let mut out = Vec::with_capacity(nodes.len() * nodes.len().saturating_sub(1));
    for &i in nodes {
        for &j in nodes {
            if i != j {
                out.push(DyadIndex::new_unchecked(i, j));
            }
        }
    }
    out
}

/// Uniform K-fold split of all ordered dyads, ignoring node structure.
///
/// This is the i.i.d. cross-fitting layout used by the conventional baseline.
#[derive(Debug, Clone)]
pub struct DyadFolds {
    folds: Vec<Vec<DyadIndex>>,
}

impl DyadFolds {
    pub fn random<R: Rng + ?Sized>(n_nodes: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k < 2 || n_nodes * (n_nodes - 1) < 2 * k {
            return Err(DyadError::FoldTooSmall { n_nodes, k });
        }
        let all: Vec<usize> = (0..n_nodes).collect();
        let mut dyads = all_pairs(&all);
        dyads.shuffle(rng);
        let (base, extra) = (dyads.len() / k, dyads.len() % k);
        let mut folds = Vec::with_capacity(k);
        let mut start = 0;
        for f in 0..k {
            let size = base + usize::from(f < extra);
            let mut fold = dyads[start..start + size].to_vec();
            fold.sort_unstable();
            folds.push(fold);
            start += size;
        }
        Ok(Self { folds })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn eval_dyads(&self, k: usize) -> &[DyadIndex] {
        &self.folds[k]
    }

    pub fn train_dyads(&self, k: usize) -> Vec<DyadIndex> {
        let mut out: Vec<DyadIndex> =
            self.folds.iter().enumerate().filter(|(f, _)| *f != k).flat_map(|(_, d)| d.iter().copied()).collect();
        out.sort_unstable();
        out
    }
}
