//! Exact tree edit distance under unit node/edge insert-delete costs with no
//! substitutions: depth-first branch and bound over label-preserving node
//! mappings, plus an exhaustive oracle for small instances.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::chem::tree::JunctionTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GedError {
    #[error("tree size {0} exceeds the cap {1}")]
    TooLarge(usize, usize),
}

/// Optimal edit path between two labeled trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditPath {
    /// (node in x, node in y) kept by the mapping; labels are equal.
    pub matched: Vec<(usize, usize)>,
    /// Nodes only in x (deleted).
    pub removed: Vec<usize>,
    /// Nodes only in y (added).
    pub added: Vec<usize>,
    pub edge_deleted: Vec<(usize, usize)>,
    pub edge_added: Vec<(usize, usize)>,
    pub cost: usize,
}

impl EditPath {
    pub fn image_of(&self, x: usize) -> Option<usize> {
        self.matched
            .iter()
            .find(|&&(a, _)| a == x)
            .map(|&(_, b)| b)
    }
}

pub const DEFAULT_NODE_CAP: usize = 40;

struct View {
    labels: Vec<usize>,
    edges: Vec<(usize, usize)>,
    edge_set: BTreeSet<(usize, usize)>,
}

fn view(t: &JunctionTree) -> View {
    let labels = t.nodes.iter().map(|n| n.type_id).collect();
    let mut edges: Vec<(usize, usize)> = t
        .edges
        .iter()
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect();
    edges.sort_unstable();
    let edge_set = edges.iter().copied().collect();
    View {
        labels,
        edges,
        edge_set,
    }
}

/// Minimum-cost edit path from `tx` to `ty`. Deterministic: candidate images
/// are tried in ascending index order (deletion last), and the first optimum
/// found is kept.
pub fn tree_edit_distance(
    tx: &JunctionTree,
    ty: &JunctionTree,
    cap: usize,
) -> Result<EditPath, GedError> {
    let nx = tx.node_count();
    let ny = ty.node_count();
    if nx > cap {
        return Err(GedError::TooLarge(nx, cap));
    }
    if ny > cap {
        return Err(GedError::TooLarge(ny, cap));
    }

    let vx = view(tx);
    let vy = view(ty);

    let mut search = Search {
        vx: &vx,
        vy: &vy,
        assignment: vec![None; nx],
        used: vec![false; ny],
        best_score: usize::MAX, // sentinel: no solution yet
        best_assignment: vec![None; nx],
    };
    search.dfs(0, 0, 0);

    let assignment = search.best_assignment;
    let matched: Vec<(usize, usize)> = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect();
    let removed: Vec<usize> = (0..nx).filter(|&i| assignment[i].is_none()).collect();
    let image: BTreeSet<usize> = matched.iter().map(|&(_, j)| j).collect();
    let added: Vec<usize> = (0..ny).filter(|j| !image.contains(j)).collect();

    let preserved: BTreeSet<(usize, usize)> = vx
        .edges
        .iter()
        .filter_map(|&(a, b)| match (assignment[a], assignment[b]) {
            (Some(x), Some(y)) => {
                let e = (x.min(y), x.max(y));
                vy.edge_set.contains(&e).then_some(e)
            }
            _ => None,
        })
        .collect();
    let edge_deleted: Vec<(usize, usize)> = vx
        .edges
        .iter()
        .filter(|&&(a, b)| {
            !matches!((assignment[a], assignment[b]), (Some(x), Some(y))
                if vy.edge_set.contains(&(x.min(y), x.max(y))))
        })
        .copied()
        .collect();
    let edge_added: Vec<(usize, usize)> = vy
        .edges
        .iter()
        .filter(|e| !preserved.contains(e))
        .copied()
        .collect();

    let cost = removed.len() + added.len() + edge_deleted.len() + edge_added.len();
    Ok(EditPath {
        matched,
        removed,
        added,
        edge_deleted,
        edge_added,
        cost,
    })
}

struct Search<'a> {
    vx: &'a View,
    vy: &'a View,
    assignment: Vec<Option<usize>>,
    used: Vec<bool>,
    /// Cost = nx+ny+ex+ey - 2*(matches+preserved); we maximize the score.
    best_score: usize,
    best_assignment: Vec<Option<usize>>,
}

impl<'a> Search<'a> {
    fn dfs(&mut self, i: usize, matches: usize, preserved: usize) {
        let nx = self.vx.labels.len();
        if i == nx {
            // Strictly-better updates keep the first optimum found under the
            // deterministic expansion order.
            let score = matches + preserved;
            if self.best_score == usize::MAX || score > self.best_score {
                self.best_score = score;
                self.best_assignment = self.assignment.clone();
            }
            return;
        }

        if self.best_score != usize::MAX {
            let bound = matches + preserved + self.future_bound(i);
            if bound <= self.best_score {
                return;
            }
        }

        // Try every unused same-label image in ascending order.
        for j in 0..self.vy.labels.len() {
            if self.used[j] || self.vy.labels[j] != self.vx.labels[i] {
                continue;
            }
            let gain = self.preserved_gain(i, j);
            self.assignment[i] = Some(j);
            self.used[j] = true;
            self.dfs(i + 1, matches + 1, preserved + gain);
            self.assignment[i] = None;
            self.used[j] = false;
        }
        // Deletion branch.
        self.dfs(i + 1, matches, preserved);
    }

    /// Edges (k, i) with k < i already mapped whose images are edges in y.
    fn preserved_gain(&self, i: usize, j: usize) -> usize {
        self.vx
            .edges
            .iter()
            .filter(|&&(a, b)| {
                let other = if a == i {
                    b
                } else if b == i {
                    a
                } else {
                    return false;
                };
                if other >= i {
                    return false;
                }
                match self.assignment[other] {
                    Some(m) => self.vy.edge_set.contains(&(m.min(j), m.max(j))),
                    None => false,
                }
            })
            .count()
    }

    /// Admissible upper bound on future matches plus preservations.
    fn future_bound(&self, i: usize) -> usize {
        // Label multiset intersection between remaining x and unused y.
        let mut rem: std::collections::BTreeMap<usize, isize> = Default::default();
        for k in i..self.vx.labels.len() {
            *rem.entry(self.vx.labels[k]).or_insert(0) += 1;
        }
        let mut future_matches = 0usize;
        for (j, &lab) in self.vy.labels.iter().enumerate() {
            if self.used[j] {
                continue;
            }
            if let Some(c) = rem.get_mut(&lab) {
                if *c > 0 {
                    *c -= 1;
                    future_matches += 1;
                }
            }
        }
        // Edges that could still become preserved.
        let ex_open = self
            .vx
            .edges
            .iter()
            .filter(|&&(a, b)| a.max(b) >= i)
            .count();
        // Edges fully inside the used image are settled either way.
        let ey_open = self
            .vy
            .edges
            .iter()
            .filter(|&&(a, b)| !self.used[a] || !self.used[b])
            .count();
        future_matches + ex_open.min(ey_open)
    }
}

/// Exhaustive minimum over all injective label-preserving partial mappings.
/// Only for tiny inputs; this is the oracle the search is tested against.
pub fn brute_force_ged(tx: &JunctionTree, ty: &JunctionTree) -> Result<usize, GedError> {
    let nx = tx.node_count();
    let ny = ty.node_count();
    if nx + ny > 12 {
        return Err(GedError::TooLarge(nx + ny, 12));
    }
    let vx = view(tx);
    let vy = view(ty);
    let mut best = usize::MAX;
    let mut assignment: Vec<Option<usize>> = vec![None; nx];
    let mut used = vec![false; ny];
    enumerate(&vx, &vy, 0, &mut assignment, &mut used, &mut best);
    Ok(best)
}

fn enumerate(
    vx: &View,
    vy: &View,
    i: usize,
    assignment: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    best: &mut usize,
) {
    if i == vx.labels.len() {
        let matches = assignment.iter().filter(|a| a.is_some()).count();
        let preserved = vx
            .edges
            .iter()
            .filter(|&&(a, b)| match (assignment[a], assignment[b]) {
                (Some(x), Some(y)) => vy.edge_set.contains(&(x.min(y), x.max(y))),
                _ => false,
            })
            .count();
        let cost = vx.labels.len() + vy.labels.len() + vx.edges.len() + vy.edges.len()
            - 2 * (matches + preserved);
        *best = (*best).min(cost);
        return;
    }
    for j in 0..vy.labels.len() {
        if !used[j] && vy.labels[j] == vx.labels[i] {
            assignment[i] = Some(j);
            used[j] = true;
            enumerate(vx, vy, i + 1, assignment, used, best);
            assignment[i] = None;
            used[j] = false;
        }
    }
    enumerate(vx, vy, i + 1, assignment, used, best);
}

/// Matched nodes adjacent (in x) to a removal node or (through their image
/// in y) to an added node.
pub fn disconnection_sites(path: &EditPath, tx: &JunctionTree, ty: &JunctionTree) -> Vec<usize> {
    let removed: BTreeSet<usize> = path.removed.iter().copied().collect();
    let added: BTreeSet<usize> = path.added.iter().copied().collect();
    let mut sites = Vec::new();
    for &(x, y) in &path.matched {
        let near_removed = tx.neighbors(x).iter().any(|n| removed.contains(n));
        let near_added = ty.neighbors(y).iter().any(|n| added.contains(n));
        if near_removed || near_added {
            sites.push(x);
        }
    }
    sites.sort_unstable();
    sites
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::tree::{JunctionTree, NodeKind, TreeNode};
    use crate::tensor::rng::Rng;

    /// Builds a synthetic labeled tree (no molecule behind it).
    pub(crate) fn toy_tree(labels: &[usize], edges: &[(usize, usize)]) -> JunctionTree {
        let nodes = labels
            .iter()
            .map(|&l| TreeNode {
                atoms: Default::default(),
                bonds: vec![],
                kind: NodeKind::Bond,
                type_id: l,
            })
            .collect();
        let edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let node_neighbors = JunctionTree::rebuild_neighbors(labels.len(), &edges);
        JunctionTree {
            nodes,
            edges,
            node_neighbors,
        }
    }

    fn random_tree(rng: &mut Rng, n: usize, label_space: usize) -> JunctionTree {
        let labels: Vec<usize> = (0..n).map(|_| rng.below(label_space)).collect();
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.below(i), i)).collect();
        toy_tree(&labels, &edges)
    }

    #[test]
    fn identical_trees_cost_zero() {
        let t = toy_tree(&[0, 1, 2], &[(0, 1), (1, 2)]);
        let p = tree_edit_distance(&t, &t, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(p.cost, 0);
        assert_eq!(p.matched.len(), 3);
        assert!(p.removed.is_empty() && p.added.is_empty());
    }

    #[test]
    fn leaf_addition_costs_two() {
        let a = toy_tree(&[7], &[]);
        let b = toy_tree(&[7, 9], &[(0, 1)]);
        let p = tree_edit_distance(&a, &b, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(p.cost, 2);
        assert_eq!(p.added, vec![1]);
        assert_eq!(p.edge_added.len(), 1);
    }

    #[test]
    fn matches_brute_force_on_random_trees() {
        let mut rng = Rng::new(0xced);
        for trial in 0..200 {
            let nx = 1 + rng.below(6);
            let ny = 1 + rng.below(6);
            let tx = random_tree(&mut rng, nx, 3);
            let ty = random_tree(&mut rng, ny, 3);
            let fast = tree_edit_distance(&tx, &ty, DEFAULT_NODE_CAP).unwrap();
            let slow = brute_force_ged(&tx, &ty).unwrap();
            assert_eq!(fast.cost, slow, "trial {trial}: {tx:?} vs {ty:?}");
        }
    }

    #[test]
    fn size_cap_enforced() {
        let t = random_tree(&mut Rng::new(1), 8, 2);
        assert!(matches!(
            tree_edit_distance(&t, &t, 4),
            Err(GedError::TooLarge(8, 4))
        ));
    }

    #[test]
    fn disconnection_site_cases() {
        // Identical trees: no sites.
        let t = toy_tree(&[0, 1, 2], &[(0, 1), (1, 2)]);
        let p = tree_edit_distance(&t, &t, DEFAULT_NODE_CAP).unwrap();
        assert!(disconnection_sites(&p, &t, &t).is_empty());

        // One leaf deleted: exactly its parent.
        let a = toy_tree(&[0, 1, 2], &[(0, 1), (1, 2)]);
        let b = toy_tree(&[0, 1], &[(0, 1)]);
        let p = tree_edit_distance(&a, &b, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(p.cost, 2);
        assert_eq!(disconnection_sites(&p, &a, &b), vec![1]);
    }
}
