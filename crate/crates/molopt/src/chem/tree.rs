//! Junction-tree decomposition: rings and non-ring bonds become nodes, nodes
//! sharing atoms are connected, and residual cycles are repaired away.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use super::molecule::{BuildError, Molecule};
use super::rings::{ring_bonds, sssr};
use super::write::write_smiles_any;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Ring,
    Bond,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub atoms: BTreeSet<usize>,
    /// Bonds owned by this node; every molecule bond is owned exactly once.
    pub bonds: Vec<usize>,
    pub kind: NodeKind,
    pub type_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTree {
    pub nodes: Vec<TreeNode>,
    /// Edges as (u, v) with u < v; acyclic per connected component.
    pub edges: Vec<(usize, usize)>,
    pub node_neighbors: Vec<Vec<usize>>,
}

impl JunctionTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.node_neighbors[node]
    }

    /// Atoms shared between two adjacent nodes.
    pub fn shared_atoms(&self, u: usize, v: usize) -> BTreeSet<usize> {
        self.nodes[u]
            .atoms
            .intersection(&self.nodes[v].atoms)
            .copied()
            .collect()
    }

    pub(crate) fn rebuild_neighbors(nodes: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); nodes];
        for &(u, v) in edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("fragment {0:?} is not in the node vocabulary")]
    UnknownFragment(String),
    #[error("node substructure could not be rebuilt: {0}")]
    Fragment(#[from] BuildError),
}

/// Vocabulary of node substructures, keyed by canonical fragment SMILES.
/// Line number in the vocabulary file is the type id.
#[derive(Debug, Clone)]
pub struct NodeVocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
    templates: Vec<Molecule>,
}

impl NodeVocabulary {
    pub fn from_descriptors(entries: Vec<String>) -> Result<NodeVocabulary, TreeError> {
        let mut index = HashMap::new();
        let mut templates = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            index.insert(e.clone(), i);
            let t = super::parse::parse_smiles(e)
                .map_err(|_| TreeError::UnknownFragment(e.clone()))?;
            templates.push(t);
        }
        Ok(NodeVocabulary {
            entries,
            index,
            templates,
        })
    }

    /// Collects every node descriptor seen in the corpus, sorted, so ids are
    /// stable across runs.
    pub fn from_corpus<'a>(
        mols: impl IntoIterator<Item = &'a Molecule>,
    ) -> Result<NodeVocabulary, TreeError> {
        let mut set = BTreeSet::new();
        for m in mols {
            for d in node_descriptors(m)? {
                set.insert(d);
            }
        }
        NodeVocabulary::from_descriptors(set.into_iter().collect())
    }

    pub fn lookup(&self, descriptor: &str) -> Option<usize> {
        self.index.get(descriptor).copied()
    }

    pub fn descriptor(&self, type_id: usize) -> &str {
        &self.entries[type_id]
    }

    pub fn template(&self, type_id: usize) -> &Molecule {
        &self.templates[type_id]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// FNV-1a over the entry list; embedded in checkpoints to detect
    /// vocabulary mismatches.
    pub fn content_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for e in &self.entries {
            for b in e.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= b'\n' as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Canonical descriptor of one node substructure.
pub fn node_descriptor(m: &Molecule, atoms: &BTreeSet<usize>) -> Result<String, TreeError> {
    let (frag, _) = m.extract_fragment(atoms, &BTreeSet::new())?;
    Ok(write_smiles_any(&frag))
}

/// Descriptors of all nodes of a molecule, in node order.
pub fn node_descriptors(m: &Molecule) -> Result<Vec<String>, TreeError> {
    let (nodes, _) = decompose(m);
    nodes
        .iter()
        .map(|n| node_descriptor(m, &n.atoms))
        .collect()
}

/// Junction tree of a molecule with nodes labeled against `vocab`.
pub fn junction_tree(m: &Molecule, vocab: &NodeVocabulary) -> Result<JunctionTree, TreeError> {
    let (mut nodes, edges) = decompose(m);
    for node in &mut nodes {
        let desc = node_descriptor(m, &node.atoms)?;
        node.type_id = vocab
            .lookup(&desc)
            .ok_or(TreeError::UnknownFragment(desc))?;
    }
    let node_neighbors = JunctionTree::rebuild_neighbors(nodes.len(), &edges);
    Ok(JunctionTree {
        nodes,
        edges,
        node_neighbors,
    })
}

/// Ring/bond node extraction plus tree-ness repair; type ids are left unset.
pub(crate) fn decompose(m: &Molecule) -> (Vec<TreeNode>, Vec<(usize, usize)>) {
    let rings = sssr(m);
    let ring_bond = ring_bonds(m);

    // Merge rings sharing >= 3 atoms (bridged systems) into one node.
    let mut ring_groups: Vec<BTreeSet<usize>> = Vec::new();
    for r in &rings {
        let atoms = r.atom_set();
        let mut merged = atoms;
        loop {
            let hit = ring_groups
                .iter()
                .position(|g| g.intersection(&merged).count() >= 3);
            match hit {
                Some(i) => {
                    let g = ring_groups.remove(i);
                    merged.extend(g);
                }
                None => break,
            }
        }
        ring_groups.push(merged);
    }

    let mut nodes: Vec<TreeNode> = Vec::new();
    for g in ring_groups {
        nodes.push(TreeNode {
            atoms: g,
            bonds: Vec::new(),
            kind: NodeKind::Ring,
            type_id: usize::MAX,
        });
    }
    for (bi, b) in m.bonds().iter().enumerate() {
        if !ring_bond[bi] {
            nodes.push(TreeNode {
                atoms: [b.a, b.b].into_iter().collect(),
                bonds: vec![bi],
                kind: NodeKind::Bond,
                type_id: usize::MAX,
            });
        }
    }
    // Isolated atoms become single-atom nodes so coverage holds.
    for i in 0..m.atom_count() {
        if m.degree(i) == 0 {
            nodes.push(TreeNode {
                atoms: [i].into_iter().collect(),
                bonds: Vec::new(),
                kind: NodeKind::Bond,
                type_id: usize::MAX,
            });
        }
    }

    // Deterministic node order: lowest contained atom first.
    nodes.sort_by(|a, b| {
        let ka: Vec<usize> = a.atoms.iter().copied().collect();
        let kb: Vec<usize> = b.atoms.iter().copied().collect();
        ka.cmp(&kb)
    });

    // Assign each ring bond to the first ring node containing both endpoints.
    let mut owned = vec![false; m.bond_count()];
    for n in nodes.iter_mut() {
        if n.kind == NodeKind::Ring {
            for (bi, b) in m.bonds().iter().enumerate() {
                if !owned[bi]
                    && ring_bond[bi]
                    && n.atoms.contains(&b.a)
                    && n.atoms.contains(&b.b)
                {
                    owned[bi] = true;
                    n.bonds.push(bi);
                }
            }
        }
    }

    // Candidate edges between nodes sharing atoms, then break cycles by
    // dropping the smallest-overlap edge on a cycle (ties: lowest pair).
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    for u in 0..nodes.len() {
        for v in (u + 1)..nodes.len() {
            let shared = nodes[u].atoms.intersection(&nodes[v].atoms).count();
            if shared > 0 {
                edges.push((u, v, shared));
            }
        }
    }
    let edges = repair_tree(nodes.len(), edges);

    (nodes, edges)
}

/// Reverse-delete: visit edges from smallest shared-atom count upward and
/// drop any edge that still lies on a cycle.
fn repair_tree(n: usize, mut edges: Vec<(usize, usize, usize)>) -> Vec<(usize, usize)> {
    edges.sort_by_key(|&(u, v, s)| (s, u, v));
    let mut alive: Vec<bool> = vec![true; edges.len()];
    for i in 0..edges.len() {
        let (u, v, _) = edges[i];
        // Reachable without this edge?
        let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (j, &(a, b, _)) in edges.iter().enumerate() {
            if alive[j] && j != i {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![u];
        seen[u] = true;
        let mut reachable = false;
        while let Some(x) = stack.pop() {
            if x == v {
                reachable = true;
                break;
            }
            if let Some(ns) = adj.get(&x) {
                for &w in ns {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        if reachable {
            alive[i] = false;
        }
    }
    let mut kept: Vec<(usize, usize)> = edges
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(&(u, v, _), _)| (u, v))
        .collect();
    kept.sort_unstable();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;

    fn vocab_for(smiles: &[&str]) -> NodeVocabulary {
        let mols: Vec<Molecule> = smiles.iter().map(|s| parse_smiles(s).unwrap()).collect();
        NodeVocabulary::from_corpus(&mols).unwrap()
    }

    #[test]
    fn ethane_single_bond_node() {
        let m = parse_smiles("CC").unwrap();
        let vocab = vocab_for(&["CC"]);
        let t = junction_tree(&m, &vocab).unwrap();
        assert_eq!(t.node_count(), 1);
        assert!(t.edges.is_empty());
        assert_eq!(t.nodes[0].kind, NodeKind::Bond);
    }

    #[test]
    fn propane_two_nodes_one_edge() {
        let m = parse_smiles("CCC").unwrap();
        let vocab = vocab_for(&["CCC"]);
        let t = junction_tree(&m, &vocab).unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.edges.len(), 1);
        let shared = t.shared_atoms(0, 1);
        assert_eq!(shared.len(), 1);
    }

    #[test]
    fn benzene_single_ring_node() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let vocab = vocab_for(&["c1ccccc1"]);
        let t = junction_tree(&m, &vocab).unwrap();
        assert_eq!(t.node_count(), 1);
        assert!(t.edges.is_empty());
        assert_eq!(t.nodes[0].kind, NodeKind::Ring);
        assert_eq!(vocab.descriptor(t.nodes[0].type_id), "c1ccccc1");
    }

    #[test]
    fn acyclic_tree_edge_count() {
        for s in ["CCO", "CC(C)C", "CCCCC", "CC(N)C(=O)O"] {
            let m = parse_smiles(s).unwrap();
            let vocab = vocab_for(&[s]);
            let t = junction_tree(&m, &vocab).unwrap();
            assert_eq!(t.edges.len(), t.node_count() - 1, "for {s}");
        }
    }

    #[test]
    fn coverage_and_bond_ownership() {
        for s in [
            "CCO",
            "c1ccccc1CCN",
            "c1ccc2ccccc2c1",
            "C1CC12CC2",
            "OC1CCC(N)C1",
            "CC(=O)Nc1ccc(O)cc1",
        ] {
            let m = parse_smiles(s).unwrap();
            let vocab = vocab_for(&[s]);
            let t = junction_tree(&m, &vocab).unwrap();
            let mut atom_cover = vec![false; m.atom_count()];
            let mut bond_owned = vec![0usize; m.bond_count()];
            for n in &t.nodes {
                for &a in &n.atoms {
                    atom_cover[a] = true;
                }
                for &b in &n.bonds {
                    bond_owned[b] += 1;
                }
            }
            assert!(atom_cover.iter().all(|&x| x), "atom coverage for {s}");
            assert!(
                bond_owned.iter().all(|&c| c == 1),
                "bond ownership for {s}: {bond_owned:?}"
            );
        }
    }

    #[test]
    fn tree_is_acyclic() {
        // Quaternary carbon: four bond nodes all share one atom, which forms
        // a clique before repair.
        let m = parse_smiles("CC(C)(C)C").unwrap();
        let vocab = vocab_for(&["CC(C)(C)C"]);
        let t = junction_tree(&m, &vocab).unwrap();
        assert_eq!(t.node_count(), 4);
        assert_eq!(t.edges.len(), 3);
    }

    #[test]
    fn unknown_fragment_reported() {
        let m = parse_smiles("c1ccncc1").unwrap();
        let vocab = vocab_for(&["CC"]);
        match junction_tree(&m, &vocab) {
            Err(TreeError::UnknownFragment(d)) => assert!(d.contains('n'), "got {d}"),
            other => panic!("expected vocabulary miss, got {other:?}"),
        }
    }

    #[test]
    fn vocabulary_hash_stable() {
        let v1 = vocab_for(&["CCO", "c1ccccc1"]);
        let v2 = vocab_for(&["c1ccccc1", "CCO"]);
        assert_eq!(v1.content_hash(), v2.content_hash());
        assert_eq!(v1.entries(), v2.entries());
    }
}
