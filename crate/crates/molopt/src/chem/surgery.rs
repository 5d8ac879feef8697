//! Graph surgery: subtree removal and node attachment on a molecule/tree
//! pair. These are the primitives the sequential decoder drives.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use super::element::allowed_valences;
use super::molecule::{Atom, Bond, BuildError, Molecule};
use super::tree::{JunctionTree, NodeKind, NodeVocabulary, TreeNode};
use super::write::symmetry_classes;

/// Molecule/tree pair under construction. The molecule may carry open
/// valences until decoding finishes.
#[derive(Debug, Clone)]
pub struct IntermediateMol {
    pub mol: Molecule,
    pub tree: JunctionTree,
    /// Node-index queue for breadth-first attachment.
    pub frontier: VecDeque<usize>,
}

/// An attachment point: one shared atom, or an ordered pair of adjacent
/// atoms when two rings fuse along a bond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttachPoint {
    Atom(usize),
    Bond(usize, usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurgeryError {
    #[error("disconnection site cannot be part of the removal set")]
    RemovalContainsSite,
    #[error("removal node {0} separates the site from a retained fragment")]
    RemovalDisconnects(usize),
    #[error("removal node {0} out of range")]
    BadNode(usize),
    #[error("attachment is not valence-legal: {0}")]
    IllegalAttachment(String),
    #[error("attachment points are incompatible: {0}")]
    IncompatiblePoints(String),
    #[error("rebuild failed: {0}")]
    Rebuild(#[from] BuildError),
}

impl IntermediateMol {
    pub fn new(mol: Molecule, tree: JunctionTree, start_node: usize) -> IntermediateMol {
        let mut frontier = VecDeque::new();
        frontier.push_back(start_node);
        IntermediateMol {
            mol,
            tree,
            frontier,
        }
    }

    /// Caps remaining open valences with hydrogens and re-kekulizes.
    pub fn finalize(&self) -> Result<Molecule, BuildError> {
        self.mol.finalize_hydrogens()
    }
}

/// Deletes the subtrees under `removal`, keeping `site` and everything not
/// hanging behind a removed node. Atoms shared with retained nodes survive.
pub fn remove_subtrees(
    m: &Molecule,
    t: &JunctionTree,
    site: usize,
    removal: &BTreeSet<usize>,
) -> Result<IntermediateMol, SurgeryError> {
    if removal.contains(&site) {
        return Err(SurgeryError::RemovalContainsSite);
    }
    for &r in removal {
        if r >= t.node_count() {
            return Err(SurgeryError::BadNode(r));
        }
    }

    // Parent pointers from the site; a retained node whose path to the site
    // crosses a removed node would be orphaned.
    let parent = bfs_parents(t, site);
    for kept in 0..t.node_count() {
        if removal.contains(&kept) || parent[kept] == usize::MAX && kept != site {
            continue;
        }
        let mut v = kept;
        while v != site {
            let p = parent[v];
            if p == usize::MAX {
                break;
            }
            if removal.contains(&p) && !removal.contains(&kept) {
                return Err(SurgeryError::RemovalDisconnects(p));
            }
            v = p;
        }
    }

    let kept_nodes: Vec<usize> = (0..t.node_count())
        .filter(|n| !removal.contains(n))
        .collect();
    let mut kept_atoms: BTreeSet<usize> = BTreeSet::new();
    for &n in &kept_nodes {
        kept_atoms.extend(t.nodes[n].atoms.iter().copied());
    }

    // Remap atoms, dropping everything exclusive to removed nodes.
    let order: Vec<usize> = kept_atoms.iter().copied().collect();
    let mut new_atom = vec![usize::MAX; m.atom_count()];
    for (ni, &oi) in order.iter().enumerate() {
        new_atom[oi] = ni;
    }
    let atoms: Vec<Atom> = order.iter().map(|&i| *m.atom(i)).collect();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut new_bond = vec![usize::MAX; m.bond_count()];
    for (bi, b) in m.bonds().iter().enumerate() {
        if kept_atoms.contains(&b.a) && kept_atoms.contains(&b.b) {
            // A bond survives only while some retained node spans it; a bond
            // that lived inside removed nodes goes even if both endpoints
            // stay (they were shared atoms).
            let in_kept_node = kept_nodes
                .iter()
                .any(|&n| t.nodes[n].atoms.contains(&b.a) && t.nodes[n].atoms.contains(&b.b));
            if in_kept_node {
                new_bond[bi] = bonds.len();
                bonds.push(Bond {
                    a: new_atom[b.a],
                    b: new_atom[b.b],
                    order: b.order,
                    kekule: b.kekule,
                });
            }
        }
    }
    let mol = Molecule::assemble(atoms, bonds);

    // Induced tree on the kept nodes.
    let mut node_map = vec![usize::MAX; t.node_count()];
    let nodes: Vec<TreeNode> = kept_nodes
        .iter()
        .enumerate()
        .map(|(ni, &old)| {
            node_map[old] = ni;
            TreeNode {
                atoms: t.nodes[old]
                    .atoms
                    .iter()
                    .map(|&a| new_atom[a])
                    .collect(),
                bonds: t.nodes[old]
                    .bonds
                    .iter()
                    .filter(|&&b| new_bond[b] != usize::MAX)
                    .map(|&b| new_bond[b])
                    .collect(),
                kind: t.nodes[old].kind,
                type_id: t.nodes[old].type_id,
            }
        })
        .collect();
    let edges: Vec<(usize, usize)> = t
        .edges
        .iter()
        .filter(|(u, v)| node_map[*u] != usize::MAX && node_map[*v] != usize::MAX)
        .map(|&(u, v)| {
            let (a, b) = (node_map[u], node_map[v]);
            (a.min(b), a.max(b))
        })
        .collect();
    let node_neighbors = JunctionTree::rebuild_neighbors(nodes.len(), &edges);
    let tree = JunctionTree {
        nodes,
        edges,
        node_neighbors,
    };

    Ok(IntermediateMol::new(mol, tree, node_map[site]))
}

/// Hydrogen count the target atom keeps after gaining `added` bond order:
/// the lowest allowed valence state reachable without inventing hydrogens.
fn merged_hcount(atom: &Atom, sigma: u8, added: u8, h_avail: u8) -> Option<u8> {
    for &v in allowed_valences(atom.element, atom.charge) {
        if v >= sigma + added && v - sigma - added <= h_avail {
            return Some(v - sigma - added);
        }
    }
    None
}

struct Fusion {
    /// (molecule atom, template atom) pairs that become one atom.
    merged: Vec<(usize, usize)>,
    /// Template bond skipped because it already exists in the molecule.
    shared_template_bond: Option<(usize, usize)>,
}

fn plan_fusion(
    im: &IntermediateMol,
    parent: usize,
    template: &Molecule,
    parent_pt: &AttachPoint,
    child_pt: &AttachPoint,
) -> Result<Fusion, SurgeryError> {
    let node = &im.tree.nodes[parent];
    match (parent_pt, child_pt) {
        (AttachPoint::Atom(p), AttachPoint::Atom(c)) => {
            if !node.atoms.contains(p) {
                return Err(SurgeryError::IncompatiblePoints(format!(
                    "atom {p} is not part of the parent node"
                )));
            }
            let pa = im.mol.atom(*p);
            let ca = template.atom(*c);
            if pa.element != ca.element || pa.charge != ca.charge {
                return Err(SurgeryError::IncompatiblePoints(
                    "shared atom element/charge mismatch".into(),
                ));
            }
            Ok(Fusion {
                merged: vec![(*p, *c)],
                shared_template_bond: None,
            })
        }
        (AttachPoint::Bond(p1, p2), AttachPoint::Bond(c1, c2)) => {
            if !node.atoms.contains(p1) || !node.atoms.contains(p2) {
                return Err(SurgeryError::IncompatiblePoints(
                    "bond endpoints are not part of the parent node".into(),
                ));
            }
            let pb = im
                .mol
                .bond_between(*p1, *p2)
                .ok_or_else(|| SurgeryError::IncompatiblePoints("no parent bond".into()))?;
            let cb = template
                .bond_between(*c1, *c2)
                .ok_or_else(|| SurgeryError::IncompatiblePoints("no template bond".into()))?;
            if im.mol.bond(pb).order != template.bond(cb).order {
                return Err(SurgeryError::IncompatiblePoints(
                    "shared bond order mismatch".into(),
                ));
            }
            for (p, c) in [(*p1, *c1), (*p2, *c2)] {
                let pa = im.mol.atom(p);
                let ca = template.atom(c);
                if pa.element != ca.element || pa.charge != ca.charge {
                    return Err(SurgeryError::IncompatiblePoints(
                        "shared atom element/charge mismatch".into(),
                    ));
                }
            }
            Ok(Fusion {
                merged: vec![(*p1, *c1), (*p2, *c2)],
                shared_template_bond: Some((*c1, *c2)),
            })
        }
        _ => Err(SurgeryError::IncompatiblePoints(
            "attachment points must both be atoms or both be bonds".into(),
        )),
    }
}

/// Bond order the template adds to a merged atom (the shared bond, when
/// present, is not added again).
fn template_added_order(
    template: &Molecule,
    c: usize,
    shared: Option<(usize, usize)>,
) -> u8 {
    template
        .neighbors(c)
        .iter()
        .filter(|e| {
            shared.map_or(true, |(s1, s2)| {
                !((c == s1 && e.nbr == s2) || (c == s2 && e.nbr == s1))
            })
        })
        .map(|e| template.bond(e.bond).kekule)
        .sum()
}

fn fusion_is_legal(
    im: &IntermediateMol,
    template: &Molecule,
    fusion: &Fusion,
) -> Result<Vec<u8>, SurgeryError> {
    let mut new_h = Vec::new();
    for &(p, c) in &fusion.merged {
        let added = template_added_order(template, c, fusion.shared_template_bond);
        let atom = im.mol.atom(p);
        let sigma = im.mol.bond_order_sum(p);
        match merged_hcount(atom, sigma, added, atom.hcount) {
            Some(h) => new_h.push(h),
            None => {
                return Err(SurgeryError::IllegalAttachment(format!(
                    "atom {p} cannot absorb {added} extra bond order"
                )))
            }
        }
    }
    Ok(new_h)
}

/// Fuses a vocabulary node onto the intermediate molecule at the given
/// points. Returns the expanded intermediate; the new node index is the last
/// entry of the frontier.
pub fn attach_node(
    im: &IntermediateMol,
    parent: usize,
    child_type: usize,
    vocab: &NodeVocabulary,
    parent_pt: &AttachPoint,
    child_pt: &AttachPoint,
) -> Result<IntermediateMol, SurgeryError> {
    let template = vocab.template(child_type);
    let fusion = plan_fusion(im, parent, template, parent_pt, child_pt)?;
    let new_h = fusion_is_legal(im, template, &fusion)?;

    let mut mol = im.mol.clone();
    // Template atom -> molecule atom index.
    let mut t2m = vec![usize::MAX; template.atom_count()];
    for (&(p, c), &h) in fusion.merged.iter().zip(&new_h) {
        t2m[c] = p;
        mol.set_hcount(p, h);
        if template.atom(c).aromatic {
            // Joining a ring makes the shared atom part of it.
            let mut atoms = mol.atoms().to_vec();
            atoms[p].aromatic = true;
            mol = Molecule::assemble(atoms, mol.bonds().to_vec());
        }
    }

    let mut atoms = mol.atoms().to_vec();
    let mut bonds = mol.bonds().to_vec();
    let mut new_node_atoms: BTreeSet<usize> =
        fusion.merged.iter().map(|&(p, _)| p).collect();
    for c in 0..template.atom_count() {
        if t2m[c] == usize::MAX {
            t2m[c] = atoms.len();
            atoms.push(*template.atom(c));
            new_node_atoms.insert(t2m[c]);
        }
    }
    let mut new_node_bonds = Vec::new();
    if let Some((s1, s2)) = fusion.shared_template_bond {
        // The pre-existing shared bond moves into the new node only
        // logically; ownership stays with the parent.
        let _ = (s1, s2);
    }
    for b in template.bonds() {
        if fusion.shared_template_bond == Some((b.a, b.b))
            || fusion.shared_template_bond == Some((b.b, b.a))
        {
            continue;
        }
        new_node_bonds.push(bonds.len());
        bonds.push(Bond {
            a: t2m[b.a],
            b: t2m[b.b],
            order: b.order,
            kekule: b.kekule,
        });
    }
    let mol = Molecule::assemble(atoms, bonds);

    let mut tree = im.tree.clone();
    let new_index = tree.nodes.len();
    let kind = if template.bond_count() + template.component_count() > template.atom_count() {
        NodeKind::Ring
    } else {
        NodeKind::Bond
    };
    tree.nodes.push(TreeNode {
        atoms: new_node_atoms,
        bonds: new_node_bonds,
        kind,
        type_id: child_type,
    });
    tree.edges.push((parent.min(new_index), parent.max(new_index)));
    tree.node_neighbors = JunctionTree::rebuild_neighbors(tree.nodes.len(), &tree.edges);

    let mut out = IntermediateMol {
        mol,
        tree,
        frontier: im.frontier.clone(),
    };
    out.frontier.push_back(new_index);
    Ok(out)
}

/// All legal (parent point, child point) pairs for attaching `child_type`
/// under `parent`, deduplicated by symmetry and deterministically ordered.
pub fn legal_attachment_pairs(
    im: &IntermediateMol,
    parent: usize,
    child_type: usize,
    vocab: &NodeVocabulary,
) -> Vec<(AttachPoint, AttachPoint)> {
    let template = vocab.template(child_type);
    if template.bond_count() == 0 {
        return Vec::new();
    }
    let node = &im.tree.nodes[parent];
    let mol_ranks = symmetry_classes(&im.mol);
    let tpl_ranks = symmetry_classes(template);

    let mut pairs: Vec<(AttachPoint, AttachPoint)> = Vec::new();
    let mut seen: BTreeSet<(Vec<usize>, Vec<usize>)> = BTreeSet::new();

    // Atom-atom fusion.
    for &p in &node.atoms {
        for c in 0..template.atom_count() {
            let pp = AttachPoint::Atom(p);
            let cp = AttachPoint::Atom(c);
            if let Ok(f) = plan_fusion(im, parent, template, &pp, &cp) {
                if fusion_is_legal(im, template, &f).is_ok() {
                    let key = (vec![mol_ranks[p]], vec![tpl_ranks[c]]);
                    if seen.insert(key) {
                        pairs.push((pp, cp));
                    }
                }
            }
        }
    }

    // Bond-bond fusion (fused rings): only between two ring systems.
    let child_is_ring =
        template.bond_count() + template.component_count() > template.atom_count();
    if node.kind == NodeKind::Ring && child_is_ring {
        let mut node_bonds: Vec<(usize, usize)> = Vec::new();
        for &a in &node.atoms {
            for e in im.mol.neighbors(a) {
                if e.nbr > a && node.atoms.contains(&e.nbr) {
                    node_bonds.push((a, e.nbr));
                }
            }
        }
        node_bonds.sort_unstable();
        let mut tpl_bonds: Vec<(usize, usize)> = template
            .bonds()
            .iter()
            .map(|b| (b.a.min(b.b), b.a.max(b.b)))
            .collect();
        tpl_bonds.sort_unstable();

        for &(p1, p2) in &node_bonds {
            for &(c1, c2) in &tpl_bonds {
                for (x, y) in [(c1, c2), (c2, c1)] {
                    let pp = AttachPoint::Bond(p1, p2);
                    let cp = AttachPoint::Bond(x, y);
                    if let Ok(f) = plan_fusion(im, parent, template, &pp, &cp) {
                        if fusion_is_legal(im, template, &f).is_ok() {
                            let key = (
                                vec![mol_ranks[p1], mol_ranks[p2]],
                                vec![tpl_ranks[x], tpl_ranks[y]],
                            );
                            if seen.insert(key) {
                                pairs.push((pp, cp));
                            }
                        }
                    }
                }
            }
        }
    }

    pairs
}

/// Candidate attachment points at the parent and at the child template,
/// each list deduplicated by symmetry. Empty lists mean no legal attachment.
pub fn enumerate_attachment_candidates(
    im: &IntermediateMol,
    parent: usize,
    child_type: usize,
    vocab: &NodeVocabulary,
) -> (Vec<AttachPoint>, Vec<AttachPoint>) {
    let pairs = legal_attachment_pairs(im, parent, child_type, vocab);
    let mut parents = Vec::new();
    let mut children = Vec::new();
    for (p, c) in pairs {
        if !parents.contains(&p) {
            parents.push(p);
        }
        if !children.contains(&c) {
            children.push(c);
        }
    }
    (parents, children)
}

/// Child points compatible with one chosen parent point.
pub fn compatible_child_points(
    im: &IntermediateMol,
    parent: usize,
    child_type: usize,
    vocab: &NodeVocabulary,
    parent_pt: &AttachPoint,
) -> Vec<AttachPoint> {
    legal_attachment_pairs(im, parent, child_type, vocab)
        .into_iter()
        .filter(|(p, _)| p == parent_pt)
        .map(|(_, c)| c)
        .collect()
}

fn bfs_parents(t: &JunctionTree, root: usize) -> Vec<usize> {
    let mut parent = vec![usize::MAX; t.node_count()];
    let mut seen = vec![false; t.node_count()];
    let mut q = VecDeque::new();
    seen[root] = true;
    q.push_back(root);
    while let Some(v) = q.pop_front() {
        for &w in t.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                parent[w] = v;
                q.push_back(w);
            }
        }
    }
    parent
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::iso::are_isomorphic;
    use crate::chem::parse::parse_smiles;
    use crate::chem::tree::junction_tree;
    use crate::chem::write::write_smiles;

    fn setup(smiles: &str, vocab_src: &[&str]) -> (Molecule, JunctionTree, NodeVocabulary) {
        let mols: Vec<Molecule> = vocab_src.iter().map(|s| parse_smiles(s).unwrap()).collect();
        let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
        let m = parse_smiles(smiles).unwrap();
        let t = junction_tree(&m, &vocab).unwrap();
        (m, t, vocab)
    }

    #[test]
    fn empty_removal_is_identity() {
        let (m, t, _) = setup("CCO", &["CCO"]);
        let im = remove_subtrees(&m, &t, 0, &BTreeSet::new()).unwrap();
        assert!(are_isomorphic(&m, &im.finalize().unwrap()));
    }

    #[test]
    fn ethanol_drop_hydroxyl_node() {
        let (m, t, _) = setup("CCO", &["CCO"]);
        // Node 0 = C-C bond, node 1 = C-O bond.
        let site = 0;
        let removal: BTreeSet<usize> = [1].into_iter().collect();
        let im = remove_subtrees(&m, &t, site, &removal).unwrap();
        let done = im.finalize().unwrap();
        let expect = parse_smiles("CC").unwrap();
        assert!(are_isomorphic(&done, &expect));
    }

    #[test]
    fn removal_must_be_subtree_closed() {
        let (m, t, _) = setup("CCCC", &["CCCC"]);
        // Nodes chain: 0-1-2. Removing the middle node while keeping the far
        // one orphans it.
        let removal: BTreeSet<usize> = [1].into_iter().collect();
        let err = remove_subtrees(&m, &t, 0, &removal).unwrap_err();
        assert!(matches!(err, SurgeryError::RemovalDisconnects(_)));
        // Removing the whole tail is fine.
        let removal: BTreeSet<usize> = [1, 2].into_iter().collect();
        let im = remove_subtrees(&m, &t, 0, &removal).unwrap();
        assert!(are_isomorphic(
            &im.finalize().unwrap(),
            &parse_smiles("CC").unwrap()
        ));
    }

    #[test]
    fn attach_cc_bond_to_methane_gives_ethane() {
        let (m, t, vocab) = setup("C", &["C", "CC"]);
        let im = IntermediateMol::new(m, t, 0);
        let cc = vocab.lookup("CC").unwrap();
        let (ps, cs) = enumerate_attachment_candidates(&im, 0, cc, &vocab);
        assert_eq!(ps.len(), 1);
        assert_eq!(cs.len(), 1);
        let out = attach_node(&im, 0, cc, &vocab, &ps[0], &cs[0]).unwrap();
        let done = out.finalize().unwrap();
        assert!(are_isomorphic(&done, &parse_smiles("CC").unwrap()));
        assert!(done.valence_check().is_empty());
    }

    #[test]
    fn benzene_symmetry_collapses_candidates() {
        let (m, t, vocab) = setup("c1ccccc1", &["c1ccccc1", "Cc1ccccc1"]);
        let im = IntermediateMol::new(m, t, 0);
        let cc = vocab.lookup("CC").unwrap_or_else(|| {
            // The toluene methyl node is C-c, whose descriptor is "CC".
            panic!("vocab missing CC: {:?}", vocab.entries())
        });
        let (ps, cs) = enumerate_attachment_candidates(&im, 0, cc, &vocab);
        assert_eq!(ps.len(), 1, "parents {ps:?}");
        assert_eq!(cs.len(), 1, "children {cs:?}");
        let out = attach_node(&im, 0, cc, &vocab, &ps[0], &cs[0]).unwrap();
        let done = out.finalize().unwrap();
        assert!(are_isomorphic(&done, &parse_smiles("Cc1ccccc1").unwrap()));
    }

    #[test]
    fn attach_then_detach_round_trips() {
        let (m, t, vocab) = setup("CCO", &["CCO", "CCN"]);
        let im = IntermediateMol::new(m.clone(), t, 0);
        let cn = vocab.lookup("CN").unwrap();
        let pairs = legal_attachment_pairs(&im, 1, cn, &vocab);
        assert!(!pairs.is_empty());
        let (pp, cp) = pairs[0];
        let attached = attach_node(&im, 1, cn, &vocab, &pp, &cp).unwrap();
        let new_node = attached.tree.node_count() - 1;
        let removal: BTreeSet<usize> = [new_node].into_iter().collect();
        let back = remove_subtrees(&attached.mol, &attached.tree, 1, &removal).unwrap();
        assert!(are_isomorphic(&back.finalize().unwrap(), &m));
    }

    #[test]
    fn full_valence_parent_excluded() {
        let (m, t, vocab) = setup("FC(F)(F)F", &["FC(F)(F)F", "CC"]);
        // Every bond node contains the saturated carbon and a fluorine;
        // neither can take a new C-C attachment.
        let im = IntermediateMol::new(m, t, 0);
        let cc = vocab.lookup("CC").unwrap();
        let (ps, cs) = enumerate_attachment_candidates(&im, 0, cc, &vocab);
        assert!(ps.is_empty());
        assert!(cs.is_empty());
    }

    #[test]
    fn fused_ring_attachment_shares_bond() {
        let (m, t, vocab) = setup("c1ccccc1", &["c1ccccc1", "c1ccc2ccccc2c1"]);
        let im = IntermediateMol::new(m, t, 0);
        let ring = vocab.lookup("c1ccccc1").unwrap();
        let pairs = legal_attachment_pairs(&im, 0, ring, &vocab);
        let bond_pairs: Vec<_> = pairs
            .iter()
            .filter(|(p, _)| matches!(p, AttachPoint::Bond(_, _)))
            .collect();
        assert!(!bond_pairs.is_empty());
        let (pp, cp) = *bond_pairs[0];
        let out = attach_node(&im, 0, ring, &vocab, &pp, &cp).unwrap();
        let done = out.finalize().unwrap();
        assert!(done.valence_check().is_empty());
        assert!(are_isomorphic(
            &done,
            &parse_smiles("c1ccc2ccccc2c1").unwrap()
        ));
        assert_eq!(write_smiles(&done).unwrap(), {
            let naph = parse_smiles("c1ccc2ccccc2c1").unwrap();
            write_smiles(&naph).unwrap()
        });
    }

    #[test]
    fn candidate_soundness_small_parents() {
        let corpus = ["CCO", "CCN", "c1ccccc1", "CC(C)=O", "CS"];
        let mols: Vec<Molecule> = corpus.iter().map(|s| parse_smiles(s).unwrap()).collect();
        let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
        for m in &mols {
            let t = junction_tree(m, &vocab).unwrap();
            for node in 0..t.node_count() {
                let im = IntermediateMol::new(m.clone(), t.clone(), node);
                for ty in 0..vocab.len() {
                    for (pp, cp) in legal_attachment_pairs(&im, node, ty, &vocab) {
                        let out = attach_node(&im, node, ty, &vocab, &pp, &cp)
                            .expect("enumerated candidate must apply");
                        let done = out.finalize().expect("finalize");
                        assert!(
                            done.valence_check().is_empty(),
                            "candidate broke valence for {} type {}",
                            write_smiles_any_dbg(m),
                            vocab.descriptor(ty)
                        );
                    }
                }
            }
        }
    }

    fn write_smiles_any_dbg(m: &Molecule) -> String {
        crate::chem::write::write_smiles_any(m)
    }
}
