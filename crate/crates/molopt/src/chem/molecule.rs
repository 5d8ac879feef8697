//! Molecular graph: atoms, bonds, adjacency, kekulization and hydrogen fill.

use std::collections::BTreeSet;

use thiserror::Error;

use super::element::{allowed_valences, fill_target, max_valence, Element};

/// A heavy atom (or an explicitly written hydrogen) in the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
    /// Attached hydrogens, explicit or filled from the valence table.
    pub hcount: u8,
    /// SMILES atom-map class; marks fragment attachment points.
    pub atom_map: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Integer order used before kekulization (aromatic counts as 1).
    pub fn provisional(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    /// Resolved integer order (1/2/3); aromatic bonds carry their Kekulé
    /// assignment here.
    pub kekule: u8,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// Adjacency entry: neighbor atom plus the connecting bond index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adj {
    pub nbr: usize,
    pub bond: usize,
}

/// Atom as produced by the parser or by graph surgery, before hydrogen fill.
#[derive(Debug, Clone, Copy)]
pub struct RawAtom {
    pub element: Element,
    pub charge: i8,
    pub aromatic: bool,
    /// `Some` when written in brackets; `None` means fill from the valence
    /// table.
    pub hcount: Option<u8>,
    pub atom_map: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
pub struct RawBond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BuildError {
    #[error("bond endpoints {0} and {1} are identical (self loop)")]
    SelfLoop(usize, usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("bond references atom {0} out of range")]
    BadAtomIndex(usize),
    #[error("aromatic system cannot be kekulized (atom {atom})")]
    Kekulization { atom: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValenceViolation {
    pub atom: usize,
    pub total: u8,
    pub allowed_max: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adj: Vec<Vec<Adj>>,
}

impl Molecule {
    /// Builds a molecule from raw parts: validates the graph, kekulizes
    /// aromatic systems, and fills implicit hydrogens for atoms without an
    /// explicit count (lowest valence state consistent with the bonds).
    pub fn from_parts(atoms: Vec<RawAtom>, bonds: Vec<RawBond>) -> Result<Molecule, BuildError> {
        let n = atoms.len();
        let mut seen = BTreeSet::new();
        for rb in &bonds {
            if rb.a >= n {
                return Err(BuildError::BadAtomIndex(rb.a));
            }
            if rb.b >= n {
                return Err(BuildError::BadAtomIndex(rb.b));
            }
            if rb.a == rb.b {
                return Err(BuildError::SelfLoop(rb.a, rb.b));
            }
            let key = (rb.a.min(rb.b), rb.a.max(rb.b));
            if !seen.insert(key) {
                return Err(BuildError::DuplicateBond(key.0, key.1));
            }
        }

        let mut adj: Vec<Vec<Adj>> = vec![Vec::new(); n];
        for (bi, rb) in bonds.iter().enumerate() {
            adj[rb.a].push(Adj { nbr: rb.b, bond: bi });
            adj[rb.b].push(Adj { nbr: rb.a, bond: bi });
        }

        let kekule = kekulize(&atoms, &bonds, &adj)?;

        let mut sigma = vec![0u8; n];
        for (bi, rb) in bonds.iter().enumerate() {
            sigma[rb.a] = sigma[rb.a].saturating_add(kekule[bi]);
            sigma[rb.b] = sigma[rb.b].saturating_add(kekule[bi]);
        }

        let atoms: Vec<Atom> = atoms
            .iter()
            .enumerate()
            .map(|(i, ra)| Atom {
                element: ra.element,
                charge: ra.charge,
                aromatic: ra.aromatic,
                hcount: match ra.hcount {
                    Some(h) => h,
                    None => fill_target(ra.element, ra.charge, sigma[i])
                        .map(|t| t - sigma[i])
                        .unwrap_or(0),
                },
                atom_map: ra.atom_map,
            })
            .collect();

        let bonds: Vec<Bond> = bonds
            .iter()
            .zip(&kekule)
            .map(|(rb, &k)| Bond {
                a: rb.a,
                b: rb.b,
                order: rb.order,
                kekule: k,
            })
            .collect();

        Ok(Molecule { atoms, bonds, adj })
    }

    /// Direct assembly that keeps existing hydrogen counts and Kekulé
    /// assignments; graph surgery builds intermediates this way and defers
    /// re-kekulization to `finalize_hydrogens`.
    pub(crate) fn assemble(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Molecule {
        let mut adj: Vec<Vec<Adj>> = vec![Vec::new(); atoms.len()];
        for (bi, b) in bonds.iter().enumerate() {
            adj[b.a].push(Adj { nbr: b.b, bond: bi });
            adj[b.b].push(Adj { nbr: b.a, bond: bi });
        }
        Molecule { atoms, bonds, adj }
    }

    pub(crate) fn set_hcount(&mut self, atom: usize, h: u8) {
        self.atoms[atom].hcount = h;
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bond(&self, i: usize) -> &Bond {
        &self.bonds[i]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Atoms that are not explicit hydrogens.
    pub fn heavy_atom_count(&self) -> usize {
        self.atoms
            .iter()
            .filter(|a| a.element != Element::H)
            .count()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn neighbors(&self, atom: usize) -> &[Adj] {
        &self.adj[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adj[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adj[a].iter().find(|e| e.nbr == b).map(|e| e.bond)
    }

    /// Kekulé bond-order sum at an atom (hydrogens not included).
    pub fn bond_order_sum(&self, atom: usize) -> u8 {
        self.adj[atom]
            .iter()
            .map(|e| self.bonds[e.bond].kekule)
            .sum()
    }

    /// Unfilled valence at an atom: distance from `bond sum + H` up to the
    /// next allowed valence state. Zero for complete or over-bonded atoms.
    pub fn open_capacity(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        let used = self.bond_order_sum(atom) + a.hcount;
        fill_target(a.element, a.charge, used)
            .map(|t| t - used)
            .unwrap_or(0)
    }

    /// True when `bond sum + H` equals one of the allowed valences.
    pub fn is_complete_atom(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        let used = self.bond_order_sum(atom) + a.hcount;
        allowed_valences(a.element, a.charge).contains(&used)
    }

    pub fn has_open_valence(&self) -> bool {
        (0..self.atoms.len()).any(|i| !self.is_complete_atom(i))
    }

    /// Reports atoms whose bond-order sum plus hydrogens exceeds the largest
    /// allowed valence. Reports, never throws.
    pub fn valence_check(&self) -> Vec<ValenceViolation> {
        let mut out = Vec::new();
        for (i, a) in self.atoms.iter().enumerate() {
            let total = self.bond_order_sum(i) + a.hcount;
            let cap = max_valence(a.element, a.charge);
            if total > cap {
                out.push(ValenceViolation {
                    atom: i,
                    total,
                    allowed_max: cap,
                });
            }
        }
        out
    }

    pub fn component_count(&self) -> usize {
        self.components().len()
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            comp[start] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for e in &self.adj[v] {
                    if comp[e.nbr] == usize::MAX {
                        comp[e.nbr] = id;
                        stack.push(e.nbr);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.atoms.is_empty() || self.component_count() == 1
    }

    /// Re-kekulizes the (possibly edited) graph and caps any remaining open
    /// valences with hydrogens. Used after graph surgery.
    pub fn finalize_hydrogens(&self) -> Result<Molecule, BuildError> {
        let raw_atoms: Vec<RawAtom> = self
            .atoms
            .iter()
            .map(|a| RawAtom {
                element: a.element,
                charge: a.charge,
                aromatic: a.aromatic,
                hcount: Some(a.hcount),
                atom_map: a.atom_map,
            })
            .collect();
        let raw_bonds: Vec<RawBond> = self
            .bonds
            .iter()
            .map(|b| RawBond {
                a: b.a,
                b: b.b,
                order: b.order,
            })
            .collect();
        let mut m = Molecule::from_parts(raw_atoms, raw_bonds)?;
        for i in 0..m.atoms.len() {
            let extra = m.open_capacity(i);
            m.atoms[i].hcount += extra;
        }
        Ok(m)
    }

    /// Relabels atoms so that new atom `i` is old atom `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut inverse = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let atoms: Vec<Atom> = perm.iter().map(|&old| self.atoms[old]).collect();
        let bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: inverse[b.a],
                b: inverse[b.b],
                order: b.order,
                kekule: b.kekule,
            })
            .collect();
        let mut adj: Vec<Vec<Adj>> = vec![Vec::new(); atoms.len()];
        for (bi, b) in bonds.iter().enumerate() {
            adj[b.a].push(Adj { nbr: b.b, bond: bi });
            adj[b.b].push(Adj { nbr: b.a, bond: bi });
        }
        Molecule { atoms, bonds, adj }
    }

    /// Extracts the induced subgraph on `atoms` as a standalone molecule.
    ///
    /// Aromatic flags survive only on atoms that still sit in a ring of the
    /// subgraph; aromatic bonds that fall outside any subgraph ring are
    /// downgraded to their Kekulé order. Atoms listed in `markers` keep no
    /// hydrogens and are tagged with atom maps 1, 2, ... in atom-index order.
    /// Interior atoms (every bond retained) keep their hydrogen count — a
    /// pyrrole nitrogen stays [nH] — while boundary atoms are refilled; all
    /// other atom maps are cleared.
    ///
    /// Returns the fragment and the old index of each new atom.
    pub fn extract_fragment(
        &self,
        atoms: &BTreeSet<usize>,
        markers: &BTreeSet<usize>,
    ) -> Result<(Molecule, Vec<usize>), BuildError> {
        let order: Vec<usize> = atoms.iter().copied().collect();
        let mut new_index = vec![usize::MAX; self.atoms.len()];
        for (ni, &oi) in order.iter().enumerate() {
            new_index[oi] = ni;
        }

        let mut raw_bonds = Vec::new();
        for b in &self.bonds {
            if atoms.contains(&b.a) && atoms.contains(&b.b) {
                raw_bonds.push(RawBond {
                    a: new_index[b.a],
                    b: new_index[b.b],
                    order: b.order,
                });
            }
        }

        let in_ring = subgraph_ring_atoms(order.len(), &raw_bonds);
        for rb in &mut raw_bonds {
            if rb.order == BondOrder::Aromatic && !(in_ring[rb.a] && in_ring[rb.b]) {
                let old = self
                    .bond_between(order[rb.a], order[rb.b])
                    .expect("bond exists");
                rb.order = match self.bonds[old].kekule {
                    2 => BondOrder::Double,
                    3 => BondOrder::Triple,
                    _ => BondOrder::Single,
                };
            }
        }

        let mut next_map = 1u32;
        let raw_atoms: Vec<RawAtom> = order
            .iter()
            .map(|&oi| {
                let a = &self.atoms[oi];
                let marker = markers.contains(&oi);
                let map = if marker {
                    let m = next_map;
                    next_map += 1;
                    Some(m)
                } else {
                    None
                };
                let interior = self.adj[oi].iter().all(|e| atoms.contains(&e.nbr));
                RawAtom {
                    element: a.element,
                    charge: a.charge,
                    aromatic: a.aromatic && in_ring[new_index[oi]],
                    hcount: if marker {
                        Some(0)
                    } else if interior {
                        Some(a.hcount)
                    } else {
                        None
                    },
                    atom_map: map,
                }
            })
            .collect();

        let frag = Molecule::from_parts(raw_atoms, raw_bonds)?;
        Ok((frag, order))
    }
}

/// Ring membership in an arbitrary bond list: atoms on some cycle.
fn subgraph_ring_atoms(n: usize, bonds: &[RawBond]) -> Vec<bool> {
    // A bond is a bridge iff removing it disconnects its endpoints; ring
    // atoms are endpoints of non-bridge bonds.
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (bi, b) in bonds.iter().enumerate() {
        adj[b.a].push((b.b, bi));
        adj[b.b].push((b.a, bi));
    }
    let mut in_ring = vec![false; n];
    for (skip, b) in bonds.iter().enumerate() {
        // BFS from one endpoint avoiding the bond itself.
        let mut seen = vec![false; n];
        let mut queue = vec![b.a];
        seen[b.a] = true;
        let mut reached = false;
        while let Some(v) = queue.pop() {
            if v == b.b {
                reached = true;
                break;
            }
            for &(w, bi) in &adj[v] {
                if bi != skip && !seen[w] {
                    seen[w] = true;
                    queue.push(w);
                }
            }
        }
        if reached {
            in_ring[b.a] = true;
            in_ring[b.b] = true;
        }
    }
    in_ring
}

/// Resolves aromatic bonds into alternating single/double orders.
///
/// An atom is "needy" when its provisional valence leaves a deficit against
/// the valence table; every needy atom must receive exactly one double bond
/// through the aromatic system. The search is an exact backtracking matching,
/// so fused and odd-membered systems are handled.
fn kekulize(
    atoms: &[RawAtom],
    bonds: &[RawBond],
    adj: &[Vec<Adj>],
) -> Result<Vec<u8>, BuildError> {
    let n = atoms.len();
    let mut sigma = vec![0u8; n];
    for rb in bonds {
        sigma[rb.a] = sigma[rb.a].saturating_add(rb.order.provisional());
        sigma[rb.b] = sigma[rb.b].saturating_add(rb.order.provisional());
    }

    let mut needy = vec![false; n];
    for (i, a) in atoms.iter().enumerate() {
        if !a.aromatic {
            continue;
        }
        let deficit = match a.hcount {
            Some(h) => fill_target(a.element, a.charge, sigma[i] + h)
                .map(|t| t.saturating_sub(sigma[i] + h))
                .unwrap_or(0),
            None => {
                let t0 = fill_target(a.element, a.charge, sigma[i]).unwrap_or(sigma[i]);
                let h_prov = t0.saturating_sub(sigma[i]).saturating_sub(1);
                t0.saturating_sub(sigma[i] + h_prov)
            }
        };
        needy[i] = deficit >= 1;
    }

    // Aromatic bonds joining two needy atoms are the matching candidates.
    let mut cand: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, ns) in cand.iter_mut().enumerate() {
        if !needy[i] {
            continue;
        }
        for e in &adj[i] {
            if bonds[e.bond].order == BondOrder::Aromatic && needy[e.nbr] {
                ns.push(e.nbr);
            }
        }
        ns.sort_unstable();
    }

    let mut partner = vec![usize::MAX; n];
    if !match_needy(&needy, &cand, &mut partner, 0) {
        let atom = (0..n)
            .find(|&i| needy[i] && partner[i] == usize::MAX)
            .unwrap_or(0);
        return Err(BuildError::Kekulization { atom });
    }

    let kekule = bonds
        .iter()
        .map(|rb| match rb.order {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => {
                if partner[rb.a] == rb.b {
                    2
                } else {
                    1
                }
            }
        })
        .collect();
    Ok(kekule)
}

fn match_needy(
    needy: &[bool],
    cand: &[Vec<usize>],
    partner: &mut Vec<usize>,
    from: usize,
) -> bool {
    let u = match (from..needy.len()).find(|&i| needy[i] && partner[i] == usize::MAX) {
        Some(u) => u,
        None => return true,
    };
    for &v in &cand[u] {
        if partner[v] != usize::MAX {
            continue;
        }
        partner[u] = v;
        partner[v] = u;
        if match_needy(needy, cand, partner, u + 1) {
            return true;
        }
        partner[u] = usize::MAX;
        partner[v] = usize::MAX;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(element: Element, aromatic: bool) -> RawAtom {
        RawAtom {
            element,
            charge: 0,
            aromatic,
            hcount: None,
            atom_map: None,
        }
    }

    #[test]
    fn methane_fill() {
        let m = Molecule::from_parts(vec![raw(Element::C, false)], vec![]).unwrap();
        assert_eq!(m.atom(0).hcount, 4);
        assert!(m.valence_check().is_empty());
        assert!(m.is_complete_atom(0));
    }

    #[test]
    fn benzene_kekulizes_alternating() {
        let atoms = vec![raw(Element::C, true); 6];
        let bonds = (0..6)
            .map(|i| RawBond {
                a: i,
                b: (i + 1) % 6,
                order: BondOrder::Aromatic,
            })
            .collect();
        let m = Molecule::from_parts(atoms, bonds).unwrap();
        for i in 0..6 {
            assert_eq!(m.atom(i).hcount, 1);
            assert_eq!(m.bond_order_sum(i), 3);
        }
        let doubles = m.bonds().iter().filter(|b| b.kekule == 2).count();
        assert_eq!(doubles, 3);
        assert!(m.valence_check().is_empty());
    }

    #[test]
    fn seven_ring_fails_kekulization() {
        let atoms = vec![raw(Element::C, true); 7];
        let bonds = (0..7)
            .map(|i| RawBond {
                a: i,
                b: (i + 1) % 7,
                order: BondOrder::Aromatic,
            })
            .collect();
        assert!(matches!(
            Molecule::from_parts(atoms, bonds),
            Err(BuildError::Kekulization { .. })
        ));
    }

    #[test]
    fn furan_oxygen_gets_no_double_bond() {
        // o1cccc1
        let mut atoms = vec![raw(Element::O, true)];
        atoms.extend(vec![raw(Element::C, true); 4]);
        let bonds = (0..5)
            .map(|i| RawBond {
                a: i,
                b: (i + 1) % 5,
                order: BondOrder::Aromatic,
            })
            .collect();
        let m = Molecule::from_parts(atoms, bonds).unwrap();
        assert_eq!(m.atom(0).hcount, 0);
        assert_eq!(m.bond_order_sum(0), 2);
        assert!(m.valence_check().is_empty());
    }

    #[test]
    fn overbonded_carbon_reported() {
        let mut atoms = vec![raw(Element::C, false)];
        atoms.extend(vec![raw(Element::F, false); 5]);
        let bonds = (1..6)
            .map(|i| RawBond {
                a: 0,
                b: i,
                order: BondOrder::Single,
            })
            .collect();
        let m = Molecule::from_parts(atoms, bonds).unwrap();
        let v = m.valence_check();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].atom, 0);
        assert_eq!(v[0].total, 5);
    }
}
