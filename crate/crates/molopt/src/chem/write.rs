//! Deterministic SMILES output.
//!
//! Atom order is fixed by canonical ranks (iterative neighborhood refinement
//! with deterministic tie-breaking), so isomorphic inputs produce the same
//! string regardless of their atom numbering.

use thiserror::Error;

use super::element::fill_target;
use super::molecule::{BondOrder, Molecule};
use super::rings::ring_atoms;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WriteError {
    #[error("atom {0} has an open valence; finalize the molecule first")]
    OpenValence(usize),
}

/// Canonical SMILES of a complete molecule.
pub fn write_smiles(m: &Molecule) -> Result<String, WriteError> {
    for i in 0..m.atom_count() {
        if !m.is_complete_atom(i) && m.atom(i).atom_map.is_none() {
            return Err(WriteError::OpenValence(i));
        }
    }
    Ok(write_smiles_any(m))
}

/// Canonical SMILES that tolerates open valences (fragment descriptors with
/// attachment markers rely on this).
pub fn write_smiles_any(m: &Molecule) -> String {
    if m.atom_count() == 0 {
        return String::new();
    }
    let ranks = canonical_ranks(m);
    Writer::new(m, &ranks).run()
}

/// Equivalence classes from neighborhood refinement alone (no tie-breaking):
/// atoms in the same class are structurally interchangeable for candidate
/// deduplication.
pub fn symmetry_classes(m: &Molecule) -> Vec<usize> {
    refine(m, dense_ranks(&seed_invariants(m)))
}

fn seed_invariants(m: &Molecule) -> Vec<(usize, i16, bool, usize, u8, bool)> {
    let in_ring = ring_atoms(m);
    (0..m.atom_count())
        .map(|i| {
            let a = m.atom(i);
            (
                a.element.index(),
                a.charge as i16,
                a.aromatic,
                m.degree(i),
                a.hcount,
                in_ring[i],
            )
        })
        .collect()
}

/// Dense canonical ranks: refinement over (element, charge, aromatic, degree,
/// hydrogens, ring flag) seeds and neighbor rank multisets, with ties broken
/// by promoting one member of the smallest tied class and re-refining.
pub fn canonical_ranks(m: &Molecule) -> Vec<usize> {
    let n = m.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let mut ranks = dense_ranks(&seed_invariants(m));

    loop {
        ranks = refine(m, ranks);
        let classes = count_classes(&ranks);
        if classes == n {
            return ranks;
        }
        // Promote the lowest-index member of the smallest-rank tied class.
        let tied_rank = (0..n)
            .map(|i| ranks[i])
            .filter(|&r| ranks.iter().filter(|&&x| x == r).count() > 1)
            .min()
            .unwrap();
        let chosen = (0..n).find(|&i| ranks[i] == tied_rank).unwrap();
        for r in ranks.iter_mut() {
            *r = *r * 2 + 1;
        }
        ranks[chosen] -= 1;
        ranks = dense_ranks(&ranks.clone());
    }
}

fn refine(m: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..m.atom_count())
            .map(|i| {
                let mut nbrs: Vec<(usize, u8)> = m
                    .neighbors(i)
                    .iter()
                    .map(|e| (ranks[e.nbr], m.bond(e.bond).order.code()))
                    .collect();
                nbrs.sort_unstable();
                (ranks[i], nbrs)
            })
            .collect();
        let new_ranks = dense_ranks(&keys);
        if new_ranks == ranks {
            return ranks;
        }
        ranks = new_ranks;
    }
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<&K> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(&k).unwrap())
        .collect()
}

fn count_classes(ranks: &[usize]) -> usize {
    let mut r = ranks.to_vec();
    r.sort_unstable();
    r.dedup();
    r.len()
}

struct Writer<'a> {
    m: &'a Molecule,
    ranks: &'a [usize],
    visited: Vec<bool>,
    /// Per atom: ring closures (digit, bond index, emit bond symbol here).
    closures: Vec<Vec<(u32, usize, bool)>>,
    tree_children: Vec<Vec<usize>>,
    out: String,
}

impl<'a> Writer<'a> {
    fn new(m: &'a Molecule, ranks: &'a [usize]) -> Self {
        Writer {
            m,
            ranks,
            visited: vec![false; m.atom_count()],
            closures: vec![Vec::new(); m.atom_count()],
            tree_children: vec![Vec::new(); m.atom_count()],
            out: String::new(),
        }
    }

    fn run(mut self) -> String {
        let n = self.m.atom_count();
        let mut roots: Vec<usize> = Vec::new();
        {
            // One root per component: the lowest-ranked atom.
            let comps = self.m.components();
            let mut ordered: Vec<usize> = comps
                .iter()
                .map(|c| *c.iter().min_by_key(|&&i| self.ranks[i]).unwrap())
                .collect();
            ordered.sort_by_key(|&i| self.ranks[i]);
            roots.extend(ordered);
        }

        // Pass 1: spanning DFS fixing tree children and ring closures.
        let mut seen = vec![false; n];
        let mut next_digit: u32 = 1;
        let mut free_digits: Vec<u32> = Vec::new();
        let mut open: Vec<Option<u32>> = vec![None; self.m.bond_count()];
        for &root in &roots {
            self.classify(root, usize::MAX, &mut seen, &mut next_digit, &mut free_digits, &mut open);
        }

        // Pass 2: emit.
        for (i, &root) in roots.iter().enumerate() {
            if i > 0 {
                self.out.push('.');
            }
            self.emit(root, usize::MAX);
        }
        self.out
    }

    fn ordered_neighbors(&self, u: usize) -> Vec<(usize, usize)> {
        let mut nbrs: Vec<(usize, usize)> = self
            .m
            .neighbors(u)
            .iter()
            .map(|e| (e.nbr, e.bond))
            .collect();
        nbrs.sort_by_key(|&(v, _)| self.ranks[v]);
        nbrs
    }

    fn classify(
        &mut self,
        u: usize,
        parent_bond: usize,
        seen: &mut Vec<bool>,
        next_digit: &mut u32,
        free_digits: &mut Vec<u32>,
        open: &mut Vec<Option<u32>>,
    ) {
        seen[u] = true;
        for (v, bond) in self.ordered_neighbors(u) {
            if bond == parent_bond {
                continue;
            }
            if seen[v] {
                if open[bond].is_none() {
                    free_digits.sort_unstable_by(|a, b| b.cmp(a));
                    let digit = free_digits.pop().unwrap_or_else(|| {
                        let d = *next_digit;
                        *next_digit += 1;
                        d
                    });
                    open[bond] = Some(digit);
                    // The earlier endpoint carries the bond symbol.
                    self.closures[v].push((digit, bond, true));
                    self.closures[u].push((digit, bond, false));
                }
            } else {
                self.tree_children[u].push(v);
                self.classify(v, bond, seen, next_digit, free_digits, open);
                // Digits whose closure is fully emitted below could be
                // reused; for simplicity digits stay unique per molecule.
            }
        }
    }

    fn emit(&mut self, u: usize, parent_bond: usize) {
        self.push_atom(u);
        let closures = self.closures[u].clone();
        for (digit, bond, with_symbol) in closures {
            if with_symbol {
                self.push_bond_symbol(bond);
            }
            if digit < 10 {
                self.out.push_str(&digit.to_string());
            } else {
                self.out.push('%');
                self.out.push_str(&format!("{digit:02}"));
            }
        }
        let children = self.tree_children[u].clone();
        let last = children.len().saturating_sub(1);
        for (i, v) in children.into_iter().enumerate() {
            let bond = self.m.bond_between(u, v).unwrap();
            let _ = parent_bond;
            if i != last {
                self.out.push('(');
                self.push_bond_symbol(bond);
                self.emit(v, bond);
                self.out.push(')');
            } else {
                self.push_bond_symbol(bond);
                self.emit(v, bond);
            }
        }
    }

    fn push_bond_symbol(&mut self, bond: usize) {
        let b = self.m.bond(bond);
        let both_aromatic = self.m.atom(b.a).aromatic && self.m.atom(b.b).aromatic;
        let sym = match b.order {
            BondOrder::Single => {
                if both_aromatic {
                    Some('-')
                } else {
                    None
                }
            }
            BondOrder::Double => Some('='),
            BondOrder::Triple => Some('#'),
            BondOrder::Aromatic => {
                if both_aromatic {
                    None
                } else {
                    Some(':')
                }
            }
        };
        if let Some(c) = sym {
            self.out.push(c);
        }
    }

    fn push_atom(&mut self, u: usize) {
        self.visited[u] = true;
        let a = self.m.atom(u);
        let symbol = if a.aromatic {
            a.element.symbol().to_lowercase()
        } else {
            a.element.symbol().to_string()
        };
        let needs_bracket = a.charge != 0
            || a.atom_map.is_some()
            || !a.element.in_organic_subset()
            || a.hcount != self.bare_hcount(u);
        if !needs_bracket {
            self.out.push_str(&symbol);
            return;
        }
        self.out.push('[');
        self.out.push_str(&symbol);
        if a.hcount == 1 {
            self.out.push('H');
        } else if a.hcount > 1 {
            self.out.push('H');
            self.out.push_str(&a.hcount.to_string());
        }
        match a.charge {
            0 => {}
            1 => self.out.push('+'),
            -1 => self.out.push('-'),
            q if q > 0 => self.out.push_str(&format!("+{q}")),
            q => self.out.push_str(&format!("-{}", -q)),
        }
        if let Some(map) = a.atom_map {
            self.out.push_str(&format!(":{map}"));
        }
        self.out.push(']');
    }

    /// Hydrogen count a bare (non-bracket) atom would receive on re-parse;
    /// anything else forces brackets.
    fn bare_hcount(&self, u: usize) -> u8 {
        let a = self.m.atom(u);
        if a.charge != 0 {
            return u8::MAX;
        }
        let sigma_kek = self.m.bond_order_sum(u);
        if a.aromatic {
            // Model the parse pipeline: a bare aromatic atom is matched into
            // the Kekulé structure exactly when its provisional fill leaves a
            // deficit of one.
            let sigma_prov: u8 = self
                .m
                .neighbors(u)
                .iter()
                .map(|e| self.m.bond(e.bond).order.provisional())
                .sum();
            let t0 = match fill_target(a.element, 0, sigma_prov) {
                Some(t) => t,
                None => return u8::MAX,
            };
            let h_prov = t0.saturating_sub(sigma_prov).saturating_sub(1);
            let eligible = t0 - sigma_prov - h_prov >= 1;
            let sigma_bare = sigma_prov + u8::from(eligible);
            if sigma_bare != sigma_kek {
                return u8::MAX;
            }
        }
        fill_target(a.element, 0, sigma_kek)
            .map(|t| t - sigma_kek)
            .unwrap_or(u8::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::iso::are_isomorphic;
    use crate::chem::parse::parse_smiles;

    #[test]
    fn single_carbon() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(write_smiles(&m).unwrap(), "C");
    }

    #[test]
    fn benzene_stable_under_permutation() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let base = write_smiles(&m).unwrap();
        for shift in 1..6 {
            let perm: Vec<usize> = (0..6).map(|i| (i + shift) % 6).collect();
            let p = m.permute(&perm);
            assert_eq!(write_smiles(&p).unwrap(), base);
        }
    }

    #[test]
    fn round_trip_various() {
        for s in [
            "CCO",
            "c1ccccc1",
            "CC(=O)O",
            "c1ccc2ccccc2c1",
            "C1CCCCC1",
            "N[C@@H](C)C(=O)O",
            "Clc1ccccc1",
            "O=C(N)c1ccncc1",
            "CC(C)(C)S",
            "[NH3+]CC([O-])=O",
            "c1cc[nH]c1",
            "FC(F)(F)c1ccccc1",
            "C#N",
            "COc1ccc(Br)cc1",
        ] {
            let m = parse_smiles(s).unwrap();
            let written = write_smiles(&m).unwrap();
            let back = parse_smiles(&written)
                .unwrap_or_else(|e| panic!("rewrite of {s} -> {written} failed: {e}"));
            assert!(
                are_isomorphic(&m, &back),
                "round trip failed for {s} -> {written}"
            );
            // Determinism: writing again gives the same text.
            assert_eq!(write_smiles(&back).unwrap(), written);
        }
    }

    #[test]
    fn pyrrole_keeps_bracket_h() {
        let m = parse_smiles("c1cc[nH]c1").unwrap();
        let written = write_smiles(&m).unwrap();
        assert!(written.contains("[nH]"), "got {written}");
    }

    #[test]
    fn biphenyl_single_link_is_explicit() {
        let m = parse_smiles("c1ccc(-c2ccccc2)cc1").unwrap();
        let written = write_smiles(&m).unwrap();
        let back = parse_smiles(&written).unwrap();
        assert!(are_isomorphic(&m, &back), "got {written}");
    }

    #[test]
    fn open_valence_rejected() {
        let m = parse_smiles("[CH2]").unwrap();
        assert!(matches!(write_smiles(&m), Err(WriteError::OpenValence(0))));
    }

    #[test]
    fn mapped_fragment_written_with_map() {
        let m = parse_smiles("O[C:1]").unwrap();
        let s = write_smiles_any(&m);
        assert!(s.contains(":1]"), "got {s}");
    }
}
