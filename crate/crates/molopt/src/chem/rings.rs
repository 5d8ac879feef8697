//! Ring perception: smallest set of smallest rings.

use std::collections::BTreeSet;

use super::molecule::Molecule;

/// One ring: atoms in cyclic walk order plus the bond indices on the cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atom_set(&self) -> BTreeSet<usize> {
        self.atoms.iter().copied().collect()
    }
}

/// Smallest set of smallest rings via a Horton-style minimum cycle basis:
/// enumerate shortest candidate cycles through every (vertex, edge) pair,
/// then greedily keep the shortest linearly independent ones until the
/// cyclomatic number is reached.
pub fn sssr(m: &Molecule) -> Vec<Ring> {
    let n = m.atom_count();
    let nb = m.bond_count();
    let needed = nb + m.component_count() - n;
    if needed == 0 {
        return Vec::new();
    }

    let mut candidates: BTreeSet<Vec<usize>> = BTreeSet::new();
    for root in 0..n {
        let (dist, parent) = bfs(m, root);
        for (bi, bond) in m.bonds().iter().enumerate() {
            let (x, y) = (bond.a, bond.b);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            let px = path_to_root(&parent, x);
            let py = path_to_root(&parent, y);
            // Paths must share only the root, and the edge must not be on
            // either path.
            let sx: BTreeSet<usize> = px.iter().copied().collect();
            let sy: BTreeSet<usize> = py.iter().copied().collect();
            if sx.intersection(&sy).count() != 1 {
                continue;
            }
            if px.windows(2).any(|w| is_bond(m, bi, w[0], w[1]))
                || py.windows(2).any(|w| is_bond(m, bi, w[0], w[1]))
            {
                continue;
            }
            let mut cycle_bonds = vec![bi];
            for w in px.windows(2) {
                cycle_bonds.push(m.bond_between(w[0], w[1]).unwrap());
            }
            for w in py.windows(2) {
                cycle_bonds.push(m.bond_between(w[0], w[1]).unwrap());
            }
            cycle_bonds.sort_unstable();
            cycle_bonds.dedup();
            candidates.insert(cycle_bonds);
        }
    }

    let mut ordered: Vec<Vec<usize>> = candidates.into_iter().collect();
    ordered.sort_by_key(|c| (c.len(), c.clone()));

    // Greedy independence over GF(2) edge-incidence vectors, kept in
    // row-echelon form by pivot bit.
    let words = nb.div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut picked: Vec<Vec<usize>> = Vec::new();
    for cyc in ordered {
        if picked.len() == needed {
            break;
        }
        let mut reduced = vec![0u64; words];
        for &b in &cyc {
            reduced[b / 64] ^= 1u64 << (b % 64);
        }
        loop {
            let pivot = match leading_bit(&reduced) {
                Some(p) => p,
                None => break,
            };
            match basis.iter().find(|(bp, _)| *bp == pivot) {
                Some((_, row)) => {
                    for (r, w) in reduced.iter_mut().zip(row) {
                        *r ^= w;
                    }
                }
                None => break,
            }
        }
        if let Some(pivot) = leading_bit(&reduced) {
            basis.push((pivot, reduced));
            picked.push(cyc);
        }
    }

    picked
        .into_iter()
        .map(|bonds| {
            let atoms = walk_cycle(m, &bonds);
            Ring { atoms, bonds }
        })
        .collect()
}

/// Atoms that lie on at least one ring (endpoints of non-bridge bonds).
pub fn ring_atoms(m: &Molecule) -> Vec<bool> {
    let mut flags = vec![false; m.atom_count()];
    for ring in sssr(m) {
        for a in ring.atoms {
            flags[a] = true;
        }
    }
    flags
}

/// Bonds that belong to at least one SSSR ring.
pub fn ring_bonds(m: &Molecule) -> Vec<bool> {
    let mut flags = vec![false; m.bond_count()];
    for ring in sssr(m) {
        for b in ring.bonds {
            flags[b] = true;
        }
    }
    flags
}

fn leading_bit(v: &[u64]) -> Option<usize> {
    for (i, w) in v.iter().enumerate().rev() {
        if *w != 0 {
            return Some(i * 64 + 63 - w.leading_zeros() as usize);
        }
    }
    None
}

fn bfs(m: &Molecule, root: usize) -> (Vec<usize>, Vec<usize>) {
    let n = m.atom_count();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        let mut nbrs: Vec<usize> = m.neighbors(v).iter().map(|e| e.nbr).collect();
        nbrs.sort_unstable();
        for w in nbrs {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    (dist, parent)
}

fn path_to_root(parent: &[usize], mut v: usize) -> Vec<usize> {
    let mut path = vec![v];
    while parent[v] != usize::MAX {
        v = parent[v];
        path.push(v);
    }
    path
}

fn is_bond(m: &Molecule, bi: usize, a: usize, b: usize) -> bool {
    m.bond_between(a, b) == Some(bi)
}

fn walk_cycle(m: &Molecule, bonds: &[usize]) -> Vec<usize> {
    let start = m.bond(bonds[0]).a;
    let mut order = vec![start];
    let mut used = vec![false; bonds.len()];
    let mut here = start;
    loop {
        let mut advanced = false;
        for (i, &bi) in bonds.iter().enumerate() {
            if used[i] {
                continue;
            }
            let b = m.bond(bi);
            if b.a == here || b.b == here {
                used[i] = true;
                here = b.other(here);
                if here != start {
                    order.push(here);
                }
                advanced = true;
                break;
            }
        }
        if !advanced || here == start {
            break;
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;

    /// Exhaustive simple-cycle enumeration, used as an oracle on tiny inputs.
    fn all_cycle_sizes(m: &Molecule) -> Vec<usize> {
        let n = m.atom_count();
        let mut sizes = BTreeSet::new();
        // Enumerate simple cycles by DFS from every start, keeping the start
        // as the smallest atom on the cycle to avoid duplicates.
        fn dfs(
            m: &Molecule,
            start: usize,
            here: usize,
            visited: &mut Vec<usize>,
            sizes: &mut BTreeSet<Vec<usize>>,
        ) {
            for e in m.neighbors(here) {
                if e.nbr == start && visited.len() >= 3 {
                    let mut key = visited.clone();
                    key.sort_unstable();
                    sizes.insert(key);
                } else if e.nbr > start && !visited.contains(&e.nbr) {
                    visited.push(e.nbr);
                    dfs(m, start, e.nbr, visited, sizes);
                    visited.pop();
                }
            }
        }
        let mut all = BTreeSet::new();
        for s in 0..n {
            let mut v = vec![s];
            dfs(m, s, s, &mut v, &mut all);
        }
        for c in all {
            sizes.insert(c.len());
        }
        sizes.into_iter().collect()
    }

    #[test]
    fn propane_has_no_rings() {
        let m = parse_smiles("CCC").unwrap();
        assert!(sssr(&m).is_empty());
    }

    #[test]
    fn benzene_one_six_ring() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let rings = sssr(&m);
        assert_eq!(rings.len(), 1);
        assert_eq!(rings[0].len(), 6);
    }

    #[test]
    fn naphthalene_two_six_rings() {
        let m = parse_smiles("c1ccc2ccccc2c1").unwrap();
        let rings = sssr(&m);
        assert_eq!(rings.len(), 2);
        let mut sizes: Vec<usize> = rings.iter().map(|r| r.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![6, 6]);
        // Oracle: the smallest simple cycles in naphthalene are two 6-rings.
        let cycles = all_cycle_sizes(&m);
        assert!(cycles.contains(&6));
    }

    #[test]
    fn ring_count_matches_cyclomatic_number() {
        for s in [
            "C1CC1",
            "C1CCC1",
            "c1ccccc1",
            "C1CC2CCC1CC2",
            "c1ccc2ccccc2c1",
            "C1CC12CC2",
            "OC1CCC(N)C1",
        ] {
            let m = parse_smiles(s).unwrap();
            let expect = m.bond_count() + m.component_count() - m.atom_count();
            assert_eq!(sssr(&m).len(), expect, "for {s}");
        }
    }

    #[test]
    fn spiro_rings_found_with_smallest_sizes() {
        let m = parse_smiles("C1CC12CC2").unwrap();
        let mut sizes: Vec<usize> = sssr(&m).iter().map(|r| r.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3]);
    }
}
