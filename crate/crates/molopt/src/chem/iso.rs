//! Graph isomorphism over labeled molecular graphs (VF2-style backtracking).
//!
//! Used as the independent oracle behind the round-trip and replay checks:
//! it looks only at the graph structure and labels, never at SMILES text.

use super::molecule::Molecule;

#[derive(Debug, Clone, Copy)]
pub struct IsoOpts {
    pub match_hcount: bool,
    pub match_aromatic: bool,
}

impl Default for IsoOpts {
    fn default() -> Self {
        IsoOpts {
            match_hcount: true,
            match_aromatic: true,
        }
    }
}

/// Element/charge/bond-order preserving isomorphism with the default options
/// also requiring hydrogen counts and aromatic flags to agree.
pub fn are_isomorphic(a: &Molecule, b: &Molecule) -> bool {
    are_isomorphic_with(a, b, IsoOpts::default())
}

/// Looser variant for intermediate structures: hydrogen counts are ignored
/// (open valences differ before attachments complete).
pub fn are_isomorphic_skeleton(a: &Molecule, b: &Molecule) -> bool {
    are_isomorphic_with(
        a,
        b,
        IsoOpts {
            match_hcount: false,
            match_aromatic: true,
        },
    )
}

pub fn are_isomorphic_with(a: &Molecule, b: &Molecule, opts: IsoOpts) -> bool {
    if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
        return false;
    }
    let mut la: Vec<u64> = (0..a.atom_count()).map(|i| label(a, i, opts)).collect();
    let mut lb: Vec<u64> = (0..b.atom_count()).map(|i| label(b, i, opts)).collect();
    la.sort_unstable();
    lb.sort_unstable();
    if la != lb {
        return false;
    }

    let n = a.atom_count();
    let mut mapping = vec![usize::MAX; n];
    let mut used = vec![false; n];
    // Order A's atoms to keep the frontier connected where possible.
    let order = search_order(a);
    extend(a, b, &order, 0, &mut mapping, &mut used, opts)
}

fn label(m: &Molecule, i: usize, opts: IsoOpts) -> u64 {
    let at = m.atom(i);
    let mut v = at.element.index() as u64;
    v = v * 8 + (at.charge + 3) as u64;
    v = v * 64 + m.degree(i) as u64;
    if opts.match_aromatic {
        v = v * 2 + at.aromatic as u64;
    }
    if opts.match_hcount {
        v = v * 16 + at.hcount as u64;
    }
    v
}

fn search_order(m: &Molecule) -> Vec<usize> {
    let n = m.atom_count();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            order.push(v);
            let mut nbrs: Vec<usize> = m.neighbors(v).iter().map(|e| e.nbr).collect();
            nbrs.sort_unstable_by_key(|&w| std::cmp::Reverse(w));
            for w in nbrs {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    order
}

fn extend(
    a: &Molecule,
    b: &Molecule,
    order: &[usize],
    depth: usize,
    mapping: &mut Vec<usize>,
    used: &mut Vec<bool>,
    opts: IsoOpts,
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    'candidates: for v in 0..b.atom_count() {
        if used[v] || label(a, u, opts) != label(b, v, opts) {
            continue;
        }
        // Every already-mapped neighbor of u must connect to v with the same
        // bond order, and u must not gain adjacency that v lacks.
        for e in a.neighbors(u) {
            let mu = mapping[e.nbr];
            if mu == usize::MAX {
                continue;
            }
            match b.bond_between(v, mu) {
                Some(bv) => {
                    let ba = a.bond(e.bond);
                    let bb = b.bond(bv);
                    if ba.order != bb.order {
                        continue 'candidates;
                    }
                }
                None => continue 'candidates,
            }
        }
        let mapped_deg_a = a
            .neighbors(u)
            .iter()
            .filter(|e| mapping[e.nbr] != usize::MAX)
            .count();
        let mapped_deg_b = b
            .neighbors(v)
            .iter()
            .filter(|e| mapping.iter().any(|&x| x == e.nbr))
            .count();
        if mapped_deg_a != mapped_deg_b {
            continue;
        }

        mapping[u] = v;
        used[v] = true;
        if extend(a, b, order, depth + 1, mapping, used, opts) {
            return true;
        }
        mapping[u] = usize::MAX;
        used[v] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;

    #[test]
    fn isomorphic_under_reordering() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("OCC").unwrap();
        assert!(are_isomorphic(&a, &b));
    }

    #[test]
    fn constitution_isomers_differ() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("COC").unwrap();
        assert!(!are_isomorphic(&a, &b));
    }

    #[test]
    fn bond_orders_matter() {
        let a = parse_smiles("C=CC").unwrap();
        let b = parse_smiles("CC=C").unwrap();
        let c = parse_smiles("CCC").unwrap();
        assert!(are_isomorphic(&a, &b));
        assert!(!are_isomorphic(&a, &c));
    }

    #[test]
    fn charge_matters() {
        let a = parse_smiles("[NH3+]C").unwrap();
        let b = parse_smiles("NC").unwrap();
        assert!(!are_isomorphic(&a, &b));
    }

    #[test]
    fn permuted_ring_is_isomorphic() {
        let m = parse_smiles("c1ccc(O)cc1").unwrap();
        let perm: Vec<usize> = (0..m.atom_count()).rev().collect();
        let p = m.permute(&perm);
        assert!(are_isomorphic(&m, &p));
    }
}
