//! Corpus analyzers: removal/attachment fragment frequencies and sizes.

use std::collections::{BTreeMap, BTreeSet};

use crate::chem::write::write_smiles_any;

use super::TrainingPair;

#[derive(Debug, Clone, Default)]
pub struct FragmentStats {
    /// (canonical fragment SMILES, count), most frequent first.
    pub removal: Vec<(String, usize)>,
    pub attachment: Vec<(String, usize)>,
    pub removal_mean_atoms: f64,
    pub attachment_mean_atoms: f64,
    pub pairs: usize,
}

/// Frequency tables over the fragments removed from mx and attached to build
/// my. Attachment points (atoms shared with the retained scaffold) carry
/// atom maps in the fragment SMILES.
pub fn fragment_stats(pairs: &[TrainingPair]) -> FragmentStats {
    let mut removal: BTreeMap<String, usize> = BTreeMap::new();
    let mut attachment: BTreeMap<String, usize> = BTreeMap::new();
    let mut removal_atoms = 0usize;
    let mut removal_count = 0usize;
    let mut attach_atoms = 0usize;
    let mut attach_count = 0usize;

    for p in pairs {
        if !p.removal.is_empty() {
            let mut atoms: BTreeSet<usize> = BTreeSet::new();
            for &n in &p.removal {
                atoms.extend(p.tx.nodes[n].atoms.iter().copied());
            }
            let mut kept_atoms: BTreeSet<usize> = BTreeSet::new();
            for (ni, node) in p.tx.nodes.iter().enumerate() {
                if !p.removal.contains(&ni) {
                    kept_atoms.extend(node.atoms.iter().copied());
                }
            }
            let markers: BTreeSet<usize> = atoms.intersection(&kept_atoms).copied().collect();
            if let Ok((frag, _)) = p.mx.extract_fragment(&atoms, &markers) {
                removal_atoms += frag.heavy_atom_count();
                removal_count += 1;
                *removal.entry(write_smiles_any(&frag)).or_insert(0) += 1;
            }
        }
        if !p.added.is_empty() {
            let mut atoms: BTreeSet<usize> = BTreeSet::new();
            for &n in &p.added {
                atoms.extend(p.ty.nodes[n].atoms.iter().copied());
            }
            let mut kept_atoms: BTreeSet<usize> = BTreeSet::new();
            for (ni, node) in p.ty.nodes.iter().enumerate() {
                if !p.added.contains(&ni) {
                    kept_atoms.extend(node.atoms.iter().copied());
                }
            }
            let markers: BTreeSet<usize> = atoms.intersection(&kept_atoms).copied().collect();
            if let Ok((frag, _)) = p.my.extract_fragment(&atoms, &markers) {
                attach_atoms += frag.heavy_atom_count();
                attach_count += 1;
                *attachment.entry(write_smiles_any(&frag)).or_insert(0) += 1;
            }
        }
    }

    let sort = |m: BTreeMap<String, usize>| {
        let mut v: Vec<(String, usize)> = m.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    };

    FragmentStats {
        removal: sort(removal),
        attachment: sort(attachment),
        removal_mean_atoms: if removal_count > 0 {
            removal_atoms as f64 / removal_count as f64
        } else {
            0.0
        },
        attachment_mean_atoms: if attach_count > 0 {
            attach_atoms as f64 / attach_count as f64
        } else {
            0.0
        },
        pairs: pairs.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;
    use crate::chem::tree::NodeVocabulary;
    use crate::pairs::extract::{extract_pairs, ExtractConfig};
    use crate::props::LogpScorer;

    #[test]
    fn empty_input_empty_tables() {
        let s = fragment_stats(&[]);
        assert!(s.removal.is_empty());
        assert!(s.attachment.is_empty());
        assert_eq!(s.pairs, 0);
    }

    #[test]
    fn planted_fragment_counts() {
        // Hydroxyl <-> chloride swaps at the pentyl chain end: the removal
        // fragment of the O->Cl direction is the marked hydroxyl unit.
        let mols: Vec<_> = ["CCCCCO", "CCCCCCl"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
        let cfg = ExtractConfig {
            sim_min: 0.3,
            delta_min: -100.0,
            node_cap: 40,
        };
        let (pairs, _) = extract_pairs(&mols, &vocab, &LogpScorer, &cfg).unwrap();
        assert_eq!(pairs.len(), 2, "both directions pass with no margin");
        let s = fragment_stats(&pairs);
        assert_eq!(s.pairs, 2);
        // One removal and one attachment fragment per direction, two heavy
        // atoms each (the marked carbon plus O or Cl).
        assert_eq!(s.removal.iter().map(|(_, c)| c).sum::<usize>(), 2);
        assert_eq!(s.attachment.iter().map(|(_, c)| c).sum::<usize>(), 2);
        assert_eq!(s.removal_mean_atoms, 2.0);
        assert_eq!(s.attachment_mean_atoms, 2.0);
        for (frag, _) in s.removal.iter().chain(&s.attachment) {
            assert!(frag.contains(":1]"), "marker missing in {frag}");
        }
    }
}
