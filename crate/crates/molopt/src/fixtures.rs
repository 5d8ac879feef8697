//! Deterministic desk-scale fixtures: a curated base corpus plus a planted
//! single-edit pair generator used by the test suites and demo runs.

use std::collections::BTreeSet;

use crate::chem::molecule::Molecule;
use crate::chem::surgery::{attach_node, legal_attachment_pairs, IntermediateMol};
use crate::chem::tree::{junction_tree, NodeVocabulary};
use crate::chem::write::write_smiles;
use crate::pairs::ged::{disconnection_sites, tree_edit_distance, DEFAULT_NODE_CAP};
use crate::tensor::rng::Rng;

/// Hand-curated drug-like molecules within the supported element set and
/// SMILES subset. Sizes stay well under the 38-atom cap so planted edits
/// have room to grow.
pub const BASE_CORPUS: &[&str] = &[
    "CC", "CCC", "CCCC", "CCCCC", "CCCCCC", "CC(C)C", "CC(C)(C)C", "CCO", "CCCO", "CC(C)O",
    "CCOC", "CCOCC", "COC", "CCN", "CCCN", "CC(C)N", "CCNCC", "CN(C)C", "CCS", "CCSC", "CS",
    "CCCl", "CCBr", "CCF", "CCI", "CC(=O)C", "CC(=O)O", "CC(=O)OC", "CC(=O)N", "CC(=O)NC",
    "C=CC", "C=CCC", "C#N", "CC#N", "CCC#N", "C=O", "CC=O", "CCC=O", "OCCO", "OCCCO", "NCCN",
    "NCCO", "C1CCCCC1", "C1CCCC1", "C1CCC1", "C1CCCCCC1", "C1CCCCC1O", "C1CCCCC1N",
    "CC1CCCCC1", "OC1CCCCC1C", "c1ccccc1", "Cc1ccccc1", "CCc1ccccc1", "Oc1ccccc1",
    "Nc1ccccc1", "COc1ccccc1", "Clc1ccccc1", "Fc1ccccc1", "Brc1ccccc1", "Cc1ccccc1C",
    "Cc1ccc(C)cc1", "Cc1cccc(C)c1", "Oc1ccc(Cl)cc1", "Nc1ccc(C)cc1", "CC(=O)c1ccccc1",
    "CC(=O)Nc1ccccc1", "OC(=O)c1ccccc1", "COC(=O)c1ccccc1", "c1ccncc1", "Cc1ccncc1",
    "c1ccoc1", "c1ccsc1", "c1cc[nH]c1", "Cc1ccco1", "Cc1cccs1", "c1ccc2ccccc2c1",
    "Cc1ccc2ccccc2c1", "c1ccc(-c2ccccc2)cc1", "CCc1ccc(O)cc1", "CCc1ccc(N)cc1",
    "CCc1ccc(Cl)cc1", "OCc1ccccc1", "NCc1ccccc1", "ClCc1ccccc1", "CN1CCCC1", "C1CCNC1",
    "C1CCNCC1", "C1CCOC1", "C1CCOCC1", "CC1CCNCC1", "CN1CCNCC1", "O=C1CCCC1", "O=C1CCCCC1",
    "CC(N)C(=O)O", "NC(=O)CN", "CC(O)C(=O)O", "OC(=O)CCC(=O)O", "CCOC(=O)C", "CCOC(=O)CC",
    "CSc1ccccc1", "CCSc1ccccc1", "CC(C)Cc1ccccc1", "CC(C)c1ccccc1", "FC(F)(F)c1ccccc1",
    "CC(C)(C)c1ccccc1", "CCN(CC)CC", "OCC(O)CO", "CC(C)CO", "CC(C)CN", "CCCCO", "CCCCN",
    "CCCCCO", "CCCCCN", "CCCCCl", "CCCCBr", "CC(Cl)C", "ClCCCl", "FCCF", "C1CC2CCC1C2",
    "[NH3+]CC([O-])=O", "CC(=O)[O-]", "CC[NH3+]", "OS(=O)(=O)C", "CCS(=O)(=O)C",
    "NS(=O)(=O)c1ccccc1", "CP(=O)(O)O", "CCP(C)C", "B(O)O", "CB(O)O", "C[Si](C)(C)C",
    // Larger scaffolds keep planted-edit similarities realistic.
    "CC(=O)Nc1ccc(O)cc1C", "CCOC(=O)c1ccc(N)cc1", "CCN(CC)C(=O)c1ccccc1",
    "COc1ccc(CCN)cc1OC", "CC(C)Cc1ccc(C(C)C(=O)O)cc1", "Oc1ccc2ccccc2c1CC",
    "CCc1ccc(S(=O)(=O)N)cc1", "CC(O)c1ccc(-c2ccccc2)cc1", "CCCCCCc1ccc(O)cc1",
    "CN1CCN(c2ccc(Cl)cc2)CC1", "O=C(Nc1ccccc1)c1ccccc1", "COc1ccc(C(=O)NCCN)cc1",
    "CC(C)NCC(O)c1ccc(O)cc1", "CCOc1ccccc1C(=O)NC", "Clc1ccc(CN2CCOCC2)cc1",
    "CC1CCc2ccccc2C1N", "OCC1CCCN1Cc1ccccc1", "CSc1ccc2ccccc2c1",
];

/// Fragment library used to plant edits; every fragment must itself be a
/// decomposable molecule so its nodes land in the corpus vocabulary.
const PLANT_FRAGMENTS: &[&str] = &[
    "CC", "CO", "CN", "CF", "CCl", "CBr", "C=O", "CS", "c1ccccc1", "C#N",
];

pub fn parse_base_corpus() -> Vec<Molecule> {
    BASE_CORPUS
        .iter()
        .map(|s| canonical(&crate::chem::parse::parse_smiles(s).expect("fixture parses")))
        .collect()
}

fn canonical(m: &Molecule) -> Molecule {
    let s = write_smiles(m).expect("fixture molecules are complete");
    crate::chem::parse::parse_smiles(&s).expect("canonical SMILES re-parses")
}

/// A planted single-site edit: `my` was built from `mx` by attaching (and
/// sometimes chaining) fragments at one junction-tree node, and the edit
/// path provably recovers exactly that node.
#[derive(Debug, Clone)]
pub struct PlantedPair {
    pub mx: Molecule,
    pub my: Molecule,
    pub mx_smiles: String,
    pub my_smiles: String,
    /// Node index in mx's junction tree where the edit happened.
    pub site: usize,
}

/// Generates `count` planted pairs deterministically. Each candidate edit is
/// verified end to end: the tree edit distance between the two junction
/// trees must identify exactly the planted disconnection site.
pub fn planted_pairs(count: usize, seed: u64) -> Vec<PlantedPair> {
    let base = parse_base_corpus();
    let mut frag_mols: Vec<Molecule> = PLANT_FRAGMENTS
        .iter()
        .map(|s| crate::chem::parse::parse_smiles(s).expect("fragment parses"))
        .collect();
    let mut vocab_src = base.clone();
    vocab_src.append(&mut frag_mols.clone());
    let gen_vocab = NodeVocabulary::from_corpus(&vocab_src).expect("fixture vocabulary");
    frag_mols.clear();

    // Edits on larger scaffolds keep the pair similarity in a realistic
    // range; tiny molecules change too much with one fragment.
    let hosts: Vec<&Molecule> = base
        .iter()
        .filter(|m| m.heavy_atom_count() >= 8)
        .collect();
    let mut out: Vec<PlantedPair> = Vec::new();
    let mut attempt = 0u64;
    while out.len() < count && attempt < count as u64 * 200 {
        attempt += 1;
        let mut rng = Rng::derive(seed, &[attempt]);
        let mx = hosts[rng.below(hosts.len())];
        let tx = match junction_tree(mx, &gen_vocab) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let site = rng.below(tx.node_count());
        let frag = PLANT_FRAGMENTS[rng.below(PLANT_FRAGMENTS.len())];
        let ty_id = match gen_vocab.lookup(&frag_descriptor(frag, &gen_vocab)) {
            Some(id) => id,
            None => continue,
        };

        let im = IntermediateMol::new(mx.clone(), tx.clone(), site);
        let pairs = legal_attachment_pairs(&im, site, ty_id, &gen_vocab);
        if pairs.is_empty() {
            continue;
        }
        let (pp, cp) = pairs[rng.below(pairs.len())];
        let mut im = match attach_node(&im, site, ty_id, &gen_vocab, &pp, &cp) {
            Ok(next) => next,
            Err(_) => continue,
        };

        // Occasionally chain a second fragment onto the new node so edits
        // span more than one tree node.
        if rng.next_f64() < 0.35 {
            let new_node = im.tree.node_count() - 1;
            let frag2 = PLANT_FRAGMENTS[rng.below(PLANT_FRAGMENTS.len())];
            if let Some(id2) = gen_vocab.lookup(&frag_descriptor(frag2, &gen_vocab)) {
                let pairs2 = legal_attachment_pairs(&im, new_node, id2, &gen_vocab);
                if !pairs2.is_empty() {
                    let (pp2, cp2) = pairs2[rng.below(pairs2.len())];
                    if let Ok(next) = attach_node(&im, new_node, id2, &gen_vocab, &pp2, &cp2) {
                        im = next;
                    }
                }
            }
        }

        let my = match im.finalize() {
            Ok(m) => m,
            Err(_) => continue,
        };
        if my.heavy_atom_count() > 38 || !my.valence_check().is_empty() {
            continue;
        }
        let my = canonical(&my);
        let my_smiles = write_smiles(&my).expect("complete");
        let mx_smiles = write_smiles(mx).expect("complete");
        if my_smiles == mx_smiles {
            continue;
        }

        // Verify recovery: the edit path must name exactly the planted site.
        let ty = match junction_tree(&my, &gen_vocab) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let path = match tree_edit_distance(&tx, &ty, DEFAULT_NODE_CAP) {
            Ok(p) => p,
            Err(_) => continue,
        };
        if disconnection_sites(&path, &tx, &ty) != vec![site] {
            continue;
        }
        // The decoder's op repertoire must be able to reproduce the edit.
        let replayable = crate::pairs::extract::build_pair(
            mx, &my, &mx_smiles, &my_smiles, &tx, &ty, &path, site, 1.0, 0.0, &gen_vocab,
        )
        .is_some();
        if !replayable {
            continue;
        }
        if out.iter().any(|p| p.mx_smiles == mx_smiles && p.my_smiles == my_smiles) {
            continue;
        }
        out.push(PlantedPair {
            mx: mx.clone(),
            my,
            mx_smiles,
            my_smiles,
            site,
        });
    }
    out
}

fn frag_descriptor(frag: &str, vocab: &NodeVocabulary) -> String {
    // Fragments are single nodes; their descriptor is their canonical form.
    let m = crate::chem::parse::parse_smiles(frag).expect("fragment parses");
    let desc = crate::chem::tree::node_descriptors(&m).expect("fragment decomposes");
    debug_assert_eq!(desc.len(), 1, "fragment {frag} must be a single node");
    let _ = vocab;
    desc.into_iter().next().unwrap()
}

/// Fixture corpus: the curated base plus planted-edit products, unique by
/// canonical SMILES, truncated to `n`.
pub fn fixture_corpus(n: usize, seed: u64) -> Vec<Molecule> {
    let base = parse_base_corpus();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::new();
    for m in base {
        let s = write_smiles(&m).unwrap();
        if seen.insert(s) {
            out.push(m);
        }
        if out.len() == n {
            return out;
        }
    }
    for p in planted_pairs(2 * n, seed) {
        if seen.insert(p.my_smiles.clone()) {
            out.push(p.my);
        }
        if out.len() == n {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_corpus_all_parse_and_round_trip() {
        let mols = parse_base_corpus();
        assert!(mols.len() >= 100);
        for m in &mols {
            assert!(m.valence_check().is_empty());
        }
    }

    #[test]
    fn planted_pairs_are_single_site_by_construction() {
        let pairs = planted_pairs(20, 42);
        assert_eq!(pairs.len(), 20);
        for p in &pairs {
            assert_ne!(p.mx_smiles, p.my_smiles);
            assert!(p.my.valence_check().is_empty());
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = planted_pairs(10, 7);
        let b = planted_pairs(10, 7);
        let key =
            |ps: &[PlantedPair]| ps.iter().map(|p| p.my_smiles.clone()).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn fixture_corpus_reaches_requested_size() {
        let corpus = fixture_corpus(200, 3);
        assert_eq!(corpus.len(), 200);
        let mut seen = BTreeSet::new();
        for m in &corpus {
            assert!(seen.insert(write_smiles(m).unwrap()), "duplicate in corpus");
        }
    }
}
