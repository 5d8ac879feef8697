//! Synthetic accessibility: fragment-frequency score minus structural
//! complexity penalties, mapped onto a 1 (easy) to 10 (hard) scale.

use std::collections::HashMap;

use crate::chem::molecule::Molecule;
use crate::chem::rings::sssr;

use super::morgan_environments;

/// Score looked up for environments absent from the table.
pub const UNSEEN_FRAGMENT_SCORE: f64 = -4.0;

/// Per-environment contribution table, loaded from a `hash<TAB>score` file.
#[derive(Debug, Clone, Default)]
pub struct SaTable {
    scores: HashMap<u64, f64>,
}

impl SaTable {
    pub fn new(scores: HashMap<u64, f64>) -> SaTable {
        SaTable { scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, env: u64) -> f64 {
        self.scores
            .get(&env)
            .copied()
            .unwrap_or(UNSEEN_FRAGMENT_SCORE)
    }

    /// Parses `hash<TAB>score` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<SaTable, String> {
        let mut scores = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let h = parts
                .next()
                .and_then(|s| s.parse::<u64>().ok())
                .ok_or_else(|| format!("line {}: bad hash", lineno + 1))?;
            let s = parts
                .next()
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| format!("line {}: bad score", lineno + 1))?;
            scores.insert(h, s);
        }
        Ok(SaTable { scores })
    }

    pub fn to_lines(&self) -> Vec<String> {
        let mut rows: Vec<(u64, f64)> = self.scores.iter().map(|(&k, &v)| (k, v)).collect();
        rows.sort_by_key(|&(k, _)| k);
        rows.iter().map(|(k, v)| format!("{k}\t{v:?}")).collect()
    }

    /// Builds contributions from corpus environment frequencies:
    /// log10(count / mean count), so common environments score positive and
    /// rare ones negative.
    pub fn from_corpus(mols: &[Molecule]) -> SaTable {
        let mut counts: HashMap<u64, u64> = HashMap::new();
        for m in mols {
            for env in morgan_environments(m, 2) {
                *counts.entry(env).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            return SaTable::default();
        }
        let mean = counts.values().sum::<u64>() as f64 / counts.len() as f64;
        let scores = counts
            .into_iter()
            .map(|(k, c)| (k, (c as f64 / mean).log10()))
            .collect();
        SaTable { scores }
    }
}

/// Synthetic accessibility on the 1..10 scale (1 = easy to make).
///
/// With a score table: mean fragment contribution minus size, spiro,
/// bridgehead and macrocycle penalties plus a symmetry bonus, mapped onto
/// [1, 10]. Without a table the penalties alone drive the score.
pub fn sa_score(m: &Molecule, table: Option<&SaTable>) -> f64 {
    let n_atoms = m.heavy_atom_count();
    if n_atoms == 0 {
        return 1.0;
    }

    let rings = sssr(m);
    let nf = n_atoms as f64;
    let size_penalty = nf.powf(1.005) - nf;
    let spiro_penalty = ((count_spiro(m, &rings) + 1) as f64).log10();
    let bridge_penalty = ((count_bridgeheads(m, &rings) + 1) as f64).log10();
    let macrocycle_penalty = if rings.iter().any(|r| r.len() > 8) {
        2.0f64.log10()
    } else {
        0.0
    };
    let penalties = size_penalty + spiro_penalty + bridge_penalty + macrocycle_penalty;

    let table = match table {
        Some(t) if !t.is_empty() => t,
        // Complexity-only fallback.
        _ => return (1.0 + penalties / 6.5 * 9.0).clamp(1.0, 10.0),
    };

    let envs = morgan_environments(m, 2);
    let mut distinct: HashMap<u64, u64> = HashMap::new();
    for &e in &envs {
        *distinct.entry(e).or_insert(0) += 1;
    }
    let fragment_score = envs.iter().map(|&e| table.get(e)).sum::<f64>() / envs.len() as f64;

    // Symmetry bonus: repeated environments make a molecule simpler.
    let symmetry = if n_atoms > distinct.len() {
        (nf / distinct.len() as f64).ln() * 0.5
    } else {
        0.0
    };

    let raw = fragment_score - penalties + symmetry;

    // Map from the empirical raw range onto [1, 10], higher = harder.
    let (lo, hi) = (-4.0, 2.5);
    let mut score = 11.0 - (raw - lo + 1.0) / (hi - lo) * 9.0;
    if score > 8.0 {
        score = 8.0 + (score + 1.0 - 9.0).ln();
    }
    score.clamp(1.0, 10.0)
}

fn count_spiro(m: &Molecule, rings: &[crate::chem::rings::Ring]) -> usize {
    let mut spiro = std::collections::BTreeSet::new();
    for i in 0..rings.len() {
        for j in (i + 1)..rings.len() {
            let shared: Vec<usize> = rings[i]
                .atom_set()
                .intersection(&rings[j].atom_set())
                .copied()
                .collect();
            if shared.len() == 1 {
                spiro.insert(shared[0]);
            }
        }
    }
    let _ = m;
    spiro.len()
}

fn count_bridgeheads(m: &Molecule, rings: &[crate::chem::rings::Ring]) -> usize {
    let mut heads = std::collections::BTreeSet::new();
    let ring_bond = crate::chem::rings::ring_bonds(m);
    for i in 0..rings.len() {
        for j in (i + 1)..rings.len() {
            let shared: Vec<usize> = rings[i]
                .atom_set()
                .intersection(&rings[j].atom_set())
                .copied()
                .collect();
            if shared.len() >= 3 {
                for &a in &shared {
                    let ring_deg = m
                        .neighbors(a)
                        .iter()
                        .filter(|e| ring_bond[e.bond])
                        .count();
                    if ring_deg >= 3 {
                        heads.insert(a);
                    }
                }
            }
        }
    }
    heads.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;

    #[test]
    fn methane_is_minimal_complexity() {
        // Hand evaluation with no table: every penalty term is zero for a
        // single atom, so the complexity-only score bottoms out at 1.
        let m = parse_smiles("C").unwrap();
        let got = sa_score(&m, None);
        assert!((got - 1.0).abs() < 1e-12, "got {got}");
        assert!(got <= 2.0);
    }

    #[test]
    fn macrocycle_scores_worse_than_cyclohexane() {
        let small = sa_score(&parse_smiles("C1CCCCC1").unwrap(), None);
        let big = sa_score(&parse_smiles("C1CCCCCCCCCCC1").unwrap(), None);
        assert!(big > small, "macrocycle {big} vs cyclohexane {small}");
    }

    #[test]
    fn norbornane_has_bridgeheads_spiro_counted() {
        let nor = parse_smiles("C1CC2CCC1C2").unwrap();
        let rings = sssr(&nor);
        assert_eq!(count_bridgeheads(&nor, &rings), 2);
        let spiro = parse_smiles("C1CCC2(C1)CCCC2").unwrap();
        let rings = sssr(&spiro);
        assert_eq!(count_spiro(&spiro, &rings), 1);
    }

    #[test]
    fn table_round_trip_and_default() {
        let mols: Vec<_> = ["CCO", "CCN", "c1ccccc1"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let t = SaTable::from_corpus(&mols);
        assert!(!t.is_empty());
        let text = t.to_lines().join("\n");
        let back = SaTable::parse(&text).unwrap();
        assert_eq!(back.len(), t.len());
        assert_eq!(back.get(0xdeadbeef), UNSEEN_FRAGMENT_SCORE);
    }

    #[test]
    fn score_stays_on_scale() {
        for s in ["C", "CCO", "c1ccccc1", "C1CC2CCC1C2", "C1CCCCCCCCCCC1"] {
            let m = parse_smiles(s).unwrap();
            for t in [None, Some(&SaTable::default())] {
                let v = sa_score(&m, t);
                assert!((1.0..=10.0).contains(&v), "{s}: {v}");
            }
        }
    }
}
