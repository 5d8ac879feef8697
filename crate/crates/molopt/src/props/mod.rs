//! Property computation: Morgan fingerprints, Tanimoto similarity, Crippen
//! logP, synthetic accessibility, cycle score, and penalized logP.

pub mod crippen;
pub mod sa;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::chem::molecule::Molecule;
use crate::chem::rings::{ring_atoms, sssr};

pub use crippen::crippen_logp;
pub use sa::{sa_score, SaTable};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PropError {
    #[error("fingerprint width {0} is not a power of two")]
    BadWidth(usize),
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("atom {0} matches no contribution type")]
    UntypedAtom(usize),
    #[error("{0}")]
    BadConfig(String),
}

/// Fixed-width binary Morgan fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    words: Vec<u64>,
    pub nbits: usize,
    pub radius: usize,
}

impl Fingerprint {
    pub fn popcount(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn set_bits(&self) -> Vec<usize> {
        (0..self.nbits).filter(|&b| self.get(b)).collect()
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Environment identifiers for every (atom, layer 0..=radius): layer-0
/// invariants hash (element, charge, degree, hydrogen count, ring flag);
/// each layer rehashes the atom invariant together with the sorted
/// (neighbor invariant, bond order) multiset. An atom's layer stops
/// contributing once its environment (the covered bond set) stops growing.
pub(crate) fn morgan_environments(m: &Molecule, radius: usize) -> Vec<u64> {
    let n = m.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let in_ring = ring_atoms(m);
    let mut inv: Vec<u64> = (0..n)
        .map(|i| {
            let a = m.atom(i);
            fnv1a(&[
                a.element.index() as u8,
                (a.charge + 3) as u8,
                m.degree(i) as u8,
                a.hcount,
                in_ring[i] as u8,
            ])
        })
        .collect();

    let mut out: Vec<u64> = inv.clone();
    // Environment bond sets per atom, grown layer by layer.
    let mut env: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];

    for _layer in 1..=radius {
        let mut next_inv = Vec::with_capacity(n);
        let mut next_env = Vec::with_capacity(n);
        for i in 0..n {
            let mut nbrs: Vec<(u64, u8)> = m
                .neighbors(i)
                .iter()
                .map(|e| (inv[e.nbr], m.bond(e.bond).order.code()))
                .collect();
            nbrs.sort_unstable();
            let mut bytes = inv[i].to_le_bytes().to_vec();
            for (ni, bo) in &nbrs {
                bytes.extend_from_slice(&ni.to_le_bytes());
                bytes.push(*bo);
            }
            next_inv.push(fnv1a(&bytes));

            let mut e: BTreeSet<usize> = env[i].clone();
            for adj in m.neighbors(i) {
                e.insert(adj.bond);
                e.extend(env[adj.nbr].iter().copied());
            }
            next_env.push(e);
        }
        for i in 0..n {
            if next_env[i] != env[i] {
                out.push(next_inv[i]);
            }
        }
        inv = next_inv;
        env = next_env;
    }
    out
}

/// Iterative-refinement circular fingerprint: every distinct environment sets
/// one bit, chosen by folding the 64-bit FNV-1a environment id modulo
/// `nbits` (which must be a power of two).
pub fn morgan_fp(m: &Molecule, radius: usize, nbits: usize) -> Result<Fingerprint, PropError> {
    if nbits == 0 || !nbits.is_power_of_two() {
        return Err(PropError::BadWidth(nbits));
    }
    let mut fp = Fingerprint {
        words: vec![0; nbits.div_ceil(64)],
        nbits,
        radius,
    };
    for env in morgan_environments(m, radius) {
        fp.set((env % nbits as u64) as usize);
    }
    Ok(fp)
}

/// Tanimoto coefficient |a AND b| / |a OR b|; 1 when both sets are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, PropError> {
    if a.nbits != b.nbits {
        return Err(PropError::WidthMismatch(a.nbits, b.nbits));
    }
    let mut inter = 0u64;
    let mut union = 0u64;
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones() as u64;
        union += (x | y).count_ones() as u64;
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Similarity of two molecules under the default 2048-bit radius-2 setup.
pub fn molecule_similarity(a: &Molecule, b: &Molecule) -> Result<f64, PropError> {
    let fa = morgan_fp(a, 2, 2048)?;
    let fb = morgan_fp(b, 2, 2048)?;
    tanimoto(&fa, &fb)
}

/// Large-ring penalty: -max(0, largest SSSR ring - 6).
pub fn cycle_score(m: &Molecule) -> f64 {
    let largest = sssr(m).iter().map(|r| r.len()).max().unwrap_or(0);
    let penalty = largest.saturating_sub(6);
    if penalty == 0 {
        0.0
    } else {
        -(penalty as f64)
    }
}

/// Normalization constants and size cap for penalized logP.
#[derive(Debug, Clone, PartialEq)]
pub struct PlogpConfig {
    pub logp_mean: f64,
    pub logp_std: f64,
    pub sa_mean: f64,
    pub sa_std: f64,
    pub cycle_mean: f64,
    pub cycle_std: f64,
    pub max_atoms: usize,
}

impl Default for PlogpConfig {
    fn default() -> Self {
        PlogpConfig {
            logp_mean: 0.0,
            logp_std: 1.0,
            sa_mean: 0.0,
            sa_std: 1.0,
            cycle_mean: 0.0,
            cycle_std: 1.0,
            max_atoms: 38,
        }
    }
}

impl PlogpConfig {
    pub fn validate(&self) -> Result<(), PropError> {
        for (name, v) in [
            ("logp_std", self.logp_std),
            ("sa_std", self.sa_std),
            ("cycle_std", self.cycle_std),
        ] {
            if v <= 0.0 {
                return Err(PropError::BadConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> Vec<(String, String)> {
        vec![
            ("logp_mean".into(), format!("{:?}", self.logp_mean)),
            ("logp_std".into(), format!("{:?}", self.logp_std)),
            ("sa_mean".into(), format!("{:?}", self.sa_mean)),
            ("sa_std".into(), format!("{:?}", self.sa_std)),
            ("cycle_mean".into(), format!("{:?}", self.cycle_mean)),
            ("cycle_std".into(), format!("{:?}", self.cycle_std)),
            ("max_atoms".into(), self.max_atoms.to_string()),
        ]
    }

    pub fn from_key_values<'a>(
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<PlogpConfig, PropError> {
        let mut cfg = PlogpConfig::default();
        for (k, v) in pairs {
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| PropError::BadConfig(format!("bad number: {v}")))
            };
            match k {
                "logp_mean" => cfg.logp_mean = num(v)?,
                "logp_std" => cfg.logp_std = num(v)?,
                "sa_mean" => cfg.sa_mean = num(v)?,
                "sa_std" => cfg.sa_std = num(v)?,
                "cycle_mean" => cfg.cycle_mean = num(v)?,
                "cycle_std" => cfg.cycle_std = num(v)?,
                "max_atoms" => {
                    cfg.max_atoms = v
                        .parse()
                        .map_err(|_| PropError::BadConfig(format!("bad count for {k}: {v}")))?
                }
                other => {
                    return Err(PropError::BadConfig(format!("unknown key {other}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Accessibility component of penalized logP: the negated 1..10 synthesis
/// difficulty, so easier molecules contribute more.
pub fn sa_component(m: &Molecule, sa_table: Option<&SaTable>) -> f64 {
    -sa_score(m, sa_table)
}

/// Penalized logP: z-normalized Crippen logP + SA component + cycle score.
pub fn plogp(
    m: &Molecule,
    cfg: &PlogpConfig,
    sa_table: Option<&SaTable>,
) -> Result<f64, PropError> {
    cfg.validate()?;
    let logp = crippen_logp(m)?;
    let sa = sa_component(m, sa_table);
    let cyc = cycle_score(m);
    Ok((logp - cfg.logp_mean) / cfg.logp_std
        + (sa - cfg.sa_mean) / cfg.sa_std
        + (cyc - cfg.cycle_mean) / cfg.cycle_std)
}

/// A deterministic, total scoring function over valence-legal molecules.
pub trait PropertyScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, m: &Molecule) -> Result<f64, PropError>;
}

pub struct PlogpScorer {
    pub cfg: PlogpConfig,
    pub sa_table: Option<SaTable>,
}

impl PropertyScorer for PlogpScorer {
    fn name(&self) -> &str {
        "plogp"
    }
    fn score(&self, m: &Molecule) -> Result<f64, PropError> {
        plogp(m, &self.cfg, self.sa_table.as_ref())
    }
}

pub struct LogpScorer;

impl PropertyScorer for LogpScorer {
    fn name(&self) -> &str {
        "logp"
    }
    fn score(&self, m: &Molecule) -> Result<f64, PropError> {
        crippen_logp(m)
    }
}

pub struct SaScorer {
    pub table: Option<SaTable>,
}

impl PropertyScorer for SaScorer {
    fn name(&self) -> &str {
        "sa"
    }
    fn score(&self, m: &Molecule) -> Result<f64, PropError> {
        Ok(sa_score(m, self.table.as_ref()))
    }
}

pub struct CycleScorer;

impl PropertyScorer for CycleScorer {
    fn name(&self) -> &str {
        "cycle"
    }
    fn score(&self, m: &Molecule) -> Result<f64, PropError> {
        Ok(cycle_score(m))
    }
}

/// Mean/std of each plogp component over a corpus; degenerate spreads fall
/// back to 1 so downstream normalization never divides by zero. Calibrate
/// with the same SA table that scoring will use.
pub fn calibrate(
    mols: &[Molecule],
    max_atoms: usize,
    sa_table: Option<&SaTable>,
) -> Result<PlogpConfig, PropError> {
    let mut logps = Vec::new();
    let mut sas = Vec::new();
    let mut cycles = Vec::new();
    for m in mols {
        logps.push(crippen_logp(m)?);
        sas.push(sa_component(m, sa_table));
        cycles.push(cycle_score(m));
    }
    let (logp_mean, logp_std) = mean_std(&logps);
    let (sa_mean, sa_std) = mean_std(&sas);
    let (cycle_mean, cycle_std) = mean_std(&cycles);
    Ok(PlogpConfig {
        logp_mean,
        logp_std,
        sa_mean,
        sa_std,
        cycle_mean,
        cycle_std,
        max_atoms,
    })
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 1.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;

    #[test]
    fn methane_sets_one_bit() {
        let m = parse_smiles("C").unwrap();
        for nbits in [64usize, 512, 2048] {
            let fp = morgan_fp(&m, 2, nbits).unwrap();
            assert_eq!(fp.popcount(), 1, "nbits={nbits}");
        }
    }

    #[test]
    fn width_must_be_power_of_two() {
        let m = parse_smiles("C").unwrap();
        assert!(matches!(morgan_fp(&m, 2, 100), Err(PropError::BadWidth(100))));
    }

    #[test]
    fn benzene_fp_permutation_invariant() {
        let m = parse_smiles("c1ccc(O)cc1").unwrap();
        let base = morgan_fp(&m, 2, 2048).unwrap();
        let perm: Vec<usize> = (0..m.atom_count()).rev().collect();
        let p = m.permute(&perm);
        assert_eq!(morgan_fp(&p, 2, 2048).unwrap(), base);
    }

    #[test]
    fn ethanol_vs_dimethyl_ether_differ() {
        let a = morgan_fp(&parse_smiles("CCO").unwrap(), 2, 2048).unwrap();
        let b = morgan_fp(&parse_smiles("COC").unwrap(), 2, 2048).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn tanimoto_basics() {
        let x = morgan_fp(&parse_smiles("CCO").unwrap(), 2, 2048).unwrap();
        assert_eq!(tanimoto(&x, &x).unwrap(), 1.0);

        // Hand-built bitsets: {1,2,3} vs {2,3,4} -> 2/4.
        let mut a = Fingerprint {
            words: vec![0; 32],
            nbits: 2048,
            radius: 2,
        };
        let mut b = a.clone();
        for bit in [1, 2, 3] {
            a.set(bit);
        }
        for bit in [2, 3, 4] {
            b.set(bit);
        }
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);

        // Disjoint nonempty -> 0; both empty -> 1.
        let mut c = Fingerprint {
            words: vec![0; 32],
            nbits: 2048,
            radius: 2,
        };
        c.set(100);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        let e = Fingerprint {
            words: vec![0; 32],
            nbits: 2048,
            radius: 2,
        };
        assert_eq!(tanimoto(&e, &e.clone()).unwrap(), 1.0);

        let w = morgan_fp(&parse_smiles("C").unwrap(), 2, 512).unwrap();
        assert!(matches!(
            tanimoto(&x, &w),
            Err(PropError::WidthMismatch(2048, 512))
        ));
    }

    #[test]
    fn cycle_score_cases() {
        assert_eq!(cycle_score(&parse_smiles("c1ccccc1").unwrap()), 0.0);
        assert_eq!(cycle_score(&parse_smiles("CCCCCC").unwrap()), 0.0);
        assert_eq!(cycle_score(&parse_smiles("C1CCCCCCC1").unwrap()), -2.0);
    }

    #[test]
    fn plogp_with_unit_constants_is_raw_sum() {
        let m = parse_smiles("c1ccccc1").unwrap();
        let cfg = PlogpConfig::default();
        let got = plogp(&m, &cfg, None).unwrap();
        let want = crippen_logp(&m).unwrap() + sa_component(&m, None) + cycle_score(&m);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn calibration_zero_means() {
        let mols: Vec<Molecule> = ["CCO", "c1ccccc1", "CC(=O)O", "C1CCCCCCC1", "CCN"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let cfg = calibrate(&mols, 38, None).unwrap();
        let mut zsum = [0.0f64; 3];
        for m in &mols {
            zsum[0] += (crippen_logp(m).unwrap() - cfg.logp_mean) / cfg.logp_std;
            zsum[1] += (sa_component(m, None) - cfg.sa_mean) / cfg.sa_std;
            zsum[2] += (cycle_score(m) - cfg.cycle_mean) / cfg.cycle_std;
        }
        for z in zsum {
            assert!(z.abs() < 1e-9, "component mean not zero: {z}");
        }
    }

    #[test]
    fn single_molecule_calibration_falls_back_to_unit_std() {
        let mols = vec![parse_smiles("CCO").unwrap()];
        let cfg = calibrate(&mols, 38, None).unwrap();
        assert_eq!(cfg.logp_std, 1.0);
        assert_eq!(cfg.sa_std, 1.0);
        assert_eq!(cfg.cycle_std, 1.0);
    }
}
