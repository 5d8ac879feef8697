//! Training-pair generation: exact tree edit distance, disconnection sites,
//! single-site pair extraction with replayable attach sequences, and corpus
//! analyzers.

pub mod extract;
pub mod ged;
pub mod stats;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::chem::molecule::Molecule;
use crate::chem::surgery::{
    attach_node, compatible_child_points, enumerate_attachment_candidates, remove_subtrees,
    SurgeryError,
};
use crate::chem::tree::{JunctionTree, NodeVocabulary, TreeError};
use crate::chem::BuildError;

pub use extract::{extract_pairs, ExtractConfig, ExtractStats};
pub use ged::{brute_force_ged, disconnection_sites, tree_edit_distance, EditPath, GedError};
pub use stats::{fragment_stats, FragmentStats};

/// One step of the ground-truth decoding sequence. `parent_slot` numbers
/// nodes in decode order: slot 0 is the disconnection site, slot k the k-th
/// attached node. Candidate indices point into the deterministic candidate
/// enumeration at that step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachOp {
    Attach {
        parent_slot: usize,
        child_type: usize,
        parent_cand: usize,
        child_cand: usize,
    },
    Stop {
        parent_slot: usize,
    },
}

/// A single-disconnection-site training instance: applying the removal and
/// replaying the attach sequence on `mx` reproduces `my`.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub mx: Molecule,
    pub my: Molecule,
    pub mx_smiles: String,
    pub my_smiles: String,
    pub tx: JunctionTree,
    pub ty: JunctionTree,
    /// Disconnection site: node in `tx` and its image in `ty`.
    pub site: usize,
    pub site_in_ty: usize,
    /// Full subtree node set removed from `tx`.
    pub removal: BTreeSet<usize>,
    /// Nodes of `ty` attached during decoding.
    pub added: BTreeSet<usize>,
    pub ops: Vec<AttachOp>,
    pub sim: f64,
    pub prop_delta: f64,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("surgery failed: {0}")]
    Surgery(#[from] SurgeryError),
    #[error("candidate index {index} out of range ({len} candidates)")]
    BadCandidate { index: usize, len: usize },
    #[error("slot {0} unknown")]
    BadSlot(usize),
    #[error("finalize failed: {0}")]
    Finalize(#[from] BuildError),
    #[error("tree rebuild failed: {0}")]
    Tree(#[from] TreeError),
}

impl TrainingPair {
    /// Structurally replays the edit (no model involved): subtree removal
    /// followed by the recorded attach sequence, then hydrogen capping.
    pub fn replay(&self, vocab: &NodeVocabulary) -> Result<Molecule, ReplayError> {
        let mut im = remove_subtrees(&self.mx, &self.tx, self.site, &self.removal)?;
        let mut slots: Vec<usize> = vec![im.frontier[0]];
        for op in &self.ops {
            if let AttachOp::Attach {
                parent_slot,
                child_type,
                parent_cand,
                child_cand,
            } = *op
            {
                let parent = *slots
                    .get(parent_slot)
                    .ok_or(ReplayError::BadSlot(parent_slot))?;
                let (parents, _) = enumerate_attachment_candidates(&im, parent, child_type, vocab);
                let parent_pt = *parents.get(parent_cand).ok_or(ReplayError::BadCandidate {
                    index: parent_cand,
                    len: parents.len(),
                })?;
                let children = compatible_child_points(&im, parent, child_type, vocab, &parent_pt);
                let child_pt = *children.get(child_cand).ok_or(ReplayError::BadCandidate {
                    index: child_cand,
                    len: children.len(),
                })?;
                im = attach_node(&im, parent, child_type, vocab, &parent_pt, &child_pt)?;
                slots.push(im.tree.node_count() - 1);
            }
        }
        Ok(im.finalize()?)
    }

    pub fn ops_string(&self) -> String {
        self.ops
            .iter()
            .map(|op| match *op {
                AttachOp::Attach {
                    parent_slot,
                    child_type,
                    parent_cand,
                    child_cand,
                } => format!("A:{parent_slot},{child_type},{parent_cand},{child_cand}"),
                AttachOp::Stop { parent_slot } => format!("S:{parent_slot}"),
            })
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse_ops(text: &str) -> Result<Vec<AttachOp>, String> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        text.split(';')
            .map(|tok| {
                if let Some(rest) = tok.strip_prefix("A:") {
                    let nums: Vec<usize> = rest
                        .split(',')
                        .map(|s| s.parse().map_err(|_| format!("bad op field in {tok}")))
                        .collect::<Result<_, _>>()?;
                    if nums.len() != 4 {
                        return Err(format!("attach op needs 4 fields: {tok}"));
                    }
                    Ok(AttachOp::Attach {
                        parent_slot: nums[0],
                        child_type: nums[1],
                        parent_cand: nums[2],
                        child_cand: nums[3],
                    })
                } else if let Some(rest) = tok.strip_prefix("S:") {
                    rest.parse()
                        .map(|parent_slot| AttachOp::Stop { parent_slot })
                        .map_err(|_| format!("bad stop slot in {tok}"))
                } else {
                    Err(format!("unknown op token {tok}"))
                }
            })
            .collect()
    }

    /// TSV row: mx, my, site, removal nodes, attach sequence, sim, delta.
    pub fn to_tsv_row(&self) -> String {
        let removal = self
            .removal
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:?}\t{:?}",
            self.mx_smiles,
            self.my_smiles,
            self.site,
            removal,
            self.ops_string(),
            self.sim,
            self.prop_delta
        )
    }

    /// Rebuilds a pair from its TSV row; trees are re-derived from the
    /// stored canonical SMILES, so node indices line up with the row.
    pub fn from_tsv_row(row: &str, vocab: &NodeVocabulary) -> Result<TrainingPair, String> {
        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 7 {
            return Err(format!("expected 7 columns, got {}", cols.len()));
        }
        let mx = crate::chem::parse::parse_smiles(cols[0]).map_err(|e| e.to_string())?;
        let my = crate::chem::parse::parse_smiles(cols[1]).map_err(|e| e.to_string())?;
        let tx = crate::chem::tree::junction_tree(&mx, vocab).map_err(|e| e.to_string())?;
        let ty = crate::chem::tree::junction_tree(&my, vocab).map_err(|e| e.to_string())?;
        let site: usize = cols[2].parse().map_err(|_| "bad site".to_string())?;
        let removal: BTreeSet<usize> = if cols[3].is_empty() {
            BTreeSet::new()
        } else {
            cols[3]
                .split(',')
                .map(|s| s.parse().map_err(|_| format!("bad removal index {s}")))
                .collect::<Result<_, String>>()?
        };
        let ops = TrainingPair::parse_ops(cols[4])?;
        let sim: f64 = cols[5].parse().map_err(|_| "bad sim".to_string())?;
        let prop_delta: f64 = cols[6].parse().map_err(|_| "bad delta".to_string())?;

        // The site image and added set are re-derived from the edit path.
        let path =
            tree_edit_distance(&tx, &ty, ged::DEFAULT_NODE_CAP).map_err(|e| e.to_string())?;
        let site_in_ty = path
            .image_of(site)
            .ok_or_else(|| "site not matched".to_string())?;
        let added = path.added.iter().copied().collect();

        Ok(TrainingPair {
            mx_smiles: cols[0].to_string(),
            my_smiles: cols[1].to_string(),
            mx,
            my,
            tx,
            ty,
            site,
            site_in_ty,
            removal,
            added,
            ops,
            sim,
            prop_delta,
        })
    }
}
