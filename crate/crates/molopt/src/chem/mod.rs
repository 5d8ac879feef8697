//! Molecular graphs: SMILES parsing and writing, valence rules, ring
//! perception, junction-tree decomposition, and graph surgery.

pub mod element;
pub mod iso;
pub mod molecule;
pub mod parse;
pub mod rings;
pub mod surgery;
pub mod tree;
pub mod write;

pub use element::{allowed_valences, Element};
pub use iso::{are_isomorphic, are_isomorphic_skeleton};
pub use molecule::{Atom, Bond, BondOrder, BuildError, Molecule, ValenceViolation};
pub use parse::{parse_smiles, ParseError, ParseErrorKind};
pub use rings::{sssr, Ring};
pub use surgery::{
    attach_node, enumerate_attachment_candidates, remove_subtrees, AttachPoint, IntermediateMol,
    SurgeryError,
};
pub use tree::{junction_tree, JunctionTree, NodeKind, NodeVocabulary, TreeError, TreeNode};
pub use write::{canonical_ranks, write_smiles, write_smiles_any, WriteError};
