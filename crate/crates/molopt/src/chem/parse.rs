//! SMILES parsing for the supported grammar subset.
//!
//! Accepted: organic-subset and bracket atoms, formal charges, ring closures
//! (digits and `%nn`), branches, bond symbols, aromatic lowercase atoms, atom
//! maps, and the dot separator. Stereo markers (`/`, `\`, `@`) and isotopes
//! are parsed and discarded.

use thiserror::Error;

use super::element::Element;
use super::molecule::{BondOrder, BuildError, Molecule, RawAtom, RawBond};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("empty SMILES string")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unsupported element {0:?}")]
    UnsupportedElement(String),
    #[error("bond symbol with no preceding atom")]
    DanglingBond,
    #[error("branch closed without matching open parenthesis")]
    UnmatchedBranchClose,
    #[error("branch opened but never closed")]
    UnclosedBranch,
    #[error("branch open must follow an atom")]
    BranchWithoutAtom,
    #[error("ring closure {0} never closed")]
    UnclosedRing(u32),
    #[error("ring closure bond orders disagree")]
    RingBondMismatch,
    #[error("ring closure connects an atom to itself")]
    RingSelfLoop,
    #[error("ring closure duplicates an existing bond")]
    RingDuplicateBond,
    #[error("expected closing bracket")]
    ExpectedBracketClose,
    #[error("formal charge out of the supported range (|q| <= 2)")]
    ChargeOutOfRange,
    #[error("expected ring closure number after '%'")]
    ExpectedRingNumber,
    #[error("aromatic system cannot be kekulized here")]
    Kekulization,
    #[error("malformed bracket atom")]
    BadBracket,
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("SMILES parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn new(offset: usize, kind: ParseErrorKind) -> Self {
        ParseError { offset, kind }
    }
}

pub fn parse_smiles(text: &str) -> Result<Molecule, ParseError> {
    Parser::new(text)?.run()
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    atoms: Vec<RawAtom>,
    atom_offsets: Vec<usize>,
    bonds: Vec<RawBond>,
    prev: Option<usize>,
    pending: Option<BondOrder>,
    branch_stack: Vec<(Option<usize>, usize)>,
    rings: Vec<(u32, usize, Option<BondOrder>, usize)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, ParseError> {
        if text.trim().is_empty() {
            return Err(ParseError::new(0, ParseErrorKind::Empty));
        }
        Ok(Parser {
            input: text.trim_end().as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            atom_offsets: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            pending: None,
            branch_stack: Vec::new(),
            rings: Vec::new(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.input.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn err(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError::new(offset, kind)
    }

    fn run(mut self) -> Result<Molecule, ParseError> {
        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'(' => {
                    self.bump();
                    match self.prev {
                        Some(p) => self.branch_stack.push((Some(p), at)),
                        None => return Err(self.err(at, ParseErrorKind::BranchWithoutAtom)),
                    }
                }
                b')' => {
                    self.bump();
                    match self.branch_stack.pop() {
                        Some((p, _)) => {
                            self.prev = p;
                            self.pending = None;
                        }
                        None => return Err(self.err(at, ParseErrorKind::UnmatchedBranchClose)),
                    }
                }
                b'-' | b'/' | b'\\' => {
                    self.bump();
                    self.set_pending(at, BondOrder::Single)?;
                }
                b'=' => {
                    self.bump();
                    self.set_pending(at, BondOrder::Double)?;
                }
                b'#' => {
                    self.bump();
                    self.set_pending(at, BondOrder::Triple)?;
                }
                b':' => {
                    self.bump();
                    self.set_pending(at, BondOrder::Aromatic)?;
                }
                b'.' => {
                    self.bump();
                    if self.pending.is_some() {
                        return Err(self.err(at, ParseErrorKind::DanglingBond));
                    }
                    self.prev = None;
                }
                b'%' => {
                    self.bump();
                    let d1 = self.bump();
                    let d2 = self.bump();
                    match (d1, d2) {
                        (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                            let num = (a - b'0') as u32 * 10 + (b - b'0') as u32;
                            self.ring_closure(at, num)?;
                        }
                        _ => return Err(self.err(at, ParseErrorKind::ExpectedRingNumber)),
                    }
                }
                b'0'..=b'9' => {
                    self.bump();
                    self.ring_closure(at, (c - b'0') as u32)?;
                }
                b'[' => {
                    self.bump();
                    let atom = self.bracket_atom(at)?;
                    self.add_atom(atom, at)?;
                }
                _ => {
                    let atom = self.organic_atom(at)?;
                    self.add_atom(atom, at)?;
                }
            }
        }

        if let Some(&(_, at)) = self.branch_stack.last() {
            return Err(self.err(at, ParseErrorKind::UnclosedBranch));
        }
        if let Some(&(num, _, _, at)) = self.rings.first() {
            return Err(self.err(at, ParseErrorKind::UnclosedRing(num)));
        }
        if self.pending.is_some() {
            return Err(self.err(self.input.len(), ParseErrorKind::DanglingBond));
        }
        if self.atoms.is_empty() {
            return Err(self.err(0, ParseErrorKind::Empty));
        }

        let offsets = self.atom_offsets.clone();
        Molecule::from_parts(self.atoms, self.bonds).map_err(|e| match e {
            BuildError::Kekulization { atom } => {
                ParseError::new(offsets[atom], ParseErrorKind::Kekulization)
            }
            BuildError::DuplicateBond(a, _) => {
                ParseError::new(offsets[a], ParseErrorKind::RingDuplicateBond)
            }
            _ => ParseError::new(0, ParseErrorKind::BadBracket),
        })
    }

    fn set_pending(&mut self, at: usize, order: BondOrder) -> Result<(), ParseError> {
        if self.prev.is_none() {
            return Err(self.err(at, ParseErrorKind::DanglingBond));
        }
        self.pending = Some(order);
        Ok(())
    }

    fn default_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_atom(&mut self, atom: RawAtom, at: usize) -> Result<(), ParseError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        self.atom_offsets.push(at);
        if let Some(p) = self.prev {
            let order = self.pending.take().unwrap_or_else(|| self.default_order(p, idx));
            self.bonds.push(RawBond { a: p, b: idx, order });
        }
        self.pending = None;
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self, at: usize, num: u32) -> Result<(), ParseError> {
        let here = match self.prev {
            Some(p) => p,
            None => return Err(self.err(at, ParseErrorKind::DanglingBond)),
        };
        let pending = self.pending.take();
        if let Some(pos) = self.rings.iter().position(|r| r.0 == num) {
            let (_, other, other_order, _) = self.rings.remove(pos);
            if other == here {
                return Err(self.err(at, ParseErrorKind::RingSelfLoop));
            }
            let order = match (other_order, pending) {
                (Some(a), Some(b)) if a != b => {
                    return Err(self.err(at, ParseErrorKind::RingBondMismatch))
                }
                (Some(a), _) => a,
                (None, Some(b)) => b,
                (None, None) => self.default_order(other, here),
            };
            if self.bonds.iter().any(|b| {
                (b.a == other && b.b == here) || (b.a == here && b.b == other)
            }) {
                return Err(self.err(at, ParseErrorKind::RingDuplicateBond));
            }
            self.bonds.push(RawBond {
                a: other,
                b: here,
                order,
            });
        } else {
            self.rings.push((num, here, pending, at));
        }
        Ok(())
    }

    fn organic_atom(&mut self, at: usize) -> Result<RawAtom, ParseError> {
        let c = self.bump().unwrap();
        let (element, aromatic) = match c {
            b'C' => {
                if self.peek() == Some(b'l') {
                    self.bump();
                    (Element::Cl, false)
                } else {
                    (Element::C, false)
                }
            }
            b'B' => {
                if self.peek() == Some(b'r') {
                    self.bump();
                    (Element::Br, false)
                } else {
                    (Element::B, false)
                }
            }
            b'N' => (Element::N, false),
            b'O' => (Element::O, false),
            b'P' => (Element::P, false),
            b'S' => (Element::S, false),
            b'F' => (Element::F, false),
            b'I' => (Element::I, false),
            b'b' => (Element::B, true),
            b'c' => (Element::C, true),
            b'n' => (Element::N, true),
            b'o' => (Element::O, true),
            b'p' => (Element::P, true),
            b's' => (Element::S, true),
            _ => {
                return Err(self.err(
                    at,
                    if c.is_ascii_alphabetic() {
                        ParseErrorKind::UnsupportedElement((c as char).to_string())
                    } else {
                        ParseErrorKind::UnexpectedChar(c as char)
                    },
                ))
            }
        };
        Ok(RawAtom {
            element,
            charge: 0,
            aromatic,
            hcount: None,
            atom_map: None,
        })
    }

    fn bracket_atom(&mut self, at: usize) -> Result<RawAtom, ParseError> {
        // Isotope digits: parsed and discarded.
        while self.peek().map_or(false, |c| c.is_ascii_digit()) {
            self.bump();
        }

        let sym_at = self.pos;
        let first = self
            .bump()
            .ok_or_else(|| self.err(at, ParseErrorKind::BadBracket))?;
        let (element, aromatic) = if first.is_ascii_lowercase() {
            let sym = (first as char).to_uppercase().to_string();
            let e = Element::from_symbol(&sym).ok_or_else(|| {
                self.err(
                    sym_at,
                    ParseErrorKind::UnsupportedElement((first as char).to_string()),
                )
            })?;
            if !e.can_be_aromatic() {
                return Err(self.err(
                    sym_at,
                    ParseErrorKind::UnsupportedElement((first as char).to_string()),
                ));
            }
            (e, true)
        } else if first.is_ascii_uppercase() {
            // Two-letter symbols take priority (Cl, Br, Si).
            let two = self.peek().and_then(|s| {
                if s.is_ascii_lowercase() {
                    let sym = format!("{}{}", first as char, s as char);
                    Element::from_symbol(&sym)
                } else {
                    None
                }
            });
            match two {
                Some(e) => {
                    self.bump();
                    (e, false)
                }
                None => {
                    let sym = (first as char).to_string();
                    let e = Element::from_symbol(&sym).ok_or_else(|| {
                        let mut full = sym.clone();
                        if let Some(s) = self.peek() {
                            if s.is_ascii_lowercase() {
                                full.push(s as char);
                            }
                        }
                        self.err(sym_at, ParseErrorKind::UnsupportedElement(full))
                    })?;
                    (e, false)
                }
            }
        } else {
            return Err(self.err(sym_at, ParseErrorKind::BadBracket));
        };

        // Chirality markers: parsed and discarded.
        while self.peek() == Some(b'@') {
            self.bump();
            // Named classes like @TH1 / @AL1 / @SP1.
            if matches!(self.peek(), Some(b'T') | Some(b'A') | Some(b'S')) {
                let save = self.pos;
                let a = self.bump();
                let b = self.peek();
                let named = matches!(
                    (a, b),
                    (Some(b'T'), Some(b'H')) | (Some(b'A'), Some(b'L')) | (Some(b'S'), Some(b'P'))
                );
                if named {
                    self.bump();
                    while self.peek().map_or(false, |c| c.is_ascii_digit()) {
                        self.bump();
                    }
                } else {
                    self.pos = save;
                    break;
                }
            }
        }

        let mut hcount = 0u8;
        if self.peek() == Some(b'H') {
            self.bump();
            hcount = 1;
            if let Some(d) = self.peek() {
                if d.is_ascii_digit() {
                    self.bump();
                    hcount = d - b'0';
                }
            }
        }

        let mut charge: i8 = 0;
        match self.peek() {
            Some(b'+') | Some(b'-') => {
                let sign: i8 = if self.bump() == Some(b'+') { 1 } else { -1 };
                let mut mag: i8 = 1;
                if let Some(d) = self.peek() {
                    if d.is_ascii_digit() {
                        self.bump();
                        mag = (d - b'0') as i8;
                    } else {
                        while self.peek() == Some(if sign > 0 { b'+' } else { b'-' }) {
                            self.bump();
                            mag += 1;
                        }
                    }
                }
                charge = sign * mag;
                if charge.abs() > 2 {
                    return Err(self.err(at, ParseErrorKind::ChargeOutOfRange));
                }
            }
            _ => {}
        }

        let mut atom_map = None;
        if self.peek() == Some(b':') {
            self.bump();
            let mut num: u32 = 0;
            let mut any = false;
            while let Some(d) = self.peek() {
                if d.is_ascii_digit() {
                    self.bump();
                    num = num * 10 + (d - b'0') as u32;
                    any = true;
                } else {
                    break;
                }
            }
            if !any {
                return Err(self.err(self.pos, ParseErrorKind::BadBracket));
            }
            atom_map = Some(num);
        }

        if self.bump() != Some(b']') {
            return Err(self.err(self.pos.saturating_sub(1), ParseErrorKind::ExpectedBracketClose));
        }

        Ok(RawAtom {
            element,
            charge,
            aromatic,
            hcount: Some(hcount),
            atom_map,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_carbon() {
        let m = parse_smiles("C").unwrap();
        assert_eq!(m.atom_count(), 1);
        assert_eq!(m.bond_count(), 0);
        assert_eq!(m.atom(0).hcount, 4);
    }

    #[test]
    fn benzene() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert_eq!(m.bond_count(), 6);
        assert!(m.atoms().iter().all(|a| a.aromatic));
        assert!(m
            .bonds()
            .iter()
            .all(|b| b.order == BondOrder::Aromatic));
        assert!(m.valence_check().is_empty());
    }

    #[test]
    fn mapped_fragment_atom() {
        let m = parse_smiles("CCSc1cccc[c:1]1").unwrap();
        assert_eq!(m.heavy_atom_count(), 9);
        let mapped: Vec<_> = m
            .atoms()
            .iter()
            .filter(|a| a.atom_map == Some(1))
            .collect();
        assert_eq!(mapped.len(), 1);
        assert!(mapped[0].aromatic);
        assert_eq!(mapped[0].element, Element::C);
    }

    #[test]
    fn charged_ammonium_fragment_is_valence_legal() {
        let m = parse_smiles("[NH3+]C").unwrap();
        assert!(m.valence_check().is_empty());
        assert_eq!(m.atom(0).charge, 1);
        assert_eq!(m.atom(0).hcount, 3);
    }

    #[test]
    fn stereo_and_isotopes_discarded() {
        let m = parse_smiles("F/C=C/[13CH3]").unwrap();
        assert_eq!(m.atom_count(), 4);
        assert!(m.valence_check().is_empty());
        let n = parse_smiles("N[C@@H](C)O").unwrap();
        assert_eq!(n.atom_count(), 4);
    }

    #[test]
    fn error_offsets() {
        let e = parse_smiles("CC(C").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnclosedBranch);
        assert_eq!(e.offset, 2);

        let e = parse_smiles("C1CC").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnclosedRing(1)));

        let e = parse_smiles("C[Zn]C").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::UnsupportedElement(_)));
        assert_eq!(e.offset, 2);

        let e = parse_smiles("c1cccccc1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Kekulization);
    }

    #[test]
    fn ring_bond_order_agreement() {
        assert!(parse_smiles("C=1CCCCC=1").is_ok());
        let e = parse_smiles("C=1CCCCC#1").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::RingBondMismatch);
    }

    #[test]
    fn pyridine_and_pyrrole() {
        let py = parse_smiles("c1ccncc1").unwrap();
        assert!(py.valence_check().is_empty());
        let n_idx = py
            .atoms()
            .iter()
            .position(|a| a.element == Element::N)
            .unwrap();
        assert_eq!(py.atom(n_idx).hcount, 0);

        let pyr = parse_smiles("c1cc[nH]c1").unwrap();
        assert!(pyr.valence_check().is_empty());
        let n_idx = pyr
            .atoms()
            .iter()
            .position(|a| a.element == Element::N)
            .unwrap();
        assert_eq!(pyr.atom(n_idx).hcount, 1);
        assert_eq!(pyr.bond_order_sum(n_idx), 2);
    }
}
