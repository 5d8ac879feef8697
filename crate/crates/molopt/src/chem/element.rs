//! Supported elements and the valence model.

use std::fmt;

/// Elements the toolkit understands. Everything else is a parse error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    F,
    Si,
    P,
    S,
    Cl,
    Br,
    I,
    H,
}

impl Element {
    pub const ALL: [Element; 12] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::Si,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
        Element::H,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::Si => "Si",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
            Element::H => "H",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Element> {
        Some(match s {
            "B" => Element::B,
            "C" => Element::C,
            "N" => Element::N,
            "O" => Element::O,
            "F" => Element::F,
            "Si" => Element::Si,
            "P" => Element::P,
            "S" => Element::S,
            "Cl" => Element::Cl,
            "Br" => Element::Br,
            "I" => Element::I,
            "H" => Element::H,
            _ => return None,
        })
    }

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::H => 1,
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::F => 9,
            Element::Si => 14,
            Element::P => 15,
            Element::S => 16,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    /// True for elements that may be written bare (organic subset) in SMILES.
    pub fn in_organic_subset(self) -> bool {
        matches!(
            self,
            Element::B
                | Element::C
                | Element::N
                | Element::O
                | Element::F
                | Element::P
                | Element::S
                | Element::Cl
                | Element::Br
                | Element::I
        )
    }

    /// True for elements that may carry an aromatic (lowercase) flag.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }

    /// Dense index used by embedding tables and invariant hashing.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Allowed total valences (bond-order sum plus hydrogens) for an element with
/// a given formal charge. The neutral baseline is C:4, N:3, O:2, S:{2,4,6},
/// P:{3,5}, halogens:1, B:3, Si:4, H:1; charges shift it isoelectronically.
pub fn allowed_valences(element: Element, charge: i8) -> &'static [u8] {
    use Element::*;
    match (element, charge) {
        (B, 0) => &[3],
        (B, -1) => &[4],
        (C, 0) => &[4],
        (C, 1) | (C, -1) => &[3],
        (N, 0) => &[3],
        (N, 1) => &[4],
        (N, -1) => &[2],
        (O, 0) => &[2],
        (O, 1) => &[3],
        (O, -1) => &[1],
        (O, -2) => &[0],
        (F | Cl | Br | I, 0) => &[1],
        (F | Cl | Br | I, -1) => &[0],
        (F | Cl | Br | I, 1) => &[2],
        (Si, 0) => &[4],
        (P, 0) => &[3, 5],
        (P, 1) => &[4],
        (P, -1) => &[2],
        (S, 0) => &[2, 4, 6],
        (S, 1) => &[3, 5],
        (S, -1) => &[1],
        (H, 0) => &[1],
        (H, 1) | (H, -1) => &[0],
        // Uncommon charge states fall back to the neutral table.
        (e, _) => allowed_valences(e, 0),
    }
}

/// Smallest allowed valence that can hold `bond_sum`, if any.
pub fn fill_target(element: Element, charge: i8, bond_sum: u8) -> Option<u8> {
    allowed_valences(element, charge)
        .iter()
        .copied()
        .find(|&v| v >= bond_sum)
}

/// Largest allowed valence for the element/charge pair.
pub fn max_valence(element: Element, charge: i8) -> u8 {
    *allowed_valences(element, charge).iter().max().unwrap_or(&0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for e in Element::ALL {
            assert_eq!(Element::from_symbol(e.symbol()), Some(e));
        }
    }

    #[test]
    fn valence_table_matches_rules() {
        assert_eq!(allowed_valences(Element::C, 0), &[4]);
        assert_eq!(allowed_valences(Element::N, 1), &[4]);
        assert_eq!(allowed_valences(Element::O, -1), &[1]);
        assert_eq!(allowed_valences(Element::S, 0), &[2, 4, 6]);
        assert_eq!(allowed_valences(Element::P, 0), &[3, 5]);
        assert_eq!(allowed_valences(Element::Cl, 0), &[1]);
    }

    #[test]
    fn fill_target_picks_lowest_state() {
        assert_eq!(fill_target(Element::S, 0, 1), Some(2));
        assert_eq!(fill_target(Element::S, 0, 3), Some(4));
        assert_eq!(fill_target(Element::S, 0, 5), Some(6));
        assert_eq!(fill_target(Element::S, 0, 7), None);
        assert_eq!(fill_target(Element::C, 0, 5), None);
    }
}
