//! Crippen logP: atom-contribution method with the published class table
//! restricted to the supported elements. Classes are tested first-match-wins
//! in table order; hydrogens contribute through the class of the heavy atom
//! that carries them.

use crate::chem::element::Element;
use crate::chem::molecule::{BondOrder, Molecule};

use super::PropError;

// Contribution values, published table order.
const C1: f64 = 0.1441;
const C2: f64 = 0.0;
const C3: f64 = -0.2035;
const C4: f64 = -0.2051;
const C5: f64 = -0.2783;
const C6: f64 = 0.1551;
const C7: f64 = 0.00170;
const C8: f64 = 0.08452;
const C9: f64 = -0.1444;
const C10: f64 = -0.0516;
const C11: f64 = 0.1193;
const C12: f64 = -0.0967;
const C13: f64 = -0.5443;
const C14: f64 = 0.0;
const C15: f64 = 0.2450;
const C16: f64 = 0.1980;
const C17: f64 = 0.0;
const C18: f64 = 0.1581;
const C19: f64 = 0.2955;
const C20: f64 = 0.2713;
const C21: f64 = 0.1360;
const C22: f64 = 0.4619;
const C23: f64 = 0.5437;
const C24: f64 = 0.1893;
const C25: f64 = -0.8186;
const C26: f64 = 0.2640;
const C27: f64 = 0.2148;
const CS: f64 = 0.08129;

const H1: f64 = 0.1230;
const H2: f64 = -0.2677;
const H3: f64 = 0.2142;
const H4: f64 = 0.2980;

const N1: f64 = -1.0190;
const N2: f64 = -0.7096;
const N3: f64 = -1.0270;
const N4: f64 = -0.5188;
const N5: f64 = 0.08387;
const N6: f64 = 0.1836;
const N7: f64 = -0.3187;
const N8: f64 = -0.4458;
const N9: f64 = 0.01508;
const N10: f64 = -1.9500;
const N11: f64 = -0.3239;
const N12: f64 = -1.1190;
const N13: f64 = -0.3396;
const N14: f64 = 0.2887;
const NS: f64 = -0.4806;

const O1: f64 = 0.1552;
const O2: f64 = -0.2893;
const O3: f64 = -0.0684;
const O4: f64 = -0.4195;
const O5: f64 = 0.0335;
const O6: f64 = -0.3339;
const O7: f64 = -1.1890;
const O8: f64 = 0.1788;
const O9: f64 = -0.1526;
const O10: f64 = 0.1129;
const O11: f64 = 0.4833;
const O12: f64 = -1.3260;
const OS: f64 = -0.1188;

const F_C: f64 = 0.4202;
const CL_C: f64 = 0.6895;
const BR_C: f64 = 0.8456;
const I_C: f64 = 0.8857;
const HAL_MINUS: f64 = -2.9960;
const P_C: f64 = 0.8612;
const S1: f64 = 0.6482;
const S2: f64 = -0.0024;
const S3: f64 = 0.6237;
const ME1: f64 = -0.0025;

/// Sum of atom contributions including implicit hydrogens.
pub fn crippen_logp(m: &Molecule) -> Result<f64, PropError> {
    let mut total = 0.0;
    for i in 0..m.atom_count() {
        let a = m.atom(i);
        if a.element == Element::H {
            total += hydrogen_contribution(m, m.neighbors(i).first().map(|e| e.nbr));
            continue;
        }
        total += heavy_contribution(m, i)?;
        total += a.hcount as f64 * hydrogen_contribution(m, Some(i));
    }
    Ok(total)
}

struct Ctx<'a> {
    m: &'a Molecule,
    i: usize,
}

impl<'a> Ctx<'a> {
    fn elem(&self) -> Element {
        self.m.atom(self.i).element
    }
    fn charge(&self) -> i8 {
        self.m.atom(self.i).charge
    }
    fn aromatic(&self) -> bool {
        self.m.atom(self.i).aromatic
    }
    fn h(&self) -> u8 {
        self.m.atom(self.i).hcount
    }
    fn heavy_degree(&self) -> usize {
        self.m.degree(self.i)
    }
    /// Connectivity including hydrogens (the SMARTS X primitive).
    fn x(&self) -> usize {
        self.heavy_degree() + self.h() as usize
    }
    fn nbrs(&self) -> Vec<usize> {
        self.m.neighbors(self.i).iter().map(|e| e.nbr).collect()
    }
    fn bond_to(&self, j: usize) -> BondOrder {
        self.m
            .bond(self.m.bond_between(self.i, j).unwrap())
            .order
    }
    fn is(&self, j: usize, e: Element) -> bool {
        self.m.atom(j).element == e
    }
    fn arom(&self, j: usize) -> bool {
        self.m.atom(j).aromatic
    }
    fn aliph(&self, j: usize) -> bool {
        !self.m.atom(j).aromatic
    }
    fn aliphatic_c(&self, j: usize) -> bool {
        self.is(j, Element::C) && self.aliph(j)
    }
    fn hetero_nops_hal(&self, j: usize) -> bool {
        matches!(
            self.m.atom(j).element,
            Element::N
                | Element::O
                | Element::P
                | Element::S
                | Element::F
                | Element::Cl
                | Element::Br
                | Element::I
        )
    }
    fn double_nbrs(&self) -> Vec<usize> {
        self.m
            .neighbors(self.i)
            .iter()
            .filter(|e| self.m.bond(e.bond).order == BondOrder::Double)
            .map(|e| e.nbr)
            .collect()
    }
    fn triple_nbrs(&self) -> Vec<usize> {
        self.m
            .neighbors(self.i)
            .iter()
            .filter(|e| self.m.bond(e.bond).order == BondOrder::Triple)
            .map(|e| e.nbr)
            .collect()
    }
    fn single_nbrs(&self) -> Vec<usize> {
        self.m
            .neighbors(self.i)
            .iter()
            .filter(|e| self.m.bond(e.bond).order == BondOrder::Single)
            .map(|e| e.nbr)
            .collect()
    }
    fn aromatic_bond_nbrs(&self) -> Vec<usize> {
        self.m
            .neighbors(self.i)
            .iter()
            .filter(|e| self.m.bond(e.bond).order == BondOrder::Aromatic)
            .map(|e| e.nbr)
            .collect()
    }
}

fn heavy_contribution(m: &Molecule, i: usize) -> Result<f64, PropError> {
    let c = Ctx { m, i };
    let value = match c.elem() {
        Element::C => carbon(&c),
        Element::N => nitrogen(&c),
        Element::O => oxygen(&c),
        Element::F => halogen(&c, F_C),
        Element::Cl => halogen(&c, CL_C),
        Element::Br => halogen(&c, BR_C),
        Element::I => halogen(&c, I_C),
        Element::P => P_C,
        Element::S => sulfur(&c),
        Element::B | Element::Si => ME1,
        Element::H => return Err(PropError::UntypedAtom(i)),
    };
    Ok(value)
}

fn carbon(c: &Ctx) -> f64 {
    if !c.aromatic() {
        let sp3 = c.double_nbrs().is_empty() && c.triple_nbrs().is_empty();
        let all_c =
            |ns: &[usize]| ns.iter().all(|&j| c.aliphatic_c(j));
        let nbrs = c.nbrs();
        if sp3 {
            // C1/C2: hydrocarbon sp3 with only aliphatic-carbon neighbors.
            if all_c(&nbrs) {
                match c.h() {
                    4 => return C1,
                    3 if nbrs.len() == 1 => return C1,
                    2 if nbrs.len() == 2 => return C1,
                    1 if nbrs.len() == 3 => return C2,
                    0 if nbrs.len() == 4 => return C2,
                    _ => {}
                }
            }
            // C3/C4: sp3 carbon attached to an aliphatic heteroatom.
            let hetero = nbrs.iter().any(|&j| c.aliph(j) && c.hetero_nops_hal(j));
            if hetero && c.x() == 4 {
                match c.h() {
                    3 | 2 => return C3,
                    1 | 0 => return C4,
                    _ => {}
                }
            }
            // C8-C12: sp3 carbon attached to an aromatic atom.
            let arom_c = nbrs.iter().any(|&j| c.arom(j) && c.is(j, Element::C));
            let arom_any = nbrs.iter().any(|&j| c.arom(j));
            if c.h() == 3 && arom_c {
                return C8;
            }
            if c.h() == 3 && arom_any {
                return C9;
            }
            if c.x() == 4 && arom_any {
                match c.h() {
                    2 => return C10,
                    1 => return C11,
                    0 => return C12,
                    _ => {}
                }
            }
            // C27: sp3 carbon attached to an unusual heavy atom (B, Si).
            if c.x() == 4
                && nbrs
                    .iter()
                    .any(|&j| matches!(c.m.atom(j).element, Element::B | Element::Si))
            {
                return C27;
            }
            return CS;
        }
        // Unsaturated aliphatic carbon.
        let doubles = c.double_nbrs();
        if doubles
            .iter()
            .any(|&j| c.aliph(j) && !c.is(j, Element::C) && !c.is(j, Element::H))
        {
            return C5;
        }
        let arom_nbr = c.nbrs().iter().any(|&j| c.arom(j));
        let double_to_aromatic = doubles.iter().any(|&j| c.arom(j));
        let double_to_aliph_c = doubles.iter().any(|&j| c.aliphatic_c(j));
        if double_to_aromatic || (double_to_aliph_c && arom_nbr) {
            return C26;
        }
        if double_to_aliph_c {
            match c.h() {
                2 => return C6,
                1 => return C6,
                0 => return C6,
                _ => {}
            }
        }
        if !c.triple_nbrs().is_empty() && c.x() == 2 {
            return C7;
        }
        return CS;
    }

    // Aromatic carbon.
    let nbrs = c.nbrs();
    let subst: Vec<usize> = nbrs
        .iter()
        .copied()
        .filter(|&j| c.bond_to(j) != BondOrder::Aromatic)
        .collect();
    if c.h() == 0 {
        if subst.iter().any(|&j| {
            !matches!(
                c.m.atom(j).element,
                Element::C
                    | Element::N
                    | Element::O
                    | Element::S
                    | Element::F
                    | Element::Cl
                    | Element::Br
                    | Element::I
                    | Element::H
            )
        }) {
            return C13;
        }
        if subst.iter().any(|&j| c.is(j, Element::F)) {
            return C14;
        }
        if subst.iter().any(|&j| c.is(j, Element::Cl)) {
            return C15;
        }
        if subst.iter().any(|&j| c.is(j, Element::Br)) {
            return C16;
        }
        if subst.iter().any(|&j| c.is(j, Element::I)) {
            return C17;
        }
    }
    if c.h() >= 1 {
        return C18;
    }
    if c.aromatic_bond_nbrs().len() >= 3 {
        return C19;
    }
    let single_subst: Vec<usize> = c
        .single_nbrs()
        .into_iter()
        .collect();
    if single_subst.iter().any(|&j| c.arom(j)) {
        return C20;
    }
    if single_subst.iter().any(|&j| c.aliphatic_c(j)) {
        return C21;
    }
    if single_subst
        .iter()
        .any(|&j| c.is(j, Element::N) && c.aliph(j))
    {
        return C22;
    }
    if single_subst
        .iter()
        .any(|&j| c.is(j, Element::O) && c.aliph(j))
    {
        return C23;
    }
    if single_subst
        .iter()
        .any(|&j| c.is(j, Element::S) && c.aliph(j))
    {
        return C24;
    }
    if c.double_nbrs().iter().any(|&j| {
        matches!(c.m.atom(j).element, Element::C | Element::N | Element::O)
    }) {
        return C25;
    }
    CS
}

fn nitrogen(c: &Ctx) -> f64 {
    let charge = c.charge();
    if c.aromatic() {
        return if charge == 0 {
            N11
        } else if charge > 0 {
            N12
        } else {
            N14
        };
    }
    let nbrs = c.nbrs();
    let doubles = c.double_nbrs();
    let triples = c.triple_nbrs();
    if charge == 0 {
        let arom_nbr = nbrs.iter().any(|&j| c.arom(j));
        match (c.h(), nbrs.len()) {
            (2, 1) if !arom_nbr => return N1,
            (1, 2) if !arom_nbr && doubles.is_empty() => return N2,
            (2, 1) if arom_nbr => return N3,
            (1, 2) if arom_nbr && doubles.is_empty() => return N4,
            _ => {}
        }
        if c.h() == 1 && !doubles.is_empty() {
            return N5;
        }
        if c.h() == 0 && doubles.len() == 1 && triples.is_empty() {
            return N6;
        }
        if !triples.is_empty() {
            return N9;
        }
        if c.h() == 0 && nbrs.len() == 3 {
            return if arom_nbr { N8 } else { N7 };
        }
        return NS;
    }
    if charge > 0 {
        if c.h() >= 1 && doubles.is_empty() && triples.is_empty() {
            return N10;
        }
        if !triples.is_empty() {
            return N14;
        }
        if c.h() == 0 {
            return N13;
        }
        return NS;
    }
    // Negative nitrogen.
    N14
}

fn oxygen(c: &Ctx) -> f64 {
    if c.aromatic() {
        return O1;
    }
    let charge = c.charge();
    let nbrs = c.nbrs();
    let doubles = c.double_nbrs();
    if charge == 0 && c.h() >= 1 {
        return O2;
    }
    if charge == 0 && doubles.is_empty() && nbrs.len() == 2 {
        let any_arom = nbrs.iter().any(|&j| c.arom(j));
        return if any_arom { O4 } else { O3 };
    }
    // Oxide / charged forms.
    let single_to = |e: Element| {
        nbrs.len() == 1 && c.is(nbrs[0], e) && c.bond_to(nbrs[0]) == BondOrder::Single
    };
    if (doubles.len() == 1
        && matches!(c.m.atom(doubles[0]).element, Element::N | Element::O))
        || (charge < 0 && single_to(Element::N))
    {
        return O5;
    }
    if (charge < 0 && single_to(Element::S))
        || (charge == 0 && doubles.len() == 1 && c.is(doubles[0], Element::S))
    {
        return O6;
    }
    if charge < 0 && nbrs.len() == 1 && c.is(nbrs[0], Element::C) {
        // Carboxylate oxygen: the carbon also carries =O.
        let carbon = nbrs[0];
        let cc = Ctx { m: c.m, i: carbon };
        if cc
            .double_nbrs()
            .iter()
            .any(|&j| c.is(j, Element::O) && j != c.i)
        {
            return O12;
        }
    }
    if charge < 0 {
        return O7;
    }
    if doubles.len() == 1 {
        let carbon = doubles[0];
        if c.arom(carbon) {
            return O8;
        }
        if c.is(carbon, Element::C) {
            let cc = Ctx { m: c.m, i: carbon };
            let others: Vec<usize> = cc.nbrs().into_iter().filter(|&j| j != c.i).collect();
            let ch = cc.h();
            // CO2-like.
            if cc
                .double_nbrs()
                .iter()
                .any(|&j| j != c.i && c.is(j, Element::O))
            {
                return O9;
            }
            if ch == 2 {
                return O9;
            }
            if ch == 1 && others.len() == 1 {
                let j = others[0];
                if c.arom(j) {
                    return O10;
                }
                if c.aliphatic_c(j)
                    || matches!(c.m.atom(j).element, Element::N | Element::O)
                {
                    return O9;
                }
            }
            if others.len() == 2 {
                let both_hetero = others
                    .iter()
                    .all(|&j| !c.is(j, Element::C) && !c.is(j, Element::H));
                if both_hetero {
                    return O11;
                }
                if others.iter().any(|&j| c.arom(j)) {
                    return O10;
                }
                return O9;
            }
        }
    }
    OS
}

fn halogen(c: &Ctx, neutral: f64) -> f64 {
    if c.charge() < 0 {
        HAL_MINUS
    } else {
        neutral
    }
}

fn sulfur(c: &Ctx) -> f64 {
    if c.aromatic() {
        S3
    } else if c.charge() != 0 {
        S2
    } else {
        S1
    }
}

/// Hydrogen contribution, classified by the heavy atom that carries it.
fn hydrogen_contribution(m: &Molecule, heavy: Option<usize>) -> f64 {
    let heavy = match heavy {
        Some(h) => h,
        None => return H1, // bare hydrogen
    };
    let a = m.atom(heavy);
    match a.element {
        Element::C | Element::H => H1,
        Element::N => H3,
        Element::O => {
            // Classify by the oxygen's other heavy neighbor.
            let other = m
                .neighbors(heavy)
                .iter()
                .map(|e| e.nbr)
                .find(|&j| m.atom(j).element != Element::H);
            match other {
                None => H2, // water
                Some(j) => match m.atom(j).element {
                    Element::N => H3,
                    Element::O | Element::S => H4,
                    Element::C => {
                        let cc = Ctx { m, i: j };
                        let acidic = cc.double_nbrs().iter().any(|&k| {
                            matches!(
                                m.atom(k).element,
                                Element::C | Element::N | Element::O | Element::S
                            )
                        });
                        if acidic {
                            H4
                        } else {
                            H2
                        }
                    }
                    _ => H2,
                },
            }
        }
        _ => H2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse::parse_smiles;

    fn logp(s: &str) -> f64 {
        crippen_logp(&parse_smiles(s).unwrap()).unwrap()
    }

    #[test]
    fn methane_is_c1_plus_four_h1() {
        // Hand sum from the table: C1 + 4*H1.
        let want = C1 + 4.0 * H1;
        assert!((logp("C") - want).abs() < 1e-12);
        assert!((logp("C") - 0.6361).abs() < 1e-4);
    }

    #[test]
    fn benzene_reference_value() {
        // 6 aromatic CH: 6*(C18 + H1) = 1.6866.
        assert!((logp("c1ccccc1") - 1.6866).abs() < 1e-4);
    }

    #[test]
    fn methanol_reference_value() {
        // C3 + O2 + 3*H1 + H2 = -0.3915.
        assert!((logp("CO") - (-0.3915)).abs() < 1e-4);
    }

    #[test]
    fn empty_molecule_scores_zero() {
        use crate::chem::molecule::Molecule;
        let m = Molecule::from_parts(vec![], vec![]).unwrap();
        assert_eq!(crippen_logp(&m).unwrap(), 0.0);
    }

    #[test]
    fn permutation_invariant() {
        let m = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let v = crippen_logp(&m).unwrap();
        let perm: Vec<usize> = (0..m.atom_count()).rev().collect();
        let p = m.permute(&perm);
        assert!((crippen_logp(&p).unwrap() - v).abs() < 1e-12);
    }

    #[test]
    fn hand_sums_for_small_molecules() {
        // Ethane: 2*C1 + 6*H1.
        assert!((logp("CC") - (2.0 * C1 + 6.0 * H1)).abs() < 1e-12);
        // Acetic acid: CH3 is C1 (all-carbon nbr), carboxyl C is C5
        // (double bond to aliphatic O), carbonyl O is O9, hydroxyl O is O2,
        // acid H is H4.
        let want = C1 + 3.0 * H1 + C5 + O9 + O2 + H4;
        assert!((logp("CC(=O)O") - want).abs() < 1e-12);
        // Toluene: methyl C8, ipso C21, 5 aromatic CH.
        let want = C8 + 3.0 * H1 + C21 + 5.0 * (C18 + H1);
        assert!((logp("Cc1ccccc1") - want).abs() < 1e-12);
    }
}
