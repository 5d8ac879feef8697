//! Model hyperparameters and the learnable parameter set.

use std::collections::BTreeMap;

use crate::chem::element::Element;
use crate::chem::molecule::{BondOrder, Molecule};
use crate::tensor::optim::ParamStore;
use crate::tensor::rng::Rng;
use crate::tensor::tape::{Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub hidden: usize,
    /// Latent width per half; the full latent is [z-, z+].
    pub z_dim: usize,
    /// Message-passing rounds over the molecular graph / junction tree.
    pub t_a: usize,
    pub t_n: usize,
    pub max_atoms: usize,
    pub beta_init: f64,
    pub beta_step: f64,
    pub beta_every: usize,
    pub beta_cap: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Free-decoding guards.
    pub max_children: usize,
    pub max_attachments: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            hidden: 256,
            z_dim: 32,
            t_a: 6,
            t_n: 3,
            max_atoms: 38,
            beta_init: 0.1,
            beta_step: 0.05,
            beta_every: 500,
            beta_cap: 0.5,
            lr: 0.001,
            batch: 32,
            epochs: 10,
            max_children: 8,
            max_attachments: 30,
        }
    }
}

impl HyperParams {
    /// KL weight: `beta_init` throughout the first epoch, then stepped every
    /// `beta_every` batches counted after epoch one, capped.
    pub fn beta_at(&self, epoch: usize, post_epoch1_batches: usize) -> f64 {
        if epoch <= 1 {
            return self.beta_init;
        }
        let raw = self.beta_init + self.beta_step * (post_epoch1_batches / self.beta_every) as f64;
        raw.min(self.beta_cap)
    }

    pub fn to_meta(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("hidden".into(), self.hidden as f64);
        m.insert("z_dim".into(), self.z_dim as f64);
        m.insert("t_a".into(), self.t_a as f64);
        m.insert("t_n".into(), self.t_n as f64);
        m.insert("max_atoms".into(), self.max_atoms as f64);
        m.insert("beta_init".into(), self.beta_init);
        m.insert("beta_step".into(), self.beta_step);
        m.insert("beta_every".into(), self.beta_every as f64);
        m.insert("beta_cap".into(), self.beta_cap);
        m.insert("lr".into(), self.lr);
        m.insert("batch".into(), self.batch as f64);
        m.insert("epochs".into(), self.epochs as f64);
        m.insert("max_children".into(), self.max_children as f64);
        m.insert("max_attachments".into(), self.max_attachments as f64);
        m
    }

    pub fn from_meta(meta: &BTreeMap<String, f64>) -> HyperParams {
        let d = HyperParams::default();
        let get = |k: &str, fallback: f64| meta.get(k).copied().unwrap_or(fallback);
        HyperParams {
            hidden: get("hidden", d.hidden as f64) as usize,
            z_dim: get("z_dim", d.z_dim as f64) as usize,
            t_a: get("t_a", d.t_a as f64) as usize,
            t_n: get("t_n", d.t_n as f64) as usize,
            max_atoms: get("max_atoms", d.max_atoms as f64) as usize,
            beta_init: get("beta_init", d.beta_init),
            beta_step: get("beta_step", d.beta_step),
            beta_every: get("beta_every", d.beta_every as f64) as usize,
            beta_cap: get("beta_cap", d.beta_cap),
            lr: get("lr", d.lr),
            batch: get("batch", d.batch as f64) as usize,
            epochs: get("epochs", d.epochs as f64) as usize,
            max_children: get("max_children", d.max_children as f64) as usize,
            max_attachments: get("max_attachments", d.max_attachments as f64) as usize,
        }
    }
}

/// Dense index of an atom type: element x charge x aromatic flag.
pub fn atom_type_index(element: Element, charge: i8, aromatic: bool) -> usize {
    let c = (charge.clamp(-2, 2) + 2) as usize;
    (element.index() * 5 + c) * 2 + aromatic as usize
}

pub const ATOM_TYPE_COUNT: usize = 12 * 5 * 2;
pub const BOND_TYPE_COUNT: usize = 4;

pub fn bond_type_index(order: BondOrder) -> usize {
    order.code() as usize
}

/// The full learnable parameter set, keyed by role.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub store: ParamStore,
    pub hp: HyperParams,
    pub vocab_size: usize,
}

impl ModelParams {
    pub fn init(hp: &HyperParams, vocab_size: usize, rng: &mut Rng) -> ModelParams {
        let d = hp.hidden;
        let z = hp.z_dim;
        let mut s = ParamStore::new();
        let add = |store: &mut ParamStore, name: &str, rows: usize, cols: usize, rng: &mut Rng| {
            let scale = (6.0 / (rows + cols) as f64).sqrt();
            store.insert_random(name, rows, cols, rng, scale);
        };

        add(&mut s, "embed.atom", ATOM_TYPE_COUNT, d, rng);
        add(&mut s, "embed.bond", BOND_TYPE_COUNT, d, rng);
        add(&mut s, "embed.node", vocab_size, d, rng);

        add(&mut s, "gmpn.w_atom", d, d, rng);
        add(&mut s, "gmpn.w_bond", d, d, rng);
        add(&mut s, "gmpn.w_msg", d, d, rng);
        add(&mut s, "gmpn.u_atom", d, d, rng);
        add(&mut s, "gmpn.u_msg", d, hp.t_a * d, rng);

        add(&mut s, "tmpn.w_outer", d, d, rng);
        add(&mut s, "tmpn.w_in", d, 2 * d, rng);
        add(&mut s, "tmpn.w_edge", d, d, rng);
        add(&mut s, "tmpn.w_msg", d, d, rng);
        add(&mut s, "tmpn.u_outer", d, d, rng);
        add(&mut s, "tmpn.u_in", d, 2 * d, rng);
        add(&mut s, "tmpn.u_msg", d, hp.t_n * d, rng);

        // Gaussian heads start near zero so the posterior begins at the
        // prior and the KL term grows only as the encoder needs it.
        for half in ["minus", "plus"] {
            let scale = 0.01 * (6.0 / (z + d) as f64).sqrt();
            s.insert_random(&format!("enc.mu_{half}.w"), z, d, rng, scale);
            s.insert(&format!("enc.mu_{half}.b"), 1, z, vec![0.0; z]);
            s.insert_random(&format!("enc.logvar_{half}.w"), z, d, rng, scale);
            s.insert(&format!("enc.logvar_{half}.b"), 1, z, vec![0.0; z]);
        }

        add(&mut s, "dsp.w_node", d, d, rng);
        add(&mut s, "dsp.w_z", d, 2 * z, rng);
        add(&mut s, "dsp.v", 1, d, rng);

        add(&mut s, "rfp.w_node", d, d, rng);
        add(&mut s, "rfp.w_z", d, z, rng);
        add(&mut s, "rfp.v", 1, d, rng);

        add(&mut s, "child.w_node", d, d, rng);
        add(&mut s, "child.w_z", d, z, rng);
        add(&mut s, "child.v", 1, d, rng);

        add(&mut s, "type.w_node", d, d, rng);
        add(&mut s, "type.w_z", d, z, rng);
        add(&mut s, "type.u", vocab_size, d, rng);

        add(&mut s, "pattach.w_point", d, d, rng);
        add(&mut s, "pattach.w_ctype", d, d, rng);
        add(&mut s, "pattach.w_ctx", d, d, rng);
        add(&mut s, "pattach.w_z", d, z, rng);
        add(&mut s, "pattach.v", 1, d, rng);

        add(&mut s, "cattach.w_point", d, d, rng);
        add(&mut s, "cattach.w_ctype", d, d, rng);
        add(&mut s, "cattach.w_parent", d, d, rng);
        add(&mut s, "cattach.w_z", d, z, rng);
        add(&mut s, "cattach.v", 1, d, rng);

        ModelParams {
            store: s,
            hp: hp.clone(),
            vocab_size,
        }
    }

    /// All-zero weights; decoding with these must leave molecules unchanged.
    pub fn zeros(hp: &HyperParams, vocab_size: usize) -> ModelParams {
        let mut rng = Rng::new(0);
        let mut p = ModelParams::init(hp, vocab_size, &mut rng);
        for name in p.store.names().to_vec() {
            for v in p.store.get_mut(&name).data.iter_mut() {
                *v = 0.0;
            }
        }
        p
    }

    /// Puts every parameter on a tape, returning handles keyed like the store.
    pub fn on_tape<'t>(&self, tape: &'t Tape) -> TapeModel<'t> {
        let leaf = |name: &str| self.store.leaf_on(tape, name);
        TapeModel {
            tape,
            hidden: self.hp.hidden,
            z_dim: self.hp.z_dim,
            t_a: self.hp.t_a,
            t_n: self.hp.t_n,
            embed_atom: leaf("embed.atom"),
            embed_bond: leaf("embed.bond"),
            embed_node: leaf("embed.node"),
            gmpn_w_atom: leaf("gmpn.w_atom"),
            gmpn_w_bond: leaf("gmpn.w_bond"),
            gmpn_w_msg: leaf("gmpn.w_msg"),
            gmpn_u_atom: leaf("gmpn.u_atom"),
            gmpn_u_msg: leaf("gmpn.u_msg"),
            tmpn_w_outer: leaf("tmpn.w_outer"),
            tmpn_w_in: leaf("tmpn.w_in"),
            tmpn_w_edge: leaf("tmpn.w_edge"),
            tmpn_w_msg: leaf("tmpn.w_msg"),
            tmpn_u_outer: leaf("tmpn.u_outer"),
            tmpn_u_in: leaf("tmpn.u_in"),
            tmpn_u_msg: leaf("tmpn.u_msg"),
            enc_mu_minus_w: leaf("enc.mu_minus.w"),
            enc_mu_minus_b: leaf("enc.mu_minus.b"),
            enc_logvar_minus_w: leaf("enc.logvar_minus.w"),
            enc_logvar_minus_b: leaf("enc.logvar_minus.b"),
            enc_mu_plus_w: leaf("enc.mu_plus.w"),
            enc_mu_plus_b: leaf("enc.mu_plus.b"),
            enc_logvar_plus_w: leaf("enc.logvar_plus.w"),
            enc_logvar_plus_b: leaf("enc.logvar_plus.b"),
            dsp_w_node: leaf("dsp.w_node"),
            dsp_w_z: leaf("dsp.w_z"),
            dsp_v: leaf("dsp.v"),
            rfp_w_node: leaf("rfp.w_node"),
            rfp_w_z: leaf("rfp.w_z"),
            rfp_v: leaf("rfp.v"),
            child_w_node: leaf("child.w_node"),
            child_w_z: leaf("child.w_z"),
            child_v: leaf("child.v"),
            type_w_node: leaf("type.w_node"),
            type_w_z: leaf("type.w_z"),
            type_u: leaf("type.u"),
            pattach_w_point: leaf("pattach.w_point"),
            pattach_w_ctype: leaf("pattach.w_ctype"),
            pattach_w_ctx: leaf("pattach.w_ctx"),
            pattach_w_z: leaf("pattach.w_z"),
            pattach_v: leaf("pattach.v"),
            cattach_w_point: leaf("cattach.w_point"),
            cattach_w_ctype: leaf("cattach.w_ctype"),
            cattach_w_parent: leaf("cattach.w_parent"),
            cattach_w_z: leaf("cattach.w_z"),
            cattach_v: leaf("cattach.v"),
        }
    }

    /// Accumulates tape gradients for every parameter after a backward pass.
    pub fn harvest_grads(&mut self, tape: &Tape, tm: &TapeModel, scale: f64) {
        let pairs: Vec<(&str, Tensor)> = vec![
            ("embed.atom", tm.embed_atom),
            ("embed.bond", tm.embed_bond),
            ("embed.node", tm.embed_node),
            ("gmpn.w_atom", tm.gmpn_w_atom),
            ("gmpn.w_bond", tm.gmpn_w_bond),
            ("gmpn.w_msg", tm.gmpn_w_msg),
            ("gmpn.u_atom", tm.gmpn_u_atom),
            ("gmpn.u_msg", tm.gmpn_u_msg),
            ("tmpn.w_outer", tm.tmpn_w_outer),
            ("tmpn.w_in", tm.tmpn_w_in),
            ("tmpn.w_edge", tm.tmpn_w_edge),
            ("tmpn.w_msg", tm.tmpn_w_msg),
            ("tmpn.u_outer", tm.tmpn_u_outer),
            ("tmpn.u_in", tm.tmpn_u_in),
            ("tmpn.u_msg", tm.tmpn_u_msg),
            ("enc.mu_minus.w", tm.enc_mu_minus_w),
            ("enc.mu_minus.b", tm.enc_mu_minus_b),
            ("enc.logvar_minus.w", tm.enc_logvar_minus_w),
            ("enc.logvar_minus.b", tm.enc_logvar_minus_b),
            ("enc.mu_plus.w", tm.enc_mu_plus_w),
            ("enc.mu_plus.b", tm.enc_mu_plus_b),
            ("enc.logvar_plus.w", tm.enc_logvar_plus_w),
            ("enc.logvar_plus.b", tm.enc_logvar_plus_b),
            ("dsp.w_node", tm.dsp_w_node),
            ("dsp.w_z", tm.dsp_w_z),
            ("dsp.v", tm.dsp_v),
            ("rfp.w_node", tm.rfp_w_node),
            ("rfp.w_z", tm.rfp_w_z),
            ("rfp.v", tm.rfp_v),
            ("child.w_node", tm.child_w_node),
            ("child.w_z", tm.child_w_z),
            ("child.v", tm.child_v),
            ("type.w_node", tm.type_w_node),
            ("type.w_z", tm.type_w_z),
            ("type.u", tm.type_u),
            ("pattach.w_point", tm.pattach_w_point),
            ("pattach.w_ctype", tm.pattach_w_ctype),
            ("pattach.w_ctx", tm.pattach_w_ctx),
            ("pattach.w_z", tm.pattach_w_z),
            ("pattach.v", tm.pattach_v),
            ("cattach.w_point", tm.cattach_w_point),
            ("cattach.w_ctype", tm.cattach_w_ctype),
            ("cattach.w_parent", tm.cattach_w_parent),
            ("cattach.w_z", tm.cattach_w_z),
            ("cattach.v", tm.cattach_v),
        ];
        for (name, t) in pairs {
            self.store.accumulate_grad(tape, name, t, scale);
        }
    }
}

/// Parameter handles living on one tape.
pub struct TapeModel<'t> {
    pub tape: &'t Tape,
    pub hidden: usize,
    pub z_dim: usize,
    pub t_a: usize,
    pub t_n: usize,
    pub embed_atom: Tensor,
    pub embed_bond: Tensor,
    pub embed_node: Tensor,
    pub gmpn_w_atom: Tensor,
    pub gmpn_w_bond: Tensor,
    pub gmpn_w_msg: Tensor,
    pub gmpn_u_atom: Tensor,
    pub gmpn_u_msg: Tensor,
    pub tmpn_w_outer: Tensor,
    pub tmpn_w_in: Tensor,
    pub tmpn_w_edge: Tensor,
    pub tmpn_w_msg: Tensor,
    pub tmpn_u_outer: Tensor,
    pub tmpn_u_in: Tensor,
    pub tmpn_u_msg: Tensor,
    pub enc_mu_minus_w: Tensor,
    pub enc_mu_minus_b: Tensor,
    pub enc_logvar_minus_w: Tensor,
    pub enc_logvar_minus_b: Tensor,
    pub enc_mu_plus_w: Tensor,
    pub enc_mu_plus_b: Tensor,
    pub enc_logvar_plus_w: Tensor,
    pub enc_logvar_plus_b: Tensor,
    pub dsp_w_node: Tensor,
    pub dsp_w_z: Tensor,
    pub dsp_v: Tensor,
    pub rfp_w_node: Tensor,
    pub rfp_w_z: Tensor,
    pub rfp_v: Tensor,
    pub child_w_node: Tensor,
    pub child_w_z: Tensor,
    pub child_v: Tensor,
    pub type_w_node: Tensor,
    pub type_w_z: Tensor,
    pub type_u: Tensor,
    pub pattach_w_point: Tensor,
    pub pattach_w_ctype: Tensor,
    pub pattach_w_ctx: Tensor,
    pub pattach_w_z: Tensor,
    pub pattach_v: Tensor,
    pub cattach_w_point: Tensor,
    pub cattach_w_ctype: Tensor,
    pub cattach_w_parent: Tensor,
    pub cattach_w_z: Tensor,
    pub cattach_v: Tensor,
}

/// Atom type indices of a molecule's atoms.
pub fn atom_type_indices(m: &Molecule) -> Vec<usize> {
    m.atoms()
        .iter()
        .map(|a| atom_type_index(a.element, a.charge, a.aromatic))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_schedule_reference_points() {
        let hp = HyperParams::default();
        assert_eq!(hp.beta_at(1, 0), 0.1);
        assert_eq!(hp.beta_at(1, 10_000), 0.1);
        assert_eq!(hp.beta_at(2, 0), 0.1);
        assert_eq!(hp.beta_at(2, 499), 0.1);
        assert_eq!(hp.beta_at(2, 500), 0.15000000000000002);
        assert_eq!(hp.beta_at(3, 1000), 0.2);
        assert_eq!(hp.beta_at(9, 1_000_000), 0.5);
    }

    #[test]
    fn atom_type_indices_disjoint() {
        let mut seen = std::collections::BTreeSet::new();
        for e in Element::ALL {
            for q in -2..=2 {
                for ar in [false, true] {
                    let idx = atom_type_index(e, q, ar);
                    assert!(idx < ATOM_TYPE_COUNT);
                    assert!(seen.insert(idx));
                }
            }
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        let hp = HyperParams {
            hidden: 8,
            z_dim: 4,
            t_a: 2,
            t_n: 2,
            ..HyperParams::default()
        };
        let a = ModelParams::init(&hp, 10, &mut Rng::new(5));
        let b = ModelParams::init(&hp, 10, &mut Rng::new(5));
        for name in a.store.names() {
            assert_eq!(a.store.get(name).data, b.store.get(name).data);
        }
    }

    #[test]
    fn meta_round_trip() {
        let hp = HyperParams {
            hidden: 64,
            z_dim: 16,
            t_a: 3,
            t_n: 2,
            ..HyperParams::default()
        };
        assert_eq!(HyperParams::from_meta(&hp.to_meta()), hp);
    }
}
