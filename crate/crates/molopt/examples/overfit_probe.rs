//! Scratch driver for overfit experiments on planted pairs.

use molopt::chem::molecule::Molecule;
use molopt::chem::tree::{junction_tree, NodeVocabulary};
use molopt::model::{evaluate_accuracy, sample_decode, train, DecodeLimits, HyperParams, ModelParams};
use molopt::pairs::extract::build_pair;
use molopt::pairs::ged::{disconnection_sites, tree_edit_distance};
use molopt::props::molecule_similarity;
use molopt::tensor::rng::Rng;

fn main() {
    let t0 = std::time::Instant::now();
    let planted = molopt::fixtures::planted_pairs(50, 11);
    let mut mols: Vec<Molecule> = Vec::new();
    for p in &planted {
        mols.push(p.mx.clone());
        mols.push(p.my.clone());
    }
    let vocab = NodeVocabulary::from_corpus(&mols).unwrap();

    let mut pairs = Vec::new();
    for p in &planted {
        let tx = junction_tree(&p.mx, &vocab).unwrap();
        let ty = junction_tree(&p.my, &vocab).unwrap();
        let path = tree_edit_distance(&tx, &ty, 40).unwrap();
        let sites = disconnection_sites(&path, &tx, &ty);
        assert_eq!(sites, vec![p.site]);
        let sim = molecule_similarity(&p.mx, &p.my).unwrap();
        let pair = build_pair(&p.mx, &p.my, &p.mx_smiles, &p.my_smiles, &tx, &ty, &path, p.site, sim, 1.0, &vocab)
            .expect("planted pair must replay");
        pairs.push(pair);
    }
    println!("built {} training pairs in {:?}", pairs.len(), t0.elapsed());

    let scale: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1.0);
    let beta0: f64 = std::env::args().nth(2).and_then(|a| a.parse().ok()).unwrap_or(0.1);
    let hp = HyperParams {
        hidden: 64,
        z_dim: 16,
        t_a: 3,
        t_n: 2,
        lr: 0.002,
        batch: 8,
        epochs: 200,
        beta_init: beta0,
        ..HyperParams::default()
    };
    let mut init = ModelParams::init(&hp, vocab.len(), &mut Rng::new(4));
    for name in init.store.names().to_vec() {
        if name.starts_with("enc.") && name.ends_with(".w") {
            for v in init.store.get_mut(&name).data.iter_mut() {
                *v *= scale * 100.0; // base init is 0.01 x Xavier
            }
        }
    }
    let out = train(&pairs, &vocab, &hp, 13, 1, init, |epoch, p| {
        if epoch % 30 == 0 {
            let acc = evaluate_accuracy(p, &vocab, &pairs).unwrap();
            eprintln!(
                "epoch {epoch}: min head accuracy {:.3} (dsp {:.2} rfp {:.2} fc {:.2} fl {:.2} gp {:.2} gc {:.2})",
                acc.min_rate(), acc.dsp.rate(), acc.rfp.rate(), acc.fc.rate(), acc.fl.rate(), acc.gp.rate(), acc.gc.rate()
            );
        }
        Ok(())
    })
    .unwrap();
    let first = out.log.first().unwrap();
    let last = out.log.last().unwrap();
    println!("loss {:.2} (kl {:.2}) -> {:.2} (kl {:.2}), beta {} -> {}", first.parts.total, first.parts.kl, last.parts.total, last.parts.kl, first.beta, last.beta);
    let acc = evaluate_accuracy(&out.params, &vocab, &pairs).unwrap();
    println!("final min-head accuracy {:.3}", acc.min_rate());
    println!("train time {:?}", t0.elapsed());

    // How lively is free decoding from the prior?
    let limits = DecodeLimits::from_hp(&hp);
    let mut changed = 0;
    let mut failed = 0;
    let total = 300;
    for (i, p) in planted.iter().cycle().take(total).enumerate() {
        let tx = junction_tree(&p.mx, &vocab).unwrap();
        let mut rng = Rng::derive(999, &[i as u64]);
        match sample_decode(&out.params, &vocab, &p.mx, &tx, &mut rng, &limits) {
            Ok((m, _)) => {
                if molopt::chem::write::write_smiles(&m).unwrap() != p.mx_smiles {
                    changed += 1;
                }
            }
            Err(_) => failed += 1,
        }
    }
    println!("free decodes: {changed}/{total} changed, {failed} failed");
}
