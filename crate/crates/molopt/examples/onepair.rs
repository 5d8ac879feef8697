use molopt::chem::molecule::Molecule;
use molopt::chem::tree::NodeVocabulary;
use molopt::model::{evaluate_accuracy, train, HyperParams, ModelParams};
use molopt::pairs::extract::{extract_pairs, ExtractConfig};
use molopt::props::LogpScorer;
use molopt::tensor::rng::Rng;

fn main() {
    let mols: Vec<Molecule> = ["CC(C)CCO", "CC(C)CCN"]
        .iter().map(|s| molopt::chem::parse::parse_smiles(s).unwrap()).collect();
    let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
    let cfg = ExtractConfig { sim_min: 0.0, delta_min: -100.0, node_cap: 40 };
    let (pairs, _) = extract_pairs(&mols, &vocab, &LogpScorer, &cfg).unwrap();
    let pairs = vec![pairs[0].clone()];
    println!("pair: {} -> {} ops {:?}", pairs[0].mx_smiles, pairs[0].my_smiles, pairs[0].ops.len());
    let hp = HyperParams {
        hidden: 64, z_dim: 16, t_a: 3, t_n: 2,
        lr: 0.01, batch: 1, epochs: 150, ..HyperParams::default()
    };
    let init = ModelParams::init(&hp, vocab.len(), &mut Rng::new(4));
    let out = train(&pairs, &vocab, &hp, 13, 1, init, |epoch, p| {
        if epoch % 30 == 0 {
            let acc = evaluate_accuracy(p, &vocab, &pairs).unwrap();
            eprintln!("epoch {epoch}: min {:.3} (dsp {:.2} rfp {:.2} fc {:.2} fl {:.2} gp {:.2} gc {:.2})",
                acc.min_rate(), acc.dsp.rate(), acc.rfp.rate(), acc.fc.rate(), acc.fl.rate(), acc.gp.rate(), acc.gc.rate());
        }
        Ok(())
    }).unwrap();
    let last = out.log.last().unwrap();
    println!("final loss {:.4} (dsp {:.3} rfp {:.3} fc {:.3} fl {:.3} gp {:.3} gc {:.3} kl {:.3})",
        last.parts.total, last.parts.dsp, last.parts.rfp, last.parts.fc, last.parts.fl, last.parts.gp, last.parts.gc, last.parts.kl);
}
