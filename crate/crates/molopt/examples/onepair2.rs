use molopt::chem::molecule::Molecule;
use molopt::chem::tree::NodeVocabulary;
use molopt::model::{pair_loss, HyperParams, ModelParams};
use molopt::pairs::extract::{extract_pairs, ExtractConfig};
use molopt::props::LogpScorer;
use molopt::tensor::optim::{AMSGRAD_BETA1, AMSGRAD_BETA2, AMSGRAD_EPS};
use molopt::tensor::rng::Rng;
use molopt::tensor::tape::Tape;

fn main() {
    let mols: Vec<Molecule> = ["CC(C)CCO", "CC(C)CCN"]
        .iter().map(|s| molopt::chem::parse::parse_smiles(s).unwrap()).collect();
    let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
    let cfg = ExtractConfig { sim_min: 0.0, delta_min: -100.0, node_cap: 40 };
    let (pairs, _) = extract_pairs(&mols, &vocab, &LogpScorer, &cfg).unwrap();
    let pair = pairs[0].clone();
    println!("site {} removal {:?} ops {:?}", pair.site, pair.removal, pair.ops);
    let hp = HyperParams { hidden: 64, z_dim: 16, t_a: 3, t_n: 2, lr: 0.01, ..HyperParams::default() };
    let mut params = ModelParams::init(&hp, vocab.len(), &mut Rng::new(4));
    for step in 0..200 {
        let tape = Tape::new();
        let tm = params.on_tape(&tape);
        let mut rng = Rng::derive(13, &[step]);
        let fwd = pair_loss(&tm, &vocab, &pair, 0.1, &mut rng, false).unwrap();
        if step % 40 == 0 || step == 199 {
            // Raw dsp scores for visibility.
            let ax = tm.atom_embeddings(&pair.mx).unwrap();
            let nx = tm.tree_embeddings(&pair.tx, ax).unwrap();
            let lat = tm.encode(&pair, &mut Rng::new(0), true).unwrap();
            let sc = tape.value(tm.dsp_scores(nx, lat.z).unwrap());
            println!("step {step}: loss {:.3} dsp {:.3} rfp {:.3} fc {:.3} scores {:?}",
                fwd.parts.total, fwd.parts.dsp, fwd.parts.rfp, fwd.parts.fc,
                sc.iter().map(|x| (x*100.0).round()/100.0).collect::<Vec<_>>());
        }
        tape.backward(fwd.loss).unwrap();
        params.store.zero_grad();
        params.harvest_grads(&tape, &tm, 1.0);
        params.store.amsgrad_step(hp.lr, AMSGRAD_BETA1, AMSGRAD_BETA2, AMSGRAD_EPS);
    }
}
