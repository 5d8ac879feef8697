use molopt::chem::molecule::Molecule;
use molopt::chem::tree::NodeVocabulary;
use molopt::model::{pair_loss, HyperParams, ModelParams};
use molopt::pairs::extract::{extract_pairs, ExtractConfig};
use molopt::props::LogpScorer;
use molopt::tensor::gradcheck::grad_check;
use molopt::tensor::rng::Rng;
use molopt::tensor::tape::Tape;

fn main() {
    let mols: Vec<Molecule> = ["CCCCCO", "CCCCCCl", "CCCCCN", "CCCCC", "CC(C)CO", "CC(C)CN"]
        .iter()
        .map(|s| molopt::chem::parse::parse_smiles(s).unwrap())
        .collect();
    let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
    let cfg = ExtractConfig { sim_min: 0.3, delta_min: -100.0, node_cap: 40 };
    let (pairs, _) = extract_pairs(&mols, &vocab, &LogpScorer, &cfg).unwrap();
    println!("{} pairs", pairs.len());
    let hp = HyperParams { hidden: 6, z_dim: 3, t_a: 2, t_n: 2, ..HyperParams::default() };
    let mut params = ModelParams::init(&hp, vocab.len(), &mut Rng::new(5));
    let pair = pairs[0].clone();
    let vocab2 = vocab.clone();

    let value = |store: &molopt::tensor::ParamStore| {
        let p = ModelParams { store: store.clone(), hp: hp.clone(), vocab_size: vocab.len() };
        let tape = Tape::new();
        let tm = p.on_tape(&tape);
        let mut rng = Rng::new(42);
        pair_loss(&tm, &vocab, &pair, 0.3, &mut rng, false).unwrap().parts.total
    };
    let hp2 = hp.clone();
    let pair2 = pair.clone();
    let backward = |store: &mut molopt::tensor::ParamStore| {
        let p = ModelParams { store: store.clone(), hp: hp2.clone(), vocab_size: vocab2.len() };
        let tape = Tape::new();
        let tm = p.on_tape(&tape);
        let mut rng = Rng::new(42);
        let fwd = pair_loss(&tm, &vocab2, &pair2, 0.3, &mut rng, false).unwrap();
        tape.backward(fwd.loss).unwrap();
        let mut pp = p;
        pp.harvest_grads(&tape, &tm, 1.0);
        for name in pp.store.names().to_vec() {
            let g = pp.store.get(&name).grad.clone();
            store.get_mut(&name).grad.copy_from_slice(&g);
        }
    };
    let report = grad_check(&mut params.store.clone(), value, backward, 10, 1e-5, 99);
    println!("max rel err {:.3e} over {} checks (worst: {})", report.max_rel_err, report.checked, report.worst_param);
}
