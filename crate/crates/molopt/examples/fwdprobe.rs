use molopt::chem::molecule::Molecule;
use molopt::chem::tree::NodeVocabulary;
use molopt::model::{HyperParams, ModelParams};
use molopt::pairs::extract::{extract_pairs, ExtractConfig};
use molopt::props::LogpScorer;
use molopt::tensor::rng::Rng;
use molopt::tensor::tape::Tape;

fn main() {
    let mols: Vec<Molecule> = ["CC(C)CCO", "CC(C)CCN"]
        .iter().map(|s| molopt::chem::parse::parse_smiles(s).unwrap()).collect();
    let vocab = NodeVocabulary::from_corpus(&mols).unwrap();
    let cfg = ExtractConfig { sim_min: 0.0, delta_min: -100.0, node_cap: 40 };
    let (pairs, _) = extract_pairs(&mols, &vocab, &LogpScorer, &cfg).unwrap();
    let pair = pairs[0].clone();
    let hp = HyperParams { hidden: 8, z_dim: 4, t_a: 3, t_n: 2, ..HyperParams::default() };
    let params = ModelParams::init(&hp, vocab.len(), &mut Rng::new(4));
    let tape = Tape::new();
    let tm = params.on_tape(&tape);
    let ax = tm.atom_embeddings(&pair.mx).unwrap();
    let nx = tm.tree_embeddings(&pair.tx, ax).unwrap();
    println!("tree nodes: {}", pair.tx.node_count());
    let v = tape.value(nx);
    for r in 0..nx.rows {
        println!("node {r} type {} embed {:?}", pair.tx.nodes[r].type_id,
            &v[r*nx.cols..(r+1)*nx.cols].iter().map(|x| (x*100.0).round()/100.0).collect::<Vec<_>>());
    }
    let z = tape.leaf(1, 8, vec![0.3, -0.2, 0.1, 0.4, -0.1, 0.2, 0.0, -0.3]);
    let scores = tm.dsp_scores(nx, z).unwrap();
    println!("dsp scores {:?}", tape.value(scores));
}
