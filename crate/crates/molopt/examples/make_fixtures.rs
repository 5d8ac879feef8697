//! Regenerates the bundled fixture corpus file.

use molopt::chem::write::write_smiles;

fn main() {
    let corpus = molopt::fixtures::fixture_corpus(200, 7);
    let mut out = String::new();
    for (i, m) in corpus.iter().enumerate() {
        out.push_str(&format!("{}\tfix{:03}\n", write_smiles(m).unwrap(), i));
    }
    std::fs::write("crates/molopt/data/corpus.smi", out).unwrap();
    println!("wrote {} molecules", corpus.len());
}
