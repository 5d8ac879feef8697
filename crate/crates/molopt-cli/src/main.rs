//! Command-line interface: scoring, calibration, pair extraction, training,
//! and iterative optimization, all deterministic under --seed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use molopt::chem::molecule::Molecule;
use molopt::chem::parse::parse_smiles;
use molopt::chem::tree::NodeVocabulary;
use molopt::config::{parse_key_values, ConfigError};
use molopt::model::{train as train_model, DecodeLimits, HyperParams, ModelParams, TrainError};
use molopt::pairs::{extract_pairs, fragment_stats, ExtractConfig, TrainingPair};
use molopt::pipeline::{batch_optimize, optimize_beam, PipeConfig};
use molopt::props::{
    calibrate, CycleScorer, LogpScorer, PlogpConfig, PlogpScorer, PropertyScorer, SaScorer,
    SaTable,
};
use molopt::tensor::rng::Rng;
use molopt::tensor::{load_checkpoint, save_checkpoint};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes: 0 success, 2 input error, 3 model/vocabulary mismatch,
/// 4 numeric failure.
#[derive(Debug)]
enum CliError {
    Input(String),
    Mismatch(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Mismatch(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Mismatch(m) | CliError::Numeric(m) => m,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Parser)]
#[command(name = "molopt", version = VERSION, about = "Fragment-based molecule optimization toolkit")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for corpus-parallel commands (outputs stay in input
    /// order).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Score a corpus; one TSV row per molecule.
    Score(ScoreArgs),
    /// Compute plogp normalization constants over a corpus.
    Calibrate(CalibrateArgs),
    /// Extract single-site training pairs from a corpus.
    Pairs(PairsArgs),
    /// Train the edit model on extracted pairs.
    Train(TrainArgs),
    /// Iteratively optimize a corpus with a trained model.
    Optimize(OptimizeArgs),
    /// Fragment frequency report over a pairs file.
    Stats(StatsArgs),
}

#[derive(Args)]
struct ScoreArgs {
    corpus: PathBuf,
    #[arg(long, default_value = "plogp")]
    prop: String,
    /// plogp normalization constants (key = value file).
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Synthetic-accessibility fragment score table.
    #[arg(long)]
    sa_table: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    corpus: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Also emit a fragment score table built from this corpus.
    #[arg(long)]
    sa_table: Option<PathBuf>,
    #[arg(long, default_value_t = 38)]
    max_atoms: usize,
}

#[derive(Args)]
struct PairsArgs {
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.6)]
    sim: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Write the node vocabulary here (defaults to <output>.vocab).
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Report the disconnection-site histogram.
    #[arg(long)]
    hist: bool,
    #[arg(long, default_value = "plogp")]
    prop: String,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    sa_table: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    pairs: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Continue from an existing checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Batch log TSV (defaults to <output>.log).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    corpus: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 0.4)]
    delta: f64,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    /// Beam mode: multiple optimized molecules per input.
    #[arg(long)]
    multi: bool,
    /// Beam width in --multi mode.
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Output count per input in --multi mode.
    #[arg(long, default_value_t = 20)]
    b: usize,
    #[arg(long, default_value = "plogp")]
    prop: String,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    sa_table: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-iteration trace TSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    pairs: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = match cli.cmd {
        Cmd::Score(a) => cmd_score(a, cli.seed, threads),
        Cmd::Calibrate(a) => cmd_calibrate(a, cli.seed),
        Cmd::Pairs(a) => cmd_pairs(a, cli.seed),
        Cmd::Train(a) => cmd_train(a, cli.seed),
        Cmd::Optimize(a) => cmd_optimize(a, cli.seed, threads),
        Cmd::Stats(a) => cmd_stats(a, cli.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// Corpus file: one SMILES per line, optional TAB-separated id.
fn read_corpus(path: &Path) -> Result<Vec<(String, Molecule)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (smiles, id) = match line.split_once('\t') {
            Some((s, id)) => (s.trim(), id.trim().to_string()),
            None => (line, format!("mol{}", lineno + 1)),
        };
        let m = parse_smiles(smiles).map_err(|e| {
            input_err(format!(
                "{}:{}: cannot parse {smiles:?}: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        out.push((id, m));
    }
    Ok(out)
}

fn read_vocab(path: &Path) -> Result<NodeVocabulary, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
    let entries: Vec<String> = text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    NodeVocabulary::from_descriptors(entries).map_err(input_err)
}

fn load_plogp_config(calib: Option<&PathBuf>) -> Result<PlogpConfig, CliError> {
    match calib {
        None => Ok(PlogpConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
            let kv = parse_key_values(&text).map_err(input_err)?;
            PlogpConfig::from_key_values(kv.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                .map_err(input_err)
        }
    }
}

fn load_sa_table(path: Option<&PathBuf>) -> Result<Option<SaTable>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| input_err(format!("cannot read {}: {e}", p.display())))?;
            SaTable::parse(&text).map(Some).map_err(input_err)
        }
    }
}

fn make_scorer(
    prop: &str,
    calib: Option<&PathBuf>,
    sa_table: Option<&PathBuf>,
) -> Result<Box<dyn PropertyScorer>, CliError> {
    let table = load_sa_table(sa_table)?;
    if table.is_none() && matches!(prop, "plogp" | "sa") {
        eprintln!(
            "note: no SA fragment table given; using the complexity-only accessibility score"
        );
    }
    match prop {
        "plogp" => Ok(Box::new(PlogpScorer {
            cfg: load_plogp_config(calib)?,
            sa_table: table,
        })),
        "logp" => Ok(Box::new(LogpScorer)),
        "sa" => Ok(Box::new(SaScorer { table })),
        "cycle" => Ok(Box::new(CycleScorer)),
        other => Err(input_err(format!(
            "unknown property {other:?} (expected plogp|logp|sa|cycle)"
        ))),
    }
}

fn header(seed: u64, cmd: &str, resolved: &[(String, String)]) -> String {
    let cfg = resolved
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ");
    format!("# molopt {VERSION} cmd={cmd} seed={seed} {cfg}\n")
}

fn write_output(path: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| input_err(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

/// Runs `job` over items on up to `threads` workers; results keep input
/// order regardless of completion order.
fn ordered_parallel<T, R, F>(items: Vec<T>, threads: usize, job: F) -> Vec<R>
where
    T: Send + Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| job(i, t)).collect();
    }
    let n = items.len();
    let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots_ref = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = job(i, &items[i]);
                slots_ref.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("job finished")).collect()
}

fn cmd_score(a: ScoreArgs, seed: u64, threads: usize) -> Result<(), CliError> {
    let corpus = read_corpus(&a.corpus)?;
    let scorer = make_scorer(&a.prop, a.calib.as_ref(), a.sa_table.as_ref())?;
    let resolved = vec![
        ("prop".to_string(), a.prop.clone()),
        ("corpus".to_string(), a.corpus.display().to_string()),
    ];
    let scores = ordered_parallel(corpus, threads, |_, (id, m)| {
        (
            id.clone(),
            molopt::chem::write::write_smiles(m),
            scorer.score(m),
        )
    });
    let mut out = header(seed, "score", &resolved);
    out.push_str("id\tsmiles\tscore\n");
    for (id, smiles, score) in scores {
        let smiles = smiles.map_err(input_err)?;
        let score = score.map_err(|e| CliError::Numeric(e.to_string()))?;
        out.push_str(&format!("{id}\t{smiles}\t{score:?}\n"));
    }
    write_output(a.output.as_ref(), &out)
}

fn cmd_calibrate(a: CalibrateArgs, seed: u64) -> Result<(), CliError> {
    let corpus = read_corpus(&a.corpus)?;
    let mols: Vec<Molecule> = corpus.into_iter().map(|(_, m)| m).collect();
    // The fragment table, when requested, feeds the calibration itself so
    // the constants match later scoring runs.
    let table = a.sa_table.as_ref().map(|_| SaTable::from_corpus(&mols));
    let cfg = calibrate(&mols, a.max_atoms, table.as_ref())
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut out = header(
        seed,
        "calibrate",
        &[("corpus".to_string(), a.corpus.display().to_string())],
    );
    out.push_str(&molopt::config::render_key_values(&cfg.to_key_values()));
    fs::write(&a.output, &out)
        .map_err(|e| input_err(format!("cannot write {}: {e}", a.output.display())))?;
    if let (Some(sa_path), Some(table)) = (&a.sa_table, &table) {
        let mut text = String::from("# env_hash<TAB>score; unseen environments score -4\n");
        text.push_str(&table.to_lines().join("\n"));
        text.push('\n');
        fs::write(sa_path, text)
            .map_err(|e| input_err(format!("cannot write {}: {e}", sa_path.display())))?;
    }
    eprintln!(
        "calibrated over {} molecules: logp {:.4}+-{:.4} sa {:.4}+-{:.4} cycle {:.4}+-{:.4}",
        mols.len(),
        cfg.logp_mean,
        cfg.logp_std,
        cfg.sa_mean,
        cfg.sa_std,
        cfg.cycle_mean,
        cfg.cycle_std
    );
    Ok(())
}

fn cmd_pairs(a: PairsArgs, seed: u64) -> Result<(), CliError> {
    let corpus = read_corpus(&a.corpus)?;
    let mols: Vec<Molecule> = corpus.into_iter().map(|(_, m)| m).collect();
    let vocab = NodeVocabulary::from_corpus(&mols).map_err(input_err)?;
    let scorer = make_scorer(&a.prop, a.calib.as_ref(), a.sa_table.as_ref())?;
    let cfg = ExtractConfig {
        sim_min: a.sim,
        delta_min: a.delta,
        node_cap: 40,
    };
    let (pairs, stats) = extract_pairs(&mols, &vocab, scorer.as_ref(), &cfg).map_err(input_err)?;

    let resolved = vec![
        ("sim".to_string(), format!("{}", a.sim)),
        ("delta".to_string(), format!("{}", a.delta)),
        ("prop".to_string(), a.prop.clone()),
        ("corpus".to_string(), a.corpus.display().to_string()),
    ];
    let mut out = header(seed, "pairs", &resolved);
    out.push_str(&format!(
        "# candidates={} sim_rejected={} prop_rejected={} multi_site={} zero_site={} replay_failed={} accepted={}\n",
        stats.candidates,
        stats.sim_rejected,
        stats.prop_rejected,
        stats.multi_site,
        stats.site_count_zero,
        stats.replay_failed,
        stats.accepted
    ));
    if a.hist {
        let hist = stats
            .site_histogram
            .iter()
            .enumerate()
            .map(|(k, c)| format!("{k}:{c}"))
            .collect::<Vec<_>>()
            .join(" ");
        out.push_str(&format!("# disconnection_site_histogram {hist}\n"));
        eprintln!("disconnection sites histogram: {hist}");
    }
    out.push_str(
        "mx_smiles\tmy_smiles\tn_d_index\tremoval_node_indices\tattach_sequence\tsim\tprop_delta\n",
    );
    for p in &pairs {
        out.push_str(&p.to_tsv_row());
        out.push('\n');
    }
    fs::write(&a.output, &out)
        .map_err(|e| input_err(format!("cannot write {}: {e}", a.output.display())))?;

    let vocab_path = a.vocab.unwrap_or_else(|| a.output.with_extension("vocab"));
    let vocab_text = vocab.entries().join("\n") + "\n";
    fs::write(&vocab_path, vocab_text)
        .map_err(|e| input_err(format!("cannot write {}: {e}", vocab_path.display())))?;
    eprintln!(
        "{} pairs extracted from {} candidates; vocabulary ({} entries) at {}",
        pairs.len(),
        stats.candidates,
        vocab.len(),
        vocab_path.display()
    );
    Ok(())
}

fn read_pairs_file(path: &Path, vocab: &NodeVocabulary) -> Result<Vec<TrainingPair>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("mx_smiles\t") {
            continue;
        }
        let p = TrainingPair::from_tsv_row(line, vocab)
            .map_err(|e| input_err(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        out.push(p);
    }
    Ok(out)
}

fn load_hyper_params(config: Option<&PathBuf>) -> Result<HyperParams, CliError> {
    let mut hp = HyperParams::default();
    let Some(path) = config else { return Ok(hp) };
    let text = fs::read_to_string(path)
        .map_err(|e| input_err(format!("cannot read {}: {e}", path.display())))?;
    for (k, v) in parse_key_values(&text).map_err(input_err)? {
        let bad = || {
            input_err(ConfigError::BadValue {
                key: k.clone(),
                value: v.clone(),
            })
        };
        match k.as_str() {
            "hidden" => hp.hidden = v.parse().map_err(|_| bad())?,
            "z_dim" => hp.z_dim = v.parse().map_err(|_| bad())?,
            "t_a" => hp.t_a = v.parse().map_err(|_| bad())?,
            "t_n" => hp.t_n = v.parse().map_err(|_| bad())?,
            "max_atoms" => hp.max_atoms = v.parse().map_err(|_| bad())?,
            "beta_init" => hp.beta_init = v.parse().map_err(|_| bad())?,
            "beta_step" => hp.beta_step = v.parse().map_err(|_| bad())?,
            "beta_every" => hp.beta_every = v.parse().map_err(|_| bad())?,
            "beta_cap" => hp.beta_cap = v.parse().map_err(|_| bad())?,
            "lr" => hp.lr = v.parse().map_err(|_| bad())?,
            "batch" => hp.batch = v.parse().map_err(|_| bad())?,
            "epochs" => hp.epochs = v.parse().map_err(|_| bad())?,
            "max_children" => hp.max_children = v.parse().map_err(|_| bad())?,
            "max_attachments" => hp.max_attachments = v.parse().map_err(|_| bad())?,
            other => return Err(input_err(ConfigError::UnknownKey(other.to_string()))),
        }
    }
    Ok(hp)
}

fn cmd_train(a: TrainArgs, seed: u64) -> Result<(), CliError> {
    let vocab = read_vocab(&a.vocab)?;
    let pairs = read_pairs_file(&a.pairs, &vocab)?;

    let (mut params, start_epoch, hp) = match &a.resume {
        None => {
            let hp = load_hyper_params(a.config.as_ref())?;
            let mut rng = Rng::derive(seed, &[0x696e6974]);
            (ModelParams::init(&hp, vocab.len(), &mut rng), 1usize, hp)
        }
        Some(ckpt_path) => {
            let file = fs::File::open(ckpt_path)
                .map_err(|e| input_err(format!("cannot open {}: {e}", ckpt_path.display())))?;
            let ck = load_checkpoint(std::io::BufReader::new(file))
                .map_err(|e| input_err(e.to_string()))?;
            if ck.vocab_hash != vocab.content_hash() {
                return Err(CliError::Mismatch(format!(
                    "checkpoint vocabulary hash {:#x} does not match {:#x} from {}",
                    ck.vocab_hash,
                    vocab.content_hash(),
                    a.vocab.display()
                )));
            }
            let hp = HyperParams::from_meta(&ck.meta);
            let done = ck.meta.get("epochs_done").copied().unwrap_or(0.0) as usize;
            let params = ModelParams {
                store: ck.params,
                hp: hp.clone(),
                vocab_size: vocab.len(),
            };
            (params, done + 1, hp)
        }
    };
    params.hp = hp.clone();

    eprintln!(
        "training on {} pairs, vocab {} entries, {}",
        pairs.len(),
        vocab.len(),
        render_hp(&hp)
    );

    let vocab_hash = vocab.content_hash();
    let out_path = a.output.clone();
    let outcome = train_model(&pairs, &vocab, &hp, seed, start_epoch, params, |epoch, p| {
        let mut meta = hp.to_meta();
        meta.insert("epochs_done".into(), epoch as f64);
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, vocab_hash, &p.store, &meta).map_err(|e| e.to_string())?;
        fs::write(&out_path, buf).map_err(|e| e.to_string())?;
        Ok(())
    })
    .map_err(|e| match e {
        TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
        other => input_err(other),
    })?;

    // A run with nothing to do still leaves a loadable checkpoint behind.
    if outcome.log.is_empty() {
        let mut meta = hp.to_meta();
        meta.insert("epochs_done".into(), (start_epoch.saturating_sub(1)) as f64);
        let mut buf = Vec::new();
        save_checkpoint(&mut buf, vocab_hash, &outcome.params.store, &meta)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        fs::write(&a.output, buf).map_err(input_err)?;
    }

    let log_path = a.log.unwrap_or_else(|| a.output.with_extension("log"));
    let mut log = header(
        seed,
        "train",
        &[("pairs".to_string(), a.pairs.display().to_string())],
    );
    log.push_str("epoch\tbatch\tbeta\tloss\tkl\tdsp\trfp\tfc\tfl\tgp\tgc\n");
    for row in &outcome.log {
        log.push_str(&format!(
            "{}\t{}\t{:?}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
            row.epoch,
            row.batch,
            row.beta,
            row.parts.total,
            row.parts.kl,
            row.parts.dsp,
            row.parts.rfp,
            row.parts.fc,
            row.parts.fl,
            row.parts.gp,
            row.parts.gc
        ));
    }
    fs::write(&log_path, log)
        .map_err(|e| input_err(format!("cannot write {}: {e}", log_path.display())))?;
    eprintln!(
        "trained through epoch {}; checkpoint at {}, log at {}",
        hp.epochs,
        a.output.display(),
        log_path.display()
    );
    Ok(())
}

fn render_hp(hp: &HyperParams) -> String {
    format!(
        "hidden={} z={} t_a={} t_n={} lr={} batch={} epochs={}",
        hp.hidden, hp.z_dim, hp.t_a, hp.t_n, hp.lr, hp.batch, hp.epochs
    )
}

fn cmd_optimize(a: OptimizeArgs, seed: u64, threads: usize) -> Result<(), CliError> {
    let corpus = read_corpus(&a.corpus)?;
    let vocab = read_vocab(&a.vocab)?;
    let file = fs::File::open(&a.model)
        .map_err(|e| input_err(format!("cannot open {}: {e}", a.model.display())))?;
    let ck =
        load_checkpoint(std::io::BufReader::new(file)).map_err(|e| input_err(e.to_string()))?;
    if ck.vocab_hash != vocab.content_hash() {
        return Err(CliError::Mismatch(format!(
            "checkpoint vocabulary hash {:#x} does not match {:#x} from {}",
            ck.vocab_hash,
            vocab.content_hash(),
            a.vocab.display()
        )));
    }
    let hp = HyperParams::from_meta(&ck.meta);
    let params = ModelParams {
        store: ck.params,
        hp: hp.clone(),
        vocab_size: vocab.len(),
    };
    let scorer = make_scorer(&a.prop, a.calib.as_ref(), a.sa_table.as_ref())?;

    let mut cfg = PipeConfig::new(a.delta, DecodeLimits::from_hp(&hp));
    cfg.k = a.k;
    cfg.max_iters = a.iters;
    cfg.beam = a.m;
    cfg.outputs = a.b;
    cfg.validate().map_err(input_err)?;

    let resolved = vec![
        ("delta".to_string(), format!("{}", a.delta)),
        ("k".to_string(), format!("{}", a.k)),
        ("iters".to_string(), format!("{}", a.iters)),
        ("multi".to_string(), format!("{}", a.multi)),
        ("m".to_string(), format!("{}", a.m)),
        ("b".to_string(), format!("{}", a.b)),
        ("prop".to_string(), a.prop.clone()),
        ("model".to_string(), a.model.display().to_string()),
    ];
    let mut out = header(seed, "optimize", &resolved);
    out.push_str("input_smiles\toutput_smiles\tscore_before\tscore_after\tsim\titerations_used\n");
    let mut trace_out = header(seed, "optimize:trace", &resolved);
    trace_out.push_str("input_smiles\titeration\tcandidate_smiles\tscore\tsim\taccepted\n");

    let mols: Vec<Molecule> = corpus.iter().map(|(_, m)| m.clone()).collect();
    if a.multi {
        let results = ordered_parallel(mols, threads, |i, m| {
            let base = Rng::derive(seed, &[0x6d6f6c, i as u64]).next_u64();
            optimize_beam(&params, &vocab, scorer.as_ref(), &cfg, m, base)
        });
        for r in results {
            let r = r.map_err(|e| CliError::Numeric(e.to_string()))?;
            for c in &r.outputs {
                out.push_str(&format!(
                    "{}\t{}\t{:?}\t{:?}\t{:?}\t{}\n",
                    r.input_smiles, c.smiles, r.input_score, c.score, c.sim, r.iterations_used
                ));
            }
            append_trace(&mut trace_out, &r);
        }
    } else {
        let report = batch_optimize(&params, &vocab, scorer.as_ref(), &cfg, &mols, seed)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        for row in &report.rows {
            out.push_str(&format!(
                "{}\t{}\t{:?}\t{:?}\t{:?}\t{}\n",
                row.input_smiles,
                row.output_smiles,
                row.score_before,
                row.score_after,
                row.sim,
                row.iterations_used
            ));
        }
        for r in &report.results {
            append_trace(&mut trace_out, r);
        }
        eprintln!(
            "optimized {} molecules: imprv {:.4}+-{:.4}, sim {:.4}+-{:.4}",
            report.rows.len(),
            report.imprv_mean,
            report.imprv_std,
            report.sim_mean,
            report.sim_std
        );
        eprintln!("iter\tin%\tp%\timprv+-std\tsim+-std");
        for s in &report.per_iteration {
            eprintln!(
                "{}\t{:.1}\t{:.1}\t{:.3}+-{:.3}\t{:.3}+-{:.3}",
                s.iteration,
                100.0 * s.entered,
                100.0 * s.improved,
                s.imprv_mean,
                s.imprv_std,
                s.sim_mean,
                s.sim_std
            );
        }
    }

    write_output(a.output.as_ref(), &out)?;
    if let Some(trace_path) = &a.trace {
        fs::write(trace_path, trace_out)
            .map_err(|e| input_err(format!("cannot write {}: {e}", trace_path.display())))?;
    }
    Ok(())
}

fn append_trace(out: &mut String, r: &molopt::pipeline::OptimResult) {
    for it in &r.iterations {
        for c in &it.decoded {
            let accepted = it.accepted.as_ref().map_or(false, |a| a.smiles == c.smiles);
            out.push_str(&format!(
                "{}\t{}\t{}\t{:?}\t{:?}\t{}\n",
                r.input_smiles, it.iteration, c.smiles, c.score, c.sim, accepted
            ));
        }
    }
}

fn cmd_stats(a: StatsArgs, seed: u64) -> Result<(), CliError> {
    let vocab = read_vocab(&a.vocab)?;
    let pairs = read_pairs_file(&a.pairs, &vocab)?;
    let stats = fragment_stats(&pairs);
    let mut out = header(
        seed,
        "stats",
        &[("pairs".to_string(), a.pairs.display().to_string())],
    );
    out.push_str(&format!(
        "# pairs={} removal_mean_atoms={:.2} attachment_mean_atoms={:.2}\n",
        stats.pairs, stats.removal_mean_atoms, stats.attachment_mean_atoms
    ));
    // Percentages round to two decimals, so a column may sum slightly
    // under 100.
    out.push_str("kind\tfragment\tcount\tpercent\n");
    let removal_total: usize = stats.removal.iter().map(|(_, c)| c).sum();
    for (frag, count) in &stats.removal {
        out.push_str(&format!(
            "removal\t{frag}\t{count}\t{:.2}\n",
            100.0 * *count as f64 / removal_total.max(1) as f64
        ));
    }
    let attach_total: usize = stats.attachment.iter().map(|(_, c)| c).sum();
    for (frag, count) in &stats.attachment {
        out.push_str(&format!(
            "attachment\t{frag}\t{count}\t{:.2}\n",
            100.0 * *count as f64 / attach_total.max(1) as f64
        ));
    }
    print!("{out}");
    Ok(())
}
