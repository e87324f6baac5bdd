use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rankcf::data::{InteractionDataset, Split, SyntheticConfig, TsvFormat};
use rankcf::eval::{evaluate, full_table_srank, MetricReport};
use rankcf::linalg::DenseMatrix;
use rankcf::losses::{LossSpec, DEFAULT_SSM_K};
use rankcf::model::EmbeddingModel;
use rankcf::theory::{self, AngleConfig, ToyLoss};
use rankcf::trainer::{run_training, TrainConfig, VAL_K};
use rankcf::Error;
use serde::Serialize;

mod config_file;

#[derive(Parser, Debug)]
#[command(name = "rankcf", version, about = "Matrix-factorization training and spectral-dynamics experiments")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write metrics, checkpoint and summary.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test (or validation) split.
    Eval(EvalArgs),
    /// Run a theory experiment and write its trace.
    #[command(subcommand)]
    Theory(TheoryCommand),
    /// Write the bundled block-structured synthetic dataset.
    GenSynthetic(GenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossArg {
    Bpr,
    Ssm,
    Directau,
    Align,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Pairs,
    Rated,
}

impl From<FormatArg> for TsvFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Pairs => TsvFormat::TsvPairs,
            FormatArg::Rated => TsvFormat::TsvRated,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Interaction file, one `user<TAB>item[...]` per line.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "pairs")]
    format: FormatArg,
    /// Train/validation/test ratios.
    #[arg(long, default_value = "0.8,0.1,0.1", value_parser = parse_ratios)]
    split: (f64, f64, f64),
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Start with the stable-rank warm-up phase.
    #[arg(long)]
    warm_start: bool,
    /// Uniformity weight for DirectAU.
    #[arg(long)]
    gamma: Option<f64>,
    /// Stable-rank weight during warm start.
    #[arg(long)]
    gamma_sr: Option<f64>,
    /// Negatives per positive for SSM.
    #[arg(long, default_value_t = DEFAULT_SSM_K)]
    k: usize,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    wd: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Patience that ends the warm-start phase.
    #[arg(long)]
    warm_patience: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Seeds the split, initialization and sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Leave wall times out of the outputs so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = VAL_K)]
    k: usize,
    /// Evaluate on the validation split instead of the test split.
    #[arg(long)]
    val: bool,
}

#[derive(Subcommand, Debug)]
enum TheoryCommand {
    /// Rank collapse of unnormalized rows pulled toward one item.
    Align {
        #[arg(long, default_value_t = 50)]
        r: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Stable-rank recovery under uniformity from a rank-2 angular grid.
    Uniform {
        #[arg(long, default_value_t = 16)]
        r: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = theory::DEFAULT_UNIFORM_ETA)]
        eta: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Angle between uniformity and stable-rank gradients during uniformity descent.
    Angles {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        d: usize,
        /// Pairwise angle bound of the initial cluster, in degrees.
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 150)]
        steps: usize,
        #[arg(long, default_value_t = 0.05)]
        eta: f64,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Three vectors on the unit circle under uniformity or stable rank.
    Circle {
        #[arg(long, value_enum, default_value = "both")]
        loss: CircleLoss,
        #[arg(long, default_value_t = theory::DEFAULT_TOY_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = theory::DEFAULT_TOY_ETA)]
        eta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Best rank-d truncation error against the tail singular values.
    Eckart {
        #[arg(long, default_value_t = 6)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        cols: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CircleLoss {
    Uniformity,
    Srank,
    Both,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value = "data/synthetic.tsv")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    loss: &'a str,
    warm_start: bool,
    seed: u64,
    n_users: usize,
    n_items: usize,
    dim: usize,
    lr: f64,
    weight_decay: f64,
    batch_size: usize,
    best_epoch: usize,
    epochs_run: usize,
    stopped_early: bool,
    switch_epoch: Option<usize>,
    best_val_ndcg20: f64,
    test_recall20: f64,
    test_ndcg20: f64,
    srank_user: f64,
    srank_item: f64,
    wall_seconds: Option<f64>,
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err("expected three comma-separated ratios".into()),
    }
}

fn load_split(args: &DataArgs, seed: u64) -> rankcf::Result<InteractionDataset> {
    InteractionDataset::load(&args.data, args.format.into())?.split(args.split, seed)
}

fn create_dir(dir: &Path) -> rankcf::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> rankcf::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn train(args: TrainArgs) -> rankcf::Result<()> {
    let spec = match args.loss {
        LossArg::Bpr => LossSpec::Bpr,
        LossArg::Ssm => LossSpec::Ssm { k: args.k },
        LossArg::Directau => LossSpec::DirectAu {
            gamma: args.gamma.unwrap_or(rankcf::losses::DEFAULT_DIRECTAU_GAMMA),
        },
        LossArg::Align => LossSpec::AlignOnly,
    };
    let mut cfg = TrainConfig::new(spec);
    cfg.warm_start = args.warm_start;
    cfg.seed = args.seed;
    cfg.record_timing = !args.no_timing;
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => { $(if let Some(v) = args.$arg { cfg.$field = v; })* };
    }
    set!(lr <- lr, weight_decay <- wd, batch_size <- batch_size, dim <- dim, max_epochs <- epochs,
         patience <- patience, gamma_sr <- gamma_sr, warm_patience <- warm_patience, eval_every <- eval_every);
    cfg.validate()?;

    let ds = load_split(&args.data, args.seed)?;
    let outcome = run_training(&ds, &cfg)?;
    create_dir(&args.out)?;
    rankcf::trainer::save_jsonl(args.out.join("metrics.jsonl"), &outcome.metrics)?;
    outcome
        .best_model
        .save(args.out.join("checkpoint.bin"), outcome.best_epoch as u64)?;

    let test = evaluate(&outcome.best_model, &ds, Split::Test, VAL_K)?;
    let (srank_user, srank_item) = full_table_srank(&outcome.best_model)?;
    let summary = Summary {
        loss: cfg.loss_spec.name(),
        warm_start: cfg.warm_start,
        seed: cfg.seed,
        n_users: ds.n_users(),
        n_items: ds.n_items(),
        dim: cfg.dim,
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        batch_size: cfg.batch_size,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.metrics.len(),
        stopped_early: outcome.stopped_early,
        switch_epoch: outcome.switch_epoch,
        best_val_ndcg20: outcome.best_val_ndcg,
        test_recall20: test.recall_at_k,
        test_ndcg20: test.ndcg_at_k,
        srank_user,
        srank_item,
        wall_seconds: cfg.record_timing.then_some(outcome.train_seconds),
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    println!(
        "{}: best epoch {} of {}, test NDCG@20 {:.4}, Recall@20 {:.4}, srank user {:.2} item {:.2}",
        summary.loss, summary.best_epoch, summary.epochs_run, summary.test_ndcg20, summary.test_recall20, srank_user, srank_item
    );
    Ok(())
}

fn eval(args: EvalArgs) -> rankcf::Result<()> {
    let (model, _) = EmbeddingModel::load(&args.checkpoint)?;
    let ds = load_split(&args.data, model.seed)?;
    let split = if args.val { Split::Val } else { Split::Test };
    let report: MetricReport = evaluate(&model, &ds, split, args.k)?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn traces_dir(out: &Path) -> rankcf::Result<PathBuf> {
    let dir = out.join("traces");
    create_dir(&dir)?;
    Ok(dir)
}

fn run_theory(cmd: TheoryCommand) -> rankcf::Result<()> {
    match cmd {
        TheoryCommand::Align { r, d, eta, steps, seed, out } => {
            let tr = theory::simulate_alignment_collapse(r, d, eta, steps, seed)?;
            let path = traces_dir(&out)?.join(format!("align_seed{seed}.csv"));
            tr.save_csv(&path)?;
            let last = tr.records.last().expect("step 0 is always recorded");
            let gap = tr.records.iter().map(|s| s.closed_form_gap).fold(0.0, f64::max);
            println!(
                "align: stable rank {:.6} -> {:.6}, max closed-form gap {gap:.2e}; wrote {}",
                tr.records[0].stable_rank,
                last.stable_rank,
                path.display()
            );
        }
        TheoryCommand::Uniform { r, d, epsilon, eta, steps, seed, out } => {
            let tr = theory::simulate_uniformity_recovery(r, d, epsilon, eta, steps, seed)?;
            let path = traces_dir(&out)?.join(format!("uniform_seed{seed}.csv"));
            tr.save_csv(&path)?;
            let (first, last) = (&tr.records[0], tr.records.last().expect("step 0 is always recorded"));
            println!(
                "uniform: kappa(U) {:.3} vs kappa(dU) {:.3} at step 0, stable rank {:.4} -> {:.4}; wrote {}",
                first.kappa_u,
                first.kappa_du,
                first.stable_rank,
                last.stable_rank,
                path.display()
            );
        }
        TheoryCommand::Angles { n, d, theta, steps, eta, seeds, seed, out } => {
            let dir = traces_dir(&out)?;
            for s in seed..seed + seeds {
                let cfg = AngleConfig { n, d, theta_deg: theta, steps, eta, seed: s };
                let tr = theory::gradient_angle_experiment(&cfg)?;
                let path = dir.join(format!("angles_seed{s}.csv"));
                tr.save_csv(&path)?;
                let skipped: usize = tr.records.iter().map(|r| r.undefined).sum();
                println!(
                    "angles seed {s}: mean rho {:.3} -> {:.3} deg, {skipped} undefined; wrote {}",
                    tr.records[0].mean_rho,
                    tr.records.last().expect("step 0 is always recorded").mean_rho,
                    path.display()
                );
            }
        }
        TheoryCommand::Circle { loss, steps, eta, seed, out } => {
            let dir = traces_dir(&out)?;
            let losses: &[(ToyLoss, &str)] = match loss {
                CircleLoss::Uniformity => &[(ToyLoss::Uniformity, "uniformity")],
                CircleLoss::Srank => &[(ToyLoss::StableRank, "srank")],
                CircleLoss::Both => &[(ToyLoss::Uniformity, "uniformity"), (ToyLoss::StableRank, "srank")],
            };
            for &(l, name) in losses {
                let tr = theory::toy_circle_experiment(l, steps, eta, seed)?;
                let path = dir.join(format!("circle_{name}_seed{seed}.csv"));
                tr.save_csv(&path)?;
                let last = tr.records.last().expect("step 0 is always recorded");
                println!(
                    "circle {name}: final angles {:.2} {:.2} {:.2}, stable rank {:.4}; wrote {}",
                    last.angle_01,
                    last.angle_02,
                    last.angle_12,
                    last.stable_rank,
                    path.display()
                );
            }
        }
        TheoryCommand::Eckart { rows, cols, d, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let e = DenseMatrix::random_normal(rows, cols, &mut rng);
            let report = theory::eckart_young_check(&e, d)?;
            println!("{}", serde_json::to_string(&report)?);
            let gap = (report.error_sq - report.tail_sq).abs();
            if gap > 1e-8 || report.factor_gap > 1e-8 {
                return Err(Error::Eval(format!("identity violated: gap {gap:e}")));
            }
        }
    }
    Ok(())
}

fn gen_synthetic(args: GenArgs) -> rankcf::Result<()> {
    let mut cfg = SyntheticConfig::default();
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let n = cfg.write_tsv(&args.out)?;
    println!("wrote {n} interactions to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let argv = match config_file::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Theory(t) => run_theory(t),
        Command::GenSynthetic(a) => gen_synthetic(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
