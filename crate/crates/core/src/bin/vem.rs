//! Command-line front end: baseline training, experiment runs, room
//! evaluation, frame inspection and map dumps.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use episodic_explore::harness::{
    evaluate_rooms, export_csv, room_tour_frames_for, run_trial_detailed, train_baseline,
    Condition, ExperimentConfig, MetricsTable, ModelKind, TrainOptions, TrialSetup,
};
use episodic_explore::memory::{load_weights, AutoencoderModel, SequenceWindow, WINDOW_LEN};
use episodic_explore::ssim::{ssim_sequence, SsimConfig};
use episodic_explore::world::WorldSpec;
use episodic_explore::{Error, Result};

#[derive(Parser)]
#[command(
    name = "vem",
    version,
    about = "Visual episodic memory exploration experiments"
)]
struct Cli {
    /// Plain-text `key = value` experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` overrides applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the anomaly-free baseline and write its weights file.
    TrainBaseline(TrainArgs),
    /// Run seeded trials for one or all conditions and write CSVs.
    Run(RunArgs),
    /// Score windows from tours inside every room with a trained autoencoder.
    Eval(EvalArgs),
    /// Dump camera frames (and reconstructions) from a tour inside one room.
    InspectFrames(InspectArgs),
    /// Print the world map, or the explored map after one trial.
    DumpMap(DumpArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value = "lstm")]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    corpus_ticks: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// A condition name or `all`.
    #[arg(long)]
    condition: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    vae_weights: Option<PathBuf>,
    #[arg(long)]
    dump_frames: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    windows: usize,
    #[arg(long, default_value_t = 5)]
    stride: usize,
    /// Per-window CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    room: usize,
    #[arg(long, default_value_t = WINDOW_LEN)]
    ticks: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    /// Run this trial of the configured condition and print its final map.
    #[arg(long)]
    trial: Option<usize>,
    /// Also write the trial's novelty ledger as CSV.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

fn base_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        cfg.set(k, v)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn world_spec(cfg: &ExperimentConfig) -> Result<WorldSpec> {
    match &cfg.world {
        Some(p) => WorldSpec::parse(&std::fs::read_to_string(p)?),
        None => Ok(WorldSpec::default_map()),
    }
}

fn train(cfg: &ExperimentConfig, args: &TrainArgs) -> Result<bool> {
    let kind: ModelKind = args.kind.parse()?;
    let mut opts = TrainOptions {
        seed: cfg.seed,
        learning_rate: cfg.learning_rate,
        ..TrainOptions::default()
    };
    if let Some(n) = args.max_steps {
        opts.max_steps = n;
    }
    if let Some(n) = args.corpus_ticks {
        opts.corpus_ticks = n;
    }
    let spec = world_spec(cfg)?;
    let report = train_baseline(&spec, kind, &opts, &args.out, &mut |step, median| {
        println!("step {step:>6}  held-out median SSIM {median:.4}");
    })?;
    println!(
        "{} baseline: {} steps, held-out median SSIM {:.4} (min {:.4}), {:.0} s -> {}",
        report.kind,
        report.steps,
        report.held_out_median,
        report.held_out_min,
        report.seconds,
        args.out.display()
    );
    if let Some(scale) = report.bonus_scale {
        println!("bonus scale {scale:.6e}");
    }
    if let Err(e) = report.check() {
        eprintln!("error: {e}");
        return Ok(false);
    }
    Ok(true)
}

fn run(mut cfg: ExperimentConfig, args: &RunArgs) -> Result<bool> {
    if let Some(n) = args.trials {
        cfg.trials = n;
    }
    if let Some(n) = args.ticks {
        cfg.tick_budget = n;
    }
    if let Some(p) = &args.out {
        cfg.output_dir = p.clone();
    }
    if let Some(p) = &args.weights {
        cfg.baseline_weights = Some(p.clone());
    }
    if let Some(p) = &args.vae_weights {
        cfg.vae_weights = Some(p.clone());
    }
    cfg.dump_frames |= args.dump_frames;
    let conditions: Vec<Condition> = match args.condition.as_deref() {
        Some("all") => Condition::ALL.to_vec(),
        Some(c) => vec![c.parse()?],
        None => vec![cfg.condition],
    };
    let mut tables = Vec::new();
    let mut clean = true;
    for c in conditions {
        let cfg = ExperimentConfig {
            condition: c,
            ..cfg.clone()
        };
        let result = episodic_explore::harness::run_experiment(&cfg)?;
        export_csv(&result.records, &result.metrics, &cfg.output_dir)?;
        let m = &result.metrics;
        println!(
            "{:<15} trials {:>2}  aborted {}  anomaly rooms {:>3}  other rooms {:>3}  anomaly fraction {:.3}",
            c,
            m.trials,
            m.aborted,
            m.anomaly_rooms,
            m.non_anomaly_rooms,
            m.anomaly_fraction()
        );
        for r in result.records.iter().filter(|r| r.aborted.is_some()) {
            eprintln!(
                "trial {} aborted: {}",
                r.trial,
                r.aborted.as_deref().unwrap_or("")
            );
        }
        clean &= m.aborted == 0;
        tables.push(result.metrics);
    }
    if tables.len() > 1 {
        write_comparisons(&tables, &cfg.output_dir)?;
    }
    Ok(clean)
}

/// Two-proportion tests of every condition against the frontier baseline.
fn write_comparisons(tables: &[MetricsTable], dir: &std::path::Path) -> Result<()> {
    let Some(base) = tables.iter().find(|t| t.condition == Condition::Frontier) else {
        return Ok(());
    };
    let mut w = csv::Writer::from_writer(File::create(dir.join("comparisons.csv"))?);
    w.write_record(["condition", "baseline", "z", "p_value"])?;
    for t in tables.iter().filter(|t| t.condition != Condition::Frontier) {
        let test = t.test_against(base);
        println!(
            "{} vs frontier: z = {:.3}, p = {:.4}",
            t.condition, test.z, test.p_value
        );
        w.write_record([
            t.condition.to_string(),
            base.condition.to_string(),
            format!("{:.16e}", test.z),
            format!("{:.16e}", test.p_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn load_model(cfg: &ExperimentConfig, weights: &Option<PathBuf>) -> Result<AutoencoderModel> {
    let path = weights
        .clone()
        .or_else(|| cfg.baseline_weights.clone())
        .ok_or_else(|| {
            Error::Config("no autoencoder weights given (--weights or baseline_weights)".into())
        })?;
    load_weights(&path)
}

fn eval(cfg: &ExperimentConfig, args: &EvalArgs) -> Result<bool> {
    let model = load_model(cfg, &args.weights)?;
    let spec = world_spec(cfg)?;
    let ssim = SsimConfig::default();
    let score = |w: &SequenceWindow| ssim_sequence(w, &model.reconstruct(w)?, &ssim);
    let ev = evaluate_rooms(&spec, cfg.seed, args.windows, args.stride, &score)?;
    for (tag, s) in ev.per_tag() {
        println!(
            "{:<15} mean {:.4}  std {:.4}  windows {}",
            tag, s.mean, s.std, s.count
        );
    }
    if let Some(p) = &args.out {
        let mut w = csv::Writer::from_writer(File::create(p)?);
        w.write_record(["room", "tag", "window", "score"])?;
        for r in &ev.rooms {
            for (i, s) in r.scores.iter().enumerate() {
                w.write_record([
                    r.room.to_string(),
                    r.tag.to_string(),
                    i.to_string(),
                    format!("{s:.16e}"),
                ])?;
            }
        }
        w.flush()?;
    }
    Ok(true)
}

fn inspect(cfg: &ExperimentConfig, args: &InspectArgs) -> Result<bool> {
    let spec = world_spec(cfg)?;
    let frames = room_tour_frames_for(&spec, cfg.seed, args.room, args.ticks.max(WINDOW_LEN))?;
    std::fs::create_dir_all(&args.out)?;
    for (i, f) in frames.iter().enumerate() {
        f.write_pgm(&args.out.join(format!("frame_{i:05}.pgm")))?;
    }
    if args.weights.is_some() || cfg.baseline_weights.is_some() {
        let model = load_model(cfg, &args.weights)?;
        let ssim = SsimConfig::default();
        for (k, chunk) in frames.chunks_exact(WINDOW_LEN).enumerate() {
            let window = SequenceWindow::new(chunk.to_vec(), (k * WINDOW_LEN) as u64)?;
            let recon = model.reconstruct(&window)?;
            for (i, f) in recon.frames().iter().enumerate() {
                f.write_pgm(
                    &args
                        .out
                        .join(format!("recon_{:05}.pgm", k * WINDOW_LEN + i)),
                )?;
            }
            println!(
                "window {k}: SSIM {:.4}",
                ssim_sequence(&window, &recon, &ssim)?
            );
        }
    }
    println!("{} frames -> {}", frames.len(), args.out.display());
    Ok(true)
}

fn dump_map(cfg: &ExperimentConfig, args: &DumpArgs) -> Result<bool> {
    let Some(trial) = args.trial else {
        print!("{}", world_spec(cfg)?.to_map_text());
        return Ok(true);
    };
    let setup = TrialSetup::load(cfg)?;
    let run = run_trial_detailed(&setup, trial)?;
    let last = run.record.ticks.last();
    let robot = last.map(|t| run.grid.world_to_cell(t.x, t.y));
    print!(
        "{}",
        run.grid.to_text_annotated(
            robot,
            &run.record.decisions.iter().map(|d| d.1).collect::<Vec<_>>()
        )
    );
    println!(
        "rooms explored: {} anomaly, {} other; ticks {}",
        run.record.anomaly_rooms,
        run.record.non_anomaly_rooms,
        run.record.ticks.len()
    );
    if let Some(p) = &args.ledger {
        run.ledger.write_csv(File::create(p)?)?;
    }
    Ok(run.record.aborted.is_none())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = base_config(&cli).and_then(|cfg| match &cli.command {
        Command::TrainBaseline(a) => train(&cfg, a),
        Command::Run(a) => run(cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::InspectFrames(a) => inspect(&cfg, a),
        Command::DumpMap(a) => dump_map(&cfg, a),
    });
    let _ = std::io::stdout().flush();
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
