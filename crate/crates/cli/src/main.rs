use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nnd_core::decoders::param_count;
use nnd_core::harness::{
    check_target, codebook_ber, make_training_subset, nnd_ber, run_experiment, select_training_snr,
    time_per_sample, train_from, Checkpoint, Direction, ExperimentConfig, GradCheckSetup,
    GradTarget, Restrict, TrainSetup,
};
use nnd_core::map_oracle::map_ber_with_book;
use nnd_core::rng::{self, derive_seed};
use nnd_core::{
    ArchKind, ArchitectureSpec, Codebook, Error, NetworkModel, PolarCode, RealVector, Result,
};
use serde_json::json;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Train, evaluate and time neural network decoders for short polar codes.
#[derive(Parser)]
#[command(name = "nnd-bench", version)]
struct Cli {
    /// Root seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores). Outputs depend only on the seed.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for result files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON); unspecified fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Defaults to N/2 when only --n is given.
    #[arg(long)]
    k: Option<usize>,
    /// Training steps (mini-batches).
    #[arg(long)]
    steps: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment grid and write report.json plus CSV tables.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train one decoder; writes model.json, checkpoint.json, loss.csv and ber_vs_step.csv.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        arch: ArchKind,
        /// Fraction of the codebook used for training.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Training Eb/N0 in dB; omit to train without noise.
        #[arg(long, allow_negative_numbers = true)]
        rho_db: Option<f64>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Monte-Carlo BER of a trained model; prints CSV `ebn0_db,ber`.
    EvalBer {
        #[arg(long)]
        model: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        ebn0_list: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Draw test words only from the training subset of this fraction.
        #[arg(long)]
        subset_p: Option<f64>,
    },
    /// Monte-Carlo BER of exhaustive MAP decoding; prints CSV `ebn0_db,ber`.
    MapBer {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        ebn0_list: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Pick the training SNR with the lowest normalised validation error.
    Nve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        arch: ArchKind,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
    },
    /// Median per-sample forward and backward time; prints CSV.
    Time {
        #[arg(long)]
        arch: ArchKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
    /// Finite-difference gradient check of layers and full decoders.
    Gradcheck {
        /// dense, conv, pool, lstm, mlp, cnn, rnn or all.
        #[arg(long, default_value = "all")]
        target: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        rnn_hidden: usize,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// Maximum accepted relative error.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Weight counts of a decoder as JSON.
    ParamCount {
        #[arg(long)]
        arch: ArchKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Information positions and codebook size of a polar code as JSON.
    CodeInfo {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Decode one received vector with a trained model.
    Decode {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated received values.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        y: Vec<f64>,
    },
}

enum Outcome {
    Done,
    Partial,
    Failed(u8),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(EXIT_PARTIAL),
        Ok(Outcome::Failed(code)) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Numerical(_) => EXIT_NUMERICAL,
                _ => EXIT_CONFIG,
            })
        }
    }
}

fn half_rate_k(n: usize, k: Option<usize>) -> usize {
    k.unwrap_or(n / 2)
}

fn load_config(cli: &Cli, args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = args.n {
        cfg.n = n;
        cfg.k = half_rate_k(n, args.k);
    } else if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(steps) = args.steps {
        cfg.max_steps = steps;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn csv_line(out: &mut String, fields: &[&dyn std::fmt::Display]) {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{f}").unwrap();
    }
    out.push('\n');
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome> {
    let seed = cli.seed.unwrap_or(1);
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let report = run_experiment(&cfg, &cli.out_dir)?;
            for cell in &report.incomplete {
                eprintln!(
                    "incomplete: {} p={} rho={:?}: {}",
                    cell.arch, cell.p, cell.rho_t_db, cell.error
                );
            }
            Ok(if report.is_complete() {
                Outcome::Done
            } else {
                Outcome::Partial
            })
        }
        Command::Train {
            cfg,
            arch,
            p,
            rho_db,
            resume,
        } => {
            let cfg = load_config(cli, cfg)?;
            train_command(&cfg, &cli.out_dir, *arch, *p, *rho_db, resume.as_deref())
        }
        Command::EvalBer {
            model,
            ebn0_list,
            samples,
            subset_p,
        } => {
            let model = NetworkModel::load(model)?;
            let book = Codebook::enumerate(&PolarCode::construct(model.spec.n, model.spec.k)?)?;
            let subset = match subset_p {
                Some(p) => Some(make_training_subset(
                    &book,
                    *p,
                    derive_seed(seed, rng::domain::SUBSET),
                )?),
                None => None,
            };
            let restrict = subset.as_ref().map_or(Restrict::Full, Restrict::Subset);
            let mut out = String::from("ebn0_db,ber\n");
            for (i, &snr) in ebn0_list.iter().enumerate() {
                let ber = nnd_ber(
                    &model,
                    &book,
                    snr,
                    *samples,
                    derive_seed(seed, i as u64),
                    restrict,
                )?;
                csv_line(&mut out, &[&snr, &ber]);
            }
            print!("{out}");
            Ok(Outcome::Done)
        }
        Command::MapBer {
            n,
            k,
            ebn0_list,
            samples,
        } => {
            let book = Codebook::enumerate(&PolarCode::construct(*n, *k)?)?;
            let mut out = String::from("ebn0_db,ber\n");
            for (i, &snr) in ebn0_list.iter().enumerate() {
                let ber = map_ber_with_book(&book, snr, *samples, derive_seed(seed, i as u64))?;
                csv_line(&mut out, &[&snr, &ber]);
            }
            print!("{out}");
            Ok(Outcome::Done)
        }
        Command::Nve { cfg, arch, p } => {
            let cfg = load_config(cli, cfg)?;
            let selection = select_training_snr(&cfg.arch_spec(*arch), *p, &cfg)?;
            selection.model.save(&{
                std::fs::create_dir_all(&cli.out_dir)?;
                cli.out_dir.join("model.json")
            })?;
            let mut out = String::from("arch,p,rho_t_db,nve\n");
            for row in &selection.table {
                let nve = row.nve.map_or_else(|| "nan".to_string(), |v| v.to_string());
                csv_line(&mut out, &[&row.arch, &row.p, &row.rho_t_db, &nve]);
            }
            write_file(&cli.out_dir, "nve.csv", &out)?;
            println!(
                "{}",
                json!({ "arch": arch.as_str(), "p": p, "rho_t_db": selection.rho_t_db, "table": selection.table })
            );
            Ok(Outcome::Done)
        }
        Command::Time { arch, n, k, reps } => {
            let spec = ArchitectureSpec::new(*arch, *n, half_rate_k(*n, *k));
            let model = NetworkModel::build(&spec, &mut rng::stream(seed, rng::domain::INIT, 0))?;
            let mut out = String::from("arch,n,direction,us_per_sample\n");
            for direction in [Direction::Forward, Direction::Backward] {
                let us = time_per_sample(&model, direction, *reps)?;
                csv_line(&mut out, &[arch, n, &direction, &us]);
            }
            print!("{out}");
            Ok(Outcome::Done)
        }
        Command::Gradcheck {
            target,
            n,
            rnn_hidden,
            h,
            tol,
        } => {
            let targets = if target.eq_ignore_ascii_case("all") {
                GradTarget::ALL.to_vec()
            } else {
                vec![target.parse()?]
            };
            let setup = GradCheckSetup {
                n: *n,
                k: n / 2,
                h: *h,
                rnn_hidden: *rnn_hidden,
                seed,
                ..GradCheckSetup::default()
            };
            let mut out = String::from("target,max_relative_error,max_abs_error,checked,pass\n");
            let mut all_pass = true;
            for t in targets {
                let report = check_target(t, &setup)?;
                let pass = report.max_relative_error < *tol;
                all_pass &= pass;
                let rel = format!("{:.3e}", report.max_relative_error);
                let abs = format!("{:.3e}", report.max_abs_error);
                csv_line(&mut out, &[&t, &rel, &abs, &report.checked, &pass]);
            }
            print!("{out}");
            Ok(if all_pass {
                Outcome::Done
            } else {
                Outcome::Failed(EXIT_NUMERICAL)
            })
        }
        Command::ParamCount { arch, n, k } => {
            let k = half_rate_k(*n, *k);
            let count = param_count(&ArchitectureSpec::new(*arch, *n, k))?;
            println!(
                "{}",
                json!({
                    "arch": arch.as_str(),
                    "n": n,
                    "k": k,
                    "weights_only": count.weights_only,
                    "total_with_biases": count.total_with_biases,
                })
            );
            Ok(Outcome::Done)
        }
        Command::CodeInfo { n, k } => {
            let code = PolarCode::construct(*n, *k)?;
            println!(
                "{}",
                json!({
                    "n": n,
                    "k": k,
                    "info_positions": code.info_positions(),
                    "frozen_positions": code.frozen_positions(),
                    "codebook_size": 1u64 << k,
                })
            );
            Ok(Outcome::Done)
        }
        Command::Decode { model, y } => {
            let model = NetworkModel::load(model)?;
            let bits = model.decode(&RealVector::new(y.clone())?)?;
            println!("{bits}");
            Ok(Outcome::Done)
        }
    }
}

fn train_command(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    arch: ArchKind,
    p: f64,
    rho_db: Option<f64>,
    resume: Option<&Path>,
) -> Result<Outcome> {
    let book = Codebook::enumerate(&PolarCode::construct(cfg.n, cfg.k)?)?;
    let subset = make_training_subset(&book, p, derive_seed(cfg.seed, rng::domain::SUBSET))?;
    let mut ckpt = match resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if ckpt.model.spec != cfg.arch_spec(arch) {
                return Err(Error::Config(
                    "checkpoint architecture differs from the requested one".into(),
                ));
            }
            ckpt
        }
        None => {
            let model = NetworkModel::build(
                &cfg.arch_spec(arch),
                &mut rng::stream(cfg.seed, rng::domain::INIT, 0),
            )?;
            Checkpoint::new(model, cfg.adam)
        }
    };
    let setup = TrainSetup {
        rho_t_db: rho_db,
        batch_size: cfg.batch_size,
        num_train_samples: cfg.num_train_samples,
        seed: cfg.seed,
    };
    let rho = rho_db.map_or_else(|| "inf".to_string(), |r| r.to_string());
    let mut steps = String::from("arch,p,rho_t_db,step,ber_train_subset,ber_full\n");
    let trained = train_from(&mut ckpt, &subset, &book, &setup, cfg.max_steps, |ck| {
        let sub = codebook_ber(&ck.model, &book, Some(&subset.indices))?;
        let full = codebook_ber(&ck.model, &book, None)?;
        csv_line(&mut steps, &[&arch, &p, &rho, &ck.step(), &sub, &full]);
        Ok(())
    });
    std::fs::create_dir_all(out_dir)?;
    let loss = match trained {
        Ok(loss) => loss,
        Err(e @ Error::Numerical(_)) => {
            ckpt.save(&out_dir.join("checkpoint.diverged.json"))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let mut loss_csv = String::from("step,loss\n");
    for point in &loss {
        csv_line(&mut loss_csv, &[&point.step, &point.loss]);
    }
    write_file(out_dir, "loss.csv", &loss_csv)?;
    write_file(out_dir, "ber_vs_step.csv", &steps)?;
    ckpt.save(&out_dir.join("checkpoint.json"))?;
    ckpt.model.save(&out_dir.join("model.json"))?;
    Ok(Outcome::Done)
}
