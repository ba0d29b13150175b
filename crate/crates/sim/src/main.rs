use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use isac_core::nn::Clrnet;
use isac_core::predictors::Method;
use isac_sim::checkpoint::{Checkpoint, TrainingMetadata};
use isac_sim::experiment::{generate_examples, train_model, PredictionSet, SweepOutput, TrainedModel};
use isac_sim::results::{write_manifest, write_sweep};
use isac_sim::{gradcheck, ExperimentConfig};

#[derive(Parser)]
#[command(name = "isac-sim", version, about = "Predictive beamforming experiments for vehicular ISAC")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set realizations=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// 2000 realizations and 10000 training examples.
    #[arg(long, global = true)]
    paper_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a training set as CSV.
    GenData {
        #[arg(long)]
        nmse: Option<f64>,
    },
    /// Train a CLRNet and save a checkpoint.
    Train {
        #[arg(long)]
        nmse: Option<f64>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate every method at one NMSE and power.
    Eval {
        #[arg(long)]
        nmse: Option<f64>,
        #[arg(long)]
        power_dbm: Option<f64>,
        /// Trained network; one is trained when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sum rate against sensing NMSE.
    SweepNmse,
    /// Sum rate against total transmit power.
    SweepPower {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
}

fn resolve(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if common.paper_scale {
        cfg = cfg.paper_scale();
    }
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    for o in &common.overrides {
        let (k, v) = o.split_once('=').with_context(|| format!("`--set {o}` is not KEY=VALUE"))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn checkpoint_of(t: &TrainedModel, cfg: &ExperimentConfig) -> Checkpoint {
    Checkpoint {
        arch: t.model.arch,
        params: t.model.params.clone(),
        meta: TrainingMetadata {
            seed: cfg.seed,
            nmse: t.nmses.clone(),
            iterations: t.outcome.iterations,
            best_iteration: t.outcome.best_iteration,
            extra: [
                ("train_examples".to_owned(), t.outcome.train_examples.to_string()),
                ("final_train_loss".to_owned(), t.outcome.final_train_loss.to_string()),
            ]
            .into_iter()
            .collect(),
        },
    }
}

fn load_model(path: &Path, cfg: &ExperimentConfig) -> Result<Clrnet> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    if ck.arch != cfg.arch() {
        bail!("checkpoint architecture {:?} does not match the configuration {:?}", ck.arch, cfg.arch());
    }
    Ok(Clrnet {
        arch: ck.arch,
        params: ck.params,
    })
}

fn write_traces(dir: &Path, stem: &str, t: &TrainedModel) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.trace.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["iteration", "batch_loss", "validation_loss"])?;
    let mut val = t.outcome.validation_trace.iter().peekable();
    for (i, l) in t.outcome.loss_trace.iter().enumerate() {
        let it = i + 1;
        let v = match val.peek() {
            Some((vi, vl)) if *vi == it => {
                let s = vl.to_string();
                val.next();
                s
            }
            _ => String::new(),
        };
        w.write_record([it.to_string(), l.to_string(), v])?;
    }
    w.flush()?;
    Ok(path)
}

fn save_models(dir: &Path, cfg: &ExperimentConfig, out: &SweepOutput) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for t in &out.models {
        let tag: Vec<String> = t.nmses.iter().map(|r| r.to_string()).collect();
        let stem = if t.nmses.len() == 1 {
            format!("clrnet_nmse{}", tag[0])
        } else {
            "clrnet_mixed".to_owned()
        };
        let path = dir.join(format!("{stem}.ckpt"));
        checkpoint_of(t, cfg).save(&path)?;
        files.push(path);
    }
    Ok(files)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.common)?;
    let dir = cli.common.out_dir.as_path();
    std::fs::create_dir_all(dir)?;
    let started = Instant::now();
    match cli.command {
        Command::GenData { nmse } => {
            let nmse = nmse.unwrap_or(cfg.nmse);
            let data = generate_examples(&cfg, &[nmse])?;
            let path = dir.join("dataset.csv");
            let mut w = csv::Writer::from_path(&path)?;
            let mut header = vec!["example".to_owned(), "vehicle".to_owned(), "label".to_owned()];
            header.extend((0..cfg.window).map(|j| format!("lag{j}")));
            w.write_record(&header)?;
            for (i, ex) in data.iter().enumerate() {
                for k in 0..cfg.num_vehicles {
                    let mut rec = vec![i.to_string(), k.to_string(), ex.label[k].to_string()];
                    rec.extend((0..cfg.window).map(|j| ex.input.get(k, j).to_string()));
                    w.write_record(&rec)?;
                }
            }
            w.flush()?;
            write_manifest(dir, "gen-data", &cfg, std::slice::from_ref(&path), &[format!("nmse = {nmse}")])?;
            println!("wrote {} examples to {}", data.len(), path.display());
        }
        Command::Train { nmse, checkpoint } => {
            let nmse = nmse.unwrap_or(cfg.nmse);
            let t = train_model(&cfg, &[nmse])?;
            let path = checkpoint.unwrap_or_else(|| dir.join(format!("clrnet_nmse{nmse}.ckpt")));
            checkpoint_of(&t, &cfg).save(&path)?;
            let trace = write_traces(dir, &format!("clrnet_nmse{nmse}"), &t)?;
            write_manifest(dir, "train", &cfg, &[path.clone(), trace], &[format!("nmse = {nmse}")])?;
            println!(
                "trained {} iterations (best {}), train loss {:.3e} -> {:.3e}; saved {}",
                t.outcome.iterations,
                t.outcome.best_iteration,
                t.outcome.initial_train_loss,
                t.outcome.final_train_loss,
                path.display()
            );
        }
        Command::Eval {
            nmse,
            power_dbm,
            checkpoint,
        } => {
            let nmse = nmse.unwrap_or(cfg.nmse);
            let power = power_dbm.unwrap_or(cfg.power_dbm);
            let model = match checkpoint {
                Some(p) => load_model(&p, &cfg)?,
                None => train_model(&cfg, &[nmse])?.model,
            };
            let set = PredictionSet::build(&cfg, nmse, &Method::ALL, Some(&model))?;
            let rows = set.summarize(&cfg, power)?;
            let csv = write_sweep(dir, "eval", &rows, &cfg)?;
            let mut notes = Vec::new();
            for m in Method::ALL {
                notes.push(format!("rmse_{} = {}", m.tag(), set.rmse(m)?));
            }
            write_manifest(dir, "eval", &cfg, &[csv], &notes)?;
            for r in &rows {
                println!(
                    "{:<12} mean {:.4} std {:.4}  rmse {:.3e}",
                    r.method.tag(),
                    r.mean_sum_rate,
                    r.std_sum_rate,
                    set.rmse(r.method)?
                );
            }
        }
        Command::SweepNmse => {
            let out = isac_sim::sweep_nmse(&cfg)?;
            let mut files = vec![write_sweep(dir, "sweep_nmse", &out.results, &cfg)?];
            files.extend(save_models(dir, &cfg, &out)?);
            write_manifest(dir, "sweep-nmse", &cfg, &files, &[])?;
            println!("wrote {}", files[0].display());
        }
        Command::SweepPower { checkpoint } => {
            let model = checkpoint.as_deref().map(|p| load_model(p, &cfg)).transpose()?;
            let out = isac_sim::sweep_power(&cfg, model.as_ref())?;
            let mut files = vec![write_sweep(dir, "sweep_power", &out.results, &cfg)?];
            files.extend(save_models(dir, &cfg, &out)?);
            write_manifest(dir, "sweep-power", &cfg, &files, &[])?;
            println!("wrote {}", files[0].display());
        }
        Command::Gradcheck { trials, tolerance } => {
            let checks = gradcheck::check_many(&cfg.arch(), trials, cfg.seed)?;
            let worst = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
            for c in &checks {
                println!("trial {:>3}: {} params, max relative error {:.3e}", c.trial, c.params_checked, c.max_rel_error);
            }
            println!("worst {worst:.3e} (tolerance {tolerance:.0e})");
            if worst >= tolerance {
                bail!("gradient check failed");
            }
        }
    }
    eprintln!("done in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
