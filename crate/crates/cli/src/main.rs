use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use erbp_core::harness::config::{format_arch, parse_pairs};
use erbp_core::harness::{run, Metrics, RunConfig};
use erbp_core::{Checkpoint, Mnist};

#[derive(Parser)]
#[command(
    name = "erbp",
    version,
    about = "Event-driven random backpropagation in spiking networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a network online and evaluate it after every epoch.
    Train(Common),
    /// Evaluate a checkpoint by output spike counts.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also run the first-spike evaluation.
        #[arg(long)]
        first_spike: bool,
    },
    /// Classify from the first output spikes of a checkpoint.
    FirstSpike {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train the dense reference network (rule bp or rbp).
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// continuous, quantized or refnet.
    #[arg(long)]
    model: Option<String>,
    /// erbp, perbp, bp or rbp.
    #[arg(long)]
    rule: Option<String>,
    /// Layer sizes, e.g. 784-100-10.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Number of training samples.
    #[arg(long)]
    subset: Option<usize>,
    /// Number of test samples.
    #[arg(long)]
    test_subset: Option<usize>,
    /// Worker threads for evaluation.
    #[arg(long)]
    threads: Option<usize>,
    /// Write the binary spike log of training to the output directory.
    #[arg(long)]
    spike_log: bool,
    /// Override any configuration key, e.g. `--set eta=1e-5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "ERBP_DATA_DIR", default_value = "data/mnist")]
    data_dir: PathBuf,
}

impl Common {
    fn config(&self, force_model: Option<&str>) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(p) => parse_pairs(
                &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            )?,
            None => Vec::new(),
        };
        let mut push = |k: &str, v: String| pairs.push((k.to_string(), v));
        if let Some(m) = force_model
            .map(str::to_string)
            .or_else(|| self.model.clone())
        {
            push("model", m);
        }
        if let Some(r) = &self.rule {
            push("rule", r.clone());
        }
        if let Some(a) = &self.arch {
            push("arch", a.clone());
        }
        if let Some(s) = self.seed {
            push("seed", s.to_string());
        }
        if let Some(e) = self.epochs {
            push("epochs", e.to_string());
        }
        if let Some(n) = self.subset {
            push("n_train", n.to_string());
        }
        if let Some(n) = self.test_subset {
            push("n_test", n.to_string());
        }
        if let Some(n) = self.threads {
            push("eval_threads", n.to_string());
        }
        if self.spike_log {
            push("spike_log", "true".into());
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {kv:?}")
            };
            push(k.trim(), v.trim().to_string());
        }
        Ok(RunConfig::from_pairs(&pairs)?)
    }

    fn mnist(&self) -> Result<Mnist> {
        Mnist::load(&self.data_dir).with_context(|| {
            format!(
                "loading MNIST from {} (set ERBP_DATA_DIR or --data-dir)",
                self.data_dir.display()
            )
        })
    }
}

fn report(m: &Metrics) {
    for e in &m.epochs {
        let test = e
            .test_error
            .map_or("-".into(), |t| format!("{:.2}%", 100.0 * t));
        println!(
            "epoch {} train_error {:.2}% test_error {test}",
            e.epoch,
            100.0 * e.train_error
        );
    }
    if let Some(fs) = &m.first_spike {
        for (k, (err, ops)) in fs.error.iter().zip(&fs.synops_per_sample).enumerate() {
            println!(
                "first {} spikes: error {:.2}% synops {:.0}",
                k + 1,
                100.0 * err,
                ops
            );
        }
        println!(
            "all spikes: error {:.2}%, no spike {}",
            100.0 * fs.full_window_error,
            fs.no_spike
        );
    }
}

fn save(m: &Metrics, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        m.save(dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn evaluate(common: &Common, checkpoint: &Path, first: bool) -> Result<()> {
    let cfg = common.config(None)?;
    let ck = Checkpoint::load(checkpoint)
        .with_context(|| format!("reading {}", checkpoint.display()))?;
    let m = run::evaluate(&cfg, &ck, &common.mnist()?, first)?;
    report(&m);
    save(&m, common.out.as_deref())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train(common) => {
            let cfg = common.config(None)?;
            println!(
                "{} {} {} seed {}",
                cfg.model.name(),
                cfg.rule.name(),
                format_arch(&cfg.arch),
                cfg.seed
            );
            let m = run::train(&cfg, &common.mnist()?, common.out.as_deref())?;
            report(&m);
        }
        Cmd::Eval {
            common,
            checkpoint,
            first_spike,
        } => evaluate(&common, &checkpoint, first_spike)?,
        Cmd::FirstSpike { common, checkpoint } => evaluate(&common, &checkpoint, true)?,
        Cmd::Oracle(common) => {
            let cfg = common.config(Some("refnet"))?;
            println!(
                "refnet {} {} seed {}",
                cfg.rule.name(),
                format_arch(&cfg.arch),
                cfg.seed
            );
            let m = run::train(&cfg, &common.mnist()?, common.out.as_deref())?;
            report(&m);
        }
    }
    Ok(())
}
