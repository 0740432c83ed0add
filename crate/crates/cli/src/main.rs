use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use diarcluster::io::{apply_overrides, read_json, write_text, Manifest};
use diarcluster::pipeline::{
    pretrain_on_manifest, run_pipeline, run_sweep, score_rttm, write_pretrained, PipelineConfig,
    SweepAxis,
};
use diarcluster::rttm::read_rttm_file;
use diarcluster::synth::{generate_session, suite_configs, write_suite, SynthConfig};

#[derive(Parser)]
#[command(name = "diarcluster", version, about = "Cluster speaker embeddings over oracle segments and score the result")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Settings {
    /// JSON file with settings; anything absent keeps its default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set algorithm=xmeans --set dec.epochs=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Settings {
    fn pipeline(&self) -> Result<PipelineConfig> {
        let base: PipelineConfig = match &self.config {
            Some(p) => read_json(p).with_context(|| format!("reading {}", p.display()))?,
            None => PipelineConfig::default(),
        };
        let mut cfg = apply_overrides(&base, &self.overrides)?;
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Cluster and score every session of a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// One run per value of a single setting, reported side by side.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// min_duration, aggregation, algorithm or filter_order.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; each axis has a default list.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Generate synthetic sessions with frames, reference RTTM and profiles.
    Synth {
        /// Named suite: easy, noisy, short_segments or many_speakers.
        #[arg(long, conflicts_with = "config")]
        suite: Option<String>,
        /// JSON generator settings for a single session.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a hypothesis RTTM against a reference RTTM.
    Score {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Pretrain the DEC autoencoder on every session of a manifest.
    Pretrain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
}

/// Whether some sessions failed while the command as a whole went through.
enum Outcome {
    Done,
    Partial(usize),
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial(n)) => {
            eprintln!("warning: {n} session(s) failed; see the report");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    Manifest::load(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn partial(failed: usize) -> Outcome {
    if failed == 0 {
        Outcome::Done
    } else {
        Outcome::Partial(failed)
    }
}

fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Run { manifest, out, settings } => {
            let cfg = settings.pipeline()?;
            let manifest = load_manifest(&manifest)?;
            let report = run_pipeline(&manifest, &cfg, Some(&out))?;
            print!("{}", report.to_table());
            Ok(partial(report.aggregate.n_failed))
        }
        Command::Sweep {
            manifest,
            out,
            axis,
            values,
            settings,
        } => {
            let cfg = settings.pipeline()?;
            let axis = SweepAxis::parse(&axis)?;
            let values = if values.is_empty() { axis.default_values() } else { values };
            let manifest = load_manifest(&manifest)?;
            let report = run_sweep(&manifest, &cfg, axis, &values, Some(&out))?;
            print!("{}", report.to_table());
            Ok(partial(report.runs.iter().map(|r| r.aggregate.n_failed).sum()))
        }
        Command::Synth {
            suite,
            config,
            overrides,
            seed,
            out,
        } => {
            let (name, configs) = match (suite, config) {
                (Some(name), None) => (name.clone(), suite_configs(&name, seed)?),
                (None, Some(path)) => {
                    let cfg: SynthConfig = read_json(&path).with_context(|| format!("reading {}", path.display()))?;
                    ("custom".to_string(), vec![SynthConfig { seed, ..cfg }])
                }
                (None, None) => ("custom".to_string(), vec![SynthConfig { seed, ..SynthConfig::default() }]),
                (Some(_), Some(_)) => bail!("--suite and --config are exclusive"),
            };
            let sessions = configs
                .iter()
                .map(|c| {
                    let c = apply_overrides(c, &overrides)?;
                    c.validate()?;
                    Ok(generate_session(&c)?)
                })
                .collect::<Result<Vec<_>>>()?;
            let path = write_suite(&out, &name, seed, &sessions)?;
            println!("{} session(s) written; manifest {}", sessions.len(), path.display());
            Ok(Outcome::Done)
        }
        Command::Score {
            reference,
            hypothesis,
            out,
            settings,
        } => {
            let cfg = settings.pipeline()?;
            let reference = read_rttm_file(&reference)?;
            let hypothesis = read_rttm_file(&hypothesis)?;
            let report = score_rttm(&reference, &hypothesis, &cfg)?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            match out {
                Some(p) => write_text(&p, &json)?,
                None => print!("{json}"),
            }
            Ok(Outcome::Done)
        }
        Command::Pretrain { manifest, out, settings } => {
            let cfg = settings.pipeline()?;
            let manifest = load_manifest(&manifest)?;
            let (pre, skipped) = pretrain_on_manifest(&manifest, &cfg)?;
            for (id, why) in &skipped {
                eprintln!("skipped {id}: {why}");
            }
            write_pretrained(&out, &pre, &cfg)?;
            println!(
                "reconstruction loss {:.6} -> {:.6} over {} epochs; checkpoint {}",
                pre.history[0],
                pre.history.last().expect("initial loss"),
                pre.history.len() - 1,
                out.join("autoencoder.ckpt").display()
            );
            Ok(partial(skipped.len()))
        }
    }
}
