use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use kg_disambig::extraction::ExtractorMode;
use kg_disambig::kgraph::ExportFormat;
use kg_disambig::leiden::QualityFunction;
use kg_disambig::pipeline::{Granularity, HoldoutMode, Pipeline, RunConfig, StageOutcome};
use kg_disambig::schema::vocabulary_json;

const USAGE: u8 = 1;
const STAGE_FAILURE: u8 = 2;

/// Disambiguate an ambiguous term by clustering a knowledge graph built from
/// corpus excerpts.
#[derive(Debug, Parser)]
#[command(name = "kg-disambig", version)]
struct Cli {
    /// Run configuration file (flat `key = value`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leiden seed, overriding `leiden.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Force the deterministic gazetteer extractor.
    #[arg(long, global = true)]
    offline: bool,
    /// Holdout fraction in [0, 1), overriding `holdout.fraction`.
    #[arg(long, global = true)]
    holdout: Option<f64>,
    /// `inductive` or `transductive`, overriding `holdout.mode`.
    #[arg(long, global = true)]
    holdout_mode: Option<HoldoutMode>,
    /// Drop excerpts whose window lies inside an earlier one.
    #[arg(long, global = true)]
    dedup_excerpts: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select documents by query and cut excerpts around the term.
    Excerpt,
    /// Extract triples from every excerpt.
    Extract,
    /// Build the knowledge graph from training triples.
    Graph,
    /// Partition the graph with Leiden.
    Cluster(ClusterArgs),
    /// Label communities and classify held-out excerpts.
    Classify,
    /// Score classifications against gold labels.
    Evaluate(EvaluateArgs),
    /// Run every stage in order.
    RunAll(ClusterArgs),
    /// Write the graph as GraphML, DOT or JSON.
    Export(ExportArgs),
    /// Print the entity and relation vocabularies as JSON.
    Vocab,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// `modularity` or `cpm`.
    #[arg(long)]
    quality: Option<QualityFunction>,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// `excerpt` or `entity`.
    #[arg(long)]
    granularity: Option<Granularity>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// `graphml`, `dot` or `json`.
    #[arg(long, default_value = "graphml")]
    format: ExportFormat,
    /// Destination file; defaults to `graph.<ext>` in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let path = cli.config.as_deref().ok_or("--config <file> is required for this command")?;
    let mut cfg = RunConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(out) = &cli.out {
        cfg.out = std::path::absolute(out).unwrap_or_else(|_| out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.leiden.seed = seed;
    }
    if cli.offline {
        cfg.extractor.mode = ExtractorMode::Offline;
    }
    if let Some(h) = cli.holdout {
        cfg.holdout_fraction = h;
    }
    if let Some(m) = cli.holdout_mode {
        cfg.holdout_mode = m;
    }
    if cli.dedup_excerpts {
        cfg.dedup_excerpts = true;
    }
    match &cli.command {
        Command::Cluster(a) | Command::RunAll(a) => {
            if let Some(q) = a.quality {
                cfg.leiden.quality = q;
            }
            if let Some(r) = a.resolution {
                cfg.leiden.resolution = r;
            }
            if let Some(m) = a.max_iter {
                cfg.leiden.max_iterations = m;
            }
        }
        Command::Evaluate(a) => {
            if let Some(g) = a.granularity {
                cfg.granularity = g;
            }
        }
        _ => {}
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn print_outcome(o: &StageOutcome) {
    println!("{}: {}", o.stage, o.summary);
}

fn run(cli: &Cli, pipeline: &Pipeline) -> Result<()> {
    let outcomes = match &cli.command {
        Command::Excerpt => vec![pipeline.excerpt()?],
        Command::Extract => vec![pipeline.extract()?],
        Command::Graph => vec![pipeline.graph()?],
        Command::Cluster(_) => vec![pipeline.cluster()?],
        Command::Classify => vec![pipeline.classify()?],
        Command::Evaluate(_) => {
            let o = pipeline.evaluate()?;
            let report = std::fs::read_to_string(pipeline.artifact(kg_disambig::pipeline::REPORT))
                .context("reading evaluation report")?;
            print!("{report}");
            vec![o]
        }
        Command::RunAll(_) => pipeline.run_all()?,
        Command::Export(a) => {
            let path = pipeline.export(a.format, a.output.as_deref())?;
            println!("export: {}", path.display());
            vec![]
        }
        Command::Vocab => unreachable!("handled before loading a config"),
    };
    outcomes.iter().for_each(print_outcome);
    Ok(())
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(USAGE)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Command::Vocab = cli.command {
        println!("{}", serde_json::to_string_pretty(&vocabulary_json()).expect("vocabulary serializes"));
        return ExitCode::SUCCESS;
    }
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => return usage_error(msg),
    };
    let pipeline = match Pipeline::new(cfg) {
        Ok(p) => p,
        Err(e) => return usage_error(e),
    };
    match run(&cli, &pipeline) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(STAGE_FAILURE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn cluster_flags_parse() {
        let cli = Cli::try_parse_from([
            "kg-disambig", "--config", "c.txt", "cluster", "--quality", "cpm", "--resolution", "0.1", "--seed", "9",
            "--max-iter", "3",
        ])
        .unwrap();
        assert_eq!(cli.seed, Some(9));
        let Command::Cluster(a) = cli.command else { panic!("expected cluster") };
        assert_eq!(a.quality, Some(QualityFunction::Cpm));
        assert_eq!(a.max_iter, Some(3));
    }
}
