use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use facetpath::app::{commands, service, Config};
use facetpath::predictors::ModelKind;

#[derive(Parser)]
#[command(name = "facetpath", version, about = "Facet path prediction for type-ahead suggestions")]
struct Cli {
    /// TOML config file; FACETPATH_* environment variables override it.
    #[arg(short, long, global = true, env = "FACETPATH_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    artifacts_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic catalog, event log and query manifest.
    GenerateData,
    /// Train product and token embeddings.
    TrainEmbeddings,
    /// Train one predictor and save its checkpoint.
    Train {
        #[arg(value_parser = parse_model)]
        model: ModelKind,
    },
    /// Evaluate a checkpoint, or retrain over training fractions and seeds.
    Evaluate {
        #[arg(long, value_parser = parse_model)]
        model: Option<ModelKind>,
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Precision/recall at several confidence thresholds.
    Sweep {
        #[arg(long, value_parser = parse_model, default_value = "sessionpath")]
        model: ModelKind,
        #[arg(long, value_delimiter = ',')]
        ct: Option<Vec<f64>>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        addr: Option<std::net::SocketAddr>,
    },
    /// One prediction, printed with per-node confidence.
    Predict {
        #[arg(long)]
        query: String,
        #[arg(long, value_delimiter = ',', default_value = "")]
        session: Vec<String>,
        #[arg(long)]
        ct: Option<f64>,
        #[arg(long, value_parser = parse_model, default_value = "sessionpath")]
        model: ModelKind,
    },
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: facetpath::Error| e.to_string())
}

fn run(cli: Cli) -> facetpath::Result<()> {
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.data_dir {
        cfg.data_dir = d;
    }
    if let Some(d) = cli.artifacts_dir {
        cfg.artifacts_dir = d;
    }
    match cli.command {
        Command::GenerateData => {
            commands::generate_data(&cfg)?;
            println!("wrote {}", cfg.data_dir.display());
        }
        Command::TrainEmbeddings => {
            let e = commands::train_embeddings(&cfg)?;
            println!("{} product vectors, {} token vectors", e.products.len(), e.tokens.len());
        }
        Command::Train { model } => println!("wrote {}", commands::train(&cfg, model)?.display()),
        Command::Evaluate { model, fractions, seeds } => {
            if let Some(s) = seeds {
                cfg.suite.seeds = s;
            }
            match (model, fractions) {
                (Some(m), None) => print!("{}", commands::format_report(&commands::evaluate_checkpoint(&cfg, m)?)),
                (model, fractions) => {
                    let variants = match model {
                        Some(m) => vec![cfg.variant(m)],
                        None => cfg.suite.variants.clone(),
                    };
                    let fractions = fractions.unwrap_or_else(|| cfg.suite.fractions.clone());
                    print!("{}", commands::evaluate_suite(&cfg, variants, fractions)?.to_table());
                }
            }
        }
        Command::Sweep { model, ct } => {
            let cts = ct.unwrap_or_else(|| cfg.sweep_cts.clone());
            if let Some(bad) = cts.iter().find(|c| !(0.0..=1.0).contains(*c)) {
                return Err(facetpath::Error::Config(format!("threshold {bad} outside [0, 1]")));
            }
            print!("{}", commands::format_sweep(&commands::sweep(&cfg, model, &cts)?));
        }
        Command::Serve { addr } => {
            if let Some(a) = addr {
                cfg.service.addr = a;
            }
            let rt = tokio::runtime::Runtime::new().map_err(facetpath::Error::Net)?;
            rt.block_on(service::serve(cfg))?;
        }
        Command::Predict { query, session, ct, model } => {
            let session: Vec<String> = session.into_iter().filter(|s| !s.is_empty()).collect();
            let out = commands::predict(&cfg, model, &query, &session, ct)?;
            println!("path: {}", if out.path.is_empty() { "(none)".to_string() } else { out.path.to_string() });
            for (i, label) in out.prediction.nodes.labels().iter().enumerate() {
                let kept = if i < out.path.depth() { "" } else { "  (cut)" };
                println!("  {label:<24} gini={:.6}{kept}", out.prediction.step_gini[i]);
            }
            println!("ct: {}", out.ct);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
