mod config;
mod serve;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cdmizer_core::corpus::{generate_corpus, GeneratorOptions, DEFAULT_SEED};
use cdmizer_core::evaluator::{emit_report, seed_published, Provenance, ReferenceScoreTables, ScoreStore};
use cdmizer_core::llm::write_truth_responses;
use cdmizer_core::run::{
    evaluate_run, execute, load_corpus_or_fixture, load_registry, load_schema, provenance, write_atomic, Pipeline,
    RunDir,
};
use cdmizer_core::template::generate_template;
use cdmizer_core::ClauseKind;
use clap::{Parser, Subcommand};

use config::{apply_env, ConvertFlags, FileConfig, RunFlags};

#[derive(Debug, Parser)]
#[command(name = "cdmizer", version, about = "Convert CSA clauses into CDM JSON and evaluate the results")]
struct Cli {
    /// TOML config file. Flags override it; CDMIZER_* environment variables override both.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one template per clause.
    Template {
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long = "clause", value_name = "CLAUSE")]
        clauses: Vec<ClauseKind>,
        #[arg(short, long, default_value = "templates")]
        out: PathBuf,
    },
    /// Populate templates for every document, clause and mode. Resumable.
    Convert {
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        convert: ConvertFlags,
    },
    /// Score a run and write report.json and report.md into it.
    Evaluate {
        #[command(flatten)]
        run: RunFlags,
        /// Report the published scores instead of a run.
        #[arg(long = "seed-published")]
        published: bool,
        /// Report directory (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the manual review API until interrupted.
    Review {
        #[command(flatten)]
        run: RunFlags,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        /// Require `Authorization: Bearer <token>` on API calls.
        #[arg(long)]
        token: Option<String>,
        /// Directory with the built review UI.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Write the synthetic 60-document fixture corpus.
    CorpusGen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Also write ground-truth answers for the directory mock backend.
        #[arg(long)]
        mock_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn resolve(config: Option<&Path>, run: &RunFlags, convert: Option<&ConvertFlags>) -> Result<FileConfig> {
    let mut resolved = FileConfig::load(config)?;
    run.apply(&mut resolved.run);
    if let Some(convert) = convert {
        convert.apply(&mut resolved.run);
    }
    apply_env(&mut resolved, |k| std::env::var(k).ok())?;
    Ok(resolved)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Template { schema, targets, clauses, out } => {
            let graph = load_schema(schema.as_deref())?;
            let registry = load_registry(targets.as_deref())?;
            let clauses = if clauses.is_empty() { ClauseKind::ALL.to_vec() } else { clauses };
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for clause in clauses {
                let targets = registry.get(clause).with_context(|| format!("no targets for {clause}"))?;
                let template = generate_template(&graph, targets)?;
                let path = out.join(format!("{}.template.json", clause.slug()));
                write_atomic(&path, template.render().as_bytes())?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Convert { run, convert } => {
            let resolved = resolve(config, &run, Some(&convert))?.run;
            let pipeline = Pipeline::load(&resolved)?;
            let (dir, summary) = execute(&resolved, &pipeline)?;
            println!(
                "run {}: {} planned, {} already done, {} converted, {} failed conformance, {} errors",
                dir.root().display(),
                summary.planned,
                summary.skipped,
                summary.converted,
                summary.conformance_failures,
                summary.errors.len()
            );
            for (task, error) in &summary.errors {
                eprintln!("{task}: {error}");
            }
            Ok(if summary.is_success() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Evaluate { run, published, out } => {
            let resolved = resolve(config, &run, None)?.run;
            let tables = ReferenceScoreTables::builtin();
            let (report, default_out) = if published {
                let mut store = ScoreStore::in_memory();
                seed_published(&mut store, &tables)?;
                (emit_report(&store, &tables, Provenance::default()), resolved.output_dir.join("published"))
            } else {
                let dir = RunDir::open(&resolved.output_dir, &resolved.run_id)?;
                let run_config = dir.read_config()?;
                let graph = load_schema(run_config.schema.as_deref())?;
                let corpus = load_corpus_or_fixture(run_config.corpus.as_deref())?;
                let store = evaluate_run(&dir, &corpus, &graph)?;
                let provenance = provenance(&dir, &run_config, &corpus)?;
                (emit_report(&store, &tables, provenance), dir.root().to_path_buf())
            };
            let out = out.unwrap_or(default_out);
            report.write(&out).with_context(|| format!("writing report to {}", out.display()))?;
            print!("{}", report.to_markdown());
            Ok(ExitCode::SUCCESS)
        }
        Command::Review { run, host, port, token, static_dir } => {
            let mut resolved = resolve(config, &run, None)?;
            let review = &mut resolved.review;
            if let Some(v) = host {
                review.host = v;
            }
            if let Some(v) = port {
                review.port = v;
            }
            if let Some(v) = token {
                review.token = Some(v);
            }
            if let Some(v) = static_dir {
                review.static_dir = Some(v);
            }
            // Flags for the token and port were applied after the environment; reapply it.
            apply_env(&mut resolved, |k| std::env::var(k).ok())?;
            let review = resolved.review;
            if run.run_id.is_some() {
                RunDir::open(&resolved.run.output_dir, &resolved.run.run_id)?;
            }
            let addr: SocketAddr = format!("{}:{}", review.host, review.port)
                .parse()
                .with_context(|| format!("invalid listen address {}:{}", review.host, review.port))?;
            let state = Arc::new(serve::AppState::new(resolved.run.output_dir.clone(), review.token.clone()));
            let app = serve::router(state, review.static_dir.clone());
            tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve::serve(addr, app))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::CorpusGen { out, seed, mock_dir } => {
            let corpus = generate_corpus(GeneratorOptions { seed, ..GeneratorOptions::default() });
            if out.join("manifest.json").exists() {
                bail!("{} already contains a corpus", out.display());
            }
            corpus.write(&out)?;
            println!("wrote {} documents to {}", corpus.len(), out.display());
            if let Some(dir) = mock_dir {
                let n = write_truth_responses(&corpus, &dir)?;
                println!("wrote {n} mock responses to {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
