//! `pvlens` command line.
//!
//! Exit codes: 0 success, 1 fatal error, 2 configuration or usage error.

use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pvlens::pipeline::{benchmark, list_labels, run_pipeline, ConfigError, PipelineError, Resources, RunConfig};
use pvlens::report::{metrics_from_export, read_export, render_table, Classifier};
use pvlens::repository::{ExportFormat, Repository};
use pvlens::service::{review_label, serve, ServiceState, TokenTable};
use pvlens::spl::SectionMap;
use pvlens::synth::SynthConfig;
use pvlens::terms_io::{default_stopwords, load_semantic_filter, load_stopwords, load_terminology};
use pvlens_core::matcher::{extract_from_text, MatchAutomaton};
use pvlens_core::review::Study;
use pvlens_core::{Date, SectionCategory, SemanticTypeFilter};

#[derive(Parser)]
#[command(name = "pvlens", version, about = "Label extraction pipeline, event repository and review service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Filters {
    /// Stopword list (default: stopwords.txt in the terminology directory)
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Allowed semantic types, one per line
    #[arg(long)]
    semtypes: Option<PathBuf>,
    /// Section code map, `code<TAB>category` per line
    #[arg(long)]
    sections: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Process a directory of labels and merge the results into a repository
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        terms: PathBuf,
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        srlc: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Run date recorded as first/last seen (default: today)
        #[arg(long)]
        run_date: Option<Date>,
        #[command(flatten)]
        filters: Filters,
        /// Print the report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Write the repository to stdout
    Export {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ExportFormat,
    },
    /// Time a run over a seeded synthetic corpus
    Bench {
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[arg(long, default_value_t = SynthConfig::default().seed)]
        seed: u64,
        /// Scratch directory (default: a fresh directory under the system temp dir)
        #[arg(long)]
        scratch: Option<PathBuf>,
    },
    /// Print the matches for a piece of text as JSON lines
    Match {
        #[arg(long)]
        text: String,
        #[arg(long)]
        terms: PathBuf,
        #[arg(long, default_value = "adverse_event")]
        category: SectionCategory,
        #[command(flatten)]
        filters: Filters,
    },
    /// Serve the review API for the labels of a directory
    Serve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        terms: PathBuf,
        /// JSON token table: {"reviewers": {id: token}, "adjudicators": {id: token}}
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        filters: Filters,
    },
    /// Compute metrics from a decision export (JSON lines)
    Metrics {
        #[arg(long)]
        decisions: PathBuf,
        /// Terminology used to classify user-added terms
        #[arg(long)]
        terms: Option<PathBuf>,
        #[command(flatten)]
        filters: Filters,
        #[arg(long)]
        json: bool,
    },
}

/// Marks an error as a configuration problem (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Config(String);

fn config(msg: impl std::fmt::Display) -> anyhow::Error {
    Config(msg.to_string()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Most error messages already embed their source; only print
            // causes that add something.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            if e.is::<Config>() || matches!(e.downcast_ref::<PipelineError>(), Some(PipelineError::Config(_))) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn resources(terms: &Path, f: &Filters) -> anyhow::Result<Resources> {
    let section_map = match &f.sections {
        Some(p) => SectionMap::load(p).map_err(config)?,
        None => SectionMap::default(),
    };
    let filter = match &f.semtypes {
        Some(p) => load_semantic_filter(p).map_err(config)?,
        None => SemanticTypeFilter::default(),
    };
    let stopwords = match &f.stopwords {
        Some(p) => load_stopwords(p).map_err(config)?,
        None => default_stopwords(terms)?,
    };
    let store = load_terminology(terms).with_context(|| format!("loading terminology from {}", terms.display()))?;
    Ok(Resources::from_parts(store, stopwords, filter, section_map)?)
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Run {
            input,
            terms,
            repo,
            srlc,
            workers,
            run_date,
            filters,
            json,
        } => {
            let mut cfg = RunConfig::new(input, terms, repo);
            cfg.srlc_file = srlc;
            cfg.worker_count = workers;
            cfg.stopword_file = filters.stopwords;
            cfg.semtype_file = filters.semtypes;
            cfg.section_map_file = filters.sections;
            if let Some(d) = run_date {
                cfg.run_date = d;
            }
            let report = run_pipeline(&cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!(
                    "{} labels: {} processed, {} skipped; {} substances, {} PTs, {} events",
                    report.input_count,
                    report.processed,
                    report.skipped.len(),
                    report.distinct_substances,
                    report.distinct_pts,
                    report.events
                );
                for (kind, n) in report.skipped_by_kind() {
                    println!("  skipped {kind}: {n}");
                }
                let m = &report.merge;
                println!(
                    "merge: {} inserted, {} updated, {} not reconfirmed; {:.2}s",
                    m.inserted, m.updated, m.not_reconfirmed, report.wall_time_secs
                );
            }
        }
        Command::Export { repo, format } => {
            if !repo.is_file() {
                return Err(config(format!("repository {} does not exist", repo.display())));
            }
            let repo = Repository::open(&repo)?;
            let stdout = io::stdout();
            let mut out = io::BufWriter::new(stdout.lock());
            repo.export(format, &mut out)?;
            out.flush()?;
        }
        Command::Bench {
            count,
            workers,
            seed,
            scratch,
        } => {
            if workers == 0 {
                return Err(PipelineError::Config(ConfigError::ZeroWorkers).into());
            }
            let (dir, cleanup) = match scratch {
                Some(d) => (d, false),
                None => (
                    std::env::temp_dir().join(format!("pvlens-bench-{}", std::process::id())),
                    true,
                ),
            };
            let cfg = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            let result = benchmark(&dir, count, workers, cfg);
            if cleanup {
                let _ = std::fs::remove_dir_all(&dir);
            }
            let r = result?;
            println!(
                "{} labels, {} workers: {:.2}s, {:.1} labels/s ({} events)",
                r.labels, r.workers, r.elapsed_secs, r.labels_per_sec, r.events
            );
        }
        Command::Match {
            text,
            terms,
            category,
            filters,
        } => {
            let res = resources(&terms, &filters)?;
            let automaton = MatchAutomaton::build(&res.store)?;
            let matches = extract_from_text(&text, category, &automaton, &res.store, &res.stopwords, &res.filter)?;
            for m in matches {
                println!("{}", serde_json::to_string(&m)?);
            }
        }
        Command::Serve {
            input,
            terms,
            tokens,
            addr,
            seed,
            filters,
        } => {
            let res = resources(&terms, &filters)?;
            let (table, file) = TokenTable::load(&tokens).map_err(config)?;
            let pool: Vec<String> = file.reviewers.keys().cloned().collect();
            let mut study = Study::new(pool, seed).map_err(config)?;
            for path in list_labels(&input)? {
                let xml = std::fs::read(&path)?;
                match review_label(&xml, &res) {
                    Ok(label) => {
                        let id = label.set_id.clone();
                        if let Err(e) = study.add_label(label) {
                            eprintln!("skipping {}: {e}", path.display());
                        } else {
                            eprintln!("registered {id}");
                        }
                    }
                    Err(reason) => eprintln!("skipping {}: {reason:?}", path.display()),
                }
            }
            let Resources {
                store,
                stopwords,
                filter,
                ..
            } = res;
            let state = Arc::new(ServiceState::new(study, table, store, stopwords, filter));
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on {}", listener.local_addr()?);
                serve(listener, state).await
            })?;
        }
        Command::Metrics {
            decisions,
            terms,
            filters,
            json,
        } => {
            let file = std::fs::File::open(&decisions)
                .map_err(|e| config(format!("cannot open {}: {e}", decisions.display())))?;
            let records = read_export(BufReader::new(file))?;
            let res = terms.as_deref().map(|t| resources(t, &filters)).transpose()?;
            let classifier = res.as_ref().map(|r| Classifier {
                store: &r.store,
                stopwords: &r.stopwords,
                filter: &r.filter,
            });
            let report = metrics_from_export(&records, classifier.as_ref());
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", render_table(&report));
            }
        }
    }
    Ok(())
}
