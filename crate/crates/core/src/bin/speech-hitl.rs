use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use speech_hitl::corpus::{load_corpus, validate_corpus, CorpusConfig};
use speech_hitl::orchestrator::{
    serve, FinalizeBody, JobRequest, Orchestrator, PackageRequest, ServiceConfig, SubmitRequest,
    SystemClock,
};
use speech_hitl::packaging::PackagingSpec;
use speech_hitl::pretag::{
    AdapterSet, ExternalAdapter, FixtureStore, GatingPolicy, PipelineConfig, RawSessionInput, Stage,
};
use speech_hitl::qc::BehaviorEvent;
use speech_hitl::sim::{run_scenario, SimScenario};

/// Operator CLI for the speech corpus production service.
#[derive(Parser)]
#[command(name = "speech-hitl", version)]
struct Cli {
    /// Store directory holding the event log and snapshots.
    #[arg(long, env = "SPEECHHITL_STORE", global = true)]
    store: Option<PathBuf>,
    /// Seed for every randomized choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSON array of raw sessions.
    Ingest { file: PathBuf },
    /// Pre-tag every ingested session without a bundle.
    Pretag {
        /// Directory of per-session fixture results.
        #[arg(long, conflicts_with = "endpoint")]
        fixtures: Option<PathBuf>,
        /// HTTP endpoint serving every stage.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Validate a corpus directory; exits 1 on any violation.
    Validate { corpus: PathBuf },
    /// Select and emit a dataset package.
    Package {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Emit even when the spec is not met within tolerance.
        #[arg(long)]
        force: bool,
    },
    /// Run a simulation scenario and print its report.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Mark an annotator as qualified (or not) for a locale.
    Qualify {
        annotator: String,
        locale: String,
        #[arg(long)]
        revoke: bool,
    },
    /// Job lifecycle: create, lease, submit, audit.
    #[command(subcommand)]
    Job(JobCommand),
}

#[derive(Subcommand)]
enum JobCommand {
    /// Create a job from a JSON request.
    Create { file: PathBuf },
    /// Lease the next assignment.
    Next {
        job: String,
        #[arg(long)]
        annotator: String,
    },
    /// Submit answers for an assignment.
    Submit {
        assignment: String,
        file: PathBuf,
        #[arg(long)]
        annotator: Option<String>,
    },
    /// Record behavior events for an assignment.
    Events { assignment: String, file: PathBuf },
    /// Unit counts, roster and audit rounds.
    Status { job: String },
    /// Run one acceptance-sampling round.
    Finalize {
        job: String,
        /// JSON with `verdicts` and/or `references` keyed by unit id.
        #[arg(long)]
        audit: Option<PathBuf>,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // Output piped into `head` and the like.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn open(cli: &Cli) -> Result<Orchestrator> {
    let Some(root) = &cli.store else {
        bail!("no store: pass --store or set SPEECHHITL_STORE");
    };
    let config = ServiceConfig {
        seed: cli.seed.unwrap_or(0),
        ..ServiceConfig::default()
    };
    Orchestrator::open(root, config, Arc::new(SystemClock))
        .with_context(|| format!("opening store {}", root.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest { file } => {
            let batch: Vec<RawSessionInput> = read_json(file)?;
            print(&open(&cli)?.ingest(batch)?)
        }
        Command::Pretag {
            fixtures,
            endpoint,
            workers,
        } => {
            let adapters = match (fixtures, endpoint) {
                (Some(dir), _) => FixtureStore::new(dir).adapter_set(),
                (None, Some(url)) => {
                    let mut set = AdapterSet::new();
                    for stage in Stage::ORDER {
                        set.insert(
                            stage,
                            Arc::new(ExternalAdapter::new("external", url.clone())),
                        );
                    }
                    set
                }
                (None, None) => bail!("pretag needs --fixtures or --endpoint"),
            };
            let summary = open(&cli)?.run_pretag(
                &adapters,
                &GatingPolicy::default(),
                &PipelineConfig::default(),
                *workers,
            )?;
            print(&summary)
        }
        Command::Validate { corpus } => {
            let c = load_corpus(corpus)?;
            let report = validate_corpus(&c, &CorpusConfig::default());
            print(&report)?;
            if !report.is_empty() {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Package {
            spec,
            corpus,
            out,
            force,
        } => {
            let spec: PackagingSpec = read_json(spec)?;
            let req = PackageRequest {
                spec,
                corpus: corpus.clone(),
                out: out.clone(),
                seed: cli.seed,
                force: *force,
            };
            let o = match &cli.store {
                Some(_) => open(&cli)?,
                None => Orchestrator::ephemeral(ServiceConfig::default(), Arc::new(SystemClock)),
            };
            print(&o.package(req)?)
        }
        Command::Simulate { scenario } => {
            let mut s: SimScenario = read_json(scenario)?;
            if let Some(seed) = cli.seed {
                s.rng_seed = seed;
            }
            print(&run_scenario(&s)?)
        }
        Command::Serve { addr } => {
            let orch = Arc::new(open(&cli)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on {}", listener.local_addr()?);
                serve(listener, orch).await
            })?;
            Ok(())
        }
        Command::Qualify {
            annotator,
            locale,
            revoke,
        } => print(&open(&cli)?.set_qualification(annotator, locale, !revoke)?),
        Command::Job(job) => {
            let o = open(&cli)?;
            match job {
                JobCommand::Create { file } => {
                    let req: JobRequest = read_json(file)?;
                    print(&serde_json::json!({ "job_id": o.create_job(req)? }))
                }
                JobCommand::Next { job, annotator } => {
                    print(&o.next_assignment(annotator, job)?.annotator_view())
                }
                JobCommand::Submit {
                    assignment,
                    file,
                    annotator,
                } => {
                    let mut req: SubmitRequest = read_json(file)?;
                    req.annotator_id = annotator.clone();
                    print(&o.submit(assignment, req)?.receipt())
                }
                JobCommand::Events { assignment, file } => {
                    let events: Vec<BehaviorEvent> = read_json(file)?;
                    let stored = o.record_events(assignment, events)?;
                    print(&serde_json::json!({ "stored": stored }))
                }
                JobCommand::Status { job } => print(&o.job_status(job)?),
                JobCommand::Finalize { job, audit } => {
                    let body: FinalizeBody = match audit {
                        Some(p) => read_json(p)?,
                        None => FinalizeBody::default(),
                    };
                    let tol = o
                        .read(|st| st.jobs.get(job.as_str()).map(|j| j.policy.wer_tolerance))
                        .with_context(|| format!("unknown job {job}"))?;
                    print(&o.finalize_job(job, &mut body.auditor(tol))?)
                }
            }
        }
    }
}
