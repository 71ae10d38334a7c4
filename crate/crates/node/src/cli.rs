//! The `fog` command line.

use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::auth::{Role, UserRecord};
use crate::bench::{bench_dir, BenchOptions, BenchReport};
use crate::config::NodeConfig;
use crate::error::{NodeError, Result};
use crate::node::{upload, Node};
use crate::plotdata::{reduction_rows, series, to_csv, Bucket, Metric};
use crate::protocol::{DataKind, Reply, Upload};
use crate::records::extract;
use crate::store::{QueryFilter, Store};
use crate::{corpus, tls};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fog", version, about = "Fog node for speech, heart-sound and ECG analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the node until SIGINT or SIGTERM.
    Serve {
        #[arg(long, env = "FOG_CONFIG")]
        config: PathBuf,
    },
    /// Extract features from one file and print the JSON payload.
    Process {
        #[arg(long)]
        kind: DataKind,
        /// Speech task (t1..t7); ignored for pcg and ecg.
        #[arg(long, default_value = "t1")]
        task: String,
        file: PathBuf,
    },
    /// Benchmark data reduction over a directory of recordings.
    Bench(BenchArgs),
    /// Emit tidy date,patient,metric,value rows.
    Plotdata(PlotArgs),
    /// Write the synthetic demo corpus.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Send one file to a node over mutual TLS.
    Upload(UploadArgs),
    /// Manage node users.
    #[command(subcommand)]
    User(UserCommand),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub dir: PathBuf,
    /// Output prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Population for the storage projection.
    #[arg(long, default_value_t = 100)]
    pub patients: u32,
    /// Recording minutes per patient per day for the projection.
    #[arg(long, default_value_t = 23.0)]
    pub minutes: f64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub metric: String,
    #[arg(long)]
    pub from: Option<NaiveDate>,
    #[arg(long)]
    pub to: Option<NaiveDate>,
    #[arg(long)]
    pub patient: Option<String>,
    #[arg(long)]
    pub task: Option<String>,
    /// Average per ISO week instead of per day.
    #[arg(long)]
    pub weekly: bool,
    /// Feature store file.
    #[arg(long, conflicts_with_all = ["config", "report"])]
    pub db: Option<PathBuf>,
    /// Node config; the store is read from its data_dir.
    #[arg(long, conflicts_with = "report")]
    pub config: Option<PathBuf>,
    /// Bench JSON report, for the reduction metrics.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UploadArgs {
    #[arg(long)]
    pub addr: String,
    /// Name the server certificate is checked against.
    #[arg(long, default_value = "localhost")]
    pub server_name: String,
    #[arg(long)]
    pub cert: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
    /// CA that signed the server certificate.
    #[arg(long)]
    pub ca: PathBuf,
    #[arg(long)]
    pub kind: DataKind,
    #[arg(long)]
    pub patient: String,
    #[arg(long)]
    pub task: String,
    pub file: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum UserCommand {
    /// Register a user in the node's store.
    Add {
        #[arg(long, env = "FOG_CONFIG")]
        config: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        role: Role,
        /// Approving clinician (required for patients).
        #[arg(long)]
        approved_by: Option<String>,
        #[arg(long, env = "FOG_PASSWORD", hide_env_values = true)]
        password: String,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &NodeError) -> i32 {
    match e {
        NodeError::Config(_) | NodeError::Input(_) | NodeError::Denied(_) | NodeError::NotFound(_) | NodeError::Pipeline(_) => {
            EXIT_INPUT
        }
        _ => EXIT_INTERNAL,
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| NodeError::input(format!("{}: {e}", path.display())))
}

/// Parses `args` and runs the command, writing results to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("fog: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Serve { config } => serve(&config),
        Command::Process { kind, task, file } => {
            let bytes = read_input(&file)?;
            writeln!(out, "{}", extract(kind, &task, &bytes)?.to_json()?)?;
            Ok(())
        }
        Command::Bench(args) => {
            let opts = BenchOptions {
                workers: args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
                patients: args.patients,
                minutes_per_day: args.minutes,
            };
            let report = bench_dir(&args.dir, &opts)?;
            let (csv, json) = report.write(&args.out)?;
            let t = &report.totals;
            writeln!(
                out,
                "{} files, {:.2} s of media in {:.2} s (rtf {:.3}); feature reduction {:.2}%, gzip {:.2}%",
                report.rows.len(),
                t.media_s,
                t.processing_s,
                t.rtf,
                t.feature_reduction_pct,
                t.zip_reduction_pct
            )?;
            for p in &report.projection {
                writeln!(
                    out,
                    "{}: {} patients x {} min/day -> raw {:.4} GB/day, features {:.6} GB/day",
                    p.kind.as_str(),
                    p.patients,
                    p.minutes_per_day,
                    p.raw_gb_per_day,
                    p.feature_gb_per_day
                )?;
            }
            writeln!(out, "wrote {} and {}", csv.display(), json.display())?;
            Ok(())
        }
        Command::Plotdata(args) => plotdata(&args, out),
        Command::Synth { dir, seed } => {
            let files = corpus::demo_corpus(seed)?;
            corpus::write_files(&dir, &files)?;
            writeln!(out, "wrote {} files to {}", files.len(), dir.display())?;
            Ok(())
        }
        Command::Upload(a) => {
            let config = tls::client_config(tls::load_certs(&a.cert)?, tls::load_key(&a.key)?, tls::load_certs(&a.ca)?)?;
            let up = Upload::new(a.kind, &a.patient, &a.task, read_input(&a.file)?);
            match upload(a.addr.as_str(), &a.server_name, config, &up)? {
                Reply::Ok => {
                    writeln!(out, "uploaded {} ({} bytes, sha256 {})", a.file.display(), up.payload.len(), up.sha256_hex())?;
                    Ok(())
                }
                other => Err(NodeError::input(format!("node rejected the upload: {other:?}"))),
            }
        }
        Command::User(UserCommand::Add { config, id, role, approved_by, password }) => {
            let cfg = NodeConfig::load(Some(&config))?;
            std::fs::create_dir_all(&cfg.data_dir)?;
            let store = Store::open(&cfg.db_path())?;
            store.add_user(&UserRecord::new(&id, role, approved_by.as_deref(), &password)?)?;
            store.audit("cli", "user_added", &format!("{id} as {role}"))?;
            writeln!(out, "added {role} {id}")?;
            Ok(())
        }
    }
}

fn serve(config: &Path) -> Result<()> {
    let cfg = NodeConfig::load(Some(config))?;
    let node = Node::open(cfg.clone())?;
    let listener = TcpListener::bind(cfg.listen_addr)?;
    let shutdown = Arc::new(AtomicBool::new(false));
    for sig in [signal_hook::consts::SIGINT, signal_hook::consts::SIGTERM] {
        signal_hook::flag::register(sig, shutdown.clone())?;
    }
    node.serve(listener, shutdown)
}

fn plotdata(args: &PlotArgs, out: &mut dyn Write) -> Result<()> {
    let metric: Metric = args.metric.parse()?;
    let rows = if let Some(report) = &args.report {
        let text = read_input(report)?;
        let report: BenchReport = serde_json::from_slice(&text).map_err(|e| NodeError::input(format!("bench report: {e}")))?;
        reduction_rows(&report, metric)?
    } else {
        if metric.is_reduction() {
            return Err(NodeError::input(format!("{metric} needs --report")));
        }
        let db = match (&args.db, &args.config) {
            (Some(db), _) => db.clone(),
            (None, Some(c)) => NodeConfig::load(Some(c))?.db_path(),
            (None, None) => return Err(NodeError::input("give --db, --config or --report")),
        };
        if !db.exists() {
            return Err(NodeError::input(format!("no feature store at {}", db.display())));
        }
        let store = Store::open(&db)?;
        let filter = QueryFilter { patient_id: args.patient.clone(), task_id: args.task.clone(), kind: None, from: args.from, to: args.to };
        let records = store.query_records(None, &filter)?;
        series(&records, metric, if args.weekly { Bucket::Week } else { Bucket::Day })
    };
    out.write_all(to_csv(&rows).as_bytes())?;
    Ok(())
}
