//! Command-line front end. Exit codes: 0 success, 1 operational error,
//! 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tmatch_core::generate::{
    noisy_copy, plant, random_connected, random_graph, GraphParams, Noise, SyntheticGraph, DAY,
};
use tmatch_core::{Actor, NodeId, Verdict, ViewConfig};

use crate::workspace::{SeedChoice, SessionRecord, Workspace, WorkspaceError};

#[derive(Debug, Parser)]
#[command(
    name = "tmatch",
    version,
    about = "Load temporal multigraphs, explore them, and match template groups"
)]
pub struct Cli {
    /// Workspace directory (created on first use).
    #[arg(
        long,
        global = true,
        env = "TMATCH_WORKSPACE",
        default_value = "tmatch-workspace"
    )]
    pub workspace: PathBuf,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load (or replace) a graph from an edge CSV and optional node CSV.
    Load {
        #[arg(long)]
        id: String,
        edges: PathBuf,
        #[arg(long)]
        nodes: Option<PathBuf>,
    },
    /// Remove a graph.
    Remove { id: String },
    /// List loaded graphs.
    List,
    /// Statistics of a graph under its current view.
    Stats { id: String },
    /// Replace a graph's view config.
    View(ViewArgs),
    /// Placements of the template's seed signature in a target.
    Seeds {
        #[arg(long)]
        template: String,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 5)]
        limit: usize,
    },
    /// Open a match session; with --auto, run it to completion.
    Match(MatchArgs),
    /// Top candidate pairs of a session.
    Candidates {
        session: String,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    /// Record a verdict on a (template, target) pair.
    Decide {
        session: String,
        template: u64,
        target: u64,
        verdict: VerdictArg,
    },
    /// List sessions.
    Sessions,
    /// Rank candidate graphs by similarity to a template.
    Compare {
        #[arg(long)]
        template: String,
        #[arg(long, value_delimiter = ',', required = true)]
        candidates: Vec<String>,
    },
    /// Write a session's replayable record.
    ExportSession {
        id: String,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Import a session record and replay it.
    ImportSession {
        file: PathBuf,
        /// Store under this id instead of the recorded one.
        #[arg(long)]
        id: Option<String>,
    },
    /// Write synthetic CSV fixtures: a template, five candidates and a large target.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    pub id: String,
    /// Enabled channels (comma separated); all channels when omitted.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Half-open time range `START,END`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub offset: f64,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub template: String,
    #[arg(long)]
    pub target: String,
    /// Session id; generated when omitted.
    #[arg(long)]
    pub session: Option<String>,
    /// Explicit seed as `TEMPLATE=TARGET` pairs; the best signature placement otherwise.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    pub seed: Option<Vec<(u64, u64)>>,
    /// Run the automatic accept/reject loop.
    #[arg(long)]
    pub auto: bool,
    /// Acceptance threshold for this session.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Proposals shown when not running automatically.
    #[arg(short, long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VerdictArg {
    Accept,
    Reject,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected START,END, got '{s}'"))?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}"));
    let (start, end) = (parse(a)?, parse(b)?);
    if !(start.is_finite() && end.is_finite() && start < end) {
        return Err(format!("range must satisfy START < END, got '{s}'"));
    }
    Ok((start, end))
}

fn parse_pair(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once('=')
        .ok_or_else(|| format!("expected TEMPLATE=TARGET, got '{s}'"))?;
    let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("'{x}': {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Other(String),
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Text sink that renders either JSON or a human summary.
struct Out {
    json: bool,
    text: String,
}

impl Out {
    fn emit<T: Serialize>(&mut self, value: &T, human: impl FnOnce(&mut String)) {
        if self.json {
            self.text = serde_json::to_string_pretty(value).expect("serializable output");
            self.text.push('\n');
        } else {
            human(&mut self.text);
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// printing to standard output and errors to standard error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn open(cli: &Cli) -> Result<Workspace, CliError> {
    Ok(Workspace::open(&cli.workspace)?)
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let mut out = Out {
        json: cli.json,
        text: String::new(),
    };
    match &cli.command {
        Command::Load { id, edges, nodes } => {
            let edge_bytes = read_file(edges)?;
            let node_bytes = nodes.as_deref().map(read_file).transpose()?;
            let ws = open(&cli)?;
            let info = ws.load_graph(id, &edge_bytes, node_bytes.as_deref())?;
            out.emit(&info, |t| {
                let _ = writeln!(
                    t,
                    "loaded '{}': {} nodes, {} edges",
                    info.id, info.nodes, info.edges
                );
                for w in &info.warnings {
                    let _ = writeln!(t, "warning: {w:?}");
                }
            });
        }
        Command::Remove { id } => {
            open(&cli)?.remove_graph(id)?;
            out.emit(&serde_json::json!({ "removed": id }), |t| {
                let _ = writeln!(t, "removed '{id}'");
            });
        }
        Command::List => {
            let graphs = open(&cli)?.list_graphs();
            out.emit(&graphs, |t| {
                for g in &graphs {
                    let _ = writeln!(
                        t,
                        "{}\t{} nodes\t{} edges\t{} visible",
                        g.id, g.nodes, g.edges, g.stats.edge_count
                    );
                }
            });
        }
        Command::Stats { id } => {
            let stats = open(&cli)?.graph(id)?.view.stats();
            out.emit(&stats, |t| {
                let _ = writeln!(t, "nodes: {}", stats.node_count);
                let _ = writeln!(t, "visible edges: {}", stats.edge_count);
                for (c, n) in &stats.per_channel {
                    let _ = writeln!(t, "  {c}: {n}");
                }
                if let Some(x) = stats.extent {
                    let _ = writeln!(t, "time extent: {} .. {}", x.start, x.end);
                }
            });
        }
        Command::View(args) => {
            let mut config = ViewConfig::all().with_offset(args.offset);
            if let Some(channels) = &args.channels {
                config = config.with_channels(channels);
            }
            if let Some((start, end)) = args.range {
                config = config.with_range(start, end);
            }
            let info = open(&cli)?.set_view(&args.id, config)?;
            out.emit(&info, |t| {
                let _ = writeln!(t, "'{}': {} visible edges", info.id, info.stats.edge_count);
            });
        }
        Command::Seeds {
            template,
            target,
            limit,
        } => {
            let seeds = open(&cli)?.seeds(template, target, *limit)?;
            out.emit(&seeds, |t| {
                if seeds.is_empty() {
                    let _ = writeln!(t, "no placements found");
                }
                for s in &seeds {
                    let pairs: Vec<String> = s.assignment.iter().map(|(a, b)| format!("{a}={b}")).collect();
                    let _ = writeln!(t, "{:.6}\t{}", s.score, pairs.join(","));
                }
            });
        }
        Command::Match(args) => run_match(&cli, args, &mut out)?,
        Command::Candidates { session, k } => {
            if *k == 0 {
                return Err(CliError::Other("k must be positive".into()));
            }
            let pairs = open(&cli)?.candidates(session, *k)?;
            out.emit(&pairs, |t| {
                for p in &pairs {
                    let _ = writeln!(
                        t,
                        "{} -> {}\tscore {:.6}\tanchors {:?}",
                        p.frontier, p.candidate, p.score.total, p.anchors
                    );
                }
            });
        }
        Command::Decide {
            session,
            template,
            target,
            verdict,
        } => {
            let verdict = match verdict {
                VerdictArg::Accept => Verdict::Accept,
                VerdictArg::Reject => Verdict::Reject,
            };
            let (decision, state) =
                open(&cli)?.decide(session, NodeId(*template), NodeId(*target), verdict, Actor::User)?;
            out.emit(
                &serde_json::json!({ "decision": decision, "session": state }),
                |t| {
                    let _ = writeln!(
                        t,
                        "{:?} {} -> {}: {} matched, {} unmatched",
                        decision.verdict,
                        decision.template,
                        decision.target,
                        state.summary.matched.len(),
                        state.summary.unmatched.len()
                    );
                },
            );
        }
        Command::Sessions => {
            let sessions = open(&cli)?.list_sessions();
            out.emit(&sessions, |t| {
                for s in &sessions {
                    let _ = writeln!(
                        t,
                        "{}\t{} -> {}\t{}/{} matched",
                        s.summary.id,
                        s.template,
                        s.target,
                        s.summary.matched.len(),
                        s.summary.template_nodes
                    );
                }
            });
        }
        Command::Compare { template, candidates } => {
            let ranking = open(&cli)?.compare(template, candidates)?;
            out.emit(&ranking, |t| {
                for (rank, r) in ranking.iter().enumerate() {
                    let _ = writeln!(
                        t,
                        "{}. {}\tscore {:.6}\t{:?}\t{} matched",
                        rank + 1,
                        r.graph,
                        r.ranked.score,
                        r.ranked.status,
                        r.ranked.mapping.len()
                    );
                }
            });
        }
        Command::ExportSession { id, out: file } => {
            let record = open(&cli)?.export_session(id)?;
            let mut text = serde_json::to_string_pretty(&record).expect("serializable record");
            text.push('\n');
            match file {
                Some(path) => {
                    write_file(path, text.as_bytes())?;
                    out.emit(&serde_json::json!({ "exported": id, "path": path }), |t| {
                        let _ = writeln!(t, "wrote {}", path.display());
                    });
                }
                None => out.text = text,
            }
        }
        Command::ImportSession { file, id } => {
            let bytes = read_file(file)?;
            let record: SessionRecord = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Other(format!("{}: {e}", file.display())))?;
            let state = open(&cli)?.import_session(record, id.as_deref())?;
            out.emit(&state, |t| {
                let _ = writeln!(
                    t,
                    "imported '{}': {} matched, {} decisions",
                    state.summary.id,
                    state.summary.matched.len(),
                    state.summary.decisions
                );
            });
        }
        Command::Generate { out: dir, seed } => {
            let files = generate_fixtures(dir, *seed)?;
            out.emit(&files, |t| {
                for f in &files {
                    let _ = writeln!(t, "wrote {f}");
                }
            });
        }
        Command::Serve { port, host } => {
            let ws = open(&cli)?;
            serve(ws, host, *port)?;
        }
    }
    Ok(out.text)
}

fn run_match(cli: &Cli, args: &MatchArgs, out: &mut Out) -> Result<(), CliError> {
    let ws = open(cli)?;
    let mut config = ws.config().similarity;
    if let Some(t) = args.threshold {
        config.accept_threshold = t;
    }
    let seed = match &args.seed {
        Some(pairs) => {
            let map: BTreeMap<NodeId, NodeId> = pairs.iter().map(|&(a, b)| (NodeId(a), NodeId(b))).collect();
            if map.len() != pairs.len() {
                return Err(CliError::Other("seed lists a template node twice".into()));
            }
            SeedChoice::Explicit(map)
        }
        None => SeedChoice::Auto,
    };
    let state = ws.create_session(
        args.session.as_deref(),
        &args.template,
        &args.target,
        seed,
        Some(config),
    )?;
    let id = state.summary.id.clone();
    if args.auto {
        let max = args.max_iter.unwrap_or(ws.config().auto.max_iterations);
        let (report, state) = ws.run_auto(&id, max)?;
        out.emit(&serde_json::json!({ "report": report, "session": state }), |t| {
            let _ = writeln!(
                t,
                "session '{id}': {:?} after {} iterations",
                report.status, report.iterations
            );
            let _ = writeln!(
                t,
                "matched {}/{} ({} accepted, {} rejected)",
                state.summary.matched.len(),
                state.summary.template_nodes,
                report.accepted,
                report.rejected
            );
            if let Some(score) = state.mapping_score {
                let _ = writeln!(t, "mapping score {score:.6}, coverage {:.3}", state.coverage);
            }
            for (a, b) in &state.summary.matched {
                let _ = writeln!(t, "  {a} -> {b}");
            }
        });
    } else {
        let proposals = ws.candidates(&id, args.k.max(1))?;
        out.emit(
            &serde_json::json!({ "session": state, "candidates": proposals }),
            |t| {
                let _ = writeln!(
                    t,
                    "session '{id}' opened with {} seed pairs; {} template nodes unmatched",
                    state.summary.matched.len(),
                    state.summary.unmatched.len()
                );
                for p in &proposals {
                    let _ = writeln!(
                        t,
                        "  {} -> {}\tscore {:.6}",
                        p.frontier, p.candidate, p.score.total
                    );
                }
            },
        );
    }
    Ok(())
}

fn serve(ws: Workspace, host: &str, port: u16) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Other(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let addr = format!("{host}:{port}");
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Other(format!("cannot listen on {addr}: {e}")))?;
        eprintln!("serving {} on http://{addr}/api", ws.root().display());
        let app = crate::api::router(Arc::new(ws));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Other(format!("server error: {e}")))
    })
}

fn write_graph(dir: &Path, name: &str, graph: &SyntheticGraph) -> Result<Vec<String>, CliError> {
    let (edges, nodes) = graph.to_csv();
    let e = dir.join(format!("{name}_edges.csv"));
    let n = dir.join(format!("{name}_nodes.csv"));
    write_file(&e, edges.as_bytes())?;
    write_file(&n, nodes.as_bytes())?;
    Ok(vec![e.display().to_string(), n.display().to_string()])
}

/// Template, five candidates (exact, 20% and 50% noisy, channel-shuffled,
/// unrelated) and a 1,000-node target with the template planted in it.
fn generate_fixtures(dir: &Path, seed: u64) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = random_connected(&mut rng, &GraphParams::template());
    let first = 1000;
    let candidates = [
        noisy_copy(&mut rng, &template, Noise::exact(), first).graph,
        noisy_copy(&mut rng, &template, Noise::noisy(0.2, DAY), first).graph,
        noisy_copy(&mut rng, &template, Noise::noisy(0.5, DAY), first).graph,
        noisy_copy(&mut rng, &template, Noise::shuffled(), first).graph,
        random_connected(
            &mut rng,
            &GraphParams {
                first_id: first,
                ..GraphParams::template()
            },
        ),
    ];
    let background = random_graph(&mut rng, &GraphParams::background());
    let target = plant(&mut rng, &template, &background, Noise::exact());

    let mut files = write_graph(dir, "template", &template)?;
    for (i, c) in candidates.iter().enumerate() {
        files.extend(write_graph(dir, &format!("c{}", i + 1), c)?);
    }
    files.extend(write_graph(dir, "target", &target.graph)?);
    let truth: Vec<(NodeId, NodeId)> = target.truth.into_iter().collect();
    let path = dir.join("target_truth.json");
    write_file(
        &path,
        serde_json::to_string_pretty(&truth)
            .expect("serializable")
            .as_bytes(),
    )?;
    files.push(path.display().to_string());
    Ok(files)
}
