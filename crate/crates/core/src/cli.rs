//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input file or config parse error, 3 ledger
//! error, 4 invalid flags, 5 verification failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::audit::{AuditError, AuditLog, Query};
use crate::bench::{self, BenchScenario};
use crate::codec::{self, EncodingMode, Field};
use crate::engine::{sort_results, EngineError, Predicate, SelectivityList, SortOrder};
use crate::ledger::{Chain, ChainConfig};
use crate::network::{node_chain_path, ClusterConfig, NodeId};
use crate::tsindex::TsIndexParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_LEDGER: i32 = 3;
pub const EXIT_USAGE: i32 = 4;
pub const EXIT_VERIFY: i32 = 5;

pub const DEFAULT_DATA_DIR: &str = "auditchain-data";

#[derive(Debug, Parser)]
#[command(name = "auditchain", version, about = "Append-only audit log ledger")]
struct Cli {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Encoding: baseline, enhanced or enhanced-norm. Overrides the config.
    #[arg(long, global = true)]
    mode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Insert a log file at one node and confirm it.
    Insert {
        #[arg(long, default_value_t = 0)]
        node: usize,
        #[arg(long)]
        file: PathBuf,
    },
    /// Query records by field values and/or an inclusive timestamp range.
    Query(QueryArgs),
    /// Run a benchmark scenario and print CSV.
    Bench {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Check every node's hash chain.
    Verify,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long, default_value_t = 0)]
    node: usize,
    #[arg(long)]
    timestamp: Option<String>,
    #[arg(long = "node-field")]
    node_field: Option<String>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long = "ref-id")]
    ref_id: Option<String>,
    #[arg(long)]
    user: Option<String>,
    #[arg(long)]
    activity: Option<String>,
    #[arg(long)]
    resource: Option<String>,
    #[arg(long)]
    from: Option<String>,
    #[arg(long)]
    to: Option<String>,
    #[arg(long)]
    sort: Option<String>,
    #[arg(long)]
    order: Option<String>,
}

/// Settings read from the config file. Every key is optional.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub cluster: ClusterConfig,
    pub enhanced: bool,
    pub normalize: bool,
    pub params: TsIndexParams,
    pub data_dir: PathBuf,
    pub selectivity_sample: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            cluster: ClusterConfig::default(),
            enhanced: true,
            normalize: false,
            params: TsIndexParams::default(),
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            selectivity_sample: None,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn apply_mode(cfg: &mut Config, mode: &str) -> Result<(), String> {
    match mode {
        "baseline" => cfg.enhanced = false,
        "enhanced" => {
            cfg.enhanced = true;
            cfg.normalize = false;
        }
        "enhanced-norm" | "normalized" => {
            cfg.enhanced = true;
            cfg.normalize = true;
        }
        other => return Err(format!("unknown mode {other:?}")),
    }
    Ok(())
}

impl Config {
    /// Parses a flat `key=value` file. Relative paths in it are taken
    /// relative to the file's directory.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut cfg = Config::default();
        let (mut levels, mut mult) = (cfg.params.levels(), cfg.params.multiplier());
        let mut normalize = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || format!("config line {}: bad value {v:?} for {k}", n + 1);
            match k {
                "nodes" => cfg.cluster.nodes = v.parse().map_err(|_| bad())?,
                "batch_limit" => cfg.cluster.batch_limit = v.parse().map_err(|_| bad())?,
                "confirm_delay" => cfg.cluster.confirm_delay = v.parse().map_err(|_| bad())?,
                "mode" => apply_mode(&mut cfg, v).map_err(|_| bad())?,
                "normalize" => normalize = Some(parse_bool(v).ok_or_else(bad)?),
                "ts_levels" => levels = v.parse().map_err(|_| bad())?,
                "ts_multiplier" => mult = v.parse().map_err(|_| bad())?,
                "data_dir" => cfg.data_dir = base_dir.join(v),
                "selectivity_sample" => cfg.selectivity_sample = Some(base_dir.join(v)),
                other => return Err(format!("config line {}: unknown key {other:?}", n + 1)),
            }
        }
        if let Some(b) = normalize {
            cfg.normalize = b;
        }
        cfg.params = TsIndexParams::new(levels, mult).map_err(|e| e.to_string())?;
        cfg.cluster.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn encoding(&self) -> EncodingMode {
        match (self.enhanced, self.normalize) {
            (false, _) => EncodingMode::Baseline,
            (true, false) => EncodingMode::enhanced(self.params.clone()),
            (true, true) => EncodingMode::normalized(self.params.clone()),
        }
    }
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    let mut cfg = match &cli.config {
        None => Config::default(),
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match Config::parse(&text, path.parent().unwrap_or(Path::new("."))) {
                Ok(c) => c,
                Err(e) => return fail(err, EXIT_PARSE, &e),
            },
            Err(e) => return fail(err, EXIT_PARSE, &format!("{}: {e}", path.display())),
        },
    };
    if let Some(m) = &cli.mode {
        if let Err(e) = apply_mode(&mut cfg, m) {
            return fail(err, EXIT_USAGE, &e);
        }
    }
    match cli.command {
        Command::Insert { node, file } => cmd_insert(&cfg, NodeId(node), &file, out, err),
        Command::Query(q) => cmd_query(&cfg, &q, out, err),
        Command::Bench { scenario } => cmd_bench(&cfg, scenario.as_deref(), out, err),
        Command::Verify => cmd_verify(&cfg, out, err),
    }
}

fn fail(err: &mut dyn Write, code: i32, msg: &str) -> i32 {
    let _ = writeln!(err, "error: {msg}");
    code
}

fn open_log(cfg: &Config) -> Result<AuditLog, AuditError> {
    AuditLog::open(cfg.cluster, cfg.encoding(), &cfg.data_dir)
}

fn cmd_insert(cfg: &Config, node: NodeId, file: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => return fail(err, EXIT_PARSE, &format!("{}: {e}", file.display())),
    };
    let records = match codec::parse_log(&text) {
        Ok(r) => r,
        Err((line, e)) => return fail(err, EXIT_PARSE, &format!("{}: line {line}: {e}", file.display())),
    };
    if node.0 >= cfg.cluster.nodes {
        return fail(err, EXIT_USAGE, &format!("unknown node {node}"));
    }
    let result = (|| {
        let mut log = open_log(cfg)?;
        log.insert_all(node, &records)?;
        let blocks = log.sync()?.len();
        let bytes = log.view(node)?.chain_size_bytes();
        Ok::<_, AuditError>((blocks, bytes))
    })();
    match result {
        Ok((blocks, bytes)) => {
            let _ = writeln!(out, "inserted={} blocks={blocks} bytes={bytes}", records.len());
            EXIT_OK
        }
        Err(e) => fail(err, EXIT_LEDGER, &e.to_string()),
    }
}

fn build_query(q: &QueryArgs) -> Result<(Query, Option<(Field, SortOrder)>), String> {
    let mut preds = Vec::new();
    for (field, value) in [
        (Field::Timestamp, &q.timestamp),
        (Field::Node, &q.node_field),
        (Field::Id, &q.id),
        (Field::RefId, &q.ref_id),
        (Field::User, &q.user),
        (Field::Activity, &q.activity),
        (Field::Resource, &q.resource),
    ] {
        if let Some(v) = value {
            preds.push(Predicate::new(field, v.as_str()).map_err(|e| e.to_string())?);
        }
    }
    let bound = |s: &Option<String>| s.as_deref().map(codec::parse_timestamp).transpose().map_err(|e| e.to_string());
    let range = match (bound(&q.from)?, bound(&q.to)?) {
        (Some(a), Some(b)) if a <= b => Some((a, b)),
        (Some(a), Some(b)) => return Err(format!("--from {a} is after --to {b}")),
        (None, None) => None,
        _ => return Err("--from and --to must be given together".into()),
    };
    if preds.is_empty() && range.is_none() {
        return Err("give at least one field predicate or a --from/--to range".into());
    }
    let sort = match (&q.sort, &q.order) {
        (None, None) => None,
        (None, Some(_)) => return Err("--order needs --sort".into()),
        (Some(f), o) => {
            let field: Field = f.parse().map_err(|e: codec::CodecError| e.to_string())?;
            let order = match o {
                Some(o) => o.parse()?,
                None => SortOrder::Asc,
            };
            Some((field, order))
        }
    };
    Ok((
        Query {
            predicates: preds,
            range,
        },
        sort,
    ))
}

fn cmd_query(cfg: &Config, args: &QueryArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (query, sort) = match build_query(args) {
        Ok(q) => q,
        Err(e) => return fail(err, EXIT_USAGE, &e),
    };
    if args.node >= cfg.cluster.nodes {
        return fail(err, EXIT_USAGE, &format!("unknown node {}", args.node));
    }
    let mut log = match open_log(cfg) {
        Ok(l) => l,
        Err(e) => return fail(err, EXIT_LEDGER, &e.to_string()),
    };
    if let Some(path) = &cfg.selectivity_sample {
        let sel = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))
            .and_then(|t| codec::parse_log(&t).map_err(|(l, e)| format!("{}: line {l}: {e}", path.display())))
            .and_then(|sample| SelectivityList::build(&sample).map_err(|e| e.to_string()));
        match sel {
            Ok(s) => log.set_selectivity(s),
            Err(e) => return fail(err, EXIT_PARSE, &e),
        }
    }
    let rs = match log.query(NodeId(args.node), &query) {
        Ok(rs) => rs,
        Err(AuditError::Engine(e @ (EngineError::ConflictingPredicates(_) | EngineError::InvalidRange { .. }))) => {
            return fail(err, EXIT_USAGE, &e.to_string())
        }
        Err(e) => return fail(err, EXIT_LEDGER, &e.to_string()),
    };
    let rs = match sort {
        Some((f, o)) => sort_results(rs, f, o),
        None => rs,
    };
    for line in rs.lines() {
        let _ = writeln!(out, "{line}");
    }
    EXIT_OK
}

fn cmd_bench(cfg: &Config, scenario: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let base = BenchScenario {
        cluster: cfg.cluster,
        params: cfg.params.clone(),
        ..BenchScenario::default()
    };
    let s = match scenario {
        None => base,
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match BenchScenario::parse_with_base(&text, base) {
                Ok(s) => s,
                Err(e) => return fail(err, EXIT_PARSE, &format!("{}: {e}", path.display())),
            },
            Err(e) => return fail(err, EXIT_PARSE, &format!("{}: {e}", path.display())),
        },
    };
    let _ = writeln!(
        err,
        "scenario={} order={:?} rounds={} params=({}, {})",
        s.name,
        s.order,
        s.rounds,
        s.params.levels(),
        s.params.multiplier()
    );
    match bench::run_scenario(&s) {
        Ok(results) => {
            let _ = write!(out, "{}", bench::to_csv(&results));
            EXIT_OK
        }
        Err(e) => fail(err, EXIT_LEDGER, &e.to_string()),
    }
}

fn cmd_verify(cfg: &Config, out: &mut dyn Write, _err: &mut dyn Write) -> i32 {
    let mut code = EXIT_OK;
    for i in 0..cfg.cluster.nodes {
        let path = node_chain_path(&cfg.data_dir, i);
        let loaded = if path.exists() {
            std::fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|b| Chain::from_bytes(&b, ChainConfig::default()).map_err(|e| e.to_string()))
        } else {
            Ok(Chain::new(ChainConfig::default()))
        };
        match loaded {
            Ok(chain) => {
                let ok = chain.verify_chain();
                if !ok {
                    code = EXIT_VERIFY;
                }
                let _ = writeln!(
                    out,
                    "node={i} height={} txs={} verified={ok}",
                    chain.height(),
                    chain.tx_count()
                );
            }
            Err(e) => {
                code = EXIT_VERIFY;
                let _ = writeln!(out, "node={i} height=- txs=- verified=false error={e}");
            }
        }
    }
    code
}
