//! Resolves flags, config files and replayed manifests into one run.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, FromArgMatches};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::args::{Cli, Command, DEFAULT_OUT_DIR, DEFAULT_SEED};

/// Bad flags or parameters; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Map<String, Value>,
    pub master_seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }
}

#[derive(Debug)]
pub struct Resolved {
    pub command: Command,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
    /// Final subcommand parameters, keyed by flag name.
    pub config: Map<String, Value>,
}

const GLOBAL_KEYS: [&str; 4] = ["seed", "jobs", "out_dir", "command"];

fn snake(key: &str) -> String {
    key.replace('-', "_")
}

fn kebab(key: &str) -> String {
    key.replace('_', "-")
}

/// Parameters from a `--config` file: a plain map, or a manifest to replay.
struct FileConfig {
    command: Option<String>,
    seed: Option<u64>,
    jobs: Option<usize>,
    out_dir: Option<PathBuf>,
    params: Map<String, Value>,
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(obj) = value else {
        return Err(usage(format!("config {} must hold a JSON object", path.display())));
    };
    if obj.contains_key("master_seed") && obj.contains_key("config") {
        let m: RunManifest = serde_json::from_value(Value::Object(obj))
            .map_err(|e| usage(format!("manifest {} is malformed: {e}", path.display())))?;
        return Ok(FileConfig {
            command: Some(m.command),
            seed: Some(m.master_seed),
            jobs: None,
            out_dir: None,
            params: m.config.into_iter().map(|(k, v)| (snake(&k), v)).collect(),
        });
    }
    let mut fc = FileConfig {
        command: None,
        seed: None,
        jobs: None,
        out_dir: None,
        params: Map::new(),
    };
    for (k, v) in obj {
        let key = snake(&k);
        let bad = |what: &str| usage(format!("config key `{k}` must be {what}"));
        match key.as_str() {
            "seed" => fc.seed = Some(v.as_u64().ok_or_else(|| bad("a nonnegative integer"))?),
            "jobs" => fc.jobs = Some(v.as_u64().ok_or_else(|| bad("a positive integer"))? as usize),
            "out_dir" => fc.out_dir = Some(PathBuf::from(v.as_str().ok_or_else(|| bad("a path"))?)),
            "command" => fc.command = Some(v.as_str().ok_or_else(|| bad("a subcommand name"))?.to_string()),
            _ => {
                fc.params.insert(key, v);
            }
        }
    }
    Ok(fc)
}

/// Overlays `params` on the parsed arguments, except where the flag was
/// given on the command line.
fn merge<T: Serialize + DeserializeOwned>(
    parsed: &T,
    matches: &ArgMatches,
    params: &Map<String, Value>,
) -> Result<(T, Map<String, Value>)> {
    let Value::Object(mut map) = serde_json::to_value(parsed)? else {
        unreachable!("argument structs serialize to objects")
    };
    for (key, value) in params {
        if GLOBAL_KEYS.contains(&key.as_str()) {
            continue;
        }
        let Some(current) = map.get(key) else {
            return Err(usage(format!("unknown config key `{}`", kebab(key))));
        };
        if matches.value_source(key) == Some(ValueSource::CommandLine) {
            continue;
        }
        // numbers and booleans are accepted where the flag takes text
        let value = match (current, value) {
            (Value::String(_), Value::Number(n)) => Value::String(n.to_string()),
            (Value::String(_), Value::Bool(b)) => Value::String(b.to_string()),
            _ => value.clone(),
        };
        map.insert(key.clone(), value);
    }
    let resolved: T = serde_json::from_value(Value::Object(map.clone()))
        .map_err(|e| usage(format!("bad config value: {e}")))?;
    let config = map.into_iter().map(|(k, v)| (kebab(&k), v)).collect();
    Ok((resolved, config))
}

fn parse(argv: &[OsString]) -> Result<ArgMatches> {
    Cli::command().try_get_matches_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
            e.exit();
        }
        let text = e.to_string();
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .unwrap_or("invalid arguments")
            .trim_start_matches("error: ")
            .to_string();
        usage(line)
    })
}

pub fn resolve(argv: Vec<OsString>) -> Result<Resolved> {
    let matches = parse(&argv)?;
    let cli = Cli::from_arg_matches(&matches).map_err(|e| usage(e.to_string()))?;
    let file = cli.config.as_deref().map(read_config).transpose()?;

    let given = cli.command.as_ref().map(Command::name);
    let from_file = file.as_ref().and_then(|f| f.command.clone());
    let name = match (given, from_file.as_deref()) {
        (Some(a), Some(b)) if a != b => {
            return Err(usage(format!("command `{a}` does not match the config's `{b}`")))
        }
        (Some(a), _) => a.to_string(),
        (None, Some(b)) => b.to_string(),
        (None, None) => return Err(usage("no command given; see --help")),
    };
    let (command, sub_matches) = match cli.command {
        Some(c) => {
            let sub = matches.subcommand().expect("subcommand parsed").1.clone();
            (c, sub)
        }
        None => {
            let argv = [OsString::from("trends"), OsString::from(&name)];
            let m = parse(&argv).map_err(|_| usage(format!("unknown command `{name}` in config")))?;
            let c = Cli::from_arg_matches(&m).map_err(|e| usage(e.to_string()))?;
            let sub = m.subcommand().expect("subcommand parsed").1.clone();
            (c.command.expect("subcommand parsed"), sub)
        }
    };

    let empty = Map::new();
    let params = file.as_ref().map_or(&empty, |f| &f.params);
    macro_rules! merged {
        ($variant:ident, $args:expr) => {{
            let (a, cfg) = merge(&$args, &sub_matches, params)?;
            (Command::$variant(a), cfg)
        }};
    }
    let (command, config) = match command {
        Command::Synth(a) => merged!(Synth, a),
        Command::Ingest(a) => merged!(Ingest, a),
        Command::Corr(a) => merged!(Corr, a),
        Command::Simulate(a) => merged!(Simulate, a),
        Command::Nowcast(a) => merged!(Nowcast, a),
        Command::Vintages(a) => merged!(Vintages, a),
    };

    let jobs = cli.jobs.or(file.as_ref().and_then(|f| f.jobs));
    if jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    Ok(Resolved {
        command,
        seed: cli.seed.or(file.as_ref().and_then(|f| f.seed)).unwrap_or(DEFAULT_SEED),
        jobs,
        out_dir: cli
            .out_dir
            .or(file.as_ref().and_then(|f| f.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        config,
    })
}

/// RFC 3339 time of the run; `SOURCE_DATE_EPOCH` pins it for reproducible builds.
pub fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
