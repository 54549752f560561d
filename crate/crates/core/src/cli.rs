//! Command-line interface: scan local trees, fetch and scan repositories,
//! summarise corpora, and compute rating agreement.
//!
//! Exit codes: 0 success, 1 usage/config/ratings problems, 2 ingestion or
//! fetch failures, 3 scan quality below the parse-failure threshold, 4
//! agreement undefined (single rating category).

use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::agreement::{self, AgreementError, RatingsTable};
use crate::ingest::{fetch_repository, FilterSpec, RepoRef};
use crate::report::{self, OutputFormat};
use crate::rules::{autogen_pack, RulePack};
use crate::{audit_tree, AuditOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INGEST: i32 = 2;
pub const EXIT_PARSE_BUDGET: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

const DEFAULT_FAIL_THRESHOLD: f64 = 0.25;

#[derive(Debug, Parser)]
#[command(
    name = "autonomy-audit",
    version,
    about = "Score the autonomy of AI-agent applications by static inspection"
)]
struct Cli {
    /// TOML config file providing defaults for scan options.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Scan a local source tree and print its autonomy scorecard.
    Scan(ScanCmd),
    /// Fetch a repository (optionally pinned to a revision), then scan it.
    Fetch(FetchCmd),
    /// Scan every repository in a list file and print the corpus matrix.
    Corpus(CorpusCmd),
    /// Compute Fleiss' kappa over a ratings CSV.
    Agree(AgreeCmd),
    /// Inspect or validate rule packs.
    Rulepack(RulepackCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Readable,
    Structured,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> OutputFormat {
        match f {
            FormatArg::Readable => OutputFormat::Readable,
            FormatArg::Structured => OutputFormat::Structured,
        }
    }
}

#[derive(Debug, Args)]
struct ScanOpts {
    /// Rule pack TOML file (defaults to the built-in AutoGen pack).
    #[arg(long)]
    rulepack: Option<PathBuf>,
    /// Output format; defaults to structured when writing a .json file,
    /// readable otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Write the report to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the file manifest (JSON) to this path.
    #[arg(long)]
    manifest_out: Option<PathBuf>,
    /// Omit the generation timestamp so repeated runs are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
    /// Restrict scanning to paths matching these globs (repeatable).
    #[arg(long)]
    include: Vec<String>,
    /// Drop paths matching these globs (repeatable).
    #[arg(long)]
    exclude: Vec<String>,
    /// Max tolerated fraction of host files the scanner gives up on.
    #[arg(long)]
    fail_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct ScanCmd {
    /// Root directory of the source tree.
    root: PathBuf,
    /// Repository name to record (defaults to the directory name).
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    opts: ScanOpts,
}

#[derive(Debug, Args)]
struct FetchCmd {
    /// Repository URL; /tree/<rev>[/<subdir>] locators are understood.
    locator: String,
    /// Revision (commit, tag, or branch) to pin; overrides the locator.
    #[arg(long)]
    rev: Option<String>,
    /// Keep the checkout here (must be empty); default is a temp directory.
    #[arg(long)]
    dest: Option<PathBuf>,
    #[command(flatten)]
    opts: ScanOpts,
}

#[derive(Debug, Args)]
struct CorpusCmd {
    /// Text file listing one repository per line (local path or URL);
    /// blank lines and #-comments are skipped.
    list: PathBuf,
    /// Directory to write one structured scorecard per repository into.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    opts: ScanOpts,
}

#[derive(Debug, Args)]
struct AgreeCmd {
    /// Ratings CSV with a subject,attribute,rater,level header.
    ratings: PathBuf,
    /// Report kappa separately per attribute.
    #[arg(long)]
    per_attribute: bool,
    /// Also report the mean of the per-attribute kappas.
    #[arg(long)]
    averaged: bool,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Args)]
struct RulepackCmd {
    #[command(subcommand)]
    action: RulepackAction,
}

#[derive(Debug, Subcommand)]
enum RulepackAction {
    /// Parse and validate a rule pack file.
    Validate { path: PathBuf },
    /// Print the built-in rule pack as TOML.
    Show {
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Defaults loadable from a TOML config file; flags win over config values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    rulepack: Option<PathBuf>,
    format: Option<String>,
    output: Option<PathBuf>,
    manifest_out: Option<PathBuf>,
    no_timestamp: Option<bool>,
    include: Option<Vec<String>>,
    exclude: Option<Vec<String>>,
    fail_threshold: Option<f64>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, String> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {path:?}: {e}"))?;
    toml::from_str(&text).map_err(|e| format!("invalid config {path:?}: {e}"))
}

/// Scan settings after merging flags over config over defaults.
struct Effective {
    pack: RulePack,
    format: Option<OutputFormat>,
    output: Option<PathBuf>,
    manifest_out: Option<PathBuf>,
    no_timestamp: bool,
    include: Vec<String>,
    exclude: Vec<String>,
    fail_threshold: f64,
}

fn resolve(opts: &ScanOpts, config: &FileConfig) -> Result<Effective, String> {
    let pack_path = opts.rulepack.clone().or_else(|| config.rulepack.clone());
    let pack = match pack_path {
        Some(path) => RulePack::load(&path).map_err(|e| e.to_string())?,
        None => autogen_pack(),
    };
    let format = match (&opts.format, &config.format) {
        (Some(f), _) => Some(OutputFormat::from(*f)),
        (None, Some(text)) => Some(text.parse::<OutputFormat>()?),
        (None, None) => None,
    };
    let include = if opts.include.is_empty() {
        config.include.clone().unwrap_or_default()
    } else {
        opts.include.clone()
    };
    let exclude = if opts.exclude.is_empty() {
        config.exclude.clone().unwrap_or_default()
    } else {
        opts.exclude.clone()
    };
    let fail_threshold = opts.fail_threshold.or(config.fail_threshold).unwrap_or(DEFAULT_FAIL_THRESHOLD);
    if !(0.0..=1.0).contains(&fail_threshold) {
        return Err(format!("fail threshold must be between 0 and 1, got {fail_threshold}"));
    }
    Ok(Effective {
        pack,
        format,
        output: opts.output.clone().or_else(|| config.output.clone()),
        manifest_out: opts.manifest_out.clone().or_else(|| config.manifest_out.clone()),
        no_timestamp: opts.no_timestamp || config.no_timestamp.unwrap_or(false),
        include,
        exclude,
        fail_threshold,
    })
}

fn pick_format(requested: Option<OutputFormat>, output: Option<&Path>) -> OutputFormat {
    if let Some(f) = requested {
        return f;
    }
    match output {
        Some(path) if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => OutputFormat::Structured,
        _ => OutputFormat::Readable,
    }
}

fn timestamp(suppress: bool) -> Option<String> {
    if suppress {
        None
    } else {
        Some(Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true))
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), String> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {path:?}: {e}")),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| format!("cannot write to stdout: {e}"))
        }
    }
}

fn dir_name(path: &Path) -> String {
    path.canonicalize()
        .ok()
        .as_deref()
        .unwrap_or(path)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "source".to_string())
}

/// Run the CLI and return the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                EXIT_OK
            } else {
                EXIT_USAGE
            };
            let _ = e.print();
            return code;
        }
    };
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Scan(cmd) => cmd_scan(cmd, &config),
        Command::Fetch(cmd) => cmd_fetch(cmd, &config),
        Command::Corpus(cmd) => cmd_corpus(cmd, &config),
        Command::Agree(cmd) => cmd_agree(cmd),
        Command::Rulepack(cmd) => cmd_rulepack(cmd),
    }
}

fn cmd_scan(cmd: ScanCmd, config: &FileConfig) -> i32 {
    let eff = match resolve(&cmd.opts, config) {
        Ok(e) => e,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    let repo = RepoRef {
        locator: cmd.root.display().to_string(),
        name: cmd.name.clone().unwrap_or_else(|| dir_name(&cmd.root)),
        revision: None,
    };
    let filter = FilterSpec {
        host_extensions: eff.pack.host_extensions.clone(),
        include: eff.include.clone(),
        exclude: eff.exclude.clone(),
    };
    let outcome = match audit_tree(&cmd.root, repo, &filter, &eff.pack) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INGEST;
        }
    };
    finish_scan(outcome, &eff)
}

fn finish_scan(outcome: AuditOutcome, eff: &Effective) -> i32 {
    let ts = timestamp(eff.no_timestamp);
    if let Some(path) = &eff.manifest_out {
        let mut manifest = outcome.manifest.clone();
        manifest.created_at = ts.clone();
        let mut text = match serde_json::to_string_pretty(&manifest) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot serialize manifest: {e}");
                return EXIT_INGEST;
            }
        };
        text.push('\n');
        if let Err(message) = emit(&text, Some(path)) {
            eprintln!("error: {message}");
            return EXIT_INGEST;
        }
    }
    let format = pick_format(eff.format, eff.output.as_deref());
    let text = match format {
        OutputFormat::Structured => report::render_json(&report::scorecard_json(&outcome.scorecard, ts.as_deref())),
        OutputFormat::Readable => report::render_scorecard_readable(&outcome.scorecard),
    };
    if let Err(message) = emit(&text, eff.output.as_deref()) {
        eprintln!("error: {message}");
        return EXIT_INGEST;
    }
    let fraction = outcome.scorecard.stats.parse_failure_fraction();
    if fraction > eff.fail_threshold {
        eprintln!(
            "error: scanner gave up on {:.1}% of host files (threshold {:.1}%)",
            fraction * 100.0,
            eff.fail_threshold * 100.0
        );
        return EXIT_PARSE_BUDGET;
    }
    EXIT_OK
}

fn cmd_fetch(cmd: FetchCmd, config: &FileConfig) -> i32 {
    let eff = match resolve(&cmd.opts, config) {
        Ok(e) => e,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    let tempdir;
    let dest = match &cmd.dest {
        Some(d) => d.clone(),
        None => {
            tempdir = match tempfile::tempdir() {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot create temp directory: {e}");
                    return EXIT_INGEST;
                }
            };
            tempdir.path().join("checkout")
        }
    };
    let fetched = match fetch_repository(&cmd.locator, cmd.rev.as_deref(), &dest) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INGEST;
        }
    };
    for w in &fetched.warnings {
        eprintln!("warning: {w}");
    }
    let filter = FilterSpec {
        host_extensions: eff.pack.host_extensions.clone(),
        include: eff.include.clone(),
        exclude: eff.exclude.clone(),
    };
    let outcome = match audit_tree(&fetched.checkout_root, fetched.repo.clone(), &filter, &eff.pack) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INGEST;
        }
    };
    finish_scan(outcome, &eff)
}

fn cmd_corpus(cmd: CorpusCmd, config: &FileConfig) -> i32 {
    let eff = match resolve(&cmd.opts, config) {
        Ok(e) => e,
        Err(message) => {
            eprintln!("error: {message}");
            return EXIT_USAGE;
        }
    };
    let list_text = match std::fs::read_to_string(&cmd.list) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read corpus list {:?}: {e}", cmd.list);
            return EXIT_USAGE;
        }
    };
    let list_dir = cmd.list.parent().map(Path::to_path_buf).unwrap_or_default();
    let filter_for = |pack: &RulePack| FilterSpec {
        host_extensions: pack.host_extensions.clone(),
        include: eff.include.clone(),
        exclude: eff.exclude.clone(),
    };
    let mut cards = Vec::new();
    let mut failures = 0usize;
    for raw in list_text.lines() {
        let entry = raw.trim();
        if entry.is_empty() || entry.starts_with('#') {
            continue;
        }
        let as_local = {
            let p = Path::new(entry);
            if p.is_dir() {
                Some(p.to_path_buf())
            } else {
                let joined = list_dir.join(entry);
                joined.is_dir().then_some(joined)
            }
        };
        let result = match as_local {
            Some(root) => {
                let repo = RepoRef {
                    locator: entry.to_string(),
                    name: dir_name(&root),
                    revision: None,
                };
                audit_tree(&root, repo, &filter_for(&eff.pack), &eff.pack)
            }
            None => match tempfile::tempdir() {
                Ok(tmp) => fetch_repository(entry, None, &tmp.path().join("checkout")).and_then(|fetched| {
                    audit_tree(&fetched.checkout_root, fetched.repo.clone(), &filter_for(&eff.pack), &eff.pack)
                }),
                Err(e) => {
                    eprintln!("error: cannot create temp directory: {e}");
                    return EXIT_INGEST;
                }
            },
        };
        match result {
            Ok(outcome) => cards.push(outcome.scorecard),
            Err(e) => {
                eprintln!("error: {entry}: {e}");
                failures += 1;
            }
        }
    }
    let ts = timestamp(eff.no_timestamp);
    if let Some(dir) = &cmd.output_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: cannot create {dir:?}: {e}");
            return EXIT_INGEST;
        }
        for (i, card) in cards.iter().enumerate() {
            let path = dir.join(format!("{:02}_{}.json", i + 1, card.repo.name));
            let text = report::render_json(&report::scorecard_json(card, ts.as_deref()));
            if let Err(message) = emit(&text, Some(&path)) {
                eprintln!("error: {message}");
                return EXIT_INGEST;
            }
        }
    }
    let matrix = report::corpus_matrix(&cards, &eff.pack.id());
    let format = pick_format(eff.format, eff.output.as_deref());
    let text = match format {
        OutputFormat::Structured => report::render_json(&report::corpus_json(&matrix, ts.as_deref())),
        OutputFormat::Readable => report::render_corpus_readable(&matrix),
    };
    if let Err(message) = emit(&text, eff.output.as_deref()) {
        eprintln!("error: {message}");
        return EXIT_INGEST;
    }
    if failures > 0 {
        eprintln!("error: {failures} corpus entr{} failed", if failures == 1 { "y" } else { "ies" });
        EXIT_INGEST
    } else {
        EXIT_OK
    }
}

fn cmd_agree(cmd: AgreeCmd) -> i32 {
    let table = match RatingsTable::from_csv_path(&cmd.ratings) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let pooled_matrix = match agreement::build_matrix(&table, None) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let raters = pooled_matrix.raters_per_item;
    let items = pooled_matrix.counts.len();

    let report = if cmd.per_attribute || cmd.averaged {
        let per = match agreement::per_attribute_kappa(&table) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        let averaged = cmd.averaged.then(|| agreement::averaged_kappa(&per));
        report::AgreementReport {
            raters,
            items,
            pooled: None,
            per_attribute: Some(per),
            averaged,
        }
    } else {
        match agreement::fleiss_kappa(&pooled_matrix) {
            Ok(v) => report::AgreementReport {
                raters,
                items,
                pooled: Some(v),
                per_attribute: None,
                averaged: None,
            },
            Err(AgreementError::Degenerate) => {
                eprintln!("error: {}", AgreementError::Degenerate);
                return EXIT_DEGENERATE;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    };
    let format = cmd.format.map(OutputFormat::from).unwrap_or(OutputFormat::Readable);
    let text = match format {
        OutputFormat::Structured => report::render_json(&report::agreement_json(&report)),
        OutputFormat::Readable => report::render_agreement_readable(&report),
    };
    if let Err(message) = emit(&text, None) {
        eprintln!("error: {message}");
        return EXIT_INGEST;
    }
    EXIT_OK
}

fn cmd_rulepack(cmd: RulepackCmd) -> i32 {
    match cmd.action {
        RulepackAction::Validate { path } => match RulePack::load(&path) {
            Ok(pack) => {
                println!("rule pack {} is valid ({} flag kinds, {} attributes)", pack.id(), pack.flag_patterns.len(), pack.attributes.len());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        RulepackAction::Show { output } => {
            let pack = autogen_pack();
            match pack.to_toml() {
                Ok(text) => {
                    if let Err(message) = emit(&text, output.as_deref()) {
                        eprintln!("error: {message}");
                        return EXIT_INGEST;
                    }
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            }
        }
    }
}
