//! Report rendering: machine-readable JSON and fixed-width readable text for
//! scorecards, corpus matrices, and agreement statistics. All output is
//! deterministic ASCII; timestamps are optional so runs can be byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::rules::{level_name, Attribute, Level, RepoScorecard};
use crate::scan::{FlagSite, Provenance};

/// Output style. `Readable` is a fixed-width text report; `Structured` is
/// pretty-printed JSON with sorted keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Readable,
    Structured,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "readable" | "text" => Ok(OutputFormat::Readable),
            "structured" | "json" => Ok(OutputFormat::Structured),
            _ => Err(format!("unknown output format: {s:?} (expected readable or structured)")),
        }
    }
}

fn provenance_key(p: Provenance) -> &'static str {
    match p {
        Provenance::Explicit => "explicit",
        Provenance::FrameworkDefault => "framework_default",
    }
}

fn site_json(site: &FlagSite) -> Value {
    let mut m = serde_json::Map::new();
    m.insert("path".to_string(), json!(site.location.path));
    m.insert("line".to_string(), json!(site.location.line));
    m.insert("column".to_string(), json!(site.location.column));
    m.insert("flag".to_string(), json!(site.kind.to_string()));
    m.insert("value".to_string(), json!(site.value.to_string()));
    m.insert("provenance".to_string(), json!(provenance_key(site.provenance)));
    if let Some(name) = &site.constructor_name {
        m.insert("constructor".to_string(), json!(name));
    }
    if let Some(scope) = &site.enclosing_construct {
        m.insert("scope".to_string(), json!(scope));
    }
    Value::Object(m)
}

/// Build the structured scorecard document. `generated_at` is omitted when
/// `None`, which makes repeated runs byte-identical.
pub fn scorecard_json(card: &RepoScorecard, generated_at: Option<&str>) -> Value {
    let mut scores = serde_json::Map::new();
    for (attribute, score) in &card.scores {
        scores.insert(
            attribute.key().to_string(),
            json!({
                "level": level_name(score.level),
                "mixed": score.mixed,
                "notes": score.notes,
                "evidence": score.evidence.iter().map(site_json).collect::<Vec<_>>(),
            }),
        );
    }
    let mut root = serde_json::Map::new();
    root.insert("schema_version".to_string(), json!("1"));
    if let Some(ts) = generated_at {
        root.insert("generated_at".to_string(), json!(ts));
    }
    root.insert(
        "repo".to_string(),
        json!({
            "locator": card.repo.locator,
            "name": card.repo.name,
            "revision": card.repo.revision,
        }),
    );
    root.insert("rulepack".to_string(), json!(card.rulepack_id));
    root.insert("manifest_sha256".to_string(), json!(card.manifest_sha256));
    root.insert("scores".to_string(), Value::Object(scores));
    root.insert(
        "stats".to_string(),
        json!({
            "host_files": card.stats.host_files,
            "gave_up_files": card.stats.gave_up_files,
            "site_count": card.stats.site_count,
        }),
    );
    root.insert("warnings".to_string(), json!(card.stats.warnings));
    Value::Object(root)
}

/// Pretty JSON text with a trailing newline.
pub fn render_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json renders");
    s.push('\n');
    s
}

fn level_cell(level: Option<Level>, mixed: bool) -> String {
    if mixed {
        format!("{} (mixed)", level_name(level))
    } else {
        level_name(level).to_string()
    }
}

/// Fixed-width readable scorecard.
pub fn render_scorecard_readable(card: &RepoScorecard) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "autonomy scorecard");
    let _ = writeln!(out, "==================");
    let _ = writeln!(out, "repository : {}", card.repo.name);
    let _ = writeln!(out, "locator    : {}", card.repo.locator);
    let _ = writeln!(out, "revision   : {}", card.repo.revision.as_deref().unwrap_or("unpinned"));
    let _ = writeln!(out, "rule pack  : {}", card.rulepack_id);
    let _ = writeln!(out, "manifest   : sha256:{}", card.manifest_sha256);
    let _ = writeln!(
        out,
        "scanned    : {} host file(s), {} flag site(s)",
        card.stats.host_files, card.stats.site_count
    );
    out.push('\n');
    for (attribute, score) in &card.scores {
        let _ = writeln!(out, "{:<18} {}", attribute.display_name(), level_cell(score.level, score.mixed));
    }
    for (attribute, score) in &card.scores {
        if score.evidence.is_empty() && score.notes.is_empty() {
            continue;
        }
        out.push('\n');
        let _ = writeln!(out, "{}: {}", attribute.display_name(), level_cell(score.level, score.mixed));
        for site in &score.evidence {
            let mut line = format!("  {} {} = {} [{}]", site.location, site.kind, site.value, site.provenance);
            if let Some(name) = &site.constructor_name {
                let _ = write!(line, " via {name}");
            }
            if let Some(scope) = &site.enclosing_construct {
                let _ = write!(line, " in {scope}");
            }
            let _ = writeln!(out, "{line}");
        }
        for note in &score.notes {
            let _ = writeln!(out, "  note: {note}");
        }
    }
    if !card.stats.warnings.is_empty() {
        out.push('\n');
        let _ = writeln!(out, "warnings");
        for w in &card.stats.warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    out
}

/// One repository's place in a corpus matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    /// Short key used inside matrix cells ("1", "2", ...).
    pub key: String,
    pub name: String,
}

/// A corpus summarised as level x attribute cells listing repository keys.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusMatrix {
    pub rulepack_id: String,
    pub entries: Vec<CorpusEntry>,
    /// Rows in display order: lower, middle, higher, unknown.
    pub rows: Vec<MatrixRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub label: String,
    pub cells: BTreeMap<Attribute, Vec<String>>,
}

/// Summarise scorecards (in input order; keys are 1-based positions).
pub fn corpus_matrix(cards: &[RepoScorecard], rulepack_id: &str) -> CorpusMatrix {
    let entries: Vec<CorpusEntry> = cards
        .iter()
        .enumerate()
        .map(|(i, card)| CorpusEntry {
            key: (i + 1).to_string(),
            name: card.repo.name.clone(),
        })
        .collect();
    let row_levels: [Option<Level>; 4] = [Some(Level::Lower), Some(Level::Middle), Some(Level::Higher), None];
    let rows = row_levels
        .into_iter()
        .map(|row_level| {
            let mut cells = BTreeMap::new();
            for attribute in Attribute::ALL {
                let keys: Vec<String> = cards
                    .iter()
                    .enumerate()
                    .filter(|(_, card)| {
                        card.scores.get(&attribute).map_or(row_level.is_none(), |s| s.level == row_level)
                    })
                    .map(|(i, _)| (i + 1).to_string())
                    .collect();
                cells.insert(attribute, keys);
            }
            MatrixRow {
                label: level_name(row_level).to_string(),
                cells,
            }
        })
        .collect();
    CorpusMatrix {
        rulepack_id: rulepack_id.to_string(),
        entries,
        rows,
    }
}

fn cell_text(keys: &[String]) -> String {
    if keys.is_empty() {
        "-".to_string()
    } else {
        keys.join(", ")
    }
}

/// Readable matrix: one row per level, one column per attribute, cells
/// listing repository keys, followed by a key legend.
pub fn render_corpus_readable(matrix: &CorpusMatrix) -> String {
    let headers: Vec<String> = std::iter::once("level".to_string())
        .chain(Attribute::ALL.iter().map(|a| a.key().to_string()))
        .collect();
    let mut widths: Vec<usize> = headers.iter().map(String::len).collect();
    let mut grid: Vec<Vec<String>> = Vec::new();
    for row in &matrix.rows {
        let mut cells = vec![row.label.clone()];
        for attribute in Attribute::ALL {
            cells.push(cell_text(row.cells.get(&attribute).map_or(&[][..], Vec::as_slice)));
        }
        for (w, cell) in widths.iter_mut().zip(&cells) {
            *w = (*w).max(cell.len());
        }
        grid.push(cells);
    }

    let render_row = |cells: &[String]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        padded.join(" | ").trim_end().to_string()
    };

    let mut out = String::new();
    let _ = writeln!(out, "corpus autonomy matrix");
    let _ = writeln!(out, "rule pack: {}", matrix.rulepack_id);
    out.push('\n');
    let _ = writeln!(out, "{}", render_row(&headers));
    let separator: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", separator.join("-+-"));
    for cells in &grid {
        let _ = writeln!(out, "{}", render_row(cells));
    }
    out.push('\n');
    let _ = writeln!(out, "legend:");
    for entry in &matrix.entries {
        let _ = writeln!(out, "  {}: {}", entry.key, entry.name);
    }
    out
}

/// Structured corpus matrix document.
pub fn corpus_json(matrix: &CorpusMatrix, generated_at: Option<&str>) -> Value {
    let mut legend = serde_json::Map::new();
    for entry in &matrix.entries {
        legend.insert(entry.key.clone(), json!(entry.name));
    }
    let mut rows = serde_json::Map::new();
    for row in &matrix.rows {
        let mut cells = serde_json::Map::new();
        for (attribute, keys) in &row.cells {
            cells.insert(attribute.key().to_string(), json!(keys));
        }
        rows.insert(row.label.clone(), Value::Object(cells));
    }
    let mut root = serde_json::Map::new();
    root.insert("schema_version".to_string(), json!("1"));
    root.insert("kind".to_string(), json!("corpus_matrix"));
    if let Some(ts) = generated_at {
        root.insert("generated_at".to_string(), json!(ts));
    }
    root.insert("rulepack".to_string(), json!(matrix.rulepack_id));
    root.insert("legend".to_string(), Value::Object(legend));
    root.insert("matrix".to_string(), Value::Object(rows));
    Value::Object(root)
}

/// Agreement results prepared for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub raters: u64,
    pub items: usize,
    /// Pooled kappa, when computed.
    pub pooled: Option<f64>,
    /// Per-attribute kappas; `None` values are undefined (single category).
    pub per_attribute: Option<BTreeMap<Attribute, Option<f64>>>,
    /// Mean of the defined per-attribute kappas, when requested.
    pub averaged: Option<Option<f64>>,
}

/// Kappa values print with nine decimals.
pub fn format_kappa(v: f64) -> String {
    format!("{v:.9}")
}

pub fn render_agreement_readable(report: &AgreementReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fleiss kappa");
    let _ = writeln!(out, "raters : {}", report.raters);
    let _ = writeln!(out, "items  : {}", report.items);
    if let Some(v) = report.pooled {
        let _ = writeln!(out, "pooled : {}", format_kappa(v));
    }
    if let Some(per) = &report.per_attribute {
        let _ = writeln!(out, "by attribute:");
        for (attribute, kappa) in per {
            match kappa {
                Some(v) => {
                    let _ = writeln!(out, "  {:<18} {}", attribute.key(), format_kappa(*v));
                }
                None => {
                    let _ = writeln!(out, "  {:<18} undefined (single category)", attribute.key());
                }
            }
        }
    }
    if let Some(avg) = &report.averaged {
        match avg {
            Some(v) => {
                let _ = writeln!(out, "average: {}", format_kappa(*v));
            }
            None => {
                let _ = writeln!(out, "average: undefined");
            }
        }
    }
    out
}

pub fn agreement_json(report: &AgreementReport) -> Value {
    let mut root = serde_json::Map::new();
    root.insert("schema_version".to_string(), json!("1"));
    root.insert("kind".to_string(), json!("agreement"));
    root.insert("raters".to_string(), json!(report.raters));
    root.insert("items".to_string(), json!(report.items));
    if let Some(v) = report.pooled {
        root.insert("pooled".to_string(), json!(v));
    }
    if let Some(per) = &report.per_attribute {
        let mut m = serde_json::Map::new();
        for (attribute, kappa) in per {
            m.insert(attribute.key().to_string(), json!(kappa));
        }
        root.insert("per_attribute".to_string(), Value::Object(m));
    }
    if let Some(avg) = &report.averaged {
        root.insert("averaged".to_string(), json!(avg));
    }
    Value::Object(root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RepoRef;
    use crate::rules::{AttributeScore, ScanStats};

    fn card(name: &str, levels: [Option<Level>; 5], mixed: [bool; 5]) -> RepoScorecard {
        let scores: BTreeMap<Attribute, AttributeScore> = Attribute::ALL
            .into_iter()
            .zip(levels.into_iter().zip(mixed))
            .map(|(attribute, (level, mixed))| {
                (
                    attribute,
                    AttributeScore {
                        attribute,
                        level,
                        mixed,
                        evidence: Vec::new(),
                        notes: Vec::new(),
                    },
                )
            })
            .collect();
        RepoScorecard {
            repo: RepoRef {
                locator: format!("file:///tmp/{name}"),
                name: name.to_string(),
                revision: None,
            },
            manifest_sha256: "0".repeat(64),
            rulepack_id: "autogen/1".to_string(),
            scores,
            stats: ScanStats {
                host_files: 1,
                gave_up_files: 0,
                site_count: 3,
                warnings: Vec::new(),
            },
        }
    }

    #[test]
    fn corpus_matrix_renders_fixed_grid() {
        let cards = vec![
            card(
                "alpha",
                [Some(Level::Higher), Some(Level::Lower), Some(Level::Middle), Some(Level::Lower), Some(Level::Middle)],
                [false; 5],
            ),
            card("beta", [Some(Level::Higher), None, None, None, None], [false; 5]),
        ];
        let matrix = corpus_matrix(&cards, "autogen/1");
        let rendered = render_corpus_readable(&matrix);
        let expected = "\
corpus autonomy matrix
rule pack: autogen/1

level   | actions | environment | orchestration | human_in_the_loop | observability
--------+---------+-------------+---------------+-------------------+--------------
lower   | -       | 1           | -             | 1                 | -
middle  | -       | -           | 1             | -                 | 1
higher  | 1, 2    | -           | -             | -                 | -
unknown | -       | 2           | 2             | 2                 | 2

legend:
  1: alpha
  2: beta
";
        assert_eq!(rendered, expected);
    }

    #[test]
    fn corpus_json_shape() {
        let cards = vec![card("alpha", [Some(Level::Lower), None, None, None, None], [false; 5])];
        let matrix = corpus_matrix(&cards, "autogen/1");
        let value = corpus_json(&matrix, None);
        assert_eq!(value["kind"], "corpus_matrix");
        assert_eq!(value["legend"]["1"], "alpha");
        assert_eq!(value["matrix"]["lower"]["actions"][0], "1");
        assert_eq!(value["matrix"]["unknown"]["environment"][0], "1");
        assert!(value.get("generated_at").is_none());
    }

    #[test]
    fn scorecard_json_is_deterministic_and_timestamp_optional() {
        let c = card("alpha", [Some(Level::Higher), None, None, None, None], [true, false, false, false, false]);
        let a = render_json(&scorecard_json(&c, None));
        let b = render_json(&scorecard_json(&c, None));
        assert_eq!(a, b);
        assert!(!a.contains("generated_at"));
        assert!(a.ends_with('\n'));

        let stamped = render_json(&scorecard_json(&c, Some("2024-01-01T00:00:00Z")));
        assert!(stamped.contains("\"generated_at\": \"2024-01-01T00:00:00Z\""));
        let parsed: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(parsed["scores"]["actions"]["level"], "higher");
        assert_eq!(parsed["scores"]["actions"]["mixed"], true);
        assert_eq!(parsed["scores"]["environment"]["level"], "unknown");
    }

    #[test]
    fn readable_scorecard_mentions_levels_and_identity() {
        let c = card("alpha", [Some(Level::Higher), Some(Level::Lower), None, None, None], [false; 5]);
        let text = render_scorecard_readable(&c);
        assert!(text.contains("repository : alpha"));
        assert!(text.contains("Actions            higher"));
        assert!(text.contains("Environment        lower"));
        assert!(text.contains("Orchestration      unknown"));
        assert!(text.contains("revision   : unpinned"));
    }

    #[test]
    fn kappa_formatting_uses_nine_decimals() {
        assert_eq!(format_kappa(0.25), "0.250000000");
        assert_eq!(format_kappa(1.0), "1.000000000");
        assert_eq!(format_kappa(-0.5), "-0.500000000");
    }

    #[test]
    fn output_format_parses() {
        assert_eq!("readable".parse::<OutputFormat>().unwrap(), OutputFormat::Readable);
        assert_eq!("JSON".parse::<OutputFormat>().unwrap(), OutputFormat::Structured);
        assert!("yaml".parse::<OutputFormat>().is_err());
    }
}
