//! The five-attribute autonomy taxonomy and the scoring engine that maps
//! scanned flag sites to per-attribute levels.

pub mod pack;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::ingest::ScanManifest;
use crate::scan::{FlagKind, FlagSite, Location, NormalizedValue, Provenance};
pub use pack::{autogen_pack, AttributeRules, LevelRule, NamePattern, Predicate, RulePack, RulePackError, UnknownWhen};

/// The scored attributes: two on the impact axis (what the agents can do),
/// three on the oversight axis (how much a human sees and steers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Attribute {
    Actions,
    Environment,
    Orchestration,
    HumanInTheLoop,
    Observability,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Actions,
        Attribute::Environment,
        Attribute::Orchestration,
        Attribute::HumanInTheLoop,
        Attribute::Observability,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Attribute::Actions => "actions",
            Attribute::Environment => "environment",
            Attribute::Orchestration => "orchestration",
            Attribute::HumanInTheLoop => "human_in_the_loop",
            Attribute::Observability => "observability",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Attribute::Actions => "Actions",
            Attribute::Environment => "Environment",
            Attribute::Orchestration => "Orchestration",
            Attribute::HumanInTheLoop => "Human-in-the-loop",
            Attribute::Observability => "Observability",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let canon: String = s.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).collect::<String>().to_lowercase();
        match canon.as_str() {
            "actions" | "action" => Ok(Attribute::Actions),
            "environment" => Ok(Attribute::Environment),
            "orchestration" => Ok(Attribute::Orchestration),
            "humanintheloop" | "hitl" => Ok(Attribute::HumanInTheLoop),
            "observability" => Ok(Attribute::Observability),
            _ => Err(format!("unknown attribute: {s:?}")),
        }
    }
}

impl Serialize for Attribute {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for Attribute {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Attribute::from_str(&s).map_err(D::Error::custom)
    }
}

/// Autonomy level. Ordered: `Lower < Middle < Higher`. An unassignable
/// attribute is represented as `Option<Level>::None` (printed "unknown"),
/// which sorts below every level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Lower,
    Middle,
    Higher,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Lower, Level::Middle, Level::Higher];

    pub fn key(self) -> &'static str {
        match self {
            Level::Lower => "lower",
            Level::Middle => "middle",
            Level::Higher => "higher",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Render an optional level the way reports spell it.
pub fn level_name(level: Option<Level>) -> &'static str {
    level.map(Level::key).unwrap_or("unknown")
}

/// The verdict for one attribute: a level (or unknown), the evidence sites it
/// rests on, whether the evidence points in conflicting directions, and
/// free-form notes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScore {
    pub attribute: Attribute,
    pub level: Option<Level>,
    pub mixed: bool,
    pub evidence: Vec<FlagSite>,
    pub notes: Vec<String>,
}

/// Scan statistics carried on a scorecard.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanStats {
    pub host_files: usize,
    pub gave_up_files: usize,
    pub site_count: usize,
    pub warnings: Vec<String>,
}

impl ScanStats {
    /// Fraction of host files the scanner had to partially abandon.
    pub fn parse_failure_fraction(&self) -> f64 {
        if self.host_files == 0 {
            0.0
        } else {
            self.gave_up_files as f64 / self.host_files as f64
        }
    }
}

/// The complete verdict for one repository snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoScorecard {
    pub repo: crate::ingest::RepoRef,
    pub manifest_sha256: String,
    pub rulepack_id: String,
    pub scores: BTreeMap<Attribute, AttributeScore>,
    pub stats: ScanStats,
}

/// Synthesize framework-default flag sites next to constructions that do not
/// set them explicitly: per-constructor defaults (e.g. a default human-input
/// mode) and the containerization default for configured code execution.
/// Explicit sites are never overridden, and re-running is a no-op.
pub fn inject_defaults(sites: &[FlagSite], pack: &RulePack) -> Vec<FlagSite> {
    let mut out = sites.to_vec();
    for c in sites.iter().filter(|s| s.kind.is_construction()) {
        let Some(name) = &c.constructor_name else { continue };
        let Some(defaults) = pack.constructor_defaults.get(name) else { continue };
        for (kind, value) in defaults {
            if covered(&out, kind, c) {
                continue;
            }
            out.push(synthesized(kind, value, c));
        }
    }
    let configured: Vec<FlagSite> = sites
        .iter()
        .filter(|s| s.kind == FlagKind::CodeExecutionConfig && s.value != NormalizedValue::Bool(false))
        .cloned()
        .collect();
    for c in &configured {
        for (kind, value) in &pack.code_execution_defaults {
            if covered(&out, kind, c) {
                continue;
            }
            out.push(synthesized(kind, value, c));
        }
    }
    out.sort_by(|a, b| a.location.cmp(&b.location));
    out
}

fn synthesized(kind: &FlagKind, value: &NormalizedValue, at: &FlagSite) -> FlagSite {
    FlagSite {
        kind: kind.clone(),
        value: value.clone(),
        location: at.location.clone(),
        enclosing_construct: at.enclosing_construct.clone(),
        constructor_name: at.constructor_name.clone(),
        provenance: Provenance::FrameworkDefault,
        call_site: at.call_site.clone(),
    }
}

/// True when a site of `kind` is already co-located with `at` (same call
/// anchor, or same location for anchorless sites).
fn covered(sites: &[FlagSite], kind: &FlagKind, at: &FlagSite) -> bool {
    match &at.call_site {
        Some(_) => sites.iter().any(|s| s.kind == *kind && s.call_site == at.call_site),
        None => sites
            .iter()
            .any(|s| s.kind == *kind && s.call_site.is_none() && s.location == at.location),
    }
}

/// Score one attribute from a repository's (default-injected) flag sites.
pub fn score_attribute(attribute: Attribute, sites: &[FlagSite], pack: &RulePack) -> AttributeScore {
    let Some(arules) = pack.attributes.get(&attribute) else {
        return AttributeScore {
            attribute,
            level: None,
            mixed: false,
            evidence: Vec::new(),
            notes: vec!["the rule pack does not define this attribute".to_string()],
        };
    };
    let mut evidence: Vec<FlagSite> = sites.iter().filter(|s| arules.relevant.contains(&s.kind)).cloned().collect();
    evidence.sort_by(|a, b| a.location.cmp(&b.location));
    let unknown = match arules.unknown_when {
        UnknownWhen::RelevantAbsent => evidence.is_empty(),
        UnknownWhen::RepoEmpty => sites.is_empty(),
    };
    if unknown {
        return AttributeScore { attribute, level: None, mixed: false, evidence, notes: Vec::new() };
    }
    let mut notes = Vec::new();
    let unresolved = evidence
        .iter()
        .filter(|s| matches!(s.value, NormalizedValue::Unresolved(_)))
        .count();
    if unresolved > 0 {
        notes.push(format!("{unresolved} flag value(s) could not be resolved statically"));
    }
    let mut level = None;
    for rule in &arules.rules {
        if rule.when.iter().all(|p| p.eval(sites, &pack.mode_vocabulary)) {
            level = Some(rule.level);
            if let Some(note) = &rule.note {
                notes.push(note.clone());
            }
            break;
        }
    }
    if level.is_none() {
        notes.push("flag evidence was found but matched no level rule".to_string());
    }
    let mixed = level.is_some()
        && arules
            .mixed_when
            .iter()
            .any(|clause| clause.iter().all(|p| p.eval(sites, &pack.mode_vocabulary)));
    AttributeScore { attribute, level, mixed, evidence, notes }
}

pub fn score_actions(sites: &[FlagSite], pack: &RulePack) -> AttributeScore {
    score_attribute(Attribute::Actions, sites, pack)
}

pub fn score_environment(sites: &[FlagSite], pack: &RulePack) -> AttributeScore {
    score_attribute(Attribute::Environment, sites, pack)
}

pub fn score_orchestration(sites: &[FlagSite], pack: &RulePack) -> AttributeScore {
    score_attribute(Attribute::Orchestration, sites, pack)
}

pub fn score_human_in_the_loop(sites: &[FlagSite], pack: &RulePack) -> AttributeScore {
    score_attribute(Attribute::HumanInTheLoop, sites, pack)
}

pub fn score_observability(sites: &[FlagSite], pack: &RulePack) -> AttributeScore {
    score_attribute(Attribute::Observability, sites, pack)
}

/// Combine sites scanned across a manifest into a repository scorecard.
/// `sites` must already be default-injected (see [`inject_defaults`]).
pub fn aggregate_scorecard(
    manifest: &ScanManifest,
    sites: &[FlagSite],
    pack: &RulePack,
    mut stats: ScanStats,
) -> RepoScorecard {
    stats.site_count = sites.len();
    if sites.is_empty() {
        stats.warnings.push(format!(
            "no behavior flags detected in {} host file(s); all attributes are unknown",
            stats.host_files
        ));
    }
    let scores: BTreeMap<Attribute, AttributeScore> = Attribute::ALL
        .into_iter()
        .map(|a| (a, score_attribute(a, sites, pack)))
        .collect();
    RepoScorecard {
        repo: manifest.repo.clone(),
        manifest_sha256: manifest.content_hash(),
        rulepack_id: pack.id(),
        scores,
        stats,
    }
}

/// Convenience for tests and synthetic scoring: build a site with an
/// explicit provenance and optional co-location anchor.
pub fn site(kind: FlagKind, value: NormalizedValue, location: Location) -> FlagSite {
    FlagSite {
        kind,
        value,
        location: location.clone(),
        enclosing_construct: None,
        constructor_name: None,
        provenance: Provenance::Explicit,
        call_site: Some(location),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc(line: u32) -> Location {
        Location { path: "app.py".to_string(), line, column: 1 }
    }

    fn anchored(kind: FlagKind, value: NormalizedValue, line: u32, anchor: u32) -> FlagSite {
        FlagSite {
            kind,
            value,
            location: loc(line),
            enclosing_construct: None,
            constructor_name: None,
            provenance: Provenance::Explicit,
            call_site: Some(loc(anchor)),
        }
    }

    fn construction(name: &str, line: u32) -> FlagSite {
        FlagSite {
            kind: FlagKind::AgentConstruction,
            value: NormalizedValue::Absent,
            location: loc(line),
            enclosing_construct: None,
            constructor_name: Some(name.to_string()),
            provenance: Provenance::Explicit,
            call_site: Some(loc(line)),
        }
    }

    #[test]
    fn actions_levels() {
        let pack = autogen_pack();
        let higher = [site(FlagKind::CodeExecutionConfig, NormalizedValue::Mapping(Default::default()), loc(1))];
        assert_eq!(score_actions(&higher, &pack).level, Some(Level::Higher));

        let middle = [
            site(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(false), loc(1)),
            site(
                FlagKind::SystemMessage,
                NormalizedValue::Str("when ready, EXECUTE the\n function".to_string()),
                loc(2),
            ),
        ];
        assert_eq!(score_actions(&middle, &pack).level, Some(Level::Middle));

        let lower = [site(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(false), loc(1))];
        assert_eq!(score_actions(&lower, &pack).level, Some(Level::Lower));

        assert_eq!(score_actions(&[], &pack).level, None);

        let unresolved_cec = [site(
            FlagKind::CodeExecutionConfig,
            NormalizedValue::Unresolved("settings.exec".to_string()),
            loc(1),
        )];
        let score = score_actions(&unresolved_cec, &pack);
        assert_eq!(score.level, Some(Level::Higher), "unprovably-disabled execution counts as enabled");
        assert!(score.notes.iter().any(|n| n.contains("could not be resolved")));
    }

    #[test]
    fn actions_mixed_when_enabled_and_disabled_coexist() {
        let pack = autogen_pack();
        let sites = [
            site(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(false), loc(1)),
            site(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(true), loc(2)),
        ];
        let score = score_actions(&sites, &pack);
        assert_eq!(score.level, Some(Level::Higher));
        assert!(score.mixed);
    }

    #[test]
    fn environment_levels() {
        let pack = autogen_pack();
        let higher = [site(FlagKind::UseDocker, NormalizedValue::Bool(false), loc(1))];
        assert_eq!(score_environment(&higher, &pack).level, Some(Level::Higher));

        let middle = [
            site(FlagKind::UseDocker, NormalizedValue::Bool(true), loc(1)),
            site(FlagKind::BrowserConfig, NormalizedValue::Unresolved("cfg".to_string()), loc(2)),
        ];
        assert_eq!(score_environment(&middle, &pack).level, Some(Level::Middle));

        let lower = [site(FlagKind::UseDocker, NormalizedValue::Bool(true), loc(1))];
        assert_eq!(score_environment(&lower, &pack).level, Some(Level::Lower));

        assert_eq!(score_environment(&[], &pack).level, None);

        // Docker disabled anywhere dominates browser presence.
        let both = [
            site(FlagKind::UseDocker, NormalizedValue::Bool(false), loc(1)),
            site(FlagKind::BrowserConfig, NormalizedValue::Absent, loc(2)),
        ];
        assert_eq!(score_environment(&both, &pack).level, Some(Level::Higher));
    }

    #[test]
    fn orchestration_is_per_construction() {
        let pack = autogen_pack();
        // A bounded group chat: max_round co-located with the construction.
        let bounded = [
            site(FlagKind::GroupChatConstruction, NormalizedValue::Absent, loc(1)),
            anchored(FlagKind::MaxRounds, NormalizedValue::Int(1), 1, 1),
        ];
        assert_eq!(score_orchestration(&bounded, &pack).level, Some(Level::Lower));

        let bounded_above_one = [
            site(FlagKind::GroupChatConstruction, NormalizedValue::Absent, loc(1)),
            anchored(FlagKind::MaxRounds, NormalizedValue::Int(12), 1, 1),
        ];
        assert_eq!(score_orchestration(&bounded_above_one, &pack).level, Some(Level::Middle));

        // The same bound elsewhere does not bind this construction.
        let unbounded_elsewhere = [
            site(FlagKind::GroupChatConstruction, NormalizedValue::Absent, loc(1)),
            anchored(FlagKind::MaxRounds, NormalizedValue::Int(12), 5, 5),
        ];
        let score = score_orchestration(&unbounded_elsewhere, &pack);
        assert_eq!(score.level, Some(Level::Higher));
        assert!(score.mixed, "bounded and unbounded machinery coexist");

        let unresolved_bound = [
            site(FlagKind::GroupChatConstruction, NormalizedValue::Absent, loc(1)),
            anchored(FlagKind::MaxRounds, NormalizedValue::Unresolved("CONFIG[\"r\"]".to_string()), 1, 1),
        ];
        let score = score_orchestration(&unresolved_bound, &pack);
        assert_eq!(score.level, Some(Level::Middle));
        assert!(score.mixed);
        assert!(score.notes.iter().any(|n| n.contains("could not resolve")));

        // A bare reply bound without any construction still scores.
        let bound_only = [site(FlagKind::MaxConsecutiveAutoReply, NormalizedValue::Int(1), loc(3))];
        assert_eq!(score_orchestration(&bound_only, &pack).level, Some(Level::Lower));

        assert_eq!(score_orchestration(&[], &pack).level, None);
    }

    #[test]
    fn human_in_the_loop_levels() {
        let pack = autogen_pack();
        let always = [site(FlagKind::HumanInputMode, NormalizedValue::Str("ALWAYS".to_string()), loc(1))];
        assert_eq!(score_human_in_the_loop(&always, &pack).level, Some(Level::Lower));

        let terminate = [
            site(FlagKind::HumanInputMode, NormalizedValue::Str("TERMINATE".to_string()), loc(1)),
            site(FlagKind::HumanInputMode, NormalizedValue::Str("NEVER".to_string()), loc(2)),
        ];
        let score = score_human_in_the_loop(&terminate, &pack);
        assert_eq!(score.level, Some(Level::Middle));
        assert!(score.mixed);

        let never = [site(FlagKind::HumanInputMode, NormalizedValue::Str("never".to_string()), loc(1))];
        assert_eq!(score_human_in_the_loop(&never, &pack).level, Some(Level::Higher), "mode match is case-insensitive");

        let disagreeing = [
            site(FlagKind::HumanInputMode, NormalizedValue::Str("ALWAYS".to_string()), loc(1)),
            site(FlagKind::HumanInputMode, NormalizedValue::Str("NEVER".to_string()), loc(2)),
        ];
        let score = score_human_in_the_loop(&disagreeing, &pack);
        assert_eq!(score.level, Some(Level::Middle), "mixed modes imply some human touch points");
        assert!(score.mixed);

        let unresolved = [site(
            FlagKind::HumanInputMode,
            NormalizedValue::Unresolved("mode_var".to_string()),
            loc(1),
        )];
        let score = score_human_in_the_loop(&unresolved, &pack);
        assert_eq!(score.level, None, "unresolvable modes stay unknown");
        assert!(!score.evidence.is_empty());
        assert!(!score.notes.is_empty());
    }

    #[test]
    fn observability_levels() {
        let pack = autogen_pack();
        let display = [
            site(FlagKind::DisplayConfig, NormalizedValue::Absent, loc(1)),
            site(FlagKind::LoggingInvocation, NormalizedValue::Absent, loc(2)),
        ];
        assert_eq!(score_observability(&display, &pack).level, Some(Level::Lower), "display beats logging");

        let logging = [site(FlagKind::LoggingInvocation, NormalizedValue::Absent, loc(1))];
        assert_eq!(score_observability(&logging, &pack).level, Some(Level::Middle));

        // Flags exist, but none of them are observability surfaces.
        let opaque = [site(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(true), loc(1))];
        let score = score_observability(&opaque, &pack);
        assert_eq!(score.level, Some(Level::Higher));
        assert!(score.evidence.is_empty());
        assert!(!score.notes.is_empty(), "an evidence-free level carries an explanatory note");

        // No flags at all anywhere: unknown, not higher.
        assert_eq!(score_observability(&[], &pack).level, None);
    }

    #[test]
    fn aggregate_example_single_proxy() {
        let pack = autogen_pack();
        let raw = vec![
            construction("UserProxyAgent", 1),
            anchored(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(false), 1, 1),
        ];
        let sites = inject_defaults(&raw, &pack);
        assert_eq!(score_actions(&sites, &pack).level, Some(Level::Lower));
        assert_eq!(score_environment(&sites, &pack).level, None, "disabled execution injects no docker default");
        assert_eq!(score_orchestration(&sites, &pack).level, Some(Level::Higher), "no bound on the agent");
        let hitl = score_human_in_the_loop(&sites, &pack);
        assert_eq!(hitl.level, Some(Level::Lower), "the proxy's default mode is ALWAYS");
        assert!(hitl.evidence.iter().any(|s| s.provenance == Provenance::FrameworkDefault));
        assert_eq!(score_observability(&sites, &pack).level, Some(Level::Higher));
    }

    #[test]
    fn inject_defaults_constructor_behavior() {
        let pack = autogen_pack();

        let bare = [construction("AssistantAgent", 1)];
        let injected = inject_defaults(&bare, &pack);
        let him: Vec<&FlagSite> = injected.iter().filter(|s| s.kind == FlagKind::HumanInputMode).collect();
        assert_eq!(him.len(), 1);
        assert_eq!(him[0].value, NormalizedValue::Str("NEVER".to_string()));
        assert_eq!(him[0].provenance, Provenance::FrameworkDefault);
        assert_eq!(him[0].location, bare[0].location);

        let explicit = [
            construction("UserProxyAgent", 1),
            anchored(FlagKind::HumanInputMode, NormalizedValue::Str("NEVER".to_string()), 1, 1),
        ];
        let injected = inject_defaults(&explicit, &pack);
        let him: Vec<&FlagSite> = injected.iter().filter(|s| s.kind == FlagKind::HumanInputMode).collect();
        assert_eq!(him.len(), 1, "explicit modes are never overridden");
        assert_eq!(him[0].provenance, Provenance::Explicit);

        assert!(inject_defaults(&[], &pack).is_empty());
    }

    #[test]
    fn inject_defaults_docker() {
        let pack = autogen_pack();
        let configured = [site(
            FlagKind::CodeExecutionConfig,
            NormalizedValue::Mapping(Default::default()),
            loc(1),
        )];
        let injected = inject_defaults(&configured, &pack);
        let docker: Vec<&FlagSite> = injected.iter().filter(|s| s.kind == FlagKind::UseDocker).collect();
        assert_eq!(docker.len(), 1);
        assert_eq!(docker[0].value, NormalizedValue::Bool(true));
        assert_eq!(docker[0].provenance, Provenance::FrameworkDefault);

        // Explicit use_docker in the same call wins.
        let mut m = std::collections::BTreeMap::new();
        m.insert("use_docker".to_string(), NormalizedValue::Bool(false));
        let explicit = [
            site(FlagKind::CodeExecutionConfig, NormalizedValue::Mapping(m), loc(1)),
            anchored(FlagKind::UseDocker, NormalizedValue::Bool(false), 1, 1),
        ];
        let injected = inject_defaults(&explicit, &pack);
        let docker: Vec<&FlagSite> = injected.iter().filter(|s| s.kind == FlagKind::UseDocker).collect();
        assert_eq!(docker.len(), 1);
        assert_eq!(docker[0].value, NormalizedValue::Bool(false));

        // Disabled execution injects nothing.
        let disabled = [site(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(false), loc(1))];
        assert!(inject_defaults(&disabled, &pack).iter().all(|s| s.kind != FlagKind::UseDocker));
    }

    #[test]
    fn inject_defaults_is_idempotent() {
        let pack = autogen_pack();
        let raw = vec![
            construction("UserProxyAgent", 1),
            construction("AssistantAgent", 2),
            site(FlagKind::CodeExecutionConfig, NormalizedValue::Bool(true), loc(3)),
        ];
        let once = inject_defaults(&raw, &pack);
        let twice = inject_defaults(&once, &pack);
        assert_eq!(once, twice);
    }

    #[test]
    fn attribute_parsing_accepts_variants() {
        assert_eq!("Human-in-the-loop".parse::<Attribute>().unwrap(), Attribute::HumanInTheLoop);
        assert_eq!("human_in_the_loop".parse::<Attribute>().unwrap(), Attribute::HumanInTheLoop);
        assert_eq!("Action".parse::<Attribute>().unwrap(), Attribute::Actions);
        assert!("impact".parse::<Attribute>().is_err());
    }
}
