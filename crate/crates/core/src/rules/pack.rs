//! Rule packs: the declarative, framework-specific configuration that drives
//! scanning and scoring. A pack names the flag patterns to look for, the
//! framework's implicit defaults, and the ordered level rules per attribute.
//! Packs serialize to TOML so they can be audited and swapped without
//! recompiling.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{Attribute, Level};
use crate::scan::{FlagKind, FlagSite, NormalizedValue};

/// How a flag pattern matches a dotted name. `Exact`, `Suffix` and `Prefix`
/// compare against the final segment case-sensitively; `Word` and
/// `WordPrefix` compare case-insensitively against the underscore-separated
/// words of every segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NamePattern {
    Exact(String),
    Suffix(String),
    Prefix(String),
    Word(String),
    WordPrefix(String),
}

impl NamePattern {
    pub fn matches(&self, segments: &[String]) -> bool {
        let Some(last) = segments.last() else { return false };
        match self {
            NamePattern::Exact(s) => last == s,
            NamePattern::Suffix(s) => last.ends_with(s.as_str()),
            NamePattern::Prefix(s) => last.starts_with(s.as_str()),
            NamePattern::Word(w) => {
                let w = w.to_lowercase();
                words(segments).any(|x| x == w)
            }
            NamePattern::WordPrefix(stem) => {
                let stem = stem.to_lowercase();
                words(segments).any(|x| x.starts_with(&stem))
            }
        }
    }

    fn payload(&self) -> &str {
        match self {
            NamePattern::Exact(s)
            | NamePattern::Suffix(s)
            | NamePattern::Prefix(s)
            | NamePattern::Word(s)
            | NamePattern::WordPrefix(s) => s,
        }
    }
}

fn words(segments: &[String]) -> impl Iterator<Item = String> + '_ {
    segments
        .iter()
        .flat_map(|s| s.split('_'))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

impl fmt::Display for NamePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamePattern::Exact(s) => f.write_str(s),
            NamePattern::Suffix(s) => write!(f, "suffix:{s}"),
            NamePattern::Prefix(s) => write!(f, "prefix:{s}"),
            NamePattern::Word(s) => write!(f, "word:{s}"),
            NamePattern::WordPrefix(s) => write!(f, "word:{s}*"),
        }
    }
}

impl FromStr for NamePattern {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("suffix:") {
            Ok(NamePattern::Suffix(rest.to_string()))
        } else if let Some(rest) = s.strip_prefix("prefix:") {
            Ok(NamePattern::Prefix(rest.to_string()))
        } else if let Some(rest) = s.strip_prefix("word:") {
            match rest.strip_suffix('*') {
                Some(stem) => Ok(NamePattern::WordPrefix(stem.to_string())),
                None => Ok(NamePattern::Word(rest.to_string())),
            }
        } else {
            Ok(NamePattern::Exact(s.to_string()))
        }
    }
}

impl Serialize for NamePattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NamePattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(NamePattern::from_str(&s).expect("infallible"))
    }
}

/// A condition over a repository's flag sites. Rules combine predicates with
/// AND; the rule list per level is tried in order (first match wins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Every site of `kind` has value `false` (vacuously true when none exist).
    AllFalse { kind: FlagKind },
    /// Some site of `kind` has a value other than `false`.
    AnyNotFalse { kind: FlagKind },
    /// At least one site of `kind` exists.
    AnyPresent { kind: FlagKind },
    /// No site of `kind` exists.
    NonePresent { kind: FlagKind },
    /// Some site of `kind` has exactly this boolean value.
    AnyBoolIs { kind: FlagKind, value: bool },
    /// Some string-valued site of `kind` contains the phrase
    /// (case-insensitive, whitespace-collapsed).
    AnyPhrase { kind: FlagKind, phrase: String },
    /// No string-valued site of `kind` contains the phrase.
    NoPhrase { kind: FlagKind, phrase: String },
    /// Some integer-valued site of `kinds` exceeds `min`.
    AnyIntAbove { kinds: Vec<FlagKind>, min: i64 },
    /// Some integer-valued site of `kinds` is at most `max`.
    AnyIntAtMost { kinds: Vec<FlagKind>, max: i64 },
    /// Every site of `kinds` is an integer at most `max` (vacuously true).
    AllIntAtMost { kinds: Vec<FlagKind>, max: i64 },
    /// Some site of `kinds` has a statically unresolved value.
    AnyUnresolved { kinds: Vec<FlagKind> },
    /// All recognized modes of `kind` equal `value`, and at least one exists.
    ModesAll { kind: FlagKind, value: String },
    /// The recognized modes of `kind` include `value`.
    ModesContain { kind: FlagKind, value: String },
    /// At least two distinct recognized modes of `kind` exist.
    ModesMixed { kind: FlagKind },
    /// Some construction site of `constructions` has no co-located site of
    /// any bound kind in `bounds` (sharing its call anchor).
    AnyUnboundedConstruction { constructions: Vec<FlagKind>, bounds: Vec<FlagKind> },
    /// Unconditionally true; used for fallback rules.
    Always,
}

impl Predicate {
    pub fn eval(&self, sites: &[FlagSite], vocabulary: &[String]) -> bool {
        fn of<'a>(sites: &'a [FlagSite], kind: &'a FlagKind) -> impl Iterator<Item = &'a FlagSite> + 'a {
            sites.iter().filter(move |s| s.kind == *kind)
        }
        fn of_any<'a>(sites: &'a [FlagSite], kinds: &'a [FlagKind]) -> impl Iterator<Item = &'a FlagSite> + 'a {
            sites.iter().filter(move |s| kinds.contains(&s.kind))
        }
        match self {
            Predicate::AllFalse { kind } => of(sites, kind).all(|s| s.value == NormalizedValue::Bool(false)),
            Predicate::AnyNotFalse { kind } => of(sites, kind).any(|s| s.value != NormalizedValue::Bool(false)),
            Predicate::AnyPresent { kind } => of(sites, kind).next().is_some(),
            Predicate::NonePresent { kind } => of(sites, kind).next().is_none(),
            Predicate::AnyBoolIs { kind, value } => of(sites, kind).any(|s| s.value == NormalizedValue::Bool(*value)),
            Predicate::AnyPhrase { kind, phrase } => of(sites, kind).any(|s| match &s.value {
                NormalizedValue::Str(text) => contains_phrase(text, phrase),
                _ => false,
            }),
            Predicate::NoPhrase { kind, phrase } => !of(sites, kind).any(|s| match &s.value {
                NormalizedValue::Str(text) => contains_phrase(text, phrase),
                _ => false,
            }),
            Predicate::AnyIntAbove { kinds, min } => {
                of_any(sites, kinds).any(|s| matches!(s.value, NormalizedValue::Int(v) if v > *min))
            }
            Predicate::AnyIntAtMost { kinds, max } => {
                of_any(sites, kinds).any(|s| matches!(s.value, NormalizedValue::Int(v) if v <= *max))
            }
            Predicate::AllIntAtMost { kinds, max } => {
                of_any(sites, kinds).all(|s| matches!(s.value, NormalizedValue::Int(v) if v <= *max))
            }
            Predicate::AnyUnresolved { kinds } => {
                of_any(sites, kinds).any(|s| matches!(s.value, NormalizedValue::Unresolved(_)))
            }
            Predicate::ModesAll { kind, value } => {
                let modes = recognized_modes(sites, kind, vocabulary);
                !modes.is_empty() && modes.iter().all(|m| m == value)
            }
            Predicate::ModesContain { kind, value } => {
                recognized_modes(sites, kind, vocabulary).contains(value)
            }
            Predicate::ModesMixed { kind } => {
                let mut modes = recognized_modes(sites, kind, vocabulary);
                modes.sort();
                modes.dedup();
                modes.len() >= 2
            }
            Predicate::AnyUnboundedConstruction { constructions, bounds } => {
                sites.iter().filter(|s| constructions.contains(&s.kind)).any(|c| match &c.call_site {
                    Some(anchor) => !sites
                        .iter()
                        .any(|b| bounds.contains(&b.kind) && b.call_site.as_ref() == Some(anchor)),
                    None => true,
                })
            }
            Predicate::Always => true,
        }
    }
}

/// Case-insensitive substring match with all whitespace runs collapsed, so a
/// phrase matches across line breaks inside multi-line string literals.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    collapse(text).contains(&collapse(phrase))
}

fn collapse(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Extract the recognized interaction modes among `kind` sites: string values
/// that, trimmed and uppercased, appear in the pack's mode vocabulary.
fn recognized_modes(sites: &[FlagSite], kind: &FlagKind, vocabulary: &[String]) -> Vec<String> {
    sites
        .iter()
        .filter(|s| s.kind == *kind)
        .filter_map(|s| match &s.value {
            NormalizedValue::Str(text) => {
                let canon = text.trim().to_uppercase();
                vocabulary.contains(&canon).then_some(canon)
            }
            _ => None,
        })
        .collect()
}

/// One scoring rule: if every predicate in `when` holds, the attribute gets
/// `level`, optionally annotated with `note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRule {
    pub level: Level,
    pub when: Vec<Predicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// When an attribute reports `unknown` instead of consulting its rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownWhen {
    /// No site of any relevant kind exists.
    RelevantAbsent,
    /// The repository produced no flag sites at all.
    RepoEmpty,
}

/// Per-attribute scoring configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRules {
    /// Flag kinds whose sites count as evidence for this attribute.
    pub relevant: Vec<FlagKind>,
    pub unknown_when: UnknownWhen,
    /// Tried in order; the first rule whose predicates all hold wins.
    pub rules: Vec<LevelRule>,
    /// DNF over predicates; any satisfied clause marks the score as mixed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mixed_when: Vec<Vec<Predicate>>,
}

/// A complete framework rule pack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RulePack {
    pub framework: String,
    pub version: String,
    pub host_language: String,
    /// File extensions (no dot) treated as host-language sources.
    pub host_extensions: Vec<String>,
    /// Recognized human-input modes, canonical uppercase.
    #[serde(default)]
    pub mode_vocabulary: Vec<String>,
    pub flag_patterns: BTreeMap<FlagKind, Vec<NamePattern>>,
    /// Flag values a constructor implies when not set explicitly.
    #[serde(default)]
    pub constructor_defaults: BTreeMap<String, BTreeMap<FlagKind, NormalizedValue>>,
    /// Flag values implied by any enabled code-execution configuration.
    #[serde(default)]
    pub code_execution_defaults: BTreeMap<FlagKind, NormalizedValue>,
    pub attributes: BTreeMap<Attribute, AttributeRules>,
}

#[derive(Debug, Error)]
pub enum RulePackError {
    #[error("failed to read rule pack: {0}")]
    Io(#[from] std::io::Error),
    #[error("rule pack is not valid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("rule pack serialization failed: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("rule pack declares no host file extensions")]
    NoHostExtensions,
    #[error("attribute {0} is missing from the rule pack")]
    MissingAttribute(Attribute),
    #[error("attribute {attribute} has no rule that can assign level {level}")]
    LevelGap { attribute: Attribute, level: Level },
    #[error("attribute {0} lists no relevant flag kinds")]
    NoRelevantKinds(Attribute),
    #[error("flag kind {0} has an empty pattern list")]
    EmptyPatterns(FlagKind),
    #[error("pattern {0:?} has an empty payload")]
    EmptyPattern(String),
    #[error("a mode predicate is used but the mode vocabulary is empty")]
    EmptyModeVocabulary,
}

impl RulePack {
    /// Stable identifier recorded on scorecards, `framework/version`.
    pub fn id(&self) -> String {
        format!("{}/{}", self.framework, self.version)
    }

    pub fn to_toml(&self) -> Result<String, RulePackError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml_str(s: &str) -> Result<RulePack, RulePackError> {
        let pack: RulePack = toml::from_str(s)?;
        pack.validate()?;
        Ok(pack)
    }

    pub fn load(path: &Path) -> Result<RulePack, RulePackError> {
        let text = std::fs::read_to_string(path)?;
        RulePack::from_toml_str(&text)
    }

    /// Structural checks: every attribute present with a non-empty relevant
    /// set, every level reachable, no empty patterns, and a mode vocabulary
    /// whenever mode predicates are used.
    pub fn validate(&self) -> Result<(), RulePackError> {
        if self.host_extensions.is_empty() {
            return Err(RulePackError::NoHostExtensions);
        }
        for (kind, patterns) in &self.flag_patterns {
            if patterns.is_empty() {
                return Err(RulePackError::EmptyPatterns(kind.clone()));
            }
            for pattern in patterns {
                if pattern.payload().is_empty() {
                    return Err(RulePackError::EmptyPattern(pattern.to_string()));
                }
            }
        }
        let mut uses_modes = false;
        for attribute in Attribute::ALL {
            let Some(arules) = self.attributes.get(&attribute) else {
                return Err(RulePackError::MissingAttribute(attribute));
            };
            if arules.relevant.is_empty() {
                return Err(RulePackError::NoRelevantKinds(attribute));
            }
            for level in Level::ALL {
                if !arules.rules.iter().any(|r| r.level == level) {
                    return Err(RulePackError::LevelGap { attribute, level });
                }
            }
            let predicates = arules
                .rules
                .iter()
                .flat_map(|r| r.when.iter())
                .chain(arules.mixed_when.iter().flatten());
            for p in predicates {
                if matches!(
                    p,
                    Predicate::ModesAll { .. } | Predicate::ModesContain { .. } | Predicate::ModesMixed { .. }
                ) {
                    uses_modes = true;
                }
            }
        }
        if uses_modes && self.mode_vocabulary.is_empty() {
            return Err(RulePackError::EmptyModeVocabulary);
        }
        Ok(())
    }
}

/// The built-in rule pack for AutoGen applications.
pub fn autogen_pack() -> RulePack {
    use FlagKind::*;

    fn pat(s: &str) -> NamePattern {
        NamePattern::from_str(s).expect("infallible")
    }

    let mut flag_patterns = BTreeMap::new();
    flag_patterns.insert(CodeExecutionConfig, vec![pat("code_execution_config")]);
    flag_patterns.insert(UseDocker, vec![pat("use_docker")]);
    flag_patterns.insert(BrowserConfig, vec![pat("browser_config")]);
    flag_patterns.insert(MaxRounds, vec![pat("max_round"), pat("max_rounds")]);
    flag_patterns.insert(MaxConsecutiveAutoReply, vec![pat("max_consecutive_auto_reply")]);
    flag_patterns.insert(HumanInputMode, vec![pat("human_input_mode")]);
    flag_patterns.insert(SystemMessage, vec![pat("system_message")]);
    flag_patterns.insert(
        LoggingInvocation,
        vec![pat("word:log*"), pat("word:trace"), pat("word:tracing"), pat("word:cache"), pat("word:caching"), pat("reply_func")],
    );
    flag_patterns.insert(DisplayConfig, vec![pat("word:display*")]);
    flag_patterns.insert(
        AgentConstruction,
        vec![pat("UserProxyAgent"), pat("AssistantAgent"), pat("ConversableAgent"), pat("suffix:Agent")],
    );
    flag_patterns.insert(GroupChatConstruction, vec![pat("GroupChat")]);

    let mode = |m: &str| NormalizedValue::Str(m.to_string());
    let mut constructor_defaults = BTreeMap::new();
    constructor_defaults.insert(
        "UserProxyAgent".to_string(),
        BTreeMap::from([(HumanInputMode, mode("ALWAYS"))]),
    );
    constructor_defaults.insert(
        "AssistantAgent".to_string(),
        BTreeMap::from([(HumanInputMode, mode("NEVER"))]),
    );
    constructor_defaults.insert(
        "ConversableAgent".to_string(),
        BTreeMap::from([(HumanInputMode, mode("TERMINATE"))]),
    );
    let code_execution_defaults = BTreeMap::from([(UseDocker, NormalizedValue::Bool(true))]);

    let mut attributes = BTreeMap::new();

    attributes.insert(
        Attribute::Actions,
        AttributeRules {
            relevant: vec![CodeExecutionConfig, SystemMessage],
            unknown_when: UnknownWhen::RelevantAbsent,
            rules: vec![
                LevelRule {
                    level: Level::Higher,
                    when: vec![Predicate::AnyNotFalse { kind: CodeExecutionConfig }],
                    note: None,
                },
                LevelRule {
                    level: Level::Middle,
                    when: vec![Predicate::AnyPhrase { kind: SystemMessage, phrase: "execute the function".to_string() }],
                    note: Some("code execution is off, but a system message instructs executing functions".to_string()),
                },
                LevelRule {
                    level: Level::Lower,
                    when: vec![Predicate::NoPhrase { kind: SystemMessage, phrase: "execute the function".to_string() }],
                    note: None,
                },
            ],
            mixed_when: vec![vec![
                Predicate::AnyBoolIs { kind: CodeExecutionConfig, value: false },
                Predicate::AnyNotFalse { kind: CodeExecutionConfig },
            ]],
        },
    );

    attributes.insert(
        Attribute::Environment,
        AttributeRules {
            relevant: vec![UseDocker, BrowserConfig],
            unknown_when: UnknownWhen::RelevantAbsent,
            rules: vec![
                LevelRule {
                    level: Level::Higher,
                    when: vec![Predicate::AnyBoolIs { kind: UseDocker, value: false }],
                    note: None,
                },
                LevelRule {
                    level: Level::Middle,
                    when: vec![Predicate::AnyPresent { kind: BrowserConfig }],
                    note: Some("a browsing surface reaches outside the sandbox".to_string()),
                },
                LevelRule {
                    level: Level::Lower,
                    when: vec![Predicate::AnyBoolIs { kind: UseDocker, value: true }],
                    note: None,
                },
            ],
            mixed_when: vec![vec![
                Predicate::AnyBoolIs { kind: UseDocker, value: true },
                Predicate::AnyBoolIs { kind: UseDocker, value: false },
            ]],
        },
    );

    attributes.insert(
        Attribute::Orchestration,
        AttributeRules {
            relevant: vec![GroupChatConstruction, AgentConstruction, MaxRounds, MaxConsecutiveAutoReply],
            unknown_when: UnknownWhen::RelevantAbsent,
            rules: vec![
                LevelRule {
                    level: Level::Higher,
                    when: vec![Predicate::AnyUnboundedConstruction {
                        constructions: vec![GroupChatConstruction, AgentConstruction],
                        bounds: vec![MaxRounds, MaxConsecutiveAutoReply],
                    }],
                    note: None,
                },
                LevelRule {
                    level: Level::Middle,
                    when: vec![Predicate::AnyIntAbove { kinds: vec![MaxRounds, MaxConsecutiveAutoReply], min: 1 }],
                    note: None,
                },
                LevelRule {
                    level: Level::Middle,
                    when: vec![Predicate::AnyUnresolved { kinds: vec![MaxRounds, MaxConsecutiveAutoReply] }],
                    note: Some("a turn bound is set by an expression the static scan could not resolve".to_string()),
                },
                LevelRule {
                    level: Level::Lower,
                    when: vec![Predicate::AllIntAtMost { kinds: vec![MaxRounds, MaxConsecutiveAutoReply], max: 1 }],
                    note: None,
                },
            ],
            mixed_when: vec![
                vec![
                    Predicate::AnyUnboundedConstruction {
                        constructions: vec![GroupChatConstruction, AgentConstruction],
                        bounds: vec![MaxRounds, MaxConsecutiveAutoReply],
                    },
                    Predicate::AnyPresent { kind: MaxRounds },
                ],
                vec![
                    Predicate::AnyUnboundedConstruction {
                        constructions: vec![GroupChatConstruction, AgentConstruction],
                        bounds: vec![MaxRounds, MaxConsecutiveAutoReply],
                    },
                    Predicate::AnyPresent { kind: MaxConsecutiveAutoReply },
                ],
                vec![
                    Predicate::AnyIntAtMost { kinds: vec![MaxRounds, MaxConsecutiveAutoReply], max: 1 },
                    Predicate::AnyIntAbove { kinds: vec![MaxRounds, MaxConsecutiveAutoReply], min: 1 },
                ],
                vec![Predicate::AnyUnresolved { kinds: vec![MaxRounds, MaxConsecutiveAutoReply] }],
            ],
        },
    );

    attributes.insert(
        Attribute::HumanInTheLoop,
        AttributeRules {
            relevant: vec![HumanInputMode],
            unknown_when: UnknownWhen::RelevantAbsent,
            rules: vec![
                LevelRule {
                    level: Level::Lower,
                    when: vec![Predicate::ModesAll { kind: HumanInputMode, value: "ALWAYS".to_string() }],
                    note: None,
                },
                LevelRule {
                    level: Level::Middle,
                    when: vec![Predicate::ModesContain { kind: HumanInputMode, value: "TERMINATE".to_string() }],
                    note: None,
                },
                LevelRule {
                    level: Level::Middle,
                    when: vec![Predicate::ModesMixed { kind: HumanInputMode }],
                    note: Some("agents declare different human-input modes".to_string()),
                },
                LevelRule {
                    level: Level::Higher,
                    when: vec![Predicate::ModesAll { kind: HumanInputMode, value: "NEVER".to_string() }],
                    note: None,
                },
            ],
            mixed_when: vec![vec![Predicate::ModesMixed { kind: HumanInputMode }]],
        },
    );

    attributes.insert(
        Attribute::Observability,
        AttributeRules {
            relevant: vec![DisplayConfig, LoggingInvocation],
            unknown_when: UnknownWhen::RepoEmpty,
            rules: vec![
                LevelRule {
                    level: Level::Lower,
                    when: vec![Predicate::AnyPresent { kind: DisplayConfig }],
                    note: None,
                },
                LevelRule {
                    level: Level::Middle,
                    when: vec![Predicate::AnyPresent { kind: LoggingInvocation }],
                    note: None,
                },
                LevelRule {
                    level: Level::Higher,
                    when: vec![Predicate::Always],
                    note: Some("no display surfaces or logging/tracing invocations were found".to_string()),
                },
            ],
            mixed_when: Vec::new(),
        },
    );

    let pack = RulePack {
        framework: "autogen".to_string(),
        version: "1".to_string(),
        host_language: "python".to_string(),
        host_extensions: vec!["py".to_string()],
        mode_vocabulary: vec!["ALWAYS".to_string(), "TERMINATE".to_string(), "NEVER".to_string()],
        flag_patterns,
        constructor_defaults,
        code_execution_defaults,
        attributes,
    };
    debug_assert!(pack.validate().is_ok());
    pack
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segs(s: &str) -> Vec<String> {
        s.split('.').map(str::to_string).collect()
    }

    #[test]
    fn pattern_matching() {
        assert!(pat("use_docker").matches(&segs("use_docker")));
        assert!(!pat("use_docker").matches(&segs("use_dockerfile")));
        assert!(pat("suffix:Agent").matches(&segs("WebSurferAgent")));
        assert!(pat("suffix:Agent").matches(&segs("autogen.AssistantAgent")));
        assert!(!pat("suffix:Agent").matches(&segs("agent")), "suffix match is case-sensitive");
        assert!(pat("word:log*").matches(&segs("runtime_logging.start")));
        assert!(pat("word:log*").matches(&segs("LOGGER_setup")));
        assert!(!pat("word:log*").matches(&segs("dialog_box")), "word prefixes anchor at word starts");
        assert!(pat("word:display*").matches(&segs("display_summary")));
        assert!(pat("word:trace").matches(&segs("start_trace")));
        assert!(!pat("word:trace").matches(&segs("traceback")), "plain words match whole words only");
        assert!(!pat("prefix:max_").matches(&segs("chat.total_max_turns")));
        assert!(pat("prefix:max_").matches(&segs("chat.max_turns")));
    }

    fn pat(s: &str) -> NamePattern {
        NamePattern::from_str(s).unwrap()
    }

    #[test]
    fn pattern_round_trip() {
        for text in ["use_docker", "suffix:Agent", "prefix:max_", "word:trace", "word:log*"] {
            let parsed = pat(text);
            assert_eq!(parsed.to_string(), text);
            assert_eq!(pat(&parsed.to_string()), parsed);
        }
        assert_eq!(pat("word:log*"), NamePattern::WordPrefix("log".to_string()));
        assert_eq!(pat("word:log"), NamePattern::Word("log".to_string()));
    }

    #[test]
    fn builtin_pack_is_valid() {
        let pack = autogen_pack();
        assert!(pack.validate().is_ok());
        assert_eq!(pack.id(), "autogen/1");
        assert_eq!(pack.host_extensions, vec!["py".to_string()]);
    }

    #[test]
    fn toml_round_trip_preserves_pack() {
        let pack = autogen_pack();
        let text = pack.to_toml().unwrap();
        let reloaded = RulePack::from_toml_str(&text).unwrap();
        assert_eq!(reloaded, pack);
    }

    #[test]
    fn validation_rejects_broken_packs() {
        let mut pack = autogen_pack();
        pack.host_extensions.clear();
        assert!(matches!(pack.validate(), Err(RulePackError::NoHostExtensions)));

        let mut pack = autogen_pack();
        pack.attributes.remove(&Attribute::Observability);
        assert!(matches!(pack.validate(), Err(RulePackError::MissingAttribute(Attribute::Observability))));

        let mut pack = autogen_pack();
        pack.attributes.get_mut(&Attribute::Actions).unwrap().rules.retain(|r| r.level != Level::Middle);
        assert!(matches!(
            pack.validate(),
            Err(RulePackError::LevelGap { attribute: Attribute::Actions, level: Level::Middle })
        ));

        let mut pack = autogen_pack();
        pack.mode_vocabulary.clear();
        assert!(matches!(pack.validate(), Err(RulePackError::EmptyModeVocabulary)));

        let mut pack = autogen_pack();
        pack.flag_patterns.insert(FlagKind::UseDocker, Vec::new());
        assert!(matches!(pack.validate(), Err(RulePackError::EmptyPatterns(FlagKind::UseDocker))));
    }

    #[test]
    fn phrase_matching_collapses_whitespace() {
        assert!(contains_phrase("Please  EXECUTE\n   the function now", "execute the function"));
        assert!(!contains_phrase("executed the function", "execute the function"));
        assert!(contains_phrase("execute the functions", "execute the function"));
    }
}
