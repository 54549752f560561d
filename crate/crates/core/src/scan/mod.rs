//! Flag-site extraction from Python-syntax source.
//!
//! The scanner is a bracket-aware lexical matcher, not a parser. It finds
//! keyword arguments, module/class-level assignments, matching call names and
//! agent/group-chat constructions, normalizes the literal values it can
//! resolve without executing anything, and records everything else verbatim.
//! Files that would not parse degrade to warnings, never errors.

pub mod tokenizer;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rules::pack::{NamePattern, RulePack};
use tokenizer::{decode_string, tokenize, Token, TokenKind};

/// The behavior-relevant flag vocabulary. `Other` carries kinds declared by
/// custom rule packs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum FlagKind {
    CodeExecutionConfig,
    UseDocker,
    BrowserConfig,
    MaxRounds,
    MaxConsecutiveAutoReply,
    HumanInputMode,
    SystemMessage,
    LoggingInvocation,
    DisplayConfig,
    AgentConstruction,
    GroupChatConstruction,
    Other(String),
}

impl FlagKind {
    pub const KNOWN: [FlagKind; 11] = [
        FlagKind::CodeExecutionConfig,
        FlagKind::UseDocker,
        FlagKind::BrowserConfig,
        FlagKind::MaxRounds,
        FlagKind::MaxConsecutiveAutoReply,
        FlagKind::HumanInputMode,
        FlagKind::SystemMessage,
        FlagKind::LoggingInvocation,
        FlagKind::DisplayConfig,
        FlagKind::AgentConstruction,
        FlagKind::GroupChatConstruction,
    ];

    pub fn is_construction(&self) -> bool {
        matches!(self, FlagKind::AgentConstruction | FlagKind::GroupChatConstruction)
    }

    /// Priority used when one name matches several kinds: specific flags
    /// first, display before logging, constructions last.
    fn rank(&self) -> u8 {
        match self {
            FlagKind::CodeExecutionConfig => 0,
            FlagKind::UseDocker => 1,
            FlagKind::BrowserConfig => 2,
            FlagKind::MaxRounds => 3,
            FlagKind::MaxConsecutiveAutoReply => 4,
            FlagKind::HumanInputMode => 5,
            FlagKind::SystemMessage => 6,
            FlagKind::DisplayConfig => 7,
            FlagKind::LoggingInvocation => 8,
            FlagKind::Other(_) => 9,
            FlagKind::AgentConstruction => 10,
            FlagKind::GroupChatConstruction => 11,
        }
    }
}

impl fmt::Display for FlagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FlagKind::CodeExecutionConfig => "code_execution_config",
            FlagKind::UseDocker => "use_docker",
            FlagKind::BrowserConfig => "browser_config",
            FlagKind::MaxRounds => "max_rounds",
            FlagKind::MaxConsecutiveAutoReply => "max_consecutive_auto_reply",
            FlagKind::HumanInputMode => "human_input_mode",
            FlagKind::SystemMessage => "system_message",
            FlagKind::LoggingInvocation => "logging_invocation",
            FlagKind::DisplayConfig => "display_config",
            FlagKind::AgentConstruction => "agent_construction",
            FlagKind::GroupChatConstruction => "group_chat_construction",
            FlagKind::Other(s) => s,
        };
        f.write_str(s)
    }
}

impl FromStr for FlagKind {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(FlagKind::KNOWN
            .iter()
            .find(|k| k.to_string() == s)
            .cloned()
            .unwrap_or_else(|| FlagKind::Other(s.to_string())))
    }
}

impl Serialize for FlagKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FlagKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        FlagKind::from_str(&s).map_err(D::Error::custom)
    }
}

/// A flag value as far as static inspection can resolve it. Anything that is
/// not a boolean, integer or string literal, or a dict literal with string
/// keys, is kept verbatim as `Unresolved`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizedValue {
    Bool(bool),
    Int(i64),
    Str(String),
    Mapping(BTreeMap<String, NormalizedValue>),
    Absent,
    Unresolved(String),
}

impl fmt::Display for NormalizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizedValue::Bool(b) => write!(f, "{b}"),
            NormalizedValue::Int(i) => write!(f, "{i}"),
            NormalizedValue::Str(s) => write!(f, "{s:?}"),
            NormalizedValue::Mapping(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
            NormalizedValue::Absent => write!(f, "absent"),
            NormalizedValue::Unresolved(s) => write!(f, "unresolved({s})"),
        }
    }
}

/// Whether the flag was written in the source or synthesized from a framework
/// default by [`crate::rules::inject_defaults`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Explicit,
    FrameworkDefault,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Explicit => f.write_str("explicit"),
            Provenance::FrameworkDefault => f.write_str("framework_default"),
        }
    }
}

/// 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub path: String,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.path, self.line, self.column)
    }
}

/// One occurrence of a behavior-relevant flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagSite {
    pub kind: FlagKind,
    pub value: NormalizedValue,
    pub location: Location,
    /// Innermost enclosing `def`/`class` name, when any.
    pub enclosing_construct: Option<String>,
    /// Resolved class/function name of the call the flag belongs to.
    pub constructor_name: Option<String>,
    pub provenance: Provenance,
    /// Anchor of the call (or statement) this site belongs to. Two sites with
    /// equal anchors are co-located: a bound flag attaches to a construction,
    /// and default injection checks this before synthesizing a site.
    pub call_site: Option<Location>,
}

/// A recoverable scan problem. `gave_up` marks the classes that count toward
/// the parse-failure fraction (undecodable file, unterminated string,
/// unbalanced brackets).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWarning {
    pub path: String,
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub gave_up: bool,
}

impl fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanOutcome {
    pub sites: Vec<FlagSite>,
    pub warnings: Vec<ScanWarning>,
}

impl ScanOutcome {
    /// True when part of the file had to be abandoned.
    pub fn gave_up(&self) -> bool {
        self.warnings.iter().any(|w| w.gave_up)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("unbalanced brackets in call argument region")]
    Unbalanced,
    #[error("call argument region does not start with `(`")]
    NotACall,
}

/// Normalize a single expression written as text.
pub fn normalize_value(expr: &str) -> NormalizedValue {
    let (tokens, _) = tokenize(expr);
    let tokens: Vec<Token> = tokens.into_iter().filter(|t| t.kind != TokenKind::Newline).collect();
    normalize_tokens(expr, &tokens)
}

/// Extract the keyword arguments of one call from the text of its argument
/// region (starting at the opening parenthesis). Positional arguments are
/// skipped; unbalanced brackets abandon extraction.
pub fn extract_call_arguments(region: &str) -> Result<BTreeMap<String, NormalizedValue>, ExtractError> {
    let (tokens, warnings) = tokenize(region);
    let tokens: Vec<Token> = tokens.into_iter().filter(|t| t.kind != TokenKind::Newline).collect();
    if tokens.first().is_none_or(|t| !t.is_op("(")) {
        return Err(ExtractError::NotACall);
    }
    if warnings.iter().any(|w| w.gave_up && w.message.contains("bracket")) {
        return Err(ExtractError::Unbalanced);
    }
    let mut args = BTreeMap::new();
    let mut depth = 0i32;
    let mut i = 0usize;
    while i < tokens.len() {
        let tok = &tokens[i];
        match tok.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            _ => {}
        }
        if depth == 1
            && tok.kind == TokenKind::Ident
            && tokens.get(i + 1).is_some_and(|t| t.is_op("="))
            && tokens.get(i.wrapping_sub(1)).is_some_and(|t| t.is_op("(") || t.is_op(","))
        {
            let end = span_end(&tokens, i + 2);
            args.insert(tok.text.to_string(), normalize_tokens(region, &tokens[i + 2..end]));
            i = end;
            continue;
        }
        i += 1;
    }
    Ok(args)
}

/// Exclusive end index of a value span starting at `start`: stops at a comma
/// at the starting depth or at the bracket closing the surrounding group.
fn span_end(tokens: &[Token], start: usize) -> usize {
    let mut depth = 0i32;
    for (off, tok) in tokens[start..].iter().enumerate() {
        match tok.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                if depth == 0 {
                    return start + off;
                }
                depth -= 1;
            }
            "," if depth == 0 => return start + off,
            _ => {}
        }
        if tok.kind == TokenKind::Newline && depth == 0 {
            return start + off;
        }
    }
    tokens.len()
}

/// Exclusive end of a statement-level span: stops at a logical newline or
/// `;` outside brackets.
fn statement_end(tokens: &[Token], start: usize) -> usize {
    let mut depth = 0i32;
    for (off, tok) in tokens[start..].iter().enumerate() {
        match tok.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ";" if depth <= 0 => return start + off,
            _ => {}
        }
        if tok.kind == TokenKind::Newline {
            return start + off;
        }
    }
    tokens.len()
}

fn parse_int(text: &str) -> Option<i64> {
    let t = text.replace('_', "");
    if let Some(h) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()
    } else if let Some(o) = t.strip_prefix("0o").or_else(|| t.strip_prefix("0O")) {
        i64::from_str_radix(o, 8).ok()
    } else if let Some(b) = t.strip_prefix("0b").or_else(|| t.strip_prefix("0B")) {
        i64::from_str_radix(b, 2).ok()
    } else {
        t.parse().ok()
    }
}

/// Normalize a token span. `src` must be the text the tokens were produced
/// from, so unresolved values can be kept verbatim.
fn normalize_tokens(src: &str, tokens: &[Token]) -> NormalizedValue {
    let tokens: Vec<&Token> = tokens.iter().filter(|t| t.kind != TokenKind::Newline).collect();
    let (first, last) = match (tokens.first(), tokens.last()) {
        (Some(f), Some(l)) => (**f, **l),
        _ => return NormalizedValue::Absent,
    };
    let verbatim = || NormalizedValue::Unresolved(src[first.start..last.end].to_string());
    if tokens.len() == 1 {
        match first.kind {
            TokenKind::Ident if first.text == "True" => return NormalizedValue::Bool(true),
            TokenKind::Ident if first.text == "False" => return NormalizedValue::Bool(false),
            TokenKind::Number => {
                if let Some(v) = parse_int(first.text) {
                    return NormalizedValue::Int(v);
                }
                return verbatim();
            }
            _ => {}
        }
    }
    if tokens.len() == 2 && (first.is_op("-") || first.is_op("+")) && last.kind == TokenKind::Number {
        if let Some(v) = parse_int(last.text) {
            return NormalizedValue::Int(if first.is_op("-") { -v } else { v });
        }
        return verbatim();
    }
    if tokens.iter().all(|t| t.is_str()) {
        let mut out = String::new();
        for t in &tokens {
            match decode_string(t.text) {
                Some(s) => out.push_str(&s),
                None => return verbatim(),
            }
        }
        return NormalizedValue::Str(out);
    }
    if first.is_op("{") && last.is_op("}") {
        if let Some(map) = parse_mapping(src, &tokens) {
            return NormalizedValue::Mapping(map);
        }
    }
    verbatim()
}

/// Parse a dict literal with string-literal keys; `None` for anything else
/// (sets, comprehensions, spreads, computed keys).
fn parse_mapping(src: &str, tokens: &[&Token]) -> Option<BTreeMap<String, NormalizedValue>> {
    // The braces must enclose the whole span.
    let mut depth = 0i32;
    for (i, tok) in tokens.iter().enumerate() {
        match tok.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 && i != tokens.len() - 1 {
                    return None;
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return None;
    }
    let mut map = BTreeMap::new();
    let mut i = 1usize;
    let end = tokens.len() - 1;
    while i < end {
        let mut key = String::new();
        let mut any = false;
        while i < end && tokens[i].is_str() {
            key.push_str(&decode_string(tokens[i].text)?);
            any = true;
            i += 1;
        }
        if !any || i >= end || !tokens[i].is_op(":") {
            return None;
        }
        i += 1;
        let vstart = i;
        let mut vdepth = 0i32;
        while i < end {
            match tokens[i].text {
                "(" | "[" | "{" => vdepth += 1,
                ")" | "]" | "}" => vdepth -= 1,
                "," if vdepth == 0 => break,
                _ => {}
            }
            i += 1;
        }
        let owned: Vec<Token> = tokens[vstart..i].iter().map(|t| **t).collect();
        map.insert(key, normalize_tokens(src, &owned));
        if i < end && tokens[i].is_op(",") {
            i += 1;
        }
    }
    Some(map)
}

/// Scan raw file bytes: undecodable files produce zero sites and a gave-up
/// warning instead of an error.
pub fn scan_bytes(bytes: &[u8], path: &str, pack: &RulePack) -> ScanOutcome {
    match std::str::from_utf8(bytes) {
        Ok(text) => scan_file(text, path, pack),
        Err(_) => ScanOutcome {
            sites: Vec::new(),
            warnings: vec![ScanWarning {
                path: path.to_string(),
                line: 1,
                column: 1,
                message: "file is not valid UTF-8; skipped".to_string(),
                gave_up: true,
            }],
        },
    }
}

/// Scan one source file for flag sites matching the pack's name patterns.
pub fn scan_file(source: &str, path: &str, pack: &RulePack) -> ScanOutcome {
    Scanner::new(source, path, pack).run()
}

struct Group {
    bracket: char,
    call: Option<CallInfo>,
    suppress: bool,
}

#[derive(Clone)]
struct CallInfo {
    constructor: String,
    anchor: (u32, u32),
}

struct Scanner<'s> {
    src: &'s str,
    path: String,
    tokens: Vec<Token<'s>>,
    aliases: BTreeMap<String, String>,
    kwarg_kinds: Vec<(FlagKind, Vec<NamePattern>)>,
    call_kinds: Vec<(FlagKind, Vec<NamePattern>)>,
    sites: Vec<FlagSite>,
    warnings: Vec<ScanWarning>,
    groups: Vec<Group>,
    scopes: Vec<(u32, String)>,
}

impl<'s> Scanner<'s> {
    fn new(src: &'s str, path: &str, pack: &RulePack) -> Self {
        let (tokens, lex_warnings) = tokenize(src);
        let warnings = lex_warnings
            .into_iter()
            .map(|w| ScanWarning {
                path: path.to_string(),
                line: w.line,
                column: w.column,
                message: w.message,
                gave_up: w.gave_up,
            })
            .collect();
        let mut by_rank: Vec<(FlagKind, Vec<NamePattern>)> = pack
            .flag_patterns
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        by_rank.sort_by_key(|a| (a.0.rank(), a.0.to_string()));
        let kwarg_kinds: Vec<_> = by_rank.iter().filter(|(k, _)| !k.is_construction()).cloned().collect();
        let mut call_kinds: Vec<(FlagKind, Vec<NamePattern>)> = Vec::new();
        for kind in [FlagKind::GroupChatConstruction, FlagKind::AgentConstruction, FlagKind::DisplayConfig, FlagKind::LoggingInvocation]
        {
            if let Some(p) = pack.flag_patterns.get(&kind) {
                call_kinds.push((kind, p.clone()));
            }
        }
        for (k, p) in &by_rank {
            if matches!(k, FlagKind::Other(_)) {
                call_kinds.push((k.clone(), p.clone()));
            }
        }
        let aliases = collect_aliases(&tokens);
        Scanner {
            src,
            path: path.to_string(),
            tokens,
            aliases,
            kwarg_kinds,
            call_kinds,
            sites: Vec::new(),
            warnings,
            groups: Vec::new(),
            scopes: Vec::new(),
        }
    }

    fn loc(&self, tok: &Token) -> Location {
        Location { path: self.path.clone(), line: tok.line, column: tok.column }
    }

    fn loc_at(&self, line: u32, column: u32) -> Location {
        Location { path: self.path.clone(), line, column }
    }

    fn enclosing(&self) -> Option<String> {
        self.scopes.last().map(|(_, name)| name.clone())
    }

    fn match_kind<'k>(kinds: &'k [(FlagKind, Vec<NamePattern>)], dotted: &[String]) -> Option<&'k FlagKind> {
        kinds
            .iter()
            .find(|(_, patterns)| patterns.iter().any(|p| p.matches(dotted)))
            .map(|(k, _)| k)
    }

    /// Resolve a dotted name chain through single-file import aliases.
    fn resolve(&self, segments: &[&str]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        match self.aliases.get(segments[0]) {
            Some(target) => out.extend(target.split('.').map(str::to_string)),
            None => out.push(segments[0].to_string()),
        }
        out.extend(segments[1..].iter().map(|s| s.to_string()));
        out
    }

    fn run(mut self) -> ScanOutcome {
        let mut at_line_start = true;
        let mut i = 0usize;
        while i < self.tokens.len() {
            let tok = self.tokens[i];
            if tok.kind == TokenKind::Newline {
                at_line_start = true;
                i += 1;
                continue;
            }
            let line_start = std::mem::take(&mut at_line_start);
            if line_start && self.groups.is_empty() {
                self.track_scope(i);
                if tok.kind == TokenKind::Ident {
                    self.try_assignment(i);
                }
            }
            match tok.kind {
                TokenKind::Op => match tok.text {
                    "(" => self.open_call_group(i),
                    "[" | "{" => self.groups.push(Group { bracket: tok.text.chars().next().unwrap(), call: None, suppress: false }),
                    ")" | "]" | "}" => {
                        self.groups.pop();
                    }
                    _ => {}
                },
                TokenKind::Ident => self.try_kwarg(i),
                _ => {}
            }
            i += 1;
        }
        self.sites.sort_by_key(|a| (a.location.line, a.location.column));
        ScanOutcome { sites: self.sites, warnings: self.warnings }
    }

    /// Maintain the indent-based def/class scope stack; called on the first
    /// token of each logical line at bracket depth zero.
    fn track_scope(&mut self, i: usize) {
        let tok = &self.tokens[i];
        let indent = tok.column;
        while self.scopes.last().is_some_and(|(col, _)| *col >= indent) {
            self.scopes.pop();
        }
        let name_idx = if tok.is_ident("def") || tok.is_ident("class") {
            Some(i + 1)
        } else if tok.is_ident("async") && self.tokens.get(i + 1).is_some_and(|t| t.is_ident("def")) {
            Some(i + 2)
        } else {
            None
        };
        if let Some(idx) = name_idx {
            if let Some(name) = self.tokens.get(idx).filter(|t| t.kind == TokenKind::Ident) {
                self.scopes.push((indent, name.text.to_string()));
            }
        }
    }

    /// Detect `name = value` / `name: ann = value` statements (including
    /// dotted targets) at bracket depth zero.
    fn try_assignment(&mut self, i: usize) {
        let mut last = i;
        while self.tokens.get(last + 1).is_some_and(|t| t.is_op("."))
            && self.tokens.get(last + 2).is_some_and(|t| t.kind == TokenKind::Ident)
        {
            last += 2;
        }
        if self.tokens[i].kind != TokenKind::Ident {
            return;
        }
        let after = last + 1;
        let value_start = match self.tokens.get(after) {
            Some(t) if t.is_op("=") => after + 1,
            Some(t) if t.is_op(":") => {
                // Annotated assignment: look for `=` at this depth before the
                // end of the logical line.
                let stop = statement_end(&self.tokens, after + 1);
                let mut depth = 0i32;
                let mut eq = None;
                for j in after + 1..stop {
                    match self.tokens[j].text {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => depth -= 1,
                        "=" if depth == 0 && self.tokens[j].kind == TokenKind::Op => {
                            eq = Some(j);
                            break;
                        }
                        _ => {}
                    }
                }
                match eq {
                    Some(j) => j + 1,
                    None => return,
                }
            }
            _ => return,
        };
        let target = self.tokens[last];
        let name = [target.text.to_string()];
        let Some(kind) = Self::match_kind(&self.kwarg_kinds, &name).cloned() else {
            return;
        };
        let end = statement_end(&self.tokens, value_start);
        let owned: Vec<Token> = self.tokens[value_start..end].to_vec();
        let value = normalize_tokens(self.src, &owned);
        let anchor = self.loc(&target);
        self.emit_with_mapping_docker(kind, value, anchor.clone(), None, Some(anchor), &owned);
    }

    /// Handle an opening parenthesis: classify the call name (constructions,
    /// display/logging invocations) and push the group context.
    fn open_call_group(&mut self, i: usize) {
        let mut call = None;
        let mut suppress = false;
        if i > 0 && self.tokens[i - 1].kind == TokenKind::Ident {
            let mut start = i - 1;
            while start >= 2
                && self.tokens[start - 1].is_op(".")
                && self.tokens[start - 2].kind == TokenKind::Ident
            {
                start -= 2;
            }
            let before = start.checked_sub(1).map(|j| self.tokens[j]);
            if before.is_some_and(|t| t.is_ident("def") || t.is_ident("class")) {
                suppress = true;
            } else {
                let segments: Vec<&str> = (start..i).step_by(2).map(|j| self.tokens[j].text).collect();
                let resolved = self.resolve(&segments);
                let dotted = resolved.join(".");
                let final_seg = resolved.last().cloned().unwrap_or_default();
                let anchor_tok = self.tokens[start];
                if let Some(kind) = Self::match_kind(&self.call_kinds, &resolved).cloned() {
                    let anchor = self.loc(&anchor_tok);
                    let (value, constructor) = if kind.is_construction() {
                        (NormalizedValue::Absent, Some(final_seg.clone()))
                    } else {
                        (NormalizedValue::Str(dotted.clone()), None)
                    };
                    self.sites.push(FlagSite {
                        kind,
                        value,
                        location: anchor.clone(),
                        enclosing_construct: self.enclosing(),
                        constructor_name: constructor,
                        provenance: Provenance::Explicit,
                        call_site: Some(anchor),
                    });
                }
                call = Some(CallInfo { constructor: final_seg, anchor: (anchor_tok.line, anchor_tok.column) });
            }
        }
        self.groups.push(Group { bracket: '(', call, suppress });
    }

    /// Detect `name=value` keyword arguments directly inside a call's
    /// parentheses.
    fn try_kwarg(&mut self, i: usize) {
        let Some(group) = self.groups.last() else { return };
        if group.bracket != '(' || group.suppress {
            return;
        }
        if !self.tokens.get(i + 1).is_some_and(|t| t.is_op("=")) {
            return;
        }
        if !(i > 0 && (self.tokens[i - 1].is_op("(") || self.tokens[i - 1].is_op(","))) {
            return;
        }
        let name_tok = self.tokens[i];
        let name = [name_tok.text.to_string()];
        let Some(kind) = Self::match_kind(&self.kwarg_kinds, &name).cloned() else {
            return;
        };
        let end = span_end(&self.tokens, i + 2);
        let owned: Vec<Token> = self.tokens[i + 2..end].to_vec();
        let value = normalize_tokens(self.src, &owned);
        let (constructor, anchor) = match &group.call {
            Some(info) => (Some(info.constructor.clone()), Some(self.loc_at(info.anchor.0, info.anchor.1))),
            None => (None, None),
        };
        self.emit_with_mapping_docker(kind, value, self.loc(&name_tok), constructor, anchor, &owned);
    }

    /// Emit the site, plus the embedded use_docker site when a
    /// code-execution mapping carries that key.
    fn emit_with_mapping_docker(
        &mut self,
        kind: FlagKind,
        value: NormalizedValue,
        location: Location,
        constructor: Option<String>,
        anchor: Option<Location>,
        value_tokens: &[Token],
    ) {
        let embedded = match (&kind, &value) {
            (FlagKind::CodeExecutionConfig, NormalizedValue::Mapping(m)) => m
                .get("use_docker")
                .map(|v| (v.clone(), find_mapping_key(value_tokens, "use_docker"))),
            _ => None,
        };
        self.sites.push(FlagSite {
            kind,
            value,
            location: location.clone(),
            enclosing_construct: self.enclosing(),
            constructor_name: constructor.clone(),
            provenance: Provenance::Explicit,
            call_site: anchor.clone(),
        });
        if let Some((docker_value, key_pos)) = embedded {
            let key_loc = key_pos
                .map(|(line, column)| self.loc_at(line, column))
                .unwrap_or(location);
            self.sites.push(FlagSite {
                kind: FlagKind::UseDocker,
                value: docker_value,
                location: key_loc,
                enclosing_construct: self.enclosing(),
                constructor_name: constructor,
                provenance: Provenance::Explicit,
                call_site: anchor,
            });
        }
    }
}

/// Position of a string key directly inside the outermost dict braces of a
/// value span.
fn find_mapping_key(tokens: &[Token], key: &str) -> Option<(u32, u32)> {
    let mut depth = 0i32;
    for (i, tok) in tokens.iter().enumerate() {
        match tok.text {
            "(" | "[" | "{" => {
                depth += 1;
                continue;
            }
            ")" | "]" | "}" => {
                depth -= 1;
                continue;
            }
            _ => {}
        }
        if depth == 1
            && tok.is_str()
            && decode_string(tok.text).as_deref() == Some(key)
            && tokens.get(i + 1).is_some_and(|t| t.is_op(":"))
        {
            return Some((tok.line, tok.column));
        }
    }
    None
}

/// Collect `import x.y as z` / `from m import a as b` aliases. Plain imports
/// bind identity names and need no entry.
fn collect_aliases(tokens: &[Token]) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut depth = 0i32;
    let mut at_line_start = true;
    let mut i = 0usize;
    while i < tokens.len() {
        let tok = &tokens[i];
        if tok.kind == TokenKind::Newline {
            at_line_start = true;
            i += 1;
            continue;
        }
        let line_start = std::mem::take(&mut at_line_start);
        match tok.text {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            _ => {}
        }
        if line_start && depth == 0 && tok.is_ident("import") {
            i = parse_plain_import(tokens, i + 1, &mut map);
            continue;
        }
        if line_start && depth == 0 && tok.is_ident("from") {
            let mut j = i + 1;
            while j < tokens.len() && !tokens[j].is_ident("import") {
                if tokens[j].kind == TokenKind::Newline {
                    break;
                }
                j += 1;
            }
            if tokens.get(j).is_some_and(|t| t.is_ident("import")) {
                i = parse_from_names(tokens, j + 1, &mut map);
                continue;
            }
        }
        i += 1;
    }
    map
}

fn parse_plain_import(tokens: &[Token], mut i: usize, map: &mut BTreeMap<String, String>) -> usize {
    loop {
        let mut segments: Vec<&str> = Vec::new();
        while tokens.get(i).is_some_and(|t| t.kind == TokenKind::Ident && !t.is_ident("as")) {
            segments.push(tokens[i].text);
            if tokens.get(i + 1).is_some_and(|t| t.is_op(".")) {
                i += 2;
            } else {
                i += 1;
                break;
            }
        }
        if segments.is_empty() {
            return i;
        }
        if tokens.get(i).is_some_and(|t| t.is_ident("as")) {
            if let Some(alias) = tokens.get(i + 1).filter(|t| t.kind == TokenKind::Ident) {
                map.insert(alias.text.to_string(), segments.join("."));
            }
            i += 2;
        }
        if tokens.get(i).is_some_and(|t| t.is_op(",")) {
            i += 1;
        } else {
            return i;
        }
    }
}

fn parse_from_names(tokens: &[Token], mut i: usize, map: &mut BTreeMap<String, String>) -> usize {
    if tokens.get(i).is_some_and(|t| t.is_op("(")) {
        i += 1;
    }
    loop {
        match tokens.get(i) {
            Some(t) if t.kind == TokenKind::Ident => {
                let name = t.text;
                i += 1;
                if tokens.get(i).is_some_and(|t| t.is_ident("as")) {
                    if let Some(alias) = tokens.get(i + 1).filter(|t| t.kind == TokenKind::Ident) {
                        map.insert(alias.text.to_string(), name.to_string());
                    }
                    i += 2;
                }
            }
            _ => return i,
        }
        if tokens.get(i).is_some_and(|t| t.is_op(",")) {
            i += 1;
        } else {
            return i;
        }
    }
}
