//! Lexical scanner for Python-syntax source text.
//!
//! Deliberately not a full grammar: the flag matcher only needs identifiers,
//! literals, operators, bracket depth and logical-line structure, and it must
//! keep producing tokens for files that would not parse. Problems degrade to
//! warnings instead of errors.

/// One lexical token. `text` borrows the exact source slice; `start`/`end`
/// are byte offsets into the scanned source, `line`/`column` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub line: u32,
    pub column: u32,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str { raw: bool, formatted: bool, bytes: bool },
    Op,
    /// End of a logical line: emitted only at bracket depth zero, collapsed
    /// across blank and comment-only lines.
    Newline,
}

impl Token<'_> {
    pub fn is_op(&self, text: &str) -> bool {
        self.kind == TokenKind::Op && self.text == text
    }

    pub fn is_ident(&self, text: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == text
    }

    pub fn is_str(&self) -> bool {
        matches!(self.kind, TokenKind::Str { .. })
    }
}

/// A recoverable lexical problem. `gave_up` marks the classes that indicate
/// the scan abandoned part of the file (these feed the parse-failure
/// fraction); softer irregularities leave it false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexWarning {
    pub line: u32,
    pub column: u32,
    pub message: String,
    pub gave_up: bool,
}

const OPS3: [&str; 5] = ["**=", "//=", ">>=", "<<=", "..."];
const OPS2: [&str; 20] = [
    "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "->", ":=", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "@=", "~=",
];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
    depth: u32,
    tokens: Vec<Token<'a>>,
    warnings: Vec<LexWarning>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0, line: 1, column: 1, depth: 0, tokens: Vec::new(), warnings: Vec::new() }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.peek()?;
        self.pos += ch.len_utf8();
        if ch == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(ch)
    }

    fn warn(&mut self, line: u32, column: u32, gave_up: bool, message: impl Into<String>) {
        self.warnings.push(LexWarning { line, column, message: message.into(), gave_up });
    }

    fn push(&mut self, kind: TokenKind, start: usize, line: u32, column: u32) {
        self.tokens.push(Token { kind, text: &self.src[start..self.pos], line, column, start, end: self.pos });
    }

    fn push_newline(&mut self, line: u32, column: u32) {
        if matches!(self.tokens.last(), None | Some(Token { kind: TokenKind::Newline, .. })) {
            return;
        }
        self.tokens.push(Token {
            kind: TokenKind::Newline,
            text: "",
            line,
            column,
            start: self.pos,
            end: self.pos,
        });
    }

    /// True when the characters at the cursor begin a string literal,
    /// returning (prefix length in chars, raw, formatted, bytes).
    fn string_prefix(&self) -> Option<(usize, bool, bool, bool)> {
        let (mut raw, mut formatted, mut bytes) = (false, false, false);
        let mut n = 0;
        while n < 2 {
            match self.peek_at(n) {
                Some('r') | Some('R') if !raw => raw = true,
                Some('f') | Some('F') if !formatted => formatted = true,
                Some('b') | Some('B') if !bytes => bytes = true,
                Some('u') | Some('U') if n == 0 => {}
                _ => break,
            }
            n += 1;
        }
        match self.peek_at(n) {
            Some('\'') | Some('"') => Some((n, raw, formatted, bytes)),
            _ => None,
        }
    }

    fn lex_string(&mut self, prefix_chars: usize, raw: bool, formatted: bool, bytes: bool) {
        let start = self.pos;
        let (line, column) = (self.line, self.column);
        for _ in 0..prefix_chars {
            self.bump();
        }
        let quote = self.bump().expect("string_prefix guaranteed a quote");
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        loop {
            match self.peek() {
                None => {
                    self.warn(line, column, true, "unterminated string literal at end of file");
                    break;
                }
                Some('\\') => {
                    self.bump();
                    self.bump();
                }
                Some('\n') if !triple => {
                    self.warn(line, column, true, "unterminated string literal");
                    break;
                }
                Some(c) if c == quote => {
                    self.bump();
                    if !triple {
                        break;
                    }
                    if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                        self.bump();
                        self.bump();
                        break;
                    }
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
        self.push(TokenKind::Str { raw, formatted, bytes }, start, line, column);
    }

    fn lex_number(&mut self) {
        let start = self.pos;
        let (line, column) = (self.line, self.column);
        let mut prev = '\0';
        while let Some(c) = self.peek() {
            let take = c.is_ascii_alphanumeric()
                || c == '_'
                || c == '.'
                || ((c == '+' || c == '-') && (prev == 'e' || prev == 'E'));
            if !take {
                break;
            }
            prev = c;
            self.bump();
        }
        self.push(TokenKind::Number, start, line, column);
    }

    fn lex_ident(&mut self) {
        let start = self.pos;
        let (line, column) = (self.line, self.column);
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.bump();
            } else {
                break;
            }
        }
        self.push(TokenKind::Ident, start, line, column);
    }

    fn lex_op(&mut self) {
        let start = self.pos;
        let (line, column) = (self.line, self.column);
        let rest = &self.src[self.pos..];
        let len = OPS3
            .iter()
            .find(|op| rest.starts_with(**op))
            .map(|op| op.len())
            .or_else(|| OPS2.iter().find(|op| rest.starts_with(**op)).map(|op| op.len()))
            .unwrap_or_else(|| self.peek().map(char::len_utf8).unwrap_or(1));
        for _ in 0..len {
            self.bump();
        }
        let text = &self.src[start..self.pos];
        match text {
            "(" | "[" | "{" => self.depth += 1,
            ")" | "]" | "}" => {
                if self.depth == 0 {
                    self.warn(line, column, true, format!("unbalanced closing bracket `{text}`"));
                } else {
                    self.depth -= 1;
                }
            }
            _ => {}
        }
        self.push(TokenKind::Op, start, line, column);
    }

    fn run(mut self) -> (Vec<Token<'a>>, Vec<LexWarning>) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                let (line, column) = (self.line, self.column);
                self.bump();
                if self.depth == 0 {
                    self.push_newline(line, column);
                }
            } else if c == '\r' || c == ' ' || c == '\t' || c == '\u{0c}' {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c == '\\' && matches!(self.peek_at(1), Some('\n') | Some('\r')) {
                self.bump();
                if self.peek() == Some('\r') {
                    self.bump();
                }
                if self.peek() == Some('\n') {
                    self.bump();
                }
            } else if let Some((n, raw, formatted, bytes)) = self.string_prefix() {
                self.lex_string(n, raw, formatted, bytes);
            } else if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
                self.lex_number();
            } else if c.is_alphabetic() || c == '_' {
                self.lex_ident();
            } else {
                self.lex_op();
            }
        }
        if self.depth > 0 {
            self.warn(self.line, self.column, true, "unclosed bracket at end of file");
        }
        let (line, column) = (self.line, self.column);
        self.push_newline(line, column);
        (self.tokens, self.warnings)
    }
}

/// Tokenize Python-syntax source. Never fails; problems become warnings and
/// the token stream covers as much of the file as could be recognized.
pub fn tokenize(src: &str) -> (Vec<Token<'_>>, Vec<LexWarning>) {
    Lexer::new(src).run()
}

/// Decode a string-literal token (as sliced by [`tokenize`]) to its textual
/// value. Raw strings keep escapes; formatted strings keep their braces and
/// replacement fields as written. Returns `None` if the token is not a
/// string literal shape.
pub fn decode_string(text: &str) -> Option<String> {
    let mut raw = false;
    let mut chars = text.char_indices().peekable();
    let mut quote = None;
    let mut prefix_end = 0;
    for (i, c) in chars.by_ref() {
        match c {
            'r' | 'R' => raw = true,
            'b' | 'B' | 'u' | 'U' | 'f' | 'F' => {}
            '\'' | '"' => {
                quote = Some(c);
                prefix_end = i;
                break;
            }
            _ => return None,
        }
    }
    let quote = quote?;
    let body = &text[prefix_end..];
    let q3: String = std::iter::repeat_n(quote, 3).collect();
    let inner = if body.len() >= 6 && body.starts_with(&q3) && body.ends_with(&q3) {
        &body[3..body.len() - 3]
    } else if body.len() >= 2 && body.ends_with(quote) {
        &body[1..body.len() - 1]
    } else {
        // Unterminated literal: everything after the opening quote(s).
        body.strip_prefix(&q3 as &str).unwrap_or(&body[1..])
    };
    if raw {
        return Some(inner.to_string());
    }
    let mut out = String::with_capacity(inner.len());
    let mut it = inner.chars().peekable();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match it.next() {
            None => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some('a') => out.push('\u{7}'),
            Some('b') => out.push('\u{8}'),
            Some('f') => out.push('\u{c}'),
            Some('v') => out.push('\u{b}'),
            Some('\\') => out.push('\\'),
            Some('\'') => out.push('\''),
            Some('"') => out.push('"'),
            Some('\n') => {}
            Some('x') => push_hex_escape(&mut out, &mut it, 2, 'x'),
            Some('u') => push_hex_escape(&mut out, &mut it, 4, 'u'),
            Some('U') => push_hex_escape(&mut out, &mut it, 8, 'U'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
        }
    }
    Some(out)
}

fn push_hex_escape(out: &mut String, it: &mut std::iter::Peekable<std::str::Chars>, len: usize, tag: char) {
    let mut digits = String::new();
    for _ in 0..len {
        match it.peek() {
            Some(c) if c.is_ascii_hexdigit() => {
                digits.push(*c);
                it.next();
            }
            _ => break,
        }
    }
    let decoded = if digits.len() == len {
        u32::from_str_radix(&digits, 16).ok().and_then(char::from_u32)
    } else {
        None
    };
    match decoded {
        Some(c) => out.push(c),
        None => {
            out.push('\\');
            out.push(tag);
            out.push_str(&digits);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).0.iter().map(|t| (t.kind, t.text.to_string())).collect()
    }

    #[test]
    fn idents_numbers_ops() {
        let toks = kinds("x = max(1_000, 0xff)\n");
        let texts: Vec<&str> = toks.iter().map(|(_, t)| t.as_str()).collect();
        assert_eq!(texts, vec!["x", "=", "max", "(", "1_000", ",", "0xff", ")", ""]);
        assert_eq!(toks[0].0, TokenKind::Ident);
        assert_eq!(toks[4].0, TokenKind::Number);
        assert_eq!(toks.last().unwrap().0, TokenKind::Newline);
    }

    #[test]
    fn multi_char_operators_stay_single_tokens() {
        let texts: Vec<String> = kinds("a == b != c <= d >= e := f -> g ** h // i")
            .into_iter()
            .filter(|(k, _)| *k == TokenKind::Op)
            .map(|(_, t)| t)
            .collect();
        assert_eq!(texts, vec!["==", "!=", "<=", ">=", ":=", "->", "**", "//"]);
    }

    #[test]
    fn comments_are_skipped() {
        let toks = kinds("a = 1  # use_docker=False in a comment\nb = 2\n");
        assert!(toks.iter().all(|(_, t)| !t.contains("use_docker")));
    }

    #[test]
    fn string_styles() {
        let (toks, warns) = tokenize(r#"a = "plain" 'single' r"raw\n" f"fmt {x}" b'bytes' """triple
line""" 'esc\'q'"#);
        assert!(warns.is_empty());
        let strs: Vec<&Token> = toks.iter().filter(|t| t.is_str()).collect();
        assert_eq!(strs.len(), 7);
        assert_eq!(strs[2].kind, TokenKind::Str { raw: true, formatted: false, bytes: false });
        assert_eq!(strs[3].kind, TokenKind::Str { raw: false, formatted: true, bytes: false });
        assert_eq!(strs[4].kind, TokenKind::Str { raw: false, formatted: false, bytes: true });
        assert!(strs[5].text.contains('\n'));
    }

    #[test]
    fn newlines_only_at_depth_zero() {
        let toks = kinds("f(\n  a,\n  b,\n)\ng()\n");
        let newline_count = toks.iter().filter(|(k, _)| *k == TokenKind::Newline).count();
        assert_eq!(newline_count, 2);
    }

    #[test]
    fn blank_lines_collapse() {
        let toks = kinds("a = 1\n\n\n# comment only\n\nb = 2\n");
        let newline_count = toks.iter().filter(|(k, _)| *k == TokenKind::Newline).count();
        assert_eq!(newline_count, 2);
    }

    #[test]
    fn backslash_continuation_joins_lines() {
        let toks = kinds("a = 1 + \\\n    2\n");
        let newline_count = toks.iter().filter(|(k, _)| *k == TokenKind::Newline).count();
        assert_eq!(newline_count, 1);
    }

    #[test]
    fn unterminated_string_warns_and_recovers() {
        let (toks, warns) = tokenize("a = \"oops\nb = 2\n");
        assert_eq!(warns.len(), 1);
        assert!(warns[0].gave_up);
        assert!(warns[0].message.contains("unterminated"));
        assert!(toks.iter().any(|t| t.is_ident("b")));
    }

    #[test]
    fn unbalanced_brackets_warn() {
        let (_, warns) = tokenize("f(a, b\n");
        assert!(warns.iter().any(|w| w.gave_up && w.message.contains("unclosed")));
        let (_, warns) = tokenize("f)\n");
        assert!(warns.iter().any(|w| w.gave_up && w.message.contains("unbalanced")));
    }

    #[test]
    fn line_and_column_are_one_based() {
        let (toks, _) = tokenize("ab = 1\ncd(ef=2)\n");
        let cd = toks.iter().find(|t| t.is_ident("cd")).unwrap();
        assert_eq!((cd.line, cd.column), (2, 1));
        let ef = toks.iter().find(|t| t.is_ident("ef")).unwrap();
        assert_eq!((ef.line, ef.column), (2, 4));
    }

    #[test]
    fn triple_string_tracks_lines() {
        let (toks, _) = tokenize("s = \"\"\"a\nb\n\"\"\"\nafter = 1\n");
        let after = toks.iter().find(|t| t.is_ident("after")).unwrap();
        assert_eq!(after.line, 4);
    }

    #[test]
    fn decode_plain_and_escapes() {
        assert_eq!(decode_string(r#""a\nb""#).unwrap(), "a\nb");
        assert_eq!(decode_string(r#"'it\'s'"#).unwrap(), "it's");
        assert_eq!(decode_string(r#"r"a\nb""#).unwrap(), "a\\nb");
        assert_eq!(decode_string("\"\"\"tri\nple\"\"\"").unwrap(), "tri\nple");
        assert_eq!(decode_string(r#""\x41B""#).unwrap(), "AB");
        assert_eq!(decode_string(r#""\q""#).unwrap(), "\\q");
        assert_eq!(decode_string(r#"f"run {n}""#).unwrap(), "run {n}");
        assert!(decode_string("plain").is_none());
    }
}
