//! Ordered key-value documents and the plain-text format they are stored in.
//!
//! Record files are indented `key: value` text, a small YAML-flavoured subset:
//!
//! ```text
//! id: 7
//! title: Stack overflow in the comm bridge
//! vendor: null
//! keywords:
//!   - overflow
//!   - transport
//! severity:
//!   rvss-score: None
//!   rvss-vector: 'RVSS:1.0/AV:N/AC:L'
//! ```
//!
//! The subset is deliberately narrow so that parse and render are exact
//! inverses: maps preserve insertion order, scalars are null, 64-bit
//! integers, floats, or strings, and lists hold scalars only. Strings that
//! could be misread (numbers, `null`, leading `-`, embedded `:` or `#`,
//! control characters) are quoted on output; `'...'` quoting doubles the
//! quote, `"..."` quoting understands `\n \t \r \\ \"` and `\u{...}`.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// A scalar or nested value inside a document.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Map(Doc),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(s.to_owned())
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Numeric view: integers widen to floats.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&Doc> {
        match self {
            Value::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Name of the value's shape, for error messages.
    pub fn kind(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "integer",
            Value::Float(_) => "number",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Map(_) => "map",
        }
    }
}

/// Insertion-ordered map of field name to value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Doc {
    entries: Vec<(String, Value)>,
}

impl Doc {
    pub fn new() -> Doc {
        Doc::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut Value> {
        self.entries
            .iter_mut()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
    }

    /// Replaces the value in place when the key exists, appends otherwise.
    pub fn insert(&mut self, key: &str, value: Value) {
        match self.get_mut(key) {
            Some(slot) => *slot = value,
            None => self.entries.push((key.to_owned(), value)),
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        let idx = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(idx).1)
    }

    /// Renames a key, keeping its position. No-op when `old` is absent.
    pub fn rename(&mut self, old: &str, new: &str) {
        if let Some(entry) = self.entries.iter_mut().find(|(k, _)| k == old) {
            entry.0 = new.to_owned();
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }
}

impl FromIterator<(String, Value)> for Doc {
    fn from_iter<T: IntoIterator<Item = (String, Value)>>(iter: T) -> Doc {
        Doc {
            entries: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: tab characters are not allowed in indentation")]
    TabIndent { line: usize },
    #[error("line {line}: indentation does not match any open block")]
    BadIndent { line: usize },
    #[error("line {line}: expected `key: value`")]
    MissingColon { line: usize },
    #[error("line {line}: invalid key {key:?} (keys are [A-Za-z0-9_-]+)")]
    InvalidKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key has neither a value nor an indented block")]
    EmptyValue { line: usize },
    #[error("line {line}: expected a `- ` list item")]
    ExpectedListItem { line: usize },
    #[error("line {line}: unterminated quoted string")]
    UnterminatedQuote { line: usize },
    #[error("line {line}: unexpected text after quoted string")]
    TrailingGarbage { line: usize },
    #[error("line {line}: invalid escape sequence")]
    BadEscape { line: usize },
    #[error("line {line}: integer out of range")]
    NumberOverflow { line: usize },
    #[error("line {line}: malformed number")]
    BadNumber { line: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("cannot render non-finite number")]
    NonFiniteNumber,
    #[error("cannot render key {0:?} (keys are [A-Za-z0-9_-]+)")]
    InvalidKey(String),
    #[error("list elements must be scalars")]
    NonScalarListElement,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

// ---- parsing ----

struct Line<'a> {
    number: usize,
    indent: usize,
    content: &'a str,
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }

    fn parse_map(&mut self, indent: usize) -> Result<Doc, ParseError> {
        let mut doc = Doc::new();
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(ParseError::BadIndent { line: line.number });
            }
            let number = line.number;
            let content = line.content;
            let (key, rest) = content
                .split_once(':')
                .ok_or(ParseError::MissingColon { line: number })?;
            let key = key.trim_end();
            if !valid_key(key) {
                return Err(ParseError::InvalidKey {
                    line: number,
                    key: key.to_owned(),
                });
            }
            if doc.contains_key(key) {
                return Err(ParseError::DuplicateKey {
                    line: number,
                    key: key.to_owned(),
                });
            }
            self.pos += 1;
            let rest = rest.trim();
            let value = if rest.is_empty() {
                // Block value: indentation of the first child sets the block.
                match self.peek() {
                    Some(child) if child.indent > indent => {
                        let child_indent = child.indent;
                        if child.content.starts_with("- ") || child.content == "-" {
                            Value::List(self.parse_list(child_indent)?)
                        } else {
                            Value::Map(self.parse_map(child_indent)?)
                        }
                    }
                    _ => return Err(ParseError::EmptyValue { line: number }),
                }
            } else {
                parse_scalar_entry(rest, number)?
            };
            doc.entries.push((key.to_owned(), value));
        }
        Ok(doc)
    }

    fn parse_list(&mut self, indent: usize) -> Result<Vec<Value>, ParseError> {
        let mut items = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(ParseError::BadIndent { line: line.number });
            }
            let number = line.number;
            let rest = match line.content.strip_prefix("- ") {
                Some(r) => r.trim(),
                None => return Err(ParseError::ExpectedListItem { line: number }),
            };
            if rest.is_empty() {
                return Err(ParseError::EmptyValue { line: number });
            }
            self.pos += 1;
            items.push(parse_scalar(rest, number)?);
        }
        Ok(items)
    }
}

/// Scalar position after `key: `; recognizes the inline empties.
fn parse_scalar_entry(text: &str, line: usize) -> Result<Value, ParseError> {
    match text {
        "[]" => Ok(Value::List(Vec::new())),
        "{}" => Ok(Value::Map(Doc::new())),
        _ => parse_scalar(text, line),
    }
}

fn parse_scalar(text: &str, line: usize) -> Result<Value, ParseError> {
    debug_assert!(!text.is_empty());
    if text == "null" || text == "~" {
        return Ok(Value::Null);
    }
    if let Some(rest) = text.strip_prefix('"') {
        return parse_double_quoted(rest, line);
    }
    if let Some(rest) = text.strip_prefix('\'') {
        return parse_single_quoted(rest, line);
    }
    if looks_like_int(text) {
        return text
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| ParseError::NumberOverflow { line });
    }
    if looks_like_float(text) {
        return text
            .parse::<f64>()
            .map(Value::Float)
            .map_err(|_| ParseError::BadNumber { line });
    }
    Ok(Value::Str(text.to_owned()))
}

fn looks_like_int(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// `-?digits(.digits)?([eE][+-]?digits)?` with at least one of dot/exponent.
fn looks_like_float(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], Some(&s[i + 1..])),
        None => (s, None),
    };
    let mantissa_ok = match mantissa.split_once('.') {
        Some((int, frac)) => {
            !int.is_empty()
                && !frac.is_empty()
                && int.bytes().all(|b| b.is_ascii_digit())
                && frac.bytes().all(|b| b.is_ascii_digit())
        }
        None => {
            // Plain digits only count as a float when an exponent follows.
            exponent.is_some() && !mantissa.is_empty() && mantissa.bytes().all(|b| b.is_ascii_digit())
        }
    };
    let exponent_ok = match exponent {
        Some(e) => {
            let e = e.strip_prefix(['+', '-']).unwrap_or(e);
            !e.is_empty() && e.bytes().all(|b| b.is_ascii_digit())
        }
        None => true,
    };
    mantissa_ok && exponent_ok
}

fn parse_double_quoted(rest: &str, line: usize) -> Result<Value, ParseError> {
    let mut out = String::new();
    let mut chars = rest.chars();
    loop {
        match chars.next() {
            None => return Err(ParseError::UnterminatedQuote { line }),
            Some('"') => {
                if !chars.as_str().trim().is_empty() {
                    return Err(ParseError::TrailingGarbage { line });
                }
                return Ok(Value::Str(out));
            }
            Some('\\') => match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some('\\') => out.push('\\'),
                Some('"') => out.push('"'),
                Some('u') => {
                    if chars.next() != Some('{') {
                        return Err(ParseError::BadEscape { line });
                    }
                    let mut hex = String::new();
                    loop {
                        match chars.next() {
                            Some('}') => break,
                            Some(c) if c.is_ascii_hexdigit() && hex.len() < 6 => hex.push(c),
                            _ => return Err(ParseError::BadEscape { line }),
                        }
                    }
                    let code =
                        u32::from_str_radix(&hex, 16).map_err(|_| ParseError::BadEscape { line })?;
                    out.push(char::from_u32(code).ok_or(ParseError::BadEscape { line })?);
                }
                _ => return Err(ParseError::BadEscape { line }),
            },
            Some(c) => out.push(c),
        }
    }
}

fn parse_single_quoted(rest: &str, line: usize) -> Result<Value, ParseError> {
    let mut out = String::new();
    let mut chars = rest.chars().peekable();
    loop {
        match chars.next() {
            None => return Err(ParseError::UnterminatedQuote { line }),
            Some('\'') => {
                if chars.peek() == Some(&'\'') {
                    chars.next();
                    out.push('\'');
                } else {
                    let tail: String = chars.collect();
                    if !tail.trim().is_empty() {
                        return Err(ParseError::TrailingGarbage { line });
                    }
                    return Ok(Value::Str(out));
                }
            }
            Some(c) => out.push(c),
        }
    }
}

/// Parses a whole document. Blank lines and `#` comment lines are skipped.
pub fn parse(text: &str) -> Result<Doc, ParseError> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        let content = &raw[indent..];
        if content.starts_with('\t') || raw[..indent].contains('\t') {
            return Err(ParseError::TabIndent { line: number });
        }
        if content.starts_with('#') {
            continue;
        }
        lines.push(Line {
            number,
            indent,
            content,
        });
    }
    if let Some(first) = lines.first() {
        if first.indent != 0 {
            return Err(ParseError::BadIndent { line: first.number });
        }
    }
    let mut parser = Parser { lines, pos: 0 };
    let doc = parser.parse_map(0)?;
    debug_assert!(parser.pos == parser.lines.len());
    Ok(doc)
}

// ---- rendering ----

fn needs_quoting(s: &str) -> bool {
    if s.is_empty() {
        return true;
    }
    let first = s.chars().next().unwrap();
    let last = s.chars().next_back().unwrap();
    if first.is_whitespace() || last.is_whitespace() {
        return true;
    }
    if matches!(first, '-' | '?' | '&' | '*' | '!' | '|' | '>' | '%' | '@' | '`' | ',') {
        return true;
    }
    if s == "null" || s == "~" || s == "true" || s == "false" || s == "[]" || s == "{}" {
        return true;
    }
    if looks_like_int(s) || looks_like_float(s) {
        return true;
    }
    s.chars().any(|c| {
        matches!(c, ':' | '#' | '"' | '\'' | '\\' | '{' | '}' | '[' | ']') || c.is_control()
    })
}

fn escape_double_quoted(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c if c.is_control() => {
                out.push_str(&format!("\\u{{{:x}}}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render_scalar(value: &Value, out: &mut String) -> Result<(), RenderError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Float(f) => {
            if !f.is_finite() {
                return Err(RenderError::NonFiniteNumber);
            }
            let text = format!("{f}");
            out.push_str(&text);
            if !text.contains(['.', 'e', 'E']) {
                out.push_str(".0");
            }
        }
        Value::Str(s) => {
            if !needs_quoting(s) {
                out.push_str(s);
            } else if s.chars().any(|c| c.is_control() || c == '"' || c == '\\') {
                escape_double_quoted(s, out);
            } else {
                out.push('\'');
                for c in s.chars() {
                    if c == '\'' {
                        out.push('\'');
                    }
                    out.push(c);
                }
                out.push('\'');
            }
        }
        Value::List(_) | Value::Map(_) => unreachable!("render_scalar called on container"),
    }
    Ok(())
}

fn render_map(doc: &Doc, indent: usize, out: &mut String) -> Result<(), RenderError> {
    for (key, value) in doc.iter() {
        if !valid_key(key) {
            return Err(RenderError::InvalidKey(key.to_owned()));
        }
        for _ in 0..indent {
            out.push(' ');
        }
        out.push_str(key);
        out.push(':');
        match value {
            Value::List(items) if items.is_empty() => out.push_str(" []\n"),
            Value::Map(m) if m.is_empty() => out.push_str(" {}\n"),
            Value::List(items) => {
                out.push('\n');
                for item in items {
                    if matches!(item, Value::List(_) | Value::Map(_)) {
                        return Err(RenderError::NonScalarListElement);
                    }
                    for _ in 0..indent + 2 {
                        out.push(' ');
                    }
                    out.push_str("- ");
                    render_scalar(item, out)?;
                    out.push('\n');
                }
            }
            Value::Map(m) => {
                out.push('\n');
                render_map(m, indent + 2, out)?;
            }
            scalar => {
                out.push(' ');
                render_scalar(scalar, out)?;
                out.push('\n');
            }
        }
    }
    Ok(())
}

/// Renders a document as text; `parse(render(d)) == d` for every renderable
/// document (finite numbers, scalar-only lists, well-formed keys).
pub fn render(doc: &Doc) -> Result<String, RenderError> {
    let mut out = String::new();
    render_map(doc, 0, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn doc(entries: &[(&str, Value)]) -> Doc {
        entries
            .iter()
            .map(|(k, v)| ((*k).to_owned(), v.clone()))
            .collect()
    }

    #[test]
    fn parses_flat_scalars() {
        let d = parse("id: 7\ntitle: Stack overflow\nvendor: null\nscore: 9.8\n").unwrap();
        assert_eq!(d.get("id"), Some(&Value::Int(7)));
        assert_eq!(d.get("title"), Some(&Value::str("Stack overflow")));
        assert_eq!(d.get("vendor"), Some(&Value::Null));
        assert_eq!(d.get("score"), Some(&Value::Float(9.8)));
    }

    #[test]
    fn parses_nested_map_and_list() {
        let text = "flaw:\n  phase: runtime\nkeywords:\n  - a\n  - b\n";
        let d = parse(text).unwrap();
        let flaw = d.get("flaw").unwrap().as_map().unwrap();
        assert_eq!(flaw.get("phase"), Some(&Value::str("runtime")));
        assert_eq!(
            d.get("keywords"),
            Some(&Value::List(vec![Value::str("a"), Value::str("b")]))
        );
    }

    #[test]
    fn preserves_key_order() {
        let d = parse("b: 1\na: 2\nc: 3\n").unwrap();
        let keys: Vec<&str> = d.keys().collect();
        assert_eq!(keys, ["b", "a", "c"]);
    }

    #[test]
    fn skips_comments_and_blanks() {
        let d = parse("# header\n\nid: 1\n  # indented comment\ntitle: x\n").unwrap();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn quoted_strings_keep_specials() {
        let d = parse("a: 'CVSS:3.1/AV:N'\nb: \"two\\nlines\"\nc: '9.8'\n").unwrap();
        assert_eq!(d.get("a"), Some(&Value::str("CVSS:3.1/AV:N")));
        assert_eq!(d.get("b"), Some(&Value::str("two\nlines")));
        assert_eq!(d.get("c"), Some(&Value::str("9.8")));
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(matches!(
            parse("a: 1\na: 2\n"),
            Err(ParseError::DuplicateKey { .. })
        ));
    }

    #[test]
    fn tab_indent_rejected() {
        assert!(matches!(
            parse("a:\n\tb: 1\n"),
            Err(ParseError::TabIndent { .. })
        ));
    }

    #[test]
    fn key_without_value_rejected() {
        assert!(matches!(parse("a:\nb: 1\n"), Err(ParseError::EmptyValue { .. })));
    }

    #[test]
    fn empty_containers_roundtrip() {
        let d = doc(&[
            ("xs", Value::List(vec![])),
            ("m", Value::Map(Doc::new())),
        ]);
        let text = render(&d).unwrap();
        assert_eq!(text, "xs: []\nm: {}\n");
        assert_eq!(parse(&text).unwrap(), d);
    }

    #[test]
    fn renders_floats_with_decimal_point() {
        let d = doc(&[("x", Value::Float(10.0))]);
        assert_eq!(render(&d).unwrap(), "x: 10.0\n");
    }

    #[test]
    fn quotes_ambiguous_strings() {
        let d = doc(&[
            ("a", Value::str("9.8")),
            ("b", Value::str("null")),
            ("c", Value::str("- item")),
            ("d", Value::str("")),
        ]);
        let text = render(&d).unwrap();
        assert_eq!(parse(&text).unwrap(), d);
    }

    #[test]
    fn non_finite_float_render_fails() {
        let d = doc(&[("x", Value::Float(f64::NAN))]);
        assert_eq!(render(&d), Err(RenderError::NonFiniteNumber));
    }

    #[test]
    fn deep_indent_blocks_accepted() {
        // Third-party files may indent with 4 spaces; first child sets depth.
        let d = parse("flaw:\n    phase: runtime\n    trace: x\n").unwrap();
        let flaw = d.get("flaw").unwrap().as_map().unwrap();
        assert_eq!(flaw.len(), 2);
    }

    #[test]
    fn empty_document_parses() {
        assert_eq!(parse("").unwrap(), Doc::new());
        assert_eq!(render(&Doc::new()).unwrap(), "");
    }
}
