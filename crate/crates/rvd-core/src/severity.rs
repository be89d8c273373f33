//! Severity metric vectors: parsing, CVSS v3.1 base scoring, and the
//! qualitative bucket scale.
//!
//! Vectors are slash-separated `KEY:VAL` tokens with an optional
//! `CVSS:3.x/` or `RVSS:x.y/` prefix. The eight CVSS base metrics are
//! recognized and can be scored; every other key is preserved verbatim as
//! an extension, which is how robot-specific vectors are stored without
//! being scored here.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::doc::{Doc, Value};
use crate::record::{ValidationReport, Violation};

/// The eight CVSS v3.1 base metrics, in canonical vector order.
pub const BASE_METRICS: [&str; 8] = ["AV", "AC", "PR", "UI", "S", "C", "I", "A"];

fn legal_values(metric: &str) -> Option<&'static [&'static str]> {
    match metric {
        "AV" => Some(&["N", "A", "L", "P"]),
        "AC" => Some(&["L", "H"]),
        "PR" => Some(&["N", "L", "H"]),
        "UI" => Some(&["N", "R"]),
        "S" => Some(&["U", "C"]),
        "C" | "I" | "A" => Some(&["N", "L", "H"]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VectorError {
    #[error("empty vector")]
    Empty,
    #[error("malformed token {token:?} (expected KEY:VAL)")]
    MalformedToken { token: String },
    #[error("duplicate metric {key:?}")]
    DuplicateKey { key: String },
    #[error("illegal value {value:?} for metric {metric}")]
    IllegalValue { metric: String, value: String },
    #[error("missing base metric {metric}")]
    MissingMetric { metric: String },
}

/// A parsed severity vector: recognized CVSS base metrics plus opaque
/// extension metrics, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricVector {
    prefix: Option<String>,
    entries: Vec<(String, String)>,
}

impl MetricVector {
    /// Parses a vector string. Unknown keys are kept as extensions; the
    /// prefix, when present, is preserved verbatim.
    pub fn parse(text: &str) -> Result<MetricVector, VectorError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(VectorError::Empty);
        }
        let mut prefix = None;
        let mut entries: Vec<(String, String)> = Vec::new();
        for (idx, token) in text.split('/').enumerate() {
            if idx == 0 && (token.starts_with("CVSS:") || token.starts_with("RVSS:")) {
                prefix = Some(token.to_owned());
                continue;
            }
            let (key, value) = token
                .split_once(':')
                .ok_or_else(|| VectorError::MalformedToken {
                    token: token.to_owned(),
                })?;
            if key.is_empty() || value.is_empty() {
                return Err(VectorError::MalformedToken {
                    token: token.to_owned(),
                });
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(VectorError::DuplicateKey {
                    key: key.to_owned(),
                });
            }
            if let Some(legal) = legal_values(key) {
                if !legal.contains(&value) {
                    return Err(VectorError::IllegalValue {
                        metric: key.to_owned(),
                        value: value.to_owned(),
                    });
                }
            }
            entries.push((key.to_owned(), value.to_owned()));
        }
        if entries.is_empty() {
            return Err(VectorError::Empty);
        }
        Ok(MetricVector { prefix, entries })
    }

    /// Renders the vector back to its wire form; inverse of [`parse`].
    ///
    /// [`parse`]: MetricVector::parse
    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(prefix) = &self.prefix {
            out.push_str(prefix);
        }
        for (key, value) in &self.entries {
            if !out.is_empty() {
                out.push('/');
            }
            out.push_str(key);
            out.push(':');
            out.push_str(value);
        }
        out
    }

    pub fn prefix(&self) -> Option<&str> {
        self.prefix.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Recognized CVSS base metrics, in input order.
    pub fn metrics(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .filter(|(k, _)| BASE_METRICS.contains(&k.as_str()))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Unrecognized metrics, in input order.
    pub fn extensions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .filter(|(k, _)| !BASE_METRICS.contains(&k.as_str()))
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// True when all eight base metrics are present.
    pub fn has_complete_base(&self) -> bool {
        BASE_METRICS.iter().all(|m| self.get(m).is_some())
    }
}

/// CVSS v3.1 Roundup: smallest one-decimal value >= the input, with the
/// specification's fixed-point guard against float representation noise.
fn round_up(x: f64) -> f64 {
    let scaled = libm::round(x * 100_000.0) as i64;
    if scaled % 10_000 == 0 {
        scaled as f64 / 100_000.0
    } else {
        (scaled / 10_000 + 1) as f64 / 10.0
    }
}

fn impact_weight(value: &str) -> f64 {
    match value {
        "H" => 0.56,
        "L" => 0.22,
        _ => 0.0,
    }
}

/// CVSS v3.1 base equation. Requires all eight base metrics; extensions are
/// ignored. The result is on the one-decimal grid in [0, 10], and is 0.0
/// exactly when the impact sub-score is zero.
pub fn cvss_base_score(vector: &MetricVector) -> Result<f64, VectorError> {
    let metric = |name: &str| {
        vector.get(name).ok_or_else(|| VectorError::MissingMetric {
            metric: name.to_owned(),
        })
    };
    let av = match metric("AV")? {
        "N" => 0.85,
        "A" => 0.62,
        "L" => 0.55,
        _ => 0.2,
    };
    let ac = match metric("AC")? {
        "L" => 0.77,
        _ => 0.44,
    };
    let scope_changed = metric("S")? == "C";
    let pr = match (metric("PR")?, scope_changed) {
        ("N", _) => 0.85,
        ("L", false) => 0.62,
        ("L", true) => 0.68,
        ("H", false) => 0.27,
        _ => 0.50,
    };
    let ui = match metric("UI")? {
        "N" => 0.85,
        _ => 0.62,
    };
    let c = impact_weight(metric("C")?);
    let i = impact_weight(metric("I")?);
    let a = impact_weight(metric("A")?);

    let iss = 1.0 - (1.0 - c) * (1.0 - i) * (1.0 - a);
    let impact = if scope_changed {
        7.52 * (iss - 0.029) - 3.25 * libm::pow(iss - 0.02, 15.0)
    } else {
        6.42 * iss
    };
    if impact <= 0.0 {
        return Ok(0.0);
    }
    let exploitability = 8.22 * av * ac * pr * ui;
    let raw = if scope_changed {
        1.08 * (impact + exploitability)
    } else {
        impact + exploitability
    };
    Ok(round_up(if raw < 10.0 { raw } else { 10.0 }))
}

/// Qualitative severity scale, ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SeverityBucket {
    None,
    Low,
    Medium,
    High,
    Critical,
}

impl SeverityBucket {
    pub const ALL: [SeverityBucket; 5] = [
        SeverityBucket::None,
        SeverityBucket::Low,
        SeverityBucket::Medium,
        SeverityBucket::High,
        SeverityBucket::Critical,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SeverityBucket::None => "None",
            SeverityBucket::Low => "Low",
            SeverityBucket::Medium => "Medium",
            SeverityBucket::High => "High",
            SeverityBucket::Critical => "Critical",
        }
    }
}

/// A severity score slot: a number in [0, 10] or the unscored marker
/// (the literal string `None` in record files).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreValue {
    Unscored,
    Number(f64),
}

impl ScoreValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ScoreValue::Number(n) => Some(*n),
            ScoreValue::Unscored => None,
        }
    }

    /// Renders as a document value; integral numbers stay integers.
    pub fn to_value(&self) -> Value {
        match self {
            ScoreValue::Unscored => Value::str("None"),
            ScoreValue::Number(n) => number_to_value(*n),
        }
    }
}

pub(crate) fn number_to_value(n: f64) -> Value {
    if libm::trunc(n) == n && n.abs() < i64::MAX as f64 {
        Value::Int(n as i64)
    } else {
        Value::Float(n)
    }
}

/// How unscored records are treated when bucketing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Imputation {
    /// Unscored counts as Critical.
    Pessimistic,
    /// Unscored counts as Low.
    Optimistic,
    /// Unscored is an error.
    None,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BucketError {
    #[error("unscored value with no imputation mode")]
    UnscoredWithoutImputation,
    #[error("score {0} outside [0, 10]")]
    OutOfRange(f64),
}

/// Maps a score to its qualitative bucket. Numeric scores follow the CVSS
/// scale (0.0 None, up to 3.9 Low, up to 6.9 Medium, up to 8.9 High, else
/// Critical); unscored values follow the imputation mode.
pub fn bucket(score: ScoreValue, imputation: Imputation) -> Result<SeverityBucket, BucketError> {
    match score {
        ScoreValue::Unscored => match imputation {
            Imputation::Pessimistic => Ok(SeverityBucket::Critical),
            Imputation::Optimistic => Ok(SeverityBucket::Low),
            Imputation::None => Err(BucketError::UnscoredWithoutImputation),
        },
        ScoreValue::Number(s) => {
            if !(0.0..=10.0).contains(&s) {
                return Err(BucketError::OutOfRange(s));
            }
            Ok(if s == 0.0 {
                SeverityBucket::None
            } else if s < 4.0 {
                SeverityBucket::Low
            } else if s < 7.0 {
                SeverityBucket::Medium
            } else if s < 9.0 {
                SeverityBucket::High
            } else {
                SeverityBucket::Critical
            })
        }
    }
}

/// The record-level severity block.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityBlock {
    pub rvss_score: ScoreValue,
    pub rvss_vector: String,
    pub severity_description: String,
    pub cvss_score: Option<ScoreValue>,
    pub cvss_vector: Option<String>,
}

impl SeverityBlock {
    /// An unscored block, the shape new tickets usually start with.
    pub fn unscored() -> SeverityBlock {
        SeverityBlock {
            rvss_score: ScoreValue::Unscored,
            rvss_vector: "None".to_string(),
            severity_description: String::new(),
            cvss_score: None,
            cvss_vector: None,
        }
    }
}

const SEVERITY_FIELDS: [&str; 5] = [
    "rvss-score",
    "rvss-vector",
    "severity-description",
    "cvss-score",
    "cvss-vector",
];

fn score_field(
    map: &Doc,
    path: &str,
    name: &str,
    required: bool,
    violations: &mut Vec<Violation>,
) -> Option<ScoreValue> {
    let full = format!("{path}.{name}");
    match map.get(name) {
        None => {
            if required {
                violations.push(Violation::required(&full));
            }
            None
        }
        Some(Value::Str(s)) if s == "None" => Some(ScoreValue::Unscored),
        Some(Value::Str(s)) => {
            violations.push(Violation::new(
                &full,
                "regex",
                format!("string value must be \"None\", got {s:?}"),
            ));
            None
        }
        Some(v) => match v.as_number() {
            Some(n) if (0.0..=10.0).contains(&n) => Some(ScoreValue::Number(n)),
            Some(n) => {
                violations.push(Violation::new(
                    &full,
                    "range",
                    format!("score {n} outside [0, 10]"),
                ));
                None
            }
            None => {
                violations.push(Violation::type_mismatch(&full, "number or \"None\"", v));
                None
            }
        },
    }
}

fn text_field(
    map: &Doc,
    path: &str,
    name: &str,
    required: bool,
    violations: &mut Vec<Violation>,
) -> Option<String> {
    let full = format!("{path}.{name}");
    match map.get(name) {
        None => {
            if required {
                violations.push(Violation::required(&full));
            }
            None
        }
        Some(Value::Str(s)) => Some(s.clone()),
        Some(v) => {
            violations.push(Violation::type_mismatch(&full, "string", v));
            None
        }
    }
}

/// Validates a severity block document: required subfields, score ranges,
/// and agreement between a numeric `cvss-score` and its `cvss-vector`
/// (recomputed to one decimal). `path` prefixes the reported field paths.
pub fn validate_severity_block(map: &Doc, path: &str) -> ValidationReport {
    let mut violations = Vec::new();
    for key in map.keys() {
        if !SEVERITY_FIELDS.contains(&key) {
            violations.push(Violation::unknown_field(&format!("{path}.{key}")));
        }
    }
    score_field(map, path, "rvss-score", true, &mut violations);
    text_field(map, path, "rvss-vector", true, &mut violations);
    text_field(map, path, "severity-description", true, &mut violations);
    let cvss_score = score_field(map, path, "cvss-score", false, &mut violations);
    let cvss_vector = text_field(map, path, "cvss-vector", false, &mut violations);

    if let (Some(ScoreValue::Number(stored)), Some(vector_text)) = (cvss_score, cvss_vector) {
        if let Ok(vector) = MetricVector::parse(&vector_text) {
            if vector.has_complete_base() {
                let computed = cvss_base_score(&vector).expect("complete base vector scores");
                if libm::round(stored * 10.0) != libm::round(computed * 10.0) {
                    violations.push(Violation::new(
                        &format!("{path}.cvss-score"),
                        "consistency",
                        format!("stored score {stored} but vector computes to {computed}"),
                    ));
                }
            }
        }
    }
    ValidationReport::from_violations(violations)
}

/// Typed view of an already-validated severity block.
pub fn severity_block_view(map: &Doc) -> SeverityBlock {
    let score = |name: &str| match map.get(name) {
        Some(Value::Str(_)) => Some(ScoreValue::Unscored),
        Some(v) => v.as_number().map(ScoreValue::Number),
        None => None,
    };
    SeverityBlock {
        rvss_score: score("rvss-score").unwrap_or(ScoreValue::Unscored),
        rvss_vector: map
            .get("rvss-vector")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_owned(),
        severity_description: map
            .get("severity-description")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_owned(),
        cvss_score: score("cvss-score"),
        cvss_vector: map
            .get("cvss-vector")
            .and_then(Value::as_str)
            .map(str::to_owned),
    }
}

pub(crate) fn severity_block_to_doc(block: &SeverityBlock) -> Doc {
    let mut doc = Doc::new();
    doc.insert("rvss-score", block.rvss_score.to_value());
    doc.insert("rvss-vector", Value::str(&block.rvss_vector));
    doc.insert(
        "severity-description",
        Value::str(&block.severity_description),
    );
    if let Some(score) = &block.cvss_score {
        doc.insert("cvss-score", score.to_value());
    }
    if let Some(vector) = &block.cvss_vector {
        doc.insert("cvss-vector", Value::str(vector));
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc;

    #[test]
    fn parses_full_cvss_vector() {
        let v = MetricVector::parse("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H").unwrap();
        assert_eq!(v.prefix(), Some("CVSS:3.1"));
        assert_eq!(v.metrics().count(), 8);
        assert_eq!(v.extensions().count(), 0);
        assert!(v.has_complete_base());
    }

    #[test]
    fn unknown_keys_become_extensions() {
        let v = MetricVector::parse("AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H/H:U").unwrap();
        assert_eq!(v.metrics().count(), 8);
        let ext: alloc::vec::Vec<_> = v.extensions().collect();
        assert_eq!(ext, [("H", "U")]);
    }

    #[test]
    fn duplicate_key_rejected() {
        assert_eq!(
            MetricVector::parse("AV:N/AV:L"),
            Err(VectorError::DuplicateKey { key: "AV".into() })
        );
    }

    #[test]
    fn malformed_token_rejected() {
        assert!(matches!(
            MetricVector::parse("AV:N/AC"),
            Err(VectorError::MalformedToken { .. })
        ));
    }

    #[test]
    fn illegal_value_rejected() {
        assert!(matches!(
            MetricVector::parse("AV:X/AC:L"),
            Err(VectorError::IllegalValue { .. })
        ));
    }

    #[test]
    fn rvss_prefix_and_extensions_roundtrip() {
        let text = "RVSS:1.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H/H:E/Y:T";
        let v = MetricVector::parse(text).unwrap();
        assert_eq!(v.prefix(), Some("RVSS:1.0"));
        assert_eq!(v.extensions().count(), 2);
        assert_eq!(v.render(), text);
    }

    #[test]
    fn score_known_vectors() {
        let score = |s: &str| cvss_base_score(&MetricVector::parse(s).unwrap()).unwrap();
        assert_eq!(score("AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"), 9.8);
        assert_eq!(score("AV:N/AC:L/PR:L/UI:N/S:C/C:H/I:H/A:H"), 9.9);
        assert_eq!(score("AV:N/AC:L/PR:N/UI:N/S:C/C:H/I:H/A:H"), 10.0);
    }

    #[test]
    fn zero_impact_scores_zero() {
        let score = |s: &str| cvss_base_score(&MetricVector::parse(s).unwrap()).unwrap();
        assert_eq!(score("AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:N"), 0.0);
        assert_eq!(score("AV:P/AC:H/PR:H/UI:R/S:C/C:N/I:N/A:N"), 0.0);
    }

    #[test]
    fn missing_metric_is_error() {
        let v = MetricVector::parse("AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H").unwrap();
        assert_eq!(
            cvss_base_score(&v),
            Err(VectorError::MissingMetric { metric: "A".into() })
        );
    }

    #[test]
    fn buckets_follow_qualitative_scale() {
        let b = |s: f64| bucket(ScoreValue::Number(s), Imputation::None).unwrap();
        assert_eq!(b(0.0), SeverityBucket::None);
        assert_eq!(b(0.1), SeverityBucket::Low);
        assert_eq!(b(3.9), SeverityBucket::Low);
        assert_eq!(b(4.0), SeverityBucket::Medium);
        assert_eq!(b(6.9), SeverityBucket::Medium);
        assert_eq!(b(7.0), SeverityBucket::High);
        assert_eq!(b(8.9), SeverityBucket::High);
        assert_eq!(b(9.0), SeverityBucket::Critical);
        assert_eq!(b(9.8), SeverityBucket::Critical);
        assert_eq!(b(10.0), SeverityBucket::Critical);
    }

    #[test]
    fn unscored_imputation() {
        assert_eq!(
            bucket(ScoreValue::Unscored, Imputation::Pessimistic),
            Ok(SeverityBucket::Critical)
        );
        assert_eq!(
            bucket(ScoreValue::Unscored, Imputation::Optimistic),
            Ok(SeverityBucket::Low)
        );
        assert_eq!(
            bucket(ScoreValue::Unscored, Imputation::None),
            Err(BucketError::UnscoredWithoutImputation)
        );
    }

    #[test]
    fn out_of_range_score_rejected() {
        assert_eq!(
            bucket(ScoreValue::Number(10.1), Imputation::None),
            Err(BucketError::OutOfRange(10.1))
        );
    }

    #[test]
    fn bucket_order_is_total() {
        use SeverityBucket::*;
        assert!(None < Low && Low < Medium && Medium < High && High < Critical);
    }

    fn severity_doc(text: &str) -> Doc {
        doc::parse(text).unwrap()
    }

    #[test]
    fn validates_consistent_block() {
        let d = severity_doc(
            "rvss-score: None\nrvss-vector: None\nseverity-description: remote takeover\n\
             cvss-score: 9.8\ncvss-vector: 'CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H'\n",
        );
        let report = validate_severity_block(&d, "severity");
        assert!(report.ok, "{:?}", report.violations);
    }

    #[test]
    fn flags_inconsistent_cvss_score() {
        let d = severity_doc(
            "rvss-score: None\nrvss-vector: None\nseverity-description: x\n\
             cvss-score: 5.0\ncvss-vector: 'CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H'\n",
        );
        let report = validate_severity_block(&d, "severity");
        assert!(report
            .violations
            .iter()
            .any(|v| v.field == "severity.cvss-score" && v.rule == "consistency"));
    }

    #[test]
    fn flags_out_of_range_rvss_score() {
        let d = severity_doc("rvss-score: 11\nrvss-vector: None\nseverity-description: x\n");
        let report = validate_severity_block(&d, "severity");
        assert!(report
            .violations
            .iter()
            .any(|v| v.field == "severity.rvss-score" && v.rule == "range"));
    }

    #[test]
    fn accepts_none_scores() {
        let d = severity_doc("rvss-score: None\nrvss-vector: None\nseverity-description: x\n");
        assert!(validate_severity_block(&d, "severity").ok);
    }

    #[test]
    fn missing_required_subfields_reported() {
        let report = validate_severity_block(&Doc::new(), "severity");
        let missing: alloc::vec::Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.rule == "required")
            .map(|v| v.field.as_str())
            .collect();
        assert_eq!(
            missing,
            [
                "severity.rvss-score",
                "severity.rvss-vector",
                "severity.severity-description"
            ]
        );
    }
}
