//! The flaw record schema: normalization, defaults, validation, and the
//! flaw-type taxonomy.
//!
//! A record moves through a three-stage pipeline before it is accepted:
//!
//! 1. [`normalize_record`] — legacy key renames (`bug` -> `flaw`,
//!    `fix` -> `mitigation`).
//! 2. [`apply_defaults`] — inserts every defaulted field that is absent;
//!    present fields are never touched.
//! 3. [`validate_record`] — checks every rule and reports all violations,
//!    not just the first.
//!
//! The pipeline is deterministic and idempotent: running it twice yields a
//! byte-identical document and an identical report.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::disclosure::Date;
use crate::doc::{Doc, Value};
use crate::severity::{self, SeverityBlock};

/// Flaw classification. `Bug` and `Weakness` are distinct values but mean
/// the same thing taxonomically; compare them with [`FlawType::taxonomy_eq`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlawType {
    Bug,
    Weakness,
    Vulnerability,
    Exposure,
}

impl FlawType {
    pub const ALL: [FlawType; 4] = [
        FlawType::Bug,
        FlawType::Weakness,
        FlawType::Vulnerability,
        FlawType::Exposure,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FlawType::Bug => "bug",
            FlawType::Weakness => "weakness",
            FlawType::Vulnerability => "vulnerability",
            FlawType::Exposure => "exposure",
        }
    }

    pub fn from_name(s: &str) -> Option<FlawType> {
        match s {
            "bug" => Some(FlawType::Bug),
            "weakness" => Some(FlawType::Weakness),
            "vulnerability" => Some(FlawType::Vulnerability),
            "exposure" => Some(FlawType::Exposure),
            _ => None,
        }
    }

    /// Equality under the taxonomy, where bug and weakness are
    /// interchangeable terms for the same class of flaw.
    pub fn taxonomy_eq(&self, other: &FlawType) -> bool {
        let rank = |t: &FlawType| match t {
            FlawType::Bug | FlawType::Weakness => 0,
            FlawType::Vulnerability => 1,
            FlawType::Exposure => 2,
        };
        rank(self) == rank(other)
    }
}

/// Classifies a flaw from what is known about it: configuration mistakes
/// are exposures, confirmed-exploitable flaws are vulnerabilities, and
/// everything else is a bug (potentially exploitable, unconfirmed).
pub fn taxonomy_classify(has_exploit: bool, is_config_error: bool) -> FlawType {
    if is_config_error {
        FlawType::Exposure
    } else if has_exploit {
        FlawType::Vulnerability
    } else {
        FlawType::Bug
    }
}

// ---- allowed value sets (schema literals) ----

pub const FLAW_TYPES: [&str; 4] = ["bug", "weakness", "vulnerability", "exposure"];

pub const PHASES: [&str; 9] = [
    "programming-time",
    "build-time",
    "compile-time",
    "deployment-time",
    "runtime",
    "runtime-initialization",
    "runtime-operation",
    "testing",
    "unknown",
];

pub const ARCHITECTURAL_LOCATIONS: [&str; 7] = [
    "application-specific code",
    "application-specific",
    "platform-code",
    "platform code",
    "ROS-specific",
    "third-party",
    "N/A",
];

pub const DETECTION_METHODS: [&str; 9] = [
    "build system",
    "compiler",
    "assertions",
    "runtime detection",
    "runtime crash",
    "testing violation",
    "testing static",
    "testing dynamic",
    "N/A",
];

pub const REPORTER_RELATIONSHIPS: [&str; 6] = [
    "guest user",
    "contributor",
    "member developer",
    "automatic",
    "security researcher",
    "N/A",
];

pub const LANGUAGES: [&str; 21] = [
    "Python",
    "python",
    "cmake",
    "CMake",
    "C",
    "C++",
    "package.xml",
    "launch XML",
    "URScript",
    "shell",
    "msg",
    "srv",
    "xacro",
    "urdf",
    "None",
    "rosparam YAML",
    "XML",
    "ASCII STL",
    "N/A",
    "YAML",
    "Package XML",
];

pub const TITLE_MAX_LENGTH: usize = 100;

/// `^CVE-[0-9]*-[0-9]*$|^None$` — hand-rolled, equivalence-tested against
/// a regex engine.
pub fn cve_matches(s: &str) -> bool {
    if s == "None" {
        return true;
    }
    let Some(rest) = s.strip_prefix("CVE-") else {
        return false;
    };
    let parts: Vec<&str> = rest.split('-').collect();
    parts.len() == 2 && parts.iter().all(|p| p.bytes().all(|b| b.is_ascii_digit()))
}

/// `^CWE-[0-9]*.*$|^None$` — the digits and tail may both be empty, so any
/// `CWE-` prefix matches as long as `.` can consume the tail (no newline).
pub fn cwe_matches(s: &str) -> bool {
    if s == "None" {
        return true;
    }
    match s.strip_prefix("CWE-") {
        Some(rest) => !rest.contains('\n'),
        None => false,
    }
}

/// Advisory prefix rule for `flaw.subsystem`; failures are warnings, not
/// violations.
pub fn subsystem_matches_policy(s: &str) -> bool {
    s == "N/A"
        || ["sensing", "actuation", "communication", "cognition", "UI", "power"]
            .iter()
            .any(|prefix| s.starts_with(prefix))
}

// ---- reports ----

/// One broken rule: where, which rule, and a human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: &str, rule: &str, message: String) -> Violation {
        Violation {
            field: field.to_owned(),
            rule: rule.to_owned(),
            message,
        }
    }

    pub fn required(field: &str) -> Violation {
        Violation::new(field, "required", "required field is missing".to_string())
    }

    pub fn type_mismatch(field: &str, expected: &str, got: &Value) -> Violation {
        Violation::new(
            field,
            "type",
            format!("expected {expected}, got {}", got.kind()),
        )
    }

    pub fn not_allowed(field: &str, got: &str, allowed: &[&str]) -> Violation {
        Violation::new(
            field,
            "allowed",
            format!("value {got:?} not in allowed set {allowed:?}"),
        )
    }

    pub fn unknown_field(field: &str) -> Violation {
        Violation::new(field, "unknown", "field is not part of the schema".to_string())
    }
}

/// Advisory finding that does not affect validity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub field: String,
    pub message: String,
}

/// Outcome of validating one record. `ok` holds exactly when `violations`
/// is empty; warnings are advisory and never affect `ok`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
    pub applied_defaults: Vec<String>,
}

impl ValidationReport {
    pub fn from_violations(violations: Vec<Violation>) -> ValidationReport {
        ValidationReport {
            ok: violations.is_empty(),
            violations,
            warnings: Vec::new(),
            applied_defaults: Vec::new(),
        }
    }
}

// ---- normalize ----

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("both {from:?} and {to:?} are present; cannot rename")]
    RenameConflict { from: String, to: String },
}

const RENAMES: [(&str, &str); 2] = [("bug", "flaw"), ("fix", "mitigation")];

/// Applies the schema's legacy key renames. Idempotent; no other keys are
/// touched. Fails when both the old and the new key are present.
pub fn normalize_record(mut doc: Doc) -> Result<Doc, NormalizeError> {
    for (from, to) in RENAMES {
        if doc.contains_key(from) {
            if doc.contains_key(to) {
                return Err(NormalizeError::RenameConflict {
                    from: from.to_owned(),
                    to: to.to_owned(),
                });
            }
            doc.rename(from, to);
        }
    }
    Ok(doc)
}

// ---- defaults ----

fn empty_str() -> Value {
    Value::Str(String::new())
}

/// Top-level default setters, in schema order.
fn top_level_defaults() -> Vec<(&'static str, Value)> {
    alloc::vec![
        ("id", Value::Int(0)),
        ("type", Value::str("bug")),
        ("cwe", Value::str("None")),
        ("cve", Value::str("None")),
        ("keywords", empty_str()),
        ("system", empty_str()),
        ("vendor", Value::Null),
        ("links", Value::str("None")),
    ]
}

fn flaw_defaults() -> Vec<(&'static str, Value)> {
    alloc::vec![
        ("phase", Value::str("unknown")),
        ("specificity", Value::str("N/A")),
        ("architectural-location", Value::str("N/A")),
        ("application", Value::str("N/A")),
        ("subsystem", Value::str("N/A")),
        ("package", Value::str("N/A")),
        ("languages", Value::str("None")),
        ("date-detected", empty_str()),
        ("detected-by", empty_str()),
        ("detected-by-method", Value::str("N/A")),
        ("date-reported", empty_str()),
        ("reported-by", empty_str()),
        ("reported-by-relationship", Value::str("N/A")),
        ("issue", empty_str()),
        ("reproducibility", empty_str()),
        ("trace", empty_str()),
        ("reproduction", empty_str()),
        ("reproduction-image", empty_str()),
    ]
}

fn exploitation_defaults() -> Vec<(&'static str, Value)> {
    alloc::vec![
        ("description", empty_str()),
        ("exploitation-image", empty_str()),
        ("exploitation-vector", empty_str()),
    ]
}

fn mitigation_defaults() -> Vec<(&'static str, Value)> {
    alloc::vec![("description", empty_str()), ("pull-request", empty_str())]
}

/// A defaulted document plus the paths that were filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Defaulted {
    pub doc: Doc,
    pub applied: Vec<String>,
}

fn fill_block(
    doc: &mut Doc,
    block: &str,
    defaults: &[(&'static str, Value)],
    applied: &mut Vec<String>,
) {
    if let Some(Value::Map(map)) = doc.get_mut(block) {
        for (key, default) in defaults {
            if !map.contains_key(key) {
                map.insert(key, default.clone());
                applied.push(format!("{block}.{key}"));
            }
        }
    }
}

/// Inserts every schema default that is absent. Present fields are never
/// removed or overwritten; missing fields are appended in schema order, so
/// the operation is idempotent. The `exploitation` block itself is created
/// when absent (it is the only block with its own default); `flaw`,
/// `mitigation`, and `severity` are left for validation to require.
pub fn apply_defaults(mut doc: Doc) -> Defaulted {
    let mut applied = Vec::new();
    for (key, default) in top_level_defaults() {
        if !doc.contains_key(key) {
            doc.insert(key, default);
            applied.push(key.to_owned());
        }
    }
    if !doc.contains_key("exploitation") {
        doc.insert("exploitation", Value::Map(Doc::new()));
        applied.push("exploitation".to_owned());
    }
    fill_block(&mut doc, "flaw", &flaw_defaults(), &mut applied);
    fill_block(&mut doc, "exploitation", &exploitation_defaults(), &mut applied);
    fill_block(&mut doc, "mitigation", &mitigation_defaults(), &mut applied);
    Defaulted { doc, applied }
}

// ---- validate ----

const TOP_LEVEL_FIELDS: [&str; 14] = [
    "id",
    "title",
    "type",
    "description",
    "cwe",
    "cve",
    "keywords",
    "system",
    "vendor",
    "severity",
    "links",
    "flaw",
    "exploitation",
    "mitigation",
];

const FLAW_FIELDS: [&str; 18] = [
    "phase",
    "specificity",
    "architectural-location",
    "application",
    "subsystem",
    "package",
    "languages",
    "date-detected",
    "detected-by",
    "detected-by-method",
    "date-reported",
    "reported-by",
    "reported-by-relationship",
    "issue",
    "reproducibility",
    "trace",
    "reproduction",
    "reproduction-image",
];

const EXPLOITATION_FIELDS: [&str; 3] = ["description", "exploitation-image", "exploitation-vector"];

const MITIGATION_FIELDS: [&str; 2] = ["description", "pull-request"];

struct Checker<'a> {
    doc: &'a Doc,
    path: &'a str,
    violations: Vec<Violation>,
    warnings: Vec<Warning>,
}

impl<'a> Checker<'a> {
    fn new(doc: &'a Doc, path: &'a str) -> Checker<'a> {
        Checker {
            doc,
            path,
            violations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn full(&self, name: &str) -> String {
        if self.path.is_empty() {
            name.to_owned()
        } else {
            format!("{}.{name}", self.path)
        }
    }

    fn reject_unknown(&mut self, known: &[&str]) {
        for key in self.doc.keys() {
            if !known.contains(&key) {
                let path = self.full(key);
                self.violations.push(Violation::unknown_field(&path));
            }
        }
    }

    /// Required string field; returns it when present and well-typed.
    fn string(&mut self, name: &str, required: bool) -> Option<&'a str> {
        match self.doc.get(name) {
            None => {
                if required {
                    self.violations.push(Violation::required(&self.full(name)));
                }
                None
            }
            Some(Value::Str(s)) => Some(s),
            Some(v) => {
                self.violations
                    .push(Violation::type_mismatch(&self.full(name), "string", v));
                None
            }
        }
    }

    fn string_in(&mut self, name: &str, required: bool, allowed: &[&str]) {
        if let Some(s) = self.string(name, required) {
            if !allowed.contains(&s) {
                self.violations
                    .push(Violation::not_allowed(&self.full(name), s, allowed));
            }
        }
    }

    /// String or list of strings; `allowed` restricts every element.
    fn string_or_list(&mut self, name: &str, required: bool, allowed: Option<&[&str]>) {
        let check_one = |value: &str, field: &str, violations: &mut Vec<Violation>| {
            if let Some(allowed) = allowed {
                if !allowed.contains(&value) {
                    violations.push(Violation::not_allowed(field, value, allowed));
                }
            }
        };
        match self.doc.get(name) {
            None => {
                if required {
                    self.violations.push(Violation::required(&self.full(name)));
                }
            }
            Some(Value::Str(s)) => check_one(s, &self.full(name), &mut self.violations),
            Some(Value::List(items)) => {
                for (i, item) in items.iter().enumerate() {
                    let field = format!("{}[{i}]", self.full(name));
                    match item {
                        Value::Str(s) => check_one(s, &field, &mut self.violations),
                        v => self
                            .violations
                            .push(Violation::type_mismatch(&field, "string", v)),
                    }
                }
            }
            Some(v) => self.violations.push(Violation::type_mismatch(
                &self.full(name),
                "string or list of strings",
                v,
            )),
        }
    }

    /// Empty string or an ISO calendar date (YYYY-MM-DD).
    fn date_or_empty(&mut self, name: &str) {
        if let Some(s) = self.string(name, true) {
            if !s.is_empty() && Date::parse_iso(s).is_err() {
                self.violations.push(Violation::new(
                    &self.full(name),
                    "date",
                    format!("{s:?} is not an ISO calendar date (YYYY-MM-DD)"),
                ));
            }
        }
    }
}

/// Checks every schema rule over a normalized, defaulted document and
/// reports all violations. Violations are data, not errors: the function
/// is total. The `applied_defaults` slot is filled by [`process_record`].
pub fn validate_record(doc: &Doc) -> ValidationReport {
    let mut c = Checker::new(doc, "");
    c.reject_unknown(&TOP_LEVEL_FIELDS);

    match doc.get("id") {
        None => c.violations.push(Violation::required("id")),
        Some(Value::Int(i)) => {
            if *i < 0 {
                c.violations.push(Violation::new(
                    "id",
                    "range",
                    format!("id {i} is negative"),
                ));
            }
        }
        Some(v) => c
            .violations
            .push(Violation::type_mismatch("id", "non-negative integer", v)),
    }

    if let Some(title) = c.string("title", true) {
        let length = title.chars().count();
        if length > TITLE_MAX_LENGTH {
            c.violations.push(Violation::new(
                "title",
                "maxlength",
                format!("title is {length} characters (max {TITLE_MAX_LENGTH})"),
            ));
        }
    }

    c.string_in("type", true, &FLAW_TYPES);
    c.string("description", true);

    if let Some(cwe) = c.string("cwe", true) {
        if !cwe_matches(cwe) {
            c.violations.push(Violation::new(
                "cwe",
                "regex",
                format!("{cwe:?} does not match ^CWE-[0-9]*.*$|^None$"),
            ));
        }
    }
    if let Some(cve) = c.string("cve", true) {
        if !cve_matches(cve) {
            c.violations.push(Violation::new(
                "cve",
                "regex",
                format!("{cve:?} does not match ^CVE-[0-9]*-[0-9]*$|^None$"),
            ));
        }
    }

    c.string_or_list("keywords", true, None);
    c.string("system", true);

    match doc.get("vendor") {
        None => c.violations.push(Violation::required("vendor")),
        Some(Value::Str(_)) | Some(Value::Null) => {}
        Some(v) => c
            .violations
            .push(Violation::type_mismatch("vendor", "string or null", v)),
    }

    match doc.get("severity") {
        None => c.violations.push(Violation::required("severity")),
        Some(Value::Map(map)) => {
            let severity_report = severity::validate_severity_block(map, "severity");
            c.violations.extend(severity_report.violations);
        }
        Some(v) => c
            .violations
            .push(Violation::type_mismatch("severity", "map", v)),
    }

    // `links` is the one optional top-level field.
    c.string_or_list("links", false, None);

    match doc.get("flaw") {
        None => c.violations.push(Violation::required("flaw")),
        Some(Value::Map(map)) => validate_flaw_block(map, &mut c),
        Some(v) => c.violations.push(Violation::type_mismatch("flaw", "map", v)),
    }

    match doc.get("exploitation") {
        None => c.violations.push(Violation::required("exploitation")),
        Some(Value::Map(map)) => {
            let mut sub = Checker::new(map, "exploitation");
            sub.reject_unknown(&EXPLOITATION_FIELDS);
            sub.string("description", true);
            sub.string("exploitation-image", true);
            sub.string("exploitation-vector", true);
            c.violations.extend(sub.violations);
        }
        Some(v) => c
            .violations
            .push(Violation::type_mismatch("exploitation", "map", v)),
    }

    match doc.get("mitigation") {
        None => c.violations.push(Violation::required("mitigation")),
        Some(Value::Map(map)) => {
            let mut sub = Checker::new(map, "mitigation");
            sub.reject_unknown(&MITIGATION_FIELDS);
            sub.string("description", true);
            match map.get("pull-request") {
                None | Some(Value::Str(_)) | Some(Value::Int(_)) | Some(Value::Float(_)) => {}
                Some(v) => c.violations.push(Violation::type_mismatch(
                    "mitigation.pull-request",
                    "string or number",
                    v,
                )),
            }
            c.violations.extend(sub.violations);
        }
        Some(v) => c
            .violations
            .push(Violation::type_mismatch("mitigation", "map", v)),
    }

    let mut report = ValidationReport::from_violations(c.violations);
    report.warnings = c.warnings;
    report
}

fn validate_flaw_block(map: &Doc, parent: &mut Checker<'_>) {
    let mut c = Checker::new(map, "flaw");
    c.reject_unknown(&FLAW_FIELDS);
    c.string_in("phase", true, &PHASES);
    c.string("specificity", true);
    c.string_in("architectural-location", true, &ARCHITECTURAL_LOCATIONS);
    c.string("application", true);
    if let Some(subsystem) = c.string("subsystem", true) {
        if !subsystem_matches_policy(subsystem) {
            c.warnings.push(Warning {
                field: "flaw.subsystem".to_owned(),
                message: format!(
                    "{subsystem:?} does not follow the sensing|actuation|communication|cognition|UI|power naming policy"
                ),
            });
        }
    }
    c.string_or_list("package", false, None);
    c.string_or_list("languages", true, Some(&LANGUAGES));
    c.date_or_empty("date-detected");
    c.string("detected-by", true);
    c.string_in("detected-by-method", true, &DETECTION_METHODS);
    c.date_or_empty("date-reported");
    c.string("reported-by", true);
    c.string_in("reported-by-relationship", true, &REPORTER_RELATIONSHIPS);
    c.string("issue", false);
    c.string("reproducibility", true);
    c.string("trace", true);
    c.string("reproduction", true);
    c.string("reproduction-image", true);
    parent.violations.extend(c.violations);
    parent.warnings.extend(c.warnings);
}

/// Outcome of the full pipeline over one raw document.
#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub doc: Doc,
    pub report: ValidationReport,
}

/// Runs normalize -> defaults -> validate and threads the applied-defaults
/// trace into the report.
pub fn process_record(raw: Doc) -> Result<Processed, NormalizeError> {
    let normalized = normalize_record(raw)?;
    let Defaulted { doc, applied } = apply_defaults(normalized);
    let mut report = validate_record(&doc);
    report.applied_defaults = applied;
    Ok(Processed { doc, report })
}

// ---- typed record ----

/// A field that holds either one text value or a list of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextOrList {
    Text(String),
    List(Vec<String>),
}

impl TextOrList {
    pub fn empty() -> TextOrList {
        TextOrList::Text(String::new())
    }

    /// All non-empty text entries, one for `Text`, each for `List`.
    pub fn items(&self) -> Vec<&str> {
        match self {
            TextOrList::Text(s) => {
                if s.is_empty() {
                    Vec::new()
                } else {
                    alloc::vec![s.as_str()]
                }
            }
            TextOrList::List(items) => items.iter().map(String::as_str).collect(),
        }
    }

    fn from_value(value: &Value) -> TextOrList {
        match value {
            Value::Str(s) => TextOrList::Text(s.clone()),
            Value::List(items) => TextOrList::List(
                items
                    .iter()
                    .map(|v| v.as_str().unwrap_or_default().to_owned())
                    .collect(),
            ),
            _ => TextOrList::empty(),
        }
    }

    fn to_value(&self) -> Value {
        match self {
            TextOrList::Text(s) => Value::str(s),
            TextOrList::List(items) => {
                Value::List(items.iter().map(|s| Value::str(s)).collect())
            }
        }
    }
}

/// The flaw-context block: where and how the flaw lives and was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlawContext {
    pub phase: String,
    pub specificity: String,
    pub architectural_location: String,
    pub application: String,
    pub subsystem: String,
    pub package: TextOrList,
    pub languages: TextOrList,
    pub date_detected: String,
    pub detected_by: String,
    pub detected_by_method: String,
    pub date_reported: String,
    pub reported_by: String,
    pub reported_by_relationship: String,
    pub issue: String,
    pub reproducibility: String,
    pub trace: String,
    pub reproduction: String,
    pub reproduction_image: String,
}

impl Default for FlawContext {
    fn default() -> FlawContext {
        FlawContext {
            phase: "unknown".to_string(),
            specificity: "N/A".to_string(),
            architectural_location: "N/A".to_string(),
            application: "N/A".to_string(),
            subsystem: "N/A".to_string(),
            package: TextOrList::Text("N/A".to_string()),
            languages: TextOrList::Text("None".to_string()),
            date_detected: String::new(),
            detected_by: String::new(),
            detected_by_method: "N/A".to_string(),
            date_reported: String::new(),
            reported_by: String::new(),
            reported_by_relationship: "N/A".to_string(),
            issue: String::new(),
            reproducibility: String::new(),
            trace: String::new(),
            reproduction: String::new(),
            reproduction_image: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Exploitation {
    pub description: String,
    pub exploitation_image: String,
    pub exploitation_vector: String,
}

/// A pull request reference: free text or a bare number.
#[derive(Debug, Clone, PartialEq)]
pub enum PullRequest {
    Text(String),
    Number(f64),
}

impl Default for PullRequest {
    fn default() -> PullRequest {
        PullRequest::Text(String::new())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mitigation {
    pub description: String,
    pub pull_request: PullRequest,
}

/// One database ticket, fully typed. Build it from a document that passed
/// [`validate_record`]; every schema field is representable, so converting
/// to a document and back is lossless.
#[derive(Debug, Clone, PartialEq)]
pub struct FlawRecord {
    pub id: u64,
    pub title: String,
    pub flaw_type: FlawType,
    pub description: String,
    pub cwe: String,
    pub cve: String,
    pub keywords: TextOrList,
    pub system: String,
    pub vendor: Option<String>,
    pub severity: SeverityBlock,
    pub links: TextOrList,
    pub flaw: FlawContext,
    pub exploitation: Exploitation,
    pub mitigation: Mitigation,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("document does not satisfy the record schema at {field}")]
pub struct RecordShapeError {
    pub field: String,
}

fn require_str(doc: &Doc, name: &str) -> Result<String, RecordShapeError> {
    doc.get(name)
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or(RecordShapeError {
            field: name.to_owned(),
        })
}

impl FlawRecord {
    /// Typed view of a validated document.
    pub fn from_doc(doc: &Doc) -> Result<FlawRecord, RecordShapeError> {
        let shape = |field: &str| RecordShapeError {
            field: field.to_owned(),
        };
        let id = doc
            .get("id")
            .and_then(Value::as_int)
            .filter(|i| *i >= 0)
            .ok_or_else(|| shape("id"))? as u64;
        let flaw_type = FlawType::from_name(&require_str(doc, "type")?)
            .ok_or_else(|| shape("type"))?;
        let vendor = match doc.get("vendor") {
            Some(Value::Null) | None => None,
            Some(Value::Str(s)) => Some(s.clone()),
            Some(_) => return Err(shape("vendor")),
        };
        let severity_map = doc
            .get("severity")
            .and_then(Value::as_map)
            .ok_or_else(|| shape("severity"))?;
        let flaw_map = doc
            .get("flaw")
            .and_then(Value::as_map)
            .ok_or_else(|| shape("flaw"))?;
        let exploitation_map = doc
            .get("exploitation")
            .and_then(Value::as_map)
            .ok_or_else(|| shape("exploitation"))?;
        let mitigation_map = doc
            .get("mitigation")
            .and_then(Value::as_map)
            .ok_or_else(|| shape("mitigation"))?;

        let block_str = |map: &Doc, block: &str, name: &str| -> Result<String, RecordShapeError> {
            map.get(name)
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| shape(&format!("{block}.{name}")))
        };

        Ok(FlawRecord {
            id,
            title: require_str(doc, "title")?,
            flaw_type,
            description: require_str(doc, "description")?,
            cwe: require_str(doc, "cwe")?,
            cve: require_str(doc, "cve")?,
            keywords: TextOrList::from_value(doc.get("keywords").ok_or_else(|| shape("keywords"))?),
            system: require_str(doc, "system")?,
            vendor,
            severity: severity::severity_block_view(severity_map),
            links: doc
                .get("links")
                .map(TextOrList::from_value)
                .unwrap_or_else(|| TextOrList::Text("None".to_string())),
            flaw: FlawContext {
                phase: block_str(flaw_map, "flaw", "phase")?,
                specificity: block_str(flaw_map, "flaw", "specificity")?,
                architectural_location: block_str(flaw_map, "flaw", "architectural-location")?,
                application: block_str(flaw_map, "flaw", "application")?,
                subsystem: block_str(flaw_map, "flaw", "subsystem")?,
                package: flaw_map
                    .get("package")
                    .map(TextOrList::from_value)
                    .unwrap_or_else(|| TextOrList::Text("N/A".to_string())),
                languages: flaw_map
                    .get("languages")
                    .map(TextOrList::from_value)
                    .ok_or_else(|| shape("flaw.languages"))?,
                date_detected: block_str(flaw_map, "flaw", "date-detected")?,
                detected_by: block_str(flaw_map, "flaw", "detected-by")?,
                detected_by_method: block_str(flaw_map, "flaw", "detected-by-method")?,
                date_reported: block_str(flaw_map, "flaw", "date-reported")?,
                reported_by: block_str(flaw_map, "flaw", "reported-by")?,
                reported_by_relationship: block_str(flaw_map, "flaw", "reported-by-relationship")?,
                issue: flaw_map
                    .get("issue")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_owned(),
                reproducibility: block_str(flaw_map, "flaw", "reproducibility")?,
                trace: block_str(flaw_map, "flaw", "trace")?,
                reproduction: block_str(flaw_map, "flaw", "reproduction")?,
                reproduction_image: block_str(flaw_map, "flaw", "reproduction-image")?,
            },
            exploitation: Exploitation {
                description: block_str(exploitation_map, "exploitation", "description")?,
                exploitation_image: block_str(exploitation_map, "exploitation", "exploitation-image")?,
                exploitation_vector: block_str(
                    exploitation_map,
                    "exploitation",
                    "exploitation-vector",
                )?,
            },
            mitigation: Mitigation {
                description: block_str(mitigation_map, "mitigation", "description")?,
                pull_request: match mitigation_map.get("pull-request") {
                    Some(Value::Int(i)) => PullRequest::Number(*i as f64),
                    Some(Value::Float(f)) => PullRequest::Number(*f),
                    Some(Value::Str(s)) => PullRequest::Text(s.clone()),
                    _ => PullRequest::default(),
                },
            },
        })
    }

    /// Renders back to a document in canonical schema field order.
    pub fn to_doc(&self) -> Doc {
        let mut doc = Doc::new();
        doc.insert("id", Value::Int(self.id as i64));
        doc.insert("title", Value::str(&self.title));
        doc.insert("type", Value::str(self.flaw_type.as_str()));
        doc.insert("description", Value::str(&self.description));
        doc.insert("cwe", Value::str(&self.cwe));
        doc.insert("cve", Value::str(&self.cve));
        doc.insert("keywords", self.keywords.to_value());
        doc.insert("system", Value::str(&self.system));
        doc.insert(
            "vendor",
            match &self.vendor {
                Some(v) => Value::str(v),
                None => Value::Null,
            },
        );
        doc.insert(
            "severity",
            Value::Map(severity::severity_block_to_doc(&self.severity)),
        );
        doc.insert("links", self.links.to_value());

        let mut flaw = Doc::new();
        flaw.insert("phase", Value::str(&self.flaw.phase));
        flaw.insert("specificity", Value::str(&self.flaw.specificity));
        flaw.insert(
            "architectural-location",
            Value::str(&self.flaw.architectural_location),
        );
        flaw.insert("application", Value::str(&self.flaw.application));
        flaw.insert("subsystem", Value::str(&self.flaw.subsystem));
        flaw.insert("package", self.flaw.package.to_value());
        flaw.insert("languages", self.flaw.languages.to_value());
        flaw.insert("date-detected", Value::str(&self.flaw.date_detected));
        flaw.insert("detected-by", Value::str(&self.flaw.detected_by));
        flaw.insert(
            "detected-by-method",
            Value::str(&self.flaw.detected_by_method),
        );
        flaw.insert("date-reported", Value::str(&self.flaw.date_reported));
        flaw.insert("reported-by", Value::str(&self.flaw.reported_by));
        flaw.insert(
            "reported-by-relationship",
            Value::str(&self.flaw.reported_by_relationship),
        );
        flaw.insert("issue", Value::str(&self.flaw.issue));
        flaw.insert("reproducibility", Value::str(&self.flaw.reproducibility));
        flaw.insert("trace", Value::str(&self.flaw.trace));
        flaw.insert("reproduction", Value::str(&self.flaw.reproduction));
        flaw.insert(
            "reproduction-image",
            Value::str(&self.flaw.reproduction_image),
        );
        doc.insert("flaw", Value::Map(flaw));

        let mut exploitation = Doc::new();
        exploitation.insert("description", Value::str(&self.exploitation.description));
        exploitation.insert(
            "exploitation-image",
            Value::str(&self.exploitation.exploitation_image),
        );
        exploitation.insert(
            "exploitation-vector",
            Value::str(&self.exploitation.exploitation_vector),
        );
        doc.insert("exploitation", Value::Map(exploitation));

        let mut mitigation = Doc::new();
        mitigation.insert("description", Value::str(&self.mitigation.description));
        mitigation.insert(
            "pull-request",
            match &self.mitigation.pull_request {
                PullRequest::Text(s) => Value::str(s),
                PullRequest::Number(n) => severity::number_to_value(*n),
            },
        );
        doc.insert("mitigation", Value::Map(mitigation));
        doc
    }
}
