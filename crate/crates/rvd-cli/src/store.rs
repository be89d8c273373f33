//! Filesystem-backed corpus: one record file per ticket under
//! `<root>/records/`, plus flat text files for labels, disclosure cases,
//! the dedup label log, and the trained model.
//!
//! Reads need no coordination. Mutations go through [`CorpusLock`], an
//! exclusive lock file at the corpus root; holding the lock is proven by
//! passing it to the mutating functions. Record files are written to a
//! temporary name and renamed into place, so a crash mid-write never
//! corrupts an existing corpus.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rvd_core::dedup::{self, DedupModel, LabeledPair};
use rvd_core::disclosure::{self, DisclosureCase};
use rvd_core::doc::{self, Doc};
use rvd_core::record::{
    self, FlawRecord, NormalizeError, ValidationReport, Violation,
};

pub const RECORDS_DIR: &str = "records";
pub const LABELS_FILE: &str = "labels.txt";
pub const CASES_FILE: &str = "cases.txt";
pub const JOURNAL_FILE: &str = "journal.txt";
pub const MODEL_FILE: &str = "dedup-model.txt";
pub const LABEL_LOG_FILE: &str = "dedup-labels.txt";
pub const REPORT_FILE: &str = "README.md";
pub const LOCK_FILE: &str = ".lock";

/// Label attached to every newly added record until a maintainer triages it.
pub const TRIAGE_LABEL: &str = "triage";
/// Label attached by `dedup apply` to non-canonical cluster members.
pub const DUPLICATE_LABEL: &str = "duplicate";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corpus root {0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("duplicate id {id}: {first} and {second}")]
    DuplicateId {
        id: u64,
        first: String,
        second: String,
    },
    #[error("{path}:{line}: malformed label line (expected `id:label`)")]
    LabelFormat { path: PathBuf, line: usize },
    #[error("{path}:{line}: {message}")]
    CaseFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    ModelFormat { path: PathBuf, message: String },
    #[error("another writer holds the corpus lock at {0} (remove it if stale)")]
    Locked(PathBuf),
}

fn io_err(path: &Path, source: io::Error) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Exclusive writer lock; the file is removed on drop.
#[derive(Debug)]
pub struct CorpusLock {
    path: PathBuf,
}

impl CorpusLock {
    pub fn acquire(root: &Path) -> Result<CorpusLock, StoreError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let path = root.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(CorpusLock { path }),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(StoreError::Locked(path))
            }
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

impl Drop for CorpusLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// In-memory view of the corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub records: BTreeMap<u64, FlawRecord>,
    pub labels: BTreeMap<u64, BTreeSet<String>>,
}

impl Corpus {
    pub fn empty(root: &Path) -> Corpus {
        Corpus {
            root: root.to_path_buf(),
            records: BTreeMap::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records in id order.
    pub fn records_sorted(&self) -> Vec<&FlawRecord> {
        self.records.values().collect()
    }
}

/// Two corpora are equal when their records and labels match; the root
/// path does not participate.
impl PartialEq for Corpus {
    fn eq(&self, other: &Corpus) -> bool {
        self.records == other.records && self.labels == other.labels
    }
}

/// A record file that was excluded from the corpus, with why.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedFile {
    pub file: String,
    pub report: ValidationReport,
}

#[derive(Debug)]
pub struct LoadOutcome {
    pub corpus: Corpus,
    pub rejected: Vec<RejectedFile>,
}

fn failure_report(rule: &str, message: String) -> ValidationReport {
    ValidationReport::from_violations(vec![Violation::new("", rule, message)])
}

/// Loads every record file under `<root>/records/`, running the full
/// pipeline on each. Files that fail to parse or validate are excluded and
/// reported. Two files claiming the same id is a hard error.
pub fn load_corpus(root: &Path) -> Result<LoadOutcome, StoreError> {
    if !root.is_dir() {
        return Err(StoreError::NotADirectory(root.to_path_buf()));
    }
    let records_dir = root.join(RECORDS_DIR);
    let mut corpus = Corpus::empty(root);
    let mut rejected = Vec::new();
    let mut sources: BTreeMap<u64, String> = BTreeMap::new();

    if records_dir.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&records_dir)
            .map_err(|e| io_err(&records_dir, e))?
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| io_err(&records_dir, e))?
            .into_iter()
            .map(|entry| entry.path())
            .filter(|p| {
                p.is_file()
                    && !p
                        .file_name()
                        .and_then(|n| n.to_str())
                        .map(|n| n.starts_with('.'))
                        .unwrap_or(true)
            })
            .collect();
        paths.sort();

        for path in paths {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let raw = match doc::parse(&text) {
                Ok(d) => d,
                Err(e) => {
                    rejected.push(RejectedFile {
                        file: name,
                        report: failure_report("parse", e.to_string()),
                    });
                    continue;
                }
            };
            let processed = match record::process_record(raw) {
                Ok(p) => p,
                Err(NormalizeError::RenameConflict { .. }) => {
                    rejected.push(RejectedFile {
                        file: name,
                        report: failure_report(
                            "rename",
                            "conflicting legacy and renamed keys".to_string(),
                        ),
                    });
                    continue;
                }
            };
            if !processed.report.ok {
                rejected.push(RejectedFile {
                    file: name,
                    report: processed.report,
                });
                continue;
            }
            let flaw_record = match FlawRecord::from_doc(&processed.doc) {
                Ok(r) => r,
                Err(e) => {
                    rejected.push(RejectedFile {
                        file: name,
                        report: failure_report("shape", e.to_string()),
                    });
                    continue;
                }
            };
            if let Some(first) = sources.get(&flaw_record.id) {
                return Err(StoreError::DuplicateId {
                    id: flaw_record.id,
                    first: first.clone(),
                    second: name,
                });
            }
            sources.insert(flaw_record.id, name);
            corpus.records.insert(flaw_record.id, flaw_record);
        }
    }

    corpus.labels = load_labels(root)?;
    Ok(LoadOutcome { corpus, rejected })
}

fn load_labels(root: &Path) -> Result<BTreeMap<u64, BTreeSet<String>>, StoreError> {
    let path = root.join(LABELS_FILE);
    let mut labels: BTreeMap<u64, BTreeSet<String>> = BTreeMap::new();
    if !path.is_file() {
        return Ok(labels);
    }
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, label) = line.split_once(':').ok_or_else(|| StoreError::LabelFormat {
            path: path.clone(),
            line: idx + 1,
        })?;
        let id: u64 = id.trim().parse().map_err(|_| StoreError::LabelFormat {
            path: path.clone(),
            line: idx + 1,
        })?;
        labels.entry(id).or_default().insert(label.trim().to_string());
    }
    Ok(labels)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp_name = String::from(".tmp.");
    tmp_name.push_str(
        path.file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("write"),
    );
    let tmp = dir.join(tmp_name);
    {
        let mut file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(contents.as_bytes())
            .map_err(|e| io_err(&tmp, e))?;
        file.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn save_labels(root: &Path, labels: &BTreeMap<u64, BTreeSet<String>>) -> Result<(), StoreError> {
    let mut out = String::new();
    for (id, set) in labels {
        for label in set {
            out.push_str(&format!("{id}:{label}\n"));
        }
    }
    write_atomic(&root.join(LABELS_FILE), &out)
}

fn append_journal(root: &Path, author: &str, action: &str, id: u64) -> Result<(), StoreError> {
    let path = root.join(JOURNAL_FILE);
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| io_err(&path, e))?;
    writeln!(file, "{author}\t{action}\t{id}").map_err(|e| io_err(&path, e))
}

/// Next free identifier: one past the maximum, 0 for an empty corpus.
pub fn assign_id(corpus: &Corpus) -> u64 {
    corpus
        .records
        .keys()
        .next_back()
        .map(|max| max + 1)
        .unwrap_or(0)
}

/// Filesystem-safe slug derived from a record title.
pub fn slug(title: &str) -> String {
    let mut out = String::new();
    let mut pending_dash = false;
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.push(c.to_ascii_lowercase());
        } else {
            pending_dash = true;
        }
        if out.len() >= 50 {
            break;
        }
    }
    if out.is_empty() {
        out.push_str("record");
    }
    out
}

pub fn record_file_name(record: &FlawRecord) -> String {
    format!("{}.{}.yml", record.id, slug(&record.title))
}

#[derive(Debug, thiserror::Error)]
pub enum AddError {
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error("record failed validation")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug)]
pub struct AddOutcome {
    pub id: u64,
    pub file: String,
    pub report: ValidationReport,
}

/// Validates and stores a new record: a fresh id is assigned, the record
/// file is written atomically, the `triage` label attached, and the
/// mutation journaled under `author`. Nothing is written when validation
/// fails.
pub fn add_record(
    corpus: &mut Corpus,
    raw: Doc,
    author: &str,
    lock: &CorpusLock,
) -> Result<AddOutcome, AddError> {
    let _ = lock;
    let processed = record::process_record(raw)?;
    if !processed.report.ok {
        return Err(AddError::Invalid(processed.report));
    }
    let mut doc = processed.doc;
    let id = assign_id(corpus);
    doc.insert("id", rvd_core::doc::Value::Int(id as i64));
    let flaw_record =
        FlawRecord::from_doc(&doc).expect("validated record has the required shape");

    let records_dir = corpus.root.join(RECORDS_DIR);
    fs::create_dir_all(&records_dir).map_err(|e| io_err(&records_dir, e))?;
    let file = record_file_name(&flaw_record);
    let text = doc::render(&flaw_record.to_doc()).expect("records render");
    write_atomic(&records_dir.join(&file), &text)?;

    corpus
        .labels
        .entry(id)
        .or_default()
        .insert(TRIAGE_LABEL.to_string());
    save_labels(&corpus.root, &corpus.labels)?;
    append_journal(&corpus.root, author, "add", id)?;
    corpus.records.insert(id, flaw_record);
    Ok(AddOutcome {
        id,
        file,
        report: processed.report,
    })
}

/// Attaches a label to an existing record and journals the mutation.
pub fn add_label(
    corpus: &mut Corpus,
    id: u64,
    label: &str,
    author: &str,
    lock: &CorpusLock,
) -> Result<(), StoreError> {
    let _ = lock;
    corpus.labels.entry(id).or_default().insert(label.to_string());
    save_labels(&corpus.root, &corpus.labels)?;
    append_journal(&corpus.root, author, &format!("label:{label}"), id)
}

/// Writes a full copy of the corpus (records and labels) under `target`;
/// returns the number of record files written. Reloading the export yields
/// an equal corpus.
pub fn export_corpus(corpus: &Corpus, target: &Path) -> Result<usize, StoreError> {
    let records_dir = target.join(RECORDS_DIR);
    fs::create_dir_all(&records_dir).map_err(|e| io_err(&records_dir, e))?;
    let mut written = 0;
    for flaw_record in corpus.records.values() {
        let text = doc::render(&flaw_record.to_doc()).expect("records render");
        write_atomic(&records_dir.join(record_file_name(flaw_record)), &text)?;
        written += 1;
    }
    save_labels(target, &corpus.labels)?;
    Ok(written)
}

/// Writes the generated status report (UTF-8, LF) atomically.
pub fn write_report(path: &Path, contents: &str, lock: &CorpusLock) -> Result<(), StoreError> {
    let _ = lock;
    write_atomic(path, contents)
}

// ---- disclosure cases ----

pub fn load_cases(root: &Path) -> Result<Vec<DisclosureCase>, StoreError> {
    let path = root.join(CASES_FILE);
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut cases = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case = disclosure::parse_case_line(line).map_err(|e| StoreError::CaseFormat {
            path: path.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        cases.push(case);
    }
    Ok(cases)
}

pub fn save_cases(
    root: &Path,
    cases: &[DisclosureCase],
    lock: &CorpusLock,
) -> Result<(), StoreError> {
    let _ = lock;
    let mut out = String::new();
    for case in cases {
        out.push_str(&disclosure::render_case_line(case));
        out.push('\n');
    }
    write_atomic(&root.join(CASES_FILE), &out)
}

// ---- dedup model and label log ----

pub fn model_path(root: &Path) -> PathBuf {
    root.join(MODEL_FILE)
}

pub fn load_model(root: &Path) -> Result<Option<DedupModel>, StoreError> {
    let path = model_path(root);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    dedup::parse_model(&text)
        .map(Some)
        .map_err(|e| StoreError::ModelFormat {
            path,
            message: e.to_string(),
        })
}

pub fn save_model(root: &Path, model: &DedupModel, lock: &CorpusLock) -> Result<(), StoreError> {
    let _ = lock;
    write_atomic(&model_path(root), &dedup::render_model(model))
}

pub fn label_log_path(root: &Path) -> PathBuf {
    root.join(LABEL_LOG_FILE)
}

pub fn load_label_log(root: &Path) -> Result<Vec<LabeledPair>, StoreError> {
    let path = label_log_path(root);
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair = dedup::parse_label_line(line).map_err(|e| StoreError::CaseFormat {
            path: path.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Appends labeled pairs to the append-only label log.
pub fn append_labels(
    root: &Path,
    pairs: &[LabeledPair],
    lock: &CorpusLock,
) -> Result<(), StoreError> {
    let _ = lock;
    let path = label_log_path(root);
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| io_err(&path, e))?;
    for pair in pairs {
        writeln!(file, "{}", dedup::render_label_line(pair)).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}
