//! Command implementations. Each command writes human-readable output to
//! the supplied writers and returns a process exit code, so tests can
//! drive everything (including the interactive labeling session) without a
//! terminal.
//!
//! Exit codes: 0 success, 1 violations or data problems found, 2 usage
//! error, 3 I/O error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rvd_core::analytics;
use rvd_core::dedup::{self, CandidatePair, DedupModel, Hyperparameters, Label, LabeledPair};
use rvd_core::disclosure::Date;
use rvd_core::doc;
use rvd_core::record::{self, FlawRecord, ValidationReport};
use rvd_core::severity::{self, Imputation, MetricVector, ScoreValue};

use crate::store::{self, Corpus, CorpusLock, StoreError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

fn io_failure(err: &mut dyn Write, error: &dyn std::fmt::Display) -> i32 {
    let _ = writeln!(err, "error: {error}");
    EXIT_IO
}

fn print_violations(out: &mut dyn Write, name: &str, report: &ValidationReport) {
    for violation in &report.violations {
        let field = if violation.field.is_empty() {
            "record"
        } else {
            &violation.field
        };
        let _ = writeln!(out, "  {name}: {field}: {}: {}", violation.rule, violation.message);
    }
}

fn print_warnings(err: &mut dyn Write, name: &str, report: &ValidationReport) {
    for warning in &report.warnings {
        let _ = writeln!(err, "warning: {name}: {}: {}", warning.field, warning.message);
    }
}

fn load_corpus_reporting(
    root: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Corpus, i32> {
    match store::load_corpus(root) {
        Ok(outcome) => {
            for rejected in &outcome.rejected {
                let _ = writeln!(err, "warning: skipped invalid record file {}", rejected.file);
                print_violations(err, &rejected.file, &rejected.report);
            }
            let _ = out;
            Ok(outcome.corpus)
        }
        Err(e @ StoreError::DuplicateId { .. }) => {
            let _ = writeln!(err, "error: {e}");
            Err(EXIT_VIOLATIONS)
        }
        Err(e) => Err(io_failure(err, &e)),
    }
}

fn acquire_lock(root: &Path, err: &mut dyn Write) -> Result<CorpusLock, i32> {
    CorpusLock::acquire(root).map_err(|e| io_failure(err, &e))
}

// ---- validate ----

pub fn cmd_validate(paths: &[PathBuf], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if paths.is_empty() {
        let _ = writeln!(err, "error: no paths given");
        return EXIT_USAGE;
    }
    let mut files: Vec<PathBuf> = Vec::new();
    for path in paths {
        if path.is_file() {
            files.push(path.clone());
        } else if path.is_dir() {
            let mut entries: Vec<PathBuf> = match std::fs::read_dir(path) {
                Ok(iter) => iter
                    .filter_map(|e| e.ok())
                    .map(|e| e.path())
                    .filter(|p| {
                        p.is_file()
                            && !p
                                .file_name()
                                .and_then(|n| n.to_str())
                                .map(|n| n.starts_with('.'))
                                .unwrap_or(true)
                    })
                    .collect(),
                Err(e) => return io_failure(err, &format!("{}: {e}", path.display())),
            };
            entries.sort();
            files.extend(entries);
        } else {
            let _ = writeln!(err, "error: no such path: {}", path.display());
            return EXIT_USAGE;
        }
    }

    let mut valid = 0usize;
    let mut invalid = 0usize;
    for file in &files {
        let name = file.display().to_string();
        let text = match std::fs::read_to_string(file) {
            Ok(t) => t,
            Err(e) => return io_failure(err, &format!("{name}: {e}")),
        };
        let report = match doc::parse(&text).map(record::process_record) {
            Ok(Ok(processed)) => processed.report,
            Ok(Err(normalize_error)) => {
                invalid += 1;
                let _ = writeln!(out, "invalid: {name}");
                let _ = writeln!(out, "  {name}: record: rename: {normalize_error}");
                continue;
            }
            Err(parse_error) => {
                invalid += 1;
                let _ = writeln!(out, "invalid: {name}");
                let _ = writeln!(out, "  {name}: record: parse: {parse_error}");
                continue;
            }
        };
        if report.ok {
            valid += 1;
            let _ = writeln!(out, "ok: {name}");
        } else {
            invalid += 1;
            let _ = writeln!(out, "invalid: {name}");
            print_violations(out, &name, &report);
        }
        print_warnings(err, &name, &report);
    }
    let _ = writeln!(
        out,
        "checked {} file(s): {valid} valid, {invalid} invalid",
        files.len()
    );
    if invalid > 0 {
        EXIT_VIOLATIONS
    } else {
        EXIT_OK
    }
}

// ---- add ----

pub fn cmd_add(
    root: &Path,
    file: &Path,
    author: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if !file.is_file() {
        let _ = writeln!(err, "error: no such file: {}", file.display());
        return EXIT_USAGE;
    }
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => return io_failure(err, &e),
    };
    let raw = match doc::parse(&text) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", file.display());
            return EXIT_VIOLATIONS;
        }
    };
    let lock = match acquire_lock(root, err) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let mut corpus = match load_corpus_reporting(root, out, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match store::add_record(&mut corpus, raw, author, &lock) {
        Ok(outcome) => {
            print_warnings(err, &outcome.file, &outcome.report);
            let _ = writeln!(out, "added record {} as {}", outcome.id, outcome.file);
            EXIT_OK
        }
        Err(store::AddError::Invalid(report)) => {
            let _ = writeln!(out, "invalid: {}", file.display());
            print_violations(out, &file.display().to_string(), &report);
            EXIT_VIOLATIONS
        }
        Err(store::AddError::Normalize(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_VIOLATIONS
        }
        Err(store::AddError::Store(e)) => io_failure(err, &e),
    }
}

// ---- score ----

fn bucket_name(score: f64) -> &'static str {
    severity::bucket(ScoreValue::Number(score), Imputation::None)
        .map(|b| b.as_str())
        .unwrap_or("?")
}

pub fn cmd_score(
    vector: Option<&str>,
    file: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    match (vector, file) {
        (Some(text), None) => match MetricVector::parse(text) {
            Ok(v) => match severity::cvss_base_score(&v) {
                Ok(score) => {
                    let _ = writeln!(out, "score: {score:.1}");
                    let _ = writeln!(out, "severity: {}", bucket_name(score));
                    EXIT_OK
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_VIOLATIONS
                }
            },
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_VIOLATIONS
            }
        },
        (None, Some(path)) => {
            if !path.is_file() {
                let _ = writeln!(err, "error: no such file: {}", path.display());
                return EXIT_USAGE;
            }
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return io_failure(err, &e),
            };
            let parsed = doc::parse(&text).map(record::process_record);
            let processed = match parsed {
                Ok(Ok(p)) => p,
                Ok(Err(e)) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_VIOLATIONS;
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_VIOLATIONS;
                }
            };
            let severity_block = processed
                .doc
                .get("severity")
                .and_then(|v| v.as_map())
                .map(severity::severity_block_view);
            let Some(block) = severity_block else {
                let _ = writeln!(err, "error: record has no severity block");
                return EXIT_VIOLATIONS;
            };
            let Some(vector_text) = block.cvss_vector else {
                let _ = writeln!(err, "error: record has no cvss-vector to score");
                return EXIT_VIOLATIONS;
            };
            let vector = match MetricVector::parse(&vector_text) {
                Ok(v) => v,
                Err(e) => {
                    let _ = writeln!(err, "error: cvss-vector: {e}");
                    return EXIT_VIOLATIONS;
                }
            };
            let score = match severity::cvss_base_score(&vector) {
                Ok(s) => s,
                Err(e) => {
                    let _ = writeln!(err, "error: cvss-vector: {e}");
                    return EXIT_VIOLATIONS;
                }
            };
            let _ = writeln!(out, "vector: {}", vector.render());
            let _ = writeln!(out, "score: {score:.1}");
            let _ = writeln!(out, "severity: {}", bucket_name(score));
            match block.cvss_score {
                Some(ScoreValue::Number(stored)) => {
                    if (stored * 10.0).round() == (score * 10.0).round() {
                        let _ = writeln!(out, "stored cvss-score {stored} is consistent");
                        EXIT_OK
                    } else {
                        let _ = writeln!(
                            out,
                            "stored cvss-score {stored} DOES NOT MATCH computed {score:.1}"
                        );
                        EXIT_VIOLATIONS
                    }
                }
                _ => EXIT_OK,
            }
        }
        _ => {
            let _ = writeln!(err, "error: pass exactly one of --vector or a record file");
            EXIT_USAGE
        }
    }
}

// ---- report ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    Pessimistic,
    Optimistic,
    Both,
}

impl ReportMode {
    fn imputations(&self) -> Vec<Imputation> {
        match self {
            ReportMode::Pessimistic => vec![Imputation::Pessimistic],
            ReportMode::Optimistic => vec![Imputation::Optimistic],
            ReportMode::Both => vec![Imputation::Pessimistic, Imputation::Optimistic],
        }
    }
}

pub fn cmd_report(root: &Path, mode: ReportMode, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let lock = match acquire_lock(root, err) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let corpus = match load_corpus_reporting(root, out, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let records = corpus.records_sorted();
    let records: Vec<FlawRecord> = records.into_iter().cloned().collect();
    let counts = analytics::vendor_counts(&records);
    let mut histograms = Vec::new();
    for imputation in mode.imputations() {
        match analytics::severity_histogram(&records, imputation) {
            Ok(mut h) => histograms.append(&mut h),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_VIOLATIONS;
            }
        }
    }
    let report = analytics::render_report(&counts, &histograms, records.len() as u64);
    let path = root.join(store::REPORT_FILE);
    if let Err(e) = store::write_report(&path, &report, &lock) {
        return io_failure(err, &e);
    }
    let _ = writeln!(
        out,
        "report written to {} ({} records)",
        path.display(),
        records.len()
    );
    EXIT_OK
}

// ---- deadlines ----

pub fn cmd_deadlines(
    root: &Path,
    today: Date,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let mut cases = match store::load_cases(root) {
        Ok(c) => c,
        Err(e @ StoreError::CaseFormat { .. }) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VIOLATIONS;
        }
        Err(e) => return io_failure(err, &e),
    };
    cases.sort_by_key(|c| (c.deadline, c.record_id));
    let mut overdue = 0usize;
    for case in &cases {
        let mut line = format!(
            "record {}: contacted {}, deadline {}, state {}",
            case.record_id,
            case.vendor_contacted_on,
            case.deadline,
            case.state.as_str()
        );
        if let Some(on) = case.disclosed_on {
            line.push_str(&format!(", disclosed {on}"));
        }
        if case.is_overdue(today) {
            overdue += 1;
            line.push_str(" -- OVERDUE");
        }
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "{} case(s), {overdue} overdue (today: {today})", cases.len());
    if overdue > 0 {
        EXIT_VIOLATIONS
    } else {
        EXIT_OK
    }
}

// ---- export ----

pub fn cmd_export(root: &Path, target: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let corpus = match load_corpus_reporting(root, out, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match store::export_corpus(&corpus, target) {
        Ok(written) => {
            let _ = writeln!(out, "exported {written} record(s) to {}", target.display());
            EXIT_OK
        }
        Err(e) => io_failure(err, &e),
    }
}

// ---- dedup ----

fn labeled_id_pairs(root: &Path) -> Result<std::collections::BTreeSet<(u64, u64)>, StoreError> {
    Ok(store::load_label_log(root)?
        .into_iter()
        .map(|p| (p.record_id_a, p.record_id_b))
        .collect())
}

pub fn cmd_dedup_scan(
    root: &Path,
    all_pairs: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let corpus = match load_corpus_reporting(root, out, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let records: Vec<FlawRecord> = corpus.records.values().cloned().collect();
    let candidates = dedup::candidate_pairs(&records, all_pairs);
    for pair in &candidates {
        let _ = writeln!(out, "{}\t{}", pair.id_a, pair.id_b);
    }
    let _ = writeln!(out, "{} candidate pair(s)", candidates.len());
    EXIT_OK
}

fn show_record(out: &mut dyn Write, record: &FlawRecord) {
    let vendor = record.vendor.as_deref().unwrap_or("(unknown)");
    let _ = writeln!(out, "  [{}] {}", record.id, record.title);
    let _ = writeln!(
        out,
        "      vendor: {vendor} | system: {} | cve: {}",
        record.system, record.cve
    );
}

/// Runs the interactive labeling session over the most uncertain pairs.
/// Answers come one per line: `d` duplicate, `n` distinct, `s` skip;
/// end-of-input ends the session.
#[allow(clippy::too_many_arguments)]
pub fn cmd_dedup_label(
    root: &Path,
    k: usize,
    labeler: &str,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    if k == 0 {
        let _ = writeln!(err, "error: --k must be positive");
        return EXIT_USAGE;
    }
    let corpus = match load_corpus_reporting(root, out, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let records: Vec<FlawRecord> = corpus.records.values().cloned().collect();
    let already = match labeled_id_pairs(root) {
        Ok(set) => set,
        Err(e) => return io_failure(err, &e),
    };
    let candidates: Vec<CandidatePair> = dedup::candidate_pairs(&records, false)
        .into_iter()
        .filter(|p| !already.contains(&(p.id_a, p.id_b)))
        .collect();
    if candidates.is_empty() {
        let _ = writeln!(out, "no unlabeled candidate pairs");
        return EXIT_OK;
    }
    let model = match store::load_model(root) {
        Ok(Some(m)) => m,
        Ok(None) => DedupModel::zero(),
        Err(e) => return io_failure(err, &e),
    };
    let queries = match dedup::select_queries(&model, &candidates, k) {
        Ok(q) => q,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VIOLATIONS;
        }
    };

    let mut labeled: Vec<LabeledPair> = Vec::new();
    let total = queries.len();
    'pairs: for (index, pair) in queries.iter().enumerate() {
        let p = dedup::predict(&model, &pair.features).unwrap_or(0.5);
        let _ = writeln!(
            out,
            "pair {} / {}  [{}/{total}]  p={p:.3}",
            pair.id_a,
            pair.id_b,
            index + 1
        );
        show_record(out, &corpus.records[&pair.id_a]);
        show_record(out, &corpus.records[&pair.id_b]);
        loop {
            let _ = write!(out, "label? [d]uplicate / [n] distinct / [s]kip: ");
            let _ = out.flush();
            let mut answer = String::new();
            match input.read_line(&mut answer) {
                Ok(0) => {
                    let _ = writeln!(out);
                    let _ = writeln!(out, "input closed; ending session");
                    break 'pairs;
                }
                Ok(_) => {}
                Err(e) => return io_failure(err, &e),
            }
            match answer.trim() {
                "d" => {
                    labeled.push(LabeledPair::new(
                        pair.id_a,
                        pair.id_b,
                        pair.features,
                        Label::Duplicate,
                        labeler,
                    ));
                    break;
                }
                "n" => {
                    labeled.push(LabeledPair::new(
                        pair.id_a,
                        pair.id_b,
                        pair.features,
                        Label::Distinct,
                        labeler,
                    ));
                    break;
                }
                "s" => break,
                other => {
                    let _ = writeln!(out, "unrecognized answer {other:?} (expected d, n, or s)");
                }
            }
        }
    }

    if labeled.is_empty() {
        let _ = writeln!(out, "no labels recorded");
        return EXIT_OK;
    }
    let lock = match acquire_lock(root, err) {
        Ok(l) => l,
        Err(code) => return code,
    };
    if let Err(e) = store::append_labels(root, &labeled, &lock) {
        return io_failure(err, &e);
    }
    let _ = writeln!(
        out,
        "appended {} label(s) to {}",
        labeled.len(),
        store::label_log_path(root).display()
    );
    EXIT_OK
}

pub fn cmd_dedup_train(
    root: &Path,
    hyper: Hyperparameters,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let pairs = match store::load_label_log(root) {
        Ok(p) => p,
        Err(e @ StoreError::CaseFormat { .. }) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VIOLATIONS;
        }
        Err(e) => return io_failure(err, &e),
    };
    if pairs.is_empty() {
        let _ = writeln!(err, "error: no labeled pairs yet (run `rvd dedup label` first)");
        return EXIT_VIOLATIONS;
    }
    match dedup::train(&pairs, hyper) {
        Ok(model) => {
            let duplicates = pairs.iter().filter(|p| p.label == Label::Duplicate).count();
            let lock = match acquire_lock(root, err) {
                Ok(l) => l,
                Err(code) => return code,
            };
            if let Err(e) = store::save_model(root, &model, &lock) {
                return io_failure(err, &e);
            }
            let _ = writeln!(
                out,
                "trained model on {} pair(s) ({duplicates} duplicate, {} distinct)",
                pairs.len(),
                pairs.len() - duplicates
            );
            let _ = writeln!(out, "model written to {}", store::model_path(root).display());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_VIOLATIONS
        }
    }
}

pub fn cmd_dedup_apply(
    root: &Path,
    threshold: f64,
    all_pairs: bool,
    attach: Option<&str>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let model = match store::load_model(root) {
        Ok(Some(m)) => m,
        Ok(None) => {
            let _ = writeln!(
                err,
                "error: no model at {} (run `rvd dedup train` first)",
                store::model_path(root).display()
            );
            return EXIT_USAGE;
        }
        Err(e) => return io_failure(err, &e),
    };
    let mut corpus = match load_corpus_reporting(root, out, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let records: Vec<FlawRecord> = corpus.records.values().cloned().collect();
    let clusters = match dedup::find_duplicates(&records, &model, threshold, all_pairs) {
        Ok(c) => c,
        Err(dedup::FindError::BadThreshold) => {
            let _ = writeln!(err, "error: --threshold must be strictly between 0 and 1");
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_VIOLATIONS;
        }
    };
    let duplicate_clusters: Vec<_> = clusters.iter().filter(|c| c.members.len() > 1).collect();
    for cluster in &duplicate_clusters {
        let members: Vec<String> = cluster.members.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "cluster {}: {}", cluster.canonical_id, members.join(" "));
    }
    let covered: usize = duplicate_clusters.iter().map(|c| c.members.len()).sum();
    let _ = writeln!(
        out,
        "{} duplicate cluster(s) covering {covered} record(s)",
        duplicate_clusters.len()
    );

    if let Some(author) = attach {
        let lock = match acquire_lock(root, err) {
            Ok(l) => l,
            Err(code) => return code,
        };
        let mut attached = 0usize;
        for cluster in &duplicate_clusters {
            for member in &cluster.members {
                if *member != cluster.canonical_id {
                    if let Err(e) = store::add_label(
                        &mut corpus,
                        *member,
                        store::DUPLICATE_LABEL,
                        author,
                        &lock,
                    ) {
                        return io_failure(err, &e);
                    }
                    attached += 1;
                }
            }
        }
        let _ = writeln!(out, "labeled {attached} record(s) as duplicate");
    }
    EXIT_OK
}
