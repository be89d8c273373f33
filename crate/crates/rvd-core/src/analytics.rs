//! Corpus statistics and the generated Markdown status report: per-vendor
//! record counts and per-vendor severity histograms under both imputation
//! modes for unscored records.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::record::FlawRecord;
use crate::severity::{bucket, BucketError, Imputation, ScoreValue, SeverityBucket};

/// Vendor label used for records with a null vendor.
pub const UNKNOWN_VENDOR: &str = "Unknown";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VendorCount {
    pub vendor: String,
    pub count: u64,
}

/// The score a record contributes to statistics: a numeric `cvss-score`
/// wins, then a numeric `rvss-score`, otherwise the record is unscored.
pub fn record_score(record: &FlawRecord) -> ScoreValue {
    if let Some(ScoreValue::Number(n)) = record.severity.cvss_score {
        return ScoreValue::Number(n);
    }
    if let ScoreValue::Number(n) = record.severity.rvss_score {
        return ScoreValue::Number(n);
    }
    ScoreValue::Unscored
}

fn vendor_label(record: &FlawRecord) -> &str {
    record.vendor.as_deref().unwrap_or(UNKNOWN_VENDOR)
}

/// Records grouped by vendor (null vendors as "Unknown"), sorted by count
/// descending with alphabetical tie-breaks. Counts always sum to the
/// corpus size.
pub fn vendor_counts(corpus: &[FlawRecord]) -> Vec<VendorCount> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for record in corpus {
        *counts.entry(vendor_label(record)).or_default() += 1;
    }
    let mut out: Vec<VendorCount> = counts
        .into_iter()
        .map(|(vendor, count)| VendorCount {
            vendor: vendor.to_owned(),
            count,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.vendor.cmp(&b.vendor)));
    out
}

/// Per-vendor severity distribution under one imputation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityHistogram {
    pub vendor: String,
    counts: [u64; 5],
    pub imputation: Imputation,
}

impl SeverityHistogram {
    pub fn count(&self, bucket: SeverityBucket) -> u64 {
        self.counts[bucket as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Buckets every record per vendor. Vendors appear in [`vendor_counts`]
/// order; per-vendor bucket counts sum to that vendor's record count.
pub fn severity_histogram(
    corpus: &[FlawRecord],
    imputation: Imputation,
) -> Result<Vec<SeverityHistogram>, BucketError> {
    let mut by_vendor: BTreeMap<&str, [u64; 5]> = BTreeMap::new();
    for record in corpus {
        let b = bucket(record_score(record), imputation)?;
        by_vendor.entry(vendor_label(record)).or_default()[b as usize] += 1;
    }
    Ok(vendor_counts(corpus)
        .into_iter()
        .map(|vc| SeverityHistogram {
            counts: by_vendor[vc.vendor.as_str()],
            vendor: vc.vendor,
            imputation,
        })
        .collect())
}

fn escape_cell(text: &str) -> String {
    text.replace('|', "\\|")
}

fn imputation_heading(imputation: Imputation) -> &'static str {
    match imputation {
        Imputation::Pessimistic => "pessimistic imputation: unscored records count as Critical",
        Imputation::Optimistic => "optimistic imputation: unscored records count as Low",
        Imputation::None => "no imputation",
    }
}

/// Renders the status report. Output is deterministic: identical inputs
/// produce identical bytes (UTF-8, LF line endings).
pub fn render_report(
    counts: &[VendorCount],
    histograms: &[SeverityHistogram],
    total: u64,
) -> String {
    let mut out = String::new();
    out.push_str("# Vulnerability Database Report\n\n");
    out.push_str(&format!("Total records: {total}\n\n"));

    out.push_str("## Records by vendor\n\n");
    out.push_str("| Vendor | Count |\n");
    out.push_str("| --- | ---: |\n");
    for vc in counts {
        out.push_str(&format!("| {} | {} |\n", escape_cell(&vc.vendor), vc.count));
    }

    for mode in [Imputation::Pessimistic, Imputation::Optimistic, Imputation::None] {
        let rows: Vec<&SeverityHistogram> =
            histograms.iter().filter(|h| h.imputation == mode).collect();
        if rows.is_empty() {
            continue;
        }
        out.push_str(&format!(
            "\n## Severity by vendor ({})\n\n",
            imputation_heading(mode)
        ));
        out.push_str("| Vendor | None | Low | Medium | High | Critical |\n");
        out.push_str("| --- | ---: | ---: | ---: | ---: | ---: |\n");
        for h in rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                escape_cell(&h.vendor),
                h.count(SeverityBucket::None),
                h.count(SeverityBucket::Low),
                h.count(SeverityBucket::Medium),
                h.count(SeverityBucket::High),
                h.count(SeverityBucket::Critical),
            ));
        }
    }
    out
}
