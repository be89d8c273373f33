//! Shared test support: a deterministic PRNG, the vendor-distribution
//! fixture corpus, and the planted-duplicate corpus generator.

#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rvd_core::doc::{self, Doc, Value};
use rvd_core::record::{self, FlawRecord};

/// SplitMix64: tiny, seedable, stable forever.
pub struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}

/// Vendor distribution for the 110-record fixture: the thirteen named
/// vendors plus eight vendor-less records.
pub fn fixture_vendor_distribution() -> Vec<(Option<&'static str>, usize)> {
    vec![
        (Some("ABB"), 61),
        (Some("Fanuc"), 6),
        (Some("Robotics"), 2),
        (Some("Universal Robots"), 5),
        (Some("DDS vendors (eProsima, ADLINK, RTI)"), 2),
        (Some("Acutronic Robotics"), 5),
        (Some("Vecna"), 6),
        (Some("WowWee"), 3),
        (Some("UBTech Robotics"), 3),
        (Some("PAL Robotics"), 1),
        (Some("SoftBank Robotics"), 4),
        (Some("Rethink Robotics"), 3),
        (Some("Asratec"), 1),
        (None, 8),
    ]
}

/// Expected `vendor_counts` output order for the fixture: count descending,
/// ties alphabetical.
pub fn fixture_expected_counts() -> Vec<(&'static str, u64)> {
    vec![
        ("ABB", 61),
        ("Unknown", 8),
        ("Fanuc", 6),
        ("Vecna", 6),
        ("Acutronic Robotics", 5),
        ("Universal Robots", 5),
        ("SoftBank Robotics", 4),
        ("Rethink Robotics", 3),
        ("UBTech Robotics", 3),
        ("WowWee", 3),
        ("DDS vendors (eProsima, ADLINK, RTI)", 2),
        ("Robotics", 2),
        ("Asratec", 1),
        ("PAL Robotics", 1),
    ]
}

/// Vendors whose fixture records are all unscored.
pub const UNSCORED_VENDORS: [&str; 2] = ["WowWee", "Asratec"];

/// CVSS vectors and their base scores, precomputed with the first-party
/// v3.1 calculator.
pub const CVSS_POOL: [(&str, f64); 6] = [
    ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H", 9.8),
    ("CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:U/C:H/I:H/A:H", 8.8),
    ("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:L/I:N/A:N", 5.3),
    ("CVSS:3.1/AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N", 6.1),
    ("CVSS:3.1/AV:L/AC:L/PR:L/UI:N/S:U/C:L/I:N/A:N", 3.3),
    ("CVSS:3.1/AV:L/AC:H/PR:H/UI:R/S:C/C:H/I:L/A:N", 5.8),
];

const RVSS_POOL: [f64; 5] = [9.4, 7.2, 4.6, 2.2, 0.0];

const ISSUES: [&str; 10] = [
    "Stack overflow",
    "Heap overflow",
    "Use after free",
    "Unauthenticated access",
    "Hardcoded credentials",
    "Command injection",
    "Path traversal",
    "Integer overflow",
    "Denial of service",
    "Memory disclosure",
];

const COMPONENTS: [&str; 12] = [
    "ros_comm",
    "moveit planner",
    "navigation stack",
    "joint_state_publisher",
    "urdf parser",
    "gazebo plugin",
    "dds transport",
    "teleop node",
    "firmware updater",
    "motion planner",
    "camera driver",
    "lidar driver",
];

const KEYWORD_POOL: [&str; 8] = [
    "overflow", "network", "firmware", "authentication", "transport", "parser", "driver", "safety",
];

fn scalar(s: &str) -> Value {
    Value::str(s)
}

fn severity_block(global: usize, cvss: Option<(&str, f64)>, rvss: Option<f64>) -> Value {
    let mut sev = Doc::new();
    match rvss {
        Some(score) => {
            sev.insert("rvss-score", rvd_score_value(score));
            sev.insert(
                "rvss-vector",
                scalar(&format!(
                    "RVSS:1.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H/H:{}",
                    ["U", "E", "T"][global % 3]
                )),
            );
        }
        None => {
            sev.insert("rvss-score", scalar("None"));
            sev.insert("rvss-vector", scalar("None"));
        }
    }
    sev.insert(
        "severity-description",
        scalar(match (cvss, rvss) {
            (Some(_), _) => "scored with the standard calculator",
            (None, Some(_)) => "scored with the robot-specific extension",
            (None, None) => "not yet assessed",
        }),
    );
    if let Some((vector, score)) = cvss {
        sev.insert("cvss-score", rvd_score_value(score));
        sev.insert("cvss-vector", scalar(vector));
    }
    Value::Map(sev)
}

fn rvd_score_value(score: f64) -> Value {
    if score.fract() == 0.0 {
        Value::Int(score as i64)
    } else {
        Value::Float(score)
    }
}

fn flaw_block(global: usize) -> Value {
    let mut flaw = Doc::new();
    flaw.insert("phase", scalar(record::PHASES[global % record::PHASES.len()]));
    flaw.insert(
        "specificity",
        scalar(["robotics specific", "general issue", "N/A"][global % 3]),
    );
    flaw.insert(
        "architectural-location",
        scalar(record::ARCHITECTURAL_LOCATIONS[global % record::ARCHITECTURAL_LOCATIONS.len()]),
    );
    flaw.insert("application", scalar(["industrial arm", "mobile base", "N/A"][global % 3]));
    flaw.insert(
        "subsystem",
        scalar(["communication", "actuation", "sensing:lidar", "cognition", "N/A", "power"][global % 6]),
    );
    if global.is_multiple_of(4) {
        flaw.insert(
            "package",
            Value::List(vec![scalar("ros_comm"), scalar("rcl")]),
        );
    } else {
        flaw.insert("package", scalar(COMPONENTS[global % COMPONENTS.len()]));
    }
    if global.is_multiple_of(3) {
        flaw.insert(
            "languages",
            Value::List(vec![scalar("C++"), scalar("Python")]),
        );
    } else {
        flaw.insert("languages", scalar(["C", "Python", "None"][global % 3]));
    }
    flaw.insert(
        "date-detected",
        scalar(&format!("2019-{:02}-{:02}", 1 + global % 12, 1 + global % 28)),
    );
    flaw.insert("detected-by", scalar(["robot security team", "university lab", ""][global % 3]));
    flaw.insert(
        "detected-by-method",
        scalar(record::DETECTION_METHODS[global % record::DETECTION_METHODS.len()]),
    );
    flaw.insert("date-reported", scalar(""));
    flaw.insert("reported-by", scalar(["R. Engineer", "tracker bot", ""][global % 3]));
    flaw.insert(
        "reported-by-relationship",
        scalar(record::REPORTER_RELATIONSHIPS[global % record::REPORTER_RELATIONSHIPS.len()]),
    );
    flaw.insert("issue", scalar(&format!("tickets/{global}")));
    flaw.insert("reproducibility", scalar(["always", "sometimes", ""][global % 3]));
    flaw.insert("trace", scalar(""));
    flaw.insert(
        "reproduction",
        scalar(if global.is_multiple_of(2) { "run the replay harness against the container" } else { "" }),
    );
    flaw.insert(
        "reproduction-image",
        scalar(if global.is_multiple_of(2) {
            "registry.example.com/replay:latest"
        } else {
            ""
        }),
    );
    Value::Map(flaw)
}

/// Builds the deterministic 110-record fixture corpus, ids 0..=109.
pub fn fixture_corpus_docs() -> Vec<Doc> {
    let mut docs = Vec::new();
    let mut global = 0usize;
    for (vendor, count) in fixture_vendor_distribution() {
        for local in 0..count {
            let issue = ISSUES[global % ISSUES.len()];
            let component = COMPONENTS[(global * 5 + local) % COMPONENTS.len()];
            let all_unscored = vendor.map(|v| UNSCORED_VENDORS.contains(&v)).unwrap_or(false);
            // Cycle severity patterns; some vendors stay fully unscored.
            let (cvss, rvss) = if all_unscored {
                (None, None)
            } else {
                match global % 3 {
                    0 => (Some(CVSS_POOL[global % CVSS_POOL.len()]), None),
                    1 => (None, Some(RVSS_POOL[global % RVSS_POOL.len()])),
                    _ => (None, None),
                }
            };
            let exploited = global.is_multiple_of(5);

            let mut d = Doc::new();
            d.insert("id", Value::Int(global as i64));
            d.insert(
                "title",
                scalar(&format!("{issue} in {component} (unit {global})")),
            );
            d.insert(
                "type",
                scalar(if exploited {
                    "vulnerability"
                } else {
                    ["bug", "weakness", "exposure", "bug"][global % 4]
                }),
            );
            d.insert(
                "description",
                scalar(&format!(
                    "{issue} affecting the {component} while handling malformed input; \
                     observed on test unit {global}."
                )),
            );
            d.insert(
                "cwe",
                scalar(["CWE-787", "CWE-20", "None", "CWE-306", "CWE-190"][global % 5]),
            );
            d.insert(
                "cve",
                if global.is_multiple_of(3) {
                    scalar(&format!("CVE-2019-{}", 10_000 + global))
                } else {
                    scalar("None")
                },
            );
            if global.is_multiple_of(2) {
                d.insert(
                    "keywords",
                    Value::List(vec![
                        scalar(KEYWORD_POOL[global % KEYWORD_POOL.len()]),
                        scalar(KEYWORD_POOL[(global + 3) % KEYWORD_POOL.len()]),
                    ]),
                );
            } else {
                d.insert("keywords", scalar(KEYWORD_POOL[global % KEYWORD_POOL.len()]));
            }
            d.insert("system", scalar(component));
            d.insert(
                "vendor",
                match vendor {
                    Some(v) => scalar(v),
                    None => Value::Null,
                },
            );
            d.insert("severity", severity_block(global, cvss, rvss));
            d.insert(
                "links",
                if global.is_multiple_of(4) {
                    Value::List(vec![scalar(&format!("https://tracker.example.com/{global}"))])
                } else {
                    scalar("None")
                },
            );
            d.insert("flaw", flaw_block(global));
            let mut exploitation = Doc::new();
            exploitation.insert(
                "description",
                scalar(if exploited {
                    "proof-of-concept exploit included in the reproduction image"
                } else {
                    ""
                }),
            );
            exploitation.insert("exploitation-image", scalar(""));
            exploitation.insert("exploitation-vector", scalar(""));
            d.insert("exploitation", Value::Map(exploitation));
            let mut mitigation = Doc::new();
            mitigation.insert(
                "description",
                scalar(if global.is_multiple_of(2) { "patched upstream" } else { "" }),
            );
            mitigation.insert(
                "pull-request",
                if global.is_multiple_of(6) {
                    Value::Int(400 + global as i64)
                } else {
                    scalar("")
                },
            );
            d.insert("mitigation", Value::Map(mitigation));
            docs.push(d);
            global += 1;
        }
    }
    assert_eq!(docs.len(), 110);
    docs
}

/// Validates each doc through the full pipeline and writes it as a record
/// file under `<root>/records/`.
pub fn write_corpus_files(root: &Path, docs: &[Doc]) {
    let records_dir = root.join("records");
    fs::create_dir_all(&records_dir).unwrap();
    for doc_in in docs {
        let processed = record::process_record(doc_in.clone()).unwrap();
        assert!(
            processed.report.ok,
            "generated record is invalid: {:?}",
            processed.report.violations
        );
        let flaw_record = FlawRecord::from_doc(&processed.doc).unwrap();
        let name = format!(
            "{}.{}.yml",
            flaw_record.id,
            rvd_cli::store::slug(&flaw_record.title)
        );
        let text = doc::render(&flaw_record.to_doc()).unwrap();
        fs::write(records_dir.join(name), text).unwrap();
    }
}

pub fn fixture_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join("table1")
}

// ---- planted-duplicate corpus ----

pub struct PlantedCorpus {
    /// Record documents, ids 0..total-1.
    pub docs: Vec<Doc>,
    /// Canonical (low, high) id pairs that are true duplicates.
    pub plant: Vec<(u64, u64)>,
}

const PLANT_VENDORS: [&str; 10] = [
    "ABB",
    "Fanuc",
    "Vecna",
    "KUKA",
    "Universal Robots",
    "SoftBank Robotics",
    "UBTech Robotics",
    "PAL Robotics",
    "Rethink Robotics",
    "WowWee",
];

fn flip_case(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_uppercase() {
                c.to_ascii_lowercase()
            } else {
                c.to_ascii_uppercase()
            }
        })
        .collect()
}

fn swap_adjacent_tokens(s: &str, rng: &mut SplitMix64) -> String {
    let mut words: Vec<&str> = s.split(' ').collect();
    if words.len() >= 2 {
        let i = rng.below(words.len() - 1);
        words.swap(i, i + 1);
    }
    words.join(" ")
}

fn flip_separators(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '_' => '-',
            '-' => '_',
            other => other,
        })
        .collect()
}

struct BaseRecord {
    title: String,
    description: String,
    vendor: String,
    system: String,
    cve: String,
    keywords: Vec<String>,
}

const EFFECTS: [&str; 8] = [
    "causing watchdog resets",
    "leaking joint telemetry",
    "halting the safety chain",
    "corrupting the costmap",
    "dropping emergency stops",
    "exposing the debug port",
    "skipping torque limits",
    "stalling the control loop",
];

const TRIGGERS: [&str; 8] = [
    "malformed discovery packets",
    "oversized goal messages",
    "truncated calibration files",
    "spoofed parameter updates",
    "replayed joystick frames",
    "unsigned firmware blobs",
    "crafted mesh resources",
    "concurrent service calls",
];

/// Base-record content is an injective function of the serial, so no two
/// distinct records are textual near-copies; only the planted twins are.
fn base_record(rng: &mut SplitMix64, serial: usize) -> BaseRecord {
    let issue = ISSUES[serial % ISSUES.len()];
    let component = COMPONENTS[(serial / 10) % COMPONENTS.len()];
    let effect = EFFECTS[(serial / 120) % EFFECTS.len()];
    let trigger = TRIGGERS[(serial / 960) % TRIGGERS.len()];
    let vendor = PLANT_VENDORS[serial % PLANT_VENDORS.len()];
    // `#{serial}` tokenizes to the digits alone, so titles share no
    // corpus-wide blocking token.
    let title = format!("{issue} in {component} {effect} #{serial}");
    let description = format!(
        "{issue} triggered in {component} by {trigger}, {effect}; \
         first seen on assessment unit {serial}."
    );
    let cve = if rng.chance(0.5) {
        format!("CVE-2020-{}", 20_000 + serial)
    } else {
        "None".to_string()
    };
    let mut keywords: Vec<String> = vec![
        KEYWORD_POOL[serial % KEYWORD_POOL.len()].to_string(),
        KEYWORD_POOL[(serial / 8 + 3) % KEYWORD_POOL.len()].to_string(),
    ];
    keywords.dedup();
    BaseRecord {
        title,
        description,
        vendor: vendor.to_string(),
        system: component.to_string(),
        cve,
        keywords,
    }
}

/// Perturbed twin: token swaps, hyphen/underscore flips, vendor casing.
fn twin_record(base: &BaseRecord, rng: &mut SplitMix64) -> BaseRecord {
    let title = if rng.chance(0.5) {
        swap_adjacent_tokens(&base.title, rng)
    } else {
        flip_separators(&base.title)
    };
    let description = swap_adjacent_tokens(&base.description, rng);
    let vendor = if rng.chance(0.7) {
        flip_case(&base.vendor)
    } else {
        base.vendor.clone()
    };
    let system = if rng.chance(0.5) {
        flip_separators(&base.system)
    } else {
        base.system.clone()
    };
    // The second report of the same flaw often arrives without the CVE.
    let cve = if rng.chance(0.5) {
        base.cve.clone()
    } else {
        "None".to_string()
    };
    BaseRecord {
        title,
        description,
        vendor,
        system,
        cve,
        keywords: base.keywords.clone(),
    }
}

fn base_to_doc(id: u64, base: &BaseRecord) -> Doc {
    let mut d = Doc::new();
    d.insert("id", Value::Int(id as i64));
    d.insert("title", scalar(&base.title));
    d.insert("description", scalar(&base.description));
    d.insert("vendor", scalar(&base.vendor));
    d.insert("system", scalar(&base.system));
    d.insert("cve", scalar(&base.cve));
    d.insert(
        "keywords",
        Value::List(base.keywords.iter().map(|k| scalar(k)).collect()),
    );
    let mut sev = Doc::new();
    sev.insert("rvss-score", scalar("None"));
    sev.insert("rvss-vector", scalar("None"));
    sev.insert("severity-description", scalar(""));
    d.insert("severity", Value::Map(sev));
    d.insert("flaw", Value::Map(Doc::new()));
    d.insert("mitigation", Value::Map(Doc::new()));
    d
}

/// Generates `total` records with `pairs` planted near-duplicate pairs at
/// ids (10i, 10i+1); everything else is a singleton. Deterministic in the
/// seed.
pub fn planted_corpus(seed: u64, total: usize, pairs: usize) -> PlantedCorpus {
    assert!(pairs * 10 <= total, "pair ids would overflow the corpus");
    let mut rng = SplitMix64(seed);
    let mut docs: Vec<Option<Doc>> = vec![None; total];
    let mut plant = Vec::new();
    for i in 0..pairs {
        let a = (10 * i) as u64;
        let b = a + 1;
        let base = base_record(&mut rng, 10 * i);
        let twin = twin_record(&base, &mut rng);
        docs[a as usize] = Some(base_to_doc(a, &base));
        docs[b as usize] = Some(base_to_doc(b, &twin));
        plant.push((a, b));
    }
    let mut serial = 1000usize;
    for (id, slot) in docs.iter_mut().enumerate() {
        if slot.is_none() {
            let base = base_record(&mut rng, serial);
            *slot = Some(base_to_doc(id as u64, &base));
            serial += 1;
        }
    }
    PlantedCorpus {
        docs: docs.into_iter().map(Option::unwrap).collect(),
        plant,
    }
}
