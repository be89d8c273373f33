//! Duplicate detection: symmetric pairwise similarity features, an
//! L2-regularized logistic regression trained by full-batch gradient
//! descent, and uncertainty-sampling query selection for the
//! human-in-the-loop labeling session.
//!
//! Training starts from zero weights and runs a fixed number of epochs, so
//! a model is a pure function of the labeled pairs and hyperparameters;
//! the recorded seed is provenance metadata. Candidate generation blocks
//! on shared vendor, shared CVE, or a shared title token, with an
//! all-pairs fallback for small corpora.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::record::{FlawRecord, TextOrList};

/// Feature names, in vector order.
pub const FEATURE_NAMES: [&str; 7] = [
    "title_similarity",
    "description_similarity",
    "vendor_equality",
    "system_similarity",
    "cwe_equality",
    "cve_equality",
    "keyword_jaccard",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

/// Symmetric similarity features for a record pair; every component is in
/// [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures {
    pub title_similarity: f64,
    pub description_similarity: f64,
    pub vendor_equality: f64,
    pub system_similarity: f64,
    pub cwe_equality: f64,
    pub cve_equality: f64,
    pub keyword_jaccard: f64,
}

impl PairFeatures {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.title_similarity,
            self.description_similarity,
            self.vendor_equality,
            self.system_similarity,
            self.cwe_equality,
            self.cve_equality,
            self.keyword_jaccard,
        ]
    }

    pub fn from_array(values: [f64; FEATURE_COUNT]) -> PairFeatures {
        PairFeatures {
            title_similarity: values[0],
            description_similarity: values[1],
            vendor_equality: values[2],
            system_similarity: values[3],
            cwe_equality: values[4],
            cve_equality: values[5],
            keyword_jaccard: values[6],
        }
    }
}

// ---- text similarity ----

/// Lowercased alphanumeric tokens; separators are any other characters, so
/// `ros_comm`, `ros-comm`, and `ROS COMM` all tokenize identically.
pub fn tokens(text: &str) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            set.insert(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        set.insert(current);
    }
    set
}

/// Jaccard similarity of two sets; two empty sets count as identical.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    intersection as f64 / union as f64
}

/// Levenshtein distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut previous: Vec<usize> = (0..=b.len()).collect();
    let mut current = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = previous[j] + usize::from(ca != cb);
            current[j + 1] = substitution.min(previous[j + 1] + 1).min(current[j] + 1);
        }
        core::mem::swap(&mut previous, &mut current);
    }
    previous[b.len()]
}

/// `1 - distance / max_len` on lowercased input; empty-vs-empty is 1.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let a = a.to_lowercase();
    let b = b.to_lowercase();
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / longest as f64
}

/// Text similarity: the larger of token-set Jaccard and normalized edit
/// similarity.
pub fn text_similarity(a: &str, b: &str) -> f64 {
    let token_sim = jaccard(&tokens(a), &tokens(b));
    let edit_sim = edit_similarity(a, b);
    if token_sim > edit_sim {
        token_sim
    } else {
        edit_sim
    }
}

fn keyword_tokens(keywords: &TextOrList) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    for item in keywords.items() {
        set.extend(tokens(item));
    }
    set
}

fn equality(a: &str, b: &str) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Computes the symmetric feature vector for a record pair. Vendor equality
/// is case-insensitive (and two unknown vendors compare equal); CVE
/// equality counts only when both sides carry a real identifier.
pub fn featurize_pair(a: &FlawRecord, b: &FlawRecord) -> PairFeatures {
    let vendor_equality = match (&a.vendor, &b.vendor) {
        (None, None) => 1.0,
        (Some(va), Some(vb)) => equality(&va.to_lowercase(), &vb.to_lowercase()),
        _ => 0.0,
    };
    let cve_equality = if a.cve != "None" && b.cve != "None" {
        equality(&a.cve, &b.cve)
    } else {
        0.0
    };
    PairFeatures {
        title_similarity: text_similarity(&a.title, &b.title),
        description_similarity: text_similarity(&a.description, &b.description),
        vendor_equality,
        system_similarity: text_similarity(&a.system, &b.system),
        cwe_equality: equality(&a.cwe, &b.cwe),
        cve_equality,
        keyword_jaccard: jaccard(&keyword_tokens(&a.keywords), &keyword_tokens(&b.keywords)),
    }
}

// ---- model ----

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Hyperparameters {
        Hyperparameters {
            lambda: 0.01,
            learning_rate: 0.1,
            epochs: 500,
            seed: 0,
        }
    }
}

/// Default decision threshold for calling a pair a duplicate.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Trained classifier weights plus the hyperparameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DedupModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub seed: u64,
    pub epochs: u32,
    pub learning_rate: f64,
}

impl DedupModel {
    /// The zero model: predicts 0.5 for every pair.
    pub fn zero() -> DedupModel {
        DedupModel {
            weights: alloc::vec![0.0; FEATURE_COUNT],
            bias: 0.0,
            lambda: Hyperparameters::default().lambda,
            seed: 0,
            epochs: 0,
            learning_rate: Hyperparameters::default().learning_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Duplicate,
    Distinct,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Duplicate => "duplicate",
            Label::Distinct => "distinct",
        }
    }

    pub fn from_name(s: &str) -> Option<Label> {
        match s {
            "duplicate" => Some(Label::Duplicate),
            "distinct" => Some(Label::Distinct),
            _ => None,
        }
    }

    fn target(&self) -> f64 {
        match self {
            Label::Duplicate => 1.0,
            Label::Distinct => 0.0,
        }
    }
}

/// A human-labeled training pair; ids are stored in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub record_id_a: u64,
    pub record_id_b: u64,
    pub features: PairFeatures,
    pub label: Label,
    pub labeler: String,
}

impl LabeledPair {
    pub fn new(
        id_a: u64,
        id_b: u64,
        features: PairFeatures,
        label: Label,
        labeler: &str,
    ) -> LabeledPair {
        let (record_id_a, record_id_b) = if id_a <= id_b { (id_a, id_b) } else { (id_b, id_a) };
        LabeledPair {
            record_id_a,
            record_id_b,
            features,
            label,
            labeler: labeler.to_owned(),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// Numerically stable log(1 + e^z).
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

fn raw_score(weights: &[f64], bias: f64, features: &PairFeatures) -> f64 {
    weights
        .iter()
        .zip(features.to_array())
        .map(|(w, x)| w * x)
        .sum::<f64>()
        + bias
}

/// Mean logistic loss plus `(lambda/2) * ||weights||^2`; the bias is not
/// regularized.
pub fn regularized_loss(weights: &[f64], bias: f64, pairs: &[LabeledPair], lambda: f64) -> f64 {
    let n = pairs.len() as f64;
    let data_loss: f64 = pairs
        .iter()
        .map(|p| {
            let z = raw_score(weights, bias, &p.features);
            softplus(z) - p.label.target() * z
        })
        .sum();
    let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() * lambda / 2.0;
    data_loss / n + penalty
}

/// Analytic gradient of [`regularized_loss`] in `(weights, bias)`.
pub fn loss_gradient(
    weights: &[f64],
    bias: f64,
    pairs: &[LabeledPair],
    lambda: f64,
) -> (Vec<f64>, f64) {
    let n = pairs.len() as f64;
    let mut grad_w = alloc::vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for pair in pairs {
        let residual = sigmoid(raw_score(weights, bias, &pair.features)) - pair.label.target();
        for (g, x) in grad_w.iter_mut().zip(pair.features.to_array()) {
            *g += residual * x;
        }
        grad_b += residual;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + lambda * w;
    }
    (grad_w, grad_b / n)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("no labeled pairs to train on")]
    Empty,
    #[error("degenerate training data: every pair is labeled {0:?}; need both classes")]
    SingleClass(&'static str),
    #[error("hyperparameters must be finite, with learning_rate > 0, epochs > 0, lambda >= 0")]
    InvalidHyperparameters,
}

/// Fits the classifier: zero initialization, `epochs` full-batch gradient
/// steps. Deterministic given the pairs (in order) and hyperparameters.
pub fn train(pairs: &[LabeledPair], hyper: Hyperparameters) -> Result<DedupModel, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::Empty);
    }
    if pairs.iter().all(|p| p.label == Label::Duplicate) {
        return Err(TrainError::SingleClass("duplicate"));
    }
    if pairs.iter().all(|p| p.label == Label::Distinct) {
        return Err(TrainError::SingleClass("distinct"));
    }
    if !hyper.lambda.is_finite()
        || hyper.lambda < 0.0
        || !hyper.learning_rate.is_finite()
        || hyper.learning_rate <= 0.0
        || hyper.epochs == 0
    {
        return Err(TrainError::InvalidHyperparameters);
    }

    let mut weights = alloc::vec![0.0; FEATURE_COUNT];
    let mut bias = 0.0;
    for _ in 0..hyper.epochs {
        let (grad_w, grad_b) = loss_gradient(&weights, bias, pairs, hyper.lambda);
        for (w, g) in weights.iter_mut().zip(grad_w) {
            *w -= hyper.learning_rate * g;
        }
        bias -= hyper.learning_rate * grad_b;
    }
    Ok(DedupModel {
        weights,
        bias,
        lambda: hyper.lambda,
        seed: hyper.seed,
        epochs: hyper.epochs,
        learning_rate: hyper.learning_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PredictError {
    #[error("model has {model} weights but the feature vector has {features}")]
    LengthMismatch { model: usize, features: usize },
}

/// Duplicate probability for one pair: `sigmoid(weights . features + bias)`.
pub fn predict(model: &DedupModel, features: &PairFeatures) -> Result<f64, PredictError> {
    if model.weights.len() != FEATURE_COUNT {
        return Err(PredictError::LengthMismatch {
            model: model.weights.len(),
            features: FEATURE_COUNT,
        });
    }
    Ok(sigmoid(raw_score(&model.weights, model.bias, features)))
}

/// A candidate record pair with precomputed features; `id_a < id_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    pub id_a: u64,
    pub id_b: u64,
    pub features: PairFeatures,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("k must be positive")]
    ZeroK,
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// Uncertainty sampling: the `k` pairs whose predicted probability is
/// closest to 0.5, ties broken by canonical id order. Asking for more than
/// there are returns everything, still sorted by uncertainty.
pub fn select_queries(
    model: &DedupModel,
    unlabeled: &[CandidatePair],
    k: usize,
) -> Result<Vec<CandidatePair>, SelectError> {
    if k == 0 {
        return Err(SelectError::ZeroK);
    }
    let mut scored: Vec<(f64, &CandidatePair)> = unlabeled
        .iter()
        .map(|pair| {
            let p = predict(model, &pair.features)?;
            Ok((libm::fabs(p - 0.5), pair))
        })
        .collect::<Result<_, PredictError>>()?;
    scored.sort_by(|(ua, pa), (ub, pb)| {
        ua.partial_cmp(ub)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| (pa.id_a, pa.id_b).cmp(&(pb.id_a, pb.id_b)))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(_, pair)| pair.clone())
        .collect())
}

/// Minimum title-token length for the shared-token blocking key.
const TITLE_TOKEN_BLOCK_LEN: usize = 4;

/// Candidate generation. With `all_pairs` every pair is emitted; otherwise
/// two records pair up when they share a blocking key: the same (non-null,
/// case-folded) vendor, the same real CVE, or a title token of at least
/// four characters. Each pair appears once, in canonical order, sorted.
pub fn candidate_pairs(corpus: &[FlawRecord], all_pairs: bool) -> Vec<CandidatePair> {
    let mut ids: BTreeSet<(u64, u64)> = BTreeSet::new();
    if all_pairs {
        for (i, a) in corpus.iter().enumerate() {
            for b in &corpus[i + 1..] {
                if a.id != b.id {
                    ids.insert(canonical(a.id, b.id));
                }
            }
        }
    } else {
        let mut blocks: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for record in corpus {
            if let Some(vendor) = &record.vendor {
                blocks
                    .entry(format!("vendor\u{1f}{}", vendor.to_lowercase()))
                    .or_default()
                    .push(record.id);
            }
            if record.cve != "None" {
                blocks
                    .entry(format!("cve\u{1f}{}", record.cve))
                    .or_default()
                    .push(record.id);
            }
            for token in tokens(&record.title) {
                if token.chars().count() >= TITLE_TOKEN_BLOCK_LEN {
                    blocks
                        .entry(format!("title\u{1f}{token}"))
                        .or_default()
                        .push(record.id);
                }
            }
        }
        for members in blocks.values() {
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    if a != b {
                        ids.insert(canonical(a, b));
                    }
                }
            }
        }
    }

    let by_id: BTreeMap<u64, &FlawRecord> = corpus.iter().map(|r| (r.id, r)).collect();
    ids.into_iter()
        .map(|(id_a, id_b)| CandidatePair {
            id_a,
            id_b,
            features: featurize_pair(by_id[&id_a], by_id[&id_b]),
        })
        .collect()
}

fn canonical(a: u64, b: u64) -> (u64, u64) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A connected component of duplicate edges; the lowest member id is the
/// canonical record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateCluster {
    pub canonical_id: u64,
    pub members: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FindError {
    #[error("threshold must be strictly between 0 and 1")]
    BadThreshold,
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// Clusters the corpus: candidate pairs predicted at or above `threshold`
/// become edges, clusters are the connected components (singletons
/// included), each reporting its lowest id as canonical.
pub fn find_duplicates(
    corpus: &[FlawRecord],
    model: &DedupModel,
    threshold: f64,
    all_pairs: bool,
) -> Result<Vec<DuplicateCluster>, FindError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FindError::BadThreshold);
    }
    let ids: Vec<u64> = corpus.iter().map(|r| r.id).collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for pair in candidate_pairs(corpus, all_pairs) {
        if predict(model, &pair.features)? >= threshold {
            let a = find(&mut parent, index[&pair.id_a]);
            let b = find(&mut parent, index[&pair.id_b]);
            if a != b {
                // Union by id so the root is always the lowest member.
                if ids[a] < ids[b] {
                    parent[b] = a;
                } else {
                    parent[a] = b;
                }
            }
        }
    }

    let mut clusters: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for i in 0..ids.len() {
        let root = find(&mut parent, i);
        clusters.entry(ids[root]).or_default().push(ids[i]);
    }
    Ok(clusters
        .into_iter()
        .map(|(canonical_id, mut members)| {
            members.sort_unstable();
            DuplicateCluster {
                canonical_id,
                members,
            }
        })
        .collect())
}

// ---- model file format ----

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelFormatError {
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("line {0} is not `key: value`")]
    BadLine(usize),
    #[error("bad number in field {0:?}")]
    BadNumber(&'static str),
    #[error("model was trained with features {got:?}, expected {expected:?}")]
    FeatureMismatch { got: String, expected: String },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
}

/// Plain-text key-value model file; floats use the shortest exact decimal
/// form, so render/parse is lossless.
pub fn render_model(model: &DedupModel) -> String {
    let weights: Vec<String> = model.weights.iter().map(|w| format!("{w}")).collect();
    format!(
        "features: {}\nweights: {}\nbias: {}\nlambda: {}\nseed: {}\nepochs: {}\nlearning_rate: {}\n",
        FEATURE_NAMES.join(","),
        weights.join(" "),
        model.bias,
        model.lambda,
        model.seed,
        model.epochs,
        model.learning_rate
    )
}

pub fn parse_model(text: &str) -> Result<DedupModel, ModelFormatError> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or(ModelFormatError::BadLine(i + 1))?;
        fields.insert(key.trim(), value.trim());
    }
    let get = |name: &'static str| {
        fields
            .get(name)
            .copied()
            .ok_or(ModelFormatError::MissingField(name))
    };
    let expected = FEATURE_NAMES.join(",");
    let got = get("features")?;
    if got != expected {
        return Err(ModelFormatError::FeatureMismatch {
            got: got.to_owned(),
            expected,
        });
    }
    let weights: Vec<f64> = get("weights")?
        .split_whitespace()
        .map(|w| w.parse::<f64>().map_err(|_| ModelFormatError::BadNumber("weights")))
        .collect::<Result<_, _>>()?;
    if weights.len() != FEATURE_COUNT {
        return Err(ModelFormatError::WeightCount {
            expected: FEATURE_COUNT,
            got: weights.len(),
        });
    }
    let number = |name: &'static str| -> Result<f64, ModelFormatError> {
        get(name)?
            .parse::<f64>()
            .map_err(|_| ModelFormatError::BadNumber(name))
    };
    Ok(DedupModel {
        weights,
        bias: number("bias")?,
        lambda: number("lambda")?,
        seed: get("seed")?
            .parse::<u64>()
            .map_err(|_| ModelFormatError::BadNumber("seed"))?,
        epochs: get("epochs")?
            .parse::<u32>()
            .map_err(|_| ModelFormatError::BadNumber("epochs"))?,
        learning_rate: number("learning_rate")?,
    })
}

// ---- label log line format ----

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LabelLineError {
    #[error("expected `id_a,id_b,label,f1..f7,labeler`")]
    FieldCount,
    #[error("bad record id")]
    BadId,
    #[error("unknown label {0:?}")]
    BadLabel(String),
    #[error("bad feature value")]
    BadFeature,
}

/// One log line per labeled pair: ids, label, the seven features, then the
/// labeler (which may itself contain commas, so it comes last).
pub fn render_label_line(pair: &LabeledPair) -> String {
    let features: Vec<String> = pair.features.to_array().iter().map(|f| format!("{f}")).collect();
    format!(
        "{},{},{},{},{}",
        pair.record_id_a,
        pair.record_id_b,
        pair.label.as_str(),
        features.join(","),
        pair.labeler
    )
}

pub fn parse_label_line(line: &str) -> Result<LabeledPair, LabelLineError> {
    let fields: Vec<&str> = line.splitn(3 + FEATURE_COUNT + 1, ',').collect();
    if fields.len() != 3 + FEATURE_COUNT + 1 {
        return Err(LabelLineError::FieldCount);
    }
    let id_a: u64 = fields[0].parse().map_err(|_| LabelLineError::BadId)?;
    let id_b: u64 = fields[1].parse().map_err(|_| LabelLineError::BadId)?;
    let label =
        Label::from_name(fields[2]).ok_or_else(|| LabelLineError::BadLabel(fields[2].to_owned()))?;
    let mut values = [0.0; FEATURE_COUNT];
    for (slot, field) in values.iter_mut().zip(&fields[3..3 + FEATURE_COUNT]) {
        *slot = field.parse::<f64>().map_err(|_| LabelLineError::BadFeature)?;
    }
    Ok(LabeledPair::new(
        id_a,
        id_b,
        PairFeatures::from_array(values),
        label,
        fields[3 + FEATURE_COUNT],
    ))
}
