//! Documents, dictionaries, tokenization and cumulative document-term
//! matrices.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: invalid date {date:?}")]
    InvalidDate { line: usize, date: String },
    #[error("duplicate document id {id:?} on lines {first} and {second}")]
    DuplicateId {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("dictionary line {line}: duplicate term {term:?} (first seen on line {first})")]
    DuplicateTerm {
        term: String,
        line: usize,
        first: usize,
    },
    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("no documents to build a matrix from")]
    NoDocuments,
    #[error("invalid window plan: {0}")]
    InvalidPlan(String),
    #[error("window {label} contains no documents")]
    EmptyWindow { label: String },
}

/// Document body: raw text or a pre-counted term map.
#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Text(String),
    Counts(BTreeMap<String, u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub date: NaiveDate,
    pub content: Content,
}

/// Record layout expected on each corpus line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// `{"id", "date", "text"}`
    JsonlText,
    /// `{"id", "date", "counts"}`
    JsonlCounts,
    /// Accept either layout line by line.
    Auto,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    date: String,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    counts: Option<BTreeMap<String, u64>>,
}

/// Lowercase and collapse runs of whitespace to single spaces.
pub fn normalize_term(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Load a JSONL corpus. Blank lines are skipped; everything else must be a
/// record of the requested layout.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut docs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(&raw.date, DATE_FORMAT).map_err(|_| {
            CorpusError::InvalidDate {
                line: lineno,
                date: raw.date.clone(),
            }
        })?;
        let content = match (format, raw.text, raw.counts) {
            (CorpusFormat::JsonlText | CorpusFormat::Auto, Some(text), None) => Content::Text(text),
            (CorpusFormat::JsonlCounts | CorpusFormat::Auto, None, Some(counts)) => {
                Content::Counts(counts)
            }
            (_, Some(_), Some(_)) => {
                return Err(CorpusError::Malformed {
                    line: lineno,
                    message: "record has both \"text\" and \"counts\"".into(),
                })
            }
            (CorpusFormat::JsonlText, _, _) => {
                return Err(CorpusError::Malformed {
                    line: lineno,
                    message: "missing field \"text\"".into(),
                })
            }
            _ => {
                return Err(CorpusError::Malformed {
                    line: lineno,
                    message: "missing field \"counts\"".into(),
                })
            }
        };
        if let Some(&first) = seen.get(&raw.id) {
            return Err(CorpusError::DuplicateId {
                id: raw.id,
                first,
                second: lineno,
            });
        }
        seen.insert(raw.id.clone(), lineno);
        docs.push(Document {
            id: raw.id,
            date,
            content,
        });
    }
    Ok(docs)
}

/// Fixed, ordered vocabulary. Column `i` of every matrix is term `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    max_words: usize,
}

impl Dictionary {
    pub fn new<I, S>(terms: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        let mut index = HashMap::new();
        for (i, t) in terms.into_iter().enumerate() {
            let term = normalize_term(t.as_ref());
            if term.is_empty() {
                continue;
            }
            if let Some(&first) = index.get(&term) {
                return Err(CorpusError::DuplicateTerm {
                    term,
                    line: i + 1,
                    first: first + 1,
                });
            }
            index.insert(term.clone(), out.len());
            out.push(term);
        }
        if out.is_empty() {
            return Err(CorpusError::EmptyDictionary);
        }
        let max_words = out.iter().map(|t| t.split(' ').count()).max().unwrap_or(1);
        Ok(Self {
            terms: out,
            index,
            max_words,
        })
    }

    /// One term per line; blank lines are ignored.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut terms = Vec::new();
        let mut first_line: HashMap<String, usize> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let term = normalize_term(line);
            if term.is_empty() {
                continue;
            }
            if let Some(&first) = first_line.get(&term) {
                return Err(CorpusError::DuplicateTerm {
                    term,
                    line: i + 1,
                    first,
                });
            }
            first_line.insert(term.clone(), i + 1);
            terms.push(term);
        }
        Self::new(terms)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> Option<&str> {
        self.terms.get(i).map(String::as_str)
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

fn trim_token(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// Count dictionary terms in a document.
///
/// Text is lowercased and split on whitespace; punctuation at the edges of
/// each token is stripped. At each position the longest dictionary term is
/// consumed; tokens that start no term are dropped. Count documents are
/// filtered to dictionary terms.
pub fn tokenize(doc: &Document, dict: &Dictionary) -> BTreeMap<usize, u64> {
    let mut counts = BTreeMap::new();
    match &doc.content {
        Content::Counts(map) => {
            for (term, &c) in map {
                if c == 0 {
                    continue;
                }
                if let Some(i) = dict.index_of(&normalize_term(term)) {
                    *counts.entry(i).or_insert(0) += c;
                }
            }
        }
        Content::Text(text) => {
            let lowered = text.to_lowercase();
            let tokens: Vec<&str> = lowered
                .split_whitespace()
                .map(trim_token)
                .filter(|t| !t.is_empty())
                .collect();
            let mut pos = 0;
            let mut buf = String::new();
            while pos < tokens.len() {
                let longest = dict.max_words.min(tokens.len() - pos);
                let mut matched = None;
                for len in (1..=longest).rev() {
                    buf.clear();
                    for (j, tok) in tokens[pos..pos + len].iter().enumerate() {
                        if j > 0 {
                            buf.push(' ');
                        }
                        buf.push_str(tok);
                    }
                    if let Some(i) = dict.index_of(&buf) {
                        matched = Some((i, len));
                        break;
                    }
                }
                match matched {
                    Some((i, len)) => {
                        *counts.entry(i).or_insert(0) += 1;
                        pos += len;
                    }
                    None => pos += 1,
                }
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Raw,
    #[default]
    Tfidf,
}

impl std::str::FromStr for Weighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Self::Raw),
            "tfidf" => Ok(Self::Tfidf),
            other => Err(format!("unknown weighting {other:?} (expected raw or tfidf)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    pub values: Array2<f64>,
    pub doc_ids: Vec<String>,
    pub window_label: String,
}

impl DocTermMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Per-term document frequency from a count matrix.
pub fn document_frequency(counts: &Array2<f64>) -> Vec<usize> {
    counts
        .columns()
        .into_iter()
        .map(|col| col.iter().filter(|&&v| v > 0.0).count())
        .collect()
}

/// Build the `n x p` matrix for `docs`. With tf-idf weighting entry
/// `(d, i)` is `count(d, i) * ln(n / df_i)`; a term with no occurrences
/// keeps an all-zero column.
pub fn build_matrix(
    docs: &[&Document],
    dict: &Dictionary,
    weighting: Weighting,
    window_label: &str,
) -> Result<DocTermMatrix, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::NoDocuments);
    }
    let n = docs.len();
    let mut values = Array2::<f64>::zeros((n, dict.len()));
    for (d, doc) in docs.iter().enumerate() {
        for (i, c) in tokenize(doc, dict) {
            values[[d, i]] = c as f64;
        }
    }
    if weighting == Weighting::Tfidf {
        let df = document_frequency(&values);
        for (mut col, &df_i) in values.columns_mut().into_iter().zip(&df) {
            let idf = if df_i == 0 {
                0.0
            } else {
                (n as f64 / df_i as f64).ln()
            };
            col.mapv_inplace(|v| v * idf);
        }
    }
    Ok(DocTermMatrix {
        values,
        doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
        window_label: window_label.to_string(),
    })
}

/// Cumulative window cutoffs. Window `m` holds every document dated on or
/// before `boundaries[m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    boundaries: Vec<NaiveDate>,
    labels: Vec<String>,
}

impl WindowPlan {
    pub fn new(boundaries: Vec<NaiveDate>, labels: Vec<String>) -> Result<Self, CorpusError> {
        if boundaries.len() != labels.len() {
            return Err(CorpusError::InvalidPlan(format!(
                "{} boundaries but {} labels",
                boundaries.len(),
                labels.len()
            )));
        }
        if boundaries.len() < 2 {
            return Err(CorpusError::InvalidPlan(
                "at least two windows are required".into(),
            ));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CorpusError::InvalidPlan(
                "boundaries must be strictly ascending".into(),
            ));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CorpusError::InvalidPlan("window labels must be unique".into()));
        }
        Ok(Self { boundaries, labels })
    }

    /// Labels default to the `YYYY-MM-DD` cutoff.
    pub fn from_cutoffs(boundaries: Vec<NaiveDate>) -> Result<Self, CorpusError> {
        let labels = boundaries
            .iter()
            .map(|d| d.format(DATE_FORMAT).to_string())
            .collect();
        Self::new(boundaries, labels)
    }

    /// Parse a comma-separated list of `YYYY-MM-DD` cutoffs.
    pub fn parse_cutoffs(list: &str) -> Result<Self, CorpusError> {
        let dates = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                NaiveDate::parse_from_str(s, DATE_FORMAT)
                    .map_err(|_| CorpusError::InvalidPlan(format!("invalid cutoff date {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_cutoffs(dates)
    }

    pub fn boundaries(&self) -> &[NaiveDate] {
        &self.boundaries
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }
}

/// Split `docs` into nested cumulative windows, preserving corpus order
/// inside each window.
pub fn cumulative_windows<'a>(
    docs: &'a [Document],
    plan: &WindowPlan,
) -> Result<Vec<(String, Vec<&'a Document>)>, CorpusError> {
    plan.boundaries
        .iter()
        .zip(&plan.labels)
        .map(|(cutoff, label)| {
            let subset: Vec<&Document> = docs.iter().filter(|d| d.date <= *cutoff).collect();
            if subset.is_empty() {
                Err(CorpusError::EmptyWindow {
                    label: label.clone(),
                })
            } else {
                Ok((label.clone(), subset))
            }
        })
        .collect()
}
