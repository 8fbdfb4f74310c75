//! Planted-topic corpus generator.
//!
//! Documents are drawn period by period from known topic term distributions,
//! so the topic posterior of every term in every cumulative window is known
//! in advance. Two marker terms are planted: `drift signal`, whose topic
//! moves to a new topic each period with growing weight, and
//! `stable signal`, which stays in the last topic at a fixed weight.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Content, Dictionary, Document, WindowPlan};

pub const DRIFT_TERM: &str = "drift signal";
pub const STABLE_TERM: &str = "stable signal";

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub topics: usize,
    pub anchors_per_topic: usize,
    pub background_terms: usize,
    pub periods: usize,
    pub docs_per_period: usize,
    pub doc_len: usize,
    /// Drift weight in the period-`m` topic is `drift_base * drift_growth^m`.
    pub drift_base: f64,
    pub drift_growth: f64,
    pub stable_weight: f64,
    /// Emit text documents instead of pre-counted ones.
    pub as_text: bool,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            topics: 5,
            anchors_per_topic: 18,
            background_terms: 8,
            periods: 4,
            docs_per_period: 100,
            doc_len: 80,
            drift_base: 0.02,
            drift_growth: 3.0,
            stable_weight: 0.08,
            as_text: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub docs: Vec<Document>,
    pub dictionary: Dictionary,
    pub plan: WindowPlan,
    /// Generative `P(topic | drift term)` per cumulative window.
    pub drift_posterior: Vec<Vec<f64>>,
    pub stable_posterior: Vec<Vec<f64>>,
}

impl PlantedSpec {
    fn drift_topic(&self, period: usize) -> usize {
        period % self.topics
    }

    fn drift_weight(&self, period: usize) -> f64 {
        self.drift_base * self.drift_growth.powi(period as i32)
    }

    fn stable_topic(&self) -> usize {
        self.topics - 1
    }
}

fn term_names(spec: &PlantedSpec) -> Vec<String> {
    let mut names = Vec::new();
    for t in 0..spec.topics {
        for j in 0..spec.anchors_per_topic {
            names.push(format!("t{t}w{j:02}"));
        }
    }
    // "signal" overlaps the marker terms to exercise longest-match scanning
    names.push("signal".to_string());
    for j in 1..spec.background_terms {
        names.push(format!("common{j}"));
    }
    names.push(DRIFT_TERM.to_string());
    names.push(STABLE_TERM.to_string());
    names
}

/// Expected per-window posterior of a marker term: token mass contributed by
/// each topic's documents up to that window, normalized.
fn planted_posterior(spec: &PlantedSpec, topic_docs: &[Vec<usize>], weight: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..spec.periods)
        .map(|m| {
            let mut mass = vec![0.0; spec.topics];
            for period in 0..=m {
                for (t, slot) in mass.iter_mut().enumerate() {
                    *slot += topic_docs[period][t] as f64 * weight(period, t);
                }
            }
            let total: f64 = mass.iter().sum();
            mass.iter().map(|v| v / total).collect()
        })
        .collect()
}

pub fn generate(spec: &PlantedSpec) -> PlantedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names = term_names(spec);
    let p = names.len();
    let drift = p - 2;
    let stable = p - 1;
    let background_start = spec.topics * spec.anchors_per_topic;

    // base topic weights: own anchors plus light shared background
    let base: Vec<Vec<f64>> = (0..spec.topics)
        .map(|t| {
            let mut w = vec![0.0; p];
            for j in 0..spec.anchors_per_topic {
                w[t * spec.anchors_per_topic + j] = rng.random_range(1.0..3.0);
            }
            w[background_start..drift].fill(0.3);
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= sum);
            w
        })
        .collect();

    let marker_weight = |period: usize, t: usize, term: usize| -> f64 {
        if term == drift && t == spec.drift_topic(period) {
            spec.drift_weight(period)
        } else if term == stable && t == spec.stable_topic() {
            spec.stable_weight
        } else {
            0.0
        }
    };

    let mut docs = Vec::new();
    let mut topic_docs = vec![vec![0usize; spec.topics]; spec.periods];
    for period in 0..spec.periods {
        let samplers: Vec<WeightedIndex<f64>> = (0..spec.topics)
            .map(|t| {
                let extra = marker_weight(period, t, drift) + marker_weight(period, t, stable);
                let mut w: Vec<f64> = base[t].iter().map(|v| v * (1.0 - extra)).collect();
                w[drift] = marker_weight(period, t, drift);
                w[stable] = marker_weight(period, t, stable);
                WeightedIndex::new(&w).expect("positive weights")
            })
            .collect();
        let year = 2013 + period as i32;
        for j in 0..spec.docs_per_period {
            let topic = j % spec.topics;
            topic_docs[period][topic] += 1;
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            let mut words = Vec::with_capacity(spec.doc_len);
            for _ in 0..spec.doc_len {
                let term = samplers[topic].sample(&mut rng);
                if spec.as_text {
                    words.push(names[term].as_str());
                } else {
                    *counts.entry(names[term].clone()).or_insert(0) += 1;
                }
            }
            let day = rng.random_range(1..=365);
            let date = NaiveDate::from_yo_opt(year, day).expect("valid ordinal");
            let content = if spec.as_text {
                Content::Text(words.join(" "))
            } else {
                Content::Counts(counts)
            };
            docs.push(Document {
                id: format!("p{period}-d{j:04}"),
                date,
                content,
            });
        }
    }
    docs.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));

    let boundaries = (0..spec.periods)
        .map(|m| NaiveDate::from_ymd_opt(2013 + m as i32, 12, 31).expect("valid date"))
        .collect();
    let plan = WindowPlan::from_cutoffs(boundaries).expect("ascending cutoffs");
    let drift_posterior = planted_posterior(spec, &topic_docs, |period, t| marker_weight(period, t, drift));
    let stable_posterior = planted_posterior(spec, &topic_docs, |period, t| marker_weight(period, t, stable));
    PlantedCorpus {
        docs,
        dictionary: Dictionary::new(&names).expect("unique names"),
        plan,
        drift_posterior,
        stable_posterior,
    }
}
