//! SQuAD-style answer scoring and max-product span decoding.
//!
//! Probability vectors are indexed by position in the tokenized dialogue
//! stream. Position 0 is always the leading `<u>` and never part of an
//! answer, so it is reserved for the No-Answer score.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::dialogue::{render, TokenizedDialogue};
use crate::qa::QaSample;
use crate::synth::{ratio_2dp, AttributeKind};

pub const DEFAULT_MAX_SPAN_LEN: usize = 30;

/// Fixed-point scale for per-question F1 so corpus sums are exact integers.
const F1_SCALE: u128 = 1_000_000_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{qa_id}: p_start has {start} entries but p_end has {end}")]
    LengthMismatch { qa_id: String, start: usize, end: usize },
    #[error("{qa_id}: {len} probabilities for a dialogue of {tokens} tokens")]
    StreamMismatch { qa_id: String, len: usize, tokens: usize },
    #[error("{qa_id}: empty probability vectors")]
    EmptyDistribution { qa_id: String },
    #[error("{qa_id}: probability at position {pos} is {value}, expected a value in [0, 1]")]
    InvalidProbability { qa_id: String, pos: usize, value: f64 },
    #[error("max_span_len must be at least 1")]
    InvalidSpanLength,
    #[error("more than one prediction for {qa_id}")]
    DuplicatePrediction { qa_id: String },
    #[error("prediction for unknown question {qa_id}")]
    UnknownQuestion { qa_id: String },
}

static ARTICLES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(a|an|the)\b").expect("valid regex"));

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let no_punct: String = lower.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    let no_articles = ARTICLES.replace_all(&no_punct, " ");
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn exact_match(pred: Option<&str>, gold: Option<&str>) -> bool {
    match (pred, gold) {
        (None, None) => true,
        (Some(p), Some(g)) => normalize_answer(p) == normalize_answer(g),
        _ => false,
    }
}

/// Token F1 as the fraction `2 * overlap / (|pred| + |gold|)`.
fn f1_fraction(pred: Option<&str>, gold: Option<&str>) -> (u64, u64) {
    let (p, g) = match (pred, gold) {
        (None, None) => return (1, 1),
        (Some(p), Some(g)) => (normalize_answer(p), normalize_answer(g)),
        _ => return (0, 1),
    };
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    if pt.is_empty() || gt.is_empty() {
        return (u64::from(pt == gt), 1);
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in &gt {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0u64;
    for t in &pt {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    (2 * overlap, (pt.len() + gt.len()) as u64)
}

pub fn token_f1(pred: Option<&str>, gold: Option<&str>) -> f64 {
    let (n, d) = f1_fraction(pred, gold);
    n as f64 / d as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbRecord {
    pub qa_id: String,
    pub p_start: Vec<f64>,
    pub p_end: Vec<f64>,
}

impl ProbRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.p_start.len() != self.p_end.len() {
            return Err(EvalError::LengthMismatch {
                qa_id: self.qa_id.clone(),
                start: self.p_start.len(),
                end: self.p_end.len(),
            });
        }
        if self.p_start.is_empty() {
            return Err(EvalError::EmptyDistribution {
                qa_id: self.qa_id.clone(),
            });
        }
        for v in [&self.p_start, &self.p_end] {
            if let Some((pos, &value)) = v.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
                return Err(EvalError::InvalidProbability {
                    qa_id: self.qa_id.clone(),
                    pos,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Inclusive span maximizing `p_start[i] * p_end[j]` over
/// `1 <= i <= j < n`, `j - i + 1 <= max_span_len`. Ties go to the smaller
/// `i`, then the smaller `j`. `None` when the No-Answer product
/// `p_start[0] * p_end[0]` is strictly larger, or no span exists.
pub fn decode_span(r: &ProbRecord, max_span_len: usize) -> Result<Option<(usize, usize)>, EvalError> {
    if max_span_len == 0 {
        return Err(EvalError::InvalidSpanLength);
    }
    r.validate()?;
    let (ps, pe) = (&r.p_start, &r.p_end);
    // window maximum of p_start over i in [j - L + 1, j]; the front holds
    // the earliest index among equal maxima
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut best: Option<(f64, usize, usize)> = None;
    for j in 1..ps.len() {
        while window.back().is_some_and(|&b| ps[b] < ps[j]) {
            window.pop_back();
        }
        window.push_back(j);
        while window.front().is_some_and(|&f| f + max_span_len <= j) {
            window.pop_front();
        }
        let i = window[0];
        let score = ps[i] * pe[j];
        let better = match best {
            None => true,
            Some((b, bi, _)) => score > b || (score == b && i < bi),
        };
        if better {
            best = Some((score, i, j));
        }
    }
    Ok(best.and_then(|(b, i, j)| (ps[0] * pe[0] <= b).then_some((i, j))))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub qa_id: String,
    pub answer_text: Option<String>,
    /// Decoded token span; kept in memory only.
    #[serde(skip)]
    pub span: Option<(usize, usize)>,
}

/// Decodes `r` against the dialogue it was computed on.
pub fn predict(r: &ProbRecord, t: &TokenizedDialogue, max_span_len: usize) -> Result<Prediction, EvalError> {
    if r.p_start.len() != t.len() {
        return Err(EvalError::StreamMismatch {
            qa_id: r.qa_id.clone(),
            len: r.p_start.len(),
            tokens: t.len(),
        });
    }
    let span = decode_span(r, max_span_len)?;
    Ok(Prediction {
        qa_id: r.qa_id.clone(),
        answer_text: span.map(|(i, j)| render(&t.tokens[i..=j])),
        span,
    })
}

/// A percentage with two decimals, written to JSON as e.g. `92.31`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Percent(pub f64);

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("{:.2}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Percent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScore {
    pub em: Percent,
    pub f1: Percent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub em: Percent,
    pub f1: Percent,
    pub n: u64,
    pub per_attribute: BTreeMap<AttributeKind, AttributeScore>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    n: u64,
    em: u64,
    f1: u128,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            n: self.n + o.n,
            em: self.em + o.em,
            f1: self.f1 + o.f1,
        }
    }

    fn percents(&self) -> (Percent, Percent) {
        if self.n == 0 {
            return (Percent(0.0), Percent(0.0));
        }
        let den = u128::from(self.n) * F1_SCALE;
        let f1 = (self.f1 * 20_000 + den) / (2 * den);
        (Percent(ratio_2dp(self.em * 100, self.n)), Percent(f1 as f64 / 100.0))
    }
}

/// Mean EM and F1 over every gold question, as percentages rounded
/// half-up to two decimals. Gold questions without a prediction score 0.
pub fn score_corpus(preds: &[Prediction], gold: &[QaSample]) -> Result<ScoreReport, EvalError> {
    let gold_ids: HashMap<&str, &QaSample> = gold.iter().map(|g| (g.id.as_str(), g)).collect();
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(preds.len());
    for p in preds {
        if !gold_ids.contains_key(p.qa_id.as_str()) {
            return Err(EvalError::UnknownQuestion { qa_id: p.qa_id.clone() });
        }
        if by_id.insert(&p.qa_id, p).is_some() {
            return Err(EvalError::DuplicatePrediction { qa_id: p.qa_id.clone() });
        }
    }
    let per: BTreeMap<AttributeKind, Tally> = gold
        .par_iter()
        .map(|g| {
            let gold_text = g.answer.as_ref().map(|a| a.text.as_str());
            let (em, (num, den)) = match by_id.get(g.id.as_str()) {
                Some(p) => {
                    let pred_text = p.answer_text.as_deref();
                    (exact_match(pred_text, gold_text), f1_fraction(pred_text, gold_text))
                }
                None => (false, (0, 1)),
            };
            let f1 = (u128::from(num) * F1_SCALE * 2 + u128::from(den)) / (2 * u128::from(den));
            let mut m = BTreeMap::new();
            m.insert(g.attribute, Tally { n: 1, em: u64::from(em), f1 });
            m
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                let e = a.entry(k).or_default();
                *e = e.merge(v);
            }
            a
        });
    let total = per.values().fold(Tally::default(), |a, b| a.merge(*b));
    let (em, f1) = total.percents();
    Ok(ScoreReport {
        em,
        f1,
        n: total.n,
        per_attribute: per
            .into_iter()
            .map(|(k, t)| {
                let (em, f1) = t.percents();
                (k, AttributeScore { em, f1 })
            })
            .collect(),
    })
}
