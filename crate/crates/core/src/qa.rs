//! Extractive comprehension samples built from generated dialogues.
//!
//! Each fact becomes a question whose answer is a token span of the
//! tokenized dialogue; each absent (symptom, attribute) pair becomes a
//! No-Answer question. Splits are dialogue-disjoint and low-resource
//! training subsets are nested prefixes of one seeded shuffle.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{render, split_words, tokenize, Dialogue, DialogueError};
use crate::seed::{rng_from_seed, stable_hash_str};
use crate::synth::{AttributeKind, GroundTruth};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QaError {
    #[error("ground truth for {truth:?} does not belong to dialogue {dialogue:?}")]
    DialogueMismatch { dialogue: String, truth: String },
    #[error("dialogue {dialogue:?}: fact {fact} span does not align with token boundaries")]
    SpanAlignment { dialogue: String, fact: usize },
    #[error("not enough data: need {needed} samples, only {available} available")]
    InsufficientData { needed: usize, available: usize },
    #[error("ladder size {largest} exceeds training split of {available}")]
    LadderTooLarge { largest: usize, available: usize },
    #[error("ladder sizes must be strictly increasing and non-zero")]
    InvalidLadder,
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Inclusive token indices into the tokenized dialogue stream.
    pub start_token: usize,
    pub end_token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSample {
    pub id: String,
    pub dialogue_id: String,
    pub question: String,
    pub symptom: String,
    pub attribute: AttributeKind,
    /// `None` is the No-Answer case.
    pub answer: Option<Answer>,
}

/// Question wording per attribute; one paraphrase is picked per
/// (dialogue, symptom, attribute) from `seed`.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuestionTemplates {
    pub seed: u64,
}

impl QuestionTemplates {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn paraphrases(attr: AttributeKind) -> [&'static str; 3] {
        match attr {
            AttributeKind::Time => [
                "How long have you experienced {symptom}?",
                "When did the {symptom} start?",
                "Since when have you had the {symptom}?",
            ],
            AttributeKind::Activities => [
                "What activities trigger the {symptom}?",
                "When does the {symptom} get worse?",
                "What brings on the {symptom}?",
            ],
            AttributeKind::Extent => [
                "What is the extent of the {symptom}?",
                "How severe is the {symptom}?",
                "How bad is the {symptom}?",
            ],
            AttributeKind::Frequency => [
                "How frequently did you experience {symptom}?",
                "How often does the {symptom} occur?",
                "How many times do you get the {symptom}?",
            ],
            AttributeKind::Location => [
                "Where is the {symptom} located?",
                "Where do you feel the {symptom}?",
                "Which part is affected by the {symptom}?",
            ],
        }
    }

    pub fn question(&self, dialogue_id: &str, symptom: &str, attr: AttributeKind) -> String {
        let key = format!("{dialogue_id}\u{1f}{symptom}\u{1f}{attr}");
        let pick = (stable_hash_str(self.seed, &key) % 3) as usize;
        Self::paraphrases(attr)[pick].replace("{symptom}", symptom)
    }
}

/// One positive sample per fact, then one No-Answer sample per absent pair.
pub fn build_qa(d: &Dialogue, gt: &GroundTruth, templates: &QuestionTemplates) -> Result<Vec<QaSample>, QaError> {
    if gt.dialogue_id != d.id {
        return Err(QaError::DialogueMismatch {
            dialogue: d.id.clone(),
            truth: gt.dialogue_id.clone(),
        });
    }
    let t = tokenize(d)?;
    let spans = t.utterance_spans();
    let mut out = Vec::with_capacity(gt.facts.len() + gt.absent.len());
    for (i, f) in gt.facts.iter().enumerate() {
        let misaligned = || QaError::SpanAlignment {
            dialogue: d.id.clone(),
            fact: i,
        };
        let utt = d.utterances.get(f.utt_index).ok_or_else(misaligned)?;
        let words = split_words(&utt.text);
        let first = words.iter().position(|w| w.char_start == f.char_span.0);
        let last = words.iter().position(|w| w.char_end == f.char_span.1);
        let (Some(first), Some(last)) = (first, last) else {
            return Err(misaligned());
        };
        if last < first {
            return Err(misaligned());
        }
        // content tokens follow the boundary and speaker tokens
        let base = spans[f.utt_index].0 + 2;
        let (start_token, end_token) = (base + first, base + last);
        let text = render(&t.tokens[start_token..=end_token]);
        if text != f.entity {
            return Err(misaligned());
        }
        out.push(QaSample {
            id: String::new(),
            dialogue_id: d.id.clone(),
            question: templates.question(&d.id, &f.symptom, f.attribute),
            symptom: f.symptom.clone(),
            attribute: f.attribute,
            answer: Some(Answer {
                text,
                start_token,
                end_token,
            }),
        });
    }
    for a in &gt.absent {
        out.push(QaSample {
            id: String::new(),
            dialogue_id: d.id.clone(),
            question: templates.question(&d.id, &a.symptom, a.attribute),
            symptom: a.symptom.clone(),
            attribute: a.attribute,
            answer: None,
        });
    }
    for (k, s) in out.iter_mut().enumerate() {
        s.id = format!("{}-q{k:02}", d.id);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 40_000,
            val: 3_000,
            test: 3_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<QaSample>,
    pub val: Vec<QaSample>,
    pub test: Vec<QaSample>,
}

/// Dialogue-disjoint partition with exact sample counts.
///
/// Dialogues are shuffled by `spec.seed` and dealt to train, then val,
/// then test. The dialogue that crosses a split's quota is cut there; its
/// remaining samples are dropped rather than moved to the next split.
pub fn make_splits(samples: Vec<QaSample>, spec: &SplitSpec) -> Result<Splits, QaError> {
    let available = samples.len();
    let needed = spec.train + spec.val + spec.test;
    if available < needed {
        return Err(QaError::InsufficientData { needed, available });
    }
    let mut by_dialogue: BTreeMap<String, Vec<QaSample>> = BTreeMap::new();
    for s in samples {
        by_dialogue.entry(s.dialogue_id.clone()).or_default().push(s);
    }
    let mut groups: Vec<Vec<QaSample>> = by_dialogue.into_values().collect();
    groups.shuffle(&mut rng_from_seed(spec.seed));

    let mut splits = Splits::default();
    let mut groups = groups.into_iter();
    let mut placed = 0;
    for (target, quota) in [
        (&mut splits.train, spec.train),
        (&mut splits.val, spec.val),
        (&mut splits.test, spec.test),
    ] {
        while target.len() < quota {
            let Some(mut g) = groups.next() else {
                return Err(QaError::InsufficientData {
                    needed,
                    available: placed + target.len(),
                });
            };
            g.truncate(quota - target.len());
            target.extend(g);
        }
        placed += quota;
    }
    Ok(splits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetLadder {
    pub sizes: Vec<usize>,
}

impl Default for SubsetLadder {
    fn default() -> Self {
        Self {
            sizes: vec![3_000, 5_000, 10_000, 20_000, 30_000, 40_000],
        }
    }
}

/// Nested training subsets: prefixes of a single shuffle of `train`.
pub fn subsample_train(train: &[QaSample], ladder: &SubsetLadder, seed: u64) -> Result<Vec<Vec<QaSample>>, QaError> {
    if ladder.sizes.first() == Some(&0) || ladder.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(QaError::InvalidLadder);
    }
    if let Some(&largest) = ladder.sizes.last() {
        if largest > train.len() {
            return Err(QaError::LadderTooLarge {
                largest,
                available: train.len(),
            });
        }
    }
    let mut order: Vec<&QaSample> = train.iter().collect();
    order.shuffle(&mut rng_from_seed(seed));
    Ok(ladder
        .sizes
        .iter()
        .map(|&n| order[..n].iter().map(|s| (*s).clone()).collect())
        .collect())
}
