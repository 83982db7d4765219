//! Template-driven generator of nurse/patient symptom-checking calls.
//!
//! Each dialogue is a greeting exchange, one block per sampled symptom
//! topic and a sign-off. Every attribute entity the patient states is
//! recorded with its exact character span; attributes deliberately left
//! unmentioned are recorded as absent.

mod phrases;
mod registry;
mod stats;

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{Dialogue, Speaker, Utterance};
use crate::seed::{rng_from_seed, stable_hash, SeededRng};

pub use registry::{SymptomTopic, TopicRegistry};
pub(crate) use stats::ratio_2dp;
pub use stats::{corpus_stats, CorpusStats, StatsAccumulator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("invalid topic registry: {0}")]
    Registry(String),
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Time,
    Activities,
    Extent,
    Frequency,
    Location,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 5] = [
        AttributeKind::Time,
        AttributeKind::Activities,
        AttributeKind::Extent,
        AttributeKind::Frequency,
        AttributeKind::Location,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::Time => "time",
            AttributeKind::Activities => "activities",
            AttributeKind::Extent => "extent",
            AttributeKind::Frequency => "frequency",
            AttributeKind::Location => "location",
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttributeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributeKind::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown attribute {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    /// Inclusive `[min, max]` number of symptom topics per dialogue.
    pub topics_per_dialogue: (u32, u32),
    /// Inclusive `[min, max]` number of turns in each topic block.
    pub turns_per_topic: (u32, u32),
    pub disfluency_rate: f64,
    /// Chance that a supported attribute is never mentioned.
    pub no_mention_rate: f64,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            topics_per_dialogue: (2, 4),
            turns_per_topic: (3, 5),
            disfluency_rate: 0.3,
            no_mention_rate: 0.2,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: &str| Err(SynthError::Config(m.to_string()));
        for (name, p) in [
            ("disfluency_rate", self.disfluency_rate),
            ("no_mention_rate", self.no_mention_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        let (lo, hi) = self.topics_per_dialogue;
        if lo == 0 || lo > hi {
            return err("topics_per_dialogue must be a non-empty range starting at 1 or more");
        }
        let (lo, hi) = self.turns_per_topic;
        if lo < 2 || lo > hi {
            return err("turns_per_topic must be a non-empty range starting at 2 or more");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub symptom: String,
    pub attribute: AttributeKind,
    pub entity: String,
    pub utt_index: usize,
    /// Half-open character range (Unicode scalar values) in the utterance text.
    pub char_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbsentPair {
    pub symptom: String,
    pub attribute: AttributeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub dialogue_id: String,
    pub facts: Vec<Fact>,
    pub absent: Vec<AbsentPair>,
}

/// Slice of `text` by character offsets.
pub fn char_slice(text: &str, (start, end): (usize, usize)) -> Option<&str> {
    let mut idx = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let bs = idx.nth(start)?;
    let be = if end >= start {
        if end == start {
            bs
        } else {
            idx.nth(end - start - 1)?
        }
    } else {
        return None;
    };
    Some(&text[bs..be])
}

enum Seg {
    Text(String),
    Entity(AttributeKind, String),
}

struct Turn {
    speaker: Speaker,
    topic_id: u32,
    /// Index into the sampled topic list, if this turn belongs to a block.
    topic: Option<usize>,
    segs: Vec<Seg>,
}

impl Turn {
    fn new(speaker: &Speaker, topic_id: u32, topic: Option<usize>) -> Self {
        Self {
            speaker: speaker.clone(),
            topic_id,
            topic,
            segs: Vec::new(),
        }
    }

    fn text(&mut self, s: impl Into<String>) -> &mut Self {
        let s = s.into();
        if !self.segs.is_empty() {
            self.segs.push(Seg::Text(" ".into()));
        }
        self.segs.push(Seg::Text(s));
        self
    }

    /// Appends a template with an `{e}` slot filled by an annotated entity.
    fn answer(&mut self, template: &str, attr: AttributeKind, entity: &str) -> &mut Self {
        let (pre, post) = template.split_once("{e}").expect("answer template has an entity slot");
        if !self.segs.is_empty() {
            self.segs.push(Seg::Text(" ".into()));
        }
        if !pre.is_empty() {
            self.segs.push(Seg::Text(pre.into()));
        }
        self.segs.push(Seg::Entity(attr, entity.into()));
        if !post.is_empty() {
            self.segs.push(Seg::Text(post.into()));
        }
        self
    }
}

const ELABORATION_RATE: f64 = 0.05;
const NURSE_ACK_RATE: f64 = 0.5;
const PATIENT_CLOSING_RATE: f64 = 0.5;
const OPENER_RATE: f64 = 0.4;

/// Generates dialogues from a topic registry.
#[derive(Debug, Clone)]
pub struct Generator {
    registry: TopicRegistry,
    cfg: GenerationConfig,
    nurse: Speaker,
    patient: Speaker,
}

impl Generator {
    pub fn new(registry: TopicRegistry, cfg: GenerationConfig) -> Result<Self, SynthError> {
        cfg.validate()?;
        if registry.is_empty() {
            return Err(SynthError::Config("topic registry is empty".into()));
        }
        registry.validate()?;
        Ok(Self {
            registry,
            cfg,
            nurse: Speaker::new("Nurse").expect("valid label"),
            patient: Speaker::new("Patient").expect("valid label"),
        })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.cfg
    }

    pub fn registry(&self) -> &TopicRegistry {
        &self.registry
    }

    /// Id given to dialogue `index` of a corpus.
    pub fn dialogue_id(index: u64) -> String {
        format!("d{index:07}")
    }

    /// Builds one dialogue; a pure function of `(config, id, seed)`.
    pub fn dialogue(&self, id: &str, seed: u64) -> (Dialogue, GroundTruth) {
        let mut rng = rng_from_seed(seed);
        let reg = &self.registry;

        let (lo, hi) = self.cfg.topics_per_dialogue;
        let hi = (hi as usize).min(reg.len());
        let lo = (lo as usize).min(hi);
        let n_topics = rng.random_range(lo..=hi);
        let picked: Vec<usize> = index::sample(&mut rng, reg.len(), n_topics).into_vec();

        // decide what stays unmentioned before any entity is chosen, so that
        // mentioned entities can steer clear of absent lexicons
        let mut plans = Vec::with_capacity(picked.len());
        let mut absent = Vec::new();
        for &ti in &picked {
            let topic = &reg.topics[ti];
            let mut mentioned = Vec::new();
            for attr in topic.supported() {
                if rng.random_bool(self.cfg.no_mention_rate) {
                    absent.push((ti, attr));
                } else {
                    mentioned.push(attr);
                }
            }
            mentioned.shuffle(&mut rng);
            plans.push((ti, mentioned));
        }
        let forbidden: Vec<&str> = absent
            .iter()
            .flat_map(|&(ti, a)| reg.topics[ti].entities(a).iter().map(String::as_str))
            .collect();

        let mut turns = Vec::new();
        self.greeting(&mut rng, &mut turns);
        for (block, (ti, mentioned)) in plans.into_iter().enumerate() {
            let facts: Vec<(AttributeKind, String)> = mentioned
                .into_iter()
                .filter_map(|a| {
                    let ok: Vec<&String> = reg.topics[ti]
                        .entities(a)
                        .iter()
                        .filter(|e| !forbidden.iter().any(|f| e.contains(f)))
                        .collect();
                    ok.choose(&mut rng).map(|e| (a, (*e).clone()))
                })
                .collect();
            self.topic_block(&mut rng, block, ti, facts, &mut turns);
        }
        self.closing(&mut rng, &mut turns);

        for t in turns.iter_mut() {
            if rng.random_bool(self.cfg.disfluency_rate) {
                disfluent(&mut rng, t);
            }
        }

        let mut utterances = Vec::with_capacity(turns.len());
        let mut facts = Vec::new();
        for (utt_index, t) in turns.into_iter().enumerate() {
            let mut text = String::new();
            let mut chars = 0;
            for seg in t.segs {
                match seg {
                    Seg::Text(s) => {
                        chars += s.chars().count();
                        text.push_str(&s);
                    }
                    Seg::Entity(attribute, entity) => {
                        let n = entity.chars().count();
                        facts.push(Fact {
                            symptom: reg.topics[picked[t.topic.expect("entities live in topic blocks")]]
                                .name
                                .clone(),
                            attribute,
                            entity: entity.clone(),
                            utt_index,
                            char_span: (chars, chars + n),
                        });
                        chars += n;
                        text.push_str(&entity);
                    }
                }
            }
            utterances.push(Utterance::new(t.speaker, text, t.topic_id));
        }

        // an absent pair must not be findable anywhere in the text
        let absent: Vec<AbsentPair> = absent
            .into_iter()
            .filter(|&(ti, a)| {
                !reg.topics[ti]
                    .entities(a)
                    .iter()
                    .any(|e| utterances.iter().any(|u| u.text.contains(e.as_str())))
            })
            .map(|(ti, attribute)| AbsentPair {
                symptom: reg.topics[ti].name.clone(),
                attribute,
            })
            .collect();

        let mut dialogue = Dialogue::new(id, utterances);
        dialogue.meta.insert(
            "topics".into(),
            picked
                .iter()
                .map(|&ti| reg.topics[ti].name.as_str())
                .collect::<Vec<_>>()
                .join(","),
        );
        let gt = GroundTruth {
            dialogue_id: id.to_string(),
            facts,
            absent,
        };
        (dialogue, gt)
    }

    fn greeting(&self, rng: &mut SeededRng, turns: &mut Vec<Turn>) {
        let name = phrases::SURNAMES.choose(rng).unwrap();
        let day = phrases::DISCHARGE_DAYS.choose(rng).unwrap();
        let g = phrases::NURSE_GREETINGS
            .choose(rng)
            .unwrap()
            .replace("{name}", name)
            .replace("{day}", day);
        let mut t = Turn::new(&self.nurse, 0, None);
        t.text(g);
        turns.push(t);
        let mut t = Turn::new(&self.patient, 0, None);
        t.text(*phrases::PATIENT_GREETINGS.choose(rng).unwrap());
        turns.push(t);
    }

    fn closing(&self, rng: &mut SeededRng, turns: &mut Vec<Turn>) {
        let mut t = Turn::new(&self.nurse, 0, None);
        t.text(*phrases::NURSE_CLOSINGS.choose(rng).unwrap());
        turns.push(t);
        if rng.random_bool(PATIENT_CLOSING_RATE) {
            let mut t = Turn::new(&self.patient, 0, None);
            t.text(*phrases::PATIENT_CLOSINGS.choose(rng).unwrap());
            turns.push(t);
        }
    }

    fn topic_block(
        &self,
        rng: &mut SeededRng,
        block: usize,
        ti: usize,
        facts: Vec<(AttributeKind, String)>,
        turns: &mut Vec<Turn>,
    ) {
        let topic = &self.registry.topics[ti];
        let topic_id = TopicRegistry::topic_id(ti);
        let fill = |s: &str| s.replace("{symptom}", &topic.name);
        let (lo, hi) = self.cfg.turns_per_topic;
        let n_turns = rng.random_range(lo..=hi) as usize;
        let patient_turns = n_turns / 2;

        // contiguous, near-equal chunks of facts per patient turn
        let mut chunks: Vec<Vec<(AttributeKind, String)>> = vec![Vec::new(); patient_turns];
        let n = facts.len();
        for (i, f) in facts.into_iter().enumerate() {
            chunks[i * patient_turns / n.max(1)].push(f);
        }

        let mut inquiry = Turn::new(&self.nurse, topic_id, Some(block));
        inquiry.text(fill(topic.templates.choose(rng).unwrap()));
        turns.push(inquiry);

        for (j, chunk) in chunks.into_iter().enumerate() {
            if j > 0 {
                let mut q = Turn::new(&self.nurse, topic_id, Some(block));
                if rng.random_bool(NURSE_ACK_RATE) {
                    q.text(*phrases::NURSE_ACKS.choose(rng).unwrap());
                }
                let template = match chunk.first() {
                    Some((attr, _)) => phrases::nurse_questions(*attr).choose(rng).unwrap(),
                    None => phrases::NURSE_ANYTHING_ELSE.choose(rng).unwrap(),
                };
                q.text(fill(template));
                turns.push(q);
            }
            let mut a = Turn::new(&self.patient, topic_id, Some(block));
            if chunk.is_empty() {
                let bank = if j == 0 {
                    phrases::PATIENT_VAGUE
                } else {
                    phrases::PATIENT_NOTHING_MORE
                };
                a.text(*bank.choose(rng).unwrap());
            } else {
                if j == 0 && rng.random_bool(OPENER_RATE) {
                    a.text(*phrases::PATIENT_OPENERS.choose(rng).unwrap());
                }
                for (attr, entity) in &chunk {
                    let template = phrases::patient_answers(*attr).choose(rng).unwrap();
                    a.answer(template, *attr, entity);
                }
            }
            if rng.random_bool(ELABORATION_RATE) {
                a.text(*phrases::ELABORATIONS.choose(rng).unwrap());
            }
            turns.push(a);
        }

        if n_turns % 2 == 1 {
            let mut w = Turn::new(&self.nurse, topic_id, Some(block));
            w.text(fill(phrases::NURSE_TOPIC_WRAPUPS.choose(rng).unwrap()));
            turns.push(w);
        }
    }

    /// Dialogues `0..n` of a corpus seeded by `master_seed`, in index order.
    /// Generation runs in parallel chunks on the current rayon pool; the
    /// output does not depend on the pool size.
    pub fn corpus(
        &self,
        n: u64,
        master_seed: u64,
    ) -> impl Iterator<Item = (Dialogue, GroundTruth)> + '_ {
        const CHUNK: u64 = 1024;
        (0..n.div_ceil(CHUNK)).flat_map(move |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let batch: Vec<_> = (lo..hi)
                .into_par_iter()
                .map(|i| self.dialogue(&Self::dialogue_id(i), stable_hash(master_seed, i)))
                .collect();
            batch.into_iter()
        })
    }
}

/// Convenience wrapper around [`Generator::dialogue`] with the built-in registry.
pub fn generate_dialogue(cfg: &GenerationConfig, seed: u64) -> Result<(Dialogue, GroundTruth), SynthError> {
    let g = Generator::new(TopicRegistry::builtin(), cfg.clone())?;
    Ok(g.dialogue(&Generator::dialogue_id(0), seed))
}

/// Generates `n` dialogues; dialogue `i` is seeded with `stable_hash(master_seed, i)`.
pub fn generate_corpus(
    registry: TopicRegistry,
    cfg: &GenerationConfig,
    n: u64,
    master_seed: u64,
) -> Result<Vec<(Dialogue, GroundTruth)>, SynthError> {
    let g = Generator::new(registry, cfg.clone())?;
    Ok(g.corpus(n, master_seed).collect())
}

/// Informal-speech markers: a leading filler, a repeated first word, or a
/// trailing-off ending.
fn disfluent(rng: &mut SeededRng, t: &mut Turn) {
    match rng.random_range(0..3) {
        0 => {
            let f = phrases::FILLERS.choose(rng).unwrap();
            t.segs.insert(0, Seg::Text(format!("{f} ")));
        }
        1 => {
            let Some(Seg::Text(first)) = t.segs.first_mut() else {
                return;
            };
            let Some(word) = first.split_whitespace().next().map(str::to_string) else {
                return;
            };
            if !word.chars().all(char::is_alphabetic) {
                return;
            }
            let lower = word.to_lowercase();
            *first = format!("{word} {lower}{}", &first[word.len()..]);
        }
        _ => match t.segs.last_mut() {
            Some(Seg::Text(last)) if last.ends_with('.') || last.ends_with('?') => {
                last.pop();
                last.push_str("..");
            }
            _ => t.segs.push(Seg::Text(" ...".into())),
        },
    }
}
