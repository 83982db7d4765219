//! Conversation-aware corruption of tokenized dialogues.
//!
//! Six strategies, applied in this order to a dialogue truncated to
//! `max_len` tokens at utterance granularity:
//!
//! 1. token masking, 2. token infilling (token level),
//! 3. speaker masking, 4. speaker permutation (speaker tokens),
//! 5. utterance masking, 6. intra-topic utterance permutation.
//!
//! Every strategy is length-preserving, so `input`, `target` and
//! `loss_mask` of a [`PretrainSample`] are position-aligned. Each strategy
//! picks exactly `round(rate * eligible)` units.

mod ops;

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dialogue::{tokenize, Dialogue, DialogueError, TokenKind, TokenizedDialogue, BOUNDARY, MASK};
use crate::seed::{rng_from_seed, stable_hash_str};

pub use ops::{
    intra_topic_permute, permutable_utterances, select_units, speaker_mask, speaker_permute, token_infill, token_mask,
    utterance_mask, PermuteOutcome,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorruptError {
    #[error("invalid corruption config: {field}: {message}")]
    Config { field: &'static str, message: String },
    #[error("dialogue {dialogue:?}: no complete utterance fits in {max_len} tokens")]
    TooShort { dialogue: String, max_len: usize },
    #[error(transparent)]
    Dialogue(#[from] DialogueError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionConfig {
    pub token_mask_rate: f64,
    pub token_infill_rate: f64,
    pub speaker_mask_rate: f64,
    pub speaker_permute_rate: f64,
    pub utterance_mask_rate: f64,
    pub intra_topic_permute_rate: f64,
    pub max_len: usize,
    pub infill_vocab: Vec<String>,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            token_mask_rate: 0.05,
            token_infill_rate: 0.05,
            speaker_mask_rate: 0.10,
            speaker_permute_rate: 0.10,
            utterance_mask_rate: 0.10,
            intra_topic_permute_rate: 0.05,
            max_len: 512,
            infill_vocab: Vec::new(),
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    /// All rates zero: corruption is the identity.
    pub fn identity() -> Self {
        Self {
            token_mask_rate: 0.0,
            token_infill_rate: 0.0,
            speaker_mask_rate: 0.0,
            speaker_permute_rate: 0.0,
            utterance_mask_rate: 0.0,
            intra_topic_permute_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn rates(&self) -> [(&'static str, f64); 6] {
        [
            ("token_mask_rate", self.token_mask_rate),
            ("token_infill_rate", self.token_infill_rate),
            ("speaker_mask_rate", self.speaker_mask_rate),
            ("speaker_permute_rate", self.speaker_permute_rate),
            ("utterance_mask_rate", self.utterance_mask_rate),
            ("intra_topic_permute_rate", self.intra_topic_permute_rate),
        ]
    }

    pub fn validate(&self) -> Result<(), CorruptError> {
        for (field, r) in self.rates() {
            if !(0.0..=1.0).contains(&r) {
                return Err(CorruptError::Config {
                    field,
                    message: format!("must be in [0, 1], got {r}"),
                });
            }
        }
        if self.max_len < 8 {
            return Err(CorruptError::Config {
                field: "max_len",
                message: format!("must be at least 8, got {}", self.max_len),
            });
        }
        if self.token_infill_rate > 0.0 && self.infill_vocab.is_empty() {
            return Err(CorruptError::Config {
                field: "infill_vocab",
                message: "must be non-empty when token_infill_rate > 0".into(),
            });
        }
        if let Some(w) = self
            .infill_vocab
            .iter()
            .find(|w| w.is_empty() || w.chars().any(char::is_whitespace) || *w == MASK || *w == BOUNDARY)
        {
            return Err(CorruptError::Config {
                field: "infill_vocab",
                message: format!("invalid entry {w:?}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    TokenMask,
    TokenInfill,
    SpeakerMask,
    SpeakerPermute,
    UttMask,
    UttPermute,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::TokenMask,
        OpKind::TokenInfill,
        OpKind::SpeakerMask,
        OpKind::SpeakerPermute,
        OpKind::UttMask,
        OpKind::UttPermute,
    ];
}

/// One applied manipulation. `start..end` is a half-open token range in
/// the sample; `original` holds the target surfaces of that range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    pub kind: OpKind,
    pub start: usize,
    pub end: usize,
    pub original: Vec<String>,
    /// Utterance indices exchanged by an `utt_permute` op.
    #[serde(skip)]
    pub swapped: Option<(usize, usize)>,
}

impl OpRecord {
    pub(crate) fn at(kind: OpKind, pos: usize, original: &str) -> Self {
        Self {
            kind,
            start: pos,
            end: pos + 1,
            original: vec![original.to_string()],
            swapped: None,
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Units that were selected but could not be corrupted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounters {
    /// No vocabulary draw differed from the original surface.
    pub token_infill: usize,
    /// The window has fewer than two distinct speakers.
    pub speaker_permute: usize,
    /// No same-topic partner was left.
    pub utt_permute: usize,
}

impl std::ops::AddAssign for SkipCounters {
    fn add_assign(&mut self, o: Self) {
        self.token_infill += o.token_infill;
        self.speaker_permute += o.speaker_permute;
        self.utt_permute += o.utt_permute;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainSample {
    pub id: String,
    pub input: Vec<String>,
    pub target: Vec<String>,
    pub loss_mask: Vec<u8>,
    pub ops: Vec<OpRecord>,
    #[serde(skip)]
    pub skipped: SkipCounters,
}

impl PretrainSample {
    pub fn ops_of(&self, kind: OpKind) -> impl Iterator<Item = &OpRecord> {
        self.ops.iter().filter(move |o| o.kind == kind)
    }

    /// Writes every op's originals back over `input`.
    pub fn restore(&self) -> Vec<String> {
        let mut out = self.input.clone();
        for op in &self.ops {
            out[op.range()].clone_from_slice(&op.original);
        }
        out
    }
}

/// Keeps the longest prefix of whole utterances that fits in `max_len`.
pub fn truncate(t: &TokenizedDialogue, max_len: usize) -> Result<TokenizedDialogue, CorruptError> {
    let spans = t.utterance_spans();
    let kept = spans.iter().take_while(|(_, end)| *end <= max_len).count();
    if kept == 0 {
        return Err(CorruptError::TooShort {
            dialogue: t.dialogue_id.clone(),
            max_len,
        });
    }
    let end = spans[kept - 1].1;
    Ok(TokenizedDialogue {
        dialogue_id: t.dialogue_id.clone(),
        tokens: t.tokens[..end].to_vec(),
        topics: t.topics[..kept].to_vec(),
        meta: t.meta.clone(),
    })
}

/// Builds one reconstruction sample. Pure in `(t, cfg, rng state)`.
pub fn corrupt<R: Rng + ?Sized>(
    t: &TokenizedDialogue,
    cfg: &CorruptionConfig,
    rng: &mut R,
) -> Result<PretrainSample, CorruptError> {
    cfg.validate()?;
    let t = truncate(t, cfg.max_len)?;
    let target = t.surfaces();
    let spans = t.utterance_spans();
    let mut tokens = t.tokens.clone();
    let mut ops = Vec::new();
    let mut skipped = SkipCounters::default();

    ops.extend(token_mask(&mut tokens, cfg.token_mask_rate, rng));
    let (recs, s) = token_infill(&mut tokens, cfg.token_infill_rate, &cfg.infill_vocab, rng);
    ops.extend(recs);
    skipped.token_infill += s;

    let speakers: BTreeSet<String> = t
        .tokens
        .iter()
        .filter(|x| x.kind == TokenKind::Speaker)
        .map(|x| x.surface.clone())
        .collect();
    let speakers: Vec<String> = speakers.into_iter().collect();
    ops.extend(speaker_mask(&mut tokens, cfg.speaker_mask_rate, rng));
    let (recs, s) = speaker_permute(&mut tokens, &speakers, cfg.speaker_permute_rate, rng);
    ops.extend(recs);
    skipped.speaker_permute += s;

    let (recs, masked) = utterance_mask(&mut tokens, &spans, cfg.utterance_mask_rate, rng);
    ops.extend(recs);
    let out = intra_topic_permute(tokens, &spans, &t.topics, &masked, cfg.intra_topic_permute_rate, rng);
    ops.extend(out.ops);
    skipped.utt_permute += out.skipped;
    let tokens = out.tokens;

    for op in &mut ops {
        op.original = target[op.range()].to_vec();
    }
    let mut loss_mask = vec![0u8; target.len()];
    for op in &ops {
        loss_mask[op.range()].fill(1);
    }
    Ok(PretrainSample {
        id: t.dialogue_id.clone(),
        input: tokens.into_iter().map(|x| x.surface).collect(),
        target,
        loss_mask,
        ops,
        skipped,
    })
}

/// Seed used for the dialogue with id `id` in a run seeded with `master`.
pub fn record_seed(master: u64, id: &str) -> u64 {
    stable_hash_str(master, id)
}

/// Tokenizes and corrupts one dialogue with its per-record seed.
pub fn corrupt_dialogue(d: &Dialogue, cfg: &CorruptionConfig) -> Result<PretrainSample, CorruptError> {
    let t = tokenize(d)?;
    let mut rng = rng_from_seed(record_seed(cfg.seed, &d.id));
    corrupt(&t, cfg, &mut rng)
}

/// Corrupts a dialogue stream in parallel chunks on the current rayon
/// pool. Output order follows input order, whatever the pool size.
pub fn corrupt_corpus<'a, I>(
    dialogues: I,
    cfg: &'a CorruptionConfig,
) -> impl Iterator<Item = Result<PretrainSample, CorruptError>> + 'a
where
    I: IntoIterator<Item = Dialogue> + 'a,
{
    const CHUNK: usize = 1024;
    let mut it = dialogues.into_iter();
    std::iter::from_fn(move || {
        let chunk: Vec<Dialogue> = it.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            return None;
        }
        let out: Vec<_> = chunk.par_iter().map(|d| corrupt_dialogue(d, cfg)).collect();
        Some(out)
    })
    .flatten()
}

/// Distinct alphabetic content words, sorted; the default infill vocabulary.
pub fn build_infill_vocab<'a, I>(dialogues: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a Dialogue>,
{
    let mut vocab = BTreeSet::new();
    for d in dialogues {
        for u in &d.utterances {
            for w in crate::dialogue::split_words(&u.text) {
                if w.surface.chars().all(char::is_alphabetic) && !vocab.contains(w.surface) {
                    vocab.insert(w.surface.to_string());
                }
            }
        }
    }
    vocab.into_iter().collect()
}
