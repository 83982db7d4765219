//! Dialogue data model and the utterance-aware tokenizer.
//!
//! A dialogue is serialized for modelling as one block per utterance:
//! `<u> {speaker}: w1 w2 ...`. Content words are whitespace-split and have
//! leading/trailing `.,?!;` characters detached into their own tokens.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Utterance boundary sentinel.
pub const BOUNDARY: &str = "<u>";
/// Mask sentinel shared by every masking strategy.
pub const MASK: &str = "<mask>";
/// Surface used for the reserved No-Answer slot.
pub const NO_ANSWER: &str = "<no_answer>";

/// Characters detached from the edges of whitespace-delimited words.
pub const DETACHED_PUNCT: &[char] = &['.', ',', '?', '!', ';'];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DialogueError {
    #[error("invalid speaker label {0:?}")]
    InvalidSpeaker(String),
    #[error("dialogue {dialogue:?} has no utterances")]
    NoUtterances { dialogue: String },
    #[error("dialogue {dialogue:?}: utterance {utt} has no content tokens")]
    EmptyUtterance { dialogue: String, utt: usize },
    #[error("dialogue {dialogue:?}: utterance {utt} contains a reserved sentinel")]
    SentinelInText { dialogue: String, utt: usize },
    #[error("malformed token stream at position {pos}: {reason}")]
    MalformedStream { pos: usize, reason: String },
}

/// Speaker label such as `Nurse`. No whitespace, no `:`, non-empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Speaker(String);

impl Speaker {
    pub fn new(label: impl Into<String>) -> Result<Self, DialogueError> {
        let label = label.into();
        let ok = !label.is_empty()
            && !label.chars().any(|c| c.is_whitespace() || c == ':')
            && label != MASK
            && label != BOUNDARY;
        if ok {
            Ok(Self(label))
        } else {
            Err(DialogueError::InvalidSpeaker(label))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Surface of the atomic speaker token, e.g. `Nurse:`.
    pub fn token(&self) -> String {
        format!("{}:", self.0)
    }
}

impl TryFrom<String> for Speaker {
    type Error = DialogueError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Speaker::new(s)
    }
}

impl From<Speaker> for String {
    fn from(s: Speaker) -> String {
        s.0
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub speaker: Speaker,
    pub text: String,
    pub topic_id: u32,
}

impl Utterance {
    pub fn new(speaker: Speaker, text: impl Into<String>, topic_id: u32) -> Self {
        Self {
            speaker,
            text: text.into(),
            topic_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub utterances: Vec<Utterance>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, utterances: Vec<Utterance>) -> Self {
        Self {
            id: id.into(),
            utterances,
            meta: BTreeMap::new(),
        }
    }

    /// Checks every invariant the rest of the pipeline relies on.
    pub fn validate(&self) -> Result<(), DialogueError> {
        if self.utterances.is_empty() {
            return Err(DialogueError::NoUtterances {
                dialogue: self.id.clone(),
            });
        }
        for (utt, u) in self.utterances.iter().enumerate() {
            if u.text.contains(MASK) || u.text.contains(BOUNDARY) {
                return Err(DialogueError::SentinelInText {
                    dialogue: self.id.clone(),
                    utt,
                });
            }
            if u.text.trim().is_empty() {
                return Err(DialogueError::EmptyUtterance {
                    dialogue: self.id.clone(),
                    utt,
                });
            }
        }
        Ok(())
    }

    /// Distinct speaker labels, sorted.
    pub fn speakers(&self) -> BTreeSet<&Speaker> {
        self.utterances.iter().map(|u| &u.speaker).collect()
    }

    /// The dialogue with each utterance's whitespace normalized the way the
    /// tokenizer sees it.
    pub fn canonicalize(&self) -> Dialogue {
        let mut d = self.clone();
        for u in &mut d.utterances {
            u.text = normalize_whitespace(&u.text);
        }
        d
    }
}

fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Content,
    Speaker,
    Boundary,
    Mask,
    NoAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    pub utt_index: usize,
    /// Position inside the utterance block; 0 is the boundary token.
    pub pos_in_utt: usize,
    /// The token was attached to the previous token without whitespace in
    /// the source text (e.g. the `?` in `night?`).
    pub joined: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDialogue {
    pub dialogue_id: String,
    pub tokens: Vec<Token>,
    /// topic_id of each utterance, in order.
    pub topics: Vec<u32>,
    pub meta: BTreeMap<String, String>,
}

impl TokenizedDialogue {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn num_utterances(&self) -> usize {
        self.topics.len()
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }

    /// Half-open token range of each utterance block.
    pub fn utterance_spans(&self) -> Vec<(usize, usize)> {
        let mut spans = Vec::with_capacity(self.topics.len());
        for (i, t) in self.tokens.iter().enumerate() {
            if t.kind == TokenKind::Boundary {
                if let Some(last) = spans.last_mut() {
                    let (_, end): &mut (usize, usize) = last;
                    *end = i;
                }
                spans.push((i, self.tokens.len()));
            }
        }
        spans
    }

    pub fn content_positions(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.kind == TokenKind::Content)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn content_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Content)
            .count()
    }
}

/// A content word with its character offsets in the utterance text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordPiece<'a> {
    pub surface: &'a str,
    pub char_start: usize,
    pub char_end: usize,
    pub joined: bool,
}

fn is_detached(c: char) -> bool {
    DETACHED_PUNCT.contains(&c)
}

/// Splits utterance text into content pieces, tracking char offsets.
pub fn split_words(text: &str) -> Vec<WordPiece<'_>> {
    let mut out = Vec::new();
    // (byte_start, char_start) of the current whitespace-free chunk
    let mut chunk: Option<(usize, usize)> = None;
    let mut char_idx = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((b, c)) = chars.next() {
        if !c.is_whitespace() && chunk.is_none() {
            chunk = Some((b, char_idx));
        }
        char_idx += 1;
        let at_end = chars.peek().is_none();
        let closes = c.is_whitespace() || at_end;
        if closes {
            if let Some((bs, cs)) = chunk.take() {
                let be = if c.is_whitespace() { b } else { b + c.len_utf8() };
                split_chunk(&text[bs..be], cs, &mut out);
            }
        }
    }
    out
}

fn split_chunk<'a>(chunk: &'a str, char_start: usize, out: &mut Vec<WordPiece<'a>>) {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let n = chars.len();
    let lead = chars.iter().take_while(|(_, c)| is_detached(*c)).count();
    let trail = if lead == n {
        0
    } else {
        chars.iter().rev().take_while(|(_, c)| is_detached(*c)).count()
    };
    let byte_at = |i: usize| if i == n { chunk.len() } else { chars[i].0 };
    let mut first = true;
    let mut push = |from: usize, to: usize| {
        out.push(WordPiece {
            surface: &chunk[byte_at(from)..byte_at(to)],
            char_start: char_start + from,
            char_end: char_start + to,
            joined: !first,
        });
        first = false;
    };
    for i in 0..lead {
        push(i, i + 1);
    }
    if lead < n - trail {
        push(lead, n - trail);
    }
    for i in n - trail..n {
        push(i, i + 1);
    }
}

/// Tokenizes one dialogue into its boundary/speaker/content stream.
pub fn tokenize(d: &Dialogue) -> Result<TokenizedDialogue, DialogueError> {
    if d.utterances.is_empty() {
        return Err(DialogueError::NoUtterances {
            dialogue: d.id.clone(),
        });
    }
    let mut tokens = Vec::new();
    for (utt, u) in d.utterances.iter().enumerate() {
        let words = split_words(&u.text);
        if words.is_empty() {
            return Err(DialogueError::EmptyUtterance {
                dialogue: d.id.clone(),
                utt,
            });
        }
        if words.iter().any(|w| w.surface == MASK || w.surface == BOUNDARY)
            || u.text.contains(MASK)
            || u.text.contains(BOUNDARY)
        {
            return Err(DialogueError::SentinelInText {
                dialogue: d.id.clone(),
                utt,
            });
        }
        tokens.push(Token {
            surface: BOUNDARY.to_string(),
            kind: TokenKind::Boundary,
            utt_index: utt,
            pos_in_utt: 0,
            joined: false,
        });
        tokens.push(Token {
            surface: u.speaker.token(),
            kind: TokenKind::Speaker,
            utt_index: utt,
            pos_in_utt: 1,
            joined: false,
        });
        for (k, w) in words.iter().enumerate() {
            tokens.push(Token {
                surface: w.surface.to_string(),
                kind: TokenKind::Content,
                utt_index: utt,
                pos_in_utt: k + 2,
                joined: k > 0 && w.joined,
            });
        }
    }
    Ok(TokenizedDialogue {
        dialogue_id: d.id.clone(),
        tokens,
        topics: d.utterances.iter().map(|u| u.topic_id).collect(),
        meta: d.meta.clone(),
    })
}

/// Renders content tokens back to text, honouring the `joined` flags.
pub fn render<'a, I>(tokens: I) -> String
where
    I: IntoIterator<Item = &'a Token>,
{
    let mut s = String::new();
    for (i, t) in tokens.into_iter().enumerate() {
        if i > 0 && !t.joined {
            s.push(' ');
        }
        s.push_str(&t.surface);
    }
    s
}

/// Joins surfaces with single spaces, then removes the space in front of
/// detached punctuation. Used where only surfaces are available.
pub fn join_surfaces<S: AsRef<str>>(surfaces: &[S]) -> String {
    let mut s = String::new();
    for (i, t) in surfaces.iter().enumerate() {
        let t = t.as_ref();
        let is_punct = !t.is_empty() && t.chars().all(is_detached);
        if i > 0 && !is_punct {
            s.push(' ');
        }
        s.push_str(t);
    }
    s
}

/// Inverse of [`tokenize`].
pub fn detokenize(t: &TokenizedDialogue) -> Result<Dialogue, DialogueError> {
    let malformed = |pos: usize, reason: &str| DialogueError::MalformedStream {
        pos,
        reason: reason.to_string(),
    };
    let mut utterances = Vec::new();
    let mut pos = 0;
    let toks = &t.tokens;
    while pos < toks.len() {
        let utt = utterances.len();
        if toks[pos].kind != TokenKind::Boundary || toks[pos].surface != BOUNDARY {
            return Err(malformed(pos, "expected utterance boundary"));
        }
        let sp = toks
            .get(pos + 1)
            .filter(|s| s.kind == TokenKind::Speaker)
            .ok_or_else(|| malformed(pos + 1, "expected speaker token after boundary"))?;
        let label = sp
            .surface
            .strip_suffix(':')
            .ok_or_else(|| malformed(pos + 1, "speaker token must end with ':'"))?;
        let speaker = Speaker::new(label).map_err(|_| malformed(pos + 1, "invalid speaker label"))?;
        let start = pos + 2;
        let mut end = start;
        while end < toks.len() && toks[end].kind == TokenKind::Content {
            end += 1;
        }
        if end == start {
            return Err(malformed(start, "utterance without content tokens"));
        }
        for (k, tok) in toks[pos..end].iter().enumerate() {
            if tok.utt_index != utt || tok.pos_in_utt != k {
                return Err(malformed(pos + k, "token position bookkeeping mismatch"));
            }
        }
        let content = &toks[start..end];
        let text = render(content);
        // the stream must be exactly what the tokenizer would produce
        let reparsed = split_words(&text);
        let consistent = reparsed.len() == content.len()
            && reparsed
                .iter()
                .zip(content)
                .enumerate()
                .all(|(k, (w, tok))| w.surface == tok.surface && (k > 0 && w.joined) == tok.joined);
        if !consistent {
            return Err(malformed(start, "content tokens do not re-tokenize identically"));
        }
        let topic_id = *t
            .topics
            .get(utt)
            .ok_or_else(|| malformed(pos, "missing topic id for utterance"))?;
        utterances.push(Utterance::new(speaker, text, topic_id));
        pos = end;
    }
    if utterances.len() != t.topics.len() {
        return Err(malformed(toks.len(), "topic list length differs from utterance count"));
    }
    if utterances.is_empty() {
        return Err(malformed(0, "empty token stream"));
    }
    Ok(Dialogue {
        id: t.dialogue_id.clone(),
        utterances,
        meta: t.meta.clone(),
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The three-utterance nurse/patient exchange used throughout the tests.
    pub fn headache_dialogue() -> Dialogue {
        let nurse = Speaker::new("Nurse").unwrap();
        let patient = Speaker::new("Patient").unwrap();
        Dialogue::new(
            "table1",
            vec![
                Utterance::new(nurse.clone(), "Do you have any headache at night?", 0),
                Utterance::new(patient, "No no headache, just a bit cough..", 0),
                Utterance::new(nurse, "Cough? you mean cough at every night?", 0),
            ],
        )
    }
}
