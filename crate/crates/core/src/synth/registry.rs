use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributeKind, SynthError};
use crate::dialogue::{split_words, BOUNDARY, MASK};

const DEFAULT_REGISTRY: &str = include_str!("../../data/topics.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymptomTopic {
    pub name: String,
    /// Lexicon content written for this crate rather than taken from a
    /// curated source.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invented: bool,
    /// Nurse inquiry templates; `{symptom}` is replaced by `name`.
    pub templates: Vec<String>,
    pub lexicons: BTreeMap<AttributeKind, Vec<String>>,
}

impl SymptomTopic {
    /// Attributes with a non-empty lexicon, in canonical order.
    pub fn supported(&self) -> Vec<AttributeKind> {
        AttributeKind::ALL
            .into_iter()
            .filter(|a| self.lexicons.get(a).is_some_and(|l| !l.is_empty()))
            .collect()
    }

    pub fn entities(&self, attr: AttributeKind) -> &[String] {
        self.lexicons.get(&attr).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicRegistry {
    pub topics: Vec<SymptomTopic>,
}

impl TopicRegistry {
    pub fn from_json(s: &str) -> Result<Self, SynthError> {
        let reg: TopicRegistry =
            serde_json::from_str(s).map_err(|e| SynthError::Registry(e.to_string()))?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let s = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SynthError::Registry(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&s)
    }

    /// The nine built-in symptom topics.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_REGISTRY).expect("built-in registry is valid")
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// topic_id used for utterances of topic `index`; 0 is kept for
    /// greeting and sign-off turns.
    pub fn topic_id(index: usize) -> u32 {
        index as u32 + 1
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Registry(m));
        for t in &self.topics {
            if t.name.trim().is_empty() || has_sentinel(&t.name) {
                return bad(format!("invalid topic name {:?}", t.name));
            }
            if t.templates.is_empty() {
                return bad(format!("topic {:?} has no templates", t.name));
            }
            if let Some(tpl) = t.templates.iter().find(|s| has_sentinel(s)) {
                return bad(format!("template {tpl:?} contains a sentinel"));
            }
            if t.supported().is_empty() {
                return bad(format!("topic {:?} supports no attribute", t.name));
            }
            for (attr, lex) in &t.lexicons {
                for e in lex {
                    if !is_clean_entity(e) {
                        return bad(format!("{}/{attr}: entity {e:?} is not token-aligned", t.name));
                    }
                }
            }
        }
        Ok(())
    }
}

fn has_sentinel(s: &str) -> bool {
    s.contains(MASK) || s.contains(BOUNDARY)
}

/// An entity must tokenize to whole words with no detached punctuation, so
/// that its character span always lands on token boundaries.
fn is_clean_entity(e: &str) -> bool {
    let words = split_words(e);
    !words.is_empty()
        && !has_sentinel(e)
        && e.split_whitespace().collect::<Vec<_>>().join(" ") == e
        && words.iter().all(|w| !w.joined)
        && e.split_whitespace().count() == words.len()
}
