use std::collections::BTreeMap;

use serde::Serialize;

use super::SynthError;
use crate::dialogue::{split_words, Dialogue};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub dialogues: u64,
    pub mean_words: f64,
    pub mean_turns: f64,
    /// Number of dialogues touching each topic_id (0 = greeting/sign-off).
    pub topic_histogram: BTreeMap<u32, u64>,
    /// Number of utterances per speaker label.
    pub speaker_histogram: BTreeMap<String, u64>,
}

/// Streaming accumulator; integer sums keep the means exact until the final
/// rounding.
#[derive(Debug, Default, Clone)]
pub struct StatsAccumulator {
    dialogues: u64,
    words: u64,
    turns: u64,
    topics: BTreeMap<u32, u64>,
    speakers: BTreeMap<String, u64>,
}

impl StatsAccumulator {
    pub fn add(&mut self, d: &Dialogue) {
        self.dialogues += 1;
        self.turns += d.utterances.len() as u64;
        let mut seen = std::collections::BTreeSet::new();
        for u in &d.utterances {
            self.words += split_words(&u.text).len() as u64;
            *self.speakers.entry(u.speaker.to_string()).or_default() += 1;
            if seen.insert(u.topic_id) {
                *self.topics.entry(u.topic_id).or_default() += 1;
            }
        }
    }

    pub fn finish(self) -> Result<CorpusStats, SynthError> {
        if self.dialogues == 0 {
            return Err(SynthError::EmptyCorpus);
        }
        Ok(CorpusStats {
            dialogues: self.dialogues,
            mean_words: ratio_2dp(self.words, self.dialogues),
            mean_turns: ratio_2dp(self.turns, self.dialogues),
            topic_histogram: self.topics,
            speaker_histogram: self.speakers,
        })
    }
}

/// `num / den` rounded half-up to two decimals using integer arithmetic.
pub(crate) fn ratio_2dp(num: u64, den: u64) -> f64 {
    let scaled = (u128::from(num) * 200 + u128::from(den)) / (2 * u128::from(den));
    scaled as f64 / 100.0
}

pub fn corpus_stats<'a, I>(corpus: I) -> Result<CorpusStats, SynthError>
where
    I: IntoIterator<Item = &'a Dialogue>,
{
    let mut acc = StatsAccumulator::default();
    for d in corpus {
        acc.add(d);
    }
    acc.finish()
}
