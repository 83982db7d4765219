//! The individual strategies. Each works on a token buffer in place and
//! reports what it changed; [`super::corrupt`] composes them.

use std::collections::BTreeMap;

use rand::seq::{index, IndexedRandom};
use rand::Rng;

use super::{OpKind, OpRecord};
use crate::dialogue::{Token, TokenKind, MASK};

/// Redraws allowed when an infill draw equals the original surface.
const INFILL_REDRAWS: usize = 8;

/// `round(rate * n)` distinct indices in `0..n`, uniform without
/// replacement, returned sorted.
pub fn select_units<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<usize> {
    let k = ((rate * n as f64).round() as usize).min(n);
    if k == 0 {
        return Vec::new();
    }
    let mut v = index::sample(rng, n, k).into_vec();
    v.sort_unstable();
    v
}

fn positions_of(tokens: &[Token], kind: TokenKind) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == kind)
        .map(|(i, _)| i)
        .collect()
}

fn mask_at(tok: &mut Token) {
    tok.surface = MASK.to_string();
    tok.kind = TokenKind::Mask;
}

/// Replaces `round(rate * #content)` content tokens with `<mask>`.
pub fn token_mask<R: Rng + ?Sized>(tokens: &mut [Token], rate: f64, rng: &mut R) -> Vec<OpRecord> {
    let eligible = positions_of(tokens, TokenKind::Content);
    select_units(eligible.len(), rate, rng)
        .into_iter()
        .map(|i| {
            let pos = eligible[i];
            let rec = OpRecord::at(OpKind::TokenMask, pos, &tokens[pos].surface);
            mask_at(&mut tokens[pos]);
            rec
        })
        .collect()
}

/// Replaces content tokens not yet masked with random vocabulary words.
/// Returns the records and the number of selected tokens left untouched
/// because every draw matched the original.
pub fn token_infill<R: Rng + ?Sized>(
    tokens: &mut [Token],
    rate: f64,
    vocab: &[String],
    rng: &mut R,
) -> (Vec<OpRecord>, usize) {
    let eligible = positions_of(tokens, TokenKind::Content);
    let selected = select_units(eligible.len(), rate, rng);
    let mut recs = Vec::with_capacity(selected.len());
    let mut skipped = 0;
    for i in selected {
        let pos = eligible[i];
        let original = &tokens[pos].surface;
        let draw = (0..=INFILL_REDRAWS)
            .filter_map(|_| vocab.choose(rng))
            .find(|w| *w != original)
            .cloned();
        match draw {
            Some(w) => {
                recs.push(OpRecord::at(OpKind::TokenInfill, pos, original));
                tokens[pos].surface = w;
            }
            None => skipped += 1,
        }
    }
    (recs, skipped)
}

/// Masks the speaker token of `round(rate * #utterances)` utterances.
pub fn speaker_mask<R: Rng + ?Sized>(tokens: &mut [Token], rate: f64, rng: &mut R) -> Vec<OpRecord> {
    let eligible = positions_of(tokens, TokenKind::Speaker);
    select_units(eligible.len(), rate, rng)
        .into_iter()
        .map(|i| {
            let pos = eligible[i];
            let rec = OpRecord::at(OpKind::SpeakerMask, pos, &tokens[pos].surface);
            mask_at(&mut tokens[pos]);
            rec
        })
        .collect()
}

/// Gives selected (unmasked) utterances a different speaker from
/// `speakers`, the dialogue's distinct speaker-token surfaces. With fewer
/// than two speakers every selected unit is skipped.
pub fn speaker_permute<R: Rng + ?Sized>(
    tokens: &mut [Token],
    speakers: &[String],
    rate: f64,
    rng: &mut R,
) -> (Vec<OpRecord>, usize) {
    let eligible = positions_of(tokens, TokenKind::Speaker);
    let selected = select_units(eligible.len(), rate, rng);
    if speakers.len() < 2 {
        return (Vec::new(), selected.len());
    }
    let mut recs = Vec::with_capacity(selected.len());
    let mut skipped = 0;
    for i in selected {
        let pos = eligible[i];
        let others: Vec<&String> = speakers.iter().filter(|s| **s != tokens[pos].surface).collect();
        match others.choose(rng) {
            Some(&label) => {
                recs.push(OpRecord::at(OpKind::SpeakerPermute, pos, &tokens[pos].surface));
                tokens[pos].surface = label.clone();
            }
            None => skipped += 1,
        }
    }
    (recs, skipped)
}

/// Masks every content position of `round(rate * #utterances)` whole
/// utterances, one `<mask>` per token. Boundary and speaker tokens stay.
/// `spans` are the half-open utterance blocks. Returns the records (one per
/// utterance, covering the whole block) and the masked utterance indices.
pub fn utterance_mask<R: Rng + ?Sized>(
    tokens: &mut [Token],
    spans: &[(usize, usize)],
    rate: f64,
    rng: &mut R,
) -> (Vec<OpRecord>, Vec<usize>) {
    let selected = select_units(spans.len(), rate, rng);
    let recs = selected
        .iter()
        .map(|&u| {
            let (start, end) = spans[u];
            let original = tokens[start..end].iter().map(|t| t.surface.clone()).collect();
            for tok in &mut tokens[start + 2..end] {
                mask_at(tok);
            }
            OpRecord {
                kind: OpKind::UttMask,
                start,
                end,
                original,
                swapped: None,
            }
        })
        .collect();
    (recs, selected)
}

pub struct PermuteOutcome {
    pub tokens: Vec<Token>,
    pub ops: Vec<OpRecord>,
    pub skipped: usize,
}

/// Utterances that may take part in a same-topic exchange: not masked,
/// and sharing their topic with at least one other unmasked utterance.
pub fn permutable_utterances(topics: &[u32], masked: &[usize]) -> Vec<usize> {
    let mut per_topic: BTreeMap<u32, usize> = BTreeMap::new();
    for (u, t) in topics.iter().enumerate() {
        if !masked.contains(&u) {
            *per_topic.entry(*t).or_default() += 1;
        }
    }
    (0..topics.len())
        .filter(|u| !masked.contains(u) && per_topic[&topics[*u]] >= 2)
        .collect()
}

/// Exchanges whole utterance blocks with a same-topic partner.
///
/// `round(rate * eligible)` initiators are drawn; each is swapped with a
/// uniformly chosen unused partner of its topic, and both are then used.
/// An initiator that is already used or has no partner left is skipped.
/// Each swap is recorded over the smallest run of utterance blocks that
/// contains every swap overlapping it, so positions shifted by unequal
/// block lengths stay inside a record.
pub fn intra_topic_permute<R: Rng + ?Sized>(
    tokens: Vec<Token>,
    spans: &[(usize, usize)],
    topics: &[u32],
    masked: &[usize],
    rate: f64,
    rng: &mut R,
) -> PermuteOutcome {
    let eligible = permutable_utterances(topics, masked);
    let selected = select_units(eligible.len(), rate, rng);
    let mut used = vec![false; topics.len()];
    let mut swaps = Vec::new();
    let mut skipped = 0;
    for i in selected {
        let u = eligible[i];
        if used[u] {
            skipped += 1;
            continue;
        }
        let pool: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|&p| p != u && !used[p] && topics[p] == topics[u])
            .collect();
        match pool.choose(rng) {
            Some(&p) => {
                used[u] = true;
                used[p] = true;
                swaps.push((u, p));
            }
            None => skipped += 1,
        }
    }
    if swaps.is_empty() {
        return PermuteOutcome {
            tokens,
            ops: Vec::new(),
            skipped,
        };
    }

    // swaps are disjoint transpositions of utterance slots
    let mut order: Vec<usize> = (0..spans.len()).collect();
    for &(a, b) in &swaps {
        order.swap(a, b);
    }
    let mut out = Vec::with_capacity(tokens.len());
    for &u in &order {
        let (s, e) = spans[u];
        out.extend_from_slice(&tokens[s..e]);
    }

    let mut intervals: Vec<(usize, usize)> = swaps.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    intervals.sort_unstable();
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    for (lo, hi) in intervals {
        match clusters.last_mut() {
            Some(c) if lo <= c.1 => c.1 = c.1.max(hi),
            _ => clusters.push((lo, hi)),
        }
    }
    let ops = swaps
        .iter()
        .map(|&(a, b)| {
            let &(lo, hi) = clusters
                .iter()
                .find(|(lo, hi)| *lo <= a.min(b) && a.max(b) <= *hi)
                .expect("every swap lies in a cluster");
            let (start, end) = (spans[lo].0, spans[hi].1);
            OpRecord {
                kind: OpKind::UttPermute,
                start,
                end,
                original: tokens[start..end].iter().map(|t| t.surface.clone()).collect(),
                swapped: Some((a, b)),
            }
        })
        .collect();
    PermuteOutcome {
        tokens: out,
        ops,
        skipped,
    }
}
