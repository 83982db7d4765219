//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dialoforge::corrupt::{corrupt_corpus, CorruptionConfig, OpKind, PretrainSample};
use dialoforge::eval::{decode_span, exact_match, score_corpus, token_f1, Percent, Prediction, ProbRecord};
use dialoforge::qa::{build_qa, make_splits, Answer, QaSample, QuestionTemplates, SplitSpec};
use dialoforge::seed::rng_from_seed;
use dialoforge::synth::{char_slice, corpus_stats, AttributeKind, GenerationConfig, Generator, TopicRegistry};
use dialoforge::{tokenize, Dialogue, GroundTruth, TokenKind, TokenizedDialogue};
use rand::seq::SliceRandom;
use rand::Rng;

type Check = fn() -> (bool, String);

/// Hand-worked scorer case: prediction, gold, EM, F1 as (num, den).
type ScoreCase = (Option<&'static str>, Option<&'static str>, u8, (u32, u32));

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn main() {
    let checks: [(&str, Check); 6] = [
        ("corruption property suite", corruption_properties),
        ("pipeline determinism", pipeline_determinism),
        ("corpus statistics", corpus_statistics),
        ("decoder oracle equivalence", decoder_oracle),
        ("scorer correctness", scorer_fixture),
        ("QA faithfulness", qa_faithfulness),
    ];
    let mut outcomes = Vec::new();
    for (name, check) in checks {
        let (pass, detail) = check();
        let o = Outcome { name, pass, detail };
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn corpus(n: u64, seed: u64) -> Vec<(Dialogue, GroundTruth)> {
    Generator::new(TopicRegistry::builtin(), GenerationConfig::default())
        .unwrap()
        .corpus(n, seed)
        .collect()
}

// ---------------------------------------------------------------- corruption

/// `round(rate * n)` with the rate given in basis points, half away from zero.
fn expected_units(rate_bp: u64, n: usize) -> usize {
    ((rate_bp * n as u64 * 2 + 10_000) / 20_000) as usize
}

/// Utterance block starts of a token stream.
fn block_starts(surfaces: &[String]) -> Vec<usize> {
    surfaces
        .iter()
        .enumerate()
        .filter(|(_, s)| *s == "<u>")
        .map(|(i, _)| i)
        .collect()
}

fn oracle_truncate(t: &TokenizedDialogue, max_len: usize) -> TokenizedDialogue {
    let surfaces = t.surfaces();
    let mut starts = block_starts(&surfaces);
    starts.push(t.len());
    let kept = starts.windows(2).take_while(|w| w[1] <= max_len).count();
    let end = starts[kept];
    TokenizedDialogue {
        dialogue_id: t.dialogue_id.clone(),
        tokens: t.tokens[..end].to_vec(),
        topics: t.topics[..kept].to_vec(),
        meta: t.meta.clone(),
    }
}

fn check_sample(s: &PretrainSample, full: &TokenizedDialogue, cfg: &CorruptionConfig) -> Vec<&'static str> {
    let mut bad = Vec::new();
    let t = oracle_truncate(full, cfg.max_len);
    let n = t.len();
    let target = t.surfaces();

    // length preservation
    if s.input.len() != n || s.target.len() != n || s.loss_mask.len() != n {
        bad.push("length");
        return bad;
    }
    if s.target != target {
        bad.push("target");
    }

    // loss-mask soundness
    let mut covered = vec![0u8; n];
    for op in &s.ops {
        if op.start >= op.end || op.end > n {
            bad.push("range");
            return bad;
        }
        covered[op.start..op.end].fill(1);
    }
    if covered != s.loss_mask || (0..n).any(|i| s.input[i] != target[i] && s.loss_mask[i] == 0) {
        bad.push("loss_mask");
    }

    // restorability
    let mut restored = s.input.clone();
    for op in &s.ops {
        if op.original[..] != target[op.start..op.end] {
            bad.push("original");
        }
        restored[op.start..op.end].clone_from_slice(&op.original);
    }
    if restored != target {
        bad.push("restore");
    }

    // sentinel safety
    let blocks_in = block_starts(&s.input);
    if target.iter().any(|x| x == "<mask>" || x == "<no_answer>")
        || s.input.iter().any(|x| x == "<no_answer>")
        || (0..n).any(|i| s.input[i] == "<mask>" && s.loss_mask[i] == 0)
        || blocks_in.len() != t.num_utterances()
        || blocks_in.first() != Some(&0)
    {
        bad.push("sentinel");
    }

    // rate exactness
    let count = |k: OpKind| s.ops.iter().filter(|o| o.kind == k).count();
    let content = t.tokens.iter().filter(|x| x.kind == TokenKind::Content).count();
    let utts = t.num_utterances();
    let tm = count(OpKind::TokenMask);
    let sm = count(OpKind::SpeakerMask);
    let starts = block_starts(&target);
    let masked: BTreeSet<usize> = s
        .ops_of(OpKind::UttMask)
        .map(|o| starts.iter().position(|&b| b == o.start).expect("utterance mask starts a block"))
        .collect();
    let mut topic_count: BTreeMap<u32, usize> = BTreeMap::new();
    for (u, tp) in t.topics.iter().enumerate() {
        if !masked.contains(&u) {
            *topic_count.entry(*tp).or_default() += 1;
        }
    }
    let permutable = (0..utts)
        .filter(|u| !masked.contains(u) && topic_count[&t.topics[*u]] >= 2)
        .count();
    let want = [
        (tm, expected_units(500, content)),
        (
            count(OpKind::TokenInfill) + s.skipped.token_infill,
            expected_units(500, content - tm),
        ),
        (sm, expected_units(1000, utts)),
        (
            count(OpKind::SpeakerPermute) + s.skipped.speaker_permute,
            expected_units(1000, utts - sm),
        ),
        (masked.len(), expected_units(1000, utts)),
        (
            count(OpKind::UttPermute) + s.skipped.utt_permute,
            expected_units(500, permutable),
        ),
    ];
    if want.iter().any(|(got, exp)| got != exp) {
        bad.push("rate");
    }

    // topic discipline: every exchange is between unmasked same-topic
    // utterances, exchanges are disjoint, and block lengths follow them
    let mut perm: Vec<usize> = (0..utts).collect();
    let mut used = HashSet::new();
    for op in s.ops_of(OpKind::UttPermute) {
        let Some((a, b)) = op.swapped else {
            bad.push("topic");
            continue;
        };
        if a == b
            || t.topics[a] != t.topics[b]
            || masked.contains(&a)
            || masked.contains(&b)
            || !used.insert(a)
            || !used.insert(b)
        {
            bad.push("topic");
        }
        perm.swap(a, b);
    }
    let mut ends = starts.clone();
    ends.push(n);
    let len_of = |u: usize| ends[u + 1] - ends[u];
    let mut ends_in = blocks_in.clone();
    ends_in.push(n);
    if ends_in.len() == ends.len() && (0..utts).any(|u| ends_in[u + 1] - ends_in[u] != len_of(perm[u])) {
        bad.push("topic");
    }
    bad
}

fn corruption_properties() -> (bool, String) {
    let dialogues: Vec<Dialogue> = corpus(1000, 7).into_iter().map(|(d, _)| d).collect();
    let vocab = dialoforge::corrupt::build_infill_vocab(&dialogues);
    let cfg = CorruptionConfig {
        infill_vocab: vocab,
        seed: 7,
        ..CorruptionConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let clock = Instant::now();
    let samples: Result<Vec<_>, _> = pool.install(|| corrupt_corpus(dialogues.clone(), &cfg).collect());
    let secs = clock.elapsed().as_secs_f64();
    let samples = match samples {
        Ok(s) => s,
        Err(e) => return (false, format!("corruption failed: {e}")),
    };

    let mut failures: BTreeMap<&str, usize> = BTreeMap::new();
    let mut ops: BTreeMap<OpKind, usize> = BTreeMap::new();
    for (s, d) in samples.iter().zip(&dialogues) {
        for op in &s.ops {
            *ops.entry(op.kind).or_default() += 1;
        }
        for f in check_sample(s, &tokenize(d).unwrap(), &cfg) {
            *failures.entry(f).or_default() += 1;
        }
    }
    let ok_count = samples.len() == dialogues.len() && failures.is_empty() && secs < 60.0;
    (
        ok_count,
        format!(
            "{} samples, ops {ops:?}, violations {failures:?}, single-thread corruption {secs:.2}s (limit 60s)",
            samples.len()
        ),
    )
}

// --------------------------------------------------------------- determinism

fn run_cli(args: &[&str], dir: &Path, jobs: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dialoforge"))
        .args(args)
        .args(["--seed", "7", "--jobs", jobs])
        .current_dir(dir)
        .env_remove("DIALOFORGE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn pipeline(dir: &Path, jobs: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    run_cli(&["generate", "--n", "1000", "--out", "corpus.jsonl"], dir, jobs)?;
    run_cli(&["corrupt", "--corpus", "corpus.jsonl", "--out", "pretrain.jsonl"], dir, jobs)?;
    run_cli(
        &[
            "build-qa",
            "--corpus",
            "corpus.jsonl",
            "--truth",
            "corpus.truth.jsonl",
            "--out",
            "qa.jsonl",
            "--splits-dir",
            "splits",
            "--train-size",
            "4000",
            "--val-size",
            "300",
            "--test-size",
            "300",
            "--ladder",
            "1000,2000,4000",
        ],
        dir,
        jobs,
    )?;
    let mut files = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().display().to_string();
        files.insert(rel, std::fs::read(&entry).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn pipeline_determinism() -> (bool, String) {
    let runs = [("1", "run A"), ("1", "run B"), ("8", "run C")];
    let mut results = Vec::new();
    for (jobs, label) in runs {
        let dir = tempfile::tempdir().unwrap();
        match pipeline(dir.path(), jobs) {
            Ok(files) => results.push(files),
            Err(e) => return (false, format!("{label} (--jobs {jobs}) failed: {e}")),
        }
    }
    let same_runs = results[0] == results[1];
    let same_jobs = results[0] == results[2];
    let bytes: usize = results[0].values().map(Vec::len).sum();
    (
        same_runs && same_jobs && results[0].len() == 10,
        format!(
            "{} files ({bytes} bytes); repeat run identical: {same_runs}; --jobs 1 vs 8 identical: {same_jobs}",
            results[0].len()
        ),
    )
}

// ---------------------------------------------------------------- statistics

/// Content tokens of one whitespace-separated word: each leading or
/// trailing `.,?!;` counts on its own, the remaining core counts once.
fn content_tokens(word: &str) -> usize {
    let p = |c: char| ".,?!;".contains(c);
    let lead = word.chars().take_while(|&c| p(c)).count();
    if lead == word.chars().count() {
        return lead;
    }
    let trail = word.chars().rev().take_while(|&c| p(c)).count();
    lead + trail + 1
}

fn corpus_statistics() -> (bool, String) {
    let dialogues: Vec<Dialogue> = corpus(1000, 0).into_iter().map(|(d, _)| d).collect();
    let stats = corpus_stats(&dialogues).unwrap();
    let words = dialogues.iter().flat_map(|d| &d.utterances).flat_map(|u| u.text.split_whitespace());
    let tokens: usize = words.clone().map(content_tokens).sum();
    let alphabetic = words.filter(|w| w.chars().any(char::is_alphanumeric)).count();
    let turns: usize = dialogues.iter().map(|d| d.utterances.len()).sum();
    let (mw, mt) = (tokens as f64 / 1000.0, turns as f64 / 1000.0);
    let pass = (mt - 15.5).abs() <= 3.0
        && (mw - 255.0).abs() <= 50.0
        && (stats.mean_turns - mt).abs() < 0.01
        && (stats.mean_words - mw).abs() < 0.01;
    (
        pass,
        format!(
            "mean turns {:.2} (15.5 +/- 3.0), mean content words {:.2} (255 +/- 50; recount {mw:.2}, \
             {:.2} without punctuation tokens)",
            stats.mean_turns,
            stats.mean_words,
            alphabetic as f64 / 1000.0
        ),
    )
}

// ------------------------------------------------------------------- decoder

fn oracle_decode(r: &ProbRecord, l: usize) -> Option<(usize, usize)> {
    let n = r.p_start.len();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 1..n {
        for j in i..n {
            if j - i + 1 > l {
                continue;
            }
            let s = r.p_start[i] * r.p_end[j];
            match best {
                Some((b, _, _)) if s <= b => {}
                _ => best = Some((s, i, j)),
            }
        }
    }
    let (b, i, j) = best?;
    (r.p_start[0] * r.p_end[0] <= b).then_some((i, j))
}

fn random_record(rng: &mut impl Rng, k: usize) -> ProbRecord {
    let n = rng.random_range(1..=64);
    let draw = |rng: &mut dyn rand::RngCore| -> Vec<f64> {
        match k % 3 {
            // coarse grid: many exact ties
            0 => (0..n).map(|_| f64::from(rng.random_range(0..5u32)) / 4.0).collect(),
            // normalized distribution
            1 => {
                let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(4)).collect();
                let z: f64 = raw.iter().sum::<f64>().max(f64::MIN_POSITIVE);
                raw.iter().map(|x| (x / z).min(1.0)).collect()
            }
            _ => (0..n).map(|_| rng.random::<f64>()).collect(),
        }
    };
    ProbRecord {
        qa_id: format!("r{k}"),
        p_start: draw(rng),
        p_end: draw(rng),
    }
}

fn decoder_oracle() -> (bool, String) {
    let mut rng = rng_from_seed(2024);
    let mut mismatches = 0;
    let mut nulls = 0;
    for k in 0..10_000 {
        let r = random_record(&mut rng, k);
        let l = [1, 5, 30][(k / 3) % 3];
        let got = decode_span(&r, l).unwrap();
        if got != oracle_decode(&r, l) {
            mismatches += 1;
        }
        nulls += usize::from(got.is_none());
    }
    (
        mismatches == 0,
        format!("10000 records (n <= 64, L in {{1, 5, 30}}), {mismatches} mismatches, {nulls} No-Answer"),
    )
}

// -------------------------------------------------------------------- scorer

fn scorer_fixture() -> (bool, String) {
    // (pred, gold, EM, F1 as num/den), worked out by hand on normalized tokens
    let cases: [ScoreCase; 12] = [
        (Some("only a bit"), Some("only a bit"), 1, (1, 1)),
        (Some("a bit"), Some("only a bit"), 0, (2, 3)),
        (Some("the headache"), Some("headache"), 1, (1, 1)),
        (Some("headache."), Some("headache"), 1, (1, 1)),
        (Some("Since Yesterday"), Some("since yesterday"), 1, (1, 1)),
        (None, None, 1, (1, 1)),
        (None, Some("two days"), 0, (0, 1)),
        (Some("two days"), None, 0, (0, 1)),
        (Some("for about two days"), Some("two days"), 0, (2, 3)),
        (Some("at night"), Some("in the morning"), 0, (0, 1)),
        (Some("every morning"), Some("every night"), 0, (1, 2)),
        (Some("very very bad"), Some("very bad"), 0, (4, 5)),
    ];
    let mut wrong = Vec::new();
    for (k, (p, g, em, (num, den))) in cases.iter().enumerate() {
        let f1 = token_f1(*p, *g);
        if u8::from(exact_match(*p, *g)) != *em || (f1 - f64::from(*num) / f64::from(*den)).abs() > 1e-12 {
            wrong.push(k);
        }
    }
    let gold: Vec<QaSample> = cases
        .iter()
        .enumerate()
        .map(|(k, (_, g, _, _))| QaSample {
            id: format!("q{k:02}"),
            dialogue_id: format!("d{}", k / 3),
            question: String::new(),
            symptom: "headache".into(),
            attribute: AttributeKind::ALL[k % 5],
            answer: g.map(|text| Answer {
                text: text.into(),
                start_token: 1,
                end_token: 1,
            }),
        })
        .collect();
    let preds: Vec<Prediction> = cases
        .iter()
        .enumerate()
        .map(|(k, (p, _, _, _))| Prediction {
            qa_id: format!("q{k:02}"),
            answer_text: p.map(Into::into),
            span: None,
        })
        .collect();
    // EM 5/12 = 41.666..; F1 (5 + 2/3 + 2/3 + 1/2 + 4/5) / 12 = 0.636111..
    let report = score_corpus(&preds, &gold).unwrap();
    let totals_ok = report.em == Percent(41.67) && report.f1 == Percent(63.61) && report.n == 12;
    let json = serde_json::to_string(&report).unwrap();
    let json_ok = json.starts_with("{\"em\":41.67,\"f1\":63.61,\"n\":12,");

    let mut rng = rng_from_seed(5);
    let mut permuted_ok = true;
    for _ in 0..50 {
        let (mut g, mut p) = (gold.clone(), preds.clone());
        g.shuffle(&mut rng);
        p.shuffle(&mut rng);
        let r = score_corpus(&p, &g).unwrap();
        permuted_ok &= r == report && serde_json::to_string(&r).unwrap() == json;
    }
    (
        wrong.is_empty() && totals_ok && json_ok && permuted_ok,
        format!(
            "12 cases, per-case mismatches {wrong:?}; corpus EM {:.2} F1 {:.2} (expected 41.67 / 63.61); 50 shuffles identical: {permuted_ok}",
            report.em.0, report.f1.0
        ),
    )
}

// ----------------------------------------------------------------------- QA

fn qa_faithfulness() -> (bool, String) {
    let data = corpus(1000, 7);
    let templates = QuestionTemplates::new(7);
    let mut samples = Vec::new();
    let (mut positives, mut broken, mut nulls) = (0, 0, 0);
    for (d, gt) in &data {
        let t = tokenize(d).unwrap();
        let qa = match build_qa(d, gt, &templates) {
            Ok(q) => q,
            Err(e) => return (false, format!("{}: {e}", d.id)),
        };
        let facts = gt.facts.iter();
        for (s, f) in qa.iter().filter(|s| s.answer.is_some()).zip(facts) {
            positives += 1;
            let a = s.answer.as_ref().unwrap();
            // span tokens, glued without spaces, must equal the answer
            // without spaces, and the answer must equal the source text slice
            let glued: String = t.tokens[a.start_token..=a.end_token]
                .iter()
                .map(|x| x.surface.as_str())
                .collect();
            let source = char_slice(&d.utterances[f.utt_index].text, f.char_span);
            let in_utterance = t.tokens[a.start_token..=a.end_token]
                .iter()
                .all(|x| x.kind == TokenKind::Content && x.utt_index == f.utt_index);
            if glued != a.text.replace(' ', "") || source != Some(a.text.as_str()) || !in_utterance {
                broken += 1;
            }
        }
        nulls += qa.iter().filter(|s| s.answer.is_none()).count();
        samples.extend(qa);
    }
    let total = samples.len();
    let spec = SplitSpec {
        train: 4000,
        val: 300,
        test: 300,
        seed: 7,
    };
    let splits = match make_splits(samples, &spec) {
        Ok(s) => s,
        Err(e) => return (false, format!("splits: {e}")),
    };
    let ids = |v: &[QaSample]| v.iter().map(|s| s.dialogue_id.clone()).collect::<BTreeSet<_>>();
    let (tr, va, te) = (ids(&splits.train), ids(&splits.val), ids(&splits.test));
    let disjoint = tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te);
    let exact = (splits.train.len(), splits.val.len(), splits.test.len()) == (4000, 300, 300);
    (
        positives > 0 && broken == 0 && disjoint && exact,
        format!(
            "{total} samples ({positives} answerable, {nulls} No-Answer), {broken} misaligned spans; \
             splits {}/{}/{} exact: {exact}, dialogue-disjoint: {disjoint}",
            splits.train.len(),
            splits.val.len(),
            splits.test.len()
        ),
    )
}
