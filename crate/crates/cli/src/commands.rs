use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use dialoforge::corpus::{read_corpus, read_jsonl, write_jsonl, JsonlReader, JsonlWriter};
use dialoforge::corrupt::{build_infill_vocab, corrupt_corpus, CorruptionConfig};
use dialoforge::eval::{predict, score_corpus, Prediction, ProbRecord, DEFAULT_MAX_SPAN_LEN};
use dialoforge::qa::{build_qa, make_splits, subsample_train, QaSample, QuestionTemplates, SplitSpec, SubsetLadder};
use dialoforge::synth::{GenerationConfig, Generator, StatsAccumulator, TopicRegistry};
use dialoforge::{tokenize, Dialogue, GroundTruth, TokenizedDialogue};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::args::{
    merge, required, AblateArgs, BuildQaArgs, Command, CorruptArgs, DecodeArgs, GenerateArgs, Globals, ScoreArgs,
    StatsArgs,
};
use crate::error::CliError;

const DECODE_CHUNK: usize = 256;

pub fn dispatch(cmd: Command, file: Map<String, Value>, g: Globals) -> Result<(), CliError> {
    match cmd {
        Command::Generate(a) => generate(merge(&a, file)?, g),
        Command::Corrupt(a) => corrupt(merge(&a, file)?, g),
        Command::BuildQa(a) => build_qa_cmd(merge(&a, file)?, g),
        Command::Decode(a) => decode(merge(&a, file)?),
        Command::Score(a) => score(merge(&a, file)?),
        Command::Stats(a) => stats(merge(&a, file)?),
        Command::Ablate(a) => ablate(merge(&a, file)?, g),
    }
}

fn read_dialogues(path: &Path) -> Result<Vec<Dialogue>, CliError> {
    read_corpus(path)
        .and_then(|r| r.collect())
        .map_err(|e| CliError::corpus(path, e))
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    read_jsonl(path).map_err(|e| CliError::corpus(path, e))
}

fn write_records<'a, T: Serialize + 'a>(records: impl IntoIterator<Item = &'a T>, path: &Path) -> Result<usize, CliError> {
    write_jsonl(records, path).map_err(|e| CliError::corpus(path, e))
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("report serializes"));
}

/// `corpus.jsonl` -> `corpus.truth.jsonl`
fn truth_sidecar(out: &Path) -> PathBuf {
    out.with_extension("truth.jsonl")
}

fn generate(a: GenerateArgs, g: Globals) -> Result<(), CliError> {
    let n = required(a.n, "n")?;
    let out = required(a.out, "out")?;
    let truth = a.truth.unwrap_or_else(|| truth_sidecar(&out));
    let d = GenerationConfig::default();
    let cfg = GenerationConfig {
        topics_per_dialogue: (
            a.min_topics.unwrap_or(d.topics_per_dialogue.0),
            a.max_topics.unwrap_or(d.topics_per_dialogue.1),
        ),
        turns_per_topic: (
            a.min_turns.unwrap_or(d.turns_per_topic.0),
            a.max_turns.unwrap_or(d.turns_per_topic.1),
        ),
        disfluency_rate: a.disfluency_rate.unwrap_or(d.disfluency_rate),
        no_mention_rate: a.no_mention_rate.unwrap_or(d.no_mention_rate),
        seed: g.seed,
    };
    let registry = match &a.topics {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            TopicRegistry::from_json(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?
        }
        None => TopicRegistry::builtin(),
    };
    let generator = Generator::new(registry, cfg).map_err(CliError::invalid)?;

    let mut cw = JsonlWriter::create(&out).map_err(|e| CliError::corpus(&out, e))?;
    let mut tw = JsonlWriter::create(&truth).map_err(|e| CliError::corpus(&truth, e))?;
    for (dialogue, gt) in generator.corpus(n, g.seed) {
        cw.write(&dialogue).map_err(|e| CliError::corpus(&out, e))?;
        tw.write(&gt).map_err(|e| CliError::corpus(&truth, e))?;
    }
    cw.finish().map_err(|e| CliError::corpus(&out, e))?;
    tw.finish().map_err(|e| CliError::corpus(&truth, e))?;
    eprintln!("wrote {n} dialogues to {} and ground truth to {}", out.display(), truth.display());
    Ok(())
}

fn corruption_config(a: &CorruptArgs, seed: u64) -> CorruptionConfig {
    let d = CorruptionConfig::default();
    CorruptionConfig {
        token_mask_rate: a.token_mask_rate.unwrap_or(d.token_mask_rate),
        token_infill_rate: a.token_infill_rate.unwrap_or(d.token_infill_rate),
        speaker_mask_rate: a.speaker_mask_rate.unwrap_or(d.speaker_mask_rate),
        speaker_permute_rate: a.speaker_permute_rate.unwrap_or(d.speaker_permute_rate),
        utterance_mask_rate: a.utterance_mask_rate.unwrap_or(d.utterance_mask_rate),
        intra_topic_permute_rate: a.intra_topic_permute_rate.unwrap_or(d.intra_topic_permute_rate),
        max_len: a.max_len.unwrap_or(d.max_len),
        infill_vocab: Vec::new(),
        seed,
    }
}

fn corrupt(a: CorruptArgs, g: Globals) -> Result<(), CliError> {
    let corpus = required(a.corpus.clone(), "corpus")?;
    let out = required(a.out.clone(), "out")?;
    let mut cfg = corruption_config(&a, g.seed);
    // check rates and lengths before any file is read
    CorruptionConfig {
        infill_vocab: vec!["x".into()],
        ..cfg.clone()
    }
    .validate()
    .map_err(CliError::invalid)?;

    if a.vocab.is_some() && a.infill_vocab.as_ref().is_some_and(|v| !v.is_empty()) {
        return Err(CliError::Usage("give either vocab or infill_vocab, not both".into()));
    }
    let dialogues = read_dialogues(&corpus)?;
    cfg.infill_vocab = match (&a.vocab, a.infill_vocab) {
        (None, Some(v)) if !v.is_empty() => v,
        (Some(p), _) => fs::read_to_string(p)
            .map_err(|e| CliError::io(p, e))?
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect(),
        _ => build_infill_vocab(&dialogues),
    };
    cfg.validate().map_err(CliError::invalid)?;

    let mut w = JsonlWriter::create(&out).map_err(|e| CliError::corpus(&out, e))?;
    let mut n = 0usize;
    for sample in corrupt_corpus(dialogues, &cfg) {
        let sample = sample.map_err(CliError::invalid)?;
        w.write(&sample).map_err(|e| CliError::corpus(&out, e))?;
        n += 1;
    }
    w.finish().map_err(|e| CliError::corpus(&out, e))?;
    eprintln!("wrote {n} samples to {}", out.display());
    Ok(())
}

fn build_qa_cmd(a: BuildQaArgs, g: Globals) -> Result<(), CliError> {
    let corpus = required(a.corpus, "corpus")?;
    let truth_path = required(a.truth, "truth")?;
    let out = required(a.out, "out")?;
    if a.ladder.is_some() && a.splits_dir.is_none() {
        return Err(CliError::Usage("--ladder needs --splits-dir".into()));
    }
    let dialogues = read_dialogues(&corpus)?;
    let mut truth: HashMap<String, GroundTruth> = HashMap::new();
    for gt in read_records::<GroundTruth>(&truth_path)? {
        truth.insert(gt.dialogue_id.clone(), gt);
    }
    let templates = QuestionTemplates::new(g.seed);
    let per_dialogue: Vec<Result<Vec<QaSample>, CliError>> = dialogues
        .par_iter()
        .map(|d| {
            let gt = truth
                .get(&d.id)
                .ok_or_else(|| CliError::Invalid(format!("{}: no ground truth for dialogue {:?}", truth_path.display(), d.id)))?;
            build_qa(d, gt, &templates).map_err(CliError::invalid)
        })
        .collect();
    let mut samples = Vec::new();
    for s in per_dialogue {
        samples.extend(s?);
    }
    write_records(&samples, &out)?;
    eprintln!("wrote {} QA samples to {}", samples.len(), out.display());

    let Some(dir) = a.splits_dir else {
        return Ok(());
    };
    let d = SplitSpec::default();
    let spec = SplitSpec {
        train: a.train_size.unwrap_or(d.train),
        val: a.val_size.unwrap_or(d.val),
        test: a.test_size.unwrap_or(d.test),
        seed: g.seed,
    };
    let splits = make_splits(samples, &spec).map_err(CliError::invalid)?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for (name, part) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        write_records(part, &dir.join(format!("{name}.jsonl")))?;
    }
    if let Some(sizes) = a.ladder {
        let subsets = subsample_train(&splits.train, &SubsetLadder { sizes }, g.seed).map_err(CliError::invalid)?;
        for s in &subsets {
            write_records(s, &dir.join(format!("train_{}.jsonl", s.len())))?;
        }
    }
    eprintln!(
        "wrote splits {}/{}/{} to {}",
        spec.train,
        spec.val,
        spec.test,
        dir.display()
    );
    Ok(())
}

fn decode(a: DecodeArgs) -> Result<(), CliError> {
    let probs = required(a.probs, "probs")?;
    let qa_path = required(a.qa, "qa")?;
    let corpus = required(a.corpus, "corpus")?;
    let out = required(a.out, "out")?;
    let max_span_len = a.max_span_len.unwrap_or(DEFAULT_MAX_SPAN_LEN);

    let qa_dialogue: HashMap<String, String> = read_records::<QaSample>(&qa_path)?
        .into_iter()
        .map(|s| (s.id, s.dialogue_id))
        .collect();
    let needed: HashSet<&str> = qa_dialogue.values().map(String::as_str).collect();
    let mut streams: HashMap<String, TokenizedDialogue> = HashMap::new();
    for d in read_dialogues(&corpus)? {
        if needed.contains(d.id.as_str()) {
            let t = tokenize(&d).map_err(CliError::invalid)?;
            streams.insert(d.id, t);
        }
    }

    let mut reader = JsonlReader::<_, ProbRecord>::open(&probs).map_err(|e| CliError::corpus(&probs, e))?;
    let mut w = JsonlWriter::create(&out).map_err(|e| CliError::corpus(&out, e))?;
    let mut n = 0usize;
    loop {
        let chunk: Vec<ProbRecord> = reader
            .by_ref()
            .take(DECODE_CHUNK)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::corpus(&probs, e))?;
        if chunk.is_empty() {
            break;
        }
        let preds: Vec<Result<Prediction, CliError>> = chunk
            .par_iter()
            .map(|r| {
                let stream = qa_dialogue
                    .get(&r.qa_id)
                    .and_then(|d| streams.get(d))
                    .ok_or_else(|| CliError::Invalid(format!("{}: unknown qa_id {:?}", probs.display(), r.qa_id)))?;
                predict(r, stream, max_span_len).map_err(CliError::invalid)
            })
            .collect();
        for p in preds {
            w.write(&p?).map_err(|e| CliError::corpus(&out, e))?;
            n += 1;
        }
    }
    w.finish().map_err(|e| CliError::corpus(&out, e))?;
    eprintln!("wrote {n} predictions to {}", out.display());
    Ok(())
}

fn score(a: ScoreArgs) -> Result<(), CliError> {
    let preds_path = required(a.preds, "preds")?;
    let gold_path = required(a.gold, "gold")?;
    let preds: Vec<Prediction> = read_records(&preds_path)?;
    let gold: Vec<QaSample> = read_records(&gold_path)?;
    let report = score_corpus(&preds, &gold).map_err(CliError::invalid)?;
    print_json(&report);
    Ok(())
}

fn stats(a: StatsArgs) -> Result<(), CliError> {
    let corpus = required(a.corpus, "corpus")?;
    let mut acc = StatsAccumulator::default();
    for d in read_corpus(&corpus).map_err(|e| CliError::corpus(&corpus, e))? {
        acc.add(&d.map_err(|e| CliError::corpus(&corpus, e))?);
    }
    print_json(&acc.finish().map_err(CliError::invalid)?);
    Ok(())
}

/// Corruption presets, each adding strategies to the previous one.
fn ablation_ladder(max_len: usize) -> [(&'static str, CorruptArgs); 4] {
    let d = CorruptionConfig::default();
    let token_mask = CorruptArgs {
        token_mask_rate: Some(d.token_mask_rate),
        token_infill_rate: Some(0.0),
        speaker_mask_rate: Some(0.0),
        speaker_permute_rate: Some(0.0),
        utterance_mask_rate: Some(0.0),
        intra_topic_permute_rate: Some(0.0),
        max_len: Some(max_len),
        ..Default::default()
    };
    let infill = CorruptArgs {
        token_infill_rate: Some(d.token_infill_rate),
        ..token_mask.clone()
    };
    let speaker = CorruptArgs {
        speaker_mask_rate: Some(d.speaker_mask_rate),
        speaker_permute_rate: Some(d.speaker_permute_rate),
        ..infill.clone()
    };
    let utterance = CorruptArgs {
        utterance_mask_rate: Some(d.utterance_mask_rate),
        intra_topic_permute_rate: Some(d.intra_topic_permute_rate),
        ..speaker.clone()
    };
    [
        ("1-token-mask", token_mask),
        ("2-token-infill", infill),
        ("3-speaker-ops", speaker),
        ("4-utterance-ops", utterance),
    ]
}

fn ablate(a: AblateArgs, g: Globals) -> Result<(), CliError> {
    let dir = required(a.out_dir, "out_dir")?;
    let max_len = a.max_len.unwrap_or(CorruptionConfig::default().max_len);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for (name, preset) in ablation_ladder(max_len) {
        let mut v = serde_json::to_value(&preset).expect("preset serializes");
        v["seed"] = g.seed.into();
        let path = dir.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(&v).expect("preset serializes") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        println!("{}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_name() {
        assert_eq!(truth_sidecar(Path::new("out/c.jsonl")), Path::new("out/c.truth.jsonl"));
        assert_eq!(truth_sidecar(Path::new("c")), Path::new("c.truth.jsonl"));
    }

    #[test]
    fn ladder_adds_strategies() {
        let ladder = ablation_ladder(512);
        let enabled = |a: &CorruptArgs| {
            [
                a.token_mask_rate,
                a.token_infill_rate,
                a.speaker_mask_rate,
                a.speaker_permute_rate,
                a.utterance_mask_rate,
                a.intra_topic_permute_rate,
            ]
            .iter()
            .filter(|r| r.unwrap() > 0.0)
            .count()
        };
        let counts: Vec<usize> = ladder.iter().map(|(_, a)| enabled(a)).collect();
        assert_eq!(counts, [1, 2, 4, 6]);
        let last = corruption_config(&ladder[3].1, 0);
        let d = CorruptionConfig::default();
        assert_eq!(last.rates(), d.rates());
    }
}
