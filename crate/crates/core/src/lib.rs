//! Corpus tooling for conversational pre-training on clinical
//! inquiry-answering dialogues.
//!
//! * [`dialogue`]: data model, tokenizer and JSONL records
//! * [`synth`]: template-based nurse/patient dialogue generator
//! * [`corrupt`]: the six conversation-aware corruption strategies
//! * [`qa`]: extractive QA samples, splits and low-resource subsets
//! * [`eval`]: SQuAD-style scoring and max-product span decoding

pub mod corpus;
pub mod corrupt;
pub mod dialogue;
pub mod eval;
pub mod qa;
pub mod seed;
pub mod synth;

pub use corpus::{read_corpus, read_jsonl, write_corpus, write_jsonl, CorpusError, JsonlReader, JsonlWriter};
pub use corrupt::{corrupt, corrupt_corpus, CorruptError, CorruptionConfig, OpKind, OpRecord, PretrainSample};
pub use dialogue::{
    detokenize, tokenize, Dialogue, DialogueError, Speaker, Token, TokenKind, TokenizedDialogue, Utterance,
};
pub use eval::{decode_span, exact_match, normalize_answer, score_corpus, token_f1, Prediction, ProbRecord, ScoreReport};
pub use qa::{build_qa, make_splits, subsample_train, QaSample, SplitSpec, SubsetLadder};
pub use synth::{AttributeKind, GenerationConfig, Generator, GroundTruth, TopicRegistry};
