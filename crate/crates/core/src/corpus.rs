//! Line-delimited JSON readers and writers.
//!
//! Every record type in the pipeline is stored one JSON object per line,
//! UTF-8, LF-terminated. Readers stream; they hold only the current line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::dialogue::{Dialogue, DialogueError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: DialogueError,
    },
}

impl CorpusError {
    pub fn is_io(&self) -> bool {
        matches!(self, CorpusError::Io(_))
    }
}

/// Streaming reader of `T` records, one per line.
pub struct JsonlReader<R, T> {
    inner: R,
    line: usize,
    buf: String,
    _marker: PhantomData<fn() -> T>,
}

impl<R: BufRead, T: DeserializeOwned> JsonlReader<R, T> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
            _marker: PhantomData,
        }
    }

    /// 1-based number of the last line read.
    pub fn line(&self) -> usize {
        self.line
    }
}

impl<T: DeserializeOwned> JsonlReader<BufReader<File>, T> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Ok(Self::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: BufRead, T: DeserializeOwned> Iterator for JsonlReader<R, T> {
    type Item = Result<T, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.buf.clear();
        match self.inner.read_line(&mut self.buf) {
            Ok(0) => None,
            Ok(_) => {
                self.line += 1;
                let text = self.buf.strip_suffix('\n').unwrap_or(&self.buf);
                Some(serde_json::from_str(text).map_err(|e| CorpusError::Parse {
                    line: self.line,
                    message: e.to_string(),
                }))
            }
            Err(e) => Some(Err(e.into())),
        }
    }
}

/// Writes records as JSONL.
pub struct JsonlWriter<W: Write> {
    inner: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), CorpusError> {
        serde_json::to_writer(&mut self.inner, record).map_err(io::Error::from)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, CorpusError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

impl JsonlWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        Ok(Self::new(BufWriter::new(File::create(path)?)))
    }
}

/// Dialogue stream that validates each record and rejects repeated ids.
///
/// Id tracking keeps one string per dialogue seen; everything else is
/// per-line.
pub struct DialogueReader<R> {
    records: JsonlReader<R, Dialogue>,
    seen: HashSet<String>,
}

impl<R: BufRead> DialogueReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            records: JsonlReader::new(inner),
            seen: HashSet::new(),
        }
    }
}

impl<R: BufRead> Iterator for DialogueReader<R> {
    type Item = Result<Dialogue, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        let d = match self.records.next()? {
            Ok(d) => d,
            Err(e) => return Some(Err(e)),
        };
        let line = self.records.line();
        if let Err(source) = d.validate() {
            return Some(Err(CorpusError::Invalid { line, source }));
        }
        if !self.seen.insert(d.id.clone()) {
            return Some(Err(CorpusError::DuplicateId { line, id: d.id }));
        }
        Some(Ok(d))
    }
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<DialogueReader<BufReader<File>>, CorpusError> {
    Ok(DialogueReader::new(BufReader::new(File::open(path)?)))
}

pub fn write_corpus<'a, I>(dialogues: I, path: impl AsRef<Path>) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = &'a Dialogue>,
{
    write_jsonl(dialogues, path)
}

pub fn write_jsonl<'a, T, I>(records: I, path: impl AsRef<Path>) -> Result<usize, CorpusError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = JsonlWriter::create(path)?;
    let mut n = 0;
    for r in records {
        w.write(r)?;
        n += 1;
    }
    w.finish()?;
    Ok(n)
}

/// Reads a whole JSONL file of `T` into memory.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, CorpusError> {
    JsonlReader::open(path)?.collect()
}
