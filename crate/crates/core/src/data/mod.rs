//! Corpus files and synthetic corpora.
//!
//! A corpus file is line-delimited JSON. The first line is a header, every
//! further non-blank line one headline:
//!
//! ```text
//! {"format":"newsrank-corpus","schema_version":1,"name":"demo","dimension":3}
//! {"id":0,"day":0,"clicks":42,"embedding":[0.1,-0.5,2.0],"text":"Storm closes bridge"}
//! {"id":1,"day":0,"clicks":1800,"embedding":[1.25,0.0,-0.75]}
//! {"id":2,"day":1,"clicks":7,"embedding":[0.0,0.3,0.3]}
//! ```
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so `write_corpus` followed by `read_corpus` is lossless.

mod synthetic;

pub use synthetic::{
    generate_synthetic, latent_direction, ActiveDays, SyntheticSpec, NEWSROOM_RANK_COUNTS,
};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Headline, HeadlineId};

pub const FORMAT: &str = "newsrank-corpus";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(
        "line {line}: unsupported corpus schema version {found} (supported: {SCHEMA_VERSION})"
    )]
    UnsupportedVersion { line: usize, found: u32 },
    #[error(
        "line {line}: headline {id} has embedding dimension {found}, header declares {expected}"
    )]
    DimensionMismatch {
        line: usize,
        id: HeadlineId,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate headline id {id} (first seen on line {first_line})")]
    DuplicateId {
        line: usize,
        id: HeadlineId,
        first_line: usize,
    },
    #[error("corpus file has no header line")]
    MissingHeader,
    #[error("corpus file has no records")]
    NoRecords,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub format: String,
    pub schema_version: u32,
    pub name: String,
    pub dimension: usize,
}

impl CorpusHeader {
    pub fn new(name: impl Into<String>, dimension: usize) -> Self {
        Self {
            format: FORMAT.to_string(),
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            dimension,
        }
    }
}

fn parse_err(line: usize, e: impl std::fmt::Display) -> DataError {
    DataError::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn read_corpus<R: BufRead>(input: R) -> Result<(CorpusHeader, Corpus), DataError> {
    let mut header: Option<CorpusHeader> = None;
    let mut headlines = Vec::new();
    let mut seen: HashMap<HeadlineId, usize> = HashMap::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_err(line_no, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(h) = &header else {
            let parsed: CorpusHeader =
                serde_json::from_str(&line).map_err(|e| parse_err(line_no, e))?;
            if parsed.format != FORMAT {
                return Err(parse_err(
                    line_no,
                    format!("expected format {FORMAT:?}, found {:?}", parsed.format),
                ));
            }
            if parsed.schema_version != SCHEMA_VERSION {
                return Err(DataError::UnsupportedVersion {
                    line: line_no,
                    found: parsed.schema_version,
                });
            }
            if parsed.dimension == 0 {
                return Err(parse_err(line_no, "dimension must be positive"));
            }
            header = Some(parsed);
            continue;
        };
        let record: Headline = serde_json::from_str(&line).map_err(|e| parse_err(line_no, e))?;
        if record.embedding.len() != h.dimension {
            return Err(DataError::DimensionMismatch {
                line: line_no,
                id: record.id,
                expected: h.dimension,
                found: record.embedding.len(),
            });
        }
        if let Some(&first_line) = seen.get(&record.id) {
            return Err(DataError::DuplicateId {
                line: line_no,
                id: record.id,
                first_line,
            });
        }
        seen.insert(record.id, line_no);
        headlines.push(record);
    }
    let header = header.ok_or(DataError::MissingHeader)?;
    if headlines.is_empty() {
        return Err(DataError::NoRecords);
    }
    let corpus = Corpus::new(headlines).expect("validated while reading");
    Ok((header, corpus))
}

pub fn write_corpus<W: Write>(mut out: W, name: &str, corpus: &Corpus) -> std::io::Result<()> {
    let header = CorpusHeader::new(name, corpus.dim());
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for h in corpus.headlines() {
        serde_json::to_writer(&mut out, h)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads and validates a corpus file.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    Ok(read_corpus(BufReader::new(file))?.1)
}

pub fn save_corpus(path: impl AsRef<Path>, name: &str, corpus: &Corpus) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    write_corpus(BufWriter::new(file), name, corpus).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::headline;

    const EXAMPLE: &str = r#"{"format":"newsrank-corpus","schema_version":1,"name":"demo","dimension":3}
{"id":0,"day":0,"clicks":42,"embedding":[0.1,-0.5,2.0],"text":"Storm closes bridge"}
{"id":1,"day":0,"clicks":1800,"embedding":[1.25,0.0,-0.75]}
{"id":2,"day":1,"clicks":7,"embedding":[0.0,0.3,0.3]}
"#;

    #[test]
    fn reads_documented_example() {
        let (header, corpus) = read_corpus(EXAMPLE.as_bytes()).unwrap();
        assert_eq!(header.name, "demo");
        assert_eq!(corpus.len(), 3);
        assert_eq!(
            corpus.get(0).unwrap().text.as_deref(),
            Some("Storm closes bridge")
        );
        assert_eq!(corpus.get(1).unwrap().clicks, 1800);
    }

    #[test]
    fn dimension_mismatch_names_record() {
        let bad = EXAMPLE.replace("[0.0,0.3,0.3]", "[0.0,0.3]");
        match read_corpus(bad.as_bytes()).unwrap_err() {
            DataError::DimensionMismatch {
                line,
                id,
                expected,
                found,
            } => {
                assert_eq!((line, id, expected, found), (4, 2, 3, 2));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_id() {
        let bad = EXAMPLE.replace(r#""id":2"#, r#""id":1"#);
        assert!(matches!(
            read_corpus(bad.as_bytes()).unwrap_err(),
            DataError::DuplicateId {
                line: 4,
                id: 1,
                first_line: 3
            }
        ));
    }

    #[test]
    fn malformed_and_versioned() {
        let bad = EXAMPLE.replace(r#""clicks":7"#, r#""clicks":-7"#);
        assert!(matches!(
            read_corpus(bad.as_bytes()).unwrap_err(),
            DataError::Parse { line: 4, .. }
        ));
        let v2 = EXAMPLE.replace(r#""schema_version":1"#, r#""schema_version":2"#);
        assert!(matches!(
            read_corpus(v2.as_bytes()).unwrap_err(),
            DataError::UnsupportedVersion { line: 1, found: 2 }
        ));
        assert!(matches!(
            read_corpus("".as_bytes()).unwrap_err(),
            DataError::MissingHeader
        ));
        let header_only = EXAMPLE.lines().next().unwrap();
        assert!(matches!(
            read_corpus(header_only.as_bytes()).unwrap_err(),
            DataError::NoRecords
        ));
    }

    #[test]
    fn round_trip_keeps_bits() {
        let awkward = vec![
            0.1 + 0.2,
            -1e-310,
            1.0 / 3.0,
            f64::MAX,
            -0.0,
            123456.789e-20,
        ];
        let corpus = Corpus::new(vec![
            headline(5, 0, 0, awkward.clone()),
            Headline {
                text: Some("quote \" and ünïcode".into()),
                ..headline(9, 123_456, 12, awkward.iter().map(|v| v * 0.7).collect())
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, "rt", &corpus).unwrap();
        let (_, back) = read_corpus(buf.as_slice()).unwrap();
        assert_eq!(back, corpus);
        for (a, b) in back.headlines().iter().zip(corpus.headlines()) {
            let bits = |h: &Headline| h.embedding.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_corpus("/nonexistent/corpus.jsonl"),
            Err(DataError::Io { .. })
        ));
    }
}
