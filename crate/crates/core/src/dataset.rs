//! Annotation files: UTF-8 TSV, one `relative/image/path<TAB>label` per line.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::charset::{strip_spaces, Charset};
use crate::imaging::{load_image, ImageBuffer};

/// One annotated image. `path` is resolved against the annotation file's
/// directory; `rel` keeps the path as written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub path: PathBuf,
    pub rel: String,
    pub label: String,
}

impl Sample {
    pub fn new(rel: impl Into<String>, label: impl Into<String>) -> Self {
        let rel = rel.into();
        Self {
            path: PathBuf::from(&rel),
            rel,
            label: label.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("cannot read annotations {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: expected `path<TAB>label`")]
    Malformed { path: PathBuf, line: usize },
}

/// Parses annotation text. Blank lines are skipped; a trailing `\r` is
/// tolerated. The label is everything after the first tab, verbatim.
pub fn parse_annotations(text: &str, root: &Path, origin: &Path) -> Result<Vec<Sample>, AnnotationError> {
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let Some((rel, label)) = line.split_once('\t') else {
            return Err(AnnotationError::Malformed {
                path: origin.to_path_buf(),
                line: i + 1,
            });
        };
        if rel.is_empty() {
            return Err(AnnotationError::Malformed {
                path: origin.to_path_buf(),
                line: i + 1,
            });
        }
        samples.push(Sample {
            path: root.join(rel),
            rel: rel.to_string(),
            label: label.to_string(),
        });
    }
    Ok(samples)
}

pub fn read_annotations(path: &Path) -> Result<Vec<Sample>, AnnotationError> {
    let text = fs::read_to_string(path).map_err(|source| AnnotationError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let root = path.parent().unwrap_or_else(|| Path::new("."));
    parse_annotations(&text, root, path)
}

pub fn write_annotations(path: &Path, samples: &[Sample]) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for s in samples {
        writeln!(out, "{}\t{}", s.rel, s.label)?;
    }
    out.flush()
}

/// A decoded sample ready for training or evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedSample {
    pub rel: String,
    /// Native-size image converted to the network's channel count.
    pub image: ImageBuffer,
    /// Label with spaces removed.
    pub label: String,
    /// Charset indices; `None` when the label has characters outside the
    /// charset (such a sample can be evaluated but not trained on).
    pub target: Option<Vec<usize>>,
}

impl LoadedSample {
    pub fn new(rel: impl Into<String>, image: ImageBuffer, label: &str, charset: &Charset) -> Self {
        Self {
            rel: rel.into(),
            image,
            label: strip_spaces(label),
            target: charset.encode(label).ok(),
        }
    }
}

/// A sample that could not be decoded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadFailure {
    pub rel: String,
    pub label: String,
    pub error: String,
}

/// Decodes every sample's image (in parallel) and encodes its label.
/// Results keep annotation order; unreadable images are listed separately.
pub fn load_samples(samples: &[Sample], charset: &Charset, channels: usize) -> (Vec<LoadedSample>, Vec<LoadFailure>) {
    let decoded: Vec<_> = samples.par_iter().map(|s| load_image(&s.path)).collect();
    let mut ok = Vec::with_capacity(samples.len());
    let mut failed = Vec::new();
    for (s, r) in samples.iter().zip(decoded) {
        match r {
            Ok(img) => ok.push(LoadedSample::new(s.rel.clone(), img.with_channels(channels), &s.label, charset)),
            Err(e) => failed.push(LoadFailure {
                rel: s.rel.clone(),
                label: s.label.clone(),
                error: e.to_string(),
            }),
        }
    }
    (ok, failed)
}
