//! The limited character set: an ordered bijection between characters and
//! dense indices `1..=len`, with index 0 reserved for the CTC blank.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::dataset::Sample;

pub const HEADER: &str = "#ctc-charset v1";
pub const VERSION: &str = "v1";
pub const BLANK: usize = 0;

#[derive(Debug, Error, PartialEq)]
pub enum CharsetError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("characters not in charset: {}", fmt_unknown(.0))]
    Unknown(Vec<(usize, char)>),
    #[error("index out of charset: {0}")]
    IndexOutOfCharset(usize),
    #[error("charset file: {0}")]
    Format(String),
    #[error("charset file: {0}")]
    Io(String),
}

fn fmt_unknown(items: &[(usize, char)]) -> String {
    items
        .iter()
        .map(|(pos, c)| format!("{c:?} at {pos}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Removes U+0020 only; other whitespace is treated as a character.
pub fn strip_spaces(text: &str) -> String {
    text.chars().filter(|&c| c != ' ').collect()
}

#[derive(Clone, Debug)]
pub struct Charset {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl PartialEq for Charset {
    fn eq(&self, other: &Self) -> bool {
        self.chars == other.chars
    }
}

impl Eq for Charset {}

impl Charset {
    /// Builds from an explicit character list. Spaces are dropped and later
    /// duplicates ignored, so the result always satisfies the invariants.
    pub fn from_chars<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let mut set = Charset {
            chars: Vec::new(),
            index: HashMap::new(),
        };
        for c in chars {
            set.push(c);
        }
        set
    }

    fn push(&mut self, c: char) {
        if c == ' ' || self.index.contains_key(&c) {
            return;
        }
        self.chars.push(c);
        self.index.insert(c, self.chars.len());
    }

    /// Distinct non-space characters of all labels, in first-occurrence order.
    pub fn build(samples: &[Sample]) -> Result<Self, CharsetError> {
        Self::build_from_labels(samples.iter().map(|s| s.label.as_str()))
    }

    pub fn build_from_labels<'a, I>(labels: I) -> Result<Self, CharsetError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut set = Charset::from_chars(std::iter::empty());
        let mut any = false;
        for label in labels {
            any = true;
            for c in label.chars() {
                set.push(c);
            }
        }
        if !any {
            return Err(CharsetError::EmptyCorpus);
        }
        Ok(set)
    }

    /// Number of characters, excluding the blank.
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Output vocabulary size of a CTC head: characters plus blank.
    pub fn vocab_size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn blank_index(&self) -> usize {
        BLANK
    }

    pub fn version(&self) -> &'static str {
        VERSION
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Character at a dense index; `None` for the blank and out-of-range.
    pub fn char_at(&self, index: usize) -> Option<char> {
        if index == BLANK {
            return None;
        }
        self.chars.get(index - 1).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.index.contains_key(&c)
    }

    /// Maps a label to indices. Spaces are dropped; every character missing
    /// from the set is reported with its position in `label`.
    pub fn encode(&self, label: &str) -> Result<Vec<usize>, CharsetError> {
        let mut out = Vec::with_capacity(label.len());
        let mut unknown = Vec::new();
        for (pos, c) in label.chars().enumerate() {
            if c == ' ' {
                continue;
            }
            match self.index.get(&c) {
                Some(&i) => out.push(i),
                None => unknown.push((pos, c)),
            }
        }
        if unknown.is_empty() {
            Ok(out)
        } else {
            Err(CharsetError::Unknown(unknown))
        }
    }

    pub fn decode_indices(&self, indices: &[usize]) -> Result<String, CharsetError> {
        indices
            .iter()
            .map(|&i| self.char_at(i).ok_or(CharsetError::IndexOutOfCharset(i)))
            .collect()
    }

    /// Serialized form: the header line, then one character per line; the
    /// n-th line after the header holds index n.
    pub fn to_file_string(&self) -> String {
        let mut s = String::with_capacity(HEADER.len() + 1 + self.chars.len() * 4);
        s.push_str(HEADER);
        s.push('\n');
        for c in &self.chars {
            s.push(*c);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CharsetError> {
        let mut lines = text.split('\n');
        match lines.next() {
            Some(h) if h.trim_end_matches('\r') == HEADER => {}
            other => {
                return Err(CharsetError::Format(format!(
                    "expected header {HEADER:?}, found {:?}",
                    other.unwrap_or("")
                )))
            }
        }
        let mut set = Charset::from_chars(std::iter::empty());
        let body: Vec<&str> = lines.collect();
        let n = match body.last() {
            Some(&"") => body.len() - 1,
            _ => body.len(),
        };
        for (i, line) in body[..n].iter().enumerate() {
            let mut it = line.chars();
            let (Some(c), None) = (it.next(), it.next()) else {
                return Err(CharsetError::Format(format!(
                    "line {} must hold exactly one character",
                    i + 2
                )));
            };
            if c == ' ' {
                return Err(CharsetError::Format(format!("line {}: space is not allowed", i + 2)));
            }
            if set.contains(c) {
                return Err(CharsetError::Format(format!("line {}: duplicate {c:?}", i + 2)));
            }
            set.push(c);
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<(), CharsetError> {
        fs::write(path, self.to_file_string()).map_err(|e| CharsetError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CharsetError> {
        let text = fs::read_to_string(path).map_err(|e| CharsetError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

impl fmt::Display for Charset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Charset({} chars)", self.chars.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(ls: &[&str]) -> Vec<Sample> {
        ls.iter().map(|l| Sample::new("x.pgm", *l)).collect()
    }

    #[test]
    fn first_occurrence_order() {
        let cs = Charset::build(&labels(&["ab", "ba"])).unwrap();
        assert_eq!(cs.chars(), &['a', 'b']);
        assert_eq!(cs.len(), 2);
    }

    #[test]
    fn spaces_dropped_at_build() {
        let cs = Charset::build(&labels(&["a b"])).unwrap();
        assert_eq!(cs.chars(), &['a', 'b']);
    }

    #[test]
    fn all_space_label_contributes_nothing() {
        let cs = Charset::build(&labels(&["   ", "z"])).unwrap();
        assert_eq!(cs.chars(), &['z']);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert_eq!(Charset::build(&[]), Err(CharsetError::EmptyCorpus));
        assert_eq!(Charset::build(&[]).unwrap_err().to_string(), "empty corpus");
    }

    #[test]
    fn encode_examples() {
        let cs = Charset::from_chars("ab".chars());
        assert_eq!(cs.encode("").unwrap(), Vec::<usize>::new());
        assert_eq!(cs.encode("ab").unwrap(), vec![1, 2]);
        assert_eq!(cs.encode("a b").unwrap(), vec![1, 2]);
        assert_eq!(cs.encode("ax"), Err(CharsetError::Unknown(vec![(1, 'x')])));
    }

    #[test]
    fn decode_examples() {
        let cs = Charset::from_chars("ab".chars());
        assert_eq!(cs.decode_indices(&[]).unwrap(), "");
        assert_eq!(cs.decode_indices(&[1, 2]).unwrap(), "ab");
        assert_eq!(cs.decode_indices(&[0]), Err(CharsetError::IndexOutOfCharset(0)));
        assert_eq!(cs.decode_indices(&[3]), Err(CharsetError::IndexOutOfCharset(3)));
        assert_eq!(cs.decode_indices(&[0]).unwrap_err().to_string(), "index out of charset: 0");
    }

    #[test]
    fn blank_is_unmapped() {
        let cs = Charset::from_chars("xyz".chars());
        assert_eq!(cs.blank_index(), 0);
        assert_eq!(cs.char_at(0), None);
        for i in 1..=cs.len() {
            assert_eq!(cs.index_of(cs.char_at(i).unwrap()), Some(i));
        }
    }

    #[test]
    fn file_format() {
        let cs = Charset::from_chars("a中".chars());
        assert_eq!(cs.to_file_string(), "#ctc-charset v1\na\n中\n");
        assert_eq!(Charset::parse(&cs.to_file_string()).unwrap(), cs);
        assert!(Charset::parse("a\nb\n").is_err());
        assert!(Charset::parse("#ctc-charset v1\nab\n").is_err());
        assert!(Charset::parse("#ctc-charset v1\na\na\n").is_err());
        assert!(Charset::parse("#ctc-charset v1\n \n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(label in "[a-e ]{0,20}") {
            let cs = Charset::from_chars("abcde".chars());
            let idx = cs.encode(&label).unwrap();
            prop_assert_eq!(cs.decode_indices(&idx).unwrap(), strip_spaces(&label));
        }

        #[test]
        fn serialization_is_stable(corpus in prop::collection::vec("[a-z\u{4e00}-\u{4e20} ]{0,8}", 1..20)) {
            let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
            let a = Charset::build_from_labels(refs.iter().copied()).unwrap();
            let b = Charset::build_from_labels(refs.iter().copied()).unwrap();
            let text = a.to_file_string();
            prop_assert_eq!(&text, &b.to_file_string());
            let reloaded = Charset::parse(&text).unwrap();
            prop_assert_eq!(reloaded.to_file_string(), text);
            prop_assert!(!a.chars().contains(&' '));
        }
    }
}
