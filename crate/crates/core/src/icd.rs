//! ICD-10 code handling: well-formedness, 3-character categories and chapters.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_CHAPTERS: &str = include_str!("../data/icd10_chapters.csv");

/// Normalised 3-character category (`E11` for `e11.901`) of a well-formed
/// code, or `None` for malformed input.
///
/// Well-formed means a letter, two digits, then optionally a dot followed by
/// one to four alphanumerics (or the same alphanumerics with the dot omitted).
pub fn category(raw: &str) -> Option<String> {
    let code = raw.trim().to_ascii_uppercase();
    let bytes = code.as_bytes();
    if bytes.len() < 3 {
        return None;
    }
    if !bytes[0].is_ascii_uppercase() || !bytes[1].is_ascii_digit() || !bytes[2].is_ascii_digit() {
        return None;
    }
    let rest = &code[3..];
    let tail = rest.strip_prefix('.').unwrap_or(rest);
    if rest.starts_with('.') && tail.is_empty() {
        return None;
    }
    if tail.len() > 4 || !tail.bytes().all(|b| b.is_ascii_alphanumeric()) {
        return None;
    }
    Some(code[..3].to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChapterBlock {
    pub chapter: u8,
    pub block_start: String,
    pub block_end: String,
}

/// Chapter boundaries as inclusive ranges of 3-character categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChapterMap {
    blocks: Vec<ChapterBlock>,
}

impl ChapterMap {
    /// The shipped 22-chapter map.
    pub fn builtin() -> ChapterMap {
        ChapterMap::from_csv(BUILTIN_CHAPTERS.as_bytes()).expect("builtin chapter map parses")
    }

    pub fn load(path: &Path) -> Result<ChapterMap> {
        if !path.is_file() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
        ChapterMap::from_csv(std::fs::File::open(path)?)
    }

    pub fn from_csv(reader: impl std::io::Read) -> Result<ChapterMap> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header != ["chapter", "block_start", "block_end"] {
            return Err(Error::Header {
                table: "chapter_map".into(),
                expected: "chapter,block_start,block_end".into(),
                found: header.join(","),
            });
        }
        let mut blocks = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let chapter: u8 = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("bad chapter number `{}`", &rec[0])))?;
            let start = category(&rec[1]).ok_or_else(|| Error::Data(format!("bad block start `{}`", &rec[1])))?;
            let end = category(&rec[2]).ok_or_else(|| Error::Data(format!("bad block end `{}`", &rec[2])))?;
            if start > end {
                return Err(Error::Data(format!("chapter {chapter}: block {start} > {end}")));
            }
            blocks.push(ChapterBlock {
                chapter,
                block_start: start,
                block_end: end,
            });
        }
        if blocks.is_empty() {
            return Err(Error::Data("chapter map is empty".into()));
        }
        Ok(ChapterMap { blocks })
    }

    pub fn blocks(&self) -> &[ChapterBlock] {
        &self.blocks
    }

    /// Highest chapter number; the chapter feature set is `c1..=c{max}`.
    pub fn max_chapter(&self) -> u8 {
        self.blocks.iter().map(|b| b.chapter).max().unwrap_or(0)
    }

    /// Chapter containing a 3-character category.
    pub fn chapter_of(&self, category: &str) -> Option<u8> {
        self.blocks
            .iter()
            .find(|b| b.block_start.as_str() <= category && category <= b.block_end.as_str())
            .map(|b| b.chapter)
    }

    /// Category of a code that is both well-formed and inside some chapter.
    pub fn valid_category(&self, raw: &str) -> Option<String> {
        category(raw).filter(|c| self.chapter_of(c).is_some())
    }
}

/// Reference set a code is checked against when auditing validity.
#[derive(Debug, Clone)]
pub enum IcdCatalog {
    /// Explicit list of codes, compared after trimming and upper-casing.
    Explicit(HashSet<String>),
    /// Any well-formed code whose category falls in a chapter block.
    Structural(ChapterMap),
}

impl IcdCatalog {
    pub fn explicit<I, S>(codes: I) -> IcdCatalog
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        IcdCatalog::Explicit(
            codes
                .into_iter()
                .map(|c| c.as_ref().trim().to_ascii_uppercase())
                .filter(|c| !c.is_empty())
                .collect(),
        )
    }

    pub fn structural(map: ChapterMap) -> IcdCatalog {
        IcdCatalog::Structural(map)
    }

    /// One code per line; blank lines ignored.
    pub fn load(path: &Path) -> Result<IcdCatalog> {
        if !path.is_file() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path)?;
        Ok(IcdCatalog::explicit(text.lines()))
    }

    pub fn contains(&self, raw: &str) -> bool {
        match self {
            IcdCatalog::Explicit(set) => set.contains(&raw.trim().to_ascii_uppercase()),
            IcdCatalog::Structural(map) => map.valid_category(raw).is_some(),
        }
    }
}
