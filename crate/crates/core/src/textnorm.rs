//! Tokenization, rule-based lemmatization and coarse part-of-speech tagging.
//!
//! Every other module sees sentences through this one, so an inflected
//! corpus word such as "thrown" lines up with the concept "throw".

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SHIPPED_LEXICON: &str = include_str!("../data/lexicon.json");

/// Coarse part-of-speech classes. Only the first three matter for concept
/// extraction; everything else collapses to `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    #[serde(rename = "NOUN")]
    Noun,
    #[serde(rename = "PROPN")]
    Propn,
    #[serde(rename = "VERB")]
    Verb,
    #[serde(rename = "OTHER")]
    Other,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "NOUN",
            Pos::Propn => "PROPN",
            Pos::Verb => "VERB",
            Pos::Other => "OTHER",
        }
    }

    /// Whether tokens of this class can become pseudo concepts.
    pub fn is_content(self) -> bool {
        matches!(self, Pos::Noun | Pos::Propn | Pos::Verb)
    }

    // Lower is preferred when a lemma carries several tags.
    fn priority(self) -> u8 {
        match self {
            Pos::Noun => 0,
            Pos::Verb => 1,
            Pos::Propn => 2,
            Pos::Other => 3,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = String;

    /// Accepts the four coarse tags; any other non-empty tag (ADJ, DET, ...)
    /// maps to `Other` so output from richer taggers can be fed in directly.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "" => Err("empty part-of-speech tag".to_string()),
            "NOUN" => Ok(Pos::Noun),
            "PROPN" => Ok(Pos::Propn),
            "VERB" => Ok(Pos::Verb),
            _ => Ok(Pos::Other),
        }
    }
}

/// One analysed token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
    pub min_stem_len: usize,
}

impl SuffixRule {
    fn apply(&self, word: &str) -> Option<String> {
        let stem = word.strip_suffix(self.suffix.as_str())?;
        if stem.chars().count() < self.min_stem_len {
            return None;
        }
        Some(format!("{stem}{}", self.replacement))
    }
}

#[derive(Deserialize)]
struct RawLexicon {
    exceptions: HashMap<String, String>,
    suffix_rules: Vec<(String, String, usize)>,
    pos_lexicon: HashMap<String, Vec<String>>,
}

/// Exception table, ordered suffix rules and a lemma → tags dictionary.
#[derive(Debug, Clone)]
pub struct LemmaLexicon {
    exceptions: HashMap<String, String>,
    suffix_rules: Vec<SuffixRule>,
    pos_lexicon: HashMap<String, Vec<Pos>>,
}

impl LemmaLexicon {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawLexicon = serde_json::from_str(text).map_err(|e| Error::json("lexicon", e))?;

        let mut suffix_rules = Vec::with_capacity(raw.suffix_rules.len());
        for (i, (suffix, replacement, min_stem_len)) in raw.suffix_rules.into_iter().enumerate() {
            if suffix.is_empty() || (replacement.is_empty() && min_stem_len == 0) {
                return Err(Error::Schema {
                    index: i,
                    message: format!(
                        "suffix rule {suffix:?} -> {replacement:?} can yield an empty lemma"
                    ),
                });
            }
            suffix_rules.push(SuffixRule {
                suffix,
                replacement,
                min_stem_len,
            });
        }

        let mut exceptions = HashMap::with_capacity(raw.exceptions.len());
        for (surface, lemma) in raw.exceptions {
            if lemma.is_empty() {
                return Err(Error::Schema {
                    index: 0,
                    message: format!("exception {surface:?} maps to an empty lemma"),
                });
            }
            exceptions.insert(surface.to_lowercase(), lemma.to_lowercase());
        }

        let mut pos_lexicon = HashMap::with_capacity(raw.pos_lexicon.len());
        for (lemma, tags) in raw.pos_lexicon {
            let mut parsed = tags
                .iter()
                .map(|t| t.parse::<Pos>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|message| Error::Schema { index: 0, message })?;
            parsed.sort_by_key(|p| p.priority());
            parsed.dedup();
            pos_lexicon.insert(lemma.to_lowercase(), parsed);
        }

        Ok(LemmaLexicon {
            exceptions,
            suffix_rules,
            pos_lexicon,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The lexicon bundled with the crate.
    pub fn shipped() -> &'static LemmaLexicon {
        static LEXICON: OnceLock<LemmaLexicon> = OnceLock::new();
        LEXICON.get_or_init(|| {
            LemmaLexicon::from_json(SHIPPED_LEXICON).expect("bundled lexicon is valid")
        })
    }

    pub fn suffix_rules(&self) -> &[SuffixRule] {
        &self.suffix_rules
    }

    pub fn exceptions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.exceptions
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Lemmas known to the part-of-speech dictionary.
    pub fn known_lemmas(&self) -> impl Iterator<Item = &str> {
        self.pos_lexicon.keys().map(String::as_str)
    }

    /// Tags for a lemma, highest priority first.
    pub fn tags(&self, lemma: &str) -> &[Pos] {
        self.pos_lexicon
            .get(lemma)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Exception lookup, then the first matching suffix rule, then identity.
    pub fn lemmatize(&self, surface: &str) -> String {
        if let Some(lemma) = self.exceptions.get(surface) {
            return lemma.clone();
        }
        self.suffix_rules
            .iter()
            .find_map(|rule| rule.apply(surface))
            .unwrap_or_else(|| surface.to_string())
    }
}

/// Free-function form of [`LemmaLexicon::lemmatize`].
pub fn lemmatize(surface: &str, lexicon: &LemmaLexicon) -> String {
    lexicon.lemmatize(surface)
}

/// Splits text into word runs and single punctuation characters, keeping the
/// original casing.
pub fn tokenize_cased(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

fn lowercase_token(token: &str) -> String {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if !c.is_alphanumeric() => token.to_string(),
        // Lowercasing can introduce combining marks (e.g. U+0130); drop them so
        // a word token stays a single alphanumeric run.
        _ => token
            .to_lowercase()
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect(),
    }
}

/// Lowercased word tokens plus single-character punctuation tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_cased(text)
        .iter()
        .map(|t| lowercase_token(t))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Assigns lemma and coarse tag to each token.
///
/// Tokens may carry their original casing: an unknown word capitalized
/// anywhere but the first position is taken as a proper noun.
pub fn tag<S: AsRef<str>>(tokens: &[S], lexicon: &LemmaLexicon) -> Vec<Token> {
    let mut out = Vec::with_capacity(tokens.len());
    for original in tokens {
        let original = original.as_ref();
        let surface = lowercase_token(original);
        if surface.is_empty() {
            continue;
        }
        let lemma = lexicon.lemmatize(&surface);
        let index = out.len();
        let pos = match lexicon.tags(&lemma).first() {
            Some(&p) => p,
            None if index > 0 && original.chars().next().is_some_and(char::is_uppercase) => {
                Pos::Propn
            }
            None => Pos::Other,
        };
        out.push(Token {
            surface,
            lemma,
            pos,
            index,
        });
    }
    out
}

/// Tokenize and tag raw text in one step.
pub fn analyze(text: &str, lexicon: &LemmaLexicon) -> Vec<Token> {
    tag(&tokenize_cased(text), lexicon)
}

/// Parses `surface<TAB>lemma<TAB>pos` lines, one sentence per blank-line
/// separated block.
pub fn parse_pretagged<R: BufRead>(reader: R) -> Result<Vec<Vec<Token>>> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::PreTagged {
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::PreTagged {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let surface = fields[0].trim();
        let lemma = fields[1].trim().to_lowercase();
        if surface.is_empty() || lemma.is_empty() {
            return Err(Error::PreTagged {
                line: line_no,
                message: "empty surface or lemma".to_string(),
            });
        }
        let pos = fields[2]
            .parse::<Pos>()
            .map_err(|message| Error::PreTagged {
                line: line_no,
                message,
            })?;
        current.push(Token {
            surface: surface.to_lowercase(),
            lemma,
            pos,
            index: current.len(),
        });
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}
