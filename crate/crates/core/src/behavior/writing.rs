//! Writing features: lexicon sentiment, an F-score formality measure, and
//! Flesch-Kincaid readability.
//!
//! Part-of-speech classes come from bundled closed-class word lists plus a
//! suffix heuristic for the open classes; unknown words default to noun.
//! The lexicon and word lists live under `fixtures/` and can be replaced at
//! load time.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

const LEXICON_TSV: &str = include_str!("../../fixtures/sentiment_lexicon.tsv");
const ARTICLES: &str = include_str!("../../fixtures/pos/articles.txt");
const PREPOSITIONS: &str = include_str!("../../fixtures/pos/prepositions.txt");
const PRONOUNS: &str = include_str!("../../fixtures/pos/pronouns.txt");
const INTERJECTIONS: &str = include_str!("../../fixtures/pos/interjections.txt");
const CONJUNCTIONS: &str = include_str!("../../fixtures/pos/conjunctions.txt");
const COMMON_VERBS: &str = include_str!("../../fixtures/pos/verbs_common.txt");
const COMMON_ADVERBS: &str = include_str!("../../fixtures/pos/adverbs_common.txt");

/// Raw writing features. `sentiment` is pre-normalization, in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitFeaturesWriting {
    pub sentiment: f64,
    pub formality: f64,
    pub readability: f64,
}

impl ExplicitFeaturesWriting {
    /// Descriptor 3-vector in [0,1]: sentiment affinely rescaled from [-1,1].
    pub fn normalized(&self) -> Vec<f64> {
        vec![(self.sentiment + 1.0) / 2.0, self.formality, self.readability]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pos {
    Noun,
    Adjective,
    Preposition,
    Article,
    Pronoun,
    Verb,
    Adverb,
    Interjection,
    Other,
}

/// Bundled sentiment lexicon and POS word lists.
#[derive(Debug, Clone)]
pub struct Lexicons {
    valence: HashMap<String, f64>,
    articles: Vec<String>,
    prepositions: Vec<String>,
    pronouns: Vec<String>,
    interjections: Vec<String>,
    conjunctions: Vec<String>,
    verbs: Vec<String>,
    adverbs: Vec<String>,
}

impl Lexicons {
    /// The fixtures compiled into the crate.
    pub fn bundled() -> Self {
        Lexicons {
            valence: parse_lexicon(LEXICON_TSV).expect("bundled lexicon is well-formed"),
            articles: parse_word_list(ARTICLES),
            prepositions: parse_word_list(PREPOSITIONS),
            pronouns: parse_word_list(PRONOUNS),
            interjections: parse_word_list(INTERJECTIONS),
            conjunctions: parse_word_list(CONJUNCTIONS),
            verbs: parse_word_list(COMMON_VERBS),
            adverbs: parse_word_list(COMMON_ADVERBS),
        }
    }

    /// Load replacements from a directory holding `sentiment_lexicon.tsv` and
    /// a `pos/` subdirectory with one file per class.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            std::fs::read_to_string(dir.join(name)).map_err(Error::from)
        };
        Ok(Lexicons {
            valence: parse_lexicon(&read("sentiment_lexicon.tsv")?)?,
            articles: parse_word_list(&read("pos/articles.txt")?),
            prepositions: parse_word_list(&read("pos/prepositions.txt")?),
            pronouns: parse_word_list(&read("pos/pronouns.txt")?),
            interjections: parse_word_list(&read("pos/interjections.txt")?),
            conjunctions: parse_word_list(&read("pos/conjunctions.txt")?),
            verbs: parse_word_list(&read("pos/verbs_common.txt")?),
            adverbs: parse_word_list(&read("pos/adverbs_common.txt")?),
        })
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.valence.get(word).copied()
    }

    fn classify(&self, word: &str) -> Pos {
        let contains = |list: &[String]| list.iter().any(|w| w == word);
        if contains(&self.articles) {
            return Pos::Article;
        }
        if contains(&self.pronouns) {
            return Pos::Pronoun;
        }
        if contains(&self.prepositions) {
            return Pos::Preposition;
        }
        if contains(&self.conjunctions) {
            return Pos::Other;
        }
        if contains(&self.interjections) {
            return Pos::Interjection;
        }
        if contains(&self.verbs) {
            return Pos::Verb;
        }
        if contains(&self.adverbs) {
            return Pos::Adverb;
        }
        suffix_class(word)
    }
}

fn suffix_class(word: &str) -> Pos {
    if word.len() > 3 && word.ends_with("ly") {
        return Pos::Adverb;
    }
    const ADJECTIVE_SUFFIXES: &[&str] = &[
        "ous", "ful", "ive", "able", "ible", "ic", "ish", "less", "est",
    ];
    if word.len() > 4 && ADJECTIVE_SUFFIXES.iter().any(|s| word.ends_with(s)) {
        return Pos::Adjective;
    }
    const VERB_SUFFIXES: &[&str] = &["ing", "ed", "ize", "ise", "ify"];
    if word.len() > 4 && VERB_SUFFIXES.iter().any(|s| word.ends_with(s)) {
        return Pos::Verb;
    }
    Pos::Noun
}

fn parse_lexicon(raw: &str) -> Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for (lineno, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, value) = line.split_once('\t').ok_or_else(|| {
            Error::config(format!("lexicon line {} is not word<TAB>valence", lineno + 1))
        })?;
        let valence: f64 = value.trim().parse().map_err(|_| {
            Error::config(format!("lexicon line {}: bad valence {value:?}", lineno + 1))
        })?;
        if !(-1.0..=1.0).contains(&valence) {
            return Err(Error::config(format!(
                "lexicon line {}: valence {valence} outside [-1,1]",
                lineno + 1
            )));
        }
        map.insert(word.to_lowercase(), valence);
    }
    Ok(map)
}

fn parse_word_list(raw: &str) -> Vec<String> {
    raw.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Words: maximal letter runs (internal apostrophes kept), lowercased.
fn words_of(text: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphabetic() || (ch == '\'' && !current.is_empty()) {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    words.retain(|w| w.chars().any(|c| c.is_alphabetic()));
    for w in &mut words {
        while w.ends_with('\'') {
            w.pop();
        }
    }
    words
}

fn sentence_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_terminator = false;
    for ch in text.chars() {
        if ch == '.' || ch == '!' || ch == '?' {
            if !in_terminator {
                count += 1;
            }
            in_terminator = true;
        } else {
            in_terminator = false;
        }
    }
    count.max(1)
}

/// Vowel-group heuristic with a silent trailing `e` adjustment; minimum 1.
fn syllables(word: &str) -> usize {
    let chars: Vec<char> = word.chars().filter(|c| c.is_ascii_alphabetic()).collect();
    if chars.is_empty() {
        return 1;
    }
    let is_vowel = |c: char| "aeiouy".contains(c.to_ascii_lowercase());
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = chars.len();
    let ends_le = n > 2 && chars[n - 1].to_ascii_lowercase() == 'e' && chars[n - 2].to_ascii_lowercase() == 'l';
    if n > 2 && chars[n - 1].to_ascii_lowercase() == 'e' && !is_vowel(chars[n - 2]) && !ends_le && groups > 1 {
        groups -= 1;
    }
    groups.max(1)
}

pub fn writing_features(text: &str, lexicons: &Lexicons) -> Result<ExplicitFeaturesWriting> {
    let words = words_of(text);
    if words.is_empty() {
        return Err(Error::evaluation("writing features need at least one word"));
    }
    let total = words.len() as f64;

    let hits: Vec<f64> = words.iter().filter_map(|w| lexicons.valence(w)).collect();
    let sentiment = if hits.is_empty() {
        0.0
    } else {
        hits.iter().sum::<f64>() / hits.len() as f64
    };

    let mut counts = [0usize; 9];
    for w in &words {
        counts[lexicons.classify(w) as usize] += 1;
    }
    let pct = |p: Pos| 100.0 * counts[p as usize] as f64 / total;
    // Heylighen-Dewaele F-score, rescaled from [0,100] to [0,1].
    let f_score = (pct(Pos::Noun) + pct(Pos::Adjective) + pct(Pos::Preposition) + pct(Pos::Article)
        - pct(Pos::Pronoun)
        - pct(Pos::Verb)
        - pct(Pos::Adverb)
        - pct(Pos::Interjection)
        + 100.0)
        / 2.0;
    let formality = (f_score / 100.0).clamp(0.0, 1.0);

    let sentences = sentence_count(text) as f64;
    let syllable_total: usize = words.iter().map(|w| syllables(w)).sum();
    let grade = 0.39 * (total / sentences) + 11.8 * (syllable_total as f64 / total) - 15.59;
    let readability = grade.clamp(0.0, 20.0) / 20.0;

    Ok(ExplicitFeaturesWriting {
        sentiment,
        formality,
        readability,
    })
}
