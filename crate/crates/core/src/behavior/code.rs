//! Lexical code features: branch-keyword complexity, line count, and a
//! four-way algorithmic-paradigm classifier.
//!
//! Everything here is lexical by design. Word tokens are maximal
//! `[A-Za-z_][A-Za-z0-9_]*` runs; no parsing, no comment or string stripping,
//! so any text yields a descriptor and unparseable code falls through the
//! ladder to the iterative default.

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

const BRANCH_KEYWORDS: &[&str] = &["if", "elif", "while", "for", "and", "or", "except", "case"];
const FUNCTIONAL_TOKENS: &[&str] = &["map", "filter", "reduce", "lambda"];

/// Modules whose import does not count as library use. Type annotations are
/// the one import the classifier treats as free.
pub const DEFAULT_BUILTIN_IMPORTS: &[&str] = &["typing"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Iterative,
    Recursive,
    Functional,
    Library,
}

impl Paradigm {
    pub const ALL: [Paradigm; 4] = [
        Paradigm::Iterative,
        Paradigm::Recursive,
        Paradigm::Functional,
        Paradigm::Library,
    ];

    pub fn index(self) -> usize {
        match self {
            Paradigm::Iterative => 0,
            Paradigm::Recursive => 1,
            Paradigm::Functional => 2,
            Paradigm::Library => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::Iterative => "iterative",
            Paradigm::Recursive => "recursive",
            Paradigm::Functional => "functional",
            Paradigm::Library => "library",
        }
    }

    pub fn from_str_loose(s: &str) -> Option<Paradigm> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iterative" => Some(Paradigm::Iterative),
            "recursive" => Some(Paradigm::Recursive),
            "functional" => Some(Paradigm::Functional),
            "library" => Some(Paradigm::Library),
            _ => None,
        }
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self.index()] = 1.0;
        v
    }
}

impl std::fmt::Display for Paradigm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Raw (un-normalized) code features plus the paradigm class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitFeaturesCode {
    /// 1 + branch keyword count.
    pub complexity_raw: f64,
    /// Non-blank, non-`#`-comment line count.
    pub loc_raw: f64,
    pub paradigm: Paradigm,
}

impl ExplicitFeaturesCode {
    /// Normalized 6-vector: [complexity, loc, one-hot paradigm]. The caller's
    /// normalizer must already have observed the raw values.
    pub fn normalized(&self, normalizer: &FeatureNormalizer) -> Vec<f64> {
        let mut v = vec![
            normalizer.normalize_complexity(self.complexity_raw),
            normalizer.normalize_loc(self.loc_raw),
        ];
        v.extend_from_slice(&self.paradigm.one_hot());
        v
    }
}

pub fn code_features(source: &str) -> ExplicitFeaturesCode {
    code_features_with_builtins(source, DEFAULT_BUILTIN_IMPORTS)
}

pub fn code_features_with_builtins(source: &str, builtin_imports: &[&str]) -> ExplicitFeaturesCode {
    let tokens = word_tokens(source);
    let branch_count = tokens
        .iter()
        .filter(|t| BRANCH_KEYWORDS.contains(&t.as_str()))
        .count();
    let loc = source
        .lines()
        .filter(|l| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .count();

    let paradigm = if has_recursive_def(source) {
        Paradigm::Recursive
    } else if tokens.iter().any(|t| FUNCTIONAL_TOKENS.contains(&t.as_str())) {
        Paradigm::Functional
    } else if has_non_builtin_import(source, builtin_imports) {
        Paradigm::Library
    } else {
        Paradigm::Iterative
    };

    ExplicitFeaturesCode {
        complexity_raw: (1 + branch_count) as f64,
        loc_raw: loc as f64,
        paradigm,
    }
}

fn word_tokens(source: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in source.chars() {
        if ch.is_ascii_alphanumeric() || ch == '_' {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// A function is recursive when its own name reappears as a call inside its
/// indented body. Bodies are delimited by indentation, Python style.
fn has_recursive_def(source: &str) -> bool {
    let lines: Vec<&str> = source.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let trimmed = line.trim_start();
        let Some(rest) = trimmed.strip_prefix("def ") else {
            continue;
        };
        let name: String = rest
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect();
        if name.is_empty() {
            continue;
        }
        let def_indent = line.len() - trimmed.len();
        for body_line in lines.iter().skip(i + 1) {
            let body_trimmed = body_line.trim_start();
            if body_trimmed.is_empty() {
                continue;
            }
            let indent = body_line.len() - body_trimmed.len();
            if indent <= def_indent {
                break;
            }
            if contains_call(body_line, &name) {
                return true;
            }
        }
    }
    false
}

/// Whole-word occurrence of `name` followed by `(`. A leading `.` means a
/// method call on some other value, which is not a self-call.
fn contains_call(line: &str, name: &str) -> bool {
    let bytes = line.as_bytes();
    let mut start = 0;
    while let Some(pos) = line[start..].find(name) {
        let begin = start + pos;
        let end = begin + name.len();
        let left_ok = begin == 0 || (!is_word_byte(bytes[begin - 1]) && bytes[begin - 1] != b'.');
        let right_word = end < bytes.len() && is_word_byte(bytes[end]);
        if left_ok && !right_word {
            let tail = line[end..].trim_start();
            if tail.starts_with('(') {
                return true;
            }
        }
        start = begin + 1;
    }
    false
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Any `import x` / `from x import ...` line whose top-level module is not in
/// the builtin allowlist.
fn has_non_builtin_import(source: &str, builtin_imports: &[&str]) -> bool {
    for line in source.lines() {
        let t = line.trim();
        let module = if let Some(rest) = t.strip_prefix("import ") {
            Some(rest)
        } else {
            t.strip_prefix("from ")
        };
        let Some(rest) = module else { continue };
        let top: String = rest
            .trim_start()
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect();
        if !top.is_empty() && !builtin_imports.contains(&top.as_str()) {
            return true;
        }
    }
    false
}

/// Running maxima for complexity and line count, shared across evaluations.
/// Updates are atomic (f64 bit tricks work because both values are
/// non-negative), so descriptor computation can run on multiple threads.
#[derive(Debug)]
pub struct FeatureNormalizer {
    max_complexity: AtomicU64,
    max_loc: AtomicU64,
}

impl FeatureNormalizer {
    pub fn new() -> Self {
        FeatureNormalizer {
            max_complexity: AtomicU64::new(1.0f64.to_bits()),
            max_loc: AtomicU64::new(1.0f64.to_bits()),
        }
    }

    pub fn from_maxima(max_complexity: f64, max_loc: f64) -> Self {
        FeatureNormalizer {
            max_complexity: AtomicU64::new(max_complexity.max(1.0).to_bits()),
            max_loc: AtomicU64::new(max_loc.max(1.0).to_bits()),
        }
    }

    pub fn observe(&self, features: &ExplicitFeaturesCode) {
        atomic_max(&self.max_complexity, features.complexity_raw);
        atomic_max(&self.max_loc, features.loc_raw);
    }

    pub fn max_complexity(&self) -> f64 {
        f64::from_bits(self.max_complexity.load(Ordering::Acquire))
    }

    pub fn max_loc(&self) -> f64 {
        f64::from_bits(self.max_loc.load(Ordering::Acquire))
    }

    pub fn normalize_complexity(&self, raw: f64) -> f64 {
        (raw / self.max_complexity()).clamp(0.0, 1.0)
    }

    pub fn normalize_loc(&self, raw: f64) -> f64 {
        (raw / self.max_loc()).clamp(0.0, 1.0)
    }
}

impl Default for FeatureNormalizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for FeatureNormalizer {
    fn clone(&self) -> Self {
        Self::from_maxima(self.max_complexity(), self.max_loc())
    }
}

/// Monotone max on non-negative f64 bits.
fn atomic_max(cell: &AtomicU64, value: f64) {
    debug_assert!(value >= 0.0);
    let bits = value.to_bits();
    let mut current = cell.load(Ordering::Acquire);
    while f64::from_bits(current) < value {
        match cell.compare_exchange_weak(current, bits, Ordering::AcqRel, Ordering::Acquire) {
            Ok(_) => break,
            Err(observed) => current = observed,
        }
    }
}

impl Serialize for FeatureNormalizer {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.max_complexity(), self.max_loc()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FeatureNormalizer {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (c, l) = <(f64, f64)>::deserialize(deserializer)?;
        Ok(Self::from_maxima(c, l))
    }
}
