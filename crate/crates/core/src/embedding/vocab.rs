use std::collections::HashMap;

use super::EmbedError;

/// Token table built from a corpus. Indices are contiguous from 0, ordered by
/// descending frequency and then by token text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_counts(mut entries: Vec<(String, u64)>) -> Self {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let (tokens, counts) = entries.into_iter().unzip();
        Vocabulary { tokens, counts, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, ix: u32) -> &str {
        &self.tokens[ix as usize]
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.counts[i as usize])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Maps each line to token indices; unknown tokens are dropped.
    pub fn encode<'a>(&self, lines: impl IntoIterator<Item = &'a str>) -> Vec<Vec<u32>> {
        lines
            .into_iter()
            .map(|l| l.split_whitespace().filter_map(|t| self.index_of(t)).collect())
            .filter(|s: &Vec<u32>| !s.is_empty())
            .collect()
    }
}

/// Exact token frequencies over whitespace-separated lines.
pub fn build_vocab<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Vocabulary, EmbedError> {
    let mut counts: HashMap<&'a str, u64> = HashMap::new();
    for line in lines {
        for tok in line.split_whitespace() {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(EmbedError::EmptyCorpus);
    }
    Ok(Vocabulary::from_counts(
        counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let v = build_vocab(["A r B"]).unwrap();
        assert_eq!(v.len(), 3);
        for t in ["A", "r", "B"] {
            assert_eq!(v.count(t), Some(1));
        }
    }

    #[test]
    fn duplicate_lines_double_counts() {
        let v = build_vocab(["A r B", "A r B"]).unwrap();
        assert_eq!(v.count("r"), Some(2));
        assert_eq!(v.total(), 6);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(build_vocab(Vec::<&str>::new()), Err(EmbedError::EmptyCorpus)));
        assert!(matches!(build_vocab(["", "  "]), Err(EmbedError::EmptyCorpus)));
    }

    #[test]
    fn ordering_is_frequency_then_text() {
        let v = build_vocab(["b a c a", "c"]).unwrap();
        assert_eq!(v.tokens(), ["a", "c", "b"]);
        assert_eq!(v.index_of("b"), Some(2));
    }
}
