use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// Common English function words, including the fragments the tokenizer
/// leaves behind from contractions ("don't" → "don", "t").
pub const ENGLISH: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "ain", "all", "am", "an", "and", "any",
    "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "couldn", "d", "did", "didn", "do", "does", "doesn", "doing",
    "don", "down", "during", "each", "few", "for", "from", "further", "had", "hadn", "has",
    "hasn", "have", "haven", "having", "he", "her", "here", "hers", "herself", "him", "himself",
    "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself", "just", "ll", "m",
    "ma", "me", "mightn", "more", "most", "mustn", "my", "myself", "needn", "no", "nor", "not",
    "now", "o", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves",
    "out", "over", "own", "re", "s", "same", "shan", "she", "should", "shouldn", "so", "some",
    "such", "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "under", "until", "up", "ve",
    "very", "was", "wasn", "we", "were", "weren", "what", "when", "where", "which", "while",
    "who", "whom", "why", "will", "with", "won", "wouldn", "y", "you", "your", "yours",
    "yourself", "yourselves",
];

pub const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

pub const DAYS: &[&str] = &[
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
];

pub const DIRECTIONS: &[&str] = &["left", "right"];

/// Words removed before building text items and candidate names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopLists {
    words: HashSet<String>,
}

impl StopLists {
    /// English stop words, month and day names, and "left"/"right".
    pub fn standard() -> Self {
        let words = ENGLISH
            .iter()
            .chain(MONTHS)
            .chain(DAYS)
            .chain(DIRECTIONS)
            .map(|w| w.to_string())
            .collect();
        StopLists { words }
    }

    pub fn empty() -> Self {
        StopLists {
            words: HashSet::new(),
        }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        StopLists {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn extend<I, S>(&mut self, words: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.words.extend(words.into_iter().map(Into::into));
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    /// Tokens with stop words removed, order preserved.
    pub fn clean<'a>(&self, tokens: &'a [String]) -> Vec<&'a str> {
        tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !self.contains(t))
            .collect()
    }
}

impl Default for StopLists {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_lists() {
        let s = StopLists::standard();
        for w in ["the", "or", "i", "march", "sunday", "left", "right", "t"] {
            assert!(s.contains(w), "{w}");
        }
        assert!(!s.contains("police"));
        let toks: Vec<String> = ["the", "riot", "on", "monday"].iter().map(|s| s.to_string()).collect();
        assert_eq!(s.clean(&toks), vec!["riot"]);
    }
}
