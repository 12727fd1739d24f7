use std::collections::HashSet;
use std::sync::OnceLock;

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Version of the bundled stopword list.
pub const STOPWORDS_VERSION: u32 = 1;

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// Lowercases, splits on non-alphanumeric characters, and drops one-character
/// tokens and stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    let stop = stopwords();
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| t.chars().count() >= 2 && !stop.contains(t.as_str()))
        .collect()
}
