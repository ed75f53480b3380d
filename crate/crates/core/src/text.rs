//! Word tokenization and the smoothed inverse document frequency shared by
//! the hashtag narratives and the topic word distributions.

/// Smoothed idf: `ln((1 + n_docs) / (1 + df)) + 1`.
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "because", "been", "before", "being", "but", "by", "can", "could", "did", "do", "does",
    "doing", "don't", "for", "from", "get", "got", "had", "has", "have", "he", "her", "here",
    "him", "his", "how", "i", "i'm", "if", "in", "into", "is", "it", "it's", "its", "just", "me",
    "more", "my", "no", "not", "now", "of", "on", "one", "only", "or", "our", "out", "over", "rt",
    "so", "some", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this",
    "to", "too", "up", "us", "was", "we", "were", "what", "when", "where", "which", "who", "will",
    "with", "would", "you", "your",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

/// Lowercased content words: urls and @mentions dropped, `#` stripped from
/// hashtags, stopwords and tokens shorter than three characters removed.
pub fn content_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        if raw.starts_with('@') || raw.starts_with("http://") || raw.starts_with("https://") {
            continue;
        }
        for piece in raw.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
            let word = piece.trim_matches('\'').to_lowercase();
            if word.chars().count() >= 3 && !is_stopword(&word) {
                out.push(word);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopwords_sorted() {
        assert!(STOPWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tokenizes() {
        assert_eq!(
            content_words("RT @who: Wash your HANDS! #StayHome https://t.co/x"),
            vec!["wash", "hands", "stayhome"]
        );
    }

    #[test]
    fn idf_values() {
        assert!((smoothed_idf(4, 4) - 1.0).abs() < 1e-15);
        assert!((smoothed_idf(4, 1) - (2.5f64.ln() + 1.0)).abs() < 1e-15);
    }
}
