//! Tokenization and answer normalization shared by every stage.

/// Lowercase alphanumeric word split. Everything that is not alphanumeric
/// separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Canonical form used for answer matching: lowercase, punctuation removed,
/// whitespace collapsed, one leading article dropped.
///
/// A string consisting of nothing but an article is kept as that article.
pub fn normalize_answer(s: &str) -> String {
    let tokens = tokenize(s);
    let start = match tokens.first() {
        Some(first) if tokens.len() > 1 && ARTICLES.contains(&first.as_str()) => 1,
        _ => 0,
    };
    tokens[start..].join(" ")
}

/// True when `needle` occurs in `haystack` on token boundaries. Both inputs
/// must already be normalized.
pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let padded_hay = format!(" {haystack} ");
    let padded_needle = format!(" {needle} ");
    padded_hay.contains(&padded_needle)
}
