//! The shared token normalizer.
//!
//! Every component that compares text (column indexes, schema unification,
//! generated-fact alignment) goes through [`normalize`], so two cells are
//! "equal" exactly when their token sequences are.

/// Lowercases `text`, splits on every run of non-alphanumeric characters and
/// drops empty tokens. No stemming or lemmatization is performed.
pub fn normalize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Normalized tokens joined by single spaces. Handy as a map key.
pub fn normalized_key(text: &str) -> String {
    normalize(text).join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(
            normalize("Water is a KIND of liquid; (H2O)"),
            vec!["water", "is", "a", "kind", "of", "liquid", "h2o"]
        );
    }

    #[test]
    fn empty_and_separator_only() {
        assert!(normalize("").is_empty());
        assert!(normalize(" -- ;; ").is_empty());
    }

    #[test]
    fn keeps_non_ascii_letters() {
        assert_eq!(normalize("Café's"), vec!["café", "s"]);
    }

    #[test]
    fn key_joins_with_spaces() {
        assert_eq!(normalized_key("  a--b  "), "a b");
    }
}
