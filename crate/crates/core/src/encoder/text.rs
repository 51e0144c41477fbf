use crate::kg::INVERSE_PREFIX;

/// Lowercases and splits on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Turns a relation label into encodable text: dots and underscores become
/// spaces, and inverse relations gain a trailing `inverse` token.
pub fn relation_text(label: &str) -> String {
    let (base, inverse) = match label.strip_prefix(INVERSE_PREFIX) {
        Some(rest) => (rest, true),
        None => (label, false),
    };
    let mut text: String = base
        .chars()
        .map(|c| if c == '.' || c == '_' { ' ' } else { c })
        .collect::<String>()
        .to_lowercase();
    if inverse {
        text.push_str(" inverse");
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_strips_punctuation() {
        assert_eq!(tokenize("Who is  the SPOUSE, of X?"), ["who", "is", "the", "spouse", "of", "x"]);
        assert!(tokenize(" ?! ").is_empty());
    }

    #[test]
    fn relation_labels_are_textualised() {
        assert_eq!(relation_text("people.person.spouse"), "people person spouse");
        assert_eq!(tokenize(&relation_text("people.person.spouse")), ["people", "person", "spouse"]);
        assert_eq!(relation_text("~film.directed_by"), "film directed by inverse");
    }
}
