//! Programmatic quality criteria: grade-level readability and clause-density
//! complexity. Both are deterministic functions of the nugget text.

use crate::util::split_sentences;

/// Words that open a subordinate clause; used by the complexity proxy.
const SUBORDINATORS: [&str; 21] = [
    "because", "although", "though", "while", "since", "if", "unless", "whereas", "after",
    "before", "when", "whenever", "where", "wherever", "until", "that", "which", "who", "whom",
    "whose", "as",
];

fn text_units<'a>(question: &'a str, answers: &'a [String]) -> Vec<&'a str> {
    std::iter::once(question)
        .chain(answers.iter().map(|a| a.as_str()))
        .filter(|t| !t.trim().is_empty())
        .collect()
}

fn words_of(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .filter(|w| w.chars().any(|c| c.is_alphanumeric()))
        .collect()
}

/// Vowel-group syllable count with a silent-e adjustment, minimum 1.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    if letters.is_empty() {
        return 1;
    }
    let is_vowel = |c: char| "aeiouy".contains(c);
    let mut groups = 0;
    let mut in_group = false;
    for &c in &letters {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
            }
            in_group = true;
        } else {
            in_group = false;
        }
    }
    // Trailing silent e: "stone" has one spoken syllable, "table" two.
    if groups > 1 && letters.ends_with(&['e']) && !letters.ends_with(&['l', 'e']) {
        groups -= 1;
    }
    groups.max(1)
}

/// Grade-level readability over question plus answers, clamped to [4, 13].
///
/// Uses the Flesch-Kincaid grade formula
/// `0.39 * words/sentences + 11.8 * syllables/words - 15.59`, with each
/// question or answer contributing at least one sentence unit.
pub fn reading_level(question: &str, answers: &[String]) -> f64 {
    let units = text_units(question, answers);
    let mut sentences = 0usize;
    let mut words = 0usize;
    let mut syllables = 0usize;
    for unit in units {
        sentences += split_sentences(unit).len().max(1);
        for word in words_of(unit) {
            words += 1;
            syllables += count_syllables(word);
        }
    }
    if words == 0 || sentences == 0 {
        return 4.0;
    }
    let grade =
        0.39 * (words as f64 / sentences as f64) + 11.8 * (syllables as f64 / words as f64) - 15.59;
    grade.clamp(4.0, 13.0)
}

/// Syntactic complexity proxy: mean clauses per sentence, where clauses are
/// approximated by one plus the count of commas and subordinating markers,
/// clamped onto the [1, 6] scale.
pub fn complexity(question: &str, answers: &[String]) -> f64 {
    let units = text_units(question, answers);
    let mut total_clauses = 0.0;
    let mut sentence_count = 0usize;
    for unit in units {
        for sentence in split_sentences(unit) {
            let commas = sentence.matches(',').count();
            // The sentence-initial word is skipped: a leading wh-word is an
            // interrogative, not a subordinator.
            let subordinators = sentence
                .split(|c: char| !c.is_alphanumeric() && c != '\'')
                .filter(|w| !w.is_empty())
                .skip(1)
                .filter(|w| {
                    let lower = w.to_lowercase();
                    SUBORDINATORS.contains(&lower.as_str())
                })
                .count();
            total_clauses += 1.0 + commas as f64 + subordinators as f64;
            sentence_count += 1;
        }
    }
    if sentence_count == 0 {
        return 1.0;
    }
    (total_clauses / sentence_count as f64).clamp(1.0, 6.0)
}
