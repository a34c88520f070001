//! Answer extraction from raw model completions.
//!
//! Completions are messy: some models answer with a bare name, some embed it
//! in "The answer is: NAME", and some regenerate the entire prompt before
//! answering. Extraction first strips a regenerated prompt prefix (detected
//! by normalized Levenshtein distance), then takes the first single-word
//! answer, then falls back to scanning for answer patterns. Anything else is
//! a skip, never a wrong answer.

use serde::{Deserialize, Serialize};

/// Unit-cost edit distance over characters.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitution.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionStatus {
    Answered,
    Skipped,
}

/// What extraction made of one completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub status: ExtractionStatus,
    /// The matched candidate, in its canonical spelling from the candidate set.
    pub answer: Option<String>,
    /// Why the trial was skipped, when it was.
    pub reason: Option<String>,
    /// Whether a regenerated prompt prefix was removed first.
    pub prompt_stripped: bool,
}

impl ExtractionOutcome {
    pub fn is_answered(&self) -> bool {
        self.status == ExtractionStatus::Answered
    }

    fn answered(answer: String, prompt_stripped: bool) -> Self {
        Self {
            status: ExtractionStatus::Answered,
            answer: Some(answer),
            reason: None,
            prompt_stripped,
        }
    }

    fn skipped(reason: impl Into<String>, prompt_stripped: bool) -> Self {
        Self {
            status: ExtractionStatus::Skipped,
            answer: None,
            reason: Some(reason.into()),
            prompt_stripped,
        }
    }
}

/// Extraction configuration. The threshold is the maximum normalized edit
/// distance (distance / prompt length) under which an output prefix counts
/// as a regenerated prompt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extractor {
    pub strip_threshold: f64,
}

impl Default for Extractor {
    fn default() -> Self {
        Self {
            strip_threshold: 0.10,
        }
    }
}

/// Patterns that introduce an answer, tried in the order they occur in the
/// output. Matching is case-insensitive.
const ANSWER_PATTERN: &str = r#"(?i)(?:\bthe\s+answer\s+is:?|\banswer:)\s*("?[^\s"]+"?)"#;

fn answer_regex() -> &'static regex::Regex {
    use std::sync::OnceLock;
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    RE.get_or_init(|| regex::Regex::new(ANSWER_PATTERN).expect("answer pattern compiles"))
}

fn normalize_token(token: &str) -> &str {
    token
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '\u{201c}' | '\u{201d}' | '\u{2018}' | '\u{2019}' | '(' | ')'))
        .trim_end_matches(|c: char| matches!(c, '.' | ',' | '!' | '?' | ';' | ':'))
}

fn match_candidate<'c>(token: &str, candidates: &'c [String]) -> Option<&'c str> {
    let token = normalize_token(token);
    if token.is_empty() {
        return None;
    }
    candidates
        .iter()
        .find(|c| c.eq_ignore_ascii_case(token))
        .map(|c| c.as_str())
}

impl Extractor {
    /// Remove a regenerated prompt prefix from `output` if its leading
    /// `prompt.chars().count()` characters are within the normalized edit
    /// distance threshold of the prompt. Returns the remainder and whether
    /// stripping happened.
    pub fn strip_regenerated_prompt<'a>(&self, output: &'a str, prompt: &str) -> (&'a str, bool) {
        let prompt_len = prompt.chars().count();
        if prompt_len == 0 {
            return (output, false);
        }
        let mut char_indices = output.char_indices();
        let boundary = match char_indices.nth(prompt_len - 1) {
            // An output shorter than the prompt cannot contain a full echo.
            None => return (output, false),
            Some((idx, ch)) => idx + ch.len_utf8(),
        };
        let prefix = &output[..boundary];
        let distance = levenshtein(prefix, prompt);
        if distance as f64 / prompt_len as f64 <= self.strip_threshold {
            (&output[boundary..], true)
        } else {
            (output, false)
        }
    }

    /// Extract the first valid candidate answer from a completion.
    pub fn extract_answer(
        &self,
        output: &str,
        prompt: &str,
        candidates: &[String],
    ) -> ExtractionOutcome {
        debug_assert!(!candidates.is_empty(), "candidate set must be nonempty");
        let (text, stripped) = self.strip_regenerated_prompt(output, prompt);
        let text = text.trim();
        if text.is_empty() {
            return ExtractionOutcome::skipped("empty output", stripped);
        }
        // Single-word path: the first token is itself an answer.
        if let Some(first) = text.split_whitespace().next() {
            if let Some(answer) = match_candidate(first, candidates) {
                return ExtractionOutcome::answered(answer.to_owned(), stripped);
            }
        }
        // Pattern path: first "The answer is: X"-style mention that names a
        // candidate.
        for capture in answer_regex().captures_iter(text) {
            if let Some(answer) = match_candidate(&capture[1], candidates) {
                return ExtractionOutcome::answered(answer.to_owned(), stripped);
            }
        }
        ExtractionOutcome::skipped("no candidate answer found", stripped)
    }
}

/// Convenience wrapper using the default threshold.
pub fn extract_answer(output: &str, prompt: &str, candidates: &[String]) -> ExtractionOutcome {
    Extractor::default().extract_answer(output, prompt, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cands(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    /// Independent full-matrix oracle for the edit distance.
    fn levenshtein_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 0..=a.len() {
            dp[i][0] = i;
        }
        for j in 0..=b.len() {
            dp[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                dp[i][j] = (dp[i - 1][j] + 1)
                    .min(dp[i][j - 1] + 1)
                    .min(dp[i - 1][j - 1] + cost);
            }
        }
        dp[a.len()][b.len()]
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein_oracle("kitten", "sitting"), 3);
    }

    #[test]
    fn strip_removes_an_exact_echo() {
        let prompt = "Answer the question.\nCole told Joe to call.\nWho called?\nThe answer is:";
        let ex = Extractor::default();
        let output = format!("{prompt} Casey");
        let (rest, stripped) = ex.strip_regenerated_prompt(&output, prompt);
        assert!(stripped);
        assert_eq!(rest, " Casey");
    }

    #[test]
    fn short_output_is_never_stripped() {
        let ex = Extractor::default();
        let (rest, stripped) = ex.strip_regenerated_prompt("Casey", "a much longer prompt text");
        assert!(!stripped);
        assert_eq!(rest, "Casey");
    }

    #[test]
    fn strip_tolerates_edits_up_to_the_threshold() {
        let prompt = "x".repeat(100);
        let ex = Extractor::default();
        // 10 substitutions over 100 chars: exactly at the 0.10 threshold.
        let mut noisy: Vec<char> = prompt.chars().collect();
        for i in 0..10 {
            noisy[i * 7] = 'y';
        }
        let output: String = noisy.into_iter().chain(" Avery".chars()).collect();
        let (rest, stripped) = ex.strip_regenerated_prompt(&output, &prompt);
        assert!(stripped);
        assert_eq!(rest, " Avery");
        // 11 substitutions: just over, so nothing is stripped.
        let mut noisy: Vec<char> = prompt.chars().collect();
        for i in 0..11 {
            noisy[i * 7] = 'y';
        }
        let output: String = noisy.into_iter().chain(" Avery".chars()).collect();
        let (_, stripped) = ex.strip_regenerated_prompt(&output, &prompt);
        assert!(!stripped);
    }

    #[test]
    fn single_word_answers_extract_directly() {
        let outcome = extract_answer("Casey", "prompt", &cands(&["Casey", "Avery"]));
        assert!(outcome.is_answered());
        assert_eq!(outcome.answer.as_deref(), Some("Casey"));
    }

    #[test]
    fn answer_pattern_is_found_mid_text() {
        let outcome = extract_answer(
            "The answer is: Avery. She is busy.",
            "prompt",
            &cands(&["Casey", "Avery"]),
        );
        assert_eq!(outcome.answer.as_deref(), Some("Avery"));

        let outcome = extract_answer(
            "Well. Answer: \"Casey\"",
            "prompt",
            &cands(&["Casey", "Avery"]),
        );
        assert_eq!(outcome.answer.as_deref(), Some("Casey"));

        let outcome = extract_answer(
            "the answer is Casey",
            "prompt",
            &cands(&["Casey", "Avery"]),
        );
        assert_eq!(outcome.answer.as_deref(), Some("Casey"));
    }

    #[test]
    fn first_valid_answer_wins() {
        let outcome = extract_answer(
            "The answer is: Casey. The answer is: Avery.",
            "prompt",
            &cands(&["Casey", "Avery"]),
        );
        assert_eq!(outcome.answer.as_deref(), Some("Casey"));
    }

    #[test]
    fn empty_output_is_skipped() {
        let outcome = extract_answer("", "prompt", &cands(&["Casey", "Avery"]));
        assert_eq!(outcome.status, ExtractionStatus::Skipped);
        assert!(outcome.answer.is_none());
        assert!(outcome.reason.is_some());
    }

    #[test]
    fn non_candidate_answers_are_skipped_not_guessed() {
        let outcome = extract_answer(
            "The answer is: Robin.",
            "prompt",
            &cands(&["Casey", "Avery"]),
        );
        assert_eq!(outcome.status, ExtractionStatus::Skipped);
    }

    #[test]
    fn matching_is_case_insensitive_and_returns_canonical_spelling() {
        let outcome = extract_answer("CASEY.", "prompt", &cands(&["Casey", "Avery"]));
        assert_eq!(outcome.answer.as_deref(), Some("Casey"));
    }

    #[test]
    fn full_echo_then_answer_extracts_after_stripping() {
        let prompt =
            "Answer the question.\nJoe was told by Cole to call.\nWho called?\nThe answer is:";
        let output = format!("{prompt}\nThe answer is: Joe");
        let outcome = extract_answer(&output, prompt, &cands(&["Joe", "Cole"]));
        assert!(outcome.prompt_stripped);
        assert_eq!(outcome.answer.as_deref(), Some("Joe"));
    }

    proptest! {
        #[test]
        fn optimized_levenshtein_matches_oracle(a in ".{0,24}", b in ".{0,24}") {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein_oracle(&a, &b));
        }

        #[test]
        fn metric_properties(
            a in "[a-c]{0,12}",
            b in "[a-c]{0,12}",
            c in "[a-c]{0,12}",
        ) {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            // Identity of indiscernibles.
            if a != b {
                prop_assert!(levenshtein(&a, &b) > 0);
            }
        }

        #[test]
        fn extraction_never_leaves_the_candidate_set(output in ".{0,60}") {
            let candidates = cands(&["Casey", "Avery"]);
            let outcome = extract_answer(&output, "p", &candidates);
            if let Some(ans) = &outcome.answer {
                prop_assert!(candidates.contains(ans));
                prop_assert_eq!(outcome.status, ExtractionStatus::Answered);
            } else {
                prop_assert_eq!(outcome.status, ExtractionStatus::Skipped);
            }
        }
    }
}
