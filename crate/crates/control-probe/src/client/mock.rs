//! Deterministic in-process mock policies.
//!
//! A mock backend re-parses the context sentence out of the rendered prompt
//! using the same template grammar the battery renders with, then answers
//! according to a fixed rule. The round trip is deliberate: if prompt
//! rendering drifts, the mock fails loudly instead of silently answering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{Voice, ANSWER_CONTINUATION};

#[derive(Debug, Error)]
pub enum MockError {
    #[error("mock could not parse a context sentence from the prompt: {0}")]
    UnparseablePrompt(String),
    #[error("policy `{0}` does not expose log-probabilities")]
    NoLogprobs(String),
}

/// Fixed answer rules, each an executable form of one reference heuristic
/// (plus degenerate modes for exercising extraction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockPolicy {
    /// Always the correct embedded subject.
    Gold,
    /// First NP in surface order.
    FirstNp,
    /// Second NP in surface order.
    SecondNp,
    /// NP linearly closest to the infinitive.
    Mdp,
    /// Always the matrix agent.
    Agent,
    /// Always the matrix patient.
    Patient,
    /// Regenerates the full prompt, then answers with gold.
    EchoPromptThenGold,
    /// Produces nothing, forcing a downstream skip.
    Empty,
}

impl MockPolicy {
    pub const ALL: [MockPolicy; 8] = [
        MockPolicy::Gold,
        MockPolicy::FirstNp,
        MockPolicy::SecondNp,
        MockPolicy::Mdp,
        MockPolicy::Agent,
        MockPolicy::Patient,
        MockPolicy::EchoPromptThenGold,
        MockPolicy::Empty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MockPolicy::Gold => "gold",
            MockPolicy::FirstNp => "first-np",
            MockPolicy::SecondNp => "second-np",
            MockPolicy::Mdp => "mdp",
            MockPolicy::Agent => "agent",
            MockPolicy::Patient => "patient",
            MockPolicy::EchoPromptThenGold => "echo-prompt-then-gold",
            MockPolicy::Empty => "empty",
        }
    }
}

impl fmt::Display for MockPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MockPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MockPolicy::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown mock policy `{s}`; valid: {}",
                    MockPolicy::ALL
                        .iter()
                        .map(|p| p.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            })
    }
}

/// The matrix clause recovered from a prompt's context sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedContext {
    pub voice: Voice,
    pub agent: String,
    pub patient: String,
    /// Past form (active) or passive participle (passive) as matched.
    pub matrix_form: String,
    pub embedded_verb: String,
}

fn passive_context_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([A-Za-z]+) was (.+?) by ([A-Za-z]+) to ([A-Za-z]+)\.$").unwrap()
    })
}

fn active_context_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^([A-Za-z]+) (.+?) ([A-Za-z]+) to ([A-Za-z]+)\.$").unwrap())
}

/// Try to read one line as a context sentence. Passive is tried first since
/// the active pattern would mis-parse a passive line.
pub fn parse_context_line(line: &str) -> Option<ParsedContext> {
    if let Some(captures) = passive_context_regex().captures(line) {
        return Some(ParsedContext {
            voice: Voice::Passive,
            patient: captures[1].to_owned(),
            matrix_form: captures[2].to_owned(),
            agent: captures[3].to_owned(),
            embedded_verb: captures[4].to_owned(),
        });
    }
    if let Some(captures) = active_context_regex().captures(line) {
        return Some(ParsedContext {
            voice: Voice::Active,
            agent: captures[1].to_owned(),
            matrix_form: captures[2].to_owned(),
            patient: captures[3].to_owned(),
            embedded_verb: captures[4].to_owned(),
        });
    }
    None
}

/// A mock backend: a policy plus the subject-verb past forms it needs to
/// tell subject control from object control when answering gold.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub policy: MockPolicy,
    subject_past_forms: BTreeSet<String>,
}

impl MockBackend {
    pub fn new(policy: MockPolicy) -> Self {
        Self {
            policy,
            subject_past_forms: ["promised", "threatened"]
                .into_iter()
                .map(str::to_owned)
                .collect(),
        }
    }

    /// Override the past forms treated as subject control (for non-default
    /// verb configurations).
    pub fn with_subject_past_forms<I, S>(mut self, forms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.subject_past_forms = forms.into_iter().map(Into::into).collect();
        self
    }

    /// Find the unique context sentence in a rendered prompt.
    pub fn parse_prompt(&self, prompt: &str) -> Result<ParsedContext, MockError> {
        let mut contexts: Vec<ParsedContext> =
            prompt.lines().filter_map(parse_context_line).collect();
        match contexts.len() {
            1 => Ok(contexts.pop().expect("length checked")),
            0 => Err(MockError::UnparseablePrompt(
                "no line matches the context grammar".into(),
            )),
            n => Err(MockError::UnparseablePrompt(format!(
                "{n} lines match the context grammar"
            ))),
        }
    }

    fn gold_of(&self, context: &ParsedContext) -> String {
        let subject_control = context.voice == Voice::Active
            && self.subject_past_forms.contains(&context.matrix_form);
        if subject_control {
            context.agent.clone()
        } else {
            context.patient.clone()
        }
    }

    /// The participant this policy names for a given context, or `None` for
    /// the policies that do not name one.
    fn chosen(&self, context: &ParsedContext) -> Option<String> {
        let (first, second) = match context.voice {
            Voice::Active => (&context.agent, &context.patient),
            Voice::Passive => (&context.patient, &context.agent),
        };
        match self.policy {
            MockPolicy::Gold | MockPolicy::EchoPromptThenGold => Some(self.gold_of(context)),
            MockPolicy::FirstNp => Some(first.clone()),
            MockPolicy::SecondNp | MockPolicy::Mdp => Some(second.clone()),
            MockPolicy::Agent => Some(context.agent.clone()),
            MockPolicy::Patient => Some(context.patient.clone()),
            MockPolicy::Empty => None,
        }
    }

    /// Produce the completion text for a rendered prompt.
    pub fn respond(&self, prompt: &str) -> Result<String, MockError> {
        if self.policy == MockPolicy::Empty {
            return Ok(String::new());
        }
        let context = self.parse_prompt(prompt)?;
        let answer = self
            .chosen(&context)
            .expect("non-empty policies always choose");
        Ok(match self.policy {
            MockPolicy::EchoPromptThenGold => {
                format!("{prompt}\n{ANSWER_CONTINUATION} {answer}")
            }
            _ => format!("{ANSWER_CONTINUATION} {answer}"),
        })
    }

    pub fn supports_logprobs(&self) -> bool {
        // The empty policy models a backend that emits only end-of-sequence;
        // it has no answer distribution to expose.
        self.policy != MockPolicy::Empty
    }

    /// Candidate log-probabilities: the policy's pick gets probability 0.9,
    /// the rest share the remainder.
    pub fn candidate_logprobs(
        &self,
        prompt: &str,
        candidates: &[String],
    ) -> Result<BTreeMap<String, f64>, MockError> {
        if !self.supports_logprobs() {
            return Err(MockError::NoLogprobs(self.policy.to_string()));
        }
        let context = self.parse_prompt(prompt)?;
        let chosen = self
            .chosen(&context)
            .expect("logprob-capable policies always choose");
        let n = candidates.len().max(1);
        let chosen_in_set = candidates.iter().any(|c| *c == chosen);
        let mut out = BTreeMap::new();
        for candidate in candidates {
            let p = if !chosen_in_set {
                1.0 / n as f64
            } else if *candidate == chosen {
                if n == 1 {
                    1.0
                } else {
                    0.9
                }
            } else {
                0.1 / (n - 1) as f64
            };
            out.insert(candidate.clone(), p.ln());
        }
        Ok(out)
    }
}
