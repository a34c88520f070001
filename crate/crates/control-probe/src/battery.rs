//! Prompt-battery generation for control constructions.
//!
//! A battery is the full cross product of matrix verbs (in their allowed
//! voices), embedded actions, ordered name pairs, instruction styles, and
//! priming modes. Every generated [`PromptInstance`] carries its gold
//! embedded subject and the answer each reference heuristic would give, so
//! downstream scoring can compare model behavior against the heuristics
//! without re-deriving anything.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BatteryError {
    #[error("verb `{verb}` cannot realize condition `{condition}`: {reason}")]
    IncompatibleVerb {
        verb: String,
        condition: ControlCondition,
        reason: String,
    },
    #[error("invalid battery configuration: {0}")]
    InvalidConfig(String),
    #[error("instance `{0}` is zero-shot; salience QA applies only to primed instances")]
    NotPrimed(String),
}

/// Category of a noun-phrase surface form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameCategory {
    Male,
    Female,
    Neutral,
    Profession,
}

/// One noun phrase usable as a matrix-clause participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface: String,
    pub category: NameCategory,
}

/// The pool of noun phrases a battery draws participants from.
///
/// Surface forms must be distinct and there must be at least two of them,
/// since every prompt needs an unordered pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LexiconEntry>", into = "Vec<LexiconEntry>")]
pub struct NounPhraseLexicon {
    entries: Vec<LexiconEntry>,
}

impl NounPhraseLexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, BatteryError> {
        if entries.len() < 2 {
            return Err(BatteryError::InvalidConfig(format!(
                "lexicon needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.surface.as_str()) {
                return Err(BatteryError::InvalidConfig(format!(
                    "duplicate lexicon surface form `{}`",
                    e.surface
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl TryFrom<Vec<LexiconEntry>> for NounPhraseLexicon {
    type Error = BatteryError;
    fn try_from(entries: Vec<LexiconEntry>) -> Result<Self, BatteryError> {
        Self::new(entries)
    }
}

impl From<NounPhraseLexicon> for Vec<LexiconEntry> {
    fn from(l: NounPhraseLexicon) -> Self {
        l.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlType {
    Object,
    Subject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Active,
    Passive,
}

/// A matrix (main-clause) control verb with its hand-specified inflections.
///
/// Subject-control verbs are active-only: their passives were judged too
/// ambiguous to probe, so the constructor rejects any other voice set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrixVerb", into = "RawMatrixVerb")]
pub struct MatrixVerb {
    pub lemma: String,
    pub control_type: ControlType,
    pub past: String,
    pub participle: String,
    voices: Vec<Voice>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrixVerb {
    lemma: String,
    control_type: ControlType,
    past: String,
    participle: String,
    voices: Vec<Voice>,
}

impl TryFrom<RawMatrixVerb> for MatrixVerb {
    type Error = BatteryError;
    fn try_from(r: RawMatrixVerb) -> Result<Self, BatteryError> {
        MatrixVerb::new(r.lemma, r.control_type, r.past, r.participle, r.voices)
    }
}

impl From<MatrixVerb> for RawMatrixVerb {
    fn from(v: MatrixVerb) -> Self {
        RawMatrixVerb {
            lemma: v.lemma,
            control_type: v.control_type,
            past: v.past,
            participle: v.participle,
            voices: v.voices,
        }
    }
}

impl MatrixVerb {
    pub fn new(
        lemma: impl Into<String>,
        control_type: ControlType,
        past: impl Into<String>,
        participle: impl Into<String>,
        voices: Vec<Voice>,
    ) -> Result<Self, BatteryError> {
        let lemma = lemma.into();
        let past = past.into();
        let participle = participle.into();
        if lemma.is_empty() || past.is_empty() || participle.is_empty() {
            return Err(BatteryError::InvalidConfig(format!(
                "verb `{lemma}` has an empty inflection"
            )));
        }
        if voices.is_empty() {
            return Err(BatteryError::InvalidConfig(format!(
                "verb `{lemma}` allows no voices"
            )));
        }
        if control_type == ControlType::Subject && voices != [Voice::Active] {
            return Err(BatteryError::InvalidConfig(format!(
                "subject-control verb `{lemma}` must be active-only"
            )));
        }
        let mut sorted = voices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != voices.len() {
            return Err(BatteryError::InvalidConfig(format!(
                "verb `{lemma}` lists a voice twice"
            )));
        }
        Ok(Self {
            lemma,
            control_type,
            past,
            participle,
            voices,
        })
    }

    /// Object-control verb usable in both voices.
    pub fn object(
        lemma: impl Into<String>,
        past: impl Into<String>,
        participle: impl Into<String>,
    ) -> Self {
        Self::new(
            lemma,
            ControlType::Object,
            past,
            participle,
            vec![Voice::Active, Voice::Passive],
        )
        .expect("object verb with both voices is always valid")
    }

    /// Subject-control verb; active voice only.
    pub fn subject(lemma: impl Into<String>, past: impl Into<String>) -> Self {
        let past = past.into();
        Self::new(
            lemma,
            ControlType::Subject,
            past.clone(),
            past,
            vec![Voice::Active],
        )
        .expect("active-only subject verb is always valid")
    }

    pub fn voices(&self) -> &[Voice] {
        &self.voices
    }

    pub fn allows(&self, voice: Voice) -> bool {
        self.voices.contains(&voice)
    }
}

/// The three probed constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlCondition {
    ObjectActive,
    ObjectPassive,
    SubjectActive,
}

impl ControlCondition {
    pub const ALL: [ControlCondition; 3] = [
        ControlCondition::ObjectActive,
        ControlCondition::ObjectPassive,
        ControlCondition::SubjectActive,
    ];

    pub fn voice(self) -> Voice {
        match self {
            ControlCondition::ObjectPassive => Voice::Passive,
            _ => Voice::Active,
        }
    }

    pub fn control_type(self) -> ControlType {
        match self {
            ControlCondition::SubjectActive => ControlType::Subject,
            _ => ControlType::Object,
        }
    }

    pub fn from_parts(control_type: ControlType, voice: Voice) -> Option<Self> {
        match (control_type, voice) {
            (ControlType::Object, Voice::Active) => Some(ControlCondition::ObjectActive),
            (ControlType::Object, Voice::Passive) => Some(ControlCondition::ObjectPassive),
            (ControlType::Subject, Voice::Active) => Some(ControlCondition::SubjectActive),
            (ControlType::Subject, Voice::Passive) => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControlCondition::ObjectActive => "object-active",
            ControlCondition::ObjectPassive => "object-passive",
            ControlCondition::SubjectActive => "subject-active",
        }
    }
}

impl fmt::Display for ControlCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Embedded (infinitival) action: "call" in "told Joe to call",
/// asked about as "Who called?".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddedAction {
    pub infinitive: String,
    pub question_form: String,
}

impl EmbeddedAction {
    pub fn new(infinitive: impl Into<String>, question_form: impl Into<String>) -> Self {
        Self {
            infinitive: infinitive.into(),
            question_form: question_form.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionStyle {
    Long,
    Short,
}

impl InstructionStyle {
    pub fn as_str(self) -> &'static str {
        match self {
            InstructionStyle::Long => "long",
            InstructionStyle::Short => "short",
        }
    }
}

impl fmt::Display for InstructionStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Priming {
    #[serde(rename = "zero-shot")]
    ZeroShot,
    #[serde(rename = "agent-patient-primed")]
    AgentPatient,
}

impl Priming {
    pub fn as_str(self) -> &'static str {
        match self {
            Priming::ZeroShot => "zero-shot",
            Priming::AgentPatient => "agent-patient-primed",
        }
    }
}

impl fmt::Display for Priming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceOrder {
    AgentFirst,
    PatientFirst,
}

/// Gold coindexation for one prompt: who did the embedded action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabeling {
    pub agent: String,
    pub patient: String,
    pub embedded_subject: String,
}

/// Reference answer strategies the paper compares model outputs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heuristic {
    /// First NP in surface order (the "maximum distance" strategy).
    FirstNp,
    /// Second NP in surface order.
    SecondNp,
    /// Minimal Distance Principle: the NP linearly closest to the infinitive.
    Mdp,
    /// Always the matrix agent.
    Agent,
    /// Always the matrix patient.
    Patient,
}

impl Heuristic {
    pub const ALL: [Heuristic; 5] = [
        Heuristic::FirstNp,
        Heuristic::SecondNp,
        Heuristic::Mdp,
        Heuristic::Agent,
        Heuristic::Patient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::FirstNp => "FirstNP",
            Heuristic::SecondNp => "SecondNP",
            Heuristic::Mdp => "MDP",
            Heuristic::Agent => "Agent",
            Heuristic::Patient => "Patient",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|h| h.name() == name)
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One fully rendered probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub id: String,
    pub condition: ControlCondition,
    pub verb: MatrixVerb,
    pub agent: String,
    pub patient: String,
    pub surface_order: SurfaceOrder,
    pub action: EmbeddedAction,
    pub style: InstructionStyle,
    pub priming: Priming,
    pub rendered_text: String,
    pub gold: GoldLabeling,
    /// Heuristic name -> predicted participant, for all five heuristics.
    pub heuristic_predictions: BTreeMap<String, String>,
}

impl PromptInstance {
    /// The two candidate answers, in the context sentence's surface order.
    pub fn candidates(&self) -> [String; 2] {
        let (first, second) = self.surface_names();
        [first.to_owned(), second.to_owned()]
    }

    fn surface_names(&self) -> (&str, &str) {
        match self.surface_order {
            SurfaceOrder::AgentFirst => (&self.agent, &self.patient),
            SurfaceOrder::PatientFirst => (&self.patient, &self.agent),
        }
    }

    /// The salience QA block for primed instances; errors on zero-shot ones.
    pub fn salience_qa(&self) -> Result<String, BatteryError> {
        if self.priming != Priming::AgentPatient {
            return Err(BatteryError::NotPrimed(self.id.clone()));
        }
        Ok(salience_qa_block(
            &self.verb,
            &self.agent,
            &self.patient,
            self.surface_order,
            &self.action,
        ))
    }
}

/// Render the context sentence for one condition.
///
/// Active: `{agent} {past} {patient} to {infinitive}.`
/// Passive: `{patient} was {participle} by {agent} to {infinitive}.`
pub fn render_context(
    condition: ControlCondition,
    verb: &MatrixVerb,
    agent: &str,
    patient: &str,
    action: &EmbeddedAction,
) -> Result<String, BatteryError> {
    if verb.control_type != condition.control_type() {
        return Err(BatteryError::IncompatibleVerb {
            verb: verb.lemma.clone(),
            condition,
            reason: format!(
                "verb is {:?}-control, condition needs {:?}-control",
                verb.control_type,
                condition.control_type()
            ),
        });
    }
    if !verb.allows(condition.voice()) {
        return Err(BatteryError::IncompatibleVerb {
            verb: verb.lemma.clone(),
            condition,
            reason: format!("voice {:?} not allowed for this verb", condition.voice()),
        });
    }
    if agent == patient {
        return Err(BatteryError::InvalidConfig(format!(
            "agent and patient must differ, both are `{agent}`"
        )));
    }
    Ok(match condition.voice() {
        Voice::Active => format!("{agent} {} {patient} to {}.", verb.past, action.infinitive),
        Voice::Passive => format!(
            "{patient} was {} by {agent} to {}.",
            verb.participle, action.infinitive
        ),
    })
}

/// Who actually does the embedded action.
pub fn gold_answer<'a>(condition: ControlCondition, agent: &'a str, patient: &'a str) -> &'a str {
    match condition {
        ControlCondition::SubjectActive => agent,
        ControlCondition::ObjectActive | ControlCondition::ObjectPassive => patient,
    }
}

/// The participant a heuristic picks as the embedded subject.
pub fn heuristic_prediction<'a>(
    heuristic: Heuristic,
    condition: ControlCondition,
    agent: &'a str,
    patient: &'a str,
) -> &'a str {
    let (first, second) = match condition.voice() {
        Voice::Active => (agent, patient),
        Voice::Passive => (patient, agent),
    };
    match heuristic {
        Heuristic::FirstNp => first,
        Heuristic::SecondNp => second,
        // The NP linearly closest to the infinitive is the second one in
        // surface order for both voices.
        Heuristic::Mdp => second,
        Heuristic::Agent => agent,
        Heuristic::Patient => patient,
    }
}

fn instruction_block(style: InstructionStyle, first: &str, second: &str) -> String {
    match style {
        // The repeated sentence with swapped names is the anti-copy control:
        // each candidate appears once in first and once in last position.
        InstructionStyle::Long => format!(
            "Answer the question with either \"{first}\" or \"{second}\". \
             Answer the question with either \"{second}\" or \"{first}\"."
        ),
        InstructionStyle::Short => "Answer the question.".to_owned(),
    }
}

fn question_block(
    style: InstructionStyle,
    action: &EmbeddedAction,
    first: &str,
    second: &str,
) -> String {
    match style {
        InstructionStyle::Long => {
            format!("Who {}, {first} or {second}?", action.question_form)
        }
        InstructionStyle::Short => format!("Who {}?", action.question_form),
    }
}

/// Two answered QA pairs naming the matrix agent and patient, without ever
/// mentioning the embedded-clause subject.
fn salience_qa_block(
    verb: &MatrixVerb,
    agent: &str,
    patient: &str,
    surface_order: SurfaceOrder,
    action: &EmbeddedAction,
) -> String {
    let (first, second) = match surface_order {
        SurfaceOrder::AgentFirst => (agent, patient),
        SurfaceOrder::PatientFirst => (patient, agent),
    };
    format!(
        "Q: Who {} someone to {}? A: {agent}\n\
         Q: Who was {} to {}, {first} or {second}? A: {patient}",
        verb.past, action.infinitive, verb.participle, action.infinitive
    )
}

/// The answer continuation every prompt ends with, and the string the
/// extractor looks for in completions.
pub const ANSWER_CONTINUATION: &str = "The answer is:";

/// Render the full prompt text from its parts. Byte-deterministic.
pub fn render_prompt_parts(
    condition: ControlCondition,
    verb: &MatrixVerb,
    agent: &str,
    patient: &str,
    action: &EmbeddedAction,
    style: InstructionStyle,
    priming: Priming,
) -> Result<String, BatteryError> {
    let context = render_context(condition, verb, agent, patient, action)?;
    let (first, second) = match condition.voice() {
        Voice::Active => (agent, patient),
        Voice::Passive => (patient, agent),
    };
    let mut blocks = vec![instruction_block(style, first, second)];
    if priming == Priming::AgentPatient {
        let order = match condition.voice() {
            Voice::Active => SurfaceOrder::AgentFirst,
            Voice::Passive => SurfaceOrder::PatientFirst,
        };
        blocks.push(salience_qa_block(verb, agent, patient, order, action));
    }
    blocks.push(context);
    blocks.push(question_block(style, action, first, second));
    blocks.push(ANSWER_CONTINUATION.to_owned());
    Ok(blocks.join("\n"))
}

/// Re-render an instance's prompt text from its fields.
pub fn render_prompt(instance: &PromptInstance) -> Result<String, BatteryError> {
    render_prompt_parts(
        instance.condition,
        &instance.verb,
        &instance.agent,
        &instance.patient,
        &instance.action,
        instance.style,
        instance.priming,
    )
}

/// Full generation configuration for one battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub lexicon: NounPhraseLexicon,
    pub object_verbs: Vec<MatrixVerb>,
    pub subject_verbs: Vec<MatrixVerb>,
    pub actions: Vec<EmbeddedAction>,
    pub styles: Vec<InstructionStyle>,
    pub priming: Vec<Priming>,
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<(), BatteryError> {
        if self.object_verbs.is_empty() && self.subject_verbs.is_empty() {
            return Err(BatteryError::InvalidConfig("no verbs configured".into()));
        }
        for v in &self.object_verbs {
            if v.control_type != ControlType::Object {
                return Err(BatteryError::InvalidConfig(format!(
                    "`{}` listed as object verb but typed {:?}",
                    v.lemma, v.control_type
                )));
            }
        }
        for v in &self.subject_verbs {
            if v.control_type != ControlType::Subject {
                return Err(BatteryError::InvalidConfig(format!(
                    "`{}` listed as subject verb but typed {:?}",
                    v.lemma, v.control_type
                )));
            }
        }
        let mut lemmas = BTreeSet::new();
        for v in self.object_verbs.iter().chain(&self.subject_verbs) {
            if !lemmas.insert(v.lemma.as_str()) {
                return Err(BatteryError::InvalidConfig(format!(
                    "duplicate verb lemma `{}`",
                    v.lemma
                )));
            }
        }
        if self.actions.is_empty() {
            return Err(BatteryError::InvalidConfig("no actions configured".into()));
        }
        if self.styles.is_empty() || self.priming.is_empty() {
            return Err(BatteryError::InvalidConfig(
                "styles and priming modes must each be nonempty".into(),
            ));
        }
        Ok(())
    }

    /// Number of (verb, voice) combinations the battery will realize.
    pub fn verb_voice_combinations(&self) -> usize {
        self.object_verbs
            .iter()
            .chain(&self.subject_verbs)
            .map(|v| v.voices().len())
            .sum()
    }

    /// Closed-form instance count:
    /// verb-voice combos x actions x ordered name pairs x styles x priming.
    pub fn expected_count(&self) -> usize {
        let n = self.lexicon.len();
        self.verb_voice_combinations()
            * self.actions.len()
            * n
            * (n - 1)
            * self.styles.len()
            * self.priming.len()
    }
}

/// The nine object-control and two subject-control verbs the probes cover,
/// with hand-specified inflections.
pub fn default_object_verbs() -> Vec<MatrixVerb> {
    vec![
        MatrixVerb::object("tell", "told", "told"),
        MatrixVerb::object("order", "ordered", "ordered"),
        MatrixVerb::object("call upon", "called upon", "called upon"),
        MatrixVerb::object("urge", "urged", "urged"),
        MatrixVerb::object("ask", "asked", "asked"),
        MatrixVerb::object("persuade", "persuaded", "persuaded"),
        MatrixVerb::object("convince", "convinced", "convinced"),
        MatrixVerb::object("force", "forced", "forced"),
        MatrixVerb::object("push", "pushed", "pushed"),
    ]
}

pub fn default_subject_verbs() -> Vec<MatrixVerb> {
    vec![
        MatrixVerb::subject("promise", "promised"),
        MatrixVerb::subject("threaten", "threatened"),
    ]
}

/// Six names: two male, two female, two gender-neutral.
pub fn default_lexicon() -> NounPhraseLexicon {
    let entry = |surface: &str, category| LexiconEntry {
        surface: surface.to_owned(),
        category,
    };
    NounPhraseLexicon::new(vec![
        entry("Cole", NameCategory::Male),
        entry("Joe", NameCategory::Male),
        entry("Sarah", NameCategory::Female),
        entry("Emily", NameCategory::Female),
        entry("Casey", NameCategory::Neutral),
        entry("Avery", NameCategory::Neutral),
    ])
    .expect("default lexicon is valid")
}

/// Five intransitive embedded actions with their question inflections.
pub fn default_actions() -> Vec<EmbeddedAction> {
    vec![
        EmbeddedAction::new("call", "called"),
        EmbeddedAction::new("come", "came"),
        EmbeddedAction::new("go", "went"),
        EmbeddedAction::new("leave", "left"),
        EmbeddedAction::new("wait", "waited"),
    ]
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            lexicon: default_lexicon(),
            object_verbs: default_object_verbs(),
            subject_verbs: default_subject_verbs(),
            actions: default_actions(),
            styles: vec![InstructionStyle::Long, InstructionStyle::Short],
            priming: vec![Priming::ZeroShot, Priming::AgentPatient],
        }
    }
}

fn instance_id(
    condition: ControlCondition,
    verb: &MatrixVerb,
    agent: &str,
    patient: &str,
    action: &EmbeddedAction,
    style: InstructionStyle,
    priming: Priming,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(condition.as_str());
    for part in [
        &verb.lemma,
        agent,
        patient,
        &action.infinitive,
        style.as_str(),
        priming.as_str(),
    ] {
        hasher.update([0x1f]);
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut id = String::with_capacity(32);
    for byte in &digest[..16] {
        id.push_str(&format!("{byte:02x}"));
    }
    id
}

fn build_instance(
    condition: ControlCondition,
    verb: &MatrixVerb,
    agent: &str,
    patient: &str,
    action: &EmbeddedAction,
    style: InstructionStyle,
    priming: Priming,
) -> Result<PromptInstance, BatteryError> {
    let rendered_text = render_prompt_parts(condition, verb, agent, patient, action, style, priming)?;
    let heuristic_predictions = Heuristic::ALL
        .iter()
        .map(|&h| {
            (
                h.name().to_owned(),
                heuristic_prediction(h, condition, agent, patient).to_owned(),
            )
        })
        .collect();
    Ok(PromptInstance {
        id: instance_id(condition, verb, agent, patient, action, style, priming),
        condition,
        verb: verb.clone(),
        agent: agent.to_owned(),
        patient: patient.to_owned(),
        surface_order: match condition.voice() {
            Voice::Active => SurfaceOrder::AgentFirst,
            Voice::Passive => SurfaceOrder::PatientFirst,
        },
        action: action.clone(),
        style,
        priming,
        rendered_text,
        gold: GoldLabeling {
            agent: agent.to_owned(),
            patient: patient.to_owned(),
            embedded_subject: gold_answer(condition, agent, patient).to_owned(),
        },
        heuristic_predictions,
    })
}

/// Generate the full battery in a stable order.
///
/// Verbs iterate in configuration order (object verbs first), then voice,
/// action, name pair (both orders adjacent), style, and priming mode.
/// Rerunning with the same config yields a byte-identical battery.
pub fn generate_battery(config: &BatteryConfig) -> Result<Vec<PromptInstance>, BatteryError> {
    config.validate()?;
    let names: Vec<&str> = config
        .lexicon
        .entries()
        .iter()
        .map(|e| e.surface.as_str())
        .collect();
    let mut out = Vec::with_capacity(config.expected_count());
    for verb in config.object_verbs.iter().chain(&config.subject_verbs) {
        for &voice in verb.voices() {
            let condition = ControlCondition::from_parts(verb.control_type, voice)
                .ok_or_else(|| BatteryError::IncompatibleVerb {
                    verb: verb.lemma.clone(),
                    condition: ControlCondition::SubjectActive,
                    reason: "passive subject control is not a generatable condition".into(),
                })?;
            for action in &config.actions {
                for i in 0..names.len() {
                    for j in (i + 1)..names.len() {
                        for (agent, patient) in [(names[i], names[j]), (names[j], names[i])] {
                            for &style in &config.styles {
                                for &priming in &config.priming {
                                    out.push(build_instance(
                                        condition, verb, agent, patient, action, style, priming,
                                    )?);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert_eq!(out.len(), config.expected_count());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tell() -> MatrixVerb {
        MatrixVerb::object("tell", "told", "told")
    }

    fn promise() -> MatrixVerb {
        MatrixVerb::subject("promise", "promised")
    }

    fn call() -> EmbeddedAction {
        EmbeddedAction::new("call", "called")
    }

    #[test]
    fn context_rendering_matches_the_three_constructions() {
        assert_eq!(
            render_context(ControlCondition::SubjectActive, &promise(), "Cole", "Joe", &call())
                .unwrap(),
            "Cole promised Joe to call."
        );
        assert_eq!(
            render_context(ControlCondition::ObjectActive, &tell(), "Cole", "Joe", &call())
                .unwrap(),
            "Cole told Joe to call."
        );
        assert_eq!(
            render_context(ControlCondition::ObjectPassive, &tell(), "Cole", "Joe", &call())
                .unwrap(),
            "Joe was told by Cole to call."
        );
    }

    #[test]
    fn multiword_matrix_verb_renders_in_both_voices() {
        let v = MatrixVerb::object("call upon", "called upon", "called upon");
        assert_eq!(
            render_context(ControlCondition::ObjectActive, &v, "Cole", "Joe", &call()).unwrap(),
            "Cole called upon Joe to call."
        );
        assert_eq!(
            render_context(ControlCondition::ObjectPassive, &v, "Cole", "Joe", &call()).unwrap(),
            "Joe was called upon by Cole to call."
        );
    }

    #[test]
    fn incompatible_verb_condition_pairs_are_config_errors() {
        let err =
            render_context(ControlCondition::SubjectActive, &tell(), "Cole", "Joe", &call())
                .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tell") && msg.contains("subject-active"), "{msg}");

        let err =
            render_context(ControlCondition::ObjectPassive, &promise(), "Cole", "Joe", &call())
                .unwrap_err();
        assert!(err.to_string().contains("promise"));
    }

    #[test]
    fn gold_answers_follow_the_control_type() {
        assert_eq!(gold_answer(ControlCondition::SubjectActive, "Cole", "Joe"), "Cole");
        assert_eq!(gold_answer(ControlCondition::ObjectActive, "Cole", "Joe"), "Joe");
        assert_eq!(gold_answer(ControlCondition::ObjectPassive, "Cole", "Joe"), "Joe");
    }

    #[test]
    fn heuristic_predictions_cover_the_spec_examples() {
        use ControlCondition::*;
        use Heuristic::*;
        // Passive surface order is patient-first.
        assert_eq!(heuristic_prediction(FirstNp, ObjectPassive, "Cole", "Joe"), "Joe");
        // MDP picks the by-phrase NP in the passive.
        assert_eq!(heuristic_prediction(Mdp, ObjectPassive, "Cole", "Joe"), "Cole");
        // The patient heuristic ignores the condition.
        assert_eq!(heuristic_prediction(Patient, SubjectActive, "Cole", "Joe"), "Joe");
    }

    #[test]
    fn long_prompt_contains_context_question_and_continuation() {
        let text = render_prompt_parts(
            ControlCondition::SubjectActive,
            &promise(),
            "Cole",
            "Joe",
            &call(),
            InstructionStyle::Long,
            Priming::ZeroShot,
        )
        .unwrap();
        assert!(text.contains("Cole promised Joe to call."), "{text}");
        assert!(text.contains("Who called"), "{text}");
        assert!(text.ends_with("The answer is:"), "{text}");
        // Anti-copy control: both name orders appear in the instructions.
        assert!(text.contains("either \"Cole\" or \"Joe\""));
        assert!(text.contains("either \"Joe\" or \"Cole\""));
    }

    #[test]
    fn short_prompt_never_names_the_candidates_outside_the_context() {
        let text = render_prompt_parts(
            ControlCondition::SubjectActive,
            &promise(),
            "Cole",
            "Joe",
            &call(),
            InstructionStyle::Short,
            Priming::ZeroShot,
        )
        .unwrap();
        let without_context: String = text
            .lines()
            .filter(|l| *l != "Cole promised Joe to call.")
            .collect::<Vec<_>>()
            .join("\n");
        assert!(!without_context.contains("Cole"), "{text}");
        assert!(!without_context.contains("Joe"), "{text}");
        assert!(text.contains("Who called?"), "{text}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let args = (
            ControlCondition::ObjectPassive,
            tell(),
            "Casey",
            "Avery",
            call(),
            InstructionStyle::Long,
            Priming::AgentPatient,
        );
        let a = render_prompt_parts(args.0, &args.1, args.2, args.3, &args.4, args.5, args.6)
            .unwrap();
        let b = render_prompt_parts(args.0, &args.1, args.2, args.3, &args.4, args.5, args.6)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn salience_block_matches_the_attested_pairs() {
        let text = render_prompt_parts(
            ControlCondition::ObjectActive,
            &tell(),
            "Cole",
            "Joe",
            &call(),
            InstructionStyle::Long,
            Priming::AgentPatient,
        )
        .unwrap();
        assert!(text.contains("Q: Who told someone to call? A: Cole"), "{text}");

        let come = EmbeddedAction::new("come", "came");
        let text = render_prompt_parts(
            ControlCondition::ObjectActive,
            &tell(),
            "Avery",
            "Casey",
            &come,
            InstructionStyle::Long,
            Priming::AgentPatient,
        )
        .unwrap();
        assert!(
            text.contains("Q: Who was told to come, Avery or Casey? A: Casey"),
            "{text}"
        );
    }

    #[test]
    fn salience_qa_on_zero_shot_instance_is_an_error() {
        let config = BatteryConfig {
            styles: vec![InstructionStyle::Long],
            priming: vec![Priming::ZeroShot],
            ..BatteryConfig::default()
        };
        let battery = generate_battery(&config).unwrap();
        assert!(matches!(
            battery[0].salience_qa(),
            Err(BatteryError::NotPrimed(_))
        ));
    }

    #[test]
    fn smallest_battery_emits_both_orders() {
        let config = BatteryConfig {
            lexicon: NounPhraseLexicon::new(vec![
                LexiconEntry {
                    surface: "Cole".into(),
                    category: NameCategory::Male,
                },
                LexiconEntry {
                    surface: "Joe".into(),
                    category: NameCategory::Male,
                },
            ])
            .unwrap(),
            object_verbs: vec![tell()],
            subject_verbs: vec![],
            actions: vec![call()],
            styles: vec![InstructionStyle::Long],
            priming: vec![Priming::ZeroShot],
        };
        // tell has two voices, so 2 voices x 2 ordered pairs.
        let battery = generate_battery(&config).unwrap();
        assert_eq!(battery.len(), 4);
        let actives: Vec<_> = battery
            .iter()
            .filter(|i| i.condition == ControlCondition::ObjectActive)
            .collect();
        assert_eq!(actives.len(), 2);
        assert_eq!(actives[0].agent, actives[1].patient);
        assert_eq!(actives[0].patient, actives[1].agent);
    }

    #[test]
    fn subject_only_battery_produces_the_attested_counts() {
        let config = BatteryConfig {
            object_verbs: vec![],
            subject_verbs: default_subject_verbs(),
            styles: vec![InstructionStyle::Long],
            priming: vec![Priming::ZeroShot],
            ..BatteryConfig::default()
        };
        let battery = generate_battery(&config).unwrap();
        // 2 verbs x 5 actions x 15 unordered pairs = 150; both orders = 300.
        assert_eq!(battery.len(), 300);
        assert_eq!(config.expected_count(), 300);
        let contexts: BTreeSet<_> = battery
            .iter()
            .map(|i| {
                let mut names = [i.agent.as_str(), i.patient.as_str()];
                names.sort_unstable();
                (i.verb.lemma.clone(), i.action.infinitive.clone(), names[0].to_owned(), names[1].to_owned())
            })
            .collect();
        assert_eq!(contexts.len(), 150);
    }

    #[test]
    fn object_battery_count_follows_the_closed_form() {
        let config = BatteryConfig {
            subject_verbs: vec![],
            styles: vec![InstructionStyle::Long],
            priming: vec![Priming::ZeroShot],
            ..BatteryConfig::default()
        };
        // 9 verbs x 2 voices x 5 actions x 15 pairs x 2 orders = 2700.
        assert_eq!(config.expected_count(), 2700);
        assert_eq!(generate_battery(&config).unwrap().len(), 2700);
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let result = NounPhraseLexicon::new(vec![
            LexiconEntry {
                surface: "Cole".into(),
                category: NameCategory::Male,
            },
            LexiconEntry {
                surface: "Cole".into(),
                category: NameCategory::Neutral,
            },
        ]);
        assert!(result.is_err());
    }

    #[test]
    fn instances_recompute_their_rendered_text_and_ids_are_unique() {
        let config = BatteryConfig::default();
        let battery = generate_battery(&config).unwrap();
        assert_eq!(battery.len(), config.expected_count());
        let mut ids = BTreeSet::new();
        for instance in &battery {
            assert_eq!(render_prompt(instance).unwrap(), instance.rendered_text);
            assert!(ids.insert(instance.id.clone()), "duplicate id {}", instance.id);
            // Both candidates appear exactly once in the context sentence.
            let context = render_context(
                instance.condition,
                &instance.verb,
                &instance.agent,
                &instance.patient,
                &instance.action,
            )
            .unwrap();
            assert_eq!(context.matches(&instance.agent).count(), 1);
            assert_eq!(context.matches(&instance.patient).count(), 1);
        }
    }

    #[test]
    fn truth_table_holds_over_the_whole_battery() {
        let battery = generate_battery(&BatteryConfig::default()).unwrap();
        use ControlCondition::*;
        let correct_on: &[(Heuristic, &[ControlCondition])] = &[
            (Heuristic::FirstNp, &[SubjectActive, ObjectPassive]),
            (Heuristic::Patient, &[ObjectActive, ObjectPassive]),
            (Heuristic::Mdp, &[ObjectActive]),
            (Heuristic::SecondNp, &[ObjectActive]),
            (Heuristic::Agent, &[SubjectActive]),
        ];
        for instance in &battery {
            assert!(
                instance.gold.embedded_subject == instance.agent
                    || instance.gold.embedded_subject == instance.patient
            );
            for &(heuristic, conditions) in correct_on {
                let predicted = &instance.heuristic_predictions[heuristic.name()];
                let is_correct = *predicted == instance.gold.embedded_subject;
                assert_eq!(
                    is_correct,
                    conditions.contains(&instance.condition),
                    "{} on {:?}",
                    heuristic.name(),
                    instance.condition
                );
            }
        }
    }

    #[test]
    fn swapping_names_swaps_gold_and_all_predictions() {
        let battery = generate_battery(&BatteryConfig::default()).unwrap();
        let mut by_key = BTreeMap::new();
        for instance in &battery {
            by_key.insert(
                (
                    instance.condition,
                    instance.verb.lemma.clone(),
                    instance.action.infinitive.clone(),
                    instance.style,
                    instance.priming,
                    instance.agent.clone(),
                    instance.patient.clone(),
                ),
                instance,
            );
        }
        for instance in &battery {
            let sibling = by_key
                .get(&(
                    instance.condition,
                    instance.verb.lemma.clone(),
                    instance.action.infinitive.clone(),
                    instance.style,
                    instance.priming,
                    instance.patient.clone(),
                    instance.agent.clone(),
                ))
                .expect("sibling with swapped names exists");
            let swap = |name: &str| {
                if name == instance.agent {
                    sibling.agent.clone()
                } else {
                    sibling.patient.clone()
                }
            };
            // Roles are preserved under relabeling, so gold and every
            // heuristic map through the name swap.
            assert_eq!(swap(&instance.gold.embedded_subject), sibling.gold.embedded_subject);
            for h in Heuristic::ALL {
                assert_eq!(
                    swap(&instance.heuristic_predictions[h.name()]),
                    sibling.heuristic_predictions[h.name()]
                );
            }
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let config = BatteryConfig::default();
        let a = generate_battery(&config).unwrap();
        let b = generate_battery(&config).unwrap();
        assert_eq!(a, b);
    }
}
