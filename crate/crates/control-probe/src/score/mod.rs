//! Trial aggregation: accuracy cells, paired significance, heuristic
//! consistency, and group classification.
//!
//! Skipped trials never enter an accuracy denominator; they are counted but
//! not judged. Accuracies are percentages (0-100); reports round them to
//! whole points while machine outputs keep the raw values.

mod mcnemar;

pub use mcnemar::{mcnemar, ContingencyTable, McnemarResult, EXACT_REPORT_LIMIT};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{ControlCondition, InstructionStyle, Priming};
use crate::extract::ExtractionOutcome;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("cells disagree on condition/priming: {0}")]
    MismatchedCells(String),
    #[error("no shared answered instances between the two trial sets")]
    DisjointInstances,
}

/// One model response after extraction; the atom of scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub instance_id: String,
    pub model: String,
    pub condition: ControlCondition,
    pub style: InstructionStyle,
    pub priming: Priming,
    pub outcome: ExtractionOutcome,
    /// Present iff the trial was answered; true iff the answer matched gold.
    pub correct: Option<bool>,
}

/// Accuracy for one (model, condition, priming) cell, maximized over
/// instruction styles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub model: String,
    pub condition: ControlCondition,
    pub priming: Priming,
    /// Percentage over answered trials; absent when nothing was answered.
    pub accuracy: Option<f64>,
    /// Answered-trial count behind the reported accuracy.
    pub n_valid: usize,
    /// Which instruction style achieved the maximum.
    pub style_used: Option<InstructionStyle>,
    /// Set when only one style had any records, so no max was taken.
    pub single_style: bool,
}

fn style_accuracy(records: &[&TrialRecord], style: InstructionStyle) -> (Option<f64>, usize) {
    let mut answered = 0usize;
    let mut correct = 0usize;
    for r in records.iter().filter(|r| r.style == style) {
        if let Some(is_correct) = r.correct {
            answered += 1;
            if is_correct {
                correct += 1;
            }
        }
    }
    if answered == 0 {
        (None, 0)
    } else {
        (Some(100.0 * correct as f64 / answered as f64), answered)
    }
}

/// Accuracy for one cell: per-style accuracy over answered trials, then the
/// max across styles (ties prefer long, for determinism).
pub fn accuracy(
    records: &[TrialRecord],
    model: &str,
    condition: ControlCondition,
    priming: Priming,
) -> AccuracyCell {
    let cell_records: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.model == model && r.condition == condition && r.priming == priming)
        .collect();
    let styles_present: BTreeSet<InstructionStyle> =
        cell_records.iter().map(|r| r.style).collect();
    let single_style = styles_present.len() < 2;

    let mut best: Option<(f64, usize, InstructionStyle)> = None;
    for style in [InstructionStyle::Long, InstructionStyle::Short] {
        if let (Some(acc), n) = style_accuracy(&cell_records, style) {
            let better = match best {
                None => true,
                Some((best_acc, _, _)) => acc > best_acc,
            };
            if better {
                best = Some((acc, n, style));
            }
        }
    }
    match best {
        Some((acc, n, style)) => AccuracyCell {
            model: model.to_owned(),
            condition,
            priming,
            accuracy: Some(acc),
            n_valid: n,
            style_used: Some(style),
            single_style,
        },
        None => AccuracyCell {
            model: model.to_owned(),
            condition,
            priming,
            accuracy: None,
            n_valid: 0,
            style_used: None,
            single_style,
        },
    }
}

/// All (model, condition, priming) cells present in the records.
pub fn accuracy_cells(records: &[TrialRecord]) -> Vec<AccuracyCell> {
    let mut keys = BTreeSet::new();
    for r in records {
        keys.insert((r.model.clone(), r.condition, r.priming));
    }
    keys.into_iter()
        .map(|(model, condition, priming)| accuracy(records, &model, condition, priming))
        .collect()
}

/// Difference between two cells in percentage points (first minus second).
pub fn delta(first: &AccuracyCell, second: &AccuracyCell) -> Result<f64, ScoreError> {
    if first.condition != second.condition || first.priming != second.priming {
        return Err(ScoreError::MismatchedCells(format!(
            "({}, {}) vs ({}, {})",
            first.condition, first.priming, second.condition, second.priming
        )));
    }
    match (first.accuracy, second.accuracy) {
        (Some(a), Some(b)) => Ok(a - b),
        _ => Err(ScoreError::MismatchedCells(
            "accuracy undefined on at least one side".into(),
        )),
    }
}

/// McNemar evidence over the instances answered by both systems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedComparison {
    pub table: ContingencyTable,
    pub test: McnemarResult,
    /// Number of shared answered instances behind the table.
    pub shared: usize,
}

/// Build the paired contingency table from two trial sets over the same
/// battery and run McNemar on it.
pub fn paired_comparison(
    first: &[TrialRecord],
    second: &[TrialRecord],
) -> Result<PairedComparison, ScoreError> {
    let answered = |records: &[TrialRecord]| -> BTreeMap<String, bool> {
        records
            .iter()
            .filter_map(|r| r.correct.map(|c| (r.instance_id.clone(), c)))
            .collect()
    };
    let first_by_id = answered(first);
    let second_by_id = answered(second);
    let mut table = ContingencyTable::default();
    let mut shared = 0usize;
    for (id, &first_correct) in &first_by_id {
        let Some(&second_correct) = second_by_id.get(id) else {
            continue;
        };
        shared += 1;
        match (first_correct, second_correct) {
            (true, true) => table.both_correct += 1,
            (true, false) => table.first_only += 1,
            (false, true) => table.second_only += 1,
            (false, false) => table.both_wrong += 1,
        }
    }
    if shared == 0 {
        return Err(ScoreError::DisjointInstances);
    }
    Ok(PairedComparison {
        table,
        test: mcnemar(&table),
        shared,
    })
}

/// Agreement between a model's answers and one heuristic's predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub model: String,
    pub heuristic: String,
    /// `None` aggregates over all conditions.
    pub condition: Option<ControlCondition>,
    /// Fraction of answered trials matching the heuristic; absent when no
    /// trial was answered.
    pub agreement: Option<f64>,
    pub n_answered: usize,
}

/// Per-heuristic agreement rates, per condition and overall, per model.
///
/// `predictions` maps instance id -> heuristic name -> predicted participant,
/// as carried in battery files and trial logs.
pub fn heuristic_consistency(
    records: &[TrialRecord],
    predictions: &BTreeMap<String, BTreeMap<String, String>>,
) -> Vec<ConsistencyRow> {
    #[derive(Default)]
    struct Tally {
        agree: usize,
        total: usize,
    }
    let mut tallies: BTreeMap<(String, String, Option<ControlCondition>), Tally> = BTreeMap::new();
    for record in records {
        let Some(answer) = record.outcome.answer.as_deref() else {
            continue;
        };
        let Some(instance_predictions) = predictions.get(&record.instance_id) else {
            continue;
        };
        for (heuristic, predicted) in instance_predictions {
            let agree = usize::from(predicted == answer);
            for condition in [Some(record.condition), None] {
                let tally = tallies
                    .entry((record.model.clone(), heuristic.clone(), condition))
                    .or_default();
                tally.agree += agree;
                tally.total += 1;
            }
        }
    }
    tallies
        .into_iter()
        .map(|((model, heuristic, condition), tally)| ConsistencyRow {
            model,
            heuristic,
            condition,
            agreement: (tally.total > 0).then(|| tally.agree as f64 / tally.total as f64),
            n_answered: tally.total,
        })
        .collect()
}

/// Behavioral groups models fall into on the three conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupLabel {
    /// Better on subject and passive object control than on object control
    /// (first-NP / maximum-distance behavior).
    Group1,
    /// Better on both object control forms than on subject control
    /// (matrix-patient behavior).
    Group2,
    /// Worse on passive object control than on active object control
    /// (second-NP behavior on object verbs).
    Group3,
    Unclassified,
}

impl GroupLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupLabel::Group1 => "Group1",
            GroupLabel::Group2 => "Group2",
            GroupLabel::Group3 => "Group3",
            GroupLabel::Unclassified => "Unclassified",
        }
    }
}

/// Per-condition accuracy profile (percentages) for one model and priming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionProfile {
    pub object_active: Option<f64>,
    pub object_passive: Option<f64>,
    pub subject_active: Option<f64>,
}

impl ConditionProfile {
    pub fn new(object_active: f64, object_passive: f64, subject_active: f64) -> Self {
        Self {
            object_active: Some(object_active),
            object_passive: Some(object_passive),
            subject_active: Some(subject_active),
        }
    }

    /// Collect a profile from accuracy cells for one (model, priming).
    pub fn from_cells(cells: &[AccuracyCell], model: &str, priming: Priming) -> Self {
        let get = |condition| {
            cells
                .iter()
                .find(|c| c.model == model && c.priming == priming && c.condition == condition)
                .and_then(|c| c.accuracy)
        };
        Self {
            object_active: get(ControlCondition::ObjectActive),
            object_passive: get(ControlCondition::ObjectPassive),
            subject_active: get(ControlCondition::SubjectActive),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupClassification {
    pub label: GroupLabel,
    pub margin: f64,
    /// Why the profile was left unclassified, when it was.
    pub diagnostics: Option<String>,
}

/// Margin (percentage points) a difference must clear to count as "better".
pub const DEFAULT_GROUP_MARGIN: f64 = 5.0;

/// Deterministic version of the paper's qualitative three-way grouping.
///
/// Group 1: subject and passive object control both beat active object
/// control. Group 2: both object control forms beat subject control.
/// Group 3: passive object control trails active object control without
/// subject control trailing the passive. A margin `m` makes "beats" strict.
pub fn classify_group(profile: &ConditionProfile, margin: f64) -> GroupClassification {
    let (Some(oa), Some(op), Some(subj)) = (
        profile.object_active,
        profile.object_passive,
        profile.subject_active,
    ) else {
        return GroupClassification {
            label: GroupLabel::Unclassified,
            margin,
            diagnostics: Some("accuracy undefined for at least one condition".into()),
        };
    };
    let mut fired = Vec::new();
    if subj > oa + margin && op > oa + margin {
        fired.push(GroupLabel::Group1);
    }
    if oa > subj + margin && op > subj + margin {
        fired.push(GroupLabel::Group2);
    }
    if oa > op + margin && subj >= op {
        fired.push(GroupLabel::Group3);
    }
    match fired.as_slice() {
        [label] => GroupClassification {
            label: *label,
            margin,
            diagnostics: None,
        },
        [] => GroupClassification {
            label: GroupLabel::Unclassified,
            margin,
            diagnostics: Some(format!(
                "no group rule fired for profile ({oa:.1}, {op:.1}, {subj:.1})"
            )),
        },
        multiple => GroupClassification {
            label: GroupLabel::Unclassified,
            margin,
            diagnostics: Some(format!(
                "multiple rules fired: {}",
                multiple
                    .iter()
                    .map(|l| l.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )),
        },
    }
}
