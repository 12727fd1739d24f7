use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Condition, Document, TextError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmHistogram {
    pub persona: String,
    pub condition: Condition,
    pub n_docs: usize,
    /// Share of the arm's documents in each cluster.
    pub frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaShift {
    pub persona: String,
    /// Blackout minus normal frequency per cluster.
    pub delta: Vec<f64>,
    pub dominant_normal: usize,
    pub dominant_blackout: usize,
    /// Frequency gain of the cluster that dominates the blackout arm.
    pub dominant_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub k: usize,
    pub histograms: Vec<ArmHistogram>,
    pub personas: Vec<PersonaShift>,
}

impl ShiftReport {
    pub fn persona(&self, persona: &str) -> Option<&PersonaShift> {
        self.personas.iter().find(|p| p.persona == persona)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Per-persona cluster frequencies in each arm and their blackout − normal
/// difference. Every persona needs documents in both arms.
pub fn cluster_shift(labels: &[usize], docs: &[Document], k: usize) -> Result<ShiftReport, TextError> {
    if labels.len() != docs.len() {
        return Err(TextError::InvalidArgument(format!("{} labels for {} documents", labels.len(), docs.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= k) {
        return Err(TextError::InvalidArgument(format!("label {l} out of range for k={k}")));
    }
    let mut counts: BTreeMap<(&str, Condition), Vec<usize>> = BTreeMap::new();
    for (doc, &l) in docs.iter().zip(labels) {
        counts.entry((doc.persona.as_str(), doc.condition)).or_insert_with(|| vec![0; k])[l] += 1;
    }
    let histograms: Vec<ArmHistogram> = counts
        .iter()
        .map(|((persona, condition), c)| {
            let n: usize = c.iter().sum();
            ArmHistogram {
                persona: persona.to_string(),
                condition: *condition,
                n_docs: n,
                frequencies: c.iter().map(|&x| x as f64 / n as f64).collect(),
            }
        })
        .collect();

    let mut personas: Vec<&str> = counts.keys().map(|(p, _)| *p).collect();
    personas.dedup();
    let mut shifts = Vec::new();
    for persona in personas {
        let arm = |condition| histograms.iter().find(|h| h.persona == persona && h.condition == condition);
        let (normal, blackout) = match (arm(Condition::Normal), arm(Condition::Blackout)) {
            (Some(n), Some(b)) => (n, b),
            (None, _) => return Err(TextError::MissingCondition { persona: persona.into(), missing: Condition::Normal }),
            (_, None) => return Err(TextError::MissingCondition { persona: persona.into(), missing: Condition::Blackout }),
        };
        let delta: Vec<f64> = blackout.frequencies.iter().zip(&normal.frequencies).map(|(b, n)| b - n).collect();
        let dominant_blackout = argmax(&blackout.frequencies);
        shifts.push(PersonaShift {
            persona: persona.to_string(),
            dominant_normal: argmax(&normal.frequencies),
            dominant_blackout,
            dominant_delta: delta[dominant_blackout],
            delta,
        });
    }
    Ok(ShiftReport { k, histograms, personas: shifts })
}
