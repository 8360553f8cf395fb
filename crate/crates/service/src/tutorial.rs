use serde::{Deserialize, Serialize};
use wugkit::annotators::AnnotationItem;
use wugkit::ingest::{parse_label_table, parse_pairs, parse_uses};
use wugkit::model::{validate_label, Label, WordEntry};
use wugkit::scheduler::accept_uploaded_pairs;
use wugkit::stats::spearman;

use crate::config::GateParams;

const DEFAULT_USES: &[u8] = include_bytes!("../fixtures/tutorial_uses.csv");
const DEFAULT_GOLD: &[u8] = include_bytes!("../fixtures/tutorial_gold.csv");

/// Difference charged for answering "Cannot decide" on a tutorial item.
pub const CANNOT_DECIDE_PENALTY: f64 = 3.0;

/// Fixed practice instances with hidden gold labels.
#[derive(Debug, Clone)]
pub struct TutorialSet {
    items: Vec<AnnotationItem>,
    gold: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grade {
    pub passed: bool,
    pub spearman: Option<f64>,
    pub mean_abs_diff: f64,
}

impl TutorialSet {
    /// Builds a set from a uses file and a labelled pairs table, in table order.
    pub fn from_csv(uses_csv: &[u8], gold_csv: &[u8]) -> wugkit::Result<Self> {
        let uses = parse_uses(uses_csv)?;
        let pairs = parse_pairs(gold_csv)?;
        let table = parse_label_table(gold_csv)?;
        let lemma = uses.first().map(|u| u.lemma.clone()).unwrap_or_default();
        let instances = accept_uploaded_pairs(&uses, &pairs)?;
        let word = WordEntry::new(lemma, uses, instances)?;
        let items = word
            .instances
            .iter()
            .map(|i| AnnotationItem::from_instance(&word, i).expect("validated instance"))
            .collect();
        let gold = word.instances.iter().map(|i| table[&i.pair]).collect();
        Ok(Self { items, gold })
    }

    pub fn default_set() -> Self {
        Self::from_csv(DEFAULT_USES, DEFAULT_GOLD).expect("bundled tutorial is valid")
    }

    pub fn items(&self) -> &[AnnotationItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn grade(&self, submitted: &[i64], gate: &GateParams) -> Result<Grade, String> {
        if submitted.len() != self.gold.len() {
            return Err(format!("expected {} labels, got {}", self.gold.len(), submitted.len()));
        }
        let labels = submitted
            .iter()
            .map(|&v| validate_label(v).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(grade(&labels, &self.gold, gate))
    }
}

pub fn grade(submitted: &[Label], gold: &[Label], gate: &GateParams) -> Grade {
    let mut diff = 0.0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (s, g) in submitted.iter().zip(gold) {
        match (s.score(), g.score()) {
            (Some(a), Some(b)) => {
                diff += (a - b).abs();
                xs.push(a);
                ys.push(b);
            }
            _ => diff += CANNOT_DECIDE_PENALTY,
        }
    }
    let mean_abs_diff = if gold.is_empty() { 0.0 } else { diff / gold.len() as f64 };
    let rho = spearman(&xs, &ys).ok();
    let passed = rho.is_some_and(|r| r >= gate.min_spearman) && mean_abs_diff <= gate.max_mean_abs_diff;
    Grade {
        passed,
        spearman: rho,
        mean_abs_diff,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold() -> Vec<i64> {
        let set = TutorialSet::default_set();
        set.gold.iter().map(|l| l.value() as i64).collect()
    }

    #[test]
    fn ships_ten_items() {
        assert_eq!(TutorialSet::default_set().len(), 10);
    }

    #[test]
    fn exact_answers_pass() {
        let g = TutorialSet::default_set().grade(&gold(), &GateParams::default()).unwrap();
        assert!(g.passed);
        assert_eq!(g.mean_abs_diff, 0.0);
    }

    #[test]
    fn reversed_answers_fail() {
        let reversed: Vec<i64> = gold().into_iter().map(|v| 5 - v).collect();
        let g = TutorialSet::default_set().grade(&reversed, &GateParams::default()).unwrap();
        assert!(!g.passed);
        assert!((g.spearman.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_step_off_on_one_item_passes() {
        let mut labels = gold();
        labels[0] -= 1;
        let g = TutorialSet::default_set().grade(&labels, &GateParams::default()).unwrap();
        assert!(g.passed, "{g:?}");
        assert!((g.mean_abs_diff - 0.1).abs() < 1e-12);
    }

    #[test]
    fn cannot_decide_costs_three() {
        let mut labels = gold();
        labels[0] = 0;
        labels[1] = 0;
        let g = TutorialSet::default_set().grade(&labels, &GateParams::default()).unwrap();
        assert!((g.mean_abs_diff - 0.6).abs() < 1e-12);
        assert!(!g.passed);
    }

    #[test]
    fn wrong_length_is_rejected() {
        assert!(TutorialSet::default_set().grade(&[1, 2], &GateParams::default()).is_err());
    }
}
