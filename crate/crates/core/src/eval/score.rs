//! Scoring an inferred graph against ground truth over all ordered pairs.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::synthgen::CausalGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphScore {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    /// 1.0 with `precision_undefined` set when nothing was predicted.
    pub precision: f64,
    /// 1.0 with `recall_undefined` set when the truth has no edges.
    pub recall: f64,
    /// Share of true positives whose sign disagrees with the truth (0 without true positives).
    pub sign_mismatch_rate: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub false_positives: Vec<(usize, usize)>,
    pub false_negatives: Vec<(usize, usize)>,
    pub sign_mismatches: Vec<(usize, usize)>,
}

pub fn score_graph(predicted: &CausalGraph, truth: &CausalGraph) -> Result<GraphScore, EvalError> {
    if predicted.n_nodes() != truth.n_nodes() {
        return Err(EvalError::NodeCountMismatch(predicted.n_nodes(), truth.n_nodes()));
    }
    let n = truth.n_nodes();
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut false_positives = Vec::new();
    let mut false_negatives = Vec::new();
    let mut sign_mismatches = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            match (predicted.edge(s, t), truth.edge(s, t)) {
                (Some(ps), Some(ts)) => {
                    tp += 1;
                    if ps != ts {
                        sign_mismatches.push((s, t));
                    }
                }
                (Some(_), None) => {
                    fp += 1;
                    false_positives.push((s, t));
                }
                (None, Some(_)) => {
                    fn_ += 1;
                    false_negatives.push((s, t));
                }
                (None, None) => tn += 1,
            }
        }
    }
    let total = tp + fp + tn + fn_;
    let accuracy = if total == 0 { 1.0 } else { (tp + tn) as f64 / total as f64 };
    let precision_undefined = tp + fp == 0;
    let recall_undefined = tp + fn_ == 0;
    let precision = if precision_undefined { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if recall_undefined { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let sign_mismatch_rate = if tp == 0 { 0.0 } else { sign_mismatches.len() as f64 / tp as f64 };
    Ok(GraphScore {
        tp,
        fp,
        tn,
        fn_,
        accuracy,
        precision,
        recall,
        sign_mismatch_rate,
        precision_undefined,
        recall_undefined,
        false_positives,
        false_negatives,
        sign_mismatches,
    })
}

/// `"1->3;2->1"` using 1-based node numbers.
pub fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs.iter().map(|(s, t)| format!("{}->{}", s + 1, t + 1)).collect::<Vec<_>>().join(";")
}
