//! Top-k accuracy, per-class accuracy and confusion counts.

use serde::{Deserialize, Serialize};

use super::predict::{predict_clips, EvalConfig, Member};
use crate::data::RawClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub clips: usize,
    pub top1: f64,
    pub top5: f64,
    /// `None` for classes with no clips.
    pub per_class: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    /// Mean negative log-probability of the true class; set when the scores
    /// are probabilities.
    pub nll: Option<f64>,
}

/// Zero-based rank of the true class. Ties go to the lower class index, so
/// a class tied with the true one counts as ahead only if its index is lower.
pub fn rank_of(scores: &[f32], label: usize) -> usize {
    let s = scores[label];
    scores
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > s || (v == s && j < label))
        .count()
}

/// Highest score, lowest index among ties.
pub fn argmax(scores: &[f32]) -> usize {
    let mut best = 0;
    for (j, v) in scores.iter().enumerate() {
        if *v > scores[best] {
            best = j;
        }
    }
    best
}

pub fn score_metrics(scores: &[Vec<f32>], labels: &[usize], classes: usize) -> Result<EvalResult> {
    if scores.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} score rows for {} labels", scores.len(), labels.len())));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    let (mut hit1, mut hit5) = (0usize, 0usize);
    for (s, &y) in scores.iter().zip(labels) {
        if s.len() != classes || y >= classes {
            return Err(Error::Shape(format!("score row of {} for label {y} with {classes} classes", s.len())));
        }
        let r = rank_of(s, y);
        hit1 += (r < 1) as usize;
        hit5 += (r < 5) as usize;
        confusion[y][argmax(s)] += 1;
    }
    let n = scores.len() as f64;
    let per_class = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| row[c] as f64 / total as f64)
        })
        .collect();
    Ok(EvalResult {
        clips: scores.len(),
        top1: hit1 as f64 / n,
        top5: hit5 as f64 / n,
        per_class,
        confusion,
        nll: None,
    })
}

/// Runs the full scoring stack over labelled clips.
pub fn evaluate(members: &[Member<'_>], clips: &[RawClip], cfg: &EvalConfig) -> Result<EvalResult> {
    if clips.is_empty() {
        return Err(Error::EmptyDataset("evaluation set has no clips".into()));
    }
    let k = members
        .first()
        .map(|m| m.model.num_classes())
        .ok_or_else(|| Error::Config("ensemble has no members".into()))?;
    let scores = predict_clips(members, clips, cfg)?;
    let labels: Vec<usize> = clips.iter().map(|c| c.label).collect();
    let mut r = score_metrics(&scores, &labels, k)?;
    let nll = scores
        .iter()
        .zip(&labels)
        .map(|(p, &y)| -(p[y] as f64).max(1e-12).ln())
        .sum::<f64>();
    r.nll = Some(nll / clips.len() as f64);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_place_is_top5_not_top1() {
        let scores = vec![vec![0.5, 0.3, 0.9, 0.8, 0.1, 0.0]; 4];
        let r = score_metrics(&scores, &[1, 1, 1, 1], 6).unwrap();
        assert_eq!((r.top1, r.top5), (0.0, 1.0));
    }

    #[test]
    fn perfect_scores() {
        let scores = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let r = score_metrics(&scores, &[0, 2], 3).unwrap();
        assert_eq!((r.top1, r.top5), (1.0, 1.0));
        assert_eq!(r.per_class, vec![Some(1.0), None, Some(1.0)]);
        assert_eq!(r.confusion, vec![vec![1, 0, 0], vec![0, 0, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn ties_favour_lower_index() {
        assert_eq!(rank_of(&[1.0, 1.0, 1.0], 0), 0);
        assert_eq!(rank_of(&[1.0, 1.0, 1.0], 2), 2);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(score_metrics(&[], &[], 3), Err(Error::EmptyDataset(_))));
    }
}
