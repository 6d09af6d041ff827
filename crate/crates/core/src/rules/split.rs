//! Gain-ratio split selection shared by the C4.5 tree and PART.

use super::{Condition, Test, TrainSet};
use crate::util::{argmax, entropy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SplitTest {
    Numeric { attribute: usize, threshold: f64 },
    Nominal { attribute: usize, arity: usize },
}

impl SplitTest {
    pub fn num_branches(&self) -> usize {
        match self {
            SplitTest::Numeric { .. } => 2,
            SplitTest::Nominal { arity, .. } => *arity,
        }
    }

    /// Branch for a value vector, `None` when the value is missing.
    pub fn branch(&self, values: &[f64]) -> Option<usize> {
        match *self {
            SplitTest::Numeric { attribute, threshold } => {
                let v = values[attribute];
                (!v.is_nan()).then_some(if v <= threshold { 0 } else { 1 })
            }
            SplitTest::Nominal { attribute, .. } => {
                let v = values[attribute];
                (!v.is_nan()).then_some(v as usize)
            }
        }
    }

    pub fn condition(&self, branch: usize) -> Condition {
        match *self {
            SplitTest::Numeric { attribute, threshold } => Condition {
                attribute,
                test: if branch == 0 { Test::LessEq(threshold) } else { Test::Greater(threshold) },
            },
            SplitTest::Nominal { attribute, .. } => Condition { attribute, test: Test::Equals(branch) },
        }
    }
}

/// Routes instances to branches; missing values follow the heaviest branch.
pub(crate) fn partition(ts: &TrainSet, idx: &[usize], test: &SplitTest) -> Vec<Vec<usize>> {
    let mut parts = vec![Vec::new(); test.num_branches()];
    let mut weights = vec![0.0; test.num_branches()];
    let mut missing = Vec::new();
    for &i in idx {
        match test.branch(ts.values(i)) {
            Some(b) => {
                parts[b].push(i);
                weights[b] += ts.weights[i];
            }
            None => missing.push(i),
        }
    }
    if !missing.is_empty() {
        let heavy = argmax(&weights);
        parts[heavy].extend(missing);
        parts[heavy].sort_unstable();
    }
    parts
}

struct Scored {
    test: SplitTest,
    info_gain: f64,
    gain_ratio: f64,
}

fn split_info(branch_weights: &[f64]) -> f64 {
    entropy(branch_weights)
}

fn score_nominal(ts: &TrainSet, idx: &[usize], attribute: usize, min_leaf: f64, total: f64) -> Option<Scored> {
    let arity = ts.data.schema[attribute].arity();
    let k = ts.num_classes;
    let mut tallies = vec![vec![0.0; k]; arity];
    let mut known = vec![0.0; k];
    for &i in idx {
        let v = ts.values(i)[attribute];
        if !v.is_nan() {
            tallies[v as usize][ts.labels[i]] += ts.weights[i];
            known[ts.labels[i]] += ts.weights[i];
        }
    }
    let branch_weights: Vec<f64> = tallies.iter().map(|t| t.iter().sum()).collect();
    if branch_weights.iter().filter(|&&w| w >= min_leaf).count() < 2 {
        return None;
    }
    let known_total: f64 = known.iter().sum();
    let cond: f64 = tallies.iter().zip(&branch_weights).map(|(t, w)| w * entropy(t)).sum::<f64>() / known_total;
    let info_gain = (entropy(&known) - cond) * known_total / total;
    let si = split_info(&branch_weights);
    Some(Scored {
        test: SplitTest::Nominal { attribute, arity },
        info_gain,
        gain_ratio: if si > 0.0 { info_gain / si } else { 0.0 },
    })
}

fn score_numeric(ts: &TrainSet, idx: &[usize], attribute: usize, min_leaf: f64, total: f64) -> Option<Scored> {
    let k = ts.num_classes;
    let mut known: Vec<(f64, usize, f64)> = idx
        .iter()
        .filter_map(|&i| {
            let v = ts.values(i)[attribute];
            (!v.is_nan()).then_some((v, ts.labels[i], ts.weights[i]))
        })
        .collect();
    if known.len() < 2 {
        return None;
    }
    known.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let known_total: f64 = known.iter().map(|e| e.2).sum();
    // Minimum branch weight grows with the node size, as in C4.5.
    let min_split = (0.1 * known_total / k as f64).clamp(min_leaf, min_leaf.max(25.0));
    if known_total < 2.0 * min_split {
        return None;
    }
    let mut right = vec![0.0; k];
    for e in &known {
        right[e.1] += e.2;
    }
    let parent = entropy(&right);
    let mut left = vec![0.0; k];
    let mut wl = 0.0;
    let mut candidates = 0usize;
    let mut best: Option<(f64, f64, f64)> = None;
    for j in 0..known.len() - 1 {
        let (v, y, w) = known[j];
        left[y] += w;
        right[y] -= w;
        wl += w;
        let next = known[j + 1].0;
        if next <= v {
            continue;
        }
        let wr = known_total - wl;
        if wl < min_split || wr < min_split {
            continue;
        }
        candidates += 1;
        let cond = (wl * entropy(&left) + wr * entropy(&right)) / known_total;
        let gain = parent - cond;
        if best.is_none_or(|(g, _, _)| gain > g + 1e-12) {
            best = Some((gain, 0.5 * (v + next), wl));
        }
    }
    let (gain, threshold, wl) = best?;
    // Penalty for choosing among many thresholds.
    let info_gain = gain * known_total / total - (candidates as f64).log2() / total;
    if info_gain <= 0.0 {
        return None;
    }
    let si = split_info(&[wl, known_total - wl]);
    Some(Scored {
        test: SplitTest::Numeric { attribute, threshold },
        info_gain,
        gain_ratio: if si > 0.0 { info_gain / si } else { 0.0 },
    })
}

/// Best split by gain ratio among attributes whose information gain is at
/// least the average over all admissible splits. `None` makes a leaf.
pub(crate) fn select_split(ts: &TrainSet, idx: &[usize], min_leaf: f64) -> Option<SplitTest> {
    let tally = ts.tally(idx);
    let total: f64 = tally.iter().sum();
    if total < 2.0 * min_leaf || tally.iter().filter(|&&c| c > 0.0).count() <= 1 {
        return None;
    }
    let scored: Vec<Scored> = (0..ts.data.num_attributes())
        .filter_map(|a| {
            if ts.data.schema[a].is_numeric() {
                score_numeric(ts, idx, a, min_leaf, total)
            } else {
                score_nominal(ts, idx, a, min_leaf, total)
            }
        })
        .collect();
    if scored.is_empty() {
        return None;
    }
    let average = scored.iter().map(|s| s.info_gain).sum::<f64>() / scored.len() as f64;
    let mut best: Option<&Scored> = None;
    for s in &scored {
        if s.info_gain >= average - 1e-3 && s.gain_ratio > best.map_or(0.0, |b| b.gain_ratio) + 1e-6 {
            best = Some(s);
        }
    }
    best.map(|s| s.test)
}
