//! RIPPER decision lists: per-class rule growing by FOIL gain, reduced-error
//! pruning, a description-length stopping rule and ruleset optimization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{finalize_list, schema_of, Condition, ModelKind, RipperParams, RuleModel, Test, TrainSet};
use crate::dataset::Dataset;
use crate::error::{param, Result};
use crate::util::argmax;

/// Bits a ruleset may exceed the best description length seen so far.
const DL_SURPLUS: f64 = 64.0;
const THEORY_WEIGHT: f64 = 0.5;

fn covers(conds: &[Condition], values: &[f64]) -> bool {
    conds.iter().all(|c| c.holds(values))
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(1e-12, 1.0 - 1e-12)
}

/// Bits to pick `k` of `t` elements when each is chosen with probability `p`.
fn subset_dl(t: f64, k: f64, p: f64) -> f64 {
    let p = clamp_p(p);
    -k * p.log2() - (t - k) * (1.0 - p).log2()
}

/// Bits to encode the errors of a ruleset covering `cover` and leaving
/// `uncover` weight, with `fp` false positives and `fn_` false negatives.
fn data_dl(exp_fp_rate: f64, cover: f64, uncover: f64, fp: f64, fn_: f64) -> f64 {
    let total_bits = (cover + uncover + 1.0).log2();
    let (cover_bits, uncover_bits) = if cover > uncover {
        let exp_err = exp_fp_rate * (fp + fn_);
        let ub = if uncover > 0.0 { subset_dl(uncover, fn_, fn_ / uncover) } else { 0.0 };
        (subset_dl(cover, fp, exp_err / cover), ub)
    } else {
        let exp_err = (1.0 - exp_fp_rate) * (fp + fn_);
        let cb = if cover > 0.0 { subset_dl(cover, fp, fp / cover) } else { 0.0 };
        let ub = if uncover > 0.0 { subset_dl(uncover, fn_, exp_err / uncover) } else { 0.0 };
        (cb, ub)
    };
    total_bits + cover_bits + uncover_bits
}

/// Size of the condition space: nominal values plus two tests per distinct
/// numeric value.
fn count_all_conditions(ts: &TrainSet) -> f64 {
    let mut n = 0.0;
    for (a, attr) in ts.data.schema.iter().enumerate() {
        if attr.is_numeric() {
            let mut vals: Vec<f64> =
                ts.active.iter().map(|&i| ts.values(i)[a]).filter(|v| !v.is_nan()).collect();
            vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
            vals.dedup();
            n += 2.0 * vals.len() as f64;
        } else {
            n += attr.arity() as f64;
        }
    }
    n
}

struct Phase<'a, 'b> {
    ts: &'a TrainSet<'b>,
    params: &'a RipperParams,
    class: usize,
    data: Vec<usize>,
    exp_fp_rate: f64,
    num_all_conds: f64,
}

impl Phase<'_, '_> {
    fn is_pos(&self, i: usize) -> bool {
        self.ts.labels[i] == self.class
    }

    fn pn(&self, idx: &[usize]) -> (f64, f64) {
        let mut p = 0.0;
        let mut n = 0.0;
        for &i in idx {
            if self.is_pos(i) {
                p += self.ts.weights[i];
            } else {
                n += self.ts.weights[i];
            }
        }
        (p, n)
    }

    fn theory_dl(&self, conds: &[Condition]) -> f64 {
        let k = conds.len() as f64;
        if k == 0.0 {
            return 0.0;
        }
        let mut dl = k.log2();
        if k > 1.0 {
            dl += 2.0 * dl.log2();
        }
        dl += subset_dl(self.num_all_conds, k, k / self.num_all_conds);
        THEORY_WEIGHT * dl
    }

    fn ruleset_dl(&self, rules: &[Vec<Condition>]) -> f64 {
        let (mut cover, mut uncover, mut fp, mut fn_) = (0.0, 0.0, 0.0, 0.0);
        for &i in &self.data {
            let w = self.ts.weights[i];
            if rules.iter().any(|r| covers(r, self.ts.values(i))) {
                cover += w;
                if !self.is_pos(i) {
                    fp += w;
                }
            } else {
                uncover += w;
                if self.is_pos(i) {
                    fn_ += w;
                }
            }
        }
        rules.iter().map(|r| self.theory_dl(r)).sum::<f64>() + data_dl(self.exp_fp_rate, cover, uncover, fp, fn_)
    }

    /// Stratified, shuffled split into (grow, prune); the prune part takes
    /// about `1 / prune_folds` of each class's weight.
    fn split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
        let mut grow = Vec::new();
        let mut prune = Vec::new();
        for positive in [true, false] {
            let mut stratum: Vec<usize> = idx.iter().copied().filter(|&i| self.is_pos(i) == positive).collect();
            stratum.shuffle(rng);
            let target = self.ts.weight(&stratum) / self.params.prune_folds as f64;
            let mut taken = 0.0;
            for i in stratum {
                let w = self.ts.weights[i];
                if taken + w <= target + 1e-9 {
                    taken += w;
                    prune.push(i);
                } else {
                    grow.push(i);
                }
            }
        }
        grow.sort_unstable();
        prune.sort_unstable();
        (grow, prune)
    }

    /// Adds conditions by FOIL gain until the rule covers no negatives.
    fn grow(&self, grow: &[usize], mut conds: Vec<Condition>) -> Vec<Condition> {
        let ts = self.ts;
        let min_w = self.params.min_rule_weight;
        let mut covered: Vec<usize> = grow.iter().copied().filter(|&i| covers(&conds, ts.values(i))).collect();
        loop {
            let (p0, n0) = self.pn(&covered);
            if p0 <= 0.0 || n0 <= 0.0 {
                break;
            }
            let base = (p0 / (p0 + n0)).log2();
            let gain = |p1: f64, n1: f64| {
                if p1 <= 0.0 || p1 + n1 < min_w {
                    f64::NEG_INFINITY
                } else {
                    p1 * ((p1 / (p1 + n1)).log2() - base)
                }
            };
            let mut best: Option<(f64, Condition)> = None;
            let mut consider = |g: f64, c: Condition| {
                if g > 1e-12 && best.as_ref().is_none_or(|b| g > b.0 + 1e-12) {
                    best = Some((g, c));
                }
            };
            for (a, attr) in ts.data.schema.iter().enumerate() {
                if attr.is_numeric() {
                    let mut known: Vec<(f64, bool, f64)> = covered
                        .iter()
                        .filter_map(|&i| {
                            let v = ts.values(i)[a];
                            (!v.is_nan()).then_some((v, self.is_pos(i), ts.weights[i]))
                        })
                        .collect();
                    known.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
                    let (pt, nt) = known.iter().fold((0.0, 0.0), |(p, n), e| if e.1 { (p + e.2, n) } else { (p, n + e.2) });
                    let (mut pl, mut nl) = (0.0, 0.0);
                    for j in 0..known.len().saturating_sub(1) {
                        let (v, pos, w) = known[j];
                        if pos {
                            pl += w;
                        } else {
                            nl += w;
                        }
                        let next = known[j + 1].0;
                        if next <= v {
                            continue;
                        }
                        let theta = 0.5 * (v + next);
                        consider(gain(pl, nl), Condition { attribute: a, test: Test::LessEq(theta) });
                        consider(gain(pt - pl, nt - nl), Condition { attribute: a, test: Test::Greater(theta) });
                    }
                } else {
                    if conds.iter().any(|c| c.attribute == a) {
                        continue;
                    }
                    let mut tallies = vec![(0.0, 0.0); attr.arity()];
                    for &i in &covered {
                        let v = ts.values(i)[a];
                        if v.is_nan() {
                            continue;
                        }
                        let t = &mut tallies[v as usize];
                        if self.is_pos(i) {
                            t.0 += ts.weights[i];
                        } else {
                            t.1 += ts.weights[i];
                        }
                    }
                    for (v, (p, n)) in tallies.into_iter().enumerate() {
                        consider(gain(p, n), Condition { attribute: a, test: Test::Equals(v) });
                    }
                }
            }
            let Some((_, c)) = best else { break };
            covered.retain(|&i| c.holds(ts.values(i)));
            conds.push(c);
        }
        conds
    }

    /// Keeps the prefix maximizing (p - n) / (p + n) on the prune set.
    fn prune_single(&self, conds: Vec<Condition>, prune: &[usize]) -> Vec<Condition> {
        let mut best_len = conds.len();
        let mut best_val = f64::NEG_INFINITY;
        for k in 1..=conds.len() {
            let covered: Vec<usize> =
                prune.iter().copied().filter(|&i| covers(&conds[..k], self.ts.values(i))).collect();
            let (p, n) = self.pn(&covered);
            if p + n <= 0.0 {
                continue;
            }
            let val = (p - n) / (p + n);
            if val > best_val + 1e-12 {
                best_val = val;
                best_len = k;
            }
        }
        conds[..best_len].to_vec()
    }

    /// Keeps the prefix, no shorter than `min_len`, that maximizes accuracy
    /// of the whole ruleset on the prune set.
    fn prune_in_context(
        &self,
        conds: Vec<Condition>,
        min_len: usize,
        others: &[Vec<Condition>],
        prune: &[usize],
    ) -> Vec<Condition> {
        let total = self.ts.weight(prune);
        if total <= 0.0 {
            return conds;
        }
        let fixed: Vec<bool> = prune.iter().map(|&i| others.iter().any(|r| covers(r, self.ts.values(i)))).collect();
        let mut best_len = conds.len();
        let mut best_val = f64::NEG_INFINITY;
        for k in min_len.max(1)..=conds.len() {
            let correct: f64 = prune
                .iter()
                .zip(&fixed)
                .filter(|&(&i, &f)| (f || covers(&conds[..k], self.ts.values(i))) == self.is_pos(i))
                .map(|(&i, _)| self.ts.weights[i])
                .sum();
            let val = correct / total;
            if val > best_val + 1e-12 {
                best_val = val;
                best_len = k;
            }
        }
        conds[..best_len].to_vec()
    }

    fn uncovered(&self, rules: &[Vec<Condition>]) -> Vec<usize> {
        self.data
            .iter()
            .copied()
            .filter(|&i| !rules.iter().any(|r| covers(r, self.ts.values(i))))
            .collect()
    }

    /// Adds rules for positives not yet covered until a stopping rule fires.
    fn cover_positives(&self, rules: &mut Vec<Vec<Condition>>, rng: &mut ChaCha8Rng) {
        let mut residual = self.uncovered(rules);
        let mut min_dl = self.ruleset_dl(rules);
        loop {
            if self.pn(&residual).0 <= 0.0 {
                break;
            }
            let (grow, prune) = self.split(&residual, rng);
            let conds = self.grow(&grow, Vec::new());
            if conds.is_empty() {
                break;
            }
            let conds = self.prune_single(conds, &prune);
            let covered: Vec<usize> =
                residual.iter().copied().filter(|&i| covers(&conds, self.ts.values(i))).collect();
            let (p, n) = self.pn(&covered);
            if p <= 0.0 || n / (p + n) >= 0.5 {
                break;
            }
            rules.push(conds);
            let dl = self.ruleset_dl(rules);
            if dl > min_dl + DL_SURPLUS {
                rules.pop();
                break;
            }
            min_dl = min_dl.min(dl);
            let last = rules.last().unwrap();
            residual.retain(|&i| !covers(last, self.ts.values(i)));
        }
    }

    /// Deletes rules, last first, whenever that lowers the description length.
    fn reduce_dl(&self, rules: &mut Vec<Vec<Condition>>) {
        let mut i = rules.len();
        while i > 0 {
            i -= 1;
            let current = self.ruleset_dl(rules);
            let mut without = rules.clone();
            without.remove(i);
            if self.ruleset_dl(&without) < current - 1e-9 {
                *rules = without;
            }
        }
    }

    fn optimize(&self, rules: &mut Vec<Vec<Condition>>, rng: &mut ChaCha8Rng) {
        for i in 0..rules.len() {
            let before = self.uncovered(&rules[..i]);
            let (grow, prune) = self.split(&before, rng);
            let others: Vec<Vec<Condition>> = rules[i + 1..].to_vec();
            let original = rules[i].clone();
            let mut candidates = vec![original.clone()];
            let revision = self.grow(&grow, original.clone());
            candidates.push(self.prune_in_context(revision, original.len(), &others, &prune));
            let replacement = self.grow(&grow, Vec::new());
            if !replacement.is_empty() {
                candidates.push(self.prune_in_context(replacement, 1, &others, &prune));
            }
            let mut best = 0;
            let mut best_dl = f64::INFINITY;
            for (c, cand) in candidates.iter().enumerate() {
                rules[i] = cand.clone();
                let dl = self.ruleset_dl(rules);
                if dl < best_dl - 1e-9 {
                    best_dl = dl;
                    best = c;
                }
            }
            rules[i] = candidates.swap_remove(best);
        }
    }
}

/// Trains a RIPPER decision list. Classes are handled from the least to the
/// most frequent; the last one only appears through the default rule.
pub fn train_ripper(data: &Dataset, weights: &[f64], params: &RipperParams) -> Result<RuleModel> {
    if !(params.min_rule_weight > 0.0) {
        return param("min_rule_weight must be positive");
    }
    if params.prune_folds < 2 {
        return param("prune_folds must be at least 2");
    }
    let ts = TrainSet::new(data, weights, params.normalize_weights)?;
    let num_all_conds = count_all_conditions(&ts).max(1.0);
    let class_weight = ts.tally(&ts.active);
    let mut order: Vec<usize> = (0..ts.num_classes).collect();
    order.sort_by(|&a, &b| class_weight[a].partial_cmp(&class_weight[b]).unwrap().then(a.cmp(&b)));

    let mut remaining = ts.active.clone();
    let mut list = Vec::new();
    for (pos, &class) in order[..order.len() - 1].iter().enumerate() {
        let tally = ts.tally(&remaining);
        let total: f64 = tally.iter().sum();
        if tally[class] <= 0.0 {
            continue;
        }
        let phase = Phase {
            ts: &ts,
            params,
            class,
            data: remaining.clone(),
            exp_fp_rate: tally[class] / total,
            num_all_conds,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(pos as u64);
        let mut rules = Vec::new();
        phase.cover_positives(&mut rules, &mut rng);
        phase.reduce_dl(&mut rules);
        for _ in 0..params.optimize_iters {
            phase.optimize(&mut rules, &mut rng);
            phase.cover_positives(&mut rules, &mut rng);
            phase.reduce_dl(&mut rules);
        }
        remaining.retain(|&i| !rules.iter().any(|r| covers(r, ts.values(i))));
        list.extend(rules.into_iter().map(|r| (r, class)));
    }
    let rest = ts.tally(&remaining);
    let default_class =
        if rest.iter().sum::<f64>() > 0.0 { argmax(&rest) } else { *order.last().unwrap() };
    Ok(RuleModel {
        kind: ModelKind::RipperList,
        schema: schema_of(data),
        classes: data.classes.clone(),
        rules: finalize_list(&ts, list, default_class),
        default_class,
    })
}
