//! PART decision lists: separate-and-conquer over partial pruned trees.

use super::pessimistic::leaf_errors;
use super::split::{partition, select_split, SplitTest};
use super::{finalize_list, schema_of, Condition, ModelKind, RuleModel, TrainSet, TreeParams};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::util::{argmax, entropy};

struct Partial {
    idx: Vec<usize>,
    tally: Vec<f64>,
    split: Option<SplitTest>,
    /// `None` marks a branch left unexpanded.
    children: Vec<Option<Partial>>,
}

impl Partial {
    fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Expands children in order of increasing entropy and stops at the first
/// one that does not end up a leaf.
fn expand(ts: &TrainSet, idx: Vec<usize>, params: &TreeParams) -> Partial {
    let tally = ts.tally(&idx);
    let Some(split) = select_split(ts, &idx, params.min_leaf_weight) else {
        return Partial { idx, tally, split: None, children: Vec::new() };
    };
    let mut parts: Vec<Option<Vec<usize>>> = partition(ts, &idx, &split).into_iter().map(Some).collect();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    let ent: Vec<f64> = parts
        .iter()
        .map(|p| entropy(&ts.tally(p.as_ref().unwrap())))
        .collect();
    order.sort_by(|&a, &b| ent[a].partial_cmp(&ent[b]).unwrap());
    let mut children: Vec<Option<Partial>> = (0..parts.len()).map(|_| None).collect();
    let mut all_leaves = true;
    for &b in &order {
        let part = parts[b].take().unwrap();
        let child = if ts.weight(&part) > 0.0 {
            expand(ts, part, params)
        } else {
            let t = ts.tally(&part);
            Partial { idx: part, tally: t, split: None, children: Vec::new() }
        };
        let leaf = child.is_leaf();
        children[b] = Some(child);
        if !leaf {
            all_leaves = false;
            break;
        }
    }
    let mut node = Partial { idx, tally, split: Some(split), children };
    if all_leaves && params.prune {
        let cf = params.confidence_factor;
        let as_tree: f64 = node.children.iter().flatten().map(|c| leaf_errors(&c.tally, cf)).sum();
        if leaf_errors(&node.tally, cf) <= as_tree + 0.1 + 1e-6 {
            node.split = None;
            node.children.clear();
        }
    }
    node
}

/// Leaf with the largest weight of correctly classified instances, with its path.
fn best_leaf<'a>(
    node: &'a Partial,
    path: &mut Vec<Condition>,
    best: &mut Option<(f64, Vec<Condition>, &'a Partial)>,
) {
    match node.split {
        None => {
            let score = node.tally.iter().cloned().fold(0.0, f64::max);
            if score > 0.0 && best.as_ref().is_none_or(|b| score > b.0 + 1e-12) {
                *best = Some((score, path.clone(), node));
            }
        }
        Some(split) => {
            for (b, child) in node.children.iter().enumerate() {
                if let Some(c) = child {
                    path.push(split.condition(b));
                    best_leaf(c, path, best);
                    path.pop();
                }
            }
        }
    }
}

/// Trains a PART decision list.
pub fn train_part(data: &Dataset, weights: &[f64], params: &TreeParams) -> Result<RuleModel> {
    params.validate()?;
    let ts = TrainSet::new(data, weights, params.normalize_weights)?;
    let mut remaining = ts.active.clone();
    let mut rules = Vec::new();
    let mut default_class = argmax(&ts.tally(&ts.active));
    while ts.weight(&remaining) > 0.0 {
        let tree = expand(&ts, remaining.clone(), params);
        let mut best = None;
        best_leaf(&tree, &mut Vec::new(), &mut best);
        let (_, conditions, leaf) = best.expect("a non-empty partial tree has a non-empty leaf");
        let class = argmax(&leaf.tally);
        if conditions.is_empty() {
            default_class = class;
            break;
        }
        let mut covered = leaf.idx.clone();
        covered.sort_unstable();
        remaining.retain(|i| covered.binary_search(i).is_err());
        rules.push((conditions, class));
    }
    Ok(RuleModel {
        kind: ModelKind::PartList,
        schema: schema_of(data),
        classes: data.classes.clone(),
        rules: finalize_list(&ts, rules, default_class),
        default_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Attribute, Instance};
    use crate::rules::{Rule, Test};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = Vec::new();
        for i in 0..100 {
            let (cx, y) = if i < 50 { (-2.0, 0) } else { (2.0, 1) };
            // Uniform noise of width 2 keeps the blobs separated.
            let x = cx + rng.gen_range(-1.0..1.0);
            let z = rng.gen_range(-1.0..1.0);
            inst.push(Instance::new(vec![x, z], Some(y)));
        }
        Dataset::new(
            vec![Attribute::numeric("x"), Attribute::numeric("z")],
            "c",
            vec!["A".into(), "B".into()],
            inst,
        )
        .unwrap()
    }

    #[test]
    fn separated_blobs_short_accurate_list() {
        let d = blobs(7);
        let m = train_part(&d, &[1.0; 100], &TreeParams::default()).unwrap();
        assert!(m.count_rules() <= 4, "{}", m.render());
        let correct = d.instances.iter().filter(|x| m.predict(&x.values) == x.label.unwrap()).count();
        assert!(correct as f64 / 100.0 >= 0.95);
        assert!(m.rules.last().unwrap().is_default());
    }

    #[test]
    fn pure_data_single_default() {
        let inst = (0..8).map(|i| Instance::new(vec![i as f64], Some(0))).collect();
        let d = Dataset::new(vec![Attribute::numeric("x")], "c", vec!["A".into(), "B".into()], inst).unwrap();
        let m = train_part(&d, &[1.0; 8], &TreeParams::default()).unwrap();
        assert_eq!(m.count_rules(), 1);
        assert!(m.rules[0].is_default());
        assert_eq!(m.predict(&[100.0]), 0);
    }

    #[test]
    fn list_order_matters() {
        let d = blobs(3);
        let m = train_part(&d, &[1.0; 100], &TreeParams::default()).unwrap();
        let overlap = |t: Test, y| Rule {
            conditions: vec![Condition { attribute: 0, test: t }],
            consequent: y,
            coverage: 1.0,
            confidence: 1.0,
        };
        let mut a = m.clone();
        a.rules = vec![overlap(Test::LessEq(1.0), 0), overlap(Test::Greater(-1.0), 1), m.rules.last().unwrap().clone()];
        let mut b = a.clone();
        b.rules.swap(0, 1);
        assert_ne!(a.predict(&[0.0, 0.0]), b.predict(&[0.0, 0.0]));
    }

    #[test]
    fn residual_coverage_positive() {
        let d = blobs(11);
        let m = train_part(&d, &[1.0; 100], &TreeParams::default()).unwrap();
        for r in m.rules.iter().filter(|r| !r.is_default()) {
            assert!(r.coverage > 0.0);
        }
    }
}
