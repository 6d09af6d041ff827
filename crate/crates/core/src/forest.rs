//! Weight-aware random forest used as the black box of the grey-box learner.
//!
//! Each tree is grown on a bootstrap resample drawn with probability
//! proportional to instance weight. Nodes choose among a random subset of
//! attributes by weighted information gain. Leaves store raw class tallies;
//! Laplace smoothing is applied when scoring.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Instance};
use crate::error::{param, Error, Result};
use crate::util::{argmax, entropy};

const FOREST_FORMAT: &str = "slgb-forest";
const FOREST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Attributes sampled at each node. `None` means `ceil(log2(p))`, at least 1.
    pub attributes_per_split: Option<usize>,
    pub min_leaf_weight: f64,
    pub max_depth: Option<usize>,
    /// Add one to every class tally before normalizing a leaf.
    pub laplace: bool,
    /// Number of draws per bootstrap. `None` draws as many as there are instances.
    pub bootstrap_size: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            attributes_per_split: None,
            min_leaf_weight: 2.0,
            max_depth: None,
            laplace: true,
            bootstrap_size: None,
            seed: 1,
        }
    }
}

impl ForestConfig {
    pub fn resolved_attributes(&self, p: usize) -> usize {
        self.attributes_per_split
            .unwrap_or_else(|| (p as f64).log2().ceil() as usize)
            .clamp(1, p.max(1))
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return param("n_trees must be at least 1");
        }
        if let Some(k) = self.attributes_per_split {
            if k == 0 || k > p {
                return param(format!("attributes_per_split must be in 1..={p}, got {k}"));
            }
        }
        if !(self.min_leaf_weight > 0.0) {
            return param("min_leaf_weight must be positive");
        }
        if self.max_depth == Some(0) {
            return param("max_depth must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        tally: Vec<f64>,
    },
    Numeric {
        attribute: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Branch taken by missing values: the heavier one at training time.
        missing_left: bool,
    },
    Nominal {
        attribute: usize,
        children: Vec<usize>,
        fallback: usize,
    },
}

/// A tree stored as a node arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(tally: Vec<f64>) -> Tree {
        Tree { nodes: vec![Node::Leaf { tally }] }
    }

    pub fn leaf_tally(&self, values: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { tally } => return tally,
                Node::Numeric { attribute, threshold, left, right, missing_left } => {
                    let v = values[*attribute];
                    at = if v.is_nan() {
                        if *missing_left {
                            *left
                        } else {
                            *right
                        }
                    } else if v <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Nominal { attribute, children, fallback } => {
                    let v = values[*attribute];
                    at = if v.is_nan() {
                        *fallback
                    } else {
                        children.get(v as usize).copied().unwrap_or(*fallback)
                    };
                }
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    pub classes: Vec<String>,
    pub num_attributes: usize,
    pub config: ForestConfig,
    pub trees: Vec<Tree>,
    /// Set when training saw a single class; predictions are then that class
    /// with probability 1.
    pub degenerate: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format: String,
    version: u32,
    forest: TrainedForest,
}

impl TrainedForest {
    pub fn from_trees(classes: Vec<String>, num_attributes: usize, config: ForestConfig, trees: Vec<Tree>) -> Self {
        TrainedForest { classes, num_attributes, config, trees, degenerate: None }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class-probability vector: the mean of the per-tree leaf distributions.
    pub fn predict_proba(&self, values: &[f64]) -> Vec<f64> {
        let k = self.classes.len();
        if let Some(y) = self.degenerate {
            let mut p = vec![0.0; k];
            p[y] = 1.0;
            return p;
        }
        let mut acc = vec![0.0; k];
        for tree in &self.trees {
            let tally = tree.leaf_tally(values);
            let total: f64 = tally.iter().sum();
            if self.config.laplace {
                let denom = total + k as f64;
                for (a, &t) in acc.iter_mut().zip(tally) {
                    *a += (t + 1.0) / denom;
                }
            } else if total > 0.0 {
                for (a, &t) in acc.iter_mut().zip(tally) {
                    *a += t / total;
                }
            } else {
                for a in acc.iter_mut() {
                    *a += 1.0 / k as f64;
                }
            }
        }
        let sum: f64 = acc.iter().sum();
        for a in &mut acc {
            *a /= sum;
        }
        acc
    }

    pub fn predict_proba_instance(&self, x: &Instance) -> Vec<f64> {
        self.predict_proba(&x.values)
    }

    /// Most probable class; ties go to the first declared class.
    pub fn predict(&self, values: &[f64]) -> usize {
        argmax(&self.predict_proba(values))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ForestDocument {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            forest: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ForestDocument = serde_json::from_str(s)?;
        if doc.format != FOREST_FORMAT || doc.version != FOREST_VERSION {
            return Err(Error::Config(format!(
                "unsupported forest document {} v{}",
                doc.format, doc.version
            )));
        }
        Ok(doc.forest)
    }
}

/// Trains a forest on a fully labeled dataset with per-instance weights.
pub fn train_forest(data: &Dataset, weights: &[f64], config: &ForestConfig) -> Result<TrainedForest> {
    let p = data.num_attributes();
    config.validate(p)?;
    if data.is_empty() {
        return param("cannot train a forest on an empty dataset");
    }
    if weights.len() != data.len() {
        return param(format!("{} weights for {} instances", weights.len(), data.len()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return param("weights must be finite and non-negative");
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return param("weights must have a positive sum");
    }
    let labels = data.labels()?;
    let k = data.num_classes();

    let mut seen = vec![false; k];
    for (&y, &w) in labels.iter().zip(weights) {
        if w > 0.0 {
            seen[y] = true;
        }
    }
    if seen.iter().filter(|&&s| s).count() == 1 {
        let y = seen.iter().position(|&s| s).unwrap();
        let mut tally = vec![0.0; k];
        tally[y] = total;
        return Ok(TrainedForest {
            classes: data.classes.clone(),
            num_attributes: p,
            config: config.clone(),
            trees: vec![Tree::leaf(tally); config.n_trees],
            degenerate: Some(y),
        });
    }

    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let draws = config.bootstrap_size.unwrap_or(data.len());
    let per_split = config.resolved_attributes(p);
    let builder = TreeBuilder {
        data,
        labels: &labels,
        num_classes: k,
        per_split,
        min_leaf: config.min_leaf_weight,
        max_depth: config.max_depth,
    };

    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let mut counts = vec![0u32; data.len()];
            for _ in 0..draws {
                let u = rng.gen::<f64>() * acc;
                let i = cumulative.partition_point(|&c| c <= u).min(data.len() - 1);
                counts[i] += 1;
            }
            let sample: Vec<(usize, f64)> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i, c as f64))
                .collect();
            builder.build(sample, &mut rng)
        })
        .collect();

    Ok(TrainedForest {
        classes: data.classes.clone(),
        num_attributes: p,
        config: config.clone(),
        trees,
        degenerate: None,
    })
}

struct TreeBuilder<'a> {
    data: &'a Dataset,
    labels: &'a [usize],
    num_classes: usize,
    per_split: usize,
    min_leaf: f64,
    max_depth: Option<usize>,
}

enum Candidate {
    Numeric { threshold: f64 },
    Nominal,
}

impl TreeBuilder<'_> {
    fn build(&self, sample: Vec<(usize, f64)>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = Vec::new();
        self.grow(&sample, 0, None, &mut nodes, rng);
        Tree { nodes }
    }

    fn tally(&self, sample: &[(usize, f64)]) -> Vec<f64> {
        let mut t = vec![0.0; self.num_classes];
        for &(i, w) in sample {
            t[self.labels[i]] += w;
        }
        t
    }

    fn grow(
        &self,
        sample: &[(usize, f64)],
        depth: usize,
        parent: Option<&[f64]>,
        nodes: &mut Vec<Node>,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let at = nodes.len();
        let tally = self.tally(sample);
        let total: f64 = tally.iter().sum();
        if total <= 0.0 {
            // Empty branch inherits the parent's distribution.
            nodes.push(Node::Leaf { tally: parent.map(<[f64]>::to_vec).unwrap_or(tally) });
            return at;
        }
        let pure = tally.iter().filter(|&&c| c > 0.0).count() <= 1;
        let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || total < 2.0 * self.min_leaf {
            nodes.push(Node::Leaf { tally });
            return at;
        }

        let parent_entropy = entropy(&tally);
        let mut attrs: Vec<usize> = (0..self.data.num_attributes()).collect();
        attrs.shuffle(rng);
        let mut best: Option<(f64, usize, Candidate)> = None;
        for (n, &a) in attrs.iter().enumerate() {
            // Keep drawing past the quota until some attribute gives positive gain.
            if n >= self.per_split && best.is_some() {
                break;
            }
            if let Some((gain, cand)) = self.best_for_attribute(sample, a, parent_entropy, total) {
                if gain > 1e-10 && best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
                    best = Some((gain, a, cand));
                }
            }
        }
        let Some((_, attribute, cand)) = best else {
            nodes.push(Node::Leaf { tally });
            return at;
        };

        nodes.push(Node::Leaf { tally: Vec::new() });
        match cand {
            Candidate::Numeric { threshold } => {
                let (mut left, mut right) = (Vec::new(), Vec::new());
                let (mut wl, mut wr) = (0.0, 0.0);
                let mut missing = Vec::new();
                for &(i, w) in sample {
                    let v = self.data.instances[i].values[attribute];
                    if v.is_nan() {
                        missing.push((i, w));
                    } else if v <= threshold {
                        left.push((i, w));
                        wl += w;
                    } else {
                        right.push((i, w));
                        wr += w;
                    }
                }
                let missing_left = wl >= wr;
                if missing_left {
                    left.extend(missing);
                    left.sort_unstable_by_key(|e| e.0);
                } else {
                    right.extend(missing);
                    right.sort_unstable_by_key(|e| e.0);
                }
                let l = self.grow(&left, depth + 1, Some(&tally), nodes, rng);
                let r = self.grow(&right, depth + 1, Some(&tally), nodes, rng);
                nodes[at] = Node::Numeric { attribute, threshold, left: l, right: r, missing_left };
            }
            Candidate::Nominal => {
                let arity = self.data.schema[attribute].arity();
                let mut parts: Vec<Vec<(usize, f64)>> = vec![Vec::new(); arity];
                let mut weights = vec![0.0; arity];
                let mut missing = Vec::new();
                for &(i, w) in sample {
                    let v = self.data.instances[i].values[attribute];
                    if v.is_nan() {
                        missing.push((i, w));
                    } else {
                        parts[v as usize].push((i, w));
                        weights[v as usize] += w;
                    }
                }
                let fallback_branch = argmax(&weights);
                parts[fallback_branch].extend(missing);
                parts[fallback_branch].sort_unstable_by_key(|e| e.0);
                let children: Vec<usize> = parts
                    .iter()
                    .map(|part| self.grow(part, depth + 1, Some(&tally), nodes, rng))
                    .collect();
                let fallback = children[fallback_branch];
                nodes[at] = Node::Nominal { attribute, children, fallback };
            }
        }
        at
    }

    fn best_for_attribute(
        &self,
        sample: &[(usize, f64)],
        attribute: usize,
        parent_entropy: f64,
        total: f64,
    ) -> Option<(f64, Candidate)> {
        let k = self.num_classes;
        if self.data.schema[attribute].is_numeric() {
            let mut known: Vec<(f64, usize, f64)> = sample
                .iter()
                .filter_map(|&(i, w)| {
                    let v = self.data.instances[i].values[attribute];
                    (!v.is_nan()).then_some((v, self.labels[i], w))
                })
                .collect();
            if known.len() < 2 {
                return None;
            }
            known.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let known_total: f64 = known.iter().map(|e| e.2).sum();
            let mut right = vec![0.0; k];
            for e in &known {
                right[e.1] += e.2;
            }
            let mut left = vec![0.0; k];
            let (mut wl, mut best): (f64, Option<(f64, f64)>) = (0.0, None);
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
                if wl < self.min_leaf || wr < self.min_leaf {
                    continue;
                }
                let cond = (wl * entropy(&left) + wr * entropy(&right)) / known_total;
                let gain = (parent_entropy - cond) * known_total / total;
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, 0.5 * (v + next)));
                }
            }
            best.map(|(g, threshold)| (g, Candidate::Numeric { threshold }))
        } else {
            let arity = self.data.schema[attribute].arity();
            let mut tallies = vec![vec![0.0; k]; arity];
            let mut known_total = 0.0;
            for &(i, w) in sample {
                let v = self.data.instances[i].values[attribute];
                if !v.is_nan() {
                    tallies[v as usize][self.labels[i]] += w;
                    known_total += w;
                }
            }
            let heavy = tallies
                .iter()
                .filter(|t| t.iter().sum::<f64>() >= self.min_leaf)
                .count();
            if heavy < 2 || known_total <= 0.0 {
                return None;
            }
            let cond: f64 = tallies
                .iter()
                .map(|t| t.iter().sum::<f64>() * entropy(t))
                .sum::<f64>()
                / known_total;
            Some(((parent_entropy - cond) * known_total / total, Candidate::Nominal))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Attribute;

    fn two_classes() -> Vec<String> {
        vec!["A".into(), "B".into()]
    }

    fn separable() -> Dataset {
        let mut inst = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            inst.push(Instance::new(vec![t, 1.0 + t], Some(0)));
            inst.push(Instance::new(vec![3.0 + t, 2.0 - t], Some(1)));
        }
        Dataset::new(vec![Attribute::numeric("x"), Attribute::numeric("y")], "c", two_classes(), inst).unwrap()
    }

    #[test]
    fn separable_training_accuracy_is_one() {
        let d = separable();
        let f = train_forest(&d, &vec![1.0; d.len()], &ForestConfig::default()).unwrap();
        assert_eq!(f.trees.len(), 100);
        for x in &d.instances {
            assert_eq!(Some(f.predict(&x.values)), x.label);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let inst = (0..6).map(|i| Instance::new(vec![i as f64], Some(1))).collect();
        let d = Dataset::new(vec![Attribute::numeric("x")], "c", two_classes(), inst).unwrap();
        let f = train_forest(&d, &[1.0; 6], &ForestConfig::default()).unwrap();
        assert_eq!(f.degenerate, Some(1));
        assert_eq!(f.predict_proba(&[100.0]), vec![0.0, 1.0]);
        assert_eq!(f.predict(&[-3.0]), 1);
    }

    #[test]
    fn pure_leaf_and_vote_averaging() {
        let cfg = ForestConfig { laplace: false, ..ForestConfig::default() };
        let one = TrainedForest::from_trees(two_classes(), 1, cfg.clone(), vec![Tree::leaf(vec![4.0, 0.0])]);
        assert_eq!(one.predict_proba(&[0.0]), vec![1.0, 0.0]);
        assert_eq!(one.predict(&[0.0]), 0);

        let three = TrainedForest::from_trees(
            two_classes(),
            1,
            cfg,
            vec![Tree::leaf(vec![3.0, 0.0]), Tree::leaf(vec![5.0, 0.0]), Tree::leaf(vec![0.0, 2.0])],
        );
        let p = three.predict_proba(&[0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tie_goes_to_first_class() {
        let cfg = ForestConfig { laplace: false, ..ForestConfig::default() };
        let f = TrainedForest::from_trees(
            two_classes(),
            1,
            cfg,
            vec![Tree::leaf(vec![1.0, 0.0]), Tree::leaf(vec![0.0, 1.0])],
        );
        assert_eq!(f.predict_proba(&[0.0]), vec![0.5, 0.5]);
        assert_eq!(f.predict(&[0.0]), 0);
    }

    #[test]
    fn laplace_pure_leaf_is_below_one() {
        let d = separable();
        let f = train_forest(&d, &vec![1.0; d.len()], &ForestConfig::default()).unwrap();
        let p = f.predict_proba(&d.instances[0].values);
        let top = p.iter().cloned().fold(0.0, f64::max);
        assert!(top < 1.0 && top > 0.5);
    }

    #[test]
    fn deterministic_given_seed() {
        let d = separable();
        let cfg = ForestConfig { n_trees: 15, ..ForestConfig::default() };
        let a = train_forest(&d, &vec![1.0; d.len()], &cfg).unwrap();
        let b = train_forest(&d, &vec![1.0; d.len()], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weight_class_is_ignored() {
        let d = separable();
        let w: Vec<f64> = d.instances.iter().map(|x| if x.label == Some(1) { 0.0 } else { 1.0 }).collect();
        let f = train_forest(&d, &w, &ForestConfig::default()).unwrap();
        assert_eq!(f.degenerate, Some(0));
    }

    #[test]
    fn invalid_inputs() {
        let d = separable();
        assert!(train_forest(&d, &[1.0], &ForestConfig::default()).is_err());
        assert!(train_forest(&d, &vec![0.0; d.len()], &ForestConfig::default()).is_err());
        let cfg = ForestConfig { n_trees: 0, ..ForestConfig::default() };
        assert!(train_forest(&d, &vec![1.0; d.len()], &cfg).is_err());
        let cfg = ForestConfig { attributes_per_split: Some(3), ..ForestConfig::default() };
        assert!(train_forest(&d, &vec![1.0; d.len()], &cfg).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let d = separable();
        let cfg = ForestConfig { n_trees: 3, ..ForestConfig::default() };
        let f = train_forest(&d, &vec![1.0; d.len()], &cfg).unwrap();
        let back = TrainedForest::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn default_attribute_count() {
        let cfg = ForestConfig::default();
        assert_eq!(cfg.resolved_attributes(1), 1);
        assert_eq!(cfg.resolved_attributes(2), 1);
        assert_eq!(cfg.resolved_attributes(8), 3);
        assert_eq!(cfg.resolved_attributes(9), 4);
    }
}
