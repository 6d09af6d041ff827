//! Weighting of the enlarged training set after self-labeling.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dataset::{normalize_numeric, Dataset};
use crate::error::{param, Result};
use crate::forest::TrainedForest;
use crate::rough::{attribute_information_gain, build_similarity_structure, region_memberships, HeomParams};
use crate::util::{argmax, logistic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmendingKind {
    None,
    Conf,
    Rst,
}

impl AmendingKind {
    pub fn short_name(self) -> &'static str {
        match self {
            AmendingKind::None => "none",
            AmendingKind::Conf => "conf",
            AmendingKind::Rst => "rst",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(AmendingKind::None),
            "conf" => Some(AmendingKind::Conf),
            "rst" => Some(AmendingKind::Rst),
            _ => None,
        }
    }
}

/// How rough-set weights combine with the weights the instances had before.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RstCombine {
    Replace,
    Multiply,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RstConfig {
    pub epsilon: f64,
    /// Fixed attribute weights; information gain on the enlarged set when absent.
    pub attribute_weights: Option<Vec<f64>>,
    pub combine: RstCombine,
}

impl Default for RstConfig {
    fn default() -> Self {
        RstConfig { epsilon: 0.98, attribute_weights: None, combine: RstCombine::Replace }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OriginallyLabeled,
    SelfLabeled,
}

/// Labeled instances followed by self-labeled ones, with training weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnlargedSet {
    pub data: Dataset,
    pub weights: Vec<f64>,
    pub provenance: Vec<Provenance>,
    /// Attribute weights used for the similarity relation, under RST.
    pub attribute_weights: Option<Vec<f64>>,
}

/// Minority class count divided by the count of each instance's class.
pub fn balance_weights(labeled: &Dataset) -> Result<Vec<f64>> {
    let labels = labeled.labels()?;
    let counts = labeled.class_counts();
    let Some(minority) = counts.iter().copied().filter(|&c| c > 0).min() else {
        return param("cannot balance an empty dataset");
    };
    Ok(labels.iter().map(|&y| minority as f64 / counts[y] as f64).collect())
}

/// Forest labels for each instance and the probability of that label.
pub fn conf_weights(forest: &TrainedForest, unlabeled: &Dataset) -> (Vec<usize>, Vec<f64>) {
    unlabeled
        .instances
        .iter()
        .map(|x| {
            let p = forest.predict_proba(&x.values);
            let y = argmax(&p);
            (y, p[y])
        })
        .unzip()
}

/// Resolves the attribute weights for the similarity relation. Falls back to
/// uniform weights when no attribute carries information about the class.
pub fn heom_params_for(normalized: &Dataset, config: &RstConfig) -> Result<HeomParams> {
    let weights = match &config.attribute_weights {
        Some(w) => w.clone(),
        None => {
            let g = attribute_information_gain(normalized)?;
            if g.iter().sum::<f64>() > 0.0 {
                g
            } else {
                warn!("no attribute has positive information gain; using uniform attribute weights");
                vec![1.0; normalized.num_attributes()]
            }
        }
    };
    HeomParams::new(weights, config.epsilon)
}

/// `logistic(mu_P + 0.5 mu_B - mu_N)` for every instance with respect to its
/// own label. Numeric attributes must already be scaled to [0, 1].
pub fn rst_weights(enlarged: &Dataset, params: &HeomParams) -> Result<Vec<f64>> {
    let s = build_similarity_structure(enlarged, params)?;
    (0..s.len())
        .map(|i| {
            let (p, b, n) = region_memberships(&s, i, s.labels[i])?;
            Ok(logistic(p + 0.5 * b - n))
        })
        .collect()
}

/// Self-labels `unlabeled` with the forest and weights the enlarged set.
pub fn apply_amending(
    kind: AmendingKind,
    labeled: &Dataset,
    unlabeled: &Dataset,
    forest: &TrainedForest,
    rst: &RstConfig,
) -> Result<WeightedEnlargedSet> {
    let balance = balance_weights(labeled)?;
    let (self_labels, confidence) = conf_weights(forest, unlabeled);
    let mut tagged = unlabeled.clone();
    for (x, &y) in tagged.instances.iter_mut().zip(&self_labels) {
        x.label = Some(y);
    }
    let data = labeled.concat(&tagged)?;
    let provenance: Vec<Provenance> = std::iter::repeat_n(Provenance::OriginallyLabeled, labeled.len())
        .chain(std::iter::repeat_n(Provenance::SelfLabeled, unlabeled.len()))
        .collect();
    let prior: Vec<f64> = balance.iter().copied().chain(std::iter::repeat_n(1.0, unlabeled.len())).collect();
    let (weights, attribute_weights) = match kind {
        AmendingKind::None => (prior, None),
        AmendingKind::Conf => (balance.into_iter().chain(confidence).collect(), None),
        AmendingKind::Rst => {
            let normalized = normalize_numeric(&data);
            let params = heom_params_for(&normalized, rst)?;
            let w = rst_weights(&normalized, &params)?;
            let w = match rst.combine {
                RstCombine::Replace => w,
                RstCombine::Multiply => w.iter().zip(&prior).map(|(a, b)| a * b).collect(),
            };
            (w, Some(params.attribute_weights))
        }
    };
    Ok(WeightedEnlargedSet { data, weights, provenance, attribute_weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Attribute, Instance};
    use crate::forest::{train_forest, ForestConfig};

    fn counts(spec: &[(usize, usize)]) -> Dataset {
        let mut inst = Vec::new();
        for &(y, n) in spec {
            inst.extend((0..n).map(|i| Instance::new(vec![i as f64], Some(y))));
        }
        Dataset::new(vec![Attribute::numeric("x")], "c", vec!["A".into(), "B".into(), "C".into()], inst).unwrap()
    }

    #[test]
    fn balance_fixtures() {
        let w = balance_weights(&counts(&[(0, 50), (1, 25), (2, 5)])).unwrap();
        assert_eq!(w[0], 0.1);
        assert_eq!(w[50], 0.2);
        assert_eq!(w[79], 1.0);
        let w = balance_weights(&counts(&[(0, 30), (1, 10)])).unwrap();
        assert_eq!(w[0], 1.0 / 3.0);
        assert_eq!(w[39], 1.0);
        assert!(balance_weights(&counts(&[(0, 4), (1, 4), (2, 4)])).unwrap().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn logistic_fixtures() {
        assert!((logistic(1.0) - 0.7310585786300049).abs() < 1e-12);
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(-1.0) - 0.2689414213699951).abs() < 1e-12);
    }

    fn two_class(n: usize) -> Dataset {
        let inst = (0..n).map(|i| Instance::new(vec![i as f64], Some(usize::from(i >= n / 2)))).collect();
        Dataset::new(vec![Attribute::numeric("x")], "c", vec!["A".into(), "B".into()], inst).unwrap()
    }

    #[test]
    fn none_with_empty_unlabeled_is_labeled_set() {
        let l = two_class(10);
        let f = train_forest(&l, &[1.0; 10], &ForestConfig { n_trees: 5, ..ForestConfig::default() }).unwrap();
        let u = l.empty_like();
        let e = apply_amending(AmendingKind::None, &l, &u, &f, &RstConfig::default()).unwrap();
        assert_eq!(e.data, l);
        assert_eq!(e.weights, balance_weights(&l).unwrap());
    }

    #[test]
    fn conf_weights_are_max_probability() {
        let l = two_class(20);
        let f = train_forest(&l, &[1.0; 20], &ForestConfig { n_trees: 7, ..ForestConfig::default() }).unwrap();
        let u = l.without_labels();
        let e = apply_amending(AmendingKind::Conf, &l, &u, &f, &RstConfig::default()).unwrap();
        for (k, x) in u.instances.iter().enumerate() {
            let p = f.predict_proba(&x.values);
            let top = p.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(e.weights[20 + k], top);
            assert!(top >= 0.5 && top <= 1.0);
            assert_eq!(e.data.instances[20 + k].label, Some(f.predict(&x.values)));
        }
        assert_eq!(e.provenance[19], Provenance::OriginallyLabeled);
        assert_eq!(e.provenance[20], Provenance::SelfLabeled);
    }

    #[test]
    fn rst_weights_in_open_unit_interval() {
        let l = two_class(30);
        let f = train_forest(&l, &[1.0; 30], &ForestConfig { n_trees: 5, ..ForestConfig::default() }).unwrap();
        let u = l.without_labels();
        let e = apply_amending(AmendingKind::Rst, &l, &u, &f, &RstConfig::default()).unwrap();
        assert_eq!(e.weights.len(), 60);
        assert!(e.weights.iter().all(|&w| w > 0.0 && w < 1.0));
        assert!(e.attribute_weights.is_some());
    }
}
