//! Self-labeling grey box: a random forest labels the unlabeled data, the
//! enlarged set is weighted, and a white box trained on it is the final,
//! interpretable classifier.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::amending::{apply_amending, balance_weights, AmendingKind, Provenance, RstConfig};
use crate::dataset::{Dataset, Imputer};
use crate::error::{Error, Result};
use crate::forest::{train_forest, ForestConfig, TrainedForest};
use crate::rules::{Explanation, RuleModel, WhiteBox, WhiteBoxKind};

const BUNDLE_FORMAT: &str = "slgb-model";
const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlgbConfig {
    pub forest: ForestConfig,
    pub whitebox: WhiteBox,
    pub amending: AmendingKind,
    pub rst: RstConfig,
    /// Seeds the forest and any randomized white box.
    pub seed: u64,
}

impl Default for SlgbConfig {
    fn default() -> Self {
        SlgbConfig {
            forest: ForestConfig::default(),
            whitebox: WhiteBox::default_for(WhiteBoxKind::Part),
            amending: AmendingKind::Rst,
            rst: RstConfig::default(),
            seed: 1,
        }
    }
}

impl SlgbConfig {
    pub fn new(whitebox: WhiteBoxKind, amending: AmendingKind) -> Self {
        SlgbConfig { whitebox: WhiteBox::default_for(whitebox), amending, ..SlgbConfig::default() }
    }

    /// Parses names such as `rf-part-rst`.
    pub fn parse_name(name: &str) -> Result<(WhiteBoxKind, AmendingKind)> {
        let parts: Vec<&str> = name.trim().split('-').collect();
        let bad = || Error::Config(format!("configuration '{name}' is not of the form rf-<c45|part|rip>-<none|conf|rst>"));
        if parts.len() != 3 || !parts[0].eq_ignore_ascii_case("rf") {
            return Err(bad());
        }
        let wb = WhiteBoxKind::parse(parts[1]).ok_or_else(bad)?;
        let am = AmendingKind::parse(parts[2]).ok_or_else(bad)?;
        Ok((wb, am))
    }

    pub fn name(&self) -> String {
        format!("rf-{}-{}", self.whitebox.kind().short_name(), self.amending.short_name())
    }

    fn resolved_forest(&self) -> ForestConfig {
        ForestConfig { seed: self.seed, ..self.forest.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sum: f64,
}

impl WeightSummary {
    fn of(w: &[f64]) -> Option<WeightSummary> {
        if w.is_empty() {
            return None;
        }
        let sum: f64 = w.iter().sum();
        Some(WeightSummary {
            min: w.iter().cloned().fold(f64::INFINITY, f64::min),
            max: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: sum / w.len() as f64,
            sum,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub labeled: usize,
    pub unlabeled: usize,
    /// Number of unlabeled instances given each class.
    pub self_label_distribution: Vec<usize>,
    pub labeled_weights: Option<WeightSummary>,
    pub self_labeled_weights: Option<WeightSummary>,
    pub attribute_weights: Option<Vec<f64>>,
    pub degenerate_forest: bool,
    pub warnings: Vec<String>,
}

/// A fitted grey box. Prediction uses the surrogate only; the forest is kept
/// for auditing.
#[derive(Debug, Clone)]
pub struct SlgbModel {
    pub surrogate: RuleModel,
    pub forest: TrainedForest,
    pub config: SlgbConfig,
    pub imputer: Imputer,
    pub self_labels: Vec<usize>,
    pub report: TrainingReport,
}

pub fn fit(labeled: &Dataset, unlabeled: &Dataset, config: &SlgbConfig) -> Result<SlgbModel> {
    if labeled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !labeled.same_schema(unlabeled) {
        return Err(Error::Config("labeled and unlabeled data have different schemas".into()));
    }
    if !labeled.is_fully_labeled() {
        return Err(Error::Config("every labeled instance needs a label".into()));
    }
    let imputer = Imputer::fit(&labeled.concat(unlabeled)?);
    let labeled = imputer.apply(labeled);
    let unlabeled = imputer.apply(unlabeled);

    let balance = balance_weights(&labeled)?;
    let forest = train_forest(&labeled, &balance, &config.resolved_forest())?;
    let enlarged = apply_amending(config.amending, &labeled, &unlabeled, &forest, &config.rst)?;
    let self_labels: Vec<usize> = enlarged.data.instances[labeled.len()..].iter().map(|x| x.label.unwrap()).collect();

    let mut warnings = Vec::new();
    let mut distribution = vec![0; labeled.num_classes()];
    for &y in &self_labels {
        distribution[y] += 1;
    }
    if !unlabeled.is_empty() {
        for (y, &c) in distribution.iter().enumerate() {
            if c == 0 {
                let msg = format!("class '{}' received no self-labels", labeled.classes[y]);
                warn!("{msg}");
                warnings.push(msg);
            }
        }
    }
    info!("self-label distribution {distribution:?}");

    let surrogate = config.whitebox.with_seed(config.seed).train(&enlarged.data, &enlarged.weights)?;
    let split = |p: Provenance| -> Vec<f64> {
        enlarged.weights.iter().zip(&enlarged.provenance).filter(|(_, &q)| q == p).map(|(w, _)| *w).collect()
    };
    let report = TrainingReport {
        labeled: labeled.len(),
        unlabeled: unlabeled.len(),
        self_label_distribution: distribution,
        labeled_weights: WeightSummary::of(&split(Provenance::OriginallyLabeled)),
        self_labeled_weights: WeightSummary::of(&split(Provenance::SelfLabeled)),
        attribute_weights: enlarged.attribute_weights.clone(),
        degenerate_forest: forest.degenerate.is_some(),
        warnings,
    };
    Ok(SlgbModel { surrogate, forest, config: config.clone(), imputer, self_labels, report })
}

/// The configured white box trained on the labeled data alone with balance
/// weights.
pub fn fit_baseline(labeled: &Dataset, config: &SlgbConfig) -> Result<RuleModel> {
    if labeled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let labeled = Imputer::fit(labeled).apply(labeled);
    let balance = balance_weights(&labeled)?;
    config.whitebox.with_seed(config.seed).train(&labeled, &balance)
}

fn impute(imputer: &Imputer, values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    imputer.fill(&mut v);
    v
}

impl SlgbModel {
    pub fn predict(&self, values: &[f64]) -> usize {
        self.surrogate.predict(&impute(&self.imputer, values))
    }

    pub fn explain(&self, values: &[f64]) -> Explanation {
        self.surrogate.explain(&impute(&self.imputer, values))
    }

    pub fn bundle(&self) -> ModelBundle {
        ModelBundle {
            config: self.config.clone(),
            surrogate: self.surrogate.clone(),
            imputer: self.imputer.clone(),
            report: self.report.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.bundle().to_json()
    }
}

/// Serializable part of a fitted model: everything inference needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub config: SlgbConfig,
    pub surrogate: RuleModel,
    pub imputer: Imputer,
    pub report: TrainingReport,
}

#[derive(Serialize, Deserialize)]
struct BundleDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    bundle: ModelBundle,
}

impl ModelBundle {
    pub fn predict(&self, values: &[f64]) -> usize {
        self.surrogate.predict(&impute(&self.imputer, values))
    }

    pub fn explain(&self, values: &[f64]) -> Explanation {
        self.surrogate.explain(&impute(&self.imputer, values))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&BundleDocument {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            bundle: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: BundleDocument = serde_json::from_str(s)?;
        if doc.format != BUNDLE_FORMAT || doc.version != BUNDLE_VERSION {
            return Err(Error::Config(format!("unsupported model document {} v{}", doc.format, doc.version)));
        }
        Ok(doc.bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Attribute, Instance};

    fn line(n: usize, offset: f64) -> Dataset {
        let inst = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64 + offset;
                Instance::new(vec![x], Some(usize::from(x > 0.5)))
            })
            .collect();
        Dataset::new(vec![Attribute::numeric("x")], "c", vec!["A".into(), "B".into()], inst).unwrap()
    }

    fn small_config(wb: WhiteBoxKind, am: AmendingKind) -> SlgbConfig {
        let mut c = SlgbConfig::new(wb, am);
        c.forest.n_trees = 10;
        c
    }

    #[test]
    fn names_roundtrip() {
        for n in ["rf-c45-none", "rf-part-conf", "rf-rip-rst"] {
            let (wb, am) = SlgbConfig::parse_name(n).unwrap();
            assert_eq!(SlgbConfig::new(wb, am).name(), n);
        }
        assert!(SlgbConfig::parse_name("svm-part-rst").is_err());
        assert!(SlgbConfig::parse_name("rf-part").is_err());
    }

    #[test]
    fn empty_unlabeled_reduces_to_white_box() {
        let l = line(40, 0.0);
        for wb in [WhiteBoxKind::C45, WhiteBoxKind::Part, WhiteBoxKind::Ripper] {
            let cfg = small_config(wb, AmendingKind::None);
            let m = fit(&l, &l.empty_like(), &cfg).unwrap();
            assert_eq!(m.surrogate, fit_baseline(&l, &cfg).unwrap());
        }
    }

    #[test]
    fn self_labels_match_forest() {
        let l = line(30, 0.0);
        let u = line(50, 0.01).without_labels();
        let m = fit(&l, &u, &small_config(WhiteBoxKind::Part, AmendingKind::Conf)).unwrap();
        for (x, &y) in u.instances.iter().zip(&m.self_labels) {
            assert_eq!(m.forest.predict(&x.values), y);
        }
        assert_eq!(m.report.self_label_distribution.iter().sum::<usize>(), 50);
    }

    #[test]
    fn bundle_roundtrip_and_determinism() {
        let l = line(30, 0.0);
        let u = line(40, 0.005).without_labels();
        let cfg = small_config(WhiteBoxKind::Ripper, AmendingKind::Rst);
        let a = fit(&l, &u, &cfg).unwrap().to_json().unwrap();
        let b = fit(&l, &u, &cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let bundle = ModelBundle::from_json(&a).unwrap();
        assert_eq!(bundle.to_json().unwrap(), a);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let l = line(10, 0.0);
        let other = Dataset::new(
            vec![Attribute::numeric("y")],
            "c",
            vec!["A".into(), "B".into()],
            vec![Instance::new(vec![0.0], None)],
        )
        .unwrap();
        assert!(matches!(fit(&l, &other, &SlgbConfig::default()), Err(Error::Config(_))));
        assert!(matches!(fit(&l.empty_like(), &l, &SlgbConfig::default()), Err(Error::EmptyDataset)));
    }
}
