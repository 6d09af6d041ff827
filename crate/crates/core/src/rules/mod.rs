//! Interpretable white-box learners and the rule models they produce.
//!
//! All three learners consume per-instance weights. Decision trees are
//! flattened to one rule per leaf; decision lists are interpreted in order and
//! always end with a condition-free default rule.

mod c45;
mod part;
mod pessimistic;
mod ripper;
mod split;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Attribute, AttributeKind, Dataset};
use crate::error::{param, Error, Result};

pub use c45::train_c45;
pub use part::train_part;
pub use pessimistic::estimated_extra_errors;
pub use ripper::train_ripper;

const RULES_FORMAT: &str = "slgb-rules";
const RULES_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum Test {
    LessEq(f64),
    Greater(f64),
    Equals(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: usize,
    pub test: Test,
}

impl Condition {
    /// Missing values satisfy no condition.
    pub fn holds(&self, values: &[f64]) -> bool {
        let v = values[self.attribute];
        if v.is_nan() {
            return false;
        }
        match self.test {
            Test::LessEq(t) => v <= t,
            Test::Greater(t) => v > t,
            Test::Equals(c) => v as usize == c,
        }
    }

    pub fn render(&self, schema: &[Attribute]) -> String {
        let a = &schema[self.attribute];
        match self.test {
            Test::LessEq(t) => format!("{} <= {}", a.name, fmt_threshold(t)),
            Test::Greater(t) => format!("{} > {}", a.name, fmt_threshold(t)),
            Test::Equals(c) => format!("{} = {}", a.name, a.format_value(c as f64)),
        }
    }
}

fn fmt_threshold(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub consequent: usize,
    /// Weight of the training instances this rule accounts for.
    pub coverage: f64,
    /// Weighted fraction of those instances whose label is the consequent.
    pub confidence: f64,
}

impl Rule {
    pub fn matches(&self, values: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(values))
    }

    pub fn is_default(&self) -> bool {
        self.conditions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tree,
    PartList,
    RipperList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleModel {
    pub kind: ModelKind,
    pub schema: Vec<Attribute>,
    pub classes: Vec<String>,
    pub rules: Vec<Rule>,
    pub default_class: usize,
}

/// The rule that decided a prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    /// Position in the model, or `None` when no tree path matched and the
    /// model's default class was used.
    pub rule_index: Option<usize>,
    pub rule: Rule,
    pub is_default: bool,
    pub text: String,
}

#[derive(Serialize, Deserialize)]
struct RulesDocument {
    format: String,
    version: u32,
    model: RuleModel,
}

impl RuleModel {
    pub fn predict(&self, values: &[f64]) -> usize {
        self.rules
            .iter()
            .find(|r| r.matches(values))
            .map_or(self.default_class, |r| r.consequent)
    }

    /// Leaves for trees; rules including the default for lists.
    pub fn count_rules(&self) -> usize {
        self.rules.len()
    }

    pub fn explain(&self, values: &[f64]) -> Explanation {
        let (rule_index, rule) = match self.rules.iter().position(|r| r.matches(values)) {
            Some(i) => (Some(i), self.rules[i].clone()),
            None => (
                None,
                Rule { conditions: Vec::new(), consequent: self.default_class, coverage: 0.0, confidence: 0.0 },
            ),
        };
        let text = self.render_rule(&rule);
        Explanation { rule_index, is_default: rule.is_default(), rule, text }
    }

    pub fn render_rule(&self, rule: &Rule) -> String {
        let body = if rule.conditions.is_empty() {
            "TRUE".to_string()
        } else {
            rule.conditions
                .iter()
                .map(|c| c.render(&self.schema))
                .collect::<Vec<_>>()
                .join(" AND ")
        };
        format!(
            "IF {body} THEN {} ({:.2}, {:.3})",
            self.classes[rule.consequent], rule.coverage, rule.confidence
        )
    }

    /// One rule per line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rules {
            let _ = writeln!(s, "{}", self.render_rule(r));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RulesDocument {
            format: RULES_FORMAT.into(),
            version: RULES_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: RulesDocument = serde_json::from_str(s)?;
        if doc.format != RULES_FORMAT || doc.version != RULES_VERSION {
            return Err(Error::Config(format!("unsupported rule document {} v{}", doc.format, doc.version)));
        }
        Ok(doc.model)
    }
}

pub fn predict_rules(m: &RuleModel, values: &[f64]) -> usize {
    m.predict(values)
}

pub fn count_rules(m: &RuleModel) -> usize {
    m.count_rules()
}

// ---------------------------------------------------------------------------
// Learner configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub min_leaf_weight: f64,
    pub confidence_factor: f64,
    /// Disable to keep the fully grown (collapsed) tree.
    pub prune: bool,
    pub subtree_raising: bool,
    /// Rescale weights to mean 1 before training, making the model depend
    /// only on weight ratios. Off: thresholds apply to raw weighted counts.
    pub normalize_weights: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf_weight: 2.0,
            confidence_factor: 0.25,
            prune: true,
            subtree_raising: true,
            normalize_weights: false,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<()> {
        if !(self.min_leaf_weight > 0.0) {
            return param("min_leaf_weight must be positive");
        }
        if !(self.confidence_factor > 0.0 && self.confidence_factor <= 0.5) {
            return param("confidence_factor must lie in (0, 0.5]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RipperParams {
    pub min_rule_weight: f64,
    pub prune_folds: usize,
    pub optimize_iters: usize,
    pub seed: u64,
    /// As [`TreeParams::normalize_weights`].
    pub normalize_weights: bool,
}

impl Default for RipperParams {
    fn default() -> Self {
        RipperParams { min_rule_weight: 2.0, prune_folds: 3, optimize_iters: 2, seed: 1, normalize_weights: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhiteBoxKind {
    C45,
    Part,
    Ripper,
}

impl WhiteBoxKind {
    pub fn short_name(self) -> &'static str {
        match self {
            WhiteBoxKind::C45 => "c45",
            WhiteBoxKind::Part => "part",
            WhiteBoxKind::Ripper => "rip",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c45" | "j48" => Some(WhiteBoxKind::C45),
            "part" => Some(WhiteBoxKind::Part),
            "rip" | "ripper" | "jrip" => Some(WhiteBoxKind::Ripper),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum WhiteBox {
    C45(TreeParams),
    Part(TreeParams),
    Ripper(RipperParams),
}

impl WhiteBox {
    pub fn default_for(kind: WhiteBoxKind) -> WhiteBox {
        match kind {
            WhiteBoxKind::C45 => WhiteBox::C45(TreeParams::default()),
            WhiteBoxKind::Part => WhiteBox::Part(TreeParams::default()),
            WhiteBoxKind::Ripper => WhiteBox::Ripper(RipperParams::default()),
        }
    }

    pub fn kind(&self) -> WhiteBoxKind {
        match self {
            WhiteBox::C45(_) => WhiteBoxKind::C45,
            WhiteBox::Part(_) => WhiteBoxKind::Part,
            WhiteBox::Ripper(_) => WhiteBoxKind::Ripper,
        }
    }

    /// Replaces the learner's seed, where it has one.
    pub fn with_seed(&self, seed: u64) -> WhiteBox {
        match self {
            WhiteBox::Ripper(p) => WhiteBox::Ripper(RipperParams { seed, ..p.clone() }),
            other => other.clone(),
        }
    }

    /// Same learner with weight normalization switched on or off.
    pub fn with_normalized_weights(&self, on: bool) -> WhiteBox {
        match self {
            WhiteBox::C45(p) => WhiteBox::C45(TreeParams { normalize_weights: on, ..p.clone() }),
            WhiteBox::Part(p) => WhiteBox::Part(TreeParams { normalize_weights: on, ..p.clone() }),
            WhiteBox::Ripper(p) => WhiteBox::Ripper(RipperParams { normalize_weights: on, ..p.clone() }),
        }
    }

    pub fn train(&self, data: &Dataset, weights: &[f64]) -> Result<RuleModel> {
        match self {
            WhiteBox::C45(p) => train_c45(data, weights, p),
            WhiteBox::Part(p) => train_part(data, weights, p),
            WhiteBox::Ripper(p) => train_ripper(data, weights, p),
        }
    }
}

// ---------------------------------------------------------------------------
// Shared training view

/// Labeled data with its weights, optionally rescaled to mean 1 over the
/// instances of positive weight; zero-weight instances are excluded from
/// `active`.
pub(crate) struct TrainSet<'a> {
    pub data: &'a Dataset,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub num_classes: usize,
    pub active: Vec<usize>,
}

impl<'a> TrainSet<'a> {
    pub fn new(data: &'a Dataset, weights: &[f64], normalize: bool) -> Result<Self> {
        if data.is_empty() {
            return param("cannot train on an empty dataset");
        }
        if weights.len() != data.len() {
            return param(format!("{} weights for {} instances", weights.len(), data.len()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return param("weights must be finite and non-negative");
        }
        if !(weights.iter().sum::<f64>() > 0.0) {
            return param("weights must have a positive sum");
        }
        let labels = data.labels()?;
        let active: Vec<usize> = (0..data.len()).filter(|&i| weights[i] > 0.0).collect();
        let scale = if normalize { active.len() as f64 / weights.iter().sum::<f64>() } else { 1.0 };
        let weights = weights.iter().map(|w| w * scale).collect();
        Ok(TrainSet { data, labels, weights, num_classes: data.num_classes(), active })
    }

    pub fn values(&self, i: usize) -> &[f64] {
        &self.data.instances[i].values
    }

    pub fn tally(&self, idx: &[usize]) -> Vec<f64> {
        let mut t = vec![0.0; self.num_classes];
        for &i in idx {
            t[self.labels[i]] += self.weights[i];
        }
        t
    }

    pub fn weight(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.weights[i]).sum()
    }
}

/// Recomputes per-rule coverage and confidence on the training residual,
/// drops non-default rules that cover nothing there, and appends the default.
pub(crate) fn finalize_list(ts: &TrainSet, rules: Vec<(Vec<Condition>, usize)>, default_class: usize) -> Vec<Rule> {
    let mut residual = ts.active.clone();
    let mut out = Vec::new();
    for (conditions, consequent) in rules {
        if conditions.is_empty() {
            continue;
        }
        let (covered, rest): (Vec<usize>, Vec<usize>) =
            residual.iter().partition(|&&i| conditions.iter().all(|c| c.holds(ts.values(i))));
        let w = ts.weight(&covered);
        if w <= 0.0 {
            continue;
        }
        let correct = ts.tally(&covered)[consequent];
        out.push(Rule { conditions, consequent, coverage: w, confidence: correct / w });
        residual = rest;
    }
    let w = ts.weight(&residual);
    let confidence = if w > 0.0 { ts.tally(&residual)[default_class] / w } else { 0.0 };
    out.push(Rule { conditions: Vec::new(), consequent: default_class, coverage: w, confidence });
    out
}

pub(crate) fn schema_of(data: &Dataset) -> Vec<Attribute> {
    data.schema
        .iter()
        .map(|a| match &a.kind {
            AttributeKind::Numeric { .. } => Attribute::numeric(a.name.clone()),
            AttributeKind::Nominal { .. } => a.clone(),
        })
        .collect()
}
