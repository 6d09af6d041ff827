//! Self-labeling grey-box classification.
//!
//! A random forest trained on the labeled data labels the unlabeled data; the
//! enlarged set is weighted by an amending strategy and an interpretable rule
//! learner (C4.5, PART or RIPPER) trained on it becomes the final classifier.

pub mod amending;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod forest;
pub mod metrics;
pub mod pipeline;
pub mod rough;
pub mod rules;
pub mod stats;
pub mod synth;
pub mod util;

pub use amending::{AmendingKind, RstCombine, RstConfig};
pub use dataset::{Attribute, AttributeKind, Dataset, Instance};
pub use error::{Error, Result};
pub use forest::{ForestConfig, TrainedForest};
pub use pipeline::{fit, ModelBundle, SlgbConfig, SlgbModel};
pub use rules::{RuleModel, WhiteBox, WhiteBoxKind};
