//! Rough-set machinery over a similarity relation: HEOM dissimilarity,
//! similarity classes, per-class positive/boundary/negative regions and
//! inclusion-degree memberships.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Attribute, Dataset};
use crate::error::{param, Result};
use crate::util::entropy;

/// Number of equal-frequency bins used to discretize numeric attributes when
/// measuring information gain.
pub const GAIN_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeomParams {
    pub attribute_weights: Vec<f64>,
    /// Two instances are similar when `1 - heom >= epsilon`.
    pub epsilon: f64,
}

impl HeomParams {
    pub fn new(attribute_weights: Vec<f64>, epsilon: f64) -> Result<Self> {
        let p = HeomParams { attribute_weights, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(num_attributes: usize, epsilon: f64) -> Result<Self> {
        HeomParams::new(vec![1.0; num_attributes], epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attribute_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return param("attribute weights must be finite and non-negative");
        }
        if !(self.attribute_weights.iter().sum::<f64>() > 0.0) {
            return param("attribute weights must not all be zero");
        }
        // Zero is accepted as the degenerate everything-is-similar relation.
        if !(0.0..=1.0).contains(&self.epsilon) {
            return param("epsilon must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Weighted heterogeneous Euclidean-overlap distance between two value
/// vectors whose numeric attributes are scaled to [0, 1]. A missing value is
/// at distance 1 from anything.
pub fn heom(schema: &[Attribute], a: &[f64], b: &[f64], params: &HeomParams) -> f64 {
    let w = &params.attribute_weights;
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..schema.len() {
        let (x, y) = (a[t], b[t]);
        let rho = if x.is_nan() || y.is_nan() {
            1.0
        } else if schema[t].is_numeric() {
            (x - y) * (x - y)
        } else if x == y {
            0.0
        } else {
            1.0
        };
        num += w[t] * rho;
        den += w[t];
    }
    (num / den).sqrt()
}

fn bin_index(cuts: &[f64], v: f64) -> usize {
    cuts.iter().filter(|&&c| v >= c).count()
}

/// Information gain of each attribute about the class, in bits, with numeric
/// attributes split into equal-frequency bins and missing values kept as a
/// separate bin.
pub fn attribute_information_gain(data: &Dataset) -> Result<Vec<f64>> {
    let labels = data.labels()?;
    let k = data.num_classes();
    let mut class_counts = vec![0.0; k];
    for &y in &labels {
        class_counts[y] += 1.0;
    }
    let h = entropy(&class_counts);
    let n = labels.len() as f64;
    let gains = (0..data.num_attributes())
        .map(|t| {
            let values: Vec<f64> = data.instances.iter().map(|x| x.values[t]).collect();
            let bins: Vec<usize> = if data.schema[t].is_numeric() {
                let mut known: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
                known.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let cuts: Vec<f64> = if known.is_empty() {
                    Vec::new()
                } else {
                    (1..GAIN_BINS).map(|j| known[known.len() * j / GAIN_BINS]).collect()
                };
                values
                    .iter()
                    .map(|&v| if v.is_nan() { GAIN_BINS } else { bin_index(&cuts, v) })
                    .collect()
            } else {
                let arity = data.schema[t].arity();
                values.iter().map(|&v| if v.is_nan() { arity } else { v as usize }).collect()
            };
            let num_bins = bins.iter().max().map_or(0, |m| m + 1);
            let mut tallies = vec![vec![0.0; k]; num_bins];
            for (&b, &y) in bins.iter().zip(&labels) {
                tallies[b][y] += 1.0;
            }
            let cond: f64 = tallies.iter().map(|c| c.iter().sum::<f64>() / n * entropy(c)).sum();
            (h - cond).max(0.0)
        })
        .collect();
    Ok(gains)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Positive,
    Boundary,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRegions {
    pub positive: Vec<usize>,
    pub boundary: Vec<usize>,
    pub negative: Vec<usize>,
}

/// Similarity classes of a labeled universe and the regions they induce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityStructure {
    pub classes: Vec<String>,
    pub labels: Vec<usize>,
    /// Sorted indices of the instances similar to each instance.
    pub similarity_classes: Vec<Vec<usize>>,
    pub regions: Vec<ClassRegions>,
    #[serde(skip)]
    region_of: Vec<Vec<Region>>,
}

impl SimilarityStructure {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn region(&self, class: usize, i: usize) -> Region {
        self.region_of[class][i]
    }

    /// Regions and similarity classes as JSON, for inspection.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn build_similarity_structure(data: &Dataset, params: &HeomParams) -> Result<SimilarityStructure> {
    params.validate()?;
    if params.attribute_weights.len() != data.num_attributes() {
        return param(format!(
            "{} attribute weights for {} attributes",
            params.attribute_weights.len(),
            data.num_attributes()
        ));
    }
    let labels = data.labels()?;
    let n = data.len();
    let similarity_classes: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &data.instances[i].values;
            (0..n)
                .filter(|&j| j == i || 1.0 - heom(&data.schema, xi, &data.instances[j].values, params) >= params.epsilon)
                .collect()
        })
        .collect();
    let k = data.num_classes();
    let mut regions = Vec::with_capacity(k);
    let mut region_of = Vec::with_capacity(k);
    for y in 0..k {
        let mut r = ClassRegions { positive: Vec::new(), boundary: Vec::new(), negative: Vec::new() };
        let mut codes = Vec::with_capacity(n);
        for (i, sim) in similarity_classes.iter().enumerate() {
            let inside = sim.iter().filter(|&&j| labels[j] == y).count();
            let code = if inside == sim.len() {
                r.positive.push(i);
                Region::Positive
            } else if inside > 0 {
                r.boundary.push(i);
                Region::Boundary
            } else {
                r.negative.push(i);
                Region::Negative
            };
            codes.push(code);
        }
        regions.push(r);
        region_of.push(codes);
    }
    Ok(SimilarityStructure { classes: data.classes.clone(), labels, similarity_classes, regions, region_of })
}

/// Inclusion degrees `(mu_P, mu_B, mu_N)` of instance `i`'s similarity class
/// in the regions of class `y`. An empty region gives membership 0.
pub fn region_memberships(s: &SimilarityStructure, i: usize, y: usize) -> Result<(f64, f64, f64)> {
    if y >= s.regions.len() {
        return param(format!("unknown class index {y}"));
    }
    if i >= s.len() {
        return param(format!("instance {i} outside a universe of {}", s.len()));
    }
    let (mut p, mut b, mut n) = (0usize, 0usize, 0usize);
    for &j in &s.similarity_classes[i] {
        match s.region_of[y][j] {
            Region::Positive => p += 1,
            Region::Boundary => b += 1,
            Region::Negative => n += 1,
        }
    }
    let r = &s.regions[y];
    let frac = |c: usize, size: usize| if size == 0 { 0.0 } else { c as f64 / size as f64 };
    Ok((frac(p, r.positive.len()), frac(b, r.boundary.len()), frac(n, r.negative.len())))
}
