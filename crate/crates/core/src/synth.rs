//! Seeded synthetic datasets mixing numeric and nominal attributes.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Attribute, Dataset, Instance};
use crate::error::{param, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Gaussian clusters with centers evenly spaced on a circle of radius 2.
    Blobs { classes: usize, spread: f64 },
    /// Checkerboard over a `cells` x `cells` grid; two classes.
    XorGrid { cells: usize },
    /// Concentric rings of unit width, one class per ring.
    Rings { classes: usize, jitter: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub shape: Shape,
    pub instances: usize,
    /// Extra uninformative numeric attributes.
    pub noise_attributes: usize,
    /// Probability of replacing a label with a different class.
    pub label_noise: f64,
    /// Relative class frequencies; uniform when absent.
    pub class_priors: Option<Vec<f64>>,
    pub seed: u64,
}

impl SynthSpec {
    fn num_classes(&self) -> usize {
        match self.shape {
            Shape::Blobs { classes, .. } | Shape::Rings { classes, .. } => classes,
            Shape::XorGrid { .. } => 2,
        }
    }
}

fn sample_class(rng: &mut ChaCha8Rng, priors: &[f64]) -> usize {
    let total: f64 = priors.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (c, p) in priors.iter().enumerate() {
        if u < *p {
            return c;
        }
        u -= p;
    }
    priors.len() - 1
}

/// Two informative coordinates and their label.
fn sample_core(spec: &SynthSpec, rng: &mut ChaCha8Rng, priors: &[f64]) -> (f64, f64, usize) {
    match spec.shape {
        Shape::Blobs { classes, spread } => {
            let c = sample_class(rng, priors);
            let angle = TAU * c as f64 / classes as f64;
            let noise = Normal::new(0.0, spread).expect("positive spread");
            (2.0 * angle.cos() + noise.sample(rng), 2.0 * angle.sin() + noise.sample(rng), c)
        }
        Shape::XorGrid { cells } => {
            let x = rng.gen_range(0.0..cells as f64);
            let y = rng.gen_range(0.0..cells as f64);
            (x, y, (x.floor() as usize + y.floor() as usize) % 2)
        }
        Shape::Rings { jitter, .. } => {
            let c = sample_class(rng, priors);
            let noise = Normal::new(0.0, jitter).expect("positive jitter");
            let r = c as f64 + rng.gen::<f64>() + noise.sample(rng);
            let theta = rng.gen_range(0.0..TAU);
            (r * theta.cos(), r * theta.sin(), c)
        }
    }
}

/// Attributes: `x`, `y`, `noise*`, then the nominal `zone` (quadrant of the
/// informative coordinates around their center) and `tag` (pure noise).
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    let k = spec.num_classes();
    if k < 2 || spec.instances < k {
        return param("synthetic data needs at least 2 classes and one instance per class");
    }
    if !(0.0..1.0).contains(&spec.label_noise) {
        return param("label noise must lie in [0, 1)");
    }
    let priors = spec.class_priors.clone().unwrap_or_else(|| vec![1.0; k]);
    if priors.len() != k || priors.iter().any(|p| !(*p > 0.0)) {
        return param("class priors must be positive, one per class");
    }
    if let Shape::Blobs { spread, .. } = spec.shape {
        if !(spread > 0.0) {
            return param("blob spread must be positive");
        }
    }
    if let Shape::Rings { jitter, .. } = spec.shape {
        if !(jitter > 0.0) {
            return param("ring jitter must be positive");
        }
    }
    let center = match spec.shape {
        Shape::XorGrid { cells } => cells as f64 / 2.0,
        _ => 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut instances = Vec::with_capacity(spec.instances);
    for _ in 0..spec.instances {
        let (x, y, mut label) = sample_core(spec, &mut rng, &priors);
        let mut values = vec![x, y];
        for _ in 0..spec.noise_attributes {
            values.push(rng.gen_range(-1.0..1.0));
        }
        let zone = usize::from(x >= center) + 2 * usize::from(y >= center);
        values.push(zone as f64);
        values.push(rng.gen_range(0..3) as f64);
        if rng.gen::<f64>() < spec.label_noise {
            label = (label + rng.gen_range(1..k)) % k;
        }
        instances.push(Instance::new(values, Some(label)));
    }
    let mut schema = vec![Attribute::numeric("x"), Attribute::numeric("y")];
    schema.extend((0..spec.noise_attributes).map(|i| Attribute::numeric(format!("noise{i}"))));
    schema.push(Attribute::nominal("zone", ["q1", "q2", "q3", "q4"]));
    schema.push(Attribute::nominal("tag", ["a", "b", "c"]));
    Dataset::new(schema, "class", (0..k).map(|c| format!("c{c}")).collect(), instances)
}

/// Twelve datasets of 300 to 500 instances covering all three shapes.
pub fn benchmark_suite(seed: u64) -> Vec<SynthSpec> {
    let spec = |i: u64, name: &str, shape: Shape, n: usize, noise_attrs: usize, label_noise: f64, priors: Option<Vec<f64>>| {
        SynthSpec {
            name: name.to_string(),
            shape,
            instances: n,
            noise_attributes: noise_attrs,
            label_noise,
            class_priors: priors,
            seed: seed.wrapping_mul(1000).wrapping_add(i),
        }
    };
    vec![
        spec(1, "blobs2", Shape::Blobs { classes: 2, spread: 1.0 }, 400, 1, 0.02, None),
        spec(2, "blobs3", Shape::Blobs { classes: 3, spread: 1.1 }, 450, 1, 0.02, None),
        spec(3, "blobs4", Shape::Blobs { classes: 4, spread: 0.9 }, 500, 2, 0.0, None),
        spec(4, "blobs2-wide", Shape::Blobs { classes: 2, spread: 1.6 }, 400, 3, 0.0, None),
        spec(5, "blobs3-skewed", Shape::Blobs { classes: 3, spread: 1.0 }, 450, 1, 0.02, Some(vec![0.6, 0.3, 0.1])),
        spec(6, "xor2", Shape::XorGrid { cells: 2 }, 400, 1, 0.02, None),
        spec(7, "xor3", Shape::XorGrid { cells: 3 }, 500, 1, 0.0, None),
        spec(8, "xor2-noisy", Shape::XorGrid { cells: 2 }, 400, 3, 0.05, None),
        spec(9, "rings2", Shape::Rings { classes: 2, jitter: 0.1 }, 400, 1, 0.0, None),
        spec(10, "rings3", Shape::Rings { classes: 3, jitter: 0.1 }, 450, 1, 0.02, None),
        spec(11, "rings2-noisy", Shape::Rings { classes: 2, jitter: 0.2 }, 300, 2, 0.05, None),
        spec(12, "rings4", Shape::Rings { classes: 4, jitter: 0.08 }, 500, 0, 0.0, None),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_shapes() {
        let suite = benchmark_suite(1);
        assert_eq!(suite.len(), 12);
        for s in &suite {
            let d = generate(s).unwrap();
            assert_eq!(d.len(), s.instances);
            assert_eq!(d.num_classes(), s.num_classes());
            assert_eq!(d.num_attributes(), 4 + s.noise_attributes);
            assert!(d.class_counts().iter().all(|&c| c > 0), "{}", s.name);
        }
    }

    #[test]
    fn seeded() {
        let s = &benchmark_suite(3)[5];
        assert_eq!(generate(s).unwrap(), generate(s).unwrap());
        let other = &benchmark_suite(4)[5];
        assert_ne!(generate(s).unwrap(), generate(other).unwrap());
    }

    #[test]
    fn xor_labels_follow_checkerboard() {
        let s = SynthSpec {
            name: "t".into(),
            shape: Shape::XorGrid { cells: 2 },
            instances: 200,
            noise_attributes: 0,
            label_noise: 0.0,
            class_priors: None,
            seed: 2,
        };
        let d = generate(&s).unwrap();
        for x in &d.instances {
            let expect = (x.values[0].floor() as usize + x.values[1].floor() as usize) % 2;
            assert_eq!(x.label, Some(expect));
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let mut s = benchmark_suite(1)[0].clone();
        s.label_noise = 1.0;
        assert!(generate(&s).is_err());
    }
}
