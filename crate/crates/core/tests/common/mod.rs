#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slgb::dataset::{Attribute, Dataset, Instance};

/// A small labeled universe with numeric values in [0, 1], nominal values and
/// occasional missing values, plus attribute weights and a threshold.
pub struct Universe {
    pub data: Dataset,
    pub weights: Vec<f64>,
    pub epsilon: f64,
}

pub fn random_universe(seed: u64) -> Universe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=30);
    let k = rng.gen_range(2..=3);
    let numeric = rng.gen_range(0..=3);
    let nominal = rng.gen_range(if numeric == 0 { 1 } else { 0 }..=2);
    let mut schema: Vec<Attribute> = (0..numeric).map(|t| Attribute::numeric(format!("n{t}"))).collect();
    let arities: Vec<usize> = (0..nominal).map(|_| rng.gen_range(2..=4)).collect();
    for (t, &a) in arities.iter().enumerate() {
        schema.push(Attribute::nominal(format!("c{t}"), (0..a).map(|v| format!("v{v}"))));
    }
    // Coarse grids make exact duplicates and shared similarity classes common.
    let grid = [4.0, 10.0, 1000.0][rng.gen_range(0..3)];
    let mut instances: Vec<Instance> = Vec::with_capacity(n);
    for _ in 0..n {
        if !instances.is_empty() && rng.gen_bool(0.15) {
            let src = instances[rng.gen_range(0..instances.len())].values.clone();
            instances.push(Instance::new(src, Some(rng.gen_range(0..k))));
            continue;
        }
        let mut v: Vec<f64> = (0..numeric).map(|_| (rng.gen::<f64>() * grid).round() / grid).collect();
        v.extend(arities.iter().map(|&a| rng.gen_range(0..a) as f64));
        for x in v.iter_mut() {
            if rng.gen_bool(0.05) {
                *x = f64::NAN;
            }
        }
        instances.push(Instance::new(v, Some(rng.gen_range(0..k))));
    }
    let classes = (0..k).map(|c| format!("k{c}")).collect();
    let data = Dataset::new(schema, "class", classes, instances).expect("valid universe");
    let mut weights: Vec<f64> = (0..numeric + nominal).map(|_| rng.gen_range(0.0..2.0)).collect();
    if rng.gen_bool(0.3) {
        let t = rng.gen_range(0..weights.len());
        weights[t] = 0.0;
    }
    if weights.iter().sum::<f64>() == 0.0 {
        weights[0] = 1.0;
    }
    let epsilon = [0.5, 0.7, 0.8, 0.9, 0.98, 1.0][rng.gen_range(0..6)];
    Universe { data, weights, epsilon }
}

/// Definitions materialized literally as sets.
pub struct OracleRegions {
    pub similarity: Vec<BTreeSet<usize>>,
    /// Per class: (positive, boundary, negative).
    pub regions: Vec<(BTreeSet<usize>, BTreeSet<usize>, BTreeSet<usize>)>,
    /// Per instance and class: (mu_P, mu_B, mu_N).
    pub memberships: Vec<Vec<(f64, f64, f64)>>,
    /// Per instance, with respect to its own label.
    pub weights: Vec<f64>,
}

pub fn oracle_distance(u: &Universe, a: usize, b: usize) -> f64 {
    let xa = &u.data.instances[a].values;
    let xb = &u.data.instances[b].values;
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (t, attr) in u.data.schema.iter().enumerate() {
        let d = if xa[t].is_nan() || xb[t].is_nan() {
            1.0
        } else if attr.is_numeric() {
            (xa[t] - xb[t]).powi(2)
        } else if xa[t] == xb[t] {
            0.0
        } else {
            1.0
        };
        weighted += u.weights[t] * d;
        total += u.weights[t];
    }
    (weighted / total).sqrt()
}

pub fn oracle(u: &Universe) -> OracleRegions {
    let n = u.data.len();
    let k = u.data.num_classes();
    let universe: BTreeSet<usize> = (0..n).collect();
    let similarity: Vec<BTreeSet<usize>> = (0..n)
        .map(|i| {
            let mut s: BTreeSet<usize> =
                (0..n).filter(|&j| 1.0 - oracle_distance(u, i, j) >= u.epsilon).collect();
            s.insert(i);
            s
        })
        .collect();
    let mut regions = Vec::new();
    for y in 0..k {
        let concept: BTreeSet<usize> = (0..n).filter(|&i| u.data.instances[i].label == Some(y)).collect();
        let lower: BTreeSet<usize> = (0..n).filter(|&i| similarity[i].is_subset(&concept)).collect();
        let upper: BTreeSet<usize> = (0..n).filter(|&i| !similarity[i].is_disjoint(&concept)).collect();
        let boundary: BTreeSet<usize> = upper.difference(&lower).copied().collect();
        let negative: BTreeSet<usize> = universe.difference(&upper).copied().collect();
        regions.push((lower, boundary, negative));
    }
    let degree = |s: &BTreeSet<usize>, r: &BTreeSet<usize>| {
        if r.is_empty() {
            0.0
        } else {
            s.intersection(r).count() as f64 / r.len() as f64
        }
    };
    let memberships: Vec<Vec<(f64, f64, f64)>> = (0..n)
        .map(|i| {
            regions
                .iter()
                .map(|(p, b, ng)| (degree(&similarity[i], p), degree(&similarity[i], b), degree(&similarity[i], ng)))
                .collect()
        })
        .collect();
    let weights = (0..n)
        .map(|i| {
            let (p, b, ng) = memberships[i][u.data.instances[i].label.unwrap()];
            1.0 / (1.0 + (-(p + 0.5 * b - ng)).exp())
        })
        .collect();
    OracleRegions { similarity, regions, memberships, weights }
}

/// Checks every region, membership and weight against the oracle; returns
/// the first mismatch.
pub fn compare_with_oracle(u: &Universe) -> Result<(), String> {
    use slgb::amending::rst_weights;
    use slgb::rough::{build_similarity_structure, region_memberships, HeomParams};

    let params = HeomParams::new(u.weights.clone(), u.epsilon).map_err(|e| e.to_string())?;
    let s = build_similarity_structure(&u.data, &params).map_err(|e| e.to_string())?;
    let o = oracle(u);
    for i in 0..u.data.len() {
        let got: BTreeSet<usize> = s.similarity_classes[i].iter().copied().collect();
        if got != o.similarity[i] {
            return Err(format!("similarity class of {i}: {got:?} vs {:?}", o.similarity[i]));
        }
    }
    for (y, (p, b, ng)) in o.regions.iter().enumerate() {
        let r = &s.regions[y];
        let as_set = |v: &Vec<usize>| v.iter().copied().collect::<BTreeSet<usize>>();
        if &as_set(&r.positive) != p || &as_set(&r.boundary) != b || &as_set(&r.negative) != ng {
            return Err(format!("regions of class {y} differ"));
        }
        for i in 0..u.data.len() {
            let m = region_memberships(&s, i, y).map_err(|e| e.to_string())?;
            if m != o.memberships[i][y] {
                return Err(format!("memberships of {i} in class {y}: {m:?} vs {:?}", o.memberships[i][y]));
            }
        }
    }
    let w = rst_weights(&u.data, &params).map_err(|e| e.to_string())?;
    for (i, (a, b)) in w.iter().zip(&o.weights).enumerate() {
        if (a - b).abs() > 1e-12 {
            return Err(format!("weight of {i}: {a} vs {b}"));
        }
    }
    Ok(())
}

/// Two Gaussian-ish clusters on `x`, a noisy `y` and a nominal attribute.
pub fn two_clusters(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|i| {
            let y = i % 2;
            let x = y as f64 * 2.0 + rng.gen::<f64>() * 1.5;
            Instance::new(vec![x, rng.gen::<f64>(), rng.gen_range(0..3) as f64], Some(y))
        })
        .collect();
    let schema = vec![Attribute::numeric("x"), Attribute::numeric("z"), Attribute::nominal("t", ["a", "b", "c"])];
    Dataset::new(schema, "class", vec!["A".into(), "B".into()], instances).unwrap()
}
