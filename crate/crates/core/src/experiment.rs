//! Experiment harness: cross-validated ratio sweeps and labeled/unlabeled
//! grid studies, with per-cell CSV and aggregate JSON reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_path, make_grid_split, make_split, Dataset, LoadOptions, SemiSupervisedSplit};
use crate::error::{param, Error, Result};
use crate::metrics::{kappa, accuracy, relative_growth, simplicity, utility, ConfusionMatrix, SimplicityParams};
use crate::pipeline::{fit, fit_baseline, SlgbConfig};
use crate::stats::{compare_against_control, friedman_test, ComparisonTable, FriedmanResult, ScoreMatrix};
use crate::synth::{benchmark_suite, generate};
use crate::util::{mean, std_dev};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// CSV, ARFF or KEEL files.
    pub datasets: Vec<PathBuf>,
    /// Adds the twelve seeded synthetic datasets.
    pub synthetic: bool,
    pub ratios: Vec<f64>,
    /// Cross-validation folds; repetitions in grid studies.
    pub folds: usize,
    /// Names such as `rf-part-rst`.
    pub configs: Vec<String>,
    pub seed: u64,
    pub alpha: f64,
    pub simplicity: SimplicityParams,
    pub epsilon: f64,
    pub n_trees: usize,
    pub class_column: Option<String>,
    pub grid_fracs: Vec<f64>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: Vec::new(),
            synthetic: false,
            ratios: vec![0.1, 0.2, 0.3, 0.4],
            folds: 10,
            configs: vec!["rf-c45-rst".into(), "rf-part-rst".into(), "rf-rip-rst".into()],
            seed: 1,
            alpha: 0.6,
            simplicity: SimplicityParams::default(),
            epsilon: 0.98,
            n_trees: 100,
            class_column: None,
            grid_fracs: vec![0.05, 0.25, 0.5, 0.75, 1.0],
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() || self.ratios.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return param("ratios must lie in (0, 1)");
        }
        if self.folds < 2 {
            return param("folds must be at least 2");
        }
        if self.configs.is_empty() {
            return param("at least one configuration is required");
        }
        for c in &self.configs {
            SlgbConfig::parse_name(c)?;
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return param("alpha must lie in [0, 1]");
        }
        self.simplicity.validate()?;
        if !(0.0..=1.0).contains(&self.epsilon) {
            return param("epsilon must lie in [0, 1]");
        }
        if self.n_trees == 0 {
            return param("n_trees must be positive");
        }
        if self.datasets.is_empty() && !self.synthetic {
            return param("no datasets: give paths or enable the synthetic suite");
        }
        Ok(())
    }

    fn slgb(&self, name: &str, seed: u64) -> Result<SlgbConfig> {
        let (wb, am) = SlgbConfig::parse_name(name)?;
        let mut c = SlgbConfig::new(wb, am);
        c.forest.n_trees = self.n_trees;
        c.rst.epsilon = self.epsilon;
        c.seed = seed;
        Ok(c)
    }

    /// Named datasets; load failures are kept and reported per cell.
    pub fn load_datasets(&self) -> Vec<(String, std::result::Result<Dataset, String>)> {
        let mut out = Vec::new();
        let opts = LoadOptions { class_column: self.class_column.clone() };
        for p in &self.datasets {
            let name = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            out.push((name, load_path(p, &opts).map_err(|e| format!("{}: {e}", p.display()))));
        }
        if self.synthetic {
            for s in benchmark_suite(self.seed) {
                out.push((s.name.clone(), generate(&s).map_err(|e| e.to_string())));
            }
        }
        out
    }
}

/// One evaluated (dataset, partition, fold, configuration) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub ratio: Option<f64>,
    pub labeled_frac: Option<f64>,
    pub unlabeled_frac: Option<f64>,
    pub fold: usize,
    pub config: String,
    pub seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub n_labeled: Option<usize>,
    pub n_unlabeled: Option<usize>,
    pub n_test: Option<usize>,
    pub kappa: Option<f64>,
    pub accuracy: Option<f64>,
    pub rules: Option<usize>,
    pub baseline_kappa: Option<f64>,
    pub baseline_accuracy: Option<f64>,
    pub baseline_rules: Option<usize>,
    pub growth: Option<f64>,
    pub simplicity: Option<f64>,
    pub utility: Option<f64>,
    /// Kappa on the unlabeled part against its hidden labels.
    pub transductive_kappa: Option<f64>,
}

impl CellResult {
    fn blank(dataset: &str, fold: usize, config: &str, seed: u64) -> Self {
        CellResult {
            dataset: dataset.to_string(),
            ratio: None,
            labeled_frac: None,
            unlabeled_frac: None,
            fold,
            config: config.to_string(),
            seed,
            status: "ok".into(),
            error: None,
            n_labeled: None,
            n_unlabeled: None,
            n_test: None,
            kappa: None,
            accuracy: None,
            rules: None,
            baseline_kappa: None,
            baseline_accuracy: None,
            baseline_rules: None,
            growth: None,
            simplicity: None,
            utility: None,
            transductive_kappa: None,
        }
    }

    fn failed(mut self, reason: String) -> Self {
        self.status = "failed".into();
        self.error = Some(reason);
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn score(truth: &[usize], predicted: &[usize], k: usize) -> Result<(f64, f64)> {
    let cm = ConfusionMatrix::from_predictions(truth, predicted, k)?;
    Ok((kappa(&cm)?, accuracy(&cm)?))
}

fn evaluate(cell: &mut CellResult, split: &SemiSupervisedSplit, slgb: &SlgbConfig, exp: &ExperimentConfig) -> Result<()> {
    let k = split.labeled.num_classes();
    let truth = split.test.labels()?;
    cell.n_labeled = Some(split.labeled.len());
    cell.n_unlabeled = Some(split.unlabeled.len());
    cell.n_test = Some(split.test.len());

    let model = fit(&split.labeled, &split.unlabeled, slgb)?;
    let predicted: Vec<usize> = split.test.instances.iter().map(|x| model.predict(&x.values)).collect();
    let (kap, acc) = score(&truth, &predicted, k)?;
    let baseline = fit_baseline(&split.labeled, slgb)?;
    let base_pred: Vec<usize> = split.test.instances.iter().map(|x| baseline.predict(&x.values)).collect();
    let (bk, ba) = score(&truth, &base_pred, k)?;
    let rules = model.surrogate.count_rules();
    let simp = simplicity(rules, &exp.simplicity);
    cell.kappa = Some(kap);
    cell.accuracy = Some(acc);
    cell.rules = Some(rules);
    cell.baseline_kappa = Some(bk);
    cell.baseline_accuracy = Some(ba);
    cell.baseline_rules = Some(baseline.count_rules());
    cell.growth = Some(relative_growth(rules, baseline.count_rules())?);
    cell.simplicity = Some(simp);
    cell.utility = Some(utility(kap, simp, exp.alpha)?);
    if !split.unlabeled.is_empty() {
        let tp: Vec<usize> = split.unlabeled.instances.iter().map(|x| model.predict(&x.values)).collect();
        cell.transductive_kappa = Some(score(&split.unlabeled_truth, &tp, k)?.0);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(xs: &[f64]) -> Option<Summary> {
        (!xs.is_empty()).then(|| Summary { mean: mean(xs), std: std_dev(xs) })
    }
}

/// Means and standard deviations over the folds of one group of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub ratio: Option<f64>,
    pub labeled_frac: Option<f64>,
    pub unlabeled_frac: Option<f64>,
    pub config: String,
    pub completed: usize,
    pub failed: usize,
    pub kappa: Option<Summary>,
    pub accuracy: Option<Summary>,
    pub rules: Option<Summary>,
    pub median_rules: Option<f64>,
    pub baseline_kappa: Option<Summary>,
    pub baseline_rules: Option<Summary>,
    pub growth: Option<Summary>,
    pub simplicity: Option<Summary>,
    pub utility: Option<Summary>,
}

/// Friedman test and control comparisons over datasets for one ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub ratio: f64,
    pub scores: ScoreMatrix,
    pub friedman: FriedmanResult,
    pub comparison: Option<ComparisonTable>,
    pub note: Option<String>,
}

/// Suite means of one grid cell and configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub config: String,
    pub labeled_frac: f64,
    pub unlabeled_frac: f64,
    pub datasets: usize,
    pub kappa: f64,
    pub rules: f64,
    pub baseline_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub aggregates: Vec<Aggregate>,
    pub stats: Vec<RatioStats>,
    pub grid: Vec<GridPoint>,
}

fn collect<F: Fn(&CellResult) -> Option<f64>>(cells: &[&CellResult], f: F) -> Vec<f64> {
    cells.iter().filter_map(|c| f(c)).collect()
}

fn aggregate(cells: &[CellResult]) -> Vec<Aggregate> {
    // Keys keep the order of first appearance.
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String), Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        let part = format!("{:?}|{:?}|{:?}", c.ratio, c.labeled_frac, c.unlabeled_frac);
        let key = (c.dataset.clone(), part, c.config.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(c);
    }
    order
        .into_iter()
        .map(|key| {
            let g = &groups[&key];
            let ok: Vec<&CellResult> = g.iter().copied().filter(|c| c.is_ok()).collect();
            let rules = collect(&ok, |c| c.rules.map(|r| r as f64));
            Aggregate {
                dataset: g[0].dataset.clone(),
                ratio: g[0].ratio,
                labeled_frac: g[0].labeled_frac,
                unlabeled_frac: g[0].unlabeled_frac,
                config: g[0].config.clone(),
                completed: ok.len(),
                failed: g.len() - ok.len(),
                kappa: Summary::of(&collect(&ok, |c| c.kappa)),
                accuracy: Summary::of(&collect(&ok, |c| c.accuracy)),
                median_rules: (!rules.is_empty()).then(|| crate::util::median(&rules)),
                rules: Summary::of(&rules),
                baseline_kappa: Summary::of(&collect(&ok, |c| c.baseline_kappa)),
                baseline_rules: Summary::of(&collect(&ok, |c| c.baseline_rules.map(|r| r as f64))),
                growth: Summary::of(&collect(&ok, |c| c.growth)),
                simplicity: Summary::of(&collect(&ok, |c| c.simplicity)),
                utility: Summary::of(&collect(&ok, |c| c.utility)),
            }
        })
        .collect()
}

/// Mean kappa per dataset and configuration at each ratio, with every
/// configuration's labeled-only baseline as an extra column.
fn ratio_stats(cfg: &ExperimentConfig, aggregates: &[Aggregate]) -> Vec<RatioStats> {
    let mut out = Vec::new();
    for &ratio in &cfg.ratios {
        let at: Vec<&Aggregate> = aggregates.iter().filter(|a| a.ratio == Some(ratio)).collect();
        let mut datasets: Vec<String> = Vec::new();
        for a in &at {
            if !datasets.contains(&a.dataset) {
                datasets.push(a.dataset.clone());
            }
        }
        let mut columns: Vec<String> = cfg.configs.clone();
        let mut baselines: Vec<String> = Vec::new();
        for c in &cfg.configs {
            if let Ok((wb, _)) = SlgbConfig::parse_name(c) {
                let b = format!("{}-only", wb.short_name());
                if !baselines.contains(&b) {
                    baselines.push(b);
                }
            }
        }
        columns.extend(baselines.iter().cloned());
        let mut rows = Vec::new();
        let mut scores = Vec::new();
        for d in &datasets {
            let mut row = Vec::new();
            for c in &cfg.configs {
                row.push(at.iter().find(|a| &a.dataset == d && &a.config == c).and_then(|a| a.kappa.as_ref()).map(|s| s.mean));
            }
            for b in &baselines {
                row.push(
                    at.iter()
                        .find(|a| {
                            &a.dataset == d
                                && SlgbConfig::parse_name(&a.config).is_ok_and(|(wb, _)| &format!("{}-only", wb.short_name()) == b)
                        })
                        .and_then(|a| a.baseline_kappa.as_ref())
                        .map(|s| s.mean),
                );
            }
            // Datasets with a failed configuration cannot be ranked.
            if row.iter().all(Option::is_some) {
                rows.push(d.clone());
                scores.push(row.into_iter().map(Option::unwrap).collect());
            }
        }
        let Ok(m) = ScoreMatrix::new(rows, columns, scores) else {
            continue;
        };
        let friedman = friedman_test(&m);
        let (comparison, note) = match compare_against_control(&m, None) {
            Ok(t) => (Some(t), None),
            Err(e) => (None, Some(e.to_string())),
        };
        out.push(RatioStats { ratio, scores: m, friedman, comparison, note });
    }
    out
}

struct Job<'a> {
    dataset: &'a str,
    data: std::result::Result<&'a Dataset, &'a str>,
    fold: usize,
    config: &'a str,
    seed: u64,
    ratio: Option<f64>,
    fracs: Option<(f64, f64)>,
    split_seed: u64,
}

fn run_job(job: &Job, cfg: &ExperimentConfig) -> CellResult {
    let mut cell = CellResult::blank(job.dataset, job.fold, job.config, job.seed);
    cell.ratio = job.ratio;
    if let Some((l, u)) = job.fracs {
        cell.labeled_frac = Some(l);
        cell.unlabeled_frac = Some(u);
    }
    let d = match job.data {
        Ok(d) => d,
        Err(e) => return cell.failed(format!("dataset unavailable: {e}")),
    };
    let result = (|| -> Result<()> {
        let split = match (job.ratio, job.fracs) {
            (Some(r), _) => make_split(d, r, job.fold, cfg.folds, job.split_seed)?,
            (None, Some((l, u))) => make_grid_split(d, l, u, job.split_seed)?,
            (None, None) => unreachable!("every job has a partition"),
        };
        let slgb = cfg.slgb(job.config, job.seed)?;
        evaluate(&mut cell, &split, &slgb, cfg)
    })();
    match result {
        Ok(()) => cell,
        Err(e) => {
            warn!("{} fold {} {}: {e}", job.dataset, job.fold, job.config);
            cell.failed(e.to_string())
        }
    }
}

fn model_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add(fold as u64)
}

/// Cross-validated evaluation of every configuration at every ratio.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let data = cfg.load_datasets();
    let mut jobs = Vec::new();
    for (name, d) in &data {
        for &ratio in &cfg.ratios {
            for fold in 0..cfg.folds {
                for c in &cfg.configs {
                    jobs.push(Job {
                        dataset: name,
                        data: d.as_ref().map_err(String::as_str),
                        fold,
                        config: c,
                        seed: model_seed(cfg.seed, fold),
                        ratio: Some(ratio),
                        fracs: None,
                        split_seed: cfg.seed,
                    });
                }
            }
        }
    }
    info!("running {} cells", jobs.len());
    let cells: Vec<CellResult> = jobs.par_iter().map(|j| run_job(j, cfg)).collect();
    let aggregates = aggregate(&cells);
    let stats = ratio_stats(cfg, &aggregates);
    Ok(ExperimentReport { config: cfg.clone(), cells, aggregates, stats, grid: Vec::new() })
}

/// Grid study over labeled and unlabeled fractions; `folds` seeded
/// repetitions per cell.
pub fn run_grid(cfg: &ExperimentConfig, fracs: &[f64]) -> Result<ExperimentReport> {
    cfg.validate()?;
    if fracs.is_empty() || fracs.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return param("grid fractions must lie in (0, 1]");
    }
    let data = cfg.load_datasets();
    let mut jobs = Vec::new();
    for (name, d) in &data {
        for &l in fracs {
            for &u in fracs {
                for rep in 0..cfg.folds {
                    for c in &cfg.configs {
                        jobs.push(Job {
                            dataset: name,
                            data: d.as_ref().map_err(String::as_str),
                            fold: rep,
                            config: c,
                            seed: model_seed(cfg.seed, rep),
                            ratio: None,
                            fracs: Some((l, u)),
                            split_seed: model_seed(cfg.seed, rep),
                        });
                    }
                }
            }
        }
    }
    info!("running {} grid cells", jobs.len());
    let cells: Vec<CellResult> = jobs.par_iter().map(|j| run_job(j, cfg)).collect();
    let aggregates = aggregate(&cells);
    let mut grid = Vec::new();
    for c in &cfg.configs {
        for &l in fracs {
            for &u in fracs {
                let at: Vec<&Aggregate> = aggregates
                    .iter()
                    .filter(|a| &a.config == c && a.labeled_frac == Some(l) && a.unlabeled_frac == Some(u))
                    .filter(|a| a.kappa.is_some())
                    .collect();
                if at.is_empty() {
                    continue;
                }
                let m = |f: &dyn Fn(&Aggregate) -> f64| mean(&at.iter().map(|a| f(a)).collect::<Vec<_>>());
                grid.push(GridPoint {
                    config: c.clone(),
                    labeled_frac: l,
                    unlabeled_frac: u,
                    datasets: at.len(),
                    kappa: m(&|a| a.kappa.as_ref().unwrap().mean),
                    rules: m(&|a| a.rules.as_ref().unwrap().mean),
                    baseline_kappa: m(&|a| a.baseline_kappa.as_ref().unwrap().mean),
                });
            }
        }
    }
    Ok(ExperimentReport { config: cfg.clone(), cells, aggregates, stats: Vec::new(), grid })
}

pub fn cells_csv(cells: &[CellResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        w.serialize(c)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn grid_csv(grid: &[GridPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for g in grid {
        w.serialize(g)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    config: &'a ExperimentConfig,
    cells: usize,
    failed_cells: usize,
    aggregates: &'a [Aggregate],
    stats: &'a [RatioStats],
    grid: &'a [GridPoint],
}

/// Writes `cells.csv`, `summary.json`, `scores_<ratio>.csv` and
/// `stats_<ratio>.csv` per ratio and,
/// for grid studies, `grid.csv`. Returns the written paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text)?;
        written.push(p);
        Ok(())
    };
    put("cells.csv".into(), cells_csv(&report.cells)?)?;
    let doc = SummaryDocument {
        config: &report.config,
        cells: report.cells.len(),
        failed_cells: report.cells.iter().filter(|c| !c.is_ok()).count(),
        aggregates: &report.aggregates,
        stats: &report.stats,
        grid: &report.grid,
    };
    put("summary.json".into(), serde_json::to_string_pretty(&doc)?)?;
    for s in &report.stats {
        let mut buf = Vec::new();
        s.scores.write_csv(&mut buf)?;
        put(format!("scores_{}.csv", s.ratio), String::from_utf8(buf).expect("csv output is UTF-8"))?;
        if let Some(t) = &s.comparison {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            put(format!("stats_{}.csv", s.ratio), String::from_utf8(buf).expect("csv output is UTF-8"))?;
        }
    }
    if !report.grid.is_empty() {
        put("grid.csv".into(), grid_csv(&report.grid)?)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            synthetic: true,
            ratios: vec![0.2],
            folds: 2,
            configs: vec!["rf-part-rst".into()],
            n_trees: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn toml_mirrors_fields() {
        let c = ExperimentConfig::from_toml(
            "synthetic = true\nratios = [0.1]\nfolds = 3\nconfigs = [\"rf-rip-none\"]\nalpha = 0.5\n[simplicity]\neta = 20.0\n",
        )
        .unwrap();
        assert_eq!(c.folds, 3);
        assert_eq!(c.simplicity.eta, 20.0);
        assert_eq!(c.simplicity.lambda, 0.1);
        assert!(ExperimentConfig::from_toml("fold = 3").is_err());
    }

    #[test]
    fn validation() {
        assert!(tiny().validate().is_ok());
        assert!(ExperimentConfig { folds: 1, ..tiny() }.validate().is_err());
        assert!(ExperimentConfig { ratios: vec![1.0], ..tiny() }.validate().is_err());
        assert!(ExperimentConfig { configs: vec!["rf-x-rst".into()], ..tiny() }.validate().is_err());
    }

    #[test]
    fn missing_dataset_marks_cells_failed() {
        let cfg = ExperimentConfig { synthetic: false, datasets: vec!["/nonexistent/d.csv".into()], ..tiny() };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.cells.len(), 2);
        assert!(r.cells.iter().all(|c| !c.is_ok() && c.error.as_deref().unwrap().contains("unavailable")));
    }
}
