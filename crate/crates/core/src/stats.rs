//! Nonparametric tests for comparing configurations over datasets: Friedman,
//! Wilcoxon signed-rank and Holm's step-down correction.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{param, Error, Result};

/// Significance level of every decision.
pub const ALPHA: f64 = 0.05;
/// Largest number of nonzero differences for which Wilcoxon p is exact.
pub const EXACT_WILCOXON_MAX: usize = 20;

/// Rows are datasets, columns are configurations; larger scores are better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<String>, columns: Vec<String>, scores: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 || columns.len() < 2 {
            return param("a score matrix needs at least 2 rows and 2 columns");
        }
        if scores.len() != rows.len() || scores.iter().any(|r| r.len() != columns.len()) {
            return param("score matrix shape does not match its labels");
        }
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return param("score matrix entries must be finite");
        }
        Ok(ScoreMatrix { rows, columns, scores })
    }

    /// First column names the row; the header names the configurations.
    pub fn from_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let header = reader.headers()?.clone();
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut scores = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let mut it = record.iter();
            rows.push(it.next().unwrap_or_default().to_string());
            let values = it
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Row { line: line + 2, message: format!("'{v}' is not a number") })
                })
                .collect::<Result<Vec<f64>>>()?;
            scores.push(values);
        }
        ScoreMatrix::new(rows, columns, scores)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.scores.iter().map(|r| r[j]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["dataset".to_string()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header)?;
        for (name, row) in self.rows.iter().zip(&self.scores) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Ranks in ascending order starting at 1, ties sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

fn tie_term(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sum = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        sum += t * t * t - t;
        i = j + 1;
    }
    sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Mean rank of each column, 1 being the best score in a row.
    pub average_ranks: Vec<f64>,
}

/// Friedman rank test with tie correction and a chi-square tail on k - 1
/// degrees of freedom.
pub fn friedman_test(m: &ScoreMatrix) -> FriedmanResult {
    let n = m.rows.len() as f64;
    let k = m.columns.len();
    let kf = k as f64;
    let mut rank_sums = vec![0.0; k];
    let mut ties = 0.0;
    for row in &m.scores {
        let negated: Vec<f64> = row.iter().map(|v| -v).collect();
        for (s, r) in rank_sums.iter_mut().zip(midranks(&negated)) {
            *s += r;
        }
        ties += tie_term(row);
    }
    let average_ranks = rank_sums.iter().map(|s| s / n).collect();
    let numerator = 12.0 * rank_sums.iter().map(|r| r * r).sum::<f64>() - 3.0 * n * n * kf * (kf + 1.0).powi(2);
    let denominator = n * kf * (kf + 1.0) - ties / (kf - 1.0);
    if denominator <= 1e-12 {
        return FriedmanResult { statistic: 0.0, p_value: 1.0, average_ranks };
    }
    let statistic = (numerator / denominator).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).expect("k >= 2");
    FriedmanResult { statistic, p_value: chi.sf(statistic), average_ranks }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Rank sum of positive differences `a - b`.
    pub r_plus: f64,
    pub r_minus: f64,
    pub p_value: f64,
    /// Number of nonzero differences.
    pub n: usize,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; exact for up to [`EXACT_WILCOXON_MAX`] nonzero differences,
/// otherwise normal with tie and continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, EXACT_WILCOXON_MAX)
}

/// As [`wilcoxon_signed_rank`], exact for up to `exact_max` nonzero
/// differences.
pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], exact_max: usize) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return param(format!("paired samples of lengths {} and {}", a.len(), b.len()));
    }
    if a.len() < 5 {
        return param("the signed-rank test needs at least 5 pairs");
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&d| d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult { r_plus: 0.0, r_minus: 0.0, p_value: 1.0, n, exact: true });
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = midranks(&abs);
    // `+ 0.0` maps the empty sum -0.0 to 0.0.
    let r_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum::<f64>() + 0.0;
    let r_minus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x < 0.0).map(|(_, r)| r).sum::<f64>() + 0.0;
    if n <= exact_max {
        return Ok(WilcoxonResult { r_plus, r_minus, p_value: exact_p(&ranks, r_plus), n, exact: true });
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&abs) / 48.0;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((r_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        (2.0 * Normal::standard().sf(z)).min(1.0)
    };
    Ok(WilcoxonResult { r_plus, r_minus, p_value, n, exact: false })
}

/// Exact null distribution of the positive rank sum over all sign patterns,
/// counted on doubled ranks so midranks stay integral.
fn exact_p(ranks: &[f64], r_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let observed = (2.0 * r_plus).round() as usize;
    let lower: f64 = counts[..=observed].iter().sum::<f64>() / total;
    let upper: f64 = counts[observed..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    /// Adjusted p-values in input order.
    pub adjusted: Vec<f64>,
    pub rejected: Vec<bool>,
}

pub fn holm_correction(p_values: &[f64]) -> Result<HolmResult> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return param("p-values must lie in [0, 1]");
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (j, &i) in order.iter().enumerate() {
        running = running.max(((m - j) as f64 * p_values[i]).min(1.0));
        adjusted[i] = running;
    }
    let rejected = adjusted.iter().map(|&p| p <= ALPHA).collect();
    Ok(HolmResult { adjusted, rejected })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub pair: String,
    pub r_minus: f64,
    pub r_plus: f64,
    pub p_value: f64,
    pub holm_p: f64,
    pub decision: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub control: String,
    pub friedman: FriedmanResult,
    pub rows: Vec<ComparisonRow>,
}

/// Friedman test plus Wilcoxon comparisons of the control column (the best
/// average rank unless given) against every other, Holm-corrected. `R+`
/// counts ranks where the control scores higher.
pub fn compare_against_control(m: &ScoreMatrix, control: Option<&str>) -> Result<ComparisonTable> {
    let friedman = friedman_test(m);
    let c = match control {
        Some(name) => m
            .columns
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| Error::Parameter(format!("unknown control column '{name}'")))?,
        None => {
            let r = &friedman.average_ranks;
            (0..r.len()).fold(0, |best, j| if r[j] < r[best] { j } else { best })
        }
    };
    let control_scores = m.column(c);
    let others: Vec<usize> = (0..m.columns.len()).filter(|&j| j != c).collect();
    let tests = others
        .iter()
        .map(|&j| wilcoxon_signed_rank(&control_scores, &m.column(j)))
        .collect::<Result<Vec<_>>>()?;
    let holm = holm_correction(&tests.iter().map(|t| t.p_value).collect::<Vec<_>>())?;
    let rows = others
        .iter()
        .zip(&tests)
        .enumerate()
        .map(|(k, (&j, t))| ComparisonRow {
            pair: format!("{} vs {}", m.columns[c], m.columns[j]),
            r_minus: t.r_minus,
            r_plus: t.r_plus,
            p_value: t.p_value,
            holm_p: holm.adjusted[k],
            decision: if holm.rejected[k] { "reject".into() } else { "fail to reject".into() },
        })
        .collect();
    Ok(ComparisonTable { control: m.columns[c].clone(), friedman, rows })
}

impl ComparisonTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["pair", "p_value", "r_minus", "r_plus", "holm_p", "decision"])?;
        for r in &self.rows {
            out.write_record([
                r.pair.clone(),
                format!("{:.6e}", r.p_value),
                format!("{}", r.r_minus),
                format!("{}", r.r_plus),
                format!("{:.6e}", r.holm_p),
                r.decision.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Published mean kappa of five semi-supervised methods at 10% to 40% labeled
/// data, usable as report-formatting fixture data.
pub fn literature_kappa_means() -> ScoreMatrix {
    let columns = ["SlGb", "TriTraining(C45)", "CoBagging(C45)", "DemocraticCoLearning", "CoTraining(SMO)"];
    let scores = vec![
        vec![0.56, 0.51, 0.51, 0.49, 0.48],
        vec![0.61, 0.55, 0.55, 0.54, 0.55],
        vec![0.62, 0.57, 0.57, 0.58, 0.58],
        vec![0.62, 0.59, 0.56, 0.59, 0.60],
    ];
    ScoreMatrix::new(
        ["10%", "20%", "30%", "40%"].iter().map(|s| s.to_string()).collect(),
        columns.iter().map(|s| s.to_string()).collect(),
        scores,
    )
    .expect("fixture is well formed")
}
