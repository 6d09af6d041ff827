use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slgb::dataset::{encode_csv_rows, load_path, LoadOptions};
use slgb::experiment::{run_experiment, run_grid, write_report, ExperimentConfig, ExperimentReport};
use slgb::pipeline::{fit, ModelBundle, SlgbConfig};
use slgb::stats::{compare_against_control, ScoreMatrix};
use slgb::synth::{benchmark_suite, generate};
use slgb::{Error, Result};

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! say {
    ($($t:tt)*) => {
        writeln!(io::stdout().lock(), $($t)*)?
    };
}

#[derive(Parser)]
#[command(name = "slgb", version, about = "Self-labeling grey-box classifiers and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated ratio sweep over datasets and configurations.
    Run(ExperimentArgs),
    /// Grid study over labeled and unlabeled fractions.
    Grid {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Fractions used on both axes.
        #[arg(long, value_delimiter = ',')]
        fracs: Option<Vec<f64>>,
    },
    /// Friedman, Wilcoxon and Holm tests on a score CSV.
    Stats {
        /// Score CSV: one row per dataset, one column per configuration.
        scores: PathBuf,
        /// Control column; the best average rank when omitted.
        #[arg(long)]
        control: Option<String>,
        /// Output directory for stats.csv and stats.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains a model; rows whose label is `?` are the unlabeled part.
    Fit {
        /// Training data.
        data: PathBuf,
        /// Extra unlabeled rows; their label column is ignored.
        #[arg(long)]
        unlabeled: Option<PathBuf>,
        /// Configuration name.
        #[arg(long, default_value = "rf-part-rst")]
        config: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Similarity threshold for RST amending.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Trees in the random forest.
        #[arg(long)]
        trees: Option<usize>,
        /// Class column name; the last column when omitted.
        #[arg(long)]
        class_column: Option<String>,
        /// Output model bundle.
        #[arg(long)]
        model: PathBuf,
    },
    /// Classifies the rows of a CSV and prints the rule behind each prediction.
    Explain {
        /// Model bundle written by `fit`.
        #[arg(long)]
        model: PathBuf,
        /// Rows to classify.
        data: PathBuf,
        /// Print every rule of the model first.
        #[arg(long)]
        rules: bool,
    },
    /// Writes the synthetic benchmark suite as CSV files.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset files (CSV, ARFF or KEEL).
    #[arg(long = "data")]
    datasets: Vec<PathBuf>,
    /// Include the seeded synthetic suite.
    #[arg(long)]
    synthetic: bool,
    /// Labeled ratios, comma separated.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Cross-validation folds (repetitions for `grid`).
    #[arg(long)]
    folds: Option<usize>,
    /// Configuration names such as rf-part-rst.
    #[arg(long, value_delimiter = ',')]
    configs: Option<Vec<String>>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Kappa weight in utility.
    #[arg(long)]
    alpha: Option<f64>,
    /// Simplicity decay rate.
    #[arg(long = "simplicity-lambda")]
    simplicity_lambda: Option<f64>,
    /// Rule count at which simplicity starts to fall.
    #[arg(long = "simplicity-eta")]
    simplicity_eta: Option<f64>,
    /// Simplicity shape exponent.
    #[arg(long = "simplicity-nu")]
    simplicity_nu: Option<f64>,
    /// Similarity threshold for RST amending.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Trees in the random forest.
    #[arg(long)]
    trees: Option<usize>,
    /// Class column name; the last column when omitted.
    #[arg(long)]
    class_column: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_toml(&fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        if !self.datasets.is_empty() {
            c.datasets = self.datasets;
        }
        c.synthetic |= self.synthetic;
        if let Some(v) = self.ratios {
            c.ratios = v;
        }
        if let Some(v) = self.folds {
            c.folds = v;
        }
        if let Some(v) = self.configs {
            c.configs = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.simplicity_lambda {
            c.simplicity.lambda = v;
        }
        if let Some(v) = self.simplicity_eta {
            c.simplicity.eta = v;
        }
        if let Some(v) = self.simplicity_nu {
            c.simplicity.nu = v;
        }
        if let Some(v) = self.epsilon {
            c.epsilon = v;
        }
        if let Some(v) = self.trees {
            c.n_trees = v;
        }
        if self.class_column.is_some() {
            c.class_column = self.class_column;
        }
        if self.out.is_some() {
            c.out = self.out;
        }
        Ok(c)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3}"))
}

fn print_run(report: &ExperimentReport) -> Result<()> {
    say!("{:<16} {:>6} {:<14} {:>8} {:>8} {:>7} {:>7} {:>8}", "dataset", "ratio", "config", "kappa", "base_k", "rules", "base_r", "utility");
    for a in &report.aggregates {
        say!(
            "{:<16} {:>6} {:<14} {:>8} {:>8} {:>7} {:>7} {:>8}",
            a.dataset,
            a.ratio.map_or("-".into(), |r| format!("{r}")),
            a.config,
            fmt_opt(a.kappa.as_ref().map(|s| s.mean)),
            fmt_opt(a.baseline_kappa.as_ref().map(|s| s.mean)),
            a.rules.as_ref().map_or("-".into(), |s| format!("{:.1}", s.mean)),
            a.baseline_rules.as_ref().map_or("-".into(), |s| format!("{:.1}", s.mean)),
            fmt_opt(a.utility.as_ref().map(|s| s.mean)),
        );
    }
    for s in &report.stats {
        say!("ratio {}: Friedman statistic {:.4}, p = {:.4e}", s.ratio, s.friedman.statistic, s.friedman.p_value);
    }
    let failed = report.cells.iter().filter(|c| !c.is_ok()).count();
    if failed > 0 {
        say!("{failed} of {} cells failed; see cells.csv", report.cells.len());
    }
    Ok(())
}

fn print_grid(report: &ExperimentReport) -> Result<()> {
    say!("{:<14} {:>8} {:>8} {:>8} {:>8}", "config", "labeled", "unlab", "kappa", "rules");
    for g in &report.grid {
        say!("{:<14} {:>8} {:>8} {:>8.3} {:>8.1}", g.config, g.labeled_frac, g.unlabeled_frac, g.kappa, g.rules);
    }
    Ok(())
}

fn finish(report: &ExperimentReport, default_dir: &str) -> Result<()> {
    let dir = report.config.out.clone().unwrap_or_else(|| PathBuf::from(default_dir));
    for p in write_report(report, &dir)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = run_experiment(&cfg)?;
            finish(&report, "slgb-run")?;
            print_run(&report)
        }
        Command::Grid { exp, fracs } => {
            let cfg = exp.resolve()?;
            let fracs = fracs.unwrap_or_else(|| cfg.grid_fracs.clone());
            let report = run_grid(&cfg, &fracs)?;
            finish(&report, "slgb-grid")?;
            print_grid(&report)
        }
        Command::Stats { scores, control, out } => {
            let m = ScoreMatrix::from_csv(File::open(&scores)?)?;
            let table = compare_against_control(&m, control.as_deref())?;
            say!(
                "Friedman statistic {:.4}, p = {:.4e}; control {}",
                table.friedman.statistic, table.friedman.p_value, table.control
            );
            for (c, r) in m.columns.iter().zip(&table.friedman.average_ranks) {
                say!("  {c:<24} average rank {r:.3}");
            }
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            io::stdout().lock().write_all(&buf)?;
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("stats.csv"), &buf)?;
                fs::write(dir.join("stats.json"), table.to_json()?)?;
            }
            Ok(())
        }
        Command::Fit { data, unlabeled, config, seed, epsilon, trees, class_column, model } => {
            let opts = LoadOptions { class_column };
            let all = load_path(&data, &opts)?;
            let (labeled, mut unl) = all.partition_by_label();
            if let Some(p) = unlabeled {
                let extra = load_path(&p, &opts)?.without_labels();
                unl = unl.concat(&extra)?;
            }
            let (wb, am) = SlgbConfig::parse_name(&config)?;
            let mut cfg = SlgbConfig::new(wb, am);
            cfg.seed = seed;
            if let Some(e) = epsilon {
                cfg.rst.epsilon = e;
            }
            if let Some(t) = trees {
                cfg.forest.n_trees = t;
            }
            let m = fit(&labeled, &unl, &cfg)?;
            for w in &m.report.warnings {
                eprintln!("warning: {w}");
            }
            write!(io::stdout().lock(), "{}", m.surrogate.render())?;
            fs::write(&model, m.to_json()?)?;
            eprintln!("wrote {}", model.display());
            Ok(())
        }
        Command::Explain { model, data, rules } => {
            let bundle = ModelBundle::from_json(&fs::read_to_string(&model)?)?;
            if rules {
                write!(io::stdout().lock(), "{}", bundle.surrogate.render())?;
            }
            let rows = encode_csv_rows(&bundle.surrogate.schema, File::open(&data)?)?;
            for (i, row) in rows.iter().enumerate() {
                let e = bundle.explain(row);
                let which = e.rule_index.map_or("default".into(), |r| format!("rule {}", r + 1));
                say!("{}\t{}\t{}\t{}", i + 1, bundle.surrogate.classes[e.rule.consequent], which, e.text);
            }
            Ok(())
        }
        Command::Synth { seed, out } => {
            fs::create_dir_all(&out)?;
            for s in benchmark_suite(seed) {
                let d = generate(&s)?;
                let p = Path::new(&out).join(format!("{}.csv", s.name));
                d.write_csv(File::create(&p)?)?;
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parameter(_) | Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
