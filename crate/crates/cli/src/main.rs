use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pucausal::dataset::{engineer_pu, load_csv, validate_pu_assumptions, Dataset, FeatureSet, PuDataset, RoleMap};
use pucausal::effects::{write_estimates_csv, write_estimates_json, EstimateRow, Method};
use pucausal::evalmetrics::{evaluate, write_eval_csv};
use pucausal::pipeline::{
    analysis_sample, estimate_real_controls, propensity_scores, run_pipeline, select_controls, RunConfig, Source,
};
use pucausal::propensity::{overlap_histogram, trim, write_histogram_csv, TrimConfig};
use pucausal::pulearn::{export_coefficients, PuMethod, PuSplit};
use pucausal::synthgen::{generate, SimConfig, SimKind};
use pucausal::{Error, Result, StageContext};

#[derive(Parser)]
#[command(name = "pucausal", version, about = "Reliable control groups from positive-unlabeled data, with trimmed ATE estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from the linear or nonlinear simulation design.
    Simulate(SimulateArgs),
    /// Hide a share of treated units to build a positive-unlabeled dataset.
    Engineer(EngineerArgs),
    /// Select reliable controls with SPY or SPY+iSVM.
    PuRun(PuRunArgs),
    /// Fit propensity scores on the adjustment set, trim, and bin.
    Propensity(PropensityArgs),
    /// Estimate effects with confirmed treatment labels (real controls).
    Estimate(EstimateArgs),
    /// Score a reliable-control selection against the hidden truth.
    Evaluate(EvaluateArgs),
    /// Run the whole workflow from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; command-line flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random stage.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).stage("config", "check the TOML file")?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV.
    #[arg(long, short)]
    input: PathBuf,
    /// Role map (TOML or JSON); defaults to the `.meta.json` sidecar.
    #[arg(long)]
    roles: Option<PathBuf>,
}

impl DataArgs {
    fn dataset(&self) -> Result<Dataset> {
        match &self.roles {
            Some(r) => load_csv(&self.input, &RoleMap::load(r)?),
            None => Dataset::open(&self.input),
        }
    }

    fn pu(&self) -> Result<PuDataset> {
        match &self.roles {
            Some(_) => PuDataset::from_dataset(&self.dataset()?),
            None => PuDataset::open(&self.input),
        }
    }
}

#[derive(Args)]
struct TrimArgs {
    #[arg(long)]
    trim_lo: Option<f64>,
    #[arg(long)]
    trim_hi: Option<f64>,
}

impl TrimArgs {
    fn apply(&self, base: Option<TrimConfig>) -> Result<Option<TrimConfig>> {
        match (self.trim_lo, self.trim_hi, base) {
            (None, None, b) => Ok(b),
            (lo, hi, b) => {
                let b = b.unwrap_or(TrimConfig { lo: 0.0, hi: 1.0 });
                TrimConfig::new(lo.unwrap_or(b.lo), hi.unwrap_or(b.hi)).map(Some)
            }
        }
    }
}

#[derive(Args)]
struct PuArgs {
    #[arg(long)]
    method: Option<PuMethod>,
    /// `x` (all features) or `z` (adjustment set).
    #[arg(long)]
    feature_set: Option<FeatureSet>,
    #[arg(long)]
    spy_fraction: Option<f64>,
    #[arg(long)]
    threshold_quantile: Option<f64>,
}

impl PuArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = self.method {
            cfg.pu.method = m;
        }
        if let Some(f) = self.feature_set {
            cfg.pu.feature_set = f;
        }
        if let Some(s) = self.spy_fraction {
            cfg.pu.spy_fraction = s;
        }
        if let Some(q) = self.threshold_quantile {
            cfg.pu.threshold_quantile = q;
        }
    }
}

#[derive(Args)]
struct EstimatorArgs {
    /// Comma-separated subset of ols, ipw, matching, t_learner.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    tlearner_replicates: Option<usize>,
}

impl EstimatorArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(m) = &self.methods {
            cfg.estimators.methods = m.clone();
        }
        if let Some(b) = self.replicates {
            cfg.estimators.bootstrap.replicates = b;
        }
        if let Some(t) = self.trees {
            cfg.estimators.forest.n_trees = t;
        }
        if let Some(b) = self.tlearner_replicates {
            cfg.estimators.tlearner_replicates = b;
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "linear")]
    kind: SimKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also adjust for the confounder `u3` in effect estimation.
    #[arg(long)]
    adjust_u3: bool,
    /// Output CSV; a `.meta.json` sidecar is written next to it.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EngineerArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    hide_fraction: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PuRunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    pu: PuArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PropensityArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
    /// Split CSV written by `pu-run`.
    #[arg(long)]
    split: PathBuf,
    #[command(flatten)]
    trim: TrimArgs,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    trim: TrimArgs,
    #[command(flatten)]
    estimators: EstimatorArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    method: Option<PuMethod>,
    #[arg(long)]
    feature_set: Option<FeatureSet>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: Common,
    /// Simulate this design instead of the configured source.
    #[arg(long, conflicts_with = "input")]
    kind: Option<SimKind>,
    #[arg(long)]
    n: Option<usize>,
    /// Use this CSV (with `--roles` or a sidecar) as the source.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    roles: Option<PathBuf>,
    #[arg(long)]
    hide_fraction: Option<f64>,
    #[command(flatten)]
    pu: PuArgs,
    #[command(flatten)]
    trim: TrimArgs,
    #[command(flatten)]
    estimators: EstimatorArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let d = generate(&SimConfig {
        kind: a.kind,
        n: a.n,
        seed: a.seed,
        adjust_u3: a.adjust_u3,
    })
    .stage("simulate", "n must be at least 2")?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    d.save(&a.out).stage("write", "check that the output path is writable")?;
    let t = d.treatment().unwrap_or_default();
    let treated = t.iter().filter(|&&v| v == 1).count();
    println!("wrote {} units ({treated} treated) to {}", d.n_units(), a.out.display());
    Ok(())
}

fn engineer(a: &EngineerArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(h) = a.hide_fraction {
        cfg.hide_fraction = h;
    }
    let d = a.data.dataset().stage("load", "check the input CSV and its roles")?;
    let pu = engineer_pu(&d, cfg.hide_fraction, cfg.seed("engineer"))
        .stage("engineer", "hide_fraction must lie in (0, 1) and the data needs two treated units")?;
    pu.save(&a.out).stage("write", "check that the output path is writable")?;
    let report = validate_pu_assumptions(&pu);
    println!(
        "{} labeled positives, {} unlabeled; assumptions hold: {}",
        pu.positives().len(),
        pu.unlabeled().len(),
        report.holds()
    );
    Ok(())
}

fn pu_run(a: &PuRunArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    a.pu.apply(&mut cfg);
    let pu = a.data.pu().stage("load", "the input needs a label_indicator column")?;
    let split = select_controls(&cfg, &pu).stage("pu", "try --feature-set x or another --spy-fraction")?;
    fs::create_dir_all(&a.out_dir)?;
    split.write_csv(writer(&a.out_dir.join("pu_split.csv"))?)?;
    if let Some(m) = &split.svm {
        export_coefficients(m, &split.feature_names).write_csv(writer(&a.out_dir.join("coefficients.csv"))?)?;
    }
    println!(
        "{}: {} positives, {} reliable controls, {} left unlabeled",
        cfg.pu.method.as_str(),
        split.positives().len(),
        split.reliable_controls().len(),
        split.remaining_unlabeled().len()
    );
    for w in &split.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn read_split(path: &Path, pu: &PuDataset) -> Result<PuSplit> {
    PuSplit::read_csv(File::open(path)?, pu.base.ids())
}

fn propensity(a: &PropensityArgs) -> Result<()> {
    let cfg = a.common.load()?;
    let pu = a.data.pu().stage("load", "the input needs a label_indicator column")?;
    let split = read_split(&a.split, &pu).stage("load", "pass the split CSV written by pu-run for this dataset")?;
    let (rows, t) = analysis_sample(&split);
    let (_, scored) = propensity_scores(&pu.base, &rows, &t, &cfg.propensity)
        .stage("propensity", "the adjustment columns must be non-constant and both groups present")?;
    let bounds = a.trim.apply(cfg.trim)?.unwrap_or(TrimConfig::REAL_DATA);
    let trimmed = trim(&scored, &bounds).stage("trim", "widen --trim-lo/--trim-hi")?;
    let hist = overlap_histogram(&trimmed, a.bins.unwrap_or(cfg.histogram_bins))?;
    fs::create_dir_all(&a.out_dir)?;
    trimmed.write_csv(writer(&a.out_dir.join("propensity.csv"))?)?;
    write_histogram_csv(&hist, writer(&a.out_dir.join("propensity_histogram.csv"))?)?;
    let (rt, rc) = trimmed.retained_counts();
    println!("retained {rt} treated and {rc} controls in [{}, {}]", bounds.lo, bounds.hi);
    for w in &trimmed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn print_estimates(rows: &[EstimateRow]) {
    println!("{:<10} {:>9} {:>9} {:>9} {:>9} {:>7}", "method", "ate", "ci_lo", "ci_hi", "p", "n");
    for r in rows {
        let p = r.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.3}"));
        println!(
            "{:<10} {:>9.3} {:>9.3} {:>9.3} {:>9} {:>7}",
            r.method,
            r.ate,
            r.ci_lo,
            r.ci_hi,
            p,
            format!("{}/{}", r.n_treated, r.n_control)
        );
    }
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    cfg.baseline_trim = a.trim.apply(cfg.baseline_trim)?;
    a.estimators.apply(&mut cfg);
    cfg.validate().stage("config", "fix the flag or config value named above")?;
    let d = a.data.dataset().stage("load", "check the input CSV and its roles")?;
    let out = estimate_real_controls(&d, &cfg)?;
    let name = a.data.input.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    let rows: Vec<EstimateRow> = out.estimates.iter().map(|e| EstimateRow::new(&name, "real controls", "Z", e)).collect();
    fs::create_dir_all(&a.out_dir)?;
    write_estimates_csv(&rows, writer(&a.out_dir.join("estimates.csv"))?)?;
    write_estimates_json(&rows, writer(&a.out_dir.join("estimates.json"))?)?;
    print_estimates(&rows);
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let pu = a.data.pu().stage("load", "the input needs a label_indicator column")?;
    let split = read_split(&a.split, &pu).stage("load", "pass the split CSV written by pu-run for this dataset")?;
    let name = a.data.input.file_stem().map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    let method = a.method.map_or("-", PuMethod::as_str);
    let set = a.feature_set.map_or("-", FeatureSet::as_str);
    let report = evaluate(&pu, &split, &name, method, set).stage("evaluate", "the input needs its treatment column")?;
    write_eval_csv(std::slice::from_ref(&report), writer(&a.out)?)?;
    println!(
        "recall {}  precision {}  contamination {}  leakage {}",
        report.recall(),
        report.precision(),
        report.contamination(),
        report.leakage()
    );
    Ok(())
}

fn pipeline(a: &PipelineArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(kind) = a.kind {
        cfg.source = match cfg.source {
            Source::Simulate { n, seed, adjust_u3, .. } => Source::Simulate { kind, n, seed, adjust_u3 },
            Source::Csv { .. } => Source::Simulate {
                kind,
                n: 1000,
                seed: None,
                adjust_u3: false,
            },
        };
    }
    if let Some(input) = &a.input {
        cfg.source = Source::Csv {
            path: input.clone(),
            roles: a.roles.clone(),
            name: None,
        };
    }
    if let (Some(new_n), Source::Simulate { n, .. }) = (a.n, &mut cfg.source) {
        *n = new_n;
    }
    if let Some(h) = a.hide_fraction {
        cfg.hide_fraction = h;
    }
    a.pu.apply(&mut cfg);
    cfg.trim = a.trim.apply(cfg.trim)?;
    a.estimators.apply(&mut cfg);
    if let Some(dir) = &a.out_dir {
        cfg.output_dir = dir.clone();
    }
    let out = run_pipeline(&cfg)?;
    out.write(&cfg.output_dir)?;
    let m = &out.manifest;
    println!(
        "{} / {} / {}: {} positives, {} reliable controls; retained {} treated, {} controls",
        m.dataset,
        cfg.pu.method.as_str(),
        cfg.pu.feature_set.as_str(),
        m.n_positives,
        m.n_reliable_controls,
        m.retained_treated,
        m.retained_control
    );
    if let Some(e) = &out.evaluation {
        println!(
            "recall {}  precision {}  contamination {}  leakage {}",
            e.recall(),
            e.precision(),
            e.contamination(),
            e.leakage()
        );
    }
    print_estimates(&out.estimate_rows());
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    println!("reports written to {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Engineer(a) => engineer(a),
        Command::PuRun(a) => pu_run(a),
        Command::Propensity(a) => propensity(a),
        Command::Estimate(a) => estimate(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Pipeline(a) => pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Stage { .. }) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
