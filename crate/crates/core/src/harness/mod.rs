//! Sample-size sweeps: subsample → train → sample → evaluate, for every
//! (size, variant, seed), with repeated synthetic draws per trained model and
//! a real-data reference per size.
//!
//! Each cell lives in its own directory and is skipped when its reports are
//! already on disk, so an interrupted sweep resumes where it stopped.

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{
    appendix_table, cross_dataset_mean, load_reports, metric_correlation, relative_error, report, summarize,
    CorrelationMatrix, ReportFormat, SummaryKey, SummaryRow,
};

use crate::data::{self, SubsetSize, Table, ToySpec};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalConfig, MetricReport};
use crate::synth::{self, TrainConfig, Variant};

/// Where the real rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// A CSV with a schema manifest; split into train/test unless a separate
    /// test file is given.
    Csv {
        data: PathBuf,
        schema: PathBuf,
        #[serde(default)]
        test: Option<PathBuf>,
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
    /// Generated mixture data.
    Toy {
        #[serde(default = "ToySpec::standard")]
        spec: ToySpec,
        train_rows: usize,
        test_rows: usize,
        #[serde(default)]
        seed: u64,
    },
}

fn default_test_fraction() -> f64 {
    0.3
}

impl DatasetSpec {
    /// Resolves relative CSV paths against `base`.
    fn rebased(&self, base: &Path) -> DatasetSpec {
        let fix = |p: &PathBuf| if p.is_relative() { base.join(p) } else { p.clone() };
        match self {
            DatasetSpec::Csv { data, schema, test, test_fraction, split_seed } => DatasetSpec::Csv {
                data: fix(data),
                schema: fix(schema),
                test: test.as_ref().map(fix),
                test_fraction: *test_fraction,
                split_seed: *split_seed,
            },
            toy => toy.clone(),
        }
    }

    pub fn load(&self) -> Result<(Table, Table)> {
        match self {
            DatasetSpec::Csv { data, schema, test: Some(test), .. } => {
                let schema = data::load_schema(schema)?;
                Ok((data::read_csv(data, &schema)?, data::read_csv(test, &schema)?))
            }
            DatasetSpec::Csv { data, schema, test: None, test_fraction, split_seed } => {
                let table = data::load_csv(data, schema)?;
                data::split(&table, *test_fraction, *split_seed)
            }
            DatasetSpec::Toy { spec, train_rows, test_rows, seed } => {
                let all = spec.generate(train_rows + test_rows, *seed)?;
                let train: Vec<usize> = (0..*train_rows).collect();
                let test: Vec<usize> = (*train_rows..train_rows + test_rows).collect();
                Ok((all.select_rows(&train), all.select_rows(&test)))
            }
        }
    }
}

pub fn default_sizes() -> Vec<SubsetSize> {
    let mut sizes: Vec<SubsetSize> = (0..10).map(|i| SubsetSize::Rows(40 << i)).collect();
    sizes.push(SubsetSize::Full);
    sizes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dataset label used in reports.
    pub name: String,
    pub dataset: DatasetSpec,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<SubsetSize>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Synthetic sets drawn from each trained model.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Rows per synthetic set.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Seeds the subsample drawn at each size; shared by all variants/seeds.
    #[serde(default)]
    pub subset_seed: u64,
    /// Model settings; `variant`, `epochs` and `seed` are set per cell.
    #[serde(default)]
    pub model: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Also write every synthetic set as CSV.
    #[serde(default)]
    pub keep_samples: bool,
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Ctgan, Variant::MargCtgan]
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_trials() -> usize {
    5
}
fn default_samples() -> usize {
    20000
}
fn default_epochs() -> usize {
    300
}
fn default_workers() -> usize {
    1
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.variants.is_empty() || self.seeds.is_empty() {
            return Err(Error::invalid("sweep needs at least one size, variant and seed"));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sizes must be strictly ascending with `full` last"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("training seeds must be distinct"));
        }
        let mut variants = self.variants.clone();
        variants.sort();
        if variants.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("variants must be distinct"));
        }
        if self.trials == 0 || self.samples == 0 || self.epochs == 0 || self.workers == 0 {
            return Err(Error::invalid("trials, samples, epochs and workers must be positive"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\', ',']) {
            return Err(Error::invalid("dataset name must be non-empty without separators or commas"));
        }
        Ok(())
    }

    /// Reads a spec; relative paths inside it resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: SweepSpec = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.dataset = spec.dataset.rebased(base);
        if spec.output.is_relative() {
            spec.output = base.join(&spec.output);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn cell_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig { variant, epochs: self.epochs, seed, ..self.model.clone() }
    }
}

/// SplitMix64 finalizer over a sequence of words.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

fn size_word(size: SubsetSize) -> u64 {
    match size {
        SubsetSize::Rows(n) => n as u64,
        SubsetSize::Full => u64::MAX,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub size: SubsetSize,
    /// Variant name, or `real` for the reference.
    pub variant: String,
    pub seed: Option<u64>,
    pub trial: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub key: CellKey,
    pub report: MetricReport,
    /// Seconds spent training (shared by the trials of one model) plus
    /// sampling and evaluating this trial.
    pub wall_clock_secs: f64,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub cells: Vec<CellResult>,
    /// Models trained in this invocation (0 on a fully resumed sweep).
    pub trained: usize,
    pub reused: usize,
    pub failures: Vec<(CellKey, String)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Timing {
    train_secs: f64,
    trial_secs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Failure {
    error: String,
}

pub const REFERENCE_VARIANT: &str = "real";

fn size_dir(out: &Path, size: SubsetSize) -> PathBuf {
    out.join("cells").join(format!("size_{}", size.label()))
}

pub fn model_dir(out: &Path, size: SubsetSize, variant: Variant, seed: u64) -> PathBuf {
    size_dir(out, size).join(variant.name()).join(format!("seed_{seed}"))
}

fn trial_report_path(dir: &Path, trial: usize) -> PathBuf {
    dir.join(format!("trial_{trial}.report.json"))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    // write-then-rename so a crash never leaves a half-written report behind
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_report(path: &Path) -> Result<MetricReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MetricReport::from_json(&text)
}

/// Every metric with the training rows standing in for synthetic data.
pub fn real_reference(train: &Table, test: &Table, config: &EvalConfig, seed: u64) -> Result<MetricReport> {
    let mut r = evaluate(train, train, test, config, seed)?;
    r.meta.variant = REFERENCE_VARIANT.to_string();
    Ok(r)
}

struct Job {
    size: SubsetSize,
    variant: Variant,
    seed: u64,
}

struct Context<'a> {
    spec: &'a SweepSpec,
    train: &'a Table,
    test: &'a Table,
}

impl Context<'_> {
    fn subset(&self, size: SubsetSize) -> Result<Table> {
        data::subsample(self.train, size, derive_seed(self.spec.subset_seed, &[size_word(size)]))
    }

    fn meta(&self, r: &mut MetricReport, size: SubsetSize, variant: &str, seed: Option<u64>, trial: Option<usize>) {
        r.meta.dataset = self.spec.name.clone();
        r.meta.subset = size.label();
        r.meta.variant = variant.to_string();
        r.meta.seed = seed;
        r.meta.trial = trial;
    }

    fn reference(&self, size: SubsetSize) -> Result<(CellResult, bool)> {
        let dir = size_dir(&self.spec.output, size).join(REFERENCE_VARIANT);
        let path = dir.join("reference.report.json");
        let key = CellKey { size, variant: REFERENCE_VARIANT.into(), seed: None, trial: None };
        if path.exists() {
            let report = read_report(&path)?;
            return Ok((CellResult { key, report, wall_clock_secs: 0.0, trace: None }, false));
        }
        let start = Instant::now();
        let subset = self.subset(size)?;
        let eval_seed = derive_seed(self.spec.subset_seed, &[size_word(size), 0x5eed]);
        // histogram grids come from the full real data at every size
        let mut report = evaluate(&subset, self.train, self.test, &self.spec.eval, eval_seed)?;
        self.meta(&mut report, size, REFERENCE_VARIANT, None, None);
        write_file(&path, report.to_json()?.as_bytes())?;
        let secs = start.elapsed().as_secs_f64();
        Ok((CellResult { key, report, wall_clock_secs: secs, trace: None }, true))
    }

    /// Returns the trial cells and whether a model was trained.
    fn model_cells(&self, job: &Job) -> Result<(Vec<CellResult>, bool)> {
        let spec = self.spec;
        let dir = model_dir(&spec.output, job.size, job.variant, job.seed);
        let trace_path = dir.join("trace.json");
        let key = |trial| CellKey {
            size: job.size,
            variant: job.variant.name().into(),
            seed: Some(job.seed),
            trial: Some(trial),
        };
        let failure_path = dir.join("failure.json");
        if failure_path.exists() {
            let text = fs::read_to_string(&failure_path).map_err(|e| Error::io(&failure_path, e))?;
            let f: Failure = serde_json::from_str(&text)?;
            return Err(Error::invalid(format!("previously failed: {}", f.error)));
        }
        let done = (0..spec.trials).all(|t| trial_report_path(&dir, t).exists());
        if done {
            let timing: Timing = fs::read_to_string(dir.join("timing.json"))
                .ok()
                .and_then(|t| serde_json::from_str(&t).ok())
                .unwrap_or_default();
            let cells = (0..spec.trials)
                .map(|t| {
                    Ok(CellResult {
                        key: key(t),
                        report: read_report(&trial_report_path(&dir, t))?,
                        wall_clock_secs: timing.train_secs + timing.trial_secs.get(t).copied().unwrap_or(0.0),
                        trace: Some(trace_path.clone()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok((cells, false));
        }

        let result = (|| -> Result<Vec<CellResult>> {
            let subset = self.subset(job.size)?;
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let start = Instant::now();
            let model = synth::train(&subset, &spec.cell_config(job.variant, job.seed))?;
            let train_secs = start.elapsed().as_secs_f64();
            synth::save(&model, dir.join("model.tsyn"))?;
            write_file(&trace_path, serde_json::to_string_pretty(&model.trace)?.as_bytes())?;
            if !model.diagnostics.is_empty() {
                write_file(&dir.join("diagnostics.json"), serde_json::to_string_pretty(&model.diagnostics)?.as_bytes())?;
            }
            let mut timing = Timing { train_secs, trial_secs: Vec::new() };
            let mut cells = Vec::with_capacity(spec.trials);
            for t in 0..spec.trials {
                let start = Instant::now();
                let words = [size_word(job.size), job.variant as u64, t as u64];
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(job.seed, &words));
                let sample = model.sample(spec.samples, &mut rng)?;
                if spec.keep_samples {
                    data::write_csv(&sample, dir.join(format!("trial_{t}.samples.csv")))?;
                }
                let eval_seed = derive_seed(job.seed ^ 0xe7a1, &words);
                let mut report = evaluate(&sample, self.train, self.test, &spec.eval, eval_seed)?;
                self.meta(&mut report, job.size, job.variant.name(), Some(job.seed), Some(t));
                write_file(&trial_report_path(&dir, t), report.to_json()?.as_bytes())?;
                let secs = start.elapsed().as_secs_f64();
                timing.trial_secs.push(secs);
                cells.push(CellResult {
                    key: key(t),
                    report,
                    wall_clock_secs: train_secs + secs,
                    trace: Some(trace_path.clone()),
                });
            }
            write_file(&dir.join("timing.json"), serde_json::to_string_pretty(&timing)?.as_bytes())?;
            Ok(cells)
        })();
        match result {
            Ok(cells) => Ok((cells, true)),
            Err(e) => {
                let f = Failure { error: e.to_string() };
                write_file(&failure_path, serde_json::to_string_pretty(&f)?.as_bytes())?;
                Err(e)
            }
        }
    }
}

/// Runs (or resumes) a sweep. Cell failures are recorded on disk and in the
/// outcome; the remaining cells still run.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let (train, test) = spec.dataset.load()?;
    run_sweep_on(spec, &train, &test)
}

/// [`run_sweep`] with the real tables supplied by the caller.
pub fn run_sweep_on(spec: &SweepSpec, train: &Table, test: &Table) -> Result<SweepOutcome> {
    spec.validate()?;
    if let Some(SubsetSize::Rows(n)) = spec.sizes.iter().rev().find(|s| matches!(s, SubsetSize::Rows(_))) {
        if *n > train.n_rows() {
            return Err(Error::invalid(format!("subset size {n} exceeds the {} training rows", train.n_rows())));
        }
    }
    fs::create_dir_all(&spec.output).map_err(|e| Error::io(&spec.output, e))?;
    write_file(&spec.output.join("sweep.json"), serde_json::to_string_pretty(spec)?.as_bytes())?;

    let ctx = Context { spec, train, test };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;

    let mut outcome = SweepOutcome::default();
    let refs: Vec<_> = pool.install(|| spec.sizes.par_iter().map(|&s| (s, ctx.reference(s))).collect());
    for (size, r) in refs {
        match r {
            Ok((cell, fresh)) => {
                if !fresh {
                    outcome.reused += 1;
                }
                outcome.cells.push(cell);
            }
            Err(e) => {
                warn!("reference at size {} failed: {e}", size.label());
                let key = CellKey { size, variant: REFERENCE_VARIANT.into(), seed: None, trial: None };
                outcome.failures.push((key, e.to_string()));
            }
        }
    }

    let jobs: Vec<Job> = spec
        .sizes
        .iter()
        .flat_map(|&size| {
            spec.variants
                .iter()
                .flat_map(move |&variant| spec.seeds.iter().map(move |&seed| Job { size, variant, seed }))
        })
        .collect();
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(|j| (j, ctx.model_cells(j))).collect());
    for (job, r) in results {
        match r {
            Ok((cells, trained)) => {
                if trained {
                    info!("trained {} size {} seed {}", job.variant, job.size.label(), job.seed);
                    outcome.trained += 1;
                } else {
                    outcome.reused += 1;
                }
                outcome.cells.extend(cells);
            }
            Err(e) => {
                warn!("{} size {} seed {} failed: {e}", job.variant, job.size.label(), job.seed);
                let key = CellKey {
                    size: job.size,
                    variant: job.variant.name().into(),
                    seed: Some(job.seed),
                    trial: None,
                };
                outcome.failures.push((key, e.to_string()));
            }
        }
    }
    outcome.cells.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(outcome)
}
