//! Desk-scale comparison of ctgan and margctgan on the standard toy table.
use std::time::Instant;

use tabsyn::data::SubsetSize;
use tabsyn::harness::{run_sweep_on, summarize, DatasetSpec, SweepSpec};
use tabsyn::metrics::{EvalConfig, Metric};
use tabsyn::{TrainConfig, Variant};

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "/tmp/directional".into());
    let dataset = DatasetSpec::Toy { spec: tabsyn::data::ToySpec::standard(), train_rows: 5000, test_rows: 5000, seed: 11 };
    let spec = SweepSpec {
        name: "toy".into(),
        dataset: dataset.clone(),
        sizes: vec![SubsetSize::Rows(320), SubsetSize::Rows(640), SubsetSize::Rows(1280)],
        variants: vec![Variant::Ctgan, Variant::MargCtgan],
        seeds: vec![0, 1, 2],
        trials: 3,
        samples: 20000,
        epochs: 300,
        subset_seed: 7,
        model: TrainConfig::default(),
        eval: EvalConfig { metrics: vec![Metric::MlEfficacy, Metric::HistogramIntersection], ..EvalConfig::default() },
        output: out.into(),
        workers: 1,
        keep_samples: false,
    };
    let (train, test) = dataset.load().unwrap();
    let start = Instant::now();
    let outcome = run_sweep_on(&spec, &train, &test).unwrap();
    println!("elapsed {:?}, trained {}", start.elapsed(), outcome.trained);
    let reports: Vec<_> = outcome.cells.iter().map(|c| c.report.clone()).collect();
    for row in summarize(&reports).unwrap() {
        println!("{:>5} {:<10} {:<24} {:.4} (ref {:?})", row.key.size.label(), row.key.variant, row.key.metric, row.mean, row.reference);
    }
}
