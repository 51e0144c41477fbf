//! Runs the full pipeline on the default synthetic benchmark.
//!
//! `cargo run --release -p kgqa-core --example synth_run -- [seed] [--no-pretrain] [--no-transfer]`

use kgqa::eval::{synth_dataset, SynthConfig};
use kgqa::experiment::{run_pipeline, ExperimentConfig, Splits};

fn main() -> kgqa::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.iter().find_map(|a| a.parse().ok()).unwrap_or(0);
    let ds = synth_dataset(&SynthConfig { seed, ..SynthConfig::default() })?;
    let cfg = ExperimentConfig {
        seed,
        pretrain: !args.iter().any(|a| a == "--no-pretrain"),
        transfer: !args.iter().any(|a| a == "--no-transfer"),
        ..ExperimentConfig::default()
    };
    let start = std::time::Instant::now();
    let splits = Splits { kg: &ds.kg, train: &ds.train, valid: &ds.valid, test: &ds.test };
    let run = run_pipeline::<f64>(&splits, &cfg)?;
    if let Some(p) = &run.pretrain {
        println!("pretrain losses: {:?}", p.epoch_losses.iter().map(|l| format!("{l:.3}")).collect::<Vec<_>>());
    }
    for rec in run.retriever.history.iter().chain(&run.reasoner.history) {
        println!("{} {:>3} loss {:.4} valid {:?}", rec.phase, rec.epoch, rec.loss, rec.valid_hits_at_1);
    }
    println!("test curve: {:?}", run.test_curve.iter().map(|h| format!("{h:.2}")).collect::<Vec<_>>());
    println!(
        "hits@1 {:.3} f1 {:.3} coverage {:.3} threshold {} best epochs {}/{} ({:.1?})",
        run.report.hits_at_1,
        run.report.f1,
        run.report.coverage_rate,
        run.report.threshold,
        run.retriever.best_epoch,
        run.reasoner.best_epoch,
        start.elapsed()
    );
    Ok(())
}
