//! Trains a GNN re-ranker on synthetic data and compares AP@30 against the
//! raw BM25 order, once per seed.
//!
//! `cargo run --release -p hetrag-core --example rerank_lift -- [seeds]`

use std::time::Instant;

use hetrag_core::synth::LiftExperiment;

fn main() -> hetrag_core::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    for seed in 0..seeds {
        let start = Instant::now();
        let outcome = LiftExperiment::for_seed(seed).run()?;
        let r = outcome.report;
        println!(
            "seed {seed}: BM25 AP@{k} {:.3}  GNN AP@{k} {:.3}  lift {:+.3}  best epoch {}  ({:.1}s)",
            r.bm25,
            r.gnn,
            r.lift(),
            outcome.best_epoch,
            start.elapsed().as_secs_f64(),
            k = r.k,
        );
        for e in &outcome.history {
            let dev = e.dev_ap_at_30.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"));
            println!("    epoch {}  loss {:.4}  dev AP@30 {dev}", e.epoch, e.train_loss);
        }
    }
    Ok(())
}
