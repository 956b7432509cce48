//! P@1 of the extractive generator as the number of evidence pieces it sees
//! grows, on synthetic benchmarks whose answers all rank within the top 30.
//!
//! `cargo run --release -p hetrag-core --example evidence_sweep -- [seeds] [k,k,...]`

use hetrag_core::retrieval::Bm25Params;
use hetrag_core::synth::{evidence_sweep, sweep_config, synth_benchmark};

fn main() -> hetrag_core::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let ks: Vec<usize> = std::env::args()
        .nth(2)
        .map(|s| s.split(',').filter_map(|k| k.trim().parse().ok()).collect())
        .unwrap_or_else(|| vec![5, 10, 30]);
    println!(
        "{:>6}  {}",
        "seed",
        ks.iter()
            .map(|k| format!("P@1(k={k:<3})"))
            .collect::<Vec<_>>()
            .join("  ")
    );
    for seed in 0..seeds {
        let bench = synth_benchmark(&sweep_config(seed))?;
        let sweep = evidence_sweep(&bench, Bm25Params::default(), &ks)?;
        let cells: Vec<String> = sweep.iter().map(|(_, p)| format!("{p:>10.3}")).collect();
        println!("{seed:>6}  {}", cells.join("  "));
    }
    Ok(())
}
