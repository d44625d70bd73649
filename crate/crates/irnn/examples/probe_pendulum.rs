// Scratch probe: desk-scale pendulum trend (temporary, removed later).
use irnn::dataset::generate_pendulum_dataset;
use irnn::equilibrium::SolverConfig;
use irnn::training::{run_experiment, Arch, Split, SplitData, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_samples: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let steps: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(12);
    let runs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(5);
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(1);

    let t0 = std::time::Instant::now();
    let (samples, meta) = generate_pendulum_dataset(n_samples, 50, seed).unwrap();
    let data = SplitData::from_pendulum(&samples, &meta).unwrap();
    println!(
        "dataset: {} train / {} test in {:.2}s",
        data.train.len(),
        data.test.len(),
        t0.elapsed().as_secs_f64()
    );

    for arch in [Arch::TwoLayerExact, Arch::TwoLayerSemi, Arch::FeedForward] {
        let cfg = TrainConfig {
            arch,
            n_in: 50,
            n_h: 5,
            n_out: 2,
            epochs,
            steps_per_epoch: steps,
            n_batches: 6,
            eval_every: 4,
            lr: 0.01,
            seed,
            supervised_mask: None,
            solver: SolverConfig::default(),
        };
        let t0 = std::time::Instant::now();
        let result = run_experiment(&cfg, &data, runs, 1);
        let secs = t0.elapsed().as_secs_f64();
        for (id, e) in &result.failures {
            println!("  run {id} FAILED: {e}");
        }
        let finals: Vec<f64> = result
            .runs
            .iter()
            .filter_map(|r| r.final_test_mse)
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len().max(1) as f64;
        let last_summary = result
            .summary
            .iter()
            .filter(|r| r.split == Split::Test)
            .next_back();
        println!(
            "arch {:?}: mean final test mse {mean:.6} (runs: {:?}) sem {:.2e} [{secs:.1}s]",
            arch,
            finals.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            last_summary.map(|r| r.sem_mse).unwrap_or(f64::NAN)
        );
    }
}
