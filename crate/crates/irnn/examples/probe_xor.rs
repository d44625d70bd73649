// Scratch probe: XOR seed sweep diagnostics (temporary, removed later).
use irnn::dataset::xor_dataset;
use irnn::equilibrium::SolverConfig;
use irnn::training::{run_single, Arch, Split, SplitData, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let iters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let h: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let n_seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10);
    let solver = SolverConfig { iterations: iters, step_size: h, ..SolverConfig::default() };
    println!("epochs={epochs} iters={iters} h={h}");

    for (arch, mask, semi) in [
        (Arch::OneLayerExact, Some(vec![true, false]), false),
        (Arch::OneLayerSemi, None, true),
    ] {
        let data = SplitData::xor(&xor_dataset(), semi);
        let mut pass = 0;
        let mut nor_ok = 0;
        println!("== arch {arch:?}");
        for seed in 0..n_seeds {
            let cfg = TrainConfig {
                arch,
                n_in: 2,
                n_h: 1,
                n_out: 2,
                epochs,
                steps_per_epoch: 1,
                n_batches: 1,
                eval_every: 4,
                lr: 0.01,
                seed,
                supervised_mask: mask.clone(),
                solver,
            };
            let t0 = std::time::Instant::now();
            match run_single(&cfg, 0, seed, &data) {
                Ok(res) => {
                    let mse = res
                        .rows
                        .iter()
                        .rev()
                        .find(|r| r.split == Split::Train)
                        .unwrap()
                        .mse;
                    // y2 truth table + NOR agreement
                    let mut table = Vec::new();
                    let mut agree = 0;
                    let nor = [1.0, 0.0, 0.0, 0.0];
                    for (k, s) in data.train.iter().enumerate() {
                        let (y, _) = res.final_model.output(&s.input, &solver).unwrap();
                        let y2 = y.get(1);
                        let thr = if y2 >= 0.5 { 1.0 } else { 0.0 };
                        if thr == nor[k] {
                            agree += 1;
                        }
                        table.push(format!("{y2:.3}"));
                    }
                    let good = mse < 1e-2;
                    if good {
                        pass += 1;
                        if agree >= 3 {
                            nor_ok += 1;
                        }
                    }
                    println!(
                        "seed {seed}: mse {mse:.5} pass={good} y2=[{}] nor_agree={agree} ({:.2}s)",
                        table.join(","),
                        t0.elapsed().as_secs_f64()
                    );
                }
                Err(e) => println!("seed {seed}: FAILED {e}"),
            }
        }
        println!("-- pass {pass}/{n_seeds}, nor_agree>=3 among passing: {nor_ok}");
    }
}
