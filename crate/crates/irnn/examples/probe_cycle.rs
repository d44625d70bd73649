// Scratch: classify non-converging XOR relaxation (temporary).
use irnn::dataset::xor_dataset;
use irnn::equilibrium::{relaxation_rhs_one_layer, SolverConfig};
use irnn::network::Model;
use irnn::numeric::Vector;
use irnn::training::{adam_states_for, init_model, train_epoch, Arch, SplitData, TrainConfig};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let data = SplitData::xor(&xor_dataset(), false);
    let cfg = TrainConfig {
        arch: Arch::OneLayerExact,
        n_in: 2,
        n_h: 1,
        n_out: 2,
        epochs: 2000,
        steps_per_epoch: 1,
        n_batches: 1,
        eval_every: 4,
        lr: 0.01,
        seed,
        supervised_mask: Some(vec![true, false]),
        solver: SolverConfig { iterations: 1500, step_size: 0.2, ..SolverConfig::default() },
    };
    let mut model = init_model(&cfg);
    let mut states = adam_states_for(&model, cfg.lr);
    let mut failed_at = None;
    for epoch in 0..cfg.epochs {
        if let Err(e) = train_epoch(&mut model, &data, &cfg, &mut states, epoch, None) {
            println!("failed at epoch {epoch}: {e}");
            failed_at = Some(epoch);
            break;
        }
    }
    if failed_at.is_none() {
        println!("seed {seed} trained fine");
        return;
    }
    let p = match &model {
        Model::OneLayer(p) => p,
        _ => unreachable!(),
    };
    println!("W = {:?}", p.lateral.data());
    println!("Q = {:?}", p.input_weights.data());
    println!("T = {:?}", p.bias.data());
    // Examine each input's flow from Y=0 with fine-step RK4.
    for s in &data.train {
        let mut y = Vector::zeros(2);
        let h = 0.02;
        let mut min_res = f64::INFINITY;
        let mut samples = Vec::new();
        for k in 0..500_000 {
            let k1 = relaxation_rhs_one_layer(p, &s.input, &y);
            let k2 = relaxation_rhs_one_layer(p, &s.input, &y.add(&k1.scale(h / 2.0)));
            let k3 = relaxation_rhs_one_layer(p, &s.input, &y.add(&k2.scale(h / 2.0)));
            let k4 = relaxation_rhs_one_layer(p, &s.input, &y.add(&k3.scale(h)));
            y = y.add(&k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4).scale(h / 6.0));
            let res = relaxation_rhs_one_layer(p, &s.input, &y).norm2();
            min_res = min_res.min(res);
            // keep the tail: t in [9600, 10000]
            if k >= 480_000 && k % 4000 == 0 {
                samples.push((y.get(0), y.get(1), res));
            }
        }
        println!(
            "input {:?}: min residual over run {:.3e}; tail (y1, y2, res):",
            s.input.data(),
            min_res
        );
        for (a, b, r) in samples {
            println!("   ({a:.4}, {b:.4}) res {r:.3e}");
        }
    }
}
