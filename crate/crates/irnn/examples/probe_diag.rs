// Scratch diagnostics for the XOR relaxation failure (temporary).
use irnn::dataset::xor_dataset;
use irnn::equilibrium::{relaxation_rhs_one_layer, SolverConfig};
use irnn::network::{Model, OneLayerParams};
use irnn::numeric::{sigmoid_prime_from_output, Vector};
use irnn::training::{adam_states_for, init_model, train_epoch, Arch, SplitData, TrainConfig};

fn eig2(m: [[f64; 2]; 2]) -> (f64, f64, f64) {
    // returns (re1, re2, imag part magnitude)
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        (tr / 2.0 + disc.sqrt(), tr / 2.0 - disc.sqrt(), 0.0)
    } else {
        (tr / 2.0, tr / 2.0, (-disc).sqrt())
    }
}

fn main() {
    let seed = 0u64;
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
        solver: SolverConfig { iterations: 400, step_size: 0.25, ..SolverConfig::default() },
    };
    let mut model = init_model(&cfg);
    let mut states = adam_states_for(&model, cfg.lr);
    for epoch in 0..cfg.epochs {
        match train_epoch(&mut model, &data, &cfg, &mut states, epoch, None) {
            Ok(mse) => {
                if epoch % 200 == 0 {
                    println!("epoch {epoch}: mse {mse:.6}");
                }
            }
            Err(e) => {
                println!("epoch {epoch}: FAILED: {e}");
                break;
            }
        }
    }
    let p: &OneLayerParams = match &model {
        Model::OneLayer(p) => p,
        _ => unreachable!(),
    };
    println!("Q = {:?}", p.input_weights.data());
    println!("W = {:?}", p.lateral.data());
    println!("T = {:?}", p.bias.data());

    // Long relaxation per input with fine step; report trailing residuals.
    for s in &data.train {
        let mut y = Vector::zeros(2);
        let h = 0.05;
        let mut last = Vec::new();
        for k in 0..200_000 {
            let k1 = relaxation_rhs_one_layer(p, &s.input, &y);
            let k2 = relaxation_rhs_one_layer(p, &s.input, &y.add(&k1.scale(h / 2.0)));
            let k3 = relaxation_rhs_one_layer(p, &s.input, &y.add(&k2.scale(h / 2.0)));
            let k4 = relaxation_rhs_one_layer(p, &s.input, &y.add(&k3.scale(h)));
            y = y.add(
                &k1.add(&k2.scale(2.0))
                    .add(&k3.scale(2.0))
                    .add(&k4)
                    .scale(h / 6.0),
            );
            if k > 199_900 {
                last.push(relaxation_rhs_one_layer(p, &s.input, &y).norm2());
            }
        }
        let d = sigmoid_prime_from_output(&y);
        let dw = [
            [d.get(0) * p.lateral.get(0, 0), d.get(0) * p.lateral.get(0, 1)],
            [d.get(1) * p.lateral.get(1, 0), d.get(1) * p.lateral.get(1, 1)],
        ];
        let (re1, re2, im) = eig2(dw);
        println!(
            "input {:?}: y = ({:.4}, {:.4}), residual tail {:.3e}..{:.3e}, eig(DW) re=({:.3},{:.3}) im={:.3}",
            s.input.data(),
            y.get(0),
            y.get(1),
            last.first().unwrap(),
            last.last().unwrap(),
            re1,
            re2,
            im
        );
    }
}
