// Scratch: residual traces at several RK4 step sizes (temporary).
use irnn::equilibrium::relaxation_rhs_one_layer;
use irnn::network::OneLayerParams;
use irnn::numeric::{Matrix, Vector};

fn main() {
    let p = OneLayerParams {
        lateral: Matrix::from_rows(&[
            &[5.1691429597177985, 2.0269377236705357],
            &[4.503871052699395, 4.034214573920502],
        ]),
        input_weights: Matrix::from_rows(&[
            &[0.8856285437303639, 0.9014891566209238],
            &[-3.370157490707159, -3.2075863485946323],
        ]),
        bias: Vector::from_vec(vec![-4.934578089095266, 1.1502455386951074]),
    };
    let x = Vector::from_vec(vec![1.0, 0.0]);
    for h in [0.2, 0.1, 0.05, 1.0, 0.5] {
        let total_time = 300.0_f64;
        let steps = (total_time / h) as usize;
        let mut y = Vector::zeros(2);
        let mut trace = Vec::new();
        for k in 0..steps {
            let k1 = relaxation_rhs_one_layer(&p, &x, &y);
            let k2 = relaxation_rhs_one_layer(&p, &x, &y.add(&k1.scale(h / 2.0)));
            let k3 = relaxation_rhs_one_layer(&p, &x, &y.add(&k2.scale(h / 2.0)));
            let k4 = relaxation_rhs_one_layer(&p, &x, &y.add(&k3.scale(h)));
            y = y.add(&k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4).scale(h / 6.0));
            let t = (k + 1) as f64 * h;
            if (t / total_time * 10.0).fract() < (h / total_time * 10.0) || k + 1 == steps {
                trace.push(format!(
                    "t={t:.0} y=({:.4},{:.4}) res={:.2e}",
                    y.get(0),
                    y.get(1),
                    relaxation_rhs_one_layer(&p, &x, &y).norm2()
                ));
            }
        }
        println!("h={h}:");
        for line in trace.iter().take(12) {
            println!("  {line}");
        }
    }
}
