//! Gradients through the equilibrium of implicit recurrent networks.
//!
//! The derivative of the fixed point with respect to any parameter block
//! shares one common factor, the sensitivity matrix
//! `M = (I - D·W)⁻¹·D` with `D = diag(y·(1-y))` at equilibrium. Instead of
//! materializing the full 3-tensor Jacobians, loss gradients contract the
//! loss direction with `Mᵀ` first (one linear solve plus outer products),
//! which is algebraically identical and needs O(n²) memory.
//! [`full_jacobians_one_layer`] materializes the tensors for direct
//! comparison.
//!
//! Verification oracles live here too: central finite differences
//! ([`finite_diff_one_layer`], [`finite_diff_two_layer`]), the gradient of a
//! finite chain of plain iterative updates ([`unrolled_grads`]), and the
//! truncated Neumann series ([`neumann_inverse`]). All three are independent
//! of the linear-solve path they check.

use crate::equilibrium::{Equilibrium, SolverConfig, TwoLayerEquilibrium};
use crate::error::{Error, Result};
use crate::network::{FeedForwardParams, OneLayerParams, TwoLayerParams};
use crate::numeric::{
    outer, sigmoid, sigmoid_prime_from_output, solve_linear, solve_linear_vec, spectral_radius,
    Matrix, Vector,
};

/// The common factor `M = (I - D·W)⁻¹·D` of all one-layer equilibrium
/// Jacobians; row `i`, column `j` is `∂Y_i/∂T_j`.
#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    pub m: Matrix,
}

/// Loss gradients for a one-layer network, one block per parameter block.
#[derive(Debug, Clone)]
pub struct OneLayerGrads {
    pub input_weights: Matrix,
    pub lateral: Matrix,
    pub bias: Vector,
}

/// Loss gradients for the two-layer network, one block per parameter block.
#[derive(Debug, Clone)]
pub struct TwoLayerGrads {
    pub hidden_input: Matrix,
    pub hidden_lateral: Matrix,
    pub feedback: Matrix,
    pub hidden_bias: Vector,
    pub output_input: Matrix,
    pub output_lateral: Matrix,
    pub output_bias: Vector,
}

/// Loss gradients for the feed-forward baseline.
#[derive(Debug, Clone)]
pub struct FeedForwardGrads {
    pub hidden_input: Matrix,
    pub hidden_bias: Vector,
    pub output_input: Matrix,
    pub output_bias: Vector,
}

impl OneLayerGrads {
    pub fn zeros_like(p: &OneLayerParams) -> Self {
        OneLayerGrads {
            input_weights: Matrix::zeros(p.n_out(), p.n_in()),
            lateral: Matrix::zeros(p.n_out(), p.n_out()),
            bias: Vector::zeros(p.n_out()),
        }
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 3] {
        [
            ("Q", self.input_weights.data()),
            ("W", self.lateral.data()),
            ("T", self.bias.data()),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [
            self.input_weights.data_mut(),
            self.lateral.data_mut(),
            self.bias.data_mut(),
        ]
    }
}

impl TwoLayerGrads {
    pub fn zeros_like(p: &TwoLayerParams) -> Self {
        TwoLayerGrads {
            hidden_input: Matrix::zeros(p.n_h(), p.n_in()),
            hidden_lateral: Matrix::zeros(p.n_h(), p.n_h()),
            feedback: Matrix::zeros(p.n_h(), p.n_out()),
            hidden_bias: Vector::zeros(p.n_h()),
            output_input: Matrix::zeros(p.n_out(), p.n_h()),
            output_lateral: Matrix::zeros(p.n_out(), p.n_out()),
            output_bias: Vector::zeros(p.n_out()),
        }
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 7] {
        [
            ("Q_L2", self.hidden_input.data()),
            ("W_L2", self.hidden_lateral.data()),
            ("R", self.feedback.data()),
            ("T_L2", self.hidden_bias.data()),
            ("Q_L1", self.output_input.data()),
            ("W_L1", self.output_lateral.data()),
            ("T_L1", self.output_bias.data()),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 7] {
        [
            self.hidden_input.data_mut(),
            self.hidden_lateral.data_mut(),
            self.feedback.data_mut(),
            self.hidden_bias.data_mut(),
            self.output_input.data_mut(),
            self.output_lateral.data_mut(),
            self.output_bias.data_mut(),
        ]
    }
}

impl FeedForwardGrads {
    pub fn zeros_like(p: &FeedForwardParams) -> Self {
        FeedForwardGrads {
            hidden_input: Matrix::zeros(p.n_h(), p.n_in()),
            hidden_bias: Vector::zeros(p.n_h()),
            output_input: Matrix::zeros(p.n_out(), p.n_h()),
            output_bias: Vector::zeros(p.n_out()),
        }
    }

    pub fn blocks(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("Q_L2", self.hidden_input.data()),
            ("T_L2", self.hidden_bias.data()),
            ("Q_L1", self.output_input.data()),
            ("T_L1", self.output_bias.data()),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            self.hidden_input.data_mut(),
            self.hidden_bias.data_mut(),
            self.output_input.data_mut(),
            self.output_bias.data_mut(),
        ]
    }
}

/// Solve `(I - D·W)·M = D` for the sensitivity matrix at an equilibrium.
pub fn sensitivity_one_layer(
    params: &OneLayerParams,
    eq: &Equilibrium,
) -> Result<SensitivityMatrix> {
    let d = sigmoid_prime_from_output(&eq.y);
    let n = d.len();
    let a = Matrix::identity(n).sub(&params.lateral.scale_rows(&d));
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        b.set(i, i, d.get(i));
    }
    let m = solve_linear(&a, &b).map_err(|e| Error::SingularSensitivity {
        system: "one-layer",
        source: Box::new(e),
    })?;
    Ok(SensitivityMatrix { m })
}

/// Exact gradients of a scalar loss for a one-layer network.
///
/// With `g = Mᵀ·dl_dy`: the bias gradient is `g`, the lateral gradient is
/// `g·yᵀ`, the input-weight gradient is `g·xᵀ`. This is the contraction of
/// the equilibrium Jacobian tensors with the loss direction.
pub fn loss_grads_one_layer(
    params: &OneLayerParams,
    x: &Vector,
    eq: &Equilibrium,
    dl_dy: &Vector,
) -> Result<OneLayerGrads> {
    assert_eq!(
        dl_dy.len(),
        params.n_out(),
        "loss direction length {} does not match n_out {}",
        dl_dy.len(),
        params.n_out()
    );
    let sens = sensitivity_one_layer(params, eq)?;
    let g = sens.m.matvec_t(dl_dy);
    Ok(OneLayerGrads {
        input_weights: outer(&g, x),
        lateral: outer(&g, &eq.y),
        bias: g,
    })
}

/// Exact gradients for all seven blocks of the two-layer network.
///
/// The outer system matrix is
/// `A = I - D1·W_out - D1·Q_out·(I - D2·W_hid)⁻¹·D2·R`; layer-1 blocks use
/// `g1 = D1·A⁻ᵀ·dl_dy`, layer-2 blocks propagate `g1` through the output
/// input weights and the inner system transpose.
pub fn loss_grads_two_layer(
    params: &TwoLayerParams,
    x: &Vector,
    eq: &TwoLayerEquilibrium,
    dl_dy: &Vector,
) -> Result<TwoLayerGrads> {
    assert_eq!(
        dl_dy.len(),
        params.n_out(),
        "loss direction length {} does not match n_out {}",
        dl_dy.len(),
        params.n_out()
    );
    let d1 = sigmoid_prime_from_output(&eq.output);
    let d2 = sigmoid_prime_from_output(&eq.hidden);
    let n_h = params.n_h();
    let n_out = params.n_out();

    // Inner solve: (I - D2·W_hid)·KR = D2·R.
    let a_inner = Matrix::identity(n_h).sub(&params.hidden_lateral.scale_rows(&d2));
    let kr = solve_linear(&a_inner, &params.feedback.scale_rows(&d2)).map_err(|e| {
        Error::SingularSensitivity { system: "inner", source: Box::new(e) }
    })?;

    // Outer system.
    let coupled = params.output_lateral.add(&params.output_input.matmul(&kr));
    let a_outer = Matrix::identity(n_out).sub(&coupled.scale_rows(&d1));

    let u = solve_linear_vec(&a_outer.transposed(), dl_dy).map_err(|e| {
        Error::SingularSensitivity { system: "outer", source: Box::new(e) }
    })?;
    let g1 = elementwise(&d1, &u);

    let v = params.output_input.matvec_t(&g1);
    let w = solve_linear_vec(&a_inner.transposed(), &v).map_err(|e| {
        Error::SingularSensitivity { system: "inner", source: Box::new(e) }
    })?;
    let g2 = elementwise(&d2, &w);

    Ok(TwoLayerGrads {
        hidden_input: outer(&g2, x),
        hidden_lateral: outer(&g2, &eq.hidden),
        feedback: outer(&g2, &eq.output),
        hidden_bias: g2,
        output_input: outer(&g1, &eq.hidden),
        output_lateral: outer(&g1, &eq.output),
        output_bias: g1,
    })
}

/// Semi-gradient for a one-layer network: the sensitivity matrix is replaced
/// by `D`, i.e. the equilibrium activations inside the activation function
/// are treated as constants.
pub fn semi_grads_one_layer(
    params: &OneLayerParams,
    x: &Vector,
    eq: &Equilibrium,
    dl_dy: &Vector,
) -> OneLayerGrads {
    assert_eq!(dl_dy.len(), params.n_out(), "loss direction length mismatch");
    let d = sigmoid_prime_from_output(&eq.y);
    let g = elementwise(&d, dl_dy);
    OneLayerGrads {
        input_weights: outer(&g, x),
        lateral: outer(&g, &eq.y),
        bias: g,
    }
}

/// Semi-gradient for the two-layer network: one standard backprop pass
/// through the frozen-equilibrium graph. Recurrent blocks receive the
/// frozen-activation outer products.
pub fn semi_grads_two_layer(
    params: &TwoLayerParams,
    x: &Vector,
    eq: &TwoLayerEquilibrium,
    dl_dy: &Vector,
) -> TwoLayerGrads {
    assert_eq!(dl_dy.len(), params.n_out(), "loss direction length mismatch");
    let d1 = sigmoid_prime_from_output(&eq.output);
    let d2 = sigmoid_prime_from_output(&eq.hidden);
    let g1 = elementwise(&d1, dl_dy);
    let g2 = elementwise(&d2, &params.output_input.matvec_t(&g1));
    TwoLayerGrads {
        hidden_input: outer(&g2, x),
        hidden_lateral: outer(&g2, &eq.hidden),
        feedback: outer(&g2, &eq.output),
        hidden_bias: g2,
        output_input: outer(&g1, &eq.hidden),
        output_lateral: outer(&g1, &eq.output),
        output_bias: g1,
    }
}

/// Textbook backprop for the feed-forward baseline.
pub fn loss_grads_feedforward(
    params: &FeedForwardParams,
    x: &Vector,
    hidden: &Vector,
    output: &Vector,
    dl_dy: &Vector,
) -> FeedForwardGrads {
    assert_eq!(dl_dy.len(), params.n_out(), "loss direction length mismatch");
    let delta_out = elementwise(&sigmoid_prime_from_output(output), dl_dy);
    let delta_hidden = elementwise(
        &sigmoid_prime_from_output(hidden),
        &params.output_input.matvec_t(&delta_out),
    );
    FeedForwardGrads {
        hidden_input: outer(&delta_hidden, x),
        hidden_bias: delta_hidden,
        output_input: outer(&delta_out, hidden),
        output_bias: delta_out,
    }
}

fn elementwise(a: &Vector, b: &Vector) -> Vector {
    assert_eq!(a.len(), b.len(), "elementwise length mismatch");
    Vector::from_vec(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect())
}

/// Fully materialized one-layer Jacobian tensors, for verifying that the
/// adjoint contraction matches the tensor form entry by entry.
///
/// `wrt_input[i]` holds `∂Y_i/∂Q_jm`, `wrt_lateral[i]` holds `∂Y_i/∂W_jm`,
/// `wrt_bias` holds `∂Y_i/∂T_j`.
#[derive(Debug, Clone)]
pub struct FullJacobians {
    pub wrt_input: Vec<Matrix>,
    pub wrt_lateral: Vec<Matrix>,
    pub wrt_bias: Matrix,
}

pub fn full_jacobians_one_layer(
    params: &OneLayerParams,
    x: &Vector,
    eq: &Equilibrium,
) -> Result<FullJacobians> {
    let sens = sensitivity_one_layer(params, eq)?;
    let n = params.n_out();
    let mut wrt_input = Vec::with_capacity(n);
    let mut wrt_lateral = Vec::with_capacity(n);
    for i in 0..n {
        let mut jq = Matrix::zeros(n, params.n_in());
        let mut jw = Matrix::zeros(n, n);
        for j in 0..n {
            let mij = sens.m.get(i, j);
            for m in 0..params.n_in() {
                jq.set(j, m, mij * x.get(m));
            }
            for m in 0..n {
                jw.set(j, m, mij * eq.y.get(m));
            }
        }
        wrt_input.push(jq);
        wrt_lateral.push(jw);
    }
    Ok(FullJacobians {
        wrt_input,
        wrt_lateral,
        wrt_bias: sens.m.clone(),
    })
}

/// Central finite differences through repeated equilibrium solves; the
/// independent oracle for the one-layer gradients.
///
/// Every perturbed equilibrium must converge, otherwise an error is returned.
pub fn finite_diff_one_layer(
    params: &OneLayerParams,
    x: &Vector,
    cfg: &SolverConfig,
    loss: impl Fn(&Vector) -> f64,
    step: f64,
) -> Result<OneLayerGrads> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut grads = OneLayerGrads::zeros_like(params);
    let n_blocks = params.blocks().len();
    for block in 0..n_blocks {
        let len = params.blocks()[block].1.len();
        for k in 0..len {
            let mut plus = params.clone();
            plus.blocks_mut()[block][k] += step;
            let mut minus = params.clone();
            minus.blocks_mut()[block][k] -= step;
            let lp = loss(&converged_y_one_layer(&plus, x, cfg)?);
            let lm = loss(&converged_y_one_layer(&minus, x, cfg)?);
            grads.blocks_mut()[block][k] = (lp - lm) / (2.0 * step);
        }
    }
    Ok(grads)
}

/// Central finite differences over all seven two-layer blocks; the loss is a
/// function of the output layer activation.
pub fn finite_diff_two_layer(
    params: &TwoLayerParams,
    x: &Vector,
    cfg: &SolverConfig,
    loss: impl Fn(&Vector) -> f64,
    step: f64,
) -> Result<TwoLayerGrads> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut grads = TwoLayerGrads::zeros_like(params);
    let n_blocks = params.blocks().len();
    for block in 0..n_blocks {
        let len = params.blocks()[block].1.len();
        for k in 0..len {
            let mut plus = params.clone();
            plus.blocks_mut()[block][k] += step;
            let mut minus = params.clone();
            minus.blocks_mut()[block][k] -= step;
            let lp = loss(&converged_y_two_layer(&plus, x, cfg)?);
            let lm = loss(&converged_y_two_layer(&minus, x, cfg)?);
            grads.blocks_mut()[block][k] = (lp - lm) / (2.0 * step);
        }
    }
    Ok(grads)
}

fn converged_y_one_layer(p: &OneLayerParams, x: &Vector, cfg: &SolverConfig) -> Result<Vector> {
    let eq = p.forward(x, cfg)?;
    if !eq.converged {
        return Err(Error::NotConverged {
            residual: eq.residual_norm,
            tolerance: cfg.tolerance,
        });
    }
    Ok(eq.y)
}

fn converged_y_two_layer(p: &TwoLayerParams, x: &Vector, cfg: &SolverConfig) -> Result<Vector> {
    let eq = p.forward(x, cfg)?;
    if !eq.converged {
        return Err(Error::NotConverged {
            residual: eq.residual_norm,
            tolerance: cfg.tolerance,
        });
    }
    Ok(eq.output)
}

/// Gradient accumulated through a finite chain of plain iterative updates
/// `Y(t+1) = f(W·Y(t) + Q·x + T)` from `Y(0) = 0`, contracted with `dl_dy`.
///
/// Converges to the implicit gradient as the chain lengthens; errors when
/// the iteration itself fails to contract.
pub fn unrolled_grads(
    params: &OneLayerParams,
    x: &Vector,
    n_steps: usize,
    dl_dy: &Vector,
) -> Result<OneLayerGrads> {
    assert!(n_steps >= 1, "need at least one iterative step");
    let n = params.n_out();
    let n_in = params.n_in();

    let mut y = Vector::zeros(n);
    // jw[i](j, m) = ∂Y_i/∂W_jm and likewise for jq; jt(i, j) = ∂Y_i/∂T_j.
    let mut jw: Vec<Matrix> = (0..n).map(|_| Matrix::zeros(n, n)).collect();
    let mut jq: Vec<Matrix> = (0..n).map(|_| Matrix::zeros(n, n_in)).collect();
    let mut jt = Matrix::zeros(n, n);

    let mut first_increment = None;
    let mut last_increment = 0.0;

    for _ in 0..n_steps {
        let pre = params
            .lateral
            .matvec(&y)
            .add(&params.input_weights.matvec(x))
            .add(&params.bias);
        let y_next = sigmoid(&pre);
        if !y_next.is_finite() {
            return Err(Error::IterativeDivergence);
        }
        let fp = sigmoid_prime_from_output(&y_next);

        let mut jw_next: Vec<Matrix> = (0..n).map(|_| Matrix::zeros(n, n)).collect();
        let mut jq_next: Vec<Matrix> = (0..n).map(|_| Matrix::zeros(n, n_in)).collect();
        let mut jt_next = Matrix::zeros(n, n);
        for i in 0..n {
            let fpi = fp.get(i);
            for j in 0..n {
                // W block: sum over the previous step's Jacobian plus the
                // direct delta term.
                for m in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += params.lateral.get(i, k) * jw[k].get(j, m);
                    }
                    if i == j {
                        acc += y.get(m);
                    }
                    jw_next[i].set(j, m, fpi * acc);
                }
                for m in 0..n_in {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += params.lateral.get(i, k) * jq[k].get(j, m);
                    }
                    if i == j {
                        acc += x.get(m);
                    }
                    jq_next[i].set(j, m, fpi * acc);
                }
                let mut acc = 0.0;
                for k in 0..n {
                    acc += params.lateral.get(i, k) * jt.get(k, j);
                }
                if i == j {
                    acc += 1.0;
                }
                jt_next.set(i, j, fpi * acc);
            }
        }

        last_increment = y_next.sub(&y).norm2();
        first_increment.get_or_insert(last_increment);
        y = y_next;
        jw = jw_next;
        jq = jq_next;
        jt = jt_next;
    }

    let first = first_increment.unwrap_or(0.0);
    if last_increment > first && last_increment > 1e-10 {
        return Err(Error::IterativeDivergence);
    }

    let mut grads = OneLayerGrads {
        input_weights: Matrix::zeros(n, n_in),
        lateral: Matrix::zeros(n, n),
        bias: jt.matvec_t(dl_dy),
    };
    for i in 0..n {
        let dli = dl_dy.get(i);
        for j in 0..n {
            for m in 0..n {
                let v = grads.lateral.get(j, m) + dli * jw[i].get(j, m);
                grads.lateral.set(j, m, v);
            }
            for m in 0..n_in {
                let v = grads.input_weights.get(j, m) + dli * jq[i].get(j, m);
                grads.input_weights.set(j, m, v);
            }
        }
    }
    Ok(grads)
}

/// Truncated Neumann series `Σ_{k=0}^{k_max} (D·W)^k`, which converges to
/// `(I - D·W)⁻¹` when the spectral radius of `D·W` is below one. The radius
/// is estimated by 100 power-iteration steps before summing.
pub fn neumann_inverse(d: &Vector, w: &Matrix, k_max: usize) -> Result<Matrix> {
    let dw = w.scale_rows(d);
    let radius = spectral_radius(&dw, 100);
    if !(radius < 1.0) {
        return Err(Error::NonConvergentRadius { radius });
    }
    let n = w.rows();
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for _ in 1..=k_max {
        term = dw.matmul(&term);
        sum = sum.add(&term);
    }
    Ok(sum)
}

/// Largest elementwise relative difference `|a-b| / max(|a|,|b|)`, skipping
/// entries whose denominator is below `denom_floor`.
pub fn max_relative_error(a: &[f64], b: &[f64], denom_floor: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "relative error over mismatched lengths");
    let mut worst = 0.0_f64;
    for (x, y) in a.iter().zip(b.iter()) {
        let denom = x.abs().max(y.abs());
        if denom < denom_floor {
            continue;
        }
        worst = worst.max((x - y).abs() / denom);
    }
    worst
}
