//! Equilibrium computation for implicit recurrent layers.
//!
//! The fixed point of `Y = f(X̃)` is found by integrating the relaxation ODE
//! `dY/dt = f(X̃) - Y` from `Y(0) = 0` until the right-hand side is small.
//! The default integrator is classical RK4 with a fixed step; an explicit
//! Euler branch exists because at step size 1 it reproduces the plain
//! iterative update `Y(t+1) = f(X̃(t))`.

use crate::error::{Error, Result};
use crate::network::{OneLayerParams, TwoLayerParams};
use crate::numeric::{sigmoid, Vector};

/// Residual growth beyond this factor counts as divergence.
const DIVERGENCE_GROWTH: f64 = 1e6;

/// Integration stops early once the residual falls this far below the
/// configured tolerance; the state is then numerically at the fixed point and
/// further steps only repeat it.
const EARLY_EXIT_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Rk4,
    Euler,
}

/// Relaxation-solver settings.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub iterations: usize,
    /// Step size in relaxation time; RK4 uses 1.0 by default so the iteration
    /// count spans the same integration time across configurations.
    pub step_size: f64,
    pub tolerance: f64,
}

impl SolverConfig {
    pub fn new(method: SolverMethod, iterations: usize, step_size: f64, tolerance: f64) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::InvalidArgument("solver iterations must be >= 1".into()));
        }
        if !(step_size > 0.0 && step_size <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "solver step size must lie in (0, 1], got {step_size}"
            )));
        }
        if tolerance <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "solver tolerance must be positive, got {tolerance}"
            )));
        }
        Ok(SolverConfig { method, iterations, step_size, tolerance })
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::Rk4,
            iterations: 30,
            step_size: 1.0,
            tolerance: 1e-6,
        }
    }
}

/// Converged state of a one-layer implicit network.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub y: Vector,
    /// `‖dY/dt‖₂` at termination.
    pub residual_norm: f64,
    pub converged: bool,
}

/// Converged state of the coupled two-layer system.
#[derive(Debug, Clone)]
pub struct TwoLayerEquilibrium {
    pub hidden: Vector,
    pub output: Vector,
    /// Residual over the stacked state.
    pub residual_norm: f64,
    pub converged: bool,
}

/// `dY/dt = f(Q·x + W·y + T) - y` for a one-layer network.
pub fn relaxation_rhs_one_layer(params: &OneLayerParams, x: &Vector, y: &Vector) -> Vector {
    let pre = params
        .input_weights
        .matvec(x)
        .add(&params.lateral.matvec(y))
        .add(&params.bias);
    sigmoid(&pre).sub(y)
}

/// Stacked right-hand side for the coupled two-layer system. State layout is
/// `[hidden, output]`.
pub fn relaxation_rhs_two_layer(params: &TwoLayerParams, x: &Vector, state: &Vector) -> Vector {
    let n_h = params.hidden_bias.len();
    let mut out = vec![0.0; state.len()];
    let base_hidden = params.hidden_input.matvec(x).add(&params.hidden_bias);
    let base_output = params.output_bias.clone();
    TwoLayerSystem {
        params,
        base_hidden: base_hidden.data().to_vec(),
        base_output: base_output.data().to_vec(),
        n_h,
    }
    .rhs_into(state.data(), &mut out);
    Vector::from_vec(out)
}

/// Allocation-free right-hand side of a relaxation ODE. The input-dependent
/// part of the preactivation is folded into the system once per solve.
trait RelaxationSystem {
    fn dim(&self) -> usize;
    fn rhs_into(&self, y: &[f64], out: &mut [f64]);
}

struct OneLayerSystem<'a> {
    params: &'a OneLayerParams,
    /// `Q·x + T`.
    base: Vec<f64>,
}

impl RelaxationSystem for OneLayerSystem<'_> {
    fn dim(&self) -> usize {
        self.base.len()
    }

    fn rhs_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.base);
        self.params.lateral.matvec_acc(y, out);
        for (o, yi) in out.iter_mut().zip(y.iter()) {
            *o = sigmoid_scalar_inline(*o) - yi;
        }
    }
}

struct TwoLayerSystem<'a> {
    params: &'a TwoLayerParams,
    /// `Q_L2·x + T_L2`.
    base_hidden: Vec<f64>,
    base_output: Vec<f64>,
    n_h: usize,
}

impl RelaxationSystem for TwoLayerSystem<'_> {
    fn dim(&self) -> usize {
        self.base_hidden.len() + self.base_output.len()
    }

    fn rhs_into(&self, y: &[f64], out: &mut [f64]) {
        let (hidden, output) = y.split_at(self.n_h);
        let (out_h, out_o) = out.split_at_mut(self.n_h);
        out_h.copy_from_slice(&self.base_hidden);
        self.params.hidden_lateral.matvec_acc(hidden, out_h);
        self.params.feedback.matvec_acc(output, out_h);
        out_o.copy_from_slice(&self.base_output);
        self.params.output_input.matvec_acc(hidden, out_o);
        self.params.output_lateral.matvec_acc(output, out_o);
        for (o, yi) in out_h.iter_mut().zip(hidden.iter()) {
            *o = sigmoid_scalar_inline(*o) - yi;
        }
        for (o, yi) in out_o.iter_mut().zip(output.iter()) {
            *o = sigmoid_scalar_inline(*o) - yi;
        }
    }
}

#[inline]
fn sigmoid_scalar_inline(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integrate `dY/dt = rhs(Y)` from zeros until the residual is numerically
/// zero or the iteration budget runs out; report the terminal residual.
fn integrate(system: &dyn RelaxationSystem, cfg: &SolverConfig) -> Result<(Vec<f64>, f64, bool)> {
    let dim = system.dim();
    let h = cfg.step_size;
    let exit_below = cfg.tolerance * EARLY_EXIT_FACTOR;

    let mut y = vec![0.0; dim];
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];

    let mut initial_residual = None;
    for iteration in 0..cfg.iterations {
        system.rhs_into(&y, &mut k1);
        let residual = norm2(&k1);
        if !residual.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let r0 = *initial_residual.get_or_insert(residual);
        if residual > DIVERGENCE_GROWTH * r0.max(1.0) {
            return Err(Error::Divergence { iteration });
        }
        if residual < exit_below {
            return Ok((y, residual, residual <= cfg.tolerance));
        }
        match cfg.method {
            SolverMethod::Rk4 => {
                for i in 0..dim {
                    stage[i] = y[i] + 0.5 * h * k1[i];
                }
                system.rhs_into(&stage, &mut k2);
                for i in 0..dim {
                    stage[i] = y[i] + 0.5 * h * k2[i];
                }
                system.rhs_into(&stage, &mut k3);
                for i in 0..dim {
                    stage[i] = y[i] + h * k3[i];
                }
                system.rhs_into(&stage, &mut k4);
                for i in 0..dim {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            SolverMethod::Euler => {
                for i in 0..dim {
                    y[i] += h * k1[i];
                }
            }
        }
    }
    system.rhs_into(&y, &mut k1);
    let residual = norm2(&k1);
    if !residual.is_finite() {
        return Err(Error::Divergence { iteration: cfg.iterations });
    }
    Ok((y, residual, residual <= cfg.tolerance))
}

/// Relax a one-layer network to equilibrium from `Y(0) = 0`.
pub fn solve_one_layer(params: &OneLayerParams, x: &Vector, cfg: &SolverConfig) -> Result<Equilibrium> {
    let base = params.input_weights.matvec(x).add(&params.bias);
    let system = OneLayerSystem { params, base: base.data().to_vec() };
    let (y, residual_norm, converged) = integrate(&system, cfg)?;
    Ok(Equilibrium { y: Vector::from_vec(y), residual_norm, converged })
}

/// Relax the coupled two-layer system to equilibrium, both layers integrated
/// simultaneously as one stacked state vector starting at zeros.
pub fn solve_two_layer(
    params: &TwoLayerParams,
    x: &Vector,
    cfg: &SolverConfig,
) -> Result<TwoLayerEquilibrium> {
    let n_h = params.hidden_bias.len();
    let base_hidden = params.hidden_input.matvec(x).add(&params.hidden_bias);
    let system = TwoLayerSystem {
        params,
        base_hidden: base_hidden.data().to_vec(),
        base_output: params.output_bias.data().to_vec(),
        n_h,
    };
    let (state, residual_norm, converged) = integrate(&system, cfg)?;
    Ok(TwoLayerEquilibrium {
        hidden: Vector::from_slice(&state[..n_h]),
        output: Vector::from_slice(&state[n_h..]),
        residual_norm,
        converged,
    })
}

/// Explicit Euler relaxation; at `h = 1` this is the plain iterative update
/// `Y(t+1) = f(X̃(t))`.
pub fn euler_iterate(
    params: &OneLayerParams,
    x: &Vector,
    h: f64,
    steps: usize,
) -> Result<Equilibrium> {
    let cfg = SolverConfig::new(SolverMethod::Euler, steps, h, 1e-6)?;
    solve_one_layer(params, x, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{FeedForwardParams, OneLayerParams, TwoLayerParams};
    use crate::numeric::{Matrix, Rng};

    fn single_neuron(w: f64, q: f64, t: f64) -> OneLayerParams {
        OneLayerParams {
            input_weights: Matrix::from_rows(&[&[q]]),
            lateral: Matrix::from_rows(&[&[w]]),
            bias: Vector::from_vec(vec![t]),
        }
    }

    // Damped fixed-point iteration, the independent oracle for scalar
    // equilibria: y <- y + 0.5 (sigma(w y + c) - y) run to 1e-12.
    fn scalar_fixed_point_oracle(w: f64, c: f64) -> f64 {
        let mut y = 0.5;
        for _ in 0..10_000 {
            let s = 1.0 / (1.0 + (-(w * y + c)).exp());
            let next = y + 0.5 * (s - y);
            if (next - y).abs() < 1e-13 {
                return next;
            }
            y = next;
        }
        y
    }

    #[test]
    fn rhs_zero_at_fixed_point() {
        let params = single_neuron(0.5, 1.0, 0.0);
        let x = Vector::from_vec(vec![0.0]);
        let y_star = scalar_fixed_point_oracle(0.5, 0.0);
        let rhs = relaxation_rhs_one_layer(&params, &x, &Vector::from_vec(vec![y_star]));
        assert!(rhs.get(0).abs() < 1e-12);
    }

    #[test]
    fn rhs_feed_forward_reduction() {
        let mut rng = Rng::new(5);
        let params = {
            let mut p = OneLayerParams::init(3, 4, &mut rng);
            p.lateral = Matrix::zeros(4, 4);
            p
        };
        let x = Vector::from_vec(vec![0.2, -0.4, 0.9]);
        let y = sigmoid(&params.input_weights.matvec(&x).add(&params.bias));
        let rhs = relaxation_rhs_one_layer(&params, &x, &y);
        assert!(rhs.max_abs() < 1e-15);
    }

    #[test]
    fn rhs_single_neuron_at_zero() {
        let params = single_neuron(0.5, 1.0, 0.0);
        let rhs = relaxation_rhs_one_layer(
            &params,
            &Vector::from_vec(vec![0.0]),
            &Vector::from_vec(vec![0.0]),
        );
        assert!((rhs.get(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn solve_no_recurrence_is_exact() {
        let mut rng = Rng::new(11);
        let params = OneLayerParams::init(2, 3, &mut rng); // lateral starts at zero
        let x = Vector::from_vec(vec![0.3, -0.8]);
        let eq = solve_one_layer(&params, &x, &SolverConfig::default()).unwrap();
        let direct = sigmoid(&params.input_weights.matvec(&x).add(&params.bias));
        assert!(eq.converged);
        assert!(eq.residual_norm < 1e-12);
        assert!(eq.y.sub(&direct).max_abs() < 1e-12);
    }

    #[test]
    fn solve_single_neuron_matches_oracle() {
        let params = single_neuron(0.5, 1.0, 0.0);
        let x = Vector::from_vec(vec![0.0]);
        let eq = solve_one_layer(&params, &x, &SolverConfig::default()).unwrap();
        let oracle = scalar_fixed_point_oracle(0.5, 0.0);
        assert!((oracle - 0.5709).abs() < 5e-5, "oracle moved: {oracle}");
        assert!((eq.y.get(0) - oracle).abs() < 1e-4, "got {}", eq.y.get(0));
    }

    #[test]
    fn solve_random_net_converges_and_is_stable_under_longer_budget() {
        let mut rng = Rng::new(21);
        let mut params = OneLayerParams::init(4, 8, &mut rng);
        for v in params.lateral.data_mut() {
            *v = rng.uniform(-0.3, 0.3);
        }
        let x = Vector::from_vec((0..4).map(|_| rng.uniform(-1.0, 1.0)).collect());

        let eq = solve_one_layer(&params, &x, &SolverConfig::default()).unwrap();
        assert!(eq.residual_norm <= 1e-6, "residual {}", eq.residual_norm);

        let long = SolverConfig { iterations: 300, ..SolverConfig::default() };
        let eq_long = solve_one_layer(&params, &x, &long).unwrap();
        assert!(eq.y.sub(&eq_long.y).max_abs() < 1e-8);
    }

    #[test]
    fn two_layer_decoupled_cascade_matches_feedforward() {
        let mut rng = Rng::new(3);
        let params = TwoLayerParams::init(3, 4, 2, &mut rng); // recurrent blocks start at zero
        let ff = FeedForwardParams {
            hidden_input: params.hidden_input.clone(),
            hidden_bias: params.hidden_bias.clone(),
            output_input: params.output_input.clone(),
            output_bias: params.output_bias.clone(),
        };
        let x = Vector::from_vec(vec![0.1, -0.2, 0.7]);
        let eq = solve_two_layer(&params, &x, &SolverConfig::default()).unwrap();
        let direct = ff.forward(&x);
        assert!(eq.output.sub(&direct).max_abs() < 1e-8);
        assert!(eq.converged);
    }

    #[test]
    fn two_layer_all_zero_gives_half() {
        let params = TwoLayerParams {
            hidden_input: Matrix::zeros(3, 2),
            hidden_lateral: Matrix::zeros(3, 3),
            feedback: Matrix::zeros(3, 2),
            hidden_bias: Vector::zeros(3),
            output_input: Matrix::zeros(2, 3),
            output_lateral: Matrix::zeros(2, 2),
            output_bias: Vector::zeros(2),
        };
        let eq = solve_two_layer(&params, &Vector::zeros(2), &SolverConfig::default()).unwrap();
        for v in eq.hidden.iter().chain(eq.output.iter()) {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn two_layer_random_net_residual_and_stability() {
        let mut rng = Rng::new(17);
        let mut params = TwoLayerParams::init(3, 4, 2, &mut rng);
        for block in [
            &mut params.hidden_lateral,
            &mut params.output_lateral,
            &mut params.feedback,
        ] {
            for v in block.data_mut() {
                *v = rng.uniform(-0.3, 0.3);
            }
        }
        let x = Vector::from_vec(vec![0.4, -0.9, 0.2]);
        let eq = solve_two_layer(&params, &x, &SolverConfig::default()).unwrap();
        assert!(eq.residual_norm <= 1e-6, "residual {}", eq.residual_norm);

        let long = SolverConfig { iterations: 300, ..SolverConfig::default() };
        let eq_long = solve_two_layer(&params, &x, &long).unwrap();
        assert!(eq.hidden.sub(&eq_long.hidden).max_abs() < 1e-8);
        assert!(eq.output.sub(&eq_long.output).max_abs() < 1e-8);
    }

    #[test]
    fn two_layer_equations_hold_simultaneously() {
        let mut rng = Rng::new(29);
        let mut params = TwoLayerParams::init(2, 3, 2, &mut rng);
        for block in [
            &mut params.hidden_lateral,
            &mut params.output_lateral,
            &mut params.feedback,
        ] {
            for v in block.data_mut() {
                *v = rng.uniform(-0.2, 0.2);
            }
        }
        let x = Vector::from_vec(vec![0.5, -0.5]);
        let eq = solve_two_layer(&params, &x, &SolverConfig::default()).unwrap();

        let pre_hidden = params
            .hidden_input
            .matvec(&x)
            .add(&params.hidden_lateral.matvec(&eq.hidden))
            .add(&params.feedback.matvec(&eq.output))
            .add(&params.hidden_bias);
        let pre_output = params
            .output_input
            .matvec(&eq.hidden)
            .add(&params.output_lateral.matvec(&eq.output))
            .add(&params.output_bias);
        assert!(sigmoid(&pre_hidden).sub(&eq.hidden).norm2() <= 1e-6);
        assert!(sigmoid(&pre_output).sub(&eq.output).norm2() <= 1e-6);
    }

    #[test]
    fn euler_one_step_is_iterative_update() {
        let mut rng = Rng::new(13);
        let mut params = OneLayerParams::init(2, 3, &mut rng);
        for v in params.lateral.data_mut() {
            *v = rng.uniform(-0.3, 0.3);
        }
        let x = Vector::from_vec(vec![0.6, -0.1]);
        let eq = euler_iterate(&params, &x, 1.0, 1).unwrap();
        // One step from Y=0: exactly f(Q x + T).
        let expect = sigmoid(&params.input_weights.matvec(&x).add(&params.bias));
        assert!(eq.y.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn euler_feed_forward_fixed_point_immediately() {
        let mut rng = Rng::new(19);
        let params = OneLayerParams::init(2, 3, &mut rng);
        let x = Vector::from_vec(vec![0.6, -0.1]);
        let one = euler_iterate(&params, &x, 1.0, 1).unwrap();
        let many = euler_iterate(&params, &x, 1.0, 40).unwrap();
        assert!(one.y.sub(&many.y).max_abs() < 1e-15);
        assert!(many.residual_norm < 1e-12);
    }

    #[test]
    fn euler_agrees_with_rk4_single_neuron() {
        let params = single_neuron(0.5, 1.0, 0.0);
        let x = Vector::from_vec(vec![0.0]);
        let euler = euler_iterate(&params, &x, 0.5, 200).unwrap();
        let rk4 = solve_one_layer(&params, &x, &SolverConfig::default()).unwrap();
        assert!((euler.y.get(0) - rk4.y.get(0)).abs() < 1e-6);
    }

    #[test]
    fn solver_agreement_rk4_vs_euler() {
        let mut rng = Rng::new(23);
        for _ in 0..5 {
            let mut params = OneLayerParams::init(3, 5, &mut rng);
            for v in params.lateral.data_mut() {
                *v = rng.uniform(-0.3, 0.3);
            }
            let x = Vector::from_vec((0..3).map(|_| rng.uniform(-1.0, 1.0)).collect());
            let rk4 = solve_one_layer(&params, &x, &SolverConfig::default()).unwrap();
            let euler_cfg = SolverConfig::new(SolverMethod::Euler, 1000, 0.1, 1e-6).unwrap();
            let euler = solve_one_layer(&params, &x, &euler_cfg).unwrap();
            assert!(rk4.y.sub(&euler.y).max_abs() < 1e-5);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(SolverConfig::new(SolverMethod::Rk4, 0, 1.0, 1e-6).is_err());
        assert!(SolverConfig::new(SolverMethod::Rk4, 10, 0.0, 1e-6).is_err());
        assert!(SolverConfig::new(SolverMethod::Rk4, 10, 1.5, 1e-6).is_err());
        assert!(SolverConfig::new(SolverMethod::Rk4, 10, 1.0, 0.0).is_err());
    }
}
