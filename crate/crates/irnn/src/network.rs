//! Parameter containers, initialization, forward evaluation and persistence
//! for the three architectures: one-layer implicit, two-layer implicit, and
//! the two-layer feed-forward baseline.
//!
//! Initialization follows a fixed draw order (row-major, input weights before
//! biases, hidden layer before output layer) so a seed fully determines the
//! parameters. Recurrent blocks start at zero; all other entries are drawn
//! uniformly from [-0.5, 0.5).

use std::fmt::Write as _;
use std::path::Path;

use crate::equilibrium::{self, Equilibrium, SolverConfig, TwoLayerEquilibrium};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Matrix, Rng, Vector};

const MODEL_HEADER: &str = "IRNN-MODEL v1";
const INIT_LO: f64 = -0.5;
const INIT_HI: f64 = 0.5;

/// One-layer implicit network: `Y = f(input_weights·X + lateral·Y + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneLayerParams {
    /// Q: n_out × n_in.
    pub input_weights: Matrix,
    /// W, the lateral connections within the layer: n_out × n_out.
    pub lateral: Matrix,
    /// T: n_out.
    pub bias: Vector,
}

/// Two-layer fully recurrent implicit network. The hidden layer receives the
/// external input plus feed-back from the output layer; both layers carry
/// lateral connections.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerParams {
    /// Q_L2: n_h × n_in.
    pub hidden_input: Matrix,
    /// W_L2: n_h × n_h.
    pub hidden_lateral: Matrix,
    /// R, feed-back from the output layer into the hidden layer: n_h × n_out.
    pub feedback: Matrix,
    /// T_L2: n_h.
    pub hidden_bias: Vector,
    /// Q_L1: n_out × n_h.
    pub output_input: Matrix,
    /// W_L1: n_out × n_out.
    pub output_lateral: Matrix,
    /// T_L1: n_out.
    pub output_bias: Vector,
}

/// Two-layer feed-forward baseline: the two-layer architecture with every
/// recurrent block absent.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardParams {
    pub hidden_input: Matrix,
    pub hidden_bias: Vector,
    pub output_input: Matrix,
    pub output_bias: Vector,
}

impl OneLayerParams {
    /// Initialize with lateral weights at zero and the rest uniform in
    /// [-0.5, 0.5). Draw order: input weights row-major, then biases.
    pub fn init(n_in: usize, n_out: usize, rng: &mut Rng) -> Self {
        assert!(n_in > 0 && n_out > 0, "dimensions must be positive");
        let input_weights = draw_matrix(n_out, n_in, rng);
        let bias = draw_vector(n_out, rng);
        OneLayerParams {
            input_weights,
            lateral: Matrix::zeros(n_out, n_out),
            bias,
        }
    }

    pub fn n_in(&self) -> usize {
        self.input_weights.cols()
    }

    pub fn n_out(&self) -> usize {
        self.bias.len()
    }

    /// Solve the implicit activation to equilibrium.
    pub fn forward(&self, x: &Vector, cfg: &SolverConfig) -> Result<Equilibrium> {
        equilibrium::solve_one_layer(self, x, cfg)
    }

    /// Parameter blocks in serialization order.
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

impl TwoLayerParams {
    /// Initialize with all recurrent blocks (both laterals and the feed-back)
    /// at zero. Draw order: hidden layer before output layer, input weights
    /// before biases.
    pub fn init(n_in: usize, n_h: usize, n_out: usize, rng: &mut Rng) -> Self {
        assert!(n_in > 0 && n_h > 0 && n_out > 0, "dimensions must be positive");
        let hidden_input = draw_matrix(n_h, n_in, rng);
        let hidden_bias = draw_vector(n_h, rng);
        let output_input = draw_matrix(n_out, n_h, rng);
        let output_bias = draw_vector(n_out, rng);
        TwoLayerParams {
            hidden_input,
            hidden_lateral: Matrix::zeros(n_h, n_h),
            feedback: Matrix::zeros(n_h, n_out),
            hidden_bias,
            output_input,
            output_lateral: Matrix::zeros(n_out, n_out),
            output_bias,
        }
    }

    pub fn n_in(&self) -> usize {
        self.hidden_input.cols()
    }

    pub fn n_h(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn n_out(&self) -> usize {
        self.output_bias.len()
    }

    pub fn forward(&self, x: &Vector, cfg: &SolverConfig) -> Result<TwoLayerEquilibrium> {
        equilibrium::solve_two_layer(self, x, cfg)
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

impl FeedForwardParams {
    /// Same draws, in the same order, as [`TwoLayerParams::init`], so equal
    /// seeds give matching starting points for the baseline comparison.
    pub fn init(n_in: usize, n_h: usize, n_out: usize, rng: &mut Rng) -> Self {
        assert!(n_in > 0 && n_h > 0 && n_out > 0, "dimensions must be positive");
        let hidden_input = draw_matrix(n_h, n_in, rng);
        let hidden_bias = draw_vector(n_h, rng);
        let output_input = draw_matrix(n_out, n_h, rng);
        let output_bias = draw_vector(n_out, rng);
        FeedForwardParams { hidden_input, hidden_bias, output_input, output_bias }
    }

    pub fn n_in(&self) -> usize {
        self.hidden_input.cols()
    }

    pub fn n_h(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn n_out(&self) -> usize {
        self.output_bias.len()
    }

    /// Plain two-pass evaluation; no solver involved.
    pub fn forward(&self, x: &Vector) -> Vector {
        let hidden = sigmoid(&self.hidden_input.matvec(x).add(&self.hidden_bias));
        sigmoid(&self.output_input.matvec(&hidden).add(&self.output_bias))
    }

    /// Hidden and output activations, for gradient assembly.
    pub fn forward_trace(&self, x: &Vector) -> (Vector, Vector) {
        let hidden = sigmoid(&self.hidden_input.matvec(x).add(&self.hidden_bias));
        let output = sigmoid(&self.output_input.matvec(&hidden).add(&self.output_bias));
        (hidden, output)
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

fn draw_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.uniform(INIT_LO, INIT_HI)).collect();
    Matrix::from_vec(rows, cols, data)
}

fn draw_vector(len: usize, rng: &mut Rng) -> Vector {
    Vector::from_vec((0..len).map(|_| rng.uniform(INIT_LO, INIT_HI)).collect())
}

/// Architecture tag used by parameter counting and the model file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    OneLayer,
    TwoLayer,
    FeedForward,
}

impl ArchKind {
    pub fn name(&self) -> &'static str {
        match self {
            ArchKind::OneLayer => "one-layer",
            ArchKind::TwoLayer => "two-layer",
            ArchKind::FeedForward => "feedforward",
        }
    }
}

/// Number of stored scalars for an architecture.
///
/// Feed-forward: `n_h·n_in + n_h + n_out·n_h + n_out`; the two-layer implicit
/// network adds `n_h² + n_out² + n_h·n_out` for the recurrent blocks.
pub fn count_parameters(kind: ArchKind, n_in: usize, n_h: usize, n_out: usize) -> Result<usize> {
    if n_in == 0 || n_out == 0 {
        return Err(Error::InvalidArgument(format!(
            "degenerate dimensions: n_in={n_in}, n_out={n_out}"
        )));
    }
    match kind {
        ArchKind::OneLayer => Ok(n_out * n_in + n_out * n_out + n_out),
        ArchKind::FeedForward | ArchKind::TwoLayer => {
            if n_h == 0 {
                return Err(Error::InvalidArgument("degenerate dimensions: n_h=0".into()));
            }
            let ff = n_h * n_in + n_h + n_out * n_h + n_out;
            match kind {
                ArchKind::FeedForward => Ok(ff),
                _ => Ok(ff + n_h * n_h + n_out * n_out + n_h * n_out),
            }
        }
    }
}

/// A parameter container of any architecture, for persistence and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    OneLayer(OneLayerParams),
    TwoLayer(TwoLayerParams),
    FeedForward(FeedForwardParams),
}

impl Model {
    pub fn kind(&self) -> ArchKind {
        match self {
            Model::OneLayer(_) => ArchKind::OneLayer,
            Model::TwoLayer(_) => ArchKind::TwoLayer,
            Model::FeedForward(_) => ArchKind::FeedForward,
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Model::OneLayer(p) => p.n_out(),
            Model::TwoLayer(p) => p.n_out(),
            Model::FeedForward(p) => p.n_out(),
        }
    }

    /// Output activation of the model for one input. Implicit architectures
    /// are relaxed to equilibrium; the returned flag is false when the
    /// equilibrium missed the solver tolerance.
    pub fn output(&self, x: &Vector, cfg: &SolverConfig) -> Result<(Vector, bool)> {
        match self {
            Model::OneLayer(p) => {
                let eq = p.forward(x, cfg)?;
                Ok((eq.y, eq.converged))
            }
            Model::TwoLayer(p) => {
                let eq = p.forward(x, cfg)?;
                Ok((eq.output, eq.converged))
            }
            Model::FeedForward(p) => Ok((p.forward(x), true)),
        }
    }
}

/// Serialize a model to the versioned text format.
///
/// Line 1 is the version header, line 2 the architecture and dimensions, then
/// one `[matrix NAME rows cols]` block per parameter, rows of space-separated
/// decimals with 17 significant digits (round-trip exact for f64). Vectors
/// are stored as 1×n blocks.
pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn model_to_string(model: &Model) -> String {
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    match model {
        Model::OneLayer(p) => {
            writeln!(out, "arch one-layer n_in {} n_h - n_out {}", p.n_in(), p.n_out()).unwrap();
            write_block(&mut out, "Q", &p.input_weights);
            write_block(&mut out, "W", &p.lateral);
            write_vector_block(&mut out, "T", &p.bias);
        }
        Model::TwoLayer(p) => {
            writeln!(
                out,
                "arch two-layer n_in {} n_h {} n_out {}",
                p.n_in(),
                p.n_h(),
                p.n_out()
            )
            .unwrap();
            write_block(&mut out, "Q_L2", &p.hidden_input);
            write_block(&mut out, "W_L2", &p.hidden_lateral);
            write_block(&mut out, "R", &p.feedback);
            write_vector_block(&mut out, "T_L2", &p.hidden_bias);
            write_block(&mut out, "Q_L1", &p.output_input);
            write_block(&mut out, "W_L1", &p.output_lateral);
            write_vector_block(&mut out, "T_L1", &p.output_bias);
        }
        Model::FeedForward(p) => {
            writeln!(
                out,
                "arch feedforward n_in {} n_h {} n_out {}",
                p.n_in(),
                p.n_h(),
                p.n_out()
            )
            .unwrap();
            write_block(&mut out, "Q_L2", &p.hidden_input);
            write_vector_block(&mut out, "T_L2", &p.hidden_bias);
            write_block(&mut out, "Q_L1", &p.output_input);
            write_vector_block(&mut out, "T_L1", &p.output_bias);
        }
    }
    out
}

fn write_block(out: &mut String, name: &str, m: &Matrix) {
    writeln!(out, "[matrix {} {} {}]", name, m.rows(), m.cols()).unwrap();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
}

fn write_vector_block(out: &mut String, name: &str, v: &Vector) {
    writeln!(out, "[matrix {} 1 {}]", name, v.len()).unwrap();
    let row: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)?;
    model_from_str(&text)
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let mut parser = ModelParser::new(text);
    parser.parse()
}

struct ModelParser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> ModelParser<'a> {
    fn new(text: &'a str) -> Self {
        ModelParser { lines: text.lines().enumerate() }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            // 1-based line numbers in errors
            Some((idx, line)) => Ok((idx + 1, line)),
            None => Err(Error::Parse { line: 0, message: "unexpected end of file".into() }),
        }
    }

    fn parse(&mut self) -> Result<Model> {
        let (line_no, header) = self.next_line()?;
        if header.trim() != MODEL_HEADER {
            return Err(Error::UnsupportedVersion {
                expected: MODEL_HEADER.into(),
                found: header.trim().to_string(),
            });
        }
        let _ = line_no;

        let (line_no, arch_line) = self.next_line()?;
        let tokens: Vec<&str> = arch_line.split_whitespace().collect();
        if tokens.len() != 8 || tokens[0] != "arch" || tokens[2] != "n_in" || tokens[4] != "n_h" || tokens[6] != "n_out" {
            return Err(Error::Parse {
                line: line_no,
                message: format!("malformed arch line: `{arch_line}`"),
            });
        }
        let n_in = parse_count(tokens[3], line_no)?;
        let n_out = parse_count(tokens[7], line_no)?;

        match tokens[1] {
            "one-layer" => {
                let q = self.read_matrix("Q", n_out, n_in)?;
                let w = self.read_matrix("W", n_out, n_out)?;
                let t = self.read_vector("T", n_out)?;
                Ok(Model::OneLayer(OneLayerParams { input_weights: q, lateral: w, bias: t }))
            }
            "two-layer" => {
                let n_h = parse_count(tokens[5], line_no)?;
                let q2 = self.read_matrix("Q_L2", n_h, n_in)?;
                let w2 = self.read_matrix("W_L2", n_h, n_h)?;
                let r = self.read_matrix("R", n_h, n_out)?;
                let t2 = self.read_vector("T_L2", n_h)?;
                let q1 = self.read_matrix("Q_L1", n_out, n_h)?;
                let w1 = self.read_matrix("W_L1", n_out, n_out)?;
                let t1 = self.read_vector("T_L1", n_out)?;
                Ok(Model::TwoLayer(TwoLayerParams {
                    hidden_input: q2,
                    hidden_lateral: w2,
                    feedback: r,
                    hidden_bias: t2,
                    output_input: q1,
                    output_lateral: w1,
                    output_bias: t1,
                }))
            }
            "feedforward" => {
                let n_h = parse_count(tokens[5], line_no)?;
                let q2 = self.read_matrix("Q_L2", n_h, n_in)?;
                let t2 = self.read_vector("T_L2", n_h)?;
                let q1 = self.read_matrix("Q_L1", n_out, n_h)?;
                let t1 = self.read_vector("T_L1", n_out)?;
                Ok(Model::FeedForward(FeedForwardParams {
                    hidden_input: q2,
                    hidden_bias: t2,
                    output_input: q1,
                    output_bias: t1,
                }))
            }
            other => Err(Error::Parse {
                line: line_no,
                message: format!("unknown architecture `{other}`"),
            }),
        }
    }

    fn read_matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let (line_no, header) = self.next_line()?;
        let expected = format!("[matrix {name} {rows} {cols}]");
        if header.trim() != expected {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `{expected}`, found `{}`", header.trim()),
            });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line_no, row) = self.next_line().map_err(|_| Error::Parse {
                line: 0,
                message: format!("truncated file inside matrix {name}"),
            })?;
            let values: Vec<&str> = row.split_whitespace().collect();
            if values.len() != cols {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!(
                        "matrix {name}: expected {cols} values per row, found {}",
                        values.len()
                    ),
                });
            }
            for v in values {
                let parsed: f64 = v.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("matrix {name}: invalid number `{v}`"),
                })?;
                if !parsed.is_finite() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("matrix {name}: non-finite entry `{v}`"),
                    });
                }
                data.push(parsed);
            }
        }
        Ok(Matrix::from_vec(rows, cols, data))
    }

    fn read_vector(&mut self, name: &str, len: usize) -> Result<Vector> {
        let m = self.read_matrix(name, 1, len)?;
        Ok(Vector::from_slice(m.data()))
    }
}

fn parse_count(token: &str, line: usize) -> Result<usize> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid count `{token}`"),
    })
}
