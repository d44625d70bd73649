//! Batch training, evaluation and multi-run experiments.
//!
//! Each epoch runs a fixed number of Adam steps; batches are the `n_batches`
//! contiguous partitions of the training set, cycled in order across the
//! whole training history. Per sample the equilibrium is solved (training
//! aborts loudly if it does not converge), the gradient is computed per the
//! configured architecture, and the batch-averaged gradient is applied with
//! one Adam state per parameter block.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{DatasetMeta, OscillatorSample, XorSample};
use crate::equilibrium::SolverConfig;
use crate::error::{Error, Result};
use crate::gradient::{
    loss_grads_feedforward, loss_grads_one_layer, loss_grads_two_layer, semi_grads_one_layer,
    semi_grads_two_layer, FeedForwardGrads, OneLayerGrads, TwoLayerGrads,
};
use crate::network::{FeedForwardParams, Model, OneLayerParams, TwoLayerParams};
use crate::numeric::{Rng, Vector};
use crate::optim::AdamState;

/// Trainable architecture: network shape plus gradient route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    OneLayerExact,
    OneLayerSemi,
    TwoLayerExact,
    TwoLayerSemi,
    FeedForward,
}

impl Arch {
    pub fn name(&self) -> &'static str {
        match self {
            Arch::OneLayerExact => "one-layer-exact",
            Arch::OneLayerSemi => "one-layer-semi",
            Arch::TwoLayerExact => "two-layer-exact",
            Arch::TwoLayerSemi => "two-layer-semi",
            Arch::FeedForward => "feedforward",
        }
    }

    pub fn parse(s: &str) -> Result<Arch> {
        match s {
            "one-layer-exact" => Ok(Arch::OneLayerExact),
            "one-layer-semi" => Ok(Arch::OneLayerSemi),
            "two-layer-exact" => Ok(Arch::TwoLayerExact),
            "two-layer-semi" => Ok(Arch::TwoLayerSemi),
            "feedforward" => Ok(Arch::FeedForward),
            other => Err(Error::InvalidArgument(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Training configuration. Batch size is derived: the training set is split
/// into `n_batches` contiguous partitions of near-equal size.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub arch: Arch,
    pub n_in: usize,
    /// Hidden width; ignored by the one-layer architectures.
    pub n_h: usize,
    pub n_out: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub n_batches: usize,
    /// Test evaluation cadence in epochs; the final epoch is always evaluated.
    pub eval_every: usize,
    pub lr: f64,
    pub seed: u64,
    /// Per-output supervision flags; `None` supervises every output.
    pub supervised_mask: Option<Vec<bool>>,
    pub solver: SolverConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_in", self.n_in),
            ("n_out", self.n_out),
            ("epochs", self.epochs),
            ("steps_per_epoch", self.steps_per_epoch),
            ("n_batches", self.n_batches),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
            }
        }
        if let Some(mask) = &self.supervised_mask {
            if mask.len() != self.n_out {
                return Err(Error::InvalidArgument(format!(
                    "mask length {} does not match n_out {}",
                    mask.len(),
                    self.n_out
                )));
            }
            if mask.iter().all(|m| !m) {
                return Err(Error::InvalidArgument("mask supervises no output".into()));
            }
        }
        Ok(())
    }

    /// Derived batch size: `ceil(n_train / n_batches)`; the last batch may be
    /// short.
    pub fn batch_size(&self, n_train: usize) -> usize {
        n_train.div_ceil(self.n_batches)
    }
}

/// One supervised sample.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: Vector,
    pub target: Vector,
}

/// Train/test split of a task.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl SplitData {
    /// The XOR task as a full-batch training set (no test split). In exact
    /// mode only the first output is supervised and the second target slot
    /// is a placeholder; in semi mode the second output is supervised with
    /// the NOR sub-target.
    pub fn xor(samples: &[XorSample], semi: bool) -> SplitData {
        let train = samples
            .iter()
            .map(|s| Sample {
                input: s.input.clone(),
                target: Vector::from_vec(vec![
                    s.xor_target,
                    if semi { s.nor_target } else { 0.0 },
                ]),
            })
            .collect();
        SplitData { train, test: Vec::new() }
    }

    /// Pendulum regression: trajectory in, normalized (ω₀, δ) out, split per
    /// the dataset metadata.
    pub fn from_pendulum(samples: &[OscillatorSample], meta: &DatasetMeta) -> Result<SplitData> {
        let mut train = Vec::with_capacity(meta.n_train);
        let mut test = Vec::with_capacity(meta.n_test);
        for (idx, s) in samples.iter().enumerate() {
            let target = meta.target_map.normalize(s.omega0, s.delta)?;
            let sample = Sample { input: s.trajectory.clone(), target };
            if idx < meta.n_train {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
        Ok(SplitData { train, test })
    }
}

/// Mean squared error over the supervised outputs.
pub fn masked_mse(y: &Vector, target: &Vector, mask: Option<&[bool]>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..y.len() {
        if mask.map_or(true, |m| m[i]) {
            let d = y.get(i) - target.get(i);
            sum += d * d;
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

/// Gradient of [`masked_mse`] with respect to the outputs: `2(y-t)/n` on the
/// supervised entries, zero elsewhere.
pub fn masked_mse_gradient(y: &Vector, target: &Vector, mask: Option<&[bool]>) -> Vector {
    let n_sup = mask
        .map_or(y.len(), |m| m.iter().filter(|&&b| b).count())
        .max(1) as f64;
    let mut out = Vector::zeros(y.len());
    for i in 0..y.len() {
        if mask.map_or(true, |m| m[i]) {
            out.set(i, 2.0 * (y.get(i) - target.get(i)) / n_sup);
        }
    }
    out
}

enum ModelGrads {
    OneLayer(OneLayerGrads),
    TwoLayer(TwoLayerGrads),
    FeedForward(FeedForwardGrads),
}

impl ModelGrads {
    fn zeros_like(model: &Model) -> ModelGrads {
        match model {
            Model::OneLayer(p) => ModelGrads::OneLayer(OneLayerGrads::zeros_like(p)),
            Model::TwoLayer(p) => ModelGrads::TwoLayer(TwoLayerGrads::zeros_like(p)),
            Model::FeedForward(p) => ModelGrads::FeedForward(FeedForwardGrads::zeros_like(p)),
        }
    }

    fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            ModelGrads::OneLayer(g) => g.blocks_mut().into_iter().collect(),
            ModelGrads::TwoLayer(g) => g.blocks_mut().into_iter().collect(),
            ModelGrads::FeedForward(g) => g.blocks_mut().into_iter().collect(),
        }
    }

    fn blocks(&self) -> Vec<&[f64]> {
        match self {
            ModelGrads::OneLayer(g) => g.blocks().iter().map(|(_, b)| *b).collect(),
            ModelGrads::TwoLayer(g) => g.blocks().iter().map(|(_, b)| *b).collect(),
            ModelGrads::FeedForward(g) => g.blocks().iter().map(|(_, b)| *b).collect(),
        }
    }

    fn accumulate(&mut self, other: &ModelGrads) {
        for (mine, theirs) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (a, b) in mine.iter_mut().zip(theirs.iter()) {
                *a += b;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for block in self.blocks_mut() {
            for v in block.iter_mut() {
                *v *= s;
            }
        }
    }
}

fn model_blocks_mut(model: &mut Model) -> Vec<&mut Vec<f64>> {
    match model {
        Model::OneLayer(p) => p.blocks_mut().into_iter().collect(),
        Model::TwoLayer(p) => p.blocks_mut().into_iter().collect(),
        Model::FeedForward(p) => p.blocks_mut().into_iter().collect(),
    }
}

fn model_block_lens(model: &Model) -> Vec<usize> {
    match model {
        Model::OneLayer(p) => p.blocks().iter().map(|(_, b)| b.len()).collect(),
        Model::TwoLayer(p) => p.blocks().iter().map(|(_, b)| b.len()).collect(),
        Model::FeedForward(p) => p.blocks().iter().map(|(_, b)| b.len()).collect(),
    }
}

/// Fresh Adam states aligned with the model's parameter blocks.
pub fn adam_states_for(model: &Model, lr: f64) -> Vec<AdamState> {
    model_block_lens(model)
        .into_iter()
        .map(|len| AdamState::new(len, lr))
        .collect()
}

/// Initialize the model an architecture trains.
pub fn init_model(cfg: &TrainConfig) -> Model {
    let mut rng = Rng::new(cfg.seed);
    match cfg.arch {
        Arch::OneLayerExact | Arch::OneLayerSemi => {
            Model::OneLayer(OneLayerParams::init(cfg.n_in, cfg.n_out, &mut rng))
        }
        Arch::TwoLayerExact | Arch::TwoLayerSemi => {
            Model::TwoLayer(TwoLayerParams::init(cfg.n_in, cfg.n_h, cfg.n_out, &mut rng))
        }
        Arch::FeedForward => {
            Model::FeedForward(FeedForwardParams::init(cfg.n_in, cfg.n_h, cfg.n_out, &mut rng))
        }
    }
}

/// Forward, per-sample loss and gradient for one sample under the configured
/// gradient route. Non-converged equilibria are errors here (training mode).
fn sample_grads(
    model: &Model,
    arch: Arch,
    sample: &Sample,
    mask: Option<&[bool]>,
    solver: &SolverConfig,
) -> Result<(ModelGrads, f64, Vector)> {
    match (model, arch) {
        (Model::OneLayer(p), Arch::OneLayerExact | Arch::OneLayerSemi) => {
            let eq = p.forward(&sample.input, solver)?;
            if !eq.converged {
                return Err(Error::NotConverged {
                    residual: eq.residual_norm,
                    tolerance: solver.tolerance,
                });
            }
            let mse = masked_mse(&eq.y, &sample.target, mask);
            let dl = masked_mse_gradient(&eq.y, &sample.target, mask);
            let grads = if arch == Arch::OneLayerExact {
                loss_grads_one_layer(p, &sample.input, &eq, &dl)?
            } else {
                semi_grads_one_layer(p, &sample.input, &eq, &dl)
            };
            Ok((ModelGrads::OneLayer(grads), mse, dl))
        }
        (Model::TwoLayer(p), Arch::TwoLayerExact | Arch::TwoLayerSemi) => {
            let eq = p.forward(&sample.input, solver)?;
            if !eq.converged {
                return Err(Error::NotConverged {
                    residual: eq.residual_norm,
                    tolerance: solver.tolerance,
                });
            }
            let mse = masked_mse(&eq.output, &sample.target, mask);
            let dl = masked_mse_gradient(&eq.output, &sample.target, mask);
            let grads = if arch == Arch::TwoLayerExact {
                loss_grads_two_layer(p, &sample.input, &eq, &dl)?
            } else {
                semi_grads_two_layer(p, &sample.input, &eq, &dl)
            };
            Ok((ModelGrads::TwoLayer(grads), mse, dl))
        }
        (Model::FeedForward(p), Arch::FeedForward) => {
            let (hidden, output) = p.forward_trace(&sample.input);
            let mse = masked_mse(&output, &sample.target, mask);
            let dl = masked_mse_gradient(&output, &sample.target, mask);
            let grads = loss_grads_feedforward(p, &sample.input, &hidden, &output, &dl);
            Ok((ModelGrads::FeedForward(grads), mse, dl))
        }
        _ => Err(Error::InvalidArgument(format!(
            "model kind {:?} does not match architecture {}",
            model.kind(),
            arch.name()
        ))),
    }
}

/// Test instrumentation: observe the per-sample loss gradient at every step.
pub struct TrainHooks<'a> {
    pub on_loss_gradient: &'a mut dyn FnMut(usize, usize, &Vector),
}

/// One epoch of training: `steps_per_epoch` Adam steps over the cycled batch
/// partitions. Returns the mean per-sample MSE over everything processed
/// this epoch. `epoch_index` is 0-based and fixes where the batch cycle
/// resumes.
pub fn train_epoch(
    model: &mut Model,
    data: &SplitData,
    cfg: &TrainConfig,
    states: &mut [AdamState],
    epoch_index: usize,
    mut hooks: Option<&mut TrainHooks>,
) -> Result<f64> {
    cfg.validate()?;
    let n_train = data.train.len();
    if n_train == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if cfg.n_batches > n_train {
        return Err(Error::InvalidArgument(format!(
            "n_batches {} exceeds training set size {n_train}",
            cfg.n_batches
        )));
    }
    let batch_size = cfg.batch_size(n_train);
    let mask = cfg.supervised_mask.as_deref();

    let mut mse_sum = 0.0;
    let mut processed = 0usize;
    for s in 0..cfg.steps_per_epoch {
        let global_step = epoch_index * cfg.steps_per_epoch + s;
        let batch_index = global_step % cfg.n_batches;
        let lo = batch_index * batch_size;
        let hi = (lo + batch_size).min(n_train);
        let batch = &data.train[lo..hi];

        let mut acc = ModelGrads::zeros_like(model);
        for (offset, sample) in batch.iter().enumerate() {
            let sample_index = lo + offset;
            let (grads, mse, dl) = sample_grads(model, cfg.arch, sample, mask, &cfg.solver)
                .map_err(|e| Error::TrainStep {
                    step: global_step,
                    sample: sample_index,
                    source: Box::new(e),
                })?;
            if let Some(h) = hooks.as_deref_mut() {
                (h.on_loss_gradient)(global_step, sample_index, &dl);
            }
            acc.accumulate(&grads);
            mse_sum += mse;
            processed += 1;
        }
        // Batch gradients are averaged so the learning rate is independent
        // of batch size.
        acc.scale(1.0 / batch.len() as f64);
        for (state, (param, grad)) in states
            .iter_mut()
            .zip(model_blocks_mut(model).into_iter().zip(acc.blocks()))
        {
            state.step(param, grad);
        }
    }
    Ok(mse_sum / processed as f64)
}

/// Evaluation report; non-convergence is counted, not fatal.
#[derive(Debug, Clone, Copy)]
pub struct EvalReport {
    pub mse: f64,
    pub non_converged: usize,
}

/// Mean per-sample MSE of the model outputs against the (masked) targets.
/// Returns 0 for an empty sample list.
pub fn evaluate_mse(
    model: &Model,
    samples: &[Sample],
    mask: Option<&[bool]>,
    solver: &SolverConfig,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Ok(EvalReport { mse: 0.0, non_converged: 0 });
    }
    let mut sum = 0.0;
    let mut non_converged = 0usize;
    for sample in samples {
        let (y, converged) = model.output(&sample.input, solver)?;
        if !converged {
            non_converged += 1;
        }
        sum += masked_mse(&y, &sample.target, mask);
    }
    Ok(EvalReport { mse: sum / samples.len() as f64, non_converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One metrics record: per run, epoch and split.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub run_id: usize,
    pub epoch: usize,
    pub split: Split,
    pub mse: f64,
    pub wallclock_s: f64,
}

/// Cross-run aggregate for one (epoch, split) cell.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub epoch: usize,
    pub split: Split,
    pub mean_mse: f64,
    /// Standard deviation of the mean; zero for a single run.
    pub sem_mse: f64,
    pub n_runs: usize,
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: usize,
    pub rows: Vec<MetricsRow>,
    pub final_model: Model,
    pub final_test_mse: Option<f64>,
}

/// Train one model to completion, recording a train row per epoch and a test
/// row every `eval_every` epochs plus the final epoch.
pub fn run_single(cfg: &TrainConfig, run_id: usize, seed: u64, data: &SplitData) -> Result<RunResult> {
    let cfg = TrainConfig { seed, ..cfg.clone() };
    cfg.validate()?;
    let started = Instant::now();
    let mut model = init_model(&cfg);
    let mut states = adam_states_for(&model, cfg.lr);
    let mask = cfg.supervised_mask.as_deref();

    let mut rows = Vec::new();
    let mut final_test_mse = None;
    for epoch in 1..=cfg.epochs {
        let train_mse = train_epoch(&mut model, data, &cfg, &mut states, epoch - 1, None)?;
        rows.push(MetricsRow {
            run_id,
            epoch,
            split: Split::Train,
            mse: train_mse,
            wallclock_s: started.elapsed().as_secs_f64(),
        });
        let is_eval_epoch = epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
        if is_eval_epoch && !data.test.is_empty() {
            let report = evaluate_mse(&model, &data.test, mask, &cfg.solver)?;
            final_test_mse = Some(report.mse);
            rows.push(MetricsRow {
                run_id,
                epoch,
                split: Split::Test,
                mse: report.mse,
                wallclock_s: started.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(RunResult { run_id, rows, final_model: model, final_test_mse })
}

/// All metrics and aggregates of a multi-run experiment. Failed runs are
/// recorded and excluded from the aggregates.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub metrics: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<RunResult>,
    pub failures: Vec<(usize, String)>,
}

/// Run `n_runs` independent trainings with seeds `cfg.seed + run_id`.
/// `jobs > 1` executes runs concurrently; each run owns its model, RNG and
/// Adam states, and output ordering is canonical either way.
pub fn run_experiment(
    cfg: &TrainConfig,
    data: &SplitData,
    n_runs: usize,
    jobs: usize,
) -> ExperimentResult {
    let run_one = |run_id: usize| run_single(cfg, run_id, cfg.seed + run_id as u64, data);

    let results: Vec<Result<RunResult>> = if jobs <= 1 {
        (0..n_runs).map(run_one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool construction cannot fail with these settings");
        pool.install(|| (0..n_runs).into_par_iter().map(run_one).collect())
    };

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (run_id, result) in results.into_iter().enumerate() {
        match result {
            Ok(r) => runs.push(r),
            Err(e) => failures.push((run_id, e.to_string())),
        }
    }

    let mut metrics = Vec::new();
    for run in &runs {
        metrics.extend(run.rows.iter().cloned());
    }

    let mut cells: BTreeMap<(usize, Split), Vec<f64>> = BTreeMap::new();
    for row in &metrics {
        cells.entry((row.epoch, row.split)).or_default().push(row.mse);
    }
    let summary = cells
        .into_iter()
        .map(|((epoch, split), values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let sem = if n > 1 {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { epoch, split, mean_mse: mean, sem_mse: sem, n_runs: n }
        })
        .collect();

    ExperimentResult { metrics, summary, runs, failures }
}

/// Metrics CSV: `run_id,epoch,split,mse,wallclock_s`, deterministic row order.
pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("run_id,epoch,split,mse,wallclock_s\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.16e},{:.3}",
            r.run_id,
            r.epoch,
            r.split.name(),
            r.mse,
            r.wallclock_s
        )
        .unwrap();
    }
    out
}

/// Summary CSV: `epoch,split,mean_mse,sem_mse,n_runs`.
pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("epoch,split,mean_mse,sem_mse,n_runs\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{}",
            r.epoch,
            r.split.name(),
            r.mean_mse,
            r.sem_mse,
            r.n_runs
        )
        .unwrap();
    }
    out
}

pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    std::fs::write(path, metrics_to_csv(rows))?;
    Ok(())
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    std::fs::write(path, summary_to_csv(rows))?;
    Ok(())
}
