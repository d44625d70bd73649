//! Task data: the XOR truth table and damped-oscillator trajectories with
//! train/test assembly and target normalization.
//!
//! Oscillator trajectories are sampled from the closed-form solution of
//! `ẍ + 2δẋ + ω₀²x = 0` in all three damping regimes. Targets (ω₀, δ) are
//! mapped affinely into [0.1, 0.9] so they are reachable by sigmoid outputs.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{Rng, Vector};

const DATASET_HEADER_PREFIX: &str = "# IRNN-PENDULUM v1";
/// Fixed sampling interval of the trajectory.
pub const TRAJECTORY_DT: f64 = 0.1;
/// |delta - omega0| below this selects the critically damped branch.
const CRITICAL_THRESHOLD: f64 = 1e-9;

pub const OMEGA0_RANGE: (f64, f64) = (1.0, 2.0);
pub const DELTA_RANGE: (f64, f64) = (0.0, 2.0);
pub const NORMALIZED_RANGE: (f64, f64) = (0.1, 0.9);

/// One row of the XOR task. The second target is the NOR of the inputs,
/// the sub-problem supervised in semi-gradient mode.
#[derive(Debug, Clone)]
pub struct XorSample {
    pub input: Vector,
    pub xor_target: f64,
    pub nor_target: f64,
}

/// The four XOR rows in truth-table order: (0,0), (0,1), (1,0), (1,1).
pub fn xor_dataset() -> Vec<XorSample> {
    [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        .iter()
        .map(|&(a, b)| XorSample {
            input: Vector::from_vec(vec![a, b]),
            xor_target: if (a != 0.0) ^ (b != 0.0) { 1.0 } else { 0.0 },
            nor_target: if a == 0.0 && b == 0.0 { 1.0 } else { 0.0 },
        })
        .collect()
}

/// One damped-oscillator sample: the sampled trajectory plus the generating
/// parameters.
#[derive(Debug, Clone)]
pub struct OscillatorSample {
    pub trajectory: Vector,
    pub omega0: f64,
    pub delta: f64,
    pub x0: f64,
    pub v0: f64,
}

/// Affine map between physical target ranges and the normalized interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMap {
    pub omega0_range: (f64, f64),
    pub delta_range: (f64, f64),
    pub normalized: (f64, f64),
}

impl Default for TargetMap {
    fn default() -> Self {
        TargetMap {
            omega0_range: OMEGA0_RANGE,
            delta_range: DELTA_RANGE,
            normalized: NORMALIZED_RANGE,
        }
    }
}

impl TargetMap {
    /// Map (ω₀, δ) into normalized coordinates; errors outside the declared
    /// physical ranges.
    pub fn normalize(&self, omega0: f64, delta: f64) -> Result<Vector> {
        let o = affine(omega0, self.omega0_range, self.normalized, "omega0")?;
        let d = affine(delta, self.delta_range, self.normalized, "delta")?;
        Ok(Vector::from_vec(vec![o, d]))
    }

    /// Inverse map. Accepts any finite input: network outputs may land
    /// outside the normalized interval and then denormalize outside the
    /// physical range.
    pub fn denormalize(&self, normalized: &Vector) -> (f64, f64) {
        assert_eq!(normalized.len(), 2, "normalized target must have 2 entries");
        (
            affine_unchecked(normalized.get(0), self.normalized, self.omega0_range),
            affine_unchecked(normalized.get(1), self.normalized, self.delta_range),
        )
    }
}

fn affine(v: f64, from: (f64, f64), to: (f64, f64), name: &str) -> Result<f64> {
    if !(from.0..=from.1).contains(&v) {
        return Err(Error::OutOfRange(format!(
            "{name} = {v} outside [{}, {}]",
            from.0, from.1
        )));
    }
    Ok(affine_unchecked(v, from, to))
}

fn affine_unchecked(v: f64, from: (f64, f64), to: (f64, f64)) -> f64 {
    to.0 + (v - from.0) * (to.1 - to.0) / (from.1 - from.0)
}

/// Dataset-level bookkeeping: trajectory length, sampling step, seed, split
/// sizes and the target normalization in force.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub traj_len: usize,
    pub dt: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub target_map: TargetMap,
}

/// Closed-form damped-oscillator trajectory sampled at `t_k = k·dt`.
///
/// Branches: underdamped (δ < ω₀), critically damped (|δ-ω₀| ≤ 1e-9) and
/// overdamped (δ > ω₀); constants are fixed by x(0) = x0, ẋ(0) = v0.
pub fn oscillator_trajectory(
    omega0: f64,
    delta: f64,
    x0: f64,
    v0: f64,
    len: usize,
    dt: f64,
) -> Result<Vector> {
    if !(omega0 > 0.0) {
        return Err(Error::InvalidArgument(format!("omega0 must be positive, got {omega0}")));
    }
    if delta < 0.0 {
        return Err(Error::InvalidArgument(format!("delta must be non-negative, got {delta}")));
    }
    if len < 2 {
        return Err(Error::InvalidArgument(format!("trajectory length must be >= 2, got {len}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }

    let mut out = Vec::with_capacity(len);
    if (delta - omega0).abs() <= CRITICAL_THRESHOLD {
        // (A + B t) e^{-δt}
        let a = x0;
        let b = v0 + delta * x0;
        for k in 0..len {
            let t = k as f64 * dt;
            out.push((a + b * t) * (-delta * t).exp());
        }
    } else if delta < omega0 {
        // e^{-δt} (A cos ωt + B sin ωt), ω = sqrt(ω₀² - δ²)
        let omega = (omega0 * omega0 - delta * delta).sqrt();
        let a = x0;
        let b = (v0 + delta * x0) / omega;
        for k in 0..len {
            let t = k as f64 * dt;
            out.push((-delta * t).exp() * (a * (omega * t).cos() + b * (omega * t).sin()));
        }
    } else {
        // A e^{r1 t} + B e^{r2 t}, r1,2 = -δ ± sqrt(δ² - ω₀²)
        let s = (delta * delta - omega0 * omega0).sqrt();
        let r1 = -delta + s;
        let r2 = -delta - s;
        let a = (v0 - r2 * x0) / (r1 - r2);
        let b = x0 - a;
        for k in 0..len {
            let t = k as f64 * dt;
            out.push(a * (r1 * t).exp() + b * (r2 * t).exp());
        }
    }
    Ok(Vector::from_vec(out))
}

/// Draw a pendulum dataset: ω₀ ~ U[1,2), δ ~ U[0,2), x0, v0 ~ N(0, 2), with
/// exact-duplicate parameter tuples rejected and redrawn. The first 80% of
/// samples (generation order) are the training split, the rest the test
/// split.
pub fn generate_pendulum_dataset(
    n_samples: usize,
    traj_len: usize,
    seed: u64,
) -> Result<(Vec<OscillatorSample>, DatasetMeta)> {
    if n_samples < 5 {
        return Err(Error::InvalidArgument(format!(
            "need at least 5 samples for a 4:1 split, got {n_samples}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut seen: HashSet<(u64, u64, u64, u64)> = HashSet::with_capacity(n_samples);
    let mut samples = Vec::with_capacity(n_samples);
    while samples.len() < n_samples {
        let omega0 = rng.uniform(OMEGA0_RANGE.0, OMEGA0_RANGE.1);
        let delta = rng.uniform(DELTA_RANGE.0, DELTA_RANGE.1);
        let x0 = rng.normal(0.0, 2.0);
        let v0 = rng.normal(0.0, 2.0);
        let key = (omega0.to_bits(), delta.to_bits(), x0.to_bits(), v0.to_bits());
        if !seen.insert(key) {
            continue;
        }
        let trajectory = oscillator_trajectory(omega0, delta, x0, v0, traj_len, TRAJECTORY_DT)?;
        samples.push(OscillatorSample { trajectory, omega0, delta, x0, v0 });
    }
    let n_test = n_samples / 5;
    let meta = DatasetMeta {
        traj_len,
        dt: TRAJECTORY_DT,
        seed,
        n_train: n_samples - n_test,
        n_test,
        target_map: TargetMap::default(),
    };
    Ok((samples, meta))
}

/// Write the dataset CSV: a version header carrying L, dt and seed, a column
/// header, then one row per sample with 17-significant-digit values and the
/// split tag.
pub fn save_pendulum_dataset(
    samples: &[OscillatorSample],
    meta: &DatasetMeta,
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    writeln!(
        out,
        "{DATASET_HEADER_PREFIX}, L={}, dt={}, seed={}",
        meta.traj_len, meta.dt, meta.seed
    )
    .unwrap();
    let mut columns: Vec<String> = (0..meta.traj_len).map(|k| format!("x_{k}")).collect();
    columns.extend(["omega0", "delta", "x0", "v0", "split"].map(String::from));
    writeln!(out, "{}", columns.join(",")).unwrap();
    for (idx, s) in samples.iter().enumerate() {
        let mut fields: Vec<String> = s.trajectory.iter().map(|v| format!("{v:.16e}")).collect();
        for v in [s.omega0, s.delta, s.x0, s.v0] {
            fields.push(format!("{v:.16e}"));
        }
        fields.push(if idx < meta.n_train { "train" } else { "test" }.to_string());
        writeln!(out, "{}", fields.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_pendulum_dataset(path: &Path) -> Result<(Vec<OscillatorSample>, DatasetMeta)> {
    let text = std::fs::read_to_string(path)?;
    parse_pendulum_dataset(&text)
}

pub fn parse_pendulum_dataset(text: &str) -> Result<(Vec<OscillatorSample>, DatasetMeta)> {
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    if !header.starts_with(DATASET_HEADER_PREFIX) {
        return Err(Error::UnsupportedVersion {
            expected: DATASET_HEADER_PREFIX.into(),
            found: header.chars().take(40).collect(),
        });
    }
    let mut traj_len = None;
    let mut seed = None;
    for part in header[DATASET_HEADER_PREFIX.len()..].split(',') {
        let part = part.trim();
        if let Some(v) = part.strip_prefix("L=") {
            traj_len = v.parse::<usize>().ok();
        } else if let Some(v) = part.strip_prefix("seed=") {
            seed = v.parse::<u64>().ok();
        }
    }
    let traj_len = traj_len.ok_or_else(|| Error::Parse {
        line: 1,
        message: "header missing trajectory length".into(),
    })?;
    let seed = seed.ok_or_else(|| Error::Parse { line: 1, message: "header missing seed".into() })?;

    let (_, columns) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 2, message: "missing column header".into() })?;
    let expected_fields = traj_len + 5;
    if columns.split(',').count() != expected_fields {
        return Err(Error::Parse {
            line: 2,
            message: format!(
                "column header has {} fields, expected {expected_fields}",
                columns.split(',').count()
            ),
        });
    }

    let mut samples = Vec::new();
    let mut n_train = 0;
    let mut n_test = 0;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_fields {
            return Err(Error::Parse {
                line: line_no,
                message: format!("row has {} fields, expected {expected_fields}", fields.len()),
            });
        }
        let mut values = Vec::with_capacity(traj_len + 4);
        for f in &fields[..traj_len + 4] {
            values.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid number `{f}`"),
            })?);
        }
        match fields[expected_fields - 1] {
            "train" => n_train += 1,
            "test" => n_test += 1,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("invalid split tag `{other}`"),
                })
            }
        }
        let trajectory = Vector::from_slice(&values[..traj_len]);
        samples.push(OscillatorSample {
            trajectory,
            omega0: values[traj_len],
            delta: values[traj_len + 1],
            x0: values[traj_len + 2],
            v0: values[traj_len + 3],
        });
    }
    let meta = DatasetMeta {
        traj_len,
        dt: TRAJECTORY_DT,
        seed,
        n_train,
        n_test,
        target_map: TargetMap::default(),
    };
    Ok((samples, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_truth_table() {
        let rows = xor_dataset();
        assert_eq!(rows.len(), 4);
        let expect = [(0.0, 1.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)];
        for (row, (xor, nor)) in rows.iter().zip(expect) {
            assert_eq!(row.xor_target, xor);
            assert_eq!(row.nor_target, nor);
        }
    }

    // RK4 integration of the second-order ODE as a first-order system; the
    // independent oracle for the closed-form trajectories.
    fn rk4_oscillator(omega0: f64, delta: f64, x0: f64, v0: f64, t_end: f64, h: f64) -> Vec<(f64, f64)> {
        let f = |x: f64, v: f64| (v, -2.0 * delta * v - omega0 * omega0 * x);
        let mut out = vec![(0.0, x0)];
        let (mut x, mut v) = (x0, v0);
        let steps = (t_end / h).round() as usize;
        for k in 0..steps {
            let (k1x, k1v) = f(x, v);
            let (k2x, k2v) = f(x + 0.5 * h * k1x, v + 0.5 * h * k1v);
            let (k3x, k3v) = f(x + 0.5 * h * k2x, v + 0.5 * h * k2v);
            let (k4x, k4v) = f(x + h * k3x, v + h * k3v);
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            out.push(((k + 1) as f64 * h, x));
        }
        out
    }

    fn max_abs_deviation(traj: &Vector, dense: &[(f64, f64)], dt: f64, h: f64) -> f64 {
        let per_sample = (dt / h).round() as usize;
        traj.iter()
            .enumerate()
            .map(|(k, &v)| (v - dense[k * per_sample].1).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn trajectory_null_solution() {
        for (omega0, delta) in [(1.0, 0.5), (1.5, 1.5), (1.0, 2.0)] {
            let t = oscillator_trajectory(omega0, delta, 0.0, 0.0, 30, 0.1).unwrap();
            assert!(t.max_abs() == 0.0);
        }
    }

    #[test]
    fn trajectory_undamped_cosine() {
        let t = oscillator_trajectory(1.0, 0.0, 1.0, 0.0, 50, 0.1).unwrap();
        for k in 0..50 {
            assert!((t.get(k) - (0.1 * k as f64).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn trajectory_matches_rk4_all_regimes() {
        let mut rng = Rng::new(131);
        let h = 1e-3;
        let len = 40;
        for regime in 0..3 {
            for _ in 0..5 {
                let omega0 = rng.uniform(1.0, 2.0);
                let delta = match regime {
                    0 => rng.uniform(0.0, omega0 * 0.9),  // underdamped
                    1 => omega0,                          // critical
                    _ => rng.uniform(omega0 * 1.1, 2.5),  // overdamped
                };
                let x0 = rng.normal(0.0, 2.0);
                let v0 = rng.normal(0.0, 2.0);
                let traj =
                    oscillator_trajectory(omega0, delta, x0, v0, len, TRAJECTORY_DT).unwrap();
                assert!((traj.get(0) - x0).abs() < 1e-12);
                let dense =
                    rk4_oscillator(omega0, delta, x0, v0, (len - 1) as f64 * TRAJECTORY_DT, h);
                let dev = max_abs_deviation(&traj, &dense, TRAJECTORY_DT, h);
                assert!(dev <= 1e-6, "regime {regime}: deviation {dev}");
            }
        }
    }

    #[test]
    fn trajectory_regime_continuity() {
        // Branch choice must be continuous across the critical line.
        let (omega0, x0, v0) = (1.3, 0.8, -0.6);
        let lo = oscillator_trajectory(omega0, omega0 - 1e-6, x0, v0, 60, 0.1).unwrap();
        let hi = oscillator_trajectory(omega0, omega0 + 1e-6, x0, v0, 60, 0.1).unwrap();
        assert!(lo.sub(&hi).max_abs() <= 1e-4);

        let mid = oscillator_trajectory(omega0, omega0, x0, v0, 60, 0.1).unwrap();
        assert!(lo.sub(&mid).max_abs() <= 1e-4);
    }

    #[test]
    fn trajectory_energy_decay() {
        let mut rng = Rng::new(137);
        for _ in 0..10 {
            let omega0 = rng.uniform(1.0, 2.0);
            let delta = rng.uniform(0.5, 2.0);
            let x0 = rng.normal(0.0, 2.0);
            let v0 = rng.normal(0.0, 2.0);
            // Long enough that (L-1)·dt >= 4/δ.
            let len = ((4.0 / delta / TRAJECTORY_DT).ceil() as usize + 1).max(40);
            let t = oscillator_trajectory(omega0, delta, x0, v0, len, TRAJECTORY_DT).unwrap();
            let quarter = len / 4;
            let head: f64 = t.data()[..quarter].iter().fold(0.0, |m, v| m.max(v.abs()));
            let tail: f64 = t.data()[len - quarter..].iter().fold(0.0, |m, v| m.max(v.abs()));
            assert!(tail <= head, "no decay: head {head}, tail {tail}");
        }
    }

    #[test]
    fn trajectory_rejects_invalid_parameters() {
        assert!(oscillator_trajectory(0.0, 0.5, 1.0, 0.0, 10, 0.1).is_err());
        assert!(oscillator_trajectory(1.0, -0.1, 1.0, 0.0, 10, 0.1).is_err());
        assert!(oscillator_trajectory(1.0, 0.5, 1.0, 0.0, 1, 0.1).is_err());
        assert!(oscillator_trajectory(1.0, 0.5, 1.0, 0.0, 10, 0.0).is_err());
    }

    #[test]
    fn normalize_endpoints_and_roundtrip() {
        let map = TargetMap::default();
        assert!((map.normalize(1.0, 0.0).unwrap().get(0) - 0.1).abs() < 1e-15);
        assert!((map.normalize(2.0, 0.0).unwrap().get(0) - 0.9).abs() < 1e-15);
        assert!((map.normalize(1.0, 1.0).unwrap().get(1) - 0.5).abs() < 1e-15);
        assert!(map.normalize(2.5, 0.0).is_err());
        assert!(map.normalize(1.5, -0.1).is_err());

        let mut rng = Rng::new(139);
        for _ in 0..1000 {
            let omega0 = rng.uniform(1.0, 2.0);
            let delta = rng.uniform(0.0, 2.0);
            let n = map.normalize(omega0, delta).unwrap();
            let (o, d) = map.denormalize(&n);
            assert!((o - omega0).abs() <= 1e-12);
            assert!((d - delta).abs() <= 1e-12);
        }
    }

    #[test]
    fn dataset_split_ranges_uniqueness_determinism() {
        let (samples, meta) = generate_pendulum_dataset(25, 30, 7).unwrap();
        assert_eq!(meta.n_train, 20);
        assert_eq!(meta.n_test, 5);
        assert_eq!(samples.len(), 25);
        let mut seen = HashSet::new();
        for s in &samples {
            assert!((1.0..2.0).contains(&s.omega0));
            assert!((0.0..2.0).contains(&s.delta));
            assert!(seen.insert((
                s.omega0.to_bits(),
                s.delta.to_bits(),
                s.x0.to_bits(),
                s.v0.to_bits()
            )));
        }
        let (again, _) = generate_pendulum_dataset(25, 30, 7).unwrap();
        for (a, b) in samples.iter().zip(again.iter()) {
            assert_eq!(a.trajectory.data(), b.trajectory.data());
            assert_eq!(a.omega0.to_bits(), b.omega0.to_bits());
        }
    }

    #[test]
    fn dataset_minimum_split() {
        let (_, meta) = generate_pendulum_dataset(5, 10, 1).unwrap();
        assert_eq!(meta.n_train, 4);
        assert_eq!(meta.n_test, 1);
        assert!(generate_pendulum_dataset(4, 10, 1).is_err());
    }

    #[test]
    fn dataset_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pend.csv");
        let (samples, meta) = generate_pendulum_dataset(12, 20, 3).unwrap();
        save_pendulum_dataset(&samples, &meta, &path).unwrap();
        let (loaded, loaded_meta) = load_pendulum_dataset(&path).unwrap();
        assert_eq!(loaded_meta, meta);
        for (a, b) in samples.iter().zip(loaded.iter()) {
            assert_eq!(a.trajectory.data(), b.trajectory.data());
            assert_eq!(a.omega0.to_bits(), b.omega0.to_bits());
            assert_eq!(a.v0.to_bits(), b.v0.to_bits());
        }
    }

    #[test]
    fn dataset_csv_bad_rows_report_line() {
        let (samples, meta) = generate_pendulum_dataset(5, 6, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pend.csv");
        save_pendulum_dataset(&samples, &meta, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let broken = text.replace("train", "banana");
        match parse_pendulum_dataset(&broken) {
            Err(Error::Parse { line, .. }) => assert!(line >= 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
