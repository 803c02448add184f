//! Datasets: the synthetic benchmark generator, noise injection,
//! standardization and temporal splitting.

use alloc::string::String;
use alloc::vec::Vec;

use crate::autodiff::Scalar;
use crate::dynamics::BlockRotation;
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::rng::Rng;

/// Per-column mean/std of the feature matrix, stored so the same
/// transform can be reapplied at prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Paired input/target sequences with a shared time step and an absolute
/// index origin. Row `i` carries global time index `t0_index + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    /// Row-major N x d inputs.
    pub x: Vec<f64>,
    /// Row-major N x m targets.
    pub y: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub dt: f64,
    pub t0_index: u64,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub normalization: Option<NormalizationStats>,
}

impl TimeSeriesDataset {
    pub fn from_rows(
        x: Vec<f64>,
        y: Vec<f64>,
        d: usize,
        m: usize,
        dt: f64,
    ) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::Config("d and m must be positive".into()));
        }
        if x.len() % d != 0 || y.len() % m != 0 || x.len() / d != y.len() / m {
            return Err(Error::Shape {
                context: "dataset rows",
                expected: x.len() / d,
                actual: y.len() / m,
            });
        }
        let n = x.len() / d;
        if n == 0 {
            return Err(Error::Config("dataset must contain at least one row".into()));
        }
        for (i, v) in x.iter().chain(y.iter()).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(alloc::format!("dataset entry {i}")));
            }
        }
        Ok(Self {
            x,
            y,
            n,
            d,
            m,
            dt,
            t0_index: 0,
            feature_names: (0..d).map(|i| alloc::format!("x{i}")).collect(),
            target_names: (0..m).map(|i| alloc::format!("y{i}")).collect(),
            normalization: None,
        })
    }

    pub fn row_x(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn row_y(&self, i: usize) -> &[f64] {
        &self.y[i * self.m..(i + 1) * self.m]
    }

    /// Absolute time index of row `i`.
    pub fn global_index(&self, i: usize) -> u64 {
        self.t0_index + i as u64
    }

    /// Column `c` of the target matrix.
    pub fn target_column(&self, c: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.row_y(i)[c]).collect()
    }

    /// Adds i.i.d. Gaussian noise per entry; deterministic in the seed.
    pub fn with_noise(&self, sigma_x: f64, sigma_y: f64, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut out = self.clone();
        if sigma_x > 0.0 {
            for v in out.x.iter_mut() {
                *v += sigma_x * rng.gaussian();
            }
        }
        if sigma_y > 0.0 {
            for v in out.y.iter_mut() {
                *v += sigma_y * rng.gaussian();
            }
        }
        out
    }

    /// Z-scores the feature columns (population std, ddof = 0); targets
    /// stay in physical units. Returns the stats for reuse.
    pub fn standardize(&self) -> Result<(Self, NormalizationStats)> {
        if self.n < 2 {
            return Err(Error::Config(
                "standardization needs at least two rows".into(),
            ));
        }
        let mut means = Vec::with_capacity(self.d);
        let mut stds = Vec::with_capacity(self.d);
        for c in 0..self.d {
            let mean = (0..self.n).map(|i| self.row_x(i)[c]).sum::<f64>() / self.n as f64;
            let var = (0..self.n)
                .map(|i| {
                    let delta = self.row_x(i)[c] - mean;
                    delta * delta
                })
                .sum::<f64>()
                / self.n as f64;
            let std = libm::sqrt(var);
            if std == 0.0 {
                return Err(Error::Config(alloc::format!(
                    "feature column '{}' has zero variance",
                    self.feature_names[c]
                )));
            }
            means.push(mean);
            stds.push(std);
        }
        let stats = NormalizationStats { means, stds };
        let mut out = self.clone();
        out.apply_standardization(&stats);
        Ok((out, stats))
    }

    /// Applies previously computed stats (e.g. train stats to validation).
    pub fn apply_standardization(&mut self, stats: &NormalizationStats) {
        for i in 0..self.n {
            for c in 0..self.d {
                let v = &mut self.x[i * self.d + c];
                *v = (*v - stats.means[c]) / stats.stds[c];
            }
        }
        self.normalization = Some(stats.clone());
    }

    /// Contiguous temporal split. Validation rows keep their absolute
    /// time indices (they continue from `train_count`).
    pub fn split(&self, train_count: usize) -> Result<(Self, Self)> {
        if train_count == 0 || train_count >= self.n {
            return Err(Error::Config(alloc::format!(
                "train_count must be in 1..{}, got {train_count}",
                self.n
            )));
        }
        let mut train = self.clone();
        train.x.truncate(train_count * self.d);
        train.y.truncate(train_count * self.m);
        train.n = train_count;
        let mut validation = self.clone();
        validation.x.drain(..train_count * self.d);
        validation.y.drain(..train_count * self.m);
        validation.n = self.n - train_count;
        validation.t0_index = self.t0_index + train_count as u64;
        Ok((train, validation))
    }
}

/// Configuration of the synthetic benchmark system.
///
/// The noise levels are an assumption of this artifact: noise is additive
/// i.i.d. Gaussian, by default on the target only, with sigma equal to 5%
/// of the clean target's standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_steps: usize,
    /// None selects the default 5%-of-std level.
    pub noise_sigma_y: Option<f64>,
    pub noise_sigma_x: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_steps: 2000,
            noise_sigma_y: None,
            noise_sigma_x: 0.0,
            seed: 0,
        }
    }
}

/// Angular frequency of the observed-state rotation block.
pub const SYNTH_OMEGA_X: f64 = core::f64::consts::PI / 100.0;
/// Angular frequency of the latent rotation block, pi / (100 sqrt(10)).
pub fn synth_omega_z() -> f64 {
    core::f64::consts::PI / (100.0 * libm::sqrt(10.0))
}

/// psi_1(x) = (2(x1 - sin x2), x2 / 4).
pub fn psi1(x: &[f64]) -> [f64; 2] {
    [2.0 * (x[0] - libm::sin(x[1])), x[1] / 4.0]
}

/// Closed-form inverse of psi_1: (u1/2 + sin(4 u2), 4 u2).
pub fn psi1_inv(u: &[f64]) -> [f64; 2] {
    [u[0] / 2.0 + libm::sin(4.0 * u[1]), 4.0 * u[1]]
}

/// psi_2(z) = (2(z1 - z2^2 - 3), 3 z2).
pub fn psi2(z: &[f64]) -> [f64; 2] {
    [2.0 * (z[0] - z[1] * z[1] - 3.0), 3.0 * z[1]]
}

/// Closed-form inverse of psi_2: (v1/2 + (v2/3)^2 + 3, v2/3).
pub fn psi2_inv(v: &[f64]) -> [f64; 2] {
    let z2 = v[1] / 3.0;
    [v[0] / 2.0 + z2 * z2 + 3.0, z2]
}

/// Ground-truth coupling f(x) = (x1^2 + x2^2, x1 - x2).
pub fn synth_coupling(x: &[f64]) -> [f64; 2] {
    [x[0] * x[0] + x[1] * x[1], x[0] - x[1]]
}

/// Ground-truth readout y = softplus(-z1 - 0.75 z2 + 1.5).
pub fn synth_readout(z: &[f64]) -> f64 {
    (-z[0] - 0.75 * z[1] + 1.5).softplus()
}

/// Full output of the generator: clean data, its noisy copy and the
/// ground-truth latent trajectory for diagnostics.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub clean: TimeSeriesDataset,
    pub noisy: TimeSeriesDataset,
    pub latent: Vec<[f64; 2]>,
    pub sigma_y: f64,
    pub sigma_x: f64,
}

/// Evolves the benchmark system recursively: joint state (x, z) advanced
/// through the block rotation conjugated by (psi1, coupling + psi2),
/// target read out through the softplus map. Started from
/// Phi^{-1}((0,1), (1,1)).
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticData> {
    if config.n_steps < 2 {
        return Err(Error::Config(alloc::format!(
            "n_steps must be at least 2, got {}",
            config.n_steps
        )));
    }
    let k1 = BlockRotation::undamped(alloc::vec![SYNTH_OMEGA_X], 1.0)?;
    let k2 = BlockRotation::undamped(alloc::vec![synth_omega_z()], 1.0)?;

    // (x0, z0) = Phi^{-1}([0,1], [1,1]).
    let mut x = psi1_inv(&[0.0, 1.0]);
    let fx0 = synth_coupling(&x);
    let mut z = psi2_inv(&[1.0 - fx0[0], 1.0 - fx0[1]]);

    let n = config.n_steps;
    let mut xs = Vec::with_capacity(2 * n);
    let mut ys = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for _ in 0..n {
        xs.extend_from_slice(&x);
        ys.push(synth_readout(&z));
        latent.push(z);
        // One step of the joint map (Phi^-1 o K o Phi).
        let u = psi1(&x);
        let fx = synth_coupling(&x);
        let v = [fx[0] + psi2(&z)[0], fx[1] + psi2(&z)[1]];
        let u_next = k1.apply(&u)?;
        let v_next = k2.apply(&v)?;
        x = psi1_inv(&u_next);
        let f_next = synth_coupling(&x);
        z = psi2_inv(&[v_next[0] - f_next[0], v_next[1] - f_next[1]]);
    }

    let mut clean = TimeSeriesDataset::from_rows(xs, ys, 2, 1, 1.0)?;
    clean.feature_names = alloc::vec!["x1".into(), "x2".into()];
    clean.target_names = alloc::vec!["y".into()];

    let y_mean = clean.y.iter().sum::<f64>() / n as f64;
    let y_var = clean.y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
    let sigma_y = config
        .noise_sigma_y
        .unwrap_or(0.05 * libm::sqrt(y_var));
    let noisy = clean.with_noise(config.noise_sigma_x, sigma_y, config.seed);

    Ok(SyntheticData {
        clean,
        noisy,
        latent,
        sigma_y,
        sigma_x: config.noise_sigma_x,
    })
}

/// The benchmark's ground truth written in the telescoped latent form,
/// i.e. as a prediction map (j, x) -> y. Used for self-consistency
/// checks: on clean generated data it is error-free.
#[derive(Debug, Clone)]
pub struct GroundTruthPredictor {
    k: BlockRotation<f64>,
    /// Telescope start: f(x^0) + psi2(z^0).
    z0_tilde: [f64; 2],
}

impl GroundTruthPredictor {
    pub fn new() -> Self {
        let x0 = psi1_inv(&[0.0, 1.0]);
        let fx0 = synth_coupling(&x0);
        let z0 = psi2_inv(&[1.0 - fx0[0], 1.0 - fx0[1]]);
        let pz0 = psi2(&z0);
        Self {
            k: BlockRotation::undamped(alloc::vec![synth_omega_z()], 1.0).unwrap(),
            z0_tilde: [fx0[0] + pz0[0], fx0[1] + pz0[1]],
        }
    }
}

impl Default for GroundTruthPredictor {
    fn default() -> Self {
        Self::new()
    }
}

impl Predictor for GroundTruthPredictor {
    fn input_dim(&self) -> usize {
        2
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn latent_dim(&self) -> usize {
        2
    }
    fn latent_state(&self, j: u64, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 {
            return Err(Error::Shape {
                context: "ground-truth predictor input",
                expected: 2,
                actual: x.len(),
            });
        }
        let driver = self.k.apply_power(j, &self.z0_tilde)?;
        let fx = synth_coupling(x);
        let z = psi2_inv(&[driver[0] - fx[0], driver[1] - fx[1]]);
        Ok(z.to_vec())
    }
    fn predict(&self, j: u64, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.latent_state(j, x)?;
        Ok(alloc::vec![synth_readout(&z)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn initial_conditions_match_closed_forms() {
        let data = generate_synthetic(&SyntheticConfig {
            n_steps: 2,
            ..Default::default()
        })
        .unwrap();
        let x0 = data.clean.row_x(0);
        assert!((x0[0] - libm::sin(4.0)).abs() < 1e-12); // sin 4 = -0.7568...
        assert!((x0[1] - 4.0).abs() < 1e-12);
        let z0 = data.latent[0];
        assert!((z0[0] - -1.10406).abs() < 1e-4);
        assert!((z0[1] - 1.91893).abs() < 1e-4);
        assert!((data.clean.row_y(0)[0] - 1.4364).abs() < 1e-4);
    }

    #[test]
    fn x_series_is_200_periodic() {
        let data = generate_synthetic(&SyntheticConfig {
            n_steps: 600,
            ..Default::default()
        })
        .unwrap();
        for i in 0..400 {
            let a = data.clean.row_x(i);
            let b = data.clean.row_x(i + 200);
            assert!((a[0] - b[0]).abs() < 1e-6, "row {i}");
            assert!((a[1] - b[1]).abs() < 1e-6, "row {i}");
        }
    }

    #[test]
    fn ground_truth_predictor_matches_generator() {
        let data = generate_synthetic(&SyntheticConfig {
            n_steps: 2000,
            ..Default::default()
        })
        .unwrap();
        let gt = GroundTruthPredictor::new();
        for i in (0..2000).step_by(7) {
            let z = gt
                .latent_state(data.clean.global_index(i), data.clean.row_x(i))
                .unwrap();
            assert!((z[0] - data.latent[i][0]).abs() < 1e-8, "row {i}");
            assert!((z[1] - data.latent[i][1]).abs() < 1e-8, "row {i}");
            let y = gt
                .predict(data.clean.global_index(i), data.clean.row_x(i))
                .unwrap();
            assert!((y[0] - data.clean.row_y(i)[0]).abs() < 1e-8, "row {i}");
        }
    }

    #[test]
    fn noise_is_seeded_and_optional() {
        let config = SyntheticConfig {
            n_steps: 50,
            seed: 9,
            ..Default::default()
        };
        let a = generate_synthetic(&config).unwrap();
        let b = generate_synthetic(&config).unwrap();
        assert_eq!(a.noisy, b.noisy);
        assert_ne!(a.noisy.y, a.clean.y);
        assert_eq!(a.noisy.x, a.clean.x); // sigma_x defaults to 0

        let silent = a.clean.with_noise(0.0, 0.0, 1);
        assert_eq!(silent, a.clean);
    }

    #[test]
    fn standardize_hand_case() {
        let ds = TimeSeriesDataset::from_rows(vec![0.0, 2.0], vec![5.0, 6.0], 1, 1, 1.0).unwrap();
        let (std, stats) = ds.standardize().unwrap();
        assert_eq!(std.x, vec![-1.0, 1.0]); // ddof = 0
        assert_eq!(stats.means, vec![1.0]);
        assert_eq!(stats.stds, vec![1.0]);
        assert_eq!(std.y, ds.y); // targets untouched

        // Already standardized column stays put.
        let (again, _) = std.standardize().unwrap();
        assert!((again.x[0] - -1.0).abs() < 1e-12);
        assert!((again.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standardize_rejects_constant_column() {
        let ds = TimeSeriesDataset::from_rows(vec![3.0, 3.0], vec![1.0, 2.0], 1, 1, 1.0).unwrap();
        assert!(ds.standardize().is_err());
    }

    #[test]
    fn split_preserves_global_indices() {
        let ds =
            TimeSeriesDataset::from_rows((0..10).map(|i| i as f64).collect(), (0..10).map(|i| i as f64).collect(), 1, 1, 1.0)
                .unwrap();
        let (train, val) = ds.split(6).unwrap();
        assert_eq!(train.n, 6);
        assert_eq!(val.n, 4);
        assert_eq!(val.t0_index, 6);
        assert_eq!(val.global_index(0), 6);
        assert_eq!(val.global_index(3), 9);
        assert_eq!(val.row_x(0)[0], 6.0);

        let (_, singleton) = ds.split(9).unwrap();
        assert_eq!(singleton.n, 1);
        assert!(ds.split(0).is_err());
        assert!(ds.split(10).is_err());
    }

    #[test]
    fn rejects_too_short_series() {
        assert!(generate_synthetic(&SyntheticConfig {
            n_steps: 1,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn rejects_non_finite_entries() {
        assert!(TimeSeriesDataset::from_rows(vec![f64::NAN], vec![1.0], 1, 1, 1.0).is_err());
    }
}
