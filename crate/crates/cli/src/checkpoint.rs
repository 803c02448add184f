//! Versioned checkpoint file: a plain-text header listing dimensions and
//! hyperparameters, then little-endian f64 sections for the flat
//! parameter vector, the Adam moments, the loss history and the feature
//! normalization statistics. Round-trips are byte-identical.

use std::path::Path;

use lddmd_core::data::NormalizationStats;
use lddmd_core::maps::CouplingParity;
use lddmd_core::rng::Rng;
use lddmd_core::{
    AdditiveCoupling, AdamState, BlockRotation, LddmdModel, LossMode, PolyMlp, ReadoutMlp,
    TrainConfig,
};

use crate::csvio::fmt_f64;
use crate::error::CliError;

const MAGIC: &str = "lddmd-checkpoint";
const VERSION: u64 = 1;

/// Everything needed to resume or evaluate a run: the training config,
/// model shape, flat parameters, optimizer state, loss history and the
/// feature standardization applied to the training data (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub input_dim: usize,
    pub output_dim: usize,
    pub dt: f64,
    pub params: Vec<f64>,
    pub adam: AdamState,
    pub loss_history: Vec<f64>,
    pub normalization: Option<NormalizationStats>,
}

fn corrupt(path: &Path, what: &str) -> CliError {
    CliError::input(format!("{}: corrupt checkpoint: {what}", path.display()))
}

impl Checkpoint {
    /// Rebuilds the model: a skeleton of the recorded shape whose
    /// parameters are then overwritten by the stored flat vector.
    pub fn model(&self) -> Result<LddmdModel<f64>, CliError> {
        let c = &self.config;
        let mut rng = Rng::new(0);
        let phi = AdditiveCoupling::identity(c.latent_dim, c.coupling_parity)?;
        let f = PolyMlp::zero_output_init(
            self.input_dim,
            c.coupling_hidden_dim,
            c.coupling_hidden_layers,
            c.latent_dim,
            &mut rng,
        )?;
        let g = ReadoutMlp::random_init(
            c.latent_dim,
            c.readout_hidden_dim,
            self.output_dim,
            &mut rng,
        )?;
        let k = BlockRotation::undamped(vec![0.0; c.latent_dim / 2], self.dt)?;
        let skeleton = LddmdModel::new(phi, f, g, k, vec![0.0; c.latent_dim])?;
        let expected = skeleton.group_sizes().total();
        if expected != self.params.len() {
            return Err(CliError::input(format!(
                "checkpoint parameter vector has {} entries but the recorded \
                 dimensions require {expected}",
                self.params.len()
            )));
        }
        Ok(skeleton.with_flat_params(&self.params)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let c = &self.config;
        let n_norm = self.normalization.as_ref().map_or(0, |s| s.means.len());
        let mut header = String::new();
        header.push_str(&format!("{MAGIC} v{VERSION}\n"));
        let mut kv = |k: &str, v: String| header.push_str(&format!("{k} {v}\n"));
        kv("input_dim", self.input_dim.to_string());
        kv("output_dim", self.output_dim.to_string());
        kv("latent_dim", c.latent_dim.to_string());
        kv("coupling_hidden_layers", c.coupling_hidden_layers.to_string());
        kv("coupling_hidden_dim", c.coupling_hidden_dim.to_string());
        kv("readout_hidden_dim", c.readout_hidden_dim.to_string());
        kv("batch_size", c.batch_size.to_string());
        kv("learning_rate", fmt_f64(c.learning_rate));
        kv("beta1", fmt_f64(c.beta1));
        kv("beta2", fmt_f64(c.beta2));
        kv("epsilon", fmt_f64(c.epsilon));
        kv("epochs", c.epochs.to_string());
        kv("seed", c.seed.to_string());
        kv(
            "loss_mode",
            match c.loss_mode {
                LossMode::Norm => "norm".into(),
                LossMode::Squared => "squared".into(),
            },
        );
        kv("mu_learnable", c.mu_learnable.to_string());
        kv(
            "gradient_clip",
            c.gradient_clip.map_or("none".into(), fmt_f64),
        );
        kv(
            "coupling_parity",
            match c.coupling_parity {
                CouplingParity::OddModified => "odd".into(),
                CouplingParity::EvenModified => "even".into(),
            },
        );
        kv("dt", fmt_f64(self.dt));
        kv("n_params", self.params.len().to_string());
        kv("adam_step", self.adam.step.to_string());
        kv("n_loss", self.loss_history.len().to_string());
        kv("n_norm", n_norm.to_string());
        header.push_str("end-header\n");

        let mut bytes = header.into_bytes();
        let mut put = |values: &[f64]| {
            for v in values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        };
        put(&self.params);
        put(&self.adam.m);
        put(&self.adam.v);
        put(&self.loss_history);
        if let Some(stats) = &self.normalization {
            put(&stats.means);
            put(&stats.stds);
        }
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let marker = b"end-header\n";
        let header_end = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or_else(|| corrupt(path, "header terminator not found"))?;
        let header = std::str::from_utf8(&bytes[..header_end])
            .map_err(|_| corrupt(path, "header is not UTF-8"))?;
        let body = &bytes[header_end + marker.len()..];

        let mut lines = header.lines();
        let first = lines.next().unwrap_or("");
        let expected_first = format!("{MAGIC} v{VERSION}");
        if first != expected_first {
            if first.starts_with(MAGIC) {
                return Err(CliError::input(format!(
                    "{}: unsupported checkpoint version {:?} (this build reads v{VERSION})",
                    path.display(),
                    first.trim_start_matches(MAGIC).trim()
                )));
            }
            return Err(corrupt(path, "not a checkpoint file"));
        }
        let mut fields = std::collections::HashMap::new();
        for line in lines {
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| corrupt(path, "malformed header line"))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| -> Result<String, CliError> {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| corrupt(path, &format!("missing header field {k:?}")))
        };
        let parse_usize = |k: &str| -> Result<usize, CliError> {
            get(k)?
                .parse()
                .map_err(|_| corrupt(path, &format!("bad integer in field {k:?}")))
        };
        let parse_f64 = |k: &str| -> Result<f64, CliError> {
            get(k)?
                .parse()
                .map_err(|_| corrupt(path, &format!("bad number in field {k:?}")))
        };

        let config = TrainConfig {
            latent_dim: parse_usize("latent_dim")?,
            batch_size: parse_usize("batch_size")?,
            learning_rate: parse_f64("learning_rate")?,
            beta1: parse_f64("beta1")?,
            beta2: parse_f64("beta2")?,
            epsilon: parse_f64("epsilon")?,
            epochs: parse_usize("epochs")?,
            seed: parse_usize("seed")? as u64,
            coupling_hidden_layers: parse_usize("coupling_hidden_layers")?,
            coupling_hidden_dim: parse_usize("coupling_hidden_dim")?,
            readout_hidden_dim: parse_usize("readout_hidden_dim")?,
            loss_mode: match get("loss_mode")?.as_str() {
                "norm" => LossMode::Norm,
                "squared" => LossMode::Squared,
                _ => return Err(corrupt(path, "bad loss_mode")),
            },
            mu_learnable: match get("mu_learnable")?.as_str() {
                "true" => true,
                "false" => false,
                _ => return Err(corrupt(path, "bad mu_learnable")),
            },
            gradient_clip: match get("gradient_clip")?.as_str() {
                "none" => None,
                v => Some(
                    v.parse()
                        .map_err(|_| corrupt(path, "bad gradient_clip"))?,
                ),
            },
            coupling_parity: match get("coupling_parity")?.as_str() {
                "odd" => CouplingParity::OddModified,
                "even" => CouplingParity::EvenModified,
                _ => return Err(corrupt(path, "bad coupling_parity")),
            },
        };
        let input_dim = parse_usize("input_dim")?;
        let output_dim = parse_usize("output_dim")?;
        let dt = parse_f64("dt")?;
        let n_params = parse_usize("n_params")?;
        let adam_step = parse_usize("adam_step")? as u64;
        let n_loss = parse_usize("n_loss")?;
        let n_norm = parse_usize("n_norm")?;

        let expected_body = 8 * (3 * n_params + n_loss + 2 * n_norm);
        if body.len() != expected_body {
            return Err(corrupt(
                path,
                &format!(
                    "body holds {} bytes, header promises {expected_body} (truncated or padded)",
                    body.len()
                ),
            ));
        }
        let mut offset = 0usize;
        let mut take = |count: usize| -> Vec<f64> {
            let section = &body[offset..offset + 8 * count];
            offset += 8 * count;
            section
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        let params = take(n_params);
        let m = take(n_params);
        let v = take(n_params);
        let loss_history = take(n_loss);
        let normalization = (n_norm > 0).then(|| NormalizationStats {
            means: take(n_norm),
            stds: take(n_norm),
        });

        Ok(Checkpoint {
            config,
            input_dim,
            output_dim,
            dt,
            params,
            adam: AdamState {
                m,
                v,
                step: adam_step,
            },
            loss_history,
            normalization,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lddmd_core::{generate_synthetic, init_model, SyntheticConfig};

    fn sample() -> Checkpoint {
        let data = generate_synthetic(&SyntheticConfig {
            n_steps: 64,
            ..Default::default()
        })
        .unwrap();
        let config = TrainConfig::synthetic(3);
        let model = init_model(&config, &data.noisy).unwrap();
        let params = model.flat_params();
        let n = params.len();
        Checkpoint {
            config,
            input_dim: 2,
            output_dim: 1,
            dt: 1.0,
            params,
            adam: AdamState::new(n),
            loss_history: vec![1.5, 1.2, 0.9],
            normalization: Some(NormalizationStats {
                means: vec![0.25, -1.5],
                stds: vec![1.0, 2.0],
            }),
        }
    }

    #[test]
    fn round_trip_is_byte_identical_and_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        let checkpoint = sample();
        checkpoint.save(&a).unwrap();
        let loaded = Checkpoint::load(&a).unwrap();
        assert_eq!(loaded, checkpoint);
        loaded.save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let checkpoint = sample();
        checkpoint.save(&path).unwrap();
        let before = checkpoint.model().unwrap();
        let after = Checkpoint::load(&path).unwrap().model().unwrap();
        let mut rng = Rng::new(11);
        for probe in 0..100 {
            let x = [rng.uniform_symmetric(3.0), rng.uniform_symmetric(3.0)];
            let p0 = before.predict_s(probe, &x).unwrap();
            let p1 = after.predict_s(probe, &x).unwrap();
            assert_eq!(p0, p1, "probe {probe} diverged");
        }
    }

    #[test]
    fn truncated_file_is_rejected_without_partial_state() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        sample().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 9);
        std::fs::write(&path, bytes).unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(err.to_string().contains("corrupt checkpoint"), "{err}");
    }

    #[test]
    fn version_mismatch_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        sample().save(&path).unwrap();
        let text = std::fs::read(&path).unwrap();
        let patched: Vec<u8> = [
            format!("{MAGIC} v999\n").into_bytes(),
            text.splitn(2, |&b| b == b'\n').nth(1).unwrap().to_vec(),
        ]
        .concat();
        std::fs::write(&path, patched).unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported checkpoint version"), "{err}");
    }

    #[test]
    fn dimension_mismatch_surfaces_at_model_rebuild() {
        let mut checkpoint = sample();
        checkpoint.params.pop();
        let err = checkpoint.model().unwrap_err();
        assert!(err.to_string().contains("recorded"), "{err}");
    }

    #[test]
    fn non_checkpoint_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        std::fs::write(&path, "t,x1,x2,y\n0,1,2,3\nend-header\n").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
