//! The four subcommands. Each returns `Ok(())` for exit code 0 or a
//! `CliError` carrying the exit code (2 input/config, 3 numerical abort).

use std::path::{Path, PathBuf};

use lddmd_core::data::NormalizationStats;
use lddmd_core::eval::{latent_rows, prediction_rows};
use lddmd_core::train::TrainError;
use lddmd_core::{evaluate, generate_synthetic, init_model, inspect, NseReport, Predictor, TimeSeriesDataset};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::csvio;
use crate::error::CliError;

fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Writes the synthetic benchmark series: clean.csv, noisy.csv and the
/// ground-truth latent trajectory latent_truth.csv.
pub fn cmd_generate(config_path: &Path) -> Result<(), CliError> {
    let (config, base) = RunConfig::load(config_path)?;
    let data = generate_synthetic(&config.synthetic_config())?;
    let out_dir = RunConfig::resolve(&base, &config.paths.out_dir);
    ensure_out_dir(&out_dir)?;

    csvio::write_series(&out_dir.join("clean.csv"), &data.clean)?;
    csvio::write_series(&out_dir.join("noisy.csv"), &data.noisy)?;
    let latent: Vec<(u64, Vec<f64>)> = data
        .latent
        .iter()
        .enumerate()
        .map(|(j, z)| (j as u64, z.to_vec()))
        .collect();
    csvio::write_latent(&out_dir.join("latent_truth.csv"), &latent)?;

    println!(
        "generated {} steps (noise sigma_y = {}, sigma_x = {}) into {}",
        data.clean.n,
        csvio::fmt_f64(data.sigma_y),
        csvio::fmt_f64(data.sigma_x),
        out_dir.display()
    );
    Ok(())
}

/// Loads the configured dataset CSV, optionally standardizing features.
fn load_dataset(
    config: &RunConfig,
    base: &Path,
) -> Result<(TimeSeriesDataset, Option<NormalizationStats>), CliError> {
    let data_path = config
        .paths
        .data
        .as_ref()
        .ok_or_else(|| CliError::input("config is missing paths.data"))?;
    let schema = config
        .schema
        .as_ref()
        .ok_or_else(|| CliError::input("config is missing the [schema] section"))?;
    let dataset = csvio::load_csv(&RunConfig::resolve(base, data_path), schema)?;
    if schema.standardize {
        let (standardized, stats) = dataset.standardize()?;
        Ok((standardized, Some(stats)))
    } else {
        Ok((dataset, None))
    }
}

fn split_counts(config: &RunConfig, n: usize) -> usize {
    config.split.as_ref().map_or(n / 2, |s| s.train_count)
}

fn print_report(report: &NseReport) {
    println!(
        "train      NSE {:.4}  (n = {}, residual min/mean/max {:.4}/{:.4}/{:.4})",
        report.nse_train,
        report.n_train,
        report.residuals_train.min,
        report.residuals_train.mean,
        report.residuals_train.max
    );
    println!(
        "validation NSE {:.4}  (n = {}, residual min/mean/max {:.4}/{:.4}/{:.4})",
        report.nse_validation,
        report.n_validation,
        report.residuals_validation.min,
        report.residuals_validation.mean,
        report.residuals_validation.max
    );
}

/// Trains per the config, writing model.ckpt and loss.csv. A numerical
/// abort still writes the last finite state, to model.last-good.ckpt.
pub fn cmd_train(config_path: &Path) -> Result<(), CliError> {
    let (config, base) = RunConfig::load(config_path)?;
    let (dataset, normalization) = load_dataset(&config, &base)?;
    let (train_set, validation_set) = dataset.split(split_counts(&config, dataset.n))?;
    let train_config = config.train_config();
    let out_dir = RunConfig::resolve(&base, &config.paths.out_dir);
    ensure_out_dir(&out_dir)?;

    let model = init_model(&train_config, &train_set)?;
    match lddmd_core::train(model, &train_set, &train_config) {
        Ok(out) => {
            let checkpoint = Checkpoint {
                config: train_config,
                input_dim: dataset.d,
                output_dim: dataset.m,
                dt: dataset.dt,
                params: out.model.flat_params(),
                adam: out.adam,
                loss_history: out.loss_history.clone(),
                normalization,
            };
            let ckpt_path = out_dir.join("model.ckpt");
            checkpoint.save(&ckpt_path)?;
            csvio::write_loss(&out_dir.join("loss.csv"), &out.loss_history)?;
            let report = evaluate(&out.model, &train_set, &validation_set)?;
            print_report(&report);
            println!("checkpoint written to {}", ckpt_path.display());
            Ok(())
        }
        Err(TrainError::Abort(abort)) => {
            let checkpoint = Checkpoint {
                config: train_config,
                input_dim: dataset.d,
                output_dim: dataset.m,
                dt: dataset.dt,
                params: abort.last_good.flat_params(),
                adam: abort.adam,
                loss_history: abort.loss_history.clone(),
                normalization,
            };
            let ckpt_path = out_dir.join("model.last-good.ckpt");
            checkpoint.save(&ckpt_path)?;
            csvio::write_loss(&out_dir.join("loss.csv"), &abort.loss_history)?;
            Err(CliError::Abort(format!(
                "training aborted at epoch {}: {}; last-good checkpoint written to {}",
                abort.epoch,
                abort.reason,
                ckpt_path.display()
            )))
        }
        Err(TrainError::Other(e)) => Err(e.into()),
    }
}

/// Deterministic data-parallel prediction: rows are chunked by index and
/// reassembled in order, so the output is identical for any thread count.
fn parallel_prediction_rows(
    model: &lddmd_core::LddmdModel<f64>,
    dataset: &TimeSeriesDataset,
    threads: usize,
) -> Result<Vec<(u64, f64, f64, f64)>, CliError> {
    if threads <= 1 {
        return Ok(prediction_rows(model, dataset)?);
    }
    let chunk = dataset.n.div_ceil(threads);
    let results: Vec<Result<Vec<(u64, f64, f64, f64)>, lddmd_core::Error>> =
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads {
                let lo = (t * chunk).min(dataset.n);
                let hi = ((t + 1) * chunk).min(dataset.n);
                handles.push(scope.spawn(move || {
                    let mut rows = Vec::with_capacity(hi - lo);
                    for i in lo..hi {
                        let j = dataset.global_index(i);
                        let pred = model.predict(j, dataset.row_x(i))?;
                        rows.push((j, j as f64 * dataset.dt, dataset.row_y(i)[0], pred[0]));
                    }
                    Ok(rows)
                }));
            }
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
    let mut rows = Vec::with_capacity(dataset.n);
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Evaluates a checkpoint on the configured dataset and split, writing
/// predictions.csv and latent.csv.
pub fn cmd_eval(config_path: &Path, checkpoint_path: &Path, threads: usize) -> Result<(), CliError> {
    let (config, base) = RunConfig::load(config_path)?;
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let model = checkpoint.model()?;

    let (mut dataset, _) = {
        // When the checkpoint carries normalization stats they take
        // precedence over recomputing from the evaluation data.
        let mut cfg = config.clone();
        if checkpoint.normalization.is_some() {
            if let Some(schema) = cfg.schema.as_mut() {
                schema.standardize = false;
            }
        }
        load_dataset(&cfg, &base)?
    };
    if let Some(stats) = &checkpoint.normalization {
        if stats.means.len() != dataset.d {
            return Err(CliError::input(format!(
                "checkpoint normalization covers {} features but the dataset has {}",
                stats.means.len(),
                dataset.d
            )));
        }
        dataset.apply_standardization(stats);
    }
    if model.input_dim() != dataset.d || model.output_dim() != dataset.m {
        return Err(CliError::input(format!(
            "checkpoint model is {}->{} but the dataset is {}->{}",
            model.input_dim(),
            model.output_dim(),
            dataset.d,
            dataset.m
        )));
    }

    let train_count = split_counts(&config, dataset.n);
    let (train_set, validation_set) = dataset.split(train_count)?;
    let report = evaluate(&model, &train_set, &validation_set)?;
    print_report(&report);

    let out_dir = RunConfig::resolve(&base, &config.paths.out_dir);
    ensure_out_dir(&out_dir)?;
    let rows = parallel_prediction_rows(&model, &dataset, threads.max(1))?;
    let train_end = dataset.t0_index + train_count as u64;
    csvio::write_predictions(&out_dir.join("predictions.csv"), &rows, train_end)?;
    csvio::write_latent(&out_dir.join("latent.csv"), &latent_rows(&model, &dataset)?)?;
    println!("exports written to {}", out_dir.display());
    Ok(())
}

/// Prints the learned-parameter report and writes a JSON sidecar next to
/// the checkpoint.
pub fn cmd_inspect(checkpoint_path: &Path) -> Result<(), CliError> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let model = checkpoint.model()?;
    let report = inspect(&model, checkpoint.config.mu_learnable);

    let fmt_vec = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!(
        "model {} -> {} through latent dimension {}",
        report.input_dim, report.output_dim, report.latent_dim
    );
    println!("omega  [{}]", fmt_vec(&report.omegas));
    let mu_tag = if report.mu_frozen { " (frozen)" } else { "" };
    println!("mu     [{}]{mu_tag}", fmt_vec(&report.mus));
    println!("z0     [{}]", fmt_vec(&report.z0));
    println!(
        "parameters: {} total, {} learnable",
        report.total_params, report.learnable_params
    );
    println!(
        "parameter norms: phi {:.6}, f {:.6}, g {:.6}",
        report.phi_norm, report.f_norm, report.g_norm
    );

    let sidecar_path = sidecar_path(checkpoint_path);
    let sidecar = serde_json::json!({
        "input_dim": report.input_dim,
        "latent_dim": report.latent_dim,
        "output_dim": report.output_dim,
        "omegas": report.omegas,
        "mus": report.mus,
        "mu_frozen": report.mu_frozen,
        "z0": report.z0,
        "total_params": report.total_params,
        "learnable_params": report.learnable_params,
        "phi_norm": report.phi_norm,
        "f_norm": report.f_norm,
        "g_norm": report.g_norm,
    });
    let text = serde_json::to_string_pretty(&sidecar).expect("report serializes");
    std::fs::write(&sidecar_path, text + "\n").map_err(|e| CliError::io(&sidecar_path, e))?;
    println!("report written to {}", sidecar_path.display());
    Ok(())
}

/// `model.ckpt` gets `model.ckpt.json` alongside it.
pub fn sidecar_path(checkpoint_path: &Path) -> PathBuf {
    let mut name = checkpoint_path.as_os_str().to_os_string();
    name.push(".json");
    PathBuf::from(name)
}
