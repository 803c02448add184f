//! Nash-Sutcliffe efficiency, split evaluation and model inspection.

use alloc::vec::Vec;

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::model::{LddmdModel, Predictor};

/// Min/mean/max of the per-step residuals of one split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// NSE per split. Each split's NSE uses that split's own target mean;
/// validation predictions use global (extrapolation) time indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NseReport {
    pub nse_train: f64,
    pub nse_validation: f64,
    pub n_train: usize,
    pub n_validation: usize,
    pub residuals_train: ResidualSummary,
    pub residuals_validation: ResidualSummary,
}

/// Nash-Sutcliffe efficiency: 1 - sum (y - y_hat)^2 / sum (y - mean)^2.
/// 1 is perfect, 0 matches the mean predictor; undefined for constant
/// observations.
pub fn nse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape {
            context: "nse series",
            expected: y_true.len(),
            actual: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::Config("nse needs at least two observations".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let denom: f64 = y_true.iter().map(|&y| (y - mean) * (y - mean)).sum();
    if denom == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let sse: f64 = y_true
        .iter()
        .zip(y_pred.iter())
        .map(|(&y, &p)| (y - p) * (y - p))
        .sum();
    Ok(1.0 - sse / denom)
}

fn split_eval<P: Predictor + ?Sized>(
    model: &P,
    dataset: &TimeSeriesDataset,
) -> Result<(f64, ResidualSummary)> {
    let mut y_true = Vec::with_capacity(dataset.n);
    let mut y_pred = Vec::with_capacity(dataset.n);
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for i in 0..dataset.n {
        let pred = model.predict(dataset.global_index(i), dataset.row_x(i))?;
        let truth = dataset.row_y(i)[0];
        let r = truth - pred[0];
        min = min.min(r);
        max = max.max(r);
        sum += r;
        y_true.push(truth);
        y_pred.push(pred[0]);
    }
    Ok((
        nse(&y_true, &y_pred)?,
        ResidualSummary {
            min,
            mean: sum / dataset.n as f64,
            max,
        },
    ))
}

/// Evaluates NSE on both splits. Both must carry the global indexing of
/// the original series (the validation split keeps its index origin).
pub fn evaluate<P: Predictor + ?Sized>(
    model: &P,
    train_set: &TimeSeriesDataset,
    validation_set: &TimeSeriesDataset,
) -> Result<NseReport> {
    let (nse_train, residuals_train) = split_eval(model, train_set)?;
    let (nse_validation, residuals_validation) = split_eval(model, validation_set)?;
    Ok(NseReport {
        nse_train,
        nse_validation,
        n_train: train_set.n,
        n_validation: validation_set.n,
        residuals_train,
        residuals_validation,
    })
}

/// Plot-ready prediction rows: (global index, time, truth, prediction).
pub fn prediction_rows<P: Predictor + ?Sized>(
    model: &P,
    dataset: &TimeSeriesDataset,
) -> Result<Vec<(u64, f64, f64, f64)>> {
    let mut rows = Vec::with_capacity(dataset.n);
    for i in 0..dataset.n {
        let j = dataset.global_index(i);
        let pred = model.predict(j, dataset.row_x(i))?;
        rows.push((j, j as f64 * dataset.dt, dataset.row_y(i)[0], pred[0]));
    }
    Ok(rows)
}

/// Latent trajectory along the series: (global index, z).
pub fn latent_rows<P: Predictor + ?Sized>(
    model: &P,
    dataset: &TimeSeriesDataset,
) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rows = Vec::with_capacity(dataset.n);
    for i in 0..dataset.n {
        let j = dataset.global_index(i);
        rows.push((j, model.latent_state(j, dataset.row_x(i))?));
    }
    Ok(rows)
}

/// Learned-parameter summary of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct InspectReport {
    pub omegas: Vec<f64>,
    pub mus: Vec<f64>,
    pub mu_frozen: bool,
    pub z0: Vec<f64>,
    pub input_dim: usize,
    pub latent_dim: usize,
    pub output_dim: usize,
    pub total_params: usize,
    pub learnable_params: usize,
    /// L2 norms of the parameter groups (phi, f, g).
    pub phi_norm: f64,
    pub f_norm: f64,
    pub g_norm: f64,
}

pub fn inspect(model: &LddmdModel<f64>, mu_learnable: bool) -> InspectReport {
    let flat = model.flat_params();
    let groups = model.group_sizes();
    let norm = |range: core::ops::Range<usize>| -> f64 {
        libm::sqrt(flat[range].iter().map(|p| p * p).sum::<f64>())
    };
    let phi_end = groups.phi;
    let f_end = phi_end + groups.f;
    let g_end = f_end + groups.g;
    InspectReport {
        omegas: model.k.omegas.clone(),
        mus: model.k.mus.clone(),
        mu_frozen: !mu_learnable,
        z0: model.z0.clone(),
        input_dim: model.input_dim(),
        latent_dim: model.latent_dim(),
        output_dim: model.output_dim(),
        total_params: groups.total(),
        learnable_params: groups.total() - if mu_learnable { 0 } else { groups.mus },
        phi_norm: norm(0..phi_end),
        f_norm: norm(phi_end..f_end),
        g_norm: norm(f_end..g_end),
    }
}
