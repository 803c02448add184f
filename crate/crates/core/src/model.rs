//! The assembled prediction models: the latent model (diffeomorphism,
//! coupling network, readout, block rotation, latent initialization) and
//! the plain diffeomorphic step, plus the training loss.

use alloc::vec::Vec;

use crate::autodiff::Scalar;
use crate::data::TimeSeriesDataset;
use crate::dynamics::BlockRotation;
use crate::error::{Error, Result};
use crate::maps::{AdditiveCoupling, PolyMlp, ReadoutMlp};

/// How per-sample residuals enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    /// Sum of unsquared Euclidean residual norms, as the objective is
    /// defined. Nonsmooth at zero residual (zero subgradient taken there).
    #[default]
    Norm,
    /// Sum of squared residual norms; smooth everywhere.
    Squared,
}

/// The latent model: prediction map
/// `y_j = g(phi^{-1}(K^j z0 - f(x_j)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LddmdModel<S> {
    pub phi: AdditiveCoupling<S>,
    pub f: PolyMlp<S>,
    pub g: ReadoutMlp<S>,
    pub k: BlockRotation<S>,
    pub z0: Vec<S>,
}

impl<S: Scalar> LddmdModel<S> {
    pub fn new(
        phi: AdditiveCoupling<S>,
        f: PolyMlp<S>,
        g: ReadoutMlp<S>,
        k: BlockRotation<S>,
        z0: Vec<S>,
    ) -> Result<Self> {
        let d_c = phi.dim;
        if d_c == 0 || d_c % 2 != 0 {
            return Err(Error::Config(alloc::format!(
                "latent dimension must be a positive even integer, got {d_c}"
            )));
        }
        for (context, dim) in [
            ("coupling network output", f.out_dim),
            ("readout input", g.in_dim),
            ("rotation state", k.dim()),
            ("latent initialization", z0.len()),
        ] {
            if dim != d_c {
                return Err(Error::Shape {
                    context,
                    expected: d_c,
                    actual: dim,
                });
            }
        }
        if g.out_dim == 0 {
            return Err(Error::Config("output dimension must be positive".into()));
        }
        Ok(Self { phi, f, g, k, z0 })
    }

    pub fn input_dim(&self) -> usize {
        self.f.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.g.out_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.phi.dim
    }

    /// Closed-form latent state `phi^{-1}(K^j z0 - f(x_j))`; O(1) in j.
    pub fn latent_state_s(&self, j: u64, x: &[S]) -> Result<Vec<S>> {
        let driver = self.k.apply_power(j, &self.z0)?;
        let fx = self.f.forward(x)?;
        let inner: Vec<S> = driver
            .into_iter()
            .zip(fx.into_iter())
            .map(|(a, b)| a - b)
            .collect();
        self.phi.inverse(&inner)
    }

    pub fn predict_s(&self, j: u64, x: &[S]) -> Result<Vec<S>> {
        let z = self.latent_state_s(j, x)?;
        self.g.forward(&z)
    }

    /// One-step recursive evolution of the latent state along the
    /// dataset's input rows, starting from the telescope vector
    /// `z0_tilde` at the dataset's first global index. Exists for the
    /// telescoping cross-check and diagnostics; `latent_state_s` is the
    /// production path.
    pub fn latent_recursive(
        &self,
        dataset: &TimeSeriesDataset,
        z0_tilde: &[f64],
    ) -> Result<Vec<Vec<f64>>>
    where
        S: Scalar,
    {
        let model = self.freeze();
        if z0_tilde.len() != model.latent_dim() {
            return Err(Error::Shape {
                context: "latent recursion start",
                expected: model.latent_dim(),
                actual: z0_tilde.len(),
            });
        }
        let mut out = Vec::with_capacity(dataset.n);
        // z at the first row comes straight from the telescope vector
        // propagated to the dataset's index origin.
        let driver0 = model.k.apply_power(dataset.t0_index, z0_tilde)?;
        let f0 = model.f.forward(dataset.row_x(0))?;
        let inner0: Vec<f64> = driver0.iter().zip(f0.iter()).map(|(a, b)| a - b).collect();
        let mut z = model.phi.inverse(&inner0)?;
        out.push(z.clone());
        for i in 1..dataset.n {
            let f_prev = model.f.forward(dataset.row_x(i - 1))?;
            let phi_z = model.phi.forward(&z)?;
            let pre: Vec<f64> = f_prev
                .iter()
                .zip(phi_z.iter())
                .map(|(a, b)| a + b)
                .collect();
            let rotated = model.k.apply(&pre)?;
            let f_cur = model.f.forward(dataset.row_x(i))?;
            let inner: Vec<f64> = rotated
                .iter()
                .zip(f_cur.iter())
                .map(|(a, b)| a - b)
                .collect();
            z = model.phi.inverse(&inner)?;
            out.push(z.clone());
        }
        Ok(out)
    }

    /// Plain-valued copy of the model.
    pub fn freeze(&self) -> LddmdModel<f64> {
        self.map_params(&mut |s: &S| s.value())
    }

    /// Structure-preserving parameter transform. Defines the canonical
    /// flat parameter order: phi polynomials, coupling network, readout,
    /// omegas, mus, z0.
    pub fn map_params<T: Scalar>(&self, f: &mut impl FnMut(&S) -> T) -> LddmdModel<T> {
        LddmdModel {
            phi: AdditiveCoupling {
                dim: self.phi.dim,
                parity: self.phi.parity,
                polys: self
                    .phi
                    .polys
                    .iter()
                    .map(|p| crate::maps::Poly2 {
                        a: f(&p.a),
                        b: f(&p.b),
                        c: f(&p.c),
                    })
                    .collect(),
            },
            f: PolyMlp {
                in_dim: self.f.in_dim,
                hidden_dim: self.f.hidden_dim,
                out_dim: self.f.out_dim,
                hidden_weights: self
                    .f
                    .hidden_weights
                    .iter()
                    .map(|layer| layer.iter().map(&mut *f).collect())
                    .collect(),
                hidden_biases: self
                    .f
                    .hidden_biases
                    .iter()
                    .map(|layer| layer.iter().map(&mut *f).collect())
                    .collect(),
                activations: self
                    .f
                    .activations
                    .iter()
                    .map(|layer| {
                        layer
                            .iter()
                            .map(|p| crate::maps::Poly2 {
                                a: f(&p.a),
                                b: f(&p.b),
                                c: f(&p.c),
                            })
                            .collect()
                    })
                    .collect(),
                out_weights: self.f.out_weights.iter().map(&mut *f).collect(),
                out_biases: self.f.out_biases.iter().map(&mut *f).collect(),
            },
            g: ReadoutMlp {
                in_dim: self.g.in_dim,
                hidden_dim: self.g.hidden_dim,
                out_dim: self.g.out_dim,
                w1: self.g.w1.iter().map(&mut *f).collect(),
                b1: self.g.b1.iter().map(&mut *f).collect(),
                w2: self.g.w2.iter().map(&mut *f).collect(),
                b2: self.g.b2.iter().map(&mut *f).collect(),
            },
            k: BlockRotation {
                omegas: self.k.omegas.iter().map(&mut *f).collect(),
                mus: self.k.mus.iter().map(&mut *f).collect(),
                dt: self.k.dt,
            },
            z0: self.z0.iter().map(&mut *f).collect(),
        }
    }

    /// All parameters in canonical flat order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.map_params(&mut |s: &S| {
            out.push(s.value());
            0.0f64
        });
        out
    }

    /// Sizes of the parameter groups in flat order:
    /// (phi, f, g, omegas, mus, z0).
    pub fn group_sizes(&self) -> ParamGroups {
        let f_count: usize = self
            .f
            .hidden_weights
            .iter()
            .zip(self.f.hidden_biases.iter())
            .zip(self.f.activations.iter())
            .map(|((w, b), a)| w.len() + b.len() + 3 * a.len())
            .sum::<usize>()
            + self.f.out_weights.len()
            + self.f.out_biases.len();
        ParamGroups {
            phi: 3 * self.phi.polys.len(),
            f: f_count,
            g: self.g.w1.len() + self.g.b1.len() + self.g.w2.len() + self.g.b2.len(),
            omegas: self.k.omegas.len(),
            mus: self.k.mus.len(),
            z0: self.z0.len(),
        }
    }
}

impl LddmdModel<f64> {
    /// Rebuilds the model from a flat parameter vector (canonical order).
    pub fn with_flat_params(&self, flat: &[f64]) -> Result<Self> {
        let expected = self.flat_params().len();
        if flat.len() != expected {
            return Err(Error::Shape {
                context: "flat parameter vector",
                expected,
                actual: flat.len(),
            });
        }
        let mut it = flat.iter();
        Ok(self.map_params(&mut |_| *it.next().unwrap()))
    }
}

/// Parameter group sizes in canonical flat order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGroups {
    pub phi: usize,
    pub f: usize,
    pub g: usize,
    pub omegas: usize,
    pub mus: usize,
    pub z0: usize,
}

impl ParamGroups {
    pub fn total(&self) -> usize {
        self.phi + self.f + self.g + self.omegas + self.mus + self.z0
    }

    /// Flat-vector range occupied by the mu parameters.
    pub fn mu_range(&self) -> core::ops::Range<usize> {
        let start = self.phi + self.f + self.g + self.omegas;
        start..start + self.mus
    }
}

/// Prediction surface shared by the learned model and reference systems.
pub trait Predictor {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn latent_dim(&self) -> usize;
    fn latent_state(&self, j: u64, x: &[f64]) -> Result<Vec<f64>>;
    fn predict(&self, j: u64, x: &[f64]) -> Result<Vec<f64>>;
}

impl Predictor for LddmdModel<f64> {
    fn input_dim(&self) -> usize {
        LddmdModel::input_dim(self)
    }
    fn output_dim(&self) -> usize {
        LddmdModel::output_dim(self)
    }
    fn latent_dim(&self) -> usize {
        LddmdModel::latent_dim(self)
    }
    fn latent_state(&self, j: u64, x: &[f64]) -> Result<Vec<f64>> {
        self.latent_state_s(j, x)
    }
    fn predict(&self, j: u64, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_s(j, x)
    }
}

/// Batch training loss: sum over the given dataset rows of the residual
/// norm (or squared norm) between target and prediction at the row's
/// absolute time index.
pub fn batch_loss<S: Scalar>(
    model: &LddmdModel<S>,
    dataset: &TimeSeriesDataset,
    rows: &[usize],
    mode: LossMode,
) -> Result<S> {
    if rows.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let ctx = model.z0[0];
    let mut total: Option<S> = None;
    for &row in rows {
        if row >= dataset.n {
            return Err(Error::Shape {
                context: "batch row index",
                expected: dataset.n,
                actual: row,
            });
        }
        let x: Vec<S> = dataset.row_x(row).iter().map(|&v| ctx.lift(v)).collect();
        let pred = model.predict_s(dataset.global_index(row), &x)?;
        let y = dataset.row_y(row);
        let mut sq: Option<S> = None;
        for (p, &t) in pred.iter().zip(y.iter()) {
            let r = ctx.lift(t) - *p;
            let r2 = r.square();
            sq = Some(match sq {
                Some(acc) => acc + r2,
                None => r2,
            });
        }
        let sample = match mode {
            LossMode::Norm => sq.unwrap().sqrt(),
            LossMode::Squared => sq.unwrap(),
        };
        total = Some(match total {
            Some(acc) => acc + sample,
            None => sample,
        });
    }
    Ok(total.unwrap())
}

/// Diffeomorphic step `psi^{-1}(K psi(x))` over an arbitrary invertible
/// pair; the learned case uses the additive coupling layer.
pub trait Diffeo {
    fn dim(&self) -> usize;
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn inverse(&self, u: &[f64]) -> Result<Vec<f64>>;
}

impl Diffeo for AdditiveCoupling<f64> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        AdditiveCoupling::forward(self, x)
    }
    fn inverse(&self, u: &[f64]) -> Result<Vec<f64>> {
        AdditiveCoupling::inverse(self, u)
    }
}

/// State-evolution model `x_j = psi^{-1}(K psi(x_{j-1}))`.
#[derive(Debug, Clone)]
pub struct DdmdModel<D = AdditiveCoupling<f64>> {
    pub psi: D,
    pub k: BlockRotation<f64>,
}

impl<D: Diffeo> DdmdModel<D> {
    pub fn new(psi: D, k: BlockRotation<f64>) -> Result<Self> {
        if psi.dim() != k.dim() {
            return Err(Error::Shape {
                context: "ddmd dynamics",
                expected: psi.dim(),
                actual: k.dim(),
            });
        }
        Ok(Self { psi, k })
    }

    pub fn step(&self, x_prev: &[f64]) -> Result<Vec<f64>> {
        let u = self.psi.forward(x_prev)?;
        let rotated = self.k.apply(&u)?;
        self.psi.inverse(&rotated)
    }

    /// j-fold step via the conjugacy identity `psi^{-1}(K^j psi(x))`.
    pub fn step_power(&self, j: u64, x0: &[f64]) -> Result<Vec<f64>> {
        let u = self.psi.forward(x0)?;
        let rotated = self.k.apply_power(j, &u)?;
        self.psi.inverse(&rotated)
    }
}
