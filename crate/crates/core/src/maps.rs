//! The three learnable maps: the additive-coupling diffeomorphism, the
//! polynomial-activation coupling network and the softplus readout.

use alloc::vec::Vec;

use crate::autodiff::Scalar;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Order-2 polynomial `s -> a s^2 + b s + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2<S> {
    pub a: S,
    pub b: S,
    pub c: S,
}

impl<S: Scalar> Poly2<S> {
    pub fn eval(&self, s: S) -> S {
        self.a * s.square() + self.b * s + self.c
    }
}

/// Which parity of coordinates the coupling layer modifies. The other
/// parity passes through unchanged and feeds the polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingParity {
    OddModified,
    EvenModified,
}

/// A single additive coupling layer with one order-2 polynomial per
/// modified coordinate. Each modified entry receives the polynomial of
/// the sum of its two pass-through neighbors (circular indexing), so the
/// map is exactly invertible for any coefficient values.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveCoupling<S> {
    pub dim: usize,
    pub parity: CouplingParity,
    pub polys: Vec<Poly2<S>>,
}

impl AdditiveCoupling<f64> {
    /// The identity map: all polynomial coefficients zero.
    pub fn identity(dim: usize, parity: CouplingParity) -> Result<Self> {
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Config(alloc::format!(
                "coupling dimension must be a positive even integer, got {dim}"
            )));
        }
        let polys = (0..dim / 2)
            .map(|_| Poly2 {
                a: 0.0,
                b: 0.0,
                c: 0.0,
            })
            .collect();
        Ok(Self { dim, parity, polys })
    }
}

impl<S: Scalar> AdditiveCoupling<S> {
    fn check(&self, len: usize, context: &'static str) -> Result<()> {
        if len != self.dim {
            return Err(Error::Shape {
                context,
                expected: self.dim,
                actual: len,
            });
        }
        Ok(())
    }

    /// Indices modified by this layer, in ascending order.
    fn modified(&self) -> impl Iterator<Item = usize> + '_ {
        let start = match self.parity {
            CouplingParity::OddModified => 1,
            CouplingParity::EvenModified => 0,
        };
        (start..self.dim).step_by(2)
    }

    fn neighbor_sum(&self, x: &[S], i: usize) -> S {
        let prev = x[(i + self.dim - 1) % self.dim];
        let next = x[(i + 1) % self.dim];
        prev + next
    }

    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        self.check(x.len(), "coupling forward")?;
        let mut out: Vec<S> = x.to_vec();
        for (block, i) in self.modified().enumerate() {
            out[i] = x[i] + self.polys[block].eval(self.neighbor_sum(x, i));
        }
        Ok(out)
    }

    /// Exact algebraic inverse: the pass-through entries are unchanged, so
    /// the same polynomial value can be subtracted back off.
    pub fn inverse(&self, u: &[S]) -> Result<Vec<S>> {
        self.check(u.len(), "coupling inverse")?;
        let mut out: Vec<S> = u.to_vec();
        for (block, i) in self.modified().enumerate() {
            out[i] = u[i] - self.polys[block].eval(self.neighbor_sum(u, i));
        }
        Ok(out)
    }
}

/// Feedforward network with per-neuron learnable order-2 polynomial
/// activations on the hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMlp<S> {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Row-major (hidden_dim x fan_in) weights per hidden layer.
    pub hidden_weights: Vec<Vec<S>>,
    pub hidden_biases: Vec<Vec<S>>,
    pub activations: Vec<Vec<Poly2<S>>>,
    /// Row-major (out_dim x hidden_dim).
    pub out_weights: Vec<S>,
    pub out_biases: Vec<S>,
}

impl PolyMlp<f64> {
    /// Initialization that makes the network the exact zero map: hidden
    /// layers get small random weights (scale 0.1) with near-linear
    /// activations (a=0, b=1, c=0) and the output layer is zeroed.
    pub fn zero_output_init(
        in_dim: usize,
        hidden_dim: usize,
        hidden_layers: usize,
        out_dim: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if in_dim == 0 || hidden_dim == 0 || hidden_layers == 0 || out_dim == 0 {
            return Err(Error::Config(
                "coupling network dimensions must be positive".into(),
            ));
        }
        let mut hidden_weights = Vec::with_capacity(hidden_layers);
        let mut hidden_biases = Vec::with_capacity(hidden_layers);
        let mut activations = Vec::with_capacity(hidden_layers);
        for layer in 0..hidden_layers {
            let fan_in = if layer == 0 { in_dim } else { hidden_dim };
            hidden_weights.push(
                (0..hidden_dim * fan_in)
                    .map(|_| 0.1 * rng.gaussian())
                    .collect(),
            );
            hidden_biases.push(alloc::vec![0.0; hidden_dim]);
            activations.push(
                (0..hidden_dim)
                    .map(|_| Poly2 {
                        a: 0.0,
                        b: 1.0,
                        c: 0.0,
                    })
                    .collect(),
            );
        }
        Ok(Self {
            in_dim,
            hidden_dim,
            out_dim,
            hidden_weights,
            hidden_biases,
            activations,
            out_weights: alloc::vec![0.0; out_dim * hidden_dim],
            out_biases: alloc::vec![0.0; out_dim],
        })
    }
}

fn affine<S: Scalar>(weights: &[S], biases: &[S], x: &[S]) -> Vec<S> {
    let out_dim = biases.len();
    let in_dim = x.len();
    debug_assert_eq!(weights.len(), out_dim * in_dim);
    let mut out = Vec::with_capacity(out_dim);
    for r in 0..out_dim {
        let mut acc = biases[r];
        for (c, &xi) in x.iter().enumerate() {
            acc = acc + weights[r * in_dim + c] * xi;
        }
        out.push(acc);
    }
    out
}

impl<S: Scalar> PolyMlp<S> {
    pub fn forward(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.in_dim {
            return Err(Error::Shape {
                context: "coupling network input",
                expected: self.in_dim,
                actual: x.len(),
            });
        }
        let mut h: Vec<S> = x.to_vec();
        for layer in 0..self.hidden_weights.len() {
            let pre = affine(&self.hidden_weights[layer], &self.hidden_biases[layer], &h);
            h = pre
                .into_iter()
                .zip(self.activations[layer].iter())
                .map(|(p, poly)| poly.eval(p))
                .collect();
        }
        Ok(affine(&self.out_weights, &self.out_biases, &h))
    }
}

/// One-hidden-layer perceptron with softplus activations and a linear
/// output, mapping the latent state to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutMlp<S> {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub w1: Vec<S>,
    pub b1: Vec<S>,
    pub w2: Vec<S>,
    pub b2: Vec<S>,
}

impl ReadoutMlp<f64> {
    /// Random initialization: weights and biases uniform in [-r, r] with
    /// r = 1/sqrt(fan_in) per layer.
    pub fn random_init(in_dim: usize, hidden_dim: usize, out_dim: usize, rng: &mut Rng) -> Result<Self> {
        if in_dim == 0 || hidden_dim == 0 || out_dim == 0 {
            return Err(Error::Config("readout dimensions must be positive".into()));
        }
        let r1 = 1.0 / libm::sqrt(in_dim as f64);
        let r2 = 1.0 / libm::sqrt(hidden_dim as f64);
        Ok(Self {
            in_dim,
            hidden_dim,
            out_dim,
            w1: (0..hidden_dim * in_dim)
                .map(|_| rng.uniform_symmetric(r1))
                .collect(),
            b1: (0..hidden_dim).map(|_| rng.uniform_symmetric(r1)).collect(),
            w2: (0..out_dim * hidden_dim)
                .map(|_| rng.uniform_symmetric(r2))
                .collect(),
            b2: (0..out_dim).map(|_| rng.uniform_symmetric(r2)).collect(),
        })
    }
}

impl<S: Scalar> ReadoutMlp<S> {
    pub fn forward(&self, z: &[S]) -> Result<Vec<S>> {
        if z.len() != self.in_dim {
            return Err(Error::Shape {
                context: "readout input",
                expected: self.in_dim,
                actual: z.len(),
            });
        }
        let hidden: Vec<S> = affine(&self.w1, &self.b1, z)
            .into_iter()
            .map(|p| p.softplus())
            .collect();
        Ok(affine(&self.w2, &self.b2, &hidden))
    }
}
