//! Block-diagonal rotation dynamics and spectral frequency initialization.
//!
//! The latent generator is block diagonal with 2x2 blocks
//! `exp(-mu dt) * R(omega dt)`; its j-th power is evaluated in closed form
//! (angle `j omega dt`, decay `exp(-j mu dt)`), never by repeated
//! multiplication.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::Scalar;
use crate::error::{Error, Result};

const TAU: f64 = core::f64::consts::TAU;

/// The block-rotation matrix: per-block decay `mu_i`, angular frequency
/// `omega_i`, shared observation interval `dt`. State dimension is even,
/// `2 * omegas.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRotation<S> {
    pub omegas: Vec<S>,
    pub mus: Vec<S>,
    pub dt: f64,
}

impl BlockRotation<f64> {
    pub fn new(omegas: Vec<f64>, mus: Vec<f64>, dt: f64) -> Result<Self> {
        if mus.len() != omegas.len() {
            return Err(Error::Shape {
                context: "block rotation mus",
                expected: omegas.len(),
                actual: mus.len(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if omegas.is_empty() {
            return Err(Error::Config("at least one rotation block required".into()));
        }
        Ok(Self { omegas, mus, dt })
    }

    /// Undamped rotation (all mu = 0), the LDDMD default.
    pub fn undamped(omegas: Vec<f64>, dt: f64) -> Result<Self> {
        let mus = alloc::vec![0.0; omegas.len()];
        Self::new(omegas, mus, dt)
    }
}

impl<S: Scalar> BlockRotation<S> {
    pub fn dim(&self) -> usize {
        2 * self.omegas.len()
    }

    /// One application of the matrix: rotate each 2-block by `omega dt`,
    /// scale by `exp(-mu dt)`.
    pub fn apply(&self, v: &[S]) -> Result<Vec<S>> {
        self.apply_power(1, v)
    }

    /// Closed-form j-th power. The rotation angle is reduced modulo 2 pi
    /// after forming `j * omega * dt`, which keeps precision at large j;
    /// the reduction shift is a constant, so gradients w.r.t. omega are
    /// unaffected.
    pub fn apply_power(&self, j: u64, v: &[S]) -> Result<Vec<S>> {
        if v.len() != self.dim() {
            return Err(Error::Shape {
                context: "block rotation apply",
                expected: self.dim(),
                actual: v.len(),
            });
        }
        let jdt = j as f64 * self.dt;
        let mut out = Vec::with_capacity(v.len());
        for (b, (&omega, &mu)) in self.omegas.iter().zip(self.mus.iter()).enumerate() {
            let theta = omega * omega.lift(jdt);
            let turns = libm::floor(theta.value() / TAU);
            let theta = theta - omega.lift(turns * TAU);
            let (sin, cos) = (theta.sin(), theta.cos());
            let x = v[2 * b];
            let y = v[2 * b + 1];
            let (mut rx, mut ry) = (cos * x - sin * y, sin * x + cos * y);
            if j > 0 {
                let decay = (-(mu * mu.lift(jdt))).exp();
                rx = decay * rx;
                ry = decay * ry;
            }
            out.push(rx);
            out.push(ry);
        }
        Ok(out)
    }
}

/// Picks the `latent_dim / 2` most prevalent angular frequencies in the
/// Fourier spectrum of a mean-removed 1-D signal, sorted by descending
/// bin magnitude. The DC and Nyquist bins are excluded; ties go to the
/// lower frequency.
pub fn spectral_init(target: &[f64], latent_dim: usize, dt: f64) -> Result<Vec<f64>> {
    if latent_dim == 0 || latent_dim % 2 != 0 {
        return Err(Error::Config(format!(
            "latent_dim must be a positive even integer, got {latent_dim}"
        )));
    }
    let n = target.len();
    if n < latent_dim {
        return Err(Error::Config(format!(
            "sequence length {n} shorter than latent_dim {latent_dim}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let usable_bins = n / 2 - 1; // k = 1 .. n/2 - 1
    let wanted = latent_dim / 2;
    if wanted > usable_bins {
        return Err(Error::Config(format!(
            "latent_dim {latent_dim} needs {wanted} bins but only {usable_bins} usable DFT bins exist"
        )));
    }

    let mean = target.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = target.iter().map(|&y| y - mean).collect();

    // Direct DFT of the real series; O(n^2) is fine at the series lengths
    // involved and keeps the core dependency-free.
    let mut magnitudes: Vec<(usize, f64)> = Vec::with_capacity(usable_bins);
    for k in 1..=usable_bins {
        let w = TAU * k as f64 / n as f64;
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for (j, &c) in centered.iter().enumerate() {
            let phase = w * j as f64;
            re += c * libm::cos(phase);
            im -= c * libm::sin(phase);
        }
        magnitudes.push((k, libm::sqrt(re * re + im * im)));
    }

    let energy: f64 = magnitudes.iter().map(|&(_, m)| m * m).sum();
    let tol = 1e-12 * n as f64 * (1.0 + mean * mean);
    if energy <= tol {
        return Err(Error::Config(
            "no nonzero-frequency energy: target sequence is constant".into(),
        ));
    }

    // Descending by magnitude; equal magnitudes resolve to the lower bin.
    magnitudes.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(magnitudes[..wanted]
        .iter()
        .map(|&(k, _)| TAU * k as f64 / (n as f64 * dt))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{check_gradient, Scalar};
    use alloc::vec;

    const PI: f64 = core::f64::consts::PI;

    #[test]
    fn quarter_rotation() {
        let k = BlockRotation::undamped(vec![PI / 2.0], 1.0).unwrap();
        let out = k.apply(&[1.0, 0.0]).unwrap();
        assert!((out[0]).abs() < 1e-15);
        assert!((out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_decay_halves() {
        let k = BlockRotation::new(vec![0.0], vec![core::f64::consts::LN_2], 1.0).unwrap();
        let out = k.apply(&[1.0, 0.0]).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert!(out[1].abs() < 1e-15);
    }

    #[test]
    fn zero_frequency_is_identity() {
        let k = BlockRotation::undamped(vec![0.0], 1.0).unwrap();
        let v = [0.3, -1.7];
        let out = k.apply(&v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn power_zero_is_identity() {
        let k = BlockRotation::undamped(vec![0.321], 0.5).unwrap();
        let v = [2.0, -3.0];
        assert_eq!(k.apply_power(0, &v).unwrap(), v);
    }

    #[test]
    fn full_turn_returns_home() {
        let k = BlockRotation::undamped(vec![PI / 2.0], 1.0).unwrap();
        let out = k.apply_power(4, &[1.0, 0.0]).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12);
        assert!(out[1].abs() < 1e-12);
    }

    #[test]
    fn fifty_steps_quarter_turn() {
        let k = BlockRotation::undamped(vec![PI / 100.0], 1.0).unwrap();
        let out = k.apply_power(50, &[1.0, 0.0]).unwrap();
        assert!(out[0].abs() < 1e-12);
        assert!((out[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_matches_iterated_apply_and_preserves_norm() {
        let mut rng = crate::rng::Rng::new(11);
        for _ in 0..20 {
            let omegas = vec![rng.uniform() * 3.0, rng.uniform() * 3.0];
            let k = BlockRotation::undamped(omegas, 1.0).unwrap();
            let v: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut iterated = v.clone();
            for j in 1..=64u64 {
                iterated = k.apply(&iterated).unwrap();
                let direct = k.apply_power(j, &v).unwrap();
                for (a, b) in direct.iter().zip(iterated.iter()) {
                    assert!((a - b).abs() < 1e-10, "j={j}: {a} vs {b}");
                }
                let n2 = direct.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!((n2 - norm).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orthogonal_when_undamped() {
        // Columns of K are images of basis vectors; check K^T K = I.
        let k = BlockRotation::undamped(vec![0.77, 2.13, 0.05], 0.3).unwrap();
        let d = k.dim();
        let mut cols = Vec::new();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            cols.push(k.apply(&e).unwrap());
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|r| cols[i][r] * cols[j][r]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn omega_gradient_matches_finite_differences() {
        for &j in &[1u64, 7, 50, 1000] {
            let err = check_gradient(
                |tape, v| {
                    let k = BlockRotation {
                        omegas: vec![v[0]],
                        mus: vec![tape.constant(0.0)],
                        dt: 1.0,
                    };
                    let state = [tape.constant(0.8), tape.constant(-0.4)];
                    let out = k.apply_power(j, &state).unwrap();
                    out[0].square() + out[1] * out[1].lift(0.3)
                },
                &[0.137],
                1e-6,
            );
            assert!(err < 1e-5, "j={j}: err = {err}");
        }
    }

    #[test]
    fn spectral_init_pure_tone_is_bin_exact() {
        let n = 128;
        let y: Vec<f64> = (0..n).map(|j| libm::cos(TAU * j as f64 / 64.0)).collect();
        let omegas = spectral_init(&y, 2, 1.0).unwrap();
        assert_eq!(omegas.len(), 1);
        assert_eq!(omegas[0], TAU * 2.0 / 128.0); // exactly the k=2 bin
        assert!((omegas[0] - 0.09817).abs() < 1e-5);
    }

    #[test]
    fn spectral_init_orders_by_magnitude() {
        let n = 128;
        let y: Vec<f64> = (0..n)
            .map(|j| {
                let t = j as f64;
                3.0 * libm::cos(TAU * t / 32.0) + libm::cos(TAU * t / 8.0)
            })
            .collect();
        let omegas = spectral_init(&y, 4, 1.0).unwrap();
        assert!((omegas[0] - 0.19635).abs() < 1e-5);
        assert!((omegas[1] - 0.78540).abs() < 1e-5);
    }

    #[test]
    fn spectral_init_rejects_constant_sequence() {
        let y = vec![4.2; 64];
        assert!(matches!(spectral_init(&y, 2, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn spectral_init_rejects_odd_latent_dim() {
        let y: Vec<f64> = (0..64).map(|j| libm::sin(0.3 * j as f64)).collect();
        assert!(spectral_init(&y, 3, 1.0).is_err());
        assert!(spectral_init(&y, 64, 1.0).is_err()); // more than usable bins
    }

    #[test]
    fn apply_rejects_wrong_dimension() {
        let k = BlockRotation::undamped(vec![1.0], 1.0).unwrap();
        assert!(matches!(k.apply(&[1.0]), Err(Error::Shape { .. })));
    }
}
