//! Exact mutual information, MMSE matrix and precoder gradients for
//! discrete-input Gaussian vector channels `y = T x + n`.
//!
//! For x uniform over the Mᴺ product constellation and n ~ CN(0, σ²I),
//!
//!   I(x; y) = N log₂ M − M⁻ᴺ Σ_m E_n[ log₂ Σ_k exp((‖n‖² − ‖T(x_m − x_k) + n‖²)/σ²) ]
//!
//! All internals work in natural log and convert to bits once at the
//! boundary. The inner log-sum-exp is evaluated with max subtraction; the
//! k = m term pins the maximum at ≥ 0 so high-SNR exponents can never
//! overflow. Partial sums are reduced in fixed index order, which keeps
//! results bit-identical between the rayon and sequential paths and across
//! repeated runs with the same seed.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constellation::{product_len, vector_at, Constellation};
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{standard_complex_gaussian, C64, CMat};

/// Default number of Monte-Carlo noise draws per expectation.
pub const DEFAULT_MC_SAMPLES: usize = 500;

/// How the expectation over the noise is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Seeded Monte-Carlo draws; `samples` draws per expectation.
    MonteCarlo,
    /// Tensor Gauss-Hermite grid; `samples` points per real dimension.
    /// Only valid for channels with at most 2 complex output dimensions.
    GaussHermite,
}

/// Noise-expectation settings. The seed fixes the Monte-Carlo batch, so two
/// evaluations with the same quadrature share their noise realizations
/// (common random numbers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseQuadrature {
    pub kind: QuadratureKind,
    pub samples: usize,
    pub seed: u64,
}

impl NoiseQuadrature {
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        NoiseQuadrature { kind: QuadratureKind::MonteCarlo, samples, seed }
    }

    pub fn gauss_hermite(points_per_dim: usize) -> Self {
        NoiseQuadrature { kind: QuadratureKind::GaussHermite, samples: points_per_dim, seed: 0 }
    }
}

/// Mutual information in bits plus the complexity accounting of the
/// evaluation: the number of exponential-sum terms per noise realization,
/// M^{2N} for the full double sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiResult {
    pub bits: f64,
    pub additions: u64,
}

/// Physicists' Gauss-Hermite nodes and weights (∫ e^{−t²} f(t) dt ≈ Σ w f(t)),
/// computed by Golub-Welsch on the Jacobi matrix.
pub fn gauss_hermite_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let beta = (i as f64 / 2.0).sqrt();
        jacobi[(i - 1, i)] = beta;
        jacobi[(i, i - 1)] = beta;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let node = eig.eigenvalues[j];
            let first = eig.eigenvectors[(0, j)];
            (node, std::f64::consts::PI.sqrt() * first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Noise realizations and their expectation weights for a d-dimensional
/// complex output with per-entry variance `noise_var`. Nodes are returned as
/// a flat vector, d entries per realization.
fn noise_nodes(d: usize, noise_var: f64, q: &NoiseQuadrature) -> Result<(Vec<C64>, Vec<f64>)> {
    if q.samples == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one sample".into()));
    }
    let sigma = noise_var.sqrt();
    match q.kind {
        QuadratureKind::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(q.seed);
            let batch = standard_complex_gaussian(q.samples, d, &mut rng);
            let mut nodes = Vec::with_capacity(q.samples * d);
            for j in 0..q.samples {
                for dim in 0..d {
                    nodes.push(batch[(j, dim)] * C64::new(sigma, 0.0));
                }
            }
            let w = 1.0 / q.samples as f64;
            Ok((nodes, vec![w; q.samples]))
        }
        QuadratureKind::GaussHermite => {
            if d > 2 {
                return Err(Error::QuadratureUnsupported { dim: d });
            }
            let (t, w) = gauss_hermite_nodes(q.samples);
            let norm = 1.0 / std::f64::consts::PI.sqrt();
            // tensor grid over 2d real dimensions; each real part is sigma * t
            let real_dims = 2 * d;
            let total = q.samples.pow(real_dims as u32);
            let mut nodes = Vec::with_capacity(total * d);
            let mut weights = Vec::with_capacity(total);
            let mut idx = vec![0usize; real_dims];
            for _ in 0..total {
                let mut weight = 1.0;
                for dim in 0..d {
                    let re = sigma * t[idx[2 * dim]];
                    let im = sigma * t[idx[2 * dim + 1]];
                    nodes.push(C64::new(re, im));
                    weight *= norm * w[idx[2 * dim]] * norm * w[idx[2 * dim + 1]];
                }
                weights.push(weight);
                for slot in (0..real_dims).rev() {
                    idx[slot] += 1;
                    if idx[slot] < q.samples {
                        break;
                    }
                    idx[slot] = 0;
                }
            }
            Ok((nodes, weights))
        }
    }
}

struct Channel {
    d: usize,
    n_sym: usize,
    m_pow_n: usize,
    noise_var: f64,
    /// T x_m for every m, flat m-major (d entries per vector).
    tx: Vec<C64>,
    nodes: Vec<C64>,
    weights: Vec<f64>,
}

/// All Mᴺ symbol vectors, flat m-major (n entries per vector). Only built
/// for the posterior-statistics paths, which run on small N.
fn flat_symbols(c: &Constellation, n: usize, total: usize) -> Result<Vec<C64>> {
    let entries = total
        .checked_mul(n)
        .filter(|&e| e <= 1 << 22)
        .ok_or(Error::EnumerationOverflow { m: c.m, n })?;
    let mut xs = Vec::with_capacity(entries);
    for m in 0..total {
        xs.extend(vector_at(c, n, m));
    }
    Ok(xs)
}

impl Channel {
    fn prepare(t: &CMat, c: &Constellation, noise_var: f64, q: &NoiseQuadrature) -> Result<Self> {
        if noise_var <= 0.0 {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        if t.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("channel matrix".into()));
        }
        let d = t.nrows();
        let n_sym = t.ncols();
        let m_pow_n = product_len(c, n_sym)?;
        let (nodes, weights) = noise_nodes(d, noise_var, q)?;
        let mut tx = Vec::with_capacity(m_pow_n * d);
        for m in 0..m_pow_n {
            let x = vector_at(c, n_sym, m);
            for row in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for col in 0..n_sym {
                    acc += t[(row, col)] * x[col];
                }
                tx.push(acc);
            }
        }
        Ok(Channel { d, n_sym, m_pow_n, noise_var, tx, nodes, weights })
    }

    fn additions(&self) -> u64 {
        (self.m_pow_n as u64) * (self.m_pow_n as u64)
    }

    /// E_n-weighted ln Σ_k exp(...) for transmit index m, summed over the
    /// noise nodes in order. `exponents` is scratch of length m_pow_n.
    fn expected_log_posterior_norm(&self, m: usize, exponents: &mut [f64]) -> f64 {
        let d = self.d;
        let tx_m = &self.tx[m * d..(m + 1) * d];
        let inv_var = 1.0 / self.noise_var;
        let mut acc = 0.0;
        for (j, &w) in self.weights.iter().enumerate() {
            let node = &self.nodes[j * d..(j + 1) * d];
            let mut n_sq = 0.0;
            for z in node {
                n_sq += z.norm_sqr();
            }
            let mut max_e = f64::NEG_INFINITY;
            for k in 0..self.m_pow_n {
                let tx_k = &self.tx[k * d..(k + 1) * d];
                let mut dist = 0.0;
                for dim in 0..d {
                    let diff = tx_m[dim] - tx_k[dim] + node[dim];
                    dist += diff.norm_sqr();
                }
                let e = (n_sq - dist) * inv_var;
                exponents[k] = e;
                if e > max_e {
                    max_e = e;
                }
            }
            let mut sum = 0.0;
            for &e in exponents.iter() {
                sum += (e - max_e).exp();
            }
            acc += w * (max_e + sum.ln());
        }
        acc
    }

    /// Posterior softmax over k for transmit index m and noise node j,
    /// written into `probs` (unnormalized; returns the normalizer).
    fn posterior_weights(&self, m: usize, j: usize, probs: &mut [f64]) -> f64 {
        let d = self.d;
        let tx_m = &self.tx[m * d..(m + 1) * d];
        let inv_var = 1.0 / self.noise_var;
        let node = &self.nodes[j * d..(j + 1) * d];
        let mut n_sq = 0.0;
        for z in node {
            n_sq += z.norm_sqr();
        }
        let mut max_e = f64::NEG_INFINITY;
        for k in 0..self.m_pow_n {
            let tx_k = &self.tx[k * d..(k + 1) * d];
            let mut dist = 0.0;
            for dim in 0..d {
                let diff = tx_m[dim] - tx_k[dim] + node[dim];
                dist += diff.norm_sqr();
            }
            let e = (n_sq - dist) * inv_var;
            probs[k] = e;
            if e > max_e {
                max_e = e;
            }
        }
        let mut norm = 0.0;
        for p in probs.iter_mut() {
            *p = (*p - max_e).exp();
            norm += *p;
        }
        norm
    }

    /// E_n-weighted Σ_j w_j x̂ x̂ᴴ for transmit index m, where x̂ is the
    /// posterior-mean symbol vector. `xs` is the flat symbol table.
    fn expected_posterior_outer(&self, m: usize, xs: &[C64], probs: &mut [f64]) -> CMat {
        let n = self.n_sym;
        let mut acc = CMat::zeros(n, n);
        let mut xhat = vec![C64::new(0.0, 0.0); n];
        for (j, &w) in self.weights.iter().enumerate() {
            let norm = self.posterior_weights(m, j, probs);
            xhat.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (k, &p) in probs.iter().enumerate() {
                let x_k = &xs[k * n..(k + 1) * n];
                for (slot, &xk) in x_k.iter().enumerate() {
                    xhat[slot] += xk * C64::new(p, 0.0);
                }
            }
            let scale = w / (norm * norm);
            for row in 0..n {
                for col in 0..n {
                    acc[(row, col)] += xhat[row] * xhat[col].conj() * C64::new(scale, 0.0);
                }
            }
        }
        acc
    }

    /// Per-m contribution to the estimator-gradient statistics: the
    /// posterior-weighted difference outer product B = Σ_k p_k d_k d_kᴴ
    /// (N×N, d_k = x_m − x_k) and the noise coupling C = Σ_j w_j n_j c_mjᴴ
    /// (d×N, c = x_m − x̂), both summed over the noise nodes.
    fn gradient_terms(&self, m: usize, xs: &[C64], probs: &mut [f64]) -> (CMat, CMat) {
        let n = self.n_sym;
        let d = self.d;
        let x_m = &xs[m * n..(m + 1) * n];
        let mut b_acc = CMat::zeros(n, n);
        let mut c_acc = CMat::zeros(d, n);
        let mut diff = vec![C64::new(0.0, 0.0); n];
        let mut c_vec = vec![C64::new(0.0, 0.0); n];
        for (j, &w) in self.weights.iter().enumerate() {
            let norm = self.posterior_weights(m, j, probs);
            let scale = w / norm;
            c_vec.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (k, &p) in probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let x_k = &xs[k * n..(k + 1) * n];
                for slot in 0..n {
                    diff[slot] = x_m[slot] - x_k[slot];
                }
                let pw = C64::new(p * scale, 0.0);
                for row in 0..n {
                    let dr = diff[row] * pw;
                    c_vec[row] += dr;
                    for col in 0..n {
                        b_acc[(row, col)] += dr * diff[col].conj();
                    }
                }
            }
            let node = &self.nodes[j * d..(j + 1) * d];
            for row in 0..d {
                for col in 0..n {
                    c_acc[(row, col)] += node[row] * c_vec[col].conj();
                }
            }
        }
        (b_acc, c_acc)
    }
}

fn mi_impl(
    t: &CMat,
    c: &Constellation,
    noise_var: f64,
    q: &NoiseQuadrature,
    sequential: bool,
) -> Result<MiResult> {
    let ch = Channel::prepare(t, c, noise_var, q)?;
    let additions = ch.additions();
    // zero channel carries no information; skip the sum so the result is
    // exactly zero
    if ch.tx.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return Ok(MiResult { bits: 0.0, additions });
    }
    let per_m = |m: usize| {
        let mut scratch = vec![0.0; ch.m_pow_n];
        ch.expected_log_posterior_norm(m, &mut scratch)
    };
    let partials = if sequential {
        exec::map_indexed_seq(ch.m_pow_n, per_m)
    } else {
        exec::map_indexed(ch.m_pow_n, per_m)
    };
    let mean: f64 = partials.iter().sum::<f64>() / ch.m_pow_n as f64;
    let nats = ch.n_sym as f64 * (c.m as f64).ln() - mean;
    let max_bits = ch.n_sym as f64 * c.bits_per_symbol();
    let bits = (nats / std::f64::consts::LN_2).clamp(0.0, max_bits);
    Ok(MiResult { bits, additions })
}

/// Mutual information I(x; Tx + n) in bits for the Mᴺ product constellation.
/// Uses the rayon pool when the `parallel` feature is on.
pub fn mutual_information(
    t: &CMat,
    c: &Constellation,
    noise_var: f64,
    q: &NoiseQuadrature,
) -> Result<MiResult> {
    mi_impl(t, c, noise_var, q, false)
}

/// Single-threaded reference path; bit-identical to [`mutual_information`].
pub fn mutual_information_sequential(
    t: &CMat,
    c: &Constellation,
    noise_var: f64,
    q: &NoiseQuadrature,
) -> Result<MiResult> {
    mi_impl(t, c, noise_var, q, true)
}

/// MMSE matrix E = E[(x − E[x|y])(x − E[x|y])ᴴ] of the conditional-mean
/// symbol estimator; Hermitian with eigenvalues in [0, 1] up to quadrature
/// noise.
pub fn mmse_matrix(
    t: &CMat,
    c: &Constellation,
    noise_var: f64,
    q: &NoiseQuadrature,
) -> Result<CMat> {
    let ch = Channel::prepare(t, c, noise_var, q)?;
    let n = ch.n_sym;
    let xs = flat_symbols(c, n, ch.m_pow_n)?;
    let per_m = |m: usize| {
        let mut scratch = vec![0.0; ch.m_pow_n];
        ch.expected_posterior_outer(m, &xs, &mut scratch)
    };
    let partials = exec::map_indexed(ch.m_pow_n, per_m);
    let mut mean = CMat::zeros(n, n);
    for p in &partials {
        mean += p;
    }
    mean /= C64::new(ch.m_pow_n as f64, 0.0);
    let e = CMat::identity(n, n) - mean;
    // the exact E is Hermitian; fold out the quadrature asymmetry
    Ok((&e + e.adjoint()) * C64::new(0.5, 0.0))
}

/// Gradient of I(x; H G x + n) with respect to the precoder G, in bits, in
/// conjugate (Wirtinger) coordinates: a real perturbation δ changes I by
/// 2 Re tr(∇ᴴ δ).
///
/// This is the exact gradient of the quadrature-fixed MI estimate, so it
/// matches central finite differences of [`mutual_information`] taken with
/// the same seed. As the quadrature converges it coincides with the
/// MMSE-matrix relation Hᴴ H G E / (σ² ln 2).
pub fn mi_gradient(
    h_eff: &CMat,
    g: &CMat,
    c: &Constellation,
    noise_var: f64,
    q: &NoiseQuadrature,
) -> Result<CMat> {
    if h_eff.ncols() != g.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{} but G is {}x{}",
            h_eff.nrows(),
            h_eff.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    let t = h_eff * g;
    let ch = Channel::prepare(&t, c, noise_var, q)?;
    let n = ch.n_sym;
    // zero effective channel: uniform posteriors make both statistics vanish
    // identically (the constellation has zero mean)
    if ch.tx.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return Ok(CMat::zeros(n, g.ncols()));
    }
    let xs = flat_symbols(c, n, ch.m_pow_n)?;
    let per_m = |m: usize| {
        let mut scratch = vec![0.0; ch.m_pow_n];
        ch.gradient_terms(m, &xs, &mut scratch)
    };
    let partials = exec::map_indexed(ch.m_pow_n, per_m);
    let mut b_mean = CMat::zeros(n, n);
    let mut c_mean = CMat::zeros(ch.d, n);
    for (b, cc) in &partials {
        b_mean += b;
        c_mean += cc;
    }
    let scale = C64::new(1.0 / (noise_var * std::f64::consts::LN_2 * ch.m_pow_n as f64), 0.0);
    Ok((h_eff.adjoint() * &t * b_mean + h_eff.adjoint() * c_mean) * scale)
}

/// I(x; √snr · x + n) in bits for a scalar channel with unit noise variance,
/// evaluated with deterministic Gauss-Hermite quadrature.
pub fn scalar_rate(c: &Constellation, snr: f64, gh_points: usize) -> Result<f64> {
    if snr < 0.0 {
        return Err(Error::InvalidArgument("snr must be nonnegative".into()));
    }
    let t = CMat::from_element(1, 1, C64::new(snr.sqrt(), 0.0));
    let q = NoiseQuadrature::gauss_hermite(gh_points);
    Ok(mutual_information(&t, c, 1.0, &q)?.bits)
}

/// Scalar MMSE E(snr) for the same channel as [`scalar_rate`].
pub fn scalar_mmse(c: &Constellation, snr: f64, gh_points: usize) -> Result<f64> {
    let t = CMat::from_element(1, 1, C64::new(snr.sqrt(), 0.0));
    let q = NoiseQuadrature::gauss_hermite(gh_points);
    let e = mmse_matrix(&t, c, 1.0, &q)?;
    Ok(e[(0, 0)].re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_constellation, Scheme};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bpsk() -> Constellation {
        make_constellation(Scheme::Bpsk, 2).unwrap()
    }

    fn qpsk() -> Constellation {
        make_constellation(Scheme::Qpsk, 4).unwrap()
    }

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, C64::new(v, 0.0))
    }

    /// Independent oracle for scalar BPSK over the complex AWGN channel with
    /// gain g and unit complex noise variance. Only the real dimension
    /// carries signal: y = g x + t with t ~ N(0, 1/2), so
    /// I = 1 − E_t[log2(1 + exp(−4 g (g + t)))] via 1-D Gauss-Hermite.
    fn bpsk_mi_oracle(g: f64, points: usize) -> f64 {
        let (t, w) = gauss_hermite_nodes(points);
        let norm = 1.0 / std::f64::consts::PI.sqrt();
        let mut h = 0.0;
        for (ti, wi) in t.iter().zip(&w) {
            let arg = -4.0 * g * (g + ti);
            // log2(1 + e^arg), stable on both sides
            let l2 = if arg > 0.0 {
                (arg + (-arg).exp().ln_1p()) / std::f64::consts::LN_2
            } else {
                arg.exp().ln_1p() / std::f64::consts::LN_2
            };
            h += norm * wi * l2;
        }
        1.0 - h
    }

    #[test]
    fn hermite_nodes_match_known_three_point_rule() {
        let (t, w) = gauss_hermite_nodes(3);
        let s = (1.5f64).sqrt();
        assert!((t[0] + s).abs() < 1e-12);
        assert!(t[1].abs() < 1e-12);
        assert!((t[2] - s).abs() < 1e-12);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((w[1] - 2.0 * sqrt_pi / 3.0).abs() < 1e-12);
        assert!((w[0] - sqrt_pi / 6.0).abs() < 1e-12);
        // weights integrate the constant correctly
        assert!((w.iter().sum::<f64>() - sqrt_pi).abs() < 1e-12);
    }

    #[test]
    fn zero_channel_has_zero_information() {
        let c = qpsk();
        let t = CMat::zeros(2, 2);
        let q = NoiseQuadrature::monte_carlo(40, 9);
        let r = mutual_information(&t, &c, 1.0, &q).unwrap();
        assert_eq!(r.bits, 0.0);
        assert_eq!(r.additions, 256); // M^{2N} = 4^4
    }

    #[test]
    fn high_snr_scalar_bpsk_saturates() {
        let c = bpsk();
        let q = NoiseQuadrature::gauss_hermite(24);
        let r = mutual_information(&scalar(10.0), &c, 1.0, &q).unwrap();
        assert!(r.bits > 0.999 && r.bits <= 1.0, "bits = {}", r.bits);
    }

    #[test]
    fn scalar_bpsk_matches_one_dimensional_oracle() {
        // unit-gain BPSK with complex noise CN(0,1): the real-dimension
        // channel has snr 2, and the 1-D oracle fixes the value
        let c = bpsk();
        let q = NoiseQuadrature::gauss_hermite(48);
        let got = mutual_information(&scalar(1.0), &c, 1.0, &q).unwrap().bits;
        let want = bpsk_mi_oracle(1.0, 120);
        assert!((want - 0.7214515907929).abs() < 1e-10, "oracle sanity: {want}");
        assert!((got - want).abs() < 1e-6, "got {got}, oracle {want}");
    }

    #[test]
    fn scalar_bpsk_recovers_classic_real_snr_curve() {
        // the textbook BPSK value C(snr = 1) ≈ 0.4859 b/s/Hz appears when the
        // real-dimension snr is 1, i.e. unit gain with complex noise
        // variance 2
        let c = bpsk();
        let q = NoiseQuadrature::gauss_hermite(48);
        let got = mutual_information(&scalar(1.0), &c, 2.0, &q).unwrap().bits;
        assert!((got - 0.4859441541329).abs() < 1e-6, "got {got}");
        // same point via a gain of 1/sqrt(2) at unit noise
        let half = mutual_information(&scalar(std::f64::consts::FRAC_1_SQRT_2), &c, 1.0, &q)
            .unwrap()
            .bits;
        assert!((half - got).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_agrees_with_gauss_hermite_on_scalars() {
        let c = qpsk();
        let gh = NoiseQuadrature::gauss_hermite(32);
        let mc = NoiseQuadrature::monte_carlo(4000, 123);
        for snr in [0.5f64, 2.0, 10.0] {
            let a = mutual_information(&scalar(snr.sqrt()), &c, 1.0, &gh).unwrap().bits;
            let b = mutual_information(&scalar(snr.sqrt()), &c, 1.0, &mc).unwrap().bits;
            assert!((a - b).abs() < 0.03, "snr {snr}: GH {a} vs MC {b}");
        }
    }

    #[test]
    fn mi_bounds_and_scaling_monotonicity() {
        let c = bpsk();
        let q = NoiseQuadrature::monte_carlo(300, 5);
        let mut last = -1.0;
        for g in [0.0, 0.3, 0.7, 1.5, 3.0, 8.0] {
            let r = mutual_information(&scalar(g), &c, 1.0, &q).unwrap();
            assert!(r.bits >= 0.0 && r.bits <= 1.0);
            assert!(r.bits >= last - 1e-12, "not monotone at g = {g}");
            last = r.bits;
        }
    }

    #[test]
    fn unitary_invariance_within_quadrature_noise() {
        let c = qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = standard_complex_gaussian(3, 2, &mut rng);
        let u = standard_complex_gaussian(3, 3, &mut rng).qr().q();
        let q = NoiseQuadrature::monte_carlo(3000, 77);
        let a = mutual_information(&t, &c, 1.0, &q).unwrap().bits;
        let b = mutual_information(&(&u * &t), &c, 1.0, &q).unwrap().bits;
        assert!((a - b).abs() < 0.05, "MI(T) = {a}, MI(UT) = {b}");
    }

    #[test]
    fn same_seed_is_bit_reproducible_and_parallel_matches_sequential() {
        let c = qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = standard_complex_gaussian(2, 2, &mut rng);
        let q = NoiseQuadrature::monte_carlo(250, 42);
        let a = mutual_information(&t, &c, 1.0, &q).unwrap();
        let b = mutual_information(&t, &c, 1.0, &q).unwrap();
        let s = mutual_information_sequential(&t, &c, 1.0, &q).unwrap();
        assert_eq!(a.bits.to_bits(), b.bits.to_bits());
        assert_eq!(a.bits.to_bits(), s.bits.to_bits());
    }

    #[test]
    fn gauss_hermite_rejects_large_channels() {
        let c = bpsk();
        let t = CMat::identity(3, 3);
        let q = NoiseQuadrature::gauss_hermite(8);
        assert!(matches!(
            mutual_information(&t, &c, 1.0, &q),
            Err(Error::QuadratureUnsupported { dim: 3 })
        ));
    }

    #[test]
    fn mmse_at_zero_channel_is_identity() {
        let c = qpsk();
        let t = CMat::zeros(2, 2);
        let q = NoiseQuadrature::monte_carlo(50, 3);
        let e = mmse_matrix(&t, &c, 1.0, &q).unwrap();
        let err = crate::linalg::frob_norm(&(&e - CMat::identity(2, 2)));
        assert!(err < 1e-12, "E deviates from I by {err}");
    }

    #[test]
    fn mmse_vanishes_in_perfect_detection_limit() {
        let c = bpsk();
        let q = NoiseQuadrature::gauss_hermite(24);
        let e = mmse_matrix(&scalar(100.0), &c, 1.0, &q).unwrap();
        assert!(e[(0, 0)].re.abs() < 1e-3);
    }

    #[test]
    fn mmse_is_hermitian_with_unit_interval_spectrum() {
        let c = qpsk();
        let q = NoiseQuadrature::monte_carlo(400, 11);
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = standard_complex_gaussian(2, 2, &mut rng);
            let e = mmse_matrix(&t, &c, 1.0, &q).unwrap();
            let herm_err = crate::linalg::frob_norm(&(&e - e.adjoint()));
            assert!(herm_err < 1e-12);
            let eig = e.symmetric_eigen();
            for ev in eig.eigenvalues.iter() {
                assert!(*ev > -1e-6 && *ev < 1.0 + 1e-6, "eigenvalue {ev}");
            }
        }
    }

    /// Central finite differences of I with respect to the real and
    /// imaginary parts of each entry of G, packed in the same conjugate
    /// convention as [`mi_gradient`]: (∂/∂Re + i ∂/∂Im) / 2.
    fn fd_gradient(
        h: &CMat,
        g: &CMat,
        c: &Constellation,
        noise_var: f64,
        q: &NoiseQuadrature,
        step: f64,
    ) -> CMat {
        let f = |g: &CMat| mutual_information(&(h * g), c, noise_var, q).unwrap().bits;
        let mut grad = CMat::zeros(g.nrows(), g.ncols());
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let mut gp = g.clone();
                let mut gm = g.clone();
                gp[(i, j)] += C64::new(step, 0.0);
                gm[(i, j)] -= C64::new(step, 0.0);
                let d_re = (f(&gp) - f(&gm)) / (2.0 * step);
                let mut gp = g.clone();
                let mut gm = g.clone();
                gp[(i, j)] += C64::new(0.0, step);
                gm[(i, j)] -= C64::new(0.0, step);
                let d_im = (f(&gp) - f(&gm)) / (2.0 * step);
                grad[(i, j)] = C64::new(d_re / 2.0, d_im / 2.0);
            }
        }
        grad
    }

    #[test]
    fn gradient_is_zero_at_zero_precoder() {
        let c = qpsk();
        let h = CMat::identity(2, 2);
        let g = CMat::zeros(2, 2);
        let q = NoiseQuadrature::monte_carlo(60, 8);
        let grad = mi_gradient(&h, &g, &c, 1.0, &q).unwrap();
        assert_eq!(crate::linalg::frob_norm(&grad), 0.0);
    }

    #[test]
    fn scalar_gradient_is_positive_and_matches_finite_differences() {
        let c = bpsk();
        let h = CMat::identity(1, 1);
        let g = scalar(1.0);
        let q = NoiseQuadrature::gauss_hermite(32);
        let grad = mi_gradient(&h, &g, &c, 1.0, &q).unwrap();
        assert!(grad[(0, 0)].re > 0.0);
        let fd = fd_gradient(&h, &g, &c, 1.0, &q, 1e-4);
        assert!(
            (grad[(0, 0)] - fd[(0, 0)]).norm() < 1e-4,
            "analytic {} vs fd {}",
            grad[(0, 0)],
            fd[(0, 0)]
        );
    }

    #[test]
    fn gradient_converges_to_mmse_relation_under_exact_quadrature() {
        // with (near-)exact noise integration the estimator gradient equals
        // the closed form Hᴴ H G E / (σ² ln 2)
        let c = qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = standard_complex_gaussian(2, 2, &mut rng);
        let g = standard_complex_gaussian(2, 2, &mut rng) * C64::new(0.6, 0.0);
        let q = NoiseQuadrature::gauss_hermite(24);
        let grad = mi_gradient(&h, &g, &c, 1.0, &q).unwrap();
        let e = mmse_matrix(&(&h * &g), &c, 1.0, &q).unwrap();
        let plug_in =
            h.adjoint() * &h * &g * e * C64::new(1.0 / std::f64::consts::LN_2, 0.0);
        let diff = crate::linalg::frob_norm(&(&grad - &plug_in));
        let norm = crate::linalg::frob_norm(&grad);
        assert!(diff < 1e-8 * norm.max(1.0), "diff {diff}, norm {norm}");
    }

    #[test]
    fn matrix_gradient_matches_finite_differences() {
        let c = qpsk();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = standard_complex_gaussian(2, 2, &mut rng);
        let g = standard_complex_gaussian(2, 2, &mut rng) * C64::new(0.7, 0.0);
        let q = NoiseQuadrature::monte_carlo(250, 4);
        let grad = mi_gradient(&h, &g, &c, 1.0, &q).unwrap();
        let fd = fd_gradient(&h, &g, &c, 1.0, &q, 1e-4);
        let norm = crate::linalg::frob_norm(&grad);
        let tol = (1e-3 * norm).max(1e-4);
        for i in 0..2 {
            for j in 0..2 {
                let diff = (grad[(i, j)] - fd[(i, j)]).norm();
                assert!(diff < tol, "entry ({i},{j}): analytic {} fd {}", grad[(i, j)], fd[(i, j)]);
            }
        }
    }
}
