//! Dense complex linear-algebra helpers shared by the decomposition and
//! precoder modules. Everything is built on `nalgebra` dynamic matrices
//! over `Complex<f64>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Factor on either side of the rank cutoff inside which a singular value is
/// declared ambiguous rather than silently rounded to zero/nonzero.
pub const RANK_AMBIGUITY_WINDOW: f64 = 10.0;

pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative Frobenius distance ‖a − b‖ / max(‖b‖, 1).
pub fn rel_frob_err(a: &CMat, b: &CMat) -> f64 {
    let diff = a - b;
    frob_norm(&diff) / frob_norm(b).max(1.0)
}

/// ‖UᴴU − I‖_F, zero for a unitary matrix.
pub fn unitarity_error(u: &CMat) -> f64 {
    let n = u.ncols();
    let gram = u.adjoint() * u;
    frob_norm(&(gram - CMat::identity(n, n)))
}

/// Default relative rank tolerance for a problem whose largest dimension is
/// `max_dim`: singular values below `1e-10 * max_dim * sigma_max` count as zero.
pub fn default_rank_tol(max_dim: usize) -> f64 {
    1e-10 * max_dim.max(1) as f64
}

/// Count singular values above the relative cutoff `tol_rel * sigma_max`.
///
/// Values within [`RANK_AMBIGUITY_WINDOW`] of the cutoff on either side make
/// the rank decision ambiguous and are reported as an error naming the
/// offending value.
pub fn rank_from_singular_values(sv: &[f64], tol_rel: f64) -> Result<usize> {
    let sigma_max = sv.iter().cloned().fold(0.0f64, f64::max);
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let cutoff = tol_rel * sigma_max;
    let w = RANK_AMBIGUITY_WINDOW;
    for &s in sv {
        if s > cutoff / w && s < cutoff * w {
            return Err(Error::RankAmbiguous { sigma: s, cutoff, window: w });
        }
    }
    Ok(sv.iter().filter(|&&s| s > cutoff).count())
}

/// Numerical rank of a matrix under the relative tolerance convention.
/// Uses the same Jacobi kernel as the decompositions so rank decisions are
/// consistent across the crate.
pub fn rank(m: &CMat, tol_rel: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let sv = jacobi_svd(m).sigma;
    rank_from_singular_values(&sv, tol_rel)
}

/// Extend `basis` (n×j, orthonormal columns) to a full orthonormal basis of
/// Cⁿ; returns the n×(n−j) completion. Uses a column-pivoted QR of the
/// orthogonal projector onto the complement.
pub fn orthonormal_completion(basis: &CMat) -> CMat {
    let n = basis.nrows();
    let j = basis.ncols();
    if j >= n {
        return CMat::zeros(n, 0);
    }
    let projector = CMat::identity(n, n) - basis * basis.adjoint();
    let qr = projector.col_piv_qr();
    let q = qr.q();
    q.columns(0, n - j).into_owned()
}

/// Nearest unitary matrix (polar factor) of a square matrix, via SVD.
pub fn polar_unitary(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch("polar factor needs a square matrix".into()));
    }
    let svd = jacobi_svd(a);
    Ok(&svd.u * svd.v.adjoint())
}

/// Thin SVD with orthonormal `u` (m×min), `v` (n×min) and descending
/// `sigma`. Columns belonging to (numerically) zero singular values are
/// filled in by orthonormal completion, so both factors always have
/// orthonormal columns.
pub struct JacobiSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

/// One-sided Jacobi (Hestenes) SVD.
///
/// Cyclic sweeps orthogonalize column pairs with exact complex rotations, so
/// the factorization residual and the orthogonality of the computed bases
/// stay at machine precision even when singular values cluster — which the
/// CS-decomposition step downstream depends on. Wide inputs are handled by
/// transposing.
pub fn jacobi_svd(a: &CMat) -> JacobiSvd {
    let (m, n) = a.shape();
    if m < n {
        let t = jacobi_svd(&a.adjoint());
        return JacobiSvd { u: t.v, sigma: t.sigma, v: t.u };
    }
    if n == 0 {
        return JacobiSvd { u: CMat::zeros(m, 0), sigma: vec![], v: CMat::zeros(0, 0) };
    }
    let mut work = a.clone();
    let mut v = CMat::identity(n, n);
    let total_sq: f64 = work.iter().map(|z| z.norm_sqr()).sum();
    if total_sq > 0.0 {
        // columns this far below the matrix scale are numerically null;
        // rotating them against each other only churns subnormals
        let tiny = total_sq * 1e-32;
        let tol = 1e-15;
        for _sweep in 0..40 {
            let mut converged = true;
            for p in 0..n {
                for q in (p + 1)..n {
                    let a_pp: f64 = work.column(p).iter().map(|z| z.norm_sqr()).sum();
                    let a_qq: f64 = work.column(q).iter().map(|z| z.norm_sqr()).sum();
                    if a_pp <= tiny || a_qq <= tiny {
                        continue;
                    }
                    let c: C64 = work.column(p).iter().zip(work.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                    let c_abs = c.norm();
                    if c_abs <= tol * (a_pp * a_qq).sqrt() {
                        continue;
                    }
                    converged = false;
                    // divide componentwise; Complex division would square
                    // c_abs and can underflow
                    let phase = C64::new(c.re / c_abs, c.im / c_abs);
                    let tau = (a_qq - a_pp) / (2.0 * c_abs);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let cs = 1.0 / (1.0 + t * t).sqrt();
                    let sn = t * cs;
                    let e_m = phase.conj() * C64::new(sn, 0.0);
                    let e_p = phase * C64::new(sn, 0.0);
                    let cs_c = C64::new(cs, 0.0);
                    for row in 0..m {
                        let x = work[(row, p)];
                        let y = work[(row, q)];
                        work[(row, p)] = cs_c * x - e_m * y;
                        work[(row, q)] = e_p * x + cs_c * y;
                    }
                    for row in 0..n {
                        let x = v[(row, p)];
                        let y = v[(row, q)];
                        v[(row, p)] = cs_c * x - e_m * y;
                        v[(row, q)] = e_p * x + cs_c * y;
                    }
                }
            }
            if converged {
                break;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| work.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma_max = norms.iter().cloned().fold(0.0f64, f64::max);
    let null_cut = sigma_max * 1e-14;
    let mut sigma = Vec::with_capacity(n);
    let mut u = CMat::zeros(m, n);
    let mut v_sorted = CMat::zeros(n, n);
    let mut normalized = 0usize;
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        v_sorted.set_column(dst, &v.column(src));
        if norms[src] > null_cut {
            let col = work.column(src) / C64::new(norms[src], 0.0);
            u.set_column(dst, &col);
            normalized = dst + 1;
        }
    }
    if normalized < n {
        let completion = orthonormal_completion(&u.columns(0, normalized).into_owned());
        for j in normalized..n {
            u.set_column(j, &completion.column(j - normalized));
        }
    }
    JacobiSvd { u, sigma, v: v_sorted }
}

/// Draw an n×m matrix with i.i.d. circularly symmetric complex Gaussian
/// entries of unit variance, filled row-major so draws are order-stable.
pub fn standard_complex_gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = C64::new(re * scale, im * scale);
        }
    }
    m
}
