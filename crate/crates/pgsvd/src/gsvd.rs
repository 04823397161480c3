//! Generalized singular value decomposition of a Bob/Eve channel pair.
//!
//! For H_ba (N_r×N_t) and H_ea (N_e×N_t) the decomposition produces unitary
//! U_a, U_ba, U_ea, a non-singular k×k matrix Ω and structured factors
//! Σ_ba, Σ_ea with
//!
//!   H_ba = U_ba Σ_ba [Ω⁻¹ 0] U_aᴴ,   H_ea = U_ea Σ_ea [Ω⁻¹ 0] U_aᴴ
//!
//! where k is the rank of the stacked pair and the columns of the common
//! factor split into four blocks: k−r−s directions only Eve sees, s shared
//! directions with gain pairs (b_p, e_p), b_p² + e_p² = 1, r directions only
//! Bob sees, and N_t−k dead directions.
//!
//! The computation follows the classical route: an SVD of the stacked matrix
//! yields an orthonormal column basis Q = [Q1; Q2] of rank k; a CS
//! decomposition of the partition (via the SVD of Q1, whose right singular
//! vectors simultaneously diagonalize Q2ᴴQ2 = I − Q1ᴴQ1) produces the
//! structured gains; an LQ factorization of what remains yields the
//! triangular Ω and the right unitary U_a.

use crate::error::{Error, Result};
use crate::linalg::{
    default_rank_tol, jacobi_svd, orthonormal_completion, rank, rank_from_singular_values,
    unitarity_error, C64, CMat,
};

/// A wiretap channel pair with per-receiver noise variances.
#[derive(Debug, Clone)]
pub struct WiretapChannel {
    pub h_ba: CMat,
    pub h_ea: CMat,
    pub sigma_b2: f64,
    pub sigma_e2: f64,
}

impl WiretapChannel {
    pub fn new(h_ba: CMat, h_ea: CMat, sigma_b2: f64, sigma_e2: f64) -> Result<Self> {
        if h_ba.ncols() != h_ea.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "H_ba has {} columns but H_ea has {}",
                h_ba.ncols(),
                h_ea.ncols()
            )));
        }
        if sigma_b2 <= 0.0 || sigma_e2 <= 0.0 {
            return Err(Error::InvalidArgument("noise variances must be positive".into()));
        }
        Ok(WiretapChannel { h_ba, h_ea, sigma_b2, sigma_e2 })
    }

    pub fn n_t(&self) -> usize {
        self.h_ba.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h_ba.nrows()
    }

    pub fn n_e(&self) -> usize {
        self.h_ea.nrows()
    }

    /// Relative rank tolerance actually used for a caller-supplied `tol`
    /// (0 selects the machine default for this problem size).
    pub fn effective_tol(&self, tol: f64) -> f64 {
        if tol > 0.0 {
            tol
        } else {
            default_rank_tol(self.n_t().max(self.n_r() + self.n_e()))
        }
    }
}

/// The GSVD factors and dimension bookkeeping.
#[derive(Debug, Clone)]
pub struct GsvdDecomposition {
    pub u_a: CMat,
    pub u_ba: CMat,
    pub u_ea: CMat,
    /// Non-singular k×k triangular factor with real positive diagonal.
    pub omega: CMat,
    /// Structured N_r×k Bob gain factor (zeros / D_b / I_r pattern).
    pub sigma_ba: CMat,
    /// Structured N_e×k Eve gain factor (I / D_e / zeros pattern).
    pub sigma_ea: CMat,
    pub k: usize,
    pub r: usize,
    pub s: usize,
    /// Shared-block Bob gains, ascending, strictly inside (0, 1).
    pub b: Vec<f64>,
    /// Shared-block Eve gains, descending, strictly inside (0, 1).
    pub e: Vec<f64>,
}

impl GsvdDecomposition {
    pub fn n_t(&self) -> usize {
        self.u_a.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.u_ba.nrows()
    }

    pub fn n_e(&self) -> usize {
        self.u_ea.nrows()
    }

    /// [Ω⁻¹ 0] U_aᴴ, the k×N_t common right factor of both channels.
    fn common_right_factor(&self) -> CMat {
        let k = self.k;
        let n_t = self.n_t();
        let omega_inv = self
            .omega
            .clone()
            .try_inverse()
            .expect("omega is non-singular by construction");
        let mut ext = CMat::zeros(k, n_t);
        ext.view_mut((0, 0), (k, k)).copy_from(&omega_inv);
        ext * self.u_a.adjoint()
    }
}

/// Subspace dimensions (k, r, s) from independent rank computations:
/// k = rank of the stacked pair, r = k − rank(H_ea), s = rank(H_ba) +
/// rank(H_ea) − k.
pub fn subspace_dims(channel: &WiretapChannel, tol: f64) -> Result<(usize, usize, usize)> {
    let tol_rel = channel.effective_tol(tol);
    let n1 = rank(&channel.h_ba, tol_rel)?;
    let n2 = rank(&channel.h_ea, tol_rel)?;
    let stacked = stack_channels(channel);
    let k = rank(&stacked, tol_rel)?;
    // k <= n1 + n2 and k >= max(n1, n2) always hold for exact ranks; a
    // violation means the tolerance split the three decisions inconsistently
    if k > n1 + n2 || k < n1.max(n2) {
        return Err(Error::RankAmbiguous {
            sigma: f64::NAN,
            cutoff: tol_rel,
            window: crate::linalg::RANK_AMBIGUITY_WINDOW,
        });
    }
    let r = k - n2;
    let s = n1 + n2 - k;
    Ok((k, r, s))
}

fn stack_channels(channel: &WiretapChannel) -> CMat {
    let n_r = channel.n_r();
    let n_e = channel.n_e();
    let n_t = channel.n_t();
    let mut stacked = CMat::zeros(n_r + n_e, n_t);
    if n_r > 0 {
        stacked.view_mut((0, 0), (n_r, n_t)).copy_from(&channel.h_ba);
    }
    if n_e > 0 {
        stacked.view_mut((n_r, 0), (n_e, n_t)).copy_from(&channel.h_ea);
    }
    stacked
}

/// Compute the GSVD of the pair (H_ba, H_ea). `tol` is the relative rank
/// tolerance, 0 for the machine default.
pub fn gsvd(channel: &WiretapChannel, tol: f64) -> Result<GsvdDecomposition> {
    let tol_rel = channel.effective_tol(tol);
    let n_t = channel.n_t();
    let n_r = channel.n_r();
    let n_e = channel.n_e();
    let (k_dims, r_dims, s_dims) = subspace_dims(channel, tol)?;

    let stacked = stack_channels(channel);

    // k = 0: both channels vanish; everything is the dead block
    if k_dims == 0 {
        return Ok(GsvdDecomposition {
            u_a: CMat::identity(n_t, n_t),
            u_ba: CMat::identity(n_r, n_r),
            u_ea: CMat::identity(n_e, n_e),
            omega: CMat::zeros(0, 0),
            sigma_ba: CMat::zeros(n_r, 0),
            sigma_ea: CMat::zeros(n_e, 0),
            k: 0,
            r: 0,
            s: 0,
            b: vec![],
            e: vec![],
        });
    }

    // orthonormal range basis of the stack: C = Q T with Q (N_r+N_e)×k
    let svd = jacobi_svd(&stacked);
    let k = rank_from_singular_values(&svd.sigma, tol_rel)?;
    debug_assert_eq!(k, k_dims);
    let q = svd.u.columns(0, k).into_owned();
    // T = diag(sigma_1..k) * W^H rows
    let mut t_factor = svd.v.columns(0, k).adjoint();
    for i in 0..k {
        let s = svd.sigma[i];
        for j in 0..n_t {
            t_factor[(i, j)] *= C64::new(s, 0.0);
        }
    }

    let q1 = q.rows(0, n_r).into_owned();
    let q2 = q.rows(n_r, n_e).into_owned();

    // CS step: SVD of the Bob partition fixes the common right basis V.
    // Q2ᴴQ2 = I − Q1ᴴQ1 shares its eigenbasis, so Q2·V has orthogonal
    // columns with norms sqrt(1 − c_i²) automatically.
    let (c_desc, u1_desc, v_desc) = partition_svd(&q1, k)?;

    // column order in the paper's convention: Eve-only block first (c = 0),
    // shared block with ascending Bob gains, Bob-only block last (c = 1)
    let zeros = k - (r_dims + s_dims);
    let order: Vec<usize> = (0..k).rev().collect();
    // classification by count, cross-checked against the CS values below
    let b_vals: Vec<f64> = order[zeros..zeros + s_dims].iter().map(|&i| c_desc[i]).collect();
    for (p, &bp) in b_vals.iter().enumerate() {
        if bp <= tol_rel || bp >= 1.0 - tol_rel {
            return Err(Error::RankAmbiguous {
                sigma: bp,
                cutoff: tol_rel,
                window: crate::linalg::RANK_AMBIGUITY_WINDOW,
            });
        }
        if p > 0 && bp < b_vals[p - 1] {
            return Err(Error::NonFinite("shared gains are not ordered".into()));
        }
    }

    let v = reorder_columns(&v_desc, &order);

    // Bob's left basis: rows must land on the (zero | D_b | I_r) pattern,
    // i.e. row block sizes (N_r − r − s, s, r). The descending-SVD left
    // vectors pair with descending c; reversing the leading r+s of them and
    // putting the null-space completion first produces the pattern.
    let mut u_ba_cols: Vec<usize> = (0..r_dims + s_dims).rev().collect();
    let u_ba = assemble_left_basis(&u1_desc, &mut u_ba_cols, n_r);

    // Eve's side: W2 = Q2 V already has orthogonal columns with norms
    // (1, ..., 1, e_1, ..., e_s, 0, ..., 0) in the reordered basis
    let w2 = &q2 * &v;
    let mut e_vals = Vec::with_capacity(s_dims);
    let mut u_ea_partial = CMat::zeros(n_e, zeros + s_dims);
    for col in 0..zeros + s_dims {
        let norm = w2.column(col).norm();
        if col >= zeros {
            e_vals.push(norm);
        }
        if norm <= tol_rel {
            return Err(Error::RankAmbiguous {
                sigma: norm,
                cutoff: tol_rel,
                window: crate::linalg::RANK_AMBIGUITY_WINDOW,
            });
        }
        let scaled = w2.column(col) / C64::new(norm, 0.0);
        u_ea_partial.set_column(col, &scaled);
    }
    let u_ea = complete_basis(u_ea_partial, n_e);

    // b_p² + e_p² = 1 holds to machine precision; keep the measured values
    let b = b_vals;
    let e = e_vals;

    // LQ of Vᴴ T: Vᴴ T = [L 0] U_aᴴ with L = Ω⁻¹ lower triangular
    let vt_t = v.adjoint() * &t_factor;
    let qr = vt_t.adjoint().qr();
    let mut q_r = qr.q();
    let mut r_up = qr.r();
    // normalize so diag(R) is real positive, making omega's diagonal real
    for i in 0..k {
        let d = r_up[(i, i)];
        if d.norm() > 0.0 {
            let phase = d / C64::new(d.norm(), 0.0);
            let conj = phase.conj();
            for j in 0..n_t.min(r_up.ncols()) {
                if j < r_up.ncols() {
                    r_up[(i, j)] *= conj;
                }
            }
            for row in 0..n_t {
                q_r[(row, i)] *= phase;
            }
        }
    }
    let l_factor = r_up.adjoint(); // k×k lower triangular, Ω⁻¹
    let omega = l_factor
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NonFinite("omega inverse".into()))?;
    let completion = orthonormal_completion(&q_r);
    let mut u_a = CMat::zeros(n_t, n_t);
    u_a.view_mut((0, 0), (n_t, k)).copy_from(&q_r);
    if n_t > k {
        u_a.view_mut((0, k), (n_t, n_t - k)).copy_from(&completion);
    }

    let sigma_ba = build_sigma_ba(n_r, k, r_dims, s_dims, &b);
    let sigma_ea = build_sigma_ea(n_e, k, r_dims, s_dims, &e);

    Ok(GsvdDecomposition {
        u_a,
        u_ba,
        u_ea,
        omega,
        sigma_ba,
        sigma_ea,
        k,
        r: r_dims,
        s: s_dims,
        b,
        e,
    })
}

/// Full SVD of the N_r×k partition: singular values extended with zeros to
/// length k (descending), left vectors (N_r×min), right vectors (k×k).
fn partition_svd(q1: &CMat, k: usize) -> Result<(Vec<f64>, CMat, CMat)> {
    let n_r = q1.nrows();
    if n_r == 0 {
        // no Bob rows: all gains zero, any unitary right basis works
        return Ok((vec![0.0; k], CMat::zeros(0, 0), CMat::identity(k, k)));
    }
    let svd = jacobi_svd(q1);
    let mut c = svd.sigma.clone();
    // singular values of a sub-unitary matrix live in [0, 1]
    for v in &mut c {
        *v = v.clamp(0.0, 1.0);
    }
    c.resize(k, 0.0);
    let thin = svd.v.ncols();
    let v = if thin < k {
        let completion = orthonormal_completion(&svd.v);
        let mut full = CMat::zeros(k, k);
        full.view_mut((0, 0), (k, thin)).copy_from(&svd.v);
        full.view_mut((0, thin), (k, k - thin)).copy_from(&completion);
        full
    } else {
        svd.v
    };
    Ok((c, svd.u, v))
}

fn reorder_columns(m: &CMat, order: &[usize]) -> CMat {
    let mut out = CMat::zeros(m.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        out.set_column(dst, &m.column(src));
    }
    out
}

/// Arrange the left singular vectors so the pattern rows come out as
/// (zero rows | shared | ones): completion first, then `cols` (already
/// reversed) from the SVD basis.
fn assemble_left_basis(u_desc: &CMat, cols: &mut Vec<usize>, n_rows: usize) -> CMat {
    let used = cols.len().min(n_rows);
    let mut picked = CMat::zeros(n_rows, used);
    for (dst, &src) in cols.iter().take(used).enumerate() {
        picked.set_column(dst, &u_desc.column(src));
    }
    let completion = orthonormal_completion(&picked);
    let mut out = CMat::zeros(n_rows, n_rows);
    let lead = n_rows - used;
    if lead > 0 {
        out.view_mut((0, 0), (n_rows, lead)).copy_from(&completion);
    }
    out.view_mut((0, lead), (n_rows, used)).copy_from(&picked);
    out
}

fn complete_basis(partial: CMat, n: usize) -> CMat {
    let j = partial.ncols();
    if j == n {
        return partial;
    }
    let completion = orthonormal_completion(&partial);
    let mut out = CMat::zeros(n, n);
    if j > 0 {
        out.view_mut((0, 0), (n, j)).copy_from(&partial);
    }
    out.view_mut((0, j), (n, n - j)).copy_from(&completion);
    out
}

fn build_sigma_ba(n_r: usize, k: usize, r: usize, s: usize, b: &[f64]) -> CMat {
    let mut m = CMat::zeros(n_r, k);
    let zeros = k - r - s;
    let row0 = n_r - r - s;
    for (p, &bp) in b.iter().enumerate() {
        m[(row0 + p, zeros + p)] = C64::new(bp, 0.0);
    }
    for j in 0..r {
        m[(row0 + s + j, zeros + s + j)] = C64::new(1.0, 0.0);
    }
    m
}

fn build_sigma_ea(n_e: usize, k: usize, r: usize, s: usize, e: &[f64]) -> CMat {
    let mut m = CMat::zeros(n_e, k);
    let zeros = k - r - s;
    for j in 0..zeros {
        m[(j, j)] = C64::new(1.0, 0.0);
    }
    for (p, &ep) in e.iter().enumerate() {
        m[(zeros + p, zeros + p)] = C64::new(ep, 0.0);
    }
    m
}

/// Multiply the factors back into (H_ba, H_ea). Test support.
pub fn reconstruct(d: &GsvdDecomposition) -> (CMat, CMat) {
    if d.k == 0 {
        return (CMat::zeros(d.n_r(), d.n_t()), CMat::zeros(d.n_e(), d.n_t()));
    }
    let right = d.common_right_factor();
    (&d.u_ba * &d.sigma_ba * &right, &d.u_ea * &d.sigma_ea * &right)
}

/// Reconstruction error, unitarity errors and pair-normalization error of a
/// decomposition against the original channel. Test and diagnostics support.
pub struct GsvdResidual {
    pub recon_ba: f64,
    pub recon_ea: f64,
    pub unitarity: f64,
    pub pair_norm: f64,
}

pub fn residuals(channel: &WiretapChannel, d: &GsvdDecomposition) -> GsvdResidual {
    let (h_ba, h_ea) = reconstruct(d);
    let recon_ba = crate::linalg::rel_frob_err(&h_ba, &channel.h_ba);
    let recon_ea = crate::linalg::rel_frob_err(&h_ea, &channel.h_ea);
    let unitarity = unitarity_error(&d.u_a)
        .max(unitarity_error(&d.u_ba))
        .max(unitarity_error(&d.u_ea));
    let pair_norm = d
        .b
        .iter()
        .zip(&d.e)
        .map(|(b, e)| (b * b + e * e - 1.0).abs())
        .fold(0.0f64, f64::max);
    GsvdResidual { recon_ba, recon_ea, unitarity, pair_norm }
}
