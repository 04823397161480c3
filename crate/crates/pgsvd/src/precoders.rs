//! Precoder construction: the classical GSVD baseline, the per-group GSVD
//! (PG-GSVD) equivalent-channel machinery, subchannel pairing, the iterative
//! secrecy-rate optimizer and the high-SNR saturating construction.

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::gsvd::{gsvd, GsvdDecomposition, WiretapChannel};
use crate::linalg::{orthonormal_completion, polar_unitary, C64, CMat};
use crate::mi::{mi_gradient, mmse_matrix, mutual_information, NoiseQuadrature};

const LN_2: f64 = std::f64::consts::LN_2;

/// How each GSVD position couples to the receivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionClass {
    EveOnly,
    Shared,
    BobOnly,
    Dead,
}

/// Per-position scalar gains of the decoupled channel model.
///
/// Position j carries the scalar pair (g_b[j], g_e[j]) and the transmit
/// power weight w[j] (squared norm of column j of the inner precoder factor
/// A). Charging w[j]·p_j against the power budget keeps tr(GGᴴ) exact for
/// any non-singular Ω; on the w-weighted power scale the scalar model
/// becomes y = g·√(charged power)·x + n, and in the shared block
/// (g_b·√w, g_e·√w) recover the decomposition pair (b_p, e_p).
#[derive(Debug, Clone)]
pub struct HattedGains {
    pub g_b: Vec<f64>,
    pub g_e: Vec<f64>,
    pub w: Vec<f64>,
    pub k: usize,
    pub r: usize,
    pub s: usize,
}

impl HattedGains {
    pub fn n_t(&self) -> usize {
        self.g_b.len()
    }

    /// Block sizes (Eve-only, shared, Bob-only, dead).
    pub fn block_sizes(&self) -> (usize, usize, usize, usize) {
        (self.k - self.r - self.s, self.s, self.r, self.n_t() - self.k)
    }

    pub fn class_of(&self, j: usize) -> PositionClass {
        let zeros = self.k - self.r - self.s;
        if j < zeros {
            PositionClass::EveOnly
        } else if j < zeros + self.s {
            PositionClass::Shared
        } else if j < self.k {
            PositionClass::BobOnly
        } else {
            PositionClass::Dead
        }
    }

    /// Hatted gain pair for a (possibly padded) position index.
    fn gains_at(&self, j: usize) -> (f64, f64) {
        if j < self.n_t() {
            (self.g_b[j], self.g_e[j])
        } else {
            (0.0, 0.0)
        }
    }

    fn weight_at(&self, j: usize) -> f64 {
        if j < self.n_t() {
            self.w[j]
        } else {
            0.0
        }
    }
}

/// Scalar per-position gains and power weights from a decomposition.
pub fn hatted_gains(d: &GsvdDecomposition, n_t: usize) -> HattedGains {
    let (k, r, s) = (d.k, d.r, d.s);
    let zeros = k - r - s;
    let mut g_b = vec![0.0; n_t];
    let mut g_e = vec![0.0; n_t];
    let mut w = vec![0.0; n_t];
    for j in 0..k {
        let col_norm_sq: f64 = d.omega.column(j).iter().map(|z| z.norm_sqr()).sum();
        w[j] = col_norm_sq;
        let sqrt_w = col_norm_sq.sqrt();
        let raw_b = if j < zeros {
            0.0
        } else if j < zeros + s {
            d.b[j - zeros]
        } else {
            1.0
        };
        let raw_e = if j < zeros {
            1.0
        } else if j < zeros + s {
            d.e[j - zeros]
        } else {
            0.0
        };
        if sqrt_w > 0.0 {
            g_b[j] = raw_b / sqrt_w;
            g_e[j] = raw_e / sqrt_w;
        }
    }
    HattedGains { g_b, g_e, w, k, r, s }
}

/// Subchannel-to-group assignment strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingStrategy {
    /// One Bob-only position per group, placed in the group's last slot.
    /// Feasible iff (k − N₂)·Ns ≥ N_t.
    Theorem2,
    /// Positions sorted by descending Bob advantage g_b − g_e, dealt
    /// round-robin so the strongest positions spread across groups.
    BobAdvantageInterleave,
}

/// A per-group GSVD precoder: the slot→position permutation, per-group
/// diagonal powers (in charged, w-weighted units) and per-group unitary
/// rotations. Position indices ≥ N_t are zero-gain padding slots used when
/// Ns does not divide N_t.
#[derive(Debug, Clone)]
pub struct PgGsvdPrecoder {
    pub perm: Vec<usize>,
    pub ns: usize,
    /// Diagonal of P_s for each group, length Ns each.
    pub group_powers: Vec<Vec<f64>>,
    /// Unitary V_s for each group.
    pub group_rotations: Vec<CMat>,
}

impl PgGsvdPrecoder {
    pub fn s_groups(&self) -> usize {
        self.group_powers.len()
    }

    pub fn total_power(&self) -> f64 {
        self.group_powers.iter().flatten().sum()
    }

    /// Positions of group s, slot by slot.
    pub fn group_positions(&self, s: usize) -> &[usize] {
        &self.perm[s * self.ns..(s + 1) * self.ns]
    }
}

fn padded_len(n_t: usize, ns: usize) -> usize {
    n_t.div_ceil(ns) * ns
}

/// Build the pairing permutation. Returned slots index positions 0..n_pad,
/// where indices ≥ N_t are padding.
pub fn pair_subchannels(
    h: &HattedGains,
    ns: usize,
    strategy: PairingStrategy,
) -> Result<Vec<usize>> {
    let n_t = h.n_t();
    if ns == 0 || ns > n_t {
        return Err(Error::InvalidArgument(format!("group size {ns} must be in 1..={n_t}")));
    }
    let n_pad = padded_len(n_t, ns);
    let s_groups = n_pad / ns;
    match strategy {
        PairingStrategy::Theorem2 => {
            // r = k − N₂ Bob-only positions carry the groups
            if h.r * ns < n_t || h.r < s_groups {
                return Err(Error::InfeasiblePairing { k: h.k, n2: h.k - h.r, ns, nt: n_t });
            }
            let zeros = h.k - h.r - h.s;
            let bob_only: Vec<usize> = (zeros + h.s..h.k).collect();
            let mut fillers: Vec<usize> = (0..zeros) // Eve-only
                .chain(h.k..n_pad) // dead and padding
                .chain(zeros..zeros + h.s) // shared
                .chain(bob_only[s_groups..].iter().copied()) // spare Bob-only
                .collect();
            fillers.reverse(); // pop() then consumes in the order listed above
            let mut perm = vec![0usize; n_pad];
            for s in 0..s_groups {
                for i in 0..ns - 1 {
                    perm[s * ns + i] = fillers.pop().expect("filler count matches slots");
                }
                perm[s * ns + ns - 1] = bob_only[s];
            }
            Ok(perm)
        }
        PairingStrategy::BobAdvantageInterleave => {
            let mut order: Vec<usize> = (0..n_pad).collect();
            let adv = |j: usize| {
                let (gb, ge) = h.gains_at(j);
                gb - ge
            };
            order.sort_by(|&a, &b| adv(b).total_cmp(&adv(a)).then(a.cmp(&b)));
            let mut perm = vec![0usize; n_pad];
            for (rank, &pos) in order.iter().enumerate() {
                let group = rank % s_groups;
                let slot = rank / s_groups;
                perm[group * ns + slot] = pos;
            }
            Ok(perm)
        }
    }
}

/// Assemble the physical N_t×N_t precoding matrix G = U_a A P^{1/2} V.
/// Fails if power sits on a dead or padded position (it could not be
/// radiated) or if a rotation couples a powered live slot with a padding
/// slot (the padded symbol has no physical antenna to leave from).
pub fn assemble_g(d: &GsvdDecomposition, pre: &PgGsvdPrecoder) -> Result<CMat> {
    let n_t = d.n_t();
    let ns = pre.ns;
    let mut v_full = CMat::zeros(n_t, n_t);
    let mut p_full = vec![0.0; n_t];
    for s in 0..pre.s_groups() {
        let positions = pre.group_positions(s);
        let v_s = &pre.group_rotations[s];
        let q_s = &pre.group_powers[s];
        for i in 0..ns {
            let pos_i = positions[i];
            if pos_i >= n_t {
                if q_s[i] > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "group {s} slot {i} puts power {} on padding",
                        q_s[i]
                    )));
                }
                for j in 0..ns {
                    if positions[j] < n_t && q_s[j] > 1e-12 && v_s[(j, i)].norm() > 1e-9 {
                        return Err(Error::InvalidArgument(format!(
                            "group {s} rotation couples powered slot {j} with padding slot {i}"
                        )));
                    }
                }
                continue;
            }
            let w = weight_of(d, pos_i);
            if w == 0.0 {
                if q_s[i] > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "group {s} slot {i} puts power {} on dead position {pos_i}",
                        q_s[i]
                    )));
                }
            } else if q_s[i] > 0.0 {
                p_full[pos_i] = q_s[i] / w;
            }
            for j in 0..ns {
                let pos_j = positions[j];
                if pos_j < n_t {
                    v_full[(pos_i, pos_j)] = v_s[(i, j)];
                }
            }
        }
    }
    // A P^{1/2} with A = [Ω 0; 0 0]
    let mut ap = CMat::zeros(n_t, n_t);
    ap.view_mut((0, 0), (d.k, d.k)).copy_from(&d.omega);
    for j in 0..n_t {
        let scale = C64::new(p_full[j].sqrt(), 0.0);
        for i in 0..n_t {
            ap[(i, j)] *= scale;
        }
    }
    Ok(&d.u_a * ap * v_full)
}

fn weight_of(d: &GsvdDecomposition, pos: usize) -> f64 {
    if pos >= d.k {
        return 0.0;
    }
    d.omega.column(pos).iter().map(|z| z.norm_sqr()).sum()
}

/// Effective Ns×Ns group channels (Bob, Eve): T = diag(g)·P_s^{1/2}·V_s on
/// the charged-power scale.
pub fn group_channels(h: &HattedGains, pre: &PgGsvdPrecoder, s: usize) -> (CMat, CMat) {
    let ns = pre.ns;
    let positions = pre.group_positions(s);
    let v_s = &pre.group_rotations[s];
    let q_s = &pre.group_powers[s];
    let mut t_b = CMat::zeros(ns, ns);
    let mut t_e = CMat::zeros(ns, ns);
    for i in 0..ns {
        let (gb, ge) = h.gains_at(positions[i]);
        let amp = q_s[i].max(0.0).sqrt();
        for j in 0..ns {
            t_b[(i, j)] = C64::new(gb * amp, 0.0) * v_s[(i, j)];
            t_e[(i, j)] = C64::new(ge * amp, 0.0) * v_s[(i, j)];
        }
    }
    (t_b, t_e)
}

/// Grouped secrecy objective Σ_s [I_b,s − I_e,s] in bits, unclamped.
pub fn grouped_objective(
    h: &HattedGains,
    pre: &PgGsvdPrecoder,
    channel: &WiretapChannel,
    c: &Constellation,
    q: &NoiseQuadrature,
) -> Result<f64> {
    let mut total = 0.0;
    for s in 0..pre.s_groups() {
        total += group_objective(h, pre, channel, c, q, s)?;
    }
    Ok(total)
}

fn group_objective(
    h: &HattedGains,
    pre: &PgGsvdPrecoder,
    channel: &WiretapChannel,
    c: &Constellation,
    q: &NoiseQuadrature,
    s: usize,
) -> Result<f64> {
    let (t_b, t_e) = group_channels(h, pre, s);
    let i_b = mutual_information(&t_b, c, channel.sigma_b2, q)?.bits;
    let i_e = mutual_information(&t_e, c, channel.sigma_e2, q)?.bits;
    Ok(i_b - i_e)
}

// ---------------------------------------------------------------------------
// GSVD baseline
// ---------------------------------------------------------------------------

/// Result of the per-subchannel GSVD power allocation.
#[derive(Debug, Clone)]
pub struct GsvdPrecoderResult {
    /// Physical per-position powers p_j (column scaling of G).
    pub powers: Vec<f64>,
    pub g: CMat,
    /// Decoupled secrecy rate Σ_i [I_b,i − I_e,i], clamped at zero.
    pub rate_bits: f64,
    pub iterations: usize,
}

/// The classical GSVD precoder G = U_a A P^{1/2} with per-subchannel powers
/// maximizing the decoupled finite-alphabet secrecy rate under
/// Σ w_j p_j ≤ P. Only subchannels where Bob is strictly stronger than Eve
/// receive power; with no such subchannel the result is G = 0 at rate 0.
pub fn gsvd_precoder(
    d: &GsvdDecomposition,
    c: &Constellation,
    channel: &WiretapChannel,
    p_total: f64,
    q: &NoiseQuadrature,
) -> Result<GsvdPrecoderResult> {
    if p_total < 0.0 {
        return Err(Error::InvalidArgument("power budget must be nonnegative".into()));
    }
    let n_t = d.n_t();
    let h = hatted_gains(d, n_t);
    let usable: Vec<usize> = (0..n_t)
        .filter(|&j| {
            h.w[j] > 0.0
                && h.g_b[j] > 0.0
                && h.g_b[j] * h.g_b[j] / channel.sigma_b2
                    > h.g_e[j] * h.g_e[j] / channel.sigma_e2
        })
        .collect();
    let mut charged = vec![0.0; n_t];
    let mut iterations = 0;
    if !usable.is_empty() && p_total > 0.0 {
        let snr_b: Vec<f64> =
            usable.iter().map(|&j| h.g_b[j] * h.g_b[j] / channel.sigma_b2).collect();
        let snr_e: Vec<f64> =
            usable.iter().map(|&j| h.g_e[j] * h.g_e[j] / channel.sigma_e2).collect();
        let gh_points = 32;
        let objective = |t: &[f64]| -> Result<f64> {
            let mut acc = 0.0;
            for (i, &ti) in t.iter().enumerate() {
                acc += crate::mi::scalar_rate(c, snr_b[i] * ti, gh_points)?
                    - crate::mi::scalar_rate(c, snr_e[i] * ti, gh_points)?;
            }
            Ok(acc)
        };
        let project = |t: &mut Vec<f64>| {
            for v in t.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let sum: f64 = t.iter().sum();
            if sum > p_total {
                let f = p_total / sum;
                for v in t.iter_mut() {
                    *v *= f;
                }
            }
        };
        let mut t = vec![p_total / usable.len() as f64; usable.len()];
        let mut best = objective(&t)?;
        let mut step = p_total / usable.len() as f64;
        for _ in 0..200 {
            iterations += 1;
            let mut grad = vec![0.0; usable.len()];
            for i in 0..usable.len() {
                grad[i] = (snr_b[i] * crate::mi::scalar_mmse(c, snr_b[i] * t[i], gh_points)?
                    - snr_e[i] * crate::mi::scalar_mmse(c, snr_e[i] * t[i], gh_points)?)
                    / LN_2;
            }
            let gmax = grad.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if gmax < 1e-12 {
                break;
            }
            let mut mu = step / gmax;
            let mut accepted = false;
            for _ in 0..20 {
                let mut cand: Vec<f64> =
                    t.iter().zip(&grad).map(|(ti, gi)| ti + mu * gi).collect();
                project(&mut cand);
                let val = objective(&cand)?;
                if val > best + 1e-12 {
                    t = cand;
                    step = (mu * gmax * 2.0).min(p_total);
                    best = val;
                    accepted = true;
                    break;
                }
                mu *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        for (i, &j) in usable.iter().enumerate() {
            charged[j] = t[i];
        }
    }
    // final rate with the caller's quadrature, identical seeds on both sides
    let mut rate = 0.0;
    for j in 0..n_t {
        if charged[j] > 0.0 {
            let t_b = CMat::from_element(1, 1, C64::new(h.g_b[j] * charged[j].sqrt(), 0.0));
            let t_e = CMat::from_element(1, 1, C64::new(h.g_e[j] * charged[j].sqrt(), 0.0));
            rate += mutual_information(&t_b, c, channel.sigma_b2, q)?.bits
                - mutual_information(&t_e, c, channel.sigma_e2, q)?.bits;
        }
    }
    let powers: Vec<f64> =
        (0..n_t).map(|j| if h.w[j] > 0.0 { charged[j] / h.w[j] } else { 0.0 }).collect();
    let mut ap = CMat::zeros(n_t, n_t);
    ap.view_mut((0, 0), (d.k, d.k)).copy_from(&d.omega);
    for j in 0..n_t {
        let scale = C64::new(powers[j].sqrt(), 0.0);
        for i in 0..n_t {
            ap[(i, j)] *= scale;
        }
    }
    let g = &d.u_a * ap;
    Ok(GsvdPrecoderResult { powers, g, rate_bits: rate.max(0.0), iterations })
}

// ---------------------------------------------------------------------------
// High-SNR construction
// ---------------------------------------------------------------------------

/// Theorem-2 style construction: all power on one Bob-only position per
/// group (the last slot, P/S each), with a spreading rotation that keeps
/// the Mᴺˢ group symbols distinguishable through that single dimension.
/// Eve's group channels are exactly zero at any power level.
pub fn high_snr_construction(
    d: &GsvdDecomposition,
    h: &HattedGains,
    ns: usize,
    p_total: f64,
    c: &Constellation,
) -> Result<PgGsvdPrecoder> {
    let _ = d;
    let perm = pair_subchannels(h, ns, PairingStrategy::Theorem2)?;
    let s_groups = perm.len() / ns;
    let per_group = if s_groups > 0 { p_total / s_groups as f64 } else { 0.0 };
    let v_s = spreading_rotation(ns, c)?;
    let mut group_powers = Vec::with_capacity(s_groups);
    for _ in 0..s_groups {
        let mut q = vec![0.0; ns];
        q[ns - 1] = per_group;
        group_powers.push(q);
    }
    Ok(PgGsvdPrecoder {
        perm,
        ns,
        group_powers,
        group_rotations: vec![v_s; s_groups],
    })
}

/// Unitary whose last row is v = (β⁰, …, β^{Ns−1})/√Ns with β on the unit
/// circle chosen so all Mᴺˢ superpositions v·x are distinct.
fn spreading_rotation(ns: usize, c: &Constellation) -> Result<CMat> {
    if ns == 1 {
        return Ok(CMat::identity(1, 1));
    }
    let total = crate::constellation::product_len(c, ns)?;
    if total > 1 << 16 {
        return Err(Error::EnumerationOverflow { m: c.m, n: ns });
    }
    let norm = 1.0 / (ns as f64).sqrt();
    let mut theta: f64 = 0.5;
    for _ in 0..32 {
        let beta = C64::new(theta.cos(), theta.sin());
        let mut v = Vec::with_capacity(ns);
        let mut pow = C64::new(1.0, 0.0);
        for _ in 0..ns {
            v.push(pow * C64::new(norm, 0.0));
            pow *= beta;
        }
        if superpositions_distinct(&v, c, ns, total) {
            // build the unitary with v as its last row
            let mut col = CMat::zeros(ns, 1);
            for i in 0..ns {
                col[(i, 0)] = v[i].conj();
            }
            let rest = orthonormal_completion(&col);
            let mut vh = CMat::zeros(ns, ns);
            vh.view_mut((0, 0), (ns, ns - 1)).copy_from(&rest);
            vh.view_mut((0, ns - 1), (ns, 1)).copy_from(&col);
            return Ok(vh.adjoint());
        }
        theta += 0.37;
    }
    Err(Error::InvalidArgument(format!(
        "no injective spreading angle found for Ns = {ns}, M = {}",
        c.m
    )))
}

fn superpositions_distinct(v: &[C64], c: &Constellation, ns: usize, total: usize) -> bool {
    let mut vals: Vec<C64> = (0..total)
        .map(|idx| {
            let x = crate::constellation::vector_at(c, ns, idx);
            v.iter().zip(&x).map(|(vi, xi)| vi * xi).sum()
        })
        .collect();
    vals.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    // sorted sweep is enough here: collisions show up as near-equal reals
    let min_gap = 1e-6;
    for i in 0..vals.len() {
        for j in (i + 1)..vals.len() {
            if vals[j].re - vals[i].re >= min_gap {
                break;
            }
            if (vals[j] - vals[i]).norm() < min_gap {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Iterative optimizer
// ---------------------------------------------------------------------------

/// Starting point selection for the optimizer.
#[derive(Debug, Clone, Default)]
pub enum InitStrategy {
    /// Evaluate the candidate initializations (uniform+DFT, GSVD-mapped,
    /// high-SNR construction where feasible) and start from the best.
    #[default]
    Auto,
    /// Uniform power over Bob-visible positions, DFT rotations.
    UniformDft,
    /// Start from a caller-supplied precoder (must match the group layout).
    FromPrecoder(PgGsvdPrecoder),
}

#[derive(Debug, Clone)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Convergence threshold on the objective improvement, in bits.
    pub epsilon: f64,
    pub initial_step: f64,
    /// Step shrink factor of the backtracking line search, in (0, 1).
    pub backtrack: f64,
    pub quadrature: NoiseQuadrature,
    pub init: InitStrategy,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 100,
            epsilon: 1e-4,
            initial_step: 1.0,
            backtrack: 0.5,
            quadrature: NoiseQuadrature::monte_carlo(crate::mi::DEFAULT_MC_SAMPLES, 0),
            init: InitStrategy::Auto,
        }
    }
}

/// Optimizer output: the precoder, the objective trace (one entry per
/// iteration, non-decreasing by construction) and the supporting
/// decomposition.
pub struct OptimizedPrecoder {
    pub precoder: PgGsvdPrecoder,
    pub trace: Vec<f64>,
    /// Final grouped secrecy rate, clamped at zero.
    pub rate_bits: f64,
    pub iterations: usize,
    pub decomposition: GsvdDecomposition,
    pub gains: HattedGains,
}

/// Iterative maximization of the grouped secrecy rate over the per-group
/// powers and rotations with common random numbers.
///
/// Each iteration takes a projected gradient step on the power diagonals
/// (clamp to ≥ 0, renormalize the charged total to P) followed by per-group
/// Euclidean gradient steps on V_s retracted to the unitary set via the
/// polar factor. Every step is guarded by a backtracking line search on the
/// fixed-noise objective, so the recorded trace never decreases. Stops when
/// one round improves by at most epsilon or the iteration budget runs out.
pub fn optimize_pg_gsvd(
    channel: &WiretapChannel,
    c: &Constellation,
    p_total: f64,
    ns: usize,
    strategy: PairingStrategy,
    opts: &OptimOptions,
) -> Result<OptimizedPrecoder> {
    if p_total < 0.0 {
        return Err(Error::InvalidArgument("power budget must be nonnegative".into()));
    }
    if opts.backtrack <= 0.0 || opts.backtrack >= 1.0 {
        return Err(Error::InvalidArgument("backtracking factor must be in (0, 1)".into()));
    }
    let d = gsvd(channel, 0.0)?;
    let h = hatted_gains(&d, channel.n_t());
    let perm = pair_subchannels(&h, ns, strategy)?;
    let q = &opts.quadrature;

    let mut pre = initial_precoder(channel, &d, &h, &perm, ns, p_total, c, opts)?;
    let s_groups = pre.s_groups();

    let mut group_vals = Vec::with_capacity(s_groups);
    for s in 0..s_groups {
        group_vals.push(group_objective(&h, &pre, channel, c, q, s)?);
    }
    let mut current: f64 = group_vals.iter().sum();
    let mut trace = vec![current];

    let mut mu_p = opts.initial_step;
    let mut mu_v = vec![opts.initial_step; s_groups];
    let mut iterations = 0;

    for _ in 0..opts.max_iters {
        iterations += 1;
        let before = current;

        // power step over all groups jointly; renormalization couples them
        let grad_q = power_gradient(&h, &pre, channel, c, q)?;
        let gmax = grad_q.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
        if gmax > 1e-14 && p_total > 0.0 {
            let scale = p_total / (pre.perm.len() as f64) / gmax;
            let mut mu = mu_p * 2.0;
            for _ in 0..20 {
                let mut cand = pre.clone();
                for s in 0..s_groups {
                    for i in 0..ns {
                        cand.group_powers[s][i] =
                            (cand.group_powers[s][i] + mu * scale * grad_q[s][i]).max(0.0);
                    }
                }
                normalize_power(&mut cand, &h, p_total);
                let mut vals = Vec::with_capacity(s_groups);
                for s in 0..s_groups {
                    vals.push(group_objective(&h, &cand, channel, c, q, s)?);
                }
                let total: f64 = vals.iter().sum();
                if total > current + 1e-12 {
                    pre = cand;
                    group_vals = vals;
                    current = total;
                    mu_p = mu;
                    break;
                }
                mu *= opts.backtrack;
            }
        }

        // rotation steps, group by group (independent objectives)
        for s in 0..s_groups {
            let grad_v = rotation_gradient(&h, &pre, channel, c, q, s)?;
            let gnorm = crate::linalg::frob_norm(&grad_v);
            if gnorm < 1e-14 {
                continue;
            }
            let dir = grad_v / C64::new(gnorm, 0.0);
            let mut mu = mu_v[s] * 2.0;
            for _ in 0..20 {
                let stepped = &pre.group_rotations[s] + &dir * C64::new(mu, 0.0);
                let cand_v = polar_unitary(&stepped)?;
                let mut cand = pre.clone();
                cand.group_rotations[s] = cand_v;
                let val = group_objective(&h, &cand, channel, c, q, s)?;
                if val > group_vals[s] + 1e-12 {
                    current += val - group_vals[s];
                    group_vals[s] = val;
                    pre = cand;
                    mu_v[s] = mu;
                    break;
                }
                mu *= opts.backtrack;
            }
        }

        trace.push(current);
        if current - before <= opts.epsilon {
            break;
        }
    }

    Ok(OptimizedPrecoder {
        rate_bits: current.max(0.0),
        precoder: pre,
        trace,
        iterations,
        decomposition: d,
        gains: h,
    })
}

/// Scale all group powers so the charged total equals the budget. Powers on
/// dead or padded slots are zeroed first; they cannot be radiated.
fn normalize_power(pre: &mut PgGsvdPrecoder, h: &HattedGains, p_total: f64) {
    for s in 0..pre.s_groups() {
        for i in 0..pre.ns {
            let pos = pre.group_positions(s)[i];
            if h.weight_at(pos) == 0.0 {
                pre.group_powers[s][i] = 0.0;
            }
        }
    }
    let sum = pre.total_power();
    if sum > 0.0 {
        let f = p_total / sum;
        for q in pre.group_powers.iter_mut().flatten() {
            *q *= f;
        }
    }
}

/// ∂/∂q_i of the group objectives via the MMSE relation: per side
/// g_i²/(σ² ln 2) · Re[(V E Vᴴ)_ii]. Finite everywhere, including q_i = 0.
fn power_gradient(
    h: &HattedGains,
    pre: &PgGsvdPrecoder,
    channel: &WiretapChannel,
    c: &Constellation,
    q: &NoiseQuadrature,
) -> Result<Vec<Vec<f64>>> {
    let ns = pre.ns;
    let mut grad = Vec::with_capacity(pre.s_groups());
    for s in 0..pre.s_groups() {
        let (t_b, t_e) = group_channels(h, pre, s);
        let e_b = mmse_matrix(&t_b, c, channel.sigma_b2, q)?;
        let e_e = mmse_matrix(&t_e, c, channel.sigma_e2, q)?;
        let v_s = &pre.group_rotations[s];
        let proj_b = v_s * e_b * v_s.adjoint();
        let proj_e = v_s * e_e * v_s.adjoint();
        let mut g = vec![0.0; ns];
        for i in 0..ns {
            let (gb, ge) = h.gains_at(pre.group_positions(s)[i]);
            g[i] = gb * gb / (channel.sigma_b2 * LN_2) * proj_b[(i, i)].re
                - ge * ge / (channel.sigma_e2 * LN_2) * proj_e[(i, i)].re;
        }
        grad.push(g);
    }
    Ok(grad)
}

/// Wirtinger gradient of the group objective with respect to V_s at fixed
/// powers; the per-side effective channel is diag(g)·P_s^{1/2}.
fn rotation_gradient(
    h: &HattedGains,
    pre: &PgGsvdPrecoder,
    channel: &WiretapChannel,
    c: &Constellation,
    q: &NoiseQuadrature,
    s: usize,
) -> Result<CMat> {
    let ns = pre.ns;
    let mut d_b = CMat::zeros(ns, ns);
    let mut d_e = CMat::zeros(ns, ns);
    for i in 0..ns {
        let (gb, ge) = h.gains_at(pre.group_positions(s)[i]);
        let amp = pre.group_powers[s][i].max(0.0).sqrt();
        d_b[(i, i)] = C64::new(gb * amp, 0.0);
        d_e[(i, i)] = C64::new(ge * amp, 0.0);
    }
    let v_s = &pre.group_rotations[s];
    let g_b = mi_gradient(&d_b, v_s, c, channel.sigma_b2, q)?;
    let g_e = mi_gradient(&d_e, v_s, c, channel.sigma_e2, q)?;
    Ok(g_b - g_e)
}

#[allow(clippy::too_many_arguments)]
fn initial_precoder(
    channel: &WiretapChannel,
    d: &GsvdDecomposition,
    h: &HattedGains,
    perm: &[usize],
    ns: usize,
    p_total: f64,
    c: &Constellation,
    opts: &OptimOptions,
) -> Result<PgGsvdPrecoder> {
    match &opts.init {
        InitStrategy::FromPrecoder(pre) => {
            if pre.ns != ns || pre.perm.len() != perm.len() {
                return Err(Error::InvalidArgument(
                    "supplied initial precoder does not match the group layout".into(),
                ));
            }
            Ok(pre.clone())
        }
        InitStrategy::UniformDft => Ok(uniform_dft_init(h, perm, ns, p_total)),
        InitStrategy::Auto => {
            let mut candidates = vec![uniform_dft_init(h, perm, ns, p_total)];
            if let Ok(mapped) = gsvd_mapped_init(channel, d, h, perm, ns, p_total, c) {
                candidates.push(mapped);
            }
            if let Ok(constructed) = high_snr_construction(d, h, ns, p_total, c) {
                if constructed.perm == perm {
                    candidates.push(constructed);
                }
            }
            let q = &opts.quadrature;
            let mut best = None;
            let mut best_val = f64::NEG_INFINITY;
            for cand in candidates {
                let val = grouped_objective(h, &cand, channel, c, q)?;
                if val > best_val {
                    best_val = val;
                    best = Some(cand);
                }
            }
            Ok(best.expect("at least one candidate"))
        }
    }
}

/// Uniform power over Bob-visible positions, DFT rotations. The DFT keeps
/// symmetric constellations away from the stationary point that identity
/// rotations sit on.
fn uniform_dft_init(h: &HattedGains, perm: &[usize], ns: usize, p_total: f64) -> PgGsvdPrecoder {
    let s_groups = perm.len() / ns;
    let visible = perm
        .iter()
        .filter(|&&pos| pos < h.n_t() && h.g_b[pos] > 0.0 && h.w[pos] > 0.0)
        .count();
    let share = if visible > 0 { p_total / visible as f64 } else { 0.0 };
    let dft = dft_matrix(ns);
    let mut group_powers = Vec::with_capacity(s_groups);
    for s in 0..s_groups {
        let mut q = vec![0.0; ns];
        for i in 0..ns {
            let pos = perm[s * ns + i];
            if pos < h.n_t() && h.g_b[pos] > 0.0 && h.w[pos] > 0.0 {
                q[i] = share;
            }
        }
        group_powers.push(q);
    }
    PgGsvdPrecoder {
        perm: perm.to_vec(),
        ns,
        group_powers,
        group_rotations: vec![dft; s_groups],
    }
}

/// Map the GSVD baseline allocation into the group layout with V_s = I, so
/// the optimizer starts no worse than the baseline design.
fn gsvd_mapped_init(
    channel: &WiretapChannel,
    d: &GsvdDecomposition,
    h: &HattedGains,
    perm: &[usize],
    ns: usize,
    p_total: f64,
    c: &Constellation,
) -> Result<PgGsvdPrecoder> {
    let base = gsvd_precoder(d, c, channel, p_total, &NoiseQuadrature::gauss_hermite(24))?;
    let s_groups = perm.len() / ns;
    let mut group_powers = Vec::with_capacity(s_groups);
    for s in 0..s_groups {
        let mut q = vec![0.0; ns];
        for i in 0..ns {
            let pos = perm[s * ns + i];
            if pos < h.n_t() {
                q[i] = base.powers[pos] * h.w[pos];
            }
        }
        group_powers.push(q);
    }
    Ok(PgGsvdPrecoder {
        perm: perm.to_vec(),
        ns,
        group_powers,
        group_rotations: vec![CMat::identity(ns, ns); s_groups],
    })
}

fn dft_matrix(n: usize) -> CMat {
    let norm = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |i, j| {
        let angle = 2.0 * std::f64::consts::PI * (i * j) as f64 / n as f64;
        C64::new(angle.cos() * norm, angle.sin() * norm)
    })
}
