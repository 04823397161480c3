//! Secrecy-rate evaluation (full-matrix and grouped), high-SNR theorem
//! verifiers and the addition-count complexity model.

use crate::constellation::{product_len, Constellation};
use crate::error::{Error, Result};
use crate::gsvd::{gsvd, subspace_dims, WiretapChannel};
use crate::linalg::{rank, CMat};
use crate::mi::{mutual_information, NoiseQuadrature};
use crate::precoders::{grouped_objective, HattedGains, PgGsvdPrecoder};

/// Exact-evaluation cap: the full-matrix path enumerates Mᴺᵗ transmit
/// vectors and is only allowed up to this many.
pub const EXACT_ENUMERATION_CAP: usize = 1 << 20;

/// Full-matrix secrecy rate max(0, I(y_b; x) − I(y_e; x)) for a precoder G,
/// with identical noise seeds for both receivers' quadratures.
pub fn secrecy_rate_exact(
    g: &CMat,
    channel: &WiretapChannel,
    c: &Constellation,
    q: &NoiseQuadrature,
) -> Result<f64> {
    if g.nrows() != channel.n_t() {
        return Err(Error::DimensionMismatch(format!(
            "G has {} rows but the channel has {} transmit antennas",
            g.nrows(),
            channel.n_t()
        )));
    }
    let terms = product_len(c, g.ncols())?;
    if terms > EXACT_ENUMERATION_CAP {
        return Err(Error::EnumerationOverflow { m: c.m, n: g.ncols() });
    }
    let t_b = &channel.h_ba * g;
    let t_e = &channel.h_ea * g;
    let i_b = mutual_information(&t_b, c, channel.sigma_b2, q)?.bits;
    let i_e = mutual_information(&t_e, c, channel.sigma_e2, q)?.bits;
    Ok((i_b - i_e).max(0.0))
}

/// Grouped secrecy rate Σ_s [I(y_b,s; x_s) − I(y_e,s; x_s)], clamped at
/// zero, evaluated on the Ns-dimensional effective group channels.
pub fn secrecy_rate_grouped(
    pre: &PgGsvdPrecoder,
    h: &HattedGains,
    channel: &WiretapChannel,
    c: &Constellation,
    q: &NoiseQuadrature,
) -> Result<f64> {
    Ok(grouped_objective(h, pre, channel, c, q)?.max(0.0))
}

/// High-SNR ceiling of the GSVD design: rank(H_ba) · log₂ M.
pub fn gsvd_high_snr_bound(channel: &WiretapChannel, c: &Constellation, tol: f64) -> Result<f64> {
    let n1 = rank(&channel.h_ba, channel.effective_tol(tol))?;
    Ok(n1 as f64 * c.bits_per_symbol())
}

/// Saturation-condition report: (k − N₂)·Ns ≥ N_t.
#[derive(Debug, Clone, Copy)]
pub struct SaturationCondition {
    pub holds: bool,
    pub k: usize,
    pub n2: usize,
    pub r: usize,
}

/// Evaluate the saturation condition for a channel and group size, and
/// verify the identity r = k − N₂ against the decomposition.
pub fn theorem2_condition(
    channel: &WiretapChannel,
    ns: usize,
    tol: f64,
) -> Result<SaturationCondition> {
    let tol_rel = channel.effective_tol(tol);
    let (k, r, _s) = subspace_dims(channel, tol)?;
    let n2 = rank(&channel.h_ea, tol_rel)?;
    let d = gsvd(channel, tol)?;
    if d.r != r || r != k - n2 {
        return Err(Error::NonFinite(format!(
            "dimension identity violated: r = {} from the decomposition, k - N2 = {}",
            d.r,
            k - n2
        )));
    }
    Ok(SaturationCondition { holds: (k - n2) * ns >= channel.n_t(), k, n2, r })
}

/// One complexity figure: exact where it fits a native integer, otherwise
/// scientific notation (3 significant digits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdditionCount {
    Exact(u128),
    Approx { mantissa: f64, exponent: i32 },
}

impl AdditionCount {
    pub fn as_f64(&self) -> f64 {
        match self {
            AdditionCount::Exact(v) => *v as f64,
            AdditionCount::Approx { mantissa, exponent } => {
                mantissa * 10f64.powi(*exponent)
            }
        }
    }
}

impl std::fmt::Display for AdditionCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdditionCount::Exact(v) => write!(f, "{v}"),
            AdditionCount::Approx { mantissa, exponent } => {
                write!(f, "{mantissa:.2}e{exponent}")
            }
        }
    }
}

/// Addition counts for evaluating the mutual information and MSE matrix:
/// N_t·M for the decoupled GSVD design, S·M^{2Ns} for the grouped design,
/// M^{2N_t} for the full-precoder search.
#[derive(Debug, Clone)]
pub struct ComplexityReport {
    pub gsvd_additions: u128,
    pub alg1_additions: u128,
    pub full_additions: AdditionCount,
}

/// Exact power M^e as an [`AdditionCount`].
fn power_count(m: usize, e: u32) -> AdditionCount {
    let mut acc: u128 = 1;
    for _ in 0..e {
        match acc.checked_mul(m as u128) {
            Some(next) => acc = next,
            None => {
                // 10^(e log10 M) split into mantissa and exponent
                let log10 = e as f64 * (m as f64).log10();
                let exponent = log10.floor() as i32;
                let mantissa = 10f64.powf(log10 - exponent as f64);
                // keep 3 significant digits
                let mantissa = (mantissa * 100.0).round() / 100.0;
                return AdditionCount::Approx { mantissa, exponent };
            }
        }
    }
    AdditionCount::Exact(acc)
}

pub fn addition_counts(n_t: usize, ns: usize, s_groups: usize, m: usize) -> Result<ComplexityReport> {
    if s_groups * ns != n_t {
        return Err(Error::InvalidArgument(format!(
            "S * Ns = {} * {} must equal N_t = {}",
            s_groups, ns, n_t
        )));
    }
    let gsvd_additions = (n_t as u128) * (m as u128);
    let alg1 = match power_count(m, 2 * ns as u32) {
        AdditionCount::Exact(v) => v
            .checked_mul(s_groups as u128)
            .ok_or_else(|| Error::InvalidArgument("grouped count overflows".into()))?,
        AdditionCount::Approx { .. } => {
            return Err(Error::InvalidArgument("grouped count overflows".into()))
        }
    };
    Ok(ComplexityReport {
        gsvd_additions,
        alg1_additions: alg1,
        full_additions: power_count(m, 2 * n_t as u32),
    })
}
