//! Finite input alphabets (BPSK/QPSK/square QAM) and enumeration of the
//! product constellation over several symbols.

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Modulation family. QPSK is 4-QAM kept as its own tag so CLI labels stay
/// faithful to the usual naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bpsk,
    Qpsk,
    Qam,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Bpsk => write!(f, "bpsk"),
            Scheme::Qpsk => write!(f, "qpsk"),
            Scheme::Qam => write!(f, "qam"),
        }
    }
}

/// An M-point equiprobable constellation with zero mean and unit average
/// symbol energy, so the transmit vector has identity covariance.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub scheme: Scheme,
    pub m: usize,
    pub points: Vec<C64>,
}

impl Constellation {
    pub fn bits_per_symbol(&self) -> f64 {
        (self.m as f64).log2()
    }
}

/// Build a normalized constellation. Supported pairs: (BPSK, 2), (QPSK, 4),
/// and square QAM with M a perfect even power of two (16, 64, 256, ...).
pub fn make_constellation(scheme: Scheme, m: usize) -> Result<Constellation> {
    let unsupported = || Error::UnsupportedConstellation { scheme: scheme.to_string(), m };
    let points = match (scheme, m) {
        (Scheme::Bpsk, 2) => vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        (Scheme::Qpsk, 4) => square_qam_points(4),
        (Scheme::Qam, m) if is_square_qam_order(m) => square_qam_points(m),
        _ => return Err(unsupported()),
    };
    Ok(Constellation { scheme, m, points })
}

/// Parse a CLI token such as "bpsk", "qpsk", "qam16", "qam64".
pub fn parse_modulation(token: &str) -> Result<Constellation> {
    let t = token.to_ascii_lowercase();
    match t.as_str() {
        "bpsk" => make_constellation(Scheme::Bpsk, 2),
        "qpsk" => make_constellation(Scheme::Qpsk, 4),
        _ => {
            if let Some(rest) = t.strip_prefix("qam") {
                let m: usize = rest.parse().map_err(|_| Error::UnsupportedConstellation {
                    scheme: t.clone(),
                    m: 0,
                })?;
                make_constellation(Scheme::Qam, m)
            } else {
                Err(Error::UnsupportedConstellation { scheme: t, m: 0 })
            }
        }
    }
}

/// M = 4^p for some p >= 1, i.e. a square grid with a power-of-two side.
fn is_square_qam_order(m: usize) -> bool {
    if m < 4 {
        return false;
    }
    let side = (m as f64).sqrt().round() as usize;
    side * side == m && side.is_power_of_two()
}

/// Square QAM on the odd-integer grid {±1, ±3, ...}², scaled to unit average
/// energy. Enumerated row-major over (I, Q) so ordering is deterministic.
fn square_qam_points(m: usize) -> Vec<C64> {
    let side = (m as f64).sqrt().round() as usize;
    let levels: Vec<f64> = (0..side).map(|i| (2 * i) as f64 - (side - 1) as f64).collect();
    // mean power of the unscaled grid: 2 * E[l^2] over the per-axis levels
    let axis_power = levels.iter().map(|l| l * l).sum::<f64>() / side as f64;
    let scale = 1.0 / (2.0 * axis_power).sqrt();
    let mut points = Vec::with_capacity(m);
    for &re in &levels {
        for &im in &levels {
            points.push(C64::new(re * scale, im * scale));
        }
    }
    points
}

/// Iterator over all Mᴺ symbol vectors of a constellation, in lexicographic
/// order with the first coordinate varying slowest.
pub struct ProductPoints<'a> {
    constellation: &'a Constellation,
    n: usize,
    index: usize,
    total: usize,
}

impl<'a> Iterator for ProductPoints<'a> {
    type Item = Vec<C64>;

    fn next(&mut self) -> Option<Vec<C64>> {
        if self.index >= self.total {
            return None;
        }
        let v = vector_at(self.constellation, self.n, self.index);
        self.index += 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = self.total - self.index;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for ProductPoints<'_> {}

/// The `index`-th vector of the lexicographic enumeration (mixed-radix digits
/// of `index` in base M, most significant digit first).
pub fn vector_at(c: &Constellation, n: usize, index: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut rem = index;
    for slot in (0..n).rev() {
        v[slot] = c.points[rem % c.m];
        rem /= c.m;
    }
    v
}

/// Number of vectors in the product constellation, rejecting overflow.
pub fn product_len(c: &Constellation, n: usize) -> Result<usize> {
    let mut total: usize = 1;
    for _ in 0..n {
        total = total
            .checked_mul(c.m)
            .ok_or(Error::EnumerationOverflow { m: c.m, n })?;
    }
    // keep the M^{2N} pair count addressable too, since the MI sums need it
    total
        .checked_mul(total)
        .ok_or(Error::EnumerationOverflow { m: c.m, n })?;
    Ok(total)
}

/// Enumerate all Mᴺ transmit vectors.
pub fn product_points(c: &Constellation, n: usize) -> Result<ProductPoints<'_>> {
    let total = product_len(c, n)?;
    Ok(ProductPoints { constellation: c, n, index: 0, total })
}
