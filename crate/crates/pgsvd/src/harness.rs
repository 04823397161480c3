//! Experiment harness: seeded channel generation, SNR sweeps comparing the
//! precoder designs, and CSV persistence. All randomness is derived from
//! the config seeds; each SNR point gets its own noise stream so points can
//! be evaluated concurrently with schedule-independent results.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constellation::parse_modulation;
use crate::error::{Error, Result};
use crate::exec;
use crate::gsvd::{gsvd, WiretapChannel};
use crate::linalg::standard_complex_gaussian;
use crate::mi::NoiseQuadrature;
use crate::precoders::{
    gsvd_precoder, hatted_gains, high_snr_construction, optimize_pg_gsvd, InitStrategy,
    OptimOptions, PairingStrategy,
};
use crate::secrecy::{addition_counts, secrecy_rate_grouped, theorem2_condition};

/// Precoder designs a sweep can evaluate. `None` rows produce an empty
/// curve with metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    Gsvd,
    PgGsvd,
    HighSnr,
    None,
}

impl Design {
    pub fn tag(&self) -> &'static str {
        match self {
            Design::Gsvd => "gsvd",
            Design::PgGsvd => "pg_gsvd",
            Design::HighSnr => "high_snr",
            Design::None => "none",
        }
    }

    pub fn parse(token: &str) -> Result<Design> {
        match token.trim() {
            "gsvd" => Ok(Design::Gsvd),
            "pg_gsvd" => Ok(Design::PgGsvd),
            "high_snr" => Ok(Design::HighSnr),
            "none" => Ok(Design::None),
            other => Err(Error::Config(format!("unknown design '{other}'"))),
        }
    }
}

/// Sweep configuration. `SNR = P/(N_r σ_b²)`, with σ_b = σ_e = 1 fixed, so
/// the sweep varies the power budget.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n_t: usize,
    pub n_r: usize,
    pub n_e: usize,
    pub modulation: String,
    pub ns: usize,
    pub snr_grid_db: Vec<f64>,
    pub designs: Vec<Design>,
    pub channel_seed: u64,
    pub noise_seed: u64,
    pub mc_samples: usize,
    pub max_iters: usize,
    pub eps: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_t: 4,
            n_r: 3,
            n_e: 2,
            modulation: "qpsk".into(),
            ns: 2,
            snr_grid_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0],
            designs: vec![Design::Gsvd, Design::PgGsvd],
            channel_seed: 1,
            noise_seed: 1,
            mc_samples: crate::mi::DEFAULT_MC_SAMPLES,
            max_iters: 100,
            eps: 1e-4,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_r == 0 || self.n_e == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        if self.ns == 0 || self.ns > self.n_t {
            return Err(Error::Config(format!(
                "ns = {} must be in 1..={}",
                self.ns, self.n_t
            )));
        }
        if self.snr_grid_db.is_empty() {
            return Err(Error::Config("snr_grid_db must be nonempty".into()));
        }
        for w in self.snr_grid_db.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("snr_grid_db must be strictly increasing".into()));
            }
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be positive".into()));
        }
        parse_modulation(&self.modulation)?;
        Ok(())
    }

    /// Canonical key=value echo, one entry per field.
    pub fn echo(&self) -> Vec<(String, String)> {
        let grid = self
            .snr_grid_db
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let designs = self.designs.iter().map(|d| d.tag()).collect::<Vec<_>>().join(",");
        vec![
            ("n_t".into(), self.n_t.to_string()),
            ("n_r".into(), self.n_r.to_string()),
            ("n_e".into(), self.n_e.to_string()),
            ("modulation".into(), self.modulation.clone()),
            ("ns".into(), self.ns.to_string()),
            ("snr_grid_db".into(), grid),
            ("designs".into(), designs),
            ("channel_seed".into(), self.channel_seed.to_string()),
            ("noise_seed".into(), self.noise_seed.to_string()),
            ("mc_samples".into(), self.mc_samples.to_string()),
            ("max_iters".into(), self.max_iters.to_string()),
            ("eps".into(), self.eps.to_string()),
        ]
    }

    /// FNV-1a hash of the canonical echo, identifying the configuration.
    pub fn config_hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for (k, v) in self.echo() {
            for b in k.bytes().chain([b'='].into_iter()).chain(v.bytes()).chain([b'\n']) {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("{h:016x}")
    }

    fn set_field(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid integer '{v}' for {key}")))
        };
        let parse_u64 = |v: &str| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("invalid integer '{v}' for {key}")))
        };
        match key {
            "n_t" => self.n_t = parse_usize(value)?,
            "n_r" => self.n_r = parse_usize(value)?,
            "n_e" => self.n_e = parse_usize(value)?,
            "modulation" => self.modulation = value.trim().to_string(),
            "ns" => self.ns = parse_usize(value)?,
            "snr_grid_db" => {
                self.snr_grid_db = value
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("invalid SNR value '{v}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            "designs" => {
                self.designs =
                    value.split(',').map(Design::parse).collect::<Result<Vec<_>>>()?;
            }
            "channel_seed" => self.channel_seed = parse_u64(value)?,
            "noise_seed" => self.noise_seed = parse_u64(value)?,
            "mc_samples" => self.mc_samples = parse_usize(value)?,
            "max_iters" => self.max_iters = parse_usize(value)?,
            "eps" => {
                self.eps = value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("invalid eps '{value}'")))?;
            }
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }
}

/// Parse a flat `key = value` config file; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        cfg.set_field(key.trim(), value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    parse_config(&text)
}

/// i.i.d. CN(0, 1) channel pair with unit noise variances, deterministic in
/// the seed.
pub fn generate_channel(n_t: usize, n_r: usize, n_e: usize, seed: u64) -> WiretapChannel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_ba = standard_complex_gaussian(n_r, n_t, &mut rng);
    let h_ea = standard_complex_gaussian(n_e, n_t, &mut rng);
    WiretapChannel::new(h_ba, h_ea, 1.0, 1.0).expect("dimensions are consistent")
}

/// splitmix64 of (base, index): per-SNR noise streams independent of the
/// evaluation schedule.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ (index.wrapping_add(1)).wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub snr_db: f64,
    pub design: String,
    pub rate_bits: f64,
    pub iterations: usize,
    pub additions: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipRecord {
    pub snr_db: f64,
    pub design: String,
    pub reason: String,
}

/// Sweep output: one row per (snr, design) pair, skip records for
/// infeasible combinations, and the config echo (with hash) as metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyCurve {
    pub meta: Vec<(String, String)>,
    pub rows: Vec<CurveRow>,
    pub skips: Vec<SkipRecord>,
}

/// Run the configured sweep. SNR points are independent work items; each
/// carries its own derived noise stream, so results do not depend on the
/// evaluation order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SecrecyCurve> {
    cfg.validate()?;
    let c = parse_modulation(&cfg.modulation)?;
    let channel = generate_channel(cfg.n_t, cfg.n_r, cfg.n_e, cfg.channel_seed);

    let mut meta = vec![("config_hash".into(), cfg.config_hash())];
    meta.extend(cfg.echo());

    let designs: Vec<Design> =
        cfg.designs.iter().copied().filter(|d| *d != Design::None).collect();
    if designs.is_empty() {
        return Ok(SecrecyCurve { meta, rows: vec![], skips: vec![] });
    }

    let saturation = theorem2_condition(&channel, cfg.ns, 0.0)?;
    let strategy = if saturation.holds {
        PairingStrategy::Theorem2
    } else {
        PairingStrategy::BobAdvantageInterleave
    };
    let decomposition = gsvd(&channel, 0.0)?;
    let gains = hatted_gains(&decomposition, cfg.n_t);
    let s_groups = cfg.n_t.div_ceil(cfg.ns);
    let grouped_adds = (s_groups as u128) * (c.m as u128).pow(2 * cfg.ns as u32);
    let per_point = |idx: usize| -> Result<(Vec<CurveRow>, Vec<SkipRecord>)> {
        let snr_db = cfg.snr_grid_db[idx];
        let p_total = 10f64.powf(snr_db / 10.0) * cfg.n_r as f64 * channel.sigma_b2;
        let q = NoiseQuadrature::monte_carlo(cfg.mc_samples, derive_seed(cfg.noise_seed, idx as u64));
        let mut rows = Vec::new();
        let mut skips = Vec::new();
        for design in &designs {
            match design {
                Design::Gsvd => {
                    let res = gsvd_precoder(&decomposition, &c, &channel, p_total, &q)?;
                    rows.push(CurveRow {
                        snr_db,
                        design: design.tag().into(),
                        rate_bits: res.rate_bits,
                        iterations: res.iterations,
                        additions: (cfg.n_t as u128) * (c.m as u128),
                    });
                }
                Design::PgGsvd => {
                    let opts = OptimOptions {
                        max_iters: cfg.max_iters,
                        epsilon: cfg.eps,
                        quadrature: q,
                        init: InitStrategy::Auto,
                        ..Default::default()
                    };
                    let out = optimize_pg_gsvd(&channel, &c, p_total, cfg.ns, strategy, &opts)?;
                    rows.push(CurveRow {
                        snr_db,
                        design: design.tag().into(),
                        rate_bits: out.rate_bits,
                        iterations: out.iterations,
                        additions: grouped_adds,
                    });
                }
                Design::HighSnr => {
                    if !saturation.holds {
                        skips.push(SkipRecord {
                            snr_db,
                            design: design.tag().into(),
                            reason: format!(
                                "saturation condition fails: (k - N2) * Ns = ({} - {}) * {} < N_t = {}",
                                saturation.k, saturation.n2, cfg.ns, cfg.n_t
                            ),
                        });
                        continue;
                    }
                    let pre = high_snr_construction(&decomposition, &gains, cfg.ns, p_total, &c)?;
                    let rate = secrecy_rate_grouped(&pre, &gains, &channel, &c, &q)?;
                    rows.push(CurveRow {
                        snr_db,
                        design: design.tag().into(),
                        rate_bits: rate,
                        iterations: 0,
                        additions: grouped_adds,
                    });
                }
                Design::None => {}
            }
        }
        Ok((rows, skips))
    };

    let points = exec::map_indexed(cfg.snr_grid_db.len(), per_point);
    let mut rows = Vec::new();
    let mut skips = Vec::new();
    for point in points {
        let (r, s) = point?;
        rows.extend(r);
        skips.extend(s);
    }
    Ok(SecrecyCurve { meta, rows, skips })
}

const CSV_HEADER: &str = "snr_db,design,rate_bits,iterations,additions";

/// Render the curve as CSV text: `#`-prefixed metadata and skip records,
/// then the fixed header and one row per (snr, design). Floats use the
/// shortest representation that round-trips exactly.
pub fn curve_to_csv(curve: &SecrecyCurve) -> String {
    let mut out = String::new();
    for (k, v) in &curve.meta {
        let _ = writeln!(out, "# {k}={v}");
    }
    for skip in &curve.skips {
        let _ = writeln!(
            out,
            "# skip snr_db={} design={} reason={}",
            skip.snr_db, skip.design, skip.reason
        );
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &curve.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.snr_db, row.design, row.rate_bits, row.iterations, row.additions
        );
    }
    out
}

pub fn write_csv(curve: &SecrecyCurve, path: &Path) -> Result<()> {
    std::fs::write(path, curve_to_csv(curve))
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

/// Parse a curve back from CSV text; inverse of [`curve_to_csv`].
pub fn curve_from_csv(text: &str) -> Result<SecrecyCurve> {
    let mut meta = Vec::new();
    let mut skips = Vec::new();
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix("# ") {
            if let Some(skip) = comment.strip_prefix("skip ") {
                let mut snr_db = None;
                let mut design = None;
                let mut reason = None;
                if let Some(rest) = skip.strip_prefix("snr_db=") {
                    if let Some((snr, rest)) = rest.split_once(" design=") {
                        if let Some((d, r)) = rest.split_once(" reason=") {
                            snr_db = snr.parse::<f64>().ok();
                            design = Some(d.to_string());
                            reason = Some(r.to_string());
                        }
                    }
                }
                match (snr_db, design, reason) {
                    (Some(snr_db), Some(design), Some(reason)) => {
                        skips.push(SkipRecord { snr_db, design, reason })
                    }
                    _ => {
                        return Err(Error::Config(format!(
                            "line {}: malformed skip record",
                            lineno + 1
                        )))
                    }
                }
            } else if let Some((k, v)) = comment.split_once('=') {
                meta.push((k.to_string(), v.to_string()));
            } else {
                return Err(Error::Config(format!("line {}: malformed comment", lineno + 1)));
            }
            continue;
        }
        if !seen_header {
            if line != CSV_HEADER {
                return Err(Error::Config(format!(
                    "line {}: expected header '{CSV_HEADER}'",
                    lineno + 1
                )));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!("line {}: expected 5 fields", lineno + 1)));
        }
        let parse_err = |what: &str| Error::Config(format!("line {}: bad {what}", lineno + 1));
        rows.push(CurveRow {
            snr_db: fields[0].parse().map_err(|_| parse_err("snr_db"))?,
            design: fields[1].to_string(),
            rate_bits: fields[2].parse().map_err(|_| parse_err("rate_bits"))?,
            iterations: fields[3].parse().map_err(|_| parse_err("iterations"))?,
            additions: fields[4].parse().map_err(|_| parse_err("additions"))?,
        });
    }
    if !seen_header {
        return Err(Error::Config("missing CSV header".into()));
    }
    Ok(SecrecyCurve { meta, rows, skips })
}

pub fn read_csv(path: &Path) -> Result<SecrecyCurve> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    curve_from_csv(&text)
}

/// Table-style complexity rows for the configured system.
pub fn complexity_rows(n_t: usize, ns: usize, m: usize) -> Result<Vec<(String, String)>> {
    let s_groups = n_t.div_ceil(ns);
    let report = addition_counts(s_groups * ns, ns, s_groups, m)?;
    Ok(vec![
        ("GSVD".into(), report.gsvd_additions.to_string()),
        ("Algorithm 1".into(), report.alg1_additions.to_string()),
        ("Full precoder".into(), report.full_additions.to_string()),
    ])
}
