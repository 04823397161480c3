use std::path::PathBuf;

use clap::{Parser, Subcommand};

use pgsvd::constellation::parse_modulation;
use pgsvd::gsvd::{gsvd, residuals};
use pgsvd::harness::{
    self, generate_channel, read_config, run_sweep, write_csv, Design, ExperimentConfig,
};
use pgsvd::mi::NoiseQuadrature;
use pgsvd::precoders::{optimize_pg_gsvd, InitStrategy, OptimOptions, PairingStrategy};
use pgsvd::secrecy::{gsvd_high_snr_bound, theorem2_condition};

#[derive(Parser)]
#[command(name = "pgsvd", version, about = "Secure precoding for wiretap channels with finite-alphabet inputs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an SNR sweep from a config file and write the secrecy curve CSV.
    Sweep {
        /// Flat key=value config file.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the channel seed.
        #[arg(long)]
        channel_seed: Option<u64>,
        /// Override the noise seed.
        #[arg(long)]
        noise_seed: Option<u64>,
        /// Override the Monte-Carlo sample count.
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Override the modulation token (bpsk, qpsk, qam16, qam64).
        #[arg(long = "mod")]
        modulation: Option<String>,
        /// Override the group size.
        #[arg(long)]
        ns: Option<usize>,
        /// Override the design list (comma separated).
        #[arg(long)]
        designs: Option<String>,
    },
    /// Print the GSVD structure of a seeded random channel.
    GsvdInfo {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        nr: usize,
        #[arg(long)]
        ne: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Relative rank tolerance; 0 selects the machine default.
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
    /// Optimize the per-group precoder at one SNR point and emit the
    /// iteration trace as CSV (iter,rate_bits).
    Optimize {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        nr: usize,
        #[arg(long)]
        ne: usize,
        #[arg(long)]
        snr_db: f64,
        #[arg(long = "mod", default_value = "qpsk")]
        modulation: String,
        #[arg(long, default_value_t = 2)]
        ns: usize,
        /// Pairing strategy: auto, theorem2 or interleave.
        #[arg(long, default_value = "auto")]
        strategy: String,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Seed for both the channel and the optimizer noise batch.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = pgsvd::mi::DEFAULT_MC_SAMPLES)]
        mc_samples: usize,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the addition-count complexity report for one system.
    Counts {
        #[arg(long)]
        nt: usize,
        #[arg(long, default_value_t = 2)]
        ns: usize,
        #[arg(long = "mod", default_value = "qpsk")]
        modulation: String,
    },
    /// Print the high-SNR theorem diagnostics for a seeded channel.
    Bound {
        #[arg(long)]
        nt: usize,
        #[arg(long)]
        nr: usize,
        #[arg(long)]
        ne: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        ns: usize,
        #[arg(long = "mod", default_value = "qpsk")]
        modulation: String,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> pgsvd::Result<()> {
    match cli.cmd {
        Cmd::Sweep {
            config,
            out,
            channel_seed,
            noise_seed,
            mc_samples,
            modulation,
            ns,
            designs,
        } => {
            let mut cfg: ExperimentConfig = read_config(&config)?;
            if let Some(v) = channel_seed {
                cfg.channel_seed = v;
            }
            if let Some(v) = noise_seed {
                cfg.noise_seed = v;
            }
            if let Some(v) = mc_samples {
                cfg.mc_samples = v;
            }
            if let Some(v) = modulation {
                cfg.modulation = v;
            }
            if let Some(v) = ns {
                cfg.ns = v;
            }
            if let Some(v) = designs {
                cfg.designs = v
                    .split(',')
                    .map(Design::parse)
                    .collect::<pgsvd::Result<Vec<_>>>()?;
            }
            cfg.validate()?;
            let curve = run_sweep(&cfg)?;
            match out {
                Some(path) => write_csv(&curve, &path)?,
                None => print!("{}", harness::curve_to_csv(&curve)),
            }
            Ok(())
        }
        Cmd::GsvdInfo { nt, nr, ne, seed, tol } => {
            let channel = generate_channel(nt, nr, ne, seed);
            let d = gsvd(&channel, tol)?;
            let res = residuals(&channel, &d);
            println!("channel {nt}x{nr}x{ne} seed {seed}");
            println!("k = {}, r = {}, s = {}", d.k, d.r, d.s);
            println!("b = {:?}", d.b);
            println!("e = {:?}", d.e);
            println!(
                "reconstruction error: bob {:.3e}, eve {:.3e}",
                res.recon_ba, res.recon_ea
            );
            println!("unitarity error: {:.3e}", res.unitarity);
            println!("pair normalization error: {:.3e}", res.pair_norm);
            Ok(())
        }
        Cmd::Optimize {
            nt,
            nr,
            ne,
            snr_db,
            modulation,
            ns,
            strategy,
            max_iters,
            eps,
            seed,
            mc_samples,
            out,
        } => {
            let channel = generate_channel(nt, nr, ne, seed);
            let c = parse_modulation(&modulation)?;
            let strategy = match strategy.as_str() {
                "theorem2" => PairingStrategy::Theorem2,
                "interleave" => PairingStrategy::BobAdvantageInterleave,
                "auto" => {
                    if theorem2_condition(&channel, ns, 0.0)?.holds {
                        PairingStrategy::Theorem2
                    } else {
                        PairingStrategy::BobAdvantageInterleave
                    }
                }
                other => {
                    return Err(pgsvd::Error::InvalidArgument(format!(
                        "unknown strategy '{other}' (expected auto, theorem2 or interleave)"
                    )))
                }
            };
            let p_total = 10f64.powf(snr_db / 10.0) * nr as f64 * channel.sigma_b2;
            let opts = OptimOptions {
                max_iters,
                epsilon: eps,
                quadrature: NoiseQuadrature::monte_carlo(mc_samples, seed),
                init: InitStrategy::Auto,
                ..Default::default()
            };
            let result = optimize_pg_gsvd(&channel, &c, p_total, ns, strategy, &opts)?;
            let mut text = String::from("iter,rate_bits\n");
            for (i, v) in result.trace.iter().enumerate() {
                text.push_str(&format!("{i},{v}\n"));
            }
            match out {
                Some(path) => std::fs::write(&path, text).map_err(|e| pgsvd::Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?,
                None => print!("{text}"),
            }
            eprintln!(
                "final rate: {} b/s/Hz after {} iterations",
                result.rate_bits, result.iterations
            );
            Ok(())
        }
        Cmd::Counts { nt, ns, modulation } => {
            let c = parse_modulation(&modulation)?;
            println!("system N_t = {nt}, Ns = {ns}, M = {}", c.m);
            for (name, value) in harness::complexity_rows(nt, ns, c.m)? {
                println!("{name}: {value}");
            }
            Ok(())
        }
        Cmd::Bound { nt, nr, ne, seed, ns, modulation, tol } => {
            let channel = generate_channel(nt, nr, ne, seed);
            let c = parse_modulation(&modulation)?;
            let bound = gsvd_high_snr_bound(&channel, &c, tol)?;
            let cond = theorem2_condition(&channel, ns, tol)?;
            println!("channel {nt}x{nr}x{ne} seed {seed}, M = {}", c.m);
            println!("GSVD high-SNR ceiling: {bound} b/s/Hz");
            println!(
                "saturation condition (k - N2) * Ns >= N_t: ({} - {}) * {} >= {} -> {}",
                cond.k, cond.n2, ns, nt, cond.holds
            );
            println!("bob-only dimensions r = {}", cond.r);
            println!(
                "per-group saturation ceiling: {} b/s/Hz",
                nt as f64 * c.bits_per_symbol()
            );
            Ok(())
        }
    }
}
