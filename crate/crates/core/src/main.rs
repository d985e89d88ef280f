use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ptrans::density::{
    analytic_density_from_moments, h2_closed_form, mc_condensed_density_from_moments, pure_noise_density,
};
use ptrans::estimate::{estimate_from_grid, EstimateParams};
use ptrans::harness::{pole_coverage, run_error_comparison, run_table1, support_radii, ExperimentConfig};
use ptrans::{io, ptransform, Complex64, ComplexMeasure, Error, Lattice, NoiseSpec, Result};

#[derive(Parser)]
#[command(name = "ptrans", version, about = "Estimate discrete complex measures from noisy moments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate noisy moments of a measure.
    Gen {
        /// Measure JSON; the reference five node model if omitted.
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value_t = 80)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the P-transform of a moment file.
    Ptransform {
        #[arg(long)]
        moments: PathBuf,
        /// Noise level of the data.
        #[arg(long)]
        sigma: f64,
        /// `x0,x1,y0,y1,N`
        #[arg(long, allow_hyphen_values = true, default_value = "-1.1,1.1,-1.1,1.1,200")]
        grid: String,
        #[arg(long = "R", default_value_t = 100)]
        r: usize,
        /// Pseudosample variance as a fraction of the data variance.
        #[arg(long, default_value_t = 1e-4)]
        sigma_prime_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        poles: PathBuf,
        /// Also write the modulus of the transform.
        #[arg(long)]
        modulus: Option<PathBuf>,
    },
    /// Cluster the poles of a P-transform into parameter estimates.
    Estimate {
        #[arg(long)]
        ptrans: PathBuf,
        #[arg(long)]
        poles: PathBuf,
        #[arg(long, default_value_t = EstimateParams::DEFAULT_TAU)]
        tau: f64,
        /// Membership radius; five lattice spacings if omitted.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = EstimateParams::DEFAULT_MIN_HEIGHT)]
        min_height: f64,
        /// True model order, enables the residual amplitude.
        #[arg(long)]
        reference_order: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Condensed density on a lattice.
    Density {
        #[arg(long, value_enum)]
        mode: DensityMode,
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value_t = 80)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, allow_hyphen_values = true, default_value = "-1.5,1.5,-1.5,1.5,200")]
        grid: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// `re,im` of s_0 for `closed2`; taken from the measure if omitted.
        #[arg(long, allow_hyphen_values = true)]
        s0: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        s1: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bias, spread and MSE of the estimates over repeated data sets.
    Table1 {
        #[arg(long = "M", default_value_t = 50)]
        m: usize,
        #[arg(long = "R", default_value_t = 100)]
        r: usize,
        #[arg(long, default_value_t = 1e-4)]
        sigma_prime_ratio: f64,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        min_height: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-solve against pseudosample-averaged squared errors.
    Fig2 {
        #[arg(long = "M", default_value_t = 30)]
        m: usize,
        #[arg(long = "R", default_value_t = 100)]
        r: usize,
        #[arg(long, default_value_t = 0.64)]
        sigma_prime_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Support radii of the analytic density peaks.
    Radii {
        #[arg(long)]
        measure: Option<PathBuf>,
        #[arg(long, default_value_t = 80)]
        n: usize,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, allow_hyphen_values = true, default_value = "-1.5,1.5,-1.5,1.5,600")]
        grid: String,
        /// Noisy data sets used for the pole coverage column.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityMode {
    Mc,
    Analytic,
    Closed2,
    Purenoise,
}

fn parse_grid(s: &str) -> Result<Lattice> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(Error::Parse(format!("grid '{s}' must be x0,x1,y0,y1,N")));
    }
    let f = |k: usize| parts[k].parse::<f64>().map_err(|e| Error::Parse(format!("{}: {e}", parts[k])));
    let n = parts[4].parse::<usize>().map_err(|e| Error::Parse(format!("{}: {e}", parts[4])))?;
    Lattice::new(f(0)?, f(1)?, f(2)?, f(3)?, n, n)
}

fn parse_complex(s: &str) -> Result<Complex64> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{v}: {e}")));
    Ok(Complex64::new(p(re)?, p(im)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn load_measure(path: &Option<PathBuf>) -> Result<ComplexMeasure> {
    match path {
        Some(p) => io::read_measure(open(p)?),
        None => Ok(ComplexMeasure::reference_model()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            measure,
            n,
            sigma,
            seed,
            out,
        } => {
            let data = load_measure(&measure)?.moments(n)?.with_noise(&NoiseSpec::new(sigma, seed, 0)?)?;
            io::write_moments(create(&out)?, &data)?;
        }
        Command::Ptransform {
            moments,
            sigma,
            grid,
            r,
            sigma_prime_ratio,
            seed,
            out,
            poles,
            modulus,
        } => {
            let data = io::read_moments(open(&moments)?, sigma)?;
            let lattice = parse_grid(&grid)?;
            let noise = NoiseSpec::new(sigma_prime_ratio.sqrt() * sigma, seed, 0)?;
            let pt = ptransform(&data, &lattice, r, &noise)?;
            io::write_grid(create(&out)?, &pt.grid)?;
            io::write_pool(create(&poles)?, &pt.pool)?;
            if let Some(path) = modulus {
                io::write_grid(create(&path)?, &pt.modulus)?;
            }
            println!("mass {:.6}, redrawn pseudosamples {}", pt.mass(), pt.pool.failed);
        }
        Command::Estimate {
            ptrans,
            poles,
            tau,
            radius,
            min_height,
            reference_order,
            seed: _,
            out,
        } => {
            let grid = io::read_grid(open(&ptrans)?)?;
            let pool = io::read_pool(open(&poles)?, f64::NAN)?;
            let mut params = EstimateParams::for_lattice(&grid.lattice);
            params.tau = tau;
            params.min_height_fraction = min_height;
            if let Some(r) = radius {
                params.radius = r;
            }
            let mut est = estimate_from_grid(&grid, &pool, &params);
            if let Some(p) = reference_order {
                est = est.with_reference_order(p);
            }
            io::write_estimation(create(&out)?, &est)?;
            println!("p_hat {}", est.p_hat);
        }
        Command::Density {
            mode,
            measure,
            n,
            sigma,
            grid,
            trials,
            s0,
            s1,
            seed,
            out,
        } => {
            let lattice = parse_grid(&grid)?;
            let field = match mode {
                DensityMode::Mc => {
                    let clean = load_measure(&measure)?.moments(n)?;
                    let noise = NoiseSpec::new(sigma, seed, 0)?;
                    mc_condensed_density_from_moments(clean.values(), sigma, &lattice, trials, &noise)?.density
                }
                DensityMode::Analytic => {
                    let clean = load_measure(&measure)?.moments(n)?;
                    analytic_density_from_moments(clean.values(), sigma, &lattice)?
                }
                DensityMode::Closed2 => {
                    let (a, b) = match (s0, s1) {
                        (Some(a), Some(b)) => (parse_complex(&a)?, parse_complex(&b)?),
                        (None, None) => {
                            let m = load_measure(&measure)?.moments(2)?;
                            (m.values()[0], m.values()[1])
                        }
                        _ => return Err(Error::InvalidArgument("give both --s0 and --s1".into())),
                    };
                    lattice.sample(|z| h2_closed_form(a, b, sigma, z))
                }
                DensityMode::Purenoise => lattice.sample(|z| pure_noise_density(n, z)),
            };
            io::write_grid(create(&out)?, &field)?;
        }
        Command::Table1 {
            m,
            r,
            sigma_prime_ratio,
            grid,
            tau,
            radius,
            min_height,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::table1(seed);
            cfg.replications = m;
            cfg.pseudosamples = r;
            cfg.sigma_prime = sigma_prime_ratio.sqrt() * cfg.sigma;
            if let Some(g) = grid {
                cfg.lattice = parse_grid(&g)?;
            }
            if let Some(t) = tau {
                cfg.estimate.tau = t;
            }
            if let Some(rad) = radius {
                cfg.estimate.radius = rad;
            }
            if let Some(h) = min_height {
                cfg.estimate.min_height_fraction = h;
            }
            let stats = run_table1(&cfg)?;
            io::write_table1(create(&out)?, &stats)?;
            println!(
                "accepted {}/{} ({:.2}), bias(p) {:.3}, a_res {}",
                stats.accepted,
                stats.replications,
                stats.acceptance_rate,
                stats.order.bias.re,
                stats.a_res.map_or("n/a".into(), |a| format!("{a:.3}"))
            );
        }
        Command::Fig2 {
            m,
            r,
            sigma_prime_ratio,
            seed,
            out,
        } => {
            let mut cfg = ExperimentConfig::fig2(seed);
            cfg.replications = m;
            cfg.pseudosamples = r;
            cfg.sigma_prime = sigma_prime_ratio.sqrt() * cfg.sigma;
            let cmp = run_error_comparison(&cfg)?;
            io::write_error_comparison(create(&out)?, &cmp)?;
            println!(
                "e_R < e_0 in {:.2} of {} runs; mean e0 {:.4}, mean eR {:.4}",
                cmp.fraction_improved(),
                cmp.pairs.len(),
                cmp.mean_e0(),
                cmp.mean_e_r()
            );
        }
        Command::Radii {
            measure,
            n,
            sigma,
            grid,
            trials,
            seed,
            out,
        } => {
            let measure = load_measure(&measure)?;
            let lattice = parse_grid(&grid)?;
            let radii = support_radii(&measure, n, sigma, &lattice)?;
            let finite: Vec<f64> = radii.iter().map(|r| r.unwrap_or(f64::NAN)).collect();
            let coverage = pole_coverage(&measure, n, sigma, &finite, trials, seed)?;
            let mut w = create(&out)?;
            writeln!(w, "j,re,im,radius,coverage")?;
            for (j, node) in measure.nodes().iter().enumerate() {
                writeln!(w, "{},{},{},{},{}", j + 1, node.re, node.im, finite[j], coverage[j])?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
