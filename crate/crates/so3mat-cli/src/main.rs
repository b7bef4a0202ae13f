//! Command-line front end: feature dumps, pair distinguishing, kernel benchmarks,
//! synthetic training and projection reports. Data goes to stdout or --out files,
//! logs to stderr. Exit code 0 on success, 2 on invalid input, 1 otherwise.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use so3mat::bench::{bench_bilinear, method_slope, BenchConfig, Method, CSV_HEADER};
use so3mat::config::{parse_config_file, parse_config_pool, ColoredConfig};
use so3mat::distinguish::{body_order_invariants_with, distinguish};
use so3mat::features::fundamental_features;
use so3mat::projection::{
    distance_ratio_report, pair_invariant_map, project_features, reduced_dimension, report_row,
    REPORT_HEADER,
};
use so3mat::radial::RadialSpec;
use so3mat::tensors::synthetic_dataset;
use so3mat::training::{fit_synthetic, FeaturePath, TrainConfig};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        source: so3mat::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Unwritable {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] so3mat::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } | CliError::Invalid(_) | CliError::Unreadable { .. } => 2,
            CliError::Library(e) if is_validation(e) => 2,
            _ => 1,
        }
    }
}

fn is_validation(e: &so3mat::Error) -> bool {
    use so3mat::Error as E;
    matches!(
        e,
        E::Parse { .. }
            | E::InvalidArgument(_)
            | E::UnknownColor { .. }
            | E::ShapeMismatch(_)
            | E::DimensionTooSmall { .. }
            | E::TriangleViolation(..)
    )
}

#[derive(Parser)]
#[command(
    name = "so3mat",
    about = "Matrix-moment descriptors of colored point sets"
)]
struct Cli {
    /// Workers for batch evaluation; results do not depend on it.
    #[arg(long, default_value_t = 1, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RadialArg {
    Poly,
    Chebyshev,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathArg {
    Matmul,
    Cg,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental features and chain invariants of one configuration as CSV.
    Features {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        lmax: usize,
        #[arg(long, value_enum, default_value = "poly")]
        radial: RadialArg,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        cutoff: Option<f64>,
        /// Highest body order of the invariant rows.
        #[arg(long, default_value_t = 4)]
        max_body: usize,
    },
    /// Smallest body order whose invariants separate two configurations.
    Distinguish {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_body: usize,
        #[arg(long, default_value_t = 4)]
        lmax: usize,
    },
    /// Times the bilinear kernels of both methods over a list of lmax values.
    Bench {
        #[arg(long, value_delimiter = ',', required = true)]
        lmax_list: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Trains one feature path on the degree-ten synthetic target.
    TrainSynthetic {
        #[arg(long, value_enum)]
        path: PathArg,
        #[arg(long)]
        seed: u64,
        /// Seed of the sampled dataset.
        #[arg(long, default_value_t = 0)]
        data_seed: u64,
        #[arg(long, default_value_t = 2048)]
        n_train: usize,
        #[arg(long, default_value_t = 512)]
        n_test: usize,
        #[arg(long, default_value_t = 40)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        /// Learning rate; defaults to the tuned rate of the path.
        #[arg(long)]
        lr: Option<f64>,
        /// Try the five-point grid around the rate and keep the best run.
        #[arg(long)]
        grid: bool,
        /// Per-epoch CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parameter dump with a shape header.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Random projections of pair invariants over a pool of k-point configurations.
    Project {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 3)]
        lmax: usize,
        #[arg(long, default_value_t = 4)]
        radial_count: usize,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Unreadable {
        path: path.into(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Unwritable {
        path: path.into(),
        source,
    })
}

/// A file with no header at all is read as an empty monochrome configuration.
fn load_config(path: &Path) -> Result<ColoredConfig, CliError> {
    let text = read(path)?;
    if text
        .lines()
        .all(|l| l.trim().is_empty() || l.trim_start().starts_with('#'))
    {
        return Ok(ColoredConfig::empty(1));
    }
    parse_config_file(&text).map_err(|source| CliError::Input {
        path: path.into(),
        source,
    })
}

fn radial_spec(kind: RadialArg, count: usize, cutoff: Option<f64>) -> Result<RadialSpec, CliError> {
    if count == 0 {
        return Err(CliError::Invalid("--count must be positive".into()));
    }
    match (kind, cutoff) {
        (RadialArg::Poly, None) => Ok(RadialSpec::polynomial(count)),
        (RadialArg::Poly, Some(_)) => Err(CliError::Invalid(
            "--cutoff only applies to --radial chebyshev".into(),
        )),
        (RadialArg::Chebyshev, Some(c)) if c.is_finite() && c > 0.0 => {
            Ok(RadialSpec::exp_chebyshev(count, c))
        }
        (RadialArg::Chebyshev, _) => Err(CliError::Invalid(
            "--radial chebyshev needs a positive --cutoff".into(),
        )),
    }
}

const FEATURES_HEADER: &str = "kind,body_order,color,channel,l,index,value";

fn cmd_features(
    config: &ColoredConfig,
    lmax: usize,
    radial: &RadialSpec,
    max_body: usize,
) -> Result<String, CliError> {
    let mut out = String::from(FEATURES_HEADER);
    out.push('\n');
    // no points, no rows
    if config.is_empty() {
        return Ok(out);
    }
    let f = fundamental_features(config, lmax, radial);
    for c in 0..f.n_colors() {
        for k in 0..f.n_channels() {
            for l in 0..=lmax {
                for (j, v) in f.get(c, k, l).iter().enumerate() {
                    out.push_str(&format!("fundamental,2,{c},{k},{l},{j},{v:e}\n"));
                }
            }
        }
    }
    for body in 2..=max_body {
        for (j, v) in body_order_invariants_with(config, body, lmax, radial)?
            .iter()
            .enumerate()
        {
            out.push_str(&format!("invariant,{body},,,,{j},{:e}\n", v.value));
        }
    }
    Ok(out)
}

fn cmd_distinguish(
    a: &ColoredConfig,
    b: &ColoredConfig,
    max_body: usize,
    lmax: usize,
) -> Result<String, CliError> {
    if max_body < 2 {
        return Err(CliError::Invalid("--max-body must be at least 2".into()));
    }
    let r = distinguish(a, b, max_body, lmax)?;
    let mut out = String::from("body_order,max_discrepancy\n");
    for (body, d) in &r.per_order {
        out.push_str(&format!("{body},{d:e}\n"));
    }
    out.push_str(&match r.separated_at {
        Some(b) => format!("separated at body order {b}\n"),
        None => format!("equivalent up to max-body {max_body}\n"),
    });
    Ok(out)
}

fn cmd_bench(lmax_list: Vec<usize>, reps: usize, seed: u64) -> Result<String, CliError> {
    if lmax_list.contains(&0) {
        return Err(CliError::Invalid("lmax values must be positive".into()));
    }
    let mut cfg = BenchConfig::new(lmax_list, reps);
    cfg.seed = seed;
    let rows = bench_bilinear(&cfg)?;
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    if cfg.lmax_list.len() >= 2 {
        let window = |m| method_slope(&rows, m, |_| true);
        info!(
            "log-log slopes over all rows: cg {:.2}, matmul {:.2}",
            window(Method::ClebschGordan),
            window(Method::Matmul)
        );
    }
    Ok(out)
}

fn cmd_project(
    pool: &[ColoredConfig],
    k: usize,
    seeds: &[u64],
    lmax: usize,
    radial_count: usize,
) -> Result<String, CliError> {
    if let Some(i) = pool.iter().position(|c| c.len() != k) {
        return Err(CliError::Invalid(format!(
            "configuration {i} has {} points, expected {k}",
            pool[i].len()
        )));
    }
    let n_colors = pool.first().map_or(1, |c| c.n_colors());
    if pool.iter().any(|c| c.n_colors() != n_colors) {
        return Err(CliError::Invalid(
            "pool configurations disagree on the palette".into(),
        ));
    }
    let map = pair_invariant_map(n_colors, RadialSpec::polynomial(radial_count), lmax);
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for &seed in seeds {
        let reduced = project_features(&map, k, seed)?;
        let r = distance_ratio_report(&map, &reduced, pool)?;
        out.push_str(&report_row(
            seed,
            pool.len(),
            map.dim(),
            reduced_dimension(k),
            &r,
        ));
        out.push('\n');
    }
    Ok(out)
}

/// Tuned constant rates of the two paths.
fn default_rate(path: FeaturePath) -> f64 {
    match path {
        FeaturePath::Matmul => so3mat::training::MATMUL_RATE,
        FeaturePath::ClebschGordan => so3mat::training::CG_RATE,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads == 0 {
        return Err(CliError::Invalid("--threads must be positive".into()));
    }
    match cli.command {
        Command::Features {
            config,
            lmax,
            radial,
            count,
            cutoff,
            max_body,
        } => {
            let spec = radial_spec(radial, count, cutoff)?;
            let c = load_config(&config)?;
            print!("{}", cmd_features(&c, lmax, &spec, max_body)?);
        }
        Command::Distinguish {
            a,
            b,
            max_body,
            lmax,
        } => {
            let (ca, cb) = (load_config(&a)?, load_config(&b)?);
            print!("{}", cmd_distinguish(&ca, &cb, max_body, lmax)?);
        }
        Command::Bench {
            lmax_list,
            reps,
            out,
            seed,
        } => {
            let csv = cmd_bench(lmax_list, reps, seed)?;
            write(&out, &csv)?;
            info!("wrote {}", out.display());
        }
        Command::TrainSynthetic {
            path,
            seed,
            data_seed,
            n_train,
            n_test,
            epochs,
            batch,
            lr,
            grid,
            out,
            params,
        } => {
            let path = match path {
                PathArg::Matmul => FeaturePath::Matmul,
                PathArg::Cg => FeaturePath::ClebschGordan,
            };
            let rate = lr.unwrap_or_else(|| default_rate(path));
            let mut tc = TrainConfig::new(batch, rate, epochs, seed)?;
            tc.threads = cli.threads;
            if grid {
                tc.lr_grid = TrainConfig::five_point_grid(rate);
            }
            let data = synthetic_dataset(data_seed, n_train, n_test, 4, 5)?;
            info!("training {path} on {n_train}/{n_test} samples for {epochs} epochs");
            let report = fit_synthetic(path, &data, &tc)?;
            for g in &report.grid {
                info!(
                    "rate {:e}: final train mse {:?}",
                    g.learning_rate, g.final_train_mse
                );
            }
            info!(
                "test mse / test label variance: {:.4}",
                report.normalized_test_mse()
            );
            match out {
                Some(p) => write(&p, &report.csv())?,
                None => print!("{}", report.csv()),
            }
            if let Some(p) = params {
                write(&p, &report.param_dump())?;
            }
        }
        Command::Project {
            pool,
            k,
            seeds,
            lmax,
            radial_count,
        } => {
            let configs = parse_config_pool(&read(&pool)?).map_err(|source| CliError::Input {
                path: pool.clone(),
                source,
            })?;
            print!("{}", cmd_project(&configs, k, &seeds, lmax, radial_count)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
