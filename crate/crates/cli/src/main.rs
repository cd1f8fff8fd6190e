//! Command-line interface: dataset I/O, regression fits, Wasserstein
//! F-tests, confidence bands, data simulation, and the canned experiment
//! reproductions.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical degeneracy, 4
//! unsupported method combination.

use wassreg_cli::io;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use wassreg::bands::{self, BandKind, BandOptions};
use wassreg::fit::FitResult;
use wassreg::inference::{test_global, test_partial, Method, TestKind, TestOptions};
use wassreg::sim::{
    self, generate_dataset, CoverageSetting, ExperimentOptions, PowerSetting, SimConfig,
    TransportKind,
};
use wassreg::{wasserstein_r_squared, Error};

#[derive(Parser)]
#[command(
    name = "wassreg",
    about = "Fréchet regression of density responses under the Wasserstein-2 geometry",
    version
)]
struct Cli {
    /// Worker threads for parallel sections (0 = rayon default). Outputs do
    /// not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mixture,
    Satterthwaite,
    Bootstrap,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mixture => Method::Mixture,
            MethodArg::Satterthwaite => Method::Satterthwaite,
            MethodArg::Bootstrap => Method::Bootstrap,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Auto,
    QuantileMatrix,
    RawSamples,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    None,
    Linear,
    Nonlinear,
}

impl From<TransportArg> for TransportKind {
    fn from(t: TransportArg) -> Self {
        match t {
            TransportArg::None => TransportKind::None,
            TransportArg::Linear => TransportKind::Linear,
            TransportArg::Nonlinear => TransportKind::Nonlinear,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BandKindArg {
    Winf,
    Density,
}

#[derive(Args)]
struct InputArgs {
    /// Input dataset (CSV).
    #[arg(long)]
    input: PathBuf,
    /// Input format; auto-detected from the header by default.
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    /// Grid size used when estimating curves from raw samples.
    #[arg(long, default_value_t = 1001)]
    grid_size: usize,
    /// Declare that all response densities share one fixed support.
    #[arg(long, default_value_t = false)]
    fixed_support: bool,
}

impl InputArgs {
    fn load(&self) -> wassreg::Result<io::LoadedDataset> {
        let format = match self.format {
            FormatArg::Auto => io::detect_format(&self.input)?,
            FormatArg::QuantileMatrix => io::InputFormat::QuantileMatrix,
            FormatArg::RawSamples => io::InputFormat::RawSamples,
        };
        let mut loaded = io::load_dataset(&self.input, format, self.grid_size)?;
        loaded.data.fixed_support = self.fixed_support;
        Ok(loaded)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the regression and write fitted curves plus a summary.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
        /// Query points x1,x2,... (repeatable).
        #[arg(long = "at", value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Append)]
        at: Vec<f64>,
    },
    /// Global Wasserstein F-test of no predictor effects.
    TestGlobal {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Mixture)]
        method: MethodArg,
        /// Monte Carlo replicates for the mixture law.
        #[arg(long, default_value_t = 50_000)]
        reps: usize,
        /// Bootstrap resamples.
        #[arg(long, default_value_t = 999)]
        boot_reps: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Partial Wasserstein F-test of a named block of predictors.
    TestPartial {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        output: PathBuf,
        /// Comma-separated names of the predictors under test (the rest are
        /// retained in the submodel).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        partition: Vec<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Mixture)]
        method: MethodArg,
        #[arg(long, default_value_t = 50_000)]
        reps: usize,
        #[arg(long, default_value_t = 999)]
        boot_reps: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Simultaneous confidence band at one or more query points.
    Band {
        #[command(flatten)]
        input: InputArgs,
        /// Output directory (one CSV per query point).
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum)]
        kind: BandKindArg,
        /// Query points x1,x2,... (repeatable).
        #[arg(long = "at", value_delimiter = ',', num_args = 1.., action = clap::ArgAction::Append, required = true)]
        at: Vec<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Gaussian paths for the sup quantile.
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        /// Trim parameter for density and fixed-support bands.
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Generate a location-scale simulation dataset.
    Simulate {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Number of predictors (1 or 2).
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// Coefficients a1,a2,b1,b2 of ν(x) = a·x and τ(x) = 2 + b·x.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 0.0, 0.0])]
        coeffs: Vec<f64>,
        #[arg(long, value_enum, default_value_t = TransportArg::Linear)]
        transport: TransportArg,
        /// Observe each density only through a secondary sample.
        #[arg(long, default_value_t = false)]
        indirect: bool,
        #[arg(long, default_value_t = 300)]
        secondary_size: usize,
        #[arg(long, default_value_t = 1001)]
        grid_size: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Re-run the canned experiments and write their tables.
    Reproduce {
        /// Which experiment: the power curves (fig2) or the band error-rate
        /// table (table1).
        #[arg(value_parser = ["fig2", "table1"])]
        what: String,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Replications per cell (default 100; --full raises to 500).
        #[arg(long)]
        reps: Option<usize>,
        /// Run the full 500 replications per cell.
        #[arg(long, default_value_t = false)]
        full: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Restrict to one sample size (runs 100, 200, 500 otherwise).
        #[arg(long)]
        n: Option<usize>,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Design(_) | Error::Degenerate(_) => 3,
        Error::Unsupported(_) => 4,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .expect("rayon pool configured once");
    }
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn parse_query_points(at: &[f64], p: usize) -> wassreg::Result<Vec<DVector<f64>>> {
    if at.is_empty() {
        return Ok(Vec::new());
    }
    if at.len() % p != 0 {
        return Err(Error::Input(format!(
            "--at expects multiples of {p} coordinates, got {}",
            at.len()
        )));
    }
    Ok(at.chunks(p).map(|c| DVector::from_row_slice(c)).collect())
}

fn run(command: Command) -> wassreg::Result<()> {
    match command {
        Command::Fit { input, output, at } => {
            let loaded = input.load()?;
            let data = &loaded.data;
            let fit = FitResult::fit(data)?;
            let r2 = wasserstein_r_squared(data, &fit)?;
            let projections = (0..data.n()).filter(|&i| fit.projection_active(i)).count();
            let summary = format!(
                "{{\n  \"n\": {},\n  \"p\": {},\n  \"grid_size\": {},\n  \"r_squared\": {},\n  \"projections\": {}\n}}\n",
                data.n(),
                data.p(),
                data.grid().len(),
                r2.map_or("null".to_string(), io::fmt_f64),
                projections
            );
            io::write_file(&output.join("fit.json"), &summary)?;
            let curve_csv = |curve: &wassreg::QuantileCurve| {
                let mut s = String::from("t,value\n");
                for (l, &t) in curve.grid().points().iter().enumerate() {
                    s.push_str(&format!("{},{}\n", io::fmt_f64(t), io::fmt_f64(curve.values()[l])));
                }
                s
            };
            io::write_file(&output.join("marginal.csv"), &curve_csv(fit.marginal()))?;
            for (k, x) in parse_query_points(&at, data.p())?.iter().enumerate() {
                let (curve, projected) = fit.predict(data, x)?;
                io::write_file(&output.join(format!("fitted_{k}.csv")), &curve_csv(&curve))?;
                if projected {
                    eprintln!("note: fit at query point {k} required monotone projection");
                }
            }
            println!(
                "fit complete: n={}, p={}, R^2={}",
                data.n(),
                data.p(),
                r2.map_or("undefined (zero total variation)".into(), |v| format!("{v:.4}"))
            );
            Ok(())
        }

        Command::TestGlobal { input, output, alpha, method, reps, boot_reps, seed } => {
            let loaded = input.load()?;
            let mut opts = TestOptions::new(alpha, method.into(), seed);
            opts.mc_reps = reps;
            opts.boot_reps = boot_reps;
            let report = test_global(&loaded.data, opts)?;
            io::write_file(&output, &io::report_to_json(&report))?;
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            println!(
                "global test ({}): statistic {:.6}, critical {:.6}, p {:.6} -> {}",
                report.method,
                report.statistic,
                report.critical_value,
                report.p_value,
                if report.reject { "reject" } else { "fail to reject" }
            );
            Ok(())
        }

        Command::TestPartial {
            input,
            output,
            partition,
            alpha,
            method,
            reps,
            boot_reps,
            seed,
        } => {
            let loaded = input.load()?;
            if partition.is_empty() {
                return Err(Error::Input("--partition must name at least one predictor".into()));
            }
            // reorder so the tested block is trailing
            let tested: Vec<usize> = partition
                .iter()
                .map(|nm| {
                    loaded
                        .predictor_names
                        .iter()
                        .position(|h| h == nm)
                        .ok_or_else(|| Error::Input(format!("unknown predictor {nm:?}")))
                })
                .collect::<wassreg::Result<_>>()?;
            let retained: Vec<usize> =
                (0..loaded.data.p()).filter(|j| !tested.contains(j)).collect();
            if retained.is_empty() {
                return Err(Error::Input(
                    "partial test needs at least one retained predictor".into(),
                ));
            }
            let order: Vec<usize> = retained.iter().chain(tested.iter()).copied().collect();
            let data = loaded.data.permute_columns(&order)?;
            let mut opts = TestOptions::new(alpha, method.into(), seed);
            opts.mc_reps = reps;
            opts.boot_reps = boot_reps;
            let report = test_partial(&data, retained.len(), opts)?;
            io::write_file(&output, &io::report_to_json(&report))?;
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            println!(
                "partial test of {:?} ({}): statistic {:.6}, critical {:.6}, p {:.6} -> {}",
                partition,
                report.method,
                report.statistic,
                report.critical_value,
                report.p_value,
                if report.reject { "reject" } else { "fail to reject" }
            );
            Ok(())
        }

        Command::Band { input, output, kind, at, alpha, reps, delta, seed } => {
            let loaded = input.load()?;
            let mut data = loaded.data;
            if matches!(kind, BandKindArg::Density) && !data.has_quantile_densities() {
                eprintln!(
                    "note: input carries no quantile densities; deriving them by finite differences"
                );
                data.derive_quantile_densities();
            }
            let fit = FitResult::fit(&data)?;
            let points = parse_query_points(&at, data.p())?;
            for (k, x) in points.iter().enumerate() {
                let mut bopts = BandOptions::new(alpha, reps, sim::derive_seed(seed, &[k as u64]));
                bopts.delta = delta;
                bopts.fixed_support = data.fixed_support;
                let band = match kind {
                    BandKindArg::Winf => bands::winf_band(&data, &fit, x, &bopts)?,
                    BandKindArg::Density => bands::density_band(&data, &fit, x, &bopts)?,
                };
                for note in &band.notes {
                    eprintln!("note: point {k}: {note}");
                }
                let name = match band.kind {
                    BandKind::Winf => format!("band_winf_{k}.csv"),
                    BandKind::Density => format!("band_density_{k}.csv"),
                };
                io::write_file(&output.join(&name), &io::band_to_csv(&band))?;
                println!(
                    "band {k} at x = {:?}: critical {:.6}{}",
                    band.x,
                    band.critical,
                    if band.degenerate { " (degenerate: zero-width)" } else { "" }
                );
            }
            Ok(())
        }

        Command::Simulate {
            output,
            n,
            p,
            coeffs,
            transport,
            indirect,
            secondary_size,
            grid_size,
            seed,
        } => {
            if coeffs.len() != 4 {
                return Err(Error::Input(format!(
                    "--coeffs expects a1,a2,b1,b2 (4 values), got {}",
                    coeffs.len()
                )));
            }
            let config = SimConfig {
                n,
                p,
                alpha1: coeffs[0],
                alpha2: coeffs[1],
                beta1: coeffs[2],
                beta2: coeffs[3],
                transport: transport.into(),
                indirect,
                secondary_size,
                grid_size,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gen = generate_dataset(&config, &mut rng)?;
            let names: Vec<String> = (0..p).map(|j| format!("x{}", j + 1)).collect();
            io::save_dataset(&output, &gen.data, &names)?;
            println!(
                "wrote {} curves on a {}-point grid to {}",
                gen.data.n(),
                gen.data.grid().len(),
                output.display()
            );
            Ok(())
        }

        Command::Reproduce { what, output, seed, reps, full, alpha, delta, n } => {
            let reps = reps.unwrap_or(if full { 500 } else { 100 });
            let ns: Vec<usize> = n.map_or_else(|| vec![100, 200, 500], |v| vec![v]);
            let mut opts = ExperimentOptions::new(reps, seed);
            opts.alpha = alpha;
            opts.delta = delta;
            match what.as_str() {
                "fig2" => {
                    let signals = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
                    let mut settings = Vec::new();
                    for &test in &[TestKind::Global, TestKind::Partial] {
                        for &transport in &[TransportKind::Linear, TransportKind::Nonlinear] {
                            for &n in &ns {
                                for &signal in &signals {
                                    settings.push(PowerSetting { test, transport, n, signal });
                                }
                            }
                        }
                    }
                    let engines = [Method::Mixture, Method::Satterthwaite];
                    let rows = sim::run_power_experiment(&settings, &engines, &opts)?;
                    io::write_file(&output.join("fig2.csv"), &io::power_rows_to_csv(&rows))?;
                    println!("wrote {} power rows to {}", rows.len(), output.join("fig2.csv").display());
                }
                "table1" => {
                    let xs: Vec<f64> = (-5..=5).map(|k| k as f64 * 0.06).collect();
                    let mut settings = Vec::new();
                    for &band in &[BandKind::Winf, BandKind::Density] {
                        for &transport in &[TransportKind::Linear, TransportKind::Nonlinear] {
                            for &n in &ns {
                                settings.push(CoverageSetting { band, transport, n });
                            }
                        }
                    }
                    let rows = sim::run_coverage_experiment(&settings, &xs, &opts)?;
                    io::write_file(&output.join("table1.csv"), &io::coverage_rows_to_csv(&rows))?;
                    println!(
                        "wrote {} coverage cells to {}",
                        rows.len(),
                        output.join("table1.csv").display()
                    );
                }
                other => return Err(Error::Input(format!("unknown experiment {other:?}"))),
            }
            Ok(())
        }
    }
}
