use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ristbd::config::ScenarioConfig;
use ristbd::error::{Error, Result};
use ristbd::harness::{
    calibrate, load_manifest, run_sweep, worker_pool, write_records, write_report, Calibration, Scenario,
    SweepOptions,
};

/// RIS-aided ISAC Monte Carlo simulator with track-before-detect.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Scenario file (TOML); defaults are used for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated sensing power fractions.
    #[arg(long, global = true, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Comma-separated TBD window lengths.
    #[arg(long, global = true, value_delimiter = ',')]
    nscan: Option<Vec<usize>>,
    /// H1 trials per grid point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Target false-alarm probability of the TBD test.
    #[arg(long, global = true)]
    pfa: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Reuse a calibration file instead of calibrating.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Calibrate thresholds and target RCS; writes calibration.json.
    Calibrate,
    /// Run one grid point and print its metrics.
    Run,
    /// Run the full grid and write result files.
    Sweep,
    /// Re-emit result files from a saved manifest.
    Report {
        /// Manifest to read (defaults to <out>/manifest.json).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut c = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(g) = &cli.gamma {
        c.sweep.gammas = g.clone();
    }
    if let Some(n) = &cli.nscan {
        c.sweep.n_scans = n.clone();
    }
    if let Some(t) = cli.trials {
        c.sweep.h1_trials = t;
    }
    if let Some(p) = cli.pfa {
        c.detection.pfa = p;
    }
    if let Some(s) = cli.seed {
        c.sweep.seed = s;
    }
    c.validate()?;
    Ok(c)
}

fn obtain_calibration(cli: &Cli, scn: &Scenario) -> Result<Calibration> {
    let c = &scn.config;
    if let Some(path) = &cli.calibration {
        let cal = Calibration::load(path)?;
        for &n in &c.sweep.n_scans {
            cal.tbd_threshold(n)?;
        }
        return Ok(cal);
    }
    let pool = worker_pool(cli.workers)?;
    pool.install(|| calibrate(scn, c.detection.pfa, &c.sweep.n_scans, c.sweep.seed))
}

fn execute(cli: &Cli) -> Result<()> {
    if let Command::Report { manifest } = &cli.command {
        let path = manifest.clone().unwrap_or_else(|| cli.out.join("manifest.json"));
        let result = load_manifest(path)?;
        for f in write_report(&result, &cli.out)? {
            println!("{}", f.display());
        }
        return Ok(());
    }
    let scn = Scenario::new(load_config(cli)?)?;
    let c = &scn.config;
    match cli.command {
        Command::Calibrate => {
            let cal = obtain_calibration(cli, &scn)?;
            std::fs::create_dir_all(&cli.out)?;
            let path = cli.out.join("calibration.json");
            cal.save(&path)?;
            println!("eta_plot {:.3} ({:.3} plots/scan)", cal.plot.eta, cal.plot.achieved_rate);
            for t in &cal.tbd {
                println!("eta_tbd N_scan={} {:.3}", t.n_scan, t.eta);
            }
            println!("sigma_rcs {:.6e} m^2", cal.rcs.sigma_rcs);
            println!("{}", path.display());
        }
        Command::Run => {
            let cal = obtain_calibration(cli, &scn)?;
            let opts = SweepOptions {
                workers: cli.workers,
                ..SweepOptions::from_config(c)
            };
            let res = run_sweep(&scn, &cal, &opts)?;
            for p in &res.points {
                let rmse = p.rmse_m.map_or("-".to_string(), |r| format!("{r:.2}"));
                println!(
                    "gamma {:.2} N_scan {:2}: P_d {:.4} [{:.4}, {:.4}] RMSE {} m over {} trials",
                    p.gamma, p.n_scan, p.pd, p.pd_ci_low, p.pd_ci_high, rmse, p.trials
                );
            }
            for r in &res.se_percentiles {
                println!("gamma {:.2} SE {} {:.4} bit/s/Hz", r.gamma, r.percentile, r.se);
            }
        }
        Command::Sweep => {
            let cal = obtain_calibration(cli, &scn)?;
            let opts = SweepOptions {
                workers: cli.workers,
                ..SweepOptions::from_config(c)
            };
            let res = run_sweep(&scn, &cal, &opts)?;
            for f in write_report(&res, &cli.out)? {
                println!("{}", f.display());
            }
            println!("{}", write_records(&res.records, &cli.out)?.display());
        }
        Command::Report { .. } => unreachable!(),
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Calibration(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
