//! Small sensing/communication tradeoff sweep; writes CSVs into `sweep_out/`.
//!
//! cargo run --release --example tradeoff_sweep -- 200

use ristbd::config::ScenarioConfig;
use ristbd::harness::{calibrate, run_sweep, write_records, write_report, Scenario, SweepOptions};

fn main() -> ristbd::error::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let mut cfg = ScenarioConfig::default();
    cfg.sweep.plot_calibration_scans = 4000;
    cfg.sweep.gammas = vec![0.0, 0.2, 0.6, 1.0];
    cfg.sweep.n_scans = vec![1, 5, 15];
    let scn = Scenario::new(cfg)?;
    let cal = calibrate(&scn, 0.05, &scn.config.sweep.n_scans, 1)?;
    let opts = SweepOptions { trials, ..SweepOptions::from_config(&scn.config) };
    let res = run_sweep(&scn, &cal, &opts)?;

    println!("gamma  N_scan   P_d     RMSE (m)");
    for p in &res.points {
        println!(
            "{:5.2}  {:6}  {:6.3}  {}",
            p.gamma,
            p.n_scan,
            p.pd,
            p.rmse_m.map_or("-".into(), |v| format!("{v:.2}"))
        );
    }
    for f in write_report(&res, "sweep_out")? {
        println!("{}", f.display());
    }
    write_records(&res.records, "sweep_out")?;
    Ok(())
}
