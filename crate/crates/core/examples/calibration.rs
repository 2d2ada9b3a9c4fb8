//! Calibrates plot and TBD thresholds and the target RCS, and writes
//! `calibration.json`.
//!
//! cargo run --release --example calibration -- 0.05

use ristbd::config::ScenarioConfig;
use ristbd::harness::{calibrate, Scenario};

fn main() -> ristbd::error::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let pfa: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let mut cfg = ScenarioConfig::default();
    cfg.sweep.plot_calibration_scans = 2000;
    let scn = Scenario::new(cfg)?;
    let n = scn.config.numerology();
    println!(
        "range res {:.2} m, velocity res {:.2} m/s, CP range {:.1} m, unamb. range {:.1} m, unamb. velocity {:.1} m/s",
        n.range_resolution_m, n.velocity_resolution_mps, n.cp_limited_range_m, n.unambiguous_range_m, n.unambiguous_velocity_mps
    );
    let cal = calibrate(&scn, pfa, &scn.config.sweep.n_scans, scn.config.sweep.seed)?;
    for t in &cal.tbd {
        println!("N_scan {:2}: eta_TBD {:.1}", t.n_scan, t.eta);
    }
    cal.save("calibration.json")?;
    println!("wrote calibration.json");
    Ok(())
}
