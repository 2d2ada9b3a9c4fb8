//! Calibrates the plot threshold on target-free scans and shows the plot
//! list of one fresh scan.
//!
//! cargo run --release --example plot_extraction

use ristbd::config::ScenarioConfig;
use ristbd::detector::{extract_plots, write_plots_csv};
use ristbd::harness::{calibrate_plots, validate_plot_rate, Scenario};
use ristbd::rng;

fn main() -> ristbd::error::Result<()> {
    env_logger::init();
    let scn = Scenario::new(ScenarioConfig::default())?;
    let cal = calibrate_plots(&scn, 1, 2000)?;
    println!(
        "eta_plot = {:.1} (seed {:.1}); {:.3} plots/scan, 95% CI [{:.3}, {:.3}]",
        cal.eta, cal.seed, cal.achieved_rate, cal.ci_low, cal.ci_high
    );
    let (rate, lo, hi) = validate_plot_rate(&scn, cal.eta, 2, 2000);
    println!("fresh scans: {rate:.3} plots/scan [{lo:.3}, {hi:.3}]");

    let cube = scn.simulate_h0_scan(0, &mut rng::stream(99, &[]));
    let plots = extract_plots(&cube, &scn.grid, cal.eta, true);
    println!("\n{} plots in one target-free scan:", plots.len());
    write_plots_csv(std::io::stdout(), &plots.plots)?;
    Ok(())
}
