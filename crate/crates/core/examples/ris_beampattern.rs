//! Optimizes the RIS phases for every pointing direction and compares the
//! beampattern with random unit-modulus profiles.
//!
//! cargo run --release --example ris_beampattern -- 0.2

use nalgebra::Vector3;
use ristbd::config::ScenarioConfig;
use ristbd::ris_opt::{beampattern, optimize_ris, OptimizeOptions, RisProfile};
use ristbd::rng;
use ristbd::scene::{build_channels, Angles};
use ristbd::txwave::matched_beamformers;

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn main() -> ristbd::error::Result<()> {
    let gamma: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let cfg = ScenarioConfig::default();
    let ch = build_channels(&cfg, Vector3::new(30.0, -30.0, 1.75))?;
    let beams = matched_beamformers(&ch)?;
    let gv = vec![gamma; ch.n_sub()];
    let mut r = rng::stream(7, &[]);

    println!("gamma = {gamma}");
    println!("dir   az     el    BP opt (dB)  BP random (dB)  sweeps");
    let mut profiles = Vec::new();
    for (i, p) in cfg.grids.pointing_deg.iter().enumerate() {
        let dir = Angles::from_degrees(p[0], p[1]);
        let sol = optimize_ris(dir, &ch, &beams, &gv, &OptimizeOptions::from_params(&cfg.ris_opt))?;
        let random = (0..100)
            .map(|_| beampattern(&RisProfile::random(&mut r, ch.ris().len()).weights(), dir, &ch, &beams, &gv))
            .sum::<f64>()
            / 100.0;
        println!(
            "{:3} {:6.2} {:6.2}   {:10.2}   {:12.2}   {:5}",
            i + 1,
            p[0],
            p[1],
            db(sol.objective),
            db(random),
            sol.sweeps
        );
        profiles.push(sol.profile);
    }

    // azimuth cut at 10 degrees elevation for the third profile
    println!("\nazimuth cut, profile 3");
    let w = profiles[2].weights();
    for az in (-30..=30).step_by(3) {
        let bp = beampattern(&w, Angles::from_degrees(az as f64, 10.0), &ch, &beams, &gv);
        println!("{az:4} deg  {:7.2} dB", db(bp));
    }
    Ok(())
}
