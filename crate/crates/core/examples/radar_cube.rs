//! Simulates one scan with a target and prints the strongest cube bins,
//! then writes the cube to `cube.bin`.
//!
//! cargo run --release --example radar_cube

use nalgebra::Vector3;
use num_complex::Complex64;
use ristbd::config::ScenarioConfig;
use ristbd::harness::{calibrate_rcs_reference, Scenario};
use ristbd::radar_rx::{amplitude_variance, write_cube, CorrelatorBank, EchoTarget, ScanCube};
use ristbd::ris_opt::{optimize_ris, OptimizeOptions};
use ristbd::rng;
use ristbd::scene::{Angles, ChannelSet};
use ristbd::txwave::matched_beamformers;

fn main() -> ristbd::error::Result<()> {
    let scn = Scenario::new(ScenarioConfig::default())?;
    let cfg = &scn.config;
    let rcs = calibrate_rcs_reference(&scn)?;
    let ch = ChannelSet::with_user(scn.links.clone(), Vector3::new(30.0, -30.0, 1.75))?;
    let beams = matched_beamformers(&ch)?;
    let gamma = vec![0.5; ch.n_sub()];
    let profiles = scn
        .grid
        .pointing
        .iter()
        .map(|&d| Ok(optimize_ris(d, &ch, &beams, &gamma, &OptimizeOptions::default())?.profile))
        .collect::<ristbd::error::Result<Vec<_>>>()?;
    let bank = CorrelatorBank::new(cfg, &scn.grid, &ch, &beams, &profiles);

    let angles = Angles::from_degrees(5.0, 11.0);
    let range = 120.0;
    let radial_speed = 12.0;
    let var = amplitude_variance(rcs.sigma_rcs, angles, range, cfg.ofdm.carrier_hz)?;
    let echo = EchoTarget {
        alpha: Complex64::new(var.sqrt(), 0.0),
        delay: 2.0 * range / ristbd::config::SPEED_OF_LIGHT,
        doppler: 2.0 * radial_speed * cfg.ofdm.carrier_hz / ristbd::config::SPEED_OF_LIGHT,
        angles,
    };
    let sigma2 = cfg.noise.sensing_var_w;
    let mut cube = ScanCube::zeros(&scn.grid, 0, scn.timestamps(0));
    let mut z = vec![Complex64::default(); bank.samples_per_cpi()];
    for i in 0..scn.grid.n_dir() {
        bank.simulate_cpi(i, Some(&echo), &gamma, &cfg.ofdm, sigma2, &mut rng::stream(3, &[i as u64]), &mut z);
        bank.slice_from_projection(&z, sigma2, cube.slice_mut(i));
    }

    let norm = (cfg.ofdm.used_subcarriers * cfg.ofdm.symbols_per_cpi) as f64;
    let mut bins: Vec<(f64, usize, usize, usize)> = Vec::new();
    for i in 0..cube.n_dir {
        for j in 0..cube.n_del {
            for d in 0..cube.n_dop {
                bins.push((cube.get(i, j, d) / norm, i, j, d));
            }
        }
    }
    bins.sort_by(|a, b| b.0.total_cmp(&a.0));
    println!("target at {range} m, az 5 deg, el 11 deg, {radial_speed} m/s radial");
    println!("A/(N_sub N_sym)   dir  range(m)  doppler(Hz)");
    for (v, i, j, d) in bins.iter().take(8) {
        println!("{v:14.2}   {:3}  {:8.2}  {:10.1}", i + 1, scn.grid.ranges[*j], scn.grid.dopplers[*d]);
    }

    let mut f = std::io::BufWriter::new(std::fs::File::create("cube.bin")?);
    write_cube(&mut f, &cube, &scn.grid)?;
    println!("wrote cube.bin");
    Ok(())
}
