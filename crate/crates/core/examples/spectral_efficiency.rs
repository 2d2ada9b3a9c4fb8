//! User spectral efficiency percentiles over random drops versus the sensing
//! power fraction.
//!
//! cargo run --release --example spectral_efficiency

use std::sync::Arc;

use ristbd::comms::{comm_report, percentiles, PERCENTILES};
use ristbd::config::ScenarioConfig;
use ristbd::rng;
use ristbd::scene::{drop_user, ChannelSet, StaticLinks};
use ristbd::txwave::matched_beamformers;

fn main() -> ristbd::error::Result<()> {
    let cfg = ScenarioConfig::default();
    let links = Arc::new(StaticLinks::build(&cfg)?);
    let mut r = rng::stream(11, &[]);
    let drops: Vec<_> = (0..500)
        .map(|_| {
            let ch = ChannelSet::with_user(links.clone(), drop_user(&mut r, &cfg))?;
            let beams = matched_beamformers(&ch)?;
            Ok((ch, beams))
        })
        .collect::<ristbd::error::Result<_>>()?;

    print!("gamma ");
    for p in PERCENTILES {
        print!("    p{p:<4}");
    }
    println!();
    for &g in &cfg.sweep.gammas {
        let gv = vec![g; cfg.ofdm.used_subcarriers];
        let se: Vec<f64> = drops
            .iter()
            .map(|(ch, b)| comm_report(ch, b, &gv, &cfg.ofdm, cfg.noise.comm_var_w).se)
            .collect();
        print!("{g:5.2} ");
        for v in percentiles(&se, &PERCENTILES) {
            print!(" {v:8.4}");
        }
        println!();
    }
    Ok(())
}
