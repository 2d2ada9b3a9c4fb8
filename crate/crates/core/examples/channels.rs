//! Builds the scene and prints link budgets and beamformer gains.
//!
//! cargo run --release --example channels

use nalgebra::Vector3;
use ristbd::config::ScenarioConfig;
use ristbd::scene::build_channels;
use ristbd::txwave::matched_beamformers;

fn main() -> ristbd::error::Result<()> {
    let cfg = ScenarioConfig::default();
    let user = Vector3::new(30.0, -30.0, 1.75);
    let ch = build_channels(&cfg, user)?;
    let beams = matched_beamformers(&ch)?;

    let ris = ch.ris();
    let tx = &ch.links.tx;
    println!("BS tx centre {:?}", tx.center().as_slice());
    println!("RIS centre   {:?}  ({} elements)", ris.center().as_slice(), ris.len());
    println!("BS-RIS distance {:.3} m", (tx.center() - ris.center()).norm());
    println!("subcarriers {} from {:.4} GHz to {:.4} GHz", ch.n_sub(), ch.freqs()[0] / 1e9, ch.freqs()[ch.n_sub() - 1] / 1e9);

    println!("\n   q   |G_tx|_F^2      ||G_tx f_s||^2  |h_c|^2         |h_c^H f_s|^2");
    for q in [0, ch.n_sub() / 2, ch.n_sub() - 1] {
        let g = ch.g_tx(q);
        println!(
            "{:4}   {:.4e}   {:.4e}   {:.4e}   {:.4e}",
            q + 1,
            g.norm_squared(),
            (g * &beams.sensing[q]).norm_squared(),
            ch.h_c[q].norm_squared(),
            ch.h_c[q].dotc(&beams.sensing[q]).norm_sqr(),
        );
    }
    Ok(())
}
