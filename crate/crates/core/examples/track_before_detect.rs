//! Runs the trajectory search on synthetic plot lists: a weak target moving
//! at constant velocity among random false plots.
//!
//! cargo run --release --example track_before_detect

use nalgebra::Vector3;
use rand::Rng;
use ristbd::detector::{Plot, PlotList};
use ristbd::rng;
use ristbd::tbd::{run_tbd, GateParams};

fn plot_at(stat: f64, p: Vector3<f64>, time: f64) -> Plot {
    let range = p.norm();
    Plot {
        statistic: stat,
        range,
        azimuth: p.x.atan2(p.z),
        elevation: (p.y / range).asin(),
        time,
    }
}

fn main() -> ristbd::error::Result<()> {
    let mut r = rng::stream(5, &[]);
    let period = 0.06;
    let start = Vector3::new(-20.0, 20.0, 120.0);
    let vel = Vector3::new(25.0, 0.0, -20.0);
    let gate = GateParams { max_speed: 40.0, slack: 0.15 };

    let mut lists = Vec::new();
    for s in 0..12 {
        let t = s as f64 * period;
        let mut plots: Vec<Plot> = (0..6)
            .map(|_| {
                let p = Vector3::new(r.random_range(-80.0..80.0), r.random_range(2.0..50.0), r.random_range(20.0..200.0));
                plot_at(r.random_range(1.0..1.5), p, t + r.random_range(0..6) as f64 * 0.01)
            })
            .collect();
        // the target is missed in every fourth scan
        if s % 4 != 1 {
            plots.push(plot_at(1.6, start + vel * t, t));
        }
        plots.sort_by(|a, b| b.statistic.total_cmp(&a.statistic));
        lists.push(PlotList { scan_index: s, plots });
    }

    for n in [1, 5, 12] {
        let window = &lists[lists.len() - n..];
        let d = run_tbd(window, gate, 1.1 * n as f64 + 0.6, 1)?;
        let t = d.trajectory.as_ref().expect("non-empty last list");
        println!("N_scan {n:2}: T* = {:.3}, detected = {}, xi = {:?}", t.metric, d.detected, t.xi);
        if let Some(p) = d.position {
            let truth = start + vel * t.plots(window).last().unwrap().time;
            println!("          estimate {:.2?}, error {:.2} m", p.as_slice(), (p - truth).norm());
        }
    }
    Ok(())
}
