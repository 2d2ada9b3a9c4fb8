use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Calibration, Scenario};
use crate::comms::comm_report;
use crate::detector::{extract_plots, PlotList};
use crate::error::{Error, Result};
use crate::radar_rx::{amplitude_variance, CorrelatorBank, EchoTarget, ScanCube, TargetState};
use crate::ris_opt::{optimize_ris, OptimizeOptions};
use crate::rng::{self, complex_normal, purpose};
use crate::scene::{drop_user, Angles, ChannelSet};
use crate::tbd::run_tbd;
use crate::txwave::matched_beamformers;

const MAX_TARGET_DRAWS: usize = 100_000;

/// Outcome of one H1 trial at one `(gamma, N_scan)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub gamma: f64,
    pub n_scan: usize,
    pub detected: bool,
    /// Detected within the gate radius of the true position.
    pub gated: bool,
    pub t_star: Option<f64>,
    pub est_x: Option<f64>,
    pub est_y: Option<f64>,
    pub est_z: Option<f64>,
    pub true_x: f64,
    pub true_y: f64,
    pub true_z: f64,
    pub error_m: Option<f64>,
    /// User spectral efficiency of this drop (bit/s/Hz).
    pub se: f64,
    /// Plots per scan over the window, `;`-separated.
    pub plot_counts: String,
    pub seed: u64,
}

/// Constant-velocity target, uniform in the inspected volume, with uniform
/// heading and speed, redrawn until every illumination of the first
/// `n_scans` scans sees it inside the volume.
pub fn draw_target<R: Rng + ?Sized>(rng: &mut R, scn: &Scenario, n_scans: usize) -> Result<TargetState> {
    let c = &scn.config;
    let v = &c.volume;
    let (r0, r1) = (v.range_m[0], v.range_m[1]);
    let (s0, s1) = (v.elevation_deg[0].to_radians().sin(), v.elevation_deg[1].to_radians().sin());
    for _ in 0..MAX_TARGET_DRAWS {
        let r = (r0.powi(3) + rng.random::<f64>() * (r1.powi(3) - r0.powi(3))).cbrt();
        let az = rng.random_range(v.azimuth_deg[0]..=v.azimuth_deg[1]).to_radians();
        let el = rng.random_range(s0..=s1).asin();
        let position = scn.links.ris.point_at(Angles::new(az, el), r);
        let cz: f64 = rng.random_range(-1.0..=1.0);
        let phi = rng.random_range(0.0..2.0 * PI);
        let rho = (1.0 - cz * cz).sqrt();
        let heading = Vector3::new(rho * phi.cos(), rho * phi.sin(), cz);
        let speed = rng.random_range(0.0..=c.grids.max_speed_mps);
        let state = TargetState {
            position,
            velocity: heading * speed,
        };
        let inside = (0..n_scans)
            .all(|s| (0..c.n_dir()).all(|i| scn.in_volume(&state.at(c.illumination_time(s, i)))));
        if inside {
            return Ok(state);
        }
    }
    Err(Error::Geometry(format!(
        "no target trajectory stayed in the volume after {MAX_TARGET_DRAWS} draws"
    )))
}

/// One H1 trial evaluated at every `(gamma, N_scan)` pair, ordered with
/// `gamma` outermost. All pairs share the user drop, the target trajectory
/// over the longest window, the fluctuation draws and the noise streams;
/// every window ends at the same scan.
pub fn run_h1_trial_multi(
    scn: &Scenario,
    cal: &Calibration,
    gammas: &[f64],
    n_scans: &[usize],
    trial: u64,
) -> Result<Vec<TrialRecord>> {
    let c = &scn.config;
    let seed = rng::derive_seed(cal.seed, &[purpose::H1_TRIAL, trial]);
    let mut r = rng::stream(cal.seed, &[purpose::H1_TRIAL, trial]);
    let n_max = n_scans.iter().copied().max().unwrap_or(0);
    let user = drop_user(&mut r, c);
    let target = draw_target(&mut r, scn, n_max)?;
    let fluctuation: Vec<Complex64> = (0..n_max).map(|_| complex_normal(&mut r)).collect();

    let channels = ChannelSet::with_user(scn.links.clone(), user)?;
    let beams = matched_beamformers(&channels)?;
    let n_sub = channels.n_sub();
    let sigma2 = c.noise.sensing_var_w;
    let ris = &scn.links.ris;

    // echo parameters do not depend on gamma
    let mut echoes = Vec::with_capacity(n_max * c.n_dir());
    for s in 0..n_max {
        for i in 0..c.n_dir() {
            let g = target.geometry(ris, c.ofdm.carrier_hz, c.illumination_time(s, i));
            let var = amplitude_variance(cal.rcs.sigma_rcs, g.angles, g.range, c.ofdm.carrier_hz)?;
            echoes.push(EchoTarget {
                alpha: fluctuation[s] * var.sqrt(),
                delay: g.delay,
                doppler: g.doppler,
                angles: g.angles,
            });
        }
    }

    let mut out = Vec::with_capacity(gammas.len() * n_scans.len());
    for &gamma in gammas {
        let gv = vec![gamma; n_sub];
        let profiles = scn
            .grid
            .pointing
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let opts = OptimizeOptions {
                    seed: rng::derive_seed(cal.seed, &[purpose::RIS_INIT, trial, i as u64]),
                    ..OptimizeOptions::from_params(&c.ris_opt)
                };
                Ok(optimize_ris(d, &channels, &beams, &gv, &opts)?.profile)
            })
            .collect::<Result<Vec<_>>>()?;
        let bank = CorrelatorBank::new(c, &scn.grid, &channels, &beams, &profiles);
        let se = comm_report(&channels, &beams, &gv, &c.ofdm, c.noise.comm_var_w).se;

        let mut z = vec![Complex64::default(); bank.samples_per_cpi()];
        let lists: Vec<PlotList> = (0..n_max)
            .map(|s| {
                let mut cube = ScanCube::zeros(&scn.grid, s, scn.timestamps(s));
                for i in 0..c.n_dir() {
                    let mut nr = rng::stream(cal.seed, &[purpose::H1_TRIAL, trial, 1 + s as u64, i as u64]);
                    let echo = &echoes[s * c.n_dir() + i];
                    bank.simulate_cpi(i, Some(echo), &gv, &c.ofdm, sigma2, &mut nr, &mut z);
                    bank.slice_from_projection(&z, sigma2, cube.slice_mut(i));
                }
                extract_plots(&cube, &scn.grid, cal.plot.eta, c.detection.parabolic_range)
            })
            .collect();

        for &n in n_scans {
            let window = &lists[n_max - n..];
            let decision = run_tbd(window, scn.gate(), cal.tbd_threshold(n)?, c.detection.smoothing_degree)?;
            // truth at the time of the estimate, or of the last scan start
            let t_eval = decision
                .trajectory
                .as_ref()
                .and_then(|t| t.plots(window).last().map(|p| p.time))
                .unwrap_or_else(|| c.illumination_time(n_max - 1, 0));
            let truth = target.at(t_eval);
            let (est, error) = match decision.position {
                Some(local) => {
                    let err = (local - ris.to_local(&truth)).norm();
                    (Some(ris.to_global(&local)), Some(err))
                }
                None => (None, None),
            };
            let counts: Vec<String> = window.iter().map(|l| l.len().to_string()).collect();
            out.push(TrialRecord {
                trial,
                gamma,
                n_scan: n,
                detected: decision.detected,
                gated: error.is_some_and(|e| e <= c.detection.gate_radius_m),
                t_star: decision.t_star(),
                est_x: est.map(|p| p.x),
                est_y: est.map(|p| p.y),
                est_z: est.map(|p| p.z),
                true_x: truth.x,
                true_y: truth.y,
                true_z: truth.z,
                error_m: error,
                se,
                plot_counts: counts.join(";"),
                seed,
            });
        }
    }
    Ok(out)
}

/// A single `(gamma, N_scan)` trial.
pub fn run_h1_trial(scn: &Scenario, cal: &Calibration, gamma: f64, n_scan: usize, trial: u64) -> Result<TrialRecord> {
    let mut v = run_h1_trial_multi(scn, cal, &[gamma], &[n_scan], trial)?;
    Ok(v.remove(0))
}
