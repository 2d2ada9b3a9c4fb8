use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::config::Numerology;
use crate::detector::{
    calibrate_plot_threshold, extract_plots, rate_interval, threshold_seed, PeakPool, PlotList, PlotThreshold,
};
use crate::error::{Error, Result};
use crate::radar_rx::{calibrate_rcs, RcsCalibration};
use crate::ris_opt::{optimize_ris, OptimizeOptions};
use crate::rng::{self, purpose};
use crate::scene::ChannelSet;
use crate::tbd::{best_trajectory, calibrate_tbd_threshold, TbdThreshold};
use crate::txwave::matched_beamformers;

/// All thresholds and scale factors needed to run H1 trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub seed: u64,
    pub pfa: f64,
    pub plot: PlotThreshold,
    pub tbd: Vec<TbdThreshold>,
    pub rcs: RcsCalibration,
    pub numerology: Numerology,
}

impl Calibration {
    pub fn tbd_threshold(&self, n_scan: usize) -> Result<f64> {
        self.tbd
            .iter()
            .find(|t| t.n_scan == n_scan)
            .map(|t| t.eta)
            .ok_or_else(|| Error::Calibration(format!("no TBD threshold for N_scan = {n_scan}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Plot threshold giving the configured mean number of plots per H0 scan.
pub fn calibrate_plots(scn: &Scenario, seed: u64, scans: usize) -> Result<PlotThreshold> {
    let c = &scn.config;
    let target = c.detection.plots_per_scan;
    let eta0 = threshold_seed(
        c.ofdm.used_subcarriers,
        c.ofdm.symbols_per_cpi,
        scn.grid.n_del() * scn.grid.n_dop(),
        scn.grid.n_dir(),
        target,
    );
    let floor = 0.5 * eta0;
    let pools: Vec<PeakPool> = (0..scans)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(seed, &[purpose::PLOT_CALIBRATION, s as u64]);
            let mut pool = PeakPool::new(floor);
            pool.add_cube(&scn.simulate_h0_scan(0, &mut r));
            pool
        })
        .collect();
    let mut pool = PeakPool::new(floor);
    for p in pools {
        pool.merge(p);
    }
    let cal = calibrate_plot_threshold(&mut pool, target, eta0, 2.0 * eta0)?;
    log::info!(
        "plot threshold {:.1} (seed {:.1}): {:.3} plots/scan, 95% CI [{:.3}, {:.3}] over {} scans",
        cal.eta,
        eta0,
        cal.achieved_rate,
        cal.ci_low,
        cal.ci_high,
        cal.scans
    );
    Ok(cal)
}

/// Mean plots per scan on fresh H0 scans, with its 95% interval.
pub fn validate_plot_rate(scn: &Scenario, eta_plot: f64, seed: u64, scans: usize) -> (f64, f64, f64) {
    let parabolic = scn.config.detection.parabolic_range;
    let counts: Vec<usize> = (0..scans)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(seed, &[purpose::PLOT_VALIDATION, s as u64]);
            extract_plots(&scn.simulate_h0_scan(0, &mut r), &scn.grid, eta_plot, parabolic).len()
        })
        .collect();
    rate_interval(&counts)
}

/// `T*` of H0 super-trials for each window length in `n_scans`. All window
/// lengths of one super-trial end at the same scan and share its scans.
pub fn h0_tbd_maxima(
    scn: &Scenario,
    eta_plot: f64,
    seed: u64,
    stream_purpose: u64,
    trials: usize,
    n_scans: &[usize],
) -> Result<Vec<Vec<Option<f64>>>> {
    let n_max = n_scans.iter().copied().max().unwrap_or(0);
    let gate = scn.gate();
    let parabolic = scn.config.detection.parabolic_range;
    let per_trial: Vec<Result<Vec<Option<f64>>>> = (0..trials)
        .into_par_iter()
        .map(|m| {
            let lists: Vec<PlotList> = (0..n_max)
                .map(|s| {
                    let mut r = rng::stream(seed, &[stream_purpose, m as u64, s as u64]);
                    extract_plots(&scn.simulate_h0_scan(s, &mut r), &scn.grid, eta_plot, parabolic)
                })
                .collect();
            n_scans
                .iter()
                .map(|&n| Ok(best_trajectory(&lists[n_max - n..], gate)?.map(|t| t.metric)))
                .collect()
        })
        .collect();
    let mut out = vec![Vec::with_capacity(trials); n_scans.len()];
    for t in per_trial {
        for (k, v) in t?.into_iter().enumerate() {
            out[k].push(v);
        }
    }
    Ok(out)
}

/// TBD thresholds for every window length at false-alarm probability `pfa`.
pub fn calibrate_tbd(
    scn: &Scenario,
    eta_plot: f64,
    pfa: f64,
    n_scans: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<TbdThreshold>> {
    let samples = h0_tbd_maxima(scn, eta_plot, seed, purpose::TBD_CALIBRATION, trials, n_scans)?;
    n_scans
        .iter()
        .zip(&samples)
        .map(|(&n, s)| {
            let t = calibrate_tbd_threshold(s, pfa, n)?;
            log::info!("TBD threshold N_scan = {n}: {:.1} [{:.1}, {:.1}]", t.eta, t.ci_low, t.ci_high);
            Ok(t)
        })
        .collect()
}

/// RCS calibration with sensing-only RIS profiles. These do not depend on
/// the user, so any user position gives the same result.
pub fn calibrate_rcs_reference(scn: &Scenario) -> Result<RcsCalibration> {
    let g = &scn.config.geometry;
    let user = (Vector3::from(g.user_min) + Vector3::from(g.user_max)) * 0.5;
    let channels = ChannelSet::with_user(scn.links.clone(), user)?;
    let beams = matched_beamformers(&channels)?;
    let gamma = vec![1.0; channels.n_sub()];
    let opts = OptimizeOptions::from_params(&scn.config.ris_opt);
    let profiles = scn
        .grid
        .pointing
        .iter()
        .map(|&d| Ok(optimize_ris(d, &channels, &beams, &gamma, &opts)?.profile))
        .collect::<Result<Vec<_>>>()?;
    let rcs = calibrate_rcs(&scn.config, &channels, &beams, &profiles)?;
    log::info!(
        "RCS {:.4e} m^2 at {:.1} m, direction {}",
        rcs.sigma_rcs,
        rcs.reference_range,
        rcs.reference_direction
    );
    Ok(rcs)
}

/// Full calibration with the configured trial counts.
pub fn calibrate(scn: &Scenario, pfa: f64, n_scans: &[usize], seed: u64) -> Result<Calibration> {
    let c = &scn.config;
    let plot = calibrate_plots(scn, seed, c.sweep.plot_calibration_scans)?;
    let tbd = calibrate_tbd(scn, plot.eta, pfa, n_scans, c.tbd_trials_for(pfa), seed)?;
    let rcs = calibrate_rcs_reference(scn)?;
    Ok(Calibration {
        seed,
        pfa,
        plot,
        tbd,
        rcs,
        numerology: c.numerology(),
    })
}
