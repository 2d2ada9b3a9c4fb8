//! Calibration, Monte Carlo trials, parameter sweeps and result files.

mod calibrate;
mod report;
mod sweep;
mod trial;

use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;

pub use calibrate::{
    calibrate, calibrate_plots, calibrate_rcs_reference, calibrate_tbd, h0_tbd_maxima, validate_plot_rate,
    Calibration,
};
pub use report::{config_hash, load_manifest, write_records, write_report};
pub use sweep::{run_sweep, GridPoint, SweepOptions, SweepResult};
pub use trial::{draw_target, run_h1_trial, run_h1_trial_multi, TrialRecord};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::radar_rx::{DelayDopplerTransform, ScanCube, SearchGrid};
use crate::rng::complex_normal;
use crate::scene::StaticLinks;
use crate::tbd::GateParams;

/// Validated configuration with the user-independent geometry prebuilt.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub links: Arc<StaticLinks>,
    pub grid: SearchGrid,
    pub transform: DelayDopplerTransform,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let dev = config.numerology().max_relative_deviation_from_reference();
        if dev > 0.01 {
            log::warn!("waveform numerology deviates {:.1}% from the reference values", 100.0 * dev);
        }
        let links = Arc::new(StaticLinks::build(&config)?);
        let grid = SearchGrid::from_config(&config);
        let transform = DelayDopplerTransform::new(&config.ofdm, &grid);
        Ok(Self {
            config,
            links,
            grid,
            transform,
        })
    }

    pub fn gate(&self) -> GateParams {
        GateParams {
            max_speed: self.config.grids.max_speed_mps,
            slack: self.config.detection.speed_gate_slack,
        }
    }

    pub fn timestamps(&self, scan: usize) -> Vec<f64> {
        (0..self.config.n_dir())
            .map(|i| self.config.illumination_time(scan, i))
            .collect()
    }

    /// True iff `point` lies in the inspected volume.
    pub fn in_volume(&self, point: &Vector3<f64>) -> bool {
        let ris = &self.links.ris;
        let rel = point - ris.center();
        let r = rel.norm();
        let v = &self.config.volume;
        if !(r >= v.range_m[0] && r <= v.range_m[1]) || rel.dot(&ris.boresight()) <= 0.0 {
            return false;
        }
        let a = ris.local_angles(&rel);
        let (az, el) = (a.azimuth.to_degrees(), a.elevation.to_degrees());
        az >= v.azimuth_deg[0] && az <= v.azimuth_deg[1] && el >= v.elevation_deg[0] && el <= v.elevation_deg[1]
    }

    /// Statistic cube of one target-free scan.
    pub fn simulate_h0_scan<R: Rng + ?Sized>(&self, scan: usize, rng: &mut R) -> ScanCube {
        let sigma2 = self.config.noise.sensing_var_w;
        let sigma = sigma2.sqrt();
        let mut cube = ScanCube::zeros(&self.grid, scan, self.timestamps(scan));
        let mut z = vec![Complex64::default(); self.transform.samples_per_cpi()];
        for i in 0..self.grid.n_dir() {
            for v in z.iter_mut() {
                *v = complex_normal(rng) * sigma;
            }
            self.transform.apply(&z, sigma2, cube.slice_mut(i));
        }
        cube
    }
}

/// Worker pool with `workers` threads (0 means one per core).
pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}
