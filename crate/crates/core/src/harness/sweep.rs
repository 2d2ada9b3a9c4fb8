use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{config_hash, run_h1_trial_multi, worker_pool, Calibration, Scenario, TrialRecord};
use crate::comms::{se_percentile_rows, SePercentileRow};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub gammas: Vec<f64>,
    pub n_scans: Vec<usize>,
    pub trials: usize,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
}

impl SweepOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            gammas: config.sweep.gammas.clone(),
            n_scans: config.sweep.n_scans.clone(),
            trials: config.sweep.h1_trials,
            workers: 0,
        }
    }
}

/// Metrics of one `(gamma, N_scan)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub n_scan: usize,
    pub trials: usize,
    pub detections: usize,
    pub gated_detections: usize,
    pub pd: f64,
    pub pd_ci_low: f64,
    pub pd_ci_high: f64,
    /// Over gated detections only; absent when there are none.
    pub rmse_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ScenarioConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub calibration: Calibration,
    pub points: Vec<GridPoint>,
    pub se_percentiles: Vec<SePercentileRow>,
    pub failed_trials: Vec<u64>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn point(&self, gamma: f64, n_scan: usize) -> Option<&GridPoint> {
        self.points.iter().find(|p| p.gamma == gamma && p.n_scan == n_scan)
    }
}

fn aggregate(gamma: f64, n_scan: usize, records: &[&TrialRecord]) -> GridPoint {
    let trials = records.len();
    let detections = records.iter().filter(|r| r.detected).count();
    let gated: Vec<f64> = records
        .iter()
        .filter(|r| r.gated)
        .filter_map(|r| r.error_m)
        .collect();
    let pd = gated.len() as f64 / trials.max(1) as f64;
    let half = 1.96 * (pd * (1.0 - pd) / trials.max(1) as f64).sqrt();
    GridPoint {
        gamma,
        n_scan,
        trials,
        detections,
        gated_detections: gated.len(),
        pd,
        pd_ci_low: (pd - half).max(0.0),
        pd_ci_high: (pd + half).min(1.0),
        rmse_m: (!gated.is_empty())
            .then(|| (gated.iter().map(|e| e * e).sum::<f64>() / gated.len() as f64).sqrt()),
    }
}

/// Runs `opts.trials` H1 trials over the whole grid. Results do not depend on
/// the number of workers.
pub fn run_sweep(scn: &Scenario, cal: &Calibration, opts: &SweepOptions) -> Result<SweepResult> {
    for &n in &opts.n_scans {
        cal.tbd_threshold(n)?;
    }
    let pool = worker_pool(opts.workers)?;
    let outcomes: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        (0..opts.trials as u64)
            .into_par_iter()
            .map(|t| {
                run_h1_trial_multi(scn, cal, &opts.gammas, &opts.n_scans, t).map_err(|e| Error::Trial {
                    trial: t,
                    source: Box::new(e),
                })
            })
            .collect()
    });
    let mut records = Vec::with_capacity(opts.trials * opts.gammas.len() * opts.n_scans.len());
    let mut failed = Vec::new();
    let mut first_error = None;
    for (t, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.extend(r),
            Err(e) => {
                log::warn!("{e}");
                failed.push(t as u64);
                first_error.get_or_insert(e);
            }
        }
    }
    if failed.len() * 100 > opts.trials {
        return Err(first_error.expect("failures recorded"));
    }

    let mut points = Vec::new();
    let mut se_samples = Vec::new();
    for &g in &opts.gammas {
        for &n in &opts.n_scans {
            let sel: Vec<&TrialRecord> = records.iter().filter(|r| r.gamma == g && r.n_scan == n).collect();
            points.push(aggregate(g, n, &sel));
        }
        let first_n = opts.n_scans[0];
        se_samples.push(
            records
                .iter()
                .filter(|r| r.gamma == g && r.n_scan == first_n)
                .map(|r| r.se)
                .collect::<Vec<_>>(),
        );
    }
    let se_percentiles = if se_samples.iter().all(|s| !s.is_empty()) {
        se_percentile_rows(&opts.gammas, &se_samples)
    } else {
        Vec::new()
    };
    Ok(SweepResult {
        config: scn.config.clone(),
        config_sha256: config_hash(&scn.config),
        seed: cal.seed,
        calibration: cal.clone(),
        points,
        se_percentiles,
        failed_trials: failed,
        records,
    })
}
