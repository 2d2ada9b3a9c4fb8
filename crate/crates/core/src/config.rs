//! Scenario configuration.
//!
//! Every physical and system constant of a run lives in [`ScenarioConfig`].
//! The defaults reproduce the reference 5G-like setup (3.5 GHz carrier, 32
//! used subcarriers, 8x8 RIS, 5x3 base-station arrays); any field can be
//! overridden from a TOML file with nested sections.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmParams {
    pub carrier_hz: f64,
    pub total_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub cyclic_prefix_s: f64,
    pub used_subcarriers: usize,
    pub used_spacing_hz: f64,
    pub symbols_per_cpi: usize,
    pub idle_symbols: usize,
    /// Power radiated on each used subcarrier (W).
    pub power_w: f64,
}

impl Default for OfdmParams {
    fn default() -> Self {
        Self {
            carrier_hz: 3.5e9,
            total_subcarriers: 3300,
            subcarrier_spacing_hz: 15e3,
            cyclic_prefix_s: 4.7623e-6,
            used_subcarriers: 32,
            used_spacing_hz: 720e3,
            symbols_per_cpi: 64,
            idle_symbols: 76,
            power_w: 4.803e-6,
        }
    }
}

impl OfdmParams {
    /// OFDM symbol duration including the cyclic prefix.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz + self.cyclic_prefix_s
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Frequency of used subcarrier `q` (1-based), centred on the carrier.
    pub fn subcarrier_frequency(&self, q: usize) -> f64 {
        let offset = q as f64 - (self.used_subcarriers as f64 + 1.0) / 2.0;
        self.carrier_hz + offset * self.used_spacing_hz
    }

    pub fn subcarrier_frequencies(&self) -> Vec<f64> {
        (1..=self.used_subcarriers)
            .map(|q| self.subcarrier_frequency(q))
            .collect()
    }

    /// Duration of one illumination slot: CPI plus idle gap.
    pub fn slot_duration(&self) -> f64 {
        (self.symbols_per_cpi + self.idle_symbols) as f64 * self.symbol_duration()
    }
}

/// Rectangular planar array layout: `cols` elements along the horizontal axis,
/// `rows` along the vertical one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayLayout {
    pub cols: usize,
    pub rows: usize,
}

impl ArrayLayout {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayParams {
    pub tx: ArrayLayout,
    pub rx: ArrayLayout,
    pub ris: ArrayLayout,
}

impl Default for ArrayParams {
    fn default() -> Self {
        Self {
            tx: ArrayLayout { cols: 5, rows: 3 },
            rx: ArrayLayout { cols: 5, rows: 3 },
            ris: ArrayLayout { cols: 8, rows: 8 },
        }
    }
}

/// Positions (m) and boresight directions of every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryParams {
    pub bs_tx_position: [f64; 3],
    pub bs_rx_position: [f64; 3],
    pub bs_boresight: [f64; 3],
    pub ris_position: [f64; 3],
    pub ris_boresight: [f64; 3],
    pub user_min: [f64; 3],
    pub user_max: [f64; 3],
    pub user_boresight: [f64; 3],
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            bs_tx_position: [-1.5, 1.5, 25.0],
            bs_rx_position: [-1.5, 1.5, 25.0],
            bs_boresight: [0.0, -1.0, 0.0],
            ris_position: [0.0, 0.0, 25.0],
            ris_boresight: [0.0, 1.0, 0.0],
            user_min: [20.0, -40.0, 1.5],
            user_max: [40.0, -20.0, 2.0],
            user_boresight: [0.0, 1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub sensing_var_w: f64,
    pub comm_var_w: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            sensing_var_w: 1.918e-16,
            comm_var_w: 1.918e-16,
        }
    }
}

/// Inspected volume, relative to the RIS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeParams {
    pub range_m: [f64; 2],
    pub azimuth_deg: [f64; 2],
    pub elevation_deg: [f64; 2],
}

impl Default for VolumeParams {
    fn default() -> Self {
        Self {
            range_m: [10.0, 200.0],
            azimuth_deg: [-22.5, 22.5],
            elevation_deg: [5.0, 15.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    /// Nominal pointing directions as `[azimuth, elevation]` in degrees.
    pub pointing_deg: Vec<[f64; 2]>,
    pub delay_bins: usize,
    pub doppler_bins: usize,
    pub max_speed_mps: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            pointing_deg: vec![
                [-18.75, 10.0],
                [-11.25, 10.0],
                [-3.75, 10.0],
                [3.75, 10.0],
                [11.25, 10.0],
                [18.75, 10.0],
            ],
            delay_bins: 60,
            doppler_bins: 9,
            max_speed_mps: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    /// Target SNR at the reference placement with all power on sensing.
    pub nominal_snr_db: f64,
    /// Average number of plots per scan under H0 used to set the plot threshold.
    pub plots_per_scan: f64,
    pub pfa: f64,
    /// Radius of the sphere around the true target inside which a detection counts.
    pub gate_radius_m: f64,
    /// Relative slack added to the speed gate between plots.
    pub speed_gate_slack: f64,
    pub parabolic_range: bool,
    pub smoothing_degree: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            nominal_snr_db: 27.0,
            plots_per_scan: 6.0,
            pfa: 1e-2,
            gate_radius_m: 13.0,
            speed_gate_slack: 0.15,
            parabolic_range: true,
            smoothing_degree: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RisOptParams {
    pub phase_grid: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for RisOptParams {
    fn default() -> Self {
        Self {
            phase_grid: 256,
            tolerance: 1e-4,
            max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub n_scans: Vec<usize>,
    pub gammas: Vec<f64>,
    pub h1_trials: usize,
    /// H0 scans simulated to calibrate the plot threshold.
    pub plot_calibration_scans: usize,
    /// H0 super-trials per calibration of the TBD threshold; 0 means `50 / pfa`.
    pub tbd_calibration_trials: usize,
    pub seed: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            n_scans: vec![1, 5, 8, 12, 15],
            gammas: vec![0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
            h1_trials: 2000,
            plot_calibration_scans: 10_000,
            tbd_calibration_trials: 0,
            seed: 0x5eed_2024,
        }
    }
}

/// Every constant of a scenario instance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub ofdm: OfdmParams,
    pub arrays: ArrayParams,
    pub geometry: GeometryParams,
    pub noise: NoiseParams,
    pub volume: VolumeParams,
    pub grids: GridParams,
    pub detection: DetectionParams,
    pub ris_opt: RisOptParams,
    pub sweep: SweepParams,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be >= 1")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.ofdm;
        positive("ofdm.carrier_hz", o.carrier_hz)?;
        positive("ofdm.subcarrier_spacing_hz", o.subcarrier_spacing_hz)?;
        positive("ofdm.cyclic_prefix_s", o.cyclic_prefix_s)?;
        positive("ofdm.used_spacing_hz", o.used_spacing_hz)?;
        positive("ofdm.power_w", o.power_w)?;
        nonzero("ofdm.total_subcarriers", o.total_subcarriers)?;
        nonzero("ofdm.used_subcarriers", o.used_subcarriers)?;
        nonzero("ofdm.symbols_per_cpi", o.symbols_per_cpi)?;
        if o.used_subcarriers > o.total_subcarriers {
            return Err(invalid("used_subcarriers exceeds total_subcarriers"));
        }
        for (name, layout) in [
            ("arrays.tx", self.arrays.tx),
            ("arrays.rx", self.arrays.rx),
            ("arrays.ris", self.arrays.ris),
        ] {
            nonzero(&format!("{name}.cols"), layout.cols)?;
            nonzero(&format!("{name}.rows"), layout.rows)?;
        }
        positive("noise.sensing_var_w", self.noise.sensing_var_w)?;
        positive("noise.comm_var_w", self.noise.comm_var_w)?;

        let g = &self.geometry;
        for (name, b) in [
            ("bs_boresight", g.bs_boresight),
            ("ris_boresight", g.ris_boresight),
            ("user_boresight", g.user_boresight),
        ] {
            let horiz = (b[0] * b[0] + b[1] * b[1]).sqrt();
            if !(horiz > 1e-9) || b.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!(
                    "geometry.{name} must have a horizontal component"
                )));
            }
        }
        for k in 0..3 {
            if !(g.user_min[k] <= g.user_max[k]) {
                return Err(invalid("geometry.user_min must be <= user_max"));
            }
        }

        let v = &self.volume;
        positive("volume.range_m[0]", v.range_m[0])?;
        if !(v.range_m[0] < v.range_m[1]) {
            return Err(invalid("volume range must satisfy R_min < R_max"));
        }
        for (name, iv) in [("azimuth", v.azimuth_deg), ("elevation", v.elevation_deg)] {
            if !(iv[0] < iv[1]) || iv[0] <= -90.0 || iv[1] >= 90.0 {
                return Err(invalid(format!(
                    "volume.{name}_deg must be an increasing interval inside (-90, 90)"
                )));
            }
        }
        let cp_range = SPEED_OF_LIGHT * o.cyclic_prefix_s / 2.0;
        if cp_range < v.range_m[1] {
            return Err(invalid(format!(
                "cyclic prefix covers {cp_range:.1} m, less than R_max = {}",
                v.range_m[1]
            )));
        }

        let gr = &self.grids;
        if gr.pointing_deg.is_empty() {
            return Err(invalid("grids.pointing_deg must not be empty"));
        }
        for p in &gr.pointing_deg {
            let inside = p[0] >= v.azimuth_deg[0]
                && p[0] <= v.azimuth_deg[1]
                && p[1] >= v.elevation_deg[0]
                && p[1] <= v.elevation_deg[1];
            if !inside {
                return Err(invalid(format!(
                    "pointing direction {p:?} lies outside the inspected volume"
                )));
            }
        }
        nonzero("grids.delay_bins", gr.delay_bins)?;
        nonzero("grids.doppler_bins", gr.doppler_bins)?;
        positive("grids.max_speed_mps", gr.max_speed_mps)?;

        let d = &self.detection;
        positive("detection.plots_per_scan", d.plots_per_scan)?;
        if !(d.pfa > 0.0 && d.pfa < 1.0) {
            return Err(invalid("detection.pfa must lie in (0, 1)"));
        }
        positive("detection.gate_radius_m", d.gate_radius_m)?;
        if !(d.speed_gate_slack >= 0.0) {
            return Err(invalid("detection.speed_gate_slack must be >= 0"));
        }

        nonzero("ris_opt.phase_grid", self.ris_opt.phase_grid)?;
        nonzero("ris_opt.max_sweeps", self.ris_opt.max_sweeps)?;
        positive("ris_opt.tolerance", self.ris_opt.tolerance)?;

        let s = &self.sweep;
        if s.n_scans.is_empty() || s.n_scans.contains(&0) {
            return Err(invalid("sweep.n_scans must be a non-empty list of counts >= 1"));
        }
        if s.gammas.is_empty() || s.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(invalid("sweep.gammas must be a non-empty list inside [0, 1]"));
        }
        nonzero("sweep.h1_trials", s.h1_trials)?;
        nonzero("sweep.plot_calibration_scans", s.plot_calibration_scans)?;
        Ok(())
    }

    pub fn n_dir(&self) -> usize {
        self.grids.pointing_deg.len()
    }

    /// Illumination start time of direction `dir` in scan `scan` (both 0-based).
    pub fn illumination_time(&self, scan: usize, dir: usize) -> f64 {
        (scan * self.n_dir() + dir) as f64 * self.ofdm.slot_duration()
    }

    pub fn scan_period(&self) -> f64 {
        self.n_dir() as f64 * self.ofdm.slot_duration()
    }

    /// Number of H0 super-trials used to calibrate the TBD threshold at `pfa`.
    pub fn tbd_trials_for(&self, pfa: f64) -> usize {
        if self.sweep.tbd_calibration_trials > 0 {
            self.sweep.tbd_calibration_trials
        } else {
            (50.0 / pfa).ceil() as usize
        }
    }

    pub fn numerology(&self) -> Numerology {
        Numerology::from_ofdm(&self.ofdm)
    }
}

/// Sensing resolutions and ambiguities implied by the waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerology {
    pub range_resolution_m: f64,
    pub velocity_resolution_mps: f64,
    pub cp_limited_range_m: f64,
    pub unambiguous_range_m: f64,
    pub unambiguous_velocity_mps: f64,
}

impl Numerology {
    pub fn from_ofdm(o: &OfdmParams) -> Self {
        let c = SPEED_OF_LIGHT;
        let t_sym = o.symbol_duration();
        Self {
            range_resolution_m: c / (2.0 * o.used_subcarriers as f64 * o.used_spacing_hz),
            velocity_resolution_mps: c
                / (2.0 * o.symbols_per_cpi as f64 * t_sym * o.carrier_hz),
            cp_limited_range_m: c * o.cyclic_prefix_s / 2.0,
            unambiguous_range_m: c / (2.0 * o.used_spacing_hz),
            unambiguous_velocity_mps: c / (4.0 * t_sym * o.carrier_hz),
        }
    }

    /// Compares against the reference values of the default waveform; returns
    /// the largest relative deviation.
    pub fn max_relative_deviation_from_reference(&self) -> f64 {
        [
            (self.range_resolution_m, 6.5),
            (self.velocity_resolution_mps, 9.4),
            (self.cp_limited_range_m, 713.7),
            (self.unambiguous_range_m, 208.1),
            (self.unambiguous_velocity_mps, 299.7),
        ]
        .iter()
        .map(|(v, r)| ((v - r) / r).abs())
        .fold(0.0, f64::max)
    }
}

pub fn deg(v: f64) -> f64 {
    v * PI / 180.0
}
