//! Monte Carlo simulator of a base station that senses through a
//! reconfigurable intelligent surface (RIS) while serving one downlink user,
//! with multi-frame track-before-detect (TBD) on the radar side.
//!
//! Pipeline per scan: [`scene`] builds the wideband channels, [`txwave`]
//! forms the communication and sensing beams, [`ris_opt`] picks the RIS
//! phases for each pointing direction, [`radar_rx`] turns echoes into a
//! range-Doppler statistic cube, [`detector`] thresholds it into plots and
//! [`tbd`] integrates plots over several scans. [`comms`] scores the user
//! link and [`harness`] calibrates thresholds and runs the sweeps.
//!
//! Examples (`cargo run --release --example <name>`):
//!
//! - `channels`: link budgets and beamformer gains
//! - `ris_beampattern`: optimized versus random RIS profiles
//! - `radar_cube`: one scan with a target, written to `cube.bin`
//! - `plot_extraction`: plot threshold and the plot list of one scan
//! - `track_before_detect`: trajectory search on a synthetic plot sequence
//! - `spectral_efficiency`: user SE against the sensing power fraction
//! - `calibration`: thresholds and target RCS, written to `calibration.json`
//! - `tradeoff_sweep`: a small detection/communication trade-off grid

pub mod comms;
pub mod config;
pub mod detector;
pub mod error;
pub mod harness;
pub mod radar_rx;
pub mod ris_opt;
pub mod rng;
pub mod scene;
pub mod tbd;
pub mod txwave;
