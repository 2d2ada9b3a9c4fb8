//! Radar echo synthesis, correlator bank and per-scan statistic cube.
//!
//! Every correlator has the form
//! `u_q(n) = e^{-j2pi q W tau} e^{-j2pi nu n T} a_q(theta) b_q(n)/|b_q(n)|`,
//! where `a_q` is the unit-norm receive-side vector `G_rx diag(w) t_q` and
//! `b_q(n) = t_q^T diag(w) G_tx p_q(n)`. The statistic therefore factors as a
//! delay/Doppler transform of the per-sample projections
//! `z_q(n) = a_q^H y_q(n) conj(b_q(n))/|b_q(n)|`, which is what
//! [`CorrelatorBank`] computes.
//!
//! [`CorrelatorBank::simulate_cpi`] draws `z_q(n)` directly: since `a_q` has
//! unit norm and `b_q(n)/|b_q(n)|` unit modulus, the projected noise is
//! exactly `CN(0, sigma^2)` and independent across samples, so the projected
//! simulation has the same law as synthesizing the full `D_rx`-dimensional
//! measurement and projecting it.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;

use crate::config::{OfdmParams, ScenarioConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::ris_opt::{beampattern, RisProfile};
use crate::rng::complex_normal;
use crate::scene::{element_gain, steering_from_offsets, Angles, CVector, ChannelSet, PlanarArray};
use crate::txwave::BeamformerSet;

/// The `G_dir x G_del x G_dop` search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub pointing: Vec<Angles>,
    /// Delay of each bin (s).
    pub delays: Vec<f64>,
    /// Range of each delay bin (m).
    pub ranges: Vec<f64>,
    /// Doppler of each bin (Hz).
    pub dopplers: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

impl SearchGrid {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let pointing = config
            .grids
            .pointing_deg
            .iter()
            .map(|p| Angles::from_degrees(p[0], p[1]))
            .collect();
        let [r0, r1] = config.volume.range_m;
        let ranges = linspace(r0, r1, config.grids.delay_bins);
        let delays = ranges.iter().map(|r| 2.0 * r / SPEED_OF_LIGHT).collect();
        let nu_max = 2.0 * config.grids.max_speed_mps * config.ofdm.carrier_hz / SPEED_OF_LIGHT;
        let dopplers = if config.grids.doppler_bins == 1 {
            vec![0.0]
        } else {
            linspace(-nu_max, nu_max, config.grids.doppler_bins)
        };
        Self {
            pointing,
            delays,
            ranges,
            dopplers,
        }
    }

    pub fn n_dir(&self) -> usize {
        self.pointing.len()
    }

    pub fn n_del(&self) -> usize {
        self.delays.len()
    }

    pub fn n_dop(&self) -> usize {
        self.dopplers.len()
    }

    pub fn range_step(&self) -> f64 {
        if self.ranges.len() > 1 {
            self.ranges[1] - self.ranges[0]
        } else {
            0.0
        }
    }
}

/// Kinematic state of the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

/// Target parameters as seen from the RIS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetGeometry {
    pub range: f64,
    pub angles: Angles,
    pub delay: f64,
    pub doppler: f64,
}

impl TargetState {
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.position + self.velocity * t
    }

    /// Delay, Doppler and angles of the target at time `t` relative to `ris`.
    pub fn geometry(&self, ris: &PlanarArray, carrier_hz: f64, t: f64) -> TargetGeometry {
        let rel = self.at(t) - ris.center();
        let range = rel.norm();
        let radial_speed = self.velocity.dot(&rel) / range;
        TargetGeometry {
            range,
            angles: ris.local_angles(&rel),
            delay: 2.0 * range / SPEED_OF_LIGHT,
            doppler: 2.0 * radial_speed * carrier_hz / SPEED_OF_LIGHT,
        }
    }
}

/// `E|alpha|^2` from the radar equation.
pub fn amplitude_variance(sigma_rcs: f64, angles: Angles, range: f64, carrier_hz: f64) -> Result<f64> {
    let g = element_gain(angles)?;
    Ok(sigma_rcs * g * g * SPEED_OF_LIGHT.powi(2)
        / ((4.0 * PI).powi(3) * range.powi(4) * carrier_hz * carrier_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RcsCalibration {
    pub sigma_rcs: f64,
    pub reference_direction: usize,
    pub reference_range: f64,
    pub reference_angles: Angles,
    pub beampattern: f64,
    pub alpha_variance: f64,
}

impl RcsCalibration {
    /// Target SNR (linear) at the reference for the given beampattern.
    pub fn snr(&self, config: &ScenarioConfig, beampattern: f64) -> f64 {
        config.ofdm.symbols_per_cpi as f64 * config.ofdm.power_w * beampattern * self.alpha_variance
            / config.noise.sensing_var_w
    }
}

/// Index of the pointing direction closest to the centre of the volume
/// (lowest index on ties).
pub fn central_direction(config: &ScenarioConfig) -> usize {
    let v = &config.volume;
    let az = 0.5 * (v.azimuth_deg[0] + v.azimuth_deg[1]);
    let el = 0.5 * (v.elevation_deg[0] + v.elevation_deg[1]);
    let mut best = (0, f64::INFINITY);
    for (i, p) in config.grids.pointing_deg.iter().enumerate() {
        let d = (p[0] - az).hypot(p[1] - el);
        if d < best.1 - 1e-12 {
            best = (i, d);
        }
    }
    best.0
}

/// Picks the RCS that yields the nominal SNR for a target at mid-range on
/// the boresight of the central pointing direction, with all power on
/// sensing. `profiles` must be optimized for `gamma = 1`.
pub fn calibrate_rcs(
    config: &ScenarioConfig,
    channels: &ChannelSet,
    beams: &BeamformerSet,
    profiles: &[RisProfile],
) -> Result<RcsCalibration> {
    let reference_direction = central_direction(config);
    let angles = Angles::from_degrees(
        config.grids.pointing_deg[reference_direction][0],
        config.grids.pointing_deg[reference_direction][1],
    );
    let range = 0.5 * (config.volume.range_m[0] + config.volume.range_m[1]);
    let gamma = vec![1.0; channels.n_sub()];
    let bp = beampattern(&profiles[reference_direction].weights(), angles, channels, beams, &gamma);
    if !(bp > 0.0) {
        return Err(Error::Calibration("zero beampattern at the RCS reference".into()));
    }
    let snr = 10f64.powf(config.detection.nominal_snr_db / 10.0);
    let alpha_variance = config.noise.sensing_var_w * snr
        / (config.ofdm.symbols_per_cpi as f64 * config.ofdm.power_w * bp);
    let unit = amplitude_variance(1.0, angles, range, config.ofdm.carrier_hz)?;
    Ok(RcsCalibration {
        sigma_rcs: alpha_variance / unit,
        reference_direction,
        reference_range: range,
        reference_angles: angles,
        beampattern: bp,
        alpha_variance,
    })
}

/// Echo parameters of the target during one CPI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoTarget {
    pub alpha: Complex64,
    pub delay: f64,
    pub doppler: f64,
    pub angles: Angles,
}

/// Received radar signal `y[q][n]` for one CPI. `target = None` is H0.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_rx<R: Rng + ?Sized>(
    target: Option<&EchoTarget>,
    p: &[Vec<CVector>],
    omega: &CVector,
    channels: &ChannelSet,
    ofdm: &OfdmParams,
    noise_var: f64,
    rng: &mut R,
) -> Vec<Vec<CVector>> {
    let d_rx = channels.g_rx(0).nrows();
    let sigma = noise_var.sqrt();
    let t_sym = ofdm.symbol_duration();
    let offsets = target.map(|tg| channels.ris().path_offsets(tg.angles));
    p.iter()
        .enumerate()
        .map(|(qi, pq)| {
            let q = (qi + 1) as f64;
            let cascade = target.zip(offsets.as_ref()).map(|(tg, off)| {
                let t = steering_from_offsets(off, channels.freqs()[qi]);
                let wt = omega.component_mul(&t);
                let rx = channels.g_rx(qi) * &wt;
                let tx_row = channels.g_tx(qi).transpose() * &wt;
                let delay = Complex64::from_polar(1.0, -2.0 * PI * q * ofdm.used_spacing_hz * tg.delay);
                (rx * (tg.alpha * delay), tx_row, tg.doppler)
            });
            pq.iter()
                .enumerate()
                .map(|(ni, pn)| {
                    let mut y = CVector::from_fn(d_rx, |_, _| complex_normal(rng) * sigma);
                    if let Some((rx, tx_row, nu)) = &cascade {
                        let n = (ni + 1) as f64;
                        let dop = Complex64::from_polar(1.0, -2.0 * PI * nu * n * t_sym);
                        let s = tx_row.dot(pn) * dop;
                        y += rx * s;
                    }
                    y
                })
                .collect()
        })
        .collect()
}

/// The correlator `u_q(n; theta, tau, nu)`, or `None` when the transmit-side
/// scalar vanishes. `q` and `n` are 0-based indices.
#[allow(clippy::too_many_arguments)]
pub fn correlator(
    theta: Angles,
    tau: f64,
    nu: f64,
    q: usize,
    n: usize,
    omega: &CVector,
    channels: &ChannelSet,
    p: &[Vec<CVector>],
    ofdm: &OfdmParams,
) -> Option<CVector> {
    let t = channels.ris_steering(theta, q);
    let wt = omega.component_mul(&t);
    let rx = channels.g_rx(q) * &wt;
    let rx_norm = rx.norm();
    let b = (channels.g_tx(q).transpose() * &wt).dot(&p[q][n]);
    if !(rx_norm > 0.0) || !(b.norm() > 0.0) {
        return None;
    }
    let ramp = Complex64::from_polar(
        1.0,
        -2.0 * PI * ((q + 1) as f64 * ofdm.used_spacing_hz * tau + nu * (n + 1) as f64 * ofdm.symbol_duration()),
    );
    Some(rx * (ramp * (b / b.norm()) / rx_norm))
}

/// Per-direction precomputations.
#[derive(Debug, Clone)]
struct DirectionBank {
    /// Unit-norm receive vectors `a_q`.
    rx_unit: Vec<CVector>,
    /// `diag(w) G_tx^T`-side row: `b_q(n) = tx_row_q . p_q(n)`.
    tx_row: Vec<CVector>,
    /// `a_q^H G_rx diag(w)`, so a target at angle `phi` projects to `rx_proj . t_q(phi)`.
    rx_proj: Vec<CVector>,
    /// `diag(w) G_tx f_c` and `diag(w) G_tx f_s`.
    ris_comm: Vec<CVector>,
    ris_sens: Vec<CVector>,
    /// `tx_row_q . f_c` and `tx_row_q . f_s`.
    b_comm: Vec<Complex64>,
    b_sens: Vec<Complex64>,
}

/// Delay/Doppler transform of projected samples into one cube slice. It
/// depends only on the waveform and the grid.
#[derive(Debug, Clone)]
pub struct DelayDopplerTransform {
    n_sub: usize,
    n_sym: usize,
    n_del: usize,
    n_dop: usize,
    /// `e^{+j2pi q W tau_j}`, `[j][q]`.
    delay_phase: Vec<Complex64>,
    /// `e^{+j2pi nu_d n T}`, `[d][n]`.
    doppler_phase: Vec<Complex64>,
}

impl DelayDopplerTransform {
    pub fn new(ofdm: &OfdmParams, grid: &SearchGrid) -> Self {
        let (n_sub, n_sym) = (ofdm.used_subcarriers, ofdm.symbols_per_cpi);
        let w = ofdm.used_spacing_hz;
        let t_sym = ofdm.symbol_duration();
        let delay_phase = grid
            .delays
            .iter()
            .flat_map(|&tau| {
                (1..=n_sub).map(move |q| Complex64::from_polar(1.0, 2.0 * PI * q as f64 * w * tau))
            })
            .collect();
        let doppler_phase = grid
            .dopplers
            .iter()
            .flat_map(|&nu| {
                (1..=n_sym).map(move |n| Complex64::from_polar(1.0, 2.0 * PI * nu * n as f64 * t_sym))
            })
            .collect();
        Self {
            n_sub,
            n_sym,
            n_del: grid.n_del(),
            n_dop: grid.n_dop(),
            delay_phase,
            doppler_phase,
        }
    }

    pub fn samples_per_cpi(&self) -> usize {
        self.n_sub * self.n_sym
    }

    /// Writes `|sum u^H y|^2 / sigma^2` for every `(delay, Doppler)` bin of
    /// projected samples `z[q*n_sym+n]` into `out[j*n_dop+d]`.
    pub fn apply(&self, z: &[Complex64], noise_var: f64, out: &mut [f64]) {
        let (n_sub, n_sym, n_dop) = (self.n_sub, self.n_sym, self.n_dop);
        let mut zd = vec![Complex64::default(); n_sub * n_dop];
        for q in 0..n_sub {
            let row = &z[q * n_sym..(q + 1) * n_sym];
            for d in 0..n_dop {
                let ph = &self.doppler_phase[d * n_sym..(d + 1) * n_sym];
                zd[d * n_sub + q] = row.iter().zip(ph).map(|(a, b)| a * b).sum();
            }
        }
        for j in 0..self.n_del {
            let ph = &self.delay_phase[j * n_sub..(j + 1) * n_sub];
            for d in 0..n_dop {
                let col = &zd[d * n_sub..(d + 1) * n_sub];
                let acc: Complex64 = col.iter().zip(ph).map(|(a, b)| a * b).sum();
                out[j * n_dop + d] = acc.norm_sqr() / noise_var;
            }
        }
    }
}

/// Correlator bank over the full search grid for one set of RIS profiles.
#[derive(Debug, Clone)]
pub struct CorrelatorBank {
    grid: SearchGrid,
    dirs: Vec<DirectionBank>,
    ris: PlanarArray,
    freqs: Vec<f64>,
    n_sub: usize,
    n_sym: usize,
    transform: DelayDopplerTransform,
}

/// Measurements and transmit vectors of one illumination.
#[derive(Debug, Clone)]
pub struct Cpi {
    pub y: Vec<Vec<CVector>>,
    pub p: Vec<Vec<CVector>>,
}

impl CorrelatorBank {
    /// `profiles[i]` is the RIS response used while illuminating direction `i`.
    pub fn new(
        config: &ScenarioConfig,
        grid: &SearchGrid,
        channels: &ChannelSet,
        beams: &BeamformerSet,
        profiles: &[RisProfile],
    ) -> Self {
        let n_sub = channels.n_sub();
        let n_sym = config.ofdm.symbols_per_cpi;
        let dirs = grid
            .pointing
            .iter()
            .zip(profiles)
            .map(|(&theta, prof)| {
                let omega = prof.weights();
                let offsets = channels.ris().path_offsets(theta);
                let mut bank = DirectionBank {
                    rx_unit: Vec::with_capacity(n_sub),
                    tx_row: Vec::with_capacity(n_sub),
                    rx_proj: Vec::with_capacity(n_sub),
                    ris_comm: Vec::with_capacity(n_sub),
                    ris_sens: Vec::with_capacity(n_sub),
                    b_comm: Vec::with_capacity(n_sub),
                    b_sens: Vec::with_capacity(n_sub),
                };
                for q in 0..n_sub {
                    let t = steering_from_offsets(&offsets, channels.freqs()[q]);
                    let wt = omega.component_mul(&t);
                    let rx = channels.g_rx(q) * &wt;
                    let norm = rx.norm();
                    let a = if norm > 0.0 { rx / Complex64::from(norm) } else { rx };
                    let tx_row = channels.g_tx(q).transpose() * &wt;
                    let mut g_rx_w = channels.g_rx(q).clone();
                    for (m, &w) in omega.iter().enumerate() {
                        g_rx_w.column_mut(m).apply(|z| *z *= w);
                    }
                    let rx_proj = g_rx_w.tr_mul(&a.map(|z| z.conj()));
                    let gf_c = channels.g_tx(q) * &beams.comm[q];
                    let gf_s = channels.g_tx(q) * &beams.sensing[q];
                    bank.b_comm.push(tx_row.dot(&beams.comm[q]));
                    bank.b_sens.push(tx_row.dot(&beams.sensing[q]));
                    bank.ris_comm.push(omega.component_mul(&gf_c));
                    bank.ris_sens.push(omega.component_mul(&gf_s));
                    bank.rx_unit.push(a);
                    bank.tx_row.push(tx_row);
                    bank.rx_proj.push(rx_proj);
                }
                bank
            })
            .collect();
        Self {
            grid: grid.clone(),
            dirs,
            ris: channels.ris().clone(),
            freqs: channels.freqs().to_vec(),
            n_sub,
            n_sym,
            transform: DelayDopplerTransform::new(&config.ofdm, grid),
        }
    }

    pub fn transform(&self) -> &DelayDopplerTransform {
        &self.transform
    }

    pub fn grid(&self) -> &SearchGrid {
        &self.grid
    }

    pub fn samples_per_cpi(&self) -> usize {
        self.n_sub * self.n_sym
    }

    /// Projects one measured CPI onto direction `dir`; returns `z[q*n_sym+n]`
    /// and the number of samples skipped because `b_q(n) = 0`.
    pub fn project(&self, dir: usize, cpi: &Cpi) -> (Vec<Complex64>, usize) {
        let bank = &self.dirs[dir];
        let mut z = vec![Complex64::default(); self.samples_per_cpi()];
        let mut skipped = 0;
        for q in 0..self.n_sub {
            let a = &bank.rx_unit[q];
            for n in 0..self.n_sym {
                let b = bank.tx_row[q].dot(&cpi.p[q][n]);
                let mag = b.norm();
                if !(mag > 0.0) || a.norm_squared() == 0.0 {
                    skipped += 1;
                    continue;
                }
                z[q * self.n_sym + n] = a.dotc(&cpi.y[q][n]) * (b.conj() / mag);
            }
        }
        (z, skipped)
    }

    pub fn slice_from_projection(&self, z: &[Complex64], noise_var: f64, out: &mut [f64]) {
        self.transform.apply(z, noise_var, out);
    }

    /// Statistic cube from full measurements, one [`Cpi`] per direction.
    pub fn statistic_cube(&self, cpis: &[Cpi], noise_var: f64, scan_index: usize, timestamps: Vec<f64>) -> ScanCube {
        let mut cube = ScanCube::zeros(&self.grid, scan_index, timestamps);
        for (i, cpi) in cpis.iter().enumerate() {
            let (z, _) = self.project(i, cpi);
            self.slice_from_projection(&z, noise_var, cube.slice_mut(i));
        }
        cube
    }

    /// Draws projected samples of one CPI for direction `dir` without forming
    /// the full measurement. Draw order is fixed: for each `(q, n)`, the
    /// communication symbol, the sensing symbol, then the noise sample.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate_cpi<R: Rng + ?Sized>(
        &self,
        dir: usize,
        target: Option<&EchoTarget>,
        gamma: &[f64],
        ofdm: &OfdmParams,
        noise_var: f64,
        rng: &mut R,
        z: &mut [Complex64],
    ) {
        let sigma = noise_var.sqrt();
        let Some(tg) = target else {
            for v in z.iter_mut() {
                *v = complex_normal(rng) * sigma;
            }
            return;
        };
        let bank = &self.dirs[dir];
        let amp = ofdm.power_w.sqrt();
        let t_sym = ofdm.symbol_duration();
        let offsets = self.ris.path_offsets(tg.angles);
        let dop: Vec<Complex64> = (1..=self.n_sym)
            .map(|n| Complex64::from_polar(1.0, -2.0 * PI * tg.doppler * n as f64 * t_sym))
            .collect();
        for q in 0..self.n_sub {
            let t = steering_from_offsets(&offsets, self.freqs[q]);
            let r = bank.rx_proj[q].dot(&t);
            let wc = t.dot(&bank.ris_comm[q]);
            let ws = t.dot(&bank.ris_sens[q]);
            let delay = Complex64::from_polar(
                1.0,
                -2.0 * PI * (q + 1) as f64 * ofdm.used_spacing_hz * tg.delay,
            );
            let gain = tg.alpha * delay * r * amp;
            let (ac, as_) = ((1.0 - gamma[q]).max(0.0).sqrt(), gamma[q].max(0.0).sqrt());
            let (bc, bs) = (bank.b_comm[q], bank.b_sens[q]);
            for n in 0..self.n_sym {
                let xc = complex_normal(rng) * ac;
                let xs = complex_normal(rng) * as_;
                let noise = complex_normal(rng) * sigma;
                let b = bc * xc + bs * xs;
                let mag = b.norm();
                z[q * self.n_sym + n] = if mag > 0.0 {
                    gain * dop[n] * (wc * xc + ws * xs) * (b.conj() / mag) + noise
                } else {
                    Complex64::default()
                };
            }
        }
    }
}

/// `N_dir x N_del x N_dop` array of statistics for one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCube {
    pub n_dir: usize,
    pub n_del: usize,
    pub n_dop: usize,
    pub scan_index: usize,
    /// Illumination start time of each direction (s).
    pub timestamps: Vec<f64>,
    values: Vec<f64>,
}

impl ScanCube {
    pub fn zeros(grid: &SearchGrid, scan_index: usize, timestamps: Vec<f64>) -> Self {
        Self::from_values(
            grid.n_dir(),
            grid.n_del(),
            grid.n_dop(),
            scan_index,
            timestamps,
            vec![0.0; grid.n_dir() * grid.n_del() * grid.n_dop()],
        )
    }

    pub fn from_values(
        n_dir: usize,
        n_del: usize,
        n_dop: usize,
        scan_index: usize,
        timestamps: Vec<f64>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(values.len(), n_dir * n_del * n_dop);
        assert_eq!(timestamps.len(), n_dir);
        Self {
            n_dir,
            n_del,
            n_dop,
            scan_index,
            timestamps,
            values,
        }
    }

    #[inline]
    pub fn get(&self, dir: usize, del: usize, dop: usize) -> f64 {
        self.values[(dir * self.n_del + del) * self.n_dop + dop]
    }

    pub fn set(&mut self, dir: usize, del: usize, dop: usize, v: f64) {
        self.values[(dir * self.n_del + del) * self.n_dop + dop] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, dir: usize) -> &[f64] {
        let len = self.n_del * self.n_dop;
        &self.values[dir * len..(dir + 1) * len]
    }

    pub fn slice_mut(&mut self, dir: usize) -> &mut [f64] {
        let len = self.n_del * self.n_dop;
        &mut self.values[dir * len..(dir + 1) * len]
    }

    /// `(dir, del, dop)` of the largest entry.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
        (k / (self.n_del * self.n_dop), (k / self.n_dop) % self.n_del, k % self.n_dop)
    }
}

const CUBE_MAGIC: &[u8; 8] = b"RISCUBE1";

fn put_f64s<W: Write>(w: &mut W, vals: &[f64]) -> std::io::Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

/// Binary cube dump, all fields little-endian:
///
/// ```text
/// magic "RISCUBE1" | n_dir u64 | n_del u64 | n_dop u64 | scan_index u64
/// pointing (az, el) f64 x 2 n_dir | delays f64 x n_del | dopplers f64 x n_dop
/// timestamps f64 x n_dir | statistics f64 x (n_dir n_del n_dop), row-major
/// ```
pub fn write_cube<W: Write>(w: &mut W, cube: &ScanCube, grid: &SearchGrid) -> Result<()> {
    w.write_all(CUBE_MAGIC)?;
    for v in [cube.n_dir, cube.n_del, cube.n_dop, cube.scan_index] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    let pointing: Vec<f64> = grid.pointing.iter().flat_map(|a| [a.azimuth, a.elevation]).collect();
    put_f64s(w, &pointing)?;
    put_f64s(w, &grid.delays)?;
    put_f64s(w, &grid.dopplers)?;
    put_f64s(w, &cube.timestamps)?;
    put_f64s(w, &cube.values)?;
    Ok(())
}

pub fn read_cube<R: Read>(r: &mut R) -> Result<(ScanCube, SearchGrid)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CUBE_MAGIC {
        return Err(Error::Format("not a cube dump".into()));
    }
    let n_dir = get_u64(r)? as usize;
    let n_del = get_u64(r)? as usize;
    let n_dop = get_u64(r)? as usize;
    let scan_index = get_u64(r)? as usize;
    if n_dir.saturating_mul(n_del).saturating_mul(n_dop) > 1 << 32 {
        return Err(Error::Format("cube dimensions too large".into()));
    }
    let pointing = get_f64s(r, 2 * n_dir)?
        .chunks(2)
        .map(|c| Angles::new(c[0], c[1]))
        .collect();
    let delays = get_f64s(r, n_del)?;
    let dopplers = get_f64s(r, n_dop)?;
    let timestamps = get_f64s(r, n_dir)?;
    let values = get_f64s(r, n_dir * n_del * n_dop)?;
    let ranges = delays.iter().map(|t| t * SPEED_OF_LIGHT / 2.0).collect();
    Ok((
        ScanCube::from_values(n_dir, n_del, n_dop, scan_index, timestamps, values),
        SearchGrid {
            pointing,
            delays,
            ranges,
            dopplers,
        },
    ))
}
