//! User SINR and achievable spectral efficiency.

use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::OfdmParams;
use crate::error::Result;
use crate::scene::ChannelSet;
use crate::txwave::BeamformerSet;

/// The sensing stream is interference at the user.
pub fn user_sinr(q: usize, channels: &ChannelSet, beams: &BeamformerSet, gamma: f64, power: f64, noise_var: f64) -> f64 {
    let h = &channels.h_c[q];
    let signal = (1.0 - gamma) * h.dotc(&beams.comm[q]).norm_sqr();
    let interference = gamma * h.dotc(&beams.sensing[q]).norm_sqr();
    signal / (interference + noise_var / power)
}

/// Bits per second per hertz, normalized by `T_sym N_sub W_o`.
pub fn spectral_efficiency(sinr: &[f64], ofdm: &OfdmParams) -> f64 {
    let bits: f64 = sinr.iter().map(|s| (1.0 + s).log2()).sum();
    bits / (ofdm.symbol_duration() * sinr.len() as f64 * ofdm.subcarrier_spacing_hz)
}

pub const PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

/// Percentile with linear interpolation between order statistics
/// (position `p/100 (n-1)` in the sorted sample).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn percentiles(values: &[f64], ps: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    ps.iter().map(|&p| percentile(&v, p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommReport {
    pub sinr: Vec<f64>,
    pub se: f64,
    pub gamma: Vec<f64>,
    pub user_position: Vector3<f64>,
}

pub fn comm_report(
    channels: &ChannelSet,
    beams: &BeamformerSet,
    gamma: &[f64],
    ofdm: &OfdmParams,
    noise_var: f64,
) -> CommReport {
    let sinr: Vec<f64> = (0..channels.n_sub())
        .map(|q| user_sinr(q, channels, beams, gamma[q], ofdm.power_w, noise_var))
        .collect();
    CommReport {
        se: spectral_efficiency(&sinr, ofdm),
        sinr,
        gamma: gamma.to_vec(),
        user_position: channels.user_position,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SePercentileRow {
    pub gamma: f64,
    pub percentile: String,
    pub se: f64,
}

/// One row per `(gamma, percentile)`; `se[g]` holds the SE samples for `gammas[g]`.
pub fn se_percentile_rows(gammas: &[f64], se: &[Vec<f64>]) -> Vec<SePercentileRow> {
    gammas
        .iter()
        .zip(se)
        .flat_map(|(&g, samples)| {
            percentiles(samples, &PERCENTILES)
                .into_iter()
                .zip(PERCENTILES)
                .map(move |(v, p)| SePercentileRow {
                    gamma: g,
                    percentile: format!("p{p:.0}"),
                    se: v,
                })
        })
        .collect()
}

pub fn write_se_csv<W: Write>(w: W, rows: &[SePercentileRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::scene::build_channels;
    use crate::txwave::matched_beamformers;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn setup() -> (ScenarioConfig, ChannelSet, BeamformerSet) {
        let c = ScenarioConfig::default();
        let ch = build_channels(&c, Vector3::new(40.0, -20.0, 1.8)).unwrap();
        let b = matched_beamformers(&ch).unwrap();
        (c, ch, b)
    }

    #[test]
    fn sinr_endpoints_and_monotonicity() {
        let (c, ch, b) = setup();
        let (p, s2) = (c.ofdm.power_w, c.noise.comm_var_w);
        for q in [0, 13, 31] {
            let g2 = ch.h_c[q].dotc(&b.comm[q]).norm_sqr();
            assert_relative_eq!(user_sinr(q, &ch, &b, 0.0, p, s2), p * g2 / s2, max_relative = 1e-12);
            assert_eq!(user_sinr(q, &ch, &b, 1.0, p, s2), 0.0);
            assert!(ch.h_c[q].dotc(&b.sensing[q]).norm() > 0.0);
            let vals: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
                .iter()
                .map(|&g| user_sinr(q, &ch, &b, g, p, s2))
                .collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn se_closed_forms() {
        let c = ScenarioConfig::default();
        assert_eq!(spectral_efficiency(&[0.0; 32], &c.ofdm), 0.0);
        let se = spectral_efficiency(&[1.0; 32], &c.ofdm);
        let expect = 1.0 / ((1.0 / 15e3 + 4.7623e-6) * 15e3);
        assert_relative_eq!(se, expect, max_relative = 1e-4);
        assert!((se - 0.9333).abs() < 1e-3);
    }

    #[test]
    fn se_is_phase_invariant_and_non_increasing() {
        let (c, ch, b) = setup();
        let mut rotated = ch.clone();
        for h in &mut rotated.h_c {
            *h *= Complex64::from_polar(1.0, 0.77);
        }
        let mut prev = f64::INFINITY;
        for g in [0.0, 0.1, 0.4, 0.8, 1.0] {
            let gv = vec![g; 32];
            let a = comm_report(&ch, &b, &gv, &c.ofdm, c.noise.comm_var_w).se;
            let r = comm_report(&rotated, &b, &gv, &c.ofdm, c.noise.comm_var_w).se;
            assert_relative_eq!(a, r, max_relative = 1e-12);
            assert!(a <= prev);
            prev = a;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn percentile_interpolation() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentiles(&v, &[0.0, 50.0, 100.0]), vec![1.0, 3.0, 5.0]);
        assert_relative_eq!(percentiles(&v, &[5.0])[0], 1.2);
        assert_relative_eq!(percentiles(&v, &[95.0])[0], 4.8);
        let rows = se_percentile_rows(&[0.0, 0.5], &[v.to_vec(), v.to_vec()]);
        assert_eq!(rows.len(), 10);
        assert_eq!(rows[2].percentile, "p50");
    }
}
