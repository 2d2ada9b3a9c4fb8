//! Multi-peak plot extraction and the H0-calibrated plot threshold.

use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar_rx::{ScanCube, SearchGrid};
use crate::scene::Angles;

/// One detected peak: statistic, position of the peak and illumination time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    pub statistic: f64,
    #[serde(rename = "range_m")]
    pub range: f64,
    #[serde(rename = "az_rad")]
    pub azimuth: f64,
    #[serde(rename = "el_rad")]
    pub elevation: f64,
    #[serde(rename = "time_s")]
    pub time: f64,
}

impl Plot {
    pub fn angles(&self) -> Angles {
        Angles::new(self.azimuth, self.elevation)
    }

    /// Position in the RIS frame: (horizontal, vertical, boresight) components.
    pub fn local_position(&self) -> Vector3<f64> {
        self.angles().local_unit() * self.range
    }
}

/// Plots of one scan, sorted by descending statistic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotList {
    pub scan_index: usize,
    pub plots: Vec<Plot>,
}

impl PlotList {
    pub fn len(&self) -> usize {
        self.plots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plots.is_empty()
    }
}

/// A surviving local maximum of a cube slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub dir: usize,
    pub del: usize,
    pub dop: usize,
    pub value: f64,
}

fn is_strict_local_max(cube: &ScanCube, i: usize, j: usize, d: usize) -> bool {
    let v = cube.get(i, j, d);
    let j0 = j.saturating_sub(1);
    let j1 = (j + 1).min(cube.n_del - 1);
    let d0 = d.saturating_sub(1);
    let d1 = (d + 1).min(cube.n_dop - 1);
    for jj in j0..=j1 {
        for dd in d0..=d1 {
            if (jj, dd) != (j, d) && cube.get(i, jj, dd) >= v {
                return false;
            }
        }
    }
    true
}

/// Strict 8-connected local maxima with value `>= threshold`, at most one per
/// `(direction, delay)` cell (the larger; the lower Doppler index on ties).
pub fn find_peaks(cube: &ScanCube, threshold: f64) -> Vec<Peak> {
    let mut out = Vec::new();
    for i in 0..cube.n_dir {
        for j in 0..cube.n_del {
            let mut best: Option<Peak> = None;
            for d in 0..cube.n_dop {
                let v = cube.get(i, j, d);
                if v < threshold || !is_strict_local_max(cube, i, j, d) {
                    continue;
                }
                if best.is_none_or(|b| v > b.value) {
                    best = Some(Peak { dir: i, del: j, dop: d, value: v });
                }
            }
            out.extend(best);
        }
    }
    out
}

fn interpolated_range(cube: &ScanCube, grid: &SearchGrid, p: &Peak) -> f64 {
    let r = grid.ranges[p.del];
    if p.del == 0 || p.del + 1 == cube.n_del {
        return r;
    }
    let a = cube.get(p.dir, p.del - 1, p.dop);
    let b = p.value;
    let c = cube.get(p.dir, p.del + 1, p.dop);
    let den = a - 2.0 * b + c;
    if !(den < 0.0) {
        return r;
    }
    let delta = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
    let lo = grid.ranges[0];
    let hi = grid.ranges[grid.ranges.len() - 1];
    (r + delta * grid.range_step()).clamp(lo, hi)
}

/// Turns every peak of `cube` at or above `threshold` into a plot.
pub fn extract_plots(cube: &ScanCube, grid: &SearchGrid, threshold: f64, parabolic: bool) -> PlotList {
    let mut peaks = find_peaks(cube, threshold);
    peaks.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.dir.cmp(&b.dir))
            .then(a.del.cmp(&b.del))
    });
    let plots = peaks
        .iter()
        .map(|p| {
            let th = grid.pointing[p.dir];
            Plot {
                statistic: p.value,
                range: if parabolic {
                    interpolated_range(cube, grid, p)
                } else {
                    grid.ranges[p.del]
                },
                azimuth: th.azimuth,
                elevation: th.elevation,
                time: cube.timestamps[p.dir],
            }
        })
        .collect();
    PlotList {
        scan_index: cube.scan_index,
        plots,
    }
}

/// Initial threshold guess from the per-bin exponential tail.
pub fn threshold_seed(n_sub: usize, n_sym: usize, bins_per_dir: usize, n_dir: usize, target_rate: f64) -> f64 {
    (n_sub * n_sym) as f64 * ((bins_per_dir * n_dir) as f64 / target_rate).ln()
}

/// Peak values pooled over H0 scans, used to calibrate the plot threshold.
#[derive(Debug, Clone)]
pub struct PeakPool {
    floor: f64,
    n_scans: usize,
    /// `(value, scan)` sorted by descending value once frozen.
    peaks: Vec<(f64, u32)>,
    sorted: bool,
}

impl PeakPool {
    /// Peaks below `floor` are discarded.
    pub fn new(floor: f64) -> Self {
        Self {
            floor,
            n_scans: 0,
            peaks: Vec::new(),
            sorted: true,
        }
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn n_scans(&self) -> usize {
        self.n_scans
    }

    pub fn add_cube(&mut self, cube: &ScanCube) {
        let scan = self.n_scans as u32;
        self.peaks
            .extend(find_peaks(cube, self.floor).into_iter().map(|p| (p.value, scan)));
        self.n_scans += 1;
        self.sorted = false;
    }

    /// Appends another pool drawn with the same floor.
    pub fn merge(&mut self, other: PeakPool) {
        let off = self.n_scans as u32;
        self.peaks
            .extend(other.peaks.into_iter().map(|(v, s)| (v, s + off)));
        self.n_scans += other.n_scans;
        self.sorted = false;
    }

    fn freeze(&mut self) {
        if !self.sorted {
            self.peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            self.sorted = true;
        }
    }

    /// Mean number of plots per scan at threshold `eta` (`eta >= floor`).
    pub fn rate(&mut self, eta: f64) -> f64 {
        self.freeze();
        let count = self.peaks.partition_point(|p| p.0 >= eta);
        count as f64 / self.n_scans.max(1) as f64
    }

    /// Per-scan plot counts at threshold `eta`.
    pub fn counts(&mut self, eta: f64) -> Vec<usize> {
        self.freeze();
        let mut counts = vec![0; self.n_scans];
        for &(v, s) in &self.peaks {
            if v < eta {
                break;
            }
            counts[s as usize] += 1;
        }
        counts
    }
}

/// Outcome of the plot-threshold calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotThreshold {
    pub eta: f64,
    pub seed: f64,
    pub target_rate: f64,
    pub achieved_rate: f64,
    /// 95% confidence interval of the mean plots per scan.
    pub ci_low: f64,
    pub ci_high: f64,
    pub scans: usize,
}

/// Mean and 95% normal-approximation interval of per-scan counts.
pub fn rate_interval(counts: &[usize]) -> (f64, f64, f64) {
    let n = counts.len().max(1) as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let half = 1.96 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

/// Bisection on `eta` in `[pool.floor(), upper]` for `target_rate` plots
/// per scan.
pub fn calibrate_plot_threshold(pool: &mut PeakPool, target_rate: f64, seed: f64, upper: f64) -> Result<PlotThreshold> {
    let mut lo = pool.floor();
    let mut hi = upper;
    let (r_lo, r_hi) = (pool.rate(lo), pool.rate(hi));
    if !(r_lo >= target_rate && r_hi <= target_rate) {
        return Err(Error::Calibration(format!(
            "plot threshold not bracketed: rate({lo:.4e}) = {r_lo:.3}, rate({hi:.4e}) = {r_hi:.3}, \
             target {target_rate} over {} scans",
            pool.n_scans()
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pool.rate(mid) > target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = if (pool.rate(lo) - target_rate).abs() < (pool.rate(hi) - target_rate).abs() {
        lo
    } else {
        hi
    };
    let (achieved, ci_low, ci_high) = rate_interval(&pool.counts(eta));
    Ok(PlotThreshold {
        eta,
        seed,
        target_rate,
        achieved_rate: achieved,
        ci_low,
        ci_high,
        scans: pool.n_scans(),
    })
}

/// Writes plots as CSV with header `statistic,range_m,az_rad,el_rad,time_s`.
pub fn write_plots_csv<W: Write>(w: W, plots: &[Plot]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in plots {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_plots_csv<R: Read>(r: R) -> Result<Vec<Plot>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
