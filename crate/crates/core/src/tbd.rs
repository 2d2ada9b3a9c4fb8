//! Multi-frame track-before-detect over a window of plot-lists.
//!
//! A trajectory `xi` picks at most one plot per scan (`xi[i] = k` selects
//! row `k`, 1-based; `0` is a miss) and must end in a plot at the last scan.
//! Its metric is the sum of the selected statistics, and consecutive selected
//! plots must pass the speed gate. The maximization is exact: a dynamic
//! program over `(scan, plot)` states whose transitions may skip scans.
//! Among trajectories with equal metric the lexicographically smallest `xi`
//! wins.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::detector::{Plot, PlotList};
use crate::error::{Error, Result};

/// True iff the two plots are reachable at speed `max_speed * (1 + slack)`.
/// Requires `b.time > a.time`.
pub fn speed_gate(a: &Plot, b: &Plot, max_speed: f64, slack: f64) -> Result<bool> {
    let dt = b.time - a.time;
    if !(dt > 0.0) {
        return Err(Error::NonIncreasingTime {
            earlier: a.time,
            later: b.time,
        });
    }
    let dist = (b.local_position() - a.local_position()).norm();
    Ok(dist <= max_speed * dt * (1.0 + slack))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateParams {
    pub max_speed: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// One entry per scan: 1-based plot row, or 0 for a miss.
    pub xi: Vec<usize>,
    pub metric: f64,
}

impl Trajectory {
    /// The selected plots in scan order.
    pub fn plots<'a>(&self, lists: &'a [PlotList]) -> Vec<&'a Plot> {
        self.xi
            .iter()
            .zip(lists)
            .filter(|(&k, _)| k > 0)
            .map(|(&k, l)| &l.plots[k - 1])
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    /// `(scan, row)` of the predecessor, 0-based row.
    prev: Option<(usize, usize)>,
}

fn reconstruct(nodes: &[Vec<Node>], n: usize, mut at: Option<(usize, usize)>) -> Vec<usize> {
    let mut xi = vec![0; n];
    while let Some((i, k)) = at {
        xi[i] = k + 1;
        at = nodes[i][k].prev;
    }
    xi
}

/// Exact search for the best trajectory; `None` when the last plot-list is empty.
pub fn best_trajectory(lists: &[PlotList], gate: GateParams) -> Result<Option<Trajectory>> {
    let n = lists.len();
    if n == 0 || lists[n - 1].is_empty() {
        return Ok(None);
    }
    let mut nodes: Vec<Vec<Node>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(lists[i].len());
        for plot in lists[i].plots.iter() {
            // fresh start has an all-zero prefix, the smallest possible
            let mut best_v = 0.0;
            let mut best_prev: Option<(usize, usize)> = None;
            let mut best_prefix: Option<Vec<usize>> = None;
            for (ip, prev_row) in nodes.iter().enumerate() {
                for (kp, node) in prev_row.iter().enumerate() {
                    if node.value < best_v {
                        continue;
                    }
                    if !speed_gate(&lists[ip].plots[kp], plot, gate.max_speed, gate.slack)? {
                        continue;
                    }
                    if node.value > best_v {
                        best_v = node.value;
                        best_prev = Some((ip, kp));
                        best_prefix = None;
                        continue;
                    }
                    // tie: keep the lexicographically smaller prefix
                    let cand = reconstruct(&nodes, i, Some((ip, kp)));
                    let cur = best_prefix
                        .get_or_insert_with(|| reconstruct(&nodes, i, best_prev));
                    if cand < *cur {
                        best_prev = Some((ip, kp));
                        *cur = cand;
                    }
                }
            }
            row.push(Node {
                value: best_v + plot.statistic,
                prev: best_prev,
            });
        }
        nodes.push(row);
    }
    let last = &nodes[n - 1];
    let mut best_k = 0;
    let mut best_xi = reconstruct(&nodes, n, Some((n - 1, 0)));
    for k in 1..last.len() {
        match last[k].value.total_cmp(&last[best_k].value) {
            Ordering::Greater => {
                best_k = k;
                best_xi = reconstruct(&nodes, n, Some((n - 1, k)));
            }
            Ordering::Equal => {
                let xi = reconstruct(&nodes, n, Some((n - 1, k)));
                if xi < best_xi {
                    best_k = k;
                    best_xi = xi;
                }
            }
            Ordering::Less => {}
        }
    }
    Ok(Some(Trajectory {
        xi: best_xi,
        metric: last[best_k].value,
    }))
}

/// Threshold test, inclusive; no candidate means H0.
pub fn decide(t_star: Option<f64>, eta: f64) -> bool {
    t_star.is_some_and(|t| t >= eta)
}

/// Least-squares polynomial fit of each coordinate against time, evaluated
/// at `t_eval`. The degree drops to `len - 1` when there are too few points.
pub fn smooth_positions(times: &[f64], positions: &[Vector3<f64>], degree: usize, t_eval: f64) -> Vector3<f64> {
    assert_eq!(times.len(), positions.len());
    assert!(!times.is_empty());
    let deg = degree.min(times.len() - 1);
    if deg == 0 {
        return positions.iter().sum::<Vector3<f64>>() / positions.len() as f64;
    }
    let t0 = t_eval;
    let scale = times
        .iter()
        .map(|t| (t - t0).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(times.len(), deg + 1, |r, c| ((times[r] - t0) / scale).powi(c as i32));
    let svd = a.svd(true, true);
    let mut out = Vector3::zeros();
    for axis in 0..3 {
        let b = DVector::from_iterator(positions.len(), positions.iter().map(|p| p[axis]));
        let coef = svd
            .solve(&b, 1e-12)
            .expect("svd with both factors computed");
        out[axis] = coef[0];
    }
    out
}

/// Smoothed current position (RIS frame) from the plots of a trajectory,
/// evaluated at the time of the last plot.
pub fn smooth_trajectory(plots: &[&Plot], degree: usize) -> Vector3<f64> {
    let times: Vec<f64> = plots.iter().map(|p| p.time).collect();
    let pos: Vec<Vector3<f64>> = plots.iter().map(|p| p.local_position()).collect();
    let t_eval = *times.last().expect("at least one plot");
    smooth_positions(&times, &pos, degree, t_eval)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TbdDecision {
    pub detected: bool,
    pub trajectory: Option<Trajectory>,
    /// Smoothed current position in the RIS frame, when detected.
    pub position: Option<Vector3<f64>>,
    pub threshold: f64,
}

impl TbdDecision {
    pub fn t_star(&self) -> Option<f64> {
        self.trajectory.as_ref().map(|t| t.metric)
    }
}

/// Search, test and (if detected) smooth.
pub fn run_tbd(lists: &[PlotList], gate: GateParams, eta: f64, degree: usize) -> Result<TbdDecision> {
    let trajectory = best_trajectory(lists, gate)?;
    let detected = decide(trajectory.as_ref().map(|t| t.metric), eta);
    let position = match (&trajectory, detected) {
        (Some(t), true) => Some(smooth_trajectory(&t.plots(lists), degree)),
        _ => None,
    };
    Ok(TbdDecision {
        detected,
        trajectory,
        position,
        threshold: eta,
    })
}

/// Outcome of the TBD-threshold calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbdThreshold {
    pub n_scan: usize,
    pub pfa: f64,
    pub eta: f64,
    /// Order-statistic 95% interval of the quantile.
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
}

/// Minimum number of H0 super-trials for a given false-alarm probability.
pub fn min_trials(pfa: f64) -> usize {
    (50.0 / pfa).ceil() as usize
}

/// Empirical `(1 - pfa)` quantile of H0 maxima. `None` samples (no
/// candidate) never exceed any threshold.
pub fn calibrate_tbd_threshold(samples: &[Option<f64>], pfa: f64, n_scan: usize) -> Result<TbdThreshold> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::Calibration(format!("false-alarm probability {pfa} outside (0, 1)")));
    }
    let m = samples.len();
    if m < min_trials(pfa) {
        return Err(Error::Calibration(format!(
            "{m} H0 super-trials are too few for P_fa = {pfa}: need at least {}; \
             raise the trial count or use a larger desk-scale P_fa",
            min_trials(pfa)
        )));
    }
    let mut v: Vec<f64> = samples.iter().map(|s| s.unwrap_or(f64::NEG_INFINITY)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((pfa * m as f64).round() as usize).clamp(1, m);
    let eta = v[k - 1];
    if !eta.is_finite() {
        return Err(Error::Calibration(format!(
            "fewer than {k} of {m} H0 super-trials produced a candidate"
        )));
    }
    let half = 1.96 * (m as f64 * pfa * (1.0 - pfa)).sqrt();
    let at = |x: f64| v[(x.round().max(1.0) as usize).min(m) - 1];
    Ok(TbdThreshold {
        n_scan,
        pfa,
        eta,
        ci_low: at(k as f64 + half),
        ci_high: at(k as f64 - half),
        trials: m,
    })
}

/// 95% normal-approximation band of the number of successes out of `n`
/// Bernoulli(`p`) trials, as rates.
pub fn binomial_band(p: f64, n: usize) -> (f64, f64) {
    let half = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
    (p - half, p + half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scene::Angles;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    const GATE: GateParams = GateParams {
        max_speed: 40.0,
        slack: 0.15,
    };

    fn plot_at(stat: f64, pos: Vector3<f64>, time: f64) -> Plot {
        let range = pos.norm();
        let el = (pos.y / range).asin();
        let az = pos.x.atan2(pos.z);
        Plot {
            statistic: stat,
            range,
            azimuth: az,
            elevation: el,
            time,
        }
    }

    fn list(scan: usize, mut plots: Vec<Plot>) -> PlotList {
        plots.sort_by(|a, b| b.statistic.total_cmp(&a.statistic));
        PlotList { scan_index: scan, plots }
    }

    #[test]
    fn gate_examples() {
        let p = Vector3::new(3.0, 10.0, 80.0);
        let a = plot_at(1.0, p, 0.0);
        assert!(speed_gate(&a, &plot_at(1.0, p, 0.06), 40.0, 0.15).unwrap());
        let far = p + Vector3::new(10.0, 0.0, 0.0);
        assert!(!speed_gate(&a, &plot_at(1.0, far, 0.06), 40.0, 0.15).unwrap());
        // 2.5 m in 62.5 ms at 40 m/s is exactly on the boundary
        let a = Plot { range: 64.0, azimuth: 0.0, elevation: 0.0, ..a };
        let b = Plot { range: 66.5, time: 0.0625, ..a };
        assert!(speed_gate(&a, &b, 40.0, 0.0).unwrap());
        assert!(matches!(
            speed_gate(&b, &a, 40.0, 0.15),
            Err(Error::NonIncreasingTime { .. })
        ));
        assert!(speed_gate(&a, &a, 40.0, 0.15).is_err());
    }

    #[test]
    fn single_scan_picks_largest() {
        let p = Vector3::new(0.0, 0.0, 50.0);
        let lists = vec![list(0, vec![plot_at(3.2, p, 0.0), plot_at(5.0, p * 2.0, 0.0)])];
        let t = best_trajectory(&lists, GATE).unwrap().unwrap();
        assert_eq!(t.metric, 5.0);
        assert_eq!(t.xi, vec![1]);
    }

    #[test]
    fn empty_current_list_is_no_candidate() {
        let p = Vector3::new(0.0, 0.0, 50.0);
        let lists = vec![list(0, vec![plot_at(3.0, p, 0.0)]), list(1, vec![])];
        assert!(best_trajectory(&lists, GATE).unwrap().is_none());
        let d = run_tbd(&lists, GATE, 0.0, 1).unwrap();
        assert!(!d.detected && d.position.is_none());
        assert!(!decide(None, f64::NEG_INFINITY));
        assert!(decide(Some(2.0), 2.0));
    }

    #[test]
    fn skipped_scan_widens_gate() {
        let p = Vector3::new(0.0, 0.0, 60.0);
        let step = Vector3::new(4.0, 0.0, 0.0);
        // 4 m is out of reach in 60 ms but within reach in 120 ms
        let lists = vec![
            list(0, vec![plot_at(10.0, p, 0.0)]),
            list(1, vec![plot_at(1.0, p + Vector3::new(0.0, 0.0, -50.0), 0.06)]),
            list(2, vec![plot_at(10.0, p + step, 0.12)]),
        ];
        let t = best_trajectory(&lists, GATE).unwrap().unwrap();
        assert_eq!(t.xi, vec![1, 0, 1]);
        assert_eq!(t.metric, 20.0);
    }

    /// Exhaustive search over all trajectories in lexicographic order.
    fn brute_force(lists: &[PlotList], gate: GateParams) -> Option<Trajectory> {
        let n = lists.len();
        if lists[n - 1].is_empty() {
            return None;
        }
        let mut best: Option<Trajectory> = None;
        let mut xi = vec![0usize; n];
        loop {
            if xi[n - 1] != 0 {
                let sel: Vec<&Plot> = xi
                    .iter()
                    .zip(lists)
                    .filter(|(&k, _)| k > 0)
                    .map(|(&k, l)| &l.plots[k - 1])
                    .collect();
                let ok = sel
                    .windows(2)
                    .all(|w| speed_gate(w[0], w[1], gate.max_speed, gate.slack).unwrap());
                if ok {
                    let metric = sel.iter().fold(0.0, |acc, p| acc + p.statistic);
                    if best.as_ref().is_none_or(|b| metric > b.metric) {
                        best = Some(Trajectory { xi: xi.clone(), metric });
                    }
                }
            }
            // odometer increment, last index fastest
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if xi[i] < lists[i].len() {
                    xi[i] += 1;
                    break;
                }
                xi[i] = 0;
            }
        }
    }

    fn random_instance(seed: u64) -> Vec<PlotList> {
        let mut r = rng::stream(seed, &[0xB0]);
        let n = r.random_range(1..=4);
        let base = Vector3::new(r.random_range(-20.0..20.0), r.random_range(5.0..20.0), r.random_range(60.0..150.0));
        (0..n)
            .map(|i| {
                let m = r.random_range(0..=6);
                let plots = (0..m)
                    .map(|_| {
                        // dyadic statistics make exact ties common
                        let stat = r.random_range(1..=8) as f64 * 0.5;
                        let jitter = Vector3::new(
                            r.random_range(-4.0..4.0),
                            r.random_range(-2.0..2.0),
                            r.random_range(-4.0..4.0),
                        );
                        plot_at(stat, base + jitter, i as f64 * 0.06 + r.random_range(0..6) as f64 * 0.01)
                    })
                    .collect();
                list(i, plots)
            })
            .collect()
    }

    #[test]
    fn dp_equals_brute_force_on_random_instances() {
        for seed in 0..1000 {
            let lists = random_instance(seed);
            let dp = best_trajectory(&lists, GATE).unwrap();
            let bf = brute_force(&lists, GATE);
            assert_eq!(dp, bf, "seed {seed}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn dp_matches_brute_force(seed in 1000u64..1_000_000) {
            let lists = random_instance(seed);
            prop_assert_eq!(best_trajectory(&lists, GATE).unwrap(), brute_force(&lists, GATE));
        }

        #[test]
        fn t_star_monotone_in_statistics(seed in 0u64..100_000, bump in 0.0f64..5.0) {
            let mut lists = random_instance(seed);
            let before = best_trajectory(&lists, GATE).unwrap().map(|t| t.metric);
            let i = (seed as usize) % lists.len();
            if !lists[i].is_empty() {
                let k = (seed as usize / 7) % lists[i].len();
                lists[i].plots[k].statistic += bump;
            }
            let after = best_trajectory(&lists, GATE).unwrap().map(|t| t.metric);
            prop_assert!(after >= before);
        }

        #[test]
        fn relaxing_speed_never_lowers_t_star(seed in 0u64..100_000, extra in 0.0f64..100.0) {
            let lists = random_instance(seed);
            let loose = GateParams { max_speed: GATE.max_speed + extra, ..GATE };
            let a = best_trajectory(&lists, GATE).unwrap().map(|t| t.metric);
            let b = best_trajectory(&lists, loose).unwrap().map(|t| t.metric);
            prop_assert!(b >= a);
        }

        #[test]
        fn selected_plots_pass_gates(seed in 0u64..100_000) {
            let lists = random_instance(seed);
            if let Some(t) = best_trajectory(&lists, GATE).unwrap() {
                prop_assert!(*t.xi.last().unwrap() != 0);
                let sel = t.plots(&lists);
                let sum = sel.iter().fold(0.0, |acc, p| acc + p.statistic);
                prop_assert_eq!(sum, t.metric);
                for w in sel.windows(2) {
                    prop_assert!(speed_gate(w[0], w[1], GATE.max_speed, GATE.slack).unwrap());
                }
            }
        }
    }

    #[test]
    fn linear_track_is_recovered_exactly() {
        let p0 = Vector3::new(-10.0, 12.0, 90.0);
        let v = Vector3::new(20.0, -5.0, 30.0);
        let plots: Vec<Plot> = (0..8)
            .map(|i| {
                let t = 0.06 * i as f64 + 0.01;
                plot_at(1.0, p0 + v * t, t)
            })
            .collect();
        let refs: Vec<&Plot> = plots.iter().collect();
        let est = smooth_trajectory(&refs, 1);
        let truth = p0 + v * plots[7].time;
        assert_relative_eq!(est, truth, epsilon = 1e-9);
        assert_relative_eq!(smooth_trajectory(&refs[..1], 1), plots[0].local_position(), epsilon = 1e-12);
    }

    #[test]
    fn smoothing_reduces_endpoint_error() {
        let mut r = rng::stream(77, &[]);
        let normal = rand_distr::Normal::new(0.0, 3.0).unwrap();
        let (mut raw, mut smooth) = (0.0, 0.0);
        let trials = 1000;
        for _ in 0..trials {
            let p0 = Vector3::new(0.0, 10.0, 100.0);
            let v = Vector3::new(30.0, 0.0, -20.0);
            let times: Vec<f64> = (0..12).map(|i| 0.06 * i as f64).collect();
            let noisy: Vec<Vector3<f64>> = times
                .iter()
                .map(|&t| p0 + v * t + Vector3::from_fn(|_, _| r.sample(normal)))
                .collect();
            let truth = p0 + v * times[11];
            raw += (noisy[11] - truth).norm_squared();
            smooth += (smooth_positions(&times, &noisy, 1, times[11]) - truth).norm_squared();
        }
        assert!(smooth < raw, "{smooth} vs {raw}");
    }

    #[test]
    fn quantile_calibration() {
        let samples: Vec<Option<f64>> = (0..1000).map(|i| Some(i as f64)).collect();
        let t = calibrate_tbd_threshold(&samples, 0.5, 1).unwrap();
        assert_eq!(t.eta, 500.0);
        let fa = samples.iter().filter(|s| decide(**s, t.eta)).count();
        assert_eq!(fa, 500);
        assert!(t.ci_low <= t.eta && t.eta <= t.ci_high);
        assert!(matches!(calibrate_tbd_threshold(&samples, 1e-3, 1), Err(Error::Calibration(_))));
        let t = calibrate_tbd_threshold(&samples, 0.05, 1).unwrap();
        assert_eq!(samples.iter().filter(|s| decide(**s, t.eta)).count(), 50);
    }

    #[test]
    fn local_position_matches_scene_convention() {
        let a = Angles::from_degrees(11.0, 7.0);
        let p = Plot { statistic: 1.0, range: 80.0, azimuth: a.azimuth, elevation: a.elevation, time: 0.0 };
        assert_relative_eq!(p.local_position(), a.local_unit() * 80.0);
    }
}
