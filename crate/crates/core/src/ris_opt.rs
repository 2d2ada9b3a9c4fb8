//! Two-way beampattern of the RIS-aided radar and unit-modulus RIS design.
//!
//! For a pointing direction the wideband beampattern is
//!
//! ```text
//! BP(w) = sum_q [ (1-g_q) |w^T c_q|^2 + g_q |w^T s_q|^2 ] * ||M_q w||^2
//! c_q = diag(t_q) G_tx f_c,  s_q = diag(t_q) G_tx f_s,  M_q = G_rx diag(t_q)
//! ```
//!
//! With every entry but `w_m = exp(j phi)` held fixed, each bracket and each
//! norm is a first-order trigonometric polynomial in `phi`, so the per-element
//! objective is `C0 + Re(C1 e^{j phi}) + Re(C2 e^{j 2 phi})`. The optimizer
//! sweeps the elements, maximizing that polynomial on a phase grid followed
//! by a golden-section refinement.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::RisOptParams;
use crate::error::{Error, Result};
use crate::rng;
use crate::scene::{Angles, CMatrix, CVector, ChannelSet};
use crate::txwave::BeamformerSet;

/// Unit-modulus RIS response, stored as phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisProfile {
    phases: Vec<f64>,
}

impl RisProfile {
    pub fn from_phases(phases: Vec<f64>) -> Self {
        Self { phases }
    }

    pub fn uniform(n: usize) -> Self {
        Self { phases: vec![0.0; n] }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Self {
        Self {
            phases: (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn weights(&self) -> CVector {
        CVector::from_iterator(
            self.phases.len(),
            self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)),
        )
    }
}

fn diag_mul_vec(t: &CVector, v: &CVector) -> CVector {
    t.component_mul(v)
}

/// Per-subcarrier two-way beampattern towards `theta`.
pub fn beampattern_q(
    omega: &CVector,
    theta: Angles,
    channels: &ChannelSet,
    beams: &BeamformerSet,
    gamma_q: f64,
    q: usize,
) -> f64 {
    let t = channels.ris_steering(theta, q);
    let w_t = diag_mul_vec(&t, omega);
    let g_tx = channels.g_tx(q);
    let comm = w_t.transpose() * (g_tx * &beams.comm[q]);
    let sens = w_t.transpose() * (g_tx * &beams.sensing[q]);
    let forward = comm[(0, 0)].norm_sqr() * (1.0 - gamma_q) + sens[(0, 0)].norm_sqr() * gamma_q;
    let back = (channels.g_rx(q) * w_t).norm_squared();
    forward * back
}

/// Wideband beampattern: sum of [`beampattern_q`] over subcarriers.
pub fn beampattern(
    omega: &CVector,
    theta: Angles,
    channels: &ChannelSet,
    beams: &BeamformerSet,
    gamma: &[f64],
) -> f64 {
    (0..channels.n_sub())
        .map(|q| beampattern_q(omega, theta, channels, beams, gamma[q], q))
        .sum()
}

/// One subcarrier's contribution in separable form.
#[derive(Debug, Clone)]
pub struct SubcarrierTerm {
    pub comm: CVector,
    pub sensing: CVector,
    pub back: CMatrix,
    pub comm_weight: f64,
    pub sensing_weight: f64,
}

/// Beampattern towards a fixed direction as a function of the RIS response.
#[derive(Debug, Clone)]
pub struct BeampatternObjective {
    terms: Vec<SubcarrierTerm>,
    n_elements: usize,
}

impl BeampatternObjective {
    pub fn new(
        direction: Angles,
        channels: &ChannelSet,
        beams: &BeamformerSet,
        gamma: &[f64],
    ) -> Self {
        let offsets = channels.ris().path_offsets(direction);
        let terms = (0..channels.n_sub())
            .map(|q| {
                let t = crate::scene::steering_from_offsets(&offsets, channels.freqs()[q]);
                let g_tx = channels.g_tx(q);
                let mut back = channels.g_rx(q).clone();
                for (m, &tm) in t.iter().enumerate() {
                    back.column_mut(m).apply(|z| *z *= tm);
                }
                SubcarrierTerm {
                    comm: diag_mul_vec(&t, &(g_tx * &beams.comm[q])),
                    sensing: diag_mul_vec(&t, &(g_tx * &beams.sensing[q])),
                    back,
                    comm_weight: 1.0 - gamma[q],
                    sensing_weight: gamma[q],
                }
            })
            .collect();
        Self {
            terms,
            n_elements: channels.ris().len(),
        }
    }

    pub fn from_terms(terms: Vec<SubcarrierTerm>) -> Self {
        let n_elements = terms.first().map_or(0, |t| t.comm.len());
        Self { terms, n_elements }
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn value(&self, omega: &CVector) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let c = (omega.transpose() * &t.comm)[(0, 0)].norm_sqr();
                let s = (omega.transpose() * &t.sensing)[(0, 0)].norm_sqr();
                (t.comm_weight * c + t.sensing_weight * s) * (&t.back * omega).norm_squared()
            })
            .sum()
    }

    /// Phase-conjugate start aligning the sensing path of subcarrier `q`.
    fn conjugate_start(&self, q: usize) -> RisProfile {
        let t = &self.terms[q];
        let v = if t.sensing_weight > 0.0 { &t.sensing } else { &t.comm };
        RisProfile::from_phases(v.iter().map(|z| -z.arg()).collect())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub phase_grid: usize,
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Keep the objective after every single-element update.
    pub record_trace: bool,
    /// Seed for the random fallback start.
    pub seed: u64,
    /// Start from this profile instead of the phase-conjugate heuristic.
    pub initial: Option<RisProfile>,
}

impl OptimizeOptions {
    pub fn from_params(p: &RisOptParams) -> Self {
        Self {
            phase_grid: p.phase_grid,
            tolerance: p.tolerance,
            max_sweeps: p.max_sweeps,
            ..Self::default()
        }
    }
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            phase_grid: 256,
            tolerance: 1e-4,
            max_sweeps: 50,
            record_trace: false,
            seed: 0,
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RisSolution {
    pub profile: RisProfile,
    pub objective: f64,
    pub initial_objective: f64,
    pub sweeps: usize,
    pub updates: usize,
    /// Objective after each single-element update (empty unless requested).
    pub trace: Vec<f64>,
}

/// `C0 + Re(C1 e^{j phi}) + Re(C2 e^{j 2 phi})`.
#[derive(Debug, Clone, Copy)]
struct TrigPoly {
    c0: f64,
    c1: Complex64,
    c2: Complex64,
}

impl TrigPoly {
    #[inline]
    fn eval(&self, phi: f64) -> f64 {
        let e1 = Complex64::from_polar(1.0, phi);
        let e2 = e1 * e1;
        self.c0 + (self.c1 * e1).re + (self.c2 * e2).re
    }

    fn argmax(&self, grid: usize) -> (f64, f64) {
        let step = 2.0 * PI / grid as f64;
        let (mut best_phi, mut best) = (0.0, f64::NEG_INFINITY);
        for k in 0..grid {
            let phi = k as f64 * step;
            let v = self.eval(phi);
            if v > best {
                best = v;
                best_phi = phi;
            }
        }
        // golden-section refinement on the bracketing cell
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (best_phi - step, best_phi + step);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (self.eval(x1), self.eval(x2));
        for _ in 0..40 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = self.eval(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = self.eval(x1);
            }
        }
        let phi = 0.5 * (a + b);
        let v = self.eval(phi);
        if v >= best {
            (phi.rem_euclid(2.0 * PI), v)
        } else {
            (best_phi, best)
        }
    }
}

/// Coordinate-ascent maximization of the beampattern towards `direction`.
pub fn optimize_ris(
    direction: Angles,
    channels: &ChannelSet,
    beams: &BeamformerSet,
    gamma: &[f64],
    opts: &OptimizeOptions,
) -> Result<RisSolution> {
    let objective = BeampatternObjective::new(direction, channels, beams, gamma);
    optimize_objective(&objective, opts)
}

pub fn optimize_objective(obj: &BeampatternObjective, opts: &OptimizeOptions) -> Result<RisSolution> {
    let n = obj.n_elements();
    if n == 0 || obj.terms.is_empty() {
        return Err(Error::Optimizer("empty problem".into()));
    }
    let mut profile = match &opts.initial {
        Some(p) if p.len() == n => p.clone(),
        Some(p) => {
            return Err(Error::Optimizer(format!(
                "initial profile has {} entries, expected {n}",
                p.len()
            )))
        }
        None => obj.conjugate_start(obj.terms.len() / 2),
    };
    let mut start = obj.value(&profile.weights());
    if !start.is_finite() || start <= 0.0 {
        let mut r = rng::stream(opts.seed, &[rng::purpose::RIS_INIT]);
        profile = RisProfile::random(&mut r, n);
        start = obj.value(&profile.weights());
    }
    if !start.is_finite() {
        return Err(Error::Optimizer("non-finite objective at start".into()));
    }

    let n_terms = obj.terms.len();
    let mut omega = profile.weights();
    let mut trace = Vec::new();
    let mut current = start;
    let mut sweeps = 0;
    let mut updates = 0;
    let mut acc_c = vec![Complex64::default(); n_terms];
    let mut acc_s = vec![Complex64::default(); n_terms];
    let mut acc_r: Vec<CVector> = obj.terms.iter().map(|t| CVector::zeros(t.back.nrows())).collect();

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        // rebuild running sums each sweep so rounding does not accumulate
        for (k, t) in obj.terms.iter().enumerate() {
            acc_c[k] = (omega.transpose() * &t.comm)[(0, 0)];
            acc_s[k] = (omega.transpose() * &t.sensing)[(0, 0)];
            acc_r[k] = &t.back * &omega;
        }
        let sweep_start = current;
        for m in 0..n {
            let wm = omega[m];
            let mut poly = TrigPoly {
                c0: 0.0,
                c1: Complex64::default(),
                c2: Complex64::default(),
            };
            for (k, t) in obj.terms.iter().enumerate() {
                let cm = t.comm[m];
                let sm = t.sensing[m];
                let col = t.back.column(m);
                let ac = acc_c[k] - wm * cm;
                let as_ = acc_s[k] - wm * sm;
                let r = &mut acc_r[k];
                let mut rho0 = 0.0;
                let mut kappa = Complex64::default();
                for (ri, &mi) in r.iter_mut().zip(col.iter()) {
                    *ri -= wm * mi;
                    rho0 += ri.norm_sqr() + mi.norm_sqr();
                    kappa += ri.conj() * mi;
                }
                kappa *= 2.0;
                let alpha0 = t.comm_weight * (ac.norm_sqr() + cm.norm_sqr())
                    + t.sensing_weight * (as_.norm_sqr() + sm.norm_sqr());
                let beta = (ac.conj() * cm * t.comm_weight + as_.conj() * sm * t.sensing_weight) * 2.0;
                poly.c0 += alpha0 * rho0 + 0.5 * (beta * kappa.conj()).re;
                poly.c1 += kappa * alpha0 + beta * rho0;
                poly.c2 += beta * kappa * 0.5;
                acc_c[k] = ac;
                acc_s[k] = as_;
            }
            let old_phi = profile.phases[m];
            let before = poly.eval(old_phi);
            let (cand_phi, cand) = poly.argmax(opts.phase_grid);
            let (phi, after) = if cand > before { (cand_phi, cand) } else { (old_phi, before) };
            if !after.is_finite() {
                return Err(Error::Optimizer(format!("non-finite objective at element {m}")));
            }
            // `before` re-evaluates the previous update's result from fresh
            // coefficients; a drop beyond rounding means the bookkeeping broke.
            if before < current - 1e-9 * current.abs() || after < before {
                return Err(Error::Optimizer(format!(
                    "objective decreased at element {m}: {current} -> {before} -> {after}"
                )));
            }
            profile.phases[m] = phi;
            let w_new = Complex64::from_polar(1.0, phi);
            omega[m] = w_new;
            for (k, t) in obj.terms.iter().enumerate() {
                acc_c[k] += w_new * t.comm[m];
                acc_s[k] += w_new * t.sensing[m];
                for (ri, &mi) in acc_r[k].iter_mut().zip(t.back.column(m).iter()) {
                    *ri += w_new * mi;
                }
            }
            current = after;
            updates += 1;
            if opts.record_trace {
                trace.push(after);
            }
        }
        let gain = (current - sweep_start) / sweep_start.abs().max(f64::MIN_POSITIVE);
        if gain < opts.tolerance {
            break;
        }
    }
    let objective = obj.value(&omega);
    Ok(RisSolution {
        profile,
        objective,
        initial_objective: start,
        sweeps,
        updates,
        trace,
    })
}

/// Optimized profiles for every pointing direction at one power split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub direction: usize,
    pub gamma: f64,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub entries: Vec<ProfileEntry>,
}

impl ProfileTable {
    pub fn insert(&mut self, direction: usize, gamma: f64, profile: &RisProfile) {
        self.entries.retain(|e| !(e.direction == direction && e.gamma == gamma));
        self.entries.push(ProfileEntry {
            direction,
            gamma,
            phases: profile.phases().to_vec(),
        });
    }

    pub fn get(&self, direction: usize, gamma: f64) -> Option<RisProfile> {
        self.entries
            .iter()
            .find(|e| e.direction == direction && e.gamma == gamma)
            .map(|e| RisProfile::from_phases(e.phases.clone()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::rng::complex_normal;
    use crate::scene::build_channels;
    use crate::txwave::{draw_symbols, matched_beamformers, transmit_signal};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn setup() -> (ScenarioConfig, ChannelSet, BeamformerSet) {
        let c = ScenarioConfig::default();
        let ch = build_channels(&c, Vector3::new(28.0, -33.0, 1.8)).unwrap();
        let b = matched_beamformers(&ch).unwrap();
        (c, ch, b)
    }

    #[test]
    fn closed_form_objective_matches_direct_beampattern() {
        let (_, ch, b) = setup();
        let gamma = vec![0.35; ch.n_sub()];
        let dir = Angles::from_degrees(-11.25, 10.0);
        let obj = BeampatternObjective::new(dir, &ch, &b, &gamma);
        let mut r = rng::stream(21, &[]);
        for _ in 0..5 {
            let w = RisProfile::random(&mut r, 64).weights();
            assert_relative_eq!(obj.value(&w), beampattern(&w, dir, &ch, &b, &gamma), max_relative = 1e-10);
        }
    }

    #[test]
    fn gamma_one_keeps_only_sensing_term() {
        let (_, ch, b) = setup();
        let dir = Angles::from_degrees(3.75, 10.0);
        let w = RisProfile::random(&mut rng::stream(22, &[]), 64).weights();
        let q = 5;
        let t = ch.ris_steering(dir, q);
        let wt = w.component_mul(&t);
        let s = (wt.transpose() * (ch.g_tx(q) * &b.sensing[q]))[(0, 0)].norm_sqr();
        let back = (ch.g_rx(q) * &wt).norm_squared();
        assert_relative_eq!(beampattern_q(&w, dir, &ch, &b, 1.0, q), s * back, max_relative = 1e-12);
    }

    #[test]
    fn scalar_case_is_phase_invariant() {
        let mut r = rng::stream(23, &[]);
        let gt = complex_normal(&mut r);
        let gr = complex_normal(&mut r);
        let term = SubcarrierTerm {
            comm: CVector::from_element(1, gt),
            sensing: CVector::from_element(1, gt * 0.5),
            back: CMatrix::from_element(1, 1, gr),
            comm_weight: 0.4,
            sensing_weight: 0.6,
        };
        let obj = BeampatternObjective::from_terms(vec![term]);
        let v0 = obj.value(&RisProfile::from_phases(vec![0.0]).weights());
        for phi in [0.3, 1.7, 4.0] {
            let v = obj.value(&RisProfile::from_phases(vec![phi]).weights());
            assert_relative_eq!(v, v0, max_relative = 1e-12);
        }
    }

    #[test]
    fn beampattern_matches_sampled_echo_power() {
        let (c, ch, b) = setup();
        let q = 9;
        let gamma = 0.4;
        let dir = Angles::from_degrees(-3.75, 10.0);
        let w = RisProfile::random(&mut rng::stream(24, &[]), 64).weights();
        let t = ch.ris_steering(dir, q);
        let wt = w.component_mul(&t);
        let rx_vec = ch.g_rx(q) * &wt;
        let tx_row = (ch.g_tx(q).transpose() * &wt).transpose();
        let one = BeamformerSet {
            comm: vec![b.comm[q].clone()],
            sensing: vec![b.sensing[q].clone()],
        };
        let n = 10_000;
        let block = draw_symbols(&mut rng::stream(25, &[]), &[gamma], n);
        let p = transmit_signal(&one, &block, c.ofdm.power_w);
        let mean = p[0]
            .iter()
            .map(|pn| (&rx_vec * (&tx_row * pn)[(0, 0)]).norm_squared())
            .sum::<f64>()
            / n as f64
            / c.ofdm.power_w;
        let bp = beampattern_q(&w, dir, &ch, &b, gamma, q);
        assert!(((mean - bp) / bp).abs() < 0.02, "{mean} vs {bp}");
    }

    #[test]
    fn beampattern_is_nonnegative() {
        let (_, ch, b) = setup();
        let gamma = vec![0.5; ch.n_sub()];
        let mut r = rng::stream(26, &[]);
        for _ in 0..100 {
            let w = RisProfile::random(&mut r, 64).weights();
            let th = Angles::new(r.random_range(-1.2..1.2), r.random_range(-1.2..1.2));
            assert!(beampattern(&w, th, &ch, &b, &gamma) >= 0.0);
        }
    }

    #[test]
    fn single_subcarrier_sum_equals_term() {
        let (mut c, _, _) = setup();
        c.ofdm.used_subcarriers = 1;
        let ch = build_channels(&c, Vector3::new(30.0, -30.0, 1.75)).unwrap();
        let b = matched_beamformers(&ch).unwrap();
        let w = RisProfile::random(&mut rng::stream(27, &[]), 64).weights();
        let dir = Angles::from_degrees(11.25, 10.0);
        assert_eq!(
            beampattern(&w, dir, &ch, &b, &[0.2]),
            beampattern_q(&w, dir, &ch, &b, 0.2, 0)
        );
    }

    #[test]
    fn ascent_is_monotone_and_a_fixed_point() {
        let (_, ch, b) = setup();
        let gamma = vec![0.3; ch.n_sub()];
        let dir = Angles::from_degrees(18.75, 10.0);
        let opts = OptimizeOptions {
            record_trace: true,
            ..Default::default()
        };
        let sol = optimize_ris(dir, &ch, &b, &gamma, &opts).unwrap();
        assert!(sol.objective >= sol.initial_objective);
        let mut prev = sol.initial_objective;
        for &v in &sol.trace {
            assert!(v >= prev * (1.0 - 1e-9));
            prev = v;
        }
        for p in sol.profile.phases() {
            assert!(p.is_finite());
        }
        let again = optimize_ris(
            dir,
            &ch,
            &b,
            &gamma,
            &OptimizeOptions {
                initial: Some(sol.profile.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((again.objective - sol.objective) / sol.objective < 1e-4);
        let direct = beampattern(&sol.profile.weights(), dir, &ch, &b, &gamma);
        assert_relative_eq!(direct, sol.objective, max_relative = 1e-9);
    }

    #[test]
    fn separable_case_recovers_conjugate_profile() {
        // One subcarrier, scalar BS arrays: BP = |sum a_m w_m|^2 |sum b_m w_m|^2
        // with arg b_m = arg a_m, maximized by w_m = exp(-j arg a_m).
        let mut r = rng::stream(28, &[]);
        let n = 16;
        let a = CVector::from_fn(n, |_, _| complex_normal(&mut r));
        let bvec: Vec<Complex64> = a
            .iter()
            .map(|z| Complex64::from_polar(r.random_range(0.5..2.0), z.arg()))
            .collect();
        let term = SubcarrierTerm {
            comm: CVector::zeros(n),
            sensing: a.clone(),
            back: CMatrix::from_row_slice(1, n, &bvec),
            comm_weight: 0.0,
            sensing_weight: 1.0,
        };
        let obj = BeampatternObjective::from_terms(vec![term]);
        let start = RisProfile::random(&mut r, n);
        let sol = optimize_objective(
            &obj,
            &OptimizeOptions {
                initial: Some(start),
                ..Default::default()
            },
        )
        .unwrap();
        let w = sol.profile.weights();
        let sum_a: f64 = a.iter().map(|z| z.norm()).sum();
        let sum_b: f64 = bvec.iter().map(|z| z.norm()).sum();
        let best = (sum_a * sum_b).powi(2);
        assert_relative_eq!(sol.objective, best, max_relative = 1e-6);
        // phases equal -arg a_m up to one global rotation
        let rot = (w[0] * a[0]).arg();
        for m in 0..n {
            let d = ((w[m] * a[m]).arg() - rot + PI).rem_euclid(2.0 * PI) - PI;
            assert!(d.abs() < 2.0 * PI / 256.0, "element {m}: {d}");
        }
    }

    #[test]
    fn profile_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = ProfileTable::default();
        t.insert(2, 0.2, &RisProfile::from_phases(vec![0.1, 2.0, 6.2]));
        t.insert(2, 0.2, &RisProfile::from_phases(vec![0.3, 2.0, 6.2]));
        let path = dir.path().join("profiles.json");
        t.save(&path).unwrap();
        let back = ProfileTable::load(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.entries.len(), 1);
        assert_eq!(back.get(2, 0.2).unwrap().phases()[0], 0.3);
    }
}
