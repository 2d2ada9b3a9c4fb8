//! Array geometry, steering vectors, element gains and line-of-sight channels.
//!
//! Angles are measured in each array's own frame: azimuth in the horizontal
//! plane of the panel, elevation towards the vertical axis, both relative to
//! boresight. A local direction has components
//! `(cos el sin az, sin el, cos el cos az)` along (horizontal, vertical,
//! boresight).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ArrayLayout, ScenarioConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angles {
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    pub fn from_degrees(azimuth: f64, elevation: f64) -> Self {
        Self::new(azimuth.to_radians(), elevation.to_radians())
    }

    /// Unit direction in the local (horizontal, vertical, boresight) basis.
    pub fn local_unit(&self) -> Vector3<f64> {
        let (sa, ca) = self.azimuth.sin_cos();
        let (se, ce) = self.elevation.sin_cos();
        Vector3::new(ce * sa, se, ce * ca)
    }
}

/// Uniform rectangular array with half-wavelength spacing at the carrier.
#[derive(Debug, Clone)]
pub struct PlanarArray {
    center: Vector3<f64>,
    boresight: Vector3<f64>,
    horizontal: Vector3<f64>,
    vertical: Vector3<f64>,
    layout: ArrayLayout,
    offsets: Vec<Vector3<f64>>,
}

impl PlanarArray {
    /// Elements are ordered with the horizontal index varying fastest.
    pub fn new(
        center: [f64; 3],
        boresight: [f64; 3],
        layout: ArrayLayout,
        spacing: f64,
    ) -> Result<Self> {
        let n = Vector3::from(boresight);
        let n = n
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Geometry("zero boresight vector".into()))?;
        let horizontal = n
            .cross(&Vector3::z())
            .try_normalize(1e-9)
            .ok_or_else(|| Error::Geometry("boresight must not be vertical".into()))?;
        let vertical = horizontal.cross(&n);
        let c0 = (layout.cols as f64 - 1.0) / 2.0;
        let r0 = (layout.rows as f64 - 1.0) / 2.0;
        let mut offsets = Vec::with_capacity(layout.len());
        for row in 0..layout.rows {
            for col in 0..layout.cols {
                offsets.push(
                    horizontal * ((col as f64 - c0) * spacing)
                        + vertical * ((row as f64 - r0) * spacing),
                );
            }
        }
        Ok(Self {
            center: Vector3::from(center),
            boresight: n,
            horizontal,
            vertical,
            layout,
            offsets,
        })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn layout(&self) -> ArrayLayout {
        self.layout
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn boresight(&self) -> Vector3<f64> {
        self.boresight
    }

    pub fn offsets(&self) -> &[Vector3<f64>] {
        &self.offsets
    }

    pub fn element_position(&self, m: usize) -> Vector3<f64> {
        self.center + self.offsets[m]
    }

    /// Angles of a global direction as seen from this array.
    pub fn local_angles(&self, direction: &Vector3<f64>) -> Angles {
        let d = direction.normalize();
        let u = d.dot(&self.horizontal);
        let v = d.dot(&self.vertical).clamp(-1.0, 1.0);
        let w = d.dot(&self.boresight);
        Angles::new(u.atan2(w), v.asin())
    }

    /// Global unit vector pointing towards `angles` in this array's frame.
    pub fn global_direction(&self, angles: Angles) -> Vector3<f64> {
        let l = angles.local_unit();
        self.horizontal * l.x + self.vertical * l.y + self.boresight * l.z
    }

    /// Global position at `range` metres from the array centre along `angles`.
    pub fn point_at(&self, angles: Angles, range: f64) -> Vector3<f64> {
        self.center + self.global_direction(angles) * range
    }

    /// Global point to (horizontal, vertical, boresight) coordinates
    /// relative to the array centre.
    pub fn to_local(&self, point: &Vector3<f64>) -> Vector3<f64> {
        let d = point - self.center;
        Vector3::new(d.dot(&self.horizontal), d.dot(&self.vertical), d.dot(&self.boresight))
    }

    pub fn to_global(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.center + self.horizontal * local.x + self.vertical * local.y + self.boresight * local.z
    }

    /// Path-length advance of every element towards `angles`, in metres.
    pub fn path_offsets(&self, angles: Angles) -> Vec<f64> {
        let k = self.global_direction(angles);
        self.offsets.iter().map(|o| o.dot(&k)).collect()
    }
}

/// Steering vector built from precomputed path offsets.
pub fn steering_from_offsets(path_offsets: &[f64], f: f64) -> CVector {
    let k = 2.0 * PI * f / SPEED_OF_LIGHT;
    CVector::from_iterator(
        path_offsets.len(),
        path_offsets.iter().map(|&p| Complex64::from_polar(1.0, k * p)),
    )
}

/// Far-field steering vector: entry `m` is `exp(j 2 pi f/c <r_m, k(theta)>)`.
pub fn steering_vector(array: &PlanarArray, theta: Angles, f: f64) -> CVector {
    steering_from_offsets(&array.path_offsets(theta), f)
}

/// Element power gain `pi cos(az) cos(el)`.
pub fn element_gain(theta: Angles) -> Result<f64> {
    const EDGE: f64 = PI / 2.0 + 1e-12;
    if theta.azimuth.abs() > EDGE || theta.elevation.abs() > EDGE {
        return Err(Error::BackHemisphere {
            azimuth: theta.azimuth,
            elevation: theta.elevation,
        });
    }
    Ok((PI * theta.azimuth.cos() * theta.elevation.cos()).max(0.0))
}

/// Free-space line-of-sight coefficient between two elements.
fn los_coefficient(gain_product: f64, distance: f64, f: f64) -> Complex64 {
    let amp = gain_product.sqrt() * SPEED_OF_LIGHT / (4.0 * PI * distance * f);
    Complex64::from_polar(amp, -2.0 * PI * distance * f / SPEED_OF_LIGHT)
}

/// Element-by-element link matrix from `from` to `to` (rows index `to`).
fn near_field_link(from: &PlanarArray, to: &PlanarArray, freqs: &[f64]) -> Result<Vec<CMatrix>> {
    let mut dist = DMatrix::<f64>::zeros(to.len(), from.len());
    let mut gains = DMatrix::<f64>::zeros(to.len(), from.len());
    for i in 0..to.len() {
        let pi = to.element_position(i);
        for j in 0..from.len() {
            let pj = from.element_position(j);
            let d = pi - pj;
            let r = d.norm();
            if !(r > 1e-9) {
                return Err(Error::Geometry(format!(
                    "elements {j} and {i} coincide"
                )));
            }
            let departure = element_gain(from.local_angles(&d))?;
            let arrival = element_gain(to.local_angles(&(-d)))?;
            dist[(i, j)] = r;
            gains[(i, j)] = departure * arrival;
        }
    }
    Ok(freqs
        .iter()
        .map(|&f| {
            CMatrix::from_fn(to.len(), from.len(), |i, j| {
                los_coefficient(gains[(i, j)], dist[(i, j)], f)
            })
        })
        .collect())
}

/// The user-independent part of the scene: arrays and BS/RIS links.
#[derive(Debug, Clone)]
pub struct StaticLinks {
    pub freqs: Vec<f64>,
    pub tx: PlanarArray,
    pub rx: PlanarArray,
    pub ris: PlanarArray,
    pub user_boresight: [f64; 3],
    /// `D_ris x D_tx` per subcarrier.
    pub g_tx: Vec<CMatrix>,
    /// `D_rx x D_ris` per subcarrier.
    pub g_rx: Vec<CMatrix>,
}

impl StaticLinks {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        let spacing = config.ofdm.wavelength() / 2.0;
        let g = &config.geometry;
        let tx = PlanarArray::new(g.bs_tx_position, g.bs_boresight, config.arrays.tx, spacing)?;
        let rx = PlanarArray::new(g.bs_rx_position, g.bs_boresight, config.arrays.rx, spacing)?;
        let ris = PlanarArray::new(g.ris_position, g.ris_boresight, config.arrays.ris, spacing)?;
        let freqs = config.ofdm.subcarrier_frequencies();
        let g_tx = near_field_link(&tx, &ris, &freqs)?;
        let g_rx = near_field_link(&ris, &rx, &freqs)?;
        Ok(Self {
            freqs,
            tx,
            rx,
            ris,
            user_boresight: g.user_boresight,
            g_tx,
            g_rx,
        })
    }

    /// BS-to-user channel vectors for a user at `user`, one per subcarrier.
    ///
    /// The returned `h` satisfies `y = h^H p` for the received sample, i.e.
    /// `h^H` equals the far-field propagation row
    /// `sqrt(G_tx G_u) c/(4 pi d f) exp(-j 2 pi d f / c) t(theta_u)^T`.
    pub fn user_channel(&self, user: &Vector3<f64>) -> Result<Vec<CVector>> {
        let d = user - self.tx.center();
        let r = d.norm();
        if !(r > 1e-9) {
            return Err(Error::Geometry("user coincides with the BS".into()));
        }
        let user_frame = PlanarArray::new(
            (*user).into(),
            self.user_boresight,
            ArrayLayout { cols: 1, rows: 1 },
            0.0,
        )?;
        let departure = self.tx.local_angles(&d);
        let gain = element_gain(departure)? * element_gain(user_frame.local_angles(&(-d)))?;
        let offsets = self.tx.path_offsets(departure);
        Ok(self
            .freqs
            .iter()
            .map(|&f| {
                let a = los_coefficient(gain, r, f);
                steering_from_offsets(&offsets, f).map(|t| (a * t).conj())
            })
            .collect())
    }
}

/// All channels of one scenario instance.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub links: Arc<StaticLinks>,
    /// `h_c` per subcarrier, length `D_tx`.
    pub h_c: Vec<CVector>,
    pub user_position: Vector3<f64>,
}

impl ChannelSet {
    pub fn with_user(links: Arc<StaticLinks>, user: Vector3<f64>) -> Result<Self> {
        let h_c = links.user_channel(&user)?;
        Ok(Self {
            links,
            h_c,
            user_position: user,
        })
    }

    pub fn n_sub(&self) -> usize {
        self.links.freqs.len()
    }

    pub fn freqs(&self) -> &[f64] {
        &self.links.freqs
    }

    pub fn g_tx(&self, q: usize) -> &CMatrix {
        &self.links.g_tx[q]
    }

    pub fn g_rx(&self, q: usize) -> &CMatrix {
        &self.links.g_rx[q]
    }

    pub fn ris(&self) -> &PlanarArray {
        &self.links.ris
    }

    /// RIS steering vector towards `theta` on subcarrier index `q` (0-based).
    pub fn ris_steering(&self, theta: Angles, q: usize) -> CVector {
        steering_vector(&self.links.ris, theta, self.links.freqs[q])
    }
}

pub fn build_channels(config: &ScenarioConfig, user_position: Vector3<f64>) -> Result<ChannelSet> {
    ChannelSet::with_user(Arc::new(StaticLinks::build(config)?), user_position)
}

/// Uniform draw inside the user cuboid.
pub fn drop_user<R: Rng + ?Sized>(rng: &mut R, config: &ScenarioConfig) -> Vector3<f64> {
    let g = &config.geometry;
    Vector3::from_fn(|k, _| {
        let (lo, hi) = (g.user_min[k], g.user_max[k]);
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let c = cfg();
        let links = StaticLinks::build(&c).unwrap();
        for &f in &[3.4e9, 3.5e9, 3.6e9] {
            let t = steering_vector(&links.ris, Angles::new(0.0, 0.0), f);
            for v in t.iter() {
                assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
                assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn steering_is_unit_modulus() {
        let c = cfg();
        let links = StaticLinks::build(&c).unwrap();
        let t = steering_vector(&links.ris, Angles::from_degrees(17.0, -8.0), 3.51e9);
        for v in t.iter() {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(t.norm_squared(), 64.0, epsilon = 1e-9);
    }

    #[test]
    fn two_element_phase_step_at_thirty_degrees() {
        let c = cfg();
        let lambda = c.ofdm.wavelength();
        let arr = PlanarArray::new(
            [0.0; 3],
            [0.0, 1.0, 0.0],
            ArrayLayout { cols: 2, rows: 1 },
            lambda / 2.0,
        )
        .unwrap();
        let t = steering_vector(&arr, Angles::from_degrees(30.0, 0.0), c.ofdm.carrier_hz);
        let dphi = (t[1] * t[0].conj()).arg();
        assert_relative_eq!(dphi, PI / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn element_gain_values() {
        assert_relative_eq!(element_gain(Angles::new(0.0, 0.0)).unwrap(), PI);
        assert!(element_gain(Angles::new(PI / 2.0, 0.0)).unwrap() < 1e-12);
        assert_relative_eq!(
            element_gain(Angles::new(PI / 3.0, 0.0)).unwrap(),
            PI / 2.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            element_gain(Angles::new(2.0, 0.0)),
            Err(Error::BackHemisphere { .. })
        ));
    }

    #[test]
    fn local_angles_invert_global_direction() {
        let links = StaticLinks::build(&cfg()).unwrap();
        for arr in [&links.tx, &links.ris] {
            let a = Angles::from_degrees(12.0, -7.0);
            let back = arr.local_angles(&arr.global_direction(a));
            assert_relative_eq!(back.azimuth, a.azimuth, epsilon = 1e-12);
            assert_relative_eq!(back.elevation, a.elevation, epsilon = 1e-12);
        }
    }

    #[test]
    fn bs_to_ris_distance() {
        let links = StaticLinks::build(&cfg()).unwrap();
        let d = (links.tx.center() - links.ris.center()).norm();
        assert_relative_eq!(d, (2.0f64 * 1.5 * 1.5).sqrt(), epsilon = 1e-12);
        assert!((d - 2.12).abs() < 0.01);
    }

    #[test]
    fn g_tx_entry_follows_free_space_law() {
        let c = cfg();
        let links = StaticLinks::build(&c).unwrap();
        for &(i, j, q) in &[(0usize, 0usize, 0usize), (37, 9, 13), (63, 14, 31)] {
            let pi = links.ris.element_position(i);
            let pj = links.tx.element_position(j);
            let d = pi - pj;
            let dist = d.norm();
            let g = element_gain(links.tx.local_angles(&d)).unwrap()
                * element_gain(links.ris.local_angles(&(-d))).unwrap();
            let f = links.freqs[q];
            let expect = g.sqrt() * SPEED_OF_LIGHT / (4.0 * PI * dist * f);
            assert_relative_eq!(links.g_tx[q][(i, j)].norm(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn reciprocity_of_path_loss() {
        // Same-layout tx and rx arrays at the same spot: G_rx must be G_tx^T.
        let links = StaticLinks::build(&cfg()).unwrap();
        for q in [0, 31] {
            let a = &links.g_tx[q];
            let b = &links.g_rx[q];
            for i in 0..a.nrows() {
                for j in 0..a.ncols() {
                    assert_relative_eq!(a[(i, j)].norm(), b[(j, i)].norm(), max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn doubling_distance_quarters_power() {
        let mut near = cfg();
        near.geometry.bs_tx_position = [-1.5, 1.5, 25.0];
        let mut far = cfg();
        far.geometry.bs_tx_position = [-3.0, 3.0, 25.0];
        far.geometry.bs_rx_position = far.geometry.bs_tx_position;
        // single-element arrays remove near-field spread
        for c in [&mut near, &mut far] {
            c.arrays.tx = ArrayLayout { cols: 1, rows: 1 };
            c.arrays.ris = ArrayLayout { cols: 1, rows: 1 };
        }
        let a = StaticLinks::build(&near).unwrap().g_tx[0][(0, 0)].norm_sqr();
        let b = StaticLinks::build(&far).unwrap().g_tx[0][(0, 0)].norm_sqr();
        assert_relative_eq!(a / b, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn coincident_elements_are_rejected() {
        let mut c = cfg();
        c.geometry.bs_tx_position = c.geometry.ris_position;
        c.arrays.tx = c.arrays.ris;
        assert!(StaticLinks::build(&c).is_err());
    }

    #[test]
    fn channels_are_finite_nonzero_and_deterministic() {
        let c = cfg();
        let user = Vector3::new(31.0, -27.0, 1.7);
        let a = build_channels(&c, user).unwrap();
        let b = build_channels(&c, user).unwrap();
        for q in 0..a.n_sub() {
            assert!(a.g_tx(q).iter().all(|v| v.is_finite() && v.norm() > 0.0));
            assert!(a.g_rx(q).iter().all(|v| v.is_finite() && v.norm() > 0.0));
            assert!(a.h_c[q].iter().all(|v| v.is_finite() && v.norm() > 0.0));
            assert_eq!(a.g_tx(q), b.g_tx(q));
            assert_eq!(a.h_c[q], b.h_c[q]);
        }
    }

    #[test]
    fn user_drops_stay_in_cuboid() {
        let c = cfg();
        let mut r = rng::stream(3, &[]);
        let n = 100_000;
        let mut mean = Vector3::zeros();
        for _ in 0..n {
            let u = drop_user(&mut r, &c);
            for k in 0..3 {
                assert!(u[k] >= c.geometry.user_min[k] && u[k] <= c.geometry.user_max[k]);
            }
            mean += u;
        }
        mean /= n as f64;
        for (m, e) in mean.iter().zip([30.0, -30.0, 1.75]) {
            assert!(((m - e) / e).abs() < 0.005, "{mean:?}");
        }
        let a = drop_user(&mut rng::stream(9, &[1]), &c);
        let b = drop_user(&mut rng::stream(9, &[1]), &c);
        assert_eq!(a, b);
    }
}
