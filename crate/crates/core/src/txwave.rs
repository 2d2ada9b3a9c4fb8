//! Beamformers, symbol draws and the per-subcarrier transmit vectors.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::complex_normal;
use crate::scene::{CVector, ChannelSet};

/// Unit-norm communication and sensing beamformers per subcarrier.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    pub comm: Vec<CVector>,
    pub sensing: Vec<CVector>,
}

/// Rotates `v` so that its first nonzero entry is real and positive.
fn fix_phase(v: &mut CVector) {
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-300).copied() {
        let rot = first.conj() / first.norm();
        v.apply(|z| *z *= rot);
    }
}

/// Dominant right singular vector of `g`, unit norm, fixed phase.
pub fn dominant_right_singular(g: &crate::scene::CMatrix) -> Result<CVector> {
    let gram = g.adjoint() * g;
    let eig = SymmetricEigen::new(gram);
    let (imax, &lmax) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::ZeroChannel("empty matrix".into()))?;
    if !(lmax > 0.0) {
        return Err(Error::ZeroChannel("transmit link matrix is zero".into()));
    }
    let mut v = eig.eigenvectors.column(imax).into_owned();
    v /= Complex64::from(v.norm());
    fix_phase(&mut v);
    Ok(v)
}

/// Channel-matched beamforming: `f_c` along the user channel, `f_s` along the
/// dominant right singular vector of the BS-to-RIS link.
pub fn matched_beamformers(channels: &ChannelSet) -> Result<BeamformerSet> {
    let mut comm = Vec::with_capacity(channels.n_sub());
    let mut sensing = Vec::with_capacity(channels.n_sub());
    for q in 0..channels.n_sub() {
        let h = &channels.h_c[q];
        let norm = h.norm();
        if !(norm > 0.0) {
            return Err(Error::ZeroChannel(format!("user channel on subcarrier {q}")));
        }
        comm.push(h / Complex64::from(norm));
        sensing.push(dominant_right_singular(channels.g_tx(q))?);
    }
    Ok(BeamformerSet { comm, sensing })
}

/// Symbols of one CPI, indexed `[q][n]`.
#[derive(Debug, Clone)]
pub struct SymbolBlock {
    pub comm: Vec<Vec<Complex64>>,
    pub sensing: Vec<Vec<Complex64>>,
    pub gamma: Vec<f64>,
}

/// Independent zero-mean complex Gaussian symbols with powers `1 - gamma_q`
/// and `gamma_q`.
pub fn draw_symbols<R: Rng + ?Sized>(rng: &mut R, gamma: &[f64], n_sym: usize) -> SymbolBlock {
    let mut comm = Vec::with_capacity(gamma.len());
    let mut sensing = Vec::with_capacity(gamma.len());
    for &g in gamma {
        let (ac, as_) = ((1.0 - g).max(0.0).sqrt(), g.max(0.0).sqrt());
        let mut c = Vec::with_capacity(n_sym);
        let mut s = Vec::with_capacity(n_sym);
        for _ in 0..n_sym {
            c.push(complex_normal(rng) * ac);
            s.push(complex_normal(rng) * as_);
        }
        comm.push(c);
        sensing.push(s);
    }
    SymbolBlock {
        comm,
        sensing,
        gamma: gamma.to_vec(),
    }
}

/// `p_q(n) = sqrt(P) (f_c x_c(n) + f_s x_s(n))`, indexed `[q][n]`.
pub fn transmit_signal(beams: &BeamformerSet, symbols: &SymbolBlock, power: f64) -> Vec<Vec<CVector>> {
    let amp = power.sqrt();
    beams
        .comm
        .iter()
        .zip(&beams.sensing)
        .zip(symbols.comm.iter().zip(&symbols.sensing))
        .map(|((fc, fs), (xc, xs))| {
            xc.iter()
                .zip(xs)
                .map(|(&c, &s)| (fc * c + fs * s) * Complex64::from(amp))
                .collect()
        })
        .collect()
}
