//! Small-scale fading: direct Rayleigh channels, Rician RIS links with a
//! matrix-normal NLoS part, and the aggregated end-to-end channel.

use std::f64::consts::PI;

use rand::Rng;

use crate::correlation::SurfaceGeometry;
use crate::error::{Error, Result};
use crate::linalg::{c, cis, complex_normal_mat, complex_normal_vec, psd_sqrt, CMat, CVec};
use crate::network::Network;
use crate::scenario::{norm3, Geometry, LargeScale, Point, SystemConfig};

/// Deterministic LoS parts `H̄_m` (N x L) and `z̄_k` (N).
#[derive(Debug, Clone, Default)]
pub struct LoSComponents {
    pub h_bar: Vec<CMat>,
    pub z_bar: Vec<CVec>,
}

/// Planar-array response at the RIS towards direction `dir` (unit modulus).
pub fn ris_steering(surface: &SurfaceGeometry, dir: Point) -> CVec {
    let norm = norm3(dir);
    let u = [dir[0] / norm, dir[1] / norm, dir[2] / norm];
    let k = 2.0 * PI / surface.wavelength;
    let pos = surface.positions();
    CVec::from_iterator(
        pos.len(),
        pos.iter().map(|p| cis(k * (u[0] * p[0] + u[1] * p[1] + u[2] * p[2]))),
    )
}

/// ULA response at an AP for azimuth `theta`; spacing in wavelengths.
pub fn ula_steering(l: usize, spacing: f64, theta: f64) -> CVec {
    CVec::from_fn(l, |i, _| cis(2.0 * PI * spacing * i as f64 * theta.sin()))
}

pub fn azimuth(offset: Point) -> f64 {
    offset[1].atan2(offset[0])
}

/// `H̄_m = sqrt(β_m^LoS) a_RIS(AP m) a_AP(RIS)ᴴ`, `z̄_k = sqrt(β_k^LoS) a_RIS(UE k)`.
pub fn build_los_components(geom: &Geometry, large: &LargeScale, cfg: &SystemConfig) -> LoSComponents {
    let Some(surface) = cfg.surface() else {
        return LoSComponents::default();
    };
    let l = cfg.l_antennas;
    let h_bar = (0..geom.ap_positions.len())
        .map(|m| {
            let off = geom.ap_ris_offset(m);
            let to_ap = [-off[0], -off[1], -off[2]];
            let a_ris = ris_steering(&surface, to_ap);
            let a_ap = ula_steering(l, cfg.ap_spacing, azimuth(off));
            let (los, _) = large.beta_m_split(m);
            (&a_ris * a_ap.adjoint()) * c(los.sqrt(), 0.0)
        })
        .collect();
    let z_bar = (0..geom.ue_positions.len())
        .map(|k| {
            let (los, _) = large.beta_k_split(k);
            ris_steering(&surface, geom.ris_ue_offset(k)) * c(los.sqrt(), 0.0)
        })
        .collect();
    LoSComponents { h_bar, z_bar }
}

/// One coherence block of small-scale fading. Link `(m, k)` is stored at
/// index `m * K + k`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub m: usize,
    pub k: usize,
    pub g: Vec<CVec>,
    /// empty without RIS
    pub h: Vec<CMat>,
    /// empty without RIS
    pub z: Vec<CVec>,
    pub theta: Vec<f64>,
    pub o: Vec<CVec>,
    /// diagonal of Φ
    pub phi: CVec,
}

impl ChannelRealization {
    pub fn o(&self, m: usize, k: usize) -> &CVec {
        &self.o[m * self.k + k]
    }
}

/// `g + Hᴴ Φ z`.
pub fn aggregate_channel(g: &CVec, h: &CMat, phi: &CVec, z: &CVec) -> Result<CVec> {
    let (n, l) = h.shape();
    if g.len() != l || phi.len() != n || z.len() != n {
        return Err(Error::dim(
            "aggregate_channel",
            format!("g: {l}, Φ: {n}, z: {n}"),
            format!("g: {}, Φ: {}, z: {}", g.len(), phi.len(), z.len()),
        ));
    }
    Ok(g + h.ad_mul(&phi.component_mul(z)))
}

/// Square roots of every covariance needed to draw fading for one setup.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    m: usize,
    k: usize,
    l: usize,
    n: usize,
    sqrt_r_mk: Vec<CMat>,
    /// sqrt of the unit-diagonal RIS correlation
    sqrt_ris: CMat,
    /// sqrt of the unit-diagonal AP-side correlation of each AP–RIS channel
    sqrt_ap_ris: Vec<CMat>,
    nlos_amp_m: Vec<f64>,
    nlos_amp_k: Vec<f64>,
    h_bar: Vec<CMat>,
    z_bar: Vec<CVec>,
    phi: CVec,
}

impl ChannelSampler {
    pub fn new(net: &Network) -> Result<Self> {
        let cfg = &net.cfg;
        let (m, k, l) = (cfg.m_aps, cfg.k_ues, cfg.l_antennas);
        let sqrt_r_mk = net
            .r_mk
            .iter()
            .map(|r| psd_sqrt(r.matrix()))
            .collect::<Result<Vec<_>>>()?;
        let (n, sqrt_ris, sqrt_ap_ris, nlos_amp_m, nlos_amp_k, phi) = match &net.ris {
            Some(ris) => (
                ris.n(),
                psd_sqrt(ris.r.matrix())?,
                ris.r_ap_unit
                    .iter()
                    .map(|r| psd_sqrt(r.matrix()))
                    .collect::<Result<Vec<_>>>()?,
                (0..m).map(|i| net.large.beta_m_split(i).1.sqrt()).collect(),
                (0..k).map(|i| net.large.beta_k_split(i).1.sqrt()).collect(),
                ris.phi.clone(),
            ),
            None => (0, CMat::zeros(0, 0), Vec::new(), Vec::new(), Vec::new(), CVec::zeros(0)),
        };
        Ok(ChannelSampler {
            m,
            k,
            l,
            n,
            sqrt_r_mk,
            sqrt_ris,
            sqrt_ap_ris,
            nlos_amp_m,
            nlos_amp_k,
            h_bar: net.los.h_bar.clone(),
            z_bar: net.los.z_bar.clone(),
            phi,
        })
    }

    pub fn has_ris(&self) -> bool {
        self.n > 0
    }

    /// Draws one coherence block. Draw order: LoS phases, UE–RIS NLoS,
    /// AP–RIS NLoS, direct channels.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let (m_aps, k_ues, l, n) = (self.m, self.k, self.l, self.n);
        let theta: Vec<f64> = (0..k_ues).map(|_| rng.random_range(-PI..PI)).collect();

        let (h, z) = if n > 0 {
            let z: Vec<CVec> = (0..k_ues)
                .map(|k| {
                    let w = complex_normal_vec(n, rng);
                    &self.z_bar[k] * cis(theta[k]) + (&self.sqrt_ris * w) * c(self.nlos_amp_k[k], 0.0)
                })
                .collect();
            let h: Vec<CMat> = (0..m_aps)
                .map(|m| {
                    let w = complex_normal_mat(n, l, rng);
                    let h_tilde = (&self.sqrt_ris * w * &self.sqrt_ap_ris[m]) * c(self.nlos_amp_m[m], 0.0);
                    &self.h_bar[m] + h_tilde
                })
                .collect();
            (h, z)
        } else {
            (Vec::new(), Vec::new())
        };

        let g: Vec<CVec> = self
            .sqrt_r_mk
            .iter()
            .map(|s| s * complex_normal_vec(l, rng))
            .collect();

        let o = if n > 0 {
            let mut phi_z = CMat::zeros(n, k_ues);
            for (k, zk) in z.iter().enumerate() {
                phi_z.set_column(k, &self.phi.component_mul(zk));
            }
            let mut o = Vec::with_capacity(m_aps * k_ues);
            for (m, hm) in h.iter().enumerate() {
                let cascaded = hm.ad_mul(&phi_z);
                for k in 0..k_ues {
                    o.push(&g[m * k_ues + k] + cascaded.column(k));
                }
            }
            o
        } else {
            g.clone()
        };

        ChannelRealization {
            m: m_aps,
            k: k_ues,
            g,
            h,
            z,
            theta,
            o,
            phi: self.phi.clone(),
        }
    }
}

/// `vec(X)` with column stacking.
pub fn vec_columns(x: &CMat) -> CVec {
    CVec::from_column_slice(x.as_slice())
}

/// Draw from `CN(0, cov)` through the Hermitian square root.
pub fn sample_correlated<R: Rng + ?Sized>(sqrt_cov: &CMat, rng: &mut R) -> CVec {
    sqrt_cov * complex_normal_vec(sqrt_cov.ncols(), rng)
}

/// Sample covariance `(1/n) Σ x xᴴ` of zero-mean draws.
pub fn sample_covariance<'a>(draws: impl IntoIterator<Item = &'a CVec>, dim: usize) -> CMat {
    let mut acc = CMat::zeros(dim, dim);
    let mut count = 0usize;
    for x in draws {
        acc.ger(c(1.0, 0.0), x, &x.conjugate(), c(1.0, 0.0));
        count += 1;
    }
    acc / c(count.max(1) as f64, 0.0)
}
