//! One fully prepared setup: geometry, large-scale fading, correlation
//! matrices, LoS components, pilots, and per-link statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{build_los_components, LoSComponents};
use crate::correlation::{
    kron_nlos_covariance, local_scattering_correlation, ris_sinc_correlation, CorrelationMatrix,
    NlosKroneckerCovariance, SurfaceGeometry,
};
use crate::error::Result;
use crate::estimation::{assign_pilots, estimator_gain, psi_matrix, PilotAssignment};
use crate::linalg::{c, cis, CMat, CVec};
use crate::scenario::{build_large_scale, generate_geometry, ApCorrelation, Geometry, LargeScale, SystemConfig};
use crate::statistics::{aggregated_covariance, aggregated_los, q_matrices_kronecker, LinkStatistics};

/// SplitMix64 finalizer over a sequence of words; used to derive independent
/// seeds for setups and fading trials.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

pub fn setup_rng(seed: u64, setup: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0x5e7u64, setup as u64]))
}

pub fn trial_rng(seed: u64, setup: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0xfad, setup as u64, trial as u64]))
}

/// RIS-side quantities of a setup.
#[derive(Debug, Clone)]
pub struct RisModel {
    pub surface: SurfaceGeometry,
    /// unit-diagonal sinc correlation `R`
    pub r: CorrelationMatrix,
    /// diagonal of Φ
    pub phi: CVec,
    /// unit-diagonal AP-side correlation of each AP–RIS channel
    pub r_ap_unit: Vec<CorrelationMatrix>,
}

impl RisModel {
    pub fn n(&self) -> usize {
        self.surface.n()
    }

    /// AP-side matrix `R_m`, scaled so that `tr(R̃_m) = N L β_m^NLoS`.
    pub fn r_m(&self, m: usize, large: &LargeScale) -> CorrelationMatrix {
        let l = self.r_ap_unit[m].dim();
        let (_, nlos) = large.beta_m_split(m);
        self.r_ap_unit[m].scaled(self.n() as f64 * l as f64 * nlos)
    }

    /// RIS-side matrix `R_r = β_m R`.
    pub fn r_r(&self, m: usize, large: &LargeScale) -> CorrelationMatrix {
        self.r.scaled(large.beta_m[m])
    }

    /// `R̃_k = β_k^NLoS R`.
    pub fn r_tilde_k(&self, k: usize, large: &LargeScale) -> CorrelationMatrix {
        let (_, nlos) = large.beta_k_split(k);
        self.r.scaled(nlos)
    }

    /// Full `NL x NL` covariance of `vec(H̃_m)`.
    pub fn r_tilde_m(&self, m: usize, large: &LargeScale) -> Result<NlosKroneckerCovariance> {
        kron_nlos_covariance(&self.r_m(m, large), &self.r_r(m, large), large.beta_m[m])
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    pub cfg: SystemConfig,
    pub setup: usize,
    pub geometry: Geometry,
    pub large: LargeScale,
    /// AP–UE correlation per link, index `m * K + k`
    pub r_mk: Vec<CorrelationMatrix>,
    pub ris: Option<RisModel>,
    pub los: LoSComponents,
    pub assignment: PilotAssignment,
    /// per-link statistics, index `m * K + k`
    pub links: Vec<LinkStatistics>,
    /// per-UE pilot powers (mW)
    pub p_hat: Vec<f64>,
    /// per-UE data powers (mW)
    pub p: Vec<f64>,
}

fn ap_correlation(cfg: &SystemConfig, beta: f64, theta: f64) -> Result<CorrelationMatrix> {
    match cfg.ap_correlation {
        ApCorrelation::Uncorrelated => Ok(CorrelationMatrix::identity(cfg.l_antennas).scaled(beta)),
        ApCorrelation::LocalScattering => {
            local_scattering_correlation(beta, theta, cfg.asd(), cfg.l_antennas, cfg.ap_spacing)
        }
    }
}

impl Network {
    /// Draws setup `setup` of `cfg` and prepares all deterministic statistics.
    pub fn build(cfg: &SystemConfig, setup: usize) -> Result<Network> {
        cfg.validate()?;
        let mut rng = setup_rng(cfg.seed, setup);
        let geometry = generate_geometry(cfg, &mut rng);
        let large = build_large_scale(&geometry, cfg, &mut rng)?;
        Self::from_parts(cfg, setup, geometry, large)
    }

    /// Prepares statistics for a given geometry and large-scale fading.
    pub fn from_parts(cfg: &SystemConfig, setup: usize, geometry: Geometry, large: LargeScale) -> Result<Network> {
        let (m_aps, k_ues) = (cfg.m_aps, cfg.k_ues);
        let mut r_mk = Vec::with_capacity(m_aps * k_ues);
        for m in 0..m_aps {
            for k in 0..k_ues {
                let off = geometry.ap_ue_offset(m, k);
                r_mk.push(ap_correlation(cfg, large.beta_mk[(m, k)], crate::channel::azimuth(off))?);
            }
        }
        let ris = match cfg.surface() {
            Some(surface) => {
                let r = ris_sinc_correlation(&surface)?;
                let r_ap_unit = (0..m_aps)
                    .map(|m| ap_correlation(cfg, 1.0, crate::channel::azimuth(geometry.ap_ris_offset(m))))
                    .collect::<Result<Vec<_>>>()?;
                Some(RisModel {
                    surface,
                    r,
                    phi: CVec::from_element(surface.n(), cis(cfg.phase_shift)),
                    r_ap_unit,
                })
            }
            None => None,
        };
        let los = build_los_components(&geometry, &large, cfg);
        let assignment = assign_pilots(k_ues, cfg.tau_p)?;
        let p_hat = vec![cfg.p_hat(); k_ues];
        let p = vec![cfg.p(); k_ues];

        let mut net = Network {
            cfg: cfg.clone(),
            setup,
            geometry,
            large,
            r_mk,
            ris,
            los,
            assignment,
            links: Vec::new(),
            p_hat,
            p,
        };
        net.links = net.compute_link_statistics()?;
        Ok(net)
    }

    pub fn m(&self) -> usize {
        self.cfg.m_aps
    }

    pub fn k(&self) -> usize {
        self.cfg.k_ues
    }

    pub fn l(&self) -> usize {
        self.cfg.l_antennas
    }

    pub fn link(&self, m: usize, k: usize) -> &LinkStatistics {
        &self.links[m * self.k() + k]
    }

    /// `ō_mk` and `R^o_mk` for one link.
    pub fn aggregated_moments(&self, m: usize, k: usize) -> Result<(CVec, CorrelationMatrix)> {
        let r_mk = self.r_mk[m * self.k() + k].matrix();
        let Some(ris) = &self.ris else {
            return Ok((CVec::zeros(self.l()), self.r_mk[m * self.k() + k].clone()));
        };
        let h_bar = &self.los.h_bar[m];
        let z_bar = &self.los.z_bar[k];
        let o_bar = aggregated_los(h_bar, &ris.phi, z_bar)?;
        let r_tilde_k = ris.r_tilde_k(k, &self.large);
        let (q1, q2) = q_matrices_kronecker(
            &ris.phi,
            z_bar,
            r_tilde_k.matrix(),
            ris.r_m(m, &self.large).matrix(),
            ris.r_r(m, &self.large).matrix(),
            self.large.beta_m[m],
        )?;
        let r_o = aggregated_covariance(r_mk, h_bar, &ris.phi, r_tilde_k.matrix(), &q1, &q2)?;
        Ok((o_bar, r_o))
    }

    fn compute_link_statistics(&self) -> Result<Vec<LinkStatistics>> {
        let (m_aps, k_ues) = (self.m(), self.k());
        let tau_p = self.cfg.tau_p;
        let sigma2 = self.cfg.sigma2();
        let mut moments = Vec::with_capacity(m_aps * k_ues);
        for m in 0..m_aps {
            for k in 0..k_ues {
                moments.push(self.aggregated_moments(m, k)?);
            }
        }
        let mut links = Vec::with_capacity(m_aps * k_ues);
        for m in 0..m_aps {
            for k in 0..k_ues {
                let coset = self.assignment.coset(k);
                let r_coset: Vec<&CMat> = coset.iter().map(|&i| moments[m * k_ues + i].1.matrix()).collect();
                let psi = psi_matrix(&coset, &self.p_hat, tau_p, &r_coset, sigma2)?;
                let (o_bar, r_o) = moments[m * k_ues + k].clone();
                let (gain, psi_inv) = estimator_gain(r_o.matrix(), &psi, self.p_hat[k])?;
                let omega = r_o.matrix() * &psi_inv * r_o.matrix();
                let omega = crate::linalg::hermitian_part(&omega);
                let err = r_o.matrix() - &omega * c(self.p_hat[k] * tau_p as f64, 0.0);
                links.push(LinkStatistics {
                    o_bar,
                    r_o,
                    psi,
                    psi_inv,
                    omega,
                    c: crate::linalg::hermitian_part(&err),
                    gain,
                });
            }
        }
        Ok(links)
    }
}

use crate::channel::{ChannelRealization, ChannelSampler};
use crate::estimation::{pilot_projection, EstimateBundle};

impl Network {
    /// Phase-aware MMSE estimates for one block given the despread pilots.
    pub fn estimate(&self, real: &ChannelRealization, y: &[CVec]) -> EstimateBundle {
        let (m_aps, k_ues) = (self.m(), self.k());
        let tau = self.cfg.tau_p as f64;
        let mut o_hat = Vec::with_capacity(m_aps * k_ues);
        let phases: Vec<_> = real.theta.iter().map(|&t| cis(t)).collect();
        for m in 0..m_aps {
            // ȳ depends only on the pilot, not on which coset member asks
            let mut y_bar = vec![CVec::zeros(self.l()); self.assignment.tau_p];
            for i in 0..k_ues {
                let amp = phases[i] * (self.p_hat[i].sqrt() * tau);
                y_bar[self.assignment.pilot(i)].axpy(amp, &self.link(m, i).o_bar, c(1.0, 0.0));
            }
            for k in 0..k_ues {
                let link = self.link(m, k);
                let innov = &y[m * k_ues + k] - &y_bar[self.assignment.pilot(k)];
                o_hat.push(&link.o_bar * phases[k] + &link.gain * innov);
            }
        }
        EstimateBundle { m: m_aps, k: k_ues, o_hat }
    }

    /// Draws one coherence block and its channel estimates.
    pub fn draw_block<R: rand::Rng + ?Sized>(
        &self,
        sampler: &ChannelSampler,
        rng: &mut R,
    ) -> (ChannelRealization, EstimateBundle) {
        let real = sampler.sample(rng);
        let y = pilot_projection(&real, &self.assignment, &self.p_hat, self.cfg.pilot_noise_var(), rng);
        let est = self.estimate(&real, &y);
        (real, est)
    }
}
