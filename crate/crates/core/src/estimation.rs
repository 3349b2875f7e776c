//! Pilot assignment and the phase-aware MMSE estimator of the aggregated
//! channel.

use rand::Rng;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{c, cis, complex_normal_vec, inverse_hpd, CMat, CVec};

/// Which of the `tau_p` orthogonal pilots each UE sends. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    pub tau_p: usize,
    pilot: Vec<usize>,
}

impl PilotAssignment {
    pub fn from_indices(tau_p: usize, pilot: Vec<usize>) -> Result<Self> {
        if tau_p == 0 {
            return Err(Error::Domain("tau_p must be at least 1".into()));
        }
        if let Some(bad) = pilot.iter().find(|&&t| t >= tau_p) {
            return Err(Error::Domain(format!("pilot index {bad} outside 0..{tau_p}")));
        }
        Ok(PilotAssignment { tau_p, pilot })
    }

    pub fn k(&self) -> usize {
        self.pilot.len()
    }

    pub fn pilot(&self, k: usize) -> usize {
        self.pilot[k]
    }

    pub fn shares_pilot(&self, i: usize, k: usize) -> bool {
        self.pilot[i] == self.pilot[k]
    }

    /// `P_k`: every UE using the pilot of `k`, including `k`.
    pub fn coset(&self, k: usize) -> Vec<usize> {
        (0..self.k()).filter(|&i| self.shares_pilot(i, k)).collect()
    }
}

/// Round-robin: UE `k` (0-based) gets pilot `k mod tau_p`.
pub fn assign_pilots(k_ues: usize, tau_p: usize) -> Result<PilotAssignment> {
    if tau_p == 0 {
        return Err(Error::Domain("tau_p must be at least 1".into()));
    }
    PilotAssignment::from_indices(tau_p, (0..k_ues).map(|k| k % tau_p).collect())
}

/// Despread pilot observations `y^p_mk = Y^p_m φ_k^*` for every link.
///
/// UEs on the same pilot see the same observation; one noise vector with
/// covariance `noise_var * I` is drawn per (AP, pilot).
pub fn pilot_projection<R: Rng + ?Sized>(
    real: &ChannelRealization,
    assignment: &PilotAssignment,
    p_hat: &[f64],
    noise_var: f64,
    rng: &mut R,
) -> Vec<CVec> {
    let (m_aps, k_ues) = (real.m, real.k);
    let l = real.o.first().map_or(0, |o| o.len());
    let tau = assignment.tau_p as f64;
    let amp: Vec<f64> = p_hat.iter().map(|p| p.sqrt() * tau).collect();
    let noise_amp = c(noise_var.sqrt(), 0.0);
    let mut out = Vec::with_capacity(m_aps * k_ues);
    for m in 0..m_aps {
        let mut per_pilot: Vec<CVec> = (0..assignment.tau_p)
            .map(|_| complex_normal_vec(l, rng) * noise_amp)
            .collect();
        for k in 0..k_ues {
            per_pilot[assignment.pilot(k)].axpy(c(amp[k], 0.0), real.o(m, k), c(1.0, 0.0));
        }
        for k in 0..k_ues {
            out.push(per_pilot[assignment.pilot(k)].clone());
        }
    }
    out
}

/// `Ψ = Σ_{i∈P_k} p̂_i τ_p R^o_i + σ² I`; `r_o` lists the coset members'
/// covariances in the order of `coset`.
pub fn psi_matrix(coset: &[usize], p_hat: &[f64], tau_p: usize, r_o: &[&CMat], sigma2: f64) -> Result<CMat> {
    if coset.len() != r_o.len() || r_o.is_empty() {
        return Err(Error::dim("psi_matrix", coset.len(), r_o.len()));
    }
    let l = r_o[0].nrows();
    let mut psi = CMat::identity(l, l) * c(sigma2, 0.0);
    for (&i, r) in coset.iter().zip(r_o) {
        psi += *r * c(p_hat[i] * tau_p as f64, 0.0);
    }
    Ok(psi)
}

/// `ȳ^p = Σ_{i∈P_k} sqrt(p̂_i) τ_p ō_i e^{jθ_i}`.
pub fn los_pilot_mean(coset: &[usize], p_hat: &[f64], tau_p: usize, o_bar: &[&CVec], theta: &[f64]) -> CVec {
    let l = o_bar.first().map_or(0, |o| o.len());
    let mut acc = CVec::zeros(l);
    for (&i, ob) in coset.iter().zip(o_bar) {
        acc.axpy(cis(theta[i]) * (p_hat[i].sqrt() * tau_p as f64), ob, c(1.0, 0.0));
    }
    acc
}

/// `ô = ō e^{jθ} + sqrt(p̂) R^o Ψ⁻¹ (y − ȳ)`.
pub fn mmse_estimate(
    y: &CVec,
    y_bar: &CVec,
    o_bar: &CVec,
    theta: f64,
    p_hat: f64,
    r_o: &CMat,
    psi: &CMat,
) -> Result<CVec> {
    let psi_inv = inverse_hpd(psi, "mmse_estimate")?;
    Ok(o_bar * cis(theta) + (r_o * psi_inv * (y - y_bar)) * c(p_hat.sqrt(), 0.0))
}

/// Estimator gain `sqrt(p̂) R^o Ψ⁻¹` and `Ψ⁻¹`.
pub fn estimator_gain(r_o: &CMat, psi: &CMat, p_hat: f64) -> Result<(CMat, CMat)> {
    let psi_inv = inverse_hpd(psi, "estimator_gain")?;
    Ok(((r_o * &psi_inv) * c(p_hat.sqrt(), 0.0), psi_inv))
}

/// MMSE estimates `ô_mk` for one coherence block.
#[derive(Debug, Clone)]
pub struct EstimateBundle {
    pub m: usize,
    pub k: usize,
    pub o_hat: Vec<CVec>,
}

impl EstimateBundle {
    pub fn o_hat(&self, m: usize, k: usize) -> &CVec {
        &self.o_hat[m * self.k + k]
    }

    /// `õ = o − ô` for the realization that produced the estimates.
    pub fn error(&self, real: &ChannelRealization, m: usize, k: usize) -> CVec {
        real.o(m, k) - self.o_hat(m, k)
    }
}
