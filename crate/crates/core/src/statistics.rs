//! Second-order statistics of the aggregated channel
//! `o = g + Hᴴ Φ z = ō e^{jθ} + õ`.

use crate::correlation::{CorrelationMatrix, NlosKroneckerCovariance};
use crate::error::{Error, Result};
use crate::linalg::{self, hermitian_part, quad_form, CMat, CVec};

/// `ō = H̄ᴴ Φ z̄`.
pub fn aggregated_los(h_bar: &CMat, phi: &CVec, z_bar: &CVec) -> Result<CVec> {
    let n = h_bar.nrows();
    if phi.len() != n || z_bar.len() != n {
        return Err(Error::dim(
            "aggregated_los",
            format!("Φ and z̄ of length {n}"),
            format!("Φ: {}, z̄: {}", phi.len(), z_bar.len()),
        ));
    }
    Ok(h_bar.ad_mul(&phi.component_mul(z_bar)))
}

/// `Φ X Φᴴ` for diagonal `Φ`.
fn rotate(phi: &CVec, x: &CMat) -> CMat {
    CMat::from_fn(x.nrows(), x.ncols(), |i, j| phi[i] * x[(i, j)] * phi[j].conj())
}

/// `Q¹ = E{H̃ᴴ Φ z̄ z̄ᴴ Φᴴ H̃}` and `Q² = E{H̃ᴴ Φ z̃ z̃ᴴ Φᴴ H̃}` by block traces of
/// the full `NL x NL` covariance of `vec(H̃)`.
///
/// Entry `(a, b)` is `tr(B · [R̃_m]_{(b, a)})` with `B = Φ z̄ z̄ᴴ Φᴴ`
/// (resp. `Φ R̃_k Φᴴ`): the block holding `E{h̃_b h̃_aᴴ}`.
pub fn q_matrices(
    phi: &CVec,
    z_bar: &CVec,
    r_tilde_k: &CMat,
    r_tilde_m: &NlosKroneckerCovariance,
) -> Result<(CMat, CMat)> {
    let (n, l) = (r_tilde_m.n, r_tilde_m.l);
    if phi.len() != n || z_bar.len() != n || r_tilde_k.shape() != (n, n) {
        return Err(Error::dim(
            "q_matrices",
            format!("N = {n}"),
            format!("Φ: {}, z̄: {}, R̃_k: {:?}", phi.len(), z_bar.len(), r_tilde_k.shape()),
        ));
    }
    let pz = phi.component_mul(z_bar);
    let rot_k = rotate(phi, r_tilde_k);
    let mut q1 = CMat::zeros(l, l);
    let mut q2 = CMat::zeros(l, l);
    for a in 0..l {
        for b in 0..l {
            let block = r_tilde_m.block(b, a);
            q1[(a, b)] = quad_form(&pz, &block, &pz);
            q2[(a, b)] = rot_k.component_mul(&block.transpose()).sum();
        }
    }
    Ok((q1, q2))
}

/// Kronecker shortcut for `R̃_m = (R_mᵀ ⊗ R_r)/(L N β_m)`:
/// `Q¹ = c₁ R_m`, `Q² = c₂ R_m` with
/// `c₁ = z̄ᴴ Φᴴ R_r Φ z̄ / (L N β_m)` and `c₂ = tr(Φ R̃_k Φᴴ R_r) / (L N β_m)`.
pub fn q_matrices_kronecker(
    phi: &CVec,
    z_bar: &CVec,
    r_tilde_k: &CMat,
    r_m: &CMat,
    r_r: &CMat,
    beta_m: f64,
) -> Result<(CMat, CMat)> {
    let n = r_r.nrows();
    let l = r_m.nrows();
    if phi.len() != n || z_bar.len() != n || r_tilde_k.shape() != (n, n) {
        return Err(Error::dim(
            "q_matrices_kronecker",
            format!("N = {n}"),
            format!("Φ: {}, z̄: {}, R̃_k: {:?}", phi.len(), z_bar.len(), r_tilde_k.shape()),
        ));
    }
    let scale = 1.0 / (l as f64 * n as f64 * beta_m);
    let pz = phi.component_mul(z_bar);
    let c1 = quad_form(&pz, r_r, &pz) * scale;
    let c2 = rotate(phi, r_tilde_k).component_mul(&r_r.transpose()).sum() * scale;
    Ok((r_m * c1, r_m * c2))
}

/// `R^o = R_mk + H̄ᴴ Φ R̃_k Φᴴ H̄ + Q¹ + Q²`.
pub fn aggregated_covariance(
    r_mk: &CMat,
    h_bar: &CMat,
    phi: &CVec,
    r_tilde_k: &CMat,
    q1: &CMat,
    q2: &CMat,
) -> Result<CorrelationMatrix> {
    let l = r_mk.nrows();
    let n = h_bar.nrows();
    if h_bar.ncols() != l || q1.shape() != (l, l) || q2.shape() != (l, l) || r_tilde_k.shape() != (n, n) || phi.len() != n {
        return Err(Error::dim(
            "aggregated_covariance",
            format!("L = {l}, N = {n}"),
            format!(
                "H̄: {:?}, Q¹: {:?}, Q²: {:?}, R̃_k: {:?}",
                h_bar.shape(),
                q1.shape(),
                q2.shape(),
                r_tilde_k.shape()
            ),
        ));
    }
    let los_nlos = h_bar.adjoint() * rotate(phi, r_tilde_k) * h_bar;
    let total = r_mk + los_nlos + q1 + q2;
    CorrelationMatrix::new(hermitian_part(&total))
}

/// Deterministic per-link quantities used by estimation and the closed form.
#[derive(Debug, Clone)]
pub struct LinkStatistics {
    /// aggregated LoS vector ō_mk
    pub o_bar: CVec,
    /// covariance R^o_mk of õ_mk
    pub r_o: CorrelationMatrix,
    /// Ψ_mk
    pub psi: CMat,
    pub psi_inv: CMat,
    /// Ω_mk = R^o Ψ⁻¹ R^o
    pub omega: CMat,
    /// estimation error covariance C_mk
    pub c: CMat,
    /// estimator gain sqrt(p̂_k) R^o Ψ⁻¹
    pub gain: CMat,
}

impl LinkStatistics {
    pub fn r_o(&self) -> &CMat {
        self.r_o.matrix()
    }
}

/// `tr(A)` as a real number for matrices known to be Hermitian.
pub(crate) fn real_trace(a: &CMat) -> f64 {
    linalg::trace(a).re
}
