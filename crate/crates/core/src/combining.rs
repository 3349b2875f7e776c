//! Local receive combining at each AP.

use crate::error::{Error, Result};
use crate::linalg::{c, solve_hpd, CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombinerScheme {
    Mr,
    Lmmse,
}

impl CombinerScheme {
    pub fn label(self) -> &'static str {
        match self {
            CombinerScheme::Mr => "MR",
            CombinerScheme::Lmmse => "L-MMSE",
        }
    }
}

/// MR: `v = ô`.
pub fn mr_combiner(o_hat: &CVec) -> CVec {
    o_hat.clone()
}

/// `Σ_i p_i C_mi + σ² I`, the realization-independent part of the L-MMSE
/// system matrix at one AP.
pub fn lmmse_base(c_mats: &[&CMat], p: &[f64], sigma2: f64) -> CMat {
    let l = c_mats.first().map_or(0, |m| m.nrows());
    let mut base = CMat::identity(l, l) * c(sigma2, 0.0);
    for (cm, &pi) in c_mats.iter().zip(p) {
        base += *cm * c(pi, 0.0);
    }
    base
}

/// L-MMSE combiners for every UE at one AP:
/// `v_k = p_k (Σ_i p_i (ô_i ô_iᴴ + C_i) + σ² I)⁻¹ ô_k`, via one Cholesky
/// factorization. `base` is [`lmmse_base`].
pub fn lmmse_combiners_at_ap(o_hat: &[&CVec], base: &CMat, p: &[f64]) -> Result<Vec<CVec>> {
    let l = base.nrows();
    let k_ues = o_hat.len();
    let mut system = base.clone();
    let mut rhs = CMat::zeros(l, k_ues);
    for (k, oh) in o_hat.iter().enumerate() {
        if oh.len() != l {
            return Err(Error::dim("lmmse_combiner", l, oh.len()));
        }
        system.ger(c(p[k], 0.0), oh, &oh.conjugate(), c(1.0, 0.0));
        rhs.set_column(k, &(*oh * c(p[k], 0.0)));
    }
    let sol = solve_hpd(&system, &rhs, "lmmse_combiner")?;
    Ok((0..k_ues).map(|k| sol.column(k).into_owned()).collect())
}

/// L-MMSE combiner of UE `k` at one AP.
pub fn lmmse_combiner(k: usize, o_hat: &[&CVec], c_mats: &[&CMat], p: &[f64], sigma2: f64) -> Result<CVec> {
    if sigma2 <= 0.0 {
        return Err(Error::Domain("L-MMSE combining needs sigma2 > 0".into()));
    }
    let base = lmmse_base(c_mats, p, sigma2);
    let mut all = lmmse_combiners_at_ap(o_hat, &base, p)?;
    Ok(all.swap_remove(k))
}

/// `s̃ = vᴴ y`.
pub fn local_estimate(v: &CVec, y: &CVec) -> Result<C64> {
    if v.len() != y.len() {
        return Err(Error::dim("local_estimate", v.len(), y.len()));
    }
    Ok(v.dotc(y))
}
