//! Uplink SE under the use-and-then-forget bound with large-scale fading
//! decoding: Monte Carlo moments for any combiner and closed-form terms for
//! MR.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::channel::ChannelSampler;
use crate::combining::{lmmse_base, lmmse_combiners_at_ap, CombinerScheme};
use crate::error::Result;
use crate::linalg::{c, solve_hpd_vec, CMat, CVec, C64};
use crate::network::{trial_rng, Network};
use crate::statistics::real_trace;

/// Expectations entering the effective SINR of every UE.
///
/// `t[k * K + i]` is `T_ki` with `[T_ki]_{mn} = E{u_m u_n^*}`,
/// `u_m = v_mkᴴ o_mi`.
#[derive(Debug, Clone)]
pub struct UatfMoments {
    pub m: usize,
    pub k: usize,
    pub u_mean: Vec<CVec>,
    pub t: Vec<CMat>,
    pub d: Vec<DVector<f64>>,
}

impl UatfMoments {
    pub fn zeros(m: usize, k: usize) -> Self {
        UatfMoments {
            m,
            k,
            u_mean: vec![CVec::zeros(m); k],
            t: vec![CMat::zeros(m, m); k * k],
            d: vec![DVector::zeros(m); k],
        }
    }

    pub fn t(&self, k: usize, i: usize) -> &CMat {
        &self.t[k * self.k + i]
    }

    /// `Σ_i p_i T_ki − p_k E{u_kk} E{u_kk}ᴴ + σ² D_k`.
    pub fn interference_matrix(&self, p: &[f64], sigma2: f64, k: usize) -> CMat {
        let mut s = CMat::zeros(self.m, self.m);
        for (i, &pi) in p.iter().enumerate().take(self.k) {
            s += self.t(k, i) * c(pi, 0.0);
        }
        let u = &self.u_mean[k];
        s.ger(c(-p[k], 0.0), u, &u.conjugate(), c(1.0, 0.0));
        for m in 0..self.m {
            s[(m, m)] += c(sigma2 * self.d[k][m], 0.0);
        }
        s
    }

    fn add_scaled(&mut self, other: &UatfMoments, w: f64) {
        let cw = c(w, 0.0);
        for (a, b) in self.u_mean.iter_mut().zip(&other.u_mean) {
            a.axpy(cw, b, c(1.0, 0.0));
        }
        for (a, b) in self.t.iter_mut().zip(&other.t) {
            *a += b * cw;
        }
        for (a, b) in self.d.iter_mut().zip(&other.d) {
            a.axpy(w, b, 1.0);
        }
    }
}

/// LSFD vector `(Σ_i p_i T_ki − p_k E{u}E{u}ᴴ + σ² D_k)⁻¹ E{u_kk}`.
/// `None` when the system is singular (all-zero combiners).
pub fn lsfd_weights(moments: &UatfMoments, p: &[f64], sigma2: f64, k: usize) -> Option<CVec> {
    let s = moments.interference_matrix(p, sigma2, k);
    solve_hpd_vec(&s, &moments.u_mean[k], "lsfd_weights").ok()
}

/// Effective SINR for LSFD vector `a`:
/// `p_k |aᴴ E{u_kk}|² / aᴴ(Σ_i p_i T_ki − p_k E{u}E{u}ᴴ + σ² D_k) a`.
/// A non-positive denominator is degenerate and yields 0.
pub fn uatf_sinr(a: &CVec, moments: &UatfMoments, p: &[f64], sigma2: f64, k: usize) -> f64 {
    let num = p[k] * a.dotc(&moments.u_mean[k]).norm_sqr();
    let s = moments.interference_matrix(p, sigma2, k);
    let den = a.dotc(&(&s * a)).re;
    if num <= 0.0 || !(den > 0.0) || !den.is_finite() {
        return 0.0;
    }
    num / den
}

/// SINR with the optimal LSFD vector, and whether the evaluation was
/// degenerate.
pub fn optimal_sinr(moments: &UatfMoments, p: &[f64], sigma2: f64, k: usize) -> (f64, bool) {
    match lsfd_weights(moments, p, sigma2, k) {
        Some(a) => {
            let g = uatf_sinr(&a, moments, p, sigma2, k);
            (g, g == 0.0 && p[k] > 0.0)
        }
        None => (0.0, true),
    }
}

/// `(τ_u / τ_c) log2(1 + γ)`.
pub fn uatf_se(gamma: f64, tau_u: usize, tau_c: usize) -> f64 {
    tau_u as f64 / tau_c as f64 * (1.0 + gamma.max(0.0)).log2()
}

/// Monte Carlo moments with batch-means bookkeeping.
#[derive(Debug, Clone)]
pub struct MonteCarloMoments {
    pub scheme: CombinerScheme,
    pub moments: UatfMoments,
    /// per-batch means, in trial order
    pub batches: Vec<UatfMoments>,
    pub batch_sizes: Vec<usize>,
    pub n_trials: usize,
}

/// Standard error of a scalar statistic from its batch means.
pub fn batch_standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Standard error of a complex statistic: sqrt(se(re)² + se(im)²).
pub fn batch_standard_error_complex(values: &[C64]) -> f64 {
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    batch_standard_error(&re).hypot(batch_standard_error(&im))
}

pub const MC_BATCHES: usize = 20;

/// Trial `t` of `n` goes to batch `t * batches / n`.
fn batch_ranges(n: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    let b = batches.min(n).max(1);
    (0..b).map(|j| (j * n / b)..((j + 1) * n / b)).collect()
}

struct SchemeAcc {
    sums: UatfMoments,
}

/// Accumulates sample moments of `u_ki` over `n_fading` coherence blocks for
/// every requested combiner. All schemes see the same channel draws. Trials
/// are seeded individually and reduced batch by batch in a fixed order, so
/// results do not depend on the thread count.
pub fn mc_expectations(
    net: &Network,
    schemes: &[CombinerScheme],
    n_fading: usize,
) -> Result<Vec<MonteCarloMoments>> {
    let sampler = ChannelSampler::new(net)?;
    let (m_aps, k_ues) = (net.m(), net.k());
    let sigma2 = net.cfg.sigma2();
    let lmmse_bases: Vec<CMat> = if schemes.contains(&CombinerScheme::Lmmse) {
        (0..m_aps)
            .map(|m| {
                let cs: Vec<&CMat> = (0..k_ues).map(|k| &net.link(m, k).c).collect();
                lmmse_base(&cs, &net.p, sigma2)
            })
            .collect()
    } else {
        Vec::new()
    };

    let ranges = batch_ranges(n_fading, MC_BATCHES);
    let batch_results: Vec<Result<Vec<SchemeAcc>>> = ranges
        .par_iter()
        .map(|range| {
            let mut accs: Vec<SchemeAcc> = schemes
                .iter()
                .map(|_| SchemeAcc {
                    sums: UatfMoments::zeros(m_aps, k_ues),
                })
                .collect();
            for trial in range.clone() {
                let mut rng = trial_rng(net.cfg.seed, net.setup, trial);
                let (real, est) = net.draw_block(&sampler, &mut rng);
                for (scheme, acc) in schemes.iter().zip(accs.iter_mut()) {
                    let v: Vec<CVec> = match scheme {
                        CombinerScheme::Mr => est.o_hat.clone(),
                        CombinerScheme::Lmmse => {
                            let mut all = Vec::with_capacity(m_aps * k_ues);
                            for m in 0..m_aps {
                                let oh: Vec<&CVec> = (0..k_ues).map(|k| est.o_hat(m, k)).collect();
                                all.extend(lmmse_combiners_at_ap(&oh, &lmmse_bases[m], &net.p)?);
                            }
                            all
                        }
                    };
                    accumulate_trial(&mut acc.sums, &v, &real.o, m_aps, k_ues);
                }
            }
            Ok(accs)
        })
        .collect();

    let mut out = Vec::with_capacity(schemes.len());
    let mut per_batch: Vec<Vec<SchemeAcc>> = Vec::with_capacity(ranges.len());
    for r in batch_results {
        per_batch.push(r?);
    }
    for (s_idx, &scheme) in schemes.iter().enumerate() {
        let mut total = UatfMoments::zeros(m_aps, k_ues);
        let mut batches = Vec::with_capacity(ranges.len());
        for (range, accs) in ranges.iter().zip(&per_batch) {
            let sums = &accs[s_idx].sums;
            total.add_scaled(sums, 1.0);
            let mut mean = UatfMoments::zeros(m_aps, k_ues);
            mean.add_scaled(sums, 1.0 / range.len() as f64);
            batches.push(mean);
        }
        let mut moments = UatfMoments::zeros(m_aps, k_ues);
        moments.add_scaled(&total, 1.0 / n_fading as f64);
        out.push(MonteCarloMoments {
            scheme,
            moments,
            batches,
            batch_sizes: ranges.iter().map(|r| r.len()).collect(),
            n_trials: n_fading,
        });
    }
    Ok(out)
}

/// Adds one block's `u_ki`, `u_ki u_kiᴴ` and `||v_mk||²` to the sums.
fn accumulate_trial(sums: &mut UatfMoments, v: &[CVec], o: &[CVec], m_aps: usize, k_ues: usize) {
    let mut u = CVec::zeros(m_aps);
    for k in 0..k_ues {
        for m in 0..m_aps {
            sums.d[k][m] += v[m * k_ues + k].norm_squared();
        }
        for i in 0..k_ues {
            for m in 0..m_aps {
                u[m] = v[m * k_ues + k].dotc(&o[m * k_ues + i]);
            }
            if i == k {
                sums.u_mean[k] += &u;
            }
            sums.t[k * k_ues + i].ger(c(1.0, 0.0), &u, &u.conjugate(), c(1.0, 0.0));
        }
    }
}

/// Diagonal terms of the closed-form MR SINR, stored as vectors over APs.
#[derive(Debug, Clone)]
pub struct ClosedFormTerms {
    pub m: usize,
    pub k: usize,
    /// `z_mk = p̂_k τ_p tr(Ω_mk) + ||ō_mk||²`, per UE
    pub z: Vec<DVector<f64>>,
    /// non-coherent interference `ξ_{m,ki}`, index `k * K + i`
    pub xi: Vec<DVector<f64>>,
    /// pilot-contamination traces `tr(R^o_mi Ψ_mk⁻¹ R^o_mk)`, index `k * K + i`
    pub varpi: Vec<CVec>,
    /// `||ō_mk||²`, per UE
    pub j: Vec<DVector<f64>>,
}

impl ClosedFormTerms {
    pub fn xi(&self, k: usize, i: usize) -> &DVector<f64> {
        &self.xi[k * self.k + i]
    }

    pub fn varpi(&self, k: usize, i: usize) -> &CVec {
        &self.varpi[k * self.k + i]
    }
}

fn trace_product(a: &CMat, b: &CMat) -> C64 {
    a.component_mul(&b.transpose()).sum()
}

pub fn closed_form_terms(net: &Network) -> ClosedFormTerms {
    let (m_aps, k_ues) = (net.m(), net.k());
    let tau = net.cfg.tau_p as f64;
    let mut z = vec![DVector::zeros(m_aps); k_ues];
    let mut j = vec![DVector::zeros(m_aps); k_ues];
    let mut xi = vec![DVector::zeros(m_aps); k_ues * k_ues];
    let mut varpi = vec![CVec::zeros(m_aps); k_ues * k_ues];
    for m in 0..m_aps {
        for k in 0..k_ues {
            let lk = net.link(m, k);
            let scale = net.p_hat[k] * tau;
            let ob2 = lk.o_bar.norm_squared();
            z[k][m] = scale * real_trace(&lk.omega) + ob2;
            j[k][m] = ob2;
            let psi_r_k = &lk.psi_inv * lk.r_o();
            for i in 0..k_ues {
                let li = net.link(m, i);
                let ri = li.r_o();
                xi[k * k_ues + i][m] = scale * trace_product(ri, &lk.omega).re
                    + lk.o_bar.dotc(&(ri * &lk.o_bar)).re
                    + scale * li.o_bar.dotc(&(&lk.omega * &li.o_bar)).re
                    + lk.o_bar.dotc(&li.o_bar).norm_sqr();
                if net.assignment.shares_pilot(i, k) {
                    varpi[k * k_ues + i][m] = trace_product(ri, &psi_r_k);
                }
            }
        }
    }
    ClosedFormTerms { m: m_aps, k: k_ues, z, xi, varpi, j }
}

/// UatF moments implied by the closed-form terms under MR combining.
pub fn closed_form_moments(terms: &ClosedFormTerms, net: &Network) -> UatfMoments {
    let (m_aps, k_ues) = (terms.m, terms.k);
    let tau = net.cfg.tau_p as f64;
    let mut out = UatfMoments::zeros(m_aps, k_ues);
    for k in 0..k_ues {
        let zk = terms.z[k].map(|x| c(x, 0.0));
        out.u_mean[k] = zk.clone();
        out.d[k] = terms.z[k].clone();
        for i in 0..k_ues {
            let mut t = CMat::from_diagonal(&terms.xi(k, i).map(|x| c(x, 0.0)));
            if i == k {
                t.ger(c(1.0, 0.0), &zk, &zk, c(1.0, 0.0));
                for m in 0..m_aps {
                    t[(m, m)] -= c(terms.j[k][m].powi(2), 0.0);
                }
            } else if net.assignment.shares_pilot(i, k) {
                let w = terms.varpi(k, i);
                let amp = net.p_hat[k] * net.p_hat[i] * tau * tau;
                t.ger(c(amp, 0.0), w, &w.conjugate(), c(1.0, 0.0));
            }
            out.t[k * k_ues + i] = t;
        }
    }
    out
}

/// Closed-form MR SINR of UE `k` for LSFD vector `a`.
///
/// Numerator `p_k |tr(Aᴴ Z_k)|²`; denominator
/// `Σ_i p_i tr(Aᴴ Ξ_ki A) + Σ_{i∈P_k∖k} p_i Γ_ki + tr(Aᴴ(σ² Z_k − p_k J_k²) A)`
/// with `Γ_ki = p̂_k p̂_i τ_p² |tr(Aᴴ Δ_ki)|²` and `A = diag(a)`.
pub fn closed_form_sinr(
    terms: &ClosedFormTerms,
    a: &CVec,
    p: &[f64],
    p_hat: &[f64],
    tau_p: usize,
    sigma2: f64,
    coset: &[usize],
    k: usize,
) -> f64 {
    let m_aps = terms.m;
    let abs2: Vec<f64> = a.iter().map(|x| x.norm_sqr()).collect();
    let weighted = |v: &DVector<f64>| -> f64 { (0..m_aps).map(|m| abs2[m] * v[m]).sum() };

    let desired: C64 = (0..m_aps).map(|m| a[m].conj() * terms.z[k][m]).sum();
    let num = p[k] * desired.norm_sqr();

    let mut den = 0.0;
    for (i, &pi) in p.iter().enumerate().take(terms.k) {
        den += pi * weighted(terms.xi(k, i));
    }
    let tau = tau_p as f64;
    for &i in coset.iter().filter(|&&i| i != k) {
        let coh: C64 = (0..m_aps).map(|m| a[m].conj() * terms.varpi(k, i)[m]).sum();
        den += p[i] * p_hat[k] * p_hat[i] * tau * tau * coh.norm_sqr();
    }
    den += (0..m_aps)
        .map(|m| abs2[m] * (sigma2 * terms.z[k][m] - p[k] * terms.j[k][m].powi(2)))
        .sum::<f64>();

    if num <= 0.0 || !(den > 0.0) {
        return 0.0;
    }
    num / den
}

/// Closed-form SINR of every UE with LSFD weights optimized on the
/// closed-form moments. Second field flags degenerate UEs.
pub fn closed_form_sinrs(net: &Network) -> (Vec<f64>, Vec<bool>) {
    let terms = closed_form_terms(net);
    let moments = closed_form_moments(&terms, net);
    let sigma2 = net.cfg.sigma2();
    let mut gammas = Vec::with_capacity(net.k());
    let mut degenerate = Vec::with_capacity(net.k());
    for k in 0..net.k() {
        match lsfd_weights(&moments, &net.p, sigma2, k) {
            Some(a) => {
                let coset = net.assignment.coset(k);
                let g = closed_form_sinr(&terms, &a, &net.p, &net.p_hat, net.cfg.tau_p, sigma2, &coset, k);
                gammas.push(g);
                degenerate.push(g == 0.0 && net.p[k] > 0.0);
            }
            None => {
                gammas.push(0.0);
                degenerate.push(true);
            }
        }
    }
    (gammas, degenerate)
}

/// Optimal-LSFD SINR of every UE from Monte Carlo moments.
pub fn mc_sinrs(net: &Network, moments: &UatfMoments) -> (Vec<f64>, Vec<bool>) {
    let sigma2 = net.cfg.sigma2();
    (0..net.k()).map(|k| optimal_sinr(moments, &net.p, sigma2, k)).unzip()
}

/// Which pilot-sharing term enters the same-AP, pilot-sharing cross moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotSharingTerm {
    /// `|tr(R^o_mi Ψ⁻¹ R^o_mk)|²`, consistent with the coherent interference
    /// term of the SINR.
    MixedTrace,
    /// `|tr(R^o_mk Ψ⁻¹ R^o_mk)|²` without the `ō_miᴴ Ω ō_mi` term.
    SelfTrace,
}

/// The six (AP pair, UE pair) configurations of the interference moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossMomentCase {
    DistinctApsUnshared,
    DistinctApsPilotShared,
    DistinctApsSameUe,
    SameApSameUe,
    SameApUnshared,
    SameApPilotShared,
}

pub fn classify_cross_moment(net: &Network, m: usize, n: usize, k: usize, i: usize) -> CrossMomentCase {
    let shared = net.assignment.shares_pilot(i, k);
    match (m == n, i == k, shared) {
        (false, true, _) => CrossMomentCase::DistinctApsSameUe,
        (false, false, true) => CrossMomentCase::DistinctApsPilotShared,
        (false, false, false) => CrossMomentCase::DistinctApsUnshared,
        (true, true, _) => CrossMomentCase::SameApSameUe,
        (true, false, true) => CrossMomentCase::SameApPilotShared,
        (true, false, false) => CrossMomentCase::SameApUnshared,
    }
}

/// Closed form of `E{(ô_mkᴴ o_mi)^* (ô_nkᴴ o_ni)}` under MR.
pub fn closed_form_cross_moment(
    net: &Network,
    terms: &ClosedFormTerms,
    m: usize,
    n: usize,
    k: usize,
    i: usize,
    variant: PilotSharingTerm,
) -> C64 {
    let tau = net.cfg.tau_p as f64;
    let amp = (net.p_hat[k] * net.p_hat[i]).sqrt() * tau;
    let mean = |ap: usize| -> C64 {
        match classify_cross_moment(net, ap, ap, k, i) {
            CrossMomentCase::SameApSameUe => c(terms.z[k][ap], 0.0),
            CrossMomentCase::SameApPilotShared => terms.varpi(k, i)[ap] * amp,
            _ => c(0.0, 0.0),
        }
    };
    match classify_cross_moment(net, m, n, k, i) {
        CrossMomentCase::DistinctApsUnshared => c(0.0, 0.0),
        CrossMomentCase::DistinctApsPilotShared | CrossMomentCase::DistinctApsSameUe => mean(m).conj() * mean(n),
        CrossMomentCase::SameApSameUe => {
            c(terms.xi(k, k)[m] - terms.j[k][m].powi(2) + terms.z[k][m].powi(2), 0.0)
        }
        CrossMomentCase::SameApUnshared => c(terms.xi(k, i)[m], 0.0),
        CrossMomentCase::SameApPilotShared => match variant {
            PilotSharingTerm::MixedTrace => c(terms.xi(k, i)[m], 0.0) + c(mean(m).norm_sqr(), 0.0),
            PilotSharingTerm::SelfTrace => {
                let lk = net.link(m, k);
                let li = net.link(m, i);
                let scale = net.p_hat[k] * tau;
                let self_trace = trace_product(lk.r_o(), &(&lk.psi_inv * lk.r_o()));
                let without = terms.xi(k, i)[m] - scale * li.o_bar.dotc(&(&lk.omega * &li.o_bar)).re;
                c(without + amp * amp * self_trace.norm_sqr(), 0.0)
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_moments(u: f64, t: f64, d: f64) -> UatfMoments {
        let mut mo = UatfMoments::zeros(1, 1);
        mo.u_mean[0][0] = c(u, 0.0);
        mo.t[0][(0, 0)] = c(t, 0.0);
        mo.d[0][0] = d;
        mo
    }

    #[test]
    fn se_examples() {
        assert_eq!(uatf_se(1.0, 10, 10), 1.0);
        assert_eq!(uatf_se(0.0, 195, 200), 0.0);
        assert!((uatf_se(3.0, 195, 200) - 1.95).abs() < 1e-15);
    }

    #[test]
    fn deterministic_scalar_sinr() {
        let mo = scalar_moments(1.0, 1.0, 1.0);
        let a = CVec::from_element(1, c(1.0, 0.0));
        assert!((uatf_sinr(&a, &mo, &[1.0], 1.0, 0) - 1.0).abs() < 1e-15);
        assert_eq!(uatf_sinr(&a, &mo, &[0.0], 1.0, 0), 0.0);
        let a_opt = lsfd_weights(&mo, &[1.0], 1.0, 0).unwrap();
        let scaled = &a_opt * c(7.3, 0.0);
        let g1 = uatf_sinr(&a_opt, &mo, &[1.0], 1.0, 0);
        let g2 = uatf_sinr(&scaled, &mo, &[1.0], 1.0, 0);
        assert!((g1 - g2).abs() < 1e-14);
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let mo = UatfMoments::zeros(2, 1);
        let (g, deg) = optimal_sinr(&mo, &[1.0], 1.0, 0);
        assert_eq!(g, 0.0);
        assert!(deg);
    }

    #[test]
    fn batch_ranges_cover_all_trials() {
        let r = batch_ranges(103, 20);
        assert_eq!(r.len(), 20);
        assert_eq!(r.first().unwrap().start, 0);
        assert_eq!(r.last().unwrap().end, 103);
        assert!(r.windows(2).all(|w| w[0].end == w[1].start));
        assert_eq!(batch_ranges(5, 20).len(), 5);
    }

    #[test]
    fn standard_error_of_constant_is_zero() {
        assert_eq!(batch_standard_error(&[2.0; 10]), 0.0);
        assert!(batch_standard_error(&[1.0]).is_infinite());
    }
}
