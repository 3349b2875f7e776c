mod common;

use common::{placed_network, small_config};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_cellfree::channel::{vec_columns, ChannelSampler};
use ris_cellfree::combining::{lmmse_base, lmmse_combiners_at_ap, CombinerScheme};
use ris_cellfree::correlation::{
    kron_nlos_covariance, local_scattering_correlation, ris_sinc_correlation, sinc_correlation_from_positions,
    CorrelationMatrix, SurfaceGeometry,
};
use ris_cellfree::estimation::pilot_projection;
use ris_cellfree::linalg::{
    c, certify_psd, cis, complex_normal_mat, frobenius_rel_err, hermitian_asymmetry, max_abs, min_eigenvalue, trace,
};
use ris_cellfree::network::{trial_rng, Network};
use ris_cellfree::scenario::ris_link_pathloss;
use ris_cellfree::se::{mc_expectations, mc_sinrs};
use ris_cellfree::statistics::{q_matrices, q_matrices_kronecker};
use ris_cellfree::{CMat, CVec, C64};

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let x = complex_normal_mat(n, n + 1, rng);
    &x * x.adjoint()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn local_scattering_is_certified(l in 1usize..10, theta in -3.1..3.1f64, asd_deg in 0.0..30.0f64,
                                     beta in 1e-12..10.0f64) {
        let r = local_scattering_correlation(beta, theta, asd_deg.to_radians(), l, 0.5).unwrap();
        let m = r.matrix();
        for a in 0..l {
            prop_assert!((m[(a, a)].re - beta).abs() <= 1e-12 * beta);
            for b in 0..l {
                prop_assert_eq!(m[(a, b)], m[(b, a)].conj());
            }
        }
        prop_assert!(certify_psd(m).is_ok());
    }

    #[test]
    fn sinc_correlation_properties(n_h in 1usize..7, n_v in 1usize..7, d in 0.05..1.5f64,
                                   shift in -50.0..50.0f64) {
        let g = SurfaceGeometry::with_spacing(n_h, n_v, d, 0.15).unwrap();
        let r = ris_sinc_correlation(&g).unwrap();
        prop_assert_eq!(trace(r.matrix()).re, (n_h * n_v) as f64);
        prop_assert!(certify_psd(r.matrix()).is_ok());
        let shifted: Vec<[f64; 3]> = g.positions().iter().map(|p| [p[0] + shift, p[1] - shift, p[2] + 0.5 * shift]).collect();
        let again = sinc_correlation_from_positions(&shifted, 0.15);
        let base = sinc_correlation_from_positions(&g.positions(), 0.15);
        prop_assert!((again - base).abs().max() <= 1e-12);
    }

    #[test]
    fn kronecker_trace_identity(seed in 0u64..10_000, l in 1usize..4, n in 1usize..6, beta in 1e-6..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r_m = CorrelationMatrix::new(random_psd(l, &mut rng)).unwrap();
        let r_r = CorrelationMatrix::new(random_psd(n, &mut rng)).unwrap();
        let k = kron_nlos_covariance(&r_m, &r_r, beta).unwrap();
        let want = r_m.trace() * r_r.trace() / (l as f64 * n as f64 * beta);
        prop_assert!((trace(k.matrix()).re - want).abs() <= 1e-10 * want.abs());
    }

    #[test]
    fn ris_pathloss_decreasing(d in 0.1..5000.0f64, step in 1e-3..100.0f64, shadow in -20.0..20.0f64) {
        prop_assert!(ris_link_pathloss(d + step, shadow).unwrap() < ris_link_pathloss(d, shadow).unwrap());
    }

    #[test]
    fn q_matrices_paths_agree_and_are_psd(seed in 0u64..10_000, l in 1usize..4, n in 1usize..6, alpha in -3.1..3.1f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r_m = CorrelationMatrix::new(random_psd(l, &mut rng)).unwrap();
        let r_r = CorrelationMatrix::new(random_psd(n, &mut rng)).unwrap();
        let beta = rng.random_range(0.1..2.0);
        let r_k = random_psd(n, &mut rng);
        let phi = CVec::from_fn(n, |_, _| cis(rng.random_range(-3.1..3.1)));
        let z_bar = CVec::from_fn(n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let full = kron_nlos_covariance(&r_m, &r_r, beta).unwrap();
        let (b1, b2) = q_matrices(&phi, &z_bar, &r_k, &full).unwrap();
        let (k1, k2) = q_matrices_kronecker(&phi, &z_bar, &r_k, r_m.matrix(), r_r.matrix(), beta).unwrap();
        prop_assert!(frobenius_rel_err(&k1, &b1) <= 1e-10);
        prop_assert!(frobenius_rel_err(&k2, &b2) <= 1e-10);
        for q in [&b1, &b2] {
            prop_assert!(hermitian_asymmetry(q) <= 1e-10 * max_abs(q).max(1e-300));
            prop_assert!(min_eigenvalue(q) >= -1e-10 * max_abs(q));
        }
        // a global phase on the surface changes nothing
        let rot = &phi * cis(alpha);
        let (r1, r2) = q_matrices(&rot, &z_bar, &r_k, &full).unwrap();
        prop_assert!(frobenius_rel_err(&r1, &b1) <= 1e-10);
        prop_assert!(frobenius_rel_err(&r2, &b2) <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn error_covariance_psd_and_monotone_in_noise(seed in 0u64..1000, tau_p in 1usize..4, extra_db in 1.0..30.0f64) {
        let cfg = small_config(2, 4, 3, 3, 2, tau_p, seed);
        let net = Network::build(&cfg, 0).unwrap();
        let mut noisy_cfg = cfg.clone();
        noisy_cfg.sigma2_dbm += extra_db;
        let noisy = Network::build(&noisy_cfg, 0).unwrap();
        for m in 0..net.m() {
            for k in 0..net.k() {
                let (a, b) = (net.link(m, k), noisy.link(m, k));
                prop_assert!(certify_psd(&a.c).is_ok());
                prop_assert!(trace(&b.c).re >= trace(&a.c).re * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn direct_and_cascaded_draws_match_their_covariances() {
    let cfg = small_config(2, 2, 2, 2, 2, 1, 51);
    let net = Network::build(&cfg, 0).unwrap();
    let sampler = ChannelSampler::new(&net).unwrap();
    let ris = net.ris.as_ref().unwrap();
    let n_draws = 100_000;
    let (l, n) = (net.l(), ris.n());
    let mut g_acc = CMat::zeros(l, l);
    let mut h_acc = CMat::zeros(n * l, n * l);
    let mut row_acc = CMat::zeros(n, n);
    let mut col_acc = CMat::zeros(l, l);
    for t in 0..n_draws {
        let real = sampler.sample(&mut trial_rng(cfg.seed, 0, t));
        let g = &real.g[0];
        g_acc.ger(c(1.0, 0.0), g, &g.conjugate(), c(1.0, 0.0));
        let h_tilde = &real.h[0] - &net.los.h_bar[0];
        let v = vec_columns(&h_tilde);
        h_acc.ger(c(1.0, 0.0), &v, &v.conjugate(), c(1.0, 0.0));
        row_acc += &h_tilde * h_tilde.adjoint();
        col_acc += h_tilde.transpose() * h_tilde.conjugate();
    }
    let inv = c(1.0 / n_draws as f64, 0.0);
    assert!(frobenius_rel_err(&(g_acc * inv), net.r_mk[0].matrix()) < 0.05);
    let full = ris.r_tilde_m(0, &net.large).unwrap();
    assert!(frobenius_rel_err(&(h_acc * inv), full.matrix()) < 0.05);
    // matrix-normal structure: row covariance ∝ R_r, column covariance ∝ R_mᵀ
    let row = row_acc * inv;
    let col = col_acc * inv;
    let r_r = ris.r_r(0, &net.large);
    let r_m = ris.r_m(0, &net.large);
    let row_ref = r_r.matrix() * c(trace(&row).re / r_r.trace(), 0.0);
    let col_ref = r_m.matrix().transpose() * c(trace(&col).re / r_m.trace(), 0.0);
    assert!(frobenius_rel_err(&row, &row_ref) < 0.05);
    assert!(frobenius_rel_err(&col, &col_ref) < 0.05);
}

#[test]
fn aggregated_channel_mean_is_rotating_los() {
    let cfg = small_config(1, 1, 2, 3, 3, 1, 52);
    let net = placed_network(&cfg, &[[480.0, 500.0]], &[[520.0, 510.0]]);
    let sampler = ChannelSampler::new(&net).unwrap();
    let link = net.link(0, 0);
    let n_draws = 20_000;
    let mut sum = CVec::zeros(2);
    let mut second = 0.0;
    for t in 0..n_draws {
        let real = sampler.sample(&mut trial_rng(cfg.seed, 0, t));
        let dev = real.o(0, 0) - &link.o_bar * cis(real.theta[0]);
        second += dev.norm_squared();
        sum += dev;
    }
    let mean = sum / c(n_draws as f64, 0.0);
    let sd = (second / n_draws as f64 / n_draws as f64).sqrt();
    assert!(mean.norm() <= 3.0 * sd, "{} vs {sd}", mean.norm());
}

#[test]
fn pilot_observation_covariance() {
    let cfg = small_config(1, 3, 2, 2, 2, 2, 53);
    let net = placed_network(&cfg, &[[480.0, 500.0]], &[[460.0, 512.0], [548.0, 492.0], [505.0, 455.0]]);
    let sampler = ChannelSampler::new(&net).unwrap();
    let tau = cfg.tau_p as f64;
    let n_draws = 100_000;
    let mut acc = CMat::zeros(2, 2);
    for t in 0..n_draws {
        let mut rng = trial_rng(cfg.seed, 0, t);
        let real = sampler.sample(&mut rng);
        let y = pilot_projection(&real, &net.assignment, &net.p_hat, cfg.pilot_noise_var(), &mut rng);
        let mut dev = y[0].clone();
        for i in net.assignment.coset(0) {
            dev -= &net.link(0, i).o_bar * (cis(real.theta[i]) * (net.p_hat[i].sqrt() * tau));
        }
        acc.ger(c(1.0, 0.0), &dev, &dev.conjugate(), c(1.0, 0.0));
    }
    acc /= c(n_draws as f64, 0.0);
    let mut want = CMat::identity(2, 2) * c(cfg.sigma2() * tau, 0.0);
    for i in net.assignment.coset(0) {
        want += net.link(0, i).r_o() * c(net.p_hat[i] * tau * tau, 0.0);
    }
    assert!(frobenius_rel_err(&acc, &want) < 0.05);
    // with despread noise this is exactly τ_p Ψ
    assert!(frobenius_rel_err(&want, &(&net.link(0, 0).psi * c(tau, 0.0))) < 1e-12);
}

/// `E{|√p_k s_k − vᴴ y|² | {ô}}` for the conditional model given the estimates.
fn conditional_mse(v: &CVec, k: usize, o_hat: &[&CVec], c_mats: &[&CMat], p: &[f64], sigma2: f64) -> f64 {
    let l = v.len();
    let mut a = CMat::identity(l, l) * c(sigma2, 0.0);
    for i in 0..o_hat.len() {
        a += (o_hat[i] * o_hat[i].adjoint() + c_mats[i]) * c(p[i], 0.0);
    }
    p[k] - 2.0 * p[k] * v.dotc(o_hat[k]).re + v.dotc(&(&a * v)).re
}

#[test]
fn lmmse_combiner_is_a_local_minimum() {
    let cfg = small_config(1, 4, 3, 2, 2, 2, 54);
    let net = Network::build(&cfg, 0).unwrap();
    let sampler = ChannelSampler::new(&net).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for t in 0..5 {
        let (_, est) = net.draw_block(&sampler, &mut trial_rng(cfg.seed, 0, t));
        let oh: Vec<&CVec> = (0..net.k()).map(|k| est.o_hat(0, k)).collect();
        let cs: Vec<&CMat> = (0..net.k()).map(|k| &net.link(0, k).c).collect();
        let base = lmmse_base(&cs, &net.p, cfg.sigma2());
        let v = lmmse_combiners_at_ap(&oh, &base, &net.p).unwrap();
        for k in 0..net.k() {
            let best = conditional_mse(&v[k], k, &oh, &cs, &net.p, cfg.sigma2());
            for _ in 0..100 {
                let dir = CVec::from_fn(net.l(), |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                let scale = 1e-3 * v[k].norm() / dir.norm();
                let step = dir * c(scale, 0.0);
                let probe = &v[k] + step;
                assert!(conditional_mse(&probe, k, &oh, &cs, &net.p, cfg.sigma2()) >= best * (1.0 - 1e-12));
            }
        }
    }
}

#[test]
fn lmmse_not_worse_than_mr_on_average() {
    let cfg = small_config(6, 4, 2, 2, 2, 2, 56);
    let net = Network::build(&cfg, 0).unwrap();
    let mc = mc_expectations(&net, &[CombinerScheme::Mr, CombinerScheme::Lmmse], 3_000).unwrap();
    let mean = |r: &ris_cellfree::se::MonteCarloMoments| {
        let (g, _) = mc_sinrs(&net, &r.moments);
        g.iter().map(|x| (1.0 + x).log2()).sum::<f64>() / g.len() as f64
    };
    assert!(mean(&mc[1]) >= mean(&mc[0]));
}

#[test]
fn global_phase_leaves_aggregated_covariance_unchanged() {
    let mut cfg = small_config(2, 2, 2, 3, 2, 1, 57);
    let a = Network::build(&cfg, 0).unwrap();
    cfg.phase_shift += 1.234;
    let b = Network::build(&cfg, 0).unwrap();
    for m in 0..2 {
        for k in 0..2 {
            let err = frobenius_rel_err(b.link(m, k).r_o(), a.link(m, k).r_o());
            assert!(err <= 1e-10, "{err}");
        }
    }
}
