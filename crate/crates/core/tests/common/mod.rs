#![allow(dead_code)]

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ris_cellfree::network::Network;
use ris_cellfree::scenario::{build_large_scale, Geometry, SystemConfig};
use ris_cellfree::C64;

pub const BATCHES: usize = 20;

/// Small configuration with an `n_h x n_v` surface.
pub fn small_config(m: usize, k: usize, l: usize, n_h: usize, n_v: usize, tau_p: usize, seed: u64) -> SystemConfig {
    SystemConfig {
        m_aps: m,
        k_ues: k,
        l_antennas: l,
        n_h,
        n_v,
        tau_p,
        seed,
        n_setups: 1,
        ..SystemConfig::default()
    }
}

/// Network on a hand-placed geometry with deterministic (unshadowed)
/// large-scale fading.
pub fn placed_network(cfg: &SystemConfig, aps: &[[f64; 2]], ues: &[[f64; 2]]) -> Network {
    let mut cfg = cfg.clone();
    cfg.m_aps = aps.len();
    cfg.k_ues = ues.len();
    cfg.shadow_std_db = 0.0;
    let geometry = Geometry {
        ap_positions: aps.iter().map(|p| [p[0], p[1], cfg.h_ap]).collect(),
        ue_positions: ues.iter().map(|p| [p[0], p[1], cfg.h_ue]).collect(),
        ris_position: [cfg.area_ap / 2.0, cfg.area_ap / 2.0, cfg.h_ris],
        area: cfg.area_ap,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let large = build_large_scale(&geometry, &cfg, &mut rng).unwrap();
    Network::from_parts(&cfg, 0, geometry, large).unwrap()
}

/// Batch-means accumulator for a fixed list of complex statistics.
pub struct BatchMeans {
    n: usize,
    dim: usize,
    sums: Vec<Vec<C64>>,
    counts: Vec<usize>,
}

impl BatchMeans {
    pub fn new(n: usize, dim: usize) -> Self {
        let b = BATCHES.min(n);
        BatchMeans {
            n,
            dim,
            sums: vec![vec![C64::new(0.0, 0.0); dim]; b],
            counts: vec![0; b],
        }
    }

    pub fn add(&mut self, trial: usize, values: &[C64]) {
        assert_eq!(values.len(), self.dim);
        let b = trial * self.sums.len() / self.n;
        for (s, v) in self.sums[b].iter_mut().zip(values) {
            *s += v;
        }
        self.counts[b] += 1;
    }

    fn batch_means(&self, j: usize) -> Vec<C64> {
        self.sums
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| s[j] / c as f64)
            .collect()
    }

    pub fn mean(&self, j: usize) -> C64 {
        let total: C64 = self.sums.iter().map(|s| s[j]).sum();
        total / self.counts.iter().sum::<usize>() as f64
    }

    pub fn std_err(&self, j: usize) -> f64 {
        ris_cellfree::se::batch_standard_error_complex(&self.batch_means(j))
    }

    /// |mean − target| in units of the batch-means standard error.
    pub fn z_score(&self, j: usize, target: C64) -> f64 {
        let se = self.std_err(j);
        let d = (self.mean(j) - target).norm();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

/// Writes a line straight to the process stdout, bypassing test capture.
pub fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}
