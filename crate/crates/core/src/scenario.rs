//! Network geometry and large-scale fading.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::correlation::SurfaceGeometry;
use crate::error::{Error, Result};

/// How the AP antenna arrays are spatially correlated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApCorrelation {
    /// Gaussian local scattering around the nominal angle.
    LocalScattering,
    /// `R = beta I`.
    Uncorrelated,
}

/// Noise level of the despread pilot observation `N^p φ_k^*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotNoise {
    /// `CN(0, σ² τ_p I)`: the physical result of despreading with `||φ||² = τ_p`.
    Despread,
    /// `CN(0, σ² I)` as literally stated for the projected noise.
    Literal,
}

/// Every scenario, dimension, power and Monte Carlo parameter of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub m_aps: usize,
    pub k_ues: usize,
    pub l_antennas: usize,
    /// RIS elements per row; zero together with `n_v` disables the RIS
    pub n_h: usize,
    pub n_v: usize,
    /// RIS element spacing, in wavelengths
    pub d_h: f64,
    pub d_v: f64,
    /// carrier wavelength in meters
    pub wavelength: f64,
    pub tau_c: usize,
    pub tau_p: usize,
    pub p_dbm: f64,
    pub pilot_p_dbm: f64,
    pub sigma2_dbm: f64,
    /// local-scattering angular standard deviation, degrees
    pub asd_deg: f64,
    pub ap_correlation: ApCorrelation,
    /// AP antenna spacing, in wavelengths
    pub ap_spacing: f64,
    pub area_ap: f64,
    pub area_ue: f64,
    pub h_ap: f64,
    pub h_ue: f64,
    pub h_ris: f64,
    /// common RIS phase shift, radians
    pub phase_shift: f64,
    pub shadow_std_db: f64,
    /// extra attenuation of every direct AP–UE link (blockage), dB
    pub direct_loss_db: f64,
    pub pilot_noise: PilotNoise,
    pub seed: u64,
    pub n_setups: usize,
    pub n_fading: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            m_aps: 40,
            k_ues: 10,
            l_antennas: 1,
            n_h: 6,
            n_v: 6,
            d_h: 0.5,
            d_v: 0.5,
            wavelength: 0.15,
            tau_c: 200,
            tau_p: 5,
            p_dbm: 23.0,
            pilot_p_dbm: 23.0,
            sigma2_dbm: -94.0,
            asd_deg: 10.0,
            ap_correlation: ApCorrelation::LocalScattering,
            ap_spacing: 0.5,
            area_ap: 1000.0,
            area_ue: 100.0,
            h_ap: 15.0,
            h_ue: 1.65,
            h_ris: 30.0,
            phase_shift: PI / 4.0,
            shadow_std_db: 8.0,
            direct_loss_db: 0.0,
            pilot_noise: PilotNoise::Despread,
            seed: 1,
            n_setups: 10,
            n_fading: 1000,
        }
    }
}

fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::config(key, 0, msg));
        if self.m_aps == 0 {
            return bad("M", "need at least one AP".into());
        }
        if self.k_ues == 0 {
            return bad("K", "need at least one UE".into());
        }
        if self.l_antennas == 0 {
            return bad("L", "need at least one antenna per AP".into());
        }
        if (self.n_h == 0) != (self.n_v == 0) {
            return bad("N_H", "N_H and N_V must both be zero (no RIS) or both positive".into());
        }
        if self.tau_p == 0 {
            return bad("tau_p", "need at least one pilot".into());
        }
        if self.tau_p > self.tau_c {
            return bad("tau_p", format!("tau_p = {} exceeds tau_c = {}", self.tau_p, self.tau_c));
        }
        if self.n_setups == 0 {
            return bad("setups", "need at least one setup".into());
        }
        if self.n_fading == 0 {
            return bad("fading", "need at least one fading realization".into());
        }
        for (key, v) in [
            ("d_h", self.d_h),
            ("d_v", self.d_v),
            ("wavelength", self.wavelength),
            ("ap_spacing", self.ap_spacing),
            ("area_ap", self.area_ap),
            ("area_ue", self.area_ue),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        for (key, v) in [
            ("p_dbm", self.p_dbm),
            ("pilot_p_dbm", self.pilot_p_dbm),
            ("sigma2_dbm", self.sigma2_dbm),
            ("h_ap", self.h_ap),
            ("h_ue", self.h_ue),
            ("h_ris", self.h_ris),
            ("phase_shift", self.phase_shift),
            ("direct_loss_db", self.direct_loss_db),
        ] {
            if !v.is_finite() {
                return bad(key, format!("must be finite, got {v}"));
            }
        }
        if !(self.asd_deg.is_finite() && self.asd_deg >= 0.0) {
            return bad("asd", format!("must be >= 0, got {}", self.asd_deg));
        }
        if !(self.shadow_std_db.is_finite() && self.shadow_std_db >= 0.0) {
            return bad("shadow_std_db", format!("must be >= 0, got {}", self.shadow_std_db));
        }
        if self.area_ue > self.area_ap {
            return bad("area_ue", "UE region must fit inside the AP region".into());
        }
        Ok(())
    }

    pub fn n_ris(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn surface(&self) -> Option<SurfaceGeometry> {
        if self.n_ris() == 0 {
            return None;
        }
        Some(SurfaceGeometry {
            n_h: self.n_h,
            n_v: self.n_v,
            d_h: self.d_h * self.wavelength,
            d_v: self.d_v * self.wavelength,
            wavelength: self.wavelength,
        })
    }

    pub fn tau_u(&self) -> usize {
        self.tau_c - self.tau_p
    }

    /// Data power per UE in mW.
    pub fn p(&self) -> f64 {
        dbm_to_linear(self.p_dbm)
    }

    /// Pilot power per UE in mW.
    pub fn p_hat(&self) -> f64 {
        dbm_to_linear(self.pilot_p_dbm)
    }

    /// Noise power in mW.
    pub fn sigma2(&self) -> f64 {
        dbm_to_linear(self.sigma2_dbm)
    }

    pub fn asd(&self) -> f64 {
        self.asd_deg.to_radians()
    }

    /// Covariance scale of the despread pilot noise.
    pub fn pilot_noise_var(&self) -> f64 {
        match self.pilot_noise {
            PilotNoise::Despread => self.sigma2() * self.tau_p as f64,
            PilotNoise::Literal => self.sigma2(),
        }
    }

    /// Sets `N` as a square layout when possible, otherwise a single row.
    /// `n == 0` removes the RIS.
    pub fn set_ris_elements(&mut self, n: usize) {
        let root = (n as f64).sqrt().round() as usize;
        if root * root == n {
            self.n_h = root;
            self.n_v = root;
        } else {
            self.n_h = n;
            self.n_v = 1;
        }
    }
}

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    pub ris_position: Point,
    /// side of the square AP region (wrap-around period)
    pub area: f64,
}

/// Uniform AP drop over the full region, UEs in a centered square, RIS at
/// the center.
pub fn generate_geometry<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Geometry {
    let a = cfg.area_ap;
    let ap_positions = (0..cfg.m_aps)
        .map(|_| [rng.random::<f64>() * a, rng.random::<f64>() * a, cfg.h_ap])
        .collect();
    let lo = (a - cfg.area_ue) / 2.0;
    let ue_positions = (0..cfg.k_ues)
        .map(|_| {
            [
                lo + rng.random::<f64>() * cfg.area_ue,
                lo + rng.random::<f64>() * cfg.area_ue,
                cfg.h_ue,
            ]
        })
        .collect();
    Geometry {
        ap_positions,
        ue_positions,
        ris_position: [a / 2.0, a / 2.0, cfg.h_ris],
        area: a,
    }
}

/// Vector from the nearest of the nine wrap-around translates of `ap` to
/// `target`.
pub fn wrapped_offset(ap: Point, target: Point, area: f64) -> Point {
    let mut best = [0.0; 3];
    let mut best_d2 = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = target[0] - (ap[0] + sx * area);
            let dy = target[1] - (ap[1] + sy * area);
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best = [dx, dy, target[2] - ap[2]];
            }
        }
    }
    best
}

pub fn norm3(v: Point) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

impl Geometry {
    /// AP -> UE offset under wrap-around.
    pub fn ap_ue_offset(&self, m: usize, k: usize) -> Point {
        wrapped_offset(self.ap_positions[m], self.ue_positions[k], self.area)
    }

    /// AP -> RIS offset under wrap-around.
    pub fn ap_ris_offset(&self, m: usize) -> Point {
        wrapped_offset(self.ap_positions[m], self.ris_position, self.area)
    }

    /// RIS -> UE offset (both inside the central region; no wrap needed).
    pub fn ris_ue_offset(&self, k: usize) -> Point {
        let u = self.ue_positions[k];
        let r = self.ris_position;
        [u[0] - r[0], u[1] - r[1], u[2] - r[2]]
    }

    pub fn ap_ue_distance(&self, m: usize, k: usize) -> f64 {
        norm3(self.ap_ue_offset(m, k))
    }

    pub fn ap_ris_distance(&self, m: usize) -> f64 {
        norm3(self.ap_ris_offset(m))
    }

    pub fn ris_ue_distance(&self, k: usize) -> f64 {
        norm3(self.ris_ue_offset(k))
    }
}

/// Large-scale gain of an RIS link (linear):
/// `-30.18 - 26 log10(d / 1 m) + F` dB.
pub fn ris_link_pathloss(d: f64, shadow_db: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    let db = -30.18 - 26.0 * d.log10() + shadow_db;
    Ok(10f64.powf(db / 10.0))
}

/// Three-slope AP–UE pathloss in dB (negative), distance in meters.
/// Shadowing is applied beyond the 50 m breakpoint only.
pub fn ap_ue_pathloss_db(d: f64, shadow_db: f64) -> f64 {
    const L: f64 = 140.7;
    const D0: f64 = 0.01;
    const D1: f64 = 0.05;
    let dk = d / 1000.0;
    if dk > D1 {
        -L - 35.0 * dk.log10() + shadow_db
    } else if dk > D0 {
        -L - 15.0 * D1.log10() - 20.0 * dk.log10()
    } else {
        -L - 15.0 * D1.log10() - 20.0 * D0.log10()
    }
}

/// `10^(1.3 - 0.003 d)`.
pub fn rician_factor(d: f64) -> f64 {
    10f64.powf(1.3 - 0.003 * d)
}

/// `(κ/(κ+1) β, 1/(κ+1) β)`.
pub fn split_los_nlos(beta: f64, kappa: f64) -> (f64, f64) {
    let los = kappa / (kappa + 1.0) * beta;
    (los, beta - los)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeScale {
    /// AP–UE gain, M x K
    pub beta_mk: DMatrix<f64>,
    /// AP–RIS gain per AP
    pub beta_m: Vec<f64>,
    /// UE–RIS gain per UE
    pub beta_k: Vec<f64>,
    pub kappa_m: Vec<f64>,
    pub kappa_k: Vec<f64>,
    pub shadow_mk: DMatrix<f64>,
    pub shadow_m: Vec<f64>,
    pub shadow_k: Vec<f64>,
}

impl LargeScale {
    pub fn beta_m_split(&self, m: usize) -> (f64, f64) {
        split_los_nlos(self.beta_m[m], self.kappa_m[m])
    }

    pub fn beta_k_split(&self, k: usize) -> (f64, f64) {
        split_los_nlos(self.beta_k[k], self.kappa_k[k])
    }
}

pub fn build_large_scale<R: Rng + ?Sized>(geom: &Geometry, cfg: &SystemConfig, rng: &mut R) -> Result<LargeScale> {
    let (m_aps, k_ues) = (geom.ap_positions.len(), geom.ue_positions.len());
    let sd = cfg.shadow_std_db;
    let draw = |rng: &mut R| -> f64 { sd * rng.sample::<f64, _>(StandardNormal) };

    let shadow_mk = DMatrix::from_fn(m_aps, k_ues, |_, _| draw(rng));
    let shadow_m: Vec<f64> = (0..m_aps).map(|_| draw(rng)).collect();
    let shadow_k: Vec<f64> = (0..k_ues).map(|_| draw(rng)).collect();

    let beta_mk = DMatrix::from_fn(m_aps, k_ues, |m, k| {
        10f64.powf((ap_ue_pathloss_db(geom.ap_ue_distance(m, k), shadow_mk[(m, k)]) - cfg.direct_loss_db) / 10.0)
    });
    let beta_m = (0..m_aps)
        .map(|m| ris_link_pathloss(geom.ap_ris_distance(m), shadow_m[m]))
        .collect::<Result<Vec<_>>>()?;
    let beta_k = (0..k_ues)
        .map(|k| ris_link_pathloss(geom.ris_ue_distance(k), shadow_k[k]))
        .collect::<Result<Vec<_>>>()?;
    let kappa_m = (0..m_aps).map(|m| rician_factor(geom.ap_ris_distance(m))).collect();
    let kappa_k = (0..k_ues).map(|k| rician_factor(geom.ris_ue_distance(k))).collect();

    Ok(LargeScale {
        beta_mk,
        beta_m,
        beta_k,
        kappa_m,
        kappa_k,
        shadow_mk,
        shadow_m,
        shadow_k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn db(x: f64) -> f64 {
        10.0 * x.log10()
    }

    #[test]
    fn pathloss_examples() {
        assert!((db(ris_link_pathloss(1.0, 0.0).unwrap()) + 30.18).abs() < 1e-12);
        assert!((db(ris_link_pathloss(100.0, 0.0).unwrap()) + 82.18).abs() < 1e-12);
        assert!((db(ris_link_pathloss(10.0, 6.0).unwrap()) + 50.18).abs() < 1e-12);
        assert!(ris_link_pathloss(0.0, 0.0).is_err());
        assert!(ris_link_pathloss(-3.0, 0.0).is_err());
    }

    #[test]
    fn pathloss_decreasing() {
        let mut prev = f64::INFINITY;
        for d in [0.5, 1.0, 3.0, 10.0, 100.0, 1e4] {
            let g = ris_link_pathloss(d, 0.0).unwrap();
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn ap_ue_pathloss_anchor_and_continuity() {
        assert!((ap_ue_pathloss_db(1000.0, 0.0) + 140.7).abs() < 1e-12);
        let below = ap_ue_pathloss_db(50.0 - 1e-9, 0.0);
        let above = ap_ue_pathloss_db(50.0 + 1e-9, 0.0);
        assert!((below - above).abs() < 1e-6);
        let below = ap_ue_pathloss_db(10.0 - 1e-9, 0.0);
        let above = ap_ue_pathloss_db(10.0 + 1e-9, 0.0);
        assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn rician_examples() {
        assert!((rician_factor(0.0) - 10f64.powf(1.3)).abs() < 1e-12);
        assert!((rician_factor(0.0) - 19.953).abs() < 1e-3);
        assert!((rician_factor(100.0) - 10.0).abs() < 1e-12);
        assert!((rician_factor(1300.0 / 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_los_nlos(2.0, 1.0), (1.0, 1.0));
        assert_eq!(split_los_nlos(5.0, 0.0), (0.0, 5.0));
        let (a, b) = split_los_nlos(4.0, 3.0);
        assert!((a - 3.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wraparound_distance() {
        let off = wrapped_offset([990.0, 500.0, 15.0], [10.0, 500.0, 1.65], 1000.0);
        assert!((off[0] - 20.0).abs() < 1e-9);
        assert!(off[1].abs() < 1e-12);
        let horiz = (off[0] * off[0] + off[1] * off[1]).sqrt();
        assert!((horiz - 20.0).abs() < 1e-9);
    }

    #[test]
    fn colocated_distance_is_height_gap() {
        let g = Geometry {
            ap_positions: vec![[500.0, 500.0, 15.0]],
            ue_positions: vec![[500.0, 500.0, 1.65]],
            ris_position: [500.0, 500.0, 30.0],
            area: 1000.0,
        };
        assert!((g.ap_ue_distance(0, 0) - 13.35).abs() < 1e-12);
    }

    #[test]
    fn geometry_deterministic_and_in_bounds() {
        let cfg = SystemConfig::default();
        let a = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let b = generate_geometry(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        for p in &a.ue_positions {
            assert!(p[0] >= 450.0 && p[0] <= 550.0 && p[1] >= 450.0 && p[1] <= 550.0);
        }
        for p in &a.ap_positions {
            assert!(p[0] >= 0.0 && p[0] <= 1000.0 && p[2] == 15.0);
        }
    }

    #[test]
    fn large_scale_deterministic_and_zero_shadow() {
        let cfg = SystemConfig {
            shadow_std_db: 0.0,
            m_aps: 5,
            k_ues: 3,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let geom = generate_geometry(&cfg, &mut rng);
        let ls = build_large_scale(&geom, &cfg, &mut rng).unwrap();
        for m in 0..5 {
            let expect = ris_link_pathloss(geom.ap_ris_distance(m), 0.0).unwrap();
            assert!((ls.beta_m[m] - expect).abs() <= 1e-15 * expect);
            let (los, nlos) = ls.beta_m_split(m);
            assert_eq!(los + nlos, ls.beta_m[m]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let geom2 = generate_geometry(&cfg, &mut rng);
        let ls2 = build_large_scale(&geom2, &cfg, &mut rng).unwrap();
        assert_eq!(ls, ls2);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::default().validate().is_ok());
        let bad = SystemConfig {
            tau_p: 300,
            ..SystemConfig::default()
        };
        match bad.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "tau_p"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ris_element_layout() {
        let mut cfg = SystemConfig::default();
        cfg.set_ris_elements(64);
        assert_eq!((cfg.n_h, cfg.n_v), (8, 8));
        cfg.set_ris_elements(10);
        assert_eq!((cfg.n_h, cfg.n_v), (10, 1));
        cfg.set_ris_elements(0);
        assert!(cfg.surface().is_none());
    }

    proptest::proptest! {
        #[test]
        fn wrapped_never_longer(ax in 0.0..1000.0f64, ay in 0.0..1000.0f64,
                                ux in 0.0..1000.0f64, uy in 0.0..1000.0f64) {
            let off = wrapped_offset([ax, ay, 15.0], [ux, uy, 1.65], 1000.0);
            let direct = norm3([ux - ax, uy - ay, 1.65 - 15.0]);
            proptest::prop_assert!(norm3(off) <= direct + 1e-9);
        }

        #[test]
        fn split_sums_exactly(beta in 0.0..1e3f64, kappa in 0.0..50.0f64) {
            let (a, b) = split_los_nlos(beta, kappa);
            proptest::prop_assert!((a + b - beta).abs() <= 2.0 * f64::EPSILON * beta);
            proptest::prop_assert!(a >= 0.0 && b >= 0.0);
        }
    }
}
