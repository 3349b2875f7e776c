//! Spatial correlation models: sinc-kernel RIS correlation, Gaussian local
//! scattering at the APs, and the Kronecker NLoS covariance of the AP–RIS
//! channel.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, certify_psd, CMat};
use crate::quadrature::gauss_hermite_100;

/// Planar RIS layout: `n_h` elements per row, `n_v` per column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceGeometry {
    pub n_h: usize,
    pub n_v: usize,
    /// horizontal element spacing in meters
    pub d_h: f64,
    /// vertical element spacing in meters
    pub d_v: f64,
    /// carrier wavelength in meters
    pub wavelength: f64,
}

impl SurfaceGeometry {
    pub fn new(n_h: usize, n_v: usize, d_h: f64, d_v: f64, wavelength: f64) -> Result<Self> {
        let g = SurfaceGeometry {
            n_h,
            n_v,
            d_h,
            d_v,
            wavelength,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square-ish layout with spacing given in wavelengths.
    pub fn with_spacing(n_h: usize, n_v: usize, spacing_wl: f64, wavelength: f64) -> Result<Self> {
        Self::new(n_h, n_v, spacing_wl * wavelength, spacing_wl * wavelength, wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h == 0 || self.n_v == 0 {
            return Err(Error::Domain(format!(
                "RIS needs at least one element (n_h={}, n_v={})",
                self.n_h, self.n_v
            )));
        }
        for (name, v) in [("d_h", self.d_h), ("d_v", self.d_v), ("wavelength", self.wavelength)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Element positions in meters, relative to the first element.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        (1..=self.n())
            .map(|x| ris_position_vector(x, self).expect("index in range"))
            .collect()
    }
}

/// Position of element `x` (1-based) on the RIS plane:
/// `[0, mod(x-1, N_H) d_H, floor((x-1)/N_H) d_V]`.
pub fn ris_position_vector(x: usize, geom: &SurfaceGeometry) -> Result<[f64; 3]> {
    if x == 0 || x > geom.n() {
        return Err(Error::Domain(format!(
            "RIS element index {x} outside 1..={}",
            geom.n()
        )));
    }
    let i = x - 1;
    Ok([
        0.0,
        (i % geom.n_h) as f64 * geom.d_h,
        (i / geom.n_h) as f64 * geom.d_v,
    ])
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Hermitian PSD matrix certified at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: CMat,
}

impl CorrelationMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        certify_psd(&entries)?;
        Ok(CorrelationMatrix { entries })
    }

    pub fn identity(dim: usize) -> Self {
        CorrelationMatrix {
            entries: CMat::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CorrelationMatrix {
            entries: &self.entries * c(factor, 0.0),
        }
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.entries).re
    }
}

/// `[R]_{ij} = sinc(2 ||u_i - u_j|| / lambda)` over arbitrary positions.
pub fn sinc_correlation_from_positions(positions: &[[f64; 3]], wavelength: f64) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (positions[i], positions[j]);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        sinc(2.0 * d / wavelength)
    })
}

/// Spatial correlation between RIS elements (real, unit diagonal).
pub fn ris_sinc_correlation(geom: &SurfaceGeometry) -> Result<CorrelationMatrix> {
    geom.validate()?;
    let r = sinc_correlation_from_positions(&geom.positions(), geom.wavelength);
    CorrelationMatrix::new(linalg::from_real(&r))
}

/// Gaussian local scattering correlation of an `l`-antenna ULA:
///
/// `[R]_{ab} = beta * E_δ[exp(j 2π s (a-b) sin(θ + δ))]`, `δ ~ N(0, asd²)`,
///
/// with `s` the antenna spacing in wavelengths. The expectation is taken with
/// a 100-point Gauss–Hermite rule; `asd == 0` gives the rank-one limit.
pub fn local_scattering_correlation(
    beta_nlos: f64,
    theta: f64,
    asd: f64,
    l: usize,
    spacing: f64,
) -> Result<CorrelationMatrix> {
    for (name, v) in [("beta_nlos", beta_nlos), ("theta", theta), ("asd", asd), ("spacing", spacing)] {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    if beta_nlos < 0.0 || asd < 0.0 || l == 0 {
        return Err(Error::Domain(format!(
            "local scattering needs beta >= 0, asd >= 0, l >= 1 (beta={beta_nlos}, asd={asd}, l={l})"
        )));
    }
    let mut r = CMat::zeros(l, l);
    let (nodes, weights) = gauss_hermite_100();
    let norm = 1.0 / PI.sqrt();
    for a in 0..l {
        r[(a, a)] = c(beta_nlos, 0.0);
        for b in 0..a {
            let k = 2.0 * PI * spacing * (a - b) as f64;
            let v = if asd == 0.0 {
                linalg::cis(k * theta.sin())
            } else {
                let s = std::f64::consts::SQRT_2 * asd;
                let mut acc = c(0.0, 0.0);
                for (x, w) in nodes.iter().zip(weights) {
                    acc += linalg::cis(k * (theta + s * x).sin()) * *w;
                }
                acc * norm
            };
            r[(a, b)] = v * beta_nlos;
            r[(b, a)] = r[(a, b)].conj();
        }
    }
    CorrelationMatrix::new(r)
}

/// Covariance of `vec(H̃)` (column stacking) for the `N x L` AP–RIS channel.
#[derive(Debug, Clone)]
pub struct NlosKroneckerCovariance {
    pub n: usize,
    pub l: usize,
    entries: CMat,
}

impl NlosKroneckerCovariance {
    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    /// Block `(a, b)` (0-based): rows `aN..aN+N`, columns `bN..bN+N`,
    /// i.e. `E[h̃_a h̃_bᴴ]` for columns `h̃_a` of `H̃`.
    pub fn block(&self, a: usize, b: usize) -> CMat {
        self.entries
            .view((a * self.n, b * self.n), (self.n, self.n))
            .into_owned()
    }
}

/// `(1 / (L N beta_m)) (R_mᵀ ⊗ R_r)`.
pub fn kron_nlos_covariance(
    r_m: &CorrelationMatrix,
    r_r: &CorrelationMatrix,
    beta_m: f64,
) -> Result<NlosKroneckerCovariance> {
    let l = r_m.dim();
    let n = r_r.dim();
    if l == 0 || n == 0 {
        return Err(Error::dim("kron_nlos_covariance", "non-empty factors", format!("L={l}, N={n}")));
    }
    if !(beta_m.is_finite() && beta_m > 0.0) {
        return Err(Error::Domain(format!("beta_m must be positive, got {beta_m}")));
    }
    let scale = 1.0 / (l as f64 * n as f64 * beta_m);
    let entries = r_m.matrix().transpose().kronecker(r_r.matrix()) * c(scale, 0.0);
    Ok(NlosKroneckerCovariance { n, l, entries })
}
