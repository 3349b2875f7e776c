//! Dense complex linear-algebra helpers shared by every module.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative Hermitian tolerance: max |A - A^H| <= HERMITIAN_RTOL * max |A|.
pub const HERMITIAN_RTOL: f64 = 1e-12;
/// Relative PSD floor: lambda_min >= -PSD_RTOL * trace / dim.
pub const PSD_RTOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn hermitian_asymmetry(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn check_square(a: &CMat, context: &'static str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::dim(
            context,
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    Ok(())
}

pub fn check_hermitian(a: &CMat) -> Result<()> {
    check_square(a, "hermitian check")?;
    let scale = max_abs(a);
    let asym = hermitian_asymmetry(a);
    if asym > HERMITIAN_RTOL * scale {
        return Err(Error::NotHermitian { asym, scale });
    }
    Ok(())
}

/// (A + A^H) / 2.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().sum()
}

fn psd_floor(a: &CMat) -> f64 {
    let n = a.nrows().max(1) as f64;
    -PSD_RTOL * trace(a).re.abs() / n
}

/// Eigendecomposition of the Hermitian part of `a`.
pub fn hermitian_eigen(a: &CMat) -> SymmetricEigen<C64, nalgebra::Dyn> {
    SymmetricEigen::new(hermitian_part(a))
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    hermitian_eigen(a).eigenvalues.min()
}

/// Certifies `a` as Hermitian PSD within the relative floor and returns its
/// smallest eigenvalue.
pub fn certify_psd(a: &CMat) -> Result<f64> {
    check_hermitian(a)?;
    let min_eig = min_eigenvalue(a);
    let floor = psd_floor(a);
    if min_eig < floor {
        return Err(Error::NotPsd { min_eig, floor });
    }
    Ok(min_eig)
}

/// Hermitian square root of a PSD matrix. Eigenvalues slightly below zero
/// (within the PSD floor) are lifted by `|lambda_min|` before the root.
pub fn psd_sqrt(a: &CMat) -> Result<CMat> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let eig = hermitian_eigen(a);
    let min_eig = eig.eigenvalues.min();
    let floor = psd_floor(a);
    if min_eig < floor {
        return Err(Error::NotPsd { min_eig, floor });
    }
    let shift = if min_eig < 0.0 { -min_eig } else { 0.0 };
    let roots = eig.eigenvalues.map(|l| c((l + shift).max(0.0).sqrt(), 0.0));
    let u = &eig.eigenvectors;
    let mut scaled = u.clone();
    for (j, r) in roots.iter().enumerate() {
        scaled.column_mut(j).scale_mut(r.re);
    }
    Ok(&scaled * u.adjoint())
}

/// Solves A X = B for Hermitian positive-definite A.
pub fn solve_hpd(a: &CMat, b: &CMat, context: &'static str) -> Result<CMat> {
    let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::Singular(context))?;
    Ok(chol.solve(b))
}

pub fn solve_hpd_vec(a: &CMat, b: &CVec, context: &'static str) -> Result<CVec> {
    let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::Singular(context))?;
    Ok(chol.solve(b))
}

pub fn inverse_hpd(a: &CMat, context: &'static str) -> Result<CMat> {
    let chol = Cholesky::new(hermitian_part(a)).ok_or(Error::Singular(context))?;
    Ok(chol.inverse())
}

/// ||a - b||_F / ||b||_F (absolute error when `b` is zero).
pub fn frobenius_rel_err(a: &CMat, b: &CMat) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base == 0.0 {
        diff
    } else {
        diff / base
    }
}

/// Draw from CN(0, 1).
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

pub fn complex_normal_mat<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    // column-major fill keeps the draw order equal to vec() order
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Real-valued matrix lifted to complex entries.
pub fn from_real(a: &DMatrix<f64>) -> CMat {
    a.map(|x| c(x, 0.0))
}

/// x^H A y.
pub fn quad_form(x: &CVec, a: &CMat, y: &CVec) -> C64 {
    x.dotc(&(a * y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(n: usize, rank: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = complex_normal_mat(n, rank, &mut rng);
        &g * g.adjoint()
    }

    #[test]
    fn sqrt_squares_back() {
        let a = random_psd(5, 5, 1);
        let s = psd_sqrt(&a).unwrap();
        assert!(frobenius_rel_err(&(&s * &s), &a) < 1e-12);
        assert!(hermitian_asymmetry(&s) < 1e-12 * max_abs(&s));
    }

    #[test]
    fn sqrt_of_rank_deficient() {
        let a = random_psd(6, 2, 2);
        let s = psd_sqrt(&a).unwrap();
        assert!(frobenius_rel_err(&(&s * &s), &a) < 1e-9);
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = CMat::identity(3, 3);
        a[(2, 2)] = c(-0.5, 0.0);
        assert!(matches!(certify_psd(&a), Err(Error::NotPsd { .. })));
        assert!(psd_sqrt(&a).is_err());
    }

    #[test]
    fn tiny_negative_eigenvalue_is_clipped() {
        let mut a = CMat::identity(3, 3);
        a[(2, 2)] = c(-1e-12, 0.0);
        assert!(certify_psd(&a).is_ok());
        let s = psd_sqrt(&a).unwrap();
        assert!(s.iter().all(|z| z.re.is_finite()));
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = c(0.0, 1.0);
        assert!(matches!(check_hermitian(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn hpd_solve_matches_inverse() {
        let a = random_psd(4, 4, 3) + CMat::identity(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = complex_normal_vec(4, &mut rng);
        let x = solve_hpd_vec(&a, &b, "test").unwrap();
        let x2 = inverse_hpd(&a, "test").unwrap() * &b;
        assert!((x - x2).norm() < 1e-12 * b.norm());
    }
}
