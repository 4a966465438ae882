//! Dense real/complex matrix utilities for the symplectic and projection
//! algebra used throughout the crate.
//!
//! All matrices are dense `nalgebra` matrices; system sizes are small
//! (4n with n on the order of ten), so no sparse paths exist.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealVector = DVector<f64>;

/// Spectral abscissa margin below which a matrix is not declared Hurwitz,
/// so marginal systems are not reported stable under roundoff.
pub const HURWITZ_EPS: f64 = 1e-10;

/// Block-diagonal symplectic form `J_n = I_n (x) [[0,1],[-1,0]]`, size 2n.
pub fn symplectic(n: usize) -> Result<RealMatrix> {
    if n == 0 {
        return Err(Error::Parameter("symplectic form requires n >= 1".into()));
    }
    let mut j = RealMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(2 * k, 2 * k + 1)] = 1.0;
        j[(2 * k + 1, 2 * k)] = -1.0;
    }
    Ok(j)
}

/// Orthogonal projections onto the agreement subspace and its complement,
/// in 2n x 2n blocks: `Pi = 1/2 [[I,I],[I,I]]`, `PiPerp = 1/2 [[I,-I],[-I,I]]`.
pub fn sync_projections(n: usize) -> Result<(RealMatrix, RealMatrix)> {
    if n == 0 {
        return Err(Error::Parameter("projections require n >= 1".into()));
    }
    let d = 2 * n;
    let mut pi = RealMatrix::zeros(2 * d, 2 * d);
    let mut pi_perp = RealMatrix::zeros(2 * d, 2 * d);
    for k in 0..d {
        pi[(k, k)] = 0.5;
        pi[(k, k + d)] = 0.5;
        pi[(k + d, k)] = 0.5;
        pi[(k + d, k + d)] = 0.5;
        pi_perp[(k, k)] = 0.5;
        pi_perp[(k, k + d)] = -0.5;
        pi_perp[(k + d, k)] = -0.5;
        pi_perp[(k + d, k + d)] = 0.5;
    }
    Ok((pi, pi_perp))
}

/// Eigenvalues and singular extremes of a square real matrix.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Eigenvalues sorted by real part descending, ties by imaginary part
    /// descending; the first element plays the role of the dominant
    /// eigenvalue in the stability certificates.
    pub eigenvalues: Vec<Complex64>,
    pub spectral_abscissa: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl SpectralSummary {
    /// Dominant eigenvalue (largest real part).
    pub fn lambda1(&self) -> Complex64 {
        self.eigenvalues[0]
    }

    /// Strict Hurwitz test with a roundoff margin.
    pub fn is_hurwitz(&self) -> bool {
        self.spectral_abscissa < -HURWITZ_EPS
    }
}

/// Dense eigendecomposition plus singular value extremes.
pub fn spectral_summary(a: &RealMatrix) -> Result<SpectralSummary> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "spectral summary requires a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("matrix entries must be finite".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::EigenNonConvergence)?;
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap()
            .then(b.im.partial_cmp(&a.im).unwrap())
    });
    let spectral_abscissa = eigenvalues[0].re;

    let svd = nalgebra::linalg::SVD::try_new(a.clone(), false, false, f64::EPSILON, 10_000)
        .ok_or(Error::SvdNonConvergence)?;
    let sv = &svd.singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(SpectralSummary {
        eigenvalues,
        spectral_abscissa,
        sigma_min,
        sigma_max,
    })
}

/// Matrix 2-norm (largest singular value).
pub fn two_norm(a: &RealMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let svd = nalgebra::linalg::SVD::try_new(a.clone(), false, false, f64::EPSILON, 10_000)
        .ok_or(Error::SvdNonConvergence)?;
    Ok(svd.singular_values.iter().cloned().fold(0.0_f64, f64::max))
}

/// Real part of a complex matrix.
pub fn re_part(a: &ComplexMatrix) -> RealMatrix {
    a.map(|z| z.re)
}

/// Imaginary part of a complex matrix.
pub fn im_part(a: &ComplexMatrix) -> RealMatrix {
    a.map(|z| z.im)
}

/// Lift a real matrix into the complex field.
pub fn to_complex(a: &RealMatrix) -> ComplexMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn symplectic_n1_matches_definition() {
        let j = symplectic(1).unwrap();
        assert_eq!(j, RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
    }

    #[test]
    fn symplectic_squares_to_minus_identity() {
        for n in 1..=5 {
            let j = symplectic(n).unwrap();
            let jj = &j * &j;
            let minus_i = -RealMatrix::identity(2 * n, 2 * n);
            assert_eq!(jj, minus_i);
            assert_eq!(j.transpose(), -j.clone());
        }
    }

    #[test]
    fn symplectic_rejects_zero() {
        assert!(symplectic(0).is_err());
    }

    #[test]
    fn projections_n1_explicit() {
        let (pi, _) = sync_projections(1).unwrap();
        let expected = RealMatrix::from_row_slice(
            4,
            4,
            &[
                0.5, 0.0, 0.5, 0.0, //
                0.0, 0.5, 0.0, 0.5, //
                0.5, 0.0, 0.5, 0.0, //
                0.0, 0.5, 0.0, 0.5,
            ],
        );
        assert_eq!(pi, expected);
    }

    #[test]
    fn projections_complementary_and_idempotent() {
        for n in 1..=4 {
            let (pi, perp) = sync_projections(n).unwrap();
            let id = RealMatrix::identity(4 * n, 4 * n);
            assert!(((&pi + &perp) - &id).abs().max() <= 1e-14);
            assert!(((&pi * &pi) - &pi).abs().max() <= 1e-14);
            assert!(((&perp * &perp) - &perp).abs().max() <= 1e-14);
            assert!((&perp * &pi).abs().max() <= 1e-14);
        }
    }

    #[test]
    fn spectral_summary_example_error_matrix() {
        // 2J*Omega1 - 2a*I with a = 0.4 has eigenvalues -0.6 and -1.0.
        let a = RealMatrix::from_row_slice(2, 2, &[-0.6, 0.0, 0.0, -1.0]);
        let s = spectral_summary(&a).unwrap();
        assert_abs_diff_eq!(s.spectral_abscissa, -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[0].re, -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[1].re, -1.0, epsilon = 1e-12);
        assert!(s.is_hurwitz());
    }

    #[test]
    fn spectral_summary_identity() {
        let s = spectral_summary(&RealMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.sigma_min, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.sigma_max, 1.0, epsilon = 1e-14);
        assert!(!s.is_hurwitz());
    }

    #[test]
    fn spectral_summary_j_omega_norm() {
        // ||J*Omega1|| = 0.1 for the off-diagonal Omega1 with entry 0.1.
        let j = symplectic(1).unwrap();
        let omega = RealMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]);
        let s = spectral_summary(&(j * omega)).unwrap();
        assert_abs_diff_eq!(s.sigma_max, 0.1, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_square() {
        let a = RealMatrix::zeros(2, 3);
        assert!(spectral_summary(&a).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_matrices_have_real_eigenvalues(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed % 3) as usize;
            let m = RealMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let sym = (&m + m.transpose()) * 0.5;
            let s = spectral_summary(&sym).unwrap();
            for ev in &s.eigenvalues {
                prop_assert!(ev.im.abs() <= 1e-12);
            }
        }

        #[test]
        fn sigma_max_bounds_matrix_action(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (seed % 4) as usize;
            let m = RealMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
            let x = RealVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            prop_assume!(x.norm() > 1e-6);
            let unit = &x / x.norm();
            let s = spectral_summary(&m).unwrap();
            prop_assert!((&m * unit).norm() <= s.sigma_max * (1.0 + 1e-10));
        }
    }
}
