//! Subsystem and augmented-system parameter sets and the generator
//! matrices of the expectation dynamics.
//!
//! Canonical variables are ordered interleaved as (q1, p1, q2, p2, ...),
//! consistent with the Kronecker structure of the symplectic form.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::kernel::{KernelChannel, MemoryKernel};
use crate::matops::{self, ComplexMatrix, RealMatrix, RealVector};
use crate::{Error, Result};

/// Largest tolerated asymmetry of a user-supplied Hamiltonian matrix.
/// Below this the matrix is symmetrized; above it the input is rejected
/// rather than silently repaired.
const OMEGA_ASYM_TOL: f64 = 1e-10;

/// One non-Markovian linear quantum subsystem `(Omega, V, Gamma(t))`.
#[derive(Debug, Clone)]
pub struct SubsystemParams {
    omega: RealMatrix,
    v: ComplexMatrix,
    kernel: MemoryKernel,
}

impl SubsystemParams {
    pub fn new(omega: RealMatrix, v: ComplexMatrix, kernel: MemoryKernel) -> Result<Self> {
        if omega.nrows() != omega.ncols() || omega.nrows() == 0 || omega.nrows() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "omega must be square of even size >= 2, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("omega entries must be finite".into()));
        }
        let asym = (&omega - omega.transpose()).abs().max();
        if asym > OMEGA_ASYM_TOL {
            return Err(Error::Parameter(format!(
                "omega asymmetry {asym:.3e} exceeds {OMEGA_ASYM_TOL:.0e}"
            )));
        }
        let omega = (&omega + omega.transpose()) * 0.5;
        if v.ncols() != omega.nrows() {
            return Err(Error::Dimension(format!(
                "coupling matrix must have {} columns, got {}",
                omega.nrows(),
                v.ncols()
            )));
        }
        if v.nrows() != kernel.channel_count() {
            return Err(Error::Dimension(format!(
                "coupling matrix rows ({}) must match kernel channels ({})",
                v.nrows(),
                kernel.channel_count()
            )));
        }
        Ok(SubsystemParams { omega, v, kernel })
    }

    /// Number of modes n (half the canonical dimension).
    pub fn n_modes(&self) -> usize {
        self.omega.nrows() / 2
    }

    /// Number of input fields M.
    pub fn field_count(&self) -> usize {
        self.v.nrows()
    }

    pub fn omega(&self) -> &RealMatrix {
        &self.omega
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.v
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    /// Dummy-field padding: extend the coupling matrix with zero rows and
    /// the kernel with placeholder unit-total channels. Zero coupling rows
    /// annihilate the new channels in the memory generator, so the
    /// dynamics are unchanged.
    pub fn pad_fields(&self, target_m: usize) -> Result<SubsystemParams> {
        let m = self.field_count();
        if target_m < m {
            return Err(Error::Dimension(format!(
                "cannot pad from {m} fields down to {target_m}"
            )));
        }
        if target_m == m {
            return Ok(self.clone());
        }
        let extra = target_m - m;
        let mut v = ComplexMatrix::zeros(target_m, self.omega.nrows());
        v.rows_mut(0, m).copy_from(&self.v);
        let placeholders: Result<Vec<_>> =
            (0..extra).map(|_| KernelChannel::single_exp(1.0, 1.0)).collect();
        let kernel = self.kernel.extended(placeholders?);
        SubsystemParams::new(self.omega.clone(), v, kernel)
    }

    /// Entrywise comparison of the parameter tuple within `tol`.
    pub fn approx_eq(&self, other: &SubsystemParams, tol: f64) -> bool {
        self.omega.shape() == other.omega.shape()
            && self.v.shape() == other.v.shape()
            && (&self.omega - &other.omega).abs().max() <= tol
            && self
                .v
                .iter()
                .zip(other.v.iter())
                .all(|(a, b)| (a - b).norm() <= tol)
            && self.kernel.approx_eq(&other.kernel, tol)
    }
}

/// Two subsystems plus the engineered Hamiltonian and coupling blocks.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    sub1: SubsystemParams,
    sub2: SubsystemParams,
    omega12: RealMatrix,
    v12: ComplexMatrix,
    v21: ComplexMatrix,
}

impl AugmentedSystem {
    pub fn new(
        sub1: SubsystemParams,
        sub2: SubsystemParams,
        omega12: RealMatrix,
        v12: ComplexMatrix,
        v21: ComplexMatrix,
    ) -> Result<Self> {
        let d = sub1.omega.nrows();
        let m = sub1.field_count();
        if sub2.omega.nrows() != d || sub2.field_count() != m {
            return Err(Error::Dimension(
                "subsystems must share mode and field counts".into(),
            ));
        }
        if omega12.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "omega12 must be {d}x{d}, got {}x{}",
                omega12.nrows(),
                omega12.ncols()
            )));
        }
        if v12.shape() != (m, d) || v21.shape() != (m, d) {
            return Err(Error::Dimension(format!(
                "engineered couplings must be {m}x{d}"
            )));
        }
        Ok(AugmentedSystem {
            sub1,
            sub2,
            omega12,
            v12,
            v21,
        })
    }

    /// Fully decoupled pair: zero engineered blocks.
    pub fn decoupled(sub1: SubsystemParams, sub2: SubsystemParams) -> Result<Self> {
        let d = sub1.omega.nrows();
        let m = sub1.field_count();
        let omega12 = RealMatrix::zeros(d, d);
        let z = ComplexMatrix::zeros(m, d);
        Self::new(sub1, sub2, omega12, z.clone(), z)
    }

    pub fn sub1(&self) -> &SubsystemParams {
        &self.sub1
    }

    pub fn sub2(&self) -> &SubsystemParams {
        &self.sub2
    }

    pub fn omega12(&self) -> &RealMatrix {
        &self.omega12
    }

    pub fn v12(&self) -> &ComplexMatrix {
        &self.v12
    }

    pub fn v21(&self) -> &ComplexMatrix {
        &self.v21
    }

    pub fn n_modes(&self) -> usize {
        self.sub1.n_modes()
    }

    /// Hamiltonian block matrix `R = [[Omega1, Omega12], [Omega12^T, Omega2]]`.
    pub fn r_matrix(&self) -> RealMatrix {
        let d = self.sub1.omega.nrows();
        let mut r = RealMatrix::zeros(2 * d, 2 * d);
        r.view_mut((0, 0), (d, d)).copy_from(&self.sub1.omega);
        r.view_mut((0, d), (d, d)).copy_from(&self.omega12);
        r.view_mut((d, 0), (d, d)).copy_from(&self.omega12.transpose());
        r.view_mut((d, d), (d, d)).copy_from(&self.sub2.omega);
        r
    }

    /// Block coupling matrix `[[V1, V12], [V21, V2]]`.
    pub fn v_matrix(&self) -> ComplexMatrix {
        let d = self.sub1.omega.nrows();
        let m = self.sub1.field_count();
        let mut v = ComplexMatrix::zeros(2 * m, 2 * d);
        v.view_mut((0, 0), (m, d)).copy_from(&self.sub1.v);
        v.view_mut((0, d), (m, d)).copy_from(&self.v12);
        v.view_mut((m, 0), (m, d)).copy_from(&self.v21);
        v.view_mut((m, d), (m, d)).copy_from(&self.sub2.v);
        v
    }

    /// Block-diagonal kernel `diag(Gamma1(t), Gamma2(t))` as 2M channels.
    pub fn block_kernel(&self) -> MemoryKernel {
        self.sub1
            .kernel
            .extended(self.sub2.kernel.channels().to_vec())
    }
}

/// Generator matrices of a (sub)system's expectation dynamics: the
/// Hamiltonian part, the lazily evaluated memory part, and the noise
/// input matrix. The noise matrix is assembled for completeness but is
/// inert under vacuum-mean expectation dynamics.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    pub a_h: RealMatrix,
    pub b: ComplexMatrix,
    j: RealMatrix,
    v: ComplexMatrix,
    kernel: MemoryKernel,
}

impl GeneratorSet {
    fn build(omega_like: &RealMatrix, v: ComplexMatrix, kernel: MemoryKernel) -> Result<Self> {
        let n = omega_like.nrows() / 2;
        let j = matops::symplectic(n)?;
        let a_h = 2.0 * &j * omega_like;
        // B = i J (-V†  V^T), stored but unused by expectation simulation.
        let d = omega_like.nrows();
        let m = v.nrows();
        let mut stacked = ComplexMatrix::zeros(d, 2 * m);
        stacked.view_mut((0, 0), (d, m)).copy_from(&(-v.adjoint()));
        stacked.view_mut((0, m), (d, m)).copy_from(&v.transpose());
        let b = matops::to_complex(&j) * stacked * Complex64::i();
        Ok(GeneratorSet { a_h, b, j, v, kernel })
    }

    /// Memory generator `A_K(t) = 2 J Im(V† Gamma(t) V)`.
    pub fn a_k(&self, t: f64) -> Result<RealMatrix> {
        let gamma = self.kernel.eval_diag(t)?;
        let scaled = ComplexMatrix::from_fn(self.v.nrows(), self.v.ncols(), |i, c| {
            self.v[(i, c)] * gamma[i]
        });
        let prod = self.v.adjoint() * scaled;
        Ok(2.0 * &self.j * matops::im_part(&prod))
    }

    /// As `a_k`, with tabulated kernel channels extended by zero beyond
    /// their grids (their tails are required to be decayed elsewhere).
    pub fn a_k_extended(&self, t: f64) -> RealMatrix {
        let gamma = self.kernel.eval_diag_extended(t);
        let scaled = ComplexMatrix::from_fn(self.v.nrows(), self.v.ncols(), |i, c| {
            self.v[(i, c)] * gamma[i]
        });
        let prod = self.v.adjoint() * scaled;
        2.0 * &self.j * matops::im_part(&prod)
    }

    /// Uniform-grid table `A_K(k * dt)`, `k = 0..=steps`. Solvers choose
    /// their own grids; this is the memoized evaluation path.
    pub fn a_k_table(&self, dt: f64, steps: usize) -> Result<Vec<RealMatrix>> {
        (0..=steps).map(|k| self.a_k(k as f64 * dt)).collect()
    }

    /// Exponential decomposition `A_K(t) = sum_m G_m exp(-beta_m t)`,
    /// available when every kernel channel is an exponential sum. Terms
    /// sharing a rate are merged.
    pub fn exp_terms(&self) -> Option<Vec<(RealMatrix, f64)>> {
        exp_terms_of(&self.j, &self.v, &self.kernel)
    }
}

/// Shared exponential-decomposition routine for memory generators of the
/// form `2 J Im(V† Gamma(t) V)` (also used for the error-dynamics kernel).
pub(crate) fn exp_terms_of(
    j: &RealMatrix,
    v: &ComplexMatrix,
    kernel: &MemoryKernel,
) -> Option<Vec<(RealMatrix, f64)>> {
    if !kernel.is_exponential() {
        return None;
    }
    let mut terms: Vec<(RealMatrix, f64)> = Vec::new();
    for (i, channel) in kernel.channels().iter().enumerate() {
        let KernelChannel::ExpSum(exp_terms) = channel else {
            return None;
        };
        // Rank-one contribution of channel i: 2 J Im(conj(v_i)^T v_i).
        let row = v.row(i);
        let outer = row.adjoint() * row;
        let base = 2.0 * j * matops::im_part(&outer);
        for term in exp_terms {
            let scale = term.weight * term.rate;
            match terms.iter_mut().find(|(_, r)| *r == term.rate) {
                Some((g, _)) => *g += &base * scale,
                None => terms.push((&base * scale, term.rate)),
            }
        }
    }
    Some(terms)
}

/// Generators of a single subsystem: `A_H = 2 J_n Omega`, memory part
/// `A_K(t) = 2 J_n Im(V† Gamma(t) V)`.
pub fn assemble_qsde(sub: &SubsystemParams) -> Result<GeneratorSet> {
    GeneratorSet::build(sub.omega(), sub.v.clone(), sub.kernel.clone())
}

/// Generators of the augmented system built from the block parameter
/// matrices: `A_H = 2 J_{2n} R` and the block memory generator.
pub fn augment(aug: &AugmentedSystem) -> Result<GeneratorSet> {
    GeneratorSet::build(&aug.r_matrix(), aug.v_matrix(), aug.block_kernel())
}

/// The four 2n x 2n blocks of the augmented memory generator, computed
/// from the per-block coupling formula rather than the assembled product.
/// Serves as an independent route for cross-checking `augment`.
pub fn augmented_memory_blocks(aug: &AugmentedSystem, t: f64) -> Result<[RealMatrix; 4]> {
    let n = aug.n_modes();
    let j = matops::symplectic(n)?;
    let g1 = aug.sub1.kernel.eval_diag(t)?;
    let g2 = aug.sub2.kernel.eval_diag(t)?;
    let weighted = |a: &ComplexMatrix, g: &[f64], b: &ComplexMatrix| -> ComplexMatrix {
        let scaled = ComplexMatrix::from_fn(b.nrows(), b.ncols(), |i, c| b[(i, c)] * g[i]);
        a.adjoint() * scaled
    };
    let v1 = &aug.sub1.v;
    let v2 = &aug.sub2.v;
    let block = |p: ComplexMatrix| 2.0 * &j * matops::im_part(&p);
    let b11 = block(weighted(v1, &g1, v1) + weighted(&aug.v21, &g2, &aug.v21));
    let b12 = block(weighted(v1, &g1, &aug.v12) + weighted(&aug.v21, &g2, v2));
    let b21 = block(weighted(&aug.v12, &g1, v1) + weighted(v2, &g2, &aug.v21));
    let b22 = block(weighted(&aug.v12, &g1, &aug.v12) + weighted(v2, &g2, v2));
    Ok([b11, b12, b21, b22])
}

/// Position/momentum expectations of a product of coherent states, one
/// amplitude per mode, interleaved as (sqrt2 Re a1, sqrt2 Im a1, ...).
pub fn coherent_expectations(alphas: &[Complex64]) -> RealVector {
    let mut out = DVector::zeros(2 * alphas.len());
    let s = std::f64::consts::SQRT_2;
    for (k, a) in alphas.iter().enumerate() {
        out[2 * k] = s * a.re;
        out[2 * k + 1] = s * a.im;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    pub(crate) fn example_subsystem() -> SubsystemParams {
        let omega = RealMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]);
        let v = ComplexMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(0.2, 0.0), Complex64::new(0.0, -0.1)],
        );
        let kernel = MemoryKernel::single_exp(1.0, 9.0).unwrap();
        SubsystemParams::new(omega, v, kernel).unwrap()
    }

    fn random_subsystem(rng: &mut impl Rng, n: usize, m: usize) -> SubsystemParams {
        let raw = RealMatrix::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-0.5..0.5));
        let omega = (&raw + raw.transpose()) * 0.5;
        let v = ComplexMatrix::from_fn(m, 2 * n, |_, _| {
            Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
        });
        let channels = (0..m)
            .map(|_| {
                KernelChannel::single_exp(rng.gen_range(0.5..2.0), rng.gen_range(1.0..10.0))
                    .unwrap()
            })
            .collect();
        SubsystemParams::new(omega, v, MemoryKernel::new(channels).unwrap()).unwrap()
    }

    #[test]
    fn example_hamiltonian_generator() {
        let gen = assemble_qsde(&example_subsystem()).unwrap();
        let expected = RealMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, -0.2]);
        assert!((gen.a_h - expected).abs().max() <= 1e-14);
    }

    #[test]
    fn example_memory_generator_at_zero() {
        let gen = assemble_qsde(&example_subsystem()).unwrap();
        let ak0 = gen.a_k(0.0).unwrap();
        let expected = RealMatrix::from_row_slice(2, 2, &[0.36, 0.0, 0.0, 0.36]);
        assert!((ak0 - expected).abs().max() <= 1e-14);
    }

    #[test]
    fn zero_coupling_kills_memory_generator() {
        let omega = RealMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]);
        let v = ComplexMatrix::zeros(1, 2);
        let kernel = MemoryKernel::single_exp(1.0, 9.0).unwrap();
        let gen = assemble_qsde(&SubsystemParams::new(omega, v, kernel).unwrap()).unwrap();
        for t in [0.0, 0.5, 2.0] {
            assert!(gen.a_k(t).unwrap().abs().max() <= 1e-16);
        }
    }

    #[test]
    fn padding_identity_and_invariance() {
        let sub = example_subsystem();
        let same = sub.pad_fields(1).unwrap();
        assert!(same.approx_eq(&sub, 0.0));

        let padded = sub.pad_fields(3).unwrap();
        assert_eq!(padded.field_count(), 3);
        assert!(sub.pad_fields(0).is_err());

        let g0 = assemble_qsde(&sub).unwrap();
        let g1 = assemble_qsde(&padded).unwrap();
        for t in [0.0, 0.1, 0.7, 3.0] {
            let gap = (g0.a_k(t).unwrap() - g1.a_k(t).unwrap()).abs().max();
            assert!(gap <= 1e-14);
        }
        assert!((g0.a_h - g1.a_h).abs().max() <= 1e-14);
    }

    #[test]
    fn decoupled_augmentation_is_block_diagonal() {
        let sub = example_subsystem();
        let aug = AugmentedSystem::decoupled(sub.clone(), sub.clone()).unwrap();
        let whole = augment(&aug).unwrap();
        let part = assemble_qsde(&sub).unwrap();
        let d = 2;
        for t in [0.0, 0.3, 1.0] {
            let ak = whole.a_k(t).unwrap();
            let sub_ak = part.a_k(t).unwrap();
            assert!((ak.view((0, 0), (d, d)) - &sub_ak).abs().max() <= 1e-14);
            assert!((ak.view((d, d), (d, d)) - &sub_ak).abs().max() <= 1e-14);
            assert!(ak.view((0, d), (d, d)).abs().max() <= 1e-14);
            assert!(ak.view((d, 0), (d, d)).abs().max() <= 1e-14);
        }
        let ah = whole.a_h;
        assert!((ah.view((0, 0), (d, d)) - &part.a_h).abs().max() <= 1e-14);
        assert!((ah.view((d, d), (d, d)) - &part.a_h).abs().max() <= 1e-14);
    }

    #[test]
    fn block_formula_matches_assembled_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let n = rng.gen_range(1..=2);
            let m = rng.gen_range(n..=n + 1);
            let sub1 = random_subsystem(&mut rng, n, m);
            let sub2 = random_subsystem(&mut rng, n, m);
            let omega12 = RealMatrix::from_fn(2 * n, 2 * n, |_, _| rng.gen_range(-0.5..0.5));
            let v12 = ComplexMatrix::from_fn(m, 2 * n, |_, _| {
                Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
            });
            let v21 = ComplexMatrix::from_fn(m, 2 * n, |_, _| {
                Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))
            });
            let aug = AugmentedSystem::new(sub1, sub2, omega12, v12, v21).unwrap();
            let gen = augment(&aug).unwrap();
            for t in [0.0, 0.2, 1.0] {
                let ak = gen.a_k(t).unwrap();
                let [b11, b12, b21, b22] = augmented_memory_blocks(&aug, t).unwrap();
                let d = 2 * n;
                assert!((ak.view((0, 0), (d, d)) - b11).abs().max() <= 1e-12);
                assert!((ak.view((0, d), (d, d)) - b12).abs().max() <= 1e-12);
                assert!((ak.view((d, 0), (d, d)) - b21).abs().max() <= 1e-12);
                assert!((ak.view((d, d), (d, d)) - b22).abs().max() <= 1e-12);
            }
        }
    }

    #[test]
    fn memory_generator_is_real_in_complex_arithmetic() {
        // Recompute 2 J Im(V† Gamma V) fully in complex arithmetic and check
        // the residual imaginary part.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sub = random_subsystem(&mut rng, 2, 3);
        let j = matops::symplectic(2).unwrap();
        for t in [0.0, 0.4, 1.3] {
            let gamma = sub.kernel().eval_diag(t).unwrap();
            let scaled = ComplexMatrix::from_fn(3, 4, |i, c| sub.coupling()[(i, c)] * gamma[i]);
            let prod = sub.coupling().adjoint() * scaled;
            let im = (prod.clone() - prod.adjoint()) * Complex64::new(0.0, -0.5);
            let complex_ak = matops::to_complex(&j) * im * Complex64::new(2.0, 0.0);
            assert!(complex_ak.iter().map(|z| z.im.abs()).fold(0.0, f64::max) <= 1e-14);
        }
    }

    #[test]
    fn exp_terms_reconstruct_memory_generator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sub = random_subsystem(&mut rng, 2, 2);
        let gen = assemble_qsde(&sub).unwrap();
        let terms = gen.exp_terms().unwrap();
        for t in [0.0, 0.5, 2.0] {
            let mut rebuilt = RealMatrix::zeros(4, 4);
            for (g, rate) in &terms {
                rebuilt += g * (-rate * t).exp();
            }
            assert!((rebuilt - gen.a_k(t).unwrap()).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn coherent_state_expectations() {
        let one = coherent_expectations(&[Complex64::new(1.0, 0.0)]);
        assert_abs_diff_eq!(one[0], std::f64::consts::SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(one[1], 0.0, epsilon = 1e-15);

        let vac = coherent_expectations(&[Complex64::new(0.0, 0.0)]);
        assert_eq!(vac.as_slice(), &[0.0, 0.0]);

        let imag = coherent_expectations(&[Complex64::new(0.0, 1.0)]);
        assert_abs_diff_eq!(imag[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(imag[1], std::f64::consts::SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn rejects_asymmetric_omega() {
        let omega = RealMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let v = ComplexMatrix::zeros(1, 2);
        let kernel = MemoryKernel::single_exp(1.0, 1.0).unwrap();
        assert!(SubsystemParams::new(omega, v, kernel).is_err());
    }
}
