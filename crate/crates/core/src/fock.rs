//! States and operators on a truncated Fock basis (ħ = 1, m = 1).
//!
//! Index `n` of every vector and matrix is the occupation number of `|n⟩`,
//! ascending, so the ladder operators are single off-diagonal bands. Storage
//! is dense, but every operator remembers its band structure and the
//! matrix-vector kernels only visit entries inside it.

use std::ops::{Add, Mul, Sub};

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Smallest truncation the library accepts.
pub const MIN_DIM: usize = 2;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn check_dim(dim: usize) -> Result<()> {
    if dim < MIN_DIM {
        return Err(Error::InvalidDimension { dim, min: MIN_DIM });
    }
    Ok(())
}

fn check_shape(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Shape { expected, found });
    }
    Ok(())
}

/// A pure state `|ψ⟩` in the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps raw amplitudes. No normalization is applied.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        check_dim(amps.len())?;
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm in place and returns the norm found beforehand.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            self.amps.iter_mut().for_each(|c| *c *= inv);
        }
        norm
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_shape(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|ψ⟩⟨ψ|` as a dense matrix.
    pub fn projector(&self) -> DMatrix<C64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.amps[i] * self.amps[j].conj())
    }

    /// Probability held by the top 10% of basis indices (at least one index).
    pub fn boundary_population(&self) -> f64 {
        let n = self.dim();
        let count = n.div_ceil(10).max(1);
        let top: f64 = self.amps[n - count..].iter().map(|c| c.norm_sqr()).sum();
        top.min(1.0)
    }

    /// Population of each Fock level.
    pub fn populations(&self) -> Vec<f64> {
        self.amps.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// A dense complex operator with a cached band profile.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
    hermitian_hint: bool,
    lower: usize,
    upper: usize,
}

impl OperatorMatrix {
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Shape {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        check_dim(entries.nrows())?;
        Ok(Self::from_square(entries, false))
    }

    /// Same as [`from_matrix`](Self::from_matrix) but flags the result as
    /// Hermitian. The flag is advisory; see [`check_hermitian`](Self::check_hermitian).
    pub fn hermitian(entries: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::from_matrix(entries)?;
        op.hermitian_hint = true;
        Ok(op)
    }

    fn from_square(entries: DMatrix<C64>, hermitian_hint: bool) -> Self {
        let (lower, upper) = band_profile(&entries);
        Self {
            entries,
            hermitian_hint,
            lower,
            upper,
        }
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::from_square(DMatrix::zeros(dim, dim), true))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::from_square(DMatrix::identity(dim, dim), true))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[(row, col)]
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    /// `(lower, upper)`: entries with `i - j > lower` or `j - i > upper` are zero.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|c| *c == ZERO)
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        Self {
            entries: self.entries.adjoint(),
            hermitian_hint: self.hermitian_hint,
            lower: self.upper,
            upper: self.lower,
        }
    }

    /// Largest entrywise `|A - A†|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..=j {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn check_hermitian(&self, tol: f64) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > tol {
            return Err(Error::Invariant(format!(
                "operator flagged Hermitian deviates by {defect:.3e}"
            )));
        }
        Ok(())
    }

    pub fn scale(&self, factor: C64) -> OperatorMatrix {
        let hermitian = self.hermitian_hint && factor.im == 0.0;
        Self::from_square(&self.entries * factor, hermitian)
    }

    pub fn scale_real(&self, factor: f64) -> OperatorMatrix {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn try_add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_shape(self.dim(), other.dim())?;
        Ok(Self::from_square(
            &self.entries + &other.entries,
            self.hermitian_hint && other.hermitian_hint,
        ))
    }

    pub fn try_sub(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_shape(self.dim(), other.dim())?;
        Ok(Self::from_square(
            &self.entries - &other.entries,
            self.hermitian_hint && other.hermitian_hint,
        ))
    }

    pub fn try_mul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_shape(self.dim(), other.dim())?;
        Ok(Self::from_square(&self.entries * &other.entries, false))
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.try_mul(other)?.try_sub(&other.try_mul(self)?)
    }

    /// `AB + BA`.
    pub fn anticommutator(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.try_mul(other)?.try_add(&other.try_mul(self)?)
    }

    /// Writes `A x` into `out`, visiting only entries inside the band.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        out.iter_mut().for_each(|c| *c = ZERO);
        let data = self.entries.as_slice();
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            let lo = j.saturating_sub(self.upper);
            let hi = (j + self.lower).min(n - 1);
            let col = &data[j * n..(j + 1) * n];
            for i in lo..=hi {
                out[i] += col[i] * xj;
            }
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_shape(self.dim(), psi.dim())?;
        let mut out = vec![ZERO; psi.dim()];
        self.apply_into(&psi.amps, &mut out);
        Ok(StateVector { amps: out })
    }

    /// `A M` for a dense `M`, exploiting the band of `A`.
    pub(crate) fn left_mul_dense(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for c in 0..n {
            let src = m.column(c);
            let mut dst = out.column_mut(c);
            for k in 0..n {
                let v = src[k];
                if v == ZERO {
                    continue;
                }
                let lo = k.saturating_sub(self.upper);
                let hi = (k + self.lower).min(n - 1);
                for i in lo..=hi {
                    dst[i] += self.entries[(i, k)] * v;
                }
            }
        }
        out
    }

    /// `M A` for a dense `M`, exploiting the band of `A`.
    pub(crate) fn right_mul_dense(&self, m: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for c in 0..n {
            let lo = c.saturating_sub(self.upper);
            let hi = (c + self.lower).min(n - 1);
            for k in lo..=hi {
                let a = self.entries[(k, c)];
                if a == ZERO {
                    continue;
                }
                let src = m.column(k);
                let mut dst = out.column_mut(c);
                dst.axpy(a, &src, ONE);
            }
        }
        out
    }
}

fn band_profile(m: &DMatrix<C64>) -> (usize, usize) {
    let n = m.nrows();
    let (mut lower, mut upper) = (0, 0);
    for j in 0..n {
        for i in 0..n {
            if m[(i, j)] != ZERO {
                if i > j {
                    lower = lower.max(i - j);
                } else {
                    upper = upper.max(j - i);
                }
            }
        }
    }
    (lower, upper)
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_add(rhs).expect("operator dimensions differ")
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_sub(rhs).expect("operator dimensions differ")
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.try_mul(rhs).expect("operator dimensions differ")
    }
}

impl Mul<f64> for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: f64) -> OperatorMatrix {
        self.scale_real(rhs)
    }
}

/// Ladder operator `a`: entry `(n-1, n) = √n`.
pub fn annihilation_op(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix::from_square(m, false))
}

pub fn creation_op(dim: usize) -> Result<OperatorMatrix> {
    Ok(annihilation_op(dim)?.adjoint())
}

/// `a†a`, diagonal with entries `0, 1, …, dim-1`.
pub fn number_op(dim: usize) -> Result<OperatorMatrix> {
    check_dim(dim)?;
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            C64::new(i as f64, 0.0)
        } else {
            ZERO
        }
    });
    Ok(OperatorMatrix::from_square(m, true))
}

/// `Q = (a + a†)/√2`.
pub fn position_op(dim: usize) -> Result<OperatorMatrix> {
    let a = annihilation_op(dim)?;
    let q = (&a + &a.adjoint()).scale_real(std::f64::consts::FRAC_1_SQRT_2);
    Ok(OperatorMatrix { hermitian_hint: true, ..q })
}

/// `P = -i(a - a†)/√2`.
pub fn momentum_op(dim: usize) -> Result<OperatorMatrix> {
    let a = annihilation_op(dim)?;
    let p = (&a - &a.adjoint()).scale(C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2));
    Ok(OperatorMatrix { hermitian_hint: true, ..p })
}

pub fn fock_state(n: usize, dim: usize) -> Result<StateVector> {
    check_dim(dim)?;
    if n >= dim {
        return Err(Error::Index { index: n, dim });
    }
    let mut amps = vec![ZERO; dim];
    amps[n] = ONE;
    Ok(StateVector { amps })
}

/// Whether `dim` comfortably holds a coherent state of amplitude `alpha`:
/// `|α|² + 5|α| + 10 ≤ dim`.
pub fn truncation_adequate(alpha: C64, dim: usize) -> bool {
    let r = alpha.norm();
    r * r + 5.0 * r + 10.0 <= dim as f64
}

/// Coherent state `|α⟩` renormalized inside the truncated basis.
///
/// An inadequate truncation is logged as a warning, not rejected: trajectories
/// routinely pass through states that briefly violate the heuristic.
pub fn coherent_state(alpha: C64, dim: usize) -> Result<StateVector> {
    check_dim(dim)?;
    if !truncation_adequate(alpha, dim) {
        warn!("coherent state |α| = {:.3} is poorly resolved by dim = {dim}", alpha.norm());
    }
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..dim {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    let mut psi = StateVector { amps };
    psi.normalize();
    Ok(psi)
}

/// `⟨ψ|A|ψ⟩`.
pub fn expectation(psi: &StateVector, op: &OperatorMatrix) -> Result<C64> {
    check_shape(op.dim(), psi.dim())?;
    let mut buf = vec![ZERO; psi.dim()];
    op.apply_into(&psi.amps, &mut buf);
    Ok(psi.amps.iter().zip(&buf).map(|(a, b)| a.conj() * b).sum())
}

/// `‖Aψ‖² - |⟨A⟩|²`, which is `⟨A²⟩ - ⟨A⟩²` for Hermitian `A`.
pub fn variance(psi: &StateVector, op: &OperatorMatrix) -> Result<f64> {
    check_shape(op.dim(), psi.dim())?;
    let mut buf = vec![ZERO; psi.dim()];
    op.apply_into(&psi.amps, &mut buf);
    let mean: C64 = psi.amps.iter().zip(&buf).map(|(a, b)| a.conj() * b).sum();
    let second: f64 = buf.iter().map(|c| c.norm_sqr()).sum();
    Ok(second - mean.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn max_entry_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn annihilation_small_dims() {
        let a = annihilation_op(2).unwrap();
        assert_eq!(a.get(0, 1), ONE);
        assert_eq!(a.get(0, 0), ZERO);
        assert_eq!(a.get(1, 0), ZERO);
        assert_eq!(a.get(1, 1), ZERO);
        let a3 = annihilation_op(3).unwrap();
        assert_abs_diff_eq!(a3.get(1, 2).re, 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(a3.bandwidth(), (0, 1));
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(annihilation_op(1), Err(Error::InvalidDimension { .. })));
        assert!(matches!(position_op(0), Err(Error::InvalidDimension { .. })));
        assert!(matches!(fock_state(4, 4), Err(Error::Index { index: 4, dim: 4 })));
    }

    #[test]
    fn commutator_has_truncation_corner() {
        let a = annihilation_op(8).unwrap();
        let c = a.commutator(&a.adjoint()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expected = match (i == j, i) {
                    (true, 7) => -7.0,
                    (true, _) => 1.0,
                    _ => 0.0,
                };
                assert_abs_diff_eq!(c.get(i, j).re, expected, epsilon = 1e-12);
                assert_abs_diff_eq!(c.get(i, j).im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quadratures_dim2() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = position_op(2).unwrap();
        let p = momentum_op(2).unwrap();
        assert_abs_diff_eq!(q.get(0, 1).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(q.get(1, 0).re, s, epsilon = 1e-15);
        assert_eq!(q.get(0, 0), ZERO);
        assert_abs_diff_eq!(p.get(0, 1).im, -s, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(1, 0).im, s, epsilon = 1e-15);
        assert_abs_diff_eq!(p.get(0, 1).re, 0.0, epsilon = 1e-15);
        assert!(q.hermitian_hint() && p.hermitian_hint());
        q.check_hermitian(1e-12).unwrap();
        p.check_hermitian(1e-12).unwrap();
    }

    #[test]
    fn canonical_commutator_on_upper_block() {
        let dim = 10;
        let q = position_op(dim).unwrap();
        let p = momentum_op(dim).unwrap();
        let c = q.commutator(&p).unwrap();
        let mut worst = 0.0_f64;
        for i in 0..dim - 1 {
            for j in 0..dim - 1 {
                let target = if i == j { C64::new(0.0, 1.0) } else { ZERO };
                worst = worst.max((c.get(i, j) - target).norm());
            }
        }
        assert!(worst <= 1e-12, "worst = {worst}");
    }

    #[test]
    fn quadrature_squares_match_number_operator() {
        let dim = 12;
        let q = position_op(dim).unwrap();
        let p = momentum_op(dim).unwrap();
        let lhs = &(&q * &q) + &(&p * &p);
        let rhs = &number_op(dim).unwrap().scale_real(2.0) + &OperatorMatrix::identity(dim).unwrap();
        for i in 0..dim - 1 {
            for j in 0..dim - 1 {
                assert!((lhs.get(i, j) - rhs.get(i, j)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn number_operator_eigenstates() {
        let dim = 9;
        let num = number_op(dim).unwrap();
        for n in 0..dim {
            let psi = fock_state(n, dim).unwrap();
            let out = num.apply(&psi).unwrap();
            for (k, c) in out.amplitudes().iter().enumerate() {
                let expected = if k == n { n as f64 } else { 0.0 };
                assert_eq!(*c, C64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn fock_states() {
        let v = fock_state(0, 4).unwrap();
        assert_eq!(v.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        let v = fock_state(2, 4).unwrap();
        assert_eq!(v.amplitudes(), &[ZERO, ZERO, ONE, ZERO]);
    }

    #[test]
    fn coherent_state_values() {
        assert_eq!(coherent_state(ZERO, 8).unwrap(), fock_state(0, 8).unwrap());

        let psi = coherent_state(ONE, 20).unwrap();
        assert_abs_diff_eq!(psi.amplitudes()[0].re, 0.60653066, epsilon = 1e-8);
        // reference amplitude straight from e^{-|α|²/2} αⁿ/√n!
        let mut fact = 1.0;
        for n in 0..20 {
            if n > 0 {
                fact *= n as f64;
            }
            let direct = (-0.5_f64).exp() / fact.sqrt();
            assert_abs_diff_eq!(psi.amplitudes()[n].re, direct, epsilon = 1e-14);
        }

        let a = annihilation_op(20).unwrap();
        let mut residual = a.apply(&psi).unwrap();
        for (r, c) in residual.amplitudes_mut().iter_mut().zip(psi.amplitudes()) {
            *r -= c;
        }
        assert!(residual.norm() <= 1e-6);
        assert!(truncation_adequate(ONE, 20));
        assert!(!truncation_adequate(C64::new(5.0, 0.0), 20));
    }

    #[test]
    fn expectation_examples() {
        let num = number_op(4).unwrap();
        let v = expectation(&fock_state(1, 4).unwrap(), &num).unwrap();
        assert_eq!(v, ONE);
        let a = annihilation_op(4).unwrap();
        assert_eq!(expectation(&fock_state(0, 4).unwrap(), &a).unwrap(), ZERO);

        let a16 = annihilation_op(16).unwrap();
        let psi = coherent_state(C64::new(0.5, 0.0), 16).unwrap();
        let v = expectation(&psi, &a16).unwrap();
        assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-8);

        assert!(matches!(
            expectation(&fock_state(0, 5).unwrap(), &a),
            Err(Error::Shape { expected: 4, found: 5 })
        ));
    }

    #[test]
    fn variance_examples() {
        let q20 = position_op(20).unwrap();
        let v = variance(&coherent_state(ONE, 20).unwrap(), &q20).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-6);
        let q8 = position_op(8).unwrap();
        let v = variance(&fock_state(0, 8).unwrap(), &q8).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        let v = variance(&fock_state(1, 8).unwrap(), &number_op(8).unwrap()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn banded_kernels_match_dense_products() {
        let dim = 7;
        let q = position_op(dim).unwrap();
        let p = momentum_op(dim).unwrap();
        let op = &(&(&q * &q) * &q) + &p;
        let m = DMatrix::from_fn(dim, dim, |i, j| C64::new(i as f64 - 0.3 * j as f64, 0.1 * (i * j) as f64));
        assert!(max_entry_diff(&op.left_mul_dense(&m), &(op.entries() * &m)) < 1e-12);
        assert!(max_entry_diff(&op.right_mul_dense(&m), &(&m * op.entries())) < 1e-12);
    }

    fn arb_state(dim: usize) -> impl Strategy<Value = StateVector> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
            .prop_filter("non-zero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
            .prop_map(|v| {
                StateVector::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
                    .unwrap()
                    .normalized()
            })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(psi in arb_state(9)) {
            prop_assert!((psi.norm_sqr() - 1.0).abs() <= 1e-12);
            let again = psi.clone().normalized();
            for (a, b) in psi.amplitudes().iter().zip(again.amplitudes()) {
                prop_assert!((a - b).norm() <= 1e-15);
            }
        }

        #[test]
        fn hermitian_expectations_are_real(psi in arb_state(9)) {
            let q = position_op(9).unwrap();
            let p = momentum_op(9).unwrap();
            let h = &(&(&q * &q) * &(&q * &q)) + &(&(&q * &p) + &(&p * &q));
            for op in [&q, &p, &h] {
                let v = expectation(&psi, op).unwrap();
                prop_assert!(v.im.abs() <= 1e-10);
                prop_assert!(variance(&psi, op).unwrap() >= -1e-10);
            }
        }

        #[test]
        fn apply_matches_dense(psi in arb_state(6)) {
            let op = &position_op(6).unwrap() * &momentum_op(6).unwrap();
            let fast = op.apply(&psi).unwrap();
            let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
            let dense = op.entries() * v;
            for (a, b) in fast.amplitudes().iter().zip(dense.iter()) {
                prop_assert!((a - b).norm() <= 1e-12);
            }
        }
    }
}
