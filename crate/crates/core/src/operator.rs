//! Dense complex operators on the composite space cavity A ⊗ cavity B ⊗ ancilla.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default tolerance for Hermiticity checks (max-abs entrywise).
pub const HERMITIAN_TOL: f64 = 1e-12;

/// How the ancilla factor of the composite space is represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AncillaBasis {
    Fock,
    DiagonalCat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    A,
    B,
    C,
}

/// Truncations of the three factors, fixed order A ⊗ B ⊗ C.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub dim_a: usize,
    pub dim_b: usize,
    pub dim_c: usize,
    pub ancilla_basis: AncillaBasis,
}

impl HilbertSpec {
    pub fn new(dim_a: usize, dim_b: usize, dim_c: usize, ancilla_basis: AncillaBasis) -> Result<Self> {
        for d in [dim_a, dim_b, dim_c] {
            if d < 2 {
                return Err(Error::InvalidDimension {
                    dim: d,
                    reason: "every factor needs at least two levels",
                });
            }
        }
        Ok(Self {
            dim_a,
            dim_b,
            dim_c,
            ancilla_basis,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.dim_a * self.dim_b * self.dim_c
    }

    pub fn dim(&self, slot: Slot) -> usize {
        match slot {
            Slot::A => self.dim_a,
            Slot::B => self.dim_b,
            Slot::C => self.dim_c,
        }
    }

    /// Flat index of |na, nb, q⟩ with the ancilla index running fastest.
    pub fn index(&self, na: usize, nb: usize, q: usize) -> usize {
        (na * self.dim_b + nb) * self.dim_c + q
    }

    pub fn cavity_dim(&self) -> usize {
        self.dim_a * self.dim_b
    }
}

/// A dense square operator, optionally tagged with the composite space it lives on.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    data: CMatrix,
    space: Option<HilbertSpec>,
}

impl Operator {
    /// Operator on a single mode (no composite space attached).
    pub fn single_mode(data: CMatrix) -> Result<Self> {
        check_square(&data)?;
        Ok(Self { data, space: None })
    }

    pub fn on_space(space: HilbertSpec, data: CMatrix) -> Result<Self> {
        check_square(&data)?;
        if data.nrows() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: data.nrows(),
            });
        }
        Ok(Self {
            data,
            space: Some(space),
        })
    }

    pub fn identity(space: HilbertSpec) -> Self {
        let n = space.total_dim();
        Self {
            data: CMatrix::identity(n, n),
            space: Some(space),
        }
    }

    pub fn zeros(space: HilbertSpec) -> Self {
        let n = space.total_dim();
        Self {
            data: CMatrix::zeros(n, n),
            space: Some(space),
        }
    }

    /// Pure-state projector |ψ⟩⟨ψ| on a composite space.
    pub fn projector(space: HilbertSpec, psi: &nalgebra::DVector<C64>) -> Result<Self> {
        Self::on_space(space, psi * psi.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn space(&self) -> Option<&HilbertSpec> {
        self.space.as_ref()
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    pub fn dagger(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            space: self.space,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            data: &self.data * s,
            space: self.space,
        }
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// max |M - M†| entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs_diff(&self.data, &self.data.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if let (Some(a), Some(b)) = (&self.space, &other.space) {
            if a != b {
                return Err(Error::DimensionMismatch {
                    expected: a.total_dim(),
                    found: b.total_dim(),
                });
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            data: &self.data + &other.data,
            space: self.space.or(other.space),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            data: &self.data - &other.data,
            space: self.space.or(other.space),
        })
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            data: &self.data * &other.data,
            space: self.space.or(other.space),
        })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            data: &self.data * &other.data - &other.data * &self.data,
            space: self.space.or(other.space),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidDimension {
            dim: 0,
            reason: "empty operator",
        });
    }
    Ok(())
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Ladder operator with ⟨n−1|a|n⟩ = √n.
pub fn annihilation(dim: usize) -> Result<Operator> {
    Ok(Operator {
        data: annihilation_matrix(dim)?,
        space: None,
    })
}

pub fn creation(dim: usize) -> Result<Operator> {
    Ok(annihilation(dim)?.dagger())
}

pub fn number(dim: usize) -> Result<Operator> {
    check_mode_dim(dim)?;
    Ok(Operator {
        data: CMatrix::from_diagonal(&nalgebra::DVector::from_fn(dim, |n, _| C64::new(n as f64, 0.0))),
        space: None,
    })
}

pub(crate) fn annihilation_matrix(dim: usize) -> Result<CMatrix> {
    check_mode_dim(dim)?;
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(m)
}

fn check_mode_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        Err(Error::InvalidDimension {
            dim,
            reason: "a mode needs at least two Fock levels",
        })
    } else {
        Ok(())
    }
}

/// True when the truncation is likely too small to represent D(amp) faithfully.
pub fn displacement_truncation_suspect(amp: C64, dim: usize) -> bool {
    amp.norm_sqr() > dim as f64 / 4.0
}

/// D(amp) = exp(amp·a† − amp*·a), exponentiated at the working truncation.
pub fn displacement(amp: C64, dim: usize) -> Result<Operator> {
    let a = annihilation_matrix(dim)?;
    let gen = a.adjoint() * amp - &a * amp.conj();
    Ok(Operator {
        data: gen.exp(),
        space: None,
    })
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Embed a single-mode operator into `spec`, identity on the other two factors.
pub fn embed(op: &Operator, slot: Slot, spec: &HilbertSpec) -> Result<Operator> {
    let d = spec.dim(slot);
    if op.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: op.dim(),
        });
    }
    Operator::on_space(*spec, embed_matrix(op.data(), slot, spec))
}

pub(crate) fn embed_matrix(m: &CMatrix, slot: Slot, spec: &HilbertSpec) -> CMatrix {
    let ia = CMatrix::identity(spec.dim_a, spec.dim_a);
    let ib = CMatrix::identity(spec.dim_b, spec.dim_b);
    let ic = CMatrix::identity(spec.dim_c, spec.dim_c);
    match slot {
        Slot::A => kron(&kron(m, &ib), &ic),
        Slot::B => kron(&kron(&ia, m), &ic),
        Slot::C => kron(&kron(&ia, &ib), m),
    }
}

/// Tr[state · obs].
pub fn expectation(state: &Operator, obs: &Operator) -> Result<C64> {
    state.check_same(obs)?;
    Ok(trace_of_product(state.data(), obs.data()))
}

/// Tr[A·B] without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn ladder_small_dims() {
        let a2 = annihilation(2).unwrap();
        assert_eq!(a2.data()[(0, 1)], c(1.0));
        assert_eq!(a2.data()[(1, 0)], c(0.0));
        let a3 = annihilation(3).unwrap();
        assert_eq!(a3.data()[(0, 1)], c(1.0));
        assert!((a3.data()[(1, 2)] - c(2f64.sqrt())).norm() < 1e-15);
        let nonzero = a3.data().iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn number_from_ladder() {
        let a = annihilation(4).unwrap();
        let n = a.dagger().compose(&a).unwrap();
        for k in 0..4 {
            assert!((n.data()[(k, k)] - c(k as f64)).norm() < 1e-14);
        }
        assert!(max_abs_diff(n.data(), number(4).unwrap().data()) < 1e-14);
    }

    #[test]
    fn too_small_dimension_rejected() {
        assert!(matches!(annihilation(1), Err(Error::InvalidDimension { .. })));
        assert!(HilbertSpec::new(3, 1, 3, AncillaBasis::Fock).is_err());
    }

    #[test]
    fn ladder_commutator_below_top_level() {
        let a = annihilation(6).unwrap();
        let comm = a.commutator(&a.dagger()).unwrap();
        for n in 0..5 {
            assert!((comm.data()[(n, n)] - c(1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement(C64::new(0.0, 0.0), 10).unwrap();
        assert!(max_abs_diff(d.data(), &CMatrix::identity(10, 10)) < 1e-15);
    }

    #[test]
    fn coherent_state_photon_number() {
        let amp = c(3f64.sqrt());
        let d = displacement(amp, 30).unwrap();
        let psi = d.data().column(0).into_owned();
        let n = number(30).unwrap();
        let mean = (psi.adjoint() * n.data() * &psi)[(0, 0)].re;
        // oracle: Poisson weights e^{-|a|^2}|a|^{2n}/n!
        let lam = amp.norm_sqr();
        let mut w = (-lam).exp();
        let mut series = 0.0;
        for k in 0..30 {
            if k > 0 {
                w *= lam / k as f64;
            }
            series += k as f64 * w;
            assert!((psi[k].norm_sqr() - w).abs() < 1e-6);
        }
        assert!((mean - 3.0).abs() < 1e-6);
        assert!((series - 3.0).abs() < 1e-6);
    }

    #[test]
    fn displacement_inverse() {
        let amp = c(3f64.sqrt());
        let p = displacement(amp, 30).unwrap();
        let m = displacement(-amp, 30).unwrap();
        let prod = p.compose(&m).unwrap();
        assert!(max_abs_diff(prod.data(), &CMatrix::identity(30, 30)) < 1e-8);
    }

    #[test]
    fn displacement_unitarity_improves_with_dim() {
        let amp = C64::new(1.2, 0.7);
        let mut last = f64::INFINITY;
        for dim in [8, 12, 16, 20, 24] {
            let d = displacement(amp, dim).unwrap();
            let err = max_abs_diff(&(d.data().adjoint() * d.data()), &CMatrix::identity(dim, dim));
            assert!(err <= last + 1e-15, "dim {dim}: {err} > {last}");
            last = err;
        }
        assert!(!displacement_truncation_suspect(amp, 24));
        assert!(displacement_truncation_suspect(c(3.0), 20));
    }

    #[test]
    fn embed_identity_is_identity() {
        let spec = HilbertSpec::new(3, 2, 4, AncillaBasis::Fock).unwrap();
        for slot in [Slot::A, Slot::B, Slot::C] {
            let d = spec.dim(slot);
            let id = Operator::single_mode(CMatrix::identity(d, d)).unwrap();
            let e = embed(&id, slot, &spec).unwrap();
            assert!(max_abs_diff(e.data(), &CMatrix::identity(24, 24)) < 1e-15);
        }
    }

    #[test]
    fn embedded_modes_commute() {
        let spec = HilbertSpec::new(3, 3, 3, AncillaBasis::Fock).unwrap();
        let a = embed(&annihilation(3).unwrap(), Slot::A, &spec).unwrap();
        let b = embed(&annihilation(3).unwrap(), Slot::B, &spec).unwrap();
        assert!(a.commutator(&b).unwrap().max_abs() < 1e-14);
        assert!(a.commutator(&b.dagger()).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn embedded_number_trace() {
        let spec = HilbertSpec::new(3, 3, 3, AncillaBasis::Fock).unwrap();
        let na = embed(&number(3).unwrap(), Slot::A, &spec).unwrap();
        // oracle: explicit Kronecker product with identities
        let explicit = kron(&kron(number(3).unwrap().data(), &CMatrix::identity(3, 3)), &CMatrix::identity(3, 3));
        assert!(max_abs_diff(na.data(), &explicit) < 1e-15);
        assert!((na.trace() - c(27.0)).norm() < 1e-12);
    }

    #[test]
    fn embed_rejects_wrong_dimension() {
        let spec = HilbertSpec::new(3, 3, 4, AncillaBasis::Fock).unwrap();
        let a = annihilation(3).unwrap();
        assert!(matches!(embed(&a, Slot::C, &spec), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn expectations_on_product_state() {
        let spec = HilbertSpec::new(2, 2, 3, AncillaBasis::Fock).unwrap();
        let mut psi = nalgebra::DVector::zeros(12);
        psi[spec.index(0, 1, 2)] = c(1.0);
        let rho = Operator::projector(spec, &psi).unwrap();
        let id = Operator::identity(spec);
        let na = embed(&number(2).unwrap(), Slot::A, &spec).unwrap();
        let nb = embed(&number(2).unwrap(), Slot::B, &spec).unwrap();
        assert!((expectation(&rho, &id).unwrap() - c(1.0)).norm() < 1e-15);
        assert!(expectation(&rho, &na).unwrap().norm() < 1e-15);
        assert!((expectation(&rho, &nb).unwrap() - c(1.0)).norm() < 1e-15);
        let other = Operator::identity(HilbertSpec::new(2, 2, 2, AncillaBasis::Fock).unwrap());
        assert!(expectation(&rho, &other).is_err());
    }

    #[test]
    fn hermiticity_flag() {
        let a = annihilation(4).unwrap();
        let x = a.add(&a.dagger()).unwrap();
        assert!(x.is_hermitian(HERMITIAN_TOL));
        assert!(!a.is_hermitian(HERMITIAN_TOL));
    }
}
