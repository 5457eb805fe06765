//! Kerr-cat working basis from exact diagonalization of the squeezed Kerr oscillator.

use nalgebra::{DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::{annihilation_matrix, CMatrix, C64};

/// Smallest Fock truncation accepted for a cat of size `alpha2`.
pub fn min_fock_dim(alpha2: f64) -> usize {
    18usize.max((5.0 * alpha2 + 8.0 - 1e-9).ceil() as usize)
}

/// Default (fock_dim, keep) for a cat of size `alpha2`.
pub fn default_truncation(alpha2: f64) -> (usize, usize) {
    let (base, keep) = if alpha2 <= 3.0 + 1e-9 {
        (18, 8)
    } else if alpha2 <= 7.0 + 1e-9 {
        (40, 12)
    } else {
        (40, 16)
    };
    (base.max(min_fock_dim(alpha2)), keep)
}

/// Logical Pauli operators and projectors in the kept basis.
#[derive(Clone, Debug)]
pub struct LogicalObservables {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
    pub p_logical: CMatrix,
    pub p_leak: CMatrix,
}

#[derive(Clone, Debug)]
pub struct CatBasis {
    fock_dim: usize,
    keep: usize,
    kerr: f64,
    epsilon_diag: C64,
    alpha: f64,
    eigvals: Vec<f64>,
    parity: Vec<i8>,
    v: CMatrix,
    c_op: CMatrix,
    logical: [DVector<C64>; 2],
    gap: f64,
    splitting: f64,
}

/// Summary record for regression snapshots.
#[derive(Clone, Debug, Serialize)]
pub struct CatBasisSummary {
    pub fock_dim: usize,
    pub keep: usize,
    pub alpha: f64,
    pub eigenvalues: Vec<f64>,
    pub parity: Vec<i8>,
    pub gap: f64,
    pub splitting: f64,
    pub mean_photons: [f64; 2],
    pub transition_element: [f64; 2],
}

struct Eigenpair {
    value: f64,
    parity: i8,
    vector: DVector<C64>,
}

fn diag_hamiltonian(kerr: f64, eps: C64, dim: usize) -> Result<CMatrix> {
    let a = annihilation_matrix(dim)?;
    let ad = a.adjoint();
    let a2 = &a * &a;
    let ad2 = &ad * &ad;
    Ok(&ad2 * &a2 * C64::new(-kerr, 0.0) + &ad2 * eps + &a2 * eps.conj())
}

fn fix_phase(v: &mut DVector<C64>) {
    let mut best = 0;
    let mut mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > mag + 1e-12 {
            mag = z.norm();
            best = i;
        }
    }
    if mag > 0.0 {
        let ph = v[best].conj() / mag;
        *v *= ph;
    }
}

fn sector_eigenpairs(h: &CMatrix, parity: usize) -> Vec<Eigenpair> {
    let n = h.nrows();
    let idx: Vec<usize> = (parity..n).step_by(2).collect();
    let m = idx.len();
    let sub = CMatrix::from_fn(m, m, |i, j| h[(idx[i], idx[j])]);
    let eig = SymmetricEigen::new(sub);
    (0..m)
        .map(|k| {
            let mut vector = DVector::zeros(n);
            for (i, &row) in idx.iter().enumerate() {
                vector[row] = eig.eigenvectors[(i, k)];
            }
            fix_phase(&mut vector);
            Eigenpair {
                value: eig.eigenvalues[k],
                parity: if parity == 0 { 1 } else { -1 },
                vector,
            }
        })
        .collect()
}

fn by_energy_desc(a: &Eigenpair, b: &Eigenpair) -> std::cmp::Ordering {
    let tol = 1e-12 * (1.0 + a.value.abs().max(b.value.abs()));
    if (a.value - b.value).abs() <= tol {
        b.parity.cmp(&a.parity)
    } else {
        b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal)
    }
}

impl CatBasis {
    /// Diagonalize −Kĉ†²ĉ² + εĉ†² + ε*ĉ² in `fock_dim` levels and keep the top `keep` states.
    pub fn build(kerr: f64, epsilon_diag: C64, fock_dim: usize, keep: usize) -> Result<Self> {
        let alpha2 = (epsilon_diag / kerr).norm();
        let need = min_fock_dim(alpha2);
        if fock_dim < need {
            return Err(Error::InvalidDimension {
                dim: fock_dim,
                reason: "Fock truncation too small for this cat size (needs max(18, 5α²+8))",
            });
        }
        Self::build_any(kerr, epsilon_diag, fock_dim, keep)
    }

    /// Same as [`CatBasis::build`] without the minimum-truncation check.
    pub(crate) fn build_any(kerr: f64, epsilon_diag: C64, fock_dim: usize, keep: usize) -> Result<Self> {
        if !(kerr > 0.0) {
            return Err(Error::OutOfRange(format!("Kerr rate must be positive, got {kerr}")));
        }
        if keep < 2 || keep % 2 != 0 || keep > fock_dim {
            return Err(Error::InvalidDimension {
                dim: keep,
                reason: "keep must be even, at least 2 and at most fock_dim",
            });
        }
        let h = diag_hamiltonian(kerr, epsilon_diag, fock_dim)?;
        let mut even = sector_eigenpairs(&h, 0);
        let mut odd = sector_eigenpairs(&h, 1);
        even.sort_by(by_energy_desc);
        odd.sort_by(by_energy_desc);
        if even.is_empty() || odd.is_empty() {
            return Err(Error::InvalidDimension {
                dim: fock_dim,
                reason: "need both parity sectors",
            });
        }
        let c_plus = even.remove(0);
        let c_minus = odd.remove(0);
        let mut rest: Vec<Eigenpair> = even.into_iter().chain(odd).collect();
        rest.sort_by(by_energy_desc);

        let splitting = (c_plus.value - c_minus.value).abs();
        let floor = c_plus.value.min(c_minus.value);
        let gap = rest.first().map(|e| floor - e.value).unwrap_or(f64::INFINITY);
        if !(splitting <= gap / 10.0) {
            return Err(Error::BasisIdentification { splitting, gap });
        }

        let mut kept = vec![c_plus, c_minus];
        kept.extend(rest.into_iter().take(keep - 2));
        let v = CMatrix::from_fn(fock_dim, keep, |i, j| kept[j].vector[i]);
        let a = annihilation_matrix(fock_dim)?;
        let c_op = v.adjoint() * &a * &v;

        // ⟨C₊|(ĉ+ĉ†)|C₋⟩ fixes the relative sign of the computational states.
        let x = &a + a.adjoint();
        let m = (kept[0].vector.adjoint() * &x * &kept[1].vector)[(0, 0)];
        let s = if m.norm() > 1e-300 { m.conj() / m.norm() } else { C64::new(1.0, 0.0) };
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut zero = DVector::zeros(keep);
        zero[0] = C64::new(r, 0.0);
        zero[1] = s * r;
        let mut one = DVector::zeros(keep);
        one[0] = C64::new(r, 0.0);
        one[1] = -s * r;

        Ok(Self {
            fock_dim,
            keep,
            kerr,
            epsilon_diag,
            alpha: (epsilon_diag / kerr).norm().sqrt(),
            eigvals: kept.iter().map(|e| e.value).collect(),
            parity: kept.iter().map(|e| e.parity).collect(),
            v,
            c_op,
            logical: [zero, one],
            gap,
            splitting,
        })
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn keep(&self) -> usize {
        self.keep
    }

    pub fn kerr(&self) -> f64 {
        self.kerr
    }

    pub fn epsilon_diag(&self) -> C64 {
        self.epsilon_diag
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Kept eigenvalues: C₊, C₋, then the excited states in descending order.
    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    /// Photon-number parity (+1 / −1) of each kept state.
    pub fn parity(&self) -> &[i8] {
        &self.parity
    }

    /// Isometry from the kept basis into Fock space (fock_dim × keep).
    pub fn isometry(&self) -> &CMatrix {
        &self.v
    }

    pub fn c_op(&self) -> &CMatrix {
        &self.c_op
    }

    pub fn cdag_op(&self) -> CMatrix {
        self.c_op.adjoint()
    }

    /// Gap between the cat manifold and the next eigenstate.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn splitting(&self) -> f64 {
        self.splitting
    }

    /// V† O V for a Fock-space operator O.
    pub fn project(&self, fock_op: &CMatrix) -> Result<CMatrix> {
        if fock_op.nrows() != self.fock_dim || fock_op.ncols() != self.fock_dim {
            return Err(Error::DimensionMismatch {
                expected: self.fock_dim,
                found: fock_op.nrows(),
            });
        }
        Ok(self.v.adjoint() * fock_op * &self.v)
    }

    /// Computational state |s⟩ (s = 0, 1) in kept coordinates.
    pub fn logical_state(&self, s: usize) -> &DVector<C64> {
        &self.logical[s]
    }

    /// |C₊⟩ (sign = +1) or |C₋⟩ (sign = −1) in kept coordinates.
    pub fn cat_state(&self, sign: i8) -> DVector<C64> {
        let mut v = DVector::zeros(self.keep);
        v[if sign >= 0 { 0 } else { 1 }] = C64::new(1.0, 0.0);
        v
    }

    /// Lift kept-basis coordinates into Fock space.
    pub fn to_fock(&self, kept: &DVector<C64>) -> DVector<C64> {
        &self.v * kept
    }

    pub fn logical_observables(&self) -> LogicalObservables {
        let k = self.keep;
        let (z0, z1) = (&self.logical[0], &self.logical[1]);
        let p0 = z0 * z0.adjoint();
        let p1 = z1 * z1.adjoint();
        let flip = z0 * z1.adjoint();
        let i = C64::new(0.0, 1.0);
        let mut p_logical = CMatrix::zeros(k, k);
        p_logical[(0, 0)] = C64::new(1.0, 0.0);
        p_logical[(1, 1)] = C64::new(1.0, 0.0);
        LogicalObservables {
            x: &flip + flip.adjoint(),
            y: flip.adjoint() * i - &flip * i,
            z: &p0 - &p1,
            p_leak: CMatrix::identity(k, k) - &p_logical,
            p_logical,
        }
    }

    /// ⟨ĉ†ĉ⟩ in the computational state |s⟩.
    pub fn mean_photons(&self, s: usize) -> f64 {
        let n = self.number_op();
        let v = &self.logical[s];
        (v.adjoint() * n * v)[(0, 0)].re
    }

    /// ĉ†ĉ projected from Fock space.
    pub fn number_op(&self) -> CMatrix {
        let a = annihilation_matrix(self.fock_dim).expect("fock_dim >= 2");
        self.project(&(a.adjoint() * &a)).expect("same dimension")
    }

    /// ⟨1|(ĉ†ĉ − α²)|0⟩ in the numerical basis.
    pub fn transition_element(&self) -> C64 {
        let n = self.number_op() - CMatrix::identity(self.keep, self.keep) * C64::new(self.alpha * self.alpha, 0.0);
        (self.logical[1].adjoint() * n * &self.logical[0])[(0, 0)]
    }

    pub fn summary(&self) -> CatBasisSummary {
        let t = self.transition_element();
        CatBasisSummary {
            fock_dim: self.fock_dim,
            keep: self.keep,
            alpha: self.alpha,
            eigenvalues: self.eigvals.clone(),
            parity: self.parity.clone(),
            gap: self.gap,
            splitting: self.splitting,
            mean_photons: [self.mean_photons(0), self.mean_photons(1)],
            transition_element: [t.re, t.im],
        }
    }
}

/// Closed-form ⟨1|(ĉ†ĉ − α²)|0⟩ = −α² csch(2α²).
pub fn transition_element_closed_form(alpha2: f64) -> f64 {
    -alpha2 / (2.0 * alpha2).sinh()
}
