//! Pauli transfer matrices, χ matrices and the gate error budget.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gate::{target_unitary, DriveSchedule, GateContext, QUBIT_DIM};
use crate::lindblad::Propagator;
use crate::ode::{IntegratorSettings, StepStats};
use crate::operator::{kron, CMatrix, C64};
use crate::params::EffectiveParams;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub type RMatrix = DMatrix<f64>;

const PAULI_CHARS: [char; 4] = ['I', 'X', 'Y', 'Z'];

fn single_pauli(p: usize) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    let v = match p {
        0 => [ONE, ZERO, ZERO, ONE],
        1 => [ZERO, ONE, ONE, ZERO],
        2 => [ZERO, -i, i, ZERO],
        3 => [ONE, ZERO, ZERO, -ONE],
        _ => unreachable!("Pauli index"),
    };
    CMatrix::from_row_slice(2, 2, &v)
}

/// Pauli strings over `n` qubits, last slot fastest.
pub fn pauli_labels(n: usize) -> Vec<String> {
    (0..4usize.pow(n as u32))
        .map(|idx| {
            (0..n)
                .map(|slot| PAULI_CHARS[(idx / 4usize.pow((n - 1 - slot) as u32)) % 4])
                .collect()
        })
        .collect()
}

/// Matrix of the Pauli string with index `idx` on `n` qubits.
pub fn pauli_matrix(n: usize, idx: usize) -> CMatrix {
    let mut m = CMatrix::identity(1, 1);
    for slot in 0..n {
        let p = (idx / 4usize.pow((n - 1 - slot) as u32)) % 4;
        m = kron(&m, &single_pauli(p));
    }
    m
}

/// Index of a label such as "IXZ".
pub fn pauli_index(label: &str) -> Result<usize> {
    let mut idx = 0;
    for c in label.chars() {
        let p = PAULI_CHARS
            .iter()
            .position(|&q| q == c.to_ascii_uppercase())
            .ok_or_else(|| Error::OutOfRange(format!("not a Pauli label: {label}")))?;
        idx = idx * 4 + p;
    }
    Ok(idx)
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim.is_power_of_two() && dim >= 2 {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(Error::InvalidDimension {
            dim,
            reason: "not a power of two",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTransferMatrix {
    pub r: RMatrix,
    pub labels: Vec<String>,
}

impl PauliTransferMatrix {
    pub fn new(r: RMatrix) -> Result<Self> {
        if r.nrows() != r.ncols() {
            return Err(Error::DimensionMismatch {
                expected: r.nrows(),
                found: r.ncols(),
            });
        }
        let n4 = r.nrows();
        let n = (0..8).find(|&n| 4usize.pow(n as u32) == n4).ok_or(Error::InvalidDimension {
            dim: n4,
            reason: "PTM size must be a power of four",
        })?;
        Ok(Self {
            r,
            labels: pauli_labels(n),
        })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let n4 = 4usize.pow(n_qubits as u32);
        Self {
            r: RMatrix::identity(n4, n4),
            labels: pauli_labels(n_qubits),
        }
    }

    pub fn n_qubits(&self) -> usize {
        (self.r.nrows() as f64).log(4.0).round() as usize
    }

    /// Hilbert-space dimension d = 2ⁿ.
    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    pub fn get(&self, out: &str, inp: &str) -> Result<f64> {
        Ok(self.r[(pauli_index(out)?, pauli_index(inp)?)])
    }

    /// 1 − R_{II…,II…}
    pub fn leakage(&self) -> f64 {
        1.0 - self.r[(0, 0)]
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            r: &self.r * &other.r,
            labels: self.labels.clone(),
        }
    }
}

/// PTM from the images Λ(|a⟩⟨b|), indexed a·d + b.
pub fn ptm_from_unit_images(images: &[CMatrix]) -> Result<PauliTransferMatrix> {
    let d = (images.len() as f64).sqrt().round() as usize;
    if d * d != images.len() {
        return Err(Error::InvalidDimension {
            dim: images.len(),
            reason: "need d² unit images",
        });
    }
    let n = qubit_count(d)?;
    let n4 = d * d;
    // sparse Paulis: one nonzero per row
    let paulis: Vec<Vec<(usize, usize, C64)>> = (0..n4)
        .map(|i| {
            let p = pauli_matrix(n, i);
            let mut nz = Vec::with_capacity(d);
            for r in 0..d {
                for c in 0..d {
                    if p[(r, c)] != ZERO {
                        nz.push((r, c, p[(r, c)]));
                    }
                }
            }
            nz
        })
        .collect();
    let mut r = RMatrix::zeros(n4, n4);
    for j in 0..n4 {
        // Λ(P_j) = Σ P_j[c, e] Λ(E_ce)
        let mut out = CMatrix::zeros(d, d);
        for &(c, e, v) in &paulis[j] {
            out += &images[c * d + e] * v;
        }
        for i in 0..n4 {
            // Tr[P_i M] = Σ P_i[b, a] M[a, b]
            let tr: C64 = paulis[i].iter().map(|&(b, a, v)| v * out[(a, b)]).sum();
            r[(i, j)] = tr.re / d as f64;
        }
    }
    PauliTransferMatrix::new(r)
}

/// PTM of a channel given as a map on d × d matrices.
pub fn ptm_from_channel<F>(dim: usize, mut channel: F) -> Result<PauliTransferMatrix>
where
    F: FnMut(&CMatrix) -> Result<CMatrix>,
{
    qubit_count(dim)?;
    let mut images = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut e = CMatrix::zeros(dim, dim);
            e[(a, b)] = ONE;
            images.push(channel(&e)?);
        }
    }
    ptm_from_unit_images(&images)
}

/// PTM of a column-stacking superoperator, vec(Λ(X)) = S vec(X).
pub fn ptm_from_superop(s: &CMatrix) -> Result<PauliTransferMatrix> {
    let d = (s.nrows() as f64).sqrt().round() as usize;
    if d * d != s.nrows() || s.ncols() != s.nrows() {
        return Err(Error::InvalidDimension {
            dim: s.nrows(),
            reason: "superoperator must be d² × d²",
        });
    }
    ptm_from_channel(d, |x| {
        let v = s * CMatrix::from_column_slice(d * d, 1, x.as_slice());
        Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
    })
}

pub fn ptm_of_unitary(u: &CMatrix) -> Result<PauliTransferMatrix> {
    ptm_from_channel(u.nrows(), |x| Ok(u * x * u.adjoint()))
}

/// Transfer matrix of the target gate implied by the schedule.
pub fn ideal_ptm(params: &EffectiveParams, sched: &DriveSchedule) -> Result<PauliTransferMatrix> {
    ptm_of_unitary(&target_unitary(params, sched))
}

#[derive(Clone, Debug)]
pub struct TomographyRun {
    pub ptm: PauliTransferMatrix,
    /// Λ(|a⟩⟨b|) projected on the register, indexed a·8 + b.
    pub images: Vec<CMatrix>,
    pub stats: StepStats,
}

/// Evolves the 64 register matrix units and assembles the transfer matrix.
///
/// Register states are |qa qb⟩ ⊗ |s_L⟩ with cavities in Fock {0, 1}; the
/// 36 units with a ≤ b (per sector block) are integrated, the rest follow
/// from Λ(X†) = Λ(X)†.
pub fn compute_ptm(ctx: &GateContext, sched: &DriveSchedule, settings: IntegratorSettings) -> Result<TomographyRun> {
    let spec = *ctx.spec();
    if spec.dim_a < 2 || spec.dim_b < 2 {
        return Err(Error::InvalidDimension {
            dim: spec.dim_a.min(spec.dim_b),
            reason: "cavities need at least two levels",
        });
    }
    let prop = Propagator::new(ctx, sched, settings)?;
    let k = spec.dim_c;
    let logical = [ctx.frame().logical_state(0).clone(), ctx.frame().logical_state(1).clone()];
    // (sector, position, logical index) of each register state
    let place: Vec<(usize, usize, usize)> = (0..QUBIT_DIM)
        .map(|a| {
            let (qa, qb, s) = (a >> 2, (a >> 1) & 1, a & 1);
            let (n, pos) = prop.locate(qa * spec.dim_b + qb);
            (n, pos, s)
        })
        .collect();

    let mut groups: Vec<((usize, usize), Vec<(usize, usize)>)> = Vec::new();
    for a in 0..QUBIT_DIM {
        for b in 0..QUBIT_DIM {
            let (na, nb) = (place[a].0, place[b].0);
            if na > nb || (na == nb && a > b) {
                continue;
            }
            match groups.iter_mut().find(|(key, _)| *key == (na, nb)) {
                Some((_, units)) => units.push((a, b)),
                None => groups.push(((na, nb), vec![(a, b)])),
            }
        }
    }

    let results: Vec<Result<(Vec<CMatrix>, StepStats)>> = groups
        .par_iter()
        .map(|&((n, m), ref units)| {
            let (dn, dm) = (prop.block_dim(n), prop.block_dim(m));
            let inputs: Vec<Vec<C64>> = units
                .iter()
                .map(|&(a, b)| {
                    let (pa, pb) = (place[a].1, place[b].1);
                    let (va, vb) = (&logical[place[a].2], &logical[place[b].2]);
                    let mut x = vec![ZERO; dn * dm];
                    for j in 0..k {
                        for i in 0..k {
                            x[(pb * k + j) * dn + pa * k + i] = va[i] * vb[j].conj();
                        }
                    }
                    x
                })
                .collect();
            let (outs, stats) = prop.evolve_batch(n, m, &inputs).map_err(|e| {
                let labels: Vec<String> = units.iter().map(|&(a, b)| format!("|{a:03b}⟩⟨{b:03b}|")).collect();
                e.with_context(format!("register units {}", labels.join(" ")))
            })?;
            let images = outs
                .iter()
                .map(|x| {
                    let mut img = CMatrix::zeros(QUBIT_DIM, QUBIT_DIM);
                    for c in 0..QUBIT_DIM {
                        if place[c].0 != n {
                            continue;
                        }
                        for d in 0..QUBIT_DIM {
                            if place[d].0 != m {
                                continue;
                            }
                            let (pc, pd) = (place[c].1, place[d].1);
                            let (vc, vd) = (&logical[place[c].2], &logical[place[d].2]);
                            let mut v = ZERO;
                            for j in 0..k {
                                let mut col = ZERO;
                                for i in 0..k {
                                    col += vc[i].conj() * x[(pd * k + j) * dn + pc * k + i];
                                }
                                v += col * vd[j];
                            }
                            img[(c, d)] = v;
                        }
                    }
                    img
                })
                .collect();
            Ok((images, stats))
        })
        .collect();

    let mut images = vec![CMatrix::zeros(QUBIT_DIM, QUBIT_DIM); QUBIT_DIM * QUBIT_DIM];
    let mut stats = StepStats::default();
    for ((_, units), res) in groups.iter().zip(results) {
        let (imgs, s) = res?;
        stats.absorb(s);
        for (&(a, b), img) in units.iter().zip(imgs) {
            images[b * QUBIT_DIM + a] = img.adjoint();
            images[a * QUBIT_DIM + b] = img;
        }
    }
    Ok(TomographyRun {
        ptm: ptm_from_unit_images(&images)?,
        images,
        stats,
    })
}

fn invert(r: &RMatrix, what: &str) -> Result<RMatrix> {
    r.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("{what} is not invertible")))
}

/// (Tr R_noise + d) / (d² + d)
pub fn fidelity(r_noise: &PauliTransferMatrix) -> f64 {
    let d = r_noise.dim() as f64;
    (r_noise.r.trace() + d) / (d * d + d)
}

/// R_noise = R · R_id⁻¹ and its fidelity.
pub fn noise_decomposition(r: &PauliTransferMatrix, r_id: &PauliTransferMatrix) -> Result<(PauliTransferMatrix, f64)> {
    let inv = invert(&r_id.r, "ideal transfer matrix")?;
    let noise = PauliTransferMatrix::new(&r.r * inv)?;
    let f = fidelity(&noise);
    Ok((noise, f))
}

/// I ⊗ … ⊗ diag(1, 1−2p, 1−2p, 1) on the last slot.
pub fn ancilla_dephasing_ptm(n_qubits: usize, p: f64) -> PauliTransferMatrix {
    let n4 = 4usize.pow(n_qubits as u32);
    let r = RMatrix::from_fn(n4, n4, |i, j| {
        if i != j {
            0.0
        } else if matches!(i % 4, 1 | 2) {
            1.0 - 2.0 * p
        } else {
            1.0
        }
    });
    PauliTransferMatrix {
        r,
        labels: pauli_labels(n_qubits),
    }
}

/// Fidelity of R̄ = R · R_id⁻¹ · R_IIZ⁻¹, i.e. with ancilla phase flips of probability `p` factored out.
pub fn modified_fidelity(r: &PauliTransferMatrix, r_id: &PauliTransferMatrix, p: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::Singular(format!(
            "ancilla dephasing factor needs 0 <= p < 1/2, got {p}"
        )));
    }
    let rz = ancilla_dephasing_ptm(r.n_qubits(), p);
    let bar = &r.r * invert(&r_id.r, "ideal transfer matrix")? * invert(&rz.r, "dephasing factor")?;
    Ok(fidelity(&PauliTransferMatrix::new(bar)?))
}

/// |P⟩⟩ = Σ_b P|b⟩ ⊗ |b⟩, as a vector of length d².
fn pauli_ket(n: usize, idx: usize) -> Vec<C64> {
    let p = pauli_matrix(n, idx);
    let d = p.nrows();
    let mut v = vec![ZERO; d * d];
    for a in 0..d {
        for b in 0..d {
            v[a * d + b] = p[(a, b)];
        }
    }
    v
}

/// Process matrix χ in the Pauli basis: Λ(ρ) = Σ χ_mn P_m ρ P_n.
pub fn ptm_to_chi(r: &PauliTransferMatrix) -> CMatrix {
    let n = r.n_qubits();
    let d = r.dim();
    let n4 = d * d;
    // Choi matrix J = (1/d) Σ R_ij P_i ⊗ P_jᵀ
    let paulis: Vec<CMatrix> = (0..n4).map(|i| pauli_matrix(n, i)).collect();
    let mut choi = CMatrix::zeros(n4, n4);
    for i in 0..n4 {
        for j in 0..n4 {
            let rij = r.r[(i, j)];
            if rij != 0.0 {
                choi += kron(&paulis[i], &paulis[j].transpose()) * C64::new(rij / d as f64, 0.0);
            }
        }
    }
    let kets: Vec<Vec<C64>> = (0..n4).map(|i| pauli_ket(n, i)).collect();
    let scale = 1.0 / (d * d) as f64;
    let mut jk: Vec<Vec<C64>> = Vec::with_capacity(n4);
    for ket in &kets {
        let mut v = vec![ZERO; n4];
        for (row, out) in v.iter_mut().enumerate() {
            *out = (0..n4).map(|c| choi[(row, c)] * ket[c]).sum();
        }
        jk.push(v);
    }
    CMatrix::from_fn(n4, n4, |m, nn| {
        let s: C64 = kets[m].iter().zip(&jk[nn]).map(|(a, b)| a.conj() * b).sum();
        s * scale
    })
}

/// Inverse of [`ptm_to_chi`].
pub fn chi_to_ptm(chi: &CMatrix) -> Result<PauliTransferMatrix> {
    let n4 = chi.nrows();
    let d = (n4 as f64).sqrt().round() as usize;
    let n = qubit_count(d)?;
    let paulis: Vec<CMatrix> = (0..n4).map(|i| pauli_matrix(n, i)).collect();
    ptm_from_channel(d, |x| {
        let mut out = CMatrix::zeros(d, d);
        for m in 0..n4 {
            let left = &paulis[m] * x;
            for k in 0..n4 {
                let c = chi[(m, k)];
                if c.norm() > 0.0 {
                    out += &left * &paulis[k] * c;
                }
            }
        }
        Ok(out)
    })
}

/// (p_Z, p_nonZ): diagonal χ mass on {I, Z} strings other than the identity, and on strings containing X or Y.
pub fn classify_errors(chi: &CMatrix) -> (f64, f64) {
    let n4 = chi.nrows();
    let n = (n4 as f64).log(4.0).round() as usize;
    let labels = pauli_labels(n);
    let (mut pz, mut pnz) = (0.0, 0.0);
    for (i, l) in labels.iter().enumerate().skip(1) {
        let v = chi[(i, i)].re;
        if l.chars().all(|c| c == 'I' || c == 'Z') {
            pz += v;
        } else {
            pnz += v;
        }
    }
    (pz, pnz)
}

pub fn chi_min_eigenvalue(chi: &CMatrix) -> f64 {
    let h = (chi + chi.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub fidelity: f64,
    pub fidelity_modified: f64,
    pub p_z: f64,
    pub p_nonz: f64,
    pub p_leak: f64,
    pub p_ancilla_phaseflip: f64,
    pub chi_min_eigenvalue: f64,
}

/// Full budget from a measured PTM, the ideal PTM and the ancilla phase-flip probability p = κα²t.
pub fn error_budget(r: &PauliTransferMatrix, r_id: &PauliTransferMatrix, p: f64) -> Result<ErrorBudget> {
    let (noise, f) = noise_decomposition(r, r_id)?;
    let chi = ptm_to_chi(&noise);
    let (p_z, p_nonz) = classify_errors(&chi);
    Ok(ErrorBudget {
        fidelity: f,
        fidelity_modified: modified_fidelity(r, r_id, p)?,
        p_z,
        p_nonz,
        p_leak: r.leakage(),
        p_ancilla_phaseflip: p,
        chi_min_eigenvalue: chi_min_eigenvalue(&chi),
    })
}

/// Ancilla phase-flip probability κα²(t₁ + t₂).
pub fn ancilla_phaseflip_probability(params: &EffectiveParams, sched: &DriveSchedule) -> f64 {
    params.kappa * params.alpha2() * sched.total_duration()
}
