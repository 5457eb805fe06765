//! Helpers shared by the integration and acceptance targets.
#![allow(dead_code)]

use cbs_core::gate::{coupling_matrix, compose2, mean_field_couplings};
use cbs_core::operator::{kron, CMatrix, C64};
use cbs_core::{DriveSchedule, EffectiveParams};
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut StdRng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

pub fn random_state(dim: usize, rng: &mut StdRng) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Kraus operators of a random CPTP map: columns of a random isometry.
pub fn random_kraus(dim: usize, count: usize, rng: &mut StdRng) -> Vec<CMatrix> {
    let g = random_matrix(dim * count, dim, rng);
    let q = g.qr().q();
    (0..count).map(|k| q.rows(k * dim, dim).into_owned()).collect()
}

pub fn apply_kraus(kraus: &[CMatrix], x: &CMatrix) -> CMatrix {
    kraus.iter().fold(CMatrix::zeros(x.nrows(), x.ncols()), |acc, k| acc + k * x * k.adjoint())
}

pub fn single_pauli(k: usize) -> CMatrix {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    match k {
        0 => CMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        1 => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        2 => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        _ => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

/// Two-qubit PTM straight from the definition with explicit Kronecker Paulis.
pub fn brute_force_ptm_2q(channel: impl Fn(&CMatrix) -> CMatrix) -> Vec<Vec<f64>> {
    let p: Vec<CMatrix> = (0..16).map(|i| kron(&single_pauli(i / 4), &single_pauli(i % 4))).collect();
    (0..16)
        .map(|i| (0..16).map(|j| (&p[i] * channel(&p[j])).trace().re / 4.0).collect())
        .collect()
}

/// Mean-field |a(t)|² for a photon starting in b, ancilla eigenvalue `z`.
pub fn mean_field_na(eff: &EffectiveParams, sched: &DriveSchedule, z: f64, t: f64) -> f64 {
    let mut m = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];
    let mut start = 0.0;
    for (g, dur) in mean_field_couplings(eff, sched, z) {
        let dt = (t - start).clamp(0.0, dur);
        m = compose2(&coupling_matrix(g, dt), &m);
        start += dur;
    }
    m[0][1].norm_sqr()
}
