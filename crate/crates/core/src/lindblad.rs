//! Master-equation integration.
//!
//! Cavity terms conserve a set of photon-number sectors and every jump
//! operator acts on the ancilla alone, so ρ splits into independent blocks
//! ρ_NM. Each block obeys
//!
//! Ẋ = −i H_N X + i X H_M† + Σ_j (I ⊗ L_j) X (I ⊗ L_j†),  H = H₀ − (i/2) Σ L†L,
//!
//! evaluated with dense products, never a materialized superoperator.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::dense::{gemm, MatMut, MatRef};
use crate::error::{Error, Result};
use crate::gate::{DriveSchedule, GateContext};
use crate::ode::{Dopri5, IntegratorSettings, StepStats};
use crate::operator::{kron, CMatrix, Operator, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Output points per gate on the default grid.
pub const DEFAULT_GRID_POINTS: usize = 400;
/// Eigenvalues of an evolved density matrix below this count as a numerical failure.
pub const NEGATIVITY_TOLERANCE: f64 = -1e-6;

/// Lindblad generator on a small dense space.
#[derive(Clone, Debug)]
pub struct DenseLindblad {
    heff: CMatrix,
    jumps: Vec<CMatrix>,
}

impl DenseLindblad {
    /// `jumps` carries (rate, L) pairs; rates enter as √rate·L.
    pub fn new(h: &CMatrix, jumps: &[(f64, CMatrix)]) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.ncols(),
            });
        }
        let mut heff = h.clone();
        let mut scaled = Vec::with_capacity(jumps.len());
        for (rate, l) in jumps {
            if *rate < 0.0 {
                return Err(Error::NegativeRate {
                    channel: "jump",
                    rate: *rate,
                });
            }
            if l.nrows() != n || l.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.nrows(),
                });
            }
            if *rate == 0.0 {
                continue;
            }
            let j = l * C64::new(rate.sqrt(), 0.0);
            heff -= (j.adjoint() * &j) * C64::new(0.0, 0.5);
            scaled.push(j);
        }
        Ok(Self { heff, jumps: scaled })
    }

    pub fn dim(&self) -> usize {
        self.heff.nrows()
    }

    /// L(ρ)
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = (&self.heff * rho - rho * self.heff.adjoint()) * C64::new(0.0, -1.0);
        for j in &self.jumps {
            out += j * rho * j.adjoint();
        }
        out
    }

    /// Adaptive Runge-Kutta propagation for time `t`.
    pub fn propagate(&self, rho: &CMatrix, t: f64, settings: &IntegratorSettings) -> Result<CMatrix> {
        let n = self.dim();
        let mut y = rho.as_slice().to_vec();
        let mut ode = Dopri5::new(n * n, *settings);
        ode.integrate(
            |y, dy| {
                let x = CMatrix::from_column_slice(n, n, y);
                dy.copy_from_slice(self.apply(&x).as_slice());
            },
            &mut y,
            0.0,
            t,
            &[],
            |_, _, _| {},
        )?;
        Ok(CMatrix::from_column_slice(n, n, &y))
    }

    /// exp(tL)ρ by a Taylor series on ρ over substeps short enough to converge.
    pub fn propagate_taylor(&self, rho: &CMatrix, t: f64) -> CMatrix {
        let norm1 = |m: &CMatrix| -> f64 {
            let cols = (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>());
            let rows = (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>());
            cols.chain(rows).fold(0.0, f64::max)
        };
        let bound = 2.0 * norm1(&self.heff) + self.jumps.iter().map(|j| norm1(j).powi(2)).sum::<f64>();
        let substeps = ((t.abs() * bound / 0.5).ceil() as usize).max(1);
        let dt = t / substeps as f64;
        let mut acc = rho.clone();
        for _ in 0..substeps {
            let mut term = acc.clone();
            let mut next = acc.clone();
            for k in 1..=80 {
                term = self.apply(&term) * C64::new(dt / k as f64, 0.0);
                next += &term;
                let scale = next.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
                if term.iter().map(|z| z.norm()).fold(0.0, f64::max) <= 1e-18 * scale {
                    break;
                }
            }
            acc = next;
        }
        acc
    }
}

/// Full-space generator of one schedule segment, including dissipation.
pub fn segment_generator(ctx: &GateContext, sched: &DriveSchedule, seg: usize) -> Result<DenseLindblad> {
    let terms = ctx.hamiltonian_terms(sched, seg)?;
    let h = crate::gate::sum_kron(&terms);
    let cav = CMatrix::identity(ctx.spec().cavity_dim(), ctx.spec().cavity_dim());
    let jumps: Vec<(f64, CMatrix)> = ctx.ancilla_jumps().into_iter().map(|(r, l)| (r, kron(&cav, &l))).collect();
    DenseLindblad::new(&h, &jumps)
}

/// Segment-by-segment Taylor propagation on the full space.
///
/// Independent of the sector decomposition and the adaptive integrator.
pub fn propagate_exact(ctx: &GateContext, sched: &DriveSchedule, initial: &Operator) -> Result<Operator> {
    check_space(ctx, initial)?;
    let mut rho = initial.data().clone();
    for (i, s) in sched.segments().iter().enumerate() {
        if s.duration > 0.0 {
            rho = segment_generator(ctx, sched, i)?.propagate_taylor(&rho, s.duration);
        }
    }
    Operator::on_space(*ctx.spec(), rho)
}

/// Product of per-segment exp(−iH t), ignoring dissipation.
pub fn unitary_propagator(ctx: &GateContext, sched: &DriveSchedule) -> Result<CMatrix> {
    let n = ctx.spec().total_dim();
    let mut u = CMatrix::identity(n, n);
    for (i, s) in sched.segments().iter().enumerate() {
        if s.duration > 0.0 {
            let h = crate::gate::sum_kron(&ctx.hamiltonian_terms(sched, i)?);
            u = (h * C64::new(0.0, -s.duration)).exp() * u;
        }
    }
    Ok(u)
}

fn check_space(ctx: &GateContext, op: &Operator) -> Result<()> {
    let n = ctx.spec().total_dim();
    if op.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: op.dim(),
        });
    }
    if let Some(s) = op.space() {
        if s != ctx.spec() {
            return Err(Error::Config(format!("operator defined on {s:?}, context uses {:?}", ctx.spec())));
        }
    }
    Ok(())
}

/// Connected components of the cavity index graph.
#[derive(Clone, Debug)]
struct Sectors {
    members: Vec<Vec<usize>>,
    locate: Vec<(usize, usize)>,
}

impl Sectors {
    fn find(mats: &[CMatrix], n: usize) -> Self {
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for m in mats {
            for j in 0..n {
                for i in 0..n {
                    if m[(i, j)] != ZERO {
                        let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                        if ri != rj {
                            parent[ri.max(rj)] = ri.min(rj);
                        }
                    }
                }
            }
        }
        let mut id_of_root = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut locate = vec![(0, 0); n];
        for i in 0..n {
            let r = root(&mut parent, i);
            if id_of_root[r] == usize::MAX {
                id_of_root[r] = members.len();
                members.push(Vec::new());
            }
            let s = id_of_root[r];
            locate[i] = (s, members[s].len());
            members[s].push(i);
        }
        Self { members, locate }
    }
}

struct BlockOps {
    dim: usize,
    /// −i·H_N
    left: Vec<C64>,
    /// i·H_N†
    right: Vec<C64>,
}

struct SegmentOps {
    start: f64,
    end: f64,
    blocks: Vec<BlockOps>,
    jumps: Vec<Vec<C64>>,
    jumps_adj: Vec<Vec<C64>>,
}

/// Block-sparse propagator for one context and schedule.
pub struct Propagator {
    k: usize,
    sectors: Sectors,
    segments: Vec<SegmentOps>,
    settings: IntegratorSettings,
}

impl Propagator {
    pub fn new(ctx: &GateContext, sched: &DriveSchedule, settings: IntegratorSettings) -> Result<Self> {
        settings.validate()?;
        let k = ctx.spec().dim_c;
        let ncav = ctx.spec().cavity_dim();
        let mut per_segment = Vec::with_capacity(sched.segments().len());
        let mut cavity_parts = Vec::new();
        for i in 0..sched.segments().len() {
            let terms = ctx.hamiltonian_terms(sched, i)?;
            cavity_parts.extend(terms.iter().map(|t| t.cavity.clone()));
            per_segment.push(terms);
        }
        let sectors = Sectors::find(&cavity_parts, ncav);

        let jumps: Vec<CMatrix> = ctx
            .ancilla_jumps()
            .into_iter()
            .map(|(r, l)| l * C64::new(r.sqrt(), 0.0))
            .collect();
        let mut damping = CMatrix::zeros(k, k);
        for j in &jumps {
            damping += j.adjoint() * j;
        }
        let damping = damping * C64::new(0.0, -0.5);

        let bounds = sched.boundaries();
        let mut segments = Vec::with_capacity(per_segment.len());
        for (i, terms) in per_segment.iter().enumerate() {
            let mut blocks = Vec::with_capacity(sectors.members.len());
            for mem in &sectors.members {
                let d = mem.len();
                let mut h = kron(&CMatrix::identity(d, d), &damping);
                for t in terms {
                    let sub = CMatrix::from_fn(d, d, |r, c| t.cavity[(mem[r], mem[c])]);
                    if sub.iter().any(|z| *z != ZERO) {
                        h += kron(&sub, &t.ancilla);
                    }
                }
                let left = h.clone() * C64::new(0.0, -1.0);
                let right = h.adjoint() * C64::new(0.0, 1.0);
                blocks.push(BlockOps {
                    dim: d * k,
                    left: left.as_slice().to_vec(),
                    right: right.as_slice().to_vec(),
                });
            }
            segments.push(SegmentOps {
                start: bounds[i],
                end: bounds[i + 1],
                blocks,
                jumps: jumps.iter().map(|j| j.as_slice().to_vec()).collect(),
                jumps_adj: jumps.iter().map(|j| j.adjoint().as_slice().to_vec()).collect(),
            });
        }
        Ok(Self {
            k,
            sectors,
            segments,
            settings,
        })
    }

    pub fn settings(&self) -> &IntegratorSettings {
        &self.settings
    }

    pub fn sector_count(&self) -> usize {
        self.sectors.members.len()
    }

    /// Cavity indices (na·dim_b + nb) belonging to sector `n`.
    pub fn sector_members(&self, n: usize) -> &[usize] {
        &self.sectors.members[n]
    }

    /// Sector and position of a cavity index.
    pub fn locate(&self, cavity_index: usize) -> (usize, usize) {
        self.sectors.locate[cavity_index]
    }

    pub fn block_dim(&self, n: usize) -> usize {
        self.sectors.members[n].len() * self.k
    }

    /// Block (n, m) of a full-space matrix, column-major.
    pub fn extract_block(&self, op: &CMatrix, n: usize, m: usize) -> Vec<C64> {
        let k = self.k;
        let (rn, rm) = (&self.sectors.members[n], &self.sectors.members[m]);
        let (dn, dm) = (rn.len() * k, rm.len() * k);
        let mut out = vec![ZERO; dn * dm];
        for (pc, &cc) in rm.iter().enumerate() {
            for sc in 0..k {
                let col = pc * k + sc;
                for (pr, &cr) in rn.iter().enumerate() {
                    for sr in 0..k {
                        out[col * dn + pr * k + sr] = op[(cr * k + sr, cc * k + sc)];
                    }
                }
            }
        }
        out
    }

    /// Writes block (n, m) into a full-space matrix.
    pub fn insert_block(&self, op: &mut CMatrix, n: usize, m: usize, x: &[C64]) {
        let k = self.k;
        let (rn, rm) = (&self.sectors.members[n], &self.sectors.members[m]);
        let dn = rn.len() * k;
        for (pc, &cc) in rm.iter().enumerate() {
            for sc in 0..k {
                let col = pc * k + sc;
                for (pr, &cr) in rn.iter().enumerate() {
                    for sr in 0..k {
                        op[(cr * k + sr, cc * k + sc)] = x[col * dn + pr * k + sr];
                    }
                }
            }
        }
    }

    fn rhs(&self, seg: &SegmentOps, n: usize, m: usize, units: usize, x: &[C64], dx: &mut [C64], tmp: &mut [C64]) {
        let k = self.k;
        let (bn, bm) = (&seg.blocks[n], &seg.blocks[m]);
        let (dn, dm) = (bn.dim, bm.dim);
        let w = units * dm;
        gemm(
            ONE,
            MatRef::col_major(&bn.left, dn, dn),
            MatRef::col_major(x, dn, w),
            ZERO,
            MatMut::col_major(dx, dn, w),
        );
        let unit_len = dn * dm;
        for u in 0..units {
            let r = u * unit_len..(u + 1) * unit_len;
            gemm(
                ONE,
                MatRef::col_major(&x[r.clone()], dn, dm),
                MatRef::col_major(&bm.right, dm, dm),
                ONE,
                MatMut::col_major(&mut dx[r], dn, dm),
            );
        }
        let strip = dn * k;
        for (j, jd) in seg.jumps.iter().zip(&seg.jumps_adj) {
            // (I ⊗ L) X: the ancilla index is fastest, so X is a k × (·) matrix
            gemm(
                ONE,
                MatRef::col_major(j, k, k),
                MatRef::col_major(x, k, dn / k * w),
                ZERO,
                MatMut::col_major(tmp, k, dn / k * w),
            );
            for b in 0..w / k {
                let r = b * strip..(b + 1) * strip;
                gemm(
                    ONE,
                    MatRef::col_major(&tmp[r.clone()], dn, k),
                    MatRef::col_major(jd, k, k),
                    ONE,
                    MatMut::col_major(&mut dx[r], dn, k),
                );
            }
        }
    }

    /// Integrates `units` stacked D_n × D_m blocks across the whole schedule.
    ///
    /// `outputs` are sorted times; a time on a switching boundary is reported
    /// from the end of the earlier segment.
    pub fn run_block<O>(
        &self,
        n: usize,
        m: usize,
        units: usize,
        state: &mut [C64],
        outputs: &[f64],
        mut on_output: O,
    ) -> Result<StepStats>
    where
        O: FnMut(usize, &[C64]),
    {
        let (dn, dm) = (self.block_dim(n), self.block_dim(m));
        let len = dn * dm * units;
        if state.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: state.len(),
            });
        }
        let mut ode = Dopri5::new(len, self.settings);
        let mut tmp = vec![ZERO; len];
        let mut next = 0usize;
        if self.segments.is_empty() {
            for i in 0..outputs.len() {
                on_output(i, state);
            }
            return Ok(ode.stats);
        }
        let last = self.segments.len() - 1;
        for (si, seg) in self.segments.iter().enumerate() {
            let mut stop = next;
            while stop < outputs.len() && (si == last || outputs[stop] <= seg.end) {
                stop += 1;
            }
            let offset = next;
            ode.h_hint = None;
            ode.integrate(
                |y, dy| self.rhs(seg, n, m, units, y, dy, &mut tmp),
                state,
                seg.start,
                seg.end,
                &outputs[next..stop],
                |i, _, y| on_output(offset + i, y),
            )?;
            next = stop;
        }
        Ok(ode.stats)
    }

    /// Evolves independent inputs that all live in block (n, m); returns final blocks.
    pub fn evolve_batch(&self, n: usize, m: usize, inputs: &[Vec<C64>]) -> Result<(Vec<Vec<C64>>, StepStats)> {
        let unit = self.block_dim(n) * self.block_dim(m);
        let mut state = Vec::with_capacity(unit * inputs.len());
        for x in inputs {
            if x.len() != unit {
                return Err(Error::DimensionMismatch {
                    expected: unit,
                    found: x.len(),
                });
            }
            state.extend_from_slice(x);
        }
        let stats = self.run_block(n, m, inputs.len(), &mut state, &[], |_, _| {})?;
        Ok((state.chunks(unit).map(|c| c.to_vec()).collect(), stats))
    }
}

/// Quantities recordable along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    NumberA,
    NumberB,
    LogicalX,
    LogicalY,
    LogicalZ,
    /// arg(⟨X_L⟩ + i⟨Y_L⟩)
    PhaseRotation,
    /// Tr[Π_{1−from} ρ], optionally divided by Tr[P_logical ρ].
    BitFlip { from: usize, renormalize: bool },
    /// 1 − Tr[P_logical ρ]
    Leakage,
    /// ⟨|na nb⟩⟨na nb|⟩ summed over the ancilla.
    Population { na: usize, nb: usize },
    Trace,
    Custom { name: String, op: Operator },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::NumberA => "n_a".into(),
            Observable::NumberB => "n_b".into(),
            Observable::LogicalX => "x_l".into(),
            Observable::LogicalY => "y_l".into(),
            Observable::LogicalZ => "z_l".into(),
            Observable::PhaseRotation => "phase_rotation".into(),
            Observable::BitFlip { .. } => "bit_flip".into(),
            Observable::Leakage => "leakage".into(),
            Observable::Population { na, nb } => format!("p{na}{nb}"),
            Observable::Trace => "trace".into(),
            Observable::Custom { name, .. } => name.clone(),
        }
    }
}

/// The standard set: populations, logical quadratures, phase, bit flip from `initial_logical`, leakage, bunching.
pub fn recorded_observables(ctx: &GateContext, initial_logical: usize) -> Result<Vec<Observable>> {
    if initial_logical > 1 {
        return Err(Error::OutOfRange(format!("logical state must be 0 or 1, got {initial_logical}")));
    }
    let mut out = vec![
        Observable::NumberA,
        Observable::NumberB,
        Observable::LogicalX,
        Observable::LogicalY,
        Observable::PhaseRotation,
        Observable::BitFlip {
            from: initial_logical,
            renormalize: false,
        },
        Observable::Leakage,
    ];
    if ctx.spec().dim_a > 2 && ctx.spec().dim_b > 2 {
        out.push(Observable::Population { na: 2, nb: 0 });
        out.push(Observable::Population { na: 0, nb: 2 });
    }
    Ok(out)
}

/// Uniform grid over the schedule with every switching time inserted.
pub fn default_grid(sched: &DriveSchedule, points: usize) -> Vec<f64> {
    let total = sched.total_duration();
    let mut g: Vec<f64> = if total == 0.0 || points < 2 {
        vec![0.0]
    } else {
        (0..points).map(|i| total * i as f64 / (points - 1) as f64).collect()
    };
    g.extend(sched.boundaries());
    g.sort_by(f64::total_cmp);
    let tol = 1e-12 * total.max(1.0);
    g.dedup_by(|a, b| (*a - *b).abs() <= tol);
    if let Some(last) = g.last_mut() {
        *last = total;
    }
    g
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionMetadata {
    pub scheme: String,
    pub cpbs_form: String,
    pub params_hash: String,
    pub spec: crate::operator::HilbertSpec,
    pub fock_dim: usize,
    pub settings: IntegratorSettings,
    pub stats: StepStats,
    /// Largest |Tr ρ − 1| over the grid, for density-matrix inputs.
    pub max_trace_drift: Option<f64>,
    /// Smallest eigenvalue over the snapshots and the final state, for density-matrix inputs.
    pub min_eigenvalue: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub snapshots: Vec<(f64, Operator)>,
    pub traces: Vec<(String, Vec<C64>)>,
    pub final_state: Operator,
    pub metadata: EvolutionMetadata,
}

impl EvolutionResult {
    pub fn trace(&self, name: &str) -> Option<&[C64]> {
        self.traces.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Real part of a recorded trace.
    pub fn real(&self, name: &str) -> Option<Vec<f64>> {
        self.trace(name).map(|v| v.iter().map(|z| z.re).collect())
    }

    /// Value at the last grid point.
    pub fn last(&self, name: &str) -> Option<f64> {
        self.trace(name).and_then(|v| v.last()).map(|z| z.re)
    }
}

#[derive(Clone, Debug, Default)]
pub struct EvolveOptions {
    pub settings: IntegratorSettings,
    /// Must coincide with grid points.
    pub snapshot_times: Vec<f64>,
}

/// 64-bit FNV-1a of the JSON form of `value`.
pub fn params_hash<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).unwrap_or_default();
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn probe_operators(ctx: &GateContext, record: &[Observable]) -> Result<Vec<(String, CMatrix)>> {
    let spec = ctx.spec();
    let cav = CMatrix::identity(spec.cavity_dim(), spec.cavity_dim());
    let k = spec.dim_c;
    let anc = |m: &CMatrix| kron(&cav, m);
    let obs = ctx.frame().observables();
    let logical = |s: usize| {
        let v = ctx.frame().logical_state(s);
        v * v.adjoint()
    };
    let mut probes: Vec<(String, CMatrix)> = Vec::new();
    let mut want = |key: &str, build: &dyn Fn() -> Result<CMatrix>| -> Result<()> {
        if !probes.iter().any(|(k, _)| k == key) {
            probes.push((key.to_string(), build()?));
        }
        Ok(())
    };
    for o in record {
        match o {
            Observable::NumberA => want("n_a", &|| Ok(kron(&ctx.number_a(), &CMatrix::identity(k, k))))?,
            Observable::NumberB => want("n_b", &|| Ok(kron(&ctx.number_b(), &CMatrix::identity(k, k))))?,
            Observable::LogicalX => want("x_l", &|| Ok(anc(&obs.x)))?,
            Observable::LogicalY => want("y_l", &|| Ok(anc(&obs.y)))?,
            Observable::LogicalZ => want("z_l", &|| Ok(anc(&obs.z)))?,
            Observable::PhaseRotation => {
                want("x_l", &|| Ok(anc(&obs.x)))?;
                want("y_l", &|| Ok(anc(&obs.y)))?;
            }
            Observable::BitFlip { from, renormalize } => {
                if *from > 1 {
                    return Err(Error::OutOfRange(format!("logical state must be 0 or 1, got {from}")));
                }
                let other = 1 - from;
                want(&format!("pi_{other}"), &|| Ok(anc(&logical(other))))?;
                if *renormalize {
                    want("p_logical", &|| Ok(anc(&obs.p_logical)))?;
                }
            }
            Observable::Leakage => {
                want("p_logical", &|| Ok(anc(&obs.p_logical)))?;
                want("trace", &|| Ok(CMatrix::identity(spec.total_dim(), spec.total_dim())))?;
            }
            Observable::Population { na, nb } => {
                if *na >= spec.dim_a || *nb >= spec.dim_b {
                    return Err(Error::OutOfRange(format!("population |{na}{nb}⟩ outside cavity truncation")));
                }
                let (na, nb) = (*na, *nb);
                want(&format!("pop_{na}_{nb}"), &|| {
                    let mut p = CMatrix::zeros(spec.cavity_dim(), spec.cavity_dim());
                    let i = na * spec.dim_b + nb;
                    p[(i, i)] = ONE;
                    Ok(kron(&p, &CMatrix::identity(k, k)))
                })?;
            }
            Observable::Trace => want("trace", &|| Ok(CMatrix::identity(spec.total_dim(), spec.total_dim())))?,
            Observable::Custom { name, op } => {
                if op.dim() != spec.total_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: spec.total_dim(),
                        found: op.dim(),
                    });
                }
                want(&format!("custom:{name}"), &|| Ok(op.data().clone()))?;
            }
        }
    }
    Ok(probes)
}

fn combine(o: &Observable, probe: &dyn Fn(&str) -> C64) -> C64 {
    match o {
        Observable::NumberA => probe("n_a"),
        Observable::NumberB => probe("n_b"),
        Observable::LogicalX => probe("x_l"),
        Observable::LogicalY => probe("y_l"),
        Observable::LogicalZ => probe("z_l"),
        Observable::PhaseRotation => {
            let z = C64::new(probe("x_l").re, probe("y_l").re);
            C64::new(z.arg(), 0.0)
        }
        Observable::BitFlip { from, renormalize } => {
            let p = probe(&format!("pi_{}", 1 - from));
            if *renormalize {
                p / probe("p_logical").re
            } else {
                p
            }
        }
        Observable::Leakage => probe("trace") - probe("p_logical"),
        Observable::Population { na, nb } => probe(&format!("pop_{na}_{nb}")),
        Observable::Trace => probe("trace"),
        Observable::Custom { name, .. } => probe(&format!("custom:{name}")),
    }
}

fn is_zero(x: &[C64]) -> bool {
    x.iter().all(|z| *z == ZERO)
}

/// [`evolve_with`] using default integrator settings and no snapshots.
pub fn evolve(
    ctx: &GateContext,
    sched: &DriveSchedule,
    initial: &Operator,
    record: &[Observable],
    grid: &[f64],
) -> Result<EvolutionResult> {
    evolve_with(ctx, sched, initial, record, grid, &EvolveOptions::default())
}

/// Integrates the master equation from `initial`, recording `record` on `grid`.
pub fn evolve_with(
    ctx: &GateContext,
    sched: &DriveSchedule,
    initial: &Operator,
    record: &[Observable],
    grid: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    check_space(ctx, initial)?;
    let total = sched.total_duration();
    let slack = 1e-12 * total.max(1.0);
    if grid.is_empty() {
        return Err(Error::OutOfRange("empty time grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::OutOfRange("time grid must be strictly increasing".into()));
    }
    if grid[0] < -slack || *grid.last().unwrap() > total + slack {
        return Err(Error::OutOfRange(format!("time grid leaves the schedule span [0, {total}]")));
    }
    let mut snap_idx = Vec::with_capacity(opts.snapshot_times.len());
    for &t in &opts.snapshot_times {
        let i = grid
            .iter()
            .position(|&g| (g - t).abs() <= slack)
            .ok_or_else(|| Error::OutOfRange(format!("snapshot time {t} is not a grid point")))?;
        snap_idx.push(i);
    }

    let prop = Propagator::new(ctx, sched, opts.settings)?;
    let rho0 = initial.data();
    let hermitian = initial.hermiticity_error() <= 1e-14 * initial.max_abs().max(1.0);
    let density = hermitian && (initial.trace() - ONE).norm() <= 1e-6;

    let mut record_all = record.to_vec();
    if density {
        record_all.push(Observable::Trace);
    }
    let probes = probe_operators(ctx, &record_all)?;
    let ns = prop.sector_count();

    // blocks to evolve: all nonzero ones, or the upper triangle when ρ = ρ†
    let mut pairs = Vec::new();
    for n in 0..ns {
        for m in 0..ns {
            if hermitian && m < n {
                continue;
            }
            let x = prop.extract_block(rho0, n, m);
            if !is_zero(&x) {
                pairs.push((n, m, x));
            }
        }
    }

    let npoints = grid.len();
    let mut acc = vec![vec![ZERO; npoints]; probes.len()];
    let mut snaps: Vec<CMatrix> = vec![CMatrix::zeros(rho0.nrows(), rho0.ncols()); snap_idx.len()];
    let mut final_state = CMatrix::zeros(rho0.nrows(), rho0.ncols());
    let mut stats = StepStats::default();

    for (n, m, x0) in pairs {
        let (dn, dm) = (prop.block_dim(n), prop.block_dim(m));
        let mirrored = hermitian && n != m;
        // O_mn (dm × dn) for Tr[X O_mn]; O_nm (dn × dm) for the mirrored Tr[X† O_nm]
        let forward: Vec<Option<Vec<C64>>> = probes
            .iter()
            .map(|(_, o)| {
                let b = prop.extract_block(o, m, n);
                (!is_zero(&b)).then_some(b)
            })
            .collect();
        let backward: Vec<Option<Vec<C64>>> = probes
            .iter()
            .map(|(_, o)| {
                if !mirrored {
                    return None;
                }
                let b = prop.extract_block(o, n, m);
                (!is_zero(&b)).then_some(b)
            })
            .collect();
        let mut state = x0;
        let s = prop
            .run_block(n, m, 1, &mut state, grid, |gi, x| {
                for (p, slot) in acc.iter_mut().enumerate() {
                    let mut v = ZERO;
                    if let Some(o) = &forward[p] {
                        for j in 0..dm {
                            for i in 0..dn {
                                v += x[i + j * dn] * o[j + i * dm];
                            }
                        }
                    }
                    if let Some(o) = &backward[p] {
                        for (xi, oi) in x.iter().zip(o) {
                            v += xi.conj() * oi;
                        }
                    }
                    slot[gi] += v;
                }
                for (si, &g) in snap_idx.iter().enumerate() {
                    if g == gi {
                        prop.insert_block(&mut snaps[si], n, m, x);
                        if mirrored {
                            let adj = CMatrix::from_column_slice(dn, dm, x).adjoint();
                            prop.insert_block(&mut snaps[si], m, n, adj.as_slice());
                        }
                    }
                }
            })
            .map_err(|e| e.with_context(format!("sector block ({n}, {m})")))?;
        stats.absorb(s);
        prop.insert_block(&mut final_state, n, m, &state);
        if mirrored {
            let adj = CMatrix::from_column_slice(dn, dm, &state).adjoint();
            prop.insert_block(&mut final_state, m, n, adj.as_slice());
        }
    }

    let probe_at = |gi: usize| {
        let acc = &acc;
        let probes = &probes;
        move |key: &str| -> C64 {
            let p = probes.iter().position(|(k, _)| k == key).expect("probe registered");
            acc[p][gi]
        }
    };
    let traces: Vec<(String, Vec<C64>)> = record
        .iter()
        .map(|o| {
            let vals = (0..npoints).map(|gi| combine(o, &probe_at(gi))).collect();
            (o.name(), vals)
        })
        .collect();

    let (max_trace_drift, min_eigenvalue) = if density {
        let p = probes.iter().position(|(k, _)| k == "trace").expect("trace probe");
        let drift = acc[p].iter().map(|t| (t - ONE).norm()).fold(0.0, f64::max);
        let mut lo = min_eigenvalue(&final_state);
        for s in &snaps {
            lo = lo.min(min_eigenvalue(s));
        }
        if lo < NEGATIVITY_TOLERANCE {
            return Err(Error::IntegratorDiverged {
                t: total,
                reason: format!("density matrix lost positivity (eigenvalue {lo:.3e})"),
                context: None,
            });
        }
        (Some(drift), Some(lo))
    } else {
        (None, None)
    };

    let spec = *ctx.spec();
    let metadata = EvolutionMetadata {
        scheme: sched.scheme().name().to_string(),
        cpbs_form: format!("{:?}", sched.cpbs_form()).to_lowercase(),
        params_hash: params_hash(ctx.params()),
        spec,
        fock_dim: ctx.basis().map(|b| b.fock_dim()).unwrap_or(spec.dim_c),
        settings: opts.settings,
        stats,
        max_trace_drift,
        min_eigenvalue,
    };
    let snapshots = snap_idx
        .iter()
        .zip(snaps)
        .map(|(&i, m)| Ok((grid[i], Operator::on_space(spec, m)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolutionResult {
        times: grid.to_vec(),
        snapshots,
        traces,
        final_state: Operator::on_space(spec, final_state)?,
        metadata,
    })
}

fn min_eigenvalue(rho: &CMatrix) -> f64 {
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Density matrix |ψ⟩⟨ψ| on the context's space.
pub fn pure_state(ctx: &GateContext, psi: &nalgebra::DVector<C64>) -> Result<Operator> {
    Operator::on_space(*ctx.spec(), psi * psi.adjoint())
}
