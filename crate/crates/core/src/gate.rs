//! Time-segmented drive schedules, the effective Hamiltonian and collapse operators,
//! plus closed-form mean-field and ideal-gate references.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::catbasis::{CatBasis, LogicalObservables};
use crate::error::{Error, Result};
use crate::operator::{annihilation_matrix, kron, AncillaBasis, CMatrix, HilbertSpec, Operator, C64};
use crate::params::{gate_timing_for, simultaneous_duration, EffectiveParams, GateTarget, Preset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Sequential,
    Simultaneous,
    SimultaneousCancelled,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Sequential => "sequential",
            Scheme::Simultaneous => "simultaneous",
            Scheme::SimultaneousCancelled => "simultaneous-cancelled",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(Scheme::Sequential),
            "simultaneous" => Ok(Scheme::Simultaneous),
            "simultaneous-cancelled" | "cancelled" => Ok(Scheme::SimultaneousCancelled),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (sequential, simultaneous, simultaneous-cancelled)"
            ))),
        }
    }
}

/// Shape of the conditional splitter coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpbsForm {
    /// −ζ₁â†b̂ĉ† − ζ₁*âb̂†ĉ
    Asymmetric,
    /// −(ζ₁â†b̂ + ζ₁*âb̂†)(ĉ + ĉ†)
    Symmetric,
}

impl CpbsForm {
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "asymmetric" => Ok(CpbsForm::Asymmetric),
            "symmetric" => Ok(CpbsForm::Symmetric),
            other => Err(Error::Config(format!("unknown cpbs_form '{other}' (asymmetric, symmetric)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Switching {
    #[default]
    Instantaneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub zeta1_on: bool,
    pub zeta2_on: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    scheme: Scheme,
    cpbs_form: CpbsForm,
    segments: Vec<Segment>,
    linear_term_amp: C64,
    switching: Switching,
}

fn check_duration(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("segment duration must be finite and non-negative, got {t}")))
    }
}

impl DriveSchedule {
    /// Conditional stage for `t1`, then the plain splitter for `t2`.
    pub fn sequential(t1: f64, t2: f64, cpbs_form: CpbsForm) -> Result<Self> {
        check_duration(t1)?;
        check_duration(t2)?;
        Ok(Self {
            scheme: Scheme::Sequential,
            cpbs_form,
            segments: vec![
                Segment {
                    duration: t1,
                    zeta1_on: true,
                    zeta2_on: false,
                },
                Segment {
                    duration: t2,
                    zeta1_on: false,
                    zeta2_on: true,
                },
            ],
            linear_term_amp: C64::new(0.0, 0.0),
            switching: Switching::Instantaneous,
        })
    }

    /// Both couplings on for `t`, with the spurious linear ancilla drive.
    pub fn simultaneous(t: f64, cpbs_form: CpbsForm, linear_term_amp: C64) -> Result<Self> {
        check_duration(t)?;
        Ok(Self {
            scheme: Scheme::Simultaneous,
            cpbs_form,
            segments: vec![Segment {
                duration: t,
                zeta1_on: true,
                zeta2_on: true,
            }],
            linear_term_amp,
            switching: Switching::Instantaneous,
        })
    }

    /// Simultaneous drive with the linear term cancelled.
    pub fn simultaneous_cancelled(t: f64, cpbs_form: CpbsForm) -> Result<Self> {
        let mut s = Self::simultaneous(t, cpbs_form, C64::new(0.0, 0.0))?;
        s.scheme = Scheme::SimultaneousCancelled;
        Ok(s)
    }

    /// Schedule for `scheme` with durations from the coupling rates.
    pub fn timed(
        eff: &EffectiveParams,
        scheme: Scheme,
        cpbs_form: CpbsForm,
        target: GateTarget,
        linear_per_alpha: f64,
    ) -> Result<Self> {
        match scheme {
            Scheme::Sequential => {
                let t = gate_timing_for(eff, cpbs_form, target)?;
                Self::sequential(t.t1, t.t2, cpbs_form)
            }
            Scheme::Simultaneous => {
                let t = simultaneous_duration(eff, cpbs_form, target)?;
                Self::simultaneous(t, cpbs_form, C64::new(linear_per_alpha * eff.alpha_abs(), 0.0))
            }
            Scheme::SimultaneousCancelled => {
                let t = simultaneous_duration(eff, cpbs_form, target)?;
                Self::simultaneous_cancelled(t, cpbs_form)
            }
        }
    }

    pub fn for_preset(preset: Preset, eff: &EffectiveParams) -> Result<Self> {
        Self::timed(eff, preset.scheme(), preset.cpbs_form(), GateTarget::FullSwap, preset.linear_term())
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn cpbs_form(&self) -> CpbsForm {
        self.cpbs_form
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn linear_term_amp(&self) -> C64 {
        self.linear_term_amp
    }

    pub fn switching(&self) -> Switching {
        self.switching
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment start times followed by the end time.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Index of the segment active at `t`; a boundary belongs to the later segment.
    pub fn segment_at(&self, t: f64) -> Result<usize> {
        let total = self.total_duration();
        let slack = 1e-12 * total.max(1.0);
        if !(t >= -slack && t <= total + slack) {
            return Err(Error::OutOfRange(format!("time {t} outside schedule [0, {total}]")));
        }
        let b = self.boundaries();
        let mut idx = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.duration > 0.0 && t >= b[i] - slack {
                idx = i;
            }
        }
        Ok(idx)
    }
}

/// One term cavity ⊗ ancilla of an operator sum.
#[derive(Clone, Debug)]
pub struct KronTerm {
    pub cavity: CMatrix,
    pub ancilla: CMatrix,
}

/// Ancilla operators in the active representation.
#[derive(Clone, Debug)]
pub struct AncillaFrame {
    dim: usize,
    c: CMatrix,
    n: CMatrix,
    c2: CMatrix,
    quartic: CMatrix,
    logical: [DVector<C64>; 2],
    observables: LogicalObservables,
}

fn observables_from(zero: &DVector<C64>, one: &DVector<C64>, dim: usize) -> LogicalObservables {
    let p0 = zero * zero.adjoint();
    let p1 = one * one.adjoint();
    let flip = zero * one.adjoint();
    let i = C64::new(0.0, 1.0);
    let p_logical = &p0 + &p1;
    LogicalObservables {
        x: &flip + flip.adjoint(),
        y: flip.adjoint() * i - &flip * i,
        z: &p0 - &p1,
        p_leak: CMatrix::identity(dim, dim) - &p_logical,
        p_logical,
    }
}

impl AncillaFrame {
    fn from_fock_ops(a: &CMatrix, project: impl Fn(&CMatrix) -> CMatrix, logical: [DVector<C64>; 2]) -> Self {
        let ad = a.adjoint();
        let a2 = a * a;
        let quartic = &ad * &ad * &a2;
        let c = project(a);
        let dim = c.nrows();
        let observables = observables_from(&logical[0], &logical[1], dim);
        Self {
            dim,
            n: project(&(&ad * a)),
            c2: project(&a2),
            quartic: project(&quartic),
            c,
            logical,
            observables,
        }
    }

    /// Operators projected into a diagonal cat basis.
    pub fn diagonal(basis: &CatBasis) -> Self {
        let a = annihilation_matrix(basis.fock_dim()).expect("fock_dim >= 2");
        let logical = [basis.logical_state(0).clone(), basis.logical_state(1).clone()];
        Self::from_fock_ops(&a, |m| basis.project(m).expect("fock-sized operator"), logical)
    }

    /// Plain Fock representation; logical states from diagonalizing at the same truncation.
    pub fn fock(kerr: f64, epsilon_diag: C64, dim: usize) -> Result<Self> {
        let b = CatBasis::build_any(kerr, epsilon_diag, dim, 2)?;
        let a = annihilation_matrix(dim)?;
        let logical = [b.to_fock(b.logical_state(0)), b.to_fock(b.logical_state(1))];
        Ok(Self::from_fock_ops(&a, |m| m.clone(), logical))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    pub fn number(&self) -> &CMatrix {
        &self.n
    }

    pub fn c2(&self) -> &CMatrix {
        &self.c2
    }

    /// ĉ†²ĉ² in the active representation.
    pub fn quartic(&self) -> &CMatrix {
        &self.quartic
    }

    pub fn logical_state(&self, s: usize) -> &DVector<C64> {
        &self.logical[s]
    }

    /// (|0⟩ ± |1⟩)/√2, i.e. |C₊⟩ and |C₋⟩ up to phase.
    pub fn cat_state(&self, sign: i8) -> DVector<C64> {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = if sign >= 0 { 1.0 } else { -1.0 };
        (&self.logical[0] + &self.logical[1] * C64::new(s, 0.0)) * C64::new(r, 0.0)
    }

    pub fn observables(&self) -> &LogicalObservables {
        &self.observables
    }
}

/// Parameters, truncation and cached operators for one gate simulation.
#[derive(Clone, Debug)]
pub struct GateContext {
    params: EffectiveParams,
    spec: HilbertSpec,
    basis: Option<CatBasis>,
    frame: AncillaFrame,
    a: CMatrix,
    b: CMatrix,
}

impl GateContext {
    pub fn new(params: EffectiveParams, spec: HilbertSpec, basis: Option<CatBasis>) -> Result<Self> {
        params.validate_rates()?;
        let frame = match spec.ancilla_basis {
            AncillaBasis::DiagonalCat => {
                let b = basis.as_ref().ok_or(Error::MissingBasis)?;
                if b.keep() != spec.dim_c {
                    return Err(Error::DimensionMismatch {
                        expected: spec.dim_c,
                        found: b.keep(),
                    });
                }
                AncillaFrame::diagonal(b)
            }
            AncillaBasis::Fock => AncillaFrame::fock(params.kerr, params.epsilon_diag, spec.dim_c)?,
        };
        let ia = CMatrix::identity(spec.dim_a, spec.dim_a);
        let ib = CMatrix::identity(spec.dim_b, spec.dim_b);
        let a = kron(&annihilation_matrix(spec.dim_a)?, &ib);
        let b = kron(&ia, &annihilation_matrix(spec.dim_b)?);
        Ok(Self {
            params,
            spec,
            basis,
            frame,
            a,
            b,
        })
    }

    pub fn params(&self) -> &EffectiveParams {
        &self.params
    }

    pub fn spec(&self) -> &HilbertSpec {
        &self.spec
    }

    pub fn basis(&self) -> Option<&CatBasis> {
        self.basis.as_ref()
    }

    pub fn frame(&self) -> &AncillaFrame {
        &self.frame
    }

    /// â on the two-cavity space.
    pub fn cavity_a(&self) -> &CMatrix {
        &self.a
    }

    pub fn cavity_b(&self) -> &CMatrix {
        &self.b
    }

    pub fn number_a(&self) -> CMatrix {
        self.a.adjoint() * &self.a
    }

    pub fn number_b(&self) -> CMatrix {
        self.b.adjoint() * &self.b
    }

    /// â†b̂ on the two-cavity space.
    pub fn hop(&self) -> CMatrix {
        self.a.adjoint() * &self.b
    }

    fn cavity_identity(&self) -> CMatrix {
        let n = self.spec.cavity_dim();
        CMatrix::identity(n, n)
    }

    fn ancilla_identity(&self) -> CMatrix {
        CMatrix::identity(self.frame.dim, self.frame.dim)
    }

    /// Hamiltonian of segment `seg` as a list of cavity ⊗ ancilla terms.
    pub fn hamiltonian_terms(&self, sched: &DriveSchedule, seg: usize) -> Result<Vec<KronTerm>> {
        let s = sched
            .segments()
            .get(seg)
            .ok_or_else(|| Error::OutOfRange(format!("segment {seg} does not exist")))?;
        let p = &self.params;
        let f = &self.frame;
        let c = &f.c;
        let cd = c.adjoint();
        let c2 = &f.c2;
        let mut terms = Vec::new();

        let cat = &f.quartic * C64::new(-p.kerr, 0.0) + c2.adjoint() * p.epsilon + c2 * p.epsilon.conj();
        let lin = sched.linear_term_amp();
        let anc = if lin.norm() > 0.0 { cat + &cd * lin + c * lin.conj() } else { cat };
        terms.push(KronTerm {
            cavity: self.cavity_identity(),
            ancilla: anc,
        });

        let na = self.number_a();
        let nb = self.number_b();
        let id_cav = self.cavity_identity();
        let shift = (&na - &id_cav * C64::new(p.n_comp_a, 0.0)) * C64::new(p.chi_a, 0.0)
            + (&nb - &id_cav * C64::new(p.n_comp_b, 0.0)) * C64::new(p.chi_b, 0.0);
        if shift.iter().any(|z| z.norm() > 0.0) {
            let dn = &f.n - self.ancilla_identity() * C64::new(p.alpha2(), 0.0);
            terms.push(KronTerm {
                cavity: -shift,
                ancilla: dn,
            });
        }

        let hop = self.hop();
        let hop_back = hop.adjoint();
        if s.zeta1_on && p.zeta1.norm() > 0.0 {
            match sched.cpbs_form() {
                CpbsForm::Asymmetric => {
                    terms.push(KronTerm {
                        cavity: &hop * (-p.zeta1),
                        ancilla: cd.clone(),
                    });
                    terms.push(KronTerm {
                        cavity: &hop_back * (-p.zeta1.conj()),
                        ancilla: c.clone(),
                    });
                }
                CpbsForm::Symmetric => {
                    terms.push(KronTerm {
                        cavity: -(&hop * p.zeta1 + &hop_back * p.zeta1.conj()),
                        ancilla: c + &cd,
                    });
                }
            }
        }
        if s.zeta2_on && p.zeta2.norm() > 0.0 {
            terms.push(KronTerm {
                cavity: &hop * p.zeta2 + &hop_back * p.zeta2.conj(),
                ancilla: self.ancilla_identity(),
            });
        }
        Ok(terms)
    }

    /// Full Hamiltonian matrix at time `t`.
    pub fn hamiltonian_at(&self, sched: &DriveSchedule, t: f64) -> Result<Operator> {
        let seg = sched.segment_at(t)?;
        let terms = self.hamiltonian_terms(sched, seg)?;
        Operator::on_space(self.spec, sum_kron(&terms))
    }

    /// Ancilla-local jump operators √rate·L in the active representation, zero-rate channels dropped.
    pub fn ancilla_jumps(&self) -> Vec<(f64, CMatrix)> {
        let p = &self.params;
        let f = &self.frame;
        let mut out = Vec::new();
        for (rate, op) in [
            (p.kappa * (1.0 + p.n_thermal), f.c.clone()),
            (p.kappa * p.n_thermal, f.c.adjoint()),
            (p.kappa2, f.c2.clone()),
        ] {
            if rate > 0.0 {
                out.push((rate, op));
            }
        }
        out
    }

    /// The three dissipation channels (loss, thermal gain, two-photon loss), embedded.
    pub fn collapse_operators(&self) -> Result<Vec<(f64, Operator)>> {
        self.params.validate_rates()?;
        let p = &self.params;
        let f = &self.frame;
        let id = self.cavity_identity();
        [
            (p.kappa * (1.0 + p.n_thermal), f.c.clone()),
            (p.kappa * p.n_thermal, f.c.adjoint()),
            (p.kappa2, f.c2.clone()),
        ]
        .into_iter()
        .map(|(rate, op)| Ok((rate, Operator::on_space(self.spec, kron(&id, &op))?)))
        .collect()
    }

    /// Cavity Fock product |na, nb⟩ ⊗ ancilla vector.
    pub fn product_state(&self, na: usize, nb: usize, ancilla: &DVector<C64>) -> Result<DVector<C64>> {
        if na >= self.spec.dim_a || nb >= self.spec.dim_b {
            return Err(Error::OutOfRange(format!("cavity state |{na}{nb}⟩ outside truncation")));
        }
        if ancilla.len() != self.spec.dim_c {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dim_c,
                found: ancilla.len(),
            });
        }
        let mut psi = DVector::zeros(self.spec.total_dim());
        for q in 0..self.spec.dim_c {
            psi[self.spec.index(na, nb, q)] = ancilla[q];
        }
        Ok(psi)
    }

    /// Embed an ancilla operator as I_cav ⊗ op.
    pub fn embed_ancilla(&self, op: &CMatrix) -> Result<Operator> {
        Operator::on_space(self.spec, kron(&self.cavity_identity(), op))
    }

    /// Embed a two-cavity operator as op ⊗ I_anc.
    pub fn embed_cavity(&self, op: &CMatrix) -> Result<Operator> {
        Operator::on_space(self.spec, kron(op, &self.ancilla_identity()))
    }

    /// Mean-field splitting rate ζ₀ of the conditional stage.
    pub fn conditional_rate(&self, form: CpbsForm) -> f64 {
        crate::params::conditional_rate(&self.params, form)
    }
}

pub fn sum_kron(terms: &[KronTerm]) -> CMatrix {
    let mut it = terms.iter();
    let first = it.next().expect("at least one term");
    let mut acc = kron(&first.cavity, &first.ancilla);
    for t in it {
        acc += kron(&t.cavity, &t.ancilla);
    }
    acc
}

/// Mode transformation of a beam splitter with rate `zeta0` and phase `phi` after time `t`.
pub fn mean_field_evolution(zeta0: f64, phi: f64, t: f64, a0: C64, b0: C64) -> (C64, C64) {
    let m = mean_field_matrix(zeta0, phi, t);
    (m[0][0] * a0 + m[0][1] * b0, m[1][0] * a0 + m[1][1] * b0)
}

pub fn mean_field_matrix(zeta0: f64, phi: f64, t: f64) -> [[C64; 2]; 2] {
    let (s, c) = (zeta0 * t).sin_cos();
    let i = C64::new(0.0, 1.0);
    [
        [C64::new(c, 0.0), i * s * C64::from_polar(1.0, phi)],
        [i * s * C64::from_polar(1.0, -phi), C64::new(c, 0.0)],
    ]
}

/// Mode matrix generated by H = g â†b̂ + g* âb̂† over time `t`.
pub fn coupling_matrix(g: C64, t: f64) -> [[C64; 2]; 2] {
    mean_field_matrix(g.norm(), g.arg() + std::f64::consts::PI, t)
}

pub fn compose2(x: &[[C64; 2]; 2], y: &[[C64; 2]; 2]) -> [[C64; 2]; 2] {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

/// Mean-field coupling of each segment for ancilla eigenvalue `z` of the logical Z (c → zα).
pub fn mean_field_couplings(params: &EffectiveParams, sched: &DriveSchedule, z: f64) -> Vec<(C64, f64)> {
    let alpha = params.alpha;
    sched
        .segments()
        .iter()
        .map(|s| {
            let mut g = C64::new(0.0, 0.0);
            if s.zeta1_on {
                g += match sched.cpbs_form() {
                    CpbsForm::Asymmetric => -params.zeta1 * alpha.conj() * z,
                    CpbsForm::Symmetric => -params.zeta1 * (alpha + alpha.conj()) * z,
                };
            }
            if s.zeta2_on {
                g += params.zeta2;
            }
            (g, s.duration)
        })
        .collect()
}

/// Qubit-subspace dimension of the three-qubit register.
pub const QUBIT_DIM: usize = 8;

/// Cavity truncation used when building ideal gates (needs |2⟩ for bosonic enhancement).
const IDEAL_CAVITY_DIM: usize = 3;

fn beam_splitter_generator(dim: usize) -> CMatrix {
    let a = kron(&annihilation_matrix(dim).unwrap(), &CMatrix::identity(dim, dim));
    let b = kron(&CMatrix::identity(dim, dim), &annihilation_matrix(dim).unwrap());
    a.adjoint() * &b - &a * b.adjoint()
}

fn pauli_z() -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]))
}

/// exp[(θ/2)·(Z or I)·(â†b̂ − âb̂†)] on two cavities of dimension `cavity_dim` ⊗ qubit.
pub fn ideal_gate_bosonic(theta: f64, conditional: bool, cavity_dim: usize) -> CMatrix {
    let g = beam_splitter_generator(cavity_dim);
    let q = if conditional { pauli_z() } else { CMatrix::identity(2, 2) };
    (kron(&g, &q) * C64::new(0.5 * theta, 0.0)).exp()
}

/// Restrict an operator on (cavity_dim² ⊗ qubit) to cavity occupations {0, 1}.
pub fn restrict_to_qubits(u: &CMatrix, cavity_dim: usize) -> CMatrix {
    let idx: Vec<usize> = (0..QUBIT_DIM)
        .map(|k| {
            let (qa, qb, s) = (k >> 2, (k >> 1) & 1, k & 1);
            (qa * cavity_dim + qb) * 2 + s
        })
        .collect();
    CMatrix::from_fn(QUBIT_DIM, QUBIT_DIM, |i, j| u[(idx[i], idx[j])])
}

/// Ideal (conditional) beam splitter on the three-qubit register.
pub fn ideal_gate_unitary(theta: f64, conditional: bool) -> CMatrix {
    restrict_to_qubits(&ideal_gate_bosonic(theta, conditional, IDEAL_CAVITY_DIM), IDEAL_CAVITY_DIM)
}

/// Gate realized by the mean-field couplings of `sched`, on the three-qubit register.
pub fn target_unitary(params: &EffectiveParams, sched: &DriveSchedule) -> CMatrix {
    target_unitary_bosonic(params, sched, IDEAL_CAVITY_DIM).0
}

/// Same as [`target_unitary`] but also returning the unrestricted bosonic operator.
pub fn target_unitary_bosonic(params: &EffectiveParams, sched: &DriveSchedule, cavity_dim: usize) -> (CMatrix, CMatrix) {
    let d = cavity_dim;
    let a = kron(&annihilation_matrix(d).unwrap(), &CMatrix::identity(d, d));
    let b = kron(&CMatrix::identity(d, d), &annihilation_matrix(d).unwrap());
    let hop = a.adjoint() * &b;
    let hop_back = hop.adjoint();
    let plus = mean_field_couplings(params, sched, 1.0);
    let minus = mean_field_couplings(params, sched, -1.0);
    let n = d * d * 2;
    let mut u = CMatrix::identity(n, n);
    for (gp, gm) in plus.iter().zip(&minus) {
        let t = gp.1;
        let hp = &hop * gp.0 + &hop_back * gp.0.conj();
        let hm = &hop * gm.0 + &hop_back * gm.0.conj();
        let mut p0 = CMatrix::zeros(2, 2);
        p0[(0, 0)] = C64::new(1.0, 0.0);
        let mut p1 = CMatrix::zeros(2, 2);
        p1[(1, 1)] = C64::new(1.0, 0.0);
        let h = kron(&hp, &p0) + kron(&hm, &p1);
        let step = (h * C64::new(0.0, -t)).exp();
        u = step * u;
    }
    (restrict_to_qubits(&u, d), u)
}

/// Two-photon output of the swap branch when the ancilla flips part-way through the conditional stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HomState {
    /// Amplitude remaining in |11⟩.
    pub eta: f64,
    /// Bunched amplitude, state η|11⟩ + μ(|20⟩ − |02⟩)/√2.
    pub mu: f64,
    pub amp_20: f64,
    pub amp_02: f64,
}

/// Output for a flip at `fraction` of the conditional stage (0: before it, 1: after it).
pub fn hom_leakage_state(fraction: f64) -> Result<HomState> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::OutOfRange(format!("flip fraction must lie in [0, 1], got {fraction}")));
    }
    // conditional half contributes ±π/2 per branch, the plain splitter +π/2
    let theta = std::f64::consts::PI * fraction;
    let (s, c) = theta.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Ok(HomState {
        eta: c,
        mu: s,
        amp_20: s * r,
        amp_02: -s * r,
    })
}
