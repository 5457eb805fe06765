//! Named experiments producing [`Table`]s.
//!
//! Sweep points run on the rayon pool; results are collected in input order so
//! serial and parallel runs give identical bytes.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::catbasis::CatBasis;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gate::{hom_leakage_state, ideal_gate_bosonic, CpbsForm, DriveSchedule, GateContext, Scheme};
use crate::lindblad::{default_grid, evolve_with, pure_state, EvolveOptions, Observable};
use crate::operator::{AncillaBasis, HilbertSpec, C64};
use crate::output::Table;
use crate::params::{EffectiveParams, Preset};
use crate::tomography::{ancilla_phaseflip_probability, compute_ptm, error_budget, ideal_ptm, ErrorBudget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dynamics,
    ErrorBudget,
    Bunching,
    Schemes,
    Convergence,
    HomCheck,
    SwapTiming,
    BitFlipCheck,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Dynamics => "dynamics",
            Experiment::ErrorBudget => "error_budget",
            Experiment::Bunching => "bunching",
            Experiment::Schemes => "schemes",
            Experiment::Convergence => "convergence",
            Experiment::HomCheck => "hom_check",
            Experiment::SwapTiming => "swap_timing",
            Experiment::BitFlipCheck => "bit_flip_check",
        }
    }
}

/// Nonempty, strictly increasing list of sweep values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid(Vec<f64>);

impl SweepGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!("sweep grid must be finite and strictly increasing, got {values:?}")));
        }
        Ok(Self(values))
    }

    /// Parses "2,3,4" or "start:stop:step".
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("malformed grid '{s}': {e}"));
        if s.contains(':') {
            let p: Vec<f64> = s.split(':').map(|x| x.trim().parse::<f64>().map_err(|e| bad(&e))).collect::<Result<_>>()?;
            if p.len() != 3 || !(p[2] > 0.0) {
                return Err(bad(&"expected start:stop:step with step > 0"));
            }
            let n = ((p[1] - p[0]) / p[2] + 1e-9).floor();
            if n < 0.0 {
                return Err(bad(&"stop before start"));
            }
            return Self::new((0..=n as usize).map(|i| p[0] + i as f64 * p[2]).collect());
        }
        Self::new(s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| bad(&e))).collect::<Result<_>>()?)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// α² ∈ {2, …, 7}.
    pub fn default_alpha2() -> Self {
        Self((2..=7).map(f64::from).collect())
    }
}

/// Parameter a generic sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    Alpha2,
    Chi,
    Kappa,
    Kappa2,
    NThermal,
}

impl SweepVariable {
    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "alpha2" => Ok(Self::Alpha2),
            "chi" => Ok(Self::Chi),
            "kappa" => Ok(Self::Kappa),
            "kappa2" => Ok(Self::Kappa2),
            "n_thermal" => Ok(Self::NThermal),
            other => Err(Error::Config(format!(
                "unknown sweep variable '{other}' (alpha2, chi, kappa, kappa2, n_thermal)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Alpha2 => "alpha2",
            Self::Chi => "chi",
            Self::Kappa => "kappa",
            Self::Kappa2 => "kappa2",
            Self::NThermal => "n_thermal",
        }
    }

    pub fn apply(&self, cfg: &mut RunConfig, value: f64) {
        match self {
            Self::Alpha2 => cfg.model.alpha2 = value,
            Self::Chi => cfg.model.chi = value,
            Self::Kappa => cfg.model.kappa = value,
            Self::Kappa2 => cfg.model.kappa2 = value,
            Self::NThermal => cfg.model.n_thermal = value,
        }
    }
}

/// Initial ancilla preparation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AncillaStart {
    Logical(usize),
    /// Cat state C± with the given sign.
    Cat(i8),
}

impl AncillaStart {
    pub fn vector(&self, ctx: &GateContext) -> Result<DVector<C64>> {
        match *self {
            AncillaStart::Logical(s) if s < 2 => Ok(ctx.frame().logical_state(s).clone()),
            AncillaStart::Logical(s) => Err(Error::OutOfRange(format!("logical state must be 0 or 1, got {s}"))),
            AncillaStart::Cat(sign) => Ok(ctx.frame().cat_state(sign)),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            AncillaStart::Logical(s) => s.to_string(),
            AncillaStart::Cat(s) if s >= 0 => "p".into(),
            AncillaStart::Cat(_) => "m".into(),
        }
    }
}

/// One simulated trajectory: columns in `record` order.
pub fn trajectory(
    cfg: &RunConfig,
    cavities: (usize, usize),
    start: AncillaStart,
    record: &[Observable],
    grid: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (ctx, sched) = cfg.build()?;
    trajectory_in(&ctx, &sched, cfg, cavities, start, record, grid)
}

fn trajectory_in(
    ctx: &GateContext,
    sched: &DriveSchedule,
    cfg: &RunConfig,
    cavities: (usize, usize),
    start: AncillaStart,
    record: &[Observable],
    grid: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let anc = start.vector(ctx)?;
    let psi = ctx.product_state(cavities.0, cavities.1, &anc)?;
    let rho = pure_state(ctx, &psi)?;
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(sched, cfg.numerics.grid_points),
    };
    let opts = EvolveOptions {
        settings: cfg.numerics.integrator,
        snapshot_times: Vec::new(),
    };
    let res = evolve_with(ctx, sched, &rho, record, &grid, &opts)?;
    let cols = record
        .iter()
        .map(|o| res.real(&o.name()).expect("recorded observable"))
        .collect();
    Ok((res.times, cols))
}

fn uniform_grid(total: f64, points: usize) -> Vec<f64> {
    if total == 0.0 || points < 2 {
        return vec![0.0];
    }
    (0..points).map(|i| total * i as f64 / (points - 1) as f64).collect()
}

fn echo(table: &mut Table, cfg: &RunConfig) -> Result<()> {
    for (k, v) in cfg.metadata()? {
        table.meta(&k, v);
    }
    Ok(())
}

fn bit_flip(from: usize) -> Observable {
    Observable::BitFlip {
        from,
        renormalize: false,
    }
}

/// Populations, phase, bit flip and leakage for the |01⟩ input, with and without thermal photons.
pub fn run_dynamics(cfg: &RunConfig) -> Result<Table> {
    let (ctx, sched) = cfg.build()?;
    let grid = default_grid(&sched, cfg.numerics.grid_points);
    let mut cold = cfg.clone();
    cold.model.n_thermal = 0.0;

    type Job = (bool, AncillaStart, Vec<Observable>);
    let mut jobs: Vec<Job> = Vec::new();
    for thermal in [true, false] {
        for s in 0..2 {
            jobs.push((thermal, AncillaStart::Logical(s), vec![Observable::NumberA, Observable::NumberB, bit_flip(s), Observable::Leakage]));
        }
        for sign in [1, -1] {
            jobs.push((thermal, AncillaStart::Cat(sign), vec![Observable::PhaseRotation, Observable::LogicalX]));
        }
    }
    let (cold_ctx, cold_sched) = cold.build()?;
    let runs = jobs
        .par_iter()
        .map(|(thermal, start, record)| {
            let (c, s, conf) = if *thermal { (&ctx, &sched, cfg) } else { (&cold_ctx, &cold_sched, &cold) };
            trajectory_in(c, s, conf, (0, 1), *start, record, Some(&grid)).map(|r| r.1)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut names = vec!["t".to_string(), "t_us".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![grid.clone(), grid.iter().map(|t| cfg.units.seconds(*t) * 1e6).collect()];
    for ((thermal, start, record), data) in jobs.iter().zip(runs) {
        let suffix = if *thermal { "" } else { "_nt0" };
        for (obs, col) in record.iter().zip(data) {
            let base = match obs {
                Observable::PhaseRotation => "phase".to_string(),
                Observable::LogicalX => "x".to_string(),
                other => other.name(),
            };
            names.push(format!("{base}_{}{suffix}", start.label()));
            cols.push(col);
        }
    }
    let mut table = Table::new(Experiment::Dynamics.name(), names);
    for i in 0..grid.len() {
        table.push_row(cols.iter().map(|c| c[i]).collect())?;
    }
    let b = sched.boundaries();
    table.meta("markers", serde_json::to_string(&b[1..]).unwrap_or_default());
    table.meta("markers_us", serde_json::to_string(&b[1..].iter().map(|t| cfg.units.seconds(*t) * 1e6).collect::<Vec<_>>()).unwrap_or_default());
    table.meta("initial_cavities", "|01>");
    echo(&mut table, cfg)?;
    Ok(table)
}

/// Budget of a single configuration.
pub fn budget_point(cfg: &RunConfig) -> Result<(ErrorBudget, EffectiveParams, DriveSchedule)> {
    let (ctx, sched) = cfg.build()?;
    let run = compute_ptm(&ctx, &sched, cfg.numerics.integrator)?;
    let eff = ctx.params().clone();
    let r_id = ideal_ptm(&eff, &sched)?;
    let b = error_budget(&run.ptm, &r_id, ancilla_phaseflip_probability(&eff, &sched))?;
    Ok((b, eff, sched))
}

pub const BUDGET_COLUMNS: [&str; 9] = [
    "fidelity",
    "fidelity_modified",
    "p_z",
    "p_nonz",
    "p_leak",
    "p_ancilla_phaseflip",
    "chi_min_eigenvalue",
    "gate_time",
    "gate_time_us",
];

/// Error budget over a sweep of one variable; the gate is retimed at every point.
pub fn run_sweep(cfg: &RunConfig, variable: SweepVariable, grid: &SweepGrid) -> Result<Table> {
    let rows = grid
        .values()
        .par_iter()
        .map(|&v| {
            let mut c = cfg.clone();
            variable.apply(&mut c, v);
            let (b, _, sched) = budget_point(&c)?;
            let t = sched.total_duration();
            Ok(vec![
                v,
                b.fidelity,
                b.fidelity_modified,
                b.p_z,
                b.p_nonz,
                b.p_leak,
                b.p_ancilla_phaseflip,
                b.chi_min_eigenvalue,
                t,
                cfg.units.seconds(t) * 1e6,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let name = if variable == SweepVariable::Alpha2 { Experiment::ErrorBudget.name().to_string() } else { format!("sweep_{}", variable.name()) };
    let mut table = Table::new(&name, std::iter::once(variable.name()).chain(BUDGET_COLUMNS));
    for r in rows {
        table.push_row(r)?;
    }
    table.meta("sweep_variable", variable.name());
    echo(&mut table, cfg)?;
    Ok(table)
}

pub fn run_error_budget(cfg: &RunConfig, grid: &SweepGrid) -> Result<Table> {
    run_sweep(cfg, SweepVariable::Alpha2, grid)
}

/// Couplings of `preset` with the dissipation, numerics and units of `cfg`.
pub fn with_preset_couplings(cfg: &RunConfig, preset: Preset) -> RunConfig {
    let mut out = RunConfig::from_preset(preset);
    let m = &cfg.model;
    out.model.alpha2 = m.alpha2;
    out.model.n_comp = m.n_comp;
    out.model.kappa = m.kappa;
    out.model.kappa2 = m.kappa2;
    out.model.n_thermal = m.n_thermal;
    out.model.drive_phase = m.drive_phase;
    out.numerics = cfg.numerics.clone();
    out.units = cfg.units;
    out
}

pub const BUNCHING_VARIANTS: [&str; 4] = ["asym_trunc", "asym_full", "sym_trunc", "sym_full"];

/// P20 + P02 at gate end for the |11⟩ input with the ancilla in |1⟩.
pub fn run_bunching(cfg: &RunConfig, grid: &SweepGrid) -> Result<Table> {
    let jobs: Vec<(f64, usize)> = grid.values().iter().flat_map(|&a| (0..4).map(move |v| (a, v))).collect();
    let results = jobs
        .par_iter()
        .map(|&(alpha2, v)| {
            let preset = if v < 2 { Preset::Fig3 } else { Preset::Fig5Symmetric };
            let mut c = with_preset_couplings(cfg, preset);
            c.model.alpha2 = alpha2;
            c.numerics.ancilla_basis = AncillaBasis::DiagonalCat;
            if v % 2 == 0 {
                c.numerics.keep = Some(2);
            }
            let (ctx, sched) = c.build()?;
            let grid = [0.0, sched.total_duration()];
            let record = [Observable::Population { na: 2, nb: 0 }, Observable::Population { na: 0, nb: 2 }];
            let (_, cols) = trajectory_in(&ctx, &sched, &c, (1, 1), AncillaStart::Logical(1), &record, Some(&grid))?;
            Ok((cols[0][1], cols[1][1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut names = vec!["alpha2".to_string()];
    for v in BUNCHING_VARIANTS {
        names.extend([v.to_string(), format!("{v}_p20"), format!("{v}_p02")]);
    }
    let mut table = Table::new(Experiment::Bunching.name(), names);
    for (i, &a) in grid.values().iter().enumerate() {
        let mut row = vec![a];
        for &(p20, p02) in &results[4 * i..4 * i + 4] {
            row.extend([p20 + p02, p20, p02]);
        }
        table.push_row(row)?;
    }
    table.meta("initial_cavities", "|11>");
    table.meta("ancilla", "logical 1");
    table.meta("truncated_keep", 2);
    echo(&mut table, cfg)?;
    Ok(table)
}

pub const SCHEMES: [(&str, Scheme, Preset); 3] = [
    ("sequential", Scheme::Sequential, Preset::Fig3),
    ("simultaneous", Scheme::Simultaneous, Preset::Fig6Simultaneous),
    ("cancelled", Scheme::SimultaneousCancelled, Preset::Fig6Simultaneous),
];

fn scheme_config(cfg: &RunConfig, scheme: Scheme, preset: Preset) -> RunConfig {
    let mut c = with_preset_couplings(cfg, preset);
    c.schedule.scheme = scheme;
    c.schedule.cpbs_form = CpbsForm::Asymmetric;
    c
}

/// Sequential against simultaneous driving, each over its own gate span on a shared fractional grid.
pub fn run_schemes(cfg: &RunConfig) -> Result<Table> {
    let points = cfg.numerics.grid_points.max(2);
    let frac = uniform_grid(1.0, points);
    let starts = [AncillaStart::Logical(0), AncillaStart::Logical(1), AncillaStart::Cat(1)];
    let jobs: Vec<(usize, AncillaStart)> = (0..SCHEMES.len()).flat_map(|s| starts.iter().map(move |a| (s, *a))).collect();
    let built = SCHEMES
        .iter()
        .map(|(_, scheme, preset)| {
            let c = scheme_config(cfg, *scheme, *preset);
            let (ctx, sched) = c.build()?;
            Ok((c, ctx, sched))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs = jobs
        .par_iter()
        .map(|&(s, start)| {
            let (c, ctx, sched) = &built[s];
            let grid: Vec<f64> = frac.iter().map(|f| f * sched.total_duration()).collect();
            let record = match start {
                AncillaStart::Logical(k) => vec![bit_flip(k), Observable::Leakage, Observable::NumberA],
                AncillaStart::Cat(_) => vec![Observable::LogicalX, Observable::PhaseRotation],
            };
            trajectory_in(ctx, sched, c, (0, 1), start, &record, Some(&grid)).map(|r| (record, r.1))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut names = vec!["fraction".to_string(), "t".to_string()];
    let t_seq = built[0].2.total_duration();
    let mut cols = vec![frac.clone(), frac.iter().map(|f| f * t_seq).collect::<Vec<_>>()];
    for (&(s, start), (record, data)) in jobs.iter().zip(runs) {
        for (obs, col) in record.iter().zip(data) {
            let base = match obs {
                Observable::LogicalX => "x".to_string(),
                Observable::PhaseRotation => "phase".to_string(),
                other => other.name(),
            };
            let label = match start {
                AncillaStart::Cat(_) => String::new(),
                other => format!("_{}", other.label()),
            };
            names.push(format!("{}_{base}{label}", SCHEMES[s].0));
            cols.push(col);
        }
    }
    let mut table = Table::new(Experiment::Schemes.name(), names);
    for i in 0..frac.len() {
        table.push_row(cols.iter().map(|c| c[i]).collect())?;
    }
    for ((name, _, _), (_, _, sched)) in SCHEMES.iter().zip(&built) {
        table.meta(&format!("{name}_total"), sched.total_duration());
    }
    table.meta("markers", serde_json::to_string(&built[0].2.boundaries()[1..]).unwrap_or_default());
    echo(&mut table, cfg)?;
    Ok(table)
}

pub const CONVERGENCE_FOCK_DIMS: [usize; 3] = [14, 16, 18];
pub const CONVERGENCE_KEEP: usize = 8;

/// Context with a Fock-basis ancilla of exactly `dim` levels, ignoring the usual truncation floor.
pub fn fock_context(cfg: &RunConfig, dim: usize) -> Result<(GateContext, DriveSchedule)> {
    let eff = cfg.effective()?;
    let sched = cfg.drive_schedule(&eff)?;
    let d = cfg.numerics.cavity_dim;
    let spec = HilbertSpec::new(d, d, dim, AncillaBasis::Fock)?;
    Ok((GateContext::new(eff, spec, None)?, sched))
}

/// Context with a diagonal cat basis of `keep` states.
pub fn diagonal_context(cfg: &RunConfig, keep: usize) -> Result<(GateContext, DriveSchedule)> {
    let eff = cfg.effective()?;
    let sched = cfg.drive_schedule(&eff)?;
    let d = cfg.numerics.cavity_dim;
    let fock = cfg.truncation(eff.alpha2()).0;
    let basis = CatBasis::build(eff.kerr, eff.epsilon_diag, fock, keep)?;
    let spec = HilbertSpec::new(d, d, keep, AncillaBasis::DiagonalCat)?;
    Ok((GateContext::new(eff, spec, Some(basis))?, sched))
}

/// Leakage traces for Fock truncations 14/16/18 and the diagonal basis with 8 states.
pub fn run_convergence(cfg: &RunConfig) -> Result<Table> {
    let (_, sched) = cfg.build()?;
    let grid = default_grid(&sched, cfg.numerics.grid_points);
    let variants: Vec<Option<usize>> = CONVERGENCE_FOCK_DIMS.iter().map(|d| Some(*d)).chain([None]).collect();
    let cols = variants
        .par_iter()
        .map(|v| {
            let (ctx, sched) = match v {
                Some(d) => fock_context(cfg, *d)?,
                None => diagonal_context(cfg, CONVERGENCE_KEEP)?,
            };
            let (_, c) = trajectory_in(&ctx, &sched, cfg, (0, 1), AncillaStart::Logical(0), &[Observable::Leakage], Some(&grid))?;
            Ok(c.into_iter().next().unwrap_or_default())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut names = vec!["t".to_string()];
    names.extend(CONVERGENCE_FOCK_DIMS.iter().map(|d| format!("fock{d}")));
    names.push(format!("diag{CONVERGENCE_KEEP}"));
    let mut table = Table::new(Experiment::Convergence.name(), names);
    for (i, t) in grid.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(cols.iter().map(|c| c[i]));
        table.push_row(row)?;
    }
    table.meta("markers", serde_json::to_string(&sched.boundaries()[1..]).unwrap_or_default());
    table.meta("initial", "|01> with ancilla logical 0");
    echo(&mut table, cfg)?;
    Ok(table)
}

/// χ²α⁴csch²(2α²)t².
pub fn perturbative_bit_flip(chi: f64, alpha2: f64, t: f64) -> f64 {
    let s = (2.0 * alpha2).sinh();
    (chi * alpha2 * t / s).powi(2)
}

/// Simulated ancilla bit flip at gate end for |00⟩ and |11⟩ against the perturbative estimate.
pub fn run_bit_flip_check(cfg: &RunConfig, grid: &SweepGrid) -> Result<Table> {
    let rows = grid
        .values()
        .par_iter()
        .map(|&alpha2| {
            let mut c = cfg.clone();
            c.model.alpha2 = alpha2;
            let (ctx, sched) = c.build()?;
            let t = sched.total_duration();
            let mut row = vec![alpha2, t];
            for cav in [(0, 0), (1, 1)] {
                let (_, cols) = trajectory_in(&ctx, &sched, &c, cav, AncillaStart::Logical(0), &[bit_flip(0)], Some(&[0.0, t]))?;
                row.push(cols[0][1]);
            }
            row.push(perturbative_bit_flip(ctx.params().chi, alpha2, t));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(Experiment::BitFlipCheck.name(), ["alpha2", "t", "bit_flip_00", "bit_flip_11", "formula"]);
    for r in rows {
        table.push_row(r)?;
    }
    echo(&mut table, cfg)?;
    Ok(table)
}

/// Stage durations in units of 1/K and in microseconds.
pub fn run_swap_timing(cfg: &RunConfig) -> Result<Table> {
    let eff = cfg.effective()?;
    let sched = cfg.drive_schedule(&eff)?;
    let mut table = Table::new(Experiment::SwapTiming.name(), ["segment", "duration", "duration_us", "end", "end_us"]);
    let mut end = 0.0;
    for (i, seg) in sched.segments().iter().enumerate() {
        end += seg.duration;
        table.push_row(vec![i as f64, seg.duration, cfg.units.seconds(seg.duration) * 1e6, end, cfg.units.seconds(end) * 1e6])?;
    }
    table.meta("total", sched.total_duration());
    table.meta("total_us", cfg.units.seconds(sched.total_duration()) * 1e6);
    echo(&mut table, cfg)?;
    Ok(table)
}

/// |11⟩ through an ideal 50:50 splitter, then the partially flipped swap branch.
pub fn run_hom_check(points: usize) -> Result<Table> {
    let d = 3;
    let u = ideal_gate_bosonic(std::f64::consts::FRAC_PI_2, false, d);
    let idx = |na: usize, nb: usize| (na * d + nb) * 2;
    let col = idx(1, 1);
    let p = |na: usize, nb: usize| u[(idx(na, nb), col)].norm_sqr();
    let mut table = Table::new(Experiment::HomCheck.name(), ["fraction", "p11", "p20", "p02"]);
    table.meta("ideal_50_50", serde_json::to_string(&[p(1, 1), p(2, 0), p(0, 2)]).unwrap_or_default());
    for f in uniform_grid(1.0, points.max(2)) {
        let h = hom_leakage_state(f)?;
        table.push_row(vec![f, h.eta * h.eta, h.amp_20 * h.amp_20, h.amp_02 * h.amp_02])?;
    }
    Ok(table)
}
