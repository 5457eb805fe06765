//! Acceptance report: one PASS/FAIL line per criterion, details indented below.
//!
//! Runs with `cargo test --test acceptance`. A criterion that is not met prints
//! FAIL but does not abort the run; only an internal error exits non-zero.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use cbs_core::config::RunConfig;
use cbs_core::experiments::{
    budget_point, run_bit_flip_check, run_bunching, run_convergence, run_dynamics, run_error_budget, run_schemes,
    run_swap_timing, trajectory, AncillaStart, SweepGrid, BUNCHING_VARIANTS,
};
use cbs_core::gate::{ideal_gate_bosonic, ideal_gate_unitary, sum_kron, CpbsForm};
use cbs_core::lindblad::{default_grid, evolve, pure_state, Observable};
use cbs_core::operator::{kron, max_abs_diff, CMatrix, Operator, C64};
use cbs_core::output::Table;
use cbs_core::tomography::{chi_to_ptm, ptm_from_channel, ptm_to_chi, PauliTransferMatrix};
use cbs_core::{DriveSchedule, GateTarget, Preset, Result, Scheme};

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn criterion(&mut self, name: &str, ok: bool, details: &[String]) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        for d in details {
            println!("    {d}");
        }
    }
}

fn col(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn index_at(times: &[f64], t: f64) -> usize {
    times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn swap_dynamics(rep: &mut Report) -> Result<()> {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let t = run_dynamics(&cfg)?;
    let markers: Vec<f64> = serde_json::from_str(t.meta_value("markers").unwrap()).unwrap();
    let times = col(&t, "t");
    let i1 = index_at(&times, markers[0]);
    let (a0, a1) = (col(&t, "n_a_0"), col(&t, "n_a_1"));
    let mid = [a0[i1], a1[i1]];
    let end = [*a0.last().unwrap(), *a1.last().unwrap()];
    let ok = mid.iter().all(|v| (v - 0.5).abs() <= 0.05) && end[1] >= 0.95 && end[0] <= 0.05;
    rep.criterion(
        "swap dynamics (fig3, |01> input)",
        ok,
        &[
            format!("n_a(t1): ancilla 0 -> {:.4}, ancilla 1 -> {:.4} (want 0.5 +/- 0.05)", mid[0], mid[1]),
            format!("n_a(end): ancilla 0 -> {:.4} (want <= 0.05), ancilla 1 -> {:.4} (want >= 0.95)", end[0], end[1]),
        ],
    );
    Ok(())
}

fn gate_time(rep: &mut Report) -> Result<()> {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let t = run_swap_timing(&cfg)?;
    let us: f64 = t.meta_value("total_us").unwrap().parse().unwrap();
    rep.criterion(
        "gate time at K/2pi = 6.7 MHz",
        (us - 1.2).abs() <= 0.05 * 1.2,
        &[format!("t1 + t2 = {us:.4} us (want 1.2 us +/- 5%)")],
    );
    Ok(())
}

fn fidelity_and_errors(rep: &mut Report) -> Result<()> {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let start = Instant::now();
    let table = run_error_budget(&cfg, &SweepGrid::default_alpha2())?;
    let elapsed = start.elapsed();
    let a2 = col(&table, "alpha2");
    let f = col(&table, "fidelity");
    let fm = col(&table, "fidelity_modified");
    let pnz = col(&table, "p_nonz");
    let mut details: Vec<String> = a2
        .iter()
        .enumerate()
        .map(|(i, a)| {
            format!(
                "alpha2 = {a}: F = {:.4}, F_mod = {:.4}, p_nonZ = {:.3e}, p_leak = {:.3e}",
                f[i],
                fm[i],
                pnz[i],
                col(&table, "p_leak")[i]
            )
        })
        .collect();
    details.push(format!("sweep wall time {:.1} s", elapsed.as_secs_f64()));
    let i7 = a2.iter().position(|&a| a == 7.0).unwrap();
    let f_ok = (f[i7] - 0.953).abs() <= 0.010
        && (fm[i7] - 0.993).abs() <= 0.005
        && a2.iter().zip(&f).all(|(a, v)| *a == 2.0 || *v > 0.95)
        && a2.iter().zip(&fm).all(|(a, v)| *a < 5.0 || *v > 0.99);
    rep.criterion("fidelity vs cat size", f_ok, &details);

    let i2 = a2.iter().position(|&a| a == 2.0).unwrap();
    let mut off = cfg.clone();
    off.model.alpha2 = 2.0;
    off.model.chi = 0.0;
    let (b_off, _, _) = budget_point(&off)?;
    let ratio = pnz[i2] / b_off.p_nonz;
    let r7 = pnz[i7] / 1.3e-5;
    let ok2 = (pnz[i2] - 0.045).abs() <= 0.01;
    let ok7 = (1.0 / 3.0..=3.0).contains(&r7);
    let ok_off = ratio >= 100.0;
    rep.criterion(
        "error classification",
        ok2 && ok7 && ok_off,
        &[
            format!("p_nonZ(alpha2 = 2) = {:.4} (want 0.045 +/- 0.01): {}", pnz[i2], if ok2 { "ok" } else { "miss" }),
            format!("p_nonZ(alpha2 = 7) = {:.3e} (want 1.3e-5 within x3): {}", pnz[i7], if ok7 { "ok" } else { "miss" }),
            format!(
                "chi = 0 at alpha2 = 2: p_nonZ = {:.3e}, drop x{ratio:.1} (want >= 100): {}",
                b_off.p_nonz,
                if ok_off { "ok" } else { "miss" }
            ),
        ],
    );
    Ok(())
}

fn bit_flip_formula(rep: &mut Report) -> Result<()> {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let t = run_bit_flip_check(&cfg, &SweepGrid::new(vec![2.0])?)?;
    let r = &t.rows[0];
    let (s00, s11, formula) = (r[2], r[3], r[4]);
    let within = |s: f64| s / formula <= 2.0 && formula / s <= 2.0;
    rep.criterion(
        "perturbative bit-flip formula at alpha2 = 2",
        within(s00) && within(s11),
        &[
            format!("t = {:.3}/K, formula chi^2 alpha^4 csch^2(2 alpha^2) t^2 = {formula:.4}", r[1]),
            format!("|00> input: {s00:.4} (ratio {:.2})", s00 / formula),
            format!("|11> input: {s11:.4} (ratio {:.2})", s11 / formula),
        ],
    );
    Ok(())
}

fn convergence(rep: &mut Report) -> Result<()> {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let t = run_convergence(&cfg)?;
    let markers: Vec<f64> = serde_json::from_str(t.meta_value("markers").unwrap()).unwrap();
    let times = col(&t, "t");
    let (f14, f18, d8) = (col(&t, "fock14"), col(&t, "fock18"), col(&t, "diag8"));
    let cut = 0.05 * markers[0];
    let rel = |a: &[f64], b: &[f64]| {
        times
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > cut)
            .map(|(i, _)| ((a[i] - b[i]) / b[i]).abs())
            .fold(0.0, f64::max)
    };
    let diag_dev = rel(&d8, &f18);
    let fock14_dev = rel(&f14, &f18);
    let zero_start = [f14[0], f18[0], d8[0]].iter().all(|v| v.abs() < 1e-12);
    rep.criterion(
        "leakage convergence at alpha2 = 3",
        diag_dev <= 0.05 && zero_start,
        &[
            format!("max relative |diag8 - fock18| / fock18 after t > {cut:.3}: {diag_dev:.4} (want <= 0.05)"),
            format!("fock14 vs fock18 max relative deviation: {fock14_dev:.3}"),
            format!("leakage(0) = 0 for every truncation: {zero_start}"),
        ],
    );
    Ok(())
}

fn bunching(rep: &mut Report) -> Result<()> {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let t = run_bunching(&cfg, &SweepGrid::default_alpha2())?;
    let trunc = col(&t, "asym_trunc");
    let full = col(&t, "asym_full");
    let decreasing = trunc.windows(2).all(|w| w[1] < w[0]);
    let above = full.iter().zip(&trunc).all(|(f, t)| f >= t);
    let sym_gap = ["sym_trunc", "sym_full"]
        .iter()
        .flat_map(|v| {
            let p20 = col(&t, &format!("{v}_p20"));
            let p02 = col(&t, &format!("{v}_p02"));
            p20.into_iter().zip(p02).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let mut details = vec![format!("columns: {}", BUNCHING_VARIANTS.join(", "))];
    for row in &t.rows {
        details.push(format!("alpha2 = {}: {:.3e} {:.3e} {:.3e} {:.3e}", row[0], row[1], row[4], row[7], row[10]));
    }
    details.push(format!("truncated asymmetric strictly decreasing: {decreasing}"));
    details.push(format!("full >= truncated everywhere: {above}"));
    details.push(format!("symmetric max |P20 - P02| = {sym_gap:.2e} (want <= 1e-6)"));
    rep.criterion("cavity bunching", decreasing && above && sym_gap <= 1e-6, &details);
    Ok(())
}

fn schemes(rep: &mut Report) -> Result<()> {
    let mut cfg = RunConfig::from_preset(Preset::Fig3);
    cfg.numerics.grid_points = 100;
    let t = run_schemes(&cfg)?;
    let last = |c: &str| *col(&t, c).last().unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for s in ["0", "1"] {
        for q in ["leakage", "bit_flip"] {
            let seq = last(&format!("sequential_{q}_{s}"));
            let sim = last(&format!("simultaneous_{q}_{s}"));
            let can = last(&format!("cancelled_{q}_{s}"));
            let rel = (can - seq).abs() / seq;
            ok &= sim > seq && rel <= 0.30;
            details.push(format!(
                "{q}, ancilla {s}: sequential {seq:.3e}, simultaneous {sim:.3e}, cancelled {can:.3e} ({:.1}% from sequential)",
                100.0 * rel
            ));
        }
    }
    for name in ["sequential", "simultaneous", "cancelled"] {
        details.push(format!("{name} span {}", t.meta_value(&format!("{name}_total")).unwrap_or("?")));
    }
    rep.criterion("driving schemes", ok, &details);
    Ok(())
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn properties(rep: &mut Report) -> Result<()> {
    let mut details = Vec::new();
    let mut all = true;
    let mut check = |name: &str, value: f64, tol: f64| {
        let ok = value < tol;
        all &= ok;
        details.push(format!("{} {name}: {value:.3e} (tol {tol:.0e})", if ok { "ok  " } else { "miss" }));
    };

    // Hamiltonian hermiticity over presets, schemes and forms
    let mut herm: f64 = 0.0;
    for preset in Preset::ALL {
        let cfg = RunConfig::from_preset(preset);
        let eff = cfg.effective()?;
        let (ctx, _) = cfg.build()?;
        for scheme in [Scheme::Sequential, Scheme::Simultaneous, Scheme::SimultaneousCancelled] {
            for form in [CpbsForm::Asymmetric, CpbsForm::Symmetric] {
                let sched = DriveSchedule::timed(&eff, scheme, form, GateTarget::FullSwap, -0.037)?;
                for seg in 0..sched.segments().len() {
                    let h = Operator::on_space(*ctx.spec(), sum_kron(&ctx.hamiltonian_terms(&sched, seg)?))?;
                    herm = herm.max(h.hermiticity_error());
                }
            }
        }
    }
    check("Hamiltonian hermiticity", herm, 1e-12);

    // trace preservation over one gate
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let (ctx, sched) = cfg.build()?;
    let psi = ctx.product_state(0, 1, ctx.frame().logical_state(0))?;
    let rho = pure_state(&ctx, &psi)?;
    let grid = default_grid(&sched, 50);
    let res = evolve(&ctx, &sched, &rho, &[Observable::Trace], &grid)?;
    check("trace drift per gate", res.metadata.max_trace_drift.unwrap_or(f64::NAN), 1e-7);

    // ideal conditional gate commutes with the ancilla Z
    let z = kron(&CMatrix::identity(4, 4), &common::single_pauli(3));
    let comm = [0.3, PI / 2.0, PI, 2.1]
        .iter()
        .map(|&th| {
            let u = ideal_gate_unitary(th, true);
            max_abs(&(&u * &z - &z * &u))
        })
        .fold(0.0, f64::max);
    check("[U_c(theta), Z] commutator", comm, 1e-12);

    // splitter terms conserve n_a + n_b
    let ntot = ctx.embed_cavity(&(ctx.number_a() + ctx.number_b()))?;
    let mut cons: f64 = 0.0;
    for seg in 0..sched.segments().len() {
        let h = Operator::on_space(*ctx.spec(), sum_kron(&ctx.hamiltonian_terms(&sched, seg)?))?;
        cons = cons.max(h.commutator(&ntot)?.max_abs());
    }
    check("n_a + n_b conservation", cons, 1e-12);

    // Hong-Ou-Mandel through an ideal 50:50 splitter
    let u = ideal_gate_bosonic(PI / 2.0, false, 3);
    let idx = |na: usize, nb: usize| (na * 3 + nb) * 2;
    let p = |na: usize, nb: usize| u[(idx(na, nb), idx(1, 1))].norm_sqr();
    let hom = p(1, 1).max((p(2, 0) - 0.5).abs()).max((p(0, 2) - 0.5).abs());
    check("HOM |11> -> P11 = 0, P20 = P02 = 1/2", hom, 1e-10);

    // mean-field oracle at alpha = sqrt(3), dissipation off
    let mut closed = RunConfig::from_preset(Preset::Fig3);
    closed.model.kappa = 0.0;
    closed.model.kappa2 = 0.0;
    closed.model.n_thermal = 0.0;
    let eff = closed.effective()?;
    let msched = closed.drive_schedule(&eff)?;
    let mgrid = default_grid(&msched, 120);
    let mut mf: f64 = 0.0;
    for s in 0..2 {
        let zs = if s == 0 { 1.0 } else { -1.0 };
        let (times, cols) = trajectory(&closed, (0, 1), AncillaStart::Logical(s), &[Observable::NumberA], Some(&mgrid))?;
        for (t, na) in times.iter().zip(&cols[0]) {
            mf = mf.max((na - common::mean_field_na(&eff, &msched, zs, *t)).abs());
        }
    }
    check("mean-field oracle, populations", mf, 2e-2);

    // PTM <-> chi round trip on a random three-qubit channel
    let mut rng = common::rng(7);
    let kraus = common::random_kraus(8, 3, &mut rng);
    let r = ptm_from_channel(8, |x| Ok(common::apply_kraus(&kraus, x)))?;
    let back = chi_to_ptm(&ptm_to_chi(&r))?;
    check("PTM/chi round trip", (&back.r - &r.r).abs().max(), 1e-9);

    // brute-force two-qubit PTM
    let kraus2 = common::random_kraus(4, 2, &mut rng);
    let lib: PauliTransferMatrix = ptm_from_channel(4, |x| Ok(common::apply_kraus(&kraus2, x)))?;
    let brute = common::brute_force_ptm_2q(|x| common::apply_kraus(&kraus2, x));
    let mut bf: f64 = 0.0;
    for i in 0..16 {
        for j in 0..16 {
            bf = bf.max((lib.r[(i, j)] - brute[i][j]).abs());
        }
    }
    check("two-qubit brute-force PTM", bf, 1e-9);

    // linearity of evolve
    let dim = ctx.spec().total_dim();
    let p1 = Operator::projector(*ctx.spec(), &common::random_state(dim, &mut rng))?;
    let p2 = Operator::projector(*ctx.spec(), &common::random_state(dim, &mut rng))?;
    let (wa, wb) = (C64::new(0.3, 0.0), C64::new(0.7, 0.0));
    let mix = p1.scale(wa).add(&p2.scale(wb))?;
    let g = [0.0, sched.total_duration()];
    let e1 = evolve(&ctx, &sched, &p1, &[], &g)?.final_state;
    let e2 = evolve(&ctx, &sched, &p2, &[], &g)?.final_state;
    let em = evolve(&ctx, &sched, &mix, &[], &g)?.final_state;
    let lin = max_abs_diff(em.data(), &(e1.data() * wa + e2.data() * wb));
    check("linearity of evolve", lin, 1e-7);

    rep.criterion("property suites", all, &details);
    Ok(())
}

fn main() {
    let start = Instant::now();
    let mut rep = Report { passed: 0, failed: 0 };
    let steps: [(&str, fn(&mut Report) -> Result<()>); 8] = [
        ("swap dynamics", swap_dynamics),
        ("gate time", gate_time),
        ("fidelity and error classification", fidelity_and_errors),
        ("bit-flip formula", bit_flip_formula),
        ("convergence", convergence),
        ("bunching", bunching),
        ("driving schemes", schemes),
        ("property suites", properties),
    ];
    let mut errors = 0;
    for (name, step) in steps {
        if let Err(e) = step(&mut rep) {
            errors += 1;
            println!("FAIL {name}: internal error: {e}");
        }
    }
    println!(
        "acceptance: {} passed, {} failed, {errors} errored in {:.0} s",
        rep.passed,
        rep.failed,
        start.elapsed().as_secs_f64()
    );
    if errors > 0 {
        std::process::exit(1);
    }
}
