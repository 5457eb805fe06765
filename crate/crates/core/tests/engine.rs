mod common;

use cbs_core::config::RunConfig;
use cbs_core::experiments::{diagonal_context, run_dynamics};
use cbs_core::lindblad::{default_grid, evolve, evolve_with, propagate_exact, pure_state, unitary_propagator, EvolveOptions, Observable};
use cbs_core::operator::{kron, max_abs_diff, CMatrix, Operator, C64};
use cbs_core::params::SplitterCoupling;
use cbs_core::tomography::{compute_ptm, ptm_from_channel};
use cbs_core::{IntegratorSettings, Preset};

fn closed(preset: Preset) -> RunConfig {
    let mut cfg = RunConfig::from_preset(preset);
    cfg.model.kappa = 0.0;
    cfg.model.kappa2 = 0.0;
    cfg.model.n_thermal = 0.0;
    cfg
}

fn tight() -> IntegratorSettings {
    IntegratorSettings {
        rtol: 1e-11,
        atol: 1e-13,
        ..IntegratorSettings::default()
    }
}

#[test]
fn closed_system_matches_unitary_propagator() {
    let cfg = closed(Preset::Fig3);
    let (ctx, sched) = diagonal_context(&cfg, 6).unwrap();
    let mut rng = common::rng(11);
    let psi = common::random_state(ctx.spec().total_dim(), &mut rng);
    let rho = pure_state(&ctx, &psi).unwrap();
    let opts = EvolveOptions {
        settings: tight(),
        snapshot_times: Vec::new(),
    };
    let out = evolve_with(&ctx, &sched, &rho, &[], &[0.0, sched.total_duration()], &opts).unwrap();
    let u = unitary_propagator(&ctx, &sched).unwrap();
    let expect = &u * rho.data() * u.adjoint();
    let err = max_abs_diff(out.final_state.data(), &expect);
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn sector_engine_matches_dense_taylor() {
    let mut cfg = RunConfig::from_preset(Preset::Fig3);
    cfg.model.kappa = 5e-3;
    let (ctx, sched) = diagonal_context(&cfg, 4).unwrap();
    let mut rng = common::rng(3);
    let psi = common::random_state(ctx.spec().total_dim(), &mut rng);
    let rho = pure_state(&ctx, &psi).unwrap();
    let opts = EvolveOptions {
        settings: tight(),
        snapshot_times: Vec::new(),
    };
    let out = evolve_with(&ctx, &sched, &rho, &[], &[0.0, sched.total_duration()], &opts).unwrap();
    let dense = propagate_exact(&ctx, &sched, &rho).unwrap();
    let err = max_abs_diff(out.final_state.data(), dense.data());
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn tolerance_and_grid_refinement() {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let (ctx, sched) = cfg.build().unwrap();
    let psi = ctx.product_state(0, 1, ctx.frame().logical_state(1)).unwrap();
    let rho = pure_state(&ctx, &psi).unwrap();
    let record = [Observable::NumberA, Observable::Leakage];
    let coarse = evolve(&ctx, &sched, &rho, &record, &default_grid(&sched, 20)).unwrap();
    let fine_grid = default_grid(&sched, 200);
    let opts = EvolveOptions {
        settings: tight(),
        snapshot_times: Vec::new(),
    };
    let fine = evolve_with(&ctx, &sched, &rho, &record, &fine_grid, &opts).unwrap();
    for name in ["n_a", "leakage"] {
        let a = coarse.last(name).unwrap();
        let b = fine.last(name).unwrap();
        assert!((a - b).abs() < 1e-6, "{name}: {a} vs {b}");
    }
    let err = max_abs_diff(coarse.final_state.data(), fine.final_state.data());
    assert!(err < 1e-6, "{err:e}");
}

#[test]
fn cat_states_are_stationary_without_couplings() {
    let mut cfg = RunConfig::from_preset(Preset::Fig3);
    cfg.model.kappa = 0.0;
    cfg.model.n_thermal = 0.0;
    cfg.model.chi = 0.0;
    cfg.model.zeta1 = C64::new(0.0, 0.0);
    cfg.model.zeta2 = SplitterCoupling::Fixed(C64::new(0.0, 0.0));
    cfg.schedule.t1 = Some(20.0);
    cfg.schedule.t2 = Some(20.0);
    let (ctx, sched) = cfg.build().unwrap();
    for sign in [1i8, -1] {
        let psi = ctx.product_state(0, 0, &ctx.frame().cat_state(sign)).unwrap();
        let rho = pure_state(&ctx, &psi).unwrap();
        let out = evolve(&ctx, &sched, &rho, &[], &[0.0, sched.total_duration()]).unwrap();
        let overlap = (psi.adjoint() * out.final_state.data() * &psi)[(0, 0)].re;
        assert!(overlap > 1.0 - 1e-8, "{overlap}");
    }
}

#[test]
fn thermal_photons_only_add_errors_and_bit_flip_ignores_start() {
    let t = run_dynamics(&RunConfig::from_preset(Preset::Fig3)).unwrap();
    for s in ["0", "1"] {
        for q in ["leakage", "bit_flip"] {
            let hot = t.column(&format!("{q}_{s}")).unwrap();
            let cold = t.column(&format!("{q}_{s}_nt0")).unwrap();
            for (h, c) in hot.iter().zip(&cold).skip(1) {
                assert!(c <= &(h + 1e-12), "{q}_{s}: {c} > {h}");
            }
        }
    }
    let f0 = *t.column("bit_flip_0").unwrap().last().unwrap();
    let f1 = *t.column("bit_flip_1").unwrap().last().unwrap();
    assert!((f0 - f1).abs() / f0.max(f1) < 0.05, "{f0} vs {f1}");
}

#[test]
fn ptm_matches_dense_register_oracle() {
    let mut cfg = RunConfig::from_preset(Preset::Fig3);
    cfg.numerics.cavity_dim = 2;
    cfg.model.kappa = 5e-3;
    let (ctx, sched) = diagonal_context(&cfg, 2).unwrap();
    let run = compute_ptm(&ctx, &sched, tight()).unwrap();
    let reg: Vec<_> = (0..8)
        .map(|k| ctx.product_state(k >> 2, (k >> 1) & 1, ctx.frame().logical_state(k & 1)).unwrap())
        .collect();
    let v = CMatrix::from_fn(ctx.spec().total_dim(), 8, |i, k| reg[k][i]);
    let oracle = ptm_from_channel(8, |x| {
        let rho = Operator::on_space(*ctx.spec(), &v * x * v.adjoint())?;
        let out = propagate_exact(&ctx, &sched, &rho)?;
        Ok(v.adjoint() * out.data() * &v)
    })
    .unwrap();
    let err = (&run.ptm.r - &oracle.r).abs().max();
    assert!(err < 1e-8, "{err:e}");
}

#[test]
fn leakage_agrees_with_identity_column() {
    let cfg = RunConfig::from_preset(Preset::Fig3);
    let (ctx, sched) = cfg.build().unwrap();
    let run = compute_ptm(&ctx, &sched, cfg.numerics.integrator).unwrap();
    let n = ctx.spec().cavity_dim();
    let mut cav = CMatrix::zeros(n, n);
    for qa in 0..2 {
        for qb in 0..2 {
            let i = qa * ctx.spec().dim_b + qb;
            cav[(i, i)] = C64::new(1.0, 0.0);
        }
    }
    let proj = kron(&cav, &ctx.frame().observables().p_logical);
    let p = Operator::on_space(*ctx.spec(), proj).unwrap();
    let input = p.scale(C64::new(1.0 / 8.0, 0.0));
    let record = [Observable::Custom {
        name: "qubit_population".into(),
        op: p,
    }];
    let out = evolve(&ctx, &sched, &input, &record, &[0.0, sched.total_duration()]).unwrap();
    let leak = 1.0 - out.last("qubit_population").unwrap();
    assert!((leak - run.ptm.leakage()).abs() < 1e-6, "{leak} vs {}", run.ptm.leakage());
}

#[test]
fn zero_duration_gate_is_identity() {
    let mut cfg = RunConfig::from_preset(Preset::Fig3);
    cfg.schedule.t1 = Some(0.0);
    cfg.schedule.t2 = Some(0.0);
    let (ctx, sched) = cfg.build().unwrap();
    let run = compute_ptm(&ctx, &sched, cfg.numerics.integrator).unwrap();
    let err = (&run.ptm.r - nalgebra::DMatrix::<f64>::identity(64, 64)).abs().max();
    assert!(err < 1e-12, "{err:e}");
}
