use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbs_core::config::RunConfig;
use cbs_core::experiments::{
    run_bit_flip_check, run_bunching, run_convergence, run_dynamics, run_hom_check, run_schemes, run_swap_timing,
    run_sweep, trajectory, AncillaStart, SweepGrid, SweepVariable, BUDGET_COLUMNS,
};
use cbs_core::lindblad::Observable;
use cbs_core::output::Table;
use cbs_core::tomography::{
    ancilla_phaseflip_probability, compute_ptm, error_budget, ideal_ptm, noise_decomposition, ptm_to_chi,
};
use cbs_core::{CatBasis, Error, Preset, Scheme};
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "cbs-sim", version, about = "Controlled beam-splitter gate simulations on a Kerr-cat ancilla")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file, layered over the preset
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// fig3, fig5-symmetric or fig6-simultaneous (default fig3 when no file is given)
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory for CSV and JSON files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and tomography
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the mean cat photon number
    #[arg(long, global = true)]
    alpha2: Option<f64>,
    /// sequential, simultaneous or simultaneous-cancelled
    #[arg(long, global = true)]
    scheme: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved effective parameters
    DeriveParams,
    /// Print the diagonalized cat basis
    CatBasis,
    /// Time traces of populations, bit flip, leakage and phase
    Dynamics {
        /// Ancilla start: 0, 1, +, -, C+, C- (all starts when omitted)
        #[arg(long, allow_hyphen_values = true)]
        ancilla: Option<String>,
        /// Cavity Fock start: 00, 01, 10 or 11
        #[arg(long, default_value = "01")]
        cavities: String,
    },
    /// Process tomography: transfer matrix, χ diagonal and error budget
    Ptm,
    /// Error budget over a grid of one parameter
    Sweep {
        /// alpha2, chi, kappa, kappa2 or n_thermal
        #[arg(long, default_value = "alpha2")]
        variable: String,
        /// "a,b,c" or "start:stop:step"
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Two-photon bunching with truncated and full cat bases
    Bunching {
        #[arg(long)]
        grid: Option<String>,
    },
    /// Sequential against simultaneous drive schemes
    Schemes,
    /// Fock truncation against the diagonal cat basis
    Convergence,
    /// Simulated bit flip against the perturbative estimate
    BitFlipCheck {
        #[arg(long)]
        grid: Option<String>,
    },
    /// Closed-system swap timing
    SwapTiming,
    /// Two-photon interference through a plain beam splitter
    HomCheck {
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io(_) => 1,
                e if e.is_config() => EXIT_CONFIG,
                _ => EXIT_NUMERIC,
            };
            ExitCode::from(code)
        }
    }
}

fn resolve(c: &Common) -> Result<RunConfig, Error> {
    let preset = c.preset.as_deref().map(Preset::from_name).transpose()?;
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path, preset)?,
        None => RunConfig::from_preset(preset.unwrap_or(Preset::Fig3)),
    };
    if let Some(a) = c.alpha2 {
        if cfg.bare.is_some() {
            return Err(Error::Config("--alpha2 cannot override a [bare] configuration".into()));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Config(format!("--alpha2 must be positive, got {a}")));
        }
        cfg.model.alpha2 = a;
    }
    if let Some(s) = &c.scheme {
        cfg.schedule.scheme = Scheme::from_name(s)?;
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn save(table: &Table, dir: &Path) -> Result<(), Error> {
    let path = table.save(dir)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn grid_or_default(grid: &Option<String>) -> Result<SweepGrid, Error> {
    grid.as_deref().map(SweepGrid::parse).unwrap_or_else(|| Ok(SweepGrid::default_alpha2()))
}

fn print_json(name: &str, value: &impl serde::Serialize, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
        _ => {}
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, text + "\n")?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = resolve(&cli.common)?;
    let dir = out_dir(&cli.common);
    match &cli.command {
        Command::DeriveParams => print_json("derive_params", &cfg.effective()?, cli.common.out.as_deref()),
        Command::CatBasis => {
            let eff = cfg.effective()?;
            let (fock, keep) = cfg.truncation(eff.alpha2());
            let basis = CatBasis::build(eff.kerr, eff.epsilon_diag, fock, keep)?;
            print_json("cat_basis", &basis.summary(), cli.common.out.as_deref())
        }
        Command::Dynamics { ancilla, cavities } => {
            let table = match ancilla {
                None if cavities == "01" => run_dynamics(&cfg)?,
                None => single_trajectory(&cfg, "0", cavities)?,
                Some(a) => single_trajectory(&cfg, a, cavities)?,
            };
            save(&table, &dir)
        }
        Command::Ptm => ptm(&cfg, &dir),
        Command::Sweep { variable, grid } => {
            let variable = SweepVariable::from_name(variable)?;
            let grid = match (grid, variable) {
                (Some(g), _) => SweepGrid::parse(g)?,
                (None, SweepVariable::Alpha2) => SweepGrid::default_alpha2(),
                (None, v) => return Err(Error::Config(format!("--grid is required when sweeping {}", v.name()))),
            };
            save(&run_sweep(&cfg, variable, &grid)?, &dir)
        }
        Command::Bunching { grid } => save(&run_bunching(&cfg, &grid_or_default(grid)?)?, &dir),
        Command::Schemes => save(&run_schemes(&cfg)?, &dir),
        Command::Convergence => save(&run_convergence(&cfg)?, &dir),
        Command::BitFlipCheck { grid } => save(&run_bit_flip_check(&cfg, &grid_or_default(grid)?)?, &dir),
        Command::SwapTiming => save(&run_swap_timing(&cfg)?, &dir),
        Command::HomCheck { points } => save(&run_hom_check(*points)?, &dir),
    }
}

fn parse_ancilla(s: &str) -> Result<AncillaStart, Error> {
    // |±_L⟩ coincide with the cat states C±
    match s {
        "0" => Ok(AncillaStart::Logical(0)),
        "1" => Ok(AncillaStart::Logical(1)),
        "+" | "C+" | "p" => Ok(AncillaStart::Cat(1)),
        "-" | "C-" | "m" => Ok(AncillaStart::Cat(-1)),
        other => Err(Error::Config(format!("unknown ancilla start '{other}' (use 0, 1, +, -, C+, C-)"))),
    }
}

fn parse_cavities(s: &str) -> Result<(usize, usize), Error> {
    let digits: Vec<usize> = s
        .chars()
        .filter(|c| !matches!(c, '|' | '>' | ' '))
        .map(|c| c.to_digit(10).map(|d| d as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Config(format!("cavity start must look like 01, got '{s}'")))?;
    match digits[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::Config(format!("cavity start must name two Fock levels, got '{s}'"))),
    }
}

fn single_trajectory(cfg: &RunConfig, ancilla: &str, cavities: &str) -> Result<Table, Error> {
    let start = parse_ancilla(ancilla)?;
    let cav = parse_cavities(cavities)?;
    let mut record = vec![Observable::NumberA, Observable::NumberB];
    if let AncillaStart::Logical(s) = start {
        record.push(Observable::BitFlip {
            from: s,
            renormalize: false,
        });
    }
    record.extend([
        Observable::Leakage,
        Observable::LogicalX,
        Observable::LogicalY,
        Observable::LogicalZ,
        Observable::PhaseRotation,
    ]);
    let (times, cols) = trajectory(cfg, cav, start, &record, None)?;
    let mut names = vec!["t".to_string(), "t_us".to_string()];
    names.extend(record.iter().map(Observable::name));
    let name = format!("dynamics_{}_{}{}", start.label(), cav.0, cav.1);
    let mut table = Table::new(&name, names);
    for (i, t) in times.iter().enumerate() {
        let mut row = vec![*t, cfg.units.seconds(*t) * 1e6];
        row.extend(cols.iter().map(|c| c[i]));
        table.push_row(row)?;
    }
    table.meta("ancilla", start.label());
    table.meta("cavities", format!("|{}{}>", cav.0, cav.1));
    for (k, v) in cfg.metadata()? {
        table.meta(&k, v);
    }
    Ok(table)
}

fn ptm(cfg: &RunConfig, dir: &Path) -> Result<(), Error> {
    let (ctx, sched) = cfg.build()?;
    let run = compute_ptm(&ctx, &sched, cfg.numerics.integrator)?;
    let eff = ctx.params();
    let r_id = ideal_ptm(eff, &sched)?;
    let p = ancilla_phaseflip_probability(eff, &sched);
    let budget = error_budget(&run.ptm, &r_id, p)?;
    let meta = cfg.metadata()?;

    let labels = run.ptm.labels.clone();
    let mut r = Table::new("ptm", labels.iter().cloned());
    for i in 0..run.ptm.r.nrows() {
        r.push_row(run.ptm.r.row(i).iter().copied().collect())?;
    }
    r.meta("rows", labels.join(" "));

    let (noise, _) = noise_decomposition(&run.ptm, &r_id)?;
    let chi = ptm_to_chi(&noise);
    let mut chi_diag = Table::new("chi_diagonal", labels.iter().cloned());
    chi_diag.push_row((0..chi.nrows()).map(|i| chi[(i, i)].re).collect())?;

    let mut b = Table::new("budget", BUDGET_COLUMNS);
    b.push_row(vec![
        budget.fidelity,
        budget.fidelity_modified,
        budget.p_z,
        budget.p_nonz,
        budget.p_leak,
        budget.p_ancilla_phaseflip,
        budget.chi_min_eigenvalue,
        sched.total_duration(),
        cfg.units.seconds(sched.total_duration()) * 1e6,
    ])?;
    for t in [&mut r, &mut chi_diag, &mut b] {
        for (k, v) in &meta {
            t.meta(k, v);
        }
        save(t, dir)?;
    }
    print_json("error_budget", &budget, Some(dir))
}
