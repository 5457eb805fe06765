//! Run configuration: presets layered under a TOML file layered under flags.
//!
//! ```toml
//! preset = "fig3"
//!
//! [effective]
//! kerr = "6.7 MHz"        # K/2π, used to convert Hz-valued rates
//! alpha2 = 3.0
//! chi = "603 kHz"         # plain numbers are ratios to K
//! zeta1 = [0.0, -0.018]   # [re, im], or { magnitude = 0.018, phase_deg = -90 }
//! zeta2_factor = 1.0      # ζ₂ = factor·ζ₁α; or zeta2 = [re, im]
//!
//! [dissipation]
//! kappa = 2e-4
//!
//! [schedule]
//! scheme = "sequential"
//! theta = "full-swap"
//!
//! [numerics]
//! cavity_dim = 3
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;
use toml::{Table, Value};

use crate::catbasis::{default_truncation, CatBasis};
use crate::error::{Error, Result};
use crate::gate::{CpbsForm, DriveSchedule, GateContext, Scheme};
use crate::ode::IntegratorSettings;
use crate::operator::{AncillaBasis, HilbertSpec, C64};
use crate::params::{
    adjust_two_photon_drive, compensate_cross_kerr, derive_effective, dress, BareParams, DrivePhase, DriveTone,
    EffectiveParams, GateTarget, ModelParams, Preset, SplitterCoupling, ToneRole, Units,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleConfig {
    pub scheme: Scheme,
    pub cpbs_form: CpbsForm,
    pub target: GateTarget,
    /// Explicit durations in 1/K overriding the computed timing.
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub duration: Option<f64>,
    /// Linear ĉ† amplitude in units of Kα (simultaneous scheme).
    pub linear_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericsConfig {
    pub cavity_dim: usize,
    pub ancilla_basis: AncillaBasis,
    pub fock_dim: Option<usize>,
    pub keep: Option<usize>,
    pub integrator: IntegratorSettings,
    pub grid_points: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            cavity_dim: 3,
            ancilla_basis: AncillaBasis::DiagonalCat,
            fock_dim: None,
            keep: None,
            integrator: IntegratorSettings::default(),
            grid_points: crate::lindblad::DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub model: ModelParams,
    pub bare: Option<BareParams>,
    pub schedule: ScheduleConfig,
    pub numerics: NumericsConfig,
    pub units: Units,
}

impl RunConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset),
            model: preset.model(),
            bare: None,
            schedule: ScheduleConfig {
                scheme: preset.scheme(),
                cpbs_form: preset.cpbs_form(),
                target: GateTarget::FullSwap,
                t1: None,
                t2: None,
                duration: None,
                linear_term: preset.linear_term(),
            },
            numerics: NumericsConfig::default(),
            units: Units::default(),
        }
    }

    /// Reads `path` on top of `preset` (or the file's own `preset` key).
    pub fn load(path: &Path, preset: Option<Preset>) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&src, preset)
    }

    pub fn parse(src: &str, preset: Option<Preset>) -> Result<Self> {
        let table: Table = src.parse().map_err(|e: toml::de::Error| Error::Config(format!("{e}")))?;
        let p = Parser { src };
        p.check_keys(&table)?;
        let file_preset = match table.get("preset") {
            Some(v) => Some(Preset::from_name(p.string(v, "", "preset")?).map_err(|e| p.locate("", "preset", e))?),
            None => None,
        };
        let chosen = preset.or(file_preset);
        if chosen.is_none() {
            let missing = p.missing_required(&table);
            if !missing.is_empty() {
                // malformed values outrank missing ones
                p.apply(&table, &mut Self::from_preset(Preset::Fig3))?;
                return Err(Error::Config(format!(
                    "missing required keys {}; set them in the file or pick a preset to fall back on (--preset fig3, fig5-symmetric, fig6-simultaneous)",
                    missing.join(", ")
                )));
            }
        }
        let mut cfg = Self::from_preset(chosen.unwrap_or(Preset::Fig3));
        cfg.preset = chosen;
        p.apply(&table, &mut cfg)?;
        Ok(cfg)
    }

    /// Resolved effective parameters in units of K.
    pub fn effective(&self) -> Result<EffectiveParams> {
        match &self.bare {
            None => self.model.resolve(),
            Some(bare) => {
                let dressed = dress(bare)?;
                let mut eff = derive_effective(bare, &dressed)?.in_kerr_units();
                eff.kappa = self.model.kappa;
                eff.kappa2 = self.model.kappa2;
                eff.n_thermal = self.model.n_thermal;
                eff.validate_rates()?;
                let symmetric = (eff.chi_a - eff.chi_b).abs() <= 1e-12 * eff.chi_a.abs().max(1e-300);
                let half = 0.5 * self.model.n_comp;
                let comp = compensate_cross_kerr(&eff, half, half, symmetric)?;
                adjust_two_photon_drive(&comp, eff.alpha_abs(), self.model.drive_phase)
            }
        }
    }

    pub fn drive_schedule(&self, eff: &EffectiveParams) -> Result<DriveSchedule> {
        let s = &self.schedule;
        match s.scheme {
            Scheme::Sequential if s.t1.is_some() || s.t2.is_some() => {
                let (t1, t2) = match (s.t1, s.t2) {
                    (Some(a), Some(b)) => (a, b),
                    (a, b) => {
                        let timed = crate::params::gate_timing_for(eff, s.cpbs_form, s.target)?;
                        (a.unwrap_or(timed.t1), b.unwrap_or(timed.t2))
                    }
                };
                DriveSchedule::sequential(t1, t2, s.cpbs_form)
            }
            Scheme::Simultaneous if s.duration.is_some() => DriveSchedule::simultaneous(
                s.duration.unwrap_or_default(),
                s.cpbs_form,
                C64::new(s.linear_term * eff.alpha_abs(), 0.0),
            ),
            Scheme::SimultaneousCancelled if s.duration.is_some() => {
                DriveSchedule::simultaneous_cancelled(s.duration.unwrap_or_default(), s.cpbs_form)
            }
            _ => DriveSchedule::timed(eff, s.scheme, s.cpbs_form, s.target, s.linear_term),
        }
    }

    /// (fock_dim, keep) after defaults.
    pub fn truncation(&self, alpha2: f64) -> (usize, usize) {
        let (f, k) = default_truncation(alpha2);
        (self.numerics.fock_dim.unwrap_or(f), self.numerics.keep.unwrap_or(k))
    }

    /// Context and schedule ready for evolution.
    pub fn build(&self) -> Result<(GateContext, DriveSchedule)> {
        let eff = self.effective()?;
        let sched = self.drive_schedule(&eff)?;
        let d = self.numerics.cavity_dim;
        let ctx = match self.numerics.ancilla_basis {
            AncillaBasis::DiagonalCat => {
                let (fock, keep) = self.truncation(eff.alpha2());
                let basis = CatBasis::build(eff.kerr, eff.epsilon_diag, fock, keep)?;
                let spec = HilbertSpec::new(d, d, keep, AncillaBasis::DiagonalCat)?;
                GateContext::new(eff, spec, Some(basis))?
            }
            AncillaBasis::Fock => {
                let fock = self.truncation(eff.alpha2()).0;
                let spec = HilbertSpec::new(d, d, fock, AncillaBasis::Fock)?;
                GateContext::new(eff, spec, None)?
            }
        };
        Ok((ctx, sched))
    }

    /// Header lines echoing the resolved configuration.
    pub fn metadata(&self) -> Result<Vec<(String, String)>> {
        let eff = self.effective()?;
        Ok(vec![
            ("preset".into(), self.preset.map(|p| p.name()).unwrap_or("none").into()),
            ("model".into(), json(&self.model)),
            ("effective".into(), json(&eff)),
            ("schedule".into(), json(&self.schedule)),
            ("numerics".into(), json(&self.numerics)),
            ("kerr_hz".into(), format!("{}", self.units.kerr_hz)),
        ])
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_default()
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("effective", &["kerr", "alpha2", "chi", "zeta1", "zeta2", "zeta2_factor", "n_comp", "drive_phase"]),
    ("dissipation", &["kappa", "kappa2", "n_thermal"]),
    ("schedule", &["scheme", "cpbs_form", "theta", "t1", "t2", "duration", "linear_term"]),
    (
        "numerics",
        &["cavity_dim", "ancilla_basis", "fock_dim", "keep", "rtol", "atol", "h_min", "h_max", "max_steps", "grid_points"],
    ),
    ("bare", &["omega_a", "omega_b", "omega_c", "g_a", "g_b", "g3", "g4", "resonance_factor", "drives"]),
];

const DRIVE_KEYS: [&str; 3] = ["role", "omega", "epsilon"];

struct Parser<'a> {
    src: &'a str,
}

fn split_unit(s: &str) -> Option<(f64, &str)> {
    let s = s.trim();
    let cut = s.find(|c: char| c.is_alphabetic() || c == 'μ').unwrap_or(s.len());
    let (num, unit) = s.split_at(cut);
    let num = num.trim();
    // exponent markers belong to the number
    let (num, unit) = if unit.starts_with(['e', 'E']) && unit[1..].starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+') {
        let end = unit[1..].find(|c: char| c.is_alphabetic() || c == 'μ').map(|i| i + 1).unwrap_or(unit.len());
        (&s[..cut + end], unit[end..].trim())
    } else {
        (num, unit.trim())
    };
    num.trim().parse::<f64>().ok().map(|v| (v, unit))
}

fn hz_factor(unit: &str) -> Option<f64> {
    match unit {
        "Hz" => Some(1.0),
        "kHz" => Some(1e3),
        "MHz" => Some(1e6),
        "GHz" => Some(1e9),
        _ => None,
    }
}

fn second_factor(unit: &str) -> Option<f64> {
    match unit {
        "s" => Some(1.0),
        "ms" => Some(1e-3),
        "us" | "μs" | "µs" => Some(1e-6),
        "ns" => Some(1e-9),
        _ => None,
    }
}

impl<'a> Parser<'a> {
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, line) in self.src.lines().enumerate() {
            let t = line.trim();
            if t.starts_with("[[") {
                current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
                let _ = current.split('.').next();
                continue;
            }
            if t.starts_with('[') {
                current = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
                continue;
            }
            let in_section = current == section || current.starts_with(&format!("{section}."));
            if in_section {
                if let Some(rest) = t.strip_prefix(key) {
                    if rest.trim_start().starts_with('=') {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn err(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
        let name = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        match self.line_of(section, key) {
            Some(l) => Error::Config(format!("line {l}: {name}: {msg}")),
            None => Error::Config(format!("{name}: {msg}")),
        }
    }

    fn locate(&self, section: &str, key: &str, e: Error) -> Error {
        match e {
            Error::Config(msg) => self.err(section, key, msg),
            other => other,
        }
    }

    fn check_keys(&self, table: &Table) -> Result<()> {
        let mut unknown = Vec::new();
        for (k, v) in table {
            if k == "preset" {
                continue;
            }
            match SECTIONS.iter().find(|(s, _)| s == k) {
                None => unknown.push(k.clone()),
                Some((s, allowed)) => match v {
                    Value::Table(t) => {
                        for (kk, vv) in t {
                            if !allowed.contains(&kk.as_str()) {
                                unknown.push(format!("{s}.{kk}"));
                            } else if *s == "bare" && kk == "drives" {
                                if let Value::Array(items) = vv {
                                    for (i, item) in items.iter().enumerate() {
                                        if let Value::Table(d) = item {
                                            for key in d.keys() {
                                                if !DRIVE_KEYS.contains(&key.as_str()) {
                                                    unknown.push(format!("bare.drives[{i}].{key}"));
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    _ => return Err(self.err("", k, "expected a table")),
                },
            }
        }
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }

    fn missing_required(&self, table: &Table) -> Vec<String> {
        let has = |s: &str, k: &str| table.get(s).and_then(|v| v.as_table()).is_some_and(|t| t.contains_key(k));
        let mut missing = Vec::new();
        let bare = table.contains_key("bare");
        if !bare {
            for k in ["alpha2", "chi", "zeta1"] {
                if !has("effective", k) {
                    missing.push(format!("effective.{k}"));
                }
            }
            if !has("effective", "zeta2") && !has("effective", "zeta2_factor") {
                missing.push("effective.zeta2 (or zeta2_factor)".into());
            }
        }
        if !has("effective", "n_comp") {
            missing.push("effective.n_comp".into());
        }
        for k in ["kappa", "kappa2", "n_thermal"] {
            if !has("dissipation", k) {
                missing.push(format!("dissipation.{k}"));
            }
        }
        missing
    }

    fn string<'v>(&self, v: &'v Value, section: &str, key: &str) -> Result<&'v str> {
        v.as_str().ok_or_else(|| self.err(section, key, "expected a string"))
    }

    fn plain(&self, v: &Value, section: &str, key: &str) -> Result<f64> {
        match v {
            Value::Integer(i) => Ok(*i as f64),
            Value::Float(f) => Ok(*f),
            Value::String(s) => match split_unit(s) {
                Some((x, "")) => Ok(x),
                _ => Err(self.err(section, key, format!("malformed number '{s}'"))),
            },
            _ => Err(self.err(section, key, "expected a number")),
        }
    }

    fn count(&self, v: &Value, section: &str, key: &str) -> Result<usize> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(self.err(section, key, "expected a non-negative integer")),
        }
    }

    /// Ratio to K; strings with a Hz suffix are converted with `kerr_hz`.
    fn rate(&self, v: &Value, section: &str, key: &str, kerr_hz: f64) -> Result<f64> {
        if let Value::String(s) = v {
            let (x, unit) = split_unit(s).ok_or_else(|| self.err(section, key, format!("malformed number '{s}'")))?;
            if unit.is_empty() {
                return Ok(x);
            }
            let f = hz_factor(unit).ok_or_else(|| self.err(section, key, format!("unknown frequency unit '{unit}'")))?;
            return Ok(x * f / kerr_hz);
        }
        self.plain(v, section, key)
    }

    /// Frequency in Hz; plain numbers are Hz.
    fn hertz(&self, v: &Value, section: &str, key: &str) -> Result<f64> {
        if let Value::String(s) = v {
            let (x, unit) = split_unit(s).ok_or_else(|| self.err(section, key, format!("malformed number '{s}'")))?;
            if unit.is_empty() {
                return Ok(x);
            }
            let f = hz_factor(unit).ok_or_else(|| self.err(section, key, format!("unknown frequency unit '{unit}'")))?;
            return Ok(x * f);
        }
        self.plain(v, section, key)
    }

    /// Time in 1/K; strings with a seconds suffix are converted.
    fn time(&self, v: &Value, section: &str, key: &str, units: &Units) -> Result<f64> {
        if let Value::String(s) = v {
            let (x, unit) = split_unit(s).ok_or_else(|| self.err(section, key, format!("malformed number '{s}'")))?;
            if unit.is_empty() {
                return Ok(x);
            }
            let f = second_factor(unit).ok_or_else(|| self.err(section, key, format!("unknown time unit '{unit}'")))?;
            return Ok(x * f * units.kerr_angular());
        }
        self.plain(v, section, key)
    }

    fn complex(&self, v: &Value, section: &str, key: &str, scalar: &dyn Fn(&Value) -> Result<f64>) -> Result<C64> {
        match v {
            Value::Array(a) if a.len() == 2 => Ok(C64::new(scalar(&a[0])?, scalar(&a[1])?)),
            Value::Table(t) => {
                for k in t.keys() {
                    if k != "magnitude" && k != "phase_deg" {
                        return Err(self.err(section, key, format!("unknown field '{k}' (use magnitude, phase_deg)")));
                    }
                }
                let mag = t.get("magnitude").ok_or_else(|| self.err(section, key, "missing magnitude"))?;
                let phase = match t.get("phase_deg") {
                    Some(p) => self.plain(p, section, key)?,
                    None => 0.0,
                };
                Ok(C64::from_polar(scalar(mag)?, phase.to_radians()))
            }
            _ => Err(self.err(section, key, "expected [re, im] or { magnitude, phase_deg }")),
        }
    }

    fn apply(&self, table: &Table, cfg: &mut RunConfig) -> Result<()> {
        let section = |name: &str| table.get(name).and_then(|v| v.as_table());

        if let Some(b) = section("bare") {
            cfg.bare = Some(self.bare(b)?);
            if let Some(bare) = &cfg.bare {
                cfg.units.kerr_hz = -6.0 * bare.g4 / (2.0 * PI);
            }
        }

        if let Some(e) = section("effective") {
            let s = "effective";
            if let Some(v) = e.get("kerr") {
                cfg.units.kerr_hz = self.hertz(v, s, "kerr")?;
                if !(cfg.units.kerr_hz > 0.0) {
                    return Err(self.err(s, "kerr", "must be positive"));
                }
            }
            let kh = cfg.units.kerr_hz;
            if let Some(v) = e.get("alpha2") {
                cfg.model.alpha2 = self.plain(v, s, "alpha2")?;
            }
            if let Some(v) = e.get("chi") {
                cfg.model.chi = self.rate(v, s, "chi", kh)?;
            }
            if let Some(v) = e.get("zeta1") {
                cfg.model.zeta1 = self.complex(v, s, "zeta1", &|x| self.rate(x, s, "zeta1", kh))?;
            }
            match (e.get("zeta2"), e.get("zeta2_factor")) {
                (Some(_), Some(_)) => return Err(self.err(s, "zeta2", "give either zeta2 or zeta2_factor")),
                (Some(v), None) => {
                    cfg.model.zeta2 =
                        SplitterCoupling::Fixed(self.complex(v, s, "zeta2", &|x| self.rate(x, s, "zeta2", kh))?)
                }
                (None, Some(v)) => cfg.model.zeta2 = SplitterCoupling::TimesZeta1Alpha(self.plain(v, s, "zeta2_factor")?),
                (None, None) => {}
            }
            if let Some(v) = e.get("n_comp") {
                cfg.model.n_comp = self.plain(v, s, "n_comp")?;
            }
            if let Some(v) = e.get("drive_phase") {
                cfg.model.drive_phase = match self.string(v, s, "drive_phase")? {
                    "self-consistent" => DrivePhase::SelfConsistent,
                    "literal-4k" => DrivePhase::Literal4K,
                    other => {
                        return Err(self.err(s, "drive_phase", format!("unknown value '{other}' (self-consistent, literal-4k)")))
                    }
                };
            }
        }

        if let Some(d) = section("dissipation") {
            let s = "dissipation";
            let kh = cfg.units.kerr_hz;
            if let Some(v) = d.get("kappa") {
                cfg.model.kappa = self.rate(v, s, "kappa", kh)?;
            }
            if let Some(v) = d.get("kappa2") {
                cfg.model.kappa2 = self.rate(v, s, "kappa2", kh)?;
            }
            if let Some(v) = d.get("n_thermal") {
                cfg.model.n_thermal = self.plain(v, s, "n_thermal")?;
            }
        }

        if let Some(t) = section("schedule") {
            let s = "schedule";
            if let Some(v) = t.get("scheme") {
                cfg.schedule.scheme = Scheme::from_name(self.string(v, s, "scheme")?).map_err(|e| self.locate(s, "scheme", e))?;
            }
            if let Some(v) = t.get("cpbs_form") {
                cfg.schedule.cpbs_form =
                    CpbsForm::from_name(self.string(v, s, "cpbs_form")?).map_err(|e| self.locate(s, "cpbs_form", e))?;
            }
            if let Some(v) = t.get("theta") {
                cfg.schedule.target = match v {
                    Value::String(x) if x == "full-swap" => GateTarget::FullSwap,
                    Value::String(x) if x == "fifty-fifty" => GateTarget::FiftyFifty,
                    other => GateTarget::Angle(self.plain(other, s, "theta")?),
                };
            }
            let units = cfg.units;
            if let Some(v) = t.get("t1") {
                cfg.schedule.t1 = Some(self.time(v, s, "t1", &units)?);
            }
            if let Some(v) = t.get("t2") {
                cfg.schedule.t2 = Some(self.time(v, s, "t2", &units)?);
            }
            if let Some(v) = t.get("duration") {
                cfg.schedule.duration = Some(self.time(v, s, "duration", &units)?);
            }
            if let Some(v) = t.get("linear_term") {
                cfg.schedule.linear_term = self.plain(v, s, "linear_term")?;
            }
        }

        if let Some(n) = section("numerics") {
            let s = "numerics";
            let num = &mut cfg.numerics;
            if let Some(v) = n.get("cavity_dim") {
                num.cavity_dim = self.count(v, s, "cavity_dim")?;
            }
            if let Some(v) = n.get("ancilla_basis") {
                num.ancilla_basis = match self.string(v, s, "ancilla_basis")? {
                    "diagonal-cat" => AncillaBasis::DiagonalCat,
                    "fock" => AncillaBasis::Fock,
                    other => {
                        return Err(self.err(s, "ancilla_basis", format!("unknown value '{other}' (diagonal-cat, fock)")))
                    }
                };
            }
            if let Some(v) = n.get("fock_dim") {
                num.fock_dim = Some(self.count(v, s, "fock_dim")?);
            }
            if let Some(v) = n.get("keep") {
                num.keep = Some(self.count(v, s, "keep")?);
            }
            if let Some(v) = n.get("rtol") {
                num.integrator.rtol = self.plain(v, s, "rtol")?;
            }
            if let Some(v) = n.get("atol") {
                num.integrator.atol = self.plain(v, s, "atol")?;
            }
            if let Some(v) = n.get("h_min") {
                num.integrator.h_min = self.plain(v, s, "h_min")?;
            }
            if let Some(v) = n.get("h_max") {
                num.integrator.h_max = self.plain(v, s, "h_max")?;
            }
            if let Some(v) = n.get("max_steps") {
                num.integrator.max_steps = self.count(v, s, "max_steps")?;
            }
            if let Some(v) = n.get("grid_points") {
                num.grid_points = self.count(v, s, "grid_points")?;
            }
            num.integrator.validate().map_err(|e| self.locate(s, "rtol", e))?;
        }
        Ok(())
    }

    fn bare(&self, b: &Table) -> Result<BareParams> {
        let s = "bare";
        let need = |k: &str| b.get(k).ok_or_else(|| self.err(s, k, "required when [bare] is given"));
        let ang = |k: &str| -> Result<f64> { Ok(2.0 * PI * self.hertz(need(k)?, s, k)?) };
        let mut drives = Vec::new();
        if let Some(v) = b.get("drives") {
            let items = v.as_array().ok_or_else(|| self.err(s, "drives", "expected an array of tables"))?;
            for item in items {
                let t = item.as_table().ok_or_else(|| self.err(s, "drives", "expected an array of tables"))?;
                let role = match t.get("role").and_then(|r| r.as_str()) {
                    Some("two-photon") => ToneRole::TwoPhoton,
                    Some("controlled-splitter") => ToneRole::ControlledSplitter,
                    Some("splitter") => ToneRole::Splitter,
                    Some("auxiliary") => ToneRole::Auxiliary,
                    _ => {
                        return Err(self.err(
                            s,
                            "role",
                            "expected one of two-photon, controlled-splitter, splitter, auxiliary",
                        ))
                    }
                };
                let omega = 2.0 * PI * self.hertz(t.get("omega").ok_or_else(|| self.err(s, "omega", "missing"))?, s, "omega")?;
                let eps_v = t.get("epsilon").ok_or_else(|| self.err(s, "epsilon", "missing"))?;
                let epsilon = self.complex(eps_v, s, "epsilon", &|x| self.hertz(x, s, "epsilon"))? * (2.0 * PI);
                drives.push(DriveTone { role, omega, epsilon });
            }
        }
        let bare = BareParams {
            omega_a0: ang("omega_a")?,
            omega_b0: ang("omega_b")?,
            omega_c0: ang("omega_c")?,
            g_a: ang("g_a")?,
            g_b: ang("g_b")?,
            g3: ang("g3")?,
            g4: ang("g4")?,
            drives,
            resonance_factor: match b.get("resonance_factor") {
                Some(v) => self.plain(v, s, "resonance_factor")?,
                None => 10.0,
            },
        };
        bare.validate()?;
        Ok(bare)
    }
}
