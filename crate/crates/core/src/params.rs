//! Device parameters: dressing of bare circuit parameters, effective couplings,
//! cross-Kerr compensation, two-photon drive adjustment, gate timing and presets.
//!
//! Everything downstream works in units of the Kerr rate (K = 1, time in 1/K).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::{CpbsForm, Scheme};
use crate::operator::C64;

/// Which mixing process a bare drive tone is meant to activate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToneRole {
    /// ω₁ = 2ω'_c, squeezing drive of the cat.
    TwoPhoton,
    /// ω₂ = ω'_c + Δ, conditional beam splitter.
    ControlledSplitter,
    /// ω₃ = Δ, plain beam splitter.
    Splitter,
    Auxiliary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    pub role: ToneRole,
    pub omega: f64,
    pub epsilon: C64,
}

/// Bare circuit parameters, all angular frequencies in a common unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BareParams {
    pub omega_a0: f64,
    pub omega_b0: f64,
    pub omega_c0: f64,
    pub g_a: f64,
    pub g_b: f64,
    pub g3: f64,
    pub g4: f64,
    pub drives: Vec<DriveTone>,
    /// A tone is near-resonant when |ω_k − ω_mode| ≤ factor·|ε_k|.
    pub resonance_factor: f64,
}

impl BareParams {
    pub fn delta_a(&self) -> f64 {
        self.omega_a0 - self.omega_c0
    }

    pub fn delta_b(&self) -> f64 {
        self.omega_b0 - self.omega_c0
    }

    pub fn ratio_a(&self) -> f64 {
        self.g_a / self.delta_a()
    }

    pub fn ratio_b(&self) -> f64 {
        self.g_b / self.delta_b()
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_a() == 0.0 || self.delta_b() == 0.0 {
            return Err(Error::Config("cavity and ancilla bare frequencies must differ (dispersive regime)".into()));
        }
        if self.ratio_a().abs() >= 0.5 || self.ratio_b().abs() >= 0.5 {
            return Err(Error::Config(format!(
                "|g/Δ| must stay below 0.5 (got {:.3}, {:.3})",
                self.ratio_a(),
                self.ratio_b()
            )));
        }
        for (i, d) in self.drives.iter().enumerate() {
            for e in &self.drives[i + 1..] {
                if d.omega == e.omega {
                    return Err(Error::Config(format!("two drive tones share frequency {}", d.omega)));
                }
            }
        }
        Ok(())
    }
}

/// Output of [`dress`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub xi_a: Vec<C64>,
    pub xi_b: Vec<C64>,
    pub xi_c: Vec<C64>,
    pub xi_eff: Vec<C64>,
    /// Rotating-frame frequencies including the Stark shifts.
    pub omega_a_frame: f64,
    pub omega_b_frame: f64,
    pub omega_c_frame: f64,
}

/// Dressed frequencies and drive displacements of the dispersively coupled modes.
pub fn dress(bare: &BareParams) -> Result<DressedParams> {
    bare.validate()?;
    let (ra, rb) = (bare.ratio_a(), bare.ratio_b());
    let (da, db) = (bare.delta_a(), bare.delta_b());
    let omega_a = bare.omega_a0 + 2.0 * bare.g_a.powi(2) / da + bare.omega_c0 * ra * ra;
    let omega_b = bare.omega_b0 + 2.0 * bare.g_b.powi(2) / db + bare.omega_c0 * rb * rb;
    let omega_c = bare.omega_c0 - 2.0 * bare.g_a.powi(2) / da - 2.0 * bare.g_b.powi(2) / db
        + bare.omega_a0 * ra * ra
        + bare.omega_b0 * rb * rb;

    let n = bare.drives.len();
    let mut xi_a = Vec::with_capacity(n);
    let mut xi_b = Vec::with_capacity(n);
    let mut xi_c = Vec::with_capacity(n);
    let mut xi_eff = Vec::with_capacity(n);
    for (k, tone) in bare.drives.iter().enumerate() {
        let threshold = bare.resonance_factor * tone.epsilon.norm();
        for (mode, w) in [("a", omega_a), ("b", omega_b), ("c", omega_c)] {
            let detuning = (tone.omega - w).abs();
            if detuning <= threshold {
                return Err(Error::Resonance {
                    tone: k,
                    mode,
                    detuning,
                    threshold,
                });
            }
        }
        let xa = tone.epsilon * (ra / (tone.omega - omega_a));
        let xb = tone.epsilon * (rb / (tone.omega - omega_b));
        let xc = tone.epsilon / (tone.omega - omega_c);
        xi_eff.push(xa * ra + xb * rb + xc);
        xi_a.push(xa);
        xi_b.push(xb);
        xi_c.push(xc);
    }
    let stark: f64 = 1.0 + 2.0 * xi_c.iter().map(|x| x.norm_sqr()).sum::<f64>();
    let omega_a_frame = omega_a + 12.0 * bare.g4 * ra * ra * stark;
    let omega_b_frame = omega_b + 12.0 * bare.g4 * rb * rb * stark;
    let omega_c_frame = omega_c + 12.0 * bare.g4 * (ra * ra + rb * rb + stark);
    Ok(DressedParams {
        omega_a,
        omega_b,
        omega_c,
        xi_a,
        xi_b,
        xi_c,
        xi_eff,
        omega_a_frame,
        omega_b_frame,
        omega_c_frame,
    })
}

/// Convention for the phase of the two-photon drive once κ₂ is switched on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrivePhase {
    /// φ = arctan(κ₂/2K): the steady cat amplitude is exactly real.
    #[default]
    SelfConsistent,
    /// φ = arctan(κ₂/4K).
    Literal4K,
}

/// Coefficients of the effective Hamiltonian and master equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub kerr: f64,
    pub epsilon: C64,
    /// Drive used in the diagonalization Hamiltonian, ε·K/(K + iκ₂/2).
    pub epsilon_diag: C64,
    pub alpha: C64,
    pub zeta1: C64,
    pub zeta2: C64,
    pub chi_a: f64,
    pub chi_b: f64,
    pub chi: f64,
    /// Mean photon numbers subtracted in the compensated cross-Kerr term.
    pub n_comp_a: f64,
    pub n_comp_b: f64,
    pub kappa: f64,
    pub kappa2: f64,
    pub n_thermal: f64,
    pub xi_eff: Vec<C64>,
}

impl EffectiveParams {
    /// Total compensation photon number N.
    pub fn n_comp(&self) -> f64 {
        self.n_comp_a + self.n_comp_b
    }

    pub fn alpha_abs(&self) -> f64 {
        self.alpha.norm()
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha.norm_sqr()
    }

    /// Rescale every rate so that K = 1.
    pub fn in_kerr_units(&self) -> Self {
        let k = self.kerr;
        Self {
            kerr: 1.0,
            epsilon: self.epsilon / k,
            epsilon_diag: self.epsilon_diag / k,
            alpha: self.alpha,
            zeta1: self.zeta1 / k,
            zeta2: self.zeta2 / k,
            chi_a: self.chi_a / k,
            chi_b: self.chi_b / k,
            chi: self.chi / k,
            n_comp_a: self.n_comp_a,
            n_comp_b: self.n_comp_b,
            kappa: self.kappa / k,
            kappa2: self.kappa2 / k,
            n_thermal: self.n_thermal,
            xi_eff: self.xi_eff.clone(),
        }
    }

    /// Frame shifts (a, b, c) absorbed by the mean-field compensation.
    pub fn compensation_shifts(&self) -> (f64, f64, f64) {
        let a2 = self.alpha2();
        (
            self.chi_a * a2,
            self.chi_b * a2,
            self.chi_a * self.n_comp_a + self.chi_b * self.n_comp_b,
        )
    }

    pub fn validate_rates(&self) -> Result<()> {
        for (channel, rate) in [
            ("kappa", self.kappa),
            ("kappa2", self.kappa2),
            ("n_thermal", self.n_thermal),
        ] {
            if !(rate >= 0.0) {
                return Err(Error::NegativeRate { channel, rate });
            }
        }
        Ok(())
    }
}

fn tone_index(bare: &BareParams, role: ToneRole, what: &str) -> Result<usize> {
    bare.drives
        .iter()
        .position(|d| d.role == role)
        .ok_or_else(|| Error::Config(format!("missing drive tone: {what}")))
}

/// Effective couplings of the three-wave and four-wave mixing processes.
pub fn derive_effective(bare: &BareParams, dressed: &DressedParams) -> Result<EffectiveParams> {
    let i1 = tone_index(bare, ToneRole::TwoPhoton, "two-photon drive at 2ω'_c")?;
    let i2 = tone_index(bare, ToneRole::ControlledSplitter, "controlled splitter drive at ω'_c + Δ")?;
    let i3 = tone_index(bare, ToneRole::Splitter, "splitter drive at Δ")?;
    let kerr = -6.0 * bare.g4;
    if !(kerr > 0.0) {
        return Err(Error::Config(format!("g4 must be negative so that K > 0 (got g4 = {})", bare.g4)));
    }
    let (ra, rb) = (bare.ratio_a(), bare.ratio_b());
    let epsilon = dressed.xi_eff[i1] * (3.0 * bare.g3);
    let zeta1 = dressed.xi_eff[i2] * (4.0 * kerr * ra * rb);
    let zeta2 = dressed.xi_eff[i3] * (6.0 * bare.g3 * ra * rb);
    let chi_a = 4.0 * kerr * ra * ra;
    let chi_b = 4.0 * kerr * rb * rb;
    Ok(EffectiveParams {
        kerr,
        epsilon,
        epsilon_diag: epsilon,
        alpha: (epsilon / kerr).sqrt(),
        zeta1,
        zeta2,
        chi_a,
        chi_b,
        chi: 0.5 * (chi_a + chi_b),
        n_comp_a: 0.0,
        n_comp_b: 0.0,
        kappa: 0.0,
        kappa2: 0.0,
        n_thermal: 0.0,
        xi_eff: dressed.xi_eff.clone(),
    })
}

/// Mean-field cross-Kerr compensation around cavity populations `n_a`, `n_b`.
///
/// With `symmetric` the two cross-Kerr rates must agree and are merged into one χ.
pub fn compensate_cross_kerr(eff: &EffectiveParams, n_a: f64, n_b: f64, symmetric: bool) -> Result<EffectiveParams> {
    let scale = eff.chi_a.abs().max(eff.chi_b.abs()).max(f64::MIN_POSITIVE);
    if symmetric && (eff.chi_a - eff.chi_b).abs() > 1e-12 * scale {
        return Err(Error::Asymmetry {
            chi_a: eff.chi_a,
            chi_b: eff.chi_b,
        });
    }
    let mut out = eff.clone();
    out.n_comp_a = n_a;
    out.n_comp_b = n_b;
    if symmetric {
        out.chi = eff.chi_a;
        out.chi_b = eff.chi_a;
    }
    Ok(out)
}

/// Re-tune ε so that the driven-dissipative cat has real amplitude `alpha`.
pub fn adjust_two_photon_drive(eff: &EffectiveParams, alpha: f64, phase: DrivePhase) -> Result<EffectiveParams> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::OutOfRange(format!("target cat amplitude must be real and non-negative, got {alpha}")));
    }
    let k = eff.kerr;
    let phi = match phase {
        DrivePhase::SelfConsistent => (eff.kappa2 / (2.0 * k)).atan(),
        DrivePhase::Literal4K => (eff.kappa2 / (4.0 * k)).atan(),
    };
    let magnitude = alpha * alpha * (k * k + 0.25 * eff.kappa2 * eff.kappa2).sqrt();
    let epsilon = C64::from_polar(magnitude, phi);
    let epsilon_diag = epsilon * k / C64::new(k, 0.5 * eff.kappa2);
    let mut out = eff.clone();
    out.epsilon = epsilon;
    out.epsilon_diag = epsilon_diag;
    out.alpha = C64::new(alpha, 0.0);
    Ok(out)
}

/// Target rotation of the full gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateTarget {
    FullSwap,
    FiftyFifty,
    /// Total splitter angle θ, where θ = π is a full swap.
    Angle(f64),
}

impl GateTarget {
    pub fn angle(&self) -> f64 {
        match *self {
            GateTarget::FullSwap => PI,
            GateTarget::FiftyFifty => 0.5 * PI,
            GateTarget::Angle(t) => t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateTiming {
    pub t1: f64,
    pub t2: f64,
}

impl GateTiming {
    pub fn total(&self) -> f64 {
        self.t1 + self.t2
    }
}

/// Mean-field splitting rate of the conditional stage.
pub fn conditional_rate(eff: &EffectiveParams, form: CpbsForm) -> f64 {
    let base = eff.zeta1.norm() * eff.alpha_abs();
    match form {
        CpbsForm::Asymmetric => base,
        CpbsForm::Symmetric => 2.0 * base,
    }
}

fn check_couplings(eff: &EffectiveParams, form: CpbsForm) -> Result<f64> {
    let r1 = conditional_rate(eff, form);
    if !(r1 > 0.0) || !(eff.zeta2.norm() > 0.0) {
        return Err(Error::OutOfRange("gate timing needs nonzero ζ₁α and ζ₂".into()));
    }
    Ok(r1)
}

/// Sequential stage durations with the asymmetric conditional coupling.
pub fn gate_timing(eff: &EffectiveParams, target: GateTarget) -> Result<GateTiming> {
    gate_timing_for(eff, CpbsForm::Asymmetric, target)
}

/// Sequential stage durations: each stage contributes half the total angle.
pub fn gate_timing_for(eff: &EffectiveParams, form: CpbsForm, target: GateTarget) -> Result<GateTiming> {
    let r1 = check_couplings(eff, form)?;
    let theta = target.angle();
    let t1 = theta / (4.0 * r1);
    let t2 = r1 * t1 / eff.zeta2.norm();
    Ok(GateTiming { t1, t2 })
}

/// Duration of the single-segment scheme where both couplings act together.
pub fn simultaneous_duration(eff: &EffectiveParams, form: CpbsForm, target: GateTarget) -> Result<f64> {
    let r1 = check_couplings(eff, form)?;
    Ok(target.angle() / (2.0 * (r1 + eff.zeta2.norm())))
}

/// Linear drive amplitude on ĉ† produced by the three-tone mixing products,
/// given g₃ (units of K) and the two dressing ratios g/Δ.
pub fn linear_drive_amplitude(eff: &EffectiveParams, g3: f64, ratio_a: f64, ratio_b: f64) -> C64 {
    let r = ratio_a * ratio_b;
    let k = eff.kerr;
    let xi1 = eff.epsilon / (3.0 * g3);
    let xi2 = eff.zeta1 / (4.0 * k * r);
    let xi3 = eff.zeta2 / (6.0 * g3 * r);
    let on_c = xi2.conj() * xi3 * (6.0 * g3) - xi1.conj() * xi2 * xi3.conj() * (4.0 * k);
    on_c.conj()
}

/// Second coupling given as a multiple of ζ₁α or as a fixed value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitterCoupling {
    TimesZeta1Alpha(f64),
    Fixed(C64),
}

/// Effective-level model in units of K, before drive adjustment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub alpha2: f64,
    pub chi: f64,
    pub zeta1: C64,
    pub zeta2: SplitterCoupling,
    pub n_comp: f64,
    pub kappa: f64,
    pub kappa2: f64,
    pub n_thermal: f64,
    pub drive_phase: DrivePhase,
}

impl ModelParams {
    pub fn resolve(&self) -> Result<EffectiveParams> {
        if !(self.alpha2 >= 0.0) || !self.alpha2.is_finite() {
            return Err(Error::OutOfRange(format!("alpha2 must be non-negative, got {}", self.alpha2)));
        }
        let alpha = self.alpha2.sqrt();
        let zeta2 = match self.zeta2 {
            SplitterCoupling::TimesZeta1Alpha(f) => self.zeta1 * (f * alpha),
            SplitterCoupling::Fixed(z) => z,
        };
        let base = EffectiveParams {
            kerr: 1.0,
            epsilon: C64::new(self.alpha2, 0.0),
            epsilon_diag: C64::new(self.alpha2, 0.0),
            alpha: C64::new(alpha, 0.0),
            zeta1: self.zeta1,
            zeta2,
            chi_a: self.chi,
            chi_b: self.chi,
            chi: self.chi,
            n_comp_a: 0.0,
            n_comp_b: 0.0,
            kappa: self.kappa,
            kappa2: self.kappa2,
            n_thermal: self.n_thermal,
            xi_eff: Vec::new(),
        };
        base.validate_rates()?;
        let comp = compensate_cross_kerr(&base, 0.5 * self.n_comp, 0.5 * self.n_comp, true)?;
        adjust_two_photon_drive(&comp, alpha, self.drive_phase)
    }
}

/// Named parameter sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "fig3")]
    Fig3,
    #[serde(rename = "fig5-symmetric")]
    Fig5Symmetric,
    #[serde(rename = "fig6-simultaneous")]
    Fig6Simultaneous,
}

/// Linear term of the simultaneous preset, in units of Kα.
pub const SIMULTANEOUS_LINEAR_TERM: f64 = -0.037;

/// g₃/K used when the linear term is derived from mixing products.
pub const DEFAULT_G3: f64 = 3.0;

/// Kerr/(2π) in Hz for physical-unit conversion.
pub const DEFAULT_KERR_HZ: f64 = 6.7e6;

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig3, Preset::Fig5Symmetric, Preset::Fig6Simultaneous];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig3 => "fig3",
            Preset::Fig5Symmetric => "fig5-symmetric",
            Preset::Fig6Simultaneous => "fig6-simultaneous",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown preset '{name}' (known: fig3, fig5-symmetric, fig6-simultaneous)")))
    }

    pub fn model(&self) -> ModelParams {
        let minus_i = C64::new(0.0, -1.0);
        let (zeta1, factor) = match self {
            Preset::Fig3 => (0.018, 1.0),
            Preset::Fig5Symmetric => (0.009, 2.0),
            Preset::Fig6Simultaneous => (0.009, 1.0),
        };
        ModelParams {
            alpha2: 3.0,
            chi: 0.09,
            zeta1: minus_i * zeta1,
            zeta2: SplitterCoupling::TimesZeta1Alpha(factor),
            n_comp: 1.0,
            kappa: 2.0e-4,
            kappa2: 8.0e-2,
            n_thermal: 0.06,
            drive_phase: DrivePhase::SelfConsistent,
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Preset::Fig6Simultaneous => Scheme::Simultaneous,
            _ => Scheme::Sequential,
        }
    }

    pub fn cpbs_form(&self) -> CpbsForm {
        match self {
            Preset::Fig5Symmetric => CpbsForm::Symmetric,
            _ => CpbsForm::Asymmetric,
        }
    }

    /// Linear ĉ† amplitude in units of Kα (zero for schemes without it).
    pub fn linear_term(&self) -> f64 {
        match self {
            Preset::Fig6Simultaneous => SIMULTANEOUS_LINEAR_TERM,
            _ => 0.0,
        }
    }
}

/// Conversion between Kerr units and SI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Units {
    /// K/(2π) in Hz.
    pub kerr_hz: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self { kerr_hz: DEFAULT_KERR_HZ }
    }
}

impl Units {
    pub fn kerr_angular(&self) -> f64 {
        2.0 * PI * self.kerr_hz
    }

    pub fn seconds(&self, t_over_k: f64) -> f64 {
        t_over_k / self.kerr_angular()
    }

    /// Rate f = ω/2π in Hz expressed as a ratio to K.
    pub fn hz_to_ratio(&self, hz: f64) -> f64 {
        hz / self.kerr_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3() -> EffectiveParams {
        Preset::Fig3.model().resolve().unwrap()
    }

    fn simple_bare(ga: f64, gb: f64, eps: f64) -> BareParams {
        BareParams {
            omega_a0: 2.0 * PI * 5.0e3,
            omega_b0: 2.0 * PI * 5.5e3,
            omega_c0: 2.0 * PI * 7.0e3,
            g_a: ga,
            g_b: gb,
            g3: 2.0 * PI * 20.0,
            g4: -2.0 * PI * 1.1167,
            drives: vec![
                DriveTone {
                    role: ToneRole::TwoPhoton,
                    omega: 2.0 * PI * 14.0e3,
                    epsilon: C64::new(eps, 0.0),
                },
                DriveTone {
                    role: ToneRole::ControlledSplitter,
                    omega: 2.0 * PI * 7.5e3,
                    epsilon: C64::new(0.0, eps),
                },
                DriveTone {
                    role: ToneRole::Splitter,
                    omega: 2.0 * PI * 0.5e3,
                    epsilon: C64::new(eps, 0.0),
                },
            ],
            resonance_factor: 10.0,
        }
    }

    #[test]
    fn decoupled_limit_has_no_cavity_displacement() {
        let bare = simple_bare(0.0, 0.0, 2.0 * PI * 50.0);
        let d = dress(&bare).unwrap();
        for k in 0..3 {
            assert_eq!(d.xi_a[k], C64::new(0.0, 0.0));
            assert_eq!(d.xi_b[k], C64::new(0.0, 0.0));
            assert_eq!(d.xi_eff[k], d.xi_c[k]);
        }
        assert_eq!(d.omega_a, bare.omega_a0);
        assert_eq!(d.omega_a_frame, d.omega_a);
        assert_eq!(d.omega_b_frame, d.omega_b);
    }

    #[test]
    fn undriven_has_no_stark_term() {
        let bare = simple_bare(2.0 * PI * 100.0, 2.0 * PI * 80.0, 0.0);
        let d = dress(&bare).unwrap();
        assert!(d.xi_eff.iter().all(|x| x.norm() == 0.0));
        let ra = bare.ratio_a();
        assert!((d.omega_a_frame - (d.omega_a + 12.0 * bare.g4 * ra * ra)).abs() < 1e-9);
    }

    #[test]
    fn dressing_matches_independent_evaluation() {
        let bare = simple_bare(2.0 * PI * 150.0, 2.0 * PI * 225.0, 2.0 * PI * 10.0);
        let d = dress(&bare).unwrap();
        // independent re-evaluation, written out longhand
        let (wa0, wb0, wc0) = (bare.omega_a0, bare.omega_b0, bare.omega_c0);
        let (ga, gb) = (bare.g_a, bare.g_b);
        let (da, db) = (wa0 - wc0, wb0 - wc0);
        let wa = wa0 + 2.0 * ga * ga / da + wc0 * ga * ga / (da * da);
        let wc = wc0 - 2.0 * ga * ga / da - 2.0 * gb * gb / db + wa0 * ga * ga / (da * da) + wb0 * gb * gb / (db * db);
        assert!((d.omega_a - wa).abs() < 1e-9 * wa.abs());
        assert!((d.omega_c - wc).abs() < 1e-9 * wc.abs());
        let eps = bare.drives[1].epsilon;
        let w = bare.drives[1].omega;
        let wb = wb0 + 2.0 * gb * gb / db + wc0 * gb * gb / (db * db);
        let xa = eps * (ga / da) / (w - wa);
        let xb = eps * (gb / db) / (w - wb);
        let xc = eps / (w - wc);
        let eff = xa * (ga / da) + xb * (gb / db) + xc;
        assert!((d.xi_eff[1] - eff).norm() < 1e-12 * eff.norm());
        let s: f64 = 1.0 + 2.0 * d.xi_c.iter().map(|x| x.norm_sqr()).sum::<f64>();
        let wcp = wc + 12.0 * bare.g4 * ((ga / da).powi(2) + (gb / db).powi(2) + s);
        assert!((d.omega_c_frame - wcp).abs() < 1e-9 * wcp.abs());
    }

    #[test]
    fn near_resonant_tone_rejected() {
        let mut bare = simple_bare(2.0 * PI * 150.0, 2.0 * PI * 150.0, 2.0 * PI * 10.0);
        let d = dress(&bare).unwrap();
        bare.drives[2].omega = d.omega_a + 1.0;
        assert!(matches!(dress(&bare), Err(Error::Resonance { tone: 2, mode: "a", .. })));
    }

    #[test]
    fn kerr_from_quartic_nonlinearity() {
        let bare = simple_bare(2.0 * PI * 150.0, 2.0 * PI * 225.0, 2.0 * PI * 10.0);
        let d = dress(&bare).unwrap();
        let eff = derive_effective(&bare, &d).unwrap();
        assert!((eff.kerr / (2.0 * PI) - 6.7).abs() < 1e-3);
    }

    #[test]
    fn cross_kerr_from_dressing_ratio() {
        // g/Δ = 0.15 on both cavities
        let mut bare = simple_bare(0.0, 0.0, 2.0 * PI * 10.0);
        bare.g_a = 0.15 * bare.delta_a();
        bare.g_b = 0.15 * bare.delta_b();
        let d = dress(&bare).unwrap();
        let eff = derive_effective(&bare, &d).unwrap();
        assert!((eff.chi_a / eff.kerr - 0.09).abs() < 1e-12);
        let chi_khz = eff.chi_a / (2.0 * PI) * 1e3;
        assert!((chi_khz - 603.0).abs() < 1.0, "{chi_khz}");
        assert!((chi_khz - 600.0).abs() / 600.0 < 0.01);
    }

    #[test]
    fn missing_tone_is_named() {
        let mut bare = simple_bare(2.0 * PI * 150.0, 2.0 * PI * 225.0, 2.0 * PI * 10.0);
        bare.drives.remove(2);
        let d = dress(&bare).unwrap();
        match derive_effective(&bare, &d) {
            Err(Error::Config(msg)) => assert!(msg.contains("splitter drive at Δ"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn derived_alpha_tracks_epsilon() {
        let bare = simple_bare(2.0 * PI * 150.0, 2.0 * PI * 225.0, 2.0 * PI * 10.0);
        let d = dress(&bare).unwrap();
        let eff = derive_effective(&bare, &d).unwrap();
        assert!((eff.alpha2() - (eff.epsilon / eff.kerr).norm()).abs() < 1e-12);
        let k1 = eff.in_kerr_units();
        assert_eq!(k1.kerr, 1.0);
        assert!((k1.chi_a - eff.chi_a / eff.kerr).abs() < 1e-15);
    }

    #[test]
    fn rates_scale_with_frequency_units() {
        let bare = simple_bare(2.0 * PI * 150.0, 2.0 * PI * 225.0, 2.0 * PI * 10.0);
        let mut scaled = bare.clone();
        let s = 3.7;
        for w in [
            &mut scaled.omega_a0,
            &mut scaled.omega_b0,
            &mut scaled.omega_c0,
            &mut scaled.g_a,
            &mut scaled.g_b,
            &mut scaled.g3,
            &mut scaled.g4,
        ] {
            *w *= s;
        }
        for t in &mut scaled.drives {
            t.omega *= s;
            t.epsilon *= s;
        }
        let e1 = derive_effective(&bare, &dress(&bare).unwrap()).unwrap().in_kerr_units();
        let e2 = derive_effective(&scaled, &dress(&scaled).unwrap()).unwrap().in_kerr_units();
        assert!((e1.zeta1 - e2.zeta1).norm() < 1e-12);
        assert!((e1.zeta2 - e2.zeta2).norm() < 1e-12);
        assert!((e1.epsilon - e2.epsilon).norm() < 1e-12);
        assert!((e1.chi - e2.chi).abs() < 1e-12);
    }

    #[test]
    fn compensation_requires_equal_chi_when_symmetric() {
        let mut eff = fig3();
        eff.chi_b = 0.1;
        assert!(matches!(compensate_cross_kerr(&eff, 0.5, 0.5, true), Err(Error::Asymmetry { .. })));
        let out = compensate_cross_kerr(&eff, 0.5, 0.5, false).unwrap();
        assert_eq!(out.chi_b, 0.1);
        assert_eq!(out.n_comp(), 1.0);
    }

    #[test]
    fn compensation_without_population_is_bare_cross_kerr() {
        let mut eff = fig3();
        eff.alpha = C64::new(0.0, 0.0);
        let out = compensate_cross_kerr(&eff, 0.0, 0.0, true).unwrap();
        assert_eq!(out.compensation_shifts(), (0.0, 0.0, 0.0));
    }

    #[test]
    fn drive_adjustment_without_two_photon_loss() {
        let mut eff = fig3();
        eff.kappa2 = 0.0;
        let out = adjust_two_photon_drive(&eff, 3f64.sqrt(), DrivePhase::SelfConsistent).unwrap();
        assert!((out.epsilon - C64::new(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn drive_adjustment_fig3() {
        let eff = fig3();
        assert!((eff.epsilon.norm() - 3.0 * (1.0f64 + 0.0016).sqrt()).abs() < 1e-12);
        assert!((eff.epsilon.norm() - 3.0024).abs() < 1e-4);
        let recovered = (eff.epsilon / C64::new(1.0, 0.04)).norm();
        assert!((recovered - 3.0).abs() < 1e-12);
        assert!((eff.epsilon_diag.norm() - 3.0).abs() < 1e-12);
        assert!(eff.epsilon_diag.im.abs() < 1e-14);
        let lit = adjust_two_photon_drive(&eff, 3f64.sqrt(), DrivePhase::Literal4K).unwrap();
        assert!((lit.epsilon.arg() - 0.02f64.atan()).abs() < 1e-14);
        assert!(adjust_two_photon_drive(&eff, -1.0, DrivePhase::SelfConsistent).is_err());
    }

    #[test]
    fn fig3_timing() {
        let eff = fig3();
        let t = gate_timing(&eff, GateTarget::FullSwap).unwrap();
        let expect = PI / (4.0 * 0.018 * 3f64.sqrt());
        assert!((t.t1 - expect).abs() < 1e-10);
        assert!((t.t2 - expect).abs() < 1e-10);
        let us = Units::default().seconds(t.total()) * 1e6;
        assert!((us - 1.2).abs() / 1.2 < 0.05, "{us}");
    }

    #[test]
    fn timing_angles() {
        let eff = fig3();
        let zero = gate_timing(&eff, GateTarget::Angle(0.0)).unwrap();
        assert_eq!((zero.t1, zero.t2), (0.0, 0.0));
        let half = gate_timing(&eff, GateTarget::FiftyFifty).unwrap();
        let full = gate_timing(&eff, GateTarget::FullSwap).unwrap();
        assert!((2.0 * half.t1 - full.t1).abs() < 1e-12);
        let mut dead = eff.clone();
        dead.zeta2 = C64::new(0.0, 0.0);
        assert!(gate_timing(&dead, GateTarget::FullSwap).is_err());
    }

    #[test]
    fn symmetric_and_simultaneous_spans_match_fig3() {
        let seq = gate_timing(&fig3(), GateTarget::FullSwap).unwrap().total();
        let sym_eff = Preset::Fig5Symmetric.model().resolve().unwrap();
        let sym = gate_timing_for(&sym_eff, CpbsForm::Symmetric, GateTarget::FullSwap).unwrap();
        assert!((sym.t1 - sym.t2).abs() < 1e-10);
        assert!((sym.total() - seq).abs() < 1e-9);
        let sim_eff = Preset::Fig6Simultaneous.model().resolve().unwrap();
        let sim = simultaneous_duration(&sim_eff, CpbsForm::Asymmetric, GateTarget::FullSwap).unwrap();
        assert!((sim - seq).abs() < 1e-9);
    }

    #[test]
    fn linear_term_from_mixing_products() {
        let eff = Preset::Fig6Simultaneous.model().resolve().unwrap();
        let amp = linear_drive_amplitude(&eff, DEFAULT_G3, 0.15, 0.15);
        let per_alpha = amp.norm() / eff.alpha_abs();
        assert!((per_alpha - SIMULTANEOUS_LINEAR_TERM.abs()).abs() < 1e-3, "{per_alpha}");
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()).unwrap(), p);
        }
        assert!(Preset::from_name("fig9").is_err());
    }

    #[test]
    fn negative_rate_rejected() {
        let mut m = Preset::Fig3.model();
        m.kappa = -1.0;
        assert!(matches!(m.resolve(), Err(Error::NegativeRate { channel: "kappa", .. })));
    }
}
