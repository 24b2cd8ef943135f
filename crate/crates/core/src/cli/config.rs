//! Run configuration: TOML with one table per pipeline stage. Every key is
//! optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emitter::EmitterParams;
use crate::error::{Error, Result};
use crate::hom::{HomConfig, Window, DEFAULT_QUADRATURE_ORDER};
use crate::reference as r;
use crate::sequence::{ContrastOptions, PulseMode};
use crate::spectral::{EnsembleSettings, DEFAULT_HERMITE_NODES, DEFAULT_MC_DRAWS};
use crate::units::mhz_to_rad_per_ns;

/// Evenly spaced grid including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub const fn new(start: f64, stop: f64, points: usize) -> Self {
        Self { start, stop, points }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Config(format!("invalid grid {self:?}")));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterSection {
    pub t1_ns: f64,
    /// Rates are given as Γ/2π in MHz.
    pub gamma_pd_intrinsic_mhz: f64,
    pub gamma_pd_laser_mhz: f64,
    pub t2_star_ns: f64,
    pub spectral_diffusion: bool,
}

impl Default for EmitterSection {
    fn default() -> Self {
        Self {
            t1_ns: r::T1,
            gamma_pd_intrinsic_mhz: r::RAMSEY_GAMMA_PD_INTRINSIC_MHZ,
            gamma_pd_laser_mhz: r::RAMSEY_GAMMA_PD_LASER_MHZ,
            t2_star_ns: r::T2_STAR,
            spectral_diffusion: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleMethod {
    #[default]
    GaussHermite,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub method: EnsembleMethod,
    pub nodes: usize,
    pub draws: usize,
    pub seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            method: EnsembleMethod::GaussHermite,
            nodes: DEFAULT_HERMITE_NODES,
            draws: DEFAULT_MC_DRAWS,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RabiSection {
    pub s: Vec<f64>,
    pub pulse_ns: f64,
    pub bins: usize,
    /// Saturation parameter of the detuning map.
    pub map_s: f64,
    pub detuning_mhz: Grid,
}

impl Default for RabiSection {
    fn default() -> Self {
        Self {
            s: vec![r::S_MAX],
            pulse_ns: 4.0,
            bins: 400,
            map_s: r::S_MAP,
            detuning_mhz: Grid::new(-400.0, 400.0, 33),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Ideal,
    #[default]
    Physical,
}

impl From<ModeName> for PulseMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Ideal => PulseMode::Ideal,
            ModeName::Physical => PulseMode::Physical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastSection {
    /// Saturation parameter of the π/2 and π pulses.
    pub s: f64,
    pub tau_ns: Grid,
    pub mode: ModeName,
    /// Overrides of the emitter rates for this sequence (Γ/2π, MHz).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_pd_intrinsic_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_pd_laser_mhz: Option<f64>,
}

impl Default for ContrastSection {
    fn default() -> Self {
        Self {
            s: r::S_MAX,
            tau_ns: Grid::new(0.0, 8.0, 81),
            mode: ModeName::Physical,
            gamma_pd_intrinsic_mhz: None,
            gamma_pd_laser_mhz: None,
        }
    }
}

fn default_hahn() -> ContrastSection {
    ContrastSection {
        gamma_pd_intrinsic_mhz: Some(r::HAHN_GAMMA_PD_INTRINSIC_MHZ),
        gamma_pd_laser_mhz: Some(r::HAHN_GAMMA_PD_LASER_MHZ),
        ..ContrastSection::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PleSection {
    pub s: f64,
    pub inhomogeneous_fwhm_mhz: f64,
    pub detuning_mhz: Grid,
}

impl Default for PleSection {
    fn default() -> Self {
        Self {
            s: 1.0,
            inhomogeneous_fwhm_mhz: r::INHOMOGENEOUS_FWHM_MHZ,
            detuning_mhz: Grid::new(-300.0, 300.0, 601),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomSection {
    pub t1_ns: f64,
    pub gamma_pd_mhz: f64,
    pub theta: Grid,
    /// Collection window for the θ sweep; omitted means unbounded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_window_ns: Option<f64>,
    pub window_ns: Grid,
    pub quadrature_order: usize,
    /// Monte-Carlo spot checks of the window sweep; 0 disables them.
    pub oracle_trajectories: usize,
}

impl Default for HomSection {
    fn default() -> Self {
        Self {
            t1_ns: r::T1,
            gamma_pd_mhz: r::HAHN_GAMMA_PD_INTRINSIC_MHZ,
            theta: Grid::new(1.0, 5.0, 41),
            theta_window_ns: None,
            window_ns: Grid::new(1.0, 60.0, 60),
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            oracle_trajectories: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectionsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sbr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2par: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2perp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_detected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branching: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantum_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub setup_efficiency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingName {
    /// Poisson for count traces, uniform for contrast curves and lineshapes.
    #[default]
    Auto,
    Poisson,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub weighting: WeightingName,
    pub multi_start: usize,
    pub t2_star_upper_ns: f64,
    /// Fit a counts-per-population scale in Rabi fits.
    pub rabi_free_scale: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_background: Option<f64>,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            weighting: WeightingName::Auto,
            multi_start: 1,
            t2_star_upper_ns: 1e3,
            rabi_free_scale: false,
            fixed_background: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub emitter: EmitterSection,
    pub ensemble: EnsembleSection,
    pub rabi: RabiSection,
    pub ramsey: ContrastSection,
    #[serde(default = "default_hahn")]
    pub hahn: ContrastSection,
    pub ple: PleSection,
    pub hom: HomSection,
    pub corrections: CorrectionsSection,
    pub fit: FitSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            emitter: EmitterSection::default(),
            ensemble: EnsembleSection::default(),
            rabi: RabiSection::default(),
            ramsey: ContrastSection::default(),
            hahn: default_hahn(),
            ple: PleSection::default(),
            hom: HomSection::default(),
            corrections: CorrectionsSection::default(),
            fit: FitSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    /// Check that every section maps onto valid model types.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| Error::Config(format!("{name}: {e}"));
        self.emitter().map_err(|e| field("emitter", e))?;
        self.ensemble_settings().map_err(|e| field("ensemble", e))?;
        for (name, sec) in [("ramsey", &self.ramsey), ("hahn", &self.hahn)] {
            self.contrast_emitter(sec).map_err(|e| field(name, e))?;
            sec.tau_ns.values().map_err(|e| field(&format!("{name}.tau_ns"), e))?;
        }
        self.rabi
            .detuning_mhz
            .values()
            .map_err(|e| field("rabi.detuning_mhz", e))?;
        if self.rabi.s.is_empty() {
            return Err(Error::Config(
                "rabi.s: at least one saturation parameter is needed".into(),
            ));
        }
        if !(self.rabi.pulse_ns > 0.0) || self.rabi.bins == 0 {
            return Err(Error::Config("rabi: pulse_ns must be > 0 and bins >= 1".into()));
        }
        self.ple
            .detuning_mhz
            .values()
            .map_err(|e| field("ple.detuning_mhz", e))?;
        self.hom_config(Window::Infinite).map_err(|e| field("hom", e))?;
        self.hom.theta.values().map_err(|e| field("hom.theta", e))?;
        self.hom.window_ns.values().map_err(|e| field("hom.window_ns", e))?;
        if self.fit.multi_start == 0 {
            return Err(Error::Config("fit.multi_start must be >= 1".into()));
        }
        Ok(())
    }

    pub fn emitter(&self) -> Result<EmitterParams> {
        let e = &self.emitter;
        EmitterParams::new(
            e.t1_ns,
            mhz_to_rad_per_ns(e.gamma_pd_intrinsic_mhz),
            mhz_to_rad_per_ns(e.gamma_pd_laser_mhz),
            e.spectral_diffusion.then_some(e.t2_star_ns),
        )
    }

    pub fn contrast_emitter(&self, section: &ContrastSection) -> Result<EmitterParams> {
        let base = self.emitter()?;
        base.with_dephasing(
            section
                .gamma_pd_intrinsic_mhz
                .map(mhz_to_rad_per_ns)
                .unwrap_or(base.gamma_pd_intrinsic()),
            section
                .gamma_pd_laser_mhz
                .map(mhz_to_rad_per_ns)
                .unwrap_or(base.gamma_pd_laser()),
        )
    }

    pub fn ensemble_settings(&self) -> Result<EnsembleSettings> {
        let e = &self.ensemble;
        match e.method {
            EnsembleMethod::GaussHermite => {
                if e.nodes == 0 || e.nodes > crate::quadrature::MAX_HERMITE_NODES {
                    return Err(Error::Config(format!(
                        "nodes must lie in 1..={}, got {}",
                        crate::quadrature::MAX_HERMITE_NODES,
                        e.nodes
                    )));
                }
                Ok(EnsembleSettings::GaussHermite { nodes: e.nodes })
            }
            EnsembleMethod::MonteCarlo => {
                if e.draws == 0 {
                    return Err(Error::Config("draws must be >= 1".into()));
                }
                Ok(EnsembleSettings::MonteCarlo {
                    draws: e.draws,
                    seed: e.seed,
                })
            }
        }
    }

    pub fn contrast_options(&self, section: &ContrastSection) -> Result<ContrastOptions> {
        Ok(ContrastOptions {
            mode: section.mode.into(),
            ensemble: self.ensemble_settings()?,
            shot_length: None,
        })
    }

    pub fn hom_config(&self, window: Window) -> Result<HomConfig> {
        let mut cfg = HomConfig::new(self.hom.t1_ns, mhz_to_rad_per_ns(self.hom.gamma_pd_mhz), window)?;
        cfg.quadrature_order = self.hom.quadrature_order;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let err = RunConfig::parse("[emitter]\nt1_ns = 7.0\nlifetime = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("lifetime") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn invalid_value_names_the_section() {
        let err = RunConfig::parse("[emitter]\nt1_ns = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("emitter"), "{err}");
    }

    #[test]
    fn serialisation_is_idempotent() {
        let text = "[emitter]\nt1_ns = 5.0\n[hahn]\ns = 100.0\nmode = \"ideal\"\n[hom]\ntheta_window_ns = 20.0\n";
        let once = RunConfig::parse(text).unwrap().to_toml();
        let twice = RunConfig::parse(&once).unwrap().to_toml();
        assert_eq!(once, twice);
    }

    #[test]
    fn hahn_defaults_carry_their_own_rates() {
        let cfg = RunConfig::default();
        let hahn = cfg.contrast_emitter(&cfg.hahn).unwrap();
        assert!((hahn.gamma_pd_intrinsic() - mhz_to_rad_per_ns(6.39)).abs() < 1e-15);
        let ramsey = cfg.contrast_emitter(&cfg.ramsey).unwrap();
        assert!((ramsey.gamma_pd_intrinsic() - mhz_to_rad_per_ns(6.99)).abs() < 1e-15);
    }

    #[test]
    fn grid_values() {
        assert_eq!(Grid::new(0.0, 1.0, 3).values().unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Grid::new(2.0, 9.0, 1).values().unwrap(), vec![2.0]);
        assert!(Grid::new(0.0, 1.0, 0).values().is_err());
    }
}
