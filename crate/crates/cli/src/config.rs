//! Toolkit configuration: TOML for people, JSON for programs.
//!
//! Frequencies are given in Hz (cycles), rates in 1/s and fields in V/m. They
//! are converted to angular units when the physics objects are built.

use std::collections::BTreeSet;
use std::path::Path;

use rydion::units::hz_to_angular;
use rydion::{
    gradients_from_secular, perturbation_warnings, IonSpecies, LevelScheme, OffsetField,
    PhononOccupation, PolarizableState, SecularFrequencies, TrapConfig, Uncertain, Warning,
};
use serde::{Deserialize, Serialize};

use crate::failure::{CliError, EXIT_CONFIG};

/// Environment variable naming the config used when `--config` is absent.
pub const CONFIG_ENV: &str = "RYDION_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitConfig {
    pub trap: TrapBlock,
    #[serde(default)]
    pub states: Vec<StateBlock>,
    pub transition: Option<TransitionBlock>,
    pub spectrum: Option<SpectrumBlock>,
    pub scheme: Option<SchemeBlock>,
    pub rabi: Option<RabiBlock>,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapBlock {
    pub drive_freq_hz: f64,
    pub grad_rf: Option<f64>,
    pub grad_dc: Option<f64>,
    pub asymmetry: Option<f64>,
    /// `[f_x, f_y, f_z]`, alternative to the three gradient keys.
    pub secular_freqs_hz: Option<[f64; 3]>,
    #[serde(default)]
    pub species: SpeciesBlock,
}

/// `"sr88+"` or an explicit mass and charge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeciesBlock {
    Named(String),
    Explicit { mass_kg: f64, charge_c: f64 },
}

impl Default for SpeciesBlock {
    fn default() -> Self {
        SpeciesBlock::Named("sr88+".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBlock {
    pub label: String,
    /// Static polarizability, C m^2 / V.
    pub polarizability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionBlock {
    pub lower: String,
    pub upper: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    pub rabi_hz: f64,
    pub linewidth_hz: f64,
    #[serde(default)]
    pub background_rate: f64,
    pub exposure_s: f64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub occupation: [u32; 2],
    #[serde(default)]
    pub offset_field: [f64; 2],
    /// Scan half width around the line center.
    pub span_hz: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Offset fields (x, V/m) of the three panels emitted by `figure fig3`.
    #[serde(default = "default_fig3_fields")]
    pub fig3_fields: Vec<f64>,
}

fn default_trials() -> u32 {
    100
}

fn default_points() -> usize {
    201
}

fn default_fig3_fields() -> Vec<f64> {
    vec![10.0, 20.0, 30.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeBlock {
    pub rabi1_hz: f64,
    pub rabi2_hz: f64,
    pub intermediate_detuning_hz: f64,
    #[serde(default)]
    pub two_photon_detuning_hz: f64,
    /// 1/s
    #[serde(default)]
    pub decay_intermediate: f64,
    /// 1/s
    #[serde(default)]
    pub decay_rydberg: f64,
    #[serde(default)]
    pub uncertainty: SchemeUncertainty,
}

/// One-sigma spreads of the scheme parameters, same units as the values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeUncertainty {
    #[serde(default)]
    pub rabi1_hz: f64,
    #[serde(default)]
    pub rabi2_hz: f64,
    #[serde(default)]
    pub intermediate_detuning_hz: f64,
    #[serde(default)]
    pub two_photon_detuning_hz: f64,
    #[serde(default)]
    pub decay_intermediate: f64,
    #[serde(default)]
    pub decay_rydberg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiBlock {
    pub duration_s: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Mean phonon numbers of the two radial modes.
    pub nbar: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Per-phonon detuning changes `[x, y]`; computed from the trap and the
    /// transition states when absent.
    pub mode_shifts_hz: Option<[f64; 2]>,
    /// Occupation the lasers are locked to.
    #[serde(default)]
    pub reference: [u32; 2],
    /// Mean phonon numbers of the Doppler-cooled curve in `figure fig4`.
    #[serde(default = "default_doppler")]
    pub doppler_nbar: [f64; 2],
}

fn default_samples() -> usize {
    100
}

fn default_doppler() -> [f64; 2] {
    [10.0, 10.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(default = "yes")]
    pub micromotion_correction: bool,
    #[serde(default = "default_fc_tolerance")]
    pub fc_tolerance: f64,
    #[serde(default = "default_rtol")]
    pub integrator_rtol: f64,
    #[serde(default = "default_atol")]
    pub integrator_atol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

fn default_fc_tolerance() -> f64 {
    1e-10
}

fn default_rtol() -> f64 {
    1e-9
}

fn default_atol() -> f64 {
    1e-12
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            micromotion_correction: true,
            fc_tolerance: default_fc_tolerance(),
            integrator_rtol: default_rtol(),
            integrator_atol: default_atol(),
            seed: 0,
        }
    }
}

/// Schema problems and physics warnings found without running anything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn parse_config(text: &str, path: &Path) -> Result<ToolkitConfig, CliError> {
    let json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if json {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

pub fn load_config(path: &Path) -> Result<ToolkitConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, path)
}

/// Parses and validates, failing on the first schema violation.
pub fn load_valid_config(path: &Path) -> Result<ToolkitConfig, CliError> {
    let cfg = load_config(path)?;
    // an unstable trap is a physics failure, not a schema one
    if let Err(e) = cfg.trap_config() {
        if e.exit_code != EXIT_CONFIG {
            return Err(e);
        }
    }
    let report = cfg.validate();
    if let Some(v) = report.violations.first() {
        return Err(CliError::config(v.clone()));
    }
    Ok(cfg)
}

impl ToolkitConfig {
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let v = &mut report.violations;

        let t = &self.trap;
        let gradients = [t.grad_rf, t.grad_dc, t.asymmetry];
        let any_gradient = gradients.iter().any(Option::is_some);
        match (any_gradient, t.secular_freqs_hz.is_some()) {
            (true, true) => v.push(
                "trap: gradients (grad_rf, grad_dc, asymmetry) and secular_freqs_hz are mutually exclusive"
                    .into(),
            ),
            (false, false) => v.push("trap: give either the three gradients or secular_freqs_hz".into()),
            (true, false) if gradients.iter().any(Option::is_none) => {
                v.push("trap: grad_rf, grad_dc and asymmetry must all be given".into())
            }
            _ => {}
        }
        if let SpeciesBlock::Named(name) = &t.species {
            if species_by_name(name).is_none() {
                v.push(format!("trap.species: unknown species {name:?}"));
            }
        }
        if v.is_empty() {
            if let Err(e) = self.trap_config() {
                v.push(format!("trap: {e}"));
            }
        }

        let mut labels = BTreeSet::new();
        for s in &self.states {
            if !labels.insert(s.label.as_str()) {
                v.push(format!("states: duplicate label {:?}", s.label));
            }
            if !s.polarizability.is_finite() {
                v.push(format!("states.{}: polarizability must be finite", s.label));
            }
        }
        if let Some(tr) = &self.transition {
            for l in [&tr.lower, &tr.upper] {
                if !labels.contains(l.as_str()) {
                    v.push(format!("transition: state {l:?} is not in the states list"));
                }
            }
        }
        if let Some(s) = &self.spectrum {
            if !(s.linewidth_hz > 0.0) {
                v.push("spectrum.linewidth_hz must be positive".into());
            }
            if !(s.exposure_s > 0.0) {
                v.push("spectrum.exposure_s must be positive".into());
            }
            if !(s.span_hz > 0.0) {
                v.push("spectrum.span_hz must be positive".into());
            }
            if s.points < 2 {
                v.push("spectrum.points must be at least 2".into());
            }
            if !(s.background_rate >= 0.0) {
                v.push("spectrum.background_rate must be non-negative".into());
            }
        }
        if let Some(s) = &self.scheme {
            if let Err(e) = s.level_scheme() {
                v.push(format!("scheme: {e}"));
            }
        }
        if let Some(r) = &self.rabi {
            if !(r.duration_s > 0.0) {
                v.push("rabi.duration_s must be positive".into());
            }
            if r.points < 2 {
                v.push("rabi.points must be at least 2".into());
            }
            if r.nbar.iter().chain(&r.doppler_nbar).any(|n| !(*n >= 0.0)) {
                v.push("rabi: mean phonon numbers must be non-negative".into());
            }
        }
        let d = &self.defaults;
        if !(d.fc_tolerance > 0.0 && d.integrator_rtol > 0.0 && d.integrator_atol > 0.0) {
            v.push("defaults: tolerances must be positive".into());
        }

        if report.violations.is_empty() {
            if let Ok(trap) = self.trap_config() {
                for s in &self.states {
                    if let Ok(state) = PolarizableState::new(s.label.clone(), s.polarizability) {
                        if let Ok(w) =
                            perturbation_warnings(&trap, &state, d.micromotion_correction)
                        {
                            report.warnings.extend(w);
                        }
                    }
                }
            }
        }
        report
    }

    pub fn species(&self) -> Result<IonSpecies, CliError> {
        match &self.trap.species {
            SpeciesBlock::Named(name) => species_by_name(name)
                .ok_or_else(|| CliError::config(format!("unknown species {name:?}"))),
            SpeciesBlock::Explicit { mass_kg, charge_c } => {
                IonSpecies::new(*mass_kg, *charge_c).map_err(|e| CliError::config(e.to_string()))
            }
        }
    }

    pub fn trap_config(&self) -> Result<TrapConfig, CliError> {
        let t = &self.trap;
        let species = self.species()?;
        let drive = hz_to_angular(t.drive_freq_hz);
        match (t.secular_freqs_hz, t.grad_rf, t.grad_dc, t.asymmetry) {
            (Some([fx, fy, fz]), None, None, None) => {
                let w =
                    SecularFrequencies::from_hz(fx, fy, fz).map_err(CliError::from_config_input)?;
                Ok(gradients_from_secular(&w, drive, species)
                    .map_err(CliError::from_config_input)?)
            }
            (None, Some(a), Some(b), Some(eps)) => Ok(TrapConfig::new(drive, a, b, eps, species)?),
            _ => Err(CliError::config(
                "trap: give either the three gradients or secular_freqs_hz, not both",
            )),
        }
    }

    pub fn state(&self, label: &str) -> Result<PolarizableState, CliError> {
        let s = self
            .states
            .iter()
            .find(|s| s.label == label)
            .ok_or_else(|| {
                CliError::config(format!("state {label:?} is not in the states list"))
            })?;
        PolarizableState::new(s.label.clone(), s.polarizability)
            .map_err(CliError::from_config_input)
    }

    pub fn polarizable_states(&self) -> Result<Vec<PolarizableState>, CliError> {
        self.states.iter().map(|s| self.state(&s.label)).collect()
    }

    pub fn transition_states(&self) -> Result<(PolarizableState, PolarizableState), CliError> {
        let t = self
            .transition
            .as_ref()
            .ok_or_else(|| CliError::config("missing [transition] block"))?;
        Ok((self.state(&t.lower)?, self.state(&t.upper)?))
    }

    pub fn spectrum_block(&self) -> Result<&SpectrumBlock, CliError> {
        self.spectrum
            .as_ref()
            .ok_or_else(|| CliError::config("missing [spectrum] block"))
    }

    pub fn scheme_block(&self) -> Result<&SchemeBlock, CliError> {
        self.scheme
            .as_ref()
            .ok_or_else(|| CliError::config("missing [scheme] block"))
    }

    pub fn rabi_block(&self) -> Result<&RabiBlock, CliError> {
        self.rabi
            .as_ref()
            .ok_or_else(|| CliError::config("missing [rabi] block"))
    }
}

impl SpectrumBlock {
    pub fn occupation(&self) -> PhononOccupation {
        PhononOccupation::new(self.occupation[0], self.occupation[1])
    }

    pub fn offset(&self) -> Result<OffsetField, CliError> {
        OffsetField::new(self.offset_field[0], self.offset_field[1])
            .map_err(CliError::from_config_input)
    }
}

impl SchemeBlock {
    pub fn level_scheme(&self) -> Result<LevelScheme, CliError> {
        LevelScheme::new(
            hz_to_angular(self.rabi1_hz),
            hz_to_angular(self.rabi2_hz),
            hz_to_angular(self.intermediate_detuning_hz),
            hz_to_angular(self.two_photon_detuning_hz),
            self.decay_intermediate,
            self.decay_rydberg,
        )
        .map_err(CliError::from_config_input)
    }

    /// The scheme parameters with their spreads, in the units of [`LevelScheme`].
    pub fn uncertain(&self) -> [Uncertain; 6] {
        let u = &self.uncertainty;
        let pair = |v: f64, s: f64| Uncertain { value: v, sigma: s };
        [
            pair(hz_to_angular(self.rabi1_hz), hz_to_angular(u.rabi1_hz)),
            pair(hz_to_angular(self.rabi2_hz), hz_to_angular(u.rabi2_hz)),
            pair(
                hz_to_angular(self.intermediate_detuning_hz),
                hz_to_angular(u.intermediate_detuning_hz),
            ),
            pair(
                hz_to_angular(self.two_photon_detuning_hz),
                hz_to_angular(u.two_photon_detuning_hz),
            ),
            pair(self.decay_intermediate, u.decay_intermediate),
            pair(self.decay_rydberg, u.decay_rydberg),
        ]
    }
}

fn species_by_name(name: &str) -> Option<IonSpecies> {
    match name.to_ascii_lowercase().as_str() {
        "sr88+" | "88sr+" => Some(IonSpecies::sr88_plus()),
        _ => None,
    }
}
