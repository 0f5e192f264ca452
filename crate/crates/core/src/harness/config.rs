//! Experiment configuration: TOML ingestion, validation, and sweep-point
//! resolution into domain objects.
//!
//! Keys carry their unit in the name (`_m` meters, `_m2` square meters,
//! `_db`/`_dbm` decibels). All dB/dBm→linear conversions happen exactly once,
//! when a section is resolved.

use serde::{Deserialize, Deserializer, Serialize};
use std::path::Path;

use crate::channel::{ChannelModel, CorrelationKind, PathLossParams};
use crate::error::{Result, SimError};
use crate::geometry::{SimArchitecture, SurfaceLayout};
use crate::metrics::LinkBudget;
use crate::optimizer::FitHyperparams;

/// Top-level experiment description, one sweep axis at most.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    /// Monte-Carlo repetitions per sweep point.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ber: Option<BerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
}

fn default_trials() -> usize {
    100
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 0,
            trials: default_trials(),
            architecture: ArchitectureConfig::default(),
            channel: ChannelConfig::default(),
            budget: BudgetConfig::default(),
            optimizer: OptimizerConfig::default(),
            sweep: None,
            ber: None,
            baseline: None,
        }
    }
}

/// `[architecture]`: SIM geometry. Defaults mirror the reference setup:
/// 28 GHz carrier (λ = 10.7 mm), 7-layer SIMs of 100 atoms at λ/2 spacing,
/// 5 cm thick, 4 streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureConfig {
    pub streams: usize,
    pub tx_layers: usize,
    pub rx_layers: usize,
    pub tx_atoms: usize,
    pub rx_atoms: usize,
    pub tx_spacing_m: f64,
    pub rx_spacing_m: f64,
    pub tx_thickness_m: f64,
    pub rx_thickness_m: f64,
    pub wavelength_m: f64,
    /// Meta-atom area; defaults to the full lattice cell `spacing²`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_atom_area_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_atom_area_m2: Option<f64>,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        let wavelength = 0.0107;
        ArchitectureConfig {
            streams: 4,
            tx_layers: 7,
            rx_layers: 7,
            tx_atoms: 100,
            rx_atoms: 100,
            tx_spacing_m: wavelength / 2.0,
            rx_spacing_m: wavelength / 2.0,
            tx_thickness_m: 0.05,
            rx_thickness_m: 0.05,
            wavelength_m: wavelength,
            tx_atom_area_m2: None,
            rx_atom_area_m2: None,
        }
    }
}

impl ArchitectureConfig {
    pub fn build(&self) -> Result<SimArchitecture> {
        let tx = match self.tx_atom_area_m2 {
            Some(a) => SurfaceLayout::with_area(
                self.tx_layers,
                self.tx_atoms,
                self.tx_spacing_m,
                self.tx_thickness_m,
                a,
            ),
            None => SurfaceLayout::new(
                self.tx_layers,
                self.tx_atoms,
                self.tx_spacing_m,
                self.tx_thickness_m,
            ),
        }?;
        let rx = match self.rx_atom_area_m2 {
            Some(a) => SurfaceLayout::with_area(
                self.rx_layers,
                self.rx_atoms,
                self.rx_spacing_m,
                self.rx_thickness_m,
                a,
            ),
            None => SurfaceLayout::new(
                self.rx_layers,
                self.rx_atoms,
                self.rx_spacing_m,
                self.rx_thickness_m,
            ),
        }?;
        SimArchitecture::new(self.streams, tx, rx, self.wavelength_m)
    }
}

/// `[channel]`: correlation model, path loss, and shadowing switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub correlation: CorrelationChoice,
    pub reference_distance_m: f64,
    pub pathloss_exponent: f64,
    pub shadowing_std_db: f64,
    /// Draw a fresh shadowing term per realization; off by default so that
    /// fitting experiments see only small-scale fading.
    pub shadowing: bool,
    pub link_distance_m: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            correlation: CorrelationChoice::Sinc,
            reference_distance_m: 1.0,
            pathloss_exponent: 3.5,
            shadowing_std_db: 9.0,
            shadowing: false,
            link_distance_m: 250.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationChoice {
    Sinc,
    Identity,
}

impl From<CorrelationChoice> for CorrelationKind {
    fn from(c: CorrelationChoice) -> CorrelationKind {
        match c {
            CorrelationChoice::Sinc => CorrelationKind::Sinc,
            CorrelationChoice::Identity => CorrelationKind::Identity,
        }
    }
}

impl ChannelConfig {
    pub fn pathloss(&self) -> PathLossParams {
        PathLossParams {
            reference_distance: self.reference_distance_m,
            exponent: self.pathloss_exponent,
            shadowing_std_db: self.shadowing_std_db,
            link_distance: self.link_distance_m,
        }
    }

    pub fn build(&self, arch: &SimArchitecture) -> Result<ChannelModel> {
        ChannelModel::new(arch, self.pathloss(), self.correlation.into(), self.shadowing)
    }
}

/// `[budget]`: transmit power and noise power in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub transmit_power_dbm: f64,
    pub noise_power_dbm: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig { transmit_power_dbm: 20.0, noise_power_dbm: -110.0 }
    }
}

impl BudgetConfig {
    pub fn build(&self) -> Result<LinkBudget> {
        LinkBudget::from_dbm(self.transmit_power_dbm, self.noise_power_dbm)
    }
}

/// `[optimizer]`: gradient-descent hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub max_iterations: usize,
    pub starts: usize,
    /// Relative loss-change stopping threshold (scaled by `‖Λ_S‖_F²`).
    pub stop_delta: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let h = FitHyperparams::default();
        OptimizerConfig {
            learning_rate: h.initial_learning_rate,
            decay: h.decay,
            max_iterations: h.max_iters,
            starts: h.n_starts,
            stop_delta: h.stop_delta,
        }
    }
}

impl OptimizerConfig {
    pub fn build(&self) -> Result<FitHyperparams> {
        if !(self.learning_rate > 0.0) {
            return Err(SimError::config("optimizer.learning_rate must be positive"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(SimError::config("optimizer.decay must lie in (0, 1)"));
        }
        if self.max_iterations < 1 || self.starts < 1 {
            return Err(SimError::config("optimizer.max_iterations and starts must be >= 1"));
        }
        Ok(FitHyperparams {
            initial_learning_rate: self.learning_rate,
            decay: self.decay,
            max_iters: self.max_iterations,
            n_starts: self.starts,
            stop_delta: self.stop_delta,
        })
    }
}

/// `[sweep]`: the one swept variable and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    #[serde(deserialize_with = "de_f64_vec")]
    pub values: Vec<f64>,
}

/// Swept quantity. Integer-valued axes reject fractional values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepVariable {
    /// Layer count applied to both SIMs (L = K).
    Layers,
    /// Atoms per layer applied to both SIMs (M = N); must stay perfect squares.
    Atoms,
    /// Element spacing in meters applied to both SIMs.
    Spacing,
    /// Data-stream (antenna) count S.
    Streams,
    /// Link distance in meters.
    Distance,
    /// Transmit power in dBm.
    Power,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::Layers => "layers",
            SweepVariable::Atoms => "atoms",
            SweepVariable::Spacing => "spacing",
            SweepVariable::Streams => "streams",
            SweepVariable::Distance => "distance",
            SweepVariable::Power => "power",
        }
    }
}

/// `[ber]`: enables the BPSK error-rate metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BerConfig {
    pub bits_per_stream: usize,
}

impl Default for BerConfig {
    fn default() -> Self {
        BerConfig { bits_per_stream: 100_000 }
    }
}

/// `[baseline]`: conventional massive-MIMO reference array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
}

/// TOML integer literals are accepted wherever a float list is expected.
fn de_f64_vec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        Int(i64),
        Float(f64),
    }
    let raw = Vec::<Num>::deserialize(d)?;
    Ok(raw
        .into_iter()
        .map(|n| match n {
            Num::Int(i) => i as f64,
            Num::Float(f) => f,
        })
        .collect())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)
            .map_err(|e| SimError::config(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(SimError::config("trials must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(SimError::config("sweep.values must not be empty"));
            }
            for &v in &sweep.values {
                if !v.is_finite() {
                    return Err(SimError::config("sweep.values must be finite"));
                }
            }
        }
        Ok(())
    }

    /// The configured sweep, or a config error naming what is missing.
    pub fn sweep(&self) -> Result<&SweepConfig> {
        self.sweep
            .as_ref()
            .ok_or_else(|| SimError::config("this command needs a [sweep] section"))
    }

    /// Clone of this config with the swept variable pinned to `value`.
    pub fn at_sweep_point(&self, variable: SweepVariable, value: f64) -> Result<ExperimentConfig> {
        let mut point = self.clone();
        match variable {
            SweepVariable::Layers => {
                let v = positive_integer(value, "layers")?;
                point.architecture.tx_layers = v;
                point.architecture.rx_layers = v;
            }
            SweepVariable::Atoms => {
                let v = positive_integer(value, "atoms")?;
                point.architecture.tx_atoms = v;
                point.architecture.rx_atoms = v;
            }
            SweepVariable::Spacing => {
                point.architecture.tx_spacing_m = value;
                point.architecture.rx_spacing_m = value;
            }
            SweepVariable::Streams => {
                point.architecture.streams = positive_integer(value, "streams")?;
            }
            SweepVariable::Distance => {
                point.channel.link_distance_m = value;
            }
            SweepVariable::Power => {
                point.budget.transmit_power_dbm = value;
            }
        }
        Ok(point)
    }

    /// Resolves the (swept) configuration into validated domain objects.
    pub fn resolve(&self) -> Result<ResolvedPoint> {
        let arch = self
            .architecture
            .build()
            .map_err(|e| SimError::config(format!("invalid [architecture]: {e}")))?;
        let model = self
            .channel
            .build(&arch)
            .map_err(|e| SimError::config(format!("invalid [channel]: {e}")))?;
        let budget =
            self.budget.build().map_err(|e| SimError::config(format!("invalid [budget]: {e}")))?;
        let hyper = self.optimizer.build()?;
        Ok(ResolvedPoint { arch, model, budget, hyper })
    }
}

fn positive_integer(value: f64, what: &str) -> Result<usize> {
    if value.fract() != 0.0 || value < 1.0 || value > usize::MAX as f64 {
        return Err(SimError::config(format!(
            "sweep value {value} for '{what}' must be a positive integer"
        )));
    }
    Ok(value as usize)
}

/// Domain objects of one sweep point.
#[derive(Debug, Clone)]
pub struct ResolvedPoint {
    pub arch: SimArchitecture,
    pub model: ChannelModel,
    pub budget: LinkBudget,
    pub hyper: FitHyperparams,
}
