//! Experiment configuration file (TOML) and the built-in presets.

use serde::{Deserialize, Serialize};

use mwstab::adversary::{AdversaryParams, IidConfig, ScenarioParams};
use mwstab::engine::{DEFAULT_PLATEAU_FACTOR, DEFAULT_SLOPE_THRESHOLD};
use mwstab::experiments::GridParams;
use mwstab::model::RateSet;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Desk-scale horizon; `--full` switches to `full_horizon`.
    pub horizon: u64,
    #[serde(default = "default_full_horizon")]
    pub full_horizon: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    pub network: NetworkConfig,
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub probe: ProbeSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundSettings>,
}

fn default_full_horizon() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    /// 0 runs exact Max-Weight; otherwise the degraded scheduler.
    #[serde(default)]
    pub eps_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkConfig {
    /// n1 x n2 grid with generated pairs, rate vectors and arrival vectors.
    Grid(GridParams),
    Explicit {
        nodes: usize,
        edges: Vec<(usize, usize)>,
        destinations: Vec<usize>,
        #[serde(default = "one")]
        beta: f64,
        r_min: f64,
        r_max: f64,
    },
    /// N parallel edges for the lower-bound construction.
    Exponential { n: usize, eps: f64 },
    /// Network, traffic and witness all drawn by the scenario generator.
    Scenario,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdversaryConfig {
    /// Fixed edge-rate vector (1-based), arrivals cycling with the phases.
    Exp1 {
        rate_vector: usize,
        /// 3x3 load constants; probed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<Vec<f64>>>,
    },
    /// Edge-rate vectors cycling, arrival vectors drawn per phase.
    Exp2 {
        #[serde(default)]
        arrival_seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<Vec<f64>>>,
    },
    /// One rate set and constant per-slot injections.
    Fixed {
        rates: RateSet,
        pairs: Vec<(usize, usize)>,
        sizes: Vec<f64>,
    },
    Iid(IidConfig),
    Exponential,
    RandomWitness(ScenarioParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    pub tol: f64,
    pub slope_threshold: f64,
    pub plateau_factor: f64,
    pub initial_hi: f64,
    pub max_hi: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            tol: 0.001,
            slope_threshold: DEFAULT_SLOPE_THRESHOLD,
            plateau_factor: DEFAULT_PLATEAU_FACTOR,
            initial_hi: 1.0,
            max_hi: 1024.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    /// Queue count; taken from the network when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub eps: f64,
    pub omega: u64,
    pub q0: f64,
    /// Overrides for the network's rate bounds and slack constant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub injections_per_window: u64,
    #[serde(default = "default_evals")]
    pub max_u_evals: u64,
    #[serde(default = "default_bits")]
    pub max_bits: u64,
    /// Largest queue count the command will attempt.
    #[serde(default = "default_max_n")]
    pub max_n: usize,
}

fn default_evals() -> u64 {
    100_000
}

fn default_bits() -> u64 {
    1 << 16
}

fn default_max_n() -> usize {
    64
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Checks that do not need to build the network.
    pub fn check(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.horizon == 0 || self.full_horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.scheduler.eps_hat) {
            return Err(format!("scheduler.eps_hat = {} not in [0, 1)", self.scheduler.eps_hat));
        }
        let needs_grid = matches!(self.adversary, AdversaryConfig::Exp1 { .. } | AdversaryConfig::Exp2 { .. });
        if needs_grid && !matches!(self.network, NetworkConfig::Grid(_)) {
            return Err("exp1/exp2 adversaries need a grid network".into());
        }
        if let AdversaryConfig::Exp1 { rate_vector, .. } = self.adversary {
            if !(1..=3).contains(&rate_vector) {
                return Err(format!("adversary.rate_vector = {rate_vector} must be 1, 2 or 3"));
            }
        }
        let exp_pair = (
            matches!(self.network, NetworkConfig::Exponential { .. }),
            matches!(self.adversary, AdversaryConfig::Exponential),
        );
        if exp_pair.0 != exp_pair.1 {
            return Err("the exponential adversary and the exponential network go together".into());
        }
        let scen_pair = (
            matches!(self.network, NetworkConfig::Scenario),
            matches!(self.adversary, AdversaryConfig::RandomWitness(_)),
        );
        if scen_pair.0 != scen_pair.1 {
            return Err("the random-witness adversary and the scenario network go together".into());
        }
        Ok(())
    }

    pub fn horizon(&self, full: bool) -> u64 {
        if full {
            self.full_horizon
        } else {
            self.horizon
        }
    }

    /// Window and slack of the adversary when it has a declared witness.
    pub fn witness_params(&self) -> Option<AdversaryParams> {
        match (&self.network, &self.adversary) {
            (NetworkConfig::Exponential { eps, .. }, AdversaryConfig::Exponential) => {
                Some(AdversaryParams { omega: 1, eps: *eps })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Exp1,
    Exp2,
    ExpExponential,
}

impl Preset {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "exp1" => Some(Preset::Exp1),
            "exp2" => Some(Preset::Exp2),
            "exp-exponential" => Some(Preset::ExpExponential),
            _ => None,
        }
    }

    pub fn config(self, n: usize, eps: f64) -> ExperimentConfig {
        let (network, adversary, horizon) = match self {
            Preset::Exp1 => (
                NetworkConfig::Grid(GridParams::default()),
                AdversaryConfig::Exp1 {
                    rate_vector: 1,
                    c: None,
                },
                100_000,
            ),
            Preset::Exp2 => (
                NetworkConfig::Grid(GridParams::default()),
                AdversaryConfig::Exp2 {
                    arrival_seed: 1,
                    c: None,
                },
                100_000,
            ),
            Preset::ExpExponential => (
                NetworkConfig::Exponential { n, eps },
                AdversaryConfig::Exponential,
                10_000_000,
            ),
        };
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            horizon,
            full_horizon: horizon.max(1_000_000),
            seed: 0,
            scheduler: SchedulerConfig::default(),
            network,
            adversary,
            probe: ProbeSettings::default(),
            bounds: None,
        }
    }
}
