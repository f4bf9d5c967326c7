//! Experiment configuration: one JSON document drives every subcommand.
//!
//! Schema sketch (see the repository README for the full field list):
//!
//! ```json
//! {
//!   "map": {"family": "doubling", "multiplier": 2},
//!   "seed": 42,
//!   "stages": ["map-info", "periodic", "source-zooming",
//!              "induced", "measures", "stats"],
//!   "periodic": {"period": 1, "seed_grid_resolution": 64},
//!   "zooming": {"delta_search": 0.125},
//!   "induced": {"radius_over_delta": 0.125, "max_return": 8},
//!   "measures": {"weights": {"family": "geometric", "theta": 0.5},
//!                "n_samples": 100000},
//!   "stats": { ... }
//! }
//! ```

use serde::{Deserialize, Serialize};
use towerdyn::families::MapDescriptor;
use towerdyn::measures::WeightFamily;
use towerdyn::stats::Observable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageName {
    MapInfo,
    Periodic,
    SourceZooming,
    Induced,
    Measures,
    Stats,
    VerifyExample,
    PreorbitDensity,
    ZoomingScan,
}

impl StageName {
    pub fn as_str(&self) -> &'static str {
        match self {
            StageName::MapInfo => "map-info",
            StageName::Periodic => "periodic",
            StageName::SourceZooming => "source-zooming",
            StageName::Induced => "induced",
            StageName::Measures => "measures",
            StageName::Stats => "stats",
            StageName::VerifyExample => "verify-example",
            StageName::PreorbitDensity => "preorbit-density",
            StageName::ZoomingScan => "zooming-scan",
        }
    }

    /// Stage that must appear earlier in the pipeline, if any.
    pub fn dependency(&self) -> Option<StageName> {
        match self {
            StageName::SourceZooming => Some(StageName::Periodic),
            StageName::Induced => Some(StageName::SourceZooming),
            StageName::Measures => Some(StageName::Induced),
            StageName::Stats => Some(StageName::Measures),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PeriodicParams {
    #[serde(default = "default_period")]
    pub period: usize,
    #[serde(default = "default_grid")]
    pub seed_grid_resolution: usize,
}

fn default_period() -> usize {
    1
}
fn default_grid() -> usize {
    64
}

impl Default for PeriodicParams {
    fn default() -> Self {
        Self {
            period: 1,
            seed_grid_resolution: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PreorbitParams {
    /// Root point; defaults to the periodic source when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub eps: f64,
    #[serde(default = "default_depth")]
    pub depth_max: usize,
    #[serde(default = "default_budget")]
    pub node_budget: usize,
}

fn default_depth() -> usize {
    12
}
fn default_budget() -> usize {
    2_000_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ZoomingParams {
    #[serde(default = "default_delta_search")]
    pub delta_search: f64,
    /// Rates to run the axiom checker on.
    #[serde(default = "default_lambdas")]
    pub axiom_rates: Vec<f64>,
}

fn default_delta_search() -> f64 {
    0.125
}
fn default_lambdas() -> Vec<f64> {
    vec![0.125, 0.5]
}

impl Default for ZoomingParams {
    fn default() -> Self {
        Self {
            delta_search: default_delta_search(),
            axiom_rates: default_lambdas(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ZoomingScanParams {
    pub point: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    #[serde(default = "default_scan_n")]
    pub n_max: usize,
}

fn default_scan_n() -> usize {
    24
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InducedParams {
    /// Base radius as a fraction of the zooming delta (must stay below 1/4).
    #[serde(default = "default_radius_fraction")]
    pub radius_over_delta: f64,
    #[serde(default = "default_max_return")]
    pub max_return: usize,
    #[serde(default = "default_cell_budget")]
    pub cell_budget: usize,
    #[serde(default = "default_frontier_budget")]
    pub frontier_budget: usize,
    #[serde(default = "default_samples_per_cell")]
    pub samples_per_cell: usize,
}

fn default_radius_fraction() -> f64 {
    0.125
}
fn default_max_return() -> usize {
    8
}
fn default_cell_budget() -> usize {
    4096
}
fn default_frontier_budget() -> usize {
    8192
}
fn default_samples_per_cell() -> usize {
    16
}

impl Default for InducedParams {
    fn default() -> Self {
        Self {
            radius_over_delta: default_radius_fraction(),
            max_return: default_max_return(),
            cell_budget: default_cell_budget(),
            frontier_budget: default_frontier_budget(),
            samples_per_cell: default_samples_per_cell(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasureParams {
    pub weights: WeightFamily,
    #[serde(default = "default_measure_samples")]
    pub n_samples: usize,
    #[serde(default = "default_cascade")]
    pub cascade_depth: usize,
    /// Draws for the Kac chi-squared consistency test.
    #[serde(default = "default_kac_draws")]
    pub kac_draws: usize,
}

fn default_measure_samples() -> usize {
    100_000
}
fn default_cascade() -> usize {
    towerdyn::measures::DEFAULT_CASCADE_DEPTH
}
fn default_kac_draws() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParams {
    #[serde(default = "default_lyap_iterates")]
    pub n_iterates: usize,
    #[serde(default = "default_lyap_samples")]
    pub n_samples: usize,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerChoice,
}

fn default_lyap_iterates() -> usize {
    100_000
}
fn default_lyap_samples() -> usize {
    32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerChoice {
    Lebesgue,
    Tower,
}

fn default_sampler() -> SamplerChoice {
    SamplerChoice::Tower
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CorrelationParams {
    pub psi: Observable,
    pub phi: Observable,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_corr_samples")]
    pub n_samples: usize,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerChoice,
}

fn default_max_lag() -> usize {
    12
}
fn default_corr_samples() -> usize {
    400_000
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StatsParams {
    pub lyapunov: LyapunovParams,
    pub correlations: CorrelationParams,
    #[serde(default = "default_tail_n")]
    pub tail_n_max: usize,
}

fn default_tail_n() -> usize {
    7
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VerifyExampleParams {
    #[serde(default = "default_verify_grid")]
    pub grid_resolution: usize,
    #[serde(default = "default_preorbit_eps")]
    pub preorbit_eps: f64,
    #[serde(default = "default_depth")]
    pub preorbit_depth: usize,
    #[serde(default = "default_budget")]
    pub preorbit_budget: usize,
    /// Arc-escape falsifier: arc diameter threshold and sampling.
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default = "default_u1_radius")]
    pub u1_radius: f64,
    #[serde(default = "default_arcs")]
    pub arcs: usize,
    #[serde(default = "default_horizon")]
    pub arc_horizon: usize,
}

fn default_verify_grid() -> usize {
    512
}
fn default_preorbit_eps() -> f64 {
    0.05
}
fn default_delta0() -> f64 {
    0.3
}
fn default_u1_radius() -> f64 {
    0.2
}
fn default_arcs() -> usize {
    64
}
fn default_horizon() -> usize {
    20
}

impl Default for VerifyExampleParams {
    fn default() -> Self {
        Self {
            grid_resolution: default_verify_grid(),
            preorbit_eps: default_preorbit_eps(),
            preorbit_depth: default_depth(),
            preorbit_budget: default_budget(),
            delta0: default_delta0(),
            u1_radius: default_u1_radius(),
            arcs: default_arcs(),
            arc_horizon: default_horizon(),
        }
    }
}

/// The complete experiment configuration. Round-trips through JSON
/// unchanged.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapDescriptor,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Pipeline program; required by the `pipeline` subcommand, ignored by
    /// the standalone subcommands (which build their own stage chains).
    #[serde(default)]
    pub stages: Vec<StageName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preorbit: Option<PreorbitParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zooming: Option<ZoomingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zooming_scan: Option<ZoomingScanParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induced: Option<InducedParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<MeasureParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_example: Option<VerifyExampleParams>,
}

fn default_seed() -> u64 {
    0
}

impl ExperimentConfig {
    pub fn from_path(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Numeric-range and stage-order validation; runs before any
    /// computation.
    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(p) = &self.preorbit {
            anyhow::ensure!(p.eps > 0.0, "preorbit.eps must be positive, got {}", p.eps);
            anyhow::ensure!(p.depth_max >= 1, "preorbit.depth_max must be at least 1");
        }
        if let Some(z) = &self.zooming {
            anyhow::ensure!(
                z.delta_search > 0.0 && z.delta_search < 0.5,
                "zooming.delta_search must lie in (0, 1/2), got {}",
                z.delta_search
            );
            for r in &z.axiom_rates {
                anyhow::ensure!(*r > 0.0, "zooming.axiom_rates must be positive");
            }
        }
        if let Some(i) = &self.induced {
            anyhow::ensure!(
                i.radius_over_delta > 0.0 && i.radius_over_delta < 0.25,
                "induced.radius_over_delta must lie in (0, 1/4), got {}",
                i.radius_over_delta
            );
            anyhow::ensure!(i.max_return >= 1, "induced.max_return must be at least 1");
        }
        if let Some(m) = &self.measures {
            if let WeightFamily::Geometric { theta } = m.weights {
                anyhow::ensure!(
                    theta > 0.0 && theta < 1.0,
                    "measures.weights.theta must lie in (0,1), got {theta}"
                );
            }
            anyhow::ensure!(m.n_samples > 0, "measures.n_samples must be positive");
        }
        if let Some(s) = &self.stats {
            anyhow::ensure!(
                s.correlations.max_lag >= 8,
                "stats.correlations.max_lag must be at least 8"
            );
            anyhow::ensure!(
                s.lyapunov.n_iterates >= 100,
                "stats.lyapunov.n_iterates must be at least 100"
            );
        }
        if let Some(v) = &self.verify_example {
            anyhow::ensure!(v.preorbit_eps > 0.0, "verify_example.preorbit_eps must be positive");
        }
        // stage dependency order
        for (idx, stage) in self.stages.iter().enumerate() {
            if let Some(dep) = stage.dependency() {
                let satisfied = self.stages[..idx].contains(&dep);
                anyhow::ensure!(
                    satisfied,
                    "stage `{}` requires stage `{}` earlier in the pipeline",
                    stage.as_str(),
                    dep.as_str()
                );
            }
        }
        Ok(())
    }
}
