//! Machine-readable stage reports. Field order is fixed by the struct
//! definitions and every value is a deterministic function of (config,
//! seed), so identical runs produce byte-identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use towerdyn::induced::{InducedMapDocument, MarkovReport};
use towerdyn::measures::IntegralEstimate;
use towerdyn::orbits::{
    ArcEscapeReport, Classification, ExpansionScan, IrgCertificate, PreorbitCertificate,
};
use towerdyn::stats::{CorrelationCurve, LyapunovEstimate, TailFit};
use towerdyn::zooming::{AxiomReport, SourceZoomingData, ZoomingFrequency};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Writes stage reports into the output directory and collects the summary.
pub struct Reporter {
    out_dir: PathBuf,
    pub format: OutputFormat,
    stages: Vec<StageSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub stages: Vec<StageSummary>,
    pub all_passed: bool,
}

impl Reporter {
    pub fn new(out_dir: &Path, format: OutputFormat) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            format,
            stages: Vec::new(),
        })
    }

    #[allow(dead_code)]
    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(format!("{name}.csv"));
        let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn record(&mut self, stage: &str, passed: bool, detail: impl Into<String>) {
        self.stages.push(StageSummary {
            stage: stage.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn finish(&self, seed: u64) -> anyhow::Result<RunSummary> {
        let summary = RunSummary {
            seed,
            stages: self.stages.clone(),
            all_passed: self.stages.iter().all(|s| s.passed),
        };
        self.write_json("summary", &summary)?;
        Ok(summary)
    }
}

// ---------------------------------------------------------------------------
// stage report payloads
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MapInfoReport {
    pub family: String,
    pub dimension: usize,
    pub degree: usize,
    /// Build-time volume-expansion constant, when the family certifies one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0_center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u0_radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub point: Vec<f64>,
    pub period: usize,
    pub classification: Classification,
    pub eigenvalue_moduli: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicReport {
    pub period: usize,
    pub seeds_total: usize,
    pub seeds_converged: usize,
    pub orbits: Vec<OrbitRecord>,
    pub source_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceZoomingReport {
    pub axiom_checks: Vec<AxiomReport>,
    pub data: SourceZoomingData,
}

#[derive(Debug, Clone, Serialize)]
pub struct InducedReport {
    pub markov: MarkovReport,
    pub min_df_over_cells: f64,
    pub document: InducedMapDocument,
}

#[derive(Debug, Clone, Serialize)]
pub struct KacTestReport {
    pub draws: usize,
    pub chi_squared: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    pub ideal_coverage: f64,
    pub discarded_tail_mass: f64,
    pub mean_return: f64,
    pub kac_test: KacTestReport,
    pub sample_count: usize,
    pub sample_mean: Vec<f64>,
    pub occupied_bins: usize,
    pub histogram_bins: usize,
    pub coordinate_integral: IntegralEstimate,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CorrelationOutcome {
    Curve(CorrelationCurve),
    SignalBelowNoise { usable: usize, needed: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub lyapunov_sampler: String,
    pub lyapunov: LyapunovEstimate,
    pub correlation_sampler: String,
    pub correlations: CorrelationOutcome,
    pub tail_fit: TailFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreorbitReport {
    pub point: Vec<f64>,
    pub eps: f64,
    pub certificate: PreorbitCertificate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZoomingScanReport {
    pub point: Vec<f64>,
    pub lambda: f64,
    pub delta: f64,
    pub frequency: ZoomingFrequency,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassFReport {
    pub volume_expanding: bool,
    pub dense_preorbit_evidence: bool,
    pub expanding_off_u0: bool,
    pub separation_evidence_irg: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyExampleReport {
    pub grid_resolution: usize,
    pub sigma_on_grid: f64,
    pub volume_expanding: bool,
    pub off_u0: ExpansionScan,
    pub saddle: Option<OrbitRecord>,
    pub repellers: Vec<OrbitRecord>,
    pub complex_pair_moduli: Vec<f64>,
    pub complex_pair_args: Vec<f64>,
    pub preorbit: PreorbitReport,
    pub irg: IrgCertificate,
    pub arc_escape: ArcEscapeReport,
    pub class_f: ClassFReport,
    pub passed: bool,
}
