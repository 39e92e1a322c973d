//! Serializable run summaries: report.json and sweep.csv.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diagnostics::{NormSuite, ScalingFit, SteadyResiduals};
use crate::stability::{SpectrumReport, Verdict};

/// Column order of sweep.csv.
pub const SWEEP_COLUMNS: [&str; 19] = [
    "index",
    "axis",
    "value",
    "epsilon",
    "sigma",
    "delta",
    "norm_j",
    "status",
    "one_minus_rho0_inf",
    "rho_s_minus_rho0_inf",
    "rho_s_minus_rho0_l2",
    "rho_s_minus_rho0_w22",
    "lo_density_residual",
    "picard_iterations",
    "first_ratio",
    "max_ratio",
    "h_norm_final",
    "steady_residual_max",
    "gauge_relative",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub rho_s: NormSuite,
    pub chi_s: NormSuite,
    pub phi_s: NormSuite,
    pub rho_s_minus_rho0: NormSuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySummary {
    pub delta: f64,
    pub norm_j: f64,
    pub corrector_iterations: usize,
    pub corrector_residual: f64,
    pub one_minus_rho0_inf: f64,
    /// Density-equation residual of the leading-order state: the dropped `-lap rho0`.
    pub lo_density_residual: f64,
    pub picard_iterations: usize,
    pub linear_iterations: usize,
    pub increments: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub h_norm_final: f64,
    pub norms: FieldNorms,
    pub residuals: SteadyResiduals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub initial_distance: f64,
    pub final_phase_distance: f64,
    /// `||u(T) - u(0)||_2`; the relevant number for phase perturbations.
    pub drift_from_start: f64,
    pub max_gauge_defect: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_mismatch: Option<f64>,
}

/// One sweep point. Measurement fields are absent when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub axis: String,
    pub value: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub delta: f64,
    pub norm_j: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadySummary>,
}

impl SweepRow {
    /// Numeric value of a measurement column.
    pub fn quantity(&self, column: &str) -> Option<f64> {
        match column {
            "index" => return Some(self.index as f64),
            "value" => return Some(self.value),
            "epsilon" => return Some(self.epsilon),
            "sigma" => return Some(self.sigma),
            "delta" => return Some(self.delta),
            "norm_j" => return Some(self.norm_j),
            _ => {}
        }
        let s = self.steady.as_ref()?;
        let max_ratio = s
            .contraction_ratios
            .iter()
            .copied()
            .fold(f64::NAN, f64::max);
        Some(match column {
            "one_minus_rho0_inf" => s.one_minus_rho0_inf,
            "rho_s_minus_rho0_inf" => s.norms.rho_s_minus_rho0.linf,
            "rho_s_minus_rho0_l2" => s.norms.rho_s_minus_rho0.l2,
            "rho_s_minus_rho0_w22" => s.norms.rho_s_minus_rho0.w22,
            "lo_density_residual" => s.lo_density_residual,
            "picard_iterations" => s.picard_iterations as f64,
            "first_ratio" => *s.contraction_ratios.first()?,
            "max_ratio" if max_ratio.is_nan() => return None,
            "max_ratio" => max_ratio,
            "h_norm_final" => s.h_norm_final,
            "steady_residual_max" => s.residuals.max(),
            "gauge_relative" => s.residuals.gauge_relative,
            _ => return None,
        })
    }

    fn cell(&self, column: &str) -> String {
        match column {
            "axis" => self.axis.clone(),
            "status" => self.status.clone(),
            "index" => self.index.to_string(),
            "picard_iterations" => self
                .quantity(column)
                .map(|v| (v as usize).to_string())
                .unwrap_or_default(),
            _ => self
                .quantity(column)
                .map(|v| format!("{v:e}"))
                .unwrap_or_default(),
        }
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = SWEEP_COLUMNS.iter().map(|c| r.cell(c)).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub quantity: String,
    pub min: f64,
    pub max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    pub passed: bool,
}

/// Contents of report.json. Contains no timestamps or wall times, so two
/// single-threaded runs of one config serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    /// `ok` or the error tag.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady: Option<SteadySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub sweep: Vec<SweepRow>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub fits: BTreeMap<String, ScalingFit>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub assertions: Vec<AssertionOutcome>,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunReport {
            command: command.into(),
            config: config.clone(),
            status: "ok".into(),
            message: None,
            exit_code: 0,
            steady: None,
            spectrum: None,
            verdict: None,
            evolution: None,
            sweep: Vec::new(),
            fits: BTreeMap::new(),
            assertions: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are plain data")
    }
}
