//! Problem instances: Hamiltonian and field profiles, the initial operator,
//! physical constants and the time grid.

mod profile;
mod quadrature;

pub use profile::{FieldProfile, HamiltonianProfile, HermitianProfile, HermitianSample};
pub use quadrature::{integrate_b_squared, CumulativeIntegral};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigendecompose, polar_decompose_with_floor, ComplexMatrix, HermitianMatrix,
    DEFAULT_PD_FLOOR,
};

fn default_hbar() -> f64 {
    1.0
}

fn default_stride() -> usize {
    1
}

fn default_pd_floor() -> f64 {
    DEFAULT_PD_FLOOR
}

/// SHA-256 of the compact JSON serialization of `value`, hex encoded.
pub fn json_digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes to JSON");
    hex::encode(Sha256::digest(&bytes))
}

/// A runnable fixed-domain scenario. Field names match the JSON scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub hamiltonian: HamiltonianProfile,
    pub field: FieldProfile,
    pub initial_k: ComplexMatrix,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    /// Relative floor on the singular-value ratio of `K`.
    #[serde(default = "default_pd_floor")]
    pub pd_floor: f64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn digest(&self) -> String {
        json_digest(self)
    }

    pub fn dim(&self) -> usize {
        self.initial_k.rows()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.dt, self.t_end, self.output_stride)
    }

    pub fn has_constant_coefficients(&self) -> bool {
        self.hamiltonian.is_constant() && self.field.is_constant()
    }
}

/// Fixed-step grid `t_k = k dt` ending exactly at `t_end`; when `t_end` is
/// not a multiple of `dt` the last step is shortened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    t_end: f64,
    steps: usize,
    stride: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64, stride: usize) -> Result<Self> {
        if !(dt.is_finite() && t_end.is_finite()) || dt <= 0.0 || t_end <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "time grid needs positive dt and t_end, got dt={dt}, t_end={t_end}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidInput(
                "output stride must be at least 1".into(),
            ));
        }
        let ratio = t_end / dt;
        let nearest = ratio.round();
        let steps = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            ratio.ceil()
        };
        Ok(Self {
            dt,
            t_end,
            steps: (steps as usize).max(1),
            stride,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }

    pub fn is_output(&self, k: usize) -> bool {
        k.is_multiple_of(self.stride) || k == self.steps
    }

    /// Step indices that are emitted, including `0` and the final step.
    pub fn output_indices(&self) -> Vec<usize> {
        (0..=self.steps).filter(|&k| self.is_output(k)).collect()
    }

    pub fn output_times(&self) -> Vec<f64> {
        self.output_indices()
            .into_iter()
            .map(|k| self.time(k))
            .collect()
    }
}

/// Machine-readable validation codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    NonPositiveHbar,
    BadTimeGrid,
    BadOutputStride,
    BadPdFloor,
    NonSquareInitialK,
    DimensionMismatch,
    SingularInitialK,
    NotPositiveDefinite,
    BadFieldProfile,
    BadHamiltonianProfile,
    OutOfDomain,
}

impl IssueCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IssueCode::NonPositiveHbar => "NON_POSITIVE_HBAR",
            IssueCode::BadTimeGrid => "BAD_TIME_GRID",
            IssueCode::BadOutputStride => "BAD_OUTPUT_STRIDE",
            IssueCode::BadPdFloor => "BAD_PD_FLOOR",
            IssueCode::NonSquareInitialK => "NON_SQUARE_INITIAL_K",
            IssueCode::DimensionMismatch => "DIMENSION_MISMATCH",
            IssueCode::SingularInitialK => "SINGULAR_INITIAL_K",
            IssueCode::NotPositiveDefinite => "NOT_POSITIVE_DEFINITE",
            IssueCode::BadFieldProfile => "BAD_FIELD_PROFILE",
            IssueCode::BadHamiltonianProfile => "BAD_HAMILTONIAN_PROFILE",
            IssueCode::OutOfDomain => "OUT_OF_DOMAIN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_runnable(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    fn push(&mut self, code: IssueCode, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            code,
            message: message.into(),
        });
    }

    /// Drops issues that do not affect the numerics. Positive definiteness of
    /// `H` is a modelling assumption; the solvers are well defined for any
    /// Hermitian `H`, including `H = 0`.
    pub fn solver_blocking(mut self) -> Self {
        self.issues
            .retain(|i| i.code != IssueCode::NotPositiveDefinite);
        self
    }

    /// Converts a non-empty report into an error listing every issue.
    pub fn into_result(self) -> Result<()> {
        if self.is_runnable() {
            return Ok(());
        }
        let msg = self
            .issues
            .iter()
            .map(|i| format!("{}: {}", i.code.as_str(), i.message))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidInput(msg))
    }
}

/// Lists every violated scenario invariant. Never fails.
pub fn validate_scenario(cfg: &ScenarioConfig) -> ValidationReport {
    let mut report = ValidationReport::default();

    if !(cfg.hbar.is_finite() && cfg.hbar > 0.0) {
        report.push(IssueCode::NonPositiveHbar, format!("hbar = {}", cfg.hbar));
    }
    let grid_ok = cfg.dt.is_finite() && cfg.t_end.is_finite() && cfg.dt > 0.0 && cfg.dt < cfg.t_end;
    if !grid_ok {
        report.push(
            IssueCode::BadTimeGrid,
            format!(
                "need 0 < dt < t_end, got dt={}, t_end={}",
                cfg.dt, cfg.t_end
            ),
        );
    }
    if cfg.output_stride == 0 {
        report.push(IssueCode::BadOutputStride, "output_stride must be >= 1");
    }
    if !(cfg.pd_floor.is_finite() && (0.0..1.0).contains(&cfg.pd_floor)) {
        report.push(
            IssueCode::BadPdFloor,
            format!("pd_floor must lie in [0, 1), got {}", cfg.pd_floor),
        );
    }

    for d in cfg.field.defects() {
        report.push(IssueCode::BadFieldProfile, d);
    }
    let h_defects = cfg.hamiltonian.defects();
    for d in &h_defects {
        report.push(IssueCode::BadHamiltonianProfile, d.clone());
    }

    let dim = cfg.hamiltonian.dim();
    if !cfg.initial_k.is_square() {
        report.push(
            IssueCode::NonSquareInitialK,
            format!(
                "initial_k is {}x{}",
                cfg.initial_k.rows(),
                cfg.initial_k.cols()
            ),
        );
    } else {
        if cfg.initial_k.rows() != dim {
            report.push(
                IssueCode::DimensionMismatch,
                format!(
                    "initial_k is {}x{} but the Hamiltonian is {dim}x{dim}",
                    cfg.initial_k.rows(),
                    cfg.initial_k.cols()
                ),
            );
        }
        let floor = if cfg.pd_floor.is_finite() {
            cfg.pd_floor
        } else {
            DEFAULT_PD_FLOOR
        };
        if let Err(e) = polar_decompose_with_floor(&cfg.initial_k, floor) {
            report.push(IssueCode::SingularInitialK, e.to_string());
        }
    }

    for (i, h) in cfg.hamiltonian.matrices().into_iter().enumerate() {
        if let Some(msg) = positive_definite_defect(h) {
            report.push(
                IssueCode::NotPositiveDefinite,
                format!("Hamiltonian sample {i}: {msg}"),
            );
        }
    }

    if grid_ok {
        let end = cfg.t_end;
        if let Some((lo, hi)) = cfg.field.domain() {
            if cfg.field.sample(0.0).is_err() || cfg.field.sample(end).is_err() {
                report.push(
                    IssueCode::OutOfDomain,
                    format!("field table covers [{lo}, {hi}] but the run needs [0, {end}]"),
                );
            }
        }
        if h_defects.is_empty() {
            if let Some((lo, hi)) = cfg.hamiltonian.domain() {
                if cfg.hamiltonian.sample(0.0).is_err() || cfg.hamiltonian.sample(end).is_err() {
                    report.push(
                        IssueCode::OutOfDomain,
                        format!(
                            "Hamiltonian sequence covers [{lo}, {hi}] but the run needs [0, {end}]"
                        ),
                    );
                }
            }
        }
    }

    report
}

fn positive_definite_defect(h: &HermitianMatrix) -> Option<String> {
    match hermitian_eigendecompose(h) {
        Ok(eig) if eig.min() > 0.0 => None,
        Ok(eig) => Some(format!("minimum eigenvalue {} is not positive", eig.min())),
        Err(e) => Some(e.to_string()),
    }
}
