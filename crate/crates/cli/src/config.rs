//! Run configuration: a TOML document with per-command sections.
//!
//! Every field has a default, so an empty file is a valid ball run. Command-line
//! flags are applied on top of the parsed file and the result is validated
//! before anything is dispatched.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sps_core::{DomainSpec, GradientTolerance, ProblemParams, SolveOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `sweep.p_list[2]`.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    /// Lattice nodes along the longest axis of the bounding box.
    pub resolution: usize,
    pub p: f64,
    pub lambda: f64,
    /// Bump radius for multistart and `m_{p,r}`; defaults per domain when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub multistart: MultistartConfig,
    pub poisson_check: PoissonCheckConfig,
    pub gradcheck: GradcheckConfig,
    pub instanton: InstantonConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainSpec::ball(1.0),
            resolution: 33,
            p: 5.0,
            lambda: 1.0,
            r: None,
            seed: 0,
            out: PathBuf::from("sps-out"),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            multistart: MultistartConfig::default(),
            poisson_check: PoissonCheckConfig::default(),
            gradcheck: GradcheckConfig::default(),
            instanton: InstantonConfig::default(),
        }
    }
}

/// Solver knobs; the seed lives at the top level of [`RunConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: GradientTolerance,
    pub initial_step: f64,
    pub backtrack_shrink: f64,
    pub max_backtracks: usize,
    pub restarts: usize,
    pub poisson_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverConfig {
            max_iterations: d.max_iterations,
            gradient_tolerance: d.gradient_tolerance,
            initial_step: d.initial_step,
            backtrack_shrink: d.backtrack_shrink,
            max_backtracks: d.max_backtracks,
            restarts: d.restarts,
            poisson_tol: d.poisson_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub p_list: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p_list: vec![4.2, 4.6, 5.0, 5.4, 5.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultistartConfig {
    pub n_centers: usize,
}

impl Default for MultistartConfig {
    fn default() -> Self {
        MultistartConfig { n_centers: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonCheckConfig {
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for PoissonCheckConfig {
    fn default() -> Self {
        PoissonCheckConfig {
            samples: 20,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub pairs: usize,
    pub p_list: Vec<f64>,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            pairs: 10,
            p_list: vec![4.5, 5.5],
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstantonConfig {
    pub quadrature_points: usize,
    pub scales: Vec<f64>,
}

impl Default for InstantonConfig {
    fn default() -> Self {
        InstantonConfig {
            quadrature_points: 200_000,
            scales: vec![0.1, 1.0, 10.0],
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub r: Option<f64>,
    pub n_centers: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("<config>", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<config>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.p {
            self.p = v;
        }
        if let Some(v) = o.lambda {
            self.lambda = v;
        }
        if let Some(v) = o.resolution {
            self.resolution = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = o.r {
            self.r = Some(v);
        }
        if let Some(v) = o.n_centers {
            self.multistart.n_centers = v;
        }
    }

    pub fn params(&self) -> ProblemParams {
        ProblemParams {
            lambda: self.lambda,
            p: self.p,
            positive_part: true,
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solver;
        SolveOptions {
            max_iterations: s.max_iterations,
            gradient_tolerance: s.gradient_tolerance,
            initial_step: s.initial_step,
            backtrack_shrink: s.backtrack_shrink,
            max_backtracks: s.max_backtracks,
            restarts: s.restarts,
            seed: self.seed,
            poisson_tol: s.poisson_tol,
        }
    }

    /// Checks every field against the preconditions of the module that consumes it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.domain
            .validate()
            .map_err(|e| ConfigError::new("domain", e.to_string()))?;
        if self.resolution < 8 {
            return Err(ConfigError::new("resolution", format!("must be at least 8, got {}", self.resolution)));
        }
        check_p("p", self.p)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ConfigError::new("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if let Some(r) = self.r {
            let inradius = self.domain.inradius();
            if !(r.is_finite() && r > 0.0 && r < inradius) {
                return Err(ConfigError::new(
                    "r",
                    format!("must lie in (0, {inradius}) for this domain, got {r}"),
                ));
            }
        }
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::new("seed", format!("must fit in a TOML integer (< 2^63), got {}", self.seed)));
        }
        if self.out.as_os_str().is_empty() {
            return Err(ConfigError::new("out", "must not be empty"));
        }
        self.validate_solver()?;
        if self.sweep.p_list.is_empty() {
            return Err(ConfigError::new("sweep.p_list", "must not be empty"));
        }
        for (k, &p) in self.sweep.p_list.iter().enumerate() {
            check_p(&format!("sweep.p_list[{k}]"), p)?;
        }
        if self.multistart.n_centers == 0 {
            return Err(ConfigError::new("multistart.n_centers", "must be at least 1"));
        }
        if self.poisson_check.samples == 0 {
            return Err(ConfigError::new("poisson_check.samples", "must be at least 1"));
        }
        positive("poisson_check.tolerance", self.poisson_check.tolerance)?;
        if self.gradcheck.pairs == 0 {
            return Err(ConfigError::new("gradcheck.pairs", "must be at least 1"));
        }
        for (k, &p) in self.gradcheck.p_list.iter().enumerate() {
            check_p(&format!("gradcheck.p_list[{k}]"), p)?;
        }
        positive("gradcheck.tolerance", self.gradcheck.tolerance)?;
        if self.instanton.quadrature_points < 1000 {
            return Err(ConfigError::new(
                "instanton.quadrature_points",
                format!("must be at least 1000, got {}", self.instanton.quadrature_points),
            ));
        }
        if self.instanton.scales.is_empty() {
            return Err(ConfigError::new("instanton.scales", "must not be empty"));
        }
        for (k, &s) in self.instanton.scales.iter().enumerate() {
            positive(&format!("instanton.scales[{k}]"), s)?;
        }
        Ok(())
    }

    fn validate_solver(&self) -> Result<(), ConfigError> {
        let s = &self.solver;
        if s.max_iterations == 0 {
            return Err(ConfigError::new("solver.max_iterations", "must be at least 1"));
        }
        let tol = match s.gradient_tolerance {
            GradientTolerance::Relative(v) | GradientTolerance::Absolute(v) => v,
        };
        positive("solver.gradient_tolerance", tol)?;
        positive("solver.initial_step", s.initial_step)?;
        if !(s.backtrack_shrink > 0.0 && s.backtrack_shrink < 1.0) {
            return Err(ConfigError::new(
                "solver.backtrack_shrink",
                format!("must lie in (0, 1), got {}", s.backtrack_shrink),
            ));
        }
        positive("solver.poisson_tol", s.poisson_tol)
    }
}

fn check_p(path: &str, p: f64) -> Result<(), ConfigError> {
    if p > 4.0 && p < 6.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must lie in (4, 6), got {p}")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be finite and > 0, got {v}")))
    }
}
