//! On-disk JSON documents read and written by the command-line tool.

use serde::{Deserialize, Serialize};

use dmix_core::dma::{Case, DmaProblem, Method, ResidualEntry, SolutionReport, Strategy};
use dmix_core::eval::Reference;
use dmix_core::moments::{
    dirac_moments, mixture_raw_moments, DiracMixture, MomentTable, ScalarGaussian,
    ScalarGaussianMixture,
};
use dmix_core::multiindex::MultiIndex;
use dmix_core::solver::{SolverOptions, SolverTrace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub index: MultiIndex,
    pub value: f64,
}

/// A moment-matching problem as given by the user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dim: usize,
    #[serde(rename = "L")]
    pub components: usize,
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub moments: Vec<MomentEntry>,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<DmaProblem, String> {
        if self.symmetric != self.mean.is_some() {
            return Err("\"mean\" is required exactly when \"symmetric\" is true".into());
        }
        let table = MomentTable::from_entries(
            self.dim,
            self.moments.into_iter().map(|e| (e.index, e.value)),
        )
        .map_err(|e| format!("moments: {e}"))?;
        let mut problem = DmaProblem::new(self.components, table).with_options(self.solver);
        if let Some(mean) = self.mean {
            problem = problem.symmetric_about(mean);
        }
        problem.weights = self.weights;
        problem.validate().map_err(|e| e.to_string())?;
        Ok(problem)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Input of `dmix moments` and reference of `dmix eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySpec {
    Gaussian {
        mean: f64,
        std: f64,
    },
    GaussianMixture {
        components: Vec<GaussianComponent>,
    },
    DiracMixture {
        dim: usize,
        locations: Vec<Vec<f64>>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

impl DensitySpec {
    fn gaussian_mixture(&self) -> Result<Option<ScalarGaussianMixture>, String> {
        let gm = match self {
            DensitySpec::Gaussian { mean, std } => ScalarGaussianMixture::new(vec![(
                1.0,
                ScalarGaussian::new(*mean, *std).map_err(|e| e.to_string())?,
            )]),
            DensitySpec::GaussianMixture { components } => {
                let parts = components
                    .iter()
                    .map(|c| ScalarGaussian::new(c.mean, c.std).map(|g| (c.weight, g)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| e.to_string())?;
                ScalarGaussianMixture::new(parts)
            }
            DensitySpec::DiracMixture { .. } => return Ok(None),
        };
        gm.map(Some).map_err(|e| e.to_string())
    }

    pub fn dirac_mixture(&self) -> Result<Option<DiracMixture>, String> {
        let DensitySpec::DiracMixture {
            dim,
            locations,
            weights,
        } = self
        else {
            return Ok(None);
        };
        if locations.iter().any(|p| p.len() != *dim) {
            return Err(format!("every location must have {dim} coordinates"));
        }
        let flat = locations.concat();
        let dm = match weights {
            Some(w) => DiracMixture::new(*dim, flat, w.clone()),
            None => DiracMixture::equally_weighted(*dim, flat),
        };
        dm.map(Some).map_err(|e| e.to_string())
    }

    /// All power moments up to `order`.
    pub fn moments(&self, order: u32) -> Result<MomentTable, String> {
        if let Some(dm) = self.dirac_mixture()? {
            return Ok(dirac_moments(&dm, order));
        }
        let gm = self.gaussian_mixture()?.expect("gaussian kinds");
        let raw = mixture_raw_moments(&gm, order);
        MomentTable::from_entries(
            1,
            raw.iter()
                .enumerate()
                .map(|(k, v)| (MultiIndex::new(vec![k as u32]).expect("non-empty"), *v)),
        )
        .map_err(|e| e.to_string())
    }

    pub fn reference(&self) -> Result<Reference, String> {
        match self.gaussian_mixture()? {
            Some(gm) => Ok(match self {
                DensitySpec::Gaussian { mean, std } => Reference::Gaussian {
                    mean: *mean,
                    std: *std,
                },
                _ => Reference::GaussianMixture {
                    components: gm.components().to_vec(),
                },
            }),
            None => Err("a reference must be a gaussian or a gaussian mixture".into()),
        }
    }
}

/// `solution.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub converged: bool,
    pub case: Case,
    pub method: Method,
    pub strategy: Strategy,
    #[serde(rename = "L")]
    pub components: usize,
    pub symmetric: bool,
    pub mean: Option<Vec<f64>>,
    /// Euclidean norm of the unweighted moment residuals.
    pub residual: f64,
    pub max_abs_residual: f64,
    pub entropy: Option<f64>,
    pub message: Option<String>,
    pub seed: u64,
    pub restart: usize,
    pub mixture: DiracMixture,
    pub diameters: Vec<f64>,
    pub residuals: Vec<ResidualEntry>,
    pub trace: SolverTrace,
    pub target: MomentTable,
    pub options: SolverOptions,
}

impl SolutionFile {
    pub fn new(problem: &DmaProblem, method: Method, report: SolutionReport) -> Self {
        Self {
            converged: report.converged,
            case: report.case,
            method,
            strategy: report.strategy,
            components: problem.components,
            symmetric: problem.symmetric,
            mean: problem.mean.clone(),
            residual: report.moment_residual_norm,
            max_abs_residual: report.max_abs_residual(),
            entropy: report.entropy,
            message: report.message,
            seed: report.seed,
            restart: report.restart,
            mixture: report.mixture,
            diameters: report.diameters,
            residuals: report.residuals,
            trace: report.trace,
            target: problem.target.clone(),
            options: problem.options.clone(),
        }
    }
}

/// `eval.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalFile {
    pub residual: f64,
    pub max_abs_residual: f64,
    pub entropy: Option<f64>,
    /// Cramér–von Mises distance to the reference; scalar mixtures only.
    pub cvm: Option<f64>,
    pub feasible: bool,
    pub nonpositive: Vec<usize>,
    pub colliding: Vec<(usize, usize)>,
    pub reference: Option<Reference>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// `manifest.json`: everything needed to repeat a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub preset: Option<String>,
    pub input: Option<InputDigest>,
    #[serde(rename = "L")]
    pub components: usize,
    pub method: Method,
    pub options: SolverOptions,
}
