//! End-to-end Michaelis-Menten pipeline: decomposition, scenarios,
//! stationary profiles and residual reports.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::export::Metadata;
use crate::gql::{decomposed_system, CoordinateMap, GqlDecomposition};
use crate::manifold::{residual_report, CorrectionContext, LinearTransport, ResidualReport, TransportScaling, LAPLACIAN_H1_NOTE};
use crate::mm::{self, MmParams, ScenarioKind, Scenarios, Z_EQUATION_NOTE};
use crate::model::{ModelDefinition, SpsSystem};
use crate::pde::{march_to_steady, semidiscretize, MarchResult, Profile1D, SolverConfig};

/// Labels of the decomposed coordinates (fast first).
pub fn decomposed_labels() -> Vec<String> {
    vec!["U".into(), "V".into(), "W".into()]
}

#[derive(Debug, Clone)]
pub struct MmBenchmark {
    pub params: MmParams,
    pub model: ModelDefinition,
    pub equilibrium: DVector<f64>,
    pub decomposition: GqlDecomposition,
    pub map: CoordinateMap,
    /// ε used in the decomposed system (the GQL estimate unless overridden).
    pub epsilon: f64,
    pub epsilon_overridden: bool,
    pub scenarios: Scenarios,
}

/// Stationary profile of one scenario together with its residuals.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub kind: ScenarioKind,
    pub march: MarchResult,
    /// Final profile in decomposed coordinates.
    pub decomposed: Profile1D,
    pub report: ResidualReport,
}

impl MmBenchmark {
    pub fn new(params: MmParams) -> Result<Self> {
        params.validate()?;
        let model = mm::mm_model(&params);
        let equilibrium = mm::mm_equilibrium(&params)?;
        let decomposition = mm::mm_decomposition(&params)?;
        let map = decomposition.coordinates();
        let scenarios = mm::build_scenarios(&params, &map)?;
        Ok(Self {
            params,
            model,
            equilibrium,
            epsilon: decomposition.epsilon,
            decomposition,
            map,
            epsilon_overridden: false,
            scenarios,
        })
    }

    pub fn with_epsilon(mut self, eps: Option<f64>) -> Result<Self> {
        if let Some(e) = eps {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: format!("must lie in (0, 1), got {e}"),
                });
            }
            self.epsilon = e;
            self.epsilon_overridden = true;
        }
        Ok(self)
    }

    pub fn sps(&self) -> Result<SpsSystem> {
        decomposed_system(&self.map, &self.model, self.epsilon)
    }

    /// Context for residuals up to `order` with `δ Δ` transport.
    pub fn correction_context(&self, order: u8) -> Result<CorrectionContext> {
        Ok(CorrectionContext::new(self.sps()?)
            .with_transport(LinearTransport::scalar(3, self.params.delta), TransportScaling::OrderOne)?
            .with_second_order(order >= 2))
    }

    pub fn solve(&self, kind: ScenarioKind, cfg: &SolverConfig) -> Result<MarchResult> {
        let initial = self.scenarios.get(kind).initial_profile(cfg.n_interior)?;
        let sys = semidiscretize(&self.model, self.params.delta, &initial)?;
        march_to_steady(&sys, cfg, &initial)
    }

    pub fn report(&self, profile: &Profile1D, order: u8) -> Result<ResidualReport> {
        let decomposed = profile.transformed(&self.map)?;
        residual_report(&self.correction_context(order)?, &decomposed)
    }

    pub fn run(&self, kind: ScenarioKind, cfg: &SolverConfig, order: u8) -> Result<ScenarioRun> {
        let march = self.solve(kind, cfg)?;
        let decomposed = march.profile.transformed(&self.map)?;
        let report = residual_report(&self.correction_context(order)?, &decomposed)?;
        Ok(ScenarioRun {
            kind,
            march,
            decomposed,
            report,
        })
    }

    /// Header lines shared by all benchmark outputs.
    pub fn metadata(&self, cfg: &SolverConfig) -> Metadata {
        let eq: Vec<String> = self.equilibrium.iter().map(|v| format!("{v:.16e}")).collect();
        Metadata::new()
            .with("code_version", env!("CARGO_PKG_VERSION"))
            .with("model", "michaelis-menten")
            .with("parameters", self.params.describe())
            .with("z_equation", Z_EQUATION_NOTE)
            .with("equilibrium", eq.join(" "))
            .with("gql_mode", self.decomposition.source.describe())
            .with("gql_split", format!("m_f={} m_s={}", self.decomposition.m_f(), self.decomposition.m_s()))
            .with("epsilon", format!("{:.16e}", self.epsilon))
            .with(
                "epsilon_source",
                if self.epsilon_overridden { "override" } else { "gql estimate" },
            )
            .with("grid", format!("n_interior={} h={:.16e}", cfg.n_interior, 1.0 / (cfg.n_interior as f64 + 1.0)))
            .with(
                "integrator",
                format!(
                    "{} dt0={} growth={} dt_max={} newton_tol={} steady_tol={}",
                    cfg.scheme.name(),
                    cfg.dt,
                    cfg.dt_growth,
                    cfg.dt_max,
                    cfg.newton_tol,
                    cfg.steady_tol
                ),
            )
            .with("laplacian_h1", LAPLACIAN_H1_NOTE)
    }
}
