//! Run configuration: TOML file, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use redimlab::mm::{MmParams, ScenarioKind};
use redimlab::pde::SolverConfig;
use serde::{Deserialize, Serialize};

pub const OUT_ENV: &str = "REDIMLAB_OUT";
pub const DEFAULT_OUT: &str = "redimlab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Mm,
    LinearTest,
    HeatTest,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Mm => "mm",
            ModelKind::LinearTest => "linear-test",
            ModelKind::HeatTest => "heat-test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioArg {
    #[default]
    Far,
    Near,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Far => ScenarioKind::Far,
            ScenarioArg::Near => ScenarioKind::Near,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum, global = true)]
    pub model: Option<ModelKind>,
    #[arg(long, value_enum, global = true)]
    pub scenario: Option<ScenarioArg>,
    /// Residual order (0, 1 or 2).
    #[arg(long, global = true)]
    pub order: Option<u8>,
    /// Number of interior grid points.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub tmax: Option<f64>,
    #[arg(long = "steady-tol", global = true)]
    pub steady_tol: Option<f64>,
    /// Override of the GQL ε estimate.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Output directory (default: $REDIMLAB_OUT, then ./redimlab-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Matrix of the linear test model, rows separated by ';'.
    #[arg(long = "linear-matrix", global = true)]
    pub linear_matrix: Option<String>,
}

/// Contents of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelKind>,
    pub scenario: Option<ScenarioArg>,
    pub order: Option<u8>,
    pub epsilon: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub linear_matrix: Option<String>,
    pub solver: Option<SolverConfig>,
    pub params: Option<MmParams>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub scenario: ScenarioArg,
    pub order: u8,
    pub epsilon: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub linear_matrix: Option<String>,
    pub solver: SolverConfig,
    pub params: MmParams,
    /// Whether `t_max` came from the file or a flag.
    pub tmax_given: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs, env_out: Option<PathBuf>) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let mut solver = file.solver.clone().unwrap_or_default();
        let tmax_given = args.tmax.is_some() || file.solver.is_some_and(|s| s.t_max != SolverConfig::default().t_max);
        if let Some(n) = args.grid {
            solver.n_interior = n;
        }
        if let Some(dt) = args.dt {
            solver.dt = dt;
        }
        if let Some(t) = args.tmax {
            solver.t_max = t;
        }
        if let Some(t) = args.steady_tol {
            solver.steady_tol = t;
        }
        let order = args.order.or(file.order).unwrap_or(1);
        if order > 2 {
            return Err(ConfigError(format!("order must be 0, 1 or 2, got {order}")));
        }
        let params = file.params.unwrap_or_default();
        params.validate().map_err(|e| ConfigError(e.to_string()))?;
        solver.validate().map_err(|e| ConfigError(e.to_string()))?;
        let cfg = Self {
            model: args.model.or(file.model).unwrap_or_default(),
            scenario: args.scenario.or(file.scenario).unwrap_or_default(),
            order,
            epsilon: args.epsilon.or(file.epsilon),
            out: args
                .out
                .clone()
                .or(file.out)
                .or(env_out)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            seed: args.seed.or(file.seed).unwrap_or(42),
            linear_matrix: args.linear_matrix.clone().or(file.linear_matrix),
            solver,
            params,
            tmax_given,
        };
        if let Some(e) = cfg.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(ConfigError(format!("epsilon must lie in (0, 1), got {e}")));
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "model = \"linear-test\"\norder = 2\nseed = 5\n[solver]\nn_interior = 49\ndt = 0.01\n",
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(path),
            order: Some(0),
            grid: Some(99),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args, None).unwrap();
        assert_eq!(cfg.model, ModelKind::LinearTest);
        assert_eq!(cfg.order, 0);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.solver.n_interior, 99);
        assert_eq!(cfg.solver.dt, 0.01);
        assert!(!cfg.tmax_given);
    }

    #[test]
    fn output_dir_precedence() {
        let env = Some(PathBuf::from("from-env"));
        let cfg = RunConfig::resolve(&CommonArgs::default(), env.clone()).unwrap();
        assert_eq!(cfg.out, PathBuf::from("from-env"));
        let args = CommonArgs {
            out: Some("flag".into()),
            ..Default::default()
        };
        assert_eq!(RunConfig::resolve(&args, env).unwrap().out, PathBuf::from("flag"));
        assert_eq!(RunConfig::resolve(&CommonArgs::default(), None).unwrap().out, PathBuf::from(DEFAULT_OUT));
    }

    #[test]
    fn bad_values_are_rejected() {
        let args = CommonArgs {
            order: Some(3),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args, None).is_err());
        let args = CommonArgs {
            dt: Some(-1.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args, None).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "colour = \"blue\"\n").unwrap();
        let args = CommonArgs {
            config: Some(path),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args, None).is_err());
    }
}
