//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DVector;
use redimlab::benchmark::{decomposed_labels, MmBenchmark};
use redimlab::export::{fmt_f64, fmt_opt, write_file, write_table, Metadata};
use redimlab::gql::{decompose, fast_rate_quadratic, GqlDecomposition, LinearizationMode, SortedSpectrum};
use redimlab::mm::{printed_coordinates, ScenarioKind, PRINTED_H0_BRACKET};
use redimlab::model::ModelDefinition;
use redimlab::pde::{integrate, semidiscretize, write_profiles_csv, SolverConfig};
use redimlab::testsystems::{default_linear_test_matrix, heat_exact, heat_initial, heat_model, linear_test_model, parse_matrix};
use redimlab::validation::{write_validation, ValidationOptions};
use redimlab::Error;

use crate::config::{ModelKind, RunConfig};

/// Outcome classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::InvalidSplit { .. } | Error::SplitsConjugatePair { .. } | Error::Io(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Numerical(other.to_string()),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

fn unsupported(cmd: &str, model: ModelKind) -> Failure {
    Failure::Config(format!("`{cmd}` does not support model {}", model.name()))
}

fn benchmark(cfg: &RunConfig) -> Result<MmBenchmark, Failure> {
    Ok(MmBenchmark::new(cfg.params)?.with_epsilon(cfg.epsilon)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
        w.push(b'\n');
        Ok(())
    })?;
    Ok(())
}

fn gap_report(t: &nalgebra::DMatrix<f64>) -> String {
    match SortedSpectrum::of(t) {
        Ok(s) => {
            let moduli: Vec<String> = s.values.iter().map(|v| format!("{:.6e}", v.norm())).collect();
            let ratios: Vec<String> = s.ratios().iter().map(|r| format!("{r:.6}")).collect();
            format!("moduli [{}] consecutive ratios [{}]", moduli.join(", "), ratios.join(", "))
        }
        Err(e) => format!("spectrum unavailable: {e}"),
    }
}

fn print_decomposition(d: &GqlDecomposition) {
    println!("split: m_f={} m_s={}", d.m_f(), d.m_s());
    let show = |v: &[num_complex::Complex64]| v.iter().map(|c| format!("{:.6e}{:+.6e}i", c.re, c.im)).collect::<Vec<_>>().join(", ");
    println!("fast eigenvalues: {}", show(&d.lambda_fast));
    println!("slow eigenvalues: {}", show(&d.lambda_slow));
    println!("gap ratio: {:.6}", d.gap_ratio);
    println!("epsilon: {:.6e}", d.epsilon);
}

pub fn gql(cfg: &RunConfig, fast_dim: Option<usize>) -> CmdResult {
    let (model, mode, split, label): (ModelDefinition, LinearizationMode, Option<usize>, &str) = match cfg.model {
        ModelKind::Mm => {
            let bench = benchmark(cfg)?;
            let eq = bench.equilibrium.clone();
            (bench.model, LinearizationMode::JacobianAt(eq), fast_dim.or(Some(1)), "michaelis-menten")
        }
        ModelKind::LinearTest => {
            let m = match &cfg.linear_matrix {
                Some(text) => parse_matrix(text)?,
                None => default_linear_test_matrix(),
            };
            let n = m.nrows();
            (linear_test_model(m)?, LinearizationMode::JacobianAt(DVector::zeros(n)), fast_dim, "linear-test")
        }
        ModelKind::HeatTest => return Err(unsupported("gql", cfg.model)),
    };
    let d = match decompose(&model, &mode, split) {
        Ok(d) => d,
        Err(e) => {
            if let LinearizationMode::JacobianAt(p) = &mode {
                if let Ok(t) = model.jacobian(p) {
                    eprintln!("gap report: {}", gap_report(&t));
                }
            }
            return Err(e.into());
        }
    };
    print_decomposition(&d);
    let meta = Metadata::new()
        .with("code_version", env!("CARGO_PKG_VERSION"))
        .with("model", label)
        .with("gql_mode", d.source.describe())
        .with("gql_split", format!("m_f={} m_s={}", d.m_f(), d.m_s()))
        .with("epsilon", fmt_f64(d.epsilon));
    write_json(&cfg.out.join("gql.json"), &d.record())?;
    let labels: Vec<String> = if cfg.model == ModelKind::Mm {
        decomposed_labels()
    } else {
        (0..model.dim()).map(|i| format!("w{i}")).collect()
    };
    let q = fast_rate_quadratic(&d.coordinates(), &model, labels.clone())?;
    let mut headers = vec!["monomial".to_string(), "coefficient".into()];
    let rows: Vec<Vec<String>> = if cfg.model == ModelKind::Mm {
        headers.extend(["printed_transform".to_string(), "printed_bracket".into()]);
        let p = fast_rate_quadratic(&printed_coordinates()?, &model, labels)?;
        q.terms()
            .into_iter()
            .map(|(name, c)| {
                let bracket = PRINTED_H0_BRACKET.iter().find(|(m, _)| *m == name).map(|(_, v)| *v);
                vec![name.clone(), fmt_f64(c), fmt_opt(p.get(&name)), fmt_opt(bracket)]
            })
            .collect()
    } else {
        q.terms().into_iter().map(|(name, c)| vec![name, fmt_f64(c)]).collect()
    };
    let path = cfg.out.join("fast_rhs_coefficients.csv");
    write_file(&path, |w| write_table(w, &meta, &headers, rows))?;
    println!("wrote {} and {}", cfg.out.join("gql.json").display(), path.display());
    Ok(())
}

fn heat(cfg: &RunConfig) -> CmdResult {
    let t_end = if cfg.tmax_given { cfg.solver.t_max } else { 0.1 };
    let initial = heat_initial(cfg.solver.n_interior)?;
    let sys = semidiscretize(&heat_model(), cfg.solver.delta, &initial)?;
    let r = integrate(&sys, &cfg.solver, &initial, t_end)?;
    let meta = Metadata::new()
        .with("code_version", env!("CARGO_PKG_VERSION"))
        .with("model", "heat-test")
        .with("parameters", format!("delta={}", cfg.solver.delta))
        .with("grid", format!("n_interior={}", cfg.solver.n_interior))
        .with("integrator", format!("{} dt={}", cfg.solver.scheme.name(), cfg.solver.dt))
        .with("t", fmt_f64(r.profile.time));
    let mut err = 0.0f64;
    let mut peak = 0.0f64;
    let rows: Vec<Vec<String>> = r
        .profile
        .grid_x
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let u = r.profile.fields[(0, i)];
            let exact = heat_exact(cfg.solver.delta, r.profile.time, x);
            err = err.max((u - exact).abs());
            peak = peak.max(exact.abs());
            vec![fmt_f64(x), fmt_f64(u), fmt_f64(exact), fmt_f64((u - exact).abs())]
        })
        .collect();
    let headers: Vec<String> = ["x", "u", "exact", "abs_error"].iter().map(|s| s.to_string()).collect();
    let path = cfg.out.join("profile_heat.csv");
    write_file(&path, |w| write_table(w, &meta, &headers, rows))?;
    println!("t = {} relative max error {:.6e}", r.profile.time, err / peak);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn simulate(cfg: &RunConfig, snapshot_every: usize) -> CmdResult {
    match cfg.model {
        ModelKind::HeatTest => return heat(cfg),
        ModelKind::LinearTest => return Err(unsupported("simulate", cfg.model)),
        ModelKind::Mm => {}
    }
    let bench = benchmark(cfg)?;
    let kind: ScenarioKind = cfg.scenario.into();
    let solver = SolverConfig {
        snapshot_every,
        ..cfg.solver.clone()
    };
    let march = bench.solve(kind, &solver)?;
    let converged = march.profile.converged == Some(true);
    let mut meta = bench.metadata(&solver);
    meta.push("scenario", kind.name());
    meta.push("converged", converged);
    meta.push("steps", march.steps);
    meta.push("rhs_norm", fmt_f64(march.rhs_norm));
    let mut profiles = march.snapshots.clone();
    if profiles.last().map(|p| p.time) != Some(march.profile.time) {
        profiles.push(march.profile.clone());
    }
    let labels = bench.model.labels().to_vec();
    let dl = decomposed_labels();
    let series = cfg.out.join(format!("snapshots_{}.csv", kind.name()));
    write_file(&series, |w| write_profiles_csv(w, &meta, &profiles, &labels, Some((&bench.map, &dl))))?;
    let last = cfg.out.join(format!("profile_{}.csv", kind.name()));
    write_file(&last, |w| write_profiles_csv(w, &meta, std::slice::from_ref(&march.profile), &labels, Some((&bench.map, &dl))))?;
    println!(
        "{}: {} steps, max |rhs| {:.3e}, converged {converged}",
        kind.name(),
        march.steps,
        march.rhs_norm
    );
    println!("wrote {} and {}", series.display(), last.display());
    if converged {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "no stationary state reached by t = {} (max |rhs| {:.3e}); partial data kept in {}",
            march.profile.time,
            march.rhs_norm,
            last.display()
        )))
    }
}

/// Solve and residual evaluation of one scenario, written under `dir`.
fn residual_run(bench: &MmBenchmark, solver: &SolverConfig, kind: ScenarioKind, order: u8, dir: &Path) -> Result<ResidualLine, Failure> {
    let run = bench.run(kind, solver, order)?;
    let converged = run.march.profile.converged == Some(true);
    let mut meta = bench.metadata(solver);
    meta.push("scenario", kind.name());
    meta.push("order", order);
    meta.push("converged", converged);
    let path = dir.join(format!("residuals_{}_order{order}.csv", kind.name()));
    write_file(&path, |w| run.report.write_csv_upto(w, &meta, order))?;
    if !run.report.turning_points.is_empty() {
        eprintln!("{}: {} turning points flagged", kind.name(), run.report.turning_points.len());
    }
    Ok(ResidualLine {
        scenario: kind.name(),
        epsilon: bench.epsilon,
        converged,
        max_h0: run.report.max_h0(),
        max_h1: (order >= 1).then(|| run.report.max_h1()),
        max_h2: if order >= 2 { run.report.max_h2() } else { None },
        path,
    })
}

struct ResidualLine {
    scenario: &'static str,
    epsilon: f64,
    converged: bool,
    max_h0: f64,
    max_h1: Option<f64>,
    max_h2: Option<f64>,
    path: PathBuf,
}

impl ResidualLine {
    fn print(&self) {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
        println!(
            "{} eps={:.6e}: max H0 {:.6e} max H1 {} max H2 {} -> {}",
            self.scenario,
            self.epsilon,
            self.max_h0,
            opt(self.max_h1),
            opt(self.max_h2),
            self.path.display()
        );
    }
}

pub fn residuals(cfg: &RunConfig) -> CmdResult {
    if cfg.model != ModelKind::Mm {
        return Err(unsupported("residuals", cfg.model));
    }
    let bench = benchmark(cfg)?;
    let line = residual_run(&bench, &cfg.solver, cfg.scenario.into(), cfg.order, &cfg.out)?;
    line.print();
    if line.converged {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("{} profile did not reach steady state", line.scenario)))
    }
}

pub fn sweep(cfg: &RunConfig, epsilons: &[f64], workers: Option<usize>) -> CmdResult {
    if cfg.model != ModelKind::Mm {
        return Err(unsupported("sweep", cfg.model));
    }
    let base = MmBenchmark::new(cfg.params)?;
    let eps_list: Vec<Option<f64>> = if epsilons.is_empty() {
        vec![cfg.epsilon]
    } else {
        epsilons.iter().map(|&e| Some(e)).collect()
    };
    let mut jobs = Vec::new();
    for (k, eps) in eps_list.iter().enumerate() {
        let bench = base.clone().with_epsilon(*eps)?;
        for kind in [ScenarioKind::Far, ScenarioKind::Near] {
            jobs.push((k, kind, bench.clone()));
        }
    }
    let threads = workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .clamp(1, jobs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<ResidualLine, Failure>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((k, kind, bench)) = jobs.get(i) else { break };
                let dir = cfg.out.join(format!("run{k}"));
                let r = residual_run(bench, &cfg.solver, *kind, cfg.order, &dir);
                results.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    let results = results.into_inner().expect("result slots");
    let mut rows = Vec::new();
    let mut failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r.expect("every job ran") {
            Ok(line) => {
                line.print();
                rows.push(vec![
                    jobs[i].0.to_string(),
                    line.scenario.to_string(),
                    fmt_f64(line.epsilon),
                    line.converged.to_string(),
                    fmt_f64(line.max_h0),
                    fmt_opt(line.max_h1),
                    fmt_opt(line.max_h2),
                ]);
                if !line.converged && failure.is_none() {
                    failure = Some(Failure::Numerical(format!("run{} {} did not converge", jobs[i].0, line.scenario)));
                }
            }
            Err(e) => {
                eprintln!("run{} {}: {}", jobs[i].0, jobs[i].1.name(), e.message());
                failure.get_or_insert(e);
            }
        }
    }
    let mut meta = base.metadata(&cfg.solver);
    meta.push("order", cfg.order);
    let headers: Vec<String> = ["run", "scenario", "epsilon", "converged", "max_H0", "max_H1", "max_H2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let path = cfg.out.join("sweep_summary.csv");
    write_file(&path, |w| write_table(w, &meta, &headers, rows))?;
    println!("wrote {}", path.display());
    failure.map_or(Ok(()), Err)
}

pub fn validate(cfg: &RunConfig, corrupt_transform: bool) -> CmdResult {
    let opts = ValidationOptions {
        seed: cfg.seed,
        n_interior: cfg.solver.n_interior,
        corrupt_transform,
        solver: cfg.solver.clone(),
        params: cfg.params,
    };
    let summary = write_validation(&cfg.out, &opts)?;
    for c in &summary.checks {
        println!(
            "{} {:<24} value {:.6e} threshold {:.6e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.value,
            c.threshold,
            c.detail
        );
    }
    println!("wrote {}", cfg.out.join("summary.csv").display());
    let failed: Vec<&str> = summary.failures().iter().map(|c| c.id.as_str()).collect();
    if failed.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Numerical(format!("failed checks: {}", failed.join(", "))))
    }
}
