//! Self-checks of the whole toolchain with a machine-readable summary.
//!
//! Every check returns one or more [`CheckResult`] rows. Failures never abort
//! the run; an evaluation error becomes a failed row carrying the message.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmark::{decomposed_labels, MmBenchmark, ScenarioRun};
use crate::calculus::{fd_jacobian, DEFAULT_FIRST_STEP, DEFAULT_SECOND_STEP};
use crate::error::{Error, Result};
use crate::export::{fmt_f64, write_file, write_table, Metadata};
use crate::gql::{fast_rate_quadratic, CoordinateMap};
use crate::linalg::max_principal_angle_deg;
use crate::manifold::{ode_residuals, residual_report, CorrectionContext, TransportScaling};
use crate::mm::{self, MmParams, ScenarioKind, PRINTED_H0_BRACKET};
use crate::model::PartitionedState;
use crate::pde::{integrate, semidiscretize, write_profiles_csv, Scheme, SolverConfig};
use crate::testsystems::{heat_exact, heat_initial, heat_model, linear_sps, linear_sps_manifold, LinearReactionDiffusion};

pub const EIGEN_TOL: f64 = 1e-10;
pub const MIN_GAP: f64 = 5.0;
pub const ROUNDTRIP_TOL: f64 = 0.02;
pub const ANGLE_TOL_DEG: f64 = 5.0;
pub const COEFF_TOL: f64 = 0.05;
pub const H1_SLOPE_MIN: f64 = 1.8;
pub const H2_SLOPE_MIN: f64 = 2.8;
pub const IMPROVEMENT_MIN: f64 = 0.8;
pub const HEAT_TOL: f64 = 1e-3;
pub const REFINEMENT_BAND: (f64, f64) = (3.0, 5.0);
pub const JACOBIAN_TOL: f64 = 1e-6;
pub const SYMMETRY_TOL: f64 = 1e-5;

pub const EPSILON_SWEEP: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub seed: u64,
    /// Interior points of the benchmark profiles.
    pub n_interior: usize,
    /// Perturbs the printed transform after its inverse is formed.
    pub corrupt_transform: bool,
    pub solver: SolverConfig,
    pub params: MmParams,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            n_interior: 199,
            corrupt_transform: false,
            solver: SolverConfig::default(),
            params: MmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(id: &str, name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            passed,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn below(id: &str, name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(id, name, value < threshold, value, threshold, detail)
    }

    fn above(id: &str, name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self::new(id, name, value >= threshold, value, threshold, detail)
    }

    fn error(id: &str, name: &str, err: &Error) -> Self {
        Self::new(id, name, false, f64::NAN, f64::NAN, format!("error: {err}"))
    }

    /// The criterion this row belongs to (`"A2"` for `"A2.roundtrip"`).
    pub fn criterion(&self) -> &str {
        self.id.split('.').next().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl ValidationSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Whether every row of criterion `id` passed (false when there is none).
    pub fn criterion_passed(&self, id: &str) -> bool {
        let rows: Vec<_> = self.checks.iter().filter(|c| c.criterion() == id).collect();
        !rows.is_empty() && rows.iter().all(|c| c.passed)
    }
}

fn guard(id: &str, name: &str, f: impl FnOnce() -> Result<Vec<CheckResult>>) -> Vec<CheckResult> {
    f().unwrap_or_else(|e| vec![CheckResult::error(id, name, &e)])
}

/// Roots of `λ³ + a λ² + b λ + c` by Durand–Kerner, polished with Newton.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> Vec<Complex64> {
    let p = |z: Complex64| ((z + a) * z + b) * z + c;
    let dp = |z: Complex64| (z * 3.0 + 2.0 * a) * z + b;
    let scale = 1.0 + a.abs().max(b.abs()).max(c.abs());
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..3).map(|k| seed.powu(k as u32) * scale).collect();
    for _ in 0..500 {
        let mut change = 0.0f64;
        for i in 0..3 {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = p(z[i]) / den;
            z[i] -= step;
            change = change.max(step.norm() / z[i].norm().max(1.0));
        }
        if change < 1e-16 {
            break;
        }
    }
    for r in z.iter_mut() {
        for _ in 0..3 {
            let d = dp(*r);
            if d.norm() == 0.0 {
                break;
            }
            *r -= p(*r) / d;
        }
    }
    z
}

/// Characteristic polynomial coefficients `(a, b, c)` of a 3×3 matrix.
pub fn char_poly_3(t: &DMatrix<f64>) -> (f64, f64, f64) {
    let tr = t.trace();
    let minors = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)] + t[(0, 0)] * t[(2, 2)] - t[(0, 2)] * t[(2, 0)]
        + t[(1, 1)] * t[(2, 2)]
        - t[(1, 2)] * t[(2, 1)];
    (-tr, minors, -t.determinant())
}

/// Largest distance from a value in `a` to its nearest value in `b`, both ways.
fn set_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_way = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Decomposition split, gap, ε and eigenvalues.
pub fn check_a1(bench: &MmBenchmark) -> Vec<CheckResult> {
    guard("A1", "gql decomposition", || {
        let d = &bench.decomposition;
        let split_ok = d.m_f() == 1 && d.m_s() == 2;
        let (a, b, c) = char_poly_3(&d.t);
        let roots = cubic_roots(a, b, c);
        let eig: Vec<Complex64> = d.lambda_fast.iter().chain(&d.lambda_slow).copied().collect();
        let dist = set_distance(&eig, &roots);
        Ok(vec![
            CheckResult::new(
                "A1.split",
                "split is 1 fast / 2 slow",
                split_ok,
                d.m_f() as f64,
                1.0,
                format!("m_f={} m_s={}", d.m_f(), d.m_s()),
            ),
            CheckResult::new(
                "A1.gap",
                "gap ratio at the split",
                d.gap_ratio > MIN_GAP,
                d.gap_ratio,
                MIN_GAP,
                format!("consecutive ratios {:?}", d.ratios),
            ),
            CheckResult::below("A1.epsilon", "epsilon estimate below one", d.epsilon, 1.0, ""),
            CheckResult::below(
                "A1.eigenvalues",
                "eigenvalues match characteristic polynomial roots",
                dist,
                EIGEN_TOL,
                format!("{} eigenvalues", eig.len()),
            ),
        ])
    })
}

/// The printed transform used by the coefficient and roundtrip checks.
pub fn printed_map(corrupt: bool) -> Result<CoordinateMap> {
    let mut map = mm::printed_coordinates()?;
    if corrupt {
        map.z[(0, 1)] += 0.25;
        map.z[(2, 0)] -= 0.25;
    }
    Ok(map)
}

/// Printed transform against its inverse and against the GQL subspaces.
pub fn check_a2(bench: &MmBenchmark, corrupt: bool) -> Vec<CheckResult> {
    guard("A2", "transform consistency", || {
        let map = printed_map(corrupt)?;
        let d = &bench.decomposition;
        let p_fast = map.z.columns(0, 1).into_owned();
        let p_slow = map.z.columns(1, 2).into_owned();
        let fast = max_principal_angle_deg(&d.zf, &p_fast);
        let slow = max_principal_angle_deg(&d.zs_tilde.transpose(), &p_slow);
        let invariant = max_principal_angle_deg(&d.zs, &p_slow);
        Ok(vec![
            CheckResult::below(
                "A2.roundtrip",
                "printed matrix times inverse is identity",
                map.roundtrip_defect(),
                ROUNDTRIP_TOL,
                if corrupt { "transform corrupted" } else { "" },
            ),
            CheckResult::below("A2.fast_angle", "fast subspace angle (deg)", fast, ANGLE_TOL_DEG, ""),
            CheckResult::below(
                "A2.slow_angle",
                "slow coordinate subspace angle (deg)",
                slow,
                ANGLE_TOL_DEG,
                format!("slow invariant subspace angle {invariant:.3} deg"),
            ),
        ])
    })
}

/// Quadratic expansion of the fast rate under the printed transform.
pub fn check_a3(bench: &MmBenchmark) -> Vec<CheckResult> {
    guard("A3", "H0 coefficients", || {
        let q = fast_rate_quadratic(&printed_map(false)?, &bench.model, decomposed_labels())?;
        let mut worst = (0.0f64, "");
        for (name, printed) in PRINTED_H0_BRACKET {
            let got = q.get(name).ok_or_else(|| Error::Unsupported(format!("monomial {name}")))?;
            let dev = (got - printed).abs();
            if dev >= worst.0 {
                worst = (dev, name);
            }
        }
        Ok(vec![CheckResult::below(
            "A3.coefficients",
            "max coefficient deviation",
            worst.0,
            COEFF_TOL,
            format!("worst monomial {}", worst.1),
        )])
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Residual maxima `(H₁, H₂)` of the linear SPS on its exact manifold.
pub fn linear_sps_residuals(eps: f64) -> Result<(f64, f64)> {
    let ctx = CorrectionContext::new(linear_sps(eps)?).with_second_order(true);
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    for u in [0.25, 0.5, 1.0, 2.0] {
        let s = PartitionedState::new(
            DVector::from_element(1, linear_sps_manifold(eps, u)),
            DVector::from_element(1, u),
        );
        let (_, h1, h2) = ode_residuals(&ctx, &s)?;
        r1 = r1.max(h1.amax());
        r2 = r2.max(h2.map(|h| h.amax()).unwrap_or(f64::NAN));
    }
    Ok((r1, r2))
}

/// Residual maxima `(H₁, H₂)` of the linear reaction–diffusion test.
pub fn linear_rd_residuals(eps: f64, n_interior: usize) -> Result<(f64, f64)> {
    let sys = LinearReactionDiffusion::default();
    let ctx = CorrectionContext::new(sys.sps(eps)?)
        .with_transport(sys.transport(), TransportScaling::OrderOne)?
        .with_second_order(true);
    let r = residual_report(&ctx, &sys.manifold_profile(eps, n_interior)?)?;
    Ok((r.max_h1(), r.max_h2().unwrap_or(f64::NAN)))
}

/// Order of accuracy of the first- and second-order residuals.
pub fn check_a4() -> Vec<CheckResult> {
    let mut out = Vec::new();
    type Residuals = Box<dyn Fn(f64) -> Result<(f64, f64)>>;
    let cases: [(&str, &str, Residuals); 2] = [
        ("sps", "linear SPS", Box::new(linear_sps_residuals)),
        ("rd", "linear reaction-diffusion", Box::new(|e| linear_rd_residuals(e, 49))),
    ];
    for (tag, label, f) in cases {
        let rows = guard(&format!("A4.{tag}"), label, || {
            let mut h1 = Vec::new();
            let mut h2 = Vec::new();
            for &e in &EPSILON_SWEEP {
                let (a, b) = f(e)?;
                h1.push(a);
                h2.push(b);
            }
            let s1 = loglog_slope(&EPSILON_SWEEP, &h1);
            let s2 = loglog_slope(&EPSILON_SWEEP, &h2);
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
            Ok(vec![
                CheckResult::above(
                    &format!("A4.{tag}_h1"),
                    &format!("{label} H1 slope"),
                    s1,
                    H1_SLOPE_MIN,
                    format!("max |H1| {}", fmt(&h1)),
                ),
                CheckResult::above(
                    &format!("A4.{tag}_h2"),
                    &format!("{label} H2 slope"),
                    s2,
                    H2_SLOPE_MIN,
                    format!("max |H2| {}", fmt(&h2)),
                ),
            ])
        });
        out.extend(rows);
    }
    out
}

/// First-order improvement on the slow portion of the far profile.
pub fn check_a5(far: &ScenarioRun) -> Vec<CheckResult> {
    let frac = far.report.first_order_improvement();
    vec![CheckResult::above(
        "A5.improvement",
        "fraction of slow points where H1 <= H0",
        frac,
        IMPROVEMENT_MIN,
        format!("converged {:?} over {} points", far.march.profile.converged, far.report.len()),
    )]
}

/// Near scenario residual maxima strictly below the far ones.
pub fn check_a6(far: &ScenarioRun, near: &ScenarioRun) -> Vec<CheckResult> {
    let (f0, n0) = (far.report.max_h0(), near.report.max_h0());
    let (f1, n1) = (far.report.max_h1(), near.report.max_h1());
    vec![
        CheckResult::new(
            "A6.h0",
            "near max H0 below far max H0",
            n0 < f0,
            n0,
            f0,
            format!("far {f0:.6e} near {n0:.6e}"),
        ),
        CheckResult::new(
            "A6.h1",
            "near max H1 below far max H1",
            n1 < f1,
            n1,
            f1,
            format!("far {f1:.6e} near {n1:.6e}"),
        ),
    ]
}

pub const HEAT_DELTA: f64 = 0.01;
pub const HEAT_T: f64 = 0.1;

/// Max-norm error of the heat solution at `HEAT_T` relative to the closed form.
pub fn heat_error(cells: usize, dt: f64, scheme: Scheme) -> Result<f64> {
    let initial = heat_initial(cells - 1)?;
    let sys = semidiscretize(&heat_model(), HEAT_DELTA, &initial)?;
    let cfg = SolverConfig {
        dt,
        scheme,
        ..SolverConfig::default()
    };
    let r = integrate(&sys, &cfg, &initial, HEAT_T)?;
    let mut err = 0.0f64;
    let mut peak = 0.0f64;
    for (i, &x) in r.profile.grid_x.iter().enumerate() {
        let exact = heat_exact(HEAT_DELTA, HEAT_T, x);
        err = err.max((r.profile.fields[(0, i)] - exact).abs());
        peak = peak.max(exact.abs());
    }
    Ok(err / peak)
}

/// Heat equation accuracy and spatial refinement.
pub fn check_a7() -> Vec<CheckResult> {
    let mut out = guard("A7.heat", "heat solution", || {
        let e = heat_error(200, 1e-3, Scheme::ImplicitEuler)?;
        Ok(vec![CheckResult::below(
            "A7.heat",
            "relative error against closed form",
            e,
            HEAT_TOL,
            "200 cells, dt=1e-3, implicit euler",
        )])
    });
    out.extend(guard("A7.refinement", "spatial refinement", || {
        let errs: Vec<f64> = [50, 100, 200]
            .iter()
            .map(|&c| heat_error(c, 1e-3, Scheme::Trapezoidal))
            .collect::<Result<_>>()?;
        let (lo, hi) = REFINEMENT_BAND;
        Ok(errs
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let ratio = w[0] / w[1];
                CheckResult::new(
                    &format!("A7.refinement_{}", k + 1),
                    "error ratio per grid doubling",
                    (lo..=hi).contains(&ratio),
                    ratio,
                    lo,
                    format!("errors {:.6e} {:.6e}, band [{lo}, {hi}]", w[0], w[1]),
                )
            })
            .collect())
    }));
    out
}

/// Uniform states in `[0, 2]³` from a seeded stream.
pub fn random_states(seed: u64, count: usize) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(3, |_, _| rng.gen_range(0.0..=2.0)))
        .collect()
}

/// Analytic against finite-difference derivatives of the MM field.
pub fn check_a8(params: &MmParams, seed: u64) -> Vec<CheckResult> {
    guard("A8", "differentiation", || {
        let states = random_states(seed, 100);
        let mut jac_err = 0.0f64;
        let mut asym = 0.0f64;
        for s in &states {
            let fd = fd_jacobian(|x| mm::mm_rhs(params, x), s, DEFAULT_FIRST_STEP)?;
            jac_err = jac_err.max((mm::mm_jacobian(params, s) - fd).amax());
            // derivative of each analytic Jacobian row gives one Hessian slice
            for row in 0..3 {
                let h = fd_jacobian(
                    |x| mm::mm_jacobian(params, x).row(row).transpose(),
                    s,
                    DEFAULT_SECOND_STEP,
                )?;
                asym = asym.max((&h - h.transpose()).amax());
            }
        }
        Ok(vec![
            CheckResult::below(
                "A8.jacobian",
                "analytic vs FD Jacobian",
                jac_err,
                JACOBIAN_TOL,
                format!("{} states, seed {seed}", states.len()),
            ),
            CheckResult::below("A8.hessian_symmetry", "Hessian asymmetry", asym, SYMMETRY_TOL, ""),
        ])
    })
}

/// Benchmark plus both stationary runs.
pub struct BenchmarkRuns {
    pub bench: MmBenchmark,
    pub cfg: SolverConfig,
    pub far: ScenarioRun,
    pub near: ScenarioRun,
}

pub fn benchmark_runs(opts: &ValidationOptions) -> Result<BenchmarkRuns> {
    let bench = MmBenchmark::new(opts.params)?;
    let cfg = SolverConfig {
        n_interior: opts.n_interior,
        ..opts.solver.clone()
    };
    let far = bench.run(ScenarioKind::Far, &cfg, 2)?;
    let near = bench.run(ScenarioKind::Near, &cfg, 2)?;
    Ok(BenchmarkRuns { bench, cfg, far, near })
}

/// Runs every check.
pub fn run_validation(opts: &ValidationOptions) -> (ValidationSummary, Option<BenchmarkRuns>) {
    let mut checks = Vec::new();
    let runs = match benchmark_runs(opts) {
        Ok(r) => {
            checks.extend(check_a1(&r.bench));
            checks.extend(check_a2(&r.bench, opts.corrupt_transform));
            checks.extend(check_a3(&r.bench));
            checks.extend(check_a4());
            checks.extend(check_a5(&r.far));
            checks.extend(check_a6(&r.far, &r.near));
            Some(r)
        }
        Err(e) => {
            for (id, name) in [("A1", "gql decomposition"), ("A2", "transform consistency"), ("A3", "H0 coefficients")] {
                checks.push(CheckResult::error(id, name, &e));
            }
            checks.extend(check_a4());
            checks.push(CheckResult::error("A5", "first-order improvement", &e));
            checks.push(CheckResult::error("A6", "near vs far", &e));
            None
        }
    };
    checks.extend(check_a7());
    checks.extend(check_a8(&opts.params, opts.seed));
    (
        ValidationSummary {
            seed: opts.seed,
            checks,
        },
        runs,
    )
}

fn summary_rows(s: &ValidationSummary) -> Vec<Vec<String>> {
    s.checks
        .iter()
        .map(|c| {
            vec![
                c.id.clone(),
                c.name.clone(),
                if c.passed { "pass" } else { "fail" }.into(),
                fmt_f64(c.value),
                fmt_f64(c.threshold),
                c.detail.clone(),
            ]
        })
        .collect()
}

/// Runs the suite and writes `summary.csv`, `summary.json` and the benchmark
/// artifacts into `dir`.
pub fn write_validation(dir: &Path, opts: &ValidationOptions) -> Result<ValidationSummary> {
    let (summary, runs) = run_validation(opts);
    let mut meta = match &runs {
        Some(r) => r.bench.metadata(&r.cfg),
        None => Metadata::new().with("code_version", env!("CARGO_PKG_VERSION")),
    };
    meta.push("seed", opts.seed);
    meta.push("corrupt_transform", opts.corrupt_transform);
    let headers: Vec<String> = ["id", "name", "status", "value", "threshold", "detail"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_file(&dir.join("summary.csv"), |w| write_table(w, &meta, &headers, summary_rows(&summary)))?;
    write_file(&dir.join("summary.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &summary).map_err(|e| Error::Io(e.to_string()))?;
        w.push(b'\n');
        Ok(())
    })?;
    if let Some(r) = &runs {
        write_file(&dir.join("gql.json"), |w| {
            serde_json::to_writer_pretty(&mut *w, &r.bench.decomposition.record()).map_err(|e| Error::Io(e.to_string()))?;
            w.push(b'\n');
            Ok(())
        })?;
        let labels = r.bench.model.labels().to_vec();
        let dl = decomposed_labels();
        for run in [&r.far, &r.near] {
            let name = run.kind.name();
            let mut m = meta.clone();
            m.push("scenario", name);
            m.push("converged", format!("{:?}", run.march.profile.converged));
            write_file(&dir.join(format!("profile_{name}.csv")), |w| {
                write_profiles_csv(w, &m, std::slice::from_ref(&run.march.profile), &labels, Some((&r.bench.map, &dl)))
            })?;
            write_file(&dir.join(format!("residuals_{name}.csv")), |w| run.report.write_csv(w, &m))?;
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_roots_of_known_polynomial() {
        // (λ + 1)(λ² + 2λ + 5): roots −1, −1 ± 2i
        let roots = cubic_roots(3.0, 7.0, 5.0);
        let expect = [
            Complex64::new(-1.0, 0.0),
            Complex64::new(-1.0, 2.0),
            Complex64::new(-1.0, -2.0),
        ];
        assert!(set_distance(&roots, &expect) < 1e-13);
    }

    #[test]
    fn char_poly_of_triangular_matrix() {
        let t = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 4.0, 0.0, 3.0, 5.0, 0.0, 0.0, -1.0]);
        let (a, b, c) = char_poly_3(&t);
        // (λ − 2)(λ − 3)(λ + 1) = λ³ − 4λ² + λ + 6
        assert_eq!((a, b, c), (-4.0, 1.0, 6.0));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1e-1, 1e-2, 1e-3];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn corruption_breaks_roundtrip_only() {
        let bench = MmBenchmark::new(MmParams::default()).unwrap();
        let good = check_a2(&bench, false);
        let bad = check_a2(&bench, true);
        assert!(good[0].passed);
        assert!(!bad[0].passed);
        assert_eq!(bad[0].id, "A2.roundtrip");
    }

    #[test]
    fn seeded_states_are_reproducible() {
        assert_eq!(random_states(7, 5), random_states(7, 5));
        assert_ne!(random_states(7, 5), random_states(8, 5));
        assert!(random_states(1, 50).iter().all(|s| s.iter().all(|v| (0.0..=2.0).contains(v))));
    }

    #[test]
    fn linear_orders() {
        let rows = check_a4();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!(r.passed, "{r:?}");
        }
    }
}
