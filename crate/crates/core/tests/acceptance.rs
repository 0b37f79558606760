//! Acceptance suite: one line per criterion, nonzero exit on any failure.
//! Expected values come from oracles written here, independent of the
//! library routines they check.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use redimlab::benchmark::MmBenchmark;
use redimlab::manifold::{ode_residuals, residual_report, CorrectionContext, TransportScaling};
use redimlab::mm::{self, MmParams, ScenarioKind, PRINTED_H0_BRACKET, PRINTED_TRANSFORM};
use redimlab::model::PartitionedState;
use redimlab::pde::{integrate, semidiscretize, Scheme, SolverConfig};
use redimlab::testsystems::{heat_initial, heat_model, linear_sps, LinearReactionDiffusion};
use redimlab::validation::{write_validation, ValidationOptions};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Real roots of a monic cubic by the trigonometric form, complex pair by Cardano.
fn cubic_oracle(a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc < 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let phi = (3.0 * q / (p * r)).acos() / 3.0;
        (0..3)
            .map(|k| (r * (phi - 2.0 * PI * k as f64 / 3.0).cos() + shift, 0.0))
            .collect()
    } else {
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        let re = -(u + v) / 2.0 + shift;
        let im = (u - v) * 3f64.sqrt() / 2.0;
        vec![(u + v + shift, 0.0), (re, im), (re, -im)]
    }
}

fn mm_equilibrium_closed_form() -> DVector<f64> {
    let y = 3f64.sqrt() - 1.0;
    DVector::from_vec(vec![0.0, y, y])
}

fn a1(b: &MmBenchmark) -> Outcome {
    let t = mm::mm_jacobian(&b.params, &mm_equilibrium_closed_form());
    let tr = t.trace();
    let minors = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)] + t[(0, 0)] * t[(2, 2)] - t[(0, 2)] * t[(2, 0)]
        + t[(1, 1)] * t[(2, 2)]
        - t[(1, 2)] * t[(2, 1)];
    let mut roots = cubic_oracle(-tr, minors, -t.determinant());
    roots.sort_by(|x, y| x.0.hypot(x.1).total_cmp(&y.0.hypot(y.1)).reverse());
    let d = &b.decomposition;
    let lib: Vec<_> = d.lambda_fast.iter().chain(&d.lambda_slow).collect();
    let eig_err = roots
        .iter()
        .zip(&lib)
        .map(|(r, l)| (r.0 - l.re).hypot(r.1 - l.im))
        .fold(0.0, f64::max);
    let m: Vec<f64> = roots.iter().map(|r| r.0.hypot(r.1)).collect();
    let gap = m[0] / m[1];
    let eps = m[1] / m[0];
    let passed = d.m_f() == 1 && d.m_s() == 2 && gap > 5.0 && eps < 1.0 && eig_err < 1e-10 && (d.epsilon - eps).abs() < 1e-10;
    outcome(passed, format!("split {}/{} gap {gap:.3} eps {eps:.4} eigen err {eig_err:.1e}", d.m_f(), d.m_s()))
}

fn angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0).acos().to_degrees()
}

fn a2(b: &MmBenchmark) -> Outcome {
    let p = DMatrix::from_fn(3, 3, |i, j| PRINTED_TRANSFORM[i][j]);
    let inv = p.clone().try_inverse().expect("printed matrix invertible");
    let defect = (&p * &inv - DMatrix::<f64>::identity(3, 3)).amax();
    let col = |j: usize| Vector3::new(p[(0, j)], p[(1, j)], p[(2, j)]);
    let zf = Vector3::new(b.decomposition.zf[(0, 0)], b.decomposition.zf[(1, 0)], b.decomposition.zf[(2, 0)]);
    let fast = angle_deg(&zf, &col(0));
    // the slow coordinate plane is orthogonal to the fast column; compare normals
    let slow = angle_deg(&zf, &col(1).cross(&col(2)));
    outcome(
        defect < 0.02 && fast < 5.0 && slow < 5.0,
        format!("roundtrip {defect:.1e} fast {fast:.3} deg slow {slow:.3} deg"),
    )
}

/// Least-squares quadratic fit on scattered points.
fn a3(b: &MmBenchmark) -> Outcome {
    let p = DMatrix::from_fn(3, 3, |i, j| PRINTED_TRANSFORM[i][j]);
    let row = p.clone().try_inverse().unwrap().row(0).into_owned();
    let f = |w: &DVector<f64>| (&row * mm::mm_rhs(&b.params, &(&p * w)))[0];
    let names = ["1", "U", "V", "W", "U^2", "U*V", "U*W", "V^2", "V*W", "W^2"];
    let basis = |w: &DVector<f64>| {
        let (u, v, x) = (w[0], w[1], w[2]);
        [1.0, u, v, x, u * u, u * v, u * x, v * v, v * x, x * x]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<DVector<f64>> = (0..60).map(|_| DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0))).collect();
    let a = DMatrix::from_fn(samples.len(), 10, |r, c| basis(&samples[r])[c]);
    let y = DVector::from_iterator(samples.len(), samples.iter().map(&f));
    let coef = a.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    let mut worst = 0.0f64;
    for (name, printed) in PRINTED_H0_BRACKET {
        let k = names.iter().position(|n| *n == name).unwrap();
        worst = worst.max((coef[k] - printed).abs());
    }
    let fit_err = (&a * &coef - &y).amax();
    outcome(worst < 0.05 && fit_err < 1e-10, format!("max deviation {worst:.4} fit residual {fit_err:.1e}"))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = x.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>()
}

fn a4() -> Outcome {
    let sweep = [1e-1, 1e-2, 1e-3];
    let (mut s1, mut s2, mut r1, mut r2) = (vec![], vec![], vec![], vec![]);
    let mut oracle_err = 0.0f64;
    let sys = LinearReactionDiffusion::default();
    let n = 49;
    for &eps in &sweep {
        let ctx = CorrectionContext::new(linear_sps(eps).unwrap()).with_second_order(true);
        let u = 1.0;
        let s = PartitionedState::new(DVector::from_element(1, u / (1.0 - eps)), DVector::from_element(1, u));
        let (_, h1, h2) = ode_residuals(&ctx, &s).unwrap();
        // H₁ = −ε² u / (1 − ε) on the exact manifold
        oracle_err = oracle_err.max((h1[0] + eps * eps * u / (1.0 - eps)).abs() / (eps * eps));
        s1.push(h1.amax());
        s2.push(h2.unwrap().amax());

        let ctx = CorrectionContext::new(sys.sps(eps).unwrap())
            .with_transport(sys.transport(), TransportScaling::OrderOne)
            .unwrap()
            .with_second_order(true);
        let prof = sys.manifold_profile(eps, n).unwrap();
        let rep = residual_report(&ctx, &prof).unwrap();
        // H₁ = ε² k a u_t with the discrete u_t = −a u + D Δ_h u
        let k = sys.slope(eps);
        let h = prof.spacing();
        let mut expect = 0.0f64;
        for i in 0..n {
            let ui = prof.fields[(1, i)];
            let l = if i == 0 { prof.left_bc[1] } else { prof.fields[(1, i - 1)] };
            let r = if i + 1 == n { prof.right_bc[1] } else { prof.fields[(1, i + 1)] };
            let ut = -sys.a * ui + sys.diffusion * (l - 2.0 * ui + r) / (h * h);
            expect = expect.max((eps * eps * k * sys.a * ut).abs());
        }
        oracle_err = oracle_err.max((rep.max_h1() - expect).abs() / (eps * eps));
        r1.push(rep.max_h1());
        r2.push(rep.max_h2().unwrap());
    }
    let slopes = [slope(&sweep, &s1), slope(&sweep, &s2), slope(&sweep, &r1), slope(&sweep, &r2)];
    let passed = slopes[0] >= 1.8 && slopes[1] >= 2.8 && slopes[2] >= 1.8 && slopes[3] >= 2.8 && oracle_err < 1e-6;
    outcome(
        passed,
        format!(
            "sps slopes {:.3}/{:.3} rd slopes {:.3}/{:.3} oracle err {oracle_err:.1e}",
            slopes[0], slopes[1], slopes[2], slopes[3]
        ),
    )
}

fn a5(run: &redimlab::benchmark::ScenarioRun) -> Outcome {
    let r = &run.report;
    let half = 0.5 * r.h0.iter().copied().fold(0.0, f64::max);
    let slow: Vec<usize> = (0..r.h0.len()).filter(|&i| r.h0[i] < half).collect();
    let better = slow.iter().filter(|&&i| r.h1[i].is_some_and(|v| v <= r.h0[i])).count();
    let frac = better as f64 / slow.len().max(1) as f64;
    let ok = run.march.profile.converged == Some(true) && r.len() == 199 && frac >= 0.8;
    outcome(ok, format!("fraction {frac:.3} over {} slow points", slow.len()))
}

fn a6(far: &redimlab::benchmark::ScenarioRun, near: &redimlab::benchmark::ScenarioRun) -> Outcome {
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let h1 = |r: &redimlab::manifold::ResidualReport| r.h1.iter().flatten().copied().fold(0.0, f64::max);
    let (f0, n0) = (max(&far.report.h0), max(&near.report.h0));
    let (f1, n1) = (h1(&far.report), h1(&near.report));
    outcome(n0 < f0 && n1 < f1, format!("H0 near {n0:.3e} far {f0:.3e}; H1 near {n1:.3e} far {f1:.3e}"))
}

fn heat_rel_error(cells: usize, scheme: Scheme) -> f64 {
    let delta = 0.01;
    let t = 0.1;
    let initial = heat_initial(cells - 1).unwrap();
    let sys = semidiscretize(&heat_model(), delta, &initial).unwrap();
    let cfg = SolverConfig {
        dt: 1e-3,
        scheme,
        ..SolverConfig::default()
    };
    let r = integrate(&sys, &cfg, &initial, t).unwrap();
    assert!((r.profile.time - t).abs() < 1e-12);
    let decay = (-delta * PI * PI * t).exp();
    let h = 1.0 / cells as f64;
    (1..cells)
        .map(|i| (r.profile.fields[(0, i - 1)] - decay * (PI * i as f64 * h).sin()).abs())
        .fold(0.0, f64::max)
        / decay
}

fn a7() -> Outcome {
    let e = heat_rel_error(200, Scheme::ImplicitEuler);
    let errs: Vec<f64> = [50, 100, 200].iter().map(|&c| heat_rel_error(c, Scheme::Trapezoidal)).collect();
    let ratios = [errs[0] / errs[1], errs[1] / errs[2]];
    let ok = e < 1e-3 && ratios.iter().all(|r| (3.0..=5.0).contains(r));
    outcome(ok, format!("rel error {e:.2e} ratios {:.3} {:.3}", ratios[0], ratios[1]))
}

fn a8(p: &MmParams) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-6;
    let mut jac = 0.0f64;
    let mut sym = 0.0f64;
    for _ in 0..100 {
        let s = DVector::from_fn(3, |_, _| rng.gen_range(0.0..=2.0));
        let an = mm::mm_jacobian(p, &s);
        for j in 0..3 {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[j] += h;
            sm[j] -= h;
            let col = (mm::mm_rhs(p, &sp) - mm::mm_rhs(p, &sm)) / (2.0 * h);
            for i in 0..3 {
                jac = jac.max((col[i] - an[(i, j)]).abs());
            }
        }
        // ∂J_ij/∂x_k from central differences of the analytic Jacobian
        let g = 1e-5;
        let dj: Vec<DMatrix<f64>> = (0..3)
            .map(|k| {
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp[k] += g;
                sm[k] -= g;
                (mm::mm_jacobian(p, &sp) - mm::mm_jacobian(p, &sm)) / (2.0 * g)
            })
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    sym = sym.max((dj[k][(i, j)] - dj[j][(i, k)]).abs());
                }
            }
        }
    }
    outcome(jac < 1e-6 && sym < 1e-5, format!("jacobian {jac:.1e} hessian asymmetry {sym:.1e}"))
}

fn a9() -> Outcome {
    let opts = ValidationOptions::default();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut all_passed = true;
    for d in &dirs {
        all_passed &= write_validation(d.path(), &opts).unwrap().all_passed();
    }
    let listing = |p: &std::path::Path| {
        let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(p)
            .unwrap()
            .map(|e| e.unwrap().path())
            .map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&f).unwrap()))
            .collect();
        v.sort();
        v
    };
    let a = listing(dirs[0].path());
    let same = a == listing(dirs[1].path());
    outcome(same && all_passed && a.len() >= 2, format!("{} files identical {same}, suite passed {all_passed}", a.len()))
}

fn main() {
    let mut results: Vec<(&str, Outcome, Duration, Duration)> = Vec::new();
    let mut timed = |id: &'static str, budget: f64, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let budget = if budget.is_finite() { Duration::from_secs_f64(budget) } else { Duration::MAX };
        results.push((id, o, t.elapsed(), budget));
    };
    let mut bench = None;
    timed("A1", 1.0, &mut || {
        let b = MmBenchmark::new(MmParams::default()).unwrap();
        let o = a1(&b);
        bench = Some(b);
        o
    });
    let bench = bench.unwrap();
    timed("A2", 1.0, &mut || a2(&bench));
    timed("A3", 1.0, &mut || a3(&bench));
    timed("A4", 5.0, &mut a4);
    let cfg = SolverConfig {
        n_interior: 199,
        ..SolverConfig::default()
    };
    let mut far = None;
    timed("A5", 60.0, &mut || {
        let r = bench.run(ScenarioKind::Far, &cfg, 1).unwrap();
        let o = a5(&r);
        far = Some(r);
        o
    });
    let far = far.unwrap();
    timed("A6", 120.0, &mut || {
        let near = bench.run(ScenarioKind::Near, &cfg, 1).unwrap();
        a6(&far, &near)
    });
    timed("A7", 10.0, &mut a7);
    timed("A8", 1.0, &mut || a8(&bench.params));
    timed("A9", f64::INFINITY, &mut a9);

    let mut failed = 0;
    for (id, o, took, budget) in &results {
        let in_time = took <= budget;
        let ok = o.passed && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "{id} {} {:.3}s {}{}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            o.detail,
            if in_time { "" } else { " (over time budget)" }
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
