//! Method-of-lines solver for 1D reaction-diffusion systems on `[0, 1]` with
//! time-independent Dirichlet data.
//!
//! Unknowns are stacked point-major: entry `i * n_species + s` holds species
//! `s` at interior point `i`. With that ordering the Jacobian of the
//! semi-discrete system is banded with `kl = ku = n_species`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::Laplacian1D;
use crate::error::{Error, Result};
use crate::gql::CoordinateMap;
use crate::linalg::BandMatrix;
use crate::model::{ModelDefinition, PartitionedState};

/// Spatial profile `Γ(x, t)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    pub grid_x: Vec<f64>,
    /// species × n_interior
    pub fields: DMatrix<f64>,
    pub left_bc: DVector<f64>,
    pub right_bc: DVector<f64>,
    pub time: f64,
    /// Set by [`march_to_steady`]; `None` for profiles not produced by a march.
    pub converged: Option<bool>,
}

impl Profile1D {
    pub fn new(fields: DMatrix<f64>, left_bc: DVector<f64>, right_bc: DVector<f64>) -> Result<Self> {
        let n = fields.ncols();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "n_interior",
                reason: "profile needs at least one interior point".into(),
            });
        }
        for (context, bc) in [("left boundary", &left_bc), ("right boundary", &right_bc)] {
            if bc.len() != fields.nrows() {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: fields.nrows(),
                    actual: bc.len(),
                });
            }
        }
        let all = fields.iter().chain(left_bc.iter()).chain(right_bc.iter());
        if let Some(pos) = all.clone().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation { index: pos });
        }
        let h = 1.0 / (n as f64 + 1.0);
        Ok(Self {
            grid_x: (1..=n).map(|i| i as f64 * h).collect(),
            fields,
            left_bc,
            right_bc,
            time: 0.0,
            converged: None,
        })
    }

    /// Straight line between the boundary values: `Γ₀(x) = left + (right − left) x`.
    pub fn linear_ramp(left: &DVector<f64>, right: &DVector<f64>, n_interior: usize) -> Result<Self> {
        let h = 1.0 / (n_interior as f64 + 1.0);
        let fields = DMatrix::from_fn(left.len(), n_interior, |s, i| {
            let x = (i + 1) as f64 * h;
            left[s] + (right[s] - left[s]) * x
        });
        Self::new(fields, left.clone(), right.clone())
    }

    /// Spatially constant profile with matching boundary values.
    pub fn constant(state: &DVector<f64>, n_interior: usize) -> Result<Self> {
        let fields = DMatrix::from_fn(state.len(), n_interior, |s, _| state[s]);
        Self::new(fields, state.clone(), state.clone())
    }

    pub fn species(&self) -> usize {
        self.fields.nrows()
    }

    pub fn n_interior(&self) -> usize {
        self.fields.ncols()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_interior() as f64 + 1.0)
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.fields.column(i).into_owned()
    }

    /// Laplacian on this grid carrying the profile's boundary data.
    pub fn laplacian(&self) -> Result<Laplacian1D> {
        Laplacian1D::new(self.n_interior())?.with_boundary(self.left_bc.clone(), self.right_bc.clone())
    }

    /// Point-major stacked interior values.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_column_slice(self.fields.as_slice())
    }

    /// Same boundary data and grid with new stacked interior values.
    pub fn with_stacked(&self, y: &DVector<f64>, time: f64) -> Result<Self> {
        if y.len() != self.fields.len() {
            return Err(Error::DimensionMismatch {
                context: "stacked profile",
                expected: self.fields.len(),
                actual: y.len(),
            });
        }
        if let Some(index) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation { index });
        }
        Ok(Self {
            fields: DMatrix::from_column_slice(self.species(), self.n_interior(), y.as_slice()),
            time,
            converged: None,
            ..self.clone()
        })
    }

    /// Profile in decomposed coordinates (`w = Z̃ x` pointwise, boundaries included).
    pub fn transformed(&self, map: &CoordinateMap) -> Result<Self> {
        if map.dim() != self.species() {
            return Err(Error::DimensionMismatch {
                context: "profile transform",
                expected: self.species(),
                actual: map.dim(),
            });
        }
        Ok(Self {
            fields: &map.z_tilde * &self.fields,
            left_bc: &map.z_tilde * &self.left_bc,
            right_bc: &map.z_tilde * &self.right_bc,
            ..self.clone()
        })
    }

    /// Columns with the boundary points attached: `(x, values)` from `x = 0` to `x = 1`.
    pub fn with_boundaries(&self) -> Vec<(f64, DVector<f64>)> {
        let mut out = Vec::with_capacity(self.n_interior() + 2);
        out.push((0.0, self.left_bc.clone()));
        for i in 0..self.n_interior() {
            out.push((self.grid_x[i], self.point(i)));
        }
        out.push((1.0, self.right_bc.clone()));
        out
    }
}

/// Time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ImplicitEuler,
    Trapezoidal,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit_euler",
            Scheme::Trapezoidal => "trapezoidal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_max: f64,
    pub steady_tol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub n_interior: usize,
    pub delta: f64,
    pub scheme: Scheme,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Growth factor applied after each accepted step while marching to steady state.
    pub dt_growth: f64,
    /// Keep every k-th accepted step as a snapshot (0 keeps none).
    pub snapshot_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 1e7,
            steady_tol: 1e-9,
            newton_tol: 1e-12,
            newton_max_iter: 30,
            n_interior: 199,
            delta: 0.01,
            scheme: Scheme::ImplicitEuler,
            dt_min: 1e-12,
            dt_max: 1e5,
            dt_growth: 2.0,
            snapshot_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be positive, got {}", self.dt));
        }
        if !(self.steady_tol > 0.0) {
            return bad("steady_tol", format!("must be positive, got {}", self.steady_tol));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("newton", "tolerance and iteration limit must be positive".into());
        }
        if self.n_interior < 3 {
            return bad("n_interior", format!("must be at least 3, got {}", self.n_interior));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta", format!("must be nonnegative, got {}", self.delta));
        }
        if !(self.t_max > 0.0) {
            return bad("t_max", format!("must be positive, got {}", self.t_max));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return bad("dt_min", "need 0 < dt_min <= dt <= dt_max".into());
        }
        if !(self.dt_growth >= 1.0) {
            return bad("dt_growth", format!("must be at least 1, got {}", self.dt_growth));
        }
        Ok(())
    }
}

/// Autonomous ODE `y' = f(y)` with a banded Jacobian.
pub trait StiffSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>>;
    fn jacobian(&self, y: &DVector<f64>) -> Result<BandMatrix>;
}

/// Dense ODE from a model definition (full band).
pub struct DenseOde<'a>(pub &'a ModelDefinition);

impl StiffSystem for DenseOde<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.0.evaluate(y)
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<BandMatrix> {
        let n = self.dim();
        let j = self.0.jacobian(y)?;
        let b = n.saturating_sub(1);
        let mut m = BandMatrix::zeros(n, b, b);
        for r in 0..n {
            for c in 0..n {
                m.set(r, c, j[(r, c)]);
            }
        }
        Ok(m)
    }
}

/// Semi-discrete reaction-diffusion system: reaction pointwise plus
/// `d_s · Δ` per species.
#[derive(Clone)]
pub struct ReactionDiffusion {
    model: ModelDefinition,
    diffusion: DVector<f64>,
    lap: Laplacian1D,
    left: DVector<f64>,
    right: DVector<f64>,
}

impl std::fmt::Debug for ReactionDiffusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReactionDiffusion")
            .field("species", &self.species())
            .field("n_interior", &self.n_interior())
            .field("diffusion", &self.diffusion.as_slice())
            .finish()
    }
}

/// Uniform diffusion constant `delta` for every species.
pub fn semidiscretize(model: &ModelDefinition, delta: f64, profile: &Profile1D) -> Result<ReactionDiffusion> {
    ReactionDiffusion::new(model, DVector::from_element(model.dim(), delta), profile)
}

impl ReactionDiffusion {
    pub fn new(model: &ModelDefinition, diffusion: DVector<f64>, profile: &Profile1D) -> Result<Self> {
        if profile.species() != model.dim() || diffusion.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                context: "reaction-diffusion species",
                expected: model.dim(),
                actual: profile.species(),
            });
        }
        if diffusion.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "diffusion coefficients must be nonnegative".into(),
            });
        }
        Ok(Self {
            model: model.clone(),
            diffusion,
            lap: profile.laplacian()?,
            left: profile.left_bc.clone(),
            right: profile.right_bc.clone(),
        })
    }

    pub fn species(&self) -> usize {
        self.model.dim()
    }

    pub fn n_interior(&self) -> usize {
        self.lap.n_interior()
    }

    pub fn model(&self) -> &ModelDefinition {
        &self.model
    }

    /// Reaction part only, point-major.
    pub fn reaction(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let ns = self.species();
        let mut out = DVector::zeros(y.len());
        for i in 0..self.n_interior() {
            let f = self.model.evaluate(&y.rows(i * ns, ns).into_owned())?;
            out.rows_mut(i * ns, ns).copy_from(&f);
        }
        Ok(out)
    }
}

impl StiffSystem for ReactionDiffusion {
    fn dim(&self) -> usize {
        self.species() * self.n_interior()
    }

    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "reaction-diffusion state",
                expected: self.dim(),
                actual: y.len(),
            });
        }
        let ns = self.species();
        let n = self.n_interior();
        let mut out = self.reaction(y)?;
        let inv_h2 = 1.0 / (self.lap.spacing() * self.lap.spacing());
        for s in 0..ns {
            let d = self.diffusion[s];
            if d == 0.0 {
                continue;
            }
            for i in 0..n {
                let lo = if i == 0 { self.left[s] } else { y[(i - 1) * ns + s] };
                let hi = if i + 1 == n { self.right[s] } else { y[(i + 1) * ns + s] };
                out[i * ns + s] += d * (lo - 2.0 * y[i * ns + s] + hi) * inv_h2;
            }
        }
        Ok(out)
    }

    fn jacobian(&self, y: &DVector<f64>) -> Result<BandMatrix> {
        let ns = self.species();
        let n = self.n_interior();
        let mut m = BandMatrix::zeros(self.dim(), ns, ns);
        for i in 0..n {
            let j = self.model.jacobian(&y.rows(i * ns, ns).into_owned())?;
            for a in 0..ns {
                for b in 0..ns {
                    m.set(i * ns + a, i * ns + b, j[(a, b)]);
                }
            }
        }
        let inv_h2 = 1.0 / (self.lap.spacing() * self.lap.spacing());
        for s in 0..ns {
            let c = self.diffusion[s] * inv_h2;
            if c == 0.0 {
                continue;
            }
            for i in 0..n {
                let k = i * ns + s;
                m.add(k, k, -2.0 * c);
                if i > 0 {
                    m.add(k, k - ns, c);
                }
                if i + 1 < n {
                    m.add(k, k + ns, c);
                }
            }
        }
        Ok(m)
    }
}

/// Result of one accepted implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub y: DVector<f64>,
    pub newton_iterations: usize,
}

/// Newton controls for the implicit stage.
#[derive(Debug, Clone, Copy)]
pub struct NewtonControls {
    pub tol: f64,
    pub max_iter: usize,
}

impl From<&SolverConfig> for NewtonControls {
    fn from(c: &SolverConfig) -> Self {
        Self {
            tol: c.newton_tol,
            max_iter: c.newton_max_iter,
        }
    }
}

/// One implicit step of size `dt`. Newton failure is reported, not retried.
pub fn step_implicit<S: StiffSystem + ?Sized>(
    sys: &S,
    y0: &DVector<f64>,
    dt: f64,
    scheme: Scheme,
    newton: NewtonControls,
) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    let (theta, explicit) = match scheme {
        Scheme::ImplicitEuler => (1.0, None),
        Scheme::Trapezoidal => (0.5, Some(sys.rhs(y0)? * (0.5 * dt))),
    };
    let residual = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let mut g = y - y0 - sys.rhs(y)? * (theta * dt);
        if let Some(e) = &explicit {
            g -= e;
        }
        Ok(g)
    };
    let mut y = y0.clone();
    let mut g = residual(&y)?;
    let scale = 1.0 + y0.amax();
    for it in 0..newton.max_iter {
        let lu = sys.jacobian(&y)?.scale_shift(-theta * dt, 1.0).lu()?;
        let delta = lu.solve(&g);
        if !delta.iter().all(|v| v.is_finite()) {
            break;
        }
        let gnorm = g.amax();
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = &y - &delta * lambda;
            if let Ok(gt) = residual(&trial) {
                if gt.amax() < gnorm || gt.amax() <= newton.tol * scale {
                    accepted = Some((trial, gt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, gt)) = accepted else {
            if gnorm <= newton.tol * scale {
                return Ok(StepOutcome { y, newton_iterations: it });
            }
            break;
        };
        let step = (delta.amax() * lambda) / scale;
        y = trial;
        g = gt;
        if step <= newton.tol || g.amax() <= newton.tol * 1e-3 * scale {
            return Ok(StepOutcome {
                y,
                newton_iterations: it + 1,
            });
        }
    }
    Err(Error::NewtonFailed {
        residual: g.amax(),
        iterations: newton.max_iter,
    })
}

/// Step with retries: `dt` is halved on Newton failure until it drops below `dt_min`.
pub fn step_adaptive<S: StiffSystem + ?Sized>(
    sys: &S,
    y0: &DVector<f64>,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<(StepOutcome, f64)> {
    let mut h = dt;
    loop {
        match step_implicit(sys, y0, h, cfg.scheme, cfg.into()) {
            Ok(out) => return Ok((out, h)),
            Err(Error::NewtonFailed { .. }) | Err(Error::NonFiniteEvaluation { .. }) | Err(Error::Singular(_)) => {
                h *= 0.5;
                if h < cfg.dt_min {
                    return Err(Error::StepTooSmall { dt_min: cfg.dt_min });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Summary of a time march.
#[derive(Debug, Clone)]
pub struct MarchResult {
    pub profile: Profile1D,
    pub steps: usize,
    pub rejected: usize,
    /// `‖RHS‖_max` at the returned profile.
    pub rhs_norm: f64,
    pub snapshots: Vec<Profile1D>,
}

/// Integrates from `initial` to exactly `t_end` with constant step `cfg.dt`
/// (shortened steps are used only after Newton failures and at the end).
pub fn integrate(sys: &ReactionDiffusion, cfg: &SolverConfig, initial: &Profile1D, t_end: f64) -> Result<MarchResult> {
    cfg.validate()?;
    let mut y = initial.stacked();
    let mut t = initial.time;
    let mut steps = 0;
    let mut rejected = 0;
    let mut snapshots = Vec::new();
    while t < t_end * (1.0 - 1e-14) {
        let dt = cfg.dt.min(t_end - t);
        let (out, used) = step_adaptive(sys, &y, dt, cfg)?;
        if used < dt {
            rejected += 1;
        }
        y = out.y;
        t += used;
        if (t_end - t).abs() <= 1e-12 * t_end.abs().max(1.0) {
            t = t_end;
        }
        steps += 1;
        if cfg.snapshot_every > 0 && steps % cfg.snapshot_every == 0 {
            snapshots.push(initial.with_stacked(&y, t)?);
        }
    }
    let rhs_norm = sys.rhs(&y)?.amax();
    Ok(MarchResult {
        profile: initial.with_stacked(&y, t)?,
        steps,
        rejected,
        rhs_norm,
        snapshots,
    })
}

/// Marches until `‖RHS‖_max < steady_tol` or `t_max`, growing the step
/// geometrically. The returned profile is tagged with its convergence state.
pub fn march_to_steady(sys: &ReactionDiffusion, cfg: &SolverConfig, initial: &Profile1D) -> Result<MarchResult> {
    cfg.validate()?;
    let mut y = initial.stacked();
    let mut t = initial.time;
    let mut dt = cfg.dt;
    let mut steps = 0;
    let mut rejected = 0;
    let mut snapshots = Vec::new();
    let mut rhs_norm = sys.rhs(&y)?.amax();
    while rhs_norm >= cfg.steady_tol && t < cfg.t_max {
        let h = dt.min(cfg.t_max - t);
        let (out, used) = step_adaptive(sys, &y, h, cfg)?;
        if used < h {
            rejected += 1;
            dt = used;
        }
        y = out.y;
        t += used;
        steps += 1;
        rhs_norm = sys.rhs(&y)?.amax();
        if cfg.snapshot_every > 0 && steps % cfg.snapshot_every == 0 {
            snapshots.push(initial.with_stacked(&y, t)?);
        }
        dt = (dt * cfg.dt_growth).min(cfg.dt_max);
    }
    let mut profile = initial.with_stacked(&y, t)?;
    profile.converged = Some(rhs_norm < cfg.steady_tol);
    Ok(MarchResult {
        profile,
        steps,
        rejected,
        rhs_norm,
        snapshots,
    })
}

/// Search controls for [`fast_projection`].
#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    /// Largest displacement searched on either side of the start.
    pub max_extent: f64,
    pub initial_step: f64,
    pub growth: f64,
    /// Absolute root tolerance on the residual.
    pub tol: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            max_extent: 10.0,
            initial_step: 1e-3,
            growth: 1.2,
            tol: 1e-12,
        }
    }
}

/// Moves `state` (original coordinates) along the fast direction `Z_f` to the
/// nearest zero of `residual`, by an outward scan for a sign change followed
/// by bisection in the fast coordinate. Only `m_f = 1` is supported.
pub fn fast_projection<R>(
    map: &CoordinateMap,
    state: &DVector<f64>,
    residual: R,
    opts: &ProjectionOptions,
) -> Result<DVector<f64>>
where
    R: Fn(&PartitionedState) -> Result<DVector<f64>>,
{
    if map.partition.m_f != 1 {
        return Err(Error::Unsupported(format!(
            "fast projection needs one fast direction, got {}",
            map.partition.m_f
        )));
    }
    let base = map.to_decomposed(state)?;
    let w0 = base.fast[0];
    let eval = |w: f64| -> Result<f64> {
        let mut p = base.clone();
        p.fast[0] = w;
        Ok(residual(&p)?[0])
    };
    let r0 = eval(w0)?;
    if r0.abs() <= opts.tol {
        return Ok(state.clone());
    }
    let mut prev = 0.0;
    let mut d = opts.initial_step;
    let mut bracket = None;
    while prev < opts.max_extent {
        let d_cur = d.min(opts.max_extent);
        for sign in [1.0, -1.0] {
            let r = eval(w0 + sign * d_cur)?;
            if r == 0.0 || r.signum() != r0.signum() {
                bracket = Some((w0 + sign * prev, w0 + sign * d_cur));
                break;
            }
        }
        if bracket.is_some() {
            break;
        }
        prev = d_cur;
        d *= opts.growth;
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoBracket {
        lo: w0 - opts.max_extent,
        hi: w0 + opts.max_extent,
    })?;
    let mut ra = eval(a)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let rm = eval(m)?;
        if rm == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * m.abs().max(1.0) {
            a = m;
            break;
        }
        if rm.signum() == ra.signum() {
            a = m;
            ra = rm;
        } else {
            b = m;
        }
    }
    let ends = [a, b];
    let best = ends
        .iter()
        .copied()
        .map(|w| (w, eval(w).map(f64::abs).unwrap_or(f64::INFINITY)))
        .fold((a, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
        .0;
    let mut out = base;
    out.fast[0] = best;
    map.from_decomposed(&out)
}

/// Writes profiles as rows `t, x, species...` (boundary points included),
/// optionally followed by the same states in decomposed coordinates.
pub fn write_profiles_csv<W: std::io::Write>(
    w: &mut W,
    meta: &crate::export::Metadata,
    profiles: &[Profile1D],
    labels: &[String],
    transformed: Option<(&CoordinateMap, &[String])>,
) -> Result<()> {
    use crate::export::fmt_f64;
    let mut headers = vec!["t".to_string(), "x".to_string()];
    headers.extend(labels.iter().cloned());
    if let Some((_, tl)) = transformed {
        headers.extend(tl.iter().cloned());
    }
    let mut rows = Vec::new();
    for p in profiles {
        for (x, v) in p.with_boundaries() {
            let mut row = vec![fmt_f64(p.time), fmt_f64(x)];
            row.extend(v.iter().map(|c| fmt_f64(*c)));
            if let Some((map, _)) = transformed {
                row.extend((&map.z_tilde * &v).iter().map(|c| fmt_f64(*c)));
            }
            rows.push(row);
        }
    }
    crate::export::write_table(w, meta, &headers, rows)
}
