//! Implicit slow-invariant-manifold corrections.
//!
//! For `ε dv/dt = F_f(u, v)`, `du/dt = F_s(u, v)` the manifold is
//! approximated by
//!
//! ```text
//!     0 = F_f                      (H₀)
//!     0 = F_f + ε h₁               (H₁)
//!     0 = F_f + ε h₁ + ε² h₂       (H₂)
//! ```
//!
//! On profiles of `u_t = F_s + L₁ w`, `v_t = F_f / ε + L₂ w` the coefficients
//! are
//!
//! ```text
//!     h₁ = F_v⁻¹ F_u (F_s + L₁) + L₂
//!     h₂ = F_v⁻² ( F_v L₂(w_t) + F_u (F_su u' + F_sv v' + L₁(w_t))
//!                  + F_uu[u', u'] + 2 F_uv[u', v'] + F_vv[v', v'] )
//! ```
//!
//! with `u' = F_s + L₁`, `v' = L₂ − h₁` and `w_t` the time derivative of the
//! profile taken from the governing right-hand side (zero Dirichlet data,
//! since the boundary values do not move).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::{
    fd_jacobian, JacobianBlocks, Laplacian1D, SecondDerivTensor, DEFAULT_FIRST_STEP,
    DEFAULT_SECOND_STEP,
};
use crate::error::{Error, Result};
use crate::export::{fmt_f64, fmt_opt, write_table, Metadata};
use crate::model::{split_state, Partition, PartitionedState, SpsSystem};
use crate::pde::Profile1D;

/// Metadata note on the first-order Laplacian form.
pub const LAPLACIAN_H1_NOTE: &str =
    "h1 = (dF_f/dv)^-1 dF_f/du (F_s + Lap u) + Lap v (expanded from the time derivative of F_f; no repeated G factor)";

/// How the transport terms scale against the reaction terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TransportScaling {
    /// `u_t = F_s + L₁`, `v_t = F_f / ε + L₂`.
    #[default]
    OrderOne,
    /// Relatively slow transport: `L₂` drops out of `h₁`; `h₂` is not available.
    OrderEpsilon,
}

/// Linear diffusion `L w = D Δ w` acting on stacked fields (fast rows first).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTransport {
    diffusion: DMatrix<f64>,
}

impl LinearTransport {
    pub fn new(diffusion: DMatrix<f64>) -> Result<Self> {
        if !diffusion.is_square() {
            return Err(Error::DimensionMismatch {
                context: "diffusion matrix",
                expected: diffusion.nrows(),
                actual: diffusion.ncols(),
            });
        }
        Ok(Self { diffusion })
    }

    /// `δ Δ` on every component.
    pub fn scalar(n: usize, delta: f64) -> Self {
        Self {
            diffusion: DMatrix::identity(n, n) * delta,
        }
    }

    pub fn dim(&self) -> usize {
        self.diffusion.nrows()
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.diffusion
    }

    /// Applies the operator to `fields` (n × grid) with the given end values.
    pub fn apply(&self, fields: &DMatrix<f64>, left: &DVector<f64>, right: &DVector<f64>) -> Result<DMatrix<f64>> {
        if fields.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "transport field components",
                expected: self.dim(),
                actual: fields.nrows(),
            });
        }
        let lap = Laplacian1D::new(fields.ncols())?.with_boundary(left.clone(), right.clone())?;
        Ok(&self.diffusion * crate::calculus::apply_laplacian(&lap, fields)?)
    }
}

/// Read-only data shared by all correction formulas.
#[derive(Debug, Clone)]
pub struct CorrectionContext {
    pub sps: SpsSystem,
    pub transport: Option<LinearTransport>,
    pub scaling: TransportScaling,
    /// Second derivatives are needed by every H₂ evaluation.
    pub second_order: bool,
    pub first_step: f64,
    pub second_step: f64,
}

impl CorrectionContext {
    pub fn new(sps: SpsSystem) -> Self {
        Self {
            sps,
            transport: None,
            scaling: TransportScaling::OrderOne,
            second_order: false,
            first_step: DEFAULT_FIRST_STEP,
            second_step: DEFAULT_SECOND_STEP,
        }
    }

    pub fn with_transport(mut self, transport: LinearTransport, scaling: TransportScaling) -> Result<Self> {
        if transport.dim() != self.sps.partition().dim() {
            return Err(Error::DimensionMismatch {
                context: "transport vs system dimension",
                expected: self.sps.partition().dim(),
                actual: transport.dim(),
            });
        }
        self.transport = Some(transport);
        self.scaling = scaling;
        Ok(self)
    }

    pub fn with_second_order(mut self, enabled: bool) -> Self {
        self.second_order = enabled;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.sps.epsilon()
    }

    pub fn partition(&self) -> Partition {
        self.sps.partition()
    }

    fn require_second_order(&self) -> Result<()> {
        if self.second_order {
            Ok(())
        } else {
            Err(Error::MissingSecondOrderData("second derivatives of F_f"))
        }
    }

    fn blocks(&self, state: &PartitionedState) -> Result<JacobianBlocks> {
        JacobianBlocks::of(&self.sps, state, self.first_step)
    }
}

/// `H₀ = F_f(u, v)`.
pub fn h0_residual(sps: &SpsSystem, state: &PartitionedState) -> DVector<f64> {
    sps.fast(state)
}

/// `h₁ = F_v⁻¹ F_u F_s` for the homogeneous system.
pub fn h1_ode(ctx: &CorrectionContext, state: &PartitionedState) -> Result<DVector<f64>> {
    let b = ctx.blocks(state)?;
    b.solve_fast(&(&b.dff_du * ctx.sps.slow(state)))
}

/// `N(u, v) = F_v⁻¹ F_u F_s` as a function of the stacked state.
fn n_map(ctx: &CorrectionContext, stacked: &DVector<f64>) -> Result<DVector<f64>> {
    let state = split_state(stacked, ctx.partition())?;
    h1_ode(ctx, &state)
}

/// Coefficients `(c₁, c₂)` of `H₂ = F_f + ε c₁ + ε² c₂` for the homogeneous
/// system: `c₁ = N + F_v⁻¹ N_v F_f`, `c₂ = F_v⁻¹ N_u F_s`.
pub fn h2_ode(ctx: &CorrectionContext, state: &PartitionedState) -> Result<(DVector<f64>, DVector<f64>)> {
    ctx.require_second_order()?;
    let Partition { m_s, m_f } = ctx.partition();
    let b = ctx.blocks(state)?;
    let x = state.join();
    let n0 = n_map(ctx, &x)?;
    let failure = std::cell::Cell::new(None);
    let jn = fd_jacobian(
        |y| match n_map(ctx, y) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                DVector::from_element(m_f, f64::NAN)
            }
        },
        &x,
        ctx.second_step,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let jn = jn?;
    let n_v = jn.columns(0, m_f).into_owned();
    let n_u = jn.columns(m_f, m_s).into_owned();
    let c1 = &n0 + b.solve_fast(&(&n_v * ctx.sps.fast(state)))?;
    let c2 = b.solve_fast(&(&n_u * ctx.sps.slow(state)))?;
    Ok((c1, c2))
}

/// Residual vectors `(H₀, H₁, H₂)` of the homogeneous system at one state.
pub fn ode_residuals(
    ctx: &CorrectionContext,
    state: &PartitionedState,
) -> Result<(DVector<f64>, DVector<f64>, Option<DVector<f64>>)> {
    let eps = ctx.epsilon();
    let h0 = h0_residual(&ctx.sps, state);
    let h1 = &h0 + h1_ode(ctx, state)? * eps;
    let h2 = if ctx.second_order {
        let (c1, c2) = h2_ode(ctx, state)?;
        Some(&h0 + c1 * eps + c2 * (eps * eps))
    } else {
        None
    };
    Ok((h0, h1, h2))
}

/// Operator evaluations on a profile (stacked rows, fast first).
#[derive(Debug, Clone)]
struct ProfileTerms {
    transport: DMatrix<f64>,
}

impl ProfileTerms {
    fn of(ctx: &CorrectionContext, profile: &Profile1D) -> Result<Self> {
        check_profile(ctx, profile)?;
        let n = ctx.partition().dim();
        let transport = match &ctx.transport {
            Some(t) => t.apply(&profile.fields, &profile.left_bc, &profile.right_bc)?,
            None => DMatrix::zeros(n, profile.n_interior()),
        };
        Ok(Self { transport })
    }

    /// `(L₁, L₂)` at grid point `i`.
    fn at(&self, partition: Partition, i: usize) -> (DVector<f64>, DVector<f64>) {
        let col = self.transport.column(i);
        (
            col.rows(partition.m_f, partition.m_s).into_owned(),
            col.rows(0, partition.m_f).into_owned(),
        )
    }
}

fn check_profile(ctx: &CorrectionContext, profile: &Profile1D) -> Result<()> {
    let n = ctx.partition().dim();
    if profile.species() != n {
        return Err(Error::DimensionMismatch {
            context: "profile components vs system dimension",
            expected: n,
            actual: profile.species(),
        });
    }
    Ok(())
}

fn state_at(ctx: &CorrectionContext, profile: &Profile1D, i: usize) -> Result<PartitionedState> {
    if i >= profile.n_interior() {
        return Err(Error::DimensionMismatch {
            context: "grid index",
            expected: profile.n_interior(),
            actual: i,
        });
    }
    split_state(&profile.point(i), ctx.partition())
}

fn h1_point(
    ctx: &CorrectionContext,
    b: &JacobianBlocks,
    fs: &DVector<f64>,
    l1: &DVector<f64>,
    l2: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mut h1 = b.solve_fast(&(&b.dff_du * (fs + l1)))?;
    if ctx.scaling == TransportScaling::OrderOne {
        h1 += l2;
    }
    Ok(h1)
}

/// `h₁` at grid point `i` of a profile in decomposed coordinates.
pub fn h1_profile(ctx: &CorrectionContext, profile: &Profile1D, grid_index: usize) -> Result<DVector<f64>> {
    let terms = ProfileTerms::of(ctx, profile)?;
    let state = state_at(ctx, profile, grid_index)?;
    let (l1, l2) = terms.at(ctx.partition(), grid_index);
    let b = ctx.blocks(&state)?;
    h1_point(ctx, &b, &ctx.sps.slow(&state), &l1, &l2)
}

/// Time derivative of the profile from the governing right-hand side,
/// `(v_t ; u_t) = (F_f / ε + L₂ ; F_s + L₁)` per column.
pub fn profile_time_derivatives(ctx: &CorrectionContext, profile: &Profile1D) -> Result<DMatrix<f64>> {
    if ctx.scaling == TransportScaling::OrderEpsilon {
        return Err(Error::Unsupported(
            "second-order profile correction with order-epsilon transport".into(),
        ));
    }
    let terms = ProfileTerms::of(ctx, profile)?;
    let p = ctx.partition();
    let eps = ctx.epsilon();
    let mut out = DMatrix::zeros(p.dim(), profile.n_interior());
    for i in 0..profile.n_interior() {
        let s = state_at(ctx, profile, i)?;
        let (l1, l2) = terms.at(p, i);
        out.view_mut((0, i), (p.m_f, 1))
            .copy_from(&(ctx.sps.fast(&s) / eps + l2));
        out.view_mut((p.m_f, i), (p.m_s, 1))
            .copy_from(&(ctx.sps.slow(&s) + l1));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn h2_point(
    ctx: &CorrectionContext,
    state: &PartitionedState,
    b: &JacobianBlocks,
    fs: &DVector<f64>,
    l1: &DVector<f64>,
    l2: &DVector<f64>,
    lt1: &DVector<f64>,
    lt2: &DVector<f64>,
) -> Result<DVector<f64>> {
    let h1 = h1_point(ctx, b, fs, l1, l2)?;
    let tensor = SecondDerivTensor::of_fast_field(&ctx.sps, state, ctx.second_step)?;
    let du = fs + l1;
    let dv = l2 - &h1;
    let inner = &b.dff_dv * lt2
        + &b.dff_du * (&b.dfs_du * &du + &b.dfs_dv * &dv + lt1)
        + tensor.uu(&du, &du)
        + tensor.uv(&du, &dv) * 2.0
        + tensor.vv(&dv, &dv);
    b.solve_fast(&b.solve_fast(&inner)?)
}

/// `h₂` at every grid point (m_f × n_interior). `time_derivs` is the output
/// of [`profile_time_derivatives`] for the same profile.
pub fn h2_profile(ctx: &CorrectionContext, profile: &Profile1D, time_derivs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ctx.require_second_order()?;
    if ctx.scaling == TransportScaling::OrderEpsilon {
        return Err(Error::Unsupported(
            "second-order profile correction with order-epsilon transport".into(),
        ));
    }
    let p = ctx.partition();
    let terms = ProfileTerms::of(ctx, profile)?;
    let lt = transport_of_rates(ctx, time_derivs)?;
    let mut out = DMatrix::zeros(p.m_f, profile.n_interior());
    for i in 0..profile.n_interior() {
        let s = state_at(ctx, profile, i)?;
        let (l1, l2) = terms.at(p, i);
        let b = ctx.blocks(&s)?;
        let col = lt.column(i);
        let lt2 = col.rows(0, p.m_f).into_owned();
        let lt1 = col.rows(p.m_f, p.m_s).into_owned();
        let h2 = h2_point(ctx, &s, &b, &ctx.sps.slow(&s), &l1, &l2, &lt1, &lt2)?;
        out.set_column(i, &h2);
    }
    Ok(out)
}

fn transport_of_rates(ctx: &CorrectionContext, rates: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = ctx.partition().dim();
    match &ctx.transport {
        Some(t) => t.apply(rates, &DVector::zeros(n), &DVector::zeros(n)),
        None => Ok(DMatrix::zeros(n, rates.ncols())),
    }
}

fn laplacian_context(ctx: &CorrectionContext) -> CorrectionContext {
    CorrectionContext {
        transport: Some(LinearTransport::scalar(ctx.partition().dim(), 1.0)),
        scaling: TransportScaling::OrderOne,
        ..ctx.clone()
    }
}

/// [`h1_profile`] with `L₁ = L₂ = Δ`.
pub fn h1_laplacian(ctx: &CorrectionContext, profile: &Profile1D, grid_index: usize) -> Result<DVector<f64>> {
    h1_profile(&laplacian_context(ctx), profile, grid_index)
}

/// [`h2_profile`] with `L₁ = L₂ = Δ`; time derivatives are taken from the
/// same Laplacian system.
pub fn h2_laplacian(ctx: &CorrectionContext, profile: &Profile1D) -> Result<DMatrix<f64>> {
    let lctx = laplacian_context(ctx);
    let td = profile_time_derivatives(&lctx, profile)?;
    h2_profile(&lctx, profile, &td)
}

/// Pointwise residual norms along a profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub grid_x: Vec<f64>,
    /// `‖F_f‖_max`
    pub h0: Vec<f64>,
    /// `‖F_f + ε h₁‖_max`; `None` at turning points
    pub h1: Vec<Option<f64>>,
    /// `‖F_f + ε h₁ + ε² h₂‖_max` when second-order data is enabled
    pub h2: Option<Vec<Option<f64>>>,
    pub turning_points: Vec<usize>,
    pub epsilon: f64,
}

impl ResidualReport {
    pub fn len(&self) -> usize {
        self.grid_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_x.is_empty()
    }

    pub fn max_h0(&self) -> f64 {
        self.h0.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_h1(&self) -> f64 {
        self.h1.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_h2(&self) -> Option<f64> {
        self.h2
            .as_ref()
            .map(|v| v.iter().flatten().copied().fold(0.0, f64::max))
    }

    /// Share of points with `H₀ < max H₀ / 2` at which `H₁ ≤ H₀`.
    pub fn first_order_improvement(&self) -> f64 {
        let half = 0.5 * self.max_h0();
        let slow: Vec<usize> = (0..self.len()).filter(|&i| self.h0[i] < half).collect();
        if slow.is_empty() {
            return 1.0;
        }
        let better = slow
            .iter()
            .filter(|&&i| self.h1[i].is_some_and(|h1| h1 <= self.h0[i]))
            .count();
        better as f64 / slow.len() as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut W, meta: &Metadata) -> Result<()> {
        self.write_csv_upto(w, meta, 2)
    }

    /// Residual columns up to `order` (H₂ only when it was evaluated).
    pub fn write_csv_upto<W: std::io::Write>(&self, w: &mut W, meta: &Metadata, order: u8) -> Result<()> {
        let h2 = self.h2.as_ref().filter(|_| order >= 2);
        let mut headers = vec!["x".to_string(), "H0".into()];
        if order >= 1 {
            headers.push("H1".into());
        }
        if h2.is_some() {
            headers.push("H2".into());
        }
        headers.push("turning_flag".into());
        let rows = (0..self.len()).map(|i| {
            let mut row = vec![fmt_f64(self.grid_x[i]), fmt_f64(self.h0[i])];
            if order >= 1 {
                row.push(fmt_opt(self.h1[i]));
            }
            if let Some(h2) = h2 {
                row.push(fmt_opt(h2[i]));
            }
            row.push(if self.turning_points.contains(&i) { "1" } else { "0" }.into());
            row
        });
        write_table(w, meta, &headers, rows)
    }
}

/// Evaluates H₀, H₁ (and H₂ when enabled) at every grid point. Points where
/// `∂F_f/∂v` is near-singular are flagged and left unevaluated.
pub fn residual_report(ctx: &CorrectionContext, profile: &Profile1D) -> Result<ResidualReport> {
    let p = ctx.partition();
    let eps = ctx.epsilon();
    let terms = ProfileTerms::of(ctx, profile)?;
    let second = ctx.second_order && ctx.scaling == TransportScaling::OrderOne;
    let lt = if second {
        Some(transport_of_rates(ctx, &profile_time_derivatives(ctx, profile)?)?)
    } else {
        None
    };
    let n = profile.n_interior();
    let mut h0 = Vec::with_capacity(n);
    let mut h1 = Vec::with_capacity(n);
    let mut h2 = Vec::with_capacity(n);
    let mut turning_points = Vec::new();
    for i in 0..n {
        let s = state_at(ctx, profile, i)?;
        let f = ctx.sps.fast(&s);
        h0.push(f.amax());
        let b = ctx.blocks(&s)?;
        if !b.invertible {
            turning_points.push(i);
            h1.push(None);
            h2.push(None);
            continue;
        }
        let (l1, l2) = terms.at(p, i);
        let fs = ctx.sps.slow(&s);
        let c1 = h1_point(ctx, &b, &fs, &l1, &l2)?;
        h1.push(Some((&f + &c1 * eps).amax()));
        if let Some(lt) = &lt {
            let col = lt.column(i);
            let lt2 = col.rows(0, p.m_f).into_owned();
            let lt1 = col.rows(p.m_f, p.m_s).into_owned();
            let c2 = h2_point(ctx, &s, &b, &fs, &l1, &l2, &lt1, &lt2)?;
            h2.push(Some((&f + c1 * eps + c2 * (eps * eps)).amax()));
        }
    }
    Ok(ResidualReport {
        grid_x: profile.grid_x.clone(),
        h0,
        h1,
        h2: second.then_some(h2),
        turning_points,
        epsilon: eps,
    })
}
