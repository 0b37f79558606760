//! Finite-difference derivatives and the 1D Dirichlet Laplacian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Partition, PartitionedState, SpsSystem};

/// Default step for first derivatives.
pub const DEFAULT_FIRST_STEP: f64 = 1e-5;
/// Default step for second derivatives.
pub const DEFAULT_SECOND_STEP: f64 = 1e-4;
/// Relative determinant threshold below which `dF_f/dv` counts as singular.
pub const TURNING_POINT_RTOL: f64 = 1e-10;

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "step",
            reason: format!("finite-difference step must be positive, got {step}"),
        })
    }
}

fn eval_finite<F>(f: &F, x: &DVector<f64>, index: usize) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let y = f(x);
    if y.iter().all(|v| v.is_finite()) {
        Ok(y)
    } else {
        Err(Error::NonFiniteEvaluation { index })
    }
}

/// Central-difference Jacobian, `J[i][j] = (f_i(p + h e_j) - f_i(p - h e_j)) / 2h`.
pub fn fd_jacobian<F>(f: F, point: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    check_step(step)?;
    let n = point.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut x = point.clone();
    for j in 0..n {
        x[j] = point[j] + step;
        let plus = eval_finite(&f, &x, j)?;
        x[j] = point[j] - step;
        let minus = eval_finite(&f, &x, j)?;
        x[j] = point[j];
        cols.push((plus - minus) / (2.0 * step));
    }
    let m = cols.first().map_or(0, |c| c.len());
    let mut jac = DMatrix::zeros(m, n);
    for (j, c) in cols.iter().enumerate() {
        jac.set_column(j, c);
    }
    Ok(jac)
}

/// Second derivatives of a vector field: `data[k][(i, j)] = ∂²f_k / ∂x_i ∂x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianTensor {
    pub data: Vec<DMatrix<f64>>,
}

impl HessianTensor {
    pub fn components(&self) -> usize {
        self.data.len()
    }

    /// Largest `|H_k[i][j] - H_k[j][i]|` over all components.
    pub fn asymmetry(&self) -> f64 {
        self.data
            .iter()
            .map(|h| (h - h.transpose()).amax())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|h| h.amax()).fold(0.0, f64::max)
    }
}

/// Second-order central differences; mixed partials from the four-point
/// stencil, averaged over both index orders.
pub fn fd_hessian_tensor<F>(f: F, point: &DVector<f64>, step: f64) -> Result<HessianTensor>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    check_step(step)?;
    let n = point.len();
    let f0 = eval_finite(&f, point, 0)?;
    let m = f0.len();
    let mut data = vec![DMatrix::zeros(n, n); m];
    let mut x = point.clone();
    let h2 = step * step;
    for i in 0..n {
        x[i] = point[i] + step;
        let p = eval_finite(&f, &x, i)?;
        x[i] = point[i] - step;
        let q = eval_finite(&f, &x, i)?;
        x[i] = point[i];
        for k in 0..m {
            data[k][(i, i)] = (p[k] - 2.0 * f0[k] + q[k]) / h2;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mut corner = |si: f64, sj: f64| -> Result<DVector<f64>> {
                x[i] = point[i] + si * step;
                x[j] = point[j] + sj * step;
                let v = eval_finite(&f, &x, i.max(j));
                x[i] = point[i];
                x[j] = point[j];
                v
            };
            let pp = corner(1.0, 1.0)?;
            let pm = corner(1.0, -1.0)?;
            let mp = corner(-1.0, 1.0)?;
            let mm = corner(-1.0, -1.0)?;
            for k in 0..m {
                let ij = (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h2);
                let ji = (pp[k] - mp[k] - pm[k] + mm[k]) / (4.0 * h2);
                let s = 0.5 * (ij + ji);
                data[k][(i, j)] = s;
                data[k][(j, i)] = s;
            }
        }
    }
    Ok(HessianTensor { data })
}

/// Jacobian blocks of an SPS at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    /// ∂F_f/∂u, m_f × m_s
    pub dff_du: DMatrix<f64>,
    /// ∂F_f/∂v, m_f × m_f
    pub dff_dv: DMatrix<f64>,
    /// ∂F_s/∂u, m_s × m_s
    pub dfs_du: DMatrix<f64>,
    /// ∂F_s/∂v, m_s × m_f
    pub dfs_dv: DMatrix<f64>,
    pub det_dff_dv: f64,
    pub threshold: f64,
    pub invertible: bool,
}

impl JacobianBlocks {
    pub fn of(sps: &SpsSystem, state: &PartitionedState, step: f64) -> Result<Self> {
        sps.check_state(state)?;
        let Partition { m_s, m_f } = sps.partition();
        let x = state.join();
        let jf = fd_jacobian(|y| sps.fast_stacked(y), &x, step)?;
        let js = fd_jacobian(|y| sps.slow_stacked(y), &x, step)?;
        Ok(Self::from_stacked(&jf, &js, m_s, m_f))
    }

    /// Builds the blocks from full Jacobians over the fast-first stacked state.
    pub fn from_stacked(jf: &DMatrix<f64>, js: &DMatrix<f64>, m_s: usize, m_f: usize) -> Self {
        let dff_dv = jf.view((0, 0), (m_f, m_f)).into_owned();
        let dff_du = jf.view((0, m_f), (m_f, m_s)).into_owned();
        let dfs_dv = js.view((0, 0), (m_s, m_f)).into_owned();
        let dfs_du = js.view((0, m_f), (m_s, m_s)).into_owned();
        let (det, threshold, invertible) = invertibility(&dff_dv);
        Self {
            dff_du,
            dff_dv,
            dfs_du,
            dfs_dv,
            det_dff_dv: det,
            threshold,
            invertible,
        }
    }

    /// Solves `∂F_f/∂v · x = rhs`, refusing at turning points.
    pub fn solve_fast(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if !self.invertible {
            return Err(Error::TurningPoint {
                det: self.det_dff_dv.abs(),
                threshold: self.threshold,
            });
        }
        self.dff_dv
            .clone()
            .lu()
            .solve(rhs)
            .ok_or(Error::Singular("dF_f/dv"))
    }
}

/// `(det, threshold, invertible)` with threshold `1e-10 · ‖A‖_max^m`.
pub fn invertibility(a: &DMatrix<f64>) -> (f64, f64, bool) {
    let det = a.determinant();
    let scale = a.amax();
    let threshold = TURNING_POINT_RTOL * scale.powi(a.nrows() as i32);
    let ok = scale > 0.0 && det.is_finite() && det.abs() >= threshold;
    (det, threshold, ok)
}

/// Second partials of `F_f` split by block.
///
/// `duu[k]` is m_s × m_s, `duv[k]` is m_s × m_f (rows slow direction,
/// columns fast direction), `dvv[k]` is m_f × m_f.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivTensor {
    pub duu: Vec<DMatrix<f64>>,
    pub duv: Vec<DMatrix<f64>>,
    pub dvv: Vec<DMatrix<f64>>,
}

impl SecondDerivTensor {
    pub fn of_fast_field(sps: &SpsSystem, state: &PartitionedState, step: f64) -> Result<Self> {
        sps.check_state(state)?;
        let full = fd_hessian_tensor(|y| sps.fast_stacked(y), &state.join(), step)?;
        Ok(Self::from_stacked(&full, sps.partition()))
    }

    /// Splits a tensor taken over the fast-first stacked state.
    pub fn from_stacked(full: &HessianTensor, partition: Partition) -> Self {
        let Partition { m_s, m_f } = partition;
        let mut duu = Vec::with_capacity(full.components());
        let mut duv = Vec::with_capacity(full.components());
        let mut dvv = Vec::with_capacity(full.components());
        for h in &full.data {
            dvv.push(h.view((0, 0), (m_f, m_f)).into_owned());
            duv.push(h.view((m_f, 0), (m_s, m_f)).into_owned());
            duu.push(h.view((m_f, m_f), (m_s, m_s)).into_owned());
        }
        Self { duu, duv, dvv }
    }

    /// Quadratic form `Σ_ij a_i b_j ∂²F_k/∂u_i∂u_j` per fast component.
    pub fn uu(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.duu.len(), self.duu.iter().map(|h| a.dot(&(h * b))))
    }

    /// Mixed form `Σ_ij a_i b_j ∂²F_k/∂u_i∂v_j` with `a` slow, `b` fast.
    pub fn uv(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.duv.len(), self.duv.iter().map(|h| a.dot(&(h * b))))
    }

    pub fn vv(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dvv.len(), self.dvv.iter().map(|h| a.dot(&(h * b))))
    }
}

/// Three-point Laplacian on the uniform interior grid of `[0, 1]` with
/// Dirichlet values per species.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian1D {
    n_interior: usize,
    h: f64,
    left: Option<DVector<f64>>,
    right: Option<DVector<f64>>,
}

impl Laplacian1D {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior == 0 {
            return Err(Error::InvalidParameter {
                name: "n_interior",
                reason: "grid needs at least one interior point".into(),
            });
        }
        Ok(Self {
            n_interior,
            h: 1.0 / (n_interior as f64 + 1.0),
            left: None,
            right: None,
        })
    }

    pub fn with_boundary(mut self, left: DVector<f64>, right: DVector<f64>) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                context: "Dirichlet boundary vectors",
                expected: left.len(),
                actual: right.len(),
            });
        }
        self.left = Some(left);
        self.right = Some(right);
        Ok(self)
    }

    /// Same grid with zero Dirichlet data for `species` fields.
    pub fn homogeneous(&self, species: usize) -> Self {
        Self {
            left: Some(DVector::zeros(species)),
            right: Some(DVector::zeros(species)),
            ..self.clone()
        }
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Interior grid points `x_i = i h`, `i = 1..=n`.
    pub fn grid(&self) -> Vec<f64> {
        (1..=self.n_interior).map(|i| i as f64 * self.h).collect()
    }

    /// Applies the stencil to a single field with the given end values.
    pub fn apply_scalar(&self, field: &[f64], left: f64, right: f64, out: &mut [f64]) {
        let n = self.n_interior;
        let inv_h2 = 1.0 / (self.h * self.h);
        for i in 0..n {
            let lo = if i == 0 { left } else { field[i - 1] };
            let hi = if i + 1 == n { right } else { field[i + 1] };
            out[i] = (lo - 2.0 * field[i] + hi) * inv_h2;
        }
    }
}

/// Applies the Laplacian to each row of `field` (species × grid).
pub fn apply_laplacian(op: &Laplacian1D, field: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (left, right) = match (&op.left, &op.right) {
        (Some(l), Some(r)) => (l, r),
        _ => return Err(Error::MissingBoundary("Laplacian1D")),
    };
    if field.ncols() != op.n_interior {
        return Err(Error::DimensionMismatch {
            context: "Laplacian field grid",
            expected: op.n_interior,
            actual: field.ncols(),
        });
    }
    if field.nrows() != left.len() {
        return Err(Error::DimensionMismatch {
            context: "Laplacian field species",
            expected: left.len(),
            actual: field.nrows(),
        });
    }
    let mut out = DMatrix::zeros(field.nrows(), field.ncols());
    let mut row = vec![0.0; op.n_interior];
    let mut buf = vec![0.0; op.n_interior];
    for s in 0..field.nrows() {
        for (i, r) in row.iter_mut().enumerate() {
            *r = field[(s, i)];
        }
        op.apply_scalar(&row, left[s], right[s], &mut buf);
        for (i, b) in buf.iter().enumerate() {
            out[(s, i)] = *b;
        }
    }
    Ok(out)
}
