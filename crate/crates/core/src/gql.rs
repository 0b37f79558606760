//! Global quasi-linearization: a global linear approximation `T u ≈ F(u)`,
//! its fast/slow spectral split, and the induced linear change of coordinates.
//!
//! The eigenvalues of `T` are sorted by decreasing modulus. The first `m_f`
//! form the fast group `Λ_f`, the rest the slow group `Λ_s`, and
//!
//! ```text
//!     T = (Z_f Z_s) · diag(Λ_f, Λ_s) · (Z̃_f ; Z̃_s),     ε = max|Λ_s| / min|Λ_f|.
//! ```
//!
//! Complex eigenvalues are carried by real two-dimensional invariant
//! subspaces, so `Λ_f` and `Λ_s` are returned as real blocks
//! (`fast_block = Z̃_f T Z_f`).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ModelDefinition, Partition, PartitionedState, SpsSystem};

/// Minimum consecutive modulus ratio accepted by automatic gap detection.
pub const AUTO_GAP_THRESHOLD: f64 = 2.0;

const PAIR_TOL: f64 = 1e-10;
const CLUSTER_RTOL: f64 = 1e-6;

/// How `T` was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LinearizationSource {
    LeastSquares { samples: usize },
    JacobianAt { point: Vec<f64> },
    Supplied,
}

impl LinearizationSource {
    pub fn describe(&self) -> String {
        match self {
            Self::LeastSquares { samples } => format!("least-squares over {samples} samples"),
            Self::JacobianAt { point } => format!("jacobian at {point:?}"),
            Self::Supplied => "supplied matrix".into(),
        }
    }
}

/// Uniform lattice with `per_axis` points per coordinate over the box `[lo, hi]`.
pub fn lattice_samples(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<DVector<f64>> {
    let n = lo.len();
    let total = per_axis.pow(n as u32);
    let coord = |axis: usize, k: usize| {
        if per_axis == 1 {
            0.5 * (lo[axis] + hi[axis])
        } else {
            lo[axis] + (hi[axis] - lo[axis]) * k as f64 / (per_axis - 1) as f64
        }
    };
    (0..total)
        .map(|mut idx| {
            let mut v = DVector::zeros(n);
            for axis in (0..n).rev() {
                v[axis] = coord(axis, idx % per_axis);
                idx /= per_axis;
            }
            v
        })
        .collect()
}

/// Least-squares minimiser of `Σ_k ‖T u_k − F(u_k)‖²`.
pub fn fit_global_linearization(
    model: &ModelDefinition,
    samples: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let n = model.dim();
    let mut design = DMatrix::zeros(samples.len(), n);
    let mut target = DMatrix::zeros(samples.len(), n);
    for (k, s) in samples.iter().enumerate() {
        let f = model.evaluate(s)?;
        design.set_row(k, &s.transpose());
        target.set_row(k, &f.transpose());
    }
    let rank = if samples.is_empty() {
        0
    } else {
        linalg::rank(&design, 1e-10)
    };
    if rank < n {
        return Err(Error::RankDeficient { rank, required: n });
    }
    let svd = design.svd(true, true);
    let t_transposed = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::Eigen(e.to_string()))?;
    Ok(t_transposed.transpose())
}

/// `T` as the model Jacobian at a reference point.
pub fn jacobian_linearization(
    model: &ModelDefinition,
    point: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    model.jacobian(point)
}

/// Linear change of coordinates `u = Z w`, `w = Z̃ u`, fast block first.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    pub z: DMatrix<f64>,
    pub z_tilde: DMatrix<f64>,
    pub partition: Partition,
}

impl CoordinateMap {
    /// From the columns of `z` (first `m_f` fast); `Z̃ = Z⁻¹`.
    pub fn from_matrix(z: DMatrix<f64>, m_f: usize) -> Result<Self> {
        let n = z.nrows();
        if !z.is_square() {
            return Err(Error::DimensionMismatch {
                context: "coordinate matrix",
                expected: n,
                actual: z.ncols(),
            });
        }
        if m_f == 0 || m_f >= n {
            return Err(Error::InvalidSplit { m_f, n });
        }
        let z_tilde = z
            .clone()
            .try_inverse()
            .ok_or(Error::Singular("coordinate matrix"))?;
        Ok(Self {
            z,
            z_tilde,
            partition: Partition::new(n - m_f, m_f),
        })
    }

    pub fn dim(&self) -> usize {
        self.z.nrows()
    }

    pub fn to_decomposed(&self, state: &DVector<f64>) -> Result<PartitionedState> {
        if state.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "state for decomposition",
                expected: self.dim(),
                actual: state.len(),
            });
        }
        crate::model::split_state(&(&self.z_tilde * state), self.partition)
    }

    pub fn from_decomposed(&self, state: &PartitionedState) -> Result<DVector<f64>> {
        if state.partition() != self.partition {
            return Err(Error::InconsistentPartition {
                partition_len: self.dim(),
                state_len: state.fast.len() + state.slow.len(),
            });
        }
        Ok(&self.z * state.join())
    }

    /// `Z̃ · F(Z w)` in stacked decomposed coordinates.
    pub fn decomposed_rates(&self, model: &ModelDefinition, w: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.z_tilde * model.evaluate(&(&self.z * w))?)
    }

    /// `‖Z Z̃ − I‖_max`.
    pub fn roundtrip_defect(&self) -> f64 {
        let n = self.dim();
        (&self.z * &self.z_tilde - DMatrix::<f64>::identity(n, n)).amax()
    }
}

/// Fast/slow spectral decomposition of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct GqlDecomposition {
    pub t: DMatrix<f64>,
    pub zf: DMatrix<f64>,
    pub zs: DMatrix<f64>,
    pub zf_tilde: DMatrix<f64>,
    pub zs_tilde: DMatrix<f64>,
    pub lambda_fast: Vec<Complex64>,
    pub lambda_slow: Vec<Complex64>,
    /// `Z̃_f T Z_f`
    pub fast_block: DMatrix<f64>,
    /// `Z̃_s T Z_s`
    pub slow_block: DMatrix<f64>,
    pub epsilon: f64,
    /// `min|Λ_f| / max|Λ_s|` at the chosen split.
    pub gap_ratio: f64,
    /// Consecutive modulus ratios `|λ_k| / |λ_{k+1}|` of the sorted spectrum.
    pub ratios: Vec<f64>,
    pub source: LinearizationSource,
}

impl GqlDecomposition {
    pub fn m_f(&self) -> usize {
        self.zf.ncols()
    }

    pub fn m_s(&self) -> usize {
        self.zs.ncols()
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.m_s(), self.m_f())
    }

    pub fn z(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.t.nrows(), self.t.ncols());
        z.columns_mut(0, self.m_f()).copy_from(&self.zf);
        z.columns_mut(self.m_f(), self.m_s()).copy_from(&self.zs);
        z
    }

    pub fn z_tilde(&self) -> DMatrix<f64> {
        let mut zt = DMatrix::zeros(self.t.nrows(), self.t.ncols());
        zt.rows_mut(0, self.m_f()).copy_from(&self.zf_tilde);
        zt.rows_mut(self.m_f(), self.m_s()).copy_from(&self.zs_tilde);
        zt
    }

    pub fn coordinates(&self) -> CoordinateMap {
        CoordinateMap {
            z: self.z(),
            z_tilde: self.z_tilde(),
            partition: self.partition(),
        }
    }

    /// `(Z_f | Z_s) · blockdiag(Λ_f, Λ_s) · (Z̃_f ; Z̃_s)`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.zf * &self.fast_block * &self.zf_tilde + &self.zs * &self.slow_block * &self.zs_tilde
    }

    pub fn with_source(mut self, source: LinearizationSource) -> Self {
        self.source = source;
        self
    }

    /// Serializable record: matrices row-major, eigenvalues as `(re, im)`.
    pub fn record(&self) -> GqlRecord {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        let pairs = |v: &[Complex64]| v.iter().map(|c| (c.re, c.im)).collect();
        GqlRecord {
            n: self.t.nrows(),
            m_f: self.m_f(),
            m_s: self.m_s(),
            t: rows(&self.t),
            zf: rows(&self.zf),
            zs: rows(&self.zs),
            zf_tilde: rows(&self.zf_tilde),
            zs_tilde: rows(&self.zs_tilde),
            lambda_fast: pairs(&self.lambda_fast),
            lambda_slow: pairs(&self.lambda_slow),
            epsilon: self.epsilon,
            gap_ratio: self.gap_ratio,
            consecutive_ratios: self.ratios.clone(),
            source: self.source.clone(),
        }
    }
}

/// Structured export of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GqlRecord {
    pub n: usize,
    pub m_f: usize,
    pub m_s: usize,
    pub t: Vec<Vec<f64>>,
    pub zf: Vec<Vec<f64>>,
    pub zs: Vec<Vec<f64>>,
    pub zf_tilde: Vec<Vec<f64>>,
    pub zs_tilde: Vec<Vec<f64>>,
    pub lambda_fast: Vec<(f64, f64)>,
    pub lambda_slow: Vec<(f64, f64)>,
    pub epsilon: f64,
    pub gap_ratio: f64,
    pub consecutive_ratios: Vec<f64>,
    pub source: LinearizationSource,
}

/// Sorted spectrum with conjugate-pair bookkeeping.
#[derive(Debug, Clone)]
pub struct SortedSpectrum {
    pub values: Vec<Complex64>,
    /// `pair_start[k]` is true when `values[k]` and `values[k+1]` form a conjugate pair.
    pub pair_start: Vec<bool>,
}

impl SortedSpectrum {
    pub fn of(t: &DMatrix<f64>) -> Result<Self> {
        let mut values = linalg::eigenvalues(t)?;
        let scale = values.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        for v in values.iter_mut() {
            if v.im.abs() <= PAIR_TOL * scale {
                v.im = 0.0;
            }
        }
        values.sort_by(|a, b| {
            b.norm()
                .total_cmp(&a.norm())
                .then(a.re.total_cmp(&b.re))
                .then(b.im.total_cmp(&a.im))
        });
        let n = values.len();
        let mut pair_start = vec![false; n];
        let mut k = 0;
        while k < n {
            if values[k].im != 0.0 {
                let partner = (k + 1..n).find(|&j| {
                    (values[j] - values[k].conj()).norm() <= 1e-8 * scale
                });
                match partner {
                    Some(j) => {
                        if j != k + 1 {
                            values.swap(k + 1, j);
                        }
                        pair_start[k] = true;
                        k += 2;
                    }
                    None => {
                        return Err(Error::Eigen(format!(
                            "complex eigenvalue {} has no conjugate partner",
                            values[k]
                        )))
                    }
                }
            } else {
                k += 1;
            }
        }
        Ok(Self { values, pair_start })
    }

    /// Ratio `|λ_{k-1}| / |λ_k|` for a split with `k` fast eigenvalues.
    pub fn ratio_at(&self, k: usize) -> f64 {
        let hi = self.values[k - 1].norm();
        let lo = self.values[k].norm();
        if lo == 0.0 {
            if hi == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            hi / lo
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        (1..self.values.len()).map(|k| self.ratio_at(k)).collect()
    }

    /// A split with `k` fast eigenvalues keeps every conjugate pair together.
    pub fn is_valid_split(&self, k: usize) -> bool {
        k >= 1 && k < self.values.len() && !self.pair_start[k - 1]
    }
}

/// Splits the spectrum of `T` and builds the fast/slow invariant subspaces.
///
/// With `m_f = None` the split is placed at the largest consecutive modulus
/// ratio, which must exceed [`AUTO_GAP_THRESHOLD`].
pub fn split_spectrum(t: &DMatrix<f64>, m_f: Option<usize>) -> Result<GqlDecomposition> {
    let n = t.nrows();
    if !t.is_square() {
        return Err(Error::DimensionMismatch {
            context: "split_spectrum matrix",
            expected: n,
            actual: t.ncols(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidSplit { m_f: m_f.unwrap_or(0), n });
    }
    let spec = SortedSpectrum::of(t)?;
    let ratios = spec.ratios();
    let all_equal = ratios.iter().all(|&r| (r - 1.0).abs() <= 1e-12);
    if all_equal {
        return Err(Error::ZeroGap);
    }
    let k = match m_f {
        Some(k) => {
            if k == 0 || k >= n {
                return Err(Error::InvalidSplit { m_f: k, n });
            }
            if !spec.is_valid_split(k) {
                let suggested = if spec.is_valid_split(k - 1) { k - 1 } else { k + 1 };
                return Err(Error::SplitsConjugatePair {
                    requested: k,
                    suggested,
                });
            }
            k
        }
        None => {
            let mut best: Option<(usize, f64)> = None;
            for k in 1..n {
                if !spec.is_valid_split(k) {
                    continue;
                }
                let r = spec.ratio_at(k);
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((k, r));
                }
            }
            let (k, r) = best.ok_or(Error::ZeroGap)?;
            if r <= AUTO_GAP_THRESHOLD {
                return Err(Error::InsufficientGap {
                    ratio: r,
                    split: k,
                    threshold: AUTO_GAP_THRESHOLD,
                });
            }
            k
        }
    };

    let fast_vals = &spec.values[..k];
    let slow_vals = &spec.values[k..];
    let zf = invariant_subspace(t, fast_vals)?;
    let zs = invariant_subspace(t, slow_vals)?;
    let mut z = DMatrix::zeros(n, n);
    z.columns_mut(0, k).copy_from(&zf);
    z.columns_mut(k, n - k).copy_from(&zs);
    let z_tilde = z
        .clone()
        .try_inverse()
        .ok_or(Error::Singular("fast/slow basis"))?;
    let zf_tilde = z_tilde.rows(0, k).into_owned();
    let zs_tilde = z_tilde.rows(k, n - k).into_owned();

    let coupled = &z_tilde * t * &z;
    let off = coupled
        .view((0, k), (k, n - k))
        .amax()
        .max(coupled.view((k, 0), (n - k, k)).amax());
    let scale = t.amax().max(1e-300);
    if off > 1e-6 * scale {
        return Err(Error::Eigen(format!(
            "fast and slow subspaces are not invariant (coupling {off:.3e})"
        )));
    }
    let fast_block = coupled.view((0, 0), (k, k)).into_owned();
    let slow_block = coupled.view((k, k), (n - k, n - k)).into_owned();

    let max_slow = slow_vals.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let min_fast = fast_vals.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
    Ok(GqlDecomposition {
        t: t.clone(),
        zf,
        zs,
        zf_tilde,
        zs_tilde,
        lambda_fast: fast_vals.to_vec(),
        lambda_slow: slow_vals.to_vec(),
        fast_block,
        slow_block,
        epsilon: max_slow / min_fast,
        gap_ratio: spec.ratio_at(k),
        ratios,
        source: LinearizationSource::Supplied,
    })
}

/// Real basis of the invariant subspace belonging to `group` (closed under
/// conjugation). Columns are unit vectors with their largest entry positive.
fn invariant_subspace(t: &DMatrix<f64>, group: &[Complex64]) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for &lam in group.iter().filter(|l| l.im >= 0.0) {
        let tol = CLUSTER_RTOL * lam.norm().max(1.0);
        match clusters.iter_mut().find(|(c, _)| (*c - lam).norm() <= tol) {
            Some((c, count)) => {
                *c = (*c * *count as f64 + lam) / (*count as f64 + 1.0);
                *count += 1;
            }
            None => clusters.push((lam, 1)),
        }
    }
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(group.len());
    let eye = DMatrix::<f64>::identity(n, n);
    for (lam, mult) in clusters {
        let (factor, dim) = if lam.im == 0.0 {
            (t - &eye * lam.re, mult)
        } else {
            (t * t - t * (2.0 * lam.re) + &eye * lam.norm_sqr(), 2 * mult)
        };
        let mut power = factor.clone();
        for _ in 1..mult {
            power = &power * &factor;
        }
        let basis = linalg::null_space(&power, dim)?;
        for j in 0..dim {
            cols.push(basis.column(j).into_owned());
        }
    }
    let mut out = DMatrix::zeros(n, cols.len());
    for (j, mut c) in cols.into_iter().enumerate() {
        let norm = c.norm();
        if norm > 0.0 {
            c /= norm;
        }
        let imax = c.iamax();
        if c[imax] < 0.0 {
            c = -c;
        }
        out.set_column(j, &c);
    }
    Ok(out)
}

/// `T` from the model by the given mode, then [`split_spectrum`].
pub fn decompose(
    model: &ModelDefinition,
    mode: &LinearizationMode,
    m_f: Option<usize>,
) -> Result<GqlDecomposition> {
    let (t, source) = match mode {
        LinearizationMode::JacobianAt(p) => (
            jacobian_linearization(model, p)?,
            LinearizationSource::JacobianAt {
                point: p.iter().copied().collect(),
            },
        ),
        LinearizationMode::LeastSquares(samples) => (
            fit_global_linearization(model, samples)?,
            LinearizationSource::LeastSquares {
                samples: samples.len(),
            },
        ),
    };
    Ok(split_spectrum(&t, m_f)?.with_source(source))
}

/// Construction mode for `T`.
#[derive(Debug, Clone)]
pub enum LinearizationMode {
    JacobianAt(DVector<f64>),
    LeastSquares(Vec<DVector<f64>>),
}

pub fn to_decomposed_coords(d: &GqlDecomposition, state: &DVector<f64>) -> Result<PartitionedState> {
    d.coordinates().to_decomposed(state)
}

pub fn from_decomposed_coords(d: &GqlDecomposition, state: &PartitionedState) -> Result<DVector<f64>> {
    d.coordinates().from_decomposed(state)
}

/// The model in decomposed coordinates as an SPS with the decomposition's ε.
///
/// With `ε dv/dt = F_f`, the fast field is `F_f(u, v) = ε Z̃_f F(Z_f v + Z_s u)`
/// and the slow field `F_s(u, v) = Z̃_s F(Z_f v + Z_s u)`.
pub fn build_decomposed_system(d: &GqlDecomposition, model: &ModelDefinition) -> Result<SpsSystem> {
    decomposed_system(&d.coordinates(), model, d.epsilon)
}

/// Same as [`build_decomposed_system`] for an arbitrary coordinate map.
pub fn decomposed_system(
    map: &CoordinateMap,
    model: &ModelDefinition,
    epsilon: f64,
) -> Result<SpsSystem> {
    if map.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "decomposition vs model dimension",
            expected: model.dim(),
            actual: map.dim(),
        });
    }
    let Partition { m_s, m_f } = map.partition;
    let zf = map.z.columns(0, m_f).into_owned();
    let zs = map.z.columns(m_f, m_s).into_owned();
    let zf_t = map.z_tilde.rows(0, m_f).into_owned();
    let zs_t = map.z_tilde.rows(m_f, m_s).into_owned();
    let f_fast = model.field();
    let f_slow = model.field();
    let (zf2, zs2) = (zf.clone(), zs.clone());
    SpsSystem::new(
        map.partition,
        move |slow, fast| &zs_t * f_slow(&(&zf2 * fast + &zs2 * slow)),
        move |slow, fast| (&zf_t * f_fast(&(&zf * fast + &zs * slow))) * epsilon,
        epsilon,
    )
}

/// Coefficients of a quadratic scalar function of `n` variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoefficients {
    pub labels: Vec<String>,
    pub constant: f64,
    pub linear: Vec<f64>,
    /// Upper-triangular `(i, j, c)`: `c · w_i w_j`, `i <= j`.
    pub quadratic: Vec<(usize, usize, f64)>,
}

impl QuadraticCoefficients {
    /// Coefficient of the monomial named like `"U"`, `"V*W"`, `"U^2"` or `"1"`.
    pub fn get(&self, monomial: &str) -> Option<f64> {
        if monomial == "1" {
            return Some(self.constant);
        }
        let idx = |s: &str| self.labels.iter().position(|l| l == s);
        if let Some(base) = monomial.strip_suffix("^2") {
            let i = idx(base)?;
            return self.coefficient(i, i);
        }
        if let Some((a, b)) = monomial.split_once('*') {
            let (i, j) = (idx(a)?, idx(b)?);
            return self.coefficient(i.min(j), i.max(j));
        }
        idx(monomial).map(|i| self.linear[i])
    }

    fn coefficient(&self, i: usize, j: usize) -> Option<f64> {
        self.quadratic
            .iter()
            .find(|(a, b, _)| *a == i && *b == j)
            .map(|(_, _, c)| *c)
    }

    /// Monomial name and coefficient pairs in a fixed order.
    pub fn terms(&self) -> Vec<(String, f64)> {
        let mut out = vec![("1".to_string(), self.constant)];
        for (i, c) in self.linear.iter().enumerate() {
            out.push((self.labels[i].clone(), *c));
        }
        for &(i, j, c) in &self.quadratic {
            let name = if i == j {
                format!("{}^2", self.labels[i])
            } else {
                format!("{}*{}", self.labels[i], self.labels[j])
            };
            out.push((name, c));
        }
        out
    }
}

/// Expands a scalar function assumed quadratic around the origin; central
/// differences with a unit-scale step are exact for quadratics up to round-off.
pub fn quadratic_coefficients<F>(f: F, n: usize, labels: Vec<String>) -> Result<QuadraticCoefficients>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let origin = DVector::zeros(n);
    let vf = |w: &DVector<f64>| DVector::from_element(1, f(w));
    let grad = calculus::fd_jacobian(vf, &origin, 0.5)?;
    let hess = calculus::fd_hessian_tensor(vf, &origin, 0.5)?;
    let mut quadratic = Vec::new();
    for i in 0..n {
        for j in i..n {
            let h = hess.data[0][(i, j)];
            quadratic.push((i, j, if i == j { 0.5 * h } else { h }));
        }
    }
    Ok(QuadraticCoefficients {
        labels,
        constant: f(&origin),
        linear: grad.row(0).iter().copied().collect(),
        quadratic,
    })
}

/// Quadratic expansion of the decomposed fast rate `Z̃_f F(Z w)` (first fast row).
pub fn fast_rate_quadratic(
    map: &CoordinateMap,
    model: &ModelDefinition,
    labels: Vec<String>,
) -> Result<QuadraticCoefficients> {
    let n = map.dim();
    let zf_t = map.z_tilde.row(0).into_owned();
    let z = map.z.clone();
    let field = model.field();
    quadratic_coefficients(move |w| (&zf_t * field(&(&z * w)))[0], n, labels)
}
