//! Vector-field models, fast/slow state partitions and singularly perturbed
//! systems in standard form.
//!
//! A [`ModelDefinition`] is the plain field `du/dt = F(u)` in the original
//! coordinates, where no fast/slow split is assumed. Once a coordinate change
//! is known, the field is rewritten as an [`SpsSystem`]
//!
//! ```text
//!     du/dt   = F_s(u, v)        (slow block, length m_s)
//!   ε dv/dt   = F_f(u, v)        (fast block, length m_f)
//! ```
//!
//! In stacked vectors the fast block always precedes the slow block.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::calculus;
use crate::error::{Error, Result};

pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
/// Block right-hand side evaluated at `(slow, fast)`.
pub type BlockField = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Autonomous vector field `du/dt = F(u)` with metadata.
#[derive(Clone)]
pub struct ModelDefinition {
    dim: usize,
    rhs: VectorField,
    jacobian: Option<MatrixField>,
    params: BTreeMap<String, f64>,
    labels: Vec<String>,
}

impl fmt::Debug for ModelDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelDefinition")
            .field("dim", &self.dim)
            .field("labels", &self.labels)
            .field("params", &self.params)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl ModelDefinition {
    pub fn new<F>(labels: Vec<String>, rhs: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if labels.is_empty() {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: "a model needs at least one variable".into(),
            });
        }
        Ok(Self {
            dim: labels.len(),
            rhs: Arc::new(rhs),
            jacobian: None,
            params: BTreeMap::new(),
            labels,
        })
    }

    /// Linear field `F(u) = A u`.
    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                context: "linear model matrix",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let labels = (0..matrix.nrows()).map(|i| format!("u{}", i + 1)).collect();
        let a = matrix.clone();
        let model = Self::new(labels, move |u| &a * u)?;
        Ok(model.with_jacobian(move |_| matrix.clone()))
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Shared handle to the right-hand side.
    pub fn field(&self) -> VectorField {
        Arc::clone(&self.rhs)
    }

    /// Evaluates `F(state)`.
    pub fn evaluate(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        if state.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "model state",
                expected: self.dim,
                actual: state.len(),
            });
        }
        let out = (self.rhs)(state);
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "model rhs output",
                expected: self.dim,
                actual: out.len(),
            });
        }
        Ok(out)
    }

    /// Analytic Jacobian when available, otherwise a central-difference one.
    pub fn jacobian(&self, state: &DVector<f64>) -> Result<DMatrix<f64>> {
        if state.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "model state",
                expected: self.dim,
                actual: state.len(),
            });
        }
        match &self.jacobian {
            Some(jac) => {
                let j = jac(state);
                if j.nrows() != self.dim || j.ncols() != self.dim {
                    return Err(Error::DimensionMismatch {
                        context: "model jacobian output",
                        expected: self.dim,
                        actual: j.nrows().max(j.ncols()),
                    });
                }
                Ok(j)
            }
            None => calculus::fd_jacobian(
                |u: &DVector<f64>| (self.rhs)(u),
                state,
                calculus::DEFAULT_FIRST_STEP,
            ),
        }
    }
}

/// Evaluates the model right-hand side at `state`.
pub fn evaluate_rhs(model: &ModelDefinition, state: &DVector<f64>) -> Result<DVector<f64>> {
    model.evaluate(state)
}

/// Sizes of the slow and fast blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Partition {
    pub m_s: usize,
    pub m_f: usize,
}

impl Partition {
    pub fn new(m_s: usize, m_f: usize) -> Self {
        Self { m_s, m_f }
    }

    pub fn dim(&self) -> usize {
        self.m_s + self.m_f
    }
}

/// A state split into its fast block `v` and slow block `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedState {
    pub fast: DVector<f64>,
    pub slow: DVector<f64>,
}

impl PartitionedState {
    pub fn new(fast: DVector<f64>, slow: DVector<f64>) -> Self {
        Self { fast, slow }
    }

    pub fn partition(&self) -> Partition {
        Partition::new(self.slow.len(), self.fast.len())
    }

    /// Stacked vector, fast block first.
    pub fn join(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.fast.len() + self.slow.len());
        out.rows_mut(0, self.fast.len()).copy_from(&self.fast);
        out.rows_mut(self.fast.len(), self.slow.len())
            .copy_from(&self.slow);
        out
    }
}

/// Splits a stacked state: the first `m_f` entries are fast, the rest slow.
pub fn split_state(state: &DVector<f64>, partition: Partition) -> Result<PartitionedState> {
    if partition.dim() != state.len() {
        return Err(Error::InconsistentPartition {
            partition_len: partition.dim(),
            state_len: state.len(),
        });
    }
    Ok(PartitionedState {
        fast: state.rows(0, partition.m_f).into_owned(),
        slow: state.rows(partition.m_f, partition.m_s).into_owned(),
    })
}

pub fn join_state(state: &PartitionedState) -> DVector<f64> {
    state.join()
}

/// Singularly perturbed system `du/dt = F_s(u,v)`, `ε dv/dt = F_f(u,v)`.
#[derive(Clone)]
pub struct SpsSystem {
    partition: Partition,
    slow_rhs: BlockField,
    fast_rhs: BlockField,
    epsilon: f64,
}

impl fmt::Debug for SpsSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpsSystem")
            .field("partition", &self.partition)
            .field("epsilon", &self.epsilon)
            .finish()
    }
}

impl SpsSystem {
    pub fn new<S, F>(partition: Partition, slow_rhs: S, fast_rhs: F, epsilon: f64) -> Result<Self>
    where
        S: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must lie in (0, 1), got {epsilon}"),
            });
        }
        if partition.m_f == 0 || partition.m_s == 0 {
            return Err(Error::InvalidParameter {
                name: "partition",
                reason: format!("both blocks must be non-empty, got {partition:?}"),
            });
        }
        Ok(Self {
            partition,
            slow_rhs: Arc::new(slow_rhs),
            fast_rhs: Arc::new(fast_rhs),
            epsilon,
        })
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same fields with a different small parameter.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("must lie in (0, 1), got {epsilon}"),
            });
        }
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    pub fn slow(&self, state: &PartitionedState) -> DVector<f64> {
        (self.slow_rhs)(&state.slow, &state.fast)
    }

    pub fn fast(&self, state: &PartitionedState) -> DVector<f64> {
        (self.fast_rhs)(&state.slow, &state.fast)
    }

    /// `F_f` as a function of the stacked (fast-first) state.
    pub fn fast_stacked(&self, stacked: &DVector<f64>) -> DVector<f64> {
        let m_f = self.partition.m_f;
        let fast = stacked.rows(0, m_f).into_owned();
        let slow = stacked.rows(m_f, self.partition.m_s).into_owned();
        (self.fast_rhs)(&slow, &fast)
    }

    /// `F_s` as a function of the stacked (fast-first) state.
    pub fn slow_stacked(&self, stacked: &DVector<f64>) -> DVector<f64> {
        let m_f = self.partition.m_f;
        let fast = stacked.rows(0, m_f).into_owned();
        let slow = stacked.rows(m_f, self.partition.m_s).into_owned();
        (self.slow_rhs)(&slow, &fast)
    }

    pub(crate) fn check_state(&self, state: &PartitionedState) -> Result<()> {
        if state.partition() != self.partition {
            return Err(Error::InconsistentPartition {
                partition_len: self.partition.dim(),
                state_len: state.fast.len() + state.slow.len(),
            });
        }
        Ok(())
    }
}
