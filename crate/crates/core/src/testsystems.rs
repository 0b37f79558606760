//! Small systems with closed-form manifolds or solutions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::LinearTransport;
use crate::model::{ModelDefinition, Partition, SpsSystem};
use crate::pde::Profile1D;

/// `u' = −u`, `ε v' = −(v − u)`.
pub fn linear_sps(eps: f64) -> Result<SpsSystem> {
    SpsSystem::new(Partition::new(1, 1), |u, _| -u.clone(), |u, v| -(v - u), eps)
}

/// Exact slow invariant manifold of [`linear_sps`]: `v = u / (1 − ε)`.
pub fn linear_sps_manifold(eps: f64, u: f64) -> f64 {
    u / (1.0 - eps)
}

/// `u_t = −a u + D Δu`, `v_t = −(v − c u) / ε + D Δv`. The line
/// `v = c u / (1 − a ε)` is invariant for every profile whose boundary
/// values lie on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearReactionDiffusion {
    pub a: f64,
    pub c: f64,
    pub diffusion: f64,
}

impl Default for LinearReactionDiffusion {
    fn default() -> Self {
        Self {
            a: 1.0,
            c: 2.0,
            diffusion: 0.05,
        }
    }
}

impl LinearReactionDiffusion {
    pub fn sps(&self, eps: f64) -> Result<SpsSystem> {
        let (a, c) = (self.a, self.c);
        SpsSystem::new(Partition::new(1, 1), move |u, _| u * -a, move |u, v| -(v - u * c), eps)
    }

    pub fn transport(&self) -> LinearTransport {
        LinearTransport::scalar(2, self.diffusion)
    }

    pub fn slope(&self, eps: f64) -> f64 {
        self.c / (1.0 - self.a * eps)
    }

    /// Profile on the exact manifold (rows `v`, `u`) with
    /// `u(x) = 1 + x + sin(πx) / 2`.
    pub fn manifold_profile(&self, eps: f64, n_interior: usize) -> Result<Profile1D> {
        let k = self.slope(eps);
        let h = 1.0 / (n_interior as f64 + 1.0);
        let u = |x: f64| 1.0 + x + 0.5 * (PI * x).sin();
        let fields = DMatrix::from_fn(2, n_interior, |r, i| {
            let ux = u((i + 1) as f64 * h);
            if r == 0 {
                k * ux
            } else {
                ux
            }
        });
        Profile1D::new(
            fields,
            DVector::from_vec(vec![k * u(0.0), u(0.0)]),
            DVector::from_vec(vec![k * u(1.0), u(1.0)]),
        )
    }
}

/// Single species without reaction.
pub fn heat_model() -> ModelDefinition {
    ModelDefinition::new(vec!["u".into()], |_| DVector::zeros(1))
        .expect("one label")
        .with_jacobian(|_| DMatrix::zeros(1, 1))
}

/// `exp(−δ π² t) sin(π x)`.
pub fn heat_exact(delta: f64, t: f64, x: f64) -> f64 {
    (-delta * PI * PI * t).exp() * (PI * x).sin()
}

/// `sin(πx)` on the interior grid with zero Dirichlet data.
pub fn heat_initial(n_interior: usize) -> Result<Profile1D> {
    let h = 1.0 / (n_interior as f64 + 1.0);
    let fields = DMatrix::from_fn(1, n_interior, |_, i| (PI * (i + 1) as f64 * h).sin());
    Profile1D::new(fields, DVector::zeros(1), DVector::zeros(1))
}

/// Default matrix of the linear test model.
pub fn default_linear_test_matrix() -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_vec(vec![-100.0, -1.0, -0.5]))
}

/// Parses `"a,b,c;d,e,f;g,h,i"` into a square matrix.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let bad = |reason: String| Error::InvalidParameter {
        name: "matrix",
        reason,
    };
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("{v:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad(format!("expected a square matrix, got rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// `u' = A u` with labels `u0, u1, ...`.
pub fn linear_test_model(matrix: DMatrix<f64>) -> Result<ModelDefinition> {
    ModelDefinition::linear(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PartitionedState;

    #[test]
    fn linear_sps_manifold_is_invariant() {
        let eps = 0.1;
        let sps = linear_sps(eps).unwrap();
        let u = 0.8;
        let s = PartitionedState::new(DVector::from_element(1, linear_sps_manifold(eps, u)), DVector::from_element(1, u));
        // d/dt (v − u/(1−ε)) = F_f/ε − F_s/(1−ε) vanishes on the manifold
        let dv = sps.fast(&s)[0] / eps;
        let du = sps.slow(&s)[0];
        assert!((dv - du / (1.0 - eps)).abs() < 1e-14);
    }

    #[test]
    fn rd_manifold_profile_is_invariant() {
        let sys = LinearReactionDiffusion::default();
        let eps = 0.05;
        let p = sys.manifold_profile(eps, 15).unwrap();
        let lap = sys.transport().apply(&p.fields, &p.left_bc, &p.right_bc).unwrap();
        let sps = sys.sps(eps).unwrap();
        let k = sys.slope(eps);
        for i in 0..15 {
            let s = crate::model::split_state(&p.point(i), Partition::new(1, 1)).unwrap();
            let vt = sps.fast(&s)[0] / eps + lap[(0, i)];
            let ut = sps.slow(&s)[0] + lap[(1, i)];
            assert!((vt - k * ut).abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_parsing() {
        let m = parse_matrix("1, 2; 3, 4").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(parse_matrix("1,2;3").is_err());
        assert!(parse_matrix("1,x;3,4").is_err());
    }

    #[test]
    fn heat_exact_at_start() {
        assert!((heat_exact(0.01, 0.0, 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(heat_initial(4).unwrap().left_bc, DVector::zeros(1));
    }
}
