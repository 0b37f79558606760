//! Three-species Michaelis-Menten benchmark with optional diffusion.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::{fd_jacobian, DEFAULT_FIRST_STEP};
use crate::error::{Error, Result};
use crate::gql::{self, CoordinateMap, GqlDecomposition, LinearizationMode};
use crate::model::{ModelDefinition, PartitionedState};
use crate::pde::{fast_projection, Profile1D, ProjectionOptions};

/// Resolved form of the Z balance, printed in run metadata.
pub const Z_EQUATION_NOTE: &str =
    "dZ/dt = (1/L2)(-XZ + 1 - Z - mu(1 - Y)) + mu(-L3 Y Z + (L4/L2)(1 - Y))";

/// Transformation `(X, Y, Z) = P (U, V, W)` as printed (two decimals).
pub const PRINTED_TRANSFORM: [[f64; 3]; 3] = [
    [0.73, -0.19, -0.66],
    [-0.05, 0.94, -0.33],
    [0.68, 0.28, 0.68],
];

/// Printed bracket of the quadratic `H₀(U, V, W)` (overall prefactor 0.007).
pub const PRINTED_H0_BRACKET: [(&str, f64); 10] = [
    ("1", 0.06),
    ("U^2", -0.7),
    ("V^2", 0.07),
    ("U", -1.03),
    ("U*V", -0.12),
    ("U*W", -0.06),
    ("V", 0.88),
    ("V*W", 0.42),
    ("W", -1.4),
    ("W^2", 0.63),
];

pub const PRINTED_H0_PREFACTOR: f64 = 0.007;

/// Far right boundary value `(X, Y, Z)(t, 1)`.
pub const FAR_RIGHT_BC: [f64; 3] = [2.0, 0.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub mu: f64,
    pub delta: f64,
}

impl Default for MmParams {
    fn default() -> Self {
        Self {
            l1: 0.99,
            l2: 1.0,
            l3: 0.05,
            l4: 0.1,
            mu: 1.0,
            delta: 0.01,
        }
    }
}

impl MmParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("L1", self.l1), ("L2", self.l2), ("L3", self.l3), ("L4", self.l4), ("mu", self.mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "mm parameter",
                    reason: format!("{name} must be positive, got {v}"),
                });
            }
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("must be nonnegative, got {}", self.delta),
            });
        }
        Ok(())
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("L1", self.l1),
            ("L2", self.l2),
            ("L3", self.l3),
            ("L4", self.l4),
            ("mu", self.mu),
            ("delta", self.delta),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "L1={} L2={} L3={} L4={} mu={} delta={}",
            self.l1, self.l2, self.l3, self.l4, self.mu, self.delta
        )
    }
}

/// Homogeneous right-hand side at `(X, Y, Z)`.
pub fn mm_rhs(p: &MmParams, s: &DVector<f64>) -> DVector<f64> {
    let (x, y, z) = (s[0], s[1], s[2]);
    let fx = -x * z + p.l1 * (1.0 - z - p.mu * (1.0 - y));
    let fy = -p.l3 * y * z + p.l4 / p.l2 * (1.0 - y);
    let fz = (-x * z + 1.0 - z - p.mu * (1.0 - y)) / p.l2 + p.mu * fy;
    DVector::from_vec(vec![fx, fy, fz])
}

/// Hand-derived Jacobian of [`mm_rhs`].
pub fn mm_jacobian(p: &MmParams, s: &DVector<f64>) -> DMatrix<f64> {
    let (x, y, z) = (s[0], s[1], s[2]);
    let gy = [0.0, -p.l3 * z - p.l4 / p.l2, -p.l3 * y];
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -z,
            p.l1 * p.mu,
            -x - p.l1,
            gy[0],
            gy[1],
            gy[2],
            -z / p.l2,
            p.mu / p.l2 + p.mu * gy[1],
            (-x - 1.0) / p.l2 + p.mu * gy[2],
        ],
    )
}

pub fn mm_model(p: &MmParams) -> ModelDefinition {
    let (pr, pj) = (*p, *p);
    ModelDefinition::new(vec!["X".into(), "Y".into(), "Z".into()], move |s| mm_rhs(&pr, s))
        .expect("three labels")
        .with_jacobian(move |s| mm_jacobian(&pj, s))
        .with_params(p.as_map())
}

fn newton(p: &MmParams, start: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let mut x = start.clone();
    let mut r = mm_rhs(p, &x);
    for _ in 0..100 {
        if r.amax() < tol {
            return Some(x);
        }
        let j = fd_jacobian(|s| mm_rhs(p, s), &x, DEFAULT_FIRST_STEP).ok()?;
        let dx = j.lu().solve(&r)?;
        let mut lambda = 1.0;
        loop {
            let trial = &x - &dx * lambda;
            let rt = mm_rhs(p, &trial);
            if rt.amax() < r.amax() || lambda < 1e-6 {
                x = trial;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    (r.amax() < tol).then_some(x)
}

/// Equilibrium by damped Newton from `(1, 1, 0.5)`; uniqueness in `[0, 2]³`
/// is checked by restarting from the eight corners of the box.
pub fn mm_equilibrium(p: &MmParams) -> Result<DVector<f64>> {
    p.validate()?;
    let tol = 1e-13;
    let corners: Vec<DVector<f64>> = (0..8)
        .map(|k| DVector::from_vec((0..3).map(|b| if k >> b & 1 == 1 { 2.0 } else { 0.0 }).collect()))
        .collect();
    let in_box = |v: &DVector<f64>| v.iter().all(|c| (-1e-9..=2.0 + 1e-9).contains(c));
    let primary = newton(p, &DVector::from_vec(vec![1.0, 1.0, 0.5]), tol)
        .filter(|v| in_box(v))
        .or_else(|| corners.iter().filter_map(|c| newton(p, c, tol)).find(|v| in_box(v)))
        .ok_or_else(|| Error::EquilibriumNotFound("Newton failed from every start".into()))?;
    for c in &corners {
        if let Some(root) = newton(p, c, tol) {
            if in_box(&root) && (&root - &primary).amax() > 1e-8 {
                return Err(Error::EquilibriumNotFound(format!(
                    "second equilibrium {:?} in the box besides {:?}",
                    root.as_slice(),
                    primary.as_slice()
                )));
            }
        }
    }
    Ok(primary)
}

/// GQL decomposition with `T` the Jacobian at the equilibrium and one fast direction.
pub fn mm_decomposition(p: &MmParams) -> Result<GqlDecomposition> {
    let eq = mm_equilibrium(p)?;
    gql::decompose(&mm_model(p), &LinearizationMode::JacobianAt(eq), Some(1))
}

/// The printed transformation as a coordinate map (U fast).
pub fn printed_coordinates() -> Result<CoordinateMap> {
    let z = DMatrix::from_fn(3, 3, |i, j| PRINTED_TRANSFORM[i][j]);
    CoordinateMap::from_matrix(z, 1)
}

/// `H₀` in decomposed coordinates: the fast component of `Z̃ F(Z w)`.
pub fn h0_decomposed(map: &CoordinateMap, model: &ModelDefinition, state: &PartitionedState) -> Result<DVector<f64>> {
    let rates = map.decomposed_rates(model, &state.join())?;
    Ok(rates.rows(0, map.partition.m_f).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Far,
    Near,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Far => "far",
            ScenarioKind::Near => "near",
        }
    }
}

/// Boundary and initial data for one benchmark run. The left boundary is the
/// equilibrium; the initial profile is the straight line between the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub left_bc: Vec<f64>,
    pub right_bc: Vec<f64>,
    pub left_kind: String,
    pub ic: String,
    pub params: MmParams,
}

impl Scenario {
    pub fn initial_profile(&self, n_interior: usize) -> Result<Profile1D> {
        Profile1D::linear_ramp(
            &DVector::from_row_slice(&self.left_bc),
            &DVector::from_row_slice(&self.right_bc),
            n_interior,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenarios {
    pub far: Scenario,
    pub near: Scenario,
}

impl Scenarios {
    pub fn get(&self, kind: ScenarioKind) -> &Scenario {
        match kind {
            ScenarioKind::Far => &self.far,
            ScenarioKind::Near => &self.near,
        }
    }
}

/// Far scenario with right boundary `(2, 0, 1)`; near scenario with that
/// point projected along the fast direction of `map` onto `H₀ = 0`.
pub fn build_scenarios(p: &MmParams, map: &CoordinateMap) -> Result<Scenarios> {
    let eq = mm_equilibrium(p)?;
    let model = mm_model(p);
    let far_bc = DVector::from_row_slice(&FAR_RIGHT_BC);
    let near_bc = fast_projection(
        map,
        &far_bc,
        |s| h0_decomposed(map, &model, s),
        &ProjectionOptions::default(),
    )?;
    let make = |kind: ScenarioKind, right: &DVector<f64>| Scenario {
        name: kind.name().into(),
        kind,
        left_bc: eq.iter().copied().collect(),
        right_bc: right.iter().copied().collect(),
        left_kind: "equilibrium".into(),
        ic: "linear_ramp".into(),
        params: *p,
    };
    Ok(Scenarios {
        far: make(ScenarioKind::Far, &far_bc),
        near: make(ScenarioKind::Near, &near_bc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v3(a: f64, b: f64, c: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b, c])
    }

    #[test]
    fn rhs_at_far_boundary() {
        let p = MmParams::default();
        let f = mm_rhs(&p, &v3(2.0, 0.0, 1.0));
        assert!((f[1] - 0.1).abs() < 1e-15);
        // X-equation by hand: -2 + 0.99 (1 - 1 - 1) = -2.99
        assert!((f[0] + 2.99).abs() < 1e-14);
    }

    #[test]
    fn x_equation_without_z() {
        let p = MmParams::default();
        let y = 0.37;
        let f = mm_rhs(&p, &v3(1.4, y, 0.0));
        assert!((f[0] - p.l1 * (1.0 - p.mu * (1.0 - y))).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_properties() {
        let p = MmParams::default();
        let eq = mm_equilibrium(&p).unwrap();
        assert!(mm_rhs(&p, &eq).amax() < 1e-12);
        assert!((p.l3 * eq[1] * eq[2] - p.l4 / p.l2 * (1.0 - eq[1])).abs() < 1e-12);
        // closed form for the default parameters
        let r = 3f64.sqrt() - 1.0;
        assert!((eq - v3(0.0, r, r)).amax() < 1e-10);
        let ev = linalg::eigenvalues(&mm_jacobian(&p, &mm_equilibrium(&p).unwrap())).unwrap();
        assert!(ev.iter().all(|l| l.re < 0.0));
    }

    #[test]
    fn analytic_jacobian_matches_fd() {
        let p = MmParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let s = v3(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));
            let fd = fd_jacobian(|u| mm_rhs(&p, u), &s, 1e-5).unwrap();
            assert!((fd - mm_jacobian(&p, &s)).amax() < 1e-6);
        }
    }

    #[test]
    fn decomposition_is_one_fast_two_slow() {
        let d = mm_decomposition(&MmParams::default()).unwrap();
        assert_eq!((d.m_f(), d.m_s()), (1, 2));
        assert!(d.gap_ratio > 5.0 && d.epsilon < 1.0);
    }

    #[test]
    fn scenarios_share_left_boundary_and_ramp() {
        let p = MmParams::default();
        let d = mm_decomposition(&p).unwrap();
        let map = d.coordinates();
        let sc = build_scenarios(&p, &map).unwrap();
        assert_eq!(sc.far.right_bc, FAR_RIGHT_BC.to_vec());
        assert_eq!(sc.far.left_bc, sc.near.left_bc);
        let near = split_near(&map, &sc.near.right_bc);
        let h0 = h0_decomposed(&map, &mm_model(&p), &near).unwrap();
        assert!(h0.amax() < 1e-8);
        let prof = sc.far.initial_profile(9).unwrap();
        let ends = prof.with_boundaries();
        assert_eq!(ends[0].1.as_slice(), sc.far.left_bc.as_slice());
        assert_eq!(ends[10].1.as_slice(), FAR_RIGHT_BC.as_slice());
    }

    fn split_near(map: &CoordinateMap, bc: &[f64]) -> PartitionedState {
        map.to_decomposed(&DVector::from_row_slice(bc)).unwrap()
    }

    #[test]
    fn printed_transform_is_nearly_orthogonal() {
        let map = printed_coordinates().unwrap();
        let p = &map.z;
        assert!((p.transpose() * p - DMatrix::<f64>::identity(3, 3)).amax() < 0.02);
    }
}
