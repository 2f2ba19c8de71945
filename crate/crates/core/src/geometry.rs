//! Control systems, Lie brackets and the structural checks built on them.
//!
//! A [`ControlSystem`] is a control-affine system `x' = X_0(x) + sum_i u_i X_i(x)`
//! together with a Lagrangian and the maximized Hamiltonian
//! `H(x, p) = max_u [p . F(x, u) - L(x, u)]`. The default methods implement the
//! quadratic Lagrangian `L = 1/2 |u|^2`, for which the maximizer is
//! `u_i = p . X_i(x)` and `H = p . X_0 + 1/2 sum_i (p . X_i)^2`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::Trajectory;

/// Relative singular-value cutoff used by [`is_two_generating`] callers that
/// have no better estimate of the noise floor.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

pub trait ControlSystem: Send + Sync {
    fn name(&self) -> &str;

    /// State dimension `n`.
    fn state_dim(&self) -> usize;

    /// Number of controlled fields `k`.
    fn control_dim(&self) -> usize;

    /// The controlled fields `X_1(x), ..., X_k(x)`.
    fn fields(&self, x: &DVector<f64>) -> Vec<DVector<f64>>;

    /// Jacobian `dX_i/dx` (row `r` holds the gradient of component `r`).
    ///
    /// The default is a central finite difference; built-in systems override
    /// it with the analytic matrix.
    fn field_jacobian(&self, x: &DVector<f64>, i: usize) -> DMatrix<f64> {
        finite_difference_jacobian(x, |y| self.fields(y).swap_remove(i))
    }

    fn drift(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn drift_jacobian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.drift(x)?;
        Some(finite_difference_jacobian(x, |y| {
            self.drift(y).expect("drift presence is state independent")
        }))
    }

    /// Right-hand side `F(x, u)` of the control system.
    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut v = self.drift(x).unwrap_or_else(|| DVector::zeros(self.state_dim()));
        for (ui, xi) in u.iter().zip(self.fields(x)) {
            v.axpy(*ui, &xi, 1.0);
        }
        v
    }

    fn lagrangian(&self, _x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        0.5 * u.norm_squared()
    }

    fn lagrangian_grad_x(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }

    /// The control attaining the maximum in `H(x, p)`.
    fn maximizing_control(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.control_dim(), self.fields(x).iter().map(|xi| p.dot(xi)))
    }

    fn hamiltonian(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let quad: f64 = self.fields(x).iter().map(|xi| p.dot(xi).powi(2)).sum();
        0.5 * quad + self.drift(x).map_or(0.0, |x0| p.dot(&x0))
    }

    /// `(dH/dx, dH/dp)`.
    fn hamiltonian_grad(&self, x: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let u = self.maximizing_control(x, p);
        self.control_hamiltonian_grad(x, p, &u)
    }

    /// Gradient of the fixed-control Hamiltonian `H_u(x, p) = p . F(x, u) - L(x, u)`
    /// as `(dH_u/dx, dH_u/dp)`.
    fn control_hamiltonian_grad(
        &self,
        x: &DVector<f64>,
        p: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let n = self.state_dim();
        let mut dx = -self.lagrangian_grad_x(x, u);
        for (i, ui) in u.iter().enumerate() {
            if *ui != 0.0 {
                dx += self.field_jacobian(x, i).tr_mul(p) * *ui;
            }
        }
        if let Some(j0) = self.drift_jacobian(x) {
            dx += j0.tr_mul(p);
        }
        let dp = self.dynamics(x, u);
        debug_assert_eq!(dp.len(), n);
        (dx, dp)
    }
}

pub(crate) fn finite_difference_jacobian<F>(x: &DVector<f64>, f: F) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let h = 1e-6 * (1.0 + x.amax());
    let rows = f(x).len();
    let mut jac = DMatrix::zeros(rows, n);
    for c in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += h;
        xm[c] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(c, &col);
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// `R^2` with frame `{d/dx1, x1 d/dx2}`.
    Grushin,
    /// `R^3` with frame `X1 = d/dx - (y/2) d/dz`, `X2 = d/dy + (x/2) d/dz`.
    Heisenberg,
    /// `R^n` with the coordinate frame.
    Euclidean(usize),
}

/// One of the globally framed systems shipped with the crate.
#[derive(Debug, Clone)]
pub struct BuiltinSystem {
    kind: SystemKind,
    name: String,
}

impl BuiltinSystem {
    pub fn new(kind: SystemKind) -> Self {
        let name = match kind {
            SystemKind::Grushin => "grushin".to_string(),
            SystemKind::Heisenberg => "heisenberg".to_string(),
            SystemKind::Euclidean(n) => format!("euclidean{n}"),
        };
        Self { kind, name }
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }
}

/// Builds a built-in system from its name: `grushin`, `heisenberg`,
/// `euclidean<n>` or `euclidean(<n>)`.
pub fn make_system(name: &str) -> Result<BuiltinSystem> {
    let lower = name.trim().to_ascii_lowercase();
    let kind = match lower.as_str() {
        "grushin" => SystemKind::Grushin,
        "heisenberg" => SystemKind::Heisenberg,
        other => {
            let dim = other
                .strip_prefix("euclidean")
                .map(|rest| rest.trim_start_matches('(').trim_end_matches(')'))
                .and_then(|d| d.parse::<usize>().ok())
                .filter(|d| *d >= 1);
            match dim {
                Some(d) => SystemKind::Euclidean(d),
                None => return Err(Error::UnknownSystem(name.to_string())),
            }
        }
    };
    Ok(BuiltinSystem::new(kind))
}

impl ControlSystem for BuiltinSystem {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        match self.kind {
            SystemKind::Grushin => 2,
            SystemKind::Heisenberg => 3,
            SystemKind::Euclidean(n) => n,
        }
    }

    fn control_dim(&self) -> usize {
        match self.kind {
            SystemKind::Grushin | SystemKind::Heisenberg => 2,
            SystemKind::Euclidean(n) => n,
        }
    }

    fn fields(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        match self.kind {
            SystemKind::Grushin => vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, x[0]])],
            SystemKind::Heisenberg => vec![
                DVector::from_vec(vec![1.0, 0.0, -0.5 * x[1]]),
                DVector::from_vec(vec![0.0, 1.0, 0.5 * x[0]]),
            ],
            SystemKind::Euclidean(n) => (0..n)
                .map(|i| {
                    let mut e = DVector::zeros(n);
                    e[i] = 1.0;
                    e
                })
                .collect(),
        }
    }

    fn field_jacobian(&self, _x: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let n = self.state_dim();
        let mut jac = DMatrix::zeros(n, n);
        match (self.kind, i) {
            (SystemKind::Grushin, 1) => jac[(1, 0)] = 1.0,
            (SystemKind::Heisenberg, 0) => jac[(2, 1)] = -0.5,
            (SystemKind::Heisenberg, 1) => jac[(2, 0)] = 0.5,
            _ => {}
        }
        jac
    }

    fn drift_jacobian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn hamiltonian(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        match self.kind {
            SystemKind::Grushin => 0.5 * (p[0] * p[0] + x[0] * x[0] * p[1] * p[1]),
            _ => 0.5 * self.maximizing_control(x, p).norm_squared(),
        }
    }

    fn hamiltonian_grad(&self, x: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match self.kind {
            SystemKind::Grushin => (
                DVector::from_vec(vec![x[0] * p[1] * p[1], 0.0]),
                DVector::from_vec(vec![p[0], x[0] * x[0] * p[1]]),
            ),
            SystemKind::Heisenberg => {
                let u1 = p[0] - 0.5 * x[1] * p[2];
                let u2 = p[1] + 0.5 * x[0] * p[2];
                (
                    DVector::from_vec(vec![0.5 * u2 * p[2], -0.5 * u1 * p[2], 0.0]),
                    DVector::from_vec(vec![u1, u2, 0.5 * (x[0] * u2 - x[1] * u1)]),
                )
            }
            SystemKind::Euclidean(n) => (DVector::zeros(n), p.clone()),
        }
    }
}

/// A control-affine system with a quadratic Lagrangian defined by closures.
///
/// Field Jacobians fall back to finite differences.
type FieldsFn = Box<dyn Fn(&DVector<f64>) -> Vec<DVector<f64>> + Send + Sync>;
type DriftFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

pub struct CustomSystem {
    name: String,
    state_dim: usize,
    control_dim: usize,
    fields: FieldsFn,
    drift: Option<DriftFn>,
}

impl CustomSystem {
    pub fn new<F>(name: &str, state_dim: usize, control_dim: usize, fields: F) -> Self
    where
        F: Fn(&DVector<f64>) -> Vec<DVector<f64>> + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            state_dim,
            control_dim,
            fields: Box::new(fields),
            drift: None,
        }
    }

    pub fn with_drift<D>(mut self, drift: D) -> Self
    where
        D: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.drift = Some(Box::new(drift));
        self
    }
}

impl ControlSystem for CustomSystem {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn control_dim(&self) -> usize {
        self.control_dim
    }

    fn fields(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        (self.fields)(x)
    }

    fn drift(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.drift.as_ref().map(|d| d(x))
    }
}

fn check_index(sys: &dyn ControlSystem, i: usize) -> Result<()> {
    let count = sys.control_dim();
    if i >= count {
        return Err(Error::FieldIndex { index: i, count });
    }
    Ok(())
}

fn check_point(sys: &dyn ControlSystem, x: &DVector<f64>) -> Result<()> {
    if x.len() != sys.state_dim() {
        return Err(Error::Dimension {
            expected: sys.state_dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `[X_i, X_j](x) = DX_j X_i - DX_i X_j` (zero-based indices).
pub fn lie_bracket(sys: &dyn ControlSystem, i: usize, j: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_index(sys, i)?;
    check_index(sys, j)?;
    check_point(sys, x)?;
    if i == j {
        return Ok(DVector::zeros(x.len()));
    }
    let fields = sys.fields(x);
    let a = sys.field_jacobian(x, j) * &fields[i];
    let b = sys.field_jacobian(x, i) * &fields[j];
    Ok(a - b)
}

/// The fields at `x` followed by all brackets `[X_i, X_j]`, `i < j`.
fn first_two_layers(sys: &dyn ControlSystem, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    check_point(sys, x)?;
    let k = sys.control_dim();
    let mut vectors = sys.fields(x);
    for i in 0..k {
        for j in (i + 1)..k {
            vectors.push(lie_bracket(sys, i, j, x)?);
        }
    }
    Ok(vectors)
}

/// Numerical rank of `span{X_i(x)} + span{[X_i, X_j](x)}` with singular values
/// counted when above `tol` times the largest one.
pub fn two_step_rank(sys: &dyn ControlSystem, x: &DVector<f64>, tol: f64) -> Result<usize> {
    let vectors = first_two_layers(sys, x)?;
    let mat = DMatrix::from_columns(&vectors);
    let sv = mat.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) || !smax.is_finite() {
        return Ok(0);
    }
    Ok(sv.iter().filter(|s| **s > tol * smax).count())
}

/// Whether the fields and their first brackets span the tangent space at `x`.
pub fn is_two_generating(sys: &dyn ControlSystem, x: &DVector<f64>, tol: f64) -> bool {
    if !(tol > 0.0) {
        return false;
    }
    match two_step_rank(sys, x, tol) {
        Ok(rank) => rank == sys.state_dim(),
        Err(_) => false,
    }
}

/// Largest violation of the Goh condition along a trajectory:
/// `max_t max_{i,j} { |p(t) . X_i(x(t))|, |p(t) . [X_i, X_j](x(t))| }`.
pub fn goh_residual(sys: &dyn ControlSystem, traj: &Trajectory) -> Result<f64> {
    if traj.covectors.is_empty() || traj.covectors.len() != traj.states.len() {
        return Err(Error::MissingCovectors);
    }
    let mut worst: f64 = 0.0;
    for (x, p) in traj.states.iter().zip(&traj.covectors) {
        for v in first_two_layers(sys, x)? {
            worst = worst.max(p.dot(&v).abs());
        }
    }
    Ok(worst)
}

/// Axis-aligned box of sample states.
#[derive(Debug, Clone, Serialize)]
pub struct SampleBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SampleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidArgument(
                "box bounds must have equal, nonzero length".into(),
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
        {
            return Err(Error::InvalidArgument("box must be bounded with lower <= upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; n],
            upper: vec![half_width; n],
        }
    }

    /// Tensor grid with `per_axis` points along every side.
    pub fn lattice(&self, per_axis: usize) -> Vec<DVector<f64>> {
        let n = self.lower.len();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(n as u32);
        (0..total)
            .map(|mut idx| {
                DVector::from_iterator(
                    n,
                    (0..n).map(|d| {
                        let k = idx % per_axis;
                        idx /= per_axis;
                        let s = k as f64 / (per_axis - 1) as f64;
                        self.lower[d] + s * (self.upper[d] - self.lower[d])
                    }),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    /// The sampled quantity at the worst witness.
    pub worst_value: f64,
    pub witness_x: Vec<f64>,
    pub witness_u: Vec<f64>,
}

/// Sampled verdict on the three completeness hypotheses for a Lagrangian:
/// superlinear growth, a bound on `dL/dx` by `a (L + |u|) + b`, and strong
/// convexity in the control.
#[derive(Debug, Clone, Serialize)]
pub struct LagrangianReport {
    pub superlinear: ConditionCheck,
    pub state_derivative_bound: ConditionCheck,
    pub strong_convexity: ConditionCheck,
}

impl LagrangianReport {
    pub fn all_passed(&self) -> bool {
        self.superlinear.passed && self.state_derivative_bound.passed && self.strong_convexity.passed
    }
}

const CONTROL_LADDER: [f64; 9] = [0.5, 1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e4, 1e5];

fn control_directions(k: usize) -> Vec<DVector<f64>> {
    let mut dirs = Vec::new();
    for i in 0..k {
        for s in [1.0, -1.0] {
            let mut e = DVector::zeros(k);
            e[i] = s;
            dirs.push(e);
        }
    }
    if k > 1 {
        for mask in 0..(1usize << k) {
            let v = DVector::from_iterator(k, (0..k).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }));
            dirs.push(v.normalize());
        }
    }
    dirs
}

fn state_gradient<L>(lagrangian: &L, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>
where
    L: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    // Five-point stencil with a wide step: L can be huge at large |u|, so
    // cancellation dominates long before truncation does.
    let h = 1e-2 * (1.0 + x.amax());
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|d| {
            let at = |k: f64| {
                let mut xs = x.clone();
                xs[d] += k * h;
                lagrangian(&xs, u)
            };
            (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
        }),
    )
}

fn control_hessian<L>(lagrangian: &L, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>
where
    L: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let k = u.len();
    let h = 1e-4 * (1.0 + u.amax());
    let eval = |di: isize, i: usize, dj: isize, j: usize| {
        let mut v = u.clone();
        v[i] += di as f64 * h;
        v[j] += dj as f64 * h;
        lagrangian(x, &v)
    };
    let mut hess = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            hess[(i, j)] = if i == j {
                (eval(1, i, 0, i) - 2.0 * lagrangian(x, u) + eval(-1, i, 0, i)) / (h * h)
            } else {
                (eval(1, i, 1, j) - eval(1, i, -1, j) - eval(-1, i, 1, j) + eval(-1, i, -1, j)) / (4.0 * h * h)
            };
        }
    }
    0.5 * (&hess + hess.transpose())
}

/// Samples a Lagrangian `L(x, u)` over `sample_box` and a ladder of control
/// magnitudes and reports the three completeness conditions with their worst
/// witnesses.
pub fn validate_lagrangian<L>(lagrangian: L, control_dim: usize, sample_box: &SampleBox) -> LagrangianReport
where
    L: Fn(&DVector<f64>, &DVector<f64>) -> f64,
{
    let states = sample_box.lattice(5);
    let dirs = control_directions(control_dim);
    let zero = DVector::zeros(control_dim);
    let top = *CONTROL_LADDER.last().unwrap();

    // (1) bounded below and |u| / (L + K) -> 0.
    let min_l = states
        .iter()
        .flat_map(|x| {
            std::iter::once(lagrangian(x, &zero)).chain(
                CONTROL_LADDER
                    .iter()
                    .flat_map(|r| dirs.iter().map(move |d| (*r, d)))
                    .map(|(r, d)| lagrangian(x, &(d * r)))
                    .collect::<Vec<_>>(),
            )
        })
        .fold(f64::INFINITY, f64::min);
    let offset = (1.0 - min_l).max(1.0);
    let mut superlinear = ConditionCheck {
        name: "superlinear growth",
        passed: min_l.is_finite(),
        worst_value: 0.0,
        witness_x: states[0].as_slice().to_vec(),
        witness_u: zero.as_slice().to_vec(),
    };
    for x in &states {
        for d in &dirs {
            let u = d * top;
            let ratio = top / (lagrangian(x, &u) + offset);
            if !(ratio <= superlinear.worst_value) {
                superlinear.worst_value = ratio;
                superlinear.witness_x = x.as_slice().to_vec();
                superlinear.witness_u = u.as_slice().to_vec();
            }
        }
    }
    superlinear.passed &= superlinear.worst_value.is_finite() && superlinear.worst_value <= 1e-2;

    // (2) |dL/dx| <= a (L + |u|) + b: the constant `a` needed at the top of the
    // ladder must not exceed the one needed at moderate controls.
    let b = states
        .iter()
        .map(|x| state_gradient(&lagrangian, x, &zero).norm())
        .fold(0.0, f64::max);
    let mut max_grad: f64 = -1.0;
    let mut grad_witness = (states[0].clone(), zero.clone());
    let mut a_moderate: f64 = 0.0;
    let mut a_large: f64 = 0.0;
    for x in &states {
        let g0 = state_gradient(&lagrangian, x, &zero).norm();
        if g0 > max_grad {
            max_grad = g0;
            grad_witness = (x.clone(), zero.clone());
        }
        for r in CONTROL_LADDER {
            for d in &dirs {
                let u = d * r;
                let g = state_gradient(&lagrangian, x, &u).norm();
                if g > max_grad {
                    max_grad = g;
                    grad_witness = (x.clone(), u.clone());
                }
                let scale = lagrangian(x, &u) + r;
                let needed = if scale > 0.0 {
                    (g - b).max(0.0) / scale
                } else {
                    f64::INFINITY
                };
                if r >= 1e3 {
                    a_large = a_large.max(needed);
                } else {
                    a_moderate = a_moderate.max(needed);
                }
            }
        }
    }
    let state_derivative_bound = ConditionCheck {
        name: "state derivative bound",
        passed: max_grad.is_finite() && a_large <= 1.1 * a_moderate + 1e-9,
        worst_value: max_grad,
        witness_x: grad_witness.0.as_slice().to_vec(),
        witness_u: grad_witness.1.as_slice().to_vec(),
    };

    // (3) strong convexity in u.
    let mut strong_convexity = ConditionCheck {
        name: "strong convexity",
        passed: true,
        worst_value: f64::INFINITY,
        witness_x: states[0].as_slice().to_vec(),
        witness_u: zero.as_slice().to_vec(),
    };
    for x in &states {
        for r in [0.5, 1.0, 3.0, 10.0] {
            for d in &dirs {
                let u = d * r;
                let min_eig = control_hessian(&lagrangian, x, &u)
                    .symmetric_eigenvalues()
                    .iter()
                    .cloned()
                    .fold(f64::INFINITY, f64::min);
                if !(min_eig >= strong_convexity.worst_value) {
                    strong_convexity.worst_value = min_eig;
                    strong_convexity.witness_x = x.as_slice().to_vec();
                    strong_convexity.witness_u = u.as_slice().to_vec();
                }
            }
        }
    }
    strong_convexity.passed = strong_convexity.worst_value >= 1e-6;

    LagrangianReport {
        superlinear,
        state_derivative_bound,
        strong_convexity,
    }
}

/// [`validate_lagrangian`] applied to the system's own Lagrangian.
pub fn validate_system_lagrangian(sys: &dyn ControlSystem, sample_box: &SampleBox) -> Result<LagrangianReport> {
    if sample_box.lower.len() != sys.state_dim() {
        return Err(Error::Dimension {
            expected: sys.state_dim(),
            got: sample_box.lower.len(),
        });
    }
    Ok(validate_lagrangian(
        |x, u| sys.lagrangian(x, u),
        sys.control_dim(),
        sample_box,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn grushin_fields_at_sample_point() {
        let sys = make_system("grushin").unwrap();
        let f = sys.fields(&v(&[2.0, 5.0]));
        assert_eq!(f[0], v(&[1.0, 0.0]));
        assert_eq!(f[1], v(&[0.0, 2.0]));
    }

    #[test]
    fn euclidean_and_heisenberg_fields() {
        let e2 = make_system("euclidean(2)").unwrap();
        let f = e2.fields(&v(&[-3.0, 7.0]));
        assert_eq!(f, vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]);

        let h = make_system("heisenberg").unwrap();
        let f = h.fields(&v(&[0.0, 0.0, 0.0]));
        assert_eq!(f, vec![v(&[1.0, 0.0, 0.0]), v(&[0.0, 1.0, 0.0])]);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(make_system("sphere"), Err(Error::UnknownSystem(_))));
        assert!(matches!(make_system("euclidean0"), Err(Error::UnknownSystem(_))));
        assert_eq!(make_system("euclidean3").unwrap().state_dim(), 3);
    }

    #[test]
    fn brackets_of_builtin_frames() {
        let g = make_system("grushin").unwrap();
        for x in [[0.0, 0.0], [1.5, -2.0], [-3.0, 4.0]] {
            assert_eq!(lie_bracket(&g, 0, 1, &v(&x)).unwrap(), v(&[0.0, 1.0]));
        }
        let h = make_system("heisenberg").unwrap();
        assert_eq!(
            lie_bracket(&h, 0, 1, &v(&[0.3, -1.2, 2.0])).unwrap(),
            v(&[0.0, 0.0, 1.0])
        );
        assert_eq!(
            lie_bracket(&h, 1, 1, &v(&[0.3, -1.2, 2.0])).unwrap(),
            v(&[0.0, 0.0, 0.0])
        );
        assert!(matches!(
            lie_bracket(&h, 0, 2, &v(&[0.0, 0.0, 0.0])),
            Err(Error::FieldIndex { index: 2, count: 2 })
        ));
    }

    #[test]
    fn two_generating_examples() {
        let g = make_system("grushin").unwrap();
        assert!(is_two_generating(&g, &v(&[0.0, 0.0]), DEFAULT_RANK_TOL));
        let e = make_system("euclidean2").unwrap();
        assert!(is_two_generating(&e, &v(&[4.0, -1.0]), DEFAULT_RANK_TOL));
        let h = make_system("heisenberg").unwrap();
        assert!(is_two_generating(&h, &v(&[1.0, 1.0, 0.0]), DEFAULT_RANK_TOL));

        // A rank-one distribution on R^2 is never 2-generating.
        let line = CustomSystem::new("line", 2, 1, |_x| vec![DVector::from_vec(vec![1.0, 0.0])]);
        assert!(!is_two_generating(&line, &v(&[0.0, 0.0]), DEFAULT_RANK_TOL));
        assert!(!is_two_generating(&g, &v(&[0.0, 0.0]), 0.0));
    }

    #[test]
    fn custom_system_uses_finite_difference_jacobians() {
        let g = make_system("grushin").unwrap();
        let custom = CustomSystem::new("grushin-fd", 2, 2, |x| {
            vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, x[0]])]
        });
        let x = v(&[0.7, -0.2]);
        let exact = lie_bracket(&g, 0, 1, &x).unwrap();
        let fd = lie_bracket(&custom, 0, 1, &x).unwrap();
        assert!((exact - fd).amax() < 1e-8);
    }

    #[test]
    fn goh_residual_examples() {
        use crate::hamiltonian::{ham_flow, PhasePoint};
        let g = make_system("grushin").unwrap();
        let traj = ham_flow(&g, &PhasePoint::new(v(&[0.0, 0.0]), v(&[1.0, 1.0])), 1.0, 1e-3).unwrap();
        // p2 stays 1, so the bracket term p . d/dx2 is exactly 1; |p1| = |cos t| <= 1.
        assert!((goh_residual(&g, &traj).unwrap() - 1.0).abs() < 1e-12);

        let zero = ham_flow(&g, &PhasePoint::new(v(&[0.3, 0.1]), v(&[0.0, 0.0])), 1.0, 1e-2).unwrap();
        assert_eq!(goh_residual(&g, &zero).unwrap(), 0.0);

        let e = make_system("euclidean2").unwrap();
        let line = ham_flow(&e, &PhasePoint::new(v(&[0.0, 0.0]), v(&[1.0, 0.0])), 1.0, 1e-2).unwrap();
        assert!((goh_residual(&e, &line).unwrap() - 1.0).abs() < 1e-14);

        let mut bare = line.clone();
        bare.covectors.clear();
        assert!(matches!(goh_residual(&e, &bare), Err(Error::MissingCovectors)));
    }

    #[test]
    fn quadratic_lagrangian_is_complete() {
        let g = make_system("grushin").unwrap();
        let report = validate_system_lagrangian(&g, &SampleBox::cube(2, 3.0)).unwrap();
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn norm_lagrangian_fails_strong_convexity() {
        let report = validate_lagrangian(|_x, u| u.norm(), 2, &SampleBox::cube(2, 1.0));
        assert!(!report.strong_convexity.passed);
        assert!(report.strong_convexity.worst_value.abs() < 1e-3);
    }

    #[test]
    fn state_dependent_lagrangian_reports_boundary_witness() {
        let report = validate_lagrangian(|x, u| 0.5 * u.norm_squared() + x[0] * x[0], 2, &SampleBox::cube(2, 1.0));
        assert!(report.all_passed(), "{report:?}");
        assert!((report.state_derivative_bound.witness_x[0].abs() - 1.0).abs() < 1e-12);
        assert!(
            (report.state_derivative_bound.worst_value - 2.0).abs() < 1e-4,
            "{report:?}"
        );
    }

    #[test]
    fn cubic_state_growth_fails_the_derivative_bound() {
        // dL/dx grows like |u|^3 while L grows like |u|^2.
        let report = validate_lagrangian(
            |x, u| 0.5 * u.norm_squared() + x[0] * u.norm().powi(3) * 1e-3,
            2,
            &SampleBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap(),
        );
        assert!(!report.state_derivative_bound.passed);
    }
}
