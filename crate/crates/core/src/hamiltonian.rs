//! Hamiltonian flow on the cotangent bundle and Pontryagin maximum principle
//! diagnostics.
//!
//! The flow `e^{tH}` is integrated with the classical fixed-step fourth-order
//! Runge-Kutta scheme. Energy is monitored, not enforced.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ControlSystem;

/// Default integration step on the unit time horizon.
pub const DEFAULT_STEP: f64 = 1e-3;

/// A covector `p` based at the point `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(x: DVector<f64>, p: DVector<f64>) -> Self {
        Self { x, p }
    }

    pub fn from_slices(x: &[f64], p: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(x), DVector::from_column_slice(p))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }
}

/// A sampled extremal: states, covectors, maximizing controls and energy on a
/// common time grid starting at 0.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub covectors: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn endpoint(&self) -> PhasePoint {
        PhasePoint::new(
            self.states.last().cloned().unwrap_or_default(),
            self.covectors.last().cloned().unwrap_or_default(),
        )
    }

    /// Rebuilds controls and energy from the stored states and covectors.
    pub fn refresh_from_covectors(&mut self, sys: &dyn ControlSystem) {
        self.controls = self
            .states
            .iter()
            .zip(&self.covectors)
            .map(|(x, p)| sys.maximizing_control(x, p))
            .collect();
        self.energy = self
            .states
            .iter()
            .zip(&self.covectors)
            .map(|(x, p)| sys.hamiltonian(x, p))
            .collect();
    }
}

fn hamiltonian_field(sys: &dyn ControlSystem, x: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (dh_dx, dh_dp) = sys.hamiltonian_grad(x, p);
    (dh_dp, -dh_dx)
}

fn rk4_step(sys: &dyn ControlSystem, x: &DVector<f64>, p: &DVector<f64>, h: f64) -> (DVector<f64>, DVector<f64>) {
    let (k1x, k1p) = hamiltonian_field(sys, x, p);
    let (k2x, k2p) = hamiltonian_field(sys, &(x + &k1x * (0.5 * h)), &(p + &k1p * (0.5 * h)));
    let (k3x, k3p) = hamiltonian_field(sys, &(x + &k2x * (0.5 * h)), &(p + &k2p * (0.5 * h)));
    let (k4x, k4p) = hamiltonian_field(sys, &(x + &k3x * h), &(p + &k3p * h));
    let w = h / 6.0;
    let nx = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * w;
    let np = p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * w;
    (nx, np)
}

fn check_flow_args(sys: &dyn ControlSystem, start: &PhasePoint, t_final: f64, step: f64) -> Result<usize> {
    let n = sys.state_dim();
    for got in [start.x.len(), start.p.len()] {
        if got != n {
            return Err(Error::Dimension { expected: n, got });
        }
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_final must be positive, got {t_final}"
        )));
    }
    if !start.is_finite() {
        return Err(Error::BlowUp { time: 0.0 });
    }
    Ok(((t_final / step) - 1e-9).ceil().max(1.0) as usize)
}

/// A step escaped if it produced non-finite values or lost energy
/// conservation outright, which is how fixed-step RK4 passes through a
/// finite-time singularity without overflowing.
fn escaped(sys: &dyn ControlSystem, x: &DVector<f64>, p: &DVector<f64>, h0: f64) -> bool {
    if x.iter().chain(p.iter()).any(|v| !v.is_finite()) {
        return true;
    }
    let h = sys.hamiltonian(x, p);
    !((h - h0).abs() <= ENERGY_ESCAPE * h0.abs() + 1e-12)
}

/// Relative energy change treated as a blow-up.
pub const ENERGY_ESCAPE: f64 = 0.5;

/// Integrates `e^{tH}` from `start` up to `t_final` and samples every step.
/// The last step is shortened so that the final sample sits at `t_final`.
pub fn ham_flow(sys: &dyn ControlSystem, start: &PhasePoint, t_final: f64, step: f64) -> Result<Trajectory> {
    let steps = check_flow_args(sys, start, t_final, step)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        covectors: Vec::with_capacity(steps + 1),
        controls: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
    };
    let mut x = start.x.clone();
    let mut p = start.p.clone();
    let push = |traj: &mut Trajectory, t: f64, x: &DVector<f64>, p: &DVector<f64>| {
        traj.times.push(t);
        traj.controls.push(sys.maximizing_control(x, p));
        traj.energy.push(sys.hamiltonian(x, p));
        traj.states.push(x.clone());
        traj.covectors.push(p.clone());
    };
    push(&mut traj, 0.0, &x, &p);
    let h0 = traj.energy[0];
    for m in 1..=steps {
        let t_prev = (m - 1) as f64 * step;
        let t = if m == steps { t_final } else { m as f64 * step };
        let (nx, np) = rk4_step(sys, &x, &p, t - t_prev);
        if escaped(sys, &nx, &np, h0) {
            return Err(Error::BlowUp { time: t });
        }
        x = nx;
        p = np;
        push(&mut traj, t, &x, &p);
    }
    Ok(traj)
}

/// Same integration as [`ham_flow`] without storing the samples.
pub fn flow_endpoint(sys: &dyn ControlSystem, start: &PhasePoint, t_final: f64, step: f64) -> Result<PhasePoint> {
    let steps = check_flow_args(sys, start, t_final, step)?;
    let mut x = start.x.clone();
    let mut p = start.p.clone();
    let h0 = sys.hamiltonian(&x, &p);
    for m in 1..=steps {
        let t_prev = (m - 1) as f64 * step;
        let t = if m == steps { t_final } else { m as f64 * step };
        let (nx, np) = rk4_step(sys, &x, &p, t - t_prev);
        if escaped(sys, &nx, &np, h0) {
            return Err(Error::BlowUp { time: t });
        }
        x = nx;
        p = np;
    }
    Ok(PhasePoint::new(x, p))
}

/// `max_m |H(t_m) - H(0)|`.
pub fn energy_drift(traj: &Trajectory) -> f64 {
    let Some(h0) = traj.energy.first() else {
        return 0.0;
    };
    traj.energy.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
}

/// Finite set of controls over which the maximum condition is tested.
#[derive(Debug, Clone)]
pub struct ControlGrid {
    points: Vec<DVector<f64>>,
    spacing: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ControlGrid {
    /// `per_axis^k` points on the cube `[-radius, radius]^k`.
    pub fn uniform(control_dim: usize, radius: f64, per_axis: usize) -> Result<Self> {
        if control_dim == 0 || per_axis < 2 || !(radius > 0.0) {
            return Err(Error::InvalidArgument(
                "control grid needs k >= 1, at least 2 points per axis and a positive radius".into(),
            ));
        }
        let spacing = 2.0 * radius / (per_axis - 1) as f64;
        let total = per_axis.pow(control_dim as u32);
        let points = (0..total)
            .map(|mut idx| {
                DVector::from_iterator(
                    control_dim,
                    (0..control_dim).map(|_| {
                        let k = idx % per_axis;
                        idx /= per_axis;
                        -radius + k as f64 * spacing
                    }),
                )
            })
            .collect();
        Ok(Self {
            points,
            spacing,
            lower: vec![-radius; control_dim],
            upper: vec![radius; control_dim],
        })
    }

    /// An arbitrary nonempty set of controls with a declared resolution.
    pub fn from_points(points: Vec<DVector<f64>>, spacing: f64) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("control grid must be nonempty".into()))?;
        let k = first.len();
        if points.iter().any(|p| p.len() != k) {
            return Err(Error::InvalidArgument("control grid points differ in dimension".into()));
        }
        let lower = (0..k)
            .map(|d| points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min))
            .collect();
        let upper = (0..k)
            .map(|d| points.iter().map(|p| p[d]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        Ok(Self {
            points,
            spacing,
            lower,
            upper,
        })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Gap between the true maximum of `p . F - 1/2 |u|^2` and its maximum over
    /// the grid when the maximizer lies inside the grid box.
    pub fn slack(&self) -> f64 {
        let k = self.lower.len() as f64;
        0.5 * k * (0.5 * self.spacing).powi(2)
    }

    fn covers(&self, u: &DVector<f64>) -> bool {
        u.iter()
            .enumerate()
            .all(|(d, v)| *v >= self.lower[d] - 1e-12 && *v <= self.upper[d] + 1e-12)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PmpReport {
    /// Max deviation of the differenced trajectory from the Hamiltonian vector
    /// field of `H_{u(t)}`.
    pub adjoint_residual: f64,
    /// `max_m [max_grid (p . F - L) - (p . F(x, u_m) - L(x, u_m))]`, floored at 0.
    pub max_condition_residual: f64,
    /// The minimum condition of the Bolza form, evaluated on the covector `-p`.
    pub bolza_min_residual: f64,
    pub grid_slack: f64,
    pub grid_covers_controls: bool,
    pub samples: usize,
}

impl PmpReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.adjoint_residual <= tol
            && self.max_condition_residual <= tol + self.grid_slack
            && self.bolza_min_residual <= tol + self.grid_slack
    }
}

/// Derivative at `times[m]` of the interpolating polynomial through a window
/// of up to five samples around `m`.
fn sample_derivative(times: &[f64], values: &[DVector<f64>], m: usize) -> DVector<f64> {
    let len = times.len();
    let width = len.min(5);
    let start = m.saturating_sub(width / 2).min(len - width);
    let nodes = &times[start..start + width];
    let at = m - start;
    let mut out = DVector::zeros(values[m].len());
    for k in 0..width {
        let weight = if k == at {
            (0..width)
                .filter(|j| *j != at)
                .map(|j| 1.0 / (nodes[at] - nodes[j]))
                .sum::<f64>()
        } else {
            let num: f64 = (0..width)
                .filter(|j| *j != k && *j != at)
                .map(|j| nodes[at] - nodes[j])
                .product();
            let den: f64 = (0..width).filter(|j| *j != k).map(|j| nodes[k] - nodes[j]).product();
            num / den
        };
        out.axpy(weight, &values[start + k], 1.0);
    }
    out
}

/// Checks the maximized-Hamiltonian form of the maximum principle along
/// `traj`: the adjoint system for the recorded controls, and that each
/// recorded control maximizes `p . F(x, u) - L(x, u)` over `grid`.
pub fn pmp_check(sys: &dyn ControlSystem, traj: &Trajectory, grid: &ControlGrid) -> Result<PmpReport> {
    let len = traj.len();
    if len < 3 {
        return Err(Error::TooCoarse { samples: len });
    }
    if traj.covectors.len() != len || traj.states.len() != len || traj.controls.len() != len {
        return Err(Error::MissingCovectors);
    }
    if grid.points.first().map(|u| u.len()) != Some(sys.control_dim()) {
        return Err(Error::Dimension {
            expected: sys.control_dim(),
            got: grid.points.first().map_or(0, |u| u.len()),
        });
    }

    let mut adjoint: f64 = 0.0;
    let mut max_cond = f64::NEG_INFINITY;
    let mut min_cond = f64::NEG_INFINITY;
    let mut covers = true;
    for m in 0..len {
        let x = &traj.states[m];
        let p = &traj.covectors[m];
        let u = &traj.controls[m];
        let (dh_dx, dh_dp) = sys.control_hamiltonian_grad(x, p, u);
        let x_dot = sample_derivative(&traj.times, &traj.states, m);
        let p_dot = sample_derivative(&traj.times, &traj.covectors, m);
        adjoint = adjoint.max((x_dot - dh_dp).amax()).max((p_dot + dh_dx).amax());

        let value = |w: &DVector<f64>| p.dot(&sys.dynamics(x, w)) - sys.lagrangian(x, w);
        let recorded = value(u);
        let best = grid.points.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
        max_cond = max_cond.max(best - recorded);

        let q = -p;
        let bolza = |w: &DVector<f64>| q.dot(&sys.dynamics(x, w)) + sys.lagrangian(x, w);
        let recorded_b = bolza(u);
        let lowest = grid.points.iter().map(bolza).fold(f64::INFINITY, f64::min);
        min_cond = min_cond.max(recorded_b - lowest);

        covers &= grid.covers(u);
    }
    Ok(PmpReport {
        adjoint_residual: adjoint,
        max_condition_residual: max_cond.max(0.0),
        bolza_min_residual: min_cond.max(0.0),
        grid_slack: grid.slack(),
        grid_covers_controls: covers,
        samples: len,
    })
}

/// The Mayer form of a Bolza problem: the state is extended by `z` with
/// `z' = L(x, u)` and the running cost is dropped.
///
/// The extended covector is `(p, p_z)`; normal extremals have `p_z < 0` and
/// the maximized Hamiltonian is `(-p_z) H(x, p / (-p_z))`. Starting a flow
/// with `p_z = -1` reproduces the original extremal with `z(t) = int_0^t L`.
/// Inner systems are assumed to carry the quadratic Lagrangian.
pub struct MayerExtension<S> {
    inner: S,
    name: String,
}

pub fn bolza_to_mayer<S: ControlSystem>(sys: S) -> MayerExtension<S> {
    let name = format!("{}+cost", sys.name());
    MayerExtension { inner: sys, name }
}

impl<S: ControlSystem> MayerExtension<S> {
    pub fn inner(&self) -> &S {
        &self.inner
    }

    fn split(&self, xz: &DVector<f64>) -> DVector<f64> {
        xz.rows(0, self.inner.state_dim()).into_owned()
    }
}

impl<S: ControlSystem> ControlSystem for MayerExtension<S> {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        self.inner.state_dim() + 1
    }

    fn control_dim(&self) -> usize {
        self.inner.control_dim()
    }

    fn fields(&self, xz: &DVector<f64>) -> Vec<DVector<f64>> {
        self.inner
            .fields(&self.split(xz))
            .into_iter()
            .map(|f| f.push(0.0))
            .collect()
    }

    fn field_jacobian(&self, xz: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let n = self.inner.state_dim();
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        jac.view_mut((0, 0), (n, n))
            .copy_from(&self.inner.field_jacobian(&self.split(xz), i));
        jac
    }

    fn drift(&self, xz: &DVector<f64>) -> Option<DVector<f64>> {
        self.inner.drift(&self.split(xz)).map(|d| d.push(0.0))
    }

    fn drift_jacobian(&self, xz: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.inner.state_dim();
        self.inner.drift_jacobian(&self.split(xz)).map(|j| {
            let mut jac = DMatrix::zeros(n + 1, n + 1);
            jac.view_mut((0, 0), (n, n)).copy_from(&j);
            jac
        })
    }

    fn dynamics(&self, xz: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let x = self.split(xz);
        let cost = self.inner.lagrangian(&x, u);
        self.inner.dynamics(&x, u).push(cost)
    }

    fn lagrangian(&self, _xz: &DVector<f64>, _u: &DVector<f64>) -> f64 {
        0.0
    }

    fn lagrangian_grad_x(&self, xz: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(xz.len())
    }

    fn maximizing_control(&self, xz: &DVector<f64>, pz: &DVector<f64>) -> DVector<f64> {
        let n = self.inner.state_dim();
        let scale = -pz[n];
        if !(scale > 0.0) {
            return DVector::from_element(self.control_dim(), f64::NAN);
        }
        let p = pz.rows(0, n).into_owned() / scale;
        self.inner.maximizing_control(&self.split(xz), &p)
    }

    fn hamiltonian(&self, xz: &DVector<f64>, pz: &DVector<f64>) -> f64 {
        let n = self.inner.state_dim();
        let scale = -pz[n];
        let x = self.split(xz);
        let p = pz.rows(0, n).into_owned();
        if scale > 0.0 {
            scale * self.inner.hamiltonian(&x, &(p / scale))
        } else if self.inner.maximizing_control(&x, &p).iter().all(|v| *v == 0.0) {
            self.inner.drift(&x).map_or(0.0, |d| p.dot(&d))
        } else {
            f64::INFINITY
        }
    }

    fn control_hamiltonian_grad(
        &self,
        xz: &DVector<f64>,
        pz: &DVector<f64>,
        u: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        // H_u = p . F(x, u) + p_z L(x, u)
        let n = self.inner.state_dim();
        let x = self.split(xz);
        let p = pz.rows(0, n).into_owned();
        let (dx, dp) = self.inner.control_hamiltonian_grad(&x, &p, u);
        let dx = dx + self.inner.lagrangian_grad_x(&x, u) * (1.0 + pz[n]);
        (dx.push(0.0), dp.push(self.inner.lagrangian(&x, u)))
    }
}
