//! Cost evaluation `c(x, y) = d(x, y)^2` by geodesic shooting.
//!
//! Normal extremals are parametrized by their initial covector; `connect`
//! solves the boundary-value problem `pi(e^H(x, p0)) = y` from many starts and
//! keeps the cheapest solution. The Grushin plane additionally has closed-form
//! geodesics from points of the singular line `x1 = 0`, and a brute-force
//! upper bound over piecewise-constant controls is available as an oracle.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ControlSystem;
use crate::hamiltonian::{flow_endpoint, ham_flow, PhasePoint, Trajectory, DEFAULT_STEP};

/// Below this `|b|` the geodesic formula switches to its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Grushin geodesic from `(0, delta)` with initial covector `(a, b)` at time `t`:
/// `x1 = (a/b) sin(bt)`, `x2 = delta + a^2/(4b^2) (2bt - sin 2bt)`.
pub fn grushin_geodesic(a: f64, b: f64, delta: f64, t: f64) -> [f64; 2] {
    if b.abs() < SERIES_THRESHOLD {
        let s = b * t;
        let s2 = s * s;
        let x1 = a * t * (1.0 - s2 / 6.0 + s2 * s2 / 120.0);
        // a^2/(4b^2) (2bt - sin 2bt) = a^2 t^2 (s/3 - s^3/15 + 2 s^5/315)
        let x2 = a * a * t * t * (s / 3.0 - s * s2 / 15.0 + 2.0 * s * s2 * s2 / 315.0);
        [x1, delta + x2]
    } else {
        let x1 = a / b * (b * t).sin();
        let x2 = a * a / (4.0 * b * b) * (2.0 * b * t - (2.0 * b * t).sin());
        [x1, delta + x2]
    }
}

/// `f(b) = (2b - sin 2b) / (4 sin^2 b)` on `(-pi, pi)`: odd, strictly
/// increasing, unbounded at both ends.
pub fn grushin_ratio(b: f64) -> f64 {
    if b.abs() < 1e-3 {
        let b2 = b * b;
        b / 3.0 + 2.0 * b * b2 / 45.0 + b * b2 * b2 / 315.0
    } else {
        (2.0 * b - (2.0 * b).sin()) / (4.0 * b.sin().powi(2))
    }
}

/// Inverse of [`grushin_ratio`] by bisection on `(-pi, pi)`.
pub fn grushin_ratio_inverse(value: f64) -> f64 {
    if value == 0.0 {
        return 0.0;
    }
    if value.is_infinite() {
        return PI.copysign(value);
    }
    let target = value.abs();
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if grushin_ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    (0.5 * (lo + hi)).copysign(value)
}

/// The minimizing covector `(a, b)` of the geodesic from `(0, delta)` reaching
/// `(x1, x2)` at time one, with `|b| <= pi`.
pub fn grushin_covector_from_axis(x1: f64, x2: f64, delta: f64) -> (f64, f64) {
    let dx2 = x2 - delta;
    if x1 == 0.0 {
        if dx2 == 0.0 {
            return (0.0, 0.0);
        }
        // Limit b -> +-pi: x2 - delta = a^2 / (2 pi) sign(b).
        return ((2.0 * PI * dx2.abs()).sqrt(), PI.copysign(dx2));
    }
    let b = grushin_ratio_inverse(dx2 / (x1 * x1));
    let a = if b.abs() <= 0.5 * PI {
        let sinc = if b.abs() < 1e-8 { 1.0 - b * b / 6.0 } else { b.sin() / b };
        x1 / sinc
    } else {
        // a^2 = 4 b^2 (x2 - delta) / (2b - sin 2b); better conditioned near |b| = pi.
        let a2 = 4.0 * b * b * dx2 / (2.0 * b - (2.0 * b).sin());
        a2.sqrt().copysign(x1)
    };
    (a, b)
}

/// Sub-Riemannian distance from `(0, delta)` to `target` in the Grushin plane.
pub fn grushin_distance_origin(target: [f64; 2], delta: f64) -> f64 {
    let (a, _) = grushin_covector_from_axis(target[0], target[1], delta);
    a.abs()
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootingOptions {
    /// Number of multistart seeds.
    pub starts: usize,
    /// Required boundary error `|x(1) - y|`.
    pub tol: f64,
    pub max_iter: usize,
    pub step: f64,
    /// Offset into the low-discrepancy seed sequence.
    pub seed: u64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            starts: 24,
            tol: 1e-8,
            max_iter: 80,
            step: DEFAULT_STEP,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeodesicSolution {
    pub p0: DVector<f64>,
    pub endpoint: DVector<f64>,
    /// `d^2 = 2 H(x, p0)`.
    pub cost: f64,
    pub boundary_error: f64,
    pub minimal: bool,
    pub trajectory: Trajectory,
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut f = inv;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    out
}

/// Deterministic Halton points inside the ball of radius `radius` in `R^dim`.
pub fn halton_ball(dim: usize, radius: f64, count: usize, offset: u64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut index = offset + 1;
    while out.len() < count {
        let v = DVector::from_iterator(
            dim,
            (0..dim).map(|d| radius * (2.0 * radical_inverse(index, PRIMES[d % PRIMES.len()]) - 1.0)),
        );
        index += 1;
        if v.norm() <= radius {
            out.push(v);
        }
    }
    out
}

struct Candidate {
    p0: DVector<f64>,
    endpoint: DVector<f64>,
    error: f64,
}

fn endpoint_of(sys: &dyn ControlSystem, x: &DVector<f64>, p: &DVector<f64>, step: f64) -> Option<DVector<f64>> {
    flow_endpoint(sys, &PhasePoint::new(x.clone(), p.clone()), 1.0, step)
        .ok()
        .map(|e| e.x)
}

fn endpoint_jacobian(sys: &dyn ControlSystem, x: &DVector<f64>, p: &DVector<f64>, step: f64) -> Option<DMatrix<f64>> {
    let n = p.len();
    let h = 1e-6 * (1.0 + p.amax());
    let mut jac = DMatrix::zeros(x.len(), n);
    for c in 0..n {
        let mut pp = p.clone();
        let mut pm = p.clone();
        pp[c] += h;
        pm[c] -= h;
        let col = (endpoint_of(sys, x, &pp, step)? - endpoint_of(sys, x, &pm, step)?) / (2.0 * h);
        jac.set_column(c, &col);
    }
    Some(jac)
}

/// Integrator step of the multistart search phase.
const COARSE_STEP: f64 = 1.0 / 64.0;
/// Boundary error (relative to `1 + |y - x|`) a coarse solution needs to be
/// polished.
const COARSE_ACCEPT: f64 = 1e-2;

/// Levenberg-Marquardt on `p0 -> pi(e^H(x, p0)) - y`.
fn shoot_from(
    sys: &dyn ControlSystem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    seed: DVector<f64>,
    tol: f64,
    max_iter: usize,
    step: f64,
) -> Candidate {
    let mut p = seed;
    let Some(mut end) = endpoint_of(sys, x, &p, step) else {
        return Candidate {
            error: f64::INFINITY,
            endpoint: x.clone(),
            p0: p,
        };
    };
    let mut r = &end - y;
    let mut err = r.norm();
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        if err <= tol {
            break;
        }
        let Some(jac) = endpoint_jacobian(sys, x, &p, step) else {
            break;
        };
        let jtj = jac.tr_mul(&jac);
        let jtr = jac.tr_mul(&r);
        let scale = jtj.diagonal().amax().max(1e-12);
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * scale;
            }
            let Some(delta) = a.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = &p + &delta;
            if let Some(trial_end) = endpoint_of(sys, x, &trial, step) {
                let trial_r = &trial_end - y;
                let trial_err = trial_r.norm();
                if trial_err < err {
                    p = trial;
                    end = trial_end;
                    r = trial_r;
                    err = trial_err;
                    lambda = (lambda / 5.0).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 8.0;
        }
        if !improved {
            break;
        }
    }
    Candidate {
        p0: p,
        endpoint: end,
        error: err,
    }
}

/// Least-squares covector whose maximizing velocity points from `x` to `y`.
fn straight_seed(sys: &dyn ControlSystem, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    let mut gram = DMatrix::zeros(n, n);
    for f in sys.fields(x) {
        gram += &f * f.transpose();
    }
    let rhs = y - x;
    gram.svd(true, true).solve(&rhs, 1e-12).unwrap_or_else(|_| rhs.clone())
}

/// Solves the geodesic boundary-value problem from `x` to `y` and returns the
/// cheapest converged extremal.
pub fn connect(
    sys: &dyn ControlSystem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    opts: &ShootingOptions,
) -> Result<GeodesicSolution> {
    let n = sys.state_dim();
    for got in [x.len(), y.len()] {
        if got != n {
            return Err(Error::Dimension { expected: n, got });
        }
    }
    if !(opts.tol > 0.0) || !(opts.step > 0.0) || opts.starts == 0 {
        return Err(Error::InvalidArgument(
            "shooting needs positive tol, step and at least one start".into(),
        ));
    }

    let radius = 2.0 * (1.0 + (y - x).norm()) * PI;
    let mut seeds = vec![straight_seed(sys, x, y)];
    seeds.extend(halton_ball(n, radius, opts.starts.saturating_sub(1), opts.seed));

    // Search on a coarse step, then polish the distinct survivors at the
    // requested one.
    let coarse_step = opts.step.max(COARSE_STEP);
    let mut candidates: Vec<Candidate> = seeds
        .into_par_iter()
        .map(|seed| shoot_from(sys, x, y, seed, opts.tol, opts.max_iter, coarse_step))
        .collect();
    let coarse_best = candidates.iter().map(|c| c.error).fold(f64::INFINITY, f64::min);
    if coarse_step > opts.step {
        let near = COARSE_ACCEPT * (1.0 + (y - x).norm());
        let mut distinct: Vec<Candidate> = Vec::new();
        for c in candidates.into_iter().filter(|c| c.error <= near) {
            let dup = distinct
                .iter()
                .any(|d| (&d.p0 - &c.p0).amax() <= 1e-6 * (1.0 + c.p0.amax()));
            if !dup {
                distinct.push(c);
            }
        }
        candidates = distinct
            .into_par_iter()
            .map(|c| shoot_from(sys, x, y, c.p0, opts.tol, opts.max_iter, opts.step))
            .collect();
    }

    let cost_of = |p: &DVector<f64>| 2.0 * sys.hamiltonian(x, p);
    let best_error = candidates
        .iter()
        .map(|c| c.error)
        .fold(f64::INFINITY, f64::min)
        .min(coarse_best);
    let mut best: Option<(f64, &Candidate)> = None;
    for c in candidates.iter().filter(|c| c.error <= opts.tol) {
        let cost = cost_of(&c.p0);
        if best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, c));
        }
    }
    let Some((cost, chosen)) = best else {
        return Err(Error::NoConvergence { best_error });
    };

    let mut minimal = true;
    if sys.name() == "grushin" && x[0] == 0.0 {
        let d = grushin_distance_origin([y[0], y[1]], x[1]);
        minimal = (cost - d * d).abs() <= 1e-6 * (1.0 + d * d);
    }
    let trajectory = ham_flow(sys, &PhasePoint::new(x.clone(), chosen.p0.clone()), 1.0, opts.step)?;
    Ok(GeodesicSolution {
        p0: chosen.p0.clone(),
        endpoint: chosen.endpoint.clone(),
        cost,
        boundary_error: chosen.error,
        minimal,
        trajectory,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceOptions {
    pub pieces: usize,
    /// Grid points per control axis in each coordinate search.
    pub grid: usize,
    /// Half-width of the initial control search box.
    pub radius: f64,
    /// Weight of the terminal penalty `|x(1) - y|^2`.
    pub penalty_weight: f64,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self {
            pieces: 4,
            grid: 9,
            radius: 8.0,
            penalty_weight: 1e4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceResult {
    /// `int |u|^2` of the returned piecewise-constant control.
    pub cost: f64,
    /// Terminal penalty of the returned control.
    pub penalty: f64,
    pub endpoint_error: f64,
    /// Control value per piece.
    pub controls: Vec<Vec<f64>>,
}

/// Largest `pieces * grid^k` accepted by [`brute_force_cost`].
pub const BRUTE_FORCE_BUDGET: usize = 4096;

const SUBSTEPS: usize = 16;

fn integrate_controls(sys: &dyn ControlSystem, x: &DVector<f64>, controls: &[DVector<f64>]) -> DVector<f64> {
    let h = 1.0 / (controls.len() * SUBSTEPS) as f64;
    let mut s = x.clone();
    for u in controls {
        for _ in 0..SUBSTEPS {
            let k1 = sys.dynamics(&s, u);
            let k2 = sys.dynamics(&(&s + &k1 * (0.5 * h)), u);
            let k3 = sys.dynamics(&(&s + &k2 * (0.5 * h)), u);
            let k4 = sys.dynamics(&(&s + &k3 * h), u);
            s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    s
}

fn control_energy(controls: &[DVector<f64>]) -> f64 {
    controls.iter().map(|u| u.norm_squared()).sum::<f64>() / controls.len() as f64
}

/// Upper bound on `c(x, y)` over piecewise-constant controls. Each seed goes
/// through a coordinate grid search on energy plus a quadratic terminal
/// penalty, then damped minimum-norm steps that land exactly on the terminal
/// constraint. The cheapest feasible control wins.
pub fn brute_force_cost(
    sys: &dyn ControlSystem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    opts: &BruteForceOptions,
) -> Result<BruteForceResult> {
    let k = sys.control_dim();
    let n = sys.state_dim();
    for got in [x.len(), y.len()] {
        if got != n {
            return Err(Error::Dimension { expected: n, got });
        }
    }
    if opts.pieces == 0 || opts.grid < 2 || !(opts.radius > 0.0) {
        return Err(Error::InvalidArgument(
            "brute force needs pieces >= 1, grid >= 2 and a positive radius".into(),
        ));
    }
    let required = opts
        .grid
        .checked_pow(k as u32)
        .and_then(|g| g.checked_mul(opts.pieces))
        .unwrap_or(usize::MAX);
    if required > BRUTE_FORCE_BUDGET {
        return Err(Error::BudgetExceeded {
            required,
            limit: BRUTE_FORCE_BUDGET,
        });
    }

    let objective = |controls: &[DVector<f64>]| {
        let end = integrate_controls(sys, x, controls);
        control_energy(controls) + opts.penalty_weight * (end - y).norm_squared()
    };
    let offsets: Vec<DVector<f64>> = (0..opts.grid.pow(k as u32))
        .map(|mut idx| {
            DVector::from_iterator(
                k,
                (0..k).map(|_| {
                    let c = idx % opts.grid;
                    idx /= opts.grid;
                    -1.0 + 2.0 * c as f64 / (opts.grid - 1) as f64
                }),
            )
        })
        .collect();

    // Seeds: zero control, the straight-line control, and low-discrepancy
    // samples of the control box.
    let straight = {
        let p = straight_seed(sys, x, y);
        sys.maximizing_control(x, &p)
    };
    let pieces = opts.pieces;
    let dim = pieces * k;
    let unflatten =
        |v: &DVector<f64>| -> Vec<DVector<f64>> { (0..pieces).map(|p| v.rows(p * k, k).into_owned()).collect() };
    let mut seeds = vec![vec![DVector::zeros(k); pieces], vec![straight; pieces]];
    seeds.extend(
        halton_ball(dim, opts.radius, BRUTE_FORCE_SEEDS, 0)
            .iter()
            .map(unflatten),
    );

    let search = |controls: Vec<DVector<f64>>| {
        let controls = grid_search(&objective, &offsets, controls, opts);
        let controls = polish(sys, x, y, controls, k);
        let miss = (integrate_controls(sys, x, &controls) - y).norm();
        (control_energy(&controls), miss, controls)
    };
    let feasible = 1e-10 * (1.0 + y.norm());
    let (_, _, controls) = seeds
        .into_par_iter()
        .map(search)
        .collect::<Vec<_>>()
        .into_iter()
        .min_by(|a, b| {
            let rank = |c: &(f64, f64, Vec<DVector<f64>>)| if c.1 <= feasible { (0, c.0) } else { (1, c.1) };
            let (ra, rb) = (rank(a), rank(b));
            ra.0.cmp(&rb.0).then(ra.1.total_cmp(&rb.1))
        })
        .expect("at least one seed");

    let end = integrate_controls(sys, x, &controls);
    let miss = (end - y).norm();
    Ok(BruteForceResult {
        cost: control_energy(&controls),
        penalty: opts.penalty_weight * miss * miss,
        endpoint_error: miss,
        controls: controls.iter().map(|u| u.as_slice().to_vec()).collect(),
    })
}

/// Number of sampled seeds in [`brute_force_cost`] besides the zero and
/// straight-line controls.
pub const BRUTE_FORCE_SEEDS: usize = 14;

/// Coordinate search over `grid^k` offsets per piece with a shrinking box.
fn grid_search<F>(
    objective: &F,
    offsets: &[DVector<f64>],
    mut controls: Vec<DVector<f64>>,
    opts: &BruteForceOptions,
) -> Vec<DVector<f64>>
where
    F: Fn(&[DVector<f64>]) -> f64,
{
    let mut value = objective(&controls);
    let mut width = opts.radius;
    while width > 1e-2 * opts.radius {
        let mut improved = true;
        let mut sweeps = 0;
        while improved && sweeps < 6 {
            improved = false;
            sweeps += 1;
            for piece in 0..controls.len() {
                let base = controls[piece].clone();
                let mut best = (value, base.clone());
                for off in offsets {
                    controls[piece] = &base + off * width;
                    let v = objective(&controls);
                    if v < best.0 {
                        best = (v, controls[piece].clone());
                    }
                }
                controls[piece] = best.1;
                if best.0 < value - 1e-15 * value.abs() {
                    value = best.0;
                    improved = true;
                }
            }
        }
        width *= 2.0 / (opts.grid - 1) as f64;
    }
    controls
}

/// Damped minimum-norm steps on the linearized constraint `x(1) = y`; the
/// fixed point is a KKT point of `min |u|^2` subject to the endpoint.
fn polish(
    sys: &dyn ControlSystem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    controls: Vec<DVector<f64>>,
    k: usize,
) -> Vec<DVector<f64>> {
    let pieces = controls.len();
    let dim = pieces * k;
    let n = x.len();
    let unflatten =
        |v: &DVector<f64>| -> Vec<DVector<f64>> { (0..pieces).map(|p| v.rows(p * k, k).into_owned()).collect() };
    let endpoint = |v: &DVector<f64>| integrate_controls(sys, x, &unflatten(v));
    let merit = |v: &DVector<f64>| v.norm_squared() / pieces as f64 + 1e3 * (endpoint(v) - y).norm();
    let mut u = DVector::from_iterator(dim, controls.iter().flat_map(|c| c.iter().cloned()));
    for _ in 0..200 {
        let end = endpoint(&u);
        let miss = y - &end;
        let h = 1e-7 * (1.0 + u.amax());
        let mut jac = DMatrix::zeros(n, dim);
        for c in 0..dim {
            let mut up = u.clone();
            let mut um = u.clone();
            up[c] += h;
            um[c] -= h;
            jac.set_column(c, &((endpoint(&up) - endpoint(&um)) / (2.0 * h)));
        }
        let lu = (&jac * jac.transpose()).lu();
        let Some(w) = lu.solve(&(&jac * &u + &miss)) else {
            break;
        };
        let target = jac.transpose() * w;
        let direction = &target - &u;
        if direction.norm() < 1e-13 * (1.0 + u.norm()) && miss.norm() < 1e-13 * (1.0 + y.norm()) {
            break;
        }
        let current = merit(&u);
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-6 {
            let trial = &u + &direction * alpha;
            if merit(&trial) < current {
                u = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            // Pure feasibility correction as a last resort.
            let Some(w) = lu.solve(&miss) else {
                break;
            };
            u += jac.transpose() * w;
            if miss.norm() < 1e-13 * (1.0 + y.norm()) {
                break;
            }
        }
    }
    unflatten(&u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_system;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn geodesic_formula_examples() {
        assert_eq!(grushin_geodesic(1.0, 0.0, 0.0, 1.0), [1.0, 0.0]);
        let [x1, x2] = grushin_geodesic(1.0, PI, 0.0, 1.0);
        assert!(x1.abs() < 1e-15);
        assert!((x2 - 1.0 / (2.0 * PI)).abs() < 1e-15);
        for b in [-2.0, 0.0, 1e-6, 3.0] {
            assert_eq!(grushin_geodesic(0.0, b, 3.0, 0.7), [0.0, 3.0]);
        }
    }

    #[test]
    fn geodesic_series_is_continuous_at_the_seam() {
        for (a, t) in [(1.0, 1.0), (-2.5, 1.0), (3.0, 0.4)] {
            for sign in [1.0, -1.0] {
                let below = grushin_geodesic(a, sign * SERIES_THRESHOLD * (1.0 - 1e-12), 0.2, t);
                let above = grushin_geodesic(a, sign * SERIES_THRESHOLD, 0.2, t);
                assert!((below[0] - above[0]).abs() < 1e-10);
                assert!((below[1] - above[1]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ratio_inverse_roundtrip() {
        for b in [-3.1, -2.0, -0.5, -1e-5, 0.0, 1e-7, 0.3, 1.5, 2.9, 3.13] {
            let back = grushin_ratio_inverse(grushin_ratio(b));
            assert!((back - b).abs() < 1e-12, "b = {b}, back = {back}");
        }
    }

    #[test]
    fn ratio_is_increasing() {
        let mut prev = f64::NEG_INFINITY;
        for i in 1..2000 {
            let b = -PI + i as f64 * (2.0 * PI / 2000.0);
            let f = grushin_ratio(b);
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(grushin_distance_origin([1.0, 0.0], 0.0), 1.0);
        assert!((grushin_distance_origin([0.0, 1.0], 0.0) - (2.0 * PI).sqrt()).abs() < 1e-12);
        assert_eq!(grushin_distance_origin([0.0, 0.0], 0.0), 0.0);
        // mpmath, 40 digits, bisection on f.
        let frozen = [
            ([1.0, 1.0], 1.784_101_110_980_048_2),
            ([0.5, -0.3], 0.988_868_708_321_755_1),
            ([2.0, 0.1], 2.001_873_420_126_382_4),
            ([-0.7, 0.4], 1.121_203_956_753_448_5),
            ([0.2, 0.9], 2.180_343_747_029_728_4),
        ];
        for (target, d) in frozen {
            assert!((grushin_distance_origin(target, 0.0) - d).abs() < 1e-11, "{target:?}");
        }
        // Translation invariance in x2.
        assert!((grushin_distance_origin([1.0, 3.0], 2.0) - grushin_distance_origin([1.0, 1.0], 0.0)).abs() < 1e-14);
    }

    #[test]
    fn covector_reproduces_target() {
        for target in [
            [1.0, 1.0],
            [0.5, -0.3],
            [-0.7, 0.4],
            [0.2, 0.9],
            [0.0, 1.0],
            [0.0, -2.0],
        ] {
            let (a, b) = grushin_covector_from_axis(target[0], target[1], 0.0);
            let reached = grushin_geodesic(a, b, 0.0, 1.0);
            assert!((reached[0] - target[0]).abs() < 1e-9, "{target:?} -> {reached:?}");
            assert!((reached[1] - target[1]).abs() < 1e-9, "{target:?} -> {reached:?}");
        }
    }

    #[test]
    fn connect_examples() {
        let g = make_system("grushin").unwrap();
        let opts = ShootingOptions::default();
        let sol = connect(&g, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &opts).unwrap();
        assert!((sol.cost - 1.0).abs() < 1e-8);
        assert!((sol.p0.clone() - v(&[1.0, 0.0])).amax() < 1e-7);
        assert!(sol.minimal);

        let sol = connect(&g, &v(&[0.0, 0.0]), &v(&[0.0, 1.0]), &opts).unwrap();
        assert!((sol.cost - 2.0 * PI).abs() < 1e-6, "cost {}", sol.cost);
        assert!(sol.boundary_error <= 1e-8);
        assert!(sol.minimal);

        let e = make_system("euclidean2").unwrap();
        let sol = connect(&e, &v(&[0.0, 0.0]), &v(&[3.0, 4.0]), &opts).unwrap();
        assert!((sol.cost - 25.0).abs() < 1e-8);
        let mid = &sol.trajectory.states[500];
        assert!((mid - v(&[1.5, 2.0])).amax() < 1e-8);
    }

    #[test]
    fn solution_invariants() {
        let h = make_system("heisenberg").unwrap();
        let x = v(&[0.1, -0.2, 0.3]);
        let sol = connect(&h, &x, &v(&[0.5, 0.4, -0.2]), &ShootingOptions::default()).unwrap();
        assert!(sol.cost >= 0.0 && sol.boundary_error >= 0.0);
        let energy = h.hamiltonian(&x, &sol.p0);
        assert!((sol.cost - 2.0 * energy).abs() < 1e-8);
        assert_eq!(sol.trajectory.states[0], x);
    }

    #[test]
    fn connect_reports_no_convergence() {
        let g = make_system("grushin").unwrap();
        let opts = ShootingOptions {
            starts: 1,
            max_iter: 0,
            ..ShootingOptions::default()
        };
        match connect(&g, &v(&[0.0, 0.0]), &v(&[0.0, 1.0]), &opts) {
            Err(Error::NoConvergence { best_error }) => assert!(best_error > 0.1),
            other => panic!("expected no convergence, got {other:?}"),
        }
    }

    #[test]
    fn halton_points_are_deterministic_and_inside() {
        let a = halton_ball(3, 2.0, 50, 7);
        let b = halton_ball(3, 2.0, 50, 7);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.norm() <= 2.0));
    }

    #[test]
    fn brute_force_examples() {
        let e = make_system("euclidean2").unwrap();
        let one = BruteForceOptions {
            pieces: 1,
            ..BruteForceOptions::default()
        };
        let r = brute_force_cost(&e, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &one).unwrap();
        assert!((r.cost - 1.0).abs() < 1e-10, "{r:?}");
        assert!(r.penalty < 1e-20);

        let g = make_system("grushin").unwrap();
        let two = BruteForceOptions {
            pieces: 2,
            ..BruteForceOptions::default()
        };
        let r = brute_force_cost(&g, &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &two).unwrap();
        assert!(r.cost >= 1.0 - 1e-9 && r.cost <= 1.1, "{r:?}");

        let r = brute_force_cost(&g, &v(&[0.0, 0.0]), &v(&[0.0, 1.0]), &BruteForceOptions::default()).unwrap();
        // Best four-piece control, from an independent SLSQP run: 6.627417.
        assert!(r.cost >= 2.0 * PI && r.cost <= 6.627_417 * 1.01, "{r:?}");
        assert!(r.penalty < 1e-12);
    }

    #[test]
    fn brute_force_budget() {
        let g = make_system("euclidean3").unwrap();
        let opts = BruteForceOptions {
            pieces: 4,
            grid: 17,
            ..BruteForceOptions::default()
        };
        assert!(matches!(
            brute_force_cost(&g, &v(&[0.0; 3]), &v(&[1.0, 0.0, 0.0]), &opts),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
