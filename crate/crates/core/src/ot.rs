//! Discrete Kantorovich problem: measures, cost matrices, an exact
//! transportation simplex with dual potentials, and c-transforms.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ControlSystem, SystemKind};
use crate::shooting::{connect, grushin_distance_origin, ShootingOptions};

/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("measure has no points".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidMeasure("points must have at least one coordinate".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidMeasure(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMeasure(format!("point {i} is not finite")));
            }
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidMeasure(format!("weight {i} is {}", weights[i])));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<DVector<f64>>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let weights = vec![w; points.len()];
        Self::from_unnormalized(points, weights)
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn from_unnormalized(points: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidMeasure(format!(
                "total weight {total} cannot be normalized"
            )));
        }
        let mut weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // Push the rounding residue onto the heaviest atom.
        let residue = 1.0 - weights.iter().sum::<f64>();
        if let Some(k) = (0..weights.len()).max_by(|&a, &b| weights[a].total_cmp(&weights[b])) {
            weights[k] += residue;
        }
        Self::new(points, weights)
    }

    /// A unit mass at `point`.
    pub fn dirac(point: DVector<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `mass[(i, j)]` is the mass moved from `x_i` to `y_j`.
    pub mass: DMatrix<f64>,
    /// `sum_ij mass_ij c_ij`.
    pub value: f64,
}

impl TransportPlan {
    /// Nonzero entries as `(i, j, mass)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.mass.nrows() {
            for j in 0..self.mass.ncols() {
                let m = self.mass[(i, j)];
                if m != 0.0 {
                    out.push((i, j, m));
                }
            }
        }
        out
    }

    /// Largest deviation of the plan's marginals from `mu` and `nu`.
    pub fn marginal_error(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let rows = (0..self.mass.nrows()).map(|i| (self.mass.row(i).sum() - mu[i]).abs());
        let cols = (0..self.mass.ncols()).map(|j| (self.mass.column(j).sum() - nu[j]).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPotentials {
    /// Potential on the source support.
    pub f: Vec<f64>,
    /// Potential on the target support.
    pub g: Vec<f64>,
}

impl DualPotentials {
    /// `sum_i mu_i f_i + sum_j nu_j g_j`.
    pub fn value(&self, mu: &[f64], nu: &[f64]) -> f64 {
        dot(&self.f, mu) + dot(&self.g, nu)
    }

    /// `max_ij (f_i + g_j - c_ij)`, nonpositive for a feasible pair.
    pub fn max_violation(&self, c: &DMatrix<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for (i, fi) in self.f.iter().enumerate() {
            for (j, gj) in self.g.iter().enumerate() {
                if c[(i, j)].is_finite() {
                    worst = worst.max(fi + gj - c[(i, j)]);
                }
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How `cost_matrix` evaluates `d^2`.
#[derive(Debug, Clone)]
pub enum CostBackend {
    /// Closed forms only; fails for pairs without one.
    ClosedForm,
    /// Geodesic shooting for every pair.
    Shooting(ShootingOptions),
    /// Closed form when available, shooting otherwise.
    Auto(ShootingOptions),
}

/// `d(x, y)^2` where a closed form is known: Euclidean systems, and Grushin
/// pairs with at least one endpoint on the singular line `x1 = 0`.
pub fn closed_form_cost(sys: &dyn ControlSystem, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
    match builtin_kind(sys)? {
        SystemKind::Euclidean(_) => Some((x - y).norm_squared()),
        SystemKind::Grushin => {
            let d = if x[0] == 0.0 {
                grushin_distance_origin([y[0], y[1]], x[1])
            } else if y[0] == 0.0 {
                grushin_distance_origin([x[0], x[1]], y[1])
            } else {
                return None;
            };
            Some(d * d)
        }
        SystemKind::Heisenberg => None,
    }
}

fn builtin_kind(sys: &dyn ControlSystem) -> Option<SystemKind> {
    let name = sys.name();
    match name {
        "grushin" => Some(SystemKind::Grushin),
        "heisenberg" => Some(SystemKind::Heisenberg),
        _ => name
            .strip_prefix("euclidean")
            .and_then(|n| n.parse().ok())
            .filter(|&n: &usize| n == sys.state_dim())
            .map(SystemKind::Euclidean),
    }
}

/// `c(x, y)` with the given backend.
pub fn pair_cost(backend: &CostBackend, sys: &dyn ControlSystem, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let shoot = |opts: &ShootingOptions| connect(sys, x, y, opts).map(|s| s.cost);
    match backend {
        CostBackend::ClosedForm => closed_form_cost(sys, x, y)
            .ok_or_else(|| Error::BackendUnavailable(format!("no closed-form cost on {} for this pair", sys.name()))),
        CostBackend::Shooting(opts) => shoot(opts),
        CostBackend::Auto(opts) => match closed_form_cost(sys, x, y) {
            Some(c) => Ok(c),
            None => shoot(opts),
        },
    }
}

/// `c_ij = d(x_i, y_j)^2`, evaluated in parallel over pairs.
pub fn cost_matrix(
    backend: &CostBackend,
    sys: &dyn ControlSystem,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<DMatrix<f64>> {
    let n = sys.state_dim();
    for m in [mu, nu] {
        if m.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: m.dim(),
            });
        }
    }
    let (rows, cols) = (mu.len(), nu.len());
    let entries: Vec<Result<f64>> = (0..rows * cols)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / cols, k % cols);
            let (x, y) = (&mu.points()[i], &nu.points()[j]);
            if x == y {
                return Ok(0.0);
            }
            pair_cost(backend, sys, x, y).map_err(|e| match e {
                Error::NoConvergence { best_error } => Error::PairNoConvergence { i, j, best_error },
                other => other,
            })
        })
        .collect();
    let mut c = DMatrix::zeros(rows, cols);
    for (k, entry) in entries.into_iter().enumerate() {
        c[(k / cols, k % cols)] = entry?;
    }
    Ok(c)
}

/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

/// Solves the Kantorovich problem between `mu` and `nu` for cost matrix `c`.
pub fn solve_kantorovich(
    c: &DMatrix<f64>,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(TransportPlan, DualPotentials)> {
    solve_transport(c, mu.weights(), nu.weights())
}

/// Transportation simplex on raw marginals. Entries of `c` may be `+inf`
/// (forbidden pairs); the instance is rejected if no finite plan exists.
pub fn solve_transport(c: &DMatrix<f64>, mu: &[f64], nu: &[f64]) -> Result<(TransportPlan, DualPotentials)> {
    let (m, n) = (mu.len(), nu.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty marginal".into()));
    }
    if c.nrows() != m {
        return Err(Error::Dimension {
            expected: m,
            got: c.nrows(),
        });
    }
    if c.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: c.ncols(),
        });
    }
    for w in mu.iter().chain(nu) {
        if !(*w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidMeasure(format!("negative or non-finite weight {w}")));
        }
    }
    let (sa, sb): (f64, f64) = (mu.iter().sum(), nu.iter().sum());
    if (sa - sb).abs() > 1e-9 * (1.0 + sa.abs()) {
        return Err(Error::InfeasibleMarginals { mu: sa, nu: sb });
    }
    let mut finite_max: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            let v = c[(i, j)];
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::NanCost { i, j });
            }
            if v.is_finite() {
                finite_max = finite_max.max(v.abs());
            }
        }
    }
    let big = 1e6 * (1.0 + finite_max) * (m + n) as f64;
    let work = c.map(|v| if v.is_finite() { v } else { big });

    let mut simplex = Simplex::northwest(&work, mu, nu);
    simplex.run(&work)?;

    let mut mass = DMatrix::zeros(m, n);
    for &(i, j) in &simplex.basis {
        mass[(i, j)] = simplex.flow[(i, j)];
    }
    for i in 0..m {
        for j in 0..n {
            if !c[(i, j)].is_finite() && mass[(i, j)] > 0.0 {
                return Err(Error::NoFinitePlan);
            }
        }
    }
    let value = plan_value(&mass, c);
    let duals = DualPotentials {
        f: simplex.u.clone(),
        g: simplex.v.clone(),
    };
    Ok((TransportPlan { mass, value }, duals))
}

fn plan_value(mass: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let mut value = 0.0;
    for i in 0..mass.nrows() {
        for j in 0..mass.ncols() {
            if mass[(i, j)] > 0.0 {
                value += mass[(i, j)] * c[(i, j)];
            }
        }
    }
    value
}

struct Simplex {
    m: usize,
    n: usize,
    /// Basic cells; always a spanning tree of the bipartite row/column graph.
    basis: Vec<(usize, usize)>,
    flow: DMatrix<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Simplex {
    fn northwest(c: &DMatrix<f64>, mu: &[f64], nu: &[f64]) -> Self {
        let (m, n) = (mu.len(), nu.len());
        let mut supply = mu.to_vec();
        let mut demand = nu.to_vec();
        let mut flow = DMatrix::zeros(m, n);
        let mut basis = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let q = supply[i].min(demand[j]).max(0.0);
            flow[(i, j)] = q;
            supply[i] -= q;
            demand[j] -= q;
            basis.push((i, j));
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        // Rounding residue of unequal totals lands on the last cell.
        flow[(m - 1, n - 1)] += supply[m - 1].max(0.0);
        let mut s = Self {
            m,
            n,
            basis,
            flow,
            u: vec![0.0; m],
            v: vec![0.0; n],
        };
        s.potentials(c);
        s
    }

    /// Tree adjacency: node `i < m` is row `i`, node `m + j` is column `j`.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for &(i, j) in &self.basis {
            adj[i].push(self.m + j);
            adj[self.m + j].push(i);
        }
        adj
    }

    fn potentials(&mut self, c: &DMatrix<f64>) {
        let adj = self.adjacency();
        let mut seen = vec![false; self.m + self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        self.u[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &next in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < self.m {
                    let j = next - self.m;
                    self.v[j] = c[(node, j)] - self.u[node];
                } else {
                    let j = node - self.m;
                    self.u[next] = c[(next, j)] - self.v[j];
                }
                queue.push_back(next);
            }
        }
    }

    /// Tree path from row `i` to column `j` as a list of cells.
    fn path(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let adj = self.adjacency();
        let total = self.m + self.n;
        let mut parent = vec![usize::MAX; total];
        parent[i] = i;
        let mut queue = VecDeque::from([i]);
        let goal = self.m + j;
        while let Some(node) = queue.pop_front() {
            if node == goal {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = goal;
        while node != i {
            let prev = parent[node];
            let cell = if prev < self.m {
                (prev, node - self.m)
            } else {
                (node, prev - self.m)
            };
            cells.push(cell);
            node = prev;
        }
        cells.reverse();
        cells
    }

    fn run(&mut self, c: &DMatrix<f64>) -> Result<()> {
        let scale = c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let eps = 1e-13 * scale;
        let cap = 50 * self.m * self.n + 1000;
        let mut degenerate_run = 0;
        for _ in 0..cap {
            let bland = degenerate_run >= DEGENERATE_SWITCH;
            let mut entering: Option<(usize, usize, f64)> = None;
            'scan: for i in 0..self.m {
                for j in 0..self.n {
                    let r = c[(i, j)] - self.u[i] - self.v[j];
                    if r < -eps {
                        if bland {
                            entering = Some((i, j, r));
                            break 'scan;
                        }
                        if entering.is_none_or(|(_, _, best)| r < best) {
                            entering = Some((i, j, r));
                        }
                    }
                }
            }
            let Some((ei, ej, _)) = entering else {
                return Ok(());
            };

            // Cycle: the entering cell gains; along the tree path from row ei
            // to column ej, even-indexed cells lose and odd-indexed ones gain.
            let path = self.path(ei, ej);
            let mut theta = f64::INFINITY;
            let mut leaving = 0;
            for (k, &cell) in path.iter().enumerate().step_by(2) {
                let f = self.flow[cell];
                let better = f < theta || (bland && f == theta && cell < path[leaving]);
                if better {
                    theta = f;
                    leaving = k;
                }
            }
            for (k, &cell) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.flow[cell] -= theta;
                } else {
                    self.flow[cell] += theta;
                }
            }
            self.flow[path[leaving]] = 0.0;
            self.flow[(ei, ej)] = theta;
            let out = path[leaving];
            let slot = self
                .basis
                .iter()
                .position(|&b| b == out)
                .expect("leaving cell is basic");
            self.basis[slot] = (ei, ej);
            degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
            self.potentials(c);
        }
        Err(Error::SolverStalled(cap))
    }
}

/// `f^{c1}(y_j) = min_i [c_ij - f_i]`.
pub fn c1_transform(f: &[f64], c: &DMatrix<f64>) -> Vec<f64> {
    (0..c.ncols())
        .map(|j| (0..c.nrows()).map(|i| c[(i, j)] - f[i]).fold(f64::INFINITY, f64::min))
        .collect()
}

/// `g^{c2}(x_i) = min_j [c_ij - g_j]`.
pub fn c2_transform(g: &[f64], c: &DMatrix<f64>) -> Vec<f64> {
    (0..c.nrows())
        .map(|i| (0..c.ncols()).map(|j| c[(i, j)] - g[j]).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Whether `c2(c1(f))` reproduces `f` to `tol` in max-norm.
pub fn is_c_concave(f: &[f64], c: &DMatrix<f64>, tol: f64) -> bool {
    if !(tol > 0.0) {
        return false;
    }
    let back = c2_transform(&c1_transform(f, c), c);
    back.iter().zip(f).all(|(a, b)| (a - b).abs() <= tol)
}

/// The c-concave representative `(c2(c1(f)), c1(f))` of a dual pair. It is
/// feasible and its dual value is at least that of `duals`.
pub fn c_concavify(duals: &DualPotentials, c: &DMatrix<f64>) -> DualPotentials {
    let g = c1_transform(&duals.f, c);
    let f = c2_transform(&g, c);
    DualPotentials { f, g }
}

/// Cells carrying mass above `tol` whose dual constraint is not tight.
pub fn support_slackness(
    plan: &TransportPlan,
    duals: &DualPotentials,
    c: &DMatrix<f64>,
    tol: f64,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..plan.mass.nrows() {
        for j in 0..plan.mass.ncols() {
            if plan.mass[(i, j)] > tol && (duals.f[i] + duals.g[j] - c[(i, j)]).abs() > tol {
                out.push((i, j));
            }
        }
    }
    out
}

/// Optimal duals in the relative interior of the optimal dual face.
///
/// Writing `phi(row i) = f_i` and `phi(col j) = -g_j`, dual feasibility plus
/// tightness on the plan's support are difference constraints. Every
/// shortest-path potential `d(s, .)` and every `-d(., s)` satisfies them; the
/// average over all sources keeps each constraint slack that any of them
/// leaves slack. Atoms of zero mass are filled in by c-transforms.
pub fn interior_duals(c: &DMatrix<f64>, plan: &TransportPlan, mu: &[f64], nu: &[f64]) -> Result<DualPotentials> {
    let (m, n) = (c.nrows(), c.ncols());
    let rows: Vec<usize> = (0..m).filter(|&i| mu[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| nu[j] > 0.0).collect();
    let (mr, nc) = (rows.len(), cols.len());
    let total = mr + nc;
    let support_tol = 1e-14;

    let scale = c.iter().filter(|v| v.is_finite()).fold(1.0f64, |a, v| a.max(v.abs()));
    // Roundoff leaves cycles of weight -1e-17 or so, which Floyd-Warshall
    // would compound geometrically. Every cycle uses a feasibility edge, so
    // padding those makes all cycles strictly positive.
    let relax = 1e-12 * scale;
    let mut dist = DMatrix::from_element(total, total, f64::INFINITY);
    for k in 0..total {
        dist[(k, k)] = 0.0;
    }
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            let cost = c[(i, j)];
            if !cost.is_finite() {
                continue;
            }
            let (r, col) = (a, mr + b);
            dist[(col, r)] = dist[(col, r)].min(cost + relax);
            if plan.mass[(i, j)] > support_tol {
                dist[(r, col)] = dist[(r, col)].min(-cost);
            }
        }
    }
    for k in 0..total {
        for a in 0..total {
            let dak = dist[(a, k)];
            if !dak.is_finite() {
                continue;
            }
            for b in 0..total {
                let through = dak + dist[(k, b)];
                if through < dist[(a, b)] {
                    dist[(a, b)] = through;
                }
            }
        }
    }
    for k in 0..total {
        if dist[(k, k)] < -1e-9 * scale {
            return Err(Error::InvalidArgument(
                "plan is not optimal for this cost: negative cycle in the dual constraints".into(),
            ));
        }
    }
    if dist.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "plan support does not connect the marginals".into(),
        ));
    }
    let phi: Vec<f64> = (0..total)
        .map(|v| (0..total).map(|s| dist[(s, v)] - dist[(v, s)]).sum::<f64>() / (2 * total) as f64)
        .collect();

    let mut f = vec![f64::NAN; m];
    let mut g = vec![f64::NAN; n];
    for (a, &i) in rows.iter().enumerate() {
        f[i] = phi[a];
    }
    // The padding leaves `-phi` on columns within `total * relax` of
    // feasible; the c-transform restores exact feasibility.
    for j in 0..n {
        g[j] = rows.iter().map(|&i| c[(i, j)] - f[i]).fold(f64::INFINITY, f64::min);
    }
    for i in (0..m).filter(|&i| mu[i] <= 0.0) {
        f[i] = (0..n).map(|j| c[(i, j)] - g[j]).fold(f64::INFINITY, f64::min);
    }
    Ok(DualPotentials { f, g })
}

/// Exhaustive minimum over permutation plans for equal-size uniform
/// marginals; `None` above 9 atoms.
pub fn assignment_brute_force(c: &DMatrix<f64>) -> Option<f64> {
    let n = c.nrows();
    if n != c.ncols() || n == 0 || n > 9 {
        return None;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, c, &mut best);
    Some(best / n as f64)
}

fn permute(perm: &mut [usize], k: usize, c: &DMatrix<f64>, best: &mut f64) {
    if k == perm.len() {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum();
        *best = best.min(total);
        return;
    }
    for s in k..perm.len() {
        perm.swap(k, s);
        permute(perm, k + 1, c, best);
        perm.swap(k, s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_system;
    use std::f64::consts::PI;

    fn pts(xs: &[&[f64]]) -> Vec<DVector<f64>> {
        xs.iter().map(|p| DVector::from_column_slice(p)).collect()
    }

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_iterator(rows.len(), rows[0].len(), rows.iter().flat_map(|r| r.iter().cloned()))
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(pts(&[&[0.0], &[1.0]]), vec![0.5, 0.5]).is_ok());
        assert!(DiscreteMeasure::new(pts(&[&[0.0], &[1.0]]), vec![0.6, 0.5]).is_err());
        assert!(DiscreteMeasure::new(pts(&[&[0.0], &[1.0]]), vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(pts(&[&[0.0], &[1.0, 2.0]]), vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(pts(&[&[f64::NAN]]), vec![1.0]).is_err());
        let u = DiscreteMeasure::uniform(pts(&[&[0.0], &[1.0], &[2.0]])).unwrap();
        assert!((u.weights().iter().sum::<f64>() - 1.0).abs() <= MASS_TOL);
    }

    #[test]
    fn cost_matrix_examples() {
        let e = make_system("euclidean2").unwrap();
        let m = DiscreteMeasure::uniform(pts(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        let c = cost_matrix(&CostBackend::ClosedForm, &e, &m, &m).unwrap();
        assert_eq!(c, mat(&[&[0.0, 1.0], &[1.0, 0.0]]));

        let g = make_system("grushin").unwrap();
        let origin = DiscreteMeasure::dirac(DVector::from_vec(vec![0.0, 0.0])).unwrap();
        let up = DiscreteMeasure::dirac(DVector::from_vec(vec![0.0, 1.0])).unwrap();
        let right = DiscreteMeasure::dirac(DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let c = cost_matrix(&CostBackend::ClosedForm, &g, &origin, &up).unwrap();
        assert!((c[(0, 0)] - 2.0 * PI).abs() < 1e-12);
        let c = cost_matrix(&CostBackend::Shooting(ShootingOptions::default()), &g, &origin, &up).unwrap();
        assert!((c[(0, 0)] - 2.0 * PI).abs() < 1e-6);
        let c = cost_matrix(&CostBackend::ClosedForm, &g, &origin, &right).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12);

        // Off-axis pairs have no closed form.
        let off = DiscreteMeasure::dirac(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        assert!(matches!(
            cost_matrix(&CostBackend::ClosedForm, &g, &off, &right),
            Err(Error::BackendUnavailable(_))
        ));
    }

    #[test]
    fn shooting_failures_name_the_pair() {
        let g = make_system("grushin").unwrap();
        let mu = DiscreteMeasure::uniform(pts(&[&[0.3, 0.0], &[0.5, 0.0]])).unwrap();
        let nu = DiscreteMeasure::dirac(DVector::from_vec(vec![0.4, 1.0])).unwrap();
        let opts = ShootingOptions {
            starts: 1,
            max_iter: 0,
            ..ShootingOptions::default()
        };
        match cost_matrix(&CostBackend::Shooting(opts), &g, &mu, &nu) {
            Err(Error::PairNoConvergence { i: 0, j: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn solver_examples() {
        let half = [0.5, 0.5];
        let (plan, duals) = solve_transport(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), &half, &half).unwrap();
        assert_eq!(plan.mass, mat(&[&[0.5, 0.0], &[0.0, 0.5]]));
        assert_eq!(plan.value, 0.0);
        assert!(duals.max_violation(&mat(&[&[0.0, 1.0], &[1.0, 0.0]])) <= 1e-12);

        let c = mat(&[&[1.0, 2.0], &[3.0, 1.0]]);
        let (plan, duals) = solve_transport(&c, &half, &half).unwrap();
        assert_eq!(plan.mass, mat(&[&[0.5, 0.0], &[0.0, 0.5]]));
        assert!((plan.value - 1.0).abs() < 1e-15);
        assert!((duals.f[0] + duals.g[0] - 1.0).abs() < 1e-12);
        assert!((duals.f[1] + duals.g[1] - 1.0).abs() < 1e-12);
        assert!(duals.max_violation(&c) <= 1e-12);
        assert!((duals.value(&half, &half) - 1.0).abs() < 1e-12);

        let c = mat(&[&[2.0, 5.0, 1.0]]);
        let nu = [0.2, 0.3, 0.5];
        let (plan, _) = solve_transport(&c, &[1.0], &nu).unwrap();
        assert_eq!(plan.mass, mat(&[&[0.2, 0.3, 0.5]]));
        assert!((plan.value - (0.4 + 1.5 + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn solver_rejects_bad_input() {
        let c = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!(matches!(
            solve_transport(&c, &[0.5, 0.5], &[0.7, 0.7]),
            Err(Error::InfeasibleMarginals { .. })
        ));
        let bad = mat(&[&[0.0, f64::NAN], &[1.0, 0.0]]);
        assert!(matches!(
            solve_transport(&bad, &[0.5, 0.5], &[0.5, 0.5]),
            Err(Error::NanCost { i: 0, j: 1 })
        ));
    }

    #[test]
    fn infinite_costs() {
        let inf = f64::INFINITY;
        let c = mat(&[&[inf, 1.0], &[1.0, inf]]);
        let (plan, _) = solve_transport(&c, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(plan.mass, mat(&[&[0.0, 0.5], &[0.5, 0.0]]));
        assert!((plan.value - 1.0).abs() < 1e-15);

        let c = mat(&[&[inf, 1.0], &[2.0, inf]]);
        assert!(matches!(
            solve_transport(&c, &[0.7, 0.3], &[0.5, 0.5]),
            Err(Error::NoFinitePlan)
        ));
    }

    #[test]
    fn transform_examples() {
        let c = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(c1_transform(&[0.0, 0.0], &c), vec![0.0, 0.0]);
        assert_eq!(c1_transform(&[-1.0, -1.0], &c), vec![1.0, 1.0]);
        let single = mat(&[&[3.0, 4.0]]);
        assert_eq!(c1_transform(&[1.0], &single), vec![2.0, 3.0]);

        assert_eq!(c2_transform(&[0.0, 0.0], &c), vec![0.0, 0.0]);
        assert_eq!(c2_transform(&[1.0, 1.0], &c), vec![-1.0, -1.0]);
        let column = mat(&[&[3.0], &[4.0]]);
        assert_eq!(c2_transform(&[1.0], &column), vec![2.0, 3.0]);

        assert!(is_c_concave(&c2_transform(&[0.3, -2.0], &c), &c, 1e-12));
        assert!(is_c_concave(&[0.0, 0.0], &c, 1e-12));
        assert_eq!(c1_transform(&[10.0, 0.0], &c), vec![-10.0, -9.0]);
        assert!(!is_c_concave(&[10.0, 0.0], &c, 1e-12));
        assert!(!is_c_concave(&[0.0, 0.0], &c, 0.0));
    }

    #[test]
    fn slackness_examples() {
        let c = mat(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let zero = DualPotentials {
            f: vec![0.0, 0.0],
            g: vec![0.0, 0.0],
        };
        let identity = TransportPlan {
            mass: mat(&[&[0.5, 0.0], &[0.0, 0.5]]),
            value: 0.0,
        };
        assert!(support_slackness(&identity, &zero, &c, 1e-12).is_empty());
        let anti = TransportPlan {
            mass: mat(&[&[0.0, 0.5], &[0.5, 0.0]]),
            value: 1.0,
        };
        assert_eq!(support_slackness(&anti, &zero, &c, 1e-12), vec![(0, 1), (1, 0)]);

        let c = mat(&[&[4.0, 1.0, 3.0], &[2.0, 0.0, 5.0], &[3.0, 2.0, 2.0]]);
        let w = [0.2, 0.5, 0.3];
        let (plan, duals) = solve_transport(&c, &w, &w).unwrap();
        assert!(support_slackness(&plan, &duals, &c, 1e-12).is_empty());
    }

    #[test]
    fn interior_duals_are_optimal_and_strict() {
        // Identity is the unique optimum but the basis is degenerate; the
        // interior duals keep every off-support constraint slack.
        let c = mat(&[&[0.0, 1.0, 4.0], &[1.0, 0.0, 1.0], &[4.0, 1.0, 0.0]]);
        let w = [1.0 / 3.0; 3];
        let (plan, _) = solve_transport(&c, &w, &w).unwrap();
        let duals = interior_duals(&c, &plan, &w, &w).unwrap();
        assert!(support_slackness(&plan, &duals, &c, 1e-12).is_empty());
        assert!((duals.value(&w, &w) - plan.value).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let slack = c[(i, j)] - duals.f[i] - duals.g[j];
                if i == j {
                    assert!(slack.abs() < 1e-12);
                } else {
                    assert!(slack > 0.1, "({i},{j}) slack {slack}");
                }
            }
        }
    }

    #[test]
    fn interior_duals_fill_zero_mass_atoms() {
        let c = mat(&[&[0.0, 2.0], &[2.0, 0.0], &[1.0, 1.0]]);
        let mu = [0.5, 0.5, 0.0];
        let nu = [0.5, 0.5];
        let (plan, _) = solve_transport(&c, &mu, &nu).unwrap();
        let duals = interior_duals(&c, &plan, &mu, &nu).unwrap();
        assert!(duals.max_violation(&c) <= 1e-12);
        assert!(duals.f.iter().chain(&duals.g).all(|v| v.is_finite()));
    }

    #[test]
    fn brute_force_assignment_matches_solver() {
        let c = mat(&[&[4.0, 1.0, 3.0], &[2.0, 0.0, 5.0], &[3.0, 2.0, 2.0]]);
        let w = [1.0 / 3.0; 3];
        let (plan, _) = solve_transport(&c, &w, &w).unwrap();
        assert!((plan.value - assignment_brute_force(&c).unwrap()).abs() < 1e-12);
    }
}
