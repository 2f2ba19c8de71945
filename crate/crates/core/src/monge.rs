//! Monge maps and displacement interpolation `phi_t(x) = pi(e^{tH}(x, -df_x))`
//! synthesized from Kantorovich potentials sampled on a grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ControlSystem;
use crate::hamiltonian::{flow_endpoint, PhasePoint};
use crate::ot::{cost_matrix, interior_duals, pair_cost, solve_kantorovich, solve_transport, CostBackend};
use crate::ot::{DiscreteMeasure, DualPotentials, TransportPlan};
use crate::shooting::{grushin_covector_from_axis, grushin_geodesic};

/// Rectangular lattice over a box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    lower: Vec<f64>,
    spacing: Vec<f64>,
    counts: Vec<usize>,
}

impl Grid {
    /// Lattice over `[lower, upper]` with spacing at most `h` on every axis;
    /// each axis gets at least three nodes.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, h: f64) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidArgument(
                "grid bounds must have the same positive length".into(),
            ));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        let mut counts = Vec::with_capacity(lower.len());
        let mut spacing = Vec::with_capacity(lower.len());
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!("empty grid axis [{lo}, {hi}]")));
            }
            let cells = (((hi - lo) / h) - 1e-9).ceil().max(2.0) as usize;
            counts.push(cells + 1);
            spacing.push((hi - lo) / cells as f64);
        }
        Ok(Self { lower, spacing, counts })
    }

    /// Smallest box with margin `margin` around `points`, snapped so that
    /// `anchor + k h` are nodes.
    pub fn around(points: &[DVector<f64>], margin: f64, h: f64) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidArgument("no points to cover".into()));
        };
        let n = first.len();
        let mut lower = vec![f64::INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        for p in points {
            for d in 0..n {
                lower[d] = lower[d].min(p[d] - margin);
                upper[d] = upper[d].max(p[d] + margin);
            }
        }
        for d in 0..n {
            lower[d] = first[d] + ((lower[d] - first[d]) / h).floor() * h;
            upper[d] = first[d] + ((upper[d] - first[d]) / h).ceil() * h;
        }
        Self::new(lower, upper, h)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| self.lower[d] + self.spacing[d] * (self.counts[d] - 1) as f64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat node index; the first axis varies fastest.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        self.counts
            .iter()
            .map(|&c| {
                let k = flat % c;
                flat /= c;
                k
            })
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for d in (0..self.dim()).rev() {
            flat = flat * self.counts[d] + idx[d];
        }
        flat
    }

    pub fn node(&self, idx: &[usize]) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|d| self.lower[d] + self.spacing[d] * idx[d] as f64),
        )
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let upper = self.upper();
        x.len() == self.dim() && (0..self.dim()).all(|d| x[d] >= self.lower[d] && x[d] <= upper[d])
    }
}

/// A potential sampled on grid nodes, in the energy convention (half of the
/// `d^2` Kantorovich potential), so that `-df_x` is the initial covector of
/// the transport geodesic from `x`.
///
/// Each node carries a label, the index of the smooth piece the value came
/// from (the active target of a c-transform). Difference and interpolation
/// stencils stay within one label where they can, so kinks between pieces
/// do not leak into gradients.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialField {
    grid: Grid,
    values: Vec<f64>,
    labels: Vec<usize>,
}

impl PotentialField {
    /// A single smooth piece.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let labels = vec![0; values.len()];
        Self::with_labels(grid, values, labels)
    }

    pub fn with_labels(grid: Grid, values: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        for got in [values.len(), labels.len()] {
            if got != grid.len() {
                return Err(Error::Dimension {
                    expected: grid.len(),
                    got,
                });
            }
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePotential(k));
        }
        Ok(Self { grid, values, labels })
    }

    /// Samples `f` at every node, in parallel.
    pub fn from_fn<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> f64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| f(&grid.node(&grid.multi_index(k))))
            .collect();
        Self::new(grid, values)
    }

    /// `f(x) = 1/2 min_j [c(x, y_j) - g_j]`, the continuum c-transform of a
    /// discrete target potential, halved into the energy convention. Nodes
    /// are labelled by the minimizing `j`.
    pub fn from_c_transform(
        grid: Grid,
        sys: &dyn ControlSystem,
        backend: &CostBackend,
        targets: &[DVector<f64>],
        g: &[f64],
    ) -> Result<Self> {
        if targets.len() != g.len() || targets.is_empty() {
            return Err(Error::InvalidArgument(
                "need one potential value per target point".into(),
            ));
        }
        let entries: Vec<Result<(f64, usize)>> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let x = grid.node(&grid.multi_index(k));
                let mut best = (f64::INFINITY, 0);
                for (j, (y, gj)) in targets.iter().zip(g).enumerate() {
                    let v = pair_cost(backend, sys, &x, y)? - gj;
                    if v < best.0 {
                        best = (v, j);
                    }
                }
                Ok((0.5 * best.0, best.1))
            })
            .collect();
        let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
        let (values, labels) = entries.into_iter().unzip();
        Self::with_labels(grid, values, labels)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn value_at_node(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    fn label_at(&self, idx: &[usize]) -> usize {
        self.labels[self.grid.flat_index(idx)]
    }

    /// Per axis, the widest difference stencil whose nodes share this node's
    /// label: fourth-order central, second-order central, second-order
    /// one-sided, first-order one-sided. Without any such stencil the
    /// label-blind second-order formula is used.
    fn node_gradient(&self, idx: &[usize]) -> DVector<f64> {
        let n = self.grid.dim();
        let own = self.label_at(idx);
        DVector::from_iterator(
            n,
            (0..n).map(|d| {
                let h = self.grid.spacing[d];
                let last = self.grid.counts[d] as isize - 1;
                let k = idx[d] as isize;
                let node = |o: isize| {
                    let mut j = idx.to_vec();
                    j[d] = (k + o) as usize;
                    j
                };
                let at = |o: isize| self.value_at_node(&node(o));
                let ok = |offsets: &[isize]| {
                    offsets
                        .iter()
                        .all(|&o| k + o >= 0 && k + o <= last && self.label_at(&node(o)) == own)
                };
                if ok(&[-2, -1, 1, 2]) {
                    (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h)
                } else if ok(&[-1, 1]) {
                    (at(1) - at(-1)) / (2.0 * h)
                } else if ok(&[1, 2]) {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if ok(&[-1, -2]) {
                    (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                } else if ok(&[1]) {
                    (at(1) - at(0)) / h
                } else if ok(&[-1]) {
                    (at(0) - at(-1)) / h
                } else if k == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if k == last {
                    (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                } else {
                    (at(1) - at(-1)) / (2.0 * h)
                }
            }),
        )
    }
}

/// Cubic Lagrange weights on the nodes `base - 1 ..= base + 2`, or `None`
/// when they do not fit in the grid.
fn cubic_weights(base: usize, frac: f64, last: usize) -> Option<[(usize, f64); 4]> {
    let s = frac;
    (base >= 1 && base + 2 <= last).then(|| {
        [
            (base - 1, -s * (s - 1.0) * (s - 2.0) / 6.0),
            (base, (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0),
            (base + 1, -(s + 1.0) * s * (s - 2.0) / 2.0),
            (base + 2, (s + 1.0) * s * (s - 1.0) / 6.0),
        ]
    })
}

/// Sum of `weight * node_gradient` over the tensor product of per-axis
/// stencils.
fn tensor_sum(field: &PotentialField, axes: &[Vec<(usize, f64)>]) -> DVector<f64> {
    let n = axes.len();
    let mut grad = DVector::zeros(n);
    let mut pick = vec![0usize; n];
    loop {
        let mut weight = 1.0;
        let idx: Vec<usize> = (0..n)
            .map(|d| {
                let (node, w) = axes[d][pick[d]];
                weight *= w;
                node
            })
            .collect();
        if weight != 0.0 {
            grad += field.node_gradient(&idx) * weight;
        }
        let mut d = 0;
        while d < n {
            pick[d] += 1;
            if pick[d] < axes[d].len() {
                break;
            }
            pick[d] = 0;
            d += 1;
        }
        if d == n {
            return grad;
        }
    }
}

fn tensor_nodes(axes: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |(node, _)| {
                    let mut p = prefix.clone();
                    p.push(*node);
                    p
                })
            })
            .collect()
    })
}

/// `df_x`: node gradients interpolated to `x`. Cubic interpolation where the
/// sixteen (in 2-D) surrounding nodes all carry the label of the node
/// nearest `x`, multilinear over the enclosing cell otherwise.
pub fn potential_gradient(field: &PotentialField, x: &DVector<f64>) -> Result<DVector<f64>> {
    let grid = &field.grid;
    if x.len() != grid.dim() {
        return Err(Error::Dimension {
            expected: grid.dim(),
            got: x.len(),
        });
    }
    if !grid.contains(x) {
        return Err(Error::OutsideGrid);
    }
    let n = grid.dim();
    let mut base = vec![0usize; n];
    let mut frac = vec![0.0; n];
    for d in 0..n {
        let s = (x[d] - grid.lower[d]) / grid.spacing[d];
        let k = (s.floor().max(0.0) as usize).min(grid.counts[d] - 2);
        base[d] = k;
        frac[d] = s - k as f64;
    }
    let nearest: Vec<usize> = (0..n).map(|d| base[d] + usize::from(frac[d] >= 0.5)).collect();
    let own = field.label_at(&nearest);

    let cubic: Option<Vec<Vec<(usize, f64)>>> = (0..n)
        .map(|d| cubic_weights(base[d], frac[d], grid.counts[d] - 1).map(|w| w.to_vec()))
        .collect();
    if let Some(axes) = cubic {
        if tensor_nodes(&axes).iter().all(|idx| field.label_at(idx) == own) {
            return Ok(tensor_sum(field, &axes));
        }
    }
    let linear: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|d| vec![(base[d], 1.0 - frac[d]), (base[d] + 1, frac[d])])
        .collect();
    Ok(tensor_sum(field, &linear))
}

/// `phi_t(x) = pi(e^{tH}(x, -df_x))`; `t = 0` returns `x` unchanged.
pub fn monge_map(
    sys: &dyn ControlSystem,
    field: &PotentialField,
    x: &DVector<f64>,
    t: f64,
    step: f64,
) -> Result<DVector<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    let p = -potential_gradient(field, x)?;
    if t == 0.0 {
        return Ok(x.clone());
    }
    Ok(flow_endpoint(sys, &PhasePoint::new(x.clone(), p), t, step)?.x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationFrames {
    pub times: Vec<f64>,
    /// `clouds[m][i]` is the image of source point `i` at `times[m]`.
    pub clouds: Vec<Vec<DVector<f64>>>,
    /// Initial covector `-df` of each source point.
    pub covectors: Vec<DVector<f64>>,
}

/// Displacement interpolation of the source support at the given times.
pub fn displacement_interpolation(
    sys: &dyn ControlSystem,
    field: &PotentialField,
    mu: &DiscreteMeasure,
    times: &[f64],
    step: f64,
) -> Result<InterpolationFrames> {
    if let Some(t) = times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    let covectors = mu
        .points()
        .iter()
        .map(|x| potential_gradient(field, x).map(|g| -g))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..times.len())
        .flat_map(|m| (0..mu.len()).map(move |i| (m, i)))
        .collect();
    let images = jobs
        .into_par_iter()
        .map(|(m, i)| monge_map(sys, field, &mu.points()[i], times[m], step))
        .collect::<Vec<_>>();
    let mut images = images.into_iter();
    let mut clouds = Vec::with_capacity(times.len());
    for _ in times {
        let cloud = images.by_ref().take(mu.len()).collect::<Result<Vec<_>>>()?;
        clouds.push(cloud);
    }
    Ok(InterpolationFrames {
        times: times.to_vec(),
        clouds,
        covectors,
    })
}

/// Closed-form Grushin interpolation from `(x1, x2)` to a unit mass at
/// `(0, delta)`: the minimizing geodesic from `(0, delta)` to `(x1, x2)`, run
/// backwards. On the singular line the `|b| -> pi` limit is used with
/// `a >= 0` and `b = pi sign(x2 - delta)`.
pub fn grushin_interpolation_to_delta(x1: f64, x2: f64, delta: f64, t: f64) -> [f64; 2] {
    if t == 0.0 {
        return [x1, x2];
    }
    if t == 1.0 {
        return [0.0, delta];
    }
    let (a, b) = grushin_covector_from_axis(x1, x2, delta);
    grushin_geodesic(a, b, delta, 1.0 - t)
}

/// Kantorovich solve followed by potential synthesis on `grid`: returns the
/// plan, the interior duals, and the field built from the target potential.
pub fn kantorovich_field(
    sys: &dyn ControlSystem,
    backend: &CostBackend,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    grid: Grid,
) -> Result<(TransportPlan, DualPotentials, PotentialField)> {
    let c = cost_matrix(backend, sys, mu, nu)?;
    let (plan, _) = solve_kantorovich(&c, mu, nu)?;
    let duals = interior_duals(&c, &plan, mu.weights(), nu.weights())?;
    let field = PotentialField::from_c_transform(grid, sys, backend, nu.points(), &duals.g)?;
    Ok((plan, duals, field))
}

/// Optimal squared-Euclidean matching cost between the time-`t` image of
/// `mu` and `nu`; zero iff the mapped cloud reproduces `nu`.
pub fn pushforward_check(
    sys: &dyn ControlSystem,
    field: &PotentialField,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    t: f64,
    step: f64,
) -> Result<f64> {
    let frames = displacement_interpolation(sys, field, mu, &[t], step)?;
    let mapped = &frames.clouds[0];
    let c = DMatrix::from_fn(mapped.len(), nu.len(), |i, j| {
        (&mapped[i] - &nu.points()[j]).norm_squared()
    });
    let (plan, _) = solve_transport(&c, mu.weights(), nu.weights())?;
    Ok(plan.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_system;
    use crate::hamiltonian::ham_flow;
    use crate::shooting::grushin_distance_origin;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn square(h: f64) -> Grid {
        Grid::new(vec![-1.0, -1.0], vec![1.0, 1.0], h).unwrap()
    }

    #[test]
    fn grid_indexing_roundtrip() {
        let g = Grid::new(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 0.5], 0.25).unwrap();
        assert_eq!(g.counts(), &[5, 9, 3]);
        for k in [0, 7, 44, g.len() - 1] {
            assert_eq!(g.flat_index(&g.multi_index(k)), k);
        }
        assert_eq!(g.node(&[4, 8, 2]), v(&[1.0, 2.0, 0.5]));
        assert!(Grid::new(vec![0.0], vec![0.0], 0.1).is_err());
        assert!(Grid::new(vec![0.0], vec![1.0], -0.1).is_err());
    }

    #[test]
    fn gradient_examples() {
        let linear = PotentialField::from_fn(square(0.1), |x| x[0]).unwrap();
        for x in [v(&[0.0, 0.0]), v(&[0.33, -0.71]), v(&[1.0, 1.0])] {
            let g = potential_gradient(&linear, &x).unwrap();
            assert!((g - v(&[1.0, 0.0])).amax() < 1e-12);
        }
        for h in [0.1, 0.05] {
            let quad = PotentialField::from_fn(square(h), |x| 0.5 * x.norm_squared()).unwrap();
            let x = v(&[0.33, -0.71]);
            let g = potential_gradient(&quad, &x).unwrap();
            // Both the node stencil and the interpolation reproduce
            // polynomials of this degree.
            assert!((g - &x).amax() < 1e-12);
        }
        let wave = |h| PotentialField::from_fn(square(h), |x: &DVector<f64>| (3.0 * x[0]).sin()).unwrap();
        let x = v(&[0.33, 0.2]);
        let err = |h| (potential_gradient(&wave(h), &x).unwrap()[0] - 3.0 * (3.0f64 * 0.33).cos()).abs();
        assert!(err(0.1) / err(0.05) > 12.0, "{} {}", err(0.1), err(0.05));
        assert!(matches!(
            potential_gradient(&linear, &v(&[1.5, 0.0])),
            Err(Error::OutsideGrid)
        ));
    }

    #[test]
    fn non_finite_potential_is_rejected() {
        let r = PotentialField::from_fn(square(0.5), |x| if x[0] > 0.9 { f64::NAN } else { 0.0 });
        assert!(matches!(r, Err(Error::NonFinitePotential(_))));
    }

    #[test]
    fn map_examples() {
        let e = make_system("euclidean2").unwrap();
        let field = PotentialField::from_fn(square(0.1), |x| -x[0]).unwrap();
        let x = v(&[0.2, -0.3]);
        assert_eq!(monge_map(&e, &field, &x, 0.0, 1e-3).unwrap(), x);
        let y = monge_map(&e, &field, &x, 1.0, 1e-3).unwrap();
        assert!((y - v(&[1.2, -0.3])).amax() < 1e-12);
        assert!(monge_map(&e, &field, &x, 1.5, 1e-3).is_err());
    }

    #[test]
    fn grushin_map_to_origin() {
        let g = make_system("grushin").unwrap();
        let grid = Grid::new(vec![0.5, -0.5], vec![1.5, 0.5], 1.0 / 128.0).unwrap();
        let field =
            PotentialField::from_fn(grid, |x| 0.5 * grushin_distance_origin([x[0], x[1]], 0.0).powi(2)).unwrap();
        let y = monge_map(&g, &field, &v(&[1.0, 0.0]), 1.0, 1e-3).unwrap();
        assert!(y.amax() < 1e-4, "{y}");
        // Off the axis, on a node.
        let y = monge_map(&g, &field, &v(&[0.75, 0.25]), 1.0, 1e-3).unwrap();
        assert!(y.amax() < 1e-4, "{y}");
    }

    #[test]
    fn interpolation_closed_form_examples() {
        assert_eq!(grushin_interpolation_to_delta(0.7, -0.2, 0.1, 0.0), [0.7, -0.2]);
        assert_eq!(grushin_interpolation_to_delta(0.7, -0.2, 0.1, 1.0), [0.0, 0.1]);
        let s = grushin_interpolation_to_delta(1f64.sin(), (2.0 - 2f64.sin()) / 4.0, 0.0, 0.5);
        assert!((s[0] - 0.479_425_538_604_203).abs() < 1e-12);
        assert!((s[1] - 0.039_632_253_798_025_87).abs() < 1e-12);

        // Cross-check with the flow of the a = b = 1 geodesic.
        let g = make_system("grushin").unwrap();
        let traj = ham_flow(&g, &PhasePoint::from_slices(&[0.0, 0.0], &[1.0, 1.0]), 0.5, 1e-3).unwrap();
        let mid = traj.endpoint();
        assert!((mid.x[0] - s[0]).abs() < 1e-10 && (mid.x[1] - s[1]).abs() < 1e-10);
    }

    #[test]
    fn interpolation_from_the_singular_line() {
        let start = grushin_interpolation_to_delta(0.0, 1.0, 0.0, 0.0);
        assert_eq!(start, [0.0, 1.0]);
        for t in [0.25, 0.5, 0.75] {
            let p = grushin_interpolation_to_delta(0.0, 1.0, 0.0, t);
            assert!(p[0] > 0.0 && p[1] > 0.0 && p[1] < 1.0, "{p:?}");
        }
        let near_end = grushin_interpolation_to_delta(0.0, 1.0, 0.0, 1.0 - 1e-9);
        assert!(near_end[0].abs() < 1e-6 && near_end[1].abs() < 1e-6);
    }

    #[test]
    fn frames_start_at_the_source() {
        let e = make_system("euclidean2").unwrap();
        let field = PotentialField::from_fn(square(0.1), |x| -0.5 * x[1]).unwrap();
        let mu = DiscreteMeasure::uniform(vec![v(&[0.0, 0.0]), v(&[0.5, -0.5])]).unwrap();
        let frames = displacement_interpolation(&e, &field, &mu, &[0.0], 1e-3).unwrap();
        assert_eq!(frames.clouds, vec![mu.points().to_vec()]);
        let frames = displacement_interpolation(&e, &field, &mu, &[0.0, 0.5, 1.0], 1e-3).unwrap();
        for (m, t) in [0.0, 0.5, 1.0].iter().enumerate() {
            for (i, x) in mu.points().iter().enumerate() {
                assert!((&frames.clouds[m][i] - (x + v(&[0.0, 0.5 * t]))).amax() < 1e-12);
            }
        }
        assert!((&frames.covectors[0] - v(&[0.0, 0.5])).amax() < 1e-12);
    }

    #[test]
    fn pushforward_of_exact_image_is_zero() {
        let e = make_system("euclidean2").unwrap();
        let field = PotentialField::from_fn(square(0.1), |x| -(0.3 * x[0] + 0.1 * x[1])).unwrap();
        let mu = DiscreteMeasure::uniform(vec![v(&[0.0, 0.0]), v(&[0.5, -0.5]), v(&[-0.2, 0.4])]).unwrap();
        let images: Vec<_> = mu.points().iter().map(|x| x + v(&[0.3, 0.1])).collect();
        let nu = DiscreteMeasure::uniform(images).unwrap();
        assert!(pushforward_check(&e, &field, &mu, &nu, 1.0, 1e-3).unwrap() <= 1e-10);
    }

    #[test]
    fn lp_potential_reproduces_a_translation() {
        let e = make_system("euclidean2").unwrap();
        let shift = v(&[0.25, 0.125]);
        let src: Vec<_> = (0..4)
            .flat_map(|i| (0..4).map(move |j| v(&[i as f64 / 8.0, j as f64 / 8.0])))
            .collect();
        let dst: Vec<_> = src.iter().map(|x| x + &shift).collect();
        let mu = DiscreteMeasure::uniform(src).unwrap();
        let nu = DiscreteMeasure::uniform(dst).unwrap();
        let grid = Grid::around(mu.points(), 0.25, 1.0 / 32.0).unwrap();
        let (plan, _, field) = kantorovich_field(&e, &CostBackend::ClosedForm, &mu, &nu, grid).unwrap();
        assert!((plan.value - shift.norm_squared()).abs() < 1e-12);
        for x in mu.points() {
            let y = monge_map(&e, &field, x, 1.0, 1e-3).unwrap();
            assert!((y - (x + &shift)).amax() < 1e-9);
        }
    }
}
