//! Directed interaction graphs and the spectral/structural computations the
//! controllers and consensus predictions rely on.
//!
//! Conventions match the control literature: `a[(i, j)] > 0` means agent `j`
//! is a neighbor of agent `i`, i.e. information flows along the edge
//! `(j, i)`. The Laplacian is `l_ii = sum_j a_ij`, `l_ij = -a_ij`.

mod scc;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for "positive real part" eigenvalue decisions.
pub const EIG_TOL_REL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("adjacency matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("self edges are not allowed: a[{index},{index}] = {value}")]
    NonzeroDiagonal { index: usize, value: f64 },
    #[error("edge weights must be nonnegative: a[{row},{col}] = {value}")]
    NegativeWeight { row: usize, col: usize, value: f64 },
    #[error("edge weights must be finite: a[{row},{col}] = {value}")]
    NonFiniteWeight { row: usize, col: usize, value: f64 },
    #[error("graph does not contain a directed spanning tree: left null vector is not unique")]
    NoSpanningTree,
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("matrix is not in Z_n: positive off-diagonal entry at ({row},{col})")]
    NotZMatrix { row: usize, col: usize },
    #[error("matrix is not a nonsingular M-matrix: eigenvalue real part {real_part:.3e} not positive")]
    NotNonsingularMMatrix { real_part: f64 },
    #[error("diagonal weight certificate failed: min eigenvalue {min_eig:.3e}")]
    WeightCertificateFailed { min_eig: f64 },
    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },
    #[error("vector length {got} does not match graph order {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{what} must be strictly positive entrywise")]
    NonPositiveEntries { what: &'static str },
    #[error("dwell time {dwell} is below the minimum dwell time {min_dwell}")]
    DwellTooShort { dwell: f64, min_dwell: f64 },
    #[error("minimum dwell time must be positive and finite, got {0}")]
    InvalidMinDwell(f64),
    #[error("schedule graphs must share one order: {first} vs {other}")]
    MixedOrders { first: usize, other: usize },
    #[error("schedule must contain at least one segment")]
    EmptySchedule,
    #[error("time {t} is outside the defined schedule [0, {end}]")]
    TimeOutsideSchedule { t: f64, end: f64 },
    #[error("edge ({from},{to}) out of range for a graph on {n} nodes")]
    EdgeOutOfRange { from: usize, to: usize, n: usize },
    #[error("window length must be positive and finite, got {0}")]
    InvalidWindow(f64),
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
}

/// A weighted directed graph together with its Laplacian.
///
/// Immutable after construction; the invariants (zero adjacency diagonal,
/// row sums of the Laplacian exactly zero, sign pattern) hold by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraphSpec {
    n: usize,
    adjacency: DMatrix<f64>,
    laplacian: DMatrix<f64>,
}

/// Validates an adjacency matrix and derives the graph Laplacian.
pub fn build_laplacian(adjacency: DMatrix<f64>) -> Result<DirectedGraphSpec, GraphError> {
    DirectedGraphSpec::from_adjacency(adjacency)
}

impl DirectedGraphSpec {
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self, GraphError> {
        let (rows, cols) = adjacency.shape();
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        let n = rows;
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !a.is_finite() {
                    return Err(GraphError::NonFiniteWeight { row: i, col: j, value: a });
                }
                if i == j && a != 0.0 {
                    return Err(GraphError::NonzeroDiagonal { index: i, value: a });
                }
                if a < 0.0 {
                    return Err(GraphError::NegativeWeight { row: i, col: j, value: a });
                }
            }
        }
        let mut laplacian = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut degree = 0.0;
            for j in 0..n {
                if j != i {
                    let a = adjacency[(i, j)];
                    laplacian[(i, j)] = -a;
                    degree += a;
                }
            }
            laplacian[(i, i)] = degree;
        }
        Ok(Self { n, adjacency, laplacian })
    }

    /// Builds a graph from `(from, to, weight)` edge triples, zero-based.
    /// `(j, i, w)` sets `a_ij = w`: agent `to` hears agent `from`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut adjacency = DMatrix::zeros(n, n);
        for &(from, to, weight) in edges {
            if from >= n || to >= n {
                return Err(GraphError::EdgeOutOfRange { from, to, n });
            }
            adjacency[(to, from)] = weight;
        }
        Self::from_adjacency(adjacency)
    }

    /// Graph with `n` nodes and no edges.
    pub fn edgeless(n: usize) -> Self {
        Self { n, adjacency: DMatrix::zeros(n, n), laplacian: DMatrix::zeros(n, n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// In-neighbors of agent `i` with their edge weights `(j, a_ij)`.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n).filter_map(move |j| {
            let w = self.adjacency[(i, j)];
            (w > 0.0).then_some((j, w))
        })
    }

    /// Weighted in-degree `sum_j a_ij` of agent `i`.
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.laplacian[(i, i)]
    }

    /// Out-edge adjacency lists in information-flow direction: `j -> i`
    /// whenever `a_ij > 0`.
    fn flow_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                if self.adjacency[(i, j)] > 0.0 {
                    out[j].push(i);
                }
            }
        }
        out
    }

    /// Edge-union of two graphs on the same node set; the union keeps the
    /// larger of the two weights on shared edges.
    pub fn union(&self, other: &Self) -> Result<Self, GraphError> {
        if self.n != other.n {
            return Err(GraphError::MixedOrders { first: self.n, other: other.n });
        }
        let adjacency =
            DMatrix::from_fn(self.n, self.n, |i, j| self.adjacency[(i, j)].max(other.adjacency[(i, j)]));
        Self::from_adjacency(adjacency)
    }

    /// True when some node has directed paths to every other node.
    ///
    /// Decided by reachability: the condensation of the graph must have a
    /// unique source component. The spectral characterization (simple zero
    /// Laplacian eigenvalue, all others in the open right half plane) is
    /// available as [`DirectedGraphSpec::spectral_spanning_tree_check`] and
    /// must agree.
    pub fn contains_spanning_tree(&self) -> bool {
        let edges = self.flow_edges();
        let components = scc::tarjan_scc(&edges);
        let sources = scc::source_components(&edges, &components);
        sources.iter().filter(|s| **s).count() == 1
    }

    /// Spectral cross-check for spanning-tree detection: the Laplacian must
    /// have a simple zero eigenvalue while every other eigenvalue has a
    /// positive real part.
    pub fn spectral_spanning_tree_check(&self) -> bool {
        let tol = EIG_TOL_REL * self.laplacian.norm();
        let eigs = self.laplacian.complex_eigenvalues();
        let mut zero_count = 0usize;
        let mut rest_positive = true;
        for lambda in eigs.iter() {
            if lambda.norm() <= tol {
                zero_count += 1;
            } else if lambda.re <= tol {
                rest_positive = false;
            }
        }
        zero_count == 1 && rest_positive
    }

    /// True when there is a directed path from every node to every other.
    pub fn is_strongly_connected(&self) -> bool {
        scc::tarjan_scc(&self.flow_edges()).len() == 1
    }
}

/// Nonnegative left null vector of the Laplacian, normalized to sum one.
///
/// Weights the initial conditions in the consensus equilibrium; entries for
/// agents outside the root component are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftNullVector {
    xi: DVector<f64>,
}

impl LeftNullVector {
    pub fn xi(&self) -> &DVector<f64> {
        &self.xi
    }

    pub fn as_slice(&self) -> &[f64] {
        self.xi.as_slice()
    }
}

/// Computes the normalized left null vector `xi` with `xi^T L = 0`.
///
/// Requires a directed spanning tree so the null space is one-dimensional.
/// The vector is obtained from the root strongly connected component: the
/// restriction of the Laplacian to the roots has a one-dimensional left null
/// space with strictly positive entries, and all other entries are zero.
pub fn left_null_vector(g: &DirectedGraphSpec) -> Result<LeftNullVector, GraphError> {
    let form = frobenius_reorder(g)?;
    let r1 = form.root_size;
    let lap = g.laplacian();

    let mut root_block = DMatrix::zeros(r1, r1);
    for a in 0..r1 {
        for b in 0..r1 {
            root_block[(a, b)] = lap[(form.permutation[a], form.permutation[b])];
        }
    }

    let root_xi = if r1 == 1 {
        DVector::from_element(1, 1.0)
    } else {
        null_vector(&root_block.transpose())?
    };

    let sum: f64 = root_xi.iter().sum();
    if sum.abs() < f64::EPSILON {
        return Err(GraphError::Numerical("left null vector has zero sum"));
    }
    let mut xi = DVector::zeros(g.n());
    for a in 0..r1 {
        let entry = root_xi[a] / sum;
        if entry < -1e-9 {
            return Err(GraphError::Numerical("left null vector changed sign"));
        }
        xi[form.permutation[a]] = entry.max(0.0);
    }

    let residual = (xi.transpose() * lap).norm();
    let scale = lap.norm().max(1.0);
    if residual > 1e-10 * scale {
        return Err(GraphError::Numerical("left null vector residual too large"));
    }
    Ok(LeftNullVector { xi })
}

/// Null vector of a matrix with a one-dimensional null space, via SVD.
fn null_vector(m: &DMatrix<f64>) -> Result<DVector<f64>, GraphError> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(GraphError::Numerical("SVD did not produce V^T"))?;
    let mut min_idx = 0;
    for (k, sigma) in svd.singular_values.iter().enumerate() {
        if *sigma < svd.singular_values[min_idx] {
            min_idx = k;
        }
    }
    Ok(v_t.row(min_idx).transpose())
}

/// The `(n-1) x n` consensus-error transform built from
/// `v = (n - sqrt(n)) / (n (n-1))`.
///
/// Satisfies `Q 1 = 0`, `Q Q^T = I_{n-1}`, and `Q^T Q = I_n - (1/n) 1 1^T`,
/// so `Q x = 0` exactly on the consensus subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct QTransform {
    n: usize,
    q: DMatrix<f64>,
}

impl QTransform {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }
}

pub fn q_transform(n: usize) -> Result<QTransform, GraphError> {
    if n < 2 {
        return Err(GraphError::DimensionTooSmall { min: 2, got: n });
    }
    let nf = n as f64;
    let v = (nf - nf.sqrt()) / (nf * (nf - 1.0));
    let q = DMatrix::from_fn(n - 1, n, |r, c| {
        if c == 0 {
            -1.0 + (nf - 1.0) * v
        } else if c == r + 1 {
            1.0 - v
        } else {
            -v
        }
    });
    Ok(QTransform { n, q })
}

/// Lemma-style spectrum test: all eigenvalues of `Q diag(alpha) L Q^T` have
/// positive real parts exactly when the graph contains a spanning tree.
pub fn q_spectrum_check(g: &DirectedGraphSpec, alpha: &[f64]) -> Result<bool, GraphError> {
    if alpha.len() != g.n() {
        return Err(GraphError::LengthMismatch { expected: g.n(), got: alpha.len() });
    }
    if alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(GraphError::NonPositiveEntries { what: "alpha" });
    }
    let q = q_transform(g.n())?;
    let mut scaled = g.laplacian().clone();
    for i in 0..g.n() {
        for j in 0..g.n() {
            scaled[(i, j)] *= alpha[i];
        }
    }
    let reduced = q.matrix() * scaled * q.matrix().transpose();
    let tol = EIG_TOL_REL * reduced.norm();
    Ok(reduced.complex_eigenvalues().iter().all(|lambda: &Complex<f64>| lambda.re > tol))
}

/// Connectivity measure `a(B) = min { x^T B x : x^T varsigma = 0, |x| = 1 }`
/// with `B = Xi L + L^T Xi`, `Xi = diag(xi)`.
///
/// Solved in closed form as the smallest eigenvalue of `B` restricted to the
/// orthogonal complement of `varsigma`. Positive for every strongly
/// connected graph and positive `varsigma`.
pub fn connectivity_measure(g: &DirectedGraphSpec, varsigma: &DVector<f64>) -> Result<f64, GraphError> {
    let n = g.n();
    if n < 2 {
        return Err(GraphError::DimensionTooSmall { min: 2, got: n });
    }
    if varsigma.len() != n {
        return Err(GraphError::LengthMismatch { expected: n, got: varsigma.len() });
    }
    if varsigma.iter().any(|v| !(*v > 0.0)) {
        return Err(GraphError::NonPositiveEntries { what: "varsigma" });
    }
    if !g.is_strongly_connected() {
        return Err(GraphError::NotStronglyConnected);
    }

    let xi = left_null_vector(g)?;
    let lap = g.laplacian();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = xi.xi()[i] * lap[(i, j)] + lap[(j, i)] * xi.xi()[j];
        }
    }

    let basis = complement_basis(varsigma);
    let reduced = basis.transpose() * &b * &basis;
    let symmetrized = (&reduced + reduced.transpose()) * 0.5;
    let eigs = symmetrized.symmetric_eigen();
    Ok(eigs.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Orthonormal basis of the orthogonal complement of `v` (n x (n-1)),
/// obtained from the Householder reflector mapping `v` onto an axis.
fn complement_basis(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let u = v / v.norm();
    let mut h = u.clone();
    // Reflector direction u + sign(u_0) e_0 avoids cancellation.
    h[0] += u[0].signum();
    let hnorm2 = h.norm_squared();
    let mut basis = DMatrix::zeros(n, n - 1);
    for c in 1..n {
        for r in 0..n {
            let e = if r == c { 1.0 } else { 0.0 };
            basis[(r, c - 1)] = e - 2.0 * h[r] * h[c] / hnorm2;
        }
    }
    basis
}

/// Diagonal Lyapunov weights for a nonsingular M-matrix: `w > 0` with
/// `diag(w) a + a^T diag(w)` symmetric positive definite.
///
/// Candidate from the M-matrix linear systems `x = a^{-1} 1`, `y = a^{-T} 1`,
/// `w_i = y_i / x_i`; the positive-definiteness certificate is checked
/// explicitly before returning, with a scalar line search toward uniform
/// weights as fallback.
pub fn m_matrix_weights(a: &DMatrix<f64>) -> Result<DVector<f64>, GraphError> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(GraphError::NotSquare { rows, cols });
    }
    let n = rows;
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] > 0.0 {
                return Err(GraphError::NotZMatrix { row: i, col: j });
            }
        }
    }
    let tol = EIG_TOL_REL * a.norm();
    let min_re = a
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::INFINITY, f64::min);
    if !(min_re > tol) {
        return Err(GraphError::NotNonsingularMMatrix { real_part: min_re });
    }

    let ones = DVector::from_element(n, 1.0);
    let x = a
        .clone()
        .lu()
        .solve(&ones)
        .ok_or(GraphError::Numerical("singular system for M-matrix weights"))?;
    let y = a
        .transpose()
        .lu()
        .solve(&ones)
        .ok_or(GraphError::Numerical("singular system for M-matrix weights"))?;

    let mut w = DVector::from_element(n, 1.0);
    if x.iter().all(|v| *v > 0.0) && y.iter().all(|v| *v > 0.0) {
        for i in 0..n {
            w[i] = y[i] / x[i];
        }
    }

    if certificate(a, &w) > tol {
        return Ok(w);
    }
    // Line search blending toward uniform weights.
    let mean = w.iter().sum::<f64>() / n as f64;
    for k in 1..=20 {
        let theta = k as f64 / 20.0;
        let candidate = DVector::from_fn(n, |i, _| (1.0 - theta) * w[i] + theta * mean);
        if certificate(a, &candidate) > tol {
            return Ok(candidate);
        }
    }
    Err(GraphError::WeightCertificateFailed { min_eig: certificate(a, &w) })
}

/// Minimum eigenvalue of `diag(w) a + a^T diag(w)`.
fn certificate(a: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let n = w.len();
    let b = DMatrix::from_fn(n, n, |i, j| w[i] * a[(i, j)] + a[(j, i)] * w[j]);
    let sym = (&b + b.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Node reordering exposing the lower block triangular Laplacian form:
/// roots (the unique source strongly connected component) first, so the
/// permuted Laplacian is `[[L11, 0], [L21, L22]]` with `L11` strongly
/// connected and `L22` a nonsingular M-matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusForm {
    /// Node permutation, `permutation[new_index] = old_index`.
    pub permutation: Vec<usize>,
    /// Size of the leading root block.
    pub root_size: usize,
}

impl FrobeniusForm {
    /// Applies the permutation to a square matrix (rows and columns).
    pub fn apply(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.permutation.len();
        DMatrix::from_fn(n, n, |i, j| m[(self.permutation[i], self.permutation[j])])
    }

    /// Original indices of the root agents.
    pub fn roots(&self) -> &[usize] {
        &self.permutation[..self.root_size]
    }
}

pub fn frobenius_reorder(g: &DirectedGraphSpec) -> Result<FrobeniusForm, GraphError> {
    let edges = g.flow_edges();
    let components = scc::tarjan_scc(&edges);
    let sources = scc::source_components(&edges, &components);
    if sources.iter().filter(|s| **s).count() != 1 {
        return Err(GraphError::NoSpanningTree);
    }
    let root_comp = sources.iter().position(|s| *s).unwrap();
    let mut permutation: Vec<usize> = components[root_comp].clone();
    let root_size = permutation.len();
    let mut rest: Vec<usize> =
        (0..g.n()).filter(|v| !components[root_comp].contains(v)).collect();
    rest.sort_unstable();
    permutation.extend(rest);
    Ok(FrobeniusForm { permutation, root_size })
}

/// A piecewise-constant sequence of directed graphs with dwell times.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSchedule {
    graphs: Vec<DirectedGraphSpec>,
    dwell_times: Vec<f64>,
    min_dwell: f64,
    cyclic: bool,
}

impl SwitchingSchedule {
    pub fn new(
        graphs: Vec<DirectedGraphSpec>,
        dwell_times: Vec<f64>,
        min_dwell: f64,
        cyclic: bool,
    ) -> Result<Self, GraphError> {
        if graphs.is_empty() || dwell_times.is_empty() {
            return Err(GraphError::EmptySchedule);
        }
        if graphs.len() != dwell_times.len() {
            return Err(GraphError::LengthMismatch {
                expected: graphs.len(),
                got: dwell_times.len(),
            });
        }
        if !(min_dwell > 0.0) || !min_dwell.is_finite() {
            return Err(GraphError::InvalidMinDwell(min_dwell));
        }
        for &dwell in &dwell_times {
            if !dwell.is_finite() || dwell < min_dwell {
                return Err(GraphError::DwellTooShort { dwell, min_dwell });
            }
        }
        let n = graphs[0].n();
        for g in &graphs[1..] {
            if g.n() != n {
                return Err(GraphError::MixedOrders { first: n, other: g.n() });
            }
        }
        Ok(Self { graphs, dwell_times, min_dwell, cyclic })
    }

    pub fn n(&self) -> usize {
        self.graphs[0].n()
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graphs(&self) -> &[DirectedGraphSpec] {
        &self.graphs
    }

    pub fn dwell_times(&self) -> &[f64] {
        &self.dwell_times
    }

    pub fn min_dwell(&self) -> f64 {
        self.min_dwell
    }

    pub fn cyclic(&self) -> bool {
        self.cyclic
    }

    /// Total duration of one pass over the segments.
    pub fn period(&self) -> f64 {
        self.dwell_times.iter().sum()
    }

    /// Active graph at time `t`. The schedule is right-continuous: at a
    /// switch instant the newly activated graph applies. Cyclic schedules
    /// repeat forever; finite ones reject times outside `[0, period]`.
    pub fn graph_at(&self, t: f64) -> Result<&DirectedGraphSpec, GraphError> {
        let period = self.period();
        if !t.is_finite() || t < 0.0 || (!self.cyclic && t > period) {
            return Err(GraphError::TimeOutsideSchedule { t, end: period });
        }
        let mut local = if self.cyclic { t % period } else { t };
        for (g, &dwell) in self.graphs.iter().zip(&self.dwell_times) {
            if local < dwell {
                return Ok(g);
            }
            local -= dwell;
        }
        Ok(self.graphs.last().unwrap())
    }

    /// Edge-union of all segment graphs.
    pub fn union_graph(&self) -> DirectedGraphSpec {
        let mut union = self.graphs[0].clone();
        for g in &self.graphs[1..] {
            union = union.union(g).expect("schedule graphs share one order");
        }
        union
    }

    /// Segments overlapping `[start, end)` with positive measure, where the
    /// window is given in schedule-local time (within one period).
    fn segments_overlapping(&self, start: f64, end: f64) -> Vec<usize> {
        let mut active = Vec::new();
        let mut seg_start = 0.0;
        for (k, &dwell) in self.dwell_times.iter().enumerate() {
            let seg_end = seg_start + dwell;
            if seg_start < end && seg_end > start {
                active.push(k);
            }
            seg_start = seg_end;
        }
        active
    }
}

/// Checks uniform joint connectivity: partitioning the timeline into
/// contiguous intervals of length `window`, every interval's edge-union
/// graph must contain a directed spanning tree. For cyclic schedules the
/// windows covering one full period are checked, with wrap-around.
pub fn uniformly_jointly_connected(
    schedule: &SwitchingSchedule,
    window: f64,
) -> Result<bool, GraphError> {
    if !(window > 0.0) || !window.is_finite() {
        return Err(GraphError::InvalidWindow(window));
    }
    let period = schedule.period();
    let mut start = 0.0;
    while start < period {
        let end = start + window;
        let mut active = Vec::new();
        if schedule.cyclic() {
            // Wrap the window into [0, period) arcs.
            let mut a = start % period;
            let mut remaining = (end - start).min(period);
            while remaining > 0.0 {
                let span = remaining.min(period - a);
                active.extend(schedule.segments_overlapping(a, a + span));
                remaining -= span;
                a = 0.0;
            }
        } else {
            active.extend(schedule.segments_overlapping(start, end.min(period)));
        }
        active.sort_unstable();
        active.dedup();
        if active.is_empty() {
            return Ok(false);
        }
        let mut union = schedule.graphs[active[0]].clone();
        for &k in &active[1..] {
            union = union.union(&schedule.graphs[k])?;
        }
        if !union.contains_spanning_tree() {
            return Ok(false);
        }
        start = end;
    }
    Ok(true)
}

/// Serialized form of a directed graph: node count plus `(from, to, weight)`
/// triples with one-based node ids, `(j, i, a_ij)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphDoc {
    pub fn from_graph(g: &DirectedGraphSpec) -> Self {
        let mut edges = Vec::new();
        for from in 0..g.n() {
            for to in 0..g.n() {
                let w = g.adjacency()[(to, from)];
                if w != 0.0 {
                    edges.push((from + 1, to + 1, w));
                }
            }
        }
        Self { n: g.n(), edges }
    }

    pub fn to_graph(&self) -> Result<DirectedGraphSpec, GraphError> {
        let mut adjacency = DMatrix::zeros(self.n, self.n);
        for &(from, to, weight) in &self.edges {
            if from == 0 || to == 0 || from > self.n || to > self.n {
                return Err(GraphError::EdgeOutOfRange { from, to, n: self.n });
            }
            adjacency[(to - 1, from - 1)] = weight;
        }
        DirectedGraphSpec::from_adjacency(adjacency)
    }
}
