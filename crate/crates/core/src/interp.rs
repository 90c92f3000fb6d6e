//! Chebyshev nodes, grid-constrained nodes and Lagrange weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NodeKind {
    Classical,
    /// Nodes restricted to `(1/grid) Z ∩ [-1, 1]`.
    Discrete { grid: u64 },
}

/// Which lower bound on `|H'(s_j)|` a discrete node set achieved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeBound {
    /// `m 2^{1-m}`, the classical Chebyshev bound.
    Full,
    /// Only the relaxed `m 2^{-m}`.
    Relaxed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    /// Strictly increasing.
    pub nodes: Vec<f64>,
    pub kind: NodeKind,
    /// `|H'(s_j)| = Π_{k != j} |s_j - s_k|` per node.
    pub derivative_magnitudes: Vec<f64>,
    /// Minimum of `derivative_magnitudes`.
    pub achieved_bound: f64,
    /// Grid numerators `s_j * grid` for discrete sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<Vec<i64>>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Threshold met by `achieved_bound`, if any.
    pub fn bound_met(&self) -> Option<NodeBound> {
        let m = self.nodes.len() as i32;
        let full = m as f64 * 2f64.powi(1 - m);
        if self.achieved_bound >= full * (1.0 - 1e-12) {
            Some(NodeBound::Full)
        } else if self.achieved_bound >= full / 2.0 * (1.0 - 1e-12) {
            Some(NodeBound::Relaxed)
        } else {
            None
        }
    }
}

fn derivative_magnitudes(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &t)| (nodes[j] - t).abs())
                .product()
        })
        .collect()
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `t_k = cos(π (2k-1) / 2m)`, `k = 1..m`, sorted increasingly.
pub fn chebyshev_nodes(m: usize) -> Result<NodeSet> {
    if m == 0 {
        return Err(Error::invalid("need at least one node"));
    }
    let mut nodes: Vec<f64> = (1..=m).map(|k| chebyshev_node(m, k)).collect();
    nodes.reverse();
    let derivative_magnitudes = derivative_magnitudes(&nodes);
    Ok(NodeSet {
        achieved_bound: min_of(&derivative_magnitudes),
        nodes,
        kind: NodeKind::Classical,
        derivative_magnitudes,
        grid_points: None,
    })
}

fn chebyshev_node(m: usize, k: usize) -> f64 {
    // cos(π(2k-1)/2m) = sin(π(m-2k+1)/2m), exact zero at the centre
    (std::f64::consts::PI * (m as f64 - 2.0 * k as f64 + 1.0) / (2.0 * m as f64)).sin()
}

/// `|H_m'(t_k)| = m 2^{1-m} / |sin(π (2k-1) / 2m)|`, for nodes in the order
/// returned by [`chebyshev_nodes`].
pub fn chebyshev_derivative_closed_form(m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (1..=m)
        .map(|k| {
            let s = (std::f64::consts::PI * (2 * k - 1) as f64 / (2 * m) as f64).sin().abs();
            m as f64 * 2f64.powi(1 - m as i32) / s
        })
        .collect();
    v.reverse();
    v
}

/// Round increasing points in `[-1, 1]` to distinct multiples of `1/grid`;
/// collisions are pushed outward to the next free point.
fn snap(targets: &[f64], grid: u64) -> Option<Vec<i64>> {
    let g = grid as i64;
    let mut pts: Vec<i64> = Vec::with_capacity(targets.len());
    for t in targets {
        let mut s = ((t * grid as f64).round() as i64).clamp(-g, g);
        if let Some(&prev) = pts.last() {
            if s <= prev {
                s = prev + 1;
            }
        }
        pts.push(s);
    }
    // overflow past +grid is pushed back down
    for i in (0..pts.len()).rev() {
        let cap = if i + 1 < pts.len() { pts[i + 1] - 1 } else { g };
        pts[i] = pts[i].min(cap);
    }
    (pts[0] >= -g).then_some(pts)
}

/// Coordinate ascent over ±1, ±2 grid steps on the minimum derivative
/// magnitude, until `target` is reached or no move helps.
fn climb(mut pts: Vec<i64>, grid: u64, target: f64) -> (Vec<i64>, f64) {
    let g = grid as i64;
    let score = |p: &[i64]| {
        let nodes: Vec<f64> = p.iter().map(|&s| s as f64 / grid as f64).collect();
        min_of(&derivative_magnitudes(&nodes))
    };
    let mut best = score(&pts);
    let mut improved = true;
    while improved && best < target {
        improved = false;
        for i in 0..pts.len() {
            for step in [-2i64, -1, 1, 2] {
                let mut cand = pts.clone();
                cand[i] += step;
                if cand[i].abs() > g || cand.windows(2).any(|w| w[0] >= w[1]) {
                    continue;
                }
                let sc = score(&cand);
                if sc > best {
                    best = sc;
                    pts = cand;
                    improved = true;
                }
            }
        }
    }
    (pts, best)
}

/// `m` distinct nodes on `(1/grid) Z ∩ [-1, 1]`.
///
/// The Chebyshev nodes are rounded to the grid and improved by a local search
/// aiming at `m 2^{1-m}`. For odd `m` the middle node sits exactly on that
/// bound, so rounding often lands just under it; the Chebyshev extrema
/// `cos(π k / (m-1))` leave slack and are tried next. The better set is kept.
pub fn discrete_nodes(m: usize, grid: u64) -> Result<NodeSet> {
    if m == 0 {
        return Err(Error::invalid("need at least one node"));
    }
    if (grid as u128) <= (m as u128) * (m as u128) {
        return Err(Error::invalid(format!("grid M = {grid} must exceed m^2 = {}", m * m)));
    }
    let full = m as f64 * 2f64.powi(1 - m as i32);
    let mut starts = vec![chebyshev_nodes(m)?.nodes];
    if m >= 2 {
        let extrema: Vec<f64> = (0..m)
            .map(|k| -(std::f64::consts::PI * k as f64 / (m - 1) as f64).cos())
            .collect();
        starts.push(extrema);
    }
    let mut best: Option<(Vec<i64>, f64)> = None;
    for start in &starts {
        let Some(pts) = snap(start, grid) else { continue };
        let cand = climb(pts, grid, full);
        let done = cand.1 >= full;
        if best.as_ref().map_or(true, |b| cand.1 > b.1) {
            best = Some(cand);
        }
        if done {
            break;
        }
    }
    let (pts, _) = best.ok_or_else(|| Error::Internal("discrete node placement ran out of grid points".into()))?;
    let nodes: Vec<f64> = pts.iter().map(|&s| s as f64 / grid as f64).collect();
    let derivative_magnitudes = derivative_magnitudes(&nodes);
    Ok(NodeSet {
        achieved_bound: min_of(&derivative_magnitudes),
        nodes,
        kind: NodeKind::Discrete { grid },
        derivative_magnitudes,
        grid_points: Some(pts),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangeCoeffs {
    pub coefficients: Vec<f64>,
    pub target: f64,
    pub sum_abs: f64,
}

impl LagrangeCoeffs {
    /// `Σ c_k f(node_k)`.
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.coefficients.iter().zip(values).map(|(c, v)| c * v).sum()
    }
}

/// Weights `c_k = Π_{j != k} (b - t_j) / (t_k - t_j)` for evaluating the
/// degree `< m` interpolant at `b`.
pub fn lagrange_coefficients(nodes: &NodeSet, b: f64) -> LagrangeCoeffs {
    lagrange_weights(&nodes.nodes, b)
}

pub fn lagrange_weights(nodes: &[f64], b: f64) -> LagrangeCoeffs {
    let m = nodes.len();
    let coefficients: Vec<f64> = if let Some(hit) = nodes.iter().position(|&t| t == b) {
        (0..m).map(|k| if k == hit { 1.0 } else { 0.0 }).collect()
    } else if m <= 40 {
        (0..m)
            .map(|k| {
                let mut c = 1.0;
                for j in 0..m {
                    if j != k {
                        c *= (b - nodes[j]) / (nodes[k] - nodes[j]);
                    }
                }
                c
            })
            .collect()
    } else {
        (0..m)
            .map(|k| {
                let mut log = 0.0;
                let mut negative = false;
                for j in 0..m {
                    if j != k {
                        let f = (b - nodes[j]) / (nodes[k] - nodes[j]);
                        negative ^= f < 0.0;
                        log += f.abs().ln();
                    }
                }
                let mag = log.exp();
                if negative {
                    -mag
                } else {
                    mag
                }
            })
            .collect()
    };
    let sum_abs = coefficients.iter().map(|c| c.abs()).sum();
    LagrangeCoeffs {
        coefficients,
        target: b,
        sum_abs,
    }
}

/// Which closed-form coefficient bound to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Classical nodes: `(2R/r)^m`.
    Continuous,
    /// Grid nodes: `(2(r+R)/r)^m`.
    Discrete,
}

pub fn coefficient_sum_bound(r: f64, big_r: f64, m: u32, kind: BoundKind) -> Result<f64> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::invalid(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    let base = match kind {
        BoundKind::Continuous => 2.0 * big_r / r,
        BoundKind::Discrete => 2.0 * (r + big_r) / r,
    };
    Ok(base.powi(m as i32))
}

/// Geometry for the interpolation remainder bound `C N^{1-n} (16(R+r))^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundParams {
    pub r: f64,
    pub big_r: f64,
    pub mesh: u32,
    pub dim: usize,
    /// Constant in `|f(z)| <= C N^{1-n}` on the extension domain.
    pub kernel_constant: f64,
}

impl ErrorBoundParams {
    /// Per-node geometric factor `16(R+r)`.
    pub fn q_factor(&self) -> f64 {
        16.0 * (self.big_r + self.r)
    }
}

pub fn interpolation_error_bound(params: &ErrorBoundParams, m: u32) -> f64 {
    params.kernel_constant
        * (params.mesh as f64).powi(1 - params.dim as i32)
        * params.q_factor().powi(m as i32)
}
