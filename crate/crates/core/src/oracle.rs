//! Ground truth that does not go through the kernel formula: a direct
//! Dirichlet solver, layer-wise extension of strips, and the alternating-sign
//! growth example.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, BoundaryData, BoundaryMode, GridBox, GridFunction, GridPoint};
use crate::sum::Compensated;

/// Layer budget for [`layerwise_extend`]; rounding error grows roughly by a
/// factor `2n - 1` per layer.
pub const LAYER_BUDGET: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    BandedCholesky,
    ConjugateGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub kind: SolverKind,
    pub unknowns: usize,
    /// Half bandwidth of the elimination ordering (direct solver only).
    pub bandwidth: usize,
    /// CG iterations (zero for the direct solver).
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// Largest system handled by banded elimination.
    pub direct_max_unknowns: usize,
    /// Cap on band storage (entries) for the direct path.
    pub direct_max_band_entries: usize,
    /// Relative residual target for CG.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Acceptance threshold on `max |residual| / max(1, sup|g|)`.
    pub residual_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            direct_max_unknowns: 100_000,
            direct_max_band_entries: 20_000_000,
            cg_tol: 1e-12,
            cg_max_iter: 200_000,
            residual_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: GridFunction,
    pub max_residual: f64,
    pub stats: SolverStats,
}

/// Interior unknown layout: axes reordered so the longest runs outermost,
/// which keeps the elimination band narrow.
struct Layout {
    bx: GridBox,
    order: Vec<usize>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Layout {
    fn new(bx: &GridBox) -> Option<Self> {
        let interior = bx.interior()?;
        let n = bx.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&a| std::cmp::Reverse(interior.extent(a)));
        let dims: Vec<usize> = order.iter().map(|&a| interior.extent(a)).collect();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let len = dims.iter().product();
        Some(Self {
            bx: interior,
            order,
            dims,
            strides,
            len,
        })
    }

    fn bandwidth(&self) -> usize {
        self.strides[0]
    }

    fn point(&self, mut idx: usize) -> Vec<i64> {
        let mut p = vec![0i64; self.order.len()];
        for (k, &a) in self.order.iter().enumerate() {
            let c = idx / self.strides[k];
            idx %= self.strides[k];
            p[a] = self.bx.lo()[a] + c as i64;
        }
        p
    }

    /// Coordinate along reordered axis `k` of unknown `idx`.
    fn coord(&self, idx: usize, k: usize) -> usize {
        (idx / self.strides[k]) % self.dims[k]
    }
}

/// Solve the discrete Dirichlet problem on `bx` with face-interior data `g`.
pub fn solve_dirichlet(bx: &GridBox, g: &BoundaryData) -> Result<SolveReport> {
    solve_dirichlet_with(bx, g, &SolverOptions::default())
}

pub fn solve_dirichlet_with(bx: &GridBox, g: &BoundaryData, opts: &SolverOptions) -> Result<SolveReport> {
    if g.grid_box() != bx {
        return Err(Error::invalid("boundary data belong to a different box"));
    }
    g.check_complete()?;
    let n = bx.dim();
    let mut solution = GridFunction::zeros(bx.clone());
    for (p, v) in g.iter() {
        solution.set(p, v)?;
    }
    let Some(layout) = Layout::new(bx) else {
        return Ok(SolveReport {
            solution,
            max_residual: 0.0,
            stats: SolverStats {
                kind: SolverKind::BandedCholesky,
                unknowns: 0,
                bandwidth: 0,
                iterations: 0,
            },
        });
    };

    // Right-hand side: boundary neighbours moved across.
    let mut rhs = vec![0.0; layout.len];
    for idx in 0..layout.len {
        let p = layout.point(idx);
        let mut q = p.clone();
        let mut acc = 0.0;
        for a in 0..n {
            for d in [-1i64, 1] {
                q[a] = p[a] + d;
                if !layout.bx.contains(&q) {
                    acc += g.get(&q).unwrap_or(0.0);
                }
            }
            q[a] = p[a];
        }
        rhs[idx] = acc;
    }

    let bw = layout.bandwidth();
    let direct = layout.len <= opts.direct_max_unknowns
        && layout.len.saturating_mul(bw + 1) <= opts.direct_max_band_entries;
    let (x, stats) = if direct {
        let x = banded_cholesky_solve(&layout, n, &rhs)?;
        (
            x,
            SolverStats {
                kind: SolverKind::BandedCholesky,
                unknowns: layout.len,
                bandwidth: bw,
                iterations: 0,
            },
        )
    } else {
        let (x, it) = conjugate_gradient(&layout, n, &rhs, opts)?;
        (
            x,
            SolverStats {
                kind: SolverKind::ConjugateGradient,
                unknowns: layout.len,
                bandwidth: bw,
                iterations: it,
            },
        )
    };
    for (idx, v) in x.iter().enumerate() {
        solution.set(&layout.point(idx), *v)?;
    }
    let max_residual = lattice::max_residual(&solution, &layout.bx)?;
    let scale = g.sup().max(1.0);
    if max_residual > opts.residual_tol * scale {
        return Err(Error::NoConvergence {
            iterations: stats.iterations,
            residual: max_residual,
        });
    }
    Ok(SolveReport {
        solution,
        max_residual,
        stats,
    })
}

/// Operator `2n u(x) - Σ interior neighbours` on the unknown vector.
fn apply_operator(layout: &Layout, n: usize, x: &[f64], out: &mut [f64]) {
    let diag = 2.0 * n as f64;
    for i in 0..layout.len {
        let mut acc = diag * x[i];
        for k in 0..n {
            let c = layout.coord(i, k);
            let s = layout.strides[k];
            if c > 0 {
                acc -= x[i - s];
            }
            if c + 1 < layout.dims[k] {
                acc -= x[i + s];
            }
        }
        out[i] = acc;
    }
}

fn banded_cholesky_solve(layout: &Layout, n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    let len = layout.len;
    let bw = layout.bandwidth();
    let w = bw + 1;
    // l[i * w + (j + bw - i)] holds entry (i, j) for i - bw <= j <= i.
    let mut l = vec![0.0f64; len * w];
    for i in 0..len {
        l[i * w + bw] = 2.0 * n as f64;
        for k in 0..n {
            let s = layout.strides[k];
            if layout.coord(i, k) > 0 {
                l[i * w + bw - s] = -1.0;
            }
        }
    }
    for i in 0..len {
        let j0 = i.saturating_sub(bw);
        for j in j0..=i {
            let k0 = j0.max(j.saturating_sub(bw));
            let mut s = l[i * w + (j + bw - i)];
            for k in k0..j {
                s -= l[i * w + (k + bw - i)] * l[j * w + (k + bw - j)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Internal("Dirichlet matrix lost positive definiteness".into()));
                }
                l[i * w + bw] = s.sqrt();
            } else {
                l[i * w + (j + bw - i)] = s / l[j * w + bw];
            }
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..len {
        let mut s = y[i];
        for k in i.saturating_sub(bw)..i {
            s -= l[i * w + (k + bw - i)] * y[k];
        }
        y[i] = s / l[i * w + bw];
    }
    for i in (0..len).rev() {
        let mut s = y[i];
        for k in (i + 1)..len.min(i + bw + 1) {
            s -= l[k * w + (i + bw - k)] * y[k];
        }
        y[i] = s / l[i * w + bw];
    }
    Ok(y)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn conjugate_gradient(layout: &Layout, n: usize, rhs: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let len = layout.len;
    let mut x = vec![0.0; len];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut rr = dot(&r, &r);
    for it in 0..opts.cg_max_iter {
        if rr.sqrt() <= opts.cg_tol * bnorm {
            return Ok((x, it));
        }
        apply_operator(layout, n, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..len {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        iterations: opts.cg_max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

/// Values prescribed on the walls of a strip for newly generated layers.
#[derive(Clone, Debug, PartialEq)]
pub enum SideValues {
    Zero,
    Constant(f64),
    /// `(-1)^{i_1 + ... + i_n}`.
    Parity,
    /// Explicit values keyed by full lattice point; a missing key is an error.
    Explicit(BTreeMap<Vec<i64>, f64>),
}

impl SideValues {
    fn value(&self, p: &[i64]) -> Result<f64> {
        match self {
            SideValues::Zero => Ok(0.0),
            SideValues::Constant(c) => Ok(*c),
            SideValues::Parity => Ok(parity(p)),
            SideValues::Explicit(m) => m
                .get(p)
                .copied()
                .ok_or_else(|| Error::invalid(format!("missing side value at {p:?}"))),
        }
    }
}

fn parity(p: &[i64]) -> f64 {
    if p.iter().sum::<i64>().rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Direction of layer-wise growth: along `axis`, towards `+` or `-`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Direction {
    pub axis: usize,
    pub positive: bool,
}

impl Direction {
    pub fn new(axis: usize, positive: bool) -> Self {
        Self { axis, positive }
    }
}

/// Extend `seed` by `layers` new layers in direction `dir` using the stencil
/// recursion `u(t+1) = 2n u(t) - u(t-1) - Σ_{b != axis} [u(x+e_b) + u(x-e_b)]`.
///
/// Points on the walls of the strip (extremal in some other axis) take their
/// value from `sides`. The result lives on the enlarged box and is harmonic at
/// every wall-interior point from the seed's last layer up to the
/// next-to-last new layer.
pub fn layerwise_extend(seed: &GridFunction, dir: Direction, layers: usize, sides: &SideValues) -> Result<GridFunction> {
    layerwise_extend_with_budget(seed, dir, layers, sides, LAYER_BUDGET)
}

pub fn layerwise_extend_with_budget(
    seed: &GridFunction,
    dir: Direction,
    layers: usize,
    sides: &SideValues,
    budget: usize,
) -> Result<GridFunction> {
    let sb = seed.grid_box();
    let n = sb.dim();
    if dir.axis >= n {
        return Err(Error::invalid("extension axis out of range"));
    }
    if sb.extent(dir.axis) < 2 {
        return Err(Error::invalid("seed must contain two full layers along the extension axis"));
    }
    if layers > budget {
        return Err(Error::invalid(format!(
            "{layers} layers exceeds the stability budget of {budget}"
        )));
    }
    let mut lo = sb.lo().to_vec();
    let mut hi = sb.hi().to_vec();
    let step: i64 = if dir.positive { 1 } else { -1 };
    if dir.positive {
        hi[dir.axis] += layers as i64;
    } else {
        lo[dir.axis] -= layers as i64;
    }
    let out_box = GridBox::new(lo, hi)?;
    let mut out = GridFunction::zeros(out_box.clone());
    for p in sb.points() {
        out.set(&p, seed.get(&p).unwrap())?;
    }
    let last = if dir.positive { sb.hi()[dir.axis] } else { sb.lo()[dir.axis] };
    let diag = 2.0 * n as f64;
    for l in 1..=layers as i64 {
        let t = last + step * l;
        let mut cross_lo = out_box.lo().to_vec();
        let mut cross_hi = out_box.hi().to_vec();
        cross_lo[dir.axis] = t;
        cross_hi[dir.axis] = t;
        let layer = GridBox::new(cross_lo, cross_hi)?;
        for p in layer.points() {
            let on_wall = (0..n).any(|b| b != dir.axis && (p[b] == out_box.lo()[b] || p[b] == out_box.hi()[b]));
            let v = if on_wall {
                sides.value(&p)?
            } else {
                let mut q = p.clone();
                q[dir.axis] = t - step;
                let centre = out.get(&q).unwrap();
                let mut acc = Compensated::new();
                acc.add(diag * centre);
                let mut back = q.clone();
                back[dir.axis] = t - 2 * step;
                acc.add(-out.get(&back).unwrap());
                for b in 0..n {
                    if b == dir.axis {
                        continue;
                    }
                    for d in [-1i64, 1] {
                        let mut r = q.clone();
                        r[b] += d;
                        acc.add(-out.get(&r).unwrap());
                    }
                }
                acc.value()
            };
            out.set(&p, v)?;
        }
    }
    Ok(out)
}

/// Checkerboard data `(-1)^{i_1+...+i_n}` on the face-interior boundary.
pub fn parity_boundary(bx: &GridBox) -> BoundaryData {
    BoundaryData::from_fn(bx.clone(), parity)
}

/// Alternating ±1 data on the rectangle `[-N, N] x [-M, M]`, `N > M`.
pub fn alternating_boundary(bx: &GridBox) -> Result<BoundaryData> {
    if bx.dim() != 2 {
        return Err(Error::invalid("alternating boundary data are defined for 2D rectangles"));
    }
    let (nl, ml) = (bx.hi()[0], bx.hi()[1]);
    if bx.lo()[0] != -nl || bx.lo()[1] != -ml {
        return Err(Error::invalid("rectangle must be centred: [-N, N] x [-M, M]"));
    }
    if nl <= ml {
        return Err(Error::invalid(format!("need N > M, got N = {nl}, M = {ml}")));
    }
    Ok(parity_boundary(bx))
}

/// The alternating-sign example: the Dirichlet solution on
/// `[-N, N] x [-M, M]` with ±1 data, continued layer-wise in both vertical
/// directions up to `|y| = k_max` with ±1 values on the walls `x = ±N`.
pub fn alternating_counterexample(long: i64, short: i64, k_max: i64) -> Result<GridFunction> {
    if short < 1 {
        return Err(Error::invalid("M must be at least 1"));
    }
    if k_max <= short || k_max > long {
        return Err(Error::invalid(format!("need M < K_max <= N, got M = {short}, K_max = {k_max}, N = {long}")));
    }
    let rect = GridBox::new(vec![-long, -short], vec![long, short])?;
    let g = alternating_boundary(&rect)?;
    let mut seed = solve_dirichlet(&rect, &g)?.solution;
    for p in rect.boundary(BoundaryMode::All).into_iter().map(|GridPoint(p)| p) {
        if rect.extremal_count(&p) >= 2 {
            seed.set(&p, parity(&p))?;
        }
    }
    let layers = (k_max - short) as usize;
    let up = layerwise_extend(&seed, Direction::new(1, true), layers, &SideValues::Parity)?;
    layerwise_extend(&up, Direction::new(1, false), layers, &SideValues::Parity)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// `(K, max_{[-K,K]^2} |u|)` for `M < K <= K_max`.
    pub layer_maxima: Vec<(i64, f64)>,
    /// `exp(slope)` of the least-squares line through `log max` against `K`.
    pub rate: f64,
    /// RMS residual of that fit in log space.
    pub fit_residual: f64,
}

/// Fit `max_{[-K,K]^2} |u| ≍ b^{K-M}` over `M < K <= k_max`.
pub fn growth_rate(u: &GridFunction, short: i64, k_max: i64) -> Result<GrowthReport> {
    if u.grid_box().dim() != 2 {
        return Err(Error::invalid("growth fit expects a 2D function"));
    }
    if k_max - short < 3 {
        return Err(Error::invalid("growth fit needs at least three layers beyond M"));
    }
    let mut layer_maxima = Vec::new();
    for k in (short + 1)..=k_max {
        let sq = GridBox::cube(2, k);
        layer_maxima.push((k, lattice::sup_norm(u, &sq)?));
    }
    if layer_maxima.iter().any(|&(_, m)| m <= 0.0) {
        return Err(Error::data("growth fit needs non-zero maxima"));
    }
    let xs: Vec<f64> = layer_maxima.iter().map(|&(k, _)| k as f64).collect();
    let ys: Vec<f64> = layer_maxima.iter().map(|&(_, m)| m.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    Ok(GrowthReport {
        layer_maxima,
        rate: slope.exp(),
        fit_residual: (rss / xs.len() as f64).sqrt(),
    })
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
