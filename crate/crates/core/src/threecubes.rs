//! Three-cubes (propagation of smallness) estimates for discrete harmonic
//! functions and the sampling harness that checks them.
//!
//! For `r < R < 2r < 2^{-2n-3}`:
//!
//! ```text
//! max_{Q_R} |u| <= A (B^m max_{Q_r} |u| + q^m max_{Q_1} |u|),   m < sqrt(r N)
//! B_1 = 2 + 2R/r,  q_1 = 16 (R + r),  B = B_1^n,  q = q_1 B_1^{n-1},
//! A = A_1^n B_1 / (B_1 - 1),  alpha = 1 - log B / (log B - log q),
//! delta = q^{sqrt r}.
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{discrete_nodes, lagrange_coefficients};
use crate::kernel::{batch_solve, FaceMap, KernelTable};
use crate::lattice::{grid_extent, sup_norm, BoundaryData, GridBox, GridFunction, LatticeSpec};

/// Multiplier applied to the largest ratio seen during calibration.
pub const CALIBRATION_HEADROOM: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateConstants {
    pub r: f64,
    pub big_r: f64,
    pub dim: usize,
    pub b1: f64,
    pub q1: f64,
    pub b: f64,
    pub q: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Per-step constant absorbing the kernel extension bound; calibrated.
    pub a1: f64,
    pub a: f64,
}

/// Error unless `r < R < 2r < 2^{-2n-3}`.
pub fn check_admissible(r: f64, big_r: f64, dim: usize) -> Result<()> {
    let cap = 2f64.powi(-(2 * dim as i32) - 3);
    if !(r > 0.0) {
        return Err(Error::invalid(format!("r must be positive, got {r}")));
    }
    if !(r < big_r) {
        return Err(Error::invalid(format!(
            "r < R < 2r < 2^(-2n-3) violated: r = {r} is not < R = {big_r}"
        )));
    }
    if !(big_r < 2.0 * r) {
        return Err(Error::invalid(format!(
            "r < R < 2r < 2^(-2n-3) violated: R = {big_r} is not < 2r = {}",
            2.0 * r
        )));
    }
    if !(2.0 * r < cap) {
        return Err(Error::invalid(format!(
            "r < R < 2r < 2^(-2n-3) violated: 2r = {} is not < 2^(-{}) = {cap}",
            2.0 * r,
            2 * dim + 3
        )));
    }
    Ok(())
}

impl EstimateConstants {
    pub fn new(r: f64, big_r: f64, dim: usize, a1: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid("dimension must be at least 2"));
        }
        check_admissible(r, big_r, dim)?;
        if !(a1 > 0.0) {
            return Err(Error::invalid("A1 must be positive"));
        }
        let b1 = 2.0 + 2.0 * big_r / r;
        let q1 = 16.0 * (big_r + r);
        let b = b1.powi(dim as i32);
        let q = q1 * b1.powi(dim as i32 - 1);
        // r < R < 2r < 2^(-2n-3) alone only gives q < 8 * 6^n * r, which can exceed 1
        if !(q < 1.0) {
            return Err(Error::invalid(format!(
                "q = q1 * B1^(n-1) = {q} is not < 1 for r = {r}, R = {big_r}; shrink r or R/r"
            )));
        }
        let alpha = 1.0 - b.ln() / (b.ln() - q.ln());
        let delta = q.powf(r.sqrt());
        let a = a1.powi(dim as i32) * b1 / (b1 - 1.0);
        Ok(Self {
            r,
            big_r,
            dim,
            b1,
            q1,
            b,
            q,
            alpha,
            delta,
            a1,
            a,
        })
    }

    /// Same geometry with `A` fixed directly (and `A_1` derived from it).
    pub fn with_a(&self, a: f64) -> Self {
        let a1 = (a * (self.b1 - 1.0) / self.b1).powf(1.0 / self.dim as f64);
        Self { a, a1, ..self.clone() }
    }

    /// Constant `C` for which the lemma implies the theorem's form:
    /// `C = max(A (B + 1), 2A / q, 1 / q)`.
    pub fn theorem_constant(&self) -> f64 {
        (self.a * (self.b + 1.0)).max(2.0 * self.a / self.q).max(1.0 / self.q)
    }
}

pub fn constants(r: f64, big_r: f64, dim: usize, a1: f64) -> Result<EstimateConstants> {
    EstimateConstants::new(r, big_r, dim, a1)
}

/// `m_0 = floor((log M - log eps) / (log B - log q)) + 1`.
pub fn choose_m0(eps: f64, total: f64, c: &EstimateConstants) -> Result<u32> {
    if !(eps > 0.0) || !(eps <= total) {
        return Err(Error::invalid(format!("need 0 < epsilon <= M, got epsilon = {eps}, M = {total}")));
    }
    let x = (total.ln() - eps.ln()) / (c.b.ln() - c.q.ln());
    Ok(x.floor() as u32 + 1)
}

/// `A (B^m eps + q^m M)`.
pub fn lemma_bound(eps: f64, total: f64, m: u32, c: &EstimateConstants) -> f64 {
    c.a * (c.b.powi(m as i32) * eps + c.q.powi(m as i32) * total)
}

/// Largest admissible `m` on mesh `N`: `floor(sqrt(r N))`.
pub fn max_m(r: f64, mesh: u32) -> u32 {
    let x = (r * mesh as f64).sqrt();
    (x + 1e-12).floor() as u32
}

/// The `m` the proof uses: `m_0` if it is below `sqrt(r N)`, otherwise
/// `floor(sqrt(r N))`.
pub fn proof_m(eps: f64, total: f64, mesh: u32, c: &EstimateConstants) -> u32 {
    let cap = max_m(c.r, mesh);
    if eps <= 0.0 {
        return cap;
    }
    match choose_m0(eps, total, c) {
        Ok(m0) if (m0 as f64) < (c.r * mesh as f64).sqrt() => m0,
        _ => cap,
    }
}

/// `C (eps^alpha M^{1-alpha} + delta^{sqrt N} M)` with `C` from
/// [`EstimateConstants::theorem_constant`].
pub fn theorem_bound(eps: f64, total: f64, mesh: u32, c: &EstimateConstants) -> f64 {
    let eps = eps.max(0.0);
    let interp = if eps == 0.0 {
        0.0
    } else {
        eps.powf(c.alpha) * total.powf(1.0 - c.alpha)
    };
    c.theorem_constant() * (interp + c.delta.powf((mesh as f64).sqrt()) * total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    /// Axis widened in this step (0-based).
    pub axis: usize,
    pub rect_max: f64,
    pub prev_max: f64,
    /// Largest `Σ |c_k|` used.
    pub coeff_sum: f64,
    /// Largest `|u(x) - Σ c_k u(x_k)|` over the new points.
    pub max_remainder: f64,
    /// `rect_max / (B_1^m prev_max + q_1^m M)`.
    pub required_a1: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub m: u32,
    /// Sup over `R_0 = Q_r, R_1, ..., R_n = Q_R`.
    pub rect_maxima: Vec<f64>,
    pub steps: Vec<ChainStep>,
    pub measured_a1: f64,
}

fn integral(x: f64) -> Option<i64> {
    let k = x.round();
    ((x - k).abs() < 1e-9 * x.abs().max(1.0)).then_some(k as i64)
}

/// Walk the chain `R_j = [-R, R]^j x [-r, r]^{n-j}`, interpolating along the
/// newly widened axis from grid nodes inside `R_{j-1}`, and check each step
/// `max_{R_j} <= A_1 (B_1^m max_{R_{j-1}} + q_1^m M)`.
pub fn chain_propagate(
    u: &GridFunction,
    mesh: u32,
    c: &EstimateConstants,
    m: u32,
    total: f64,
) -> Result<ChainReport> {
    let n = c.dim;
    let rn = integral(c.r * mesh as f64).ok_or_else(|| Error::invalid("r N must be an integer"))?;
    let big_rn = integral(c.big_r * mesh as f64).ok_or_else(|| Error::invalid("R N must be an integer"))?;
    if m < 1 || (m as f64) >= (rn as f64).sqrt() {
        return Err(Error::invalid(format!("need 1 <= m < sqrt(r N) = {}", (rn as f64).sqrt())));
    }
    if u.grid_box().dim() != n || !u.grid_box().contains_box(&GridBox::cube(n, big_rn)) {
        return Err(Error::invalid("function must be defined on Q_R"));
    }
    let nodes = discrete_nodes(m as usize, rn as u64)?;
    let pts = nodes.grid_points.clone().expect("discrete nodes carry grid points");
    let rect = |j: usize| {
        let half: Vec<i64> = (0..n).map(|a| if a < j { big_rn } else { rn }).collect();
        GridBox::new(half.iter().map(|h| -h).collect(), half).expect("ordered")
    };
    let mut rect_maxima = vec![sup_norm(u, &rect(0))?];
    let mut steps = Vec::with_capacity(n);
    for j in 1..=n {
        let axis = j - 1;
        let rj = rect(j);
        let rect_max = sup_norm(u, &rj)?;
        let prev_max = rect_maxima[j - 1];
        let mut coeff_sum = 0.0f64;
        let mut max_remainder = 0.0f64;
        for x in rj.points() {
            let xa = x[axis];
            if xa.abs() <= rn {
                continue;
            }
            let w = lagrange_coefficients(&nodes, xa.abs() as f64 / rn as f64);
            coeff_sum = coeff_sum.max(w.sum_abs);
            let mut y = x.clone();
            let vals: Vec<f64> = pts
                .iter()
                .map(|&s| {
                    y[axis] = xa.signum() * s;
                    u.get(&y).unwrap()
                })
                .collect();
            max_remainder = max_remainder.max((u.get(&x).unwrap() - w.apply(&vals)).abs());
        }
        let denom = c.b1.powi(m as i32) * prev_max + c.q1.powi(m as i32) * total;
        let required_a1 = if denom > 0.0 { rect_max / denom } else { 0.0 };
        steps.push(ChainStep {
            axis,
            rect_max,
            prev_max,
            coeff_sum,
            max_remainder,
            required_a1,
            satisfied: rect_max <= c.a1 * denom,
        });
        rect_maxima.push(rect_max);
    }
    let measured_a1 = steps.iter().map(|s| s.required_a1).fold(0.0, f64::max);
    Ok(ChainReport {
        m,
        rect_maxima,
        steps,
        measured_a1,
    })
}

/// How random boundary data are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLaw {
    /// Independent uniform `[-1, 1]` values on every face-interior point.
    Uniform,
    /// Random combinations of at most eight low sine modes.
    LowFrequency,
    /// Uniform values on the face `x_n = 1`, zero elsewhere.
    OneFace,
    /// `g = 1` everywhere; the solution is the constant 1.
    Constant,
}

impl std::str::FromStr for BoundaryLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(BoundaryLaw::Uniform),
            "low_frequency" | "low-frequency" => Ok(BoundaryLaw::LowFrequency),
            "one_face" | "one-face" => Ok(BoundaryLaw::OneFace),
            "constant" => Ok(BoundaryLaw::Constant),
            other => Err(Error::invalid(format!("unknown boundary law '{other}'"))),
        }
    }
}

/// Deterministic generator for stream `stream` of `seed`.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn draw_boundary(spec: &LatticeSpec, law: BoundaryLaw, rng: &mut ChaCha8Rng) -> BoundaryData {
    let cube = spec.unit_cube();
    let n = spec.dim();
    let big_n = spec.mesh() as i64;
    match law {
        BoundaryLaw::Uniform => BoundaryData::from_fn(cube, |_| rng.gen_range(-1.0..1.0)),
        BoundaryLaw::Constant => BoundaryData::from_fn(cube, |_| 1.0),
        BoundaryLaw::OneFace => BoundaryData::from_fn(cube, |p| {
            if p[n - 1] == big_n {
                rng.gen_range(-1.0..1.0)
            } else {
                0.0
            }
        }),
        BoundaryLaw::LowFrequency => {
            let count = rng.gen_range(1..=8usize);
            let faces = FaceMap::all(n);
            let max_k = (2 * big_n - 1).min(4) as u32;
            let modes: Vec<(FaceMap, Vec<u32>, f64)> = (0..count)
                .map(|_| {
                    let f = faces[rng.gen_range(0..faces.len())];
                    let k: Vec<u32> = (0..n - 1).map(|_| rng.gen_range(1..=max_k)).collect();
                    (f, k, rng.gen_range(-1.0..1.0))
                })
                .collect();
            BoundaryData::from_fn(cube, |p| {
                let mut v = 0.0;
                for (face, k, amp) in &modes {
                    let sign = if face.positive { big_n } else { -big_n };
                    if p[face.axis] != sign {
                        continue;
                    }
                    let q = face.to_canonical(p);
                    let mut t = *amp;
                    for j in 0..n - 1 {
                        t *= (std::f64::consts::PI * k[j] as f64 * (q[j] + big_n) as f64 / (2 * big_n) as f64).sin();
                    }
                    v += t;
                }
                v
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub mesh: u32,
    pub r: f64,
    pub big_r: f64,
    pub samples: usize,
    pub calibration_samples: usize,
    pub seed: u64,
    pub law: BoundaryLaw,
    /// Fixed `A`; when absent it is calibrated.
    pub a: Option<f64>,
}

/// Three maxima of one sampled function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Maxima {
    /// `max_{Q_r^h} |u|`.
    pub epsilon: f64,
    /// `max_{Q_R^h} |u|`.
    pub mid: f64,
    /// `max_{Q_1^h} |u|`.
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub epsilon: f64,
    pub mid: f64,
    pub total: f64,
    pub m_used: u32,
    /// Smallest `A` for which the lemma holds at every `1 <= m <= m_cap`.
    pub required_a: f64,
    pub lemma_bound: f64,
    pub theorem_bound: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub samples: usize,
    pub max_required_a: f64,
    pub headroom: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// `floor(r N)` and `floor(R N)`: half-widths of `Q_r^h`, `Q_R^h` in steps.
    pub r_steps: i64,
    pub big_r_steps: i64,
    pub m_cap: u32,
    pub constants: EstimateConstants,
    pub theorem_constant: f64,
    pub calibration: Option<Calibration>,
    pub records: Vec<SampleRecord>,
    pub all_satisfied: bool,
}

/// Harmonic extension of `g` measured on `Q_r^h`, `Q_R^h` and `Q_1^h`.
pub fn measure(table: &KernelTable, g: &BoundaryData, r_steps: i64, big_r_steps: i64) -> Result<Maxima> {
    let n = table.spec().dim();
    let outer = GridBox::cube(n, big_r_steps);
    let u = batch_solve(table, g, &outer)?;
    // maximum principle: the sup over the closed cube is attained on the boundary
    Ok(Maxima {
        epsilon: sup_norm(&u, &GridBox::cube(n, r_steps))?,
        mid: u.sup(),
        total: g.sup(),
    })
}

/// `max_{1 <= m <= cap} mid / (B^m eps + q^m M)`.
pub fn required_a(mx: &Maxima, cap: u32, c: &EstimateConstants) -> f64 {
    (1..=cap.max(1))
        .map(|m| {
            let d = c.b.powi(m as i32) * mx.epsilon + c.q.powi(m as i32) * mx.total;
            if d > 0.0 {
                mx.mid / d
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

const CALIBRATION_STREAM: u64 = 1 << 40;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let spec = LatticeSpec::new(cfg.dim, cfg.mesh)?;
    let base = EstimateConstants::new(cfg.r, cfg.big_r, cfg.dim, 1.0)?;
    let r_steps = grid_extent(cfg.r, cfg.mesh);
    let big_r_steps = grid_extent(cfg.big_r, cfg.mesh);
    if r_steps < 1 {
        return Err(Error::invalid(format!(
            "Q_r^h is a single point: r N = {} < 1",
            cfg.r * cfg.mesh as f64
        )));
    }
    let m_cap = max_m(cfg.r, cfg.mesh).max(1);
    let table = KernelTable::new(spec);
    let sample = |stream: u64| -> Result<Maxima> {
        let mut rng = sample_rng(cfg.seed, stream);
        let g = draw_boundary(&spec, cfg.law, &mut rng);
        measure(&table, &g, r_steps, big_r_steps)
    };

    let (constants, calibration) = match cfg.a {
        Some(a) => (base.with_a(a), None),
        None => {
            let maxima: Vec<Maxima> = (0..cfg.calibration_samples as u64)
                .into_par_iter()
                .map(|i| sample(CALIBRATION_STREAM + i))
                .collect::<Result<_>>()?;
            let max_required = maxima.iter().map(|mx| required_a(mx, m_cap, &base)).fold(0.0, f64::max);
            let a = CALIBRATION_HEADROOM * max_required;
            if !(a > 0.0) {
                return Err(Error::data("calibration produced a zero constant; use more calibration samples"));
            }
            (
                base.with_a(a),
                Some(Calibration {
                    samples: cfg.calibration_samples,
                    max_required_a: max_required,
                    headroom: CALIBRATION_HEADROOM,
                }),
            )
        }
    };

    let maxima: Vec<Maxima> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(sample)
        .collect::<Result<_>>()?;
    let records: Vec<SampleRecord> = maxima
        .into_iter()
        .enumerate()
        .map(|(index, mx)| {
            let m_used = proof_m(mx.epsilon, mx.total, cfg.mesh, &constants).clamp(1, m_cap);
            let req = required_a(&mx, m_cap, &constants);
            let tb = theorem_bound(mx.epsilon, mx.total, cfg.mesh, &constants);
            let lemma_ok = (1..=m_cap).all(|m| mx.mid <= lemma_bound(mx.epsilon, mx.total, m, &constants));
            SampleRecord {
                index,
                epsilon: mx.epsilon,
                mid: mx.mid,
                total: mx.total,
                m_used,
                required_a: req,
                lemma_bound: lemma_bound(mx.epsilon, mx.total, m_used, &constants),
                theorem_bound: tb,
                satisfied: lemma_ok && mx.mid <= tb,
            }
        })
        .collect();
    let all_satisfied = records.iter().all(|r| r.satisfied);
    Ok(ExperimentReport {
        config: cfg.clone(),
        r_steps,
        big_r_steps,
        m_cap,
        theorem_constant: constants.theorem_constant(),
        constants,
        calibration,
        records,
        all_satisfied,
    })
}

/// Smallest mesh among `meshes` (in the given order) at which every sample
/// satisfies the bound with the constants calibrated at that mesh.
pub fn smallest_passing_mesh(cfg: &ExperimentConfig, meshes: &[u32]) -> Result<Option<u32>> {
    for &mesh in meshes {
        let rep = run_experiment(&ExperimentConfig { mesh, ..cfg.clone() })?;
        if rep.all_satisfied {
            return Ok(Some(mesh));
        }
    }
    Ok(None)
}
