//! The explicit discrete Poisson kernel of the cube `Q_1^h`.
//!
//! For `y` on the face `x_n = 1`,
//!
//! ```text
//! P_h(x, y) = N^{1-n} Σ_K Π_j sin(π k_j (x_j+1)/2) sin(π k_j (y_j+1)/2)
//!                     · sinh(a_K (x_n+1)/2) / sinh(a_K)
//! ```
//!
//! summed over `K ∈ [1, 2N-1]^{n-1}`, where `a_K > 0` solves
//! `cosh(h a_K / 2) = n - Σ_j cos(π k_j h / 2)`. Other faces are handled by
//! the symmetry of the cube that carries them onto `x_n = 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoundaryData, GridBox, GridFunction, LatticeSpec};
use crate::sum::pairwise_sum;

/// Frequency multi-index `K = (k_1, ..., k_{n-1})`, `1 <= k_j <= 2N-1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&k| (k as f64).powi(2)).sum::<f64>().sqrt()
    }
}

/// Eigenvalue `a_K^h`, the positive root of `cosh(h a / 2) = n - Σ cos(π k_j h / 2)`.
pub fn compute_a(spec: &LatticeSpec, k: &[u32]) -> Result<f64> {
    let n = spec.dim();
    let big_n = spec.mesh();
    if k.len() != n - 1 {
        return Err(Error::invalid(format!("multi-index must have {} entries", n - 1)));
    }
    if k.iter().any(|&kj| kj < 1 || kj > 2 * big_n - 1) {
        return Err(Error::invalid(format!("multi-index {k:?} out of range [1, {}]", 2 * big_n - 1)));
    }
    Ok(eigenvalue(n, big_n, k))
}

fn eigenvalue(n: usize, big_n: u32, k: &[u32]) -> f64 {
    debug_assert_eq!(k.len(), n - 1);
    let h = 1.0 / big_n as f64;
    // cosh(ha/2) - 1 = Σ (1 - cos θ_j) = Σ 2 sin²(θ_j / 2)
    let d: f64 = k
        .iter()
        .map(|&kj| {
            let s = (std::f64::consts::PI * kj as f64 * h / 4.0).sin();
            2.0 * s * s
        })
        .sum();
    let acosh = (d + (d * (2.0 + d)).sqrt()).ln_1p();
    2.0 / h * acosh
}

/// Row-major enumeration of `[1, 2N-1]^{d}`.
fn multi_indices(d: usize, big_n: u32) -> impl Iterator<Item = Vec<u32>> {
    let side = (2 * big_n - 1) as usize;
    let total = side.pow(d as u32);
    (0..total).map(move |mut o| {
        let mut k = vec![0u32; d];
        for j in (0..d).rev() {
            k[j] = (o % side) as u32 + 1;
            o /= side;
        }
        k
    })
}

/// Symmetry of the cube carrying the face `{x_axis = ±1}` onto `{x_n = 1}`:
/// swap `axis` with the last axis, then reflect the last axis if needed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceMap {
    pub axis: usize,
    pub positive: bool,
    dim: usize,
}

impl FaceMap {
    pub fn new(dim: usize, axis: usize, positive: bool) -> Self {
        Self { axis, positive, dim }
    }

    /// Face containing the face-interior point `y` of the cube `[-N, N]^n`.
    pub fn of_point(y: &[i64], big_n: i64) -> Option<Self> {
        let mut found = None;
        for (a, &c) in y.iter().enumerate() {
            if c.abs() == big_n {
                if found.is_some() {
                    return None;
                }
                found = Some(Self::new(y.len(), a, c > 0));
            } else if c.abs() > big_n {
                return None;
            }
        }
        found
    }

    pub fn to_canonical<T: Copy + std::ops::Neg<Output = T>>(&self, p: &[T]) -> Vec<T> {
        let mut q = p.to_vec();
        q.swap(self.axis, self.dim - 1);
        if !self.positive {
            q[self.dim - 1] = -q[self.dim - 1];
        }
        q
    }

    pub fn to_original<T: Copy + std::ops::Neg<Output = T>>(&self, q: &[T]) -> Vec<T> {
        let mut p = q.to_vec();
        if !self.positive {
            p[self.dim - 1] = -p[self.dim - 1];
        }
        p.swap(self.axis, self.dim - 1);
        p
    }

    /// Where original axis `j` lands in canonical coordinates.
    pub fn canonical_axis(&self, j: usize) -> usize {
        if j == self.axis {
            self.dim - 1
        } else if j == self.dim - 1 {
            self.axis
        } else {
            j
        }
    }

    pub fn map_box(&self, bx: &GridBox) -> GridBox {
        let lo = self.to_canonical(bx.lo());
        let hi = self.to_canonical(bx.hi());
        let (lo, hi): (Vec<i64>, Vec<i64>) = lo.iter().zip(&hi).map(|(&a, &b)| (a.min(b), a.max(b))).unzip();
        GridBox::new(lo, hi).expect("mapped box stays ordered")
    }

    /// All `2n` faces in a fixed order.
    pub fn all(dim: usize) -> Vec<FaceMap> {
        (0..dim)
            .flat_map(|a| [FaceMap::new(dim, a, false), FaceMap::new(dim, a, true)])
            .collect()
    }
}

/// Precomputed eigenvalues and sine values for one lattice.
#[derive(Clone, Debug)]
pub struct KernelTable {
    spec: LatticeSpec,
    /// `a_K` in row-major order over `[1, 2N-1]^{n-1}`.
    a: Vec<f64>,
    /// `sin(π m / (2N))` for `m ∈ [0, 4N)`.
    sines: Vec<f64>,
}

impl KernelTable {
    pub fn new(spec: LatticeSpec) -> Self {
        let n = spec.dim();
        let big_n = spec.mesh();
        let a = multi_indices(n - 1, big_n).map(|k| eigenvalue(n, big_n, &k)).collect();
        let period = 4 * big_n as usize;
        let nn = big_n as usize;
        let base = |q: usize| (std::f64::consts::PI * q as f64 / (2.0 * big_n as f64)).sin();
        let sines = (0..period)
            .map(|m| match m {
                m if m <= nn => base(m),
                m if m <= 2 * nn => base(2 * nn - m),
                m if m <= 3 * nn => -base(m - 2 * nn),
                m => -base(4 * nn - m),
            })
            .collect();
        Self { spec, a, sines }
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn mesh(&self) -> i64 {
        self.spec.mesh() as i64
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.a
    }

    /// Iterate `(K, a_K)` in canonical order.
    pub fn iter_eigenvalues(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        multi_indices(self.spec.dim() - 1, self.spec.mesh())
            .zip(self.a.iter().copied())
            .map(|(k, a)| (MultiIndex(k), a))
    }

    /// `sin(π k (i + N) / (2N))`, i.e. `sin(π k (x + 1) / 2)` at index `i`.
    pub fn sine(&self, k: u32, i: i64) -> f64 {
        let period = self.sines.len() as i64;
        let m = (k as i64 * (i + self.mesh())).rem_euclid(period);
        self.sines[m as usize]
    }

    /// `sinh(a (x_n + 1) / 2) / sinh(a)` at index `i`, in overflow-free form.
    pub fn sinh_ratio(&self, a: f64, i: i64) -> f64 {
        let x = i as f64 / self.mesh() as f64;
        (a * (x - 1.0) / 2.0).exp() * (-(-a * (x + 1.0)).exp_m1()) / (-(-2.0 * a).exp_m1())
    }

    fn unit_cube(&self) -> GridBox {
        self.spec.unit_cube()
    }

    fn face_of(&self, y: &[i64]) -> Result<FaceMap> {
        let cube = self.unit_cube();
        if y.len() != self.spec.dim() || !cube.is_face_interior(y) {
            return Err(Error::invalid(format!("{y:?} is not a face-interior boundary point")));
        }
        Ok(FaceMap::of_point(y, self.mesh()).expect("face-interior point has a face"))
    }

    /// Summands of `P_h(x, y)` for canonical `xq`, `yq`, in canonical order.
    fn canonical_terms(&self, xq: &[i64], yq: &[i64]) -> Vec<f64> {
        let d = self.spec.dim() - 1;
        let last = xq[d];
        multi_indices(d, self.spec.mesh())
            .zip(&self.a)
            .map(|(k, &a)| {
                let mut t = self.sinh_ratio(a, last);
                for j in 0..d {
                    t *= self.sine(k[j], xq[j]) * self.sine(k[j], yq[j]);
                }
                t
            })
            .collect()
    }

    fn normalisation(&self) -> f64 {
        (self.mesh() as f64).powi(1 - self.spec.dim() as i32)
    }
}

/// `f_K(x) = sinh(a_K (x_n+1)/2) Π_j sin(π k_j (x_j+1)/2)` at lattice point `x`.
pub fn basis_eval(spec: &LatticeSpec, k: &[u32], x: &[i64]) -> Result<f64> {
    let a = compute_a(spec, k)?;
    let cube = spec.unit_cube();
    if !cube.contains(x) {
        return Err(Error::invalid(format!("{x:?} is outside the closed unit cube")));
    }
    let h = spec.h();
    let n = spec.dim();
    let mut v = (a * (x[n - 1] as f64 * h + 1.0) / 2.0).sinh();
    for j in 0..n - 1 {
        // exact zeros on the faces x_j = ±1
        let m = (k[j] as i64 * (x[j] + spec.mesh() as i64)).rem_euclid(4 * spec.mesh() as i64);
        if m % (2 * spec.mesh() as i64) == 0 {
            return Ok(0.0);
        }
        v *= (std::f64::consts::PI * k[j] as f64 * (x[j] as f64 * h + 1.0) / 2.0).sin();
    }
    Ok(v)
}

/// `P_h(x, y)` for `x` in the closed cube and `y` face-interior.
pub fn kernel_eval(table: &KernelTable, x: &[i64], y: &[i64]) -> Result<f64> {
    let face = table.face_of(y)?;
    if !table.unit_cube().contains(x) {
        return Err(Error::invalid(format!("{x:?} is outside the closed unit cube")));
    }
    let xq = face.to_canonical(x);
    let yq = face.to_canonical(y);
    Ok(pairwise_sum(&table.canonical_terms(&xq, &yq)) * table.normalisation())
}

/// `Σ_y g(y) P_h(x, y)` evaluated pointwise.
pub fn represent(table: &KernelTable, g: &BoundaryData, x: &[i64]) -> Result<f64> {
    if g.grid_box() != &table.unit_cube() {
        return Err(Error::invalid("boundary data must live on the unit cube of the kernel"));
    }
    let mut terms = Vec::with_capacity(g.len());
    for (y, v) in g.iter() {
        if v != 0.0 {
            terms.push(v * kernel_eval(table, x, y)?);
        }
    }
    Ok(pairwise_sum(&terms))
}

/// `out[.., r, ..] = Σ_c mat[r][c] data[.., c, ..]` along `axis`.
fn mode_apply(data: &[f64], shape: &[usize], axis: usize, mat: &[f64], rows: usize) -> (Vec<f64>, Vec<usize>) {
    let cols = shape[axis];
    debug_assert_eq!(mat.len(), rows * cols);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        for r in 0..rows {
            let row = &mat[r * cols..(r + 1) * cols];
            let dst = &mut out[(o * rows + r) * inner..(o * rows + r + 1) * inner];
            for (c, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let src = &data[(o * cols + c) * inner..(o * cols + c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// Harmonic extension of `g` evaluated on every point of `region`.
///
/// Each face contributes a separable sine transform of its data followed by
/// an inverse transform restricted to the region, layer by layer, which costs
/// `O(N^{n-1})` per coefficient pass instead of one kernel sum per point pair.
pub fn batch_solve(table: &KernelTable, g: &BoundaryData, region: &GridBox) -> Result<GridFunction> {
    let cube = table.unit_cube();
    if g.grid_box() != &cube {
        return Err(Error::invalid("boundary data must live on the unit cube of the kernel"));
    }
    if !cube.contains_box(region) {
        return Err(Error::invalid("region must lie in the closed unit cube"));
    }
    let n = table.spec.dim();
    let d = n - 1;
    let big_n = table.mesh();
    let side = (2 * big_n - 1) as usize;
    let mut out = GridFunction::zeros(region.clone());

    // Forward sine matrix S[k-1][j], j indexing face-interior positions.
    let mut fwd = vec![0.0; side * side];
    for k in 0..side {
        for j in 0..side {
            fwd[k * side + j] = table.sine(k as u32 + 1, j as i64 - big_n + 1);
        }
    }
    let norm = table.normalisation();

    for face in FaceMap::all(n) {
        let face_shape = vec![side; d];
        let face_len = side.pow(d as u32);
        let mut data = vec![0.0; face_len];
        let mut any = false;
        for (o, slot) in data.iter_mut().enumerate() {
            let mut q = vec![0i64; n];
            let mut rest = o;
            for j in (0..d).rev() {
                q[j] = (rest % side) as i64 - big_n + 1;
                rest /= side;
            }
            q[d] = big_n;
            let p = face.to_original(&q);
            let v = g
                .get(&p)
                .ok_or_else(|| Error::invalid(format!("boundary data missing at {p:?}")))?;
            any |= v != 0.0;
            *slot = v;
        }
        if !any {
            continue;
        }
        let mut coeffs = data;
        let mut shape = face_shape;
        for axis in 0..d {
            let (c, s) = mode_apply(&coeffs, &shape, axis, &fwd, side);
            coeffs = c;
            shape = s;
        }
        for c in coeffs.iter_mut() {
            *c *= norm;
        }

        let creg = face.map_box(region);
        let inverse: Vec<Vec<f64>> = (0..d)
            .map(|b| {
                let rows = creg.extent(b);
                let mut m = vec![0.0; rows * side];
                for r in 0..rows {
                    let i = creg.lo()[b] + r as i64;
                    for k in 0..side {
                        m[r * side + k] = table.sine(k as u32 + 1, i);
                    }
                }
                m
            })
            .collect();
        for layer in creg.lo()[d]..=creg.hi()[d] {
            let mut w: Vec<f64> = coeffs
                .iter()
                .zip(&table.a)
                .map(|(c, &a)| c * table.sinh_ratio(a, layer))
                .collect();
            let mut shape = vec![side; d];
            for (b, mat) in inverse.iter().enumerate() {
                let (v, s) = mode_apply(&w, &shape, b, mat, creg.extent(b));
                w = v;
                shape = s;
            }
            let mut cross_lo = creg.lo().to_vec();
            let mut cross_hi = creg.hi().to_vec();
            cross_lo[d] = layer;
            cross_hi[d] = layer;
            let cross = GridBox::new(cross_lo, cross_hi)?;
            for (o, q) in cross.points().enumerate() {
                let p = face.to_original(&q);
                let off = region.offset(&p).expect("mapped point lies in region");
                out.values_mut()[off] += w[o];
            }
        }
    }
    Ok(out)
}

/// Closed rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexDomain {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

impl ComplexDomain {
    pub fn new(re_lo: f64, re_hi: f64, im_lo: f64, im_hi: f64) -> Result<Self> {
        if re_lo > re_hi || im_lo > im_hi {
            return Err(Error::invalid("complex domain bounds not ordered"));
        }
        Ok(Self {
            re_lo,
            re_hi,
            im_lo,
            im_hi,
        })
    }

    /// `{-1/2 <= Re z <= 1/2, -1/16 <= Im z <= 1/16}`.
    pub fn omega() -> Self {
        Self {
            re_lo: -0.5,
            re_hi: 0.5,
            im_lo: -1.0 / 16.0,
            im_hi: 1.0 / 16.0,
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.re_lo <= z.re && z.re <= self.re_hi && self.im_lo <= z.im && z.im <= self.im_hi
    }

    /// `re_pts x im_pts` grid including the corners.
    pub fn sample(&self, re_pts: usize, im_pts: usize) -> Vec<Complex64> {
        let lin = |lo: f64, hi: f64, k: usize, m: usize| {
            if m <= 1 {
                (lo + hi) / 2.0
            } else {
                lo + (hi - lo) * k as f64 / (m - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(re_pts * im_pts);
        for a in 0..re_pts {
            for b in 0..im_pts {
                out.push(Complex64::new(
                    lin(self.re_lo, self.re_hi, a, re_pts),
                    lin(self.im_lo, self.im_hi, b, im_pts),
                ));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexEval {
    pub value: Complex64,
    /// False when `z` or a frozen coordinate lies outside the domain where
    /// the `N^{1-n}` bound is claimed. The value itself is still valid.
    pub in_domain: bool,
}

/// `P_h(x, y)` with physical coordinate `x_axis` replaced by the complex
/// number `z`; `frozen` holds the other `n-1` physical coordinates in axis
/// order.
pub fn kernel_complex_eval(
    table: &KernelTable,
    y: &[i64],
    frozen: &[f64],
    axis: usize,
    z: Complex64,
    domain: &ComplexDomain,
) -> Result<ComplexEval> {
    let n = table.spec.dim();
    if axis >= n || frozen.len() != n - 1 {
        return Err(Error::invalid("need an axis < n and n-1 frozen coordinates"));
    }
    let face = table.face_of(y)?;
    let mut x: Vec<Complex64> = Vec::with_capacity(n);
    let mut it = frozen.iter();
    for j in 0..n {
        if j == axis {
            x.push(z);
        } else {
            x.push(Complex64::new(*it.next().unwrap(), 0.0));
        }
    }
    let in_domain = domain.contains(z) && frozen.iter().all(|f| (-0.5..=0.5).contains(f));
    let xq = face.to_canonical(&x);
    let yq = face.to_canonical(y);
    let d = n - 1;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let terms: Vec<Complex64> = multi_indices(d, table.spec.mesh())
        .zip(&table.a)
        .map(|(k, &a)| {
            let w = xq[d];
            let ratio = (a * (w - 1.0) / 2.0).exp() * (Complex64::new(1.0, 0.0) - (-a * (w + 1.0)).exp())
                / (-(-2.0 * a).exp_m1());
            let mut t = ratio;
            for j in 0..d {
                t *= (half_pi * k[j] as f64 * (xq[j] + 1.0)).sin() * table.sine(k[j], yq[j]);
            }
            t
        })
        .collect();
    let re: Vec<f64> = terms.iter().map(|t| t.re).collect();
    let im: Vec<f64> = terms.iter().map(|t| t.im).collect();
    let value = Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) * table.normalisation();
    Ok(ComplexEval { value, in_domain })
}

/// Sampled `sup |f|` over `Ω` for one lattice, with the sampling recipe fixed.
pub fn sampled_extension_sup(table: &KernelTable, re_pts: usize, im_pts: usize) -> Result<f64> {
    let n = table.spec.dim();
    let big_n = table.mesh();
    let domain = ComplexDomain::omega();
    let zs = domain.sample(re_pts, im_pts);
    let positions: Vec<i64> = {
        let mut v = vec![0, big_n / 2, -(big_n / 2), big_n - 1, -(big_n - 1)];
        v.sort();
        v.dedup();
        v
    };
    let frozen_vals = [-0.5, -0.25, 0.0, 0.25, 0.5];
    let mut sup = 0.0f64;
    // y on the face x_n = 1; the other faces follow by symmetry.
    let mut ys: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..n - 1 {
        ys = ys
            .into_iter()
            .flat_map(|y| {
                positions.iter().map(move |&p| {
                    let mut y = y.clone();
                    y.push(p);
                    y
                })
            })
            .collect();
    }
    let mut frozen_sets: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..n - 1 {
        frozen_sets = frozen_sets
            .into_iter()
            .flat_map(|f| {
                frozen_vals.iter().map(move |&v| {
                    let mut f = f.clone();
                    f.push(v);
                    f
                })
            })
            .collect();
    }
    for mut y in ys {
        y.push(big_n);
        for axis in 0..n {
            for frozen in &frozen_sets {
                for &z in &zs {
                    let e = kernel_complex_eval(table, &y, frozen, axis, z, &domain)?;
                    sup = sup.max(e.value.norm());
                }
            }
        }
    }
    Ok(sup)
}

/// Result of fitting `sup_Ω |f| ≈ C N^{1-n}` over several meshes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionFit {
    pub meshes: Vec<u32>,
    pub sups: Vec<f64>,
    /// Least-squares slope of `log sup` against `log N`.
    pub slope: f64,
    /// `max_N sup · N^{n-1}`, the smallest constant valid on the samples.
    pub constant: f64,
}

pub fn fit_extension_constant(dim: usize, meshes: &[u32]) -> Result<ExtensionFit> {
    if meshes.len() < 2 {
        return Err(Error::invalid("need at least two meshes to fit a slope"));
    }
    let mut sups = Vec::with_capacity(meshes.len());
    for &m in meshes {
        let table = KernelTable::new(LatticeSpec::new(dim, m)?);
        sups.push(sampled_extension_sup(&table, 21, 5)?);
    }
    let xs: Vec<f64> = meshes.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
    let (slope, _) = crate::oracle::least_squares(&xs, &ys);
    let constant = meshes
        .iter()
        .zip(&sups)
        .map(|(&m, s)| s * (m as f64).powi(dim as i32 - 1))
        .fold(0.0, f64::max);
    Ok(ExtensionFit {
        meshes: meshes.to_vec(),
        sups,
        slope,
        constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{laplacian_residual, BoundaryMode, GridPoint};
    use crate::oracle::solve_dirichlet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(n: usize, big_n: u32) -> KernelTable {
        KernelTable::new(LatticeSpec::new(n, big_n).unwrap())
    }

    /// Independent root finder for `cosh(h a / 2) = rhs` by bisection.
    fn bisect_a(n: usize, big_n: u32, k: &[u32]) -> f64 {
        let h = 1.0 / big_n as f64;
        let rhs = n as f64 - k.iter().map(|&kj| (std::f64::consts::PI * kj as f64 * h / 2.0).cos()).sum::<f64>();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while (h * hi / 2.0).cosh() < rhs {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (h * mid / 2.0).cosh() < rhs {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn eigenvalue_examples() {
        let s = LatticeSpec::new(2, 2).unwrap();
        let a = compute_a(&s, &[2]).unwrap();
        // 4 arccosh(2) = 4 ln(2 + √3)
        assert!((a - 4.0 * (2.0 + 3f64.sqrt()).ln()).abs() < 1e-12, "{a}");
        assert!((a - 5.267_831_6).abs() < 1e-6, "{a}");
        assert!((a - bisect_a(2, 2, &[2])).abs() < 1e-9);
        for big_n in [1u32, 3, 7, 16] {
            let s = LatticeSpec::new(2, big_n).unwrap();
            let k = 2 * big_n - 1;
            let a = compute_a(&s, &[k]).unwrap();
            let closed = 2.0 * big_n as f64 * (2.0 + (std::f64::consts::PI / (2.0 * big_n as f64)).cos()).acosh();
            assert!((a - closed).abs() < 1e-9 * closed);
        }
        for (n, big_n) in [(3usize, 4u32), (4, 2)] {
            let t = table(n, big_n);
            for (k, a) in t.iter_eigenvalues() {
                let b = bisect_a(n, big_n, &k.0);
                assert!((a - b).abs() < 1e-9 * b.max(1.0));
            }
        }
        assert!(compute_a(&s, &[0]).is_err());
        assert!(compute_a(&s, &[4]).is_err());
    }

    #[test]
    fn eigenvalues_increase_in_each_index() {
        let t = table(3, 6);
        let side = 11;
        let a = t.eigenvalues();
        for i in 0..side {
            for j in 0..side {
                if j + 1 < side {
                    assert!(a[i * side + j + 1] > a[i * side + j]);
                }
                if i + 1 < side {
                    assert!(a[(i + 1) * side + j] > a[i * side + j]);
                }
            }
        }
    }

    #[test]
    fn basis_vanishes_and_is_harmonic() {
        for (n, big_n) in [(2usize, 5u32), (3, 3)] {
            let s = LatticeSpec::new(n, big_n).unwrap();
            let cube = s.unit_cube();
            for k in multi_indices(n - 1, big_n) {
                let f = GridFunction::from_fn(cube.clone(), |p| basis_eval(&s, &k, p).unwrap());
                let scale = f.sup().max(1.0);
                for p in cube.points() {
                    if p[n - 1] == -(big_n as i64) || p[..n - 1].iter().any(|c| c.abs() == big_n as i64) {
                        assert_eq!(f.get(&p).unwrap(), 0.0);
                    }
                }
                for p in cube.interior().unwrap().points() {
                    assert!(laplacian_residual(&f, &p).unwrap().abs() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn delta_property_on_small_cubes() {
        for (n, big_n) in [(2usize, 3u32), (3, 2)] {
            let t = table(n, big_n);
            let cube = t.spec().unit_cube();
            let faces = cube.boundary(BoundaryMode::FaceInterior);
            for GridPoint(y) in &faces {
                for GridPoint(z) in &faces {
                    let v = kernel_eval(&t, z, y).unwrap();
                    let expect = if z == y { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-10, "{z:?} {y:?} {v}");
                }
            }
        }
    }

    #[test]
    fn kernel_rejects_non_face_points() {
        let t = table(2, 3);
        assert!(kernel_eval(&t, &[0, 0], &[3, 3]).is_err());
        assert!(kernel_eval(&t, &[0, 0], &[0, 0]).is_err());
        assert!(kernel_eval(&t, &[4, 0], &[3, 0]).is_err());
    }

    #[test]
    fn kernel_matches_delta_solves_and_is_positive() {
        let t = table(2, 4);
        let cube = t.spec().unit_cube();
        for GridPoint(y) in cube.boundary(BoundaryMode::FaceInterior) {
            let g = BoundaryData::from_fn(cube.clone(), |p| if p == y.as_slice() { 1.0 } else { 0.0 });
            let sol = solve_dirichlet(&cube, &g).unwrap().solution;
            for x in cube.interior().unwrap().points() {
                let k = kernel_eval(&t, &x, &y).unwrap();
                assert!(k >= -1e-10);
                assert!((k - sol.get(&x).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn kernel_sums_to_one() {
        let t = table(3, 2);
        let g = BoundaryData::from_fn(t.spec().unit_cube(), |_| 1.0);
        for x in t.spec().unit_cube().interior().unwrap().points() {
            assert!((represent(&t, &g, &x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn face_symmetry_leaves_kernel_invariant() {
        let t = table(3, 3);
        let cube = t.spec().unit_cube();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let faces = cube.boundary(BoundaryMode::FaceInterior);
        for _ in 0..50 {
            let y = faces[rng.gen_range(0..faces.len())].0.clone();
            let x: Vec<i64> = (0..3).map(|_| rng.gen_range(-2..=2)).collect();
            let base = kernel_eval(&t, &x, &y).unwrap();
            // a transposition of axes 0 and 1 and a reflection of axis 2
            let sw = |p: &[i64]| vec![p[1], p[0], -p[2]];
            let v = kernel_eval(&t, &sw(&x), &sw(&y)).unwrap();
            assert!((v - base).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_data_represented_exactly() {
        let t = table(2, 5);
        let s = *t.spec();
        let h = s.h();
        let g = BoundaryData::from_fn(s.unit_cube(), |p| p[0] as f64 * h);
        for x in s.unit_cube().interior().unwrap().points() {
            assert!((represent(&t, &g, &x).unwrap() - x[0] as f64 * h).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_matches_pointwise_and_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (n, big_n) in [(2usize, 8u32), (3, 3)] {
            let t = table(n, big_n);
            let cube = t.spec().unit_cube();
            let g = BoundaryData::from_fn(cube.clone(), |_| rng.gen_range(-1.0..1.0));
            let batch = batch_solve(&t, &g, &cube).unwrap();
            let oracle = solve_dirichlet(&cube, &g).unwrap().solution;
            let scale = g.sup();
            for p in cube.points() {
                if cube.extremal_count(&p) >= 2 {
                    assert!(batch.get(&p).unwrap().abs() < 1e-12);
                    continue;
                }
                let (a, b) = (batch.get(&p).unwrap(), oracle.get(&p).unwrap());
                assert!((a - b).abs() <= 1e-9 * scale, "{p:?}: {a} vs {b}");
            }
            let interior = cube.interior().unwrap();
            for _ in 0..100 {
                let p = interior.point_at(rng.gen_range(0..interior.len()));
                let pw = represent(&t, &g, &p).unwrap();
                assert!((pw - batch.get(&p).unwrap()).abs() <= 1e-12 * scale.max(1.0) * 10.0);
            }
        }
    }

    #[test]
    fn batch_on_subregion_and_ones() {
        let t = table(2, 16);
        let cube = t.spec().unit_cube();
        let g = BoundaryData::from_fn(cube.clone(), |_| 1.0);
        let region = GridBox::new(vec![-3, 1], vec![2, 6]).unwrap();
        let u = batch_solve(&t, &g, &region).unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(batch_solve(&t, &g, &cube.expand(1)).is_err());
    }

    #[test]
    fn complex_restriction_and_conjugation() {
        let t = table(2, 8);
        let dom = ComplexDomain::omega();
        let y = vec![3, 8];
        for axis in 0..2 {
            for i in -4..=4i64 {
                let frozen = [0.25];
                let mut x = vec![2i64, 2];
                x[axis] = i;
                let e = kernel_complex_eval(&t, &y, &frozen, axis, Complex64::new(i as f64 / 8.0, 0.0), &dom).unwrap();
                assert!(e.in_domain);
                assert!((e.value.re - kernel_eval(&t, &x, &y).unwrap()).abs() < 1e-12);
                assert!(e.value.im.abs() < 1e-15);
            }
            let z = Complex64::new(0.1, 0.05);
            let a = kernel_complex_eval(&t, &y, &[0.1], axis, z, &dom).unwrap().value;
            let b = kernel_complex_eval(&t, &y, &[0.1], axis, z.conj(), &dom).unwrap().value;
            assert!((a.conj() - b).norm() < 1e-14);
        }
        // other faces go through the face map
        let e = kernel_complex_eval(&t, &[-8, -2], &[0.25], 0, Complex64::new(-0.25, 0.0), &dom).unwrap();
        assert!((e.value.re - kernel_eval(&t, &[-2, 2], &[-8, -2]).unwrap()).abs() < 1e-12);
        let out = kernel_complex_eval(&t, &y, &[0.1], 0, Complex64::new(0.9, 0.0), &dom).unwrap();
        assert!(!out.in_domain);
    }

    #[test]
    fn eigenvalue_lower_bound_small() {
        for big_n in 1..=6u32 {
            let t = table(3, big_n);
            for (k, a) in t.iter_eigenvalues() {
                assert!(a >= (2.0 * big_n as f64).min(k.norm()));
            }
        }
    }
}
