//! Lattice geometry, grid functions and the discrete Laplacian stencil.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension `n` and mesh count `N` of the lattice `(hZ)^n`, `h = 1/N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    dim: usize,
    mesh: u32,
}

impl LatticeSpec {
    pub fn new(dim: usize, mesh: u32) -> Result<Self> {
        if dim < 2 {
            return Err(Error::invalid(format!("dimension must be at least 2, got {dim}")));
        }
        if mesh < 1 {
            return Err(Error::invalid("mesh count N must be a positive integer"));
        }
        Ok(Self { dim, mesh })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N = 1/h`.
    pub fn mesh(&self) -> u32 {
        self.mesh
    }

    pub fn h(&self) -> f64 {
        1.0 / self.mesh as f64
    }

    /// Index coordinates of the unit cube `Q_1^h`.
    pub fn unit_cube(&self) -> GridBox {
        GridBox::cube(self.dim, self.mesh as i64)
    }

    /// `Q_d^h = [-d, d]^n ∩ (hZ)^n`.
    pub fn cube(&self, d: f64) -> Result<GridBox> {
        if !(d >= 0.0) {
            return Err(Error::invalid(format!("cube half-width must be non-negative, got {d}")));
        }
        Ok(GridBox::cube(self.dim, grid_extent(d, self.mesh)))
    }

    pub fn physical(&self, p: &[i64]) -> Vec<f64> {
        let h = self.h();
        p.iter().map(|&i| i as f64 * h).collect()
    }
}

/// Number of lattice steps inside `[0, d]` for mesh `N`, i.e. `floor(d N)`
/// with a small tolerance so that `d = k/N` lands exactly on `k`.
pub fn grid_extent(d: f64, mesh: u32) -> i64 {
    let x = d * mesh as f64;
    (x + 1e-9 * x.abs().max(1.0)).floor() as i64
}

/// A lattice point in index coordinates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPoint(pub Vec<i64>);

impl GridPoint {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for GridPoint {
    fn from(v: Vec<i64>) -> Self {
        GridPoint(v)
    }
}

/// Closed axis-aligned box of lattice points, inclusive bounds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridBox {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

/// Which boundary points [`GridBox::boundary`] returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// At least one extremal coordinate.
    All,
    /// Exactly one extremal coordinate.
    FaceInterior,
}

impl GridBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box bounds must be non-empty and of equal length"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::invalid(format!("box bounds not ordered: lo={lo:?} hi={hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// `[-half, half]^dim`.
    pub fn cube(dim: usize, half: i64) -> Self {
        assert!(half >= 0);
        Self {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    /// Number of points along `axis`.
    pub fn extent(&self, axis: usize) -> usize {
        (self.hi[axis] - self.lo[axis] + 1) as usize
    }

    pub fn shape(&self) -> Vec<usize> {
        (0..self.dim()).map(|a| self.extent(a)).collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        p.len() == self.dim() && p.iter().enumerate().all(|(a, &x)| self.lo[a] <= x && x <= self.hi[a])
    }

    pub fn contains_box(&self, other: &GridBox) -> bool {
        other.dim() == self.dim() && self.contains(&other.lo) && self.contains(&other.hi)
    }

    /// Row-major offset (last axis fastest).
    pub fn offset(&self, p: &[i64]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut off = 0usize;
        for a in 0..self.dim() {
            off = off * self.extent(a) + (p[a] - self.lo[a]) as usize;
        }
        Some(off)
    }

    pub fn point_at(&self, mut offset: usize) -> Vec<i64> {
        let mut p = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let e = self.extent(a);
            p[a] = self.lo[a] + (offset % e) as i64;
            offset /= e;
        }
        p
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.len()).map(move |o| self.point_at(o))
    }

    /// The box shrunk by one on every side, if non-empty.
    pub fn interior(&self) -> Option<GridBox> {
        let lo: Vec<i64> = self.lo.iter().map(|x| x + 1).collect();
        let hi: Vec<i64> = self.hi.iter().map(|x| x - 1).collect();
        GridBox::new(lo, hi).ok()
    }

    /// The box grown by `k` on every side.
    pub fn expand(&self, k: i64) -> GridBox {
        GridBox {
            lo: self.lo.iter().map(|x| x - k).collect(),
            hi: self.hi.iter().map(|x| x + k).collect(),
        }
    }

    /// Number of coordinates of `p` sitting on the box's extremal values.
    pub fn extremal_count(&self, p: &[i64]) -> usize {
        p.iter()
            .enumerate()
            .filter(|&(a, &x)| x == self.lo[a] || x == self.hi[a])
            .count()
    }

    pub fn is_interior_point(&self, p: &[i64]) -> bool {
        self.contains(p) && self.extremal_count(p) == 0
    }

    pub fn is_face_interior(&self, p: &[i64]) -> bool {
        self.contains(p) && self.extremal_count(p) == 1
    }

    /// Boundary points in row-major order.
    pub fn boundary(&self, mode: BoundaryMode) -> Vec<GridPoint> {
        self.points()
            .filter(|p| {
                let c = self.extremal_count(p);
                match mode {
                    BoundaryMode::All => c >= 1,
                    BoundaryMode::FaceInterior => c == 1,
                }
            })
            .map(GridPoint)
            .collect()
    }
}

/// Enumerate boundary points of `bx`; see [`BoundaryMode`].
pub fn enumerate_boundary(bx: &GridBox, mode: BoundaryMode) -> Vec<GridPoint> {
    bx.boundary(mode)
}

/// Dense real-valued function on a box, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    bx: GridBox,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(bx: GridBox) -> Self {
        let n = bx.len();
        Self { bx, values: vec![0.0; n] }
    }

    pub fn from_values(bx: GridBox, values: Vec<f64>) -> Result<Self> {
        if values.len() != bx.len() {
            return Err(Error::invalid(format!(
                "grid function needs {} values, got {}",
                bx.len(),
                values.len()
            )));
        }
        Ok(Self { bx, values })
    }

    pub fn from_fn(bx: GridBox, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let values = bx.points().map(|p| f(&p)).collect();
        Self { bx, values }
    }

    pub fn grid_box(&self) -> &GridBox {
        &self.bx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, p: &[i64]) -> Option<f64> {
        self.bx.offset(p).map(|o| self.values[o])
    }

    pub fn at(&self, p: &[i64]) -> Result<f64> {
        self.get(p).ok_or_else(|| self.out_of_box(p))
    }

    pub fn set(&mut self, p: &[i64], v: f64) -> Result<()> {
        let o = self.bx.offset(p).ok_or_else(|| self.out_of_box(p))?;
        self.values[o] = v;
        Ok(())
    }

    fn out_of_box(&self, p: &[i64]) -> Error {
        Error::OutOfBox {
            point: p.to_vec(),
            lo: self.bx.lo.clone(),
            hi: self.bx.hi.clone(),
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Copy of the values on a sub-box.
    pub fn restrict(&self, region: &GridBox) -> Result<GridFunction> {
        if !self.bx.contains_box(region) {
            return Err(Error::invalid("restriction region exceeds the function's box"));
        }
        Ok(GridFunction::from_fn(region.clone(), |p| self.get(p).unwrap()))
    }
}

/// Stencil residual `Σ_j [u(x+e_j) + u(x-e_j)] - 2n u(x)` at `x`.
pub fn laplacian_residual(u: &GridFunction, x: &[i64]) -> Result<f64> {
    let n = u.bx.dim();
    if x.len() != n {
        return Err(Error::invalid("point dimension does not match the grid function"));
    }
    let centre = u.at(x)?;
    let mut p = x.to_vec();
    let mut acc = 0.0;
    for a in 0..n {
        p[a] = x[a] + 1;
        acc += u.at(&p)?;
        p[a] = x[a] - 1;
        acc += u.at(&p)?;
        p[a] = x[a];
    }
    Ok(acc - 2.0 * n as f64 * centre)
}

/// True iff `|residual| <= tol * max(1, sup|u|)` at every point of `region`.
pub fn is_harmonic(u: &GridFunction, region: &GridBox, tol: f64) -> Result<bool> {
    if !u.bx.contains_box(&region.expand(1)) {
        return Err(Error::invalid("region and its 1-neighbourhood must lie in the function's box"));
    }
    let scale = u.sup().max(1.0);
    for p in region.points() {
        if laplacian_residual(u, &p)?.abs() > tol * scale {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Largest stencil residual magnitude over `region`.
pub fn max_residual(u: &GridFunction, region: &GridBox) -> Result<f64> {
    let mut m = 0.0f64;
    for p in region.points() {
        m = m.max(laplacian_residual(u, &p)?.abs());
    }
    Ok(m)
}

/// `max |u|` over the lattice points of `region`.
pub fn sup_norm(u: &GridFunction, region: &GridBox) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::invalid("sup over an empty region"));
    }
    if !u.bx.contains_box(region) {
        return Err(Error::invalid("sup region exceeds the function's box"));
    }
    Ok(region.points().fold(0.0f64, |m, p| m.max(u.get(&p).unwrap().abs())))
}

/// Values on the face-interior boundary points of a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    bx: GridBox,
    values: BTreeMap<Vec<i64>, f64>,
}

impl BoundaryData {
    pub fn new(bx: GridBox) -> Self {
        Self {
            bx,
            values: BTreeMap::new(),
        }
    }

    /// Fill every face-interior point from `f`.
    pub fn from_fn(bx: GridBox, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let mut g = Self::new(bx);
        for GridPoint(p) in g.bx.boundary(BoundaryMode::FaceInterior) {
            let v = f(&p);
            g.values.insert(p, v);
        }
        g
    }

    pub fn insert(&mut self, p: Vec<i64>, v: f64) -> Result<()> {
        if !self.bx.is_face_interior(&p) {
            return Err(Error::invalid(format!("{p:?} is not a face-interior boundary point")));
        }
        self.values.insert(p, v);
        Ok(())
    }

    pub fn grid_box(&self) -> &GridBox {
        &self.bx
    }

    pub fn get(&self, p: &[i64]) -> Option<f64> {
        self.values.get(p).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.values.iter().map(|(k, v)| (k, *v))
    }

    pub fn sup(&self) -> f64 {
        self.values.values().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Error unless every face-interior point carries a value.
    pub fn check_complete(&self) -> Result<()> {
        for GridPoint(p) in self.bx.boundary(BoundaryMode::FaceInterior) {
            if !self.values.contains_key(&p) {
                return Err(Error::invalid(format!("boundary data missing at {p:?}")));
            }
        }
        Ok(())
    }

    pub fn scaled_add(&self, a: f64, other: &BoundaryData, b: f64) -> Result<BoundaryData> {
        if self.bx != other.bx {
            return Err(Error::invalid("boundary data live on different boxes"));
        }
        let mut out = BoundaryData::new(self.bx.clone());
        for (k, v) in &self.values {
            let w = other.values.get(k).copied().unwrap_or(0.0);
            out.values.insert(k.clone(), a * v + b * w);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize, big_n: u32) -> (LatticeSpec, GridBox) {
        let s = LatticeSpec::new(n, big_n).unwrap();
        let b = s.unit_cube();
        (s, b)
    }

    #[test]
    fn spec_rejects_bad_parameters() {
        assert!(LatticeSpec::new(1, 4).is_err());
        assert!(LatticeSpec::new(2, 0).is_err());
    }

    #[test]
    fn residual_of_simple_functions() {
        let (s, b) = unit(2, 4);
        let h = s.h();
        let x = [1, -2];
        let c = GridFunction::from_fn(b.clone(), |_| 7.0);
        assert_eq!(laplacian_residual(&c, &x).unwrap(), 0.0);
        let lin = GridFunction::from_fn(b.clone(), |p| p[0] as f64 * h);
        assert!(laplacian_residual(&lin, &x).unwrap().abs() < 1e-15);
        let sq = GridFunction::from_fn(b.clone(), |p| (p[0] as f64 * h).powi(2));
        assert!((laplacian_residual(&sq, &x).unwrap() - 2.0 * h * h).abs() < 1e-15);
        let harm = GridFunction::from_fn(b, |p| {
            let (a, c) = (p[0] as f64 * h, p[1] as f64 * h);
            a * a - c * c
        });
        assert!(laplacian_residual(&harm, &x).unwrap().abs() < 1e-15);
    }

    #[test]
    fn residual_out_of_box_is_error() {
        let (_, b) = unit(2, 2);
        let u = GridFunction::zeros(b);
        assert!(matches!(laplacian_residual(&u, &[2, 0]), Err(Error::OutOfBox { .. })));
    }

    #[test]
    fn harmonic_checks() {
        let (s, b) = unit(2, 4);
        let inner = b.interior().unwrap();
        let one = GridFunction::from_fn(b.clone(), |_| 1.0);
        assert!(is_harmonic(&one, &inner, 0.0).unwrap());
        let h = s.h();
        let sq = GridFunction::from_fn(b.clone(), |p| (p[0] as f64 * h).powi(2));
        assert!(!is_harmonic(&sq, &inner, h * h).unwrap());
        assert!(is_harmonic(&one, &b, 0.0).is_err());
    }

    #[test]
    fn sup_norm_cases() {
        let (s, b) = unit(2, 4);
        let u = GridFunction::from_fn(b.clone(), |_| -3.0);
        assert_eq!(sup_norm(&u, &b).unwrap(), 3.0);
        let h = s.h();
        let x1 = GridFunction::from_fn(b.clone(), |p| p[0] as f64 * h);
        assert_eq!(sup_norm(&x1, &b).unwrap(), 1.0);
        assert!(sup_norm(&x1, &b.expand(1)).is_err());
    }

    #[test]
    fn boundary_counts() {
        let b = GridBox::cube(2, 1);
        assert_eq!(b.boundary(BoundaryMode::All).len(), 8);
        assert_eq!(b.boundary(BoundaryMode::FaceInterior).len(), 4);
        let b = GridBox::cube(2, 2);
        assert_eq!(b.boundary(BoundaryMode::All).len(), 16);
        assert_eq!(b.boundary(BoundaryMode::FaceInterior).len(), 12);
        for (n, big_n) in [(3usize, 2i64), (3, 3), (4, 1), (2, 5)] {
            let b = GridBox::cube(n, big_n);
            let side = 2 * big_n + 1;
            let all = side.pow(n as u32) - (side - 2).pow(n as u32);
            let face = 2 * n as i64 * (side - 2).pow(n as u32 - 1);
            assert_eq!(b.boundary(BoundaryMode::All).len() as i64, all);
            assert_eq!(b.boundary(BoundaryMode::FaceInterior).len() as i64, face);
        }
    }

    #[test]
    fn boundary_partition() {
        let b = GridBox::new(vec![-2, 0, 1], vec![1, 3, 3]).unwrap();
        let all = b.boundary(BoundaryMode::All);
        let face = b.boundary(BoundaryMode::FaceInterior);
        let multi: Vec<_> = all.iter().filter(|p| b.extremal_count(&p.0) >= 2).collect();
        assert_eq!(face.len() + multi.len(), all.len());
        assert!(face.iter().all(|p| all.contains(p)));
    }

    #[test]
    fn cube_extent_rounding() {
        let s = LatticeSpec::new(2, 512).unwrap();
        assert_eq!(s.cube(1.0 / 512.0).unwrap().hi()[0], 1);
        assert_eq!(s.cube(1.0 / 256.0).unwrap().hi()[0], 2);
        assert_eq!(s.cube(3.0 / 1024.0).unwrap().hi()[0], 1);
        assert_eq!(s.cube(0.3).unwrap().hi()[0], 153);
    }

    #[test]
    fn boundary_data_rejects_corners() {
        let b = GridBox::cube(2, 2);
        let mut g = BoundaryData::new(b);
        assert!(g.insert(vec![2, 2], 1.0).is_err());
        assert!(g.insert(vec![2, 0], 1.0).is_ok());
        assert!(g.insert(vec![0, 0], 1.0).is_err());
        assert!(g.check_complete().is_err());
    }

    proptest! {
        #[test]
        fn residual_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, c in -3.0f64..3.0) {
            let b = GridBox::cube(2, 3);
            let f = |s: u64| move |p: &[i64]| ((p[0] * 7 + p[1] * 13 + s as i64) % 11) as f64 / 5.0 - 1.0;
            let u = GridFunction::from_fn(b.clone(), f(seed));
            let v = GridFunction::from_fn(b.clone(), f(seed + 3));
            let w = GridFunction::from_fn(b.clone(), |p| a * u.get(p).unwrap() + c * v.get(p).unwrap());
            for p in b.interior().unwrap().points() {
                let lhs = laplacian_residual(&w, &p).unwrap();
                let rhs = a * laplacian_residual(&u, &p).unwrap() + c * laplacian_residual(&v, &p).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * 10.0);
            }
        }

        #[test]
        fn offset_roundtrip(lo0 in -5i64..5, lo1 in -5i64..5, e0 in 1i64..6, e1 in 1i64..6, k in 0usize..1000) {
            let b = GridBox::new(vec![lo0, lo1], vec![lo0 + e0 - 1, lo1 + e1 - 1]).unwrap();
            let o = k % b.len();
            prop_assert_eq!(b.offset(&b.point_at(o)), Some(o));
        }

        #[test]
        fn sup_matches_scan(vals in proptest::collection::vec(-10.0f64..10.0, 25)) {
            let b = GridBox::cube(2, 2);
            let u = GridFunction::from_values(b.clone(), vals.clone()).unwrap();
            let scan = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
            prop_assert_eq!(sup_norm(&u, &b).unwrap(), scan);
        }
    }
}
