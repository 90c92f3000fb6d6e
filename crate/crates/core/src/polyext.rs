//! Exact extension of a discrete harmonic function on the cube
//! `K_N = {x ∈ Z^n : |x_j| <= N}` to a discrete harmonic polynomial on `Z^n`.
//!
//! Pipeline: pad the cube to `K_{3N,N}` by exact layer-wise extension, read
//! the two bottom layers, interpolate them by polynomials `G_0`, `G_1` in
//! `n - 1` variables, then write `P(x, t) = Σ_j q_j(t) Q_j(x)` where the
//! one-variable `q_j` satisfy `Δ_d q_j = t^{j-2}` and the `Q_j` solve the
//! triangular system `Q_{j+2} + Σ_{k>=j} c_{k,j} Δ_d Q_k = 0`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{GridBox, GridFunction};

pub type Rational = BigRational;

/// Default cap on the summed bit-length of all numerators and denominators.
pub const DEFAULT_BIT_CAP: u64 = 1_000_000;

fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

fn bits(c: &Rational) -> u64 {
    c.numer().bits() + c.denom().bits()
}

/// Parse `"p/q"` or `"p"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s, "1"),
    };
    let p: BigInt = p.parse().map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
    let q: BigInt = q.parse().map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
    if q.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(p, q))
}

/// Canonical `"p/q"` form (denominator always written).
pub fn format_rational(c: &Rational) -> String {
    format!("{}/{}", c.numer(), c.denom())
}

/// Polynomial in one variable, `coeffs[k]` multiplying `t^k`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct UnivarPoly {
    coeffs: Vec<Rational>,
}

impl UnivarPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::new(vec![Rational::one()])
    }

    pub fn t() -> Self {
        Self::new(vec![Rational::zero(), Rational::one()])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * t + c)
    }

    /// `q(t+1) + q(t-1) - 2 q(t)`.
    pub fn second_difference(&self) -> Self {
        let mut out = vec![Rational::zero(); self.coeffs.len()];
        for (k, c) in self.coeffs.iter().enumerate() {
            for i in (2..=k).step_by(2) {
                out[k - i] += c * Rational::from_integer(binomial(k as u32, i as u32) * 2);
            }
        }
        Self::new(out)
    }
}

/// The one-variable basis `q_0 = 1`, `q_1 = t` and, for `j >= 2`, the degree
/// `j` polynomial with `Δ_d q_j = t^{j-2}` and `q_j(0) = q_j(1) = 0`.
pub fn build_q(j_max: usize) -> Vec<UnivarPoly> {
    let mut out = vec![UnivarPoly::one()];
    if j_max >= 1 {
        out.push(UnivarPoly::t());
    }
    for j in 2..=j_max {
        let mut c = vec![Rational::zero(); j + 1];
        // coefficient of t^p in Δ_d q is Σ_{k = p+2, p+4, ...} 2 C(k, k-p) c_k;
        // solve for c_{p+2} from the top down
        for p in (0..=j - 2).rev() {
            let mut rhs = if p == j - 2 { Rational::one() } else { Rational::zero() };
            for k in (p + 4..=j).step_by(2) {
                rhs -= &c[k] * Rational::from_integer(binomial(k as u32, (k - p) as u32) * 2);
            }
            let lead = Rational::from_integer(binomial(p as u32 + 2, 2) * 2);
            c[p + 2] = rhs / lead;
        }
        let s: Rational = c[2..].iter().sum();
        c[1] = -s;
        out.push(UnivarPoly::new(c));
    }
    out
}

/// Sparse polynomial in `nvars` variables with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MultiPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl MultiPoly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate `x_i` (zero-based).
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::monomial(e, Rational::one())
    }

    pub fn monomial(exps: Vec<u32>, c: Rational) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, Rational)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::invalid(format!("exponent {e:?} has {} entries, expected {nvars}", e.len())));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Rational> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exps: &[u32]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_else(Rational::zero)
    }

    fn add_term(&mut self, exps: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn degree_in(&self, var: usize) -> Option<u32> {
        self.terms.keys().map(|e| e[var]).max()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    fn check_arity(&self, x: usize) -> Result<()> {
        if x != self.nvars && !self.terms.is_empty() {
            return Err(Error::invalid(format!("polynomial in {} variables evaluated at {x} coordinates", self.nvars)));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[Rational]) -> Result<Rational> {
        self.check_arity(x.len())?;
        let mut pows: Vec<Vec<Rational>> = Vec::with_capacity(x.len());
        for (i, xi) in x.iter().enumerate() {
            let top = self.degree_in_or_zero(i);
            let mut v = vec![Rational::one()];
            for _ in 0..top {
                let next = v.last().unwrap() * xi;
                v.push(next);
            }
            pows.push(v);
        }
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                t *= &pows[i][k as usize];
            }
            acc += t;
        }
        Ok(acc)
    }

    fn degree_in_or_zero(&self, var: usize) -> u32 {
        if self.terms.is_empty() {
            0
        } else {
            self.degree_in(var).unwrap_or(0)
        }
    }

    pub fn eval_int(&self, x: &[i64]) -> Result<Rational> {
        IntEvaluator::new(self).eval(x)
    }

    /// `Σ_j [P(x + e_j) + P(x - e_j)] - 2 nvars P(x)`, expanded symbolically:
    /// `x_j^a` contributes `Σ_{i even >= 2} 2 C(a, i) x_j^{a-i}`.
    pub fn discrete_laplacian(&self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            for j in 0..self.nvars {
                let a = e[j];
                for i in (2..=a).step_by(2) {
                    let mut f = e.clone();
                    f[j] -= i;
                    out.add_term(f, c * Rational::from_integer(binomial(a, i) * 2));
                }
            }
        }
        out
    }

    /// Substitute `x_var -> x_var + s`.
    pub fn shift(&self, var: usize, s: i64) -> Self {
        if s == 0 {
            return self.clone();
        }
        let s = BigInt::from(s);
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            let a = e[var];
            for i in 0..=a {
                let mut f = e.clone();
                f[var] = i;
                let w = binomial(a, i) * s.pow(a - i);
                out.add_term(f, c * Rational::from_integer(w));
            }
        }
        out
    }

    /// `self(x) * q(x_var)` for a one-variable `q`.
    pub fn mul_univar(&self, q: &UnivarPoly, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            for (k, qk) in q.coeffs().iter().enumerate() {
                if qk.is_zero() {
                    continue;
                }
                let mut f = e.clone();
                f[var] += k as u32;
                out.add_term(f, c * qk);
            }
        }
        out
    }

    /// Same polynomial with one extra trailing variable.
    pub fn embed(&self) -> Self {
        Self {
            nvars: self.nvars + 1,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut f = e.clone();
                    f.push(0);
                    (f, c.clone())
                })
                .collect(),
        }
    }

    pub fn max_coefficient_bits(&self) -> u64 {
        self.terms.values().map(bits).max().unwrap_or(0)
    }

    pub fn total_coefficient_bits(&self) -> u64 {
        self.terms.values().map(bits).sum()
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (j, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "*x{}", j + 1)?,
                    k => write!(f, "*x{}^{k}", j + 1)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &MultiPoly {
    type Output = MultiPoly;
    fn add(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        out.nvars = out.nvars.max(rhs.nvars);
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Neg for &MultiPoly {
    type Output = MultiPoly;
    fn neg(self) -> MultiPoly {
        MultiPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Sub for &MultiPoly {
    type Output = MultiPoly;
    fn sub(self, rhs: &MultiPoly) -> MultiPoly {
        self + &(-rhs)
    }
}

impl Mul for &MultiPoly {
    type Output = MultiPoly;
    fn mul(self, rhs: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly::zero(self.nvars.max(rhs.nvars));
        for (a, c) in &self.terms {
            for (b, d) in &rhs.terms {
                let e = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.add_term(e, c * d);
            }
        }
        out
    }
}

impl Serialize for MultiPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.terms.len()))?;
        for (e, c) in &self.terms {
            let key = e.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
            m.serialize_entry(&key, &format_rational(c))?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for MultiPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = MultiPoly;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from \"e1,e2,...\" to \"numerator/denominator\"")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<MultiPoly, A::Error> {
                let mut raw: Vec<(Vec<u32>, Rational)> = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, String>()? {
                    let e = parse_exponent(&k).map_err(de::Error::custom)?;
                    let c = parse_rational(&v).map_err(de::Error::custom)?;
                    raw.push((e, c));
                }
                polynomial_from_entries(raw, None).map_err(de::Error::custom)
            }
        }
        d.deserialize_map(V)
    }
}

fn parse_exponent(k: &str) -> Result<Vec<u32>> {
    k.split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|_| Error::Parse(format!("bad exponent tuple {k:?}"))))
        .collect()
}

/// Build a polynomial from parsed `(exponent, coefficient)` entries, rejecting
/// mixed arities and duplicate exponents. With no entries the arity is
/// `nvars` if given, else 0.
pub fn polynomial_from_entries(entries: Vec<(Vec<u32>, Rational)>, nvars: Option<usize>) -> Result<MultiPoly> {
    let arity = match (entries.first(), nvars) {
        (Some((e, _)), Some(n)) if e.len() != n => {
            return Err(Error::Parse(format!("exponent {e:?} has {} entries, expected {n}", e.len())))
        }
        (Some((e, _)), _) => e.len(),
        (None, n) => n.unwrap_or(0),
    };
    let mut seen = std::collections::BTreeSet::new();
    for (e, _) in &entries {
        if e.len() != arity {
            return Err(Error::Parse(format!("exponent tuples of lengths {} and {} mixed", arity, e.len())));
        }
        if !seen.insert(e.clone()) {
            return Err(Error::Parse(format!("duplicate exponent {e:?}")));
        }
    }
    MultiPoly::from_terms(arity, entries)
}

/// Evaluates a polynomial at integer points with integer arithmetic only,
/// dividing by the common denominator once per point.
pub struct IntEvaluator {
    nvars: usize,
    denom: BigInt,
    terms: Vec<(Vec<u32>, BigInt)>,
    degrees: Vec<u32>,
}

impl IntEvaluator {
    pub fn new(p: &MultiPoly) -> Self {
        let denom = p.terms.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let terms = p
            .terms
            .iter()
            .map(|(e, c)| (e.clone(), c.numer() * (&denom / c.denom())))
            .collect();
        let degrees = (0..p.nvars).map(|i| p.degree_in_or_zero(i)).collect();
        Self { nvars: p.nvars, denom, terms, degrees }
    }

    pub fn eval(&self, x: &[i64]) -> Result<Rational> {
        if x.len() != self.nvars && !self.terms.is_empty() {
            return Err(Error::invalid(format!("polynomial in {} variables evaluated at {} coordinates", self.nvars, x.len())));
        }
        let pows: Vec<Vec<BigInt>> = self
            .degrees
            .iter()
            .zip(x)
            .map(|(&d, &xi)| {
                let b = BigInt::from(xi);
                let mut v = vec![BigInt::one()];
                for _ in 0..d {
                    let next = v.last().unwrap() * &b;
                    v.push(next);
                }
                v
            })
            .collect();
        let mut acc = BigInt::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t *= &pows[i][k as usize];
                }
            }
            acc += t;
        }
        Ok(Rational::new(acc, self.denom.clone()))
    }
}

/// Exact values on every point of a box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalGrid {
    bx: GridBox,
    values: Vec<Rational>,
}

impl RationalGrid {
    pub fn new(bx: GridBox, values: Vec<Rational>) -> Result<Self> {
        if values.len() != bx.len() {
            return Err(Error::data(format!("box has {} points but {} values were given", bx.len(), values.len())));
        }
        Ok(Self { bx, values })
    }

    pub fn zeros(bx: GridBox) -> Self {
        let values = vec![Rational::zero(); bx.len()];
        Self { bx, values }
    }

    pub fn from_fn(bx: GridBox, mut f: impl FnMut(&[i64]) -> Rational) -> Self {
        let values = bx.points().map(|p| f(&p)).collect();
        Self { bx, values }
    }

    pub fn grid_box(&self) -> &GridBox {
        &self.bx
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn get(&self, p: &[i64]) -> Option<&Rational> {
        self.bx.offset(p).map(|o| &self.values[o])
    }

    pub fn at(&self, p: &[i64]) -> Result<&Rational> {
        self.get(p).ok_or_else(|| Error::OutOfBox {
            point: p.to_vec(),
            lo: self.bx.lo().to_vec(),
            hi: self.bx.hi().to_vec(),
        })
    }

    /// Exact stencil residual at an interior point.
    pub fn residual(&self, p: &[i64]) -> Result<Rational> {
        if !self.bx.is_interior_point(p) {
            return Err(Error::invalid(format!("{p:?} is not an interior point")));
        }
        let n = p.len();
        let mut acc = -self.at(p)? * int(2 * n as i64);
        let mut q = p.to_vec();
        for j in 0..n {
            q[j] += 1;
            acc += self.at(&q)?;
            q[j] -= 2;
            acc += self.at(&q)?;
            q[j] += 1;
        }
        Ok(acc)
    }

    /// Error naming the first interior point with nonzero residual.
    pub fn check_harmonic(&self) -> Result<()> {
        if let Some(inner) = self.bx.interior() {
            for p in inner.points() {
                let r = self.residual(&p)?;
                if !r.is_zero() {
                    return Err(Error::data(format!("not discrete harmonic at {p:?}: residual {}", format_rational(&r))));
                }
            }
        }
        Ok(())
    }

    pub fn to_grid_function(&self) -> GridFunction {
        let values = self.values.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect();
        GridFunction::from_values(self.bx.clone(), values).expect("sizes agree")
    }

    pub fn restrict(&self, region: &GridBox) -> Result<RationalGrid> {
        if !self.bx.contains_box(region) {
            return Err(Error::invalid("restriction region leaves the grid"));
        }
        let values = region.points().map(|p| self.at(&p).cloned()).collect::<Result<_>>()?;
        RationalGrid::new(region.clone(), values)
    }

    pub fn total_bits(&self) -> u64 {
        self.values.iter().map(bits).sum()
    }

    /// Append `layers` layers along `axis` by solving the stencil at the
    /// previous layer; points of a new layer that lie on the box wall in
    /// another axis take `side(grid so far, p)`.
    pub fn extend_layers(
        &self,
        axis: usize,
        positive: bool,
        layers: usize,
        mut side: impl FnMut(&RationalGrid, &[i64]) -> Rational,
    ) -> Result<RationalGrid> {
        let n = self.bx.dim();
        if axis >= n {
            return Err(Error::invalid(format!("axis {axis} out of range")));
        }
        if self.bx.extent(axis) < 2 {
            return Err(Error::invalid("layer-wise extension needs two seed layers"));
        }
        let (mut lo, mut hi) = (self.bx.lo().to_vec(), self.bx.hi().to_vec());
        let step: i64 = if positive { 1 } else { -1 };
        if positive {
            hi[axis] += layers as i64;
        } else {
            lo[axis] -= layers as i64;
        }
        let big = GridBox::new(lo, hi)?;
        let mut out = RationalGrid::zeros(big.clone());
        for (p, v) in self.bx.points().zip(&self.values) {
            let o = big.offset(&p).expect("seed inside extension");
            out.values[o] = v.clone();
        }
        let edge = if positive { self.bx.hi()[axis] } else { self.bx.lo()[axis] };
        let two_n = int(2 * n as i64);
        for t in 1..=layers as i64 {
            let c = edge + step * t;
            let (mut llo, mut lhi) = (big.lo().to_vec(), big.hi().to_vec());
            llo[axis] = c;
            lhi[axis] = c;
            let layer = GridBox::new(llo, lhi)?;
            for p in layer.points() {
                let wall = (0..n).any(|j| j != axis && (p[j] == big.lo()[j] || p[j] == big.hi()[j]));
                let v = if wall {
                    side(&out, &p)
                } else {
                    let mut q = p.clone();
                    q[axis] -= step;
                    let mut v = out.at(&q)? * &two_n;
                    let mut qq = q.clone();
                    qq[axis] -= step;
                    v -= out.at(&qq)?;
                    for j in (0..n).filter(|&j| j != axis) {
                        q[j] += 1;
                        v -= out.at(&q)?;
                        q[j] -= 2;
                        v -= out.at(&q)?;
                        q[j] += 1;
                    }
                    v
                };
                let o = big.offset(&p).expect("layer inside box");
                out.values[o] = v;
            }
        }
        Ok(out)
    }
}

/// Exponent vectors in `nvars` variables of total degree `<= d`, lexicographic.
pub fn monomials_up_to(nvars: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: usize, budget: u32, out: &mut Vec<Vec<u32>>) {
        if left == 0 {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=budget {
            prefix.push(k);
            rec(prefix, left - 1, budget - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(nvars), nvars, d, &mut out);
    out
}

/// `C(x - a, k)` as a polynomial in `x`.
fn shifted_binomial_poly(a: i64, k: usize) -> UnivarPoly {
    let mut p = vec![Rational::one()];
    for i in 0..k {
        // multiply by (x - a - i)
        let root = int(a + i as i64);
        let mut next = vec![Rational::zero(); p.len() + 1];
        for (d, c) in p.iter().enumerate() {
            next[d + 1] += c;
            next[d] -= c * &root;
        }
        p = next;
    }
    let fact: BigInt = (1..=k as u64).map(BigInt::from).product();
    let f = Rational::from_integer(fact);
    UnivarPoly::new(p.into_iter().map(|c| c / &f).collect())
}

/// Tensor-product Newton interpolant of grid values: agrees with the grid at
/// every point, with degree in `x_j` at most `extent_j - 1`.
pub fn grid_interpolate(grid: &RationalGrid) -> Result<MultiPoly> {
    let bx = grid.grid_box();
    let d = bx.dim();
    let shape = bx.shape();
    let mut diff = grid.values().to_vec();
    // forward differences along each axis, in place: diff[k] = Δ^k f(lo)
    let mut stride = 1usize;
    let strides: Vec<usize> = (0..d)
        .rev()
        .map(|a| {
            let s = stride;
            stride *= shape[a];
            s
        })
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    for a in 0..d {
        let len = shape[a];
        let st = strides[a];
        for base in 0..diff.len() {
            if (base / st) % len != 0 {
                continue;
            }
            for k in 1..len {
                for i in (k..len).rev() {
                    let prev = diff[base + (i - 1) * st].clone();
                    diff[base + i * st] -= prev;
                }
            }
        }
    }
    let basis: Vec<Vec<UnivarPoly>> = (0..d)
        .map(|a| (0..shape[a]).map(|k| shifted_binomial_poly(bx.lo()[a], k)).collect())
        .collect();
    let mut out = MultiPoly::zero(d);
    for (off, c) in diff.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let idx: Vec<usize> = (0..d).map(|a| (off / strides[a]) % shape[a]).collect();
        let mut term = MultiPoly::constant(d, c.clone());
        for a in 0..d {
            term = term.mul_univar(&basis[a][idx[a]], a);
        }
        out = &out + &term;
    }
    Ok(out)
}

fn check_layers(g0: &MultiPoly, g1: &MultiPoly, m: u32) -> Result<()> {
    if g0.nvars() != g1.nvars() && !(g0.is_zero() || g1.is_zero()) {
        return Err(Error::invalid("G0 and G1 have different numbers of variables"));
    }
    for (name, g) in [("G0", g0), ("G1", g1)] {
        if g.degree().unwrap_or(0) > m {
            return Err(Error::invalid(format!("deg {name} = {} exceeds M = {m}", g.degree().unwrap_or(0))));
        }
    }
    Ok(())
}

/// Residuals `Q_{j+2} + Σ_{k=j}^{M+1} c_{k,j} Δ_d Q_k` for `j = 0..M`.
pub fn qj_residuals(qpolys: &[MultiPoly], qs: &[UnivarPoly]) -> Vec<MultiPoly> {
    let top = qpolys.len() - 1;
    let lap: Vec<MultiPoly> = qpolys.iter().map(MultiPoly::discrete_laplacian).collect();
    let nvars = qpolys[0].nvars();
    (0..top.saturating_sub(1))
        .map(|j| {
            let mut r = qpolys[j + 2].clone();
            for k in j..=top {
                r = &r + &lap[k].scale(&qs[k].coeff(j));
            }
            r.nvars = r.nvars.max(nvars);
            r
        })
        .collect()
}

/// `Q_0, ..., Q_{M+1}` with `Q_0 = G_0`, `Q_1 = G_1 - G_0` and
/// `deg Q_j <= M - j + 1`.
///
/// `Δ_d` lowers degree by two, so the recursion
/// `Q_{j+2} <- -Σ_{k>=j} c_{k,j} Δ_d Q_k` reaches its fixed point after at
/// most `M/2 + 2` sweeps; the fixed point is the unique solution.
pub fn solve_qj_system(g0: &MultiPoly, g1: &MultiPoly, m: u32) -> Result<Vec<MultiPoly>> {
    check_layers(g0, g1, m)?;
    let nvars = g0.nvars().max(g1.nvars());
    let m = m as usize;
    let qs = build_q(m + 1);
    let mut q: Vec<MultiPoly> = vec![MultiPoly::zero(nvars); m + 2];
    q[0] = g0.clone();
    q[0].nvars = nvars;
    q[1] = g1 - g0;
    q[1].nvars = nvars;
    for _ in 0..m / 2 + 3 {
        let lap: Vec<MultiPoly> = q.iter().map(MultiPoly::discrete_laplacian).collect();
        let mut changed = false;
        for j in 0..m {
            let mut next = MultiPoly::zero(nvars);
            for k in j..=m + 1 {
                let c = qs[k].coeff(j);
                if !c.is_zero() && !lap[k].is_zero() {
                    next = &next - &lap[k].scale(&c);
                }
            }
            if next != q[j + 2] {
                q[j + 2] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if qj_residuals(&q, &qs).iter().any(|r| !r.is_zero()) {
        return Err(Error::Internal("Q_j recursion did not reach its fixed point".into()));
    }
    Ok(q)
}

/// Same system solved as one dense linear system over the monomial
/// coefficients of `Q_2..Q_{M+1}`, by fraction-free (Bareiss) elimination.
/// Size grows like `M^{n-1}`; meant as a cross-check for small `M`.
pub fn solve_qj_system_dense(g0: &MultiPoly, g1: &MultiPoly, m: u32) -> Result<Vec<MultiPoly>> {
    check_layers(g0, g1, m)?;
    let nvars = g0.nvars().max(g1.nvars());
    let mu = m as usize;
    let qs = build_q(mu + 1);
    let q0 = {
        let mut p = g0.clone();
        p.nvars = nvars;
        p
    };
    let q1 = {
        let mut p = g1 - g0;
        p.nvars = nvars;
        p
    };
    // unknown columns: (k, exponent) with deg <= M - k + 1
    let mut cols: Vec<(usize, Vec<u32>)> = Vec::new();
    for k in 2..=mu + 1 {
        for e in monomials_up_to(nvars, (mu + 1 - k) as u32) {
            cols.push((k, e));
        }
    }
    // equation rows: (j, exponent) with deg <= M - j - 1
    let mut rows: BTreeMap<(usize, Vec<u32>), usize> = BTreeMap::new();
    for j in 0..mu {
        for e in monomials_up_to(nvars, (mu - 1 - j) as u32) {
            let r = rows.len();
            rows.insert((j, e), r);
        }
    }
    let size = cols.len();
    if rows.len() != size {
        return Err(Error::Internal(format!("{} equations for {size} unknowns", rows.len())));
    }
    let mut a = vec![vec![Rational::zero(); size + 1]; size];
    for (col, (k, e)) in cols.iter().enumerate() {
        if *k >= 2 {
            a[rows[&(k - 2, e.clone())]][col] += Rational::one();
        }
        let lap = MultiPoly::monomial(e.clone(), Rational::one()).discrete_laplacian();
        for j in 0..mu.min(k + 1) {
            let c = qs[*k].coeff(j);
            if c.is_zero() {
                continue;
            }
            for (f, v) in lap.terms() {
                let r = rows.get(&(j, f.clone())).ok_or_else(|| Error::Internal("row outside degree cap".into()))?;
                a[*r][col] += v * &c;
            }
        }
    }
    for (k, qk) in [(0usize, &q0), (1, &q1)] {
        let lap = qk.discrete_laplacian();
        for j in 0..mu.min(k + 1) {
            let c = qs[k].coeff(j);
            for (f, v) in lap.terms() {
                let r = rows.get(&(j, f.clone())).ok_or_else(|| Error::Internal("row outside degree cap".into()))?;
                a[*r][size] -= v * &c;
            }
        }
    }
    let x = bareiss_solve(a)?;
    let mut out = vec![q0, q1];
    out.extend((2..=mu + 1).map(|_| MultiPoly::zero(nvars)));
    for ((k, e), v) in cols.into_iter().zip(x) {
        out[k].add_term(e, v);
    }
    Ok(out)
}

/// Solve a square system given as augmented rows, fraction-free.
fn bareiss_solve(a: Vec<Vec<Rational>>) -> Result<Vec<Rational>> {
    let n = a.len();
    let mut m: Vec<Vec<BigInt>> = a
        .into_iter()
        .map(|row| {
            let l = row.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
            row.into_iter().map(|c| c.numer() * (&l / c.denom())).collect()
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let p = (k..n)
            .find(|&i| !m[i][k].is_zero())
            .ok_or_else(|| Error::Internal("Q_j system is singular".into()))?;
        m.swap(k, p);
        for i in k + 1..n {
            for j in k + 1..=n {
                let v = (&m[k][k] * &m[i][j] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }
    let mut x = vec![Rational::zero(); n];
    for i in (0..n).rev() {
        let mut s = Rational::from_integer(m[i][n].clone());
        for j in i + 1..n {
            s -= &x[j] * Rational::from_integer(m[i][j].clone());
        }
        x[i] = s / Rational::from_integer(m[i][i].clone());
    }
    Ok(x)
}

/// `P(x, t) = Σ_j q_j(t) Q_j(x)`, with `t` appended as the last variable.
pub fn assemble(qpolys: &[MultiPoly], qs: &[UnivarPoly]) -> Result<MultiPoly> {
    if qpolys.len() > qs.len() {
        return Err(Error::invalid(format!("{} polynomials Q_j but only {} basis polynomials q_j", qpolys.len(), qs.len())));
    }
    let nvars = qpolys.iter().map(MultiPoly::nvars).max().unwrap_or(0);
    let mut p = MultiPoly::zero(nvars + 1);
    for (qj, basis) in qpolys.iter().zip(qs) {
        let mut e = qj.clone();
        e.nvars = nvars;
        p = &p + &e.embed().mul_univar(basis, nvars);
    }
    Ok(p)
}

/// A discrete harmonic polynomial with `P(x, 0) = G_0(x)`, `P(x, 1) = G_1(x)`
/// and degree at most `M + 1`, `M = max(deg G_0, deg G_1)`.
pub fn harmonic_from_layers(g0: &MultiPoly, g1: &MultiPoly) -> Result<MultiPoly> {
    let m = g0.degree().unwrap_or(0).max(g1.degree().unwrap_or(0));
    let q = solve_qj_system(g0, g1, m)?;
    assemble(&q, &build_q(m as usize + 1))
}

/// Wall data used while padding `K_N` to `K_{3N,N}`. Any choice gives a
/// valid extension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Continue each wall line by the polynomial of degree `2N` through its
    /// last `2N + 1` values. Harmonic polynomials of degree `<= 2N` in each
    /// variable are then padded by themselves and extended to themselves.
    Extrapolate,
    Constant(Rational),
}

/// `v_0` from `v_1..v_k`, equally spaced, via `Σ_{i=0}^{k} (-1)^i C(k, i) v_i = 0`.
fn extrapolate(grid: &RationalGrid, p: &[i64], axis: usize, step: i64, k: usize) -> Rational {
    let mut q = p.to_vec();
    let mut acc = Rational::zero();
    for i in 1..=k {
        q[axis] -= step;
        let w = Rational::from_integer(binomial(k as u32, i as u32));
        let v = grid.at(&q).expect("extrapolation stencil inside grid") * w;
        if i % 2 == 1 {
            acc += v;
        } else {
            acc -= v;
        }
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendOptions {
    pub padding: Padding,
    /// Cap on the summed coefficient bit-length.
    pub bit_cap: u64,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        Self { padding: Padding::Extrapolate, bit_cap: DEFAULT_BIT_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonicity {
    /// `Δ_d P` expanded symbolically is the zero polynomial.
    pub symbolic: bool,
    /// Points where the stencil residual was also evaluated exactly.
    pub sampled_points: usize,
    pub max_abs_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionResult {
    pub polynomial: MultiPoly,
    pub degree: u32,
    /// `6N(n-1) + 1`.
    pub degree_bound: u32,
    /// `P = f` at every point of the cube, as exact rationals.
    pub match_verified: bool,
    pub harmonicity: Harmonicity,
    pub max_coefficient_bits: u64,
    pub total_coefficient_bits: u64,
}

impl ExtensionResult {
    pub fn verified(&self) -> bool {
        self.match_verified && self.harmonicity.symbolic && self.degree <= self.degree_bound
    }
}

fn cube_half(bx: &GridBox) -> Result<i64> {
    let half = bx.hi()[0];
    let ok = half >= 1 && (0..bx.dim()).all(|j| bx.lo()[j] == -half && bx.hi()[j] == half);
    if !ok || bx.dim() < 2 {
        return Err(Error::invalid("input must be the cube [-N, N]^n with N >= 1 and n >= 2"));
    }
    Ok(half)
}

fn bit_check(what: &str, used: u64, cap: u64) -> Result<()> {
    if used > cap {
        return Err(Error::Resource(format!("{what} needs {used} coefficient bits, cap is {cap}")));
    }
    Ok(())
}

pub fn extend_from_cube(f: &RationalGrid) -> Result<ExtensionResult> {
    extend_from_cube_with(f, &ExtendOptions::default())
}

pub fn extend_from_cube_with(f: &RationalGrid, opts: &ExtendOptions) -> Result<ExtensionResult> {
    let bx = f.grid_box();
    let half = cube_half(bx)?;
    let n = bx.dim();
    f.check_harmonic()?;

    let mut g = f.clone();
    for axis in 0..n - 1 {
        for positive in [false, true] {
            let step = if positive { 1 } else { -1 };
            let k = 2 * half as usize + 1;
            g = g.extend_layers(axis, positive, 2 * half as usize, |grid, p| match &opts.padding {
                Padding::Extrapolate => extrapolate(grid, p, axis, step, k),
                Padding::Constant(c) => c.clone(),
            })?;
        }
        bit_check("padding", g.total_bits(), opts.bit_cap)?;
    }

    let layer = |x_n: i64| -> Result<RationalGrid> {
        let (mut lo, mut hi) = (vec![-3 * half; n - 1], vec![3 * half; n - 1]);
        lo.push(x_n);
        hi.push(x_n);
        let slab = g.restrict(&GridBox::new(lo.clone(), hi.clone())?)?;
        lo.pop();
        hi.pop();
        RationalGrid::new(GridBox::new(lo, hi)?, slab.values().to_vec())
    };
    let g0 = grid_interpolate(&layer(-half)?)?;
    let g1 = grid_interpolate(&layer(-half + 1)?)?;
    bit_check("layer interpolation", g0.total_coefficient_bits() + g1.total_coefficient_bits(), opts.bit_cap)?;

    let shifted = harmonic_from_layers(&g0, &g1)?;
    let p = shifted.shift(n - 1, half);
    let total_bits = p.total_coefficient_bits();
    bit_check("extension polynomial", total_bits, opts.bit_cap)?;

    let eval = IntEvaluator::new(&p);
    let mut match_verified = true;
    for (pt, v) in bx.points().zip(f.values()) {
        if eval.eval(&pt)? != *v {
            match_verified = false;
            break;
        }
    }
    let lap = p.discrete_laplacian();
    let lap_eval = IntEvaluator::new(&lap);
    let samples = harmonicity_samples(n, half);
    let mut max_abs_residual = 0f64;
    for s in &samples {
        let r = lap_eval.eval(s)?.abs().to_f64().unwrap_or(f64::INFINITY);
        max_abs_residual = max_abs_residual.max(r);
    }
    let degree = p.degree().unwrap_or(0);
    Ok(ExtensionResult {
        degree,
        degree_bound: 6 * half as u32 * (n as u32 - 1) + 1,
        match_verified,
        harmonicity: Harmonicity {
            symbolic: lap.is_zero(),
            sampled_points: samples.len(),
            max_abs_residual,
        },
        max_coefficient_bits: p.max_coefficient_bits(),
        total_coefficient_bits: total_bits,
        polynomial: p,
    })
}

/// Origin and the corners of `K_{5N}`: points well outside the data cube.
fn harmonicity_samples(n: usize, half: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0; n]];
    for mask in 0..1u32 << n {
        out.push((0..n).map(|j| if mask >> j & 1 == 1 { 5 * half } else { -5 * half }).collect());
    }
    out
}

/// A nonzero discrete harmonic polynomial in two variables vanishing on all
/// of `K_N`: the zero cube, padded with unit wall values, then extended.
pub fn vanishing_witness(half: i64) -> Result<MultiPoly> {
    if half < 1 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let zero = RationalGrid::zeros(GridBox::cube(2, half));
    let opts = ExtendOptions { padding: Padding::Constant(Rational::one()), ..ExtendOptions::default() };
    let res = extend_from_cube_with(&zero, &opts)?;
    if res.polynomial.is_zero() || !res.verified() {
        return Err(Error::Internal("witness construction failed verification".into()));
    }
    Ok(res.polynomial)
}

/// A discrete harmonic function on `K_N^{(n)}` with integer values: two
/// bottom layers and the side walls are drawn from `draw`, the rest is filled
/// layer by layer along the last axis.
pub fn harmonic_cube_from(dim: usize, half: i64, mut draw: impl FnMut() -> i64) -> Result<RationalGrid> {
    if dim < 2 || half < 1 {
        return Err(Error::invalid("need n >= 2 and N >= 1"));
    }
    let mut lo = vec![-half; dim];
    let mut hi = vec![half; dim];
    lo[dim - 1] = -half;
    hi[dim - 1] = -half + 1;
    let seed = RationalGrid::from_fn(GridBox::new(lo, hi)?, |_| int(draw()));
    seed.extend_layers(dim - 1, true, 2 * half as usize - 1, |_, _| int(draw()))
}
