//! JSON file formats.
//!
//! Boundary data on `Q_1^h`:
//!
//! ```json
//! {"dim": 2, "mesh": 4, "values": [{"point": [-4, 1], "value": 0.5}, ...]}
//! ```
//!
//! Exact cube values on `K_N = [-N, N]^n`, row-major with the last axis
//! fastest; entries are `"p/q"` strings or JSON integers:
//!
//! ```json
//! {"dim": 2, "half": 1, "values": ["0/1", "1/2", 1, ...]}
//! ```
//!
//! Polynomials: `{"e1,e2,...": "p/q", ...}`, optionally wrapped as
//! `{"nvars": n, "terms": {...}}` so that the zero polynomial keeps its arity.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lattice::{BoundaryData, GridBox, LatticeSpec};
use crate::polyext::{format_rational, parse_rational, polynomial_from_entries, MultiPoly, Rational, RationalGrid};

/// Inputs larger than this many lattice points are rejected before allocation.
pub const MAX_POINTS: u128 = 1 << 24;
pub const MAX_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryFile {
    dim: usize,
    mesh: u32,
    values: Vec<BoundaryEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryEntry {
    point: Vec<i64>,
    value: f64,
}

fn check_size(dim: usize, side: u128) -> Result<()> {
    if dim > MAX_DIM {
        return Err(Error::data(format!("dimension {dim} exceeds {MAX_DIM}")));
    }
    let mut total: u128 = 1;
    for _ in 0..dim {
        total = total.saturating_mul(side);
        if total > MAX_POINTS {
            return Err(Error::Resource(format!("box has more than {MAX_POINTS} points")));
        }
    }
    Ok(())
}

/// Boundary data for the unit cube; every face-interior point must appear
/// exactly once.
pub fn parse_boundary(text: &str) -> Result<(LatticeSpec, BoundaryData)> {
    let file: BoundaryFile = serde_json::from_str(text)?;
    check_size(file.dim, 2 * file.mesh as u128 + 1)?;
    let spec = LatticeSpec::new(file.dim, file.mesh)?;
    let mut g = BoundaryData::new(spec.unit_cube());
    for e in file.values {
        if e.point.len() != file.dim {
            return Err(Error::data(format!("point {:?} does not have {} coordinates", e.point, file.dim)));
        }
        if !e.value.is_finite() {
            return Err(Error::data(format!("non-finite value at {:?}", e.point)));
        }
        if g.get(&e.point).is_some() {
            return Err(Error::data(format!("duplicate boundary point {:?}", e.point)));
        }
        g.insert(e.point, e.value).map_err(|e| Error::data(e.to_string()))?;
    }
    g.check_complete().map_err(|e| Error::data(e.to_string()))?;
    Ok((spec, g))
}

pub fn boundary_to_json(spec: &LatticeSpec, g: &BoundaryData) -> String {
    let file = BoundaryFile {
        dim: spec.dim(),
        mesh: spec.mesh(),
        values: g.iter().map(|(p, v)| BoundaryEntry { point: p.clone(), value: v }).collect(),
    };
    serde_json::to_string(&file).expect("boundary data serializes")
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CubeFile {
    dim: usize,
    half: i64,
    values: Vec<Value>,
}

#[derive(Serialize)]
struct CubeOut<'a> {
    dim: usize,
    half: i64,
    values: &'a [String],
}

fn rational_value(v: &Value) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => match n.as_i64() {
            Some(i) => Ok(Rational::from_integer(i.into())),
            None => Err(Error::Parse(format!("{n} is not an integer; write non-integers as \"p/q\""))),
        },
        other => Err(Error::Parse(format!("expected a rational, found {other}"))),
    }
}

/// Exact values on `[-half, half]^dim`.
pub fn parse_cube(text: &str) -> Result<RationalGrid> {
    let file: CubeFile = serde_json::from_str(text)?;
    if file.dim < 2 || file.half < 1 {
        return Err(Error::data(format!("need dim >= 2 and half >= 1, got {} and {}", file.dim, file.half)));
    }
    check_size(file.dim, 2 * file.half as u128 + 1)?;
    let bx = GridBox::cube(file.dim, file.half);
    if file.values.len() != bx.len() {
        return Err(Error::data(format!("cube has {} points but {} values were given", bx.len(), file.values.len())));
    }
    let values = file.values.iter().map(rational_value).collect::<Result<Vec<_>>>()?;
    RationalGrid::new(bx, values)
}

pub fn cube_to_json(f: &RationalGrid) -> Result<String> {
    let bx = f.grid_box();
    let half = bx.hi()[0];
    if bx.dim() < 2 || (0..bx.dim()).any(|j| bx.lo()[j] != -half || bx.hi()[j] != half) {
        return Err(Error::invalid("grid is not a centred cube"));
    }
    let values: Vec<String> = f.values().iter().map(format_rational).collect();
    Ok(serde_json::to_string(&CubeOut { dim: bx.dim(), half, values: &values })?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WrappedPoly {
    nvars: usize,
    terms: serde_json::Map<String, Value>,
}

/// Either a bare `{"e1,...": "p/q"}` map or `{"nvars": n, "terms": {...}}`.
pub fn parse_polynomial(text: &str) -> Result<MultiPoly> {
    let v: Value = serde_json::from_str(text)?;
    let obj = v.as_object().ok_or_else(|| Error::Parse("polynomial must be a JSON object".into()))?;
    let wrapped = obj.contains_key("nvars") || obj.contains_key("terms");
    let (terms, nvars) = if wrapped {
        let w: WrappedPoly = serde_json::from_value(v.clone())?;
        if w.nvars > 64 {
            return Err(Error::Parse(format!("nvars = {} is too large", w.nvars)));
        }
        (w.terms, Some(w.nvars))
    } else {
        (obj.clone(), None)
    };
    let mut entries = Vec::with_capacity(terms.len());
    for (k, v) in &terms {
        let e = k
            .split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|_| Error::Parse(format!("bad exponent tuple {k:?}"))))
            .collect::<Result<Vec<u32>>>()?;
        entries.push((e, rational_value(v)?));
    }
    polynomial_from_entries(entries, nvars)
}

pub fn polynomial_to_json(p: &MultiPoly) -> String {
    let terms: serde_json::Map<String, Value> = p
        .terms()
        .iter()
        .map(|(e, c)| {
            let key = e.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
            (key, Value::String(format_rational(c)))
        })
        .collect();
    serde_json::json!({"nvars": p.nvars(), "terms": terms}).to_string()
}
