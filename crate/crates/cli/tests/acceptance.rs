//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::time::Instant;

use lattice_uc::interp::{
    chebyshev_derivative_closed_form, chebyshev_nodes, discrete_nodes, lagrange_coefficients, NodeBound, NodeSet,
};
use lattice_uc::kernel::{fit_extension_constant, KernelTable};
use lattice_uc::lattice::{grid_extent, is_harmonic, sup_norm, GridBox, GridFunction, LatticeSpec};
use lattice_uc::oracle::{alternating_counterexample, growth_rate, layerwise_extend, parity_boundary, Direction, SideValues};
use lattice_uc::polyext::{build_q, extend_from_cube, harmonic_cube_from, UnivarPoly};
use lattice_uc::threecubes::{
    measure, run_experiment, sample_rng, BoundaryLaw, EstimateConstants, ExperimentConfig,
};
use lattice_uc_cli::run;
use rand::Rng;
use serde_json::Value;

const SOLVE_TOL: f64 = 1e-9;
const KERNEL_TOL: f64 = 1e-10;
const SLOPE_RANGE: (f64, f64) = (-1.3, -0.7);
const CHEBYSHEV_SLACK: f64 = 1e-12;
const LAGRANGE_TOL: f64 = 1e-10;

/// Default three-cubes geometry for n = 2 at N = 512.
const R_SMALL: f64 = 3.0 / 1024.0;
const R_BIG: f64 = 1.0 / 256.0;

type Outcome = Result<String, String>;

fn cli(args: &[&str]) -> (i32, String) {
    let mut full = vec!["lattice-uc"];
    full.extend_from_slice(args);
    let o = run(full);
    (o.code, o.stdout)
}

fn summary(stdout: &str) -> Result<Value, String> {
    let v: Value = serde_json::from_str(stdout).map_err(|e| format!("report is not JSON: {e}"))?;
    Ok(v["summary"].clone())
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("summary has no number {key:?}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_representation() -> Outcome {
    let cases: [(usize, &[u32]); 2] = [(2, &[4, 8, 16, 32]), (3, &[2, 4, 8])];
    let mut worst = 0.0f64;
    for (n, meshes) in cases {
        for &mesh in meshes {
            let (code, out) = cli(&[
                "solve", "--n", &n.to_string(), "--N", &mesh.to_string(),
                "--samples", "20", "--seed", "11", "--tol", &SOLVE_TOL.to_string(),
            ]);
            let s = summary(&out)?;
            let d = num(&s, "max_relative_discrepancy")?;
            worst = worst.max(d);
            ensure(code == 0 && d <= SOLVE_TOL, || format!("n={n} N={mesh}: discrepancy {d:e}, exit {code}"))?;
        }
    }
    Ok(format!("max relative discrepancy {worst:.2e} <= {SOLVE_TOL:e}"))
}

fn c2_kernel() -> Outcome {
    let cases: [(usize, u32); 2] = [(2, 8), (3, 4)];
    let mut checked = 0;
    for (n, top) in cases {
        for mesh in 2..=top {
            let (_, out) = cli(&["kernel-check", "--n", &n.to_string(), "--N", &mesh.to_string()]);
            let s = summary(&out)?;
            let (d, o, r) = (
                num(&s, "max_diagonal_error")?,
                num(&s, "max_off_diagonal")?,
                num(&s, "max_scaled_residual")?,
            );
            ensure(d <= KERNEL_TOL && o <= KERNEL_TOL && r <= KERNEL_TOL, || {
                format!("n={n} N={mesh}: diag {d:e}, off {o:e}, residual {r:e}")
            })?;
            checked += s["face_points"].as_u64().unwrap_or(0);
        }
    }
    Ok(format!("{checked} face-interior points, all within {KERNEL_TOL:e}"))
}

fn c3_eigenvalues() -> Outcome {
    let mut count = 0usize;
    let mut min_margin = f64::INFINITY;
    for n in [2usize, 3] {
        for mesh in 1..=16u32 {
            let table = KernelTable::new(LatticeSpec::new(n, mesh).map_err(|e| e.to_string())?);
            for (k, a) in table.iter_eigenvalues() {
                let floor = (2.0 * mesh as f64).min(k.norm());
                ensure(a >= floor, || format!("n={n} N={mesh} K={:?}: a = {a} < {floor}", k.0))?;
                min_margin = min_margin.min(a - floor);
                count += 1;
            }
        }
    }
    Ok(format!("{count} eigenvalues, 0 violations, min margin {min_margin:.3e}"))
}

fn c4_extension_scaling() -> Outcome {
    let fit = fit_extension_constant(2, &[8, 16, 32, 64, 128]).map_err(|e| e.to_string())?;
    ensure(fit.slope >= SLOPE_RANGE.0 && fit.slope <= SLOPE_RANGE.1, || {
        format!("slope {:.4} outside {SLOPE_RANGE:?}; sups {:?}", fit.slope, fit.sups)
    })?;
    Ok(format!("log-log slope {:.4}, C = {:.4}", fit.slope, fit.constant))
}

fn c5_chebyshev() -> Outcome {
    for m in 1..=30usize {
        let c = chebyshev_nodes(m).map_err(|e| e.to_string())?;
        let thr = m as f64 * 2f64.powi(1 - m as i32);
        for (got, want) in c.derivative_magnitudes.iter().zip(chebyshev_derivative_closed_form(m)) {
            ensure((got - want).abs() <= CHEBYSHEV_SLACK * want, || format!("m={m}: |H'| = {got} vs {want}"))?;
            ensure(*got >= thr * (1.0 - CHEBYSHEV_SLACK), || format!("m={m}: |H'| = {got} < {thr}"))?;
        }
    }
    for m in 2..=100usize {
        let c = chebyshev_nodes(m).map_err(|e| e.to_string())?;
        let gap = c.nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        ensure(gap >= 1.0 / (m * m) as f64, || format!("m={m}: gap {gap} < m^-2"))?;
    }
    Ok("|H'(t_k)| matches the closed form and >= m 2^(1-m) for m <= 30; gaps >= m^-2 for m <= 100".into())
}

fn discrete_grids(m: usize) -> Vec<u64> {
    let mut g: Vec<u64> = [m * m + 1, 2 * m * m, 10 * m * m].iter().map(|&x| x as u64).collect();
    g.sort_unstable();
    g.dedup();
    g
}

fn c6_discrete_nodes() -> Outcome {
    let (mut sets, mut full) = (0usize, 0usize);
    for m in 1..=8usize {
        for grid in discrete_grids(m) {
            let d = discrete_nodes(m, grid).map_err(|e| e.to_string())?;
            let pts = d.grid_points.clone().ok_or("discrete set without grid points")?;
            ensure(pts.len() == m && pts.windows(2).all(|w| w[0] < w[1]), || format!("m={m} M={grid}: {pts:?}"))?;
            ensure(pts.iter().all(|p| p.unsigned_abs() <= grid), || format!("m={m} M={grid}: off the grid"))?;
            let on_grid = d.nodes.iter().zip(&pts).all(|(t, p)| *t == *p as f64 / grid as f64);
            ensure(on_grid, || format!("m={m} M={grid}: nodes are not p/M"))?;
            let relaxed = m as f64 * 2f64.powi(-(m as i32));
            ensure(d.achieved_bound >= relaxed * (1.0 - 1e-12), || {
                format!("m={m} M={grid}: bound {} < {relaxed}", d.achieved_bound)
            })?;
            sets += 1;
            full += (d.bound_met() == Some(NodeBound::Full)) as usize;
        }
    }
    Ok(format!(
        "{sets} node sets meet m 2^-m; {full}/{sets} ({:.0}%) meet m 2^(1-m)",
        100.0 * full as f64 / sets as f64
    ))
}

fn lagrange_error(nodes: &NodeSet, coeffs: &[f64], b: f64) -> f64 {
    let eval = |t: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
    let w = lagrange_coefficients(nodes, b);
    let vals: Vec<f64> = nodes.nodes.iter().map(|&t| eval(t)).collect();
    let scale = vals.iter().fold(eval(b).abs(), |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    (w.apply(&vals) - eval(b)).abs() / scale
}

fn c7_lagrange() -> Outcome {
    let mut rng = sample_rng(7, 0);
    let mut worst = 0.0f64;
    let mut trials = 0usize;
    for m in 1..=12usize {
        let mut sets = vec![chebyshev_nodes(m).map_err(|e| e.to_string())?];
        for grid in discrete_grids(m) {
            sets.push(discrete_nodes(m, grid).map_err(|e| e.to_string())?);
        }
        for nodes in &sets {
            for _ in 0..50 {
                let coeffs: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let b = rng.gen_range(-2.0..2.0);
                let e = lagrange_error(nodes, &coeffs, b);
                worst = worst.max(e);
                ensure(e <= LAGRANGE_TOL, || format!("m={m} {:?} b={b}: error {e:e}", nodes.kind))?;
                trials += 1;
            }
        }
    }
    Ok(format!("{trials} polynomials, max relative error {worst:.2e}"))
}

fn c8_three_cubes() -> Outcome {
    let (code, out) = cli(&["three-cubes", "--n", "2", "--N", "512", "--samples", "100", "--calibrate", "20"]);
    let s = summary(&out)?;
    let violations = s["violations"].as_u64().unwrap_or(u64::MAX);
    ensure(code == 0 && s["all_satisfied"] == Value::Bool(true) && violations == 0, || {
        format!("exit {code}, {violations} violations")
    })?;
    let a = num(&s["constants"], "a")?;
    let req = num(&s["calibration"], "max_required_a")?;
    let worst = serde_json::from_str::<Value>(&out).map_err(|e| e.to_string())?["rows"]
        .as_array()
        .map(|rows| rows.iter().filter_map(|r| r["required_a"].as_f64()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN);
    Ok(format!("100/100 satisfied; A = {a:.4e} (calibrated {req:.4e}), worst validation need {worst:.4e}"))
}

fn c9_mesh_term() -> Outcome {
    let r_steps = grid_extent(R_SMALL, 512);
    let big_r_steps = grid_extent(R_BIG, 512);
    // zero on Q_r, grown layer-wise to Q_R with unit side values
    let mut u = GridFunction::zeros(GridBox::cube(2, r_steps));
    for dir in [Direction::new(1, true), Direction::new(1, false), Direction::new(0, true), Direction::new(0, false)] {
        u = layerwise_extend(&u, dir, (big_r_steps - r_steps) as usize, &SideValues::Constant(1.0))
            .map_err(|e| e.to_string())?;
    }
    let q_r = GridBox::cube(2, r_steps);
    let q_big = GridBox::cube(2, big_r_steps);
    let inner = q_big.interior().ok_or("Q_R has no interior")?;
    let eps = sup_norm(&u, &q_r).map_err(|e| e.to_string())?;
    let mid = sup_norm(&u, &q_big).map_err(|e| e.to_string())?;
    let harmonic = is_harmonic(&u, &inner, 1e-12).map_err(|e| e.to_string())?;
    ensure(eps == 0.0 && mid > 0.0 && harmonic, || format!("eps {eps}, sup_Q_R {mid}, harmonic {harmonic}"))?;

    let cal = run_experiment(&ExperimentConfig {
        dim: 2,
        mesh: 512,
        r: R_SMALL,
        big_r: R_BIG,
        samples: 0,
        calibration_samples: 20,
        seed: 1,
        law: BoundaryLaw::OneFace,
        a: None,
    })
    .map_err(|e| e.to_string())?;
    let c: EstimateConstants = cal.constants;
    let mut ratios = Vec::new();
    for mesh in [64u32, 128, 256, 512] {
        let spec = LatticeSpec::new(2, mesh).map_err(|e| e.to_string())?;
        let table = KernelTable::new(spec);
        let g = parity_boundary(&spec.unit_cube());
        let mx = measure(&table, &g, grid_extent(R_SMALL, mesh), grid_extent(R_BIG, mesh)).map_err(|e| e.to_string())?;
        let ratio = mx.mid / mx.total;
        let m = (R_SMALL * mesh as f64).sqrt().floor() as i32;
        let bound = c.a * c.q.powi(m);
        ensure(ratio <= bound, || format!("N={mesh}: ratio {ratio:e} > A q^{m} = {bound:e}"))?;
        ratios.push(format!("N={mesh}: {ratio:.1e} <= {bound:.2e}"));
    }

    let cex = alternating_counterexample(8, 1, 8).map_err(|e| e.to_string())?;
    let growth = growth_rate(&cex, 1, 8).map_err(|e| e.to_string())?;
    ensure(growth.rate > 1.0, || format!("fitted b = {}", growth.rate))?;
    Ok(format!(
        "eps = 0 with sup_Q_R = {mid}; {}; b = {:.3}",
        ratios.join(", "),
        growth.rate
    ))
}

fn c10_polynomial_extension() -> Outcome {
    let cases: [(usize, &[i64]); 2] = [(2, &[1, 2, 3]), (3, &[1, 2])];
    let mut max_degree = 0;
    let mut count = 0;
    for (n, halves) in cases {
        for &half in halves {
            for i in 0..10u64 {
                let mut rng = sample_rng(100 + half as u64, i);
                let f = harmonic_cube_from(n, half, || rng.gen_range(-5..=5)).map_err(|e| e.to_string())?;
                let ext = extend_from_cube(&f).map_err(|e| e.to_string())?;
                let bound = 6 * half as u32 * (n as u32 - 1) + 1;
                ensure(ext.match_verified && ext.harmonicity.symbolic, || format!("n={n} N={half} #{i}: not verified"))?;
                ensure(ext.degree <= bound, || format!("n={n} N={half} #{i}: degree {} > {bound}", ext.degree))?;
                max_degree = max_degree.max(ext.degree);
                count += 1;
            }
        }
    }
    let qs = build_q(20);
    for (j, q) in qs.iter().enumerate().skip(2) {
        let mut mono = vec![lattice_uc::polyext::Rational::from_integer(0.into()); j - 1];
        mono[j - 2] = lattice_uc::polyext::Rational::from_integer(1.into());
        ensure(q.second_difference() == UnivarPoly::new(mono), || format!("Δ q_{j} != t^{}", j - 2))?;
    }
    Ok(format!("{count} cubes extended exactly, max degree {max_degree}; Δ_d q_j = t^(j-2) for j <= 20"))
}

fn c11_determinism() -> Outcome {
    let commands: [&[&str]; 6] = [
        &["solve", "--N", "8", "--samples", "4", "--seed", "5"],
        &["kernel-check", "--N", "4"],
        &["three-cubes", "--samples", "8", "--calibrate", "4", "--seed", "5"],
        &["extend", "--N", "2", "--samples", "3", "--seed", "5"],
        &["counterexample", "--N", "6"],
        &["nodes-check", "--m-max", "6"],
    ];
    for args in commands {
        let mut outs = Vec::new();
        for workers in ["1", "4", "1"] {
            let mut full = vec!["--workers", workers];
            full.extend_from_slice(args);
            let (code, out) = cli(&full);
            ensure(code == 0 && !out.is_empty(), || format!("{args:?} exited {code}"))?;
            outs.push(out);
        }
        ensure(outs.windows(2).all(|w| w[0] == w[1]), || format!("{args:?}: reports differ"))?;
    }
    Ok("6 commands byte-identical across repeated runs and workers {1, 4}".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("representation identity", c1_representation),
        ("kernel delta property and harmonicity", c2_kernel),
        ("eigenvalue bound", c3_eigenvalues),
        ("holomorphic-extension scaling", c4_extension_scaling),
        ("Chebyshev bounds", c5_chebyshev),
        ("discrete nodes", c6_discrete_nodes),
        ("Lagrange exactness", c7_lagrange),
        ("three-cubes inequality", c8_three_cubes),
        ("necessity of the mesh term", c9_mesh_term),
        ("polynomial extension", c10_polynomial_extension),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = f();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
