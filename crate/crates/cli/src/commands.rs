use std::collections::BTreeSet;
use std::path::Path;

use lattice_uc::interp::{chebyshev_derivative_closed_form, chebyshev_nodes, discrete_nodes, NodeBound};
use lattice_uc::kernel::{batch_solve, kernel_eval, sampled_extension_sup, KernelTable};
use lattice_uc::lattice::{max_residual, sup_norm, BoundaryData, BoundaryMode, GridFunction, GridPoint, LatticeSpec};
use lattice_uc::oracle::{alternating_counterexample, growth_rate, solve_dirichlet};
use lattice_uc::polyext::{extend_from_cube_with, harmonic_cube_from, ExtendOptions, Padding, DEFAULT_BIT_CAP};
use lattice_uc::threecubes::{
    draw_boundary, run_experiment, sample_rng, BoundaryLaw, EstimateConstants, ExperimentConfig,
};
use lattice_uc::{io, Error};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{
    pick, Command, CounterArgs, ExtendArgs, Failure, FileConfig, KernelArgs, NodesArgs, Report, SolveArgs,
    ThreeCubesArgs, EXIT_OK, EXIT_VALIDATION,
};

pub type CommandResult = Result<(Report, i32), Failure>;

/// Default three-cubes geometry for `n = 2`: `R < 2r < 2^-7`.
pub const DEFAULT_R: f64 = 3.0 / 1024.0;
pub const DEFAULT_BIG_R: f64 = 1.0 / 256.0;

pub fn dispatch(cmd: &Command, file: &FileConfig) -> CommandResult {
    match cmd {
        Command::Solve(a) => solve(a, file),
        Command::KernelCheck(a) => kernel_check(a, file),
        Command::ThreeCubes(a) => three_cubes(a, file),
        Command::Extend(a) => extend(a, file),
        Command::Counterexample(a) => counterexample(a, file),
        Command::NodesCheck(a) => nodes_check(a, file),
    }
}

fn usage(e: String) -> Failure {
    Failure::usage(e)
}

fn law(flag: &Option<String>, file: &FileConfig, default: BoundaryLaw) -> Result<BoundaryLaw, Failure> {
    match flag.as_ref().or(file.law.as_ref()) {
        Some(s) => s.parse().map_err(Failure::from),
        None => Ok(default),
    }
}

fn verdict(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

fn row(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("row serializes")
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))
}

#[derive(Serialize)]
struct SolveConfig {
    n: usize,
    #[serde(rename = "N")]
    mesh: u32,
    samples: usize,
    seed: u64,
    tol: f64,
    law: BoundaryLaw,
    input: Option<String>,
}

#[derive(Serialize)]
struct SolveRow {
    index: usize,
    max_discrepancy: f64,
    relative_discrepancy: f64,
    oracle_residual: f64,
    kernel_residual: f64,
    solver: lattice_uc::oracle::SolverKind,
    unknowns: usize,
}

fn compare(table: &KernelTable, g: &BoundaryData, index: usize) -> Result<SolveRow, Error> {
    let cube = table.spec().unit_cube();
    let oracle = solve_dirichlet(&cube, g)?;
    let kernel = batch_solve(table, g, &cube)?;
    let interior = cube.interior().expect("N >= 1 leaves an interior");
    let diff = GridFunction::from_fn(cube.clone(), |p| {
        if interior.contains(p) {
            oracle.solution.get(p).unwrap() - kernel.get(p).unwrap()
        } else {
            0.0
        }
    });
    let max_discrepancy = diff.sup();
    let scale = sup_norm(&oracle.solution, &interior)?.max(g.sup()).max(f64::MIN_POSITIVE);
    Ok(SolveRow {
        index,
        max_discrepancy,
        relative_discrepancy: max_discrepancy / scale,
        oracle_residual: oracle.max_residual,
        kernel_residual: max_residual(&kernel, &interior)?,
        solver: oracle.stats.kind,
        unknowns: oracle.stats.unknowns,
    })
}

fn solve(a: &SolveArgs, file: &FileConfig) -> CommandResult {
    let input = a.input.clone().or(file.input.clone());
    let mut cfg = SolveConfig {
        n: pick(a.dim, file.n, 2),
        mesh: pick(a.mesh, file.mesh().map_err(usage)?, 16),
        samples: pick(a.samples, file.samples, 1),
        seed: pick(a.seed, file.seed, 1),
        tol: pick(a.tol, file.tol, 1e-9),
        law: law(&a.law, file, BoundaryLaw::Uniform)?,
        input: input.as_ref().map(|p| p.display().to_string()),
    };
    let rows: Vec<SolveRow> = match &input {
        Some(path) => {
            // malformed boundary files are usage errors
            let (spec, g) = read(path)
                .and_then(|t| io::parse_boundary(&t))
                .map_err(|e| Failure::usage(e.to_string()))?;
            cfg.n = spec.dim();
            cfg.mesh = spec.mesh();
            cfg.samples = 1;
            vec![compare(&KernelTable::new(spec), &g, 0)?]
        }
        None => {
            let spec = LatticeSpec::new(cfg.n, cfg.mesh)?;
            let table = KernelTable::new(spec);
            (0..cfg.samples)
                .into_par_iter()
                .map(|i| {
                    let g = draw_boundary(&spec, cfg.law, &mut sample_rng(cfg.seed, i as u64));
                    compare(&table, &g, i)
                })
                .collect::<Result<_, _>>()?
        }
    };
    let worst = rows.iter().map(|r| r.relative_discrepancy).fold(0.0, f64::max);
    let worst_abs = rows.iter().map(|r| r.max_discrepancy).fold(0.0, f64::max);
    let ok = worst <= cfg.tol;
    let summary = json!({
        "datasets": rows.len(),
        "max_discrepancy": worst_abs,
        "max_relative_discrepancy": worst,
        "pass": ok,
    });
    let rows = rows.iter().map(row).collect();
    Ok((Report::new("solve", &cfg, rows, summary), verdict(ok)))
}

#[derive(Serialize)]
struct KernelConfig {
    n: usize,
    #[serde(rename = "N")]
    mesh: u32,
    tol: f64,
}

#[derive(Serialize)]
struct KernelRow {
    y: Vec<i64>,
    diagonal: f64,
    max_off_diagonal: f64,
    max_residual: f64,
    scale: f64,
}

fn kernel_row(table: &KernelTable, y: &[i64], face: &[Vec<i64>]) -> Result<KernelRow, Error> {
    let cube = table.spec().unit_cube();
    let interior = cube.interior().expect("N >= 1 leaves an interior");
    let mut diagonal = 0.0;
    let mut max_off_diagonal = 0.0f64;
    for z in face {
        let v = kernel_eval(table, z, y)?;
        if z.as_slice() == y {
            diagonal = v;
        } else {
            max_off_diagonal = max_off_diagonal.max(v.abs());
        }
    }
    // P(., y) on the closed cube: kernel values inside, the delta on the boundary
    let u = GridFunction::from_fn(cube.clone(), |x| {
        if interior.contains(x) {
            kernel_eval(table, x, y).unwrap_or(f64::NAN)
        } else if x == y {
            1.0
        } else {
            0.0
        }
    });
    Ok(KernelRow {
        y: y.to_vec(),
        diagonal,
        max_off_diagonal,
        max_residual: max_residual(&u, &interior)?,
        scale: u.sup().max(1.0),
    })
}

fn kernel_check(a: &KernelArgs, file: &FileConfig) -> CommandResult {
    let cfg = KernelConfig {
        n: pick(a.dim, file.n, 2),
        mesh: pick(a.mesh, file.mesh().map_err(usage)?, 4),
        tol: pick(a.tol, file.tol, 1e-10),
    };
    let spec = LatticeSpec::new(cfg.n, cfg.mesh)?;
    let table = KernelTable::new(spec);
    let face: Vec<Vec<i64>> = spec
        .unit_cube()
        .boundary(BoundaryMode::FaceInterior)
        .into_iter()
        .map(|GridPoint(p)| p)
        .collect();
    let rows: Vec<KernelRow> = face
        .par_iter()
        .map(|y| kernel_row(&table, y, &face))
        .collect::<Result<_, _>>()?;
    let two_n = 2.0 * cfg.mesh as f64;
    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    let mut count = 0usize;
    for (k, a) in table.iter_eigenvalues() {
        let floor = two_n.min(k.norm());
        min_margin = min_margin.min(a - floor);
        if a < floor {
            violations += 1;
        }
        count += 1;
    }
    let diag_err = rows.iter().map(|r| (r.diagonal - 1.0).abs()).fold(0.0, f64::max);
    let off = rows.iter().map(|r| r.max_off_diagonal).fold(0.0, f64::max);
    let res_ok = rows.iter().all(|r| r.max_residual <= cfg.tol * r.scale);
    let max_res = rows.iter().map(|r| r.max_residual / r.scale).fold(0.0, f64::max);
    let ok = diag_err <= cfg.tol && off <= cfg.tol && res_ok && violations == 0;
    let summary = json!({
        "face_points": rows.len(),
        "max_diagonal_error": diag_err,
        "max_off_diagonal": off,
        "max_scaled_residual": max_res,
        "eigenvalues_checked": count,
        "eigenvalue_bound_violations": violations,
        "eigenvalue_min_margin": min_margin,
        "extension_sup": sampled_extension_sup(&table, 9, 5)?,
        "pass": ok,
    });
    let rows = rows.iter().map(row).collect();
    Ok((Report::new("kernel-check", &cfg, rows, summary), verdict(ok)))
}

#[derive(Serialize)]
struct ThreeCubesConfig {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    /// Radii actually realised on the lattice: `floor(r N) / N`.
    r_grid: f64,
    #[serde(rename = "R_grid")]
    big_r_grid: f64,
}

fn three_cubes(a: &ThreeCubesArgs, file: &FileConfig) -> CommandResult {
    let dim = pick(a.dim, file.n, 2);
    let mesh = pick(a.mesh, file.mesh().map_err(usage)?, 512);
    let exp = ExperimentConfig {
        dim,
        mesh,
        r: pick(a.r, file.r().map_err(usage)?, DEFAULT_R),
        big_r: pick(a.big_r, file.big_r().map_err(usage)?, DEFAULT_BIG_R),
        samples: pick(a.samples, file.samples, 100),
        calibration_samples: pick(a.calibrate, file.calibrate, 20),
        seed: pick(a.seed, file.seed, 1),
        law: law(&a.law, file, BoundaryLaw::OneFace)?,
        a: a.a.or(file.a),
    };
    let rep = run_experiment(&exp)?;
    let cfg = ThreeCubesConfig {
        r_grid: rep.r_steps as f64 / mesh as f64,
        big_r_grid: rep.big_r_steps as f64 / mesh as f64,
        experiment: exp,
    };
    let violations = rep.records.iter().filter(|r| !r.satisfied).count();
    let summary = json!({
        "constants": rep.constants,
        "theorem_constant": rep.theorem_constant,
        "calibration": rep.calibration,
        "r_steps": rep.r_steps,
        "R_steps": rep.big_r_steps,
        "m_cap": rep.m_cap,
        "samples": rep.records.len(),
        "violations": violations,
        "all_satisfied": rep.all_satisfied,
    });
    let rows = rep.records.iter().map(row).collect();
    Ok((Report::new("three-cubes", &cfg, rows, summary), verdict(rep.all_satisfied)))
}

#[derive(Serialize)]
struct ExtendConfig {
    n: usize,
    #[serde(rename = "N")]
    half: i64,
    samples: usize,
    seed: u64,
    input: Option<String>,
    padding: String,
    bit_cap: u64,
}

fn extend(a: &ExtendArgs, file: &FileConfig) -> CommandResult {
    let input = a.input.clone().or(file.input.clone());
    let padding_name = a.padding.clone().or(file.padding.clone()).unwrap_or_else(|| "extrapolate".into());
    let padding = match padding_name.as_str() {
        "extrapolate" => Padding::Extrapolate,
        "zero" => Padding::Constant(lattice_uc::polyext::Rational::from_integer(0.into())),
        other => return Err(Failure::usage(format!("unknown padding '{other}' (extrapolate or zero)"))),
    };
    let mut cfg = ExtendConfig {
        n: pick(a.dim, file.n, 2),
        half: pick(a.half, file.big_n, 2),
        samples: pick(a.samples, file.samples, 1),
        seed: pick(a.seed, file.seed, 1),
        input: input.as_ref().map(|p| p.display().to_string()),
        padding: padding_name,
        bit_cap: pick(a.bit_cap, file.bit_cap, DEFAULT_BIT_CAP),
    };
    let opts = ExtendOptions { padding, bit_cap: cfg.bit_cap };
    let cubes = match &input {
        Some(path) => {
            // a corrupted cube file is a data error
            let f = read(path).and_then(|t| io::parse_cube(&t)).map_err(|e| Failure::data(e.to_string()))?;
            cfg.n = f.grid_box().dim();
            cfg.half = f.grid_box().hi()[0];
            cfg.samples = 1;
            vec![f]
        }
        None => {
            if cfg.n < 2 || cfg.half < 1 {
                return Err(Failure::usage("extend needs n >= 2 and N >= 1"));
            }
            (0..cfg.samples)
                .map(|i| {
                    let mut rng = sample_rng(cfg.seed, i as u64);
                    harmonic_cube_from(cfg.n, cfg.half, || rng.gen_range(-5..=5))
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let results = cubes
        .par_iter()
        .map(|f| extend_from_cube_with(f, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let ok = results.iter().all(|r| r.verified());
    let max_degree = results.iter().map(|r| r.degree).max().unwrap_or(0);
    let rows = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            json!({
                "index": i,
                "degree": r.degree,
                "degree_bound": r.degree_bound,
                "match_verified": r.match_verified,
                "symbolic_harmonic": r.harmonicity.symbolic,
                "sampled_points": r.harmonicity.sampled_points,
                "max_abs_residual": r.harmonicity.max_abs_residual,
                "max_coefficient_bits": r.max_coefficient_bits,
                "total_coefficient_bits": r.total_coefficient_bits,
                "terms": r.polynomial.len(),
                "polynomial": r.polynomial,
            })
        })
        .collect();
    let summary = json!({"extensions": results.len(), "max_degree": max_degree, "all_verified": ok});
    Ok((Report::new("extend", &cfg, rows, summary), verdict(ok)))
}

#[derive(Serialize)]
struct CounterConfig {
    #[serde(rename = "M")]
    short: i64,
    #[serde(rename = "N")]
    long: i64,
    k_max: i64,
    r: f64,
    #[serde(rename = "R")]
    big_r: f64,
}

fn counterexample(a: &CounterArgs, file: &FileConfig) -> CommandResult {
    let short = pick(a.short, file.big_m, 1);
    let long = pick(a.long, file.big_n, 4);
    let cfg = CounterConfig {
        short,
        long,
        k_max: pick(a.k_max, file.k_max, long),
        r: pick(a.r, file.r().map_err(usage)?, DEFAULT_R),
        big_r: pick(a.big_r, file.big_r().map_err(usage)?, DEFAULT_BIG_R),
    };
    if long <= short {
        return Err(Failure::usage(format!("need N > M, got N = {long}, M = {short}")));
    }
    let u = alternating_counterexample(cfg.long, cfg.short, cfg.k_max)?;
    let growth = growth_rate(&u, cfg.short, cfg.k_max)?;
    let c = EstimateConstants::new(cfg.r, cfg.big_r, 2, 1.0)?;
    let nn = cfg.long as f64;
    let summary = json!({
        "rate": growth.rate,
        "fit_residual": growth.fit_residual,
        "rate_above_one": growth.rate > 1.0,
        "q": c.q,
        "delta": c.delta,
        "q_pow_N": c.q.powf(nn),
        "delta_pow_sqrt_N": c.delta.powf(nn.sqrt()),
    });
    let rows = growth.layer_maxima.iter().map(|&(k, m)| json!({"K": k, "max": m})).collect();
    Ok((Report::new("counterexample", &cfg, rows, summary), EXIT_OK))
}

#[derive(Serialize)]
struct NodesConfig {
    m_max: usize,
    tol: f64,
}

fn nodes_check(a: &NodesArgs, file: &FileConfig) -> CommandResult {
    let cfg = NodesConfig { m_max: pick(a.m_max, file.m_max, 8), tol: pick(a.tol, file.tol, 1e-12) };
    if cfg.m_max == 0 {
        return Err(Failure::usage("--m-max must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut classical_ok = true;
    let mut relaxed_ok = true;
    let (mut discrete, mut full) = (0usize, 0usize);
    for m in 1..=cfg.m_max {
        let c = chebyshev_nodes(m)?;
        let closed = chebyshev_derivative_closed_form(m);
        let err = c
            .derivative_magnitudes
            .iter()
            .zip(&closed)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        let thr = m as f64 * 2f64.powi(1 - m as i32);
        let ok = c.achieved_bound >= thr * (1.0 - cfg.tol) && err <= cfg.tol.max(1e-12);
        classical_ok &= ok;
        rows.push(json!({
            "m": m, "kind": "classical", "grid": Value::Null,
            "achieved_bound": c.achieved_bound, "full_threshold": thr,
            "closed_form_error": err, "meets_full": ok, "meets_relaxed": ok,
        }));
        let grids: BTreeSet<u64> = [m * m + 1, 2 * m * m, 10 * m * m]
            .into_iter()
            .map(|g| g as u64)
            .filter(|&g| g > (m * m) as u64)
            .collect();
        for grid in grids {
            let d = discrete_nodes(m, grid)?;
            let bound = d.bound_met();
            let meets_full = bound == Some(NodeBound::Full);
            let meets_relaxed = bound.is_some();
            discrete += 1;
            full += meets_full as usize;
            relaxed_ok &= meets_relaxed;
            rows.push(json!({
                "m": m, "kind": "discrete", "grid": grid,
                "achieved_bound": d.achieved_bound, "full_threshold": thr,
                "closed_form_error": Value::Null, "meets_full": meets_full, "meets_relaxed": meets_relaxed,
                "grid_points": d.grid_points,
            }));
        }
    }
    let ok = classical_ok && relaxed_ok;
    let summary = json!({
        "classical_ok": classical_ok,
        "discrete_sets": discrete,
        "fraction_full": if discrete > 0 { full as f64 / discrete as f64 } else { 1.0 },
        "all_relaxed": relaxed_ok,
        "pass": ok,
    });
    Ok((Report::new("nodes-check", &cfg, rows, summary), verdict(ok)))
}
