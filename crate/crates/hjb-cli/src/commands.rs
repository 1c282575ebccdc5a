//! Subcommand implementations. Every run writes a machine-readable
//! `report.json` embedding the fully resolved configuration, plus the
//! tabular artifacts documented in the README. Diagnostics go to stderr.

use crate::out::{diagram_svg, fmt_f, write_atomic, Csv};
use anyhow::Result;
use hjb_core::scenario::Scenario;
use hjb_core::util::par_map;
use hjb_core::*;
use serde_json::json;
use std::path::Path;

pub struct Built {
    pub grid: Grid,
    pub dop: DiscreteOperator,
    pub f: Nonlinearity,
}

pub fn build(sc: &Scenario) -> Result<Built> {
    let grid = sc.build_grid()?;
    let op = sc.build_operator()?;
    let dop = discretize(&op, grid)?;
    let f = sc.build_nonlinearity(grid)?;
    Ok(Built { grid, dop, f })
}

fn solver_opts(sc: &Scenario) -> SolverOptions {
    SolverOptions {
        tol_scale: sc.solver.tol_scale,
        ..SolverOptions::default()
    }
}

fn budget(sc: &Scenario) -> ProbeBudget {
    ProbeBudget::default().scaled(sc.solver.budget_scale)
}

pub fn write_report(out: &Path, sc: &Scenario, command: &str, results: serde_json::Value) -> Result<()> {
    let report = json!({
        "command": command,
        "config": serde_json::to_value(sc)?,
        "results": results,
    });
    write_atomic(&out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn gridfun_csv(name: &str, fields: &[(&str, &GridFunction)]) -> String {
    let grid = fields[0].1.grid;
    let mut header = vec!["node", "x", "y"];
    for (n, _) in fields {
        header.push(n);
    }
    let mut csv = Csv::new(&header);
    for i in 0..grid.len() {
        let (x, y) = grid.coords(i);
        let mut row = vec![i.to_string(), fmt_f(x), fmt_f(y)];
        for (_, gf) in fields {
            row.push(fmt_f(gf.values[i]));
        }
        csv.row(&row);
    }
    let _ = name;
    csv.finish()
}

pub fn cmd_eigen(sc: &Scenario, out: &Path) -> Result<()> {
    let b = build(sc)?;
    let gap = eigen_gap(&b.dop)?;
    eprintln!(
        "half-eigenvalues: plus = {:.10} (residual {:.2e}), minus = {:.10} (residual {:.2e}), gap = {:.6}",
        gap.plus.value, gap.plus.residual_sup, gap.minus.value, gap.minus.residual_sup, gap.gap
    );
    write_atomic(
        &out.join("eigen.csv"),
        &gridfun_csv(
            "eigen",
            &[("phi_plus", &gap.plus.efun), ("phi_minus", &gap.minus.efun)],
        ),
    )?;
    write_report(
        out,
        sc,
        "eigen",
        json!({
            "lambda_plus": gap.plus.value,
            "lambda_minus": gap.minus.value,
            "gap": gap.gap,
            "degenerate": gap.degenerate,
            "residual_plus": gap.plus.residual_sup,
            "residual_minus": gap.minus.residual_sup,
        }),
    )?;
    Ok(())
}

pub fn cmd_solve(sc: &Scenario, out: &Path) -> Result<bool> {
    let b = build(sc)?;
    let spec = sc.solve.as_ref().ok_or_else(|| hjb_core::Error::Config {
        path: "solve".into(),
        msg: "missing [solve] section".into(),
    })?;
    let u0 = match &spec.start {
        Some(src) => sc.sample_field(b.grid, src, "solve.start")?,
        None => GridFunction::zeros(b.grid),
    };
    let opts = solver_opts(sc);
    let rep = newton_solve(&b.dop, spec.lambda, &b.f, &u0, &opts);
    let (status, ok) = match &rep.status {
        SolveStatus::Converged { u, residual_sup, iters } => {
            write_atomic(&out.join("solution.csv"), &gridfun_csv("solution", &[("u", u)]))?;
            (
                json!({
                    "status": "converged",
                    "residual_sup": residual_sup,
                    "iters": iters,
                    "sup_norm": norm(u, NormKind::Sup),
                    "sign_class": classify_sign(u).as_str(),
                }),
                true,
            )
        }
        SolveStatus::Diverged { growth_rate, iters } => (
            json!({"status": "diverged", "growth_rate": growth_rate, "iters": iters}),
            false,
        ),
        SolveStatus::Stalled { last_residual } => (
            json!({"status": "stalled", "last_residual": last_residual}),
            false,
        ),
    };
    write_report(
        out,
        sc,
        "solve",
        json!({
            "lambda": spec.lambda,
            "solve": status,
            "residual_history": rep.residual_history,
        }),
    )?;
    if !ok {
        return Err(hjb_core::Error::NoConvergence {
            what: "solve subcommand".into(),
            iters: rep.residual_history.len(),
        }
        .into());
    }
    Ok(true)
}

pub fn cmd_tstar(sc: &Scenario, out: &Path) -> Result<()> {
    let b = build(sc)?;
    let spec = sc.tstar.as_ref().ok_or_else(|| hjb_core::Error::Config {
        path: "tstar".into(),
        msg: "missing [tstar] section".into(),
    })?;
    let ctx = EigenContext::compute(&b.dop)?;
    let d = sc.sample_field(b.grid, &spec.d, "tstar.d")?;
    let opts = TStarOptions {
        width: spec.width,
        budget: budget(sc),
        ..TStarOptions::default()
    };
    let result = match spec.mode.as_str() {
        "resonant_plus" => tstar_resonant(&b.dop, &ctx, true, &d, &opts)?,
        "resonant_minus" => tstar_resonant(&b.dop, &ctx, false, &d, &opts)?,
        "interior" => tstar_interior(&b.dop, &ctx, spec.lambda.unwrap(), &d, &opts)?,
        _ => unreachable!("validated"),
    };
    let dec = decompose(&d, &ctx.plus.efun);
    eprintln!(
        "t* at lambda = {:.8}: {:.8} (bracket [{:.8}, {:.8}])",
        result.lambda, result.value, result.bracket.0, result.bracket.1
    );
    write_report(
        out,
        sc,
        "tstar",
        json!({
            "lambda": result.lambda,
            "value": result.value,
            "bracket": [result.bracket.0, result.bracket.1],
            "method": match result.method {
                TStarMethod::ResonantLimit => "resonant_limit",
                TStarMethod::InteriorBisection => "interior_bisection",
            },
            "hi_solvable": result.hi_solvable,
            "lo_unsolvable": result.lo_unsolvable,
            "phi_component": dec.coeff,
            "lambda_plus": ctx.plus.value,
            "lambda_minus": ctx.minus.value,
        }),
    )?;
    Ok(())
}

pub fn diagram_outputs(
    out: &Path,
    diagram: &Diagram,
    eigenvalues: &[f64],
    title: &str,
) -> Result<()> {
    let mut csv = Csv::new(&[
        "branch_id",
        "arc_index",
        "lambda",
        "signed_sup_norm",
        "sign_class",
        "residual_sup",
    ]);
    for r in &diagram.rows {
        csv.row(&[
            r.branch_id.to_string(),
            r.arc_index.to_string(),
            fmt_f(r.lambda),
            fmt_f(r.signed_norm),
            r.sign_class.as_str().to_string(),
            fmt_f(r.residual_sup),
        ]);
    }
    write_atomic(&out.join("diagram.csv"), &csv.finish())?;
    let mut counts = Csv::new(&["lambda", "count"]);
    for (l, c) in &diagram.counts {
        counts.row(&[fmt_f(*l), c.to_string()]);
    }
    write_atomic(&out.join("counts.csv"), &counts.finish())?;
    write_atomic(
        &out.join("diagram.svg"),
        &diagram_svg(&diagram.polylines, eigenvalues, title),
    )?;
    Ok(())
}

pub fn cmd_branch(sc: &Scenario, out: &Path) -> Result<()> {
    let b = build(sc)?;
    let spec = sc.branch.as_ref().ok_or_else(|| hjb_core::Error::Config {
        path: "branch".into(),
        msg: "missing [branch] section".into(),
    })?;
    let ctx = EigenContext::compute(&b.dop)?;
    let opts = solver_opts(sc);
    let step = StepControl {
        initial: spec.step.unwrap_or(0.05),
        ..StepControl::default()
    };

    // resolve seeds, then trace branches (independent, so parallelizable)
    struct Job {
        start: BranchPoint,
        target: f64,
        provenance: Provenance,
    }
    let mut jobs: Vec<Job> = Vec::new();
    for (i, seed) in spec.seeds.iter().enumerate() {
        match seed.kind.as_str() {
            "from_plus_infinity" | "from_minus_infinity" => {
                let sign = if seed.kind.starts_with("from_plus") {
                    EigenSign::Plus
                } else {
                    EigenSign::Minus
                };
                let side = match seed.side.as_deref().unwrap_or("left") {
                    "left" => SeedSide::Left,
                    _ => SeedSide::Right,
                };
                let distance = seed.distance.unwrap_or(0.05);
                let start = seed_from_infinity(&b.dop, &ctx, &b.f, sign, side, distance, &opts)?;
                let target = match side {
                    SeedSide::Left => spec.lambda_min,
                    SeedSide::Right => spec.lambda_max,
                };
                jobs.push(Job {
                    start,
                    target,
                    provenance: match sign {
                        EigenSign::Plus => Provenance::FromPlusInfinity,
                        EigenSign::Minus => Provenance::FromMinusInfinity,
                    },
                });
            }
            "zero" | "proper" => {
                let lambda = seed.lambda.unwrap_or(spec.lambda_min);
                let u0 = if seed.kind == "zero" {
                    GridFunction::zeros(b.grid)
                } else {
                    let c0 = -b.dop.gamma - 1.0 - lambda.abs();
                    let f0 = b.grid.sample(|_, _| 0.0);
                    let g0 = {
                        let mut g0 = f0;
                        for i in 0..g0.len() {
                            g0.values[i] = b.f.eval(&b.grid, i, 0.0);
                        }
                        g0
                    };
                    solve_proper(&b.dop, c0, &g0, &opts)?
                        .into_converged()
                        .ok_or_else(|| hjb_core::Error::LinearSolveFailure(
                            format!("proper warm start for seed {i}"),
                        ))?
                };
                let rep = newton_solve(&b.dop, lambda, &b.f, &u0, &opts);
                let u = rep.into_converged().ok_or_else(|| hjb_core::Error::NoSeed(
                    format!("seed {i}: no solution near the requested start"),
                ))?;
                let start = BranchPoint::from_solution(&b.dop, &b.f, lambda, u, 0)?;
                jobs.push(Job {
                    start,
                    target: spec.lambda_max,
                    provenance: if seed.kind == "zero" {
                        Provenance::FromZero
                    } else {
                        Provenance::Bounded
                    },
                });
            }
            _ => unreachable!("validated"),
        }
    }

    let dop = &b.dop;
    let f = &b.f;
    let branches: Vec<Result<Branch, hjb_core::Error>> = par_map(jobs, sc.threads, |job| {
        continue_branch(dop, f, &job.start, job.target, &step, job.provenance, &opts)
    });
    let mut traced = Vec::new();
    for br in branches {
        traced.push(br?);
    }

    let lambda_grid: Vec<f64> = if spec.census_points > 1 {
        (0..spec.census_points)
            .map(|k| {
                spec.lambda_min
                    + (spec.lambda_max - spec.lambda_min) * k as f64
                        / (spec.census_points as f64 - 1.0)
            })
            .collect()
    } else {
        Vec::new()
    };
    let diagram = assemble_diagram(&traced, &lambda_grid);

    // independent census counts per grid point
    let census_counts: Vec<(f64, usize)> = lambda_grid
        .iter()
        .map(|&l| {
            (
                l,
                census(dop, &ctx, f, l, &CensusSpec::default(), &opts).len(),
            )
        })
        .collect();

    diagram_outputs(out, &diagram, &[ctx.plus.value, ctx.minus.value], "bifurcation diagram")?;
    let branches_json: Vec<serde_json::Value> = traced
        .iter()
        .map(|br| {
            json!({
                "provenance": br.provenance.as_str(),
                "points": br.points.len(),
                "lambda_range": [br.lambda_range().0, br.lambda_range().1],
                "folds": br.folds.iter().map(|fr| json!({"lambda": fr.lambda, "direction": fr.direction})).collect::<Vec<_>>(),
                "terminated": format!("{:?}", br.terminated),
            })
        })
        .collect();
    write_report(
        out,
        sc,
        "branch",
        json!({
            "lambda_plus": ctx.plus.value,
            "lambda_minus": ctx.minus.value,
            "branches": branches_json,
            "census_counts": census_counts,
        }),
    )?;
    eprintln!(
        "traced {} branch(es); diagram rows: {}",
        traced.len(),
        diagram.rows.len()
    );
    Ok(())
}

pub fn cmd_verify(sc: &Scenario, out: &Path) -> Result<bool> {
    let b = build(sc)?;
    let op = sc.build_operator()?;
    let opts = solver_opts(sc);
    let mut checks: Vec<(String, bool, String)> = Vec::new();
    let push = |checks: &mut Vec<(String, bool, String)>, name: &str, ok: bool, detail: String| {
        eprintln!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        checks.push((name.to_string(), ok, detail));
    };

    // eigen vs shooting (1D pure-diffusion operators only)
    if b.grid.dim() == 1 && b.dop.pure_diffusions.is_some() {
        let length = match b.grid.domain {
            Domain::Interval { length } => length,
            _ => unreachable!(),
        };
        let results: Vec<(EigenSign, f64, f64)> = par_map(
            vec![EigenSign::Plus, EigenSign::Minus],
            sc.threads,
            |sign| {
                let shoot = oracle::shooting_eigen_1d(&op, length, sign).unwrap_or(f64::NAN);
                let eig = principal_eigenpair(&b.dop, sign)
                    .map(|p| p.value)
                    .unwrap_or(f64::NAN);
                (sign, shoot, eig)
            },
        );
        for (sign, shoot, eig) in results {
            let rel = (eig - shoot).abs() / shoot.abs().max(1e-30);
            push(
                &mut checks,
                &format!("shooting-vs-eigen-{sign:?}"),
                rel < 0.01,
                format!("discrete {eig:.8} vs shooting {shoot:.8} (rel {rel:.2e})"),
            );
        }
    }

    // dense oracle vs policy solve on a linear operator
    {
        let lin = HJBOperator::laplacian();
        let dlin = discretize(&lin, b.grid)?;
        let rhs = b.grid.sample(|x, y| (3.0 * x).sin() - 0.4 * (y + 1.0));
        let u = solve_proper(&dlin, -1.0, &rhs, &opts)?
            .into_converged()
            .ok_or_else(|| hjb_core::Error::LinearSolveFailure("verify solve".into()))?;
        let uref = oracle::dense_solve_linear(&lin, b.grid, -1.0, &rhs)?;
        let err = u.sup_dist(&uref);
        push(
            &mut checks,
            "dense-vs-policy-solve",
            err < 1e-8,
            format!("sup distance {err:.3e}"),
        );
    }

    // pseudo-time relaxation vs policy solve on the configured operator
    if b.grid.len() <= 3600 {
        let rhs = b.grid.sample(|x, _| (2.0 * x).cos() - 0.5);
        let shift = -b.dop.gamma - 1.0;
        let u = solve_proper(&b.dop, shift, &rhs, &opts)?
            .into_converged()
            .ok_or_else(|| hjb_core::Error::LinearSolveFailure("verify solve".into()))?;
        match oracle::pseudo_time_solve(&b.dop, shift, &rhs, 1e-11, 4_000_000) {
            Ok(urel) => {
                let err = u.sup_dist(&urel);
                push(
                    &mut checks,
                    "pseudo-time-vs-policy-solve",
                    err < 1e-7,
                    format!("sup distance {err:.3e}"),
                );
            }
            Err(e) => push(&mut checks, "pseudo-time-vs-policy-solve", false, e.to_string()),
        }
    }

    // Richardson order of the plus eigenvalue under grid refinement
    if b.grid.dim() == 1 {
        let base_n = b.grid.n.clamp(50, 150);
        let vals: Vec<f64> = par_map(vec![base_n, 2 * base_n, 4 * base_n], sc.threads, |n| {
            let g = Grid::new(b.grid.domain, n).unwrap();
            let d = discretize(&op, g).unwrap();
            principal_eigenpair(&d, EigenSign::Plus).map(|p| p.value).unwrap_or(f64::NAN)
        });
        match oracle::richardson_order(vals[0], vals[1], vals[2]) {
            Ok(order) => push(
                &mut checks,
                "eigen-richardson-order",
                order >= 1.8,
                format!("order {order:.3} from {vals:?}"),
            ),
            Err(e) => push(&mut checks, "eigen-richardson-order", false, e.to_string()),
        }
    }

    // quadrature order on a smooth integrand
    {
        let exact = 2.0 / std::f64::consts::PI;
        let errs: Vec<f64> = [100usize, 200, 400]
            .iter()
            .map(|&n| {
                let g = Grid::new(Domain::Interval { length: 1.0 }, n).unwrap();
                (integrate(&g.sample(|x, _| (std::f64::consts::PI * x).sin())) - exact).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
        push(
            &mut checks,
            "quadrature-order",
            order >= 1.9,
            format!("order {order:.3}"),
        );
    }

    // structural identities on the configured operator
    {
        let rep = check_structure(&b.dop, 50, sc.seed);
        push(
            &mut checks,
            "structure-identities",
            rep.pass,
            format!(
                "homogeneity {:.2e}, subadditivity {:.2e}, sandwich {:.2e}",
                rep.worst_homogeneity, rep.worst_subadditivity, rep.worst_sandwich
            ),
        );
    }

    let all_ok = checks.iter().all(|(_, ok, _)| *ok);
    write_report(
        out,
        sc,
        "verify",
        json!({
            "checks": checks
                .iter()
                .map(|(n, ok, d)| json!({"name": n, "pass": ok, "detail": d}))
                .collect::<Vec<_>>(),
            "all_pass": all_ok,
        }),
    )?;
    Ok(all_ok)
}
