//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities once its assertions hold. Tolerances are pinned
//! here, not configurable.

use hjb_core::util::linear_fit;
use hjb_core::*;
use std::sync::OnceLock;
use std::time::Instant;

const PI2: f64 = 9.869604401089358;

fn interval_setup(n: usize) -> (Grid, DiscreteOperator, EigenContext) {
    let g = Grid::new(Domain::Interval { length: 1.0 }, n).unwrap();
    let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
    let ctx = EigenContext::compute(&dop).unwrap();
    (g, dop, ctx)
}

/// Barenblatt(1,2) on the unit interval with n = 120, shared by the
/// threshold criteria.
fn shared() -> &'static (Grid, DiscreteOperator, EigenContext) {
    static CELL: OnceLock<(Grid, DiscreteOperator, EigenContext)> = OnceLock::new();
    CELL.get_or_init(|| interval_setup(120))
}

#[test]
fn criterion_01_barenblatt_half_eigenvalues() {
    let start = Instant::now();
    let (_, dop, _) = interval_setup(400);
    let plus = principal_eigenpair(&dop, EigenSign::Plus).unwrap();
    let minus = principal_eigenpair(&dop, EigenSign::Minus).unwrap();
    let op = HJBOperator::barenblatt(1.0, 2.0).unwrap();
    let shoot_plus = oracle::shooting_eigen_1d(&op, 1.0, EigenSign::Plus).unwrap();
    let shoot_minus = oracle::shooting_eigen_1d(&op, 1.0, EigenSign::Minus).unwrap();
    let elapsed = start.elapsed();

    let rel_plus = (plus.value - PI2).abs() / PI2;
    let rel_minus = (minus.value - 2.0 * PI2).abs() / (2.0 * PI2);
    assert!(rel_plus < 0.01, "plus {} vs pi^2 (rel {rel_plus:.2e})", plus.value);
    assert!(
        rel_minus < 0.01,
        "minus {} vs 2 pi^2 (rel {rel_minus:.2e})",
        minus.value
    );
    assert!(
        (shoot_plus - PI2).abs() < 1e-6,
        "shooting plus {shoot_plus} vs analytic"
    );
    assert!(
        (shoot_minus - 2.0 * PI2).abs() < 2e-6,
        "shooting minus {shoot_minus} vs analytic"
    );
    assert!(elapsed.as_secs_f64() < 10.0, "runtime {elapsed:?}");
    println!(
        "ACCEPTANCE 1: PASS - lambda+ = {:.6} (rel {:.1e}), lambda- = {:.6} (rel {:.1e}), \
         shooting within {:.1e}/{:.1e}, runtime {elapsed:?}",
        plus.value,
        rel_plus,
        minus.value,
        rel_minus,
        (shoot_plus - PI2).abs(),
        (shoot_minus - 2.0 * PI2).abs()
    );
}

#[test]
fn criterion_02_pucci_vs_shooting() {
    let g = Grid::new(Domain::Interval { length: 1.0 }, 300).unwrap();
    let op = HJBOperator::pucci_plus(1.0, 2.0).unwrap();
    let dop = discretize(&op, g).unwrap();
    let plus = principal_eigenpair(&dop, EigenSign::Plus).unwrap().value;
    let minus = principal_eigenpair(&dop, EigenSign::Minus).unwrap().value;
    let sp = oracle::shooting_eigen_1d(&op, 1.0, EigenSign::Plus).unwrap();
    let sm = oracle::shooting_eigen_1d(&op, 1.0, EigenSign::Minus).unwrap();
    assert!((plus - sp).abs() / sp < 0.01, "plus {plus} vs shooting {sp}");
    assert!((minus - sm).abs() / sm < 0.01, "minus {minus} vs shooting {sm}");
    // the shooting values themselves sit at pi^2 and 2 pi^2
    assert!((sp - PI2).abs() < 1e-6 && (sm - 2.0 * PI2).abs() < 2e-6);
    println!(
        "ACCEPTANCE 2: PASS - pucci plus {plus:.6} / minus {minus:.6} within 1% of shooting \
         ({sp:.6}, {sm:.6})"
    );
}

#[test]
fn criterion_03_linear_degeneration_fredholm() {
    let g = Grid::new(Domain::Interval { length: 1.0 }, 200).unwrap();
    let dop = discretize(&HJBOperator::laplacian(), g).unwrap();
    let ctx = EigenContext::compute(&dop).unwrap();
    let pi = std::f64::consts::PI;
    let ds = [
        g.sample(|x, _| x),
        g.sample(|x, _| (2.0 * pi * x).cos() * 0.7 + 0.2),
        g.sample(|x, _| (-(x - 0.3) * (x - 0.3) * 20.0).exp()),
    ];
    let mut details = Vec::new();
    for (i, d) in ds.iter().enumerate() {
        let expect = tstar::fredholm_tstar(d, &ctx.plus.efun);
        let r = tstar_resonant(&dop, &ctx, true, d, &TStarOptions::default()).unwrap();
        let err = (r.value - expect).abs();
        assert!(
            err < 2e-3,
            "d[{i}]: t* = {} vs Fredholm {expect} (err {err:.2e})",
            r.value
        );
        details.push(format!("{err:.2e}"));
    }
    println!(
        "ACCEPTANCE 3: PASS - t* matches -<d,phi> for 3 right-hand sides (errors {})",
        details.join(", ")
    );
}

#[test]
fn criterion_04_decomposition_identity() {
    let (g, dop, ctx) = shared();
    let h = g.sample(|x, _| x);
    let dec = decompose(&h, &ctx.plus.efun);
    let opts = &TStarOptions::default();
    let mid = 0.5 * (ctx.plus.value + ctx.minus.value);
    let mut details = Vec::new();
    let runs: Vec<(&str, Box<dyn Fn(&GridFunction) -> Result<TStarResult>>)> = vec![
        (
            "plus",
            Box::new(move |d: &GridFunction| tstar_resonant(dop, ctx, true, d, opts)),
        ),
        (
            "mid",
            Box::new(move |d: &GridFunction| tstar_interior(dop, ctx, mid, d, opts)),
        ),
        (
            "minus",
            Box::new(move |d: &GridFunction| tstar_resonant(dop, ctx, false, d, opts)),
        ),
    ];
    for (label, run) in runs {
        let full = run(&h).unwrap();
        let perp = run(&dec.perp).unwrap();
        let err = (full.value - (perp.value - dec.coeff)).abs();
        let allowed = 2.0 * (full.width() + perp.width());
        assert!(
            err <= allowed,
            "{label}: t*(h) = {} vs t*(h_perp) - coeff = {} (err {err:.2e} > {allowed:.2e})",
            full.value,
            perp.value - dec.coeff
        );
        details.push(format!("{label} err {err:.2e}"));
    }
    println!(
        "ACCEPTANCE 4: PASS - t*(h) = t*(h_perp) - <h,phi> at both endpoints and the midpoint ({})",
        details.join(", ")
    );
}

#[test]
fn criterion_05_sign_of_thresholds() {
    let (g, dop, ctx) = shared();
    let opts = TStarOptions::default();
    let pi = std::f64::consts::PI;
    let ds = [
        GridFunction::constant(*g, 1.0),
        g.sample(|x, _| x),
        g.sample(|x, _| (pi * x).sin().powi(2) + 0.1),
    ];
    for (i, d) in ds.iter().enumerate() {
        for plus_side in [true, false] {
            let r = tstar_resonant(dop, ctx, plus_side, d, &opts).unwrap();
            assert!(
                r.bracket.1 < 0.0,
                "nonneg d[{i}], side {plus_side}: bracket {:?} not strictly negative",
                r.bracket
            );
            let rneg = tstar_resonant(dop, ctx, plus_side, &d.scale(-1.0), &opts).unwrap();
            assert!(
                rneg.bracket.0 > 0.0,
                "nonpos d[{i}], side {plus_side}: bracket {:?} not strictly positive",
                rneg.bracket
            );
        }
    }
    println!(
        "ACCEPTANCE 5: PASS - t*+ and t*- negative for 3 nonnegative d (positive when mirrored), \
         brackets clear zero"
    );
}

#[test]
fn criterion_06_endpoint_continuity() {
    let (g, dop, ctx) = shared();
    let d = g.sample(|x, _| x);
    let opts = TStarOptions::default();
    let tp = tstar_resonant(dop, ctx, true, &d, &opts).unwrap();
    let t3 = tstar_interior(dop, ctx, ctx.plus.value + 1e-3, &d, &opts).unwrap();
    let t4 = tstar_interior(dop, ctx, ctx.plus.value + 1e-4, &d, &opts).unwrap();
    let d3 = (t3.value - tp.value).abs();
    let d4 = (t4.value - tp.value).abs();
    assert!(d3 <= 5e-2, "offset 1e-3: |t*_lambda - t*_+| = {d3:.3e}");
    assert!(d4 <= 5e-2, "offset 1e-4: |t*_lambda - t*_+| = {d4:.3e}");
    // decrease, up to the measurement resolution of the three brackets
    let slack = t3.width() + t4.width() + tp.width();
    assert!(
        d4 <= d3 + slack,
        "distance did not shrink: {d4:.3e} vs {d3:.3e} (slack {slack:.1e})"
    );
    println!(
        "ACCEPTANCE 6: PASS - |t*_lambda - t*_+| = {d3:.2e} at offset 1e-3, {d4:.2e} at 1e-4 \
         (decreasing within bracket resolution)"
    );
}

#[test]
fn criterion_07_signed_sqrt_branch_structure() {
    let (_, dop, ctx) = interval_setup(150);
    let dop = &dop;
    let ctx = &ctx;
    let f = Nonlinearity::new("ex2", BaseProfile::SignedSqrt { coeff: -1.0 }, None).unwrap();
    let opts = SolverOptions::default();

    let mut fit_details = Vec::new();
    for (sign, eig, want) in [
        (EigenSign::Plus, ctx.plus.value, SignClass::Positive),
        (EigenSign::Minus, ctx.minus.value, SignClass::Negative),
    ] {
        let seed = seed_from_infinity(dop, ctx, &f, sign, SeedSide::Left, 0.05, &opts).unwrap();
        let br = continue_branch(
            dop,
            &f,
            &seed,
            eig - 1.0,
            &StepControl::default(),
            Provenance::FromPlusInfinity,
            &opts,
        )
        .unwrap();
        assert_eq!(br.terminated, branch::Termination::TargetReached);
        assert!(br.lambda_range().0 <= eig - 1.0 + 1e-9, "window not covered");
        assert!(br.points.iter().all(|p| p.sign_class == want), "sign flip on branch");
        assert!(br.folds.is_empty(), "branch turned");

        // sup-norm fit against 1/(eig - lambda) near the eigenvalue
        let dists = [0.11, 0.10, 0.09, 0.08, 0.07, 0.06];
        let mut warm = seed.u.clone();
        let mut norms = Vec::new();
        for &dd in &dists {
            let u = newton_solve(dop, eig - dd, &f, &warm, &opts)
                .into_converged()
                .expect("fit solve");
            norms.push(norm(&u, NormKind::Sup));
            warm = u;
        }
        let xs: Vec<f64> = dists.iter().map(|x| 1.0 / x).collect();
        let (_, slope, r2) = linear_fit(&xs, &norms);
        assert!(r2 >= 0.99 && slope > 0.0, "fit R2 = {r2:.5}, slope {slope:.3}");
        fit_details.push(format!("{sign:?}: R2 = {r2:.4}"));
    }

    // positive-solution uniqueness: 5 lambdas, 10 multistarts each
    for dd in [0.8, 0.6, 0.4, 0.25, 0.12] {
        let lam = ctx.plus.value - dd;
        let reference = newton_solve(dop, lam, &f, &ctx.plus.efun.scale(1.0 / (dd * dd)), &opts)
            .into_converged()
            .expect("reference");
        assert_eq!(classify_sign(&reference), SignClass::Positive);
        let nref = norm(&reference, NormKind::Sup);
        for j in 0..10 {
            // amplitudes from half the solution scale upward: below that the
            // iteration leaves the positive basin
            let amp = nref * 2f64.powi(j - 1) / std::f64::consts::SQRT_2;
            let u = newton_solve(dop, lam, &f, &ctx.plus.efun.scale(amp), &opts)
                .into_converged()
                .unwrap_or_else(|| panic!("start {j} at lambda = {lam}"));
            assert!(
                u.sup_dist(&reference) <= 1e-6 * (1.0 + nref),
                "distinct positive limit at lambda = {lam}, start {j}"
            );
        }
    }
    println!(
        "ACCEPTANCE 7: PASS - blow-up branches cover [eig-1, eig), never turn ({}), \
         positive solution unique at 5 lambdas x 10 starts",
        fit_details.join("; ")
    );
}

#[test]
fn criterion_08_nonexistence_window() {
    let (g, dop, ctx) = shared();
    let opts = SolverOptions::default();
    let tso = TStarOptions::default();
    let h = g.sample(|x, _| (std::f64::consts::PI * x).cos());
    let tp = tstar_resonant(dop, ctx, true, &h, &tso).unwrap();
    let lambda = ctx.plus.value + 0.25 * ctx.gap();
    let tl = tstar_interior(dop, ctx, lambda, &h, &tso).unwrap();
    assert!(
        tl.value > tp.value + 2.0 * (tl.width() + tp.width()),
        "no window: t*_lambda = {} vs t*_+ = {}",
        tl.value,
        tp.value
    );

    let tbar = 0.5 * (tp.value + tl.value);
    let eps = 0.5 * (tbar - tp.value);
    let m_cap = ctx.c_abp * norm(&h.add_scaled(tbar, &ctx.plus.efun), NormKind::Sup) + 1.0;
    let f = Nonlinearity::new(
        "gated",
        BaseProfile::GatedForcing {
            hi: tbar,
            lo: tp.value - eps,
            m: m_cap,
            shape: ctx.plus.efun.clone(),
        },
        Some(h.clone()),
    )
    .unwrap();

    // the census over the full nonlinear problem is empty in the window
    let pts = census(dop, ctx, &f, lambda, &CensusSpec::default(), &opts);
    assert!(pts.is_empty(), "census found {} solutions", pts.len());

    let bud = ProbeBudget::default();
    let below = solvability_probe_with(dop, ctx, lambda, &h.add_scaled(tbar, &ctx.plus.efun), &bud);
    assert!(below.is_unsolvable(), "probe at tbar not unsolvable: {below:?}");

    // control arms: raising t above the interior threshold restores
    // solvability at the window lambda, and the resonant threshold pair
    // behaves as stated
    let hi = tl.value + 0.05 * (1.0 + norm(&h, NormKind::Sup));
    let above = solvability_probe_with(dop, ctx, lambda, &h.add_scaled(hi, &ctx.plus.efun), &bud);
    assert!(above.is_solvable(), "probe above t*_lambda not solvable");
    let res_below = solvability_probe_with(
        dop,
        ctx,
        ctx.plus.value,
        &h.add_scaled(tp.value - 0.2, &ctx.plus.efun),
        &bud,
    );
    let res_above = solvability_probe_with(
        dop,
        ctx,
        ctx.plus.value,
        &h.add_scaled(tp.value + 0.2, &ctx.plus.efun),
        &bud,
    );
    assert!(res_below.is_unsolvable(), "resonant below-threshold probe");
    assert!(res_above.is_solvable(), "resonant above-threshold probe");
    println!(
        "ACCEPTANCE 8: PASS - empty census and unsolvable probes in the window \
         (t*_+ = {:.4}, t*_lambda = {:.4}, tbar = {tbar:.4}); solvability restored above \
         t*_lambda and across the resonant threshold",
        tp.value, tl.value
    );
}

#[test]
fn criterion_09_multiplicity_counts() {
    let (g, dop, ctx) = shared();
    let f = Nonlinearity::new(
        "growth",
        BaseProfile::PowerGrowth { alpha: 0.5 },
        Some(GridFunction::constant(*g, 1.0)),
    )
    .unwrap();
    let opts = SolverOptions::default();
    let tso = TStarOptions::default();

    // hypothesis checks: one-sided threshold conditions on both sides
    let lp = check_landesman(&f, dop, ctx, LLSide::EllPlus, None, &tso).unwrap();
    let lm = check_landesman(&f, dop, ctx, LLSide::EllMinus, None, &tso).unwrap();
    assert_eq!(lp.verdict, Verdict::Holds, "{:?}", lp.note);
    assert_eq!(lm.verdict, Verdict::Holds, "{:?}", lm.note);
    let (f1, f2) = check_f1_f2(&f, g);
    assert_eq!(f1.verdict, Verdict::Holds);
    assert_eq!(f2.verdict, Verdict::Holds);
    assert_eq!(check_sublinear(&f, g).verdict, Verdict::Holds);

    let spec = CensusSpec::default();
    let gap = ctx.gap();
    for lam in [ctx.plus.value - 5.0, ctx.plus.value - 0.5] {
        let n = census(dop, ctx, &f, lam, &spec, &opts).len();
        assert!(n >= 1, "lambda = {lam}: census {n} < 1");
    }
    for lam in [
        ctx.plus.value + 0.3 * gap,
        ctx.plus.value + 0.7 * gap,
        ctx.minus.value,
    ] {
        let n = census(dop, ctx, &f, lam, &spec, &opts).len();
        assert!(n >= 2, "lambda = {lam}: census {n} < 2");
    }
    // scan for a delta with at least three distinct solutions
    let mut found = None;
    for frac in [0.005, 0.01, 0.02, 0.03] {
        let lam = ctx.minus.value + frac * gap;
        let n = census(dop, ctx, &f, lam, &spec, &opts).len();
        if n >= 3 {
            found = Some((frac, n));
            break;
        }
    }
    let (frac, n) = found.expect("no delta with a triple census found");
    println!(
        "ACCEPTANCE 9: PASS - threshold conditions hold; census >= 1 left, >= 2 across the gap, \
         {n} solutions at lambda- + {frac} * gap"
    );
}

#[test]
fn criterion_10_decay_far_left() {
    let g = Grid::new(Domain::Interval { length: 2.0 }, 140).unwrap();
    let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
    let ctx = EigenContext::compute(&dop).unwrap();
    let f = Nonlinearity::new(
        "model",
        BaseProfile::PowerDecay { alpha: 0.75 },
        Some(GridFunction::constant(g, 1.0)),
    )
    .unwrap();
    let opts = SolverOptions::default();
    let mut products = Vec::new();
    let mut census_sizes = Vec::new();
    for lam in [-20.0, -50.0, -100.0, -200.0] {
        let pts = census(&dop, &ctx, &f, lam, &CensusSpec::default(), &opts);
        assert!(!pts.is_empty(), "no solution found at lambda = {lam}");
        census_sizes.push(pts.len());
        products.push(
            pts.iter()
                .map(|p| p.sup_norm * lam.abs())
                .fold(0.0, f64::max),
        );
    }
    let hi = products.iter().cloned().fold(0.0, f64::max);
    let lo = products.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(hi <= 5.0, "product not bounded: {products:?}");
    let variation = (hi - lo) / hi;
    assert!(variation <= 0.20, "variation {variation:.3} > 20%: {products:?}");
    assert_eq!(*census_sizes.last().unwrap(), 1, "multiple solutions at lambda = -200");
    println!(
        "ACCEPTANCE 10: PASS - ||u|| * |lambda| in [{lo:.3}, {hi:.3}] (variation {:.1}%), \
         single census point at lambda = -200",
        100.0 * variation
    );
}

#[test]
fn criterion_11_structure_suites() {
    // identities at a resolution where the 1e-10 absolute bound is beyond
    // roundoff
    let (_, dop60, _) = interval_setup(60);
    let rep = check_structure(&dop60, 100, 2024);
    assert!(rep.pass);
    assert!(rep.worst_homogeneity <= 1e-10, "{rep:?}");
    assert!(rep.worst_subadditivity <= 1e-10, "{rep:?}");
    assert!(rep.worst_sandwich <= 1e-10, "{rep:?}");

    // discrete comparison on 100 random ordered pairs
    let (g, dop, ctx) = shared();
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let opts = SolverOptions::default();
    for _ in 0..100 {
        let g1 = GridFunction {
            grid: *g,
            values: (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let g2 = GridFunction {
            grid: *g,
            values: g1.values.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect(),
        };
        let u1 = solve_proper(dop, -1.0, &g1, &opts)
            .unwrap()
            .into_converged()
            .unwrap();
        let u2 = solve_proper(dop, -1.0, &g2, &opts)
            .unwrap()
            .into_converged()
            .unwrap();
        // larger right-hand side pushes the proper solution down
        assert!(u2.le(&u1, 1e-11), "comparison principle violated");
    }

    // eigen residual certificates
    for (pair, name) in [(&ctx.plus, "plus"), (&ctx.minus, "minus")] {
        assert!(
            pair.residual_sup <= 1e-8 * pair.value.abs(),
            "{name} residual {:.2e}",
            pair.residual_sup
        );
    }

    // Richardson order of the plus half-eigenvalue
    let vals: Vec<f64> = [100usize, 200, 400]
        .iter()
        .map(|&n| {
            let (_, d, _) = interval_setup(n);
            principal_eigenpair(&d, EigenSign::Plus).unwrap().value
        })
        .collect();
    let order = oracle::richardson_order(vals[0], vals[1], vals[2]).unwrap();
    assert!(order >= 1.8, "richardson order {order}");
    println!(
        "ACCEPTANCE 11: PASS - identities within 1e-10, comparison principle on 100 pairs, \
         eigen residuals certified, Richardson order {order:.2}"
    );
}
