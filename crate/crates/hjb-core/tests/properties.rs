//! Cross-module invariants that tie the solvers, the eigen machinery and
//! the oracles together.

use hjb_core::*;
use std::sync::OnceLock;

fn shared() -> &'static (Grid, DiscreteOperator, EigenContext) {
    static CELL: OnceLock<(Grid, DiscreteOperator, EigenContext)> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = Grid::new(Domain::Interval { length: 1.0 }, 120).unwrap();
        let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
        let ctx = EigenContext::compute(&dop).unwrap();
        (g, dop, ctx)
    })
}

#[test]
fn near_eigenvalue_normalization_along_branch() {
    let (_, dop, ctx) = shared();
    let f = Nonlinearity::new("ex2", BaseProfile::SignedSqrt { coeff: -1.0 }, None).unwrap();
    let opts = SolverOptions::default();
    // seed very close to the eigenvalue (norm ~ dist^-2 is beyond the
    // standard amplitude sweep, so solve for the start directly)
    let lam0 = ctx.plus.value - 0.02;
    let u0 = newton_solve(dop, lam0, &f, &ctx.plus.efun.scale(3000.0), &opts)
        .into_converged()
        .expect("seed solve");
    let seed = branch::BranchPoint::from_solution(dop, &f, lam0, u0, 0).unwrap();
    assert_eq!(seed.sign_class, SignClass::Positive);
    let br = continue_branch(
        dop,
        &f,
        &seed,
        ctx.plus.value - 0.5,
        &StepControl {
            initial: 0.02,
            ..StepControl::default()
        },
        Provenance::FromPlusInfinity,
        &opts,
    )
    .unwrap();
    let phi_hat = ctx.plus.efun.scale(1.0 / norm(&ctx.plus.efun, NormKind::Sup));
    let mut checked = 0;
    for p in &br.points {
        if p.sup_norm >= 100.0 && (p.lambda - ctx.plus.value).abs() <= 0.05 {
            let u_hat = p.u.scale(1.0 / p.sup_norm);
            assert!(
                u_hat.sup_dist(&phi_hat) <= 0.05,
                "normalized iterate {:.3} away from the eigenfunction at lambda = {}",
                u_hat.sup_dist(&phi_hat),
                p.lambda
            );
            checked += 1;
        }
    }
    assert!(checked >= 3, "only {checked} large-norm points near the eigenvalue");
    // sign persists along the whole traced branch (norms never drop below
    // the data scale here)
    assert!(br.points.iter().all(|p| p.sign_class == SignClass::Positive));
}

#[test]
fn restoring_profile_far_left_and_triviality() {
    let (_, dop, ctx) = shared();
    let f = Nonlinearity::new("restoring", BaseProfile::RestoringSqrt, None).unwrap();
    let opts = SolverOptions::default();
    for lam in [-20.0, -200.0] {
        let pts = census(dop, ctx, &f, lam, &CensusSpec::default(), &opts);
        assert_eq!(pts.len(), 1, "lambda = {lam}");
        assert_eq!(pts[0].sign_class, SignClass::Zero);
    }
}

#[test]
fn fucik_two_control_form_is_exact() {
    use rand::prelude::*;
    let g = Grid::new(Domain::Interval { length: 1.0 }, 80).unwrap();
    let (a, b) = (0.7, 2.3);
    let dop = discretize(&HJBOperator::fucik(a, b).unwrap(), g).unwrap();
    let lap = discretize(&HJBOperator::laplacian(), g).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let u = GridFunction {
            grid: g,
            values: (0..g.len()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        let fu = dop.apply(&u).unwrap();
        let lap_u = lap.apply(&u).unwrap();
        // roundoff scale is set by the stencil magnitude, not the result
        let tol = 1e-13 * norm(&lap_u, NormKind::Sup).max(1.0);
        for i in 0..g.len() {
            let v = u.values[i];
            let expect = lap_u.values[i] + b * v.max(0.0) + a * v.min(0.0);
            assert!(
                (fu.values[i] - expect).abs() <= tol,
                "node {i}: {} vs {expect}",
                fu.values[i]
            );
        }
    }
}

#[test]
fn rectangle_dense_oracle_agreement() {
    let g = Grid::new(Domain::Rectangle { lx: 1.0, ly: 1.5 }, 18).unwrap();
    let lin = HJBOperator::laplacian();
    let dop = discretize(&lin, g).unwrap();
    let opts = SolverOptions::default();
    let rhs = g.sample(|x, y| (2.0 * x).sin() * (y - 0.4));
    let u = solve_proper(&dop, -1.0, &rhs, &opts)
        .unwrap()
        .into_converged()
        .unwrap();
    let uref = oracle::dense_solve_linear(&lin, g, -1.0, &rhs).unwrap();
    assert!(u.sup_dist(&uref) < 1e-9);

    // sign structure for the extremal operator on the rectangle
    let dop2 = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
    let upos = solve_proper(&dop2, -1.0, &GridFunction::constant(g, -1.0), &opts)
        .unwrap()
        .into_converged()
        .unwrap();
    assert!(upos.min() >= 0.0);
}

#[test]
fn exhaustive_scan_brackets_resonant_threshold() {
    // coarse grid so the widened probe budget stays cheap
    let g = Grid::new(Domain::Interval { length: 1.0 }, 60).unwrap();
    let dop = discretize(&HJBOperator::barenblatt(1.0, 2.0).unwrap(), g).unwrap();
    let ctx = EigenContext::compute(&dop).unwrap();
    let d = g.sample(|x, _| x);
    let r = tstar_resonant(&dop, &ctx, true, &d, &TStarOptions::default()).unwrap();
    let step = 0.05;
    let t_grid: Vec<f64> = (-14..=6).map(|k| r.value + step * k as f64).collect();
    let scan = oracle::exhaustive_tstar_scan(&dop, &ctx, ctx.plus.value, &d, &t_grid).unwrap();
    assert!(
        (scan.bracket.0 - r.value).abs() <= 2.0 * step
            && (scan.bracket.1 - r.value).abs() <= 2.0 * step,
        "scan bracket {:?} vs bisection value {}",
        scan.bracket,
        r.value
    );
}

#[test]
fn continuity_scan_translation_and_shrinking() {
    let (g, dop, ctx) = shared();
    let d = g.sample(|x, _| (3.0 * x).cos());
    let opts = TStarOptions::default();
    let w = g.sample(|x, _| (5.0 * x).sin());
    let w_perp = decompose(&w, &ctx.plus.efun).perp;
    let perturbations = vec![
        (ctx.plus.efun.clone(), 0.0),
        (ctx.plus.efun.clone(), 0.5),
        (w_perp.clone(), 0.1),
        (w_perp, 0.01),
    ];
    let rep = tstar_continuity_scan(dop, ctx, true, &d, &perturbations, &opts, 2).unwrap();
    let wsum = 2.0 * rep.base.width();
    // eps = 0: no change beyond bracket resolution
    assert!(rep.entries[0].delta_tstar.abs() <= wsum);
    // w along the eigenfunction: exact translation
    assert!(
        (rep.entries[1].delta_tstar + 0.5).abs() <= 2.0 * wsum,
        "translation delta {}",
        rep.entries[1].delta_tstar
    );
    // orthogonal perturbations: effect shrinks with eps
    assert!(
        rep.entries[3].delta_tstar.abs() <= rep.entries[2].delta_tstar.abs() + 2.0 * wsum,
        "no shrinkage: {} vs {}",
        rep.entries[3].delta_tstar,
        rep.entries[2].delta_tstar
    );
}

#[test]
fn probe_trivial_cases() {
    let (g, dop, ctx) = shared();
    let bud = ProbeBudget::default();
    // zero right-hand side below the first half-eigenvalue: solvable by zero
    let out = solvability_probe_with(dop, ctx, ctx.plus.value - 2.0, &GridFunction::zeros(*g), &bud);
    match out {
        ProbeOutcome::Solvable { u } => assert!(norm(&u, NormKind::Sup) < 1e-9),
        other => panic!("expected solvable, got {other:?}"),
    }
}

#[test]
fn seed_right_of_plus_for_growth_profile() {
    // with the left-threshold condition holding, a large positive solution
    // sits just right of the plus half-eigenvalue
    let (g, dop, ctx) = shared();
    let f = Nonlinearity::new(
        "growth",
        BaseProfile::PowerGrowth { alpha: 0.5 },
        Some(GridFunction::constant(*g, 1.0)),
    )
    .unwrap();
    let opts = SolverOptions::default();
    let seed = seed_from_infinity(dop, ctx, &f, EigenSign::Plus, SeedSide::Right, 0.05, &opts)
        .unwrap();
    assert_eq!(seed.sign_class, SignClass::Positive);
    assert!(seed.sup_norm >= 20.0, "norm {}", seed.sup_norm);
    assert!(seed.lambda > ctx.plus.value);
}

#[test]
fn construct_dr_for_gated_and_model_profiles() {
    let (g, dop, ctx) = shared();
    let _ = dop;
    // gated profile: finite minus-side limits; the minus_upper side bounds
    // f from above for deeply negative arguments
    let f = Nonlinearity::new(
        "gated",
        BaseProfile::GatedForcing {
            hi: 1.0,
            lo: -0.5,
            m: 2.0,
            shape: GridFunction::constant(*g, 1.0),
        },
        None,
    )
    .unwrap();
    let c = GridFunction::constant(*g, -0.5);
    let (d, r) = construct_dr(&f, DRSide::MinusUpper, &c, 0.3, &ctx.plus.efun).unwrap();
    for mult in [1.0, 2.0] {
        let u = ctx.plus.efun.scale(-r * mult);
        for i in 0..g.len() {
            assert!(f.eval(g, i, u.values[i]) <= d.values[i] + 1e-12);
        }
    }
    // noise on top of the threshold amplitude keeps the implication
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let noisy = GridFunction {
        grid: *g,
        values: (0..g.len())
            .map(|i| -r * ctx.plus.efun.values[i] - rng.gen_range(0.0..0.5))
            .collect(),
    };
    for i in 0..g.len() {
        assert!(f.eval(g, i, noisy.values[i]) <= d.values[i] + 1e-12);
    }
}

#[test]
fn signed_sqrt_positive_solution_at_zero_lambda() {
    // far below the plus half-eigenvalue the positive solution is unique
    // and reachable from different eigenfunction amplitudes
    let (_, dop, ctx) = shared();
    let f = Nonlinearity::new("ex2", BaseProfile::SignedSqrt { coeff: -1.0 }, None).unwrap();
    let opts = SolverOptions::default();
    let a = newton_solve(dop, 0.0, &f, &ctx.plus.efun.scale(5.0), &opts)
        .into_converged()
        .expect("from 5 phi");
    let b = newton_solve(dop, 0.0, &f, &ctx.plus.efun.scale(20.0), &opts)
        .into_converged()
        .expect("from 20 phi");
    assert_eq!(classify_sign(&a), SignClass::Positive);
    assert!(a.sup_dist(&b) <= 1e-8 * (1.0 + norm(&a, NormKind::Sup)));
}
