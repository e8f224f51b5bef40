//! Acceptance suite: thirteen end-to-end criteria covering the whole stack,
//! one test (and one pass/fail line) per criterion. Each criterion carries a
//! wall-clock budget that is asserted alongside the numerical checks.
//!
//! Run with `cargo test --test acceptance`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subvarlap::lebesgue::{luxemburg_norm, luxemburg_norm_density, modular};
use subvarlap::muckenhoupt::{
    apq_constant_estimate, apq_enrichment_series, apq_refinement_series, classify_membership,
    BallFamily, MembershipVerdict,
};
use subvarlap::operators::{
    fractional_integral, maximal_operator, operator_norm_estimate, probe_family,
    rubio_de_francia, weak_type_check,
};
use subvarlap::plaplacian::{
    coercivity_probe, energy, energy_gradient, solve_dirichlet, solve_dirichlet_from,
    weak_residual, DirichletProblem, EllipticityField, SolverSettings,
};
use subvarlap::poincare::{
    central_ball, poincare_ratio, ratio_sweep, representation_check, GeneratorId, InequalityKind,
    RatioMode, TestFunctionFamily,
};
use subvarlap::{CarnotGroup, ExponentField, GridDomain, GridFunction, Point, Weight};

fn assert_budget(started: Instant, budget: Duration, what: &str) {
    let elapsed = started.elapsed();
    assert!(
        elapsed <= budget,
        "{what}: {elapsed:?} exceeded the {budget:?} budget"
    );
}

fn random_function(dom: &GridDomain, rng: &mut ChaCha8Rng) -> GridFunction {
    let values = (0..dom.cell_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    GridFunction::new(dom.clone(), values).unwrap()
}

/// Criterion 1 — Luxemburg norm against the constant-exponent closed form
/// `(∫|f|^p)^{1/p}` for p ∈ {1, 1.5, 2, 3}, 50 random functions, 10⁻⁸
/// relative.
#[test]
fn c01_luxemburg_constant_exponent_oracle() {
    let started = Instant::now();
    let dom = GridDomain::unit_box(&[256]).unwrap();
    let cell = dom.cell_measure();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..50 {
        let p = [1.0, 1.5, 2.0, 3.0][trial % 4];
        let f = random_function(&dom, &mut rng);
        let pf = ExponentField::constant(dom.clone(), p).unwrap();
        let got = luxemburg_norm(&f, &pf, None).unwrap();
        let oracle = f
            .values
            .iter()
            .map(|v| v.abs().powf(p) * cell)
            .sum::<f64>()
            .powf(1.0 / p);
        assert!(
            (got - oracle).abs() <= 1e-8 * oracle.max(1e-30),
            "trial {trial}: {got} vs {oracle}"
        );
    }
    assert_budget(started, Duration::from_secs(1), "criterion 1");
}

/// Criterion 2 — the two norm–modular sandwich bullets and the three
/// modular-to-norm bullets on 200 random (f, p(·), w) triples.
#[test]
fn c02_norm_modular_suite() {
    let started = Instant::now();
    let dom = GridDomain::unit_box(&[128]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let slack = 1.0 + 1e-9;
    for trial in 0..200 {
        let scale = 10f64.powf(rng.gen_range(-1.5..1.5));
        let f = random_function(&dom, &mut rng).scale(scale);
        let a = rng.gen_range(1.1..2.0);
        let b = rng.gen_range(0.0..1.0);
        let p = ExponentField::new(GridFunction::from_fn(dom.clone(), |c| {
            a + b * (3.0 * c[0]).sin().abs()
        }))
        .unwrap();
        let w = Weight::new(GridFunction::from_fn(dom.clone(), |c| {
            0.5 + (2.0 * c[0]).cos().abs()
        }))
        .unwrap();
        let n = luxemburg_norm(&f, &p, Some(&w)).unwrap();
        let rho = modular(&f, &p, Some(&w)).unwrap();
        let (pm, pp) = (p.p_minus(), p.p_plus());
        if n == 0.0 {
            assert_eq!(rho, 0.0);
            continue;
        }
        // Lemma bullets: the modular sits between the two norm powers, with
        // the order of the exponents depending on which side of 1 the norm is.
        if n <= 1.0 {
            assert!(n.powf(pp) <= rho * slack, "trial {trial}");
            assert!(rho <= n.powf(pm) * slack, "trial {trial}");
        } else {
            assert!(n.powf(pm) <= rho * slack, "trial {trial}");
            assert!(rho <= n.powf(pp) * slack, "trial {trial}");
        }
        // Remark bullet 1: at unit norm the modular is exactly 1.
        let unit = f.scale(1.0 / n);
        let rho_unit = modular(&unit, &p, Some(&w)).unwrap();
        assert!((rho_unit - 1.0).abs() < 1e-6, "trial {trial}: {rho_unit}");
        // Remark bullet 2: norm from a modular bound.
        assert!(
            n <= rho.powf(1.0 / pm).max(rho.powf(1.0 / pp)) * slack,
            "trial {trial}"
        );
        // Remark bullet 3: modular from a norm bound.
        assert!(
            rho <= n.powf(pm).max(n.powf(pp)) * slack,
            "trial {trial}"
        );
    }
    assert_budget(started, Duration::from_secs(5), "criterion 2");
}

/// Criterion 3 — dilation identity `‖|f|^s‖_{p(·)} = ‖f‖^s_{sp(·)}` on 100
/// random (f, s, p(·)) to 10⁻⁸.
#[test]
fn c03_dilation_identity() {
    let started = Instant::now();
    let dom = GridDomain::unit_box(&[128]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..100 {
        let f = random_function(&dom, &mut rng);
        let a = rng.gen_range(1.1..2.5);
        let b = rng.gen_range(0.0..0.8);
        let p = ExponentField::new(GridFunction::from_fn(dom.clone(), |c| {
            a + b * (5.0 * c[0]).cos().abs()
        }))
        .unwrap();
        let s = rng.gen_range(1.0 / p.p_minus()..3.0);
        let lhs = luxemburg_norm(&f.abs().map(|v| v.powf(s)), &p, None).unwrap();
        let rhs = luxemburg_norm(&f, &p.scale(s).unwrap(), None).unwrap().powf(s);
        assert!(
            (lhs - rhs).abs() <= 1e-8 * rhs.max(1e-30),
            "trial {trial}: {lhs} vs {rhs}"
        );
    }
    assert_budget(started, Duration::from_secs(5), "criterion 3");
}

/// Criterion 4 — Heisenberg geometry: exact dilation homogeneity of the
/// gauge distance, interior doubling ratio 2^Q = 16 within 10% at 64³, and
/// the quasi-triangle inequality with K ≤ 2 on 10⁴ random triples.
#[test]
fn c04_heisenberg_geometry() {
    let started = Instant::now();
    let g = CarnotGroup::heisenberg1();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let random_point = |rng: &mut ChaCha8Rng| {
        Point::new(&[
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.5..0.5),
        ])
        .unwrap()
    };
    for _ in 0..100 {
        let x = random_point(&mut rng);
        let y = random_point(&mut rng);
        let eps = rng.gen_range(0.1..3.0);
        let d = g.distance(&x, &y).unwrap();
        let d_scaled = g
            .distance(&g.dilate(&x, eps).unwrap(), &g.dilate(&y, eps).unwrap())
            .unwrap();
        assert!((d_scaled - eps * d).abs() <= 1e-12 * (eps * d).max(1.0));
    }

    let dom = GridDomain::new(&[[-1.0, 1.0], [-1.0, 1.0], [-0.5, 0.5]], &[64, 64, 64]).unwrap();
    let b0 = central_ball(&dom, &g).unwrap();
    let r = 0.5 * b0.radius;
    let small = subvarlap::ball_measure(&b0.center, r, &g, &dom).unwrap().value;
    let big = subvarlap::ball_measure(&b0.center, 2.0 * r, &g, &dom).unwrap().value;
    let ratio = big / small;
    assert!(
        (ratio - 16.0).abs() <= 1.6,
        "doubling ratio {ratio} not within 10% of 16"
    );

    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x = random_point(&mut rng);
        let y = random_point(&mut rng);
        let z = random_point(&mut rng);
        let dxz = g.distance(&x, &z).unwrap();
        let through = g.distance(&x, &y).unwrap() + g.distance(&y, &z).unwrap();
        if through > 0.0 {
            worst = worst.max(dxz / through);
        }
    }
    assert!(worst <= 2.0, "quasi-triangle constant {worst} exceeds 2");
    assert_budget(started, Duration::from_secs(30), "criterion 4");
}

/// Criterion 5 — Muckenhoupt estimates: the unit weight lands within 5% of
/// 1; `|x|^{1/2}` is stable under two family enrichments; `|x|^{−2}` is
/// declared divergent by the refinement rule.
#[test]
fn c05_muckenhoupt_classification() {
    let started = Instant::now();
    let dom = GridDomain::new(&[[-1.0, 1.0]], &[256]).unwrap();
    let g = CarnotGroup::euclidean(1).unwrap();
    let p = ExponentField::constant(dom.clone(), 2.0).unwrap();

    let unit = apq_constant_estimate(&Weight::one(dom.clone()), &p, &p, &BallFamily::dyadic(&dom, &g, 1), &g)
        .unwrap();
    assert!(
        (unit.constant - 1.0).abs() <= 0.05,
        "unit-weight estimate {}",
        unit.constant
    );

    let w = Weight::new(GridFunction::from_fn(dom.clone(), |c| c[0].abs().sqrt())).unwrap();
    let series = apq_enrichment_series(&w, &p, &p, &g, 3).unwrap();
    for pair in series.windows(2) {
        assert!(
            (pair[1] - pair[0]).abs() <= 0.05 * pair[0],
            "enrichment step moved the estimate by more than 5%: {series:?}"
        );
    }
    assert_eq!(classify_membership(&series), MembershipVerdict::Stable);

    let coarse = GridDomain::new(&[[-1.0, 1.0]], &[64]).unwrap();
    let series = apq_refinement_series(
        |c| c[0].abs().powi(-2).min(1e14),
        |_| 2.0,
        |_| 2.0,
        &coarse,
        &g,
        0,
        3,
    )
    .unwrap();
    assert_eq!(classify_membership(&series), MembershipVerdict::Divergent);
    assert_budget(started, Duration::from_secs(30), "criterion 5");
}

/// Criterion 6 — Rubio de Francia majorant on 20 random h ≥ 0 over [0,1]²
/// at 64²: h ≤ Rh pointwise, ‖Rh‖ ≤ 2‖h‖, and the A₁-type bound
/// M(Rh) ≤ 2‖M‖·Rh + certificate.
#[test]
fn c06_rubio_de_francia_majorant() {
    let started = Instant::now();
    let dom = GridDomain::unit_box(&[64, 64]).unwrap();
    let g = CarnotGroup::euclidean(2).unwrap();
    let p = ExponentField::constant(dom.clone(), 2.0).unwrap();
    // Level-0 family with cell-scale balls pruned: every point stays covered
    // (stride-4 centers with radius ≥ 8h) at a fraction of the ball count.
    let mut fam = BallFamily::dyadic(&dom, &g, 0);
    let h = g.min_neighbor_distance(&dom);
    fam.balls.retain(|b| b.radius >= 8.0 * h);
    let probes = probe_family(&dom, 606, 2);
    let norm_m = operator_norm_estimate(
        |f| maximal_operator(f, &fam, None, &g),
        &p,
        None,
        &probes,
        true,
        "probe-family",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    for trial in 0..20 {
        let h = random_function(&dom, &mut rng).abs();
        let result = rubio_de_francia(&h, &p, None, &norm_m, 12, &fam, &g).unwrap();
        let rh = &result.function;
        for i in 0..h.len() {
            assert!(
                h.values[i] <= rh.values[i] + 1e-12,
                "trial {trial}: h > Rh at cell {i}"
            );
        }
        let h_norm = luxemburg_norm_density(&h, &p, None).unwrap();
        let rh_norm = luxemburg_norm_density(rh, &p, None).unwrap();
        assert!(
            rh_norm <= 2.0 * h_norm * (1.0 + 1e-9),
            "trial {trial}: ‖Rh‖ = {rh_norm} > 2‖h‖ = {}",
            2.0 * h_norm
        );
        let m_rh = maximal_operator(rh, &fam, None, &g).unwrap();
        let bound = 2.0 * norm_m.value;
        for i in 0..h.len() {
            assert!(
                m_rh.values[i] <= bound * rh.values[i] + bound * result.truncation_certificate + 1e-9,
                "trial {trial}: A₁ bound fails at cell {i}"
            );
        }
    }
    assert_budget(started, Duration::from_secs(60), "criterion 6");
}

/// Criterion 7 — fractional integral: the 1-D indicator oracle within 2% at
/// 1024 cells, and the strong-bound ratio `‖I₁f‖_q/‖f‖_p` refinement-stable
/// (factor ≤ 1.5 across 64 → 128) for p = 1.5, q = 6 on the plane.
#[test]
fn c07_fractional_integral_oracle_and_strong_bound() {
    let started = Instant::now();
    // I_{1/2} χ_{[0,1]} on [0,3] evaluated at x = 2: with the domain-truncated
    // ball measure |B(2,d)| = 1 + d for d ∈ [1,2], the integral is
    // ∫₁² √u/(1+u) du = 2√2 − 2·atan(√2) − 2 + π/2.
    let dom = GridDomain::new(&[[0.0, 3.0]], &[1024]).unwrap();
    let g1 = CarnotGroup::euclidean(1).unwrap();
    let f = GridFunction::from_fn(dom.clone(), |c| if c[0] < 1.0 { 1.0 } else { 0.0 });
    let i_f = fractional_integral(&f, 0.5, &g1).unwrap();
    let x_cell = (0..dom.cell_count())
        .min_by(|&a, &b| {
            let da = (dom.center_coords(a)[0] - 2.0).abs();
            let db = (dom.center_coords(b)[0] - 2.0).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let oracle = 2.0 * 2f64.sqrt() - 2.0 * 2f64.sqrt().atan() - 2.0 + std::f64::consts::FRAC_PI_2;
    let got = i_f.values[x_cell];
    assert!(
        (got - oracle).abs() <= 0.02 * oracle,
        "1-D oracle: {got} vs {oracle}"
    );

    let g2 = CarnotGroup::euclidean(2).unwrap();
    let (p, q) = (1.5, 6.0);
    let ratio_at = |res: usize| {
        let dom = GridDomain::unit_box(&[res, res]).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |c| {
            (std::f64::consts::PI * c[0]).sin() * (std::f64::consts::PI * c[1]).sin()
        });
        let i_f = fractional_integral(&f, 1.0, &g2).unwrap();
        let pf = ExponentField::constant(dom.clone(), p).unwrap();
        let qf = ExponentField::constant(dom.clone(), q).unwrap();
        luxemburg_norm(&i_f, &qf, None).unwrap() / luxemburg_norm(&f, &pf, None).unwrap()
    };
    let coarse = ratio_at(64);
    let fine = ratio_at(128);
    assert!(coarse.is_finite() && fine.is_finite());
    let drift = (fine / coarse).max(coarse / fine);
    assert!(
        drift <= 1.5,
        "strong-bound ratio drifted by {drift} (64²: {coarse}, 128²: {fine})"
    );
    assert_budget(started, Duration::from_secs(120), "criterion 7");
}

/// Criterion 8 — weak-type constant for the planar p = 1, q = 2, α = 1
/// example: finite and refinement-stable.
#[test]
fn c08_weak_type_constant() {
    let started = Instant::now();
    let g = CarnotGroup::euclidean(2).unwrap();
    let constant_at = |res: usize| {
        let dom = GridDomain::unit_box(&[res, res]).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |c| {
            let (dx, dy) = (c[0] - 0.5, c[1] - 0.5);
            (-20.0 * (dx * dx + dy * dy)).exp()
        });
        let w = Weight::one(dom.clone());
        weak_type_check(&f, 1.0, 1.0, 2.0, &w, &g, 40).unwrap()
    };
    let coarse = constant_at(64);
    let fine = constant_at(128);
    assert!(coarse.is_finite() && coarse > 0.0);
    assert!(fine.is_finite() && fine > 0.0);
    let drift = (fine / coarse).max(coarse / fine);
    assert!(
        drift <= 2.0,
        "weak-type constant drifted by {drift} (64²: {coarse}, 128²: {fine})"
    );
    assert_budget(started, Duration::from_secs(120), "criterion 8");
}

/// Criterion 9 — Poincaré–Sobolev sweeps in the three theorem scenarios,
/// each finite and stable within 2× across one refinement, plus exact
/// scale/shift invariance of the ratio.
#[test]
fn c09_poincare_sweeps() {
    let started = Instant::now();
    let stable = |reports: &[subvarlap::poincare::RatioReport], what: &str| {
        let a = reports[0].max_ratio.expect("finite max at the base level");
        let b = reports[1].max_ratio.expect("finite max at the refined level");
        assert!(a.is_finite() && b.is_finite(), "{what}: non-finite max");
        let drift = (a / b).max(b / a);
        assert!(drift <= 2.0, "{what}: drift {drift} (levels {a}, {b})");
    };

    // Mean-subtracted, variable exponent, power weight (Theorem-prin
    // scenario) on the plane.
    let g2 = CarnotGroup::euclidean(2).unwrap();
    let dom2 = GridDomain::unit_box(&[32, 32]).unwrap();
    let family = TestFunctionFamily {
        generator: GeneratorId::Bumps,
        count: 32,
        seed: 909,
    };
    let p_var = |d: &GridDomain| {
        ExponentField::new(GridFunction::from_fn(d.clone(), |c| {
            1.5 + 0.2 * (std::f64::consts::PI * c[0]).sin()
        }))
    };
    let w_pow = |d: &GridDomain| {
        Weight::new(GridFunction::from_fn(d.clone(), |c| {
            (c[0] * c[0] + c[1] * c[1]).powf(0.15)
        }))
    };
    let reports = ratio_sweep(
        &family,
        &dom2,
        &g2,
        RatioMode::MeanSubtracted,
        1,
        InequalityKind::SobolevGain,
        p_var,
        w_pow,
        2,
    )
    .unwrap();
    stable(&reports, "mean-subtracted sweep");

    // Zero-boundary first-order sweep (Theorem-Poincare scenario).
    let trig = TestFunctionFamily {
        generator: GeneratorId::RandomTrig,
        count: 32,
        seed: 910,
    };
    let reports = ratio_sweep(
        &trig,
        &dom2,
        &g2,
        RatioMode::ZeroBoundary,
        1,
        InequalityKind::SobolevGain,
        |d| ExponentField::constant(d.clone(), 1.5),
        |d| Ok(Weight::one(d.clone())),
        2,
    )
    .unwrap();
    stable(&reports, "zero-boundary sweep");

    // Same-exponent sweep through the jump-condition gate (Theorem-Poincare2
    // scenario): step exponent on a Heisenberg box.
    let g3 = CarnotGroup::heisenberg1();
    let dom3 = GridDomain::unit_box(&[16, 16, 16]).unwrap();
    let step3 = TestFunctionFamily {
        generator: GeneratorId::RandomTrig,
        count: 32,
        seed: 911,
    };
    let reports = ratio_sweep(
        &step3,
        &dom3,
        &g3,
        RatioMode::ZeroBoundary,
        1,
        InequalityKind::SameExponent,
        |d| {
            ExponentField::new(GridFunction::from_fn(d.clone(), |c| {
                if c[0] < 0.5 {
                    1.8
                } else {
                    2.2
                }
            }))
        },
        |d| Ok(Weight::one(d.clone())),
        2,
    )
    .unwrap();
    stable(&reports, "same-exponent sweep");

    // Exact invariances of the ratio.
    let p = ExponentField::constant(dom2.clone(), 1.5).unwrap();
    let w = Weight::one(dom2.clone());
    let f = &family.materialize(&dom2, false)[0];
    let base = poincare_ratio(f, &p, &w, &g2, RatioMode::MeanSubtracted, 1, InequalityKind::SobolevGain)
        .unwrap()
        .value()
        .unwrap();
    let scaled = poincare_ratio(
        &f.scale(-7.25),
        &p,
        &w,
        &g2,
        RatioMode::MeanSubtracted,
        1,
        InequalityKind::SobolevGain,
    )
    .unwrap()
    .value()
    .unwrap();
    let shifted = poincare_ratio(
        &f.map(|v| v + 3.5),
        &p,
        &w,
        &g2,
        RatioMode::MeanSubtracted,
        1,
        InequalityKind::SobolevGain,
    )
    .unwrap()
    .value()
    .unwrap();
    assert!((scaled - base).abs() <= 1e-10 * base, "scale invariance");
    assert!((shifted - base).abs() <= 1e-8 * base, "shift invariance");
    assert_budget(started, Duration::from_secs(300), "criterion 9");
}

/// Criterion 10 — representation-formula constant for a coordinate function
/// on [0,1]²: finite and refinement-stable within 2×.
#[test]
fn c10_representation_constant() {
    let started = Instant::now();
    let g = CarnotGroup::euclidean(2).unwrap();
    let constant_at = |res: usize| {
        let dom = GridDomain::unit_box(&[res, res]).unwrap();
        let f = GridFunction::from_fn(dom.clone(), |c| c[0]);
        let b0 = central_ball(&dom, &g).unwrap();
        representation_check(&f, &g, &b0).unwrap().constant.unwrap()
    };
    let coarse = constant_at(32);
    let fine = constant_at(64);
    assert!(coarse.is_finite() && fine.is_finite());
    let drift = (fine / coarse).max(coarse / fine);
    assert!(
        drift <= 2.0,
        "representation constant drifted by {drift} (32²: {coarse}, 64²: {fine})"
    );
    assert_budget(started, Duration::from_secs(60), "criterion 10");
}

/// Vertex-style manufactured grid: bounds padded by half a cell so boundary
/// cell centers sit exactly on {0,1}, where u* = sin(πx)sin(πy) vanishes.
fn manufactured_l2_error(m: usize) -> f64 {
    use std::f64::consts::PI;
    let h = 1.0 / (m - 1) as f64;
    let g = CarnotGroup::euclidean(2).unwrap();
    let dom = GridDomain::new(&[[-h / 2.0, 1.0 + h / 2.0], [-h / 2.0, 1.0 + h / 2.0]], &[m, m])
        .unwrap();
    let u_star = |c: &[f64]| (PI * c[0]).sin() * (PI * c[1]).sin();
    let source = GridFunction::from_fn(dom.clone(), |c| (2.0 * PI * PI + 1.0) * u_star(c));
    let p = ExponentField::constant(dom.clone(), 2.0).unwrap();
    let w = Weight::one(dom.clone());
    let a = EllipticityField::scaled_identity(&w, 2);
    // Struct-literal construction: the constructor's p⁺ < Q guard encodes the
    // paper's hypothesis (which excludes p = 2 on the plane where Q = 2), but
    // the discrete energy is perfectly well defined here.
    let prob = DirichletProblem {
        dom: dom.clone(),
        g,
        p,
        w,
        a,
        f: source,
        settings: SolverSettings {
            grad_tol: 1e-10,
            ..SolverSettings::default()
        },
    };
    let sol = solve_dirichlet(&prob).unwrap();
    let cell = dom.cell_measure();
    (0..dom.cell_count())
        .map(|i| {
            let e = sol.u.values[i] - u_star(&dom.center_coords(i)[..2]);
            e * e * cell
        })
        .sum::<f64>()
        .sqrt()
}

/// Criterion 11 — manufactured p = 2 solution: the L² error drops by a
/// factor in [3.2, 4.8] from h = 1/32 to h = 1/64 (second order).
#[test]
fn c11_manufactured_second_order() {
    let started = Instant::now();
    let e32 = manufactured_l2_error(33);
    let e64 = manufactured_l2_error(65);
    let rate = e32 / e64;
    assert!(
        (3.2..=4.8).contains(&rate),
        "error ratio {rate} outside [3.2, 4.8] (e32 = {e32}, e64 = {e64})"
    );
    assert_budget(started, Duration::from_secs(120), "criterion 11");
}

/// Criterion 12 — variable-exponent solver battery on a Heisenberg box:
/// gradient consistency, monotone energy trace, uniqueness across starts,
/// small weak residual, midpoint convexity, and coercivity growth.
#[test]
fn c12_variable_exponent_solver_battery() {
    let started = Instant::now();
    let g = CarnotGroup::heisenberg1();
    let dom = GridDomain::unit_box(&[12, 12, 12]).unwrap();
    let p = ExponentField::new(GridFunction::from_fn(dom.clone(), |c| {
        2.0 + 0.3 * (2.0 * std::f64::consts::PI * (c[0] + c[1])).sin()
    }))
    .unwrap();
    assert!(p.p_minus() >= 1.7 - 1e-12 && p.p_plus() <= 2.3 + 1e-12);
    let w = Weight::new(GridFunction::from_fn(dom.clone(), |c| 1.0 + 0.5 * c[0])).unwrap();
    let a = EllipticityField::scaled_identity(&w, 2);
    let f = GridFunction::from_fn(dom.clone(), |c| {
        (std::f64::consts::PI * c[0]).sin()
            * (std::f64::consts::PI * c[1]).sin()
            * (std::f64::consts::PI * c[2]).sin()
    });
    let settings = SolverSettings {
        grad_tol: 1e-8,
        // Effectively disable the energy-stall early exit and add one
        // continuation stage beyond the default: the exit criterion should be
        // the gradient tolerance so the unregularized weak residual at exit
        // sits safely below 10× of it.
        energy_stall: 1e-16,
        eps_schedule: Some(vec![1e-2, 1e-4, 1e-6, 1e-8]),
        ..SolverSettings::default()
    };
    let prob = DirichletProblem::new(g, p, w, a, f, settings).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let cell = prob.dom.cell_measure();

    // Gradient versus finite differences over 100 random directions.
    let u0 = {
        let mut u = GridFunction::from_fn(prob.dom.clone(), |c| {
            (std::f64::consts::PI * c[0]).sin() * c[1] * (1.0 - c[1]) * c[2] * (1.0 - c[2])
        });
        u.zero_boundary();
        u
    };
    let eps = 1e-3;
    let grad = energy_gradient(&u0, &prob, eps).unwrap();
    let t = 1e-6;
    for trial in 0..100 {
        let mut v = random_function(&prob.dom, &mut rng);
        v.zero_boundary();
        let directional: f64 = (0..v.len()).map(|i| grad.values[i] * v.values[i]).sum::<f64>() * cell;
        let forward = u0.zip_with(&v, |a, b| a + t * b).unwrap();
        let backward = u0.zip_with(&v, |a, b| a - t * b).unwrap();
        let fd = (energy(&forward, &prob, eps).unwrap() - energy(&backward, &prob, eps).unwrap())
            / (2.0 * t);
        let scale = directional.abs().max(fd.abs()).max(1e-12);
        assert!(
            (directional - fd).abs() / scale <= 1e-5,
            "trial {trial}: {directional} vs {fd}"
        );
    }

    // Solve, check the trace, the weak residual, and uniqueness.
    let sol = solve_dirichlet(&prob).unwrap();
    for pair in sol.energy_trace.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0), "energy increased");
    }
    let residual = weak_residual(&sol.u, &prob, 8, 1213).unwrap();
    assert!(
        residual <= 10.0 * prob.settings.grad_tol,
        "weak residual {residual} above 10× gradient tolerance (status {:?}, |G| = {}, iters {})",
        sol.status,
        sol.final_gradient_norm,
        sol.iterations
    );
    let mut start = random_function(&prob.dom, &mut rng).scale(0.2);
    start.zero_boundary();
    let sol2 = solve_dirichlet_from(&prob, &start).unwrap();
    let diff = sol.u.zip_with(&sol2.u, |a, b| a - b).unwrap();
    let denom = luxemburg_norm(&sol.u, &prob.p, Some(&prob.w)).unwrap();
    let dist = luxemburg_norm(&diff, &prob.p, Some(&prob.w)).unwrap();
    assert!(
        dist <= 1e-4 * (1.0 + denom),
        "minimizers from different starts differ by {dist}"
    );

    // Midpoint convexity margin on 50 random pairs.
    for trial in 0..50 {
        let mut u = random_function(&prob.dom, &mut rng);
        u.zero_boundary();
        let mut v = random_function(&prob.dom, &mut rng);
        v.zero_boundary();
        let mid = u.zip_with(&v, |a, b| 0.5 * (a + b)).unwrap();
        let margin = 0.5 * (energy(&u, &prob, eps).unwrap() + energy(&v, &prob, eps).unwrap())
            - energy(&mid, &prob, eps).unwrap();
        assert!(margin > 0.0, "trial {trial}: midpoint-convexity margin {margin}");
    }

    // Coercivity growth: log-log slope within [p⁻, p⁺] ± 10%.
    let mut dir = random_function(&prob.dom, &mut rng);
    dir.zero_boundary();
    let scales = [100.0, 1000.0];
    let values = coercivity_probe(&prob, &dir, &scales).unwrap();
    let slope = (values[1].ln() - values[0].ln()) / (scales[1].ln() - scales[0].ln());
    assert!(
        slope >= 0.9 * prob.p.p_minus() && slope <= 1.1 * prob.p.p_plus(),
        "coercivity slope {slope} outside [0.9p⁻, 1.1p⁺]"
    );
    assert_budget(started, Duration::from_secs(300), "criterion 12");
}

/// Criterion 13 — CLI contract: fixed-seed runs are byte-identical and a
/// failing precondition gate exits with status 2 and a named gate.
#[test]
fn c13_cli_determinism_and_gates() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("poin.conf");
    std::fs::write(
        &cfg,
        "resolution = 16,16\np = 1.5\nmode = zero-boundary\ncount = 6\nseed = 11\n",
    )
    .unwrap();
    let run = |out: &std::path::Path| {
        std::process::Command::new(env!("CARGO_BIN_EXE_subvarlap"))
            .arg("poincare")
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap()
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&a).status.success());
    assert!(run(&b).status.success());
    assert_eq!(
        std::fs::read(a.join("poincare_level0.csv")).unwrap(),
        std::fs::read(b.join("poincare_level0.csv")).unwrap(),
        "fixed-seed CSVs differ"
    );

    let gate_cfg = tmp.path().join("gate.conf");
    std::fs::write(&gate_cfg, "resolution = 16,16\np = 2.5\ncount = 4\n").unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_subvarlap"))
        .arg("poincare")
        .arg("--config")
        .arg(&gate_cfg)
        .arg("--out")
        .arg(tmp.path().join("g"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p⁺ < Q"));
    assert_budget(started, Duration::from_secs(30), "criterion 13");
}
