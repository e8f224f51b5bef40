//! Weighted variable-exponent Lebesgue spaces on grid functions: modulars,
//! Luxemburg norms, exponent arithmetic, and the two exponent-regularity
//! checks (log-Hölder modulus and the jump condition).
//!
//! The weighted space `L^{p(·)}_ω` carries the measure `ω(x)^{p(x)} dx`, so
//! the modular is `Σ |f(x)|^{p(x)} ω(x)^{p(x)} · cell` and the Luxemburg norm
//! is the unique `λ > 0` with modular(f/λ) = 1, found by bisection.

use crate::carnot::CarnotGroup;
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridDomain, GridFunction};

/// Variable exponent `p(·)` with cached essential bounds.
#[derive(Debug, Clone)]
pub struct ExponentField {
    p: GridFunction,
    p_minus: f64,
    p_plus: f64,
}

impl ExponentField {
    pub fn new(p: GridFunction) -> Result<Self> {
        p.check_finite()?;
        let mut p_minus = f64::INFINITY;
        let mut p_plus = f64::NEG_INFINITY;
        for (i, &v) in p.values.iter().enumerate() {
            if v < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "exponent {v} < 1 at cell {i}"
                )));
            }
            p_minus = p_minus.min(v);
            p_plus = p_plus.max(v);
        }
        Ok(Self { p, p_minus, p_plus })
    }

    pub fn constant(domain: GridDomain, p: f64) -> Result<Self> {
        Self::new(GridFunction::constant(domain, p))
    }

    pub fn values(&self) -> &GridFunction {
        &self.p
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn domain(&self) -> &GridDomain {
        &self.p.domain
    }

    pub fn is_constant(&self) -> bool {
        self.p_plus == self.p_minus
    }

    /// Pointwise scaling `s·p(·)`.
    pub fn scale(&self, s: f64) -> Result<Self> {
        Self::new(self.p.scale(s))
    }
}

/// Strictly positive weight `ω(·)`.
#[derive(Debug, Clone)]
pub struct Weight {
    w: GridFunction,
}

impl Weight {
    pub fn new(w: GridFunction) -> Result<Self> {
        for (i, &v) in w.values.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidWeight { cell: i });
            }
        }
        Ok(Self { w })
    }

    pub fn one(domain: GridDomain) -> Self {
        Self {
            w: GridFunction::constant(domain, 1.0),
        }
    }

    pub fn values(&self) -> &GridFunction {
        &self.w
    }

    pub fn reciprocal(&self) -> Self {
        Self {
            w: self.w.map(|v| 1.0 / v),
        }
    }

    /// Pointwise power `ω^s`.
    pub fn powf(&self, s: f64) -> Result<Self> {
        Self::new(self.w.map(|v| v.powf(s)))
    }
}

/// Modular `ρ(f) = Σ |f(x)|^{p(x)} ω(x)^{p(x)} · cell` (ω ≡ 1 when absent).
pub fn modular(f: &GridFunction, p: &ExponentField, w: Option<&Weight>) -> Result<f64> {
    f.check_same_domain(p.values())?;
    f.check_finite()?;
    if let Some(w) = w {
        f.check_same_domain(w.values())?;
    }
    let cell = f.domain.cell_measure();
    let n = f.len();
    let sum = exec::sum_indexed(n, |i| {
        let pv = p.values().values[i];
        let base = match w {
            Some(w) => f.values[i].abs() * w.values().values[i],
            None => f.values[i].abs(),
        };
        if base == 0.0 {
            0.0
        } else {
            base.powf(pv)
        }
    });
    Ok(sum * cell)
}

/// Luxemburg norm `inf{λ > 0 : ρ(f/λ) ≤ 1}` by bisection, relative
/// tolerance 1e-12 on the bracket.
pub fn luxemburg_norm(f: &GridFunction, p: &ExponentField, w: Option<&Weight>) -> Result<f64> {
    let rho0 = modular(f, p, w)?;
    if rho0 == 0.0 {
        return Ok(0.0);
    }
    let rho_at = |lam: f64| -> f64 {
        let cell = f.domain.cell_measure();
        exec::sum_indexed(f.len(), |i| {
            let pv = p.values().values[i];
            let base = match w {
                Some(w) => f.values[i].abs() * w.values().values[i],
                None => f.values[i].abs(),
            } / lam;
            if base == 0.0 {
                0.0
            } else {
                base.powf(pv)
            }
        }) * cell
    };
    // Norm–modular sandwich seeds the bracket: λ lies between ρ^{1/p⁻} and
    // ρ^{1/p⁺} (order depending on whether ρ ≶ 1).
    Ok(bisect_luxemburg(rho0, p.p_minus(), p.p_plus(), rho_at))
}

/// Modular against an explicit measure density: `Σ |f|^{p(x)} μ(x) · cell`.
pub fn modular_density(
    f: &GridFunction,
    p: &ExponentField,
    mu: Option<&GridFunction>,
) -> Result<f64> {
    f.check_same_domain(p.values())?;
    f.check_finite()?;
    if let Some(mu) = mu {
        f.check_same_domain(mu)?;
    }
    let cell = f.domain.cell_measure();
    let sum = exec::sum_indexed(f.len(), |i| {
        let b = f.values[i].abs();
        let dens = mu.map_or(1.0, |m| m.values[i]);
        if b == 0.0 || dens == 0.0 {
            0.0
        } else {
            b.powf(p.values().values[i]) * dens
        }
    });
    Ok(sum * cell)
}

/// Luxemburg norm in `L^{p(·)}_μ` for a measure density `μ`.
pub fn luxemburg_norm_density(
    f: &GridFunction,
    p: &ExponentField,
    mu: Option<&GridFunction>,
) -> Result<f64> {
    let rho0 = modular_density(f, p, mu)?;
    if rho0 == 0.0 {
        return Ok(0.0);
    }
    let rho_at = |lam: f64| {
        let cell = f.domain.cell_measure();
        exec::sum_indexed(f.len(), |i| {
            let b = f.values[i].abs() / lam;
            let dens = mu.map_or(1.0, |m| m.values[i]);
            if b == 0.0 || dens == 0.0 {
                0.0
            } else {
                b.powf(p.values().values[i]) * dens
            }
        }) * cell
    };
    Ok(bisect_luxemburg(rho0, p.p_minus(), p.p_plus(), rho_at))
}

fn bisect_luxemburg(rho0: f64, p_minus: f64, p_plus: f64, rho_at: impl Fn(f64) -> f64) -> f64 {
    let a = rho0.powf(1.0 / p_minus);
    let b = rho0.powf(1.0 / p_plus);
    let mut lo = a.min(b) * 0.5;
    let mut hi = a.max(b) * 2.0;
    while rho_at(lo) < 1.0 && lo > f64::MIN_POSITIVE {
        lo *= 0.5;
    }
    while rho_at(hi) > 1.0 && hi < f64::MAX / 4.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rho_at(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pointwise conjugate `p′(x) = p(x)/(p(x)−1)`; fails where `p(x) = 1`.
pub fn conjugate_exponent(p: &ExponentField) -> Result<ExponentField> {
    for (i, &v) in p.values().values.iter().enumerate() {
        if v <= 1.0 {
            return Err(Error::ConjugateInfinite { cell: i });
        }
    }
    ExponentField::new(p.values().map(|v| v / (v - 1.0)))
}

/// Sobolev gain exponent `p*(x) = Qp(x)/(Q − m·p(x))` for derivative order m.
pub fn sobolev_exponent(p: &ExponentField, q_dim: u32, order: u32) -> Result<ExponentField> {
    let limit = q_dim as f64 / order as f64;
    if p.p_plus() >= limit {
        return Err(Error::SobolevExponentUndefined {
            p_plus: p.p_plus(),
            limit,
        });
    }
    let qf = q_dim as f64;
    let m = order as f64;
    ExponentField::new(p.values().map(|v| qf * v / (qf - m * v)))
}

/// Smallest log-Hölder constant over the sampled pairs together with the
/// pair that attains it.
#[derive(Debug, Clone, Copy)]
pub struct LogHolderReport {
    pub c0: f64,
    pub argmax_pair: (usize, usize),
    pub pairs_sampled: usize,
}

/// Estimates the local log-Hölder constant
/// `C₀ = max { |p(x)−p(y)|·(−log d(x,y)) : d(x,y) < 1/2 }` over a
/// deterministic family of index-offset pairs (all near-diagonal offsets
/// plus Fibonacci-spaced long strides along each axis).
pub fn log_holder_check(p: &ExponentField, g: &CarnotGroup) -> Result<LogHolderReport> {
    let dom = p.domain();
    if dom.ndim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: dom.ndim(),
        });
    }
    let n = dom.cell_count();
    let mut offsets: Vec<usize> = Vec::new();
    for a in 0..dom.ndim() {
        let stride = crate::carnot::axis_stride(dom, a);
        for k in [1usize, 2, 3, 5, 8, 13, 21, 34] {
            if k < dom.resolution()[a] {
                offsets.push(k * stride);
            }
        }
    }
    offsets.sort_unstable();
    offsets.dedup();
    let eval = |i: usize| -> (f64, usize, usize) {
        let pi = crate::carnot::Point::from_cell(dom, i);
        let mut best = (0.0, i, i);
        for &o in &offsets {
            let j = i + o;
            if j >= n {
                continue;
            }
            let d = g.distance_to_cell(&pi, dom, j);
            if d <= 0.0 || d >= 0.5 {
                continue;
            }
            let v = (p.values().values[i] - p.values().values[j]).abs() * (-d.ln());
            if v > best.0 {
                best = (v, i, j);
            }
        }
        best
    };
    let candidates = exec::map_indexed(n, eval);
    let mut best = (0.0, 0usize, 0usize);
    let mut sampled = 0usize;
    for c in candidates {
        sampled += offsets.len();
        if c.0 > best.0 {
            best = c;
        }
    }
    Ok(LogHolderReport {
        c0: best.0,
        argmax_pair: (best.1, best.2),
        pairs_sampled: sampled,
    })
}

#[derive(Debug, Clone)]
pub struct JumpConditionReport {
    pub holds: bool,
    pub delta: f64,
    /// Cells at which neither branch of the condition holds.
    pub witnesses: Vec<usize>,
}

/// Checks the jump condition with radius `delta`: at every grid point either
/// `p⁻_{B(x,δ)} ≥ Q` or `p⁺_{B(x,δ)} ≤ Q·p⁻/(Q − p⁻)`, balls intersected
/// with the domain.
pub fn jump_condition_check(
    p: &ExponentField,
    g: &CarnotGroup,
    q_dim: u32,
    delta: f64,
) -> Result<JumpConditionReport> {
    let dom = p.domain();
    if delta <= g.min_neighbor_distance(dom) {
        return Err(Error::InvalidArgument(format!(
            "jump-condition radius {delta} is not above the cell scale"
        )));
    }
    let qf = q_dim as f64;
    let n = dom.cell_count();
    let failed = exec::map_indexed(n, |i| {
        let center = crate::carnot::Point::from_cell(dom, i);
        let cells = g.ball_cells(&center, delta, dom);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in cells {
            let v = p.values().values[j];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let ok = lo >= qf || (lo < qf && hi <= qf * lo / (qf - lo));
        !ok
    });
    let witnesses: Vec<usize> = (0..n).filter(|&i| failed[i]).collect();
    Ok(JumpConditionReport {
        holds: witnesses.is_empty(),
        delta,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_1d(res: usize) -> GridDomain {
        GridDomain::unit_box(&[res]).unwrap()
    }

    fn step_exponent(dom: &GridDomain, left: f64, right: f64) -> ExponentField {
        ExponentField::new(GridFunction::from_fn(dom.clone(), |c| {
            if c[0] <= 0.5 {
                left
            } else {
                right
            }
        }))
        .unwrap()
    }

    #[test]
    fn modular_examples() {
        let dom = unit_1d(1000);
        let p = step_exponent(&dom, 1.0, 2.0);
        let zero = GridFunction::zeros(dom.clone());
        assert_eq!(modular(&zero, &p, None).unwrap(), 0.0);
        let one = GridFunction::constant(dom.clone(), 1.0);
        assert_relative_eq!(modular(&one, &p, None).unwrap(), 1.0, epsilon = 1e-12);
        // f ≡ 2, p = 1 on [0,½], p = 2 on (½,1]: ½·2 + ½·4 = 3.
        let two = GridFunction::constant(dom, 2.0);
        assert_relative_eq!(modular(&two, &p, None).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn modular_rejects_nonfinite() {
        let dom = unit_1d(4);
        let p = ExponentField::constant(dom.clone(), 2.0).unwrap();
        let mut f = GridFunction::zeros(dom);
        f.values[1] = f64::NAN;
        assert!(modular(&f, &p, None).is_err());
    }

    #[test]
    fn luxemburg_constant_exponent_matches_classical() {
        let dom = unit_1d(512);
        let f = GridFunction::from_fn(dom.clone(), |c| (3.0 * c[0]).sin() + 1.5);
        for pv in [1.0, 1.5, 2.0, 3.0] {
            let p = ExponentField::constant(dom.clone(), pv).unwrap();
            let classical = modular(&f, &p, None).unwrap().powf(1.0 / pv);
            let lux = luxemburg_norm(&f, &p, None).unwrap();
            assert_relative_eq!(lux, classical, max_relative = 1e-8);
        }
    }

    #[test]
    fn luxemburg_piecewise_closed_form() {
        // f ≡ 2 with p = 1|2 split at ½: ρ(f/λ) = 1/λ + 2/λ² = 1 at λ = 2.
        let dom = unit_1d(2000);
        let p = step_exponent(&dom, 1.0, 2.0);
        let f = GridFunction::constant(dom, 2.0);
        let lux = luxemburg_norm(&f, &p, None).unwrap();
        assert_relative_eq!(lux, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn unit_function_has_unit_norm() {
        let dom = unit_1d(300);
        let f = GridFunction::constant(dom.clone(), 1.0);
        for p in [
            ExponentField::constant(dom.clone(), 1.0).unwrap(),
            ExponentField::constant(dom.clone(), 2.7).unwrap(),
            step_exponent(&dom, 1.3, 3.1),
        ] {
            assert_relative_eq!(
                luxemburg_norm(&f, &p, None).unwrap(),
                1.0,
                max_relative = 1e-10
            );
        }
    }

    fn random_field(dom: &GridDomain, rng: &mut impl Rng) -> GridFunction {
        let a = rng.gen_range(0.3..3.0);
        let b = rng.gen_range(1.0..9.0);
        let c = rng.gen_range(0.0..1.0);
        GridFunction::from_fn(dom.clone(), move |x| a * (b * x[0] + c).sin() + a + 0.1)
    }

    #[test]
    fn norm_modular_sandwich() {
        let dom = unit_1d(200);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for scale in [0.05, 0.5, 1.0, 3.0, 20.0] {
            for _ in 0..20 {
                let p = ExponentField::new(GridFunction::from_fn(dom.clone(), |x| {
                    1.2 + (x[0] * 5.0).sin().abs()
                }))
                .unwrap();
                let f = random_field(&dom, &mut rng).scale(scale);
                let nrm = luxemburg_norm(&f, &p, None).unwrap();
                let rho = modular(&f, &p, None).unwrap();
                let (pm, pp) = (p.p_minus(), p.p_plus());
                let tol = 1e-9 * (1.0 + rho);
                if nrm <= 1.0 {
                    assert!(nrm.powf(pp) <= rho + tol && rho <= nrm.powf(pm) + tol);
                } else {
                    assert!(nrm.powf(pm) <= rho + tol && rho <= nrm.powf(pp) + tol);
                }
            }
        }
    }

    #[test]
    fn unit_sphere_equivalence() {
        let dom = unit_1d(200);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let p = step_exponent(&dom, 1.4, 2.6);
            let f = random_field(&dom, &mut rng);
            let nrm = luxemburg_norm(&f, &p, None).unwrap();
            let unit = f.scale(1.0 / nrm);
            assert!((modular(&unit, &p, None).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn dilation_identity() {
        // ‖|f|^s‖_{p(·)} = ‖f‖_{sp(·)}^s.
        let dom = unit_1d(150);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p = step_exponent(&dom, 1.5, 2.5);
            let s = rng.gen_range(1.0 / p.p_minus()..3.0);
            let f = random_field(&dom, &mut rng);
            let lhs = luxemburg_norm(&f.map(|v| v.abs().powf(s)), &p, None).unwrap();
            let rhs = luxemburg_norm(&f, &p.scale(s).unwrap(), None)
                .unwrap()
                .powf(s);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
        }
    }

    #[test]
    fn holder_inequality_with_constant_four() {
        let dom = unit_1d(150);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let pf = GridFunction::from_fn(dom.clone(), |x| 2.0 + (7.0 * x[0]).cos().abs());
            let qf = GridFunction::from_fn(dom.clone(), |x| 2.5 + (3.0 * x[0]).sin().abs());
            let p = ExponentField::new(pf.clone()).unwrap();
            let q = ExponentField::new(qf.clone()).unwrap();
            let r = ExponentField::new(
                pf.zip_with(&qf, |a, b| 1.0 / (1.0 / a + 1.0 / b)).unwrap(),
            )
            .unwrap();
            let f = random_field(&dom, &mut rng);
            let g = random_field(&dom, &mut rng);
            let fg = f.zip_with(&g, |a, b| a * b).unwrap();
            let lhs = luxemburg_norm(&fg, &r, None).unwrap();
            let rhs = 4.0
                * luxemburg_norm(&f, &p, None).unwrap()
                * luxemburg_norm(&g, &q, None).unwrap();
            assert!(lhs <= rhs, "{lhs} > {rhs}");
        }
    }

    #[test]
    fn homogeneity_exact() {
        let dom = unit_1d(100);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = step_exponent(&dom, 1.3, 2.2);
        let f = random_field(&dom, &mut rng);
        let base = luxemburg_norm(&f, &p, None).unwrap();
        for c in [-3.0, 0.25, 7.5] {
            let scaled = luxemburg_norm(&f.scale(c), &p, None).unwrap();
            assert_relative_eq!(scaled, c.abs() * base, max_relative = 1e-10);
        }
    }

    #[test]
    fn monotone_embedding() {
        let dom = unit_1d(150);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = ExponentField::constant(dom.clone(), 1.5).unwrap();
        let q = ExponentField::constant(dom.clone(), 2.5).unwrap();
        let c_omega = 1.0 + dom.total_measure();
        for _ in 0..30 {
            let f = random_field(&dom, &mut rng);
            let np = luxemburg_norm(&f, &p, None).unwrap();
            let nq = luxemburg_norm(&f, &q, None).unwrap();
            assert!(np <= c_omega * nq + 1e-12);
        }
    }

    #[test]
    fn conjugate_and_sobolev() {
        let dom = unit_1d(10);
        let p2 = ExponentField::constant(dom.clone(), 2.0).unwrap();
        let c = conjugate_exponent(&p2).unwrap();
        assert_relative_eq!(c.values().values[0], 2.0);
        let p4 = ExponentField::constant(dom.clone(), 4.0).unwrap();
        let c = conjugate_exponent(&p4).unwrap();
        assert_relative_eq!(c.values().values[0], 4.0 / 3.0);
        let p1 = ExponentField::constant(dom.clone(), 1.0).unwrap();
        assert!(matches!(
            conjugate_exponent(&p1),
            Err(Error::ConjugateInfinite { .. })
        ));

        let s = sobolev_exponent(&p2, 4, 1).unwrap();
        assert_relative_eq!(s.values().values[0], 4.0);
        let p15 = ExponentField::constant(dom.clone(), 1.5).unwrap();
        let s = sobolev_exponent(&p15, 2, 1).unwrap();
        assert_relative_eq!(s.values().values[0], 6.0);
        assert!(sobolev_exponent(&p2, 4, 2).is_err());
    }

    #[test]
    fn log_holder_constant_exponent_is_zero() {
        let dom = unit_1d(64);
        let g = CarnotGroup::euclidean(1).unwrap();
        let p = ExponentField::constant(dom, 2.0).unwrap();
        let rep = log_holder_check(&p, &g).unwrap();
        assert_eq!(rep.c0, 0.0);
    }

    #[test]
    fn log_holder_smooth_is_stable_under_refinement() {
        let g = CarnotGroup::euclidean(1).unwrap();
        let c0_at = |res: usize| {
            let dom = unit_1d(res);
            let p = ExponentField::new(GridFunction::from_fn(dom, |x| 2.0 + x[0].sin() / 4.0))
                .unwrap();
            log_holder_check(&p, &g).unwrap().c0
        };
        let a = c0_at(128);
        let b = c0_at(512);
        assert!(a.is_finite() && b.is_finite());
        assert!(b <= 1.5 * a + 0.05, "not stable: {a} -> {b}");
    }

    #[test]
    fn log_holder_step_diverges_like_log() {
        let g = CarnotGroup::euclidean(1).unwrap();
        let c0_at = |res: usize| {
            let dom = unit_1d(res);
            let p = step_exponent(&dom, 1.5, 2.5);
            log_holder_check(&p, &g).unwrap().c0
        };
        let a = c0_at(64);
        let b = c0_at(1024);
        // C₀ ≈ Δp·log(1/h) for straddling pairs.
        assert!(b > a + 0.5 * (1024.0f64 / 64.0).ln() * 1.0 * 0.5, "{a} {b}");
    }

    #[test]
    fn jump_condition_cases() {
        let g = CarnotGroup::euclidean(1).unwrap();
        let dom = unit_1d(128);
        // Constant p < Q always passes.
        let p = ExponentField::constant(dom.clone(), 2.0).unwrap();
        let rep = jump_condition_check(&p, &g, 4, 0.1).unwrap();
        assert!(rep.holds);
        // 1.2 → 3.9 with Q = 4 fails: 3.9 > 12/7.
        let p = step_exponent(&dom, 1.2, 3.9);
        let rep = jump_condition_check(&p, &g, 4, 0.1).unwrap();
        assert!(!rep.holds);
        assert!(!rep.witnesses.is_empty());
        // 1.8 → 2.2 with Q = 4 passes: 2.2 ≤ 4·1.8/2.2 ≈ 3.27.
        let p = step_exponent(&dom, 1.8, 2.2);
        let rep = jump_condition_check(&p, &g, 4, 0.1).unwrap();
        assert!(rep.holds);
        // Radius at cell scale is rejected.
        assert!(jump_condition_check(&p, &g, 4, 1.0 / 128.0).is_err());
    }
}
