//! Muckenhoupt `A_{p(·),q(·)}` constants over sampled ball families.
//!
//! The true constant is a supremum over all balls; a finite family gives a
//! certified lower bound. Membership is operationalized through two probes:
//! stability of the estimate under family enrichment (finite weights) and
//! doubling of the estimate under grid refinement (divergent weights, where
//! ever smaller balls see the singularity).

use crate::carnot::{CarnotGroup, Point};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridDomain, GridFunction};
use crate::lebesgue::{conjugate_exponent, ExponentField, Weight};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct BallFamily {
    pub balls: Vec<Ball>,
    pub policy: String,
}

impl BallFamily {
    /// Grid-point centers (strided) crossed with dyadic radii `h·2^k` up to
    /// the gauge diameter. Enrichment `level` halves the center stride and,
    /// from level 1 on, inserts √2-intermediate radii.
    pub fn dyadic(dom: &GridDomain, g: &CarnotGroup, level: u32) -> Self {
        let stride = (4usize >> level.min(2)).max(1);
        let h = g.min_neighbor_distance(dom);
        let diam = g.domain_diameter(dom);
        let mut radii = Vec::new();
        let mut r = h;
        while r <= diam {
            radii.push(r);
            if level >= 1 {
                let mid = r * std::f64::consts::SQRT_2;
                if mid <= diam {
                    radii.push(mid);
                }
            }
            r *= 2.0;
        }
        let mut balls = Vec::new();
        let n = dom.cell_count();
        for idx in 0..n {
            let m = dom.multi_index(idx);
            if (0..dom.ndim()).any(|a| m[a] % stride != 0) {
                continue;
            }
            let center = Point::from_cell(dom, idx);
            for &r in &radii {
                balls.push(Ball { center, radius: r });
            }
        }
        Self {
            balls,
            policy: format!("dyadic(stride={stride},radii={},level={level})", radii.len()),
        }
    }

    /// Every grid point with a single sub-cell radius; the smallest family
    /// that still covers each point with a one-cell-scale ball.
    pub fn one_cell(dom: &GridDomain, g: &CarnotGroup) -> Self {
        let r = 0.999 * g.min_neighbor_distance(dom);
        let balls = (0..dom.cell_count())
            .map(|idx| Ball {
                center: Point::from_cell(dom, idx),
                radius: r,
            })
            .collect();
        Self {
            balls,
            policy: "one-cell".into(),
        }
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MuckenhouptEstimate {
    pub constant: f64,
    pub argmax_ball: Option<Ball>,
    pub gamma: f64,
    pub balls_used: usize,
}

/// Luxemburg norm of a function given on a cell subset as `(value, exponent)`
/// pairs: solves `Σ (v/λ)^{p} · cell = 1` by bisection.
fn luxemburg_subset(pairs: &[(f64, f64)], cell: f64) -> f64 {
    let rho = |lam: f64| -> f64 {
        pairs
            .iter()
            .map(|&(v, p)| if v == 0.0 { 0.0 } else { (v / lam).powf(p) })
            .sum::<f64>()
            * cell
    };
    let rho0 = rho(1.0);
    if rho0 == 0.0 {
        return 0.0;
    }
    let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, p) in pairs {
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    let a = rho0.powf(1.0 / pmin);
    let b = rho0.powf(1.0 / pmax);
    let mut lo = a.min(b) * 0.5;
    let mut hi = a.max(b) * 2.0;
    while rho(lo) < 1.0 && lo > f64::MIN_POSITIVE {
        lo *= 0.5;
    }
    while rho(hi) > 1.0 && hi < f64::MAX / 4.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rho(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn gamma_of(p: &ExponentField, q: &ExponentField) -> Result<f64> {
    let n = p.values().len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let g = 1.0 / p.values().values[i] - 1.0 / q.values().values[i];
        lo = lo.min(g);
        hi = hi.max(g);
    }
    if hi - lo > 1e-12 {
        return Err(Error::InvalidExponentPair { spread: hi - lo });
    }
    let gamma = 0.5 * (lo + hi);
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma = {gamma} outside [0,1)"
        )));
    }
    Ok(gamma)
}

/// Per-ball quantity `|B|^{γ−1}·‖ωχ_B‖_{q(·)}·‖ω⁻¹χ_B‖_{p′(·)}`, or `None`
/// when no cell center falls in the ball.
pub fn apq_ball_quantity(
    w: &Weight,
    p: &ExponentField,
    q: &ExponentField,
    ball: &Ball,
    g: &CarnotGroup,
) -> Result<Option<f64>> {
    let dom = p.domain();
    let gamma = gamma_of(p, q)?;
    let p_conj = conjugate_exponent(p)?;
    Ok(ball_quantity_inner(w, q, &p_conj, gamma, ball, g, dom))
}

fn ball_quantity_inner(
    w: &Weight,
    q: &ExponentField,
    p_conj: &ExponentField,
    gamma: f64,
    ball: &Ball,
    g: &CarnotGroup,
    dom: &GridDomain,
) -> Option<f64> {
    let cells = g.ball_cells(&ball.center, ball.radius, dom);
    if cells.is_empty() {
        return None;
    }
    let cell = dom.cell_measure();
    let measure = cells.len() as f64 * cell;
    let wq: Vec<(f64, f64)> = cells
        .iter()
        .map(|&i| (w.values().values[i], q.values().values[i]))
        .collect();
    let winv_pc: Vec<(f64, f64)> = cells
        .iter()
        .map(|&i| (1.0 / w.values().values[i], p_conj.values().values[i]))
        .collect();
    let n1 = luxemburg_subset(&wq, cell);
    let n2 = luxemburg_subset(&winv_pc, cell);
    Some(measure.powf(gamma - 1.0) * n1 * n2)
}

/// Maximum of the per-ball quantity over the family: a certified lower bound
/// on `[ω]_{A_{p(·),q(·)}}`.
pub fn apq_constant_estimate(
    w: &Weight,
    p: &ExponentField,
    q: &ExponentField,
    balls: &BallFamily,
    g: &CarnotGroup,
) -> Result<MuckenhouptEstimate> {
    let dom = p.domain();
    w.values().check_same_domain(p.values())?;
    if q.p_minus() <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "q⁻ = {} must exceed 1",
            q.p_minus()
        )));
    }
    let gamma = gamma_of(p, q)?;
    let p_conj = conjugate_exponent(p)?;
    let quantities = exec::map_indexed(balls.len(), |b| {
        ball_quantity_inner(w, q, &p_conj, gamma, &balls.balls[b], g, dom)
    });
    let mut best: Option<(usize, f64)> = None;
    let mut used = 0usize;
    for (i, qv) in quantities.iter().enumerate() {
        if let Some(v) = qv {
            used += 1;
            if best.map_or(true, |(_, b)| *v > b) {
                best = Some((i, *v));
            }
        }
    }
    Ok(MuckenhouptEstimate {
        constant: best.map_or(0.0, |(_, v)| v),
        argmax_ball: best.map(|(i, _)| balls.balls[i]),
        gamma,
        balls_used: used,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DoublingReport {
    pub worst_ratio: f64,
    pub balls_used: usize,
    pub balls_skipped: usize,
}

/// Worst `μ(B(x,2r))/μ(B(x,r))` over family balls whose doubled ball stays
/// inside the domain; zero-measure balls are skipped.
pub fn doubling_check(
    density: &GridFunction,
    balls: &BallFamily,
    g: &CarnotGroup,
) -> Result<DoublingReport> {
    if density.values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("density must be non-negative".into()));
    }
    let dom = &density.domain;
    let cell = dom.cell_measure();
    let mu = |center: &Point, r: f64| -> f64 {
        g.ball_cells(center, r, dom)
            .iter()
            .map(|&i| density.values[i])
            .sum::<f64>()
            * cell
    };
    let ratios = exec::map_indexed(balls.len(), |b| {
        let Ball { center, radius } = balls.balls[b];
        if !g.ball_inside_domain(&center, 2.0 * radius, dom) {
            return None;
        }
        let small = mu(&center, radius);
        if small == 0.0 {
            return Some(Err(()));
        }
        Some(Ok(mu(&center, 2.0 * radius) / small))
    });
    let mut worst: f64 = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for r in ratios.into_iter().flatten() {
        match r {
            Ok(v) => {
                used += 1;
                worst = worst.max(v);
            }
            Err(()) => skipped += 1,
        }
    }
    Ok(DoublingReport {
        worst_ratio: worst,
        balls_used: used,
        balls_skipped: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipVerdict {
    /// Estimate changed by < 5% under each of the last two enrichments.
    Stable,
    /// Estimate at least doubled under each of the last two steps.
    Divergent,
    Indeterminate,
}

pub fn classify_membership(series: &[f64]) -> MembershipVerdict {
    if series.len() < 3 {
        return MembershipVerdict::Indeterminate;
    }
    let n = series.len();
    let (a, b, c) = (series[n - 3], series[n - 2], series[n - 1]);
    if b >= 2.0 * a && c >= 2.0 * b {
        return MembershipVerdict::Divergent;
    }
    let rel = |x: f64, y: f64| (y - x).abs() / x.max(f64::MIN_POSITIVE);
    if rel(a, b) < 0.05 && rel(b, c) < 0.05 {
        return MembershipVerdict::Stable;
    }
    MembershipVerdict::Indeterminate
}

/// Estimates over successive family enrichment levels on a fixed grid.
pub fn apq_enrichment_series(
    w: &Weight,
    p: &ExponentField,
    q: &ExponentField,
    g: &CarnotGroup,
    levels: u32,
) -> Result<Vec<f64>> {
    (0..levels)
        .map(|lvl| {
            let fam = BallFamily::dyadic(p.domain(), g, lvl);
            Ok(apq_constant_estimate(w, p, q, &fam, g)?.constant)
        })
        .collect()
}

/// Estimates over successive grid refinements (fields re-sampled each time);
/// the probe that exposes weights whose singularity defeats every ball scale.
pub fn apq_refinement_series<W, P, Q>(
    w_fn: W,
    p_fn: P,
    q_fn: Q,
    dom: &GridDomain,
    g: &CarnotGroup,
    level: u32,
    refinements: u32,
) -> Result<Vec<f64>>
where
    W: Fn(&[f64]) -> f64 + Sync,
    P: Fn(&[f64]) -> f64 + Sync,
    Q: Fn(&[f64]) -> f64 + Sync,
{
    let mut out = Vec::new();
    for k in 0..refinements {
        let d = dom.refine(1 << k);
        let w = Weight::new(GridFunction::from_fn(d.clone(), &w_fn))?;
        let p = ExponentField::new(GridFunction::from_fn(d.clone(), &p_fn))?;
        let q = ExponentField::new(GridFunction::from_fn(d.clone(), &q_fn))?;
        let fam = BallFamily::dyadic(&d, g, level);
        out.push(apq_constant_estimate(&w, &p, &q, &fam, g)?.constant);
    }
    Ok(out)
}
