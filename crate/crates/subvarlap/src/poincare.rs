//! Empirical Poincaré–Sobolev verification: ratio sweeps over Lipschitz
//! test-function families, the level-truncation construction, and the
//! pointwise representation-formula check against `I₁(|Xf|)`.
//!
//! A ratio is the quotient of two Luxemburg norms and is reported per test
//! function. Vacuous quotients (zero numerator) and infinite ones (zero
//! denominator under a nonzero numerator) are flagged, never folded into the
//! family maximum.

use crate::carnot::{higher_order_gradient, horizontal_gradient_norm, CarnotGroup, Point};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridDomain, GridFunction};
use crate::lebesgue::{
    jump_condition_check, luxemburg_norm, sobolev_exponent, ExponentField, Weight,
};
use crate::muckenhoupt::{apq_constant_estimate, Ball, BallFamily};
use crate::operators::fractional_integral;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorId {
    /// Gaussian bumps of varying center and width.
    Bumps,
    /// Coordinate monomials times a bump.
    CoordBumps,
    /// Random trigonometric fields (with a smooth cutoff when zero-boundary).
    RandomTrig,
    /// Piecewise-linear tents.
    Tents,
}

impl GeneratorId {
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "bumps" => Ok(Self::Bumps),
            "coord-bumps" => Ok(Self::CoordBumps),
            "random-trig" => Ok(Self::RandomTrig),
            "tents" => Ok(Self::Tents),
            other => Err(Error::InvalidArgument(format!(
                "unknown test-function family {other:?} (expected bumps, coord-bumps, random-trig, tents)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TestFunctionFamily {
    pub generator: GeneratorId,
    pub count: usize,
    pub seed: u64,
}

impl TestFunctionFamily {
    /// Samples the family on `dom`. With `zero_boundary` every member is
    /// multiplied by a smooth cutoff vanishing on the boundary faces and the
    /// boundary cells are zeroed exactly.
    pub fn materialize(&self, dom: &GridDomain, zero_boundary: bool) -> Vec<GridFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let ndim = dom.ndim();
        let bounds: Vec<[f64; 2]> = dom.bounds().to_vec();
        let rel = move |c: &[f64], bounds: &[[f64; 2]]| -> Vec<f64> {
            c.iter()
                .zip(bounds)
                .map(|(x, [lo, hi])| (x - lo) / (hi - lo))
                .collect()
        };
        let mut out = Vec::with_capacity(self.count);
        for k in 0..self.count {
            let b = bounds.clone();
            let f = match self.generator {
                GeneratorId::Bumps => {
                    let center: Vec<f64> = (0..ndim).map(|_| rng.gen_range(0.2..0.8)).collect();
                    let width = rng.gen_range(0.08..0.3);
                    GridFunction::from_fn(dom.clone(), move |c| {
                        let u = rel(c, &b);
                        let r2: f64 = u
                            .iter()
                            .zip(&center)
                            .map(|(x, m)| (x - m) * (x - m))
                            .sum();
                        (-r2 / (width * width)).exp()
                    })
                }
                GeneratorId::CoordBumps => {
                    let axis = k % ndim;
                    let width = rng.gen_range(0.15..0.4);
                    GridFunction::from_fn(dom.clone(), move |c| {
                        let u = rel(c, &b);
                        let r2: f64 =
                            u.iter().map(|x| (x - 0.5) * (x - 0.5)).sum();
                        u[axis] * (-r2 / (width * width)).exp()
                    })
                }
                GeneratorId::RandomTrig => {
                    let modes: Vec<(Vec<f64>, f64, f64)> = (0..3)
                        .map(|_| {
                            (
                                (0..ndim).map(|_| rng.gen_range(1.0..4.0)).collect(),
                                rng.gen_range(0.0..std::f64::consts::TAU),
                                rng.gen_range(0.3..1.0),
                            )
                        })
                        .collect();
                    GridFunction::from_fn(dom.clone(), move |c| {
                        let u = rel(c, &b);
                        modes
                            .iter()
                            .map(|(fr, ph, amp)| {
                                let arg: f64 = fr
                                    .iter()
                                    .zip(&u)
                                    .map(|(f, x)| f * x * std::f64::consts::PI)
                                    .sum();
                                amp * (arg + ph).sin()
                            })
                            .sum()
                    })
                }
                GeneratorId::Tents => {
                    let apex: Vec<f64> = (0..ndim).map(|_| rng.gen_range(0.25..0.75)).collect();
                    let slope = rng.gen_range(1.0..3.0);
                    GridFunction::from_fn(dom.clone(), move |c| {
                        let u = rel(c, &b);
                        let l1: f64 = u
                            .iter()
                            .zip(&apex)
                            .map(|(x, a)| (x - a).abs())
                            .sum();
                        (1.0 - slope * l1).max(0.0)
                    })
                }
            };
            let f = if zero_boundary {
                let b = bounds.clone();
                let cutoff = GridFunction::from_fn(dom.clone(), move |c| {
                    let u = rel(c, &b);
                    u.iter()
                        .map(|x| (std::f64::consts::PI * x).sin())
                        .product()
                });
                let mut f = f.zip_with(&cutoff, |a, b| a * b).unwrap();
                f.zero_boundary();
                f
            } else {
                f
            };
            out.push(f);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    /// `‖f − f_Ω‖ / ‖X^m f‖` (Theorem-prin scenario).
    MeanSubtracted,
    /// `‖f‖ / ‖X^m f‖` for f vanishing on the boundary.
    ZeroBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InequalityKind {
    /// Left side measured in the Sobolev exponent `p*_m = Qp/(Q − mp)`.
    SobolevGain,
    /// Same exponent on both sides (the jump-condition inequality).
    SameExponent,
}

#[derive(Debug, Clone, Copy)]
pub struct RatioOutcome {
    pub numerator: f64,
    pub denominator: f64,
}

impl RatioOutcome {
    pub fn is_vacuous(&self) -> bool {
        self.numerator == 0.0
    }

    pub fn is_infinite(&self) -> bool {
        self.numerator > 0.0 && self.denominator == 0.0
    }

    /// The ratio when it is a finite, meaningful number.
    pub fn value(&self) -> Option<f64> {
        if self.is_vacuous() || self.is_infinite() {
            None
        } else {
            Some(self.numerator / self.denominator)
        }
    }
}

/// `(∫ f μ) / (∫ μ)`; `μ = 1` gives the Lebesgue mean `f_Ω`.
pub fn domain_mean(f: &GridFunction, density: Option<&GridFunction>) -> Result<f64> {
    if let Some(d) = density {
        f.check_same_domain(d)?;
    }
    let num = exec::sum_indexed(f.len(), |i| {
        f.values[i] * density.map_or(1.0, |d| d.values[i])
    });
    let den = match density {
        Some(d) => exec::sum_indexed(d.len(), |i| d.values[i]),
        None => f.len() as f64,
    };
    if den <= 0.0 {
        return Err(Error::InvalidArgument(
            "density has non-positive total mass".into(),
        ));
    }
    Ok(num / den)
}

/// Mean of `f` over the cells of a gauge ball (Lebesgue measure).
pub fn ball_mean(f: &GridFunction, ball: &Ball, g: &CarnotGroup) -> Result<f64> {
    let cells = g.ball_cells(&ball.center, ball.radius, &f.domain);
    if cells.is_empty() {
        return Err(Error::InvalidArgument(
            "ball contains no cell centers".into(),
        ));
    }
    Ok(cells.iter().map(|&i| f.values[i]).sum::<f64>() / cells.len() as f64)
}

pub fn poincare_ratio(
    f: &GridFunction,
    p: &ExponentField,
    w: &Weight,
    g: &CarnotGroup,
    mode: RatioMode,
    order: u32,
    kind: InequalityKind,
) -> Result<RatioOutcome> {
    f.check_same_domain(p.values())?;
    let q_dim = g.homogeneous_dimension();
    let lhs_exponent = match kind {
        InequalityKind::SobolevGain => sobolev_exponent(p, q_dim, order)?,
        InequalityKind::SameExponent => p.clone(),
    };
    let numerator_fn = match mode {
        RatioMode::MeanSubtracted => {
            let mean = domain_mean(f, None)?;
            f.map(|v| v - mean)
        }
        RatioMode::ZeroBoundary => {
            if !f.is_zero_on_boundary() {
                return Err(Error::InvalidArgument(
                    "zero-boundary mode requires f = 0 on boundary cells".into(),
                ));
            }
            f.clone()
        }
    };
    let grad = higher_order_gradient(f, order, g)?;
    let numerator = luxemburg_norm(&numerator_fn, &lhs_exponent, Some(w))?;
    let denominator = luxemburg_norm(&grad, p, Some(w))?;
    Ok(RatioOutcome {
        numerator,
        denominator,
    })
}

#[derive(Debug, Clone)]
pub struct RatioReport {
    pub ratios: Vec<RatioOutcome>,
    pub max_ratio: Option<f64>,
    pub argmax: Option<usize>,
    pub resolution: Vec<usize>,
    pub inequality: String,
}

fn summarize(
    ratios: Vec<RatioOutcome>,
    resolution: Vec<usize>,
    inequality: String,
) -> RatioReport {
    let mut max_ratio = None;
    let mut argmax = None;
    for (i, r) in ratios.iter().enumerate() {
        if let Some(v) = r.value() {
            if max_ratio.map_or(true, |m: f64| v > m) {
                max_ratio = Some(v);
                argmax = Some(i);
            }
        }
    }
    RatioReport {
        ratios,
        max_ratio,
        argmax,
        resolution,
        inequality,
    }
}

/// Precondition gate for the same-exponent (jump-condition) inequality:
/// the exponent must satisfy the jump condition at a mesoscale radius and
/// the weight must have a finite `A_{p⁻,(p⁻)*}` estimate.
pub fn jump_inequality_gate(
    p: &ExponentField,
    w: &Weight,
    g: &CarnotGroup,
) -> Result<()> {
    let dom = p.domain();
    let q_dim = g.homogeneous_dimension();
    if p.p_minus() >= q_dim as f64 {
        // Trivial branch of the jump condition; no Sobolev companion needed.
        return Ok(());
    }
    let h = g.min_neighbor_distance(dom);
    let delta = (8.0 * h).max(g.domain_diameter(dom) / 8.0);
    let jump = jump_condition_check(p, g, q_dim, delta)?;
    if !jump.holds {
        return Err(Error::GateFailed {
            gate: "jump-condition".into(),
            detail: format!(
                "{} witness cells at radius {delta:.4}",
                jump.witnesses.len()
            ),
        });
    }
    let p_minus = ExponentField::constant(dom.clone(), p.p_minus())?;
    let p_star = sobolev_exponent(&p_minus, q_dim, 1)?;
    let fam = BallFamily::dyadic(dom, g, 0);
    let est = apq_constant_estimate(w, &p_minus, &p_star, &fam, g)?;
    if !est.constant.is_finite() || est.constant == 0.0 {
        return Err(Error::GateFailed {
            gate: "muckenhoupt-estimate".into(),
            detail: format!("A_{{p-,(p-)*}} estimate {}", est.constant),
        });
    }
    Ok(())
}

/// Evaluates the ratio for every family member on the base grid and on
/// `levels − 1` dyadic refinements; one report per level. The exponent and
/// weight are re-sampled on each grid through the supplied closures.
#[allow(clippy::too_many_arguments)]
pub fn ratio_sweep<P, W>(
    family: &TestFunctionFamily,
    base: &GridDomain,
    g: &CarnotGroup,
    mode: RatioMode,
    order: u32,
    kind: InequalityKind,
    p_fn: P,
    w_fn: W,
    levels: usize,
) -> Result<Vec<RatioReport>>
where
    P: Fn(&GridDomain) -> Result<ExponentField>,
    W: Fn(&GridDomain) -> Result<Weight>,
{
    if family.count == 0 {
        return Err(Error::InvalidArgument("empty test-function family".into()));
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let zero_boundary = mode == RatioMode::ZeroBoundary;
    let inequality = match kind {
        InequalityKind::SobolevGain => format!("sobolev-gain(m={order},{mode:?})"),
        InequalityKind::SameExponent => format!("same-exponent(m={order},{mode:?})"),
    };
    let mut reports = Vec::with_capacity(levels);
    for level in 0..levels {
        let dom = base.refine(1 << level);
        let p = p_fn(&dom)?;
        let w = w_fn(&dom)?;
        if kind == InequalityKind::SameExponent {
            jump_inequality_gate(&p, &w, g)?;
        }
        let members = family.materialize(&dom, zero_boundary);
        let ratios = members
            .iter()
            .map(|f| poincare_ratio(f, &p, &w, g, mode, order, kind))
            .collect::<Result<Vec<_>>>()?;
        reports.push(summarize(ratios, dom.resolution().to_vec(), inequality.clone()));
    }
    Ok(reports)
}

/// The level truncation `f_j` of the proof of the p = 1 Poincaré lemma:
/// with `g = |f − c|`, clamps `g` to the dyadic band `[2^j, 2^{j+1}]`.
pub fn level_truncation(f: &GridFunction, c: f64, j: i32) -> GridFunction {
    let lo = (2.0f64).powi(j);
    let hi = (2.0f64).powi(j + 1);
    f.map(|v| (v - c).abs().clamp(lo, hi))
}

#[derive(Debug, Clone)]
pub struct RepresentationReport {
    /// Empirical constant `max |f − f_{B₀}| / I₁(|Xf|)`, `None` when every
    /// point was excluded (vacuous).
    pub constant: Option<f64>,
    pub argmax_cell: Option<usize>,
    pub points_used: usize,
    pub points_excluded: usize,
    pub ball: Ball,
}

/// The largest gauge ball centered at the domain's center that fits inside.
pub fn central_ball(dom: &GridDomain, g: &CarnotGroup) -> Result<Ball> {
    let center_coords: Vec<f64> = dom
        .bounds()
        .iter()
        .map(|[lo, hi]| 0.5 * (lo + hi))
        .collect();
    let center = Point::new(&center_coords)?;
    let mut lo = 0.0f64;
    let mut hi = g.domain_diameter(dom);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g.ball_inside_domain(&center, mid, dom) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::InvalidState(
            "no gauge ball fits inside the domain".into(),
        ));
    }
    Ok(Ball {
        center,
        radius: lo,
    })
}

/// Representation-formula check: the smallest `C` with
/// `|f(x) − f_{B₀}| ≤ C·I₁(|Xf|)(x)` over interior cells, excluding cells
/// where the right side is below `10⁻¹²`.
pub fn representation_check(
    f: &GridFunction,
    g: &CarnotGroup,
    b0: &Ball,
) -> Result<RepresentationReport> {
    let dom = &f.domain;
    let f_b0 = ball_mean(f, b0, g)?;
    let grad = horizontal_gradient_norm(f, g)?;
    let denom = fractional_integral(&grad, 1.0, g)?;
    let mut best: Option<(usize, f64)> = None;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for i in 0..f.len() {
        if dom.is_boundary(i) {
            continue;
        }
        if denom.values[i] < 1e-12 {
            excluded += 1;
            continue;
        }
        used += 1;
        let c = (f.values[i] - f_b0).abs() / denom.values[i];
        if best.map_or(true, |(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    Ok(RepresentationReport {
        constant: best.map(|(_, c)| c),
        argmax_cell: best.map(|(i, _)| i),
        points_used: used,
        points_excluded: excluded,
        ball: *b0,
    })
}
