//! Discrete Hardy–Littlewood maximal operator, fractional integral `I_α`,
//! the Rubio de Francia iteration, and the Sawyer–Wheeden ball-test
//! quantities.
//!
//! Ball measures inside `I_α` use the same cell-counting convention as
//! [`crate::carnot::ball_measure`]: `|B(x, d(x,y))|` is the number of cells
//! strictly closer to `x` than `y`, times the cell measure, computed by a
//! single distance sort per output point.

use crate::carnot::{CarnotGroup, Point};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridDomain, GridFunction};
use crate::lebesgue::{luxemburg_norm_density, ExponentField};
use crate::muckenhoupt::BallFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct OperatorNormEstimate {
    /// Max over probes of output-norm/input-norm: a lower bound on the norm.
    pub value: f64,
    pub probe_family: String,
    pub space: String,
    pub probes_skipped: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelProfile {
    pub alpha: f64,
    pub truncation_radius: f64,
}

impl KernelProfile {
    pub fn new(alpha: f64, truncation_radius: f64, q_dim: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < q_dim as f64) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} outside (0, Q = {q_dim})"
            )));
        }
        if !(truncation_radius > 0.0) {
            return Err(Error::InvalidArgument("truncation radius must be positive".into()));
        }
        Ok(Self {
            alpha,
            truncation_radius,
        })
    }

    /// `K_r(x,y) = min{ r^α/|B(x,r)|, d(x,y)^α/|B(x,d(x,y))| }`.
    pub fn evaluate(
        &self,
        x: &Point,
        y: &Point,
        g: &CarnotGroup,
        dom: &GridDomain,
    ) -> Result<f64> {
        let d = g.distance(x, y)?;
        let r = self.truncation_radius;
        let br = crate::carnot::ball_measure(x, r, g, dom)?;
        let first = if br.degenerate {
            f64::INFINITY
        } else {
            r.powf(self.alpha) / br.value
        };
        if d == 0.0 {
            return Ok(first);
        }
        let bd = crate::carnot::ball_measure(x, d, g, dom)?;
        let second = if bd.degenerate {
            f64::INFINITY
        } else {
            d.powf(self.alpha) / bd.value
        };
        Ok(first.min(second))
    }
}

/// Per-ball μ-measure and |f|-integral, shared by the maximal operator.
struct BallStats {
    mu: f64,
    integral: f64,
}

fn ball_stats(
    f: &GridFunction,
    balls: &BallFamily,
    density: Option<&GridFunction>,
    g: &CarnotGroup,
) -> Vec<BallStats> {
    let dom = &f.domain;
    let cell = dom.cell_measure();
    exec::map_indexed(balls.len(), |b| {
        let ball = &balls.balls[b];
        let cells = g.ball_cells(&ball.center, ball.radius, dom);
        let mut mu = 0.0;
        let mut integral = 0.0;
        for &i in &cells {
            let dens = density.map_or(1.0, |d| d.values[i]);
            mu += dens;
            integral += f.values[i].abs() * dens;
        }
        BallStats {
            mu: mu * cell,
            integral: integral * cell,
        }
    })
}

/// `Mf(x) = max over family balls containing x of the μ-average of |f|`.
/// Fails with `IncompleteFamily` when some point lies in no ball.
pub fn maximal_operator(
    f: &GridFunction,
    balls: &BallFamily,
    density: Option<&GridFunction>,
    g: &CarnotGroup,
) -> Result<GridFunction> {
    let dom = f.domain.clone();
    if let Some(d) = density {
        f.check_same_domain(d)?;
    }
    let stats = ball_stats(f, balls, density, g);
    let n = dom.cell_count();
    let out = exec::map_indexed(n, |i| {
        let mut best: Option<f64> = None;
        for (b, ball) in balls.balls.iter().enumerate() {
            if stats[b].mu == 0.0 {
                continue;
            }
            let d = g.distance_to_cell(&ball.center, &dom, i);
            if d < ball.radius {
                let avg = stats[b].integral / stats[b].mu;
                best = Some(best.map_or(avg, |v: f64| v.max(avg)));
            }
        }
        best
    });
    if let Some(i) = out.iter().position(|v| v.is_none()) {
        return Err(Error::IncompleteFamily { cell: i });
    }
    GridFunction::new(dom, out.into_iter().map(|v| v.unwrap()).collect())
}

/// Fractional integral
/// `I_α f(x) = Σ_{y} f(y) · d(x,y)^α / |B(x,d(x,y))| · cell`, with the
/// self-cell contributing at distance `h_cell` = half the cell diagonal.
pub fn fractional_integral(
    f: &GridFunction,
    alpha: f64,
    g: &CarnotGroup,
) -> Result<GridFunction> {
    let dom = f.domain.clone();
    let q = g.homogeneous_dimension() as f64;
    if !(alpha > 0.0 && alpha < q) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} outside (0, Q = {q})"
        )));
    }
    if dom.ndim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: dom.ndim(),
        });
    }
    let n = dom.cell_count();
    // Half the cell diagonal in the gauge: the distance the self-cell is
    // assigned. For ℍ¹ the t-axis contributes at its homogeneity, via the
    // gauge of the half-cell offset.
    let origin = g.identity();
    let half = {
        let mut c = [0.0; crate::grid::MAX_DIM];
        for a in 0..dom.ndim() {
            c[a] = dom.spacing(a) / 2.0;
        }
        let p = Point::new(&c[..dom.ndim()]).unwrap();
        g.distance(&origin, &p).unwrap()
    };
    let values = exec::map_indexed(n, |ix| {
        let x = Point::from_cell(&dom, ix);
        // (distance, cell index), sorted; rank of a group of equal distances
        // is the count of strictly closer cells, so rank·cell = |B(x,d)|.
        let mut pairs: Vec<(f64, u32)> = (0..n)
            .map(|iy| (g.distance_to_cell(&x, &dom, iy), iy as u32))
            .collect();
        pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut acc = 0.0;
        let mut i = 0;
        while i < n {
            let d = pairs[i].0;
            let mut j = i;
            let rank = i;
            while j < n && pairs[j].0 == d {
                j += 1;
            }
            if d == 0.0 {
                // Self cell (and any exact duplicates): |B(x,half)| is at
                // least the self cell.
                for k in i..j {
                    let fy = f.values[pairs[k].1 as usize];
                    acc += fy * half.powf(alpha) / (j - i) as f64;
                }
            } else {
                let inv_rank = 1.0 / rank as f64;
                for k in i..j {
                    let fy = f.values[pairs[k].1 as usize];
                    // d^α/|B|·cell = d^α/rank (the cell measures cancel).
                    acc += fy * d.powf(alpha) * inv_rank;
                }
            }
            i = j;
        }
        acc
    });
    GridFunction::new(dom, values)
}

#[derive(Debug, Clone)]
pub struct RubioDeFranciaResult {
    pub function: GridFunction,
    pub terms_used: usize,
    /// `L^{p(·)}_μ` norm of the last series term: the truncation certificate.
    pub truncation_certificate: f64,
}

/// Truncated Rubio de Francia series `Rh = Σ_{k≤K} M^k h / (2‖M‖)^k`.
/// Stops early once the term norm drops below `1e-12·‖h‖`; errors when a
/// term norm fails to decrease (the ‖M‖ estimate was too small).
pub fn rubio_de_francia(
    h: &GridFunction,
    p: &ExponentField,
    mu_density: Option<&GridFunction>,
    norm_m: &OperatorNormEstimate,
    k_terms: usize,
    balls: &BallFamily,
    g: &CarnotGroup,
) -> Result<RubioDeFranciaResult> {
    if h.values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("h must be non-negative".into()));
    }
    if norm_m.value < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "maximal-operator norm estimate {} < 1",
            norm_m.value
        )));
    }
    if k_terms < 1 {
        return Err(Error::InvalidArgument("k_terms must be at least 1".into()));
    }
    let h_norm = luxemburg_norm_density(h, p, mu_density)?;
    let denom = 2.0 * norm_m.value;
    let mut sum = h.clone();
    let mut term = h.clone();
    let mut prev_norm = h_norm;
    let mut used = 1;
    let mut certificate = h_norm;
    for k in 1..=k_terms {
        // Lebesgue averages inside the iteration; μ enters through the norms
        // only. (Averaging against μ itself would make M trivially bounded
        // and hide a bad weight.)
        let m_term = maximal_operator(&term, balls, None, g)?;
        term = m_term.scale(1.0 / denom);
        let term_norm = luxemburg_norm_density(&term, p, mu_density)?;
        if term_norm >= prev_norm && term_norm > 1e-12 * h_norm {
            return Err(Error::NormEstimateTooSmall { term: k });
        }
        sum = sum.zip_with(&term, |a, b| a + b)?;
        used = k + 1;
        certificate = term_norm;
        prev_norm = term_norm;
        if term_norm < 1e-12 * h_norm {
            break;
        }
    }
    Ok(RubioDeFranciaResult {
        function: sum,
        terms_used: used,
        truncation_certificate: certificate,
    })
}

/// Deterministic probe family for operator-norm estimation: a constant,
/// axis indicators, centered bumps, and seeded random trigonometric fields.
pub fn probe_family(dom: &GridDomain, seed: u64, random_count: usize) -> Vec<GridFunction> {
    let mut probes = vec![GridFunction::constant(dom.clone(), 1.0)];
    let ndim = dom.ndim();
    for a in 0..ndim {
        let mid = 0.5 * (dom.bounds()[a][0] + dom.bounds()[a][1]);
        probes.push(GridFunction::from_fn(dom.clone(), move |c| {
            if c[a] <= mid {
                1.0
            } else {
                0.0
            }
        }));
    }
    for width in [0.25, 0.1, 0.05] {
        let center: Vec<f64> = dom
            .bounds()
            .iter()
            .map(|[lo, hi]| 0.5 * (lo + hi))
            .collect();
        probes.push(GridFunction::from_fn(dom.clone(), move |c| {
            let r2: f64 = c
                .iter()
                .zip(&center)
                .map(|(x, m)| (x - m) * (x - m))
                .sum();
            (-r2 / (width * width)).exp()
        }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_count {
        let freqs: Vec<f64> = (0..ndim).map(|_| rng.gen_range(1.0..6.0)).collect();
        let phases: Vec<f64> = (0..ndim)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        let amp = rng.gen_range(0.5..2.0);
        probes.push(GridFunction::from_fn(dom.clone(), move |c| {
            let mut v = amp;
            for a in 0..c.len() {
                v *= (freqs[a] * c[a] * std::f64::consts::PI + phases[a]).sin().abs() + 0.05;
            }
            v
        }));
    }
    probes
}

/// Lower bound on an operator norm over `L^{p(·)}_μ` from a probe family;
/// zero-norm probes are skipped. With `clamp_at_one` the result is at least
/// 1 (appropriate for M, which fixes constants).
pub fn operator_norm_estimate<Op>(
    op: Op,
    p: &ExponentField,
    mu_density: Option<&GridFunction>,
    probes: &[GridFunction],
    clamp_at_one: bool,
    label: &str,
) -> Result<OperatorNormEstimate>
where
    Op: Fn(&GridFunction) -> Result<GridFunction>,
{
    if probes.is_empty() {
        return Err(Error::InvalidArgument("empty probe family".into()));
    }
    let mut best: f64 = 0.0;
    let mut skipped = 0;
    for f in probes {
        let in_norm = luxemburg_norm_density(f, p, mu_density)?;
        if in_norm == 0.0 {
            skipped += 1;
            continue;
        }
        let out = op(f)?;
        let out_norm = luxemburg_norm_density(&out, p, mu_density)?;
        best = best.max(out_norm / in_norm);
    }
    if clamp_at_one {
        best = best.max(1.0);
    }
    Ok(OperatorNormEstimate {
        value: best,
        probe_family: label.into(),
        space: format!("L^p(.) (p- = {}, p+ = {})", p.p_minus(), p.p_plus()),
        probes_skipped: skipped,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SawyerWheedenReport {
    pub constant: f64,
    pub balls_used: usize,
    pub balls_skipped: usize,
}

/// Sawyer–Wheeden ball test: max over the family of
/// `φ(B)·(∫_B ω dμ)^{1/q}·(∫_B ν^{1−p′} dμ)^{1/p′}` with
/// `φ(B) = sup{ d(x,y)^α/|B(x,d(x,y))| : x,y ∈ B, d(x,y) ≥ C(K)·r(B) }`
/// and `C(K) = K⁻⁴/9`. The kernel `d^α/|B(x,d)|` essentially decreases in
/// `d`, so for each anchor cell the supremum is probed at the smallest and
/// the largest admissible distance; anchors are strided in large balls.
/// Balls with no separated pair are skipped.
pub fn sawyer_wheeden_check(
    w_target: &GridFunction,
    v_source: &GridFunction,
    p: f64,
    q: f64,
    alpha: f64,
    balls: &BallFamily,
    g: &CarnotGroup,
) -> Result<SawyerWheedenReport> {
    let qdim = g.homogeneous_dimension() as f64;
    if !(1.0 < p && p <= q && q < f64::INFINITY) {
        return Err(Error::InvalidArgument(format!(
            "need 1 < p <= q < inf, got p = {p}, q = {q}"
        )));
    }
    if !(alpha > 0.0 && alpha < qdim) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} outside (0, Q = {qdim})"
        )));
    }
    w_target.check_same_domain(v_source)?;
    let dom = &w_target.domain;
    let cell = dom.cell_measure();
    let separation = g.quasi_metric_constant().powi(-4) / 9.0;
    let p_conj = p / (p - 1.0);
    const MAX_ANCHORS: usize = 64;
    let per_ball = exec::map_indexed(balls.len(), |b| {
        let ball = &balls.balls[b];
        let cells = g.ball_cells(&ball.center, ball.radius, dom);
        if cells.is_empty() {
            return None;
        }
        let min_sep = separation * ball.radius;
        let stride = (cells.len() / MAX_ANCHORS).max(1);
        let mut phi: f64 = 0.0;
        let mut found = false;
        for &i in cells.iter().step_by(stride) {
            let x = Point::from_cell(dom, i);
            let mut d_near = f64::INFINITY;
            let mut d_far = 0.0f64;
            for &j in &cells {
                if j == i {
                    continue;
                }
                let d = g.distance_to_cell(&x, dom, j);
                if d >= min_sep {
                    d_near = d_near.min(d);
                    d_far = d_far.max(d);
                }
            }
            if !d_near.is_finite() {
                continue;
            }
            found = true;
            for d in [d_near, d_far] {
                let bm = g.ball_cells(&x, d, dom).len() as f64 * cell;
                if bm > 0.0 {
                    phi = phi.max(d.powf(alpha) / bm);
                }
            }
        }
        if !found {
            return Some(Err(()));
        }
        let int_w: f64 = cells.iter().map(|&i| w_target.values[i]).sum::<f64>() * cell;
        let int_v: f64 = cells
            .iter()
            .map(|&i| v_source.values[i].powf(1.0 - p_conj))
            .sum::<f64>()
            * cell;
        Some(Ok(phi * int_w.powf(1.0 / q) * int_v.powf(1.0 / p_conj)))
    });
    let mut constant: f64 = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for r in per_ball.into_iter().flatten() {
        match r {
            Ok(v) => {
                used += 1;
                constant = constant.max(v);
            }
            Err(()) => skipped += 1,
        }
    }
    Ok(SawyerWheedenReport {
        constant,
        balls_used: used,
        balls_skipped: skipped,
    })
}

/// Weak-type constant for `I_α`: sweeps `t` over a log grid and returns
/// `max_t (∫_{|I_α f|>t} ω^q dx)^{1/q} / (t^{-p} ∫ |f|^p ω^p dx)^{1/p}`.
pub fn weak_type_check(
    f: &GridFunction,
    alpha: f64,
    p: f64,
    q: f64,
    w: &crate::lebesgue::Weight,
    g: &CarnotGroup,
    t_steps: usize,
) -> Result<f64> {
    if !(1.0 <= p && p < q && q < f64::INFINITY) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p < q < inf, got p = {p}, q = {q}"
        )));
    }
    let i_f = fractional_integral(f, alpha, g)?.abs();
    let top = i_f.sup_norm();
    if top == 0.0 {
        return Ok(0.0);
    }
    let cell = f.domain.cell_measure();
    let rhs_base = exec::sum_indexed(f.len(), |i| {
        let v = f.values[i].abs() * w.values().values[i];
        if v == 0.0 {
            0.0
        } else {
            v.powf(p)
        }
    }) * cell;
    if rhs_base == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for j in 0..t_steps {
        // t from top·10⁻³ up to just below top.
        let t = top * 10f64.powf(-3.0 + 3.0 * j as f64 / t_steps as f64) * 0.999;
        let lhs_q = exec::sum_indexed(f.len(), |i| {
            if i_f.values[i] > t {
                w.values().values[i].powf(q)
            } else {
                0.0
            }
        }) * cell;
        if lhs_q == 0.0 {
            continue;
        }
        let lhs = lhs_q.powf(1.0 / q);
        let rhs = (rhs_base / t.powf(p)).powf(1.0 / p);
        worst = worst.max(lhs / rhs);
    }
    Ok(worst)
}
