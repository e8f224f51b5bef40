//! Variational solver for the degenerate p(x)-Laplacian Dirichlet problem:
//! minimizes the (ε-regularized) energy
//!
//! ```text
//! F(u) = Σ [ (ε² + ⟨A Xu, Xu⟩)^{p/2}/p + |u ω|^p/p − f u ] · cell
//! ```
//!
//! over grid functions vanishing on the boundary cell layer. The discrete
//! energy gradient is assembled as the exact adjoint of the difference
//! stencils, so the discrete weak form and the gradient coincide by
//! construction; descent is gradient descent with Barzilai–Borwein step
//! seeding and Armijo backtracking, with ε continuation for p(x) < 2.

use crate::carnot::{axis_stride, horizontal_coefficient, CarnotGroup};
use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{GridDomain, GridFunction};
use crate::lebesgue::{conjugate_exponent, luxemburg_norm, ExponentField, Weight};
use crate::poincare::{GeneratorId, TestFunctionFamily};

/// Per-cell symmetric coefficient matrix `A(x)` on the horizontal layer,
/// with the ellipticity constants of the bound
/// `ω²η₁|ξ|² ≤ ⟨A(x)ξ,ξ⟩ ≤ ω²η₂|ξ|²`.
#[derive(Debug, Clone)]
pub struct EllipticityField {
    n1: usize,
    /// Cell-major, row-major `n1×n1` blocks.
    entries: Vec<f64>,
    pub eta1: f64,
    pub eta2: f64,
}

impl EllipticityField {
    /// `A = ω² I` (η₁ = η₂ = 1).
    pub fn scaled_identity(w: &Weight, n1: usize) -> Self {
        let n = w.values().len();
        let mut entries = vec![0.0; n * n1 * n1];
        for i in 0..n {
            let w2 = w.values().values[i] * w.values().values[i];
            for k in 0..n1 {
                entries[(i * n1 + k) * n1 + k] = w2;
            }
        }
        Self {
            n1,
            entries,
            eta1: 1.0,
            eta2: 1.0,
        }
    }

    /// `A = ω² · R diag(1, ratio, …) Rᵀ` with `R` the rotation by `theta` in
    /// the first two horizontal directions (η₁ = min(1, ratio),
    /// η₂ = max(1, ratio)). Falls back to `ratio`-scaled identity for n₁ = 1.
    pub fn rotated_diagonal(w: &Weight, n1: usize, theta: f64, ratio: f64) -> Result<Self> {
        if ratio <= 0.0 {
            return Err(Error::InvalidArgument(
                "ellipticity ratio must be positive".into(),
            ));
        }
        let n = w.values().len();
        let mut entries = vec![0.0; n * n1 * n1];
        let (s, c) = theta.sin_cos();
        for i in 0..n {
            let w2 = w.values().values[i] * w.values().values[i];
            if n1 == 1 {
                entries[i] = w2 * ratio;
                continue;
            }
            // R diag(1, ratio) Rᵀ in the (0,1) block; identity elsewhere.
            let a00 = c * c + ratio * s * s;
            let a01 = (1.0 - ratio) * s * c;
            let a11 = s * s + ratio * c * c;
            let base = i * n1 * n1;
            entries[base] = w2 * a00;
            entries[base + 1] = w2 * a01;
            entries[base + n1] = w2 * a01;
            entries[base + n1 + 1] = w2 * a11;
            for k in 2..n1 {
                entries[base + k * n1 + k] = w2;
            }
        }
        Ok(Self {
            n1,
            entries,
            eta1: ratio.min(1.0),
            eta2: ratio.max(1.0),
        })
    }

    pub fn horizontal_dim(&self) -> usize {
        self.n1
    }

    fn block(&self, cell: usize) -> &[f64] {
        &self.entries[cell * self.n1 * self.n1..(cell + 1) * self.n1 * self.n1]
    }

    /// `A(cell)·ξ` into `out`.
    pub fn apply(&self, cell: usize, xi: &[f64], out: &mut [f64]) {
        let a = self.block(cell);
        for r in 0..self.n1 {
            out[r] = (0..self.n1).map(|c| a[r * self.n1 + c] * xi[c]).sum();
        }
    }

    /// `⟨A(cell)ξ, ξ⟩`.
    pub fn quadratic(&self, cell: usize, xi: &[f64]) -> f64 {
        let a = self.block(cell);
        let mut s = 0.0;
        for r in 0..self.n1 {
            for c in 0..self.n1 {
                s += a[r * self.n1 + c] * xi[r] * xi[c];
            }
        }
        s
    }

    /// Checks symmetry and the two-sided ellipticity bound on random probe
    /// vectors at every cell.
    pub fn check(&self, w: &Weight, seed: u64, probes: usize) -> Result<()> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = w.values().len();
        let mut xi = vec![0.0; self.n1];
        for i in 0..n {
            let a = self.block(i);
            for r in 0..self.n1 {
                for c in 0..r {
                    if (a[r * self.n1 + c] - a[c * self.n1 + r]).abs() > 1e-12 {
                        return Err(Error::InvalidState(format!(
                            "A not symmetric at cell {i}"
                        )));
                    }
                }
            }
            let w2 = w.values().values[i] * w.values().values[i];
            for _ in 0..probes {
                let mut norm2 = 0.0;
                for x in xi.iter_mut() {
                    *x = rng.gen_range(-1.0..1.0);
                    norm2 += *x * *x;
                }
                if norm2 == 0.0 {
                    continue;
                }
                let q = self.quadratic(i, &xi);
                let lo = w2 * self.eta1 * norm2;
                let hi = w2 * self.eta2 * norm2;
                if q < lo * (1.0 - 1e-9) - 1e-300 || q > hi * (1.0 + 1e-9) + 1e-300 {
                    return Err(Error::InvalidState(format!(
                        "ellipticity bound violated at cell {i}: {q} outside [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Exit when the gradient sup-norm drops below this.
    pub grad_tol: f64,
    /// Exit a continuation stage when the relative energy decrease stalls.
    pub energy_stall: f64,
    pub max_iterations: usize,
    /// Regularization schedule; `None` selects
    /// `{10⁻², 10⁻⁴, 10⁻⁶}` plus a final exact stage when p⁻ ≥ 2.
    pub eps_schedule: Option<Vec<f64>>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            energy_stall: 1e-10,
            max_iterations: 100_000,
            eps_schedule: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirichletProblem {
    pub dom: GridDomain,
    pub g: CarnotGroup,
    pub p: ExponentField,
    pub w: Weight,
    pub a: EllipticityField,
    pub f: GridFunction,
    pub settings: SolverSettings,
}

impl DirichletProblem {
    pub fn new(
        g: CarnotGroup,
        p: ExponentField,
        w: Weight,
        a: EllipticityField,
        f: GridFunction,
        settings: SolverSettings,
    ) -> Result<Self> {
        let dom = p.domain().clone();
        if dom.ndim() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                got: dom.ndim(),
            });
        }
        let q = g.homogeneous_dimension() as f64;
        if p.p_minus() <= 1.0 || p.p_plus() >= q {
            return Err(Error::InvalidArgument(format!(
                "need 1 < p⁻ ≤ p⁺ < Q, got p⁻ = {}, p⁺ = {}, Q = {q}",
                p.p_minus(),
                p.p_plus()
            )));
        }
        if a.horizontal_dim() != g.horizontal_dim() {
            return Err(Error::DimensionMismatch {
                expected: g.horizontal_dim(),
                got: a.horizontal_dim(),
            });
        }
        f.check_same_domain(p.values())?;
        w.values().check_same_domain(p.values())?;
        // Source-space membership f ∈ L^{p′(·)}_{ω⁻¹}.
        let p_conj = conjugate_exponent(&p)?;
        let f_norm = luxemburg_norm(&f, &p_conj, Some(&w.reciprocal()))?;
        if !f_norm.is_finite() {
            return Err(Error::InvalidArgument(
                "source term has infinite dual-space norm".into(),
            ));
        }
        Ok(Self {
            dom,
            g,
            p,
            w,
            a,
            f,
            settings,
        })
    }

    fn eps_schedule(&self) -> Vec<f64> {
        if let Some(s) = &self.settings.eps_schedule {
            return s.clone();
        }
        let mut s = vec![1e-2, 1e-4, 1e-6];
        if self.p.p_minus() >= 2.0 {
            s.push(0.0);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    GradientTolerance,
    EnergyStall,
    MaxIterations,
    MachinePrecision,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridFunction,
    pub energy_trace: Vec<f64>,
    pub final_gradient_norm: f64,
    pub iterations: usize,
    pub eps_final: f64,
    pub status: SolveStatus,
}

fn check_zero_boundary(u: &GridFunction) -> Result<()> {
    if !u.is_zero_on_boundary() {
        return Err(Error::InvalidArgument(
            "function must vanish on boundary cells".into(),
        ));
    }
    Ok(())
}

/// Forward difference along `axis` (backward in the last cell). The solver
/// uses this compact stencil rather than the central one of
/// [`crate::carnot::axis_derivative`]: its exact adjoint composed with
/// itself is the standard compact Laplacian, which keeps the discrete
/// Euler–Lagrange equations second-order accurate up to the pinned boundary.
fn forward_axis_derivative(u: &GridFunction, axis: usize) -> Result<GridFunction> {
    let dom = &u.domain;
    if dom.resolution()[axis] < 3 {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} has fewer than 3 cells; cannot differentiate"
        )));
    }
    let h = dom.spacing(axis);
    let res = dom.resolution()[axis];
    let stride = axis_stride(dom, axis);
    let n = dom.cell_count();
    let values = exec::map_indexed(n, |i| {
        let ia = dom.multi_index(i)[axis];
        if ia == res - 1 {
            0.0
        } else {
            (u.values[i + stride] - u.values[i]) / h
        }
    });
    GridFunction::new(dom.clone(), values)
}

/// Backward difference along `axis`, zero in the first cell.
fn backward_axis_derivative(u: &GridFunction, axis: usize) -> Result<GridFunction> {
    let dom = &u.domain;
    let h = dom.spacing(axis);
    let stride = axis_stride(dom, axis);
    let n = dom.cell_count();
    let values = exec::map_indexed(n, |i| {
        let ia = dom.multi_index(i)[axis];
        if ia == 0 {
            0.0
        } else {
            (u.values[i] - u.values[i - stride]) / h
        }
    });
    GridFunction::new(dom.clone(), values)
}

/// The two one-sided horizontal gradients `Xu⁺` (forward differences) and
/// `Xu⁻` (backward), flat per-cell vectors of length `n·n1`. The energy
/// density averages the two quadratic forms, which keeps the scheme
/// reflection-symmetric, second-order in the interior, and — through the
/// exact adjoint below — reduces to the compact Laplacian at p = 2.
fn horizontal_components(
    u: &GridFunction,
    g: &CarnotGroup,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dom = &u.domain;
    for axis in 0..dom.ndim() {
        if dom.resolution()[axis] < 3 {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} has fewer than 3 cells; cannot differentiate"
            )));
        }
    }
    let fwd: Vec<GridFunction> = (0..dom.ndim())
        .map(|a| forward_axis_derivative(u, a))
        .collect::<Result<_>>()?;
    let bwd: Vec<GridFunction> = (0..dom.ndim())
        .map(|a| backward_axis_derivative(u, a))
        .collect::<Result<_>>()?;
    let n1 = g.horizontal_dim();
    let n = dom.cell_count();
    let combine = |derivs: &[GridFunction]| -> Vec<f64> {
        let rows = exec::map_indexed(n, |i| {
            let c = dom.center_coords(i);
            let mut row = [0.0f64; 3];
            for (k, r) in row.iter_mut().enumerate().take(n1) {
                *r = (0..dom.ndim())
                    .map(|a| {
                        horizontal_coefficient(g, k, a, &c[..dom.ndim()]) * derivs[a].values[i]
                    })
                    .sum();
            }
            row
        });
        let mut xu = vec![0.0; n * n1];
        for (i, row) in rows.iter().enumerate() {
            xu[i * n1..(i + 1) * n1].copy_from_slice(&row[..n1]);
        }
        xu
    };
    Ok((combine(&fwd), combine(&bwd)))
}

/// Symmetrized gradient density `s = (⟨AXu⁺,Xu⁺⟩ + ⟨AXu⁻,Xu⁻⟩)/2` per cell.
fn quadratic_density(
    prob: &DirichletProblem,
    xu_p: &[f64],
    xu_m: &[f64],
    n1: usize,
    i: usize,
) -> f64 {
    0.5 * (prob.a.quadratic(i, &xu_p[i * n1..(i + 1) * n1])
        + prob.a.quadratic(i, &xu_m[i * n1..(i + 1) * n1]))
}

pub fn energy(u: &GridFunction, prob: &DirichletProblem, eps: f64) -> Result<f64> {
    check_zero_boundary(u)?;
    u.check_same_domain(&prob.f)?;
    let n1 = prob.g.horizontal_dim();
    let (xu_p, xu_m) = horizontal_components(u, &prob.g)?;
    let cell = prob.dom.cell_measure();
    let n = prob.dom.cell_count();
    let total = exec::sum_indexed(n, |i| {
        let p = prob.p.values().values[i];
        let s = quadratic_density(prob, &xu_p, &xu_m, n1, i);
        let grad_term = if eps == 0.0 && s == 0.0 {
            0.0
        } else {
            (eps * eps + s).powf(p / 2.0) / p
        };
        let uw = u.values[i].abs() * prob.w.values().values[i];
        let zero_term = if uw == 0.0 { 0.0 } else { uw.powf(p) / p };
        grad_term + zero_term - prob.f.values[i] * u.values[i]
    });
    if !total.is_finite() {
        return Err(Error::InvalidState("non-finite energy".into()));
    }
    Ok(total * cell)
}

/// Transpose of the [`forward_axis_derivative`] stencil applied to `r`.
fn forward_adjoint(r: &[f64], dom: &GridDomain, axis: usize) -> Vec<f64> {
    let h = dom.spacing(axis);
    let res = dom.resolution()[axis];
    let stride = axis_stride(dom, axis);
    let n = dom.cell_count();
    exec::map_indexed(n, |j| {
        let ja = dom.multi_index(j)[axis];
        let mut v = 0.0;
        // Forward rows i ≤ res−2: −1/h at i, +1/h at i+1.
        if ja <= res - 2 {
            v -= r[j] / h;
        }
        if ja >= 1 {
            v += r[j - stride] / h;
        }
        v
    })
}

/// Transpose of the [`backward_axis_derivative`] stencil applied to `r`.
fn backward_adjoint(r: &[f64], dom: &GridDomain, axis: usize) -> Vec<f64> {
    let h = dom.spacing(axis);
    let res = dom.resolution()[axis];
    let stride = axis_stride(dom, axis);
    let n = dom.cell_count();
    exec::map_indexed(n, |j| {
        let ja = dom.multi_index(j)[axis];
        let mut v = 0.0;
        // Backward rows i ≥ 1: +1/h at i, −1/h at i−1.
        if ja >= 1 {
            v += r[j] / h;
        }
        if ja <= res - 2 {
            v -= r[j + stride] / h;
        }
        v
    })
}

/// Discrete energy gradient `G`: `⟨G, v⟩·cell` is the exact derivative of
/// [`energy`] in direction `v` for every zero-boundary `v`; `G` is zeroed on
/// boundary cells.
pub fn energy_gradient(
    u: &GridFunction,
    prob: &DirichletProblem,
    eps: f64,
) -> Result<GridFunction> {
    check_zero_boundary(u)?;
    u.check_same_domain(&prob.f)?;
    let dom = &prob.dom;
    let n1 = prob.g.horizontal_dim();
    let (xu_p, xu_m) = horizontal_components(u, &prob.g)?;
    let n = dom.cell_count();
    // q± = ½·(ε² + s)^{(p−2)/2} · A Xu±, then r±_a = Σ_k q±_k·coef_{k,a}
    // and G = Fwdᵀ r⁺ + Bwdᵀ r⁻ + lower-order terms.
    let ndim = dom.ndim();
    let rows = exec::map_indexed(n, |i| {
        let p = prob.p.values().values[i];
        let s = quadratic_density(prob, &xu_p, &xu_m, n1, i);
        let factor = if eps == 0.0 && s == 0.0 {
            0.0
        } else {
            0.5 * (eps * eps + s).powf((p - 2.0) / 2.0)
        };
        let mut axu_p = [0.0f64; 3];
        let mut axu_m = [0.0f64; 3];
        prob.a.apply(i, &xu_p[i * n1..(i + 1) * n1], &mut axu_p[..n1]);
        prob.a.apply(i, &xu_m[i * n1..(i + 1) * n1], &mut axu_m[..n1]);
        let c = dom.center_coords(i);
        let mut r = [[0.0f64; 3]; 2];
        for a in 0..ndim {
            let coefs: Vec<f64> = (0..n1)
                .map(|k| horizontal_coefficient(&prob.g, k, a, &c[..ndim]))
                .collect();
            r[0][a] = (0..n1).map(|k| factor * axu_p[k] * coefs[k]).sum();
            r[1][a] = (0..n1).map(|k| factor * axu_m[k] * coefs[k]).sum();
        }
        r
    });
    let mut grad = vec![0.0f64; n];
    for a in 0..ndim {
        let r_p: Vec<f64> = rows.iter().map(|row| row[0][a]).collect();
        let r_m: Vec<f64> = rows.iter().map(|row| row[1][a]).collect();
        let adj_p = forward_adjoint(&r_p, dom, a);
        let adj_m = backward_adjoint(&r_m, dom, a);
        for ((gv, pv), mv) in grad.iter_mut().zip(&adj_p).zip(&adj_m) {
            *gv += pv + mv;
        }
    }
    let values = exec::map_indexed(n, |i| {
        if dom.is_boundary(i) {
            return 0.0;
        }
        let p = prob.p.values().values[i];
        let wv = prob.w.values().values[i];
        let uv = u.values[i];
        let lower = if uv == 0.0 {
            0.0
        } else {
            (uv.abs() * wv).powf(p - 2.0) * uv * wv * wv
        };
        grad[i] + lower - prob.f.values[i]
    });
    let g = GridFunction::new(dom.clone(), values)
        .map_err(|_| Error::InvalidState("non-finite value in gradient stencil".into()))?;
    Ok(g)
}

pub fn solve_dirichlet(prob: &DirichletProblem) -> Result<Solution> {
    let cell = prob.dom.cell_measure();
    let mut u = GridFunction::zeros(prob.dom.clone());
    solve_from(prob, &mut u, cell)
}

/// Runs the descent from a caller-supplied starting point (used by the
/// uniqueness probe); `start` must vanish on the boundary.
pub fn solve_dirichlet_from(prob: &DirichletProblem, start: &GridFunction) -> Result<Solution> {
    check_zero_boundary(start)?;
    let cell = prob.dom.cell_measure();
    let mut u = start.clone();
    solve_from(prob, &mut u, cell)
}

fn solve_from(prob: &DirichletProblem, u: &mut GridFunction, cell: f64) -> Result<Solution> {
    let schedule = prob.eps_schedule();
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut status = SolveStatus::MaxIterations;
    let mut eps_final = *schedule.first().unwrap_or(&0.0);
    let mut step = 1.0f64;
    'stages: for &eps in &schedule {
        eps_final = eps;
        let mut f_cur = energy(u, prob, eps)?;
        if trace.last().map_or(true, |&last| f_cur <= last) {
            trace.push(f_cur);
        }
        let mut g_cur = energy_gradient(u, prob, eps)?;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        loop {
            let grad_norm = g_cur.sup_norm();
            if grad_norm < prob.settings.grad_tol {
                status = SolveStatus::GradientTolerance;
                break;
            }
            if iterations >= prob.settings.max_iterations {
                status = SolveStatus::MaxIterations;
                break 'stages;
            }
            let g2: f64 = exec::sum_indexed(g_cur.len(), |i| g_cur.values[i] * g_cur.values[i]);
            // Barzilai–Borwein step seed, Armijo-safeguarded below.
            if let Some((s, y)) = &prev {
                let ss: f64 = s.iter().map(|v| v * v).sum();
                let sy: f64 = s.iter().zip(y).map(|(a, b)| a * b).sum();
                if sy > 0.0 && ss > 0.0 {
                    step = ss / sy;
                } else {
                    step *= 2.0;
                }
            }
            step = step.clamp(1e-16, 1e12);
            let mut accepted = None;
            let mut t = step;
            for _ in 0..70 {
                let cand = u.zip_with(&g_cur, |a, b| a - t * b)?;
                let f_cand = energy(&cand, prob, eps)?;
                if f_cand <= f_cur - 1e-4 * t * cell * g2 {
                    accepted = Some((cand, f_cand, t));
                    break;
                }
                t *= 0.5;
            }
            let Some((u_new, f_new, t_used)) = accepted else {
                status = SolveStatus::MachinePrecision;
                break;
            };
            iterations += 1;
            step = t_used;
            let g_new = energy_gradient(&u_new, prob, eps)?;
            let s: Vec<f64> = u_new
                .values
                .iter()
                .zip(&u.values)
                .map(|(a, b)| a - b)
                .collect();
            let y: Vec<f64> = g_new
                .values
                .iter()
                .zip(&g_cur.values)
                .map(|(a, b)| a - b)
                .collect();
            prev = Some((s, y));
            let stalled = (f_cur - f_new) <= prob.settings.energy_stall * (f_cur.abs() + 1e-30);
            *u = u_new;
            if f_new < f_cur {
                trace.push(f_new);
            }
            f_cur = f_new;
            g_cur = g_new;
            if stalled {
                status = SolveStatus::EnergyStall;
                break;
            }
        }
    }
    let final_gradient_norm = energy_gradient(u, prob, eps_final)?.sup_norm();
    Ok(Solution {
        u: u.clone(),
        energy_trace: trace,
        final_gradient_norm,
        iterations,
        eps_final,
        status,
    })
}

/// Max over random zero-boundary test functions `v` of
/// `|weak-form(u; v)| / (‖v‖_{W^{1,p(·)}_ω} + 1)`, with the unregularized
/// (ε = 0) weak form.
pub fn weak_residual(
    u: &GridFunction,
    prob: &DirichletProblem,
    test_count: usize,
    seed: u64,
) -> Result<f64> {
    check_zero_boundary(u)?;
    let g0 = energy_gradient(u, prob, 0.0)?;
    let cell = prob.dom.cell_measure();
    let family = TestFunctionFamily {
        generator: GeneratorId::RandomTrig,
        count: test_count,
        seed,
    };
    let mut worst: f64 = 0.0;
    for v in family.materialize(&prob.dom, true) {
        let pairing = exec::sum_indexed(v.len(), |i| g0.values[i] * v.values[i]).abs() * cell;
        let grad_norm = crate::carnot::horizontal_gradient_norm(&v, &prob.g)?;
        let sobolev = luxemburg_norm(&v, &prob.p, Some(&prob.w))?
            + luxemburg_norm(&grad_norm, &prob.p, Some(&prob.w))?;
        worst = worst.max(pairing / (sobolev + 1.0));
    }
    Ok(worst)
}

/// `F(s·direction)` for each scale, with the unregularized energy.
pub fn coercivity_probe(
    prob: &DirichletProblem,
    direction: &GridFunction,
    scales: &[f64],
) -> Result<Vec<f64>> {
    check_zero_boundary(direction)?;
    if direction.sup_norm() == 0.0 {
        return Err(Error::InvalidArgument(
            "coercivity direction must be nonzero".into(),
        ));
    }
    scales
        .iter()
        .map(|&s| energy(&direction.scale(s), prob, 0.0))
        .collect()
}
