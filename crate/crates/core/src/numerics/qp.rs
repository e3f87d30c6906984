//! Dense convex quadratic programming by the log-barrier method.
//!
//! ```text
//! minimize    1/2 x^T P x + q^T x + r
//! subject to  a_i^T x <= c_i
//!             e_j^T x  = d_j
//! ```
//!
//! Equalities are eliminated through a null-space parametrization
//! `x = x0 + N z`. A phase-I slack program either finds a strictly feasible
//! start, certifies infeasibility, or reports that the feasible set has no
//! interior. In the last case every inequality is relaxed by a small margin
//! (`QpSettings::degenerate_relaxation`) and the relaxed program is solved;
//! the solution carries `relaxed = true`.

use super::linalg::{null_space_basis, pseudo_inverse, solve_spd};
use super::matrix::{dot, norm2, Matrix};
use crate::error::{Error, Result};

/// `normal . x <= offset` (inequality) or `normal . x = offset` (equality).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl LinearConstraint {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        LinearConstraint { normal, offset }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Symmetric positive semidefinite `P`.
    pub quadratic: Matrix,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub inequalities: Vec<LinearConstraint>,
    pub equalities: Vec<LinearConstraint>,
}

impl QpProblem {
    pub fn new(quadratic: Matrix, linear: Vec<f64>) -> Self {
        QpProblem {
            quadratic,
            linear,
            constant: 0.0,
            inequalities: Vec::new(),
            equalities: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.quadratic.matvec(x);
        0.5 * dot(x, &px) + dot(&self.linear, x) + self.constant
    }

    /// Largest violation over all constraints (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let ineq = self
            .inequalities
            .iter()
            .map(|c| c.residual(x).max(0.0))
            .fold(0.0, f64::max);
        let eq = self
            .equalities
            .iter()
            .map(|c| c.residual(x).abs())
            .fold(0.0, f64::max);
        ineq.max(eq)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.quadratic.shape() != (n, n) {
            return Err(Error::invalid(format!(
                "quadratic term is {:?}, expected {n}x{n}",
                self.quadratic.shape()
            )));
        }
        if !self.quadratic.is_finite()
            || self.linear.iter().any(|v| !v.is_finite())
            || !self.constant.is_finite()
        {
            return Err(Error::invalid("qp objective has non-finite entries"));
        }
        for c in self.inequalities.iter().chain(&self.equalities) {
            if c.normal.len() != n || c.normal.iter().any(|v| !v.is_finite()) || !c.offset.is_finite() {
                return Err(Error::invalid("malformed qp constraint"));
            }
        }
        let scale = self.quadratic.max_abs().max(1.0);
        if self.quadratic.asymmetry() > 1e-12 * scale {
            return Err(Error::invalid("quadratic term is not symmetric"));
        }
        let mut shifted = self.quadratic.clone();
        for i in 0..n {
            shifted[(i, i)] += 1e-9 * scale;
        }
        if n > 0 && super::linalg::cholesky(&shifted).is_err() {
            return Err(Error::invalid("quadratic term is not positive semidefinite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Stop once the barrier duality gap `m / t` falls below this.
    pub gap_tolerance: f64,
    /// Newton centering stops when `lambda^2 / 2` falls below this.
    pub newton_tolerance: f64,
    pub barrier_factor: f64,
    pub max_rounds: usize,
    pub max_newton_steps: usize,
    /// Phase-I optimum above this certifies infeasibility.
    pub feasibility_tolerance: f64,
    /// Margin added to every (normalized) inequality when the feasible set has no interior.
    pub degenerate_relaxation: f64,
    /// Box half-width imposed on the reduced variables during phase I only.
    pub phase1_box: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            gap_tolerance: 1e-9,
            newton_tolerance: 1e-10,
            barrier_factor: 10.0,
            max_rounds: 60,
            max_newton_steps: 200,
            feasibility_tolerance: 1e-9,
            degenerate_relaxation: 1e-8,
            phase1_box: 1e4,
        }
    }
}

impl QpSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        QpSettings {
            gap_tolerance: tolerance,
            feasibility_tolerance: tolerance,
            degenerate_relaxation: 10.0 * tolerance,
            ..QpSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Certified bound: the true minimum is at least `objective - duality_gap`
    /// (for the relaxed program when `relaxed` is set).
    pub duality_gap: f64,
    /// The feasible set had empty interior and inequalities were relaxed.
    pub relaxed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal(QpSolution),
    /// Phase I proved that the constraints cannot be met; `min_violation`
    /// is the smallest achievable largest normalized violation.
    Infeasible { min_violation: f64 },
}

impl QpOutcome {
    pub fn optimal(&self) -> Option<&QpSolution> {
        match self {
            QpOutcome::Optimal(s) => Some(s),
            QpOutcome::Infeasible { .. } => None,
        }
    }
}

pub fn solve_qp(p: &QpProblem, tolerance: f64) -> Result<QpOutcome> {
    solve_qp_with(p, &QpSettings::with_tolerance(tolerance))
}

pub fn solve_qp_with(p: &QpProblem, settings: &QpSettings) -> Result<QpOutcome> {
    p.validate()?;
    let tol = settings.feasibility_tolerance;
    let n = p.dim();

    // Equalities: x = x0 + N z.
    let (x0, basis) = if p.equalities.is_empty() {
        (vec![0.0; n], Matrix::identity(n))
    } else {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for c in &p.equalities {
            let norm = norm2(&c.normal);
            if norm <= 1e-14 {
                if c.offset.abs() > tol {
                    return Ok(QpOutcome::Infeasible {
                        min_violation: c.offset.abs(),
                    });
                }
                continue;
            }
            rows.push(c.normal.iter().map(|v| v / norm).collect::<Vec<_>>());
            rhs.push(c.offset / norm);
        }
        if rows.is_empty() {
            (vec![0.0; n], Matrix::identity(n))
        } else {
            let e = Matrix::from_rows(&rows)?;
            let x0 = pseudo_inverse(&e)?.matvec(&rhs);
            let resid = e
                .matvec(&x0)
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if resid > tol.max(1e-12) * 10.0 {
                return Ok(QpOutcome::Infeasible { min_violation: resid });
            }
            (x0, null_space_basis(&e)?)
        }
    };
    let nz = basis.cols();

    let px0 = p.quadratic.matvec(&x0);
    let h = basis.tr_matmul(&p.quadratic.matmul(&basis));
    let h = symmetrize(&h);
    let g_full: Vec<f64> = px0.iter().zip(&p.linear).map(|(a, b)| a + b).collect();
    let g = basis.tr_matvec(&g_full);

    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for c in &p.inequalities {
        let reduced = basis.tr_matvec(&c.normal);
        let rhs = c.offset - dot(&c.normal, &x0);
        let norm = norm2(&reduced);
        let scale = norm2(&c.normal).max(1e-300);
        if norm <= 1e-12 * scale {
            if rhs < -tol * scale.max(1.0) {
                return Ok(QpOutcome::Infeasible {
                    min_violation: -rhs / scale,
                });
            }
            continue;
        }
        a_rows.push(reduced.iter().map(|v| v / norm).collect());
        b.push(rhs / norm);
    }

    let to_full = |z: &[f64]| -> Vec<f64> {
        let nzv = basis.matvec(z);
        x0.iter().zip(&nzv).map(|(a, b)| a + b).collect()
    };

    if nz == 0 {
        if b.iter().any(|&v| v < -tol) {
            let worst = b.iter().map(|v| -v).fold(0.0, f64::max);
            return Ok(QpOutcome::Infeasible { min_violation: worst });
        }
        let x = x0.clone();
        return Ok(QpOutcome::Optimal(QpSolution {
            objective: p.objective(&x),
            x,
            duality_gap: 0.0,
            relaxed: false,
        }));
    }

    if a_rows.is_empty() {
        let z = unconstrained_minimizer(&h, &g)?;
        let x = to_full(&z);
        return Ok(QpOutcome::Optimal(QpSolution {
            objective: p.objective(&x),
            x,
            duality_gap: 0.0,
            relaxed: false,
        }));
    }

    let (z_start, relaxed) = match phase_one(&a_rows, &b, nz, settings)? {
        PhaseOne::Strict(z) => (z, false),
        PhaseOne::Infeasible(v) => return Ok(QpOutcome::Infeasible { min_violation: v }),
        PhaseOne::NoInterior => {
            b.iter_mut().for_each(|v| *v += settings.degenerate_relaxation);
            match phase_one(&a_rows, &b, nz, settings)? {
                PhaseOne::Strict(z) => (z, true),
                _ => {
                    return Err(Error::Convergence {
                        message: "relaxed program still has no interior".into(),
                        best: to_full(&vec![0.0; nz]),
                    })
                }
            }
        }
    };

    let res = barrier_minimize(&h, &g, &a_rows, &b, z_start, settings, |_| false)
        .map_err(|e| match e {
            Error::Convergence { message, best } => Error::Convergence {
                message,
                best: to_full(&best),
            },
            other => other,
        })?;
    let x = to_full(&res.z);
    Ok(QpOutcome::Optimal(QpSolution {
        objective: p.objective(&x),
        x,
        duality_gap: res.gap,
        relaxed,
    }))
}

fn symmetrize(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

fn unconstrained_minimizer(h: &Matrix, g: &[f64]) -> Result<Vec<f64>> {
    let z: Vec<f64> = pseudo_inverse(h)?.matvec(g).iter().map(|v| -v).collect();
    let hz = h.matvec(&z);
    let resid = hz.iter().zip(g).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    if resid > 1e-8 * (1.0 + norm2(g)) {
        return Err(Error::invalid("quadratic program is unbounded below"));
    }
    Ok(z)
}

enum PhaseOne {
    Strict(Vec<f64>),
    Infeasible(f64),
    NoInterior,
}

/// minimize s  s.t.  a_i z - s <= b_i,  s >= -1,  |z_j| <= box
fn phase_one(a: &[Vec<f64>], b: &[f64], nz: usize, settings: &QpSettings) -> Result<PhaseOne> {
    let z0 = vec![0.0; nz];
    let worst = b.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
    if worst < -1e-10 {
        return Ok(PhaseOne::Strict(z0));
    }
    let dim = nz + 1;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(a.len() + 1 + 2 * nz);
    let mut rhs: Vec<f64> = Vec::with_capacity(rows.capacity());
    for (ai, bi) in a.iter().zip(b) {
        let mut r = ai.clone();
        r.push(-1.0);
        rows.push(r);
        rhs.push(*bi);
    }
    let mut lower = vec![0.0; dim];
    lower[nz] = -1.0;
    rows.push(lower);
    rhs.push(1.0);
    for j in 0..nz {
        let mut up = vec![0.0; dim];
        up[j] = 1.0;
        rows.push(up.clone());
        rhs.push(settings.phase1_box);
        up[j] = -1.0;
        rows.push(up);
        rhs.push(settings.phase1_box);
    }
    let mut start = z0;
    start.push(worst.max(-0.5) + 1.0);
    let h = Matrix::zeros(dim, dim);
    let mut g = vec![0.0; dim];
    g[nz] = 1.0;
    let phase_settings = QpSettings {
        gap_tolerance: settings.feasibility_tolerance * 0.1,
        ..*settings
    };
    let res = barrier_minimize(&h, &g, &rows, &rhs, start, &phase_settings, |x| x[nz] < -1e-10)?;
    let s = res.z[nz];
    if s < -1e-10 {
        let mut z = res.z;
        z.truncate(nz);
        return Ok(PhaseOne::Strict(z));
    }
    if s - res.gap > settings.feasibility_tolerance {
        return Ok(PhaseOne::Infeasible(s));
    }
    Ok(PhaseOne::NoInterior)
}

struct BarrierResult {
    z: Vec<f64>,
    gap: f64,
}

/// Minimizes `1/2 z^T H z + g^T z` over `{a_i z < b_i}` from a strictly feasible `z`.
fn barrier_minimize(
    h: &Matrix,
    g: &[f64],
    a: &[Vec<f64>],
    b: &[f64],
    mut z: Vec<f64>,
    settings: &QpSettings,
    early_stop: impl Fn(&[f64]) -> bool,
) -> Result<BarrierResult> {
    let m = a.len() as f64;
    let mut t = 1.0;
    for _ in 0..settings.max_rounds {
        center(h, g, a, b, &mut z, t, settings);
        if early_stop(&z) {
            return Ok(BarrierResult { z, gap: m / t });
        }
        if m / t < settings.gap_tolerance {
            return Ok(BarrierResult { z, gap: m / t });
        }
        t *= settings.barrier_factor;
    }
    Err(Error::Convergence {
        message: format!("barrier method did not reach gap {} in {} rounds", settings.gap_tolerance, settings.max_rounds),
        best: z,
    })
}

fn barrier_value(h: &Matrix, g: &[f64], a: &[Vec<f64>], b: &[f64], z: &[f64], t: f64) -> f64 {
    let mut log_sum = 0.0;
    for (ai, bi) in a.iter().zip(b) {
        let s = bi - dot(ai, z);
        if s <= 0.0 {
            return f64::INFINITY;
        }
        log_sum += s.ln();
    }
    let hz = h.matvec(z);
    t * (0.5 * dot(z, &hz) + dot(g, z)) - log_sum
}

fn center(h: &Matrix, g: &[f64], a: &[Vec<f64>], b: &[f64], z: &mut Vec<f64>, t: f64, settings: &QpSettings) {
    let n = z.len();
    for _ in 0..settings.max_newton_steps {
        let hz = h.matvec(z);
        let mut grad: Vec<f64> = hz.iter().zip(g).map(|(a, b)| t * (a + b)).collect();
        let mut hess = h.scale(t);
        let slacks: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| bi - dot(ai, z)).collect();
        for (ai, &s) in a.iter().zip(&slacks) {
            let inv = 1.0 / s;
            let inv2 = inv * inv;
            for p in 0..n {
                let ap = ai[p];
                if ap == 0.0 {
                    continue;
                }
                grad[p] += ap * inv;
                let w = ap * inv2;
                let row = hess.row_mut(p);
                for (q, aq) in ai.iter().enumerate() {
                    row[q] += w * aq;
                }
            }
        }
        let Ok(step) = solve_spd(&hess, &grad) else {
            return;
        };
        let dz: Vec<f64> = step.iter().map(|v| -v).collect();
        let decrement = -dot(&grad, &dz);
        if decrement / 2.0 <= settings.newton_tolerance || !decrement.is_finite() {
            return;
        }
        let mut alpha: f64 = 1.0;
        for (ai, &s) in a.iter().zip(&slacks) {
            let rate = dot(ai, &dz);
            if rate > 0.0 {
                alpha = alpha.min(0.99 * s / rate);
            }
        }
        let current = barrier_value(h, g, a, b, z, t);
        let mut moved = false;
        while alpha > 1e-14 {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(x, d)| x + alpha * d).collect();
            let value = barrier_value(h, g, a, b, &trial, t);
            if value <= current - 0.25 * alpha * decrement {
                *z = trial;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            return;
        }
    }
}
