use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{CondDist, ScoreSubspace, TaskLoss};
use crate::numerics::{pseudo_inverse, pseudo_inverse_from, Matrix};
use crate::surrogate::{conditional_risks, ConditionalRisks};

use super::constants::SgdConstants;
use super::model::SyntheticTask;

/// `w` scaled back onto the Frobenius ball of the given radius if outside it.
pub fn project_frobenius_ball(w: &Matrix, radius: f64) -> Matrix {
    let norm = w.frobenius_norm();
    if norm <= radius {
        w.clone()
    } else {
        w.scale(radius / norm)
    }
}

fn check_dims(w: &Matrix, task: &SyntheticTask, loss: &TaskLoss, s: &ScoreSubspace) -> Result<()> {
    if loss.k() != s.k() || task.conditionals.v.rows() != loss.k() {
        return Err(Error::invalid("loss, subspace and conditional model sizes differ"));
    }
    if w.shape() != (s.r(), task.features.feature_dim) {
        return Err(Error::invalid(format!(
            "parameters are {:?}, expected {}x{}",
            w.shape(),
            s.r(),
            task.features.feature_dim
        )));
    }
    Ok(())
}

/// Exact task and surrogate risks of the scores `F W psi(x)` over the pool.
pub fn evaluate_risks(w: &Matrix, task: &SyntheticTask, loss: &TaskLoss, s: &ScoreSubspace) -> Result<ConditionalRisks> {
    check_dims(w, task, loss, s)?;
    let mut total = ConditionalRisks { task: 0.0, surrogate: 0.0 };
    for ((p, q), &weight) in task
        .features
        .points
        .iter()
        .zip(&task.conditionals.conditionals)
        .zip(&task.features.weights)
    {
        let f = s.scores(&w.matvec(p));
        let r = conditional_risks(&f, &CondDist::Dense(q.clone()), loss)?;
        total.task += weight * r.task;
        total.surrogate += weight * r.surrogate;
    }
    Ok(total)
}

/// Least-squares minimizer of the population surrogate risk,
/// `-(F^T F)^+ F^T L C Sigma^+` with `C = E[q psi^T]` and `Sigma = E[psi psi^T]`.
pub fn optimal_parameters_population(task: &SyntheticTask, loss: &TaskLoss, s: &ScoreSubspace) -> Result<Matrix> {
    let k = loss.k();
    let d = task.features.feature_dim;
    let mut c = Matrix::zeros(k, d);
    let mut sigma = Matrix::zeros(d, d);
    for ((p, q), &weight) in task
        .features
        .points
        .iter()
        .zip(&task.conditionals.conditionals)
        .zip(&task.features.weights)
    {
        for a in 0..k {
            for b in 0..d {
                c[(a, b)] += weight * q[a] * p[b];
            }
        }
        for a in 0..d {
            for b in 0..d {
                sigma[(a, b)] += weight * p[a] * p[b];
            }
        }
    }
    let lc = loss.to_dense()?.matmul(&c);
    let f_pinv = pseudo_inverse_from(s.svd());
    Ok(f_pinv.matmul(&lc).matmul(&pseudo_inverse(&sigma)?).scale(-1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub seed: u64,
    pub n: u64,
    #[serde(rename = "D")]
    pub d_bound: f64,
    #[serde(rename = "M")]
    pub m_bound: f64,
    pub gamma: f64,
    pub surrogate_risk: f64,
    pub task_risk: f64,
    pub suboptimality: f64,
    /// `(t, suboptimality of the average of the first t iterates)` at log-spaced `t`.
    pub trace: Vec<(u64, f64)>,
    #[serde(skip)]
    pub averaged_params: Option<Matrix>,
}

/// 1, 2, 5, 10, 20, 50, ... up to `n`, always ending at `n`.
fn checkpoints(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut base = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let t = base.saturating_mul(m);
            if t >= n {
                break 'outer;
            }
            out.push(t);
        }
        base = base.saturating_mul(10);
    }
    if n > 0 {
        out.push(n);
    }
    out
}

/// Runs `n` steps of projected SGD with the constant step `constants.gamma`
/// from `W = 0` and returns the uniform average of `W^(1..n)`, with exact
/// risks over the pool.
pub fn asgd_train(
    task: &SyntheticTask,
    loss: &TaskLoss,
    s: &ScoreSubspace,
    constants: &SgdConstants,
    n: u64,
    seed: u64,
) -> Result<TrainResult> {
    let r = s.r();
    let d = task.features.feature_dim;
    let mut w = Matrix::zeros(r, d);
    check_dims(&w, task, loss, s)?;
    if n > 0 && constants.n != n {
        return Err(Error::invalid(format!(
            "constants were computed for n = {}, training runs n = {n}",
            constants.n
        )));
    }
    let optimum = evaluate_risks(&optimal_parameters_population(task, loss, s)?, task, loss, s)?.surrogate;
    let dense_loss = loss.to_dense()?;
    let f = s.f();
    let k = loss.k() as f64;
    let gamma = constants.gamma;
    let radius = constants.d_bound;
    let samplers = task.samplers()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut avg = Matrix::zeros(r, d);
    let mut trace = Vec::new();
    let marks = checkpoints(n);
    let mut next_mark = marks.iter().peekable();
    let mut resid = vec![0.0; loss.k()];
    for t in 1..=n {
        let (x, y) = task.sample(&mut rng, &samplers);
        let psi = &task.features.points[x];
        let scores = f.matvec(&w.matvec(psi));
        for (c, rc) in resid.iter_mut().enumerate() {
            *rc = (scores[c] + dense_loss[(c, y)]) / k;
        }
        let g = f.tr_matvec(&resid);
        for a in 0..r {
            let row = w.row_mut(a);
            for (b, wb) in row.iter_mut().enumerate() {
                *wb -= gamma * g[a] * psi[b];
            }
        }
        let norm = w.frobenius_norm();
        if norm > radius {
            w = w.scale(radius / norm);
        }
        let inv_t = 1.0 / t as f64;
        for a in 0..r {
            let (wr, ar) = (w.row(a).to_vec(), avg.row_mut(a));
            for (av, wv) in ar.iter_mut().zip(wr) {
                *av += (wv - *av) * inv_t;
            }
        }
        if next_mark.peek() == Some(&&t) {
            next_mark.next();
            let risk = evaluate_risks(&avg, task, loss, s)?.surrogate;
            trace.push((t, risk - optimum));
        }
    }

    let risks = evaluate_risks(&avg, task, loss, s)?;
    Ok(TrainResult {
        seed,
        n,
        d_bound: constants.d_bound,
        m_bound: constants.m_bound,
        gamma: if n > 0 { gamma } else { 0.0 },
        surrogate_risk: risks.surrogate,
        task_risk: risks.task,
        suboptimality: risks.surrogate - optimum,
        trace,
        averaged_params: Some(avg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{compute_constants, make_generator};
    use crate::losses::{score_subspace, zero_one_loss, SubspaceMode};

    #[test]
    fn ball_projection() {
        let w = Matrix::from_rows(&[vec![0.3, 0.4]]).unwrap();
        assert_eq!(project_frobenius_ball(&w, 1.0), w);
        let big = Matrix::from_rows(&[vec![0.0, 4.0]]).unwrap();
        assert_eq!(project_frobenius_ball(&big, 2.0).as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(0), Vec::<u64>::new());
        assert_eq!(checkpoints(1), vec![1]);
        assert_eq!(checkpoints(100), vec![1, 2, 5, 10, 20, 50, 100]);
        assert_eq!(checkpoints(30), vec![1, 2, 5, 10, 20, 30]);
    }

    #[test]
    fn zero_parameters_predict_label_zero() {
        let l = zero_one_loss(3).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let task = make_generator(&s, &l, 4, 3, 9).unwrap();
        let risks = evaluate_risks(&Matrix::zeros(3, 4), &task, &l, &s).unwrap();
        let expected: f64 = task
            .conditionals
            .conditionals
            .iter()
            .zip(&task.features.weights)
            .map(|(q, w)| w * (1.0 - q[0]))
            .sum();
        assert!((risks.task - expected).abs() < 1e-15);
    }

    #[test]
    fn optimum_has_zero_excess_on_interpolating_pool() {
        let l = zero_one_loss(4).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let task = make_generator(&s, &l, 5, 4, 3).unwrap();
        let w = optimal_parameters_population(&task, &l, &s).unwrap();
        // Pointwise optimum: excess surrogate risk is zero at every pool point.
        for (p, q) in task.features.points.iter().zip(&task.conditionals.conditionals) {
            let theta = w.matvec(p);
            let dist = CondDist::Dense(q.clone());
            let excess = crate::surrogate::excess_quadratic_surrogate(&theta, &dist, &l, &s).unwrap();
            assert!(excess < 1e-9, "{excess}");
        }
    }

    #[test]
    fn zero_steps_and_determinism() {
        let l = zero_one_loss(4).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let task = make_generator(&s, &l, 4, 4, 1).unwrap();
        let c = compute_constants(&s, 1.0, task.features.r_bound, task.conditionals.q_bound, 1).unwrap();
        let r0 = asgd_train(&task, &l, &s, &c, 0, 5).unwrap();
        assert_eq!(r0.averaged_params.unwrap(), Matrix::zeros(4, 4));
        assert!(r0.trace.is_empty());
        let c = compute_constants(&s, 1.0, task.features.r_bound, task.conditionals.q_bound, 500).unwrap();
        let a = asgd_train(&task, &l, &s, &c, 500, 5).unwrap();
        let b = asgd_train(&task, &l, &s, &c, 500, 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.suboptimality >= -1e-9);
        assert_eq!(a.trace.last().unwrap().0, 500);
        assert!(asgd_train(&task, &l, &s, &c, 400, 5).is_err());
    }
}
