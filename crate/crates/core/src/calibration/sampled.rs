use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::losses::{expected_loss_vector, CondDist};
use crate::numerics::{pseudo_inverse_from, Matrix};

use super::value::{CalibrationMethod, CalibrationQuery, CalibrationValue, Certificate, Extended};

/// Largest label count for the sampling oracle (it materializes `P_F`).
pub const MAX_SAMPLED_LABELS: usize = 1024;

/// Upper bound on `H(eps)` from random feasible points.
///
/// Each sample draws `q` (sparse or dense Dirichlet) and keeps it if some
/// predictable label `j` is at least `eps` worse than the best predictable
/// one. The optimal scores `-P_F L q` are then pushed towards the cone where
/// `j` ties for the top score, by cyclic projections onto the violated
/// half-spaces followed by a step along `P_F e_j` that removes any leftover
/// violation. Every kept point is feasible, so the minimum objective bounds
/// `H` from above.
pub fn sampled_upper_bound(query: &CalibrationQuery<'_>, samples: usize, seed: u64) -> Result<CalibrationValue> {
    let loss = query.loss;
    let s = query.subspace;
    let k = loss.k();
    if k > MAX_SAMPLED_LABELS {
        return Err(Error::Capacity(format!(
            "sampled bound materializes the projector and is limited to k <= {MAX_SAMPLED_LABELS}"
        )));
    }
    let projector = s.projector().expect("projector is materialized at this size");
    let pred = s.predictable();
    let eps = query.epsilon;
    let scale = 1.0 / (2.0 * k as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes = [Gamma::new(0.3, 1.0).unwrap(), Gamma::new(1.0, 1.0).unwrap()];

    let mut accepted = 0usize;
    let mut best: Option<(f64, usize, usize, Vec<f64>, Vec<f64>)> = None;
    let mut q = vec![0.0; k];
    for _ in 0..samples {
        draw_distribution(&mut rng, &shapes, &mut q);
        let ell = expected_loss_vector(loss, &CondDist::Dense(q.clone()))?;
        let i = *pred
            .iter()
            .min_by(|a, b| ell[**a].total_cmp(&ell[**b]))
            .expect("predictable set is non-empty");
        let start: Vec<f64> = s.project(&ell).iter().map(|v| -v).collect();
        let mut any = false;
        for &j in pred {
            if j == i || ell[j] - ell[i] < eps {
                continue;
            }
            let Some(f) = feasible_scores(projector, &start, pred, j) else {
                continue;
            };
            any = true;
            let objective = scale * f.iter().zip(&start).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            if best.as_ref().is_none_or(|b| objective < b.0) {
                best = Some((objective, i, j, q.clone(), f));
            }
        }
        accepted += any as usize;
    }

    let Some((objective, i, j, q, f)) = best else {
        let mut v = CalibrationValue::new(Extended::Infinite, CalibrationMethod::Sampled);
        v.diagnostic = Some(format!("no feasible point among {samples} samples"));
        return Ok(v);
    };
    let theta = pseudo_inverse_from(s.svd()).matvec(&f);
    let mut v = CalibrationValue::finite(objective, CalibrationMethod::Sampled);
    v.certificate = Some(Certificate { i, j, q, theta });
    v.heuristic = !s.predictable_exact();
    v.diagnostic = Some(format!("{accepted} of {samples} samples feasible"));
    Ok(v)
}

const PROJECTION_ROUNDS: usize = 10;

/// Scores in the subspace, close to `start`, with `f_j >= f_c` for all
/// predictable `c`; `None` if the final step along `P e_j` cannot reach it.
fn feasible_scores(p: &Matrix, start: &[f64], pred: &[usize], j: usize) -> Option<Vec<f64>> {
    let mut f = start.to_vec();
    for _ in 0..PROJECTION_ROUNDS {
        let mut moved = false;
        for &c in pred {
            let gap = f[c] - f[j];
            if c == j || gap <= 0.0 {
                continue;
            }
            // Direction P (e_j - e_c) raises f_j - f_c at rate ||P (e_j - e_c)||^2.
            let rate = p[(j, j)] + p[(c, c)] - 2.0 * p[(c, j)];
            if rate <= 1e-14 {
                return None;
            }
            let step = gap / rate;
            for (y, fy) in f.iter_mut().enumerate() {
                *fy += step * (p[(y, j)] - p[(y, c)]);
            }
            moved = true;
        }
        if !moved {
            break;
        }
    }
    let t = tie_step(p, &f, pred, j)?;
    if t > 0.0 {
        for (y, fy) in f.iter_mut().enumerate() {
            *fy += t * p[(y, j)];
        }
    }
    Some(f)
}

/// Smallest `t >= 0` with `(f + t P e_j)_j >= (f + t P e_j)_c` for all
/// predictable `c`; `None` if the ray never gets there.
fn tie_step(p: &Matrix, f: &[f64], pred: &[usize], j: usize) -> Option<f64> {
    let mut t: f64 = 0.0;
    for &c in pred {
        let deficit = f[c] - f[j];
        if c == j || deficit <= 0.0 {
            continue;
        }
        let rate = p[(j, j)] - p[(c, j)];
        if rate <= 1e-14 {
            return None;
        }
        t = t.max(deficit / rate);
    }
    Some(t)
}

fn draw_distribution(rng: &mut ChaCha8Rng, shapes: &[Gamma<f64>; 2], q: &mut [f64]) {
    let k = q.len();
    q.iter_mut().for_each(|v| *v = 0.0);
    if rng.random_bool(0.5) {
        let support = rng.random_range(2..=3.min(k));
        for _ in 0..support {
            let c = rng.random_range(0..k);
            q[c] += shapes[1].sample(rng);
        }
    } else {
        let shape = &shapes[rng.random_range(0..2)];
        for v in q.iter_mut() {
            *v = shape.sample(rng);
        }
    }
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        q.iter_mut().for_each(|v| *v /= total);
    } else {
        q[0] = 1.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{score_subspace, zero_one_loss, SubspaceMode};

    #[test]
    fn bounds_zero_one_from_above() {
        let l = zero_one_loss(3).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let q = CalibrationQuery::new(&l, &s, 0.5).unwrap();
        let v = sampled_upper_bound(&q, 20_000, 3).unwrap();
        let h = 0.25 / 12.0;
        let value = v.value.finite().unwrap();
        assert!(value >= h - 1e-12 && value <= 1.5 * h, "{value}");
        let check = v.certificate.unwrap().check(&q).unwrap();
        assert!(check.max_violation < 1e-9);
        assert!((check.objective - value).abs() < 1e-9);
    }

    #[test]
    fn infeasible_epsilon() {
        let l = zero_one_loss(3).unwrap();
        let s = score_subspace(&l, SubspaceMode::Unconstrained).unwrap();
        let q = CalibrationQuery::new(&l, &s, 1.5).unwrap();
        let v = sampled_upper_bound(&q, 1000, 1).unwrap();
        assert!(v.value.is_infinite());
        assert!(v.diagnostic.unwrap().contains("1000"));
    }
}
