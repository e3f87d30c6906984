use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surrocal::calibration::{exact_formula, CalibrationQuery};
use surrocal::learning::{
    asgd_train, compute_constants, evaluate_risks, iteration_bound, make_generator, optimal_parameters_population,
    xi, SyntheticTask,
};
use surrocal::losses::{
    block_zero_one_loss, expected_loss_vector, hamming_loss, score_subspace, zero_one_loss, CondDist, ScoreSubspace,
    SubspaceMode, TaskLoss,
};
use surrocal::numerics::Matrix;

fn best_task_risk(task: &SyntheticTask, loss: &TaskLoss, s: &ScoreSubspace) -> f64 {
    task.conditionals
        .conditionals
        .iter()
        .zip(&task.features.weights)
        .map(|(q, w)| {
            let ell = expected_loss_vector(loss, &CondDist::Dense(q.clone())).unwrap();
            w * s.predictable().iter().map(|&c| ell[c]).fold(f64::INFINITY, f64::min)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Population version of the excess-risk bound: H(excess task risk) is
    /// at most the excess surrogate risk for any linear model.
    #[test]
    fn calibration_bounds_population_excess(seed in any::<u64>(), w in prop::collection::vec(-2.0..2.0f64, 16), scale in 0.001..1.0f64) {
        let loss = zero_one_loss(4).unwrap();
        let s = score_subspace(&loss, SubspaceMode::Unconstrained).unwrap();
        let task = make_generator(&s, &loss, 4, 4, seed).unwrap();
        let star = optimal_parameters_population(&task, &loss, &s).unwrap();
        let perturbed = star.add(&Matrix::new(4, 4, w).unwrap().scale(scale));
        let risks = evaluate_risks(&perturbed, &task, &loss, &s).unwrap();
        let optimum = evaluate_risks(&star, &task, &loss, &s).unwrap();
        let d_task = risks.task - best_task_risk(&task, &loss, &s);
        let d_phi = risks.surrogate - optimum.surrogate;
        let formula = exact_formula(&CalibrationQuery::new(&loss, &s, 0.0).unwrap()).unwrap();
        prop_assert!(d_task >= -1e-12);
        prop_assert!(formula.eval(d_task.max(0.0)) <= d_phi + 1e-10);
        prop_assert!((optimum.task - best_task_risk(&task, &loss, &s)).abs() < 1e-9);
    }

    #[test]
    fn dm_matches_closed_form(t in 2u32..8, r in 0.1..3.0f64, q in 0.1..3.0f64) {
        let s = ScoreSubspace::hamming_basis(t).unwrap();
        let c = compute_constants(&s, 1.0, r, q, 1).unwrap();
        let closed = xi(c.condition_number * ((t + 1) as f64).sqrt() * r * q);
        prop_assert!((c.dm - closed).abs() <= 1e-9 * closed);
        prop_assert!(c.condition_number <= t as f64 + 2.0);
    }

    #[test]
    fn iteration_bound_is_minimal(dm in 0.5..20.0f64, h in 1e-4..1.0f64) {
        let s = ScoreSubspace::full(2).unwrap();
        let base = compute_constants(&s, 1.0, 1.0, 1.0, 1).unwrap();
        let c = surrocal::learning::SgdConstants { dm, ..base };
        let n = iteration_bound(&c, h).unwrap();
        prop_assert!(2.0 * dm / ((n - 1) as f64).sqrt() <= h * (1.0 + 1e-12));
        if n > 2 {
            prop_assert!(2.0 * dm / ((n - 2) as f64).sqrt() > h * (1.0 - 1e-12));
        }
    }
}

#[test]
fn sampler_matches_pool_distribution() {
    let loss = zero_one_loss(3).unwrap();
    let s = score_subspace(&loss, SubspaceMode::Unconstrained).unwrap();
    let task = make_generator(&s, &loss, 3, 3, 5).unwrap();
    let samplers = task.samplers().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws = 60_000;
    let mut counts = [[0usize; 3]; 3];
    for _ in 0..draws {
        let (x, y) = task.sample(&mut rng, &samplers);
        counts[x][y] += 1;
    }
    let mut chi2 = 0.0;
    let mut cells = 0;
    for x in 0..3 {
        for y in 0..3 {
            let p = task.features.weights[x] * task.conditionals.conditionals[x][y];
            if p > 0.0 {
                let expected = p * draws as f64;
                chi2 += (counts[x][y] as f64 - expected).powi(2) / expected;
                cells += 1;
            } else {
                assert_eq!(counts[x][y], 0);
            }
        }
    }
    // 99.9% quantile of chi-square with 8 degrees of freedom.
    assert!(cells <= 9);
    assert!(chi2 < 26.12, "chi2 = {chi2}");
}

/// Training for the iteration bound at accuracy eps drives the excess task
/// risk below eps.
#[test]
fn iteration_bound_delivers_accuracy() {
    let eps = 1.0;
    for (loss, mode) in [
        (zero_one_loss(2).unwrap(), SubspaceMode::Unconstrained),
        (block_zero_one_loss(&[1, 1]).unwrap().0, SubspaceMode::Tight),
    ] {
        let s = score_subspace(&loss, mode).unwrap();
        let task = make_generator(&s, &loss, 2, 2, 3).unwrap();
        let h = exact_formula(&CalibrationQuery::new(&loss, &s, eps).unwrap()).unwrap().eval(eps);
        let probe = compute_constants(&s, loss.l_max(), task.features.r_bound, task.conditionals.q_bound, 1).unwrap();
        let n = iteration_bound(&probe, h).unwrap();
        let c = compute_constants(&s, loss.l_max(), task.features.r_bound, task.conditionals.q_bound, n).unwrap();
        let best = best_task_risk(&task, &loss, &s);
        let mean_excess = (0..4)
            .map(|seed| asgd_train(&task, &loss, &s, &c, n, seed).unwrap().task_risk - best)
            .sum::<f64>()
            / 4.0;
        assert!(mean_excess <= eps, "N = {n}, excess {mean_excess}");
    }
}

#[test]
fn rate_bound_on_hamming() {
    let loss = hamming_loss(3, true).unwrap();
    let s = score_subspace(&loss, SubspaceMode::Tight).unwrap();
    let task = make_generator(&s, &loss, 6, 5, 21).unwrap();
    for n in [50u64, 500] {
        let c = compute_constants(&s, 1.0, task.features.r_bound, task.conditionals.q_bound, n).unwrap();
        let runs: Vec<_> = (0..10).map(|seed| asgd_train(&task, &loss, &s, &c, n, seed).unwrap()).collect();
        let mean = runs.iter().map(|r| r.suboptimality).sum::<f64>() / runs.len() as f64;
        assert!(mean <= 2.0 * c.dm / (n as f64).sqrt());
        assert!(runs.iter().all(|r| r.trace.last().map(|t| t.0) == Some(n)));
    }
}
