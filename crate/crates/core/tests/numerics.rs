use proptest::prelude::*;
use surrocal::numerics::{
    project_simplex, pseudo_inverse, simplex_violation, solve_qp, svd, LinearConstraint, Matrix, QpProblem,
};

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0..3.0f64, r * c).prop_map(move |d| Matrix::new(r, c, d).unwrap())
    })
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    a.sub(b).frobenius_norm() <= tol * (1.0 + a.frobenius_norm())
}

proptest! {
    #[test]
    fn svd_reconstructs(a in matrix(7, 7)) {
        let f = svd(&a).unwrap();
        prop_assert!(close(&f.reconstruct(), &a, 1e-10));
        prop_assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.singular_values.iter().all(|&s| s >= 0.0));
        let u = &f.left_vectors;
        let gram = u.tr_matmul(u);
        prop_assert!(close(&gram, &Matrix::identity(gram.rows()), 1e-10));
    }

    #[test]
    fn pseudo_inverse_penrose(a in matrix(6, 6), rank_cut in 0usize..3) {
        // Drop some columns' independence by repeating the first column.
        let mut a = a;
        for j in 0..rank_cut.min(a.cols().saturating_sub(1)) {
            let c0 = a.column(0);
            a.set_column(j + 1, &c0);
        }
        let p = pseudo_inverse(&a).unwrap();
        prop_assert!(close(&a.matmul(&p).matmul(&a), &a, 1e-9));
        prop_assert!(close(&p.matmul(&a).matmul(&p), &p, 1e-9));
        let ap = a.matmul(&p);
        prop_assert!(close(&ap, &ap.transpose(), 1e-9));
        let pa = p.matmul(&a);
        prop_assert!(close(&pa, &pa.transpose(), 1e-9));
    }

    #[test]
    fn simplex_projection_is_nearest(v in prop::collection::vec(-2.0..2.0f64, 1..8), seed in any::<u64>()) {
        let p = project_simplex(&v);
        prop_assert!(simplex_violation(&p) < 1e-12);
        let dist = |x: &[f64]| x.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let mut state = seed | 1;
        for _ in 0..20 {
            let mut z: Vec<f64> = (0..v.len())
                .map(|_| {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    (state % 1000) as f64
                })
                .collect();
            let total: f64 = z.iter().sum::<f64>().max(1.0);
            z.iter_mut().for_each(|x| *x /= total);
            if z.iter().sum::<f64>() == 0.0 {
                z[0] = 1.0;
            }
            prop_assert!(dist(&p) <= dist(&z) + 1e-12);
        }
    }

    #[test]
    fn box_qp_matches_clamp(
        a in prop::collection::vec(0.1..5.0f64, 1..6),
        b in prop::collection::vec(-5.0..5.0f64, 6),
    ) {
        let n = a.len();
        let mut p = QpProblem::new(Matrix::diag(&a), b[..n].to_vec());
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            p.inequalities.push(LinearConstraint::new(e.clone(), 1.0));
            e[i] = -1.0;
            p.inequalities.push(LinearConstraint::new(e, 1.0));
        }
        let sol = solve_qp(&p, 1e-10).unwrap();
        let x = &sol.optimal().unwrap().x;
        for i in 0..n {
            let expected = (-b[i] / a[i]).clamp(-1.0, 1.0);
            prop_assert!((x[i] - expected).abs() < 1e-5, "x[{}] = {} vs {}", i, x[i], expected);
        }
    }

    #[test]
    fn simplex_qp_matches_projection(v in prop::collection::vec(-2.0..2.0f64, 2..6)) {
        let n = v.len();
        let mut p = QpProblem::new(Matrix::identity(n), v.iter().map(|x| -x).collect());
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = -1.0;
            p.inequalities.push(LinearConstraint::new(e, 0.0));
        }
        p.equalities.push(LinearConstraint::new(vec![1.0; n], 1.0));
        let sol = solve_qp(&p, 1e-10).unwrap();
        let x = &sol.optimal().unwrap().x;
        let proj = project_simplex(&v);
        for i in 0..n {
            prop_assert!((x[i] - proj[i]).abs() < 1e-5);
        }
    }
}
