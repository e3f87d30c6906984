/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (idx, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (idx + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Largest violation of `x >= 0, sum x = 1`.
pub fn simplex_violation(x: &[f64]) -> f64 {
    let neg = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    neg.max((x.iter().sum::<f64>() - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_cases() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = project_simplex(&[-1.0, 0.3, 0.9]);
        assert!(simplex_violation(&p) < 1e-15);
        assert!((p[2] - p[1] - 0.6).abs() < 1e-15 && p[0] == 0.0);
    }
}
