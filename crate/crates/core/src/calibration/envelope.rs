use super::value::Extended;

/// Greatest convex nondecreasing minorant of `values` on the grid `epsilons`.
///
/// Infinite values impose no constraint; grid points past the last finite
/// value stay infinite.
pub fn convex_envelope(epsilons: &[f64], values: &[Extended]) -> Vec<Extended> {
    assert_eq!(epsilons.len(), values.len(), "grid and values differ in length");
    let points: Vec<(f64, f64)> = epsilons
        .iter()
        .zip(values)
        .filter_map(|(&e, v)| v.finite().map(|v| (e, v)))
        .collect();
    let Some(&(last_x, _)) = points.last() else {
        return vec![Extended::Infinite; values.len()];
    };

    // Lower hull, left to right.
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in &points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let eval = |x: f64| -> f64 {
        let idx = hull.partition_point(|h| h.0 < x);
        if idx == 0 {
            return hull[0].1;
        }
        if idx == hull.len() {
            return hull[hull.len() - 1].1;
        }
        let (a, b) = (hull[idx - 1], hull[idx]);
        if b.0 == a.0 {
            return a.1.min(b.1);
        }
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    };

    let first_x = points[0].0;
    let mut out: Vec<Extended> = epsilons
        .iter()
        .map(|&e| {
            if e > last_x {
                Extended::Infinite
            } else if e < first_x {
                // Left of the data a convex nondecreasing minorant is capped by the first value.
                Extended::Finite(points[0].1)
            } else {
                Extended::Finite(eval(e))
            }
        })
        .collect();

    // Nondecreasing: flatten the decreasing part of the hull.
    let mut running = f64::INFINITY;
    for v in out.iter_mut().rev() {
        if let Extended::Finite(x) = v {
            running = running.min(*x);
            *x = running;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(v: &[f64]) -> Vec<Extended> {
        v.iter().map(|&x| Extended::Finite(x)).collect()
    }

    #[test]
    fn convex_input_unchanged() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let vals: Vec<f64> = grid.iter().map(|e| 0.3 * e * e).collect();
        let env = convex_envelope(&grid, &finite(&vals));
        for (a, b) in env.iter().zip(&vals) {
            assert!((a.finite().unwrap() - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dip_removed() {
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        let vals = [0.0, 0.1, 0.05, 0.3, 0.6];
        let env = convex_envelope(&grid, &finite(&vals));
        for (e, v) in env.iter().zip(vals) {
            assert!(e.finite().unwrap() <= v + 1e-15);
        }
        let e: Vec<f64> = env.iter().map(|v| v.finite().unwrap()).collect();
        for w in e.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for w in e.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-15);
        }
    }

    #[test]
    fn decreasing_start_is_flattened() {
        let env = convex_envelope(&[0.0, 1.0, 2.0], &finite(&[1.0, 0.0, 1.0]));
        assert_eq!(env, finite(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn infinite_tail() {
        let env = convex_envelope(&[0.0, 0.5, 1.0], &[Extended::Finite(0.0), Extended::Finite(0.1), Extended::Infinite]);
        assert_eq!(env[2], Extended::Infinite);
        assert_eq!(env[1], Extended::Finite(0.1));
        assert!(convex_envelope(&[], &[]).is_empty());
    }
}
