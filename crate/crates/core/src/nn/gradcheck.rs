/// Central-difference gradient of `f` at `params`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, params: &[f64], step: f64) -> Vec<f64> {
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            probe[i] = params[i] + step;
            let up = f(&probe);
            probe[i] = params[i] - step;
            let down = f(&probe);
            probe[i] = params[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Relative error `‖a − n‖ / max(‖a‖, ‖n‖)` between analytic and numeric gradients.
///
/// Zero when both vectors vanish.
pub fn finite_diff_check<F: FnMut(&[f64]) -> f64>(f: F, params: &[f64], analytic: &[f64], step: f64) -> f64 {
    assert_eq!(params.len(), analytic.len());
    let numeric = central_difference(f, params, step);
    relative_error(analytic, &numeric)
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// [`relative_error`] computed separately for each parameter tensor; returns the worst.
pub fn blockwise_relative_error(analytic: &[f64], numeric: &[f64], shapes: &[(usize, usize)]) -> f64 {
    let mut offset = 0;
    let mut worst = 0.0f64;
    for &(r, c) in shapes {
        let n = r * c;
        worst = worst.max(relative_error(&analytic[offset..offset + n], &numeric[offset..offset + n]));
        offset += n;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_at_three() {
        let err = finite_diff_check(|p| p[0] * p[0], &[3.0], &[6.0], 1e-5);
        assert!(err < 1e-6);
    }

    #[test]
    fn constant_function() {
        let numeric = central_difference(|_| 4.2, &[1.0, -1.0], 1e-5);
        assert!(numeric.iter().all(|g| g.abs() < 1e-12));
        assert_eq!(finite_diff_check(|_| 4.2, &[1.0, -1.0], &[0.0, 0.0], 1e-5), 0.0);
    }

    #[test]
    fn wrong_gradient_is_flagged_per_block() {
        let a = [1.0, 2.0, 1e-3];
        let n = [1.0, 2.0, 2e-3];
        assert!(relative_error(&a, &n) < 1e-3);
        assert!(blockwise_relative_error(&a, &n, &[(2, 1), (1, 1)]) > 0.4);
    }
}
