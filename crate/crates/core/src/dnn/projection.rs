use nalgebra::DVector;

/// Smooth radial projection keeping `‖θ̂‖ ≤ θ̄ √(1 + ε)` under `θ̂̇ = proj(Θ)`.
///
/// Inside the ball `‖θ̂‖ ≤ θ̄`, or when `Θ` points inward, `Θ` passes
/// unchanged. In the shell the outward radial part is scaled away by
/// `c = min(1, (‖θ̂‖² - θ̄²) / (ε θ̄²))`, reaching full removal at the outer edge.
pub fn smooth_projection(raw: &DVector<f64>, theta_hat: &DVector<f64>, theta_bar: f64, epsilon: f64) -> DVector<f64> {
    let norm2 = theta_hat.norm_squared();
    let bar2 = theta_bar * theta_bar;
    let radial = theta_hat.dot(raw);
    if norm2 <= bar2 || radial <= 0.0 {
        return raw.clone();
    }
    let c = ((norm2 - bar2) / (epsilon * bar2)).min(1.0);
    raw - theta_hat * (c * radial / norm2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interior_is_untouched() {
        let th = DVector::from_vec(vec![3.0, 4.0]); // norm 5 = 0.5 θ̄
        let raw = DVector::from_vec(vec![1.0, -7.0]);
        assert_eq!(smooth_projection(&raw, &th, 10.0, 0.1), raw);
    }

    #[test]
    fn outer_shell_removes_outward_radial_part() {
        let bar: f64 = 10.0;
        let eps: f64 = 0.1;
        let th = DVector::from_vec(vec![bar * (1.0 + eps).sqrt(), 0.0, 0.0]);
        let raw = DVector::from_vec(vec![2.0, 1.0, -1.0]);
        let out = smooth_projection(&raw, &th, bar, eps);
        assert!(out.dot(&th).abs() < 1e-12);
        assert_eq!(out[1], 1.0);
    }

    #[test]
    fn inward_rate_passes_in_shell() {
        let th = DVector::from_vec(vec![10.3, 0.0]);
        let raw = DVector::from_vec(vec![-1.0, 2.0]);
        assert_eq!(smooth_projection(&raw, &th, 10.0, 0.1), raw);
    }

    proptest! {
        #[test]
        fn never_increases_radial_growth(
            th in proptest::collection::vec(-5.0f64..5.0, 4),
            raw in proptest::collection::vec(-5.0f64..5.0, 4),
            bar in 0.5f64..6.0,
        ) {
            let th = DVector::from_vec(th);
            let raw = DVector::from_vec(raw);
            let out = smooth_projection(&raw, &th, bar, 0.1);
            if th.norm() > bar {
                prop_assert!(th.dot(&out) <= th.dot(&raw) + 1e-12);
                prop_assert!(th.dot(&out) <= 1e-12 || th.norm_squared() < bar * bar * 1.1);
            }
        }
    }
}
