use grouprobust::trainers::cvar_batch_weights;
use proptest::prelude::*;

/// Maximum of `sum w_i l_i` over the capped simplex, by vertex enumeration.
fn vertex_max(losses: &[f64], cap: f64) -> f64 {
    let b = losses.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << b) {
        let k = mask.count_ones() as f64;
        let rest = 1.0 - k * cap;
        let at_cap: f64 = (0..b).filter(|i| mask >> i & 1 == 1).map(|i| cap * losses[i]).sum();
        if rest.abs() <= 1e-12 {
            best = best.max(at_cap);
        } else if rest > 0.0 && rest <= cap + 1e-12 {
            for j in (0..b).filter(|j| mask >> j & 1 == 0) {
                best = best.max(at_cap + rest * losses[j]);
            }
        }
    }
    best
}

fn weighted(w: &[f64], l: &[f64]) -> f64 {
    w.iter().zip(l).map(|(a, b)| a * b).sum()
}

proptest! {
    #[test]
    fn weights_lie_on_the_capped_simplex(losses in prop::collection::vec(0.0f64..10.0, 1..40), alpha in 0.001f64..=1.0) {
        let w = cvar_batch_weights(&losses, alpha).unwrap();
        let cap = 1.0 / (alpha * losses.len() as f64);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0 && x <= cap + 1e-12));
    }

    #[test]
    fn matches_vertex_oracle(losses in prop::collection::vec(0.0f64..5.0, 1..=10), alpha in 0.01f64..=1.0) {
        let w = cvar_batch_weights(&losses, alpha).unwrap();
        let cap = 1.0 / (alpha * losses.len() as f64);
        prop_assert!((weighted(&w, &losses) - vertex_max(&losses, cap)).abs() < 1e-9);
    }

    #[test]
    fn cvar_dominates_mean_and_shrinks_with_alpha(
        losses in prop::collection::vec(0.0f64..5.0, 1..30),
        a in 0.01f64..=1.0,
        b in 0.01f64..=1.0,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        let at = |alpha| weighted(&cvar_batch_weights(&losses, alpha).unwrap(), &losses);
        prop_assert!(at(hi) >= mean - 1e-12);
        prop_assert!(at(lo) >= at(hi) - 1e-12);
        prop_assert!(at(lo) <= losses.iter().cloned().fold(f64::MIN, f64::max) + 1e-12);
    }

    #[test]
    fn alpha_one_is_uniform(losses in prop::collection::vec(0.0f64..5.0, 1..30)) {
        let w = cvar_batch_weights(&losses, 1.0).unwrap();
        let u = 1.0 / losses.len() as f64;
        prop_assert!(w.iter().all(|&x| x == u));
    }

    #[test]
    fn permuting_losses_permutes_the_objective(losses in prop::collection::vec(0.0f64..5.0, 2..12), alpha in 0.05f64..=1.0) {
        let mut rev = losses.clone();
        rev.reverse();
        let f = weighted(&cvar_batch_weights(&losses, alpha).unwrap(), &losses);
        let g = weighted(&cvar_batch_weights(&rev, alpha).unwrap(), &rev);
        prop_assert!((f - g).abs() < 1e-12);
    }
}
