use crate::error::{Result, SimError};

/// Indices of the `m` scores closest to `target`, in order of closeness.
/// Ties keep input order.
///
/// Because `sum |s - target|` is separable over the chosen subset, taking the
/// `m` individually closest scores is an exact minimiser over all size-`m`
/// subsets.
pub fn greedy_downsample(scores: &[f64], target: f64, m: usize) -> Result<Vec<usize>> {
    if scores.len() < m {
        return Err(SimError::Config(format!(
            "greedy downsampling needs at least {m} candidates, got {}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(SimError::NonFinite(format!("candidate score {bad}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable, so equal distances stay in input order
    order.sort_by(|&a, &b| {
        (scores[a] - target)
            .abs()
            .partial_cmp(&(scores[b] - target).abs())
            .expect("no NaN")
    });
    order.truncate(m);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(scores: &[f64], target: f64, chosen: &[usize]) -> f64 {
        chosen.iter().map(|&i| (scores[i] - target).abs()).sum()
    }

    /// Minimum over all size-m subsets, by bitmask enumeration.
    fn brute_force_min(scores: &[f64], target: f64, m: usize) -> f64 {
        let n = scores.len();
        (0u32..1 << n)
            .filter(|mask| mask.count_ones() as usize == m)
            .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| (scores[i] - target).abs()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn equal_scores_keep_input_order() {
        assert_eq!(greedy_downsample(&[0.3; 6], 0.5, 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn ascending_scores_with_zero_target() {
        assert_eq!(greedy_downsample(&[0.0, 0.1, 0.2, 0.5, 0.9], 0.0, 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn too_few_candidates() {
        assert!(greedy_downsample(&[0.1, 0.2], 0.5, 3).is_err());
    }

    proptest! {
        #[test]
        fn matches_exhaustive_subset_search(
            scores in prop::collection::vec(0.0f64..1.0, 1..=12),
            target in 0.0f64..1.0,
            m_seed in 1usize..=6,
        ) {
            let m = m_seed.min(scores.len());
            let chosen = greedy_downsample(&scores, target, m).unwrap();
            prop_assert_eq!(chosen.len(), m);
            let got = objective(&scores, target, &chosen);
            let best = brute_force_min(&scores, target, m);
            prop_assert!((got - best).abs() < 1e-12, "greedy {} vs brute {}", got, best);
        }
    }
}
