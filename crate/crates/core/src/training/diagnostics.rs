use crate::model::split_mask;
use crate::numerics::Prng;

/// `|prev ∩ curr| / |prev ∪ curr|` over sorted index sets; 1 when both are
/// empty.
pub fn tpos_consecutive_iou(prev: &[usize], curr: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < prev.len() && j < curr.len() {
        match prev[i].cmp(&curr[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = prev.len() + curr.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Fraction of instances where `a_t > 0.5` agrees with membership in
/// `T_pos`. An actionness of exactly 0.5 counts as a negative prediction.
pub fn g_membership_accuracy(actionness: &[f64], t_pos: &[usize], t_neg: &[usize]) -> f64 {
    let total = t_pos.len() + t_neg.len();
    if total == 0 {
        return 1.0;
    }
    let hits = t_pos.iter().filter(|&&t| actionness[t] > 0.5).count()
        + t_neg.iter().filter(|&&t| actionness[t] <= 0.5).count();
    hits as f64 / total as f64
}

/// Fraction of `T_pos` that lies inside ground-truth action.
pub fn tpos_action_fraction(t_pos: &[usize], action_mask: &[bool]) -> Option<f64> {
    if t_pos.is_empty() {
        return None;
    }
    let hits = t_pos.iter().filter(|&&t| action_mask[t]).count();
    Some(hits as f64 / t_pos.len() as f64)
}

/// Drops action instances from `T_pos`, uniformly at random, until at most
/// `target_rate` of what remains contains action. Dropped instances join
/// `T_neg`. A target at or above the current rate leaves both sets as is.
pub fn subsample_tpos(
    t_pos: &[usize],
    t_neg: &[usize],
    action_mask: &[bool],
    target_rate: f64,
    prng: &mut Prng,
) -> (Vec<usize>, Vec<usize>) {
    let mut action: Vec<usize> = t_pos.iter().copied().filter(|&t| action_mask[t]).collect();
    let other = t_pos.len() - action.len();
    let current = if t_pos.is_empty() {
        0.0
    } else {
        action.len() as f64 / t_pos.len() as f64
    };
    if t_pos.is_empty() || target_rate >= current {
        return (t_pos.to_vec(), t_neg.to_vec());
    }
    // largest a with a / (a + other) <= target_rate
    let keep = if target_rate <= 0.0 {
        0
    } else {
        ((target_rate * other as f64 / (1.0 - target_rate)) + 1e-9).floor() as usize
    };
    let keep = keep.min(action.len());
    // partial Fisher-Yates: the first `keep` slots become the survivors
    for i in 0..keep {
        let j = i + prng.below(action.len() - i);
        action.swap(i, j);
    }
    let mut positive = vec![false; action_mask.len()];
    for &t in t_pos.iter().filter(|&&t| !action_mask[t]) {
        positive[t] = true;
    }
    for &t in &action[..keep] {
        positive[t] = true;
    }
    split_mask(&positive)
}

pub(crate) fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iou_examples() {
        assert_eq!(tpos_consecutive_iou(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(tpos_consecutive_iou(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(tpos_consecutive_iou(&[1, 2, 3], &[2, 3, 4]), 0.5);
        assert_eq!(tpos_consecutive_iou(&[], &[]), 1.0);
    }

    #[test]
    fn membership_examples() {
        assert_eq!(g_membership_accuracy(&[0.9, 0.1, 0.8], &[0, 2], &[1]), 1.0);
        let half = [0.5; 4];
        assert_eq!(g_membership_accuracy(&half, &[0], &[1, 2, 3]), 0.75);
    }

    #[test]
    fn membership_matches_brute_count() {
        let mut p = Prng::new(3);
        for _ in 0..50 {
            let a: Vec<f64> = (0..20).map(|_| p.uniform()).collect();
            let mask: Vec<bool> = (0..20).map(|_| p.below(2) == 1).collect();
            let (pos, neg) = split_mask(&mask);
            let brute = (0..20).filter(|&t| (a[t] > 0.5) == mask[t]).count() as f64 / 20.0;
            assert_eq!(g_membership_accuracy(&a, &pos, &neg), brute);
        }
    }

    #[test]
    fn subsample_counts() {
        // 8 action + 2 context in T_pos, target 0.5 → 2 action + 2 context
        let mask: Vec<bool> = (0..12).map(|t| t < 8).collect();
        let t_pos: Vec<usize> = (0..10).collect();
        let t_neg = vec![10, 11];
        let (pos, neg) = subsample_tpos(&t_pos, &t_neg, &mask, 0.5, &mut Prng::new(1));
        assert_eq!(pos.iter().filter(|&&t| mask[t]).count(), 2);
        assert_eq!(pos.iter().filter(|&&t| !mask[t]).count(), 2);
        assert_eq!(pos.len() + neg.len(), 12);
    }

    #[test]
    fn subsample_no_op_at_current_rate() {
        let mask = vec![true, true, false, false];
        let (pos, neg) = subsample_tpos(&[0, 2], &[1, 3], &mask, 0.5, &mut Prng::new(1));
        assert_eq!((pos, neg), (vec![0, 2], vec![1, 3]));
        let (pos, _) = subsample_tpos(&[0, 2], &[1, 3], &mask, 0.9, &mut Prng::new(1));
        assert_eq!(pos, vec![0, 2]);
    }

    proptest! {
        #[test]
        fn iou_symmetric(
            a in prop::collection::btree_set(0usize..20, 0..10),
            b in prop::collection::btree_set(0usize..20, 0..10),
        ) {
            let a: Vec<usize> = a.into_iter().collect();
            let b: Vec<usize> = b.into_iter().collect();
            let x = tpos_consecutive_iou(&a, &b);
            prop_assert_eq!(x, tpos_consecutive_iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert_eq!(x == 1.0, a == b);
        }

        #[test]
        fn subsample_keeps_partition(
            mask in prop::collection::vec(any::<bool>(), 1..30),
            pos_bits in prop::collection::vec(any::<bool>(), 30),
            rate in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let member: Vec<bool> = mask.iter().zip(&pos_bits).map(|(_, &b)| b).collect();
            let (t_pos, t_neg) = split_mask(&member);
            let (pos, neg) = subsample_tpos(&t_pos, &t_neg, &mask, rate, &mut Prng::new(seed));
            let mut all = [pos.clone(), neg].concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..mask.len()).collect::<Vec<_>>());
            prop_assert!(pos.iter().all(|t| t_pos.contains(t)));
            let before = t_pos.iter().filter(|&&t| mask[t]).count() as f64 / t_pos.len().max(1) as f64;
            if !pos.is_empty() && rate < before {
                let after = pos.iter().filter(|&&t| mask[t]).count() as f64 / pos.len() as f64;
                prop_assert!(after <= rate + 1e-12);
            }
        }
    }
}
