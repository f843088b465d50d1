use crate::error::{AslError, Result};
use crate::numerics::Matrix;

/// Selection scores `h = β a_t + (1 - β) s_{c,t}`, shape `C × T`.
///
/// `cas` is used raw; only the actionness is a probability.
pub fn fuse_selection(actionness: &[f64], cas: &Matrix, beta: f64) -> Result<Matrix> {
    if actionness.len() != cas.cols() {
        return Err(AslError::shape("fuse_selection", cas.cols(), actionness.len()));
    }
    let mut fused = cas.clone();
    for c in 0..cas.rows() {
        for (h, &a) in fused.row_mut(c).iter_mut().zip(actionness) {
            *h = beta * a + (1.0 - beta) * *h;
        }
    }
    Ok(fused)
}

/// Indices of the `k` largest entries of each row, returned ascending.
/// Ties go to the lower index.
pub fn topk_per_class(scores: &Matrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let t = scores.cols();
    if k == 0 || k > t {
        return Err(AslError::Config(format!("top-k needs 1 <= k <= T, got k={k}, T={t}")));
    }
    Ok(scores.iter_rows().map(|row| topk_row(row, k)).collect())
}

fn topk_row(row: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    // stable sort keeps lower indices first among equal scores
    order.sort_by(|&i, &j| row[j].total_cmp(&row[i]));
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Mean of the CAS over each class's selected instances, one per class.
pub fn pooled_scores(cas: &Matrix, topk: &[Vec<usize>]) -> Vec<f64> {
    topk.iter()
        .enumerate()
        .map(|(c, idx)| {
            let row = cas.row(c);
            idx.iter().map(|&t| row[t]).sum::<f64>() / idx.len() as f64
        })
        .collect()
}

/// Video-level class probabilities: softmax over classes of the pooled CAS.
pub fn video_class_probs(cas: &Matrix, topk: &[Vec<usize>]) -> Vec<f64> {
    softmax(&pooled_scores(cas, topk))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `T_pos` is the union of the top-k sets of the labelled classes, `T_neg`
/// the rest of `0..T`. Both come back sorted.
pub fn build_pos_neg(topk: &[Vec<usize>], labels: &[usize], len: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if labels.is_empty() {
        return Err(AslError::Contract("positive set needs at least one video label".into()));
    }
    let mut positive = vec![false; len];
    for &c in labels {
        let set = topk
            .get(c)
            .ok_or_else(|| AslError::Contract(format!("label {c} has no top-k set ({} classes)", topk.len())))?;
        for &t in set {
            positive[t] = true;
        }
    }
    Ok(split_mask(&positive))
}

pub(crate) fn split_mask(mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (t, &m) in mask.iter().enumerate() {
        if m {
            pos.push(t);
        } else {
            neg.push(t);
        }
    }
    (pos, neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(values: &[f64]) -> Matrix {
        Matrix::from_rows(&[values]).unwrap()
    }

    #[test]
    fn fusion_arithmetic() {
        let h = fuse_selection(&[0.4], &row(&[0.8]), 0.5).unwrap();
        assert!((h[(0, 0)] - 0.6).abs() < 1e-15);
        let cas = Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]).unwrap();
        let a = [0.2, 0.9];
        let h1 = fuse_selection(&a, &cas, 1.0).unwrap();
        assert_eq!(h1.row(0), &a);
        assert_eq!(h1.row(1), &a);
        assert_eq!(fuse_selection(&a, &cas, 0.0).unwrap(), cas);
        assert!(fuse_selection(&[0.1], &cas, 0.5).is_err());
    }

    #[test]
    fn topk_examples() {
        let t = topk_per_class(&row(&[0.9, 0.1, 0.8, 0.3, 0.2]), 2).unwrap();
        assert_eq!(t, vec![vec![0, 2]]);
        let t = topk_per_class(&row(&[0.5; 5]), 2).unwrap();
        assert_eq!(t, vec![vec![0, 1]]);
        let t = topk_per_class(&row(&[0.3, 0.1, 0.2]), 3).unwrap();
        assert_eq!(t, vec![vec![0, 1, 2]]);
        assert!(topk_per_class(&row(&[0.3, 0.1]), 3).is_err());
        assert!(topk_per_class(&row(&[0.3, 0.1]), 0).is_err());
    }

    #[test]
    fn softmax_examples() {
        let cas = Matrix::from_rows(&[[3f64.ln()], [0.0]]).unwrap();
        let p = video_class_probs(&cas, &[vec![0], vec![0]]);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        let flat = softmax(&[2.0, 2.0, 2.0, 2.0]);
        assert!(flat.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn pos_neg_edge_cases() {
        let topk = vec![vec![0, 1], vec![2, 3]];
        let (pos, neg) = build_pos_neg(&topk, &[0, 1], 6).unwrap();
        assert_eq!(pos.len(), 4);
        assert_eq!(neg, vec![4, 5]);
        let full = vec![vec![0, 1, 2], vec![0, 1, 2]];
        let (_, neg) = build_pos_neg(&full, &[0, 1], 3).unwrap();
        assert!(neg.is_empty());
        assert!(build_pos_neg(&topk, &[], 6).is_err());
    }

    proptest! {
        #[test]
        fn fused_scores_are_convex_combinations(
            cas in prop::collection::vec(-5.0f64..5.0, 12),
            a in prop::collection::vec(0.0f64..1.0, 4),
            beta in 0.0f64..=1.0,
        ) {
            let cas = Matrix::from_vec(3, 4, cas).unwrap();
            let h = fuse_selection(&a, &cas, beta).unwrap();
            for c in 0..3 {
                for t in 0..4 {
                    let (lo, hi) = (a[t].min(cas[(c, t)]), a[t].max(cas[(c, t)]));
                    let tol = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
                    prop_assert!(h[(c, t)] >= lo - tol && h[(c, t)] <= hi + tol);
                }
            }
        }

        #[test]
        fn class_probs_shift_invariant(
            cas in prop::collection::vec(-5.0f64..5.0, 12),
            shift in -10.0f64..10.0,
        ) {
            let cas = Matrix::from_vec(3, 4, cas).unwrap();
            let topk = topk_per_class(&cas, 2).unwrap();
            let p = video_class_probs(&cas, &topk);
            let shifted = video_class_probs(&cas.map(|v| v + shift), &topk);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in p.iter().zip(&shifted) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn affine_map_keeps_topk(
            cas in prop::collection::vec(-5.0f64..5.0, 10),
            a in prop::collection::vec(0.01f64..0.99, 5),
            scale in 0.1f64..4.0,
            offset in -2.0f64..2.0,
        ) {
            let cas = Matrix::from_vec(2, 5, cas).unwrap();
            let h = fuse_selection(&a, &cas, 0.5).unwrap();
            let a2: Vec<f64> = a.iter().map(|v| scale * v + offset).collect();
            let h2 = fuse_selection(&a2, &cas.map(|v| scale * v + offset), 0.5).unwrap();
            // ties can be broken differently after rounding; skip near-ties
            let near_tie = h.iter_rows().any(|r| {
                let mut v = r.to_vec();
                v.sort_by(f64::total_cmp);
                v.windows(2).any(|w| (w[1] - w[0]).abs() < 1e-9)
            });
            prop_assume!(!near_tie);
            prop_assert_eq!(topk_per_class(&h, 2).unwrap(), topk_per_class(&h2, 2).unwrap());
        }

        #[test]
        fn pos_neg_partition(
            scores in prop::collection::vec(0.0f64..1.0, 3 * 9),
            k in 1usize..=9,
            labels in prop::collection::btree_set(0usize..3, 1..=3),
        ) {
            let h = Matrix::from_vec(3, 9, scores).unwrap();
            let topk = topk_per_class(&h, k).unwrap();
            let labels: Vec<usize> = labels.into_iter().collect();
            let (pos, neg) = build_pos_neg(&topk, &labels, 9).unwrap();
            let mut all = [pos.clone(), neg.clone()].concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..9).collect::<Vec<_>>());
            prop_assert!(pos.iter().all(|t| !neg.contains(t)));
        }
    }
}
