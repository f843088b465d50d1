use super::*;
use crate::data::VideoRecord;
use crate::inference::Proposal;
use crate::numerics::Matrix;
use proptest::prelude::*;

fn det(video: usize, start: usize, end: usize, score: f64) -> Detection {
    Detection {
        video,
        start,
        end,
        score,
    }
}

fn gt(video: usize, start: usize, end: usize) -> GtInstance {
    GtInstance { video, start, end }
}

/// Ranks with a key tuple sort, matches by scanning candidates sorted by
/// IoU, and integrates the PR curve by recall increments.
fn brute_ap(dets: &[Detection], gts: &[GtInstance], thr: f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let mut ranked: Vec<(std::cmp::Reverse<u64>, usize, usize, usize)> = dets
        .iter()
        .map(|d| (std::cmp::Reverse(d.score.to_bits()), d.start, d.video, d.end))
        .collect();
    ranked.sort();
    let mut used = vec![false; gts.len()];
    let mut tp = 0.0;
    let (mut prev_recall, mut ap) = (0.0, 0.0);
    for (r, &(_, start, video, end)) in ranked.iter().enumerate() {
        let mut cands: Vec<(f64, usize)> = gts
            .iter()
            .enumerate()
            .filter(|(g, x)| !used[*g] && x.video == video)
            .map(|(g, x)| (segment_iou((start, end), (x.start, x.end)), g))
            .filter(|&(iou, _)| iou >= thr)
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        if let Some(&(_, g)) = cands.first() {
            used[g] = true;
            tp += 1.0;
        }
        let precision = tp / (r + 1) as f64;
        let recall = tp / gts.len() as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(ap)
}

#[test]
fn iou_examples() {
    assert_eq!(segment_iou((3, 7), (3, 7)), 1.0);
    assert_eq!(segment_iou((0, 4), (5, 9)), 0.0);
    assert!((segment_iou((0, 9), (5, 14)) - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(segment_iou((2, 2), (2, 2)), 1.0);
}

#[test]
fn grids() {
    let t = EvalConfig::thumos();
    assert_eq!(t.iou_thresholds.len(), 9);
    assert!((t.iou_thresholds[8] - 0.9).abs() < 1e-12);
    let a = EvalConfig::anet();
    assert_eq!(a.iou_thresholds.len(), 10);
    assert!((a.iou_thresholds[0] - 0.5).abs() < 1e-12 && (a.iou_thresholds[9] - 0.95).abs() < 1e-12);
    assert!(t.validate().is_ok() && a.validate().is_ok());
    assert!(EvalConfig {
        iou_thresholds: vec![0.5, 0.5]
    }
    .validate()
    .is_err());
    assert!(EvalConfig::from_grid("coco").is_err());
}

#[test]
fn ap_examples() {
    let gts = [gt(0, 0, 9), gt(0, 20, 29)];
    assert_eq!(
        ap_at_iou(&[det(0, 0, 9, 0.9), det(0, 20, 29, 0.8)], &gts, 0.5),
        Some(1.0)
    );
    let ranked = [det(0, 0, 9, 0.9), det(0, 40, 49, 0.8), det(0, 20, 29, 0.7)];
    let ap = ap_at_iou(&ranked, &gts, 0.5).unwrap();
    assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    assert_eq!(ap_at_iou(&[], &gts, 0.5), Some(0.0));
    assert_eq!(ap_at_iou(&ranked, &[], 0.5), None);
}

#[test]
fn best_iou_gt_is_matched() {
    // 1-10 overlaps 0-9 at 9/11 and 3-12 at 8/12; it takes 0-9 and leaves
    // 3-12 for the next detection.
    let gts = [gt(0, 3, 12), gt(0, 0, 9)];
    let m = match_detections(&[det(0, 1, 10, 0.9), det(0, 3, 12, 0.5)], &gts, 0.5);
    assert_eq!((m[0].1, m[1].1), (Some(1), Some(0)));
}

#[test]
fn confusion_examples() {
    let mask = [true, false, true];
    assert_eq!(
        instance_confusion(&mask, &mask).unwrap(),
        Confusion {
            tp: 2,
            fp: 0,
            fn_: 0,
            tn: 1
        }
    );
    assert_eq!(
        instance_confusion(&[true; 5], &[false; 5]).unwrap(),
        Confusion {
            tp: 0,
            fp: 5,
            fn_: 0,
            tn: 0
        }
    );
    assert!(instance_confusion(&[true], &[true, false]).is_err());
}

#[test]
fn recall_examples() {
    let a = [0.9, 0.1, 0.8, 0.7, 0.2];
    assert_eq!(
        recall_at_n(&a, &[true, false, true, true, false], 3).unwrap().value,
        1.0
    );
    assert_eq!(recall_at_n(&a, &[false; 5], 3).unwrap().value, 0.0);
    let r = recall_at_n(&a, &[true, false, false, false, true], 10).unwrap();
    assert_eq!((r.used, r.value), (5, 0.4));
    // Ties rank the lower index first.
    assert_eq!(recall_at_n(&[0.5, 0.5], &[false, true], 1).unwrap().value, 0.0);
    assert!(recall_at_n(&a, &[true; 5], 0).is_err());
}

#[test]
fn taxonomy_fixture() {
    let video_gt = vec![vec![
        GtSegment {
            class: 0,
            start: 10,
            end: 19,
        },
        GtSegment {
            class: 1,
            start: 30,
            end: 39,
        },
    ]];
    let p = |class_index, start, end, score| {
        (
            0,
            class_index,
            Proposal {
                class_index,
                start,
                end,
                score,
            },
        )
    };
    let props = [
        p(0, 10, 19, 0.9),
        p(0, 11, 19, 0.8),
        p(0, 14, 25, 0.7),
        p(0, 50, 55, 0.6),
        p(0, 30, 39, 0.5),
    ];
    let tax = classify_false_positives(&props, &video_gt, 2, 0.5);
    assert_eq!(
        tax,
        FpTaxonomy {
            background: 1,
            localization: 1,
            double_detection: 1,
            wrong_label: 1
        }
    );
}

#[test]
fn partial_other_class_overlap_is_wrong_label() {
    let segs = [GtSegment {
        class: 1,
        start: 0,
        end: 9,
    }];
    assert_eq!(
        categorize_false_positive(0, (8, 20), &segs, 0.5),
        FpCategory::WrongLabel
    );
    assert_eq!(
        categorize_false_positive(0, (20, 25), &segs, 0.5),
        FpCategory::Background
    );
}

fn toy_dataset() -> Dataset {
    let rec = |id: &str, labels: Vec<usize>, segs: Vec<GtSegment>| {
        VideoRecord::new(id, Matrix::zeros(40, 2), labels, Some(segs)).unwrap()
    };
    let records = vec![
        rec(
            "a",
            vec![0],
            vec![GtSegment {
                class: 0,
                start: 5,
                end: 14,
            }],
        ),
        rec(
            "b",
            vec![0, 1],
            vec![
                GtSegment {
                    class: 0,
                    start: 0,
                    end: 3,
                },
                GtSegment {
                    class: 1,
                    start: 20,
                    end: 29,
                },
            ],
        ),
    ];
    Dataset::new(records, 3, 2, vec!["x".into(), "y".into(), "z".into()]).unwrap()
}

fn row(video: &str, class_index: usize, start: usize, end: usize, score: f64) -> ProposalRow {
    ProposalRow {
        video_id: video.into(),
        class_index,
        class_name: String::new(),
        start,
        end,
        score,
    }
}

#[test]
fn evaluate_perfect_and_empty() {
    let ds = toy_dataset();
    let perfect = vec![
        row("a", 0, 5, 14, 0.9),
        row("b", 0, 0, 3, 0.8),
        row("b", 1, 20, 29, 0.7),
    ];
    let report = evaluate(&perfect, &ds, &EvalConfig::thumos()).unwrap();
    assert_eq!(report.map, 1.0);
    assert_eq!(report.ap[2], vec![None; 9]);
    assert_eq!(report.confusion.fp + report.confusion.fn_, 0);
    assert_eq!(report.fp_taxonomy.total(), 0);

    let empty = evaluate(&[], &ds, &EvalConfig::anet()).unwrap();
    assert_eq!(empty.map, 0.0);
    assert_eq!(empty.confusion.tp, 0);
    assert_eq!(empty.confusion.fn_, 24);
}

#[test]
fn evaluate_hand_table() {
    // Class 0 has GT a:5-14 and b:0-3. Ranked: TP (a), FP (b:30-35), TP (b).
    let ds = toy_dataset();
    let rows = vec![
        row("b", 0, 0, 3, 0.5),
        row("a", 0, 5, 14, 0.9),
        row("b", 0, 30, 35, 0.6),
    ];
    let report = evaluate(
        &rows,
        &ds,
        &EvalConfig {
            iou_thresholds: vec![0.5],
        },
    )
    .unwrap();
    assert!((report.ap[0][0].unwrap() - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    assert_eq!(report.ap[1][0], Some(0.0));
    assert!((report.map - (1.0 + 2.0 / 3.0) / 4.0).abs() < 1e-15);
    assert_eq!(report.fp_taxonomy.background, 1);
}

#[test]
fn evaluate_errors() {
    let ds = toy_dataset();
    assert!(matches!(
        evaluate(&[row("zz", 0, 0, 1, 0.5)], &ds, &EvalConfig::thumos()),
        Err(AslError::UnknownVideo(_))
    ));
    assert!(matches!(
        evaluate(&[row("a", 7, 0, 1, 0.5)], &ds, &EvalConfig::thumos()),
        Err(AslError::LabelOutOfRange { .. })
    ));
    let mut no_gt = ds.clone();
    no_gt.records[1].gt_segments = None;
    assert!(matches!(
        evaluate(&[], &no_gt, &EvalConfig::thumos()),
        Err(AslError::MissingGroundTruth(_))
    ));
}

#[test]
fn report_renders_consistently() {
    let ds = toy_dataset();
    let rows = vec![row("a", 0, 5, 12, 0.9), row("b", 1, 18, 29, 0.4)];
    let report = evaluate(&rows, &ds, &EvalConfig::thumos()).unwrap();
    let mean = report.ap_at_iou.iter().sum::<f64>() / 9.0;
    assert_eq!(report.map, mean);
    let summary = report::render_summary(&report);
    assert!(summary.contains(&format!("map={}\n", report.map)));
    assert!(summary.contains("recall_at_n.value=NA"));
    let csv = report::render_ap_csv(&report);
    assert_eq!(csv.lines().count(), 1 + 3 * 9 + 9);
    assert!(render_table(&report).contains("mAP"));
}

fn arb_segment(max: usize) -> impl Strategy<Value = (usize, usize)> {
    (0..max, 0..max).prop_map(|(a, b)| (a.min(b), a.max(b)))
}

proptest! {
    #[test]
    fn iou_symmetric_and_bounded(a in arb_segment(30), b in arb_segment(30)) {
        let x = segment_iou(a, b);
        prop_assert_eq!(x, segment_iou(b, a));
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert_eq!(x == 1.0, a == b);
    }

    #[test]
    fn ap_matches_brute_force(
        dets in prop::collection::vec((0usize..2, arb_segment(20), 0u8..6), 0..=10),
        gts in prop::collection::vec((0usize..2, arb_segment(20)), 1..=3),
        thr in 0.1f64..0.9,
    ) {
        let dets: Vec<Detection> = dets.iter().map(|&(v, (s, e), q)| det(v, s, e, f64::from(q) / 5.0)).collect();
        let gts: Vec<GtInstance> = gts.iter().map(|&(v, (s, e))| gt(v, s, e)).collect();
        let ours = ap_at_iou(&dets, &gts, thr).unwrap();
        let oracle = brute_ap(&dets, &gts, thr).unwrap();
        prop_assert!((ours - oracle).abs() < 1e-9, "{} vs {}", ours, oracle);
    }

    #[test]
    fn ap_non_increasing_in_threshold(
        dets in prop::collection::vec((arb_segment(20), 0u8..6), 0..=8),
        gts in prop::collection::vec(arb_segment(20), 1..=3),
        t1 in 0.05f64..0.95,
        t2 in 0.05f64..0.95,
    ) {
        let dets: Vec<Detection> = dets.iter().map(|&((s, e), q)| det(0, s, e, f64::from(q) / 5.0)).collect();
        let gts: Vec<GtInstance> = gts.iter().map(|&(s, e)| gt(0, s, e)).collect();
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        prop_assert!(ap_at_iou(&dets, &gts, hi).unwrap() <= ap_at_iou(&dets, &gts, lo).unwrap() + 1e-12);
    }

    #[test]
    fn confusion_matches_counting(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..50)) {
        let sel: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        let g: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let c = instance_confusion(&sel, &g).unwrap();
        prop_assert_eq!(c.tp, pairs.iter().filter(|p| p.0 && p.1).count());
        prop_assert_eq!(c.fp, pairs.iter().filter(|p| p.0 && !p.1).count());
        prop_assert_eq!(c.tp + c.fn_, g.iter().filter(|&&x| x).count());
        prop_assert_eq!(c.fp + c.tn, g.iter().filter(|&&x| !x).count());
    }

    #[test]
    fn recall_matches_sort_and_count(
        vals in prop::collection::vec((0u8..8, any::<bool>()), 1..40),
        n in 1usize..50,
    ) {
        let a: Vec<f64> = vals.iter().map(|v| f64::from(v.0)).collect();
        let g: Vec<bool> = vals.iter().map(|v| v.1).collect();
        let mut keyed: Vec<(std::cmp::Reverse<u8>, usize)> = vals.iter().enumerate().map(|(i, v)| (std::cmp::Reverse(v.0), i)).collect();
        keyed.sort();
        let used = n.min(a.len());
        let hits = keyed[..used].iter().filter(|(_, i)| g[*i]).count();
        let r = recall_at_n(&a, &g, n).unwrap();
        prop_assert_eq!(r.used, used);
        prop_assert_eq!(r.value, hits as f64 / used as f64);
    }

    #[test]
    fn evaluate_is_row_order_invariant(seed in 0u64..1000) {
        let ds = toy_dataset();
        let mut prng = crate::numerics::Prng::new(seed);
        let mut rows: Vec<ProposalRow> = (0..8)
            .map(|_| {
                let v = if prng.below(2) == 0 { "a" } else { "b" };
                let s = prng.below(35);
                let len = prng.below(10);
                row(v, prng.below(3), s, (s + len).min(39), prng.below(4) as f64 / 4.0)
            })
            .collect();
        let first = evaluate(&rows, &ds, &EvalConfig::thumos()).unwrap();
        prng.shuffle(&mut rows);
        prop_assert_eq!(first, evaluate(&rows, &ds, &EvalConfig::thumos()).unwrap());
    }
}
