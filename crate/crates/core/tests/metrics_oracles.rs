use crackscope_core::geometry::BBox;
use crackscope_core::metrics::*;
use crackscope_core::{mask::BinaryMask, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive search over every partial one-to-one assignment that respects
/// the threshold, keeping the one whose per-prediction (IoU, -gt index)
/// sequence, taken in descending score order, is lexicographically largest.
/// That lexicographic optimum is what greedy matching is defined to produce.
fn exhaustive_greedy(scores: &[f64], preds: &[BBox<f64>], gts: &[BBox<f64>], thresh: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let key = |assign: &[Option<usize>]| -> Vec<(f64, i64)> {
        order
            .iter()
            .map(|&i| match assign[i] {
                Some(j) => (crackscope_core::geometry::iou(&preds[i], &gts[j]), -(j as i64)),
                None => (-1.0, 0),
            })
            .collect()
    };
    let mut best: Option<(Vec<(f64, i64)>, Vec<Option<usize>>)> = None;
    let mut assign = vec![None; preds.len()];
    fn rec(
        i: usize,
        assign: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        ok: &dyn Fn(usize, usize) -> bool,
        visit: &mut dyn FnMut(&[Option<usize>]),
    ) {
        if i == assign.len() {
            visit(assign);
            return;
        }
        assign[i] = None;
        rec(i + 1, assign, used, ok, visit);
        for j in 0..used.len() {
            if !used[j] && ok(i, j) {
                used[j] = true;
                assign[i] = Some(j);
                rec(i + 1, assign, used, ok, visit);
                used[j] = false;
                assign[i] = None;
            }
        }
    }
    let ok = |i: usize, j: usize| crackscope_core::geometry::iou(&preds[i], &gts[j]) >= thresh;
    let mut used = vec![false; gts.len()];
    rec(0, &mut assign, &mut used, &ok, &mut |a| {
        let k = key(a);
        if best.as_ref().is_none_or(|(bk, _)| k.partial_cmp(bk) == Some(std::cmp::Ordering::Greater)) {
            best = Some((k, a.to_vec()));
        }
    });
    best.unwrap().1
}

/// AP straight from the definition: precision and recall at every distinct
/// score threshold by direct counting, then the envelope over recall levels.
fn brute_ap(flags: &[ScoredFlag], total_gt: usize) -> f64 {
    let mut thresholds: Vec<f64> = flags.iter().map(|f| f.score).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let kept: Vec<&ScoredFlag> = flags.iter().filter(|f| f.score >= t).collect();
            let tp = kept.iter().filter(|f| f.tp).count() as f64;
            (tp / total_gt as f64, tp / kept.len() as f64)
        })
        .collect();
    let mut recalls: Vec<f64> = points.iter().map(|p| p.0).collect();
    recalls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    recalls.dedup();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for r in recalls {
        let env = points.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
        ap += (r - prev) * env;
        prev = r;
    }
    ap
}

fn random_scene(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<BBox<f64>>, Vec<BBox<f64>>) {
    let bx = |rng: &mut ChaCha8Rng| {
        BBox::new(rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0), rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0)).unwrap()
    };
    let np = rng.gen_range(0..=5);
    let ng = rng.gen_range(0..=4);
    // a coarse score grid makes ties common
    let scores = (0..np).map(|_| f64::from(rng.gen_range(1..=4u8)) / 4.0).collect();
    let preds = (0..np).map(|_| bx(rng)).collect();
    let gts = (0..ng).map(|_| bx(rng)).collect();
    (scores, preds, gts)
}

#[test]
fn greedy_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..400 {
        let (scores, preds, gts) = random_scene(&mut rng);
        let thresh = [0.1, 0.3, 0.5][rng.gen_range(0..3)];
        let r = match_instances(&scores, &preds, &gts, thresh).unwrap();
        assert_eq!(r.matched_gt, exhaustive_greedy(&scores, &preds, &gts, thresh));
        let c = r.counts();
        assert_eq!((c.tp + c.fp) as usize, preds.len());
        assert_eq!(c.tp as usize + r.fn_count, gts.len());
    }
}

#[test]
fn ap_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let n = rng.gen_range(1..10);
        let flags: Vec<ScoredFlag> =
            (0..n).map(|_| ScoredFlag { score: f64::from(rng.gen_range(0..6u8)) / 5.0, tp: rng.gen_bool(0.5) }).collect();
        let total = flags.iter().filter(|f| f.tp).count() + rng.gen_range(0..3);
        if total == 0 {
            continue;
        }
        let ap = average_precision(&pr_curve(&flags, total).unwrap()).unwrap();
        assert!((ap - brute_ap(&flags, total)).abs() <= 1e-9);
    }
}

#[test]
fn pipeline_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (scores, preds, gts) = random_scene(&mut rng);
        if preds.is_empty() || gts.is_empty() {
            continue;
        }
        let r = match_instances(&scores, &preds, &gts, 0.3).unwrap();
        let c = r.counts();
        let last = *pr_curve(&r.scored_flags(&scores), gts.len()).unwrap().points.last().unwrap();
        assert!((last.recall - recall(&c).unwrap()).abs() < 1e-15);
        assert!((last.precision - precision(&c).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn mask_geometry_matching() {
    let a = BinaryMask::from_ascii(&["##..", "##..", "....", "...."]).unwrap();
    let b = BinaryMask::from_ascii(&["....", "....", "..##", "..##"]).unwrap();
    let r = match_instances(&[0.9, 0.8], &[b.clone(), a.clone()], &[a, b], 0.5).unwrap();
    assert_eq!(r.matched_gt, vec![Some(1), Some(0)]);
}

#[test]
fn pixel_confusion_matches_naive_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let p = BinaryMask::from_fn(9, 11, |_, _| rng.gen_bool(0.4));
        let g = BinaryMask::from_fn(9, 11, |_, _| rng.gen_bool(0.4));
        let c = pixel_confusion(&p, &g).unwrap();
        let mut want = [0u64; 4];
        for r in 0..9 {
            for col in 0..11 {
                want[usize::from(p.get(r, col)) * 2 + usize::from(g.get(r, col))] += 1;
            }
        }
        assert_eq!([c.tn, c.fn_, c.fp, c.tp], want);
    }
}

proptest! {
    #[test]
    fn ratios_follow_definitions(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000, tn in 0u64..1000) {
        let c = ConfusionCounts::new(tp, fp, fn_, tn);
        match recall(&c) {
            Ok(v) => prop_assert_eq!(v, tp as f64 / (tp + fn_) as f64),
            Err(e) => prop_assert!(matches!(e, Error::UndefinedMetric(_)) && tp + fn_ == 0),
        }
        match precision(&c) {
            Ok(v) => prop_assert_eq!(v, tp as f64 / (tp + fp) as f64),
            Err(_) => prop_assert_eq!(tp + fp, 0),
        }
        if let Ok(a) = accuracy(&c) {
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(a == 1.0, fp == 0 && fn_ == 0);
        }
    }

    #[test]
    fn ap_ignores_monotone_score_rescaling(raw in prop::collection::vec((0.0..1.0f64, any::<bool>()), 1..20)) {
        let flags: Vec<ScoredFlag> = raw.iter().map(|&(score, tp)| ScoredFlag { score, tp }).collect();
        let squashed: Vec<ScoredFlag> = flags.iter().map(|f| ScoredFlag { score: f.score.powi(3) * 0.5, tp: f.tp }).collect();
        let total = flags.iter().filter(|f| f.tp).count() + 1;
        let a = average_precision(&pr_curve(&flags, total).unwrap()).unwrap();
        let b = average_precision(&pr_curve(&squashed, total).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        let curve = pr_curve(&flags, total).unwrap();
        prop_assert!(curve.points.windows(2).all(|w| w[0].threshold > w[1].threshold && w[0].recall <= w[1].recall));
    }
}
