use crackscope_core::geometry::*;
use proptest::prelude::*;

fn b(cx: f64, cy: f64, w: f64, h: f64) -> BBox<f64> {
    BBox::new(cx, cy, w, h).unwrap()
}

fn arb_box() -> impl Strategy<Value = BBox<f64>> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.1..30.0f64, 0.1..30.0f64).prop_map(|(cx, cy, w, h)| b(cx, cy, w, h))
}

#[test]
fn hand_cases() {
    assert_eq!(ciou_loss(&b(1.0, 2.0, 3.0, 4.0), &b(1.0, 2.0, 3.0, 4.0)).unwrap(), 0.0);
    assert!((ciou_loss(&b(0.0, 0.0, 2.0, 2.0), &b(2.0, 0.0, 2.0, 2.0)).unwrap() - 1.2).abs() <= 1e-9);
    // IoU 1/2, no centre offset, v = 4/pi^2 (atan(1/2) - atan(1))^2, loss = 1/2 + alpha v
    // evaluated independently in a script: 0.503248129298557
    assert!((ciou_loss(&b(0.0, 0.0, 2.0, 2.0), &b(0.0, 0.0, 2.0, 4.0)).unwrap() - 0.503248129298557).abs() <= 1e-12);
    assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
}

#[test]
fn gradient_vanishes_for_centres_at_the_minimum() {
    let g = ciou_grad(&b(3.0, -1.0, 2.0, 5.0), &b(3.0, -1.0, 2.0, 5.0)).unwrap();
    assert!(g.grad[0].abs() < 1e-12 && g.grad[1].abs() < 1e-12);
    assert!(g.at_kink);
}

#[test]
fn decode_examples() {
    let cell = |gx, gy, stride, raw| GridCellPred { gx, gy, stride, raw };
    assert_eq!(decode_anchor_free(&cell(0, 0, 8.0, [0.0; 4])).unwrap().to_array(), [4.0, 4.0, 8.0, 8.0]);
    let wide = decode_anchor_free(&cell(0, 0, 8.0, [0.0, 0.0, 2f64.ln(), 0.0])).unwrap();
    assert!((wide.w() - 16.0).abs() < 1e-12);
    assert_eq!(decode_anchor_free(&cell(3, 2, 16.0, [0.0; 4])).unwrap().to_array(), [56.0, 40.0, 16.0, 16.0]);
    assert!(decode_anchor_free(&cell(0, 0, 8.0, [f64::NAN, 0.0, 0.0, 0.0])).is_err());
    assert!(decode_anchor_free(&cell(0, 0, 0.0, [0.0; 4])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn iou_bounds_and_symmetry(a in arb_box(), c in arb_box()) {
        let v = iou(&a, &c);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&c, &a));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ciou_invariances(a in arb_box(), c in arb_box(), dx in -100.0..100.0f64, dy in -100.0..100.0f64, s in 0.05..20.0f64) {
        let l = ciou_loss(&a, &c).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert!((l - ciou_loss(&c, &a).unwrap()).abs() <= 1e-9);
        let moved = ciou_loss(&a.translated(dx, dy).unwrap(), &c.translated(dx, dy).unwrap()).unwrap();
        prop_assert!((l - moved).abs() <= 1e-9);
        let scaled = ciou_loss(&a.scaled(s).unwrap(), &c.scaled(s).unwrap()).unwrap();
        prop_assert!((l - scaled).abs() <= 1e-9);
    }

    #[test]
    fn decoded_centre_stays_in_cell(gx in 0usize..40, gy in 0usize..40, raw in prop::array::uniform4(-8.0..8.0f64)) {
        let bx = decode_anchor_free(&GridCellPred { gx, gy, stride: 8.0, raw }).unwrap();
        prop_assert!(bx.w() > 0.0 && bx.h() > 0.0);
        prop_assert!(bx.cx() >= gx as f64 * 8.0 && bx.cx() <= (gx + 1) as f64 * 8.0);
        prop_assert!(bx.cy() >= gy as f64 * 8.0 && bx.cy() <= (gy + 1) as f64 * 8.0);
    }
}
