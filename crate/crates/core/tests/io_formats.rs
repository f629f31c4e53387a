use crackscope_core::io::*;
use crackscope_core::mask::GrayImage;
use crackscope_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inside test for a convex polygon: the point is on the same side of every
/// edge.
fn inside_convex(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = poly.len();
    let sides: Vec<f64> = (0..n)
        .map(|i| {
            let [x0, y0] = poly[i];
            let [x1, y1] = poly[(i + 1) % n];
            (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
        })
        .collect();
    sides.iter().all(|&s| s > 0.0) || sides.iter().all(|&s| s < 0.0)
}

fn random_convex(rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let (cx, cy, r) = (rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), rng.gen_range(0.05..0.3));
    let mut angles: Vec<f64> = (0..rng.gen_range(3..9)).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.iter().map(|a| [cx + r * a.cos(), cy + r * a.sin()]).collect()
}

#[test]
fn rasterisation_matches_pixel_centre_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let poly = random_convex(&mut rng);
        let (w, h) = (rng.gen_range(8..48), rng.gen_range(8..48));
        let r = polygon_to_mask(&poly, w, h).unwrap();
        let scaled: Vec<[f64; 2]> = poly.iter().map(|&[x, y]| [x * w as f64, y * h as f64]).collect();
        for row in 0..h {
            for col in 0..w {
                let want = inside_convex(&scaled, col as f64 + 0.5, row as f64 + 0.5);
                assert_eq!(r.mask.get(row, col), want, "pixel ({row}, {col})");
                assert_eq!(point_in_polygon(&scaled, col as f64 + 0.5, row as f64 + 0.5), want);
            }
        }
    }
}

#[test]
fn split_sizes_4029() {
    let items: Vec<String> = (0..4029).map(|i| format!("img_{i:04}.jpg")).collect();
    let spec = SplitSpec { train: 3717, val: 200, test: 112, seed: 2024 };
    let s = split_dataset(&items, spec).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (3717, 200, 112));
    let mut all: Vec<&String> = s.train.iter().chain(&s.val).chain(&s.test).collect();
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 4029);
}

#[test]
fn pinned_shuffle_of_ten() {
    // SplitMix64 seed 7, Fisher-Yates with (x * (i + 1)) >> 64, computed by an
    // independent script
    let s = split_dataset(&(0..10).collect::<Vec<u32>>(), SplitSpec { train: 4, val: 3, test: 3, seed: 7 }).unwrap();
    let got: Vec<u32> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
    assert_eq!(got, PINNED_SEED7);
}

const PINNED_SEED7: [u32; 10] = include!("data/shuffle_seed7.txt");

#[test]
fn dataset_index_scans_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.txt"), "0 0.1 0.1 0.9 0.1 0.5 0.9\n").unwrap();
    std::fs::write(dir.path().join("a.txt"), "").unwrap();
    std::fs::write(dir.path().join("a.pgm"), write_pgm(&GrayImage::new(3, 2, vec![0; 6]).unwrap())).unwrap();
    std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
    let idx = DatasetIndex::scan(dir.path(), (64, 48)).unwrap();
    assert_eq!(idx.entries.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    assert_eq!((idx.get("a").unwrap().width, idx.get("a").unwrap().height), (3, 2));
    assert_eq!((idx.get("b").unwrap().width, idx.get("b").unwrap().height), (64, 48));
    assert_eq!(idx.total_instances(), 1);
    std::fs::write(dir.path().join("c.txt"), "0 0.1").unwrap();
    assert!(DatasetIndex::scan(dir.path(), (64, 48)).is_err());
}

fn arb_polygon() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(0.0..=1.0f64), 3..8)
}

proptest! {
    #[test]
    fn label_files_round_trip(recs in prop::collection::vec((0u32..5, arb_polygon()), 0..6)) {
        let records: Vec<LabelRecord> = recs.into_iter().map(|(class_id, polygon)| LabelRecord { class_id, polygon }).collect();
        let text = format_label_file(&records);
        let back = parse_label_file(&text).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(format_label_file(&back), text);
    }

    #[test]
    fn prediction_files_round_trip(recs in prop::collection::vec((0u32..3, 0.0..=1.0f64, arb_polygon()), 0..6)) {
        let records: Vec<DetectionRecord> = recs
            .into_iter()
            .enumerate()
            .map(|(i, (class_id, score, polygon))| DetectionRecord { image: format!("im{i}"), class_id, score, polygon: Some(polygon), bbox: None })
            .collect();
        let text = format_predictions(&records);
        prop_assert_eq!(read_predictions(&text).unwrap(), records);
    }

    #[test]
    fn split_partitions(n in 0usize..200, a in 0usize..80, b in 0usize..80, c in 0usize..80, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let spec = SplitSpec { train: a, val: b, test: c, seed };
        match split_dataset(&items, spec) {
            Ok(s) => {
                prop_assert!(a + b + c <= n);
                prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), (a, b, c));
                let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
                all.sort();
                all.dedup();
                prop_assert_eq!(all.len(), a + b + c);
                prop_assert_eq!(split_dataset(&items, spec).unwrap(), s);
            }
            Err(e) => prop_assert!(matches!(e, Error::InvalidSplit(_)) && a + b + c > n),
        }
    }

    #[test]
    fn pgm_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage::from_fn(w, h, |_, _| rng.gen());
        let bytes = write_pgm(&img);
        prop_assert_eq!(&read_pgm(&bytes).unwrap(), &img);
        prop_assert_eq!(write_pgm(&read_pgm(&bytes).unwrap()), bytes);
    }
}
