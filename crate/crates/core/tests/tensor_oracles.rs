use crackscope_core::tensor::{ops, Matrix, Tensor};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rand_t(shape: [usize; 4], seed: u64) -> Tensor<f64> {
    Tensor::random_uniform(shape, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn naive_conv2d(x: &Tensor<f64>, k: &Tensor<f64>, bias: &[f64], pad: usize) -> Vec<f64> {
    let (xs, ks) = (x.shape(), k.shape());
    let (ho, wo) = (xs.h + 2 * pad + 1 - ks.h, xs.w + 2 * pad + 1 - ks.w);
    let mut out = Vec::new();
    for n in 0..xs.n {
        for o in 0..ks.n {
            for i in 0..ho {
                for j in 0..wo {
                    let mut acc = bias[o];
                    for c in 0..xs.c {
                        for a in 0..ks.h {
                            for b in 0..ks.w {
                                let (r, col) = (i as i64 + a as i64 - pad as i64, j as i64 + b as i64 - pad as i64);
                                if r >= 0 && col >= 0 && (r as usize) < xs.h && (col as usize) < xs.w {
                                    acc += x.at(n, c, r as usize, col as usize) * k.at(o, c, a, b);
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

fn naive_maxpool(x: &Tensor<f64>, k: usize, stride: usize, pad: usize) -> Vec<f64> {
    let s = x.shape();
    let ho = (s.h + 2 * pad - k) / stride + 1;
    let wo = (s.w + 2 * pad - k) / stride + 1;
    let mut out = Vec::new();
    for n in 0..s.n {
        for c in 0..s.c {
            for i in 0..ho {
                for j in 0..wo {
                    let mut m = f64::NEG_INFINITY;
                    for a in 0..k {
                        for b in 0..k {
                            let (r, col) = ((i * stride + a) as i64 - pad as i64, (j * stride + b) as i64 - pad as i64);
                            if r >= 0 && col >= 0 && (r as usize) < s.h && (col as usize) < s.w {
                                m = m.max(x.at(n, c, r as usize, col as usize));
                            }
                        }
                    }
                    out.push(m);
                }
            }
        }
    }
    out
}

#[test]
fn conv2d_matches_naive_loops() {
    for seed in 0..20 {
        let pad = (seed % 3) as usize;
        let x = rand_t([2, 3, 5, 6], seed);
        let k = rand_t([4, 3, 3, 2], seed + 100);
        let bias: Vec<f64> = rand_t([1, 1, 1, 4], seed + 200).into_data();
        let got = ops::conv2d(&x, &k, &bias, pad).unwrap();
        let want = naive_conv2d(&x, &k, &bias, pad);
        for (a, b) in got.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn maxpool_matches_naive_loops() {
    for (seed, (k, stride, pad)) in [(1, 1, 0), (2, 2, 0), (3, 1, 1), (3, 2, 1), (5, 1, 2), (5, 3, 2)].into_iter().enumerate() {
        let x = rand_t([1, 2, 7, 8], seed as u64);
        assert_eq!(ops::maxpool2d(&x, k, stride, pad).unwrap().data(), &naive_maxpool(&x, k, stride, pad)[..]);
    }
}

#[test]
fn dense_matches_naive_matvec() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let w = Matrix::<f64>::random_uniform(3, 4, -1.0, 1.0, &mut rng);
    let x = [0.5, -1.0, 2.0, 0.25];
    let b = [0.1, 0.2, 0.3];
    let y = ops::dense(&x, &w, &b).unwrap();
    for r in 0..3 {
        let want: f64 = b[r] + (0..4).map(|c| w.at(r, c) * x[c]).sum::<f64>();
        assert!((y[r] - want).abs() < 1e-14);
    }
}

#[test]
fn channel_stats_match_per_pixel_loop() {
    let x = rand_t([2, 5, 3, 4], 9);
    let (mx, mean) = ops::channel_stats(&x).unwrap();
    for n in 0..2 {
        for h in 0..3 {
            for w in 0..4 {
                let vals: Vec<f64> = (0..5).map(|c| x.at(n, c, h, w)).collect();
                assert_eq!(mx.at(n, 0, h, w), vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
                assert!((mean.at(n, 0, h, w) - vals.iter().sum::<f64>() / 5.0).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn unit_kernels_are_identity() {
    let x = rand_t([1, 3, 4, 4], 2);
    let mut k = Tensor::zeros([3, 3, 1, 1]);
    for c in 0..3 {
        k[[c, c, 0, 0]] = 1.0;
    }
    assert_eq!(ops::conv2d(&x, &k, &[0.0; 3], 0).unwrap(), x);
    let w = rand_t([2, 6, 1, 1], 3);
    assert_eq!(ops::conv1d_channels(&w, &[0.0, 1.0, 0.0]).unwrap(), w);
}

#[test]
fn conv2d_is_linear() {
    let k = rand_t([2, 2, 3, 3], 1);
    let (x, y) = (rand_t([1, 2, 5, 5], 2), rand_t([1, 2, 5, 5], 3));
    let (a, b) = (0.7, -1.3);
    let lhs = ops::conv2d(&x.scale(a).add(&y.scale(b)).unwrap(), &k, &[0.0; 2], 1).unwrap();
    let rhs = ops::conv2d(&x, &k, &[0.0; 2], 1).unwrap().scale(a).add(&ops::conv2d(&y, &k, &[0.0; 2], 1).unwrap().scale(b)).unwrap();
    assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12);
}

#[test]
fn fixture_round_trip() {
    let x = rand_t([1, 2, 2, 3], 4);
    assert_eq!(Tensor::<f64>::from_fixture(&x.to_fixture()).unwrap(), x);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shape_contracts(n in 1usize..3, c in 1usize..4, h in 1usize..7, w in 1usize..7, seed in any::<u64>()) {
        let x = rand_t([n, c, h, w], seed);
        let avg = ops::global_avg_pool(&x).unwrap();
        prop_assert_eq!(avg.shape().dims(), [n, c, 1, 1]);
        prop_assert!(ops::global_max_pool(&x).unwrap().is_finite());
        let (mx, mean) = ops::channel_stats(&x).unwrap();
        prop_assert_eq!(mx.shape().dims(), [n, 1, h, w]);
        prop_assert_eq!(mean.shape().dims(), [n, 1, h, w]);
        let pooled = ops::maxpool2d(&x, 1, 1, 0).unwrap();
        prop_assert_eq!(&pooled, &x);
        let k = rand_t([2, c, 1, 1], seed ^ 1);
        let y = ops::conv2d(&x, &k, &[0.0, 0.0], 0).unwrap();
        prop_assert_eq!(y.shape().dims(), [n, 2, h, w]);
        prop_assert!(ops::sigmoid(&x).data().iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!(ops::relu(&x).data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn global_pools_ignore_spatial_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let x = rand_t([1, 3, 4, 4], seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let mut perm: Vec<usize> = (0..16).collect();
        perm.shuffle(&mut rng);
        let y = Tensor::from_fn([1, 3, 4, 4], |_, c, h, w| {
            let p = perm[h * 4 + w];
            x.at(0, c, p / 4, p % 4)
        });
        prop_assert_eq!(ops::global_max_pool(&x).unwrap(), ops::global_max_pool(&y).unwrap());
        let d = ops::global_avg_pool(&x).unwrap().max_abs_diff(&ops::global_avg_pool(&y).unwrap()).unwrap();
        prop_assert!(d <= 1e-15);
    }
}
