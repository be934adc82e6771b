mod common;

use common::{int_mse as mse, pyramid_like};
use eegcodec::spiht::{decode, dequantize, encode, quantize, SpihtShape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn lossless_round_trip_16x16() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shape = SpihtShape::TwoD { rows: 16, cols: 16, levels: 3 };
    for _ in 0..50 {
        let v: Vec<i32> = (0..256).map(|_| rng.gen_range(-5000..5000)).collect();
        let s = encode(&v, shape, usize::MAX).unwrap();
        assert_eq!(decode(&s, shape).unwrap(), v);
    }
}

#[test]
fn lossless_round_trip_odd_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for shape in [
        SpihtShape::TwoD { rows: 23, cols: 70, levels: 4 },
        SpihtShape::TwoD { rows: 9, cols: 33, levels: 2 },
        SpihtShape::OneD { len: 1000, levels: 5, count: 1 },
        SpihtShape::OneD { len: 77, levels: 3, count: 4 },
    ] {
        let v = pyramid_like(&mut rng, shape);
        let s = encode(&v, shape, usize::MAX).unwrap();
        assert_eq!(decode(&s, shape).unwrap(), v, "{shape:?}");
    }
}

#[test]
fn prefix_distortion_is_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shape = SpihtShape::TwoD { rows: 32, cols: 64, levels: 3 };
    for _ in 0..20 {
        let v = pyramid_like(&mut rng, shape);
        let s = encode(&v, shape, usize::MAX).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let prefix = s.prefix(s.len_bits() * k / 10);
            let e = mse(&v, &decode(&prefix, shape).unwrap());
            assert!(e <= last, "prefix {k}/10: {e} > {last}");
            last = e;
        }
        assert_eq!(last, 0.0);
    }
}

#[test]
fn reencoding_a_decoded_prefix_reproduces_its_complete_passes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shape = SpihtShape::OneD { len: 512, levels: 5, count: 2 };
    let v = pyramid_like(&mut rng, shape);
    let budget = 3000;
    let s = encode(&v, shape, budget).unwrap();
    let decoded = decode(&s, shape).unwrap();
    let again = encode(&decoded, shape, budget).unwrap();
    // The streams agree up to the last fully received bit plane; find where
    // they diverge and check that point is deep into the stream.
    let common = (0..s.len_bits().min(again.len_bits()))
        .take_while(|&i| s.bit(i) == again.bit(i))
        .count();
    assert!(common > budget / 2, "diverged at bit {common}");
}

#[test]
fn dequantize_error_is_within_half_a_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let c: Vec<f64> = (0..300).map(|_| rng.gen_range(-500.0..500.0)).collect();
        let q = quantize(&c, 12).unwrap();
        let back = dequantize(&q.values, q.scale);
        for (a, b) in c.iter().zip(&back) {
            assert!((a - b).abs() <= q.scale / 2.0 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stream_never_exceeds_budget(
        seed in any::<u64>(),
        budget in 16usize..4000,
        rows in 4usize..24,
        cols in 4usize..40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = SpihtShape::TwoD { rows, cols, levels: 2 };
        let v = pyramid_like(&mut rng, shape);
        let s = encode(&v, shape, budget).unwrap();
        prop_assert!(s.len_bits() <= budget);
        let full = encode(&v, shape, usize::MAX).unwrap();
        if full.len_bits() > budget {
            prop_assert!(s.len_bits() >= budget - 8);
            // Budget-limited stream is a prefix of the unconstrained one.
            prop_assert_eq!(s, full.prefix(budget));
        }
    }
}
