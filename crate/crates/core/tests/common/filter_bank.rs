//! Direct convolution and downsampling filter bank built from the published
//! 9/7 analysis taps, used as an oracle for the lifting implementation.

use std::f64::consts::SQRT_2;

// Analysis low-pass taps h[0..=4] (symmetric) and high-pass taps g[0..=3]
// (symmetric, centred on odd samples), normalised to DC gain 1 and Nyquist
// gain 2 respectively.
const H: [f64; 5] = [
    0.602_949_018_236_357_9,
    0.266_864_118_442_872_3,
    -0.078_223_266_528_987_85,
    -0.016_864_118_442_874_95,
    0.026_748_757_410_809_76,
];
const G: [f64; 4] = [
    1.115_087_052_456_994,
    -0.591_271_763_114_247,
    -0.057_543_526_228_499_57,
    0.091_271_763_114_249_48,
];

fn ext(x: &[f64], i: isize) -> f64 {
    let n = x.len() as isize;
    let mut i = i;
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    x[i as usize]
}

pub fn naive_level(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let low = (0..n.div_ceil(2))
        .map(|k| {
            let c = 2 * k as isize;
            let mut s = H[0] * ext(x, c);
            for t in 1..5 {
                s += H[t] * (ext(x, c - t as isize) + ext(x, c + t as isize));
            }
            s * SQRT_2
        })
        .collect();
    let high = (0..n / 2)
        .map(|k| {
            let c = 2 * k as isize + 1;
            let mut s = G[0] * ext(x, c);
            for t in 1..4 {
                s += G[t] * (ext(x, c - t as isize) + ext(x, c + t as isize));
            }
            s / SQRT_2
        })
        .collect();
    (low, high)
}

pub fn naive_dwt(x: &[f64], levels: usize) -> Vec<f64> {
    let mut approx = x.to_vec();
    let mut details = Vec::new();
    for _ in 0..levels {
        let (l, h) = naive_level(&approx);
        details.push(h);
        approx = l;
    }
    details.reverse();
    let mut flat = approx;
    for d in details {
        flat.extend(d);
    }
    flat
}
