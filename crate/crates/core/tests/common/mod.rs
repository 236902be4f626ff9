#![allow(dead_code)]

use erbp_core::{Dataset, Mnist, Split};

/// Ten easily separable classes: class `k` lights up a cross made of rows
/// and columns `2k + 4..2k + 6`, with a seeded speckle.
pub fn bars(split: Split, n: usize, seed: u64) -> Dataset {
    let mut images = Vec::with_capacity(n * 784);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = (i * 7 + seed as usize) % 10;
        for p in 0..784 {
            let band = |v: usize| v >= 2 * k + 4 && v < 2 * k + 6;
            let h = erbp_core::rng::mix64(seed ^ ((i as u64) << 20) ^ p as u64);
            let on = (band(p / 28) || band(p % 28)) && !h.is_multiple_of(8);
            images.push(if on { 255 } else { (h % 16) as u8 });
        }
        labels.push(k as u8);
    }
    Dataset::new(split, images, labels).unwrap()
}

pub fn bars_mnist(n_train: usize, n_test: usize) -> Mnist {
    Mnist {
        train: bars(Split::Train, n_train, 1),
        valid: bars(Split::Valid, 10, 2),
        test: bars(Split::Test, n_test, 3),
    }
}
