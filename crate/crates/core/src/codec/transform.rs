//! 4×4 Hadamard transform with uniform quantization. The matrix is
//! symmetric and orthogonal up to a factor of 4, so the same sandwich
//! product runs both directions; dividing by 16 after the inverse restores
//! the original scale exactly (every intermediate is a dyadic rational).

pub const BLOCK: usize = 4;
pub const BLOCK_PIXELS: usize = BLOCK * BLOCK;

const H: [[i32; BLOCK]; BLOCK] = [
    [1, 1, 1, 1],
    [1, 1, -1, -1],
    [1, -1, -1, 1],
    [1, -1, 1, -1],
];

/// Coefficient order from low to high frequency.
pub const ZIGZAG: [usize; BLOCK_PIXELS] = [0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15];

pub fn forward(x: &[i32; BLOCK_PIXELS]) -> [i32; BLOCK_PIXELS] {
    let mut t = [0i32; BLOCK_PIXELS];
    for u in 0..BLOCK {
        for j in 0..BLOCK {
            let mut acc = 0;
            for i in 0..BLOCK {
                acc += H[u][i] * x[i * BLOCK + j];
            }
            t[u * BLOCK + j] = acc;
        }
    }
    let mut y = [0i32; BLOCK_PIXELS];
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            let mut acc = 0;
            for j in 0..BLOCK {
                acc += t[u * BLOCK + j] * H[v][j];
            }
            y[u * BLOCK + v] = acc;
        }
    }
    y
}

pub fn inverse(y: &[f64; BLOCK_PIXELS]) -> [f64; BLOCK_PIXELS] {
    let mut t = [0f64; BLOCK_PIXELS];
    for u in 0..BLOCK {
        for j in 0..BLOCK {
            let mut acc = 0.0;
            for i in 0..BLOCK {
                acc += H[u][i] as f64 * y[i * BLOCK + j];
            }
            t[u * BLOCK + j] = acc;
        }
    }
    let mut x = [0f64; BLOCK_PIXELS];
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            let mut acc = 0.0;
            for j in 0..BLOCK {
                acc += t[u * BLOCK + j] * H[v][j] as f64;
            }
            x[u * BLOCK + v] = acc / 16.0;
        }
    }
    x
}

/// Nearest-integer levels at the given step (half away from zero).
pub fn quantize(coeffs: &[i32; BLOCK_PIXELS], step: f64) -> [i32; BLOCK_PIXELS] {
    let mut out = [0i32; BLOCK_PIXELS];
    for (o, &c) in out.iter_mut().zip(coeffs) {
        *o = (c as f64 / step).round() as i32;
    }
    out
}

pub fn dequantize(levels: &[i32; BLOCK_PIXELS], step: f64) -> [f64; BLOCK_PIXELS] {
    let mut out = [0f64; BLOCK_PIXELS];
    for (o, &l) in out.iter_mut().zip(levels) {
        *o = l as f64 * step;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mill(state: &mut u64) -> u64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        *state
    }

    #[test]
    fn transform_round_trips_exactly_without_quantization() {
        let mut state = 7u64;
        for _ in 0..200 {
            let mut x = [0i32; BLOCK_PIXELS];
            for v in &mut x {
                *v = (mill(&mut state) % 511) as i32 - 255;
            }
            let y = forward(&x);
            let yf: [f64; BLOCK_PIXELS] = std::array::from_fn(|i| y[i] as f64);
            let back = inverse(&yf);
            for i in 0..BLOCK_PIXELS {
                assert_eq!(back[i], x[i] as f64, "sample {i} must survive the round trip");
            }
        }
    }

    #[test]
    fn constant_block_concentrates_in_the_dc_coefficient() {
        let x = [9i32; BLOCK_PIXELS];
        let y = forward(&x);
        assert_eq!(y[0], 9 * 16);
        assert!(y[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn zigzag_is_a_permutation_starting_at_dc() {
        let mut seen = [false; BLOCK_PIXELS];
        for &i in &ZIGZAG {
            assert!(!seen[i]);
            seen[i] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(ZIGZAG[0], 0);
        assert_eq!(ZIGZAG[BLOCK_PIXELS - 1], BLOCK_PIXELS - 1);
    }

    #[test]
    fn quantization_error_is_bounded_by_half_a_step() {
        let step = 4.0 * 2.5;
        let coeffs = forward(&[3, -7, 12, 0, 5, 9, -2, 1, 0, 4, -11, 6, 2, -3, 8, -1]);
        let levels = quantize(&coeffs, step);
        let deq = dequantize(&levels, step);
        for i in 0..BLOCK_PIXELS {
            assert!((deq[i] - coeffs[i] as f64).abs() <= step / 2.0 + 1e-9);
        }
    }

    #[test]
    fn reconstruction_error_stays_within_half_a_step_per_sample() {
        // Each output sample mixes 16 coefficient errors of at most step/2
        // through the orthogonal basis, then divides by 16.
        let step = 4.0 * 0.6875;
        let mut state = 11u64;
        for _ in 0..100 {
            let mut x = [0i32; BLOCK_PIXELS];
            for v in &mut x {
                *v = (mill(&mut state) % 61) as i32 - 30;
            }
            let levels = quantize(&forward(&x), step);
            let rec = inverse(&dequantize(&levels, step));
            for i in 0..BLOCK_PIXELS {
                assert!(
                    (rec[i] - x[i] as f64).abs() <= step / 2.0 + 1e-9,
                    "sample {i}: {} vs {}",
                    rec[i],
                    x[i]
                );
            }
        }
    }
}
