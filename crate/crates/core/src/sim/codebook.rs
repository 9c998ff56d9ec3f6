//! Seeded Gaussian codebooks, the relay mapper and the scalar quantizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use libm::{erf, erfc};

const CODEWORD_STREAM: u64 = 0x636f_6465;
const TRIAL_STREAM: u64 = 0x7472_6961;

fn stream(seed: u64, a: u64, b: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, a, b, tag]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Random stream for one trial; independent of every codebook stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    stream(seed, trial, 0, TRIAL_STREAM)
}

/// Codeword `index` of `node`'s codebook: i.i.d. Gaussian, rescaled to
/// empirical power exactly 1.
pub fn codeword(seed: u64, node: usize, index: u64, len: usize) -> Vec<f64> {
    let mut rng = stream(seed, node as u64, index, CODEWORD_STREAM);
    let mut x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let power = x.iter().map(|v| v * v).sum::<f64>() / len as f64;
    if power > 0.0 {
        let s = power.sqrt().recip();
        x.iter_mut().for_each(|v| *v *= s);
    }
    x
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random binning map from a quantized sequence to a codeword index.
pub fn map_index(seed: u64, node: usize, cells: &[u32]) -> u64 {
    let mut h = splitmix(seed ^ splitmix(node as u64 + 1));
    for &c in cells {
        h = splitmix(h ^ u64::from(c));
    }
    h
}

/// Uniform scalar quantizer with `levels` cells of width `step` centred on
/// zero. The two outermost cells extend to infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarQuantizer {
    pub step: f64,
    pub levels: u32,
}

impl ScalarQuantizer {
    pub fn index(&self, y: f64) -> u32 {
        let k = (y / self.step).floor() + f64::from(self.levels / 2);
        k.clamp(0.0, f64::from(self.levels - 1)) as u32
    }

    pub fn bounds(&self, k: u32) -> (f64, f64) {
        let offset = f64::from(k) - f64::from(self.levels / 2);
        let lo = if k == 0 { f64::NEG_INFINITY } else { offset * self.step };
        let hi = if k + 1 == self.levels { f64::INFINITY } else { (offset + 1.0) * self.step };
        (lo, hi)
    }

    /// Cells hit with probability at least `floor` when the input is
    /// `N(mean, sigma²)`, most likely first.
    pub fn cell_probabilities(&self, mean: f64, sigma: f64, floor: f64) -> Vec<(u32, f64)> {
        let first = self.index(mean - 8.0 * sigma);
        let last = self.index(mean + 8.0 * sigma);
        let mut out: Vec<(u32, f64)> = (first..=last)
            .map(|k| {
                let (lo, hi) = self.bounds(k);
                (k, gaussian_interval((lo - mean) / sigma, (hi - mean) / sigma))
            })
            .filter(|&(_, p)| p >= floor)
            .collect();
        if out.is_empty() {
            out.push((self.index(mean), 1.0));
        }
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }
}

/// P(lo < Z < hi) for a standard normal, accurate in both tails.
pub fn gaussian_interval(lo: f64, hi: f64) -> f64 {
    let q = |x: f64| 0.5 * erfc(x / std::f64::consts::SQRT_2);
    if lo >= 0.0 {
        q(lo) - q(hi)
    } else if hi <= 0.0 {
        q(-hi) - q(-lo)
    } else {
        let e = |x: f64| if x.is_infinite() { x.signum() } else { erf(x / std::f64::consts::SQRT_2) };
        0.5 * (e(hi) - e(lo))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codewords_are_reproducible_and_unit_power() {
        let a = codeword(7, 0, 3, 16);
        assert_eq!(a, codeword(7, 0, 3, 16));
        assert_ne!(a, codeword(7, 0, 4, 16));
        assert_ne!(a, codeword(7, 1, 3, 16));
        assert_ne!(a, codeword(8, 0, 3, 16));
        let p: f64 = a.iter().map(|v| v * v).sum::<f64>() / 16.0;
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn codeword_cross_correlation_is_small() {
        for t in [8usize, 12, 16] {
            let mut worst: f64 = 0.0;
            for i in 0..40u64 {
                let a = codeword(1, 0, i, t);
                let b = codeword(1, 1, i, t);
                let c = codeword(1, 0, i + 1000, t);
                for other in [&b, &c] {
                    let r = a.iter().zip(other.iter()).map(|(x, y)| x * y).sum::<f64>() / t as f64;
                    worst = worst.max(r.abs());
                }
            }
            assert!(worst <= 4.0 / (t as f64).sqrt(), "T={t}: worst |corr| {worst}");
            let mean_abs: f64 = (0..200u64)
                .map(|i| {
                    let a = codeword(2, 0, i, t);
                    let b = codeword(2, 1, i, t);
                    (a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / t as f64).abs()
                })
                .sum::<f64>()
                / 200.0;
            assert!(mean_abs <= 4.0 / (t as f64).sqrt(), "T={t}: mean |corr| {mean_abs}");
        }
    }

    #[test]
    fn quantizer_cells_partition_the_line() {
        let q = ScalarQuantizer { step: 0.5, levels: 8 };
        assert_eq!(q.index(-100.0), 0);
        assert_eq!(q.index(100.0), 7);
        assert_eq!(q.index(0.0), 4);
        assert_eq!(q.index(-0.01), 3);
        for k in 0..8 {
            let (lo, hi) = q.bounds(k);
            assert!(lo < hi);
            if k > 0 {
                assert_eq!(q.bounds(k - 1).1, lo);
            }
        }
        let probs = q.cell_probabilities(0.3, 0.4, 0.0);
        let total: f64 = probs.iter().map(|c| c.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(probs[0].0, q.index(0.3));
    }

    #[test]
    fn interval_probability_in_the_tails() {
        assert!((gaussian_interval(-1.0, 1.0) - 0.682_689_492_137_086).abs() < 1e-14);
        let far = gaussian_interval(10.0, 11.0);
        assert!((far / 7.619_661_958_203_076e-24 - 1.0).abs() < 1e-12);
        assert_eq!(gaussian_interval(f64::NEG_INFINITY, f64::INFINITY), 1.0);
    }

    #[test]
    fn mapper_depends_on_every_cell() {
        let base = map_index(1, 2, &[3, 4, 5]);
        assert_eq!(base, map_index(1, 2, &[3, 4, 5]));
        assert_ne!(base, map_index(1, 2, &[3, 4, 6]));
        assert_ne!(base, map_index(1, 3, &[3, 4, 5]));
        assert_ne!(base, map_index(2, 2, &[3, 4, 5]));
    }
}
