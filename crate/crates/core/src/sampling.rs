//! Reproducible low-discrepancy sample sets over [0,1)ⁿ × [−P, P]ⁿ.

use rand::Rng;

use crate::system::PhasePoint;
use crate::weakkam::solver::seeded_rng;

pub const DEFAULT_MOMENTUM_BOX: f64 = 3.0;
pub const DEFAULT_SAMPLE_COUNT: usize = 512;

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut out = 0.0;
    let mut f = inv;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    out
}

/// Halton points in the unit cube of dimension `d`, each coordinate shifted
/// modulo 1 by a seeded random offset (Cranley–Patterson rotation).
pub fn shifted_halton(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(d <= PRIMES.len(), "at most {} dimensions", PRIMES.len());
    let mut rng = seeded_rng(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            (0..d)
                .map(|k| (radical_inverse(i, PRIMES[k]) + shift[k]).fract())
                .collect()
        })
        .collect()
}

/// Phase-space sample set with positions in [0,1)ⁿ and momenta in [−P, P]ⁿ.
pub fn phase_samples(dim: usize, count: usize, momentum_box: f64, seed: u64) -> Vec<PhasePoint> {
    shifted_halton(2 * dim, count, seed)
        .into_iter()
        .map(|u| {
            let x = u[..dim].to_vec();
            let p = u[dim..].iter().map(|s| momentum_box * (2.0 * s - 1.0)).collect();
            PhasePoint::new(x, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        let v: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(v, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn samples_cover_the_box() {
        let s = phase_samples(2, 512, 3.0, 7);
        assert_eq!(s.len(), 512);
        for z in &s {
            assert!(z.x().iter().all(|x| (0.0..1.0).contains(x)));
            assert!(z.p().iter().all(|p| (-3.0..=3.0).contains(p)));
        }
        // every quarter of the p₁ range is hit
        for q in 0..4 {
            let lo = -3.0 + 1.5 * q as f64;
            assert!(s.iter().any(|z| z.p()[0] >= lo && z.p()[0] < lo + 1.5));
        }
    }

    #[test]
    fn seeded_and_deterministic() {
        assert_eq!(phase_samples(1, 16, 3.0, 1), phase_samples(1, 16, 3.0, 1));
        assert_ne!(phase_samples(1, 16, 3.0, 1), phase_samples(1, 16, 3.0, 2));
    }
}
