//! Float helpers that are not in `core`, plus the fixed-order reductions
//! every quadrature in the crate goes through.

pub(crate) use libm::{ceil, cos, exp, expm1, floor, log as ln, pow, round, sin, sqrt};

pub(crate) const PI: f64 = core::f64::consts::PI;

const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation of `term(0) + … + term(n-1)`.
///
/// The split points depend only on `n`, so the rounding pattern is fixed for
/// a given length regardless of how the terms were produced.
pub(crate) fn pairwise_sum<F: Fn(usize) -> f64>(n: usize, term: F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            let mut s = 0.0;
            for i in lo..hi {
                s += term(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(lo, mid, term) + rec(mid, hi, term)
        }
    }
    rec(0, n, &term)
}

pub(crate) fn sum_slice(values: &[f64]) -> f64 {
    pairwise_sum(values.len(), |i| values[i])
}

/// `z / (e^z − 1)`, continuous at 0.
pub(crate) fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-10 {
        1.0 - 0.5 * z
    } else if z > 700.0 {
        0.0
    } else {
        z / expm1(z)
    }
}

/// `x^n` for small `n`.
pub(crate) fn ipow(x: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * x)
}

/// Volume of the unit ball in dimension `dim` (1 or 2).
pub(crate) fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => PI,
        _ => unreachable!("dimension is validated at grid construction"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let s = pairwise_sum(1000, |i| i as f64);
        assert_eq!(s, 499_500.0);
    }

    #[test]
    fn bernoulli_limits() {
        assert_eq!(bernoulli(0.0), 1.0);
        assert!((bernoulli(1e-3) - 1e-3 / expm1(1e-3)).abs() < 1e-12);
        assert!((bernoulli(-40.0) - 40.0).abs() < 1e-12);
        assert_eq!(bernoulli(800.0), 0.0);
        // B(-z) = e^z B(z)
        for z in [0.3, 1.7, 5.0] {
            assert!((bernoulli(-z) - exp(z) * bernoulli(z)).abs() < 1e-12 * bernoulli(-z));
        }
    }
}
