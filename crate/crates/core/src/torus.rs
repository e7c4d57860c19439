//! Arithmetic on the flat torus Tⁿ = Rⁿ / Zⁿ with coordinates stored in [0, 1).

/// Reduces a coordinate into [0, 1).
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // x.floor() can round so that r == 1.0 for tiny negative x
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub fn wrap_all(x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi = wrap(*xi);
    }
}

/// Minimal representative of a displacement, in (-1/2, 1/2].
#[inline]
pub fn minimal_displacement(d: f64) -> f64 {
    let r = d - d.round();
    if r <= -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// Componentwise minimal displacement `to - from`.
pub fn displacement(from: &[f64], to: &[f64]) -> Vec<f64> {
    from.iter()
        .zip(to)
        .map(|(a, b)| minimal_displacement(b - a))
        .collect()
}

/// Flat-torus distance.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| minimal_displacement(y - x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Distance on T*(Tⁿ): torus metric in x, Euclidean in p.
pub fn phase_distance(xa: &[f64], pa: &[f64], xb: &[f64], pb: &[f64]) -> f64 {
    let dx2: f64 = xa
        .iter()
        .zip(xb)
        .map(|(x, y)| minimal_displacement(y - x).powi(2))
        .sum();
    let dp2: f64 = pa.iter().zip(pb).map(|(a, b)| (a - b).powi(2)).sum();
    (dx2 + dp2).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_basic() {
        assert_eq!(wrap(0.25), 0.25);
        assert_eq!(wrap(1.25), 0.25);
        assert!((wrap(-0.25) - 0.75).abs() < 1e-15);
        assert_eq!(wrap(-1e-20), 0.0);
        assert_eq!(wrap(1.0), 0.0);
    }

    #[test]
    fn half_goes_positive() {
        assert_eq!(minimal_displacement(0.5), 0.5);
        assert_eq!(minimal_displacement(-0.5), 0.5);
        assert!((minimal_displacement(0.9) + 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn wrapped_in_unit_interval(x in -1e6f64..1e6) {
            let w = wrap(x);
            prop_assert!((0.0..1.0).contains(&w));
        }

        #[test]
        fn displacement_in_half_open_interval(d in -50.0f64..50.0) {
            let m = minimal_displacement(d);
            prop_assert!(m > -0.5 && m <= 0.5);
            prop_assert!(((d - m) - (d - m).round()).abs() < 1e-9);
        }

        #[test]
        fn distance_is_symmetric(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            prop_assert!((distance(&[a], &[b]) - distance(&[b], &[a])).abs() < 1e-15);
            prop_assert!(distance(&[a], &[b]) <= 0.5);
        }
    }
}
