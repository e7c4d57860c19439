//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule on [a, b] with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Bisection for an increasing function on [lo, hi].
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean momentum ∫₀¹ √(2(E − cos 2πs)) ds of the pendulum rotation at energy E ≥ 1.
pub fn pendulum_mean_momentum(e: f64) -> f64 {
    simpson(|s| (2.0 * (e - (2.0 * PI * s).cos())).max(0.0).sqrt(), 0.0, 1.0, 20_000)
}

/// Energy E* of the rotating pendulum orbit with mean momentum `c` (|c| above the flat piece).
pub fn pendulum_alpha(c: f64) -> f64 {
    bisect(|e| pendulum_mean_momentum(e) - c.abs(), 1.0, 1.0 + c * c, 1e-12)
}

/// Period ∫₀¹ ds / √(2(E − cos 2πs)) of the rotation at energy E > 1.
pub fn pendulum_period(e: f64) -> f64 {
    simpson(|s| 1.0 / (2.0 * (e - (2.0 * PI * s).cos())).sqrt(), 0.0, 1.0, 200_000)
}

/// End of the flat piece of the pendulum α: ∫₀¹ 2|sin πs| ds = 4/π.
pub fn pendulum_critical_class() -> f64 {
    pendulum_mean_momentum(1.0)
}

/// Classical RK4 for z' = f(z) on a flat state vector.
pub fn rk4<F: Fn(&[f64]) -> Vec<f64>>(f: F, z0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let h = t / steps as f64;
    let mut z = z0.to_vec();
    let axpy = |z: &[f64], k: &[f64], a: f64| -> Vec<f64> { z.iter().zip(k).map(|(x, y)| x + a * y).collect() };
    for _ in 0..steps {
        let k1 = f(&z);
        let k2 = f(&axpy(&z, &k1, h / 2.0));
        let k3 = f(&axpy(&z, &k2, h / 2.0));
        let k4 = f(&axpy(&z, &k3, h));
        for i in 0..z.len() {
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    z
}

/// Pendulum vector field (x', p') = (p, 2π sin 2πx) for H = ½p² + cos 2πx.
pub fn pendulum_field(z: &[f64]) -> Vec<f64> {
    vec![z[1], 2.0 * PI * (2.0 * PI * z[0]).sin()]
}

/// Euler equations ṗ = p × I⁻¹p for principal moments `i`.
pub fn euler_field(i: [f64; 3]) -> impl Fn(&[f64]) -> Vec<f64> {
    move |p: &[f64]| {
        let w = [p[0] / i[0], p[1] / i[1], p[2] / i[2]];
        vec![p[1] * w[2] - p[2] * w[1], p[2] * w[0] - p[0] * w[2], p[0] * w[1] - p[1] * w[0]]
    }
}

/// Torus distance on the circle.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}
