//! Gamma function and unit-ball constants.

use core::f64::consts::PI;
// Unused when std is in the build graph and its inherent f64 methods win.
#[allow(unused_imports)]
use num_traits::Float;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for real arguments (Lanczos approximation, reflection
/// below 1/2). Relative accuracy is around `1e-15` on `[0.5, 50]`; positive
/// integers up to 171 are returned exactly as factorials.
pub fn gamma(x: f64) -> f64 {
    if (1.0..=171.0).contains(&x) && x.fract() == 0.0 {
        return factorial(x as u32 - 1);
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Volume of the unit ball in `R^s`, `pi^{s/2} / Gamma(s/2 + 1)`; defined for
/// every real `s >= 0`.
pub fn unit_ball_volume(s: f64) -> f64 {
    PI.powf(0.5 * s) / gamma(0.5 * s + 1.0)
}

/// `n!` as a float.
pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}
