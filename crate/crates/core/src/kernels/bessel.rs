//! Modified Bessel functions of the second kind for integer and half-integer
//! orders, in the scaled form `g_mu(r) = r^mu K_mu(r)`.

use std::f64::consts::{FRAC_PI_2, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_CUTOFF: f64 = 2.0;

/// `(K_0(x), K_1(x))` for `x > 0`.
pub fn k0_k1(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= SERIES_CUTOFF {
        k0_k1_series(x)
    } else {
        k0_k1_continued_fraction(x)
    }
}

// Power series with the logarithmic terms, summed until the terms drop below
// 1e-17 of the partial sum.
fn k0_k1_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let lg = (0.5 * x).ln();

    // K0 = -(ln(x/2) + gamma) I0 + sum y^k/(k!)^2 H_k
    let mut i0 = 1.0;
    let mut s0 = 0.0;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    // K1 = 1/x + ln(x/2) I1 - x/4 sum y^k/(k!(k+1)!) (psi(k+1) + psi(k+2))
    let mut i1 = 0.5 * x;
    let mut term1 = 1.0;
    let mut s1 = -EULER_GAMMA + (1.0 - EULER_GAMMA);
    for k in 1..60 {
        let kf = k as f64;
        term *= y / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        s0 += term * harmonic;
        term1 *= y / (kf * (kf + 1.0));
        i1 += 0.5 * x * term1;
        let psi_sum = 2.0 * (-EULER_GAMMA + harmonic) + 1.0 / (kf + 1.0);
        s1 += term1 * psi_sum;
        if term * harmonic.max(1.0) < 1e-17 * s0.abs().max(i0) && term1 < 1e-17 {
            break;
        }
    }
    let k0 = -(lg + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + lg * i1 - 0.25 * x * s1;
    (k0, k1)
}

// Steed's method for the second continued fraction (Temme's form), order 0.
fn k0_k1_continued_fraction(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        a -= 2.0 * (i - 1) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-16 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Gamma function at a positive integer or half-integer.
pub fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(
        twice >= 1.0 && (2.0 * x - twice).abs() < 1e-12,
        "gamma_half_integer: {x} is not a positive (half-)integer"
    );
    let (mut g, mut t) = if twice as i64 % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while t < x - 0.25 {
        g *= t;
        t += 1.0;
    }
    g
}

/// `g_mu(r) = r^mu K_mu(r)` for `r > 0` and `mu` an integer or half-integer,
/// possibly negative.
pub fn scaled_bessel_k(mu: f64, r: f64) -> f64 {
    debug_assert!(r > 0.0);
    if mu < 0.0 {
        // K_{-mu} = K_mu
        return r.powf(2.0 * mu) * scaled_bessel_k(-mu, r);
    }
    let half = (mu - mu.floor() - 0.5).abs() < 1e-12;
    let (mut lo, mut hi, mut order) = if half {
        let e = FRAC_PI_2.sqrt() * (-r).exp();
        (e, e * (1.0 + r), 0.5)
    } else {
        let (k0, k1) = k0_k1(r);
        (k0, r * k1, 0.0)
    };
    if (mu - order).abs() < 1e-12 {
        return lo;
    }
    order += 1.0;
    while order < mu - 1e-12 {
        // g_{mu+1} = r^2 g_{mu-1} + 2 mu g_mu
        let next = r * r * lo + 2.0 * order * hi;
        lo = hi;
        hi = next;
        order += 1.0;
    }
    hi
}

/// `lim_{r -> 0} r^mu K_mu(r) = 2^(mu-1) Gamma(mu)` for `mu > 0`.
pub fn scaled_bessel_k_at_zero(mu: f64) -> f64 {
    assert!(mu > 0.0, "r^mu K_mu(r) is unbounded at 0 for mu <= 0");
    2f64.powf(mu - 1.0) * gamma_half_integer(mu)
}
