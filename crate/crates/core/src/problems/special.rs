//! Special functions and quadrature used by the closed-form solution oracles.

use crate::scalar::Real;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral `Ei(x)` for `x > 0` (power series; all terms positive).
pub fn ei<S: Real>(x: S) -> S {
    debug_assert!(x > S::zero());
    let mut term = S::one();
    let mut sum = S::zero();
    let mut k = 1usize;
    loop {
        let kk = S::from_usize_lossy(k);
        term = term * x / kk;
        let add = term / kk;
        sum += add;
        if add < S::epsilon() * sum || k > 500 {
            break;
        }
        k += 1;
    }
    S::lit(EULER_GAMMA) + x.ln() + sum
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
pub fn e1<S: Real>(x: S) -> S {
    debug_assert!(x > S::zero());
    if x <= S::one() {
        // alternating series, mild cancellation for x <= 1
        let mut term = S::one();
        let mut sum = S::zero();
        for k in 1..200usize {
            let kk = S::from_usize_lossy(k);
            term = -term * x / kk;
            let add = term / kk;
            sum += add;
            if add.abs() < S::epsilon() * sum.abs() {
                break;
            }
        }
        -S::lit(EULER_GAMMA) - x.ln() - sum
    } else {
        // modified Lentz evaluation of the continued fraction
        let tiny = S::min_positive_value() / S::epsilon();
        let two = S::lit(2.0);
        let mut b = x + S::one();
        let mut c = S::one() / tiny;
        let mut d = S::one() / b;
        let mut h = d;
        for i in 1..500usize {
            let ii = S::from_usize_lossy(i);
            let a = -ii * ii;
            b += two;
            d = S::one() / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - S::one()).abs() < S::epsilon() {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// Composite Gauss–Legendre quadrature of a vector-valued integrand on `[a, b]`.
pub fn integrate_panels<S: Real, const N: usize>(
    a: S,
    b: S,
    panels: usize,
    rule: &[(f64, f64)],
    mut f: impl FnMut(S) -> [S; N],
) -> [S; N] {
    let mut acc = [S::zero(); N];
    if b <= a {
        return acc;
    }
    let width = (b - a) / S::from_usize_lossy(panels);
    let half = width / S::lit(2.0);
    for p in 0..panels {
        let mid = a + width * (S::from_usize_lossy(p) + S::lit(0.5));
        for &(node, weight) in rule {
            let v = f(mid + half * S::lit(node));
            for k in 0..N {
                acc[k] += half * S::lit(weight) * v[k];
            }
        }
    }
    acc
}
