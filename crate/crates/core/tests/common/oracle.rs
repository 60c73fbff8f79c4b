//! Shooting oracle for the radial problem `φ'' + (n−1)/r φ' + λe^φ = 0`,
//! `φ'(0) = 0`, `φ(R) = 0`, independent of the finite-difference solvers.
//!
//! With `φ(r) = α + ψ(kr)` and `k² = λe^α`, `ψ` solves the same equation with
//! `λ = 1`, `ψ(0) = 0`. A centre value `α` then fixes `λ = s²e^{−α}/R²` where
//! `s` is the first root of `ψ(s) = −α`.

#![allow(dead_code)]

const DS: f64 = 1e-3;

/// Frozen oracle values (computed once with this module and cross-checked
/// against an adaptive RK45 shooting in double precision).
pub const INTERVAL_LAMBDA_STAR: f64 = 3.513_830_719_1;
pub const DISK_LAMBDA_STAR: f64 = 2.0;
pub const BALL3_LAMBDA_STAR: f64 = 3.321_992_118_3;
/// `φ(0.5)` on the unit ball in `ℝ¹⁰` at `λ = 15.99`.
pub const BALL10_PHI_HALF_AT_15_99: f64 = 1.380_231_210_5;
/// `max φ` on `(0, 1)` at `λ = 1`.
pub const INTERVAL_MAX_PHI_AT_1: f64 = 0.140_539_214_4;

fn rhs(n: usize, s: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], -(n as f64 - 1.0) / s * y[1] - y[0].exp()]
}

fn rk4(n: usize, s: f64, y: [f64; 2], h: f64) -> [f64; 2] {
    let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
    let k1 = rhs(n, s, y);
    let k2 = rhs(n, s + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = rhs(n, s + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = rhs(n, s + h, add(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Series start `ψ = −s²/2n + s⁴/(8n(n+2))`.
fn start(n: usize) -> (f64, [f64; 2]) {
    let nf = n as f64;
    let s = DS;
    (
        s,
        [
            -s * s / (2.0 * nf) + s.powi(4) / (8.0 * nf * (nf + 2.0)),
            -s / nf + s.powi(3) / (2.0 * nf * (nf + 2.0)),
        ],
    )
}

/// `ψ(target)`.
pub fn psi(n: usize, target: f64) -> f64 {
    let (mut s, mut y) = start(n);
    if target <= s {
        let nf = n as f64;
        return -target * target / (2.0 * nf);
    }
    while s + DS < target {
        y = rk4(n, s, y, DS);
        s += DS;
    }
    rk4(n, s, y, target - s)[0]
}

/// First `s` with `ψ(s) = −α`.
pub fn first_root(n: usize, alpha: f64) -> f64 {
    let (mut s, mut y) = start(n);
    loop {
        let next = rk4(n, s, y, DS);
        if next[0] <= -alpha {
            let (mut lo, mut hi) = (0.0, DS);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if rk4(n, s, y, mid)[0] > -alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return s + 0.5 * (lo + hi);
        }
        y = next;
        s += DS;
        assert!(s < 1e5, "no root for alpha = {alpha}");
    }
}

/// `λ(α)` on the ball of radius `r`.
pub fn lambda_of_alpha(n: usize, r: f64, alpha: f64) -> f64 {
    let s = first_root(n, alpha);
    s * s * (-alpha).exp() / (r * r)
}

/// Turning point `(λ*, α*)` by golden-section search on `λ(α)` over `[lo, hi]`.
pub fn fold(n: usize, r: f64, lo: f64, hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (lambda_of_alpha(n, r, c), lambda_of_alpha(n, r, d));
    while b - a > 1e-7 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = lambda_of_alpha(n, r, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = lambda_of_alpha(n, r, d);
        }
    }
    let alpha = 0.5 * (a + b);
    (lambda_of_alpha(n, r, alpha), alpha)
}

/// Centre value of the minimal solution at `lambda`, by bisection on the
/// increasing part `[0, alpha_max]` of `λ(α)`.
pub fn minimal_alpha(n: usize, r: f64, lambda: f64, alpha_max: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, alpha_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if lambda_of_alpha(n, r, mid) < lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `φ(x)` of the minimal solution at `lambda` on the ball of radius `r`.
pub fn minimal_phi_at(n: usize, r: f64, lambda: f64, alpha_max: f64, x: f64) -> f64 {
    let alpha = minimal_alpha(n, r, lambda, alpha_max);
    let k = (lambda * alpha.exp()).sqrt();
    alpha + psi(n, k * x)
}
