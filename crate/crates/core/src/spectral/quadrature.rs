//! One-dimensional product integration used for the Sobolev weights.
//!
//! The weight `(1 + |ξ|^{2/3} + |η|²)^s` has a cusp at `ξ = 0`, so plain
//! trapezoid sums over a uniform `ξ` grid converge only like `h^{5/3}` and
//! are badly biased at practical spacings. Instead the smooth factor
//! (`|μ̂|²`, `|f̂|²`) is interpolated by local cubics on the uniform nodes and
//! the weight is integrated exactly against each cubic basis function, with
//! a cubic change of variables on the intervals touching the cusp.

use std::sync::OnceLock;

const GL_ORDER: usize = 20;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Cubic Lagrange basis on the four equispaced nodes `0, 1, 2, 3` evaluated
/// at local coordinate `u`.
#[inline]
fn cubic_basis(u: f64) -> [f64; 4] {
    [
        -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
        u * (u - 2.0) * (u - 3.0) / 2.0,
        -u * (u - 1.0) * (u - 3.0) / 2.0,
        u * (u - 1.0) * (u - 2.0) / 6.0,
    ]
}

/// Product-integration weights on the uniform nodes `start + j*h`,
/// `j = 0..n`, for `∫_{start}^{start+(n-1)h} weight(ξ) g(ξ) dξ ≈ Σ_j W_j g(ξ_j)`,
/// where `g` is smooth and `weight` is smooth except for a possible
/// `|ξ|^{2/3}`-type cusp at `ξ = 0`.
///
/// Requires `n ≥ 4`. Exact for cubic `g` on every interval.
pub fn cusp_product_weights(start: f64, h: f64, n: usize, weight: impl Fn(f64) -> f64) -> Vec<f64> {
    assert!(n >= 4, "product integration needs at least four nodes");
    let (gx, gw) = gl20();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let a = start + i as f64 * h;
        let b = a + h;
        let lo = i.saturating_sub(1).min(n - 4);
        let base = start + lo as f64 * h;
        let mut add = |xi: f64, jac: f64| {
            let f = weight(xi) * jac;
            let l = cubic_basis((xi - base) / h);
            for q in 0..4 {
                out[lo + q] += f * l[q];
            }
        };
        let tiny = 1e-12 * h;
        // Pieces [p, q] with the cusp (if any) sitting at one end.
        let mut pieces: Vec<(f64, f64)> = Vec::with_capacity(2);
        if a < -tiny && b > tiny {
            pieces.push((a, 0.0));
            pieces.push((0.0, b));
        } else {
            pieces.push((a, b));
        }
        for (p, q) in pieces {
            let len = q - p;
            if p.abs() <= tiny {
                // ξ = p + len·u³ removes the cusp at the left end.
                for k in 0..GL_ORDER {
                    let u = 0.5 * (gx[k] + 1.0);
                    add(p + len * u * u * u, 0.5 * gw[k] * 3.0 * len * u * u);
                }
            } else if q.abs() <= tiny {
                for k in 0..GL_ORDER {
                    let u = 0.5 * (gx[k] + 1.0);
                    add(q - len * u * u * u, 0.5 * gw[k] * 3.0 * len * u * u);
                }
            } else {
                for k in 0..GL_ORDER {
                    add(p + 0.5 * len * (gx[k] + 1.0), 0.5 * gw[k] * len);
                }
            }
        }
    }
    out
}

/// Composite trapezoid weights on `n` uniform nodes with spacing `h`.
pub fn trapezoid_weights(h: f64, n: usize) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}
