//! Small dense helpers: balancing, spectral radius, stability verdicts.

use nalgebra::DMatrix;

/// Verdicts on strict inequalities need at least this much margin.
pub const GUARD: f64 = 1e-12;

/// Parlett-Reinsch balancing with radix 2. Returns a similar matrix whose
/// row and column norms are comparable, which keeps the eigenvalue solve
/// accurate for badly scaled inputs.
pub fn balance(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let radix = 2.0f64;
    let sq = radix * radix;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sq;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sq;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= inv;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
    m
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    balance(a)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `spectral_radius(a) < 1` with the guard band.
pub fn is_schur_stable(a: &DMatrix<f64>) -> bool {
    1.0 - spectral_radius(a) > GUARD
}

/// Roots of the monic quadratic `z^2 + b z + c` as complex pairs `(re, im)`.
pub fn monic_quadratic_roots(b: f64, c: f64) -> [(f64, f64); 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // Avoid cancellation by computing the larger root first.
        let r1 = if b >= 0.0 { (-b - s) / 2.0 } else { (-b + s) / 2.0 };
        let r2 = if r1 != 0.0 { c / r1 } else { -b - r1 };
        [(r1, 0.0), (r2, 0.0)]
    } else {
        let im = (-disc).sqrt() / 2.0;
        [(-b / 2.0, im), (-b / 2.0, -im)]
    }
}
