//! Small linear-algebra helpers.
//!
//! Dense symmetric eigenproblems (mode analysis, r x r) go through nalgebra.
//! The 1D grid Hamiltonians are symmetric tridiagonal with 10^4..10^6 points,
//! far beyond what a dense solver can handle, so the lowest eigenvalues are
//! located by Sturm-sequence bisection and eigenvectors recovered by inverse
//! iteration with a pivoted tridiagonal LU.

use nalgebra::DMatrix;

/// Eigen-decomposition of a symmetric matrix with a deterministic presentation:
/// eigenvalues ascending, eigenvectors unit-norm with the largest-magnitude
/// component made positive, exact ties ordered by descending eigenvector.
pub(crate) fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix must be square");
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| {
            let mut v: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
            canonical_sign(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            // bitwise-equal eigenvalues: order the degenerate pair by vector, descending
            for (x, y) in a.1.iter().zip(&b.1) {
                match y.total_cmp(x) {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            std::cmp::Ordering::Equal
        })
    });
    (
        pairs.iter().map(|p| p.0).collect(),
        pairs.into_iter().map(|p| p.1).collect(),
    )
}

/// Flip `v` so its largest-magnitude component (first such index) is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) strictly
/// below `x`, counted through the signs of the LDL^T pivots.
pub(crate) fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0usize;
    let mut pivot = diag[0] - x;
    if pivot < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if pivot == 0.0 { 1e-300 } else { pivot };
        pivot = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if pivot < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` smallest eigenvalues of a symmetric tridiagonal matrix, ascending,
/// each bisected down to machine-precision interval width.
pub(crate) fn lowest_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Vec<f64> {
    let n = diag.len();
    assert!(k <= n, "requested more eigenvalues than the matrix order");
    assert_eq!(off.len() + 1, n, "off-diagonal length must be n-1");
    // Gershgorin enclosure of the full spectrum.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut radius = 0.0;
        if i > 0 {
            radius += off[i - 1].abs();
        }
        if i + 1 < n {
            radius += off[i].abs();
        }
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    let mut out = Vec::with_capacity(k);
    let mut lower = lo;
    for j in 0..k {
        // invariant: count(a) <= j and count(b) >= j+1
        let (mut a, mut b) = (lower, hi);
        for _ in 0..128 {
            let mid = 0.5 * (a + b);
            if !(a < mid && mid < b) {
                break; // interval exhausted at this precision
            }
            if count_below(diag, off, mid) >= j + 1 {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
        lower = a; // eigenvalues come out ascending
    }
    out
}

/// LU factorization of a general tridiagonal matrix with partial pivoting
/// (row swaps between adjacent rows only, which is all tridiagonal needs).
pub(crate) struct TridiagonalLu {
    dl: Vec<f64>,  // multipliers, length n-1
    d: Vec<f64>,   // U diagonal, length n
    du: Vec<f64>,  // U first superdiagonal, length n-1
    du2: Vec<f64>, // U second superdiagonal (from swaps), length n-2
    swapped: Vec<bool>,
}

pub(crate) fn factor_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
) -> TridiagonalLu {
    let n = diag.len();
    assert!(n >= 2);
    assert_eq!(lower.len(), n - 1);
    assert_eq!(upper.len(), n - 1);
    let scale = diag
        .iter()
        .chain(lower)
        .chain(upper)
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
        .max(1.0);
    // keeps an exactly singular shift solvable; inverse iteration wants this
    let tiny = scale * f64::EPSILON * f64::EPSILON;

    let mut dl = lower.to_vec();
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];

    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let m = dl[i] / d[i];
            dl[i] = m;
            d[i + 1] -= m * du[i];
            if i + 2 < n {
                du2[i] = 0.0;
            }
        } else {
            let m = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = m;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - m * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -m * du2[i];
            }
            swapped[i] = true;
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    TridiagonalLu {
        dl,
        d,
        du,
        du2,
        swapped,
    }
}

impl TridiagonalLu {
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            let xi = x[i];
            x[i + 1] -= self.dl[i] * xi;
        }
        x[n - 1] /= self.d[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }
}

/// Unit-norm eigenvector of the symmetric tridiagonal (diag, off) for the
/// (already well-converged) eigenvalue `lambda`, by inverse iteration.
pub(crate) fn tridiagonal_eigenvector(diag: &[f64], off: &[f64], lambda: f64) -> Vec<f64> {
    let n = diag.len();
    let scale = diag
        .iter()
        .chain(off)
        .fold(0.0f64, |acc, &x| acc.max(x.abs()))
        .max(1.0);

    let mut shift = lambda;
    for attempt in 0..4 {
        let shifted: Vec<f64> = diag.iter().map(|&v| v - shift).collect();
        let lu = factor_tridiagonal(off, &shifted, off);

        // deterministic pseudo-random start so degenerate-looking cases
        // never hit an unlucky exactly-orthogonal vector
        let mut state = 0x9e3779b97f4a7c15u64 ^ (n as u64);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
            })
            .collect();
        normalize(&mut x);

        for _ in 0..8 {
            let mut y = lu.solve(&x);
            let ynorm = norm2(&y);
            if !ynorm.is_finite() || ynorm == 0.0 {
                break; // retry with a perturbed shift
            }
            for v in y.iter_mut() {
                *v /= ynorm;
            }
            let resid = tridiagonal_residual(diag, off, lambda, &y);
            x = y;
            if resid <= 256.0 * f64::EPSILON * scale {
                canonical_sign(&mut x);
                return x;
            }
        }
        let resid = tridiagonal_residual(diag, off, lambda, &x);
        if resid.is_finite() && resid <= 1e-8 * scale {
            canonical_sign(&mut x);
            return x;
        }
        // nudge the shift off an exact singularity and try again
        shift = lambda + scale * f64::EPSILON * 16.0 * (attempt + 1) as f64;
    }
    // best effort: the final iterate (callers treat vectors as diagnostics)
    let shifted: Vec<f64> = diag.iter().map(|&v| v - shift).collect();
    let lu = factor_tridiagonal(off, &shifted, off);
    let mut x = vec![1.0; n];
    normalize(&mut x);
    for _ in 0..8 {
        let mut y = lu.solve(&x);
        let ynorm = norm2(&y);
        if !ynorm.is_finite() || ynorm == 0.0 {
            break;
        }
        for v in y.iter_mut() {
            *v /= ynorm;
        }
        x = y;
    }
    canonical_sign(&mut x);
    x
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

fn tridiagonal_residual(diag: &[f64], off: &[f64], lambda: f64, v: &[f64]) -> f64 {
    let n = diag.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut r = (diag[i] - lambda) * v[i];
        if i > 0 {
            r += off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            r += off[i] * v[i + 1];
        }
        worst = worst.max(r.abs());
    }
    worst
}
