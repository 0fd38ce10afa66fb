//! Dense 4×4 symmetric solve used by the linear subproblem.

use crate::error::{Error, Result};

pub(crate) type Mat4 = [[f64; 4]; 4];

/// LU factorisation with partial pivoting, in place.
fn lu(mut a: Mat4) -> Option<(Mat4, [usize; 4])> {
    let mut perm = [0, 1, 2, 3];
    for k in 0..4 {
        let p = (k..4)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap_or(k);
        if a[p][k] == 0.0 || !a[p][k].is_finite() {
            return None;
        }
        a.swap(k, p);
        perm.swap(k, p);
        for i in k + 1..4 {
            let l = a[i][k] / a[k][k];
            a[i][k] = l;
            let pivot_row = a[k];
            for (x, &u) in a[i].iter_mut().zip(&pivot_row).skip(k + 1) {
                *x -= l * u;
            }
        }
    }
    Some((a, perm))
}

fn lu_solve(lu: &Mat4, perm: &[usize; 4], b: &[f64; 4]) -> [f64; 4] {
    let mut x = [b[perm[0]], b[perm[1]], b[perm[2]], b[perm[3]]];
    for i in 1..4 {
        for j in 0..i {
            x[i] -= lu[i][j] * x[j];
        }
    }
    for i in (0..4).rev() {
        for j in i + 1..4 {
            x[i] -= lu[i][j] * x[j];
        }
        x[i] /= lu[i][i];
    }
    x
}

fn norm1(a: &Mat4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a x = b` for a symmetric positive semi-definite `a`.
///
/// The system is first scaled to unit diagonal; the 1-norm condition number
/// of the scaled matrix is compared against `condition_cap`.
pub(crate) fn solve_symmetric(a: &Mat4, b: &[f64; 4], condition_cap: f64) -> Result<[f64; 4]> {
    let mut d = [0.0; 4];
    for i in 0..4 {
        if !(a[i][i] > 0.0) || !a[i][i].is_finite() {
            return Err(Error::DegenerateBasis {
                condition: f64::INFINITY,
            });
        }
        d[i] = a[i][i].sqrt().recip();
    }
    let mut s = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            s[i][j] = a[i][j] * d[i] * d[j];
        }
    }
    let (f, perm) = lu(s).ok_or(Error::DegenerateBasis {
        condition: f64::INFINITY,
    })?;

    let mut inv = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let col = lu_solve(&f, &perm, &e);
        for i in 0..4 {
            inv[i][j] = col[i];
        }
    }
    let condition = norm1(&s) * norm1(&inv);
    if !condition.is_finite() || condition > condition_cap {
        return Err(Error::DegenerateBasis { condition });
    }

    let scaled_b = [b[0] * d[0], b[1] * d[1], b[2] * d[2], b[3] * d[3]];
    let z = lu_solve(&f, &perm, &scaled_b);
    Ok([z[0] * d[0], z[1] * d[1], z[2] * d[2], z[3] * d[3]])
}
