//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Determinant of the `n×n` row-major matrix in `buf` by Gaussian elimination
/// with partial pivoting. `buf` is overwritten.
pub fn det_in_place(buf: &mut [f64], n: usize) -> f64 {
    debug_assert!(buf.len() >= n * n);
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot = col;
        let mut best = buf[col * n + col].abs();
        for row in col + 1..n {
            let v = buf[row * n + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..n {
                buf.swap(col * n + c, pivot * n + c);
            }
            det = -det;
        }
        let p = buf[col * n + col];
        det *= p;
        for row in col + 1..n {
            let factor = buf[row * n + col] / p;
            if factor != 0.0 {
                for c in col + 1..n {
                    buf[row * n + c] -= factor * buf[col * n + c];
                }
            }
        }
    }
    det
}

/// Determinant of the submatrix of `a` on the given rows and columns.
pub fn minor(a: &DMatrix<f64>, rows: &[usize], cols: &[usize], scratch: &mut Vec<f64>) -> f64 {
    let k = rows.len();
    debug_assert_eq!(k, cols.len());
    match k {
        0 => 1.0,
        1 => a[(rows[0], cols[0])],
        _ => {
            scratch.clear();
            for &r in rows {
                for &c in cols {
                    scratch.push(a[(r, c)]);
                }
            }
            det_in_place(scratch, k)
        }
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn min_sym_eigenvalue(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::INFINITY)
}

pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.diagonal().sum()
}

/// Orthonormal basis (as columns) of the orthogonal complement of `n`.
pub fn orthonormal_complement(n: &DVector<f64>) -> DMatrix<f64> {
    let m = n.len();
    let mut basis: Vec<DVector<f64>> = vec![n.normalize()];
    let mut candidates: Vec<usize> = (0..m).collect();
    // Start from the axes least aligned with n for better conditioning.
    candidates.sort_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()));
    for i in candidates {
        if basis.len() == m {
            break;
        }
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v.axpy(-c, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    DMatrix::from_columns(&basis[1..])
}

/// Orthonormalise the columns of `frame`; returns `Q` (same shape) and the
/// diagonal of `R`.
pub fn qr_orthonormalize(frame: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let qr = frame.clone().qr();
    let q = qr.q();
    let r = qr.r();
    // Fix signs so the diagonal of R is non-negative.
    let mut q = q.columns(0, frame.ncols()).into_owned();
    let mut diag = Vec::with_capacity(frame.ncols());
    for j in 0..frame.ncols() {
        let d = r[(j, j)];
        if d < 0.0 {
            q.column_mut(j).neg_mut();
        }
        diag.push(d.abs());
    }
    (q, diag)
}

/// Angle in `[0, π/2]` between `v` and the column span of the orthonormal
/// `frame`.
pub fn angle_to_subspace(v: &DVector<f64>, frame: &DMatrix<f64>) -> f64 {
    let coeffs = frame.transpose() * v;
    let parallel = frame * &coeffs;
    let perp = v - &parallel;
    perp.norm().atan2(parallel.norm())
}

/// Angle in `[0, π/2]` between two lines, accurate for tiny angles.
pub fn line_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let a = a.normalize();
    let b = b.normalize();
    let c = a.dot(&b);
    let perp = &b - &a * c;
    perp.norm().atan2(c.abs())
}

/// Least-squares line `y ≈ slope·t + intercept`; returns
/// `(slope, intercept, rms_residual)`.
pub fn fit_line(ts: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(ts.len(), ys.len());
    let n = ts.len() as f64;
    if ts.len() < 2 {
        let y = ys.first().copied().unwrap_or(0.0);
        return (0.0, y, 0.0);
    }
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        stt += (t - tm) * (t - tm);
        sty += (t - tm) * (y - ym);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = ym - slope * tm;
    let ss: f64 = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| {
            let r = y - (slope * t + intercept);
            r * r
        })
        .sum();
    (slope, intercept, (ss / n).sqrt())
}

/// Unit vector spanning the (numerical) kernel of `a`: the right singular
/// vector of the smallest singular value.
pub fn null_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty matrix");
    v_t.row(idx).transpose().normalize()
}
