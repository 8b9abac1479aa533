//! Scale-free comparisons. Errors are measured against the largest absolute
//! entry of the operands, with an absolute floor of [`ABS_FLOOR`].

use nalgebra::DMatrix;

pub const ABS_FLOOR: f64 = 1e-12;

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in comparison");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `max|a - b| / max(max|a|, max|b|)`; zero when both operands vanish.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = max_abs_diff(a, b);
    let scale = max_abs(a).max(max_abs(b));
    if diff <= ABS_FLOOR {
        return 0.0;
    }
    diff / scale.max(ABS_FLOOR)
}

pub fn matrices_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    let scale = max_abs(a).max(max_abs(b));
    max_abs_diff(a, b) <= (tol * scale).max(ABS_FLOOR)
}

pub fn scalars_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= (tol * a.abs().max(b.abs())).max(ABS_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_applies_near_zero() {
        let a = DMatrix::from_element(2, 2, 0.0);
        let b = DMatrix::from_element(2, 2, 1e-13);
        assert!(matrices_close(&a, &b, 1e-10));
        assert_eq!(relative_error(&a, &b), 0.0);
    }

    #[test]
    fn relative_to_largest_entry() {
        let a = DMatrix::from_row_slice(1, 2, &[1e6, 1.0]);
        let b = DMatrix::from_row_slice(1, 2, &[1e6, 1.5]);
        assert!(matrices_close(&a, &b, 1e-6));
        assert!(!matrices_close(&a, &b, 1e-7));
        assert!(scalars_close(3.0, 3.0 + 1e-13, 0.0));
    }
}
