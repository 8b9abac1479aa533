use nalgebra::DVector;

use super::VectorFieldModel;

const RESIDUAL_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-8;
const MAX_ITERS: usize = 100;

/// Roots found by Newton's method, plus the seeds that did not converge.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularitySearch {
    pub roots: Vec<DVector<f64>>,
    /// `(seed index, reason)` for every seed that failed.
    pub failures: Vec<(usize, String)>,
}

/// Newton iteration from each seed. Steps use the SVD pseudo-inverse of the
/// Jacobian so that degenerate singularities (e.g. the zero field) are
/// handled. Converged roots satisfy `|X(x)| < 1e-10` and are deduplicated
/// within `1e-8`.
pub fn find_singularities(model: &VectorFieldModel, seeds: &[DVector<f64>]) -> SingularitySearch {
    let mut roots: Vec<DVector<f64>> = Vec::new();
    let mut failures = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        if seed.len() != model.dim() {
            failures.push((i, format!("seed has dimension {}, expected {}", seed.len(), model.dim())));
            continue;
        }
        match newton(model, seed) {
            Ok(root) => {
                if !roots.iter().any(|r| (r - &root).norm() < DEDUP_TOL) {
                    roots.push(root);
                }
            }
            Err(reason) => failures.push((i, reason)),
        }
    }
    SingularitySearch { roots, failures }
}

fn newton(model: &VectorFieldModel, seed: &DVector<f64>) -> Result<DVector<f64>, String> {
    let mut x = seed.clone();
    for _ in 0..MAX_ITERS {
        let fx = model.eval(&x);
        if fx.norm() < RESIDUAL_TOL {
            // One more step polishes the root to near machine precision.
            if let Some(dx) = newton_step(model, &x, &fx) {
                let polished = &x - dx;
                if model.eval(&polished).norm() <= fx.norm() {
                    x = polished;
                }
            }
            return Ok(x);
        }
        let dx = newton_step(model, &x, &fx).ok_or_else(|| "Jacobian pseudo-inverse failed".to_string())?;
        x -= dx;
        if !x.iter().all(|v| v.is_finite()) {
            return Err("iterate became non-finite".into());
        }
    }
    Err(format!("no convergence in {MAX_ITERS} iterations (|X| = {:.3e})", model.eval(&x).norm()))
}

fn newton_step(model: &VectorFieldModel, x: &DVector<f64>, fx: &DVector<f64>) -> Option<DVector<f64>> {
    let jac = model.jacobian(x);
    let scale = jac.amax().max(1.0);
    jac.svd(true, true).solve(fx, 1e-12 * scale).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn lorenz_equilibria() {
        let model = VectorFieldModel::lorenz(10.0, 28.0, 8.0 / 3.0);
        let found = find_singularities(&model, &[v(&[0.1, 0.1, 0.1]), v(&[8.0, 8.0, 27.0]), v(&[0.05, 0.0, 0.0])]);
        assert!(found.failures.is_empty());
        assert_eq!(found.roots.len(), 2);
        assert!(found.roots[0].norm() < 1e-12);
        let c = 72.0f64.sqrt();
        assert!((&found.roots[1] - v(&[c, c, 27.0])).norm() < 1e-10);
    }

    #[test]
    fn linear_origin_only() {
        let model = VectorFieldModel::diag_linear(&[-2.0, 1.0, 1.0]);
        let found = find_singularities(&model, &[v(&[1.0, 2.0, 3.0]), v(&[-4.0, 0.0, 1.0])]);
        assert_eq!(found.roots.len(), 1);
        assert!(found.roots[0].norm() < 1e-12);
    }

    #[test]
    fn bad_seed_is_reported_not_fatal() {
        let model = VectorFieldModel::diag_linear(&[-2.0, 1.0, 1.0]);
        let found = find_singularities(&model, &[v(&[1.0, 2.0]), v(&[1.0, 1.0, 1.0])]);
        assert_eq!(found.failures.len(), 1);
        assert_eq!(found.failures[0].0, 0);
        assert_eq!(found.roots.len(), 1);
    }
}
