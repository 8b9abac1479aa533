//! Exterior-algebra identities checked on random Gaussian matrices.

use nalgebra::DMatrix;
use serde::Serialize;
use singhyp::exterior::{additive_compound, binomial};
use singhyp::rng::{gaussian_matrix, gaussian_vector, streams, SeedStream};
use singhyp::{codim1_generator, cofactor_operator, compound_operator, HodgeIdentification};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResult {
    pub name: &'static str,
    /// Largest relative error over all trials and grades.
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub version: &'static str,
    pub identities: Vec<IdentityResult>,
    pub pass: bool,
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

#[derive(Default)]
struct Worst([f64; 6]);

impl Worst {
    fn bump(&mut self, i: usize, e: f64) {
        // NaN must not hide behind max().
        self.0[i] = if e.is_nan() { f64::INFINITY } else { self.0[i].max(e) };
    }
}

const NAMES: [(&str, f64); 6] = [
    ("multiplicativity", 1e-8),
    ("determinant_power", 1e-8),
    ("cofactor", 1e-10),
    ("inverse_transpose", 1e-8),
    ("generator", 1e-10),
    ("identification_round_trip", 1e-15),
];

/// Checks, for `trials` random `dim × dim` pairs:
/// `∧^k(AB) = ∧^k A ∧^k B`, `det ∧^k A = (det A)^{C(m−1,k−1)}`,
/// the identified codimension-one compound against cofactors and against
/// `det(A)·A^{-T}`, the conjugated additive compound against
/// `tr(D)·I − Dᵀ`, and the vector round trip of the identification.
pub fn run_identities(dim: usize, trials: usize, seed: u64) -> IdentityReport {
    let mut rng = SeedStream::new(seed).stream(streams::IDENTITIES);
    let hodge = (dim >= 2).then(|| HodgeIdentification::new(dim).expect("dim >= 2"));
    let mut w = Worst::default();
    for _ in 0..trials {
        let a = gaussian_matrix(&mut rng, dim, dim);
        let b = gaussian_matrix(&mut rng, dim, dim);
        let det_a = a.determinant();
        for k in 1..=dim {
            let ca = compound_operator(&a, k).expect("valid grade");
            let cb = compound_operator(&b, k).expect("valid grade");
            let cab = compound_operator(&(&a * &b), k).expect("valid grade");
            w.bump(0, rel(&(ca.matrix() * cb.matrix()), cab.matrix()));
            let power = det_a.powi(binomial(dim - 1, k - 1) as i32);
            w.bump(1, (ca.matrix().determinant() - power).abs() / power.abs().max(f64::MIN_POSITIVE));
        }
        if let Some(h) = &hodge {
            let ic = h.identified_compound(&a).expect("square");
            w.bump(2, rel(&ic, &cofactor_operator(&a).expect("square")));
            if let Some(inv) = a.clone().try_inverse() {
                w.bump(3, rel(&ic, &(inv.transpose() * det_a)));
            }
            let add = additive_compound(&a, dim - 1).expect("valid grade");
            w.bump(4, rel(&h.conjugate(&add).expect("square"), &codim1_generator(&a).expect("square")));
            let v = gaussian_vector(&mut rng, dim);
            let back = h.to_vector(&h.from_vector(&v).expect("length")).expect("grade");
            w.bump(5, (back - &v).amax() / v.amax().max(f64::MIN_POSITIVE));
        }
    }
    let identities: Vec<IdentityResult> = NAMES
        .iter()
        .enumerate()
        .filter(|(i, _)| hodge.is_some() || *i < 2)
        .map(|(i, (name, tol))| IdentityResult { name, max_error: w.0[i], tolerance: *tol, pass: w.0[i] <= *tol })
        .collect();
    let pass = identities.iter().all(|r| r.pass);
    IdentityReport { dim, trials, seed, version: singhyp::VERSION, identities, pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_seeded() {
        let a = run_identities(4, 50, 7);
        assert!(a.pass, "{a:?}");
        assert_eq!(a.identities.len(), 6);
        assert_eq!(a, run_identities(4, 50, 7));
        assert_ne!(a.identities[0].max_error, run_identities(4, 50, 8).identities[0].max_error);
    }

    #[test]
    fn dimension_one_skips_the_identification() {
        let r = run_identities(1, 5, 0);
        assert_eq!(r.identities.len(), 2);
        assert!(r.pass);
    }
}
