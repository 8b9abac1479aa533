//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use singhyp::certifier::{certify, diagonal_classification, reversal_consistency, CertifyConfig, CriterionId, SamplingPlan, Verdict};
use singhyp::exterior::{binomial, codim1_generator, cofactor_operator, compound_operator, HodgeIdentification};
use singhyp::flow::{frame_growth, integrate_cocycle, integrate_orbit, VectorFieldModel};
use singhyp::linalg::{line_angle, sym_eigenvalues};
use singhyp::quadform::{delta_interval, hat_j_matrix, DeltaConfig, QuadFormField};
use singhyp::rng::{gaussian_matrix, SeedStream};
use singhyp::splitting::{
    build_adapted_metric, estimate_stable_direction, flow_in_center_check, splitting_at_singularity,
    verify_adaptedness, PowerConfig, SplittingEstimate,
};

type Check = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn rng(label: u64) -> ChaCha8Rng {
    SeedStream::new(20240601).stream(100 + label)
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(v))
}

fn codim_one_identity() -> Outcome {
    let mut r = rng(1);
    let (mut worst, mut worst_inv): (f64, f64) = (0.0, 0.0);
    for m in 3..=5 {
        let hodge = HodgeIdentification::new(m).unwrap();
        for _ in 0..500 {
            let a = gaussian_matrix(&mut r, m, m);
            let lhs = hodge.identified_compound(&a).unwrap();
            let rhs = cofactor_operator(&a).unwrap();
            worst = worst.max(rel(&lhs, &rhs));
            // Independent oracle: det(A)·A^{-T} through nalgebra's inverse.
            let adj = a.clone().try_inverse().unwrap().transpose() * a.determinant();
            worst_inv = worst_inv.max(rel(&lhs, &adj));
        }
    }
    Outcome {
        pass: worst <= 1e-10 && worst_inv <= 1e-10,
        detail: format!("max relative error {worst:.2e} against cofactors, {worst_inv:.2e} against det(A)·A^-T, 1500 matrices"),
    }
}

fn multiplicativity() -> Outcome {
    let mut r = rng(2);
    let (mut worst_mul, mut worst_det): (f64, f64) = (0.0, 0.0);
    for m in 1..=5 {
        for _ in 0..200 {
            let a = gaussian_matrix(&mut r, m, m);
            let b = gaussian_matrix(&mut r, m, m);
            let det_a = a.determinant();
            for k in 1..=m {
                let ca = compound_operator(&a, k).unwrap();
                let cb = compound_operator(&b, k).unwrap();
                let cab = compound_operator(&(&a * &b), k).unwrap();
                worst_mul = worst_mul.max(rel(&(ca.matrix() * cb.matrix()), cab.matrix()));
                let power = det_a.powi(binomial(m - 1, k - 1) as i32);
                let det_c = ca.matrix().determinant();
                worst_det = worst_det.max((det_c - power).abs() / power.abs().max(1e-300));
            }
        }
    }
    Outcome {
        pass: worst_mul <= 1e-8 && worst_det <= 1e-8,
        detail: format!("multiplicativity {worst_mul:.2e}, determinant power law {worst_det:.2e}"),
    }
}

fn generator_check() -> Outcome {
    let mut r = rng(3);
    let (mut lo, mut hi): (f64, f64) = (f64::INFINITY, 0.0);
    let mut first_order = true;
    for m in [3, 4] {
        let hodge = HodgeIdentification::new(m).unwrap();
        for _ in 0..50 {
            let d = gaussian_matrix(&mut r, m, m);
            let g = codim1_generator(&d).unwrap();
            let err = |h: f64| {
                let c = hodge.identified_compound(&(&d * h).exp()).unwrap();
                ((c - DMatrix::identity(m, m)) / h - &g).amax()
            };
            let (e3, e4) = (err(1e-3), err(1e-4));
            let ratio = e3 / e4;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            // Second-order term of the exponential bounds the error.
            let bound = 1e-4 * (&g * &g).amax();
            first_order &= e4 <= bound;
        }
    }
    Outcome {
        pass: lo > 8.0 && hi < 12.0 && first_order,
        detail: format!("error ratio h=1e-3 / h=1e-4 in [{lo:.3}, {hi:.3}] over 100 generators"),
    }
}

fn linear_grid() -> Outcome {
    let grid: [[f64; 3]; 20] = [
        [-2.0, 1.0, -0.5],
        [-2.0, 1.0, -1.5],
        [-2.0, 1.0, 1.0],
        [-1.0, 2.0, 3.0],
        [-3.0, -1.0, 2.0],
        [-3.0, -2.0, -1.0],
        [1.0, 2.0, 3.0],
        [-1.0, -2.0, 3.0],
        [2.0, -1.0, 1.0],
        [-0.5, 1.0, 2.5],
        [-2.5, 0.5, 0.5],
        [-1.5, -0.5, 2.0],
        [-2.0, -1.0, 0.5],
        [0.5, 1.5, 2.0],
        [-3.0, 3.0, -2.0],
        [-1.0, 3.0, -2.0],
        [-2.5, -1.5, 3.0],
        [-1.0, 0.5, -1.5],
        [3.0, -3.0, -3.0],
        [-2.0, 2.5, -1.0],
    ];
    let field = QuadFormField::standard(3);
    let plan = SamplingPlan {
        initial_conditions: vec![vec![0.0, 1e-3, 1e-3], vec![0.0, -1e-3, 2e-3]],
        transient: 0.0,
        horizon: 10.0,
        step: 1e-2,
        stride: 10,
        singularities: vec![vec![0.0; 3]],
    };
    let cfg = CertifyConfig::default();
    let mut mismatches = Vec::new();
    let mut certified = 0;
    for d in &grid {
        let c = certify(&VectorFieldModel::diag_linear(d), &field, &plan, &cfg).unwrap();
        let expected = if diagonal_classification(d) { Verdict::CertifiedEvidence } else { Verdict::RefutedAtSample };
        if c.verdict != expected {
            mismatches.push(format!("{d:?}: {} vs {}", c.verdict, expected));
        }
        if c.verdict == Verdict::CertifiedEvidence {
            certified += 1;
        }
    }
    let j = diag(&[-1.0, 1.0, 1.0]);
    let mut ev = sym_eigenvalues(&hat_j_matrix(&j, &diag(&[-2.0, 1.0, -0.5])));
    ev.sort_by(|a, b| a.total_cmp(b));
    let eig_ok = ev.iter().zip([1.0, 2.0, 5.0]).all(|(a, b)| (a - b).abs() <= 1e-12);
    let fail = certify(&VectorFieldModel::diag_linear(&[-2.0, 1.0, -1.5]), &field, &plan, &cfg).unwrap();
    let b_margin = fail.single(CriterionId::B).unwrap().margin;
    let margin_ok = (b_margin + 1.0).abs() <= 1e-12 && fail.verdict == Verdict::RefutedAtSample;
    Outcome {
        pass: mismatches.is_empty() && eig_ok && margin_ok,
        detail: format!(
            "{}/20 verdicts match ({certified} certified); hat_J eigenvalues {ev:?}; refuted margin {b_margin}{}",
            20 - mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!("; mismatches: {}", mismatches.join(", ")) }
        ),
    }
}

fn delta_intervals() -> Outcome {
    let j = diag(&[-1.0, 1.0, 1.0]);
    let cfg = DeltaConfig::default();
    let a = delta_interval(&diag(&[4.0, 2.0, 2.0]), &j, &cfg).unwrap();
    let b = delta_interval(&diag(&[4.0, 2.0, -1.0]), &j, &cfg).unwrap();
    let err = [(a.lower + 4.0).abs(), (a.upper - 2.0).abs(), (b.lower + 4.0).abs(), (b.upper + 1.0).abs()]
        .into_iter()
        .fold(0.0f64, f64::max);
    Outcome {
        pass: !a.empty && !b.empty && err <= 1e-6,
        detail: format!("({:.9}, {:.9}) and ({:.9}, {:.9}), max endpoint error {err:.1e}", a.lower, a.upper, b.lower, b.upper),
    }
}

fn cocycle_fidelity() -> Outcome {
    let mut worst_exp: f64 = 0.0;
    for d in [[-2.0, 1.0, 1.0], [-2.0, 1.0, -0.5], [-3.0, 0.5, 2.0], [1.5, -1.0, 3.0]] {
        let model = VectorFieldModel::diag_linear(&d);
        let s = integrate_cocycle(&model, &DVector::from_row_slice(&[0.3, -0.2, 0.1]), 1.0, 1e-3).unwrap();
        let exact = diag(&d).exp();
        worst_exp = worst_exp.max((s.fundamental.last().unwrap() - exact).amax());
    }
    let model = VectorFieldModel::lorenz(10.0, 28.0, 8.0 / 3.0);
    let x0 = DVector::from_row_slice(&[1.0, 1.0, 20.0]);
    let whole = integrate_cocycle(&model, &x0, 1.0, 1e-3).unwrap();
    let mut worst_comp: f64 = 0.0;
    for split in [100usize, 300, 500, 900] {
        let s = split as f64 * 1e-3;
        let first = &whole.fundamental[split];
        let rest = integrate_cocycle(&model, &whole.orbit.states[split], 1.0 - s, 1e-3).unwrap();
        let composed = rest.fundamental.last().unwrap() * first;
        worst_comp = worst_comp.max(rel(&composed, whole.fundamental.last().unwrap()));
    }
    Outcome {
        pass: worst_exp <= 1e-8 && worst_comp <= 1e-6,
        detail: format!("|A_1 - exp(D)| max {worst_exp:.2e}; Lorenz composition relative error {worst_comp:.2e}"),
    }
}

fn lorenz_run() -> Outcome {
    let model = VectorFieldModel::lorenz(10.0, 28.0, 8.0 / 3.0);
    let origin = DVector::zeros(3);
    let disc = 1201f64.sqrt();
    let roots = [(-11.0 - disc) / 2.0, -8.0 / 3.0, (-11.0 + disc) / 2.0];
    let sing = splitting_at_singularity(&model, &origin).unwrap();
    let eig_err = sing.eigenvalues.iter().zip(roots).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);

    // E at the origin by power iteration on the cocycle of the fixed point.
    let at_origin = integrate_cocycle(&model, &origin, 3.0, 1e-3).unwrap();
    let mut r = rng(7);
    let e0 = estimate_stable_direction(&at_origin, &PowerConfig::default(), &mut r).unwrap();
    let eigvec = DVector::from_row_slice(&[10.0, roots[0] + 10.0, 0.0]);
    let e_angle = line_angle(&e0.vectors[0], &eigvec);

    let x0 = DVector::from_row_slice(&[1.0, 1.0, 20.0]);
    let start = integrate_orbit(&model, &x0, 10.0, 1e-3).unwrap().last().clone();
    let sample = integrate_cocycle(&model, &start, 40.0, 1e-3).unwrap();
    let est = SplittingEstimate::estimate(&sample, &PowerConfig::default(), &mut r).unwrap();
    // Volume growth of F over consecutive post-transient segments.
    let seg = 9000;
    let mut rates = Vec::new();
    let mut node = est.first_node;
    while node + seg < est.first_node + est.len() {
        let p = &est.points[node - est.first_node];
        let piece = singhyp::flow::CocycleSample {
            orbit: singhyp::flow::OrbitSegment {
                times: sample.orbit.times[node..=node + seg].iter().map(|t| t - p.time).collect(),
                states: sample.orbit.states[node..=node + seg].to_vec(),
                step: sample.orbit.step,
            },
            fundamental: Vec::new(),
            steps: sample.steps[node..node + seg].to_vec(),
        };
        rates.push(frame_growth(&piece, &p.f, 10, "center volume").exponent);
        node += seg;
    }
    let min_rate = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let flow = flow_in_center_check(&model, &est, 5e-2);
    Outcome {
        pass: eig_err <= 1e-6 && e_angle <= 1e-6 && min_rate > 0.1 && flow.pass,
        detail: format!(
            "eigenvalue error {eig_err:.1e}; E angle {e_angle:.1e}; center volume rates {:?}; flow-in-center angle {:.2e} over {} points",
            rates.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            flow.max_angle,
            flow.checked
        ),
    }
}

fn adapted_metric() -> Outcome {
    let e = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
    let f = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let grid: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
    let mut out = Vec::new();
    let mut pass = true;
    for (d, want) in [([-2.0, 1.0, 1.0], 2.0), ([-2.0, 1.0, -0.5], 0.5)] {
        let model = VectorFieldModel::diag_linear(&d);
        let s = integrate_cocycle(&model, &DVector::from_row_slice(&[0.0, 0.5, -0.5]), 3.0, 1e-3).unwrap();
        let est = SplittingEstimate::constant(&s, &e, &f);
        let metric = build_adapted_metric(&est, &QuadFormField::standard(3), &model).unwrap();
        let rep = verify_adaptedness(&metric, &s, &grid, 50).unwrap();
        let ok = rep.contraction_pass && rep.domination_pass && rep.volume_pass && (rep.lambda - want).abs() <= 1e-3;
        pass &= ok;
        out.push(format!(
            "{d:?}: rates ({:.4}, {:.4}, {:.4}), fitted {:.6}",
            rep.contraction_rate, rep.domination_rate, rep.volume_rate, rep.lambda
        ));
    }
    Outcome { pass, detail: out.join("; ") }
}

fn reversal_duality() -> Outcome {
    let mut r = rng(9);
    let field = QuadFormField::standard(3);
    let cfg = DeltaConfig::default();
    let mut agree = 0;
    let mut nonempty = 0;
    for k in 0..50 {
        let mut m = gaussian_matrix(&mut r, 3, 3);
        if k % 2 == 0 {
            // Half the systems are biased towards strict separation.
            m = m * 0.5 + diag(&[-2.0, 1.0, 1.0]);
        }
        let model = VectorFieldModel::linear(m);
        let x = vec![DVector::from_row_slice(&[0.1, 0.2, 0.3])];
        let rep = reversal_consistency(&model, &field, &x, &cfg).unwrap();
        if rep.consistent {
            agree += 1;
        }
        let p = singhyp::quadform::pointwise_delta(&field, &model, &x[0], &cfg).unwrap();
        if !p.interval.empty {
            nonempty += 1;
        }
    }
    Outcome { pass: agree == 50, detail: format!("{agree}/50 agree ({nonempty} strictly separated)") }
}

fn main() {
    let criteria: [Check; 9] = [
        ("codimension-one compound equals cofactor", codim_one_identity, Duration::from_secs(5)),
        ("compound multiplicativity and determinant power law", multiplicativity, Duration::from_secs(10)),
        ("identified compound generator", generator_check, Duration::from_secs(5)),
        ("linear oracle grid", linear_grid, Duration::from_secs(10)),
        ("delta-interval endpoints", delta_intervals, Duration::from_secs(1)),
        ("cocycle fidelity", cocycle_fidelity, Duration::from_secs(5)),
        ("Lorenz desk-scale run", lorenz_run, Duration::from_secs(60)),
        ("adapted-metric verification", adapted_metric, Duration::from_secs(5)),
        ("reversal duality", reversal_duality, Duration::from_secs(5)),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = run();
        let elapsed = t0.elapsed();
        let in_time = elapsed <= *limit;
        let pass = outcome.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {}: {} {name}: {} [{:.2} s, limit {} s{}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
