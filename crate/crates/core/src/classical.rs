//! The classical transport operator -grad W . grad and its eigenfunctions.
//!
//! Three structural facts get exercised numerically here: products of
//! eigenfunctions are eigenfunctions with added eigenvalues, nonconstant
//! eigenfunctions vanish at equilibrium, and the equilibrium gradient of an
//! eigenfunction is either zero or an eigenvector of -hess W with the same
//! eigenvalue. The elementary (linear) eigenfunctions built from the normal
//! modes generate all the others as monomials.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{self, EquilibriumReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::systems::{ClassicalEigenfunction, ModeLabel, PrepotentialSystem};

/// Sentinel returned by [`check_gradient_eigenvector`] when the gradient at
/// equilibrium vanishes, i.e. the eigenfunction is not elementary.
pub const NON_ELEMENTARY: f64 = -1.0;

/// Outcome of sampling the eigenvalue equation over a neighborhood of the
/// equilibrium. `max_abs_residual` is the worst |D phi - eigenvalue*phi|;
/// `normalization` the largest |phi| seen, for putting the residual in scale.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorResidual {
    pub max_abs_residual: f64,
    pub normalization: f64,
    #[serde(skip)]
    pub sample_points: Vec<Vec<f64>>,
}

impl OperatorResidual {
    /// Residual relative to the largest sampled |phi| (or raw when phi
    /// vanished everywhere, which only the zero function does).
    pub fn relative(&self) -> f64 {
        if self.normalization > 0.0 {
            self.max_abs_residual / self.normalization
        } else {
            self.max_abs_residual
        }
    }
}

/// Apply the transport operator: (D f)(q) = -grad W(q) . grad f(q).
pub fn apply_operator(
    system: &PrepotentialSystem,
    f: &ClassicalEigenfunction,
    q: &[f64],
) -> Result<f64> {
    if f.dimension() != system.dimension() {
        return Err(Error::DimensionMismatch {
            expected: system.dimension(),
            got: f.dimension(),
        });
    }
    let grad_w = system.gradient(q)?;
    let grad_f = f.gradient(q);
    Ok(-linalg::dot(&grad_w, &grad_f))
}

/// Check the eigenvalue equation D f = eigenvalue * f on `samples` points
/// drawn around the equilibrium (seeded, so reproducible bit for bit).
pub fn verify_eigenfunction(
    system: &PrepotentialSystem,
    f: &ClassicalEigenfunction,
    samples: usize,
    seed: u64,
) -> Result<OperatorResidual> {
    let report = equilibrium::find_equilibrium(system, &system.default_guess(), 1e-12)?;
    verify_eigenfunction_at(system, f, &report, samples, seed)
}

/// Same as [`verify_eigenfunction`] with the equilibrium supplied by the
/// caller, which avoids re-running the Newton search in sweeps.
pub fn verify_eigenfunction_at(
    system: &PrepotentialSystem,
    f: &ClassicalEigenfunction,
    report: &EquilibriumReport,
    samples: usize,
    seed: u64,
) -> Result<OperatorResidual> {
    if samples == 0 {
        return Err(Error::InvalidInput(
            "verification needs at least one sample point".into(),
        ));
    }
    let points = sample_box(system, report, samples, seed)?;
    let mut max_abs_residual = 0.0f64;
    let mut normalization = 0.0f64;
    for q in &points {
        let lhs = apply_operator(system, f, q)?;
        let val = f.value(q);
        normalization = normalization.max(val.abs());
        max_abs_residual = max_abs_residual.max((lhs - f.eigenvalue() * val).abs());
    }
    Ok(OperatorResidual {
        max_abs_residual,
        normalization,
        sample_points: points,
    })
}

/// |f(qbar)|: zero (to rounding) for every nonconstant eigenfunction.
pub fn check_vanishing(f: &ClassicalEigenfunction, qbar: &[f64]) -> f64 {
    f.value(qbar).abs()
}

/// Test whether grad f at the equilibrium is an eigenvector of -hess W with
/// f's own eigenvalue. Returns the relative residual
/// |(-hess W) v - eigenvalue * v| / |v|, or [`NON_ELEMENTARY`] when v is
/// zero in scale (grad f(qbar) vanishes for non-elementary eigenfunctions).
pub fn check_gradient_eigenvector(
    system: &PrepotentialSystem,
    f: &ClassicalEigenfunction,
    report: &EquilibriumReport,
) -> Result<f64> {
    if f.dimension() != system.dimension() {
        return Err(Error::DimensionMismatch {
            expected: system.dimension(),
            got: f.dimension(),
        });
    }
    let v = f.gradient(&report.qbar);
    let vnorm = linalg::norm2(&v);
    // scale of f over the sampling box, so "zero gradient" is meaningful
    // for eigenfunctions of any overall magnitude
    let points = sample_box(system, report, 64, 42)?;
    let fscale = points
        .iter()
        .map(|q| f.value(q).abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    if vnorm < 1e-10 * fscale {
        return Ok(NON_ELEMENTARY);
    }
    let vv = DVector::from_column_slice(&v);
    let image = -(&report.hessian) * &vv;
    let residual = (&image - f.eigenvalue() * &vv).norm() / vnorm;
    Ok(residual)
}

/// Linearized elementary candidates: one linear function per normal mode,
/// phi_j(q) = v_j . (q - qbar) with eigenvalue = frequency_j.
///
/// These are exact eigenfunctions of the transport operator only when the
/// prepotential is quadratic; in general they agree with the true elementary
/// excitation to first order around the equilibrium. They still vanish at
/// qbar exactly and their gradients there are exact Hessian eigenvectors,
/// which is what [`check_vanishing`] and [`check_gradient_eigenvector`]
/// test. Treat them as seeds for mode labeling, not as verified global
/// eigenfunctions.
pub fn elementary_candidates(report: &EquilibriumReport) -> Vec<ClassicalEigenfunction> {
    let r = report.qbar.len();
    let mut out = Vec::with_capacity(r);
    for (j, (mode, freq)) in report.modes.iter().zip(&report.frequencies).enumerate() {
        let v = mode.clone();
        let qbar = report.qbar.clone();
        let grad = mode.clone();
        out.push(
            ClassicalEigenfunction::new(
                r,
                ModeLabel::Elementary(j + 1),
                freq.max(0.0), // frequencies may round to -1e-17 at machine precision
                move |q: &[f64]| {
                    q.iter()
                        .zip(&qbar)
                        .zip(&v)
                        .map(|((qi, qb), vi)| (qi - qb) * vi)
                        .sum()
                },
                move |_q: &[f64]| grad.clone(),
            )
            .expect("linear candidate is always well-formed"),
        );
    }
    out
}

/// Draw `samples` domain-interior points around the equilibrium, spread
/// along the normal modes with extent 1/sqrt(frequency) per mode. Points
/// falling outside the domain are redrawn; if more than 99% of draws get
/// rejected the domain is too tight to sample and an error is returned.
pub fn sample_box(
    system: &PrepotentialSystem,
    report: &EquilibriumReport,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let r = system.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = report
        .frequencies
        .iter()
        .map(|f| 1.0 / f.max(1e-12).sqrt())
        .collect();
    let mut points = Vec::with_capacity(samples);
    let max_draws = samples.saturating_mul(100);
    let mut drawn = 0usize;
    while points.len() < samples && drawn < max_draws {
        drawn += 1;
        let mut q = report.qbar.clone();
        for (j, scale) in scales.iter().enumerate() {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            for i in 0..r {
                q[i] += u * scale * report.modes[j][i];
            }
        }
        if system.in_domain(&q) {
            points.push(q);
        }
    }
    if points.len() < samples {
        return Err(Error::SamplingExhausted {
            rejected: drawn - points.len(),
            drawn,
        });
    }
    Ok(points)
}

/// One line of the verification report: an eigenfunction with its measured
/// residuals. `hessian_residual` is [`NON_ELEMENTARY`] for non-elementary
/// eigenfunctions (vanishing gradient at equilibrium).
#[derive(Debug, Clone, Serialize)]
pub struct VerificationRow {
    pub label: String,
    pub eigenvalue: f64,
    pub residual: f64,
    pub vanishing: f64,
    pub hessian_residual: f64,
}

/// Verify everything the system knows about: the elementary candidates from
/// the mode analysis, the registered closed-form eigenfunctions, and a few
/// of their pairwise products.
pub fn verification_rows(
    system: &PrepotentialSystem,
    samples: usize,
    seed: u64,
) -> Result<Vec<VerificationRow>> {
    let report = equilibrium::find_equilibrium(system, &system.default_guess(), 1e-12)?;
    // mode candidates are linearizations, and their rows say so; only the
    // registered closed forms are exact eigenfunctions away from qbar
    let mut subjects: Vec<(String, ClassicalEigenfunction)> =
        elementary_candidates(&report)
            .into_iter()
            .map(|f| (format!("{} (linearized)", f.label()), f))
            .collect();
    let registry = system.reference_eigenfunctions();
    subjects.extend(
        registry
            .iter()
            .map(|f| (f.label().to_string(), f.clone())),
    );
    if registry.len() >= 2 {
        for p in [
            registry[0].product(&registry[0])?,
            registry[0].product(&registry[1])?,
        ] {
            subjects.push((p.label().to_string(), p));
        }
    }
    let mut rows = Vec::with_capacity(subjects.len());
    for (label, f) in subjects {
        let check = verify_eigenfunction_at(system, &f, &report, samples, seed)?;
        rows.push(VerificationRow {
            label,
            eigenvalue: f.eigenvalue(),
            residual: check.relative(),
            vanishing: check_vanishing(&f, &report.qbar),
            hessian_residual: check_gradient_eigenvector(system, &f, &report)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::make_system;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn catalog(name: &str, params: &[(&str, f64)]) -> PrepotentialSystem {
        let map: BTreeMap<String, f64> =
            params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        make_system(name, &map).unwrap()
    }

    fn linear(eigenvalue: f64) -> ClassicalEigenfunction {
        ClassicalEigenfunction::new(
            1,
            ModeLabel::Elementary(1),
            eigenvalue,
            |q: &[f64]| q[0],
            |_q: &[f64]| vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn operator_on_linear_function_of_the_oscillator() {
        let sys = catalog("harmonic", &[("omega", 1.0)]);
        // D q = -(-q) * 1 = q
        let v = apply_operator(&sys, &linear(1.0), &[2.0]).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-14);
        // constants are annihilated
        let one = ClassicalEigenfunction::constant_unit(1);
        assert_abs_diff_eq!(apply_operator(&sys, &one, &[1.3]).unwrap(), 0.0);
    }

    #[test]
    fn operator_on_sinh_for_poschl_teller() {
        let sys = catalog("poschl_teller", &[("g", 1.0)]);
        // D sinh = g tanh * cosh = g sinh
        let f = &sys.reference_eigenfunctions()[0];
        let v = apply_operator(&sys, f, &[1.0]).unwrap();
        assert_abs_diff_eq!(v, 1.0f64.sinh(), epsilon = 1e-14);
    }

    #[test]
    fn exact_eigenfunctions_verify_to_rounding() {
        let sys = catalog("harmonic", &[("omega", 1.0)]);
        let check = verify_eigenfunction(&sys, &linear(1.0), 64, 7).unwrap();
        assert!(check.max_abs_residual < 1e-12);
        assert_eq!(check.sample_points.len(), 64);
    }

    #[test]
    fn wrong_eigenvalue_leaves_a_visible_residual() {
        let sys = catalog("harmonic", &[("omega", 1.0)]);
        let check = verify_eigenfunction(&sys, &linear(2.0), 64, 7).unwrap();
        assert!(check.relative() > 0.1);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let sys = catalog("calogero_a", &[("n", 3.0), ("omega", 1.0), ("g", 1.0)]);
        let a = verify_eigenfunction(&sys, &ClassicalEigenfunction::constant_unit(3), 16, 11)
            .unwrap();
        let b = verify_eigenfunction(&sys, &ClassicalEigenfunction::constant_unit(3), 16, 11)
            .unwrap();
        assert_eq!(a.sample_points, b.sample_points);
        let c = verify_eigenfunction(&sys, &ClassicalEigenfunction::constant_unit(3), 16, 12)
            .unwrap();
        assert_ne!(a.sample_points, c.sample_points);
    }

    #[test]
    fn products_of_registered_eigenfunctions_still_verify() {
        let sys = catalog("poschl_teller", &[("g", 1.0)]);
        let reg = sys.reference_eigenfunctions();
        let p = reg[0].product(&reg[1]).unwrap(); // sinh * sinh^2
        assert_abs_diff_eq!(p.eigenvalue(), 3.0, epsilon = 1e-14);
        let check = verify_eigenfunction(&sys, &p, 64, 3).unwrap();
        assert!(check.relative() < 1e-12, "residual {}", check.relative());
    }

    #[test]
    fn nonconstant_eigenfunctions_vanish_at_equilibrium() {
        let sys = catalog("harmonic", &[("omega", 1.0)]);
        assert_abs_diff_eq!(check_vanishing(&linear(1.0), &[0.0]), 0.0);
        for f in sys.reference_eigenfunctions() {
            assert!(check_vanishing(f, &[0.0]) < 1e-10, "{}", f.label());
        }
        let one = ClassicalEigenfunction::constant_unit(1);
        assert_abs_diff_eq!(check_vanishing(&one, &[0.0]), 1.0);
    }

    #[test]
    fn gradient_eigenvector_check_distinguishes_elementary_from_composite() {
        let sys = catalog("harmonic", &[("omega", 1.0)]);
        let report =
            equilibrium::find_equilibrium(&sys, &sys.default_guess(), 1e-12).unwrap();
        // q is elementary: its gradient (1) is an eigenvector of -hess W = (omega)
        let r = check_gradient_eigenvector(&sys, &linear(1.0), &report).unwrap();
        assert!(r >= 0.0 && r < 1e-12);
        // q^2 is not: gradient vanishes at the origin
        let reg = sys.reference_eigenfunctions();
        let r2 = check_gradient_eigenvector(&sys, &reg[1], &report).unwrap();
        assert_eq!(r2, NON_ELEMENTARY);
    }

    #[test]
    fn elementary_candidates_verify_for_the_three_body_chain() {
        let sys = catalog("calogero_a", &[("n", 3.0), ("omega", 1.0), ("g", 1.0)]);
        let report =
            equilibrium::find_equilibrium(&sys, &sys.default_guess(), 1e-12).unwrap();
        let candidates = elementary_candidates(&report);
        assert_eq!(candidates.len(), 3);
        for (j, f) in candidates.iter().enumerate() {
            assert_abs_diff_eq!(f.eigenvalue(), (j + 1) as f64, epsilon = 1e-9);
            // The candidates are linearizations, so the operator residual away
            // from qbar is nonzero here; what holds exactly is the behavior at
            // the equilibrium itself: they vanish there and their gradients
            // are eigenvectors of -hess W with the right eigenvalue.
            assert_abs_diff_eq!(check_vanishing(f, &report.qbar), 0.0, epsilon = 1e-15);
            let r = check_gradient_eigenvector(&sys, f, &report).unwrap();
            assert!(
                (0.0..1e-10).contains(&r),
                "candidate {j} hessian residual {r}"
            );
        }
    }

    #[test]
    fn sampling_a_closed_domain_slot_fails_loudly() {
        // domain so tight around the guess that the sampler cannot fill it
        let sys = crate::systems::PrepotentialSystem::builder("slit", 1, |q: &[f64]| {
            -0.5 * q[0] * q[0]
        })
        .gradient(|q: &[f64]| vec![-q[0]])
        .hessian(|_q: &[f64]| nalgebra::DMatrix::from_element(1, 1, -1.0))
        .domain(|q: &[f64]| q[0].abs() < 1e-3)
        .default_guess(vec![0.0])
        .build()
        .unwrap();
        let f = linear(1.0);
        assert!(matches!(
            verify_eigenfunction(&sys, &f, 64, 1),
            Err(Error::SamplingExhausted { .. })
        ));
    }

    #[test]
    fn verification_rows_cover_candidates_registry_and_products() {
        let sys = catalog("harmonic", &[("omega", 1.0)]);
        let rows = verification_rows(&sys, 32, 9).unwrap();
        // 1 candidate + 8 registered + 2 products
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[0].label, "elementary-1 (linearized)");
        assert_eq!(rows[1].label, "elementary-1");
        assert_eq!(rows[2].label, "(2)");
        for row in &rows {
            assert!(
                row.residual < 1e-9,
                "{} residual {}",
                row.label,
                row.residual
            );
        }
    }
}
