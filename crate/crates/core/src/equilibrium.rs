//! Equilibrium location and normal-mode analysis.
//!
//! The classical ground configuration maximizes the prepotential W, i.e.
//! solves grad W = 0 with negative-definite Hessian. A damped Newton
//! iteration on grad W with a line search on |grad W|^2 finds it; the
//! normal-mode frequencies are the eigenvalues of -hess W there, and they
//! are cross-checked against the curvature of the classical potential,
//! whose Hessian at equilibrium must equal (hess W)^2.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::systems::PrepotentialSystem;

const MAX_ITERATIONS: usize = 200;
const STATIONARY_LIMIT: f64 = 1e-8;
const CURVATURE_LIMIT: f64 = 1e-6;

/// Equilibrium point with its mode structure. `frequencies` are the
/// eigenvalues of -hess W at `qbar`, ascending; `modes` the matching
/// orthonormal eigenvectors.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub qbar: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub grad_norm: f64,
    /// hess W at qbar (not serialized; reconstructible from modes).
    #[serde(skip)]
    pub hessian: DMatrix<f64>,
    /// Worst relative deviation of the classical-potential curvature
    /// eigenvalues from the squared frequencies.
    #[serde(skip)]
    pub curvature_residual: f64,
}

/// Damped Newton search for grad W = 0 starting from `guess`, stopping at
/// |grad W| <= tol. Steps are clipped away from the domain boundary and
/// accepted only when they shrink |grad W|^2.
pub fn find_equilibrium(
    system: &PrepotentialSystem,
    guess: &[f64],
    tol: f64,
) -> Result<EquilibriumReport> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidInput(format!(
            "equilibrium tolerance must be positive and finite, got {tol}"
        )));
    }
    system.check_domain(guess)?;

    let mut q = guess.to_vec();
    let mut grad = system.gradient(&q)?;
    let mut gnorm = linalg::norm2(&grad);
    let mut best = (q.clone(), gnorm);

    for _ in 0..MAX_ITERATIONS {
        if gnorm <= tol {
            return normal_modes(system, &q);
        }
        let hess = system.hessian(&q)?;
        // Newton direction: hess * d = -grad. A singular Hessian falls back
        // to steepest descent on the merit function |grad|^2 / 2, whose
        // gradient is hess * grad.
        let newton = hess
            .clone()
            .lu()
            .solve(&(-DVector::from_column_slice(&grad)));
        let directions: Vec<Vec<f64>> = match newton {
            Some(d) if d.iter().all(|x| x.is_finite()) => {
                let fallback = -(&hess * DVector::from_column_slice(&grad));
                vec![d.iter().copied().collect(), fallback.iter().copied().collect()]
            }
            _ => {
                let fallback = -(&hess * DVector::from_column_slice(&grad));
                vec![fallback.iter().copied().collect()]
            }
        };

        let mut advanced = false;
        for d in directions {
            let mut t = 1.0f64;
            if let Some(t_max) = system.step_limit(&q, &d) {
                t = t.min(t_max);
            }
            // backtracking: into the domain first, then monotone decrease
            for _ in 0..60 {
                let trial: Vec<f64> = q.iter().zip(&d).map(|(x, dx)| x + t * dx).collect();
                if system.in_domain(&trial) {
                    let tg = system.gradient(&trial)?;
                    let tn = linalg::norm2(&tg);
                    if tn < gnorm {
                        q = trial;
                        grad = tg;
                        gnorm = tn;
                        advanced = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if advanced {
                break;
            }
        }
        if !advanced {
            break; // stalled: no direction shrinks the gradient
        }
        if gnorm < best.1 {
            best = (q.clone(), gnorm);
        }
    }

    if gnorm <= tol {
        return normal_modes(system, &q);
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        best: best.0,
        grad_norm: best.1,
    })
}

/// Mode analysis at an already-located stationary point.
///
/// Fails if `qbar` is not stationary to 1e-8, if -hess W has a negative
/// eigenvalue (the point is not a maximum of W), or if the independent
/// curvature cross-check against the classical potential disagrees.
pub fn normal_modes(system: &PrepotentialSystem, qbar: &[f64]) -> Result<EquilibriumReport> {
    let grad = system.gradient(qbar)?;
    let grad_norm = linalg::norm2(&grad);
    if grad_norm > STATIONARY_LIMIT {
        return Err(Error::NotStationary {
            grad_norm,
            limit: STATIONARY_LIMIT,
        });
    }
    let hessian = system.hessian(qbar)?;
    let (frequencies, modes) = linalg::symmetric_eigen_sorted(&(-&hessian));
    let freq_scale = frequencies.iter().fold(0.0f64, |a, &f| a.max(f.abs()));
    if frequencies[0] < -1e-10 * freq_scale.max(1.0) {
        return Err(Error::NotAMaximum {
            point: qbar.to_vec(),
            min_frequency: frequencies[0],
        });
    }

    // Independent curvature check: the classical potential V_C = |grad W|^2/2
    // must curve like (hess W)^2 at the stationary point, so its Hessian
    // eigenvalues have to match the squared frequencies.
    let vc_hessian = classical_potential_hessian(system, qbar)?;
    let (vc_eigs, _) = linalg::symmetric_eigen_sorted(&vc_hessian);
    let scale = frequencies
        .iter()
        .map(|f| f * f)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut curvature_residual = 0.0f64;
    for (f, v) in frequencies.iter().zip(&vc_eigs) {
        curvature_residual = curvature_residual.max((f * f - v).abs() / scale);
    }
    if curvature_residual > CURVATURE_LIMIT {
        return Err(Error::CurvatureMismatch {
            residual: curvature_residual,
        });
    }

    Ok(EquilibriumReport {
        qbar: qbar.to_vec(),
        frequencies,
        modes,
        grad_norm,
        hessian,
        curvature_residual,
    })
}

/// Hessian of V_C by central differences of its analytic gradient
/// hess W . grad W (so the check shares no code path with -hess W's eigen
/// decomposition beyond the Hessian evaluations themselves).
fn classical_potential_hessian(
    system: &PrepotentialSystem,
    q: &[f64],
) -> Result<DMatrix<f64>> {
    let r = system.dimension();
    let mut m = DMatrix::zeros(r, r);
    let mut p = q.to_vec();
    for j in 0..r {
        let h = crate::systems::fd_step(q[j]);
        p[j] = q[j] + h;
        let gp = system.classical_potential_gradient(&p)?;
        p[j] = q[j] - h;
        let gm = system.classical_potential_gradient(&p)?;
        p[j] = q[j];
        for i in 0..r {
            m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    let mt = m.transpose();
    Ok((m + mt) * 0.5)
}
