//! Helpers shared by the integration-test targets.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use prepotential::systems::{make_system, PrepotentialSystem};

pub fn system(name: &str, params: &[(&str, f64)]) -> PrepotentialSystem {
    let map: BTreeMap<String, f64> =
        params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    make_system(name, &map).unwrap()
}

pub fn calogero(n: usize, omega: f64, g: f64) -> PrepotentialSystem {
    system(
        "calogero_a",
        &[("n", n as f64), ("omega", omega), ("g", g)],
    )
}

/// Hessian of W from second central differences of W alone; never calls
/// the analytic gradient or Hessian, so it serves as an independent check
/// on both.
pub fn fd_hessian_of_w(system: &PrepotentialSystem, q: &[f64], h: f64) -> DMatrix<f64> {
    let n = q.len();
    let w = |point: &[f64]| system.prepotential(point).unwrap();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                let mut plus = q.to_vec();
                let mut minus = q.to_vec();
                plus[i] += h;
                minus[i] -= h;
                m[(i, i)] = (w(&plus) - 2.0 * w(q) + w(&minus)) / (h * h);
            } else if i < j {
                let mut pp = q.to_vec();
                let mut pm = q.to_vec();
                let mut mp = q.to_vec();
                let mut mm = q.to_vec();
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                let v = (w(&pp) - w(&pm) - w(&mp) + w(&mm)) / (4.0 * h * h);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    m
}

/// Eigenvalues of -(FD Hessian of W), ascending: the oracle frequencies.
pub fn fd_mode_frequencies(system: &PrepotentialSystem, qbar: &[f64]) -> Vec<f64> {
    let fd = fd_hessian_of_w(system, qbar, 1e-4);
    let mut eigs: Vec<f64> = (-fd).symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    eigs
}
