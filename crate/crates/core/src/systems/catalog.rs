//! Built-in systems: harmonic, poschl_teller, calogero_a.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::systems::{ClassicalEigenfunction, ModeLabel, PrepotentialSystem};

/// Construct a catalog system from a parameter map. Parameter sets are
/// strict: every required key must be present and no unknown keys are
/// accepted, so typos fail loudly instead of silently using defaults.
pub fn make_system(name: &str, params: &BTreeMap<String, f64>) -> Result<PrepotentialSystem> {
    match name {
        "harmonic" => {
            expect_keys(name, params, &["omega"])?;
            harmonic(required(name, params, "omega")?)
        }
        "poschl_teller" => {
            expect_keys(name, params, &["g"])?;
            poschl_teller(required(name, params, "g")?)
        }
        "calogero_a" => {
            expect_keys(name, params, &["g", "n", "omega"])?;
            let n = required(name, params, "n")?;
            if n.fract() != 0.0 || !(n >= 2.0) || n > 64.0 {
                return Err(Error::InvalidParameter(format!(
                    "calogero_a particle count `n` must be an integer in 2..=64, got {n}"
                )));
            }
            calogero_a(
                n as usize,
                required(name, params, "omega")?,
                required(name, params, "g")?,
            )
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

fn required(system: &str, params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| {
        Error::InvalidParameter(format!("system `{system}` requires parameter `{key}`"))
    })
}

fn expect_keys(system: &str, params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidParameter(format!(
                "unexpected parameter `{key}` for system `{system}` (expected {allowed:?})"
            )));
        }
    }
    Ok(())
}

fn positive(name: &str, key: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter(format!(
            "system `{name}` requires `{key}` > 0, got {value}"
        )))
    }
}

/// One-dimensional oscillator, W(q) = -omega q^2 / 2.
///
/// Equilibrium at the origin with the single frequency omega; the transport
/// operator has eigenfunctions omega^(n/2) q^n with eigenvalues n*omega, and
/// the full spectrum is E_n = n hbar omega on top of a zero ground level.
pub fn harmonic(omega: f64) -> Result<PrepotentialSystem> {
    let omega = positive("harmonic", "omega", omega)?;
    let mut builder = PrepotentialSystem::builder("harmonic", 1, move |q: &[f64]| {
        -0.5 * omega * q[0] * q[0]
    })
    .param("omega", omega)
    .gradient(move |q: &[f64]| vec![-omega * q[0]])
    .hessian(move |_q: &[f64]| DMatrix::from_element(1, 1, -omega))
    .default_guess(vec![0.0])
    .reference_spectrum(move |occ: &[usize], hbar: f64| {
        if occ.len() != 1 {
            return None;
        }
        Some(occ[0] as f64 * hbar * omega)
    });
    for n in 1..=8usize {
        let amp = omega.powf(n as f64 / 2.0);
        let nf = n as f64;
        builder = builder.eigenfunction(ClassicalEigenfunction::new(
            1,
            if n == 1 {
                ModeLabel::Elementary(1)
            } else {
                ModeLabel::Monomial(vec![n])
            },
            nf * omega,
            move |q: &[f64]| amp * q[0].powi(n as i32),
            move |q: &[f64]| vec![amp * nf * q[0].powi(n as i32 - 1)],
        )?);
    }
    builder.build()
}

/// Numerically stable log(cosh(x)).
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// One-dimensional well with W(q) = -g log cosh q.
///
/// The quantum potential is the sech^2 well shifted so the lowest level sits
/// at zero; only finitely many levels fit below the flat asymptote g^2/2,
/// which is where `bound_state_count` comes from. Transport eigenfunctions
/// are g^n sinh^n q with eigenvalues n*g.
pub fn poschl_teller(g: f64) -> Result<PrepotentialSystem> {
    let g = positive("poschl_teller", "g", g)?;
    let mut builder = PrepotentialSystem::builder("poschl_teller", 1, move |q: &[f64]| {
        -g * ln_cosh(q[0])
    })
    .param("g", g)
    .gradient(move |q: &[f64]| vec![-g * q[0].tanh()])
    .hessian(move |q: &[f64]| {
        let c = q[0].cosh();
        DMatrix::from_element(1, 1, -g / (c * c))
    })
    .default_guess(vec![0.0])
    .bound_state_count(move |hbar: f64| {
        // discrete levels require g/hbar - n > 0
        let ratio = g / hbar;
        if ratio <= 0.0 {
            0
        } else if ratio.fract() == 0.0 {
            ratio as usize
        } else {
            ratio.floor() as usize + 1
        }
    })
    .reference_spectrum(move |occ: &[usize], hbar: f64| {
        if occ.len() != 1 {
            return None;
        }
        let n = occ[0] as f64;
        if g / hbar - n <= 0.0 {
            return None; // continuum: no discrete level here
        }
        Some(g * n * hbar - 0.5 * n * n * hbar * hbar)
    });
    for n in 1..=8usize {
        let amp = g.powi(n as i32);
        let nf = n as f64;
        builder = builder.eigenfunction(ClassicalEigenfunction::new(
            1,
            if n == 1 {
                ModeLabel::Elementary(1)
            } else {
                ModeLabel::Monomial(vec![n])
            },
            nf * g,
            move |q: &[f64]| amp * q[0].sinh().powi(n as i32),
            move |q: &[f64]| {
                vec![amp * nf * q[0].sinh().powi(n as i32 - 1) * q[0].cosh()]
            },
        )?);
    }
    builder.build()
}

/// N particles on a line with harmonic confinement and pairwise logarithmic
/// repulsion in the prepotential:
///
///   W(q) = -(omega/2) sum_j q_j^2 + g sum_{j<k} log(q_k - q_j)
///
/// restricted to the ordered sector q_1 < q_2 < ... < q_N. The equilibrium
/// is the scaled root pattern of an N-th Hermite-type polynomial and the
/// normal-mode frequencies come out as omega, 2 omega, ..., N omega
/// independently of g; level energies are hbar omega times weighted
/// occupation sums, which is what the reference spectrum returns.
pub fn calogero_a(n: usize, omega: f64, g: f64) -> Result<PrepotentialSystem> {
    if !(2..=64).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "calogero_a particle count must be in 2..=64, got {n}"
        )));
    }
    let omega = positive("calogero_a", "omega", omega)?;
    let g = positive("calogero_a", "g", g)?;

    let scale = (g / omega).sqrt();
    let guess: Vec<f64> = (0..n)
        .map(|j| scale * (j as f64 - 0.5 * (n as f64 - 1.0)))
        .collect();

    PrepotentialSystem::builder("calogero_a", n, move |q: &[f64]| {
        let mut w = 0.0;
        for j in 0..q.len() {
            w -= 0.5 * omega * q[j] * q[j];
            for k in j + 1..q.len() {
                w += g * (q[k] - q[j]).ln();
            }
        }
        w
    })
    .param("n", n as f64)
    .param("omega", omega)
    .param("g", g)
    .gradient(move |q: &[f64]| {
        let r = q.len();
        let mut out = vec![0.0; r];
        for j in 0..r {
            let mut s = -omega * q[j];
            for k in 0..r {
                if k != j {
                    s += g / (q[j] - q[k]);
                }
            }
            out[j] = s;
        }
        out
    })
    .hessian(move |q: &[f64]| {
        let r = q.len();
        let mut m = DMatrix::zeros(r, r);
        for j in 0..r {
            let mut diag = -omega;
            for k in 0..r {
                if k != j {
                    let inv2 = 1.0 / ((q[j] - q[k]) * (q[j] - q[k]));
                    diag -= g * inv2;
                    m[(j, k)] = g * inv2;
                }
            }
            m[(j, j)] = diag;
        }
        m
    })
    .domain(|q: &[f64]| q.windows(2).all(|w| w[0] < w[1]))
    .default_guess(guess)
    .step_limit(|q: &[f64], dq: &[f64]| {
        // first collision time of adjacent pairs along dq; half of it is safe
        let mut t_hit = f64::INFINITY;
        for j in 0..q.len() - 1 {
            let gap = q[j + 1] - q[j];
            let rate = dq[j + 1] - dq[j];
            if rate < 0.0 {
                t_hit = t_hit.min(-gap / rate);
            }
        }
        if t_hit.is_finite() {
            Some(0.5 * t_hit)
        } else {
            None
        }
    })
    .reference_spectrum(move |occ: &[usize], hbar: f64| {
        if occ.len() != n {
            return None;
        }
        let weighted: f64 = occ
            .iter()
            .enumerate()
            .map(|(j, &nj)| (j as f64 + 1.0) * nj as f64)
            .sum();
        Some(hbar * omega * weighted)
    })
    .build()
}
