//! 1D quantum spectra on a uniform grid.
//!
//! The Hamiltonian -(hbar^2/2) d^2/dq^2 + V(q) is discretized with the
//! standard second-order three-point stencil on [qbar - L, qbar + L] with
//! Dirichlet walls, giving a symmetric tridiagonal matrix. The lowest
//! eigenvalues come from Sturm bisection, eigenvectors from inverse
//! iteration. By construction of V the exact ground energy is 0, so E_0 is
//! a free accuracy meter: it should sit within the per-level discretization
//! estimate (hbar^2 h^2 / 24) <psi| d^4 |psi>.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, EquilibriumReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::systems::PrepotentialSystem;

/// Default relative tolerance used by the convergence loop.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Relative edge amplitude above which a box is considered too small.
const TRUNCATION_LIMIT: f64 = 1e-10;

/// Maximum number of refinement rounds in [`converge_spectrum`].
const MAX_DOUBLINGS: usize = 6;

/// Grid request: box half-width around the equilibrium, interior point
/// count, and how many levels to report (the ground level counts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
    pub levels: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize, levels: usize) -> Result<Self> {
        let spec = GridSpec {
            half_width,
            points,
            levels,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "half_width must be positive and finite, got {}",
                self.half_width
            )));
        }
        if self.levels == 0 {
            return Err(Error::InvalidGrid("levels must be at least 1".into()));
        }
        if self.points < 16 * self.levels {
            return Err(Error::InvalidGrid(format!(
                "{} points cannot resolve {} levels (need at least 16 per level)",
                self.points, self.levels
            )));
        }
        if self.points > 8_000_000 {
            return Err(Error::InvalidGrid(format!(
                "{} points exceeds the 8e6 cap",
                self.points
            )));
        }
        Ok(())
    }
}

/// Trust marker per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelFlag {
    /// A genuine discrete level of the continuum problem.
    Trusted,
    /// At or above the continuum threshold: the grid reports a box state
    /// whose energy is an artifact of the walls.
    Continuum,
}

/// Where a spectrum table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    Grid,
    Reference,
}

/// Energies of the lowest levels at one value of hbar, with the metadata
/// needed to judge them.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumTable {
    pub system: String,
    pub hbar: f64,
    pub source: SpectrumSource,
    pub grid: Option<GridSpec>,
    pub energies: Vec<f64>,
    pub flags: Vec<LevelFlag>,
    /// Discretization-error estimate per level, from the fourth difference
    /// of the computed eigenvector.
    pub error_estimates: Vec<f64>,
    /// Overlap of the computed ground state with exp((W - W(qbar))/hbar).
    pub ground_state_overlap: f64,
    /// Worst relative wavefunction amplitude at the box edge over trusted
    /// levels.
    pub boundary_amplitude: f64,
    /// True when `boundary_amplitude` exceeds the truncation limit.
    pub truncation_warning: bool,
}

impl SpectrumTable {
    pub fn is_trusted(&self, level: usize) -> bool {
        self.flags.get(level) == Some(&LevelFlag::Trusted)
    }
}

/// Solve on the given grid. One-dimensional systems only.
pub fn solve_spectrum(
    system: &PrepotentialSystem,
    hbar: f64,
    grid: &GridSpec,
) -> Result<SpectrumTable> {
    let report = equilibrium_for_grid(system)?;
    solve_with_equilibrium(system, hbar, grid, &report)
}

fn equilibrium_for_grid(system: &PrepotentialSystem) -> Result<EquilibriumReport> {
    if system.dimension() != 1 {
        return Err(Error::NotOneDimensional {
            context: "the grid solver",
            dimension: system.dimension(),
        });
    }
    equilibrium::find_equilibrium(system, &system.default_guess(), 1e-12)
}

pub(crate) fn solve_with_equilibrium(
    system: &PrepotentialSystem,
    hbar: f64,
    grid: &GridSpec,
    report: &EquilibriumReport,
) -> Result<SpectrumTable> {
    grid.validate()?;
    if !(hbar > 0.0) || !hbar.is_finite() {
        return Err(Error::InvalidInput(format!(
            "hbar must be positive and finite, got {hbar}"
        )));
    }
    let qbar = report.qbar[0];
    let m = grid.points;
    let h = 2.0 * grid.half_width / (m as f64 + 1.0);
    let kinetic = hbar * hbar / (h * h);

    let mut qs = Vec::with_capacity(m);
    let mut diag = Vec::with_capacity(m);
    for i in 0..m {
        let q = qbar - grid.half_width + (i as f64 + 1.0) * h;
        diag.push(kinetic + system.quantum_potential(&[q], hbar)?);
        qs.push(q);
    }
    let off = vec![-0.5 * kinetic; m - 1];

    let energies = linalg::lowest_eigenvalues(&diag, &off, grid.levels);

    let bound_count = system.bound_state_count(hbar);
    let flags: Vec<LevelFlag> = (0..grid.levels)
        .map(|n| match bound_count {
            Some(c) if n >= c => LevelFlag::Continuum,
            _ => LevelFlag::Trusted,
        })
        .collect();

    // reference ground-state profile exp((W - W(qbar))/hbar)
    let wbar = system.prepotential(&[qbar])?;
    let mut psi_ref = Vec::with_capacity(m);
    for q in &qs {
        let w = system.prepotential(&[*q])?;
        psi_ref.push(((w - wbar) / hbar).exp());
    }

    let mut error_estimates = Vec::with_capacity(grid.levels);
    let mut ground_state_overlap = 0.0;
    let mut boundary_amplitude = 0.0f64;
    for (n, &lambda) in energies.iter().enumerate() {
        let v = linalg::tridiagonal_eigenvector(&diag, &off, lambda);
        error_estimates.push(fourth_difference_estimate(&v, hbar, h));
        if n == 0 {
            let denom = linalg::norm2(&v) * linalg::norm2(&psi_ref);
            ground_state_overlap = if denom > 0.0 {
                linalg::dot(&v, &psi_ref).abs() / denom
            } else {
                0.0
            };
        }
        if flags[n] == LevelFlag::Trusted {
            let peak = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            if peak > 0.0 {
                let edge = v[0].abs().max(v[m - 1].abs()) / peak;
                boundary_amplitude = boundary_amplitude.max(edge);
            }
        }
    }

    Ok(SpectrumTable {
        system: system.name().to_string(),
        hbar,
        source: SpectrumSource::Grid,
        grid: Some(grid.clone()),
        energies,
        flags,
        error_estimates,
        ground_state_overlap,
        boundary_amplitude,
        truncation_warning: boundary_amplitude > TRUNCATION_LIMIT,
    })
}

/// (hbar^2 h^2 / 24) |<v| D4 |v>| / <v|v> with D4 the fourth difference and
/// Dirichlet ghosts: the leading discretization error of the energy.
fn fourth_difference_estimate(v: &[f64], hbar: f64, h: f64) -> f64 {
    let m = v.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i >= m as isize {
            0.0
        } else {
            v[i as usize]
        }
    };
    let mut acc = 0.0;
    let mut nrm = 0.0;
    for i in 0..m as isize {
        let d4 = at(i - 2) - 4.0 * at(i - 1) + 6.0 * at(i) - 4.0 * at(i + 1) + at(i + 2);
        acc += at(i) * d4;
        nrm += at(i) * at(i);
    }
    if nrm == 0.0 {
        return 0.0;
    }
    // d4/h^4 approximates the fourth derivative; two h^2 cancel
    hbar * hbar / (24.0 * h * h) * (acc / nrm).abs()
}

/// Refine the grid until the spectrum is converged: point density doubles
/// each round (the box also grows 1.5x whenever a trusted level leaks into
/// the walls), and the run stops once the estimated remaining error of every
/// trusted level drops below max(1e-12, rel_tol * scale), where the scale is
/// the larger of the spectrum's top energy and one quantum hbar*frequency.
/// The remaining error of the finer grid is |Delta E| / 3, the Richardson
/// remainder of a second-order stencil. Fails after six density doublings.
pub fn converge_spectrum(
    system: &PrepotentialSystem,
    hbar: f64,
    base: &GridSpec,
    rel_tol: f64,
) -> Result<SpectrumTable> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "rel_tol must lie in (0, 1), got {rel_tol}"
        )));
    }
    base.validate()?;
    let report = equilibrium_for_grid(system)?;
    let f_min = report.frequencies[0];

    let mut half_width = base.half_width;
    let mut density = base.points as f64 / (2.0 * base.half_width);
    let mut prev: Option<SpectrumTable> = None;

    for round in 0..=MAX_DOUBLINGS {
        let points = (2.0 * half_width * density).ceil() as usize;
        let grid = GridSpec {
            half_width,
            points: points.max(16 * base.levels),
            levels: base.levels,
        };
        if grid.points > 8_000_000 {
            return Err(Error::SpectrumNotConverged {
                doublings: round,
                diagnostics: format!(
                    "refinement would need {} points (cap 8e6) at half_width {:.3}",
                    grid.points, half_width
                ),
            });
        }
        let table = solve_with_equilibrium(system, hbar, &grid, &report)?;

        if let Some(p) = &prev {
            let scale = table
                .energies
                .iter()
                .zip(&table.flags)
                .filter(|(_, f)| **f == LevelFlag::Trusted)
                .map(|(e, _)| e.abs())
                .fold(0.0f64, f64::max)
                .max(hbar * f_min);
            let threshold = (rel_tol * scale).max(1e-12);
            let converged = table
                .energies
                .iter()
                .zip(&p.energies)
                .zip(&table.flags)
                .filter(|(_, f)| **f == LevelFlag::Trusted)
                .all(|((e, pe), _)| (e - pe).abs() / 3.0 <= threshold);
            if converged && !table.truncation_warning {
                return Ok(table);
            }
        }

        if table.truncation_warning {
            half_width *= 1.5;
        }
        density *= 2.0;
        prev = Some(table);
    }

    let last = prev.expect("at least one solve ran");
    Err(Error::SpectrumNotConverged {
        doublings: MAX_DOUBLINGS,
        diagnostics: format!(
            "last grid ({} points, half_width {:.3}) still moving; \
             truncation_warning = {}",
            last.grid.as_ref().map(|g| g.points).unwrap_or(0),
            half_width,
            last.truncation_warning
        ),
    })
}

/// Half-width at which the ground-state profile exp((W - W(qbar))/hbar)
/// falls below 1e-12 on both sides, plus one unit of margin.
pub fn suggest_half_width(system: &PrepotentialSystem, hbar: f64) -> Result<f64> {
    if !(hbar > 0.0) || !hbar.is_finite() {
        return Err(Error::InvalidInput(format!(
            "hbar must be positive and finite, got {hbar}"
        )));
    }
    let report = equilibrium_for_grid(system)?;
    let qbar = report.qbar[0];
    let wbar = system.prepotential(&[qbar])?;
    let drop = hbar * (1e-12f64).ln(); // W - W(qbar) below this ⇒ profile < 1e-12
    let mut reach = 0.0f64;
    for side in [-1.0, 1.0] {
        let mut t = 0.25;
        while t < 1e4 {
            let q = qbar + side * t;
            if !system.in_domain(&[q]) {
                break; // domain wall: the box cannot extend past it
            }
            if system.prepotential(&[q])? - wbar < drop {
                break;
            }
            t += 0.25;
        }
        if t >= 1e4 {
            return Err(Error::InvalidInput(
                "prepotential decays too slowly to choose a finite box".into(),
            ));
        }
        reach = reach.max(t);
    }
    Ok(reach + 1.0)
}

/// A sensible starting grid: box from [`suggest_half_width`], point density
/// set so six density doublings reach the default 1e-8 relative accuracy on
/// the highest requested level (estimated through its local wavenumber).
pub fn default_grid(
    system: &PrepotentialSystem,
    hbar: f64,
    levels: usize,
) -> Result<GridSpec> {
    if levels == 0 {
        return Err(Error::InvalidGrid("levels must be at least 1".into()));
    }
    let report = equilibrium_for_grid(system)?;
    let half_width = suggest_half_width(system, hbar)?;
    let f = report.frequencies[0];
    let quantum = hbar * f;
    // crude overestimate of the top level's energy, harmonic-style
    let e_top = (quantum * levels as f64).max(quantum);
    let v_min = system.quantum_potential(&report.qbar, hbar)?;
    let k_top = (2.0 * (e_top - v_min).max(quantum)).sqrt() / hbar;
    // choose h so that (hbar^2 h^2 / 24) k^4 reaches rel_tol*quantum after
    // six fourfold error reductions
    let h_acc = (24.0 * 4096.0 * DEFAULT_REL_TOL * quantum
        / (hbar * hbar * k_top.powi(4)))
    .sqrt();
    let points = ((2.0 * half_width / h_acc).ceil() as usize)
        .max(2048)
        .max(16 * levels)
        .min(131_072);
    GridSpec::new(half_width, points, levels)
}
