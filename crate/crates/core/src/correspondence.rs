//! The classical-quantum correspondence pipeline.
//!
//! For each level n the energies E_n(hbar) from a sweep of hbar values are
//! fitted with a*hbar + b*hbar^2 through the origin; the linear coefficient
//! a is the level's classical eigenvalue, and it must decompose as a
//! non-negative integer combination of the normal-mode frequencies. The
//! pipeline runs the whole chain: equilibrium, modes, spectra (grid-solved
//! for one-dimensional systems, closed-form reference tables otherwise),
//! fits, and decompositions.

use serde::Serialize;

use crate::equilibrium::{self, EquilibriumReport};
use crate::error::{Error, Result};
use crate::quantum::{self, GridSpec, LevelFlag, SpectrumSource, SpectrumTable};
use crate::systems::PrepotentialSystem;

/// Least-squares fit of E(hbar) = value*hbar + curvature*hbar^2.
#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueFit {
    pub value: f64,
    pub curvature: f64,
    pub rms_residual: f64,
    /// Set when the fit residual dwarfs the discretization estimates of the
    /// input tables, i.e. E(hbar) is visibly not linear-plus-quadratic.
    pub ill_fit: bool,
}

/// Fit a*hbar + b*hbar^2 through the given (hbar, E) points.
pub fn fit_linear_coefficient(points: &[(f64, f64)]) -> Result<EigenvalueFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "the hbar fit needs at least 3 sweep points, got {}",
            points.len()
        )));
    }
    for (h, _) in points {
        if !(h.is_finite() && *h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sweep values must be positive and finite, got {h}"
            )));
        }
    }
    let (mut s2, mut s3, mut s4, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(h, e) in points {
        let h2 = h * h;
        s2 += h2;
        s3 += h2 * h;
        s4 += h2 * h2;
        t1 += e * h;
        t2 += e * h2;
    }
    let det = s2 * s4 - s3 * s3;
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::InvalidInput(
            "hbar sweep values must be distinct".into(),
        ));
    }
    let value = (t1 * s4 - t2 * s3) / det;
    let curvature = (t2 * s2 - t1 * s3) / det;
    let mut ss = 0.0;
    for &(h, e) in points {
        let r = e - value * h - curvature * h * h;
        ss += r * r;
    }
    Ok(EigenvalueFit {
        value,
        curvature,
        rms_residual: (ss / points.len() as f64).sqrt(),
        ill_fit: false,
    })
}

/// Extract the classical eigenvalue of one level from spectrum tables at
/// three or more distinct hbar. The level must be trusted in every table.
pub fn extrapolate_classical_eigenvalue(
    tables: &[SpectrumTable],
    level: usize,
) -> Result<EigenvalueFit> {
    if tables.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "extrapolation needs at least 3 spectrum tables, got {}",
            tables.len()
        )));
    }
    let name = &tables[0].system;
    let mut points = Vec::with_capacity(tables.len());
    let mut worst_estimate = 0.0f64;
    for t in tables {
        if &t.system != name {
            return Err(Error::InvalidInput(format!(
                "tables mix systems `{name}` and `{}`",
                t.system
            )));
        }
        if level >= t.energies.len() || !t.is_trusted(level) {
            return Err(Error::InvalidInput(format!(
                "level {level} is not a trusted level of every table (hbar = {})",
                t.hbar
            )));
        }
        points.push((t.hbar, t.energies[level]));
        worst_estimate = worst_estimate.max(
            t.error_estimates
                .get(level)
                .copied()
                .unwrap_or(0.0),
        );
    }
    let mut fit = fit_linear_coefficient(&points)?;
    // a clean quadratic model should fit to within the grid error budget
    fit.ill_fit = fit.rms_residual > 10.0 * worst_estimate.max(1e-13);
    Ok(fit)
}

/// Result of decomposing a classical eigenvalue over mode frequencies.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    /// The occupation numbers, when a combination within tolerance exists.
    pub occupations: Option<Vec<usize>>,
    /// |target - sum n_j f_j| for the best combination found.
    pub residual: f64,
    /// Number of combinations within tolerance (1 unless degenerate).
    pub degeneracy: usize,
}

/// Find non-negative integers n_j with sum n_j f_j as close to `target` as
/// possible, bounded by sum n_j <= max_total. Among equal residuals the
/// smallest total occupation wins, then the lexicographically largest
/// vector. `degeneracy` counts all combinations within `tol`.
pub fn decompose(
    target: f64,
    frequencies: &[f64],
    tol: f64,
    max_total: usize,
) -> Result<Decomposition> {
    if frequencies.is_empty() {
        return Err(Error::InvalidInput(
            "decomposition needs at least one frequency".into(),
        ));
    }
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::InvalidInput(format!(
            "decomposition tolerance must be non-negative, got {tol}"
        )));
    }
    if !target.is_finite() {
        return Err(Error::InvalidInput(format!(
            "decomposition target must be finite, got {target}"
        )));
    }
    for f in frequencies {
        if !(f.is_finite() && *f > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mode frequencies must be positive, got {f}"
            )));
        }
    }

    struct Search<'a> {
        freqs: &'a [f64],
        target: f64,
        tol: f64,
        best: (f64, usize, Vec<usize>), // residual, total, occupations
        within_tol: usize,
        stack: Vec<usize>,
    }

    impl Search<'_> {
        fn visit(&mut self, index: usize, budget: usize, partial: f64) {
            // every completion only adds energy: prune when already out of reach
            if partial - self.target > self.tol.max(self.best.0) {
                return;
            }
            if index == self.freqs.len() {
                let residual = (self.target - partial).abs();
                let total: usize = self.stack.iter().sum();
                if residual <= self.tol {
                    self.within_tol += 1;
                }
                // strict improvement only: the descending enumeration then
                // leaves the lexicographically largest among exact ties
                if residual < self.best.0
                    || (residual == self.best.0 && total < self.best.1)
                {
                    self.best = (residual, total, self.stack.clone());
                }
                return;
            }
            for n in (0..=budget).rev() {
                self.stack.push(n);
                self.visit(index + 1, budget - n, partial + n as f64 * self.freqs[index]);
                self.stack.pop();
            }
        }
    }

    let mut search = Search {
        freqs: frequencies,
        target,
        tol,
        best: (f64::INFINITY, usize::MAX, Vec::new()),
        within_tol: 0,
        stack: Vec::with_capacity(frequencies.len()),
    };
    search.visit(0, max_total, 0.0);

    let (residual, _, occupations) = search.best;
    let matched = residual <= tol;
    Ok(Decomposition {
        occupations: if matched { Some(occupations) } else { None },
        residual,
        degeneracy: search.within_tol,
    })
}

/// Status of one level in the correspondence report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelStatus {
    Matched,
    Unmatched,
    Flagged,
}

/// One level of the final correspondence table.
#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub level: usize,
    pub status: LevelStatus,
    /// Fitted linear coefficient of E(hbar); absent for flagged levels.
    pub classical_eigenvalue: Option<f64>,
    pub fit_residual: Option<f64>,
    pub ill_fit: bool,
    /// Occupation numbers of the matching combination, absent when
    /// unmatched or flagged.
    pub match_vector: Option<Vec<usize>>,
    pub match_residual: Option<f64>,
    pub degeneracy: usize,
}

/// Everything a correspondence run produces.
#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceRun {
    pub system: String,
    pub params: std::collections::BTreeMap<String, f64>,
    pub hbar_list: Vec<f64>,
    pub levels: usize,
    pub source: SpectrumSource,
    pub equilibrium: EquilibriumReport,
    pub tables: Vec<SpectrumTable>,
    pub reports: Vec<CorrespondenceReport>,
}

impl CorrespondenceRun {
    pub fn all_matched(&self) -> bool {
        self.reports
            .iter()
            .all(|r| r.status == LevelStatus::Matched)
    }
}

/// Knobs for [`run_correspondence`]; `Default` gives the standard run.
#[derive(Debug, Clone)]
pub struct CorrespondenceOptions {
    /// Base grid override; None derives one per hbar from the system.
    pub base_grid: Option<GridSpec>,
    /// Convergence tolerance for the grid solver.
    pub rel_tol: f64,
    /// Matching tolerance; None means 1e-3 times the largest frequency.
    pub match_tol: Option<f64>,
    /// Cap on the total occupation in the decomposition search.
    pub max_total: usize,
}

impl Default for CorrespondenceOptions {
    fn default() -> Self {
        CorrespondenceOptions {
            base_grid: None,
            rel_tol: quantum::DEFAULT_REL_TOL,
            match_tol: None,
            max_total: 12,
        }
    }
}

/// A conservative default hbar sweep: four halvings starting from 0.4,
/// scaled down until every sweep point keeps at least `levels` discrete
/// levels below the continuum (relevant for saturating wells).
pub fn default_hbar_sweep(system: &PrepotentialSystem, levels: usize) -> Vec<f64> {
    let mut top = 0.4f64;
    if system.bound_state_count(top).is_some() {
        for _ in 0..60 {
            match system.bound_state_count(top) {
                Some(c) if c < levels + 1 => top *= 0.5,
                _ => break,
            }
        }
    }
    (0..4).map(|i| top / (1 << i) as f64).collect()
}

/// Lowest `count` reference energies (with multiplicity) at one hbar,
/// enumerated over occupation vectors with total occupation <= count.
/// Assumes the reference energy is nondecreasing in every occupation
/// number, which holds for all shipped systems.
pub fn reference_level_energies(
    system: &PrepotentialSystem,
    hbar: f64,
    count: usize,
) -> Option<Vec<f64>> {
    if !system.has_reference_spectrum() {
        return None;
    }
    let arity = system.dimension();
    let mut found: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut stack = vec![0usize; arity];

    fn rec(
        system: &PrepotentialSystem,
        hbar: f64,
        stack: &mut Vec<usize>,
        index: usize,
        budget: usize,
        out: &mut Vec<(f64, Vec<usize>)>,
    ) {
        if index == stack.len() {
            if let Some(e) = system.reference_energy(stack, hbar) {
                out.push((e, stack.clone()));
            }
            return;
        }
        for n in 0..=budget {
            stack[index] = n;
            rec(system, hbar, stack, index + 1, budget - n, out);
        }
        stack[index] = 0;
    }

    rec(system, hbar, &mut stack, 0, count, &mut found);
    if found.is_empty() {
        return None;
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
    Some(found.into_iter().map(|(e, _)| e).take(count).collect())
}

fn reference_table(
    system: &PrepotentialSystem,
    hbar: f64,
    count: usize,
) -> Option<SpectrumTable> {
    let energies = reference_level_energies(system, hbar, count)?;
    let n = energies.len();
    Some(SpectrumTable {
        system: system.name().to_string(),
        hbar,
        source: SpectrumSource::Reference,
        grid: None,
        flags: vec![LevelFlag::Trusted; n],
        error_estimates: vec![0.0; n],
        energies,
        ground_state_overlap: 1.0,
        boundary_amplitude: 0.0,
        truncation_warning: false,
    })
}

/// Run the whole chain and assemble the final report.
///
/// One-dimensional systems are solved on grids (converged per hbar, in
/// parallel); higher-dimensional systems must ship a reference spectrum,
/// which then stands in for the grid tables.
pub fn run_correspondence(
    system: &PrepotentialSystem,
    hbar_list: &[f64],
    levels: usize,
    options: &CorrespondenceOptions,
) -> Result<CorrespondenceRun> {
    if levels == 0 {
        return Err(Error::InvalidInput("need at least one level".into()));
    }
    if hbar_list.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "the hbar sweep needs at least 3 values, got {}",
            hbar_list.len()
        )));
    }
    for (i, h) in hbar_list.iter().enumerate() {
        if !(h.is_finite() && *h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "hbar sweep values must be positive and finite, got {h}"
            )));
        }
        if hbar_list[..i].contains(h) {
            return Err(Error::InvalidInput(format!(
                "hbar sweep contains {h} twice"
            )));
        }
    }

    let report = equilibrium::find_equilibrium(system, &system.default_guess(), 1e-12)?;

    let (tables, source) = if system.dimension() == 1 {
        let tables: Result<Vec<SpectrumTable>> = std::thread::scope(|scope| {
            let handles: Vec<_> = hbar_list
                .iter()
                .map(|&hbar| {
                    scope.spawn(move || -> Result<SpectrumTable> {
                        let base = match &options.base_grid {
                            Some(g) => GridSpec {
                                half_width: g.half_width,
                                points: g.points,
                                levels,
                            },
                            None => quantum::default_grid(system, hbar, levels)?,
                        };
                        quantum::converge_spectrum(system, hbar, &base, options.rel_tol)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("solver thread panicked"))
                .collect()
        });
        (tables?, SpectrumSource::Grid)
    } else {
        let tables: Option<Vec<SpectrumTable>> = hbar_list
            .iter()
            .map(|&hbar| reference_table(system, hbar, levels))
            .collect();
        match tables {
            Some(t) => (t, SpectrumSource::Reference),
            None => {
                return Err(Error::NotOneDimensional {
                    context: "run_correspondence without a reference spectrum",
                    dimension: system.dimension(),
                })
            }
        }
    };

    let f_max = report.frequencies.iter().fold(0.0f64, |a, &f| a.max(f));
    let match_tol = options.match_tol.unwrap_or(1e-3 * f_max.max(1e-12));

    let mut reports = Vec::with_capacity(levels);
    for level in 0..levels {
        let available = tables
            .iter()
            .all(|t| level < t.energies.len() && t.is_trusted(level));
        if !available {
            reports.push(CorrespondenceReport {
                level,
                status: LevelStatus::Flagged,
                classical_eigenvalue: None,
                fit_residual: None,
                ill_fit: false,
                match_vector: None,
                match_residual: None,
                degeneracy: 0,
            });
            continue;
        }
        let fit = extrapolate_classical_eigenvalue(&tables, level)?;
        let dec = decompose(fit.value, &report.frequencies, match_tol, options.max_total)?;
        let status = if dec.occupations.is_some() {
            LevelStatus::Matched
        } else {
            LevelStatus::Unmatched
        };
        reports.push(CorrespondenceReport {
            level,
            status,
            classical_eigenvalue: Some(fit.value),
            fit_residual: Some(fit.rms_residual),
            ill_fit: fit.ill_fit,
            match_vector: dec.occupations,
            match_residual: Some(dec.residual),
            degeneracy: dec.degeneracy,
        });
    }

    Ok(CorrespondenceRun {
        system: system.name().to_string(),
        params: system.params().clone(),
        hbar_list: hbar_list.to_vec(),
        levels,
        source,
        equilibrium: report,
        tables,
        reports,
    })
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

    #[test]
    fn exact_linear_data_fits_exactly() {
        let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.4].iter().map(|&h| (h, 3.0 * h)).collect();
        let fit = fit_linear_coefficient(&pts).unwrap();
        assert_abs_diff_eq!(fit.value, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.curvature, 0.0, epsilon = 1e-10);
        assert!(fit.rms_residual < 1e-14);
    }

    #[test]
    fn quadratic_term_is_separated_from_the_slope() {
        // E = 2h - 0.5 h^2 exactly: the fit must recover both
        let pts: Vec<(f64, f64)> = [0.05, 0.1, 0.2, 0.4]
            .iter()
            .map(|&h| (h, 2.0 * h - 0.5 * h * h))
            .collect();
        let fit = fit_linear_coefficient(&pts).unwrap();
        assert_abs_diff_eq!(fit.value, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.curvature, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn fit_input_validation() {
        assert!(fit_linear_coefficient(&[(0.1, 1.0), (0.2, 2.0)]).is_err());
        assert!(
            fit_linear_coefficient(&[(0.1, 1.0), (0.1, 1.0), (0.1, 1.0)]).is_err(),
            "coincident sweep points must be rejected"
        );
        assert!(fit_linear_coefficient(&[(0.1, 1.0), (-0.2, 2.0), (0.3, 3.0)]).is_err());
    }

    #[test]
    fn decompose_simple_cases() {
        let d = decompose(3.0, &[1.0], 1e-9, 12).unwrap();
        assert_eq!(d.occupations, Some(vec![3]));
        assert_abs_diff_eq!(d.residual, 0.0);
        assert_eq!(d.degeneracy, 1);

        let zero = decompose(0.0, &[1.0, 2.0], 1e-9, 12).unwrap();
        assert_eq!(zero.occupations, Some(vec![0, 0]));

        let d5 = decompose(5.0, &[1.0, 2.0, 3.0], 1e-9, 12).unwrap();
        assert_eq!(d5.occupations, Some(vec![0, 1, 1]), "minimal total wins");
    }

    #[test]
    fn degenerate_frequencies_prefer_the_lexicographically_largest_vector() {
        let d = decompose(2.0, &[1.0, 1.0], 1e-9, 12).unwrap();
        assert_eq!(d.occupations, Some(vec![2, 0]));
        assert_eq!(d.degeneracy, 3); // (2,0), (1,1), (0,2)
    }

    #[test]
    fn unmatched_targets_report_their_best_residual() {
        let d = decompose(0.5, &[1.0], 1e-3, 12).unwrap();
        assert_eq!(d.occupations, None);
        assert_abs_diff_eq!(d.residual, 0.5);
        assert_eq!(d.degeneracy, 0);
    }

    #[test]
    fn decompose_respects_the_occupation_cap() {
        let d = decompose(5.0, &[1.0], 1e-9, 4).unwrap();
        assert_eq!(d.occupations, None);
        assert_abs_diff_eq!(d.residual, 1.0); // best is (4)
    }

    #[test]
    fn decompose_is_deterministic() {
        let freqs = [1.0, 1.9999999999, 3.1415926];
        let a = decompose(7.34, &freqs, 0.05, 12).unwrap();
        let b = decompose(7.34, &freqs, 0.05, 12).unwrap();
        assert_eq!(a.occupations, b.occupations);
        assert_eq!(a.residual, b.residual);
        assert_eq!(a.degeneracy, b.degeneracy);
    }

    #[test]
    fn default_sweep_keeps_enough_bound_states() {
        let sys = catalog("poschl_teller", &[("g", 1.0)]);
        let sweep = default_hbar_sweep(&sys, 4);
        assert_eq!(sweep.len(), 4);
        for h in &sweep {
            assert!(sys.bound_state_count(*h).unwrap() > 4, "hbar {h}");
        }
        // unbounded systems keep the plain sweep
        let harm = catalog("harmonic", &[("omega", 1.0)]);
        assert_eq!(default_hbar_sweep(&harm, 6), vec![0.4, 0.2, 0.1, 0.05]);
    }

    #[test]
    fn reference_levels_enumerate_with_multiplicity() {
        let sys = catalog("calogero_a", &[("n", 3.0), ("omega", 1.0), ("g", 1.0)]);
        let levels = reference_level_energies(&sys, 1.0, 6).unwrap();
        assert_eq!(levels, vec![0.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let harm = catalog("harmonic", &[("omega", 1.0)]);
        assert_eq!(reference_level_energies(&harm, 0.5, 3), Some(vec![0.0, 0.5, 1.0]));
    }

    #[test]
    fn correspondence_run_on_the_reference_spectrum() {
        let sys = catalog("calogero_a", &[("n", 3.0), ("omega", 1.0), ("g", 1.0)]);
        let run = run_correspondence(
            &sys,
            &[0.4, 0.2, 0.1, 0.05],
            8,
            &CorrespondenceOptions::default(),
        )
        .unwrap();
        assert_eq!(run.source, SpectrumSource::Reference);
        assert!(run.all_matched());
        // level 3 has energy 2 = 2*f1 = f2: degenerate; the single-quantum
        // combination (0,1,0) wins on total occupation
        let r3 = &run.reports[3];
        assert_abs_diff_eq!(r3.classical_eigenvalue.unwrap(), 2.0, epsilon = 1e-10);
        assert_eq!(r3.match_vector.as_deref(), Some(&[0, 1, 0][..]));
        assert_eq!(r3.degeneracy, 2);
    }

    #[test]
    fn sweep_validation_in_run_correspondence() {
        let sys = catalog("harmonic", &[("omega", 1.0)]);
        let opts = CorrespondenceOptions::default();
        assert!(run_correspondence(&sys, &[0.4, 0.2], 2, &opts).is_err());
        assert!(run_correspondence(&sys, &[0.4, 0.2, 0.2], 2, &opts).is_err());
        assert!(run_correspondence(&sys, &[0.4, 0.2, -0.1], 2, &opts).is_err());
        assert!(run_correspondence(&sys, &[0.4, 0.2, 0.1], 0, &opts).is_err());
    }

    #[test]
    fn flagged_levels_are_reported_not_fitted() {
        // poschl_teller at hbar in {0.4, 0.2, 0.1}: at 0.4 only 3 levels are
        // discrete (g/hbar = 2.5), so level 3 must come out flagged
        let sys = catalog("poschl_teller", &[("g", 1.0)]);
        let run = run_correspondence(
            &sys,
            &[0.4, 0.2, 0.1],
            4,
            &CorrespondenceOptions::default(),
        )
        .unwrap();
        assert_eq!(run.reports[3].status, LevelStatus::Flagged);
        assert!(run.reports[3].classical_eigenvalue.is_none());
        for level in 0..3 {
            assert_eq!(run.reports[level].status, LevelStatus::Matched);
            assert_abs_diff_eq!(
                run.reports[level].classical_eigenvalue.unwrap(),
                level as f64,
                epsilon = 2e-3
            );
        }
    }
}
