//! Flat-file rendering of results.
//!
//! CSV output is locale-free ('.' decimal) and prints floats with 17
//! significant digits, enough to round-trip f64 exactly. JSON comes from
//! serde on the result types themselves; everything here is the CSV side.

use crate::classical::VerificationRow;
use crate::correspondence::{CorrespondenceRun, LevelStatus};
use crate::equilibrium::EquilibriumReport;
use crate::quantum::{LevelFlag, SpectrumTable};

/// An f64 with 17 significant digits, exponential form, '.' decimal.
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Equilibrium summary: one row per mode.
pub fn equilibrium_csv(report: &EquilibriumReport) -> String {
    let mut out = String::from("mode,qbar,frequency\n");
    for (i, (q, f)) in report.qbar.iter().zip(&report.frequencies).enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, float17(*q), float17(*f)));
    }
    out
}

fn flag_str(flag: LevelFlag) -> &'static str {
    match flag {
        LevelFlag::Trusted => "trusted",
        LevelFlag::Continuum => "continuum",
    }
}

/// Spectrum rows across any number of tables: (hbar, n, E_n, flag).
pub fn spectrum_csv(tables: &[SpectrumTable]) -> String {
    let mut out = String::from("hbar,n,energy,flag\n");
    for t in tables {
        for (n, (e, flag)) in t.energies.iter().zip(&t.flags).enumerate() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                float17(t.hbar),
                n,
                float17(*e),
                flag_str(*flag)
            ));
        }
    }
    out
}

/// Eigenfunction verification rows.
pub fn verification_csv(rows: &[VerificationRow]) -> String {
    let mut out = String::from("label,eigenvalue,residual,vanishing,hessian_residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label,
            float17(r.eigenvalue),
            float17(r.residual),
            float17(r.vanishing),
            float17(r.hessian_residual)
        ));
    }
    out
}

fn status_str(status: LevelStatus) -> &'static str {
    match status {
        LevelStatus::Matched => "matched",
        LevelStatus::Unmatched => "unmatched",
        LevelStatus::Flagged => "flagged",
    }
}

/// Final correspondence table, one row per level:
/// level, classical_eigenvalue, n_1..n_r, match_residual, fit_residual,
/// status. Cells without a value (flagged/unmatched) stay empty.
pub fn correspondence_csv(run: &CorrespondenceRun) -> String {
    let r = run.equilibrium.frequencies.len();
    let mut out = String::from("level,classical_eigenvalue");
    for j in 1..=r {
        out.push_str(&format!(",n_{j}"));
    }
    out.push_str(",match_residual,fit_residual,status\n");
    for rep in &run.reports {
        out.push_str(&format!("{}", rep.level));
        push_opt(&mut out, rep.classical_eigenvalue);
        match &rep.match_vector {
            Some(v) => {
                for n in v {
                    out.push_str(&format!(",{n}"));
                }
                for _ in v.len()..r {
                    out.push(',');
                }
            }
            None => {
                for _ in 0..r {
                    out.push(',');
                }
            }
        }
        push_opt(&mut out, rep.match_residual);
        push_opt(&mut out, rep.fit_residual);
        out.push_str(&format!(",{}\n", status_str(rep.status)));
    }
    out
}

fn push_opt(out: &mut String, v: Option<f64>) {
    match v {
        Some(x) => out.push_str(&format!(",{}", float17(x))),
        None => out.push(','),
    }
}
