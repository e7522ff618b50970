//! Gate-error table: five reference columns recomputed from their presets,
//! each value set against its reference and tolerance.

use std::f64::consts::PI;

use rydcirc_core::error_model::min_error;
use rydcirc_core::tomography::{run_full_qpt, QptOptions};
use serde::{Deserialize, Serialize};

use crate::config::{data_dir, RunConfig};
use crate::output::{number, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Tolerance {
    /// Bound on `|computed/reference - 1|`.
    Relative(f64),
    /// Bound on `max(computed/reference, reference/computed)`.
    Factor(f64),
}

impl Tolerance {
    pub fn admits(self, computed: f64, reference: f64) -> bool {
        let ratio = computed / reference;
        match self {
            Tolerance::Relative(t) => (ratio - 1.0).abs() <= t,
            Tolerance::Factor(f) => ratio > 0.0 && ratio.max(1.0 / ratio) <= f,
        }
    }

    fn kind(self) -> &'static str {
        match self {
            Tolerance::Relative(_) => "relative",
            Tolerance::Factor(_) => "factor",
        }
    }

    fn value(self) -> f64 {
        match self {
            Tolerance::Relative(t) | Tolerance::Factor(t) => t,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tolerances {
    rabi_frequency: Tolerance,
    blockade_shift: Tolerance,
    lifetime: Tolerance,
    e_cb: Tolerance,
    trace_loss: Tolerance,
    process_error: Tolerance,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceColumn {
    preset: String,
    rabi_frequency_mhz: f64,
    blockade_shift_ghz: f64,
    lifetime_ms: f64,
    e_cb: f64,
    trace_loss: f64,
    process_error: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Reference {
    tolerance: Tolerances,
    column: Vec<ReferenceColumn>,
}

fn load_reference() -> Result<Reference, CliError> {
    let path = data_dir().join("reference").join("table1.toml");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.message())))
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub quantity: &'static str,
    pub unit: &'static str,
    pub reference: f64,
    pub computed: f64,
    /// `computed/reference - 1`.
    pub relative_deviation: f64,
    pub tolerance: Tolerance,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub preset: String,
    pub n: u32,
    pub temperature_k: f64,
    pub cells: Vec<Cell>,
    /// Every likelihood fit of the tomography met its gradient tolerance.
    pub fits_converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub columns: Vec<Column>,
    /// Number of cells outside their tolerance.
    pub breaches: usize,
}

fn cell(quantity: &'static str, unit: &'static str, reference: f64, computed: f64, tolerance: Tolerance) -> Cell {
    Cell {
        quantity,
        unit,
        reference,
        computed,
        relative_deviation: computed / reference - 1.0,
        tolerance,
        within_tolerance: tolerance.admits(computed, reference),
    }
}

/// Recomputes every column, including a full simulated tomography each.
pub fn build() -> Result<Table1Report, CliError> {
    let reference = load_reference()?;
    let tol = &reference.tolerance;
    let mut columns = Vec::with_capacity(reference.column.len());
    for col in &reference.column {
        let config = RunConfig::preset(&col.preset)?;
        let p = config.resolve()?.params;
        let qpt = run_full_qpt(&p, &QptOptions::default())?;
        let cells = vec![
            cell("rabi_frequency", "MHz", col.rabi_frequency_mhz, p.omega / (2.0 * PI) / 1e6, tol.rabi_frequency),
            cell("blockade_shift", "GHz", col.blockade_shift_ghz, p.blockade / (2.0 * PI) / 1e9, tol.blockade_shift),
            cell("lifetime", "ms", col.lifetime_ms, p.tau * 1e3, tol.lifetime),
            cell("e_cb", "", col.e_cb, min_error(p.blockade, p.tau)?, tol.e_cb),
            cell("trace_loss", "", col.trace_loss, qpt.mean_trace_loss, tol.trace_loss),
            cell("process_error", "", col.process_error, qpt.process_error, tol.process_error),
        ];
        columns.push(Column {
            preset: col.preset.clone(),
            n: config.n,
            temperature_k: config.temperature,
            cells,
            fits_converged: qpt.all_fits_converged(),
        });
    }
    let breaches = columns
        .iter()
        .flat_map(|c| &c.cells)
        .filter(|c| !c.within_tolerance)
        .count();
    Ok(Table1Report { columns, breaches })
}

impl Table1Report {
    /// One row per cell.
    pub fn to_table(&self) -> Table {
        let headers = [
            "preset",
            "n",
            "temperature_K",
            "quantity",
            "unit",
            "reference",
            "computed",
            "relative_deviation",
            "tolerance_kind",
            "tolerance",
            "within_tolerance",
        ];
        let rows = self
            .columns
            .iter()
            .flat_map(|col| {
                col.cells.iter().map(move |c| {
                    vec![
                        col.preset.clone(),
                        col.n.to_string(),
                        col.temperature_k.to_string(),
                        c.quantity.to_string(),
                        c.unit.to_string(),
                        number(Some(c.reference)),
                        number(Some(c.computed)),
                        number(Some(c.relative_deviation)),
                        c.tolerance.kind().to_string(),
                        number(Some(c.tolerance.value())),
                        c.within_tolerance.to_string(),
                    ]
                })
            })
            .collect();
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    /// Human-readable summary of the breaches.
    pub fn summary(&self) -> String {
        let mut s = format!("{} of {} values outside tolerance", self.breaches, self.columns.len() * 6);
        for col in &self.columns {
            for c in col.cells.iter().filter(|c| !c.within_tolerance) {
                s.push_str(&format!(
                    "\n  {} {}: computed {:.3e}, reference {:.3e} ({} tolerance {})",
                    col.preset,
                    c.quantity,
                    c.computed,
                    c.reference,
                    c.tolerance.kind(),
                    c.tolerance.value()
                ));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_kinds() {
        assert!(Tolerance::Relative(0.02).admits(1.019, 1.0));
        assert!(!Tolerance::Relative(0.02).admits(0.979, 1.0));
        assert!(Tolerance::Factor(1.5).admits(1.4, 1.0));
        assert!(Tolerance::Factor(1.5).admits(1.0, 1.4));
        assert!(!Tolerance::Factor(1.5).admits(1.0, 1.6));
        assert!(!Tolerance::Factor(1.5).admits(-1.0, 1.0));
    }

    #[test]
    fn reference_file_lists_five_columns() {
        let r = load_reference().unwrap();
        assert_eq!(r.column.len(), 5);
        for c in &r.column {
            RunConfig::preset(&c.preset).unwrap();
        }
    }
}
