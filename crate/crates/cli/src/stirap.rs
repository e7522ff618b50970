//! Adiabatic-passage ladder into a circular state, with the spontaneous-
//! emission estimate for its intermediate levels.

use rydcirc_core::atomic::{stirap_chain, Polarization, StirapLadder};
use rydcirc_core::constants::hz_to_rad;
use rydcirc_core::error_model::stirap_intermediate_error;
use serde::Serialize;

use crate::output::{number, Table};
use crate::CliError;

/// Inputs of the intermediate-state error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateInputs {
    /// Peak population of the intermediate states.
    pub p_int: f64,
    pub rabi_frequency_mhz: f64,
    /// Lifetime of the intermediate states (s).
    pub tau_int: f64,
}

impl Default for EstimateInputs {
    fn default() -> Self {
        EstimateInputs {
            p_int: 1e-4,
            rabi_frequency_mhz: 5.0,
            tau_int: 100e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StirapReport {
    pub n_final: u32,
    pub state_count: usize,
    pub max_link_ghz: f64,
    pub min_link_ghz: f64,
    pub estimate_inputs: EstimateInputs,
    pub intermediate_error: f64,
    pub ladder: StirapLadder,
}

pub fn build(n_final: u32, inputs: EstimateInputs) -> Result<StirapReport, CliError> {
    let ladder = stirap_chain(n_final)?;
    let intermediate_error = stirap_intermediate_error(
        inputs.p_int,
        hz_to_rad(inputs.rabi_frequency_mhz * 1e6),
        inputs.tau_int,
    )?;
    Ok(StirapReport {
        n_final,
        state_count: ladder.states.len(),
        max_link_ghz: ladder.max_link_hz() / 1e9,
        min_link_ghz: ladder.min_link_hz() / 1e9,
        estimate_inputs: inputs,
        intermediate_error,
        ladder,
    })
}

impl StirapReport {
    /// One row per ladder state; the link columns describe the transition
    /// to the next state and are empty on the last one.
    pub fn to_table(&self) -> Table {
        let headers = ["index", "n", "l", "m", "link_to_next_GHz", "polarization"];
        let rows = self
            .ladder
            .states
            .iter()
            .map(|s| {
                let link = self.ladder.links.iter().find(|l| l.from == s.index);
                vec![
                    s.index.to_string(),
                    s.level.n.to_string(),
                    s.level.l.to_string(),
                    s.level.m.to_string(),
                    number(link.map(|l| l.frequency_hz / 1e9)),
                    link.map(|l| match l.polarization {
                        Polarization::SigmaPlus => "sigma+",
                        Polarization::SigmaMinus => "sigma-",
                    })
                    .unwrap_or("")
                    .to_string(),
                ]
            })
            .collect();
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} states, links {:.1} GHz down to {:.2} GHz, intermediate-state error {:.2e}",
            self.state_count, self.max_link_ghz, self.min_link_ghz, self.intermediate_error
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ladder() {
        let r = build(112, EstimateInputs::default()).unwrap();
        assert_eq!(r.state_count, 110);
        assert!((r.max_link_ghz / 861.0 - 1.0).abs() < 0.01);
        assert!((r.min_link_ghz / 9.1 - 1.0).abs() < 0.01);
        assert!((r.intermediate_error / 1e-7 - 1.0).abs() < 0.2);
        let t = r.to_table();
        assert_eq!(t.rows.len(), 110);
        assert_eq!(t.rows.last().unwrap()[4], "");
        assert_eq!(t.rows.iter().filter(|row| !row[4].is_empty()).count(), 109);
    }

    #[test]
    fn odd_final_level_is_rejected() {
        assert!(matches!(build(111, EstimateInputs::default()), Err(CliError::Validation(_))));
    }
}
