//! Figure data: blockade shift, lifetime, minimum error and optimal Rabi
//! frequency series, one CSV table per figure.

use std::f64::consts::PI;

use rydcirc_core::atomic::lifetime;
use rydcirc_core::blockade::{blockade_shift_in, Orientation, PairGeometry, DEFAULT_EXCLUSION_RADIUS};
use rydcirc_core::error_model::{min_error, optimal_rabi};

use crate::output::{number, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Blockade shift versus separation, both geometries.
    Blockade,
    /// Radiative lifetime versus n.
    Lifetime,
    /// Minimum gate error versus separation.
    MinError,
    /// Optimal Rabi frequency versus separation.
    OptimalRabi,
}

impl Figure {
    pub fn from_number(k: u32) -> Result<Self, CliError> {
        match k {
            2 => Ok(Figure::Blockade),
            3 => Ok(Figure::Lifetime),
            4 => Ok(Figure::MinError),
            5 => Ok(Figure::OptimalRabi),
            _ => Err(CliError::usage(format!("figure must be one of 2, 3, 4, 5, got {k}"))),
        }
    }
}

/// Sweep settings; `None` fields take the figure's defaults.
#[derive(Debug, Clone, Default)]
pub struct FigureOptions {
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub ns: Option<Vec<u32>>,
    pub temperatures: Option<Vec<f64>>,
    pub exclusion_radius: Option<f64>,
}

const MAX_POINTS: usize = 1_000_000;

/// Evenly spaced separations in micrometres.
fn separation_grid(opts: &FigureOptions, problems: &mut Vec<String>) -> Vec<f64> {
    let (from, to) = (opts.from.unwrap_or(1.0), opts.to.unwrap_or(10.0));
    let points = opts.points.unwrap_or(91);
    if !(from > 0.0 && from.is_finite()) {
        problems.push(format!("--from must be a positive separation in um, got {from}"));
    }
    if !(to > from && to.is_finite()) {
        problems.push(format!("--to must be finite and exceed --from, got {to}"));
    }
    if !(2..=MAX_POINTS).contains(&points) {
        problems.push(format!("--points must lie in 2..={MAX_POINTS}, got {points}"));
    }
    if !problems.is_empty() {
        return Vec::new();
    }
    (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Consecutive principal quantum numbers.
fn n_grid(opts: &FigureOptions, problems: &mut Vec<String>) -> Vec<u32> {
    if opts.points.is_some() {
        problems.push("figure 3 steps through every n; --points does not apply".into());
    }
    let (from, to) = (opts.from.unwrap_or(20.0), opts.to.unwrap_or(150.0));
    let integral = |x: f64| x.fract() == 0.0 && x.is_finite();
    if !(integral(from) && from >= 2.0) {
        problems.push(format!("--from must be an integer n >= 2 for figure 3, got {from}"));
    }
    if !(integral(to) && to > from && to - from < MAX_POINTS as f64) {
        problems.push(format!("--to must be an integer n above --from for figure 3, got {to}"));
    }
    if !problems.is_empty() {
        return Vec::new();
    }
    (from as u32..=to as u32).collect()
}

fn check_lists(ns: &[u32], temperatures: &[f64], problems: &mut Vec<String>) {
    if ns.is_empty() {
        problems.push("--n needs at least one value".into());
    }
    for &n in ns {
        if n < 2 {
            problems.push(format!("--n values must be at least 2, got {n}"));
        }
    }
    if temperatures.is_empty() {
        problems.push("--temperatures needs at least one value".into());
    }
    for &t in temperatures {
        if !(t >= 0.0 && t.is_finite()) {
            problems.push(format!("--temperatures must be finite and non-negative, got {t}"));
        }
    }
}

pub fn build(figure: Figure, opts: &FigureOptions) -> Result<Table, CliError> {
    let mut problems = Vec::new();
    let default_ns = match figure {
        Figure::Blockade => vec![90, 100, 110],
        _ => vec![80, 100, 110],
    };
    let default_temperatures = match figure {
        Figure::Lifetime => vec![0.0, 300.0],
        _ => vec![0.0],
    };
    let ns = opts.ns.clone().unwrap_or(default_ns);
    let temperatures = opts.temperatures.clone().unwrap_or(default_temperatures);
    let exclusion = opts.exclusion_radius.unwrap_or(DEFAULT_EXCLUSION_RADIUS);
    if figure != Figure::Lifetime {
        check_lists(&ns, &temperatures, &mut problems);
    } else {
        if opts.ns.is_some() {
            problems.push("figure 3 sweeps n itself; use --from/--to instead of --n".into());
        }
        check_lists(&[2], &temperatures, &mut problems);
    }
    if figure == Figure::Blockade && opts.temperatures.is_some() {
        problems.push("figure 2 does not depend on temperature".into());
    }
    if !(exclusion > 0.0 && exclusion.is_finite()) {
        problems.push(format!("--exclusion-radius must be positive, got {exclusion}"));
    }

    match figure {
        Figure::Lifetime => {
            let grid = n_grid(opts, &mut problems);
            if !problems.is_empty() {
                return Err(CliError::Validation(problems));
            }
            lifetime_table(&grid, &temperatures)
        }
        _ => {
            let grid = separation_grid(opts, &mut problems);
            if !problems.is_empty() {
                return Err(CliError::Validation(problems));
            }
            separation_table(figure, &grid, &ns, &temperatures, exclusion)
        }
    }
}

fn temperature_label(t: f64) -> String {
    format!("{t}K")
}

fn lifetime_table(grid: &[u32], temperatures: &[f64]) -> Result<Table, CliError> {
    let mut headers = vec!["n".to_string()];
    for &t in temperatures {
        headers.push(format!("tau_ms_circular_{}", temperature_label(t)));
    }
    // Low-angular-momentum comparison series are outside the model and are
    // emitted empty.
    for &t in temperatures {
        headers.push(format!("tau_ms_ns_{}", temperature_label(t)));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &n in grid {
        let mut row = vec![n.to_string()];
        for &t in temperatures {
            row.push(number(Some(lifetime(n, t)? * 1e3)));
        }
        row.extend(temperatures.iter().map(|_| number(None)));
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

fn separation_table(
    figure: Figure,
    grid_um: &[f64],
    ns: &[u32],
    temperatures: &[f64],
    exclusion: f64,
) -> Result<Table, CliError> {
    let mut headers = vec!["R_um".to_string()];
    for &n in ns {
        match figure {
            Figure::Blockade => {
                headers.push(format!("B_GHz_n{n}_parallel"));
                headers.push(format!("B_GHz_n{n}_perpendicular"));
            }
            Figure::MinError => {
                for &t in temperatures {
                    headers.push(format!("E_min_n{n}_{}", temperature_label(t)));
                }
            }
            Figure::OptimalRabi => {
                for &t in temperatures {
                    headers.push(format!("Omega_MHz_n{n}_{}", temperature_label(t)));
                }
            }
            Figure::Lifetime => unreachable!("lifetimes are tabulated against n"),
        }
    }
    headers.push("overlap_excluded".to_string());

    let mut taus = Vec::new();
    for &n in ns {
        for &t in temperatures {
            taus.push(lifetime(n, t)?);
        }
    }

    let mut rows = Vec::with_capacity(grid_um.len());
    for &r_um in grid_um {
        let r = r_um * 1e-6;
        let mut row = vec![number(Some(r_um))];
        for (i, &n) in ns.iter().enumerate() {
            let shift = |o: Orientation| -> Result<f64, CliError> {
                let g = PairGeometry::new(r, o)?.with_exclusion_radius(exclusion);
                Ok(blockade_shift_in(n, &g)?.blockade_shift)
            };
            match figure {
                Figure::Blockade => {
                    for o in [Orientation::Parallel, Orientation::Perpendicular] {
                        row.push(number(Some(shift(o)? / (2.0 * PI) / 1e9)));
                    }
                }
                _ => {
                    let b = shift(Orientation::Parallel)?;
                    for tau in &taus[i * temperatures.len()..(i + 1) * temperatures.len()] {
                        let value = match figure {
                            Figure::MinError => min_error(b, *tau)?,
                            _ => optimal_rabi(b, *tau)? / (2.0 * PI) / 1e6,
                        };
                        row.push(number(Some(value)));
                    }
                }
            }
        }
        row.push((r < exclusion).to_string());
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(t: &Table, name: &str) -> Vec<Option<f64>> {
        let k = t.headers.iter().position(|h| h == name).unwrap();
        t.rows.iter().map(|r| r[k].parse().ok()).collect()
    }

    fn at(t: &Table, name: &str, r_um: f64) -> f64 {
        let k = t.rows.iter().position(|r| r[0].parse::<f64>().unwrap() == r_um).unwrap();
        column(t, name)[k].unwrap()
    }

    #[test]
    fn blockade_figure_has_both_geometries() {
        let t = build(Figure::Blockade, &FigureOptions::default()).unwrap();
        assert_eq!(t.headers.len(), 1 + 2 * 3 + 1);
        assert_eq!(t.rows.len(), 91);
        let b = at(&t, "B_GHz_n110_parallel", 2.0);
        assert!((b / 8.71 - 1.0).abs() < 0.02, "{b}");
        assert!(column(&t, "B_GHz_n100_perpendicular").iter().all(|v| v.unwrap() > 0.0));
    }

    #[test]
    fn abscissa_is_monotone_and_exclusion_marked() {
        let t = build(Figure::MinError, &FigureOptions::default()).unwrap();
        let r = column(&t, "R_um");
        assert!(r.windows(2).all(|w| w[1].unwrap() > w[0].unwrap()));
        let excluded = t.headers.len() - 1;
        assert_eq!(t.rows[0][excluded], "true");
        assert_eq!(t.rows[10][excluded], "false");
    }

    #[test]
    fn minimum_error_grows_with_separation() {
        let t = build(Figure::MinError, &FigureOptions::default()).unwrap();
        for n in [80, 100, 110] {
            let e = column(&t, &format!("E_min_n{n}_0K"));
            assert!(e.windows(2).all(|w| w[1].unwrap() > w[0].unwrap()), "n={n}");
        }
    }

    #[test]
    fn optimal_rabi_at_two_microns() {
        let t = build(Figure::OptimalRabi, &FigureOptions::default()).unwrap();
        let w = at(&t, "Omega_MHz_n110_0K", 2.0);
        assert!((w / 5.6 - 1.0).abs() < 0.02, "{w}");
    }

    #[test]
    fn lifetime_figure_leaves_ns_series_empty() {
        let t = build(Figure::Lifetime, &FigureOptions::default()).unwrap();
        assert_eq!(
            t.headers,
            ["n", "tau_ms_circular_0K", "tau_ms_circular_300K", "tau_ms_ns_0K", "tau_ms_ns_300K"]
        );
        assert_eq!(t.rows.len(), 131);
        let row = t.rows.iter().find(|r| r[0] == "110").unwrap();
        assert!((row[1].parse::<f64>().unwrap() / 1520.0 - 1.0).abs() < 0.03);
        assert!(row[3].is_empty() && row[4].is_empty());
    }

    #[test]
    fn invalid_grids_are_rejected_with_every_problem() {
        let opts = FigureOptions {
            from: Some(-1.0),
            to: Some(-2.0),
            points: Some(1),
            ..Default::default()
        };
        let Err(CliError::Validation(p)) = build(Figure::MinError, &opts) else {
            panic!("expected validation failure");
        };
        assert_eq!(p.len(), 3, "{p:?}");
        let opts = FigureOptions {
            from: Some(2.5),
            ..Default::default()
        };
        assert!(build(Figure::Lifetime, &opts).is_err());
        assert!(Figure::from_number(6).is_err());
    }
}
