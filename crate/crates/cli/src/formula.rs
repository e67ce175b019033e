//! Named formulas for initial data and perturbation directions.
//!
//! Initial data: `one-minus-x`, `periodic-sine`, `constant:<c>`,
//! `file:<path>` (nodal values).
//!
//! Directions: `constant:<c>`, `indicator:<a>:<b>:<height>`, `step`,
//! `cosine:<amp>` (density `1 + amp·cos 2πx`), `file:<path>`
//! (antiderivative samples; the direction then has no density).

use std::f64::consts::PI;

use amspace::{Density, ExtrapolatedElement, GridFunction, Space};

use crate::error::CliError;

fn number(spec: &str, s: &str) -> Result<f64, CliError> {
    s.parse()
        .map_err(|_| CliError::Config(format!("{spec:?}: cannot parse {s:?} as a number")))
}

fn read_samples(path: &str) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read samples from {path:?}: {e}")))?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| number(path, s))
        .collect()
}

fn check_len(spec: &str, values: &[f64], n_cells: usize) -> Result<(), CliError> {
    if values.len() != n_cells + 1 {
        return Err(CliError::Config(format!(
            "{spec:?}: expected {} samples, found {}",
            n_cells + 1,
            values.len()
        )));
    }
    Ok(())
}

pub fn initial_data(spec: &str, space: Space, n_cells: usize) -> Result<GridFunction, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let f = match parts.as_slice() {
        ["one-minus-x"] => GridFunction::from_fn(space, n_cells, |x| 1.0 - x)?,
        ["periodic-sine"] => GridFunction::from_fn(space, n_cells, |x| 1.0 + 0.5 * (2.0 * PI * x).sin())?,
        ["constant", c] => {
            let c = number(spec, c)?;
            GridFunction::from_fn(space, n_cells, |_| c)?
        }
        ["file", path] => {
            let v = read_samples(path)?;
            check_len(spec, &v, n_cells)?;
            GridFunction::new(space, v)?
        }
        _ => return Err(CliError::Config(format!("unknown initial data {spec:?}"))),
    };
    Ok(f)
}

/// The density of a named direction, `None` for sampled antiderivatives.
pub fn direction_density(spec: &str) -> Result<Option<Density>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let d = match parts.as_slice() {
        ["constant", c] => Density::constant(number(spec, c)?),
        ["indicator", a, b, height] => Density::indicator(number(spec, a)?, number(spec, b)?, number(spec, height)?)?,
        ["step"] => Density::sign_step(),
        ["cosine", amp] => {
            let amp = number(spec, amp)?;
            let nodes: Vec<f64> = (0..=256)
                .map(|i| 1.0 + amp * (2.0 * PI * i as f64 / 256.0).cos())
                .collect();
            Density::from_nodes(&nodes)?
        }
        ["file", _] => return Ok(None),
        _ => return Err(CliError::Config(format!("unknown direction {spec:?}"))),
    };
    Ok(Some(d))
}

pub fn direction(spec: &str, space: Space, n_cells: usize) -> Result<ExtrapolatedElement, CliError> {
    match direction_density(spec)? {
        Some(d) => Ok(ExtrapolatedElement::from_density(space, n_cells, d)?),
        None => {
            let path = spec.trim_start_matches("file:");
            let v = read_samples(path)?;
            check_len(spec, &v, n_cells)?;
            Ok(ExtrapolatedElement::from_antiderivative(GridFunction::new(space, v)?))
        }
    }
}
