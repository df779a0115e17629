//! Observables for `decay` and `open`: `cos1`, `sin1`, numeric constants,
//! and box indicators `box:a..b,c..d` (one range per axis).

use std::f64::consts::TAU;

use acim_core::{GridFunction, UniformGrid};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Cos1,
    Sin1,
    Constant(f64),
    Box(Vec<(f64, f64)>),
}

impl Observable {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |why: &str| CliError::Config(format!("function `{text}`: {why}"));
        match text.trim() {
            "cos1" => Ok(Observable::Cos1),
            "sin1" => Ok(Observable::Sin1),
            t => {
                if let Some(ranges) = t.strip_prefix("box:") {
                    let sides = ranges
                        .split(',')
                        .map(|r| {
                            let (a, b) = r.split_once("..").ok_or_else(|| bad("ranges look like a..b"))?;
                            let a: f64 = a.trim().parse().map_err(|_| bad("range ends must be numbers"))?;
                            let b: f64 = b.trim().parse().map_err(|_| bad("range ends must be numbers"))?;
                            if a < b {
                                Ok((a, b))
                            } else {
                                Err(bad("empty range"))
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(Observable::Box(sides))
                } else {
                    t.parse::<f64>()
                        .ok()
                        .filter(|c| c.is_finite())
                        .map(Observable::Constant)
                        .ok_or_else(|| bad("expected cos1, sin1, a number or box:a..b[,c..d]"))
                }
            }
        }
    }

    /// Cell-centre samples of the observable.
    pub fn on_grid(&self, grid: UniformGrid) -> Result<GridFunction, CliError> {
        if let Observable::Box(sides) = self {
            if sides.len() != grid.dim() {
                return Err(CliError::Config(format!(
                    "box has {} ranges but the map is {}-dimensional",
                    sides.len(),
                    grid.dim()
                )));
            }
        }
        Ok(GridFunction::from_fn(grid, |x| match self {
            Observable::Cos1 => (TAU * x[0]).cos(),
            Observable::Sin1 => (TAU * x[0]).sin(),
            Observable::Constant(c) => *c,
            Observable::Box(sides) => {
                let inside = sides.iter().zip(x).all(|(&(a, b), &xi)| xi >= a && xi < b);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }))
    }
}
