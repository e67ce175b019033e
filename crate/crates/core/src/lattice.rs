//! Grid-sampled continuous functions on `[0, 1]` with the sup norm.
//!
//! A [`GridFunction`] is the concrete stand-in for an element of the AM-space
//! `E`. Two spaces are supported: the shift space `{f : f(1) = 0}` and the
//! periodic space `{f : f(0) = f(1)}`. Between nodes a function is the
//! piecewise-linear interpolant of its samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when computed samples are checked against the
/// boundary condition of their space.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Snap threshold (in index units) for shifts that land on a node.
pub(crate) const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    /// `{f ∈ C[0,1] : f(1) = 0}`
    Shift,
    /// `{f ∈ C[0,1] : f(0) = f(1)}`
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    space: Space,
    values: Vec<f64>,
}

impl GridFunction {
    /// Builds a function from exact samples. The boundary condition must hold
    /// exactly; nothing is corrected.
    pub fn new(space: Space, values: Vec<f64>) -> Result<Self> {
        check_values(&values)?;
        let n = values.len() - 1;
        match space {
            Space::Shift if values[n] != 0.0 => {
                return Err(Error::BoundaryViolation {
                    space,
                    detail: format!("f(1) = {} != 0", values[n]),
                })
            }
            Space::Periodic if values[0] != values[n] => {
                return Err(Error::BoundaryViolation {
                    space,
                    detail: format!("f(0) = {} != f(1) = {}", values[0], values[n]),
                })
            }
            _ => {}
        }
        Ok(Self { space, values })
    }

    /// Samples `f` at the `n_cells + 1` nodes `x_i = i / n_cells`.
    ///
    /// Samples that miss the boundary condition by roundoff (relative
    /// `1e-12`) are accepted and the condition is then imposed exactly;
    /// anything larger is rejected.
    pub fn from_fn(space: Space, n_cells: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::InvalidGrid);
        }
        let values = (0..=n_cells).map(|i| f(i as f64 / n_cells as f64)).collect();
        Self::from_computed(space, values)
    }

    /// Same acceptance rule as [`GridFunction::from_fn`], for samples that
    /// come out of a numerical computation.
    pub fn from_computed(space: Space, mut values: Vec<f64>) -> Result<Self> {
        check_values(&values)?;
        let n = values.len() - 1;
        let scale = 1.0 + values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        match space {
            Space::Shift => {
                if values[n].abs() > BOUNDARY_SLACK * scale {
                    return Err(Error::BoundaryViolation {
                        space,
                        detail: format!("f(1) = {:e}", values[n]),
                    });
                }
                values[n] = 0.0;
            }
            Space::Periodic => {
                if (values[0] - values[n]).abs() > BOUNDARY_SLACK * scale {
                    return Err(Error::BoundaryViolation {
                        space,
                        detail: format!("f(0) - f(1) = {:e}", values[0] - values[n]),
                    });
                }
                values[n] = values[0];
            }
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: Space, n_cells: usize) -> Self {
        Self {
            space,
            values: vec![0.0; n_cells.max(1) + 1],
        }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n_cells() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n_cells() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Positivity tolerance for computed data, `1e-9 (1 + ‖f‖)`.
    pub fn eps_pos(&self) -> f64 {
        1e-9 * (1.0 + self.sup_norm())
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol)
    }

    pub fn is_compatible(&self, other: &GridFunction) -> bool {
        self.space == other.space && self.values.len() == other.values.len()
    }

    pub fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.space != other.space {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.space, other.space)));
        }
        if self.values.len() != other.values.len() {
            return Err(Error::GridMismatch(format!(
                "{} vs {} cells",
                self.n_cells(),
                other.n_cells()
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &GridFunction, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Ok(Self {
            space: self.space,
            values,
        })
    }

    fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        Self {
            space: self.space,
            values: self.values.iter().map(|&v| op(v)).collect(),
        }
    }

    /// Pointwise maximum.
    pub fn lattice_sup(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, f64::max)
    }

    /// Pointwise minimum.
    pub fn lattice_inf(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, f64::min)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(0.0))
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + c * b)
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &GridFunction) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Composite trapezoid value of `∫₀¹ f`.
    pub fn integrate(&self) -> f64 {
        trapezoid(&self.values, self.spacing())
    }

    /// Exact integral of the interpolant over `[a, 1]`.
    pub fn integral_from(&self, a: f64) -> f64 {
        let n = self.n_cells();
        let a = a.clamp(0.0, 1.0);
        let pos = a * n as f64;
        let cell = (pos.floor() as usize).min(n - 1);
        let h = self.spacing();
        let mut total = 0.0;
        // partial first cell
        let frac = pos - cell as f64;
        let fa = self.values[cell] + frac * (self.values[cell + 1] - self.values[cell]);
        total += 0.5 * (fa + self.values[cell + 1]) * (1.0 - frac) * h;
        for i in cell + 1..n {
            total += 0.5 * (self.values[i] + self.values[i + 1]) * h;
        }
        total
    }

    /// Piecewise-linear interpolation, exact at nodes.
    pub fn interp_eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.sample_at(x * self.n_cells() as f64))
    }

    /// Interpolated value at index-space position `pos ∈ [0, n_cells]`.
    pub(crate) fn sample_at(&self, pos: f64) -> f64 {
        let n = self.n_cells();
        let mut cell = pos.floor();
        let mut frac = pos - cell;
        if frac < NODE_SNAP {
            frac = 0.0;
        } else if frac > 1.0 - NODE_SNAP {
            frac = 0.0;
            cell += 1.0;
        }
        let cell = cell.max(0.0) as usize;
        if cell >= n {
            return self.values[n];
        }
        if frac == 0.0 {
            self.values[cell]
        } else {
            (1.0 - frac) * self.values[cell] + frac * self.values[cell + 1]
        }
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidGrid);
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(())
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        len => {
            let inner: f64 = values[1..len - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[len - 1]))
        }
    }
}

/// Weights `(w0, w1)` with `∫₀¹ e^{-aτ} ((1-τ) p + τ q) dτ = w0 p + w1 q`.
///
/// Product integration of an exponential against a linear interpolant; it
/// reduces to the trapezoid weights `(½, ½)` at `a = 0` and stays bounded for
/// large positive `a`.
pub(crate) fn exp_linear_weights(a: f64) -> (f64, f64) {
    let (e1, e2) = if a.abs() < 0.05 {
        // ∑ (-a)^k / (k! (k+1)) and ∑ (-a)^k / (k! (k+2))
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        let mut term = 1.0;
        for k in 0..10 {
            e1 += term / (k as f64 + 1.0);
            e2 += term / (k as f64 + 2.0);
            term *= -a / (k as f64 + 1.0);
        }
        (e1, e2)
    } else {
        let em = (-a).exp();
        (-(-a).exp_m1() / a, (1.0 - em * (1.0 + a)) / (a * a))
    };
    (e1 - e2, e2)
}
