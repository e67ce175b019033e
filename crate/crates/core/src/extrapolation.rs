//! Concrete model of the extrapolation space `E₋₁` and its positive cone.
//!
//! An element is stored through an antiderivative `F ∈ E`:
//!
//! * shift space: `g = ∂F` (distributional derivative), so `A₋₁F = g`;
//! * periodic space: `g = F − ∂F`, so `(I − A₋₁)F = g`.
//!
//! Every continuous `F` is admissible, including ones of unbounded variation,
//! so elements need not be measures. When `g` is known to be an integrable
//! function its [`Density`] is carried along for cross-checks.

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::lattice::{GridFunction, Space};
use crate::semigroup::GeneratorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    /// `g = ∂F`
    DerivativeOfF,
    /// `g = F − ∂F`
    FMinusDerivative,
}

impl Representation {
    pub fn for_space(space: Space) -> Self {
        match space {
            Space::Shift => Self::DerivativeOfF,
            Space::Periodic => Self::FMinusDerivative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    NonDecreasing,
    NonIncreasing,
}

/// Monotonicity of `x ↦ F(x)·e^{-x}` that characterises positive elements
/// `g = F − ∂F` of the periodic extrapolation space.
///
/// `F − F' = −e^x (F e^{-x})'`, so `g ≥ 0` forces `F e^{-x}` to decrease.
/// The value is pinned by [`crate::oracle::periodic_direction_oracle`].
pub const PERIODIC_POSITIVE_DIRECTION: Monotonicity = Monotonicity::NonIncreasing;

/// Tolerance for accepting a supplied density as the derivative of `F`.
const DENSITY_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolatedElement {
    antiderivative: GridFunction,
    representation: Representation,
    density: Option<Density>,
}

impl ExtrapolatedElement {
    /// Element represented by `F` alone (measure or distribution type).
    pub fn from_antiderivative(antiderivative: GridFunction) -> Self {
        Self {
            representation: Representation::for_space(antiderivative.space()),
            antiderivative,
            density: None,
        }
    }

    /// Element with an integrable density; `F` is computed from it exactly.
    pub fn from_density(space: Space, n_cells: usize, density: Density) -> Result<Self> {
        let antiderivative = antiderivative_of_density(space, n_cells, &density)?;
        Ok(Self {
            representation: Representation::for_space(space),
            antiderivative,
            density: Some(density),
        })
    }

    /// Pairs `F` with a density, rejecting pairs that disagree.
    pub fn with_density(antiderivative: GridFunction, density: Density) -> Result<Self> {
        let expected = antiderivative_of_density(antiderivative.space(), antiderivative.n_cells(), &density)?;
        let mismatch = expected.distance(&antiderivative)?;
        let tol = DENSITY_MATCH_TOL * (1.0 + antiderivative.sup_norm());
        if mismatch > tol {
            return Err(Error::InvalidConfig(format!(
                "density does not reproduce the antiderivative (mismatch {mismatch:e})"
            )));
        }
        Ok(Self {
            representation: Representation::for_space(antiderivative.space()),
            antiderivative,
            density: Some(density),
        })
    }

    pub fn zero(space: Space, n_cells: usize) -> Self {
        Self {
            antiderivative: GridFunction::zeros(space, n_cells),
            representation: Representation::for_space(space),
            density: Some(Density::zero()),
        }
    }

    pub fn antiderivative(&self) -> &GridFunction {
        &self.antiderivative
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn density(&self) -> Option<&Density> {
        self.density.as_ref()
    }

    pub fn space(&self) -> Space {
        self.antiderivative.space()
    }

    pub fn n_cells(&self) -> usize {
        self.antiderivative.n_cells()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            antiderivative: self.antiderivative.scale(c),
            representation: self.representation,
            density: self.density.as_ref().map(|d| d.scaled(c)),
        }
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        let antiderivative = self.antiderivative.scale(alpha).axpy(beta, &other.antiderivative)?;
        let density = match (&self.density, &other.density) {
            (Some(a), Some(b)) => Some(a.linear_combination(alpha, b, beta)),
            _ => None,
        };
        Ok(Self {
            antiderivative,
            representation: self.representation,
            density,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    /// Largest nodal gap between `F` and the antiderivative rebuilt from the
    /// density, when a density is present.
    pub fn density_mismatch(&self) -> Option<f64> {
        let d = self.density.as_ref()?;
        let rebuilt = antiderivative_of_density(self.space(), self.n_cells(), d).ok()?;
        rebuilt.distance(&self.antiderivative).ok()
    }

    /// Membership in the positive cone `E₋₁,₊`.
    ///
    /// Shift space: `F` non-decreasing. Periodic space: `F·e^{-x}` monotone
    /// in the direction [`PERIODIC_POSITIVE_DIRECTION`]. Nodes are compared
    /// with tolerance `1e-9 (1 + ‖F‖)`. When a density is present it must also
    /// be nonnegative; node comparisons alone cannot see sign changes of the
    /// density inside a cell.
    pub fn is_positive(&self) -> bool {
        let f = self.antiderivative.values();
        let eps = self.antiderivative.eps_pos();
        let monotone = match self.space() {
            Space::Shift => f.windows(2).all(|w| w[1] - w[0] >= -eps),
            Space::Periodic => {
                let h = self.antiderivative.spacing();
                let q: Vec<f64> = f.iter().enumerate().map(|(i, v)| v * (-(i as f64) * h).exp()).collect();
                q.windows(2).all(|w| match PERIODIC_POSITIVE_DIRECTION {
                    Monotonicity::NonIncreasing => w[1] - w[0] <= eps,
                    Monotonicity::NonDecreasing => w[1] - w[0] >= -eps,
                })
            }
        };
        let density_ok = self
            .density
            .as_ref()
            .is_none_or(|d| d.is_nonnegative(1e-9 * (1.0 + d.max_abs())));
        monotone && density_ok
    }
}

/// `j₋₁ f` for `f ∈ E`.
pub fn embed(f: &GridFunction) -> ExtrapolatedElement {
    let density = Density::from_grid(f);
    let antiderivative = match f.space() {
        // F(x) = −∫ₓ¹ f
        Space::Shift => {
            let n = f.n_cells();
            let h = f.spacing();
            let v = f.values();
            let mut acc = vec![0.0; n + 1];
            for i in (0..n).rev() {
                acc[i] = acc[i + 1] - 0.5 * h * (v[i] + v[i + 1]);
            }
            GridFunction::from_computed(Space::Shift, acc).expect("F(1) = 0")
        }
        // F − F' = f  ⇔  F = R(1, A) f
        Space::Periodic => GeneratorSpec::rotation().resolvent_unchecked(1.0, f),
    };
    ExtrapolatedElement {
        antiderivative,
        representation: Representation::for_space(f.space()),
        density: Some(density),
    }
}

/// Antiderivative representation of an integrable density.
pub fn antiderivative_of_density(space: Space, n_cells: usize, density: &Density) -> Result<GridFunction> {
    if n_cells == 0 {
        return Err(Error::InvalidGrid);
    }
    let n = n_cells;
    let h = 1.0 / n as f64;
    let node = |i: usize| i as f64 * h;
    let mut values = vec![0.0; n + 1];
    match space {
        Space::Shift => {
            for i in (0..n).rev() {
                values[i] = values[i + 1] - density.integral(node(i), node(i + 1));
            }
        }
        Space::Periodic => {
            let decay = (-h).exp();
            let cells: Vec<f64> = (0..n)
                .map(|i| density.exp_weighted_integral(node(i), node(i + 1), 1.0))
                .collect();
            let mut acc = 0.0;
            let mut pow = 1.0;
            for c in &cells {
                acc += pow * c;
                pow *= decay;
            }
            let f0 = acc / -(-1.0f64).exp_m1();
            values[n] = f0;
            for i in (1..n).rev() {
                values[i] = decay * values[i + 1] + cells[i];
            }
            values[0] = f0;
        }
    }
    GridFunction::from_computed(space, values)
}

fn check_pair(gen: &GeneratorSpec, g: &ExtrapolatedElement) -> Result<()> {
    if gen.space() != g.space() {
        return Err(Error::GridMismatch(format!(
            "{:?} cannot act on an element of the {:?} space",
            gen.kind,
            g.space()
        )));
    }
    Ok(())
}

/// `T₋₁(t) g`: shifts the antiderivative, and the density alongside it.
pub fn extrapolated_semigroup(gen: &GeneratorSpec, t: f64, g: &ExtrapolatedElement) -> Result<ExtrapolatedElement> {
    check_pair(gen, g)?;
    let antiderivative = gen.apply(t, &g.antiderivative)?;
    let density = g.density.as_ref().map(|d| match g.space() {
        Space::Shift => d.shifted_left(t),
        Space::Periodic => d.rotated(t),
    });
    Ok(ExtrapolatedElement {
        antiderivative,
        representation: g.representation,
        density,
    })
}

/// `R(λ, A₋₁) g ∈ E`, evaluated through `F`.
///
/// Shift: `λ R(λ,A) F − F`. Periodic: `F − (λ − 1) R(λ,A) F`.
pub fn extrapolated_resolvent(gen: &GeneratorSpec, lambda: f64, g: &ExtrapolatedElement) -> Result<GridFunction> {
    check_pair(gen, g)?;
    gen.check_lambda(lambda)?;
    let f = &g.antiderivative;
    let rf = gen.resolvent_unchecked(lambda, f);
    match g.space() {
        Space::Shift => rf.scale(lambda).sub(f),
        Space::Periodic => f.axpy(-(lambda - 1.0), &rf),
    }
}

/// `‖g‖₋₁ = ‖R(λ, A₋₁) g‖∞`.
pub fn norm_minus_one(gen: &GeneratorSpec, lambda: f64, g: &ExtrapolatedElement) -> Result<f64> {
    Ok(extrapolated_resolvent(gen, lambda, g)?.sup_norm())
}

/// Direct kernel evaluation of `R(λ, A₋₁)ρ` for an integrable density,
/// bypassing the antiderivative.
pub fn kernel_resolvent_of_density(
    gen: &GeneratorSpec,
    lambda: f64,
    density: &Density,
    n_cells: usize,
) -> Result<GridFunction> {
    gen.check_lambda(lambda)?;
    let nodes = (0..=n_cells).map(|i| i as f64 / n_cells as f64);
    let values: Vec<f64> = match gen.space() {
        Space::Shift => nodes.map(|x| density.exp_weighted_integral(x, 1.0, lambda)).collect(),
        Space::Periodic => {
            let norm = -(-lambda).exp_m1();
            nodes
                .map(|x| {
                    (density.exp_weighted_integral(x, 1.0, lambda)
                        + (-lambda * (1.0 - x)).exp() * density.exp_weighted_integral(0.0, x, lambda))
                        / norm
                })
                .collect()
        }
    };
    GridFunction::from_computed(gen.space(), values)
}

/// Constant `C` with `‖g‖_{λ₁} ≤ C ‖g‖_{λ₂}` for every `g`, from the
/// resolvent identity `R(λ₁) = R(λ₂) + (λ₂ − λ₁) R(λ₁) R(λ₂)`.
pub fn norm_equivalence_constant(gen: &GeneratorSpec, lambda1: f64, lambda2: f64) -> Result<f64> {
    gen.check_lambda(lambda2)?;
    Ok(1.0 + (lambda2 - lambda1).abs() * gen.resolvent_norm(lambda1)?)
}
