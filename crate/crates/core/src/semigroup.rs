//! The two positive C₀-semigroups used throughout: the nilpotent left shift
//! on the shift space and the rotation on the periodic space.
//!
//! For the left shift the textbook formula is `(T(t)f)(x) = f(x + t)` when
//! `x + t ≤ 1` and `0` otherwise. Some statements of it write `f(s + t)` in
//! the first branch; `s` there is read as the evaluation point `x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exp_linear_weights, trapezoid, GridFunction, Space, NODE_SNAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneratorKind {
    /// `Af = f'` with `f(1) = f'(1) = 0`; spectral bound `-∞`.
    NilpotentLeftShift,
    /// `Af = f'` with `f'(0) = f'(1)` on the periodic space; spectral bound `0`.
    PeriodicRotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
}

impl GeneratorSpec {
    pub const fn left_shift() -> Self {
        Self {
            kind: GeneratorKind::NilpotentLeftShift,
        }
    }

    pub const fn rotation() -> Self {
        Self {
            kind: GeneratorKind::PeriodicRotation,
        }
    }

    pub fn for_space(space: Space) -> Self {
        match space {
            Space::Shift => Self::left_shift(),
            Space::Periodic => Self::rotation(),
        }
    }

    pub fn space(&self) -> Space {
        match self.kind {
            GeneratorKind::NilpotentLeftShift => Space::Shift,
            GeneratorKind::PeriodicRotation => Space::Periodic,
        }
    }

    pub fn spectral_bound(&self) -> f64 {
        match self.kind {
            GeneratorKind::NilpotentLeftShift => f64::NEG_INFINITY,
            GeneratorKind::PeriodicRotation => 0.0,
        }
    }

    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        let bound = self.spectral_bound();
        if !lambda.is_finite() || lambda <= bound {
            return Err(Error::LambdaOutOfRange { lambda, bound });
        }
        Ok(())
    }

    pub(crate) fn check_space(&self, f: &GridFunction) -> Result<()> {
        if f.space() != self.space() {
            return Err(Error::GridMismatch(format!(
                "{:?} acts on the {:?} space, got a {:?} function",
                self.kind,
                self.space(),
                f.space()
            )));
        }
        Ok(())
    }

    /// `‖R(λ, A)‖` in the sup norm.
    pub fn resolvent_norm(&self, lambda: f64) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(match self.kind {
            // sup_x ∫ₓ¹ e^{λ(x-s)} ds, attained at x = 0
            GeneratorKind::NilpotentLeftShift => {
                if lambda.abs() < 1e-12 {
                    1.0
                } else {
                    -(-lambda).exp_m1() / lambda
                }
            }
            GeneratorKind::PeriodicRotation => 1.0 / lambda,
        })
    }

    /// `T(t) f`. Shifts that are integer multiples of the grid spacing are
    /// exact; other shifts interpolate linearly between nodes.
    pub fn apply(&self, t: f64, f: &GridFunction) -> Result<GridFunction> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.check_space(f)?;
        Ok(self.apply_unchecked(t, f))
    }

    pub(crate) fn apply_unchecked(&self, t: f64, f: &GridFunction) -> GridFunction {
        let n = f.n_cells();
        let mut out = vec![0.0; n + 1];
        self.apply_into(t, f.values(), &mut out);
        GridFunction::from_computed(f.space(), out).expect("shifts preserve the boundary condition")
    }

    /// Writes `T(t) f` into `out` for raw nodal samples.
    pub(crate) fn apply_into(&self, t: f64, f: &[f64], out: &mut [f64]) {
        let n = f.len() - 1;
        let t = match self.kind {
            GeneratorKind::NilpotentLeftShift => t,
            GeneratorKind::PeriodicRotation => t - t.floor(),
        };
        let (k, frac) = split_shift(t * n as f64);
        match self.kind {
            GeneratorKind::NilpotentLeftShift => {
                for (i, o) in out.iter_mut().enumerate() {
                    let j = i.saturating_add(k);
                    *o = if j > n || (j == n && frac > 0.0) {
                        0.0
                    } else if frac == 0.0 {
                        f[j]
                    } else {
                        (1.0 - frac) * f[j] + frac * f[j + 1]
                    };
                }
            }
            GeneratorKind::PeriodicRotation => {
                for (i, o) in out.iter_mut().enumerate() {
                    let j = (i + k) % n;
                    *o = if frac == 0.0 {
                        f[j]
                    } else {
                        (1.0 - frac) * f[j] + frac * f[j + 1]
                    };
                }
            }
        }
    }

    /// `R(λ, A) f` from the closed-form kernel.
    ///
    /// Left shift: `u(x) = ∫ₓ¹ e^{λ(x-s)} f(s) ds`. Rotation:
    /// `u(x) = (1 - e^{-λ})⁻¹ ∫₀¹ e^{-λs} f((x+s) mod 1) ds`. Each cell is
    /// integrated exactly against the linear interpolant of `f` and the
    /// kernel is only ever evaluated as `e^{-λ·(distance)}`, so large `λ`
    /// does not overflow.
    pub fn resolvent(&self, lambda: f64, f: &GridFunction) -> Result<GridFunction> {
        self.check_lambda(lambda)?;
        self.check_space(f)?;
        Ok(self.resolvent_unchecked(lambda, f))
    }

    pub(crate) fn resolvent_unchecked(&self, lambda: f64, f: &GridFunction) -> GridFunction {
        let n = f.n_cells();
        let h = f.spacing();
        let a = lambda * h;
        let (w0, w1) = exp_linear_weights(a);
        let decay = (-a).exp();
        let v = f.values();
        let cell = |i: usize| h * (w0 * v[i] + w1 * v[i + 1]);
        let mut u = vec![0.0; n + 1];
        match self.kind {
            GeneratorKind::NilpotentLeftShift => {
                for i in (0..n).rev() {
                    u[i] = decay * u[i + 1] + cell(i);
                }
            }
            GeneratorKind::PeriodicRotation => {
                let mut acc = 0.0;
                let mut pow = 1.0;
                for j in 0..n {
                    acc += pow * cell(j);
                    pow *= decay;
                }
                let u0 = acc / -(-lambda).exp_m1();
                u[n] = u0;
                for i in (1..n).rev() {
                    u[i] = decay * u[i + 1] + cell(i);
                }
                u[0] = u0;
            }
        }
        GridFunction::from_computed(f.space(), u).expect("resolvent preserves the boundary condition")
    }

    /// Independent check of [`GeneratorSpec::resolvent`] through the Laplace
    /// transform `∫₀^{t_max} e^{-λt} T(t) f dt` (trapezoid in time).
    pub fn laplace_resolvent_oracle(&self, lambda: f64, f: &GridFunction, t_max: f64, dt: f64) -> Result<GridFunction> {
        self.check_lambda(lambda)?;
        self.check_space(f)?;
        if !(dt > 0.0 && t_max > 0.0) {
            return Err(Error::InvalidConfig("t_max and dt must be positive".into()));
        }
        let steps = (t_max / dt).round().max(1.0) as usize;
        let dt = t_max / steps as f64;
        let n = f.n_cells();
        let mut acc = vec![0.0; n + 1];
        let mut shifted = vec![0.0; n + 1];
        for k in 0..=steps {
            let t = k as f64 * dt;
            let w = if k == 0 || k == steps { 0.5 * dt } else { dt };
            let weight = w * (-lambda * t).exp();
            self.apply_into(t, f.values(), &mut shifted);
            for (a, s) in acc.iter_mut().zip(&shifted) {
                *a += weight * s;
            }
        }
        GridFunction::from_computed(f.space(), acc)
    }
}

/// Splits an index-space shift into whole cells and a fractional part,
/// snapping values within `NODE_SNAP` of a node.
fn split_shift(s: f64) -> (usize, f64) {
    if !s.is_finite() || s >= usize::MAX as f64 / 4.0 {
        return (usize::MAX / 4, 0.0);
    }
    let mut k = s.floor();
    let mut frac = s - k;
    if frac < NODE_SNAP {
        frac = 0.0;
    } else if frac > 1.0 - NODE_SNAP {
        frac = 0.0;
        k += 1.0;
    }
    (k as usize, frac)
}

/// Centered finite-difference derivative on interior nodes, one-sided at the
/// ends. Test and diagnostic helper.
pub fn finite_difference_derivative(f: &GridFunction) -> Vec<f64> {
    let v = f.values();
    let n = f.n_cells();
    let h = f.spacing();
    (0..=n)
        .map(|i| {
            if i == 0 {
                (v[1] - v[0]) / h
            } else if i == n {
                (v[n] - v[n - 1]) / h
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// `∫₀¹ f` by trapezoid, convenience re-export for callers holding raw samples.
pub fn integrate_samples(values: &[f64]) -> f64 {
    trapezoid(values, 1.0 / (values.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHIFT: GeneratorSpec = GeneratorSpec::left_shift();
    const ROT: GeneratorSpec = GeneratorSpec::rotation();

    fn one_minus_x(n: usize) -> GridFunction {
        GridFunction::from_fn(Space::Shift, n, |x| 1.0 - x).unwrap()
    }

    fn periodic(n: usize) -> GridFunction {
        GridFunction::from_fn(Space::Periodic, n, |x| {
            1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin()
        })
        .unwrap()
    }

    #[test]
    fn left_shift_half() {
        let f = one_minus_x(100);
        let g = SHIFT.apply(0.5, &f).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((g.values()[i] - (0.5 - x).max(0.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn left_shift_is_nilpotent() {
        let f = one_minus_x(64);
        for &t in &[1.0, 1.3, 17.0] {
            assert_eq!(SHIFT.apply(t, &f).unwrap().sup_norm(), 0.0);
        }
    }

    #[test]
    fn rotation_by_one_is_identity() {
        let f = periodic(37);
        assert_eq!(ROT.apply(1.0, &f).unwrap(), f);
        assert_eq!(ROT.apply(3.0, &f).unwrap(), f);
    }

    #[test]
    fn apply_errors() {
        let f = one_minus_x(8);
        assert!(matches!(SHIFT.apply(-0.1, &f), Err(Error::NegativeTime(_))));
        assert!(matches!(ROT.apply(0.1, &f), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn semigroup_law_on_grid_is_exact() {
        let f = GridFunction::from_fn(Space::Shift, 200, |x| (1.0 - x) * (1.0 + x * x)).unwrap();
        let (t, s) = (0.125, 0.37);
        let lhs = SHIFT.apply(t + s, &f).unwrap();
        let rhs = SHIFT.apply(t, &SHIFT.apply(s, &f).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        let p = periodic(200);
        let lhs = ROT.apply(0.625 + 0.875, &p).unwrap();
        let rhs = ROT.apply(0.625, &ROT.apply(0.875, &p).unwrap()).unwrap();
        assert!(lhs.distance(&rhs).unwrap() < 1e-15);
    }

    #[test]
    fn semigroup_law_off_grid_within_interpolation_error() {
        // T(s)f has a kink at the off-grid point 1 - s, so the composition
        // error is first order in h there.
        let err = |n: usize| {
            let f = GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x) * (3.0 * x).cos()).unwrap();
            let (t, s) = (std::f64::consts::SQRT_2 / 10.0, 1.0 / std::f64::consts::PI);
            let lhs = SHIFT.apply(t + s, &f).unwrap();
            let rhs = SHIFT.apply(t, &SHIFT.apply(s, &f).unwrap()).unwrap();
            lhs.distance(&rhs).unwrap()
        };
        let (e1, e2) = (err(400), err(800));
        assert!(e1 < 2.0 / 400.0, "e1 = {e1:e}");
        assert!(e2 < e1, "{e2:e} vs {e1:e}");
    }

    #[test]
    fn resolvent_at_zero_of_one_minus_x() {
        let n = 50;
        let f = one_minus_x(n);
        let u = SHIFT.resolvent(0.0, &f).unwrap();
        for i in 0..=n {
            let x = i as f64 / n as f64;
            assert!((u.values()[i] - (1.0 - x).powi(2) / 2.0).abs() < 1e-14);
        }
        // u' = -f by centered differences (exact for quadratics)
        let d = finite_difference_derivative(&u);
        for (di, fi) in d.iter().zip(f.values()).take(n).skip(1) {
            assert!((di + fi).abs() < 1e-10);
        }
    }

    #[test]
    fn resolvent_of_zero_and_constants() {
        let z = GridFunction::zeros(Space::Shift, 10);
        assert_eq!(SHIFT.resolvent(3.0, &z).unwrap().sup_norm(), 0.0);
        let c = GridFunction::from_fn(Space::Periodic, 40, |_| 2.5).unwrap();
        let u = ROT.resolvent(1.0, &c).unwrap();
        assert!(u.distance(&c).unwrap() < 1e-13);
        let u = ROT.resolvent(4.0, &c).unwrap();
        assert!(u.distance(&c.scale(0.25)).unwrap() < 1e-13);
    }

    #[test]
    fn resolvent_range_errors() {
        let c = periodic(10);
        assert!(matches!(ROT.resolvent(0.0, &c), Err(Error::LambdaOutOfRange { .. })));
        assert!(ROT.resolvent(-1.0, &c).is_err());
        assert!(SHIFT.resolvent(-3.0, &one_minus_x(10)).is_ok());
    }

    #[test]
    fn large_lambda_does_not_overflow() {
        let f = one_minus_x(100);
        let u = SHIFT.resolvent(1e6, &f).unwrap();
        assert!(u.values().iter().all(|v| v.is_finite()));
        assert!(u.scale(1e6).distance(&f).unwrap() < 1e-4);
    }

    #[test]
    fn laplace_oracle_matches_closed_form() {
        let f = one_minus_x(1000);
        let oracle = SHIFT.laplace_resolvent_oracle(0.0, &f, 1.0, 1e-3).unwrap();
        let exact = GridFunction::from_fn(Space::Shift, 1000, |x| (1.0 - x).powi(2) / 2.0).unwrap();
        assert!(oracle.distance(&exact).unwrap() < 1e-6);
        let z = GridFunction::zeros(Space::Shift, 10);
        assert_eq!(
            SHIFT.laplace_resolvent_oracle(1.0, &z, 1.0, 0.1).unwrap().sup_norm(),
            0.0
        );
        let oracle = SHIFT.laplace_resolvent_oracle(2.0, &f, 1.0, 1e-3).unwrap();
        let direct = SHIFT.resolvent(2.0, &f).unwrap();
        assert!((oracle.sup_norm() - direct.sup_norm()).abs() < 1e-4);
        assert!(ROT.laplace_resolvent_oracle(0.0, &periodic(10), 10.0, 0.1).is_err());
    }

    #[test]
    fn periodic_laplace_oracle() {
        let f = periodic(200);
        let oracle = ROT.laplace_resolvent_oracle(2.0, &f, 20.0, 1e-3).unwrap();
        let direct = ROT.resolvent(2.0, &f).unwrap();
        assert!(oracle.distance(&direct).unwrap() < 1e-5);
    }

    #[test]
    fn resolvent_identity() {
        for gen in [SHIFT, ROT] {
            let f = if gen == SHIFT {
                one_minus_x(2000)
            } else {
                periodic(2000)
            };
            let (l, m) = (1.5, 4.0);
            let rl = gen.resolvent(l, &f).unwrap();
            let rm = gen.resolvent(m, &f).unwrap();
            let rhs = gen.resolvent(l, &rm).unwrap().scale(m - l);
            assert!(rl.sub(&rm).unwrap().distance(&rhs).unwrap() < 1e-6);
        }
    }

    #[test]
    fn generator_consistency_improves_with_refinement() {
        let lambda = 2.0;
        let err = |n: usize| {
            let f = GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x).powi(2)).unwrap();
            let u = SHIFT.resolvent(lambda, &f).unwrap();
            let du = finite_difference_derivative(&u);
            (1..n)
                .map(|i| (lambda * u.values()[i] - du[i] - f.values()[i]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(100), err(200));
        assert!(e2 < e1 && e2 < 1e-3);
    }

    #[test]
    fn approximate_identity() {
        let f = GridFunction::from_fn(Space::Shift, 4000, |x| (1.0 - x) * x.exp()).unwrap();
        let errs: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&l| SHIFT.resolvent(l, &f).unwrap().scale(l).distance(&f).unwrap())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    }

    #[test]
    fn resolvent_norms() {
        assert_eq!(SHIFT.resolvent_norm(0.0).unwrap(), 1.0);
        assert!((SHIFT.resolvent_norm(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(ROT.resolvent_norm(2.0).unwrap(), 0.5);
        assert!(ROT.resolvent_norm(0.0).is_err());
    }
}
