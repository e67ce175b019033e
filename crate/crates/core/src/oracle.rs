//! Reference solvers that share no code path with the semigroup engine.
//!
//! The transport problem `u_t = u_x + (∫u)·h` with `u(t,1) = 0` reduces to a
//! scalar Volterra equation for the mass `m(t) = ∫₀¹ u(t,y) dy`; the state
//! then follows from characteristics. The upwind resolvent is a first-order
//! finite-difference check on the closed-form resolvents.

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::extrapolation::Monotonicity;
use crate::lattice::{GridFunction, Space};
use crate::semigroup::{GeneratorKind, GeneratorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraSolution {
    pub space: Space,
    pub dt: f64,
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub a_values: Vec<f64>,
    pub kernel_values: Vec<f64>,
}

impl VolterraSolution {
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("nonempty time grid")
    }

    /// Mass at an arbitrary time, linear between grid points.
    pub fn mass_at(&self, t: f64) -> f64 {
        let pos = (t / self.dt).clamp(0.0, (self.times.len() - 1) as f64);
        let k = (pos.floor() as usize).min(self.times.len() - 2);
        let frac = pos - k as f64;
        self.mass[k] + frac * (self.mass[k + 1] - self.mass[k])
    }
}

/// Solves `m(t) = a(t) + ∫₀ᵗ k(t−s) m(s) ds` by the product trapezoid rule,
/// with `a(t) = ∫ T(t)u₀` and `k(r) = ∫ T₋₁(r)ρ`. On the shift space
/// `a(t) = ∫ₜ¹ u₀` and `k(r) = ∫ᵣ¹ ρ`; on the periodic space both are
/// constant in time.
pub fn volterra_mass(u0: &GridFunction, density: &Density, horizon: f64, dt: f64) -> Result<VolterraSolution> {
    if !(dt > 0.0 && dt.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidConfig("horizon and dt must be positive".into()));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let (a_values, kernel_values): (Vec<f64>, Vec<f64>) = match u0.space() {
        Space::Shift => times
            .iter()
            .map(|&t| (u0.integral_from(t), density.integral(t, 1.0)))
            .unzip(),
        Space::Periodic => {
            let a = u0.integrate();
            let k = density.integral(0.0, 1.0);
            (vec![a; times.len()], vec![k; times.len()])
        }
    };
    let mut mass = vec![0.0; times.len()];
    mass[0] = a_values[0];
    let denom = 1.0 - 0.5 * dt * kernel_values[0];
    for j in 1..=steps {
        let mut acc = 0.5 * kernel_values[j] * mass[0];
        for l in 1..j {
            acc += kernel_values[j - l] * mass[l];
        }
        mass[j] = (a_values[j] + dt * acc) / denom;
    }
    Ok(VolterraSolution {
        space: u0.space(),
        dt,
        times,
        mass,
        a_values,
        kernel_values,
    })
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// `u(t,x) = (T(t)u₀)(x) + ∫₀ᵗ m(s) ρ̃(x + t − s) ds` on the nodes of an
/// `n_cells` grid, where `ρ̃` is `ρ` cut off beyond 1 (shift) or extended
/// periodically (rotation).
///
/// The `s`-integral is split at the time grid of `sol` and at every `s`
/// where `x + t − s` crosses a breakpoint of `ρ̃`; each piece uses
/// three-point Gauss quadrature.
pub fn characteristics_solution(
    u0: &GridFunction,
    density: &Density,
    sol: &VolterraSolution,
    t: f64,
    n_cells: usize,
) -> Result<GridFunction> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t > sol.horizon() * (1.0 + 1e-12) {
        return Err(Error::TimeOutOfRange {
            time: t,
            horizon: sol.horizon(),
        });
    }
    if n_cells == 0 {
        return Err(Error::InvalidGrid);
    }
    let space = u0.space();
    let mut breaks = density.breakpoints();
    // the cutoff at 1 (shift) or the periodic seam is a discontinuity too
    breaks.push(match space {
        Space::Shift => 1.0,
        Space::Periodic => 0.0,
    });
    let rho = |y: f64| match space {
        Space::Shift => {
            if y > 1.0 {
                0.0
            } else {
                density.eval(y)
            }
        }
        Space::Periodic => density.eval(y.rem_euclid(1.0)),
    };
    let grid_steps = (t / sol.dt).floor() as usize;
    let mut values = Vec::with_capacity(n_cells + 1);
    let mut cuts = Vec::new();
    for i in 0..=n_cells {
        let x = i as f64 / n_cells as f64;
        let transport = match space {
            Space::Shift => {
                if x + t <= 1.0 {
                    u0.interp_eval(x + t)?
                } else {
                    0.0
                }
            }
            Space::Periodic => u0.interp_eval((x + t).rem_euclid(1.0))?,
        };
        cuts.clear();
        cuts.push(0.0);
        cuts.extend((1..=grid_steps).map(|k| k as f64 * sol.dt).filter(|&s| s < t));
        cuts.push(t);
        // y = x + t − s runs over [x, x + t]
        let (lo_shift, hi_shift) = match space {
            Space::Shift => (0, 0),
            Space::Periodic => (0, (x + t).floor() as i64 + 1),
        };
        for k in lo_shift..=hi_shift {
            for &b in &breaks {
                let s = x + t - (b + k as f64);
                if s > 0.0 && s < t {
                    cuts.push(s);
                }
            }
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        let mut duhamel = 0.0;
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            if q - p <= 1e-15 {
                continue;
            }
            let mid = 0.5 * (p + q);
            let half = 0.5 * (q - p);
            for (node, weight) in GAUSS3 {
                let s = mid + half * node;
                duhamel += half * weight * sol.mass_at(s) * rho(x + t - s);
            }
        }
        values.push(transport + duhamel);
    }
    GridFunction::from_computed(space, values)
}

/// Upwind solve of `(λ − D) u = f` with `(Du)_i = (u_{i+1} − u_i)/h`,
/// closed by `u_n = 0` (shift) or `u_n = u_0` (rotation).
pub fn discrete_resolvent_oracle(gen: &GeneratorSpec, lambda: f64, f: &GridFunction) -> Result<GridFunction> {
    if f.space() != gen.space() {
        return Err(Error::GridMismatch("generator and function spaces differ".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::LambdaOutOfRange { lambda, bound: 0.0 });
    }
    let n = f.n_cells();
    let h = f.spacing();
    let a = 1.0 / (1.0 + lambda * h);
    let v = f.values();
    let mut u = vec![0.0; n + 1];
    match gen.kind {
        GeneratorKind::NilpotentLeftShift => {
            for i in (0..n).rev() {
                u[i] = a * (u[i + 1] + h * v[i]);
            }
        }
        GeneratorKind::PeriodicRotation => {
            let cycle = 1.0 - a.powi(n as i32);
            if cycle <= 0.0 {
                return Err(Error::LambdaOutOfRange {
                    lambda,
                    bound: gen.spectral_bound(),
                });
            }
            let mut acc = 0.0;
            let mut pow = a;
            for vj in &v[..n] {
                acc += pow * h * vj;
                pow *= a;
            }
            u[0] = acc / cycle;
            u[n] = u[0];
            for i in (1..n).rev() {
                u[i] = a * (u[i + 1] + h * v[i]);
            }
        }
    }
    GridFunction::from_computed(f.space(), u)
}

pub type Profile = fn(f64) -> f64;

/// Smooth strictly positive periodic densities used to probe the positive
/// cone of the periodic extrapolation space.
pub fn smooth_periodic_densities() -> Vec<(&'static str, Profile)> {
    use std::f64::consts::PI;
    vec![
        ("constant", |_| 1.0),
        ("cosine", |x| 1.0 + 0.9 * (2.0 * PI * x).cos()),
        ("bump", |x| 0.05 + (4.0 * ((2.0 * PI * (x - 0.3)).cos() - 1.0)).exp()),
        ("two-mode", |x| 2.0 + (2.0 * PI * x).sin() + 0.5 * (6.0 * PI * x).cos()),
        ("sine-squared", |x| 0.1 + (PI * x).sin().powi(2)),
    ]
}

/// Solves `F − F' = μ` for each density in [`smooth_periodic_densities`] with
/// the upwind scheme and reports the common monotonicity of `F e^{-x}`, or
/// `None` if the densities disagree.
pub fn periodic_direction_oracle() -> Option<Monotonicity> {
    let n = 2000;
    let gen = GeneratorSpec::rotation();
    let mut verdict = None;
    for (_, mu) in smooth_periodic_densities() {
        let mu = GridFunction::from_fn(Space::Periodic, n, mu).ok()?;
        let f = discrete_resolvent_oracle(&gen, 1.0, &mu).ok()?;
        let q: Vec<f64> = f
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * (-(i as f64) / n as f64).exp())
            .collect();
        let here = if q.windows(2).all(|w| w[1] < w[0]) {
            Monotonicity::NonIncreasing
        } else if q.windows(2).all(|w| w[1] > w[0]) {
            Monotonicity::NonDecreasing
        } else {
            return None;
        };
        match verdict {
            None => verdict = Some(here),
            Some(v) if v != here => return None,
            _ => {}
        }
    }
    verdict
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_minus_x(n: usize) -> GridFunction {
        GridFunction::from_fn(Space::Shift, n, |x| 1.0 - x).unwrap()
    }

    #[test]
    fn volterra_without_feedback_is_transport_mass() {
        let sol = volterra_mass(&one_minus_x(200), &Density::zero(), 1.0, 0.01).unwrap();
        for (t, m) in sol.times.iter().zip(&sol.mass) {
            assert!((m - (1.0 - t).powi(2) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn volterra_initial_mass() {
        let sol = volterra_mass(&one_minus_x(100), &Density::constant(1.0), 1.0, 0.01).unwrap();
        assert!((sol.mass[0] - 0.5).abs() < 1e-15);
        assert!(sol.mass.iter().all(|&m| m >= 0.0));
        assert!((sol.kernel_values[10] - 0.9).abs() < 1e-14);
    }

    #[test]
    fn volterra_richardson_self_consistency() {
        let u0 = one_minus_x(1000);
        let h = Density::constant(1.0);
        let a = volterra_mass(&u0, &h, 1.0, 1e-4).unwrap();
        let b = volterra_mass(&u0, &h, 1.0, 5e-5).unwrap();
        assert!((a.mass_at(0.5) - b.mass_at(0.5)).abs() < 1e-7);
    }

    #[test]
    fn characteristics_pure_transport() {
        let u0 = one_minus_x(100);
        let sol = volterra_mass(&u0, &Density::zero(), 1.5, 0.01).unwrap();
        let u = characteristics_solution(&u0, &Density::zero(), &sol, 0.3, 100).unwrap();
        let expected =
            GridFunction::from_fn(Space::Shift, 100, |x| if x + 0.3 <= 1.0 { 0.7 - x } else { 0.0 }).unwrap();
        assert!(u.distance(&expected).unwrap() < 1e-12);
        let gone = characteristics_solution(&u0, &Density::zero(), &sol, 1.2, 100).unwrap();
        assert_eq!(gone.sup_norm(), 0.0);
        assert!(characteristics_solution(&u0, &Density::zero(), &sol, 2.0, 100).is_err());
    }

    #[test]
    fn duhamel_mass_consistency() {
        let n = 2000;
        let u0 = one_minus_x(n);
        let h = Density::constant(1.0);
        let sol = volterra_mass(&u0, &h, 1.0, 2.5e-4).unwrap();
        for &t in &[0.25, 0.5, 0.9] {
            let u = characteristics_solution(&u0, &h, &sol, t, n).unwrap();
            assert!((u.integrate() - sol.mass_at(t)).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn periodic_characteristics_conserve_mass_balance() {
        let n = 500;
        let u0 = GridFunction::from_fn(Space::Periodic, n, |x| {
            1.0 + 0.5 * (std::f64::consts::PI * x).sin().powi(2)
        })
        .unwrap();
        let h = Density::from_nodes(&[1.0, 2.0, 0.5, 1.0]).unwrap();
        let sol = volterra_mass(&u0, &h, 1.5, 1e-3).unwrap();
        let u = characteristics_solution(&u0, &h, &sol, 1.3, n).unwrap();
        assert!((u.integrate() - sol.mass_at(1.3)).abs() < 1e-5);
    }

    #[test]
    fn discrete_resolvent_first_order() {
        let gen = GeneratorSpec::left_shift();
        let mut errs = Vec::new();
        for &n in &[250, 500, 1000] {
            let u = discrete_resolvent_oracle(&gen, 0.0, &one_minus_x(n)).unwrap();
            let exact = GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x).powi(2) / 2.0).unwrap();
            errs.push(u.distance(&exact).unwrap());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 0.9, "order {order}");
        }
    }

    #[test]
    fn discrete_resolvent_agrees_with_closed_form() {
        let gen = GeneratorSpec::left_shift();
        let f = |n| GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x) * (3.0 * x).cos()).unwrap();
        let err = |n| {
            let f = f(n);
            discrete_resolvent_oracle(&gen, 2.0, &f)
                .unwrap()
                .distance(&gen.resolvent(2.0, &f).unwrap())
                .unwrap()
        };
        let (e1, e2) = (err(400), err(800));
        assert!(e1 < 5.0 / 400.0);
        assert!((e1 / e2).log2() >= 0.9);
    }

    #[test]
    fn discrete_resolvent_trivial_cases() {
        let rot = GeneratorSpec::rotation();
        let c = GridFunction::from_fn(Space::Periodic, 64, |_| 3.0).unwrap();
        let u = discrete_resolvent_oracle(&rot, 1.0, &c).unwrap();
        assert!(u.distance(&c).unwrap() < 1e-12);
        assert!(discrete_resolvent_oracle(&rot, 0.0, &c).is_err());
        let z = discrete_resolvent_oracle(
            &GeneratorSpec::left_shift(),
            1.0,
            &GridFunction::zeros(Space::Shift, 10),
        )
        .unwrap();
        assert_eq!(z.sup_norm(), 0.0);
    }

    #[test]
    fn direction_oracle_is_decisive() {
        assert!(periodic_direction_oracle().is_some());
    }
}
