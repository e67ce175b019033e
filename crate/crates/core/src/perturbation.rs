//! Rank-one perturbations `Bf = (∫ w f) · h` with `h ∈ E₋₁`, the Desch
//! quantities of `R(λ, A₋₁)B`, the Neumann series for the perturbed
//! resolvent and the splitting schedule for `K ≥ 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrapolation::{extrapolated_resolvent, ExtrapolatedElement};
use crate::lattice::{trapezoid, GridFunction, Space};
use crate::semigroup::GeneratorSpec;

pub const NEUMANN_TOL: f64 = 1e-10;
pub const NEUMANN_MAX_TERMS: usize = 10_000;
const DIVERGENCE_FACTOR: f64 = 1e6;
const POWER_MAX_ITERS: usize = 200;
const POWER_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOnePerturbation {
    weight: Vec<f64>,
    direction: ExtrapolatedElement,
}

impl RankOnePerturbation {
    /// `weight` holds nodal values on the grid of `direction`. No boundary
    /// condition is imposed: `w ≡ 1` is the standard choice on the shift
    /// space even though it does not vanish at 1.
    pub fn new(weight: Vec<f64>, direction: ExtrapolatedElement) -> Result<Self> {
        if weight.len() != direction.n_cells() + 1 {
            return Err(Error::GridMismatch(format!(
                "weight has {} nodes, direction grid has {}",
                weight.len(),
                direction.n_cells() + 1
            )));
        }
        if let Some((index, &value)) = weight.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { weight, direction })
    }

    /// `Bf = (∫₀¹ f) · h`.
    pub fn uniform(direction: ExtrapolatedElement) -> Self {
        Self {
            weight: vec![1.0; direction.n_cells() + 1],
            direction,
        }
    }

    pub fn zero(space: Space, n_cells: usize) -> Self {
        Self::uniform(ExtrapolatedElement::zero(space, n_cells))
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn direction(&self) -> &ExtrapolatedElement {
        &self.direction
    }

    pub fn space(&self) -> Space {
        self.direction.space()
    }

    pub fn n_cells(&self) -> usize {
        self.direction.n_cells()
    }

    /// `w ≥ 0` and `h ∈ E₋₁,₊`.
    pub fn is_positive(&self) -> bool {
        self.weight.iter().all(|&v| v >= 0.0) && self.direction.is_positive()
    }

    /// `sB`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            weight: self.weight.clone(),
            direction: self.direction.scale(s),
        }
    }

    /// `‖w‖₁`, the norm of `f ↦ ∫ w f` on `E`.
    pub fn weight_l1(&self) -> f64 {
        let abs: Vec<f64> = self.weight.iter().map(|v| v.abs()).collect();
        trapezoid(&abs, 1.0 / self.n_cells() as f64)
    }

    /// `∫ w f` by trapezoid.
    pub fn functional(&self, f: &GridFunction) -> Result<f64> {
        self.functional_values(f.values())
    }

    pub(crate) fn functional_values(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.weight.len() {
            return Err(Error::GridMismatch(format!(
                "function has {} nodes, weight has {}",
                f.len(),
                self.weight.len()
            )));
        }
        let prod: Vec<f64> = self.weight.iter().zip(f).map(|(w, v)| w * v).collect();
        Ok(trapezoid(&prod, 1.0 / self.n_cells() as f64))
    }

    fn check_space(&self, gen: &GeneratorSpec) -> Result<()> {
        if gen.space() != self.space() {
            return Err(Error::GridMismatch(format!(
                "perturbation lives on the {:?} space, generator on {:?}",
                self.space(),
                gen.space()
            )));
        }
        Ok(())
    }
}

/// `Bf ∈ E₋₁`.
pub fn apply_perturbation(b: &RankOnePerturbation, f: &GridFunction) -> Result<ExtrapolatedElement> {
    if f.space() != b.space() {
        return Err(Error::GridMismatch("function and perturbation spaces differ".into()));
    }
    Ok(b.direction.scale(b.functional(f)?))
}

/// `R(λ, A₋₁)h`, the range vector of every `R(λ, A₋₁)B`.
pub fn resolvent_direction(gen: &GeneratorSpec, lambda: f64, b: &RankOnePerturbation) -> Result<GridFunction> {
    b.check_space(gen)?;
    extrapolated_resolvent(gen, lambda, &b.direction)
}

/// `R(λ, A₋₁)Bf = (∫ w f) · R(λ, A₋₁)h`.
pub fn resolvent_rb(
    gen: &GeneratorSpec,
    lambda: f64,
    b: &RankOnePerturbation,
    f: &GridFunction,
) -> Result<GridFunction> {
    let r = resolvent_direction(gen, lambda, b)?;
    Ok(r.scale(b.functional(f)?))
}

/// `R(λ, A₋₁)B` maps every function in `basis` (assumed positive) to a
/// node-wise positive function.
pub fn rb_positive_on(
    gen: &GeneratorSpec,
    lambda: f64,
    b: &RankOnePerturbation,
    basis: &[GridFunction],
) -> Result<bool> {
    let r = resolvent_direction(gen, lambda, b)?;
    for f in basis {
        let out = r.scale(b.functional(f)?);
        if !out.is_nonnegative(out.eps_pos()) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeschReport {
    pub lambda: f64,
    /// `‖R(λ, A₋₁)B‖`
    pub k: f64,
    /// spectral radius of `R(λ, A₋₁)B` from the rank-one formula
    pub spr: f64,
    /// the same quantity by power iteration
    pub spr_power: f64,
    pub norm_condition_met: bool,
    pub spr_condition_met: bool,
}

/// Desch quantities without requiring `B ≥ 0`.
pub fn desch_numbers(gen: &GeneratorSpec, lambda: f64, b: &RankOnePerturbation) -> Result<DeschReport> {
    let r = resolvent_direction(gen, lambda, b)?;
    let k = r.sup_norm() * b.weight_l1();
    let spr = b.functional(&r)?.abs();
    let spr_power = power_iteration(gen, &r, b)?;
    Ok(DeschReport {
        lambda,
        k,
        spr,
        spr_power,
        norm_condition_met: k < 1.0,
        spr_condition_met: spr < 1.0,
    })
}

/// Desch quantities for a positive perturbation.
pub fn desch_condition(gen: &GeneratorSpec, lambda: f64, b: &RankOnePerturbation) -> Result<DeschReport> {
    if !b.is_positive() {
        return Err(Error::NotPositive("perturbation B".into()));
    }
    desch_numbers(gen, lambda, b)
}

fn power_iteration(gen: &GeneratorSpec, r: &GridFunction, b: &RankOnePerturbation) -> Result<f64> {
    let n = r.n_cells();
    let mut v = match gen.space() {
        Space::Shift => GridFunction::from_fn(Space::Shift, n, |x| 1.0 - x)?,
        Space::Periodic => GridFunction::from_fn(Space::Periodic, n, |_| 1.0)?,
    };
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let next = r.scale(b.functional(&v)?);
        let norm = next.sup_norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let ratio = norm / v.sup_norm();
        v = next.scale(1.0 / norm);
        let converged = (ratio - estimate).abs() <= POWER_REL_TOL * ratio;
        estimate = ratio;
        if converged {
            break;
        }
    }
    Ok(estimate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannResult {
    pub value: GridFunction,
    pub term_norms: Vec<f64>,
    /// `(last term)·spr/(1 − spr)`
    pub tail_bound: f64,
}

/// Sums `Σₙ (R(λ,A₋₁)B)ⁿ u₀` until a term drops below `tol`.
fn neumann_series(
    gen: &GeneratorSpec,
    lambda: f64,
    b: &RankOnePerturbation,
    u0: GridFunction,
    tol: f64,
    max_terms: usize,
) -> Result<NeumannResult> {
    let r = resolvent_direction(gen, lambda, b)?;
    let spr = b.functional(&r)?.abs();
    let initial = u0.sup_norm();
    let mut term_norms = vec![initial];
    let mut sum = u0.clone();
    let mut term = u0;
    while term.sup_norm() >= tol {
        if term_norms.len() >= max_terms {
            return Err(Error::NonConvergence {
                max_terms,
                last_norm: term.sup_norm(),
            });
        }
        term = r.scale(b.functional(&term)?);
        let norm = term.sup_norm();
        term_norms.push(norm);
        if norm > DIVERGENCE_FACTOR * initial {
            return Err(Error::NeumannDivergence {
                terms: term_norms.len(),
                term_norm: norm,
            });
        }
        sum = sum.add(&term)?;
    }
    let last = *term_norms.last().expect("at least one term");
    let tail_bound = if spr < 1.0 {
        last * spr / (1.0 - spr)
    } else {
        f64::INFINITY
    };
    Ok(NeumannResult {
        value: sum,
        term_norms,
        tail_bound,
    })
}

/// `(λ − A₋₁ − B)⁻¹ f` by the Neumann series started at `R(λ, A)f`.
///
/// The series is run even when `spr ≥ 1`, so a failing generation condition
/// surfaces as [`Error::NeumannDivergence`] or [`Error::NonConvergence`].
pub fn perturbed_resolvent(
    gen: &GeneratorSpec,
    lambda: f64,
    b: &RankOnePerturbation,
    f: &GridFunction,
    tol: f64,
    max_terms: usize,
) -> Result<NeumannResult> {
    let u0 = gen.resolvent(lambda, f)?;
    neumann_series(gen, lambda, b, u0, tol, max_terms)
}

/// `(λ − A₋₁ − B)⁻¹ h` for the direction `h` of `B` itself.
pub fn perturbed_resolvent_of_direction(
    gen: &GeneratorSpec,
    lambda: f64,
    b: &RankOnePerturbation,
    tol: f64,
    max_terms: usize,
) -> Result<NeumannResult> {
    let r = resolvent_direction(gen, lambda, b)?;
    neumann_series(gen, lambda, b, r, tol, max_terms)
}

/// Rank-one closed form `R(λ)f + (∫ w R(λ)f)/(1 − c) · R(λ, A₋₁)h` with
/// `c = ∫ w R(λ, A₋₁)h`.
pub fn perturbed_resolvent_closed_form(
    gen: &GeneratorSpec,
    lambda: f64,
    b: &RankOnePerturbation,
    f: &GridFunction,
) -> Result<GridFunction> {
    let u0 = gen.resolvent(lambda, f)?;
    let r = resolvent_direction(gen, lambda, b)?;
    let c = b.functional(&r)?;
    if c.abs() >= 1.0 {
        return Err(Error::SpectralRadiusTooLarge { spr: c.abs() });
    }
    u0.axpy(b.functional(&u0)? / (1.0 - c), &r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStage {
    pub index: usize,
    /// the stage perturbation is `coupling · B`
    pub coupling: f64,
    /// `‖(λ − A₋₁ − (j/n)B)⁻¹ (1/n)B‖`
    pub stage_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSchedule {
    pub lambda: f64,
    pub n: usize,
    /// `‖(λ − A₋₁ − B)⁻¹ B‖`, zero when no splitting is needed
    pub perturbed_norm: f64,
    pub stages: Vec<SplitStage>,
}

/// Splits `B` into `n` equal parts so that each part satisfies the Desch
/// norm condition relative to the generator perturbed by the earlier parts.
pub fn split_schedule(gen: &GeneratorSpec, lambda: f64, b: &RankOnePerturbation) -> Result<SplitSchedule> {
    let report = desch_condition(gen, lambda, b)?;
    if !report.spr_condition_met {
        return Err(Error::SpectralRadiusTooLarge { spr: report.spr });
    }
    if report.norm_condition_met {
        return Ok(SplitSchedule {
            lambda,
            n: 1,
            perturbed_norm: 0.0,
            stages: vec![SplitStage {
                index: 0,
                coupling: 1.0,
                stage_k: report.k,
            }],
        });
    }
    let w1 = b.weight_l1();
    let r = resolvent_direction(gen, lambda, b)?;
    let z = neumann_series(gen, lambda, b, r.clone(), NEUMANN_TOL, NEUMANN_MAX_TERMS)?;
    let perturbed_norm = w1 * z.value.sup_norm();
    let n = 1 + perturbed_norm.floor() as usize;
    let mut stages = Vec::with_capacity(n);
    for j in 0..n {
        let base = b.scaled(j as f64 / n as f64);
        let zj = neumann_series(gen, lambda, &base, r.clone(), NEUMANN_TOL, NEUMANN_MAX_TERMS)?;
        let stage_k = w1 * zj.value.sup_norm() / n as f64;
        if stage_k >= 1.0 {
            return Err(Error::DeschConditionFails { k: stage_k, lambda });
        }
        stages.push(SplitStage {
            index: j,
            coupling: 1.0 / n as f64,
            stage_k,
        });
    }
    Ok(SplitSchedule {
        lambda,
        n,
        perturbed_norm,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Density;

    const SHIFT: GeneratorSpec = GeneratorSpec::left_shift();

    fn uniform(n: usize, d: Density) -> RankOnePerturbation {
        RankOnePerturbation::uniform(ExtrapolatedElement::from_density(Space::Shift, n, d).unwrap())
    }

    fn one_minus_x(n: usize) -> GridFunction {
        GridFunction::from_fn(Space::Shift, n, |x| 1.0 - x).unwrap()
    }

    #[test]
    fn apply_examples() {
        let b = uniform(200, Density::constant(1.0));
        let bf = apply_perturbation(&b, &one_minus_x(200)).unwrap();
        assert!(
            bf.antiderivative()
                .distance(&b.direction().antiderivative().scale(0.5))
                .unwrap()
                < 1e-15
        );
        assert!(bf.is_positive());
        let z = apply_perturbation(&b, &GridFunction::zeros(Space::Shift, 200)).unwrap();
        assert_eq!(z.antiderivative().sup_norm(), 0.0);
    }

    #[test]
    fn resolvent_rb_examples() {
        let n = 1000;
        let b = uniform(n, Density::constant(1.0));
        let out = resolvent_rb(&SHIFT, 1.0, &b, &one_minus_x(n)).unwrap();
        let exact = GridFunction::from_fn(Space::Shift, n, |x| 0.5 * -(x - 1.0f64).exp_m1()).unwrap();
        assert!(out.distance(&exact).unwrap() < 1e-12);

        let step = uniform(n, Density::sign_step());
        let f = GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x) * (1.0 + x)).unwrap();
        assert!(resolvent_rb(&SHIFT, 0.0, &step, &f).unwrap().is_nonnegative(0.0));
        assert_eq!(
            resolvent_rb(&SHIFT, 0.0, &step, &GridFunction::zeros(Space::Shift, n))
                .unwrap()
                .sup_norm(),
            0.0
        );
    }

    #[test]
    fn desch_closed_forms() {
        let b = uniform(10_000, Density::constant(1.0));
        let rep = desch_condition(&SHIFT, 1.0, &b).unwrap();
        let e = (-1.0f64).exp();
        assert!((rep.k - (1.0 - e)).abs() < 1e-9);
        assert!((rep.spr - e).abs() < 1e-8);
        assert!((rep.spr_power - rep.spr).abs() < 1e-12);
        assert!(rep.norm_condition_met && rep.spr_condition_met);
        assert!(rep.spr <= rep.k);
    }

    #[test]
    fn desch_large_lambda_and_monotone() {
        let b = uniform(2000, Density::constant(1.0));
        let ks: Vec<f64> = [0.0, 1.0, 10.0, 100.0]
            .iter()
            .map(|&l| desch_condition(&SHIFT, l, &b).unwrap().k)
            .collect();
        assert!(ks.windows(2).all(|w| w[1] < w[0]));
        assert!(ks[3] < 0.011);
    }

    #[test]
    fn desch_split_instance() {
        let b = uniform(4000, Density::indicator(0.0, 0.25, 8.0).unwrap());
        let rep = desch_condition(&SHIFT, 0.0, &b).unwrap();
        assert!((rep.k - 2.0).abs() < 1e-9);
        assert!((rep.spr - 0.25).abs() < 1e-6);
        assert!(!rep.norm_condition_met && rep.spr_condition_met);
    }

    #[test]
    fn desch_rejects_nonpositive() {
        let b = uniform(100, Density::sign_step());
        assert!(matches!(desch_condition(&SHIFT, 0.0, &b), Err(Error::NotPositive(_))));
        assert!(desch_numbers(&SHIFT, 0.0, &b).is_ok());
    }

    #[test]
    fn neumann_matches_closed_form() {
        let n = 1000;
        let b = uniform(n, Density::constant(1.0));
        let f = one_minus_x(n);
        let series = perturbed_resolvent(&SHIFT, 1.0, &b, &f, NEUMANN_TOL, NEUMANN_MAX_TERMS).unwrap();
        let closed = perturbed_resolvent_closed_form(&SHIFT, 1.0, &b, &f).unwrap();
        assert!(series.value.distance(&closed).unwrap() <= 1e-8 * closed.sup_norm());
        let plain = SHIFT.resolvent(1.0, &f).unwrap();
        assert!(series.value.sub(&plain).unwrap().is_nonnegative(0.0));
    }

    #[test]
    fn neumann_with_zero_perturbation() {
        let b = RankOnePerturbation::zero(Space::Shift, 100);
        let f = one_minus_x(100);
        let out = perturbed_resolvent(&SHIFT, 2.0, &b, &f, NEUMANN_TOL, NEUMANN_MAX_TERMS).unwrap();
        assert_eq!(out.value, SHIFT.resolvent(2.0, &f).unwrap());
    }

    #[test]
    fn neumann_diverges_past_unit_spectral_radius() {
        let b = uniform(500, Density::constant(1.0));
        let spr = desch_condition(&SHIFT, 1.0, &b).unwrap().spr;
        let big = b.scaled(1.5 / spr);
        let err = perturbed_resolvent(&SHIFT, 1.0, &big, &one_minus_x(500), NEUMANN_TOL, NEUMANN_MAX_TERMS);
        assert!(matches!(err, Err(Error::NeumannDivergence { .. })));
    }

    #[test]
    fn rank_one_square() {
        let n = 400;
        let b = uniform(n, Density::indicator(0.2, 0.7, 1.3).unwrap());
        let f = GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x) * (2.0 + x.sin())).unwrap();
        let once = resolvent_rb(&SHIFT, 0.5, &b, &f).unwrap();
        let twice = resolvent_rb(&SHIFT, 0.5, &b, &once).unwrap();
        let spr = desch_condition(&SHIFT, 0.5, &b).unwrap().spr;
        assert!(twice.distance(&once.scale(spr)).unwrap() < 1e-12);
    }

    #[test]
    fn split_trivial_cases() {
        let b = uniform(500, Density::constant(1.0));
        let s = split_schedule(&SHIFT, 1.0, &b).unwrap();
        assert_eq!(s.n, 1);
        let z = split_schedule(&SHIFT, 1.0, &RankOnePerturbation::zero(Space::Shift, 50)).unwrap();
        assert_eq!(z.n, 1);
        assert_eq!(z.stages[0].stage_k, 0.0);
    }

    #[test]
    fn split_demo_instance() {
        let b = uniform(4000, Density::indicator(0.0, 0.25, 8.0).unwrap());
        let s = split_schedule(&SHIFT, 0.0, &b).unwrap();
        // ‖(−A₋₁ − B)⁻¹B‖ = 2/(1 − ¼)
        assert!((s.perturbed_norm - 8.0 / 3.0).abs() < 1e-6);
        assert_eq!(s.n, 3);
        for (j, st) in s.stages.iter().enumerate() {
            let exact = (2.0 / 3.0) / (1.0 - j as f64 / 12.0);
            assert!((st.stage_k - exact).abs() < 1e-6);
            assert!(st.stage_k < 1.0);
        }
    }
}
