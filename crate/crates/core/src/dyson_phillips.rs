//! Dyson–Phillips construction of the semigroup generated by the part of
//! `A₋₁ + B` in `E`, for rank-one `B`.
//!
//! The series runs for the rescaled generator `A − λ` and results are
//! multiplied back by `e^{λt}`. Because `B` has rank one, every term is
//! `Sₙ(t) = ∫₀ᵗ mₙ₋₁(s) Φ(t − s) ds` with `Φ(σ) = e^{-λσ} T₋₁(σ) h` and the
//! scalar mass `mₙ₋₁(s) = ∫ w Sₙ₋₁(s)`, so the recursion only has to carry
//! masses on the time grid. States are assembled once, at the end, from the
//! summed masses.
//!
//! Two assemblies are available:
//!
//! * integration by parts, through `V(t) = ∫₀ᵗ Φ = R(λ,A₋₁)h − e^{-λt}T(t)R(λ,A₋₁)h`,
//!   which works for any direction `h ∈ E₋₁`;
//! * direct quadrature of the shifted density of `h`, when `h` has one.
//!   All weights are nonnegative, so positivity is structural.

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::extrapolation::extrapolated_resolvent;
use crate::lattice::{GridFunction, Space};
use crate::perturbation::{desch_numbers, resolvent_direction, RankOnePerturbation, SplitSchedule};
use crate::semigroup::GeneratorSpec;

pub const DEFAULT_TOL_TAIL: f64 = 1e-8;
pub const DEFAULT_MAX_TERMS: usize = 1000;
/// Target for the rescaled Desch constant when choosing `λ_shift`.
pub const DEFAULT_K_TARGET: f64 = 0.7;
/// Tolerance of the density/integration-by-parts cross-check.
pub const PATH_TOL: f64 = 1e-6;
const ENVELOPE_MARGIN: f64 = 1.1;
const PROBES: usize = 12;
const MAX_SHIFT_DOUBLINGS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub lambda_shift: f64,
    pub horizon: f64,
    pub dt: f64,
    pub tol_tail: f64,
    pub max_terms: usize,
}

impl DpConfig {
    pub fn new(lambda_shift: f64, horizon: f64, dt: f64) -> Self {
        Self {
            lambda_shift,
            horizon,
            dt,
            tol_tail: DEFAULT_TOL_TAIL,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if self.dt > self.horizon {
            return bad("dt exceeds the horizon");
        }
        if !(self.tol_tail > 0.0 && self.tol_tail.is_finite()) {
            return bad("tol_tail must be positive");
        }
        if self.max_terms == 0 {
            return bad("max_terms must be at least 1");
        }
        if !self.lambda_shift.is_finite() {
            return bad("lambda_shift must be finite");
        }
        Ok(())
    }
}

/// Smallest `λ ∈ {½, 1, 2, 4, …}` with `‖R(λ, A₋₁)B‖ ≤ 0.7`.
pub fn default_lambda_shift(gen: &GeneratorSpec, b: &RankOnePerturbation) -> Result<f64> {
    let mut lambda = 0.5;
    for _ in 0..MAX_SHIFT_DOUBLINGS {
        if desch_numbers(gen, lambda, b)?.k <= DEFAULT_K_TARGET {
            return Ok(lambda);
        }
        lambda *= 2.0;
    }
    Err(Error::DeschConditionFails {
        k: desch_numbers(gen, lambda, b)?.k,
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvolutionPath {
    Density,
    IntegrationByParts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    /// `sup_t ‖Sₙ(t)u₀‖` of the rescaled terms, sampled at the output times
    /// and a fixed set of probe times.
    pub term_norms: Vec<f64>,
    /// Rescaled tail bound `(last term)·K/(1 − K)`.
    pub tail_bound: f64,
    /// Tail bound at each output time after multiplying back by `e^{λt}`.
    pub tail_bounds: Vec<f64>,
    pub lambda_shift: f64,
    pub k: f64,
    pub path: EvolutionPath,
    /// Largest sup-norm gap between the two assemblies, when both ran.
    pub path_discrepancy: Option<f64>,
    /// Present when `u₀ ≥ 0` and `B ≥ 0`.
    pub positivity_ok: Option<bool>,
    /// `‖Sₙ‖ ≤ 1.1·Kⁿ‖u₀‖` for every kept term.
    pub envelope_ok: bool,
    /// Largest ratio of consecutive term norms above the noise floor.
    pub observed_ratio: Option<f64>,
}

impl EvolutionResult {
    pub fn terms_kept(&self) -> usize {
        self.term_norms.len()
    }

    pub fn state_at(&self, t: f64) -> Option<&GridFunction> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t))
            .map(|i| &self.states[i])
    }
}

/// `(last term norm)·K/(1 − K)`.
pub fn dp_tail_bound(k: f64, term_norms: &[f64]) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::DeschConditionFails { k, lambda: f64::NAN });
    }
    let last = term_norms
        .last()
        .ok_or_else(|| Error::InvalidConfig("no terms computed".into()))?;
    Ok(last * k / (1.0 - k))
}

/// `‖Sₙ‖ ≤ margin·Kⁿ·scale` for all `n`.
pub fn geometric_envelope_holds(k: f64, term_norms: &[f64], scale: f64) -> bool {
    let mut bound = scale;
    term_norms.iter().all(|&norm| {
        let ok = norm <= ENVELOPE_MARGIN * bound + 1e-14 * (1.0 + scale);
        bound *= k;
        ok
    })
}

#[derive(Debug, Clone, Copy)]
struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    fn new(horizon: f64, dt: f64) -> Self {
        let steps = (horizon / dt).round().max(1.0) as usize;
        Self {
            dt: horizon / steps as f64,
            steps,
        }
    }

    fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    fn horizon(&self) -> f64 {
        self.time(self.steps)
    }

    fn index_of(&self, t: f64) -> Result<usize> {
        let pos = t / self.dt;
        let k = pos.round();
        if t < 0.0 || k > self.steps as f64 || (pos - k).abs() > 1e-6 {
            return Err(Error::TimeOutOfRange {
                time: t,
                horizon: self.horizon(),
            });
        }
        Ok(k as usize)
    }

    fn probes(&self, extra: &[usize]) -> Vec<usize> {
        let mut p: Vec<usize> = (1..=PROBES)
            .map(|i| (i * self.steps).div_ceil(PROBES))
            .chain(extra.iter().copied())
            .filter(|&k| k > 0)
            .collect();
        p.sort_unstable();
        p.dedup();
        p
    }
}

/// A time-indexed family of nodal vectors on the time grid.
enum Family {
    /// `k ↦ base + sign·e^{-λ t_k} T(t_k) profile`
    Generated {
        gen: GeneratorSpec,
        lambda: f64,
        profile: Vec<f64>,
        base: Option<Vec<f64>>,
        sign: f64,
    },
    Stored(Vec<Vec<f64>>),
}

impl Family {
    fn orbit(gen: GeneratorSpec, lambda: f64, u0: &GridFunction) -> Self {
        Family::Generated {
            gen,
            lambda,
            profile: u0.values().to_vec(),
            base: None,
            sign: 1.0,
        }
    }

    /// `V(t) = r − e^{-λt} T(t) r`.
    fn integrated_direction(gen: GeneratorSpec, lambda: f64, r: &GridFunction) -> Self {
        Family::Generated {
            gen,
            lambda,
            profile: r.values().to_vec(),
            base: Some(r.values().to_vec()),
            sign: -1.0,
        }
    }

    /// `out += Σ_j β_j F_j`.
    fn accumulate(&self, grid: &TimeGrid, beta: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        match self {
            Family::Generated {
                gen,
                lambda,
                profile,
                base,
                sign,
            } => {
                if let Some(base) = base {
                    let total: f64 = beta.iter().sum();
                    for (o, b) in out.iter_mut().zip(base) {
                        *o += total * b;
                    }
                }
                for (j, &bj) in beta.iter().enumerate() {
                    if bj == 0.0 {
                        continue;
                    }
                    let t = grid.time(j);
                    gen.apply_into(t, profile, scratch);
                    let c = sign * bj * (-lambda * t).exp();
                    for (o, s) in out.iter_mut().zip(scratch.iter()) {
                        *o += c * s;
                    }
                }
            }
            Family::Stored(table) => {
                for (j, &bj) in beta.iter().enumerate() {
                    if bj == 0.0 {
                        continue;
                    }
                    for (o, s) in out.iter_mut().zip(&table[j]) {
                        *o += bj * s;
                    }
                }
            }
        }
    }

    fn value(&self, grid: &TimeGrid, k: usize, out: &mut [f64], scratch: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut beta = vec![0.0; k + 1];
        beta[k] = 1.0;
        self.accumulate(grid, &beta, out, scratch);
    }

    /// `k ↦ ∫ w F_k` on the whole grid.
    fn masses(&self, grid: &TimeGrid, b: &RankOnePerturbation) -> Result<Vec<f64>> {
        let len = b.n_cells() + 1;
        let mut out = vec![0.0; len];
        let mut scratch = vec![0.0; len];
        (0..=grid.steps)
            .map(|k| {
                self.value(grid, k, &mut out, &mut scratch);
                b.functional_values(&out)
            })
            .collect()
    }
}

/// Coefficients `β` with `∫₀^{t_k} m(s) Φ(t_k − s) ds ≈ Σ_j β_j V_j`, for
/// `m` piecewise linear on the grid.
fn ibp_coefficients(masses: &[f64], k: usize) -> Vec<f64> {
    let mut beta = vec![0.0; k + 1];
    beta[k] += masses[0];
    for l in 0..k {
        let half = 0.5 * (masses[l + 1] - masses[l]);
        beta[k - l] += half;
        beta[k - l - 1] += half;
    }
    beta
}

/// How the mass of the next term is obtained from the current one.
enum MassKernel {
    /// `κ(r) = ∫ w e^{-λr} T₋₁(r)ρ`; trapezoid convolution.
    Density(Vec<f64>),
    /// `ν_k = ∫ w V_k`; integration by parts.
    Ibp(Vec<f64>),
}

impl MassKernel {
    fn next(&self, prev: &[f64], coupling: f64, dt: f64) -> Vec<f64> {
        let len = prev.len();
        let mut next = vec![0.0; len];
        match self {
            MassKernel::Density(kappa) => {
                for k in 1..len {
                    let mut acc = 0.5 * (prev[0] * kappa[k] + prev[k] * kappa[0]);
                    for l in 1..k {
                        acc += prev[l] * kappa[k - l];
                    }
                    next[k] = coupling * dt * acc;
                }
            }
            MassKernel::Ibp(nu) => {
                for k in 1..len {
                    let mut acc = prev[0] * nu[k];
                    for l in 0..k {
                        acc += 0.5 * (prev[l + 1] - prev[l]) * (nu[k - l] + nu[k - l - 1]);
                    }
                    next[k] = coupling * acc;
                }
            }
        }
        next
    }
}

fn density_kernel(
    gen: &GeneratorSpec,
    lambda: f64,
    density: &Density,
    b: &RankOnePerturbation,
    grid: &TimeGrid,
) -> Vec<f64> {
    (0..=grid.steps)
        .map(|k| {
            let t = grid.time(k);
            let moved = match gen.space() {
                Space::Shift => density.shifted_left(t),
                Space::Periodic => density.rotated(t),
            };
            (-lambda * t).exp() * moved.integral_against_nodes(b.weight())
        })
        .collect()
}

/// Outcome of summing the mass recursion.
struct SeriesSum {
    /// `Σ_{n < N} mₙ`, which assembles terms `1..=N`.
    mass_sum: Vec<f64>,
    term_norms: Vec<f64>,
}

/// Runs the mass recursion until a term's sampled sup-norm drops below
/// `tol`. Term norms are evaluated by integration by parts at `probes`.
#[allow(clippy::too_many_arguments)]
fn sum_series(
    orbit: &Family,
    v: &Family,
    kernel: &MassKernel,
    b: &RankOnePerturbation,
    coupling: f64,
    k_const: f64,
    grid: &TimeGrid,
    probes: &[usize],
    tol: f64,
    max_terms: usize,
) -> Result<SeriesSum> {
    let len = b.n_cells() + 1;
    let mut out = vec![0.0; len];
    let mut scratch = vec![0.0; len];
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));

    let mut norm0: f64 = 0.0;
    for &k in probes.iter().chain(std::iter::once(&0)) {
        orbit.value(grid, k, &mut out, &mut scratch);
        norm0 = norm0.max(sup(&out));
    }
    let mut term_norms = vec![norm0];
    let mut mass_sum = vec![0.0; grid.steps + 1];
    if norm0 < tol || k_const == 0.0 || coupling == 0.0 {
        return Ok(SeriesSum { mass_sum, term_norms });
    }
    let mut masses = orbit.masses(grid, b)?;
    loop {
        for (s, m) in mass_sum.iter_mut().zip(&masses) {
            *s += m;
        }
        let mut norm: f64 = 0.0;
        for &k in probes {
            out.iter_mut().for_each(|o| *o = 0.0);
            v.accumulate(grid, &ibp_coefficients(&masses, k), &mut out, &mut scratch);
            norm = norm.max(coupling.abs() * sup(&out));
        }
        term_norms.push(norm);
        if norm < tol {
            break;
        }
        if term_norms.len() >= max_terms {
            return Err(Error::NonConvergence {
                max_terms,
                last_norm: norm,
            });
        }
        masses = kernel.next(&masses, coupling, grid.dt);
    }
    Ok(SeriesSum { mass_sum, term_norms })
}

/// `∫₀^{t_k} M(s) e^{-λ(t_k − s)} ρ̃(x + t_k − s) ds` at every node, with
/// `ρ̃` the density cut off beyond 1 (shift) or extended periodically.
/// Simpson on pieces that straddle neither a grid time nor a breakpoint.
fn density_assembly(
    space: Space,
    density: &Density,
    lambda: f64,
    masses: &[f64],
    grid: &TimeGrid,
    k: usize,
    n_cells: usize,
) -> Vec<f64> {
    let t = grid.time(k);
    let mut breaks = density.breakpoints();
    breaks.push(match space {
        Space::Shift => 1.0,
        Space::Periodic => 0.0,
    });
    let rho = |lo: f64, hi: f64, y: f64| -> f64 {
        match space {
            Space::Shift => {
                if lo >= 1.0 - 1e-14 {
                    0.0
                } else {
                    density.eval_within(lo, hi, y)
                }
            }
            Space::Periodic => {
                let wrap = (0.5 * (lo + hi)).floor();
                density.eval_within(lo - wrap, hi - wrap, y - wrap)
            }
        }
    };
    let mass_at = |l: usize, s: f64| masses[l] + (s - grid.time(l)) / grid.dt * (masses[l + 1] - masses[l]);
    let mut out = vec![0.0; n_cells + 1];
    let mut cuts = Vec::new();
    for (i, o) in out.iter_mut().enumerate() {
        let x = i as f64 / n_cells as f64;
        cuts.clear();
        cuts.extend((0..=k).map(|l| grid.time(l)));
        let wraps = match space {
            Space::Shift => 0,
            Space::Periodic => (x + t).floor() as i64 + 1,
        };
        for w in 0..=wraps {
            for &b in &breaks {
                let s = x + t - (b + w as f64);
                if s > 0.0 && s < t {
                    cuts.push(s);
                }
            }
        }
        cuts.sort_by(|a, b| a.total_cmp(b));
        let mut acc = 0.0;
        for pair in cuts.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            if q - p <= 1e-15 {
                continue;
            }
            let mid = 0.5 * (p + q);
            let l = ((mid / grid.dt).floor() as usize).min(k.saturating_sub(1));
            let (ylo, yhi) = (x + t - q, x + t - p);
            let f = |s: f64| mass_at(l, s) * (-lambda * (t - s)).exp() * rho(ylo, yhi, x + t - s);
            acc += (q - p) / 6.0 * (f(p) + 4.0 * f(mid) + f(q));
        }
        *o = acc;
    }
    out
}

fn check_setup(gen: &GeneratorSpec, b: &RankOnePerturbation, u0: &GridFunction) -> Result<()> {
    if gen.space() != b.space() || u0.space() != b.space() {
        return Err(Error::GridMismatch(
            "generator, perturbation and u₀ must share a space".into(),
        ));
    }
    if u0.n_cells() != b.n_cells() {
        return Err(Error::GridMismatch(format!(
            "u₀ has {} cells, perturbation {}",
            u0.n_cells(),
            b.n_cells()
        )));
    }
    Ok(())
}

fn rescaled_k(gen: &GeneratorSpec, b: &RankOnePerturbation, lambda: f64) -> Result<f64> {
    let k = desch_numbers(gen, lambda, b)?.k;
    if k >= 1.0 {
        return Err(Error::DeschConditionFails { k, lambda });
    }
    Ok(k)
}

fn output_indices(grid: &TimeGrid, output_times: &[f64]) -> Result<Vec<usize>> {
    let mut idx = vec![0];
    for &t in output_times {
        idx.push(grid.index_of(t)?);
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

fn observed_ratio(term_norms: &[f64], tol: f64) -> Option<f64> {
    term_norms
        .windows(2)
        .skip(1)
        .filter(|w| w[0] > 1e3 * tol)
        .map(|w| w[1] / w[0])
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
}

fn positivity_check(states: &[GridFunction], u0: &GridFunction, b: &RankOnePerturbation) -> Option<bool> {
    if !(u0.is_nonnegative(0.0) && b.is_positive()) {
        return None;
    }
    let tol = 1e-9 * (1.0 + u0.sup_norm());
    Some(states.iter().all(|s| s.is_nonnegative(tol)))
}

/// `Sₙ(t)u₀` for the rescaled generator `A − λ_shift + B`.
pub fn dp_term(
    gen: &GeneratorSpec,
    b: &RankOnePerturbation,
    cfg: &DpConfig,
    n: usize,
    t: f64,
    u0: &GridFunction,
) -> Result<GridFunction> {
    cfg.validate()?;
    check_setup(gen, b, u0)?;
    let lambda = cfg.lambda_shift;
    let grid = TimeGrid::new(cfg.horizon, cfg.dt);
    let k = grid.index_of(t)?;
    let len = u0.n_cells() + 1;
    let mut out = vec![0.0; len];
    let mut scratch = vec![0.0; len];
    let orbit = Family::orbit(*gen, lambda, u0);
    if n == 0 {
        orbit.value(&grid, k, &mut out, &mut scratch);
        return GridFunction::from_computed(u0.space(), out);
    }
    let r = resolvent_direction(gen, lambda, b)?;
    let v = Family::integrated_direction(*gen, lambda, &r);
    let kernel = match b.direction().density() {
        Some(d) => MassKernel::Density(density_kernel(gen, lambda, d, b, &grid)),
        None => MassKernel::Ibp(v.masses(&grid, b)?),
    };
    let mut masses = orbit.masses(&grid, b)?;
    for _ in 1..n {
        masses = kernel.next(&masses, 1.0, grid.dt);
    }
    let values = match b.direction().density() {
        Some(d) => density_assembly(u0.space(), d, lambda, &masses, &grid, k, u0.n_cells()),
        None => {
            v.accumulate(&grid, &ibp_coefficients(&masses, k), &mut out, &mut scratch);
            out
        }
    };
    GridFunction::from_computed(u0.space(), values)
}

/// `S(t)u₀` at `0` and at each of `output_times`, which must lie on the time
/// grid of `cfg`.
pub fn dp_evolve(
    gen: &GeneratorSpec,
    b: &RankOnePerturbation,
    cfg: &DpConfig,
    u0: &GridFunction,
    output_times: &[f64],
) -> Result<EvolutionResult> {
    cfg.validate()?;
    check_setup(gen, b, u0)?;
    let lambda = cfg.lambda_shift;
    let k_const = rescaled_k(gen, b, lambda)?;
    let grid = TimeGrid::new(cfg.horizon, cfg.dt);
    let outputs = output_indices(&grid, output_times)?;
    let probes = grid.probes(&outputs);

    let r = resolvent_direction(gen, lambda, b)?;
    let orbit = Family::orbit(*gen, lambda, u0);
    let v = Family::integrated_direction(*gen, lambda, &r);
    let density = b.direction().density();
    let (kernel, path) = match density {
        Some(d) => (
            MassKernel::Density(density_kernel(gen, lambda, d, b, &grid)),
            EvolutionPath::Density,
        ),
        None => (MassKernel::Ibp(v.masses(&grid, b)?), EvolutionPath::IntegrationByParts),
    };
    let sum = sum_series(
        &orbit,
        &v,
        &kernel,
        b,
        1.0,
        k_const,
        &grid,
        &probes,
        cfg.tol_tail,
        cfg.max_terms,
    )?;

    let len = u0.n_cells() + 1;
    let mut scratch = vec![0.0; len];
    let mut states = Vec::with_capacity(outputs.len());
    let mut discrepancy: Option<f64> = None;
    for &k in &outputs {
        let growth = (lambda * grid.time(k)).exp();
        let mut base = vec![0.0; len];
        orbit.value(&grid, k, &mut base, &mut scratch);
        let mut ibp = vec![0.0; len];
        v.accumulate(&grid, &ibp_coefficients(&sum.mass_sum, k), &mut ibp, &mut scratch);
        let perturbed = match density {
            Some(d) => {
                let direct = density_assembly(u0.space(), d, lambda, &sum.mass_sum, &grid, k, u0.n_cells());
                let gap = direct.iter().zip(&ibp).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) * growth;
                discrepancy = Some(discrepancy.map_or(gap, |d| d.max(gap)));
                direct
            }
            None => ibp,
        };
        let values: Vec<f64> = base.iter().zip(&perturbed).map(|(a, p)| growth * (a + p)).collect();
        states.push(GridFunction::from_computed(u0.space(), values)?);
    }

    let tail_bound = dp_tail_bound(k_const, &sum.term_norms)?;
    let times: Vec<f64> = outputs.iter().map(|&k| grid.time(k)).collect();
    let tail_bounds = times.iter().map(|t| tail_bound * (lambda * t).exp()).collect();
    Ok(EvolutionResult {
        positivity_ok: positivity_check(&states, u0, b),
        envelope_ok: geometric_envelope_holds(k_const, &sum.term_norms, u0.sup_norm()),
        observed_ratio: observed_ratio(&sum.term_norms, cfg.tol_tail),
        times,
        states,
        term_norms: sum.term_norms,
        tail_bound,
        tail_bounds,
        lambda_shift: lambda,
        k: k_const,
        path,
        path_discrepancy: discrepancy,
    })
}

/// `∫₀^τ e^{-λs} T₋₁(s) h ds ∈ E`, the integrated direction of `B`.
pub fn integrated_direction(
    gen: &GeneratorSpec,
    lambda: f64,
    b: &RankOnePerturbation,
    tau: f64,
) -> Result<GridFunction> {
    if tau < 0.0 {
        return Err(Error::NegativeTime(tau));
    }
    let r = extrapolated_resolvent(gen, lambda, b.direction())?;
    let moved = gen.apply(tau, &r)?;
    r.axpy(-(-lambda * tau).exp(), &moved)
}

/// Evolves stage by stage along a split schedule: stage `j + 1` perturbs the
/// semigroup of stage `j` by `B/n`. Each stage keeps the orbit of `u₀` and
/// the integrated direction `∫₀ᵗ e^{-λs} S_{j,-1}(s) h ds` on the full time
/// grid; the next stage's integrated direction solves the same Duhamel
/// equation with that table as its free term.
pub fn staged_evolve(
    gen: &GeneratorSpec,
    b: &RankOnePerturbation,
    schedule: &SplitSchedule,
    cfg: &DpConfig,
    u0: &GridFunction,
    output_times: &[f64],
) -> Result<EvolutionResult> {
    cfg.validate()?;
    check_setup(gen, b, u0)?;
    let lambda = schedule.lambda;
    let grid = TimeGrid::new(cfg.horizon, cfg.dt);
    let outputs = output_indices(&grid, output_times)?;
    let all: Vec<usize> = (0..=grid.steps).collect();
    let probes = grid.probes(&outputs);
    let len = u0.n_cells() + 1;
    let mut scratch = vec![0.0; len];

    let r = resolvent_direction(gen, lambda, b)?;
    let mut orbit = Family::orbit(*gen, lambda, u0);
    let mut v = Family::integrated_direction(*gen, lambda, &r);
    let mut last_norms = Vec::new();
    let mut last_k = 0.0;
    let n_stages = schedule.stages.len();
    for (j, stage) in schedule.stages.iter().enumerate() {
        if stage.stage_k >= 1.0 {
            return Err(Error::DeschConditionFails {
                k: stage.stage_k,
                lambda,
            });
        }
        let kernel = MassKernel::Ibp(v.masses(&grid, b)?);
        let run = |free: &Family| {
            sum_series(
                free,
                &v,
                &kernel,
                b,
                stage.coupling,
                stage.stage_k,
                &grid,
                &probes,
                cfg.tol_tail,
                cfg.max_terms,
            )
        };
        let assemble = |free: &Family, sum: &SeriesSum, k: usize, scratch: &mut [f64]| {
            let mut out = vec![0.0; len];
            free.value(&grid, k, &mut out, scratch);
            let mut beta = ibp_coefficients(&sum.mass_sum, k);
            beta.iter_mut().for_each(|x| *x *= stage.coupling);
            v.accumulate(&grid, &beta, &mut out, scratch);
            out
        };
        let orbit_sum = run(&orbit)?;
        if j + 1 == n_stages {
            let states = outputs
                .iter()
                .map(|&k| {
                    let growth = (lambda * grid.time(k)).exp();
                    let vals = assemble(&orbit, &orbit_sum, k, &mut scratch);
                    GridFunction::from_computed(u0.space(), vals.into_iter().map(|x| growth * x).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            last_norms = orbit_sum.term_norms;
            last_k = stage.stage_k;
            let tail_bound = dp_tail_bound(last_k, &last_norms)?;
            let times: Vec<f64> = outputs.iter().map(|&k| grid.time(k)).collect();
            let tail_bounds = times.iter().map(|t| tail_bound * (lambda * t).exp()).collect();
            return Ok(EvolutionResult {
                positivity_ok: positivity_check(&states, u0, b),
                envelope_ok: geometric_envelope_holds(last_k, &last_norms, u0.sup_norm()),
                observed_ratio: observed_ratio(&last_norms, cfg.tol_tail),
                times,
                states,
                term_norms: last_norms,
                tail_bound,
                tail_bounds,
                lambda_shift: lambda,
                k: last_k,
                path: EvolutionPath::IntegrationByParts,
                path_discrepancy: None,
            });
        }
        let v_sum = run(&v)?;
        let next_orbit: Vec<Vec<f64>> = all
            .iter()
            .map(|&k| assemble(&orbit, &orbit_sum, k, &mut scratch))
            .collect();
        let next_v: Vec<Vec<f64>> = all.iter().map(|&k| assemble(&v, &v_sum, k, &mut scratch)).collect();
        orbit = Family::Stored(next_orbit);
        v = Family::Stored(next_v);
    }
    let _ = (last_norms, last_k);
    Err(Error::InvalidConfig("split schedule has no stages".into()))
}
