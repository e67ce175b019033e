//! Integrable densities on `[0, 1]`, stored as contiguous piecewise-linear
//! segments (jumps allowed between segments).
//!
//! Densities describe perturbation directions that are absolutely continuous
//! measures, e.g. `h ≡ 1` or `h = -χ[0,½) + χ[½,1]`. All integrals below are
//! exact for this representation (up to roundoff).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exp_linear_weights, GridFunction};

const JOIN_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
    pub va: f64,
    pub vb: f64,
}

impl Segment {
    fn value(&self, y: f64) -> f64 {
        let len = self.b - self.a;
        if len <= 0.0 {
            return self.va;
        }
        let s = ((y - self.a) / len).clamp(0.0, 1.0);
        self.va + s * (self.vb - self.va)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    segments: Vec<Segment>,
}

impl Density {
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("density: {msg}")));
        if segments.is_empty() {
            return bad("no segments");
        }
        if segments[0].a.abs() > JOIN_TOL || (segments[segments.len() - 1].b - 1.0).abs() > JOIN_TOL {
            return bad("segments must cover [0, 1]");
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.a.is_finite() && s.b.is_finite() && s.va.is_finite() && s.vb.is_finite()) {
                return bad("non-finite segment data");
            }
            if s.b <= s.a {
                return bad("empty or reversed segment");
            }
            if i > 0 && (segments[i - 1].b - s.a).abs() > JOIN_TOL {
                return bad("segments are not contiguous");
            }
        }
        let mut segments = segments;
        segments[0].a = 0.0;
        let last = segments.len() - 1;
        segments[last].b = 1.0;
        for i in 1..segments.len() {
            segments[i].a = segments[i - 1].b;
        }
        Ok(Self { segments })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            segments: vec![Segment {
                a: 0.0,
                b: 1.0,
                va: c,
                vb: c,
            }],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Piecewise constant with interior breakpoints `breaks` (strictly
    /// increasing, inside `(0, 1)`) and `breaks.len() + 1` levels.
    pub fn piecewise_constant(breaks: &[f64], levels: &[f64]) -> Result<Self> {
        if levels.len() != breaks.len() + 1 {
            return Err(Error::InvalidConfig(
                "density: need one more level than breakpoints".into(),
            ));
        }
        let mut edges = Vec::with_capacity(breaks.len() + 2);
        edges.push(0.0);
        edges.extend_from_slice(breaks);
        edges.push(1.0);
        let segments = edges
            .windows(2)
            .zip(levels)
            .map(|(w, &v)| Segment {
                a: w[0],
                b: w[1],
                va: v,
                vb: v,
            })
            .collect();
        Self::from_segments(segments)
    }

    /// `height · χ[a,b]`.
    pub fn indicator(a: f64, b: f64, height: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) || b <= a || b > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "indicator needs 0 <= a < b <= 1, got [{a}, {b}]"
            )));
        }
        let mut breaks = Vec::new();
        let mut levels = Vec::new();
        if a > 0.0 {
            breaks.push(a);
            levels.push(0.0);
        }
        levels.push(height);
        if b < 1.0 {
            breaks.push(b);
            levels.push(0.0);
        }
        Self::piecewise_constant(&breaks, &levels)
    }

    /// The sign step `-χ[0,½) + χ[½,1]`.
    pub fn sign_step() -> Self {
        Self::piecewise_constant(&[0.5], &[-1.0, 1.0]).expect("valid step")
    }

    /// Continuous piecewise-linear density through uniformly spaced nodal values.
    pub fn from_nodes(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidGrid);
        }
        let n = values.len() - 1;
        let segments = values
            .windows(2)
            .enumerate()
            .map(|(i, w)| Segment {
                a: i as f64 / n as f64,
                b: (i + 1) as f64 / n as f64,
                va: w[0],
                vb: w[1],
            })
            .collect();
        Self::from_segments(segments)
    }

    pub fn from_grid(f: &GridFunction) -> Self {
        Self::from_nodes(f.values()).expect("grid functions are valid")
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Interior breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.a).collect()
    }

    pub(crate) fn locate(&self, x: f64) -> usize {
        let idx = self.segments.partition_point(|s| s.b <= x);
        idx.min(self.segments.len() - 1)
    }

    /// Right-continuous point evaluation (the last segment is closed at 1).
    pub fn eval(&self, x: f64) -> f64 {
        self.segments[self.locate(x)].value(x)
    }

    /// Evaluates the linear piece that contains `[lo, hi]` at `y`; used for
    /// quadrature on sub-intervals that never straddle a breakpoint.
    pub(crate) fn eval_within(&self, lo: f64, hi: f64, y: f64) -> f64 {
        self.segments[self.locate(0.5 * (lo + hi))].value(y)
    }

    pub fn max_abs(&self) -> f64 {
        self.segments
            .iter()
            .fold(0.0_f64, |m, s| m.max(s.va.abs()).max(s.vb.abs()))
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.segments.iter().all(|s| s.va >= -tol && s.vb >= -tol)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    va: c * s.va,
                    vb: c * s.vb,
                    ..*s
                })
                .collect(),
        }
    }

    /// `α·self + β·other` on the merged breakpoints.
    pub fn linear_combination(&self, alpha: f64, other: &Density, beta: f64) -> Self {
        let edges = merge_edges(&self.edges(), &other.edges());
        let segments = edges
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                Segment {
                    a,
                    b,
                    va: alpha * self.eval_within(a, b, a) + beta * other.eval_within(a, b, a),
                    vb: alpha * self.eval_within(a, b, b) + beta * other.eval_within(a, b, b),
                }
            })
            .collect();
        Self { segments }
    }

    fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.segments.iter().map(|s| s.a).collect();
        e.push(1.0);
        e
    }

    /// Exact `∫_lo^hi ρ`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(0.0, 1.0);
        if hi <= lo {
            return 0.0;
        }
        self.segments
            .iter()
            .filter(|s| s.b > lo && s.a < hi)
            .map(|s| {
                let p = s.a.max(lo);
                let q = s.b.min(hi);
                0.5 * (q - p) * (s.value(p) + s.value(q))
            })
            .sum()
    }

    /// Exact `∫_lo^hi e^{λ(lo - s)} ρ(s) ds`.
    pub fn exp_weighted_integral(&self, lo: f64, hi: f64, lambda: f64) -> f64 {
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(0.0, 1.0);
        if hi <= lo {
            return 0.0;
        }
        self.segments
            .iter()
            .filter(|s| s.b > lo && s.a < hi)
            .map(|s| {
                let p = s.a.max(lo);
                let q = s.b.min(hi);
                let len = q - p;
                let (w0, w1) = exp_linear_weights(lambda * len);
                (lambda * (lo - p)).exp() * len * (w0 * s.value(p) + w1 * s.value(q))
            })
            .sum()
    }

    /// Exact `∫₀¹ w(x) ρ(x) dx` where `w` is the piecewise-linear interpolant
    /// of uniformly spaced nodal values.
    pub fn integral_against_nodes(&self, w: &[f64]) -> f64 {
        let n = w.len() - 1;
        let h = 1.0 / n as f64;
        let mut total = 0.0;
        let mut seg = 0;
        for cell in 0..n {
            let x0 = cell as f64 * h;
            let x1 = (cell + 1) as f64 * h;
            let (w0, w1) = (w[cell], w[cell + 1]);
            let wv = |y: f64| w0 + (w1 - w0) * (y - x0) / h;
            while seg + 1 < self.segments.len() && self.segments[seg].b <= x0 {
                seg += 1;
            }
            let mut p = x0;
            let mut k = seg;
            while p < x1 {
                let s = &self.segments[k];
                let q = if k + 1 < self.segments.len() { s.b.min(x1) } else { x1 };
                if q > p {
                    let m = 0.5 * (p + q);
                    // Simpson is exact for the product of two linear functions
                    total += (q - p) / 6.0 * (wv(p) * s.value(p) + 4.0 * wv(m) * s.value(m) + wv(q) * s.value(q));
                }
                p = q;
                if k + 1 < self.segments.len() && s.b <= x1 {
                    k += 1;
                } else {
                    break;
                }
            }
        }
        total
    }

    /// `x ↦ ρ(x + t)` for `x + t ≤ 1`, zero beyond: the density of the
    /// extrapolated nilpotent left shift applied to `ρ`.
    pub fn shifted_left(&self, t: f64) -> Self {
        if t <= 0.0 {
            return self.clone();
        }
        if t >= 1.0 {
            return Self::zero();
        }
        let mut segments: Vec<Segment> = self
            .segments
            .iter()
            .filter(|s| s.b > t)
            .map(|s| {
                let a = s.a.max(t);
                Segment {
                    a: a - t,
                    b: s.b - t,
                    va: s.value(a),
                    vb: s.vb,
                }
            })
            .filter(|s| s.b > s.a)
            .collect();
        segments.push(Segment {
            a: 1.0 - t,
            b: 1.0,
            va: 0.0,
            vb: 0.0,
        });
        Self::from_segments(segments).expect("shift keeps segments contiguous")
    }

    /// `x ↦ ρ((x + t) mod 1)`.
    pub fn rotated(&self, t: f64) -> Self {
        let t = t - t.floor();
        if t <= 0.0 || t >= 1.0 {
            return self.clone();
        }
        let mut head = Vec::new();
        let mut tail = Vec::new();
        for s in &self.segments {
            if s.b > t {
                let a = s.a.max(t);
                head.push(Segment {
                    a: a - t,
                    b: s.b - t,
                    va: s.value(a),
                    vb: s.vb,
                });
            }
            if s.a < t {
                let b = s.b.min(t);
                tail.push(Segment {
                    a: s.a + 1.0 - t,
                    b: b + 1.0 - t,
                    va: s.va,
                    vb: s.value(b),
                });
            }
        }
        head.extend(tail);
        head.retain(|s| s.b > s.a);
        Self::from_segments(head).expect("rotation keeps segments contiguous")
    }

    /// Right-continuous samples at the nodes of an `n_cells` grid.
    pub fn sample_nodes(&self, n_cells: usize) -> Vec<f64> {
        (0..=n_cells).map(|i| self.eval(i as f64 / n_cells as f64)).collect()
    }
}

fn merge_edges(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if out.last().is_none_or(|&l: &f64| next - l > JOIN_TOL) {
            out.push(next);
        }
    }
    out
}
