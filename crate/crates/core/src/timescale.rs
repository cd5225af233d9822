//! Bounded windows of arbitrary time scales.
//!
//! A [`TimeScale`] is a finite union of disjoint closed intervals with exact
//! rational endpoints; degenerate intervals are isolated points. The module
//! provides the jump operators sigma/rho, the graininess functions mu/nu,
//! point classification, dualization (reflection through zero), and the
//! canonical discretization [`Grid`] that the numerical layer works on.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::{self, from_int, to_f64, TimePoint};

/// Maximum number of subdivisions of a single interval component.
const MAX_SUBDIVISIONS: i64 = 4_000_000;

/// A bounded time scale: finitely many disjoint closed intervals
/// `[a_i, b_i]`, sorted with positive gaps between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeScale {
    components: Vec<(TimePoint, TimePoint)>,
}

/// Generator for the classical scales, intersected with a window at
/// construction time.
#[derive(Debug, Clone)]
pub enum ScaleKind {
    /// The whole real line.
    Reals,
    /// The integers.
    Integers,
    /// Multiples of a positive step `h`.
    HIntegers(TimePoint),
    /// The periodic union of closed intervals `[k(a+b), k(a+b)+a]`, `k` an
    /// integer, with `a` the interval length and `b` the gap length.
    PeriodicUnion(TimePoint, TimePoint),
    /// An explicit list of closed intervals (degenerate ones are points).
    Explicit(Vec<(TimePoint, TimePoint)>),
}

/// Classification of one side of a scale point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideClass {
    /// Scale points accumulate on this side.
    Dense,
    /// A positive gap separates the point from its neighbour on this side.
    Scattered,
    /// The point is the window endpoint on this side.
    Boundary,
}

/// Two-sided classification of a scale point, consistent with the jump
/// operators: right-scattered iff `sigma(t) > t`, left-scattered iff
/// `rho(t) < t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointClass {
    pub left: SideClass,
    pub right: SideClass,
}

impl PointClass {
    /// No other scale point in some neighbourhood.
    pub fn is_isolated(&self) -> bool {
        self.left != SideClass::Dense && self.right != SideClass::Dense
    }

    /// Dense on both sides (interior of a non-degenerate interval).
    pub fn is_dense(&self) -> bool {
        self.left == SideClass::Dense && self.right == SideClass::Dense
    }
}

impl fmt::Display for PointClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_isolated() {
            return write!(f, "isolated");
        }
        if self.is_dense() {
            return write!(f, "interior-dense");
        }
        let side = |s: SideClass, name: &str| match s {
            SideClass::Dense => format!("{name}-dense"),
            SideClass::Scattered => format!("{name}-scattered"),
            SideClass::Boundary => "boundary".to_string(),
        };
        write!(
            f,
            "{}, {}",
            side(self.right, "right"),
            side(self.left, "left")
        )
    }
}

impl TimeScale {
    /// Builds a scale from raw components: sorts, merges touching intervals,
    /// and validates the invariants.
    pub fn from_components(raw: Vec<(TimePoint, TimePoint)>) -> Result<Self> {
        let mut comps: Vec<(TimePoint, TimePoint)> = Vec::with_capacity(raw.len());
        for (a, b) in &raw {
            if a > b {
                return Err(Error::InvalidParameter(format!(
                    "interval [{}, {}] has reversed endpoints",
                    exact::format_time(a),
                    exact::format_time(b)
                )));
            }
            comps.push((*a, *b));
        }
        if comps.is_empty() {
            return Err(Error::EmptyTimeScale);
        }
        comps.sort();
        let mut merged: Vec<(TimePoint, TimePoint)> = Vec::with_capacity(comps.len());
        for (a, b) in comps {
            match merged.last_mut() {
                Some((_, last_b)) if a <= *last_b => {
                    if b > *last_b {
                        *last_b = b;
                    }
                }
                _ => merged.push((a, b)),
            }
        }
        Ok(TimeScale { components: merged })
    }

    /// Generates a classical scale intersected with `[lo, hi]`.
    pub fn from_generator(kind: ScaleKind, lo: TimePoint, hi: TimePoint) -> Result<Self> {
        if lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] is empty",
                exact::format_time(&lo),
                exact::format_time(&hi)
            )));
        }
        let comps: Vec<(TimePoint, TimePoint)> = match kind {
            ScaleKind::Reals => vec![(lo, hi)],
            ScaleKind::Integers => integer_multiples(from_int(1), lo, hi)?,
            ScaleKind::HIntegers(h) => {
                if h <= TimePoint::from_integer(0) {
                    return Err(Error::InvalidParameter("h must be positive".into()));
                }
                integer_multiples(h, lo, hi)?
            }
            ScaleKind::PeriodicUnion(a, b) => {
                let zero = TimePoint::from_integer(0);
                if a <= zero || b <= zero {
                    return Err(Error::InvalidParameter(
                        "periodic union needs a > 0 and b > 0".into(),
                    ));
                }
                let period = a + b;
                let k_lo = (lo / period).floor().to_integer() - 1;
                let k_hi = (hi / period).ceil().to_integer() + 1;
                let mut comps = Vec::new();
                for k in k_lo..=k_hi {
                    let start = TimePoint::from_integer(k) * period;
                    let end = start + a;
                    let s = start.max(lo);
                    let e = end.min(hi);
                    if s <= e {
                        comps.push((s, e));
                    }
                }
                comps
            }
            ScaleKind::Explicit(list) => {
                let mut comps = Vec::new();
                for (a, b) in list {
                    if a > b {
                        return Err(Error::InvalidParameter(format!(
                            "interval [{}, {}] has reversed endpoints",
                            exact::format_time(&a),
                            exact::format_time(&b)
                        )));
                    }
                    let s = a.max(lo);
                    let e = b.min(hi);
                    if s <= e {
                        comps.push((s, e));
                    }
                }
                comps
            }
        };
        if comps.is_empty() {
            return Err(Error::EmptyTimeScale);
        }
        Self::from_components(comps)
    }

    /// The interval components of the scale, sorted.
    pub fn components(&self) -> &[(TimePoint, TimePoint)] {
        &self.components
    }

    /// Smallest point of the scale.
    pub fn min(&self) -> TimePoint {
        self.components[0].0
    }

    /// Largest point of the scale.
    pub fn max(&self) -> TimePoint {
        self.components[self.components.len() - 1].1
    }

    /// Index of the component containing `t`, if any.
    pub fn component_index(&self, t: &TimePoint) -> Option<usize> {
        let i = self
            .components
            .partition_point(|(a, _)| a <= t)
            .checked_sub(1)?;
        let (a, b) = &self.components[i];
        (a <= t && t <= b).then_some(i)
    }

    /// Scale membership.
    pub fn contains(&self, t: &TimePoint) -> bool {
        self.component_index(t).is_some()
    }

    fn require_member(&self, t: &TimePoint) -> Result<usize> {
        self.component_index(t)
            .ok_or_else(|| Error::PointNotInScale(exact::format_time(t)))
    }

    /// Forward jump operator, clamped at the window maximum.
    pub fn sigma(&self, t: &TimePoint) -> Result<TimePoint> {
        let i = self.require_member(t)?;
        let (_, b) = &self.components[i];
        if t < b {
            Ok(*t)
        } else if i + 1 < self.components.len() {
            Ok(self.components[i + 1].0)
        } else {
            Ok(*t)
        }
    }

    /// Backward jump operator, clamped at the window minimum.
    pub fn rho(&self, t: &TimePoint) -> Result<TimePoint> {
        let i = self.require_member(t)?;
        let (a, _) = &self.components[i];
        if t > a {
            Ok(*t)
        } else if i > 0 {
            Ok(self.components[i - 1].1)
        } else {
            Ok(*t)
        }
    }

    /// Forward graininess `mu(t) = sigma(t) - t`.
    pub fn graininess_mu(&self, t: &TimePoint) -> Result<TimePoint> {
        Ok(self.sigma(t)? - t)
    }

    /// Backward graininess `nu(t) = t - rho(t)`.
    pub fn graininess_nu(&self, t: &TimePoint) -> Result<TimePoint> {
        Ok(t - self.rho(t)?)
    }

    /// The dual scale `{-t : t in T}`: components negated and order-reversed.
    /// An exact involution: `dual(dual(ts)) == ts`.
    pub fn dual(&self) -> TimeScale {
        let components = self
            .components
            .iter()
            .rev()
            .map(|(a, b)| (-*b, -*a))
            .collect();
        TimeScale { components }
    }

    /// Two-sided classification of a point.
    pub fn classify(&self, t: &TimePoint) -> Result<PointClass> {
        self.require_member(t)?;
        let left = if *t == self.min() {
            SideClass::Boundary
        } else if self.rho(t)? < *t {
            SideClass::Scattered
        } else {
            SideClass::Dense
        };
        let right = if *t == self.max() {
            SideClass::Boundary
        } else if self.sigma(t)? > *t {
            SideClass::Scattered
        } else {
            SideClass::Dense
        };
        Ok(PointClass { left, right })
    }

    /// `T^kappa`: the scale with the maximum removed when it is an isolated
    /// point (left-scattered maximum).
    pub fn kappa_forward(&self) -> TimeScale {
        let mut comps = self.components.clone();
        let last = comps.len() - 1;
        let (a, b) = comps[last];
        if a == b && comps.len() > 1 {
            comps.pop();
        } else if a == b {
            // single-point scale: kappa leaves nothing; keep the point to
            // stay within the type's invariants
        }
        TimeScale { components: comps }
    }

    /// `T_kappa`: the scale with the minimum removed when it is an isolated
    /// point (right-scattered minimum).
    pub fn kappa_backward(&self) -> TimeScale {
        let mut comps = self.components.clone();
        let (a, b) = comps[0];
        if a == b && comps.len() > 1 {
            comps.remove(0);
        }
        TimeScale { components: comps }
    }

    /// True when `[lo, hi]` intersected with the scale holds at least `k`
    /// points. Any non-degenerate interval overlap counts as infinitely many.
    pub fn has_at_least_points(&self, lo: &TimePoint, hi: &TimePoint, k: usize) -> bool {
        let mut count = 0usize;
        for (a, b) in &self.components {
            let s = (*a).max(*lo);
            let e = (*b).min(*hi);
            if s > e {
                continue;
            }
            if s < e {
                return true;
            }
            count += 1;
            if count >= k {
                return true;
            }
        }
        count >= k
    }

    /// Canonical grid with dense intervals subdivided so that consecutive
    /// nodes differ by at most `dense_step`.
    pub fn build_grid(self: &Arc<Self>, dense_step: f64) -> Result<Grid> {
        if dense_step.is_nan() || dense_step <= 0.0 {
            return Err(Error::InvalidParameter(
                "dense step must be positive".into(),
            ));
        }
        Grid::build(self.clone(), Some(dense_step))
    }

    /// Canonical grid with each non-degenerate component split in 1000 steps.
    pub fn build_grid_default(self: &Arc<Self>) -> Result<Grid> {
        Grid::build(self.clone(), None)
    }
}

fn integer_multiples(
    h: TimePoint,
    lo: TimePoint,
    hi: TimePoint,
) -> Result<Vec<(TimePoint, TimePoint)>> {
    let k_lo = (lo / h).ceil().to_integer();
    let k_hi = (hi / h).floor().to_integer();
    if k_lo > k_hi {
        return Err(Error::EmptyTimeScale);
    }
    if k_hi - k_lo > 1_000_000 {
        return Err(Error::InvalidParameter(
            "window contains more than 1e6 discrete points".into(),
        ));
    }
    Ok((k_lo..=k_hi)
        .map(|k| {
            let t = TimePoint::from_integer(k) * h;
            (t, t)
        })
        .collect())
}

/// Kind of the cell between two consecutive grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// The nodes are consecutive scale points across a gap (`sigma` jump).
    Gap,
    /// The nodes subdivide the interior of one interval component.
    Dense,
}

/// Canonical discretization of a [`TimeScale`].
///
/// Every component endpoint appears exactly; interior nodes of non-degenerate
/// intervals are equally spaced exact rationals, so scale membership and the
/// jump operators stay exact on every node.
#[derive(Debug, Clone)]
pub struct Grid {
    scale: Arc<TimeScale>,
    points: Vec<TimePoint>,
    points_f64: Vec<f64>,
    cells: Vec<CellKind>,
    dense_step: f64,
}

impl Grid {
    fn build(scale: Arc<TimeScale>, dense_step: Option<f64>) -> Result<Self> {
        let mut points: Vec<TimePoint> = Vec::new();
        let mut cells: Vec<CellKind> = Vec::new();
        let mut effective_step = f64::INFINITY;
        for (ci, (a, b)) in scale.components().iter().enumerate() {
            if ci > 0 {
                cells.push(CellKind::Gap);
            }
            if a == b {
                points.push(*a);
                continue;
            }
            let len = b - a;
            let len_f = to_f64(&len);
            let n = match dense_step {
                None => 1000i64,
                Some(h) => {
                    let mut n = (len_f / h).ceil() as i64;
                    if n < 1 {
                        n = 1;
                    }
                    // guard against a marginal overshoot from the rounding
                    if len_f / (n as f64) > h {
                        n += 1;
                    }
                    n
                }
            };
            if n > MAX_SUBDIVISIONS {
                return Err(Error::InvalidParameter(format!(
                    "dense step would create {n} subdivisions in one component"
                )));
            }
            let step = len / TimePoint::from_integer(n);
            effective_step = effective_step.min(to_f64(&step));
            for k in 0..=n {
                points.push(a + step * TimePoint::from_integer(k));
                if k > 0 {
                    cells.push(CellKind::Dense);
                }
            }
        }
        let points_f64 = points.iter().map(to_f64).collect();
        Ok(Grid {
            scale,
            points,
            points_f64,
            cells,
            dense_step: dense_step.unwrap_or(if effective_step.is_finite() {
                effective_step
            } else {
                1.0
            }),
        })
    }

    /// Owning scale.
    pub fn scale(&self) -> &TimeScale {
        &self.scale
    }

    /// Shared handle to the owning scale.
    pub fn scale_arc(&self) -> Arc<TimeScale> {
        self.scale.clone()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when the grid has no nodes (never constructed that way).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact node values, ascending.
    pub fn points(&self) -> &[TimePoint] {
        &self.points
    }

    /// Node values as `f64`, ascending.
    pub fn points_f64(&self) -> &[f64] {
        &self.points_f64
    }

    /// Exact value of node `i`.
    pub fn point(&self, i: usize) -> &TimePoint {
        &self.points[i]
    }

    /// `f64` value of node `i`.
    pub fn point_f64(&self, i: usize) -> f64 {
        self.points_f64[i]
    }

    /// The dense step the grid was built with.
    pub fn dense_step(&self) -> f64 {
        self.dense_step
    }

    /// Cell kinds between consecutive nodes (`len() - 1` entries).
    pub fn cells(&self) -> &[CellKind] {
        &self.cells
    }

    /// Kind of the cell between nodes `i` and `i + 1`.
    pub fn cell(&self, i: usize) -> CellKind {
        self.cells[i]
    }

    /// Exact index lookup.
    pub fn index_of(&self, t: &TimePoint) -> Option<usize> {
        self.points.binary_search(t).ok()
    }

    /// Exact index lookup that fails with [`Error::PointNotOnGrid`].
    pub fn require_index(&self, t: &TimePoint) -> Result<usize> {
        self.index_of(t)
            .ok_or_else(|| Error::PointNotOnGrid(exact::format_time(t)))
    }

    /// The dual grid: nodes negated and order-reversed. Identical to building
    /// a grid on the dual scale with the same dense step.
    pub fn dual(&self) -> Grid {
        let scale = Arc::new(self.scale.dual());
        let points: Vec<TimePoint> = self.points.iter().rev().map(|t| -*t).collect();
        let points_f64 = points.iter().map(to_f64).collect();
        let cells = self.cells.iter().rev().copied().collect();
        Grid {
            scale,
            points,
            points_f64,
            cells,
            dense_step: self.dense_step,
        }
    }
}
