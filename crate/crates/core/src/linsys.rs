//! Linear control systems on a time scale and its dual.
//!
//! Forward (delta) systems are solved by left-to-right accumulation of
//! `(I + mu*A)` factors across gaps and RK4 across dense cells, which needs
//! no regressivity. Backward (nabla) systems are solved by the mirrored
//! right-to-left stepping `(I - nu*Abar)`, which needs no progressivity.
//! The backward transition function is realized as the forward transition
//! of the dualized system, the construction the duality theory rests on,
//! so the two stepping engines double as independent routes for testing.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exact::{self, to_f64, TimePoint};
use crate::expr::MatrixExpr;
use crate::timescale::{CellKind, Grid, TimeScale};

/// Relative singular-value floor below which a stepping factor counts as
/// singular in the progressivity / regressivity checks.
pub const INVERTIBILITY_REL_TOL: f64 = 1e-12;

/// Time direction of a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Delta dynamics, solved for increasing time from the anchor.
    Forward,
    /// Nabla dynamics, solved for decreasing time from the anchor.
    Backward,
}

/// State, input, and output dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

/// A linear control system `x^Delta = A x + B u` (forward) or
/// `y^Nabla = Abar y + Bbar v` (backward) with output map `C x + D u`,
/// together with its time scale, anchor time, and working horizon.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    direction: Direction,
    ts: Arc<TimeScale>,
    a: MatrixExpr,
    b: MatrixExpr,
    c: MatrixExpr,
    d: MatrixExpr,
    dims: Dims,
    anchor: TimePoint,
    horizon: TimePoint,
}

impl LinearSystem {
    /// Builds a system and validates shapes, dimension bounds, and that the
    /// anchor/horizon pair lies in the scale in the right order.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        direction: Direction,
        ts: Arc<TimeScale>,
        a: MatrixExpr,
        b: MatrixExpr,
        c: MatrixExpr,
        d: MatrixExpr,
        anchor: TimePoint,
        horizon: TimePoint,
    ) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::ShapeMismatch("A must be square".into()));
        }
        if b.rows() != n {
            return Err(Error::ShapeMismatch("B must have n rows".into()));
        }
        let m = b.cols();
        if c.cols() != n {
            return Err(Error::ShapeMismatch("C must have n columns".into()));
        }
        let p = c.rows();
        if d.rows() != p || d.cols() != m {
            return Err(Error::ShapeMismatch("D must be p x m".into()));
        }
        if m > n || p > n {
            return Err(Error::InvalidParameter(format!(
                "dimension bounds violated: m = {m}, p = {p} must not exceed n = {n}"
            )));
        }
        for (label, t) in [("anchor", &anchor), ("horizon", &horizon)] {
            if !ts.contains(t) {
                return Err(Error::PointNotInScale(format!(
                    "{label} {}",
                    exact::format_time(t)
                )));
            }
        }
        let ordered = match direction {
            Direction::Forward => anchor <= horizon,
            Direction::Backward => horizon <= anchor,
        };
        if !ordered {
            return Err(Error::InvalidParameter(
                "anchor and horizon are ordered against the system direction".into(),
            ));
        }
        Ok(LinearSystem {
            direction,
            ts,
            a,
            b,
            c,
            d,
            dims: Dims { n, m, p },
            anchor,
            horizon,
        })
    }

    /// Convenience constructor for constant matrices.
    #[allow(clippy::too_many_arguments)]
    pub fn from_constants(
        direction: Direction,
        ts: Arc<TimeScale>,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DMatrix<f64>,
        d: &DMatrix<f64>,
        anchor: TimePoint,
        horizon: TimePoint,
    ) -> Result<Self> {
        Self::new(
            direction,
            ts,
            MatrixExpr::from_constant(a),
            MatrixExpr::from_constant(b),
            MatrixExpr::from_constant(c),
            MatrixExpr::from_constant(d),
            anchor,
            horizon,
        )
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn scale(&self) -> &Arc<TimeScale> {
        &self.ts
    }

    pub fn a(&self) -> &MatrixExpr {
        &self.a
    }

    pub fn b(&self) -> &MatrixExpr {
        &self.b
    }

    pub fn c(&self) -> &MatrixExpr {
        &self.c
    }

    pub fn d(&self) -> &MatrixExpr {
        &self.d
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Anchor time: `t0` for forward systems, `s0` for backward systems.
    pub fn anchor(&self) -> TimePoint {
        self.anchor
    }

    /// Working horizon: `t1 >= t0` forward, `s1 <= s0` backward.
    pub fn horizon(&self) -> TimePoint {
        self.horizon
    }

    /// True when every system matrix is free of the time variable.
    pub fn is_constant(&self) -> bool {
        self.a.is_constant() && self.b.is_constant() && self.c.is_constant() && self.d.is_constant()
    }

    /// The dual system on the dual scale: direction flipped,
    /// `Abar(s) = -A(-s)`, `Bbar(s) = -B(-s)`, `Cbar(s) = C(-s)`,
    /// `Dbar(s) = D(-s)`, anchor and horizon negated. Applying it twice
    /// reproduces the original evaluated matrices exactly at every time.
    pub fn dualize(&self) -> LinearSystem {
        LinearSystem {
            direction: match self.direction {
                Direction::Forward => Direction::Backward,
                Direction::Backward => Direction::Forward,
            },
            ts: Arc::new(self.ts.dual()),
            a: self.a.reflect_negated(),
            b: self.b.reflect_negated(),
            c: self.c.reflect(),
            d: self.d.reflect(),
            dims: self.dims,
            anchor: -self.anchor,
            horizon: -self.horizon,
        }
    }

    /// Canonical grid of the system's scale.
    pub fn grid(&self, dense_step: Option<f64>) -> Result<Grid> {
        match dense_step {
            Some(h) => self.ts.build_grid(h),
            None => self.ts.build_grid_default(),
        }
    }

    fn require_direction(&self, wanted: Direction, op: &str) -> Result<()> {
        if self.direction != wanted {
            let dir = match wanted {
                Direction::Forward => "forward",
                Direction::Backward => "backward",
            };
            return Err(Error::InvalidParameter(format!(
                "{op} needs a {dir} system"
            )));
        }
        Ok(())
    }
}

/// One RK4 step of the matrix equation `M' = A(t) M`; `h` may be negative.
fn rk4_matrix_step(a: &MatrixExpr, t: f64, h: f64, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a_start = a.eval(t)?;
    let a_mid = a.eval(t + 0.5 * h)?;
    let a_end = a.eval(t + h)?;
    let k1 = &a_start * m;
    let k2 = &a_mid * &(m + k1.scale(0.5 * h));
    let k3 = &a_mid * &(m + k2.scale(0.5 * h));
    let k4 = &a_end * &(m + k3.scale(h));
    Ok(m + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0))
}

/// Accumulates the forward transition factors from node `i0` up to `i1`.
pub(crate) fn accumulate_forward(
    a: &MatrixExpr,
    grid: &Grid,
    i0: usize,
    i1: usize,
) -> Result<DMatrix<f64>> {
    let n = a.rows();
    let mut phi = DMatrix::identity(n, n);
    for k in i0..i1 {
        phi = forward_cell_factor_applied(a, grid, k, &phi)?;
    }
    Ok(phi)
}

/// Applies the one-cell forward propagator for cell `k` to `m`.
fn forward_cell_factor_applied(
    a: &MatrixExpr,
    grid: &Grid,
    k: usize,
    m: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    match grid.cell(k) {
        CellKind::Gap => {
            let mu = to_f64(&(grid.point(k + 1) - grid.point(k)));
            let a_t = a.eval(grid.point_f64(k))?;
            Ok(m + a_t.scale(mu) * m)
        }
        CellKind::Dense => {
            let t = grid.point_f64(k);
            let h = grid.point_f64(k + 1) - t;
            rk4_matrix_step(a, t, h, m)
        }
    }
}

/// Accumulates the direct backward stepping factors from node `i_hi` down to
/// `i_lo`; the result is `Psi(lo, hi)` built from `(I - nu*Abar)` blocks.
pub(crate) fn accumulate_backward(
    abar: &MatrixExpr,
    grid: &Grid,
    i_lo: usize,
    i_hi: usize,
) -> Result<DMatrix<f64>> {
    let n = abar.rows();
    let mut psi = DMatrix::identity(n, n);
    for k in (i_lo..i_hi).rev() {
        psi = backward_cell_factor_applied(abar, grid, k, &psi)?;
    }
    Ok(psi)
}

/// Applies the one-cell backward propagator for cell `k` (stepping from node
/// `k + 1` down to node `k`) to `m`.
fn backward_cell_factor_applied(
    abar: &MatrixExpr,
    grid: &Grid,
    k: usize,
    m: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    match grid.cell(k) {
        CellKind::Gap => {
            let nu = to_f64(&(grid.point(k + 1) - grid.point(k)));
            let a_s = abar.eval(grid.point_f64(k + 1))?;
            Ok(m - a_s.scale(nu) * m)
        }
        CellKind::Dense => {
            let s = grid.point_f64(k + 1);
            let h = grid.point_f64(k) - s;
            rk4_matrix_step(abar, s, h, m)
        }
    }
}

/// One-cell backward propagator `Psi(z_k, z_{k+1})` as a matrix.
pub(crate) fn backward_cell_factor(
    abar: &MatrixExpr,
    grid: &Grid,
    k: usize,
) -> Result<DMatrix<f64>> {
    backward_cell_factor_applied(abar, grid, k, &DMatrix::identity(abar.rows(), abar.rows()))
}

/// Forward transition matrix `Phi_A(t, t0)`, `t >= t0`.
pub fn transition_forward(
    sys: &LinearSystem,
    grid: &Grid,
    t: &TimePoint,
    t0: &TimePoint,
) -> Result<DMatrix<f64>> {
    sys.require_direction(Direction::Forward, "transition_forward")?;
    let i0 = grid.require_index(t0)?;
    let i1 = grid.require_index(t)?;
    if i1 < i0 {
        return Err(Error::InvalidParameter(
            "forward transition requested backward".into(),
        ));
    }
    accumulate_forward(&sys.a, grid, i0, i1)
}

/// Backward transition matrix `Psi_Abar(s, s0)`, `s <= s0`, realized as the
/// forward transition of the dual system evaluated at `(-s, -s0)`.
pub fn transition_backward(
    sys: &LinearSystem,
    grid: &Grid,
    s: &TimePoint,
    s0: &TimePoint,
) -> Result<DMatrix<f64>> {
    sys.require_direction(Direction::Backward, "transition_backward")?;
    let i_lo = grid.require_index(s)?;
    let i_hi = grid.require_index(s0)?;
    if i_lo > i_hi {
        return Err(Error::InvalidParameter(
            "backward transition requested forward".into(),
        ));
    }
    let dual = sys.dualize();
    let dual_grid = grid.dual();
    let n = grid.len();
    // node i maps to node n-1-i on the dual grid
    accumulate_forward(&dual.a, &dual_grid, n - 1 - i_hi, n - 1 - i_lo)
}

fn check_duality(label: &str, primary: &DMatrix<f64>, mirror: &DMatrix<f64>) -> Result<()> {
    let err = (primary - mirror).norm();
    let scale = 1.0 + primary.norm();
    if err > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "{label} duality identity violated: residual {err:.3e}"
        )));
    }
    Ok(())
}

/// Forward exponential `e_A(t, t0)` for a constant matrix. Also verifies the
/// duality identity `e_A(t, t0) = ehat_{-A}(-t, -t0)` against the direct
/// backward stepping on the dual grid.
pub fn exp_forward(
    a: &DMatrix<f64>,
    grid: &Grid,
    t: &TimePoint,
    t0: &TimePoint,
) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch("A must be square".into()));
    }
    let i0 = grid.require_index(t0)?;
    let i1 = grid.require_index(t)?;
    if i1 < i0 {
        return Err(Error::InvalidParameter(
            "forward transition requested backward".into(),
        ));
    }
    let a_expr = MatrixExpr::from_constant(a);
    let e = accumulate_forward(&a_expr, grid, i0, i1)?;
    let abar = MatrixExpr::from_constant(&(-a));
    let dual_grid = grid.dual();
    let n = grid.len();
    let ehat = accumulate_backward(&abar, &dual_grid, n - 1 - i1, n - 1 - i0)?;
    check_duality("exponential", &e, &ehat)?;
    Ok(e)
}

/// Nabla exponential `ehat_Abar(s, s0)` for a constant matrix. Also verifies
/// the duality identity against the forward exponential of `-Abar` on the
/// dual grid.
pub fn exp_backward(
    abar: &DMatrix<f64>,
    grid: &Grid,
    s: &TimePoint,
    s0: &TimePoint,
) -> Result<DMatrix<f64>> {
    if abar.nrows() != abar.ncols() {
        return Err(Error::ShapeMismatch("A must be square".into()));
    }
    let i_lo = grid.require_index(s)?;
    let i_hi = grid.require_index(s0)?;
    if i_lo > i_hi {
        return Err(Error::InvalidParameter(
            "backward transition requested forward".into(),
        ));
    }
    let abar_expr = MatrixExpr::from_constant(abar);
    let ehat = accumulate_backward(&abar_expr, grid, i_lo, i_hi)?;
    let a = MatrixExpr::from_constant(&(-abar));
    let dual_grid = grid.dual();
    let n = grid.len();
    let e = accumulate_forward(&a, &dual_grid, n - 1 - i_hi, n - 1 - i_lo)?;
    check_duality("exponential", &ehat, &e)?;
    Ok(ehat)
}

/// Control input for the initial value problem solvers.
#[derive(Debug, Clone)]
pub enum Control {
    /// Identically zero.
    Zero,
    /// An expression in the time variable, one row per input channel.
    Expr(MatrixExpr),
    /// Samples on the solver grid, linearly interpolated inside dense cells.
    Sampled(crate::calculus::GridFunction),
}

impl Control {
    fn check(&self, m: usize, grid: &Grid) -> Result<()> {
        match self {
            Control::Zero => Ok(()),
            Control::Expr(e) => {
                if e.rows() != m || e.cols() != 1 {
                    Err(Error::ShapeMismatch(format!(
                        "control expression must be {m}x1, got {}x{}",
                        e.rows(),
                        e.cols()
                    )))
                } else {
                    Ok(())
                }
            }
            Control::Sampled(f) => {
                if f.shape() != (m, 1) {
                    Err(Error::ShapeMismatch(format!(
                        "sampled control must be {m}x1, got {}x{}",
                        f.shape().0,
                        f.shape().1
                    )))
                } else if f.grid().points() != grid.points() {
                    Err(Error::ShapeMismatch(
                        "sampled control lives on a different grid".into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn at_node(&self, m: usize, grid: &Grid, i: usize) -> Result<DVector<f64>> {
        match self {
            Control::Zero => Ok(DVector::zeros(m)),
            Control::Expr(e) => Ok(DVector::from_column_slice(
                e.eval(grid.point_f64(i))?.as_slice(),
            )),
            Control::Sampled(f) => Ok(DVector::from_column_slice(f.value(i).as_slice())),
        }
    }

    /// Control value at an arbitrary time inside cell `k`.
    fn in_cell(&self, m: usize, grid: &Grid, k: usize, time: f64) -> Result<DVector<f64>> {
        match self {
            Control::Zero => Ok(DVector::zeros(m)),
            Control::Expr(e) => Ok(DVector::from_column_slice(e.eval(time)?.as_slice())),
            Control::Sampled(f) => {
                let t0 = grid.point_f64(k);
                let t1 = grid.point_f64(k + 1);
                let w = if t1 == t0 {
                    0.0
                } else {
                    (time - t0) / (t1 - t0)
                };
                let v0 = DVector::from_column_slice(f.value(k).as_slice());
                let v1 = DVector::from_column_slice(f.value(k + 1).as_slice());
                Ok(&v0 + (v1 - &v0) * w)
            }
        }
    }
}

/// Solved state and output samples, in traversal order: descending times for
/// backward systems, ascending for forward ones.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times_exact: Vec<TimePoint>,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State at an exact time, if it was sampled.
    pub fn state_at(&self, t: &TimePoint) -> Option<&DVector<f64>> {
        self.times_exact
            .iter()
            .position(|x| x == t)
            .map(|i| &self.states[i])
    }
}

/// One RK4 step of `y' = A(t) y + B(t) v(t)` inside cell `k`; `h` may be
/// negative.
#[allow(clippy::too_many_arguments)]
fn rk4_vector_step(
    a: &MatrixExpr,
    b: &MatrixExpr,
    control: &Control,
    m: usize,
    grid: &Grid,
    k: usize,
    t: f64,
    h: f64,
    y: &DVector<f64>,
) -> Result<DVector<f64>> {
    let rhs = |time: f64, state: &DVector<f64>| -> Result<DVector<f64>> {
        let a_t = a.eval(time)?;
        let b_t = b.eval(time)?;
        let v = control.in_cell(m, grid, k, time)?;
        Ok(&a_t * state + b_t * v)
    };
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    let k3 = rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    let k4 = rhs(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Solves the backward initial value problem
/// `y^Nabla(s) = Abar(s) y(s) + Bbar(s) v(s)`, `y(s0) = y0`, down to `s1`,
/// by direct right-to-left stepping, and evaluates the output
/// `gamma(s) = Cbar(s) y(s) + Dbar(s) v(s)` along the way.
pub fn solve_backward_ivp(
    sys: &LinearSystem,
    grid: &Grid,
    y0: &DVector<f64>,
    control: &Control,
    s1: &TimePoint,
) -> Result<Trajectory> {
    sys.require_direction(Direction::Backward, "solve_backward_ivp")?;
    let Dims { n, m, .. } = sys.dims();
    if y0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "initial state has {} entries, expected {n}",
            y0.len()
        )));
    }
    control.check(m, grid)?;
    let i0 = grid.require_index(&sys.anchor())?;
    let i1 = grid.require_index(s1)?;
    if i1 >= i0 {
        return Err(Error::InvalidParameter(
            "backward solve needs s1 < s0".into(),
        ));
    }

    let mut times_exact = Vec::with_capacity(i0 - i1 + 1);
    let mut times = Vec::with_capacity(i0 - i1 + 1);
    let mut states = Vec::with_capacity(i0 - i1 + 1);
    let mut y = y0.clone();
    times_exact.push(*grid.point(i0));
    times.push(grid.point_f64(i0));
    states.push(y.clone());
    for k in (i1..i0).rev() {
        // step from node k+1 down to node k
        y = match grid.cell(k) {
            CellKind::Gap => {
                let nu = to_f64(&(grid.point(k + 1) - grid.point(k)));
                let s = grid.point_f64(k + 1);
                let a_s = sys.a.eval(s)?;
                let b_s = sys.b.eval(s)?;
                let v = control.at_node(m, grid, k + 1)?;
                &y - (&a_s * &y + b_s * v) * nu
            }
            CellKind::Dense => {
                let s = grid.point_f64(k + 1);
                let h = grid.point_f64(k) - s;
                rk4_vector_step(&sys.a, &sys.b, control, m, grid, k, s, h, &y)?
            }
        };
        times_exact.push(*grid.point(k));
        times.push(grid.point_f64(k));
        states.push(y.clone());
    }

    let mut outputs = Vec::with_capacity(states.len());
    for (idx, state) in states.iter().enumerate() {
        let node = i0 - idx;
        let s = grid.point_f64(node);
        let c_s = sys.c.eval(s)?;
        let d_s = sys.d.eval(s)?;
        let v = control.at_node(m, grid, node)?;
        outputs.push(&c_s * state + d_s * v);
    }
    Ok(Trajectory {
        times_exact,
        times,
        states,
        outputs,
    })
}

/// Solves the forward initial value problem
/// `x^Delta(t) = A(t) x(t) + B(t) u(t)`, `x(t0) = x0`, up to `t1`.
pub fn solve_forward_ivp(
    sys: &LinearSystem,
    grid: &Grid,
    x0: &DVector<f64>,
    control: &Control,
    t1: &TimePoint,
) -> Result<Trajectory> {
    sys.require_direction(Direction::Forward, "solve_forward_ivp")?;
    let Dims { n, m, .. } = sys.dims();
    if x0.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "initial state has {} entries, expected {n}",
            x0.len()
        )));
    }
    control.check(m, grid)?;
    let i0 = grid.require_index(&sys.anchor())?;
    let i1 = grid.require_index(t1)?;
    if i1 <= i0 {
        return Err(Error::InvalidParameter(
            "forward solve needs t1 > t0".into(),
        ));
    }

    let mut times_exact = Vec::with_capacity(i1 - i0 + 1);
    let mut times = Vec::with_capacity(i1 - i0 + 1);
    let mut states = Vec::with_capacity(i1 - i0 + 1);
    let mut x = x0.clone();
    times_exact.push(*grid.point(i0));
    times.push(grid.point_f64(i0));
    states.push(x.clone());
    for k in i0..i1 {
        x = match grid.cell(k) {
            CellKind::Gap => {
                let mu = to_f64(&(grid.point(k + 1) - grid.point(k)));
                let t = grid.point_f64(k);
                let a_t = sys.a.eval(t)?;
                let b_t = sys.b.eval(t)?;
                let u = control.at_node(m, grid, k)?;
                &x + (&a_t * &x + b_t * u) * mu
            }
            CellKind::Dense => {
                let t = grid.point_f64(k);
                let h = grid.point_f64(k + 1) - t;
                rk4_vector_step(&sys.a, &sys.b, control, m, grid, k, t, h, &x)?
            }
        };
        times_exact.push(*grid.point(k + 1));
        times.push(grid.point_f64(k + 1));
        states.push(x.clone());
    }

    let mut outputs = Vec::with_capacity(states.len());
    for (idx, state) in states.iter().enumerate() {
        let node = i0 + idx;
        let t = grid.point_f64(node);
        let c_t = sys.c.eval(t)?;
        let d_t = sys.d.eval(t)?;
        let u = control.at_node(m, grid, node)?;
        outputs.push(&c_t * state + d_t * u);
    }
    Ok(Trajectory {
        times_exact,
        times,
        states,
        outputs,
    })
}

/// Evaluates the variation-of-constants form
/// `y(s) = Psi(s, s0) y0 - integral_s^{s0} Psi(s, rho(z)) Bbar(z) v(z) nabla-z`
/// at a single time. Used to validate the stepped trajectory; the stepping
/// solver is the primary integrator.
pub fn variation_of_constants_backward(
    sys: &LinearSystem,
    grid: &Grid,
    y0: &DVector<f64>,
    control: &Control,
    s: &TimePoint,
) -> Result<DVector<f64>> {
    sys.require_direction(Direction::Backward, "variation_of_constants_backward")?;
    let Dims { n, m, .. } = sys.dims();
    if y0.len() != n {
        return Err(Error::ShapeMismatch("initial state length".into()));
    }
    control.check(m, grid)?;
    let i0 = grid.require_index(&sys.anchor())?;
    let i_s = grid.require_index(s)?;
    if i_s > i0 {
        return Err(Error::InvalidParameter("need s <= s0".into()));
    }

    // kernel at the left node of the running cell: P = Psi(s, z_k)
    let mut p = DMatrix::<f64>::identity(n, n);
    let mut integral = DVector::<f64>::zeros(n);
    for k in i_s..i0 {
        match grid.cell(k) {
            CellKind::Gap => {
                let nu = to_f64(&(grid.point(k + 1) - grid.point(k)));
                let z = grid.point_f64(k + 1);
                let b_z = sys.b.eval(z)?;
                let v = control.at_node(m, grid, k + 1)?;
                // rho(z) is the left node, so the kernel is the current P
                integral += (&p * (b_z * v)) * nu;
                p = &p * backward_cell_factor(&sys.a, grid, k)?;
            }
            CellKind::Dense => {
                // Simpson rule with a half-cell kernel, matching the RK4
                // order of the stepping solver
                let z_lo = grid.point_f64(k);
                let z_hi = grid.point_f64(k + 1);
                let h = z_hi - z_lo;
                let z_mid = z_lo + 0.5 * h;
                let term_at = |kernel: &DMatrix<f64>, z: f64| -> Result<DVector<f64>> {
                    let b_z = sys.b.eval(z)?;
                    let v = control.in_cell(m, grid, k, z)?;
                    Ok(kernel * (b_z * v))
                };
                let lo_term = term_at(&p, z_lo)?;
                let p_mid =
                    &p * rk4_matrix_step(&sys.a, z_mid, z_lo - z_mid, &DMatrix::identity(n, n))?;
                let mid_term = term_at(&p_mid, z_mid)?;
                let p_hi =
                    &p_mid * rk4_matrix_step(&sys.a, z_hi, z_mid - z_hi, &DMatrix::identity(n, n))?;
                let hi_term = term_at(&p_hi, z_hi)?;
                integral += (lo_term + mid_term * 4.0 + hi_term) * (h / 6.0);
                p = p_hi;
            }
        }
    }
    Ok(&p * y0 - integral)
}

/// Invertibility report for the stepping factors of a system.
#[derive(Debug, Clone)]
pub struct FactorInvertibility {
    /// All checked factors invertible.
    pub ok: bool,
    /// Smallest scattered time whose factor is singular.
    pub witness: Option<TimePoint>,
    /// Number of scattered points checked.
    pub checked_points: usize,
}

fn factor_is_invertible(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    smax > 0.0 && smin > INVERTIBILITY_REL_TOL * smax
}

/// Checks invertibility of `I - nu(s) Abar(s)` at every left-scattered grid
/// node of a backward system.
pub fn is_progressive(sys: &LinearSystem, grid: &Grid) -> Result<FactorInvertibility> {
    sys.require_direction(Direction::Backward, "is_progressive")?;
    let n = sys.dims().n;
    let mut checked = 0usize;
    for k in 0..grid.len() - 1 {
        if grid.cell(k) != CellKind::Gap {
            continue;
        }
        checked += 1;
        let nu = to_f64(&(grid.point(k + 1) - grid.point(k)));
        let a_s = sys.a.eval(grid.point_f64(k + 1))?;
        let factor = DMatrix::identity(n, n) - a_s.scale(nu);
        if !factor_is_invertible(&factor) {
            return Ok(FactorInvertibility {
                ok: false,
                witness: Some(*grid.point(k + 1)),
                checked_points: checked,
            });
        }
    }
    Ok(FactorInvertibility {
        ok: true,
        witness: None,
        checked_points: checked,
    })
}

/// Checks invertibility of `I + mu(t) A(t)` at every right-scattered grid
/// node of a forward system.
pub fn is_regressive(sys: &LinearSystem, grid: &Grid) -> Result<FactorInvertibility> {
    sys.require_direction(Direction::Forward, "is_regressive")?;
    let n = sys.dims().n;
    let mut checked = 0usize;
    for k in 0..grid.len() - 1 {
        if grid.cell(k) != CellKind::Gap {
            continue;
        }
        checked += 1;
        let mu = to_f64(&(grid.point(k + 1) - grid.point(k)));
        let a_t = sys.a.eval(grid.point_f64(k))?;
        let factor = DMatrix::identity(n, n) + a_t.scale(mu);
        if !factor_is_invertible(&factor) {
            return Ok(FactorInvertibility {
                ok: false,
                witness: Some(*grid.point(k)),
                checked_points: checked,
            });
        }
    }
    Ok(FactorInvertibility {
        ok: true,
        witness: None,
        checked_points: checked,
    })
}
