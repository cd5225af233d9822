//! Controllability and observability tests.
//!
//! Constant systems get the Kalman block-matrix ranks and the eigenvalue
//! recursion variant; time-varying backward systems get the kernel-derivative
//! rank test, a sufficient condition that reports `inconclusive` rather than
//! a negative verdict. Reachability Gramians computed by quadrature serve as
//! the independent oracle for both.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exact::{self, to_f64, TimePoint};
use crate::linsys::{
    backward_cell_factor, is_progressive, solve_backward_ivp, transition_backward, Control,
    Direction, LinearSystem,
};
use crate::timescale::{CellKind, Grid};

/// Relative singular-value threshold for numerical rank decisions.
pub const RANK_REL_TOL: f64 = 1e-9;

/// Outcome of a rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Controllable,
    NotControllable,
    Observable,
    NotObservable,
    /// The sufficient condition did not fire; nothing is concluded.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Controllable => "controllable",
            Verdict::NotControllable => "not_controllable",
            Verdict::Observable => "observable",
            Verdict::NotObservable => "not_observable",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// True for the affirmative verdicts.
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Controllable | Verdict::Observable)
    }
}

/// Result of one rank test: the assembled matrix dimensions, its singular
/// values, the numerical rank at the recorded threshold, and the verdict.
#[derive(Debug, Clone)]
pub struct RankReport {
    pub test: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub threshold: f64,
    pub test_point: Option<f64>,
    pub order: Option<usize>,
    pub verdict: Verdict,
}

/// Numerical rank: singular values above `RANK_REL_TOL` times the largest.
pub fn numerical_rank(singular_values: &[f64]) -> (usize, f64) {
    let smax = singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax <= 0.0 {
        return (0, 0.0);
    }
    let threshold = RANK_REL_TOL * smax;
    let rank = singular_values.iter().filter(|&&s| s > threshold).count();
    (rank, threshold)
}

fn real_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

fn complex_singular_values(m: &DMatrix<Complex<f64>>) -> Vec<f64> {
    let mut sv: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

fn require_constant(sys: &LinearSystem, which: &str, hint: &str) -> Result<()> {
    let ok = match which {
        "controllability" => sys.a().is_constant() && sys.b().is_constant(),
        _ => sys.a().is_constant() && sys.c().is_constant(),
    };
    if !ok {
        return Err(Error::TimeVarying(format!(
            "constant-matrix test requires constant entries; use {hint} instead"
        )));
    }
    Ok(())
}

fn require_window_points(sys: &LinearSystem) -> Result<()> {
    let n = sys.dims().n;
    let (lo, hi) = window(sys);
    if !sys.scale().has_at_least_points(&lo, &hi, n + 1) {
        return Err(Error::TooFewPoints(format!(
            "working interval [{}, {}] needs at least {} scale points",
            exact::format_time(&lo),
            exact::format_time(&hi),
            n + 1
        )));
    }
    Ok(())
}

fn window(sys: &LinearSystem) -> (TimePoint, TimePoint) {
    let a = sys.anchor();
    let h = sys.horizon();
    if a <= h {
        (a, h)
    } else {
        (h, a)
    }
}

/// Eigenvalues of a real matrix, sorted ascending by real part, then by
/// imaginary part.
fn sorted_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = a.complex_eigenvalues().iter().cloned().collect();
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    ev
}

/// Eigenvalue-recursion factors `P_0 = I`, `P_{k+1} = (A - lambda_{k+1} I) P_k`.
fn p_factors(a: &DMatrix<f64>, eigenvalues: &[Complex<f64>]) -> Vec<DMatrix<Complex<f64>>> {
    let n = a.nrows();
    let ac = a.map(|x| Complex::new(x, 0.0));
    let eye = DMatrix::<Complex<f64>>::identity(n, n);
    let mut factors = vec![eye.clone()];
    for k in 0..n.saturating_sub(1) {
        let shifted = &ac - eye.map(|x| x * eigenvalues[k]);
        let next = &shifted * &factors[k];
        factors.push(next);
    }
    factors
}

/// Kalman rank test for controllability of a constant system:
/// `rank(B, AB, ..., A^{n-1} B) = n`.
pub fn kalman_controllability(sys: &LinearSystem) -> Result<RankReport> {
    require_constant(sys, "controllability", "tv_controllability")?;
    require_window_points(sys)?;
    let n = sys.dims().n;
    let m = sys.dims().m;
    let a = sys.a().constant_value()?;
    let b = sys.b().constant_value()?;
    let mut k = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for j in 0..n {
        k.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = &a * block;
    }
    let sv = real_singular_values(&k);
    let (rank, threshold) = numerical_rank(&sv);
    Ok(RankReport {
        test: "kalman_controllability",
        rows: n,
        cols: n * m,
        singular_values: sv,
        rank,
        threshold,
        test_point: None,
        order: None,
        verdict: if rank == n {
            Verdict::Controllable
        } else {
            Verdict::NotControllable
        },
    })
}

/// Eigenvalue-recursion rank test for controllability of a constant system:
/// `rank(P_0 B, ..., P_{n-1} B) = n` over the complex field.
pub fn pk_controllability(sys: &LinearSystem) -> Result<RankReport> {
    require_constant(sys, "controllability", "tv_controllability")?;
    require_window_points(sys)?;
    let n = sys.dims().n;
    let m = sys.dims().m;
    let a = sys.a().constant_value()?;
    let b = sys.b().constant_value()?.map(|x| Complex::new(x, 0.0));
    let eigenvalues = sorted_eigenvalues(&a);
    let factors = p_factors(&a, &eigenvalues);
    let mut k = DMatrix::<Complex<f64>>::zeros(n, n * m);
    for (j, p) in factors.iter().enumerate() {
        k.view_mut((0, j * m), (n, m)).copy_from(&(p * &b));
    }
    let sv = complex_singular_values(&k);
    let (rank, threshold) = numerical_rank(&sv);
    Ok(RankReport {
        test: "pk_controllability",
        rows: n,
        cols: n * m,
        singular_values: sv,
        rank,
        threshold,
        test_point: None,
        order: None,
        verdict: if rank == n {
            Verdict::Controllable
        } else {
            Verdict::NotControllable
        },
    })
}

/// Eigenvalue-recursion rank test for observability of a constant system:
/// the stacked `(C P_0; ...; C P_{n-1})` over the complex field.
pub fn pk_observability(sys: &LinearSystem) -> Result<RankReport> {
    require_constant(sys, "observability", "tv_observability")?;
    require_window_points(sys)?;
    let n = sys.dims().n;
    let p = sys.dims().p;
    let a = sys.a().constant_value()?;
    let c = sys.c().constant_value()?.map(|x| Complex::new(x, 0.0));
    let eigenvalues = sorted_eigenvalues(&a);
    let factors = p_factors(&a, &eigenvalues);
    let mut l = DMatrix::<Complex<f64>>::zeros(n * p, n);
    for (j, pf) in factors.iter().enumerate() {
        l.view_mut((j * p, 0), (p, n)).copy_from(&(&c * pf));
    }
    let sv = complex_singular_values(&l);
    let (rank, threshold) = numerical_rank(&sv);
    Ok(RankReport {
        test: "pk_observability",
        rows: n * p,
        cols: n,
        singular_values: sv,
        rank,
        threshold,
        test_point: None,
        order: None,
        verdict: if rank == n {
            Verdict::Observable
        } else {
            Verdict::NotObservable
        },
    })
}

/// Kalman rank test for observability of a constant system: the stacked
/// `(C; CA; ...; CA^{n-1})`. Also runs the eigenvalue-recursion variant and
/// fails loudly if the two verdicts ever disagree.
pub fn kalman_observability(sys: &LinearSystem) -> Result<RankReport> {
    require_constant(sys, "observability", "tv_observability")?;
    require_window_points(sys)?;
    let n = sys.dims().n;
    let p = sys.dims().p;
    let a = sys.a().constant_value()?;
    let c = sys.c().constant_value()?;
    let mut l = DMatrix::zeros(n * p, n);
    let mut block = c.clone();
    for j in 0..n {
        l.view_mut((j * p, 0), (p, n)).copy_from(&block);
        block *= &a;
    }
    let sv = real_singular_values(&l);
    let (rank, threshold) = numerical_rank(&sv);
    let verdict = if rank == n {
        Verdict::Observable
    } else {
        Verdict::NotObservable
    };
    let pk = pk_observability(sys)?;
    if pk.verdict != verdict {
        return Err(Error::Numerical(
            "observability rank variants disagree".into(),
        ));
    }
    Ok(RankReport {
        test: "kalman_observability",
        rows: n * p,
        cols: n,
        singular_values: sv,
        rank,
        threshold,
        test_point: None,
        order: None,
        verdict,
    })
}

/// Iterated backward difference quotients of the kernel `z -> Psi(s_c, z)`
/// along the grid nodes at and above `s_c`. Entry `j` approximates the j-th
/// nabla derivative; exact at scattered nodes.
fn kernel_derivatives(
    sys: &LinearSystem,
    grid: &Grid,
    ic: usize,
    r: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let n = sys.dims().n;
    let mut level: Vec<DMatrix<f64>> = Vec::with_capacity(r + 1);
    level.push(DMatrix::identity(n, n));
    let mut p = DMatrix::identity(n, n);
    for k in 0..r {
        p = &p * backward_cell_factor(sys.a(), grid, ic + k)?;
        level.push(p.clone());
    }
    let mut derivatives = vec![level[0].clone()];
    for j in 1..=r {
        let mut next = Vec::with_capacity(level.len());
        next.push(level[0].clone());
        for k in 1..level.len() {
            let dz = to_f64(&(grid.point(ic + k) - grid.point(ic + k - 1)));
            next.push((&level[k] - &level[k - 1]) / dz);
        }
        level = next;
        derivatives.push(level[j].clone());
    }
    Ok(derivatives)
}

fn tv_preconditions(sys: &LinearSystem, grid: &Grid, s_c: &TimePoint, r: usize) -> Result<usize> {
    if sys.direction() != Direction::Backward {
        return Err(Error::InvalidParameter(
            "time-varying tests run on backward systems; dualize first".into(),
        ));
    }
    if r > 3 {
        return Err(Error::InvalidParameter(
            "derivative order r must be at most 3".into(),
        ));
    }
    let i_lo = grid.require_index(&sys.horizon())?;
    let i_hi = grid.require_index(&sys.anchor())?;
    let ic = grid.require_index(s_c)?;
    if ic <= i_lo || ic > i_hi {
        return Err(Error::InvalidParameter(format!(
            "test point {} must lie strictly inside the working window",
            exact::format_time(s_c)
        )));
    }
    if ic + r > i_hi {
        return Err(Error::InvalidParameter(format!(
            "test point {} too close to the window edge for r = {r}",
            exact::format_time(s_c)
        )));
    }
    Ok(ic)
}

/// Time-varying controllability rank test: assembles
/// `(K_0(s_c) ... K_r(s_c))` with `K_j = -(d^j/dz^j Psi(s_c, z))|_{z=s_c} B(s_c)`
/// and reports `controllable` on full rank, `inconclusive` otherwise (the
/// rank condition is sufficient only).
pub fn tv_controllability(
    sys: &LinearSystem,
    grid: &Grid,
    s_c: &TimePoint,
    r: usize,
) -> Result<RankReport> {
    let ic = tv_preconditions(sys, grid, s_c, r)?;
    let n = sys.dims().n;
    let m = sys.dims().m;
    let b_c = sys.b().eval(grid.point_f64(ic))?;
    let ders = kernel_derivatives(sys, grid, ic, r)?;
    let mut k = DMatrix::zeros(n, (r + 1) * m);
    for (j, d) in ders.iter().enumerate() {
        let block = -(d * &b_c);
        k.view_mut((0, j * m), (n, m)).copy_from(&block);
    }
    let sv = real_singular_values(&k);
    let (rank, threshold) = numerical_rank(&sv);
    Ok(RankReport {
        test: "tv_controllability",
        rows: n,
        cols: (r + 1) * m,
        singular_values: sv,
        rank,
        threshold,
        test_point: Some(grid.point_f64(ic)),
        order: Some(r),
        verdict: if rank == n {
            Verdict::Controllable
        } else {
            Verdict::Inconclusive
        },
    })
}

/// Time-varying observability rank test: stacks
/// `L_j = -C(s_c) (d^j/dz^j Psi(s_c, z))|_{z=s_c}` and reports `observable`
/// on full rank, `inconclusive` otherwise.
pub fn tv_observability(
    sys: &LinearSystem,
    grid: &Grid,
    s_c: &TimePoint,
    r: usize,
) -> Result<RankReport> {
    let ic = tv_preconditions(sys, grid, s_c, r)?;
    let n = sys.dims().n;
    let p = sys.dims().p;
    let c_c = sys.c().eval(grid.point_f64(ic))?;
    let ders = kernel_derivatives(sys, grid, ic, r)?;
    let mut l = DMatrix::zeros((r + 1) * p, n);
    for (j, d) in ders.iter().enumerate() {
        let block = -(&c_c * d);
        l.view_mut((j * p, 0), (p, n)).copy_from(&block);
    }
    let sv = real_singular_values(&l);
    let (rank, threshold) = numerical_rank(&sv);
    Ok(RankReport {
        test: "tv_observability",
        rows: (r + 1) * p,
        cols: n,
        singular_values: sv,
        rank,
        threshold,
        test_point: Some(grid.point_f64(ic)),
        order: Some(r),
        verdict: if rank == n {
            Verdict::Observable
        } else {
            Verdict::Inconclusive
        },
    })
}

/// Gramian of a backward system over `[s1, s0]`, with its eigenvalues and
/// numerical rank: the quadrature oracle behind the rank tests.
#[derive(Debug, Clone)]
pub struct GramianReport {
    pub gramian: DMatrix<f64>,
    /// Eigenvalues sorted descending.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub threshold: f64,
    pub interval: (TimePoint, TimePoint),
    /// False when a stepping factor is singular somewhere in the window; the
    /// Gramian is still computed, but minimality theory does not apply.
    pub progressive: bool,
    pub full_rank: bool,
}

fn gramian_interval(
    sys: &LinearSystem,
    grid: &Grid,
    s1: &TimePoint,
    s0: &TimePoint,
) -> Result<(usize, usize)> {
    if sys.direction() != Direction::Backward {
        return Err(Error::InvalidParameter(
            "gramians run on backward systems; dualize first".into(),
        ));
    }
    let i_lo = grid.require_index(s1)?;
    let i_hi = grid.require_index(s0)?;
    if i_lo >= i_hi {
        return Err(Error::InvalidParameter(
            "gramian interval is degenerate".into(),
        ));
    }
    Ok((i_lo, i_hi))
}

fn finish_gramian(
    mut w: DMatrix<f64>,
    n: usize,
    interval: (TimePoint, TimePoint),
    progressive: bool,
) -> GramianReport {
    w = (&w + w.transpose()).scale(0.5);
    let mut eigenvalues: Vec<f64> = w
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    eigenvalues.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let emax = eigenvalues.first().cloned().unwrap_or(0.0).max(0.0);
    let threshold = RANK_REL_TOL * emax;
    let rank = if emax <= 0.0 {
        0
    } else {
        eigenvalues.iter().filter(|&&e| e > threshold).count()
    };
    GramianReport {
        gramian: w,
        eigenvalues,
        rank,
        threshold,
        interval,
        progressive,
        full_rank: rank == n,
    }
}

/// Reachability Gramian
/// `W_c = integral_{s1}^{s0} Psi(s1, rho(z)) B(z) B(z)^T Psi(s1, rho(z))^T nabla-z`,
/// accumulated left to right with the running kernel.
pub fn controllability_gramian(
    sys: &LinearSystem,
    grid: &Grid,
    s1: &TimePoint,
    s0: &TimePoint,
) -> Result<GramianReport> {
    let (i_lo, i_hi) = gramian_interval(sys, grid, s1, s0)?;
    let n = sys.dims().n;
    let progressive = is_progressive(sys, grid)?.ok;
    let mut w = DMatrix::<f64>::zeros(n, n);
    let mut p = DMatrix::<f64>::identity(n, n);
    for k in i_lo..i_hi {
        match grid.cell(k) {
            CellKind::Gap => {
                let nu = to_f64(&(grid.point(k + 1) - grid.point(k)));
                let b_z = sys.b().eval(grid.point_f64(k + 1))?;
                let col = &p * b_z;
                w += (&col * col.transpose()) * nu;
                p = &p * backward_cell_factor(sys.a(), grid, k)?;
            }
            CellKind::Dense => {
                let h = grid.point_f64(k + 1) - grid.point_f64(k);
                let b_lo = sys.b().eval(grid.point_f64(k))?;
                let col_lo = &p * b_lo;
                let g_lo = &col_lo * col_lo.transpose();
                p = &p * backward_cell_factor(sys.a(), grid, k)?;
                let b_hi = sys.b().eval(grid.point_f64(k + 1))?;
                let col_hi = &p * b_hi;
                let g_hi = &col_hi * col_hi.transpose();
                w += (g_lo + g_hi) * (0.5 * h);
            }
        }
    }
    Ok(finish_gramian(w, n, (*s1, *s0), progressive))
}

/// Observability Gramian
/// `W_o = integral_{s1}^{s0} Psi(z, s0)^T C(z)^T C(z) Psi(z, s0) nabla-z`.
pub fn observability_gramian(
    sys: &LinearSystem,
    grid: &Grid,
    s1: &TimePoint,
    s0: &TimePoint,
) -> Result<GramianReport> {
    let (i_lo, i_hi) = gramian_interval(sys, grid, s1, s0)?;
    let n = sys.dims().n;
    let progressive = is_progressive(sys, grid)?.ok;
    // Psi(z, s0) per node, built descending from the anchor
    let mut kernels: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n); i_hi - i_lo + 1];
    for k in (i_lo..i_hi).rev() {
        let factor = backward_cell_factor(sys.a(), grid, k)?;
        kernels[k - i_lo] = &factor * &kernels[k + 1 - i_lo];
    }
    let kernel_sq = |node: usize| -> Result<DMatrix<f64>> {
        let c_z = sys.c().eval(grid.point_f64(node))?;
        let cm = c_z * &kernels[node - i_lo];
        Ok(cm.transpose() * cm)
    };
    let mut w = DMatrix::<f64>::zeros(n, n);
    for k in i_lo..i_hi {
        match grid.cell(k) {
            CellKind::Gap => {
                let nu = to_f64(&(grid.point(k + 1) - grid.point(k)));
                w += kernel_sq(k + 1)? * nu;
            }
            CellKind::Dense => {
                let h = grid.point_f64(k + 1) - grid.point_f64(k);
                w += (kernel_sq(k)? + kernel_sq(k + 1)?) * (0.5 * h);
            }
        }
    }
    Ok(finish_gramian(w, n, (*s1, *s0), progressive))
}

/// Checks that the reachable set from `y0` is the translate of the reachable
/// set from the origin by `Psi(s1, s0) y0`: for every sample control, the
/// difference of the two endpoint states equals that translate to 1e-9.
pub fn reachable_translate_check(
    sys: &LinearSystem,
    grid: &Grid,
    y0: &DVector<f64>,
    s1: &TimePoint,
    controls: &[Control],
) -> Result<bool> {
    if sys.direction() != Direction::Backward {
        return Err(Error::InvalidParameter(
            "reachability runs on backward systems".into(),
        ));
    }
    let s0 = sys.anchor();
    let psi = transition_backward(sys, grid, s1, &s0)?;
    let translate = &psi * y0;
    let zero = DVector::zeros(y0.len());
    for control in controls {
        let from_y0 = solve_backward_ivp(sys, grid, y0, control, s1)?;
        let from_zero = solve_backward_ivp(sys, grid, &zero, control, s1)?;
        let diff = from_y0.state_at(s1).unwrap() - from_zero.state_at(s1).unwrap();
        if (&diff - &translate).norm() > 1e-9 * (1.0 + translate.norm()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Kalman test of the dualized system: the delta-side route to the same
/// verdict, used as a cross-check.
pub fn dual_kalman_controllability(sys: &LinearSystem) -> Result<RankReport> {
    kalman_controllability(&sys.dualize())
}
