//! Weighting patterns, separable-rank factorization, and minimality.
//!
//! The weighting pattern `G(s, z) = C(s) Psi(s, rho(z)) B(z)` is the kernel
//! of the input-to-output action of a backward system. Sampling it on a
//! rectangle of causal `(s, z)` pairs and factoring the assembled block
//! matrix through a truncated singular decomposition certifies realizability
//! at the sampled resolution and cross-checks minimality: a realization is
//! minimal exactly when it is both controllable and observable.

use nalgebra::DMatrix;

use crate::analysis::{
    kalman_controllability, kalman_observability, tv_controllability, tv_observability, RankReport,
    Verdict,
};
use crate::error::{Error, Result};
use crate::exact::{self, TimePoint};
use crate::linsys::{
    backward_cell_factor, is_progressive, Direction, FactorInvertibility, LinearSystem,
};
use crate::timescale::{CellKind, Grid};

/// Default relative tolerance for the separable rank cut and the
/// factorization residual.
pub const SEPARABLE_REL_TOL: f64 = 1e-8;

/// Weighting pattern `G(s, z) = C(s) Psi(s, rho(z)) B(z)` at one causal pair
/// of grid nodes: `s <= rho(z)` and `z <= s0`.
pub fn weighting_pattern(
    sys: &LinearSystem,
    grid: &Grid,
    s: &TimePoint,
    z: &TimePoint,
) -> Result<DMatrix<f64>> {
    if sys.direction() != Direction::Backward {
        return Err(Error::InvalidParameter(
            "weighting patterns are defined for backward systems".into(),
        ));
    }
    let i_s = grid.require_index(s)?;
    let i_z = grid.require_index(z)?;
    if *z > sys.anchor() {
        return Err(Error::InvalidParameter(format!(
            "z = {} lies above the anchor",
            exact::format_time(z)
        )));
    }
    let rho_z = grid.scale().rho(z)?;
    let i_rho = grid.require_index(&rho_z)?;
    if i_rho < i_s {
        return Err(Error::InvalidParameter(format!(
            "non-causal pair: s = {}, rho(z) = {}",
            exact::format_time(s),
            exact::format_time(&rho_z)
        )));
    }
    let mut psi = DMatrix::identity(sys.dims().n, sys.dims().n);
    for k in i_s..i_rho {
        psi = &psi * backward_cell_factor(sys.a(), grid, k)?;
    }
    let c_s = sys.c().eval(grid.point_f64(i_s))?;
    let b_z = sys.b().eval(grid.point_f64(i_z))?;
    Ok(c_s * psi * b_z)
}

/// Sampled weighting pattern on an `s`-grid times `z`-grid rectangle.
/// Blocks exist only for causal pairs; the rest stay masked.
#[derive(Debug, Clone)]
pub struct KernelSample {
    pub s_points: Vec<TimePoint>,
    pub z_points: Vec<TimePoint>,
    /// `rho(z_j)` per z point.
    pub rho_z: Vec<TimePoint>,
    pub p: usize,
    pub m: usize,
    /// Row-major in `s`, `None` marks a non-causal (masked) pair.
    pub blocks: Vec<Option<DMatrix<f64>>>,
}

impl KernelSample {
    pub fn block(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        self.blocks[i * self.z_points.len() + j].as_ref()
    }

    /// Number of causal (filled) pairs.
    pub fn causal_pairs(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_some()).count()
    }
}

/// Samples the weighting pattern over all causal pairs of the given grids.
pub fn sample_kernel(
    sys: &LinearSystem,
    grid: &Grid,
    s_points: &[TimePoint],
    z_points: &[TimePoint],
) -> Result<KernelSample> {
    if sys.direction() != Direction::Backward {
        return Err(Error::InvalidParameter(
            "weighting patterns are defined for backward systems".into(),
        ));
    }
    if s_points.is_empty() || z_points.is_empty() {
        return Err(Error::InvalidParameter("empty kernel sample grid".into()));
    }
    let n = sys.dims().n;
    let p = sys.dims().p;
    let m = sys.dims().m;
    let mut rho_z = Vec::with_capacity(z_points.len());
    let mut z_info = Vec::with_capacity(z_points.len());
    for z in z_points {
        if *z > sys.anchor() {
            return Err(Error::InvalidParameter(format!(
                "z = {} lies above the anchor",
                exact::format_time(z)
            )));
        }
        let iz = grid.require_index(z)?;
        let rho = grid.scale().rho(z)?;
        let irho = grid.require_index(&rho)?;
        rho_z.push(rho);
        z_info.push((iz, irho));
    }
    let mut blocks: Vec<Option<DMatrix<f64>>> = vec![None; s_points.len() * z_points.len()];
    for (i, s) in s_points.iter().enumerate() {
        let i_s = grid.require_index(s)?;
        let c_s = sys.c().eval(grid.point_f64(i_s))?;
        // visit z columns by ascending rho index, advancing one running kernel
        let mut order: Vec<usize> = (0..z_points.len()).collect();
        order.sort_by_key(|&j| z_info[j].1);
        let mut psi = DMatrix::<f64>::identity(n, n);
        let mut cursor = i_s;
        for j in order {
            let (iz, irho) = z_info[j];
            if irho < i_s {
                continue; // non-causal, stays masked
            }
            while cursor < irho {
                psi = &psi * backward_cell_factor(sys.a(), grid, cursor)?;
                cursor += 1;
            }
            let b_z = sys.b().eval(grid.point_f64(iz))?;
            blocks[i * z_points.len() + j] = Some(&c_s * &psi * b_z);
        }
    }
    Ok(KernelSample {
        s_points: s_points.to_vec(),
        z_points: z_points.to_vec(),
        rho_z,
        p,
        m,
        blocks,
    })
}

/// Separable-rank factorization of a kernel sample: left factors per `s`
/// point, right factors per `z` point, and the split time the factorization
/// passes through.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub s_points: Vec<TimePoint>,
    pub z_points: Vec<TimePoint>,
    /// `p x rank` block per retained s point.
    pub h_factors: Vec<DMatrix<f64>>,
    /// `rank x m` block per retained z point.
    pub f_factors: Vec<DMatrix<f64>>,
    pub rank: usize,
    /// Singular values of the factored rectangle, descending.
    pub singular_values: Vec<f64>,
    /// Relative Frobenius residual of the truncated reconstruction over the
    /// factored causal rectangle.
    pub residual: f64,
    /// Split time: `s` factors live at or below it, `z` factors above.
    pub split: TimePoint,
}

/// Numerical separable rank of a kernel sample.
///
/// The rank of a masked matrix is not meaningful, so the sample is swept
/// over candidate split times: each split selects the fully-causal rectangle
/// of pairs factoring through the state at the split, whose rank never
/// exceeds the state dimension. The separable rank is the maximum over
/// splits; the factorization of the best split is returned.
pub fn separable_rank(ks: &KernelSample, tol: f64) -> Result<(usize, Factorization)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let mut candidates: Vec<TimePoint> = ks.s_points.clone();
    candidates.extend(ks.rho_z.iter().cloned());
    candidates.sort();
    candidates.dedup();

    // best split: (rank, rectangle size, row set, column set, split time)
    type Split = (usize, usize, Vec<usize>, Vec<usize>, TimePoint);
    let mut best: Option<Split> = None;
    for theta in &candidates {
        let rows: Vec<usize> = (0..ks.s_points.len())
            .filter(|&i| ks.s_points[i] <= *theta)
            .collect();
        let cols: Vec<usize> = (0..ks.z_points.len())
            .filter(|&j| ks.rho_z[j] >= *theta)
            .collect();
        if rows.is_empty() || cols.is_empty() {
            continue;
        }
        // every pair in the rectangle is causal by construction
        let mut assembled = DMatrix::<f64>::zeros(rows.len() * ks.p, cols.len() * ks.m);
        for (ri, &i) in rows.iter().enumerate() {
            for (cj, &j) in cols.iter().enumerate() {
                let block = ks.block(i, j).ok_or_else(|| {
                    Error::Numerical("masked block inside a causal rectangle".into())
                })?;
                assembled
                    .view_mut((ri * ks.p, cj * ks.m), (ks.p, ks.m))
                    .copy_from(block);
            }
        }
        let sv = assembled.clone().svd(false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0f64, f64::max);
        let rank = if smax <= 0.0 {
            0
        } else {
            sv.iter().filter(|&&s| s > tol * smax).count()
        };
        let size = rows.len() * cols.len();
        let better = match &best {
            None => true,
            Some((r, sz, ..)) => rank > *r || (rank == *r && size > *sz),
        };
        if better {
            best = Some((rank, size, rows, cols, *theta));
        }
    }
    let (rank, _, rows, cols, split) =
        best.ok_or_else(|| Error::InvalidParameter("no causal split in the sample".into()))?;

    // factor the best rectangle through a truncated SVD
    let mut assembled = DMatrix::<f64>::zeros(rows.len() * ks.p, cols.len() * ks.m);
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            assembled
                .view_mut((ri * ks.p, cj * ks.m), (ks.p, ks.m))
                .copy_from(ks.block(i, j).unwrap());
        }
    }
    let svd = assembled.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut singular_values: Vec<f64> = svd.singular_values.iter().cloned().collect();
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let tail: f64 = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(k, _)| *k >= rank)
        .map(|(_, s)| s * s)
        .sum();
    let residual = if total > 0.0 {
        (tail / total).sqrt()
    } else {
        0.0
    };
    let mut h_factors = Vec::with_capacity(rows.len());
    let mut f_factors = Vec::with_capacity(cols.len());
    for ri in 0..rows.len() {
        let mut h = DMatrix::<f64>::zeros(ks.p, rank);
        for k in 0..rank {
            let w = svd.singular_values[k].sqrt();
            for r in 0..ks.p {
                h[(r, k)] = u[(ri * ks.p + r, k)] * w;
            }
        }
        h_factors.push(h);
    }
    for cj in 0..cols.len() {
        let mut f = DMatrix::<f64>::zeros(rank, ks.m);
        for k in 0..rank {
            let w = svd.singular_values[k].sqrt();
            for c in 0..ks.m {
                f[(k, c)] = vt[(k, cj * ks.m + c)] * w;
            }
        }
        f_factors.push(f);
    }
    let factorization = Factorization {
        s_points: rows.iter().map(|&i| ks.s_points[i]).collect(),
        z_points: cols.iter().map(|&j| ks.z_points[j]).collect(),
        h_factors,
        f_factors,
        rank,
        singular_values,
        residual,
        split,
    };
    Ok((rank, factorization))
}

/// Default sample points for kernel grids inside `[s1, s0]`: scattered
/// endpoints plus quarter points of every dense run, thinned evenly to
/// eight per side.
pub fn default_sample_points(
    grid: &Grid,
    s1: &TimePoint,
    s0: &TimePoint,
) -> Result<(Vec<TimePoint>, Vec<TimePoint>)> {
    const TARGET: usize = 8;
    let i_lo = grid.require_index(s1)?;
    let i_hi = grid.require_index(s0)?;
    if i_lo >= i_hi {
        return Err(Error::InvalidParameter(
            "kernel sample window is degenerate".into(),
        ));
    }
    let mut picks: Vec<usize> = vec![i_lo, i_hi];
    // endpoints of every dense run and every gap inside the window
    let mut run_start = i_lo;
    for k in i_lo..i_hi {
        if grid.cell(k) == CellKind::Gap {
            picks.push(k);
            picks.push(k + 1);
            let run_len = k - run_start;
            for frac in [1usize, 2, 3] {
                picks.push(run_start + run_len * frac / 4);
            }
            run_start = k + 1;
        }
    }
    let run_len = i_hi - run_start;
    for frac in [1usize, 2, 3] {
        picks.push(run_start + run_len * frac / 4);
    }
    picks.sort_unstable();
    picks.dedup();
    let selected: Vec<usize> = if picks.len() <= TARGET {
        picks
    } else {
        (0..TARGET)
            .map(|k| picks[k * (picks.len() - 1) / (TARGET - 1)])
            .collect::<Vec<_>>()
    };
    let mut points: Vec<TimePoint> = selected.iter().map(|&i| *grid.point(i)).collect();
    points.dedup();
    Ok((points.clone(), points))
}

/// Minimality verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimalityVerdict {
    Minimal,
    NotMinimal,
    /// Time-varying tests are sufficient conditions only; nothing concluded.
    Inconclusive,
}

impl MinimalityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            MinimalityVerdict::Minimal => "minimal",
            MinimalityVerdict::NotMinimal => "not_minimal",
            MinimalityVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Full minimality report: the two sub-verdicts, the progressivity gate for
/// time-varying systems, and the kernel-rank cross-check.
#[derive(Debug, Clone)]
pub struct MinimalityReport {
    pub verdict: MinimalityVerdict,
    pub controllability: RankReport,
    pub observability: RankReport,
    /// Populated for time-varying systems, where the minimality theorem
    /// assumes progressivity.
    pub progressivity: Option<FactorInvertibility>,
    pub separable_rank: usize,
    pub kernel_residual: f64,
    pub state_dim: usize,
}

/// Minimality test on `[s1, s0]`: a realization is minimal exactly when it
/// is both controllable and observable there. Constant systems use the
/// Kalman tests with no progressivity assumption; time-varying systems
/// require progressivity and use the kernel-derivative tests.
pub fn is_minimal(
    sys: &LinearSystem,
    grid: &Grid,
    s1: &TimePoint,
    s0: &TimePoint,
) -> Result<MinimalityReport> {
    if sys.direction() != Direction::Backward {
        return Err(Error::InvalidParameter(
            "minimality runs on backward systems; dualize first".into(),
        ));
    }
    let i_lo = grid.require_index(s1)?;
    let i_hi = grid.require_index(s0)?;
    if i_lo >= i_hi {
        return Err(Error::InvalidParameter(
            "minimality window is degenerate".into(),
        ));
    }
    let windowed = LinearSystem::new(
        Direction::Backward,
        sys.scale().clone(),
        sys.a().clone(),
        sys.b().clone(),
        sys.c().clone(),
        sys.d().clone(),
        *s0,
        *s1,
    )?;
    let n = sys.dims().n;

    let (controllability, observability, progressivity) = if windowed.is_constant() {
        (
            kalman_controllability(&windowed)?,
            kalman_observability(&windowed)?,
            None,
        )
    } else {
        let prog = is_progressive(&windowed, grid)?;
        if !prog.ok {
            let witness = prog
                .witness
                .map(|w| exact::format_time(&w))
                .unwrap_or_default();
            return Err(Error::Hypothesis(format!(
                "minimality of a time-varying system requires progressivity; \
                 singular stepping factor at s = {witness}"
            )));
        }
        let r = usize::min(3, n.saturating_sub(1));
        // default test point at seventy percent of the window, clamped so
        // that r nodes remain above it
        let mut ic = i_lo + (i_hi - i_lo) * 7 / 10;
        ic = ic.clamp(i_lo + 1, i_hi - r.min(i_hi - i_lo - 1));
        let s_c = *grid.point(ic);
        let r = r.min(i_hi - ic);
        (
            tv_controllability(&windowed, grid, &s_c, r)?,
            tv_observability(&windowed, grid, &s_c, r)?,
            Some(prog),
        )
    };

    let (s_pts, z_pts) = default_sample_points(grid, s1, s0)?;
    let ks = sample_kernel(&windowed, grid, &s_pts, &z_pts)?;
    let (separable, factorization) = separable_rank(&ks, SEPARABLE_REL_TOL)?;

    let verdict = match (controllability.verdict, observability.verdict) {
        (Verdict::Controllable, Verdict::Observable) => MinimalityVerdict::Minimal,
        (Verdict::NotControllable, _) | (_, Verdict::NotObservable) => {
            MinimalityVerdict::NotMinimal
        }
        _ => MinimalityVerdict::Inconclusive,
    };
    Ok(MinimalityReport {
        verdict,
        controllability,
        observability,
        progressivity,
        separable_rank: separable,
        kernel_residual: factorization.residual,
        state_dim: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::from_int;
    use crate::timescale::{ScaleKind, TimeScale};
    use std::sync::Arc;

    fn integers(lo: i64, hi: i64) -> Arc<TimeScale> {
        Arc::new(
            TimeScale::from_generator(ScaleKind::Integers, from_int(lo), from_int(hi)).unwrap(),
        )
    }

    /// Dual of the union of [2k, 2k+1]: components [-5,-4], [-3,-2], [-1,0].
    fn interval_union_scale() -> Arc<TimeScale> {
        Arc::new(
            TimeScale::from_components(vec![
                (from_int(-5), from_int(-4)),
                (from_int(-3), from_int(-2)),
                (from_int(-1), from_int(0)),
            ])
            .unwrap(),
        )
    }

    fn backward_const(
        ts: Arc<TimeScale>,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        c: &DMatrix<f64>,
        anchor: i64,
        horizon: i64,
    ) -> LinearSystem {
        let d = DMatrix::zeros(c.nrows(), b.ncols());
        LinearSystem::from_constants(
            Direction::Backward,
            ts,
            a,
            b,
            c,
            &d,
            from_int(anchor),
            from_int(horizon),
        )
        .unwrap()
    }

    #[test]
    fn constant_kernel_is_cb() {
        // n = 1, Abar = 0, B = b, C = c: G = c*b at every causal pair
        let ts = integers(-4, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::zeros(1, 1);
        let b = DMatrix::from_element(1, 1, 3.0);
        let c = DMatrix::from_element(1, 1, -2.0);
        let sys = backward_const(ts, &a, &b, &c, 0, -4);
        for (s, z) in [(-4, -2), (-3, -1), (-4, 0)] {
            let g = weighting_pattern(&sys, &grid, &from_int(s), &from_int(z)).unwrap();
            assert_eq!(g[(0, 0)], -6.0);
        }
    }

    #[test]
    fn zero_input_kernel_is_zero() {
        let ts = integers(-4, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::from_element(1, 1, 0.5);
        let b = DMatrix::zeros(1, 1);
        let c = DMatrix::identity(1, 1);
        let sys = backward_const(ts, &a, &b, &c, 0, -4);
        let g = weighting_pattern(&sys, &grid, &from_int(-3), &from_int(-1)).unwrap();
        assert_eq!(g[(0, 0)], 0.0);
    }

    #[test]
    fn scalar_kernel_stepping_value() {
        // Abar = -1 on integers, B = C = 1, s0 = 0:
        // G(-2, -1) = Psi(-2, rho(-1)) = Psi(-2, -2) = 1
        let ts = integers(-4, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::from_element(1, 1, -1.0);
        let b = DMatrix::identity(1, 1);
        let c = DMatrix::identity(1, 1);
        let sys = backward_const(ts, &a, &b, &c, 0, -4);
        let g = weighting_pattern(&sys, &grid, &from_int(-2), &from_int(-1)).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        // one gap below: G(-3, -1) = Psi(-3, -2) = (1 - (-1)) = 2
        let g2 = weighting_pattern(&sys, &grid, &from_int(-3), &from_int(-1)).unwrap();
        assert_eq!(g2[(0, 0)], 2.0);
    }

    #[test]
    fn non_causal_pair_errors() {
        let ts = integers(-4, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::zeros(1, 1);
        let b = DMatrix::identity(1, 1);
        let sys = backward_const(ts, &a, &b, &DMatrix::identity(1, 1), 0, -4);
        assert!(weighting_pattern(&sys, &grid, &from_int(-1), &from_int(-3)).is_err());
        // z = s on a discrete scale: rho(z) < s, non-causal
        assert!(weighting_pattern(&sys, &grid, &from_int(-2), &from_int(-2)).is_err());
    }

    #[test]
    fn single_pair_sample_matches_weighting_pattern() {
        let ts = integers(-4, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::from_element(1, 1, 0.25);
        let b = DMatrix::from_element(1, 1, 2.0);
        let sys = backward_const(ts, &a, &b, &DMatrix::identity(1, 1), 0, -4);
        let ks = sample_kernel(&sys, &grid, &[from_int(-3)], &[from_int(-1)]).unwrap();
        let direct = weighting_pattern(&sys, &grid, &from_int(-3), &from_int(-1)).unwrap();
        assert_eq!(ks.block(0, 0).unwrap(), &direct);
        assert_eq!(ks.causal_pairs(), 1);
    }

    #[test]
    fn constant_scalar_kernel_rank_one() {
        let ts = integers(-8, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::zeros(1, 1);
        let b = DMatrix::from_element(1, 1, 1.5);
        let c = DMatrix::from_element(1, 1, 2.0);
        let sys = backward_const(ts, &a, &b, &c, 0, -8);
        let pts: Vec<TimePoint> = (-8..=0).map(from_int).collect();
        let ks = sample_kernel(&sys, &grid, &pts, &pts).unwrap();
        let (rank, f) = separable_rank(&ks, SEPARABLE_REL_TOL).unwrap();
        assert_eq!(rank, 1);
        assert!(f.residual <= SEPARABLE_REL_TOL);
        // all causal blocks equal
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if let Some(bij) = ks.block(i, j) {
                    assert_eq!(bij[(0, 0)], 3.0);
                }
            }
        }
    }

    #[test]
    fn kernel_rank_bounded_by_state_dimension() {
        let ts = integers(-10, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::from_row_slice(2, 2, &[0.3, 1.0, -0.4, 0.1]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let sys = backward_const(ts, &a, &b, &c, 0, -10);
        let pts: Vec<TimePoint> = (-10..=0).map(from_int).collect();
        let ks = sample_kernel(&sys, &grid, &pts, &pts).unwrap();
        let (rank, _) = separable_rank(&ks, SEPARABLE_REL_TOL).unwrap();
        assert!(rank <= 2);
    }

    #[test]
    fn redundant_state_gives_deficient_rank() {
        // Abar = diag(1,1), B = [[1],[0]], C = [1, 0]: rank 1 < n = 2
        let ts = integers(-10, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sys = backward_const(ts, &a, &b, &c, 0, -10);
        let pts: Vec<TimePoint> = (-10..=0).map(from_int).collect();
        let ks = sample_kernel(&sys, &grid, &pts, &pts).unwrap();
        let (rank, _) = separable_rank(&ks, SEPARABLE_REL_TOL).unwrap();
        assert_eq!(rank, 1);
    }

    #[test]
    fn factorization_reconstructs_blocks() {
        let ts = integers(-8, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::from_row_slice(2, 2, &[0.2, 0.5, -0.3, 0.4]);
        let b = DMatrix::identity(2, 2);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let sys = backward_const(ts, &a, &b, &c, 0, -8);
        let pts: Vec<TimePoint> = (-8..=0).map(from_int).collect();
        let ks = sample_kernel(&sys, &grid, &pts, &pts).unwrap();
        let (_, f) = separable_rank(&ks, SEPARABLE_REL_TOL).unwrap();
        // reconstruct every factored pair and compare against the sample
        let mut worst: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for (ri, s) in f.s_points.iter().enumerate() {
            for (cj, z) in f.z_points.iter().enumerate() {
                let i = ks.s_points.iter().position(|x| x == s).unwrap();
                let j = ks.z_points.iter().position(|x| x == z).unwrap();
                let sample = ks.block(i, j).unwrap();
                let rebuilt = &f.h_factors[ri] * &f.f_factors[cj];
                worst = worst.max((sample - rebuilt).norm());
                norm = norm.max(sample.norm());
            }
        }
        assert!(
            worst <= SEPARABLE_REL_TOL * (1.0 + norm),
            "residual {worst}"
        );
    }

    #[test]
    fn minimal_two_output_example() {
        // Abar = [[1,-1],[0,2]], B = I, C = diag(1,-1) on the interval-union
        // scale: controllable and observable, so minimal; kernel rank 2
        let ts = interval_union_scale();
        let grid = Arc::new(ts.build_grid(0.05).unwrap());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 2.0]);
        let b = DMatrix::identity(2, 2);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let sys = backward_const(ts, &a, &b, &c, 0, -5);
        let rep = is_minimal(&sys, &grid, &from_int(-5), &from_int(0)).unwrap();
        assert_eq!(rep.verdict, MinimalityVerdict::Minimal);
        assert_eq!(rep.separable_rank, 2);
        assert!(rep.kernel_residual <= SEPARABLE_REL_TOL);
        assert!(rep.progressivity.is_none());
    }

    #[test]
    fn uncontrollable_system_is_not_minimal() {
        let ts = integers(-6, 0);
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let c = DMatrix::identity(2, 2);
        let sys = backward_const(ts, &a, &b, &c, 0, -6);
        let rep = is_minimal(&sys, &grid, &from_int(-6), &from_int(0)).unwrap();
        assert_eq!(rep.verdict, MinimalityVerdict::NotMinimal);
        assert!(rep.separable_rank < 2);
    }

    #[test]
    fn time_varying_needs_progressivity() {
        // Abar = [1 + 0*s] written with a time-varying entry so the constant
        // path is not taken; gaps of width 1 make I - nu*Abar singular
        let ts = interval_union_scale();
        let grid = Arc::new(ts.build_grid(0.1).unwrap());
        let a = crate::expr::MatrixExpr::parse(&[vec!["1 + 0*s".into()]]).unwrap();
        let sys = LinearSystem::new(
            Direction::Backward,
            ts,
            a,
            crate::expr::MatrixExpr::parse(&[vec!["1".into()]]).unwrap(),
            crate::expr::MatrixExpr::identity(1),
            crate::expr::MatrixExpr::zeros(1, 1),
            from_int(0),
            from_int(-5),
        )
        .unwrap();
        assert!(matches!(
            is_minimal(&sys, &grid, &from_int(-5), &from_int(0)),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn time_varying_progressive_minimal() {
        let ts = interval_union_scale();
        let grid = Arc::new(ts.build_grid(0.05).unwrap());
        let a = crate::expr::MatrixExpr::parse(&[
            vec!["0.1*s".into(), "1".into()],
            vec!["0".into(), "-0.2".into()],
        ])
        .unwrap();
        let b = crate::expr::MatrixExpr::parse(&[vec!["1".into()], vec!["1".into()]]).unwrap();
        let sys = LinearSystem::new(
            Direction::Backward,
            ts,
            a,
            b,
            crate::expr::MatrixExpr::identity(2),
            crate::expr::MatrixExpr::zeros(2, 1),
            from_int(0),
            from_int(-5),
        )
        .unwrap();
        let rep = is_minimal(&sys, &grid, &from_int(-5), &from_int(0)).unwrap();
        assert!(rep.progressivity.is_some());
        assert_eq!(rep.verdict, MinimalityVerdict::Minimal);
        assert_eq!(rep.separable_rank, 2);
    }

    #[test]
    fn default_points_cover_scattered_nodes() {
        let ts = interval_union_scale();
        let grid = Arc::new(ts.build_grid(0.05).unwrap());
        let (s_pts, z_pts) = default_sample_points(&grid, &from_int(-5), &from_int(0)).unwrap();
        assert_eq!(s_pts, z_pts);
        assert!(s_pts.len() <= 8);
        assert!(s_pts.contains(&from_int(-5)));
        assert!(s_pts.contains(&from_int(0)));
        // at least one interior point of the top component survives thinning
        assert!(s_pts.iter().any(|t| *t > from_int(-1) && *t < from_int(0)));
    }
}
