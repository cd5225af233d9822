//! Shared generators for the acceptance suite: seeded random time scales
//! and systems with exact rational endpoints.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chronoctl_core::exact::TimePoint;
use chronoctl_core::expr::MatrixExpr;
use chronoctl_core::linsys::{Direction, LinearSystem};
use chronoctl_core::timescale::TimeScale;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random rational in `[lo, hi]` with a small denominator.
pub fn rational_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> TimePoint {
    let den: i64 = [1, 2, 4, 5, 8][rng.random_range(0..5)];
    let lo_n = (lo * den as f64).ceil() as i64;
    let hi_n = (hi * den as f64).floor() as i64;
    TimePoint::new(rng.random_range(lo_n..=hi_n), den)
}

/// Random bounded scale: 1 to 4 components, each an isolated point or an
/// interval of length up to 3/2, with positive gaps.
pub fn random_scale(rng: &mut ChaCha8Rng) -> Arc<TimeScale> {
    let k = rng.random_range(1..=4usize);
    let mut comps = Vec::with_capacity(k);
    let mut cursor = rational_in(rng, -8.0, -4.0);
    for _ in 0..k {
        let degenerate = rng.random_bool(0.4);
        let len = if degenerate {
            TimePoint::new(0, 1)
        } else {
            rational_in(rng, 0.25, 1.5)
        };
        let end = cursor + len;
        comps.push((cursor, end));
        let gap = rational_in(rng, 0.25, 1.5);
        cursor = end + gap;
    }
    Arc::new(TimeScale::from_components(comps).unwrap())
}

/// Random scale guaranteed to contain at least one dense component.
pub fn random_mixed_scale(rng: &mut ChaCha8Rng) -> Arc<TimeScale> {
    loop {
        let ts = random_scale(rng);
        if ts.components().iter().any(|(a, b)| a < b) {
            return ts;
        }
    }
}

/// Random purely discrete scale: 4 to 8 isolated points.
pub fn random_discrete_scale(rng: &mut ChaCha8Rng) -> Arc<TimeScale> {
    let k = rng.random_range(4..=8usize);
    let mut comps = Vec::with_capacity(k);
    let mut cursor = rational_in(rng, -9.0, -5.0);
    for _ in 0..k {
        comps.push((cursor, cursor));
        cursor += rational_in(rng, 0.25, 1.5);
    }
    Arc::new(TimeScale::from_components(comps).unwrap())
}

/// Random matrix with half-integer entries in [-2, 2].
pub fn random_half_integer_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-4..=4i64) as f64 / 2.0)
}

/// Constant backward system on a scale, anchored at its maximum with the
/// horizon at its minimum.
pub fn constant_backward(
    ts: Arc<TimeScale>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> LinearSystem {
    let anchor = ts.max();
    let horizon = ts.min();
    let d = DMatrix::zeros(c.nrows(), b.ncols());
    LinearSystem::from_constants(Direction::Backward, ts, a, b, c, &d, anchor, horizon).unwrap()
}

/// Random time-varying 2x2 backward system with mild entries.
pub fn random_tv_backward(rng: &mut ChaCha8Rng, ts: Arc<TimeScale>) -> LinearSystem {
    let coeff = |rng: &mut ChaCha8Rng| format!("{:.3}", rng.random_range(-40..=40) as f64 / 100.0);
    let entry = |rng: &mut ChaCha8Rng| -> String {
        match rng.random_range(0..4) {
            0 => coeff(rng),
            1 => format!("{} + {}*s", coeff(rng), coeff(rng)),
            2 => format!("{}*sin(s)", coeff(rng)),
            _ => format!("{}*s", coeff(rng)),
        }
    };
    let a =
        MatrixExpr::parse(&[vec![entry(rng), entry(rng)], vec![entry(rng), entry(rng)]]).unwrap();
    let b = MatrixExpr::parse(&[vec![entry(rng)], vec![entry(rng)]]).unwrap();
    let anchor = ts.max();
    let horizon = ts.min();
    LinearSystem::new(
        Direction::Backward,
        ts,
        a,
        b,
        MatrixExpr::identity(2),
        MatrixExpr::zeros(2, 1),
        anchor,
        horizon,
    )
    .unwrap()
}
