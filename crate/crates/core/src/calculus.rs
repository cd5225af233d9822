//! Delta and nabla calculus on sampled grid functions.
//!
//! Functions are matrix-valued samples on the canonical grid of a time
//! scale. Derivatives are exact at scattered points (the Hilger difference
//! quotient) and second-order finite differences at dense points; integrals
//! are Cauchy sums over scattered cells plus trapezoidal quadrature over
//! dense cells, accumulated left to right for bitwise determinism.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exact::{self, to_f64, TimePoint};
use crate::expr::MatrixExpr;
use crate::timescale::{CellKind, Grid};

/// A matrix-valued function sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    shape: (usize, usize),
    values: Vec<DMatrix<f64>>,
}

impl GridFunction {
    /// Samples a closure of the (f64) time value.
    pub fn from_fn<F>(grid: Arc<Grid>, rows: usize, cols: usize, f: F) -> Result<GridFunction>
    where
        F: Fn(f64) -> DMatrix<f64>,
    {
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.points_f64() {
            let v = f(t);
            if v.nrows() != rows || v.ncols() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "sample at t = {t} has shape {}x{}, expected {rows}x{cols}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            values.push(v);
        }
        Ok(GridFunction {
            grid,
            shape: (rows, cols),
            values,
        })
    }

    /// Samples a scalar closure as a 1x1 matrix function.
    pub fn from_scalar_fn<F>(grid: Arc<Grid>, f: F) -> GridFunction
    where
        F: Fn(f64) -> f64,
    {
        let values = grid
            .points_f64()
            .iter()
            .map(|&t| DMatrix::from_element(1, 1, f(t)))
            .collect();
        GridFunction {
            grid,
            shape: (1, 1),
            values,
        }
    }

    /// Samples a matrix expression on the grid.
    pub fn from_expr(grid: Arc<Grid>, m: &MatrixExpr) -> Result<GridFunction> {
        let mut values = Vec::with_capacity(grid.len());
        for &t in grid.points_f64() {
            values.push(m.eval(t)?);
        }
        Ok(GridFunction {
            grid,
            shape: (m.rows(), m.cols()),
            values,
        })
    }

    /// Wraps precomputed samples.
    pub fn from_values(grid: Arc<Grid>, values: Vec<DMatrix<f64>>) -> Result<GridFunction> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let shape = (values[0].nrows(), values[0].ncols());
        if values.iter().any(|v| (v.nrows(), v.ncols()) != shape) {
            return Err(Error::ShapeMismatch("non-uniform sample shapes".into()));
        }
        Ok(GridFunction {
            grid,
            shape,
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<Grid> {
        self.grid.clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    /// Sample at node `i`.
    pub fn value(&self, i: usize) -> &DMatrix<f64> {
        &self.values[i]
    }

    /// Sample at an exact grid time.
    pub fn value_at(&self, t: &TimePoint) -> Result<&DMatrix<f64>> {
        Ok(&self.values[self.grid.require_index(t)?])
    }

    /// The dual function `f*(s) = f(-s)` on the dual grid. Sample order is
    /// reversed; an exact involution.
    pub fn dualize(&self) -> GridFunction {
        GridFunction {
            grid: Arc::new(self.grid.dual()),
            shape: self.shape,
            values: self.values.iter().rev().cloned().collect(),
        }
    }

    /// Delta (forward Hilger) derivative on the grid.
    ///
    /// Exact at right-scattered nodes; second-order stencils at dense nodes.
    /// The window maximum is outside the domain when it is left-scattered
    /// (the `T^kappa` restriction); its sample is filled with NaN.
    pub fn delta_derivative(&self) -> Result<GridFunction> {
        let n = self.grid.len();
        if n < 2 {
            return Err(Error::TooFewPoints(
                "delta derivative needs at least two grid nodes".into(),
            ));
        }
        let pts = self.grid.points();
        let cells = self.grid.cells();
        let f = &self.values;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let v = if i + 1 < n && cells[i] == CellKind::Gap {
                // right-scattered: exact difference quotient
                let mu = to_f64(&(pts[i + 1] - pts[i]));
                (&f[i + 1] - &f[i]) / mu
            } else if i + 1 == n {
                if cells[i - 1] == CellKind::Gap {
                    // isolated maximum: outside T^kappa
                    DMatrix::from_element(self.shape.0, self.shape.1, f64::NAN)
                } else {
                    let h = to_f64(&(pts[i] - pts[i - 1]));
                    if i >= 2 && cells[i - 2] == CellKind::Dense {
                        (f[i].scale(3.0) - f[i - 1].scale(4.0) + &f[i - 2]) / (2.0 * h)
                    } else {
                        (&f[i] - &f[i - 1]) / h
                    }
                }
            } else if i == 0 || cells[i - 1] == CellKind::Gap {
                // left end of a dense run: one-sided second-order stencil
                let h = to_f64(&(pts[i + 1] - pts[i]));
                if i + 2 < n && cells[i + 1] == CellKind::Dense {
                    (f[i + 1].scale(4.0) - f[i].scale(3.0) - &f[i + 2]) / (2.0 * h)
                } else {
                    (&f[i + 1] - &f[i]) / h
                }
            } else {
                // dense interior: central difference
                let span = to_f64(&(pts[i + 1] - pts[i - 1]));
                (&f[i + 1] - &f[i - 1]) / span
            };
            out.push(v);
        }
        GridFunction::from_values(self.grid.clone(), out)
    }

    /// Nabla (backward Hilger) derivative on the grid: the mirror of
    /// [`Self::delta_derivative`]. The window minimum is outside the domain
    /// when it is right-scattered (the `T_kappa` restriction) and is filled
    /// with NaN.
    pub fn nabla_derivative(&self) -> Result<GridFunction> {
        let n = self.grid.len();
        if n < 2 {
            return Err(Error::TooFewPoints(
                "nabla derivative needs at least two grid nodes".into(),
            ));
        }
        let pts = self.grid.points();
        let cells = self.grid.cells();
        let f = &self.values;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let v = if i > 0 && cells[i - 1] == CellKind::Gap {
                // left-scattered: exact difference quotient
                let nu = to_f64(&(pts[i] - pts[i - 1]));
                (&f[i] - &f[i - 1]) / nu
            } else if i == 0 {
                if cells[0] == CellKind::Gap {
                    // isolated minimum: outside T_kappa
                    DMatrix::from_element(self.shape.0, self.shape.1, f64::NAN)
                } else {
                    let h = to_f64(&(pts[1] - pts[0]));
                    if n > 2 && cells[1] == CellKind::Dense {
                        (f[1].scale(4.0) - f[0].scale(3.0) - &f[2]) / (2.0 * h)
                    } else {
                        (&f[1] - &f[0]) / h
                    }
                }
            } else if i + 1 == n || cells[i] == CellKind::Gap {
                // right end of a dense run: one-sided second-order stencil
                let h = to_f64(&(pts[i] - pts[i - 1]));
                if i >= 2 && cells[i - 2] == CellKind::Dense {
                    (f[i].scale(3.0) - f[i - 1].scale(4.0) + &f[i - 2]) / (2.0 * h)
                } else {
                    (&f[i] - &f[i - 1]) / h
                }
            } else {
                // dense interior: central difference
                let span = to_f64(&(pts[i + 1] - pts[i - 1]));
                (&f[i + 1] - &f[i - 1]) / span
            };
            out.push(v);
        }
        GridFunction::from_values(self.grid.clone(), out)
    }

    fn integral_range(&self, a: &TimePoint, b: &TimePoint) -> Result<(usize, usize)> {
        if a > b {
            return Err(Error::InvalidParameter(format!(
                "integration bounds reversed: {} > {}",
                exact::format_time(a),
                exact::format_time(b)
            )));
        }
        let locate = |t: &TimePoint| -> Result<usize> {
            self.grid.index_of(t).ok_or_else(|| {
                if self.grid.scale().contains(t) {
                    Error::PointNotOnGrid(exact::format_time(t))
                } else {
                    Error::PointNotInScale(exact::format_time(t))
                }
            })
        };
        Ok((locate(a)?, locate(b)?))
    }

    /// Cauchy delta integral over `[a, b]`: scattered cells weighted at the
    /// left node, trapezoids over dense cells.
    pub fn delta_integral(&self, a: &TimePoint, b: &TimePoint) -> Result<DMatrix<f64>> {
        let (ia, ib) = self.integral_range(a, b)?;
        let pts = self.grid.points();
        let mut acc = DMatrix::zeros(self.shape.0, self.shape.1);
        for k in ia..ib {
            let w = to_f64(&(pts[k + 1] - pts[k]));
            match self.grid.cell(k) {
                CellKind::Gap => acc += self.values[k].scale(w),
                CellKind::Dense => acc += (&self.values[k] + &self.values[k + 1]).scale(w * 0.5),
            }
        }
        Ok(acc)
    }

    /// Cauchy nabla integral over `[a, b]`: scattered cells weighted at the
    /// right node, trapezoids over dense cells.
    pub fn nabla_integral(&self, a: &TimePoint, b: &TimePoint) -> Result<DMatrix<f64>> {
        let (ia, ib) = self.integral_range(a, b)?;
        let pts = self.grid.points();
        let mut acc = DMatrix::zeros(self.shape.0, self.shape.1);
        for k in ia..ib {
            let w = to_f64(&(pts[k + 1] - pts[k]));
            match self.grid.cell(k) {
                CellKind::Gap => acc += self.values[k + 1].scale(w),
                CellKind::Dense => acc += (&self.values[k] + &self.values[k + 1]).scale(w * 0.5),
            }
        }
        Ok(acc)
    }
}
