//! Partial Fourier transform in the first coordinate of a two-variable
//! function, sampled on a uniform `(beta, a)` grid.
//!
//! `F(beta, a) = ∫ db exp(-2πi beta b) f(b, a)`. The forward transform uses
//! Gauss–Legendre panels no wider than `1/(4 beta_max)`; the inverse and the
//! Parseval sums use the trapezoid rule on the uniform beta grid, which is
//! exact up to window truncation when `1/step` exceeds the b-support width.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quad::{composite_nodes, integrate_intervals, QuadratureSpec};
use super::smooth::Chart;
use super::Field;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformAxis {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformAxis {
    pub fn new(start: f64, step: f64, len: usize) -> Self {
        UniformAxis { start, step, len }
    }

    /// `len` points from `lo` to `hi` inclusive.
    pub fn spanning(lo: f64, hi: f64, len: usize) -> Self {
        let step = if len > 1 { (hi - lo) / (len - 1) as f64 } else { 0.0 };
        UniformAxis { start: lo, step, len }
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn end(&self) -> f64 {
        self.at(self.len.saturating_sub(1))
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.at(i)).collect()
    }

    /// Drop `k` points at each end.
    pub fn shrink(&self, k: usize) -> Self {
        UniformAxis { start: self.at(k), step: self.step, len: self.len.saturating_sub(2 * k) }
    }

    /// Integer index offset of `other`'s first point inside `self`.
    fn offset_of(&self, other: &UniformAxis) -> Result<usize> {
        let off = (other.start - self.start) / self.step;
        let r = off.round();
        if (self.step - other.step).abs() > 1e-12 * self.step.abs() || (off - r).abs() > 1e-6 || r < 0.0 {
            return Err(Error::InvalidArgument("grid axes are not aligned".into()));
        }
        Ok(r as usize)
    }

    fn intersect(&self, other: &UniformAxis) -> Result<UniformAxis> {
        let (first, second) = if self.start <= other.start { (self, other) } else { (other, self) };
        let off = first.offset_of(second)?;
        let end = first.len.min(off + second.len);
        if end <= off {
            return Err(Error::InvalidArgument("grid axes do not overlap".into()));
        }
        Ok(UniformAxis { start: second.start, step: first.step, len: end - off })
    }
}

/// Complex samples on a `(beta, a)` grid; row-major in `a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFn {
    pub beta: UniformAxis,
    pub a: UniformAxis,
    pub values: Vec<C64>,
}

/// Grid and panel parameters for [`partial_fourier`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierWindow {
    pub beta: UniformAxis,
    pub a: UniformAxis,
    /// Gauss–Legendre order on each oscillatory panel.
    pub panel_order: usize,
}

impl FourierWindow {
    pub fn beta_max(&self) -> f64 {
        self.beta.start.abs().max(self.beta.end().abs())
    }
}

impl GridFn {
    pub fn from_fn<F: Fn(f64, f64) -> C64 + Sync>(beta: UniformAxis, a: UniformAxis, f: F) -> Self {
        let values = (0..a.len)
            .into_par_iter()
            .flat_map_iter(|ia| {
                let av = a.at(ia);
                (0..beta.len).map(move |ib| (ib, av))
            })
            .map(|(ib, av)| f(beta.at(ib), av))
            .collect();
        GridFn { beta, a, values }
    }

    pub fn get(&self, ib: usize, ia: usize) -> C64 {
        self.values[ia * self.beta.len + ib]
    }

    /// Sub-grid on the given axes, which must be aligned with and inside
    /// this grid's axes.
    pub fn restrict(&self, beta: &UniformAxis, a: &UniformAxis) -> Result<GridFn> {
        let ob = self.beta.offset_of(beta)?;
        let oa = self.a.offset_of(a)?;
        if ob + beta.len > self.beta.len || oa + a.len > self.a.len {
            return Err(Error::InvalidArgument("restriction outside the grid".into()));
        }
        let mut values = Vec::with_capacity(beta.len * a.len);
        for ia in 0..a.len {
            for ib in 0..beta.len {
                values.push(self.get(ob + ib, oa + ia));
            }
        }
        Ok(GridFn { beta: *beta, a: *a, values })
    }

    /// Combine two grids pointwise on their common aligned sub-grid.
    pub fn zip_with<F: Fn(C64, C64) -> C64>(&self, other: &GridFn, f: F) -> Result<GridFn> {
        let beta = self.beta.intersect(&other.beta)?;
        let a = self.a.intersect(&other.a)?;
        let x = self.restrict(&beta, &a)?;
        let y = other.restrict(&beta, &a)?;
        let values = x.values.iter().zip(&y.values).map(|(&p, &q)| f(p, q)).collect();
        Ok(GridFn { beta, a, values })
    }

    pub fn map<F: Fn(f64, f64, C64) -> C64>(&self, f: F) -> GridFn {
        let mut values = Vec::with_capacity(self.values.len());
        for ia in 0..self.a.len {
            for ib in 0..self.beta.len {
                values.push(f(self.beta.at(ib), self.a.at(ia), self.get(ib, ia)));
            }
        }
        GridFn { beta: self.beta, a: self.a, values }
    }

    /// Fourth-order central difference in beta on the interior grid.
    pub fn d_beta(&self) -> GridFn {
        let beta = self.beta.shrink(2);
        let h = self.beta.step;
        let mut values = Vec::with_capacity(beta.len * self.a.len);
        for ia in 0..self.a.len {
            for ib in 2..self.beta.len - 2 {
                values
                    .push(central4([self.get(ib - 2, ia), self.get(ib - 1, ia), self.get(ib + 1, ia), self.get(ib + 2, ia)], h));
            }
        }
        GridFn { beta, a: self.a, values }
    }

    /// Fourth-order central difference in `a` on the interior grid.
    pub fn d_a(&self) -> GridFn {
        let a = self.a.shrink(2);
        let h = self.a.step;
        let mut values = Vec::with_capacity(self.beta.len * a.len);
        for ia in 2..self.a.len - 2 {
            for ib in 0..self.beta.len {
                values
                    .push(central4([self.get(ib, ia - 2), self.get(ib, ia - 1), self.get(ib, ia + 1), self.get(ib, ia + 2)], h));
            }
        }
        GridFn { beta: self.beta, a, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &GridFn) -> Result<f64> {
        Ok(self.zip_with(other, |p, q| p - q)?.max_abs())
    }

    /// Bicubic Lagrange interpolation at an off-grid point.
    pub fn interpolate(&self, beta: f64, a: f64) -> Result<C64> {
        let (ib, tb) = stencil_index(&self.beta, beta)?;
        let (ia, ta) = stencil_index(&self.a, a)?;
        let wb = lagrange4(tb);
        let wa = lagrange4(ta);
        let mut acc = C64::new(0.0, 0.0);
        for (j, wj) in wa.iter().enumerate() {
            for (i, wi) in wb.iter().enumerate() {
                acc += self.get(ib + i, ia + j) * (wi * wj);
            }
        }
        Ok(acc)
    }

    /// Trapezoid inverse transform of row `ia` at `b`.
    pub fn inverse_row(&self, ia: usize, b: f64) -> C64 {
        let n = self.beta.len;
        let mut acc = C64::new(0.0, 0.0);
        for ib in 0..n {
            let w = if ib == 0 || ib + 1 == n { 0.5 } else { 1.0 };
            let phase = 2.0 * PI * self.beta.at(ib) * b;
            acc += self.get(ib, ia) * C64::new(phase.cos(), phase.sin()) * w;
        }
        acc * self.beta.step
    }

    /// Inverse transform at `(b, a)`, cubic in `a` between rows.
    pub fn inverse_at(&self, b: f64, a: f64) -> Result<C64> {
        let (ia, ta) = stencil_index(&self.a, a)?;
        let w = lagrange4(ta);
        Ok((0..4).map(|j| self.inverse_row(ia + j, b) * w[j]).sum())
    }

    /// Trapezoid approximation of `∫ |F(beta, a_row)|^2 dbeta`.
    pub fn row_energy(&self, ia: usize) -> f64 {
        let n = self.beta.len;
        (0..n)
            .map(|ib| {
                let w = if ib == 0 || ib + 1 == n { 0.5 } else { 1.0 };
                w * self.get(ib, ia).norm_sqr()
            })
            .sum::<f64>()
            * self.beta.step
    }
}

fn central4(v: [C64; 4], h: f64) -> C64 {
    (v[0] - v[1] * 8.0 + v[2] * 8.0 - v[3]) / (12.0 * h)
}

/// First index of a 4-point stencil around `x` and the local coordinate
/// measured from the second stencil point in units of the step.
fn stencil_index(axis: &UniformAxis, x: f64) -> Result<(usize, f64)> {
    if axis.len < 4 {
        return Err(Error::InvalidArgument("interpolation needs at least 4 grid points".into()));
    }
    let u = (x - axis.start) / axis.step;
    if u < -1e-9 || u > (axis.len - 1) as f64 + 1e-9 {
        return Err(Error::OutsideDomain(format!("{x} outside grid [{}, {}]", axis.start, axis.end())));
    }
    let k = (u.floor() as isize - 1).clamp(0, axis.len as isize - 4) as usize;
    Ok((k, u - (k + 1) as f64))
}

/// Lagrange weights for nodes at -1, 0, 1, 2.
fn lagrange4(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Composite nodes over the b-support with panels no wider than `max_width`.
fn oscillatory_nodes(intervals: &[(f64, f64)], max_width: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for &(lo, hi) in intervals {
        let panels = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let (x, w) = composite_nodes(lo, hi, panels, order);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

/// Sample `F(beta, a)` of a two-variable function on the window grid.
pub fn partial_fourier(f: &dyn Field, window: &FourierWindow) -> Result<GridFn> {
    if f.arity() != 2 {
        return Err(Error::InvalidArgument("partial Fourier transform needs a two-variable function".into()));
    }
    if f.chart() == Chart::BetaA {
        return Err(Error::ChartMismatch { expected: "ba".into(), found: f.chart().to_string() });
    }
    let support = f.support();
    let intervals = support.coordinate_intervals(0)?;
    let max_width = 0.25 / window.beta_max().max(1e-12);
    let (xs, ws) = oscillatory_nodes(&intervals, max_width, window.panel_order);
    let beta = window.beta;
    let rows: Vec<Vec<C64>> = (0..window.a.len)
        .into_par_iter()
        .map(|ia| {
            let a = window.a.at(ia);
            let samples: Vec<C64> = xs.iter().zip(&ws).map(|(&b, &w)| f.eval(&[b, a]) * w).collect();
            (0..beta.len)
                .map(|ib| {
                    let k = -2.0 * PI * beta.at(ib);
                    xs.iter().zip(&samples).map(|(&b, &s)| s * C64::new((k * b).cos(), (k * b).sin())).sum()
                })
                .collect()
        })
        .collect();
    Ok(GridFn { beta, a: window.a, values: rows.into_iter().flatten().collect() })
}

/// `F(beta, a)` at a single point by oscillation-aware adaptive quadrature.
pub fn fourier_point(f: &dyn Field, beta: f64, a: f64, spec: &QuadratureSpec) -> Result<C64> {
    let intervals = f.support().coordinate_intervals(0)?;
    let max_width = 0.25 / beta.abs().max(1e-12);
    let mut pieces = Vec::new();
    for (lo, hi) in intervals {
        let n = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        pieces.extend((0..n).map(|i| (lo + h * i as f64, lo + h * (i + 1) as f64)));
    }
    let k = -2.0 * PI * beta;
    let r = integrate_intervals(|b| f.eval(&[b, a]) * C64::new((k * b).cos(), (k * b).sin()), &pieces, spec);
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_reproduces_cubics() {
        let ax = UniformAxis::new(0.0, 0.5, 9);
        let g = GridFn::from_fn(ax, ax, |x, y| C64::new(x * x * x - 2.0 * y * y + x * y, 0.0));
        let v = g.interpolate(1.3, 2.7).unwrap();
        let exact = 1.3f64.powi(3) - 2.0 * 2.7 * 2.7 + 1.3 * 2.7;
        assert!((v.re - exact).abs() < 1e-12);
    }

    #[test]
    fn central_differences_are_fourth_order() {
        let err = |h: f64| {
            let ax = UniformAxis::new(-1.0, h, (2.0 / h).round() as usize + 1);
            let g = GridFn::from_fn(ax, ax, |x, y| C64::new((2.0 * x).sin() * y.cos(), 0.0));
            let db = g.d_beta();
            let da = g.d_a();
            let eb = GridFn::from_fn(db.beta, db.a, |x, y| C64::new(2.0 * (2.0 * x).cos() * y.cos(), 0.0));
            let ea = GridFn::from_fn(da.beta, da.a, |x, y| C64::new(-(2.0 * x).sin() * y.sin(), 0.0));
            (db.max_abs_diff(&eb).unwrap(), da.max_abs_diff(&ea).unwrap())
        };
        let (b1, a1) = err(0.02);
        let (b2, a2) = err(0.01);
        assert!(b2 < 2e-8 && a2 < 2e-9, "{b2} {a2}");
        assert!((b1 / b2).log2() > 3.8 && (a1 / a2).log2() > 3.8);
    }
}
