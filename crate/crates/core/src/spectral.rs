//! Differentiation on periodic grids: FFT-based spectral operators and
//! fourth-order central finite differences.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::{Grid, MAX_DIM};

/// Rows handed to one rayon task when transforming 2D arrays.
const ROWS_PER_TASK: usize = 16;

/// FFT plans and wavenumbers for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

/// Angular wavenumbers in FFT order for `n` points over a box of length `len`.
pub fn fft_wavenumbers(n: usize, len: f64) -> Vec<f64> {
    let dk = 2.0 * PI / len;
    (0..n)
        .map(|i| {
            let signed = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
            signed as f64 * dk
        })
        .collect()
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        let mut wavenumbers = Vec::new();
        for axis in 0..grid.dim() {
            let n = grid.npoints(axis);
            forward.push(planner.plan_fft_forward(n));
            inverse.push(planner.plan_fft_inverse(n));
            wavenumbers.push(fft_wavenumbers(n, grid.length(axis)));
        }
        Spectral { grid: grid.clone(), forward, inverse, wavenumbers }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Wavenumber vector of the flat spectral index `idx`.
    pub fn k_vector(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.grid.multi_index(idx);
        let mut k = [0.0; MAX_DIM];
        for (a, slot) in k.iter_mut().enumerate().take(self.grid.dim()) {
            *slot = self.wavenumbers[a][m[a]];
        }
        k
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>) {
        let [n0, n1] = self.grid.shape();
        if self.grid.dim() == 1 {
            plan.process(data);
            return;
        }
        if axis == 1 {
            data.par_chunks_mut(n1 * ROWS_PER_TASK.min(n0)).for_each(|rows| plan.process(rows));
        } else {
            let mut t = transpose(data, n0, n1);
            t.par_chunks_mut(n0 * ROWS_PER_TASK.min(n1)).for_each(|rows| plan.process(rows));
            let back = transpose(&t, n1, n0);
            data.copy_from_slice(&back);
        }
    }

    /// Transform along a single axis only (unnormalized forward).
    pub fn forward_axis(&self, data: &mut [Complex64], axis: usize) {
        self.transform_axis(data, axis, &self.forward[axis]);
    }

    /// Inverse transform along a single axis, normalized by that axis length.
    pub fn inverse_axis(&self, data: &mut [Complex64], axis: usize) {
        self.transform_axis(data, axis, &self.inverse[axis]);
        let scale = 1.0 / self.grid.npoints(axis) as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    /// Unnormalized forward transform over all axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in 0..self.grid.dim() {
            self.transform_axis(data, axis, &self.forward[axis]);
        }
    }

    /// Inverse transform over all axes including the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..self.grid.dim() {
            self.transform_axis(data, axis, &self.inverse[axis]);
        }
        let scale = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    /// Spectral first derivative along `axis`. The Nyquist mode is dropped so
    /// that derivatives of real fields stay real.
    pub fn derivative(&self, field: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut hat = field.to_vec();
        self.forward(&mut hat);
        let n = self.grid.npoints(axis);
        let k = &self.wavenumbers[axis];
        let grid = &self.grid;
        hat.par_iter_mut().enumerate().for_each(|(idx, c)| {
            let i = grid.multi_index(idx)[axis];
            *c *= if 2 * i == n { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, k[i]) };
        });
        self.inverse(&mut hat);
        hat
    }

    /// Spectral Laplacian summed over axes, each axis weighted by `weights[a]`.
    pub fn weighted_laplacian(&self, field: &[Complex64], weights: &[f64]) -> Vec<Complex64> {
        let mut hat = field.to_vec();
        self.forward(&mut hat);
        hat.par_iter_mut().enumerate().for_each(|(idx, c)| {
            let k = self.k_vector(idx);
            let k2: f64 = (0..self.grid.dim()).map(|a| weights[a] * k[a] * k[a]).sum();
            *c *= -k2;
        });
        self.inverse(&mut hat);
        hat
    }

    pub fn derivative_real(&self, field: &[f64], axis: usize) -> Vec<f64> {
        let c: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.derivative(&c, axis).into_iter().map(|v| v.re).collect()
    }

    pub fn second_derivative_real(&self, field: &[f64], axis: usize) -> Vec<f64> {
        let mut w = [0.0; MAX_DIM];
        w[axis] = 1.0;
        let c: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.weighted_laplacian(&c, &w).into_iter().map(|v| v.re).collect()
    }

    /// Trigonometric interpolation onto a grid refined by `factor` (a power
    /// of two) along every axis. Returns the refined grid and samples.
    pub fn refine(&self, field: &[Complex64], factor: usize) -> (Grid, Vec<Complex64>) {
        assert!(factor.is_power_of_two(), "refinement factor must be a power of two");
        let dim = self.grid.dim();
        let extents: Vec<(f64, f64)> = (0..dim).map(|a| (self.grid.min(a), self.grid.max(a))).collect();
        let counts: Vec<usize> = (0..dim).map(|a| self.grid.npoints(a) * factor).collect();
        let fine = Grid::new(&extents, &counts).expect("refined grid is valid");
        if factor == 1 {
            return (fine, field.to_vec());
        }
        let mut hat = field.to_vec();
        self.forward(&mut hat);
        let mut padded = vec![Complex64::new(0.0, 0.0); fine.len()];
        let scale = (fine.len() / self.grid.len()) as f64;
        for (idx, &c) in hat.iter().enumerate() {
            let m = self.grid.multi_index(idx);
            // each axis contributes one or two (split Nyquist) target slots
            let mut targets: Vec<([usize; MAX_DIM], f64)> = vec![([0, 0], scale)];
            for a in 0..dim {
                let n = self.grid.npoints(a);
                let nf = fine.npoints(a);
                let i = m[a];
                let mut next = Vec::with_capacity(targets.len() * 2);
                for (t, w) in targets {
                    if 2 * i == n {
                        let mut lo = t;
                        lo[a] = i;
                        let mut hi = t;
                        hi[a] = nf - i;
                        next.push((lo, w * 0.5));
                        next.push((hi, w * 0.5));
                    } else {
                        let mut tt = t;
                        tt[a] = if 2 * i < n { i } else { nf - (n - i) };
                        next.push((tt, w));
                    }
                }
                targets = next;
            }
            for (t, w) in targets {
                padded[fine.index(t)] += c * w;
            }
        }
        let fine_spec = Spectral::new(&fine);
        fine_spec.inverse(&mut padded);
        (fine, padded)
    }
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(c, col)| {
        for (r, v) in col.iter_mut().enumerate() {
            *v = data[r * cols + c];
        }
    });
    out
}

/// Fourth-order central first derivative along `axis` with periodic wrap.
pub fn fd4_derivative(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let n = grid.npoints(axis) as i64;
    let h = grid.spacing(axis);
    (0..values.len())
        .into_par_iter()
        .map(|idx| {
            let m = grid.multi_index(idx);
            let at = |off: i64| {
                let mut mm = m;
                mm[axis] = (m[axis] as i64 + off).rem_euclid(n) as usize;
                values[grid.index(mm)]
            };
            (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h)
        })
        .collect()
}

/// Fourth-order central second derivative along `axis` with periodic wrap.
pub fn fd4_second_derivative(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let n = grid.npoints(axis) as i64;
    let h = grid.spacing(axis);
    (0..values.len())
        .into_par_iter()
        .map(|idx| {
            let m = grid.multi_index(idx);
            let at = |off: i64| {
                let mut mm = m;
                mm[axis] = (m[axis] as i64 + off).rem_euclid(n) as usize;
                values[grid.index(mm)]
            };
            (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &Grid) -> Vec<Complex64> {
        (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                let r2: f64 = (0..grid.dim()).map(|a| p[a] * p[a]).sum();
                Complex64::new((-r2 / 2.0).exp(), 0.0)
            })
            .collect()
    }

    #[test]
    fn round_trip_is_identity() {
        let g = Grid::new(&[(-5.0, 5.0), (-4.0, 4.0)], &[32, 16]).unwrap();
        let s = Spectral::new(&g);
        let f = gaussian(&g);
        let mut work = f.clone();
        s.forward(&mut work);
        s.inverse(&mut work);
        for (a, b) in f.iter().zip(&work) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_gaussian() {
        let g = Grid::new(&[(-10.0, 10.0)], &[128]).unwrap();
        let s = Spectral::new(&g);
        let d = s.derivative(&gaussian(&g), 0);
        for i in 0..g.len() {
            let x = g.coord(0, i);
            assert!((d[i].re - (-x * (-x * x / 2.0).exp())).abs() < 1e-12);
        }
        let lap = s.weighted_laplacian(&gaussian(&g), &[1.0]);
        for i in 0..g.len() {
            let x = g.coord(0, i);
            assert!((lap[i].re - (x * x - 1.0) * (-x * x / 2.0).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn derivative_along_second_axis() {
        let g = Grid::new(&[(-8.0, 8.0), (-10.0, 10.0)], &[32, 64]).unwrap();
        let s = Spectral::new(&g);
        let d = s.derivative(&gaussian(&g), 1);
        for i in 0..g.len() {
            let p = g.point(i);
            let expected = -p[1] * (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp();
            assert!((d[i].re - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_interpolates_band_limited_data() {
        let g = Grid::new(&[(-10.0, 10.0), (-10.0, 10.0)], &[64, 64]).unwrap();
        let s = Spectral::new(&g);
        let (fine, values) = s.refine(&gaussian(&g), 4);
        assert_eq!(fine.npoints(0), 256);
        for i in (0..fine.len()).step_by(37) {
            let p = fine.point(i);
            let expected = (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp();
            assert!((values[i].re - expected).abs() < 1e-9, "{} vs {expected}", values[i].re);
        }
    }

    #[test]
    fn fd4_is_exact_for_cubics_away_from_the_seam() {
        let g = Grid::new(&[(-4.0, 4.0)], &[64]).unwrap();
        let v: Vec<f64> = g.axis_coords(0).iter().map(|x| x * x * x - 2.0 * x).collect();
        let d = fd4_derivative(&v, &g, 0);
        let d2 = fd4_second_derivative(&v, &g, 0);
        for i in 2..62 {
            let x = g.coord(0, i);
            assert!((d[i] - (3.0 * x * x - 2.0)).abs() < 1e-10);
            assert!((d2[i] - 6.0 * x).abs() < 1e-9);
        }
    }
}
