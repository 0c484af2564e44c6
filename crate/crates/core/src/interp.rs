//! Bilinear interpolation on periodic grids, and linear-in-time sampling of
//! vector fields stored per frame.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::configspace::{Grid, PhysicsParams, WaveField};
use crate::hydrodynamics::FlowFrame;
use crate::propagator::FrameStore;
use crate::spectral::Spectral;
use crate::{Error, Point, Result};

/// Corner indices and weights of the cell containing a point.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub indices: [usize; 4],
    pub weights: [f64; 4],
    pub len: usize,
}

impl Stencil {
    pub fn new(grid: &Grid, p: &Point) -> Self {
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        let mut frac = [0.0f64; 2];
        for a in 0..grid.dim() {
            let n = grid.npoints(a) as i64;
            let u = (p[a] - grid.min(a)) / grid.spacing(a);
            let f = u.floor();
            frac[a] = u - f;
            lo[a] = (f as i64).rem_euclid(n) as usize;
            hi[a] = (f as i64 + 1).rem_euclid(n) as usize;
        }
        if grid.dim() == 1 {
            Stencil {
                indices: [grid.index([lo[0], 0]), grid.index([hi[0], 0]), 0, 0],
                weights: [1.0 - frac[0], frac[0], 0.0, 0.0],
                len: 2,
            }
        } else {
            let (fx, fy) = (frac[0], frac[1]);
            Stencil {
                indices: [
                    grid.index([lo[0], lo[1]]),
                    grid.index([lo[0], hi[1]]),
                    grid.index([hi[0], lo[1]]),
                    grid.index([hi[0], hi[1]]),
                ],
                weights: [(1.0 - fx) * (1.0 - fy), (1.0 - fx) * fy, fx * (1.0 - fy), fx * fy],
                len: 4,
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices[..self.len].iter().copied().zip(self.weights[..self.len].iter().copied())
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        self.iter().map(|(i, w)| w * values[i]).sum()
    }

    /// True if a corner with nonzero weight is masked.
    pub fn touches(&self, mask: &[bool]) -> bool {
        self.iter().any(|(i, w)| w > 0.0 && mask[i])
    }
}

/// Bilinear interpolation of a complex field.
pub struct ComplexSampler<'a> {
    psi: &'a WaveField,
}

impl<'a> ComplexSampler<'a> {
    pub fn new(psi: &'a WaveField) -> Self {
        ComplexSampler { psi }
    }

    pub fn sample(&self, p: &Point) -> Result<Complex64> {
        if !p[..self.psi.grid.dim()].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite point {p:?}")));
        }
        let s = Stencil::new(&self.psi.grid, p);
        Ok(s.iter().map(|(i, w)| self.psi.amplitudes[i] * w).sum())
    }
}

/// A vector field (one component per axis) with a node mask at each of a
/// sequence of uniformly spaced times.
#[derive(Debug, Clone)]
pub struct FieldSeries {
    pub grid: Grid,
    pub times: Vec<f64>,
    /// `fields[k][axis][point]`
    pub fields: Vec<Vec<Vec<f64>>>,
    pub masks: Vec<Vec<bool>>,
}

impl FieldSeries {
    pub fn new(grid: Grid, times: Vec<f64>, fields: Vec<Vec<Vec<f64>>>, masks: Vec<Vec<bool>>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() || times.len() != masks.len() {
            return Err(Error::InvalidParams("field series needs one field and mask per time".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("field series times must increase".into()));
        }
        Ok(FieldSeries { grid, times, fields, masks })
    }

    /// Velocity `j / rho` of every frame, masked below
    /// `node_fraction * max(rho)`.
    pub fn velocity(store: &FrameStore, node_fraction: f64) -> Self {
        let spectral = Spectral::new(store.grid());
        let frames: Vec<FlowFrame> = store
            .frames
            .par_iter()
            .map(|f| FlowFrame::compute_with(&spectral, f, &store.params, node_fraction, false))
            .collect();
        Self::from_flow(store, frames, |f| f.velocity)
    }

    pub(crate) fn from_flow(
        store: &FrameStore,
        frames: Vec<FlowFrame>,
        pick: impl Fn(FlowFrame) -> Vec<Vec<f64>>,
    ) -> Self {
        let mut fields = Vec::with_capacity(frames.len());
        let mut masks = Vec::with_capacity(frames.len());
        for f in frames {
            masks.push(f.node_mask.clone());
            fields.push(pick(f));
        }
        FieldSeries { grid: store.grid().clone(), times: store.times(), fields, masks }
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Field at one stored frame; `None` if the stencil touches the mask.
    pub fn sample_frame(&self, k: usize, p: &Point) -> Option<Point> {
        let s = Stencil::new(&self.grid, p);
        if s.touches(&self.masks[k]) {
            return None;
        }
        let mut out = [0.0; 2];
        for (a, comp) in self.fields[k].iter().enumerate() {
            out[a] = s.apply(comp);
        }
        Some(out)
    }

    /// Field at time `t`, linear between the bracketing frames. `Ok(None)`
    /// means the point is too close to a node in a frame that contributes.
    pub fn sample(&self, p: &Point, t: f64) -> Result<Option<Point>> {
        let (t0, t1) = (self.start_time(), self.end_time());
        let slack = 1e-9 * (t1 - t0).abs().max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::TimeOutOfRange { time: t, start: t0, end: t1 });
        }
        let m = self.times.len();
        if m == 1 {
            return Ok(self.sample_frame(0, p));
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, m - 1) - 1;
        let span = self.times[k + 1] - self.times[k];
        let w = ((t - self.times[k]) / span).clamp(0.0, 1.0);
        let mut out = [0.0; 2];
        for (frame, weight) in [(k, 1.0 - w), (k + 1, w)] {
            if weight == 0.0 {
                continue;
            }
            match self.sample_frame(frame, p) {
                Some(v) => {
                    for a in 0..self.dim() {
                        out[a] += weight * v[a];
                    }
                }
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }
}

/// Interpolated velocity of a single state, `None` near a node.
pub fn velocity_at(psi: &WaveField, params: &PhysicsParams, node_fraction: f64, p: &Point) -> Option<Point> {
    let f = FlowFrame::compute(psi, params, node_fraction, false);
    let s = Stencil::new(&psi.grid, p);
    if s.touches(&f.node_mask) {
        return None;
    }
    let mut out = [0.0; 2];
    for (a, comp) in f.velocity.iter().enumerate() {
        out[a] = s.apply(comp);
    }
    Some(out)
}
