//! Density, current and the fields derived from them.
//!
//! `rho = |psi|^2` is the world density, `j = (hbar/m) Im(psi* grad psi)` the
//! world flow, and `v = j / rho` the velocity that moves every world. Points
//! where `rho` falls below `eps_node` are masked rather than regularized.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::configspace::{Grid, PhysicsParams, WaveField};
use crate::propagator::FrameStore;
use crate::spectral::{fd4_second_derivative, Spectral};
use crate::{Error, Point, Result};

/// Default node threshold as a fraction of `max(rho)`.
pub const DEFAULT_NODE_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub time: f64,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField { grid: self.grid.clone(), time: self.time, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// `int |self - other| dq`.
    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum();
        Ok(s * self.grid.cell_volume())
    }
}

/// One component per configuration axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub time: f64,
    pub components: Vec<Vec<f64>>,
}

/// Absolute node threshold `fraction * max(rho)`.
pub fn node_epsilon(rho: &ScalarField, fraction: f64) -> f64 {
    fraction * rho.max()
}

pub fn density(psi: &WaveField) -> ScalarField {
    ScalarField {
        grid: psi.grid.clone(),
        time: psi.time,
        values: psi.amplitudes.par_iter().map(|a| a.norm_sqr()).collect(),
    }
}

/// World flow `j_a = (hbar / m_a) Im(psi* d_a psi)` with spectral derivatives.
pub fn current(psi: &WaveField, params: &PhysicsParams) -> VectorField {
    let spectral = Spectral::new(&psi.grid);
    current_with(&spectral, psi, params)
}

fn current_with(spectral: &Spectral, psi: &WaveField, params: &PhysicsParams) -> VectorField {
    let components = (0..psi.grid.dim())
        .map(|axis| {
            let d = spectral.derivative(&psi.amplitudes, axis);
            let scale = params.hbar / params.mass(axis);
            psi.amplitudes.iter().zip(&d).map(|(a, da)| scale * (a.conj() * da).im).collect()
        })
        .collect();
    VectorField { grid: psi.grid.clone(), time: psi.time, components }
}

/// `v = j / rho` where `rho >= eps_node`; masked points get zero velocity and
/// `true` in the returned mask.
pub fn velocity(rho: &ScalarField, current: &VectorField, eps_node: f64) -> Result<(VectorField, Vec<bool>)> {
    if rho.grid != current.grid {
        return Err(Error::GridMismatch);
    }
    let mask: Vec<bool> = rho.values.iter().map(|&r| r < eps_node || r <= 0.0).collect();
    let components = current
        .components
        .iter()
        .map(|j| j.iter().zip(&rho.values).zip(&mask).map(|((j, r), &m)| if m { 0.0 } else { j / r }).collect())
        .collect();
    Ok((VectorField { grid: rho.grid.clone(), time: rho.time, components }, mask))
}

/// All hydrodynamic fields of one frame.
#[derive(Debug, Clone)]
pub struct FlowFrame {
    pub grid: Grid,
    pub time: f64,
    pub rho: Vec<f64>,
    pub current: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
    pub node_mask: Vec<bool>,
    pub eps_node: f64,
    /// Quantum potential, zero on masked points.
    pub quantum_potential: Option<Vec<f64>>,
}

impl FlowFrame {
    pub fn compute(psi: &WaveField, params: &PhysicsParams, node_fraction: f64, with_quantum_potential: bool) -> Self {
        let spectral = Spectral::new(&psi.grid);
        Self::compute_with(&spectral, psi, params, node_fraction, with_quantum_potential)
    }

    pub(crate) fn compute_with(
        spectral: &Spectral,
        psi: &WaveField,
        params: &PhysicsParams,
        node_fraction: f64,
        with_quantum_potential: bool,
    ) -> Self {
        let rho = density(psi);
        let eps = node_epsilon(&rho, node_fraction);
        let j = current_with(spectral, psi, params);
        let (v, mask) = velocity(&rho, &j, eps).expect("fields share a grid");
        let q = with_quantum_potential.then(|| quantum_potential_with(spectral, &rho, params, eps).values);
        FlowFrame {
            grid: psi.grid.clone(),
            time: psi.time,
            rho: rho.values,
            current: j.components,
            velocity: v.components,
            node_mask: mask,
            eps_node: eps,
            quantum_potential: q,
        }
    }

    /// Plot-ready table: coordinates, rho, current, velocity and quantum
    /// potential. Masked velocity and Q entries are left empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.grid.dim();
        let axes = ["x", "y"];
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = axes[..dim].iter().map(|s| s.to_string()).collect();
        header.push("rho".into());
        header.extend(axes[..dim].iter().map(|a| format!("j_{a}")));
        header.extend(axes[..dim].iter().map(|a| format!("v_{a}")));
        header.push("q".into());
        w.write_record(&header)?;
        for i in 0..self.grid.len() {
            let p = self.grid.point(i);
            let masked = self.node_mask[i];
            let mut row: Vec<String> = p[..dim].iter().map(|c| c.to_string()).collect();
            row.push(self.rho[i].to_string());
            row.extend(self.current.iter().map(|j| j[i].to_string()));
            row.extend(self.velocity.iter().map(|v| if masked { String::new() } else { v[i].to_string() }));
            row.push(match (&self.quantum_potential, masked) {
                (Some(q), false) => q[i].to_string(),
                _ => String::new(),
            });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Amplitude and unwrapped phase, `psi = R exp(i S)`.
#[derive(Debug, Clone)]
pub struct PolarFields {
    pub grid: Grid,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
    /// Points where the phase is undefined (node) and unwrapping restarted.
    pub masked: Vec<bool>,
}

fn wrap(d: f64) -> f64 {
    let w = (d + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Polar decomposition with the phase unwrapped cumulatively along axis 0
/// (first column) and then along axis 1 (each row). Around a vortex the
/// result is multi-valued; its winding is reported by [`phase_winding`].
pub fn polar_fields(psi: &WaveField, eps_node: f64) -> PolarFields {
    let grid = psi.grid.clone();
    let amplitude: Vec<f64> = psi.amplitudes.iter().map(|a| a.norm()).collect();
    let masked: Vec<bool> = psi.amplitudes.iter().map(|a| a.norm_sqr() < eps_node || a.norm_sqr() == 0.0).collect();
    let raw: Vec<f64> = psi.amplitudes.iter().map(|a| a.arg()).collect();
    let mut phase = raw.clone();
    let [n0, n1] = grid.shape();
    let unwrap_line = |phase: &mut [f64], idxs: &[usize], start: f64| {
        let mut last = start;
        let mut last_raw = raw[idxs[0]];
        phase[idxs[0]] = start;
        for &i in &idxs[1..] {
            if masked[i] {
                phase[i] = last;
                continue;
            }
            last += wrap(raw[i] - last_raw);
            last_raw = raw[i];
            phase[i] = last;
        }
    };
    let column: Vec<usize> = (0..n0).map(|i| grid.index([i, 0])).collect();
    unwrap_line(&mut phase, &column, raw[column[0]]);
    if grid.dim() == 2 {
        for i in 0..n0 {
            let row: Vec<usize> = (0..n1).map(|j| grid.index([i, j])).collect();
            let start = phase[row[0]];
            unwrap_line(&mut phase, &row, start);
        }
    }
    PolarFields { grid, amplitude, phase, masked }
}

/// `(hbar / m) grad S` by fourth-order differences of the unwrapped phase.
/// Values within two cells of the box edge use the periodic stencil and are
/// only meaningful when `S` itself is periodic.
pub fn phase_velocity(polar: &PolarFields, params: &PhysicsParams) -> VectorField {
    let components = (0..polar.grid.dim())
        .map(|a| {
            crate::spectral::fd4_derivative(&polar.phase, &polar.grid, a)
                .into_iter()
                .map(|g| params.hbar / params.mass(a) * g)
                .collect()
        })
        .collect();
    VectorField { grid: polar.grid.clone(), time: 0.0, components }
}

/// Sum of wrapped phase increments of `psi` along a closed polyline, with
/// the amplitude interpolated bilinearly. Equals `2 pi` times the winding
/// number when the loop is fine enough to resolve the phase.
pub fn phase_winding(psi: &WaveField, path: &[Point]) -> Result<f64> {
    if path.len() < 3 {
        return Err(Error::Precondition("a loop needs at least three points".into()));
    }
    let sampler = crate::interp::ComplexSampler::new(psi);
    let mut total = 0.0;
    let mut prev = sampler.sample(&path[0])?;
    for k in 1..=path.len() {
        let cur = sampler.sample(&path[k % path.len()])?;
        if prev.norm() == 0.0 || cur.norm() == 0.0 {
            return Err(Error::LoopOnNode(path[k % path.len()].to_vec()));
        }
        total += (cur * prev.conj()).arg();
        prev = cur;
    }
    Ok(total)
}

/// Per-point quantum potential values with the node mask used.
#[derive(Debug, Clone)]
pub struct QuantumPotential {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

/// `Q = -sum_a (hbar^2 / 2 m_a) d_a^2 sqrt(rho) / sqrt(rho)` with a spectral
/// Laplacian.
pub fn quantum_potential(rho: &ScalarField, params: &PhysicsParams, eps_node: f64) -> QuantumPotential {
    let spectral = Spectral::new(&rho.grid);
    quantum_potential_with(&spectral, rho, params, eps_node)
}

fn quantum_potential_with(spectral: &Spectral, rho: &ScalarField, params: &PhysicsParams, eps_node: f64) -> QuantumPotential {
    let dim = rho.grid.dim();
    let root: Vec<Complex64> = rho.values.iter().map(|r| Complex64::new(r.max(0.0).sqrt(), 0.0)).collect();
    let weights: Vec<f64> = (0..dim).map(|a| params.hbar * params.hbar / (2.0 * params.mass(a))).collect();
    let lap = spectral.weighted_laplacian(&root, &weights);
    finish_q(rho, &root.iter().map(|c| c.re).collect::<Vec<_>>(), |i| lap[i].re, eps_node)
}

/// Same as [`quantum_potential`] with fourth-order finite differences.
pub fn quantum_potential_fd(rho: &ScalarField, params: &PhysicsParams, eps_node: f64) -> QuantumPotential {
    let grid = &rho.grid;
    let root: Vec<f64> = rho.values.iter().map(|r| r.max(0.0).sqrt()).collect();
    let mut lap = vec![0.0; root.len()];
    for a in 0..grid.dim() {
        let w = params.hbar * params.hbar / (2.0 * params.mass(a));
        for (l, d) in lap.iter_mut().zip(fd4_second_derivative(&root, grid, a)) {
            *l += w * d;
        }
    }
    finish_q(rho, &root, |i| lap[i], eps_node)
}

fn finish_q(rho: &ScalarField, root: &[f64], lap: impl Fn(usize) -> f64, eps_node: f64) -> QuantumPotential {
    let mask: Vec<bool> = rho.values.iter().map(|&r| r < eps_node || r <= 0.0).collect();
    let values = (0..root.len()).map(|i| if mask[i] { 0.0 } else { -lap(i) / root[i] }).collect();
    QuantumPotential { values, mask }
}

/// Centered-difference residual of `d rho/dt + div j = 0` at one frame.
#[derive(Debug, Clone)]
pub struct ContinuityResidual {
    pub time: f64,
    pub field: Vec<f64>,
    pub l2_norm: f64,
}

pub fn continuity_residual(store: &FrameStore, k: usize) -> Result<ContinuityResidual> {
    let m = store.len();
    if m < 3 || k < 1 || k > m - 2 {
        return Err(Error::IndexOutOfRange { index: k, min: 1, max: m.saturating_sub(2) });
    }
    let grid = store.grid();
    let spectral = Spectral::new(grid);
    let before = density(store.frame(k - 1));
    let after = density(store.frame(k + 1));
    let dt = store.frame(k + 1).time - store.frame(k - 1).time;
    let j = current_with(&spectral, store.frame(k), &store.params);
    let mut field: Vec<f64> = after.values.iter().zip(&before.values).map(|(a, b)| (a - b) / dt).collect();
    for (axis, comp) in j.components.iter().enumerate() {
        for (r, d) in field.iter_mut().zip(spectral.derivative_real(comp, axis)) {
            *r += d;
        }
    }
    let l2_norm = (field.iter().map(|r| r * r).sum::<f64>() * grid.cell_volume()).sqrt();
    Ok(ContinuityResidual { time: store.frame(k).time, field, l2_norm })
}
