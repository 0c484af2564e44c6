//! Unitary time evolution with the symmetric (Strang) split-operator method.
//!
//! One step applies half a potential kick in position space, the full
//! kinetic propagator in momentum space, and another half kick. Every factor
//! is a pointwise phase, so each step is unitary up to roundoff.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{Grid, PhysicsParams, Potential, WaveField};
use crate::spectral::Spectral;
use crate::{Error, Result};

/// Largest relative norm change tolerated in a single step.
pub const STEP_NORM_TOLERANCE: f64 = 1e-12;

/// Largest relative norm drift tolerated across a stored run.
pub const STORE_NORM_TOLERANCE: f64 = 1e-8;

pub const FRAME_SCHEMA_VERSION: u32 = 1;

/// Piecewise-constant-in-time potential: each segment applies from its start
/// time until the next one begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSchedule {
    segments: Vec<(f64, Potential)>,
}

impl PotentialSchedule {
    pub fn constant(potential: Potential) -> Self {
        PotentialSchedule { segments: vec![(f64::NEG_INFINITY, potential)] }
    }

    /// Segments as `(start_time, potential)`; start times must increase.
    pub fn switched(mut segments: Vec<(f64, Potential)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParams("empty potential schedule".into()));
        }
        if segments.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParams("schedule start times must increase".into()));
        }
        segments[0].0 = f64::NEG_INFINITY;
        Ok(PotentialSchedule { segments })
    }

    pub fn segment_at(&self, t: f64) -> usize {
        self.segments.iter().rposition(|(start, _)| *start <= t).unwrap_or(0)
    }

    pub fn potential_at(&self, t: f64) -> &Potential {
        &self.segments[self.segment_at(t)].1
    }

    pub fn is_time_independent(&self) -> bool {
        self.segments.len() == 1
    }
}

/// Precomputed phase factors for one time step on one grid.
pub struct SplitOperator {
    spectral: Spectral,
    params: PhysicsParams,
    dt: f64,
    kinetic: Vec<Complex64>,
    half_kick: Vec<Complex64>,
}

impl SplitOperator {
    pub fn new(grid: &Grid, params: &PhysicsParams, potential: &Potential, dt: f64) -> Self {
        let spectral = Spectral::new(grid);
        let dim = grid.dim();
        let kinetic = (0..grid.len())
            .map(|idx| {
                let k = spectral.k_vector(idx);
                let energy: f64 =
                    (0..dim).map(|a| params.hbar * params.hbar * k[a] * k[a] / (2.0 * params.mass(a))).sum();
                Complex64::from_polar(1.0, -energy * dt / params.hbar)
            })
            .collect();
        let mut op = SplitOperator { spectral, params: params.clone(), dt, kinetic, half_kick: Vec::new() };
        op.set_potential(potential);
        op
    }

    pub fn set_potential(&mut self, potential: &Potential) {
        let grid = self.spectral.grid();
        let masses = self.params.masses_for(grid.dim());
        let (hbar, dt) = (self.params.hbar, self.dt);
        self.half_kick = potential
            .sample(grid, &masses)
            .into_iter()
            .map(|v| Complex64::from_polar(1.0, -v * dt / (2.0 * hbar)))
            .collect();
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Advances `amps` by one step of length `dt` (which may be negative).
    pub fn step(&self, amps: &mut [Complex64]) {
        amps.par_iter_mut().zip(&self.half_kick).for_each(|(a, k)| *a *= k);
        self.spectral.forward(amps);
        amps.par_iter_mut().zip(&self.kinetic).for_each(|(a, k)| *a *= k);
        self.spectral.inverse(amps);
        amps.par_iter_mut().zip(&self.half_kick).for_each(|(a, k)| *a *= k);
    }
}

fn sum_sqr(amps: &[Complex64]) -> f64 {
    amps.par_iter().map(|a| a.norm_sqr()).sum()
}

/// Wavefunction snapshots at uniformly spaced times.
#[derive(Debug, Clone)]
pub struct FrameStore {
    pub frames: Vec<WaveField>,
    pub dt_frame: f64,
    pub dt_step: f64,
    pub frame_stride: usize,
    pub params: PhysicsParams,
    pub schedule: PotentialSchedule,
}

impl FrameStore {
    pub fn grid(&self) -> &Grid {
        &self.frames[0].grid
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, k: usize) -> &WaveField {
        &self.frames[k]
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn start_time(&self) -> f64 {
        self.frames[0].time
    }

    pub fn end_time(&self) -> f64 {
        self.frames[self.frames.len() - 1].time
    }

    /// Largest `| ||psi_k|| - ||psi_0|| | / ||psi_0||` over the store.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.frames[0].norm();
        self.frames.iter().map(|f| (f.norm() - n0).abs() / n0).fold(0.0, f64::max)
    }

    /// Writes one JSON record per frame.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for (index, frame) in self.frames.iter().enumerate() {
            let record = FrameRecord {
                schema_version: FRAME_SCHEMA_VERSION,
                index,
                time: frame.time,
                grid: frame.grid.clone(),
                amplitudes: frame.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a frame dump written by [`FrameStore::write_ndjson`]. Stepping
    /// metadata that the dump does not carry is taken from the arguments.
    pub fn read_ndjson<R: BufRead>(input: R, params: PhysicsParams, dt_step: f64, frame_stride: usize) -> Result<Self> {
        let mut frames = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FrameRecord = serde_json::from_str(&line)?;
            if rec.schema_version != FRAME_SCHEMA_VERSION {
                return Err(Error::InvalidParams(format!("unsupported frame schema {}", rec.schema_version)));
            }
            let amps = rec.amplitudes.iter().map(|p| Complex64::new(p[0], p[1])).collect();
            frames.push(WaveField::new(rec.grid, rec.time, amps)?);
        }
        if frames.is_empty() {
            return Err(Error::InvalidParams("frame dump is empty".into()));
        }
        let dt_frame = if frames.len() > 1 { frames[1].time - frames[0].time } else { 0.0 };
        let schedule = PotentialSchedule::constant(params.potential.clone());
        Ok(FrameStore { frames, dt_frame, dt_step, frame_stride, params, schedule })
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    schema_version: u32,
    index: usize,
    time: f64,
    grid: Grid,
    amplitudes: Vec<[f64; 2]>,
}

/// Evolves `psi0` under the time-independent potential in `params`.
pub fn evolve(
    psi0: &WaveField,
    params: &PhysicsParams,
    dt_step: f64,
    n_steps: usize,
    frame_stride: usize,
) -> Result<FrameStore> {
    let schedule = PotentialSchedule::constant(params.potential.clone());
    evolve_scheduled(psi0, params, &schedule, dt_step, n_steps, frame_stride)
}

/// Evolves `psi0` with a piecewise-constant potential schedule, storing a
/// frame every `frame_stride` steps (plus the initial frame).
pub fn evolve_scheduled(
    psi0: &WaveField,
    params: &PhysicsParams,
    schedule: &PotentialSchedule,
    dt_step: f64,
    n_steps: usize,
    frame_stride: usize,
) -> Result<FrameStore> {
    params.validate(psi0.grid.dim())?;
    if !(dt_step > 0.0) || !dt_step.is_finite() {
        return Err(Error::InvalidParams(format!("dt_step must be positive, got {dt_step}")));
    }
    if frame_stride == 0 {
        return Err(Error::InvalidParams("frame_stride must be at least 1".into()));
    }
    let n0 = psi0.norm_sqr();
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(Error::ZeroNorm);
    }
    let t0 = psi0.time;
    let mut segment = schedule.segment_at(t0 + 0.5 * dt_step);
    let mut op = SplitOperator::new(&psi0.grid, params, &schedule.segments[segment].1, dt_step);
    let mut amps = psi0.amplitudes.clone();
    let mut frames = vec![psi0.clone()];
    let mut prev = sum_sqr(&amps);
    for step in 1..=n_steps {
        let mid = t0 + (step as f64 - 0.5) * dt_step;
        let seg = schedule.segment_at(mid);
        if seg != segment {
            segment = seg;
            op.set_potential(&schedule.segments[segment].1);
        }
        op.step(&mut amps);
        let now = sum_sqr(&amps);
        if !now.is_finite() {
            return Err(Error::NonFinite { step });
        }
        let drift = (now - prev).abs() / prev;
        if drift > STEP_NORM_TOLERANCE {
            return Err(Error::NormDrift { step, drift, limit: STEP_NORM_TOLERANCE });
        }
        prev = now;
        if step % frame_stride == 0 {
            frames.push(WaveField::new(psi0.grid.clone(), t0 + step as f64 * dt_step, amps.clone())?);
        }
    }
    let store = FrameStore {
        frames,
        dt_frame: dt_step * frame_stride as f64,
        dt_step,
        frame_stride,
        params: params.clone(),
        schedule: schedule.clone(),
    };
    let drift = store.norm_drift();
    if drift > STORE_NORM_TOLERANCE {
        return Err(Error::NormDrift { step: n_steps, drift, limit: STORE_NORM_TOLERANCE });
    }
    Ok(store)
}

/// `H psi` with spectral kinetic energy and the given potential.
pub fn apply_hamiltonian(psi: &WaveField, params: &PhysicsParams, potential: &Potential) -> Vec<Complex64> {
    let grid = &psi.grid;
    let spectral = Spectral::new(grid);
    let dim = grid.dim();
    let mut hat = psi.amplitudes.clone();
    spectral.forward(&mut hat);
    hat.par_iter_mut().enumerate().for_each(|(idx, c)| {
        let k = spectral.k_vector(idx);
        let t: f64 = (0..dim).map(|a| params.hbar * params.hbar * k[a] * k[a] / (2.0 * params.mass(a))).sum();
        *c *= t;
    });
    spectral.inverse(&mut hat);
    let v = potential.sample(grid, &params.masses_for(dim));
    hat.iter_mut().zip(&psi.amplitudes).zip(v).for_each(|((h, a), v)| *h += a * v);
    hat
}

/// `<psi|H|psi> / <psi|psi>` as a complex number; the imaginary part is a
/// roundoff diagnostic.
pub fn hamiltonian_expectation(psi: &WaveField, params: &PhysicsParams) -> Result<Complex64> {
    let n = psi.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let h = apply_hamiltonian(psi, params, &params.potential);
    let s: Complex64 = psi.amplitudes.iter().zip(&h).map(|(a, b)| a.conj() * b).sum();
    Ok(s * psi.grid.cell_volume() / n)
}

pub fn expected_energy(psi: &WaveField, params: &PhysicsParams) -> Result<f64> {
    Ok(hamiltonian_expectation(psi, params)?.re)
}
