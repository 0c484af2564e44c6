//! Finite ensembles of worlds: sampling from the density, the second-order
//! (Newtonian) equations of motion, kernel density estimates, outcome
//! frequencies and the loop quantization condition.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{Grid, PhysicsParams, WaveField};
use crate::hydrodynamics::{phase_winding, FlowFrame, ScalarField, DEFAULT_NODE_FRACTION};
use crate::interp::{FieldSeries, Stencil};
use crate::measure::Region;
use crate::propagator::FrameStore;
use crate::spectral::{fd4_derivative, Spectral};
use crate::worlds::{BohmFlow, Seeding, Trajectory, TrajectoryBundle, TrajectoryStatus};
use crate::{Error, Point, Result};

/// Draws `k` configurations from `rho`, read as constant on each cell
/// `[x_i, x_i + h)`. Inverse CDF in 1D, rejection in 2D.
pub fn sample_worlds(rho: &ScalarField, k: usize, seed: u64) -> Result<Vec<Point>> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("an ensemble needs at least two worlds, got {k}")));
    }
    if rho.values.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidParams("density must be finite and non-negative".into()));
    }
    let grid = &rho.grid;
    let total: f64 = rho.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = [grid.spacing(0), if grid.dim() == 2 { grid.spacing(1) } else { 0.0 }];
    let mut out = Vec::with_capacity(k);
    if grid.dim() == 1 {
        let mut cum = Vec::with_capacity(rho.values.len());
        let mut acc = 0.0;
        for r in &rho.values {
            acc += r;
            cum.push(acc);
        }
        for _ in 0..k {
            let u = rng.gen::<f64>() * acc;
            let i = cum.partition_point(|c| *c <= u).min(cum.len() - 1);
            let before = if i == 0 { 0.0 } else { cum[i - 1] };
            let frac = ((u - before) / rho.values[i]).clamp(0.0, 1.0 - f64::EPSILON);
            out.push([grid.coord(0, i) + frac * h[0], 0.0]);
        }
    } else {
        let max = rho.max();
        while out.len() < k {
            let i = rng.gen_range(0..grid.len());
            if rng.gen::<f64>() * max < rho.values[i] {
                let p = grid.point(i);
                out.push([p[0] + rng.gen::<f64>() * h[0], p[1] + rng.gen::<f64>() * h[1]]);
            }
        }
    }
    Ok(out)
}

/// Worlds followed with positions and velocities at the frame times.
#[derive(Debug, Clone)]
pub struct WorldEnsemble {
    pub worlds: Vec<Trajectory>,
    pub velocities: Vec<Vec<Point>>,
    pub seed: Option<u64>,
    pub provenance: String,
}

impl WorldEnsemble {
    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    /// Positions of the worlds that reached frame `k`.
    pub fn positions_at(&self, k: usize) -> Vec<Point> {
        self.worlds.iter().filter_map(|w| w.points.get(k).copied()).collect()
    }

    /// Same record layout as trajectory bundles.
    pub fn write_ndjson<W: Write>(&self, out: W) -> Result<()> {
        let seeding = match self.seed {
            Some(seed) => Seeding::DensitySampled { count: self.len(), seed },
            None => Seeding::Explicit { points: self.worlds.iter().map(|w| w.initial[..w.dim].to_vec()).collect() },
        };
        TrajectoryBundle { trajectories: self.worlds.clone(), seeding }.write_ndjson(out)
    }
}

/// Acceleration `-grad(V + Q) / m` at every frame, with Q from the smooth
/// density. The node mask is widened by the finite-difference stencil.
pub fn acceleration_series(store: &FrameStore, node_fraction: f64) -> FieldSeries {
    let grid = store.grid().clone();
    let spectral = Spectral::new(&grid);
    let params = &store.params;
    let masses = params.masses_for(grid.dim());
    let frames: Vec<FlowFrame> = store
        .frames
        .par_iter()
        .map(|f| {
            let mut flow = FlowFrame::compute_with(&spectral, f, params, node_fraction, true);
            let v = store.schedule.potential_at(f.time).sample(&grid, &masses);
            let mut u = flow.quantum_potential.take().expect("requested");
            for (q, v) in u.iter_mut().zip(&v) {
                *q += v;
            }
            flow.velocity = (0..grid.dim())
                .map(|a| fd4_derivative(&u, &grid, a).into_iter().map(|g| -g / params.mass(a)).collect())
                .collect();
            flow.node_mask = dilate(&grid, &flow.node_mask, 2);
            flow
        })
        .collect();
    FieldSeries::from_flow(store, frames, |f| f.velocity)
}

fn dilate(grid: &Grid, mask: &[bool], width: usize) -> Vec<bool> {
    let mut out = mask.to_vec();
    for a in 0..grid.dim() {
        let n = grid.npoints(a);
        let src = out.clone();
        for i in 0..grid.len() {
            if !src[i] {
                continue;
            }
            let m = grid.multi_index(i);
            for d in 1..=width {
                for j in [(m[a] + d) % n, (m[a] + n - d) % n] {
                    let mut mm = m;
                    mm[a] = j;
                    out[grid.index(mm)] = true;
                }
            }
        }
    }
    out
}

/// Velocity-Verlet on `m q'' = -grad(V + Q)` from the given initial points,
/// each starting with the velocity of the first-order flow there.
pub fn newtonian_trajectories(store: &FrameStore, initials: &[Point], dt: f64) -> Result<WorldEnsemble> {
    let velocity = FieldSeries::velocity(store, DEFAULT_NODE_FRACTION);
    let accel = acceleration_series(store, DEFAULT_NODE_FRACTION);
    let out: Vec<(Trajectory, Vec<Point>)> = initials
        .par_iter()
        .enumerate()
        .map(|(id, q0)| verlet(&velocity, &accel, id, *q0, dt))
        .collect::<Result<_>>()?;
    let (worlds, velocities) = out.into_iter().unzip();
    Ok(WorldEnsemble { worlds, velocities, seed: None, provenance: "newtonian".into() })
}

fn verlet(velocity: &FieldSeries, accel: &FieldSeries, id: usize, q0: Point, dt: f64) -> Result<(Trajectory, Vec<Point>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let grid = &velocity.grid;
    let dim = grid.dim();
    if !grid.contains(&q0) {
        return Err(Error::LeftGrid { time: velocity.start_time(), point: q0[..dim].to_vec() });
    }
    let times = &velocity.times;
    let Some(v0) = velocity.sample_frame(0, &q0) else {
        return Err(Error::NodeStart { point: q0[..dim].to_vec(), rho: 0.0 });
    };
    let mut traj =
        Trajectory { id, dim, initial: q0, times: vec![times[0]], points: vec![q0], status: TrajectoryStatus::Completed };
    let mut vels = vec![v0];
    let (mut p, mut v) = (q0, v0);
    let Some(mut a) = accel.sample(&p, times[0])? else {
        traj.status = TrajectoryStatus::AbortedNearNode;
        return Ok((traj, vels));
    };
    for k in 0..times.len() - 1 {
        let span = times[k + 1] - times[k];
        let n_sub = (span / dt).ceil().max(1.0) as usize;
        let h = span / n_sub as f64;
        for s in 0..n_sub {
            let t1 = times[k] + (s + 1) as f64 * h;
            for i in 0..dim {
                v[i] += 0.5 * h * a[i];
                p[i] += h * v[i];
            }
            if !grid.contains(&p) {
                return Err(Error::LeftGrid { time: t1, point: p[..dim].to_vec() });
            }
            let Some(a1) = accel.sample(&p, t1)? else {
                traj.status = TrajectoryStatus::AbortedNearNode;
                return Ok((traj, vels));
            };
            a = a1;
            for i in 0..dim {
                v[i] += 0.5 * h * a[i];
            }
        }
        traj.times.push(times[k + 1]);
        traj.points.push(p);
        vels.push(v);
    }
    Ok((traj, vels))
}

/// First-order ensemble from density sampling at `t_0`.
pub fn bohm_ensemble(flow: &BohmFlow, k: usize, seed: u64, dt_traj: f64) -> Result<WorldEnsemble> {
    let bundle = TrajectoryBundle::integrate(flow, Seeding::DensitySampled { count: k, seed }, dt_traj)?;
    Ok(WorldEnsemble {
        velocities: Vec::new(),
        worlds: bundle.trajectories,
        seed: Some(seed),
        provenance: format!("bohm flow, density sampled, K={k}"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Bandwidth {
    Silverman,
    Fixed { h: f64 },
}

/// Silverman's rule per axis: `0.9 min(sd, IQR/1.34) K^(-1/5)` in 1D and
/// `sd K^(-1/6)` in 2D.
pub fn silverman_bandwidth(points: &[Point], dim: usize) -> [f64; 2] {
    let k = points.len() as f64;
    let mut out = [0.0; 2];
    for (a, slot) in out.iter_mut().enumerate().take(dim) {
        let mut xs: Vec<f64> = points.iter().map(|p| p[a]).collect();
        let mean = xs.iter().sum::<f64>() / k;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
        *slot = if dim == 1 {
            xs.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
            let q = |f: f64| xs[((f * (k - 1.0)).round() as usize).min(xs.len() - 1)];
            let iqr = q(0.75) - q(0.25);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * k.powf(-0.2)
        } else {
            sd * k.powf(-1.0 / 6.0)
        };
    }
    out
}

#[derive(Debug, Clone)]
pub struct Kde {
    pub density: ScalarField,
    pub bandwidth: [f64; 2],
}

const KDE_CHUNK: usize = 1024;

/// Gaussian kernel estimate of the world density on `grid`, normalized to
/// unit mass. Partial sums are formed per fixed chunk of worlds and added in
/// chunk order, so the result does not depend on the thread count.
pub fn empirical_density(points: &[Point], grid: &Grid, bandwidth: Bandwidth) -> Result<Kde> {
    if points.is_empty() {
        return Err(Error::InvalidParams("no worlds to estimate a density from".into()));
    }
    let dim = grid.dim();
    let bw = match bandwidth {
        Bandwidth::Silverman => {
            let b = silverman_bandwidth(points, dim);
            if points.len() < 2 || b[..dim].iter().any(|h| !(*h > 0.0)) {
                return Err(Error::InvalidParams("Silverman bandwidth needs at least two distinct worlds".into()));
            }
            b
        }
        Bandwidth::Fixed { h } if h > 0.0 => [h, h],
        Bandwidth::Fixed { h } => return Err(Error::InvalidParams(format!("bandwidth must be positive, got {h}"))),
    };
    let reach: Vec<i64> = (0..dim).map(|a| (6.0 * bw[a] / grid.spacing(a)).ceil() as i64 + 1).collect();
    let deposit = |chunk: &[Point]| {
        let mut acc = vec![0.0; grid.len()];
        for p in chunk {
            let centre: Vec<i64> = (0..dim).map(|a| ((p[a] - grid.min(a)) / grid.spacing(a)).round() as i64).collect();
            let range = |a: usize| {
                let n = grid.npoints(a) as i64;
                (centre[a] - reach[a]).max(0)..=(centre[a] + reach[a]).min(n - 1)
            };
            let weight = |a: usize, i: i64| (-0.5 * ((grid.coord(a, i as usize) - p[a]) / bw[a]).powi(2)).exp();
            if dim == 1 {
                for i in range(0) {
                    acc[i as usize] += weight(0, i);
                }
            } else {
                let wy: Vec<(i64, f64)> = range(1).map(|j| (j, weight(1, j))).collect();
                for i in range(0) {
                    let wx = weight(0, i);
                    for (j, w) in &wy {
                        acc[grid.index([i as usize, *j as usize])] += wx * w;
                    }
                }
            }
        }
        acc
    };
    let partials: Vec<Vec<f64>> = points.par_chunks(KDE_CHUNK).map(deposit).collect();
    let mut values = vec![0.0; grid.len()];
    for part in partials {
        for (v, p) in values.iter_mut().zip(part) {
            *v += p;
        }
    }
    let mass = values.iter().sum::<f64>() * grid.cell_volume();
    if !(mass > 0.0) {
        return Err(Error::Precondition("all kernels fall outside the grid".into()));
    }
    values.iter_mut().for_each(|v| *v /= mass);
    Ok(Kde { density: ScalarField { grid: grid.clone(), time: 0.0, values }, bandwidth: bw })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeFrequencies {
    pub fractions: Vec<f64>,
    /// Fraction of worlds in none of the regions.
    pub residual: f64,
}

/// Share of worlds in each region, with cell ownership as in
/// [`Region::contains_point`].
pub fn miw_outcome_frequencies(points: &[Point], regions: &[Region]) -> Result<OutcomeFrequencies> {
    if points.is_empty() {
        return Err(Error::InvalidParams("no worlds to count".into()));
    }
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            if !regions[i].is_disjoint(&regions[j]) {
                return Err(Error::Precondition(format!("outcome regions {i} and {j} overlap")));
            }
        }
    }
    let k = points.len() as f64;
    let mut counts = vec![0usize; regions.len()];
    let mut outside = 0usize;
    for p in points {
        match regions.iter().position(|r| r.contains_point(p)) {
            Some(a) => counts[a] += 1,
            None => outside += 1,
        }
    }
    Ok(OutcomeFrequencies { fractions: counts.iter().map(|c| *c as f64 / k).collect(), residual: outside as f64 / k })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub seed: u64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// `(K, RMS error over seeds)`.
    pub rms: Vec<(usize, f64)>,
    /// Least-squares slope of log RMS error against log K.
    pub slope: f64,
}

impl ConvergenceStudy {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "seed", "error"])?;
        for r in &self.rows {
            w.write_record([r.k.to_string(), r.seed.to_string(), r.error.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest per-outcome gap between world frequencies and `expected`, for
/// every `K` and seed. `worlds(k, seed)` yields the ensemble positions.
pub fn frequency_convergence(
    expected: &[f64],
    regions: &[Region],
    ks: &[usize],
    seeds: &[u64],
    worlds: impl Fn(usize, u64) -> Result<Vec<Point>> + Sync,
) -> Result<ConvergenceStudy> {
    if ks.len() < 2 || seeds.is_empty() {
        return Err(Error::InvalidParams("a convergence study needs two ensemble sizes and a seed".into()));
    }
    let mut rows = Vec::new();
    let mut rms = Vec::new();
    for &k in ks {
        let errs: Vec<f64> = seeds
            .iter()
            .map(|&seed| {
                let f = miw_outcome_frequencies(&worlds(k, seed)?, regions)?;
                Ok(f.fractions.iter().zip(expected).map(|(f, p)| (f - p).abs()).fold(0.0, f64::max))
            })
            .collect::<Result<_>>()?;
        for (seed, e) in seeds.iter().zip(&errs) {
            rows.push(ConvergenceRow { k, seed: *seed, error: *e });
        }
        rms.push((k, (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()));
    }
    let xy: Vec<(f64, f64)> = rms.iter().map(|(k, e)| ((*k as f64).ln(), e.ln())).collect();
    Ok(ConvergenceStudy { rows, rms, slope: fit_slope(&xy) })
}

pub fn fit_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Closed polyline in configuration space; the last point joins the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoop {
    pub points: Vec<Point>,
}

impl ClosedLoop {
    /// Circle traversed `turns` times counterclockwise (negative turns run
    /// clockwise), starting at angle `phase`.
    pub fn circle(center: [f64; 2], radius: f64, samples: usize, turns: i32, phase: f64) -> Self {
        let total = samples * turns.unsigned_abs() as usize;
        let dir = turns.signum() as f64;
        let points = (0..total)
            .map(|i| {
                let th = phase + dir * 2.0 * PI * i as f64 / samples as f64;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            })
            .collect();
        ClosedLoop { points }
    }

    /// Segment `[a, b]` run forward and back, for 1D configuration spaces.
    pub fn segment(a: f64, b: f64, samples: usize) -> Self {
        let fwd = (0..samples).map(|i| [a + (b - a) * i as f64 / samples as f64, 0.0]);
        let back = (0..samples).map(|i| [b - (b - a) * i as f64 / samples as f64, 0.0]);
        ClosedLoop { points: fwd.chain(back).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizationReport {
    /// `(loop integral of sum_a m_a v_a dq_a) / (2 pi hbar)`.
    pub ratio: f64,
    pub winding: i64,
    pub residual: f64,
}

impl QuantizationReport {
    fn from_ratio(ratio: f64) -> Self {
        let winding = ratio.round() as i64;
        QuantizationReport { ratio, winding, residual: (ratio - winding as f64).abs() }
    }
}

/// Trapezoid rule for the loop integral of `m v . dq` with `v` interpolated
/// bilinearly. Fails if a loop point sees a masked grid point.
pub fn quantization_check(psi: &WaveField, params: &PhysicsParams, path: &ClosedLoop) -> Result<QuantizationReport> {
    let n = path.points.len();
    if n < 2 {
        return Err(Error::Precondition("a loop needs at least two points".into()));
    }
    let grid = &psi.grid;
    let dim = grid.dim();
    let flow = FlowFrame::compute(psi, params, DEFAULT_NODE_FRACTION, false);
    let momentum = |p: &Point| -> Result<Point> {
        let s = Stencil::new(grid, p);
        if s.touches(&flow.node_mask) || !grid.contains(p) {
            return Err(Error::LoopOnNode(p[..dim].to_vec()));
        }
        let mut out = [0.0; 2];
        for a in 0..dim {
            out[a] = params.mass(a) * s.apply(&flow.velocity[a]);
        }
        Ok(out)
    };
    let moms: Vec<Point> = path.points.iter().map(momentum).collect::<Result<_>>()?;
    let mut integral = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        for a in 0..dim {
            integral += 0.5 * (moms[i][a] + moms[j][a]) * (path.points[j][a] - path.points[i][a]);
        }
    }
    Ok(QuantizationReport::from_ratio(integral / (2.0 * PI * params.hbar)))
}

/// Same ratio from the wrapped phase increments of `psi` along the loop.
pub fn quantization_check_phase(psi: &WaveField, path: &ClosedLoop) -> Result<QuantizationReport> {
    Ok(QuantizationReport::from_ratio(phase_winding(psi, &path.points)? / (2.0 * PI)))
}
