//! Bohmian trajectories ("worlds") driven by the velocity field of a stored
//! run, bundles of them, the discretized trajectory function `xi_t` and the
//! pushforward of the initial density along it.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{Grid, WaveField};
use crate::hydrodynamics::{ScalarField, DEFAULT_NODE_FRACTION};
use crate::interp::{ComplexSampler, FieldSeries, Stencil};
use crate::propagator::FrameStore;
use crate::spectral::Spectral;
use crate::{Error, Point, Result};

pub const TRAJECTORY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Completed,
    AbortedNearNode,
}

/// Positions sampled at the frame times of the run that produced them.
/// An aborted trajectory stops at the last frame it reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub dim: usize,
    pub initial: Point,
    pub times: Vec<f64>,
    pub points: Vec<Point>,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    pub fn is_completed(&self) -> bool {
        self.status == TrajectoryStatus::Completed
    }

    /// Largest distance between two trajectories over their common frames.
    pub fn max_distance(&self, other: &Trajectory) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| distance(a, b, self.dim))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn distance(a: &Point, b: &Point, dim: usize) -> f64 {
    (0..dim).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// Velocity field of a run together with the initial state, ready for
/// trajectory integration.
#[derive(Debug, Clone)]
pub struct BohmFlow {
    pub series: FieldSeries,
    pub initial: WaveField,
    pub node_fraction: f64,
}

impl BohmFlow {
    pub fn new(store: &FrameStore) -> Self {
        Self::with_node_fraction(store, DEFAULT_NODE_FRACTION)
    }

    pub fn with_node_fraction(store: &FrameStore, node_fraction: f64) -> Self {
        BohmFlow {
            series: FieldSeries::velocity(store, node_fraction),
            initial: store.frame(0).clone(),
            node_fraction,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.series.grid
    }

    /// RK4 on the interpolated velocity. The substep divides each frame
    /// interval evenly and is at most `dt_traj`.
    pub fn integrate(&self, id: usize, q0: Point, dt_traj: f64) -> Result<Trajectory> {
        if !(dt_traj > 0.0 && dt_traj.is_finite()) {
            return Err(Error::InvalidParams(format!("dt_traj must be positive, got {dt_traj}")));
        }
        let grid = self.grid();
        let dim = grid.dim();
        if !grid.contains(&q0) {
            return Err(Error::LeftGrid { time: self.series.start_time(), point: q0[..dim].to_vec() });
        }
        if Stencil::new(grid, &q0).touches(&self.series.masks[0]) {
            let rho = ComplexSampler::new(&self.initial).sample(&q0)?.norm_sqr();
            return Err(Error::NodeStart { point: q0[..dim].to_vec(), rho });
        }
        let times = &self.series.times;
        let mut out = Trajectory {
            id,
            dim,
            initial: q0,
            times: vec![times[0]],
            points: vec![q0],
            status: TrajectoryStatus::Completed,
        };
        let mut p = q0;
        let v = |p: &Point, t: f64| self.series.sample(p, t);
        let shift = |p: &Point, k: &Point, c: f64| {
            let mut q = *p;
            for a in 0..dim {
                q[a] += c * k[a];
            }
            q
        };
        for k in 0..times.len() - 1 {
            let span = times[k + 1] - times[k];
            let n_sub = (span / dt_traj).ceil().max(1.0) as usize;
            let h = span / n_sub as f64;
            for s in 0..n_sub {
                let t = times[k] + s as f64 * h;
                let stages = (|| -> Result<Option<[Point; 4]>> {
                    let Some(k1) = v(&p, t)? else { return Ok(None) };
                    let Some(k2) = v(&shift(&p, &k1, h / 2.0), t + h / 2.0)? else { return Ok(None) };
                    let Some(k3) = v(&shift(&p, &k2, h / 2.0), t + h / 2.0)? else { return Ok(None) };
                    let Some(k4) = v(&shift(&p, &k3, h), t + h)? else { return Ok(None) };
                    Ok(Some([k1, k2, k3, k4]))
                })()?;
                let Some([k1, k2, k3, k4]) = stages else {
                    out.status = TrajectoryStatus::AbortedNearNode;
                    return Ok(out);
                };
                for a in 0..dim {
                    p[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
                }
                if !grid.contains(&p) {
                    return Err(Error::LeftGrid { time: t + h, point: p[..dim].to_vec() });
                }
            }
            out.times.push(times[k + 1]);
            out.points.push(p);
        }
        Ok(out)
    }
}

/// Single trajectory from a stored run.
pub fn integrate_trajectory(store: &FrameStore, q0: Point, dt_traj: f64) -> Result<Trajectory> {
    BohmFlow::new(store).integrate(0, q0, dt_traj)
}

/// How the initial points of a bundle are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seeding {
    /// Evenly spaced lattice with both ends included.
    Uniform { lo: Vec<f64>, hi: Vec<f64>, count: Vec<usize> },
    /// Drawn from `|psi_0|^2` with a fixed seed.
    DensitySampled { count: usize, seed: u64 },
    Explicit { points: Vec<Vec<f64>> },
}

impl Seeding {
    pub fn uniform_1d(lo: f64, hi: f64, count: usize) -> Self {
        Seeding::Uniform { lo: vec![lo], hi: vec![hi], count: vec![count] }
    }

    pub fn initial_points(&self, psi0: &WaveField) -> Result<Vec<Point>> {
        let dim = psi0.grid.dim();
        let points = match self {
            Seeding::Uniform { lo, hi, count } => {
                if lo.len() != dim || hi.len() != dim || count.len() != dim || count.contains(&0) {
                    return Err(Error::InvalidParams(format!("uniform seeding needs {dim} bounds and positive counts")));
                }
                let axis = |a: usize| -> Vec<f64> {
                    if count[a] == 1 {
                        vec![lo[a]]
                    } else {
                        (0..count[a]).map(|i| lo[a] + (hi[a] - lo[a]) * i as f64 / (count[a] - 1) as f64).collect()
                    }
                };
                let xs = axis(0);
                if dim == 1 {
                    xs.iter().map(|&x| [x, 0.0]).collect()
                } else {
                    let ys = axis(1);
                    xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect()
                }
            }
            Seeding::DensitySampled { count, seed } => {
                crate::miw::sample_worlds(&crate::hydrodynamics::density(psi0), *count, *seed)?
            }
            Seeding::Explicit { points } => points
                .iter()
                .map(|p| {
                    if p.len() != dim {
                        return Err(Error::InvalidParams(format!("explicit point {p:?} is not {dim}-dimensional")));
                    }
                    let mut q = [0.0; 2];
                    q[..dim].copy_from_slice(p);
                    Ok(q)
                })
                .collect::<Result<_>>()?,
        };
        let mut sorted = points.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams("bundle initial points must be distinct".into()));
        }
        Ok(points)
    }
}

/// Trajectories sharing one run.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle {
    pub trajectories: Vec<Trajectory>,
    pub seeding: Seeding,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRecord {
    schema_version: u32,
    world_id: usize,
    initial: Vec<f64>,
    status: TrajectoryStatus,
    samples: Vec<Vec<f64>>,
}

impl TrajectoryBundle {
    pub fn integrate(flow: &BohmFlow, seeding: Seeding, dt_traj: f64) -> Result<Self> {
        let initials = seeding.initial_points(&flow.initial)?;
        let trajectories = initials
            .par_iter()
            .enumerate()
            .map(|(id, q0)| flow.integrate(id, *q0, dt_traj))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryBundle { trajectories, seeding })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn aborted(&self) -> usize {
        self.trajectories.iter().filter(|t| !t.is_completed()).count()
    }

    /// Positions of every trajectory at each frame.
    pub fn map(&self) -> TrajectoryMap {
        let times = self.trajectories.iter().max_by_key(|t| t.times.len()).map(|t| t.times.clone()).unwrap_or_default();
        TrajectoryMap {
            dim: self.trajectories.first().map_or(1, |t| t.dim),
            times,
            initial: self.trajectories.iter().map(|t| t.initial).collect(),
            paths: self.trajectories.iter().map(|t| t.points.clone()).collect(),
        }
    }

    /// One record per trajectory; samples are `[t, x]` or `[t, x, y]`.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.trajectories {
            let record = TrajectoryRecord {
                schema_version: TRAJECTORY_SCHEMA_VERSION,
                world_id: t.id,
                initial: t.initial[..t.dim].to_vec(),
                status: t.status,
                samples: t
                    .times
                    .iter()
                    .zip(&t.points)
                    .map(|(time, p)| std::iter::once(*time).chain(p[..t.dim].iter().copied()).collect())
                    .collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Tidy table `world_id, t, x[, y]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.trajectories.first().map_or(1, |t| t.dim);
        let mut header = vec!["world_id", "t", "x"];
        if dim == 2 {
            header.push("y");
        }
        w.write_record(&header)?;
        for t in &self.trajectories {
            for (time, p) in t.times.iter().zip(&t.points) {
                let mut row = vec![t.id.to_string(), time.to_string()];
                row.extend(p[..dim].iter().map(|c| c.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Discretized `xi_t`: the image of each lattice point at each frame time.
#[derive(Debug, Clone)]
pub struct TrajectoryMap {
    pub dim: usize,
    pub times: Vec<f64>,
    pub initial: Vec<Point>,
    /// `paths[i][k]` is the image of `initial[i]` at `times[k]`; shorter for
    /// aborted trajectories.
    pub paths: Vec<Vec<Point>>,
}

impl TrajectoryMap {
    /// `xi_{t_k}` on the lattice, `None` where the trajectory was aborted.
    pub fn at_frame(&self, k: usize) -> Vec<Option<Point>> {
        self.paths.iter().map(|p| p.get(k).copied()).collect()
    }
}

/// Trajectory function on an explicit lattice of initial points.
pub fn trajectory_function(flow: &BohmFlow, lattice: &[Point], dt_traj: f64) -> Result<TrajectoryMap> {
    let points = lattice.iter().map(|p| p[..flow.grid().dim()].to_vec()).collect();
    Ok(TrajectoryBundle::integrate(flow, Seeding::Explicit { points }, dt_traj)?.map())
}

/// Lattice cells carrying the initial world amount: spectrally refined grid
/// points with weight `rho_0 * dV`, cut below `cutoff_fraction * max(rho_0)`.
#[derive(Debug, Clone)]
pub struct DensityLattice {
    pub grid: Grid,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Amount of the discarded tail cells.
    pub dropped_mass: f64,
}

impl DensityLattice {
    pub fn new(psi0: &WaveField, refine: usize, cutoff_fraction: f64) -> Self {
        let (grid, values) = if refine > 1 {
            Spectral::new(&psi0.grid).refine(&psi0.amplitudes, refine)
        } else {
            (psi0.grid.clone(), psi0.amplitudes.clone())
        };
        let dv = grid.cell_volume();
        let rho: Vec<f64> = values.iter().map(|a| a.norm_sqr()).collect();
        let cut = cutoff_fraction * rho.iter().copied().fold(0.0, f64::max);
        let mut out = DensityLattice { grid: grid.clone(), points: Vec::new(), weights: Vec::new(), dropped_mass: 0.0 };
        for (i, r) in rho.iter().enumerate() {
            if *r >= cut && *r > 0.0 {
                out.points.push(grid.point(i));
                out.weights.push(r * dv);
            } else {
                out.dropped_mass += r * dv;
            }
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Pushforward {
    pub density: ScalarField,
    /// Set when the transported lattice is coarser than the target grid.
    pub warning: Option<String>,
    /// Weight of lattice points whose trajectories were aborted.
    pub lost_mass: f64,
}

/// Cloud-in-cell deposition of the lattice weights at their transported
/// positions, divided by the target cell volume.
pub fn pushforward_density(lattice: &DensityLattice, positions: &[Option<Point>], target: &Grid, time: f64) -> Result<Pushforward> {
    if positions.len() != lattice.points.len() {
        return Err(Error::InvalidParams("one transported position per lattice point required".into()));
    }
    let dim = target.dim();
    let mut values = vec![0.0; target.len()];
    let mut lost_mass = 0.0;
    for (p, w) in positions.iter().zip(&lattice.weights) {
        match p {
            Some(p) => {
                for (i, c) in Stencil::new(target, p).iter() {
                    values[i] += w * c;
                }
            }
            None => lost_mass += w,
        }
    }
    let dv = target.cell_volume();
    values.iter_mut().for_each(|v| *v /= dv);

    let mut warning = None;
    for a in 0..dim {
        let (hl, h) = (lattice.grid.spacing(a), target.spacing(a));
        if hl > h {
            warning = Some(format!(
                "lattice spacing {hl:.3e} exceeds grid spacing {h:.3e} on axis {a}; refine by at least {}",
                (hl / h).ceil()
            ));
        }
    }
    if dim == 1 && warning.is_none() {
        // stretching by the flow can open gaps wider than a target cell
        let mut xs: Vec<f64> = positions.iter().flatten().map(|p| p[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite positions"));
        let gap = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let lattice_gap = lattice.grid.spacing(0) * 1.5;
        if gap > target.spacing(0) && gap > lattice_gap {
            warning = Some(format!(
                "transported lattice has gaps up to {gap:.3e}, wider than grid spacing {:.3e}; refine by at least {}",
                target.spacing(0),
                (gap / target.spacing(0)).ceil()
            ));
        }
    }
    Ok(Pushforward { density: ScalarField { grid: target.clone(), time, values }, warning, lost_mass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingViolation {
    pub time: f64,
    pub first: usize,
    pub second: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CrossingReport {
    pub frames_checked: usize,
    pub violations: Vec<CrossingViolation>,
}

impl CrossingReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// In 1D, checks that the initial ordering holds at every frame. In 2D,
/// flags pairs closer than `collision_radius` at a common frame.
pub fn check_no_crossing(bundle: &TrajectoryBundle, collision_radius: f64) -> CrossingReport {
    let tr = &bundle.trajectories;
    let mut report = CrossingReport::default();
    let Some(first) = tr.first() else { return report };
    let frames = tr.iter().map(|t| t.points.len()).max().unwrap_or(0);
    report.frames_checked = frames;
    if first.dim == 1 {
        let mut order: Vec<usize> = (0..tr.len()).collect();
        order.sort_by(|&a, &b| tr[a].initial[0].partial_cmp(&tr[b].initial[0]).expect("finite initials"));
        for k in 0..frames {
            let live: Vec<usize> = order.iter().copied().filter(|&i| tr[i].points.len() > k).collect();
            for w in live.windows(2) {
                let (a, b) = (&tr[w[0]], &tr[w[1]]);
                let gap = b.points[k][0] - a.points[k][0];
                if gap <= 0.0 {
                    report.violations.push(CrossingViolation { time: a.times[k], first: a.id, second: b.id, distance: gap });
                }
            }
        }
    } else {
        for k in 0..frames {
            for i in 0..tr.len() {
                for j in i + 1..tr.len() {
                    let (a, b) = (&tr[i], &tr[j]);
                    if a.points.len() <= k || b.points.len() <= k {
                        continue;
                    }
                    let d = distance(&a.points[k], &b.points[k], 2);
                    if d < collision_radius {
                        report.violations.push(CrossingViolation { time: a.times[k], first: a.id, second: b.id, distance: d });
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{make_state, PhysicsParams, Potential, StateRecipe};
    use crate::hydrodynamics::density;
    use crate::propagator::evolve;

    fn line(min: f64, max: f64, n: usize) -> Grid {
        Grid::new(&[(min, max)], &[n]).unwrap()
    }

    fn free_gaussian_store(t_end: f64) -> FrameStore {
        let g = line(-20.0, 20.0, 512);
        let p = PhysicsParams::natural(1);
        let psi = make_state(&g, &StateRecipe::Gaussian { center: vec![0.0], sigma: vec![1.0], momentum: vec![0.0] }, &p).unwrap();
        let steps = (t_end / 1e-3).round() as usize;
        evolve(&psi, &p, 1e-3, steps, 20).unwrap()
    }

    fn sigma(t: f64) -> f64 {
        (1.0 + t * t / 4.0).sqrt()
    }

    #[test]
    fn harmonic_ground_state_worlds_stand_still() {
        let g = line(-10.0, 10.0, 256);
        let p = PhysicsParams::natural(1).with_potential(Potential::Harmonic { omega: 1.0, center: vec![] });
        let psi = make_state(&g, &StateRecipe::HarmonicEigen { n: vec![0], omega: 1.0, center: vec![] }, &p).unwrap();
        // the analytic eigenstate breathes at O(dt^2) under Strang splitting
        let store = evolve(&psi, &p, 1e-4, 20000, 1000).unwrap();
        for q0 in [-2.5, -0.3, 0.0, 1.7] {
            let t = integrate_trajectory(&store, [q0, 0.0], 1e-2).unwrap();
            let worst = t.points.iter().map(|p| (p[0] - q0).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-8);
        }
    }

    #[test]
    fn free_gaussian_trajectory_matches_width_law() {
        let store = free_gaussian_store(2.0);
        let t = integrate_trajectory(&store, [1.0, 0.0], 1e-2).unwrap();
        assert!(t.is_completed());
        assert!((t.last()[0] - 2f64.sqrt()).abs() < 1e-3);
        for (time, p) in t.times.iter().zip(&t.points) {
            assert!((p[0] - sigma(*time)).abs() < 1e-3);
        }
    }

    #[test]
    fn plane_wave_worlds_move_uniformly() {
        let g = line(-4.0 * std::f64::consts::PI, 4.0 * std::f64::consts::PI, 256);
        let p = PhysicsParams::natural(1);
        let psi = make_state(&g, &StateRecipe::PlaneWave { k: vec![2.0], amplitude: 1.0 }, &p).unwrap();
        let store = evolve(&psi, &p, 1e-3, 1000, 100).unwrap();
        let t = integrate_trajectory(&store, [-3.0, 0.0], 1e-2).unwrap();
        for (time, q) in t.times.iter().zip(&t.points) {
            assert!((q[0] - (-3.0 + 2.0 * time)).abs() < 1e-9);
        }
    }

    #[test]
    fn start_on_node_and_leaving_the_box_are_errors() {
        let g = line(-10.0, 10.0, 256);
        let p = PhysicsParams::natural(1);
        let psi = make_state(&g, &StateRecipe::Gaussian { center: vec![0.0], sigma: vec![1.0], momentum: vec![0.0] }, &p).unwrap();
        let store = evolve(&psi, &p, 1e-3, 100, 50).unwrap();
        assert!(matches!(integrate_trajectory(&store, [9.5, 0.0], 1e-2), Err(Error::NodeStart { .. })));
        assert!(matches!(integrate_trajectory(&store, [12.0, 0.0], 1e-2), Err(Error::LeftGrid { .. })));

        let fast = make_state(&line(-4.0, 4.0, 64), &StateRecipe::PlaneWave { k: vec![std::f64::consts::PI * 2.0], amplitude: 1.0 }, &p).unwrap();
        let store = evolve(&fast, &p, 1e-3, 1000, 100).unwrap();
        assert!(matches!(integrate_trajectory(&store, [2.0, 0.0], 1e-2), Err(Error::LeftGrid { .. })));
    }

    #[test]
    fn node_start_is_rejected_and_masked_paths_abort() {
        let g = line(-10.0, 10.0, 256);
        let p = PhysicsParams::natural(1).with_potential(Potential::Harmonic { omega: 1.0, center: vec![] });
        let psi = make_state(&g, &StateRecipe::HarmonicEigen { n: vec![1], omega: 1.0, center: vec![] }, &p).unwrap();
        let store = evolve(&psi, &p, 1e-3, 200, 100).unwrap();
        let flow = BohmFlow::with_node_fraction(&store, 1e-3);
        assert!(matches!(flow.integrate(0, [0.0, 0.0], 1e-2), Err(Error::NodeStart { .. })));
        assert!(flow.integrate(1, [1.0, 0.0], 1e-2).unwrap().is_completed());

        let pw = make_state(&line(-4.0, 4.0, 64), &StateRecipe::PlaneWave { k: vec![std::f64::consts::PI], amplitude: 1.0 }, &PhysicsParams::natural(1)).unwrap();
        let store = evolve(&pw, &PhysicsParams::natural(1), 1e-3, 1000, 100).unwrap();
        let mut flow = BohmFlow::new(&store);
        let wall = flow.grid().nearest_index(&[1.0, 0.0]);
        for m in flow.series.masks.iter_mut() {
            m[wall] = true;
        }
        let t = flow.integrate(0, [0.0, 0.0], 1e-2).unwrap();
        assert_eq!(t.status, TrajectoryStatus::AbortedNearNode);
        assert!(t.last()[0] < 1.0);
    }

    #[test]
    fn trajectory_function_starts_at_identity_and_scales() {
        let store = free_gaussian_store(2.0);
        let flow = BohmFlow::new(&store);
        let lattice: Vec<Point> = (0..41).map(|i| [-3.0 + 0.15 * i as f64, 0.0]).collect();
        let map = trajectory_function(&flow, &lattice, 1e-2).unwrap();
        assert_eq!(map.at_frame(0), lattice.iter().map(|p| Some(*p)).collect::<Vec<_>>());
        let last = map.times.len() - 1;
        for (q0, q) in lattice.iter().zip(map.at_frame(last)) {
            assert!((q.unwrap()[0] - q0[0] * sigma(2.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn coherent_state_translates_rigidly() {
        let g = line(-12.0, 12.0, 256);
        let p = PhysicsParams::natural(1).with_potential(Potential::Harmonic { omega: 1.0, center: vec![] });
        let psi = make_state(&g, &StateRecipe::Gaussian { center: vec![2.0], sigma: vec![0.5f64.sqrt()], momentum: vec![0.0] }, &p).unwrap();
        let store = evolve(&psi, &p, 1e-3, 3000, 20).unwrap();
        let flow = BohmFlow::new(&store);
        let lattice: Vec<Point> = (0..21).map(|i| [1.0 + 0.1 * i as f64, 0.0]).collect();
        let map = trajectory_function(&flow, &lattice, 1e-2).unwrap();
        for (k, t) in map.times.iter().enumerate() {
            for (q0, q) in lattice.iter().zip(map.at_frame(k)) {
                let expected = q0[0] + 2.0 * t.cos() - 2.0;
                assert!((q.unwrap()[0] - expected).abs() < 1e-3, "t={t}");
            }
        }
    }

    #[test]
    fn crossing_check_and_negative_control() {
        let store = free_gaussian_store(1.0);
        let flow = BohmFlow::new(&store);
        let mut bundle = TrajectoryBundle::integrate(&flow, Seeding::uniform_1d(-3.0, 3.0, 101), 1e-2).unwrap();
        assert_eq!(bundle.len(), 101);
        assert!(check_no_crossing(&bundle, 0.0).is_clean());
        let k = bundle.trajectories[50].points.len() - 1;
        bundle.trajectories[50].points[k][0] += 0.5;
        let report = check_no_crossing(&bundle, 0.0);
        assert!(!report.is_clean());
        assert!(report.violations.iter().any(|v| v.first == 50 || v.second == 50));
    }

    #[test]
    fn duplicate_initials_are_rejected() {
        let store = free_gaussian_store(0.1);
        let flow = BohmFlow::new(&store);
        let s = Seeding::Explicit { points: vec![vec![0.5], vec![0.5]] };
        assert!(TrajectoryBundle::integrate(&flow, s, 1e-2).is_err());
    }

    #[test]
    fn pushforward_reproduces_transported_density() {
        let store = free_gaussian_store(2.0);
        let flow = BohmFlow::new(&store);
        let lattice = DensityLattice::new(store.frame(0), 4, 1e-10);
        assert!(lattice.dropped_mass < 1e-8);
        let map = trajectory_function(&flow, &lattice.points, 1e-2).unwrap();
        let g = store.grid();

        let at0 = pushforward_density(&lattice, &map.at_frame(0), g, 0.0).unwrap();
        assert!(at0.warning.is_none());
        assert!(at0.density.l1_distance(&density(store.frame(0))).unwrap() < 1e-3);

        let last = store.len() - 1;
        let at2 = pushforward_density(&lattice, &map.at_frame(last), g, 2.0).unwrap();
        let l1 = at2.density.l1_distance(&density(store.frame(last))).unwrap();
        assert!(l1 < 0.02, "{l1}");
    }

    #[test]
    fn coarse_lattice_warns() {
        let store = free_gaussian_store(0.1);
        let fine = DensityLattice::new(store.frame(0), 1, 1e-10);
        let coarse_grid = line(-20.0, 20.0, 2048);
        let r = pushforward_density(&fine, &fine.points.iter().map(|p| Some(*p)).collect::<Vec<_>>(), &coarse_grid, 0.0).unwrap();
        assert!(r.warning.unwrap().contains("refine by at least 4"));
    }

    #[test]
    fn exports_have_one_record_per_world() {
        let store = free_gaussian_store(0.2);
        let flow = BohmFlow::new(&store);
        let bundle = TrajectoryBundle::integrate(&flow, Seeding::uniform_1d(-1.0, 1.0, 5), 1e-2).unwrap();
        let mut nd = Vec::new();
        bundle.write_ndjson(&mut nd).unwrap();
        let text = String::from_utf8(nd).unwrap();
        assert_eq!(text.lines().count(), 5);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["status"], "completed");
        assert_eq!(v["samples"].as_array().unwrap().len(), store.len());
        let mut csv = Vec::new();
        bundle.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 5 * store.len());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]
        #[test]
        fn integration_is_deterministic(q0 in -3.0f64..3.0) {
            let store = free_gaussian_store(0.2);
            let flow = BohmFlow::new(&store);
            let a = flow.integrate(0, [q0, 0.0], 7e-3).unwrap();
            let b = flow.integrate(0, [q0, 0.0], 7e-3).unwrap();
            proptest::prop_assert!(a.points.iter().zip(&b.points).all(|(x, y)| x[0].to_bits() == y[0].to_bits()));
        }
    }
}
