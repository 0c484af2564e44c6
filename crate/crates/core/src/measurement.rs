//! Pointer model of a position measurement. A system coordinate `x` is
//! coupled to a pointer coordinate `z` through `W = g A p_z`, where the
//! observable `A` takes the value `a` on the region `S_a` of the system line.
//! After a short coupling time `T_M` the pointer of branch `a` sits at
//! `g a T_M`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{inner_product, Grid, PhysicsParams, Potential, WaveField};
use crate::hydrodynamics::density;
use crate::measure::{world_probability, AxisBox, Region};
use crate::propagator::{apply_hamiltonian, evolve, SplitOperator};
use crate::spectral::Spectral;
use crate::worlds::{distance, BohmFlow, Trajectory};
use crate::configspace::MARGIN_SIGMAS;
use crate::interp::ComplexSampler;
use crate::{Error, Point, Result};

/// Pointer overlaps above this are flagged in branch reports.
pub const OVERLAP_FLAG: f64 = 1e-2;

/// One eigenvalue of the observable and the system interval `[lo, hi)`
/// where it applies. Infinite ends are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

fn default_pointer_axis() -> usize {
    1
}

fn default_separation() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetup {
    #[serde(default)]
    pub system_axis: usize,
    #[serde(default = "default_pointer_axis")]
    pub pointer_axis: usize,
    pub outcomes: Vec<OutcomeSpec>,
    /// Width of the ready pointer state.
    pub sigma_z: f64,
    /// Coupling strength `g`.
    pub coupling: f64,
    /// Coupling time `T_M`.
    pub duration: f64,
    #[serde(default = "default_separation")]
    pub separation_factor: f64,
}

impl MeasurementSetup {
    pub fn shift(&self, a: usize) -> f64 {
        self.coupling * self.outcomes[a].value * self.duration
    }

    /// Smallest distance between two pointer centres.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.outcomes.len() {
            for j in i + 1..self.outcomes.len() {
                best = best.min((self.shift(i) - self.shift(j)).abs());
            }
        }
        best
    }

    /// Largest overlap `|<eta_a|eta_a'>| = exp(-d^2 / 8 sigma_z^2)` of two
    /// pointer states for continuous Gaussians.
    pub fn predicted_pointer_overlap(&self) -> f64 {
        let d = self.min_separation();
        if d.is_finite() {
            (-d * d / (8.0 * self.sigma_z * self.sigma_z)).exp()
        } else {
            0.0
        }
    }

    /// Checks the setup against a 2D `(x, z)` grid. Returns a warning when
    /// the pointers are closer than `separation_factor * sigma_z`.
    pub fn validate(&self, grid: &Grid) -> Result<Option<String>> {
        if grid.dim() != 2 {
            return Err(Error::Measurement("the measurement grid must be two-dimensional".into()));
        }
        if self.system_axis != 0 || self.pointer_axis != 1 {
            return Err(Error::Measurement(format!(
                "system and pointer must be axes 0 and 1, got {} and {}",
                self.system_axis, self.pointer_axis
            )));
        }
        if self.outcomes.is_empty() {
            return Err(Error::Measurement("at least one outcome is required".into()));
        }
        for (name, v) in [("sigma_z", self.sigma_z), ("duration", self.duration), ("separation_factor", self.separation_factor)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Measurement(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.coupling.is_finite() {
            return Err(Error::Measurement("coupling must be finite".into()));
        }
        for (i, o) in self.outcomes.iter().enumerate() {
            if !(o.lo < o.hi) || !o.value.is_finite() {
                return Err(Error::Measurement(format!("outcome {i}: invalid region [{}, {}) or value", o.lo, o.hi)));
            }
            for (j, p) in self.outcomes.iter().enumerate().skip(i + 1) {
                if o.lo < p.hi && p.lo < o.hi {
                    return Err(Error::Measurement(format!("outcome regions {i} and {j} overlap")));
                }
            }
        }
        let pointer = grid.axis_grid(1);
        let reach = MARGIN_SIGMAS * self.sigma_z;
        for a in 0..self.outcomes.len() {
            let c = self.shift(a);
            if c - reach < pointer.min(0) || c + reach > pointer.max(0) {
                return Err(Error::MarginViolation(format!(
                    "pointer of outcome {a} at {c:.4} needs [{:.4}, {:.4}] inside [{}, {})",
                    c - reach,
                    c + reach,
                    pointer.min(0),
                    pointer.max(0)
                )));
            }
        }
        let d = self.min_separation();
        if self.outcomes.len() > 1 && d < self.separation_factor * self.sigma_z {
            return Ok(Some(format!(
                "pointer separation {d:.4} is below {} sigma_z; overlap {:.3e}",
                self.separation_factor,
                self.predicted_pointer_overlap()
            )));
        }
        Ok(None)
    }

    /// Indicator regions `S_a` on the system line.
    pub fn system_regions(&self, system: &Grid) -> Result<Vec<Region>> {
        self.outcomes
            .iter()
            .map(|o| {
                let lo = o.lo.max(system.min(0));
                let hi = o.hi.min(system.max(0));
                if lo >= hi {
                    return Ok(Region::empty(system));
                }
                Region::new(system, vec![AxisBox::new(&[lo], &[hi])])
            })
            .collect()
    }

    /// Half-width of the pointer regions `Z_a`: half the closest separation,
    /// or `MARGIN_SIGMAS * sigma_z` for a single outcome.
    pub fn pointer_half_width(&self) -> f64 {
        let d = self.min_separation();
        if d.is_finite() {
            d / 2.0
        } else {
            MARGIN_SIGMAS * self.sigma_z
        }
    }

    /// `Z_a = [g a T_M - w, g a T_M + w)` clipped to the pointer axis.
    pub fn pointer_interval(&self, a: usize, pointer: &Grid) -> (f64, f64) {
        let w = self.pointer_half_width();
        let c = self.shift(a);
        ((c - w).max(pointer.min(0)), (c + w).min(pointer.max(0)))
    }

    /// `eta(z - shift)` with `eta` the normalized ready state.
    pub fn pointer_state(&self, pointer: &Grid, shift: f64) -> WaveField {
        let s = self.sigma_z;
        let norm = (2.0 * PI * s * s).powf(-0.25);
        WaveField::from_fn(pointer.clone(), 0.0, |p| {
            let d = p[0] - shift;
            Complex64::new(norm * (-d * d / (4.0 * s * s)).exp(), 0.0)
        })
    }

    fn observable_values(&self, system: &Grid) -> Result<Vec<f64>> {
        let regions = self.system_regions(system)?;
        Ok((0..system.len())
            .map(|i| regions.iter().position(|r| r.mask()[i]).map_or(0.0, |a| self.outcomes[a].value))
            .collect())
    }
}

fn check_system_state(psi: &WaveField, grid: &Grid) -> Result<()> {
    if psi.grid.dim() != 1 || psi.grid != grid.axis_grid(0) {
        return Err(Error::Measurement("the system state must live on axis 0 of the measurement grid".into()));
    }
    Ok(())
}

fn projected(psi: &WaveField, region: &Region) -> WaveField {
    let amplitudes =
        psi.amplitudes.iter().zip(region.mask()).map(|(a, m)| if *m { *a } else { Complex64::new(0.0, 0.0) }).collect();
    WaveField { grid: psi.grid.clone(), time: psi.time, amplitudes }
}

/// `||Pi_a psi||^2 / ||psi||^2` for every outcome.
pub fn born_probabilities(psi: &WaveField, setup: &MeasurementSetup) -> Result<Vec<f64>> {
    let total = psi.norm_sqr();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(setup.system_regions(&psi.grid)?.iter().map(|r| projected(psi, r).norm_sqr() / total).collect())
}

pub fn born_probability(psi: &WaveField, a: usize, setup: &MeasurementSetup) -> Result<f64> {
    if a >= setup.outcomes.len() {
        return Err(Error::IndexOutOfRange { index: a, min: 0, max: setup.outcomes.len().saturating_sub(1) });
    }
    Ok(born_probabilities(psi, setup)?[a])
}

fn product_state(grid: &Grid, parts: &[(WaveField, WaveField)], time: f64) -> WaveField {
    let [n0, n1] = grid.shape();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); grid.len()];
    amplitudes.par_chunks_mut(n1).enumerate().for_each(|(i, row)| {
        for (sys, ptr) in parts {
            let s = sys.amplitudes[i];
            if s == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (r, p) in row.iter_mut().zip(&ptr.amplitudes) {
                *r += s * p;
            }
        }
    });
    debug_assert_eq!(amplitudes.len(), n0 * n1);
    WaveField { grid: grid.clone(), time, amplitudes }
}

/// Post-measurement state with the pointer warning from validation.
#[derive(Debug, Clone)]
pub struct Measured {
    pub state: WaveField,
    pub warning: Option<String>,
}

/// `psi (x) eta_R`, the state before coupling.
pub fn ready_state(psi: &WaveField, setup: &MeasurementSetup, grid: &Grid) -> Result<WaveField> {
    setup.validate(grid)?;
    check_system_state(psi, grid)?;
    Ok(product_state(grid, &[(psi.clone(), setup.pointer_state(&grid.axis_grid(1), 0.0))], psi.time))
}

/// Impulsive limit: `sum_a [1_{S_a} psi](x) eta_R(z - g a T_M)`.
pub fn impulsive_measure(psi: &WaveField, setup: &MeasurementSetup, grid: &Grid) -> Result<Measured> {
    let warning = setup.validate(grid)?;
    check_system_state(psi, grid)?;
    let pointer = grid.axis_grid(1);
    let parts: Vec<(WaveField, WaveField)> = setup
        .system_regions(&psi.grid)?
        .iter()
        .enumerate()
        .map(|(a, r)| (projected(psi, r), setup.pointer_state(&pointer, setup.shift(a))))
        .collect();
    Ok(Measured { state: product_state(grid, &parts, psi.time + setup.duration), warning })
}

/// Coupling evolution of `psi (x) eta_R` for `T_M` in `steps` steps. The
/// coupling is diagonal in `(x, k_z)`. With `include_free` the kinetic and
/// potential terms of `params` are Strang-split around it; otherwise they
/// are neglected.
pub fn dynamical_measure(
    psi: &WaveField,
    setup: &MeasurementSetup,
    grid: &Grid,
    params: &PhysicsParams,
    steps: usize,
    include_free: bool,
) -> Result<WaveField> {
    if steps == 0 {
        return Err(Error::InvalidParams("dynamical measurement needs at least one step".into()));
    }
    let mut state = ready_state(psi, setup, grid)?;
    let dt = setup.duration / steps as f64;
    let spectral = Spectral::new(grid);
    let kz = spectral.wavenumbers(1).to_vec();
    let values = setup.observable_values(&grid.axis_grid(0))?;
    let n1 = grid.npoints(1);
    let phases: Vec<Complex64> = (0..grid.len())
        .map(|i| Complex64::from_polar(1.0, -setup.coupling * values[i / n1] * kz[i % n1] * dt))
        .collect();
    let half_free = include_free.then(|| SplitOperator::new(grid, params, &params.potential, dt / 2.0));
    for _ in 0..steps {
        if let Some(op) = &half_free {
            op.step(&mut state.amplitudes);
        }
        spectral.forward_axis(&mut state.amplitudes, 1);
        state.amplitudes.par_iter_mut().zip(&phases).for_each(|(a, p)| *a *= p);
        spectral.inverse_axis(&mut state.amplitudes, 1);
        if let Some(op) = &half_free {
            op.step(&mut state.amplitudes);
        }
    }
    state.time = psi.time + setup.duration;
    Ok(state)
}

/// How far free evolution over `T_M` moves the system state, against the
/// bound `T_M ||H psi|| / hbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShortTimeReport {
    pub duration: f64,
    pub relative_change: f64,
    pub bound: f64,
}

pub fn short_time_check(psi: &WaveField, params: &PhysicsParams, duration: f64) -> Result<ShortTimeReport> {
    let steps = ((duration / 1e-3).ceil() as usize).max(10);
    let store = evolve(psi, params, duration / steps as f64, steps, steps)?;
    let norm = psi.norm();
    let relative_change = store.frame(store.len() - 1).distance(psi)? / norm;
    let h_psi = WaveField { grid: psi.grid.clone(), time: psi.time, amplitudes: apply_hamiltonian(psi, params, &params.potential) };
    Ok(ShortTimeReport { duration, relative_change, bound: duration * h_psi.norm() / (params.hbar * norm) })
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchSummary {
    pub value: f64,
    pub pointer_region: (f64, f64),
    pub weight: f64,
    /// `int_{Z_a} |eta_a|^2 dz`.
    pub coverage: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    pub branches: Vec<BranchSummary>,
    /// `max |<Psi'_a|Psi'_a'>|` of the branch fields.
    pub branch_overlap: f64,
    /// `max |<eta_a|eta_a'>|` of the pointer states on the grid.
    pub pointer_overlap: f64,
    pub flagged: bool,
    #[serde(skip)]
    pub fields: Vec<WaveField>,
}

/// Splits `Psi'` into `(Pi_a (x) 1) Psi'` and reports weights, overlaps
/// and the pointer coverage of each `Z_a`.
pub fn branch_decompose(state: &WaveField, setup: &MeasurementSetup) -> Result<BranchReport> {
    let grid = &state.grid;
    setup.validate(grid)?;
    let (system, pointer) = (grid.axis_grid(0), grid.axis_grid(1));
    let n1 = grid.npoints(1);
    let regions = setup.system_regions(&system)?;
    let fields: Vec<WaveField> = regions
        .iter()
        .map(|r| {
            let amplitudes = state
                .amplitudes
                .iter()
                .enumerate()
                .map(|(i, a)| if r.mask()[i / n1] { *a } else { Complex64::new(0.0, 0.0) })
                .collect();
            WaveField { grid: grid.clone(), time: state.time, amplitudes }
        })
        .collect();
    let total = state.norm_sqr();
    if !(total > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let pointers: Vec<WaveField> = (0..setup.outcomes.len()).map(|a| setup.pointer_state(&pointer, setup.shift(a))).collect();
    let mut branch_overlap: f64 = 0.0;
    let mut pointer_overlap: f64 = 0.0;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            branch_overlap = branch_overlap.max(inner_product(&fields[i], &fields[j])?.norm());
            pointer_overlap = pointer_overlap.max(inner_product(&pointers[i], &pointers[j])?.norm());
        }
    }
    let branches = (0..fields.len())
        .map(|a| {
            let (lo, hi) = setup.pointer_interval(a, &pointer);
            let z = Region::new(&pointer, vec![AxisBox::new(&[lo], &[hi])])?;
            let eta = &pointers[a];
            let inside: f64 = eta.amplitudes.iter().zip(z.mask()).filter(|(_, m)| **m).map(|(e, _)| e.norm_sqr()).sum();
            Ok(BranchSummary {
                value: setup.outcomes[a].value,
                pointer_region: (lo, hi),
                weight: fields[a].norm_sqr() / total,
                coverage: inside * pointer.cell_volume() / eta.norm_sqr(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchReport { branches, branch_overlap, pointer_overlap, flagged: pointer_overlap > OVERLAP_FLAG, fields })
}

#[derive(Debug, Clone, Serialize)]
pub struct OutcomeComparison {
    pub value: f64,
    pub worlds: f64,
    pub born: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorldOutcomes {
    pub outcomes: Vec<OutcomeComparison>,
    /// World probability outside every `Q_a`.
    pub residual: f64,
}

/// Pointer reading regions `Q_a = (system line) x Z_a`.
pub fn outcome_regions(setup: &MeasurementSetup, grid: &Grid) -> Result<Vec<Region>> {
    let pointer = grid.axis_grid(1);
    (0..setup.outcomes.len())
        .map(|a| {
            let (lo, hi) = setup.pointer_interval(a, &pointer);
            Region::new(grid, vec![AxisBox::new(&[f64::NEG_INFINITY, lo], &[f64::INFINITY, hi])])
        })
        .collect()
}

/// `P(q in Q_a) = mu(Q_a) / mu(whole space)` on the post-measurement state,
/// set against the Born probabilities of the system state `psi`.
pub fn outcome_probability_via_worlds(state: &WaveField, psi: &WaveField, setup: &MeasurementSetup) -> Result<WorldOutcomes> {
    setup.validate(&state.grid)?;
    check_system_state(psi, &state.grid)?;
    let rho = density(state);
    let born = born_probabilities(psi, setup)?;
    let outcomes = outcome_regions(setup, &state.grid)?
        .iter()
        .zip(&born)
        .zip(&setup.outcomes)
        .map(|((q, b), o)| {
            let w = world_probability(&rho, q)?;
            Ok(OutcomeComparison { value: o.value, worlds: w, born: *b, difference: (w - b).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let residual = 1.0 - outcomes.iter().map(|o| o.worlds).sum::<f64>();
    Ok(WorldOutcomes { outcomes, residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseOptions {
    /// Physics after the measurement.
    pub params: PhysicsParams,
    pub horizon: f64,
    pub dt_step: f64,
    pub frame_stride: usize,
    pub dt_traj: f64,
    /// Refuse starting points where another pointer is not negligible.
    #[serde(default = "yes")]
    pub check_dominance: bool,
    #[serde(default = "dominance_limit")]
    pub dominance_limit: f64,
}

fn yes() -> bool {
    true
}

fn dominance_limit() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub outcome: usize,
    pub start: Vec<f64>,
    /// `max_{a' != a} |eta_a'(z)| / |eta_a(z)|` at the start.
    pub dominance: f64,
    pub max_distance: f64,
    /// `max_distance` over the smallest grid spacing.
    pub max_distance_spacings: f64,
    pub full_completed: bool,
    pub collapsed_completed: bool,
    #[serde(skip)]
    pub full: Option<Trajectory>,
    #[serde(skip)]
    pub collapsed: Option<Trajectory>,
}

/// Follows the world starting at `q_bar` under the uncollapsed state and
/// under `(Pi_a (x) 1) Psi'` alone, and reports how far apart they get.
pub fn subjective_collapse_compare(
    state: &WaveField,
    setup: &MeasurementSetup,
    outcome: usize,
    q_bar: Point,
    options: &CollapseOptions,
) -> Result<CollapseReport> {
    let grid = &state.grid;
    setup.validate(grid)?;
    if outcome >= setup.outcomes.len() {
        return Err(Error::IndexOutOfRange { index: outcome, min: 0, max: setup.outcomes.len() - 1 });
    }
    let pointer = grid.axis_grid(1);
    let (lo, hi) = setup.pointer_interval(outcome, &pointer);
    let o = &setup.outcomes[outcome];
    if !(q_bar[0] > o.lo && q_bar[0] < o.hi && q_bar[1] > lo && q_bar[1] < hi) {
        return Err(Error::Precondition(format!(
            "start point {q_bar:?} is not strictly inside Q_{outcome} = S x [{lo:.4}, {hi:.4})"
        )));
    }
    let eta = |a: usize| {
        let d = q_bar[1] - setup.shift(a);
        -d * d / (4.0 * setup.sigma_z * setup.sigma_z)
    };
    let dominance = (0..setup.outcomes.len()).filter(|a| *a != outcome).map(|a| (eta(a) - eta(outcome)).exp()).fold(0.0, f64::max);
    if options.check_dominance && dominance >= options.dominance_limit {
        return Err(Error::Precondition(format!(
            "start point lies where branches overlap: pointer amplitude ratio {dominance:.3e} >= {:.1e}",
            options.dominance_limit
        )));
    }
    let report = branch_decompose(state, setup)?;
    let collapsed = report.fields[outcome].normalized()?;
    if ComplexSampler::new(&collapsed).sample(&q_bar)?.norm_sqr() == 0.0 {
        return Err(Error::Precondition("start point carries no amplitude of its branch".into()));
    }
    let steps = (options.horizon / options.dt_step).round() as usize;
    let run = |psi: &WaveField| -> Result<Trajectory> {
        let store = evolve(psi, &options.params, options.dt_step, steps, options.frame_stride)?;
        BohmFlow::new(&store).integrate(0, q_bar, options.dt_traj)
    };
    let full = run(&state.normalized()?)?;
    let coll = run(&collapsed)?;
    let max_distance = full.points.iter().zip(&coll.points).map(|(a, b)| distance(a, b, 2)).fold(0.0, f64::max);
    let h = grid.spacing(0).min(grid.spacing(1));
    Ok(CollapseReport {
        outcome,
        start: q_bar.to_vec(),
        dominance,
        max_distance,
        max_distance_spacings: max_distance / h,
        full_completed: full.is_completed(),
        collapsed_completed: coll.is_completed(),
        full: Some(full),
        collapsed: Some(coll),
    })
}

/// Total world amount before (`psi (x) eta_R`) and after the coupling.
pub fn amount_change(psi: &WaveField, setup: &MeasurementSetup, after: &WaveField) -> Result<f64> {
    let before = ready_state(psi, setup, &after.grid)?.norm_sqr();
    Ok((after.norm_sqr() - before).abs() / before)
}

/// Potential used after measurement in tests and scenarios that need none.
pub fn free_params(pointer_mass: f64) -> PhysicsParams {
    PhysicsParams { hbar: 1.0, masses: vec![1.0, pointer_mass], potential: Potential::Free }
}
