//! Runs a scenario: prepare the initial state, propagate, then evaluate
//! each analysis against its thresholds.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use continuum_core::configspace::make_state;
use continuum_core::hydrodynamics::{continuity_residual, current, density, FlowFrame};
use continuum_core::measure::{
    induced_density, pushforward_measure, substantial_amount, substantial_flow, world_probability, AxisBox, LineDensity,
    LineMap, Preimage, Region,
};
use continuum_core::measurement::{
    amount_change, branch_decompose, dynamical_measure, impulsive_measure, outcome_probability_via_worlds,
    subjective_collapse_compare, CollapseOptions, MeasurementSetup,
};
use continuum_core::miw::{
    frequency_convergence, newtonian_trajectories, quantization_check, quantization_check_phase, sample_worlds, ClosedLoop,
};
use continuum_core::propagator::{evolve, expected_energy};
use continuum_core::worlds::{
    check_no_crossing, pushforward_density, trajectory_function, BohmFlow, DensityLattice, Seeding, TrajectoryBundle,
};
use continuum_core::{FrameStore, Grid, PhysicsParams, StateRecipe, WaveField};

use crate::config::{
    Analysis, CollapseSpec, EquivarianceSpec, FrameChoice, FrameOutput, LoopRoute, LoopSpec, MeasurementRoute, RegionSpec,
    ScenarioConfig, SurfaceSpec, TrajectoryOracle,
};
use crate::summary::{Recorder, RunSummary};

pub const NORM_TOLERANCE: f64 = 1e-8;
pub const ENERGY_TOLERANCE: f64 = 1e-6;
pub const CONTINUITY_ORDER_TOLERANCE: f64 = 0.3;
pub const ORACLE_TOLERANCE: f64 = 1e-3;
pub const STATIC_TOLERANCE: f64 = 1e-8;
pub const NEWTONIAN_TOLERANCE: f64 = 1e-3;
pub const EQUIVARIANCE_TOLERANCE: f64 = 0.02;
pub const BORN_TOLERANCE: f64 = 1e-3;
pub const COLLAPSE_TOLERANCE: f64 = 1e-3;
pub const CONTROL_FACTOR: f64 = 10.0;
pub const MIW_SLOPE_TOLERANCE: f64 = 0.15;
pub const TOY_TOLERANCE: f64 = 1e-6;
pub const TOY_DENSITY_TOLERANCE: f64 = 1e-3;
pub const QUANTIZATION_TOLERANCE: f64 = 1e-3;
pub const SURFACE_BALANCE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Threshold overrides; these win over the scenario file.
    pub tolerances: BTreeMap<String, f64>,
    /// Write frames, trajectories, tables and the summary.
    pub write_artifacts: bool,
}

impl RunOptions {
    pub fn in_memory() -> Self {
        RunOptions::default()
    }
}

struct RunContext<'a> {
    config: &'a ScenarioConfig,
    grid: Grid,
    params: PhysicsParams,
    seed: u64,
    out: Option<PathBuf>,
}

impl RunContext<'_> {
    fn artifact(&self, name: &str) -> Result<Option<BufWriter<File>>> {
        match &self.out {
            Some(dir) => {
                let path = dir.join(name);
                Ok(Some(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?)))
            }
            None => Ok(None),
        }
    }
}

/// Default output directory of a scenario.
pub fn output_dir(config: &ScenarioConfig, options: &RunOptions) -> PathBuf {
    options
        .out_dir
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| Path::new("runs").join(&config.name))
}

/// Validates and runs `config`. Configuration problems are errors;
/// numerical failures are recorded in the summary as failed checks.
pub fn run_scenario(config: &ScenarioConfig, options: &RunOptions) -> Result<RunSummary> {
    let started = Instant::now();
    let notes = config.validate()?;
    let seed = options.seed.unwrap_or(config.seed);
    let mut overrides = config.tolerances.clone();
    overrides.extend(options.tolerances.clone());
    let out = if options.write_artifacts {
        let dir = output_dir(config, options);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Some(dir)
    } else {
        None
    };
    let ctx = RunContext { config, grid: config.grid()?, params: config.physics.clone(), seed, out };
    let mut summary = RunSummary::new(&config.name, seed);
    summary.warnings.extend(notes);

    let counts = config.analysis.iter().fold(BTreeMap::new(), |mut m, a| {
        *m.entry(a.kind()).or_insert(0usize) += 1;
        m
    });
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let suffixes: Vec<String> = config
        .analysis
        .iter()
        .map(|a| {
            let n = seen.entry(a.kind()).or_insert(0);
            *n += 1;
            if counts[a.kind()] > 1 {
                format!("_{}", *n - 1)
            } else {
                String::new()
            }
        })
        .collect();

    let psi0 = match config.analysis.iter().zip(&suffixes).find(|(a, _)| matches!(a, Analysis::Measurement { .. })) {
        Some((Analysis::Measurement { setup, route, steps, collapse }, suffix)) => {
            let mut rec = Recorder { summary: &mut summary, overrides: &overrides, analysis: "measurement".into(), suffix: suffix.clone() };
            match measurement(&ctx, &mut rec, setup, *route, *steps, collapse.as_ref())? {
                Some(state) => state,
                None => return finish(summary, &ctx, started),
            }
        }
        _ => make_state(&ctx.grid, &config.state, &ctx.params).context("building the initial state")?,
    };

    let run = &config.run;
    let store = match evolve(&psi0, &ctx.params, run.dt_step, run.n_steps, run.frame_stride) {
        Ok(s) => s,
        Err(e) => {
            let mut rec = Recorder { summary: &mut summary, overrides: &overrides, analysis: "propagation".into(), suffix: String::new() };
            rec.fail(&e);
            rec.at_most("norm_drift", f64::NAN, NORM_TOLERANCE);
            return finish(summary, &ctx, started);
        }
    };
    {
        let mut rec = Recorder { summary: &mut summary, overrides: &overrides, analysis: "propagation".into(), suffix: String::new() };
        conservation(&ctx, &mut rec, &store)?;
    }

    for (analysis, suffix) in config.analysis.iter().zip(&suffixes) {
        let mut rec = Recorder { summary: &mut summary, overrides: &overrides, analysis: analysis.kind().into(), suffix: suffix.clone() };
        match analysis {
            Analysis::Continuity { levels } => continuity(&ctx, &mut rec, &store, *levels)?,
            Analysis::Bundle { seeding, collision_radius, oracle, newtonian, equivariance } => {
                bundle(&ctx, &mut rec, &store, seeding, *collision_radius, oracle.as_ref(), *newtonian, equivariance.as_ref(), suffix)?
            }
            Analysis::Measure { regions, surfaces } => measure(&ctx, &mut rec, &store, regions, surfaces)?,
            Analysis::Measurement { .. } => {}
            Analysis::Miw { ks, seeds, regions } => miw(&ctx, &mut rec, &store, ks, seeds, regions, suffix)?,
            Analysis::ToyModel { a_values, cells } => toy_model(&mut rec, a_values, *cells)?,
            Analysis::Quantization { path, expected, route, frame } => {
                quantization(&ctx, &mut rec, &store, path, *expected, *route, *frame)?
            }
        }
    }
    finish(summary, &ctx, started)
}

fn finish(mut summary: RunSummary, ctx: &RunContext, started: Instant) -> Result<RunSummary> {
    summary.runtime_seconds = started.elapsed().as_secs_f64();
    if let Some(dir) = &ctx.out {
        summary.write_json(&dir.join("summary.json"))?;
    }
    Ok(summary)
}

fn conservation(ctx: &RunContext, rec: &mut Recorder, store: &FrameStore) -> Result<()> {
    rec.at_most("norm_drift", store.norm_drift(), NORM_TOLERANCE);
    let whole = Region::whole(&ctx.grid);
    let amounts: Vec<f64> =
        store.frames.iter().map(|f| substantial_amount(&density(f), &whole)).collect::<continuum_core::Result<_>>()?;
    let drift = amounts.iter().map(|a| (a - amounts[0]).abs() / amounts[0]).fold(0.0, f64::max);
    rec.at_most("world_amount_drift", drift, NORM_TOLERANCE);
    let energies: Vec<f64> =
        store.frames.iter().map(|f| expected_energy(f, &ctx.params)).collect::<continuum_core::Result<_>>()?;
    let scale = energies[0].abs().max(f64::MIN_POSITIVE);
    let e_drift = energies.iter().map(|e| (e - energies[0]).abs() / scale).fold(0.0, f64::max);
    rec.info("energy", energies[0]);
    rec.at_most("energy_drift", e_drift, ENERGY_TOLERANCE);
    rec.info("frames", store.len() as f64);

    let frames = match ctx.config.run.frames {
        FrameOutput::All => Some(store.clone()),
        FrameOutput::Endpoints => {
            let mut s = store.clone();
            s.frames = vec![store.frame(0).clone(), store.frame(store.len() - 1).clone()];
            Some(s)
        }
        FrameOutput::None => None,
    };
    if let (Some(s), Some(w)) = (frames, ctx.artifact("frames.ndjson")?) {
        s.write_ndjson(w)?;
    }
    if ctx.grid.dim() == 1 {
        if let Some(w) = ctx.artifact("flow_final.csv")? {
            FlowFrame::compute(store.frame(store.len() - 1), &ctx.params, ctx.config.run.node_fraction, true).write_csv(w)?;
        }
    }
    Ok(())
}

/// Grid with `factor` times the points on every axis.
fn refined_grid(grid: &Grid, factor: usize) -> Result<Grid> {
    let extents: Vec<(f64, f64)> = (0..grid.dim()).map(|a| (grid.min(a), grid.max(a))).collect();
    let n: Vec<usize> = (0..grid.dim()).map(|a| grid.npoints(a) * factor).collect();
    Ok(Grid::new(&extents, &n)?)
}

fn continuity(ctx: &RunContext, rec: &mut Recorder, store: &FrameStore, levels: usize) -> Result<()> {
    if ctx.config.measurement().is_some() {
        rec.fail("continuity refinement needs the initial state recipe on the full grid");
        return Ok(());
    }
    let run = &ctx.config.run;
    let probe = (store.len() - 1) / 2;
    let mut norms = Vec::new();
    for level in 0..levels {
        let factor = 1usize << level;
        let (residual, time) = if level == 0 {
            let r = continuity_residual(store, probe.max(1))?;
            (r.l2_norm, r.time)
        } else {
            let grid = refined_grid(&ctx.grid, factor)?;
            let psi = make_state(&grid, &ctx.config.state, &ctx.params)?;
            let s = match evolve(&psi, &ctx.params, run.dt_step, run.n_steps, run.frame_stride / factor) {
                Ok(s) => s,
                Err(e) => {
                    rec.fail(&e);
                    return Ok(());
                }
            };
            let r = continuity_residual(&s, probe.max(1) * factor)?;
            (r.l2_norm, r.time)
        };
        rec.info(&format!("continuity_residual_level{level}"), residual);
        norms.push((factor, time, residual));
    }
    let mut rows = Vec::new();
    for (level, w) in norms.windows(2).enumerate() {
        let order = (w[0].2 / w[1].2).log2();
        rec.within(&format!("continuity_order_level{}", level + 1), order, 2.0, CONTINUITY_ORDER_TOLERANCE);
    }
    for (factor, time, residual) in &norms {
        rows.push(BTreeMap::from([
            ("refinement".to_string(), *factor as f64),
            ("time".to_string(), *time),
            ("l2_norm".to_string(), *residual),
        ]));
    }
    rec.table("continuity", rows);
    Ok(())
}

/// Offsets a density-sampling seed by the run seed.
fn seeded(seeding: &Seeding, seed: u64) -> Seeding {
    match seeding {
        Seeding::DensitySampled { count, seed: s } => Seeding::DensitySampled { count: *count, seed: s.wrapping_add(seed) },
        other => other.clone(),
    }
}

/// Position at `t` of the world starting at `x0` in a free Gaussian.
fn free_gaussian_oracle(recipe: &StateRecipe, params: &PhysicsParams, axis: usize, x0: f64, t: f64) -> f64 {
    let StateRecipe::Gaussian { center, sigma, momentum } = recipe else { unreachable!("validated") };
    let (c, s) = (center[axis], sigma[axis]);
    let k = momentum.get(axis).copied().unwrap_or(0.0);
    let m = params.mass(axis);
    let v = params.hbar * k / m;
    let tau = params.hbar * t / (2.0 * m * s * s);
    c + v * t + (x0 - c) * (1.0 + tau * tau).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn bundle(
    ctx: &RunContext,
    rec: &mut Recorder,
    store: &FrameStore,
    seeding: &Seeding,
    collision_radius: f64,
    oracle: Option<&TrajectoryOracle>,
    newtonian: bool,
    equivariance: Option<&EquivarianceSpec>,
    suffix: &str,
) -> Result<()> {
    let run = &ctx.config.run;
    let flow = BohmFlow::with_node_fraction(store, run.node_fraction);
    let bundle = match TrajectoryBundle::integrate(&flow, seeded(seeding, ctx.seed), run.dt_traj) {
        Ok(b) => b,
        Err(e) => {
            rec.fail(&e);
            rec.at_most("crossing_violations", f64::NAN, 0.0);
            return Ok(());
        }
    };
    let dim = ctx.grid.dim();
    rec.info("worlds", bundle.len() as f64);
    rec.info("aborted_near_node", bundle.aborted() as f64);
    let crossing = check_no_crossing(&bundle, collision_radius);
    rec.at_most("crossing_violations", crossing.violations.len() as f64, 0.0);
    if let Some(w) = ctx.artifact(&format!("trajectories{suffix}.ndjson"))? {
        bundle.write_ndjson(w)?;
    }
    if let Some(w) = ctx.artifact(&format!("trajectories{suffix}.csv"))? {
        bundle.write_csv(w)?;
    }

    match oracle {
        Some(TrajectoryOracle::FreeGaussian) => {
            let mut worst: f64 = 0.0;
            let mut at_end: f64 = 0.0;
            for tr in &bundle.trajectories {
                for (t, p) in tr.times.iter().zip(&tr.points) {
                    for a in 0..dim {
                        let err = (p[a] - free_gaussian_oracle(&ctx.config.state, &ctx.params, a, tr.initial[a], *t)).abs();
                        worst = worst.max(err);
                        if *t == store.end_time() {
                            at_end = at_end.max(err);
                        }
                    }
                }
            }
            rec.at_most("trajectory_oracle_error", worst, ORACLE_TOLERANCE);
            rec.at_most("trajectory_oracle_error_final", at_end, ORACLE_TOLERANCE);
        }
        Some(TrajectoryOracle::Static) => {
            let worst = bundle
                .trajectories
                .iter()
                .flat_map(|tr| tr.points.iter().map(move |p| (0..dim).map(|a| (p[a] - tr.initial[a]).abs()).fold(0.0, f64::max)))
                .fold(0.0, f64::max);
            rec.at_most("trajectory_static_error", worst, STATIC_TOLERANCE);
        }
        None => {}
    }

    if newtonian {
        let initials: Vec<_> = bundle.trajectories.iter().map(|t| t.initial).collect();
        match newtonian_trajectories(store, &initials, run.dt_traj) {
            Ok(ens) => {
                let mut worst: f64 = 0.0;
                let mut compared = 0usize;
                for (n, b) in ens.worlds.iter().zip(&bundle.trajectories) {
                    if n.is_completed() && b.is_completed() {
                        worst = worst.max(n.max_distance(b));
                        compared += 1;
                    }
                }
                rec.info("newtonian_compared", compared as f64);
                rec.at_most("newtonian_deviation", worst, NEWTONIAN_TOLERANCE);
            }
            Err(e) => {
                rec.fail(&e);
                rec.at_most("newtonian_deviation", f64::NAN, NEWTONIAN_TOLERANCE);
            }
        }
    }

    if let Some(eq) = equivariance {
        let l1 = match equivariance_l1(&flow, store, eq, run.dt_traj, rec) {
            Ok(v) => v,
            Err(e) => {
                rec.fail(&e);
                f64::NAN
            }
        };
        rec.at_most("equivariance_l1", l1, EQUIVARIANCE_TOLERANCE);
        if eq.refinement_check {
            let finer = EquivarianceSpec { refine: eq.refine * 2, ..eq.clone() };
            let l1_fine = equivariance_l1(&flow, store, &finer, run.dt_traj, rec)?;
            rec.info("equivariance_l1_refined", l1_fine);
            rec.at_most("equivariance_refinement_ratio", l1_fine / l1, 1.0);
        }
    }
    Ok(())
}

fn equivariance_l1(flow: &BohmFlow, store: &FrameStore, eq: &EquivarianceSpec, dt_traj: f64, rec: &mut Recorder) -> Result<f64> {
    let lattice = DensityLattice::new(store.frame(0), eq.refine, eq.cutoff);
    let map = trajectory_function(flow, &lattice.points, dt_traj)?;
    let last = store.len() - 1;
    let push = pushforward_density(&lattice, &map.at_frame(last), store.grid(), store.end_time())?;
    if let Some(w) = push.warning {
        rec.warn(w);
    }
    if push.lost_mass > 0.0 {
        rec.warn(format!("{:.3e} of the lattice weight was lost near nodes", push.lost_mass));
    }
    Ok(push.density.l1_distance(&density(store.frame(last)))?)
}

fn measure(ctx: &RunContext, rec: &mut Recorder, store: &FrameStore, regions: &[RegionSpec], surfaces: &[SurfaceSpec]) -> Result<()> {
    let first = density(store.frame(0));
    let last = density(store.frame(store.len() - 1));
    for named in regions {
        let region = named.build(&ctx.grid)?;
        rec.info(&format!("amount_{}_initial", named.name), substantial_amount(&first, &region)?);
        rec.info(&format!("amount_{}_final", named.name), substantial_amount(&last, &region)?);
        rec.info(&format!("probability_{}_final", named.name), world_probability(&last, &region)?);
    }
    // amount crossing a surface over the run against the change on its far side
    for named in surfaces {
        let surface = named.build();
        let mut lo = vec![f64::NEG_INFINITY; ctx.grid.dim()];
        let mut hi = vec![f64::INFINITY; ctx.grid.dim()];
        if surface.orientation > 0 {
            lo[surface.axis] = surface.level;
        } else {
            hi[surface.axis] = surface.level;
        }
        let side = Region::new(&ctx.grid, vec![AxisBox::new(&lo, &hi)])?;
        let change = substantial_amount(&last, &side)? - substantial_amount(&first, &side)?;
        let flows: Vec<f64> = store
            .frames
            .iter()
            .map(|f| substantial_flow(&current(f, &ctx.params), &surface))
            .collect::<continuum_core::Result<_>>()?;
        let crossed: f64 = flows.windows(2).map(|w| 0.5 * (w[0] + w[1]) * store.dt_frame).sum();
        rec.info(&format!("flow_{}", named.name), crossed);
        rec.at_most(&format!("flow_balance_{}", named.name), (crossed - change).abs(), SURFACE_BALANCE_TOLERANCE);
    }
    Ok(())
}

/// Prepares the post-measurement state and records the measurement
/// checks. Returns `None` when the measurement itself failed.
fn measurement(
    ctx: &RunContext,
    rec: &mut Recorder,
    setup: &MeasurementSetup,
    route: MeasurementRoute,
    steps: usize,
    collapse: Option<&CollapseSpec>,
) -> Result<Option<WaveField>> {
    let system_grid = ctx.grid.axis_grid(0);
    let system_params = PhysicsParams {
        hbar: ctx.params.hbar,
        masses: vec![ctx.params.mass(0)],
        potential: ctx.params.potential.clone(),
    };
    let psi = make_state(&system_grid, &ctx.config.state, &system_params).context("building the system state")?;
    let measured = impulsive_measure(&psi, setup, &ctx.grid)?;
    if let Some(w) = &measured.warning {
        rec.warn(w.clone());
    }
    let state = match route {
        MeasurementRoute::Impulsive => measured.state.clone(),
        MeasurementRoute::Dynamical => {
            let free = PhysicsParams { potential: Default::default(), ..ctx.params.clone() };
            let s = dynamical_measure(&psi, setup, &ctx.grid, &free, steps, false)?;
            rec.info("dynamical_vs_impulsive", s.distance(&measured.state)?);
            s
        }
    };
    let report = branch_decompose(&state, setup)?;
    rec.at_most("branch_overlap", report.branch_overlap, 1e-12);
    rec.info("pointer_overlap", report.pointer_overlap);
    if report.flagged {
        rec.warn(format!("pointer overlap {:.3e} exceeds 1e-2", report.pointer_overlap));
    }
    let coverage = report.branches.iter().map(|b| b.coverage).fold(1.0, f64::min);
    rec.info("pointer_coverage_min", coverage);
    rec.at_most("measurement_amount_change", amount_change(&psi, setup, &state)?, NORM_TOLERANCE);
    let worlds = outcome_probability_via_worlds(&state, &psi, setup)?;
    let mut rows = Vec::new();
    for (a, o) in worlds.outcomes.iter().enumerate() {
        rec.info(&format!("p_born_{a}"), o.born);
        rec.info(&format!("p_worlds_{a}"), o.worlds);
        rec.at_most(&format!("born_gap_{a}"), o.difference, BORN_TOLERANCE);
        rows.push(BTreeMap::from([
            ("outcome".to_string(), o.value),
            ("p_worlds".to_string(), o.worlds),
            ("p_born".to_string(), o.born),
            ("weight".to_string(), report.branches[a].weight),
            ("coverage".to_string(), report.branches[a].coverage),
        ]));
    }
    rec.info("worlds_residual", worlds.residual);
    rec.table("outcomes", rows);

    if let Some(c) = collapse {
        let options = CollapseOptions {
            params: ctx.params.clone(),
            horizon: c.horizon,
            dt_step: c.dt_step,
            frame_stride: c.frame_stride,
            dt_traj: c.dt_traj,
            check_dominance: true,
            dominance_limit: 1e-6,
        };
        let separated = match subjective_collapse_compare(&state, setup, c.outcome, c.start, &options) {
            Ok(r) => r,
            Err(e) => {
                rec.fail(&e);
                rec.at_most("collapse_divergence_spacings", f64::NAN, COLLAPSE_TOLERANCE);
                return Ok(Some(state));
            }
        };
        if !(separated.full_completed && separated.collapsed_completed) {
            rec.warn("a collapse trajectory stopped near a node");
        }
        rec.info("collapse_dominance", separated.dominance);
        rec.at_most("collapse_divergence_spacings", separated.max_distance_spacings, COLLAPSE_TOLERANCE);

        // same start, pointers only `control_separation` sigma_z apart
        let mut control = setup.clone();
        control.coupling *= c.control_separation * setup.sigma_z / setup.min_separation();
        let control_state = impulsive_measure(&psi, &control, &ctx.grid)?.state;
        let control_options = CollapseOptions { check_dominance: false, ..options };
        let mut start = c.start;
        start[1] = control.shift(c.outcome);
        match subjective_collapse_compare(&control_state, &control, c.outcome, start, &control_options) {
            Ok(r) => {
                rec.info("collapse_control_spacings", r.max_distance_spacings);
                let ratio = r.max_distance_spacings / separated.max_distance_spacings.max(1e-15);
                rec.at_least("collapse_control_ratio", ratio, CONTROL_FACTOR);
            }
            Err(e) => {
                rec.fail(&e);
                rec.at_least("collapse_control_ratio", f64::NAN, CONTROL_FACTOR);
            }
        }
    }
    Ok(Some(state))
}

fn miw(
    ctx: &RunContext,
    rec: &mut Recorder,
    store: &FrameStore,
    ks: &[usize],
    seeds: &[u64],
    regions: &[RegionSpec],
    suffix: &str,
) -> Result<()> {
    let rho = density(store.frame(0));
    let built: Vec<Region> = regions.iter().map(|r| r.build(&ctx.grid)).collect::<Result<_, _>>()?;
    let expected: Vec<f64> = built.iter().map(|r| world_probability(&rho, r)).collect::<continuum_core::Result<_>>()?;
    let seeds: Vec<u64> = seeds.iter().map(|s| s.wrapping_add(ctx.seed)).collect();
    let study = frequency_convergence(&expected, &built, ks, &seeds, |k, s| sample_worlds(&rho, k, s))?;
    for (named, p) in regions.iter().zip(&expected) {
        rec.info(&format!("miw_expected_{}", named.name), *p);
    }
    let spread = expected.iter().map(|p| p * (1.0 - p)).fold(0.0, f64::max);
    for (k, e) in &study.rms {
        rec.at_most(&format!("miw_rms_error_k{k}"), *e, 3.0 * (spread / *k as f64).sqrt());
    }
    rec.within("miw_slope", study.slope, -0.5, MIW_SLOPE_TOLERANCE);
    rec.table(
        "miw_convergence",
        study
            .rows
            .iter()
            .map(|r| BTreeMap::from([("k".to_string(), r.k as f64), ("seed".to_string(), r.seed as f64), ("error".to_string(), r.error)]))
            .collect(),
    );
    if let Some(w) = ctx.artifact(&format!("miw_convergence{suffix}.csv"))? {
        study.write_csv(w)?;
    }
    Ok(())
}

fn toy_model(rec: &mut Recorder, a_values: &[f64], cells: usize) -> Result<()> {
    let rho = LineDensity::uniform(0.0, 1.0, cells);
    let square = |x: f64| x * x;
    let map = LineMap { f: &square, preimage: Preimage::Monotone };
    for a in a_values {
        let p = pushforward_measure(&rho, &map, 0.0, *a)?;
        rec.within(&format!("toy_probability_{a}"), p, a.sqrt(), TOY_TOLERANCE);
    }
    let mut worst: f64 = 0.0;
    for i in 0..=99 {
        let y = 0.01 + 0.99 * i as f64 / 99.0;
        let d = induced_density(&rho, &map, y, 1e-3 * y)?;
        worst = worst.max((d - 0.5 / y.sqrt()).abs());
    }
    rec.at_most("toy_density_error", worst, TOY_DENSITY_TOLERANCE);
    Ok(())
}

fn quantization(
    ctx: &RunContext,
    rec: &mut Recorder,
    store: &FrameStore,
    path: &LoopSpec,
    expected: i64,
    route: LoopRoute,
    frame: FrameChoice,
) -> Result<()> {
    let psi = match frame {
        FrameChoice::Initial => store.frame(0),
        FrameChoice::Final => store.frame(store.len() - 1),
    };
    let path = match path {
        LoopSpec::Circle { center, radius, samples, turns } => ClosedLoop::circle(*center, *radius, *samples, *turns, 0.0),
        LoopSpec::Segment { a, b, samples } => ClosedLoop::segment(*a, *b, *samples),
    };
    let report = match route {
        LoopRoute::Velocity => quantization_check(psi, &ctx.params, &path),
        LoopRoute::Phase => quantization_check_phase(psi, &path),
    };
    match report {
        Ok(r) => {
            rec.info("quantization_winding", r.winding as f64);
            rec.info("quantization_residual", r.residual);
            rec.within("quantization_ratio", r.ratio, expected as f64, QUANTIZATION_TOLERANCE);
        }
        Err(e) => {
            rec.fail(&e);
            rec.within("quantization_ratio", f64::NAN, expected as f64, QUANTIZATION_TOLERANCE);
        }
    }
    Ok(())
}
