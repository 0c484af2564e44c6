//! Amounts of worlds in regions, world probabilities, signed flows through
//! surfaces, and measures pushed forward through maps of the line.

use serde::{Deserialize, Serialize};

use crate::configspace::Grid;
use crate::hydrodynamics::{ScalarField, VectorField};
use crate::{Error, Point, Result};

/// Axis-aligned box, half-open per axis. Infinite bounds are clipped to the
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Self {
        AxisBox { lo: lo.to_vec(), hi: hi.to_vec() }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.lo.iter().zip(&self.hi).enumerate().all(|(a, (lo, hi))| p[a] >= *lo && p[a] < *hi)
    }
}

/// Union of boxes on a grid. Membership is decided at grid points, so
/// overlapping boxes are counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    grid: Grid,
    boxes: Vec<AxisBox>,
    mask: Vec<bool>,
}

impl Region {
    pub fn new(grid: &Grid, boxes: Vec<AxisBox>) -> Result<Self> {
        let dim = grid.dim();
        let mut clipped = Vec::with_capacity(boxes.len());
        for (n, b) in boxes.into_iter().enumerate() {
            if b.lo.len() != dim || b.hi.len() != dim {
                return Err(Error::InvalidRegion(format!("box {n} has {} bounds on a {dim}-dimensional grid", b.lo.len())));
            }
            let mut c = b.clone();
            for a in 0..dim {
                let (min, max) = (grid.min(a), grid.max(a));
                let (lo, hi) = (b.lo[a], b.hi[a]);
                if lo.is_nan() || hi.is_nan() || lo >= hi {
                    return Err(Error::InvalidRegion(format!("box {n}: empty or invalid range [{lo}, {hi}) on axis {a}")));
                }
                let outside = (lo.is_finite() && (lo < min || lo > max)) || (hi.is_finite() && (hi > max || hi < min));
                if outside {
                    return Err(Error::InvalidRegion(format!(
                        "box {n}: [{lo}, {hi}) on axis {a} leaves the grid extent [{min}, {max})"
                    )));
                }
                c.lo[a] = lo.max(min);
                c.hi[a] = hi.min(max);
            }
            clipped.push(c);
        }
        let mask = (0..grid.len()).map(|i| {
            let p = grid.point(i);
            clipped.iter().any(|b| b.contains(&p))
        });
        let mask = mask.collect();
        Ok(Region { grid: grid.clone(), boxes: clipped, mask })
    }

    pub fn whole(grid: &Grid) -> Self {
        Region { grid: grid.clone(), boxes: Vec::new(), mask: vec![true; grid.len()] }
    }

    pub fn empty(grid: &Grid) -> Self {
        Region { grid: grid.clone(), boxes: Vec::new(), mask: vec![false; grid.len()] }
    }

    pub fn from_mask(grid: &Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Region { grid: grid.clone(), boxes: Vec::new(), mask })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cell_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Membership of an arbitrary point by the cell that owns it, so that
    /// counting points agrees with the Riemann sum over cells.
    pub fn contains_point(&self, p: &Point) -> bool {
        if !self.grid.contains(p) {
            return false;
        }
        let mut m = [0usize; 2];
        for (a, slot) in m.iter_mut().enumerate().take(self.grid.dim()) {
            *slot = (((p[a] - self.grid.min(a)) / self.grid.spacing(a)).floor() as usize).min(self.grid.npoints(a) - 1);
        }
        self.mask[self.grid.index(m)]
    }

    fn combine(&self, other: &Region, op: impl Fn(bool, bool) -> bool) -> Result<Region> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| op(*a, *b)).collect();
        let mut boxes = self.boxes.clone();
        boxes.extend(other.boxes.iter().cloned());
        Ok(Region { grid: self.grid.clone(), boxes, mask })
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Region) -> Result<Region> {
        let mut r = self.combine(other, |a, b| a && b)?;
        r.boxes.clear();
        Ok(r)
    }

    pub fn complement(&self) -> Region {
        Region { grid: self.grid.clone(), boxes: Vec::new(), mask: self.mask.iter().map(|m| !m).collect() }
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !(a & b))
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }
}

/// `mu(Q)`: Riemann sum of `rho` over grid points inside the region.
pub fn substantial_amount(rho: &ScalarField, region: &Region) -> Result<f64> {
    if rho.grid != region.grid {
        return Err(Error::GridMismatch);
    }
    let s: f64 = rho.values.iter().zip(&region.mask).filter(|(_, m)| **m).map(|(r, _)| r).sum();
    Ok(s * rho.grid.cell_volume())
}

/// `mu(Q) / mu(whole space)`.
pub fn world_probability(rho: &ScalarField, region: &Region) -> Result<f64> {
    let total = substantial_amount(rho, &Region::whole(&rho.grid))?;
    if !(total > 0.0) {
        return Err(Error::Precondition("total world amount is zero".into()));
    }
    Ok(substantial_amount(rho, region)? / total)
}

/// Raw amount and its proportion of the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Amount {
    pub raw: f64,
    pub proportion: f64,
}

pub fn calibrated_amount(rho: &ScalarField, region: &Region) -> Result<Amount> {
    Ok(Amount { raw: substantial_amount(rho, region)?, proportion: world_probability(rho, region)? })
}

/// Flat surface `q_axis = level`, crossed in the direction `orientation`
/// (+1 or -1). In 2D `bounds` limits the other coordinate; `None` spans the
/// grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub axis: usize,
    pub level: f64,
    #[serde(default = "positive")]
    pub orientation: i8,
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
}

fn positive() -> i8 {
    1
}

impl Surface {
    pub fn new(axis: usize, level: f64, orientation: i8) -> Self {
        Surface { axis, level, orientation, bounds: None }
    }

    pub fn reversed(&self) -> Self {
        Surface { orientation: -self.orientation, ..self.clone() }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.axis >= grid.dim() {
            return Err(Error::InvalidRegion(format!("surface axis {} on a {}-dimensional grid", self.axis, grid.dim())));
        }
        if self.orientation != 1 && self.orientation != -1 {
            return Err(Error::InvalidRegion(format!("surface orientation must be +1 or -1, got {}", self.orientation)));
        }
        let (min, max) = (grid.min(self.axis), grid.max(self.axis));
        if !(self.level >= min && self.level < max) {
            return Err(Error::InvalidRegion(format!("surface level {} outside [{min}, {max})", self.level)));
        }
        Ok(())
    }
}

/// `nu(F)`: oriented integral of the normal current over the surface, with
/// the current interpolated linearly to the level.
pub fn substantial_flow(j: &VectorField, surface: &Surface) -> Result<f64> {
    let grid = &j.grid;
    surface.validate(grid)?;
    let a = surface.axis;
    let u = (surface.level - grid.min(a)) / grid.spacing(a);
    let i0 = u.floor() as usize;
    let i1 = (i0 + 1) % grid.npoints(a);
    let w = u - i0 as f64;
    let comp = &j.components[a];
    let total = if grid.dim() == 1 {
        (1.0 - w) * comp[i0] + w * comp[i1]
    } else {
        let other = 1 - a;
        let mut s = 0.0;
        for m in 0..grid.npoints(other) {
            let c = grid.coord(other, m);
            if let Some([lo, hi]) = surface.bounds {
                if !(c >= lo && c < hi) {
                    continue;
                }
            }
            let idx = |i: usize| if a == 0 { grid.index([i, m]) } else { grid.index([m, i]) };
            s += (1.0 - w) * comp[idx(i0)] + w * comp[idx(i1)];
        }
        s * grid.spacing(other)
    };
    Ok(surface.orientation as f64 * total)
}

/// Density on an interval `[lo, hi)` given as constant values on equal
/// cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LineDensity {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl LineDensity {
    pub fn uniform(lo: f64, hi: f64, cells: usize) -> Self {
        LineDensity { lo, hi, values: vec![1.0 / (hi - lo); cells] }
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn(lo: f64, hi: f64, cells: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / cells as f64;
        LineDensity { lo, hi, values: (0..cells).map(|i| f(lo + (i as f64 + 0.5) * h)).collect() }
    }

    pub fn cell_width(&self) -> f64 {
        (self.hi - self.lo) / self.values.len() as f64
    }

    /// Mass of `[a, b)`, exact for the piecewise-constant density.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lo), b.min(self.hi));
        if a >= b {
            return 0.0;
        }
        let h = self.cell_width();
        let n = self.values.len();
        let ia = (((a - self.lo) / h).floor() as usize).min(n - 1);
        let ib = (((b - self.lo) / h).floor() as usize).min(n - 1);
        if ia == ib {
            return self.values[ia] * (b - a);
        }
        let mut m = self.values[ia] * (self.lo + (ia + 1) as f64 * h - a);
        m += self.values[ia + 1..ib].iter().sum::<f64>() * h;
        m + self.values[ib] * (b - (self.lo + ib as f64 * h))
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_width()
    }
}

/// How preimages of intervals under a map of the line are found.
pub enum Preimage<'a> {
    /// The map is monotone on the domain; inverted by bisection.
    Monotone,
    /// Closed-form inverse of a monotone map.
    Inverse(&'a dyn Fn(f64) -> f64),
    /// General preimage: intervals of `x` with `f(x)` in `[y0, y1)`.
    Custom(&'a dyn Fn(f64, f64) -> Vec<(f64, f64)>),
}

pub struct LineMap<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub preimage: Preimage<'a>,
}

impl LineMap<'_> {
    fn direction(&self, rho: &LineDensity) -> Result<f64> {
        let h = rho.cell_width();
        let nodes: Vec<f64> = (0..=rho.values.len()).map(|i| (self.f)(rho.lo + i as f64 * h)).collect();
        if nodes.windows(2).all(|w| w[1] > w[0]) {
            Ok(1.0)
        } else if nodes.windows(2).all(|w| w[1] < w[0]) {
            Ok(-1.0)
        } else {
            Err(Error::NonInvertible)
        }
    }

    /// Image of the domain for monotone maps, `None` for custom preimages.
    fn range(&self, rho: &LineDensity) -> Result<Option<(f64, f64)>> {
        if matches!(self.preimage, Preimage::Custom(_)) {
            return Ok(None);
        }
        self.direction(rho)?;
        let (a, b) = ((self.f)(rho.lo), (self.f)(rho.hi));
        Ok(Some((a.min(b), a.max(b))))
    }

    fn invert(&self, y: f64, rho: &LineDensity, dir: f64) -> f64 {
        let (mut a, mut b) = (rho.lo, rho.hi);
        let g = |x: f64| dir * ((self.f)(x) - y);
        if g(a) >= 0.0 {
            return a;
        }
        if g(b) <= 0.0 {
            return b;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if g(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    fn preimage_intervals(&self, rho: &LineDensity, y0: f64, y1: f64) -> Result<Vec<(f64, f64)>> {
        match &self.preimage {
            Preimage::Custom(p) => Ok(p(y0, y1)),
            Preimage::Inverse(inv) => {
                let dir = self.direction(rho)?;
                let (a, b) = (inv(y0), inv(y1));
                Ok(vec![if dir > 0.0 { (a, b) } else { (b, a) }])
            }
            Preimage::Monotone => {
                let dir = self.direction(rho)?;
                let (a, b) = (self.invert(y0, rho, dir), self.invert(y1, rho, dir));
                Ok(vec![if dir > 0.0 { (a, b) } else { (b, a) }])
            }
        }
    }
}

/// `mu(Y) = nu({x : f(x) in Y})` for `Y = [y0, y1)`.
pub fn pushforward_measure(rho_x: &LineDensity, map: &LineMap, y0: f64, y1: f64) -> Result<f64> {
    if !(y0 <= y1) {
        return Err(Error::InvalidRegion(format!("empty target interval [{y0}, {y1})")));
    }
    Ok(map.preimage_intervals(rho_x, y0, y1)?.iter().map(|(a, b)| rho_x.mass(*a, *b)).sum())
}

/// Density of the pushed-forward measure at `y`, as a second-order
/// difference of `mu` with step `dy`. One-sided within `dy` of the ends of
/// the range of a monotone map.
pub fn induced_density(rho_x: &LineDensity, map: &LineMap, y: f64, dy: f64) -> Result<f64> {
    if !(dy > 0.0) {
        return Err(Error::InvalidParams(format!("difference step must be positive, got {dy}")));
    }
    let mu = |a: f64, b: f64| pushforward_measure(rho_x, map, a, b);
    if let Some((lo, hi)) = map.range(rho_x)? {
        if y + dy > hi {
            // M(s) = mu([y - 2dy, s))
            let base = y - 2.0 * dy;
            return Ok((3.0 * mu(base, y)? - 4.0 * mu(base, y - dy)?) / (2.0 * dy));
        }
        if y - dy < lo {
            let top = y + 2.0 * dy;
            return Ok((3.0 * mu(y, top)? - 4.0 * mu(y + dy, top)?) / (2.0 * dy));
        }
    }
    Ok(mu(y - dy, y + dy)? / (2.0 * dy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{make_state, PhysicsParams, StateRecipe};
    use crate::hydrodynamics::{current, density};
    use crate::propagator::evolve;
    use proptest::prelude::*;
    use statrs::function::erf::erf;

    fn line(min: f64, max: f64, n: usize) -> Grid {
        Grid::new(&[(min, max)], &[n]).unwrap()
    }

    fn unit_gaussian(g: &Grid, k: f64) -> ScalarField {
        let p = PhysicsParams::natural(1);
        density(&make_state(g, &StateRecipe::Gaussian { center: vec![0.0], sigma: vec![1.0], momentum: vec![k] }, &p).unwrap())
    }

    fn interval(g: &Grid, lo: f64, hi: f64) -> Region {
        Region::new(g, vec![AxisBox::new(&[lo], &[hi])]).unwrap()
    }

    #[test]
    fn gaussian_amounts() {
        let g = line(-8.0, 8.0, 512);
        let rho = unit_gaussian(&g, 0.0);
        assert!((substantial_amount(&rho, &Region::whole(&g)).unwrap() - 1.0).abs() < 1e-12);
        let inner = substantial_amount(&rho, &interval(&g, -1.0, 1.0)).unwrap();
        assert!((inner - erf(1.0 / 2f64.sqrt())).abs() < 1e-4, "{inner}");
    }

    #[test]
    fn additivity_and_probabilities() {
        let g = line(-10.0, 10.0, 512);
        let rho = unit_gaussian(&g, 0.0);
        let a = interval(&g, -3.0, -1.0);
        let b = interval(&g, 0.5, 2.0);
        let ab = a.union(&b).unwrap();
        let sum = substantial_amount(&rho, &a).unwrap() + substantial_amount(&rho, &b).unwrap();
        assert!((substantial_amount(&rho, &ab).unwrap() - sum).abs() < 1e-15);

        assert_eq!(world_probability(&rho, &Region::whole(&g)).unwrap(), 1.0);
        // the grid point 0 sits on the boundary; symmetric halves exclude it
        let h = g.spacing(0);
        let right = interval(&g, h / 2.0, f64::INFINITY);
        let left = interval(&g, f64::NEG_INFINITY, -h / 2.0);
        let pr = world_probability(&rho, &right).unwrap();
        assert!((pr - world_probability(&rho, &left).unwrap()).abs() < 1e-12);
        let centre = rho.values[g.nearest_index(&[0.0, 0.0])] * h;
        assert!((pr - 0.5 * (1.0 - centre)).abs() < 1e-6);
        let scaled = rho.scaled(4.0);
        assert!((world_probability(&scaled, &right).unwrap() - pr).abs() < 1e-12);

        let zero = rho.scaled(0.0);
        assert!(world_probability(&zero, &right).is_err());
        assert_eq!(substantial_amount(&rho, &Region::empty(&g)).unwrap(), 0.0);
    }

    #[test]
    fn overlapping_boxes_count_once() {
        let g = line(-10.0, 10.0, 512);
        let rho = unit_gaussian(&g, 0.0);
        let merged = Region::new(&g, vec![AxisBox::new(&[-2.0], &[1.0]), AxisBox::new(&[0.0], &[2.0])]).unwrap();
        let single = interval(&g, -2.0, 2.0);
        assert_eq!(substantial_amount(&rho, &merged).unwrap(), substantial_amount(&rho, &single).unwrap());
    }

    #[test]
    fn invalid_regions_are_named() {
        let g = line(-10.0, 10.0, 64);
        let err = Region::new(&g, vec![AxisBox::new(&[0.0], &[1.0]), AxisBox::new(&[5.0], &[12.0])]).unwrap_err();
        assert!(err.to_string().contains("box 1"));
        assert!(Region::new(&g, vec![AxisBox::new(&[2.0], &[1.0])]).is_err());
    }

    #[test]
    fn plane_wave_flow_through_a_point() {
        let g = line(-4.0 * std::f64::consts::PI, 4.0 * std::f64::consts::PI, 256);
        let p = PhysicsParams::natural(1);
        let psi = make_state(&g, &StateRecipe::PlaneWave { k: vec![2.0], amplitude: 1.0 }, &p).unwrap();
        let j = current(&psi, &p);
        let s = Surface::new(0, 0.0, 1);
        let nu = substantial_flow(&j, &s).unwrap();
        assert!((nu - 2.0).abs() < 1e-10);
        assert_eq!(substantial_flow(&j, &s.reversed()).unwrap(), -nu);
    }

    #[test]
    fn plane_wave_flow_through_a_line_in_2d() {
        let l = 4.0 * std::f64::consts::PI;
        let g = Grid::new(&[(-l, l), (-6.0, 6.0)], &[64, 32]).unwrap();
        let p = PhysicsParams::natural(2);
        let psi = make_state(&g, &StateRecipe::PlaneWave { k: vec![1.0, 0.0], amplitude: 0.5 }, &p).unwrap();
        let j = current(&psi, &p);
        let s = Surface { axis: 0, level: 0.3, orientation: 1, bounds: Some([-3.0, 3.0]) };
        // 0.25 * 1 * (length of the bounded segment)
        assert!((substantial_flow(&j, &s).unwrap() - 0.25 * 6.0).abs() < 1e-10);
    }

    #[test]
    fn amount_beyond_a_point_changes_by_the_flow() {
        let g = line(-20.0, 20.0, 512);
        let p = PhysicsParams::natural(1);
        let psi = make_state(&g, &StateRecipe::Gaussian { center: vec![0.0], sigma: vec![1.0], momentum: vec![0.5] }, &p).unwrap();
        let store = evolve(&psi, &p, 1e-3, 3000, 10).unwrap();
        let h = g.spacing(0);
        // a cell boundary: the Riemann sum over [a, inf) then has a sharp edge at a
        let a = g.coord(0, 268) - h / 2.0;
        let region = interval(&g, a, f64::INFINITY);
        let surface = Surface::new(0, a, 1);
        let dt = store.dt_frame;
        let mut worst: f64 = 0.0;
        for k in 1..store.len() - 1 {
            let before = substantial_amount(&density(store.frame(k - 1)), &region).unwrap();
            let after = substantial_amount(&density(store.frame(k + 1)), &region).unwrap();
            let nu = substantial_flow(&current(store.frame(k), &p), &surface).unwrap();
            worst = worst.max(((after - before) / (2.0 * dt) - nu).abs() / nu.abs());
        }
        assert!(worst < 0.02, "{worst}");
    }

    #[test]
    fn squaring_map_on_the_unit_interval() {
        let rho = LineDensity::uniform(0.0, 1.0, 1000);
        let sq = |x: f64| x * x;
        let root = |y: f64| y.max(0.0).sqrt();
        for preimage in [Preimage::Monotone, Preimage::Inverse(&root)] {
            let map = LineMap { f: &sq, preimage };
            for a in [0.04, 0.25, 0.81] {
                assert!((pushforward_measure(&rho, &map, 0.0, a).unwrap() - a.sqrt()).abs() < 1e-6);
            }
            for i in 0..=99 {
                let y = 0.01 + 0.99 * i as f64 / 99.0;
                let d = induced_density(&rho, &map, y, 1e-3 * y).unwrap();
                assert!((d - 1.0 / (2.0 * y.sqrt())).abs() < 1e-3, "y={y}");
            }
        }
    }

    #[test]
    fn identity_and_non_invertible_maps() {
        let rho = LineDensity::from_fn(-1.0, 1.0, 400, |x| 0.75 * (1.0 - x * x));
        let id = |x: f64| x;
        let map = LineMap { f: &id, preimage: Preimage::Monotone };
        assert!((pushforward_measure(&rho, &map, -0.3, 0.55).unwrap() - rho.mass(-0.3, 0.55)).abs() < 1e-15);

        let sq = |x: f64| x * x;
        let bad = LineMap { f: &sq, preimage: Preimage::Monotone };
        assert!(matches!(pushforward_measure(&rho, &bad, 0.0, 0.25), Err(Error::NonInvertible)));
        let both = |y0: f64, y1: f64| {
            let (a, b) = (y0.max(0.0).sqrt(), y1.max(0.0).sqrt());
            vec![(-b, -a), (a, b)]
        };
        let custom = LineMap { f: &sq, preimage: Preimage::Custom(&both) };
        assert!((pushforward_measure(&rho, &custom, 0.0, 0.25).unwrap() - rho.mass(-0.5, 0.5)).abs() < 1e-15);

        let neg = |x: f64| -x;
        let flip = LineMap { f: &neg, preimage: Preimage::Monotone };
        assert!((pushforward_measure(&rho, &flip, 0.0, 0.5).unwrap() - rho.mass(-0.5, 0.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn monotone_in_the_region(lo in -9.0f64..0.0, w1 in 0.1f64..4.0, w2 in 0.0f64..4.0) {
            let g = line(-10.0, 10.0, 256);
            let rho = unit_gaussian(&g, 0.3);
            let small = interval(&g, lo, lo + w1);
            let big = interval(&g, lo, (lo + w1 + w2).min(10.0));
            prop_assert!(small.is_subset_of(&big));
            prop_assert!(substantial_amount(&rho, &small).unwrap() <= substantial_amount(&rho, &big).unwrap());
        }

        #[test]
        fn probability_is_scale_invariant(c in 1e-3f64..1e3, lo in -5.0f64..5.0) {
            let g = line(-10.0, 10.0, 256);
            let rho = unit_gaussian(&g, 0.0);
            let r = interval(&g, lo, 10.0);
            let p1 = world_probability(&rho, &r).unwrap();
            let p2 = world_probability(&rho.scaled(c), &r).unwrap();
            prop_assert!((p1 - p2).abs() < 1e-12);
        }

        #[test]
        fn disjoint_parts_add_up(cut in -9.0f64..9.0) {
            let g = line(-10.0, 10.0, 256);
            let rho = unit_gaussian(&g, 1.0);
            let a = interval(&g, -10.0, cut);
            let b = interval(&g, cut, 10.0);
            prop_assert!(a.is_disjoint(&b));
            let whole = substantial_amount(&rho, &Region::whole(&g)).unwrap();
            let parts = substantial_amount(&rho, &a).unwrap() + substantial_amount(&rho, &b).unwrap();
            prop_assert!((whole - parts).abs() < 1e-14);
        }
    }
}
