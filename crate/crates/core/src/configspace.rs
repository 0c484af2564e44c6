//! Configuration-space grids, wavefunction storage and the physical
//! parameter record.
//!
//! Grids are uniform periodic boxes with a power-of-two number of points per
//! axis. Grid points `q_i = min + i * spacing` act as cell centers for every
//! Riemann sum in the crate. A two-dimensional grid is stored row-major with
//! axis 1 contiguous; an N-particle configuration space is treated as a flat
//! product of its coordinates.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result, MAX_DIM};

/// Minimum number of points per axis.
pub const MIN_POINTS: usize = 8;

/// Wavepackets must keep this many widths away from the box boundary.
pub const MARGIN_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub extents: Vec<[f64; 2]>,
    pub npoints: Vec<usize>,
}

/// Uniform periodic lattice over a 1D or 2D configuration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    dim: usize,
    min: [f64; MAX_DIM],
    max: [f64; MAX_DIM],
    npoints: [usize; MAX_DIM],
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(gs: GridSpec) -> Result<Self> {
        let extents: Vec<(f64, f64)> = gs.extents.iter().map(|e| (e[0], e[1])).collect();
        Grid::new(&extents, &gs.npoints)
    }
}

impl From<Grid> for GridSpec {
    fn from(grid: Grid) -> Self {
        GridSpec {
            extents: (0..grid.dim).map(|a| [grid.min[a], grid.max[a]]).collect(),
            npoints: grid.npoints[..grid.dim].to_vec(),
        }
    }
}

impl Grid {
    /// Builds a grid from per-axis `[min, max)` extents and point counts.
    pub fn new(extents: &[(f64, f64)], npoints: &[usize]) -> Result<Self> {
        let dim = extents.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..={MAX_DIM}")));
        }
        if npoints.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} extents but {} point counts",
                dim,
                npoints.len()
            )));
        }
        let mut grid = Grid { dim, min: [0.0; MAX_DIM], max: [0.0; MAX_DIM], npoints: [1; MAX_DIM] };
        for (axis, (&(min, max), &n)) in extents.iter().zip(npoints).enumerate() {
            if !min.is_finite() || !max.is_finite() {
                return Err(Error::InvalidGrid(format!("axis {axis}: extents must be finite")));
            }
            if max <= min {
                return Err(Error::ZeroWidth { axis, min, max });
            }
            if n < MIN_POINTS || !n.is_power_of_two() {
                return Err(Error::BadPointCount { axis, npoints: n });
            }
            grid.min[axis] = min;
            grid.max[axis] = max;
            grid.npoints[axis] = n;
        }
        Ok(grid)
    }

    /// Product of two one-dimensional grids; `first` becomes axis 0.
    pub fn product(first: &Grid, second: &Grid) -> Result<Self> {
        if first.dim != 1 || second.dim != 1 {
            return Err(Error::InvalidGrid("product needs two 1D grids".into()));
        }
        Grid::new(
            &[(first.min[0], first.max[0]), (second.min[0], second.max[0])],
            &[first.npoints[0], second.npoints[0]],
        )
    }

    /// The one-dimensional grid along `axis`.
    pub fn axis_grid(&self, axis: usize) -> Grid {
        Grid {
            dim: 1,
            min: [self.min[axis], 0.0],
            max: [self.max[axis], 0.0],
            npoints: [self.npoints[axis], 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn npoints(&self, axis: usize) -> usize {
        self.npoints[axis]
    }

    pub fn shape(&self) -> [usize; MAX_DIM] {
        self.npoints
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.npoints.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self, axis: usize) -> f64 {
        self.min[axis]
    }

    pub fn max(&self, axis: usize) -> f64 {
        self.max[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length(axis) / self.npoints[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.min[axis] + i as f64 * self.spacing(axis)
    }

    /// Coordinates of all points along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.npoints[axis]).map(|i| self.coord(axis, i)).collect()
    }

    pub fn index(&self, multi: [usize; MAX_DIM]) -> usize {
        multi[0] * self.npoints[1] + multi[1]
    }

    pub fn multi_index(&self, idx: usize) -> [usize; MAX_DIM] {
        [idx / self.npoints[1], idx % self.npoints[1]]
    }

    pub fn point(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut p = [0.0; MAX_DIM];
        for (a, c) in p.iter_mut().enumerate().take(self.dim) {
            *c = self.coord(a, m[a]);
        }
        p
    }

    /// Whether `p` lies inside the half-open box.
    pub fn contains(&self, p: &Point) -> bool {
        (0..self.dim).all(|a| p[a] >= self.min[a] && p[a] < self.max[a])
    }

    /// Index of the grid point whose cell contains `p`, rounding to the
    /// nearest node and wrapping periodically.
    pub fn nearest_index(&self, p: &Point) -> usize {
        let mut m = [0usize; MAX_DIM];
        for (a, slot) in m.iter_mut().enumerate().take(self.dim) {
            let n = self.npoints[a] as i64;
            let i = ((p[a] - self.min[a]) / self.spacing(a)).round() as i64;
            *slot = i.rem_euclid(n) as usize;
        }
        self.index(m)
    }
}

/// Analytic potentials. All are multiplicative in position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    #[default]
    Free,
    /// `V = sum_a m_a omega^2 (q_a - c_a)^2 / 2`.
    Harmonic {
        omega: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// Rectangular barrier along axis 0.
    Barrier { height: f64, width: f64, center: f64 },
}

impl Potential {
    pub fn is_free(&self) -> bool {
        matches!(self, Potential::Free)
    }

    pub fn value(&self, q: &Point, dim: usize, masses: &[f64]) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega, center } => (0..dim)
                .map(|a| {
                    let d = q[a] - center.get(a).copied().unwrap_or(0.0);
                    0.5 * masses[a] * omega * omega * d * d
                })
                .sum(),
            Potential::Barrier { height, width, center } => {
                if (q[0] - center).abs() < 0.5 * width {
                    *height
                } else {
                    0.0
                }
            }
        }
    }

    /// The potential sampled on every grid point.
    pub fn sample(&self, grid: &Grid, masses: &[f64]) -> Vec<f64> {
        (0..grid.len()).map(|i| self.value(&grid.point(i), grid.dim(), masses)).collect()
    }
}

fn default_hbar() -> f64 {
    1.0
}

/// Physical constants of a run: hbar, one mass per coordinate and the
/// potential energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default)]
    pub masses: Vec<f64>,
    #[serde(default)]
    pub potential: Potential,
}

impl Default for PhysicsParams {
    /// Natural units with unit masses on every axis, free.
    fn default() -> Self {
        PhysicsParams { hbar: 1.0, masses: Vec::new(), potential: Potential::Free }
    }
}

impl PhysicsParams {
    /// Natural units (hbar = m = 1) without a potential.
    pub fn natural(dim: usize) -> Self {
        PhysicsParams { hbar: 1.0, masses: vec![1.0; dim], potential: Potential::Free }
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    /// Mass of the coordinate along `axis`; missing entries default to 1.
    pub fn mass(&self, axis: usize) -> f64 {
        self.masses.get(axis).copied().unwrap_or(1.0)
    }

    pub fn masses_for(&self, dim: usize) -> Vec<f64> {
        (0..dim).map(|a| self.mass(a)).collect()
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::InvalidParams(format!("hbar must be positive, got {}", self.hbar)));
        }
        if self.masses.len() > dim {
            return Err(Error::InvalidParams(format!(
                "{} masses given for a {dim}D configuration space",
                self.masses.len()
            )));
        }
        for (a, &m) in self.masses.iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidParams(format!("mass of axis {a} must be positive, got {m}")));
            }
        }
        match &self.potential {
            Potential::Harmonic { omega, center } => {
                if !(*omega > 0.0) {
                    return Err(Error::InvalidParams("harmonic omega must be positive".into()));
                }
                if center.len() > dim {
                    return Err(Error::InvalidParams("harmonic center has too many coordinates".into()));
                }
            }
            Potential::Barrier { width, .. } if !(*width > 0.0) => {
                return Err(Error::InvalidParams("barrier width must be positive".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Complex amplitudes on a grid at one instant: the state of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: Grid,
    pub time: f64,
    pub amplitudes: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: Grid, time: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.len()
            )));
        }
        Ok(WaveField { grid, time, amplitudes })
    }

    pub fn zeros(grid: Grid, time: f64) -> Self {
        let n = grid.len();
        WaveField { grid, time, amplitudes: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: Grid, time: f64, f: impl Fn(&Point) -> Complex64) -> Self {
        let amplitudes = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        WaveField { grid, time, amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, factor: Complex64) -> WaveField {
        WaveField {
            grid: self.grid.clone(),
            time: self.time,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn normalized(&self) -> Result<WaveField> {
        normalize(self)
    }

    /// L² distance `||self - other||`.
    pub fn distance(&self, other: &WaveField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    pub fn all_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// `<a|b> = sum conj(a) b dV`.
pub fn inner_product(a: &WaveField, b: &WaveField) -> Result<Complex64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let s: Complex64 = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.cell_volume())
}

pub fn normalize(psi: &WaveField) -> Result<WaveField> {
    let n = psi.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(psi.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// One term of a superposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    /// Complex weight as `[re, im]`.
    pub weight: [f64; 2],
    pub state: StateRecipe,
}

/// Analytic initial states. Each single-packet recipe is normalized to one;
/// superpositions are evaluated as given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateRecipe {
    /// Product of `(2 pi s^2)^(-1/4) exp(-(q-c)^2 / 4 s^2 + i k q)` over axes,
    /// so `sigma` is the standard deviation of the density.
    Gaussian {
        center: Vec<f64>,
        sigma: Vec<f64>,
        #[serde(default)]
        momentum: Vec<f64>,
    },
    Superposition { terms: Vec<Term> },
    /// Harmonic-oscillator eigenstate with one quantum number per axis.
    HarmonicEigen {
        n: Vec<usize>,
        omega: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    PlaneWave {
        k: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `((x-cx) + i sgn(l) (y-cy))^|l| exp(-r^2 / 4 sigma^2)`, 2D only.
    Vortex { center: Vec<f64>, winding: i32, sigma: f64 },
}

fn one() -> f64 {
    1.0
}

fn component(v: &[f64], axis: usize) -> f64 {
    v.get(axis).copied().unwrap_or(0.0)
}

fn check_margin(grid: &Grid, axis: usize, center: f64, half_width: f64, what: &str) -> Result<()> {
    let lo = center - half_width;
    let hi = center + half_width;
    if lo < grid.min(axis) || hi > grid.max(axis) {
        return Err(Error::MarginViolation(format!(
            "{what}: support [{lo:.4}, {hi:.4}] on axis {axis} exceeds grid [{}, {})",
            grid.min(axis),
            grid.max(axis)
        )));
    }
    Ok(())
}

fn check_recipe(grid: &Grid, recipe: &StateRecipe, params: &PhysicsParams) -> Result<()> {
    let dim = grid.dim();
    match recipe {
        StateRecipe::Gaussian { center, sigma, momentum } => {
            if center.len() != dim || sigma.len() != dim || momentum.len() > dim {
                return Err(Error::InvalidRecipe(format!("gaussian needs {dim} center/sigma entries")));
            }
            for a in 0..dim {
                if !(sigma[a] > 0.0) {
                    return Err(Error::InvalidRecipe("gaussian sigma must be positive".into()));
                }
                check_margin(grid, a, center[a], MARGIN_SIGMAS * sigma[a], "gaussian")?;
            }
        }
        StateRecipe::Superposition { terms } => {
            if terms.is_empty() {
                return Err(Error::InvalidRecipe("empty superposition".into()));
            }
            for t in terms {
                check_recipe(grid, &t.state, params)?;
            }
        }
        StateRecipe::HarmonicEigen { n, omega, center } => {
            if n.len() != dim || center.len() > dim {
                return Err(Error::InvalidRecipe(format!("harmonic eigenstate needs {dim} quantum numbers")));
            }
            if !(*omega > 0.0) {
                return Err(Error::InvalidRecipe("omega must be positive".into()));
            }
            for a in 0..dim {
                let m = params.mass(a);
                let sigma = (params.hbar / (2.0 * m * omega)).sqrt();
                let turning = ((2 * n[a] + 1) as f64 * params.hbar / (m * omega)).sqrt();
                check_margin(grid, a, component(center, a), turning + MARGIN_SIGMAS * sigma, "harmonic eigenstate")?;
            }
        }
        StateRecipe::PlaneWave { k, .. } => {
            if k.len() != dim {
                return Err(Error::InvalidRecipe(format!("plane wave needs {dim} wavenumbers")));
            }
            for (a, &ka) in k.iter().enumerate() {
                let periods = ka * grid.length(a) / (2.0 * PI);
                if (periods - periods.round()).abs() > 1e-9 {
                    return Err(Error::MarginViolation(format!(
                        "plane wave k = {ka} is not periodic on axis {a} (box holds {periods:.6} wavelengths)"
                    )));
                }
            }
        }
        StateRecipe::Vortex { center, winding, sigma } => {
            if dim != 2 || center.len() != 2 {
                return Err(Error::InvalidRecipe("vortex states need a 2D grid".into()));
            }
            if !(*sigma > 0.0) {
                return Err(Error::InvalidRecipe("vortex sigma must be positive".into()));
            }
            let ring = sigma * (2.0 * winding.unsigned_abs() as f64).sqrt();
            for a in 0..2 {
                check_margin(grid, a, center[a], ring + MARGIN_SIGMAS * sigma, "vortex")?;
            }
        }
    }
    Ok(())
}

/// Normalized Hermite function `phi_n(xi)`.
pub fn hermite_function(n: usize, xi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    for k in 0..n {
        let next = (2.0 / (k + 1) as f64).sqrt() * xi * cur - (k as f64 / (k + 1) as f64).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn evaluate(recipe: &StateRecipe, q: &Point, dim: usize, params: &PhysicsParams) -> Complex64 {
    match recipe {
        StateRecipe::Gaussian { center, sigma, momentum } => {
            let mut amp = Complex64::new(1.0, 0.0);
            for a in 0..dim {
                let s = sigma[a];
                let d = q[a] - center[a];
                let norm = (2.0 * PI * s * s).powf(-0.25);
                amp *= Complex64::from_polar(norm * (-d * d / (4.0 * s * s)).exp(), component(momentum, a) * q[a]);
            }
            amp
        }
        StateRecipe::Superposition { terms } => terms
            .iter()
            .map(|t| Complex64::new(t.weight[0], t.weight[1]) * evaluate(&t.state, q, dim, params))
            .sum(),
        StateRecipe::HarmonicEigen { n, omega, center } => {
            let mut amp = 1.0;
            for a in 0..dim {
                let scale = params.mass(a) * omega / params.hbar;
                let xi = scale.sqrt() * (q[a] - component(center, a));
                amp *= scale.powf(0.25) * hermite_function(n[a], xi);
            }
            Complex64::new(amp, 0.0)
        }
        StateRecipe::PlaneWave { k, amplitude } => {
            let phase: f64 = (0..dim).map(|a| k[a] * q[a]).sum();
            Complex64::from_polar(*amplitude, phase)
        }
        StateRecipe::Vortex { center, winding, sigma } => {
            let dx = q[0] - center[0];
            let dy = q[1] - center[1];
            let l = winding.unsigned_abs();
            let sign = if *winding < 0 { -1.0 } else { 1.0 };
            let r2 = dx * dx + dy * dy;
            let norm = 1.0 / (PI * factorial(l) * (2.0 * sigma * sigma).powi(l as i32 + 1)).sqrt();
            Complex64::new(dx, sign * dy).powu(l) * norm * (-r2 / (4.0 * sigma * sigma)).exp()
        }
    }
}

/// Evaluates an analytic state recipe on the grid points at `t = 0`.
pub fn make_state(grid: &Grid, recipe: &StateRecipe, params: &PhysicsParams) -> Result<WaveField> {
    check_recipe(grid, recipe, params)?;
    let dim = grid.dim();
    Ok(WaveField::from_fn(grid.clone(), 0.0, |q| evaluate(recipe, q, dim, params)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(min: f64, max: f64, n: usize) -> Grid {
        Grid::new(&[(min, max)], &[n]).unwrap()
    }

    fn gaussian(center: f64, sigma: f64, k: f64) -> StateRecipe {
        StateRecipe::Gaussian { center: vec![center], sigma: vec![sigma], momentum: vec![k] }
    }

    #[test]
    fn grid_spacing_and_size() {
        let g = grid1(-10.0, 10.0, 256);
        assert_eq!(g.spacing(0), 0.078125);
        let g2 = Grid::new(&[(-10.0, 10.0), (-10.0, 10.0)], &[128, 128]).unwrap();
        assert_eq!(g2.len(), 16384);
        assert_eq!(g2.dim(), 2);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(Grid::new(&[(0.0, 0.0)], &[64]), Err(Error::ZeroWidth { .. })));
        assert!(matches!(Grid::new(&[(0.0, 1.0)], &[100]), Err(Error::BadPointCount { .. })));
        assert!(matches!(Grid::new(&[(0.0, 1.0)], &[4]), Err(Error::BadPointCount { .. })));
        assert!(Grid::new(&[(0.0, 1.0); 3], &[8, 8, 8]).is_err());
    }

    #[test]
    fn grid_serde_round_trip() {
        let g = Grid::new(&[(-1.0, 1.0), (0.0, 4.0)], &[16, 32]).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: Grid = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        assert!(serde_json::from_str::<Grid>(r#"{"extents":[[0,1]],"npoints":[12]}"#).is_err());
    }

    #[test]
    fn gaussian_normalization_and_peak() {
        let g = grid1(-10.0, 10.0, 256);
        let params = PhysicsParams::natural(1);
        let psi = make_state(&g, &gaussian(0.0, 1.0, 0.0), &params).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let peak = psi.amplitudes[g.nearest_index(&[0.0, 0.0])];
        assert!((peak.re - (2.0 * PI).powf(-0.25)).abs() < 1e-14);
        let ip = inner_product(&psi, &psi).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-12 && ip.im.abs() < 1e-15);
    }

    #[test]
    fn separated_gaussian_overlap_matches_closed_form() {
        let g = grid1(-12.0, 18.0, 512);
        let params = PhysicsParams::natural(1);
        let a = make_state(&g, &gaussian(0.0, 1.0, 0.0), &params).unwrap();
        let b = make_state(&g, &gaussian(6.0, 1.0, 0.0), &params).unwrap();
        let overlap = inner_product(&a, &b).unwrap();
        let expected = (-36.0f64 / 8.0).exp();
        assert!((overlap.re - expected).abs() < 1e-12, "{overlap} vs {expected}");
        assert!((expected - 1.11e-2).abs() < 1e-4);
    }

    #[test]
    fn inner_product_with_i_psi_is_imaginary() {
        let g = grid1(-10.0, 10.0, 128);
        let psi = make_state(&g, &gaussian(0.5, 1.0, 1.0), &PhysicsParams::natural(1)).unwrap();
        let ipsi = psi.scaled(Complex64::i());
        let z = inner_product(&psi, &ipsi).unwrap();
        assert!(z.re.abs() < 1e-14);
        assert!((z.im - psi.norm_sqr()).abs() < 1e-12);
        let back = inner_product(&ipsi, &psi).unwrap();
        assert!((back - z.conj()).norm() < 1e-15);
    }

    #[test]
    fn inner_product_needs_shared_grid() {
        let p = WaveField::zeros(grid1(0.0, 1.0, 8), 0.0);
        let q = WaveField::zeros(grid1(0.0, 2.0, 8), 0.0);
        assert!(matches!(inner_product(&p, &q), Err(Error::GridMismatch)));
    }

    #[test]
    fn normalize_cases() {
        let g = grid1(-10.0, 10.0, 256);
        let params = PhysicsParams::natural(1);
        let unit = make_state(&g, &gaussian(0.0, 1.0, 0.0), &params).unwrap();
        let doubled = unit.scaled(Complex64::new(2.0, 0.0));
        assert!(normalize(&doubled).unwrap().distance(&unit).unwrap() < 1e-12);
        assert!(normalize(&unit).unwrap().distance(&unit).unwrap() < 1e-12);
        assert!(matches!(normalize(&WaveField::zeros(g, 0.0)), Err(Error::ZeroNorm)));
    }

    #[test]
    fn harmonic_ground_state_is_sigma_half_gaussian() {
        let g = grid1(-10.0, 10.0, 256);
        let params = PhysicsParams::natural(1);
        let ho = make_state(&g, &StateRecipe::HarmonicEigen { n: vec![0], omega: 1.0, center: vec![] }, &params).unwrap();
        let gauss = make_state(&g, &gaussian(0.0, 0.5f64.sqrt(), 0.0), &params).unwrap();
        assert!(ho.distance(&gauss).unwrap() < 1e-13);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        let g = grid1(-12.0, 12.0, 512);
        let params = PhysicsParams::natural(1);
        let states: Vec<WaveField> = (0..5)
            .map(|n| make_state(&g, &StateRecipe::HarmonicEigen { n: vec![n], omega: 1.0, center: vec![] }, &params).unwrap())
            .collect();
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let ip = inner_product(a, b).unwrap().re;
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-10, "<{i}|{j}> = {ip}");
            }
        }
    }

    #[test]
    fn vortex_phase_winds_once() {
        let g = Grid::new(&[(-8.0, 8.0), (-8.0, 8.0)], &[64, 64]).unwrap();
        let recipe = StateRecipe::Vortex { center: vec![0.0, 0.0], winding: 1, sigma: 1.0 };
        let psi = make_state(&g, &recipe, &PhysicsParams::natural(2)).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
        // walk the ring of grid points at |i|, |j| <= 4 cells around the center
        let c = 32usize;
        let mut ring = Vec::new();
        for j in c - 4..c + 4 {
            ring.push([c - 4, j]);
        }
        for i in c - 4..c + 4 {
            ring.push([i, c + 4]);
        }
        for j in (c - 3..=c + 4).rev() {
            ring.push([c + 4, j]);
        }
        for i in (c - 3..=c + 4).rev() {
            ring.push([i, c - 4]);
        }
        let mut winding = 0.0;
        for w in 0..ring.len() {
            let a = psi.amplitudes[g.index(ring[w])];
            let b = psi.amplitudes[g.index(ring[(w + 1) % ring.len()])];
            winding += (b * a.conj()).arg();
        }
        assert!((winding.abs() - 2.0 * PI).abs() < 1e-12, "winding {winding}");
    }

    #[test]
    fn margin_and_periodicity_guards() {
        let g = grid1(-10.0, 10.0, 256);
        let params = PhysicsParams::natural(1);
        assert!(matches!(make_state(&g, &gaussian(7.0, 1.0, 0.0), &params), Err(Error::MarginViolation(_))));
        let pw = StateRecipe::PlaneWave { k: vec![2.0], amplitude: 1.0 };
        assert!(matches!(make_state(&g, &pw, &params), Err(Error::MarginViolation(_))));
        let g8 = grid1(-4.0 * PI, 4.0 * PI, 256);
        let wave = make_state(&g8, &pw, &params).unwrap();
        assert!(wave.amplitudes.iter().all(|a| (a.norm() - 1.0).abs() < 1e-14));
        let vortex = StateRecipe::Vortex { center: vec![0.0], winding: 1, sigma: 1.0 };
        assert!(make_state(&g, &vortex, &params).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(PhysicsParams::natural(2).validate(2).is_ok());
        let bad = PhysicsParams { hbar: 0.0, ..PhysicsParams::natural(1) };
        assert!(bad.validate(1).is_err());
        let neg = PhysicsParams { masses: vec![1.0, -1.0], ..PhysicsParams::natural(2) };
        assert!(neg.validate(2).is_err());
    }

    /// Riemann sums of a smooth periodic-in-practice integrand are spectrally
    /// accurate; the trapezoid error bound of order spacing^2 is the contract.
    #[test]
    fn overlap_converges_as_grid_refines() {
        let params = PhysicsParams::natural(1);
        let exact = (-1.0f64 / 8.0).exp();
        let mut prev = f64::INFINITY;
        for n in [32usize, 64, 128] {
            let g = grid1(-12.0, 13.0, n);
            let a = make_state(&g, &gaussian(0.0, 1.0, 0.0), &params).unwrap();
            let b = make_state(&g, &gaussian(1.0, 1.0, 0.0), &params).unwrap();
            let err = (inner_product(&a, &b).unwrap().re - exact).abs();
            assert!(err <= prev / 4.0 || err < 1e-14, "n={n} err={err} prev={prev}");
            prev = err;
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn field(seed: Vec<(f64, f64)>) -> WaveField {
            let g = grid1(-1.0, 1.0, 16);
            WaveField::new(g, 0.0, seed.into_iter().map(|(r, i)| Complex64::new(r, i)).collect()).unwrap()
        }

        proptest! {
            #[test]
            fn conjugate_symmetry(a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16),
                                  b in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)) {
                let (a, b) = (field(a), field(b));
                let ab = inner_product(&a, &b).unwrap();
                let ba = inner_product(&b, &a).unwrap();
                prop_assert!((ab - ba.conj()).norm() < 1e-14);
                let aa = inner_product(&a, &a).unwrap();
                prop_assert!(aa.re >= 0.0 && aa.im.abs() < 1e-15);
            }

            #[test]
            fn normalize_is_idempotent(a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16)) {
                let a = field(a);
                prop_assume!(a.norm() > 1e-3);
                let once = normalize(&a).unwrap();
                let twice = normalize(&once).unwrap();
                prop_assert!(once.distance(&twice).unwrap() < 1e-12);
                prop_assert!((once.norm() - 1.0).abs() < 1e-12);
            }
        }
    }
}
