//! Uniform box lattices, scalar sources, and grid-solution storage/I-O.
//!
//! Everything downstream of the finite-difference solver works on the tensor
//! lattice of `[-L, L]^d` with spacing `h`: nodes `x_i = -L + i h` per axis,
//! including the boundary layer, with zero Dirichlet data. Scalar fields are
//! stored flat, row-major with the last axis fastest.
//!
//! Solutions serialize two ways: CSV rows `t, x1..xd, u` for small dumps, and
//! a binary format with a fixed 64-byte header (magic `KGSOL1`, version,
//! dimension, slice count, per-axis node counts, then `h`, `tau`, `T`, `L` as
//! little-endian doubles) followed by the raw slices, time-major.

use crate::drift::MAX_DIM;
use crate::error::{LabError, LabResult};
use std::io::{Read, Write};

/// Hard ceiling on solver memory: a single work vector may not exceed this
/// many lattice nodes (the solver keeps a half-dozen).
const MAX_NODES: usize = 80_000_000;

/// Uniform space-time lattice on `[-L, L]^d x [0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub d: usize,
    /// Box half-width `L`.
    pub half_width: f64,
    /// Spatial step.
    pub h: f64,
    /// Time step.
    pub tau: f64,
    /// Horizon `T`.
    pub t_end: f64,
}

impl Grid {
    pub fn new(d: usize, half_width: f64, h: f64, tau: f64, t_end: f64) -> LabResult<Self> {
        let g = Grid { d, half_width, h, tau, t_end };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> LabResult<()> {
        if self.d < 1 || self.d > MAX_DIM {
            return Err(LabError::InvalidParameter(format!(
                "dense solves support 1 <= d <= {MAX_DIM}, got {} (higher dimensions are \
                 memory-prohibitive; use the radial reductions instead)",
                self.d
            )));
        }
        if !(self.h > 0.0) || !(self.tau > 0.0) || !(self.t_end > 0.0) {
            return Err(LabError::InvalidParameter(
                "grid steps h, tau and horizon T must be positive".into(),
            ));
        }
        if self.half_width < 2.0 {
            return Err(LabError::InvalidParameter(format!(
                "box half-width must be >= 2 so the unit ball is well inside, got {}",
                self.half_width
            )));
        }
        let per_axis = 2.0 * self.half_width / self.h;
        if (per_axis - per_axis.round()).abs() > 1e-9 * per_axis {
            return Err(LabError::InvalidParameter(format!(
                "2L/h = {per_axis} is not an integer: the lattice must tile the box exactly"
            )));
        }
        if (self.points_per_axis() as f64).powi(self.d as i32) > MAX_NODES as f64 {
            return Err(LabError::InvalidParameter(format!(
                "lattice of {}^{} nodes exceeds the memory budget",
                self.points_per_axis(),
                self.d
            )));
        }
        Ok(())
    }

    /// Nodes per axis, boundary included.
    pub fn points_per_axis(&self) -> usize {
        (2.0 * self.half_width / self.h).round() as usize + 1
    }

    /// Total lattice nodes.
    pub fn node_count(&self) -> usize {
        self.points_per_axis().pow(self.d as u32)
    }

    /// Number of time steps (slices are `0..=steps`).
    pub fn step_count(&self) -> usize {
        (self.t_end / self.tau).round().max(1.0) as usize
    }

    /// Coordinate of node index `i` along one axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    /// Flat index strides per axis (last axis fastest).
    pub fn strides(&self) -> Vec<usize> {
        let n = self.points_per_axis();
        let mut s = vec![1usize; self.d];
        for a in (0..self.d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * n;
        }
        s
    }

    /// Visit every node: `f(flat_index, &multi_index, &coords)`.
    pub fn for_each_node<F: FnMut(usize, &[usize], &[f64])>(&self, mut f: F) {
        let n = self.points_per_axis();
        let mut idx = vec![0usize; self.d];
        let mut x = vec![0.0f64; self.d];
        let mut flat = 0usize;
        loop {
            for (xe, ie) in x.iter_mut().zip(&idx) {
                *xe = self.coord(*ie);
            }
            f(flat, &idx, &x);
            flat += 1;
            let mut a = self.d;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// True when the multi-index touches the boundary layer.
    #[inline]
    pub fn is_boundary(&self, idx: &[usize]) -> bool {
        let n = self.points_per_axis();
        idx.iter().any(|i| *i == 0 || *i == n - 1)
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Discrete spatial integral `h^d * sum_i w(i) field(i)` over all nodes.
    pub fn integrate<F: FnMut(usize) -> f64>(&self, mut integrand: F) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.node_count() {
            acc += integrand(i);
        }
        acc * self.cell_volume()
    }
}

/// Scalar profiles used as sources, initial data, and test factors. All are
/// evaluable anywhere in the box (not only on lattice nodes), which the
/// reference solutions and path quadratures rely on.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarSpec {
    Constant(f64),
    /// `amplitude * (1 - |x-center|^2/radius^2)^3` inside the ball, 0 outside.
    Bump { center: Vec<f64>, radius: f64, amplitude: f64 },
    /// `amplitude * exp(-|x-center|^2 / (2 sigma^2))`.
    Gaussian { center: Vec<f64>, sigma: f64, amplitude: f64 },
}

impl ScalarSpec {
    pub fn unit_bump(d: usize) -> Self {
        ScalarSpec::Bump { center: vec![0.0; d], radius: 1.0, amplitude: 1.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarSpec::Constant(c) => *c,
            ScalarSpec::Bump { center, radius, amplitude } => {
                let mut q = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    let dxi = xi - ci;
                    q += dxi * dxi;
                }
                let s = 1.0 - q / (radius * radius);
                if s <= 0.0 {
                    0.0
                } else {
                    amplitude * s * s * s
                }
            }
            ScalarSpec::Gaussian { center, sigma, amplitude } => {
                let mut q = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    let dxi = xi - ci;
                    q += dxi * dxi;
                }
                amplitude * (-q / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    /// Analytic gradient; `out` must have the profile's dimension.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            ScalarSpec::Constant(_) => out.fill(0.0),
            ScalarSpec::Bump { center, radius, amplitude } => {
                let r2 = radius * radius;
                let mut q = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    q += (xi - ci) * (xi - ci);
                }
                let s = 1.0 - q / r2;
                if s <= 0.0 {
                    out.fill(0.0);
                } else {
                    let factor = -6.0 * amplitude * s * s / r2;
                    for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                        *o = factor * (xi - ci);
                    }
                }
            }
            ScalarSpec::Gaussian { center, sigma, .. } => {
                let val = self.eval(x);
                let inv = 1.0 / (sigma * sigma);
                for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                    *o = -val * (xi - ci) * inv;
                }
            }
        }
    }

    /// Analytic Laplacian in `x.len()` dimensions.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let d = x.len() as f64;
        match self {
            ScalarSpec::Constant(_) => 0.0,
            ScalarSpec::Bump { center, radius, amplitude } => {
                let r2 = radius * radius;
                let mut q = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    q += (xi - ci) * (xi - ci);
                }
                let shat = q / r2;
                let s = 1.0 - shat;
                if s <= 0.0 {
                    0.0
                } else {
                    -(6.0 * amplitude / r2) * (d * s * s - 4.0 * shat * s)
                }
            }
            ScalarSpec::Gaussian { center, sigma, .. } => {
                let val = self.eval(x);
                let s2 = sigma * sigma;
                let mut q = 0.0;
                for (xi, ci) in x.iter().zip(center) {
                    q += (xi - ci) * (xi - ci);
                }
                val * (q / (s2 * s2) - d / s2)
            }
        }
    }

    /// First four derivatives of the radial profile `phi(q)`, `q = |x-c|^2`,
    /// at `q`. All catalog shapes are radial, which keeps higher spatial
    /// derivatives one-dimensional.
    fn radial_derivatives(&self, q: f64) -> [f64; 4] {
        match self {
            ScalarSpec::Constant(_) => [0.0; 4],
            ScalarSpec::Bump { radius, amplitude, .. } => {
                let r2 = radius * radius;
                let u = 1.0 - q / r2;
                if u <= 0.0 {
                    [0.0; 4]
                } else {
                    [
                        -3.0 * amplitude * u * u / r2,
                        6.0 * amplitude * u / (r2 * r2),
                        -6.0 * amplitude / (r2 * r2 * r2),
                        0.0,
                    ]
                }
            }
            ScalarSpec::Gaussian { sigma, amplitude, .. } => {
                let lambda = -1.0 / (2.0 * sigma * sigma);
                let e = amplitude * (lambda * q).exp();
                [lambda * e, lambda * lambda * e, lambda.powi(3) * e, lambda.powi(4) * e]
            }
        }
    }

    /// Short-time Taylor data for the propagated-and-shifted profile
    /// `g(a) = [e^{a Lap} f](x - c a)`: returns `(g(0), g'(0), g''(0)) =
    /// (f, (Lap - V) f, (Lap - V)^2 f)` at `x`, where `V = c . grad`.
    pub fn short_time_derivatives(&self, x: &[f64], c: &[f64]) -> (f64, f64, f64) {
        let d = x.len() as f64;
        let center: &[f64] = match self {
            ScalarSpec::Constant(v) => return (*v, 0.0, 0.0),
            ScalarSpec::Bump { center, .. } | ScalarSpec::Gaussian { center, .. } => center,
        };
        let mut q = 0.0;
        let mut cy = 0.0;
        let mut c2 = 0.0;
        for ((xi, ci), vi) in x.iter().zip(center).zip(c) {
            let yi = xi - ci;
            q += yi * yi;
            cy += vi * yi;
            c2 += vi * vi;
        }
        let [p1, p2, p3, p4] = self.radial_derivatives(q);
        let val = self.eval(x);
        let lap = 2.0 * d * p1 + 4.0 * q * p2;
        let v_f = 2.0 * p1 * cy;
        let v2_f = 2.0 * c2 * p1 + 4.0 * p2 * cy * cy;
        let v_lap = cy * (4.0 * (d + 2.0) * p2 + 8.0 * q * p3);
        let lap2 = (4.0 * d * d + 8.0 * d) * p2 + (16.0 * d + 32.0) * q * p3
            + 16.0 * q * q * p4;
        (val, lap - v_f, lap2 - 2.0 * v_lap + v2_f)
    }

    /// Whether the profile vanishes outside a bounded ball.
    pub fn compact_support(&self) -> bool {
        matches!(self, ScalarSpec::Bump { .. })
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            ScalarSpec::Constant(c) => c.abs(),
            ScalarSpec::Bump { amplitude, .. } | ScalarSpec::Gaussian { amplitude, .. } => {
                amplitude.abs()
            }
        }
    }
}

/// Anything the solver accepts as an inhomogeneity `F(t, x)`.
pub trait SourceTerm {
    fn eval(&self, t: f64, x: &[f64]) -> f64;
    /// Constant-in-time sources let the stepper reuse the sampled slice.
    fn time_dependent(&self) -> bool {
        true
    }
}

/// Closure adapter for test-local manufactured sources.
pub struct FnSource<F: Fn(f64, &[f64]) -> f64>(pub F);

impl<F: Fn(f64, &[f64]) -> f64> SourceTerm for FnSource<F> {
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.0)(t, x)
    }
}

/// The structured source `|h(t,x)| * f(x)` with an optional field factor
/// (`h` absent means a unit factor). `f` must be compactly supported inside
/// the solve box.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub h_field: Option<crate::drift::DriftField>,
    pub f: ScalarSpec,
}

impl SourceSpec {
    pub fn validate(&self, grid: &Grid) -> LabResult<()> {
        if let Some(h) = &self.h_field {
            if h.dim() != grid.d {
                return Err(LabError::Incompatible(format!(
                    "source field dimension {} does not match grid dimension {}",
                    h.dim(),
                    grid.d
                )));
            }
            if !h.sup_magnitude().is_finite() {
                return Err(LabError::InvalidParameter(
                    "source field factor must be bounded (mollify singular fields first)".into(),
                ));
            }
        }
        match &self.f {
            ScalarSpec::Bump { center, radius, .. } => {
                let reach = center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + radius;
                if reach > grid.half_width {
                    return Err(LabError::Incompatible(format!(
                        "source support reaches {reach}, outside the box of half-width {}",
                        grid.half_width
                    )));
                }
            }
            ScalarSpec::Constant(c) if *c != 0.0 => {
                return Err(LabError::InvalidParameter(
                    "source profile must be compactly supported; a nonzero constant is not".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

impl SourceTerm for SourceSpec {
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let base = self.f.eval(x);
        if base == 0.0 {
            return 0.0;
        }
        match &self.h_field {
            None => base,
            Some(h) => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                h.magnitude(t, r) * base
            }
        }
    }

    fn time_dependent(&self) -> bool {
        self.h_field.as_ref().map(|h| h.time_dependent()).unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    ZeroDirichlet,
}

/// A space-time scalar field on the lattice: stored slices `u(t_k, .)` for
/// the kept time indices (`store_every` thinning; the first and last slices
/// are always kept).
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub grid: Grid,
    pub boundary: BoundaryCondition,
    /// Times of the stored slices, ascending.
    pub times: Vec<f64>,
    /// One flat lattice field per stored time.
    pub slices: Vec<Vec<f64>>,
    /// Diagnostics recorded during the solve (cell-Peclet and similar).
    pub warnings: Vec<String>,
}

impl GridSolution {
    /// Sample an explicit function of `(t, x)` onto the lattice — the entry
    /// point for manufactured-solution studies.
    pub fn from_function<F: Fn(f64, &[f64]) -> f64>(grid: &Grid, store_every: usize, f: F) -> Self {
        let steps = grid.step_count();
        let every = store_every.max(1);
        let mut times = Vec::new();
        let mut slices = Vec::new();
        for k in 0..=steps {
            if k % every != 0 && k != steps {
                continue;
            }
            let t = k as f64 * grid.tau;
            let mut slice = vec![0.0; grid.node_count()];
            grid.for_each_node(|flat, _, x| {
                slice[flat] = f(t, x);
            });
            times.push(t);
            slices.push(slice);
        }
        GridSolution {
            grid: *grid,
            boundary: BoundaryCondition::ZeroDirichlet,
            times,
            slices,
            warnings: Vec::new(),
        }
    }

    pub fn slice_at(&self, t: f64) -> Option<&[f64]> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * self.grid.tau.max(1.0))
            .map(|i| self.slices[i].as_slice())
    }

    pub fn final_slice(&self) -> &[f64] {
        self.slices.last().expect("a solution stores at least one slice")
    }

    /// True when every step's slice is stored (required by residual and
    /// energy quadratures).
    pub fn dense_in_time(&self) -> bool {
        self.slices.len() == self.grid.step_count() + 1
    }

    pub fn max_abs(&self) -> f64 {
        self.slices
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise level truncation `(u - c)_+`, slice by slice. Idempotent
    /// under repeated truncation at any level `c' <= c`.
    pub fn truncate_level(&self, c: f64) -> GridSolution {
        let mut out = self.clone();
        for slice in &mut out.slices {
            for v in slice.iter_mut() {
                *v = (*v - c).max(0.0);
            }
        }
        out
    }

    // -- CSV ----------------------------------------------------------------

    /// Write `t, x1..xd, u` rows for every stored slice. Meant for small
    /// grids and final-slice dumps; the binary format below is the bulk
    /// carrier.
    pub fn write_csv<W: Write>(&self, mut w: W) -> LabResult<()> {
        write!(w, "t")?;
        for a in 1..=self.grid.d {
            write!(w, ",x{a}")?;
        }
        writeln!(w, ",u")?;
        for (t, slice) in self.times.iter().zip(&self.slices) {
            let mut row = String::new();
            self.grid.for_each_node(|flat, _, x| {
                row.clear();
                row.push_str(&format!("{t}"));
                for xe in x {
                    row.push_str(&format!(",{xe}"));
                }
                row.push_str(&format!(",{}\n", slice[flat]));
                // errors surface through the final flush below
                let _ = w.write_all(row.as_bytes());
            });
        }
        w.flush()?;
        Ok(())
    }

    // -- binary dump ----------------------------------------------------------

    pub const MAGIC: &'static [u8; 6] = b"KGSOL1";
    pub const FORMAT_VERSION: u16 = 1;

    /// Serialize with the fixed 64-byte header described in the module docs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> LabResult<()> {
        let mut header = [0u8; 64];
        header[0..6].copy_from_slice(Self::MAGIC);
        header[6..8].copy_from_slice(&Self::FORMAT_VERSION.to_le_bytes());
        header[8..12].copy_from_slice(&(self.grid.d as u32).to_le_bytes());
        header[12..16].copy_from_slice(&(self.slices.len() as u32).to_le_bytes());
        let n = self.grid.points_per_axis() as u32;
        for a in 0..4 {
            let dim = if a < self.grid.d { n } else { 0 };
            header[16 + 4 * a..20 + 4 * a].copy_from_slice(&dim.to_le_bytes());
        }
        header[32..40].copy_from_slice(&self.grid.h.to_le_bytes());
        header[40..48].copy_from_slice(&self.grid.tau.to_le_bytes());
        header[48..56].copy_from_slice(&self.grid.t_end.to_le_bytes());
        header[56..64].copy_from_slice(&self.grid.half_width.to_le_bytes());
        w.write_all(&header)?;
        for slice in &self.slices {
            let mut buf = Vec::with_capacity(slice.len() * 8);
            for v in slice {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> LabResult<GridSolution> {
        let mut header = [0u8; 64];
        r.read_exact(&mut header)?;
        if &header[0..6] != Self::MAGIC {
            return Err(LabError::Incompatible("bad magic in binary solution file".into()));
        }
        let version = u16::from_le_bytes(header[6..8].try_into().unwrap());
        if version != Self::FORMAT_VERSION {
            return Err(LabError::Incompatible(format!(
                "binary solution format version {version} unsupported"
            )));
        }
        let d = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let slice_count = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut dims = [0u32; 4];
        for (a, dim) in dims.iter_mut().enumerate() {
            *dim = u32::from_le_bytes(header[16 + 4 * a..20 + 4 * a].try_into().unwrap());
        }
        let take = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let (h, tau, t_end, half_width) = (take(32), take(40), take(48), take(56));
        let grid = Grid::new(d, half_width, h, tau, t_end)?;
        if d == 0 || d > 4 || dims[0] as usize != grid.points_per_axis() {
            return Err(LabError::Incompatible(
                "binary header dims inconsistent with grid parameters".into(),
            ));
        }
        let node_count = grid.node_count();
        let mut slices = Vec::with_capacity(slice_count);
        let mut buf = vec![0u8; node_count * 8];
        for _ in 0..slice_count {
            r.read_exact(&mut buf)?;
            let slice: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            slices.push(slice);
        }
        // reconstruct stored times from the count (uniform thinning)
        let steps = grid.step_count();
        let times: Vec<f64> = if slice_count == steps + 1 {
            (0..=steps).map(|k| k as f64 * tau).collect()
        } else if slice_count >= 2 {
            let every = steps / (slice_count - 1);
            (0..slice_count).map(|j| (j * every).min(steps) as f64 * tau).collect()
        } else {
            vec![t_end]
        };
        Ok(GridSolution {
            grid,
            boundary: BoundaryCondition::ZeroDirichlet,
            times,
            slices,
            warnings: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation_rejects_bad_parameters() {
        assert!(Grid::new(3, 2.0, 0.25, 0.01, 0.1).is_ok());
        assert!(Grid::new(5, 2.0, 0.25, 0.01, 0.1).is_err()); // dense d >= 5
        assert!(Grid::new(3, 1.0, 0.25, 0.01, 0.1).is_err()); // L < 2
        assert!(Grid::new(3, 2.0, 0.3, 0.01, 0.1).is_err()); // 2L/h not integral
        assert!(Grid::new(3, 2.0, -0.25, 0.01, 0.1).is_err());
    }

    #[test]
    fn lattice_indexing_is_row_major_last_axis_fastest() {
        let g = Grid::new(2, 2.0, 1.0, 0.1, 0.2).unwrap();
        assert_eq!(g.points_per_axis(), 5);
        let strides = g.strides();
        assert_eq!(strides, vec![5, 1]);
        let mut seen = Vec::new();
        g.for_each_node(|flat, idx, x| {
            if flat < 6 {
                seen.push((flat, idx.to_vec(), x.to_vec()));
            }
        });
        assert_eq!(seen[1].1, vec![0, 1]);
        assert_eq!(seen[1].2, vec![-2.0, -1.0]);
        assert_eq!(seen[5].1, vec![1, 0]);
    }

    #[test]
    fn truncate_level_matches_pointwise_formula_and_is_idempotent() {
        let g = Grid::new(1, 2.0, 0.5, 0.1, 0.1).unwrap();
        // u(x) = 2 - |x| sampled on the 1-d lattice
        let sol = GridSolution::from_function(&g, 1, |_, x| 2.0 - x[0].abs());
        let t1 = sol.truncate_level(1.0);
        g.for_each_node(|flat, _, x| {
            let expect = (1.0 - x[0].abs()).max(0.0);
            assert!((t1.slices[0][flat] - expect).abs() < 1e-15);
        });
        // idempotence: truncating again at any c' <= 0 is the identity
        let t2 = t1.truncate_level(0.0);
        assert_eq!(t1.slices, t2.slices);
        // c = max u gives the zero field
        let tmax = sol.truncate_level(2.0);
        assert!(tmax.max_abs() == 0.0);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let g = Grid::new(2, 2.0, 0.5, 0.05, 0.2).unwrap();
        let sol = GridSolution::from_function(&g, 1, |t, x| t + x[0] * 0.5 + x[1] * x[1]);
        let mut buf = Vec::new();
        sol.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 64 + sol.slices.len() * g.node_count() * 8);
        let back = GridSolution::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back.grid, sol.grid);
        assert_eq!(back.times, sol.times);
        assert_eq!(back.slices, sol.slices);
    }

    #[test]
    fn binary_reader_rejects_foreign_data() {
        let junk = vec![0u8; 128];
        assert!(GridSolution::read_binary(junk.as_slice()).is_err());
    }

    #[test]
    fn csv_has_expected_shape() {
        let g = Grid::new(1, 2.0, 1.0, 0.1, 0.1).unwrap();
        let sol = GridSolution::from_function(&g, 1, |_, x| x[0]);
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,u");
        assert_eq!(text.lines().count(), 1 + 2 * 5); // header + 2 slices x 5 nodes
    }

    #[test]
    fn source_spec_validates_support_and_boundedness() {
        let g = Grid::new(3, 2.0, 0.25, 0.01, 0.1).unwrap();
        let ok = SourceSpec { h_field: None, f: ScalarSpec::unit_bump(3) };
        assert!(ok.validate(&g).is_ok());
        let escaping = SourceSpec {
            h_field: None,
            f: ScalarSpec::Bump { center: vec![1.5, 0.0, 0.0], radius: 1.0, amplitude: 1.0 },
        };
        assert!(escaping.validate(&g).is_err());
        let singular = SourceSpec {
            h_field: Some(crate::drift::DriftField::inverse_square(3, 1.0).unwrap()),
            f: ScalarSpec::unit_bump(3),
        };
        assert!(singular.validate(&g).is_err(), "unbounded source factor must be refused");
    }
}
