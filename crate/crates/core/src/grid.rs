//! Axis-aligned cubes, uniform sampling lattices and grid functions.
//!
//! The lattice is a midpoint lattice: along each axis the nodes sit at
//! `lo + (i + 1/2)h`, never on cell edges. Grids always have an even number
//! of points per axis, so a grid centered at the origin never places a node
//! at `0` — power weights |x|^a with a < 0 stay finite on every node.
//!
//! Local norms are the normalized cube seminorms
//! `|g|_{q,Q} = (|Q|^{-1} ∫_Q |g|^q)^{1/q}`, realized as the plain mean over
//! the lattice points inside `Q` (so constants are exact and the q-monotonicity
//! of power means holds exactly). Cubes protruding past the grid treat `g` as
//! zero outside: the mean keeps the full denominator `(side/h)^n`.

use crate::error::{Error, Result};

/// A point in ℝⁿ, n ≤ 3; coordinates past the dimension are zero.
pub type Point = [f64; 3];

pub const MAX_DIM: usize = 3;

/// Euclidean norm of the first `dim` coordinates.
pub fn norm(p: Point, dim: usize) -> f64 {
    let mut s = 0.0;
    for x in p.iter().take(dim) {
        s += x * x;
    }
    s.sqrt()
}

pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Axis-aligned cube Q(x₀, r): center x₀, side length r.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cube {
    pub center: Point,
    pub side: f64,
    pub dim: usize,
}

impl Cube {
    pub fn new(dim: usize, center: Point, side: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidExponent(format!("dimension {dim} not in 1..=3")));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidExponent(format!("cube side {side} must be positive")));
        }
        Ok(Cube { center, side, dim })
    }

    /// δQ: same center, side scaled by δ.
    pub fn dilate(&self, delta: f64) -> Cube {
        Cube { center: self.center, side: self.side * delta, dim: self.dim }
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.side
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.center[axis] + 0.5 * self.side
    }

    /// Closed-cube membership.
    pub fn contains(&self, p: Point) -> bool {
        (0..self.dim).all(|k| (p[k] - self.center[k]).abs() <= 0.5 * self.side)
    }

    /// Whether `inner` lies inside `self` (up to a relative slack).
    pub fn covers(&self, inner: &Cube) -> bool {
        let eps = 1e-9 * self.side;
        (0..self.dim).all(|k| inner.lo(k) >= self.lo(k) - eps && inner.hi(k) <= self.hi(k) + eps)
    }
}

/// Uniform midpoint lattice over a bounding cube.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub cube: Cube,
    pub points_per_axis: usize,
}

impl Grid {
    pub fn new(dim: usize, center: Point, side: f64, points_per_axis: usize) -> Result<Self> {
        let cube = Cube::new(dim, center, side)?;
        if points_per_axis == 0 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::Resolution(format!(
                "points_per_axis {points_per_axis} must be positive and even (midpoint lattice offset)"
            )));
        }
        Ok(Grid { cube, points_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.cube.dim
    }

    pub fn spacing(&self) -> f64 {
        self.cube.side / self.points_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.cube.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of lattice node `i` along one axis.
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.cube.lo(axis) + (i as f64 + 0.5) * self.spacing()
    }

    /// Row-major index decoding (last axis fastest).
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        match self.cube.dim {
            1 => [index, 0, 0],
            2 => [index / n, index % n, 0],
            _ => [index / (n * n), (index / n) % n, index % n],
        }
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        let n = self.points_per_axis;
        match self.cube.dim {
            1 => c[0],
            2 => c[0] * n + c[1],
            _ => (c[0] * n + c[1]) * n + c[2],
        }
    }

    pub fn point(&self, index: usize) -> Point {
        let c = self.coords(index);
        let mut p = [0.0; 3];
        for k in 0..self.cube.dim {
            p[k] = self.axis_coord(k, c[k]);
        }
        p
    }

    /// Nearest lattice index to a point (coordinates clamped into the grid).
    pub fn nearest_index(&self, p: Point) -> usize {
        let h = self.spacing();
        let mut c = [0usize; 3];
        for k in 0..self.cube.dim {
            let t = ((p[k] - self.cube.lo(k)) / h - 0.5).round();
            c[k] = t.clamp(0.0, (self.points_per_axis - 1) as f64) as usize;
        }
        self.index(c)
    }

    /// Per-axis index ranges (inclusive) of lattice nodes inside `cube`,
    /// or None when the cube misses the lattice entirely.
    pub fn cube_index_ranges(&self, cube: &Cube) -> Option<[(usize, usize); 3]> {
        let h = self.spacing();
        let mut out = [(0usize, 0usize); 3];
        for k in 0..self.cube.dim {
            let lo = (cube.lo(k) - self.cube.lo(k)) / h - 0.5;
            let hi = (cube.hi(k) - self.cube.lo(k)) / h - 0.5;
            let i0 = (lo - 1e-9).ceil().max(0.0);
            let i1 = (hi + 1e-9).floor().min((self.points_per_axis - 1) as f64);
            if i1 < i0 {
                return None;
            }
            out[k] = (i0 as usize, i1 as usize);
        }
        Some(out)
    }

    /// Visit the linear index of every lattice node inside `cube`.
    pub fn for_each_in_cube(&self, cube: &Cube, mut f: impl FnMut(usize)) -> usize {
        let Some(r) = self.cube_index_ranges(cube) else { return 0 };
        let dim = self.cube.dim;
        let mut count = 0;
        let (a0, b0) = r[0];
        let (a1, b1) = if dim >= 2 { r[1] } else { (0, 0) };
        let (a2, b2) = if dim >= 3 { r[2] } else { (0, 0) };
        for i0 in a0..=b0 {
            for i1 in a1..=b1 {
                for i2 in a2..=b2 {
                    f(self.index([i0, i1, i2]));
                    count += 1;
                }
            }
        }
        count
    }
}

/// Real-valued samples on a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::MismatchedGrids);
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidExponent("non-finite sample".into()));
        }
        Ok(GridFunction { grid, samples })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        GridFunction { grid, samples: vec![0.0; n] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let samples = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        GridFunction { grid, samples }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn value(&self, index: usize) -> f64 {
        self.samples[index]
    }

    pub fn scale(&mut self, c: f64) {
        for s in &mut self.samples {
            *s *= c;
        }
    }

    /// self += c·other (same grid).
    pub fn add_scaled(&mut self, c: f64, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::MismatchedGrids);
        }
        for (s, o) in self.samples.iter_mut().zip(&other.samples) {
            *s += c * o;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction { grid: self.grid.clone(), samples: self.samples.iter().map(|&s| f(s)).collect() }
    }

    /// |g|_{q,Q} = (|Q|⁻¹ ∫_Q |g|^q)^{1/q}, midpoint rule.
    pub fn local_norm(&self, q: f64, cube: &Cube) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::InvalidExponent(format!("local norm exponent q = {q} < 1")));
        }
        if cube.dim != self.grid.dim() {
            return Err(Error::MismatchedGrids);
        }
        let mut sum = 0.0;
        let count = self.grid.for_each_in_cube(cube, |i| {
            sum += self.samples[i].abs().powf(q);
        });
        if count == 0 {
            return Err(Error::EmptyCube);
        }
        let denom = if self.grid.cube.covers(cube) {
            count as f64
        } else {
            // zero extension outside the grid: keep the full cube volume
            (cube.side / self.grid.spacing()).powi(cube.dim as i32)
        };
        Ok((sum / denom).powf(1.0 / q))
    }

    /// Midpoint-rule integral over `region`.
    pub fn integrate(&self, region: &Cube) -> Result<f64> {
        if region.dim != self.grid.dim() {
            return Err(Error::MismatchedGrids);
        }
        let mut sum = 0.0;
        let count = self.grid.for_each_in_cube(region, |i| sum += self.samples[i]);
        if count == 0 {
            return Err(Error::EmptyCube);
        }
        Ok(sum * self.grid.spacing().powi(region.dim as i32))
    }

    /// ∫ (x - x₀)^α g(x) dx over the whole grid, midpoint rule.
    pub fn moment(&self, alpha: [u8; 3], about: Point) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.grid.len() {
            let p = self.grid.point(i);
            let mut m = self.samples[i];
            for k in 0..self.grid.dim() {
                m *= (p[k] - about[k]).powi(alpha[k] as i32);
            }
            sum += m;
        }
        sum * self.grid.spacing().powi(self.grid.dim() as i32)
    }

    /// Global L^q norm (h^n Σ|g|^q)^{1/q}.
    pub fn lp_norm(&self, q: f64) -> f64 {
        let hn = self.grid.spacing().powi(self.grid.dim() as i32);
        (self.samples.iter().map(|s| s.abs().powf(q)).sum::<f64>() * hn).powf(1.0 / q)
    }
}

/// Finite increasing radius ladder discretizing `sup_{r>0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusLadder {
    radii: Vec<f64>,
}

impl RadiusLadder {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::LadderOutsideGrid("empty ladder".into()));
        }
        if radii[0] <= 0.0 {
            return Err(Error::LadderOutsideGrid("non-positive radius".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::LadderOutsideGrid("radii not strictly increasing".into()));
        }
        Ok(RadiusLadder { radii })
    }

    /// Dyadic ladder r_j = r_min·2^j, capped at r_max.
    pub fn dyadic(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0) || r_max < r_min {
            return Err(Error::LadderOutsideGrid(format!("dyadic ladder [{r_min}, {r_max}]")));
        }
        let mut radii = Vec::new();
        let mut r = r_min;
        while r <= r_max * (1.0 + 1e-12) {
            radii.push(r);
            r *= 2.0;
        }
        RadiusLadder::new(radii)
    }

    /// Default ladder for a grid: dyadic from 2h up to twice the side
    /// (large cubes are handled by zero extension).
    pub fn default_for(grid: &Grid) -> Self {
        RadiusLadder::dyadic(2.0 * grid.spacing(), 2.0 * grid.cube.side).expect("valid grid ladder")
    }

    /// Single-radius ladder.
    pub fn single(r: f64) -> Result<Self> {
        RadiusLadder::new(vec![r])
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn min(&self) -> f64 {
        self.radii[0]
    }

    pub fn describe(&self) -> String {
        let rs: Vec<String> = self.radii.iter().map(|r| format!("{r:.6e}")).collect();
        format!("[{}]", rs.join(", "))
    }
}

/// 17-significant-digit decimal rendering used by every text format.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize header + samples: `n points_per_axis side center...`, then one
/// sample per line in row-major order.
pub fn write_grid_function(g: &GridFunction) -> String {
    let grid = g.grid();
    let mut out = String::new();
    out.push_str(&format!("{} {} {}", grid.dim(), grid.points_per_axis, format_f64(grid.cube.side)));
    for k in 0..grid.dim() {
        out.push(' ');
        out.push_str(&format_f64(grid.cube.center[k]));
    }
    out.push('\n');
    for s in g.samples() {
        out.push_str(&format_f64(*s));
        out.push('\n');
    }
    out
}

/// Parse the `write_grid_function` format. Extra lines after the samples are
/// returned untouched so callers can append trailer blocks (atom files).
pub fn read_grid_function(text: &str) -> Result<(GridFunction, Vec<String>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() < 4 {
        return Err(Error::Parse(format!("bad grid header: {header}")));
    }
    let dim: usize = toks[0].parse().map_err(|_| Error::Parse("bad dimension".into()))?;
    let ppa: usize = toks[1].parse().map_err(|_| Error::Parse("bad points_per_axis".into()))?;
    let side: f64 = toks[2].parse().map_err(|_| Error::Parse("bad side".into()))?;
    if toks.len() != 3 + dim {
        return Err(Error::Parse(format!("header expects {} center coordinates", dim)));
    }
    let mut center = [0.0; 3];
    for k in 0..dim {
        center[k] = toks[3 + k].parse().map_err(|_| Error::Parse("bad center".into()))?;
    }
    let grid = Grid::new(dim, center, side, ppa)?;
    let n = grid.len();
    let mut samples = Vec::with_capacity(n);
    let mut trailer = Vec::new();
    for line in lines {
        if samples.len() < n {
            samples.push(line.trim().parse().map_err(|_| Error::Parse(format!("bad sample: {line}")))?);
        } else if !line.trim().is_empty() {
            trailer.push(line.to_string());
        }
    }
    if samples.len() != n {
        return Err(Error::Parse(format!("expected {} samples, found {}", n, samples.len())));
    }
    Ok((GridFunction::new(grid, samples)?, trailer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(side: f64, ppa: usize) -> Grid {
        Grid::new(1, [0.0; 3], side, ppa).unwrap()
    }

    #[test]
    fn lattice_is_midpoint_offset() {
        let g = grid1(2.0, 8);
        assert!((g.spacing() - 0.25).abs() < 1e-15);
        // no node at the origin
        for i in 0..g.len() {
            assert!(g.point(i)[0].abs() > 1e-12);
        }
        assert!((g.axis_coord(0, 0) + 0.875).abs() < 1e-15);
    }

    #[test]
    fn odd_points_per_axis_rejected() {
        assert!(Grid::new(1, [0.0; 3], 1.0, 9).is_err());
    }

    #[test]
    fn local_norm_constant_is_exact() {
        let g = GridFunction::from_fn(grid1(4.0, 64), |_| -3.5);
        let q_cube = Cube::new(1, [0.3, 0.0, 0.0], 1.1).unwrap();
        // partial cell coverage still averages a constant exactly
        assert_eq!(g.local_norm(2.0, &q_cube).unwrap(), 3.5);
        assert_eq!(g.local_norm(1.0, &q_cube).unwrap(), 3.5);
    }

    #[test]
    fn local_norm_abs_linear_closed_form() {
        // |g|_{2,Q(0,r)} for g(y)=|y| is r/(2√3)
        let g = GridFunction::from_fn(grid1(4.0, 2048), |p| p[0].abs());
        for r in [0.5, 1.0, 2.0] {
            let cube = Cube::new(1, [0.0; 3], r).unwrap();
            let v = g.local_norm(2.0, &cube).unwrap();
            let exact = r / (2.0 * 3.0f64.sqrt());
            assert!((v - exact).abs() < 2e-4 * exact, "r={r}: {v} vs {exact}");
        }
    }

    #[test]
    fn local_norm_zero_function() {
        let g = GridFunction::zeros(grid1(2.0, 32));
        let cube = Cube::new(1, [0.0; 3], 1.0).unwrap();
        assert_eq!(g.local_norm(2.0, &cube).unwrap(), 0.0);
    }

    #[test]
    fn local_norm_errors() {
        let g = GridFunction::zeros(grid1(2.0, 32));
        let far = Cube::new(1, [50.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(g.local_norm(2.0, &far).unwrap_err(), Error::EmptyCube);
        let cube = Cube::new(1, [0.0; 3], 1.0).unwrap();
        assert!(matches!(g.local_norm(0.5, &cube), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn local_norm_homogeneous() {
        let g = GridFunction::from_fn(grid1(2.0, 128), |p| p[0].sin() + 0.3);
        let mut g5 = g.clone();
        g5.scale(-5.0);
        let cube = Cube::new(1, [0.1, 0.0, 0.0], 0.7).unwrap();
        let a = g.local_norm(3.0, &cube).unwrap();
        let b = g5.local_norm(3.0, &cube).unwrap();
        assert!((b - 5.0 * a).abs() < 1e-12 * b.max(1.0));
    }

    #[test]
    fn integrate_constant_2d() {
        let grid = Grid::new(2, [0.0; 3], 1.0, 32).unwrap();
        let f = GridFunction::from_fn(grid, |_| 1.0);
        let q = Cube::new(2, [0.0; 3], 1.0).unwrap();
        assert!((f.integrate(&q).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_odd_symmetry() {
        let f = GridFunction::from_fn(grid1(2.0, 256), |p| p[0]);
        let q = Cube::new(1, [0.0; 3], 2.0).unwrap();
        assert!(f.integrate(&q).unwrap().abs() < 1e-13);
    }

    #[test]
    fn integrate_parabola() {
        let f = GridFunction::from_fn(grid1(1.0, 512), |p| p[0] * p[0]);
        let q = Cube::new(1, [0.0; 3], 1.0).unwrap();
        let v = f.integrate(&q).unwrap();
        assert!((v - 1.0 / 12.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn integrate_refinement_order_at_least_one() {
        // smooth integrand: midpoint error should at least halve when h halves
        let exact = 2.0 * 1.0f64.sin(); // ∫_{-1}^{1} cos
        let errs: Vec<f64> = [128usize, 256, 512]
            .iter()
            .map(|&ppa| {
                let f = GridFunction::from_fn(grid1(2.0, ppa), |p| p[0].cos());
                let q = Cube::new(1, [0.0; 3], 2.0).unwrap();
                (f.integrate(&q).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] / 2.0);
        assert!(errs[2] < errs[1] / 2.0);
    }

    #[test]
    fn local_norm_monotone_in_q() {
        let g = GridFunction::from_fn(grid1(2.0, 64), |p| (7.3 * p[0]).sin() + 0.2);
        let cube = Cube::new(1, [-0.2, 0.0, 0.0], 0.9).unwrap();
        let mut prev = 0.0;
        for q in [1.0, 1.5, 2.0, 3.0, 6.0] {
            let v = g.local_norm(q, &cube).unwrap();
            assert!(v >= prev - 1e-13, "q={q}");
            prev = v;
        }
    }

    #[test]
    fn dilation_scales_side_only() {
        let q = Cube::new(2, [1.0, -2.0, 0.0], 3.0).unwrap();
        let d = q.dilate(0.5);
        assert_eq!(d.center, q.center);
        assert!((d.side - 1.5).abs() < 1e-15);
    }

    #[test]
    fn serialization_round_trip_is_exact() {
        let grid = Grid::new(2, [0.25, -1.0, 0.0], 3.0, 8).unwrap();
        let f = GridFunction::from_fn(grid, |p| (p[0] * 37.1).sin() * (p[1] + 0.77).exp());
        let text = write_grid_function(&f);
        let (back, trailer) = read_grid_function(&text).unwrap();
        assert!(trailer.is_empty());
        assert_eq!(&back, &f);
        // byte determinism
        assert_eq!(write_grid_function(&back), text);
    }

    #[test]
    fn ladder_constructors() {
        let l = RadiusLadder::dyadic(0.25, 2.0).unwrap();
        assert_eq!(l.radii(), &[0.25, 0.5, 1.0, 2.0]);
        assert!(RadiusLadder::new(vec![1.0, 1.0]).is_err());
        assert!(RadiusLadder::new(vec![]).is_err());
        assert!(RadiusLadder::new(vec![-1.0, 1.0]).is_err());
    }
}
