//! Atom potentials b = Φ ∗ a, their derivatives, truncated singular
//! integrals T*_α, and the discrete Δ^m residual check.
//!
//! The potential quadrature sums Φ(x-y)a(y)h^n over the atom's support. In
//! one dimension the kernels are continuous and the plain midpoint sum is
//! exactly consistent with the iterated difference stencil, so no diagonal
//! treatment is applied. For n ≥ 2 the kernel is singular (or non-smooth) on
//! the diagonal and source cells within 2h of the target are integrated by
//! dyadically graded midpoint quadrature toward the singular point.

use rayon::prelude::*;

use crate::atoms::Atom;
use crate::error::{Error, Result};
use crate::grid::{norm, sub, Cube, GridFunction, Point};
use crate::kernel::FundamentalSolution;
use crate::poly::{index_order, MultiIndex};
use crate::quadrature::graded_cube_quadrature;

fn kernel_closure(fs: &FundamentalSolution) -> impl Fn(Point) -> f64 + Sync + '_ {
    let e = 2 * fs.order_m as i32 - fs.dim as i32;
    let c = fs.constant;
    let log = matches!(fs.branch, crate::kernel::Branch::Log);
    let dim = fs.dim;
    move |z: Point| {
        let rho = norm(z, dim);
        let base = c * rho.powi(e);
        if log {
            base * rho.ln()
        } else {
            base
        }
    }
}

/// b(x) = ∫ Φ(x-y) a(y) dy on the atom's grid; when `region` is given, only
/// lattice points inside it are evaluated (the rest stay zero).
pub fn potential_field(fs: &FundamentalSolution, atom: &Atom, region: Option<&Cube>) -> Result<GridFunction> {
    let grid = atom.samples.grid().clone();
    if fs.dim != grid.dim() {
        return Err(Error::MismatchedGrids);
    }
    let h = grid.spacing();
    let dim = grid.dim();
    if atom.cube.side / h < 8.0 {
        return Err(Error::Resolution(format!(
            "atom cube holds {:.1} points per axis, need ≥ 8",
            atom.cube.side / h
        )));
    }
    // sources: nonzero samples inside the atom cube
    let mut sources: Vec<(Point, f64)> = Vec::new();
    grid.for_each_in_cube(&atom.cube, |i| {
        let v = atom.samples.value(i);
        if v != 0.0 {
            sources.push((grid.point(i), v));
        }
    });
    let hn = h.powi(dim as i32);
    let kernel = kernel_closure(fs);
    // 1d kernels are continuous and the plain sum telescopes exactly under
    // the difference stencil; n ≥ 2 needs the graded diagonal treatment.
    // Near offsets are lattice-aligned, so the 5^n distinct cell means are
    // precomputed once by deep graded quadrature and looked up per pair.
    let near_means: Option<Vec<f64>> = if dim >= 2 {
        let kappa = if dim == 2 { 16.0 } else { 4.0 };
        let mut means = Vec::with_capacity(5usize.pow(dim as u32));
        let k2 = if dim >= 3 { -2i32..=2 } else { 0..=0 };
        for k0 in -2i32..=2 {
            for k1 in -2i32..=2 {
                for k2v in k2.clone() {
                    let center = [k0 as f64 * h, k1 as f64 * h, k2v as f64 * h];
                    let cell = Cube { center, side: h, dim };
                    let v = graded_cube_quadrature(&cell, 8, 40, kappa, Some([0.0; 3]), &|p| kernel(p));
                    means.push(v / cell.volume());
                }
            }
        }
        Some(means)
    } else {
        None
    };
    let near_index = |z: Point| -> Option<usize> {
        let mut idx = 0usize;
        for zk in z.iter().take(dim) {
            let t = (zk / h).round();
            if t.abs() > 2.0 || (zk - t * h).abs() > 1e-9 * h {
                return None;
            }
            idx = idx * 5 + (t as i32 + 2) as usize;
        }
        Some(idx)
    };
    let targets: Vec<usize> = match region {
        None => (0..grid.len()).collect(),
        Some(r) => {
            let mut v = Vec::new();
            grid.for_each_in_cube(r, |i| v.push(i));
            v
        }
    };
    let values: Vec<f64> = targets
        .par_iter()
        .map(|&i| {
            let x = grid.point(i);
            let mut acc = 0.0;
            for &(y, a) in &sources {
                let z = sub(x, y);
                match &near_means {
                    Some(means) => match near_index(z) {
                        Some(idx) => acc += a * means[idx],
                        None => acc += a * kernel(z),
                    },
                    None => acc += a * kernel(z),
                }
            }
            acc * hn
        })
        .collect();
    let mut samples = vec![0.0; grid.len()];
    for (i, v) in targets.into_iter().zip(values) {
        samples[i] = v;
    }
    GridFunction::new(grid, samples)
}

/// ∂^α b(x) for x outside the atom support, differentiating under the
/// integral with the closed-form kernel derivative.
pub fn partial_potential_at(
    fs: &FundamentalSolution,
    atom: &Atom,
    alpha: MultiIndex,
    x: Point,
) -> Result<f64> {
    let k = fs.partial(alpha)?;
    let grid = atom.samples.grid();
    let hn = grid.spacing().powi(grid.dim() as i32);
    let mut acc = 0.0;
    let mut err = None;
    grid.for_each_in_cube(&atom.cube, |i| {
        let a = atom.samples.value(i);
        if a != 0.0 && err.is_none() {
            match k.eval(sub(x, grid.point(i))) {
                Ok(v) => acc += v * a,
                Err(e) => err = Some(e),
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(acc * hn)
}

/// Far-field ratio record for one probe point.
#[derive(Clone, Debug)]
pub struct DecayProbe {
    pub distance: f64,
    pub derivative: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct DecayCheck {
    pub probes: Vec<DecayProbe>,
    pub max_ratio: f64,
}

/// |∂^α b(x)| / (r^{2m+n}·w(Q)^{-1/p}·|x-x₀|^{-n-|α|}) over the probe set.
/// Probes closer than √n·r to the atom center are rejected.
pub fn far_field_decay_check(
    fs: &FundamentalSolution,
    atom: &Atom,
    alpha: MultiIndex,
    probes: &[Point],
) -> Result<DecayCheck> {
    let n = fs.dim as f64;
    let r = atom.cube.side;
    let min_dist = n.sqrt() * r;
    let w_factor = atom.weight.mass(&atom.cube)?.powf(-1.0 / atom.p);
    let scale = r.powf(2.0 * fs.order_m as f64 + n) * w_factor;
    let mut out = Vec::with_capacity(probes.len());
    let mut max_ratio = 0.0f64;
    for &x in probes {
        let dist = norm(sub(x, atom.cube.center), fs.dim);
        if dist < min_dist * (1.0 - 1e-9) {
            return Err(Error::Resolution(format!(
                "probe at distance {dist} is inside the √n·r = {min_dist} exclusion"
            )));
        }
        let db = partial_potential_at(fs, atom, alpha, x)?;
        let envelope = scale * dist.powf(-(n + index_order(alpha) as f64));
        let ratio = db.abs() / envelope;
        max_ratio = max_ratio.max(ratio);
        out.push(DecayProbe { distance: dist, derivative: db, ratio });
    }
    Ok(DecayCheck { probes: out, max_ratio })
}

/// Truncated singular integral ∫_{|x-y|>ε} (∂^α Φ)(x-y) a(y) dy, |α| = 2m.
pub fn truncated_singular(
    a: &GridFunction,
    fs: &FundamentalSolution,
    alpha: MultiIndex,
    x: Point,
    eps: f64,
) -> Result<f64> {
    if index_order(alpha) != 2 * fs.order_m {
        return Err(Error::DerivativeOrder(format!(
            "truncated integral needs |α| = 2m = {}, got {alpha:?}",
            2 * fs.order_m
        )));
    }
    let grid = a.grid();
    let h = grid.spacing();
    if eps < h * (1.0 - 1e-12) {
        return Err(Error::Resolution(format!("ε = {eps} below grid spacing {h}")));
    }
    let k = fs.partial(alpha)?;
    let hn = h.powi(grid.dim() as i32);
    let dim = grid.dim();
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let v = a.value(i);
        if v == 0.0 {
            continue;
        }
        let z = sub(x, grid.point(i));
        if norm(z, dim) > eps {
            acc += k.eval(z)? * v;
        }
    }
    Ok(acc * hn)
}

/// T*_α(a)(x) = sup over the dyadic ε-ladder of |truncated integral|.
pub fn t_star(
    a: &GridFunction,
    fs: &FundamentalSolution,
    alpha: MultiIndex,
    x: Point,
    eps_ladder: &[f64],
) -> Result<f64> {
    if eps_ladder.is_empty() {
        return Err(Error::Resolution("empty ε ladder".into()));
    }
    let mut best = 0.0f64;
    for &eps in eps_ladder {
        best = best.max(truncated_singular(a, fs, alpha, x, eps)?.abs());
    }
    Ok(best)
}

/// Default dyadic ε-ladder from 4h up to the domain side.
pub fn dyadic_eps_ladder(g: &GridFunction) -> Vec<f64> {
    let h = g.grid().spacing();
    let mut out = Vec::new();
    let mut eps = 4.0 * h;
    while eps <= g.grid().cube.side {
        out.push(eps);
        eps *= 2.0;
    }
    out
}

/// Apply the (2n+1)-point discrete Laplacian once (zero extension outside).
fn discrete_laplacian(u: &GridFunction) -> GridFunction {
    let grid = u.grid().clone();
    let n = grid.points_per_axis;
    let h2 = grid.spacing() * grid.spacing();
    let dim = grid.dim();
    let mut out = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let c = grid.coords(i);
        let mut acc = -2.0 * dim as f64 * u.value(i);
        for k in 0..dim {
            let mut cm = c;
            let mut cp = c;
            if c[k] > 0 {
                cm[k] = c[k] - 1;
                acc += u.value(grid.index(cm));
            }
            if c[k] + 1 < n {
                cp[k] = c[k] + 1;
                acc += u.value(grid.index(cp));
            }
        }
        out[i] = acc / h2;
    }
    GridFunction::new(grid, out).expect("stencil preserves the grid")
}

/// Relative L² residual of Δ_h^m b = f over `region`.
pub fn laplacian_residual_field(
    b: &GridFunction,
    f: &GridFunction,
    region: &Cube,
    m: usize,
) -> Result<f64> {
    let grid = b.grid();
    if f.grid() != grid {
        return Err(Error::MismatchedGrids);
    }
    let h = grid.spacing();
    // the m-fold stencil needs m clean halo cells inside the domain
    let halo = m as f64 * h;
    for k in 0..grid.dim() {
        if region.lo(k) < grid.cube.lo(k) + halo - 1e-12 || region.hi(k) > grid.cube.hi(k) - halo + 1e-12 {
            return Err(Error::TruncationContamination);
        }
    }
    let mut lap = b.clone();
    for _ in 0..m {
        lap = discrete_laplacian(&lap);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    grid.for_each_in_cube(region, |i| {
        let d = lap.value(i) - f.value(i);
        num += d * d;
        den += f.value(i) * f.value(i);
    });
    if den == 0.0 {
        return Err(Error::TrivialInput("zero target in residual region".into()));
    }
    Ok((num / den).sqrt())
}

/// Residual against the atom itself over the doubled cube 2Q.
pub fn laplacian_residual(b: &GridFunction, atom: &Atom, m: usize) -> Result<f64> {
    laplacian_residual_field(b, &atom.samples, &atom.cube.dilate(2.0), m)
}
