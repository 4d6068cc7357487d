//! Midpoint quadrature with dyadic grading toward a point singularity, and
//! the small dense solver used by polynomial fits and the minimax Newton.
//!
//! Cells within `kappa` cell-sizes of the singular point are dyadically
//! subdivided, so unrefined cells keep size ≤ dist/kappa. For |x|^e the
//! resulting relative error scales like 1/kappa² (the per-cell midpoint error
//! s^{n+2}|f''(d)| summed over the graded shells), and the per-depth
//! refinement increments are exactly geometric with ratio 2^{-(e+n)} — the
//! fact the divergence classifier in `weights` relies on.

use crate::error::{Error, Result};
use crate::grid::{Cube, Point};

/// Midpoint rule over `cube` with `cells_per_axis` top-level cells; cells
/// within `kappa` sizes of `singular` are dyadically subdivided up to `depth`
/// times.
pub fn graded_cube_quadrature(
    cube: &Cube,
    cells_per_axis: usize,
    depth: usize,
    kappa: f64,
    singular: Option<Point>,
    f: &dyn Fn(Point) -> f64,
) -> f64 {
    let dim = cube.dim;
    let delta = cube.side / cells_per_axis as f64;
    let mut total = 0.0;
    let nc = cells_per_axis;
    let n1 = if dim >= 2 { nc } else { 1 };
    let n2 = if dim >= 3 { nc } else { 1 };
    for i0 in 0..nc {
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let mut c = [0.0; 3];
                c[0] = cube.lo(0) + (i0 as f64 + 0.5) * delta;
                if dim >= 2 {
                    c[1] = cube.lo(1) + (i1 as f64 + 0.5) * delta;
                }
                if dim >= 3 {
                    c[2] = cube.lo(2) + (i2 as f64 + 0.5) * delta;
                }
                total += cell_contribution(dim, c, delta, depth, kappa, singular, f);
            }
        }
    }
    total
}

fn cell_near(dim: usize, center: Point, size: f64, kappa: f64, p: Point) -> bool {
    let reach = (0.5 + kappa) * size * (1.0 + 1e-12);
    (0..dim).all(|k| (p[k] - center[k]).abs() <= reach)
}

fn cell_contribution(
    dim: usize,
    center: Point,
    size: f64,
    depth: usize,
    kappa: f64,
    singular: Option<Point>,
    f: &dyn Fn(Point) -> f64,
) -> f64 {
    if depth > 0 {
        if let Some(s) = singular {
            if cell_near(dim, center, size, kappa, s) {
                let mut total = 0.0;
                let half = size / 2.0;
                let kids = 1usize << dim;
                for mask in 0..kids {
                    let mut c = center;
                    for k in 0..dim {
                        let sign = if mask >> k & 1 == 1 { 0.5 } else { -0.5 };
                        c[k] = center[k] + sign * half;
                    }
                    total += cell_contribution(dim, c, half, depth - 1, kappa, singular, f);
                }
                return total;
            }
        }
    }
    let v = f(center);
    if !v.is_finite() {
        // midpoint landed on the singularity; one forced split resolves it
        if size > 1e-300 {
            let mut total = 0.0;
            let half = size / 2.0;
            for mask in 0..(1usize << dim) {
                let mut c = center;
                for k in 0..dim {
                    let sign = if mask >> k & 1 == 1 { 0.5 } else { -0.5 };
                    c[k] = center[k] + sign * half;
                }
                total += cell_contribution(dim, c, half, 0, kappa, singular, f);
            }
            return total;
        }
        return 0.0;
    }
    v * size.powi(dim as i32)
}

/// Quadrature estimates at a run of grading depths (shared base cells).
pub fn graded_depth_sequence(
    cube: &Cube,
    cells_per_axis: usize,
    depths: std::ops::Range<usize>,
    kappa: f64,
    singular: Option<Point>,
    f: &dyn Fn(Point) -> f64,
) -> Vec<f64> {
    depths.map(|d| graded_cube_quadrature(cube, cells_per_axis, d, kappa, singular, f)).collect()
}

/// Decay exponent β̂ of refinement increments between two grading depths:
/// increments d_k ~ 2^{-βk} give β̂ = log2(d_{k0}/d_{k0+span})/span.
///
/// Returns `None` when the increments are already at noise level (the
/// estimate has converged outright).
pub fn increment_decay_exponent(estimates: &[f64], k0: usize, span: usize) -> Option<f64> {
    assert!(k0 + span + 1 < estimates.len());
    let scale = estimates.last().unwrap().abs().max(1e-300);
    let d0 = (estimates[k0 + 1] - estimates[k0]).abs();
    let d1 = (estimates[k0 + span + 1] - estimates[k0 + span]).abs();
    if d0 <= 1e-13 * scale && d1 <= 1e-13 * scale {
        return None;
    }
    Some((d0.max(1e-300) / d1.max(1e-300)).log2() / span as f64)
}

/// Solve the dense system A·x = b by Gaussian elimination with partial
/// pivoting. `a` is n×n row-major and is destroyed.
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return Err(Error::CubeTooSmall("singular normal equations".into()));
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    Ok(x)
}
