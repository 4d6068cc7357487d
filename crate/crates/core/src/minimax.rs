//! Local polynomial approximation and the quotient maximal function N_{q,γ}.
//!
//! N_{q,γ}(G; x) = inf over representatives g − P of sup over the radius
//! ladder of r^{-γ}|g − P|_{q,Q(x,r)}. For q = 2 each ladder term squared is a
//! convex quadratic in the polynomial coefficients, so the minimax problem is
//! an epigraph QCQP: minimize t subject to w_r²·Q_r(c) ≤ t. It is solved by a
//! log-barrier Newton method whose duality gap is certified by μ·R. A
//! coefficient-space grid search (≤ 3 coefficients) backs the solver up and
//! doubles as the independent oracle in tests; a Polyak-step subgradient
//! descent covers q ≠ 2 best-effort.

use crate::error::{Error, Result};
use crate::grid::{Cube, GridFunction, Point, RadiusLadder};
use crate::poly::{poly_basis, MultiIndex};
use crate::quadrature::solve_dense;

/// Polynomial in the centered, scaled monomial basis ((y - center)/scale)^α.
#[derive(Clone, Debug)]
pub struct LocalPoly {
    pub dim: usize,
    pub center: Point,
    pub scale: f64,
    pub basis: Vec<MultiIndex>,
    pub coeffs: Vec<f64>,
}

impl LocalPoly {
    pub fn zero(dim: usize, center: Point, scale: f64, degree: usize) -> Self {
        let basis = poly_basis(dim, degree);
        let coeffs = vec![0.0; basis.len()];
        LocalPoly { dim, center, scale, basis, coeffs }
    }

    pub fn eval(&self, p: Point) -> f64 {
        let mut z = [0.0; 3];
        for k in 0..self.dim {
            z[k] = (p[k] - self.center[k]) / self.scale;
        }
        let mut sum = 0.0;
        for (alpha, c) in self.basis.iter().zip(&self.coeffs) {
            if *c == 0.0 {
                continue;
            }
            let mut v = *c;
            for k in 0..self.dim {
                v *= z[k].powi(alpha[k] as i32);
            }
            sum += v;
        }
        sum
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.abs() <= tol)
    }
}

/// A grid function regarded modulo polynomials of degree ≤ `degree`.
#[derive(Clone, Debug)]
pub struct QuotientElement {
    pub rep: GridFunction,
    pub degree: usize,
}

impl QuotientElement {
    pub fn new(rep: GridFunction, degree: usize) -> Self {
        QuotientElement { rep, degree }
    }

    /// Two elements are equivalent iff their difference fits a degree ≤ k
    /// polynomial with relative residual below `tol` on the whole grid.
    pub fn equivalent(&self, other: &QuotientElement, tol: f64) -> Result<bool> {
        if self.degree != other.degree {
            return Ok(false);
        }
        let mut diff = self.rep.clone();
        diff.add_scaled(-1.0, &other.rep)?;
        let cube = diff.grid().cube;
        let norm = diff.local_norm(2.0, &cube)?;
        if norm == 0.0 {
            return Ok(true);
        }
        let (_, residual) = best_local_polynomial(&diff, 2.0, self.degree, &cube)?;
        Ok(residual <= tol * norm)
    }
}

fn basis_values(basis: &[MultiIndex], dim: usize, z: [f64; 3]) -> Vec<f64> {
    basis
        .iter()
        .map(|alpha| {
            let mut v = 1.0;
            for k in 0..dim {
                v *= z[k].powi(alpha[k] as i32);
            }
            v
        })
        .collect()
}

/// P minimizing |g - P|_{q,Q} over polynomials of degree ≤ `degree`.
/// Exact weighted least squares at q = 2; iteratively reweighted least
/// squares otherwise. Returns (P, residual local norm).
pub fn best_local_polynomial(
    g: &GridFunction,
    q: f64,
    degree: usize,
    cube: &Cube,
) -> Result<(LocalPoly, f64)> {
    if !(q >= 1.0) {
        return Err(Error::InvalidExponent(format!("best fit needs q ≥ 1, got {q}")));
    }
    let grid = g.grid();
    let dim = grid.dim();
    let basis = poly_basis(dim, degree);
    let k = basis.len();
    let mut idx = Vec::new();
    grid.for_each_in_cube(cube, |i| idx.push(i));
    if idx.is_empty() {
        return Err(Error::EmptyCube);
    }
    if idx.len() < 3 * k {
        return Err(Error::CubeTooSmall(format!(
            "{} lattice points cannot determine {} coefficients (need 3×)",
            idx.len(),
            k
        )));
    }
    let scale = cube.side;
    let rows: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| {
            let p = grid.point(i);
            let mut z = [0.0; 3];
            for d in 0..dim {
                z[d] = (p[d] - cube.center[d]) / scale;
            }
            basis_values(&basis, dim, z)
        })
        .collect();
    let values: Vec<f64> = idx.iter().map(|&i| g.value(i)).collect();

    let solve_weighted = |w: &[f64]| -> Result<Vec<f64>> {
        let mut h = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for (row, (&v, &wi)) in rows.iter().zip(values.iter().zip(w)) {
            for a in 0..k {
                rhs[a] += wi * v * row[a];
                for b in 0..k {
                    h[a * k + b] += wi * row[a] * row[b];
                }
            }
        }
        solve_dense(&mut h, &mut rhs, k)
    };

    let uniform = vec![1.0; idx.len()];
    let mut coeffs = solve_weighted(&uniform)?;
    if q != 2.0 {
        let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let objective = |c: &[f64]| -> f64 {
            rows.iter().zip(&values).map(|(row, &v)| (v - dot(row, c)).abs().powf(q)).sum()
        };
        // plain IRLS diverges for q > 2: damp the update and fall back on
        // halving when the objective refuses to decrease
        let lambda0 = if q > 2.0 { 1.0 / (q - 1.0) } else { 1.0 };
        let mut obj = objective(&coeffs);
        for _ in 0..400 {
            let weights: Vec<f64> = rows
                .iter()
                .zip(&values)
                .map(|(row, &v)| {
                    let e = (v - dot(row, &coeffs)).abs().max(1e-10 * vmax);
                    e.powf(q - 2.0)
                })
                .collect();
            let target = solve_weighted(&weights)?;
            let mut lambda = lambda0;
            let mut moved = 0.0;
            for _ in 0..30 {
                let trial: Vec<f64> =
                    coeffs.iter().zip(&target).map(|(c, t)| c + lambda * (t - c)).collect();
                let trial_obj = objective(&trial);
                if trial_obj <= obj {
                    moved = trial
                        .iter()
                        .zip(&coeffs)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0f64, f64::max);
                    coeffs = trial;
                    obj = trial_obj;
                    break;
                }
                lambda *= 0.5;
            }
            let size = coeffs.iter().map(|c| c.abs()).fold(0.0f64, f64::max).max(1e-300);
            if moved <= 1e-9 * size {
                break;
            }
        }
    }
    let poly = LocalPoly { dim, center: cube.center, scale, basis, coeffs };
    let mut sum = 0.0;
    for (row, &v) in rows.iter().zip(&values) {
        sum += (v - dot(row, &poly.coeffs)).abs().powf(q);
    }
    let denom = if grid.cube.covers(cube) {
        idx.len() as f64
    } else {
        (cube.side / grid.spacing()).powi(dim as i32)
    };
    Ok((poly, (sum / denom).powf(1.0 / q)))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct RadiusData {
    r: f64,
    w2: f64,        // r^{-2γ}
    gram: Vec<f64>, // K×K, mean of ψψᵀ
    lin: Vec<f64>,  // mean of g·ψ
    sq: f64,        // mean of g²
}

impl RadiusData {
    /// mean |g - P|² on this cube as a function of coefficients.
    fn quad(&self, c: &[f64], k: usize) -> f64 {
        let mut v = self.sq;
        for a in 0..k {
            v -= 2.0 * self.lin[a] * c[a];
            for b in 0..k {
                v += c[a] * self.gram[a * k + b] * c[b];
            }
        }
        v.max(0.0)
    }

    /// ∇ of w2·quad.
    fn grad(&self, c: &[f64], k: usize, out: &mut [f64]) {
        for a in 0..k {
            let mut v = -2.0 * self.lin[a];
            for b in 0..k {
                v += 2.0 * self.gram[a * k + b] * c[b];
            }
            out[a] = self.w2 * v;
        }
    }
}

fn assemble_radius_data(
    g: &GridFunction,
    x: Point,
    gamma: f64,
    ladder: &RadiusLadder,
    basis: &[MultiIndex],
    scale: f64,
) -> Vec<RadiusData> {
    let grid = g.grid();
    let dim = grid.dim();
    let k = basis.len();
    let mut out = Vec::new();
    for &r in ladder.radii() {
        let cube = Cube { center: x, side: r, dim };
        let mut idx = Vec::new();
        grid.for_each_in_cube(&cube, |i| idx.push(i));
        if idx.is_empty() {
            continue;
        }
        let m = if grid.cube.covers(&cube) {
            idx.len() as f64
        } else {
            (r / grid.spacing()).powi(dim as i32)
        };
        let mut gram = vec![0.0; k * k];
        let mut lin = vec![0.0; k];
        let mut sq = 0.0;
        for &i in &idx {
            let p = grid.point(i);
            let mut z = [0.0; 3];
            for d in 0..dim {
                z[d] = (p[d] - x[d]) / scale;
            }
            let psi = basis_values(basis, dim, z);
            let v = g.value(i);
            sq += v * v;
            for a in 0..k {
                lin[a] += v * psi[a];
                for b in a..k {
                    gram[a * k + b] += psi[a] * psi[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                gram[a * k + b] = gram[b * k + a];
            }
        }
        let inv = 1.0 / m;
        for v in gram.iter_mut() {
            *v *= inv;
        }
        for v in lin.iter_mut() {
            *v *= inv;
        }
        sq *= inv;
        out.push(RadiusData { r, w2: r.powf(-2.0 * gamma), gram, lin, sq });
    }
    out
}

/// Result of one N_{q,γ} evaluation.
#[derive(Clone, Debug)]
pub struct NMaximalResult {
    pub value: f64,
    pub minimizer: LocalPoly,
    /// Certified optimality gap (q = 2) or stall heuristic bound (q ≠ 2).
    pub gap: f64,
    pub iterations: usize,
    /// Radius attaining the max at the optimum.
    pub active_radius: f64,
}

impl NMaximalResult {
    /// One-line record: the value followed by the minimizing polynomial
    /// coefficients (centered scaled basis), 17 significant digits each.
    pub fn describe(&self) -> String {
        let coeffs: Vec<String> =
            self.minimizer.coeffs.iter().map(|c| crate::grid::format_f64(*c)).collect();
        format!(
            "value = {} minimizer_coeffs = [{}] active_radius = {}",
            crate::grid::format_f64(self.value),
            coeffs.join(", "),
            crate::grid::format_f64(self.active_radius)
        )
    }
}

fn objective_sq(radii: &[RadiusData], c: &[f64], k: usize) -> (f64, f64) {
    let mut best = 0.0;
    let mut arg = radii[0].r;
    for rd in radii {
        let v = rd.w2 * rd.quad(c, k);
        if v > best {
            best = v;
            arg = rd.r;
        }
    }
    (best, arg)
}

/// N_{q,γ}(G; x) over the radius ladder. The modulus degree of `G` must match
/// the k of the unique decomposition γ = k + t with t ∈ (0,1].
pub fn n_maximal(
    g_class: &QuotientElement,
    q: f64,
    gamma: f64,
    x: Point,
    ladder: &RadiusLadder,
) -> Result<NMaximalResult> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidExponent(format!("N_{{q,γ}} needs γ > 0, got {gamma}")));
    }
    let k_expected = gamma.ceil() as usize - 1;
    if g_class.degree != k_expected {
        return Err(Error::ParameterWindow(format!(
            "modulus degree {} must equal ⌈γ⌉-1 = {k_expected} for γ = {gamma}",
            g_class.degree
        )));
    }
    let g = &g_class.rep;
    let dim = g.grid().dim();
    let basis = poly_basis(dim, g_class.degree);
    let scale = ladder.max();
    let radii = assemble_radius_data(g, x, gamma, ladder, &basis, scale);
    if radii.is_empty() {
        return Err(Error::LadderOutsideGrid(format!("no ladder radius reaches the grid from {x:?}")));
    }
    if q == 2.0 {
        let mut res = barrier_minimax(g_class, &radii, &basis, x, scale)?;
        // the Gram-form objective cancels catastrophically when the residual
        // is tiny against the data scale; report the direct pointwise value
        // of the returned minimizer instead
        res.value = eta_of_candidate(g, q, gamma, x, ladder, &basis, scale, &res.minimizer.coeffs)?;
        Ok(res)
    } else {
        subgradient_minimax(g_class, q, gamma, x, ladder, &basis, scale)
    }
}

fn barrier_minimax(
    g_class: &QuotientElement,
    radii: &[RadiusData],
    basis: &[MultiIndex],
    x: Point,
    scale: f64,
) -> Result<NMaximalResult> {
    let dim = g_class.rep.grid().dim();
    let k = basis.len();
    let nr = radii.len();

    // warm start: least squares at the largest radius (most data)
    let mut c = vec![0.0; k];
    {
        let rd = radii.last().unwrap();
        let mut h = rd.gram.clone();
        let mut b = rd.lin.clone();
        for a in 0..k {
            h[a * k + a] += 1e-12 * (1.0 + rd.gram[a * k + a]);
        }
        if let Ok(sol) = solve_dense(&mut h, &mut b, k) {
            c = sol;
        }
    }
    let scale0 = {
        let zero = vec![0.0; k];
        objective_sq(radii, &zero, k).0
    };
    if scale0 == 0.0 {
        // zero data: the class of 0
        return Ok(NMaximalResult {
            value: 0.0,
            minimizer: LocalPoly { dim, center: x, scale, basis: basis.to_vec(), coeffs: vec![0.0; k] },
            gap: 0.0,
            iterations: 0,
            active_radius: radii.last().unwrap().r,
        });
    }

    let (f0, _) = objective_sq(radii, &c, k);
    let mut t = 1.05 * f0 + 1e-14 * scale0 + 1e-300;
    let mut mu = (t / nr as f64).max(1e-300);
    let mut iterations = 0usize;
    let mut grad_r = vec![0.0; k];
    let dimz = k + 1;
    let mut hess = vec![0.0; dimz * dimz];
    let mut rhs = vec![0.0; dimz];

    for _outer in 0..64 {
        for _inner in 0..60 {
            iterations += 1;
            // slacks
            let mut slacks = Vec::with_capacity(nr);
            let mut ok = true;
            for rd in radii {
                let s = t - rd.w2 * rd.quad(&c, k);
                if s <= 0.0 {
                    ok = false;
                }
                slacks.push(s.max(1e-300));
            }
            debug_assert!(ok, "infeasible barrier iterate");
            // gradient and Hessian of t - μ Σ ln s_r
            hess.iter_mut().for_each(|v| *v = 0.0);
            rhs.iter_mut().for_each(|v| *v = 0.0);
            rhs[k] = 1.0;
            for (rd, &s) in radii.iter().zip(&slacks) {
                rd.grad(&c, k, &mut grad_r);
                let inv = 1.0 / s;
                let inv2 = inv * inv;
                for a in 0..k {
                    rhs[a] += mu * grad_r[a] * inv;
                    for b in 0..k {
                        hess[a * dimz + b] +=
                            mu * (grad_r[a] * grad_r[b] * inv2 + 2.0 * rd.w2 * rd.gram[a * k + b] * inv);
                    }
                    hess[a * dimz + k] -= mu * grad_r[a] * inv2;
                    hess[k * dimz + a] -= mu * grad_r[a] * inv2;
                }
                rhs[k] -= mu * inv;
                hess[k * dimz + k] += mu * inv2;
            }
            // Newton step: solve H dz = -grad
            let mut neg = rhs.clone();
            for v in neg.iter_mut() {
                *v = -*v;
            }
            let mut hmat = hess.clone();
            for a in 0..dimz {
                hmat[a * dimz + a] += 1e-14 * (1.0 + hmat[a * dimz + a].abs());
            }
            let dz = match solve_dense(&mut hmat, &mut neg, dimz) {
                Ok(d) => d,
                Err(_) => break,
            };
            // step keeping slacks positive
            let mut alpha = 1.0f64;
            for (rd, _) in radii.iter().zip(&slacks) {
                // conservative: backtrack on violation below
                let _ = rd;
            }
            let base = barrier_value(radii, &c, t, mu, k);
            let mut accepted = false;
            for _ in 0..60 {
                let mut c_try = c.clone();
                for a in 0..k {
                    c_try[a] += alpha * dz[a];
                }
                let t_try = t + alpha * dz[k];
                let feasible = radii.iter().all(|rd| t_try - rd.w2 * rd.quad(&c_try, k) > 0.0);
                if feasible {
                    let val = barrier_value(radii, &c_try, t_try, mu, k);
                    if val <= base + 1e-12 * base.abs() {
                        c = c_try;
                        t = t_try;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let grad_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !accepted || grad_norm <= 1e-12 * (1.0 + t.abs()) {
                break;
            }
        }
        let gap = mu * nr as f64;
        if gap <= 1e-11 * t.max(1e-300) || t <= 1e-28 * scale0 {
            let (fsq, active) = objective_sq(radii, &c, k);
            return Ok(NMaximalResult {
                value: fsq.sqrt(),
                minimizer: LocalPoly { dim, center: x, scale, basis: basis.to_vec(), coeffs: c },
                gap: gap.sqrt(),
                iterations,
                active_radius: active,
            });
        }
        mu /= 10.0;
    }
    let (fsq, _) = objective_sq(radii, &c, k);
    Err(Error::OptimizerStall { best_value: fsq.sqrt(), gap: mu * nr as f64 })
}

fn barrier_value(radii: &[RadiusData], c: &[f64], t: f64, mu: f64, k: usize) -> f64 {
    let mut v = t;
    for rd in radii {
        let s = t - rd.w2 * rd.quad(c, k);
        if s <= 0.0 {
            return f64::INFINITY;
        }
        v -= mu * s.ln();
    }
    v
}

/// Direct evaluation of sup_r r^{-γ}|g - P_c|_{q,Q(x,r)} for explicit
/// coefficients; shared by the subgradient path and the grid-search oracle
/// (pointwise sums, no Gram assembly).
pub fn eta_of_candidate(
    g: &GridFunction,
    q: f64,
    gamma: f64,
    x: Point,
    ladder: &RadiusLadder,
    basis: &[MultiIndex],
    scale: f64,
    coeffs: &[f64],
) -> Result<f64> {
    let grid = g.grid();
    let dim = grid.dim();
    let mut best: Option<f64> = None;
    for &r in ladder.radii() {
        let cube = Cube { center: x, side: r, dim };
        let mut idx = Vec::new();
        grid.for_each_in_cube(&cube, |i| idx.push(i));
        if idx.is_empty() {
            continue;
        }
        let m = if grid.cube.covers(&cube) {
            idx.len() as f64
        } else {
            (r / grid.spacing()).powi(dim as i32)
        };
        let mut sum = 0.0;
        for &i in &idx {
            let p = grid.point(i);
            let mut z = [0.0; 3];
            for d in 0..dim {
                z[d] = (p[d] - x[d]) / scale;
            }
            let psi = basis_values(basis, dim, z);
            sum += (g.value(i) - dot(&psi, coeffs)).abs().powf(q);
        }
        let v = r.powf(-gamma) * (sum / m).powf(1.0 / q);
        best = Some(best.map_or(v, |b: f64| b.max(v)));
    }
    best.ok_or_else(|| Error::LadderOutsideGrid(format!("no ladder radius reaches the grid from {x:?}")))
}

fn subgradient_minimax(
    g_class: &QuotientElement,
    q: f64,
    gamma: f64,
    x: Point,
    ladder: &RadiusLadder,
    basis: &[MultiIndex],
    scale: f64,
) -> Result<NMaximalResult> {
    let g = &g_class.rep;
    let grid = g.grid();
    let dim = grid.dim();
    let k = basis.len();
    // LS warm start via the q=2 machinery
    let radii2 = assemble_radius_data(g, x, gamma, ladder, basis, scale);
    let mut c = vec![0.0; k];
    {
        let rd = radii2.last().unwrap();
        let mut h = rd.gram.clone();
        let mut b = rd.lin.clone();
        for a in 0..k {
            h[a * k + a] += 1e-12 * (1.0 + rd.gram[a * k + a]);
        }
        if let Ok(sol) = solve_dense(&mut h, &mut b, k) {
            c = sol;
        }
    }
    let eval = |c: &[f64]| eta_of_candidate(g, q, gamma, x, ladder, basis, scale, c);
    let mut best_c = c.clone();
    let mut best_f = eval(&c)?;
    if best_f == 0.0 {
        return Ok(NMaximalResult {
            value: 0.0,
            minimizer: LocalPoly { dim, center: x, scale, basis: basis.to_vec(), coeffs: best_c },
            gap: 0.0,
            iterations: 0,
            active_radius: ladder.max(),
        });
    }
    let mut delta = 0.1 * best_f;
    let mut since_improve = 0usize;
    let cap = 20_000usize;
    let tol = 1e-6;
    for iter in 0..cap {
        // subgradient at the active radius
        let (sub, f_cur) = subgradient_at(g, q, gamma, x, ladder, basis, scale, &c)?;
        if f_cur < best_f * (1.0 - 1e-12) {
            best_f = f_cur;
            best_c = c.clone();
            since_improve = 0;
        } else {
            since_improve += 1;
        }
        let gnorm2: f64 = sub.iter().map(|v| v * v).sum();
        if gnorm2 <= 1e-300 {
            break;
        }
        let target = (best_f - delta).max(0.0);
        let step = (f_cur - target) / gnorm2;
        for a in 0..k {
            c[a] -= step * sub[a];
        }
        if since_improve > 800 {
            delta *= 0.5;
            since_improve = 0;
            c = best_c.clone();
        }
        if delta <= tol * best_f && iter > 200 {
            return Ok(NMaximalResult {
                value: best_f,
                minimizer: LocalPoly { dim, center: x, scale, basis: basis.to_vec(), coeffs: best_c },
                gap: delta,
                iterations: iter,
                active_radius: ladder.max(),
            });
        }
    }
    Err(Error::OptimizerStall { best_value: best_f, gap: delta })
}

#[allow(clippy::too_many_arguments)]
fn subgradient_at(
    g: &GridFunction,
    q: f64,
    gamma: f64,
    x: Point,
    ladder: &RadiusLadder,
    basis: &[MultiIndex],
    scale: f64,
    coeffs: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let grid = g.grid();
    let dim = grid.dim();
    let k = basis.len();
    let mut best_v = -1.0;
    let mut best_grad = vec![0.0; k];
    for &r in ladder.radii() {
        let cube = Cube { center: x, side: r, dim };
        let mut idx = Vec::new();
        grid.for_each_in_cube(&cube, |i| idx.push(i));
        if idx.is_empty() {
            continue;
        }
        let m = if grid.cube.covers(&cube) {
            idx.len() as f64
        } else {
            (r / grid.spacing()).powi(dim as i32)
        };
        let mut sum = 0.0;
        let mut gsum = vec![0.0; k];
        for &i in &idx {
            let p = grid.point(i);
            let mut z = [0.0; 3];
            for d in 0..dim {
                z[d] = (p[d] - x[d]) / scale;
            }
            let psi = basis_values(basis, dim, z);
            let e = g.value(i) - dot(&psi, coeffs);
            sum += e.abs().powf(q);
            let w = e.abs().powf(q - 1.0) * e.signum();
            for a in 0..k {
                gsum[a] -= w * psi[a];
            }
        }
        let mean = sum / m;
        let v = r.powf(-gamma) * mean.powf(1.0 / q);
        if v > best_v {
            best_v = v;
            let factor = r.powf(-gamma) * mean.powf(1.0 / q - 1.0) / m;
            for a in 0..k {
                best_grad[a] = factor * gsum[a];
            }
        }
    }
    if best_v < 0.0 {
        return Err(Error::LadderOutsideGrid("subgradient found no usable radius".into()));
    }
    Ok((best_grad, best_v))
}

/// Independent coefficient-space grid-search oracle (≤ 3 coefficients):
/// refining passes of a 13-point-per-axis search, pointwise residual sums,
/// lexicographically smallest coefficient vector among ε-equal optima.
pub fn n_maximal_grid_oracle(
    g_class: &QuotientElement,
    q: f64,
    gamma: f64,
    x: Point,
    ladder: &RadiusLadder,
    passes: usize,
) -> Result<NMaximalResult> {
    let g = &g_class.rep;
    let dim = g.grid().dim();
    let basis = poly_basis(dim, g_class.degree);
    let k = basis.len();
    if k > 3 {
        return Err(Error::CubeTooSmall(format!("grid-search oracle supports ≤ 3 coefficients, got {k}")));
    }
    let scale = ladder.max();
    let eval = |c: &[f64]| eta_of_candidate(g, q, gamma, x, ladder, &basis, scale, c);
    let f_zero = eval(&vec![0.0; k])?;
    let mut center = vec![0.0; k];
    let mut half = vec![6.0 * f_zero.max(1e-12) * scale.powf(gamma); k];
    let mut best_c = center.clone();
    let mut best_f = f_zero;
    let steps = 13usize;
    let mut evals = 0usize;
    // convexity keeps the optimum within one cell of the per-pass best, so
    // halving the box each pass never loses it
    for _ in 0..passes {
        let mut pass_best_f = f64::INFINITY;
        let mut pass_best_c = best_c.clone();
        let mut counter = vec![0usize; k];
        loop {
            let mut c = vec![0.0; k];
            for a in 0..k {
                c[a] = center[a] - half[a] + 2.0 * half[a] * counter[a] as f64 / (steps - 1) as f64;
            }
            let f = eval(&c)?;
            evals += 1;
            // strict improvement or lexicographic tie-break at ε-equality
            if f < pass_best_f * (1.0 - 1e-12)
                || ((f - pass_best_f).abs() <= 1e-12 * pass_best_f.max(1e-300) && c < pass_best_c)
            {
                pass_best_f = f;
                pass_best_c = c;
            }
            // odometer
            let mut a = 0;
            loop {
                counter[a] += 1;
                if counter[a] < steps {
                    break;
                }
                counter[a] = 0;
                a += 1;
                if a == k {
                    break;
                }
            }
            if a == k {
                break;
            }
        }
        if pass_best_f <= best_f {
            best_f = pass_best_f;
            best_c = pass_best_c;
        }
        center = best_c.clone();
        for h in half.iter_mut() {
            *h /= 2.0;
        }
    }
    Ok(NMaximalResult {
        value: best_f,
        minimizer: LocalPoly { dim, center: x, scale, basis, coeffs: best_c },
        gap: half.iter().fold(0.0f64, |m, h| m.max(*h)),
        iterations: evals,
        active_radius: ladder.max(),
    })
}
