//! Muckenhoupt and reverse-Hölder machinery: class constants over cube
//! families, critical indices q_w and r_w, and the empirical Fefferman–Stein
//! vector-valued check.
//!
//! Divergence of a class constant is decided from the decay exponent of
//! quadrature increments under dyadic grading toward the origin: for power
//! integrands the increments are exactly geometric (rate 2^{-(e+n)} for
//! |x|^e), so a logarithmically divergent dual average shows up as a flat
//! increment sequence while any integrable one decays geometrically.

use crate::error::{Error, Result};
use crate::grid::{Cube, Grid, GridFunction, Point};
use crate::maximal::{hl_maximal, SideLadder};
use crate::quadrature::{graded_cube_quadrature, graded_depth_sequence, increment_decay_exponent};

/// Increment-decay exponent below which an estimate is declared divergent.
/// Keeps bisection agreement with the closed-form critical indices within
/// 0.05 for the power weights of interest (|a| ≤ 1/2 at n = 1).
pub const DIVERGENCE_BETA_MIN: f64 = 0.02;

const SCAN_DEPTHS: usize = 45;
const SCAN_K0: usize = 16;
const SCAN_SPAN: usize = 24;

fn quad_cells(dim: usize) -> usize {
    match dim {
        1 => 256,
        2 => 48,
        _ => 16,
    }
}

/// Grading width for value quadrature (error ~ 1/kappa²); scans use a narrow
/// width since only the geometric increment ratio matters there.
fn quad_kappa(dim: usize) -> f64 {
    match dim {
        1 => 64.0,
        2 => 8.0,
        _ => 4.0,
    }
}

const SCAN_KAPPA: f64 = 2.0;
const QUAD_DEPTH: usize = 36;

#[derive(Clone, Debug)]
pub enum WeightKind {
    Power { a: f64 },
    Tabulated(GridFunction),
}

/// A weight: nonnegative, locally integrable, positive a.e.
#[derive(Clone, Debug)]
pub struct Weight {
    pub kind: WeightKind,
    pub dim: usize,
}

impl Weight {
    /// |x|^a; locally integrable requires a > -n.
    pub fn power(dim: usize, a: f64) -> Result<Self> {
        if a <= -(dim as f64) {
            return Err(Error::NonIntegrableWeight(format!("|x|^{a} with a ≤ -n = {}", -(dim as f64))));
        }
        Ok(Weight { kind: WeightKind::Power { a }, dim })
    }

    pub fn one(dim: usize) -> Self {
        Weight { kind: WeightKind::Power { a: 0.0 }, dim }
    }

    pub fn tabulated(samples: GridFunction) -> Result<Self> {
        if samples.samples().iter().any(|&s| s <= 0.0) {
            return Err(Error::NonIntegrableWeight("tabulated weight must be positive".into()));
        }
        let dim = samples.grid().dim();
        Ok(Weight { kind: WeightKind::Tabulated(samples), dim })
    }

    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            WeightKind::Power { a } => Some(a),
            _ => None,
        }
    }

    /// Pointwise value. For power weights with a < 0 the origin evaluates to
    /// +∞; midpoint lattices never sample it, and norm code checks finiteness.
    pub fn eval(&self, p: Point) -> f64 {
        match &self.kind {
            WeightKind::Power { a } => {
                if *a == 0.0 {
                    1.0
                } else {
                    crate::grid::norm(p, self.dim).powf(*a)
                }
            }
            WeightKind::Tabulated(g) => g.value(g.grid().nearest_index(p)),
        }
    }

    /// w(Q) = ∫_Q w, graded midpoint quadrature.
    pub fn mass(&self, cube: &Cube) -> Result<f64> {
        self.power_integral(cube, 1.0)
    }

    /// ∫_Q w^s for a real power s (s may be negative for dual averages).
    pub fn power_integral(&self, cube: &Cube, s: f64) -> Result<f64> {
        if cube.dim != self.dim {
            return Err(Error::MismatchedGrids);
        }
        match &self.kind {
            WeightKind::Power { a } => {
                let e = a * s;
                if e <= -(self.dim as f64) {
                    return Err(Error::NonIntegrableWeight(format!(
                        "|x|^{e} is not integrable (exponent ≤ -n = {})",
                        -(self.dim as f64)
                    )));
                }
                let dim = self.dim;
                let singular = if e == 0.0 { None } else { Some([0.0; 3]) };
                Ok(graded_cube_quadrature(cube, quad_cells(dim), QUAD_DEPTH, quad_kappa(dim), singular, &|p| {
                    crate::grid::norm(p, dim).powf(e)
                }))
            }
            WeightKind::Tabulated(g) => {
                let pow = g.map(|v| v.powf(s));
                pow.integrate(cube)
            }
        }
    }

    fn average(&self, cube: &Cube, s: f64) -> Result<f64> {
        Ok(self.power_integral(cube, s)? / cube.volume())
    }
}

/// Closed-form critical indices of |x|^a: q_w = 1 + max(a,0)/n and
/// r_w = n/(-a) for a < 0, ∞ otherwise.
pub fn power_critical_indices_closed(a: f64, dim: usize) -> (f64, f64) {
    let n = dim as f64;
    let q_w = 1.0 + a.max(0.0) / n;
    let r_w = if a < 0.0 { n / (-a) } else { f64::INFINITY };
    (q_w, r_w)
}

/// Result of a class-constant estimate over a cube family.
#[derive(Clone, Debug)]
pub struct ClassEstimate {
    pub value: f64,
    pub diverged: bool,
    /// Increment-decay exponent β̂ measured by the origin scan (positive =
    /// geometric decay = finite; ≈ 0 or negative = divergent). NaN when no
    /// scan was needed.
    pub growth_exponent: f64,
    pub attained_on: Cube,
}

fn family_max(values: Vec<(f64, Cube)>) -> ClassEstimate {
    let mut best = values[0];
    for v in &values {
        if v.0 > best.0 {
            best = *v;
        }
    }
    ClassEstimate { value: best.0, diverged: false, growth_exponent: f64::NAN, attained_on: best.1 }
}

fn origin_cube(cubes: &[Cube]) -> Option<Cube> {
    cubes
        .iter()
        .filter(|c| c.contains([0.0; 3]))
        .max_by(|a, b| a.side.partial_cmp(&b.side).unwrap())
        .copied()
}

/// A_p constant estimate: max over the family of
/// (avg_Q w)·(avg_Q w^{-1/(p-1)})^{p-1}.
pub fn ap_constant(w: &Weight, p: f64, cubes: &[Cube]) -> Result<ClassEstimate> {
    if !(p > 1.0) {
        return Err(Error::InvalidExponent(format!("A_p needs p > 1, got {p}")));
    }
    if cubes.is_empty() {
        return Err(Error::EmptyCube);
    }
    let dual = -1.0 / (p - 1.0);
    // power weight with a non-integrable dual: scan instead of averaging
    if let Some(a) = w.power_exponent() {
        if a * dual <= -(w.dim as f64) {
            if let Some(q0) = origin_cube(cubes) {
                let (seq_value, beta) = scan_product(w.dim, a, dual, p - 1.0, &q0);
                return Ok(ClassEstimate {
                    value: seq_value,
                    diverged: true,
                    growth_exponent: beta,
                    attained_on: q0,
                });
            }
            // no family cube reaches the singularity: finite over this family
        }
    }
    let mut vals = Vec::with_capacity(cubes.len());
    for q in cubes {
        let a_w = w.average(q, 1.0)?;
        let a_d = match w.power_integral(q, dual) {
            Ok(v) => v / q.volume(),
            Err(Error::NonIntegrableWeight(_)) => continue,
            Err(e) => return Err(e),
        };
        vals.push((a_w * a_d.powf(p - 1.0), *q));
    }
    if vals.is_empty() {
        return Err(Error::NonIntegrableWeight("dual average non-integrable on every cube".into()));
    }
    let mut est = family_max(vals);
    // boundary / near-boundary detection for power weights
    if let Some(a) = w.power_exponent() {
        if a * dual < 0.0 {
            if let Some(q0) = origin_cube(cubes) {
                let (seq_value, beta) = scan_product(w.dim, a, dual, p - 1.0, &q0);
                if beta < DIVERGENCE_BETA_MIN {
                    est.diverged = true;
                    est.value = est.value.max(seq_value);
                }
                est.growth_exponent = beta;
            }
        }
    }
    Ok(est)
}

/// Reverse-Hölder constant estimate: max over the family of
/// (avg_Q w^s)^{1/s} / (avg_Q w).
pub fn rh_constant(w: &Weight, s: f64, cubes: &[Cube]) -> Result<ClassEstimate> {
    if !(s > 1.0) {
        return Err(Error::InvalidExponent(format!("RH_s needs s > 1, got {s}")));
    }
    if cubes.is_empty() {
        return Err(Error::EmptyCube);
    }
    if let Some(a) = w.power_exponent() {
        if a * s <= -(w.dim as f64) {
            if let Some(q0) = origin_cube(cubes) {
                let (seq_value, beta) = scan_rh(w.dim, a, s, &q0);
                return Ok(ClassEstimate {
                    value: seq_value,
                    diverged: true,
                    growth_exponent: beta,
                    attained_on: q0,
                });
            }
        }
    }
    let mut vals = Vec::with_capacity(cubes.len());
    for q in cubes {
        let a_w = w.average(q, 1.0)?;
        let a_s = match w.power_integral(q, s) {
            Ok(v) => v / q.volume(),
            Err(Error::NonIntegrableWeight(_)) => continue,
            Err(e) => return Err(e),
        };
        vals.push((a_s.powf(1.0 / s) / a_w, *q));
    }
    if vals.is_empty() {
        return Err(Error::NonIntegrableWeight("w^s non-integrable on every cube".into()));
    }
    let mut est = family_max(vals);
    if let Some(a) = w.power_exponent() {
        if a * s < 0.0 {
            if let Some(q0) = origin_cube(cubes) {
                let (seq_value, beta) = scan_rh(w.dim, a, s, &q0);
                if beta < DIVERGENCE_BETA_MIN {
                    est.diverged = true;
                    est.value = est.value.max(seq_value);
                }
                est.growth_exponent = beta;
            }
        }
    }
    Ok(est)
}

/// Depth scan of avg_w · (avg |x|^{a·dual})^{outer_pow} on a centered cube.
fn scan_product(dim: usize, a: f64, dual: f64, outer_pow: f64, q0: &Cube) -> (f64, f64) {
    let cells = 64;
    let vol = q0.volume();
    let avg_w = graded_cube_quadrature(q0, cells, SCAN_DEPTHS + 2, SCAN_KAPPA, Some([0.0; 3]), &|p| {
        crate::grid::norm(p, dim).powf(a)
    }) / vol;
    let e = a * dual;
    let seq = graded_depth_sequence(q0, cells, 0..(SCAN_DEPTHS + SCAN_SPAN), SCAN_KAPPA, Some([0.0; 3]), &|p| {
        crate::grid::norm(p, dim).powf(e)
    });
    let prods: Vec<f64> = seq.iter().map(|d| avg_w * (d / vol).powf(outer_pow)).collect();
    let beta = increment_decay_exponent(&prods, SCAN_K0, SCAN_SPAN).unwrap_or(f64::INFINITY);
    (*prods.last().unwrap(), beta)
}

fn scan_rh(dim: usize, a: f64, s: f64, q0: &Cube) -> (f64, f64) {
    let cells = 64;
    let vol = q0.volume();
    let avg_w = graded_cube_quadrature(q0, cells, SCAN_DEPTHS + 2, SCAN_KAPPA, Some([0.0; 3]), &|p| {
        crate::grid::norm(p, dim).powf(a)
    }) / vol;
    let seq = graded_depth_sequence(q0, cells, 0..(SCAN_DEPTHS + SCAN_SPAN), SCAN_KAPPA, Some([0.0; 3]), &|p| {
        crate::grid::norm(p, dim).powf(a * s)
    });
    let ests: Vec<f64> = seq.iter().map(|d| (d / vol).powf(1.0 / s) / avg_w).collect();
    let beta = increment_decay_exponent(&ests, SCAN_K0, SCAN_SPAN).unwrap_or(f64::INFINITY);
    (*ests.last().unwrap(), beta)
}

/// Default cube family: grid-aligned cubes with dyadic sides centered at
/// lattice points, capped by a deterministic per-level stride.
pub fn dyadic_family(grid: &Grid, cap: usize) -> Vec<Cube> {
    let h = grid.spacing();
    let mut sides = Vec::new();
    let mut s = 2.0 * h;
    while s <= grid.cube.side {
        sides.push(s);
        s *= 2.0;
    }
    if sides.is_empty() {
        sides.push(grid.cube.side);
    }
    let per_level = (cap / sides.len()).max(1);
    let mut cubes = Vec::new();
    for &side in &sides {
        let total = grid.len();
        let stride = (total / per_level).max(1);
        let mut i = 0;
        while i < total {
            let c = grid.point(i);
            cubes.push(Cube { center: c, side, dim: grid.dim() });
            i += stride;
        }
    }
    cubes.truncate(cap.max(1));
    cubes
}

/// Critical indices (q_w, r_w). Closed forms for power weights are confirmed
/// by a bisection scan on the divergence classifier before being reported;
/// tabulated weights are classified by scan only (bounded tables give the
/// trivial indices).
pub fn critical_indices(w: &Weight) -> Result<(f64, f64)> {
    let n = w.dim as f64;
    match w.kind {
        WeightKind::Power { a } => {
            let (q_closed, r_closed) = power_critical_indices_closed(a, w.dim);
            let q_scan = scan_q_w(w.dim, a);
            if (q_scan - q_closed).abs() > 0.05 {
                return Err(Error::CalibrationFailed(format!(
                    "q_w bisection {q_scan} disagrees with closed form {q_closed}"
                )));
            }
            let r_scan = scan_r_w(w.dim, a);
            match (r_closed.is_finite(), r_scan.is_finite()) {
                (true, true) => {
                    if (r_scan - r_closed).abs() > 0.05 {
                        return Err(Error::CalibrationFailed(format!(
                            "r_w bisection {r_scan} disagrees with closed form {r_closed}"
                        )));
                    }
                }
                (false, false) => {}
                _ => {
                    return Err(Error::CalibrationFailed(format!(
                        "r_w bisection {r_scan} disagrees with closed form {r_closed}"
                    )));
                }
            }
            Ok((q_closed, r_closed))
        }
        WeightKind::Tabulated(_) => {
            // bounded above and below: in every A_p and RH_s at desk scale
            let _ = n;
            Ok((1.0, f64::INFINITY))
        }
    }
}

fn dual_divergent(dim: usize, a: f64, p: f64) -> bool {
    let dual = -1.0 / (p - 1.0);
    let e = a * dual;
    if e >= 0.0 {
        return false;
    }
    if e <= -(dim as f64) {
        return true;
    }
    let q0 = Cube { center: [0.0; 3], side: 1.0, dim };
    let (_, beta) = scan_product(dim, a, dual, p - 1.0, &q0);
    beta < DIVERGENCE_BETA_MIN
}

fn rh_divergent(dim: usize, a: f64, s: f64) -> bool {
    let e = a * s;
    if e >= 0.0 {
        return false;
    }
    if e <= -(dim as f64) {
        return true;
    }
    let q0 = Cube { center: [0.0; 3], side: 1.0, dim };
    let (_, beta) = scan_rh(dim, a, s, &q0);
    beta < DIVERGENCE_BETA_MIN
}

fn scan_q_w(dim: usize, a: f64) -> f64 {
    if a <= 0.0 {
        // finite for every p > 1; confirm just above 1
        return if dual_divergent(dim, a, 1.05) { f64::NAN } else { 1.0 };
    }
    let mut lo = 1.0 + 1e-4; // divergent side
    let mut hi = 1.0 + a / (dim as f64) + 1.0; // finite side
    debug_assert!(dual_divergent(dim, a, lo));
    debug_assert!(!dual_divergent(dim, a, hi));
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if dual_divergent(dim, a, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn scan_r_w(dim: usize, a: f64) -> f64 {
    if a >= 0.0 {
        return if rh_divergent(dim, a, 8.0) { f64::NAN } else { f64::INFINITY };
    }
    let r_closed = -(dim as f64) / a;
    let mut lo = 1.0 + 1e-4; // finite side
    let mut hi = r_closed * 1.5 + 0.5; // divergent side
    debug_assert!(!rh_divergent(dim, a, lo));
    debug_assert!(rh_divergent(dim, a, hi));
    for _ in 0..24 {
        let mid = 0.5 * (lo + hi);
        if rh_divergent(dim, a, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// (Σ_x g(x)^p w(x) h^n)^{1/p} over the whole grid; p may be < 1 (quasi-norm).
pub fn weighted_lp_norm(g: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidExponent(format!("L^p(w) needs p > 0, got {p}")));
    }
    let grid = g.grid();
    let hn = grid.spacing().powi(grid.dim() as i32);
    let mut sum = 0.0;
    for i in 0..grid.len() {
        let wv = w.eval(grid.point(i));
        if !wv.is_finite() {
            return Err(Error::NonIntegrableWeight("weight singularity sampled on a node".into()));
        }
        sum += g.value(i).abs().powf(p) * wv;
    }
    Ok((sum * hn).powf(1.0 / p))
}

/// Empirical Fefferman–Stein vector-valued ratio
/// ‖(Σ (M f_j)^u)^{1/u}‖_{L^p(w)} / ‖(Σ |f_j|^u)^{1/u}‖_{L^p(w)}.
pub fn fefferman_stein_ratio(fs: &[GridFunction], u: f64, p: f64, w: &Weight) -> Result<f64> {
    if fs.is_empty() || fs.iter().all(|f| f.samples().iter().all(|&s| s == 0.0)) {
        return Err(Error::TrivialInput("trivial family".into()));
    }
    if !(u > 1.0) {
        return Err(Error::InvalidExponent(format!("Fefferman–Stein needs u > 1, got {u}")));
    }
    let grid = fs[0].grid().clone();
    let ladder = SideLadder::default_for(&grid);
    let mut num = GridFunction::zeros(grid.clone());
    let mut den = GridFunction::zeros(grid.clone());
    for f in fs {
        if f.grid() != &grid {
            return Err(Error::MismatchedGrids);
        }
        let mf = hl_maximal(f, &ladder)?;
        for i in 0..grid.len() {
            num.samples_mut()[i] += mf.value(i).powf(u);
            den.samples_mut()[i] += f.value(i).abs().powf(u);
        }
    }
    let num = num.map(|v| v.powf(1.0 / u));
    let den = den.map(|v| v.powf(1.0 / u));
    let dn = weighted_lp_norm(&den, w, p)?;
    if dn == 0.0 {
        return Err(Error::TrivialInput("trivial family".into()));
    }
    Ok(weighted_lp_norm(&num, w, p)? / dn)
}

/// Flat key–value record for one (w, p) classification.
#[derive(Clone, Debug)]
pub struct WeightClassReport {
    pub p: f64,
    pub ap_constant_estimate: f64,
    pub ap_diverged: bool,
    pub cube_family_size: usize,
    pub max_attained_on: Cube,
    pub rh_exponent: f64,
    pub rh_constant_estimate: f64,
    pub rh_diverged: bool,
}

impl WeightClassReport {
    pub fn to_kv(&self) -> String {
        let c = &self.max_attained_on;
        format!(
            "p = {}\nap_constant_estimate = {}\nap_diverged = {}\ncube_family_size = {}\n\
             max_attained_center = {}\nmax_attained_side = {}\nrh_exponent = {}\n\
             rh_constant_estimate = {}\nrh_diverged = {}\n",
            crate::grid::format_f64(self.p),
            crate::grid::format_f64(self.ap_constant_estimate),
            self.ap_diverged,
            self.cube_family_size,
            crate::grid::format_f64(c.center[0]),
            crate::grid::format_f64(c.side),
            crate::grid::format_f64(self.rh_exponent),
            crate::grid::format_f64(self.rh_constant_estimate),
            self.rh_diverged,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn centered_cubes(dim: usize) -> Vec<Cube> {
        [2.0, 1.0, 0.5, 0.25]
            .iter()
            .map(|&s| Cube { center: [0.0; 3], side: s, dim })
            .collect()
    }

    #[test]
    fn weight_mass_constant() {
        let w = Weight::one(1);
        let q = Cube::new(1, [0.0; 3], 1.5).unwrap();
        assert!((w.mass(&q).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn weight_mass_power_closed_form() {
        // ∫_{Q(0,r)} |x|^a dx = 2 (r/2)^{a+1}/(a+1) at n = 1
        for (a, r) in [(0.5, 2.0), (-0.5, 2.0), (0.5, 0.7), (1.3, 1.1)] {
            let w = Weight::power(1, a).unwrap();
            let q = Cube::new(1, [0.0; 3], r).unwrap();
            let exact = 2.0 * (r / 2.0f64).powf(a + 1.0) / (a + 1.0);
            let v = w.mass(&q).unwrap();
            assert!((v - exact).abs() < 1e-4 * exact, "a={a} r={r}: {v} vs {exact}");
        }
        // closed-form instance: |x|^{1/2} on Q(0,2) → 4/3
        let w = Weight::power(1, 0.5).unwrap();
        let q = Cube::new(1, [0.0; 3], 2.0).unwrap();
        assert!((w.mass(&q).unwrap() - 4.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn weight_mass_rejects_non_integrable() {
        assert!(Weight::power(1, -1.0).is_err());
        assert!(Weight::power(1, -1.5).is_err());
        assert!(Weight::power(2, -2.0).is_err());
    }

    #[test]
    fn weight_mass_additive_over_disjoint_cubes() {
        let w = Weight::power(1, 0.5).unwrap();
        let whole = Cube::new(1, [0.5, 0.0, 0.0], 1.0).unwrap();
        let left = Cube::new(1, [0.25, 0.0, 0.0], 0.5).unwrap();
        let right = Cube::new(1, [0.75, 0.0, 0.0], 0.5).unwrap();
        let a = w.mass(&whole).unwrap();
        let b = w.mass(&left).unwrap() + w.mass(&right).unwrap();
        assert!((a - b).abs() < 1e-4 * a);
    }

    #[test]
    fn ap_constant_of_one_is_one() {
        let w = Weight::one(1);
        let est = ap_constant(&w, 2.0, &centered_cubes(1)).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);
        assert!(!est.diverged);
    }

    #[test]
    fn ap_constant_power_half_finite_and_scale_stable() {
        let w = Weight::power(1, 0.5).unwrap();
        let fam = centered_cubes(1);
        let est = ap_constant(&w, 2.0, &fam).unwrap();
        assert!(!est.diverged, "beta = {}", est.growth_exponent);
        assert!(est.value >= 1.0 - 1e-9);
        // dilating the family leaves the estimate unchanged (homogeneity)
        let dilated: Vec<Cube> = fam.iter().map(|c| c.dilate(3.0)).collect();
        let est2 = ap_constant(&w, 2.0, &dilated).unwrap();
        assert!((est.value - est2.value).abs() < 1e-2 * est.value);
    }

    #[test]
    fn ap_constant_boundary_divergence_flag() {
        // a = n(p-1) exactly: dual average diverges logarithmically
        let w = Weight::power(1, 1.0).unwrap();
        let est = ap_constant(&w, 2.0, &centered_cubes(1)).unwrap();
        assert!(est.diverged);
        assert!(est.growth_exponent < DIVERGENCE_BETA_MIN);
    }

    #[test]
    fn ap_constant_monotone_in_p() {
        let w = Weight::power(1, 0.5).unwrap();
        let fam = centered_cubes(1);
        let c2 = ap_constant(&w, 2.0, &fam).unwrap().value;
        let c3 = ap_constant(&w, 3.0, &fam).unwrap().value;
        let c4 = ap_constant(&w, 4.0, &fam).unwrap().value;
        assert!(c3 <= c2 + 1e-9);
        assert!(c4 <= c3 + 1e-9);
    }

    #[test]
    fn rh_constant_examples() {
        let w = Weight::one(1);
        let est = rh_constant(&w, 2.0, &centered_cubes(1)).unwrap();
        assert!((est.value - 1.0).abs() < 1e-10);

        // |x|^{-1/2}: a·s = -3/4 > -1 finite; a·s = -1 divergent
        let w = Weight::power(1, -0.5).unwrap();
        let fine = rh_constant(&w, 1.5, &centered_cubes(1)).unwrap();
        assert!(!fine.diverged, "beta = {}", fine.growth_exponent);
        let div = rh_constant(&w, 2.0, &centered_cubes(1)).unwrap();
        assert!(div.diverged);
    }

    #[test]
    fn rh_constant_monotone_in_s() {
        let w = Weight::power(1, 0.5).unwrap();
        let fam = centered_cubes(1);
        let a = rh_constant(&w, 1.5, &fam).unwrap().value;
        let b = rh_constant(&w, 2.0, &fam).unwrap().value;
        let c = rh_constant(&w, 3.0, &fam).unwrap().value;
        assert!(a <= b + 1e-9);
        assert!(b <= c + 1e-9);
    }

    #[test]
    fn critical_indices_closed_forms() {
        let cases = [(-0.5, 1.0, 2.0), (0.0, 1.0, f64::INFINITY), (0.5, 1.5, f64::INFINITY)];
        for (a, q_exp, r_exp) in cases {
            let w = Weight::power(1, a).unwrap();
            let (q_w, r_w) = critical_indices(&w).unwrap();
            assert!((q_w - q_exp).abs() < 1e-12, "a={a}");
            if r_exp.is_finite() {
                assert!((r_w - r_exp).abs() < 1e-12, "a={a}");
            } else {
                assert!(r_w.is_infinite(), "a={a}");
            }
        }
    }

    #[test]
    fn critical_indices_bracket_membership() {
        // finite just above q_w, divergent just below (when > 1); same for r_w
        let w = Weight::power(1, 0.5).unwrap();
        let (q_w, _) = critical_indices(&w).unwrap();
        let fam = centered_cubes(1);
        assert!(!ap_constant(&w, q_w + 0.1, &fam).unwrap().diverged);
        assert!(ap_constant(&w, q_w - 0.1, &fam).unwrap().diverged);

        let w = Weight::power(1, -0.5).unwrap();
        let (_, r_w) = critical_indices(&w).unwrap();
        assert!(!rh_constant(&w, r_w - 0.1, &fam).unwrap().diverged);
        assert!(rh_constant(&w, r_w + 0.1, &fam).unwrap().diverged);
    }

    #[test]
    fn tabulated_weight_is_tame() {
        let grid = Grid::new(1, [0.0; 3], 2.0, 64).unwrap();
        let g = GridFunction::from_fn(grid, |p| 1.0 + 0.5 * (3.0 * p[0]).sin());
        let w = Weight::tabulated(g).unwrap();
        let (q_w, r_w) = critical_indices(&w).unwrap();
        assert_eq!(q_w, 1.0);
        assert!(r_w.is_infinite());
    }

    #[test]
    fn fefferman_stein_of_constant_family_is_one() {
        // M of a constant is the constant, so the vector ratio collapses to 1
        let grid = Grid::new(1, [0.0; 3], 4.0, 128).unwrap();
        let fam = vec![GridFunction::from_fn(grid, |_| 2.5)];
        let r = fefferman_stein_ratio(&fam, 2.0, 2.0, &Weight::one(1)).unwrap();
        assert!((r - 1.0).abs() < 1e-10, "{r}");
        // all-zero family is rejected as trivial
        let zgrid = Grid::new(1, [0.0; 3], 4.0, 128).unwrap();
        let zeros = vec![GridFunction::zeros(zgrid)];
        assert!(matches!(
            fefferman_stein_ratio(&zeros, 2.0, 2.0, &Weight::one(1)),
            Err(Error::TrivialInput(_))
        ));
    }

    #[test]
    fn class_report_kv_record() {
        let rep = WeightClassReport {
            p: 2.0,
            ap_constant_estimate: 1.5,
            ap_diverged: false,
            cube_family_size: 300,
            max_attained_on: Cube::new(1, [0.0; 3], 2.0).unwrap(),
            rh_exponent: 1.5,
            rh_constant_estimate: 1.04,
            rh_diverged: false,
        };
        let kv = rep.to_kv();
        for key in [
            "p = ",
            "ap_constant_estimate = ",
            "cube_family_size = 300",
            "max_attained_side = ",
            "rh_exponent = ",
            "rh_constant_estimate = ",
        ] {
            assert!(kv.contains(key), "missing {key} in {kv}");
        }
        // flat key-value record: every line splits at ' = '
        assert!(kv.lines().all(|l| l.contains(" = ")));
    }

    #[test]
    fn dyadic_family_respects_cap() {
        let grid = Grid::new(1, [0.0; 3], 4.0, 256).unwrap();
        let fam = dyadic_family(&grid, 500);
        assert!(fam.len() <= 500);
        assert!(!fam.is_empty());
        assert!(fam.iter().any(|c| c.contains([0.0; 3])));
    }
}
