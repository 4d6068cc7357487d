//! The constructive solve of Δ^m F = f for atomic data: F = Σ λ_j B_j with
//! B_j the class of the atom potential b_j, plus both norms, the double
//! inequality ratios, the pointwise majorant of the N estimate, the
//! triviality probe below the critical exponent, and the injectivity tail
//! test for power weights.

use rayon::prelude::*;

use crate::atoms::{assemble_series, validate_atom, Atom, AtomicSeries};
use crate::error::{Error, Result};
use crate::grid::{norm, Cube, Grid, GridFunction, Point, RadiusLadder};
use crate::kernel::FundamentalSolution;
use crate::maximal::{hl_maximal, indices_of_order, smooth_maximal, Profile, SideLadder};
use crate::minimax::{best_local_polynomial, n_maximal, QuotientElement};
use crate::potential::{dyadic_eps_ladder, laplacian_residual_field, potential_field, t_star};
use crate::weights::{power_critical_indices_closed, weighted_lp_norm, Weight, WeightKind};

/// Parameters of one solve, echoed into every report.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub m: usize,
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    /// Probe lattice stride for N_{q,2m} evaluation.
    pub probe_stride: usize,
    /// Radius ladder refinement: radii step by 2^{1/ladder_density}.
    pub ladder_density: usize,
    /// Support radius of the fixed Hardy-norm profile.
    pub profile_width: f64,
    /// Semi-norm order N for profile normalization (recorded, never claimed
    /// to reproduce the full grand maximal).
    pub n_order: usize,
    /// Pin the smallest ladder radius (defaults to 2h); refinement studies
    /// set this so the ladder stays fixed while the grid refines.
    pub ladder_r_min: Option<f64>,
}

impl SolverConfig {
    /// Defaults: μ = m, stride 4, dyadic ladder, N = ⌊n(q_w/p - 1)⌋ + n + 2.
    pub fn new(dim: usize, m: usize, p: f64, q: f64, w: &Weight) -> Self {
        let (q_w, _) = match w.kind {
            WeightKind::Power { a } => power_critical_indices_closed(a, dim),
            WeightKind::Tabulated(_) => (1.0, f64::INFINITY),
        };
        let n = dim as f64;
        let n_order = ((n * (q_w / p - 1.0)).floor().max(0.0) as usize) + dim + 2;
        SolverConfig {
            m,
            p,
            q,
            mu: m as f64,
            probe_stride: 4,
            ladder_density: 1,
            profile_width: 1.0,
            n_order,
            ladder_r_min: None,
        }
    }

    pub fn gamma(&self) -> f64 {
        2.0 * self.m as f64
    }

    pub fn degree(&self) -> usize {
        2 * self.m - 1
    }

    /// Radius ladder with factor 2^{1/density} from 2h (or the pinned
    /// minimum) to twice the side.
    pub fn ladder_for(&self, grid: &Grid) -> RadiusLadder {
        let factor = 2.0f64.powf(1.0 / self.ladder_density as f64);
        let mut radii = Vec::new();
        let mut r = self.ladder_r_min.unwrap_or(2.0 * grid.spacing());
        let r_max = 2.0 * grid.cube.side;
        while r <= r_max * (1.0 + 1e-12) {
            radii.push(r);
            r *= factor;
        }
        RadiusLadder::new(radii).expect("grid ladder")
    }

    pub fn hardy_profile(&self, dim: usize) -> Profile {
        let mut p = Profile::polynomial_bump(dim, self.profile_width, self.n_order + 2);
        p.normalize_pn(self.n_order);
        p
    }
}

/// Admissibility window of the solve; every violation names its inequality.
pub fn validate_window(dim: usize, m: usize, p: f64, q: f64, mu: f64, w: &Weight) -> Result<()> {
    let n = dim as f64;
    let mm = 2.0 * m as f64;
    if !(q > 1.0) {
        return Err(Error::ParameterWindow(format!("1 < q violated: q = {q}")));
    }
    let p_lo = n / (mm + n / q);
    if !(p > p_lo && p <= 1.0) {
        return Err(Error::ParameterWindow(format!(
            "n(2m + n/q)^(-1) < p ≤ 1 violated: p = {p}, threshold {p_lo}"
        )));
    }
    if !(mu > 0.0 && mu < mm) {
        return Err(Error::ParameterWindow(format!("0 < μ < 2m violated: μ = {mu}")));
    }
    if !(n < (mm + n / q - mu) * p) {
        return Err(Error::ParameterWindow(format!(
            "n < (2m + n/q - μ)p violated: n = {n}, rhs = {}",
            (mm + n / q - mu) * p
        )));
    }
    let s = (mm + n / q - mu) * p / n;
    if let Some(a) = w.power_exponent() {
        if !(a < n * (s - 1.0)) {
            return Err(Error::ParameterWindow(format!(
                "w ∈ A_((2m+n/q-μ)p/n) violated: a = {a} ≥ n(s-1) = {}",
                n * (s - 1.0)
            )));
        }
    }
    Ok(())
}

/// Every `stride`-th lattice point per axis.
pub fn probe_points(grid: &Grid, stride: usize) -> Vec<Point> {
    let n = grid.points_per_axis;
    let dim = grid.dim();
    let axis: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    let mut out = Vec::new();
    let a1: &[usize] = if dim >= 2 { &axis } else { &[0] };
    let a2: &[usize] = if dim >= 3 { &axis } else { &[0] };
    for &i0 in &axis {
        for &i1 in a1 {
            for &i2 in a2 {
                out.push(grid.point(grid.index([i0, i1, i2])));
            }
        }
    }
    out
}

/// N_{q,γ} sampled over a probe set (parallel, order-preserving).
pub fn n_field(
    rep: &GridFunction,
    degree: usize,
    q: f64,
    gamma: f64,
    probes: &[Point],
    ladder: &RadiusLadder,
) -> Result<Vec<f64>> {
    let class = QuotientElement::new(rep.clone(), degree);
    probes
        .par_iter()
        .map(|&x| n_maximal(&class, q, gamma, x, ladder).map(|r| r.value))
        .collect()
}

/// A grid function regarded modulo 𝒫_{2m-1} with its cached N samples.
#[derive(Clone, Debug)]
pub struct CalderonHardyElement {
    pub rep: GridFunction,
    pub degree: usize,
    pub q: f64,
    pub gamma: f64,
    pub probes: Vec<Point>,
    pub probe_stride: usize,
    pub n_samples: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SolveDiagnostics {
    /// Relative Δ_h^m residual against the assembled series.
    pub residual: f64,
    /// ‖Σ_{j>M} λ_j N(B_j; ·)‖ tail trace over the probe set, M = 0..T.
    pub tail_norms: Vec<f64>,
    /// L^{p₀} tail trace of the atomic series itself.
    pub series_tails: Vec<f64>,
    pub ladder: RadiusLadder,
}

/// Build G = Σ λ_j B_j and verify Δ^m G = f distributionally (via the
/// discrete residual) plus the tail decay of Σ λ_j N(B_j; ·).
pub fn solve_polyharmonic(
    series: &AtomicSeries,
    fs: &FundamentalSolution,
    cfg: &SolverConfig,
) -> Result<(CalderonHardyElement, SolveDiagnostics)> {
    if series.terms.is_empty() {
        return Err(Error::TrivialInput("empty atomic series".into()));
    }
    let first = &series.terms[0].1;
    let grid = first.samples.grid().clone();
    let dim = grid.dim();
    let w = &first.weight;
    validate_window(dim, cfg.m, cfg.p, cfg.q, cfg.mu, w)?;
    let (q_w, _) = match w.kind {
        WeightKind::Power { a } => power_critical_indices_closed(a, dim),
        WeightKind::Tabulated(_) => (1.0, f64::INFINITY),
    };
    let d_min = ((dim as f64) * (q_w / cfg.p - 1.0)).floor().max(0.0) as usize;
    let d_required = d_min.max(2 * cfg.m - 1);
    for (_, atom) in &series.terms {
        if atom.d < d_required {
            return Err(Error::ParameterWindow(format!(
                "d ≥ max{{⌊n(q_w/p - 1)⌋, 2m-1}} violated: d = {} < {d_required}",
                atom.d
            )));
        }
        let report = validate_atom(atom);
        if !report.pass() {
            return Err(Error::ParameterWindow(format!("invalid atom in series: {report:?}")));
        }
    }

    let (f, series_tails) = assemble_series(series)?;
    let mut rep = GridFunction::zeros(grid.clone());
    let mut potentials = Vec::with_capacity(series.terms.len());
    for (lambda, atom) in &series.terms {
        let b = potential_field(fs, atom, None)?;
        rep.add_scaled(*lambda, &b)?;
        potentials.push((*lambda, b));
    }
    let trivial = f.lp_norm(2.0) == 0.0;

    // residual region: hull of the doubled atom cubes
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (_, atom) in &series.terms {
        let q2 = atom.cube.dilate(2.0);
        for k in 0..dim {
            lo[k] = lo[k].min(q2.lo(k));
            hi[k] = hi[k].max(q2.hi(k));
        }
    }
    let mut center = [0.0; 3];
    let mut side = 0.0f64;
    for k in 0..dim {
        center[k] = 0.5 * (lo[k] + hi[k]);
        side = side.max(hi[k] - lo[k]);
    }
    let region = Cube::new(dim, center, side)?;
    // a series with every weight zero solves to the zero class exactly
    let residual = if trivial { 0.0 } else { laplacian_residual_field(&rep, &f, &region, cfg.m)? };

    let probes = probe_points(&grid, cfg.probe_stride);
    let ladder = cfg.ladder_for(&grid);
    let degree = cfg.degree();
    let gamma = cfg.gamma();
    let n_samples = n_field(&rep, degree, cfg.q, gamma, &probes, &ladder)?;

    // per-atom N fields feed the tail trace ‖Σ_{j>M} λ_j N(B_j; ·)‖_{L^p(w)}
    let per_atom: Vec<Vec<f64>> = potentials
        .iter()
        .map(|(_, b)| n_field(b, degree, cfg.q, gamma, &probes, &ladder))
        .collect::<Result<_>>()?;
    let cell = (cfg.probe_stride as f64 * grid.spacing()).powi(dim as i32);
    let t = series.terms.len();
    let mut tail_norms = vec![0.0; t + 1];
    for m_cut in 0..=t {
        let mut acc = 0.0;
        for (pi, x) in probes.iter().enumerate() {
            let mut s = 0.0;
            for (j, (lambda, _)) in series.terms.iter().enumerate() {
                if j >= m_cut {
                    s += lambda * per_atom[j][pi];
                }
            }
            let wv = w.eval(*x);
            acc += s.powf(cfg.p) * wv * cell;
        }
        tail_norms[m_cut] = acc.powf(1.0 / cfg.p);
    }

    Ok((
        CalderonHardyElement {
            rep,
            degree,
            q: cfg.q,
            gamma,
            probes,
            probe_stride: cfg.probe_stride,
            n_samples,
        },
        SolveDiagnostics { residual, tail_norms, series_tails, ladder },
    ))
}

/// Hardy-norm proxy ‖M_φ f‖_{L^p(w)} with one fixed p_N-normalized profile.
pub fn hardy_norm(f: &GridFunction, w: &Weight, p: f64, profile: &Profile, scales: &[f64]) -> Result<f64> {
    let mf = smooth_maximal(f, profile, scales)?;
    weighted_lp_norm(&mf, w, p)
}

/// ‖N_{q,2m}(G; ·)‖_{L^p(w)} over the cached probe set.
pub fn calderon_hardy_norm(g: &CalderonHardyElement, w: &Weight, p: f64) -> Result<f64> {
    let grid = g.rep.grid();
    let cell = (g.probe_stride as f64 * grid.spacing()).powi(grid.dim() as i32);
    let mut acc = 0.0;
    for (x, nv) in g.probes.iter().zip(&g.n_samples) {
        let wv = w.eval(*x);
        if !wv.is_finite() {
            return Err(Error::NonIntegrableWeight("weight singularity on a probe".into()));
        }
        acc += nv.powf(p) * wv * cell;
    }
    Ok(acc.powf(1.0 / p))
}

/// (‖Δ^m G‖_{H^p(w)} / ‖G‖_{𝓗}, inverse) for one atomic series.
pub fn double_inequality_report(
    series: &AtomicSeries,
    fs: &FundamentalSolution,
    w: &Weight,
    cfg: &SolverConfig,
) -> Result<(f64, f64)> {
    if series.terms.is_empty() || series.terms.iter().all(|(l, _)| *l == 0.0) {
        return Err(Error::TrivialInput("zero atomic series".into()));
    }
    let (g, _) = solve_polyharmonic(series, fs, cfg)?;
    let (f, _) = assemble_series(series)?;
    let profile = cfg.hardy_profile(f.grid().dim());
    let scales = crate::maximal::dyadic_scales(f.grid());
    let hn = hardy_norm(&f, w, cfg.p, &profile, &scales)?;
    let chn = calderon_hardy_norm(&g, w, cfg.p)?;
    if chn == 0.0 || hn == 0.0 {
        return Err(Error::TrivialInput("vanishing norm in ratio".into()));
    }
    Ok((hn / chn, chn / hn))
}

#[derive(Clone, Debug)]
pub struct MajorantProbe {
    pub x: Point,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct MajorantReport {
    pub probes: Vec<MajorantProbe>,
    pub max_ratio: f64,
}

/// Pointwise majorant check: N(B; x) against
/// w(Q)^{-1/p}(Mχ_Q)^{(2m+n/q-μ)/n} + χ_{4√n Q}(Ma + [M(M(|a|^q))]^{1/q} + ΣT*_α a).
pub fn pointwise_majorant_check(
    atom: &Atom,
    fs: &FundamentalSolution,
    cfg: &SolverConfig,
    probes: &[Point],
) -> Result<MajorantReport> {
    if !(cfg.mu > 0.0 && cfg.mu < 2.0 * cfg.m as f64) {
        return Err(Error::ParameterWindow(format!("0 < μ < 2m violated: μ = {}", cfg.mu)));
    }
    let grid = atom.samples.grid().clone();
    let dim = grid.dim();
    let n = dim as f64;
    let b = potential_field(fs, atom, None)?;
    let ladder = cfg.ladder_for(&grid);
    let lhs = n_field(&b, cfg.degree(), cfg.q, cfg.gamma(), probes, &ladder)?;

    let side_ladder = SideLadder::default_for(&grid);
    let chi = GridFunction::from_fn(grid.clone(), |p| if atom.cube.contains(p) { 1.0 } else { 0.0 });
    let m_chi = hl_maximal(&chi, &side_ladder)?;
    let m_a = hl_maximal(&atom.samples, &side_ladder)?;
    let a_q = atom.samples.map(|v| v.abs().powf(cfg.q));
    let m_mq = hl_maximal(&hl_maximal(&a_q, &side_ladder)?, &side_ladder)?;
    let w_factor = atom.weight.mass(&atom.cube)?.powf(-1.0 / cfg.p);
    let exponent = (2.0 * cfg.m as f64 + n / cfg.q - cfg.mu) / n;
    let near_cube = atom.cube.dilate(4.0 * n.sqrt());
    let eps_ladder = dyadic_eps_ladder(&atom.samples);
    let alphas = indices_of_order(dim, 2 * cfg.m);

    let mut out = Vec::with_capacity(probes.len());
    let mut max_ratio = 0.0f64;
    for (pi, &x) in probes.iter().enumerate() {
        let gi = grid.nearest_index(x);
        let mut rhs = w_factor * m_chi.value(gi).powf(exponent);
        if near_cube.contains(x) {
            let mut local = m_a.value(gi) + m_mq.value(gi).powf(1.0 / cfg.q);
            for &alpha in &alphas {
                local += t_star(&atom.samples, fs, alpha, x, &eps_ladder)?;
            }
            rhs += local;
        }
        let ratio = lhs[pi] / rhs;
        max_ratio = max_ratio.max(ratio);
        out.push(MajorantProbe { x, lhs: lhs[pi], rhs, ratio });
    }
    Ok(MajorantReport { probes: out, max_ratio })
}

#[derive(Clone, Debug)]
pub struct TrivialityReport {
    /// Fitted log-log slope of N along the outward probes.
    pub slope: f64,
    /// Fitted prefactor c in N ≈ c·|x|^slope.
    pub prefactor: f64,
    /// Partial integrals ∫_{|x|≤R} N^p w dx over the R ladder.
    pub partial_integrals: Vec<f64>,
    pub increments: Vec<f64>,
    /// Geometric-mean ratio of successive increments.
    pub increment_ratio: f64,
    pub diverges: bool,
}

/// Triviality probe of the critical exponent: measures the far-field decay
/// of N(G; ·) and the growth of the partial weighted integrals ∫ N^p w.
pub fn triviality_probe(
    g: &GridFunction,
    q: f64,
    m: usize,
    a_pow: f64,
    p: f64,
    base_cube: &Cube,
    r_ladder: &[f64],
    cfg: &SolverConfig,
) -> Result<TrivialityReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ParameterWindow(format!("0 < p ≤ 1 violated: p = {p}")));
    }
    let degree = 2 * m - 1;
    let gamma = 2.0 * m as f64;
    let grid = g.grid().clone();
    let dim = grid.dim();
    let w = Weight::power(dim, a_pow)?;
    // reject inputs indistinguishable from a polynomial of degree ≤ 2m-1
    let g_norm = g.local_norm(2.0, base_cube)?;
    let (_, fit_residual) = best_local_polynomial(g, 2.0, degree, base_cube)?;
    if g_norm == 0.0 || fit_residual <= 1e-8 * g_norm {
        return Err(Error::PolynomialInput);
    }
    let probes = probe_points(&grid, cfg.probe_stride);
    let ladder = cfg.ladder_for(&grid);
    let n_values = n_field(g, degree, q, gamma, &probes, &ladder)?;

    // log-log fit along |x| beyond the base cube
    let fit_min = 2.0 * (dim as f64).sqrt() * base_cube.side;
    let fit_max = *r_ladder.last().unwrap_or(&grid.cube.side);
    let mut lnx = Vec::new();
    let mut lnv = Vec::new();
    for (x, v) in probes.iter().zip(&n_values) {
        let d = norm(*x, dim);
        if d >= fit_min && d <= fit_max && *v > 0.0 {
            lnx.push(d.ln());
            lnv.push(v.ln());
        }
    }
    if lnx.len() < 4 {
        return Err(Error::LadderOutsideGrid("too few probes beyond the base cube for the fit".into()));
    }
    let npts = lnx.len() as f64;
    let sx: f64 = lnx.iter().sum();
    let sy: f64 = lnv.iter().sum();
    let sxx: f64 = lnx.iter().map(|v| v * v).sum();
    let sxy: f64 = lnx.iter().zip(&lnv).map(|(a, b)| a * b).sum();
    let slope = (npts * sxy - sx * sy) / (npts * sxx - sx * sx);
    let prefactor = ((sy - slope * sx) / npts).exp();

    let cell = (cfg.probe_stride as f64 * grid.spacing()).powi(dim as i32);
    let partial_integrals: Vec<f64> = r_ladder
        .iter()
        .map(|&r| {
            let mut acc = 0.0;
            for (x, v) in probes.iter().zip(&n_values) {
                if norm(*x, dim) <= r {
                    acc += v.powf(p) * w.eval(*x) * cell;
                }
            }
            acc
        })
        .collect();
    let increments: Vec<f64> =
        partial_integrals.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let increment_ratio = if increments.len() >= 2 && increments[0] > 0.0 {
        (increments.last().unwrap() / increments[0]).powf(1.0 / (increments.len() - 1) as f64)
    } else {
        f64::NAN
    };
    // increments that refuse to decay geometrically mean the integral diverges
    let diverges = increment_ratio.is_nan() || increment_ratio >= 0.85;
    Ok(TrivialityReport { slope, prefactor, partial_integrals, increments, increment_ratio, diverges })
}

#[derive(Clone, Debug)]
pub struct TailReport {
    /// Lebesgue measure of 𝒪 = {w^{1/p}·N > 1} on the probe lattice.
    pub exceptional_measure: f64,
    pub exceptional_count: usize,
    /// ∫_{𝒪^c, |x|≤R} N^r dx over the R ladder.
    pub tail_integrals: Vec<f64>,
    pub increments: Vec<f64>,
}

/// Injectivity tail test (power weights 0 ≤ a < np/r): the set 𝒪 has finite
/// measure and ∫_{𝒪^c} N^r converges.
pub fn injectivity_tail_check(
    g: &CalderonHardyElement,
    w: &Weight,
    p: f64,
    r_exp: f64,
    radii: &[f64],
) -> Result<TailReport> {
    let dim = g.rep.grid().dim();
    let n = dim as f64;
    let a = w
        .power_exponent()
        .ok_or_else(|| Error::ParameterWindow("injectivity is only asserted for power weights".into()))?;
    if !(r_exp >= g.q) {
        return Err(Error::ParameterWindow(format!("r ≥ q violated: r = {r_exp}, q = {}", g.q)));
    }
    if !(a >= 0.0 && a < n * p / r_exp) {
        return Err(Error::ParameterWindow(format!(
            "0 ≤ a < np/r violated: a = {a}, np/r = {}",
            n * p / r_exp
        )));
    }
    let grid = g.rep.grid();
    let cell = (g.probe_stride as f64 * grid.spacing()).powi(dim as i32);
    let mut count = 0usize;
    let mut tails = vec![0.0; radii.len()];
    for (x, nv) in g.probes.iter().zip(&g.n_samples) {
        let exceptional = w.eval(*x).powf(1.0 / p) * nv > 1.0;
        if exceptional {
            count += 1;
            continue;
        }
        let d = norm(*x, dim);
        for (ti, &r) in radii.iter().enumerate() {
            if d <= r {
                tails[ti] += nv.powf(r_exp) * cell;
            }
        }
    }
    let increments = tails.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    Ok(TailReport {
        exceptional_measure: count as f64 * cell,
        exceptional_count: count,
        tail_integrals: tails,
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::random_atom;
    use crate::rng::SplitMix64;

    fn one_atom_series(seed: u64, grid: &Grid) -> AtomicSeries {
        let w = Weight::one(1);
        let mut rng = SplitMix64::new(seed);
        let atom = random_atom(&mut rng, grid, &w, 1.0, 2.0, 1, (0.8, 1.4), 0.5).unwrap();
        AtomicSeries { terms: vec![(1.0, atom)] }
    }

    fn test_grid() -> Grid {
        Grid::new(1, [0.0; 3], 16.0, 2048).unwrap() // h = 1/128
    }

    #[test]
    fn window_validation_names_inequalities() {
        let w = Weight::one(1);
        assert!(validate_window(1, 1, 1.0, 2.0, 1.0, &w).is_ok());
        let err = validate_window(1, 1, 0.3, 2.0, 1.0, &w).unwrap_err();
        assert!(matches!(err, Error::ParameterWindow(ref m) if m.contains("p ≤ 1")));
        let err = validate_window(1, 1, 1.0, 2.0, 1.9, &w).unwrap_err();
        assert!(matches!(err, Error::ParameterWindow(ref m) if m.contains("(2m + n/q - μ)p")));
        let err = validate_window(1, 1, 1.0, 0.9, 1.0, &w).unwrap_err();
        assert!(matches!(err, Error::ParameterWindow(ref m) if m.contains("1 < q")));
        // |x|^{0.6} is outside A_{1.5} (needs a < n(s-1) = 0.5)
        let w6 = Weight::power(1, 0.6).unwrap();
        let err = validate_window(1, 1, 1.0, 2.0, 1.0, &w6).unwrap_err();
        assert!(matches!(err, Error::ParameterWindow(ref m) if m.contains("A_(")));
    }

    #[test]
    fn solve_single_atom_residual_and_caches() {
        let grid = test_grid();
        let series = one_atom_series(5, &grid);
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &Weight::one(1));
        let (g, diag) = solve_polyharmonic(&series, &fs, &cfg).unwrap();
        assert!(diag.residual <= 1e-2, "residual {}", diag.residual);
        assert_eq!(g.n_samples.len(), g.probes.len());
        assert!(g.n_samples.iter().all(|v| v.is_finite()));
        // tails decrease monotonically and end at zero
        assert!(diag.tail_norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(*diag.tail_norms.last().unwrap(), 0.0);
    }

    #[test]
    fn solve_is_linear_in_the_series() {
        let grid = test_grid();
        let mut series = one_atom_series(9, &grid);
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &Weight::one(1));
        let (g1, _) = solve_polyharmonic(&series, &fs, &cfg).unwrap();
        series.terms[0].0 = 3.0;
        let (g3, _) = solve_polyharmonic(&series, &fs, &cfg).unwrap();
        for i in 0..g1.rep.grid().len() {
            let d = g3.rep.value(i) - 3.0 * g1.rep.value(i);
            assert!(d.abs() <= 1e-12 * g1.rep.value(i).abs().max(1e-12));
        }
    }

    #[test]
    fn solve_of_zero_series_is_the_zero_class() {
        let grid = test_grid();
        let mut series = one_atom_series(8, &grid);
        series.terms[0].0 = 0.0;
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let w = Weight::one(1);
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &w);
        let (g, diag) = solve_polyharmonic(&series, &fs, &cfg).unwrap();
        assert_eq!(diag.residual, 0.0);
        assert!(g.rep.samples().iter().all(|&v| v == 0.0));
        assert!(g.n_samples.iter().all(|&v| v == 0.0));
        assert_eq!(calderon_hardy_norm(&g, &w, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn calderon_hardy_norm_of_polynomial_class_vanishes() {
        let grid = test_grid();
        let w = Weight::one(1);
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &w);
        let rep = GridFunction::from_fn(grid.clone(), |p| 0.3 - 1.7 * p[0]);
        let probes = probe_points(&grid, cfg.probe_stride);
        let ladder = cfg.ladder_for(&grid);
        let samples = n_field(&rep, 1, 2.0, 2.0, &probes, &ladder).unwrap();
        let g = CalderonHardyElement {
            rep,
            degree: 1,
            q: 2.0,
            gamma: 2.0,
            probes,
            probe_stride: cfg.probe_stride,
            n_samples: samples,
        };
        assert!(calderon_hardy_norm(&g, &w, 1.0).unwrap() < 1e-8);
    }

    #[test]
    fn solve_rejects_small_d() {
        let grid = test_grid();
        let w = Weight::one(1);
        let mut rng = SplitMix64::new(3);
        let atom = random_atom(&mut rng, &grid, &w, 1.0, 2.0, 0, (0.8, 1.4), 0.5).unwrap();
        let series = AtomicSeries { terms: vec![(1.0, atom)] };
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &w);
        let err = solve_polyharmonic(&series, &fs, &cfg).unwrap_err();
        assert!(matches!(err, Error::ParameterWindow(ref m) if m.contains("2m-1")));
    }

    #[test]
    fn norms_are_homogeneous() {
        let grid = test_grid();
        let series = one_atom_series(13, &grid);
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let w = Weight::one(1);
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &w);
        let (mut g, _) = solve_polyharmonic(&series, &fs, &cfg).unwrap();
        let chn = calderon_hardy_norm(&g, &w, cfg.p).unwrap();
        // scale the cached element by hand: both rep and N samples are linear
        g.rep.scale(2.5);
        for v in &mut g.n_samples {
            *v *= 2.5;
        }
        let chn2 = calderon_hardy_norm(&g, &w, cfg.p).unwrap();
        assert!((chn2 - 2.5 * chn).abs() < 1e-10 * chn2);

        let (f, _) = assemble_series(&series).unwrap();
        let profile = cfg.hardy_profile(1);
        let scales = crate::maximal::dyadic_scales(f.grid());
        let hn = hardy_norm(&f, &w, cfg.p, &profile, &scales).unwrap();
        let mut f2 = f.clone();
        f2.scale(4.0);
        let hn2 = hardy_norm(&f2, &w, cfg.p, &profile, &scales).unwrap();
        assert!((hn2 - 4.0 * hn).abs() < 1e-10 * hn2);
        // zero input → zero norm
        let z = GridFunction::zeros(f.grid().clone());
        assert_eq!(hardy_norm(&z, &w, cfg.p, &profile, &scales).unwrap(), 0.0);
    }

    #[test]
    fn subadditivity_transfers_to_the_sum() {
        let grid = test_grid();
        let w = Weight::one(1);
        let mut rng = SplitMix64::new(21);
        let a1 = random_atom(&mut rng, &grid, &w, 1.0, 2.0, 1, (0.8, 1.2), 0.4).unwrap();
        let a2 = random_atom(&mut rng, &grid, &w, 1.0, 2.0, 1, (0.8, 1.2), 0.4).unwrap();
        let series = AtomicSeries { terms: vec![(1.0, a1), (0.7, a2)] };
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &w);
        let (g, diag) = solve_polyharmonic(&series, &fs, &cfg).unwrap();
        // recompute per-atom N on the same probes
        let ladder = diag.ladder.clone();
        let mut bound = vec![0.0; g.probes.len()];
        for (lambda, atom) in &series.terms {
            let b = potential_field(&fs, atom, None).unwrap();
            let nj = n_field(&b, 1, 2.0, 2.0, &g.probes, &ladder).unwrap();
            for (acc, v) in bound.iter_mut().zip(nj) {
                *acc += lambda * v;
            }
        }
        for (i, (nv, bd)) in g.n_samples.iter().zip(&bound).enumerate() {
            assert!(*nv <= bd * (1.0 + 1e-6) + 1e-12, "probe {i}: {nv} vs {bd}");
        }
    }

    #[test]
    fn double_inequality_scale_invariant_and_trivial_input() {
        let grid = test_grid();
        let series = one_atom_series(31, &grid);
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let w = Weight::one(1);
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &w);
        let (r1, inv1) = double_inequality_report(&series, &fs, &w, &cfg).unwrap();
        assert!((r1 * inv1 - 1.0).abs() < 1e-12);
        let mut scaled = series.clone();
        scaled.terms[0].0 = 8.0;
        let (r8, _) = double_inequality_report(&scaled, &fs, &w, &cfg).unwrap();
        assert!((r8 - r1).abs() < 1e-9 * r1, "{r8} vs {r1}");
        let empty = AtomicSeries { terms: vec![] };
        assert!(matches!(
            double_inequality_report(&empty, &fs, &w, &cfg),
            Err(Error::TrivialInput(_))
        ));
    }

    #[test]
    fn triviality_probe_rejects_polynomials() {
        let grid = Grid::new(1, [0.0; 3], 32.0, 1024).unwrap();
        let g = GridFunction::from_fn(grid, |p| 1.0 - 2.0 * p[0]);
        let cfg = SolverConfig::new(1, 1, 0.4, 2.0, &Weight::one(1));
        let base = Cube::new(1, [0.0; 3], 2.0).unwrap();
        assert_eq!(
            triviality_probe(&g, 2.0, 1, 0.0, 0.4, &base, &[8.0, 16.0], &cfg).unwrap_err(),
            Error::PolynomialInput
        );
    }

    #[test]
    fn injectivity_zero_class_and_threshold_monotonicity() {
        let grid = test_grid();
        let series = one_atom_series(41, &grid);
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let w = Weight::one(1);
        let cfg = SolverConfig::new(1, 1, 1.0, 2.0, &w);
        let (g, _) = solve_polyharmonic(&series, &fs, &cfg).unwrap();
        let radii = [2.0, 4.0, 8.0];
        let full = injectivity_tail_check(&g, &w, 1.0, 2.0, &radii).unwrap();
        // scaling G by 1/2 shrinks the exceptional set
        let mut half = g.clone();
        half.rep.scale(0.5);
        for v in &mut half.n_samples {
            *v *= 0.5;
        }
        let small = injectivity_tail_check(&half, &w, 1.0, 2.0, &radii).unwrap();
        assert!(small.exceptional_count <= full.exceptional_count);
        // zero class: empty 𝒪, zero integral
        let mut zero = g.clone();
        zero.rep.scale(0.0);
        for v in &mut zero.n_samples {
            *v = 0.0;
        }
        let z = injectivity_tail_check(&zero, &w, 1.0, 2.0, &radii).unwrap();
        assert_eq!(z.exceptional_count, 0);
        assert!(z.tail_integrals.iter().all(|&t| t == 0.0));
        // parameter window
        let w_bad = Weight::power(1, 0.9).unwrap();
        assert!(matches!(
            injectivity_tail_check(&g, &w_bad, 1.0, 2.0, &radii),
            Err(Error::ParameterWindow(_))
        ));
    }
}
