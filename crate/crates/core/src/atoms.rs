//! Construction and validation of w-(p, p₀, d) atoms and atomic series.
//!
//! An atom supported on the cube Q satisfies
//!   (a1) supp a ⊆ Q,
//!   (a2) ‖a‖_{L^{p₀}} ≤ |Q|^{1/p₀}·w(Q)^{-1/p},
//!   (a3) ∫ x^α a(x) dx = 0 for |α| ≤ d.
//! `make_atom` removes moments by the L²(Q) projection onto 𝒫_d (exact
//! finite-dimensional linear algebra on the lattice, so the discrete moments
//! vanish to solver roundoff) and rescales to meet (a2) with equality.

use crate::error::{Error, Result};
use crate::grid::{format_f64, read_grid_function, write_grid_function, Cube, GridFunction};
use crate::minimax::best_local_polynomial;
use crate::poly::{index_order, poly_basis};
use crate::weights::{power_critical_indices_closed, Weight, WeightKind};

/// Relative moment tolerance: |∫(y-x₀)^α a| ≤ MOMENT_TOL · ‖a‖_{L¹} · side^{|α|}.
pub const MOMENT_TOL: f64 = 1e-10;
/// Escaped-mass fraction above which (a1) fails.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Multiplicative slack allowed on the (a2) size bound.
pub const SIZE_SLACK_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Atom {
    pub samples: GridFunction,
    pub cube: Cube,
    pub p: f64,
    pub p0: f64,
    pub d: usize,
    pub weight: Weight,
}

#[derive(Clone, Debug)]
pub struct AtomicSeries {
    pub terms: Vec<(f64, Atom)>,
}

/// Critical indices of the atom's weight (closed form for powers, trivial
/// for bounded tables).
fn weight_indices(w: &Weight) -> (f64, f64) {
    match w.kind {
        WeightKind::Power { a } => power_critical_indices_closed(a, w.dim),
        WeightKind::Tabulated(_) => (1.0, f64::INFINITY),
    }
}

/// Convention for the dual factor: r_w/(r_w - 1) → 1 as r_w → ∞.
fn rw_dual_factor(r_w: f64) -> f64 {
    if r_w.is_finite() {
        r_w / (r_w - 1.0)
    } else {
        1.0
    }
}

/// Validate the (p, p₀, d) parameter window against the weight's indices.
pub fn check_atom_parameters(w: &Weight, p: f64, p0: f64, d: usize) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ParameterWindow(format!("0 < p ≤ 1 violated: p = {p}")));
    }
    let (q_w, r_w) = weight_indices(w);
    let n = w.dim as f64;
    let d_min = (n * (q_w / p - 1.0)).floor();
    if (d as f64) < d_min {
        return Err(Error::ParameterWindow(format!(
            "d ≥ ⌊n(q_w/p - 1)⌋ violated: d = {d} < {d_min} (q_w = {q_w})"
        )));
    }
    let p0_min = (p * rw_dual_factor(r_w)).max(1.0);
    if !(p0 > p0_min) {
        return Err(Error::ParameterWindow(format!(
            "p₀ > max{{1, p·r_w/(r_w-1)}} violated: p₀ = {p0} ≤ {p0_min}"
        )));
    }
    if !p0.is_finite() {
        return Err(Error::ParameterWindow("p₀ = ∞ atoms are not implemented".into()));
    }
    Ok(())
}

/// Project out moments through order d and rescale to the (a2) bound.
pub fn make_atom(
    bump: &GridFunction,
    cube: &Cube,
    w: &Weight,
    p: f64,
    p0: f64,
    d: usize,
) -> Result<Atom> {
    check_atom_parameters(w, p, p0, d)?;
    if w.dim != bump.grid().dim() {
        return Err(Error::MismatchedGrids);
    }
    // (a1) precondition on the input bump
    let total_mass: f64 = bump.samples().iter().map(|v| v.abs()).sum();
    if total_mass == 0.0 {
        return Err(Error::DegenerateBump);
    }
    let mut inside_mass = 0.0;
    bump.grid().for_each_in_cube(cube, |i| inside_mass += bump.value(i).abs());
    if (total_mass - inside_mass) / total_mass > SUPPORT_TOL {
        return Err(Error::ParameterWindow(format!(
            "supp(bump) ⊄ Q: escaped mass fraction {}",
            (total_mass - inside_mass) / total_mass
        )));
    }

    let (proj, residual) = best_local_polynomial(bump, 2.0, d, cube)?;
    let bump_norm = bump.local_norm(2.0, cube)?;
    if residual <= 1e-12 * bump_norm {
        return Err(Error::DegenerateBump);
    }
    let grid = bump.grid().clone();
    let mut samples = vec![0.0; grid.len()];
    grid.for_each_in_cube(cube, |i| {
        samples[i] = bump.value(i) - proj.eval(grid.point(i));
    });
    let mut a = GridFunction::new(grid, samples)?;
    // (a2) with equality
    let bound = cube.volume().powf(1.0 / p0) * w.mass(cube)?.powf(-1.0 / p);
    let norm = a.lp_norm(p0);
    a.scale(bound / norm);
    Ok(Atom { samples: a, cube: *cube, p, p0, d, weight: w.clone() })
}

/// Validation report: always returned, never an error.
#[derive(Clone, Debug)]
pub struct AtomReport {
    pub escaped_mass_fraction: f64,
    /// ‖a‖_{p₀} divided by the (a2) bound; pass needs ≤ 1 + slack tolerance.
    pub size_slack: f64,
    /// max over |α| ≤ d of |∫(y-x₀)^α a| / (‖a‖_{L¹}·side^{|α|}).
    pub max_moment_residual: f64,
    pub support_pass: bool,
    pub size_pass: bool,
    pub moment_pass: bool,
}

impl AtomReport {
    pub fn pass(&self) -> bool {
        self.support_pass && self.size_pass && self.moment_pass
    }
}

pub fn validate_atom(atom: &Atom) -> AtomReport {
    let g = &atom.samples;
    let grid = g.grid();
    let hn = grid.spacing().powi(grid.dim() as i32);
    let total: f64 = g.samples().iter().map(|v| v.abs()).sum::<f64>() * hn;
    let mut inside = 0.0;
    grid.for_each_in_cube(&atom.cube, |i| inside += g.value(i).abs());
    inside *= hn;
    let escaped = if total > 0.0 { (total - inside).max(0.0) / total } else { 0.0 };

    let bound = atom.cube.volume().powf(1.0 / atom.p0)
        * atom.weight.mass(&atom.cube).map(|m| m.powf(-1.0 / atom.p)).unwrap_or(f64::NAN);
    let size_slack = g.lp_norm(atom.p0) / bound;

    let l1 = total.max(1e-300);
    let mut max_res = 0.0f64;
    for alpha in poly_basis(grid.dim(), atom.d) {
        let m = g.moment(alpha, atom.cube.center).abs();
        let scale = l1 * atom.cube.side.powi(index_order(alpha) as i32);
        max_res = max_res.max(m / scale);
    }
    AtomReport {
        escaped_mass_fraction: escaped,
        size_slack,
        max_moment_residual: max_res,
        support_pass: escaped <= SUPPORT_TOL,
        size_pass: size_slack.is_finite() && size_slack <= 1.0 + SIZE_SLACK_TOL,
        moment_pass: max_res <= MOMENT_TOL,
    }
}

/// f = Σ λ_j a_j with the L^{p₀} tail trace ‖Σ_{i>j} λ_i a_i‖_{p₀}, j = 0..T.
pub fn assemble_series(series: &AtomicSeries) -> Result<(GridFunction, Vec<f64>)> {
    if series.terms.is_empty() {
        return Err(Error::TrivialInput("empty atomic series".into()));
    }
    let first = &series.terms[0].1;
    let grid = first.samples.grid().clone();
    let p0 = first.p0;
    for (lambda, a) in &series.terms {
        if a.samples.grid() != &grid {
            return Err(Error::MismatchedGrids);
        }
        if *lambda < 0.0 {
            return Err(Error::ParameterWindow(format!("λ = {lambda} must be nonnegative")));
        }
        if (a.p0 - p0).abs() > 1e-12 || (a.p - first.p).abs() > 1e-12 || a.d != first.d {
            return Err(Error::ParameterWindow("atoms in one series must share (p, p₀, d)".into()));
        }
    }
    let t = series.terms.len();
    // suffix sums give the tails in one backward sweep
    let mut tails = vec![0.0; t + 1];
    let mut suffix = GridFunction::zeros(grid.clone());
    for j in (0..t).rev() {
        let (lambda, a) = &series.terms[j];
        suffix.add_scaled(*lambda, &a.samples)?;
        tails[j] = suffix.lp_norm(p0);
    }
    Ok((suffix, tails))
}

/// Atom file: the GridFunction text format plus the trailer
/// `p p0 d a_weight center... side` (power weights only).
pub fn write_atom(atom: &Atom) -> Result<String> {
    let a = atom.weight.power_exponent().ok_or_else(|| {
        Error::Io("atom files serialize power weights only (tabulated weights have no text form)".into())
    })?;
    let mut out = write_grid_function(&atom.samples);
    out.push_str(&format!("{} {} {} {}", format_f64(atom.p), format_f64(atom.p0), atom.d, format_f64(a)));
    for k in 0..atom.cube.dim {
        out.push(' ');
        out.push_str(&format_f64(atom.cube.center[k]));
    }
    out.push(' ');
    out.push_str(&format_f64(atom.cube.side));
    out.push('\n');
    Ok(out)
}

pub fn read_atom(text: &str) -> Result<Atom> {
    let (samples, trailer) = read_grid_function(text)?;
    let line = trailer.first().ok_or_else(|| Error::Parse("missing atom trailer".into()))?;
    let toks: Vec<&str> = line.split_whitespace().collect();
    let dim = samples.grid().dim();
    if toks.len() != 5 + dim {
        return Err(Error::Parse(format!("atom trailer expects {} fields, got {}", 5 + dim, toks.len())));
    }
    let p: f64 = toks[0].parse().map_err(|_| Error::Parse("bad p".into()))?;
    let p0: f64 = toks[1].parse().map_err(|_| Error::Parse("bad p0".into()))?;
    let d: usize = toks[2].parse().map_err(|_| Error::Parse("bad d".into()))?;
    let a: f64 = toks[3].parse().map_err(|_| Error::Parse("bad weight exponent".into()))?;
    let mut center = [0.0; 3];
    for k in 0..dim {
        center[k] = toks[4 + k].parse().map_err(|_| Error::Parse("bad cube center".into()))?;
    }
    let side: f64 = toks[4 + dim].parse().map_err(|_| Error::Parse("bad cube side".into()))?;
    Ok(Atom {
        cube: Cube::new(dim, center, side)?,
        p,
        p0,
        d,
        weight: Weight::power(dim, a)?,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn grid1(side: f64, ppa: usize) -> Grid {
        Grid::new(1, [0.0; 3], side, ppa).unwrap()
    }

    fn haar_bump(grid: &Grid) -> GridFunction {
        // χ_[0,1/2] - χ_[1/2,1] on Q(1/2, 1)
        GridFunction::from_fn(grid.clone(), |p| {
            if p[0] >= 0.0 && p[0] < 0.5 {
                1.0
            } else if p[0] >= 0.5 && p[0] <= 1.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn antisymmetric_bump_is_already_an_atom() {
        let grid = grid1(4.0, 512);
        let bump = haar_bump(&grid);
        let cube = Cube::new(1, [0.5, 0.0, 0.0], 1.0).unwrap();
        let w = Weight::one(1);
        let atom = make_atom(&bump, &cube, &w, 1.0, 2.0, 0).unwrap();
        let report = validate_atom(&atom);
        assert!(report.pass(), "{report:?}");
        // w ≡ 1, p=1, p0=2: bound = |Q|^{1/2} w(Q)^{-1} = 1, and the Haar bump
        // already meets it, so make_atom only removes a tiny mean component
        assert!((atom.samples.lp_norm(2.0) - 1.0).abs() < 1e-9);
        let mid = grid.nearest_index([0.25, 0.0, 0.0]);
        assert!((atom.samples.value(mid) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_bump_with_d0_is_degenerate() {
        let grid = grid1(4.0, 256);
        let cube = Cube::new(1, [0.0; 3], 1.0).unwrap();
        let bump = GridFunction::from_fn(grid, |p| if p[0].abs() <= 0.5 { 1.0 } else { 0.0 });
        let w = Weight::one(1);
        assert_eq!(make_atom(&bump, &cube, &w, 1.0, 2.0, 0).unwrap_err(), Error::DegenerateBump);
    }

    #[test]
    fn smooth_bump_d1_moments_vanish() {
        // (1 - 4y²)² on Q(0,1), d = 1: both moments below tolerance, (a2) tight
        let grid = grid1(4.0, 1024);
        let cube = Cube::new(1, [0.0; 3], 1.0).unwrap();
        let bump = GridFunction::from_fn(grid, |p| {
            let u = 1.0 - 4.0 * p[0] * p[0];
            if u > 0.0 {
                u * u
            } else {
                0.0
            }
        });
        let w = Weight::one(1);
        let atom = make_atom(&bump, &cube, &w, 1.0, 2.0, 1).unwrap();
        let report = validate_atom(&atom);
        assert!(report.pass(), "{report:?}");
        assert!(report.max_moment_residual <= 1e-10);
        assert!((report.size_slack - 1.0).abs() < 1e-9);
        assert!(report.escaped_mass_fraction <= 1e-12);
    }

    #[test]
    fn validation_catches_broken_atoms() {
        let grid = grid1(4.0, 512);
        let bump = haar_bump(&grid);
        let cube = Cube::new(1, [0.5, 0.0, 0.0], 1.0).unwrap();
        let w = Weight::one(1);
        let atom = make_atom(&bump, &cube, &w, 1.0, 2.0, 0).unwrap();

        // scaled by 2: (a2) fails with slack factor 2
        let mut big = atom.clone();
        big.samples.scale(2.0);
        let r = validate_atom(&big);
        assert!(!r.size_pass && (r.size_slack - 2.0).abs() < 1e-9);
        assert!(r.support_pass && r.moment_pass);

        // translated half out of the cube: support fails with escaped mass
        let mut shifted = atom.clone();
        shifted.cube = Cube::new(1, [1.0, 0.0, 0.0], 1.0).unwrap();
        let r = validate_atom(&shifted);
        assert!(!r.support_pass);
        assert!(r.escaped_mass_fraction > 0.4);
    }

    #[test]
    fn reprojection_is_idempotent() {
        let grid = grid1(4.0, 1024);
        let cube = Cube::new(1, [0.0; 3], 1.0).unwrap();
        let bump = GridFunction::from_fn(grid, |p| {
            let u = 1.0 - 4.0 * p[0] * p[0];
            if u > 0.0 {
                u * u * (1.0 + 0.3 * p[0])
            } else {
                0.0
            }
        });
        let w = Weight::one(1);
        let atom = make_atom(&bump, &cube, &w, 1.0, 2.0, 1).unwrap();
        let again = make_atom(&atom.samples, &cube, &w, 1.0, 2.0, 1).unwrap();
        let mut diff = atom.samples.clone();
        diff.add_scaled(-1.0, &again.samples).unwrap();
        assert!(diff.lp_norm(2.0) < 1e-12 * atom.samples.lp_norm(2.0).max(1.0));
    }

    #[test]
    fn parameter_window_errors_name_the_inequality() {
        let grid = grid1(4.0, 256);
        let bump = haar_bump(&grid);
        let cube = Cube::new(1, [0.5, 0.0, 0.0], 1.0).unwrap();
        // q_w = 3/2 at a = 1/2: d ≥ ⌊(1.5/0.5 - 1)⌋ = 2 required at p = 0.5
        let w = Weight::power(1, 0.5).unwrap();
        let err = make_atom(&bump, &cube, &w, 0.5, 2.0, 0).unwrap_err();
        assert!(matches!(err, Error::ParameterWindow(ref m) if m.contains("d ≥")));
        // r_w = 2 at a = -1/2: p₀ must exceed p·r_w/(r_w-1) = 2p
        let w = Weight::power(1, -0.5).unwrap();
        let err = make_atom(&bump, &cube, &w, 1.0, 1.5, 0).unwrap_err();
        assert!(matches!(err, Error::ParameterWindow(ref m) if m.contains("p₀")));
    }

    #[test]
    fn classical_scaling_for_unweighted_atoms() {
        // w ≡ 1: the (a2) bound is |Q|^{1/p0 - 1/p}
        let grid = grid1(8.0, 1024);
        for side in [0.5, 1.0, 2.0] {
            let cube = Cube::new(1, [0.0; 3], side).unwrap();
            let bump = GridFunction::from_fn(grid.clone(), |p| {
                let u = 1.0 - (2.0 * p[0] / side).powi(2);
                if u > 0.0 {
                    u * u
                } else {
                    0.0
                }
            });
            let w = Weight::one(1);
            let atom = make_atom(&bump, &cube, &w, 1.0, 2.0, 1).unwrap();
            let expected = side.powf(1.0 / 2.0 - 1.0);
            assert!((atom.samples.lp_norm(2.0) - expected).abs() < 1e-9 * expected, "side {side}");
        }
    }

    #[test]
    fn series_assembly_and_tails() {
        let grid = grid1(8.0, 1024);
        let w = Weight::one(1);
        let mut atoms = Vec::new();
        for (c, s) in [(-2.0, 1.0), (0.0, 0.5), (2.0, 1.0)] {
            let cube = Cube::new(1, [c, 0.0, 0.0], s).unwrap();
            let bump = GridFunction::from_fn(grid.clone(), |p| {
                let u = 1.0 - (2.0 * (p[0] - c) / s).powi(2);
                if u > 0.0 {
                    u * u
                } else {
                    0.0
                }
            });
            atoms.push(make_atom(&bump, &cube, &w, 1.0, 2.0, 1).unwrap());
        }
        let lambdas = [1.0, 0.5, 0.25];
        let series = AtomicSeries {
            terms: lambdas.iter().zip(atoms).map(|(l, a)| (*l, a)).collect(),
        };
        let (f, tails) = assemble_series(&series).unwrap();
        // single-term sanity: tails decrease to zero
        assert_eq!(tails.len(), 4);
        assert!(tails.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(tails[3], 0.0);
        // disjoint supports: ‖f‖_{p0}^{p0} = Σ λ^{p0} ‖a‖^{p0}
        let sum: f64 = series
            .terms
            .iter()
            .map(|(l, a)| (l * a.samples.lp_norm(2.0)).powi(2))
            .sum();
        assert!((f.lp_norm(2.0).powi(2) - sum).abs() < 1e-9 * sum);
        // tail bound by the triangle inequality, termwise
        for j in 0..3 {
            let bound: f64 = series.terms[j..].iter().map(|(l, a)| l * a.samples.lp_norm(2.0)).sum();
            assert!(tails[j] <= bound + 1e-12);
        }
    }

    #[test]
    fn atom_file_round_trip() {
        let grid = grid1(4.0, 128);
        let bump = haar_bump(&grid);
        let cube = Cube::new(1, [0.5, 0.0, 0.0], 1.0).unwrap();
        let w = Weight::power(1, 0.25).unwrap();
        let atom = make_atom(&bump, &cube, &w, 1.0, 2.0, 1).unwrap();
        let text = write_atom(&atom).unwrap();
        let back = read_atom(&text).unwrap();
        assert_eq!(back.samples, atom.samples);
        assert_eq!(back.cube, atom.cube);
        assert_eq!(back.d, atom.d);
        assert_eq!(back.weight.power_exponent(), Some(0.25));
        assert_eq!(write_atom(&back).unwrap(), text);
    }
}
