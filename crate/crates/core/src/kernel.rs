//! Fundamental solutions Φ of the iterated Laplacian Δ^m and their
//! derivatives.
//!
//! Φ(x) = C·|x|^{2m-n}·ln|x| when n is even and 2m-n ≥ 0, else C·|x|^{2m-n}.
//! The constant C is never hardcoded: `calibrate` fits it to the defining
//! identity (Φ, Δ^m φ) = φ(0) against a smooth probe bump by graded
//! quadrature.
//!
//! Derivatives ∂^α Φ are exact: terms p(x)·ρ^e·ln^ℓρ are closed under
//! partial differentiation, so the radial form is differentiated
//! symbolically and only evaluated pointwise away from 0.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{norm, Cube, Point};
use crate::maximal::Profile;
use crate::poly::{index_order, MultiIndex, MultiPoly};
use crate::quadrature::graded_cube_quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Log,
    Power,
}

/// Sum of terms poly(x)·|x|^e·(ln|x|)^ℓ.
#[derive(Clone, Debug)]
pub struct RadialExpr {
    dim: usize,
    terms: BTreeMap<(i32, u8), MultiPoly>,
}

impl RadialExpr {
    fn new(dim: usize) -> Self {
        RadialExpr { dim, terms: BTreeMap::new() }
    }

    fn add_term(&mut self, rho_pow: i32, log_pow: u8, poly: MultiPoly) {
        if poly.is_zero() {
            return;
        }
        self.terms
            .entry((rho_pow, log_pow))
            .and_modify(|p| *p = p.add(&poly))
            .or_insert(poly);
        self.terms.retain(|_, p| !p.is_zero());
    }

    /// ∂/∂x_i: ∂(p·ρ^e·lnˡρ) = (∂p)ρ^e lnˡ + e·x_i·p·ρ^{e-2} lnˡ
    ///                        + ℓ·x_i·p·ρ^{e-2} ln^{ℓ-1}.
    pub fn partial(&self, axis: usize) -> RadialExpr {
        let mut out = RadialExpr::new(self.dim);
        let mut xi_alpha = [0u8; 3];
        xi_alpha[axis] = 1;
        for (&(e, l), p) in &self.terms {
            out.add_term(e, l, p.partial(axis));
            let xi_p = p.mul(&MultiPoly::monomial(self.dim, xi_alpha, 1.0));
            if e != 0 {
                out.add_term(e - 2, l, xi_p.scale(e as f64));
            }
            if l > 0 {
                out.add_term(e - 2, l - 1, xi_p.scale(l as f64));
            }
        }
        out
    }

    pub fn partial_multi(&self, alpha: MultiIndex) -> RadialExpr {
        let mut out = self.clone();
        for (axis, &reps) in alpha.iter().enumerate() {
            for _ in 0..reps {
                out = out.partial(axis);
            }
        }
        out
    }

    pub fn eval(&self, p: Point) -> Result<f64> {
        let rho = norm(p, self.dim);
        if rho == 0.0 {
            return Err(Error::KernelSingularity);
        }
        let ln_rho = rho.ln();
        let mut sum = 0.0;
        for (&(e, l), poly) in &self.terms {
            sum += poly.eval(p) * rho.powi(e) * ln_rho.powi(l as i32);
        }
        Ok(sum)
    }
}

/// Fundamental solution of Δ^m on ℝⁿ with calibrated normalization.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    pub dim: usize,
    pub order_m: usize,
    pub branch: Branch,
    pub constant: f64,
}

/// Branch rule of the kernel: logarithmic iff n even and 2m - n ≥ 0.
pub fn branch_for(dim: usize, m: usize) -> Branch {
    if dim.is_multiple_of(2) && 2 * m >= dim {
        Branch::Log
    } else {
        Branch::Power
    }
}

fn check_orders(dim: usize, m: usize) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidExponent(format!("dimension {dim} not in 1..=3")));
    }
    if !(1..=2).contains(&m) {
        return Err(Error::InvalidExponent(format!("Laplacian order m = {m} not in 1..=2")));
    }
    Ok(())
}

impl FundamentalSolution {
    /// Kernel with an explicitly supplied constant (tests, file round-trips).
    pub fn with_constant(dim: usize, m: usize, constant: f64) -> Result<Self> {
        check_orders(dim, m)?;
        Ok(FundamentalSolution { dim, order_m: m, branch: branch_for(dim, m), constant })
    }

    /// Calibrate C against (Φ_C, Δ^m φ) = φ(0) with the default probe.
    pub fn calibrated(dim: usize, m: usize) -> Result<Self> {
        let probe = default_probe(dim, m);
        let c = phi_normalize(dim, m, &probe)?;
        Self::with_constant(dim, m, c)
    }

    /// Unnormalized radial form (C = 1).
    pub fn base_expr(dim: usize, m: usize) -> Result<RadialExpr> {
        check_orders(dim, m)?;
        let e = 2 * m as i32 - dim as i32;
        let l = match branch_for(dim, m) {
            Branch::Log => 1,
            Branch::Power => 0,
        };
        let mut expr = RadialExpr::new(dim);
        expr.add_term(e, l, MultiPoly::constant(dim, 1.0));
        Ok(expr)
    }

    /// Φ(x); error at the singularity x = 0.
    pub fn eval(&self, p: Point) -> Result<f64> {
        let rho = norm(p, self.dim);
        if rho == 0.0 {
            return Err(Error::KernelSingularity);
        }
        let e = 2.0 * self.order_m as f64 - self.dim as f64;
        Ok(match self.branch {
            Branch::Power => self.constant * rho.powf(e),
            Branch::Log => self.constant * rho.powf(e) * rho.ln(),
        })
    }

    /// Closed-form ∂^α Φ for |α| ≤ 2m.
    pub fn partial(&self, alpha: MultiIndex) -> Result<KernelDerivative> {
        let order = index_order(alpha);
        if order > 2 * self.order_m {
            return Err(Error::DerivativeOrder(format!(
                "|α| = {order} exceeds 2m = {}",
                2 * self.order_m
            )));
        }
        for (axis, &a) in alpha.iter().enumerate() {
            if axis >= self.dim && a > 0 {
                return Err(Error::DerivativeOrder(format!(
                    "multi-index {alpha:?} uses axis {axis} beyond dimension {}",
                    self.dim
                )));
            }
        }
        let expr = Self::base_expr(self.dim, self.order_m)?.partial_multi(alpha);
        Ok(KernelDerivative {
            alpha,
            homogeneity: 2 * self.order_m as i32 - self.dim as i32 - order as i32,
            constant: self.constant,
            expr,
        })
    }
}

/// ∂^α Φ with its homogeneity degree 2m - n - |α|.
#[derive(Clone, Debug)]
pub struct KernelDerivative {
    pub alpha: MultiIndex,
    pub homogeneity: i32,
    constant: f64,
    expr: RadialExpr,
}

impl KernelDerivative {
    pub fn eval(&self, p: Point) -> Result<f64> {
        Ok(self.constant * self.expr.eval(p)?)
    }
}

/// Default calibration probe: an even polynomial bump smooth enough for Δ^m.
pub fn default_probe(dim: usize, m: usize) -> Profile {
    Profile::polynomial_bump(dim, 1.0, 2 * m + 3)
}

/// Calibrate C so that ∫ Φ_C(y)·(Δ^m φ)(y) dy = φ(0), refining the quadrature
/// until the identity holds at relative tolerance 10⁻³ on the finer level.
pub fn phi_normalize(dim: usize, m: usize, probe: &Profile) -> Result<f64> {
    check_orders(dim, m)?;
    if probe.dim != dim {
        return Err(Error::MismatchedGrids);
    }
    let phi0 = probe.amplitude * probe.poly.eval([0.0; 3]);
    if phi0.abs() < 1e-12 {
        return Err(Error::DegenerateProfile);
    }
    let lap = probe.poly.iterated_laplacian(m).scale(probe.amplitude);
    let base = FundamentalSolution::base_expr(dim, m)?;
    let sigma = probe.support_radius;
    let cube = Cube::new(dim, [0.0; 3], 2.0 * sigma * 1.01)?;
    let support2 = sigma * sigma;
    let integrand = move |p: Point| -> f64 {
        let mut r2 = 0.0;
        for k in 0..dim {
            r2 += p[k] * p[k];
        }
        if r2 > support2 {
            return 0.0;
        }
        base.eval(p).unwrap_or(0.0) * lap.eval(p)
    };
    let cells_seq: &[usize] = match dim {
        1 => &[512, 1024, 2048],
        2 => &[96, 192, 384],
        _ => &[48, 96, 160],
    };
    let kappa = match dim {
        1 => 32.0,
        2 => 8.0,
        _ => 4.0,
    };
    let mut prev: Option<f64> = None;
    let mut trace = Vec::new();
    for &cells in cells_seq {
        let i = graded_cube_quadrature(&cube, cells, 40, kappa, Some([0.0; 3]), &integrand);
        if i.abs() < 1e-300 {
            return Err(Error::CalibrationFailed("vanishing pairing integral".into()));
        }
        let c = phi0 / i;
        if let Some(cp) = prev {
            let residual = (c - cp).abs() / c.abs();
            trace.push(residual);
            if residual <= 5.0e-4 {
                return Ok(c);
            }
        }
        prev = Some(c);
    }
    Err(Error::CalibrationFailed(format!(
        "identity residual stayed above tolerance; trace: {trace:?}"
    )))
}

/// Residual of the defining identity for a calibrated kernel at a given
/// resolution: |(Φ_C, Δ^m φ) - φ(0)| / |φ(0)|.
pub fn normalization_residual(fs: &FundamentalSolution, probe: &Profile, cells: usize) -> Result<f64> {
    let phi0 = probe.amplitude * probe.poly.eval([0.0; 3]);
    if phi0.abs() < 1e-12 {
        return Err(Error::DegenerateProfile);
    }
    let lap = probe.poly.iterated_laplacian(fs.order_m).scale(probe.amplitude);
    let base = FundamentalSolution::base_expr(fs.dim, fs.order_m)?;
    let sigma = probe.support_radius;
    let cube = Cube::new(fs.dim, [0.0; 3], 2.0 * sigma * 1.01)?;
    let support2 = sigma * sigma;
    let dim = fs.dim;
    let c = fs.constant;
    let integrand = move |p: Point| -> f64 {
        let mut r2 = 0.0;
        for k in 0..dim {
            r2 += p[k] * p[k];
        }
        if r2 > support2 {
            return 0.0;
        }
        c * base.eval(p).unwrap_or(0.0) * lap.eval(p)
    };
    let kappa = match dim {
        1 => 32.0,
        2 => 8.0,
        _ => 4.0,
    };
    let i = graded_cube_quadrature(&cube, cells, 40, kappa, Some([0.0; 3]), &integrand);
    Ok((i - phi0).abs() / phi0.abs())
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n and derivative by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// ∫_{|x|=1} (∂^α Φ)(x) dσ(x) for |α| = 2m; the top-order kernel is
/// mean-zero on the sphere. `order` controls the quadrature density.
pub fn sphere_mean(fs: &FundamentalSolution, alpha: MultiIndex, order: usize) -> Result<f64> {
    if index_order(alpha) != 2 * fs.order_m {
        return Err(Error::DerivativeOrder(format!(
            "sphere mean needs |α| = 2m = {}, got {:?}",
            2 * fs.order_m,
            alpha
        )));
    }
    let k = fs.partial(alpha)?;
    match fs.dim {
        1 => {
            let a = k.eval([1.0, 0.0, 0.0])?;
            let b = k.eval([-1.0, 0.0, 0.0])?;
            Ok(a + b)
        }
        2 => {
            let m = order.max(16);
            let mut sum = 0.0;
            for j in 0..m {
                let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                sum += k.eval([th.cos(), th.sin(), 0.0])?;
            }
            Ok(sum * 2.0 * std::f64::consts::PI / m as f64)
        }
        _ => {
            let nmu = order.max(16);
            let nphi = 2 * order.max(16);
            let (mus, wts) = gauss_legendre(nmu);
            let mut sum = 0.0;
            for (mu, w) in mus.iter().zip(&wts) {
                let s = (1.0 - mu * mu).sqrt();
                for j in 0..nphi {
                    let ph = 2.0 * std::f64::consts::PI * j as f64 / nphi as f64;
                    sum += w * k.eval([s * ph.cos(), s * ph.sin(), *mu])?;
                }
            }
            Ok(sum * 2.0 * std::f64::consts::PI / nphi as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Closed-form constants derived independently (not used by the code):
    //   (1,1)  Φ = |x|/2           since (|x|/2)'' = δ            → C = 1/2
    //   (2,1)  Φ = ln|x|/(2π)      classical log potential        → C = 1/(2π)
    //   (3,1)  Φ = -1/(4π|x|)      Newtonian potential            → C = -1/(4π)
    //   (1,2)  Φ = |x|³/12         d⁴/dx⁴ |x|³ = 12·δ·…           → C = 1/12
    //   (2,2)  Φ = |x|²ln|x|/(8π)  Δ(ρ²lnρ) = 4lnρ + 4            → C = 1/(8π)
    //   (3,2)  Φ = -|x|/(8π)       Δ|x| = 2/|x|, Δ(1/ρ) = -4πδ    → C = -1/(8π)
    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn calibration_matches_derived_constants_1d() {
        let c11 = FundamentalSolution::calibrated(1, 1).unwrap().constant;
        assert!((c11 - 0.5).abs() < 1e-3 * 0.5, "{c11}");
        let c12 = FundamentalSolution::calibrated(1, 2).unwrap().constant;
        assert!((c12 - 1.0 / 12.0).abs() < 1e-3 / 12.0, "{c12}");
    }

    #[test]
    fn calibration_matches_derived_constants_2d() {
        let c21 = FundamentalSolution::calibrated(2, 1).unwrap().constant;
        assert!((c21 - 1.0 / (2.0 * PI)).abs() < 1e-3 / (2.0 * PI), "{c21}");
        let c22 = FundamentalSolution::calibrated(2, 2).unwrap().constant;
        assert!((c22 - 1.0 / (8.0 * PI)).abs() < 1e-3 / (8.0 * PI), "{c22}");
    }

    #[test]
    fn calibration_matches_derived_constants_3d() {
        let c31 = FundamentalSolution::calibrated(3, 1).unwrap().constant;
        assert!((c31 + 1.0 / (4.0 * PI)).abs() < 1e-3 / (4.0 * PI), "{c31}");
        let c32 = FundamentalSolution::calibrated(3, 2).unwrap().constant;
        assert!((c32 + 1.0 / (8.0 * PI)).abs() < 1e-3 / (8.0 * PI), "{c32}");
    }

    #[test]
    fn branch_rule() {
        assert_eq!(branch_for(1, 1), Branch::Power);
        assert_eq!(branch_for(2, 1), Branch::Log);
        assert_eq!(branch_for(3, 1), Branch::Power);
        assert_eq!(branch_for(1, 2), Branch::Power);
        assert_eq!(branch_for(2, 2), Branch::Log);
        assert_eq!(branch_for(3, 2), Branch::Power);
    }

    #[test]
    fn eval_examples() {
        // log branch vanishes on the unit sphere regardless of C
        let fs = FundamentalSolution::with_constant(2, 1, 0.7).unwrap();
        assert_eq!(fs.eval([1.0, 0.0, 0.0]).unwrap(), 0.0);
        // Φ(x) = |x|/2 at x = 2 → 1
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        assert!((fs.eval([2.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(fs.eval([0.0; 3]).unwrap_err(), Error::KernelSingularity);
    }

    #[test]
    fn partials_match_hand_computations() {
        let fs = FundamentalSolution::with_constant(2, 1, 1.0 / (2.0 * PI)).unwrap();
        // ∂²/∂x₁² ln|x| = (x₂² - x₁²)/|x|⁴ → at (1,0): -1/(2π)
        let d20 = fs.partial([2, 0, 0]).unwrap();
        assert!((d20.eval([1.0, 0.0, 0.0]).unwrap() + 1.0 / (2.0 * PI)).abs() < 1e-12);
        // ∂²/∂x₁∂x₂ ln|x| = -2x₁x₂/|x|⁴ → at (1,1): -1/(4π) after the 1/(2π)
        let d11 = fs.partial([1, 1, 0]).unwrap();
        assert!((d11.eval([1.0, 1.0, 0.0]).unwrap() + 1.0 / (4.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn partials_match_finite_differences() {
        for (dim, m) in [(1usize, 1usize), (2, 1), (3, 1), (2, 2), (1, 2)] {
            let fs = FundamentalSolution::with_constant(dim, m, 1.0).unwrap();
            let x = [0.83, if dim >= 2 { -0.41 } else { 0.0 }, if dim >= 3 { 0.57 } else { 0.0 }];
            for axis in 0..dim {
                let mut alpha = [0u8; 3];
                alpha[axis] = 1;
                let exact = fs.partial(alpha).unwrap().eval(x).unwrap();
                let h = 1e-5;
                let mut xp = x;
                let mut xm = x;
                xp[axis] += h;
                xm[axis] -= h;
                let fd = (fs.eval(xp).unwrap() - fs.eval(xm).unwrap()) / (2.0 * h);
                assert!(
                    (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                    "dim={dim} m={m} axis={axis}: {exact} vs {fd}"
                );
            }
            // one second derivative via FD of the first
            let a1 = fs.partial([1, 0, 0]).unwrap();
            let a2 = fs.partial([2, 0, 0]).unwrap();
            let h = 1e-5;
            let mut xp = x;
            let mut xm = x;
            xp[0] += h;
            xm[0] -= h;
            let fd = (a1.eval(xp).unwrap() - a1.eval(xm).unwrap()) / (2.0 * h);
            let exact = a2.eval(x).unwrap();
            assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn power_branch_homogeneity() {
        // ∂^α Φ(λx) = λ^{2m-n-|α|} ∂^α Φ(x) for the power branch
        let fs = FundamentalSolution::with_constant(3, 1, 1.0).unwrap();
        for alpha in [[0u8, 0, 0], [1, 0, 0], [1, 1, 0], [2, 0, 0]] {
            let k = fs.partial(alpha).unwrap();
            let x = [0.3, -0.2, 0.5];
            let lam = 1.7;
            let xs = [x[0] * lam, x[1] * lam, x[2] * lam];
            let lhs = k.eval(xs).unwrap();
            let rhs = lam.powi(k.homogeneity) * k.eval(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1e-12), "alpha {alpha:?}");
        }
    }

    #[test]
    fn odd_order_parity() {
        let fs = FundamentalSolution::with_constant(3, 1, 1.0).unwrap();
        let k = fs.partial([1, 0, 0]).unwrap();
        let x = [0.4, 0.2, -0.9];
        let nx = [-0.4, -0.2, 0.9];
        let a = k.eval(x).unwrap();
        let b = k.eval(nx).unwrap();
        assert!((a + b).abs() < 1e-12 * a.abs().max(1e-12));
    }

    #[test]
    fn derivative_order_cap() {
        let fs = FundamentalSolution::with_constant(2, 1, 1.0).unwrap();
        assert!(matches!(fs.partial([3, 0, 0]), Err(Error::DerivativeOrder(_))));
        assert!(matches!(fs.partial([0, 0, 1]), Err(Error::DerivativeOrder(_))));
    }

    #[test]
    fn sphere_means_vanish_at_top_order() {
        let fs21 = FundamentalSolution::with_constant(2, 1, 1.0 / (2.0 * PI)).unwrap();
        for alpha in [[2u8, 0, 0], [1, 1, 0], [0, 2, 0]] {
            let v = sphere_mean(&fs21, alpha, 128).unwrap();
            assert!(v.abs() < 1e-10, "(2,1) {alpha:?}: {v}");
        }
        let fs31 = FundamentalSolution::with_constant(3, 1, 1.0).unwrap();
        for alpha in [[2u8, 0, 0], [0, 2, 0], [0, 0, 2], [1, 1, 0], [1, 0, 1]] {
            let v = sphere_mean(&fs31, alpha, 48).unwrap();
            assert!(v.abs() < 1e-8, "(3,1) {alpha:?}: {v}");
        }
        let fs22 = FundamentalSolution::with_constant(2, 2, 1.0 / (8.0 * PI)).unwrap();
        for alpha in [[4u8, 0, 0], [3, 1, 0], [2, 2, 0]] {
            let v = sphere_mean(&fs22, alpha, 256).unwrap();
            assert!(v.abs() < 1e-9, "(2,2) {alpha:?}: {v}");
        }
    }

    #[test]
    fn one_dimensional_top_order_kernel_vanishes() {
        // (|x|/2)'' = 0 away from the origin: T*_α machinery degenerates in 1d
        let fs = FundamentalSolution::with_constant(1, 1, 0.5).unwrap();
        let k = fs.partial([2, 0, 0]).unwrap();
        assert!(k.eval([0.7, 0.0, 0.0]).unwrap().abs() < 1e-14);
        assert!(sphere_mean(&fs, [2, 0, 0], 16).unwrap().abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // ∫_{-1}^{1} t^6 dt = 2/7
        let v: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(6)).sum();
        assert!((v - 2.0 / 7.0).abs() < 1e-13);
    }
}
