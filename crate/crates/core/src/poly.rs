//! Dense multivariate polynomials in ≤ 3 variables.
//!
//! Small exact algebra shared by the mollifier profiles (whose bumps are
//! polynomials inside their support), the Δ^m of calibration probes, and the
//! polynomial factors of kernel derivatives.

use std::collections::BTreeMap;

use crate::grid::Point;

pub type MultiIndex = [u8; 3];

pub fn index_order(alpha: MultiIndex) -> usize {
    alpha[0] as usize + alpha[1] as usize + alpha[2] as usize
}

/// All multi-indices with |α| ≤ degree in graded lexicographic order.
pub fn poly_basis(dim: usize, degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for a0 in (0..=total).rev() {
            if dim == 1 {
                if a0 == total {
                    out.push([a0 as u8, 0, 0]);
                }
                continue;
            }
            for a1 in (0..=(total - a0)).rev() {
                if dim == 2 {
                    if a0 + a1 == total {
                        out.push([a0 as u8, a1 as u8, 0]);
                    }
                    continue;
                }
                let a2 = total - a0 - a1;
                out.push([a0 as u8, a1 as u8, a2 as u8]);
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    pub dim: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl MultiPoly {
    pub fn zero(dim: usize) -> Self {
        MultiPoly { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = MultiPoly::zero(dim);
        if c != 0.0 {
            p.terms.insert([0, 0, 0], c);
        }
        p
    }

    pub fn monomial(dim: usize, alpha: MultiIndex, c: f64) -> Self {
        let mut p = MultiPoly::zero(dim);
        if c != 0.0 {
            p.terms.insert(alpha, c);
        }
        p
    }

    /// |x|² = Σ x_k².
    pub fn norm_sq(dim: usize) -> Self {
        let mut p = MultiPoly::zero(dim);
        for k in 0..dim {
            let mut alpha = [0u8; 3];
            alpha[k] = 2;
            p.terms.insert(alpha, 1.0);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|a| index_order(*a)).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        let entry = self.terms.entry(alpha).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&alpha);
        }
    }

    pub fn add(&self, other: &MultiPoly) -> MultiPoly {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(*a, *c);
        }
        out
    }

    pub fn scale(&self, c: f64) -> MultiPoly {
        if c == 0.0 {
            return MultiPoly::zero(self.dim);
        }
        MultiPoly { dim: self.dim, terms: self.terms.iter().map(|(a, v)| (*a, v * c)).collect() }
    }

    pub fn mul(&self, other: &MultiPoly) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dim);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term([a[0] + b[0], a[1] + b[1], a[2] + b[2]], ca * cb);
            }
        }
        out
    }

    pub fn powi(&self, k: usize) -> MultiPoly {
        let mut out = MultiPoly::constant(self.dim, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    pub fn partial(&self, axis: usize) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dim);
        for (a, c) in &self.terms {
            if a[axis] > 0 {
                let mut b = *a;
                b[axis] -= 1;
                out.add_term(b, c * a[axis] as f64);
            }
        }
        out
    }

    pub fn partial_multi(&self, alpha: MultiIndex) -> MultiPoly {
        let mut out = self.clone();
        for (axis, &reps) in alpha.iter().enumerate() {
            for _ in 0..reps {
                out = out.partial(axis);
            }
        }
        out
    }

    pub fn laplacian(&self) -> MultiPoly {
        let mut out = MultiPoly::zero(self.dim);
        for axis in 0..self.dim {
            out = out.add(&self.partial(axis).partial(axis));
        }
        out
    }

    /// Δ^m.
    pub fn iterated_laplacian(&self, m: usize) -> MultiPoly {
        let mut out = self.clone();
        for _ in 0..m {
            out = out.laplacian();
        }
        out
    }

    pub fn eval(&self, p: Point) -> f64 {
        let mut sum = 0.0;
        for (a, c) in &self.terms {
            let mut v = *c;
            for k in 0..self.dim {
                v *= p[k].powi(a[k] as i32);
            }
            sum += v;
        }
        sum
    }
}
