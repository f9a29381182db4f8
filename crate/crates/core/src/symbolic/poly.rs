use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest degree allowed in either variable.
pub const MAX_DEGREE: usize = 32;

/// Dense bivariate polynomial; `c[i * nb + j]` multiplies `ωⁱ Bʲ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    nw: usize,
    nb: usize,
    c: Vec<f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self {
            nw: 1,
            nb: 1,
            c: vec![0.0],
        }
    }

    pub fn constant(v: f64) -> Self {
        Self {
            nw: 1,
            nb: 1,
            c: vec![v],
        }
    }

    /// `a0 + aw·ω + ab·B`.
    pub fn linear(a0: f64, aw: f64, ab: f64) -> Self {
        Self {
            nw: 2,
            nb: 2,
            c: vec![a0, ab, aw, 0.0],
        }
    }

    /// Builds from `(i, j, coeff)` triples.
    pub fn from_monomials(monomials: &[(usize, usize, f64)]) -> Result<Self> {
        let nw = monomials.iter().map(|m| m.0 + 1).max().unwrap_or(1);
        let nb = monomials.iter().map(|m| m.1 + 1).max().unwrap_or(1);
        check_degree(nw, nb)?;
        let mut p = Self {
            nw,
            nb,
            c: vec![0.0; nw * nb],
        };
        for &(i, j, v) in monomials {
            p.c[i * nb + j] += v;
        }
        Ok(p)
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i < self.nw && j < self.nb {
            self.c[i * self.nb + j]
        } else {
            0.0
        }
    }

    /// Degree bounds `(deg_ω, deg_B)` of the stored grid.
    pub fn degrees(&self) -> (usize, usize) {
        (self.nw - 1, self.nb - 1)
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eval(&self, w: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        for i in (0..self.nw).rev() {
            let row = &self.c[i * self.nb..(i + 1) * self.nb];
            let r = row.iter().rev().fold(0.0, |s, &v| s * b + v);
            acc = acc * w + r;
        }
        acc
    }

    /// Collapses B to a number, returning the coefficients in ω.
    pub fn at_b(&self, b: f64) -> Vec<f64> {
        (0..self.nw)
            .map(|i| {
                self.c[i * self.nb..(i + 1) * self.nb]
                    .iter()
                    .rev()
                    .fold(0.0, |s, &v| s * b + v)
            })
            .collect()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            c: self.c.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }

    pub fn add_assign(&mut self, other: &Poly) -> Result<()> {
        if other.nw > self.nw || other.nb > self.nb {
            *self = self.resized(self.nw.max(other.nw), self.nb.max(other.nb))?;
        }
        for i in 0..other.nw {
            for j in 0..other.nb {
                self.c[i * self.nb + j] += other.c[i * other.nb + j];
            }
        }
        Ok(())
    }

    fn resized(&self, nw: usize, nb: usize) -> Result<Self> {
        check_degree(nw, nb)?;
        let mut c = vec![0.0; nw * nb];
        for i in 0..self.nw.min(nw) {
            for j in 0..self.nb.min(nb) {
                c[i * nb + j] = self.c[i * self.nb + j];
            }
        }
        Ok(Self { nw, nb, c })
    }

    /// Product with `a0 + aw·ω + ab·B`.
    pub fn mul_linear(&self, a0: f64, aw: f64, ab: f64) -> Result<Self> {
        let nw = if aw != 0.0 { self.nw + 1 } else { self.nw };
        let nb = if ab != 0.0 { self.nb + 1 } else { self.nb };
        check_degree(nw, nb)?;
        let mut out = vec![0.0; nw * nb];
        for i in 0..self.nw {
            for j in 0..self.nb {
                let v = self.c[i * self.nb + j];
                if v == 0.0 {
                    continue;
                }
                out[i * nb + j] += a0 * v;
                if aw != 0.0 {
                    out[(i + 1) * nb + j] += aw * v;
                }
                if ab != 0.0 {
                    out[i * nb + j + 1] += ab * v;
                }
            }
        }
        Ok(Self { nw, nb, c: out })
    }

    pub fn d_omega(&self) -> Self {
        if self.nw == 1 {
            return Self::zero();
        }
        let nw = self.nw - 1;
        let mut c = vec![0.0; nw * self.nb];
        for i in 0..nw {
            for j in 0..self.nb {
                c[i * self.nb + j] = (i + 1) as f64 * self.c[(i + 1) * self.nb + j];
            }
        }
        Self { nw, nb: self.nb, c }
    }

    pub fn d_barrier(&self) -> Self {
        if self.nb == 1 {
            return Self::zero();
        }
        let nb = self.nb - 1;
        let mut c = vec![0.0; self.nw * nb];
        for i in 0..self.nw {
            for j in 0..nb {
                c[i * nb + j] = (j + 1) as f64 * self.c[i * self.nb + j + 1];
            }
        }
        Self { nw: self.nw, nb, c }
    }

    /// Zeroes coefficients below `threshold` in magnitude and trims the grid.
    pub fn prune(&mut self, threshold: f64) {
        for v in &mut self.c {
            if v.abs() < threshold {
                *v = 0.0;
            }
        }
        let mut nw = self.nw;
        while nw > 1 && (0..self.nb).all(|j| self.c[(nw - 1) * self.nb + j] == 0.0) {
            nw -= 1;
        }
        let mut nb = self.nb;
        while nb > 1 && (0..nw).all(|i| self.c[i * self.nb + nb - 1] == 0.0) {
            nb -= 1;
        }
        if (nw, nb) != (self.nw, self.nb) {
            // shrinking cannot exceed the degree cap
            *self = self.resized(nw, nb).expect("shrinking a polynomial");
        }
    }
}

fn check_degree(nw: usize, nb: usize) -> Result<()> {
    if nw > MAX_DEGREE + 1 || nb > MAX_DEGREE + 1 {
        return Err(Error::config(format!(
            "polynomial degree ({}, {}) exceeds the cap {MAX_DEGREE}",
            nw - 1,
            nb - 1
        )));
    }
    Ok(())
}
