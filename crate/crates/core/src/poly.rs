//! Dense polynomials: univariate [`Poly1`] and trivariate [`Poly3`] in
//! `(u, v, w)` up to total degree six.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Highest total degree a [`Poly3`] can hold.
pub const MAX_DEGREE: usize = 6;
/// Number of monomials `u^a v^b w^c` with `a + b + c <= MAX_DEGREE`.
pub const NUM_MONOMIALS: usize = 84;

/// Exponent triple `(a, b, c)` of `u^a v^b w^c`.
pub type Monomial = (u8, u8, u8);

/// Storage position of a monomial: blocks of ascending total degree, and
/// within a block lexicographically descending with `u > v > w`.
pub const fn monomial_index(a: usize, b: usize, c: usize) -> usize {
    let d = a + b + c;
    d * (d + 1) * (d + 2) / 6 + (d - a) * (d - a + 1) / 2 + (d - a - b)
}

const fn build_monomials() -> [Monomial; NUM_MONOMIALS] {
    let mut out = [(0u8, 0u8, 0u8); NUM_MONOMIALS];
    let mut d = 0;
    while d <= MAX_DEGREE {
        let mut a = d as isize;
        while a >= 0 {
            let mut b = d as isize - a;
            while b >= 0 {
                let c = d as isize - a - b;
                out[monomial_index(a as usize, b as usize, c as usize)] = (a as u8, b as u8, c as u8);
                b -= 1;
            }
            a -= 1;
        }
        d += 1;
    }
    out
}

/// Exponents by storage position.
pub const MONOMIALS: [Monomial; NUM_MONOMIALS] = build_monomials();

/// Monomials of total degree at most `max_degree` in graded order: degree
/// descending, then lexicographic with `u > v > w`.
pub fn graded_monomials(max_degree: usize) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in (0..=max_degree).rev() {
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                out.push((a as u8, b as u8, (d - a - b) as u8));
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq)]
pub struct Poly3 {
    coeffs: [f64; NUM_MONOMIALS],
}

impl fmt::Debug for Poly3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = f.debug_map();
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                let (a, b, e) = MONOMIALS[i];
                terms.entry(&format_args!("u{a}v{b}w{e}"), c);
            }
        }
        terms.finish()
    }
}

impl Default for Poly3 {
    fn default() -> Self {
        Self::zero()
    }
}

impl Poly3 {
    pub const fn zero() -> Self {
        Self {
            coeffs: [0.0; NUM_MONOMIALS],
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms(&[((0, 0, 0), c)])
    }

    pub fn u() -> Self {
        Self::from_terms(&[((1, 0, 0), 1.0)])
    }

    pub fn v() -> Self {
        Self::from_terms(&[((0, 1, 0), 1.0)])
    }

    pub fn w() -> Self {
        Self::from_terms(&[((0, 0, 1), 1.0)])
    }

    /// `1 + u^2 + v^2 + w^2`
    pub fn delta() -> Self {
        Self::from_terms(&[
            ((0, 0, 0), 1.0),
            ((2, 0, 0), 1.0),
            ((0, 2, 0), 1.0),
            ((0, 0, 2), 1.0),
        ])
    }

    /// Sums the given terms; panics on a monomial above [`MAX_DEGREE`].
    pub fn from_terms(terms: &[(Monomial, f64)]) -> Self {
        let mut p = Self::zero();
        for &((a, b, c), x) in terms {
            p.coeffs[Self::index((a, b, c))] += x;
        }
        p
    }

    fn index((a, b, c): Monomial) -> usize {
        let (a, b, c) = (a as usize, b as usize, c as usize);
        assert!(a + b + c <= MAX_DEGREE, "monomial degree above {MAX_DEGREE}");
        monomial_index(a, b, c)
    }

    pub fn coeff(&self, m: Monomial) -> f64 {
        self.coeffs[Self::index(m)]
    }

    pub fn set_coeff(&mut self, m: Monomial, x: f64) {
        self.coeffs[Self::index(m)] = x;
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (MONOMIALS[i], *c))
    }

    /// Highest total degree with a nonzero coefficient; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms()
            .map(|((a, b, c), _)| (a + b + c) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn eval(&self, u: f64, v: f64, w: f64) -> f64 {
        let pow = |x: f64| {
            let mut p = [1.0; MAX_DEGREE + 1];
            for k in 1..=MAX_DEGREE {
                p[k] = p[k - 1] * x;
            }
            p
        };
        let (pu, pv, pw) = (pow(u), pow(v), pow(w));
        self.terms()
            .map(|((a, b, c), x)| x * pu[a as usize] * pv[b as usize] * pw[c as usize])
            .sum()
    }

    /// Partial derivatives `(d/du, d/dv, d/dw)` at a point.
    pub fn gradient(&self, u: f64, v: f64, w: f64) -> [f64; 3] {
        let pw = |x: f64, k: u8| if k == 0 { 0.0 } else { k as f64 * x.powi(k as i32 - 1) };
        let mut g = [0.0; 3];
        for ((a, b, c), x) in self.terms() {
            let (ua, vb, wc) = (u.powi(a as i32), v.powi(b as i32), w.powi(c as i32));
            g[0] += x * pw(u, a) * vb * wc;
            g[1] += x * ua * pw(v, b) * wc;
            g[2] += x * ua * vb * pw(w, c);
        }
        g
    }

    pub fn checked_mul(&self, other: &Poly3) -> Result<Poly3> {
        let d = self.degree() + other.degree();
        if d > MAX_DEGREE {
            return Err(Error::DegreeOverflow(d));
        }
        let mut out = Poly3::zero();
        for ((a1, b1, c1), x) in self.terms() {
            for ((a2, b2, c2), y) in other.terms() {
                out.coeffs[monomial_index(
                    (a1 + a2) as usize,
                    (b1 + b2) as usize,
                    (c1 + c2) as usize,
                )] += x * y;
            }
        }
        Ok(out)
    }

    /// Multiplies by a single monomial.
    pub fn shift(&self, (da, db, dc): Monomial) -> Result<Poly3> {
        let d = self.degree() + (da + db + dc) as usize;
        if d > MAX_DEGREE && self.max_abs() != 0.0 {
            return Err(Error::DegreeOverflow(d));
        }
        let mut out = Poly3::zero();
        for ((a, b, c), x) in self.terms() {
            out.coeffs[monomial_index((a + da) as usize, (b + db) as usize, (c + dc) as usize)] = x;
        }
        Ok(out)
    }

    /// Quotient of an exact division by `divisor`.
    ///
    /// Uses graded-lex order, so the leading term of the divisor is its
    /// highest-degree monomial with the most `u`s. Any remainder above
    /// `rel_tol * max|self|` is an error.
    pub fn div_exact(&self, divisor: &Poly3, rel_tol: f64) -> Result<Poly3> {
        let order = graded_monomials(MAX_DEGREE);
        let lead = order
            .iter()
            .copied()
            .find(|m| divisor.coeff(*m) != 0.0)
            .ok_or(Error::InexactDivision {
                remainder: f64::INFINITY,
                scale: 0.0,
            })?;
        let lead_c = divisor.coeff(lead);
        let mut rem = *self;
        let mut quot = Poly3::zero();
        for m in order {
            let c = rem.coeff(m);
            if c == 0.0 || m.0 < lead.0 || m.1 < lead.1 || m.2 < lead.2 {
                continue;
            }
            let qm = (m.0 - lead.0, m.1 - lead.1, m.2 - lead.2);
            let qc = c / lead_c;
            quot.coeffs[Self::index(qm)] += qc;
            for (dm, dc) in divisor.terms() {
                rem.coeffs[Self::index((qm.0 + dm.0, qm.1 + dm.1, qm.2 + dm.2))] -= qc * dc;
            }
            rem.coeffs[Self::index(m)] = 0.0;
        }
        let scale = self.max_abs();
        let remainder = rem.max_abs();
        if remainder > rel_tol * scale {
            return Err(Error::InexactDivision { remainder, scale });
        }
        Ok(quot)
    }
}

impl Add for Poly3 {
    type Output = Poly3;
    fn add(mut self, rhs: Poly3) -> Poly3 {
        self.coeffs.iter_mut().zip(rhs.coeffs).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Poly3 {
    type Output = Poly3;
    fn sub(mut self, rhs: Poly3) -> Poly3 {
        self.coeffs.iter_mut().zip(rhs.coeffs).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for Poly3 {
    type Output = Poly3;
    fn neg(self) -> Poly3 {
        self.scale(-1.0)
    }
}

/// Dense univariate polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly1 {
    coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    /// Expands `lead * prod (x - r)`.
    pub fn from_roots(roots: &[f64], lead: f64) -> Self {
        let mut p = Poly1::new(vec![lead]);
        for r in roots {
            p = &p * &Poly1::new(vec![-r, 1.0]);
        }
        p
    }

    pub fn monomial(k: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero past the stored length.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// Index of the last nonzero coefficient, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| *c != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `sum |c_k| |x|^k`, the scale of rounding error in [`Poly1::eval`].
    pub fn eval_abs(&self, x: f64) -> f64 {
        let ax = x.abs();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * ax + c.abs())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Multiplies by `x^k`.
    pub fn shift(&self, k: usize) -> Self {
        let mut coeffs = vec![0.0; k];
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// Drops leading coefficients with magnitude `<= rel_tol * max|c|`.
    pub fn trimmed(&self, rel_tol: f64) -> Self {
        let cut = rel_tol * self.max_abs();
        let keep = self
            .coeffs
            .iter()
            .rposition(|c| c.abs() > cut)
            .map_or(0, |i| i + 1);
        Self::new(self.coeffs[..keep].to_vec())
    }

    /// Scales to unit max-absolute coefficient; the zero polynomial is unchanged.
    pub fn normalized(&self) -> Self {
        let m = self.max_abs();
        if m == 0.0 {
            self.clone()
        } else {
            self.scale(1.0 / m)
        }
    }

    /// Remainder of Euclidean division by `divisor`, whose leading stored
    /// coefficient must be nonzero.
    pub fn rem(&self, divisor: &Poly1) -> Poly1 {
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead = divisor.coeffs[dd];
        let mut r = self.coeffs.clone();
        let mut top = r.len();
        while top > dd {
            let k = top - 1;
            let q = r[k] / lead;
            if q != 0.0 {
                for j in 0..=dd {
                    r[k - dd + j] -= q * divisor.coeffs[j];
                }
            }
            r[k] = 0.0;
            top -= 1;
        }
        r.truncate(dd);
        Poly1::new(r)
    }
}

impl Add for &Poly1 {
    type Output = Poly1;
    fn add(self, rhs: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly1::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly1 {
    type Output = Poly1;
    fn sub(self, rhs: &Poly1) -> Poly1 {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly1::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly1 {
    type Output = Poly1;
    fn mul(self, rhs: &Poly1) -> Poly1 {
        if self.coeffs.is_empty() || rhs.coeffs.is_empty() {
            return Poly1::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly1::new(out)
    }
}
