//! Double-double arithmetic for the stages whose rounding errors would
//! otherwise break the symmetry of the degree-20 polynomial.

use crate::error::{Error, Result};
use crate::poly::{graded_monomials, monomial_index, Monomial, Poly3, MAX_DEGREE, MONOMIALS, NUM_MONOMIALS};

/// Value `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        Dd::two_sum(s.hi, lo)
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let p = self.hi * b;
        let err = self.hi.mul_add(b, -p) + self.lo * b;
        Dd::two_sum(p, err)
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
        Dd::two_sum(p, err)
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        Dd::two_sum(q1, q2)
    }
}

/// [`Poly3`] with double-double coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DdPoly3 {
    coeffs: [Dd; NUM_MONOMIALS],
}

fn index((a, b, c): Monomial) -> usize {
    monomial_index(a as usize, b as usize, c as usize)
}

impl DdPoly3 {
    pub const fn zero() -> Self {
        Self { coeffs: [Dd::ZERO; NUM_MONOMIALS] }
    }

    pub fn from_poly(p: &Poly3) -> Self {
        let mut out = Self::zero();
        for (m, c) in p.terms() {
            out.coeffs[index(m)] = Dd::from_f64(c);
        }
        out
    }

    /// Rounded to double precision.
    pub fn hi(&self) -> Poly3 {
        self.part(|d| d.hi)
    }

    /// `self - self.hi()`.
    #[cfg(test)]
    pub fn lo(&self) -> Poly3 {
        self.part(|d| d.lo)
    }

    fn part(&self, f: impl Fn(&Dd) -> f64) -> Poly3 {
        let terms: Vec<(Monomial, f64)> = MONOMIALS.iter().zip(&self.coeffs).map(|(m, d)| (*m, f(d))).collect();
        Poly3::from_terms(&terms)
    }

    pub fn coeff(&self, m: Monomial) -> Dd {
        self.coeffs[index(m)]
    }

    pub fn set_coeff(&mut self, m: Monomial, x: Dd) {
        self.coeffs[index(m)] = x;
    }

    fn degree(&self) -> usize {
        MONOMIALS
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| c.hi != 0.0)
            .map(|(m, _)| (m.0 + m.1 + m.2) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Monomial, Dd)> + '_ {
        MONOMIALS.iter().copied().zip(self.coeffs.iter().copied()).filter(|(_, c)| c.hi != 0.0)
    }

    pub fn add(mut self, o: &DdPoly3) -> DdPoly3 {
        self.coeffs.iter_mut().zip(&o.coeffs).for_each(|(a, b)| *a = a.add(*b));
        self
    }

    pub fn sub(mut self, o: &DdPoly3) -> DdPoly3 {
        self.coeffs.iter_mut().zip(&o.coeffs).for_each(|(a, b)| *a = a.sub(*b));
        self
    }

    pub fn scale(mut self, s: f64) -> DdPoly3 {
        self.coeffs.iter_mut().for_each(|a| *a = a.mul_f64(s));
        self
    }

    pub fn checked_mul(&self, o: &DdPoly3) -> Result<DdPoly3> {
        let d = self.degree() + o.degree();
        if d > MAX_DEGREE {
            return Err(Error::DegreeOverflow(d));
        }
        let mut out = DdPoly3::zero();
        for (m1, x) in self.terms() {
            for (m2, y) in o.terms() {
                let k = index((m1.0 + m2.0, m1.1 + m2.1, m1.2 + m2.2));
                out.coeffs[k] = out.coeffs[k].add(x.mul(y));
            }
        }
        Ok(out)
    }

    /// Multiplies by a single monomial.
    pub fn shift(&self, (da, db, dc): Monomial) -> Result<DdPoly3> {
        let d = self.degree() + (da + db + dc) as usize;
        if d > MAX_DEGREE && self.terms().next().is_some() {
            return Err(Error::DegreeOverflow(d));
        }
        let mut out = DdPoly3::zero();
        for ((a, b, c), x) in self.terms() {
            out.coeffs[index((a + da, b + db, c + dc))] = x;
        }
        Ok(out)
    }

    /// Exact division in graded-lex order, as [`Poly3::div_exact`].
    pub fn div_exact(&self, divisor: &Poly3, rel_tol: f64) -> Result<DdPoly3> {
        let order = graded_monomials(MAX_DEGREE);
        let lead = order
            .iter()
            .copied()
            .find(|m| divisor.coeff(*m) != 0.0)
            .ok_or(Error::InexactDivision { remainder: f64::INFINITY, scale: 0.0 })?;
        let lead_c = Dd::from_f64(divisor.coeff(lead));
        let mut rem = *self;
        let mut quot = DdPoly3::zero();
        for m in order {
            let c = rem.coeff(m);
            if c.hi == 0.0 || m.0 < lead.0 || m.1 < lead.1 || m.2 < lead.2 {
                continue;
            }
            let qm = (m.0 - lead.0, m.1 - lead.1, m.2 - lead.2);
            let qc = c.div(lead_c);
            quot.coeffs[index(qm)] = quot.coeffs[index(qm)].add(qc);
            for (dm, dc) in divisor.terms() {
                let k = index((qm.0 + dm.0, qm.1 + dm.1, qm.2 + dm.2));
                rem.coeffs[k] = rem.coeffs[k].sub(qc.mul_f64(dc));
            }
            rem.coeffs[index(m)] = Dd::ZERO;
        }
        let scale = self.hi().max_abs();
        let remainder = rem.hi().max_abs();
        if remainder > rel_tol * scale {
            return Err(Error::InexactDivision { remainder, scale });
        }
        Ok(quot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_keep_the_low_part() {
        let third = Dd::ONE.div(Dd::from_f64(3.0));
        let back = third.mul_f64(3.0);
        assert_eq!(back.hi, 1.0);
        assert!(back.lo.abs() < 1e-30);
        // (1 + 2^-40)^2 needs more than 53 bits
        let x = Dd::from_f64(1.0 + 2f64.powi(-40));
        let sq = x.mul(x);
        assert_eq!(sq.hi, 1.0 + 2f64.powi(-39));
        assert_eq!(sq.lo, 2f64.powi(-80));
    }

    #[test]
    fn division_by_delta_is_exact() {
        let p = Poly3::from_terms(&[((1, 0, 0), 1.0 / 3.0), ((0, 1, 1), 0.7), ((0, 0, 0), -2.0)]);
        let prod = DdPoly3::from_poly(&p).checked_mul(&DdPoly3::from_poly(&Poly3::delta())).unwrap();
        let q = prod.div_exact(&Poly3::delta(), 1e-12).unwrap();
        assert_eq!(q.hi(), p);
        assert!(q.lo().max_abs() < 1e-30);
        let bad = prod.add(&DdPoly3::from_poly(&Poly3::constant(1.0)));
        assert!(bad.div_exact(&Poly3::delta(), 1e-12).is_err());
    }
}
