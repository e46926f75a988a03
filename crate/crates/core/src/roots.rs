//! Real roots of a univariate polynomial: Sturm-sequence isolation followed
//! by Ridders refinement.

use crate::error::{Error, Result};
use crate::geometry::sign;
use crate::poly::Poly1;
use crate::tolerance::Tolerances;

/// Interval holding exactly one distinct real root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket {
    pub lo: f64,
    pub hi: f64,
    /// Isolation stopped at the width floor with more than one root counted,
    /// or without a sign change: the bracket may hold a multiple root.
    pub possibly_multiple: bool,
}

/// A polished real root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub value: f64,
    pub possibly_multiple: bool,
    pub converged: bool,
}

/// Drops leading noise and rescales to unit max coefficient.
fn clean(p: &Poly1, rel: f64) -> Poly1 {
    p.trimmed(rel).normalized()
}

/// Sturm chain `p0 = p, p1 = p', p_(k+1) = -rem(p_(k-1), p_k)`, every member
/// rescaled to unit max-abs coefficient.
pub fn sturm_sequence(p: &Poly1, tol: &Tolerances) -> Vec<Poly1> {
    let p0 = clean(p, tol.leading_trim);
    let mut seq = vec![p0.clone()];
    let p1 = clean(&p0.derivative(), tol.leading_trim);
    if p1.is_zero() {
        return seq;
    }
    seq.push(p1);
    loop {
        let n = seq.len();
        if seq[n - 1].degree() == Some(0) {
            break;
        }
        let r = seq[n - 2].rem(&seq[n - 1]);
        // both operands have unit scale, so an absolute floor separates a
        // vanishing remainder (common factor) from a genuine one
        if r.max_abs() <= 1e-13 {
            break;
        }
        seq.push(clean(&r, 1e-14).scale(-1.0));
    }
    seq
}

fn variations(values: impl Iterator<Item = f64>) -> usize {
    let mut count = 0;
    let mut last = 0.0;
    for v in values.filter(|v| *v != 0.0) {
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

/// Sign variations of the chain at `x`.
pub fn sign_variations(seq: &[Poly1], x: f64) -> usize {
    variations(seq.iter().map(|p| p.eval(x)))
}

/// Sign variations at `+inf` (`positive`) or `-inf`.
fn variations_at_infinity(seq: &[Poly1], positive: bool) -> usize {
    variations(seq.iter().map(|p| match p.degree() {
        Some(d) => {
            let lead = p.coeff(d);
            if positive || d % 2 == 0 {
                lead
            } else {
                -lead
            }
        }
        None => 0.0,
    }))
}

/// Cauchy bound `1 + max|c_i| / |c_d|` on the magnitude of every root.
pub fn cauchy_bound(p: &Poly1) -> f64 {
    let d = p.degree().unwrap_or(0);
    let lead = p.coeff(d).abs();
    let m = p.coeffs()[..d].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    1.0 + m / lead
}

/// Power of two `s` close to `(|c_0| / |c_d|)^(1/d)`. Substituting `x = s·y`
/// balances the outer coefficients without rounding.
pub fn balancing_scale(p: &Poly1) -> f64 {
    let Some(d) = p.degree().filter(|&d| d > 0) else {
        return 1.0;
    };
    let lead = p.coeff(d).abs();
    let low = p.coeffs().iter().find(|c| **c != 0.0).map_or(lead, |c| c.abs());
    let e = ((low / lead).log2() / d as f64).round().clamp(-60.0, 60.0);
    (2.0f64).powi(e as i32)
}

/// `p(s·y)` as a polynomial in `y`.
fn substitute_scale(p: &Poly1, s: f64) -> Poly1 {
    let mut f = 1.0;
    Poly1::new(
        p.coeffs()
            .iter()
            .map(|c| {
                let out = c * f;
                f *= s;
                out
            })
            .collect(),
    )
}

/// Number of distinct real roots.
pub fn count_real_roots(p: &Poly1, tol: &Tolerances) -> usize {
    let p = clean(p, tol.leading_trim);
    let seq = sturm_sequence(&substitute_scale(&p, balancing_scale(&p)), tol);
    variations_at_infinity(&seq, false).saturating_sub(variations_at_infinity(&seq, true))
}

/// Isolates the distinct real roots. The search runs on `p(s·y)` with `s`
/// from [`balancing_scale`]; brackets are reported in the original variable.
pub fn sturm_isolate(p: &Poly1, tol: &Tolerances) -> Result<Vec<RootBracket>> {
    let p = clean(p, tol.leading_trim);
    if p.degree().is_none_or(|d| d == 0) {
        return Err(Error::DegenerateZeroPolynomial);
    }
    let s = balancing_scale(&p);
    let mut out = isolate_scaled(&clean(&substitute_scale(&p, s), tol.leading_trim), tol);
    for b in &mut out {
        b.lo *= s;
        b.hi *= s;
    }
    Ok(out)
}

fn isolate_scaled(p: &Poly1, tol: &Tolerances) -> Vec<RootBracket> {
    let seq = sturm_sequence(p, tol);
    let m = cauchy_bound(p);
    let (lo, hi) = (-m, m);
    let total = sign_variations(&seq, lo).saturating_sub(sign_variations(&seq, hi));

    let mut out = Vec::new();
    // (lo, hi, V(lo), V(hi)); the chain counts roots in (lo, hi]
    let mut stack = vec![(lo, hi, sign_variations(&seq, lo), sign_variations(&seq, hi))];
    if total == 0 {
        return out;
    }
    while let Some((a, b, va, vb)) = stack.pop() {
        let count = va.saturating_sub(vb);
        if count == 0 {
            continue;
        }
        let (fa, fb) = (p.eval(a), p.eval(b));
        if count == 1 && (fa * fb < 0.0 || fb == 0.0) {
            out.push(RootBracket {
                lo: a,
                hi: b,
                possibly_multiple: false,
            });
            continue;
        }
        if b - a <= tol.isolation_width * (1.0 + a.abs()) {
            out.push(RootBracket {
                lo: a,
                hi: b,
                possibly_multiple: true,
            });
            continue;
        }
        let mid = 0.5 * (a + b);
        let vm = sign_variations(&seq, mid);
        stack.push((mid, b, vm, vb));
        stack.push((a, mid, va, vm));
    }
    out.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    out
}

/// Refines a bracketed root with Ridders' method.
///
/// Runs until the bracket has collapsed to the width floor or an exact zero
/// is hit. On hitting the iteration cap the bracket midpoint is returned
/// inside [`Error::NoConvergence`], and without a sign change at the ends the
/// endpoint of smaller magnitude.
pub fn ridders_polish(p: &Poly1, b: &RootBracket, tol: &Tolerances) -> Result<f64> {
    let (mut x0, mut x1) = (b.lo, b.hi);
    let (mut f0, mut f1) = (p.eval(x0), p.eval(x1));
    if f0 == 0.0 {
        return Ok(x0);
    }
    if f1 == 0.0 {
        return Ok(x1);
    }
    if sign(f0) == sign(f1) {
        let best = if f0.abs() <= f1.abs() { x0 } else { x1 };
        return Err(Error::NoConvergence { best });
    }
    for _ in 0..tol.ridders_max_iter {
        let mid = 0.5 * (x0 + x1);
        let fm = p.eval(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        let s = (fm * fm - f0 * f1).sqrt();
        if !(s > 0.0) {
            return Ok(mid);
        }
        let x = mid + (mid - x0) * sign(f0 - f1) * fm / s;
        let fx = p.eval(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if sign(fm) != sign(fx) {
            (x0, f0, x1, f1) = (mid, fm, x, fx);
        } else if sign(f0) != sign(fx) {
            (x1, f1) = (x, fx);
        } else {
            (x0, f0) = (x, fx);
        }
        if (x1 - x0).abs() <= tol.ridders_width * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        best: 0.5 * (x0 + x1),
    })
}

/// All distinct real roots in ascending order.
pub fn real_roots(p: &Poly1, tol: &Tolerances) -> Result<Vec<RealRoot>> {
    let brackets = sturm_isolate(p, tol)?;
    let p = clean(p, tol.leading_trim);
    Ok(brackets
        .iter()
        .map(|b| {
            if b.possibly_multiple {
                return RealRoot {
                    value: 0.5 * (b.lo + b.hi),
                    possibly_multiple: true,
                    converged: true,
                };
            }
            match ridders_polish(&p, b, tol) {
                Ok(value) => RealRoot {
                    value,
                    possibly_multiple: false,
                    converged: true,
                },
                Err(Error::NoConvergence { best }) => RealRoot {
                    value: best,
                    possibly_multiple: false,
                    converged: false,
                },
                Err(_) => unreachable!("ridders only reports non-convergence"),
            }
        })
        .collect())
}

/// Critical points of `p` where `p` vanishes to working precision and no
/// root in `found` is nearby, smallest relative residual first. These are
/// double roots that rounding turned into a close complex pair.
pub fn near_double_roots(p: &Poly1, found: &[RealRoot], tol: &Tolerances) -> Result<Vec<RealRoot>> {
    let p = clean(p, tol.leading_trim);
    if p.degree().unwrap_or(0) < 2 {
        return Ok(Vec::new());
    }
    let mut out: Vec<(f64, RealRoot)> = real_roots(&p.derivative(), tol)?
        .into_iter()
        .filter(|r| r.value.is_finite())
        .map(|r| (p.eval(r.value).abs() / p.eval_abs(r.value), r))
        .filter(|(ratio, _)| *ratio <= tol.double_root_residual)
        .filter(|(_, r)| {
            let gap = tol.double_root_separation * (1.0 + r.value.abs());
            found.iter().all(|f| (f.value - r.value).abs() > gap)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out
        .into_iter()
        .map(|(_, r)| RealRoot {
            value: r.value,
            possibly_multiple: true,
            converged: r.converged,
        })
        .collect())
}

/// Root of `W` with `|w0| >= 1` mapping to `w̃0 = w0 - 1/w0`.
pub fn unfold_root(wtilde: f64) -> f64 {
    let h = wtilde / 2.0;
    h + sign(wtilde) * h.hypot(1.0)
}
