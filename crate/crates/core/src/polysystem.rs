//! Reduction of the five epipolar constraints to one univariate polynomial.
//!
//! The pipeline is:
//!
//! 1. `S̄` (5×3): rows `q1ᵀ R̄ᵀ [q2]x` with `R̄ = Δ·R` quadratic in `(u, v, w)`.
//! 2. Ten quartics `f_i`: each 3×3 minor of `S̄` divided once by `Δ`.
//! 3. Expansion of the ten quartics by `u`, `v`, `w` to a 30×50 matrix `B'`
//!    over the monomials `[m'; m]`. Only quartics free of pure `(u, v)`
//!    terms are multiplied by `u` and `v`.
//! 4. Elimination on `B'` leaves six rows `g_1..g_6` whose pairwise
//!    `w`-shifted differences form the 4×4 polynomial matrix `C(w)` acting
//!    on `[uv, u, v, 1]`.
//! 5. `W(w) = det C(w)` has degree 20 and is symmetric under `w -> -1/w`;
//!    it folds to a degree-10 polynomial in `w - 1/w`.
//!
//! Steps 1–4 and the determinant run in double-double. The symmetry of `W`
//! is exact only for data of the exact `S̄` form, and rounding the quartic
//! coefficients independently breaks it by up to ~1e-8 on some inputs.

use nalgebra::{Matrix3, Matrix4, Matrix5x3};

use crate::dd::{Dd, DdPoly3};
use crate::error::{Error, Result, Stage};
use crate::normalization::NormalizedProblem;
use crate::poly::{graded_monomials, Monomial, Poly1, Poly3};
use crate::tolerance::Tolerances;

/// Number of rows and columns of the expanded coefficient matrix.
pub const EXPANDED_ROWS: usize = 30;
pub const EXPANDED_COLS: usize = 50;
/// Columns eliminated before the six `g` rows.
pub const LEADING_COLS: usize = 24;

/// 5×3 matrix with polynomial entries.
pub type PolyRows = [[Poly3; 3]; 5];

/// Order of the 50 monomials in `[m'; m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialOrder50 {
    monomials: Vec<Monomial>,
    tail: Vec<Monomial>,
}

impl Default for MonomialOrder50 {
    fn default() -> Self {
        Self::new()
    }
}

impl MonomialOrder50 {
    pub fn new() -> Self {
        // m': degree-5 monomials divisible by w, graded-lex
        let m_prime: Vec<Monomial> = graded_monomials(5)
            .into_iter()
            .filter(|&(a, b, c)| a + b + c == 5 && c >= 1)
            .collect();
        let mut monomials = m_prime;
        monomials.extend(graded_monomials(4));

        let mut tail: Vec<Monomial> = vec![(3, 0, 2), (3, 0, 1), (3, 0, 0), (0, 3, 2), (0, 3, 1), (0, 3, 0)];
        tail.extend((0..=3).rev().map(|k| (1, 1, k)));
        tail.extend((0..=4).rev().map(|k| (1, 0, k)));
        tail.extend((0..=4).rev().map(|k| (0, 1, k)));
        tail.extend((0..=5).rev().map(|k| (0, 0, k)));
        Self { monomials, tail }
    }

    /// The 50 monomials, `m'` first.
    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn index_of(&self, m: Monomial) -> Option<usize> {
        self.monomials.iter().position(|&x| x == m)
    }

    /// The 26 trailing monomials: six pivots of `g_1..g_6`, then the blocks
    /// `uv·w^3..uv`, `u·w^4..u`, `v·w^4..v`, `w^5..1`.
    pub fn tail(&self) -> &[Monomial] {
        &self.tail
    }

    /// Column order for elimination: basis positions of the 24 leading
    /// monomials (in basis order) followed by the tail.
    pub fn elimination_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..EXPANDED_COLS)
            .filter(|i| !self.tail.contains(&self.monomials[*i]))
            .collect();
        order.extend(self.tail.iter().map(|m| self.index_of(*m).expect("tail inside basis")));
        order
    }

    /// Values of the 50 monomials at a point.
    pub fn evaluate(&self, u: f64, v: f64, w: f64) -> Vec<f64> {
        self.monomials
            .iter()
            .map(|&(a, b, c)| u.powi(a as i32) * v.powi(b as i32) * w.powi(c as i32))
            .collect()
    }
}

/// Scaled rotation `Δ·R` as a matrix of quadratics in `(u, v, w)`.
fn scaled_rotation_poly() -> [[Poly3; 3]; 3] {
    let t = |terms: &[(Monomial, f64)]| Poly3::from_terms(terms);
    let one = (0, 0, 0);
    let (uu, vv, ww) = ((2, 0, 0), (0, 2, 0), (0, 0, 2));
    let (uv, uw, vw) = ((1, 1, 0), (1, 0, 1), (0, 1, 1));
    let (u, v, w) = ((1, 0, 0), (0, 1, 0), (0, 0, 1));
    [
        [
            t(&[(one, 1.0), (uu, 1.0), (vv, -1.0), (ww, -1.0)]),
            t(&[(uv, 2.0), (w, 2.0)]),
            t(&[(uw, 2.0), (v, -2.0)]),
        ],
        [
            t(&[(uv, 2.0), (w, -2.0)]),
            t(&[(one, 1.0), (uu, -1.0), (vv, 1.0), (ww, -1.0)]),
            t(&[(vw, 2.0), (u, 2.0)]),
        ],
        [
            t(&[(uw, 2.0), (v, 2.0)]),
            t(&[(vw, 2.0), (u, -2.0)]),
            t(&[(one, 1.0), (uu, -1.0), (vv, -1.0), (ww, 1.0)]),
        ],
    ]
}

type DdRows = [[DdPoly3; 3]; 5];

fn sbar_dd(n: &NormalizedProblem) -> DdRows {
    let rbar = scaled_rotation_poly().map(|row| row.map(|p| DdPoly3::from_poly(&p)));
    let mut rows = [[DdPoly3::zero(); 3]; 5];
    for (i, row) in rows.iter_mut().enumerate() {
        let q1 = n.bearing1(i);
        let q2 = n.bearing2(i);
        // p = R̄ q1
        let p: [DdPoly3; 3] = std::array::from_fn(|k| {
            (0..3).fold(DdPoly3::zero(), |acc, l| acc.add(&rbar[k][l].scale(q1[l])))
        });
        let skew = crate::geometry::skew(&q2);
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = (0..3).fold(DdPoly3::zero(), |acc, k| acc.add(&p[k].scale(skew[(k, j)])));
        }
    }
    rows
}

/// `S̄ = Δ·S`: row `i` is `q1ᵀ R̄ᵀ [q2]x`, quadratic in `(u, v, w)`.
pub fn build_sbar(n: &NormalizedProblem) -> PolyRows {
    sbar_dd(n).map(|row| row.map(|p| p.hi()))
}

/// `S` for a numeric rotation: row `i` is `q1_iᵀ Rᵀ [q2_i]x`.
pub fn numeric_s(n: &NormalizedProblem, r: &Matrix3<f64>) -> Matrix5x3<f64> {
    let mut s = Matrix5x3::zeros();
    for i in 0..5 {
        let row = (r * n.bearing1(i)).transpose() * crate::geometry::skew(&n.bearing2(i));
        s.set_row(i, &row);
    }
    s
}

pub fn eval_rows(rows: &PolyRows, u: f64, v: f64, w: f64) -> Matrix5x3<f64> {
    Matrix5x3::from_fn(|i, j| rows[i][j].eval(u, v, w))
}

/// Row triples of a 5-row matrix in lexicographic order.
pub fn row_triples() -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(10);
    for i in 0..5 {
        for j in i + 1..5 {
            for k in j + 1..5 {
                out.push([i, j, k]);
            }
        }
    }
    out
}

fn det3(m: [[&DdPoly3; 3]; 3]) -> Result<DdPoly3> {
    let term = |a: &DdPoly3, b: &DdPoly3, c: &DdPoly3| a.checked_mul(b)?.checked_mul(c);
    Ok(term(m[0][0], m[1][1], m[2][2])?
        .add(&term(m[0][1], m[1][2], m[2][0])?)
        .add(&term(m[0][2], m[1][0], m[2][1])?)
        .sub(&term(m[0][2], m[1][1], m[2][0])?)
        .sub(&term(m[0][0], m[1][2], m[2][1])?)
        .sub(&term(m[0][1], m[1][0], m[2][2])?))
}

fn f_polynomials_dd(sbar: &DdRows, tol: &Tolerances) -> Result<[DdPoly3; 10]> {
    let delta = Poly3::delta();
    let mut out = [DdPoly3::zero(); 10];
    for (slot, [i, j, k]) in out.iter_mut().zip(row_triples()) {
        let minor = det3([
            [&sbar[i][0], &sbar[i][1], &sbar[i][2]],
            [&sbar[j][0], &sbar[j][1], &sbar[j][2]],
            [&sbar[k][0], &sbar[k][1], &sbar[k][2]],
        ])?;
        *slot = minor.div_exact(&delta, tol.exact_division)?;
    }
    Ok(out)
}

/// The ten quartics `f_i = minor_i(S̄) / Δ`.
pub fn build_f_polynomials(sbar: &PolyRows, tol: &Tolerances) -> Result<[Poly3; 10]> {
    let sbar = sbar.map(|row| row.map(|p| DdPoly3::from_poly(&p)));
    Ok(f_polynomials_dd(&sbar, tol)?.map(|p| p.hi()))
}

fn normalize_row(row: &mut [f64]) {
    let m = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        row.iter_mut().for_each(|x| *x /= m);
    }
}

/// Gauss–Jordan with partial pivoting over the columns in `order`.
/// Returns the pivot column of each reduced row (rows are left in pivot
/// order); pivot entries are exactly 1 and the rest of each pivot column is
/// exactly 0.
fn gauss_jordan(rows: &mut [Vec<f64>], order: &[usize], pivot_tol: f64) -> Vec<usize> {
    let nrows = rows.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for &col in order {
        if r == nrows {
            break;
        }
        let (best, mag) = (r..nrows)
            .map(|i| (i, rows[i][col].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= pivot_tol {
            continue;
        }
        rows.swap(r, best);
        let p = rows[r][col];
        rows[r].iter_mut().for_each(|x| *x /= p);
        rows[r][col] = 1.0;
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
                row[col] = 0.0;
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

/// The 30×50 matrix `B'` over `[m'; m]`.
#[derive(Debug, Clone)]
pub struct ExpandedSystem {
    /// Rounded coefficients.
    pub rows: Vec<[f64; EXPANDED_COLS]>,
    /// Rounding remainders: the exact coefficients are `rows + rows_lo`.
    pub rows_lo: Vec<[f64; EXPANDED_COLS]>,
    pub order: MonomialOrder50,
}

impl ExpandedSystem {
    /// `B' · vec` for a vector over the 50 basis monomials.
    pub fn apply(&self, vec: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(vec).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

const PURE_QUARTICS: [Monomial; 5] = [(4, 0, 0), (3, 1, 0), (2, 2, 0), (1, 3, 0), (0, 4, 0)];

/// Rank of `B` (10×35) by Gauss–Jordan with partial pivoting.
pub fn coefficient_rank(f: &[Poly3; 10], tol: &Tolerances) -> usize {
    let m = graded_monomials(4);
    let mut b: Vec<Vec<f64>> = f
        .iter()
        .map(|p| {
            let mut row: Vec<f64> = m.iter().map(|&mono| p.coeff(mono)).collect();
            normalize_row(&mut row);
            row
        })
        .collect();
    let order: Vec<usize> = (0..m.len()).collect();
    gauss_jordan(&mut b, &order, tol.elimination_pivot).len()
}

/// Builds `B'`: the ten `f_i`, then `u·f_i` and `v·f_i` for the first five
/// quartics (all from triples containing the first point, hence free of pure
/// `(u, v)` quartic terms), then `w·f_i` for all ten.
pub fn build_expanded_matrix(f: &[Poly3; 10], tol: &Tolerances) -> Result<ExpandedSystem> {
    expanded_dd(&f.map(|p| DdPoly3::from_poly(&p)), tol)
}

fn expanded_dd(f: &[DdPoly3; 10], tol: &Tolerances) -> Result<ExpandedSystem> {
    let rank = coefficient_rank(&f.map(|p| p.hi()), tol);
    if rank < 10 {
        return Err(Error::RankDeficientB(rank));
    }
    // the first six triples share row 0 of S̄, which is linear in (u, v) at w = 0
    debug_assert!(row_triples()[..6].iter().all(|t| t[0] == 0));
    let mut f = *f;
    for (k, p) in f.iter_mut().enumerate().take(5) {
        let scale = p.hi().max_abs();
        for q in PURE_QUARTICS {
            if p.coeff(q).hi.abs() > tol.exact_division * scale {
                return Err(Error::UnexpectedPivotPattern { row: k });
            }
            p.set_coeff(q, Dd::ZERO);
        }
    }
    let f = &f;

    let basis = MonomialOrder50::new();
    let mut rows = Vec::with_capacity(EXPANDED_ROWS);
    let mut rows_lo = Vec::with_capacity(EXPANDED_ROWS);
    let mut push = |p: &DdPoly3| -> Result<()> {
        let mut row = [0.0; EXPANDED_COLS];
        let mut lo = [0.0; EXPANDED_COLS];
        for (mono, c) in p.terms() {
            let idx = basis.index_of(mono).ok_or(Error::UnexpectedPivotPattern { row: rows.len() })?;
            row[idx] = c.hi;
            lo[idx] = c.lo;
        }
        rows.push(row);
        rows_lo.push(lo);
        Ok(())
    };
    for p in f {
        push(p)?;
    }
    for shift in [(1, 0, 0), (0, 1, 0)] {
        for p in &f[..5] {
            push(&p.shift(shift)?)?;
        }
    }
    for p in f {
        push(&p.shift((0, 0, 1))?)?;
    }
    Ok(ExpandedSystem { rows, rows_lo, order: basis })
}

/// 4×4 matrix of polynomials in `w` acting on `[uv, u, v, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrixC {
    pub entries: [[Poly1; 4]; 4],
}

impl PolyMatrixC {
    /// Column degree caps.
    pub const DEGREE_CAPS: [usize; 4] = [4, 5, 5, 6];

    pub fn eval(&self, w: f64) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.entries[i][j].eval(w))
    }

    pub fn eval_derivative(&self, w: f64) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.entries[i][j].derivative().eval(w))
    }

    pub fn respects_degree_caps(&self) -> bool {
        self.entries.iter().all(|row| {
            row.iter()
                .zip(Self::DEGREE_CAPS)
                .all(|(p, cap)| p.degree().is_none_or(|d| d <= cap))
        })
    }
}

/// The six `g` rows read off the eliminated `B'`: coefficients over the
/// trailing 20 monomials, rounded after a double-double elimination.
pub fn reduce_expanded(sys: &ExpandedSystem, tol: &Tolerances) -> Result<Vec<[f64; 20]>> {
    Ok(reduce_dd(sys, tol)?.iter().map(|row| row.map(|d| d.hi)).collect())
}

fn reduce_dd(sys: &ExpandedSystem, tol: &Tolerances) -> Result<Vec<[Dd; 20]>> {
    let order = sys.order.elimination_order();
    let mut m: Vec<Vec<Dd>> = sys
        .rows
        .iter()
        .zip(&sys.rows_lo)
        .map(|(hi, lo)| {
            let scale = Dd::from_f64(hi.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            order
                .iter()
                .map(|&c| {
                    let x = Dd::two_sum(hi[c], lo[c]);
                    if scale.hi > 0.0 { x.div(scale) } else { x }
                })
                .collect()
        })
        .collect();
    let n = EXPANDED_ROWS;
    // forward elimination over the first 30 columns; only the bottom six
    // rows need a full reduction
    for k in 0..n {
        let (best, mag) = (k..n)
            .map(|i| (i, m[i][k].hi.abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= tol.elimination_pivot {
            return Err(Error::UnexpectedPivotPattern { row: k });
        }
        m.swap(k, best);
        let p = m[k][k];
        m[k].iter_mut().for_each(|x| *x = x.div(p));
        m[k][k] = Dd::ONE;
        let pivot_row = m[k].clone();
        let upper = if k >= LEADING_COLS { LEADING_COLS } else { k + 1 };
        for (i, row) in m.iter_mut().enumerate().skip(upper) {
            if i == k {
                continue;
            }
            let f = row[k];
            if f.hi != 0.0 {
                row.iter_mut().zip(&pivot_row).skip(k).for_each(|(x, y)| *x = x.sub(f.mul(*y)));
                row[k] = Dd::ZERO;
            }
        }
    }
    Ok(m[LEADING_COLS..n]
        .iter()
        .map(|row| std::array::from_fn(|j| row[n + j]))
        .collect())
}

type DdEntries = [[Vec<Dd>; 4]; 4];

fn assemble_dd(g: &[[Dd; 20]]) -> DdEntries {
    // block (offset, length) in the trailing 20 columns, powers descending
    const BLOCKS: [(usize, usize); 4] = [(0, 4), (4, 5), (9, 5), (14, 6)];
    let pairs = [(0, 1), (1, 2), (3, 4), (4, 5)];
    std::array::from_fn(|r| {
        let (a, b) = pairs[r];
        std::array::from_fn(|col| {
            let (off, len) = BLOCKS[col];
            let mut out = vec![Dd::ZERO; len + 1];
            for k in 0..len {
                out[k] = out[k].add(g[a][off + len - 1 - k]);
                out[k + 1] = out[k + 1].sub(g[b][off + len - 1 - k]);
            }
            out
        })
    })
}

fn round_entries(e: &DdEntries) -> PolyMatrixC {
    PolyMatrixC {
        entries: e.each_ref().map(|row| row.each_ref().map(|p| Poly1::new(p.iter().map(|d| d.hi).collect()))),
    }
}

/// Assembles `C(w)` from `h = [g1, g2, g4, g5] - w·[g2, g3, g5, g6]`.
pub fn assemble_c(g: &[[f64; 20]]) -> PolyMatrixC {
    let g: Vec<[Dd; 20]> = g.iter().map(|row| row.map(Dd::from_f64)).collect();
    round_entries(&assemble_dd(&g))
}

pub fn reduce_and_extract_c(sys: &ExpandedSystem, tol: &Tolerances) -> Result<PolyMatrixC> {
    Ok(round_entries(&assemble_dd(&reduce_dd(sys, tol)?)))
}

/// All 24 permutations of `0..4` with their signs.
fn permutations4() -> Vec<([usize; 4], bool)> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in (0..4).filter(|&b| b != a) {
            for c in (0..4).filter(|&c| c != a && c != b) {
                let d = 6 - a - b - c;
                let p = [a, b, c, d];
                let inversions = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
                out.push((p, inversions % 2 == 1));
            }
        }
    }
    out
}

/// `det C(w)` by the Leibniz expansion with polynomial products. Products and
/// sums are carried in double-double so that cancellation between the 24
/// terms does not eat the small coefficients.
pub fn determinant_c(c: &PolyMatrixC) -> Poly1 {
    let entries = c.entries.each_ref().map(|row| row.each_ref().map(|p| p.coeffs().iter().map(|&x| Dd::from_f64(x)).collect()));
    determinant_dd(&entries)
}

fn determinant_dd(c: &DdEntries) -> Poly1 {
    let mut acc = [Dd::ZERO; 21];
    for (perm, odd) in permutations4() {
        let mut prod = vec![Dd::ONE];
        for (row, &col) in perm.iter().enumerate() {
            let entry = &c[row][col];
            if entry.is_empty() {
                prod.clear();
                break;
            }
            let mut next = vec![Dd::ZERO; prod.len() + entry.len() - 1];
            for (i, p) in prod.iter().enumerate() {
                for (j, e) in entry.iter().enumerate() {
                    next[i + j] = next[i + j].add(p.mul(*e));
                }
            }
            prod = next;
        }
        for (k, p) in prod.into_iter().enumerate() {
            if k > 20 {
                debug_assert!(p.hi == 0.0);
                continue;
            }
            acc[k] = acc[k].add(if odd { p.neg() } else { p });
        }
    }
    Poly1::new(acc.iter().map(|d| d.hi).collect())
}

/// `max_k |c_(10-k) - (-1)^k c_(10+k)| / max|c|` for a degree-20 polynomial.
pub fn symmetry_deviation(w: &Poly1) -> f64 {
    let scale = w.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    (1..=10)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            (w.coeff(10 - k) - s * w.coeff(10 + k)).abs()
        })
        .fold(0.0, f64::max)
        / scale
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Folds `W(w) = sum p_k [w^(10+k) + (-w)^(10-k)]` into `W̃` with
/// `W(w) = w^10 W̃(w - 1/w)`.
pub fn fold_symmetric(w: &Poly1, tol: &Tolerances) -> Result<Poly1> {
    if w.degree().is_some_and(|d| d > 20) {
        return Err(Error::SymmetryViolation(f64::INFINITY));
    }
    let dev = symmetry_deviation(w);
    if dev > tol.symmetry {
        return Err(Error::SymmetryViolation(dev));
    }
    // average the mirrored halves; the middle coefficient carries 2 p_0
    let p: Vec<f64> = (0..=10)
        .map(|k| {
            if k == 0 {
                w.coeff(10) / 2.0
            } else {
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                (w.coeff(10 + k) + s * w.coeff(10 - k)) / 2.0
            }
        })
        .collect();
    let folded = (0..=10)
        .map(|k| {
            (k..=10)
                .step_by(2)
                .map(|i| {
                    if k == 0 {
                        2.0 * p[i]
                    } else {
                        i as f64 / k as f64 * binomial((i + k) / 2 - 1, (i - k) / 2) * p[i]
                    }
                })
                .sum()
        })
        .collect();
    Ok(Poly1::new(folded))
}

/// Intermediate products of the reduction, kept for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct UnivariateSystem {
    pub sbar: PolyRows,
    /// The ten quartics `f_i`.
    pub f: [Poly3; 10],
    pub c: PolyMatrixC,
    /// `det C(w)`, scaled to unit max coefficient.
    pub w_poly: Poly1,
    /// Folded degree-10 polynomial in `w - 1/w`.
    pub wtilde: Poly1,
}

pub fn build_univariate_system(n: &NormalizedProblem, tol: &Tolerances) -> Result<UnivariateSystem> {
    let sbar = sbar_dd(n);
    let f = f_polynomials_dd(&sbar, tol).map_err(|e| e.at(Stage::Constraints))?;
    let expanded = expanded_dd(&f, tol).map_err(|e| e.at(Stage::Elimination))?;
    let entries = assemble_dd(&reduce_dd(&expanded, tol).map_err(|e| e.at(Stage::Elimination))?);
    let c = round_entries(&entries);
    let w_poly = determinant_dd(&entries).normalized();
    if w_poly.is_zero() {
        return Err(Error::DegenerateZeroPolynomial.at(Stage::Determinant));
    }
    let wtilde = fold_symmetric(&w_poly, tol).map_err(|e| e.at(Stage::Fold))?;
    Ok(UnivariateSystem {
        sbar: sbar.map(|row| row.map(|p| p.hi())),
        f: f.map(|p| p.hi()),
        c,
        w_poly,
        wtilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::geometry::{cayley_to_rotation, rotation_to_cayley, CayleyVector, Correspondence, Rotation3, UnitTranslation};
    use crate::normalization::{normalize_observations, normalize_pose, observation_matrices};
    use crate::RelativePose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Scene {
        problem: NormalizedProblem,
        /// ground truth in the normalized frame
        truth: CayleyVector,
        t: Vec3,
    }

    fn random_unit(rng: &mut impl Rng) -> Vec3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 0.1 {
                return v.normalize();
            }
        }
    }

    fn scene(rng: &mut impl Rng) -> Scene {
        loop {
            let r = Rotation3::from_axis_angle(&random_unit(rng), rng.random_range(0.0..0.5));
            let t = UnitTranslation::new_normalize(random_unit(rng)).unwrap();
            let corrs: [Correspondence; 5] = std::array::from_fn(|_| {
                let x1 = Vec3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(2.0..4.0),
                );
                Correspondence::new(x1, r.matrix() * x1 + t.vector()).unwrap()
            });
            let (a1, a2) = observation_matrices(&corrs);
            let problem = normalize_observations(&a1, &a2, &Tolerances::STANDARD).unwrap();
            let np = normalize_pose(&RelativePose::new(r, t), &problem);
            if let Ok(truth) = rotation_to_cayley(&np.rotation) {
                if truth.as_vec3().norm() < 20.0 {
                    return Scene { problem, truth, t: *np.translation.vector() };
                }
            }
        }
    }

    #[test]
    fn monomial_order_layout() {
        let o = MonomialOrder50::new();
        assert_eq!(o.monomials().len(), 50);
        assert_eq!(
            o.monomials()[..15],
            [
                (4, 0, 1), (3, 1, 1), (3, 0, 2), (2, 2, 1), (2, 1, 2), (2, 0, 3), (1, 3, 1),
                (1, 2, 2), (1, 1, 3), (1, 0, 4), (0, 4, 1), (0, 3, 2), (0, 2, 3), (0, 1, 4),
                (0, 0, 5)
            ]
        );
        let order = o.elimination_order();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_eq!(o.tail().len(), 26);
        assert_eq!(o.tail()[6..10], [(1, 1, 3), (1, 1, 2), (1, 1, 1), (1, 1, 0)]);
    }

    #[test]
    fn sbar_matches_numeric_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sc = scene(&mut rng);
        let sbar = build_sbar(&sc.problem);
        for (i, row) in sbar.iter().enumerate() {
            let (q1, q2) = (sc.problem.bearing1(i), sc.problem.bearing2(i));
            let expected = q1.transpose() * crate::geometry::skew(&q2);
            for j in 0..3 {
                assert!((row[j].eval(0.0, 0.0, 0.0) - expected[j]).abs() < 1e-15);
                assert!(row[j].degree() <= 2);
            }
        }
        for _ in 0..20 {
            let a = CayleyVector::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let s = numeric_s(&sc.problem, cayley_to_rotation(&a).matrix());
            let sb = eval_rows(&sbar, a.u, a.v, a.w) / a.delta();
            assert!((s - sb).amax() < 1e-11);
        }
        let sb = eval_rows(&sbar, sc.truth.u, sc.truth.v, sc.truth.w);
        assert!((sb * sc.t).amax() < 1e-10 * sc.truth.delta());
    }

    #[test]
    fn f_polynomials_vanish_at_truth_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tol = Tolerances::STANDARD;
        for _ in 0..20 {
            let sc = scene(&mut rng);
            let f = build_f_polynomials(&build_sbar(&sc.problem), &tol).unwrap();
            let a = sc.truth;
            for p in &f {
                assert!(p.degree() <= 4);
                let scale = p.max_abs() * a.delta().powi(2);
                assert!(p.eval(a.u, a.v, a.w).abs() <= 1e-10 * scale);
            }
            let off = f
                .iter()
                .map(|p| p.eval(a.u + 0.3, a.v - 0.2, a.w + 0.1).abs() / p.max_abs())
                .fold(0.0, f64::max);
            assert!(off > 1e-4);
        }
    }

    #[test]
    fn numeric_minors_factor_through_delta_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tol = Tolerances::STANDARD;
        let sc = scene(&mut rng);
        let f = build_f_polynomials(&build_sbar(&sc.problem), &tol).unwrap();
        for _ in 0..50 {
            let a = CayleyVector::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let s = numeric_s(&sc.problem, cayley_to_rotation(&a).matrix());
            for (p, [i, j, k]) in f.iter().zip(row_triples()) {
                let minor = Matrix3::from_rows(&[s.row(i), s.row(j), s.row(k)]).determinant();
                let expected = p.eval(a.u, a.v, a.w) / a.delta().powi(2);
                let scale = p.max_abs() / a.delta().powi(2) * (1.0 + a.as_vec3().norm()).powi(4);
                assert!((minor - expected).abs() <= 1e-9 * scale, "{minor} {expected}");
            }
        }
    }

    #[test]
    fn expanded_rows_vanish_at_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let tol = Tolerances::STANDARD;
        for _ in 0..20 {
            let sc = scene(&mut rng);
            let f = build_f_polynomials(&build_sbar(&sc.problem), &tol).unwrap();
            let sys = build_expanded_matrix(&f, &tol).unwrap();
            assert_eq!(sys.rows.len(), 30);
            let a = sc.truth;
            let vec = sys.order.evaluate(a.u, a.v, a.w);
            let vnorm = vec.iter().map(|x| x * x).sum::<f64>().sqrt();
            let res = sys.apply(&vec).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(res <= 1e-9 * sys.frobenius_norm() * vnorm);
        }
    }

    #[test]
    fn c_matrix_annihilates_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tol = Tolerances::STANDARD;
        for _ in 0..20 {
            let sc = scene(&mut rng);
            let f = build_f_polynomials(&build_sbar(&sc.problem), &tol).unwrap();
            let sys = build_expanded_matrix(&f, &tol).unwrap();
            let c = reduce_and_extract_c(&sys, &tol).unwrap();
            assert!(c.respects_degree_caps());
            let a = sc.truth;
            let x = nalgebra::Vector4::new(a.u * a.v, a.u, a.v, 1.0);
            let cw = c.eval(a.w);
            assert!((cw * x).amax() <= 1e-8 * cw.amax() * x.amax());
        }
    }

    #[test]
    fn pure_quartic_block_has_rank_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let tol = Tolerances::STANDARD;
        for _ in 0..20 {
            let sc = scene(&mut rng);
            let f = build_f_polynomials(&build_sbar(&sc.problem), &tol).unwrap();
            assert_eq!(coefficient_rank(&f, &tol), 10);
            let pure = [(4, 0, 0), (3, 1, 0), (2, 2, 0), (1, 3, 0), (0, 4, 0)];
            for p in &f[..6] {
                assert!(pure.iter().all(|&m| p.coeff(m).abs() <= 1e-12 * p.max_abs()));
            }
            let block = nalgebra::DMatrix::from_fn(10, 5, |i, j| f[i].coeff(pure[j]) / f[i].max_abs());
            let sv = block.singular_values();
            let (big, small) = (sv.max(), sv.min());
            assert!(small <= 1e-12 * big, "{sv}");
            assert!(sv.iter().filter(|s| **s > 1e-8 * big).count() == 4);
        }
    }

    #[test]
    fn determinant_survives_cancellation() {
        // rows nearly dependent: the det is tiny next to the Leibniz terms
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let base: [[f64; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        let eps = 1e-9;
        let entries = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let row = if i == 3 { 0 } else { i };
                let k = if i == 3 { eps } else { 0.0 };
                // constant term copies row 0 into row 3, perturbed by eps·w-free noise
                Poly1::new(vec![base[row][j] * 1e6 + k * base[3][j], base[i][j]])
            })
        });
        let c = PolyMatrixC { entries };
        let det = determinant_c(&c);
        for w in [-0.5, 0.0, 0.25, 1.0] {
            let numeric = c.eval(w).lu().determinant();
            let scale = c.eval(w).abs().row_iter().map(|r| r.sum()).product::<f64>();
            assert!((det.eval(w) - numeric).abs() <= 1e-12 * scale + 1e-6 * numeric.abs(), "{w}");
        }
    }

    #[test]
    fn determinant_of_diagonal() {
        let e = Poly1::zero();
        let mut entries: [[Poly1; 4]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| e.clone()));
        for (k, d) in [4, 5, 5, 6].into_iter().enumerate() {
            entries[k][k] = Poly1::monomial(d, 1.0);
        }
        let det = determinant_c(&PolyMatrixC { entries });
        assert_eq!(det.degree(), Some(20));
        assert_eq!(det.coeff(20), 1.0);
        assert_eq!(det.max_abs(), 1.0);
    }

    #[test]
    fn determinant_matches_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let entries = std::array::from_fn(|_| {
            std::array::from_fn(|j| {
                Poly1::new((0..=PolyMatrixC::DEGREE_CAPS[j]).map(|_| rng.random_range(-1.0..1.0)).collect())
            })
        });
        let c = PolyMatrixC { entries };
        let det = determinant_c(&c);
        for _ in 0..25 {
            let w: f64 = rng.random_range(-2.0..2.0);
            let numeric = c.eval(w).determinant();
            let scale = c.eval(w.abs()).abs().determinant().abs().max(numeric.abs()).max(1e-3);
            assert!((det.eval(w) - numeric).abs() <= 1e-8 * scale.max(numeric.abs()));
        }
    }

    #[test]
    fn real_problem_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let sc = scene(&mut rng);
            let sys = build_univariate_system(&sc.problem, &Tolerances::STANDARD).unwrap();
            let dev = symmetry_deviation(&sys.w_poly);
            assert!(dev <= 1e-9, "{dev:e}");
            let w0 = sc.truth.w;
            assert!(sys.w_poly.eval(w0).abs() <= 1e-7 * sys.w_poly.eval_abs(w0).max(1.0));
        }
    }

    #[test]
    fn fold_examples() {
        let tol = Tolerances::STANDARD;
        let mut c = vec![0.0; 21];
        c[11] = 1.0;
        c[9] = -1.0;
        let f = fold_symmetric(&Poly1::new(c), &tol).unwrap();
        assert_eq!(f.trimmed(0.0).coeffs(), &[0.0, 1.0]);
        let mut c = vec![0.0; 21];
        c[12] = 1.0;
        c[10] = -2.0;
        c[8] = 1.0;
        let f = fold_symmetric(&Poly1::new(c), &tol).unwrap();
        assert_eq!(f.trimmed(0.0).coeffs(), &[0.0, 0.0, 1.0]);
        let mut c = vec![0.0; 21];
        c[12] = 1.0;
        assert!(matches!(fold_symmetric(&Poly1::new(c), &tol), Err(Error::SymmetryViolation(_))));
    }

    /// `w^10 W̃(w - 1/w)` expanded term by term with the binomial theorem.
    fn unfold_by_expansion(pt: &[f64]) -> Poly1 {
        let mut out = vec![0.0; 21];
        for (k, c) in pt.iter().enumerate() {
            // w^(10-k) (w^2 - 1)^k
            for i in 0..=k {
                let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
                out[10 - k + 2 * i] += c * binomial(k, i) * sign;
            }
        }
        Poly1::new(out)
    }

    #[test]
    fn fold_inverts_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let pt: Vec<f64> = (0..=10).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = unfold_by_expansion(&pt);
            assert!(symmetry_deviation(&w) < 1e-15);
            let f = fold_symmetric(&w, &Tolerances::STANDARD).unwrap();
            for (a, b) in f.coeffs().iter().zip(&pt) {
                assert!((a - b).abs() < 1e-10);
            }
            for _ in 0..100 {
                let mag: f64 = rng.random_range(0.2..5.0);
                let x = if rng.random_bool(0.5) { mag } else { -mag };
                let lhs = w.eval(x);
                let rhs = x.powi(10) * f.eval(x - 1.0 / x);
                assert!((lhs - rhs).abs() <= 1e-8 * w.eval_abs(x).max(lhs.abs()));
            }
        }
    }
}
