//! Structure recovery from the real roots of `W̃` and the end-to-end solver.

use nalgebra::{Matrix4, Matrix5x3, SMatrix, SVector};

use crate::error::{Error, Result, Stage};
use crate::geometry::{
    cayley_to_rotation, epipolar_residual, essential_from_pose, rotation_to_cayley,
    twisted_cayley, twisted_rotation, CayleyVector, Correspondence, RelativePose, Rotation3,
    UnitTranslation, Vec3,
};
use crate::normalization::{denormalize_pose, normalize_observations, observation_matrices, NormalizedProblem};
use crate::poly::Poly3;
use crate::polysystem::{build_univariate_system, numeric_s, PolyMatrixC, UnivariateSystem};
use crate::roots::{near_double_roots, real_roots, unfold_root};
use crate::tolerance::Tolerances;

/// The polynomial system has ten solutions counted with multiplicity.
pub const MAX_CANDIDATES: usize = 10;

/// Candidates whose rotations and translations agree this closely are merged.
const DUPLICATE_POSE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tolerances: Tolerances,
    /// Candidates with `|(uv) - u·v| / (1 + |u·v|)` above this are dropped.
    pub consistency_tol: f64,
    /// Keep candidates that fail the consistency check.
    pub keep_all: bool,
    /// Resolve the fourfold ambiguity by majority over all five points
    /// instead of the first point alone.
    pub vote_all_points: bool,
    /// Only roots `w̃` inside this closed interval are recovered.
    pub wtilde_range: Option<(f64, f64)>,
    /// Gauss–Newton polish of `(u, v, w)` on the ten quartics before the
    /// rotation is formed.
    pub polish: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::STANDARD,
            consistency_tol: 1e-3,
            keep_all: false,
            vote_all_points: false,
            wtilde_range: None,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionCandidate {
    /// Pose in the frames of the input bearings.
    pub pose: RelativePose,
    /// Pose in the normalized frames.
    pub normalized_pose: RelativePose,
    /// Cayley parameters of the normalized rotation of `normalized_pose`.
    pub cayley: CayleyVector,
    /// Root `w0` of `W` the candidate was recovered from, after refinement.
    /// Either member of the pair `w0`, `-1/w0`.
    pub root_w: f64,
    pub root_wtilde: f64,
    pub consistency: f64,
    /// `max |q2ᵀ E q1|` over the input correspondences.
    pub max_epipolar_residual: f64,
    /// Points triangulated in front of both cameras.
    pub cheirality_votes: u8,
    pub possibly_multiple_root: bool,
}

/// Per-solve bookkeeping returned alongside the candidates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Degree of `W̃` after trimming negligible leading coefficients.
    pub wtilde_degree: usize,
    pub real_roots: usize,
    /// Double roots found at critical points of `W̃` that isolation missed.
    pub double_roots: usize,
    pub filtered_roots: usize,
    pub failed_roots: usize,
    /// Candidates failing the consistency check, or from a possibly
    /// multiple root without an exact fit.
    pub inconsistent: usize,
    /// Repeated poses, and candidates beyond [`MAX_CANDIDATES`].
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub candidates: Vec<SolutionCandidate>,
    pub diagnostics: Diagnostics,
}

/// Null vector `[uv, u, v, 1]` of the numeric `C(w0)`.
///
/// Returns `(u, v, consistency)` where consistency is the relative mismatch
/// between the first entry and `u·v`.
pub fn solve_uv(c: &PolyMatrixC, w0: f64, tol: &Tolerances) -> Result<(f64, f64, f64)> {
    let (mut m, scale) = column_scaled(c, w0);
    // Gaussian elimination with partial pivoting; the last pivot measures
    // how far C(w0) is from singular
    let mut pivots = [0.0f64; 4];
    for k in 0..4 {
        let (best, _) = (k..4)
            .map(|i| (i, m[(i, k)].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        m.swap_rows(k, best);
        pivots[k] = m[(k, k)];
        if pivots[k] == 0.0 {
            continue;
        }
        for i in k + 1..4 {
            let f = m[(i, k)] / pivots[k];
            for j in k..4 {
                m[(i, j)] -= f * m[(k, j)];
            }
        }
    }
    let largest = pivots.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    let smallest = pivots.iter().fold(f64::INFINITY, |a, p| a.min(p.abs()));
    let ratio = smallest / largest;
    if !(ratio <= tol.full_rank_c) {
        return Err(Error::FullRankC { w: w0, ratio });
    }
    let mut y = [0.0, 0.0, 0.0, 1.0];
    for k in (0..3).rev() {
        let s: f64 = (k + 1..4).map(|j| m[(k, j)] * y[j]).sum();
        y[k] = -s / m[(k, k)];
    }
    let n: Vec<f64> = y.iter().zip(scale).map(|(a, s)| a * s).collect();
    let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(n[3].abs() >= tol.rescale_floor * norm) {
        return Err(Error::RescaleFailure(n[3] / norm));
    }
    let (uv, u, v) = (n[0] / n[3], n[1] / n[3], n[2] / n[3]);
    let consistency = (uv - u * v).abs() / (1.0 + (u * v).abs());
    Ok((u, v, consistency))
}

/// `C(w0)` with unit max-abs columns, and the column factors.
fn column_scaled(c: &PolyMatrixC, w0: f64) -> (Matrix4<f64>, [f64; 4]) {
    let mut m: Matrix4<f64> = c.eval(w0);
    let mut scale = [1.0; 4];
    for (j, s) in scale.iter_mut().enumerate() {
        let cmax = m.column(j).amax();
        if cmax > 0.0 {
            *s = 1.0 / cmax;
            m.column_mut(j).scale_mut(*s);
        }
    }
    (m, scale)
}

/// Null vectors `[uv, u, v, 1]` of a `C(w0)` with a two-dimensional null
/// space, as `(u, v, consistency)`.
///
/// Returns `None` unless `C(w0)` is rank two. Inside the null space the
/// vectors with `x0·x3 = x1·x2` solve a quadratic; a complex or double pair
/// yields the single vector closest to it.
pub fn solve_uv_rank_two(c: &PolyMatrixC, w0: f64, tol: &Tolerances) -> Option<Vec<(f64, f64, f64)>> {
    let (m, scale) = column_scaled(c, w0);
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let sv = svd.singular_values;
    let mut order = [0, 1, 2, 3];
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    if !(sv[order[1]] <= tol.rank_two_c * sv[order[3]]) {
        return None;
    }
    let basis = |k: usize| -> [f64; 4] { std::array::from_fn(|j| v_t[(order[k], j)] * scale[j]) };
    let (n1, n2) = (basis(0), basis(1));
    // q(θ) for x = cos θ n1 + sin θ n2 is A + B cos 2θ + C sin 2θ
    let q = |x: &[f64; 4], y: &[f64; 4]| x[0] * y[3] - x[1] * y[2];
    let (qa, qc) = (q(&n1, &n1), q(&n2, &n2));
    let qb = q(&n1, &n2) + q(&n2, &n1);
    let (a, b, cc) = (0.5 * (qa + qc), 0.5 * (qa - qc), 0.5 * qb);
    let r = b.hypot(cc);
    let phi = cc.atan2(b);
    let angles = if r - a.abs() > tol.rank_two_c * r {
        let d = (-a / r).acos();
        vec![0.5 * (phi + d), 0.5 * (phi - d)]
    } else if a > 0.0 {
        vec![0.5 * (phi + std::f64::consts::PI)]
    } else {
        vec![0.5 * phi]
    };
    Some(
        angles
            .into_iter()
            .filter_map(|t| {
                let x: [f64; 4] = std::array::from_fn(|j| t.cos() * n1[j] + t.sin() * n2[j]);
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(x[3].abs() >= tol.rescale_floor * norm) {
                    return None;
                }
                let (uv, u, v) = (x[0] / x[3], x[1] / x[3], x[2] / x[3]);
                Some((u, v, (uv - u * v).abs() / (1.0 + (u * v).abs())))
            })
            .collect(),
    )
}

/// Newton iteration on `det C(w)` with `det' / det = tr(C⁻¹ C')`. Falls back
/// to the starting point if the iterate wanders more than 1% away.
pub fn refine_root(c: &PolyMatrixC, w0: f64) -> f64 {
    let mut w = w0;
    for _ in 0..12 {
        let Some(x) = c.eval(w).lu().solve(&c.eval_derivative(w)) else {
            break;
        };
        let step = 1.0 / x.trace();
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    if w.is_finite() && (w - w0).abs() <= 1e-2 * w0.abs() {
        w
    } else {
        w0
    }
}

/// `f_i(a) / Δ²` scaled by the largest coefficient of `f_i`, with its Jacobian.
fn scaled_quartics(f: &[Poly3; 10], a: &CayleyVector) -> (SVector<f64, 10>, SMatrix<f64, 10, 3>) {
    let d = a.delta();
    let mut r = SVector::<f64, 10>::zeros();
    let mut j = SMatrix::<f64, 10, 3>::zeros();
    for (i, p) in f.iter().enumerate() {
        let s = p.max_abs();
        let s = if s > 0.0 { 1.0 / s } else { 1.0 };
        let val = p.eval(a.u, a.v, a.w);
        let g = p.gradient(a.u, a.v, a.w);
        r[i] = s * val / (d * d);
        for (k, x) in [a.u, a.v, a.w].into_iter().enumerate() {
            j[(i, k)] = s * (g[k] / (d * d) - 4.0 * val * x / (d * d * d));
        }
    }
    (r, j)
}

/// Gauss–Newton on the ten quartics; keeps a step only if it lowers the
/// residual.
pub fn polish_cayley(f: &[Poly3; 10], a: CayleyVector) -> CayleyVector {
    let mut a = a;
    let (mut r, mut j) = scaled_quartics(f, &a);
    for _ in 0..6 {
        let Ok(step) = j.svd(true, true).solve(&r, 1e-300) else {
            break;
        };
        let next = CayleyVector::from_vec3(&(a.as_vec3() - step));
        let (rn, jn) = scaled_quartics(f, &next);
        if !(rn.norm() < r.norm()) {
            break;
        }
        let small = step.norm() <= 4.0 * f64::EPSILON * (1.0 + a.as_vec3().norm());
        (a, r, j) = (next, rn, jn);
        if small {
            break;
        }
    }
    a
}

/// Unit right null vector of a rank-2 `S`, by elimination with full pivoting.
/// The first component above the sign threshold is made positive.
pub fn solve_translation(s: &Matrix5x3<f64>, tol: &Tolerances) -> Result<UnitTranslation> {
    let mut m = *s;
    let mut cols = [0usize, 1, 2];
    let mut pivots = [0.0f64; 2];
    for k in 0..2 {
        let mut best = (k, k, -1.0);
        for i in k..5 {
            for j in k..3 {
                let a = m[(i, cols[j])].abs();
                if a > best.2 {
                    best = (i, j, a);
                }
            }
        }
        m.swap_rows(k, best.0);
        cols.swap(k, best.1);
        pivots[k] = m[(k, cols[k])];
        if k == 0 && !(pivots[0].abs() > 0.0) {
            return Err(Error::RankBelow2);
        }
        for i in k + 1..5 {
            let f = m[(i, cols[k])] / pivots[k];
            for j in k..3 {
                m[(i, cols[j])] -= f * m[(k, cols[j])];
            }
        }
    }
    if !(pivots[1].abs() > tol.translation_rank * pivots[0].abs()) {
        return Err(Error::RankBelow2);
    }
    let mut t = Vec3::zeros();
    t[cols[2]] = 1.0;
    t[cols[1]] = -m[(1, cols[2])] / pivots[1];
    t[cols[0]] = -(m[(0, cols[1])] * t[cols[1]] + m[(0, cols[2])]) / pivots[0];
    let mut t = t.normalize();
    if let Some(first) = t.iter().find(|x| x.abs() > tol.translation_sign) {
        if *first < 0.0 {
            t = -t;
        }
    }
    Ok(UnitTranslation::new_unchecked(t))
}

/// First-point depths `(c1·s1, c2·s2)` in the two normalized cameras, where
/// `s_j` is the orientation of the first bearing along `z`.
fn first_point_depths(r: &Rotation3, t: &UnitTranslation, orient: (f64, f64)) -> (f64, f64) {
    let (r, t) = (r.matrix(), t.vector());
    let c1 = if r[(0, 2)].abs() >= r[(1, 2)].abs() {
        -t.x / r[(0, 2)]
    } else {
        -t.y / r[(1, 2)]
    };
    let c2 = c1 * r[(2, 2)] + t.z;
    (c1 * orient.0, c2 * orient.1)
}

/// Least-squares depths `(l1, l2)` with `l1 R b1 + t ≈ l2 b2`.
fn triangulate_depths(r: &Rotation3, t: &UnitTranslation, b1: &Vec3, b2: &Vec3) -> (f64, f64) {
    let a = r.matrix() * b1;
    let t = t.vector();
    let (aa, ab, bb) = (a.dot(&a), a.dot(b2), b2.dot(b2));
    let (at, bt) = (a.dot(t), b2.dot(t));
    let det = aa * bb - ab * ab;
    if det.abs() < 1e-300 {
        return (f64::NAN, f64::NAN);
    }
    // [aa -ab; -ab bb] [l1; l2] = [-at; bt]
    let l1 = (-at * bb + ab * bt) / det;
    let l2 = (aa * bt - ab * at) / det;
    (l1, l2)
}

/// Points of the normalized problem triangulated in front of both cameras.
pub fn cheirality_votes(pose: &RelativePose, obs: &NormalizedProblem) -> u8 {
    (0..5)
        .filter(|&i| {
            let (l1, l2) = triangulate_depths(&pose.rotation, &pose.translation, &obs.bearing1(i), &obs.bearing2(i));
            l1 > 0.0 && l2 > 0.0
        })
        .count() as u8
}

/// Picks the physically valid pose among `[R|t]`, `[R|-t]`, `[R'|t]`,
/// `[R'|-t]` with `R' = -H_t R`, from the sign of the first point's depth
/// in both cameras.
pub fn select_candidate(r: &Rotation3, t: &UnitTranslation, obs: &NormalizedProblem) -> RelativePose {
    let orient = obs.first_point_orientation();
    let (c1, c2) = first_point_depths(r, t, orient);
    if c1 > 0.0 && c2 > 0.0 {
        return RelativePose::new(*r, *t);
    }
    if c1 < 0.0 && c2 < 0.0 {
        return RelativePose::new(*r, -*t);
    }
    let rt = twisted_rotation(r, t);
    let (c1, c2) = first_point_depths(&rt, t, orient);
    if c1 > 0.0 && c2 > 0.0 {
        RelativePose::new(rt, *t)
    } else {
        RelativePose::new(rt, -*t)
    }
}

/// Majority variant of [`select_candidate`]: the candidate with the most
/// points in front of both cameras, ties going to the first-point rule.
pub fn select_candidate_by_vote(r: &Rotation3, t: &UnitTranslation, obs: &NormalizedProblem) -> RelativePose {
    let preferred = select_candidate(r, t, obs);
    let rt = twisted_rotation(r, t);
    let options = [
        preferred,
        RelativePose::new(*r, *t),
        RelativePose::new(*r, -*t),
        RelativePose::new(rt, *t),
        RelativePose::new(rt, -*t),
    ];
    let mut best = preferred;
    let mut best_votes = cheirality_votes(&preferred, obs);
    for p in &options[1..] {
        let v = cheirality_votes(p, obs);
        if v > best_votes {
            best = *p;
            best_votes = v;
        }
    }
    best
}

/// Admissible `w̃ = -2 cot(φ + ψ)` for an interval of the angle sum.
///
/// The interval must lie strictly between two consecutive multiples of `π`.
pub fn wtilde_interval_filter(lo: f64, hi: f64) -> Result<(f64, f64)> {
    let pi = std::f64::consts::PI;
    let k = (lo / pi).floor();
    let valid = lo.is_finite() && hi.is_finite() && lo <= hi && lo > k * pi && hi < (k + 1.0) * pi;
    if !valid {
        return Err(Error::InvalidInterval { lo, hi });
    }
    let f = |x: f64| -2.0 * x.cos() / x.sin();
    Ok((f(lo), f(hi)))
}

/// Solves the five-point problem. Returns up to ten candidates ordered by
/// their largest epipolar residual.
pub fn solve_relative_pose(corrs: &[Correspondence; 5], opts: &SolveOptions) -> Result<SolveOutput> {
    let tol = &opts.tolerances;
    let (a1, a2) = observation_matrices(corrs);
    let problem = normalize_observations(&a1, &a2, tol).map_err(|e| e.at(Stage::Normalization))?;
    let system = build_univariate_system(&problem, tol)?;

    let wtilde = system.wtilde.trimmed(tol.leading_trim);
    let mut diagnostics = Diagnostics {
        wtilde_degree: wtilde.degree().unwrap_or(0),
        ..Default::default()
    };
    let mut roots = if diagnostics.wtilde_degree == 0 {
        Vec::new()
    } else {
        real_roots(&wtilde, tol).map_err(|e| e.at(Stage::Roots))?
    };
    diagnostics.real_roots = roots.len();
    if diagnostics.wtilde_degree > 0 {
        let mut extra = near_double_roots(&wtilde, &roots, tol).map_err(|e| e.at(Stage::Roots))?;
        // a double root uses two of the degree's roots
        extra.truncate(diagnostics.wtilde_degree.saturating_sub(roots.len()) / 2);
        diagnostics.double_roots = extra.len();
        roots.extend(extra);
    }

    let mut candidates = Vec::with_capacity(roots.len());
    for root in roots {
        if let Some((lo, hi)) = opts.wtilde_range {
            let slack = tol.isolation_width * (1.0 + root.value.abs());
            if root.value < lo - slack || root.value > hi + slack {
                diagnostics.filtered_roots += 1;
                continue;
            }
        }
        match recover_candidate(&system, root.value, &problem, corrs, opts) {
            Ok(mut cand) => {
                cand.possibly_multiple_root = root.possibly_multiple;
                let spurious = root.possibly_multiple && !(cand.max_epipolar_residual <= tol.double_root_epipolar);
                if cand.consistency > opts.consistency_tol || spurious {
                    diagnostics.inconsistent += 1;
                    if !opts.keep_all {
                        continue;
                    }
                }
                candidates.push(cand);
            }
            Err(_) => diagnostics.failed_roots += 1,
        }
    }
    candidates.sort_by(|a, b| a.max_epipolar_residual.total_cmp(&b.max_epipolar_residual));
    let mut unique: Vec<SolutionCandidate> = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if unique.iter().any(|u| same_pose(&u.pose, &cand.pose)) {
            diagnostics.dropped += 1;
        } else {
            unique.push(cand);
        }
    }
    diagnostics.dropped += unique.len().saturating_sub(MAX_CANDIDATES);
    unique.truncate(MAX_CANDIDATES);
    let candidates = unique;
    Ok(SolveOutput {
        candidates,
        diagnostics,
    })
}

fn same_pose(a: &RelativePose, b: &RelativePose) -> bool {
    (a.rotation.transpose() * b.rotation).angle() <= DUPLICATE_POSE
        && (a.translation.vector() - b.translation.vector()).norm() <= DUPLICATE_POSE
}

fn recover_candidate(
    system: &UnivariateSystem,
    wtilde: f64,
    problem: &NormalizedProblem,
    corrs: &[Correspondence; 5],
    opts: &SolveOptions,
) -> Result<SolutionCandidate> {
    let tol = &opts.tolerances;
    // both members of the pair w0, -1/w0 are roots of det C; every null
    // vector found on either is a seed, and the seed that best satisfies the
    // quartics is kept
    let c = &system.c;
    let big = unfold_root(wtilde);
    let mut seeds: Vec<(CayleyVector, f64)> = Vec::new();
    let mut first_err = None;
    for w in [big, -1.0 / big] {
        let w = refine_root(c, w);
        match solve_uv(c, w, tol) {
            Ok((u, v, consistency)) => seeds.push((CayleyVector::new(u, v, w), consistency)),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
        for (u, v, consistency) in solve_uv_rank_two(c, w, tol).unwrap_or_default() {
            seeds.push((CayleyVector::new(u, v, w), consistency));
        }
    }
    let score = |a: &CayleyVector| scaled_quartics(&system.f, a).0.norm();
    let Some((cayley, consistency)) = seeds.into_iter().min_by(|a, b| score(&a.0).total_cmp(&score(&b.0))) else {
        return Err(first_err.expect("both branches failed"));
    };
    finish_candidate(system, problem, corrs, opts, cayley, consistency)
}

fn finish_candidate(
    system: &UnivariateSystem,
    problem: &NormalizedProblem,
    corrs: &[Correspondence; 5],
    opts: &SolveOptions,
    mut cayley: CayleyVector,
    consistency: f64,
) -> Result<SolutionCandidate> {
    let tol = &opts.tolerances;
    if opts.polish {
        cayley = polish_cayley(&system.f, cayley);
    }
    let w0 = cayley.w;
    let wtilde = w0 - 1.0 / w0;
    let r = cayley_to_rotation(&cayley);
    let t = solve_translation(&numeric_s(problem, r.matrix()), tol)?;
    let normalized_pose = if opts.vote_all_points {
        select_candidate_by_vote(&r, &t, problem)
    } else {
        select_candidate(&r, &t, problem)
    };
    let selected_cayley = if normalized_pose.rotation == r {
        cayley
    } else {
        twisted_cayley(&cayley, &t)
            .or_else(|_| rotation_to_cayley(&normalized_pose.rotation))
            .unwrap_or(cayley)
    };
    let pose = denormalize_pose(&normalized_pose, problem);
    let e = essential_from_pose(&pose);
    let max_epipolar_residual = corrs
        .iter()
        .map(|c| epipolar_residual(&e, c).abs())
        .fold(0.0, f64::max);
    Ok(SolutionCandidate {
        pose,
        normalized_pose,
        cayley: selected_cayley,
        root_w: w0,
        root_wtilde: wtilde,
        consistency,
        max_epipolar_residual,
        cheirality_votes: cheirality_votes(&normalized_pose, problem),
        possibly_multiple_root: false,
    })
}
