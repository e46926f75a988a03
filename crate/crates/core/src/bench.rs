//! Synthetic two-view scenes, pixel noise, pose error metrics and batch
//! experiments.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, Correspondence, RelativePose, Rotation3, UnitTranslation, Vec3};
use crate::recovery::{solve_relative_pose, SolutionCandidate, SolveOptions};

/// Rejection cap for one scene point.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Points spread through the frustum depth range, translation in a
    /// uniformly random direction.
    Default,
    /// Points on the plane `z = distance`, translation along `+z`.
    PlanarForward,
    Custom { planar: bool, forward: bool },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Default => "default",
            Scenario::PlanarForward => "planar_forward",
            Scenario::Custom { .. } => "custom",
        }
    }

    fn planar(&self) -> bool {
        match *self {
            Scenario::Default => false,
            Scenario::PlanarForward => true,
            Scenario::Custom { planar, .. } => planar,
        }
    }

    fn forward(&self) -> bool {
        match *self {
            Scenario::Default => false,
            Scenario::PlanarForward => true,
            Scenario::Custom { forward, .. } => forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub distance_to_scene: f64,
    pub scene_depth: f64,
    pub baseline_length: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub fov_degrees: f64,
    /// Upper bound of the camera-2 rotation angle.
    pub max_rotation_degrees: f64,
    pub scenario: Scenario,
    pub noise_sigma_px: f64,
    pub trials: usize,
    pub master_seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            distance_to_scene: 1.0,
            scene_depth: 0.5,
            baseline_length: 0.1,
            image_width: 352,
            image_height: 288,
            fov_degrees: 45.0,
            max_rotation_degrees: 10.0,
            scenario: Scenario::Default,
            noise_sigma_px: 0.0,
            trials: 1000,
            master_seed: 0,
        }
    }
}

impl SceneConfig {
    /// `(width / 2) / tan(fov / 2)`
    pub fn focal_px(&self) -> f64 {
        (self.image_width as f64 / 2.0) / (self.fov_degrees.to_radians() / 2.0).tan()
    }

    fn principal_point(&self) -> (f64, f64) {
        (self.image_width as f64 / 2.0, self.image_height as f64 / 2.0)
    }

    /// Pixel coordinates of a camera-frame point, `None` behind the camera.
    pub fn project(&self, x: &Vec3) -> Option<(f64, f64)> {
        if !(x.z > 0.0) {
            return None;
        }
        let f = self.focal_px();
        let (cx, cy) = self.principal_point();
        Some((f * x.x / x.z + cx, f * x.y / x.z + cy))
    }

    pub fn in_image(&self, px: (f64, f64)) -> bool {
        (0.0..=self.image_width as f64).contains(&px.0) && (0.0..=self.image_height as f64).contains(&px.1)
    }

    /// Unit bearing through a pixel.
    pub fn unproject(&self, px: (f64, f64)) -> Vec3 {
        let f = self.focal_px();
        let (cx, cy) = self.principal_point();
        Vec3::new((px.0 - cx) / f, (px.1 - cy) / f, 1.0).normalize()
    }

    /// Deterministic generator for one trial.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(trial);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Ground truth with unit translation.
    pub pose: RelativePose,
    pub correspondences: [Correspondence; 5],
    /// Points in the frame of camera 1.
    pub points: [Vec3; 5],
}

fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

fn sample_point(cfg: &SceneConfig, rng: &mut impl Rng) -> Vec3 {
    let f = cfg.focal_px();
    let (cx, cy) = cfg.principal_point();
    let z = if cfg.scenario.planar() {
        cfg.distance_to_scene
    } else {
        // volume-uniform depth: density proportional to z^2
        let lo = cfg.distance_to_scene - cfg.scene_depth / 2.0;
        let hi = cfg.distance_to_scene + cfg.scene_depth / 2.0;
        let (l3, h3) = (lo.powi(3), hi.powi(3));
        (l3 + rng.random::<f64>() * (h3 - l3)).cbrt()
    };
    let x = rng.random_range(-1.0..=1.0) * cx / f * z;
    let y = rng.random_range(-1.0..=1.0) * cy / f * z;
    Vec3::new(x, y, z)
}

pub fn generate_scene(cfg: &SceneConfig, rng: &mut impl Rng) -> Result<Scene> {
    let axis = unit_vector(rng);
    let angle = rng.random_range(0.0..=cfg.max_rotation_degrees).to_radians();
    let r = Rotation3::from_axis_angle(&axis, angle);
    let direction = if cfg.scenario.forward() { Vec3::z() } else { unit_vector(rng) };
    let center = direction * cfg.baseline_length;
    let t = -(r.matrix() * center);

    let mut points = [Vec3::zeros(); 5];
    let mut correspondences = Vec::with_capacity(5);
    for p in &mut points {
        let mut found = None;
        for _ in 0..MAX_SAMPLING_ATTEMPTS {
            let x1 = sample_point(cfg, rng);
            let x2 = r.matrix() * x1 + t;
            let visible = |x: &Vec3| cfg.project(x).is_some_and(|px| cfg.in_image(px));
            if visible(&x1) && visible(&x2) {
                found = Some((x1, x2));
                break;
            }
        }
        let (x1, x2) = found.ok_or(Error::SamplingExhausted(MAX_SAMPLING_ATTEMPTS))?;
        *p = x1;
        correspondences.push(Correspondence::new(x1, x2)?);
    }
    Ok(Scene {
        pose: RelativePose::new(r, UnitTranslation::new_normalize(t)?),
        correspondences: correspondences.try_into().expect("five points"),
        points,
    })
}

fn perturb(cfg: &SceneConfig, q: &Vec3, sigma: f64, rng: &mut impl Rng) -> Vec3 {
    let f = cfg.focal_px();
    let (cx, cy) = cfg.principal_point();
    let px = (f * q.x / q.z + cx, f * q.y / q.z + cy);
    let dx: f64 = StandardNormal.sample(rng);
    let dy: f64 = StandardNormal.sample(rng);
    cfg.unproject((px.0 + sigma * dx, px.1 + sigma * dy))
}

/// Gaussian pixel noise on both images. `sigma_px == 0` returns the input
/// untouched and draws nothing.
pub fn add_pixel_noise(
    cfg: &SceneConfig,
    corrs: &[Correspondence; 5],
    sigma_px: f64,
    rng: &mut impl Rng,
) -> [Correspondence; 5] {
    if sigma_px == 0.0 {
        return *corrs;
    }
    corrs.map(|c| {
        let q2 = perturb(cfg, &c.q2, sigma_px, rng);
        let q1 = perturb(cfg, &c.q1, sigma_px, rng);
        Correspondence { q1, q2 }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseErrors {
    /// `min ||[R̄|t̄] - [R|t]||_F` over candidates.
    pub epsilon: f64,
    pub rot_err_deg: f64,
    pub trans_err_deg: f64,
    pub degenerate: bool,
}

/// Each error is minimized over the candidates independently. An empty list
/// is degenerate with infinite errors.
pub fn pose_error_metrics(candidates: &[SolutionCandidate], gt: &RelativePose) -> PoseErrors {
    if candidates.is_empty() {
        return PoseErrors {
            epsilon: f64::INFINITY,
            rot_err_deg: f64::INFINITY,
            trans_err_deg: f64::INFINITY,
            degenerate: true,
        };
    }
    let p_gt = gt.camera_matrix();
    let mut out = PoseErrors {
        epsilon: f64::INFINITY,
        rot_err_deg: f64::INFINITY,
        trans_err_deg: f64::INFINITY,
        degenerate: false,
    };
    for c in candidates {
        let eps = (c.pose.camera_matrix() - p_gt).norm();
        let rot = (c.pose.rotation.transpose() * gt.rotation).angle().to_degrees();
        let trans = angle_between(c.pose.translation.vector(), gt.translation.vector()).to_degrees();
        out.epsilon = out.epsilon.min(eps);
        out.rot_err_deg = out.rot_err_deg.min(rot);
        out.trans_err_deg = out.trans_err_deg.min(trans);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub epsilon: f64,
    pub rot_err_deg: f64,
    pub trans_err_deg: f64,
    pub n_candidates: usize,
    pub degenerate: bool,
}

pub fn run_trial(cfg: &SceneConfig, opts: &SolveOptions, trial: u64) -> TrialRecord {
    let mut rng = cfg.trial_rng(trial);
    let degenerate = TrialRecord {
        trial,
        epsilon: f64::INFINITY,
        rot_err_deg: f64::INFINITY,
        trans_err_deg: f64::INFINITY,
        n_candidates: 0,
        degenerate: true,
    };
    let Ok(scene) = generate_scene(cfg, &mut rng) else {
        return degenerate;
    };
    let corrs = add_pixel_noise(cfg, &scene.correspondences, cfg.noise_sigma_px, &mut rng);
    let Ok(out) = solve_relative_pose(&corrs, opts) else {
        return degenerate;
    };
    let e = pose_error_metrics(&out.candidates, &scene.pose);
    TrialRecord {
        trial,
        epsilon: e.epsilon,
        rot_err_deg: e.rot_err_deg,
        trans_err_deg: e.trans_err_deg,
        n_candidates: out.candidates.len(),
        degenerate: e.degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

pub const HISTOGRAM_LO: f64 = -16.0;
pub const HISTOGRAM_HI: f64 = 2.0;
pub const HISTOGRAM_WIDTH: f64 = 0.5;

/// Histogram of `log10(epsilon)`; values outside `[-16, 2]` land in the end
/// bins.
pub fn log_histogram(values: &[f64]) -> Vec<HistogramBin> {
    let n = ((HISTOGRAM_HI - HISTOGRAM_LO) / HISTOGRAM_WIDTH).round() as usize;
    let mut bins: Vec<HistogramBin> = (0..n)
        .map(|k| HistogramBin {
            bin_lo: HISTOGRAM_LO + k as f64 * HISTOGRAM_WIDTH,
            bin_hi: HISTOGRAM_LO + (k + 1) as f64 * HISTOGRAM_WIDTH,
            count: 0,
        })
        .collect();
    for v in values {
        let x = v.log10();
        let k = if x.is_nan() {
            continue;
        } else {
            ((x - HISTOGRAM_LO) / HISTOGRAM_WIDTH).floor().clamp(0.0, (n - 1) as f64) as usize
        };
        bins[k].count += 1;
    }
    bins
}

/// Linear-interpolation quantile of sorted data; NaN when empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub trials: usize,
    pub sigma_px: f64,
    pub median_epsilon: f64,
    pub q25_epsilon: f64,
    pub q75_epsilon: f64,
    pub median_rot_err_deg: f64,
    pub median_trans_err_deg: f64,
    pub degenerate_count: usize,
    pub histogram: Vec<HistogramBin>,
}

impl Summary {
    /// Statistics over the non-degenerate records.
    pub fn from_records(cfg: &SceneConfig, records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.degenerate).collect();
        let sorted = |f: fn(&TrialRecord) -> f64| {
            let mut v: Vec<f64> = ok.iter().map(|r| f(r)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let eps = sorted(|r| r.epsilon);
        let rot = sorted(|r| r.rot_err_deg);
        let trans = sorted(|r| r.trans_err_deg);
        Summary {
            scenario: cfg.scenario.name().to_string(),
            trials: records.len(),
            sigma_px: cfg.noise_sigma_px,
            median_epsilon: quantile(&eps, 0.5),
            q25_epsilon: quantile(&eps, 0.25),
            q75_epsilon: quantile(&eps, 0.75),
            median_rot_err_deg: quantile(&rot, 0.5),
            median_trans_err_deg: quantile(&trans, 0.5),
            degenerate_count: records.len() - ok.len(),
            histogram: log_histogram(&eps),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Runs `cfg.trials` independent trials in parallel. Records come back in
/// trial order and depend only on `(master_seed, trial, cfg)`.
pub fn run_experiment(cfg: &SceneConfig, opts: &SolveOptions) -> Experiment {
    let records: Vec<TrialRecord> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| run_trial(cfg, opts, i))
        .collect();
    let summary = Summary::from_records(cfg, &records);
    Experiment { records, summary }
}

pub const TRIALS_CSV_HEADER: &str = "trial,epsilon,rot_err_deg,trans_err_deg,n_candidates,degenerate";

/// Per-trial CSV, reals in 17-significant-digit scientific notation.
pub fn write_trials_csv(records: &[TrialRecord], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{TRIALS_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{},{}",
            r.trial, r.epsilon, r.rot_err_deg, r.trans_err_deg, r.n_candidates, r.degenerate
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{epipolar_residual, essential_from_pose};

    fn cfg(scenario: Scenario) -> SceneConfig {
        SceneConfig { scenario, ..Default::default() }
    }

    #[test]
    fn focal_length() {
        let f = SceneConfig::default().focal_px();
        assert!((f - 176.0 / 22.5f64.to_radians().tan()).abs() < 1e-12);
        assert!((f - 424.901_586_977_664_75).abs() < 1e-9);
    }

    #[test]
    fn scenes_are_visible_and_exact() {
        for scenario in [Scenario::Default, Scenario::PlanarForward] {
            let c = cfg(scenario);
            for trial in 0..300 {
                let s = generate_scene(&c, &mut c.trial_rng(trial)).unwrap();
                let e = essential_from_pose(&s.pose);
                let r = s.pose.rotation.matrix();
                let t_raw = -(r * (s.pose.rotation.transpose().matrix() * -*s.pose.translation.vector()));
                assert!((t_raw - s.pose.translation.vector()).norm() < 1e-15);
                assert!(s.pose.rotation.angle() <= 10f64.to_radians() + 1e-12);
                for (x1, corr) in s.points.iter().zip(&s.correspondences) {
                    assert!(x1.z > 0.0);
                    assert!(c.in_image(c.project(x1).unwrap()));
                    assert!(corr.q2.z > 0.0);
                    let px2 = c.project(&corr.q2).unwrap();
                    assert!(c.in_image(px2), "{px2:?}");
                    assert!(epipolar_residual(&e, corr).abs() <= 1e-14);
                    if scenario == Scenario::PlanarForward {
                        assert_eq!(x1.z, 1.0);
                    } else {
                        assert!((0.75..=1.25).contains(&x1.z));
                    }
                }
            }
        }
    }

    #[test]
    fn forward_motion_moves_along_the_optical_axis() {
        let c = cfg(Scenario::PlanarForward);
        let s = generate_scene(&c, &mut c.trial_rng(3)).unwrap();
        // camera-2 centre is -R^T t
        let centre = -(s.pose.rotation.transpose().matrix() * s.pose.translation.vector());
        assert!((centre.normalize() - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let c = cfg(Scenario::Default);
        let mut rng = c.trial_rng(0);
        let s = generate_scene(&c, &mut rng).unwrap();
        let before = rng.clone();
        let noisy = add_pixel_noise(&c, &s.correspondences, 0.0, &mut rng);
        assert_eq!(noisy, s.correspondences);
        assert_eq!(rng, before);
    }

    #[test]
    fn pixel_noise_statistics() {
        let c = cfg(Scenario::Default);
        let mut rng = c.trial_rng(1);
        let q = Vec3::new(0.1, -0.05, 1.0).normalize();
        let px0 = c.project(&q).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut angles = Vec::new();
        let n = 100_000;
        for _ in 0..n / 2 {
            let corr = Correspondence { q1: q, q2: q };
            let out = add_pixel_noise(&c, &[corr; 5], 1.0, &mut rng)[0];
            for b in [out.q1, out.q2] {
                let px = c.project(&b).unwrap();
                let d = px.0 - px0.0;
                sum += d;
                sum_sq += d * d;
                angles.push(angle_between(&b, &q));
            }
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((std - 1.0).abs() < 0.02, "{std}");
        angles.sort_by(f64::total_cmp);
        // median of a 2-D Rayleigh radius is sqrt(2 ln 2) pixels
        let expected = (2.0 * 2f64.ln()).sqrt() / c.focal_px();
        let median = angles[angles.len() / 2];
        assert!((median / expected - 1.0).abs() < 0.05, "{median} {expected}");
    }

    fn candidate(pose: RelativePose) -> SolutionCandidate {
        SolutionCandidate {
            pose,
            normalized_pose: pose,
            cayley: Default::default(),
            root_w: 0.0,
            root_wtilde: 0.0,
            consistency: 0.0,
            max_epipolar_residual: 0.0,
            cheirality_votes: 5,
            possibly_multiple_root: false,
        }
    }

    #[test]
    fn metric_examples() {
        let gt = RelativePose::new(
            Rotation3::from_axis_angle(&Vec3::new(1.0, 2.0, 3.0), 0.1),
            UnitTranslation::new_normalize(Vec3::new(0.3, -0.2, 0.9)).unwrap(),
        );
        let e = pose_error_metrics(&[candidate(gt)], &gt);
        assert_eq!((e.epsilon, e.rot_err_deg, e.trans_err_deg, e.degenerate), (0.0, 0.0, 0.0, false));

        let flipped = RelativePose::new(gt.rotation, -gt.translation);
        let e = pose_error_metrics(&[candidate(flipped)], &gt);
        assert!((e.trans_err_deg - 180.0).abs() < 1e-12);
        assert!((e.epsilon - 2.0).abs() < 1e-15);

        let theta = 0.37f64;
        let perturbed = RelativePose::new(
            gt.rotation * Rotation3::from_axis_angle(&Vec3::new(-1.0, 0.5, 0.2), theta),
            gt.translation,
        );
        let e = pose_error_metrics(&[candidate(perturbed), candidate(flipped)], &gt);
        assert!((e.rot_err_deg - 0.0).abs() < 1e-12);
        let e = pose_error_metrics(&[candidate(perturbed)], &gt);
        assert!((e.rot_err_deg - theta.to_degrees()).abs() < 1e-9);

        let e = pose_error_metrics(&[], &gt);
        assert!(e.degenerate && e.epsilon == f64::INFINITY);
    }

    #[test]
    fn histogram_and_quantiles() {
        let h = log_histogram(&[0.0, 1e-20, 1e-10, 3e-10, 1e5]);
        assert_eq!(h.len(), 36);
        assert_eq!(h[0].count, 2);
        assert_eq!(h[12].count, 2);
        assert_eq!((h[12].bin_lo, h[12].bin_hi), (-10.0, -9.5));
        assert_eq!(h[35].count, 1);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[5.0], 0.25), 5.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn experiments_are_reproducible() {
        let c = SceneConfig { trials: 64, master_seed: 9, noise_sigma_px: 0.5, ..Default::default() };
        let a = run_experiment(&c, &SolveOptions::default());
        let b = run_experiment(&c, &SolveOptions::default());
        assert_eq!(a, b);
        let single = run_trial(&c, &SolveOptions::default(), 17);
        assert_eq!(a.records[17], single);
        let mut csv = Vec::new();
        write_trials_csv(&a.records, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next(), Some(TRIALS_CSV_HEADER));
        assert_eq!(text.lines().count(), 65);
    }

    #[test]
    fn noise_free_trials_are_accurate() {
        let c = SceneConfig { trials: 200, master_seed: 1, ..Default::default() };
        let ex = run_experiment(&c, &SolveOptions::default());
        assert_eq!(ex.summary.degenerate_count, 0);
        assert!(ex.summary.median_epsilon <= 1e-8, "{:?}", ex.summary);
    }
}
