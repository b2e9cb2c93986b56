//! Solid balls and tori, their unions, sampling measures, and Monte Carlo
//! risk estimation.
//!
//! Randomness flows from one master seed. Independent streams get their own
//! seed through [`derive_seed`], a splitmix64 mix of `(master, stream)`, and
//! each stream drives a ChaCha8 generator.

use crate::error::{input, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under master seed `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Volume of the `d`-dimensional unit ball, `pi^(d/2) / Gamma(d/2 + 1)`,
/// through the recurrence `V_d = V_{d-2} 2 pi / d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let (mut v, mut k) = if d % 2 == 0 { (1.0, 0) } else { (2.0, 1) };
    while k < d {
        k += 2;
        v *= 2.0 * PI / k as f64;
    }
    v
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    unit_ball_volume(d) * r.powi(d as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub r: f64,
}

/// Solid torus around a circle of radius `R` in the plane of the first
/// `d - 1` coordinates; the last coordinate is the tube axis. For `d = 2`
/// this is the planar annulus `R - r <= |x - c| <= R + r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusSpec {
    pub center: Vec<f64>,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Ball(BallSpec),
    Torus(TorusSpec),
}

impl Shape {
    pub fn ball(center: Vec<f64>, r: f64) -> Result<Shape> {
        let s = Shape::Ball(BallSpec { center, r });
        s.validate()?;
        Ok(s)
    }

    pub fn torus(center: Vec<f64>, r: f64, big_r: f64) -> Result<Shape> {
        let s = Shape::Torus(TorusSpec { center, r, big_r });
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Ball(b) => {
                if b.center.is_empty() || b.center.iter().any(|v| !v.is_finite()) {
                    return input("ball center must be a finite, non-empty vector");
                }
                if !(b.r > 0.0) || !b.r.is_finite() {
                    return input("ball radius must be positive");
                }
            }
            Shape::Torus(t) => {
                if t.center.len() < 2 || t.center.iter().any(|v| !v.is_finite()) {
                    return input("torus needs a finite center in dimension >= 2");
                }
                if !(t.r > 0.0) || !t.big_r.is_finite() {
                    return input("torus radii must be positive");
                }
                if !(t.big_r > t.r) {
                    return input("torus needs R > r");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center().len()
    }

    pub fn center(&self) -> &[f64] {
        match self {
            Shape::Ball(b) => &b.center,
            Shape::Torus(t) => &t.center,
        }
    }

    /// Radius `r` such that the shape is `{level <= r^2}`.
    pub fn radius(&self) -> f64 {
        match self {
            Shape::Ball(b) => b.r,
            Shape::Torus(t) => t.r,
        }
    }

    /// Squared distance to the core (center point or spine circle).
    pub fn level(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Ball(b) => x.iter().zip(&b.center).map(|(a, c)| (a - c) * (a - c)).sum(),
            Shape::Torus(t) => {
                let d = t.center.len();
                let planar = if d == 2 { d } else { d - 1 };
                let s: f64 = (0..planar).map(|i| (x[i] - t.center[i]).powi(2)).sum::<f64>().sqrt();
                let axial = if d == 2 { 0.0 } else { (x[d - 1] - t.center[d - 1]).powi(2) };
                axial + (s - t.big_r).powi(2)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.level(x) <= self.radius().powi(2)
    }

    /// Volume of `{level <= t^2}` for `0 <= t <= r`.
    pub fn volume_at(&self, t: f64) -> f64 {
        match self {
            Shape::Ball(b) => ball_volume(b.center.len(), t),
            Shape::Torus(tr) => {
                let d = tr.center.len();
                if d == 2 {
                    return 4.0 * PI * tr.big_r * t;
                }
                // Rotate the disk of radius t at distance R about the axis
                // through the (d-1)-dimensional plane: the volume element is
                // (d-1) V_{d-1} s^{d-2} ds dz.
                let k = d - 2;
                let mut sum = 0.0;
                let mut j = PI;
                let mut i = 0;
                while 2 * i <= k {
                    if i > 0 {
                        j *= (2 * i - 1) as f64 / (2 * i + 2) as f64;
                    }
                    sum += binomial(k, 2 * i) * tr.big_r.powi((k - 2 * i) as i32) * t.powi((2 * i + 2) as i32) * j;
                    i += 1;
                }
                (d - 1) as f64 * unit_ball_volume(d - 1) * sum
            }
        }
    }

    pub fn volume(&self) -> f64 {
        self.volume_at(self.radius())
    }

    /// Volume of the shell `{r^2 - delta <= level <= r^2}`.
    pub fn shell_volume(&self, delta: f64) -> f64 {
        let r = self.radius();
        let inner = (r * r - delta).max(0.0).sqrt();
        self.volume() - self.volume_at(inner)
    }

    /// Reach used by the sampling bounds: `r` for a ball, `min(r, R - r)` for a torus.
    pub fn reach(&self) -> f64 {
        match self {
            Shape::Ball(b) => b.r,
            Shape::Torus(t) => t.r.min(t.big_r - t.r),
        }
    }

    /// Radius of a ball around `center()` containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Ball(b) => b.r,
            Shape::Torus(t) => t.big_r + t.r,
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.center();
        let d = c.len();
        let mut half = vec![self.bounding_radius(); d];
        if let Shape::Torus(t) = self {
            if d > 2 {
                half[d - 1] = t.r;
            }
        }
        (c.iter().zip(&half).map(|(a, h)| a - h).collect(), c.iter().zip(&half).map(|(a, h)| a + h).collect())
    }

    /// Betti numbers `beta_0 .. beta_{d-1}` of the solid shape.
    pub fn betti(&self) -> Vec<usize> {
        let mut b = vec![0; self.dim()];
        b[0] = 1;
        if let Shape::Torus(_) = self {
            b[1] = 1;
        }
        b
    }

    /// Sum of Betti numbers: 1 for a ball, 2 for a torus.
    pub fn complexity(&self) -> usize {
        self.betti().iter().sum()
    }

    /// Uniform points by rejection from the tight bounding box.
    pub fn sample_with(&self, n: usize, rng: &mut impl Rng) -> Result<SampleSet> {
        let (lo, hi) = self.bounding_box();
        let mut points = Vec::with_capacity(n);
        let mut attempts: u64 = 0;
        while points.len() < n {
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            attempts += 1;
            if self.contains(&x) {
                points.push(x);
            }
            check_acceptance(points.len(), attempts)?;
        }
        let rate = if attempts == 0 { 1.0 } else { n as f64 / attempts as f64 };
        Ok(SampleSet { points, labels: None, acceptance_rate: rate })
    }

    fn disjoint_from(&self, other: &Shape) -> bool {
        let d: f64 =
            self.center().iter().zip(other.center()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        d > self.bounding_radius() + other.bounding_radius()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Below this acceptance rate a rejection sampler is treated as degenerate.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

fn check_acceptance(accepted: usize, attempts: u64) -> Result<()> {
    if attempts >= 100_000 && (accepted as f64) < MIN_ACCEPTANCE * attempts as f64 {
        return Err(Error::Geometry(format!(
            "rejection sampler accepted {accepted} of {attempts} proposals"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
    pub acceptance_rate: f64,
}

/// Uniform sampling from the union of `shapes`: pick a component by volume,
/// draw inside it, and keep the draw with probability one over the number
/// of components containing it.
fn sample_union(shapes: &[Shape], n: usize, rng: &mut impl Rng) -> Result<SampleSet> {
    if shapes.is_empty() {
        return input("cannot sample an empty union");
    }
    let vols: Vec<f64> = shapes.iter().map(|s| s.volume()).collect();
    let total: f64 = vols.iter().sum();
    let mut points = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    while points.len() < n {
        let mut u = rng.random::<f64>() * total;
        let mut k = 0;
        while k + 1 < vols.len() && u >= vols[k] {
            u -= vols[k];
            k += 1;
        }
        let x = shapes[k].sample_with(1, rng)?.points.pop().unwrap();
        let cover = shapes.iter().filter(|s| s.contains(&x)).count().max(1);
        attempts += 1;
        if cover == 1 || rng.random::<f64>() * (cover as f64) < 1.0 {
            points.push(x);
        }
        check_acceptance(points.len(), attempts)?;
    }
    Ok(SampleSet { points, labels: None, acceptance_rate: n as f64 / attempts.max(1) as f64 })
}

/// A labelled union of balls and tori in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSpec {
    #[serde(default)]
    pub balls: Vec<BallSpec>,
    #[serde(default)]
    pub tori: Vec<TorusSpec>,
    #[serde(default)]
    pub label: u8,
}

impl RepresentativeSpec {
    pub fn components(&self) -> Vec<Shape> {
        self.balls
            .iter()
            .cloned()
            .map(Shape::Ball)
            .chain(self.tori.iter().cloned().map(Shape::Torus))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let comps = self.components();
        if comps.is_empty() {
            return input("representative needs at least one component");
        }
        let d = comps[0].dim();
        for c in &comps {
            c.validate()?;
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.components().first().map(|c| c.dim()).unwrap_or(0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.components().iter().any(|c| c.contains(x))
    }

    /// Volume assuming the components are disjoint.
    pub fn volume(&self) -> f64 {
        self.components().iter().map(|c| c.volume()).sum()
    }

    /// Betti numbers of the union assuming disjoint components.
    pub fn betti(&self) -> Vec<usize> {
        let comps = self.components();
        let mut b = vec![0; self.dim()];
        for c in &comps {
            for (acc, v) in b.iter_mut().zip(c.betti()) {
                *acc += v;
            }
        }
        b
    }

    pub fn complexity(&self) -> usize {
        self.betti().iter().sum()
    }

    /// True unless every pair of components has disjoint bounding balls.
    pub fn may_overlap(&self) -> bool {
        let comps = self.components();
        for i in 0..comps.len() {
            for j in i + 1..comps.len() {
                if !comps[i].disjoint_from(&comps[j]) {
                    return true;
                }
            }
        }
        false
    }

    /// Reach of the union: the smallest component reach, capped by half the
    /// gap between bounding balls of distinct components.
    pub fn reach(&self) -> f64 {
        let comps = self.components();
        let mut tau = comps.iter().map(|c| c.reach()).fold(f64::INFINITY, f64::min);
        for i in 0..comps.len() {
            for j in i + 1..comps.len() {
                tau = tau.min(0.5 * gap(&comps[i], &comps[j]));
            }
        }
        tau
    }

    pub fn sample_with(&self, n: usize, rng: &mut impl Rng) -> Result<SampleSet> {
        let mut s = sample_union(&self.components(), n, rng)?;
        s.labels = Some(vec![self.label; n]);
        Ok(s)
    }
}

fn gap(a: &Shape, b: &Shape) -> f64 {
    let d: f64 = a.center().iter().zip(b.center()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    (d - a.bounding_radius() - b.bounding_radius()).max(0.0)
}

/// Two-class problem in `R^d` mapped into `R^D` by `y -> Q y + b` with
/// orthonormal columns `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedSpec {
    pub class1: RepresentativeSpec,
    pub class0: RepresentativeSpec,
    /// `D x d`, row-major.
    pub rotation: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub tau_input: f64,
    #[serde(default)]
    pub volume_input: Option<f64>,
}

impl EmbeddedSpec {
    pub fn validate(&self) -> Result<()> {
        self.class1.validate()?;
        self.class0.validate()?;
        let d = self.class1.dim();
        if self.class0.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.class0.dim() });
        }
        let big_d = self.rotation.len();
        if big_d < d || self.offset.len() != big_d || self.rotation.iter().any(|r| r.len() != d) {
            return input("rotation must be D x d with D >= d and offset of length D");
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = self.rotation.iter().map(|r| r[i] * r[j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return input("rotation columns must be orthonormal");
                }
            }
        }
        if !(self.tau_input > 0.0) {
            return input("tau_input must be positive");
        }
        Ok(())
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.class1.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.rotation.len()
    }

    pub fn embed(&self, y: &[f64]) -> Vec<f64> {
        self.rotation
            .iter()
            .zip(&self.offset)
            .map(|(row, b)| b + row.iter().zip(y).map(|(q, v)| q * v).sum::<f64>())
            .collect()
    }

    /// `Q^T (x - b)`, the inverse of [`embed`](Self::embed) on its image.
    pub fn pull_back(&self, x: &[f64]) -> Vec<f64> {
        let d = self.intrinsic_dim();
        let mut y = vec![0.0; d];
        for (row, (xi, bi)) in self.rotation.iter().zip(x.iter().zip(&self.offset)) {
            for j in 0..d {
                y[j] += row[j] * (xi - bi);
            }
        }
        y
    }

    pub fn volume(&self) -> f64 {
        self.volume_input.unwrap_or_else(|| self.class1.volume() + self.class0.volume())
    }

    pub fn all_components(&self) -> Vec<Shape> {
        let mut c = self.class1.components();
        c.extend(self.class0.components());
        c
    }

    /// Uniform points on the embedded union with their class labels.
    pub fn sample_with(&self, n: usize, rng: &mut impl Rng) -> Result<SampleSet> {
        let comps = self.all_components();
        let s = sample_union(&comps, n, rng)?;
        let labels = s.points.iter().map(|y| u8::from(self.class1.contains(y))).collect();
        let points = s.points.iter().map(|y| self.embed(y)).collect();
        Ok(SampleSet { points, labels: Some(labels), acceptance_rate: s.acceptance_rate })
    }

    /// Smallest distance between sampled points of the two classes; an
    /// error if any sample lies in both classes.
    pub fn certify_disjoint(&self, n: usize, seed: u64) -> Result<f64> {
        let mut rng = rng_from_seed(seed);
        let a = self.class1.sample_with(n, &mut rng)?.points;
        let b = self.class0.sample_with(n, &mut rng)?.points;
        if a.iter().any(|p| self.class0.contains(p)) || b.iter().any(|p| self.class1.contains(p)) {
            return Err(Error::Geometry("class shapes intersect".into()));
        }
        let mut best = f64::INFINITY;
        for p in &a {
            for q in &b {
                best = best.min(p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>());
            }
        }
        Ok(best.sqrt())
    }
}

/// Probability measure used for risks and shell certification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Uniform on the union of the listed shapes.
    UniformOnShapes { shapes: Vec<Shape> },
}

impl MeasureSpec {
    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let m = MeasureSpec::UniformBox { lower, upper };
        m.validate()?;
        Ok(m)
    }

    /// Box around `shapes` enlarged by `margin` on every side.
    pub fn box_around(shapes: &[Shape], margin: f64) -> Result<Self> {
        if shapes.is_empty() {
            return input("need at least one shape");
        }
        let d = shapes[0].dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for s in shapes {
            let (a, b) = s.bounding_box();
            for i in 0..d {
                lo[i] = lo[i].min(a[i] - margin);
                hi[i] = hi[i].max(b[i] + margin);
            }
        }
        Self::uniform_box(lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return input("box bounds must be non-empty and of equal length");
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return input("box needs finite lower < upper in every coordinate");
                }
            }
            MeasureSpec::UniformOnShapes { shapes } => {
                if shapes.is_empty() {
                    return input("measure needs at least one shape");
                }
                for s in shapes {
                    s.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            MeasureSpec::UniformBox { lower, .. } => lower.len(),
            MeasureSpec::UniformOnShapes { shapes } => shapes[0].dim(),
        }
    }

    pub fn sample_one(&self, rng: &mut impl Rng) -> Result<Vec<f64>> {
        match self {
            MeasureSpec::UniformBox { lower, upper } => {
                Ok(lower.iter().zip(upper).map(|(a, b)| rng.random_range(*a..*b)).collect())
            }
            MeasureSpec::UniformOnShapes { shapes } => Ok(sample_union(shapes, 1, rng)?.points.pop().unwrap()),
        }
    }

    pub fn sample_with(&self, n: usize, rng: &mut impl Rng) -> Result<SampleSet> {
        match self {
            MeasureSpec::UniformOnShapes { shapes } => sample_union(shapes, n, rng),
            _ => {
                let points = (0..n).map(|_| self.sample_one(rng)).collect::<Result<Vec<_>>>()?;
                Ok(SampleSet { points, labels: None, acceptance_rate: 1.0 })
            }
        }
    }

    /// Closed-form measure of the shell of `shape`, when the geometry makes
    /// it available.
    fn analytic_shell(&self, shape: &Shape, delta: f64) -> Option<f64> {
        match self {
            MeasureSpec::UniformBox { lower, upper } => {
                let (a, b) = shape.bounding_box();
                let inside = (0..lower.len()).all(|i| lower[i] <= a[i] && b[i] <= upper[i]);
                if !inside || lower.len() != shape.dim() {
                    return None;
                }
                let vol: f64 = lower.iter().zip(upper).map(|(l, u)| u - l).product();
                Some(shape.shell_volume(delta) / vol)
            }
            MeasureSpec::UniformOnShapes { shapes } => {
                for i in 0..shapes.len() {
                    for j in i + 1..shapes.len() {
                        if !shapes[i].disjoint_from(&shapes[j]) {
                            return None;
                        }
                    }
                }
                let total: f64 = shapes.iter().map(|s| s.volume()).sum();
                if shapes.iter().any(|s| s == shape) {
                    Some(shape.shell_volume(delta) / total)
                } else if shapes.iter().all(|s| s.disjoint_from(shape)) {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }
}

/// Which route produced a shell width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellMethod {
    Analytic,
    MonteCarlo,
}

/// A shell width `delta` together with the independent Monte Carlo check
/// of its measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellCertificate {
    pub delta: f64,
    pub eps2: f64,
    pub method: ShellMethod,
    /// Closed-form measure of the shell when available.
    pub analytic_measure: Option<f64>,
    pub mc_measure: f64,
    pub mc_std_error: f64,
    pub mc_samples: usize,
}

/// Sample count of the certifying Monte Carlo pass.
pub const SHELL_CERT_SAMPLES: usize = 20_000;
/// Sample count of the fallback Monte Carlo search.
pub const SHELL_SEARCH_SAMPLES: usize = 40_000;
/// Rejection threshold of the certifying pass, in standard errors. The
/// analytic route puts the shell measure exactly on the budget, so a
/// three-sigma test would reject correct widths about once in 700 calls.
pub const SHELL_CERT_SIGMAS: f64 = 4.0;
const SHELL_SEED: u64 = 0x5eed_0f_5e11;

/// Largest `delta` in `(0, r^2]` whose shell `{r^2 - delta <= level <= r^2}`
/// has measure at most `eps2`.
///
/// Uniform measures whose geometry is known use the closed-form shell
/// volume; anything else falls back to a Monte Carlo search run against
/// `eps2 / 2`. Either way the result is rechecked with fresh samples and
/// rejected if the estimate exceeds `eps2` by more than
/// [`SHELL_CERT_SIGMAS`] standard errors.
pub fn shell_delta(shape: &Shape, eps2: f64, measure: &MeasureSpec) -> Result<ShellCertificate> {
    if !(eps2 > 0.0) {
        return input("eps2 must be positive");
    }
    shape.validate()?;
    measure.validate()?;
    if measure.dim() != shape.dim() {
        return Err(Error::DimensionMismatch { expected: shape.dim(), got: measure.dim() });
    }
    let r2 = shape.radius().powi(2);
    let (delta, method, analytic) = match measure.analytic_shell(shape, r2) {
        Some(full) => {
            let delta = if full <= eps2 {
                r2
            } else {
                let (mut lo, mut hi) = (0.0, r2);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if measure.analytic_shell(shape, mid).unwrap() <= eps2 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            (delta, ShellMethod::Analytic, measure.analytic_shell(shape, delta))
        }
        None => (mc_shell_search(shape, eps2 / 2.0, measure)?, ShellMethod::MonteCarlo, None),
    };
    if !(delta > 0.0) {
        return Err(Error::Shell(format!("no positive shell width fits budget {eps2}")));
    }
    let mut rng = rng_from_seed(derive_seed(SHELL_SEED, 1));
    let mut w = Welford::default();
    for _ in 0..SHELL_CERT_SAMPLES {
        let x = measure.sample_one(&mut rng)?;
        let l = shape.level(&x);
        w.push(if l <= r2 && l >= r2 - delta { 1.0 } else { 0.0 });
    }
    let (m, se) = (w.mean, w.std_error());
    if m > eps2 + SHELL_CERT_SIGMAS * se {
        return Err(Error::Shell(format!(
            "shell of width {delta} measures {m} +- {se}, above budget {eps2}"
        )));
    }
    Ok(ShellCertificate {
        delta,
        eps2,
        method,
        analytic_measure: analytic,
        mc_measure: m,
        mc_std_error: se,
        mc_samples: SHELL_CERT_SAMPLES,
    })
}

fn mc_shell_search(shape: &Shape, budget: f64, measure: &MeasureSpec) -> Result<f64> {
    let r2 = shape.radius().powi(2);
    let mut rng = rng_from_seed(derive_seed(SHELL_SEED, 0));
    let mut levels = Vec::new();
    for _ in 0..SHELL_SEARCH_SAMPLES {
        let l = shape.level(&measure.sample_one(&mut rng)?);
        if l <= r2 {
            levels.push(l);
        }
    }
    let allowed = (budget * SHELL_SEARCH_SAMPLES as f64).floor() as usize;
    if levels.len() <= allowed {
        return Ok(r2);
    }
    levels.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cut = levels[allowed];
    let delta = (r2 - cut) * (1.0 - 1e-9);
    if delta <= 0.0 {
        return Err(Error::Shell("measure concentrates on the boundary".into()));
    }
    Ok(delta)
}

/// Streaming mean and variance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combine two partial accumulators (Chan et al. update).
    pub fn merge(&self, o: &Welford) -> Welford {
        if self.n == 0 {
            return *o;
        }
        if o.n == 0 {
            return *self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let mean = self.mean + d * o.n as f64 / n as f64;
        let m2 = self.m2 + o.m2 + d * d * self.n as f64 * o.n as f64 / n as f64;
        Welford { n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Binary classification problem: class 1 against class 0 under `measure`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub class1: RepresentativeSpec,
    pub class0: RepresentativeSpec,
    pub measure: MeasureSpec,
}

impl Problem {
    /// Measure uniform on the union of both classes.
    pub fn on_shapes(class1: RepresentativeSpec, class0: RepresentativeSpec) -> Problem {
        let mut shapes = class1.components();
        shapes.extend(class0.components());
        Problem { class1, class0, measure: MeasureSpec::UniformOnShapes { shapes } }
    }

    pub fn label(&self, x: &[f64]) -> f64 {
        if self.class1.contains(x) {
            1.0
        } else {
            0.0
        }
    }
}

/// Number of independent shards in Monte Carlo estimates. Fixed so results
/// do not depend on the thread count.
pub const MC_SHARDS: u64 = 8;
pub const MIN_RISK_SAMPLES: usize = 100;

/// Mean squared error of `h` against the class-1 indicator under the
/// problem's measure, with its standard error.
pub fn monte_carlo_risk(
    h: &(dyn Fn(&[f64]) -> f64 + Sync),
    problem: &Problem,
    n: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    monte_carlo_mean(
        &|x: &[f64]| {
            let e = h(x) - problem.label(x);
            e * e
        },
        &problem.measure,
        n,
        seed,
    )
    .map(|w| RiskEstimate { mean: w.mean, std_error: w.std_error(), n_samples: n, seed })
}

/// Sharded Monte Carlo mean of `g` under `measure`.
pub fn monte_carlo_mean(
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    measure: &MeasureSpec,
    n: usize,
    seed: u64,
) -> Result<Welford> {
    if n < MIN_RISK_SAMPLES {
        return input(format!("need at least {MIN_RISK_SAMPLES} samples, got {n}"));
    }
    measure.validate()?;
    let parts: Vec<Result<Welford>> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|k| {
            let quota = n / MC_SHARDS as usize + usize::from((k as usize) < n % MC_SHARDS as usize);
            let mut rng = rng_from_seed(derive_seed(seed, k));
            let mut w = Welford::default();
            for _ in 0..quota {
                let x = measure.sample_one(&mut rng)?;
                w.push(g(&x));
            }
            Ok(w)
        })
        .collect();
    let mut acc = Welford::default();
    for p in parts {
        acc = acc.merge(&p?);
    }
    Ok(acc)
}

/// Convenience wrapper for any sampler: `n` uniform points under `seed`.
pub trait UniformSampler {
    fn sample_rng(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet>;
}

impl UniformSampler for Shape {
    fn sample_rng(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        self.sample_with(n, rng)
    }
}

impl UniformSampler for RepresentativeSpec {
    fn sample_rng(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        self.sample_with(n, rng)
    }
}

impl UniformSampler for EmbeddedSpec {
    fn sample_rng(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        self.sample_with(n, rng)
    }
}

impl UniformSampler for MeasureSpec {
    fn sample_rng(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<SampleSet> {
        self.sample_with(n, rng)
    }
}

pub fn sample_uniform<S: UniformSampler + ?Sized>(spec: &S, n: usize, seed: u64) -> Result<SampleSet> {
    spec.sample_rng(n, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_disk() -> Shape {
        Shape::ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn membership() {
        assert!(unit_disk().contains(&[0.5, 0.0]));
        let t = Shape::torus(vec![0.0, 0.0, 0.0], 0.5, 2.0).unwrap();
        assert!(t.contains(&[2.0, 0.0, 0.0]));
        assert!(!t.contains(&[0.0, 0.0, 0.0]));
        assert!(t.contains(&[0.0, -2.2, 0.3]));
        let a = Shape::torus(vec![0.0, 0.0], 0.5, 1.0).unwrap();
        assert!(a.contains(&[0.0, 1.2]) && !a.contains(&[0.2, 0.1]));
        assert!(Shape::torus(vec![0.0, 0.0, 0.0], 2.0, 2.0).is_err());
    }

    #[test]
    fn unit_ball_volumes() {
        // closed forms pi^(d/2) / Gamma(d/2 + 1)
        let want = [1.0, 2.0, PI, 4.0 * PI / 3.0, PI * PI / 2.0, 8.0 * PI * PI / 15.0, PI.powi(3) / 6.0];
        for (d, w) in want.iter().enumerate() {
            assert!((unit_ball_volume(d) - w).abs() < 1e-12 * w);
        }
        assert!((ball_volume(3, 2.0) - 32.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn torus_volumes_match_quadrature() {
        // independent 2-D midpoint quadrature over the (s, z) disk
        for d in 3..=5usize {
            let t = Shape::torus(vec![0.0; d], 0.4, 1.3).unwrap();
            let n = 2000;
            let h = 0.8 / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let u = -0.4 + (i as f64 + 0.5) * h;
                    let z = -0.4 + (j as f64 + 0.5) * h;
                    if u * u + z * z <= 0.16 {
                        acc += (1.3 + u).powi(d as i32 - 2) * h * h;
                    }
                }
            }
            let q = acc * (d - 1) as f64 * unit_ball_volume(d - 1);
            assert!((t.volume() - q).abs() < 2e-3 * q, "d={d}: {} vs {q}", t.volume());
        }
        let a = Shape::torus(vec![0.0, 0.0], 0.5, 1.0).unwrap();
        assert!((a.volume() - PI * (1.5f64.powi(2) - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn box_sampling_estimates_disk_area() {
        let m = MeasureSpec::uniform_box(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let s = sample_uniform(&m, 200_000, 3).unwrap();
        let frac = s.points.iter().filter(|p| unit_disk().contains(p)).count() as f64 / 200_000.0;
        let se = (frac * (1.0 - frac) / 200_000.0).sqrt();
        assert!((frac - PI / 4.0).abs() < 4.0 * se);
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = Shape::torus(vec![0.0, 0.0, 0.0], 0.5, 2.0).unwrap();
        let a = sample_uniform(&t, 50, 11).unwrap();
        let b = sample_uniform(&t, 50, 11).unwrap();
        assert_eq!(a.points, b.points);
        assert!(a.points.iter().all(|p| t.contains(p)));
        assert_ne!(a.points, sample_uniform(&t, 50, 12).unwrap().points);
    }

    #[test]
    fn degenerate_sampler_is_reported() {
        // a thin tube in 8-D fills about 4e-5 of its bounding box
        let t = Shape::torus(vec![0.0; 8], 1e-3, 10.0).unwrap();
        assert!(matches!(sample_uniform(&t, 10, 1), Err(Error::Geometry(_))));
    }

    #[test]
    fn perfect_and_null_classifiers() {
        let b1 = RepresentativeSpec {
            balls: vec![BallSpec { center: vec![-2.0, 0.0], r: 1.0 }],
            tori: vec![],
            label: 1,
        };
        let b0 = RepresentativeSpec {
            balls: vec![BallSpec { center: vec![2.0, 0.0], r: 1.0 }],
            tori: vec![],
            label: 0,
        };
        let p = Problem::on_shapes(b1.clone(), b0.clone());
        let ind = |x: &[f64]| if b1.contains(x) { 1.0 } else { 0.0 };
        let r = monte_carlo_risk(&ind, &p, 10_000, 5).unwrap();
        assert_eq!(r.mean, 0.0);
        let zero = |_: &[f64]| 0.0;
        let r = monte_carlo_risk(&zero, &p, 20_000, 5).unwrap();
        assert!((r.mean - 0.5).abs() < 4.0 * r.std_error);
        assert!(monte_carlo_risk(&zero, &p, 99, 5).is_err());
        let again = monte_carlo_risk(&zero, &p, 20_000, 5).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut all = Welford::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.variance() - all.variance()).abs() < 1e-9);
    }

    #[test]
    fn shell_width_for_the_disk() {
        let m = MeasureSpec::uniform_box(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let c = shell_delta(&unit_disk(), 0.025, &m).unwrap();
        assert_eq!(c.method, ShellMethod::Analytic);
        // pi * delta / 16 = 0.025
        assert!((c.delta - 0.4 / PI).abs() < 1e-9);
        let full = shell_delta(&unit_disk(), 1.0, &m).unwrap();
        assert_eq!(full.delta, 1.0);
    }

    #[test]
    fn shell_fallback_uses_monte_carlo() {
        // box cuts the disk, so no closed form is used
        let m = MeasureSpec::uniform_box(vec![-0.5, -2.0], vec![2.0, 2.0]).unwrap();
        let c = shell_delta(&unit_disk(), 0.05, &m).unwrap();
        assert_eq!(c.method, ShellMethod::MonteCarlo);
        assert!(c.mc_measure <= 0.05);
    }

    #[test]
    fn reach_values() {
        assert_eq!(unit_disk().reach(), 1.0);
        assert_eq!(Shape::torus(vec![0.0; 3], 0.5, 2.0).unwrap().reach(), 0.5);
        assert!((Shape::torus(vec![0.0; 3], 0.5, 0.8).unwrap().reach() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn shape_json_schema() {
        let s: Shape = serde_json::from_str(r#"{"kind":"torus","center":[0,0,0],"r":0.5,"R":2.0}"#).unwrap();
        assert_eq!(s, Shape::torus(vec![0.0; 3], 0.5, 2.0).unwrap());
        let back: Shape = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn embedding_round_trip() {
        let s = 0.5f64.sqrt();
        let e = EmbeddedSpec {
            class1: RepresentativeSpec { balls: vec![], tori: vec![TorusSpec { center: vec![0.0, 0.0], r: 0.4, big_r: 1.0 }], label: 1 },
            class0: RepresentativeSpec { balls: vec![BallSpec { center: vec![4.0, 0.0], r: 0.8 }], tori: vec![], label: 0 },
            rotation: vec![vec![s, 0.0], vec![s, 0.0], vec![0.0, 1.0]],
            offset: vec![1.0, 2.0, 3.0],
            tau_input: 0.4,
            volume_input: None,
        };
        e.validate().unwrap();
        let y = [0.3, -1.2];
        let back = e.pull_back(&e.embed(&y));
        assert!((back[0] - y[0]).abs() < 1e-12 && (back[1] - y[1]).abs() < 1e-12);
        assert!(e.certify_disjoint(200, 3).unwrap() > 1.5);
        let smp = sample_uniform(&e, 300, 9).unwrap();
        let labels = smp.labels.unwrap();
        assert!(labels.iter().any(|&l| l == 0) && labels.iter().any(|&l| l == 1));
    }

    proptest! {
        #[test]
        fn shell_delta_is_monotone(e1 in 0.005f64..0.3, e2 in 0.005f64..0.3, r in 0.3f64..1.5) {
            let b = Shape::ball(vec![0.0, 0.0, 0.0], r).unwrap();
            let m = MeasureSpec::box_around(&[b.clone()], 0.5).unwrap();
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = shell_delta(&b, lo, &m).unwrap();
            let c = shell_delta(&b, hi, &m).unwrap();
            prop_assert!(a.delta <= c.delta);
            prop_assert!(a.delta > 0.0 && c.delta <= r * r);
        }
    }
}
