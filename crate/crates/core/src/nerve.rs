//! Nerve complexes of point clouds, the sample-size bound for homology
//! recovery, and repeated recovery trials.

use crate::error::{input, Error, Result};
use crate::homology::{betti_numbers, BettiVector, Simplex, SimplicialComplex};
use crate::shapes_sampling::{derive_seed, rng_from_seed, unit_ball_volume, RepresentativeSpec, SampleSet};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::path::Path;

/// Relative slack on radius comparisons so that points exactly at the
/// threshold are treated alike by every constructor.
const RADIUS_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<u8>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(first) = points.first() {
            let d = first.len();
            if d == 0 {
                return input("points need at least one coordinate");
            }
            for p in &points {
                if p.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: p.len() });
                }
                if p.iter().any(|x| !x.is_finite()) {
                    return input("point coordinates must be finite");
                }
            }
        }
        if let Some(l) = &labels {
            if l.len() != points.len() {
                return Err(Error::DimensionMismatch { expected: points.len(), got: l.len() });
            }
        }
        Ok(PointCloud { points, labels })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Ambient dimension; 0 for an empty cloud.
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Points carrying `label`.
    pub fn with_label(&self, label: u8) -> PointCloud {
        let Some(l) = &self.labels else {
            return PointCloud::default();
        };
        let points = self.points.iter().zip(l).filter(|(_, &x)| x == label).map(|(p, _)| p.clone()).collect();
        PointCloud { points, labels: None }
    }

    /// CSV with header `x0,...,x{D-1}` and a trailing `label` column when
    /// labels are present.
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("x{i}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        out.write_record(&header)?;
        for (i, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
            if let Some(l) = &self.labels {
                row.push(l[i].to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let has_label = header.iter().last() == Some("label");
        let d = header.len() - usize::from(has_label);
        for (i, h) in header.iter().take(d).enumerate() {
            if h != format!("x{i}") {
                return Err(Error::Parse(format!("unexpected column {h:?}")));
            }
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let p = rec
                .iter()
                .take(d)
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            points.push(p);
            if has_label {
                labels.push(rec[d].trim().parse::<u8>().map_err(|e| Error::Parse(e.to_string()))?);
            }
        }
        PointCloud::new(points, has_label.then_some(labels))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

impl From<SampleSet> for PointCloud {
    fn from(s: SampleSet) -> Self {
        PointCloud { points: s.points, labels: s.labels }
    }
}

/// Smallest enclosing ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    Some(x)
}

/// Ball whose boundary passes through every point of `r`, centred in their
/// affine hull. `None` if the points are affinely dependent.
fn circumball(r: &[&[f64]]) -> Option<Ball> {
    match r.len() {
        0 => None,
        1 => Some(Ball { center: r[0].to_vec(), radius: 0.0 }),
        _ => {
            let p0 = r[0];
            let v: Vec<Vec<f64>> = r[1..].iter().map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect()).collect();
            let k = v.len();
            let mut g: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| 2.0 * dot(&v[i], &v[j])).collect()).collect();
            let mut rhs: Vec<f64> = v.iter().map(|x| dot(x, x)).collect();
            let lam = solve(&mut g, &mut rhs)?;
            let mut center = p0.to_vec();
            for (l, vi) in lam.iter().zip(&v) {
                for (c, x) in center.iter_mut().zip(vi) {
                    *c += l * x;
                }
            }
            let radius = dist2(&center, p0).sqrt();
            Some(Ball { center, radius })
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inside(b: &Ball, p: &[f64]) -> bool {
    dist2(&b.center, p).sqrt() <= b.radius * (1.0 + 1e-10) + 1e-14
}

fn welzl<'a>(p: &[&'a [f64]], r: &mut Vec<&'a [f64]>, dim: usize) -> Option<Ball> {
    if p.is_empty() || r.len() == dim + 1 {
        return circumball(r);
    }
    let (last, rest) = p.split_last().unwrap();
    if let Some(b) = welzl(rest, r, dim) {
        if inside(&b, last) {
            return Some(b);
        }
    }
    if r.iter().any(|q| *q == *last) {
        return welzl(rest, r, dim);
    }
    r.push(last);
    let b = welzl(rest, r, dim);
    r.pop();
    b
}

/// Smallest ball containing `points` (Welzl's algorithm). Returns `None`
/// for an empty input or when rounding leaves only a degenerate support set.
pub fn miniball(points: &[&[f64]]) -> Option<Ball> {
    let dim = points.first()?.len();
    welzl(points, &mut Vec::new(), dim)
}

fn within(radius: f64, r: f64) -> bool {
    radius <= r * (1.0 + RADIUS_TOL)
}

/// Upper-neighbour lists of the graph joining points at distance `<= 2r`.
fn proximity_graph(cloud: &PointCloud, r: f64) -> Vec<Vec<usize>> {
    let pts = cloud.points();
    (0..pts.len())
        .map(|i| (i + 1..pts.len()).filter(|&j| within(dist2(&pts[i], &pts[j]).sqrt() / 2.0, r)).collect())
        .collect()
}

/// Depth-first clique expansion in increasing vertex order, which leaves
/// every level in lexicographic order. `accept` filters simplices of
/// dimension two and up.
fn expand(n: usize, up: &[Vec<usize>], max_dim: usize, accept: &dyn Fn(&[usize]) -> bool) -> SimplicialComplex {
    let mut levels: Vec<Vec<Simplex>> = vec![Vec::new(); max_dim + 1];
    let adj: Vec<HashSet<usize>> = up.iter().map(|l| l.iter().copied().collect()).collect();
    let mut stack: Vec<usize> = Vec::new();
    fn rec(
        sigma: &mut Vec<usize>,
        cand: &[usize],
        levels: &mut Vec<Vec<Simplex>>,
        up: &[Vec<usize>],
        adj: &[HashSet<usize>],
        max_dim: usize,
        accept: &dyn Fn(&[usize]) -> bool,
    ) {
        levels[sigma.len() - 1].push(Simplex::new(sigma.clone()).unwrap());
        if sigma.len() > max_dim {
            return;
        }
        for (k, &v) in cand.iter().enumerate() {
            sigma.push(v);
            if sigma.len() < 3 || accept(sigma) {
                let next: Vec<usize> = cand[k + 1..].iter().copied().filter(|w| adj[v].contains(w)).collect();
                rec(sigma, &next, levels, up, adj, max_dim, accept);
            }
            sigma.pop();
        }
    }
    for v in 0..n {
        stack.clear();
        stack.push(v);
        rec(&mut stack, &up[v], &mut levels, up, &adj, max_dim, accept);
    }
    SimplicialComplex::from_levels(levels)
}

/// Cech complex: simplices whose vertices fit in a ball of radius `r`,
/// equivalently whose radius-`r` balls share a point.
pub fn cech_complex(cloud: &PointCloud, r: f64, max_dim: usize) -> Result<SimplicialComplex> {
    if !(r > 0.0) {
        return input("radius must be positive");
    }
    let pts = cloud.points();
    let up = proximity_graph(cloud, r);
    let accept = |s: &[usize]| {
        let sub: Vec<&[f64]> = s.iter().map(|&i| pts[i].as_slice()).collect();
        miniball(&sub).is_some_and(|b| within(b.radius, r))
    };
    Ok(expand(pts.len(), &up, max_dim, &accept))
}

/// Vietoris-Rips complex: simplices with all pairwise distances `<= 2r`.
pub fn rips_complex(cloud: &PointCloud, r: f64, max_dim: usize) -> Result<SimplicialComplex> {
    if !(r > 0.0) {
        return input("radius must be positive");
    }
    let up = proximity_graph(cloud, r);
    Ok(expand(cloud.len(), &up, max_dim, &|_| true))
}

#[derive(Clone, Copy)]
struct Site {
    pos: spade::Point2<f64>,
    id: usize,
}

impl spade::HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> spade::Point2<f64> {
        self.pos
    }
}

/// Shift applied to the `i`-th repeat of a location before triangulating.
pub const TIE_PERTURBATION: f64 = 1e-9;

fn circumradius(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let ab = (dist2(&a, &b)).sqrt();
    let bc = (dist2(&b, &c)).sqrt();
    let ca = (dist2(&c, &a)).sqrt();
    let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
    if area2 == 0.0 {
        f64::INFINITY
    } else {
        ab * bc * ca / (2.0 * area2)
    }
}

/// Planar Delaunay simplices with their alpha filtration values (radii).
pub fn alpha_filtration_2d(cloud: &PointCloud) -> Result<Vec<(Simplex, f64)>> {
    use spade::{DelaunayTriangulation, Triangulation};
    if cloud.dim() != 2 && !cloud.is_empty() {
        return Err(Error::Precondition(format!("alpha complex needs planar points, got D = {}", cloud.dim())));
    }
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    let mut pos: Vec<[f64; 2]> = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points().iter().enumerate() {
        let mut q = [p[0], p[1]];
        while !seen.insert((q[0].to_bits(), q[1].to_bits())) {
            let s = TIE_PERTURBATION * (i as f64 + 1.0);
            q = [q[0] + s, q[1] + s];
        }
        pos.push(q);
    }
    let mut t: DelaunayTriangulation<Site> = DelaunayTriangulation::new();
    for (id, q) in pos.iter().enumerate() {
        t.insert(Site { pos: spade::Point2::new(q[0], q[1]), id })
            .map_err(|e| Error::Geometry(format!("triangulation failed: {e:?}")))?;
    }
    let mut out: Vec<(Simplex, f64)> = (0..pos.len()).map(|i| (Simplex::new(vec![i]).unwrap(), 0.0)).collect();
    // edge -> (alpha values of adjacent triangles, attached flag)
    let mut edge_info: HashMap<(usize, usize), (f64, bool)> = HashMap::new();
    for f in t.inner_faces() {
        let ids = f.vertices().map(|v| v.data().id);
        let rad = circumradius(pos[ids[0]], pos[ids[1]], pos[ids[2]]);
        out.push((Simplex::new(ids.to_vec()).unwrap(), rad));
        for k in 0..3 {
            let (a, b, c) = (ids[k], ids[(k + 1) % 3], ids[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let mid = [(pos[a][0] + pos[b][0]) / 2.0, (pos[a][1] + pos[b][1]) / 2.0];
            let attached = dist2(&mid, &pos[c]) < dist2(&pos[a], &pos[b]) / 4.0;
            let e = edge_info.entry(key).or_insert((f64::INFINITY, false));
            e.0 = e.0.min(rad);
            e.1 |= attached;
        }
    }
    for e in t.undirected_edges() {
        let [a, b] = e.vertices().map(|v| v.data().id);
        let key = (a.min(b), a.max(b));
        let half = dist2(&pos[a], &pos[b]).sqrt() / 2.0;
        let val = match edge_info.get(&key) {
            Some(&(tri, true)) => tri,
            _ => half,
        };
        out.push((Simplex::new(vec![a, b]).unwrap(), val));
    }
    Ok(out)
}

/// Alpha complex of a planar cloud at radius `r`.
pub fn alpha_complex_2d(cloud: &PointCloud, r: f64) -> Result<SimplicialComplex> {
    if !(r > 0.0) {
        return input("radius must be positive");
    }
    let filt = alpha_filtration_2d(cloud)?;
    SimplicialComplex::from_simplices(filt.into_iter().filter(|(_, v)| within(*v, r)).map(|(s, _)| s))
}

/// Sample-size bound for recovering the homology of a `d`-manifold of
/// volume `vol` and reach `tau` from a union of `eps`-balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBoundReport {
    /// Smallest integer strictly above `bound_value`.
    pub n_required: u64,
    pub bound_value: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub vol: f64,
    pub d: usize,
    pub tau: f64,
    pub eps: f64,
    pub delta: f64,
}

pub fn sample_size_bound(vol: f64, d: usize, tau: f64, eps: f64, delta: f64) -> Result<SampleBoundReport> {
    if !(vol > 0.0) || !vol.is_finite() || d == 0 || !(tau > 0.0) {
        return input("need vol > 0, d >= 1 and tau > 0");
    }
    if !(eps > 0.0 && eps < tau / 2.0) {
        return Err(Error::Precondition(format!("need 0 < eps < tau / 2, got eps = {eps}, tau = {tau}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return input("delta must lie in (0, 1)");
    }
    let theta1 = (eps / (8.0 * tau)).asin();
    let theta2 = (eps / (16.0 * tau)).asin();
    let vb = |rad: f64| unit_ball_volume(d) * rad.powi(d as i32);
    let lambda1 = vol / (theta1.cos().powi(d as i32) * vb(eps / 4.0));
    let lambda2 = vol / (theta2.cos().powi(d as i32) * vb(eps / 8.0));
    let bound_value = lambda1 * (lambda2.ln() + (1.0 / delta).ln());
    if !bound_value.is_finite() || bound_value >= u64::MAX as f64 {
        return input("sample bound overflows");
    }
    let n_required = (bound_value.max(0.0).floor() as u64 + 1).max(1);
    Ok(SampleBoundReport { n_required, bound_value, lambda1, lambda2, theta1, theta2, vol, d, tau, eps, delta })
}

/// What a recovery trial samples from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecoveryTarget {
    /// A circle in the plane, sampled on the curve.
    Circle { center: Vec<f64>, radius: f64 },
    /// A union of solid balls and tori, sampled in the interior.
    Solid { spec: RepresentativeSpec },
}

impl RecoveryTarget {
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            RecoveryTarget::Circle { .. } => 1,
            RecoveryTarget::Solid { spec } => spec.dim(),
        }
    }

    /// Betti numbers `beta_0 ..= beta_d` of the target.
    pub fn betti(&self) -> Vec<usize> {
        let d = self.intrinsic_dim();
        let mut b = match self {
            RecoveryTarget::Circle { .. } => vec![1, 1],
            RecoveryTarget::Solid { spec } => spec.betti(),
        };
        b.resize(d + 1, 0);
        b
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<PointCloud> {
        let mut rng = rng_from_seed(seed);
        match self {
            RecoveryTarget::Circle { center, radius } => {
                if center.len() != 2 || !(*radius > 0.0) {
                    return input("circle needs a planar center and positive radius");
                }
                let pts = (0..n)
                    .map(|_| {
                        let a = rng.random::<f64>() * 2.0 * PI;
                        vec![center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                    })
                    .collect();
                PointCloud::new(pts, None)
            }
            RecoveryTarget::Solid { spec } => Ok(spec.sample_with(n, &mut rng)?.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub n: usize,
    pub r: f64,
    pub betti: BettiVector,
    pub success: bool,
}

impl TrialResult {
    /// CSV header for `width` Betti columns.
    pub fn csv_header(width: usize) -> Vec<String> {
        let mut h = vec!["seed".to_string(), "n".into(), "r".into()];
        h.extend((0..width).map(|k| format!("b{k}")));
        h.push("success".into());
        h
    }

    pub fn csv_row(&self, width: usize) -> Vec<String> {
        let mut row = vec![self.seed.to_string(), self.n.to_string(), self.r.to_string()];
        row.extend((0..width).map(|k| self.betti.get(k).to_string()));
        row.push(self.success.to_string());
        row
    }
}

/// Compares `beta_0 ..= beta_d` of the Cech complex at radius `r` with the
/// expected vector `truth` (length `d + 1`). Simplices go up to dimension
/// `max_dim`, which must be at least `d + 1` for `beta_d` to be exact.
pub fn betti_match(cloud: &PointCloud, r: f64, max_dim: usize, truth: &[usize]) -> Result<(bool, BettiVector)> {
    if cloud.is_empty() {
        return input("empty point cloud");
    }
    let k = cech_complex(cloud, r, max_dim)?;
    let b = betti_numbers(&k)?;
    let ok = truth.iter().enumerate().all(|(i, &t)| b.get(i) == t);
    Ok((ok, b))
}

/// Samples `n` points from `target`, builds the Cech complex at radius `r`
/// with simplices up to dimension `d + 1`, and checks `beta_0 ..= beta_d`.
pub fn homology_recovery_trial(target: &RecoveryTarget, n: usize, r: f64, seed: u64) -> Result<TrialResult> {
    if n == 0 {
        return input("need at least one sample");
    }
    let cloud = target.sample(n, seed)?;
    let d = target.intrinsic_dim();
    let (success, betti) = betti_match(&cloud, r, d + 1, &target.betti())?;
    Ok(TrialResult { seed, n, r, betti, success })
}

/// Independent trials with seeds derived from `master`, run in parallel.
pub fn recovery_trials(target: &RecoveryTarget, n: usize, r: f64, trials: usize, master: u64) -> Result<Vec<TrialResult>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| homology_recovery_trial(target, n, r, derive_seed(master, t)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub trials: usize,
    pub successes: usize,
}

/// Success counts over a grid of radii.
pub fn recovery_sweep(target: &RecoveryTarget, n: usize, radii: &[f64], trials: usize, master: u64) -> Result<Vec<SweepRow>> {
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let res = recovery_trials(target, n, r, trials, derive_seed(master, i as u64))?;
            Ok(SweepRow { r, trials, successes: res.iter().filter(|t| t.success).count() })
        })
        .collect()
}

/// Widest run of consecutive radii whose success rate is at least `rate`.
pub fn widest_successful_interval(rows: &[SweepRow], rate: f64) -> Option<(f64, f64)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (i, row) in rows.iter().enumerate() {
        let ok = row.trials > 0 && row.successes as f64 >= rate * row.trials as f64;
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.is_none_or(|(a, b)| rows[i - 1].r - rows[s].r > rows[b].r - rows[a].r) {
                    best = Some((s, i - 1));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        let e = rows.len() - 1;
        if best.is_none_or(|(a, b)| rows[e].r - rows[s].r > rows[b].r - rows[a].r) {
            best = Some((s, e));
        }
    }
    best.map(|(a, b)| (rows[a].r, rows[b].r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes_sampling::BallSpec;
    use proptest::prelude::*;
    use rand::Rng;

    fn cloud(pts: &[&[f64]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| p.to_vec()).collect(), None).unwrap()
    }

    fn triangle() -> PointCloud {
        cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, 3f64.sqrt() / 2.0]])
    }

    fn random_cloud(seed: u64, n: usize, d: usize) -> PointCloud {
        let mut rng = rng_from_seed(seed);
        PointCloud::new((0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect(), None).unwrap()
    }

    /// Smallest ball through some subset of at most `D + 1` points that
    /// contains all of them.
    fn brute_miniball(pts: &[&[f64]]) -> f64 {
        let n = pts.len();
        let dim = pts[0].len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize > dim + 1 {
                continue;
            }
            let sub: Vec<&[f64]> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pts[i]).collect();
            if let Some(b) = circumball(&sub) {
                if pts.iter().all(|p| dist2(&b.center, p).sqrt() <= b.radius * (1.0 + 1e-9) + 1e-12) {
                    best = best.min(b.radius);
                }
            }
        }
        best
    }

    fn subset(a: &SimplicialComplex, b: &SimplicialComplex) -> bool {
        a.iter().all(|s| b.contains(s))
    }

    #[test]
    fn cech_triangle() {
        let c = triangle();
        let k = cech_complex(&c, 0.55, 2).unwrap();
        assert_eq!((k.count(1), k.count(2)), (3, 0));
        assert_eq!(betti_numbers(&k).unwrap().betti, vec![1, 1]);
        let k = cech_complex(&c, 0.6, 2).unwrap();
        assert_eq!(k.count(2), 1);
        assert_eq!(betti_numbers(&k).unwrap().betti, vec![1, 0, 0]);
        let k = cech_complex(&c, 0.4, 2).unwrap();
        assert_eq!(betti_numbers(&k).unwrap().betti, vec![3]);
        assert!(cech_complex(&c, 0.0, 2).is_err());
    }

    #[test]
    fn rips_triangle() {
        let k = rips_complex(&triangle(), 0.5, 2).unwrap();
        assert_eq!(k.count(2), 1);
        let k = rips_complex(&random_cloud(3, 20, 2), 1e-9, 3).unwrap();
        assert_eq!((k.count(0), k.count(1)), (20, 0));
    }

    #[test]
    fn miniball_known_cases() {
        let t = triangle();
        let pts: Vec<&[f64]> = t.points().iter().map(|p| p.as_slice()).collect();
        assert!((miniball(&pts).unwrap().radius - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        // obtuse triangle: the long side is a diameter
        let o: [&[f64]; 3] = [&[0.0, 0.0], &[2.0, 0.0], &[1.0, 0.1]];
        assert!((miniball(&o).unwrap().radius - 1.0).abs() < 1e-12);
        let dup: [&[f64]; 3] = [&[1.0, 1.0], &[1.0, 1.0], &[3.0, 1.0]];
        assert!((miniball(&dup).unwrap().radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_square_and_circle() {
        let sq = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let k = alpha_complex_2d(&sq, 10.0).unwrap();
        assert_eq!(k.count(2), 2);
        assert_eq!(betti_numbers(&k).unwrap().betti, vec![1, 0, 0]);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 60.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let c = PointCloud::new(pts, None).unwrap();
        let a = betti_numbers(&alpha_complex_2d(&c, 0.25).unwrap()).unwrap();
        let b = betti_numbers(&cech_complex(&c, 0.25, 2).unwrap()).unwrap();
        assert_eq!(a.betti[..2], [1, 1]);
        assert_eq!(b.betti[..2], [1, 1]);
        assert!(alpha_complex_2d(&random_cloud(1, 5, 3), 1.0).is_err());
    }

    #[test]
    fn alpha_handles_duplicates() {
        let c = cloud(&[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let k = alpha_complex_2d(&c, 10.0).unwrap();
        assert_eq!(k.count(0), 4);
        assert_eq!(betti_numbers(&k).unwrap().betti[0], 1);
    }

    #[test]
    fn sample_bound_circle() {
        let rep = sample_size_bound(2.0 * PI, 1, 1.0, 0.4, 0.05).unwrap();
        assert!((rep.theta1 - 0.050020856805770016).abs() < 1e-12);
        assert_eq!(rep.n_required, 225);
        assert!(sample_size_bound(2.0 * PI, 1, 1.0, 0.5, 0.05).is_err());
        assert!(sample_size_bound(2.0 * PI, 1, 1.0, 0.4, 1.0).is_err());
        let echo = (rep.vol, rep.d, rep.tau, rep.eps, rep.delta);
        assert_eq!(echo, (2.0 * PI, 1, 1.0, 0.4, 0.05));
    }

    #[test]
    fn sample_bound_matches_big_float() {
        use astro_float::{BigFloat, Consts, RoundingMode};
        let p = 256;
        let rm = RoundingMode::ToEven;
        let mut cc = Consts::new().unwrap();
        let f = |x: f64| BigFloat::from_f64(x, p);
        for (vol, d, tau, eps, delta) in [(2.0 * PI, 1usize, 1.0, 0.4, 0.05), (12.0, 2, 0.5, 0.1, 0.01), (3.0, 3, 2.0, 0.7, 0.2)] {
            let rep = sample_size_bound(vol, d, tau, eps, delta).unwrap();
            let one = f(1.0);
            let pi = cc.pi(p, rm);
            // unit ball volume by the Gamma-free recurrence V_d = 2 pi / d V_{d-2}
            let mut v = [f(1.0), f(2.0)];
            for k in 2..=d {
                let next = v[k % 2].mul(&pi, p, rm).mul(&f(2.0), p, rm).div(&f(k as f64), p, rm);
                v[k % 2] = next;
            }
            let vball = |rad: f64| v[d % 2].mul(&f(rad).powi(d, p, rm), p, rm);
            let cos_pow = |t: f64| {
                let s = f(t);
                one.sub(&s.mul(&s, p, rm), p, rm).sqrt(p, rm).powi(d, p, rm)
            };
            let l1 = f(vol).div(&cos_pow(eps / (8.0 * tau)).mul(&vball(eps / 4.0), p, rm), p, rm);
            let l2 = f(vol).div(&cos_pow(eps / (16.0 * tau)).mul(&vball(eps / 8.0), p, rm), p, rm);
            let bound = l1.mul(&l2.ln(p, rm, &mut cc).add(&one.div(&f(delta), p, rm).ln(p, rm, &mut cc), p, rm), p, rm);
            let want: f64 = bound.to_string().parse().unwrap();
            assert!((rep.bound_value - want).abs() <= 1e-10 * want, "{} vs {want}", rep.bound_value);
            assert_eq!(rep.n_required, want.floor() as u64 + 1);
        }
    }

    #[test]
    fn sample_bound_monotone() {
        let mut last = u64::MAX;
        for i in 1..40 {
            let n = sample_size_bound(10.0, 2, 1.0, 0.012 * i as f64, 0.05).unwrap().n_required;
            assert!(n <= last);
            last = n;
        }
        let mut last = 0;
        for i in 1..40 {
            let n = sample_size_bound(10.0, 2, 1.0, 0.2, 0.5 / i as f64).unwrap().n_required;
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn circle_recovery() {
        let target = RecoveryTarget::Circle { center: vec![0.0, 0.0], radius: 1.0 };
        let res = recovery_trials(&target, 200, 0.2, 100, 7).unwrap();
        let ok = res.iter().filter(|t| t.success).count();
        assert!(ok >= 95, "{ok} of 100");
        let one = homology_recovery_trial(&target, 1, 0.2, 0).unwrap();
        assert!(!one.success);
        assert_eq!(one.betti.betti, vec![1]);
        let blob = homology_recovery_trial(&target, 30, 10.0, 0).unwrap();
        assert!(!blob.success);
        assert_eq!(blob.betti.betti[..2], [1, 0]);
        assert_eq!(one.csv_row(2), vec!["0", "1", "0.2", "1", "0", "false"]);
    }

    #[test]
    fn solid_recovery_and_sweep() {
        let spec = RepresentativeSpec { balls: vec![BallSpec { center: vec![0.0, 0.0], r: 1.0 }], tori: vec![], label: 1 };
        let target = RecoveryTarget::Solid { spec };
        assert_eq!(target.betti(), vec![1, 0, 0]);
        let rows = recovery_sweep(&target, 40, &[0.01, 0.5, 0.6], 4, 1).unwrap();
        assert_eq!(rows[0].successes, 0);
        let (lo, hi) = widest_successful_interval(&rows, 0.75).unwrap();
        assert_eq!((lo, hi), (0.5, 0.6));
    }

    #[test]
    fn csv_round_trip() {
        let c = PointCloud::new(vec![vec![0.5, -1.25], vec![3.0, 1e-3]], Some(vec![1, 0])).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x0,x1,label\n"));
        assert_eq!(PointCloud::read_csv(buf.as_slice()).unwrap(), c);
        assert_eq!(c.with_label(1).points(), &[vec![0.5, -1.25]]);
        assert!(PointCloud::new(vec![vec![0.0], vec![0.0, 1.0]], None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn welzl_matches_brute_force(seed in any::<u64>(), n in 1usize..7, d in 1usize..4) {
            let c = random_cloud(seed, n, d);
            let pts: Vec<&[f64]> = c.points().iter().map(|p| p.as_slice()).collect();
            let w = miniball(&pts).unwrap();
            for p in &pts {
                prop_assert!(inside(&w, p));
            }
            prop_assert!((w.radius - brute_miniball(&pts)).abs() <= 1e-9);
        }

        #[test]
        fn sandwich_and_monotonicity(seed in any::<u64>(), n in 4usize..25, d in 2usize..4, r in 0.05f64..0.4) {
            let c = random_cloud(seed, n, d);
            let cech = cech_complex(&c, r, 3).unwrap();
            let rips = rips_complex(&c, r, 3).unwrap();
            let wide = cech_complex(&c, 2f64.sqrt() * r, 3).unwrap();
            prop_assert!(cech.validate().is_ok() && rips.validate().is_ok());
            prop_assert!(subset(&cech, &rips));
            prop_assert!(subset(&rips, &wide));
            prop_assert!(subset(&cech, &cech_complex(&c, 1.3 * r, 3).unwrap()));
            prop_assert!(subset(&rips, &rips_complex(&c, 1.3 * r, 3).unwrap()));
        }

        #[test]
        fn alpha_inside_cech(seed in any::<u64>(), n in 3usize..40, r in 0.05f64..0.5) {
            let c = random_cloud(seed, n, 2);
            let a = alpha_complex_2d(&c, r).unwrap();
            prop_assert!(a.validate().is_ok());
            prop_assert!(subset(&a, &cech_complex(&c, r, 2).unwrap()));
            prop_assert!(subset(&a, &alpha_complex_2d(&c, 1.5 * r).unwrap()));
        }
    }
}
