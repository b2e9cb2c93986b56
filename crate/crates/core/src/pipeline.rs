//! End-to-end experiment: sample an embedded two-class problem, recover its
//! topology with a Cech nerve, and classify with `g = h o N_phi o N_p`.

use crate::error::{input, Error, Result};
use crate::homology::{betti_numbers, SimplicialComplex};
use crate::indicator_synth::{representative_network, theoretical_size_bounds, BoundTerm, BoundsInput, TheoreticalBounds};
use crate::nerve::{cech_complex, sample_size_bound, PointCloud, SampleBoundReport};
use crate::shapes_sampling::{
    derive_seed, monte_carlo_mean, rng_from_seed, BallSpec, EmbeddedSpec, MeasureSpec, RepresentativeSpec, RiskEstimate,
    TorusSpec,
};
use crate::simplicial_map::{simplicial_net_size, GeometricComplex, SimplicialMap, VertexMap};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Seed streams derived from the master seed.
const TRAIN_STREAM: u64 = 1;
const TEST_STREAM: u64 = 2;

/// Depth of the network realising the simplicial map.
pub const MAP_NET_DEPTH: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub problem: EmbeddedSpec,
    pub n_train: usize,
    pub nerve_radius: f64,
    pub eps: f64,
    pub delta: f64,
    pub n_risk_samples: usize,
    pub seed: u64,
}

impl PipelineConfig {
    /// Solid annulus (radii 0.5 and 1.5) against a disk of radius 0.75,
    /// rigidly embedded in `R^3`. The reach is 0.5.
    pub fn annulus_vs_disk(seed: u64) -> Self {
        let class1 = RepresentativeSpec {
            balls: vec![],
            tori: vec![TorusSpec { center: vec![0.0, 0.0], r: 0.5, big_r: 1.0 }],
            label: 1,
        };
        let class0 = RepresentativeSpec { balls: vec![BallSpec { center: vec![3.5, 0.0], r: 0.75 }], tori: vec![], label: 0 };
        let problem = EmbeddedSpec {
            class1,
            class0,
            rotation: vec![vec![0.6, 0.0], vec![0.0, 1.0], vec![0.8, 0.0]],
            offset: vec![1.0, -2.0, 0.5],
            tau_input: 0.5,
            volume_input: None,
        };
        PipelineConfig { problem, n_train: 700, nerve_radius: 0.24, eps: 0.1, delta: 0.05, n_risk_samples: 2000, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return input("eps and delta must lie in (0, 1)");
        }
        if !(self.nerve_radius > 0.0 && self.nerve_radius < self.problem.tau_input / 2.0) {
            return Err(Error::Precondition(format!(
                "need 0 < nerve_radius < tau / 2, got {} with tau = {}",
                self.nerve_radius, self.problem.tau_input
            )));
        }
        if self.n_train == 0 {
            return input("n_train must be positive");
        }
        Ok(())
    }
}

/// Topology recovered for one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassRecovery {
    pub label: u8,
    pub n_points: usize,
    /// `beta_0 .. beta_{d-1}` of the shape.
    pub truth: Vec<usize>,
    /// All Betti numbers of the class's nerve (simplices up to dimension d).
    pub betti: Vec<usize>,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub train_seed: u64,
    pub test_seed: u64,
    pub recovery: Vec<ClassRecovery>,
    pub recovery_success: bool,
    pub risk: RiskEstimate,
    /// `risk <= eps + 3 SE`.
    pub risk_success: bool,
    pub success: bool,
    pub h_size: usize,
    pub h_depth: usize,
    /// Size bound of the representative network for the chosen eps.
    pub h_size_bound: f64,
    pub h_within_bound: bool,
    pub projection_size: u64,
    pub projection_depth: usize,
    pub map_size: u64,
    pub map_depth: usize,
    pub g_size_measured: u64,
    pub g_depth: usize,
    pub k_simplices: usize,
    pub l_simplices: usize,
    pub degenerate_simplices: usize,
    /// Whether the Cech complex of the pulled-back points equals K.
    pub pushed_nerve_matches: bool,
    pub theorem2_depth_term: f64,
    pub theorem2_size_terms: Vec<BoundTerm>,
    pub theorem2: TheoreticalBounds,
    pub sample_bound: SampleBoundReport,
    /// False when `n_train` is below the sample bound; the run proceeds anyway.
    pub sample_bound_satisfied: bool,
}

impl PipelineReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Simplices of `k` whose vertices all satisfy `keep`.
fn restrict(k: &SimplicialComplex, keep: &dyn Fn(usize) -> bool) -> Result<SimplicialComplex> {
    SimplicialComplex::from_simplices(k.iter().filter(|s| s.vertices().iter().all(|&v| keep(v))).cloned())
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport> {
    config.validate()?;
    let spec = &config.problem;
    let d = spec.intrinsic_dim();
    let big_d = spec.ambient_dim();
    let train_seed = derive_seed(config.seed, TRAIN_STREAM);
    let test_seed = derive_seed(config.seed, TEST_STREAM);

    // (1) training sample on the embedded shapes
    let sample = spec.sample_with(config.n_train, &mut rng_from_seed(train_seed))?;
    let labels = sample.labels.clone().expect("embedded samples are labelled");
    let cloud = PointCloud::new(sample.points, Some(labels.clone()))?;

    // (2) nerve and per-class recovery; dimension d suffices
    let k = cech_complex(&cloud, config.nerve_radius, d)?;
    let mut recovery = Vec::new();
    for (cls, rep) in [(1u8, &spec.class1), (0u8, &spec.class0)] {
        let sub = restrict(&k, &|v| labels[v] == cls)?;
        let n_points = labels.iter().filter(|&&l| l == cls).count();
        let truth = rep.betti();
        let betti = if sub.is_empty() { vec![] } else { betti_numbers(&sub)?.betti };
        let success = n_points > 0 && (0..d).all(|i| betti.get(i).copied().unwrap_or(0) == truth[i]);
        recovery.push(ClassRecovery { label: cls, n_points, truth, betti, success });
    }
    let recovery_success = recovery.iter().all(|r| r.success);

    // (3) vertex map through the known inverse embedding
    let pushed: Vec<Vec<f64>> = cloud.points().iter().map(|x| spec.pull_back(x)).collect();
    let pushed_cloud = PointCloud::new(pushed.clone(), None)?;
    let pushed_nerve_matches = cech_complex(&pushed_cloud, config.nerve_radius, d)? == k;
    let coords_k: BTreeMap<usize, Vec<f64>> = cloud.points().iter().cloned().enumerate().collect();
    let coords_l: BTreeMap<usize, Vec<f64>> = pushed.into_iter().enumerate().collect();
    let (gk, bad_k) = GeometricComplex::new_lenient(k.clone(), coords_k)?;
    let (gl, _) = GeometricComplex::new_lenient(k, coords_l)?;
    let phi = VertexMap::identity(gk.complex());
    let map = SimplicialMap::new(&gk, &phi, &gl)?;

    // (4) classifier on the representative side
    let measure = MeasureSpec::UniformOnShapes { shapes: spec.all_components() };
    let h = representative_network(&spec.class1, config.eps, &measure)?;

    // (5) risk of g on fresh samples of M, drawn on the representative side
    // and pushed through the embedding
    let g = |y: &[f64]| -> f64 {
        let x = spec.embed(y);
        let z = map.eval(&x).expect("dimensions checked");
        let e = h.network.eval_scalar(&z).expect("dimensions checked") - if spec.class1.contains(y) { 1.0 } else { 0.0 };
        e * e
    };
    let w = monte_carlo_mean(&g, &measure, config.n_risk_samples, test_seed)?;
    let risk = RiskEstimate { mean: w.mean, std_error: w.std_error(), n_samples: config.n_risk_samples, seed: test_seed };
    let risk_success = risk.mean <= config.eps + 3.0 * risk.std_error;

    // (6) accounting against the bounds
    let n = config.n_train as u64;
    let projection_size = n * big_d as u64;
    let projection_depth = (config.n_train.max(1) as f64).log2().ceil() as usize + 1;
    let k_simplices = gk.num_simplices();
    let l_simplices = gl.num_simplices();
    let map_size = simplicial_net_size(big_d as u64, d as u64, k_simplices as u64, l_simplices as u64)?;
    let h_size = h.network.size();
    let h_depth = h.network.depth();
    let g_size_measured = h_size as u64 + map_size + projection_size;
    let g_depth = h_depth + MAP_NET_DEPTH + projection_depth - 2;
    let theorem2 = theoretical_size_bounds(&BoundsInput {
        d,
        ambient_dim: big_d,
        beta: spec.class1.complexity(),
        eps: config.eps,
        tau: spec.tau_input,
        delta: config.delta,
        n_samples: Some(n),
        simplices_k: Some(k_simplices as u64),
        simplices_l: Some(l_simplices as u64),
    })?;
    let sample_bound = sample_size_bound(spec.volume(), d, spec.tau_input, config.nerve_radius, config.delta)?;
    let h_size_bound = h.report.bound.paper_size_bound;

    Ok(PipelineReport {
        config: config.clone(),
        train_seed,
        test_seed,
        recovery,
        recovery_success,
        risk_success,
        success: recovery_success && risk_success,
        risk,
        h_size,
        h_depth,
        h_size_bound,
        h_within_bound: h_size as f64 <= h_size_bound,
        projection_size,
        projection_depth,
        map_size,
        map_depth: MAP_NET_DEPTH,
        g_size_measured,
        g_depth,
        k_simplices,
        l_simplices,
        degenerate_simplices: bad_k.len(),
        pushed_nerve_matches,
        theorem2_depth_term: theorem2.total_depth,
        theorem2_size_terms: theorem2.size_terms.clone(),
        theorem2,
        sample_bound_satisfied: n >= sample_bound.n_required,
        sample_bound,
    })
}

/// `runs` independent pipelines with seeds derived from `config.seed`.
pub fn repeated_pipeline(config: &PipelineConfig, runs: usize) -> Result<Vec<PipelineReport>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| run_pipeline(&PipelineConfig { seed: derive_seed(config.seed, 1000 + i), ..config.clone() }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub beta: usize,
    pub components: usize,
    pub eps_member: f64,
    pub member_size: usize,
    /// Closed-form prediction: member sizes plus the union's threshold and padding.
    pub accounted_size: usize,
    pub measured_size: usize,
    pub depth: usize,
    pub size_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub d: usize,
    pub eps: f64,
    pub seed: u64,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln size` against `ln beta`.
    pub exponent: Option<f64>,
    pub intercept: Option<f64>,
    pub error: Option<String>,
}

/// Radius of each ball in the scaling ladder.
pub const SCALING_RADIUS: f64 = 1.0;

/// Size of a ball network at error `eps`: `d` truncated squares with
/// `ceil(2 r^2 / e) + 1` units each (`e = eps / (2d)`) and a 2-unit ramp.
pub fn ball_units(d: usize, r: f64, eps: f64) -> usize {
    let e = eps / (2.0 * d as f64);
    d * ((2.0 * r * r / e).ceil() as usize + 1) + 2
}

/// Least-squares line through `(x, y)`; `None` unless two distinct `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if x.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Unions of `beta` unit balls in `R^d` (one component per unit of beta),
/// each built with error `eps / beta`. Centres are spaced 3 apart along the
/// first axis with a seeded jitter.
pub fn scaling_experiment(betas: &[usize], eps: f64, d: usize, seed: u64) -> Result<ScalingReport> {
    if betas.is_empty() || betas.contains(&0) || d == 0 {
        return input("need positive betas and d >= 1");
    }
    let rows = betas
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let balls: Vec<BallSpec> = (0..beta)
                .map(|j| {
                    let mut c: Vec<f64> = (0..d).map(|_| rng.random_range(-0.25..0.25)).collect();
                    c[0] += 3.0 * j as f64;
                    BallSpec { center: c, r: SCALING_RADIUS }
                })
                .collect();
            let spec = RepresentativeSpec { balls, tori: vec![], label: 1 };
            let measure = MeasureSpec::box_around(&spec.components(), 0.5)?;
            let net = representative_network(&spec, eps, &measure)?;
            let eps_member = eps / beta as f64;
            let member_size = ball_units(d, SCALING_RADIUS, eps_member);
            Ok(ScalingRow {
                beta,
                components: beta,
                eps_member,
                member_size,
                accounted_size: beta * member_size + 2 + net.report.bound.padding_units,
                measured_size: net.network.size(),
                depth: net.network.depth(),
                size_ratio: net.report.size_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| (r.beta as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.measured_size as f64).ln()).collect();
    let fit = fit_line(&xs, &ys);
    Ok(ScalingReport {
        d,
        eps,
        seed,
        rows,
        exponent: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        error: fit.is_none().then(|| "exponent undefined: need at least two distinct beta values".to_string()),
    })
}

impl ScalingReport {
    /// One `data` row per beta and a final `fit` row.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "kind", "beta", "components", "eps_member", "member_size", "accounted_size", "measured_size", "depth",
            "size_ratio", "exponent", "note",
        ])?;
        for r in &self.rows {
            out.write_record([
                "data".to_string(),
                r.beta.to_string(),
                r.components.to_string(),
                r.eps_member.to_string(),
                r.member_size.to_string(),
                r.accounted_size.to_string(),
                r.measured_size.to_string(),
                r.depth.to_string(),
                r.size_ratio.to_string(),
                String::new(),
                String::new(),
            ])?;
        }
        let mut fit = vec![String::new(); 11];
        fit[0] = "fit".into();
        fit[9] = self.exponent.map(|e| e.to_string()).unwrap_or_default();
        fit[10] = self.error.clone().unwrap_or_default();
        out.write_record(&fit)?;
        out.flush()?;
        Ok(())
    }
}
