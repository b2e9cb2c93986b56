//! Indicator approximations for balls, solid tori and their unions, with
//! itemised size accounting.
//!
//! Every builder assembles its network from the one-dimensional pieces in
//! [`crate::pwl_synth`] using the combinators of [`crate::relu_core`], then
//! reports the measured size and depth next to the closed-form bound.

use crate::error::{input, Error, Result};
use crate::pwl_synth::{threshold_net, truncated_square_net, truncated_sqrt_budget, truncated_sqrt_net, PwlNet, ThresholdDirection};
use crate::relu_core::{PadMode, ReluNetwork};
use crate::simplicial_map::simplicial_net_size;
use crate::shapes_sampling::{shell_delta, MeasureSpec, RepresentativeSpec, Shape, ShellCertificate};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

fn term(name: &str, value: f64) -> BoundTerm {
    BoundTerm { name: name.to_string(), value }
}

/// Size of one sub-network next to the budget it was allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubnetReport {
    pub name: String,
    pub size: usize,
    pub budget: usize,
    pub eps: f64,
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsBudget {
    pub eps: f64,
    /// Share for the sup-norm error of the level-set network.
    pub eps1: f64,
    /// Share for the measure of the shell.
    pub eps2: f64,
    /// Error allowed to each one-dimensional sub-network.
    pub per_subnet: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub constructed_size: usize,
    pub constructed_depth: usize,
    pub paper_size_bound: f64,
    pub paper_depth_bound: usize,
    pub eps_budget: f64,
    pub eps_split: EpsBudget,
    pub delta_shell: f64,
    /// Itemised terms whose sum (plus constants) is `paper_size_bound`.
    pub terms: Vec<BoundTerm>,
    pub subnets: Vec<SubnetReport>,
    /// Units spent padding shallower members to a common depth.
    pub padding_units: usize,
    /// Bound on `sup |L~ - L|` for the level-set network, by propagation of
    /// sub-network errors through Lipschitz constants.
    pub level_error_bound: f64,
    pub shell: Option<ShellCertificate>,
}

#[derive(Clone, Debug)]
pub struct Synthesized {
    pub network: ReluNetwork,
    pub report: BoundReport,
}

/// Closed-form size bound for the ball network: `4 d^2 r^2 / eps + 2 d + 2`.
pub fn ball_size_bound(d: usize, r: f64, eps: f64) -> f64 {
    let d = d as f64;
    4.0 * d * d * r * r / eps + 2.0 * d + 2.0
}

/// Closed-form size bound for the torus network:
/// `(2d / eps) (4 (d-1) (R+r)^2 + 8 r^2 + r / sqrt(R - r)) + 9`.
pub fn torus_size_bound(d: usize, r: f64, big_r: f64, eps: f64) -> f64 {
    let df = d as f64;
    2.0 * df / eps * (4.0 * (df - 1.0) * (big_r + r).powi(2) + 8.0 * r * r + r / (big_r - r).sqrt()) + 9.0
}

/// Affine selector `x -> x_i - c_i` on `R^d`.
fn coordinate(d: usize, i: usize, c: f64) -> Result<ReluNetwork> {
    let mut w = vec![0.0; d];
    w[i] = 1.0;
    ReluNetwork::affine(vec![w], vec![-c])
}

fn lift(net: &PwlNet, d: usize, i: usize, c: f64) -> Result<ReluNetwork> {
    ReluNetwork::compose(&net.network, &coordinate(d, i, c)?)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return input("eps must be positive and finite");
    }
    Ok(())
}

/// Approximate the indicator of the ball `|x - c| <= r` in `R^d`.
///
/// `h1(x) = sum_i min{(x_i - c_i)^2, r^2}` is built coordinate-wise, then a
/// falling ramp on `[r^2 - delta, r^2]` turns it into a 0/1 map. The error
/// splits evenly: `eps / 2` for the level-set approximation and `eps / 2`
/// for the measure of the shell where the ramp is not exact. Depth is 3.
pub fn ball_network(d: usize, r: f64, c: &[f64], eps: f64, measure: &MeasureSpec) -> Result<Synthesized> {
    check_eps(eps)?;
    if d == 0 || c.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c.len() });
    }
    let shape = Shape::ball(c.to_vec(), r)?;
    let (eps1, eps2) = (eps / 2.0, eps / 2.0);
    let e = eps1 / d as f64;
    let sq = truncated_square_net(r, e)?;
    let lifted = (0..d).map(|i| lift(&sq, d, i, c[i])).collect::<Result<Vec<_>>>()?;
    let h1 = ReluNetwork::sum_all(&lifted)?;
    let shell = shell_delta(&shape, eps2, measure)?;
    let ramp = threshold_net(r * r, shell.delta, ThresholdDirection::Falling)?;
    let network = ReluNetwork::compose(&ramp, &h1.network)?;
    let df = d as f64;
    let per_coord_budget = (2.0 * r * r / e + 2.0).floor() as usize;
    let report = BoundReport {
        constructed_size: network.size(),
        constructed_depth: network.depth(),
        paper_size_bound: ball_size_bound(d, r, eps),
        paper_depth_bound: 3,
        eps_budget: eps,
        eps_split: EpsBudget { eps, eps1, eps2, per_subnet: e },
        delta_shell: shell.delta,
        terms: vec![
            term("coordinate_nets", 4.0 * df * df * r * r / eps + 2.0 * df),
            term("threshold", 2.0),
        ],
        subnets: (0..d)
            .map(|i| SubnetReport {
                name: format!("square_{i}"),
                size: sq.network.size(),
                budget: per_coord_budget,
                eps: e,
                error_bound: sq.error_bound,
            })
            .chain(std::iter::once(SubnetReport {
                name: "threshold".into(),
                size: ramp.size(),
                budget: 2,
                eps: 0.0,
                error_bound: 0.0,
            }))
            .collect(),
        padding_units: h1.padding_units,
        level_error_bound: df * sq.error_bound,
        shell: Some(shell),
    };
    Ok(Synthesized { network, report })
}

/// Smallest value of a PWL map with flat ends: attained at a knot.
fn pwl_min(net: &PwlNet) -> f64 {
    let p = &net.pwl;
    p.breakpoints().iter().map(|&x| p.eval(x)).fold(p.anchor_value(), f64::min)
}

/// Approximate the indicator of the solid torus of tube radius `r` around
/// the circle of radius `R` (axis along the last coordinate).
///
/// The level set is
/// `l1(x_d; r) + l1(l2(sum_{i<d} l1(x_i; R + r); R - r, R + r) - R; r)` with
/// `l1(x; g) = min{x^2, g^2}` and `l2(x; a, b) = min{max{sqrt x, a}, b}`.
/// Each of the `d + 2` one-dimensional pieces gets error `eps / (2d)`. The
/// axial term is computed in the first hidden layer and carried forward with
/// one unit per layer, which is exact because it is non-negative. In the
/// plane (`d = 2`) there is no axial term and the shape is an annulus.
/// Depth is 5.
pub fn torus_network(
    d: usize,
    r: f64,
    big_r: f64,
    c: &[f64],
    eps: f64,
    measure: &MeasureSpec,
) -> Result<Synthesized> {
    check_eps(eps)?;
    if d < 2 {
        return input("torus needs d >= 2");
    }
    if c.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: c.len() });
    }
    let shape = Shape::torus(c.to_vec(), r, big_r)?;
    let e = eps / (2.0 * d as f64);
    let planar = if d == 2 { 2 } else { d - 1 };
    let outer = truncated_square_net(big_r + r, e)?;
    let root = truncated_sqrt_net(big_r - r, big_r + r, e)?;
    let tube = truncated_square_net(r, e)?;

    let lifted = (0..planar).map(|i| lift(&outer, d, i, c[i])).collect::<Result<Vec<_>>>()?;
    let radial_sq = ReluNetwork::sum_all(&lifted)?;
    let radial = ReluNetwork::compose(&root.network, &radial_sq.network)?;
    let offset = radial.affine_output(1.0, -big_r)?;
    let ring = ReluNetwork::compose(&tube.network, &offset)?;

    let mut carry_units = 0;
    let mut padding_units = radial_sq.padding_units;
    let level = if d == 2 {
        ring
    } else {
        // knot values are squares; allow for rounding in the slope form
        if pwl_min(&tube) < -1e-12 * r * r {
            return Err(Error::Composition("axial term is not non-negative".into()));
        }
        let axial = lift(&tube, d, d - 1, c[d - 1])?;
        let (carried, cost) = axial.pad_to_depth(ring.depth(), PadMode::NonNegative)?;
        carry_units = cost;
        let sum = ReluNetwork::add(&ring, &carried)?;
        padding_units += sum.padding_units;
        sum.network
    };
    let shell = shell_delta(&shape, eps / 2.0, measure)?;
    let ramp = threshold_net(r * r, shell.delta, ThresholdDirection::Falling)?;
    let network = ReluNetwork::compose(&ramp, &level)?;

    // error propagation: outer squares feed l2 (Lipschitz 1 / (2 sqrt(R - r)))
    // whose output feeds l1(.; r) (Lipschitz 2r)
    let lip2 = 1.0 / (2.0 * (big_r - r).sqrt());
    let mut level_err = 2.0 * r * (planar as f64 * outer.error_bound * lip2 + root.error_bound) + tube.error_bound;
    if d > 2 {
        level_err += tube.error_bound;
    }
    let df = d as f64;
    let table_sq = |g: f64| (4.0 * g * g / e).ceil() as usize + 1;
    let mut subnets: Vec<SubnetReport> = (0..planar)
        .map(|i| SubnetReport {
            name: format!("outer_square_{i}"),
            size: outer.network.size(),
            budget: table_sq(big_r + r),
            eps: e,
            error_bound: outer.error_bound,
        })
        .collect();
    subnets.push(SubnetReport {
        name: "clamped_root".into(),
        size: root.network.size(),
        budget: truncated_sqrt_budget(big_r - r, big_r + r, e),
        eps: e,
        error_bound: root.error_bound,
    });
    subnets.push(SubnetReport {
        name: "tube_square".into(),
        size: tube.network.size(),
        budget: table_sq(r),
        eps: e,
        error_bound: tube.error_bound,
    });
    if d > 2 {
        subnets.push(SubnetReport {
            name: "axial_square".into(),
            size: tube.network.size(),
            budget: table_sq(r),
            eps: e,
            error_bound: tube.error_bound,
        });
        subnets.push(SubnetReport { name: "axial_carry".into(), size: carry_units, budget: 2, eps: 0.0, error_bound: 0.0 });
    }
    subnets.push(SubnetReport { name: "threshold".into(), size: ramp.size(), budget: 2, eps: 0.0, error_bound: 0.0 });
    let report = BoundReport {
        constructed_size: network.size(),
        constructed_depth: network.depth(),
        paper_size_bound: torus_size_bound(d, r, big_r, eps),
        paper_depth_bound: 5,
        eps_budget: eps,
        eps_split: EpsBudget { eps, eps1: df * e, eps2: eps / 2.0, per_subnet: e },
        delta_shell: shell.delta,
        terms: vec![
            term("outer_squares", 2.0 * df / eps * 4.0 * (df - 1.0) * (big_r + r).powi(2)),
            term("tube_squares", 2.0 * df / eps * 8.0 * r * r),
            term("clamped_root", 2.0 * df / eps * r / (big_r - r).sqrt()),
            term("constant", 9.0),
        ],
        subnets,
        padding_units,
        level_error_bound: level_err,
        shell: Some(shell),
    };
    Ok(Synthesized { network, report })
}

/// Ramp width of the rising threshold applied to the sum of members. A
/// member that outputs 1 saturates it; disjoint members pass through as is.
pub const UNION_RAMP: f64 = 1.0;

/// Union of indicator approximations: a rising ramp applied to their sum.
/// Costs two units and one layer on top of the (depth-aligned) members.
pub fn union_network(nets: &[(ReluNetwork, f64)], eps: f64) -> Result<Synthesized> {
    check_eps(eps)?;
    if nets.is_empty() {
        return input("union needs at least one network");
    }
    let total_eps: f64 = nets.iter().map(|(_, e)| e).sum();
    if total_eps > eps * (1.0 + 1e-12) {
        return input(format!("member budgets sum to {total_eps}, above eps = {eps}"));
    }
    let members: Vec<ReluNetwork> = nets.iter().map(|(n, _)| n.clone()).collect();
    let sum = ReluNetwork::sum_all(&members)?;
    let ramp = threshold_net(0.0, UNION_RAMP, ThresholdDirection::Rising)?;
    let network = ReluNetwork::compose(&ramp, &sum.network)?;
    let member_sizes: usize = members.iter().map(|n| n.size()).sum();
    let max_depth = members.iter().map(|n| n.depth()).max().unwrap();
    let report = BoundReport {
        constructed_size: network.size(),
        constructed_depth: network.depth(),
        paper_size_bound: (member_sizes + 2 + sum.padding_units) as f64,
        paper_depth_bound: max_depth + 2,
        eps_budget: eps,
        eps_split: EpsBudget { eps, eps1: total_eps, eps2: 0.0, per_subnet: total_eps / nets.len() as f64 },
        delta_shell: UNION_RAMP,
        terms: vec![
            term("members", member_sizes as f64),
            term("threshold", 2.0),
            term("padding", sum.padding_units as f64),
        ],
        subnets: members
            .iter()
            .enumerate()
            .map(|(i, n)| SubnetReport {
                name: format!("member_{i}"),
                size: n.size(),
                budget: n.size(),
                eps: nets[i].1,
                error_bound: 0.0,
            })
            .collect(),
        padding_units: sum.padding_units,
        level_error_bound: 0.0,
        shell: None,
    };
    Ok(Synthesized { network, report })
}

/// Pairwise union bound for two members: `(s1 + s2 + 2, max(d1, d2) + 2)`.
pub fn union_pair_bound(s1: usize, d1: usize, s2: usize, d2: usize) -> (usize, usize) {
    (s1 + s2 + 2, d1.max(d2) + 2)
}

/// Report for a representative classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeReport {
    pub bound: BoundReport,
    pub components: Vec<BoundReport>,
    pub beta: usize,
    pub dim: usize,
    /// `size / (d^2 beta^2 / eps)`.
    pub size_ratio: f64,
    pub overlap_flag: bool,
}

#[derive(Clone, Debug)]
pub struct RepresentativeNet {
    pub network: ReluNetwork,
    pub report: RepresentativeReport,
}

/// Classifier for a union of `m` balls and tori: every member is built with
/// error `eps / m` and the members are joined by [`union_network`].
pub fn representative_network(spec: &RepresentativeSpec, eps: f64, measure: &MeasureSpec) -> Result<RepresentativeNet> {
    check_eps(eps)?;
    spec.validate()?;
    let comps = spec.components();
    let m = comps.len();
    let eps_i = eps / m as f64;
    let d = spec.dim();
    let mut members = Vec::with_capacity(m);
    let mut reports = Vec::with_capacity(m);
    let mut paper_members = 0.0;
    for c in &comps {
        let s = match c {
            Shape::Ball(b) => ball_network(d, b.r, &b.center, eps_i, measure)?,
            Shape::Torus(t) => torus_network(d, t.r, t.big_r, &t.center, eps_i, measure)?,
        };
        paper_members += s.report.paper_size_bound;
        members.push((s.network, eps_i));
        reports.push(s.report);
    }
    let u = union_network(&members, eps)?;
    let beta = spec.complexity();
    let mut bound = u.report;
    let member_depth = reports.iter().map(|r| r.paper_depth_bound).max().unwrap();
    bound.paper_size_bound = paper_members + 2.0 + bound.padding_units as f64;
    bound.paper_depth_bound = member_depth + 2;
    bound.terms = vec![
        term("members", paper_members),
        term("threshold", 2.0),
        term("padding", bound.padding_units as f64),
    ];
    let scale = (d * d * beta * beta) as f64 / eps;
    let report = RepresentativeReport {
        size_ratio: u.network.size() as f64 / scale,
        bound,
        components: reports,
        beta,
        dim: d,
        overlap_flag: spec.may_overlap(),
    };
    Ok(RepresentativeNet { network: u.network, report })
}

/// Inputs of the closed-form size/depth terms for the full classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsInput {
    pub d: usize,
    #[serde(rename = "D")]
    pub ambient_dim: usize,
    pub beta: usize,
    pub eps: f64,
    pub tau: f64,
    pub delta: f64,
    /// Number of samples; enables the projection-network terms.
    #[serde(default)]
    pub n_samples: Option<u64>,
    /// Simplex counts of the two complexes; enables the simplicial-map term.
    #[serde(default)]
    pub simplices_k: Option<u64>,
    #[serde(default)]
    pub simplices_l: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    pub input: BoundsInput,
    pub size_terms: Vec<BoundTerm>,
    pub depth_terms: Vec<BoundTerm>,
    pub total_size: f64,
    pub total_depth: f64,
}

/// Depth and size terms of the full classifier (natural logarithms).
pub fn theoretical_size_bounds(inp: &BoundsInput) -> Result<TheoreticalBounds> {
    check_eps(inp.eps)?;
    if inp.d == 0 || inp.ambient_dim < inp.d {
        return input("need 1 <= d <= D");
    }
    if inp.beta == 0 {
        return input("beta must be positive");
    }
    if !(inp.tau > 0.0 && inp.tau < 1.0) {
        return input("tau must lie in (0, 1)");
    }
    if !(inp.delta > 0.0 && inp.delta < 1.0) {
        return input("delta must lie in (0, 1)");
    }
    let d = inp.d as f64;
    let big_d = inp.ambient_dim as f64;
    let beta = inp.beta as f64;
    let log_inv = (1.0 / (inp.tau * inp.delta)).ln();
    let mut size_terms = vec![
        term("topology", d * d * beta * beta / inp.eps),
        term("simplicial_complex", inp.tau.powf(-d * d / 2.0) * log_inv.powf(d / 2.0)),
        term("projection", big_d * inp.tau.powf(-d) * log_inv),
    ];
    let mut depth_terms = vec![
        term("topology", beta.ln()),
        term("reach", d * (1.0 / inp.tau).ln()),
        term("confidence", log_inv.ln()),
    ];
    if let (Some(k), Some(l)) = (inp.simplices_k, inp.simplices_l) {
        size_terms.push(term(
            "simplicial_map_network",
            simplicial_net_size(inp.ambient_dim as u64, inp.d as u64, k, l)? as f64,
        ));
        depth_terms.push(term("simplicial_map_network", 3.0));
    }
    if let Some(n) = inp.n_samples {
        size_terms.push(term("projection_network", n as f64 * big_d));
        depth_terms.push(term("projection_network", (n.max(1) as f64).log2().ceil() + 1.0));
    }
    let total_size = size_terms[..3].iter().map(|t| t.value).sum();
    let total_depth = depth_terms[..3].iter().map(|t| t.value).sum();
    Ok(TheoreticalBounds { input: inp.clone(), size_terms, depth_terms, total_size, total_depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes_sampling::{monte_carlo_risk, BallSpec, Problem, TorusSpec};
    use proptest::prelude::*;

    fn box_measure(d: usize, half: f64) -> MeasureSpec {
        MeasureSpec::uniform_box(vec![-half; d], vec![half; d]).unwrap()
    }

    #[test]
    fn ball_example() {
        let s = ball_network(2, 1.0, &[0.0, 0.0], 0.1, &box_measure(2, 2.0)).unwrap();
        assert!(s.network.size() <= 166);
        assert_eq!(s.network.depth(), 3);
        assert!((s.network.eval_scalar(&[0.0, 0.0]).unwrap() - 1.0).abs() <= 0.01);
        assert!(s.network.eval_scalar(&[1.5, 0.0]).unwrap().abs() <= 1e-12);
        assert!(ball_network(2, 1.0, &[0.0, 0.0], 0.0, &box_measure(2, 2.0)).is_err());
    }

    #[test]
    fn ball_centering() {
        let c = [3.0, -1.0];
        let m = MeasureSpec::uniform_box(vec![1.0, -3.0], vec![5.0, 1.0]).unwrap();
        let s = ball_network(2, 1.0, &c, 0.1, &m).unwrap();
        assert!((s.network.eval_scalar(&c).unwrap() - 1.0).abs() <= 0.01);
        assert!(s.network.eval_scalar(&[0.0, 0.0]).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn torus_example() {
        let s = torus_network(3, 0.5, 2.0, &[0.0; 3], 0.2, &box_measure(3, 3.0)).unwrap();
        assert!(s.network.size() <= 1582);
        assert!(s.network.size() as f64 <= s.report.paper_size_bound);
        assert_eq!(s.network.depth(), 5);
        assert!(s.network.eval_scalar(&[2.0, 0.0, 0.0]).unwrap() >= 0.99);
        assert!(s.network.eval_scalar(&[0.0, 0.0, 0.0]).unwrap().abs() <= 1e-9);
        assert!(torus_network(3, 1.0, 1.0, &[0.0; 3], 0.2, &box_measure(3, 3.0)).is_err());
        for sub in &s.report.subnets {
            assert!(sub.size <= sub.budget, "{sub:?}");
        }
    }

    #[test]
    fn annulus_network() {
        let s = torus_network(2, 0.5, 1.0, &[0.0, 0.0], 0.1, &box_measure(2, 2.0)).unwrap();
        assert_eq!(s.network.depth(), 5);
        assert!(s.network.size() as f64 <= s.report.paper_size_bound);
        assert!(s.network.eval_scalar(&[1.0, 0.0]).unwrap() >= 0.99);
        assert!(s.network.eval_scalar(&[0.0, 0.0]).unwrap().abs() <= 1e-9);
        assert!(s.network.eval_scalar(&[0.0, 1.8]).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn union_requires_members() {
        assert!(union_network(&[], 0.1).is_err());
    }

    #[test]
    fn union_with_zero_network() {
        let b = ball_network(2, 1.0, &[0.0, 0.0], 0.1, &box_measure(2, 2.0)).unwrap();
        let z = ReluNetwork::zero(2, 3).unwrap();
        let u = union_network(&[(b.network.clone(), 0.05), (z.clone(), 0.05)], 0.1).unwrap();
        assert_eq!(u.network.size(), b.network.size() + z.size() + 2);
        for i in 0..=40 {
            for j in 0..=40 {
                let x = [-2.0 + 0.1 * i as f64, -2.0 + 0.1 * j as f64];
                let want = b.network.eval_scalar(&x).unwrap().clamp(0.0, 1.0);
                assert!((u.network.eval_scalar(&x).unwrap() - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn single_ball_representative() {
        let spec = RepresentativeSpec { balls: vec![BallSpec { center: vec![0.0, 0.0], r: 1.0 }], tori: vec![], label: 1 };
        let m = box_measure(2, 2.0);
        let rep = representative_network(&spec, 0.1, &m).unwrap();
        let b = ball_network(2, 1.0, &[0.0, 0.0], 0.1, &m).unwrap();
        assert_eq!(rep.network.size(), b.network.size() + 2);
        assert_eq!(rep.report.beta, 1);
        for x in [[0.0, 0.0], [0.5, 0.5], [0.99, 0.0], [1.5, 1.5]] {
            let want = b.network.eval_scalar(&x).unwrap().clamp(0.0, 1.0);
            assert!((rep.network.eval_scalar(&x).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn mixed_representative_pads_and_flags() {
        let spec = RepresentativeSpec {
            balls: vec![BallSpec { center: vec![5.0, 0.0, 0.0], r: 1.0 }],
            tori: vec![TorusSpec { center: vec![0.0; 3], r: 0.5, big_r: 2.0 }],
            label: 1,
        };
        let m = MeasureSpec::box_around(&spec.components(), 0.5).unwrap();
        let rep = representative_network(&spec, 0.2, &m).unwrap();
        assert_eq!(rep.network.depth(), 6);
        assert!(!rep.report.overlap_flag);
        assert_eq!(rep.report.bound.padding_units, 4);
        assert!(rep.network.size() as f64 <= rep.report.bound.paper_size_bound.ceil());
        assert_eq!(rep.report.beta, 3);
        let touching = RepresentativeSpec {
            balls: vec![BallSpec { center: vec![2.0, 0.0, 0.0], r: 1.0 }],
            ..spec
        };
        let m = MeasureSpec::box_around(&touching.components(), 0.5).unwrap();
        assert!(representative_network(&touching, 0.2, &m).unwrap().report.overlap_flag);
    }

    #[test]
    fn risk_of_ball_network_is_within_budget() {
        let m = box_measure(2, 2.0);
        let eps = 0.05;
        let s = ball_network(2, 1.0, &[0.0, 0.0], eps, &m).unwrap();
        let spec = RepresentativeSpec { balls: vec![BallSpec { center: vec![0.0, 0.0], r: 1.0 }], tori: vec![], label: 1 };
        let p = Problem { class1: spec, class0: RepresentativeSpec { balls: vec![], tori: vec![], label: 0 }, measure: m };
        let net = &s.network;
        let h = |x: &[f64]| net.eval_scalar(x).unwrap();
        let r = monte_carlo_risk(&h, &p, 20_000, 1).unwrap();
        assert!(r.mean <= eps + 3.0 * r.std_error);
    }

    #[test]
    fn theoretical_terms() {
        let mut inp = BoundsInput {
            d: 2,
            ambient_dim: 3,
            beta: 1,
            eps: 0.1,
            tau: 0.5,
            delta: 0.05,
            n_samples: Some(100),
            simplices_k: Some(10),
            simplices_l: Some(8),
        };
        let t = theoretical_size_bounds(&inp).unwrap();
        assert_eq!(t.depth_terms[0].value, 0.0);
        let map = t.size_terms.iter().find(|x| x.name == "simplicial_map_network").unwrap();
        assert_eq!(map.value, 69.0);
                inp.tau = 1.5;
        assert!(theoretical_size_bounds(&inp).is_err());
    }

    #[test]
    fn torus_risk_within_budget() {
        let m = box_measure(3, 3.0);
        let eps = 0.2;
        let s = torus_network(3, 0.5, 2.0, &[0.0; 3], eps, &m).unwrap();
        let class1 = RepresentativeSpec { balls: vec![], tori: vec![TorusSpec { center: vec![0.0; 3], r: 0.5, big_r: 2.0 }], label: 1 };
        let p = Problem { class1, class0: RepresentativeSpec { balls: vec![], tori: vec![], label: 0 }, measure: m };
        let net = &s.network;
        let r = monte_carlo_risk(&|x: &[f64]| net.eval_scalar(x).unwrap(), &p, 20_000, 2).unwrap();
        assert!(r.mean <= eps + 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn two_ball_union_size_and_risk() {
        let m = box_measure(2, 3.0);
        let a = ball_network(2, 1.0, &[-1.5, 0.0], 0.05, &m).unwrap();
        let b = ball_network(2, 1.0, &[1.5, 0.0], 0.05, &m).unwrap();
        let u = union_network(&[(a.network.clone(), 0.05), (b.network.clone(), 0.05)], 0.1).unwrap();
        let (s, dep) = union_pair_bound(a.network.size(), 3, b.network.size(), 3);
        assert_eq!(u.network.size(), s);
        assert!(u.network.depth() <= dep);
        let class1 = RepresentativeSpec {
            balls: vec![BallSpec { center: vec![-1.5, 0.0], r: 1.0 }, BallSpec { center: vec![1.5, 0.0], r: 1.0 }],
            tori: vec![],
            label: 1,
        };
        let p = Problem { class1, class0: RepresentativeSpec { balls: vec![], tori: vec![], label: 0 }, measure: m };
        let net = &u.network;
        let r = monte_carlo_risk(&|x: &[f64]| net.eval_scalar(x).unwrap(), &p, 20_000, 3).unwrap();
        assert!(r.mean <= 0.1 + 3.0 * r.std_error);
    }

    #[test]
    fn two_ball_representative_matches_composition() {
        let spec = RepresentativeSpec {
            balls: vec![BallSpec { center: vec![-2.0, 0.0], r: 1.0 }, BallSpec { center: vec![2.0, 0.0], r: 1.0 }],
            tori: vec![],
            label: 1,
        };
        let m = MeasureSpec::box_around(&spec.components(), 0.5).unwrap();
        let rep = representative_network(&spec, 0.1, &m).unwrap();
        let s = ball_network(2, 1.0, &[-2.0, 0.0], 0.05, &m).unwrap().network.size();
        assert_eq!(rep.network.size(), 2 * s + 2);
    }

    #[test]
    fn size_ratio_stable_in_beta() {
        let eps = 0.1;
        let ratios: Vec<f64> = [2usize, 4, 8]
            .iter()
            .map(|&b| {
                let balls = (0..b).map(|i| BallSpec { center: vec![3.0 * i as f64, 0.0], r: 1.0 }).collect();
                let spec = RepresentativeSpec { balls, tori: vec![], label: 1 };
                let m = MeasureSpec::box_around(&spec.components(), 0.5).unwrap();
                representative_network(&spec, eps, &m).unwrap().report.size_ratio
            })
            .collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi / lo <= 2.0, "{ratios:?}");
    }

    fn big_eval(inp: &BoundsInput) -> Vec<f64> {
        use astro_float::{BigFloat, Consts, RoundingMode};
        let p = 256;
        let rm = RoundingMode::ToEven;
        let mut cc = Consts::new().unwrap();
        let f = |x: f64| BigFloat::from_f64(x, p);
        let to_f64 = |x: &BigFloat| x.to_string().parse::<f64>().unwrap();
        let d = f(inp.d as f64);
        let big_d = f(inp.ambient_dim as f64);
        let beta = f(inp.beta as f64);
        let one = f(1.0);
        let tau = f(inp.tau);
        let td = tau.mul(&f(inp.delta), p, rm);
        let log_inv = one.div(&td, p, rm).ln(p, rm, &mut cc);
        let inv_tau = one.div(&tau, p, rm);
        let topo = d.mul(&d, p, rm).mul(&beta, p, rm).mul(&beta, p, rm).div(&f(inp.eps), p, rm);
        let half_d = d.div(&f(2.0), p, rm);
        let cx = inv_tau
            .pow(&d.mul(&half_d, p, rm), p, rm, &mut cc)
            .mul(&log_inv.pow(&half_d, p, rm, &mut cc), p, rm);
        let proj = big_d.mul(&inv_tau.pow(&d, p, rm, &mut cc), p, rm).mul(&log_inv, p, rm);
        let depth = beta
            .ln(p, rm, &mut cc)
            .add(&d.mul(&inv_tau.ln(p, rm, &mut cc), p, rm), p, rm)
            .add(&log_inv.ln(p, rm, &mut cc), p, rm);
        vec![to_f64(&topo), to_f64(&cx), to_f64(&proj), to_f64(&depth)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn bounds_match_big_float(
            d in 1usize..6, extra in 0usize..10, beta in 1usize..50,
            eps in 0.001f64..1.0, tau in 0.01f64..0.99, delta in 0.001f64..0.5,
        ) {
            let inp = BoundsInput {
                d, ambient_dim: d + extra, beta, eps, tau, delta,
                n_samples: None, simplices_k: None, simplices_l: None,
            };
            let t = theoretical_size_bounds(&inp).unwrap();
            let want = big_eval(&inp);
            let got = [t.size_terms[0].value, t.size_terms[1].value, t.size_terms[2].value, t.total_depth];
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-10 * w.abs().max(1.0), "{} vs {}", g, w);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn outputs_in_unit_interval_with_margins(r in 0.3f64..1.5, eps in 0.05f64..0.3, seed in 0u64..1000) {
            let m = box_measure(2, 2.0 * r);
            let s = ball_network(2, r, &[0.0, 0.0], eps, &m).unwrap();
            let delta = s.report.delta_shell;
            let mut rng = crate::shapes_sampling::rng_from_seed(seed);
            use rand::Rng;
            for _ in 0..200 {
                let x = [rng.random_range(-3.0 * r..3.0 * r), rng.random_range(-3.0 * r..3.0 * r)];
                let y = s.network.eval_scalar(&x).unwrap();
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&y));
                let q = x[0] * x[0] + x[1] * x[1];
                // margin in level-set units: sup error of h1 plus the ramp width
                let err = s.report.level_error_bound;
                if q >= r * r + err {
                    prop_assert!(y <= 0.01);
                }
                if q <= r * r - delta - err {
                    prop_assert!(y >= 0.99);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn ball_bounds_hold(d in 1usize..5, r in 0.2f64..2.0, eps in 0.02f64..0.5) {
            let shape = Shape::ball(vec![0.0; d], r).unwrap();
            let m = MeasureSpec::box_around(&[shape], 0.5).unwrap();
            let s = ball_network(d, r, &vec![0.0; d], eps, &m).unwrap();
            prop_assert_eq!(s.network.depth(), 3);
            prop_assert!(s.network.size() as f64 <= ball_size_bound(d, r, eps));
            prop_assert!(s.report.level_error_bound <= eps / 2.0);
        }

        #[test]
        fn torus_bounds_hold(d in 2usize..5, r in 0.2f64..1.5, gap in 0.1f64..2.0, eps in 0.02f64..0.5) {
            let big_r = r + gap;
            let shape = Shape::torus(vec![0.0; d], r, big_r).unwrap();
            let m = MeasureSpec::box_around(&[shape], 0.5).unwrap();
            let s = torus_network(d, r, big_r, &vec![0.0; d], eps, &m).unwrap();
            prop_assert_eq!(s.network.depth(), 5);
            prop_assert!(s.network.size() as f64 <= torus_size_bound(d, r, big_r, eps));
            for sub in &s.report.subnets {
                prop_assert!(sub.size <= sub.budget);
            }
        }
    }
}
