//! Exact ReLU realisation of one-dimensional piecewise-linear functions and
//! interpolating approximations of Lipschitz functions built on top of it.

use crate::error::{input, Error, Result};
use crate::relu_core::{Activation, AffineLayer, ReluNetwork};
use serde::{Deserialize, Serialize};

/// Continuous piecewise-linear function on the real line.
///
/// `slopes[0]` is the slope left of the first breakpoint and `slopes[p-1]`
/// right of the last one. `anchor_value` is `f(breakpoints[0])`, or `f(0)`
/// when there are no breakpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PwlWire", into = "PwlWire")]
pub struct PiecewiseLinear1D {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    anchor_value: f64,
}

#[derive(Serialize, Deserialize)]
struct PwlWire {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    anchor_value: f64,
}

impl TryFrom<PwlWire> for PiecewiseLinear1D {
    type Error = Error;
    fn try_from(w: PwlWire) -> Result<Self> {
        PiecewiseLinear1D::new(w.breakpoints, w.slopes, w.anchor_value)
    }
}

impl From<PiecewiseLinear1D> for PwlWire {
    fn from(p: PiecewiseLinear1D) -> Self {
        PwlWire { breakpoints: p.breakpoints, slopes: p.slopes, anchor_value: p.anchor_value }
    }
}

impl PiecewiseLinear1D {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, anchor_value: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::DimensionMismatch { expected: breakpoints.len() + 1, got: slopes.len() });
        }
        if breakpoints.iter().chain(&slopes).any(|v| !v.is_finite()) || !anchor_value.is_finite() {
            return input("piecewise-linear parameters must be finite");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return input("breakpoints must be strictly increasing");
        }
        Ok(PiecewiseLinear1D { breakpoints, slopes, anchor_value })
    }

    /// Interpolant through `(xs[i], ys[i])`, constant outside `[xs[0], xs[n-1]]`.
    pub fn from_knots(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return input("knot arrays must be non-empty and of equal length");
        }
        if xs.len() == 1 {
            return PiecewiseLinear1D::new(vec![], vec![0.0], ys[0]);
        }
        let mut slopes = vec![0.0];
        for i in 0..xs.len() - 1 {
            slopes.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        slopes.push(0.0);
        PiecewiseLinear1D::new(xs.to_vec(), slopes, ys[0])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn anchor_value(&self) -> f64 {
        self.anchor_value
    }

    pub fn pieces(&self) -> usize {
        self.slopes.len()
    }

    pub fn has_flat_end(&self) -> bool {
        self.slopes[0] == 0.0 || *self.slopes.last().unwrap() == 0.0
    }

    /// Hidden units the realisation is allowed to use: `p`, or `p - 1` with a
    /// flat end. A single piece needs one unit if constant and two otherwise,
    /// since a two-layer net has no skip connection for a linear term.
    pub fn node_budget(&self) -> usize {
        let p = self.pieces();
        if p == 1 {
            return if self.slopes[0] == 0.0 { 1 } else { 2 };
        }
        if self.has_flat_end() {
            p - 1
        } else {
            p
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.breakpoints.is_empty() {
            return self.anchor_value + self.slopes[0] * x;
        }
        let b = &self.breakpoints;
        if x <= b[0] {
            return self.anchor_value + self.slopes[0] * (x - b[0]);
        }
        let mut v = self.anchor_value;
        for j in 0..b.len() {
            let right = if j + 1 < b.len() { b[j + 1] } else { f64::INFINITY };
            if x <= right {
                return v + self.slopes[j + 1] * (x - b[j]);
            }
            v += self.slopes[j + 1] * (right - b[j]);
        }
        unreachable!()
    }

    fn mirrored(&self) -> PiecewiseLinear1D {
        // g(u) = f(-u)
        let bps: Vec<f64> = self.breakpoints.iter().rev().map(|b| -b).collect();
        let slopes: Vec<f64> = self.slopes.iter().rev().map(|s| -s).collect();
        let anchor = if self.breakpoints.is_empty() {
            self.anchor_value
        } else {
            self.eval(*self.breakpoints.last().unwrap())
        };
        PiecewiseLinear1D { breakpoints: bps, slopes, anchor_value: anchor }
    }
}

/// One hidden unit `coef * relu(sign * x - shift)`.
#[derive(Clone, Copy, Debug)]
struct Unit {
    sign: f64,
    shift: f64,
    coef: f64,
}

/// Write `f` as `bias + sum coef_k relu(sign_k x - shift_k)`.
fn expansion(f: &PiecewiseLinear1D) -> (f64, Vec<Unit>) {
    if f.breakpoints.is_empty() {
        let s = f.slopes[0];
        if s == 0.0 {
            return (f.anchor_value, vec![]);
        }
        return (
            f.anchor_value,
            vec![Unit { sign: 1.0, shift: 0.0, coef: s }, Unit { sign: -1.0, shift: 0.0, coef: -s }],
        );
    }
    let left_flat = f.slopes[0] == 0.0;
    let right_flat = *f.slopes.last().unwrap() == 0.0;
    if right_flat && !left_flat {
        let (bias, units) = expansion(&f.mirrored());
        return (bias, units.into_iter().map(|u| Unit { sign: -u.sign, ..u }).collect());
    }
    let b = &f.breakpoints;
    let mut units = Vec::with_capacity(b.len() + 1);
    if f.slopes[0] != 0.0 {
        units.push(Unit { sign: -1.0, shift: -b[0], coef: -f.slopes[0] });
    }
    for j in 0..b.len() {
        let c = if j == 0 { f.slopes[1] } else { f.slopes[j + 1] - f.slopes[j] };
        if c != 0.0 {
            units.push(Unit { sign: 1.0, shift: b[j], coef: c });
        }
    }
    (f.anchor_value, units)
}

/// Depth-2 network that reproduces `f` exactly (up to rounding).
pub fn pwl_to_network(f: &PiecewiseLinear1D) -> Result<ReluNetwork> {
    let (bias, mut units) = expansion(f);
    if units.is_empty() {
        // keep depth 2 for a constant: one dead unit
        units.push(Unit { sign: 0.0, shift: 0.0, coef: 0.0 });
    }
    let h = units.len();
    let hidden = AffineLayer::from_flat(
        h,
        1,
        units.iter().map(|u| u.sign).collect(),
        units.iter().map(|u| -u.shift).collect(),
        Activation::Relu,
    )?;
    let out = AffineLayer::from_flat(1, h, units.iter().map(|u| u.coef).collect(), vec![bias], Activation::Identity)?;
    ReluNetwork::new(1, vec![hidden, out])
}

/// A synthesised scalar network together with the function it realises
/// exactly and a bound on its distance to the target.
#[derive(Clone, Debug)]
pub struct PwlNet {
    pub network: ReluNetwork,
    pub pwl: PiecewiseLinear1D,
    /// Upper bound on the sup-norm distance to the approximated function.
    pub error_bound: f64,
    /// Number of interpolation segments.
    pub segments: usize,
}

const MAX_SEGMENTS: usize = 50_000_000;

fn segment_count(raw: f64) -> Result<usize> {
    if !raw.is_finite() || raw > MAX_SEGMENTS as f64 {
        return input(format!("interpolation needs {raw} segments, above the supported limit"));
    }
    Ok((raw.ceil() as usize).max(1))
}

/// Interpolate an `lip`-Lipschitz `f` at `m = ceil(lip (b - a) / eps)` equal
/// segments of `[a, b]`, constant outside. At most `m + 1` hidden units.
pub fn lipschitz_to_network(f: &dyn Fn(f64) -> f64, lip: f64, a: f64, b: f64, eps: f64) -> Result<PwlNet> {
    if !(eps > 0.0) {
        return input("eps must be positive");
    }
    if !(lip >= 0.0) || !lip.is_finite() {
        return input("Lipschitz constant must be finite and non-negative");
    }
    if !(a < b) {
        return input("need a < b");
    }
    let m = segment_count(lip * (b - a) / eps)?;
    let h = (b - a) / m as f64;
    let xs: Vec<f64> = (0..=m).map(|j| if j == m { b } else { a + h * j as f64 }).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let pwl = PiecewiseLinear1D::from_knots(&xs, &ys)?;
    let network = pwl_to_network(&pwl)?;
    // a chord of an L-Lipschitz function stays within L h / 2 of it
    Ok(PwlNet { network, pwl, error_bound: lip * h / 2.0, segments: m })
}

/// `min{x^2, r^2}` within `eps`, using at most `2 r^2 / eps + 2` units.
///
/// Equal segments on `[-r, r]`; the chord error of an `L`-Lipschitz function
/// over a segment of length `h` is at most `L h / 2`, so `ceil(2 r^2 / eps)`
/// segments suffice.
pub fn truncated_square_net(r: f64, eps: f64) -> Result<PwlNet> {
    if !(r > 0.0) || !r.is_finite() {
        return input("r must be positive");
    }
    if !(eps > 0.0) {
        return input("eps must be positive");
    }
    let m = segment_count(2.0 * r * r / eps)?;
    let h = 2.0 * r / m as f64;
    let xs: Vec<f64> = (0..=m).map(|j| if j == m { r } else { -r + h * j as f64 }).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| (x * x).min(r * r)).collect();
    let pwl = PiecewiseLinear1D::from_knots(&xs, &ys)?;
    let network = pwl_to_network(&pwl)?;
    // exact chord error of x^2 over a segment of length h
    Ok(PwlNet { network, pwl, error_bound: h * h / 4.0, segments: m })
}

/// Unit budget for the clamped square root, `ceil((g2 - g1) / (2 eps sqrt(g1))) + 1`.
pub fn truncated_sqrt_budget(g1: f64, g2: f64, eps: f64) -> usize {
    ((g2 - g1) / (2.0 * eps * g1.sqrt())).ceil() as usize + 1
}

/// `min{max{sqrt(x), g1}, g2}` within `eps`.
///
/// Knots sit at `x_j = y_j^2` with `y_j` equally spaced on `[g1, g2]`. With
/// spacing `s` the chord error on the first (worst) segment is
/// `s^2 / (4 (2 g1 + s))`, which fixes the largest admissible `s`.
pub fn truncated_sqrt_net(g1: f64, g2: f64, eps: f64) -> Result<PwlNet> {
    if !(g1 > 0.0) || !(g2 > g1) || !g2.is_finite() {
        return input("need 0 < g1 < g2");
    }
    if !(eps > 0.0) {
        return input("eps must be positive");
    }
    let chord_err = |s: f64| s * s / (4.0 * (2.0 * g1 + s));
    let s_max = 2.0 * eps + (4.0 * eps * eps + 8.0 * eps * g1).sqrt();
    let mut m = segment_count((g2 - g1) / s_max)?;
    while chord_err((g2 - g1) / m as f64) > eps {
        m += 1;
    }
    let s = (g2 - g1) / m as f64;
    let ys: Vec<f64> = (0..=m).map(|j| if j == m { g2 } else { g1 + s * j as f64 }).collect();
    let xs: Vec<f64> = ys.iter().map(|y| y * y).collect();
    let pwl = PiecewiseLinear1D::from_knots(&xs, &ys)?;
    let network = pwl_to_network(&pwl)?;
    Ok(PwlNet { network, pwl, error_bound: chord_err(s), segments: m })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdDirection {
    /// 1 below `t - delta`, 0 above `t`, linear in between.
    Falling,
    /// 0 below `t`, 1 above `t + delta`, linear in between.
    Rising,
}

pub fn threshold_pwl(t: f64, delta: f64, direction: ThresholdDirection) -> Result<PiecewiseLinear1D> {
    if !(delta > 0.0) || !t.is_finite() {
        return input("threshold needs finite t and delta > 0");
    }
    match direction {
        ThresholdDirection::Falling => PiecewiseLinear1D::new(vec![t - delta, t], vec![0.0, -1.0 / delta, 0.0], 1.0),
        ThresholdDirection::Rising => PiecewiseLinear1D::new(vec![t, t + delta], vec![0.0, 1.0 / delta, 0.0], 0.0),
    }
}

/// Two-unit ramp network, see [`ThresholdDirection`].
pub fn threshold_net(t: f64, delta: f64, direction: ThresholdDirection) -> Result<ReluNetwork> {
    pwl_to_network(&threshold_pwl(t, delta, direction)?)
}

/// Evaluation grid: `per_segment` points on every segment between
/// consecutive breakpoints, plus the same density on one unit either side.
pub fn verification_grid(breakpoints: &[f64], per_segment: usize) -> Vec<f64> {
    let mut pts = Vec::new();
    let mut edges = Vec::with_capacity(breakpoints.len() + 2);
    match (breakpoints.first(), breakpoints.last()) {
        (Some(&lo), Some(&hi)) => {
            edges.push(lo - 1.0);
            edges.extend_from_slice(breakpoints);
            edges.push(hi + 1.0);
        }
        _ => edges.extend_from_slice(&[-1.0, 1.0]),
    }
    for w in edges.windows(2) {
        for k in 0..per_segment {
            pts.push(w[0] + (w[1] - w[0]) * k as f64 / (per_segment - 1).max(1) as f64);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_err(net: &ReluNetwork, f: impl Fn(f64) -> f64, grid: &[f64]) -> f64 {
        grid.iter().map(|&x| (net.eval_scalar(&[x]).unwrap() - f(x)).abs()).fold(0.0, f64::max)
    }

    fn dense(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
    }

    #[test]
    fn rejects_non_increasing_breakpoints() {
        assert!(PiecewiseLinear1D::new(vec![0.0, 0.0], vec![1.0, 2.0, 3.0], 0.0).is_err());
        assert!(PiecewiseLinear1D::new(vec![1.0, 0.0], vec![1.0, 2.0, 3.0], 0.0).is_err());
    }

    #[test]
    fn abs_uses_two_units() {
        let f = PiecewiseLinear1D::new(vec![0.0], vec![-1.0, 1.0], 0.0).unwrap();
        let n = pwl_to_network(&f).unwrap();
        assert_eq!(n.size(), 2);
        assert_eq!(n.eval_scalar(&[-3.0]).unwrap(), 3.0);
    }

    #[test]
    fn flat_end_saves_a_unit() {
        let f = PiecewiseLinear1D::new(vec![0.0, 1.0, 2.0], vec![2.0, -1.0, 0.5, 0.0], 1.0).unwrap();
        let n = pwl_to_network(&f).unwrap();
        assert!(n.size() <= 3);
        let grid = verification_grid(f.breakpoints(), 10);
        assert!(max_err(&n, |x| f.eval(x), &grid) <= 1e-9);
    }

    #[test]
    fn single_piece_functions() {
        let c = PiecewiseLinear1D::new(vec![], vec![0.0], 2.5).unwrap();
        let n = pwl_to_network(&c).unwrap();
        assert_eq!((n.size(), n.depth()), (1, 2));
        assert_eq!(n.eval_scalar(&[7.0]).unwrap(), 2.5);
        let l = PiecewiseLinear1D::new(vec![], vec![-1.5], 0.5).unwrap();
        let n = pwl_to_network(&l).unwrap();
        assert_eq!(n.size(), 2);
        assert!((n.eval_scalar(&[2.0]).unwrap() + 2.5).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_truncated_square_example() {
        let f = |x: f64| (x * x).min(1.0);
        let r = lipschitz_to_network(&f, 2.0, -1.0, 1.0, 0.1).unwrap();
        assert!(r.network.size() <= 41);
        assert!(max_err(&r.network, f, &dense(-2.0, 2.0, 4000)) <= 0.1);
    }

    #[test]
    fn lipschitz_constant_function() {
        let r = lipschitz_to_network(&|_| 3.0, 0.0, 0.0, 1.0, 0.1).unwrap();
        assert!(r.network.size() <= 1);
        assert_eq!(r.network.eval_scalar(&[0.4]).unwrap(), 3.0);
    }

    #[test]
    fn lipschitz_rejects_bad_eps() {
        assert!(lipschitz_to_network(&|x| x, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(lipschitz_to_network(&|x| x, 1.0, 0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn truncated_sqrt_example() {
        let r = truncated_sqrt_net(1.0, 3.0, 0.1).unwrap();
        assert!(r.network.size() <= 11);
        assert_eq!(truncated_sqrt_budget(1.0, 3.0, 0.1), 11);
        let f = |x: f64| x.max(0.0).sqrt().clamp(1.0, 3.0);
        assert!(max_err(&r.network, f, &dense(0.0, 16.0, 20000)) <= 0.1);
        assert!(truncated_sqrt_net(0.0, 1.0, 0.1).is_err());
        assert!(truncated_sqrt_net(2.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn threshold_values() {
        let f = threshold_net(1.0, 0.1, ThresholdDirection::Falling).unwrap();
        assert_eq!(f.metrics().size, 2);
        assert_eq!(f.depth(), 2);
        assert!((f.eval_scalar(&[0.5]).unwrap() - 1.0).abs() < 1e-12);
        assert!((f.eval_scalar(&[0.95]).unwrap() - 0.5).abs() < 1e-9);
        assert!(f.eval_scalar(&[1.1]).unwrap().abs() < 1e-12);
        let d = 0.2;
        let g = threshold_net(0.0, d, ThresholdDirection::Rising).unwrap();
        assert_eq!(g.size(), 2);
        assert!(g.eval_scalar(&[0.0]).unwrap().abs() < 1e-12);
        assert!((g.eval_scalar(&[d / 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!((g.eval_scalar(&[d]).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn realisation_is_exact_and_within_budget(
            raw in proptest::collection::vec((0.05f64..2.0, -3.0f64..3.0), 1..12),
            s0 in -3.0f64..3.0,
            start in -5.0f64..5.0,
            anchor in -2.0f64..2.0,
            flat in 0u8..4,
        ) {
            let mut bps = vec![];
            let mut x = start;
            for (gap, _) in &raw {
                x += gap;
                bps.push(x);
            }
            let mut slopes = vec![s0];
            slopes.extend(raw.iter().map(|(_, s)| *s));
            if flat & 1 == 1 { slopes[0] = 0.0; }
            if flat & 2 == 2 { *slopes.last_mut().unwrap() = 0.0; }
            let f = PiecewiseLinear1D::new(bps, slopes, anchor).unwrap();
            let n = pwl_to_network(&f).unwrap();
            prop_assert_eq!(n.depth(), 2);
            prop_assert!(n.size() <= f.node_budget());
            let grid = verification_grid(f.breakpoints(), 10);
            prop_assert!(max_err(&n, |x| f.eval(x), &grid) <= 1e-9);
        }

        #[test]
        fn truncated_square_within_budget(r in 0.05f64..3.0, eps in 0.005f64..1.0) {
            let t = truncated_square_net(r, eps).unwrap();
            prop_assert!((t.network.size() as f64) <= 2.0 * r * r / eps + 2.0);
            prop_assert!(t.error_bound <= eps);
            let grid = dense(-r - 1.0, r + 1.0, 2000);
            prop_assert!(max_err(&t.network, |x| (x * x).min(r * r), &grid) <= eps);
        }

        #[test]
        fn truncated_sqrt_within_budget(g1 in 0.05f64..3.0, gap in 0.05f64..4.0, eps in 0.002f64..0.5) {
            let g2 = g1 + gap;
            let t = truncated_sqrt_net(g1, g2, eps).unwrap();
            prop_assert!(t.network.size() <= truncated_sqrt_budget(g1, g2, eps));
            let grid = dense(0.0, (g2 + 1.0) * (g2 + 1.0), 4000);
            let f = |x: f64| x.max(0.0).sqrt().clamp(g1, g2);
            prop_assert!(max_err(&t.network, f, &grid) <= eps + 1e-12);
        }
    }
}
