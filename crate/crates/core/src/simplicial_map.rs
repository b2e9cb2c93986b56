//! Geometric complexes, nearest-simplex projection and simplicial maps.
//!
//! The projection `N_p` and the map `N_phi` are evaluated as exact
//! piecewise-linear functions; only their network sizes are accounted.

use crate::error::{input, Error, Result};
use crate::homology::{Simplex, SimplicialComplex};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

/// Smallest normalised Gram determinant `det G / prod |v_i|^2` accepted for
/// a simplex with edge vectors `v_i` from its first vertex.
pub const MIN_GRAM: f64 = 1e-12;
/// Distances closer than this count as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Least-squares barycentric coordinates of `x` on the affine hull of
/// `verts`. `residual` is the distance from `x` to that hull.
#[derive(Clone, Debug, PartialEq)]
pub struct Barycentric {
    pub coeffs: Vec<f64>,
    pub residual: f64,
}

impl Barycentric {
    /// True when `x` was (numerically) in the affine hull.
    pub fn in_hull(&self) -> bool {
        self.residual <= 1e-9
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cholesky solve of the symmetric positive definite system `g x = b`.
/// `None` if `g` is numerically singular relative to its diagonal.
fn spd_solve(g: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = g[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 1e-13 * g[i][i] || s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

fn gram(edges: &[Vec<f64>]) -> Vec<Vec<f64>> {
    edges.iter().map(|a| edges.iter().map(|b| dot(a, b)).collect()).collect()
}

fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(c, p);
            d = -d;
        }
        d *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    d
}

/// `det G / prod |v_i|^2` for the edge vectors of `verts`; 1 for a vertex.
pub fn normalized_gram(verts: &[&[f64]]) -> f64 {
    if verts.len() < 2 {
        return 1.0;
    }
    let edges: Vec<Vec<f64>> = verts[1..].iter().map(|v| sub(v, verts[0])).collect();
    let scale: f64 = edges.iter().map(|e| dot(e, e)).product();
    if scale == 0.0 {
        return 0.0;
    }
    det(gram(&edges)) / scale
}

/// Barycentric coordinates of `x` with respect to `verts`, by least squares
/// on the affine system. Points off the affine hull are projected onto it
/// first; `residual` records how far they were.
pub fn barycentric(x: &[f64], verts: &[&[f64]]) -> Result<Barycentric> {
    let Some(v0) = verts.first() else {
        return input("empty simplex");
    };
    if x.len() != v0.len() || verts.iter().any(|v| v.len() != v0.len()) {
        return Err(Error::DimensionMismatch { expected: v0.len(), got: x.len() });
    }
    if verts.len() == 1 {
        return Ok(Barycentric { coeffs: vec![1.0], residual: norm(&sub(x, v0)) });
    }
    let edges: Vec<Vec<f64>> = verts[1..].iter().map(|v| sub(v, v0)).collect();
    let rhs: Vec<f64> = {
        let y = sub(x, v0);
        edges.iter().map(|e| dot(e, &y)).collect()
    };
    let lam = spd_solve(&gram(&edges), &rhs).ok_or_else(|| Error::Geometry("degenerate simplex".into()))?;
    let mut coeffs = Vec::with_capacity(verts.len());
    coeffs.push(1.0 - lam.iter().sum::<f64>());
    coeffs.extend_from_slice(&lam);
    let p = combine(verts, &coeffs);
    Ok(Barycentric { residual: norm(&sub(x, &p)), coeffs })
}

fn combine(verts: &[&[f64]], coeffs: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; verts[0].len()];
    for (v, c) in verts.iter().zip(coeffs) {
        for (pi, vi) in p.iter_mut().zip(v.iter()) {
            *pi += c * vi;
        }
    }
    p
}

/// Closest point of the simplex to `x`, with its barycentric coordinates.
///
/// Every face is tried: the unconstrained minimiser on the face's affine
/// hull is kept when its coordinates are non-negative. The best feasible
/// candidate is the exact answer.
pub fn closest_point(x: &[f64], verts: &[&[f64]]) -> (Vec<f64>, Vec<f64>, f64) {
    let n = verts.len();
    // the minimiser on the full affine hull is the answer when it is feasible
    if let Ok(b) = barycentric(x, verts) {
        if b.coeffs.iter().all(|&c| c >= 0.0) {
            let p = combine(verts, &b.coeffs);
            let d = norm(&sub(x, &p));
            return (p, b.coeffs, d);
        }
    }
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sub_v: Vec<&[f64]> = idx.iter().map(|&i| verts[i]).collect();
        let Ok(b) = barycentric(x, &sub_v) else {
            continue;
        };
        if b.coeffs.iter().any(|&c| c < -1e-12) {
            continue;
        }
        let clamped: Vec<f64> = b.coeffs.iter().map(|c| c.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let mut full = vec![0.0; n];
        for (k, &i) in idx.iter().enumerate() {
            full[i] = clamped[k] / total;
        }
        let p = combine(verts, &full);
        let d = norm(&sub(x, &p));
        if best.as_ref().is_none_or(|(_, _, bd)| d < *bd) {
            best = Some((p, full, d));
        }
    }
    best.expect("singleton faces are always feasible")
}

/// A simplicial complex with vertex coordinates in `R^D`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricComplex {
    complex: SimplicialComplex,
    coords: BTreeMap<usize, Vec<f64>>,
    ambient_dim: usize,
    offsets: Vec<usize>,
}

impl GeometricComplex {
    pub fn new(complex: SimplicialComplex, coords: BTreeMap<usize, Vec<f64>>) -> Result<Self> {
        let (g, bad) = Self::new_lenient(complex, coords)?;
        if let Some(s) = bad.first() {
            let q = normalized_gram(&g.positions(s));
            return Err(Error::Geometry(format!("simplex {{{s}}} is degenerate (normalised Gram {q:e})")));
        }
        Ok(g)
    }

    /// Like [`new`](Self::new) but accepts degenerate simplices and returns
    /// them. Projection stays exact on such complexes since every face is
    /// searched; only barycentric coordinates on the flat simplex itself are
    /// undefined.
    pub fn new_lenient(complex: SimplicialComplex, coords: BTreeMap<usize, Vec<f64>>) -> Result<(Self, Vec<Simplex>)> {
        if complex.is_empty() {
            return input("empty complex");
        }
        complex.validate()?;
        let ambient_dim = coords.values().next().map_or(0, Vec::len);
        for v in complex.vertices() {
            match coords.get(&v) {
                None => return Err(Error::Validation(format!("vertex {v} has no coordinates"))),
                Some(c) if c.len() != ambient_dim => {
                    return Err(Error::DimensionMismatch { expected: ambient_dim, got: c.len() })
                }
                Some(c) if c.iter().any(|x| !x.is_finite()) => {
                    return Err(Error::Validation(format!("vertex {v} has non-finite coordinates")))
                }
                _ => {}
            }
        }
        let mut offsets = vec![0];
        for k in 0..=complex.max_dim().unwrap() {
            offsets.push(offsets[k] + complex.count(k));
        }
        let g = GeometricComplex { complex, coords, ambient_dim, offsets };
        let mut bad = Vec::new();
        for k in 1..=g.complex.max_dim().unwrap() {
            for s in g.complex.simplices(k) {
                if !(normalized_gram(&g.positions(s)) > MIN_GRAM) {
                    bad.push(s.clone());
                }
            }
        }
        Ok((g, bad))
    }

    pub fn complex(&self) -> &SimplicialComplex {
        &self.complex
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn coords(&self, v: usize) -> Option<&[f64]> {
        self.coords.get(&v).map(Vec::as_slice)
    }

    pub fn positions(&self, s: &Simplex) -> Vec<&[f64]> {
        s.vertices().iter().map(|v| self.coords[v].as_slice()).collect()
    }

    /// Global id: simplices are numbered by dimension, then lexicographically.
    pub fn simplex_id(&self, s: &Simplex) -> Option<usize> {
        Some(self.offsets[s.dim()] + self.complex.index_of(s)?)
    }

    pub fn simplex(&self, id: usize) -> Option<&Simplex> {
        let k = self.offsets.partition_point(|&o| o <= id).checked_sub(1)?;
        self.complex.simplices(k).get(id - self.offsets[k])
    }

    pub fn num_simplices(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Text format: a `[simplices]` block in the complex format followed by
    /// a `[coords]` block of lines `id x_0 ... x_{D-1}`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = "";
        let mut simp = String::new();
        let mut coords = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if t == "[simplices]" || t == "[coords]" {
                section = if t == "[coords]" { "coords" } else { "simplices" };
                continue;
            }
            match section {
                "simplices" => {
                    simp.push_str(t);
                    simp.push('\n');
                }
                "coords" => {
                    let mut it = t.split_whitespace();
                    let id = it.next().unwrap().parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?;
                    let xs = it
                        .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1))))
                        .collect::<Result<Vec<_>>>()?;
                    coords.insert(id, xs);
                }
                _ => return Err(Error::Parse(format!("line {}: content before a section header", no + 1))),
            }
        }
        GeometricComplex::new(SimplicialComplex::parse(&simp)?, coords)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.complex.write_to(&mut buf).expect("writing to memory");
        let mut out = String::from("[simplices]\n");
        out.push_str(&String::from_utf8(buf).expect("ascii"));
        out.push_str("[coords]\n");
        for v in self.complex.vertices() {
            let _ = write!(out, "{v}");
            for x in &self.coords[&v] {
                let _ = write!(out, " {x:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Nearest point of `|K|` together with the simplex carrying it.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    /// Global id of the carrier: the lowest-id simplex containing `point`.
    pub simplex_id: usize,
    pub carrier: Simplex,
    /// Barycentric coordinates of `point` in `carrier`, all positive.
    pub coeffs: Vec<f64>,
    pub distance: f64,
}

struct Candidate {
    point: Vec<f64>,
    carrier: Simplex,
    coeffs: Vec<f64>,
    id: usize,
    distance: f64,
}

fn evaluate(gc: &GeometricComplex, x: &[f64], s: &Simplex) -> Candidate {
    let pos = gc.positions(s);
    let (point, coeffs, distance) = closest_point(x, &pos);
    let keep: Vec<usize> = (0..coeffs.len()).filter(|&i| coeffs[i] > 1e-12).collect();
    let carrier = Simplex::new(keep.iter().map(|&i| s.vertices()[i]).collect()).unwrap();
    let total: f64 = keep.iter().map(|&i| coeffs[i]).sum();
    let coeffs = keep.iter().map(|&i| coeffs[i] / total).collect();
    let id = gc.simplex_id(&carrier).unwrap();
    Candidate { point, carrier, coeffs, id, distance }
}

fn better(c: &Candidate, best: &Option<Candidate>) -> bool {
    match best {
        None => true,
        Some(b) => c.distance < b.distance - TIE_TOL || (c.distance <= b.distance + TIE_TOL && c.id < b.id),
    }
}

fn finish(c: Candidate) -> Projection {
    Projection { point: c.point, simplex_id: c.id, carrier: c.carrier, coeffs: c.coeffs, distance: c.distance }
}

/// Exact nearest point of `|K|` by scanning every maximal simplex. Ties are
/// broken by the lowest carrier id.
pub fn project_to_complex(x: &[f64], k: &GeometricComplex) -> Result<Projection> {
    if x.len() != k.ambient_dim {
        return Err(Error::DimensionMismatch { expected: k.ambient_dim, got: x.len() });
    }
    let mut best = None;
    for s in k.complex.maximal() {
        let c = evaluate(k, x, &s);
        if better(&c, &best) {
            best = Some(c);
        }
    }
    Ok(finish(best.expect("complex is non-empty")))
}

/// Per-simplex data for fast rejection: barycentric coordinates are
/// `b_i(x) = [i == 0] + g_i . (x - v_0)` on the affine hull. Vectors are
/// stored flat, `D` entries each.
struct Prepared {
    simplex: Simplex,
    id: usize,
    v0: Vec<f64>,
    edges: Vec<f64>,
    /// `k + 1` gradients, empty for a degenerate simplex.
    grads: Vec<f64>,
    grad_norms: Vec<f64>,
    center: Vec<f64>,
    radius: f64,
}

impl Prepared {
    fn new(gc: &GeometricComplex, s: Simplex) -> Self {
        let pos = gc.positions(&s);
        let dim = gc.ambient_dim;
        let k = pos.len() - 1;
        let v0 = pos[0].to_vec();
        let mut edges = Vec::with_capacity(k * dim);
        for v in &pos[1..] {
            edges.extend(v.iter().zip(&v0).map(|(a, b)| a - b));
        }
        let e = |i: usize| &edges[i * dim..(i + 1) * dim];
        let g: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| dot(e(i), e(j))).collect()).collect();
        // rows of G^{-1} E are the gradients of b_1 .. b_k
        let mut grads = vec![0.0; (k + 1) * dim];
        let mut ok = k > 0;
        for i in 0..k {
            let mut unit = vec![0.0; k];
            unit[i] = 1.0;
            let Some(col) = spd_solve(&g, &unit) else {
                ok = false;
                break;
            };
            for (c, j) in col.iter().zip(0..k) {
                for t in 0..dim {
                    let v = c * e(j)[t];
                    grads[(i + 1) * dim + t] += v;
                    grads[t] -= v;
                }
            }
        }
        if k == 0 {
            ok = true;
        }
        if !ok {
            grads.clear();
        }
        let grad_norms = grads.chunks(dim.max(1)).map(norm).collect();
        let mut center = vec![0.0; dim];
        for p in &pos {
            for i in 0..dim {
                center[i] += p[i] / pos.len() as f64;
            }
        }
        let radius = pos.iter().map(|p| dist(p, &center)).fold(0.0, f64::max);
        let id = gc.simplex_id(&s).unwrap();
        Prepared { simplex: s, id, v0, edges, grads, grad_norms, center, radius }
    }

    /// Exact distance when `x` projects into the simplex, otherwise a lower
    /// bound. `b` receives the barycentric coordinates of the hull foot.
    fn quick(&self, x: &[f64], b: &mut Vec<f64>) -> Option<(f64, bool)> {
        let dim = x.len();
        b.clear();
        if self.edges.is_empty() {
            b.push(1.0);
            return Some((dist(x, &self.v0), true));
        }
        if self.grads.is_empty() {
            return None;
        }
        for (i, g) in self.grads.chunks(dim).enumerate() {
            let mut v = if i == 0 { 1.0 } else { 0.0 };
            for t in 0..dim {
                v += g[t] * (x[t] - self.v0[t]);
            }
            b.push(v);
        }
        let mut res2 = 0.0;
        for t in 0..dim {
            let mut r = x[t] - self.v0[t];
            for (e, bi) in self.edges.chunks(dim).zip(&b[1..]) {
                r -= bi * e[t];
            }
            res2 += r * r;
        }
        let mut outside = 0.0f64;
        for (bi, gn) in b.iter().zip(&self.grad_norms) {
            if *bi < 0.0 {
                outside = outside.max(-bi / gn);
            }
        }
        Some(((res2 + outside * outside).sqrt(), outside == 0.0))
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Projection onto `|K|` accelerated by a uniform grid over the maximal
/// simplices. Returns the same answer as [`project_to_complex`].
pub struct Projector<'a> {
    gc: &'a GeometricComplex,
    prepared: Vec<Prepared>,
    cell: f64,
    max_radius: f64,
    cells: Vec<(Vec<i64>, Vec<usize>)>,
    /// Simplices listed under every fine cell their padded bounding box meets.
    fine_cell: f64,
    fine: HashMap<u64, Vec<u32>>,
}

/// Cell key hash. Collisions only merge buckets, which adds candidates that
/// are then checked exactly.
fn cell_hash(key: &[i64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &k in key {
        h = (h ^ k as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

/// Padding of the bounding boxes in the fine grid; well above [`TIE_TOL`].
const BOX_PAD: f64 = 1e-9;

impl<'a> Projector<'a> {
    pub fn new(gc: &'a GeometricComplex) -> Self {
        let mut maximal = gc.complex.maximal();
        maximal.sort_by_key(|s| gc.simplex_id(s).unwrap());
        let prepared: Vec<Prepared> = maximal.into_iter().map(|s| Prepared::new(gc, s)).collect();
        let max_radius = prepared.iter().map(|p| p.radius).fold(0.0, f64::max);
        let cell = (2.0 * max_radius).max(1e-9);
        let mut map: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for (i, p) in prepared.iter().enumerate() {
            map.entry(p.center.iter().map(|x| (x / cell).floor() as i64).collect()).or_default().push(i);
        }
        let fine_cell = (max_radius / 2.0).max(1e-9);
        let mut fine: HashMap<u64, Vec<u32>> = HashMap::new();
        for (i, p) in prepared.iter().enumerate() {
            let pos = gc.positions(&p.simplex);
            let lo: Vec<i64> = (0..gc.ambient_dim)
                .map(|t| ((pos.iter().map(|v| v[t]).fold(f64::INFINITY, f64::min) - BOX_PAD) / fine_cell).floor() as i64)
                .collect();
            let hi: Vec<i64> = (0..gc.ambient_dim)
                .map(|t| ((pos.iter().map(|v| v[t]).fold(f64::NEG_INFINITY, f64::max) + BOX_PAD) / fine_cell).floor() as i64)
                .collect();
            let mut key = lo.clone();
            loop {
                let bucket = fine.entry(cell_hash(&key)).or_default();
                if bucket.last() != Some(&(i as u32)) {
                    bucket.push(i as u32);
                }
                let mut t = 0;
                while t < key.len() {
                    if key[t] < hi[t] {
                        key[t] += 1;
                        break;
                    }
                    key[t] = lo[t];
                    t += 1;
                }
                if t == key.len() {
                    break;
                }
            }
        }
        Projector { gc, prepared, cell, max_radius, cells: map.into_iter().collect(), fine_cell, fine }
    }

    /// Lowest-id carrier among simplices at distance at most `TIE_TOL`, if
    /// any. Such simplices have padded boxes containing `x`.
    fn project_covered(&self, x: &[f64], b: &mut Vec<f64>) -> Option<Candidate> {
        let key: Vec<i64> = x.iter().map(|v| (v / self.fine_cell).floor() as i64).collect();
        let mut best: Option<Candidate> = None;
        for &i in self.fine.get(&cell_hash(&key))? {
            let p = &self.prepared[i as usize];
            if dist(x, &p.center) > p.radius + TIE_TOL {
                continue;
            }
            match p.quick(x, b) {
                Some((d, _)) if d > TIE_TOL => continue,
                Some((d, true)) if b.iter().all(|&c| c > 1e-12) => {
                    if best.as_ref().is_some_and(|c| c.id <= p.id) {
                        continue;
                    }
                    let pos = self.gc.positions(&p.simplex);
                    let point = combine(&pos, b);
                    best = Some(Candidate { point, carrier: p.simplex.clone(), coeffs: b.clone(), id: p.id, distance: d });
                }
                _ => {
                    let c = evaluate(self.gc, x, &p.simplex);
                    if c.distance <= TIE_TOL && best.as_ref().is_none_or(|b| c.id < b.id) {
                        best = Some(c);
                    }
                }
            }
        }
        best
    }

    fn cell_distance(&self, x: &[f64], key: &[i64]) -> f64 {
        let mut s = 0.0;
        for (xi, &k) in x.iter().zip(key) {
            let lo = k as f64 * self.cell;
            let hi = lo + self.cell;
            let g = if *xi < lo { lo - xi } else if *xi > hi { xi - hi } else { 0.0 };
            s += g * g;
        }
        s.sqrt()
    }

    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        if x.len() != self.gc.ambient_dim {
            return Err(Error::DimensionMismatch { expected: self.gc.ambient_dim, got: x.len() });
        }
        let mut b = Vec::new();
        if let Some(c) = self.project_covered(x, &mut b) {
            return Ok(finish(c));
        }
        let mut order: Vec<(f64, usize)> =
            self.cells.iter().enumerate().map(|(i, (k, _))| (self.cell_distance(x, k) - self.max_radius, i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<Candidate> = None;
        for (lb, ci) in order {
            if best.as_ref().is_some_and(|c| lb > c.distance + TIE_TOL) {
                break;
            }
            for &i in &self.cells[ci].1 {
                let p = &self.prepared[i];
                let bound = best.as_ref().map_or(f64::INFINITY, |c| c.distance + TIE_TOL);
                if dist(x, &p.center) - p.radius > bound {
                    continue;
                }
                match p.quick(x, &mut b) {
                    Some((d, _)) if d > bound => continue,
                    Some((d, true)) if b.iter().all(|&c| c > 1e-12) => {
                        // interior foot: the carrier is the simplex itself
                        if best.as_ref().is_some_and(|c| !(d < c.distance - TIE_TOL || p.id < c.id)) {
                            continue;
                        }
                        let pos = self.gc.positions(&p.simplex);
                        let point = combine(&pos, &b);
                        best = Some(Candidate { point, carrier: p.simplex.clone(), coeffs: b.clone(), id: p.id, distance: d });
                    }
                    _ => {
                        let c = evaluate(self.gc, x, &p.simplex);
                        if better(&c, &best) {
                            best = Some(c);
                        }
                    }
                }
            }
        }
        Ok(finish(best.expect("complex is non-empty")))
    }
}

/// Vertex map from `K` to `L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexMap {
    map: BTreeMap<usize, usize>,
}

impl VertexMap {
    pub fn new(map: BTreeMap<usize, usize>) -> Self {
        VertexMap { map }
    }

    pub fn identity(k: &SimplicialComplex) -> Self {
        VertexMap { map: k.vertices().into_iter().map(|v| (v, v)).collect() }
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.map.get(&v).copied()
    }

    /// Every vertex of `K` is mapped and every simplex goes to a simplex of `L`.
    pub fn validate(&self, k: &SimplicialComplex, l: &SimplicialComplex) -> Result<()> {
        for s in k.iter() {
            let mut img = Vec::with_capacity(s.vertices().len());
            for &v in s.vertices() {
                let w = self.get(v).ok_or_else(|| Error::Validation(format!("vertex {v} is not mapped")))?;
                if !img.contains(&w) {
                    img.push(w);
                }
            }
            let t = Simplex::new(img)?;
            if !l.contains(&t) {
                return Err(Error::Validation(format!("image of {{{s}}} is {{{t}}}, not a simplex of L")));
            }
        }
        Ok(())
    }

    /// Lines `k_id l_id`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let ids: Vec<usize> = t
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1))))
                .collect::<Result<_>>()?;
            if ids.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected two ids", no + 1)));
            }
            if map.insert(ids[0], ids[1]).is_some() {
                return Err(Error::Parse(format!("line {}: vertex {} mapped twice", no + 1, ids[0])));
            }
        }
        Ok(VertexMap { map })
    }

    pub fn to_text(&self) -> String {
        self.map.iter().map(|(a, b)| format!("{a} {b}\n")).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// A validated simplicial map `|K| -> |L|`, applied after projecting onto `|K|`.
pub struct SimplicialMap<'a> {
    projector: Projector<'a>,
    phi: &'a VertexMap,
    l: &'a GeometricComplex,
    cache: HashMap<usize, usize>,
}

impl<'a> SimplicialMap<'a> {
    pub fn new(k: &'a GeometricComplex, phi: &'a VertexMap, l: &'a GeometricComplex) -> Result<Self> {
        phi.validate(k.complex(), l.complex())?;
        let cache = k.complex().vertices().into_iter().map(|v| (v, phi.get(v).unwrap())).collect();
        Ok(SimplicialMap { projector: Projector::new(k), phi, l, cache })
    }

    pub fn vertex_map(&self) -> &VertexMap {
        self.phi
    }

    /// `sum_i b_i(p(x)) coords_L(phi(v_i))` over the carrier of `p(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.projector.project(x)?;
        self.eval_projected(&p)
    }

    pub fn eval_projected(&self, p: &Projection) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.l.ambient_dim()];
        for (v, b) in p.carrier.vertices().iter().zip(&p.coeffs) {
            let w = self.cache[v];
            for (o, c) in out.iter_mut().zip(self.l.coords(w).unwrap()) {
                *o += b * c;
            }
        }
        Ok(out)
    }

    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        self.projector.project(x)
    }
}

/// One-shot evaluation of the simplicial map at `x`.
pub fn simplicial_map_eval(x: &[f64], k: &GeometricComplex, phi: &VertexMap, l: &GeometricComplex) -> Result<Vec<f64>> {
    SimplicialMap::new(k, phi, l)?.eval(x)
}

/// Size `D + d + k (D + 1) + l (d + 1)` of the two-hidden-layer network
/// realising a simplicial map between complexes with `k` and `l` simplices.
pub fn simplicial_net_size(big_d: u64, d: u64, k: u64, l: u64) -> Result<u64> {
    let f = || -> Option<u64> {
        big_d.checked_add(d)?.checked_add(k.checked_mul(big_d.checked_add(1)?)?)?.checked_add(l.checked_mul(d.checked_add(1)?)?)
    };
    f().ok_or_else(|| Error::Input("simplicial network size overflows u64".into()))
}
