//! Simplicial homology with coefficients in GF(2).

use crate::error::{input, Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

/// A simplex given by its strictly increasing vertex ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Simplex(Vec<usize>);

impl Simplex {
    /// Sorts the ids; fails on an empty list or a repeated id.
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return input("a simplex needs at least one vertex");
        }
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("repeated vertex in simplex {vertices:?}")));
        }
        Ok(Simplex(vertices))
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Codimension-one faces, the `i`-th omitting vertex `i`.
    pub fn faces(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = if self.0.len() > 1 { self.0.len() } else { 0 };
        (0..n).map(move |i| {
            let mut v = self.0.clone();
            v.remove(i);
            Simplex(v)
        })
    }
}

impl TryFrom<Vec<usize>> for Simplex {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Simplex::new(v)
    }
}

impl From<Simplex> for Vec<usize> {
    fn from(s: Simplex) -> Self {
        s.0
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A face-closed set of simplices, stored per dimension in lexicographic order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimplicialComplex {
    levels: Vec<Vec<Simplex>>,
    index: Vec<HashMap<Simplex, usize>>,
}

impl SimplicialComplex {
    /// Closure of the given simplices under taking faces.
    pub fn from_maximal<I: IntoIterator<Item = Simplex>>(simplices: I) -> Self {
        let mut sets: Vec<BTreeSet<Simplex>> = Vec::new();
        let mut stack: Vec<Simplex> = simplices.into_iter().collect();
        while let Some(s) = stack.pop() {
            let k = s.dim();
            if sets.len() <= k {
                sets.resize_with(k + 1, BTreeSet::new);
            }
            if sets[k].contains(&s) {
                continue;
            }
            stack.extend(s.faces());
            sets[k].insert(s);
        }
        Self::from_levels(sets.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    /// Takes the simplices as given; fails unless they are closed under faces.
    pub fn from_simplices<I: IntoIterator<Item = Simplex>>(simplices: I) -> Result<Self> {
        let mut sets: Vec<BTreeSet<Simplex>> = Vec::new();
        for s in simplices {
            let k = s.dim();
            if sets.len() <= k {
                sets.resize_with(k + 1, BTreeSet::new);
            }
            sets[k].insert(s);
        }
        let k = Self::from_levels(sets.into_iter().map(|s| s.into_iter().collect()).collect());
        k.validate()?;
        Ok(k)
    }

    /// Builds a complex from per-dimension lists that are already sorted,
    /// deduplicated and face-closed. Used by the nerve constructions.
    pub(crate) fn from_levels(mut levels: Vec<Vec<Simplex>>) -> Self {
        while levels.last().is_some_and(|l| l.is_empty()) {
            levels.pop();
        }
        let index = levels
            .iter()
            .map(|l| l.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect())
            .collect();
        SimplicialComplex { levels, index }
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Top dimension; `None` for the empty complex.
    pub fn max_dim(&self) -> Option<usize> {
        self.levels.len().checked_sub(1)
    }

    pub fn count(&self, k: usize) -> usize {
        self.levels.get(k).map_or(0, Vec::len)
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        self.levels.get(k).map_or(&[], Vec::as_slice)
    }

    pub fn num_simplices(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, s: &Simplex) -> Option<usize> {
        self.index.get(s.dim())?.get(s).copied()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.index_of(s).is_some()
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.simplices(0).iter().map(|s| s.0[0]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Simplex> {
        self.levels.iter().flatten()
    }

    /// Checks that every face of every stored simplex is stored.
    pub fn validate(&self) -> Result<()> {
        for k in 1..self.levels.len() {
            for s in &self.levels[k] {
                if let Some(f) = s.faces().find(|f| !self.index[k - 1].contains_key(f)) {
                    return Err(Error::Validation(format!("face {{{f}}} of {{{s}}} is missing")));
                }
            }
        }
        Ok(())
    }

    /// Simplices that are not a face of any other simplex.
    pub fn maximal(&self) -> Vec<Simplex> {
        let mut covered: Vec<Vec<bool>> = self.levels.iter().map(|l| vec![false; l.len()]).collect();
        for k in 1..self.levels.len() {
            for s in &self.levels[k] {
                for f in s.faces() {
                    covered[k - 1][self.index[k - 1][&f]] = true;
                }
            }
        }
        self.levels
            .iter()
            .zip(&covered)
            .flat_map(|(l, c)| l.iter().zip(c).filter(|(_, &c)| !c).map(|(s, _)| s.clone()))
            .collect()
    }

    /// `sum_k (-1)^k |K^k|`.
    pub fn euler_characteristic(&self) -> i64 {
        self.levels.iter().enumerate().map(|(k, l)| if k % 2 == 0 { l.len() as i64 } else { -(l.len() as i64) }).sum()
    }

    /// Applies a vertex relabelling, which must be injective on the vertices.
    pub fn relabel(&self, map: &dyn Fn(usize) -> usize) -> Result<Self> {
        let mut out = Vec::with_capacity(self.num_simplices());
        for s in self.iter() {
            out.push(Simplex::new(s.0.iter().map(|&v| map(v)).collect())?);
        }
        let k = Self::from_simplices(out)?;
        if k.count(0) != self.count(0) {
            return Err(Error::Validation("relabelling is not injective".into()));
        }
        Ok(k)
    }

    /// Text format: one simplex per line, ids separated by whitespace. Blank
    /// lines and lines starting with `#` are skipped; faces are added.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ids = line
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", no + 1))))
                .collect::<Result<Vec<_>>>()?;
            out.push(Simplex::new(ids).map_err(|e| Error::Parse(format!("line {}: {e}", no + 1)))?);
        }
        Ok(Self::from_maximal(out))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Writes the maximal simplices, one per line.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        for s in self.maximal() {
            writeln!(w, "{s}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Dense matrix over GF(2) with bit-packed rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GF2Matrix {
    rows: usize,
    cols: usize,
    words: usize,
    bits: Vec<u64>,
}

impl GF2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        GF2Matrix { rows, cols, words, bits: vec![0; rows * words] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        let w = &mut self.bits[i * self.words + j / 64];
        if v {
            *w |= 1 << (j % 64);
        } else {
            *w &= !(1 << (j % 64));
        }
    }

    pub fn row_ones(&self, i: usize) -> usize {
        self.bits[i * self.words..(i + 1) * self.words].iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn col_ones(&self, j: usize) -> usize {
        (0..self.rows).filter(|&i| self.get(i, j)).count()
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }

    pub fn mul(&self, o: &GF2Matrix) -> Result<GF2Matrix> {
        if self.cols != o.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: o.rows });
        }
        let mut out = GF2Matrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.get(i, k) {
                    let (src, dst) = (k * o.words, i * out.words);
                    for w in 0..o.words {
                        out.bits[dst + w] ^= o.bits[src + w];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Rank by row reduction.
    pub fn rank(&self) -> usize {
        let mut m = self.bits.clone();
        let mut rank = 0;
        for c in 0..self.cols {
            let (w, b) = (c / 64, 1u64 << (c % 64));
            let Some(p) = (rank..self.rows).find(|&r| m[r * self.words + w] & b != 0) else {
                continue;
            };
            for x in 0..self.words {
                m.swap(rank * self.words + x, p * self.words + x);
            }
            for r in 0..self.rows {
                if r != rank && m[r * self.words + w] & b != 0 {
                    for x in w..self.words {
                        m[r * self.words + x] ^= m[rank * self.words + x];
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }
}

/// Matrix of `d_k`: rows are the `(k-1)`-simplices, columns the `k`-simplices,
/// both in lexicographic order.
pub fn boundary_matrix(k: &SimplicialComplex, dim: usize) -> Result<GF2Matrix> {
    let top = k.max_dim().ok_or_else(|| Error::Input("empty complex".into()))?;
    if dim == 0 || dim > top {
        return input(format!("boundary index {dim} outside 1..={top}"));
    }
    let mut m = GF2Matrix::zeros(k.count(dim - 1), k.count(dim));
    for (j, s) in k.simplices(dim).iter().enumerate() {
        for f in s.faces() {
            m.set(k.index[dim - 1][&f], j, true);
        }
    }
    Ok(m)
}

/// Incremental GF(2) basis of packed vectors keyed by their lowest set bit.
struct PivotBasis {
    words: usize,
    slot: Vec<Option<usize>>,
    store: Vec<u64>,
    rank: usize,
}

impl PivotBasis {
    fn new(len: usize) -> Self {
        PivotBasis { words: len.div_ceil(64), slot: vec![None; len], store: Vec::new(), rank: 0 }
    }

    /// Reduces `v` against the basis and keeps it if it is independent.
    fn insert(&mut self, v: &mut [u64]) {
        let mut w = 0;
        loop {
            while w < self.words && v[w] == 0 {
                w += 1;
            }
            if w == self.words {
                return;
            }
            let p = w * 64 + v[w].trailing_zeros() as usize;
            match self.slot[p] {
                Some(s) => {
                    let b = &self.store[s * self.words..(s + 1) * self.words];
                    for x in w..self.words {
                        v[x] ^= b[x];
                    }
                }
                None => {
                    self.slot[p] = Some(self.rank);
                    self.store.extend_from_slice(v);
                    self.rank += 1;
                    return;
                }
            }
        }
    }
}

/// Incremental GF(2) basis of sorted sparse vectors keyed by their largest
/// index. Suited to boundary columns, which start with `k + 1` entries.
struct SparseBasis {
    slot: Vec<Option<u32>>,
    store: Vec<Vec<u32>>,
}

impl SparseBasis {
    fn new(len: usize) -> Self {
        SparseBasis { slot: vec![None; len], store: Vec::new() }
    }

    fn insert(&mut self, mut v: Vec<u32>, scratch: &mut Vec<u32>) {
        while let Some(&p) = v.last() {
            match self.slot[p as usize] {
                Some(s) => {
                    // symmetric difference of two sorted lists
                    let b = &self.store[s as usize];
                    scratch.clear();
                    let (mut i, mut j) = (0, 0);
                    while i < v.len() && j < b.len() {
                        match v[i].cmp(&b[j]) {
                            std::cmp::Ordering::Less => {
                                scratch.push(v[i]);
                                i += 1;
                            }
                            std::cmp::Ordering::Greater => {
                                scratch.push(b[j]);
                                j += 1;
                            }
                            std::cmp::Ordering::Equal => {
                                i += 1;
                                j += 1;
                            }
                        }
                    }
                    scratch.extend_from_slice(&v[i..]);
                    scratch.extend_from_slice(&b[j..]);
                    std::mem::swap(&mut v, scratch);
                }
                None => {
                    self.slot[p as usize] = Some(self.store.len() as u32);
                    self.store.push(v);
                    return;
                }
            }
        }
    }

    fn rank(&self) -> usize {
        self.store.len()
    }
}

/// Rank of `d_dim` without forming the matrix. With fewer faces than
/// simplices the columns are reduced as sparse vectors; otherwise the rows
/// (coface sets) are packed densely, so the basis holds at most `cols`
/// vectors of `cols / 64` words.
pub fn boundary_rank(k: &SimplicialComplex, dim: usize) -> usize {
    if dim == 0 || k.max_dim().is_none_or(|t| dim > t) {
        return 0;
    }
    let (rows, cols) = (k.count(dim - 1), k.count(dim));
    if rows <= cols {
        // vectors are columns: each k-simplex as a sparse set of faces
        let mut basis = SparseBasis::new(rows);
        let mut scratch = Vec::new();
        for s in k.simplices(dim) {
            let mut v: Vec<u32> = s.faces().map(|f| k.index[dim - 1][&f] as u32).collect();
            v.sort_unstable();
            basis.insert(v, &mut scratch);
            if basis.rank() == rows {
                break;
            }
        }
        basis.rank()
    } else {
        // vectors are rows: each (k-1)-simplex as a set of cofaces
        let mut cofaces: Vec<Vec<u32>> = vec![Vec::new(); rows];
        for (j, s) in k.simplices(dim).iter().enumerate() {
            for f in s.faces() {
                cofaces[k.index[dim - 1][&f]].push(j as u32);
            }
        }
        let mut basis = PivotBasis::new(cols);
        let mut v = vec![0u64; basis.words];
        for c in &cofaces {
            v.fill(0);
            for &j in c {
                v[j as usize / 64] |= 1 << (j % 64);
            }
            basis.insert(&mut v);
            if basis.rank == cols {
                break;
            }
        }
        basis.rank
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BettiVector {
    pub betti: Vec<usize>,
    pub euler: i64,
}

impl BettiVector {
    /// Betti number in dimension `k`, zero above the stored range.
    pub fn get(&self, k: usize) -> usize {
        self.betti.get(k).copied().unwrap_or(0)
    }
}

/// `beta_k = |K^k| - rank d_k - rank d_{k+1}` for `k = 0 ..= max_dim`.
pub fn betti_numbers(k: &SimplicialComplex) -> Result<BettiVector> {
    k.validate()?;
    let Some(top) = k.max_dim() else {
        return Ok(BettiVector { betti: Vec::new(), euler: 0 });
    };
    let ranks: Vec<usize> = (0..=top + 1).into_par_iter().map(|d| boundary_rank(k, d)).collect();
    let betti: Vec<usize> = (0..=top).map(|d| k.count(d) - ranks[d] - ranks[d + 1]).collect();
    let euler = betti.iter().enumerate().map(|(d, &b)| if d % 2 == 0 { b as i64 } else { -(b as i64) }).sum();
    debug_assert_eq!(euler, k.euler_characteristic());
    Ok(BettiVector { betti, euler })
}

/// Sum of all Betti numbers of the complex.
pub fn topological_complexity(k: &SimplicialComplex) -> Result<usize> {
    Ok(betti_numbers(k)?.betti.iter().sum())
}

/// Sum of `beta_0 .. beta_{d-1}`.
pub fn truncated_complexity(k: &SimplicialComplex, d: usize) -> Result<usize> {
    Ok(betti_numbers(k)?.betti.iter().take(d).sum())
}
