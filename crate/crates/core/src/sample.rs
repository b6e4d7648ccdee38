//! Complete directed dyadic samples.
//!
//! A [`DyadicSample`] over `N` nodes stores one observation `(y, d, x)` for every
//! ordered pair `(i, j)` with `i != j`. Storage is dense: `y` and `d` are flat
//! vectors and `x` is an `N(N-1) x p` matrix, all addressed by the fixed row
//! bijection [`DyadicSample::row`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DyadError, Result};

/// Dense node index in `[0, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered pair of distinct nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadIndex {
    src: NodeId,
    dst: NodeId,
}

impl DyadIndex {
    pub fn new(src: usize, dst: usize) -> Result<Self> {
        if src == dst {
            return Err(DyadError::SelfLink(src.to_string()));
        }
        Ok(Self { src: NodeId(src), dst: NodeId(dst) })
    }

    /// Caller guarantees `src != dst`.
    pub(crate) fn new_unchecked(src: usize, dst: usize) -> Self {
        debug_assert_ne!(src, dst);
        Self { src: NodeId(src), dst: NodeId(dst) }
    }

    pub fn src(self) -> usize {
        self.src.0
    }

    pub fn dst(self) -> usize {
        self.dst.0
    }

    pub fn reversed(self) -> Self {
        Self { src: self.dst, dst: self.src }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Binary,
    Continuous,
}

/// One input observation with an arbitrary string node label on each end.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadRecord {
    pub src: String,
    pub dst: String,
    pub y: f64,
    pub d: f64,
    pub x: Vec<f64>,
}

impl DyadRecord {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, y: f64, d: f64, x: Vec<f64>) -> Self {
        Self { src: src.into(), dst: dst.into(), y, d, x }
    }
}

/// Borrowed view of a single dyad's observation.
#[derive(Debug, Clone, Copy)]
pub struct DyadView<'a> {
    pub y: f64,
    pub d: f64,
    sample: &'a DyadicSample,
    row: usize,
}

impl DyadView<'_> {
    pub fn p(&self) -> usize {
        self.sample.p()
    }

    /// Covariate `c` of this dyad.
    pub fn x(&self, c: usize) -> f64 {
        self.sample.x[(self.row, c)]
    }

    /// `x' coef`.
    pub fn x_dot(&self, coef: &[f64]) -> f64 {
        debug_assert_eq!(coef.len(), self.p());
        coef.iter().enumerate().map(|(c, b)| if *b == 0.0 { 0.0 } else { self.x(c) * b }).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicSample {
    n_nodes: usize,
    y: Vec<f64>,
    d: Vec<f64>,
    x: DMatrix<f64>,
    outcome_kind: OutcomeKind,
    symmetric: bool,
    labels: Vec<String>,
}

/// Options for [`DyadicSample::from_records`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Fill the reverse direction of each supplied pair by mirroring.
    pub symmetrize: bool,
}

impl DyadicSample {
    /// Assemble a sample from per-dyad arrays already laid out in row order.
    pub fn from_parts(
        n_nodes: usize,
        y: Vec<f64>,
        d: Vec<f64>,
        x: DMatrix<f64>,
        outcome_kind: OutcomeKind,
    ) -> Result<Self> {
        if n_nodes < 3 {
            return Err(DyadError::TooFewNodes(n_nodes));
        }
        let rows = n_nodes * (n_nodes - 1);
        if y.len() != rows || d.len() != rows || x.nrows() != rows {
            return Err(DyadError::Shape(format!(
                "expected {rows} dyad rows, got y={}, d={}, x={}",
                y.len(),
                d.len(),
                x.nrows()
            )));
        }
        if outcome_kind == OutcomeKind::Binary {
            if let Some(bad) = y.iter().position(|v| *v != 0.0 && *v != 1.0) {
                return Err(DyadError::NonBinaryOutcome { row: bad, value: y[bad] });
            }
        }
        let labels = (0..n_nodes).map(|i| i.to_string()).collect();
        let mut sample = Self { n_nodes, y, d, x, outcome_kind, symmetric: false, labels };
        sample.symmetric = sample.check_symmetric();
        Ok(sample)
    }

    /// Build a complete sample from labelled records, relabelling nodes to a
    /// dense range in first-seen order.
    pub fn from_records<'a>(records: &'a [DyadRecord], outcome_kind: OutcomeKind, opts: BuildOptions) -> Result<Self> {
        let p = records.first().map_or(0, |r| r.x.len());
        let mut label_ids: HashMap<&str, usize> = HashMap::new();
        let mut labels: Vec<String> = Vec::new();
        let mut intern = |s: &'a str| -> usize {
            let next = label_ids.len();
            *label_ids.entry(s).or_insert(next)
        };
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (k, rec) in records.iter().enumerate() {
            if rec.x.len() != p {
                return Err(DyadError::CovariateLength { record: k, expected: p, found: rec.x.len() });
            }
            if rec.src == rec.dst {
                return Err(DyadError::SelfLink(rec.src.clone()));
            }
            let i = intern(&rec.src);
            if i == labels.len() {
                labels.push(rec.src.clone());
            }
            let j = intern(&rec.dst);
            if j == labels.len() {
                labels.push(rec.dst.clone());
            }
            if seen.insert((i, j), k).is_some() {
                return Err(DyadError::DuplicateDyad(rec.src.clone(), rec.dst.clone()));
            }
        }
        let n = labels.len();
        if n < 3 {
            return Err(DyadError::TooFewNodes(n));
        }
        let rows = n * (n - 1);
        let mut y = vec![f64::NAN; rows];
        let mut d = vec![f64::NAN; rows];
        let mut x = DMatrix::<f64>::zeros(rows, p);
        let mut filled = vec![false; rows];
        let mut put = |i: usize, j: usize, rec: &DyadRecord| {
            let r = row_of(n, i, j);
            y[r] = rec.y;
            d[r] = rec.d;
            for (c, v) in rec.x.iter().enumerate() {
                x[(r, c)] = *v;
            }
            filled[r] = true;
        };
        for (&(i, j), &k) in &seen {
            put(i, j, &records[k]);
        }
        if opts.symmetrize {
            for (&(i, j), &k) in &seen {
                if !seen.contains_key(&(j, i)) {
                    put(j, i, &records[k]);
                }
            }
        }
        if let Some(r) = filled.iter().position(|f| !f) {
            let (i, j) = pair_of(n, r);
            return Err(DyadError::MissingDyad(labels[i].clone(), labels[j].clone()));
        }
        let mut sample = Self::from_parts(n, y, d, x, outcome_kind)?;
        sample.labels = labels;
        Ok(sample)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dyads(&self) -> usize {
        self.y.len()
    }

    /// Covariate dimension.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Original node labels, indexed by dense node id.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Row of dyad `(i, j)` in the flat storage.
    pub fn row(&self, dyad: DyadIndex) -> usize {
        row_of(self.n_nodes, dyad.src(), dyad.dst())
    }

    pub fn dyad_at(&self, row: usize) -> DyadIndex {
        let (i, j) = pair_of(self.n_nodes, row);
        DyadIndex::new_unchecked(i, j)
    }

    pub fn view(&self, dyad: DyadIndex) -> DyadView<'_> {
        let row = self.row(dyad);
        DyadView { y: self.y[row], d: self.d[row], sample: self, row }
    }

    /// All ordered dyads in row order.
    pub fn dyads(&self) -> impl Iterator<Item = DyadIndex> + '_ {
        (0..self.n_dyads()).map(|r| self.dyad_at(r))
    }

    /// Relabel nodes so that old node `i` becomes `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes;
        if perm.len() != n {
            return Err(DyadError::Shape(format!("permutation of length {} for {n} nodes", perm.len())));
        }
        let mut check = vec![false; n];
        for &v in perm {
            if v >= n || std::mem::replace(&mut check[v], true) {
                return Err(DyadError::Shape("not a permutation".into()));
            }
        }
        let rows = self.n_dyads();
        let mut y = vec![0.0; rows];
        let mut d = vec![0.0; rows];
        let mut x = DMatrix::zeros(rows, self.p());
        for r in 0..rows {
            let (i, j) = pair_of(n, r);
            let nr = row_of(n, perm[i], perm[j]);
            y[nr] = self.y[r];
            d[nr] = self.d[r];
            x.row_mut(nr).copy_from(&self.x.row(r));
        }
        let mut labels = vec![String::new(); n];
        for (i, l) in self.labels.iter().enumerate() {
            labels[perm[i]] = l.clone();
        }
        Ok(Self { n_nodes: n, y, d, x, outcome_kind: self.outcome_kind, symmetric: self.symmetric, labels })
    }

    fn check_symmetric(&self) -> bool {
        let n = self.n_nodes;
        (0..n).all(|i| {
            (i + 1..n).all(|j| {
                let a = row_of(n, i, j);
                let b = row_of(n, j, i);
                self.y[a] == self.y[b] && self.d[a] == self.d[b] && self.x.row(a) == self.x.row(b)
            })
        })
    }
}

/// Row of ordered pair `(i, j)` among the `n(n-1)` off-diagonal cells.
#[inline]
pub(crate) fn row_of(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

#[inline]
pub(crate) fn pair_of(n: usize, row: usize) -> (usize, usize) {
    let i = row / (n - 1);
    let r = row % (n - 1);
    (i, if r < i { r } else { r + 1 })
}

/// Arithmetic mean of `f` over `dyads`, componentwise.
pub fn dyadic_mean<F>(sample: &DyadicSample, dyads: &[DyadIndex], mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(DyadView<'_>) -> Vec<f64>,
{
    let mut iter = dyads.iter();
    let first = iter.next().ok_or(DyadError::EmptyDyadSet)?;
    let mut acc = f(sample.view(*first));
    for dyad in iter {
        let v = f(sample.view(*dyad));
        assert_eq!(v.len(), acc.len(), "dyadic_mean: f changed output length");
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
    let m = dyads.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    Ok(acc)
}
