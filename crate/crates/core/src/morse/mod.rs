//! Discrete-Morse ingestion: acyclic matchings on finite simplicial
//! complexes produce genuine flow categories, continuation bimodules, and
//! count tables with signs, together with the independent Smith-normal-form
//! simplicial homology oracle they are checked against.
//!
//! Counts are signed gradient-path counts. The continuation data comes from
//! the stabilized discrete flow: with `V` the matching operator and
//! `F = id - dV - Vd`, the powers of `F` stabilize, giving inclusion and
//! projection chain equivalences between the simplicial and Morse complexes
//! and an explicit homotopy. All arithmetic is exact over the integers.

pub mod fixtures;

use crate::bimod::{BimoduleCube, FREE};
use crate::coeff::{BaseField, Cutoff, GammaElt, GammaMonoid, Scalar};
use crate::flowcat::{FlowCategory, FlowObject};
use crate::homalg::smith_normal_form;
use crate::trees::MultimoduleCube;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MorseError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("facet with repeated vertex `{0}`")]
    RepeatedVertex(String),
    #[error("unknown cell `{0}`")]
    UnknownCell(String),
    #[error("matching is not acyclic (cycle through {0})")]
    NotAcyclic(String),
    #[error("cells of a matched pair are not incident")]
    NotIncident,
    #[error("matchings live on different complexes")]
    ComplexMismatch,
    #[error(transparent)]
    Flow(#[from] crate::flowcat::FlowError),
    #[error(transparent)]
    Bimod(#[from] crate::bimod::BimodError),
    #[error(transparent)]
    Tree(#[from] crate::trees::TreeError),
}

/// Cell identifier: (dimension, index within that dimension).
pub type CellId = (usize, usize);

/// A finite simplicial complex, closed under faces, with cells stored as
/// sorted vertex-index tuples per dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicialComplex {
    pub vertices: Vec<String>,
    /// cells[k] = sorted list of sorted (k+1)-tuples of vertex indices
    pub cells: Vec<Vec<Vec<usize>>>,
}

impl SimplicialComplex {
    /// Builds the face closure of a facet list. Duplicate facets are
    /// dropped with a warning.
    pub fn from_facets(facets: Vec<Vec<String>>) -> Result<(Self, Vec<String>), MorseError> {
        let mut warnings = vec![];
        let mut vertices: Vec<String> = vec![];
        let mut vidx: BTreeMap<String, usize> = BTreeMap::new();
        let mut seen: std::collections::BTreeSet<Vec<usize>> = Default::default();
        let mut by_dim: Vec<std::collections::BTreeSet<Vec<usize>>> = vec![];
        for facet in facets {
            let mut ids = vec![];
            for v in &facet {
                let id = *vidx.entry(v.clone()).or_insert_with(|| {
                    vertices.push(v.clone());
                    vertices.len() - 1
                });
                ids.push(id);
            }
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != ids.len() {
                return Err(MorseError::RepeatedVertex(facet.join(" ")));
            }
            if !seen.insert(sorted.clone()) {
                warnings.push(format!("duplicate facet {} dropped", facet.join(" ")));
                continue;
            }
            // close under faces
            let dim = sorted.len() - 1;
            while by_dim.len() <= dim {
                by_dim.push(Default::default());
            }
            let mut stack = vec![sorted];
            while let Some(cell) = stack.pop() {
                let d = cell.len() - 1;
                if !by_dim[d].insert(cell.clone()) {
                    continue;
                }
                if d > 0 {
                    for drop in 0..cell.len() {
                        let mut face = cell.clone();
                        face.remove(drop);
                        stack.push(face);
                    }
                }
            }
        }
        let cells: Vec<Vec<Vec<usize>>> = by_dim
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect();
        Ok((SimplicialComplex { vertices, cells }, warnings))
    }

    pub fn dim(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().map(|c| c.len()).sum()
    }

    pub fn f_vector(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.len()).collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.cells
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { c.len() as i64 } else { -(c.len() as i64) })
            .sum()
    }

    pub fn index_of(&self, dim: usize, cell: &[usize]) -> Option<usize> {
        self.cells.get(dim)?.binary_search_by(|c| c.as_slice().cmp(cell)).ok()
    }

    pub fn cell_label(&self, id: CellId) -> String {
        self.cells[id.0][id.1]
            .iter()
            .map(|&v| self.vertices[v].clone())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn cell_by_label(&self, label: &str) -> Option<CellId> {
        let mut ids: Vec<usize> = label
            .split(',')
            .map(|v| self.vertices.iter().position(|w| w == v.trim()))
            .collect::<Option<_>>()?;
        ids.sort_unstable();
        let dim = ids.len() - 1;
        self.index_of(dim, &ids).map(|i| (dim, i))
    }

    /// Facets of a cell with incidence signs `(-1)^position`.
    pub fn facets_of(&self, id: CellId) -> Vec<(CellId, i64)> {
        let (dim, idx) = id;
        if dim == 0 {
            return vec![];
        }
        let cell = &self.cells[dim][idx];
        let mut out = vec![];
        for drop in 0..cell.len() {
            let mut face = cell.clone();
            face.remove(drop);
            let fi = self.index_of(dim - 1, &face).expect("closed under faces");
            out.push(((dim - 1, fi), if drop % 2 == 0 { 1 } else { -1 }));
        }
        out
    }

    /// Boundary matrix from dimension k to k-1 over the integers.
    pub fn boundary_matrix(&self, k: usize) -> Vec<Vec<BigInt>> {
        if k == 0 || k > self.dim() {
            return vec![];
        }
        let rows = self.cells[k - 1].len();
        let cols = self.cells[k].len();
        let mut mat = vec![vec![BigInt::zero(); cols]; rows];
        for c in 0..cols {
            for ((_, fi), sign) in self.facets_of((k, c)) {
                mat[fi][c] += BigInt::from(sign);
            }
        }
        mat
    }
}

/// Facet-list text format: one facet per line, vertex labels separated by
/// whitespace; `#` starts a comment.
pub fn load_complex(text: &str) -> Result<(SimplicialComplex, Vec<String>), MorseError> {
    let mut facets = vec![];
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        facets.push(line.split_whitespace().map(String::from).collect());
    }
    SimplicialComplex::from_facets(facets)
}

/// Homology of the simplicial chain complex: Betti number and torsion
/// coefficients per dimension. Over a field the torsion list is empty and
/// the Betti numbers are ranks over that field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomologySummary {
    pub groups: Vec<(usize, Vec<BigInt>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomologyRing {
    Integers,
    Field(BaseField),
}

pub fn simplicial_homology(complex: &SimplicialComplex, ring: HomologyRing) -> HomologySummary {
    let top = complex.dim();
    match ring {
        HomologyRing::Integers => {
            let mut snfs: Vec<Vec<BigInt>> = vec![];
            for k in 0..=top + 1 {
                let mat = complex.boundary_matrix(k);
                snfs.push(smith_normal_form(mat));
            }
            let mut groups = vec![];
            for k in 0..=top {
                let n = complex.cells[k].len();
                let rank_out = snfs[k].iter().filter(|d| !d.is_zero()).count();
                let rank_in = snfs[k + 1].iter().filter(|d| !d.is_zero()).count();
                let torsion: Vec<BigInt> = snfs[k + 1]
                    .iter()
                    .filter(|d| !d.is_zero() && d.abs() > BigInt::one())
                    .map(|d| d.abs())
                    .collect();
                groups.push((n - rank_out - rank_in, torsion));
            }
            HomologySummary { groups }
        }
        HomologyRing::Field(field) => {
            let rank_of = |k: usize| -> usize {
                let mat = complex.boundary_matrix(k);
                if mat.is_empty() {
                    return 0;
                }
                let dense: Vec<Vec<Scalar>> = mat
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|v| scalar_from_bigint(field, v))
                            .collect()
                    })
                    .collect();
                crate::homalg::scalar_rank(dense)
            };
            let mut groups = vec![];
            for k in 0..=top {
                let n = complex.cells[k].len();
                groups.push((n - rank_of(k) - rank_of(k + 1), vec![]));
            }
            HomologySummary { groups }
        }
    }
}

fn scalar_from_bigint(field: BaseField, v: &BigInt) -> Scalar {
    match field {
        BaseField::Rationals => Scalar::Q(crate::coeff::Rat::from_integer(v.clone())),
        BaseField::Prime(p) => {
            let m = BigInt::from(p);
            let r = ((v % &m) + &m) % &m;
            let val: u64 = r.try_into().expect("reduced residue fits");
            Scalar::Fp { p, val }
        }
    }
}

// ---------------------------------------------------------------------------
// matchings

/// An acyclic matching on the Hasse diagram: a partial pairing of cells with
/// their cofacets; unmatched cells are critical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteMorseData {
    /// pairs (lower cell, upper cell), lower matched upward
    pub pairs: Vec<(CellId, CellId)>,
}

impl DiscreteMorseData {
    pub fn up_of(&self, cell: CellId) -> Option<CellId> {
        self.pairs.iter().find(|(l, _)| *l == cell).map(|(_, u)| *u)
    }

    pub fn down_of(&self, cell: CellId) -> Option<CellId> {
        self.pairs.iter().find(|(_, u)| *u == cell).map(|(l, _)| *l)
    }

    pub fn is_matched(&self, cell: CellId) -> bool {
        self.up_of(cell).is_some() || self.down_of(cell).is_some()
    }

    pub fn critical_cells(&self, complex: &SimplicialComplex) -> Vec<CellId> {
        let mut out = vec![];
        for (k, cells) in complex.cells.iter().enumerate() {
            for i in 0..cells.len() {
                if !self.is_matched((k, i)) {
                    out.push((k, i));
                }
            }
        }
        out
    }

    /// Certifies acyclicity by directed cycle search on the modified Hasse
    /// diagram (matched cells point up, boundaries point down).
    pub fn certify_acyclic(&self, complex: &SimplicialComplex) -> Result<(), MorseError> {
        for (l, u) in &self.pairs {
            if u.0 != l.0 + 1
                || !complex.facets_of(*u).iter().any(|(f, _)| f == l)
            {
                return Err(MorseError::NotIncident);
            }
        }
        // V-path graph on lower cells: sigma -> sigma' when sigma is matched
        // up to tau and sigma' is another facet of tau
        let mut status = vec![BTreeMap::new(); complex.cells.len()];
        for (k, cells) in complex.cells.iter().enumerate() {
            for i in 0..cells.len() {
                status[k].insert(i, 0u8); // 0 unvisited, 1 in progress, 2 done
            }
        }
        fn dfs(
            complex: &SimplicialComplex,
            matching: &DiscreteMorseData,
            status: &mut Vec<BTreeMap<usize, u8>>,
            cell: CellId,
        ) -> Result<(), MorseError> {
            match status[cell.0][&cell.1] {
                1 => return Err(MorseError::NotAcyclic(complex.cell_label(cell))),
                2 => return Ok(()),
                _ => {}
            }
            status[cell.0].insert(cell.1, 1);
            if let Some(up) = matching.up_of(cell) {
                for (facet, _) in complex.facets_of(up) {
                    if facet != cell {
                        dfs(complex, matching, status, facet)?;
                    }
                }
            }
            status[cell.0].insert(cell.1, 2);
            Ok(())
        }
        for (k, cells) in complex.cells.iter().enumerate() {
            for i in 0..cells.len() {
                dfs(complex, self, &mut status, (k, i))?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self, complex: &SimplicialComplex) -> String {
        let mut out = String::from("matching\n");
        let mut lines: Vec<String> = self
            .pairs
            .iter()
            .map(|(l, u)| format!("match {} {}", complex.cell_label(*l), complex.cell_label(*u)))
            .collect();
        lines.sort();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

/// Matching file: `match <cell> <cell>` lines, cells given as
/// comma-separated vertex labels.
pub fn parse_matching(
    text: &str,
    complex: &SimplicialComplex,
) -> Result<DiscreteMorseData, MorseError> {
    let mut pairs = vec![];
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line == "matching" {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        if head != "match" {
            return Err(MorseError::Parse {
                line: ln + 1,
                msg: format!("unknown directive `{head}`"),
            });
        }
        let a = parts.next().ok_or(MorseError::Parse {
            line: ln + 1,
            msg: "missing cell".into(),
        })?;
        let b = parts.next().ok_or(MorseError::Parse {
            line: ln + 1,
            msg: "missing cell".into(),
        })?;
        let ca = complex
            .cell_by_label(a)
            .ok_or_else(|| MorseError::UnknownCell(a.to_string()))?;
        let cb = complex
            .cell_by_label(b)
            .ok_or_else(|| MorseError::UnknownCell(b.to_string()))?;
        let (lo, hi) = if ca.0 < cb.0 { (ca, cb) } else { (cb, ca) };
        pairs.push((lo, hi));
    }
    let m = DiscreteMorseData { pairs };
    m.certify_acyclic(complex)?;
    Ok(m)
}

/// Random collapse matching: repeatedly excise free pairs (a cell with a
/// unique remaining cofacet); when none exists declare a random remaining
/// cell of top dimension critical. Collapse matchings are acyclic; the
/// result is certified anyway.
pub fn find_matching(complex: &SimplicialComplex, seed: u64) -> DiscreteMorseData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<Vec<bool>> = complex.cells.iter().map(|c| vec![true; c.len()]).collect();
    let mut n_remaining = complex.cell_count();
    let mut pairs = vec![];
    // cofacet lists
    let mut cofacets: Vec<Vec<Vec<usize>>> = complex
        .cells
        .iter()
        .map(|c| vec![vec![]; c.len()])
        .collect();
    for (k, cells) in complex.cells.iter().enumerate() {
        for i in 0..cells.len() {
            for (f, _) in complex.facets_of((k, i)) {
                cofacets[f.0][f.1].push(i);
            }
        }
    }
    while n_remaining > 0 {
        // free faces
        let mut free: Vec<(CellId, CellId)> = vec![];
        for (k, cells) in complex.cells.iter().enumerate() {
            if k + 1 > complex.dim() {
                continue;
            }
            for i in 0..cells.len() {
                if !remaining[k][i] {
                    continue;
                }
                let alive: Vec<usize> = cofacets[k][i]
                    .iter()
                    .copied()
                    .filter(|&c| remaining[k + 1][c])
                    .collect();
                if alive.len() == 1 {
                    free.push(((k, i), (k + 1, alive[0])));
                }
            }
        }
        if let Some(&(lo, hi)) = free.choose(&mut rng) {
            pairs.push((lo, hi));
            remaining[lo.0][lo.1] = false;
            remaining[hi.0][hi.1] = false;
            n_remaining -= 2;
        } else {
            // no free pair: remove a random top-dimensional remaining cell
            let top = (0..complex.cells.len())
                .rev()
                .find(|&k| remaining[k].iter().any(|&r| r))
                .expect("cells remain");
            let alive: Vec<usize> = (0..complex.cells[top].len())
                .filter(|&i| remaining[top][i])
                .collect();
            let &pick = alive.choose(&mut rng).expect("nonempty");
            remaining[top][pick] = false;
            n_remaining -= 1;
        }
    }
    let m = DiscreteMorseData { pairs };
    m.certify_acyclic(complex).expect("collapse matchings are acyclic");
    m
}

// ---------------------------------------------------------------------------
// gradient paths and the flow category

/// Signed count of gradient V-paths from a critical cell of dimension k+1
/// down to a critical cell of dimension k, by memoized descent through the
/// acyclic matching.
pub fn gradient_path_count(
    complex: &SimplicialComplex,
    matching: &DiscreteMorseData,
    upper: CellId,
    lower: CellId,
) -> BigInt {
    let mut memo: BTreeMap<CellId, BigInt> = BTreeMap::new();
    fn weight(
        complex: &SimplicialComplex,
        matching: &DiscreteMorseData,
        memo: &mut BTreeMap<CellId, BigInt>,
        from: CellId,
        target: CellId,
    ) -> BigInt {
        if from == target {
            return BigInt::one();
        }
        if let Some(v) = memo.get(&from) {
            return v.clone();
        }
        let mut acc = BigInt::zero();
        if let Some(tau) = matching.up_of(from) {
            let incidence_from = complex
                .facets_of(tau)
                .into_iter()
                .find(|(f, _)| *f == from)
                .map(|(_, s)| s)
                .expect("matched pair incident");
            for (next, s) in complex.facets_of(tau) {
                if next == from {
                    continue;
                }
                let step = -incidence_from * s;
                acc += BigInt::from(step) * weight(complex, matching, memo, next, target);
            }
        }
        memo.insert(from, acc.clone());
        acc
    }
    let mut total = BigInt::zero();
    for (facet, s) in complex.facets_of(upper) {
        total += BigInt::from(s) * weight(complex, matching, &mut memo, facet, lower);
    }
    total
}

/// Does any V-path (not necessarily signed-nonzero) connect the two critical
/// cells? This is the nonemptiness shadow of the compactified moduli.
pub fn gradient_path_exists(
    complex: &SimplicialComplex,
    matching: &DiscreteMorseData,
    upper: CellId,
    lower: CellId,
) -> bool {
    let mut memo: BTreeMap<CellId, bool> = BTreeMap::new();
    fn reach(
        complex: &SimplicialComplex,
        matching: &DiscreteMorseData,
        memo: &mut BTreeMap<CellId, bool>,
        from: CellId,
        target: CellId,
    ) -> bool {
        if from == target {
            return true;
        }
        if let Some(&v) = memo.get(&from) {
            return v;
        }
        memo.insert(from, false);
        let mut found = false;
        if let Some(tau) = matching.up_of(from) {
            for (next, _) in complex.facets_of(tau) {
                if next != from && reach(complex, matching, memo, next, target) {
                    found = true;
                    break;
                }
            }
        }
        memo.insert(from, found);
        found
    }
    complex
        .facets_of(upper)
        .into_iter()
        .any(|(f, _)| reach(complex, matching, &mut memo, f, lower))
}

/// How the monoid labels of descriptors are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Trivial monoid: all labels empty.
    Trivial,
    /// Gamma = Z graded by the dimension difference of the critical cells.
    DimensionGap,
}

impl ActionMode {
    pub fn monoid(&self) -> Arc<GammaMonoid> {
        match self {
            ActionMode::Trivial => GammaMonoid::trivial(),
            ActionMode::DimensionGap => GammaMonoid::standard_z(),
        }
    }

    pub fn label(&self, gap: i64) -> GammaElt {
        match self {
            ActionMode::Trivial => vec![],
            ActionMode::DimensionGap => vec![gap],
        }
    }
}

/// Builds the flow category of a matching: objects are the critical cells
/// graded by dimension, one-step morphisms carry signed gradient-path
/// counts, and higher descriptors are recorded along reachability so that
/// broken strata always find their constituents.
pub fn flow_category_from_morse(
    complex: &SimplicialComplex,
    matching: &DiscreteMorseData,
    field: BaseField,
    mode: ActionMode,
) -> Result<FlowCategory, MorseError> {
    matching.certify_acyclic(complex)?;
    let critical = matching.critical_cells(complex);
    let objects: Vec<FlowObject> = critical
        .iter()
        .map(|&c| FlowObject {
            label: complex.cell_label(c),
            degree: c.0 as i64,
        })
        .collect();
    let mut cat = FlowCategory::new(0, mode.monoid(), field, objects, Cutoff::Infinite);
    // one-step descriptors: adjacent dimensions, nonempty when a path exists
    let n = critical.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, &p) in critical.iter().enumerate() {
        for (j, &q) in critical.iter().enumerate() {
            if q.0 == p.0 + 1 && gradient_path_exists(complex, matching, q, p) {
                reach[i][j] = true;
                let count = gradient_path_count(complex, matching, q, p);
                cat.record(
                    i,
                    j,
                    mode.label(1),
                    0,
                    Some(scalar_from_bigint(field, &count)),
                )?;
            }
        }
    }
    // transitive closure for higher-dimensional descriptors
    let mut closure = reach.clone();
    for k in 0..n {
        for i in 0..n {
            if closure[i][k] {
                for j in 0..n {
                    if closure[k][j] {
                        closure[i][j] = true;
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            let gap = critical[j].0 as i64 - critical[i].0 as i64;
            if closure[i][j] && gap > 1 {
                cat.record(i, j, mode.label(gap), gap - 1, None)?;
            }
        }
    }
    Ok(cat)
}

// ---------------------------------------------------------------------------
// the stabilized discrete flow and continuation data

/// Dense integer matrix with explicit dimensions, so that degenerate
/// shapes (no cells, no critical cells in a dimension) stay well-typed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct IMat {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IMat {
    fn zero(rows: usize, cols: usize) -> Self {
        IMat {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = IMat::zero(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = BigInt::one();
        }
        m
    }

    fn from_rows(rows: Vec<Vec<BigInt>>, cols: usize) -> Self {
        let nrows = rows.len();
        let mut m = IMat::zero(nrows, cols);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                *m.at_mut(i, j) = v;
            }
        }
        m
    }

    fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }

    fn mul(&self, other: &IMat) -> IMat {
        assert_eq!(self.cols, other.rows, "matrix dimension mismatch");
        let mut out = IMat::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                if self.at(i, k).is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    if !other.at(k, j).is_zero() {
                        let add = self.at(i, k) * other.at(k, j);
                        *out.at_mut(i, j) += add;
                    }
                }
            }
        }
        out
    }

    fn add(&self, other: &IMat) -> IMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        out
    }

    fn sub(&self, other: &IMat) -> IMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        out
    }

    fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j).clone()).collect())
            .collect()
    }
}

/// Dense integer matrices per dimension for the flow machinery.
pub(crate) struct FlowOperators {
    /// phi[k]: Morse_k -> C_k (columns indexed by critical cells of dim k)
    pub(crate) phi: Vec<IMat>,
    /// psi[k]: C_k -> Morse_k
    pub(crate) psi: Vec<IMat>,
    /// theta[k]: C_k -> C_{k+1}
    pub(crate) theta: Vec<IMat>,
    /// critical cells per dimension, in order
    pub(crate) critical: Vec<Vec<CellId>>,
}

pub(crate) fn boundary_imat(complex: &SimplicialComplex, k: usize) -> IMat {
    let cols = complex.cells.get(k).map(|c| c.len()).unwrap_or(0);
    let rows = if k >= 1 {
        complex.cells.get(k - 1).map(|c| c.len()).unwrap_or(0)
    } else {
        0
    };
    if k == 0 || k > complex.dim() {
        return IMat::zero(rows, cols);
    }
    IMat::from_rows(complex.boundary_matrix(k), cols)
}

pub(crate) fn flow_operators(
    complex: &SimplicialComplex,
    matching: &DiscreteMorseData,
) -> FlowOperators {
    let top = complex.dim();
    let sizes: Vec<usize> = complex.cells.iter().map(|c| c.len()).collect();
    let size_at = |k: usize| -> usize { sizes.get(k).copied().unwrap_or(0) };
    // boundary[k]: C_k -> C_{k-1}; v[k]: C_k -> C_{k+1}
    let boundary: Vec<IMat> = (0..=top + 1).map(|k| boundary_imat(complex, k)).collect();
    let mut v: Vec<IMat> = (0..=top)
        .map(|k| IMat::zero(size_at(k + 1), size_at(k)))
        .collect();
    for (lo, hi) in &matching.pairs {
        let incidence = complex
            .facets_of(*hi)
            .into_iter()
            .find(|(f, _)| f == lo)
            .map(|(_, s)| s)
            .expect("incident");
        // V(lo) = incidence * hi, so that dV(lo) has unit coefficient on lo
        *v[lo.0].at_mut(hi.1, lo.1) = BigInt::from(incidence);
    }
    // flow F_k = id - d_{k+1} V_k - V_{k-1} d_k
    let mut flow: Vec<IMat> = vec![];
    for k in 0..=top {
        let mut f = IMat::identity(sizes[k]);
        f = f.sub(&boundary[k + 1].mul(&v[k]));
        if k > 0 {
            f = f.sub(&v[k - 1].mul(&boundary[k]));
        }
        flow.push(f);
    }
    // stabilize with the telescoping sum for the homotopy
    let mut phi_inf: Vec<IMat> = vec![];
    let mut theta: Vec<IMat> = vec![];
    let cap = complex.cell_count() + 2;
    for k in 0..=top {
        let mut power = IMat::identity(sizes[k]);
        let mut sum = IMat::zero(sizes[k], sizes[k]);
        let mut steps = 0;
        loop {
            let next = flow[k].mul(&power);
            if next == power {
                break;
            }
            sum = sum.add(&power);
            power = next;
            steps += 1;
            assert!(steps <= cap, "discrete flow failed to stabilize");
        }
        // theta_k = V_k * (id + F + ... + F^(m-1)) satisfies
        // d theta + theta d = id - F^m on C_k
        theta.push(v[k].mul(&sum));
        phi_inf.push(power);
    }
    let critical: Vec<Vec<CellId>> = (0..=top)
        .map(|k| {
            (0..sizes[k])
                .filter(|&i| !matching.is_matched((k, i)))
                .map(|i| (k, i))
                .collect()
        })
        .collect();
    let mut phi = vec![];
    let mut psi = vec![];
    for k in 0..=top {
        let crit = &critical[k];
        let mut ph = IMat::zero(sizes[k], crit.len());
        let mut ps = IMat::zero(crit.len(), sizes[k]);
        for (col, &(_, ci)) in crit.iter().enumerate() {
            for r in 0..sizes[k] {
                *ph.at_mut(r, col) = phi_inf[k].at(r, ci).clone();
            }
        }
        for (row, &(_, ci)) in crit.iter().enumerate() {
            for c in 0..sizes[k] {
                *ps.at_mut(row, c) = phi_inf[k].at(ci, c).clone();
            }
        }
        phi.push(ph);
        psi.push(ps);
    }
    FlowOperators {
        phi,
        psi,
        theta,
        critical,
    }
}

/// The Morse differential by the flow route (projection of the simplicial
/// boundary through the inclusion), an independent cross-check against the
/// gradient-path counts.
pub fn morse_boundary_via_flow(
    complex: &SimplicialComplex,
    matching: &DiscreteMorseData,
) -> Vec<Vec<Vec<BigInt>>> {
    let ops = flow_operators(complex, matching);
    let top = complex.dim();
    let mut out = vec![];
    for k in 1..=top {
        // psi_{k-1} . d_k . phi_k
        let d = boundary_imat(complex, k);
        out.push(ops.psi[k - 1].mul(&d.mul(&ops.phi[k])).to_rows());
    }
    out
}

/// Integral homology of the Morse complex (Betti plus torsion per
/// dimension), for torsion-level comparison against the simplicial oracle.
pub fn morse_homology_integral(
    complex: &SimplicialComplex,
    matching: &DiscreteMorseData,
) -> HomologySummary {
    let ops = flow_operators(complex, matching);
    let top = complex.dim();
    let boundaries: Vec<Vec<Vec<BigInt>>> = morse_boundary_via_flow(complex, matching);
    let mut groups = vec![];
    for k in 0..=top {
        let n = ops.critical[k].len();
        let snf_out = if k >= 1 {
            smith_normal_form(boundaries[k - 1].clone())
        } else {
            vec![]
        };
        let snf_in = if k < top {
            smith_normal_form(boundaries[k].clone())
        } else {
            vec![]
        };
        let rank_out = snf_out.iter().filter(|d| !d.is_zero()).count();
        let rank_in = snf_in.iter().filter(|d| !d.is_zero()).count();
        let torsion: Vec<BigInt> = snf_in
            .iter()
            .filter(|d| !d.is_zero() && d.abs() > BigInt::one())
            .map(|d| d.abs())
            .collect();
        groups.push((n - rank_out - rank_in, torsion));
    }
    HomologySummary { groups }
}

/// Continuation data between two matchings on the same complex: the two
/// zero-cubes and the two homotopy one-cubes whose endpoints are the
/// composites and the identity continuations.
pub struct ContinuationData {
    pub source: Arc<FlowCategory>,
    pub target: Arc<FlowCategory>,
    pub forward: BimoduleCube,
    pub backward: BimoduleCube,
    pub homotopy_source: BimoduleCube,
    pub homotopy_target: BimoduleCube,
}

pub fn continuation_from_matchings(
    complex: &SimplicialComplex,
    m1: &DiscreteMorseData,
    m2: &DiscreteMorseData,
    field: BaseField,
    mode: ActionMode,
) -> Result<ContinuationData, MorseError> {
    let x = Arc::new(flow_category_from_morse(complex, m1, field, mode)?);
    let y = Arc::new(flow_category_from_morse(complex, m2, field, mode)?);
    let ops1 = flow_operators(complex, m1);
    let ops2 = flow_operators(complex, m2);
    let top = complex.dim();

    // cochain-side continuation X -> Y: the transpose of psi1 . phi2
    // (a chain map Morse2 -> Morse1); entries pair cells of equal dimension
    let fwd_mat: Vec<Vec<Vec<BigInt>>> = (0..=top)
        .map(|k| ops1.psi[k].mul(&ops2.phi[k]).to_rows())
        .collect();
    let bwd_mat: Vec<Vec<Vec<BigInt>>> = (0..=top)
        .map(|k| ops2.psi[k].mul(&ops1.phi[k]).to_rows())
        .collect();

    let mk_zero_cube = |mats: &[Vec<Vec<BigInt>>],
                        from: &Arc<FlowCategory>,
                        to: &Arc<FlowCategory>,
                        crit_from: &[Vec<CellId>],
                        crit_to: &[Vec<CellId>]|
     -> Result<BimoduleCube, MorseError> {
        let mut cube = BimoduleCube::new(0, from.clone(), to.clone())?;
        for k in 0..=top {
            // mats[k] rows = critical cells of `to`... see call sites
            for (r, row) in mats[k].iter().enumerate() {
                for (c, vv) in row.iter().enumerate() {
                    if vv.is_zero() {
                        continue;
                    }
                    // transpose: cochain entry from column cell to row cell
                    let p = from
                        .object_index(&complex.cell_label(crit_from[k][r]))
                        .expect("object");
                    let q = to
                        .object_index(&complex.cell_label(crit_to[k][c]))
                        .expect("object");
                    cube.set(vec![], p, q, mode.label(0), 0, Some(scalar_from_bigint(field, vv)))?;
                }
            }
        }
        Ok(cube)
    };
    // forward cube X -> Y: matrix (psi1 phi2): rows = crit(m1), cols = crit(m2);
    // cochain map sends p in X (row index) to sum over q (column index)
    let forward = mk_zero_cube(&fwd_mat, &x, &y, &ops1.critical, &ops2.critical)?;
    let backward = mk_zero_cube(&bwd_mat, &y, &x, &ops2.critical, &ops1.critical)?;

    // homotopy cubes: face 0 the composite, face 1 the identity, top face
    // the transpose of -(psi theta' phi)
    let build_homotopy = |ops_a: &FlowOperators,
                          ops_b: &FlowOperators,
                          cat: &Arc<FlowCategory>|
     -> Result<BimoduleCube, MorseError> {
        let mut cube = BimoduleCube::new(1, cat.clone(), cat.clone())?;
        // face 1: identity
        for p in 0..cat.objects.len() {
            cube.set(vec![1], p, p, mode.label(0), 0, Some(field.one()))?;
        }
        // face 0: composite u = psi_a phi_b psi_b phi_a, transposed
        for k in 0..=top {
            let u = ops_a.psi[k]
                .mul(&ops_b.phi[k].mul(&ops_b.psi[k].mul(&ops_a.phi[k])))
                .to_rows();
            for (r, row) in u.iter().enumerate() {
                for (c, vv) in row.iter().enumerate() {
                    if vv.is_zero() {
                        continue;
                    }
                    let p = cat
                        .object_index(&complex.cell_label(ops_a.critical[k][r]))
                        .expect("object");
                    let q = cat
                        .object_index(&complex.cell_label(ops_a.critical[k][c]))
                        .expect("object");
                    cube.set(vec![0], p, q, mode.label(0), 0, Some(scalar_from_bigint(field, vv)))?;
                }
            }
        }
        // top face: the transpose of psi_a theta_b phi_a; it raises the
        // chain dimension by one, so the cochain entries go from dimension
        // k+1 to dimension k
        for k in 0..top {
            let h = ops_a.psi[k + 1]
                .mul(&ops_b.theta[k].mul(&ops_a.phi[k]))
                .to_rows();
            for (r, row) in h.iter().enumerate() {
                for (c, vv) in row.iter().enumerate() {
                    if vv.is_zero() {
                        continue;
                    }
                    let p = cat
                        .object_index(&complex.cell_label(ops_a.critical[k + 1][r]))
                        .expect("object");
                    let q = cat
                        .object_index(&complex.cell_label(ops_a.critical[k][c]))
                        .expect("object");
                    cube.set(vec![FREE], p, q, mode.label(-1), 0, Some(scalar_from_bigint(field, vv)))?;
                }
            }
        }
        Ok(cube)
    };
    let homotopy_source = build_homotopy(&ops1, &ops2, &x)?;
    let homotopy_target = build_homotopy(&ops2, &ops1, &y)?;
    Ok(ContinuationData {
        source: x,
        target: y,
        forward,
        backward,
        homotopy_source,
        homotopy_target,
    })
}

// ---------------------------------------------------------------------------
// cup product

/// The two-input multimodule of the cup product over F_2: counts
/// `c((p1, p2); q) = (psi^T p1 cup psi^T p2)(phi q)` with the front/back
/// face rule. A genuine pair-of-pants-shaped fixture for the multimodule
/// machinery.
pub fn cup_multimodule(
    complex: &SimplicialComplex,
    matching: &DiscreteMorseData,
) -> Result<MultimoduleCube, MorseError> {
    let field = BaseField::Prime(2);
    let mode = ActionMode::Trivial;
    let cat = Arc::new(flow_category_from_morse(complex, matching, field, mode)?);
    let ops = flow_operators(complex, matching);
    let top = complex.dim();
    let mut cube = MultimoduleCube::new(0, vec![cat.clone(), cat.clone()], cat.clone())?;
    // for each critical q of dim a+b and critical p1 (dim a), p2 (dim b):
    // sum over simplices s in phi(q): psi^T(p1)(front_a s) * psi^T(p2)(back_b s)
    for qk in 0..=top {
        for (qcol, &q_cell) in ops.critical[qk].iter().enumerate() {
            let q = cat.object_index(&complex.cell_label(q_cell)).expect("object");
            for a in 0..=qk {
                let b = qk - a;
                for (r1, &p1_cell) in ops.critical[a].iter().enumerate() {
                    for (r2, &p2_cell) in ops.critical[b].iter().enumerate() {
                        let mut acc = BigInt::zero();
                        for (s_idx, simplex) in complex.cells[qk].iter().enumerate() {
                            let coeff = ops.phi[qk].at(s_idx, qcol);
                            if coeff.is_zero() {
                                continue;
                            }
                            let front = &simplex[..=a];
                            let back = &simplex[a..];
                            let fi = complex.index_of(a, front).expect("closed");
                            let bi = complex.index_of(b, back).expect("closed");
                            let v1 = ops.psi[a].at(r1, fi);
                            let v2 = ops.psi[b].at(r2, bi);
                            acc += coeff * v1 * v2;
                        }
                        if (&acc % BigInt::from(2)).is_zero() {
                            continue;
                        }
                        let p1 = cat
                            .object_index(&complex.cell_label(p1_cell))
                            .expect("object");
                        let p2 = cat
                            .object_index(&complex.cell_label(p2_cell))
                            .expect("object");
                        cube.set(vec![], vec![p1, p2], q, vec![], 0, Some(field.one()))?;
                    }
                }
            }
        }
    }
    Ok(cube)
}

/// Rank of the cup-product pairing `H^a (x) H^b -> H^(a+b)` on simplicial
/// cohomology over F_2: the independent oracle for the Morse-side product.
pub fn simplicial_cup_rank(complex: &SimplicialComplex, a: usize, b: usize) -> usize {
    let field = BaseField::Prime(2);
    let top = complex.dim();
    if a + b > top {
        return 0;
    }
    // coboundary matrices over F_2: delta_k: C^k -> C^{k+1} is the transpose
    // of boundary_{k+1}
    let cochain_rank = |k: usize| complex.cells.get(k).map(|c| c.len()).unwrap_or(0);
    let delta = |k: usize| -> Vec<Vec<Scalar>> {
        if k + 1 > top {
            return vec![vec![field.zero(); cochain_rank(k)]; 0];
        }
        let d = complex.boundary_matrix(k + 1);
        let rows = complex.cells[k + 1].len();
        let cols = complex.cells[k].len();
        let mut m = vec![vec![field.zero(); cols]; rows];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = scalar_from_bigint(field, &d[c][r]);
            }
        }
        m
    };
    // representatives of H^k: basis of ker(delta_k) modulo im(delta_{k-1})
    let cocycle_basis = |k: usize| -> Vec<Vec<Scalar>> {
        let n = cochain_rank(k);
        let dk = delta(k);
        let mut kernel: Vec<Vec<Scalar>> = vec![];
        // kernel by elimination over F_2: solve dk x = 0
        let mut mat = dk;
        let nrows = mat.len();
        let mut pivots: Vec<(usize, usize)> = vec![];
        let mut row = 0;
        for col in 0..n {
            if let Some(p) = (row..nrows).find(|&r| !mat[r][col].is_zero()) {
                mat.swap(row, p);
                for r in 0..nrows {
                    if r != row && !mat[r][col].is_zero() {
                        for c2 in 0..n {
                            let sub = mat[row][c2].clone();
                            mat[r][c2] = mat[r][c2].sub(&sub);
                        }
                    }
                }
                pivots.push((row, col));
                row += 1;
            }
        }
        let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
        for free in 0..n {
            if pivot_cols.contains(&free) {
                continue;
            }
            let mut vec_ = vec![field.zero(); n];
            vec_[free] = field.one();
            for &(r, c) in &pivots {
                if !mat[r][free].is_zero() {
                    vec_[c] = mat[r][free].neg();
                }
            }
            kernel.push(vec_);
        }
        kernel
    };
    let cup = |x: &[Scalar], y: &[Scalar]| -> Vec<Scalar> {
        let n_out = cochain_rank(a + b);
        let mut out = vec![field.zero(); n_out];
        for (s_idx, simplex) in complex.cells[a + b].iter().enumerate() {
            let front = &simplex[..=a];
            let back = &simplex[a..];
            let fi = complex.index_of(a, front).expect("closed");
            let bi = complex.index_of(b, back).expect("closed");
            out[s_idx] = out[s_idx].add(&x[fi].mul(&y[bi]));
        }
        out
    };
    // quotient rank: dim (span of products + im delta) - dim im delta
    let za = cocycle_basis(a);
    let zb = cocycle_basis(b);
    let im_delta: Vec<Vec<Scalar>> = {
        let d = delta(a + b - 1);
        let cols = cochain_rank(a + b - 1);
        let rows = cochain_rank(a + b);
        let mut out = vec![];
        for c in 0..cols {
            let mut v = vec![field.zero(); rows];
            for (r, item) in v.iter_mut().enumerate() {
                *item = d[r][c].clone();
            }
            out.push(v);
        }
        out
    };
    let base_rank = crate::homalg::scalar_rank(im_delta.clone());
    let mut all = im_delta;
    for x in &za {
        for y in &zb {
            all.push(cup(x, y));
        }
    }
    crate::homalg::scalar_rank(all) - base_rank
}

/// Rank of the induced pairing on Floer cohomology classes through a
/// two-input multimodule, computed from the cube's count table over F_2.
pub fn multimodule_cup_rank(
    cube: &MultimoduleCube,
    a: i64,
    b: i64,
) -> Result<usize, MorseError> {
    let field = BaseField::Prime(2);
    let data = crate::trees::multimodule_map(cube)?;
    let cf = &data.cf_output;
    // representatives of H^k of CF (trivial-monoid entries collapse to
    // scalars)
    let scalar_diff = |k: i64| -> Vec<Vec<Scalar>> {
        let cols = cf.complex.gens_in_class(k);
        let rows = cf.complex.gens_in_class(k + 1);
        let mut m = vec![vec![field.zero(); cols.len()]; rows.len()];
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                if let Some(v) = cf.complex.diff.get(r, c) {
                    m[ri][ci] = v.coeff(&[]);
                }
            }
        }
        m
    };
    let cocycles = |k: i64| -> Vec<BTreeMap<usize, Scalar>> {
        let gens = cf.complex.gens_in_class(k);
        let mat = scalar_diff(k);
        let n = gens.len();
        let nrows = mat.len();
        let mut m = mat;
        let mut pivots: Vec<(usize, usize)> = vec![];
        let mut row = 0;
        for col in 0..n {
            if let Some(p) = (row..nrows).find(|&r| !m[r][col].is_zero()) {
                m.swap(row, p);
                for r in 0..nrows {
                    if r != row && !m[r][col].is_zero() {
                        for c2 in 0..n {
                            let sub = m[row][c2].clone();
                            m[r][c2] = m[r][c2].sub(&sub);
                        }
                    }
                }
                pivots.push((row, col));
                row += 1;
            }
        }
        let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
        let mut out = vec![];
        for free in 0..n {
            if pivot_cols.contains(&free) {
                continue;
            }
            let mut v: BTreeMap<usize, Scalar> = BTreeMap::new();
            v.insert(gens[free], field.one());
            for &(r, c) in &pivots {
                if !m[r][free].is_zero() {
                    v.insert(gens[c], m[r][free].neg());
                }
            }
            out.push(v);
        }
        out
    };
    let za = cocycles(a);
    let zb = cocycles(b);
    let out_gens = cf.complex.gens_in_class(a + b);
    let gen_pos: BTreeMap<usize, usize> =
        out_gens.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    // image of the differential into degree a+b
    let lower = cf.complex.gens_in_class(a + b - 1);
    let mut vectors: Vec<Vec<Scalar>> = vec![];
    for &l in &lower {
        let mut v = vec![field.zero(); out_gens.len()];
        for (&(r, c), entry) in cf.complex.diff.iter().map(|(k, v)| (k, v)) {
            if c == l {
                if let Some(&pos) = gen_pos.get(&r) {
                    v[pos] = entry.coeff(&[]);
                }
            }
        }
        vectors.push(v);
    }
    let base_rank = crate::homalg::scalar_rank(vectors.clone());
    let table = cube.faces.get(&vec![]).expect("0-cube face");
    let n1 = cube.inputs[0].objects.len();
    for x in &za {
        for y in &zb {
            let mut v = vec![field.zero(); out_gens.len()];
            for ((objs, out, _), desc) in table.iter() {
                let (Some(cx), Some(cy)) = (x.get(&objs[0]), y.get(&objs[1])) else {
                    continue;
                };
                let Some(count) = desc.count.as_ref() else { continue };
                if let Some(&pos) = gen_pos.get(out) {
                    v[pos] = v[pos].add(&cx.mul(cy).mul(count));
                }
            }
            let _ = n1;
            vectors.push(v);
        }
    }
    Ok(crate::homalg::scalar_rank(vectors) - base_rank)
}

#[cfg(test)]
mod tests;
