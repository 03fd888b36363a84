//! Finite poset models for manifolds with generalised corners: validation by
//! link homology, partitioned variants with interior/boundary classification,
//! products, and refinements.
//!
//! An element of codimension c stands for a stratum of codimension c; the
//! defining condition is that the order complex of every open interval has
//! the reduced integral homology of a sphere of dimension (codimension gap
//! minus 2). Sphere recognition is undecidable in general, so acceptance is
//! "homology sphere plus connectivity", which is exact on the polytopal
//! posets this library feeds it.

use crate::homalg::smith_normal_form;
use crate::report::Report;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PosetError {
    #[error("relation cycle through element {0}")]
    Cycle(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("duplicate element `{0}`")]
    DuplicateElement(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Finite poset with a codimension function. `leq[i][j]` means the stratum
/// of `i` contains the stratum of `j` in its closure (codim increases).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratPoset {
    labels: Vec<String>,
    codim: Vec<u32>,
    leq: Vec<Vec<bool>>,
}

impl StratPoset {
    /// Builds from (label, codim) pairs and generating relations; the order
    /// is the reflexive-transitive closure. Fails on cycles through distinct
    /// elements.
    pub fn from_relations(
        elements: Vec<(String, u32)>,
        relations: &[(usize, usize)],
    ) -> Result<Self, PosetError> {
        let n = elements.len();
        let mut seen = std::collections::HashSet::new();
        for (l, _) in &elements {
            if !seen.insert(l.clone()) {
                return Err(PosetError::DuplicateElement(l.clone()));
            }
        }
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(a, b) in relations {
            leq[a][b] = true;
        }
        // Floyd-Warshall closure
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && leq[i][j] && leq[j][i] {
                    return Err(PosetError::Cycle(elements[i].0.clone()));
                }
            }
        }
        let (labels, codim) = elements.into_iter().unzip();
        Ok(StratPoset { labels, codim, leq })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn codim(&self, i: usize) -> u32 {
        self.codim[i]
    }

    pub fn le(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    pub fn lt(&self, a: usize, b: usize) -> bool {
        a != b && self.leq[a][b]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn open_interval(&self, a: usize, b: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&x| self.lt(a, x) && self.lt(x, b))
            .collect()
    }

    pub fn down_set(&self, b: usize) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.le(x, b)).collect()
    }

    pub fn strict_down_set(&self, b: usize) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.lt(x, b)).collect()
    }

    pub fn up_set(&self, a: usize) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.le(a, x)).collect()
    }

    pub fn minimal_elements(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&x| (0..self.len()).all(|y| !self.lt(y, x)))
            .collect()
    }

    /// Covering relations (a < b with nothing strictly between).
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let mut out = vec![];
        for a in 0..self.len() {
            for b in 0..self.len() {
                if self.lt(a, b) && self.open_interval(a, b).is_empty() {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Related pairs a < b.
    pub fn strict_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = vec![];
        for a in 0..self.len() {
            for b in 0..self.len() {
                if self.lt(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Product poset: componentwise order, additive codimension. The pair
    /// `(i, j)` sits at index `i * other.len() + j`.
    pub fn product(&self, other: &StratPoset) -> StratPoset {
        let n2 = other.len();
        let mut labels = Vec::with_capacity(self.len() * n2);
        let mut codim = Vec::with_capacity(self.len() * n2);
        for i in 0..self.len() {
            for j in 0..n2 {
                labels.push(format!("{}*{}", self.labels[i], other.labels[j]));
                codim.push(self.codim[i] + other.codim[j]);
            }
        }
        let size = labels.len();
        let mut leq = vec![vec![false; size]; size];
        for i1 in 0..self.len() {
            for j1 in 0..n2 {
                for i2 in 0..self.len() {
                    for j2 in 0..n2 {
                        if self.leq[i1][i2] && other.leq[j1][j2] {
                            leq[i1 * n2 + j1][i2 * n2 + j2] = true;
                        }
                    }
                }
            }
        }
        StratPoset { labels, codim, leq }
    }

    /// Sub-poset on the given elements (relative order), with a codimension
    /// shift. Returns the sub-poset together with the index map back into
    /// `self`.
    pub fn restrict(&self, elements: &[usize], codim_shift: i64) -> (StratPoset, Vec<usize>) {
        let labels: Vec<String> = elements.iter().map(|&i| self.labels[i].clone()).collect();
        let codim: Vec<u32> = elements
            .iter()
            .map(|&i| (self.codim[i] as i64 - codim_shift).max(0) as u32)
            .collect();
        let n = elements.len();
        let mut leq = vec![vec![false; n]; n];
        for (a, &ia) in elements.iter().enumerate() {
            for (b, &ib) in elements.iter().enumerate() {
                leq[a][b] = self.leq[ia][ib];
            }
        }
        (StratPoset { labels, codim, leq }, elements.to_vec())
    }

    /// Serialize in the line-based poset format. Elements are listed in a
    /// canonical (codim, label) order so reports and files are diffable.
    pub fn to_text(&self, kind: &str) -> String {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            (self.codim[a], &self.labels[a]).cmp(&(self.codim[b], &self.labels[b]))
        });
        let mut out = String::new();
        out.push_str(kind);
        out.push('\n');
        for &i in &order {
            out.push_str(&format!("element {} {}\n", self.labels[i], self.codim[i]));
        }
        let covers = self.covers();
        let mut lines: Vec<String> = covers
            .iter()
            .map(|&(a, b)| format!("rel {} {}", self.labels[a], self.labels[b]))
            .collect();
        lines.sort();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        out
    }
}

/// The nerve of a finite poset (on a chosen subset): k-simplices are chains
/// of k+1 elements.
#[derive(Debug, Clone)]
pub struct Nerve {
    /// simplices_by_dim[k] = sorted chains with k+1 entries, each increasing
    /// in the ambient poset order.
    pub simplices_by_dim: Vec<Vec<Vec<usize>>>,
}

/// Order complex of a sub-poset: the simplicial complex of chains.
pub fn order_complex(poset: &StratPoset, elements: &[usize]) -> Nerve {
    let mut by_dim: Vec<Vec<Vec<usize>>> = vec![];
    if elements.is_empty() {
        return Nerve {
            simplices_by_dim: by_dim,
        };
    }
    let mut current: Vec<Vec<usize>> = elements.iter().map(|&e| vec![e]).collect();
    while !current.is_empty() {
        by_dim.push(current.clone());
        let mut next = vec![];
        for chain in &current {
            let last = *chain.last().unwrap();
            for &e in elements {
                if poset.lt(last, e) {
                    let mut ext = chain.clone();
                    ext.push(e);
                    next.push(ext);
                }
            }
        }
        current = next;
    }
    for level in &mut by_dim {
        level.sort();
    }
    Nerve {
        simplices_by_dim: by_dim,
    }
}

impl Nerve {
    pub fn is_nonempty(&self) -> bool {
        !self.simplices_by_dim.is_empty()
    }

    pub fn dim(&self) -> i64 {
        self.simplices_by_dim.len() as i64 - 1
    }

    pub fn euler_characteristic_reduced(&self) -> i64 {
        let mut chi: i64 = -1;
        for (k, simps) in self.simplices_by_dim.iter().enumerate() {
            if k % 2 == 0 {
                chi += simps.len() as i64;
            } else {
                chi -= simps.len() as i64;
            }
        }
        chi
    }

    /// Reduced integral homology (augmented complex, so the empty nerve has
    /// reduced homology Z in dimension -1). Returns (rank, torsion) per
    /// dimension from -1 up.
    pub fn reduced_homology(&self) -> BTreeMap<i64, (usize, Vec<BigInt>)> {
        let top = self.simplices_by_dim.len();
        let index: Vec<BTreeMap<&Vec<usize>, usize>> = self
            .simplices_by_dim
            .iter()
            .map(|level| level.iter().enumerate().map(|(i, s)| (s, i)).collect())
            .collect();
        // boundary_k: C_k -> C_{k-1}; k = 0 is the augmentation
        let boundary = |k: usize| -> Vec<Vec<BigInt>> {
            let cols = &self.simplices_by_dim[k];
            let nrows = if k == 0 {
                1
            } else {
                self.simplices_by_dim[k - 1].len()
            };
            let mut mat = vec![vec![BigInt::zero(); cols.len()]; nrows];
            for (ci, chain) in cols.iter().enumerate() {
                if k == 0 {
                    mat[0][ci] = BigInt::one();
                    continue;
                }
                for drop in 0..chain.len() {
                    let mut face: Vec<usize> = chain.clone();
                    face.remove(drop);
                    let ri = index[k - 1][&face];
                    let sign = if drop % 2 == 0 { BigInt::one() } else { -BigInt::one() };
                    mat[ri][ci] += sign;
                }
            }
            mat
        };
        let mut ranks: Vec<usize> = Vec::with_capacity(top);
        let mut torsion_of_bnd: Vec<Vec<BigInt>> = Vec::with_capacity(top);
        for k in 0..top {
            let snf = smith_normal_form(boundary(k));
            ranks.push(snf.iter().filter(|d| !d.is_zero()).count());
            torsion_of_bnd.push(
                snf.into_iter()
                    .filter(|d| !d.is_zero() && d.abs() > BigInt::one())
                    .collect(),
            );
        }
        let n_at = |k: i64| -> usize {
            if k == -1 {
                1
            } else if k >= 0 && (k as usize) < top {
                self.simplices_by_dim[k as usize].len()
            } else {
                0
            }
        };
        let rank_bnd = |k: i64| -> usize {
            if k >= 0 && (k as usize) < top {
                ranks[k as usize]
            } else {
                0
            }
        };
        let mut out = BTreeMap::new();
        for k in -1..=(top as i64 - 1) {
            let betti = n_at(k) - rank_bnd(k) - rank_bnd(k + 1);
            let torsion = if k + 1 >= 0 && ((k + 1) as usize) < top {
                torsion_of_bnd[(k + 1) as usize].clone()
            } else {
                vec![]
            };
            out.insert(k, (betti, torsion));
        }
        out
    }

    /// Reduced homology of a sphere of the given dimension: a single Z in
    /// that dimension and nothing else. Dimension -1 is the empty complex.
    pub fn is_homology_sphere(&self, dim: i64) -> bool {
        if dim < -1 {
            return false;
        }
        if dim == -1 {
            return !self.is_nonempty();
        }
        if !self.is_nonempty() {
            return false;
        }
        let h = self.reduced_homology();
        h.iter().all(|(k, (rank, torsion))| {
            torsion.is_empty() && if *k == dim { *rank == 1 } else { *rank == 0 }
        })
    }

    /// Acyclic reduced homology on a nonempty complex.
    pub fn is_homology_ball(&self) -> bool {
        if !self.is_nonempty() {
            return false;
        }
        let h = self.reduced_homology();
        h.values().all(|(rank, torsion)| *rank == 0 && torsion.is_empty())
    }
}

/// Model validation: unique minimal element, codimension discipline, and
/// the sphere condition on every open interval.
pub fn validate_model(poset: &StratPoset) -> Report {
    let mut report = Report::new();
    report.note("link check: reduced integral homology sphere plus connectivity".to_string());
    let minimal = poset.minimal_elements();
    if minimal.len() != 1 {
        report.fail(
            "minimal elements",
            format!(
                "expected a unique minimal element, found {}: [{}]",
                minimal.len(),
                minimal
                    .iter()
                    .map(|&i| poset.label(i).to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
    } else if poset.codim(minimal[0]) != 0 {
        report.fail(
            format!("element {}", poset.label(minimal[0])),
            format!("minimal element has codimension {}", poset.codim(minimal[0])),
        );
    }
    report.merge(validate_intervals(poset));
    report
}

/// The interval sphere condition shared by models and partitioned models.
fn validate_intervals(poset: &StratPoset) -> Report {
    let mut report = Report::new();
    let pairs = poset.strict_pairs();
    let findings: Vec<Report> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut r = Report::new();
            let ca = poset.codim(a) as i64;
            let cb = poset.codim(b) as i64;
            if cb <= ca {
                r.fail(
                    format!("({}, {})", poset.label(a), poset.label(b)),
                    format!("related pair with non-increasing codimension {ca} -> {cb}"),
                );
                return r;
            }
            let gap = cb - ca;
            let interval = poset.open_interval(a, b);
            let nerve = order_complex(poset, &interval);
            if !nerve.is_homology_sphere(gap - 2) {
                r.fail(
                    format!("({}, {})", poset.label(a), poset.label(b)),
                    format!(
                        "open interval with {} element(s) is not a homology {}-sphere (codim gap {})",
                        interval.len(),
                        gap - 2,
                        gap
                    ),
                );
            }
            r
        })
        .collect();
    for f in findings {
        report.merge(f);
    }
    report
}

/// Interior/boundary status of an element of a partitioned model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementClass {
    Interior,
    Boundary,
}

#[derive(Debug, Clone)]
pub struct PartitionedReport {
    pub report: Report,
    /// Recomputed classification, indexed like the poset elements.
    pub classes: Vec<ElementClass>,
}

/// Validation for partitioned models: no initial-element requirement, every
/// down-set a homology ball, punctured down-sets classify elements as
/// interior (sphere) or boundary (ball), boundary elements closed under
/// passing to deeper strata, and the boundary sub-model (codimension shifted
/// down by one) recursively a partitioned model without boundary.
pub fn validate_partitioned(poset: &StratPoset) -> PartitionedReport {
    let mut report = Report::new();
    report.merge(validate_intervals(poset));
    for &m in &poset.minimal_elements() {
        if poset.codim(m) != 0 {
            report.fail(
                format!("element {}", poset.label(m)),
                format!("minimal element has codimension {}", poset.codim(m)),
            );
        }
    }
    let mut classes = vec![ElementClass::Interior; poset.len()];
    for p in 0..poset.len() {
        let down = poset.down_set(p);
        let down_nerve = order_complex(poset, &down);
        if !down_nerve.is_homology_ball() {
            report.fail(
                format!("element {}", poset.label(p)),
                "down-set realisation is not a homology ball".to_string(),
            );
        }
        let punctured = poset.strict_down_set(p);
        let nerve = order_complex(poset, &punctured);
        let c = poset.codim(p) as i64;
        if nerve.is_homology_sphere(c - 1) {
            classes[p] = ElementClass::Interior;
        } else if nerve.is_homology_ball() {
            classes[p] = ElementClass::Boundary;
        } else {
            report.fail(
                format!("element {}", poset.label(p)),
                format!(
                    "punctured down-set is neither a homology {}-sphere nor a ball",
                    c - 1
                ),
            );
        }
    }
    // boundary closed under deepening
    for p in 0..poset.len() {
        if classes[p] == ElementClass::Boundary {
            for q in 0..poset.len() {
                if poset.lt(p, q) && classes[q] != ElementClass::Boundary {
                    report.fail(
                        format!("pair ({}, {})", poset.label(p), poset.label(q)),
                        "boundary element with a non-boundary element above it".to_string(),
                    );
                }
            }
        }
    }
    // the boundary sub-model, codimension dropped by one, has no boundary
    let boundary: Vec<usize> = (0..poset.len())
        .filter(|&p| classes[p] == ElementClass::Boundary)
        .collect();
    if !boundary.is_empty() && report.ok() {
        let (sub, back) = poset.restrict(&boundary, 1);
        let sub_report = validate_partitioned(&sub);
        if !sub_report.report.ok() {
            report.fail(
                "boundary sub-model",
                "boundary elements do not form a valid partitioned model".to_string(),
            );
        } else if let Some(pos) = sub_report
            .classes
            .iter()
            .position(|c| *c == ElementClass::Boundary)
        {
            report.fail(
                format!("element {}", poset.label(back[pos])),
                "boundary sub-model has boundary of its own".to_string(),
            );
        }
    }
    PartitionedReport { report, classes }
}

/// A monotone map of models, stored as fine-to-coarse index assignment.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub fine: StratPoset,
    pub coarse: StratPoset,
    /// map[fine index] = coarse index
    pub map: Vec<usize>,
}

impl Refinement {
    pub fn identity(poset: &StratPoset) -> Refinement {
        Refinement {
            fine: poset.clone(),
            coarse: poset.clone(),
            map: (0..poset.len()).collect(),
        }
    }

    /// Elements of the right fibre over a coarse element: fine elements whose
    /// image lies at or above it.
    pub fn right_fibre(&self, p: usize) -> Vec<usize> {
        (0..self.fine.len())
            .filter(|&q| self.coarse.le(p, self.map[q]))
            .collect()
    }
}

/// Checks the four refinement conditions:
/// (1) minimal codimension over each coarse element matches,
/// (2) each right fibre is a valid partitioned model (relative codimension),
/// (3) the boundary of each right fibre is exactly the union of the fibres
///     of strictly deeper coarse strata,
/// (4) codimension-preserving fine elements induce a map of odd degree (mod
///     2) on the top chains of the down-set realisations.
pub fn validate_refinement(r: &Refinement) -> Report {
    let mut report = Report::new();
    for a in 0..r.fine.len() {
        for b in 0..r.fine.len() {
            if r.fine.le(a, b) && !r.coarse.le(r.map[a], r.map[b]) {
                report.fail(
                    format!("pair ({}, {})", r.fine.label(a), r.fine.label(b)),
                    "map is not monotone".to_string(),
                );
            }
        }
        if r.coarse.codim(r.map[a]) > r.fine.codim(a) {
            report.fail(
                format!("element {}", r.fine.label(a)),
                format!(
                    "codimension decreases under the map: {} -> {}",
                    r.fine.codim(a),
                    r.coarse.codim(r.map[a])
                ),
            );
        }
    }
    if !report.ok() {
        return report;
    }
    for p in 0..r.coarse.len() {
        let fibre = r.right_fibre(p);
        let cp = r.coarse.codim(p);
        // (1)
        let min_codim = fibre.iter().map(|&q| r.fine.codim(q)).min();
        if min_codim != Some(cp) {
            report.fail(
                format!("fibre over {}", r.coarse.label(p)),
                format!(
                    "minimal codimension over the element is {min_codim:?}, expected {cp}"
                ),
            );
            continue;
        }
        // (2)
        let (sub, back) = r.fine.restrict(&fibre, cp as i64);
        let part = validate_partitioned(&sub);
        if !part.report.ok() {
            report.fail(
                format!("fibre over {}", r.coarse.label(p)),
                "right fibre is not a valid partitioned model".to_string(),
            );
            continue;
        }
        // (3): boundary of the fibre = union of deeper fibres
        let mut covered = vec![false; fibre.len()];
        for p2 in 0..r.coarse.len() {
            if r.coarse.lt(p, p2) {
                for (k, &q) in back.iter().enumerate() {
                    if r.coarse.le(p2, r.map[q]) {
                        covered[k] = true;
                    }
                }
            }
        }
        for (k, &q) in back.iter().enumerate() {
            let is_boundary = part.classes[k] == ElementClass::Boundary;
            if is_boundary != covered[k] {
                report.fail(
                    format!("fibre over {}", r.coarse.label(p)),
                    format!(
                        "element {} is {} the fibre boundary but {} covered by deeper fibres",
                        r.fine.label(q),
                        if is_boundary { "in" } else { "not in" },
                        if covered[k] { "is" } else { "is not" },
                    ),
                );
            }
        }
    }
    if !report.ok() {
        return report;
    }
    // (4) degree-1 condition, checked mod 2
    for q in 0..r.fine.len() {
        let p = r.map[q];
        if r.fine.codim(q) != r.coarse.codim(p) {
            continue;
        }
        let c = r.fine.codim(q) as usize;
        let fine_chains = full_chains_below(&r.fine, q, c);
        let coarse_chains = full_chains_below(&r.coarse, p, c);
        let mut mult: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for chain in &fine_chains {
            let image: Vec<usize> = chain.iter().map(|&x| r.map[x]).collect();
            let mut dedup = image.clone();
            dedup.dedup();
            if dedup.len() == image.len() {
                *mult.entry(image).or_insert(0) += 1;
            }
        }
        for chain in &coarse_chains {
            let m = mult.get(chain).copied().unwrap_or(0);
            if m % 2 == 0 {
                report.fail(
                    format!("element {}", r.fine.label(q)),
                    format!(
                        "induced map on top chains has even multiplicity {} over [{}]",
                        m,
                        chain
                            .iter()
                            .map(|&x| r.coarse.label(x).to_string())
                            .collect::<Vec<_>>()
                            .join(" < ")
                    ),
                );
            }
        }
    }
    report
}

/// Maximal chains ending at `top` that pass through every codimension
/// 0..=c; these are the top simplices of the down-set realisation.
fn full_chains_below(poset: &StratPoset, top: usize, c: usize) -> Vec<Vec<usize>> {
    let mut chains: Vec<Vec<usize>> = vec![vec![top]];
    for level in (0..c).rev() {
        let mut next = vec![];
        for chain in &chains {
            let first = chain[0];
            for x in 0..poset.len() {
                if poset.codim(x) as usize == level && poset.lt(x, first) {
                    let mut ext = vec![x];
                    ext.extend_from_slice(chain);
                    next.push(ext);
                }
            }
        }
        chains = next;
    }
    chains
}

// ---------------------------------------------------------------------------
// stock models

/// The one-stratum model.
pub fn point_model() -> StratPoset {
    StratPoset::from_relations(vec![("pt".into(), 0)], &[]).unwrap()
}

/// Face poset of the interval: one top stratum, two endpoints.
pub fn interval_model() -> StratPoset {
    StratPoset::from_relations(
        vec![("t".into(), 0), ("e0".into(), 1), ("e1".into(), 1)],
        &[(0, 1), (0, 2)],
    )
    .unwrap()
}

/// Face poset of the n-cube: elements are faces written over {0,1,i}
/// (i marks a free coordinate), codimension the number of fixed coordinates.
pub fn cube_model(n: usize) -> StratPoset {
    let mut faces: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..n {
        let mut next = vec![];
        for f in &faces {
            for v in [2u8, 0, 1] {
                let mut g = f.clone();
                g.push(v);
                next.push(g);
            }
        }
        faces = next;
    }
    let label = |f: &[u8]| -> String {
        if f.is_empty() {
            "f".into()
        } else {
            format!(
                "f{}",
                f.iter()
                    .map(|&v| match v {
                        2 => "i".to_string(),
                        v => v.to_string(),
                    })
                    .collect::<String>()
            )
        }
    };
    let elements: Vec<(String, u32)> = faces
        .iter()
        .map(|f| (label(f), f.iter().filter(|&&v| v != 2).count() as u32))
        .collect();
    let mut relations = vec![];
    for (a, fa) in faces.iter().enumerate() {
        for (b, fb) in faces.iter().enumerate() {
            if a != b && fa.iter().zip(fb).all(|(&x, &y)| x == y || x == 2) {
                relations.push((a, b));
            }
        }
    }
    StratPoset::from_relations(elements, &relations).unwrap()
}

/// Face poset of the n-simplex: faces are nonempty vertex subsets of
/// {0..n}, ordered by reverse inclusion, codimension n - (|S| - 1).
pub fn simplex_model(n: usize) -> StratPoset {
    let verts = n + 1;
    let mut subsets: Vec<u32> = (1..(1u32 << verts)).collect();
    subsets.sort_by_key(|s| std::cmp::Reverse(s.count_ones()));
    let label = |s: u32| -> String {
        let vs: Vec<String> = (0..verts)
            .filter(|i| s >> i & 1 == 1)
            .map(|i| i.to_string())
            .collect();
        format!("s{}", vs.join(""))
    };
    let elements: Vec<(String, u32)> = subsets
        .iter()
        .map(|&s| (label(s), (n as u32) + 1 - s.count_ones()))
        .collect();
    let mut relations = vec![];
    for (a, &sa) in subsets.iter().enumerate() {
        for (b, &sb) in subsets.iter().enumerate() {
            if a != b && sb & sa == sb {
                relations.push((a, b));
            }
        }
    }
    StratPoset::from_relations(elements, &relations).unwrap()
}

/// The interval subdivided at the midpoint: a partitioned model with two
/// codim-0 halves sharing an interior codim-1 point, plus the two original
/// endpoints.
pub fn halved_interval_model() -> StratPoset {
    StratPoset::from_relations(
        vec![
            ("L".into(), 0),
            ("R".into(), 0),
            ("m".into(), 1),
            ("e0".into(), 1),
            ("e1".into(), 1),
        ],
        &[(0, 2), (1, 2), (0, 3), (1, 4)],
    )
    .unwrap()
}

/// The refinement collapsing the halved interval onto the interval model.
pub fn halved_interval_refinement() -> Refinement {
    let fine = halved_interval_model();
    let coarse = interval_model();
    // L, R, m -> t; e0 -> e0; e1 -> e1
    let map = vec![0, 0, 0, 1, 2];
    Refinement { fine, coarse, map }
}

// ---------------------------------------------------------------------------
// file format

/// Parsed poset file: a kind tag plus the poset (and map data for
/// refinements).
#[derive(Debug, Clone)]
pub enum PosetFile {
    Model(StratPoset),
    Partitioned(StratPoset),
    Refinement(Refinement),
}

/// Line format:
/// ```text
/// poset | partitioned | refinement
/// element <label> <codim>          (fine-element / coarse-element for refinements)
/// rel <a> <b>                      (fine-rel / coarse-rel)
/// map <fine> <coarse>
/// ```
/// `#` starts a comment.
pub fn parse_poset_file(text: &str) -> Result<PosetFile, PosetError> {
    let mut kind: Option<&str> = None;
    let mut els: Vec<(String, u32)> = vec![];
    let mut rels: Vec<(String, String)> = vec![];
    let mut coarse_els: Vec<(String, u32)> = vec![];
    let mut coarse_rels: Vec<(String, String)> = vec![];
    let mut map_lines: Vec<(String, String)> = vec![];
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        let err = |msg: &str| PosetError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        match head {
            "poset" | "partitioned" | "refinement" => {
                if kind.is_some() {
                    return Err(err("duplicate header"));
                }
                kind = Some(match head {
                    "poset" => "poset",
                    "partitioned" => "partitioned",
                    _ => "refinement",
                });
            }
            "element" | "fine-element" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?;
                let codim: u32 = parts
                    .next()
                    .ok_or_else(|| err("missing codim"))?
                    .parse()
                    .map_err(|_| err("bad codim"))?;
                els.push((label.to_string(), codim));
            }
            "coarse-element" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?;
                let codim: u32 = parts
                    .next()
                    .ok_or_else(|| err("missing codim"))?
                    .parse()
                    .map_err(|_| err("bad codim"))?;
                coarse_els.push((label.to_string(), codim));
            }
            "rel" | "fine-rel" => {
                let a = parts.next().ok_or_else(|| err("missing source"))?;
                let b = parts.next().ok_or_else(|| err("missing target"))?;
                rels.push((a.to_string(), b.to_string()));
            }
            "coarse-rel" => {
                let a = parts.next().ok_or_else(|| err("missing source"))?;
                let b = parts.next().ok_or_else(|| err("missing target"))?;
                coarse_rels.push((a.to_string(), b.to_string()));
            }
            "map" => {
                let a = parts.next().ok_or_else(|| err("missing fine label"))?;
                let b = parts.next().ok_or_else(|| err("missing coarse label"))?;
                map_lines.push((a.to_string(), b.to_string()));
            }
            other => return Err(err(&format!("unknown directive `{other}`"))),
        }
    }
    let kind = kind.ok_or(PosetError::Parse {
        line: 0,
        msg: "missing header (poset | partitioned | refinement)".into(),
    })?;
    let build =
        |els: Vec<(String, u32)>, rels: &[(String, String)]| -> Result<StratPoset, PosetError> {
            let idx: BTreeMap<String, usize> = els
                .iter()
                .enumerate()
                .map(|(i, (l, _))| (l.clone(), i))
                .collect();
            let mut pairs = vec![];
            for (a, b) in rels {
                let ia = *idx
                    .get(a)
                    .ok_or_else(|| PosetError::UnknownElement(a.clone()))?;
                let ib = *idx
                    .get(b)
                    .ok_or_else(|| PosetError::UnknownElement(b.clone()))?;
                pairs.push((ia, ib));
            }
            StratPoset::from_relations(els, &pairs)
        };
    match kind {
        "poset" => Ok(PosetFile::Model(build(els, &rels)?)),
        "partitioned" => Ok(PosetFile::Partitioned(build(els, &rels)?)),
        _ => {
            let fine = build(els, &rels)?;
            let coarse = build(coarse_els, &coarse_rels)?;
            let mut map = vec![usize::MAX; fine.len()];
            for (a, b) in &map_lines {
                let ia = fine
                    .index_of(a)
                    .ok_or_else(|| PosetError::UnknownElement(a.clone()))?;
                let ib = coarse
                    .index_of(b)
                    .ok_or_else(|| PosetError::UnknownElement(b.clone()))?;
                map[ia] = ib;
            }
            if let Some(i) = map.iter().position(|&m| m == usize::MAX) {
                return Err(PosetError::UnknownElement(format!(
                    "no map line for fine element {}",
                    fine.label(i)
                )));
            }
            Ok(PosetFile::Refinement(Refinement { fine, coarse, map }))
        }
    }
}


#[cfg(test)]
mod product_properties {
    use super::*;
    use proptest::prelude::*;

    fn stock(ix: usize) -> StratPoset {
        match ix % 4 {
            0 => point_model(),
            1 => interval_model(),
            2 => simplex_model(2),
            _ => cube_model(2),
        }
    }

    proptest! {
        #[test]
        fn products_of_valid_models_are_valid(a in 0usize..4, b in 0usize..4) {
            let m = stock(a).product(&stock(b));
            prop_assume!(m.len() <= 81);
            prop_assert!(validate_model(&m).ok());
        }
    }
}
