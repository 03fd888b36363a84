//! Sparse Z/d-graded cochain complexes of graded lines, chain maps and
//! homotopies, homology (Smith normal form over Z, Gaussian elimination over
//! fields, valuation-pivot elimination over truncated Novikov rings), and
//! lifting through quasi-isomorphisms.
//!
//! Conventions are cohomological throughout: the differential raises degree
//! by 1 (mod d). The grading modulus d must be even unless the ground field
//! has characteristic 2; d = 0 means Z-graded.

mod elim;
mod snf;

pub use elim::{novikov_rank, scalar_rank, solve_linear, PrecisionIssue};
pub use snf::{integral_matrix_rank, smith_normal_form};

use crate::coeff::{BaseField, Cutoff, NovikovElement, Rat, Scalar};
use crate::report::Report;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HomalgError {
    #[error("grading modulus {0} must be even unless the field has characteristic 2")]
    OddModulus(u32),
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u32, u32),
    #[error("entry ({0},{1}) out of range")]
    EntryOutOfRange(usize, usize),
    #[error("matrix entry at ({0},{1}) is not an integer")]
    NonIntegralEntry(usize, usize),
    #[error("linear system is inconsistent: the map is not a quasi-isomorphism in degree {0}")]
    Inconsistent(i64),
    #[error("input chain is not homogeneous")]
    Inhomogeneous,
    #[error("input chain is not a cycle")]
    NotACycle,
    #[error("leading coefficient matrix is not invertible")]
    LeadingNotInvertible,
    #[error("element has terms of zero action away from the unit: {0}")]
    ActionDegenerate(String),
    #[error("insufficient precision to certify a pivot at action level {0}")]
    InsufficientPrecision(String),
}

/// Ring-element interface shared by exact scalars and truncated Novikov
/// elements, for the structural (validation/tensor) layer.
///
/// The two zero notions differ for truncated elements: an entry that is only
/// zero below a finite cutoff still carries precision information and must
/// not be dropped from sparse storage.
pub trait Coefficient: Clone + PartialEq + fmt::Debug {
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    /// Exactly zero: safe to drop from sparse storage.
    fn is_exact_zero(&self) -> bool;
    /// Zero at the working precision (weaker than [`Self::is_exact_zero`]).
    fn vanishes(&self) -> bool;
    fn describe(&self) -> String;
}

impl Coefficient for Scalar {
    fn add(&self, other: &Self) -> Self {
        Scalar::add(self, other)
    }
    fn neg(&self) -> Self {
        Scalar::neg(self)
    }
    fn mul(&self, other: &Self) -> Self {
        Scalar::mul(self, other)
    }
    fn is_exact_zero(&self) -> bool {
        self.is_zero()
    }
    fn vanishes(&self) -> bool {
        self.is_zero()
    }
    fn describe(&self) -> String {
        format!("{self}")
    }
}

impl Coefficient for NovikovElement {
    fn add(&self, other: &Self) -> Self {
        NovikovElement::add(self, other).expect("mixed Novikov contexts in one complex")
    }
    fn neg(&self) -> Self {
        NovikovElement::neg(self)
    }
    fn mul(&self, other: &Self) -> Self {
        NovikovElement::mul(self, other).expect("mixed Novikov contexts in one complex")
    }
    fn is_exact_zero(&self) -> bool {
        self.is_exactly_zero()
    }
    fn vanishes(&self) -> bool {
        self.is_zero_below_cutoff()
    }
    fn describe(&self) -> String {
        self.to_text()
    }
}

/// Sparse matrix with deterministic (row, col) iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat<C> {
    entries: BTreeMap<(usize, usize), C>,
}

impl<C: Coefficient> Default for SparseMat<C> {
    fn default() -> Self {
        Self::new()
    }
}

impl<C: Coefficient> SparseMat<C> {
    pub fn new() -> Self {
        SparseMat {
            entries: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: C) {
        if value.is_exact_zero() {
            self.entries.remove(&(row, col));
        } else {
            self.entries.insert((row, col), value);
        }
    }

    /// Adds into an entry, keeping entries that are only zero up to a finite
    /// cutoff (they still carry precision information).
    pub fn accumulate(&mut self, row: usize, col: usize, value: C) {
        match self.entries.remove(&(row, col)) {
            Some(old) => {
                let sum = old.add(&value);
                if !sum.is_exact_zero() {
                    self.entries.insert((row, col), sum);
                }
            }
            None => {
                if !value.is_exact_zero() {
                    self.entries.insert((row, col), value);
                }
            }
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&C> {
        self.entries.get(&(row, col))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &C)> {
        self.entries.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Matrix product `self * other`, entries composed as maps
    /// (column index of `self` matches row index of `other`).
    pub fn compose(&self, other: &SparseMat<C>) -> SparseMat<C> {
        let mut cols_of_other: BTreeMap<usize, Vec<(usize, &C)>> = BTreeMap::new();
        for ((j, k), v) in other.entries.iter() {
            cols_of_other.entry(*j).or_default().push((*k, v));
        }
        let mut acc: BTreeMap<(usize, usize), C> = BTreeMap::new();
        for ((i, j), a) in self.entries.iter() {
            if let Some(row) = cols_of_other.get(j) {
                for (k, b) in row {
                    let prod = a.mul(b);
                    match acc.remove(&(*i, *k)) {
                        Some(old) => {
                            acc.insert((*i, *k), old.add(&prod));
                        }
                        None => {
                            acc.insert((*i, *k), prod);
                        }
                    }
                }
            }
        }
        acc.retain(|_, v| !v.is_exact_zero());
        SparseMat { entries: acc }
    }

    pub fn add_mat(&self, other: &SparseMat<C>) -> SparseMat<C> {
        let mut out = self.clone();
        for ((i, j), v) in other.entries.iter() {
            out.accumulate(*i, *j, v.clone());
        }
        out
    }

    pub fn neg_mat(&self) -> SparseMat<C> {
        let mut out = self.clone();
        for (_, v) in out.entries.iter_mut() {
            *v = v.neg();
        }
        out
    }

    pub fn scale(&self, c: &C) -> SparseMat<C> {
        let mut out = SparseMat::new();
        for ((i, j), v) in self.entries.iter() {
            out.set(*i, *j, v.mul(c));
        }
        out
    }

    pub fn transpose(&self) -> SparseMat<C> {
        let mut out = SparseMat::new();
        for ((i, j), v) in self.entries.iter() {
            out.set(*j, *i, v.clone());
        }
        out
    }

    /// Apply to a sparse column vector.
    pub fn apply(&self, v: &BTreeMap<usize, C>) -> BTreeMap<usize, C> {
        let mut out: BTreeMap<usize, C> = BTreeMap::new();
        for ((i, j), a) in self.entries.iter() {
            if let Some(x) = v.get(j) {
                let prod = a.mul(x);
                match out.remove(i) {
                    Some(old) => {
                        out.insert(*i, old.add(&prod));
                    }
                    None => {
                        out.insert(*i, prod);
                    }
                }
            }
        }
        out.retain(|_, v| !v.is_exact_zero());
        out
    }
}

/// A graded line: a rank-one summand with a chosen basis unit. Orientation
/// data collapses to degree bookkeeping plus sign units once generators are
/// chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedLine {
    pub label: String,
    pub degree: i64,
}

impl GradedLine {
    pub fn new(label: impl Into<String>, degree: i64) -> Self {
        GradedLine {
            label: label.into(),
            degree,
        }
    }
}

/// Sparse Z/d-graded cochain complex with a chosen basis of graded lines.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedComplex<C> {
    /// Grading modulus d; 0 means Z-graded.
    pub modulus: u32,
    pub generators: Vec<GradedLine>,
    /// Differential, entry (i, j) = coefficient of generator i in d(generator j).
    pub diff: SparseMat<C>,
}

impl<C: Coefficient> GradedComplex<C> {
    pub fn new(
        modulus: u32,
        generators: Vec<GradedLine>,
        diff: SparseMat<C>,
    ) -> Result<Self, HomalgError> {
        let n = generators.len();
        for ((i, j), _) in diff.iter() {
            if *i >= n || *j >= n {
                return Err(HomalgError::EntryOutOfRange(*i, *j));
            }
        }
        Ok(GradedComplex {
            modulus,
            generators,
            diff,
        })
    }

    pub fn zero_complex(modulus: u32) -> Self {
        GradedComplex {
            modulus,
            generators: vec![],
            diff: SparseMat::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn degree_class(&self, deg: i64) -> i64 {
        if self.modulus == 0 {
            deg
        } else {
            deg.rem_euclid(self.modulus as i64)
        }
    }

    pub fn degree_of(&self, idx: usize) -> i64 {
        self.degree_class(self.generators[idx].degree)
    }

    pub fn same_class(&self, a: i64, b: i64) -> bool {
        self.degree_class(a) == self.degree_class(b)
    }

    pub fn classes(&self) -> Vec<i64> {
        let mut cs: Vec<i64> = self.generators.iter().map(|g| self.degree_class(g.degree)).collect();
        cs.sort_unstable();
        cs.dedup();
        cs
    }

    pub fn gens_in_class(&self, class: i64) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.degree_of(i) == self.degree_class(class))
            .collect()
    }

    pub fn find_generator(&self, label: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.label == label)
    }
}

/// Degree and d-squared validation. Diagnostic: collects every violating
/// entry instead of stopping at the first.
pub fn cc_validate<C: Coefficient>(cx: &GradedComplex<C>) -> Report {
    let mut report = Report::new();
    for ((i, j), v) in cx.diff.iter() {
        let want = cx.degree_class(cx.generators[*j].degree + 1);
        let got = cx.degree_of(*i);
        if got != want {
            report.fail(
                format!("d[{} -> {}]", cx.generators[*j].label, cx.generators[*i].label),
                format!(
                    "degree {} -> {} is not a degree-1 step (entry {})",
                    cx.generators[*j].degree,
                    cx.generators[*i].degree,
                    v.describe()
                ),
            );
        }
    }
    let square = cx.diff.compose(&cx.diff);
    for ((i, j), v) in square.iter() {
        if v.vanishes() {
            continue;
        }
        report.fail(
            format!(
                "d^2[{} -> {}]",
                cx.generators[*j].label, cx.generators[*i].label
            ),
            format!("nonzero residual {}", v.describe()),
        );
    }
    report
}

/// Tensor product of complexes: basis pairs with added degrees, differential
/// `d (x (x) y) = dx (x) y + (-1)^{deg x} x (x) dy`.
///
/// The basis pair `(i, j)` is placed at index `i * len(d_right) + j`.
pub fn cc_tensor<C: Coefficient>(
    left: &GradedComplex<C>,
    right: &GradedComplex<C>,
) -> Result<GradedComplex<C>, HomalgError> {
    if left.modulus != right.modulus {
        return Err(HomalgError::ModulusMismatch(left.modulus, right.modulus));
    }
    let nr = right.len();
    let mut generators = Vec::with_capacity(left.len() * nr);
    for a in &left.generators {
        for b in &right.generators {
            generators.push(GradedLine::new(
                format!("{}(x){}", a.label, b.label),
                a.degree + b.degree,
            ));
        }
    }
    let mut diff = SparseMat::new();
    for ((i2, i1), v) in left.diff.iter() {
        for j in 0..nr {
            diff.accumulate(i2 * nr + j, i1 * nr + j, v.clone());
        }
    }
    for ((j2, j1), v) in right.diff.iter() {
        for i in 0..left.len() {
            let sign_neg = left.generators[i].degree.rem_euclid(2) == 1;
            let entry = if sign_neg { v.neg() } else { v.clone() };
            diff.accumulate(i * nr + j2, i * nr + j1, entry);
        }
    }
    GradedComplex::new(left.modulus, generators, diff)
}

/// The Koszul swap `x (x) y -> (-1)^{|x||y|} y (x) x` as a chain isomorphism
/// from `left (x) right` to `right (x) left`.
pub fn koszul_swap<C: Coefficient>(
    left: &GradedComplex<C>,
    right: &GradedComplex<C>,
    one: &C,
) -> ChainMap<C> {
    let nr = right.len();
    let nl = left.len();
    let mut mat = SparseMat::new();
    for i in 0..nl {
        for j in 0..nr {
            let sign = (left.generators[i].degree * right.generators[j].degree).rem_euclid(2);
            let v = if sign == 1 { one.neg() } else { one.clone() };
            mat.set(j * nl + i, i * nr + j, v);
        }
    }
    ChainMap { degree: 0, mat }
}

/// A map of complexes stored as a sparse matrix with a degree shift:
/// 0 for chain maps, -1 for homotopies.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMap<C> {
    pub degree: i64,
    pub mat: SparseMat<C>,
}

impl<C: Coefficient> ChainMap<C> {
    pub fn zero(degree: i64) -> Self {
        ChainMap {
            degree,
            mat: SparseMat::new(),
        }
    }

    pub fn identity(cx: &GradedComplex<C>, one: &C) -> Self {
        let mut mat = SparseMat::new();
        for i in 0..cx.len() {
            mat.set(i, i, one.clone());
        }
        ChainMap { degree: 0, mat }
    }

    pub fn compose(&self, other: &ChainMap<C>) -> ChainMap<C> {
        ChainMap {
            degree: self.degree + other.degree,
            mat: self.mat.compose(&other.mat),
        }
    }

    pub fn add(&self, other: &ChainMap<C>) -> ChainMap<C> {
        assert_eq!(self.degree, other.degree, "degree mismatch in chain map sum");
        ChainMap {
            degree: self.degree,
            mat: self.mat.add_mat(&other.mat),
        }
    }

    pub fn neg(&self) -> ChainMap<C> {
        ChainMap {
            degree: self.degree,
            mat: self.mat.neg_mat(),
        }
    }
}

/// Checks that a degree-0 map commutes with the differentials and respects
/// the grading.
pub fn verify_chain_map<C: Coefficient>(
    f: &ChainMap<C>,
    source: &GradedComplex<C>,
    target: &GradedComplex<C>,
) -> Report {
    let mut report = Report::new();
    for ((i, j), v) in f.mat.iter() {
        if *i >= target.len() || *j >= source.len() {
            report.fail(format!("f[{i},{j}]"), "index out of range".to_string());
            continue;
        }
        let want = target.degree_class(source.generators[*j].degree + f.degree);
        if target.degree_of(*i) != want {
            report.fail(
                format!("f[{} -> {}]", source.generators[*j].label, target.generators[*i].label),
                format!(
                    "degree shift is not {} (entry {})",
                    f.degree,
                    v.describe()
                ),
            );
        }
    }
    if f.degree == 0 {
        let lhs = target.diff.compose(&f.mat);
        let rhs = f.mat.compose(&source.diff);
        let resid = lhs.add_mat(&rhs.neg_mat());
        for ((i, j), v) in resid.iter() {
            if v.vanishes() {
                continue;
            }
            report.fail(
                format!(
                    "df-fd[{} -> {}]",
                    source.generators[*j].label, target.generators[*i].label
                ),
                format!("residual {}", v.describe()),
            );
        }
    }
    report
}

/// Checks the homotopy identity `f - g = d H + H d`.
pub fn verify_homotopy<C: Coefficient>(
    f: &ChainMap<C>,
    g: &ChainMap<C>,
    h: &ChainMap<C>,
    source: &GradedComplex<C>,
    target: &GradedComplex<C>,
) -> Report {
    let mut report = Report::new();
    let dh = target.diff.compose(&h.mat);
    let hd = h.mat.compose(&source.diff);
    let rhs = dh.add_mat(&hd);
    let lhs = f.mat.add_mat(&g.mat.neg_mat());
    let resid = lhs.add_mat(&rhs.neg_mat());
    for ((i, j), v) in resid.iter() {
        if v.vanishes() {
            continue;
        }
        report.fail(
            format!(
                "(f-g-dH-Hd)[{} -> {}]",
                source.generators[*j].label, target.generators[*i].label
            ),
            format!("residual {}", v.describe()),
        );
    }
    report
}

/// Betti numbers of a field-coefficient complex, per degree class.
pub fn homology_field(cx: &GradedComplex<Scalar>) -> BTreeMap<i64, usize> {
    let mut out = BTreeMap::new();
    for class in cx.classes() {
        let gens = cx.gens_in_class(class);
        let n = gens.len();
        let rank_out = rank_of_diff_from(cx, class);
        let rank_in = rank_of_diff_from(cx, class - 1);
        // saturating: on garbage input (d^2 != 0) ranks may overcount, and
        // the validators already flag that separately
        out.insert(class, n.saturating_sub(rank_out).saturating_sub(rank_in));
    }
    out
}

fn rank_of_diff_from(cx: &GradedComplex<Scalar>, class: i64) -> usize {
    let cols = cx.gens_in_class(class);
    let rows = cx.gens_in_class(class + 1);
    if cols.is_empty() || rows.is_empty() {
        return 0;
    }
    let mut dense: Vec<Vec<Scalar>> = Vec::with_capacity(rows.len());
    let field = field_of(cx).unwrap_or(BaseField::Rationals);
    for &r in &rows {
        let mut row = Vec::with_capacity(cols.len());
        for &c in &cols {
            row.push(cx.diff.get(r, c).cloned().unwrap_or_else(|| field.zero()));
        }
        dense.push(row);
    }
    scalar_rank(dense)
}

fn field_of(cx: &GradedComplex<Scalar>) -> Option<BaseField> {
    cx.diff.iter().next().map(|(_, v)| v.field())
}

/// Integral homology: Betti numbers and torsion coefficients per degree
/// class, by Smith normal form. Entries must be integers (rationals with
/// denominator 1).
pub fn homology_integral(
    cx: &GradedComplex<Scalar>,
) -> Result<BTreeMap<i64, (usize, Vec<BigInt>)>, HomalgError> {
    let to_int = |v: &Scalar, i: usize, j: usize| -> Result<BigInt, HomalgError> {
        match v {
            Scalar::Q(r) if r.denom().is_one() => Ok(r.numer().clone()),
            _ => Err(HomalgError::NonIntegralEntry(i, j)),
        }
    };
    let dense_from = |class: i64| -> Result<Vec<Vec<BigInt>>, HomalgError> {
        let cols = cx.gens_in_class(class);
        let rows = cx.gens_in_class(class + 1);
        let mut dense = vec![vec![BigInt::zero(); cols.len()]; rows.len()];
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in cols.iter().enumerate() {
                if let Some(v) = cx.diff.get(r, c) {
                    dense[ri][ci] = to_int(v, r, c)?;
                }
            }
        }
        Ok(dense)
    };
    let mut out = BTreeMap::new();
    for class in cx.classes() {
        let n = cx.gens_in_class(class).len();
        let snf_out = smith_normal_form(dense_from(class)?);
        let rank_out = snf_out.iter().filter(|d| !d.is_zero()).count();
        let snf_in = smith_normal_form(dense_from(class - 1)?);
        let rank_in = snf_in.iter().filter(|d| !d.is_zero()).count();
        let torsion: Vec<BigInt> = snf_in
            .into_iter()
            .filter(|d| !d.is_zero() && d.abs() > BigInt::one())
            .map(|d| d.abs())
            .collect();
        out.insert(
            class,
            (n.saturating_sub(rank_out).saturating_sub(rank_in), torsion),
        );
    }
    Ok(out)
}

/// Betti numbers over the Novikov field, certified below the cutoff.
///
/// Ranks come from fraction-free valuation-pivot elimination; if the residual
/// of some matrix contains entries that are only known to vanish below a
/// finite cutoff, the rank cannot be certified and the offending action level
/// is reported.
pub fn homology_novikov(
    cx: &GradedComplex<NovikovElement>,
) -> Result<BTreeMap<i64, usize>, HomalgError> {
    let mut ranks: BTreeMap<i64, usize> = BTreeMap::new();
    for class in cx.classes() {
        for c in [class - 1, class] {
            if ranks.contains_key(&cx.degree_class(c)) {
                continue;
            }
            let cols = cx.gens_in_class(c);
            let rows = cx.gens_in_class(c + 1);
            let mut dense: Vec<Vec<Option<NovikovElement>>> =
                vec![vec![None; cols.len()]; rows.len()];
            for (ri, &r) in rows.iter().enumerate() {
                for (ci, &cc) in cols.iter().enumerate() {
                    dense[ri][ci] = cx.diff.get(r, cc).cloned();
                }
            }
            let rank = novikov_rank(dense).map_err(|issue| match issue {
                PrecisionIssue::UncertifiedZero(level) => {
                    HomalgError::InsufficientPrecision(level)
                }
            })?;
            ranks.insert(cx.degree_class(c), rank);
        }
    }
    let mut out = BTreeMap::new();
    for class in cx.classes() {
        let n = cx.gens_in_class(class).len();
        let rank_out = *ranks.get(&cx.degree_class(class)).unwrap_or(&0);
        let rank_in = *ranks.get(&cx.degree_class(class - 1)).unwrap_or(&0);
        out.insert(class, n.saturating_sub(rank_out).saturating_sub(rank_in));
    }
    Ok(out)
}

pub type ChainVec = BTreeMap<usize, Scalar>;

/// Given a quasi-isomorphism `pi : G -> F` over a field and a cycle `c` in
/// `F`, produce a cycle `g` in `G` and a chain `h` in `F` with
/// `d g = 0` and `pi(g) - c = d h`, by solving one linear system.
///
/// An inconsistent system signals that `pi` is not a quasi-isomorphism in the
/// relevant degrees.
pub fn lift_through_quasi_iso(
    pi: &ChainMap<Scalar>,
    source: &GradedComplex<Scalar>,
    target: &GradedComplex<Scalar>,
    cycle: &ChainVec,
) -> Result<(ChainVec, ChainVec), HomalgError> {
    if cycle.is_empty() {
        return Ok((BTreeMap::new(), BTreeMap::new()));
    }
    let degs: Vec<i64> = cycle.keys().map(|&i| target.degree_of(i)).collect();
    let class = degs[0];
    if degs.iter().any(|&d| d != class) {
        return Err(HomalgError::Inhomogeneous);
    }
    if !target.diff.apply(cycle).is_empty() {
        return Err(HomalgError::NotACycle);
    }
    let field = cycle.values().next().unwrap().field();

    let g_cols = source.gens_in_class(class);
    let h_cols = target.gens_in_class(class - 1);
    // residual rows: d_G g = 0 lives in source degree class+1,
    // pi g - d_F h = c lives in target degree class.
    let rows_dg = source.gens_in_class(class + 1);
    let rows_c = target.gens_in_class(class);

    let ncols = g_cols.len() + h_cols.len();
    let nrows = rows_dg.len() + rows_c.len();
    let mut mat = vec![vec![field.zero(); ncols]; nrows];
    let mut rhs = vec![field.zero(); nrows];

    for (ri, &r) in rows_dg.iter().enumerate() {
        for (ci, &c) in g_cols.iter().enumerate() {
            if let Some(v) = source.diff.get(r, c) {
                mat[ri][ci] = v.clone();
            }
        }
    }
    let off = rows_dg.len();
    for (ri, &r) in rows_c.iter().enumerate() {
        for (ci, &c) in g_cols.iter().enumerate() {
            if let Some(v) = pi.mat.get(r, c) {
                mat[off + ri][ci] = v.clone();
            }
        }
        for (ci, &c) in h_cols.iter().enumerate() {
            if let Some(v) = target.diff.get(r, c) {
                mat[off + ri][g_cols.len() + ci] = v.neg();
            }
        }
        if let Some(v) = cycle.get(&r) {
            rhs[off + ri] = v.clone();
        }
    }

    let sol = solve_linear(mat, rhs).ok_or(HomalgError::Inconsistent(class))?;
    let mut g = BTreeMap::new();
    for (ci, &c) in g_cols.iter().enumerate() {
        if !sol[ci].is_zero() {
            g.insert(c, sol[ci].clone());
        }
    }
    let mut h = BTreeMap::new();
    for (ci, &c) in h_cols.iter().enumerate() {
        if !sol[g_cols.len() + ci].is_zero() {
            h.insert(c, sol[g_cols.len() + ci].clone());
        }
    }
    Ok((g, h))
}

/// Certificate returned by [`certify_homotopy_equivalence`]. When the input
/// is invertible up to the cutoff the inverse is two-sided on the nose and
/// both homotopies vanish; they are kept in the certificate so downstream
/// consumers see the full equivalence data.
#[derive(Debug, Clone)]
pub struct HomotopyEquivalence {
    pub inverse: ChainMap<NovikovElement>,
    pub homotopy_source: ChainMap<NovikovElement>,
    pub homotopy_target: ChainMap<NovikovElement>,
    pub verified_to: Rat,
    pub report: Report,
}

/// Order-by-order inversion of a chain map that reduces to an invertible
/// scalar matrix modulo positive action. Produces `g` with
/// `g f = id + O(T^E)` and `f g = id + O(T^E)`, by energy induction
/// (a truncated geometric series).
pub fn certify_homotopy_equivalence(
    f: &ChainMap<NovikovElement>,
    source: &GradedComplex<NovikovElement>,
    target: &GradedComplex<NovikovElement>,
    cutoff: &Rat,
) -> Result<HomotopyEquivalence, HomalgError> {
    let sample = match f.mat.iter().next() {
        Some((_, v)) => v.clone(),
        None => return Err(HomalgError::LeadingNotInvertible),
    };
    let monoid = sample.monoid().clone();
    let field = sample.field();
    if source.len() != target.len() {
        return Err(HomalgError::LeadingNotInvertible);
    }
    let n = source.len();

    // leading part: collapse all action-0 terms of each entry
    let mut leading = vec![vec![field.zero(); n]; n];
    for ((i, j), v) in f.mat.iter() {
        let mut acc = field.zero();
        for (g, c) in v.terms() {
            let act = monoid.action(g).expect("validated exponents");
            if act.is_zero() {
                acc = acc.add(c);
            } else if act.is_negative() {
                return Err(HomalgError::ActionDegenerate(format!(
                    "entry ({i},{j}) has a negative-action term"
                )));
            }
        }
        leading[*i][*j] = acc;
    }
    let leading_inv = elim::invert_matrix(leading).ok_or(HomalgError::LeadingNotInvertible)?;

    let one = NovikovElement::one(monoid.clone(), field);
    let mut g0 = SparseMat::new();
    for (i, row) in leading_inv.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_zero() {
                g0.set(i, j, NovikovElement::scalar(monoid.clone(), v.clone()));
            }
        }
    }

    let trunc = |m: &SparseMat<NovikovElement>| -> SparseMat<NovikovElement> {
        let mut out = SparseMat::new();
        for ((i, j), v) in m.iter() {
            out.set(*i, *j, v.truncate(Cutoff::Finite(cutoff.clone())));
        }
        out
    };

    let id: SparseMat<NovikovElement> = {
        let mut m = SparseMat::new();
        for i in 0..n {
            m.set(i, i, one.clone());
        }
        m
    };
    // N = id - g0 f has strictly positive valuation; check it
    let correction = trunc(&id.add_mat(&g0.compose(&f.mat).neg_mat()));
    for ((i, j), v) in correction.iter() {
        if let Some((gam, _)) = v.leading_term() {
            let act = monoid.action(gam).expect("validated exponents");
            if !act.is_positive() {
                return Err(HomalgError::ActionDegenerate(format!(
                    "correction entry ({i},{j}) has non-positive action"
                )));
            }
        }
    }

    // geometric series sum_k N^k composed with g0
    let mut series = id.clone();
    let mut power = correction.clone();
    while !power.is_empty() && power.iter().any(|(_, v)| !v.is_zero_below_cutoff()) {
        series = series.add_mat(&power);
        power = trunc(&power.compose(&correction));
    }
    let g_mat = trunc(&series.compose(&g0));
    let inverse = ChainMap {
        degree: 0,
        mat: g_mat.clone(),
    };

    let mut report = Report::new();
    // residuals of both compositions, and the chain-map property of g
    let gf = trunc(&g_mat.compose(&f.mat)).add_mat(&id.neg_mat());
    for ((i, j), v) in gf.iter() {
        if !v.is_zero_below_cutoff() {
            report.fail(format!("gf-id[{i},{j}]"), v.to_text());
        }
    }
    let fg = trunc(&f.mat.compose(&g_mat)).add_mat(&id.neg_mat());
    for ((i, j), v) in fg.iter() {
        if !v.is_zero_below_cutoff() {
            report.fail(format!("fg-id[{i},{j}]"), v.to_text());
        }
    }
    let comm = trunc(&source.diff.compose(&g_mat)).add_mat(&trunc(&g_mat.compose(&target.diff)).neg_mat());
    for ((i, j), v) in comm.iter() {
        if !v.is_zero_below_cutoff() {
            report.fail(format!("dg-gd[{i},{j}]"), v.to_text());
        }
    }
    report.note(format!("certified to action level {}", crate::coeff::fmt_rat(cutoff)));

    Ok(HomotopyEquivalence {
        inverse,
        homotopy_source: ChainMap::zero(-1),
        homotopy_target: ChainMap::zero(-1),
        verified_to: cutoff.clone(),
        report,
    })
}
