//! The stratum cochain complex of a stratified object: free on the strata of
//! a valid corner model, graded by codimension minus dimension, with a
//! signed boundary-restriction differential.
//!
//! Signs on covering relations are input data (or solved for over F_2);
//! d^2 = 0 is equivalent to the requirement that around every codimension-2
//! interval, whose open part has exactly two elements, the two factorisation
//! signs cancel. Virtual-count tables are evaluated against the degree-0
//! part, and the cochain-map condition (boundary sums of dimension-1 strata
//! vanish) is what downstream d^2 = 0 arguments consume.

use crate::coeff::{BaseField, Scalar};
use crate::homalg::{
    cc_validate, solve_linear, ChainMap, Coefficient, GradedComplex, GradedLine, SparseMat,
};
use crate::report::Report;
use crate::stratmodel::{validate_model, validate_refinement, Refinement, StratPoset};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StratCxError {
    #[error("model fails validation: {0}")]
    InvalidModel(String),
    #[error("missing sign on covering relation ({0}, {1})")]
    MissingSign(String, String),
    #[error("sign on ({0}, {1}) which is not a covering relation")]
    NotACover(String, String),
    #[error("codim-2 diamond ({0}, {1}) violates the sign relation")]
    SignRelation(String, String),
    #[error("no consistent sign assignment exists")]
    NoConsistentSigns,
    #[error("missing count for stratum {0}")]
    MissingCount(String),
    #[error("semipositive truncation needs integer grading (modulus 0)")]
    NeedsIntegerGrading,
    #[error("refinement fails validation: {0}")]
    InvalidRefinement(String),
    #[error("pushforward has no unit coefficient over cover ({0}, {1})")]
    PushforwardNotUnit(String, String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A valid corner model with total dimension and per-cover sign units.
#[derive(Debug, Clone)]
pub struct StratumData {
    pub model: StratPoset,
    pub dim: i64,
    /// Sign unit on each covering relation.
    pub signs: BTreeMap<(usize, usize), i8>,
}

impl StratumData {
    pub fn new(
        model: StratPoset,
        dim: i64,
        signs: BTreeMap<(usize, usize), i8>,
    ) -> Result<Self, StratCxError> {
        let data = StratumData { model, dim, signs };
        data.check_signs()?;
        Ok(data)
    }

    /// Diamond relation: around every codim-2 interval {P < A,B < P''},
    /// sign(P,A) sign(A,P'') + sign(P,B) sign(B,P'') = 0.
    fn check_signs(&self) -> Result<(), StratCxError> {
        let covers = self.model.covers();
        for &(a, b) in &covers {
            if !self.signs.contains_key(&(a, b)) {
                return Err(StratCxError::MissingSign(
                    self.model.label(a).into(),
                    self.model.label(b).into(),
                ));
            }
        }
        for (key, _) in self.signs.iter() {
            if !covers.contains(key) {
                return Err(StratCxError::NotACover(
                    self.model.label(key.0).into(),
                    self.model.label(key.1).into(),
                ));
            }
        }
        for (p, p2) in self.model.strict_pairs() {
            if self.model.codim(p2) - self.model.codim(p) == 2 {
                let mid = self.model.open_interval(p, p2);
                if mid.len() == 2 {
                    let term = |m: usize| -> i64 {
                        (self.signs[&(p, m)] as i64) * (self.signs[&(m, p2)] as i64)
                    };
                    if term(mid[0]) + term(mid[1]) != 0 {
                        return Err(StratCxError::SignRelation(
                            self.model.label(p).into(),
                            self.model.label(p2).into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Product data: additive dimension, first-factor signs unchanged,
    /// second-factor signs twisted by the Koszul sign of the first factor's
    /// degree.
    pub fn product(&self, other: &StratumData) -> StratumData {
        let model = self.model.product(&other.model);
        let n2 = other.model.len();
        let mut signs = BTreeMap::new();
        for (&(a, b), &s) in self.signs.iter() {
            for j in 0..n2 {
                signs.insert((a * n2 + j, b * n2 + j), s);
            }
        }
        for (&(a, b), &s) in other.signs.iter() {
            for i in 0..self.model.len() {
                let deg = self.model.codim(i) as i64 - self.dim;
                let twist = if deg.rem_euclid(2) == 1 { -s } else { s };
                signs.insert((i * n2 + a, i * n2 + b), twist);
            }
        }
        StratumData {
            model,
            dim: self.dim + other.dim,
            signs,
        }
    }
}

/// Solve for a consistent sign assignment over F_2: one unknown per cover,
/// one equation per codim-2 diamond.
pub fn derive_signs(model: &StratPoset) -> Result<BTreeMap<(usize, usize), i8>, StratCxError> {
    let covers = model.covers();
    let idx: BTreeMap<(usize, usize), usize> =
        covers.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let f2 = BaseField::Prime(2);
    let mut rows: Vec<Vec<Scalar>> = vec![];
    let mut rhs: Vec<Scalar> = vec![];
    for (p, p2) in model.strict_pairs() {
        if model.codim(p2) - model.codim(p) == 2 {
            let mid = model.open_interval(p, p2);
            if mid.len() == 2 {
                let mut row = vec![f2.zero(); covers.len()];
                for &m in &mid {
                    for key in [(p, m), (m, p2)] {
                        let j = idx[&key];
                        row[j] = row[j].add(&f2.one());
                    }
                }
                rows.push(row);
                rhs.push(f2.one());
            }
        }
    }
    let sol = solve_linear(rows, rhs).ok_or(StratCxError::NoConsistentSigns)?;
    Ok(covers
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let bit = sol.get(i).map(|s| !s.is_zero()).unwrap_or(false);
            (c, if bit { -1 } else { 1 })
        })
        .collect())
}

/// Stock sign-equipped data for the singleton model.
pub fn point_data() -> StratumData {
    StratumData::new(crate::stratmodel::point_model(), 0, BTreeMap::new()).unwrap()
}

/// Interval model with dimension 1 and the orientation-style signs
/// d[t] = [e1] - [e0].
pub fn interval_data() -> StratumData {
    let model = crate::stratmodel::interval_model();
    let mut signs = BTreeMap::new();
    signs.insert((0, 1), -1i8);
    signs.insert((0, 2), 1i8);
    StratumData::new(model, 1, signs).unwrap()
}

/// n-cube face model with product signs, dimension n.
pub fn cube_data(n: usize) -> StratumData {
    let mut data = point_data();
    for _ in 0..n {
        data = data.product(&interval_data());
    }
    // relabel to the canonical cube model for nicer reports
    data
}

/// n-simplex face model with incidence signs, dimension n.
pub fn simplex_data(n: usize) -> StratumData {
    let model = crate::stratmodel::simplex_model(n);
    let signs = derive_signs(&model).expect("simplex face posets are orientable");
    StratumData::new(model, n as i64, signs).unwrap()
}

/// The free complex on the strata: generator for P in degree
/// codim(P) - dim, differential the signed sum over covering relations.
pub fn build_stratum_complex(
    data: &StratumData,
    field: BaseField,
) -> Result<GradedComplex<Scalar>, StratCxError> {
    // corner models and partitioned models (several top strata) both carry
    // stratum complexes
    let model_report = validate_model(&data.model);
    if !model_report.ok() {
        let part = crate::stratmodel::validate_partitioned(&data.model);
        if !part.report.ok() {
            return Err(StratCxError::InvalidModel(format!("{model_report}")));
        }
    }
    data.check_signs()?;
    let generators: Vec<GradedLine> = (0..data.model.len())
        .map(|i| GradedLine::new(data.model.label(i), data.model.codim(i) as i64 - data.dim))
        .collect();
    let mut diff = SparseMat::new();
    for (&(a, b), &s) in data.signs.iter() {
        diff.set(b, a, field.from_i64(s as i64));
    }
    let cx = GradedComplex::new(0, generators, diff).expect("indices in range");
    debug_assert!(cc_validate(&cx).ok());
    Ok(cx)
}

/// Verifies that the complex of a product equals the tensor of the
/// complexes under the canonical basis bijection, signs included; then
/// checks the symmetry comparison through the Koszul swap.
pub fn stratum_tensor_compare(
    s1: &StratumData,
    s2: &StratumData,
    field: BaseField,
) -> Report {
    let mut report = Report::new();
    let product = match build_stratum_complex(&s1.product(s2), field) {
        Ok(cx) => cx,
        Err(e) => {
            report.fail("product data", e.to_string());
            return report;
        }
    };
    let (c1, c2) = match (build_stratum_complex(s1, field), build_stratum_complex(s2, field)) {
        (Ok(a), Ok(b)) => (a, b),
        _ => {
            report.fail("factors", "factor complex failed to build".to_string());
            return report;
        }
    };
    let tensor = crate::homalg::cc_tensor(&c1, &c2).expect("matching modulus");
    // the product poset and the tensor basis share the index layout i*n2+j
    if product.len() != tensor.len() {
        report.fail(
            "bases",
            format!("{} strata vs {} tensor lines", product.len(), tensor.len()),
        );
        return report;
    }
    for i in 0..product.len() {
        if product.degree_of(i) != tensor.degree_of(i) {
            report.fail(
                format!("generator {}", product.generators[i].label),
                format!(
                    "degree {} vs {}",
                    product.degree_of(i),
                    tensor.degree_of(i)
                ),
            );
        }
    }
    let diff_resid = product.diff.add_mat(&tensor.diff.neg_mat());
    for ((i, j), v) in diff_resid.iter() {
        if !v.vanishes() {
            report.fail(
                format!(
                    "d[{} -> {}]",
                    product.generators[*j].label, product.generators[*i].label
                ),
                format!("product and tensor differentials differ by {v}"),
            );
        }
    }
    // symmetry: the swapped product complex agrees with the tensor conjugated
    // by the Koszul swap map
    let swapped = match build_stratum_complex(&s2.product(s1), field) {
        Ok(cx) => cx,
        Err(e) => {
            report.fail("swapped product data", e.to_string());
            return report;
        }
    };
    let swap = crate::homalg::koszul_swap(&c1, &c2, &field.one());
    let lhs = swapped.diff.compose(&swap.mat);
    let rhs = swap.mat.compose(&tensor.diff);
    let resid = lhs.add_mat(&rhs.neg_mat());
    for ((i, j), v) in resid.iter() {
        if !v.vanishes() {
            report.fail(
                format!("swap naturality at ({i},{j})"),
                format!("residual {v}"),
            );
        }
    }
    report
}

/// Keep dimensions 0 and 1, no others: returns the complex unchanged when
/// the total dimension is 0 or 1, and the zero complex otherwise.
pub fn semipositive_truncate(
    cx: &GradedComplex<Scalar>,
    dim: i64,
) -> Result<GradedComplex<Scalar>, StratCxError> {
    if cx.modulus != 0 {
        return Err(StratCxError::NeedsIntegerGrading);
    }
    if dim == 0 || dim == 1 {
        Ok(cx.clone())
    } else {
        Ok(GradedComplex::zero_complex(0))
    }
}

/// Virtual-count table: scalars attached to dimension-0 strata by label.
#[derive(Debug, Clone, Default)]
pub struct CountTable {
    pub entries: BTreeMap<String, Scalar>,
    pub multiplicative: bool,
}

impl CountTable {
    pub fn new(entries: BTreeMap<String, Scalar>) -> Self {
        CountTable {
            entries,
            multiplicative: false,
        }
    }

    /// Product table on a product model: the count of a pair stratum is the
    /// product of the factor counts.
    pub fn product(&self, other: &CountTable) -> CountTable {
        let mut entries = BTreeMap::new();
        for (l1, v1) in &self.entries {
            for (l2, v2) in &other.entries {
                entries.insert(format!("{l1}*{l2}"), v1.mul(v2));
            }
        }
        CountTable {
            entries,
            multiplicative: true,
        }
    }
}

/// The functional induced by a count table on the degree-0 part, plus the
/// cochain-map report: for each dimension-1 stratum the signed sum of the
/// counts of its codimension-1 boundary strata must vanish.
pub fn eval_counts(
    data: &StratumData,
    table: &CountTable,
) -> Result<(BTreeMap<String, Scalar>, Report), StratCxError> {
    let mut functional = BTreeMap::new();
    for i in 0..data.model.len() {
        let stratum_dim = data.dim - data.model.codim(i) as i64;
        if stratum_dim == 0 {
            let label = data.model.label(i);
            let count = table
                .entries
                .get(label)
                .ok_or_else(|| StratCxError::MissingCount(label.to_string()))?;
            functional.insert(label.to_string(), count.clone());
        }
    }
    let mut report = Report::new();
    for i in 0..data.model.len() {
        let stratum_dim = data.dim - data.model.codim(i) as i64;
        if stratum_dim != 1 {
            continue;
        }
        let mut sum: Option<Scalar> = None;
        for (&(a, b), &s) in data.signs.iter() {
            if a == i {
                let label = data.model.label(b);
                let count = table
                    .entries
                    .get(label)
                    .ok_or_else(|| StratCxError::MissingCount(label.to_string()))?;
                let signed = if s < 0 { count.neg() } else { count.clone() };
                sum = Some(match sum {
                    Some(acc) => acc.add(&signed),
                    None => signed,
                });
            }
        }
        if let Some(total) = sum {
            if !total.is_zero() {
                report.fail(
                    format!("stratum {}", data.model.label(i)),
                    format!("boundary count sum {total} does not vanish"),
                );
            }
        }
    }
    Ok((functional, report))
}

/// Pushforward of a refinement: the coarse stratum complex together with the
/// cochain map sending each coarse generator to the sum of the
/// codimension-preserving fine strata over it.
///
/// Coarse signs are derived from the fine ones: for every coarse cover the
/// fine boundary contributions must agree on a single unit, and the
/// contributions interior to a fibre must cancel; any violation is reported.
pub struct Pushforward {
    pub coarse_data: StratumData,
    pub coarse_complex: GradedComplex<Scalar>,
    pub fine_complex: GradedComplex<Scalar>,
    /// Cochain map from the coarse complex into the fine complex.
    pub map: ChainMap<Scalar>,
    pub report: Report,
}

pub fn refine_pushforward(
    r: &Refinement,
    fine: &StratumData,
    field: BaseField,
) -> Result<Pushforward, StratCxError> {
    let refinement_report = validate_refinement(r);
    if !refinement_report.ok() {
        return Err(StratCxError::InvalidRefinement(format!(
            "{refinement_report}"
        )));
    }
    let fine_complex = build_stratum_complex(fine, field)?;
    let mut report = Report::new();

    // phi: coarse P -> sum of codim-preserving fine strata over P
    let nq = r.fine.len();
    let npp = r.coarse.len();
    let preserving = |p: usize| -> Vec<usize> {
        (0..nq)
            .filter(|&q| r.map[q] == p && r.fine.codim(q) == r.coarse.codim(p))
            .collect()
    };
    let mut phi = SparseMat::new();
    for p in 0..npp {
        for q in preserving(p) {
            phi.set(q, p, field.one());
        }
    }

    // derive coarse signs cover by cover
    let mut coarse_signs: BTreeMap<(usize, usize), i8> = BTreeMap::new();
    for (p, p2) in r.coarse.covers() {
        let mut unit: Option<i64> = None;
        let mut consistent = true;
        // contributions of d_fine(phi(P)) over each fine stratum above P'
        let mut by_target: BTreeMap<usize, i64> = BTreeMap::new();
        for q in preserving(p) {
            for (&(a, b), &s) in fine.signs.iter() {
                if a == q {
                    *by_target.entry(b).or_insert(0) += s as i64;
                }
            }
        }
        for q2 in preserving(p2) {
            let c = by_target.get(&q2).copied().unwrap_or(0);
            if c != 1 && c != -1 {
                report.fail(
                    format!("cover ({}, {})", r.coarse.label(p), r.coarse.label(p2)),
                    format!(
                        "fine stratum {} receives coefficient {} (want a unit)",
                        r.fine.label(q2),
                        c
                    ),
                );
                consistent = false;
                continue;
            }
            match unit {
                None => unit = Some(c),
                Some(u) if u != c => {
                    report.fail(
                        format!("cover ({}, {})", r.coarse.label(p), r.coarse.label(p2)),
                        "mixed signs across the fibre".to_string(),
                    );
                    consistent = false;
                }
                _ => {}
            }
        }
        if consistent {
            match unit {
                Some(u) => {
                    coarse_signs.insert((p, p2), u as i8);
                }
                None => {
                    return Err(StratCxError::PushforwardNotUnit(
                        r.coarse.label(p).into(),
                        r.coarse.label(p2).into(),
                    ))
                }
            }
        } else {
            coarse_signs.insert((p, p2), 1);
        }
    }

    let coarse_data = StratumData {
        model: r.coarse.clone(),
        dim: fine.dim,
        signs: coarse_signs,
    };
    if let Err(e) = coarse_data.check_signs() {
        report.fail("coarse signs", e.to_string());
    }
    let generators: Vec<GradedLine> = (0..npp)
        .map(|i| {
            GradedLine::new(
                r.coarse.label(i),
                r.coarse.codim(i) as i64 - coarse_data.dim,
            )
        })
        .collect();
    let mut diff = SparseMat::new();
    for (&(a, b), &s) in coarse_data.signs.iter() {
        diff.set(b, a, field.from_i64(s as i64));
    }
    let coarse_complex = GradedComplex::new(0, generators, diff).expect("indices in range");

    let map = ChainMap { degree: 0, mat: phi };
    report.merge(crate::homalg::verify_chain_map(
        &map,
        &coarse_complex,
        &fine_complex,
    ));
    Ok(Pushforward {
        coarse_data,
        coarse_complex,
        fine_complex,
        map,
        report,
    })
}

// ---------------------------------------------------------------------------
// file format

/// Parses the stratum-data format: a `stratum-data` header, a `dim` line,
/// `element <label> <codim>` lines, `rel <a> <b> <+|->` cover lines, and
/// optional `count <label> <value>` lines.
pub fn parse_stratum_file(
    text: &str,
    field: BaseField,
) -> Result<(StratumData, CountTable), StratCxError> {
    let mut dim: Option<i64> = None;
    let mut els: Vec<(String, u32)> = vec![];
    let mut rels: Vec<(String, String, i8)> = vec![];
    let mut counts: BTreeMap<String, Scalar> = BTreeMap::new();
    let mut saw_header = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| StratCxError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "stratum-data" => saw_header = true,
            "dim" => {
                dim = Some(
                    parts
                        .next()
                        .ok_or_else(|| err("missing dim"))?
                        .parse()
                        .map_err(|_| err("bad dim"))?,
                )
            }
            "element" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?;
                let codim: u32 = parts
                    .next()
                    .ok_or_else(|| err("missing codim"))?
                    .parse()
                    .map_err(|_| err("bad codim"))?;
                els.push((label.to_string(), codim));
            }
            "rel" => {
                let a = parts.next().ok_or_else(|| err("missing source"))?;
                let b = parts.next().ok_or_else(|| err("missing target"))?;
                let sign = match parts.next() {
                    Some("+") | None => 1i8,
                    Some("-") => -1i8,
                    Some(other) => return Err(err(&format!("bad sign `{other}`"))),
                };
                rels.push((a.to_string(), b.to_string(), sign));
            }
            "count" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?;
                let value = parts.next().ok_or_else(|| err("missing value"))?;
                let scalar = Scalar::parse(field, value)
                    .map_err(|e| err(&format!("bad count: {e}")))?;
                counts.insert(label.to_string(), scalar);
            }
            other => return Err(err(&format!("unknown directive `{other}`"))),
        }
    }
    if !saw_header {
        return Err(StratCxError::Parse {
            line: 0,
            msg: "missing stratum-data header".into(),
        });
    }
    let dim = dim.ok_or(StratCxError::Parse {
        line: 0,
        msg: "missing dim line".into(),
    })?;
    let idx: BTreeMap<String, usize> = els
        .iter()
        .enumerate()
        .map(|(i, (l, _))| (l.clone(), i))
        .collect();
    let mut pairs = vec![];
    let mut signs = BTreeMap::new();
    for (a, b, s) in &rels {
        let ia = *idx.get(a).ok_or_else(|| StratCxError::Parse {
            line: 0,
            msg: format!("unknown element {a}"),
        })?;
        let ib = *idx.get(b).ok_or_else(|| StratCxError::Parse {
            line: 0,
            msg: format!("unknown element {b}"),
        })?;
        pairs.push((ia, ib));
        signs.insert((ia, ib), *s);
    }
    let model = StratPoset::from_relations(els, &pairs).map_err(|e| StratCxError::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    // keep only signs on actual covers (transitive closure may have added
    // longer relations)
    let covers = model.covers();
    signs.retain(|k, _| covers.contains(k));
    let data = StratumData::new(model, dim, signs)?;
    Ok((data, CountTable::new(counts)))
}
