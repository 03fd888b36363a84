//! Flow categories: graded objects, morphism descriptors labelled by
//! positive-cone monoid elements with virtual dimensions and counts, the
//! derived broken-stratum posets, and canonical factorized lifts.
//!
//! Morphism data is a finite energy-truncated table. A stratum is considered
//! nonempty exactly when all of its constituent descriptors are recorded;
//! ingestion produces tables closed under composition, so broken-stratum
//! posets always carry their unbroken minimal element.

use crate::coeff::{BaseField, Cutoff, GammaElt, GammaMonoid, Rat, Scalar};
use crate::report::Report;
use crate::stratmodel::{validate_model, StratPoset};
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("grading modulus {0} must be even unless the field has characteristic 2")]
    OddModulus(u32),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("exponent vector has wrong rank")]
    BadRank,
    #[error("descriptor action {0} outside [0, E_max]")]
    EnergyBound(String),
    #[error("count must be present exactly on vdim-0 descriptors")]
    CountShape,
    #[error("descriptor ({0}, {1}) at the given label is not recorded")]
    MissingDescriptor(String, String),
    #[error("constituent ({0}, {1}) missing from the morphism table")]
    MissingConstituent(String, String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowObject {
    pub label: String,
    pub degree: i64,
}

/// Shadow of a moduli space: its virtual dimension, and its count when the
/// dimension is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphismDescriptor {
    pub vdim: i64,
    pub count: Option<Scalar>,
}

/// A broken trajectory: the starting object and the ordered segments
/// (label, next object); the number of breaks is `segments.len() - 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BrokenStratum {
    pub start: usize,
    pub segments: Vec<(GammaElt, usize)>,
}

impl BrokenStratum {
    pub fn breaks(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn end(&self) -> usize {
        self.segments.last().expect("nonempty").1
    }

    pub fn total_label(&self, monoid: &GammaMonoid) -> GammaElt {
        let mut acc = monoid.zero();
        for (l, _) in &self.segments {
            acc = monoid.add(&acc, l);
        }
        acc
    }

    /// The objects visited, including both ends.
    pub fn route(&self) -> Vec<usize> {
        let mut out = vec![self.start];
        out.extend(self.segments.iter().map(|(_, q)| *q));
        out
    }

    pub fn render(&self, cat: &FlowCategory) -> String {
        let mut s = cat.objects[self.start].label.clone();
        for (l, q) in &self.segments {
            s.push_str(&format!(
                "-{}:{}",
                l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                cat.objects[*q].label
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct FlowCategory {
    pub modulus: u32,
    pub monoid: Arc<GammaMonoid>,
    pub field: BaseField,
    pub objects: Vec<FlowObject>,
    /// Strict order used in the zero-action condition; defaults to
    /// (degree, label).
    strict_order: Vec<Vec<bool>>,
    pub morphisms: BTreeMap<(usize, usize, GammaElt), MorphismDescriptor>,
    pub energy_bound: Cutoff,
}

impl FlowCategory {
    pub fn new(
        modulus: u32,
        monoid: Arc<GammaMonoid>,
        field: BaseField,
        objects: Vec<FlowObject>,
        energy_bound: Cutoff,
    ) -> Self {
        let n = objects.len();
        let mut strict_order = vec![vec![false; n]; n];
        for a in 0..n {
            for b in 0..n {
                strict_order[a][b] = (objects[a].degree, &objects[a].label)
                    < (objects[b].degree, &objects[b].label);
            }
        }
        FlowCategory {
            modulus,
            monoid,
            field,
            objects,
            strict_order,
            morphisms: BTreeMap::new(),
            energy_bound,
        }
    }

    pub fn object_index(&self, label: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.label == label)
    }

    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.strict_order[a][b]
    }

    pub fn record(
        &mut self,
        p: usize,
        q: usize,
        label: GammaElt,
        vdim: i64,
        count: Option<Scalar>,
    ) -> Result<(), FlowError> {
        let action = self
            .monoid
            .action(&label)
            .map_err(|_| FlowError::BadRank)?;
        if action.is_negative() || !self.energy_bound.admits(&action) && self.energy_bound != Cutoff::Finite(action.clone()) {
            // actions above the bound are unrecorded by definition; equality
            // with the bound is also out of range
            if action.is_negative() || matches!(&self.energy_bound, Cutoff::Finite(e) if action >= *e) {
                return Err(FlowError::EnergyBound(crate::coeff::fmt_rat(&action)));
            }
        }
        if (vdim == 0) != count.is_some() {
            return Err(FlowError::CountShape);
        }
        self.morphisms.insert((p, q, label), MorphismDescriptor { vdim, count });
        Ok(())
    }

    pub fn descriptor(&self, p: usize, q: usize, label: &GammaElt) -> Option<&MorphismDescriptor> {
        self.morphisms.get(&(p, q, label.clone()))
    }

    /// Enumerates the broken strata of a recorded descriptor: all sequences
    /// whose constituents are recorded, ordered by merging adjacent segments
    /// (the unbroken stratum is minimal).
    pub fn broken_strata(
        &self,
        p: usize,
        q: usize,
        label: &GammaElt,
    ) -> Result<BrokenStrataPoset, FlowError> {
        let action = self.monoid.action(label).map_err(|_| FlowError::BadRank)?;
        if let Cutoff::Finite(e) = &self.energy_bound {
            if action > *e {
                return Err(FlowError::EnergyBound(crate::coeff::fmt_rat(&action)));
            }
        }
        if self.descriptor(p, q, label).is_none() {
            return Err(FlowError::MissingDescriptor(
                self.objects[p].label.clone(),
                self.objects[q].label.clone(),
            ));
        }
        let mut strata: Vec<BrokenStratum> = vec![];
        let mut prefix: Vec<(GammaElt, usize)> = vec![];
        self.extend_paths(p, p, q, label, &mut prefix, &mut strata);
        strata.sort();
        // order: x < y when y splits x; generated by single merges, but the
        // coarsening relation is already transitive
        let elements: Vec<(String, u32)> = strata
            .iter()
            .map(|s| (s.render(self), s.breaks() as u32))
            .collect();
        let mut relations = vec![];
        for (i, x) in strata.iter().enumerate() {
            for (j, y) in strata.iter().enumerate() {
                if i != j && coarsens(self, x, y) {
                    relations.push((i, j));
                }
            }
        }
        let poset = StratPoset::from_relations(elements, &relations)
            .expect("coarsening relation is acyclic");
        Ok(BrokenStrataPoset { poset, strata })
    }

    fn extend_paths(
        &self,
        current: usize,
        start: usize,
        target: usize,
        remaining: &GammaElt,
        prefix: &mut Vec<(GammaElt, usize)>,
        out: &mut Vec<BrokenStratum>,
    ) {
        // zero-action segments must strictly increase the designated order;
        // this is part of the sequence condition and bounds the recursion
        let step_allowed = |from: usize, to: usize, l: &GammaElt| -> bool {
            let action = self.monoid.action(l).expect("rank-checked");
            !action.is_zero() || self.precedes(from, to)
        };
        // close the path in one segment
        if self.descriptor(current, target, remaining).is_some()
            && step_allowed(current, target, remaining)
        {
            let mut segments = prefix.clone();
            segments.push((remaining.clone(), target));
            out.push(BrokenStratum { start, segments });
        }
        // or break once more at a recorded intermediate descriptor
        for ((a, b, l), _) in self.morphisms.iter() {
            if *a != current || (*b == target && *l == *remaining) {
                continue;
            }
            if !step_allowed(current, *b, l) {
                continue;
            }
            let rest = self.monoid.sub(remaining, l);
            let rest_action = self.monoid.action(&rest).expect("rank-checked");
            if rest_action.is_negative() {
                continue;
            }
            prefix.push((l.clone(), *b));
            self.extend_paths(*b, start, target, &rest, prefix, out);
            prefix.pop();
        }
    }

    /// The canonical maximal factorization of a broken stratum into its
    /// constituent descriptor triples.
    pub fn canonical_factorized_lift(
        &self,
        stratum: &BrokenStratum,
    ) -> Result<Factorization, FlowError> {
        let mut factors = vec![];
        let mut at = stratum.start;
        for (l, q) in &stratum.segments {
            if self.descriptor(at, *q, l).is_none() {
                return Err(FlowError::MissingConstituent(
                    self.objects[at].label.clone(),
                    self.objects[*q].label.clone(),
                ));
            }
            factors.push((at, *q, l.clone()));
            at = *q;
        }
        Ok(Factorization { factors })
    }
}

/// x coarsens y: the segments of x are consecutive runs of the segments of
/// y with matching endpoints and summed labels.
fn coarsens(cat: &FlowCategory, x: &BrokenStratum, y: &BrokenStratum) -> bool {
    if x.start != y.start || x.segments.len() > y.segments.len() {
        return false;
    }
    let mut yi = 0;
    for (lx, qx) in &x.segments {
        let mut acc = cat.monoid.zero();
        let mut matched = false;
        while yi < y.segments.len() {
            let (ly, qy) = &y.segments[yi];
            acc = cat.monoid.add(&acc, ly);
            yi += 1;
            if acc == *lx && *qy == *qx {
                matched = true;
                break;
            }
        }
        if !matched {
            return false;
        }
    }
    yi == y.segments.len()
}

#[derive(Debug, Clone)]
pub struct BrokenStrataPoset {
    pub poset: StratPoset,
    pub strata: Vec<BrokenStratum>,
}

/// The maximal product decomposition of a stratum: the ordered list of
/// constituent descriptors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub factors: Vec<(usize, usize, GammaElt)>,
}

impl Factorization {
    /// Group consecutive factors according to the coarser stratum's
    /// segments: merging breaks corresponds to grouping factors.
    pub fn group_to(&self, coarse: &BrokenStratum, monoid: &GammaMonoid) -> Option<Vec<Vec<(usize, usize, GammaElt)>>> {
        let mut groups = vec![];
        let mut fi = 0;
        let mut at = coarse.start;
        for (l, q) in &coarse.segments {
            let mut group = vec![];
            let mut acc = monoid.zero();
            let mut here = at;
            loop {
                if fi >= self.factors.len() {
                    return None;
                }
                let (a, b, lab) = &self.factors[fi];
                if *a != here {
                    return None;
                }
                acc = monoid.add(&acc, lab);
                group.push(self.factors[fi].clone());
                here = *b;
                fi += 1;
                if acc == *l && here == *q {
                    break;
                }
            }
            groups.push(group);
            at = *q;
        }
        if fi == self.factors.len() {
            Some(groups)
        } else {
            None
        }
    }
}

/// An odd grading modulus breaks the symmetric monoidal sign conventions
/// away from characteristic 2.
pub fn check_grading_modulus(modulus: u32, field: BaseField) -> Result<(), FlowError> {
    if modulus % 2 == 1 && field.characteristic() != 2 {
        return Err(FlowError::OddModulus(modulus));
    }
    Ok(())
}

/// Validation: grading-modulus parity, degree law, zero-action strictness,
/// count shape, dimension additivity on recorded composable pairs, and
/// validity of every broken-stratum poset as a corner model with
/// codimension the number of breaks.
pub fn validate_flow_category(cat: &FlowCategory) -> Report {
    let mut report = Report::new();
    if let Err(e) = check_grading_modulus(cat.modulus, cat.field) {
        report.fail("grading", e.to_string());
    }
    for ((p, q, l), desc) in cat.morphisms.iter() {
        let loc = || {
            format!(
                "({}, {}, {:?})",
                cat.objects[*p].label, cat.objects[*q].label, l
            )
        };
        let action = match cat.monoid.action(l) {
            Ok(a) => a,
            Err(_) => {
                report.fail(loc(), "exponent rank mismatch".to_string());
                continue;
            }
        };
        if action.is_negative() {
            report.fail(loc(), "negative action".to_string());
        }
        if let Cutoff::Finite(e) = &cat.energy_bound {
            if action > *e {
                report.fail(loc(), "action above the energy bound".to_string());
            }
        }
        if action == Rat::from_integer(0.into()) && !cat.precedes(*p, *q) {
            report.fail(
                loc(),
                "zero-action descriptor without strict order increase".to_string(),
            );
        }
        if (desc.vdim == 0) != desc.count.is_some() {
            report.fail(loc(), "count present iff vdim = 0 violated".to_string());
        }
        // degree law: vdim = deg q - deg p - 1 (mod d)
        let want = cat.objects[*q].degree - cat.objects[*p].degree - 1;
        let ok = if cat.modulus == 0 {
            desc.vdim == want
        } else {
            (desc.vdim - want).rem_euclid(cat.modulus as i64) == 0
        };
        if !ok {
            report.fail(
                loc(),
                format!("vdim {} violates the degree law (expected {})", desc.vdim, want),
            );
        }
    }
    // additivity on composable recorded pairs
    for ((p, q, l), d1) in cat.morphisms.iter() {
        for ((q2, r, m), d2) in cat.morphisms.iter() {
            if q2 != q {
                continue;
            }
            let sum = cat.monoid.add(l, m);
            match cat.morphisms.get(&(*p, *r, sum)) {
                Some(d3) => {
                    if d3.vdim != d1.vdim + d2.vdim + 1 {
                        report.fail(
                            format!(
                                "({}, {}, {}) composite",
                                cat.objects[*p].label,
                                cat.objects[*q].label,
                                cat.objects[*r].label
                            ),
                            format!(
                                "vdim {} but factors give {} + {} + 1",
                                d3.vdim, d1.vdim, d2.vdim
                            ),
                        );
                    }
                }
                None => {
                    report.fail(
                        format!(
                            "({}, {}, {}) composite",
                            cat.objects[*p].label,
                            cat.objects[*q].label,
                            cat.objects[*r].label
                        ),
                        "composable pair without a recorded composite".to_string(),
                    );
                }
            }
        }
    }
    if !report.ok() {
        return report;
    }
    // broken-stratum posets are corner models
    let keys: Vec<(usize, usize, GammaElt)> = cat.morphisms.keys().cloned().collect();
    let findings: Vec<Report> = keys
        .par_iter()
        .map(|(p, q, l)| {
            let mut r = Report::new();
            match cat.broken_strata(*p, *q, l) {
                Ok(bs) => {
                    for (i, s) in bs.strata.iter().enumerate() {
                        if bs.poset.codim(i) as usize != s.breaks() {
                            r.fail(s.render(cat), "codimension is not the break count".to_string());
                        }
                    }
                    let model_report = validate_model(&bs.poset);
                    if !model_report.ok() {
                        r.fail(
                            format!(
                                "strata of ({}, {}, {:?})",
                                cat.objects[*p].label, cat.objects[*q].label, l
                            ),
                            format!("broken-stratum poset invalid: {model_report}"),
                        );
                    }
                }
                Err(e) => {
                    r.fail(
                        format!(
                            "strata of ({}, {}, {:?})",
                            cat.objects[*p].label, cat.objects[*q].label, l
                        ),
                        e.to_string(),
                    );
                }
            }
            r
        })
        .collect();
    for f in findings {
        report.merge(f);
    }
    report
}

// ---------------------------------------------------------------------------
// file format

/// Line format:
/// ```text
/// flow-category
/// modulus <d>
/// field <q|f2|fp:N>
/// monoid <a1> <a2> ...      # rational action vector, rank from arity
/// emax <E|inf>
/// object <label> <degree>
/// morphism <p> <q> <g1,...,gr|-> <vdim> [count]
/// ```
/// A bare `-` stands for the empty exponent vector of the trivial monoid.
pub fn parse_flow_file(text: &str) -> Result<FlowCategory, FlowError> {
    let mut modulus = 0u32;
    let mut field = BaseField::Rationals;
    let mut monoid: Option<Arc<GammaMonoid>> = None;
    let mut emax = Cutoff::Infinite;
    let mut objects: Vec<FlowObject> = vec![];
    let mut morphs: Vec<(String, String, GammaElt, i64, Option<String>)> = vec![];
    let mut saw_header = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| FlowError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "flow-category" => saw_header = true,
            "modulus" => {
                modulus = parts
                    .next()
                    .ok_or_else(|| err("missing modulus"))?
                    .parse()
                    .map_err(|_| err("bad modulus"))?
            }
            "field" => {
                field = parts
                    .next()
                    .ok_or_else(|| err("missing field"))?
                    .parse()
                    .map_err(|_| err("bad field"))?
            }
            "monoid" => {
                let action: Result<Vec<Rat>, _> =
                    parts.map(crate::coeff::parse_rat).collect();
                monoid = Some(Arc::new(GammaMonoid::new(
                    action.map_err(|_| err("bad action vector"))?,
                )));
            }
            "emax" => {
                let v = parts.next().ok_or_else(|| err("missing bound"))?;
                emax = if v == "inf" {
                    Cutoff::Infinite
                } else {
                    Cutoff::Finite(crate::coeff::parse_rat(v).map_err(|_| err("bad bound"))?)
                };
            }
            "object" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?;
                let degree: i64 = parts
                    .next()
                    .ok_or_else(|| err("missing degree"))?
                    .parse()
                    .map_err(|_| err("bad degree"))?;
                objects.push(FlowObject {
                    label: label.to_string(),
                    degree,
                });
            }
            "morphism" => {
                let p = parts.next().ok_or_else(|| err("missing source"))?;
                let q = parts.next().ok_or_else(|| err("missing target"))?;
                let g = parts.next().ok_or_else(|| err("missing label"))?;
                let gamma: GammaElt = if g == "-" {
                    vec![]
                } else {
                    g.split(',')
                        .map(|x| x.trim().parse::<i64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err("bad exponent vector"))?
                };
                let vdim: i64 = parts
                    .next()
                    .ok_or_else(|| err("missing vdim"))?
                    .parse()
                    .map_err(|_| err("bad vdim"))?;
                let count = parts.next().map(String::from);
                morphs.push((p.to_string(), q.to_string(), gamma, vdim, count));
            }
            other => return Err(err(&format!("unknown directive `{other}`"))),
        }
    }
    if !saw_header {
        return Err(FlowError::Parse {
            line: 0,
            msg: "missing flow-category header".into(),
        });
    }
    let monoid = monoid.unwrap_or_else(GammaMonoid::trivial);
    check_grading_modulus(modulus, field)?;
    let mut cat = FlowCategory::new(modulus, monoid, field, objects, emax);
    for (p, q, gamma, vdim, count) in morphs {
        let ip = cat
            .object_index(&p)
            .ok_or(FlowError::UnknownObject(p.clone()))?;
        let iq = cat
            .object_index(&q)
            .ok_or(FlowError::UnknownObject(q.clone()))?;
        let scalar = match count {
            Some(c) => Some(Scalar::parse(field, &c).map_err(|e| FlowError::Parse {
                line: 0,
                msg: e.to_string(),
            })?),
            None => None,
        };
        cat.record(ip, iq, gamma, vdim, scalar)?;
    }
    Ok(cat)
}

pub fn flow_to_text(cat: &FlowCategory) -> String {
    let mut out = String::from("flow-category\n");
    out.push_str(&format!("modulus {}\n", cat.modulus));
    out.push_str(&format!("field {}\n", cat.field));
    if cat.monoid.rank() > 0 {
        out.push_str("monoid");
        for a in cat.monoid.action_vector() {
            out.push_str(&format!(" {}", crate::coeff::fmt_rat(a)));
        }
        out.push('\n');
    }
    out.push_str(&format!("emax {}\n", cat.energy_bound));
    for o in &cat.objects {
        out.push_str(&format!("object {} {}\n", o.label, o.degree));
    }
    for ((p, q, l), d) in cat.morphisms.iter() {
        let g = if l.is_empty() {
            "-".to_string()
        } else {
            l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        match &d.count {
            Some(c) => out.push_str(&format!(
                "morphism {} {} {} {} {}\n",
                cat.objects[*p].label, cat.objects[*q].label, g, d.vdim, c
            )),
            None => out.push_str(&format!(
                "morphism {} {} {} {}\n",
                cat.objects[*p].label, cat.objects[*q].label, g, d.vdim
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Scalar {
        BaseField::Rationals.from_i64(n)
    }

    /// Objects a < b < c in degrees 0, 1, 2 over the trivial monoid, with
    /// descriptors for every pair.
    fn three_chain() -> FlowCategory {
        let m = GammaMonoid::trivial();
        let objects = vec![
            FlowObject { label: "a".into(), degree: 0 },
            FlowObject { label: "b".into(), degree: 1 },
            FlowObject { label: "c".into(), degree: 2 },
        ];
        let mut cat = FlowCategory::new(0, m, BaseField::Rationals, objects, Cutoff::Infinite);
        cat.record(0, 1, vec![], 0, Some(q(1))).unwrap();
        cat.record(1, 2, vec![], 0, Some(q(1))).unwrap();
        cat.record(0, 2, vec![], 1, None).unwrap();
        cat
    }

    #[test]
    fn empty_category_validates() {
        let cat = FlowCategory::new(
            0,
            GammaMonoid::trivial(),
            BaseField::Rationals,
            vec![],
            Cutoff::Infinite,
        );
        assert!(validate_flow_category(&cat).ok());
    }

    #[test]
    fn single_morphism_validates() {
        let m = GammaMonoid::trivial();
        let objects = vec![
            FlowObject { label: "a".into(), degree: 0 },
            FlowObject { label: "b".into(), degree: 1 },
        ];
        let mut cat = FlowCategory::new(0, m, BaseField::Rationals, objects, Cutoff::Infinite);
        cat.record(0, 1, vec![], 0, Some(q(1))).unwrap();
        assert!(validate_flow_category(&cat).ok());
    }

    #[test]
    fn broken_strata_of_a_two_step_chain() {
        let cat = three_chain();
        let bs = cat.broken_strata(0, 2, &vec![]).unwrap();
        assert_eq!(bs.strata.len(), 2);
        assert_eq!(bs.poset.minimal_elements().len(), 1);
        let min = bs.poset.minimal_elements()[0];
        assert_eq!(bs.strata[min].breaks(), 0);
        assert!(validate_model(&bs.poset).ok());
    }

    #[test]
    fn no_intermediates_gives_single_stratum() {
        let m = GammaMonoid::trivial();
        let objects = vec![
            FlowObject { label: "a".into(), degree: 0 },
            FlowObject { label: "b".into(), degree: 1 },
        ];
        let mut cat = FlowCategory::new(0, m, BaseField::Rationals, objects, Cutoff::Infinite);
        cat.record(0, 1, vec![], 0, Some(q(1))).unwrap();
        let bs = cat.broken_strata(0, 1, &vec![]).unwrap();
        assert_eq!(bs.strata.len(), 1);
    }

    #[test]
    fn additivity_violation_is_located() {
        let mut cat = three_chain();
        cat.morphisms.insert(
            (0, 2, vec![]),
            MorphismDescriptor { vdim: 2, count: None },
        );
        let report = validate_flow_category(&cat);
        assert!(!report.ok());
        assert!(report
            .findings
            .iter()
            .any(|f| f.location.contains("composite") || f.message.contains("degree law")));
    }

    #[test]
    fn factorization_of_broken_strata() {
        let cat = three_chain();
        let bs = cat.broken_strata(0, 2, &vec![]).unwrap();
        for s in &bs.strata {
            let f = cat.canonical_factorized_lift(s).unwrap();
            assert_eq!(f.factors.len(), s.segments.len());
        }
        // grouping a fine stratum to the coarse one
        let fine = bs.strata.iter().find(|s| s.breaks() == 1).unwrap();
        let coarse = bs.strata.iter().find(|s| s.breaks() == 0).unwrap();
        let f = cat.canonical_factorized_lift(fine).unwrap();
        let groups = f.group_to(coarse, &cat.monoid).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 2);
    }

    #[test]
    fn graded_monoid_strata() {
        // Z-graded actions: a -> b with T^1, b -> c with T^2, a -> c with T^3
        let m = GammaMonoid::standard_z();
        let objects = vec![
            FlowObject { label: "a".into(), degree: 0 },
            FlowObject { label: "b".into(), degree: 1 },
            FlowObject { label: "c".into(), degree: 2 },
        ];
        let mut cat = FlowCategory::new(0, m, BaseField::Rationals, objects, Cutoff::Infinite);
        cat.record(0, 1, vec![1], 0, Some(q(1))).unwrap();
        cat.record(1, 2, vec![2], 0, Some(q(-1))).unwrap();
        cat.record(0, 2, vec![3], 1, None).unwrap();
        assert!(validate_flow_category(&cat).ok());
        let bs = cat.broken_strata(0, 2, &vec![3]).unwrap();
        assert_eq!(bs.strata.len(), 2);
        // a label with too little action for the composite has one stratum
        let mut cat2 = cat.clone();
        cat2.record(0, 2, vec![1], 1, None).unwrap();
        let bs2 = cat2.broken_strata(0, 2, &vec![1]).unwrap();
        assert_eq!(bs2.strata.len(), 1);
    }

    #[test]
    fn odd_modulus_needs_characteristic_two() {
        assert!(check_grading_modulus(3, BaseField::Rationals).is_err());
        assert!(check_grading_modulus(3, BaseField::Prime(2)).is_ok());
        assert!(check_grading_modulus(2, BaseField::Rationals).is_ok());
        assert!(check_grading_modulus(0, BaseField::Rationals).is_ok());
        let m = GammaMonoid::trivial();
        let cat = FlowCategory::new(
            3,
            m,
            BaseField::Rationals,
            vec![],
            Cutoff::Infinite,
        );
        assert!(!validate_flow_category(&cat).ok());
    }

    #[test]
    fn energy_bound_is_enforced() {
        let m = GammaMonoid::standard_z();
        let objects = vec![
            FlowObject { label: "a".into(), degree: 0 },
            FlowObject { label: "b".into(), degree: 1 },
        ];
        let mut cat = FlowCategory::new(
            0,
            m,
            BaseField::Rationals,
            objects,
            Cutoff::Finite(Rat::from_integer(2.into())),
        );
        assert!(cat.record(0, 1, vec![5], 0, Some(q(1))).is_err());
        assert!(cat.record(0, 1, vec![1], 0, Some(q(1))).is_ok());
    }

    #[test]
    fn flow_file_roundtrip() {
        let cat = three_chain();
        let text = flow_to_text(&cat);
        let back = parse_flow_file(&text).unwrap();
        assert_eq!(back.objects.len(), 3);
        assert_eq!(back.morphisms.len(), 3);
        assert!(validate_flow_category(&back).ok());
        assert!(parse_flow_file("not a flow file").is_err());
    }
}
