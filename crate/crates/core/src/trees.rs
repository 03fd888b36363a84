//! Tree-shaped multimodules: k-input analogues of continuation cubes,
//! stratified by labelled trees with a single fat vertex. Multicomposition
//! grafts trees (collapsing the arc labelled by the middle category's
//! objects and summing the monoid labels), and the induced maps
//! `CF(X_1) (x) ... (x) CF(X_k) -> CF(X)` compose up to the Koszul
//! regrouping of cube factors.
//!
//! Trees are stored with a canonical planar embedding (leaf order = input
//! order); no identity multimorphisms are synthesized.

use crate::bimod::{all_faces, face_label, Face, FaceDescriptor, FactorSeq};
use crate::coeff::{Cutoff, GammaElt, GammaMonoid, NovikovElement, Scalar};
use crate::floer::{build_cf, FloerComplex};
use crate::flowcat::FlowCategory;
use crate::homalg::{cc_tensor, ChainMap, GradedComplex, SparseMat};
use crate::report::Report;
use crate::stratmodel::StratPoset;
use num_traits::Zero;
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("input flow categories are incompatible: {0}")]
    Incompatible(String),
    #[error("middle flow category of a multicomposition does not match")]
    MiddleMismatch,
    #[error("composition slot {0} out of range")]
    BadSlot(usize),
    #[error("missing data for face {0}")]
    MissingFace(String),
    #[error("count shape: count present iff vdim = 0")]
    CountShape,
    #[error("central descriptor not recorded for the requested poset")]
    MissingCentral,
    #[error("tree is not an admissible multimodule shape: {0}")]
    BadTree(String),
    #[error(transparent)]
    Bimod(#[from] crate::bimod::BimodError),
    #[error(transparent)]
    Floer(#[from] crate::floer::FloerError),
    #[error(transparent)]
    Homalg(#[from] crate::homalg::HomalgError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type MultiKey = (Vec<usize>, usize, GammaElt);
pub type MultiTable = BTreeMap<MultiKey, FaceDescriptor>;

/// Strictification bookkeeping: a directed tree with vertices carrying
/// disjoint cube-coordinate subsets; grafting is literal splicing, so
/// multicomposition is associative on the nose. The canonical form is the
/// planar serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeShape {
    /// A leaf referring to an input slot of the ambient multimodule.
    Leaf(usize),
    /// An internal vertex: its child subtrees in input order and its cube
    /// coordinates.
    Node {
        children: Vec<TreeShape>,
        coords: Vec<usize>,
    },
}

impl TreeShape {
    pub fn generator(k: usize, n: usize) -> TreeShape {
        TreeShape::Node {
            children: (0..k).map(TreeShape::Leaf).collect(),
            coords: (1..=n).collect(),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeShape::Leaf(_) => 1,
            TreeShape::Node { children, .. } => children.iter().map(|c| c.leaves()).sum(),
        }
    }

    fn shift_coords(&self, by: usize) -> TreeShape {
        match self {
            TreeShape::Leaf(i) => TreeShape::Leaf(*i),
            TreeShape::Node { children, coords } => TreeShape::Node {
                children: children.iter().map(|c| c.shift_coords(by)).collect(),
                coords: coords.iter().map(|c| c + by).collect(),
            },
        }
    }

    fn shift_leaves(&self, by: usize) -> TreeShape {
        match self {
            TreeShape::Leaf(i) => TreeShape::Leaf(i + by),
            TreeShape::Node { children, coords } => TreeShape::Node {
                children: children.iter().map(|c| c.shift_leaves(by)).collect(),
                coords: coords.clone(),
            },
        }
    }

    /// Graft `inner` into leaf slot `i` (0-based), renumbering the remaining
    /// leaves of `self` and shifting coordinates of `inner` by `coord_shift`.
    fn graft(&self, i: usize, inner: &TreeShape, inner_leaves: usize, coord_shift: usize) -> TreeShape {
        match self {
            TreeShape::Leaf(j) => {
                if *j == i {
                    inner.shift_coords(coord_shift).shift_leaves(i)
                } else if *j > i {
                    TreeShape::Leaf(j + inner_leaves - 1)
                } else {
                    TreeShape::Leaf(*j)
                }
            }
            TreeShape::Node { children, coords } => TreeShape::Node {
                children: children
                    .iter()
                    .map(|c| c.graft(i, inner, inner_leaves, coord_shift))
                    .collect(),
                coords: coords.clone(),
            },
        }
    }

    pub fn canonical_form(&self) -> String {
        match self {
            TreeShape::Leaf(i) => format!("l{i}"),
            TreeShape::Node { children, coords } => format!(
                "({})[{}]",
                children
                    .iter()
                    .map(|c| c.canonical_form())
                    .collect::<Vec<_>>()
                    .join(","),
                coords
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        }
    }
}

/// An n-cube of multimodule data with k inputs.
#[derive(Debug, Clone)]
pub struct MultimoduleCube {
    pub dim: usize,
    pub inputs: Vec<Arc<FlowCategory>>,
    pub output: Arc<FlowCategory>,
    pub faces: BTreeMap<Face, MultiTable>,
    pub tree: TreeShape,
    pub factors: FactorSeq,
}

fn compatible(a: &FlowCategory, b: &FlowCategory) -> Result<(), TreeError> {
    if a.modulus != b.modulus {
        return Err(TreeError::Incompatible("grading modulus".into()));
    }
    if a.field != b.field {
        return Err(TreeError::Incompatible("field".into()));
    }
    if a.monoid.action_vector() != b.monoid.action_vector() {
        return Err(TreeError::Incompatible("monoid".into()));
    }
    Ok(())
}

fn same_category(a: &FlowCategory, b: &FlowCategory) -> bool {
    a.modulus == b.modulus
        && a.field == b.field
        && a.monoid.action_vector() == b.monoid.action_vector()
        && a.objects.len() == b.objects.len()
        && a.objects
            .iter()
            .zip(&b.objects)
            .all(|(x, y)| x.label == y.label && x.degree == y.degree)
}

impl MultimoduleCube {
    pub fn new(
        dim: usize,
        inputs: Vec<Arc<FlowCategory>>,
        output: Arc<FlowCategory>,
    ) -> Result<Self, TreeError> {
        for x in &inputs {
            compatible(x, &output)?;
        }
        let k = inputs.len();
        let faces = all_faces(dim).into_iter().map(|f| (f, MultiTable::new())).collect();
        Ok(MultimoduleCube {
            dim,
            inputs,
            output,
            faces,
            tree: TreeShape::generator(k, dim),
            factors: FactorSeq::single(dim),
        })
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    pub fn set(
        &mut self,
        face: Face,
        input_objects: Vec<usize>,
        out: usize,
        label: GammaElt,
        vdim: i64,
        count: Option<Scalar>,
    ) -> Result<(), TreeError> {
        if (vdim == 0) != count.is_some() {
            return Err(TreeError::CountShape);
        }
        let table = self
            .faces
            .get_mut(&face)
            .ok_or_else(|| TreeError::MissingFace(face_label(&face)))?;
        table.insert((input_objects, out, label), FaceDescriptor { vdim, count });
        Ok(())
    }

    /// Relabel the input slots by a permutation: slot j of the result is
    /// slot `perm[j]` of the original. Counts pick up the Koszul sign of the
    /// permutation on the object degrees, so that the induced map is the
    /// original one conjugated by the Koszul permutation of tensor factors.
    pub fn permute_inputs(&self, perm: &[usize]) -> MultimoduleCube {
        let inputs: Vec<_> = perm.iter().map(|&j| self.inputs[j].clone()).collect();
        let mut out = MultimoduleCube {
            dim: self.dim,
            inputs,
            output: self.output.clone(),
            faces: BTreeMap::new(),
            tree: self.tree.clone(),
            factors: self.factors.clone(),
        };
        for (face, table) in self.faces.iter() {
            let mut new_table = MultiTable::new();
            for ((objs, o, l), d) in table.iter() {
                let new_objs: Vec<usize> = perm.iter().map(|&j| objs[j]).collect();
                // Koszul sign: product over inverted pairs of the degrees
                let mut sign = 1i64;
                for a in 0..perm.len() {
                    for b in a + 1..perm.len() {
                        if perm[a] > perm[b] {
                            let da = self.inputs[perm[a]].objects[objs[perm[a]]].degree;
                            let db = self.inputs[perm[b]].objects[objs[perm[b]]].degree;
                            if (da * db).rem_euclid(2) == 1 {
                                sign = -sign;
                            }
                        }
                    }
                }
                let desc = FaceDescriptor {
                    vdim: d.vdim,
                    count: d.count.as_ref().map(|c| {
                        if sign < 0 {
                            c.neg()
                        } else {
                            c.clone()
                        }
                    }),
                };
                new_table.insert((new_objs, *o, l.clone()), desc);
            }
            out.faces.insert(face.clone(), new_table);
        }
        out
    }
}

/// A bimodule is the one-input case.
pub fn from_bimodule(b: &crate::bimod::BimoduleCube) -> MultimoduleCube {
    let mut out = MultimoduleCube::new(b.dim, vec![b.source.clone()], b.target.clone())
        .expect("bimodule categories are compatible");
    for (face, table) in b.faces.iter() {
        let t = out.faces.get_mut(face).expect("faces initialised");
        for ((p, q, l), d) in table.iter() {
            t.insert((vec![*p], *q, l.clone()), d.clone());
        }
    }
    out
}

pub struct MultimoduleMap {
    pub cf_inputs: Vec<FloerComplex>,
    pub cf_output: FloerComplex,
    /// cube (x) CF(X_1) (x) ... (x) CF(X_k)
    pub domain: GradedComplex<NovikovElement>,
    pub map: ChainMap<NovikovElement>,
}

/// Mixed-radix column index of (face, p_1, ..., p_k) in the iterated tensor.
fn column_index(face_idx: usize, objs: &[usize], sizes: &[usize]) -> usize {
    let mut idx = face_idx;
    for (p, n) in objs.iter().zip(sizes) {
        idx = idx * n + p;
    }
    idx
}

/// Assembles the map `C_*([0,1])^(x)n (x) CF(X_1) (x) ... -> CF(X)`; face
/// data feeds the coefficient of the matching cube basis element.
pub fn multimodule_map(m: &MultimoduleCube) -> Result<MultimoduleMap, TreeError> {
    let cf_inputs: Vec<FloerComplex> = m
        .inputs
        .iter()
        .map(|x| build_cf(x))
        .collect::<Result<_, _>>()?;
    let cf_output = build_cf(&m.output)?;
    let monoid = m.output.monoid.clone();
    let field = m.output.field;
    let mut domain = crate::bimod::cube_complex(m.dim, &monoid, field);
    for cf in &cf_inputs {
        domain = cc_tensor(&domain, &cf.complex)?;
    }
    let sizes: Vec<usize> = cf_inputs.iter().map(|c| c.complex.len()).collect();
    let mut cutoff = cf_output.cutoff.clone();
    for cf in &cf_inputs {
        cutoff = cutoff.min(cf.cutoff.clone());
    }
    let mut entries: BTreeMap<(usize, usize), Vec<(GammaElt, Scalar)>> = BTreeMap::new();
    for (face, table) in m.faces.iter() {
        let fidx = crate::bimod::face_basis_index(face);
        for ((objs, out, label), desc) in table.iter() {
            if desc.vdim != 0 {
                continue;
            }
            let count = desc.count.clone().ok_or(TreeError::CountShape)?;
            let col = column_index(fidx, objs, &sizes);
            entries
                .entry((*out, col))
                .or_default()
                .push((label.clone(), count));
        }
    }
    let mut mat = SparseMat::new();
    for ((row, col), terms) in entries {
        let v = NovikovElement::from_terms(monoid.clone(), field, terms, cutoff.clone())
            .map_err(|e| TreeError::Parse {
                line: 0,
                msg: e.to_string(),
            })?;
        mat.set(row, col, v);
    }
    Ok(MultimoduleMap {
        cf_inputs,
        cf_output,
        domain,
        map: ChainMap { degree: 0, mat },
    })
}

/// Chain-map verification with the k input-action terms, through the tensor
/// sign oracle. Also checks the degree law
/// `vdim = deg(out) - sum deg(inputs) + dim(face)` and the count shape.
pub fn verify_multimodule(m: &MultimoduleCube) -> Result<Report, TreeError> {
    let mut report = Report::new();
    for face in all_faces(m.dim) {
        let table = m
            .faces
            .get(&face)
            .ok_or_else(|| TreeError::MissingFace(face_label(&face)))?;
        for ((objs, out, label), desc) in table.iter() {
            if (desc.vdim == 0) != desc.count.is_some() {
                report.fail(format!("face {}", face_label(&face)), "count shape".to_string());
            }
            let in_sum: i64 = objs
                .iter()
                .zip(&m.inputs)
                .map(|(&p, x)| x.objects[p].degree)
                .sum();
            let want =
                m.output.objects[*out].degree - in_sum + crate::bimod::face_dim(&face) as i64;
            let ok = if m.output.modulus == 0 {
                desc.vdim == want
            } else {
                (desc.vdim - want).rem_euclid(m.output.modulus as i64) == 0
            };
            if !ok {
                report.fail(
                    format!("face {} {:?} -> {}", face_label(&face), objs, out),
                    format!("vdim {} violates the degree law (expected {}, label {:?})", desc.vdim, want, label),
                );
            }
        }
    }
    let data = multimodule_map(m)?;
    let commute =
        crate::homalg::verify_chain_map(&data.map, &data.domain, &data.cf_output.complex);
    for f in commute.findings {
        report.fail(f.location, f.message);
    }
    Ok(report)
}

/// Multicomposition: graft `inner` into input slot `i` of `outer`. Counts
/// convolve over the middle objects and label splittings; cube coordinates
/// of the outer module come first.
pub fn multi_compose(
    inner: &MultimoduleCube,
    outer: &MultimoduleCube,
    i: usize,
) -> Result<MultimoduleCube, TreeError> {
    if i >= outer.arity() {
        return Err(TreeError::BadSlot(i));
    }
    if !same_category(&outer.inputs[i], &inner.output) {
        return Err(TreeError::MiddleMismatch);
    }
    let monoid = outer.output.monoid.clone();
    let mut inputs = vec![];
    inputs.extend_from_slice(&outer.inputs[..i]);
    inputs.extend_from_slice(&inner.inputs);
    inputs.extend_from_slice(&outer.inputs[i + 1..]);
    let mut composed =
        MultimoduleCube::new(outer.dim + inner.dim, inputs, outer.output.clone())?;
    composed.tree = outer
        .tree
        .graft(i, &inner.tree, inner.arity().max(1), outer.dim);
    composed.factors = outer.factors.concat(&inner.factors, outer.dim);
    for (f_out, t_out) in outer.faces.iter() {
        for (f_in, t_in) in inner.faces.iter() {
            let mut face = f_out.clone();
            face.extend_from_slice(f_in);
            let table = composed.faces.get_mut(&face).expect("faces initialised");
            let mut acc: BTreeMap<MultiKey, (i64, Option<Scalar>)> = BTreeMap::new();
            for ((objs_in, y, l_in), d_in) in t_in.iter() {
                for ((objs_out, r, l_out), d_out) in t_out.iter() {
                    if objs_out[i] != *y {
                        continue;
                    }
                    let mut objs = vec![];
                    objs.extend_from_slice(&objs_out[..i]);
                    objs.extend_from_slice(objs_in);
                    objs.extend_from_slice(&objs_out[i + 1..]);
                    let label = monoid.add(l_in, l_out);
                    let vdim = d_in.vdim + d_out.vdim;
                    let entry = acc.entry((objs, *r, label)).or_insert((vdim, None));
                    if vdim < entry.0 {
                        entry.0 = vdim;
                    }
                    if d_in.vdim == 0 && d_out.vdim == 0 {
                        let prod = d_in
                            .count
                            .as_ref()
                            .expect("vdim-0 has count")
                            .mul(d_out.count.as_ref().expect("vdim-0 has count"));
                        entry.1 = Some(match entry.1.take() {
                            Some(old) => old.add(&prod),
                            None => prod,
                        });
                    }
                }
            }
            for ((objs, r, label), (vdim, count)) in acc {
                let count = if vdim == 0 {
                    Some(count.unwrap_or_else(|| outer.output.field.zero()))
                } else {
                    None
                };
                table.insert((objs, r, label), FaceDescriptor { vdim, count });
            }
        }
    }
    Ok(composed)
}

/// Multicategory axiom checks on a fixture set of 0-dimensional
/// multimodules: associativity and interchange of multicomposition on all
/// composable pairs and triples, and equivariance of the data under input
/// permutations.
pub fn validate_multicategory(fixtures: &[MultimoduleCube]) -> Report {
    let mut report = Report::new();
    let tables_eq = |a: &MultimoduleCube, b: &MultimoduleCube| -> bool {
        a.faces == b.faces
    };
    // pairwise: (inner into outer) then another graft, both orders
    for (oi, outer) in fixtures.iter().enumerate() {
        for (ii, inner) in fixtures.iter().enumerate() {
            for slot in 0..outer.arity() {
                if !same_category(&outer.inputs[slot], &inner.output) {
                    continue;
                }
                let once = match multi_compose(inner, outer, slot) {
                    Ok(c) => c,
                    Err(e) => {
                        report.fail(format!("compose {ii} into {oi} at {slot}"), e.to_string());
                        continue;
                    }
                };
                // nested associativity: graft a third module into a slot of
                // `inner`, in both orders
                for (ji, third) in fixtures.iter().enumerate() {
                    for jslot in 0..inner.arity() {
                        if !same_category(&inner.inputs[jslot], &third.output) {
                            continue;
                        }
                        let left = multi_compose(third, &once, slot + jslot);
                        let right = multi_compose(third, inner, jslot)
                            .and_then(|c| multi_compose(&c, outer, slot));
                        match (left, right) {
                            (Ok(l), Ok(r)) => {
                                if !tables_eq(&l, &r) {
                                    report.fail(
                                        format!("associativity ({ji} -> {ii} -> {oi})"),
                                        "grouped compositions disagree".to_string(),
                                    );
                                }
                                if l.tree.canonical_form() != r.tree.canonical_form() {
                                    report.fail(
                                        format!("associativity ({ji} -> {ii} -> {oi})"),
                                        "grafted trees disagree".to_string(),
                                    );
                                }
                            }
                            (Err(e), _) | (_, Err(e)) => {
                                report.fail(
                                    format!("associativity ({ji} -> {ii} -> {oi})"),
                                    e.to_string(),
                                );
                            }
                        }
                    }
                }
                // interchange: graft two modules into disjoint slots of the
                // same outer module, in both orders
                for (ji, second) in fixtures.iter().enumerate() {
                    for slot2 in 0..outer.arity() {
                        if slot2 == slot || !same_category(&outer.inputs[slot2], &second.output) {
                            continue;
                        }
                        // compose at the larger slot first so indices stay put
                        let (first_mod, first_slot, second_mod, second_slot_after) =
                            if slot2 > slot {
                                (second, slot2, inner, slot)
                            } else {
                                (inner, slot, second, slot2)
                            };
                        let hi = multi_compose(first_mod, outer, first_slot)
                            .and_then(|c| multi_compose(second_mod, &c, second_slot_after));
                        let lo = multi_compose(second_mod, outer, second_slot_after).and_then(|c| {
                            multi_compose(
                                first_mod,
                                &c,
                                first_slot + second_mod.arity().max(1) - 1,
                            )
                        });
                        match (hi, lo) {
                            (Ok(a), Ok(b)) => {
                                if !tables_eq(&a, &b) {
                                    report.fail(
                                        format!("interchange ({ii},{ji} into {oi})"),
                                        "disjoint-slot compositions disagree".to_string(),
                                    );
                                }
                            }
                            (Err(e), _) | (_, Err(e)) => {
                                report.fail(
                                    format!("interchange ({ii},{ji} into {oi})"),
                                    e.to_string(),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    // symmetry: a permutation followed by its inverse is the identity
    for (mi, m) in fixtures.iter().enumerate() {
        let k = m.arity();
        if k < 2 {
            continue;
        }
        let perm: Vec<usize> = (0..k).rev().collect();
        let mut inverse = vec![0usize; k];
        for (j, &p) in perm.iter().enumerate() {
            inverse[p] = j;
        }
        let round = m.permute_inputs(&perm).permute_inputs(&inverse);
        if !tables_eq(m, &round) {
            report.fail(format!("fixture {mi}"), "permutation round trip failed".to_string());
        }
    }
    report
}

// ---------------------------------------------------------------------------
// tree-shaped stratification

/// A stratum of the multimodule poset: one broken path per input ending at
/// the fat vertex, the central descriptor, and the outgoing broken path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TreeStratum {
    pub input_paths: Vec<Vec<(GammaElt, usize)>>,
    /// (input objects at the fat vertex, outgoing object, central label)
    pub central: (Vec<usize>, usize, GammaElt),
    pub output_path: Vec<(GammaElt, usize)>,
}

impl TreeStratum {
    pub fn codim(&self) -> usize {
        self.input_paths.iter().map(|p| p.len()).sum::<usize>() + self.output_path.len()
    }
}

/// Enumerates the tree strata of (vec p, p, mu) against a central table:
/// every input branch is a (possibly empty) broken path of its category,
/// the fat vertex is a recorded central descriptor, and the outgoing arc is
/// a broken path of the output category. Ordered by subtree collapse.
pub fn multimodule_poset(
    inputs: &[Arc<FlowCategory>],
    output: &Arc<FlowCategory>,
    central: &MultiTable,
    sources: &[usize],
    sink: usize,
    mu: &GammaElt,
) -> Result<(StratPoset, Vec<TreeStratum>), TreeError> {
    let monoid = &output.monoid;
    let k = inputs.len();
    // per-input path families
    let mut branch_options: Vec<Vec<(usize, Vec<(GammaElt, usize)>, GammaElt)>> = vec![];
    for (i, x) in inputs.iter().enumerate() {
        let opts = paths_from(x, sources[i])
            .into_iter()
            .map(|(end, segs)| {
                let total = segs
                    .iter()
                    .fold(monoid.zero(), |acc, (l, _)| monoid.add(&acc, l));
                (end, segs, total)
            })
            .collect();
        branch_options.push(opts);
    }
    let out_options: Vec<(usize, Vec<(GammaElt, usize)>, GammaElt)> = (0..output.objects.len())
        .flat_map(|start| {
            paths_from(output, start)
                .into_iter()
                .filter(|(end, _)| *end == sink)
                .map(move |(_, segs)| {
                    let total = segs
                        .iter()
                        .fold(output.monoid.zero(), |acc, (l, _)| output.monoid.add(&acc, l));
                    (start, segs, total)
                })
        })
        .collect();
    let mut strata: Vec<TreeStratum> = vec![];
    let mut assignment: Vec<usize> = vec![0; k];
    enumerate_branches(
        0,
        &mut assignment,
        &branch_options,
        &out_options,
        central,
        monoid,
        mu,
        &mut strata,
    );
    strata.sort();
    strata.dedup();
    if strata.iter().all(|s| s.codim() != 0) {
        return Err(TreeError::MissingCentral);
    }
    let elements: Vec<(String, u32)> = strata
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("t{}c{}", i, s.codim()), s.codim() as u32))
        .collect();
    let mut relations = vec![];
    for (a, sa) in strata.iter().enumerate() {
        for (b, sb) in strata.iter().enumerate() {
            if a != b && tree_coarsens(monoid, sa, sb) {
                relations.push((a, b));
            }
        }
    }
    let poset =
        StratPoset::from_relations(elements, &relations).expect("collapse order is acyclic");
    Ok((poset, strata))
}

#[allow(clippy::too_many_arguments)]
fn enumerate_branches(
    i: usize,
    assignment: &mut Vec<usize>,
    branch_options: &[Vec<(usize, Vec<(GammaElt, usize)>, GammaElt)>],
    out_options: &[(usize, Vec<(GammaElt, usize)>, GammaElt)],
    central: &MultiTable,
    monoid: &Arc<GammaMonoid>,
    mu: &GammaElt,
    out: &mut Vec<TreeStratum>,
) {
    if i == branch_options.len() {
        let ends: Vec<usize> = assignment
            .iter()
            .enumerate()
            .map(|(j, &a)| branch_options[j][a].0)
            .collect();
        let in_total = assignment
            .iter()
            .enumerate()
            .fold(monoid.zero(), |acc, (j, &a)| {
                monoid.add(&acc, &branch_options[j][a].2)
            });
        for (start, segs, total) in out_options {
            let central_label = monoid.sub(&monoid.sub(mu, &in_total), total);
            if central.contains_key(&(ends.clone(), *start, central_label.clone())) {
                out.push(TreeStratum {
                    input_paths: assignment
                        .iter()
                        .enumerate()
                        .map(|(j, &a)| branch_options[j][a].1.clone())
                        .collect(),
                    central: (ends.clone(), *start, central_label),
                    output_path: segs.clone(),
                });
            }
        }
        return;
    }
    for a in 0..branch_options[i].len() {
        assignment[i] = a;
        enumerate_branches(
            i + 1,
            assignment,
            branch_options,
            out_options,
            central,
            monoid,
            mu,
            out,
        );
    }
}

/// All broken paths out of `start` (including the empty one).
fn paths_from(cat: &FlowCategory, start: usize) -> Vec<(usize, Vec<(GammaElt, usize)>)> {
    let mut out = vec![(start, vec![])];
    let mut frontier = vec![(start, Vec::<(GammaElt, usize)>::new())];
    while let Some((at, segs)) = frontier.pop() {
        for ((a, b, l), _) in cat.morphisms.iter() {
            if *a != at {
                continue;
            }
            let action = cat.monoid.action(l).expect("rank-checked");
            if action.is_zero() && !cat.precedes(*a, *b) {
                continue;
            }
            let mut ext = segs.clone();
            ext.push((l.clone(), *b));
            out.push((*b, ext.clone()));
            frontier.push((*b, ext));
        }
    }
    out
}

/// Does a refinement of `coarse` by `fine` exist: fine's segments group into
/// runs with the label sums and end objects of coarse's segments.
fn groups_match(
    monoid: &GammaMonoid,
    coarse: &[(GammaElt, usize)],
    fine: &[(GammaElt, usize)],
) -> bool {
    let mut fi = 0;
    for (lc, oc) in coarse {
        let mut acc = monoid.zero();
        let mut matched = false;
        while fi < fine.len() {
            let (lf, of) = &fine[fi];
            acc = monoid.add(&acc, lf);
            fi += 1;
            if acc == *lc && *of == *oc {
                matched = true;
                break;
            }
        }
        if !matched {
            return false;
        }
    }
    fi == fine.len()
}

/// a coarsens b: each branch of b splits into a refinement of a's branch
/// followed by segments absorbed into the fat vertex; the output branch
/// absorbs a prefix; labels are conserved into the central label.
fn tree_coarsens(monoid: &GammaMonoid, a: &TreeStratum, b: &TreeStratum) -> bool {
    if a.input_paths.len() != b.input_paths.len() {
        return false;
    }
    let k = a.input_paths.len();
    // for each input branch, choose the split point between the kept prefix
    // (refining a's branch) and the absorbed suffix
    fn search(
        monoid: &GammaMonoid,
        a: &TreeStratum,
        b: &TreeStratum,
        i: usize,
        absorbed: GammaElt,
        k: usize,
    ) -> bool {
        if i == k {
            // output branch: absorbed prefix + refinement of a's output
            let bo = &b.output_path;
            for split in 0..=bo.len() {
                let prefix = &bo[..split];
                let rest = &bo[split..];
                // the prefix must start at b's central out-object and end at
                // a's central out-object
                let prefix_end = prefix.last().map(|(_, o)| *o).unwrap_or(b.central.1);
                if prefix_end != a.central.1 {
                    continue;
                }
                if !groups_match(monoid, &a.output_path, rest) {
                    continue;
                }
                let mut total = absorbed.clone();
                for (l, _) in prefix {
                    total = monoid.add(&total, l);
                }
                let want = monoid.add(&b.central.2, &total);
                if want == a.central.2 {
                    return true;
                }
            }
            return false;
        }
        let bb = &b.input_paths[i];
        for split in 0..=bb.len() {
            let kept = &bb[..split];
            let suffix = &bb[split..];
            let kept_end = kept.last().map(|(_, o)| *o).unwrap_or(usize::MAX);
            // kept part must end at a's fat-vertex object for this input
            // (or be empty with matching path semantics)
            let a_end_ok = if a.input_paths[i].is_empty() {
                kept.is_empty()
            } else {
                kept_end == a.central.0[i] && groups_match(monoid, &a.input_paths[i], kept)
            };
            if a.input_paths[i].is_empty() && !kept.is_empty() {
                continue;
            }
            if !a_end_ok && !(a.input_paths[i].is_empty() && kept.is_empty()) {
                continue;
            }
            // the absorbed suffix must end at b's fat vertex (it does by
            // construction); accumulate its labels
            let mut total = absorbed.clone();
            for (l, _) in suffix {
                total = monoid.add(&total, l);
            }
            if search(monoid, a, b, i + 1, total, k) {
                return true;
            }
        }
        false
    }
    search(monoid, a, b, 0, monoid.zero(), k)
}

// ---------------------------------------------------------------------------
// labelled-tree file format

/// A labelled tree fixture: parent array (`-` marks the root), per-vertex
/// monoid labels, edge labels naming flow-category objects, and the fat
/// vertex.
#[derive(Debug, Clone)]
pub struct LabeledTree {
    pub parents: Vec<Option<usize>>,
    pub vertex_labels: Vec<GammaElt>,
    /// label of the edge from each vertex to its parent (empty for the root)
    pub edge_labels: Vec<String>,
    pub fat: usize,
}

impl LabeledTree {
    /// Structural validation: a single root, exactly one vertex of valence
    /// other than two (the fat vertex), and acyclicity.
    pub fn validate(&self) -> Report {
        let mut report = Report::new();
        let n = self.parents.len();
        let roots: Vec<usize> = (0..n).filter(|&v| self.parents[v].is_none()).collect();
        if roots.len() != 1 {
            report.fail("roots", format!("expected one root, found {}", roots.len()));
        }
        let mut children = vec![0usize; n];
        for v in 0..n {
            if let Some(p) = self.parents[v] {
                if p >= n {
                    report.fail(format!("vertex {v}"), "parent out of range".to_string());
                    continue;
                }
                children[p] += 1;
            }
        }
        // check acyclicity by walking up
        for v in 0..n {
            let mut seen = vec![false; n];
            let mut cur = v;
            while let Some(p) = self.parents[cur] {
                if seen[p] {
                    report.fail(format!("vertex {v}"), "parent cycle".to_string());
                    break;
                }
                seen[p] = true;
                cur = p;
            }
        }
        for v in 0..n {
            let valence = children[v] + usize::from(self.parents[v].is_some());
            if v == self.fat {
                continue;
            }
            if valence > 2 {
                report.fail(
                    format!("vertex {v}"),
                    format!("valence {valence} away from the fat vertex"),
                );
            }
        }
        if self.fat >= n {
            report.fail("fat", "fat vertex out of range".to_string());
        }
        report
    }
}

/// Line format:
/// ```text
/// tree
/// parents - 0 0 1
/// vertex-label <v> <g1,...|->
/// edge-label <v> <object>
/// fat <v>
/// ```
pub fn parse_tree_file(text: &str) -> Result<LabeledTree, TreeError> {
    let mut parents: Option<Vec<Option<usize>>> = None;
    let mut vlabels: BTreeMap<usize, GammaElt> = BTreeMap::new();
    let mut elabels: BTreeMap<usize, String> = BTreeMap::new();
    let mut fat: Option<usize> = None;
    let mut saw_header = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| TreeError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "tree" => saw_header = true,
            "parents" => {
                let ps: Result<Vec<Option<usize>>, TreeError> = parts
                    .map(|p| {
                        if p == "-" {
                            Ok(None)
                        } else {
                            p.parse::<usize>().map(Some).map_err(|_| err("bad parent"))
                        }
                    })
                    .collect();
                parents = Some(ps?);
            }
            "vertex-label" => {
                let v: usize = parts
                    .next()
                    .ok_or_else(|| err("missing vertex"))?
                    .parse()
                    .map_err(|_| err("bad vertex"))?;
                let g = parts.next().ok_or_else(|| err("missing label"))?;
                let gamma: GammaElt = if g == "-" {
                    vec![]
                } else {
                    g.split(',')
                        .map(|x| x.trim().parse::<i64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err("bad label"))?
                };
                vlabels.insert(v, gamma);
            }
            "edge-label" => {
                let v: usize = parts
                    .next()
                    .ok_or_else(|| err("missing vertex"))?
                    .parse()
                    .map_err(|_| err("bad vertex"))?;
                let label = parts.next().ok_or_else(|| err("missing label"))?;
                elabels.insert(v, label.to_string());
            }
            "fat" => {
                fat = Some(
                    parts
                        .next()
                        .ok_or_else(|| err("missing vertex"))?
                        .parse()
                        .map_err(|_| err("bad vertex"))?,
                )
            }
            other => return Err(err(&format!("unknown directive `{other}`"))),
        }
    }
    if !saw_header {
        return Err(TreeError::Parse {
            line: 0,
            msg: "missing tree header".into(),
        });
    }
    let parents = parents.ok_or(TreeError::Parse {
        line: 0,
        msg: "missing parents line".into(),
    })?;
    let n = parents.len();
    let fat = fat.ok_or(TreeError::Parse {
        line: 0,
        msg: "missing fat line".into(),
    })?;
    let tree = LabeledTree {
        vertex_labels: (0..n).map(|v| vlabels.get(&v).cloned().unwrap_or_default()).collect(),
        edge_labels: (0..n).map(|v| elabels.get(&v).cloned().unwrap_or_default()).collect(),
        parents,
        fat,
    };
    Ok(tree)
}

/// Re-export of the cutoff type used for the energy windows of
/// enumerations.
pub type EnergyWindow = Cutoff;

#[cfg(test)]
mod tests;
