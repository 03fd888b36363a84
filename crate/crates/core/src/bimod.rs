//! Continuation bimodules as n-cubes of count data between two flow
//! categories, the induced maps on `C_*([0,1])^(x)n (x) CF(X)`, chain-map
//! verification, composition by convolution, and invariance certification.
//!
//! The single sign oracle is the Koszul tensor machinery: the cube chain
//! complex is the n-fold tensor of the interval model (one generator in
//! degree -1, two in degree 0, d(top) = e1 - e0), and every facet and
//! action sign in the chain-map equation comes from that tensor
//! differential. Global consistency is enforced by verification rather than
//! by per-case sign tables.

use crate::coeff::{BaseField, GammaElt, GammaMonoid, NovikovElement, Rat, Scalar};
use crate::floer::{build_cf, FloerComplex};
use crate::flowcat::FlowCategory;
use crate::homalg::{
    cc_tensor, certify_homotopy_equivalence, ChainMap, GradedComplex, GradedLine,
    HomotopyEquivalence, SparseMat,
};
use crate::report::Report;
use crate::stratmodel::StratPoset;
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BimodError {
    #[error("source/target flow categories are incompatible: {0}")]
    Incompatible(String),
    #[error("middle flow category of a composition does not match")]
    MiddleMismatch,
    #[error("missing data for face {0}")]
    MissingFace(String),
    #[error("count shape: count present iff vdim = 0")]
    CountShape,
    #[error("homotopy cube endpoint does not match the stated composite at face {0}")]
    EndpointMismatch(String),
    #[error("central descriptor ({0}, {1}) not recorded")]
    MissingCentral(String, String),
    #[error(transparent)]
    Homalg(#[from] crate::homalg::HomalgError),
    #[error(transparent)]
    Floer(#[from] crate::floer::FloerError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A face of the n-cube: one entry per coordinate, 0, 1, or free.
pub type Face = Vec<u8>;
pub const FREE: u8 = 2;

pub fn face_dim(face: &Face) -> usize {
    face.iter().filter(|&&c| c == FREE).count()
}

pub fn all_faces(n: usize) -> Vec<Face> {
    let mut out: Vec<Face> = vec![vec![]];
    for _ in 0..n {
        let mut next = vec![];
        for f in &out {
            for c in [0u8, 1, FREE] {
                let mut g = f.clone();
                g.push(c);
                next.push(g);
            }
        }
        out = next;
    }
    out
}

pub fn face_label(face: &Face) -> String {
    if face.is_empty() {
        "-".into()
    } else {
        face.iter()
            .map(|&c| match c {
                FREE => 'f',
                0 => '0',
                _ => '1',
            })
            .collect()
    }
}

pub fn parse_face(s: &str) -> Option<Face> {
    if s == "-" {
        return Some(vec![]);
    }
    s.chars()
        .map(|c| match c {
            '0' => Some(0u8),
            '1' => Some(1),
            'f' => Some(FREE),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceDescriptor {
    pub vdim: i64,
    pub count: Option<Scalar>,
}

pub type FaceTable = BTreeMap<(usize, usize, GammaElt), FaceDescriptor>;

/// Strictification bookkeeping: the sequence of factor modules with their
/// disjoint cube-coordinate subsets. Composition is literal concatenation,
/// so associativity holds on the nose.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FactorSeq {
    pub factors: Vec<Vec<usize>>,
}

impl FactorSeq {
    pub fn single(n: usize) -> Self {
        FactorSeq {
            factors: vec![(1..=n).collect()],
        }
    }

    pub fn concat(&self, other: &FactorSeq, shift: usize) -> FactorSeq {
        let mut factors = self.factors.clone();
        factors.extend(
            other
                .factors
                .iter()
                .map(|f| f.iter().map(|c| c + shift).collect::<Vec<_>>()),
        );
        FactorSeq { factors }
    }
}

/// An n-cube of continuation data from X to Y: for each face and each
/// (source object, target object, monoid label) a descriptor, with counts
/// exactly in virtual dimension zero.
#[derive(Debug, Clone)]
pub struct BimoduleCube {
    pub dim: usize,
    pub source: Arc<FlowCategory>,
    pub target: Arc<FlowCategory>,
    pub faces: BTreeMap<Face, FaceTable>,
    pub factors: FactorSeq,
}

fn check_pair(x: &FlowCategory, y: &FlowCategory) -> Result<(), BimodError> {
    if x.modulus != y.modulus {
        return Err(BimodError::Incompatible("grading modulus".into()));
    }
    if x.field != y.field {
        return Err(BimodError::Incompatible("field".into()));
    }
    if x.monoid.rank() != y.monoid.rank()
        || x.monoid.action_vector() != y.monoid.action_vector()
    {
        return Err(BimodError::Incompatible("monoid".into()));
    }
    Ok(())
}

fn same_category(x: &FlowCategory, y: &FlowCategory) -> bool {
    x.modulus == y.modulus
        && x.field == y.field
        && x.monoid.action_vector() == y.monoid.action_vector()
        && x.objects.len() == y.objects.len()
        && x.objects
            .iter()
            .zip(&y.objects)
            .all(|(a, b)| a.label == b.label && a.degree == b.degree)
}

impl BimoduleCube {
    pub fn new(
        dim: usize,
        source: Arc<FlowCategory>,
        target: Arc<FlowCategory>,
    ) -> Result<Self, BimodError> {
        check_pair(&source, &target)?;
        let faces = all_faces(dim).into_iter().map(|f| (f, FaceTable::new())).collect();
        Ok(BimoduleCube {
            dim,
            source,
            target,
            faces,
            factors: FactorSeq::single(dim),
        })
    }

    pub fn set(
        &mut self,
        face: Face,
        p: usize,
        q: usize,
        label: GammaElt,
        vdim: i64,
        count: Option<Scalar>,
    ) -> Result<(), BimodError> {
        if (vdim == 0) != count.is_some() {
            return Err(BimodError::CountShape);
        }
        let table = self
            .faces
            .get_mut(&face)
            .ok_or_else(|| BimodError::MissingFace(face_label(&face)))?;
        table.insert((p, q, label), FaceDescriptor { vdim, count });
        Ok(())
    }

    /// The identity continuation: dimension 0, unit count on the diagonal at
    /// the zero label (the trivial presentation on a point for each object).
    pub fn identity_continuation(x: Arc<FlowCategory>) -> Self {
        let monoid = x.monoid.clone();
        let one = x.field.one();
        let mut cube = BimoduleCube::new(0, x.clone(), x).expect("category agrees with itself");
        let table = cube.faces.get_mut(&vec![]).expect("single face");
        for p in 0..cube.source.objects.len() {
            table.insert(
                (p, p, monoid.zero()),
                FaceDescriptor {
                    vdim: 0,
                    count: Some(one.clone()),
                },
            );
        }
        cube
    }

    /// All recorded labels lie in the positive cone.
    pub fn is_monotone(&self) -> bool {
        self.faces.values().all(|table| {
            table
                .keys()
                .all(|(_, _, l)| self.source.monoid.in_positive_cone(l))
        })
    }

    /// Restriction of the cube to a face, as a lower-dimensional cube: the
    /// free coordinates of `face` become the coordinates of the result.
    pub fn restrict(&self, face: &Face) -> Result<BimoduleCube, BimodError> {
        let free_positions: Vec<usize> = face
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == FREE)
            .map(|(i, _)| i)
            .collect();
        let mut out = BimoduleCube::new(free_positions.len(), self.source.clone(), self.target.clone())?;
        for sub in all_faces(free_positions.len()) {
            let mut big = face.clone();
            for (k, &pos) in free_positions.iter().enumerate() {
                big[pos] = sub[k];
            }
            let table = self
                .faces
                .get(&big)
                .ok_or_else(|| BimodError::MissingFace(face_label(&big)))?;
            out.faces.insert(sub, table.clone());
        }
        Ok(out)
    }
}

/// The interval chain model over the Novikov coefficients: generators
/// e0, e1 in degree 0 and the top stratum in degree -1 with
/// d(top) = e1 - e0.
pub fn interval_complex(
    monoid: &Arc<GammaMonoid>,
    field: BaseField,
) -> GradedComplex<NovikovElement> {
    let one = NovikovElement::one(monoid.clone(), field);
    let gens = vec![
        GradedLine::new("e0", 0),
        GradedLine::new("e1", 0),
        GradedLine::new("I", -1),
    ];
    let mut diff = SparseMat::new();
    diff.set(0, 2, one.neg());
    diff.set(1, 2, one);
    GradedComplex::new(0, gens, diff).expect("indices in range")
}

/// The n-fold tensor `C_*([0,1])^(x)n`. The basis element of a face is the
/// tensor of its coordinates (0 -> e0, 1 -> e1, free -> top), at index
/// `sum face[i] * 3^(n-1-i)`.
pub fn cube_complex(
    n: usize,
    monoid: &Arc<GammaMonoid>,
    field: BaseField,
) -> GradedComplex<NovikovElement> {
    let mut acc = GradedComplex::new(
        0,
        vec![GradedLine::new("pt", 0)],
        SparseMat::new(),
    )
    .expect("empty");
    // zero-dimensional cube: a single generator in degree 0
    if n == 0 {
        return acc;
    }
    let interval = interval_complex(monoid, field);
    acc = interval.clone();
    for _ in 1..n {
        acc = cc_tensor(&acc, &interval).expect("matching modulus");
    }
    acc
}

pub fn face_basis_index(face: &Face) -> usize {
    face.iter().fold(0usize, |acc, &c| acc * 3 + c as usize)
}

/// The assembled data of the structure map of a bimodule cube.
pub struct BimoduleMap {
    pub cf_source: FloerComplex,
    pub cf_target: FloerComplex,
    /// cube^(x)n (x) CF(X)
    pub domain: GradedComplex<NovikovElement>,
    pub map: ChainMap<NovikovElement>,
}

/// Assembles the degree-indexed family of maps: each face feeds the matrix
/// coefficient of its basis element in the cube tensor factor.
pub fn bimodule_map(cube: &BimoduleCube) -> Result<BimoduleMap, BimodError> {
    let cf_source = build_cf(&cube.source)?;
    let cf_target = build_cf(&cube.target)?;
    let cube_cx = cube_complex(cube.dim, &cube.source.monoid, cube.source.field);
    let domain = cc_tensor(&cube_cx, &cf_source.complex)?;
    let nx = cf_source.complex.len();
    let monoid = cube.source.monoid.clone();
    let field = cube.source.field;
    let cutoff = cf_source
        .cutoff
        .clone()
        .min(cf_target.cutoff.clone());
    let mut entries: BTreeMap<(usize, usize), Vec<(GammaElt, Scalar)>> = BTreeMap::new();
    for (face, table) in cube.faces.iter() {
        let fidx = face_basis_index(face);
        for ((p, q, label), desc) in table.iter() {
            if desc.vdim != 0 {
                continue;
            }
            let count = desc.count.clone().ok_or(BimodError::CountShape)?;
            entries
                .entry((*q, fidx * nx + *p))
                .or_default()
                .push((label.clone(), count));
        }
    }
    let mut mat = SparseMat::new();
    for ((row, col), terms) in entries {
        let v = NovikovElement::from_terms(monoid.clone(), field, terms, cutoff.clone())
            .map_err(|e| BimodError::Parse {
                line: 0,
                msg: e.to_string(),
            })?;
        mat.set(row, col, v);
    }
    Ok(BimoduleMap {
        cf_source,
        cf_target,
        domain,
        map: ChainMap { degree: 0, mat },
    })
}

/// Chain-map verification: the assembled map must commute with the
/// differential of `cube (x) CF(X)` on one side and CF(Y) on the other; all
/// facet and action signs come from the tensor differential. Residuals are
/// located by (face, source, target).
pub fn verify_chain_map_cube(cube: &BimoduleCube) -> Result<Report, BimodError> {
    let mut report = Report::new();
    // shape checks: every face present, counts exactly in vdim 0, and the
    // degree law vdim = deg q - deg p + dim(face) modulo d
    for face in all_faces(cube.dim) {
        let table = cube
            .faces
            .get(&face)
            .ok_or_else(|| BimodError::MissingFace(face_label(&face)))?;
        for ((p, q, label), desc) in table.iter() {
            if (desc.vdim == 0) != desc.count.is_some() {
                report.fail(
                    format!("face {}", face_label(&face)),
                    "count present iff vdim = 0 violated".to_string(),
                );
            }
            let want = cube.target.objects[*q].degree - cube.source.objects[*p].degree
                + face_dim(&face) as i64;
            let ok = if cube.source.modulus == 0 {
                desc.vdim == want
            } else {
                (desc.vdim - want).rem_euclid(cube.source.modulus as i64) == 0
            };
            if !ok {
                report.fail(
                    format!(
                        "face {} ({}, {}, {:?})",
                        face_label(&face),
                        cube.source.objects[*p].label,
                        cube.target.objects[*q].label,
                        label
                    ),
                    format!("vdim {} violates the degree law (expected {})", desc.vdim, want),
                );
            }
        }
    }
    let data = bimodule_map(cube)?;
    let commute = crate::homalg::verify_chain_map(&data.map, &data.domain, &data.cf_target.complex);
    for finding in commute.findings {
        report.fail(finding.location, finding.message);
    }
    Ok(report)
}

/// Composition: counts on a composed face are the convolution over the
/// middle objects and label splittings; the composed cube has the second
/// module's coordinates first, matching the composite map
/// `(id (x) map1) then map2` without extra signs. Presence of
/// higher-dimensional descriptors is derived from the factors.
pub fn compose_bimodules(
    b1: &BimoduleCube,
    b2: &BimoduleCube,
) -> Result<BimoduleCube, BimodError> {
    if !same_category(&b1.target, &b2.source) {
        return Err(BimodError::MiddleMismatch);
    }
    let monoid = b1.source.monoid.clone();
    let mut out = BimoduleCube::new(b2.dim + b1.dim, b1.source.clone(), b2.target.clone())?;
    out.factors = b2.factors.concat(&b1.factors, b2.dim);
    for (f2, t2) in b2.faces.iter() {
        for (f1, t1) in b1.faces.iter() {
            let mut face = f2.clone();
            face.extend_from_slice(f1);
            let table = out.faces.get_mut(&face).expect("all faces initialised");
            // presence: derived convolution of descriptors
            let mut acc: BTreeMap<(usize, usize, GammaElt), (i64, Option<Scalar>)> =
                BTreeMap::new();
            for ((p, q1, l1), d1) in t1.iter() {
                for ((q2, r, l2), d2) in t2.iter() {
                    if q1 != q2 {
                        continue;
                    }
                    let vdim = d1.vdim + d2.vdim;
                    let label = monoid.add(l1, l2);
                    let key = (*p, *r, label);
                    let entry = acc.entry(key).or_insert((vdim, None));
                    if vdim < entry.0 {
                        entry.0 = vdim;
                    }
                    if d1.vdim == 0 && d2.vdim == 0 {
                        let prod = d1
                            .count
                            .as_ref()
                            .expect("vdim-0 has count")
                            .mul(d2.count.as_ref().expect("vdim-0 has count"));
                        entry.1 = Some(match entry.1.take() {
                            Some(old) => old.add(&prod),
                            None => prod,
                        });
                    }
                }
            }
            for ((p, r, label), (vdim, count)) in acc {
                let count = if vdim == 0 {
                    Some(count.unwrap_or_else(|| b1.source.field.zero()))
                } else {
                    None
                };
                table.insert((p, r, label), FaceDescriptor { vdim, count });
            }
        }
    }
    Ok(out)
}

/// The certificate produced by [`certify_invariance`].
pub struct InvarianceCertificate {
    pub report: Report,
    pub forward: ChainMap<NovikovElement>,
    pub backward: ChainMap<NovikovElement>,
    pub homotopy_source: ChainMap<NovikovElement>,
    pub homotopy_target: ChainMap<NovikovElement>,
    pub endpoint_inverse_source: Option<HomotopyEquivalence>,
    pub endpoint_inverse_target: Option<HomotopyEquivalence>,
}

fn tables_equal(a: &FaceTable, b: &FaceTable) -> bool {
    let counts = |t: &FaceTable| -> BTreeMap<(usize, usize, GammaElt), Scalar> {
        t.iter()
            .filter_map(|(k, d)| d.count.clone().map(|c| (k.clone(), c)))
            .filter(|(_, c)| !c.is_zero())
            .collect()
    };
    counts(a) == counts(b)
}

/// Verifies that the two homotopy 1-cubes connect the composites of a
/// continuation pair to the identity-shaped continuations, then inverts the
/// identity-shaped endpoints through the maximal ideal to emit explicit
/// equivalence data up to the cutoff.
pub fn certify_invariance(
    f: &BimoduleCube,
    g: &BimoduleCube,
    homotopy_x: &BimoduleCube,
    homotopy_y: &BimoduleCube,
    cutoff: &Rat,
) -> Result<InvarianceCertificate, BimodError> {
    let mut report = Report::new();
    for (cube, name) in [(f, "forward"), (g, "backward")] {
        if cube.dim != 0 {
            report.fail(name, "continuation must be a 0-cube".to_string());
        }
        let r = verify_chain_map_cube(cube)?;
        if !r.ok() {
            report.fail(name, format!("chain-map check failed: {r}"));
        }
    }
    for (cube, name) in [(homotopy_x, "homotopy on the source"), (homotopy_y, "homotopy on the target")] {
        if cube.dim != 1 {
            report.fail(name, "homotopy must be a 1-cube".to_string());
        }
        let r = verify_chain_map_cube(cube)?;
        if !r.ok() {
            report.fail(name, format!("chain-map check failed: {r}"));
        }
    }
    if !report.ok() {
        return Ok(InvarianceCertificate {
            report,
            forward: ChainMap::zero(0),
            backward: ChainMap::zero(0),
            homotopy_source: ChainMap::zero(-1),
            homotopy_target: ChainMap::zero(-1),
            endpoint_inverse_source: None,
            endpoint_inverse_target: None,
        });
    }
    // endpoint identification: face 0 is the composite, face 1 the
    // identity-shaped continuation
    let gf = compose_bimodules(f, g)?;
    let fg = compose_bimodules(g, f)?;
    for (h, composite, name) in [(homotopy_x, &gf, "source"), (homotopy_y, &fg, "target")] {
        let face0 = h.faces.get(&vec![0]).ok_or_else(|| BimodError::MissingFace("0".into()))?;
        let face1 = h.faces.get(&vec![1]).ok_or_else(|| BimodError::MissingFace("1".into()))?;
        let comp_table = composite.faces.get(&vec![]).expect("0-cube face");
        if !tables_equal(face0, comp_table) {
            return Err(BimodError::EndpointMismatch(format!("{name} face 0")));
        }
        // face 1 must be identity-shaped: identity matrix modulo positive
        // action
        let mut ok = true;
        for ((p, q, l), d) in face1.iter() {
            if d.vdim != 0 {
                continue;
            }
            let action = h.source.monoid.action(l).expect("rank-checked");
            if action.is_zero() {
                let c = d.count.as_ref().expect("vdim-0 has count");
                let want_unit = p == q;
                if want_unit && !c.is_one() || !want_unit && !c.is_zero() {
                    ok = false;
                }
            } else if action.is_negative() {
                ok = false;
            }
        }
        let n_objects = h.source.objects.len();
        let diag_count = face1
            .iter()
            .filter(|((p, q, l), d)| {
                p == q
                    && d.count.as_ref().map(|c| c.is_one()).unwrap_or(false)
                    && h.source.monoid.action(l).map(|a| a.is_zero()).unwrap_or(false)
            })
            .count();
        if diag_count != n_objects {
            ok = false;
        }
        if !ok {
            return Err(BimodError::EndpointMismatch(format!(
                "{name} face 1 is not identity-shaped modulo positive action"
            )));
        }
    }
    // invert the identity-shaped endpoints by energy induction
    let face1_x = homotopy_x.restrict(&vec![1])?;
    let face1_y = homotopy_y.restrict(&vec![1])?;
    let map_f = bimodule_map(f)?;
    let map_g = bimodule_map(g)?;
    let map_hx = bimodule_map(homotopy_x)?;
    let map_hy = bimodule_map(homotopy_y)?;
    let ix = bimodule_map(&face1_x)?;
    let iy = bimodule_map(&face1_y)?;
    let inv_x = certify_homotopy_equivalence(
        &ix.map,
        &ix.cf_source.complex,
        &ix.cf_target.complex,
        cutoff,
    )?;
    let inv_y = certify_homotopy_equivalence(
        &iy.map,
        &iy.cf_source.complex,
        &iy.cf_target.complex,
        cutoff,
    )?;
    if !inv_x.report.ok() {
        report.fail("source endpoint", format!("{}", inv_x.report));
    }
    if !inv_y.report.ok() {
        report.fail("target endpoint", format!("{}", inv_y.report));
    }
    report.note(format!(
        "CF(source) and CF(target) are homotopy equivalent up to action {}",
        crate::coeff::fmt_rat(cutoff)
    ));
    // homotopies: the top-face components of the 1-cubes
    let nx = map_f.cf_source.complex.len();
    let ny = map_g.cf_source.complex.len();
    let extract_top = |m: &ChainMap<NovikovElement>, n: usize| -> ChainMap<NovikovElement> {
        // column block of the free-face basis element (index FREE = 2)
        let mut mat = SparseMat::new();
        for ((i, j), v) in m.mat.iter() {
            if *j >= 2 * n {
                mat.set(*i, *j - 2 * n, v.clone());
            }
        }
        ChainMap { degree: -1, mat }
    };
    Ok(InvarianceCertificate {
        report,
        forward: map_f.map,
        backward: map_g.map,
        homotopy_source: extract_top(&map_hx.map, nx),
        homotopy_target: extract_top(&map_hy.map, ny),
        endpoint_inverse_source: Some(inv_x),
        endpoint_inverse_target: Some(inv_y),
    })
}

// ---------------------------------------------------------------------------
// the stratifying poset of a bimodule

/// A stratum of the bimodule poset: an incoming broken path, the central
/// descriptor, and an outgoing broken path. The codimension is the number of
/// non-central labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BimodStratum {
    /// segments from the global source p (labels in the positive cone)
    pub incoming: Vec<(GammaElt, usize)>,
    /// (p', q', central label), with the central label unrestricted
    pub central: (usize, usize, GammaElt),
    /// segments from q' to the global target q
    pub outgoing: Vec<(GammaElt, usize)>,
}

impl BimodStratum {
    pub fn codim(&self) -> usize {
        self.incoming.len() + self.outgoing.len()
    }

    fn render(&self, x: &FlowCategory, y: &FlowCategory, p: usize) -> String {
        let mut s = x.objects[p].label.clone();
        for (_, o) in &self.incoming {
            s.push_str(&format!("-{}", x.objects[*o].label));
        }
        s.push_str(&format!("[{};{}]", x.objects[self.central.0].label, y.objects[self.central.1].label));
        for (_, o) in &self.outgoing {
            s.push_str(&format!("-{}", y.objects[*o].label));
        }
        s
    }
}

/// Enumerates the bimodule poset of (p, q, mu): all strata whose incoming and
/// outgoing paths use recorded descriptors of the flow categories and whose
/// central descriptor is recorded in the given face table. Ordered by
/// merging: absorbing a path segment into the central label, or merging two
/// adjacent path segments.
pub fn bimodule_poset(
    x: &FlowCategory,
    y: &FlowCategory,
    central: &FaceTable,
    p: usize,
    q: usize,
    mu: &GammaElt,
) -> Result<(StratPoset, Vec<BimodStratum>), BimodError> {
    if !central.contains_key(&(p, q, mu.clone())) {
        return Err(BimodError::MissingCentral(
            x.objects[p].label.clone(),
            y.objects[q].label.clone(),
        ));
    }
    let monoid = &x.monoid;
    let mut strata: Vec<BimodStratum> = vec![];
    // incoming paths from p (possibly empty)
    let in_paths = paths_from(x, p);
    for (p_end, in_segs) in &in_paths {
        let in_total = in_segs
            .iter()
            .fold(monoid.zero(), |acc, (l, _)| monoid.add(&acc, l));
        // outgoing paths into q (enumerate paths from every object of y and
        // keep those ending at q)
        for q_start in 0..y.objects.len() {
            for (q_end, out_segs) in paths_from(y, q_start) {
                if q_end != q {
                    continue;
                }
                let out_total = out_segs
                    .iter()
                    .fold(monoid.zero(), |acc, (l, _)| monoid.add(&acc, l));
                let central_label = monoid.sub(&monoid.sub(mu, &in_total), &out_total);
                if central
                    .contains_key(&(*p_end, q_start, central_label.clone()))
                {
                    strata.push(BimodStratum {
                        incoming: in_segs.clone(),
                        central: (*p_end, q_start, central_label),
                        outgoing: out_segs.clone(),
                    });
                }
            }
        }
    }
    strata.sort();
    strata.dedup();
    let elements: Vec<(String, u32)> = strata
        .iter()
        .map(|s| (s.render(x, y, p), s.codim() as u32))
        .collect();
    let mut relations = vec![];
    for (i, a) in strata.iter().enumerate() {
        for (j, b) in strata.iter().enumerate() {
            if i != j && bimod_coarsens(monoid, a, b, p) {
                relations.push((i, j));
            }
        }
    }
    let poset = StratPoset::from_relations(elements, &relations)
        .expect("coarsening is acyclic");
    Ok((poset, strata))
}

/// All broken paths out of `start` (including the empty one), with the
/// sequence condition on zero-action segments.
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

/// a coarsens b: a is obtained from b by merges (segment-segment or
/// absorbing segments adjacent to the centre).
fn bimod_coarsens(
    monoid: &GammaMonoid,
    a: &BimodStratum,
    b: &BimodStratum,
    source: usize,
) -> bool {
    // flatten both to (labels with a centre marker) and compare groupings
    let flatten = |s: &BimodStratum| -> (Vec<(GammaElt, usize)>, usize) {
        // returns the full segment list (incoming, centre, outgoing) with the
        // centre's index; the "object" of the centre segment is q'.
        let mut segs = s.incoming.clone();
        let centre_idx = segs.len();
        segs.push((s.central.2.clone(), s.central.1));
        segs.extend(s.outgoing.iter().cloned());
        (segs, centre_idx)
    };
    let (sa, ca) = flatten(a);
    let (sb, cb) = flatten(b);
    if sa.len() > sb.len() {
        return false;
    }
    // try to match consecutive runs of b's segments to a's segments; the run
    // covering b's centre must map to a's centre
    let mut bi = 0;
    let mut at = source;
    for (k, (la, oa)) in sa.iter().enumerate() {
        let mut acc = monoid.zero();
        let mut covered_centre = false;
        let mut matched = false;
        while bi < sb.len() {
            let (lb, ob) = &sb[bi];
            acc = monoid.add(&acc, lb);
            if bi == cb {
                covered_centre = true;
            }
            bi += 1;
            if acc == *la && *ob == *oa {
                matched = true;
                break;
            }
        }
        if !matched {
            return false;
        }
        if (k == ca) != covered_centre {
            return false;
        }
        at = *oa;
    }
    let _ = at;
    bi == sb.len()
}

// ---------------------------------------------------------------------------
// file format

/// Line format:
/// ```text
/// bimodule-cube
/// dim <n>
/// source <flow category file path>
/// target <flow category file path>
/// entry <face> <p> <q> <g1,...|-> <vdim> [count]
/// ```
/// The face is a string over {0,1,f} ("-" for dimension 0).
pub fn parse_bimodule_file(
    text: &str,
    load_flow: &dyn Fn(&str) -> Result<FlowCategory, BimodError>,
) -> Result<BimoduleCube, BimodError> {
    let mut dim: Option<usize> = None;
    let mut source: Option<Arc<FlowCategory>> = None;
    let mut target: Option<Arc<FlowCategory>> = None;
    let mut entries: Vec<(Face, String, String, GammaElt, i64, Option<String>)> = vec![];
    let mut saw_header = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| BimodError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "bimodule-cube" => saw_header = true,
            "dim" => {
                dim = Some(
                    parts
                        .next()
                        .ok_or_else(|| err("missing dim"))?
                        .parse()
                        .map_err(|_| err("bad dim"))?,
                )
            }
            "source" => {
                let path = parts.next().ok_or_else(|| err("missing path"))?;
                source = Some(Arc::new(load_flow(path)?));
            }
            "target" => {
                let path = parts.next().ok_or_else(|| err("missing path"))?;
                target = Some(Arc::new(load_flow(path)?));
            }
            "entry" => {
                let face = parse_face(parts.next().ok_or_else(|| err("missing face"))?)
                    .ok_or_else(|| err("bad face"))?;
                let p = parts.next().ok_or_else(|| err("missing source object"))?;
                let q = parts.next().ok_or_else(|| err("missing target object"))?;
                let g = parts.next().ok_or_else(|| err("missing label"))?;
                let gamma: GammaElt = if g == "-" {
                    vec![]
                } else {
                    g.split(',')
                        .map(|v| v.trim().parse::<i64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err("bad label"))?
                };
                let vdim: i64 = parts
                    .next()
                    .ok_or_else(|| err("missing vdim"))?
                    .parse()
                    .map_err(|_| err("bad vdim"))?;
                let count = parts.next().map(String::from);
                entries.push((face, p.to_string(), q.to_string(), gamma, vdim, count));
            }
            other => return Err(err(&format!("unknown directive `{other}`"))),
        }
    }
    if !saw_header {
        return Err(BimodError::Parse {
            line: 0,
            msg: "missing bimodule-cube header".into(),
        });
    }
    let dim = dim.ok_or(BimodError::Parse {
        line: 0,
        msg: "missing dim".into(),
    })?;
    let source = source.ok_or(BimodError::Parse {
        line: 0,
        msg: "missing source".into(),
    })?;
    let target = target.ok_or(BimodError::Parse {
        line: 0,
        msg: "missing target".into(),
    })?;
    let field = source.field;
    let mut cube = BimoduleCube::new(dim, source, target)?;
    for (face, p, q, gamma, vdim, count) in entries {
        let ip = cube.source.object_index(&p).ok_or_else(|| BimodError::Parse {
            line: 0,
            msg: format!("unknown source object {p}"),
        })?;
        let iq = cube.target.object_index(&q).ok_or_else(|| BimodError::Parse {
            line: 0,
            msg: format!("unknown target object {q}"),
        })?;
        let scalar = match count {
            Some(c) => Some(Scalar::parse(field, &c).map_err(|e| BimodError::Parse {
                line: 0,
                msg: e.to_string(),
            })?),
            None => None,
        };
        cube.set(face, ip, iq, gamma, vdim, scalar)?;
    }
    Ok(cube)
}

#[cfg(test)]
mod tests;
