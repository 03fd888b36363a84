//! Symmetric cubical sets as finite truncated tables, their tensor product
//! (Day convolution with bijection bookkeeping), the quotient chain complex
//! (degenerate cubes and transposition-symmetrised cubes killed), and the
//! shuffle product.
//!
//! In the symmetric quotient the shuffle product of two cubes is the single
//! block-canonical pair class; associativity and graded commutativity hold
//! strictly, with Koszul signs produced by transposition actions.

use crate::coeff::{BaseField, Scalar};
use crate::homalg::{ChainVec, GradedComplex, GradedLine, SparseMat};
use crate::report::Report;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CubicalError {
    #[error("cube index {0} out of range in dimension {1}")]
    BadIndex(usize, usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A symmetric cubical set, stored up to a truncation dimension: for each n
/// the set of n-cubes with face maps (coordinate, endpoint), degeneracy maps
/// (slot) where the target dimension is still stored, and adjacent
/// transpositions.
#[derive(Debug, Clone, Default)]
pub struct SymCubicalSet {
    /// cubes[n] = labels of the n-cubes.
    pub cubes: Vec<Vec<String>>,
    /// face[n] maps (cube, i, eps) to a cube of dimension n-1; i is 1-based.
    face: Vec<BTreeMap<(usize, usize, u8), usize>>,
    /// degen[n] maps (cube, slot) to a cube of dimension n+1; slot 1-based.
    degen: Vec<BTreeMap<(usize, usize), usize>>,
    /// transp[n] maps (cube, i) to a cube of dimension n (swap of i, i+1).
    transp: Vec<BTreeMap<(usize, usize), usize>>,
}

impl SymCubicalSet {
    pub fn with_dims(max_dim: usize) -> Self {
        SymCubicalSet {
            cubes: vec![vec![]; max_dim + 1],
            face: vec![BTreeMap::new(); max_dim + 1],
            degen: vec![BTreeMap::new(); max_dim + 1],
            transp: vec![BTreeMap::new(); max_dim + 1],
        }
    }

    pub fn max_dim(&self) -> usize {
        self.cubes.len().saturating_sub(1)
    }

    pub fn add_cube(&mut self, n: usize, label: impl Into<String>) -> usize {
        self.cubes[n].push(label.into());
        self.cubes[n].len() - 1
    }

    pub fn set_face(&mut self, n: usize, cube: usize, i: usize, eps: u8, target: usize) {
        self.face[n].insert((cube, i, eps), target);
    }

    pub fn set_degen(&mut self, n: usize, cube: usize, slot: usize, target: usize) {
        self.degen[n].insert((cube, slot), target);
    }

    pub fn set_transp(&mut self, n: usize, cube: usize, i: usize, target: usize) {
        self.transp[n].insert((cube, i), target);
    }

    pub fn face(&self, n: usize, cube: usize, i: usize, eps: u8) -> Option<usize> {
        self.face.get(n)?.get(&(cube, i, eps)).copied()
    }

    pub fn degen(&self, n: usize, cube: usize, slot: usize) -> Option<usize> {
        self.degen.get(n)?.get(&(cube, slot)).copied()
    }

    pub fn transp(&self, n: usize, cube: usize, i: usize) -> Option<usize> {
        self.transp.get(n)?.get(&(cube, i)).copied()
    }

    /// All (slot, core) pairs exhibiting the cube as a degeneracy.
    pub fn degeneracy_preimages(&self, n: usize, cube: usize) -> Vec<(usize, usize)> {
        if n == 0 {
            return vec![];
        }
        self.degen[n - 1]
            .iter()
            .filter(|&(_, &t)| t == cube)
            .map(|(&(core, slot), _)| (slot, core))
            .collect()
    }

    pub fn is_degenerate(&self, n: usize, cube: usize) -> bool {
        !self.degeneracy_preimages(n, cube).is_empty()
    }

    /// Strips degeneracies maximally: returns the set of dummy coordinate
    /// positions (1-based, relative to the cube's own coordinates) and the
    /// nondegenerate core.
    pub fn strip_degeneracies(&self, n: usize, cube: usize) -> (Vec<usize>, usize, usize) {
        let mut positions: Vec<usize> = (1..=n).collect();
        let mut dummies = vec![];
        let mut cur_n = n;
        let mut cur = cube;
        'outer: loop {
            for (slot, core) in self.degeneracy_preimages(cur_n, cur) {
                dummies.push(positions[slot - 1]);
                positions.remove(slot - 1);
                cur_n -= 1;
                cur = core;
                continue 'outer;
            }
            break;
        }
        dummies.sort_unstable();
        (dummies, cur_n, cur)
    }
}

/// Verifies the cube-category relations on every stored generator: face
/// against face, degeneracy against degeneracy, the mixed identities, the
/// transposition involution/braid relations, and their compatibilities.
/// Missing required table entries are reported as findings.
pub fn cub_validate(set: &SymCubicalSet) -> Report {
    let mut report = Report::new();
    let max = set.max_dim();
    let loc = |n: usize, c: usize| format!("{}-cube {}", n, set.cubes[n].get(c).map(String::as_str).unwrap_or("?"));
    for n in 0..=max {
        for c in 0..set.cubes[n].len() {
            // totality of faces and transpositions
            for i in 1..=n {
                for eps in [0u8, 1] {
                    if set.face(n, c, i, eps).is_none() {
                        report.fail(loc(n, c), format!("missing face ({i}, {eps})"));
                    }
                }
            }
            for i in 1..n {
                if set.transp(n, c, i).is_none() {
                    report.fail(loc(n, c), format!("missing transposition {i}"));
                }
            }
            if n < max {
                for i in 1..=n + 1 {
                    if set.degen(n, c, i).is_none() {
                        report.fail(loc(n, c), format!("missing degeneracy {i}"));
                    }
                }
            }
        }
    }
    if !report.ok() {
        return report;
    }
    let check = |report: &mut Report, location: String, what: &str, lhs: Option<usize>, rhs: Option<usize>| {
        if let (Some(l), Some(r)) = (lhs, rhs) {
            if l != r {
                report.fail(location, format!("{what}: {l} vs {r}"));
            }
        }
    };
    for n in 0..=max {
        for c in 0..set.cubes[n].len() {
            // face-face
            for i in 1..=n {
                for j in i..n {
                    for e1 in [0u8, 1] {
                        for e2 in [0u8, 1] {
                            let lhs = set.face(n, c, i, e1).and_then(|x| set.face(n - 1, x, j, e2));
                            let rhs = set
                                .face(n, c, j + 1, e2)
                                .and_then(|x| set.face(n - 1, x, i, e1));
                            check(&mut report, loc(n, c), &format!("face-face ({i},{e1})({j},{e2})"), lhs, rhs);
                        }
                    }
                }
            }
            // degen-degen
            if n + 2 <= max {
                for i in 1..=n + 1 {
                    for j in i..=n + 1 {
                        let lhs = set.degen(n, c, j).and_then(|x| set.degen(n + 1, x, i));
                        let rhs = set.degen(n, c, i).and_then(|x| set.degen(n + 1, x, j + 1));
                        check(&mut report, loc(n, c), &format!("degen-degen ({i},{j})"), lhs, rhs);
                    }
                }
            }
            // face-degen
            if n + 1 <= max {
                for j in 1..=n + 1 {
                    for i in 1..=n + 1 {
                        for eps in [0u8, 1] {
                            let lhs = set.degen(n, c, j).and_then(|x| set.face(n + 1, x, i, eps));
                            let rhs = if i == j {
                                Some(c)
                            } else if i < j {
                                set.face(n, c, i, eps).and_then(|x| set.degen(n - 1, x, j - 1))
                            } else {
                                set.face(n, c, i - 1, eps).and_then(|x| set.degen(n - 1, x, j))
                            };
                            check(&mut report, loc(n, c), &format!("face-degen ({i},{eps};{j})"), lhs, rhs);
                        }
                    }
                }
            }
            // transposition involution and braid
            for i in 1..n {
                let lhs = set.transp(n, c, i).and_then(|x| set.transp(n, x, i));
                check(&mut report, loc(n, c), &format!("involution t{i}"), lhs, Some(c));
                for j in i + 2..n {
                    let lhs = set.transp(n, c, i).and_then(|x| set.transp(n, x, j));
                    let rhs = set.transp(n, c, j).and_then(|x| set.transp(n, x, i));
                    check(&mut report, loc(n, c), &format!("t{i} t{j} commute"), lhs, rhs);
                }
                if i + 1 < n {
                    let lhs = set
                        .transp(n, c, i)
                        .and_then(|x| set.transp(n, x, i + 1))
                        .and_then(|x| set.transp(n, x, i));
                    let rhs = set
                        .transp(n, c, i + 1)
                        .and_then(|x| set.transp(n, x, i))
                        .and_then(|x| set.transp(n, x, i + 1));
                    check(&mut report, loc(n, c), &format!("braid t{i}"), lhs, rhs);
                }
            }
            // face-transposition
            for i in 1..n {
                for eps in [0u8, 1] {
                    let t = set.transp(n, c, i);
                    let lhs = t.and_then(|x| set.face(n, x, i, eps));
                    check(&mut report, loc(n, c), &format!("face-transp (i={i})"), lhs, set.face(n, c, i + 1, eps));
                    let lhs = t.and_then(|x| set.face(n, x, i + 1, eps));
                    check(&mut report, loc(n, c), &format!("face-transp (i+1={})", i + 1), lhs, set.face(n, c, i, eps));
                    for j in 1..=n {
                        if j == i || j == i + 1 {
                            continue;
                        }
                        let lhs = t.and_then(|x| set.face(n, x, j, eps));
                        let rhs = if j < i {
                            set.face(n, c, j, eps).and_then(|x| set.transp(n - 1, x, i - 1))
                        } else {
                            set.face(n, c, j, eps).and_then(|x| set.transp(n - 1, x, i))
                        };
                        check(&mut report, loc(n, c), &format!("face-transp (j={j}, i={i})"), lhs, rhs);
                    }
                }
            }
            // degen-transposition
            if n + 1 <= max {
                for i in 1..=n {
                    let lhs = set.degen(n, c, i).and_then(|x| set.transp(n + 1, x, i));
                    check(&mut report, loc(n, c), &format!("t{i} s{i}"), lhs, set.degen(n, c, i + 1));
                    let lhs = set.degen(n, c, i + 1).and_then(|x| set.transp(n + 1, x, i));
                    check(&mut report, loc(n, c), &format!("t{i} s{}", i + 1), lhs, set.degen(n, c, i));
                    for j in 1..=n + 1 {
                        if j == i || j == i + 1 {
                            continue;
                        }
                        let lhs = set.degen(n, c, j).and_then(|x| set.transp(n + 1, x, i));
                        let rhs = if j < i {
                            set.transp(n, c, i - 1).and_then(|x| set.degen(n, x, j))
                        } else {
                            set.transp(n, c, i).and_then(|x| set.degen(n, x, j))
                        };
                        check(&mut report, loc(n, c), &format!("degen-transp (j={j}, i={i})"), lhs, rhs);
                    }
                }
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// representable cubes

/// A morphism of cubes [k] -> [target_dim]: each output coordinate is a
/// constant or a distinct input coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Coord {
    Const(u8),
    In(usize), // 1-based input index
}

fn cube_morphisms(k: usize, target: usize) -> Vec<Vec<Coord>> {
    // all assignments of target slots with distinct inputs from 1..=k
    fn rec(target: usize, k: usize, used: &mut Vec<bool>, acc: &mut Vec<Coord>, out: &mut Vec<Vec<Coord>>) {
        if acc.len() == target {
            out.push(acc.clone());
            return;
        }
        for c in [Coord::Const(0), Coord::Const(1)] {
            acc.push(c);
            rec(target, k, used, acc, out);
            acc.pop();
        }
        for j in 1..=k {
            if !used[j] {
                used[j] = true;
                acc.push(Coord::In(j));
                rec(target, k, used, acc, out);
                acc.pop();
                used[j] = false;
            }
        }
    }
    let mut out = vec![];
    rec(target, k, &mut vec![false; k + 1], &mut vec![], &mut out);
    out.sort();
    out
}

fn coord_label(f: &[Coord]) -> String {
    if f.is_empty() {
        return "()".into();
    }
    let parts: Vec<String> = f
        .iter()
        .map(|c| match c {
            Coord::Const(e) => e.to_string(),
            Coord::In(j) => format!("x{j}"),
        })
        .collect();
    format!("({})", parts.join(","))
}

/// The representable cube on [0,1]^dim as a symmetric cubical set, stored up
/// to dimension max_dim: k-cubes are the cube-category morphisms
/// [k] -> [dim].
pub fn representable_cube(dim: usize, max_dim: usize) -> SymCubicalSet {
    let mut set = SymCubicalSet::with_dims(max_dim);
    let mut index: Vec<BTreeMap<Vec<Coord>, usize>> = vec![BTreeMap::new(); max_dim + 1];
    let mut morphs: Vec<Vec<Vec<Coord>>> = vec![];
    for k in 0..=max_dim {
        let ms = cube_morphisms(k, dim);
        for m in &ms {
            let id = set.add_cube(k, coord_label(m));
            index[k].insert(m.clone(), id);
        }
        morphs.push(ms);
    }
    // structure maps by precomposition
    for k in 0..=max_dim {
        for m in &morphs[k] {
            let c = index[k][m];
            // faces: substitute x_i = eps, renumber inputs above i down
            for i in 1..=k {
                for eps in [0u8, 1] {
                    let f: Vec<Coord> = m
                        .iter()
                        .map(|co| match co {
                            Coord::In(j) if *j == i => Coord::Const(eps),
                            Coord::In(j) if *j > i => Coord::In(j - 1),
                            other => other.clone(),
                        })
                        .collect();
                    set.set_face(k, c, i, eps, index[k - 1][&f]);
                }
            }
            // degeneracies: renumber inputs >= slot up by one
            if k + 1 <= max_dim {
                for slot in 1..=k + 1 {
                    let f: Vec<Coord> = m
                        .iter()
                        .map(|co| match co {
                            Coord::In(j) if *j >= slot => Coord::In(j + 1),
                            other => other.clone(),
                        })
                        .collect();
                    set.set_degen(k, c, slot, index[k + 1][&f]);
                }
            }
            // transpositions: swap inputs i, i+1
            for i in 1..k {
                let f: Vec<Coord> = m
                    .iter()
                    .map(|co| match co {
                        Coord::In(j) if *j == i => Coord::In(i + 1),
                        Coord::In(j) if *j == i + 1 => Coord::In(i),
                        other => other.clone(),
                    })
                    .collect();
                set.set_transp(k, c, i, index[k][&f]);
            }
        }
    }
    set
}

/// The terminal cubical set: one cube in each dimension.
pub fn point_set(max_dim: usize) -> SymCubicalSet {
    representable_cube(0, max_dim)
}

pub fn interval_set(max_dim: usize) -> SymCubicalSet {
    representable_cube(1, max_dim)
}

// ---------------------------------------------------------------------------
// tensor product

/// Raw representative of a tensor cube: the set of global positions assigned
/// to the left factor, and the two factor cubes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TensorRep {
    pub left_positions: Vec<usize>, // sorted, 1-based, subset of 1..=n
    pub left: usize,
    pub right: usize,
}

/// The tensor of two symmetric cubical sets together with the
/// class bookkeeping: each class of `(positions, a, b)` modulo the
/// interchange of dummy coordinates between the blocks, and the lookup from
/// canonical pairs to classes.
pub struct TensorSet {
    pub set: SymCubicalSet,
    /// raw -> class index, per dimension
    class_of_rep: Vec<BTreeMap<TensorRep, usize>>,
    /// class -> chosen raw representative, per dimension
    pub reps: Vec<Vec<TensorRep>>,
}

fn rank_in(sorted: &[usize], p: usize) -> usize {
    sorted.iter().position(|&x| x == p).expect("member") + 1
}

/// Complete invariant of a tensor cube modulo the interchange of dummy
/// coordinates between the blocks: the global positions of the
/// nondegenerate core coordinates of each factor, plus the cores themselves.
/// Dummy positions are the blockless complement.
fn interchange_signature(
    a: &SymCubicalSet,
    b: &SymCubicalSet,
    n: usize,
    rep: &TensorRep,
) -> (Vec<usize>, usize, Vec<usize>, usize) {
    let i = rep.left_positions.len();
    let right_pos: Vec<usize> = (1..=n)
        .filter(|q| !rep.left_positions.contains(q))
        .collect();
    let (da, _, core_a) = a.strip_degeneracies(i, rep.left);
    let dummy_a: Vec<usize> = da.iter().map(|&s| rep.left_positions[s - 1]).collect();
    let real_a: Vec<usize> = rep
        .left_positions
        .iter()
        .copied()
        .filter(|p| !dummy_a.contains(p))
        .collect();
    let (db, _, core_b) = b.strip_degeneracies(n - i, rep.right);
    let dummy_b: Vec<usize> = db.iter().map(|&s| right_pos[s - 1]).collect();
    let real_b: Vec<usize> = right_pos
        .iter()
        .copied()
        .filter(|p| !dummy_b.contains(p))
        .collect();
    (real_a, core_a, real_b, core_b)
}

/// Day tensor with the bijection bookkeeping quotient: classes are
/// `(positions, a, b)` with the sigma x sigma action absorbed into the
/// canonical sorted-position form, and dummy coordinates free to move
/// between blocks.
pub fn cub_tensor(a: &SymCubicalSet, b: &SymCubicalSet) -> TensorSet {
    let max = a.max_dim() + b.max_dim();
    let mut raws: Vec<Vec<TensorRep>> = vec![vec![]; max + 1];
    for n in 0..=max {
        for i in 0..=n.min(a.max_dim()) {
            let j = n - i;
            if j > b.max_dim() {
                continue;
            }
            for subset in subsets_of(n, i) {
                for ca in 0..a.cubes[i].len() {
                    for cb in 0..b.cubes[j].len() {
                        raws[n].push(TensorRep {
                            left_positions: subset.clone(),
                            left: ca,
                            right: cb,
                        });
                    }
                }
            }
        }
    }
    for level in &mut raws {
        level.sort();
    }
    // classes are cut out by the interchange signature, which is robust
    // against the truncation of either factor
    let mut class_of_raw: Vec<Vec<usize>> = vec![];
    for n in 0..=max {
        let mut sig_to_class: BTreeMap<(Vec<usize>, usize, Vec<usize>, usize), usize> =
            BTreeMap::new();
        let mut cls = vec![0usize; raws[n].len()];
        for (k, rep) in raws[n].iter().enumerate() {
            let sig = interchange_signature(a, b, n, rep);
            let next = sig_to_class.len();
            cls[k] = *sig_to_class.entry(sig).or_insert(next);
        }
        class_of_raw.push(cls);
    }

    let mut set = SymCubicalSet::with_dims(max);
    let mut reps: Vec<Vec<TensorRep>> = vec![vec![]; max + 1];
    for n in 0..=max {
        let mut by_class: BTreeMap<usize, TensorRep> = BTreeMap::new();
        for (k, rep) in raws[n].iter().enumerate() {
            by_class.entry(class_of_raw[n][k]).or_insert_with(|| rep.clone());
        }
        for (cls, rep) in by_class {
            debug_assert_eq!(cls, reps[n].len());
            let label = format!(
                "[{}|{}(x){}]",
                rep.left_positions
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                a.cubes[rep.left_positions.len()][rep.left],
                b.cubes[n - rep.left_positions.len()][rep.right]
            );
            set.add_cube(n, label);
            reps[n].push(rep);
        }
    }
    let class_of_rep: Vec<BTreeMap<TensorRep, usize>> = (0..=max)
        .map(|n| {
            raws[n]
                .iter()
                .enumerate()
                .map(|(k, r)| (r.clone(), class_of_raw[n][k]))
                .collect()
        })
        .collect();
    let mut tensor = TensorSet {
        set,
        class_of_rep,
        reps,
    };
    tensor.fill_structure_maps(a, b);
    tensor
}

fn subsets_of(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if acc.len() == k {
            out.push(acc.clone());
            return;
        }
        for p in start..=n {
            acc.push(p);
            rec(p + 1, n, k, acc, out);
            acc.pop();
        }
    }
    let mut out = vec![];
    rec(1, n, k, &mut vec![], &mut out);
    out
}

impl TensorSet {
    pub fn class_of(&self, n: usize, rep: &TensorRep) -> Option<usize> {
        self.class_of_rep.get(n)?.get(rep).copied()
    }

    /// The block-canonical pair class of `a (x) b` (left block first).
    pub fn pair_class(&self, i: usize, a: usize, j: usize, b: usize) -> Option<usize> {
        let rep = TensorRep {
            left_positions: (1..=i).collect(),
            left: a,
            right: b,
        };
        self.class_of(i + j, &rep)
    }

    fn fill_structure_maps(&mut self, a: &SymCubicalSet, b: &SymCubicalSet) {
        let max = self.set.max_dim();
        for n in 0..=max {
            for cls in 0..self.reps[n].len() {
                let rep = self.reps[n][cls].clone();
                let i = rep.left_positions.len();
                let j = n - i;
                let right_pos: Vec<usize> =
                    (1..=n).filter(|q| !rep.left_positions.contains(q)).collect();
                // faces
                for p in 1..=n {
                    for eps in [0u8, 1] {
                        let target = if rep.left_positions.contains(&p) {
                            let slot = rank_in(&rep.left_positions, p);
                            a.face(i, rep.left, slot, eps).map(|fa| TensorRep {
                                left_positions: rep
                                    .left_positions
                                    .iter()
                                    .filter(|&&q| q != p)
                                    .map(|&q| if q > p { q - 1 } else { q })
                                    .collect(),
                                left: fa,
                                right: rep.right,
                            })
                        } else {
                            let slot = rank_in(&right_pos, p);
                            b.face(j, rep.right, slot, eps).map(|fb| TensorRep {
                                left_positions: rep
                                    .left_positions
                                    .iter()
                                    .map(|&q| if q > p { q - 1 } else { q })
                                    .collect(),
                                left: rep.left,
                                right: fb,
                            })
                        };
                        if let Some(t) = target {
                            if let Some(tc) = self.class_of(n - 1, &t) {
                                self.set.set_face(n, cls, p, eps, tc);
                            }
                        }
                    }
                }
                // degeneracies: put the new dummy coordinate in the left block
                if n + 1 <= max {
                    for slot in 1..=n + 1 {
                        let shifted: Vec<usize> = rep
                            .left_positions
                            .iter()
                            .map(|&q| if q >= slot { q + 1 } else { q })
                            .collect();
                        let mut new_pos = shifted;
                        new_pos.push(slot);
                        new_pos.sort_unstable();
                        let l_slot = rank_in(&new_pos, slot);
                        if let Some(da) = a.degen(i, rep.left, l_slot) {
                            let t = TensorRep {
                                left_positions: new_pos,
                                left: da,
                                right: rep.right,
                            };
                            if let Some(tc) = self.class_of(n + 1, &t) {
                                self.set.set_degen(n, cls, slot, tc);
                            }
                        } else {
                            // left factor truncated: use the right block
                            let shifted: Vec<usize> = rep
                                .left_positions
                                .iter()
                                .map(|&q| if q >= slot { q + 1 } else { q })
                                .collect();
                            let new_right_pos: Vec<usize> = (1..=n + 1)
                                .filter(|q| !shifted.contains(q))
                                .collect();
                            let r_slot = rank_in(&new_right_pos, slot);
                            if let Some(db) = b.degen(j, rep.right, r_slot) {
                                let t = TensorRep {
                                    left_positions: shifted,
                                    left: rep.left,
                                    right: db,
                                };
                                if let Some(tc) = self.class_of(n + 1, &t) {
                                    self.set.set_degen(n, cls, slot, tc);
                                }
                            }
                        }
                    }
                }
                // transpositions of adjacent global coordinates
                for p in 1..n {
                    let in_l = rep.left_positions.contains(&p);
                    let in_l2 = rep.left_positions.contains(&(p + 1));
                    let target = match (in_l, in_l2) {
                        (true, true) => {
                            let slot = rank_in(&rep.left_positions, p);
                            a.transp(i, rep.left, slot).map(|ta| TensorRep {
                                left_positions: rep.left_positions.clone(),
                                left: ta,
                                right: rep.right,
                            })
                        }
                        (false, false) => {
                            let slot = rank_in(&right_pos, p);
                            b.transp(j, rep.right, slot).map(|tb| TensorRep {
                                left_positions: rep.left_positions.clone(),
                                left: rep.left,
                                right: tb,
                            })
                        }
                        (true, false) => Some(TensorRep {
                            left_positions: rep
                                .left_positions
                                .iter()
                                .map(|&q| if q == p { p + 1 } else { q })
                                .collect::<Vec<_>>(),
                            left: rep.left,
                            right: rep.right,
                        }),
                        (false, true) => Some(TensorRep {
                            left_positions: rep
                                .left_positions
                                .iter()
                                .map(|&q| if q == p + 1 { p } else { q })
                                .collect::<Vec<_>>(),
                            left: rep.left,
                            right: rep.right,
                        }),
                    };
                    if let Some(mut t) = target {
                        t.left_positions.sort_unstable();
                        if let Some(tc) = self.class_of(n, &t) {
                            self.set.set_transp(n, cls, p, tc);
                        }
                    }
                }
            }
        }
    }

    /// The symmetry map to the reversed tensor: `(S, a, b)` goes to the
    /// class of `(S^c, b, a)`. Position-preserving, hence an isomorphism of
    /// cubical sets.
    pub fn swap_class(&self, other: &TensorSet, n: usize, cls: usize) -> Option<usize> {
        let rep = &self.reps[n][cls];
        let complement: Vec<usize> = (1..=n)
            .filter(|q| !rep.left_positions.contains(q))
            .collect();
        other.class_of(
            n,
            &TensorRep {
                left_positions: complement,
                left: rep.right,
                right: rep.left,
            },
        )
    }
}

// ---------------------------------------------------------------------------
// chains

/// The chain complex of a symmetric cubical set over a field: degree -n part
/// the free module on n-cubes modulo degenerate cubes and the sums
/// `alpha + t(alpha)` over adjacent transpositions; differential the
/// alternating face sum `d = sum_i (-1)^i (face_i^0 - face_i^1)`.
pub struct CubChainComplex {
    pub complex: GradedComplex<Scalar>,
    pub field: BaseField,
    /// generator index -> (dimension, chosen representative cube)
    pub gen_cube: Vec<(usize, usize)>,
    /// number of raw cubes per dimension
    ncubes: Vec<usize>,
    /// per dimension: echelon rows of the relation space over the cube basis
    reducers: Vec<Vec<Vec<Scalar>>>,
    /// per dimension: quotient generator index per surviving cube column
    survivors: Vec<BTreeMap<usize, usize>>,
}

impl CubChainComplex {
    /// Express a raw cube vector in quotient coordinates.
    pub fn project(&self, n: usize, vec: &BTreeMap<usize, Scalar>) -> ChainVec {
        let mut dense = vec![self.field.zero(); self.ncubes[n]];
        for (&c, v) in vec {
            dense[c] = dense[c].add(v);
        }
        // reduce by echelon relation rows
        for row in &self.reducers[n] {
            let pivot = row.iter().position(|x| !x.is_zero()).expect("nonzero row");
            if dense[pivot].is_zero() {
                continue;
            }
            let factor = dense[pivot].div(&row[pivot]);
            for (k, rv) in row.iter().enumerate() {
                let sub = rv.mul(&factor);
                dense[k] = dense[k].sub(&sub);
            }
        }
        let mut out = ChainVec::new();
        for (c, v) in dense.into_iter().enumerate() {
            if !v.is_zero() {
                let gen = *self
                    .survivors[n]
                    .get(&c)
                    .expect("reduced vector supported on surviving cubes");
                out.insert(gen, v);
            }
        }
        out
    }

    pub fn class_of_cube(&self, n: usize, cube: usize) -> ChainVec {
        let mut v = BTreeMap::new();
        v.insert(cube, self.field.one());
        self.project(n, &v)
    }
}

pub fn cub_chains(set: &SymCubicalSet, field: BaseField) -> CubChainComplex {
    let max = set.max_dim();
    let mut reducers: Vec<Vec<Vec<Scalar>>> = vec![];
    let mut survivors: Vec<BTreeMap<usize, usize>> = vec![];
    let mut generators: Vec<GradedLine> = vec![];
    let mut gen_cube: Vec<(usize, usize)> = vec![];
    let mut gen_index: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); max + 1];
    for n in 0..=max {
        let ncubes = set.cubes[n].len();
        let mut relations: Vec<Vec<Scalar>> = vec![];
        for c in 0..ncubes {
            if set.is_degenerate(n, c) {
                let mut row = vec![field.zero(); ncubes];
                row[c] = field.one();
                relations.push(row);
            }
            for i in 1..n {
                if let Some(t) = set.transp(n, c, i) {
                    let mut row = vec![field.zero(); ncubes];
                    row[c] = row[c].add(&field.one());
                    row[t] = row[t].add(&field.one());
                    if row.iter().any(|x| !x.is_zero()) {
                        relations.push(row);
                    }
                }
            }
        }
        // echelonize the relation rows
        let mut echelon: Vec<Vec<Scalar>> = vec![];
        for mut row in relations {
            for e in &echelon {
                let pivot = e.iter().position(|x| !x.is_zero()).unwrap();
                if !row[pivot].is_zero() {
                    let factor = row[pivot].div(&e[pivot]);
                    for k in 0..ncubes {
                        let sub = e[k].mul(&factor);
                        row[k] = row[k].sub(&sub);
                    }
                }
            }
            if row.iter().any(|x| !x.is_zero()) {
                echelon.push(row);
            }
        }
        echelon.sort_by_key(|r| r.iter().position(|x| !x.is_zero()).unwrap());
        let pivots: Vec<usize> = echelon
            .iter()
            .map(|r| r.iter().position(|x| !x.is_zero()).unwrap())
            .collect();
        let mut surv = BTreeMap::new();
        for c in 0..ncubes {
            if !pivots.contains(&c) {
                let gen = generators.len();
                generators.push(GradedLine::new(
                    format!("c{}d{}", set.cubes[n][c], n),
                    -(n as i64),
                ));
                gen_cube.push((n, c));
                gen_index[n].insert(c, gen);
                surv.insert(c, gen);
            }
        }
        reducers.push(echelon);
        survivors.push(surv);
    }
    let mut shell = CubChainComplex {
        complex: GradedComplex::new(0, generators.clone(), SparseMat::new()).unwrap(),
        field,
        gen_cube: gen_cube.clone(),
        ncubes: set.cubes.iter().map(|c| c.len()).collect(),
        reducers,
        survivors,
    };
    // differential on quotient classes
    let mut diff = SparseMat::new();
    for (gen, &(n, c)) in gen_cube.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let mut raw: BTreeMap<usize, Scalar> = BTreeMap::new();
        for i in 1..=n {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            if let Some(f0) = set.face(n, c, i, 0) {
                let v = field.from_i64(sign);
                let e = raw.remove(&f0).unwrap_or_else(|| field.zero()).add(&v);
                raw.insert(f0, e);
            }
            if let Some(f1) = set.face(n, c, i, 1) {
                let v = field.from_i64(-sign);
                let e = raw.remove(&f1).unwrap_or_else(|| field.zero()).add(&v);
                raw.insert(f1, e);
            }
        }
        let projected = shell.project(n - 1, &raw);
        for (tgt, v) in projected {
            diff.set(tgt, gen, v);
        }
    }
    shell.complex = GradedComplex::new(0, generators, diff).unwrap();
    shell
}

/// The shuffle product on cubical chains: on cube classes it is the
/// block-canonical pair class with sign +1; bilinear in general. Returns a
/// chain in the quotient complex of the tensor set.
pub fn shuffle_product(
    ca: &CubChainComplex,
    cb: &CubChainComplex,
    cab: &CubChainComplex,
    tensor: &TensorSet,
    a: &ChainVec,
    b: &ChainVec,
) -> ChainVec {
    let mut out = ChainVec::new();
    for (&ga, va) in a {
        let (i, cube_a) = ca.gen_cube[ga];
        for (&gb, vb) in b {
            let (j, cube_b) = cb.gen_cube[gb];
            let cls = tensor
                .pair_class(i, cube_a, j, cube_b)
                .expect("pair class exists in the tensor");
            let coeff = va.mul(vb);
            let class_vec = cab.class_of_cube(i + j, cls);
            for (gen, unit) in class_vec {
                let add = unit.mul(&coeff);
                let cur = out.remove(&gen).unwrap_or_else(|| ca.field.zero()).add(&add);
                if !cur.is_zero() {
                    out.insert(gen, cur);
                }
            }
        }
    }
    out
}

/// Regroups a class of `(A (x) B) (x) C` as a class of `A (x) (B (x) C)`:
/// the canonical associator on tensor cubes.
pub fn regroup_class(
    t_ab: &TensorSet,   // A (x) B
    t_ab_c: &TensorSet, // (A (x) B) (x) C
    t_bc: &TensorSet,   // B (x) C
    t_a_bc: &TensorSet, // A (x) (B (x) C)
    n: usize,
    cls: usize,
) -> Option<usize> {
    let rep12 = &t_ab_c.reps[n][cls];
    let s_ab = &rep12.left_positions;
    let rep1 = &t_ab.reps[s_ab.len()][rep12.left];
    let a_pos: Vec<usize> = rep1.left_positions.iter().map(|&k| s_ab[k - 1]).collect();
    let b_pos: Vec<usize> = s_ab
        .iter()
        .copied()
        .filter(|p| !a_pos.contains(p))
        .collect();
    let rest: Vec<usize> = (1..=n).filter(|p| !a_pos.contains(p)).collect();
    let b_rel: Vec<usize> = b_pos.iter().map(|&p| rank_in(&rest, p)).collect();
    let bc_cls = t_bc.class_of(
        n - a_pos.len(),
        &TensorRep {
            left_positions: b_rel,
            left: rep1.right,
            right: rep12.right,
        },
    )?;
    t_a_bc.class_of(
        n,
        &TensorRep {
            left_positions: a_pos,
            left: rep1.left,
            right: bc_cls,
        },
    )
}

// ---------------------------------------------------------------------------
// file format

/// Parses the generator-table format:
/// ```text
/// cubical-set
/// cube <dim> <label>
/// face <label> <i> <0|1> <target>
/// degen <label> <slot> <target>
/// transp <label> <i> <target>
/// ```
pub fn parse_cubical_file(text: &str) -> Result<SymCubicalSet, CubicalError> {
    let mut dims: Vec<(usize, String)> = vec![];
    let mut faces: Vec<(String, usize, u8, String)> = vec![];
    let mut degens: Vec<(String, usize, String)> = vec![];
    let mut transps: Vec<(String, usize, String)> = vec![];
    let mut saw_header = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| CubicalError::Parse {
            line: ln + 1,
            msg: msg.to_string(),
        };
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "cubical-set" => saw_header = true,
            "cube" => {
                let d: usize = parts
                    .next()
                    .ok_or_else(|| err("missing dim"))?
                    .parse()
                    .map_err(|_| err("bad dim"))?;
                let label = parts.next().ok_or_else(|| err("missing label"))?;
                dims.push((d, label.to_string()));
            }
            "face" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?.to_string();
                let i: usize = parts.next().ok_or_else(|| err("missing coord"))?.parse().map_err(|_| err("bad coord"))?;
                let eps: u8 = parts.next().ok_or_else(|| err("missing endpoint"))?.parse().map_err(|_| err("bad endpoint"))?;
                let t = parts.next().ok_or_else(|| err("missing target"))?.to_string();
                faces.push((label, i, eps, t));
            }
            "degen" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?.to_string();
                let i: usize = parts.next().ok_or_else(|| err("missing slot"))?.parse().map_err(|_| err("bad slot"))?;
                let t = parts.next().ok_or_else(|| err("missing target"))?.to_string();
                degens.push((label, i, t));
            }
            "transp" => {
                let label = parts.next().ok_or_else(|| err("missing label"))?.to_string();
                let i: usize = parts.next().ok_or_else(|| err("missing coord"))?.parse().map_err(|_| err("bad coord"))?;
                let t = parts.next().ok_or_else(|| err("missing target"))?.to_string();
                transps.push((label, i, t));
            }
            other => return Err(err(&format!("unknown directive `{other}`"))),
        }
    }
    if !saw_header {
        return Err(CubicalError::Parse {
            line: 0,
            msg: "missing cubical-set header".into(),
        });
    }
    let max = dims.iter().map(|(d, _)| *d).max().unwrap_or(0);
    let mut set = SymCubicalSet::with_dims(max);
    let mut where_is: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (d, label) in dims {
        let id = set.add_cube(d, label.clone());
        where_is.insert(label, (d, id));
    }
    let lookup = |m: &BTreeMap<String, (usize, usize)>, l: &str| -> Result<(usize, usize), CubicalError> {
        m.get(l)
            .copied()
            .ok_or_else(|| CubicalError::Parse {
                line: 0,
                msg: format!("unknown cube `{l}`"),
            })
    };
    for (label, i, eps, t) in faces {
        let (n, c) = lookup(&where_is, &label)?;
        let (_, tc) = lookup(&where_is, &t)?;
        set.set_face(n, c, i, eps, tc);
    }
    for (label, i, t) in degens {
        let (n, c) = lookup(&where_is, &label)?;
        let (_, tc) = lookup(&where_is, &t)?;
        set.set_degen(n, c, i, tc);
    }
    for (label, i, t) in transps {
        let (n, c) = lookup(&where_is, &label)?;
        let (_, tc) = lookup(&where_is, &t)?;
        set.set_transp(n, c, i, tc);
    }
    Ok(set)
}

#[cfg(test)]
mod tests;
