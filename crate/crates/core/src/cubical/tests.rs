use super::*;
use crate::homalg::{cc_validate, homology_field};

fn qf() -> BaseField {
    BaseField::Rationals
}

fn q(n: i64) -> Scalar {
    BaseField::Rationals.from_i64(n)
}

#[test]
fn representable_cubes_validate() {
    for dim in 0..=3 {
        let set = representable_cube(dim, 3.min(dim + 1));
        let report = cub_validate(&set);
        assert!(report.ok(), "cube {dim}: {report}");
    }
}

#[test]
fn broken_face_relation_is_located() {
    let mut set = representable_cube(1, 2);
    // corrupt one face entry of the identity 1-cube: its degenerate square
    // then violates the face-degeneracy relation
    let id1 = set.cubes[1].iter().position(|l| l == "(x1)").unwrap();
    let e0 = set.cubes[0].iter().position(|l| l == "(0)").unwrap();
    set.set_face(1, id1, 1, 1, e0); // both endpoints now 0
    let report = cub_validate(&set);
    assert!(!report.ok());
}

#[test]
fn strip_degeneracies_finds_cores() {
    let set = representable_cube(1, 3);
    // the cube (x2): input 1 unused = s_1 of the identity edge
    let c = set.cubes[2].iter().position(|l| l == "(x2)").unwrap();
    let (dummies, core_dim, core) = set.strip_degeneracies(2, c);
    assert_eq!(dummies, vec![1]);
    assert_eq!(core_dim, 1);
    assert_eq!(set.cubes[1][core], "(x1)");
}

#[test]
fn tensor_with_point_matches_factor() {
    let a = interval_set(2);
    let p = point_set(2);
    let t = cub_tensor(&a, &p);
    assert!(cub_validate(&t.set).ok(), "{}", cub_validate(&t.set));
    // nondegenerate classes must match the nondegenerate cubes of A
    for n in 0..=2 {
        let a_nondeg = (0..a.cubes[n].len())
            .filter(|&c| !a.is_degenerate(n, c))
            .count();
        let t_nondeg = (0..t.set.cubes[n].len())
            .filter(|&c| !t.set.is_degenerate(n, c))
            .count();
        assert_eq!(a_nondeg, t_nondeg, "dimension {n}");
    }
}

#[test]
fn interval_tensor_interval_has_one_nondegenerate_square_class() {
    let a = interval_set(2);
    let t = cub_tensor(&a, &a);
    let nondeg2: Vec<usize> = (0..t.set.cubes[2].len())
        .filter(|&c| !t.set.is_degenerate(2, c))
        .collect();
    // the two coordinate orders form a single transposition orbit
    assert_eq!(nondeg2.len(), 2);
    assert_eq!(t.set.transp(2, nondeg2[0], 1), Some(nondeg2[1]));
    // and a single class in chains
    let c = cub_chains(&t.set, qf());
    assert_eq!(c.complex.gens_in_class(-2).len(), 1);
}

#[test]
fn tensor_of_valid_sets_validates() {
    let a = interval_set(2);
    let b = representable_cube(2, 2);
    let t = cub_tensor(&a, &b);
    let report = cub_validate(&t.set);
    assert!(report.ok(), "{report}");
}

#[test]
fn chains_of_point_and_interval() {
    let p = point_set(2);
    let cp = cub_chains(&p, qf());
    let h = homology_field(&cp.complex);
    assert_eq!(cp.complex.gens_in_class(0).len(), 1);
    assert_eq!(h.get(&0), Some(&1));

    let i = interval_set(2);
    let ci = cub_chains(&i, qf());
    assert!(cc_validate(&ci.complex).ok());
    // one generator in degree -1 (the top stratum), two in degree 0
    assert_eq!(ci.complex.gens_in_class(-1).len(), 1);
    assert_eq!(ci.complex.gens_in_class(0).len(), 2);
    // d(top) = e1 - e0
    let top = ci.complex.gens_in_class(-1)[0];
    let col: Vec<(usize, Scalar)> = ci
        .complex
        .diff
        .iter()
        .filter(|((_, j), _)| *j == top)
        .map(|((i2, _), v)| (*i2, v.clone()))
        .collect();
    assert_eq!(col.len(), 2);
    let (i1, v1) = &col[0];
    let (i2, v2) = &col[1];
    assert_eq!(v1.add(v2), q(0));
    let l1 = &ci.complex.generators[*i1].label;
    let l2 = &ci.complex.generators[*i2].label;
    assert_ne!(l1, l2);
    // homology of the interval is a point
    let h = homology_field(&ci.complex);
    assert_eq!(h.get(&0), Some(&1));
    assert_eq!(h.get(&-1), Some(&0));
}

/// A set with a transposition-fixed square: one vertex, one edge (plus the
/// degenerate edge), and a 2-cube fixed by the swap.
fn symmetric_square_set() -> SymCubicalSet {
    let mut s = SymCubicalSet::with_dims(2);
    let v = s.add_cube(0, "v");
    let e = s.add_cube(1, "e");
    let dv = s.add_cube(1, "dv");
    for (c, targets) in [(e, (v, v)), (dv, (v, v))] {
        s.set_face(1, c, 1, 0, targets.0);
        s.set_face(1, c, 1, 1, targets.1);
    }
    s.set_degen(0, v, 1, dv);
    let sigma = s.add_cube(2, "sigma");
    let s1e = s.add_cube(2, "s1e");
    let s2e = s.add_cube(2, "s2e");
    let ddv = s.add_cube(2, "ddv");
    // sigma: all faces e, fixed by the transposition
    for i in [1, 2] {
        for eps in [0, 1] {
            s.set_face(2, sigma, i, eps, e);
        }
    }
    s.set_transp(2, sigma, 1, sigma);
    // s1e: dummy coordinate 1: faces (1,eps) -> e; (2,eps) -> dv-face rules
    // face-degen: face_i s_j: i=j -> id; here s1(e): face(1,eps) = e,
    // face(2,eps) = s1(face(1,eps) e) = dv if that face is a vertex... the
    // face of s1(e) in direction 2 is s1 applied to the eps-endpoint of e,
    // which is the degenerate edge dv.
    s.set_face(2, s1e, 1, 0, e);
    s.set_face(2, s1e, 1, 1, e);
    s.set_face(2, s1e, 2, 0, dv);
    s.set_face(2, s1e, 2, 1, dv);
    s.set_degen(1, e, 1, s1e);
    s.set_face(2, s2e, 2, 0, e);
    s.set_face(2, s2e, 2, 1, e);
    s.set_face(2, s2e, 1, 0, dv);
    s.set_face(2, s2e, 1, 1, dv);
    s.set_degen(1, e, 2, s2e);
    s.set_transp(2, s1e, 1, s2e);
    s.set_transp(2, s2e, 1, s1e);
    for i in [1, 2] {
        for eps in [0, 1] {
            s.set_face(2, ddv, i, eps, dv);
        }
    }
    s.set_degen(1, dv, 1, ddv);
    s.set_degen(1, dv, 2, ddv);
    s.set_transp(2, ddv, 1, ddv);
    s
}

#[test]
fn transposition_fixed_square_dies_over_q_survives_over_f2() {
    let set = symmetric_square_set();
    let report = cub_validate(&set);
    assert!(report.ok(), "{report}");
    let cq = cub_chains(&set, qf());
    assert_eq!(cq.complex.gens_in_class(-2).len(), 0); // 2 sigma ~ 0 over Q
    let c2 = cub_chains(&set, BaseField::Prime(2));
    assert_eq!(c2.complex.gens_in_class(-2).len(), 1); // survives over F2
    assert!(cc_validate(&c2.complex).ok());
}

#[test]
fn shuffle_of_zero_cubes_is_the_paired_zero_cube() {
    let a = interval_set(1);
    let ca = cub_chains(&a, qf());
    let t = cub_tensor(&a, &a);
    let cab = cub_chains(&t.set, qf());
    let e0 = ca
        .gen_cube
        .iter()
        .position(|&(n, c)| n == 0 && a.cubes[0][c] == "(0)")
        .unwrap();
    let mut x = ChainVec::new();
    x.insert(e0, q(1));
    let prod = shuffle_product(&ca, &ca, &cab, &t, &x, &x);
    assert_eq!(prod.len(), 1);
    let (&gen, v) = prod.iter().next().unwrap();
    assert_eq!(*v, q(1));
    assert_eq!(cab.gen_cube[gen].0, 0);
}

#[test]
fn shuffle_of_tops_is_the_square_top() {
    let a = interval_set(2);
    let ca = cub_chains(&a, qf());
    let t = cub_tensor(&a, &a);
    let cab = cub_chains(&t.set, qf());
    let top = ca.complex.gens_in_class(-1)[0];
    let mut x = ChainVec::new();
    x.insert(top, q(1));
    let prod = shuffle_product(&ca, &ca, &cab, &t, &x, &x);
    assert_eq!(prod.len(), 1);
    let (&gen, v) = prod.iter().next().unwrap();
    assert_eq!(cab.complex.degree_of(gen), -2);
    assert!(v.is_one() || *v == q(-1));
}

fn chain_d(cx: &GradedComplex<Scalar>, v: &ChainVec) -> ChainVec {
    cx.diff.apply(v)
}

#[test]
fn leibniz_exhaustive_on_small_sets() {
    let a = interval_set(2);
    let b = representable_cube(2, 2);
    let ca = cub_chains(&a, qf());
    let cb = cub_chains(&b, qf());
    let t = cub_tensor(&a, &b);
    let cab = cub_chains(&t.set, qf());
    for ga in 0..ca.complex.len() {
        for gb in 0..cb.complex.len() {
            let mut x = ChainVec::new();
            x.insert(ga, q(1));
            let mut y = ChainVec::new();
            y.insert(gb, q(1));
            let dx = chain_d(&ca.complex, &x);
            let dy = chain_d(&cb.complex, &y);
            // d(x . y)
            let prod = shuffle_product(&ca, &cb, &cab, &t, &x, &y);
            let lhs = chain_d(&cab.complex, &prod);
            // dx . y + (-1)^{deg x} x . dy
            let mut rhs = shuffle_product(&ca, &cb, &cab, &t, &dx, &y);
            let sign = if ca.complex.degree_of(ga).rem_euclid(2) == 1 {
                q(-1)
            } else {
                q(1)
            };
            for (gen, v) in shuffle_product(&ca, &cb, &cab, &t, &x, &dy) {
                let add = v.mul(&sign);
                let cur = rhs.remove(&gen).unwrap_or_else(|| q(0)).add(&add);
                if !cur.is_zero() {
                    rhs.insert(gen, cur);
                }
            }
            assert_eq!(lhs, rhs, "Leibniz fails at ({ga}, {gb})");
        }
    }
}

#[test]
fn graded_commutativity_via_block_swap() {
    let a = interval_set(2);
    let b = interval_set(2);
    let t_ab = cub_tensor(&a, &b);
    let t_ba = cub_tensor(&b, &a);
    let ca = cub_chains(&a, qf());
    let cb = cub_chains(&b, qf());
    let cab = cub_chains(&t_ab.set, qf());
    let cba = cub_chains(&t_ba.set, qf());
    for ga in 0..ca.complex.len() {
        for gb in 0..cb.complex.len() {
            let mut x = ChainVec::new();
            x.insert(ga, q(1));
            let mut y = ChainVec::new();
            y.insert(gb, q(1));
            let xy = shuffle_product(&ca, &cb, &cab, &t_ab, &x, &y);
            let yx = shuffle_product(&cb, &ca, &cba, &t_ba, &y, &x);
            // push yx through the swap iso into chains of a(x)b
            let mut swapped = ChainVec::new();
            for (gen, v) in yx {
                let (n, cls) = cba.gen_cube[gen];
                let target = t_ba.swap_class(&t_ab, n, cls).expect("swap class");
                for (g2, unit) in cab.class_of_cube(n, target) {
                    let add = unit.mul(&v);
                    let cur = swapped.remove(&g2).unwrap_or_else(|| q(0)).add(&add);
                    if !cur.is_zero() {
                        swapped.insert(g2, cur);
                    }
                }
            }
            let i = ca.complex.degree_of(ga).rem_euclid(2);
            let j = cb.complex.degree_of(gb).rem_euclid(2);
            let expected_sign = if i * j % 2 == 1 { q(-1) } else { q(1) };
            let mut scaled = ChainVec::new();
            for (g, v) in swapped {
                scaled.insert(g, v.mul(&expected_sign));
            }
            assert_eq!(xy, scaled, "commutativity fails at ({ga}, {gb})");
        }
    }
}

#[test]
fn associativity_after_canonical_regrouping() {
    let a = interval_set(1);
    let b = interval_set(1);
    let c = interval_set(1);
    let t1 = cub_tensor(&a, &b);
    let t12 = cub_tensor(&t1.set, &c);
    let t2 = cub_tensor(&b, &c);
    let t21 = cub_tensor(&a, &t2.set);
    let ca = cub_chains(&a, qf());
    let cb = cub_chains(&b, qf());
    let cc = cub_chains(&c, qf());
    let c1 = cub_chains(&t1.set, qf());
    let c12 = cub_chains(&t12.set, qf());
    let c2 = cub_chains(&t2.set, qf());
    let c21 = cub_chains(&t21.set, qf());
    for ga in 0..ca.complex.len() {
        for gb in 0..cb.complex.len() {
            for gc in 0..cc.complex.len() {
                let mut x = ChainVec::new();
                x.insert(ga, q(1));
                let mut y = ChainVec::new();
                y.insert(gb, q(1));
                let mut z = ChainVec::new();
                z.insert(gc, q(1));
                let xy = shuffle_product(&ca, &cb, &c1, &t1, &x, &y);
                let lhs = shuffle_product(&c1, &cc, &c12, &t12, &xy, &z);
                let yz = shuffle_product(&cb, &cc, &c2, &t2, &y, &z);
                let rhs = shuffle_product(&ca, &c2, &c21, &t21, &x, &yz);
                // regroup lhs into chains of a(x)(b(x)c)
                let mut regrouped = ChainVec::new();
                for (gen, v) in lhs {
                    let (n, cls) = c12.gen_cube[gen];
                    let target = regroup_class(&t1, &t12, &t2, &t21, n, cls)
                        .expect("regrouped class");
                    for (g2, unit) in c21.class_of_cube(n, target) {
                        let add = unit.mul(&v);
                        let cur = regrouped.remove(&g2).unwrap_or_else(|| q(0)).add(&add);
                        if !cur.is_zero() {
                            regrouped.insert(g2, cur);
                        }
                    }
                }
                assert_eq!(regrouped, rhs, "associativity fails at ({ga},{gb},{gc})");
            }
        }
    }
}

#[test]
fn shuffle_is_a_quasi_iso_on_contractible_fixtures() {
    // both sides of interval (x) interval have the homology of a point,
    // and the induced map hits the generator
    let a = interval_set(2);
    let t = cub_tensor(&a, &a);
    let cab = cub_chains(&t.set, qf());
    let h = homology_field(&cab.complex);
    assert_eq!(h.get(&0), Some(&1));
    for (k, r) in h {
        if k != 0 {
            assert_eq!(r, 0, "degree {k}");
        }
    }
}

#[test]
fn cubical_file_roundtrip() {
    let text = "cubical-set\ncube 0 v\ncube 1 e\nface e 1 0 v\nface e 1 1 v\ndegen v 1 de\ncube 1 de\nface de 1 0 v\nface de 1 1 v\n";
    let set = parse_cubical_file(text).unwrap();
    assert_eq!(set.cubes[0].len(), 1);
    assert_eq!(set.cubes[1].len(), 2);
    let report = cub_validate(&set);
    assert!(report.ok(), "{report}");
    assert!(parse_cubical_file("cube 0 v\nno-header\n").is_err());
}
