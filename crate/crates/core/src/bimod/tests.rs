use super::*;
use crate::coeff::Cutoff;
use crate::flowcat::FlowObject;
use crate::homalg::homology_novikov;

fn q(n: i64) -> Scalar {
    BaseField::Rationals.from_i64(n)
}

/// Two objects a (deg 0), b (deg 1), differential count 1, trivial monoid.
fn chain_category() -> Arc<FlowCategory> {
    let m = GammaMonoid::trivial();
    let objects = vec![
        FlowObject { label: "a".into(), degree: 0 },
        FlowObject { label: "b".into(), degree: 1 },
    ];
    let mut cat = FlowCategory::new(0, m, BaseField::Rationals, objects, Cutoff::Infinite);
    cat.record(0, 1, vec![], 0, Some(q(1))).unwrap();
    Arc::new(cat)
}

#[test]
fn identity_continuation_is_the_identity_matrix() {
    let x = chain_category();
    let cube = BimoduleCube::identity_continuation(x);
    let data = bimodule_map(&cube).unwrap();
    assert_eq!(data.map.mat.len(), 2);
    for ((i, j), v) in data.map.mat.iter() {
        assert_eq!(i, j);
        assert!(v.coeff(&[]).is_one());
    }
    let report = verify_chain_map_cube(&cube).unwrap();
    assert!(report.ok(), "{report}");
}

#[test]
fn zero_counts_give_the_zero_map() {
    let x = chain_category();
    let cube = BimoduleCube::new(0, x.clone(), x).unwrap();
    let data = bimodule_map(&cube).unwrap();
    assert!(data.map.mat.is_empty());
    assert!(verify_chain_map_cube(&cube).unwrap().ok());
}

/// A 1-cube between copies of the chain category: endpoints id and 2*id,
/// top-face count 1 from b to a, realising f1 - f0 = dH + Hd.
fn homotopy_cube(x: &Arc<FlowCategory>) -> BimoduleCube {
    let mut cube = BimoduleCube::new(1, x.clone(), x.clone()).unwrap();
    for p in 0..2 {
        cube.set(vec![0], p, p, vec![], 0, Some(q(1))).unwrap();
        cube.set(vec![1], p, p, vec![], 0, Some(q(2))).unwrap();
    }
    cube.set(vec![FREE], 1, 0, vec![], 0, Some(q(1))).unwrap();
    cube
}

#[test]
fn homotopy_identity_verifies_exactly() {
    let x = chain_category();
    let cube = homotopy_cube(&x);
    let report = verify_chain_map_cube(&cube).unwrap();
    assert!(report.ok(), "{report}");
    // corrupting the top face breaks the located verification
    let mut bad = cube.clone();
    bad.set(vec![FREE], 1, 0, vec![], 0, Some(q(5))).unwrap();
    let report = verify_chain_map_cube(&bad).unwrap();
    assert!(!report.ok());
}

#[test]
fn degenerate_constant_cube_verifies() {
    // both endpoints the identity and zero top face: the facet contributions
    // cancel
    let x = chain_category();
    let mut cube = BimoduleCube::new(1, x.clone(), x.clone()).unwrap();
    for p in 0..2 {
        cube.set(vec![0], p, p, vec![], 0, Some(q(1))).unwrap();
        cube.set(vec![1], p, p, vec![], 0, Some(q(1))).unwrap();
    }
    let report = verify_chain_map_cube(&cube).unwrap();
    assert!(report.ok(), "{report}");
}

#[test]
fn composition_is_matrix_product() {
    let x = chain_category();
    let mut b1 = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    b1.set(vec![], 0, 0, vec![], 0, Some(q(2))).unwrap();
    b1.set(vec![], 1, 1, vec![], 0, Some(q(2))).unwrap();
    let mut b2 = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    b2.set(vec![], 0, 0, vec![], 0, Some(q(3))).unwrap();
    b2.set(vec![], 1, 1, vec![], 0, Some(q(3))).unwrap();
    let composed = compose_bimodules(&b1, &b2).unwrap();
    let data = bimodule_map(&composed).unwrap();
    for ((i, j), v) in data.map.mat.iter() {
        assert_eq!(i, j);
        assert_eq!(v.coeff(&[]), q(6));
    }
    // functoriality: the composed map equals the composite of the maps
    let m1 = bimodule_map(&b1).unwrap();
    let m2 = bimodule_map(&b2).unwrap();
    let composite = m2.map.mat.compose(&m1.map.mat);
    assert_eq!(data.map.mat, composite);
}

#[test]
fn identity_composition_keeps_counts() {
    let x = chain_category();
    let id = BimoduleCube::identity_continuation(x.clone());
    let mut b = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    b.set(vec![], 0, 0, vec![], 0, Some(q(5))).unwrap();
    b.set(vec![], 1, 1, vec![], 0, Some(q(7))).unwrap();
    let left = compose_bimodules(&b, &id).unwrap();
    let right = compose_bimodules(&id, &b).unwrap();
    for composed in [left, right] {
        let table = composed.faces.get(&vec![]).unwrap();
        assert_eq!(table[&(0, 0, vec![])].count, Some(q(5)));
        assert_eq!(table[&(1, 1, vec![])].count, Some(q(7)));
    }
}

#[test]
fn composition_with_zero_is_zero() {
    let x = chain_category();
    let zero = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    let mut b = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    b.set(vec![], 0, 0, vec![], 0, Some(q(5))).unwrap();
    let composed = compose_bimodules(&b, &zero).unwrap();
    let data = bimodule_map(&composed).unwrap();
    assert!(data.map.mat.is_empty());
}

#[test]
fn middle_mismatch_is_rejected() {
    let x = chain_category();
    let m = GammaMonoid::trivial();
    let other = Arc::new(FlowCategory::new(
        0,
        m,
        BaseField::Rationals,
        vec![FlowObject { label: "z".into(), degree: 0 }],
        Cutoff::Infinite,
    ));
    let b1 = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    let b2 = BimoduleCube::new(0, other, x).unwrap();
    assert!(matches!(
        compose_bimodules(&b1, &b2),
        Err(BimodError::MiddleMismatch)
    ));
}

#[test]
fn restriction_commutes_with_map_restriction() {
    let x = chain_category();
    let cube = homotopy_cube(&x);
    let face0 = cube.restrict(&vec![0]).unwrap();
    let data0 = bimodule_map(&face0).unwrap();
    let full = bimodule_map(&cube).unwrap();
    // the face-0 block of the full map equals the restricted cube's map
    let nx = 2;
    for ((i, j), v) in data0.map.mat.iter() {
        let big = full.map.mat.get(*i, 0 * nx + *j);
        assert_eq!(big, Some(v));
    }
}

#[test]
fn monotone_cubes_have_nonnegative_valuations() {
    let m = GammaMonoid::standard_z();
    let objects = vec![
        FlowObject { label: "a".into(), degree: 0 },
        FlowObject { label: "b".into(), degree: 1 },
    ];
    let mut cat = FlowCategory::new(0, m.clone(), BaseField::Rationals, objects, Cutoff::Infinite);
    cat.record(0, 1, vec![1], 0, Some(q(1))).unwrap();
    let x = Arc::new(cat);
    let mut cube = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    cube.set(vec![], 0, 0, vec![0], 0, Some(q(1))).unwrap();
    cube.set(vec![], 1, 1, vec![2], 0, Some(q(3))).unwrap();
    assert!(cube.is_monotone());
    let data = bimodule_map(&cube).unwrap();
    for (_, v) in data.map.mat.iter() {
        match v.valuation() {
            crate::coeff::Valuation::Finite(a) => assert!(!a.is_negative()),
            crate::coeff::Valuation::Infinite => {}
        }
    }
    let mut non_monotone = BimoduleCube::new(0, x.clone(), x).unwrap();
    non_monotone.set(vec![], 0, 0, vec![-1], 0, Some(q(1))).unwrap();
    assert!(!non_monotone.is_monotone());
}

#[test]
fn certify_invariance_of_identity_pair() {
    let x = chain_category();
    let f = BimoduleCube::identity_continuation(x.clone());
    let g = BimoduleCube::identity_continuation(x.clone());
    // constant homotopy: both faces the identity, zero top
    let mut h = BimoduleCube::new(1, x.clone(), x.clone()).unwrap();
    for p in 0..2 {
        h.set(vec![0], p, p, vec![], 0, Some(q(1))).unwrap();
        h.set(vec![1], p, p, vec![], 0, Some(q(1))).unwrap();
    }
    let cert = certify_invariance(&f, &g, &h, &h, &Rat::from_integer(10.into())).unwrap();
    assert!(cert.report.ok(), "{}", cert.report);
    assert!(cert.homotopy_source.mat.is_empty());

    // a corrupted homotopy count breaks the chain-map verification and the
    // certificate records the located residual
    let mut bad = h.clone();
    bad.set(vec![0], 0, 0, vec![], 0, Some(q(2))).unwrap();
    let cert = certify_invariance(&f, &g, &bad, &h, &Rat::from_integer(10.into())).unwrap();
    assert!(!cert.report.ok());

    // a homotopy whose face 0 is a valid chain map but not the stated
    // composite is rejected as an endpoint mismatch
    let mut f2 = BimoduleCube::new(0, x.clone(), x.clone()).unwrap();
    for p in 0..2 {
        f2.set(vec![], p, p, vec![], 0, Some(q(2))).unwrap();
    }
    assert!(matches!(
        certify_invariance(&f2, &g, &h, &h, &Rat::from_integer(10.into())),
        Err(BimodError::EndpointMismatch(_))
    ));
}

#[test]
fn bimodule_poset_of_singletons() {
    let m = GammaMonoid::trivial();
    let x = FlowCategory::new(
        0,
        m.clone(),
        BaseField::Rationals,
        vec![FlowObject { label: "p".into(), degree: 0 }],
        Cutoff::Infinite,
    );
    let y = FlowCategory::new(
        0,
        m,
        BaseField::Rationals,
        vec![FlowObject { label: "r".into(), degree: 0 }],
        Cutoff::Infinite,
    );
    let mut central = FaceTable::new();
    central.insert((0, 0, vec![]), FaceDescriptor { vdim: 0, count: Some(q(1)) });
    let (poset, strata) = bimodule_poset(&x, &y, &central, 0, 0, &vec![]).unwrap();
    assert_eq!(strata.len(), 1);
    assert_eq!(poset.len(), 1);
}

#[test]
fn bimodule_poset_with_breaking() {
    // X has a -> b; the central table is recorded on (a, r) and (b, r):
    // the stratum poset of (a, r) is an interval-model shape
    let m = GammaMonoid::trivial();
    let objects = vec![
        FlowObject { label: "a".into(), degree: 0 },
        FlowObject { label: "b".into(), degree: 1 },
    ];
    let mut x = FlowCategory::new(0, m.clone(), BaseField::Rationals, objects, Cutoff::Infinite);
    x.record(0, 1, vec![], 0, Some(q(1))).unwrap();
    let y = FlowCategory::new(
        0,
        m,
        BaseField::Rationals,
        vec![FlowObject { label: "r".into(), degree: 0 }],
        Cutoff::Infinite,
    );
    let mut central = FaceTable::new();
    central.insert((0, 0, vec![]), FaceDescriptor { vdim: 1, count: None });
    central.insert((1, 0, vec![]), FaceDescriptor { vdim: 0, count: Some(q(1)) });
    let (poset, strata) = bimodule_poset(&x, &y, &central, 0, 0, &vec![]).unwrap();
    assert_eq!(strata.len(), 2);
    assert_eq!(poset.minimal_elements().len(), 1);
    let min = poset.minimal_elements()[0];
    assert_eq!(strata[min].codim(), 0);
    assert!(crate::stratmodel::validate_model(&poset).ok());
}

#[test]
fn novikov_weighted_invariance() {
    // graded category with a T-weighted differential; identity pair still
    // certifies and homology ranks agree
    let m = GammaMonoid::standard_z();
    let objects = vec![
        FlowObject { label: "a".into(), degree: 0 },
        FlowObject { label: "b".into(), degree: 1 },
        FlowObject { label: "c".into(), degree: 1 },
    ];
    let mut cat = FlowCategory::new(0, m.clone(), BaseField::Rationals, objects, Cutoff::Infinite);
    cat.record(0, 1, vec![2], 0, Some(q(1))).unwrap();
    let x = Arc::new(cat);
    let f = BimoduleCube::identity_continuation(x.clone());
    let g = BimoduleCube::identity_continuation(x.clone());
    let mut h = BimoduleCube::new(1, x.clone(), x.clone()).unwrap();
    for p in 0..3 {
        h.set(vec![0], p, p, vec![0], 0, Some(q(1))).unwrap();
        h.set(vec![1], p, p, vec![0], 0, Some(q(1))).unwrap();
    }
    let cert = certify_invariance(&f, &g, &h, &h, &Rat::from_integer(10.into())).unwrap();
    assert!(cert.report.ok(), "{}", cert.report);
    let cf = build_cf(&x).unwrap();
    let hom = homology_novikov(&cf.complex).unwrap();
    assert_eq!(hom.get(&0), Some(&0));
    assert_eq!(hom.get(&1), Some(&1));
}

#[test]
fn file_roundtrip_via_loader() {
    let x = chain_category();
    let text = "bimodule-cube\ndim 0\nsource X\ntarget X\nentry - a a - 0 1\nentry - b b - 0 1\n";
    let loader = move |_path: &str| -> Result<FlowCategory, BimodError> {
        Ok((*x).clone())
    };
    let cube = parse_bimodule_file(text, &loader).unwrap();
    assert_eq!(cube.dim, 0);
    let report = verify_chain_map_cube(&cube).unwrap();
    assert!(report.ok(), "{report}");
}
