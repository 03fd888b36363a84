use super::fixtures::*;
use super::*;
use crate::bimod::verify_chain_map_cube;
use crate::floer::{build_cf, cf_homology, check_d_squared};
use crate::flowcat::validate_flow_category;

fn groups(h: &HomologySummary) -> Vec<(usize, Vec<i64>)> {
    h.groups
        .iter()
        .map(|(r, t)| {
            (
                *r,
                t.iter().map(|x| i64::try_from(x.clone()).unwrap()).collect(),
            )
        })
        .collect()
}

#[test]
fn triangle_boundary_loads() {
    let (k, warnings) = load_complex("a b\nb c\nc a\n").unwrap();
    assert!(warnings.is_empty());
    assert_eq!(k.f_vector(), vec![3, 3]);
    let (k2, warnings) = load_complex("a b\nb c\nc a\na b\n").unwrap();
    assert_eq!(warnings.len(), 1);
    assert_eq!(k2.f_vector(), vec![3, 3]);
    assert!(load_complex("a a b\n").is_err());
}

#[test]
fn torus_f_vector_and_euler() {
    let t = torus();
    assert_eq!(t.f_vector(), vec![7, 21, 14]);
    assert_eq!(t.euler_characteristic(), 0);
}

#[test]
fn oracle_homology_of_fixture_surfaces() {
    let s1 = simplicial_homology(&circle(5), HomologyRing::Integers);
    assert_eq!(groups(&s1), vec![(1, vec![]), (1, vec![])]);

    let s2 = simplicial_homology(&sphere_octahedron(), HomologyRing::Integers);
    assert_eq!(groups(&s2), vec![(1, vec![]), (0, vec![]), (1, vec![])]);

    let t2 = simplicial_homology(&torus(), HomologyRing::Integers);
    assert_eq!(groups(&t2), vec![(1, vec![]), (2, vec![]), (1, vec![])]);

    let rp2 = simplicial_homology(&projective_plane(), HomologyRing::Integers);
    assert_eq!(groups(&rp2), vec![(1, vec![]), (0, vec![2]), (0, vec![])]);

    let kb = simplicial_homology(&klein_bottle(), HomologyRing::Integers);
    assert_eq!(groups(&kb), vec![(1, vec![]), (1, vec![2]), (0, vec![])]);

    // field coefficients
    let kb2 = simplicial_homology(&klein_bottle(), HomologyRing::Field(BaseField::Prime(2)));
    assert_eq!(groups(&kb2), vec![(1, vec![]), (2, vec![]), (1, vec![])]);
    let kbq = simplicial_homology(&klein_bottle(), HomologyRing::Field(BaseField::Rationals));
    assert_eq!(groups(&kbq), vec![(1, vec![]), (1, vec![]), (0, vec![])]);
}

#[test]
fn random_matchings_are_acyclic_with_morse_bounds() {
    // simplex: some seed collapses to a single critical vertex
    let s = simplex(2);
    let perfect = (0..20).map(|seed| find_matching(&s, seed)).find(|m| {
        m.critical_cells(&s).len() == 1
    });
    assert!(perfect.is_some());

    // circle: always exactly two critical cells from a collapse
    let c = circle(6);
    for seed in 0..10 {
        let m = find_matching(&c, seed);
        assert!(m.certify_acyclic(&c).is_ok());
        assert_eq!(m.critical_cells(&c).len(), 2);
    }

    // torus: at least four critical cells by the Morse inequalities
    let t = torus();
    for seed in 0..5 {
        let m = find_matching(&t, seed);
        assert!(m.critical_cells(&t).len() >= 4);
    }
}

#[test]
fn matching_file_roundtrip() {
    let c = circle(4);
    let m = find_matching(&c, 7);
    let text = m.to_text(&c);
    let back = parse_matching(&text, &c).unwrap();
    assert_eq!(m.critical_cells(&c), back.critical_cells(&c));
    assert!(parse_matching("match v0 v1,v2", &c).is_err());
}

#[test]
fn flow_operator_identities() {
    for (name, k) in surface_suite() {
        let m = find_matching(&k, 3);
        let ops = flow_operators(&k, &m);
        let top = k.dim();
        // psi . phi = identity on the Morse complex
        for dim in 0..=top {
            let prod = ops.psi[dim].mul(&ops.phi[dim]);
            assert_eq!(
                prod,
                IMat::identity(ops.critical[dim].len()),
                "{name} psi.phi dim {dim}"
            );
        }
        // boundary . phi = phi . morse_boundary
        let morse_d: Vec<IMat> = (1..=top)
            .map(|dim| ops.psi[dim - 1].mul(&boundary_imat(&k, dim).mul(&ops.phi[dim])))
            .collect();
        for dim in 1..=top {
            let d = boundary_imat(&k, dim);
            let lhs = d.mul(&ops.phi[dim]);
            let rhs = ops.phi[dim - 1].mul(&morse_d[dim - 1]);
            assert_eq!(lhs, rhs, "{name} boundary/phi dim {dim}");
            // psi . boundary = morse_boundary . psi
            let lhs = ops.psi[dim - 1].mul(&d);
            let rhs = morse_d[dim - 1].mul(&ops.psi[dim]);
            assert_eq!(lhs, rhs, "{name} psi/boundary dim {dim}");
        }
        // id - phi.psi = d theta + theta d
        for dim in 0..=top {
            let n = k.cells[dim].len();
            let mut rhs = boundary_imat(&k, dim + 1).mul(&ops.theta[dim]);
            if dim > 0 {
                rhs = rhs.add(&ops.theta[dim - 1].mul(&boundary_imat(&k, dim)));
            }
            let lhs = IMat::identity(n).sub(&ops.phi[dim].mul(&ops.psi[dim]));
            assert_eq!(lhs, rhs, "{name} homotopy identity dim {dim}");
        }
    }
}

#[test]
fn path_counts_agree_with_the_flow_route() {
    for (name, k) in surface_suite() {
        for seed in [1u64, 5] {
            let m = find_matching(&k, seed);
            let crit = m.critical_cells(&k);
            let morse_d = morse_boundary_via_flow(&k, &m);
            let per_dim: Vec<Vec<CellId>> = (0..=k.dim())
                .map(|d| crit.iter().copied().filter(|c| c.0 == d).collect())
                .collect();
            for dim in 1..=k.dim() {
                for (col, &upper) in per_dim[dim].iter().enumerate() {
                    for (row, &lower) in per_dim[dim - 1].iter().enumerate() {
                        let by_paths = gradient_path_count(&k, &m, upper, lower);
                        let by_flow = morse_d[dim - 1][row][col].clone();
                        assert_eq!(by_paths, by_flow, "{name} seed {seed} {upper:?} -> {lower:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn octahedron_with_perfect_matching_has_zero_differential() {
    let s = sphere_octahedron();
    let m = (0..60)
        .map(|seed| find_matching(&s, seed))
        .find(|m| m.critical_cells(&s).len() == 2)
        .expect("perfect matching on the sphere");
    let cat = flow_category_from_morse(&s, &m, BaseField::Rationals, ActionMode::Trivial).unwrap();
    assert!(validate_flow_category(&cat).ok());
    let cf = build_cf(&cat).unwrap();
    assert!(cf.complex.diff.iter().all(|(_, v)| v.is_zero_below_cutoff()));
    let h = cf_homology(&cf).unwrap();
    assert_eq!(h.get(&0), Some(&1));
    assert_eq!(h.get(&2), Some(&1));
    assert_eq!(h.get(&1).copied().unwrap_or(0), 0);
}

#[test]
fn circle_differential_vanishes_over_q() {
    let c = circle(5);
    let m = find_matching(&c, 11);
    let cat = flow_category_from_morse(&c, &m, BaseField::Rationals, ActionMode::Trivial).unwrap();
    let cf = build_cf(&cat).unwrap();
    // two gradient paths with opposite signs cancel
    assert!(cf.complex.diff.iter().all(|(_, v)| v.is_zero_below_cutoff()));
    let h = cf_homology(&cf).unwrap();
    assert_eq!(h.get(&0), Some(&1));
    assert_eq!(h.get(&1), Some(&1));
}

#[test]
fn projective_plane_depends_on_the_field() {
    let rp2 = projective_plane();
    let m = find_matching(&rp2, 2);
    for (field, want) in [
        (BaseField::Prime(2), vec![1usize, 1, 1]),
        (BaseField::Rationals, vec![1, 0, 0]),
    ] {
        let cat = flow_category_from_morse(&rp2, &m, field, ActionMode::Trivial).unwrap();
        let cf = build_cf(&cat).unwrap();
        assert!(check_d_squared(&cf).ok());
        let h = cf_homology(&cf).unwrap();
        for (deg, w) in want.iter().enumerate() {
            assert_eq!(h.get(&(deg as i64)).copied().unwrap_or(0), *w, "{field} degree {deg}");
        }
    }
}

#[test]
fn emitted_categories_pass_d_squared_exactly() {
    for (name, k) in surface_suite() {
        for seed in [0u64, 9] {
            let m = find_matching(&k, seed);
            for mode in [ActionMode::Trivial, ActionMode::DimensionGap] {
                let cat =
                    flow_category_from_morse(&k, &m, BaseField::Rationals, mode).unwrap();
                let report = validate_flow_category(&cat);
                assert!(report.ok(), "{name} seed {seed}: {report}");
                let cf = build_cf(&cat).unwrap();
                let d2 = check_d_squared(&cf);
                assert!(d2.ok(), "{name} seed {seed}: {d2}");
            }
        }
    }
}

#[test]
fn floer_homology_matches_the_oracle() {
    for (name, k) in surface_suite() {
        let m = find_matching(&k, 4);
        for field in [BaseField::Rationals, BaseField::Prime(2)] {
            let cat = flow_category_from_morse(&k, &m, field, ActionMode::Trivial).unwrap();
            let cf = build_cf(&cat).unwrap();
            let got = cf_homology(&cf).unwrap();
            let want = simplicial_homology(&k, HomologyRing::Field(field));
            for (dim, (rank, _)) in want.groups.iter().enumerate() {
                assert_eq!(
                    got.get(&(dim as i64)).copied().unwrap_or(0),
                    *rank,
                    "{name} over {field} in dimension {dim}"
                );
            }
        }
        // torsion-level comparison through the integral Morse complex
        let morse_h = morse_homology_integral(&k, &m);
        let simp_h = simplicial_homology(&k, HomologyRing::Integers);
        assert_eq!(groups(&morse_h), groups(&simp_h), "{name} integral");
    }
}

#[test]
fn identical_matchings_give_the_identity_continuation() {
    let c = circle(5);
    let m = find_matching(&c, 3);
    let data =
        continuation_from_matchings(&c, &m, &m, BaseField::Rationals, ActionMode::Trivial)
            .unwrap();
    let map = crate::bimod::bimodule_map(&data.forward).unwrap();
    for ((i, j), v) in map.map.mat.iter() {
        assert_eq!(i, j);
        assert!(v.coeff(&[]).is_one());
    }
    assert!(verify_chain_map_cube(&data.forward).unwrap().ok());
}

#[test]
fn continuation_chain_maps_and_invariance_certify() {
    for (name, k) in [("circle", circle(6)), ("sphere", sphere_octahedron())] {
        let m1 = find_matching(&k, 1);
        let m2 = find_matching(&k, 2);
        let data =
            continuation_from_matchings(&k, &m1, &m2, BaseField::Rationals, ActionMode::Trivial)
                .unwrap();
        for (cube, which) in [
            (&data.forward, "forward"),
            (&data.backward, "backward"),
            (&data.homotopy_source, "homotopy src"),
            (&data.homotopy_target, "homotopy tgt"),
        ] {
            let report = verify_chain_map_cube(cube).unwrap();
            assert!(report.ok(), "{name} {which}: {report}");
        }
        let cert = crate::bimod::certify_invariance(
            &data.forward,
            &data.backward,
            &data.homotopy_source,
            &data.homotopy_target,
            &crate::coeff::Rat::from_integer(10.into()),
        )
        .unwrap();
        assert!(cert.report.ok(), "{name}: {}", cert.report);
        // certified equivalences imply equal Betti numbers
        let h1 = cf_homology(&build_cf(&data.source).unwrap()).unwrap();
        let h2 = cf_homology(&build_cf(&data.target).unwrap()).unwrap();
        assert_eq!(h1, h2, "{name}");
    }
}

#[test]
fn klein_bottle_invariance_over_f2() {
    let k = klein_bottle();
    let m1 = find_matching(&k, 1);
    let m2 = find_matching(&k, 2);
    let data =
        continuation_from_matchings(&k, &m1, &m2, BaseField::Prime(2), ActionMode::Trivial)
            .unwrap();
    let cert = crate::bimod::certify_invariance(
        &data.forward,
        &data.backward,
        &data.homotopy_source,
        &data.homotopy_target,
        &crate::coeff::Rat::from_integer(10.into()),
    )
    .unwrap();
    assert!(cert.report.ok(), "{}", cert.report);
    let h = cf_homology(&build_cf(&data.source).unwrap()).unwrap();
    assert_eq!(h.get(&0), Some(&1));
    assert_eq!(h.get(&1), Some(&2));
    assert_eq!(h.get(&2), Some(&1));
}

#[test]
fn graded_continuation_with_dimension_gap_labels() {
    let c = circle(5);
    let m1 = find_matching(&c, 1);
    let m2 = find_matching(&c, 8);
    let data = continuation_from_matchings(
        &c,
        &m1,
        &m2,
        BaseField::Rationals,
        ActionMode::DimensionGap,
    )
    .unwrap();
    for cube in [
        &data.forward,
        &data.backward,
        &data.homotopy_source,
        &data.homotopy_target,
    ] {
        let report = verify_chain_map_cube(cube).unwrap();
        assert!(report.ok(), "{report}");
    }
    // homotopy entries carry negative action, so the cubes are not monotone
    assert!(data.forward.is_monotone());
    let cert = crate::bimod::certify_invariance(
        &data.forward,
        &data.backward,
        &data.homotopy_source,
        &data.homotopy_target,
        &crate::coeff::Rat::from_integer(10.into()),
    )
    .unwrap();
    assert!(cert.report.ok(), "{}", cert.report);
}

#[test]
fn torus_cup_product_matches_the_simplicial_oracle() {
    let t = torus();
    assert_eq!(simplicial_cup_rank(&t, 1, 1), 1);
    let m = find_matching(&t, 6);
    let cube = cup_multimodule(&t, &m).unwrap();
    let report = crate::trees::verify_multimodule(&cube).unwrap();
    assert!(report.ok(), "{report}");
    assert_eq!(multimodule_cup_rank(&cube, 1, 1).unwrap(), 1);

    // the sphere has no degree-(1,1) products
    let s = sphere_octahedron();
    assert_eq!(simplicial_cup_rank(&s, 1, 1), 0);
    let ms = find_matching(&s, 1);
    let cs = cup_multimodule(&s, &ms).unwrap();
    assert_eq!(multimodule_cup_rank(&cs, 1, 1).unwrap(), 0);
}

#[test]
fn broken_strata_match_an_independent_path_enumerator() {
    // independent cross-check: enumerate broken sequences directly from the
    // table by exhaustive product scan, independent of the DFS in flowcat
    let t = torus();
    let m = find_matching(&t, 4);
    let cat = flow_category_from_morse(&t, &m, BaseField::Rationals, ActionMode::Trivial).unwrap();
    // morphism table: sequences p = o_0 -> o_1 -> ... -> o_k = q with every
    // step recorded, built by repeated table joins
    let n = cat.objects.len();
    let step: Vec<Vec<bool>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| cat.descriptor(a, b, &vec![]).is_some())
                .collect()
        })
        .collect();
    let count_sequences = |p: usize, q: usize| -> usize {
        // routes of every length, counted by dynamic programming over
        // lengths (bounded by the object count)
        let mut total = 0usize;
        let mut at_len: Vec<Vec<usize>> = vec![vec![0; n]; 1];
        at_len[0][p] = 1;
        for _len in 1..=n {
            let prev = at_len.last().unwrap().clone();
            let mut next = vec![0usize; n];
            for a in 0..n {
                if prev[a] == 0 {
                    continue;
                }
                for b in 0..n {
                    if step[a][b] {
                        next[b] += prev[a];
                    }
                }
            }
            total += next[q];
            at_len.push(next);
        }
        total
    };
    for ((p, q, l), _) in cat.morphisms.iter() {
        let bs = cat.broken_strata(*p, *q, l).unwrap();
        assert_eq!(
            bs.strata.len(),
            count_sequences(*p, *q),
            "strata count mismatch at ({p}, {q})"
        );
        assert!(crate::stratmodel::validate_model(&bs.poset).ok());
        // factorized lifts are compatible with merging: grouping the finer
        // stratum's factors along the coarser one recovers its factorization
        for (i, coarse) in bs.strata.iter().enumerate() {
            for (j, fine) in bs.strata.iter().enumerate() {
                if i == j || !bs.poset.le(i, j) {
                    continue;
                }
                let ff = cat.canonical_factorized_lift(fine).unwrap();
                let cf = cat.canonical_factorized_lift(coarse).unwrap();
                let groups = ff
                    .group_to(coarse, &cat.monoid)
                    .expect("finer stratum groups along the coarser one");
                assert_eq!(groups.len(), cf.factors.len());
                let flattened: Vec<_> = groups.into_iter().flatten().collect();
                assert_eq!(flattened, ff.factors);
            }
        }
    }
}

#[test]
fn morse_flavoured_unipotent_endomorphism_certifies_to_five() {
    // build f = id + T (u - id) from the continuation composite u on the
    // graded Floer complex, then invert by energy induction to E = 5
    let t = torus();
    let m1 = find_matching(&t, 1);
    let m2 = find_matching(&t, 2);
    let data =
        continuation_from_matchings(&t, &m1, &m2, BaseField::Rationals, ActionMode::DimensionGap)
            .unwrap();
    let gf = crate::bimod::compose_bimodules(&data.forward, &data.backward).unwrap();
    let u = crate::bimod::bimodule_map(&gf).unwrap();
    let cf = build_cf(&data.source).unwrap();
    let one = crate::coeff::NovikovElement::one(cf.monoid.clone(), cf.field);
    let t_mon = crate::coeff::NovikovElement::monomial(cf.monoid.clone(), vec![1], cf.field.one())
        .unwrap();
    let id = crate::homalg::ChainMap::identity(&cf.complex, &one);
    // f = id + T*(u - id): a chain map congruent to the identity modulo
    // positive action
    let correction = u.map.mat.add_mat(&id.mat.neg_mat());
    let f = crate::homalg::ChainMap {
        degree: 0,
        mat: id.mat.add_mat(&correction.scale(&t_mon)),
    };
    let eq = crate::homalg::certify_homotopy_equivalence(
        &f,
        &cf.complex,
        &cf.complex,
        &crate::coeff::Rat::from_integer(5.into()),
    )
    .unwrap();
    assert!(eq.report.ok(), "{}", eq.report);
}

#[test]
fn broken_moduli_counts_satisfy_the_boundary_relation() {
    // a one-dimensional descriptor's broken strata form an interval-type
    // model; the count table assigns each broken stratum the product of its
    // two path counts (signs pre-absorbed), and the signed boundary sum is
    // exactly the corresponding m^2 entry, which vanishes
    let t = torus();
    let m = find_matching(&t, 4);
    let cat = flow_category_from_morse(&t, &m, BaseField::Rationals, ActionMode::Trivial).unwrap();
    let mut exercised = 0;
    for ((p, q, l), desc) in cat.morphisms.iter() {
        if desc.vdim != 1 {
            continue;
        }
        let bs = cat.broken_strata(*p, *q, l).unwrap();
        if bs.strata.iter().all(|s| s.breaks() == 0) {
            continue;
        }
        // dimension-1 stratified object: codim-0 the unbroken stratum,
        // codim-1 the broken ones; all cover signs +1 (no diamonds)
        let mut signs = std::collections::BTreeMap::new();
        for (a, b) in bs.poset.covers() {
            signs.insert((a, b), 1i8);
        }
        let data = crate::stratcx::StratumData::new(bs.poset.clone(), 1, signs).unwrap();
        let mut entries = std::collections::BTreeMap::new();
        for (i, s) in bs.strata.iter().enumerate() {
            if s.breaks() != 1 {
                continue;
            }
            let factors = cat.canonical_factorized_lift(s).unwrap();
            let mut product = BaseField::Rationals.one();
            for (a, b, lab) in &factors.factors {
                let c = cat
                    .descriptor(*a, *b, lab)
                    .and_then(|d| d.count.clone())
                    .expect("vdim-0 factor has a count");
                product = product.mul(&c);
            }
            entries.insert(bs.poset.label(i).to_string(), product);
        }
        let table = crate::stratcx::CountTable::new(entries);
        let (_, report) = crate::stratcx::eval_counts(&data, &table).unwrap();
        assert!(report.ok(), "boundary sum at ({p}, {q}): {report}");
        exercised += 1;
    }
    assert!(exercised > 0, "the fixture has broken one-dimensional moduli");
}
