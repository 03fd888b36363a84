//! Stock simplicial fixtures with known topology, validated by the homology
//! oracle in the test suite.

use super::SimplicialComplex;

fn build(facets: Vec<Vec<String>>) -> SimplicialComplex {
    SimplicialComplex::from_facets(facets)
        .expect("valid facet list")
        .0
}

fn v(n: usize) -> String {
    format!("v{n}")
}

/// Boundary of an n-gon.
pub fn circle(n: usize) -> SimplicialComplex {
    assert!(n >= 3);
    build(
        (0..n)
            .map(|i| vec![v(i), v((i + 1) % n)])
            .collect(),
    )
}

/// The full n-simplex.
pub fn simplex(n: usize) -> SimplicialComplex {
    build(vec![(0..=n).map(v).collect()])
}

/// Boundary of the octahedron: the minimal S^2 with a perfect Morse
/// structure.
pub fn sphere_octahedron() -> SimplicialComplex {
    // vertices: x0/x1, y0/y1, z0/z1; faces all sign choices
    let names = ["x0", "x1", "y0", "y1", "z0", "z1"];
    let mut facets = vec![];
    for xi in 0..2 {
        for yi in 0..2 {
            for zi in 0..2 {
                facets.push(vec![
                    names[xi].to_string(),
                    names[2 + yi].to_string(),
                    names[4 + zi].to_string(),
                ]);
            }
        }
    }
    build(facets)
}

/// The 7-vertex 2-neighbourly torus: faces {i, i+1, i+3} and {i, i+2, i+3}
/// modulo 7.
pub fn torus() -> SimplicialComplex {
    let mut facets = vec![];
    for i in 0..7u32 {
        facets.push(vec![
            v(i as usize),
            v(((i + 1) % 7) as usize),
            v(((i + 3) % 7) as usize),
        ]);
        facets.push(vec![
            v(i as usize),
            v(((i + 2) % 7) as usize),
            v(((i + 3) % 7) as usize),
        ]);
    }
    build(facets)
}

/// The minimal 6-vertex projective plane (icosahedron quotient).
pub fn projective_plane() -> SimplicialComplex {
    let f: [[usize; 3]; 10] = [
        [1, 2, 4],
        [1, 2, 5],
        [1, 3, 4],
        [1, 3, 6],
        [1, 5, 6],
        [2, 3, 5],
        [2, 3, 6],
        [2, 4, 6],
        [3, 4, 5],
        [4, 5, 6],
    ];
    build(
        f.iter()
            .map(|t| t.iter().map(|&i| v(i)).collect())
            .collect(),
    )
}

/// Klein bottle from a 5x5 grid with an orientation-reversing gluing.
pub fn klein_bottle() -> SimplicialComplex {
    let rows = 5usize;
    let cols = 5usize;
    // vertex (i, j) for i in 0..rows; row `rows` glues to row 0 with
    // reversed columns
    let name = |i: usize, j: usize| -> String {
        let jj = j % cols;
        if i == rows {
            format!("k{}_{}", 0, (cols - jj) % cols)
        } else {
            format!("k{}_{}", i, jj)
        }
    };
    let mut facets = vec![];
    for i in 0..rows {
        for j in 0..cols {
            facets.push(vec![name(i, j), name(i + 1, j), name(i, j + 1)]);
            facets.push(vec![name(i + 1, j), name(i + 1, j + 1), name(i, j + 1)]);
        }
    }
    build(facets)
}

/// All named fixture surfaces with their labels.
pub fn surface_suite() -> Vec<(&'static str, SimplicialComplex)> {
    vec![
        ("circle", circle(6)),
        ("sphere", sphere_octahedron()),
        ("torus", torus()),
        ("projective-plane", projective_plane()),
        ("klein-bottle", klein_bottle()),
    ]
}
