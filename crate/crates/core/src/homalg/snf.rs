//! Smith normal form over the integers, with the divisibility chain needed
//! to read off torsion coefficients.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

/// Diagonal of the Smith normal form of an integer matrix, with
/// `d_i | d_{i+1}`. Zeros are trailing.
pub fn smith_normal_form(mut mat: Vec<Vec<BigInt>>) -> Vec<BigInt> {
    let nrows = mat.len();
    let ncols = if nrows == 0 { 0 } else { mat[0].len() };
    let bound = nrows.min(ncols);
    let mut diag: Vec<BigInt> = Vec::with_capacity(bound);
    let mut t = 0;
    while t < bound {
        // locate a minimal-magnitude nonzero entry in the remaining block
        let mut pivot: Option<(usize, usize)> = None;
        for r in t..nrows {
            for c in t..ncols {
                if !mat[r][c].is_zero() {
                    match &pivot {
                        Some((pr, pc)) if mat[*pr][*pc].abs() <= mat[r][c].abs() => {}
                        _ => pivot = Some((r, c)),
                    }
                }
            }
        }
        let Some((pr, pc)) = pivot else { break };
        mat.swap(t, pr);
        for row in mat.iter_mut() {
            row.swap(t, pc);
        }
        loop {
            // reduce the pivot column
            let mut done = true;
            for r in t + 1..nrows {
                if !mat[r][t].is_zero() {
                    let q = mat[r][t].div_floor(&mat[t][t]);
                    if !q.is_zero() {
                        for c in t..ncols {
                            let sub = &q * &mat[t][c];
                            mat[r][c] -= sub;
                        }
                    }
                    if !mat[r][t].is_zero() {
                        mat.swap(t, r);
                        done = false;
                    }
                }
            }
            // reduce the pivot row
            for c in t + 1..ncols {
                if !mat[t][c].is_zero() {
                    let q = mat[t][c].div_floor(&mat[t][t]);
                    if !q.is_zero() {
                        for row in mat.iter_mut().skip(t) {
                            let sub = &q * &row[t];
                            row[c] -= sub;
                        }
                    }
                    if !mat[t][c].is_zero() {
                        for row in mat.iter_mut() {
                            row.swap(t, c);
                        }
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        // enforce divisibility of the rest of the block by the pivot
        let mut fixed = false;
        'scan: for r in t + 1..nrows {
            for c in t + 1..ncols {
                if !(&mat[r][c] % &mat[t][t]).is_zero() {
                    // absorb row r into the pivot row and redo this step
                    for cc in t..ncols {
                        let add = mat[r][cc].clone();
                        mat[t][cc] += add;
                    }
                    fixed = true;
                    break 'scan;
                }
            }
        }
        if fixed {
            continue;
        }
        diag.push(mat[t][t].abs());
        t += 1;
    }
    while diag.len() < bound {
        diag.push(BigInt::zero());
    }
    diag
}

/// Rank of an integer matrix (number of nonzero Smith diagonal entries).
pub fn integral_matrix_rank(mat: Vec<Vec<BigInt>>) -> usize {
    smith_normal_form(mat).iter().filter(|d| !d.is_zero()).count()
}
