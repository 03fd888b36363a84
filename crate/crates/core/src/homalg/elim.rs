//! Dense exact elimination: Gaussian elimination over the ground fields and
//! fraction-free valuation-pivot elimination over truncated Novikov rings.

use crate::coeff::{Cutoff, NovikovElement, Rat, Scalar};

/// Rank of a dense matrix over a field.
pub fn scalar_rank(mut mat: Vec<Vec<Scalar>>) -> usize {
    let nrows = mat.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = mat[0].len();
    let mut rank = 0;
    let mut row = 0;
    for col in 0..ncols {
        let pivot = (row..nrows).find(|&r| !mat[r][col].is_zero());
        let Some(p) = pivot else { continue };
        mat.swap(row, p);
        let inv = mat[row][col].inv().expect("nonzero pivot");
        for c in col..ncols {
            mat[row][c] = mat[row][c].mul(&inv);
        }
        for r in 0..nrows {
            if r != row && !mat[r][col].is_zero() {
                let factor = mat[r][col].clone();
                for c in col..ncols {
                    let sub = mat[row][c].mul(&factor);
                    mat[r][c] = mat[r][c].sub(&sub);
                }
            }
        }
        rank += 1;
        row += 1;
        if row == nrows {
            break;
        }
    }
    rank
}

/// Solves `A x = b` over a field, returning any solution, or `None` when the
/// system is inconsistent.
pub fn solve_linear(mut mat: Vec<Vec<Scalar>>, mut rhs: Vec<Scalar>) -> Option<Vec<Scalar>> {
    let nrows = mat.len();
    let ncols = if nrows == 0 { 0 } else { mat[0].len() };
    if nrows == 0 {
        return Some(vec![]);
    }
    let mut pivot_cols: Vec<(usize, usize)> = vec![];
    let mut row = 0;
    for col in 0..ncols {
        let pivot = (row..nrows).find(|&r| !mat[r][col].is_zero());
        let Some(p) = pivot else { continue };
        mat.swap(row, p);
        rhs.swap(row, p);
        let inv = mat[row][col].inv().expect("nonzero pivot");
        for c in col..ncols {
            mat[row][c] = mat[row][c].mul(&inv);
        }
        rhs[row] = rhs[row].mul(&inv);
        for r in 0..nrows {
            if r != row && !mat[r][col].is_zero() {
                let factor = mat[r][col].clone();
                for c in col..ncols {
                    let sub = mat[row][c].mul(&factor);
                    mat[r][c] = mat[r][c].sub(&sub);
                }
                let sub = rhs[row].mul(&factor);
                rhs[r] = rhs[r].sub(&sub);
            }
        }
        pivot_cols.push((row, col));
        row += 1;
        if row == nrows {
            break;
        }
    }
    // consistency: zero rows must have zero rhs
    for r in row..nrows {
        if !rhs[r].is_zero() {
            return None;
        }
    }
    let field = rhs
        .iter()
        .chain(mat.iter().flatten())
        .map(|s| s.field())
        .next()
        .unwrap_or(crate::coeff::BaseField::Rationals);
    let mut sol = vec![field.zero(); ncols];
    for (r, c) in pivot_cols {
        sol[c] = rhs[r].clone();
    }
    Some(sol)
}

/// Inverse of a square matrix over a field, or `None` when singular.
pub fn invert_matrix(mat: Vec<Vec<Scalar>>) -> Option<Vec<Vec<Scalar>>> {
    let n = mat.len();
    if n == 0 {
        return Some(vec![]);
    }
    let field = mat[0]
        .iter()
        .map(|s| s.field())
        .next()
        .unwrap_or(crate::coeff::BaseField::Rationals);
    let mut aug: Vec<Vec<Scalar>> = mat;
    for (i, row) in aug.iter_mut().enumerate() {
        for j in 0..n {
            row.push(if i == j { field.one() } else { field.zero() });
        }
    }
    let mut row = 0;
    for col in 0..n {
        let pivot = (row..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(row, pivot);
        let inv = aug[row][col].inv().expect("nonzero pivot");
        for c in 0..2 * n {
            aug[row][c] = aug[row][c].mul(&inv);
        }
        for r in 0..n {
            if r != row && !aug[r][col].is_zero() {
                let factor = aug[r][col].clone();
                for c in 0..2 * n {
                    let sub = aug[row][c].mul(&factor);
                    aug[r][c] = aug[r][c].sub(&sub);
                }
            }
        }
        row += 1;
    }
    if row < n {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrecisionIssue {
    /// A residual entry vanishes below a finite cutoff only; its action level
    /// is reported.
    UncertifiedZero(String),
}

/// Rank over the Novikov field by fraction-free elimination with
/// minimal-valuation pivoting.
///
/// Rows are rescaled by pivots instead of divided (rescaling by a certified
/// nonzero element does not change the rank), so supports stay finite and no
/// series inversion is needed. `None` entries are exact zeros. The rank is
/// certified only if every residual entry is exactly zero; entries that are
/// merely zero below a finite cutoff trigger a precision error.
pub fn novikov_rank(mut mat: Vec<Vec<Option<NovikovElement>>>) -> Result<usize, PrecisionIssue> {
    let nrows = mat.len();
    let ncols = if nrows == 0 { 0 } else { mat[0].len() };
    let mut rank = 0;
    let mut used_rows = vec![false; nrows];
    loop {
        // minimal-valuation pivot among entries with nonempty support
        let mut best: Option<(usize, usize, Rat)> = None;
        for (r, row) in mat.iter().enumerate() {
            if used_rows[r] {
                continue;
            }
            for (c, entry) in row.iter().enumerate() {
                if let Some(v) = entry {
                    if let Some((gamma, _)) = v.leading_term() {
                        let act = v.monoid().action(gamma).expect("validated exponents");
                        if best.as_ref().map(|(_, _, b)| act < *b).unwrap_or(true) {
                            best = Some((r, c, act));
                        }
                    }
                }
            }
        }
        let Some((pr, pc, _)) = best else { break };
        rank += 1;
        used_rows[pr] = true;
        let pivot = mat[pr][pc].clone().expect("pivot has support");
        let pivot_row: Vec<Option<NovikovElement>> = mat[pr].clone();
        for (r, row) in mat.iter_mut().enumerate() {
            if used_rows[r] {
                continue;
            }
            let Some(factor) = row[pc].clone() else { continue };
            // row := pivot * row - factor * pivot_row
            for c in 0..ncols {
                let scaled = row[c]
                    .as_ref()
                    .map(|v| v.mul(&pivot).expect("shared context"));
                let sub = pivot_row[c]
                    .as_ref()
                    .map(|v| v.mul(&factor).expect("shared context"));
                row[c] = match (scaled, sub) {
                    (None, None) => None,
                    (Some(a), None) => Some(a),
                    (None, Some(b)) => Some(b.neg()),
                    (Some(a), Some(b)) => Some(a.sub(&b).expect("shared context")),
                };
                // normalize representation of exact zeros
                if let Some(v) = &row[c] {
                    if v.is_exactly_zero() {
                        row[c] = None;
                    }
                }
            }
            row[pc] = None;
        }
    }
    // certification: leftover entries must be exact zeros
    let mut worst: Option<Rat> = None;
    for (r, row) in mat.iter().enumerate() {
        if used_rows[r] {
            continue;
        }
        for entry in row.iter().flatten() {
            if entry.is_zero_below_cutoff() {
                if let Cutoff::Finite(e) = entry.cutoff() {
                    worst = Some(match worst {
                        Some(w) => w.min(e.clone()),
                        None => e.clone(),
                    });
                }
            }
        }
    }
    if let Some(level) = worst {
        return Err(PrecisionIssue::UncertifiedZero(crate::coeff::fmt_rat(&level)));
    }
    Ok(rank)
}
