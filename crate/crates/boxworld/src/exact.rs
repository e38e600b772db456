//! Exact linear algebra: kernel bases and LP feasibility with certificates.
//!
//! Two entry points back everything else in the crate:
//!
//! * [`kernel_basis`] — exact null-space basis of a rational matrix, via
//!   fraction-free (Bareiss) elimination over the integers obtained by
//!   clearing denominators row by row. Pivots are only normalised at
//!   extraction time.
//! * [`feasible`] — exact feasibility of `A q = b, q ≥ 0` (optionally with a
//!   convexity row `Σ q = 1` appended by the caller), decided by phase-1
//!   simplex with Bland's rule, so termination is guaranteed. Infeasible
//!   systems come back with a Farkas witness `y` satisfying `yᵀA ≤ 0` and
//!   `yᵀb > 0`.
//!
//! Both solutions and witnesses are re-verified by plain rational dot
//! products before being returned.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Equality system `A q = b`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    columns: usize,
}

impl LinearSystem {
    pub fn new(rows: Vec<Vec<Rational>>, rhs: Vec<Rational>) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::Shape(format!(
                "{} constraint rows but {} right-hand sides",
                rows.len(),
                rhs.len()
            )));
        }
        let columns = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != columns) {
            return Err(Error::Shape("ragged constraint matrix".into()));
        }
        Ok(Self { rows, rhs, columns })
    }

    /// Appends the convexity row `Σ_j q_j = total`.
    pub fn with_sum_row(mut self, total: Rational) -> Self {
        self.rows.push(vec![Rational::one(); self.columns]);
        self.rhs.push(total);
        self
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn rhs(&self) -> &[Rational] {
        &self.rhs
    }

    pub fn columns(&self) -> usize {
        self.columns
    }
}

/// Outcome of [`feasible`]: an exact nonnegative solution, or an exact dual
/// witness of infeasibility.
#[derive(Clone, Debug)]
pub enum FeasibilityResult {
    Feasible {
        solution: Vec<Rational>,
        iterations: usize,
    },
    Infeasible {
        /// Row multipliers `y` with `yᵀA ≤ 0` componentwise and `yᵀb > 0`.
        certificate: Vec<Rational>,
        iterations: usize,
    },
}

// ---------------------------------------------------------------------------
// Fraction-free elimination
// ---------------------------------------------------------------------------

/// Clears denominators and divides out the content, giving a primitive
/// integer vector pointing the same way.
fn primitive_integer_row(row: &[Rational]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for v in row {
        if !v.is_zero() {
            lcm = lcm.lcm(v.denom());
        }
    }
    let ints: Vec<BigInt> = row.iter().map(|v| v.numer() * (&lcm / v.denom())).collect();
    let mut gcd = BigInt::zero();
    for v in &ints {
        gcd = gcd.gcd(v);
    }
    if gcd.is_zero() || gcd.is_one() {
        ints
    } else {
        ints.iter().map(|v| v / &gcd).collect()
    }
}

/// Row echelon form by Bareiss one-step fraction-free elimination.
/// Returns the integer echelon matrix together with its pivot columns.
fn fraction_free_echelon(rows: &[Vec<Rational>]) -> (Vec<Vec<BigInt>>, Vec<usize>) {
    let mut m: Vec<Vec<BigInt>> = rows.iter().map(|r| primitive_integer_row(r)).collect();
    let cols = rows.first().map_or(0, Vec::len);
    let mut pivot_cols = Vec::new();
    let mut prev_pivot = BigInt::one();
    let mut rank = 0;

    for col in 0..cols {
        let Some(pivot_row) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot_row);
        let pivot = m[rank][col].clone();
        // One-step Bareiss update; rows with a zero in the pivot column are
        // still rescaled by pivot/prev_pivot, which keeps divisions exact.
        for r in rank + 1..m.len() {
            let factor = m[r][col].clone();
            for c in 0..cols {
                let val = &m[r][c] * &pivot - &factor * &m[rank][c];
                // Bareiss: division by the previous pivot is exact.
                m[r][c] = val / &prev_pivot;
            }
        }
        prev_pivot = pivot;
        pivot_cols.push(col);
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    m.truncate(rank);
    (m, pivot_cols)
}

/// Rank of a rational matrix.
pub fn rank(rows: &[Vec<Rational>]) -> usize {
    fraction_free_echelon(rows).1.len()
}

/// Exact basis of `{ v : M v = 0 }`, one primitive integer vector per free
/// column, in free-column order. The empty product of constraints (no rows)
/// yields the standard basis.
pub fn kernel_basis(rows: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 {
        return Vec::new();
    }
    let (echelon, pivot_cols) = fraction_free_echelon(rows);
    let is_pivot: Vec<bool> = {
        let mut flags = vec![false; cols];
        for &c in &pivot_cols {
            flags[c] = true;
        }
        flags
    };

    let mut basis = Vec::new();
    for free in (0..cols).filter(|c| !is_pivot[*c]) {
        // Solve for pivot variables with v[free] = 1, other free vars 0.
        let mut v = vec![Rational::zero(); cols];
        v[free] = Rational::one();
        for (row_idx, &pcol) in pivot_cols.iter().enumerate().rev() {
            let row = &echelon[row_idx];
            let mut acc = Rational::zero();
            for c in pcol + 1..cols {
                if !row[c].is_zero() && !v[c].is_zero() {
                    acc += Rational::from_integer(row[c].clone()) * &v[c];
                }
            }
            v[pcol] = -acc / Rational::from_integer(row[pcol].clone());
        }
        basis.push(normalize_primitive(v));
    }

    // Mandatory verification: every basis vector really lies in the kernel.
    for v in &basis {
        for row in rows {
            let mut acc = Rational::zero();
            for (rv, vv) in row.iter().zip(v) {
                acc += rv * vv;
            }
            assert!(acc.is_zero(), "kernel basis vector fails M v = 0");
        }
    }
    basis
}

/// Scales a rational vector to a primitive integer vector whose first
/// nonzero component is positive.
fn normalize_primitive(v: Vec<Rational>) -> Vec<Rational> {
    let mut lcm = BigInt::one();
    for x in &v {
        if !x.is_zero() {
            lcm = lcm.lcm(x.denom());
        }
    }
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    let mut gcd = BigInt::zero();
    for x in &ints {
        gcd = gcd.gcd(x);
    }
    if gcd.is_zero() {
        return v;
    }
    let sign = ints
        .iter()
        .find(|x| !x.is_zero())
        .map(|x| if x.is_negative() { -1 } else { 1 })
        .unwrap_or(1);
    let gcd = gcd * BigInt::from(sign);
    ints.into_iter()
        .map(|x| Rational::from_integer(x / &gcd))
        .collect()
}

/// Selects a maximal linearly independent subset of the system's rows,
/// preserving their order. For consistent systems the result is equivalent.
pub fn independent_rows(system: &LinearSystem) -> LinearSystem {
    let mut kept_rows: Vec<Vec<Rational>> = Vec::new();
    let mut kept_rhs: Vec<Rational> = Vec::new();
    let mut current_rank = 0;
    for (row, b) in system.rows.iter().zip(&system.rhs) {
        kept_rows.push(row.clone());
        let r = rank(&kept_rows);
        if r > current_rank {
            current_rank = r;
            kept_rhs.push(b.clone());
        } else {
            kept_rows.pop();
        }
    }
    let columns = system.columns;
    LinearSystem {
        rows: kept_rows,
        rhs: kept_rhs,
        columns,
    }
}

/// Solves the square system `M x = b` exactly; `None` when `M` is singular.
pub fn solve_square(matrix: &[Vec<Rational>], rhs: &[Rational]) -> Option<Vec<Rational>> {
    let n = matrix.len();
    debug_assert!(matrix.iter().all(|r| r.len() == n) && rhs.len() == n);
    let mut aug: Vec<Vec<Rational>> = matrix
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();

    for col in 0..n {
        let pivot_row = (col..n).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, pivot_row);
        let pivot = aug[col][col].clone();
        for v in aug[col].iter_mut() {
            *v /= &pivot;
        }
        for r in 0..n {
            if r != col && !aug[r][col].is_zero() {
                let factor = aug[r][col].clone();
                for c in col..=n {
                    let delta = &factor * &aug[col][c];
                    aug[r][c] -= delta;
                }
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n].clone()).collect())
}

// ---------------------------------------------------------------------------
// Phase-1 simplex
// ---------------------------------------------------------------------------

/// Decides `∃ q ≥ 0 : A q = b` exactly. Append a convexity row via
/// [`LinearSystem::with_sum_row`] for `Σ q = 1` problems.
pub fn feasible(system: &LinearSystem) -> FeasibilityResult {
    let m = system.rows.len();
    let n = system.columns;

    // Orient every row so the right-hand side is nonnegative; remember the
    // flips to map dual multipliers back to the original rows.
    let mut sign = vec![1i32; m];
    let mut tableau: Vec<Vec<Rational>> = Vec::with_capacity(m);
    for i in 0..m {
        let flip = system.rhs[i].is_negative();
        if flip {
            sign[i] = -1;
        }
        let mut row: Vec<Rational> = Vec::with_capacity(n + m + 1);
        for j in 0..n {
            let v = &system.rows[i][j];
            row.push(if flip { -v } else { v.clone() });
        }
        for k in 0..m {
            row.push(if k == i {
                Rational::one()
            } else {
                Rational::zero()
            });
        }
        row.push(if flip {
            -&system.rhs[i]
        } else {
            system.rhs[i].clone()
        });
        tableau.push(row);
    }

    // Minimise the sum of artificials, starting from the all-artificial basis.
    // reduced[j] = c_j - z_j; for the starting basis z_j = Σ_i T[i][j].
    let total_cols = n + m;
    let rhs_col = total_cols;
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut reduced: Vec<Rational> = (0..total_cols)
        .map(|j| {
            let cost = if j >= n {
                Rational::one()
            } else {
                Rational::zero()
            };
            let z: Rational = tableau.iter().map(|row| row[j].clone()).sum();
            cost - z
        })
        .collect();
    let mut objective: Rational = tableau.iter().map(|row| row[rhs_col].clone()).sum();

    let mut iterations = 0usize;
    loop {
        // Bland's rule: entering variable = smallest index with negative
        // reduced cost.
        let Some(entering) = (0..total_cols).find(|&j| reduced[j].is_negative()) else {
            break;
        };
        // Ratio test; Bland ties broken by smallest basis variable.
        let mut leaving: Option<usize> = None;
        let mut best_ratio: Option<Rational> = None;
        for i in 0..m {
            if tableau[i][entering].is_positive() {
                let ratio = &tableau[i][rhs_col] / &tableau[i][entering];
                let better = match &best_ratio {
                    None => true,
                    Some(b) => ratio < *b || (ratio == *b && basis[i] < basis[leaving.unwrap()]),
                };
                if better {
                    best_ratio = Some(ratio);
                    leaving = Some(i);
                }
            }
        }
        let row = leaving.expect(
            "phase-1 objective is bounded below, entering column must have a positive entry",
        );

        // Pivot.
        let pivot = tableau[row][entering].clone();
        for v in tableau[row].iter_mut() {
            *v /= &pivot;
        }
        for i in 0..m {
            if i != row && !tableau[i][entering].is_zero() {
                let factor = tableau[i][entering].clone();
                for c in 0..=total_cols {
                    let delta = &factor * &tableau[row][c];
                    tableau[i][c] -= delta;
                }
            }
        }
        if !reduced[entering].is_zero() {
            let factor = reduced[entering].clone();
            for c in 0..total_cols {
                let delta = &factor * &tableau[row][c];
                reduced[c] -= delta;
            }
            // Bringing the entering variable up to t changes the objective
            // by r_e * t.
            objective += factor * &tableau[row][rhs_col];
        }
        basis[row] = entering;
        iterations += 1;
    }

    if objective.is_zero() {
        let mut solution = vec![Rational::zero(); n];
        for i in 0..m {
            if basis[i] < n {
                solution[basis[i]] = tableau[i][rhs_col].clone();
            }
        }
        // Mandatory verification against the original system.
        assert!(
            solution.iter().all(|v| !v.is_negative()),
            "phase-1 solution has a negative component"
        );
        for i in 0..system.rows.len() {
            let mut acc = Rational::zero();
            for j in 0..n {
                acc += &system.rows[i][j] * &solution[j];
            }
            assert_eq!(acc, system.rhs[i], "phase-1 solution fails A q = b");
        }
        FeasibilityResult::Feasible {
            solution,
            iterations,
        }
    } else {
        // Dual values: y_i = c_B B^{-1} e_i = z-value of artificial column i
        // = 1 - reduced[n + i]; undo the row flips to speak about the
        // original system.
        let mut certificate = Vec::with_capacity(m);
        for i in 0..m {
            let y = Rational::one() - &reduced[n + i];
            certificate.push(if sign[i] < 0 { -y } else { y });
        }
        // Mandatory verification: yᵀA ≤ 0 per column and yᵀb > 0.
        for j in 0..n {
            let mut acc = Rational::zero();
            for i in 0..m {
                acc += &certificate[i] * &system.rows[i][j];
            }
            assert!(
                !acc.is_positive(),
                "Farkas certificate fails yᵀA ≤ 0 at column {j}"
            );
        }
        let gap: Rational = (0..m).map(|i| &certificate[i] * &system.rhs[i]).sum();
        assert!(gap.is_positive(), "Farkas certificate fails yᵀb > 0");
        FeasibilityResult::Infeasible {
            certificate,
            iterations,
        }
    }
}
