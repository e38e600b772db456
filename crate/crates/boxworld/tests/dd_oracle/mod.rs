//! Double-description oracle for the no-signalling polytope, independent of
//! the library's tight-set vertex enumeration.
//!
//! The polytope `{p : A p = b, p >= 0}` is parametrised over its affine
//! hull as `p = p0 + K t` (`p0` the maximally mixed state, `K` a kernel
//! basis of the equality system), turning positivity into halfspaces
//! `p0_e + (K t)_e >= 0` in `t`-space. Homogenising with a leading `λ`
//! coordinate gives a pointed cone whose extreme rays (all with `λ > 0`,
//! the polytope being bounded) are the vertices. The classic double
//! description loop processes one halfspace at a time, keeping the
//! nonnegative rays and combining adjacent plus/minus pairs, with adjacency
//! decided by an exact rank test on the common tight constraints.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use boxworld::exact::{kernel_basis, rank, solve_square};
use boxworld::rational::Rational;
use boxworld::states::{maximally_mixed, state_equality_system};
use boxworld::SystemSignature;

pub fn vertices(sig: &SystemSignature) -> Vec<Vec<Rational>> {
    let system = state_equality_system(sig);
    let basis = kernel_basis(system.rows());
    let d = basis.len();
    let dim = d + 1;
    let p0: Vec<Rational> = maximally_mixed(sig).into_tensor().entries().to_vec();
    let n = p0.len();

    // Halfspace normals in homogenised (λ, t) space.
    let mut rows: Vec<Vec<Rational>> = Vec::with_capacity(n + 1);
    for e in 0..n {
        let mut row = Vec::with_capacity(dim);
        row.push(p0[e].clone());
        for b in &basis {
            row.push(b[e].clone());
        }
        rows.push(row);
    }
    let mut lambda_row = vec![Rational::zero(); dim];
    lambda_row[0] = Rational::one();
    rows.push(lambda_row);

    // Initial simplicial cone from the first maximal independent row set.
    let mut chosen: Vec<usize> = Vec::new();
    let mut chosen_rows: Vec<Vec<Rational>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        chosen_rows.push(row.clone());
        if rank(&chosen_rows) == chosen.len() + 1 {
            chosen.push(i);
        } else {
            chosen_rows.pop();
        }
        if chosen.len() == dim {
            break;
        }
    }
    assert_eq!(chosen.len(), dim, "halfspace normals must span the space");

    // Extreme rays of {y : B y >= 0} are the columns of B^{-1}.
    let mut rays: Vec<Vec<Rational>> = Vec::new();
    for j in 0..dim {
        let mut unit = vec![Rational::zero(); dim];
        unit[j] = Rational::one();
        let column = solve_square(&chosen_rows, &unit).expect("initial rows are independent");
        rays.push(canonical_ray(column));
    }

    let mut processed: Vec<usize> = chosen.clone();
    for i in 0..rows.len() {
        if processed.contains(&i) {
            continue;
        }
        let row = &rows[i];
        let values: Vec<Rational> = rays.iter().map(|r| dot(row, r)).collect();

        let mut next: BTreeSet<Vec<Rational>> = BTreeSet::new();
        for (r, v) in rays.iter().zip(&values) {
            if !v.is_negative() {
                next.insert(r.clone());
            }
        }
        for (pi, pv) in values.iter().enumerate() {
            if !pv.is_positive() {
                continue;
            }
            for (mi, mv) in values.iter().enumerate() {
                if !mv.is_negative() {
                    continue;
                }
                if !adjacent(&rays[pi], &rays[mi], &rows, &processed, dim) {
                    continue;
                }
                // Positive combination tight on the new constraint.
                let combo: Vec<Rational> = rays[mi]
                    .iter()
                    .zip(&rays[pi])
                    .map(|(m, p)| pv * m - mv * p)
                    .collect();
                next.insert(canonical_ray(combo));
            }
        }
        rays = next.into_iter().collect();
        processed.push(i);
    }

    // Back to polytope coordinates.
    let mut out: BTreeSet<Vec<Rational>> = BTreeSet::new();
    for ray in rays {
        // Bounded polytope: no recession directions survive.
        assert!(ray[0].is_positive(), "extreme ray with λ <= 0");
        for row in &rows {
            assert!(!dot(row, &ray).is_negative(), "ray violates a halfspace");
        }
        let mut point = p0.clone();
        for (j, b) in basis.iter().enumerate() {
            let t_j = &ray[1 + j] / &ray[0];
            if t_j.is_zero() {
                continue;
            }
            for e in 0..n {
                if !b[e].is_zero() {
                    point[e] += &t_j * &b[e];
                }
            }
        }
        assert!(point.iter().all(|v| !v.is_negative()));
        out.insert(point);
    }
    out.into_iter().collect()
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

/// Two extreme rays of the current cone are adjacent iff their common tight
/// constraints have rank dim − 2.
fn adjacent(
    r1: &[Rational],
    r2: &[Rational],
    rows: &[Vec<Rational>],
    processed: &[usize],
    dim: usize,
) -> bool {
    let tight: Vec<Vec<Rational>> = processed
        .iter()
        .map(|&i| &rows[i])
        .filter(|row| dot(row, r1).is_zero() && dot(row, r2).is_zero())
        .cloned()
        .collect();
    rank(&tight) == dim - 2
}

/// Primitive integer representative of the ray's direction (positive
/// scaling only; the sign is preserved).
fn canonical_ray(ray: Vec<Rational>) -> Vec<Rational> {
    let mut lcm = BigInt::one();
    for v in &ray {
        if !v.is_zero() {
            lcm = lcm.lcm(v.denom());
        }
    }
    let ints: Vec<BigInt> = ray.iter().map(|v| v.numer() * (&lcm / v.denom())).collect();
    let mut gcd = BigInt::zero();
    for v in &ints {
        gcd = gcd.gcd(v);
    }
    if gcd.is_zero() {
        return ray;
    }
    ints.into_iter()
        .map(|v| Rational::from_integer(v / &gcd))
        .collect()
}
