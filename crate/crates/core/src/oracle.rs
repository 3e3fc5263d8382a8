//! Exhaustive and quadratic-form references for the total cost.

use crate::error::{shape_err, Error, Result};
use crate::linalg::{DenseMatrix, HardPermutation};
use crate::permopt::ComparisonStructure;

pub const MAX_Q_SIZE: usize = 12;
pub const MAX_BRUTE_SIZE: usize = 8;

/// Dense `N² × N²` matrix with `Q[(i,k),(j,k')] = Σ_ch C_ch[i][j] · O_ch[k][k']`,
/// flattened as `l = i·N + k`.
#[derive(Clone, Debug)]
pub struct QMatrix {
    n: usize,
    q: DenseMatrix,
}

impl QMatrix {
    pub fn set_size(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    /// `pᵀ Q p` for the row-major flattening of an element × position matrix.
    pub fn quadratic_form(&self, p: &DenseMatrix) -> Result<f64> {
        p.ensure_shape("QMatrix::quadratic_form", self.n, self.n)?;
        let flat = p.data();
        let mut total = 0.0;
        for (a, &pa) in flat.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            total += pa * crate::linalg::dot(self.q.row(a), flat);
        }
        Ok(total)
    }

    pub fn symmetrised(&self) -> DenseMatrix {
        let mut s = self.q.add(&self.q.transpose()).expect("square");
        s.scale_in_place(0.5);
        s
    }
}

pub fn build_q(costs: &[DenseMatrix], structure: &ComparisonStructure) -> Result<QMatrix> {
    let n = structure.positions();
    if n > MAX_Q_SIZE {
        return Err(Error::SizeLimit {
            op: "build_q",
            size: n,
            limit: MAX_Q_SIZE,
        });
    }
    check_costs("build_q", costs, structure)?;
    let mut q = DenseMatrix::zeros(n * n, n * n);
    for (c, o) in costs.iter().zip(structure.order_matrices()) {
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    let cij = c[(i, j)];
                    if cij == 0.0 {
                        continue;
                    }
                    for kk in 0..n {
                        q[(i * n + k, j * n + kk)] += cij * o[(k, kk)];
                    }
                }
            }
        }
    }
    Ok(QMatrix { n, q })
}

/// Total cost of a hard permutation, `Σ_ch Σ_{k,k'} O_ch[k][k'] C_ch[a_k][a_k']`.
pub fn hard_cost(
    costs: &[DenseMatrix],
    structure: &ComparisonStructure,
    perm: &HardPermutation,
) -> Result<f64> {
    check_costs("hard_cost", costs, structure)?;
    if perm.len() != structure.positions() {
        return Err(shape_err("hard_cost", structure.positions(), perm.len()));
    }
    let orders = structure.order_matrices();
    Ok(hard_cost_with(costs, &orders, perm.as_slice()))
}

fn hard_cost_with(costs: &[DenseMatrix], orders: &[DenseMatrix], a: &[usize]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for (c, o) in costs.iter().zip(orders) {
        for k in 0..n {
            for kk in 0..n {
                let s = o[(k, kk)];
                if s != 0.0 {
                    total += s * c[(a[k], a[kk])];
                }
            }
        }
    }
    total
}

/// Minimum-cost hard permutation by enumerating all `N!` candidates in
/// lexicographic order; the first minimiser wins ties.
pub fn brute_min(
    costs: &[DenseMatrix],
    structure: &ComparisonStructure,
) -> Result<(HardPermutation, f64)> {
    let n = structure.positions();
    if n > MAX_BRUTE_SIZE {
        return Err(Error::SizeLimit {
            op: "brute_min",
            size: n,
            limit: MAX_BRUTE_SIZE,
        });
    }
    check_costs("brute_min", costs, structure)?;
    let orders = structure.order_matrices();
    let mut current: Vec<usize> = (0..n).collect();
    let mut best = current.clone();
    let mut best_cost = hard_cost_with(costs, &orders, &current);
    while next_permutation(&mut current) {
        let cost = hard_cost_with(costs, &orders, &current);
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&current);
        }
    }
    Ok((HardPermutation::new(best)?, best_cost))
}

/// Advances to the next permutation in lexicographic order; false after the last.
pub fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

fn check_costs(op: &'static str, costs: &[DenseMatrix], structure: &ComparisonStructure) -> Result<()> {
    let n = structure.positions();
    if costs.len() != structure.channels() {
        return Err(shape_err(
            op,
            format!("{} cost channels", structure.channels()),
            costs.len(),
        ));
    }
    for c in costs {
        c.ensure_shape(op, n, n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_enumeration() {
        let mut a = vec![0, 1, 2];
        let mut seen = vec![a.clone()];
        while next_permutation(&mut a) {
            seen.push(a.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }

    #[test]
    fn zero_costs() {
        let s = ComparisonStructure::Sequence(4);
        let c = [DenseMatrix::zeros(4, 4)];
        assert_eq!(build_q(&c, &s).unwrap().matrix().max_abs(), 0.0);
        let (p, cost) = brute_min(&c, &s).unwrap();
        assert_eq!(p, HardPermutation::identity(4));
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn two_by_two_q_entries() {
        let c = 0.7;
        let cm = DenseMatrix::from_rows(&[[0.0, c], [-c, 0.0]]).unwrap();
        let q = build_q(&[cm], &ComparisonStructure::Sequence(2)).unwrap();
        let nz: Vec<f64> = q.matrix().data().iter().copied().filter(|v| *v != 0.0).collect();
        // (i,j) ∈ {(0,1),(1,0)} × (k,k') ∈ {(0,1),(1,0)}
        assert_eq!(nz.len(), 4);
        assert!(nz.iter().all(|v| v.abs() == c));
        // (i=0,k=1),(j=1,k'=0): C01 · O10
        assert_eq!(q.matrix()[(1, 2)], -c);
        assert_eq!(q.matrix()[(0, 3)], c);
    }

    #[test]
    fn size_guards() {
        let s = ComparisonStructure::Sequence(13);
        let c = [DenseMatrix::zeros(13, 13)];
        assert!(matches!(build_q(&c, &s), Err(Error::SizeLimit { .. })));
        let s = ComparisonStructure::Sequence(9);
        let c = [DenseMatrix::zeros(9, 9)];
        assert!(matches!(brute_min(&c, &s), Err(Error::SizeLimit { .. })));
        assert!(build_q(&c, &s).is_ok());
    }
}
