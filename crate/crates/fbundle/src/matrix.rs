//! Dense matrices over [`Scalar`] with exact elimination.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::Scalar;
use crate::symbols::SymbolSet;

#[derive(Clone, PartialEq, Eq)]
pub struct ScalarMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

impl ScalarMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Scalar>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(ScalarMatrix { rows, cols, data })
    }

    pub fn zero(syms: &Arc<SymbolSet>, rows: usize, cols: usize) -> Self {
        ScalarMatrix {
            rows,
            cols,
            data: vec![Scalar::zero(syms); rows * cols],
        }
    }

    pub fn identity(syms: &Arc<SymbolSet>, n: usize) -> Self {
        let mut m = Self::zero(syms, n, n);
        for i in 0..n {
            m[(i, i)] = Scalar::one(syms);
        }
        m
    }

    pub fn from_fn(
        _syms: &Arc<SymbolSet>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Scalar,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ScalarMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn syms(&self) -> &Arc<SymbolSet> {
        self.data[0].symbols()
    }

    pub fn column(&self, j: usize) -> Vec<Scalar> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn from_columns(syms: &Arc<SymbolSet>, cols: &[Vec<Scalar>]) -> Result<Self> {
        let rows = cols.first().map(|c| c.len()).unwrap_or(0);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Ok(Self::from_fn(syms, rows, cols.len(), |i, j| {
            cols[j][i].clone()
        }))
    }

    pub fn add(&self, o: &ScalarMatrix) -> ScalarMatrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self::from_fn(self.syms(), self.rows, self.cols, |i, j| {
            self[(i, j)].add(&o[(i, j)])
        })
    }

    pub fn sub(&self, o: &ScalarMatrix) -> ScalarMatrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Self::from_fn(self.syms(), self.rows, self.cols, |i, j| {
            self[(i, j)].sub(&o[(i, j)])
        })
    }

    pub fn neg(&self) -> ScalarMatrix {
        Self::from_fn(self.syms(), self.rows, self.cols, |i, j| self[(i, j)].neg())
    }

    pub fn mul(&self, o: &ScalarMatrix) -> ScalarMatrix {
        assert_eq!(self.cols, o.rows);
        Self::from_fn(self.syms(), self.rows, o.cols, |i, j| {
            let mut s = Scalar::zero(self.syms());
            for k in 0..self.cols {
                s = s.add(&self[(i, k)].mul(&o[(k, j)]));
            }
            s
        })
    }

    pub fn mul_scalar(&self, c: &Scalar) -> ScalarMatrix {
        Self::from_fn(self.syms(), self.rows, self.cols, |i, j| {
            self[(i, j)].mul(c)
        })
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = Scalar::zero(self.syms());
                for k in 0..self.cols {
                    s = s.add(&self[(i, k)].mul(&v[k]));
                }
                s
            })
            .collect()
    }

    pub fn commutator(&self, o: &ScalarMatrix) -> ScalarMatrix {
        self.mul(o).sub(&o.mul(self))
    }

    /// Exact determinant: cofactor expansion for n ≤ 4, fraction-free
    /// Bareiss elimination on the denominator-cleared matrix above that.
    pub fn det(&self) -> Result<Scalar> {
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        if n == 0 {
            return Ok(Scalar::one(self.syms()));
        }
        if n <= 4 {
            return Ok(self.det_cofactor(&(0..n).collect::<Vec<_>>(), 0));
        }
        self.det_bareiss()
    }

    fn det_cofactor(&self, cols: &[usize], row: usize) -> Scalar {
        let syms = self.syms();
        if cols.len() == 1 {
            return self[(row, cols[0])].clone();
        }
        let mut acc = Scalar::zero(syms);
        for (k, &j) in cols.iter().enumerate() {
            if self[(row, j)].is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&c| c != j).collect();
            let minor = self.det_cofactor(&rest, row + 1);
            let term = self[(row, j)].mul(&minor);
            acc = if k % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
        }
        acc
    }

    fn det_bareiss(&self) -> Result<Scalar> {
        let n = self.rows;
        let syms = self.syms();
        // Clear denominators row by row.
        let mut m: Vec<Vec<Poly>> = Vec::with_capacity(n);
        let mut scale = Scalar::one(syms);
        for i in 0..n {
            let mut den = Poly::one(syms);
            for j in 0..n {
                den = den.mul(self[(i, j)].den());
            }
            scale = scale.mul(&Scalar::from_poly(den.clone()));
            let row: Vec<Poly> = (0..n)
                .map(|j| {
                    let e = &self[(i, j)];
                    e.num().mul(&den.exact_div(e.den()).expect("den divides product"))
                })
                .collect();
            m.push(row);
        }
        let mut sign = 1i64;
        let mut prev = Poly::one(syms);
        for k in 0..n - 1 {
            if m[k][k].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                    return Ok(Scalar::zero(syms));
                };
                m.swap(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let t = m[k][k].mul(&m[i][j]).sub(&m[i][k].mul(&m[k][j]));
                    m[i][j] = t.exact_div(&prev).expect("Bareiss division is exact");
                }
                m[i][k] = Poly::zero(syms);
            }
            prev = m[k][k].clone();
        }
        let det_poly = m[n - 1][n - 1].clone();
        Ok(Scalar::from_poly(det_poly)
            .mul_i64(sign)
            .div(&scale)
            .expect("nonzero scale"))
    }

    /// Reduced row echelon form of `[self | rhs]`. Returns the transformed
    /// pair, the pivot columns and the rank.
    fn rref(&self, rhs: Option<&ScalarMatrix>) -> (ScalarMatrix, Option<ScalarMatrix>, Vec<usize>) {
        let mut a = self.clone();
        let mut b = rhs.cloned();
        let mut pivots = Vec::new();
        let mut r = 0usize;
        for c in 0..a.cols {
            if r == a.rows {
                break;
            }
            // Prefer structurally simple pivots to keep fractions small.
            let pivot = (r..a.rows)
                .filter(|&i| !a[(i, c)].is_zero())
                .min_by_key(|&i| {
                    let e = &a[(i, c)];
                    let nt = e.num().num_terms() + e.den().num_terms();
                    (if e.as_rat().is_some() { 0 } else { 1 }, nt, i)
                });
            let Some(p) = pivot else { continue };
            a.swap_rows(r, p);
            if let Some(bm) = b.as_mut() {
                bm.swap_rows(r, p);
            }
            let inv = a[(r, c)].inv().expect("pivot nonzero");
            a.scale_row(r, &inv);
            if let Some(bm) = b.as_mut() {
                bm.scale_row(r, &inv);
            }
            for i in 0..a.rows {
                if i != r && !a[(i, c)].is_zero() {
                    let f = a[(i, c)].clone();
                    a.row_sub_mul(i, r, &f);
                    if let Some(bm) = b.as_mut() {
                        bm.row_sub_mul(i, r, &f);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (a, b, pivots)
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    fn scale_row(&mut self, i: usize, f: &Scalar) {
        for c in 0..self.cols {
            self[(i, c)] = self[(i, c)].mul(f);
        }
    }

    fn row_sub_mul(&mut self, i: usize, j: usize, f: &Scalar) {
        for c in 0..self.cols {
            let t = self[(j, c)].mul(f);
            self[(i, c)] = self[(i, c)].sub(&t);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref(None).2.len()
    }

    /// Basis of the right nullspace, one column vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<Scalar>> {
        let syms = self.syms();
        let (a, _, pivots) = self.rref(None);
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivots.contains(&free) {
                continue;
            }
            let mut v = vec![Scalar::zero(syms); self.cols];
            v[free] = Scalar::one(syms);
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = a[(r, free)].neg();
            }
            basis.push(v);
        }
        basis
    }

    /// Exact solve `self · X = B` over the fraction field.
    pub fn solve(&self, b: &ScalarMatrix) -> Result<Solution> {
        if self.rows != b.rows {
            return Err(Error::DimensionMismatch(format!(
                "lhs has {} rows, rhs {}",
                self.rows, b.rows
            )));
        }
        let (a, bb, pivots) = self.rref(Some(b));
        let bb = bb.unwrap();
        let rank = pivots.len();
        // Consistency: zero rows of `a` must have zero rhs.
        for i in rank..a.rows {
            for j in 0..bb.cols {
                if !bb[(i, j)].is_zero() {
                    return Err(Error::NoSolution { rank, witness: i });
                }
            }
        }
        let syms = self.syms();
        let mut x = ScalarMatrix::zero(syms, self.cols, bb.cols);
        for (r, &pc) in pivots.iter().enumerate() {
            for j in 0..bb.cols {
                x[(pc, j)] = bb[(r, j)].clone();
            }
        }
        let nullspace = self.nullspace();
        Ok(Solution {
            x,
            rank,
            unique: nullspace.is_empty(),
            nullspace,
        })
    }

    /// Inverse of a square invertible matrix.
    pub fn inverse(&self) -> Result<ScalarMatrix> {
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let id = ScalarMatrix::identity(self.syms(), self.rows);
        let sol = self.solve(&id)?;
        if sol.rank != self.rows {
            return Err(Error::SingularFiberBasis);
        }
        Ok(sol.x)
    }
}

impl std::ops::Index<(usize, usize)> for ScalarMatrix {
    type Output = Scalar;
    fn index(&self, (i, j): (usize, usize)) -> &Scalar {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ScalarMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Scalar {
        &mut self.data[i * self.cols + j]
    }
}

/// Result of an exact linear solve.
pub struct Solution {
    pub x: ScalarMatrix,
    pub rank: usize,
    pub unique: bool,
    pub nullspace: Vec<Vec<Scalar>>,
}

impl fmt::Debug for ScalarMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for i in 0..self.rows {
            write!(f, "  [")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:?}", self[(i, j)])?;
            }
            writeln!(f, "]")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{Flavor, ParamSpec};

    fn spec() -> ParamSpec {
        ParamSpec::new(&[], &["l1", "l2"], Flavor::PowerSeriesLocal).unwrap()
    }

    fn s(spec: &ParamSpec, name: &str) -> Scalar {
        Scalar::symbol(spec.symbols(), spec.symbols().index_of(name).unwrap())
    }

    #[test]
    fn identity_det() {
        let sp = spec();
        let id = ScalarMatrix::identity(sp.symbols(), 3);
        assert!(id.det().unwrap().is_one());
    }

    #[test]
    fn swap_det() {
        let sp = spec();
        let syms = sp.symbols();
        let m = ScalarMatrix::from_fn(syms, 2, 2, |i, j| {
            if i != j {
                Scalar::one(syms)
            } else {
                Scalar::zero(syms)
            }
        });
        assert_eq!(m.det().unwrap(), Scalar::from_i64(syms, -1));
    }

    #[test]
    fn diagonal_solve() {
        let sp = spec();
        let syms = sp.symbols();
        let l1 = s(&sp, "l1");
        let l2 = s(&sp, "l2");
        let mut m = ScalarMatrix::zero(syms, 2, 2);
        m[(0, 0)] = l1.clone();
        m[(1, 1)] = l2.clone();
        let sol = m.solve(&ScalarMatrix::identity(syms, 2)).unwrap();
        assert!(sol.unique);
        assert_eq!(sol.x[(0, 0)], l1.inv().unwrap());
        assert_eq!(sol.x[(1, 1)], l2.inv().unwrap());
    }

    #[test]
    fn inconsistent_system() {
        let sp = spec();
        let syms = sp.symbols();
        let m = ScalarMatrix::from_fn(syms, 2, 2, |_, _| Scalar::one(syms));
        let b = ScalarMatrix::new(2, 1, vec![Scalar::one(syms), Scalar::zero(syms)]).unwrap();
        match m.solve(&b) {
            Err(Error::NoSolution { rank, .. }) => assert_eq!(rank, 1),
            other => panic!("expected NoSolution, got {:?}", other.map(|s| s.rank)),
        }
    }

    #[test]
    fn bareiss_matches_cofactor() {
        let sp = spec();
        let syms = sp.symbols();
        let l1 = s(&sp, "l1");
        let l2 = s(&sp, "l2");
        // A structured 5x5 to hit the Bareiss path; compare with Laplace on
        // a pre-computed equal 5x5 via block triangularity.
        let mut m = ScalarMatrix::identity(syms, 5);
        m[(0, 1)] = l1.clone();
        m[(1, 2)] = l2.clone();
        m[(2, 0)] = l1.mul(&l2);
        m[(3, 4)] = l1.clone();
        m[(4, 3)] = l2.clone();
        m[(3, 3)] = Scalar::zero(syms);
        m[(4, 4)] = Scalar::zero(syms);
        // det(upper-left 3x3 block with unit diagonal + strictly cyclic part)
        //   = 1 + l1*l2*l1*l2? expand: block [[1,l1,0],[0,1,l2],[l1l2,0,1]]
        //   det = 1 + l1*l2*(l1*l2) = 1 + l1^2 l2^2.
        // det(lower 2x2 [[0,l1],[l2,0]]) = -l1*l2.
        let expect = Scalar::one(syms)
            .add(&l1.pow(2).mul(&l2.pow(2)))
            .mul(&l1.mul(&l2).neg());
        assert_eq!(m.det().unwrap(), expect);
    }

    #[test]
    fn det_multiplicative_on_random_symbolic() {
        use rand::{Rng, SeedableRng};
        let sp = spec();
        let syms = sp.symbols();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let l1 = s(&sp, "l1");
        let l2 = s(&sp, "l2");
        let gens = [
            Scalar::zero(syms),
            Scalar::one(syms),
            Scalar::from_i64(syms, -1),
            l1,
            l2,
        ];
        for _ in 0..6 {
            let a = ScalarMatrix::from_fn(syms, 3, 3, |_, _| {
                gens[rng.gen_range(0..gens.len())].clone()
            });
            let b = ScalarMatrix::from_fn(syms, 3, 3, |_, _| {
                gens[rng.gen_range(0..gens.len())].clone()
            });
            let lhs = a.mul(&b).det().unwrap();
            let rhs = a.det().unwrap().mul(&b.det().unwrap());
            assert_eq!(lhs, rhs);
        }
    }
}
