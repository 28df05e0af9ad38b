//! Diagonal-storage complex matrices and a pivot-free band LU.
//!
//! Every operator in the model (ladder operators, quadratures, the quartic
//! Hamiltonian) is banded with half-bandwidth at most four, so products,
//! matrix-vector applications and solves are all O(dim).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// One stored diagonal. Offset `o` holds the entries `A[r, r + o]`.
#[derive(Clone, Debug, PartialEq)]
struct Diagonal {
    offset: isize,
    values: Vec<Complex64>,
}

impl Diagonal {
    /// Row index of `values[0]`.
    fn row0(&self) -> usize {
        (-self.offset).max(0) as usize
    }

    /// Column index of `values[0]`.
    fn col0(&self) -> usize {
        self.offset.max(0) as usize
    }
}

/// Square complex matrix stored diagonal by diagonal.
///
/// Only diagonals that can be non-zero are kept, sorted by offset. The
/// quartic Hamiltonian for instance has offsets `{-4, -2, 0, 2, 4}` only.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedOperator {
    dim: usize,
    diags: Vec<Diagonal>,
}

impl BandedOperator {
    pub fn zeros(dim: usize) -> Self {
        BandedOperator {
            dim,
            diags: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn from_diagonal(values: Vec<Complex64>) -> Self {
        let dim = values.len();
        BandedOperator {
            dim,
            diags: vec![Diagonal { offset: 0, values }],
        }
    }

    /// Builds an operator from `(offset, values)` pairs. Each `values` must
    /// have length `dim - |offset|`; repeated offsets are summed.
    pub fn from_diagonals(dim: usize, diagonals: Vec<(isize, Vec<Complex64>)>) -> Result<Self> {
        let mut op = Self::zeros(dim);
        for (offset, values) in diagonals {
            let len = dim
                .checked_sub(offset.unsigned_abs())
                .ok_or_else(|| Error::param("offset", format!("{offset} outside dim {dim}")))?;
            if values.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: values.len(),
                });
            }
            op.accumulate(offset, &values, Complex64::new(1.0, 0.0));
        }
        Ok(op)
    }

    /// Upper-left `dim x dim` block.
    pub fn leading_block(&self, dim: usize) -> Result<Self> {
        if dim < 2 || dim > self.dim {
            return Err(Error::InvalidDimension { dim });
        }
        let diags = self
            .diags
            .iter()
            .filter(|d| d.offset.unsigned_abs() < dim)
            .map(|d| Diagonal {
                offset: d.offset,
                values: d.values[..dim - d.offset.unsigned_abs()].to_vec(),
            })
            .collect();
        Ok(BandedOperator { dim, diags })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower_bw(&self) -> usize {
        self.diags
            .iter()
            .map(|d| (-d.offset).max(0) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn upper_bw(&self) -> usize {
        self.diags
            .iter()
            .map(|d| d.offset.max(0) as usize)
            .max()
            .unwrap_or(0)
    }

    /// Offsets of the stored diagonals in increasing order.
    pub fn offsets(&self) -> Vec<isize> {
        self.diags.iter().map(|d| d.offset).collect()
    }

    /// Values of the diagonal at `offset`, if stored.
    pub fn diagonal(&self, offset: isize) -> Option<&[Complex64]> {
        self.diags
            .iter()
            .find(|d| d.offset == offset)
            .map(|d| d.values.as_slice())
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let offset = col as isize - row as isize;
        match self.diagonal(offset) {
            Some(values) => values[row.min(col)],
            None => ZERO,
        }
    }

    fn accumulate(&mut self, offset: isize, values: &[Complex64], scale: Complex64) {
        match self.diags.binary_search_by_key(&offset, |d| d.offset) {
            Ok(i) => {
                for (dst, v) in self.diags[i].values.iter_mut().zip(values) {
                    *dst += scale * v;
                }
            }
            Err(i) => self.diags.insert(
                i,
                Diagonal {
                    offset,
                    values: values.iter().map(|v| scale * v).collect(),
                },
            ),
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if self.dim != found {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    /// `out += alpha * A x`. Panics if the lengths do not match `dim`.
    pub fn apply_add(&self, alpha: Complex64, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for d in &self.diags {
            let n = d.values.len();
            let xs = &x[d.col0()..d.col0() + n];
            let ys = &mut out[d.row0()..d.row0() + n];
            let vals = &d.values;
            if alpha == Complex64::new(1.0, 0.0) {
                for ((y, a), xv) in ys.iter_mut().zip(vals).zip(xs) {
                    *y += a * xv;
                }
            } else {
                for ((y, a), xv) in ys.iter_mut().zip(vals).zip(xs) {
                    *y += alpha * (a * xv);
                }
            }
        }
    }

    /// `out = A x`.
    pub fn apply_to(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.fill(ZERO);
        self.apply_add(Complex64::new(1.0, 0.0), x, out);
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(x.len())?;
        let mut out = vec![ZERO; self.dim];
        self.apply_to(x, &mut out);
        Ok(out)
    }

    /// `<x| A |x>` without allocating.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = ZERO;
        for d in &self.diags {
            let n = d.values.len();
            let xr = &x[d.row0()..d.row0() + n];
            let xc = &x[d.col0()..d.col0() + n];
            for ((a, l), r) in d.values.iter().zip(xr).zip(xc) {
                acc += l.conj() * a * r;
            }
        }
        acc
    }

    pub fn scale(&self, s: Complex64) -> Self {
        BandedOperator {
            dim: self.dim,
            diags: self
                .diags
                .iter()
                .map(|d| Diagonal {
                    offset: d.offset,
                    values: d.values.iter().map(|v| s * v).collect(),
                })
                .collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        self.check_dim(other.dim)?;
        let mut out = self.scale(a);
        for d in &other.diags {
            out.accumulate(d.offset, &d.values, b);
        }
        Ok(out)
    }

    /// Matrix product; the result's bandwidths are the sums of the factors'.
    /// Diagonals that come out identically zero (e.g. odd offsets of `Q^2`)
    /// are dropped.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for da in &self.diags {
            for db in &other.diags {
                let offset = da.offset + db.offset;
                let len = match n.checked_sub(offset.unsigned_abs()) {
                    Some(len) if len > 0 => len,
                    _ => continue,
                };
                let mut values = vec![ZERO; len];
                let row0 = (-offset).max(0) as usize;
                for (k, v) in values.iter_mut().enumerate() {
                    let r = row0 + k;
                    // A[r, m] with m = r + da.offset, then B[m, r + offset].
                    let m = r as isize + da.offset;
                    if m < 0 || m >= n as isize {
                        continue;
                    }
                    let m = m as usize;
                    let c = (r as isize + offset) as usize;
                    *v = da.values[r.min(m)] * db.values[m.min(c)];
                }
                out.accumulate(offset, &values, Complex64::new(1.0, 0.0));
            }
        }
        out.diags
            .retain(|d| d.values.iter().any(|v| *v != ZERO));
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let mut diags: Vec<Diagonal> = self
            .diags
            .iter()
            .map(|d| Diagonal {
                offset: -d.offset,
                values: d.values.iter().map(|v| v.conj()).collect(),
            })
            .collect();
        diags.sort_by_key(|d| d.offset);
        BandedOperator {
            dim: self.dim,
            diags,
        }
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `max |A - A^dagger|` over all entries.
    pub fn hermitian_defect(&self) -> f64 {
        let adj = self.adjoint();
        let diff = self.sub(&adj).expect("same dimension");
        diff.max_abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.diags
            .iter()
            .flat_map(|d| d.values.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Gershgorin bound on the spectral radius.
    pub fn gershgorin_radius(&self) -> f64 {
        let mut rows = vec![0.0_f64; self.dim];
        for d in &self.diags {
            for (k, v) in d.values.iter().enumerate() {
                rows[d.row0() + k] += v.norm();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for d in &self.diags {
            for (k, v) in d.values.iter().enumerate() {
                m[(d.row0() + k, d.col0() + k)] = *v;
            }
        }
        m
    }

    /// `out += alpha * A M` for a dense square `M`.
    pub fn left_mul_dense_add(&self, alpha: Complex64, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        assert_eq!(m.nrows(), self.dim);
        for j in 0..m.ncols() {
            self.apply_add(alpha, m.column(j).as_slice(), out.column_mut(j).as_mut_slice());
        }
    }

    /// `out += alpha * M A` for a dense square `M`.
    pub fn right_mul_dense_add(&self, alpha: Complex64, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        assert_eq!(m.ncols(), self.dim);
        // (M A)[:, c] = sum_r M[:, r] A[r, c]
        for d in &self.diags {
            for (k, v) in d.values.iter().enumerate() {
                let (r, c) = (d.row0() + k, d.col0() + k);
                let s = alpha * v;
                let src = m.column(r);
                let mut dst = out.column_mut(c);
                for (y, x) in dst.iter_mut().zip(src.iter()) {
                    *y += s * x;
                }
            }
        }
    }

    /// `Tr(A M)` for a dense square `M`.
    pub fn trace_with(&self, m: &DMatrix<Complex64>) -> Complex64 {
        let mut acc = ZERO;
        for d in &self.diags {
            for (k, v) in d.values.iter().enumerate() {
                acc += v * m[(d.col0() + k, d.row0() + k)];
            }
        }
        acc
    }
}

/// LU factorization of a banded matrix without pivoting.
///
/// Only safe for matrices whose Hermitian part is positive definite, which
/// holds for the Crank-Nicolson operator `I + i h H` with `H` Hermitian.
#[derive(Clone, Debug)]
pub struct BandLu {
    dim: usize,
    lower: usize,
    upper: usize,
    /// Row-major band: row `r`, column `c` lives at `r * width + (c + lower - r)`.
    band: Vec<Complex64>,
    inv_pivots: Vec<Complex64>,
    /// Offsets below and above the diagonal that hold any nonzero factor entry.
    l_offsets: Vec<usize>,
    u_offsets: Vec<usize>,
}

impl BandLu {
    pub fn factor(op: &BandedOperator) -> Result<Self> {
        let n = op.dim();
        let (kl, ku) = (op.lower_bw(), op.upper_bw());
        let width = kl + ku + 1;
        let mut band = vec![ZERO; n * width];
        for d in &op.diags {
            for (k, v) in d.values.iter().enumerate() {
                let (r, c) = (d.row0() + k, d.col0() + k);
                band[r * width + (c + kl - r)] = *v;
            }
        }
        let idx = |r: usize, c: usize| r * width + (c + kl - r);
        let mut inv_pivots = vec![ZERO; n];
        for k in 0..n {
            let pivot = band[idx(k, k)];
            if pivot.norm() < 1e-300 {
                return Err(Error::SingularPivot { row: k });
            }
            let inv = pivot.inv();
            inv_pivots[k] = inv;
            for i in (k + 1)..(k + kl + 1).min(n) {
                let l = band[idx(i, k)] * inv;
                band[idx(i, k)] = l;
                if l == ZERO {
                    continue;
                }
                for j in (k + 1)..(k + ku + 1).min(n) {
                    let u = band[idx(k, j)];
                    band[idx(i, j)] -= l * u;
                }
            }
        }
        let live = |off: isize| {
            (0..n).any(|r| {
                let c = r as isize + off;
                c >= 0 && (c as usize) < n && band[idx(r, c as usize)] != ZERO
            })
        };
        let l_offsets = (1..=kl).filter(|&o| live(-(o as isize))).collect();
        let u_offsets = (1..=ku).filter(|&o| live(o as isize)).collect();
        Ok(BandLu {
            dim: n,
            lower: kl,
            upper: ku,
            band,
            inv_pivots,
            l_offsets,
            u_offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        assert_eq!(b.len(), self.dim);
        let (n, kl) = (self.dim, self.lower);
        let width = kl + self.upper + 1;
        for i in 0..n {
            let row = &self.band[i * width..(i + 1) * width];
            let mut acc = b[i];
            for &o in &self.l_offsets {
                if o > i {
                    break;
                }
                acc -= row[kl - o] * b[i - o];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.band[i * width..(i + 1) * width];
            let mut acc = b[i];
            for &o in &self.u_offsets {
                if i + o >= n {
                    break;
                }
                acc -= row[kl + o] * b[i + o];
            }
            b[i] = acc * self.inv_pivots[i];
        }
    }
}
