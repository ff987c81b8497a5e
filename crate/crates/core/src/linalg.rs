//! Dense exact matrices over a [`Field`] and matrices over the truncated
//! polynomial ring `K[T]/(T^D)`.
//!
//! Gaussian elimination runs on a `u32` copy of the entries when the field
//! is finite and falls back to generic [`Elem`] arithmetic for `F_p(s)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::{Elem, Field, FinOps};

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
}

/// Result of [`Mat::rref`].
#[derive(Clone, Debug)]
pub struct Rref {
    pub reduced: Mat,
    pub rank: usize,
    pub pivots: Vec<usize>,
}

/// Wire format `{"rows":..,"cols":..,"entries":[[..],..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatJson {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<Value>>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} over {}", self.rows, self.cols, self.field.name())?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.field.format(self.get(i, j))).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

fn rref_fin(ops: &FinOps, a: &mut [u32], rows: usize, cols: usize, full: bool) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(pr) = (r..rows).find(|&i| a[i * cols + c] != 0) else {
            continue;
        };
        if pr != r {
            for k in 0..cols {
                a.swap(pr * cols + k, r * cols + k);
            }
        }
        let inv = ops.inv(a[r * cols + c]);
        if inv != 1 {
            for k in c..cols {
                a[r * cols + k] = ops.mul(a[r * cols + k], inv);
            }
        }
        let start = if full { 0 } else { r + 1 };
        for i in start..rows {
            if i == r {
                continue;
            }
            let f = a[i * cols + c];
            if f == 0 {
                continue;
            }
            let nf = ops.neg(f);
            if ops.d == 1 {
                let p = ops.p as u64;
                let nf = nf as u64;
                for k in c..cols {
                    let v = a[r * cols + k];
                    if v != 0 {
                        let t = a[i * cols + k] as u64 + nf * v as u64;
                        a[i * cols + k] = (t % p) as u32;
                    }
                }
            } else {
                for k in c..cols {
                    let v = a[r * cols + k];
                    if v != 0 {
                        a[i * cols + k] = ops.add(a[i * cols + k], ops.mul(nf, v));
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn rref_gen(f: &Field, a: &mut [Elem], rows: usize, cols: usize, full: bool) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(pr) = (r..rows).find(|&i| !f.is_zero(&a[i * cols + c])) else {
            continue;
        };
        if pr != r {
            for k in 0..cols {
                a.swap(pr * cols + k, r * cols + k);
            }
        }
        let inv = f.inv(&a[r * cols + c]).expect("pivot is nonzero");
        for k in c..cols {
            a[r * cols + k] = f.mul(&a[r * cols + k], &inv);
        }
        let start = if full { 0 } else { r + 1 };
        for i in start..rows {
            if i == r || f.is_zero(&a[i * cols + c]) {
                continue;
            }
            let fac = a[i * cols + c].clone();
            for k in c..cols {
                if f.is_zero(&a[r * cols + k]) {
                    continue;
                }
                let t = f.mul(&fac, &a[r * cols + k]);
                a[i * cols + k] = f.sub(&a[i * cols + k], &t);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

impl Mat {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Mat {
        Mat { field: field.clone(), rows, cols, data: vec![field.zero(); rows * cols] }
    }

    pub fn identity(field: &Field, n: usize) -> Mat {
        let mut m = Mat::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = field.one();
        }
        m
    }

    /// Matrix unit `e_{ij}` (0-based indices).
    pub fn unit(field: &Field, rows: usize, cols: usize, i: usize, j: usize) -> Mat {
        let mut m = Mat::zeros(field, rows, cols);
        m.data[i * cols + j] = field.one();
        m
    }

    pub fn from_elems(field: &Field, rows: usize, cols: usize, data: Vec<Elem>) -> Result<Mat> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Mat { field: field.clone(), rows, cols, data })
    }

    /// Builds a matrix from integer rows, reduced into the field.
    pub fn from_ints(field: &Field, rows: &[Vec<i64>]) -> Result<Mat> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Dimension("ragged integer rows".into()));
        }
        let data = rows.iter().flatten().map(|&v| field.from_i64(v)).collect();
        Ok(Mat { field: field.clone(), rows: r, cols: c, data })
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(field: &Field, rows: usize, columns: &[Vec<Elem>]) -> Result<Mat> {
        let mut m = Mat::zeros(field, rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::Dimension(format!("column of length {} in {rows}-row matrix", col.len())));
            }
            for (i, x) in col.iter().enumerate() {
                m.data[i * m.cols + j] = x.clone();
            }
        }
        Ok(m)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Elem {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: Elem) {
        self.data[i * self.cols + j] = x;
    }

    pub fn entries(&self) -> &[Elem] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Elem> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<Elem>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| self.field.is_zero(x))
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == Mat::identity(&self.field, self.rows)
    }

    fn same_shape(&self, other: &Mat, what: &str) -> Result<()> {
        if self.field != other.field {
            return Err(Error::Dimension(format!("{what}: fields {} and {} differ", self.field.name(), other.field.name())));
        }
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Mat) -> Result<Mat> {
        self.same_shape(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| self.field.add(a, b)).collect();
        Ok(Mat { data, ..self.clone_shape() })
    }

    /// Panics on shape mismatch.
    pub fn add(&self, other: &Mat) -> Mat {
        self.checked_add(other).expect("matrix add")
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Mat {
        let data = self.data.iter().map(|a| self.field.neg(a)).collect();
        Mat { data, ..self.clone_shape() }
    }

    pub fn scale(&self, c: &Elem) -> Mat {
        if self.field.is_zero(c) {
            return Mat::zeros(&self.field, self.rows, self.cols);
        }
        let data = self.data.iter().map(|a| self.field.mul(a, c)).collect();
        Mat { data, ..self.clone_shape() }
    }

    fn clone_shape(&self) -> Mat {
        Mat { field: self.field.clone(), rows: self.rows, cols: self.cols, data: Vec::new() }
    }

    fn to_u32(&self) -> Vec<u32> {
        self.data
            .iter()
            .map(|x| match x {
                Elem::Fin(v) => *v,
                Elem::Rat(_) => unreachable!("finite kernel on function field"),
            })
            .collect()
    }

    fn from_u32(field: &Field, rows: usize, cols: usize, v: Vec<u32>) -> Mat {
        Mat { field: field.clone(), rows, cols, data: v.into_iter().map(Elem::Fin).collect() }
    }

    pub fn checked_mul(&self, other: &Mat) -> Result<Mat> {
        if self.field != other.field || self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, m, k) = (self.rows, other.cols, self.cols);
        if let Some(ops) = self.field.fin() {
            let a = self.to_u32();
            let b = other.to_u32();
            let mut c = vec![0u32; n * m];
            if ops.d == 1 {
                let p = ops.p as u64;
                let mut acc = vec![0u64; m];
                for i in 0..n {
                    acc.iter_mut().for_each(|x| *x = 0);
                    for t in 0..k {
                        let x = a[i * k + t] as u64;
                        if x == 0 {
                            continue;
                        }
                        for (j, y) in b[t * m..(t + 1) * m].iter().enumerate() {
                            acc[j] += x * *y as u64;
                        }
                        if t % 4096 == 4095 {
                            acc.iter_mut().for_each(|v| *v %= p);
                        }
                    }
                    for j in 0..m {
                        c[i * m + j] = (acc[j] % p) as u32;
                    }
                }
            } else {
                for i in 0..n {
                    for t in 0..k {
                        let x = a[i * k + t];
                        if x == 0 {
                            continue;
                        }
                        for j in 0..m {
                            let y = b[t * m + j];
                            if y != 0 {
                                c[i * m + j] = ops.add(c[i * m + j], ops.mul(x, y));
                            }
                        }
                    }
                }
            }
            return Ok(Mat::from_u32(&self.field, n, m, c));
        }
        let f = &self.field;
        let mut c = vec![f.zero(); n * m];
        for i in 0..n {
            for t in 0..k {
                let x = &self.data[i * k + t];
                if f.is_zero(x) {
                    continue;
                }
                for j in 0..m {
                    let y = &other.data[t * m + j];
                    if !f.is_zero(y) {
                        c[i * m + j] = f.add(&c[i * m + j], &f.mul(x, y));
                    }
                }
            }
        }
        Ok(Mat { field: f.clone(), rows: n, cols: m, data: c })
    }

    /// Panics on shape mismatch.
    pub fn mul(&self, other: &Mat) -> Mat {
        self.checked_mul(other).expect("matrix multiply")
    }

    pub fn pow(&self, e: usize) -> Mat {
        assert!(self.is_square(), "power of a non-square matrix");
        let mut acc = Mat::identity(&self.field, self.rows);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn apply(&self, v: &[Elem]) -> Vec<Elem> {
        assert_eq!(v.len(), self.cols, "vector length");
        (0..self.rows)
            .map(|i| {
                let mut s = self.field.zero();
                for j in 0..self.cols {
                    let a = self.get(i, j);
                    if !self.field.is_zero(a) && !self.field.is_zero(&v[j]) {
                        s = self.field.add(&s, &self.field.mul(a, &v[j]));
                    }
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(&self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn trace(&self) -> Elem {
        (0..self.rows.min(self.cols)).fold(self.field.zero(), |s, i| self.field.add(&s, self.get(i, i)))
    }

    /// `[self, other] = self*other - other*self`.
    pub fn commutator(&self, other: &Mat) -> Mat {
        self.mul(other).sub(&other.mul(self))
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Mat) -> Mat {
        let f = &self.field;
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        let mut out = Mat::zeros(f, r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if f.is_zero(a) {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        let b = other.get(k, l);
                        if !f.is_zero(b) {
                            out.data[(i * other.rows + k) * c + j * other.cols + l] = f.mul(a, b);
                        }
                    }
                }
            }
        }
        out
    }

    /// Block diagonal matrix.
    pub fn block_diag(field: &Field, blocks: &[&Mat]) -> Mat {
        let r: usize = blocks.iter().map(|b| b.rows).sum();
        let c: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Mat::zeros(field, r, c);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out.data[(r0 + i) * c + c0 + j] = b.get(i, j).clone();
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "hstack row mismatch");
        let c = self.cols + other.cols;
        let mut out = Mat::zeros(&self.field, self.rows, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[i * c + j] = self.get(i, j).clone();
            }
            for j in 0..other.cols {
                out.data[i * c + self.cols + j] = other.get(i, j).clone();
            }
        }
        out
    }

    pub fn vstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Mat { field: self.field.clone(), rows: self.rows + other.rows, cols: self.cols, data }
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Mat {
        let mut out = Mat::zeros(&self.field, rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.data[a * cols.len() + b] = self.get(i, j).clone();
            }
        }
        out
    }

    fn echelon(&self, full: bool) -> (Mat, Vec<usize>) {
        if let Some(ops) = self.field.fin() {
            let mut a = self.to_u32();
            let piv = rref_fin(ops, &mut a, self.rows, self.cols, full);
            (Mat::from_u32(&self.field, self.rows, self.cols, a), piv)
        } else {
            let mut a = self.data.clone();
            let piv = rref_gen(&self.field, &mut a, self.rows, self.cols, full);
            (Mat { field: self.field.clone(), rows: self.rows, cols: self.cols, data: a }, piv)
        }
    }

    /// Reduced row echelon form, rank and pivot columns.
    pub fn rref(&self) -> Rref {
        let (reduced, pivots) = self.echelon(true);
        Rref { reduced, rank: pivots.len(), pivots }
    }

    pub fn rank(&self) -> usize {
        if let Some(r) = crate::specialize::power_ranks(self, 1) {
            return r[0];
        }
        self.echelon(false).1.len()
    }

    /// Basis of the right null space, one vector per free column.
    pub fn kernel_basis(&self) -> Vec<Vec<Elem>> {
        let Rref { reduced, pivots, .. } = self.rref();
        let f = &self.field;
        let mut is_pivot = vec![None; self.cols];
        for (r, &c) in pivots.iter().enumerate() {
            is_pivot[c] = Some(r);
        }
        (0..self.cols)
            .filter(|&c| is_pivot[c].is_none())
            .map(|free| {
                let mut v = vec![f.zero(); self.cols];
                v[free] = f.one();
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = f.neg(reduced.get(r, free));
                }
                v
            })
            .collect()
    }

    /// Kernel basis as the columns of a matrix.
    pub fn kernel_mat(&self) -> Mat {
        Mat::from_columns(&self.field, self.cols, &self.kernel_basis()).unwrap()
    }

    /// Basis of the column space, as a matrix with independent columns
    /// (the pivot columns of `self`).
    pub fn image_mat(&self) -> Mat {
        let piv = self.echelon(false).1;
        let rows: Vec<usize> = (0..self.rows).collect();
        self.submatrix(&rows, &piv)
    }

    pub fn inverse(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::Dimension("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let aug = self.hstack(&Mat::identity(&self.field, n));
        let Rref { reduced, rank, pivots } = aug.rref();
        if rank < n || pivots[n - 1] >= n {
            return Err(Error::DivisionByZero);
        }
        let rows: Vec<usize> = (0..n).collect();
        let cols: Vec<usize> = (n..2 * n).collect();
        Ok(reduced.submatrix(&rows, &cols))
    }

    /// Some `X` with `self * X = b`, if one exists.
    pub fn solve(&self, b: &Mat) -> Option<Mat> {
        assert_eq!(self.rows, b.rows, "solve row mismatch");
        let aug = self.hstack(b);
        let Rref { reduced, pivots, .. } = aug.rref();
        if pivots.iter().any(|&c| c >= self.cols) {
            return None;
        }
        let mut x = Mat::zeros(&self.field, self.cols, b.cols);
        for (r, &c) in pivots.iter().enumerate() {
            for j in 0..b.cols {
                x.data[c * b.cols + j] = reduced.get(r, self.cols + j).clone();
            }
        }
        Some(x)
    }

    /// Applies `x -> x^(p^e)` to every entry.
    pub fn frobenius(&self, e: u32) -> Mat {
        let data = self.data.iter().map(|x| self.field.frobenius_pow(x, e)).collect();
        Mat { data, ..self.clone_shape() }
    }

    /// Re-expresses the matrix over a larger field of the same characteristic.
    pub fn embed(&self, target: &Field) -> Result<Mat> {
        if *target == self.field {
            return Ok(self.clone());
        }
        let data = self.data.iter().map(|x| target.embed(x, &self.field)).collect::<Result<_>>()?;
        Ok(Mat { field: target.clone(), rows: self.rows, cols: self.cols, data })
    }

    /// Whether every entry lies in the prime subfield.
    pub fn is_prime_rational(&self) -> bool {
        self.data.iter().all(|x| self.field.in_prime_field(x))
    }

    pub fn to_json(&self) -> MatJson {
        MatJson {
            rows: self.rows,
            cols: self.cols,
            entries: (0..self.rows)
                .map(|i| (0..self.cols).map(|j| self.field.to_json(self.get(i, j))).collect())
                .collect(),
        }
    }

    pub fn from_json(j: &MatJson, field: &Field) -> Result<Mat> {
        if j.entries.len() != j.rows || j.entries.iter().any(|r| r.len() != j.cols) {
            return Err(Error::Parse(format!("matrix entries do not match {}x{}", j.rows, j.cols)));
        }
        let data = j.entries.iter().flatten().map(|v| field.from_json(v)).collect::<Result<_>>()?;
        Ok(Mat { field: field.clone(), rows: j.rows, cols: j.cols, data })
    }
}

/// Square matrix over `K[T]/(T^D)`, stored as coefficient matrices
/// `c_0, ..., c_{D-1}` of `sum c_j T^j`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PolyMat {
    n: usize,
    coeffs: Vec<Mat>,
}

impl PolyMat {
    /// `m` as a constant, truncated at `T^d`.
    pub fn constant(m: &Mat, d: usize) -> PolyMat {
        assert!(m.is_square() && d >= 1);
        let mut coeffs = vec![Mat::zeros(m.field(), m.rows, m.rows); d];
        coeffs[0] = m.clone();
        PolyMat { n: m.rows, coeffs }
    }

    pub fn identity(field: &Field, n: usize, d: usize) -> PolyMat {
        PolyMat::constant(&Mat::identity(field, n), d)
    }

    pub fn zero(field: &Field, n: usize, d: usize) -> PolyMat {
        PolyMat { n, coeffs: vec![Mat::zeros(field, n, n); d] }
    }

    /// From explicit coefficients; truncation bound is `coeffs.len()`.
    pub fn from_coeffs(coeffs: Vec<Mat>) -> Result<PolyMat> {
        let first = coeffs.first().ok_or_else(|| Error::Dimension("no coefficients".into()))?;
        let (n, f) = (first.rows, first.field().clone());
        if coeffs.iter().any(|c| c.rows != n || c.cols != n || *c.field() != f) {
            return Err(Error::Dimension("coefficients must be square of equal size".into()));
        }
        Ok(PolyMat { n, coeffs })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Truncation bound `D`.
    pub fn trunc(&self) -> usize {
        self.coeffs.len()
    }

    pub fn field(&self) -> &Field {
        self.coeffs[0].field()
    }

    pub fn coeffs(&self) -> &[Mat] {
        &self.coeffs
    }

    /// Coefficient of `T^j`.
    pub fn coeff(&self, j: usize) -> Result<&Mat> {
        self.coeffs
            .get(j)
            .ok_or_else(|| Error::Dimension(format!("coefficient {j} beyond truncation {}", self.trunc())))
    }

    pub fn set_coeff(&mut self, j: usize, m: Mat) {
        assert!(m.rows == self.n && m.cols == self.n);
        self.coeffs[j] = m;
    }

    pub fn checked_mul(&self, other: &PolyMat) -> Result<PolyMat> {
        if self.n != other.n || self.trunc() != other.trunc() || self.field() != other.field() {
            return Err(Error::Dimension(format!(
                "PolyMat product of size {}/{} and {}/{}",
                self.n,
                self.trunc(),
                other.n,
                other.trunc()
            )));
        }
        let d = self.trunc();
        let nz_a: Vec<usize> = (0..d).filter(|&i| !self.coeffs[i].is_zero()).collect();
        let nz_b: Vec<usize> = (0..d).filter(|&j| !other.coeffs[j].is_zero()).collect();
        let mut out = PolyMat::zero(self.field(), self.n, d);
        for &i in &nz_a {
            for &j in &nz_b {
                if i + j < d {
                    let prod = self.coeffs[i].mul(&other.coeffs[j]);
                    out.coeffs[i + j] = out.coeffs[i + j].add(&prod);
                }
            }
        }
        Ok(out)
    }

    /// Panics on mismatch.
    pub fn mul(&self, other: &PolyMat) -> PolyMat {
        self.checked_mul(other).expect("PolyMat multiply")
    }

    /// Inverse in `Mat_N(K[T]/T^D)`; requires invertible constant term.
    pub fn inverse(&self) -> Result<PolyMat> {
        let g0inv = self.coeffs[0].inverse()?;
        let d = self.trunc();
        let mut out: Vec<Mat> = Vec::with_capacity(d);
        out.push(g0inv.clone());
        let nz: Vec<usize> = (1..d).filter(|&i| !self.coeffs[i].is_zero()).collect();
        for k in 1..d {
            let mut s = Mat::zeros(self.field(), self.n, self.n);
            for &i in nz.iter().take_while(|&&i| i <= k) {
                if !out[k - i].is_zero() {
                    s = s.add(&self.coeffs[i].mul(&out[k - i]));
                }
            }
            out.push(g0inv.mul(&s).neg());
        }
        Ok(PolyMat { n: self.n, coeffs: out })
    }

    pub fn transpose(&self) -> PolyMat {
        PolyMat { n: self.n, coeffs: self.coeffs.iter().map(Mat::transpose).collect() }
    }

    pub fn kron(&self, other: &PolyMat) -> PolyMat {
        assert_eq!(self.trunc(), other.trunc(), "kron truncation mismatch");
        let d = self.trunc();
        let n = self.n * other.n;
        let mut out = PolyMat::zero(self.field(), n, d);
        for i in (0..d).filter(|&i| !self.coeffs[i].is_zero()) {
            for j in (0..d - i).filter(|&j| !other.coeffs[j].is_zero()) {
                out.coeffs[i + j] = out.coeffs[i + j].add(&self.coeffs[i].kron(&other.coeffs[j]));
            }
        }
        out
    }

    pub fn block_diag(parts: &[PolyMat]) -> PolyMat {
        let d = parts[0].trunc();
        let f = parts[0].field().clone();
        let coeffs = (0..d)
            .map(|j| {
                let blocks: Vec<&Mat> = parts.iter().map(|p| &p.coeffs[j]).collect();
                Mat::block_diag(&f, &blocks)
            })
            .collect();
        PolyMat { n: parts.iter().map(|p| p.n).sum(), coeffs }
    }

    /// `L * self * R` for constant rectangular `L` (m x n) and `R` (n x m).
    pub fn sandwich(&self, left: &Mat, right: &Mat) -> PolyMat {
        let coeffs = self.coeffs.iter().map(|c| left.mul(c).mul(right)).collect();
        PolyMat { n: left.rows, coeffs }
    }

    /// Entrywise `x -> x^(p^e)` on the entries of `K[T]/T^D`; sends
    /// `c T^j` to `c^(p^e) T^(j p^e)`.
    pub fn frobenius_twist(&self, e: u32) -> PolyMat {
        let q = (self.field().p() as usize).pow(e);
        let d = self.trunc();
        let mut out = PolyMat::zero(self.field(), self.n, d);
        for j in 0..d {
            if j * q >= d {
                break;
            }
            out.coeffs[j * q] = self.coeffs[j].frobenius(e);
        }
        out
    }

    /// Entry `(i, j)` as a truncated polynomial (coefficient list of length D).
    pub fn entry(&self, i: usize, j: usize) -> Vec<Elem> {
        self.coeffs.iter().map(|c| c.get(i, j).clone()).collect()
    }

    /// Rebuilds from an `n x n` table of truncated polynomials.
    pub fn from_entries(field: &Field, n: usize, d: usize, entries: &[Vec<Elem>]) -> PolyMat {
        let mut out = PolyMat::zero(field, n, d);
        for i in 0..n {
            for j in 0..n {
                for (k, c) in entries[i * n + j].iter().enumerate().take(d) {
                    out.coeffs[k].set(i, j, c.clone());
                }
            }
        }
        out
    }
}

/// Arithmetic on truncated polynomials `K[T]/T^D` stored as coefficient lists.
pub mod trunc {
    use crate::field::{Elem, Field};

    pub fn zero(f: &Field, d: usize) -> Vec<Elem> {
        vec![f.zero(); d]
    }

    pub fn one(f: &Field, d: usize) -> Vec<Elem> {
        let mut v = zero(f, d);
        v[0] = f.one();
        v
    }

    pub fn is_zero(f: &Field, a: &[Elem]) -> bool {
        a.iter().all(|x| f.is_zero(x))
    }

    pub fn add(f: &Field, a: &[Elem], b: &[Elem]) -> Vec<Elem> {
        a.iter().zip(b).map(|(x, y)| f.add(x, y)).collect()
    }

    pub fn sub(f: &Field, a: &[Elem], b: &[Elem]) -> Vec<Elem> {
        a.iter().zip(b).map(|(x, y)| f.sub(x, y)).collect()
    }

    pub fn scale(f: &Field, a: &[Elem], c: &Elem) -> Vec<Elem> {
        a.iter().map(|x| f.mul(x, c)).collect()
    }

    pub fn mul(f: &Field, a: &[Elem], b: &[Elem]) -> Vec<Elem> {
        let d = a.len();
        let mut out = zero(f, d);
        for (i, x) in a.iter().enumerate() {
            if f.is_zero(x) {
                continue;
            }
            for (j, y) in b.iter().enumerate().take(d - i) {
                if !f.is_zero(y) {
                    out[i + j] = f.add(&out[i + j], &f.mul(x, y));
                }
            }
        }
        out
    }

    pub fn pow(f: &Field, a: &[Elem], e: usize) -> Vec<Elem> {
        let mut acc = one(f, a.len());
        for _ in 0..e {
            acc = mul(f, &acc, a);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> Field {
        Field::prime(3).unwrap()
    }

    #[test]
    fn rank_examples() {
        let f = f3();
        assert_eq!(Mat::identity(&f, 3).rank(), 3);
        assert_eq!(Mat::zeros(&f, 3, 3).rank(), 0);
        let m = Mat::from_ints(&f, &[vec![1, 2], vec![2, 1]]).unwrap();
        let r = m.rref();
        assert_eq!(r.rank, 1);
        assert_eq!(r.pivots, vec![0]);
    }

    #[test]
    fn kernel_examples() {
        let f = f3();
        assert!(Mat::identity(&f, 3).kernel_basis().is_empty());
        assert_eq!(Mat::zeros(&f, 3, 3).kernel_basis().len(), 3);
        let m = Mat::from_ints(&f, &[vec![1, 2], vec![2, 1]]).unwrap();
        let k = m.kernel_basis();
        assert_eq!(k, vec![vec![f.from_i64(1), f.from_i64(1)]]);
    }

    #[test]
    fn inverse_and_solve() {
        let f = Field::extension(3, 2).unwrap();
        let s = f.generator().unwrap();
        let m = Mat::from_elems(&f, 2, 2, vec![f.one(), s.clone(), f.zero(), s]).unwrap();
        let inv = m.inverse().unwrap();
        assert!(m.mul(&inv).is_identity());
        let singular = Mat::from_ints(&f, &[vec![1, 1], vec![1, 1]]).unwrap();
        assert!(singular.inverse().is_err());
    }

    #[test]
    fn polymat_examples() {
        let f = f3();
        let b = Mat::unit(&f, 2, 2, 0, 1);
        let i = Mat::identity(&f, 2);
        let plus = PolyMat::from_coeffs(vec![i.clone(), b.clone(), Mat::zeros(&f, 2, 2)]).unwrap();
        let minus = PolyMat::from_coeffs(vec![i.clone(), b.neg(), Mat::zeros(&f, 2, 2)]).unwrap();
        assert_eq!(plus.mul(&minus), PolyMat::identity(&f, 2, 3));
        assert_eq!(plus.coeff(1).unwrap(), &b);
        assert!(plus.coeff(3).is_err());
        assert_eq!(PolyMat::identity(&f, 2, 3).mul(&plus), plus);

        let c = Mat::unit(&f, 2, 2, 1, 0);
        let x = PolyMat::from_coeffs(vec![i.clone(), b.clone()]).unwrap();
        let y = PolyMat::from_coeffs(vec![i.clone(), c.clone()]).unwrap();
        let want = PolyMat::from_coeffs(vec![i.clone(), b.add(&c)]).unwrap();
        assert_eq!(x.mul(&y), want);
        assert_eq!(plus.inverse().unwrap(), minus);
    }

    #[test]
    fn ratfun_elimination() {
        let f = Field::ratfun(3).unwrap();
        let s = f.generator().unwrap();
        let m = Mat::from_elems(&f, 2, 2, vec![s.clone(), f.one(), f.mul(&s, &s), s.clone()]).unwrap();
        assert_eq!(m.rank(), 1);
        let k = m.kernel_mat();
        assert!(m.mul(&k).is_zero());
    }
}
