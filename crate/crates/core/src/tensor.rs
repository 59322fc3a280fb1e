//! Dense complex linear algebra over labeled tensor-product spaces.
//!
//! Operators on a composite space carry an ordered list of [`SystemLabel`]s.
//! The first label is the most significant factor of the Kronecker ordering,
//! so the basis index of `|i⟩_A ⊗ |j⟩_B` is `i * dim(B) + j`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest row or column count allowed for any single matrix.
pub const DIM_CAP: usize = 4096;
/// Eigenvalue floor for PSD enforcement and support detection.
pub const PSD_TOL: f64 = 1e-10;
/// Relative Hermiticity tolerance.
pub const HERM_TOL: f64 = 1e-9;
/// Sweep cap for the Jacobi eigensolver.
pub const MAX_SWEEPS: usize = 64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A named tensor factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SystemLabel {
    pub name: String,
    pub dim: usize,
}

impl SystemLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        SystemLabel {
            name: name.into(),
            dim,
        }
    }
}

/// Checks names are unique and dims positive; returns the total dimension.
pub fn validate_labels(labels: &[SystemLabel]) -> Result<usize> {
    let mut total = 1usize;
    for (k, l) in labels.iter().enumerate() {
        if l.dim == 0 {
            return Err(Error::Dimension(format!("system {} has dimension 0", l.name)));
        }
        if labels[..k].iter().any(|o| o.name == l.name) {
            return Err(Error::Label(format!("duplicate label {}", l.name)));
        }
        total = total
            .checked_mul(l.dim)
            .filter(|&d| d <= DIM_CAP)
            .ok_or(Error::DimensionCap(total.saturating_mul(l.dim)))?;
    }
    Ok(total)
}

pub fn total_dim(labels: &[SystemLabel]) -> usize {
    labels.iter().map(|l| l.dim).product()
}

pub(crate) fn position(labels: &[SystemLabel], name: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l.name == name)
        .ok_or_else(|| Error::Label(format!("unknown label {name}")))
}

pub(crate) fn positions(labels: &[SystemLabel], names: &[&str]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let p = position(labels, n)?;
        if out.contains(&p) {
            return Err(Error::Label(format!("label {n} listed twice")));
        }
        out.push(p);
    }
    Ok(out)
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if rows > DIM_CAP || cols > DIM_CAP {
            return Err(Error::DimensionCap(rows.max(cols)));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Column vector.
    pub fn column(v: &[C64]) -> Self {
        ComplexMatrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// `|u⟩⟨u|`.
    pub fn projector(u: &[C64]) -> Self {
        Self::outer(u, u)
    }

    /// Computational basis ket `|k⟩` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Vec<C64> {
        let mut v = vec![ZERO; d];
        v[k] = ONE;
        v
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `(M + M†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                s += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Frobenius distance to another matrix of the same shape.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * p];
        for i in 0..n {
            let row = &self.data[i * m..(i + 1) * m];
            let acc = &mut out[i * p..(i + 1) * p];
            for (k, a) in row.iter().enumerate() {
                if *a == ZERO {
                    continue;
                }
                let orow = &other.data[k * p..(k + 1) * p];
                for (o, b) in acc.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        ComplexMatrix {
            rows: n,
            cols: p,
            data: out,
        }
    }

    /// `A X A†`.
    pub fn conjugate_by(&self, a: &Self) -> Self {
        &(a * self) * &a.adjoint()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    if rows > DIM_CAP || cols > DIM_CAP {
        return Err(Error::DimensionCap(rows.max(cols)));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    }))
}

/// Kronecker product of a list of matrices, left to right.
pub fn tensor_all(ms: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::identity(1);
    for m in ms {
        acc = tensor(&acc, m)?;
    }
    Ok(acc)
}

/// Kronecker product of state vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

fn strides(labels: &[SystemLabel]) -> Vec<usize> {
    let mut s = vec![1usize; labels.len()];
    for k in (0..labels.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * labels[k + 1].dim;
    }
    s
}

/// Full-space offsets of every multi-index over the subsystems at `pos`,
/// enumerated with `pos[0]` most significant.
pub(crate) fn offsets(labels: &[SystemLabel], pos: &[usize]) -> Vec<usize> {
    let st = strides(labels);
    let mut out = vec![0usize];
    for &p in pos {
        let d = labels[p].dim;
        let mut next = Vec::with_capacity(out.len() * d);
        for base in &out {
            for k in 0..d {
                next.push(base + k * st[p]);
            }
        }
        out = next;
    }
    out
}

fn check_square(m: &ComplexMatrix, labels: &[SystemLabel]) -> Result<()> {
    let d = validate_labels(labels)?;
    if !m.is_square() || m.rows != d {
        return Err(Error::Dimension(format!(
            "{}x{} matrix does not match label dimension {d}",
            m.rows, m.cols
        )));
    }
    Ok(())
}

/// Traces out every subsystem not named in `keep`. Kept subsystems stay in
/// their original relative order.
pub fn partial_trace(m: &ComplexMatrix, labels: &[SystemLabel], keep: &[&str]) -> Result<ComplexMatrix> {
    check_square(m, labels)?;
    let mut kept = positions(labels, keep)?;
    kept.sort_unstable();
    let traced: Vec<usize> = (0..labels.len()).filter(|p| !kept.contains(p)).collect();
    let ko = offsets(labels, &kept);
    let to = offsets(labels, &traced);
    Ok(ComplexMatrix::from_fn(ko.len(), ko.len(), |i, j| {
        to.iter().map(|t| m[(ko[i] + t, ko[j] + t)]).sum()
    }))
}

/// Labels that remain after [`partial_trace`] with the same `keep`.
pub fn kept_labels(labels: &[SystemLabel], keep: &[&str]) -> Vec<SystemLabel> {
    labels
        .iter()
        .filter(|l| keep.contains(&l.name.as_str()))
        .cloned()
        .collect()
}

/// Reorders the tensor factors of `m` to `new_order`.
pub fn permute(m: &ComplexMatrix, labels: &[SystemLabel], new_order: &[&str]) -> Result<ComplexMatrix> {
    check_square(m, labels)?;
    if new_order.len() != labels.len() {
        return Err(Error::Label(format!(
            "{} names given for {} subsystems",
            new_order.len(),
            labels.len()
        )));
    }
    let pos = positions(labels, new_order)?;
    let off = offsets(labels, &pos);
    Ok(ComplexMatrix::from_fn(off.len(), off.len(), |i, j| m[(off[i], off[j])]))
}

/// Labels reordered as by [`permute`].
pub fn permuted_labels(labels: &[SystemLabel], new_order: &[&str]) -> Result<Vec<SystemLabel>> {
    new_order
        .iter()
        .map(|n| position(labels, n).map(|p| labels[p].clone()))
        .collect()
}

/// Transposes the factors named in `sys`, leaving the rest untouched.
pub fn partial_transpose(m: &ComplexMatrix, labels: &[SystemLabel], sys: &[&str]) -> Result<ComplexMatrix> {
    check_square(m, labels)?;
    let tp = positions(labels, sys)?;
    let rest: Vec<usize> = (0..labels.len()).filter(|p| !tp.contains(p)).collect();
    let ot = offsets(labels, &tp);
    let or = offsets(labels, &rest);
    let mut out = ComplexMatrix::zeros(m.rows, m.cols);
    for &a in &ot {
        for &b in &ot {
            for &r in &or {
                for &s in &or {
                    out[(b + r, a + s)] = m[(a + r, b + s)];
                }
            }
        }
    }
    Ok(out)
}

/// Lifts `op` acting on `targets` (in the given order) to the full space,
/// acting as the identity on every other factor.
pub fn embed(op: &ComplexMatrix, labels: &[SystemLabel], targets: &[&str]) -> Result<ComplexMatrix> {
    validate_labels(labels)?;
    let tp = positions(labels, targets)?;
    let dt: usize = tp.iter().map(|&p| labels[p].dim).product();
    if !op.is_square() || op.rows != dt {
        return Err(Error::Dimension(format!(
            "{}x{} operator on subsystems of dimension {dt}",
            op.rows, op.cols
        )));
    }
    let rest: Vec<usize> = (0..labels.len()).filter(|p| !tp.contains(p)).collect();
    let ot = offsets(labels, &tp);
    let or = offsets(labels, &rest);
    let d = total_dim(labels);
    let mut out = ComplexMatrix::zeros(d, d);
    for &r in &or {
        for (i, &a) in ot.iter().enumerate() {
            for (j, &b) in ot.iter().enumerate() {
                out[(a + r, b + r)] = op[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: ComplexMatrix,
}

impl Spectrum {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.col(k)
    }

    /// `U diag(f(λ)) U†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let n = u.rows();
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..vals.len())
                .filter(|&k| vals[k] != 0.0)
                .map(|k| u[(i, k)] * u[(j, k)].conj() * vals[k])
                .sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|l| l)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Hermitian eigensolver (cyclic complex Jacobi).
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.rows, m.cols)));
    }
    let n = m.rows;
    let norm = m.frobenius_norm();
    let dev = m.hermiticity_deviation();
    if dev > HERM_TOL * norm.max(1.0) {
        return Err(Error::Hermiticity(dev));
    }
    let mut a = m.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let target = 8.0 * n as f64 * f64::EPSILON * norm;
    let mut converged = n <= 1 || norm == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Convergence(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        converged = off <= target;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].re.total_cmp(&a[(x, x)].re));
    Ok(Spectrum {
        eigenvalues: order.iter().map(|&k| a[(k, k)].re).collect(),
        eigenvectors: ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]),
    })
}

fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Negligible against both diagonal entries: zero it outright.
    if mag < f64::EPSILON * 1e-3 * (app.abs().min(aqq.abs())) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let phase = apq / mag;
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // G = diag(1, conj(phase)) · [[c, s], [-s, c]]
    let gpp = C64::new(c, 0.0);
    let gpq = C64::new(s, 0.0);
    let gqp = phase.conj() * (-s);
    let gqq = phase.conj() * c;
    let n = a.rows();
    for k in 0..n {
        let (x, y) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = x * gpp + y * gqp;
        a[(k, q)] = x * gpq + y * gqq;
        let (x, y) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = x * gpp + y * gqp;
        v[(k, q)] = x * gpq + y * gqq;
    }
    for k in 0..n {
        let (x, y) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = gpp.conj() * x + gqp.conj() * y;
        a[(q, k)] = gpq.conj() * x + gqq.conj() * y;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
}

/// Spectral functions of PSD matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFn {
    Log2,
    Sqrt,
    /// `x^{-1/2}` on the support, 0 on the kernel.
    PseudoInvSqrt,
}

pub fn matrix_function(m: &ComplexMatrix, f: MatrixFn) -> Result<ComplexMatrix> {
    let spec = eig_hermitian(m)?;
    let min = spec.min();
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    Ok(match f {
        MatrixFn::Log2 => {
            if min <= PSD_TOL {
                return Err(Error::Singular(min));
            }
            spec.map(f64::log2)
        }
        MatrixFn::Sqrt => spec.map(|l| l.max(0.0).sqrt()),
        MatrixFn::PseudoInvSqrt => spec.map(|l| if l > PSD_TOL { 1.0 / l.sqrt() } else { 0.0 }),
    })
}

/// `½ Σ |λ(a − b)|`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let spec = eig_hermitian(&(a - b))?;
    Ok(0.5 * spec.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Pauli matrices, handy across the crate and in tests.
pub mod pauli {
    use super::{ComplexMatrix, C64};

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::new(
            2,
            2,
            vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        )
        .unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real_diag(&[1.0, -1.0])
    }
}

/// SWAP on two `d`-dimensional factors.
pub fn swap_matrix(d: usize) -> ComplexMatrix {
    let n = d * d;
    ComplexMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (j / d, j % d);
        if i == b * d + a {
            ONE
        } else {
            ZERO
        }
    })
}
