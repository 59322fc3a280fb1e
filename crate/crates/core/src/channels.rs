//! Linear maps between labeled spaces.
//!
//! Every [`Channel`] keeps its Choi matrix in the unnormalized, input-first
//! convention
//!
//! ```text
//! J(ℰ) = Σ_{ij} |i⟩⟨j| ⊗ ℰ(|i⟩⟨j|)
//! ```
//!
//! so row index `i * d_out + o` pairs input basis state `i` with output basis
//! state `o`. ℰ is completely positive iff `J ⪰ 0` and trace preserving iff
//! `Tr_out J = 1_in`. Non-CP maps are ordinary values; classification is a
//! query, never a construction-time check.

use crate::error::{Error, Result};
use crate::sampling;
use crate::states::{make_state, LabeledState};
use crate::tensor::{
    self, eig_hermitian, offsets, swap_matrix, total_dim, validate_labels, ComplexMatrix, SystemLabel,
    C64, I, PSD_TOL, ZERO,
};

/// CP tolerance on the smallest Choi eigenvalue.
pub const CP_TOL: f64 = 1e-8;
/// TP tolerance on `‖Tr_out J − 1‖_F`.
pub const TP_TOL: f64 = 1e-8;
/// Tolerance on `‖V†V − 1‖_F` for isometries.
pub const ISOMETRY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum ChannelRepr {
    Kraus(Vec<ComplexMatrix>),
    Choi(ComplexMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    in_labels: Vec<SystemLabel>,
    out_labels: Vec<SystemLabel>,
    kraus: Option<Vec<ComplexMatrix>>,
    choi: ComplexMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelReport {
    pub is_cp: bool,
    pub is_tp: bool,
    pub min_choi_eig: f64,
    pub tp_residual: f64,
}

impl ChannelReport {
    pub fn is_cptp(&self) -> bool {
        self.is_cp && self.is_tp
    }
}

pub fn make_channel(repr: ChannelRepr, in_labels: Vec<SystemLabel>, out_labels: Vec<SystemLabel>) -> Result<Channel> {
    let din = validate_labels(&in_labels)?;
    let dout = validate_labels(&out_labels)?;
    match repr {
        ChannelRepr::Kraus(ks) => {
            if ks.is_empty() {
                return Err(Error::Dimension("empty Kraus list".into()));
            }
            if let Some(k) = ks.iter().find(|k| k.rows() != dout || k.cols() != din) {
                return Err(Error::Dimension(format!(
                    "Kraus operator is {}x{}, expected {dout}x{din}",
                    k.rows(),
                    k.cols()
                )));
            }
            let choi = choi_from_kraus(&ks, din, dout)?;
            Ok(Channel {
                in_labels,
                out_labels,
                kraus: Some(ks),
                choi,
            })
        }
        ChannelRepr::Choi(j) => {
            let n = din * dout;
            if !j.is_square() || j.rows() != n {
                return Err(Error::Dimension(format!(
                    "Choi matrix is {}x{}, expected {n}x{n}",
                    j.rows(),
                    j.cols()
                )));
            }
            Ok(Channel {
                in_labels,
                out_labels,
                kraus: None,
                choi: j,
            })
        }
    }
}

fn choi_from_kraus(ks: &[ComplexMatrix], din: usize, dout: usize) -> Result<ComplexMatrix> {
    let n = din * dout;
    if n > tensor::DIM_CAP {
        return Err(Error::DimensionCap(n));
    }
    let mut j = ComplexMatrix::zeros(n, n);
    for k in ks {
        let v: Vec<C64> = (0..n).map(|a| k[(a % dout, a / dout)]).collect();
        j += &ComplexMatrix::projector(&v);
    }
    Ok(j)
}

/// Applies `f` to every `inner × inner` block of `m`.
fn blockwise(m: &ComplexMatrix, inner: usize, inner_out: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let outer = m.rows() / inner;
    let mut out = ComplexMatrix::zeros(outer * inner_out, outer * inner_out);
    for a in 0..outer {
        for b in 0..outer {
            let block = ComplexMatrix::from_fn(inner, inner, |i, j| m[(a * inner + i, b * inner + j)]);
            let mapped = f(&block);
            for i in 0..inner_out {
                for j in 0..inner_out {
                    out[(a * inner_out + i, b * inner_out + j)] = mapped[(i, j)];
                }
            }
        }
    }
    out
}

impl Channel {
    pub fn from_kraus(ks: Vec<ComplexMatrix>, in_labels: Vec<SystemLabel>, out_labels: Vec<SystemLabel>) -> Result<Self> {
        make_channel(ChannelRepr::Kraus(ks), in_labels, out_labels)
    }

    pub fn from_choi(j: ComplexMatrix, in_labels: Vec<SystemLabel>, out_labels: Vec<SystemLabel>) -> Result<Self> {
        make_channel(ChannelRepr::Choi(j), in_labels, out_labels)
    }

    pub fn identity(labels: Vec<SystemLabel>) -> Result<Self> {
        let d = validate_labels(&labels)?;
        Self::from_kraus(vec![ComplexMatrix::identity(d)], labels.clone(), labels)
    }

    /// Transposition in the computational basis; positive but not CP.
    pub fn transpose(labels: Vec<SystemLabel>) -> Result<Self> {
        let d = validate_labels(&labels)?;
        Self::from_choi(swap_matrix(d), labels.clone(), labels)
    }

    /// `X ↦ Tr[X] · 1/d_out`.
    pub fn completely_depolarizing(in_labels: Vec<SystemLabel>, out_labels: Vec<SystemLabel>) -> Result<Self> {
        let din = validate_labels(&in_labels)?;
        let dout = validate_labels(&out_labels)?;
        let j = ComplexMatrix::identity(din * dout).scale_real(1.0 / dout as f64);
        Self::from_choi(j, in_labels, out_labels)
    }

    /// `X ↦ X ⊗ σ`, with `σ`'s labels appended after the input labels.
    pub fn append_state(in_labels: Vec<SystemLabel>, sigma: &LabeledState) -> Result<Self> {
        let din = validate_labels(&in_labels)?;
        let mut out_labels = in_labels.clone();
        out_labels.extend(sigma.labels().iter().cloned());
        validate_labels(&out_labels)?;
        let spec = eig_hermitian(sigma.matrix())?;
        let id = ComplexMatrix::identity(din);
        let mut ks = Vec::new();
        for (k, &mu) in spec.eigenvalues.iter().enumerate() {
            if mu > PSD_TOL {
                let col = ComplexMatrix::column(&spec.vector(k)).scale_real(mu.sqrt());
                ks.push(tensor::tensor(&id, &col)?);
            }
        }
        Self::from_kraus(ks, in_labels, out_labels)
    }

    /// Partial trace keeping `keep`, as a channel.
    pub fn discard(in_labels: Vec<SystemLabel>, keep: &[&str]) -> Result<Self> {
        let v = Isometry::identity(in_labels)?;
        let drop: Vec<&str> = v
            .out_labels
            .iter()
            .map(|l| l.name.as_str())
            .filter(|n| !keep.contains(n))
            .collect();
        isometry_channel(&v, &drop)
    }

    pub fn in_labels(&self) -> &[SystemLabel] {
        &self.in_labels
    }

    pub fn out_labels(&self) -> &[SystemLabel] {
        &self.out_labels
    }

    pub fn d_in(&self) -> usize {
        total_dim(&self.in_labels)
    }

    pub fn d_out(&self) -> usize {
        total_dim(&self.out_labels)
    }

    /// The stored Kraus list, if the channel was built from one.
    pub fn kraus_ops(&self) -> Option<&[ComplexMatrix]> {
        self.kraus.as_deref()
    }

    /// Kraus operators; extracted from the Choi matrix when not stored.
    /// Only CP maps have a Kraus form.
    pub fn kraus(&self) -> Result<Vec<ComplexMatrix>> {
        if let Some(ks) = &self.kraus {
            return Ok(ks.clone());
        }
        kraus_from_choi(&self.choi, self.d_in(), self.d_out())
    }

    /// `ℰ(X)` for an operator `X` on the input space.
    pub fn map_operator(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let (din, dout) = (self.d_in(), self.d_out());
        assert_eq!((x.rows(), x.cols()), (din, din), "operator does not match channel input");
        match &self.kraus {
            Some(ks) => {
                let mut out = ComplexMatrix::zeros(dout, dout);
                for k in ks {
                    out += &x.conjugate_by(k);
                }
                out
            }
            None => {
                let mut out = ComplexMatrix::zeros(dout, dout);
                for i in 0..din {
                    for j in 0..din {
                        let w = x[(i, j)];
                        if w == ZERO {
                            continue;
                        }
                        for o in 0..dout {
                            for p in 0..dout {
                                out[(o, p)] += w * self.choi[(i * dout + o, j * dout + p)];
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

fn kraus_from_choi(j: &ComplexMatrix, din: usize, dout: usize) -> Result<Vec<ComplexMatrix>> {
    let spec = eig_hermitian(j)?;
    if spec.min() < -CP_TOL {
        return Err(Error::NotPsd(spec.min()));
    }
    let mut ks = Vec::new();
    for (k, &l) in spec.eigenvalues.iter().enumerate() {
        if l > PSD_TOL {
            let v = spec.vector(k);
            let s = l.sqrt();
            ks.push(ComplexMatrix::from_fn(dout, din, |o, i| v[i * dout + o] * s));
        }
    }
    if ks.is_empty() {
        ks.push(ComplexMatrix::zeros(dout, din));
    }
    Ok(ks)
}

pub fn choi(c: &Channel) -> &ComplexMatrix {
    &c.choi
}

pub fn classify(c: &Channel) -> Result<ChannelReport> {
    let min_choi_eig = eig_hermitian(&c.choi)?.min();
    let (din, dout) = (c.d_in(), c.d_out());
    let marg = ComplexMatrix::from_fn(din, din, |i, j| (0..dout).map(|o| c.choi[(i * dout + o, j * dout + o)]).sum());
    let tp_residual = marg.distance(&ComplexMatrix::identity(din));
    Ok(ChannelReport {
        is_cp: min_choi_eig >= -CP_TOL,
        is_tp: tp_residual <= TP_TOL,
        min_choi_eig,
        tp_residual,
    })
}

/// Applies `c` to the `target` factors of an operator on `labels`, returning
/// the image and its labels. The output factors take the place of the first
/// target; other factors keep their order. No positivity or trace checks.
pub fn apply_operator(
    c: &Channel,
    m: &ComplexMatrix,
    labels: &[SystemLabel],
    target: &[&str],
) -> Result<(ComplexMatrix, Vec<SystemLabel>)> {
    let tp = tensor::positions(labels, target)?;
    if tp.len() != c.in_labels.len() {
        return Err(Error::Label(format!(
            "{} target systems for a channel on {} systems",
            tp.len(),
            c.in_labels.len()
        )));
    }
    for (&p, l) in tp.iter().zip(&c.in_labels) {
        if labels[p].name != l.name {
            return Err(Error::Label(format!("target {} does not match channel input {}", labels[p].name, l.name)));
        }
        if labels[p].dim != l.dim {
            return Err(Error::Dimension(format!(
                "system {} has dimension {}, channel expects {}",
                l.name, labels[p].dim, l.dim
            )));
        }
    }
    let rest: Vec<usize> = (0..labels.len()).filter(|p| !tp.contains(p)).collect();
    let mut order: Vec<&str> = rest.iter().map(|&p| labels[p].name.as_str()).collect();
    order.extend(target);
    let arranged = tensor::permute(m, labels, &order)?;
    let mapped = blockwise(&arranged, c.d_in(), c.d_out(), |b| c.map_operator(b));

    let mut mid_labels: Vec<SystemLabel> = rest.iter().map(|&p| labels[p].clone()).collect();
    mid_labels.extend(c.out_labels.iter().cloned());
    validate_labels(&mid_labels)?;
    let first = *tp.iter().min().unwrap_or(&0);
    let before = rest.iter().filter(|&&p| p < first).count();
    let mut final_order: Vec<&str> = rest[..before].iter().map(|&p| labels[p].name.as_str()).collect();
    final_order.extend(c.out_labels.iter().map(|l| l.name.as_str()));
    final_order.extend(rest[before..].iter().map(|&p| labels[p].name.as_str()));
    let out = tensor::permute(&mapped, &mid_labels, &final_order)?;
    let out_labels = tensor::permuted_labels(&mid_labels, &final_order)?;
    Ok((out, out_labels))
}

/// `(id ⊗ c)(s)` on the `target` subsystems. A map that does not produce a
/// state (non-CP, or non-TP) surfaces as `NotPsd` / `NotUnitTrace`.
pub fn apply(c: &Channel, s: &LabeledState, target: &[&str]) -> Result<LabeledState> {
    let (m, labels) = apply_operator(c, s.matrix(), s.labels(), target)?;
    make_state(m, labels)
}

/// `f ∘ g` (apply `g` first).
pub fn compose(f: &Channel, g: &Channel) -> Result<Channel> {
    let dims = |ls: &[SystemLabel]| ls.iter().map(|l| l.dim).collect::<Vec<_>>();
    if dims(&g.out_labels) != dims(&f.in_labels) {
        return Err(Error::Dimension(format!(
            "cannot compose: output dims {:?} vs input dims {:?}",
            dims(&g.out_labels),
            dims(&f.in_labels)
        )));
    }
    if let (Some(fk), Some(gk)) = (&f.kraus, &g.kraus) {
        let ks = fk.iter().flat_map(|a| gk.iter().map(move |b| a * b)).collect();
        return Channel::from_kraus(ks, g.in_labels.clone(), f.out_labels.clone());
    }
    let j = blockwise(&g.choi, g.d_out(), f.d_out(), |b| f.map_operator(b));
    Channel::from_choi(j, g.in_labels.clone(), f.out_labels.clone())
}

/// An isometry `V: in → out` with `V†V = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Isometry {
    in_labels: Vec<SystemLabel>,
    out_labels: Vec<SystemLabel>,
    matrix: ComplexMatrix,
}

impl Isometry {
    pub fn new(matrix: ComplexMatrix, in_labels: Vec<SystemLabel>, out_labels: Vec<SystemLabel>) -> Result<Self> {
        let din = validate_labels(&in_labels)?;
        let dout = validate_labels(&out_labels)?;
        if matrix.rows() != dout || matrix.cols() != din {
            return Err(Error::Dimension(format!(
                "isometry matrix is {}x{}, expected {dout}x{din}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        if dout < din {
            return Err(Error::Dimension(format!("output dimension {dout} below input {din}")));
        }
        let dev = (&matrix.adjoint() * &matrix).distance(&ComplexMatrix::identity(din));
        if dev > ISOMETRY_TOL {
            return Err(Error::NotIsometry(dev));
        }
        Ok(Isometry {
            in_labels,
            out_labels,
            matrix,
        })
    }

    pub fn identity(labels: Vec<SystemLabel>) -> Result<Self> {
        let d = validate_labels(&labels)?;
        Self::new(ComplexMatrix::identity(d), labels.clone(), labels)
    }

    /// `|ψ⟩ ↦ |ψ⟩ ⊗ |φ⟩` with `|φ⟩` on the appended systems.
    pub fn append_ket(in_labels: Vec<SystemLabel>, ket: &[C64], ket_labels: Vec<SystemLabel>) -> Result<Self> {
        let din = validate_labels(&in_labels)?;
        if ket.len() != total_dim(&ket_labels) {
            return Err(Error::Dimension("ancilla ket does not match its labels".into()));
        }
        let m = tensor::tensor(&ComplexMatrix::identity(din), &ComplexMatrix::column(ket))?;
        let mut out = in_labels.clone();
        out.extend(ket_labels);
        Self::new(m, in_labels, out)
    }

    /// SWAP of two equal-dimension systems `a`, `b`; output labels keep the
    /// input names.
    pub fn swap(a: SystemLabel, b: SystemLabel) -> Result<Self> {
        if a.dim != b.dim {
            return Err(Error::Dimension("SWAP needs equal dimensions".into()));
        }
        let labels = vec![a.clone(), b];
        Self::new(swap_matrix(a.dim), labels.clone(), labels)
    }

    /// Same matrix, new output labels (dimensions must agree).
    pub fn with_out_labels(&self, out_labels: Vec<SystemLabel>) -> Result<Self> {
        Self::new(self.matrix.clone(), self.in_labels.clone(), out_labels)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn in_labels(&self) -> &[SystemLabel] {
        &self.in_labels
    }

    pub fn out_labels(&self) -> &[SystemLabel] {
        &self.out_labels
    }

    /// `X ↦ V X V†` as a channel with no discarded output.
    pub fn channel(&self) -> Result<Channel> {
        isometry_channel(self, &[])
    }
}

/// `X ↦ Tr_discard[V X V†]`.
pub fn isometry_channel(v: &Isometry, discard: &[&str]) -> Result<Channel> {
    let dp = tensor::positions(&v.out_labels, discard)?;
    let keep: Vec<usize> = (0..v.out_labels.len()).filter(|p| !dp.contains(p)).collect();
    let ko = offsets(&v.out_labels, &keep);
    let dro = offsets(&v.out_labels, &dp);
    let din = v.matrix.cols();
    let ks = dro
        .iter()
        .map(|&t| ComplexMatrix::from_fn(ko.len(), din, |i, c| v.matrix[(ko[i] + t, c)]))
        .collect();
    let out_labels = keep.iter().map(|&p| v.out_labels[p].clone()).collect();
    Channel::from_kraus(ks, v.in_labels.clone(), out_labels)
}

/// Haar-random isometry from the QR factorization of a seeded complex
/// Gaussian matrix, with the phases fixed so that `R` has a positive diagonal.
pub fn random_isometry(in_labels: Vec<SystemLabel>, out_labels: Vec<SystemLabel>, seed: u64) -> Result<Isometry> {
    let din = validate_labels(&in_labels)?;
    let dout = validate_labels(&out_labels)?;
    if dout < din {
        return Err(Error::Dimension(format!("output dimension {dout} below input {din}")));
    }
    let g = sampling::ginibre(dout, din, &mut sampling::rng(seed));
    Isometry::new(orthonormalize(&g), in_labels, out_labels)
}

/// Modified Gram–Schmidt with one reorthogonalization pass. Each column is
/// normalized by a positive real, so this is the `Q` of the QR factorization
/// with positive `diag(R)`.
fn orthonormalize(g: &ComplexMatrix) -> ComplexMatrix {
    let (n, k) = (g.rows(), g.cols());
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = g.col(j);
        for _ in 0..2 {
            for q in &cols {
                let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= proj * y;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / norm).collect());
    }
    ComplexMatrix::from_fn(n, k, |i, j| cols[j][i])
}

/// `U(θ) = cos θ · 1 + i sin θ · SWAP` on two equal-dimension systems.
pub fn partial_swap(theta: f64, a: SystemLabel, b: SystemLabel) -> Result<Isometry> {
    if a.dim != b.dim {
        return Err(Error::Dimension(format!("partial swap needs equal dimensions, got {} and {}", a.dim, b.dim)));
    }
    let d = a.dim;
    let sw = swap_matrix(d);
    let u = &ComplexMatrix::identity(d * d).scale_real(theta.cos()) + &sw.scale(I * theta.sin());
    let labels = vec![a, b];
    Isometry::new(u, labels.clone(), labels)
}

/// Measure-and-prepare map `X ↦ Σᵢ ⟨i|X|i⟩ ωᵢ` from a flag register of
/// dimension `states.len()`.
pub fn prepare_controlled(flag: SystemLabel, states: &[LabeledState]) -> Result<Channel> {
    let first = states.first().ok_or_else(|| Error::Dimension("no states to prepare".into()))?;
    if flag.dim != states.len() {
        return Err(Error::Dimension(format!(
            "flag of dimension {} for {} states",
            flag.dim,
            states.len()
        )));
    }
    let out_labels = first.labels().to_vec();
    let mut ks = Vec::new();
    for (i, s) in states.iter().enumerate() {
        if s.labels() != out_labels.as_slice() {
            return Err(Error::Label("prepared states must share labels".into()));
        }
        let spec = eig_hermitian(s.matrix())?;
        let bra = ComplexMatrix::basis(flag.dim, i);
        for (k, &mu) in spec.eigenvalues.iter().enumerate() {
            if mu > PSD_TOL {
                let ket: Vec<C64> = spec.vector(k).iter().map(|z| z * mu.sqrt()).collect();
                ks.push(ComplexMatrix::outer(&ket, &bra));
            }
        }
    }
    Channel::from_kraus(ks, vec![flag], out_labels)
}

/// `Tr_{discard}` of `V ρ V†` for `V` acting on the `targets` of `s`.
pub fn evolve(v: &Isometry, s: &LabeledState, discard: &[&str]) -> Result<LabeledState> {
    let c = isometry_channel(v, discard)?;
    let target: Vec<&str> = v.in_labels.iter().map(|l| l.name.as_str()).collect();
    apply(&c, s, &target)
}
