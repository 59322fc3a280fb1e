//! Markov states and the reduced dynamics they admit.
//!
//! A tripartite state `ρ_RQE` is Markov (`R − Q − E`) when `I(R;E|Q) = 0`,
//! equivalently when the Petz map reconstructs it from `ρ_RQ`. For such states
//! every joint isometry on `QE` induces a CPTP map on `Q`; otherwise embedding
//! `QE` into a single output system violates data processing by exactly the
//! conditional mutual information.

use serde::{Deserialize, Serialize};

use crate::channels::{self, apply, apply_operator, classify, compose, isometry_channel, Channel, Isometry};
use crate::error::{Error, Result};
use crate::states::{cmi, mutual_information, LabeledState};
use crate::tensor::{
    self, eig_hermitian, matrix_function, validate_labels, ComplexMatrix, MatrixFn, SystemLabel, PSD_TOL,
};

/// Default threshold on `I(R;E|Q)` in bits.
pub const MARKOV_TOL: f64 = 1e-8;
/// Allowed Frobenius deviation between `Tr_E ρ_QE` and the given `ρ_Q`.
pub const MARGINAL_TOL: f64 = 1e-8;
/// Petz reconstruction distance expected of a Markov state.
pub const RECOVERY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovVerdict {
    pub cmi_value: f64,
    pub is_markov: bool,
    pub tolerance: f64,
    /// Trace distance between `ρ_RQE` and its Petz reconstruction; computed
    /// only for states judged Markov.
    pub recovery_distance: Option<f64>,
}

impl MarkovVerdict {
    /// Whether the Petz reconstruction agrees with the entropy verdict.
    pub fn recovery_consistent(&self) -> bool {
        self.recovery_distance.is_none_or(|d| d <= RECOVERY_TOL)
    }
}

/// Transpose channel `Q → QE`:
/// `𝓡(X) = ρ_QE^{1/2} (ρ_Q^{-1/2} X ρ_Q^{-1/2} ⊗ 1_E) ρ_QE^{1/2}`.
///
/// The inverse square root is taken on the support of `ρ_Q`; inputs on its
/// kernel are sent to `ρ_QE`, which makes the map trace preserving on the
/// whole space. Output labels are those of `ρ_Q` followed by the remaining
/// labels of `ρ_QE`.
pub fn petz_recovery(rho_qe: &LabeledState, rho_q: &LabeledState) -> Result<Channel> {
    let q_names = rho_q.names();
    let q_pos = tensor::positions(rho_qe.labels(), &q_names)?;
    for (p, l) in q_pos.iter().zip(rho_q.labels()) {
        if rho_qe.labels()[*p].dim != l.dim {
            return Err(Error::Dimension(format!("system {} has mismatched dimensions", l.name)));
        }
    }
    let e_names: Vec<&str> = rho_qe.names().into_iter().filter(|n| !q_names.contains(n)).collect();
    let order: Vec<&str> = q_names.iter().chain(&e_names).copied().collect();
    let joint = rho_qe.permuted(&order)?;
    let dev = joint.marginal(&q_names)?.matrix().distance(rho_q.matrix());
    if dev > MARGINAL_TOL {
        return Err(Error::MarginalMismatch(dev));
    }

    let dq = rho_q.dim();
    let de = joint.dim() / dq;
    let sqrt_qe = matrix_function(joint.matrix(), MatrixFn::Sqrt)?;
    let b = matrix_function(rho_q.matrix(), MatrixFn::PseudoInvSqrt)?;
    let mut kraus = Vec::with_capacity(de);
    for k in 0..de {
        let lift = tensor::tensor(&b, &ComplexMatrix::column(&ComplexMatrix::basis(de, k)))?;
        kraus.push(&sqrt_qe * &lift);
    }

    let q_spec = eig_hermitian(rho_q.matrix())?;
    let qe_spec = eig_hermitian(joint.matrix())?;
    for (m, &lq) in q_spec.eigenvalues.iter().enumerate() {
        if lq > PSD_TOL {
            continue;
        }
        let u = q_spec.vector(m);
        for (l, &mu) in qe_spec.eigenvalues.iter().enumerate() {
            if mu > PSD_TOL {
                let w: Vec<_> = qe_spec.vector(l).iter().map(|z| z * mu.sqrt()).collect();
                kraus.push(ComplexMatrix::outer(&w, &u));
            }
        }
    }
    Channel::from_kraus(kraus, rho_q.labels().to_vec(), joint.labels().to_vec())
}

/// `(id_R ⊗ 𝓡)(ρ_RQ)` compared with `ρ_RQE`, as a trace distance.
pub fn recovery_distance(rho: &LabeledState, r: &str, q: &str, e: &str) -> Result<f64> {
    let petz = petz_recovery(&rho.marginal(&[q, e])?, &rho.marginal(&[q])?)?;
    let rebuilt = apply(&petz, &rho.marginal(&[r, q])?, &[q])?;
    let target = rho.marginal(&[r, q, e])?.permuted(&rebuilt.names())?;
    rebuilt.trace_distance(&target)
}

pub fn is_markov(rho: &LabeledState, r: &str, q: &str, e: &str) -> Result<MarkovVerdict> {
    is_markov_with_tol(rho, r, q, e, MARKOV_TOL)
}

pub fn is_markov_with_tol(rho: &LabeledState, r: &str, q: &str, e: &str, tol: f64) -> Result<MarkovVerdict> {
    let cmi_value = cmi(rho, r, q, e)?;
    let is_markov = cmi_value <= tol;
    let recovery_distance = if is_markov {
        let d = recovery_distance(rho, r, q, e)?;
        if d > RECOVERY_TOL {
            log::warn!("cmi {cmi_value:.3e} within tolerance but Petz reconstruction is off by {d:.3e}");
        }
        Some(d)
    } else {
        None
    };
    Ok(MarkovVerdict {
        cmi_value,
        is_markov,
        tolerance: tol,
        recovery_distance,
    })
}

/// The roles a joint isometry assigns to the labels of a tripartite state:
/// inputs are `[Q, E]`, the last output is the discarded `E'`, and `R` is the
/// one remaining label of the state.
struct Roles<'a> {
    r: &'a str,
    q: &'a str,
    e: &'a str,
    e_out: &'a str,
}

fn roles<'a>(rho: &'a LabeledState, v: &'a Isometry) -> Result<Roles<'a>> {
    let ins = v.in_labels();
    if ins.len() != 2 {
        return Err(Error::Label(format!(
            "isometry must act on two systems [Q, E], got {}",
            ins.len()
        )));
    }
    if v.out_labels().len() < 2 {
        return Err(Error::Label("isometry needs outputs [Q', E']".into()));
    }
    if rho.labels().len() != 3 {
        return Err(Error::Label(format!("expected a tripartite state, got {} systems", rho.labels().len())));
    }
    for l in ins {
        if rho.label(&l.name)?.dim != l.dim {
            return Err(Error::Dimension(format!("system {} has mismatched dimensions", l.name)));
        }
    }
    let r = rho
        .labels()
        .iter()
        .map(|l| l.name.as_str())
        .find(|n| *n != ins[0].name && *n != ins[1].name)
        .ok_or_else(|| Error::Label("no reference system left".into()))?;
    Ok(Roles {
        r,
        q: &ins[0].name,
        e: &ins[1].name,
        e_out: &v.out_labels().last().expect("checked above").name,
    })
}

pub fn reduced_dynamics(rho: &LabeledState, v: &Isometry) -> Result<Channel> {
    reduced_dynamics_with_tol(rho, v, MARKOV_TOL)
}

/// `ℰ = Tr_{E'} ∘ Ad_V ∘ 𝓡`, the CPTP reduced map on `Q` of a Markov state.
pub fn reduced_dynamics_with_tol(rho: &LabeledState, v: &Isometry, tol: f64) -> Result<Channel> {
    let ro = roles(rho, v)?;
    let value = cmi(rho, ro.r, ro.q, ro.e)?;
    if value > tol {
        return Err(Error::NotMarkov { cmi: value });
    }
    let petz = petz_recovery(&rho.marginal(&[ro.q, ro.e])?, &rho.marginal(&[ro.q])?)?;
    compose(&isometry_channel(v, &[ro.e_out])?, &petz)
}

/// `Tr_{E'}[V ρ V†]` against `(id ⊗ c)(ρ_RQ)`. Labels of the two sides are
/// matched by position, so `c` may name its output freely; `c` need not be
/// CP for the distance to be defined.
pub fn verify_reduction(rho: &LabeledState, v: &Isometry, c: &Channel, tol: f64) -> Result<(bool, f64)> {
    let ro = roles(rho, v)?;
    let (qe, r, q) = ([ro.q, ro.e], ro.r, ro.q);
    let (joint, joint_labels) = apply_operator(&isometry_channel(v, &[ro.e_out])?, rho.matrix(), rho.labels(), &qe)?;
    let rq = rho.marginal(&[r, q])?;
    let (local, local_labels) = apply_operator(c, rq.matrix(), rq.labels(), &[q])?;
    let dims = |ls: &[SystemLabel]| ls.iter().map(|l| l.dim).collect::<Vec<_>>();
    if dims(&joint_labels) != dims(&local_labels) {
        return Err(Error::Dimension(format!(
            "reduced output dims {:?} vs channel output dims {:?}",
            dims(&joint_labels),
            dims(&local_labels)
        )));
    }
    let d = tensor::trace_distance(&joint.hermitian_part(), &local.hermitian_part())?;
    Ok((d <= tol, d))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpiGap {
    /// `I(R;Q)_ρ − I(R;Q')_σ` in bits.
    pub gap: f64,
    /// False when the channel is not CPTP, in which case the inequality need
    /// not hold.
    pub channel_cptp: bool,
}

/// Data-processing gap of `c` applied to the `c.in_labels()` part of
/// `rho_rq`; every other system counts as `R`.
pub fn dpi_gap(rho_rq: &LabeledState, c: &Channel) -> Result<DpiGap> {
    let q: Vec<&str> = c.in_labels().iter().map(|l| l.name.as_str()).collect();
    let r: Vec<&str> = rho_rq.names().into_iter().filter(|n| !q.contains(n)).collect();
    let report = classify(c)?;
    if !report.is_cptp() {
        log::warn!(
            "data processing presumes a CPTP map (min Choi eigenvalue {:.3e}, TP residual {:.3e})",
            report.min_choi_eig,
            report.tp_residual
        );
    }
    let before = mutual_information(rho_rq, &r, &q)?;
    let sigma = match apply(c, rho_rq, &q) {
        Err(Error::NotPsd(m)) => return Err(Error::NotAState(m)),
        Err(Error::NotUnitTrace(t)) => return Err(Error::NotAState(t)),
        other => other?,
    };
    let q_out: Vec<&str> = c.out_labels().iter().map(|l| l.name.as_str()).collect();
    let after = mutual_information(&sigma, &r, &q_out)?;
    Ok(DpiGap {
        gap: before - after,
        channel_cptp: report.is_cptp(),
    })
}

/// Embedding `QE` into a single output `Q'` with a trivial `E'`.
#[derive(Clone, Debug, PartialEq)]
pub struct DpiWitness {
    pub embedding: Isometry,
    /// `I(R;Q')_σ − I(R;Q)_ρ`, the amount by which data processing fails for
    /// the reduced map `Q → Q'`. Equals `I(R;E|Q)`.
    pub gap: f64,
}

impl DpiWitness {
    pub fn violates(&self, tol: f64) -> bool {
        self.gap > tol
    }
}

/// Applies the embedding `V: QE → Q'E'` (`Q' = QE`, `dim E' = 1`) and
/// measures the resulting data-processing violation.
pub fn embedding_witness(rho: &LabeledState, r: &str, q: &str, e: &str) -> Result<DpiWitness> {
    if r == q || q == e || r == e {
        return Err(Error::Label(format!("labels {r}, {q}, {e} must be distinct")));
    }
    let rho = rho.marginal(&[r, q, e])?;
    let (ql, el) = (rho.label(q)?.clone(), rho.label(e)?.clone());
    let q_out = SystemLabel::new(format!("{q}'"), ql.dim * el.dim);
    let e_out = SystemLabel::new(format!("{e}'"), 1);
    let outs = vec![q_out.clone(), e_out.clone()];
    validate_labels(&[rho.labels(), &outs[..]].concat()).map_err(|_| {
        Error::Label(format!("output names {} / {} collide with the state", q_out.name, e_out.name))
    })?;
    let embedding = Isometry::new(ComplexMatrix::identity(ql.dim * el.dim), vec![ql, el], outs)?;
    let sigma = channels::evolve(&embedding, &rho, &[&e_out.name])?;
    let gap = mutual_information(&sigma, &[r], &[&q_out.name])? - mutual_information(&rho, &[r], &[q])?;
    Ok(DpiWitness { embedding, gap })
}
