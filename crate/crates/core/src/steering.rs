//! Steering from a reference system, tomographic frames on it, and the
//! canonical tripartite state of a family of `QE` states.
//!
//! Measuring `P` on `R` steers `ρ_RQE` to `Tr_R[(P ⊗ 1) ρ] / Tr[(P ⊗ 1) ρ]`.
//! With a tomographically complete frame `{Pᵢ}` and its duals `{Lᵢ}`,
//! `ρ_RQE = Σᵢ Lᵢ ⊗ Tr_R[(Pᵢ ⊗ 1) ρ]`, so the steered states determine the
//! whole tripartite state.

use std::fmt;

use crate::channels::{self, classify, Channel, Isometry};
use crate::error::{Error, Result};
use crate::markov::{self, embedding_witness, is_markov, DpiWitness};
use crate::states::{make_state, LabeledState};
use crate::tensor::{self, eig_hermitian, validate_labels, ComplexMatrix, SystemLabel, C64, PSD_TOL};

/// Steering outcomes less likely than this are refused.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
/// Relative threshold on the smallest Gram eigenvalue.
pub const GRAM_TOL: f64 = 1e-10;
/// Allowed error when duals reconstruct the matrix units.
pub const DUAL_TOL: f64 = 1e-9;
/// Name of the reference system in canonical tripartite states.
pub const REFERENCE: &str = "R";

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    elements: Vec<ComplexMatrix>,
}

impl Frame {
    /// Checks that every element is a PSD matrix of a common dimension.
    /// Completeness is left to [`dual_frame`].
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let d = elements
            .first()
            .ok_or_else(|| Error::Dimension("empty frame".into()))?
            .rows();
        for p in &elements {
            check_effect(p, d)?;
        }
        Ok(Frame { elements })
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].rows()
    }
}

fn check_effect(p: &ComplexMatrix, d: usize) -> Result<()> {
    if !p.is_square() || p.rows() != d {
        return Err(Error::Dimension(format!("frame element is {}x{}, expected {d}x{d}", p.rows(), p.cols())));
    }
    let dev = p.hermiticity_deviation();
    if dev > tensor::HERM_TOL {
        return Err(Error::Hermiticity(dev));
    }
    let min = eig_hermitian(&p.hermitian_part())?.min();
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Projectors onto `|k⟩`, `(|j⟩+|k⟩)/√2` and `(|j⟩+i|k⟩)/√2` for `j < k`:
/// `d²` rank-one elements spanning all operators on `C^d`.
pub fn default_frame(d: usize) -> Result<Frame> {
    if d == 0 {
        return Err(Error::Dimension("frame dimension must be positive".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements: Vec<ComplexMatrix> = (0..d)
        .map(|k| ComplexMatrix::projector(&ComplexMatrix::basis(d, k)))
        .collect();
    for j in 0..d {
        for k in j + 1..d {
            for phase in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[j] = C64::new(s, 0.0);
                v[k] = phase * s;
                elements.push(ComplexMatrix::projector(&v));
            }
        }
    }
    Frame::new(elements)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualFrame {
    elements: Vec<ComplexMatrix>,
}

impl DualFrame {
    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// `Σᵢ Tr[X Pᵢ] Lᵢ`.
    pub fn expand(&self, frame: &Frame, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(x.rows(), x.cols());
        for (p, l) in frame.elements.iter().zip(&self.elements) {
            out += &l.scale((x * p).trace());
        }
        out
    }
}

/// `Lᵢ = Σⱼ (G⁻¹)ᵢⱼ Pⱼ` with `Gⱼₖ = Tr[Pⱼ Pₖ]`.
pub fn dual_frame(f: &Frame) -> Result<DualFrame> {
    let duals = DualFrame {
        elements: gram_duals(&f.elements)?,
    };
    let d = f.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let unit = ComplexMatrix::outer(&ComplexMatrix::basis(d, i), &ComplexMatrix::basis(d, j));
            worst = worst.max(duals.expand(f, &unit).distance(&unit));
        }
    }
    if worst > DUAL_TOL {
        return Err(Error::SingularGram(0.0));
    }
    Ok(duals)
}

/// Gram-inverse duals of any list of Hermitian operators.
pub(crate) fn gram_duals(elements: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let n = elements.len();
    let d = elements.first().map_or(0, |p| p.rows());
    if n != d * d {
        // Fewer than d² elements cannot span; more cannot be independent.
        return Err(Error::SingularGram(0.0));
    }
    let gram = ComplexMatrix::from_fn(n, n, |j, k| C64::new((&elements[j] * &elements[k]).trace().re, 0.0));
    let spec = eig_hermitian(&gram)?;
    let max = spec.eigenvalues[0];
    let min = spec.min();
    if min <= GRAM_TOL * max {
        return Err(Error::SingularGram(min));
    }
    let inv = spec.map(|l| 1.0 / l);
    Ok((0..n)
        .map(|i| {
            let mut l = ComplexMatrix::zeros(d, d);
            for (j, p) in elements.iter().enumerate() {
                l += &p.scale_real(inv[(i, j)].re);
            }
            l.hermitian_part()
        })
        .collect())
}

/// `Tr[(P ⊗ 1) ρ]` and `Tr_R[(P ⊗ 1) ρ]` on the remaining systems, in order.
pub fn steer_unnormalized(rho: &LabeledState, r: &str, p: &ComplexMatrix) -> Result<(f64, ComplexMatrix)> {
    let rl = rho.label(r)?;
    check_effect(p, rl.dim)?;
    let rest: Vec<&str> = rho.names().into_iter().filter(|n| *n != r).collect();
    let lifted = tensor::embed(&p.hermitian_part(), rho.labels(), &[r])?;
    let prod = &lifted * rho.matrix();
    let op = tensor::partial_trace(&prod, rho.labels(), &rest)?.hermitian_part();
    Ok((prod.trace().re, op))
}

/// The state on `keep` steered by measuring `p` on `r`.
pub fn steer(rho: &LabeledState, r: &str, p: &ComplexMatrix, keep: &[&str]) -> Result<LabeledState> {
    if keep.contains(&r) {
        return Err(Error::Label(format!("cannot keep the measured system {r}")));
    }
    let (prob, op) = steer_unnormalized(rho, r, p)?;
    if prob <= PROBABILITY_FLOOR {
        return Err(Error::ZeroProbability(prob));
    }
    let labels: Vec<SystemLabel> = rho.labels().iter().filter(|l| l.name != r).cloned().collect();
    let kept = tensor::partial_trace(&op, &labels, keep)?;
    make_state(kept.scale_real(1.0 / prob), tensor::kept_labels(&labels, keep))
}

/// Steers with every frame element. Outcomes below the probability floor are
/// recorded as `(0, maximally mixed)`; they carry no weight on reassembly.
pub fn steer_all(rho: &LabeledState, r: &str, frame: &Frame) -> Result<Vec<(f64, LabeledState)>> {
    let labels: Vec<SystemLabel> = rho.labels().iter().filter(|l| l.name != r).cloned().collect();
    frame
        .elements
        .iter()
        .map(|p| {
            let (prob, op) = steer_unnormalized(rho, r, p)?;
            if prob <= PROBABILITY_FLOOR {
                Ok((0.0, LabeledState::maximally_mixed(labels.clone())?))
            } else {
                Ok((prob, make_state(op.scale_real(1.0 / prob), labels.clone())?))
            }
        })
        .collect()
}

/// `Σᵢ Lᵢ ⊗ pᵢ σᵢ` with `r` placed first.
pub fn reassemble(
    f: &Frame,
    duals: &DualFrame,
    r: SystemLabel,
    steered: &[(f64, LabeledState)],
) -> Result<LabeledState> {
    if steered.len() != f.elements.len() || duals.elements.len() != f.elements.len() {
        return Err(Error::Dimension(format!(
            "{} frame elements, {} duals, {} steered states",
            f.elements.len(),
            duals.elements.len(),
            steered.len()
        )));
    }
    if r.dim != f.dim() {
        return Err(Error::Dimension(format!("reference of dimension {} for a frame on {}", r.dim, f.dim())));
    }
    let rest = steered[0].1.labels().to_vec();
    let mut labels = vec![r];
    labels.extend(rest.iter().cloned());
    let d = validate_labels(&labels)?;
    let mut out = ComplexMatrix::zeros(d, d);
    for (l, (prob, s)) in duals.elements.iter().zip(steered) {
        if s.labels() != rest.as_slice() {
            return Err(Error::Dimension("steered states disagree on their systems".into()));
        }
        out += &tensor::tensor(l, &s.matrix().scale_real(*prob))?;
    }
    make_state(out, labels)
}

/// A family of `QE` states: the convex hull of finitely many generators, or
/// the normalized outputs of a CP post-selection map `Q₀E₀ → QE`.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilySpec {
    Generators(Vec<LabeledState>),
    PostMap(Channel),
}

impl FamilySpec {
    pub fn generators(states: Vec<LabeledState>) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::Dimension("no generators".into()))?;
        if states.iter().any(|s| s.labels() != first.labels()) {
            return Err(Error::Label("generators must share labels".into()));
        }
        Ok(FamilySpec::Generators(states))
    }

    pub fn post_map(c: Channel) -> Result<Self> {
        let report = classify(&c)?;
        if !report.is_cp {
            return Err(Error::NotPsd(report.min_choi_eig));
        }
        Ok(FamilySpec::PostMap(c))
    }

    /// The map whose normalized Choi state is the canonical extension.
    /// Generators `ωᵢ` become `X ↦ Σᵢ ⟨i|X|i⟩ ωᵢ` on a flag `Q₀`.
    pub fn as_post_map(&self) -> Result<Channel> {
        match self {
            FamilySpec::PostMap(c) => Ok(c.clone()),
            FamilySpec::Generators(gs) => channels::prepare_controlled(SystemLabel::new("Q0", gs.len()), gs),
        }
    }

    pub fn out_labels(&self) -> Vec<SystemLabel> {
        match self {
            FamilySpec::PostMap(c) => c.out_labels().to_vec(),
            FamilySpec::Generators(gs) => gs[0].labels().to_vec(),
        }
    }
}

/// `J(𝒫) / Tr J(𝒫)` on `R ⊗ QE`, i.e. `𝒫` applied to half of a maximally
/// entangled state.
pub fn canonical_tripartite(spec: &FamilySpec) -> Result<LabeledState> {
    let post = spec.as_post_map()?;
    let j = channels::choi(&post);
    let tr = j.trace().re;
    if tr <= PROBABILITY_FLOOR {
        return Err(Error::ZeroMap);
    }
    let mut labels = vec![SystemLabel::new(REFERENCE, post.d_in())];
    labels.extend(post.out_labels().iter().cloned());
    validate_labels(&labels)?;
    make_state(j.scale_real(1.0 / tr), labels)
}

/// Representative members of a family: the generators themselves, or the
/// states steered from the canonical extension by the default frame.
pub fn family_members(spec: &FamilySpec) -> Result<Vec<LabeledState>> {
    match spec {
        FamilySpec::Generators(gs) => Ok(gs.clone()),
        FamilySpec::PostMap(_) => {
            let rho = canonical_tripartite(spec)?;
            let frame = default_frame(rho.label(REFERENCE)?.dim)?;
            Ok(steer_all(&rho, REFERENCE, &frame)?
                .into_iter()
                .filter(|(p, _)| *p > 0.0)
                .map(|(_, s)| s)
                .collect())
        }
    }
}

fn family_roles(state: &LabeledState) -> Result<(String, String)> {
    let names = state.names();
    if names.len() != 3 {
        return Err(Error::Label(format!(
            "family states must live on two systems Q, E; got {}",
            names.len() - 1
        )));
    }
    Ok((names[1].to_string(), names[2].to_string()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum FamilyCertificate {
    /// The canonical extension is Markov, so every joint isometry on `QE`
    /// has one CPTP reduction valid for the whole family.
    Markov { state: LabeledState, cmi: f64 },
    /// The canonical extension is not Markov. This does not show that the
    /// family lacks a common CPTP reduction: some other extension might be
    /// Markov.
    Refusal {
        state: LabeledState,
        cmi: f64,
        witness: DpiWitness,
    },
}

impl FamilyCertificate {
    pub fn is_markov(&self) -> bool {
        matches!(self, FamilyCertificate::Markov { .. })
    }

    pub fn state(&self) -> &LabeledState {
        match self {
            FamilyCertificate::Markov { state, .. } | FamilyCertificate::Refusal { state, .. } => state,
        }
    }

    pub fn cmi(&self) -> f64 {
        match self {
            FamilyCertificate::Markov { cmi, .. } | FamilyCertificate::Refusal { cmi, .. } => *cmi,
        }
    }
}

impl fmt::Display for FamilyCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyCertificate::Markov { cmi, .. } => write!(
                f,
                "certified: the canonical extension is Markov (cmi = {cmi:.3e} bits); every joint evolution \
                 of QE has a single CPTP reduction valid on the whole family"
            ),
            FamilyCertificate::Refusal { cmi, witness, .. } => write!(
                f,
                "refused: the canonical extension has cmi = {cmi:.6} bits and embedding QE into one system \
                 violates data processing by {:.6} bits. This is not a disproof: another extension of the \
                 family may still be Markov",
                witness.gap
            ),
        }
    }
}

pub fn family_certificate(spec: &FamilySpec) -> Result<FamilyCertificate> {
    let state = canonical_tripartite(spec)?;
    let (q, e) = family_roles(&state)?;
    let verdict = is_markov(&state, REFERENCE, &q, &e)?;
    if verdict.is_markov {
        Ok(FamilyCertificate::Markov {
            cmi: verdict.cmi_value,
            state,
        })
    } else {
        let witness = embedding_witness(&state, REFERENCE, &q, &e)?;
        Ok(FamilyCertificate::Refusal {
            cmi: verdict.cmi_value,
            state,
            witness,
        })
    }
}

/// Builds one reduced channel from the canonical extension and returns the
/// largest trace distance between `Tr_{E'}[V ω V†]` and `ℰ(ω_Q)` over the
/// given members `ω`.
pub fn family_reduction_distance(state: &LabeledState, members: &[LabeledState], v: &Isometry) -> Result<f64> {
    let reduced = markov::reduced_dynamics(state, v)?;
    let q = v.in_labels()[0].name.as_str();
    let e_out = v.out_labels().last().expect("validated by reduced_dynamics").name.as_str();
    let mut worst: f64 = 0.0;
    for w in members {
        let joint = channels::evolve(v, w, &[e_out])?;
        let local = channels::apply(&reduced, &w.marginal(&[q])?, &[q])?;
        worst = worst.max(tensor::trace_distance(joint.matrix(), local.matrix())?);
    }
    Ok(worst)
}
