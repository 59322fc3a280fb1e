//! Labeled density operators, entropic functionals and entanglement measures.

use log::warn;

use crate::error::{Error, Result};
use crate::sampling;
use crate::tensor::{
    self, eig_hermitian, kept_labels, partial_trace, permute, permuted_labels, tensor, total_dim,
    trace_distance, validate_labels, ComplexMatrix, SystemLabel, C64, HERM_TOL, PSD_TOL,
};

/// Traces within this distance of 1 are accepted exactly.
pub const TRACE_TOL: f64 = 1e-9;
/// Traces within this distance of 1 are renormalized (with a warning).
pub const TRACE_RENORM_TOL: f64 = 1e-6;
/// Minimum spectral gap for the dephasing test.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// A density operator over an ordered list of labeled subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledState {
    labels: Vec<SystemLabel>,
    matrix: ComplexMatrix,
}

/// Validates `matrix` as a density operator on `labels`.
pub fn make_state(matrix: ComplexMatrix, labels: Vec<SystemLabel>) -> Result<LabeledState> {
    let d = validate_labels(&labels)?;
    if !matrix.is_square() || matrix.rows() != d {
        return Err(Error::Dimension(format!(
            "{}x{} matrix for labels of total dimension {d}",
            matrix.rows(),
            matrix.cols()
        )));
    }
    let dev = matrix.hermiticity_deviation();
    if dev > HERM_TOL * matrix.frobenius_norm().max(1.0) {
        return Err(Error::Hermiticity(dev));
    }
    let mut matrix = matrix.hermitian_part();
    let min = eig_hermitian(&matrix)?.min();
    if min < -PSD_TOL {
        return Err(Error::NotPsd(min));
    }
    let tr = matrix.trace().re;
    if (tr - 1.0).abs() > TRACE_RENORM_TOL {
        return Err(Error::NotUnitTrace(tr));
    }
    if (tr - 1.0).abs() > TRACE_TOL {
        warn!("renormalizing state with trace {tr}");
        matrix = matrix.scale_real(1.0 / tr);
    }
    Ok(LabeledState { labels, matrix })
}

impl LabeledState {
    pub fn new(matrix: ComplexMatrix, labels: Vec<SystemLabel>) -> Result<Self> {
        make_state(matrix, labels)
    }

    /// For operators already known to be states (marginals, conjugations).
    pub(crate) fn from_parts(matrix: ComplexMatrix, labels: Vec<SystemLabel>) -> Self {
        debug_assert_eq!(matrix.rows(), total_dim(&labels));
        LabeledState { labels, matrix }
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn pure(amplitudes: &[C64], labels: Vec<SystemLabel>) -> Result<Self> {
        make_state(ComplexMatrix::projector(amplitudes), labels)
    }

    pub fn maximally_mixed(labels: Vec<SystemLabel>) -> Result<Self> {
        let d = validate_labels(&labels)?;
        Ok(Self::from_parts(ComplexMatrix::identity(d).scale_real(1.0 / d as f64), labels))
    }

    /// `|k⟩⟨k|` on a single system.
    pub fn basis(label: SystemLabel, k: usize) -> Result<Self> {
        if k >= label.dim {
            return Err(Error::Dimension(format!("basis index {k} in dimension {}", label.dim)));
        }
        Self::pure(&ComplexMatrix::basis(label.dim, k), vec![label])
    }

    pub fn labels(&self) -> &[SystemLabel] {
        &self.labels
    }

    pub fn names(&self) -> Vec<&str> {
        self.labels.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn label(&self, name: &str) -> Result<&SystemLabel> {
        Ok(&self.labels[tensor::position(&self.labels, name)?])
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn marginal(&self, keep: &[&str]) -> Result<LabeledState> {
        let m = partial_trace(&self.matrix, &self.labels, keep)?;
        Ok(Self::from_parts(m, kept_labels(&self.labels, keep)))
    }

    pub fn permuted(&self, order: &[&str]) -> Result<LabeledState> {
        let m = permute(&self.matrix, &self.labels, order)?;
        Ok(Self::from_parts(m, permuted_labels(&self.labels, order)?))
    }

    /// `self ⊗ other`, labels concatenated.
    pub fn product(&self, other: &LabeledState) -> Result<LabeledState> {
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        validate_labels(&labels)?;
        Ok(Self::from_parts(tensor(&self.matrix, &other.matrix)?, labels))
    }

    pub fn relabel(&self, old: &str, new: &str) -> Result<LabeledState> {
        let mut labels = self.labels.clone();
        let k = tensor::position(&labels, old)?;
        labels[k].name = new.to_string();
        validate_labels(&labels)?;
        Ok(Self::from_parts(self.matrix.clone(), labels))
    }

    /// Fuses the named subsystems into one factor called `new`, placed where
    /// the first of them sat. The fused factor orders its parts as `names`.
    pub fn merge(&self, names: &[&str], new: &str) -> Result<LabeledState> {
        let pos = tensor::positions(&self.labels, names)?;
        let first = *pos.iter().min().ok_or_else(|| Error::Label("nothing to merge".into()))?;
        let rest: Vec<&SystemLabel> = self.labels[first + 1..]
            .iter()
            .enumerate()
            .filter(|(k, _)| !pos.contains(&(k + first + 1)))
            .map(|(_, l)| l)
            .collect();
        let mut order: Vec<&str> = self.labels[..first].iter().map(|l| l.name.as_str()).collect();
        order.extend(names);
        order.extend(rest.iter().map(|l| l.name.as_str()));
        let p = self.permuted(&order)?;
        let dim: usize = pos.iter().map(|&k| self.labels[k].dim).product();
        let mut labels = self.labels[..first].to_vec();
        labels.push(SystemLabel::new(new, dim));
        labels.extend(rest.into_iter().cloned());
        validate_labels(&labels)?;
        Ok(Self::from_parts(p.matrix, labels))
    }

    pub fn trace_distance(&self, other: &LabeledState) -> Result<f64> {
        trace_distance(&self.matrix, &other.matrix)
    }
}

pub(crate) fn entropy_of(m: &ComplexMatrix) -> Result<f64> {
    let spec = eig_hermitian(m)?;
    Ok(spec
        .eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum())
}

/// Von Neumann entropy in bits.
pub fn entropy(s: &LabeledState) -> Result<f64> {
    entropy_of(&s.matrix)
}

fn check_disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    if let Some(n) = a.iter().find(|n| b.contains(n)) {
        return Err(Error::Label(format!("label {n} appears in both parts")));
    }
    Ok(())
}

fn marginal_entropy(s: &LabeledState, keep: &[&str]) -> Result<f64> {
    if keep.is_empty() {
        return Ok(0.0);
    }
    entropy_of(&partial_trace(&s.matrix, &s.labels, keep)?)
}

/// `S(A) + S(B) − S(AB)` in bits.
pub fn mutual_information(s: &LabeledState, part_a: &[&str], part_b: &[&str]) -> Result<f64> {
    check_disjoint(part_a, part_b)?;
    let both: Vec<&str> = part_a.iter().chain(part_b).copied().collect();
    tensor::positions(&s.labels, &both)?;
    Ok(marginal_entropy(s, part_a)? + marginal_entropy(s, part_b)? - marginal_entropy(s, &both)?)
}

/// Conditional mutual information `I(R;E|Q) = S(RQ) + S(QE) − S(RQE) − S(Q)`
/// in bits. Subsystems other than `r`, `q`, `e` are traced out first.
pub fn cmi(s: &LabeledState, r: &str, q: &str, e: &str) -> Result<f64> {
    if r == q || q == e || r == e {
        return Err(Error::Label(format!("labels {r}, {q}, {e} must be distinct")));
    }
    tensor::positions(&s.labels, &[r, q, e])?;
    Ok(marginal_entropy(s, &[r, q])? + marginal_entropy(s, &[q, e])?
        - marginal_entropy(s, &[r, q, e])?
        - marginal_entropy(s, &[q])?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntanglementMeasure {
    /// Sum of the absolute negative eigenvalues of the partial transpose.
    Negativity,
    /// Wootters concurrence; two-qubit states only.
    Concurrence,
}

pub fn entanglement(s: &LabeledState, cut: &[&str], measure: EntanglementMeasure) -> Result<f64> {
    tensor::positions(&s.labels, cut)?;
    match measure {
        EntanglementMeasure::Negativity => {
            if cut.is_empty() || cut.len() == s.labels.len() {
                return Err(Error::Label("negativity needs a proper bipartition".into()));
            }
            let pt = tensor::partial_transpose(&s.matrix, &s.labels, cut)?;
            let spec = eig_hermitian(&pt)?;
            Ok(spec.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum::<f64>() + 0.0)
        }
        EntanglementMeasure::Concurrence => concurrence(s),
    }
}

fn concurrence(s: &LabeledState) -> Result<f64> {
    if s.labels.len() != 2 || s.labels.iter().any(|l| l.dim != 2) {
        return Err(Error::Dimension("concurrence needs exactly two qubits".into()));
    }
    // ρ = V V† over the support; the Wootters λᵢ are the singular values of
    // τ = Vᵀ (σy⊗σy) V, read off as the non-negative eigenvalues of the
    // Hermitian dilation [[0, τ], [τ†, 0]] to avoid square roots of noise.
    let spec = eig_hermitian(&s.matrix)?;
    let support: Vec<usize> = (0..4).filter(|&k| spec.eigenvalues[k] > PSD_TOL).collect();
    let k = support.len();
    let v = ComplexMatrix::from_fn(4, k, |i, j| {
        spec.eigenvectors[(i, support[j])] * spec.eigenvalues[support[j]].sqrt()
    });
    let yy = tensor(&tensor::pauli::y(), &tensor::pauli::y())?;
    let tau = &(&v.transpose() * &yy) * &v;
    let dil = ComplexMatrix::from_fn(2 * k, 2 * k, |i, j| match (i < k, j < k) {
        (true, false) => tau[(i, j - k)],
        (false, true) => tau[(j, i - k)].conj(),
        _ => C64::new(0.0, 0.0),
    });
    let mut l: Vec<f64> = eig_hermitian(&dil)?.eigenvalues.into_iter().take(k).map(|x| x.max(0.0)).collect();
    l.resize(4, 0.0);
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Dephases `s` in the eigenbasis of its `side` marginal.
///
/// Returns the dephased state and its trace distance to `s`. A distance above
/// numerical noise certifies non-zero discord on `side`; zero distance is
/// consistent with a classical-quantum state. Degenerate marginals make the
/// eigenbasis ambiguous and the test is refused.
pub fn eigenbasis_dephase(s: &LabeledState, side: &str) -> Result<(LabeledState, f64)> {
    let marg = s.marginal(&[side])?;
    let spec = eig_hermitian(marg.matrix())?;
    let gap = spec
        .eigenvalues
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min);
    if gap <= DEGENERACY_GAP {
        return Err(Error::Degenerate(gap));
    }
    let mut out = ComplexMatrix::zeros(s.dim(), s.dim());
    for k in 0..spec.eigenvalues.len() {
        let p = ComplexMatrix::projector(&spec.vector(k));
        let full = tensor::embed(&p, &s.labels, &[side])?;
        out += &s.matrix.conjugate_by(&full);
    }
    let dephased = LabeledState::from_parts(out, s.labels.clone());
    let dist = s.trace_distance(&dephased)?;
    Ok((dephased, dist))
}

/// `G G† / Tr[G G†]` with `G` a seeded complex Gaussian `dim × rank` matrix.
pub fn random_state(labels: Vec<SystemLabel>, rank: usize, seed: u64) -> Result<LabeledState> {
    let d = validate_labels(&labels)?;
    if rank == 0 || rank > d {
        return Err(Error::Rank { rank, dim: d });
    }
    let g = sampling::ginibre(d, rank, &mut sampling::rng(seed));
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    Ok(LabeledState::from_parts(m.scale_real(1.0 / tr).hermitian_part(), labels))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn lab(spec: &[(&str, usize)]) -> Vec<SystemLabel> {
        spec.iter().map(|&(n, d)| SystemLabel::new(n, d)).collect()
    }

    pub(crate) fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    pub(crate) fn bell(a: &str, b: &str) -> LabeledState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        LabeledState::pure(&[c(s), c(0.0), c(0.0), c(s)], lab(&[(a, 2), (b, 2)])).unwrap()
    }

    pub(crate) fn ghz() -> LabeledState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![c(0.0); 8];
        v[0] = c(s);
        v[7] = c(s);
        LabeledState::pure(&v, lab(&[("R", 2), ("Q", 2), ("E", 2)])).unwrap()
    }

    #[test]
    fn make_state_validation() {
        let s = make_state(ComplexMatrix::identity(2).scale_real(0.5), lab(&[("Q", 2)])).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(matches!(
            make_state(ComplexMatrix::from_real_diag(&[1.0, -0.01]), lab(&[("Q", 2)])),
            Err(Error::NotPsd(_))
        ));
        let s = make_state(ComplexMatrix::from_real_diag(&[0.5, 0.5000001]), lab(&[("Q", 2)])).unwrap();
        assert_abs_diff_eq!(s.matrix().trace().re, 1.0, epsilon = 1e-15);
        assert!(matches!(
            make_state(ComplexMatrix::from_real_diag(&[0.5, 0.6]), lab(&[("Q", 2)])),
            Err(Error::NotUnitTrace(_))
        ));
        assert!(matches!(
            make_state(ComplexMatrix::identity(3).scale_real(1.0 / 3.0), lab(&[("Q", 2)])),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            make_state(ComplexMatrix::identity(4).scale_real(0.25), lab(&[("Q", 2), ("Q", 2)])),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn entropy_examples() {
        assert!(entropy(&bell("A", "B")).unwrap().abs() < 1e-12);
        let mixed = LabeledState::maximally_mixed(lab(&[("Q", 2)])).unwrap();
        assert_abs_diff_eq!(entropy(&mixed).unwrap(), 1.0, epsilon = 1e-14);
        let s = make_state(ComplexMatrix::from_real_diag(&[0.75, 0.25]), lab(&[("Q", 2)])).unwrap();
        assert_abs_diff_eq!(entropy(&s).unwrap(), 0.8112781244591328, epsilon = 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let a = random_state(lab(&[("A", 2)]), 2, 1).unwrap();
        let b = random_state(lab(&[("B", 3)]), 3, 2).unwrap();
        let ab = a.product(&b).unwrap();
        assert!(mutual_information(&ab, &["A"], &["B"]).unwrap().abs() < 1e-12);
        assert_abs_diff_eq!(mutual_information(&bell("R", "Q"), &["R"], &["Q"]).unwrap(), 2.0, epsilon = 1e-12);
        let cc = make_state(ComplexMatrix::from_real_diag(&[0.5, 0.0, 0.0, 0.5]), lab(&[("R", 2), ("Q", 2)])).unwrap();
        assert_abs_diff_eq!(mutual_information(&cc, &["R"], &["Q"]).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(mutual_information(&cc, &["R"], &["R"]), Err(Error::Label(_))));
        assert!(matches!(mutual_information(&cc, &["R"], &["X"]), Err(Error::Label(_))));
    }

    #[test]
    fn cmi_examples() {
        let r = random_state(lab(&[("R", 2)]), 2, 3).unwrap();
        let q = random_state(lab(&[("Q", 2)]), 2, 4).unwrap();
        let e = random_state(lab(&[("E", 3)]), 3, 5).unwrap();
        let rqe = r.product(&q).unwrap().product(&e).unwrap();
        assert!(cmi(&rqe, "R", "Q", "E").unwrap().abs() < 1e-12);
        assert_abs_diff_eq!(cmi(&ghz(), "R", "Q", "E").unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(cmi(&ghz(), "R", "R", "E"), Err(Error::Label(_))));
    }

    #[test]
    fn cmi_traces_extra_labels() {
        let extra = random_state(lab(&[("X", 2)]), 2, 6).unwrap();
        let s = ghz().product(&extra).unwrap();
        assert_abs_diff_eq!(cmi(&s, "R", "Q", "E").unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cmi_identities_on_random_states() {
        for seed in 0..1000u64 {
            let dims = [2 + (seed % 2) as usize, 2 + ((seed / 2) % 2) as usize, 2 + ((seed / 4) % 2) as usize];
            let l = lab(&[("R", dims[0]), ("Q", dims[1]), ("E", dims[2])]);
            let d = dims.iter().product::<usize>();
            let s = random_state(l, 1 + (seed as usize % d), seed).unwrap();
            let i = cmi(&s, "R", "Q", "E").unwrap();
            assert!(i >= -1e-8, "strong subadditivity violated: {i}");
            if seed % 10 == 0 {
                let swapped = cmi(&s, "E", "Q", "R").unwrap();
                assert!((i - swapped).abs() < 1e-10);
                let chain = mutual_information(&s, &["R"], &["Q", "E"]).unwrap()
                    - mutual_information(&s, &["R"], &["Q"]).unwrap();
                assert!((i - chain).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn negativity_and_concurrence() {
        let a = random_state(lab(&[("A", 2)]), 2, 7).unwrap();
        let b = random_state(lab(&[("B", 2)]), 2, 8).unwrap();
        let ab = a.product(&b).unwrap();
        assert!(entanglement(&ab, &["A"], EntanglementMeasure::Negativity).unwrap() < 1e-12);
        let phi = bell("A", "B");
        assert_abs_diff_eq!(entanglement(&phi, &["B"], EntanglementMeasure::Negativity).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(entanglement(&phi, &["A"], EntanglementMeasure::Concurrence).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = LabeledState::maximally_mixed(lab(&[("A", 2), ("B", 2)])).unwrap();
        assert!(entanglement(&mixed, &["A"], EntanglementMeasure::Concurrence).unwrap() < 1e-12);
        assert!(matches!(
            entanglement(&ghz(), &["R"], EntanglementMeasure::Concurrence),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            entanglement(&phi, &["A", "B"], EntanglementMeasure::Negativity),
            Err(Error::Label(_))
        ));
    }

    #[test]
    fn concurrence_of_partially_entangled_pure_state() {
        // C(cos a|00⟩ + sin a|11⟩) = sin 2a
        let a: f64 = 0.3;
        let s = LabeledState::pure(&[c(a.cos()), c(0.0), c(0.0), c(a.sin())], lab(&[("A", 2), ("B", 2)])).unwrap();
        assert_abs_diff_eq!(
            entanglement(&s, &["A"], EntanglementMeasure::Concurrence).unwrap(),
            (2.0 * a).sin(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dephasing_examples() {
        // classical-quantum state with distinct weights
        let r0 = random_state(lab(&[("E", 2)]), 2, 9).unwrap();
        let r1 = random_state(lab(&[("E", 2)]), 2, 10).unwrap();
        let q0 = LabeledState::basis(SystemLabel::new("Q", 2), 0).unwrap();
        let q1 = LabeledState::basis(SystemLabel::new("Q", 2), 1).unwrap();
        let m = &q0.product(&r0).unwrap().matrix().scale_real(0.3) + &q1.product(&r1).unwrap().matrix().scale_real(0.7);
        let cq = make_state(m, lab(&[("Q", 2), ("E", 2)])).unwrap();
        let (_, d) = eigenbasis_dephase(&cq, "Q").unwrap();
        assert!(d < 1e-12);

        // Maximally entangled: degenerate marginal, test refused.
        assert!(matches!(eigenbasis_dephase(&bell("Q", "E"), "Q"), Err(Error::Degenerate(_))));

        // cos a|00⟩ + sin a|11⟩ dephases to diag(cos², 0, 0, sin²): distance ½ sin 2a.
        let a = std::f64::consts::PI / 8.0;
        let s = LabeledState::pure(&[c(a.cos()), c(0.0), c(0.0), c(a.sin())], lab(&[("Q", 2), ("E", 2)])).unwrap();
        let (_, d) = eigenbasis_dephase(&s, "Q").unwrap();
        assert_abs_diff_eq!(d, 0.3535533905932738, epsilon = 1e-12);

        let qs = make_state(ComplexMatrix::from_real_diag(&[0.8, 0.2]), lab(&[("Q", 2)])).unwrap();
        let es = random_state(lab(&[("E", 3)]), 3, 11).unwrap();
        let (_, d) = eigenbasis_dephase(&qs.product(&es).unwrap(), "Q").unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn random_state_properties() {
        let s = random_state(lab(&[("A", 3)]), 1, 5).unwrap();
        assert!(entropy(&s).unwrap().abs() < 1e-10);
        assert_eq!(random_state(lab(&[("A", 3)]), 2, 5).unwrap(), random_state(lab(&[("A", 3)]), 2, 5).unwrap());
        assert!(matches!(random_state(lab(&[("A", 3)]), 4, 5), Err(Error::Rank { .. })));
        assert!(matches!(random_state(lab(&[("A", 3)]), 0, 5), Err(Error::Rank { .. })));
        // Unitary invariance of the induced measure: E[ρ] = 1/d.
        let n = 1000;
        let mut mean = 0.0;
        for seed in 0..n {
            let s = random_state(lab(&[("A", 4)]), 4, seed).unwrap();
            mean += s.matrix()[(0, 0)].re;
        }
        mean /= n as f64;
        assert!((mean - 0.25).abs() < 0.05 * 0.25, "mean {mean}");
    }

    #[test]
    fn merge_fuses_subsystems() {
        let s = random_state(lab(&[("A", 2), ("B", 3), ("C", 2)]), 3, 12).unwrap();
        let m = s.merge(&["A", "C"], "AC").unwrap();
        assert_eq!(m.names(), vec!["AC", "B"]);
        let direct = s.permuted(&["A", "C", "B"]).unwrap();
        assert_eq!(m.matrix(), direct.matrix());
        let m2 = s.merge(&["B", "C"], "BC").unwrap();
        assert_eq!(m2.names(), vec!["A", "BC"]);
        assert_eq!(m2.matrix(), s.matrix());
    }
}
