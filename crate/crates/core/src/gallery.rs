//! Worked instances: zero-discord and discordant families with CP reduced
//! dynamics, entangled families built from an invertible dilation, the
//! factorization argument, an entanglement-revival scenario, and a randomized
//! audit of the Markov / reduced-dynamics equivalence.

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{self, partial_swap, random_isometry, Channel, Isometry};
use crate::error::{Error, Result};
use crate::markov::{self, dpi_gap, embedding_witness, is_markov, reduced_dynamics, verify_reduction, MarkovVerdict};
use crate::sampling::{self, derive_seed};
use crate::states::{cmi, entanglement, mutual_information, random_state, EntanglementMeasure, LabeledState};
use crate::steering::{canonical_tripartite, FamilySpec};
use crate::tensor::{self, ComplexMatrix, SystemLabel, C64};

/// Tolerance on probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Minimal trace distance between the two environment states of the
/// discordant family.
pub const DISTINCT_TOL: f64 = 1e-6;
/// Changes in concurrence smaller than this are treated as flat.
pub const REVIVAL_NOISE: f64 = 1e-9;
/// Largest subsystem dimension accepted by [`theorem1_audit`].
pub const AUDIT_DIM_CAP: usize = 4;

fn qubit(name: &str) -> SystemLabel {
    SystemLabel::new(name, 2)
}

fn check_simplex(probs: &[f64], n: usize) -> Result<()> {
    if probs.len() != n {
        return Err(Error::Simplex(format!("expected {n} probabilities, got {}", probs.len())));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < -SIMPLEX_TOL) {
        return Err(Error::Simplex(format!("entry {p} is not a probability")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Simplex(format!("entries sum to {sum}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ZeroDiscordInstance {
    /// Generators `|i⟩⟨i|_Q ⊗ ρᵢ_E`.
    pub family: FamilySpec,
    /// `(1/n) Σᵢ |i⟩⟨i|_R ⊗ |i⟩⟨i|_Q ⊗ ρᵢ_E`.
    pub state: LabeledState,
    /// `Σᵢ pᵢ |i⟩⟨i|_Q ⊗ ρᵢ_E` for the requested `p`.
    pub member: LabeledState,
}

/// Classical-quantum family on `Q (n) ⊗ E (d_e)`. Environment states are
/// drawn from `seed` when not supplied.
pub fn zero_discord_instance(
    n: usize,
    d_e: usize,
    probs: &[f64],
    env_states: Option<Vec<LabeledState>>,
    seed: u64,
) -> Result<ZeroDiscordInstance> {
    if n == 0 || d_e == 0 {
        return Err(Error::Dimension("need n ≥ 1 and d_E ≥ 1".into()));
    }
    check_simplex(probs, n)?;
    let envs = match env_states {
        Some(es) => es,
        None => (0..n)
            .map(|i| random_state(vec![SystemLabel::new("E", d_e)], d_e, derive_seed(seed, i as u64)))
            .collect::<Result<_>>()?,
    };
    if envs.len() != n {
        return Err(Error::Dimension(format!("{} environment states for n = {n}", envs.len())));
    }
    if envs.iter().any(|e| e.dim() != d_e || e.labels().len() != 1 || e.labels() != envs[0].labels()) {
        return Err(Error::Dimension(format!("environment states must share one system of dimension {d_e}")));
    }
    let q = SystemLabel::new("Q", n);
    let generators = envs
        .iter()
        .enumerate()
        .map(|(i, e)| LabeledState::basis(q.clone(), i)?.product(e))
        .collect::<Result<Vec<_>>>()?;
    let mut member = ComplexMatrix::zeros(n * d_e, n * d_e);
    for (g, p) in generators.iter().zip(probs) {
        member += &g.matrix().scale_real(*p);
    }
    let member = LabeledState::new(member, generators[0].labels().to_vec())?;
    let family = FamilySpec::generators(generators)?;
    let state = canonical_tripartite(&family)?;
    Ok(ZeroDiscordInstance { family, state, member })
}

#[derive(Clone, Debug)]
pub struct CounterexampleInstance {
    /// Generators `ζ^α`, `ζ^β` on `Q (3) ⊗ E`.
    pub family: FamilySpec,
    /// `½|0⟩⟨0|_R ⊗ ζ^α + ½|1⟩⟨1|_R ⊗ ζ^β`.
    pub state: LabeledState,
    alpha: LabeledState,
    beta: LabeledState,
}

impl CounterexampleInstance {
    /// `ζ^p = p ζ^α + (1 − p) ζ^β`.
    pub fn member(&self, p: f64) -> Result<LabeledState> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Simplex(format!("p = {p} outside [0, 1]")));
        }
        let m = &self.alpha.matrix().scale_real(p) + &self.beta.matrix().scale_real(1.0 - p);
        LabeledState::new(m, self.alpha.labels().to_vec())
    }

    pub fn alpha(&self) -> &LabeledState {
        &self.alpha
    }

    pub fn beta(&self) -> &LabeledState {
        &self.beta
    }
}

/// Discordant family with `ζ^α = ½|0⟩⟨0| ⊗ ρ⁰ + ½|+⟩⟨+| ⊗ ρ⁺` and
/// `ζ^β = |2⟩⟨2| ⊗ ρ²` on a qutrit `Q`.
pub fn counterexample_instance(
    rho0: &LabeledState,
    rho_plus: &LabeledState,
    rho2: &LabeledState,
) -> Result<CounterexampleInstance> {
    let env = rho0.labels();
    if rho_plus.labels() != env || rho2.labels() != env {
        return Err(Error::Dimension("environment states must share their systems".into()));
    }
    let dist = rho0.trace_distance(rho_plus)?;
    if dist <= DISTINCT_TOL {
        return Err(Error::DegenerateInput(format!(
            "ρ⁰ and ρ⁺ are {dist:.3e} apart in trace distance"
        )));
    }
    let q = SystemLabel::new("Q", 3);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = LabeledState::pure(&[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(0.0, 0.0)], vec![q.clone()])?;
    let zero = LabeledState::basis(q.clone(), 0)?;
    let a = &zero.product(rho0)?.matrix().scale_real(0.5) + &plus.product(rho_plus)?.matrix().scale_real(0.5);
    let alpha = LabeledState::new(a, zero.product(rho0)?.labels().to_vec())?;
    let beta = LabeledState::basis(q, 2)?.product(rho2)?;
    let family = FamilySpec::generators(vec![alpha.clone(), beta.clone()])?;
    let state = canonical_tripartite(&family)?;
    Ok(CounterexampleInstance {
        family,
        state,
        alpha,
        beta,
    })
}

#[derive(Clone, Debug)]
pub struct EntangledMarkovInstance {
    /// `(1 ⊗ W) ω (1 ⊗ W†)` with `R` first.
    pub state: LabeledState,
    /// All states steered from `R`, as the post-selection map whose Choi
    /// state is `state`.
    pub family: FamilySpec,
    pub verdict: MarkovVerdict,
}

/// Dilates `ω_{RQ₀}` by `W: Q₀ → QE`. The verdict is reported rather than
/// enforced, so non-invertible dilations show up as a positive `cmi`.
pub fn entangled_markov_instance(w: &Isometry, omega: &LabeledState) -> Result<EntangledMarkovInstance> {
    if w.in_labels().len() != 1 || w.out_labels().len() != 2 {
        return Err(Error::Dimension("dilation must map one system Q₀ to two systems Q, E".into()));
    }
    if omega.labels().len() != 2 {
        return Err(Error::Dimension("ω must be bipartite R Q₀".into()));
    }
    let q0 = &w.in_labels()[0];
    if omega.label(&q0.name)?.dim != q0.dim {
        return Err(Error::Dimension(format!("system {} has mismatched dimensions", q0.name)));
    }
    let r = omega
        .labels()
        .iter()
        .find(|l| l.name != q0.name)
        .expect("bipartite with Q₀ present")
        .clone();
    let (q, e) = (w.out_labels()[0].name.as_str(), w.out_labels()[1].name.as_str());
    let state = channels::evolve(w, omega, &[])?.permuted(&[&r.name, q, e])?;
    let post = Channel::from_choi(
        state.matrix().clone(),
        vec![SystemLabel::new(q0.name.clone(), r.dim)],
        w.out_labels().to_vec(),
    )?;
    let family = FamilySpec::post_map(post)?;
    let verdict = is_markov(&state, &r.name, q, e)?;
    Ok(EntangledMarkovInstance { state, family, verdict })
}

/// `W|0⟩ = (|00⟩+|11⟩)/√2`, `W|1⟩ = (|01⟩+|10⟩)/√2` from `Q0` to `Q E`.
pub fn bell_dilation() -> Result<Isometry> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let m = ComplexMatrix::from_real(4, 2, &[s, 0.0, 0.0, s, 0.0, s, s, 0.0])?;
    Isometry::new(m, vec![qubit("Q0")], vec![qubit("Q"), qubit("E")])
}

/// `W|ψ⟩ = |ψ⟩ ⊗ |Φ⁺⟩`, with `|ψ⟩` and the first half of `|Φ⁺⟩` forming a
/// four-dimensional `Q` and the second half `E`. Its channel onto `Q` is
/// invertible, so dilated states are Markov.
pub fn invertible_dilation() -> Result<Isometry> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let m = ComplexMatrix::from_fn(8, 2, |row, col| {
        let (a, b, e) = (row / 4, (row / 2) % 2, row % 2);
        if a == col && b == e {
            C64::new(s, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Isometry::new(m, vec![qubit("Q0")], vec![SystemLabel::new("Q", 4), qubit("E")])
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    /// `I(R;E|Q)` of `Φ⁺_{R'Q} ⊗ ρ_{R''E}` with `R = R'R''`.
    pub cmi: f64,
    /// `I(R'';E)` of the environment input.
    pub mutual_info_env: f64,
    pub is_markov: bool,
    /// Whether `ρ_{R''E}` is a product state (trivially so when `R''` is
    /// one-dimensional).
    pub is_product: bool,
}

/// Allowed trace distance between `ρ_{R''E}` and `ρ_{R''} ⊗ ρ_E` for the
/// input to count as product.
pub const PRODUCT_TOL: f64 = 1e-8;

pub fn factorization_audit(d_q: usize, env_spec: &LabeledState) -> Result<FactorizationReport> {
    if d_q == 0 {
        return Err(Error::Dimension("d_Q must be positive".into()));
    }
    if env_spec.labels().len() != 2 {
        return Err(Error::Dimension("environment input must be bipartite R'' E".into()));
    }
    let names = env_spec.names();
    let (r2, e) = (names[0], names[1]);
    let amp: Vec<C64> = (0..d_q * d_q)
        .map(|k| {
            if k / d_q == k % d_q {
                C64::new(1.0 / (d_q as f64).sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let phi = LabeledState::pure(&amp, vec![SystemLabel::new("R'", d_q), SystemLabel::new("Q", d_q)])?;
    let rho = phi.product(env_spec)?.permuted(&["R'", r2, "Q", e])?.merge(&["R'", r2], "R")?;
    let verdict = is_markov(&rho, "R", "Q", e)?;
    let product = env_spec.marginal(&[r2])?.product(&env_spec.marginal(&[e])?)?;
    Ok(FactorizationReport {
        cmi: verdict.cmi_value,
        mutual_info_env: mutual_information(env_spec, &[r2], &[e])?,
        is_markov: verdict.is_markov,
        is_product: env_spec.trace_distance(&product)? <= PRODUCT_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioTrace {
    pub times: Vec<f64>,
    pub concurrence_rq: Vec<f64>,
    pub mutual_info_rq: Vec<f64>,
    pub cmi_re_given_q: Vec<f64>,
    pub revival_intervals: Vec<(f64, f64)>,
}

impl ScenarioTrace {
    pub fn in_revival(&self, t: f64) -> bool {
        self.revival_intervals.iter().any(|&(a, b)| a <= t && t <= b)
    }
}

/// `|Φ⁺⟩_RQ ⊗ |0⟩_E` evolved by `cos t · 1 + i sin t · SWAP` on `QE`.
pub fn revival_trace(t_grid: &[f64], env_dim: usize) -> Result<ScenarioTrace> {
    if env_dim != 2 {
        return Err(Error::Dimension(format!(
            "partial swap with a qubit Q needs a qubit environment, got dimension {env_dim}"
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::Grid("empty time grid".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Grid("non-finite time".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Grid("times must be strictly ascending".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let initial = LabeledState::pure(
        &[C64::new(s, 0.0), z, z, z, z, z, C64::new(s, 0.0), z],
        vec![qubit("R"), qubit("Q"), qubit("E")],
    )?;
    let points = t_grid
        .par_iter()
        .map(|&t| {
            let u = partial_swap(t, qubit("Q"), qubit("E"))?;
            let rho = channels::evolve(&u, &initial, &[])?;
            let rq = rho.marginal(&["R", "Q"])?;
            Ok((
                entanglement(&rq, &["R"], EntanglementMeasure::Concurrence)?,
                mutual_information(&rho, &["R"], &["Q"])?,
                cmi(&rho, "R", "Q", "E")?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let concurrence_rq: Vec<f64> = points.iter().map(|p| p.0).collect();
    Ok(ScenarioTrace {
        times: t_grid.to_vec(),
        revival_intervals: revival_intervals(t_grid, &concurrence_rq),
        concurrence_rq,
        mutual_info_rq: points.iter().map(|p| p.1).collect(),
        cmi_re_given_q: points.iter().map(|p| p.2).collect(),
    })
}

/// Maximal runs of strictly increasing steps that follow some earlier
/// strictly decreasing step.
fn revival_intervals(t: &[f64], c: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut seen_decrease = false;
    let mut start: Option<usize> = None;
    for k in 0..c.len().saturating_sub(1) {
        let step = c[k + 1] - c[k];
        if step > REVIVAL_NOISE && seen_decrease {
            start.get_or_insert(k);
            continue;
        }
        if let Some(s) = start.take() {
            out.push((t[s], t[k]));
        }
        if step < -REVIVAL_NOISE {
            seen_decrease = true;
        }
    }
    if let Some(s) = start {
        out.push((t[s], t[c.len() - 1]));
    }
    out
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// A random Markov state on `R Q E`.
///
/// `Q` is split into blocks `a_j ⊗ b_j` and the state is
/// `⊕_j q_j ρ_{R a_j} ⊗ ρ_{b_j E}`, rotated by a Haar unitary on `Q`. Blocks
/// with `b_j > 1` come from invertible dilations of `Q₀ = a_j` and give
/// members entangled across `Q : E`.
pub fn random_markov_state(d_r: usize, d_q: usize, d_e: usize, seed: u64) -> Result<LabeledState> {
    let mut rng = sampling::rng(derive_seed(seed, 0));
    let mut blocks = Vec::new();
    let mut left = d_q;
    while left > 0 {
        let d = rng.random_range(1..=left);
        let divisors: Vec<usize> = (1..=d).filter(|a| d % a == 0).collect();
        let a = divisors[rng.random_range(0..divisors.len())];
        blocks.push((a, d / a));
        left -= d;
    }
    let weights: Vec<f64> = blocks.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();

    let labels = vec![SystemLabel::new("R", d_r), SystemLabel::new("Q", d_q), SystemLabel::new("E", d_e)];
    let n = d_r * d_q * d_e;
    let mut m = ComplexMatrix::zeros(n, n);
    let mut offset = 0;
    for (j, &(a, b)) in blocks.iter().enumerate() {
        let ra = random_state(
            vec![SystemLabel::new("R", d_r), SystemLabel::new("a", a)],
            1 + rng.random_range(0..d_r * a),
            derive_seed(seed, 2 * j as u64 + 1),
        )?;
        let be = random_state(
            vec![SystemLabel::new("b", b), SystemLabel::new("E", d_e)],
            1 + rng.random_range(0..b * d_e),
            derive_seed(seed, 2 * j as u64 + 2),
        )?;
        let q = weights[j] / total;
        let index = |r: usize, al: usize, be: usize, e: usize| (r * d_q + offset + al * b + be) * d_e + e;
        for (r, al, bt, e) in quad(d_r, a, b, d_e) {
            for (r2, al2, bt2, e2) in quad(d_r, a, b, d_e) {
                let v = ra.matrix()[(r * a + al, r2 * a + al2)] * be.matrix()[(bt * d_e + e, bt2 * d_e + e2)];
                m[(index(r, al, bt, e), index(r2, al2, bt2, e2))] = v * q;
            }
        }
        offset += a * b;
    }
    let u = random_isometry(vec![SystemLabel::new("Q", d_q)], vec![SystemLabel::new("Q", d_q)], derive_seed(seed, 999))?;
    let full = tensor::embed(u.matrix(), &labels, &["Q"])?;
    LabeledState::new(m.conjugate_by(&full), labels)
}

fn quad(a: usize, b: usize, c: usize, d: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..a * b * c * d).map(move |k| (k / (b * c * d), (k / (c * d)) % b, (k / d) % c, k % d))
}

/// A random state on `R Q E` with `I(R;E|Q) > min_cmi`, by rejection.
pub fn random_non_markov_state(d_r: usize, d_q: usize, d_e: usize, min_cmi: f64, seed: u64) -> Result<LabeledState> {
    let labels = vec![SystemLabel::new("R", d_r), SystemLabel::new("Q", d_q), SystemLabel::new("E", d_e)];
    let n = d_r * d_q * d_e;
    for attempt in 0..1000u64 {
        let s = derive_seed(seed, attempt);
        let rank = 1 + (s as usize % n);
        let rho = random_state(labels.clone(), rank, s)?;
        if cmi(&rho, "R", "Q", "E")? > min_cmi {
            return Ok(rho);
        }
    }
    Err(Error::DegenerateInput(format!("no state with cmi above {min_cmi} for dims {d_r}x{d_q}x{d_e}")))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MarkovAudit {
    pub states: usize,
    pub reductions: usize,
    pub all_cptp: bool,
    pub max_cmi: f64,
    pub max_recovery_distance: f64,
    pub max_verify_distance: f64,
    pub min_dpi_gap: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NonMarkovAudit {
    pub states: usize,
    pub min_cmi: f64,
    pub max_witness_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub seed: u64,
    pub dims: [usize; 3],
    pub n_isometries: usize,
    pub markov: MarkovAudit,
    pub non_markov: NonMarkovAudit,
    pub passed: bool,
}

/// Allowed distance between the joint and reduced evolutions.
pub const AUDIT_VERIFY_TOL: f64 = 1e-8;
/// Allowed negative data-processing gap.
pub const AUDIT_DPI_TOL: f64 = 1e-9;
/// Allowed mismatch between witness violation and cmi.
pub const AUDIT_WITNESS_TOL: f64 = 1e-8;
/// Non-Markov states are sampled above this cmi.
pub const AUDIT_MIN_CMI: f64 = 0.01;

struct MarkovSample {
    cmi: f64,
    recovery: f64,
    cptp: bool,
    verify: f64,
    dpi: f64,
}

fn audit_markov_state(dims: [usize; 3], n_iso: usize, seed: u64) -> Result<MarkovSample> {
    let [d_r, d_q, d_e] = dims;
    let rho = random_markov_state(d_r, d_q, d_e, seed)?;
    let rq = rho.marginal(&["R", "Q"])?;
    let mut sample = MarkovSample {
        cmi: cmi(&rho, "R", "Q", "E")?,
        recovery: markov::recovery_distance(&rho, "R", "Q", "E")?,
        cptp: true,
        verify: 0.0,
        dpi: f64::INFINITY,
    };
    for k in 0..n_iso {
        let v = random_isometry(
            vec![SystemLabel::new("Q", d_q), SystemLabel::new("E", d_e)],
            vec![SystemLabel::new("Q'", d_q), SystemLabel::new("E'", d_e)],
            derive_seed(seed, 1000 + k as u64),
        )?;
        let e = reduced_dynamics(&rho, &v)?;
        sample.cptp &= channels::classify(&e)?.is_cptp();
        sample.verify = sample.verify.max(verify_reduction(&rho, &v, &e, AUDIT_VERIFY_TOL)?.1);
        sample.dpi = sample.dpi.min(dpi_gap(&rq, &e)?.gap);
    }
    Ok(sample)
}

/// Samples Markov states and checks that every random joint isometry has a
/// CPTP reduction that reproduces the joint evolution and obeys data
/// processing; samples non-Markov states and checks that the embedding
/// witness violates data processing by exactly the cmi.
pub fn theorem1_audit(n_states: usize, n_isometries: usize, dims: [usize; 3], seed: u64) -> Result<Theorem1Report> {
    if dims.iter().any(|&d| d == 0 || d > AUDIT_DIM_CAP) {
        return Err(Error::Dimension(format!("audit dimensions {dims:?} must lie in 1..={AUDIT_DIM_CAP}")));
    }
    let markov_seed = derive_seed(seed, 1);
    let non_markov_seed = derive_seed(seed, 2);
    let markov_samples = (0..n_states)
        .into_par_iter()
        .map(|i| audit_markov_state(dims, n_isometries, derive_seed(markov_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let witness_samples = (0..n_states)
        .into_par_iter()
        .map(|i| {
            let [d_r, d_q, d_e] = dims;
            let rho = random_non_markov_state(d_r, d_q, d_e, AUDIT_MIN_CMI, derive_seed(non_markov_seed, i as u64))?;
            let c = cmi(&rho, "R", "Q", "E")?;
            let w = embedding_witness(&rho, "R", "Q", "E")?;
            Ok((c, (w.gap - c).abs()))
        })
        .collect::<Result<Vec<_>>>();
    // Rejection sampling can fail only when the dimensions forbid
    // correlations (some dimension is 1); such states contribute nothing.
    let witness_samples = match witness_samples {
        Ok(s) => s,
        Err(Error::DegenerateInput(_)) => Vec::new(),
        Err(e) => return Err(e),
    };

    let markov = MarkovAudit {
        states: markov_samples.len(),
        reductions: markov_samples.len() * n_isometries,
        all_cptp: markov_samples.iter().all(|s| s.cptp),
        max_cmi: markov_samples.iter().map(|s| s.cmi).fold(0.0, f64::max),
        max_recovery_distance: markov_samples.iter().map(|s| s.recovery).fold(0.0, f64::max),
        max_verify_distance: markov_samples.iter().map(|s| s.verify).fold(0.0, f64::max),
        min_dpi_gap: markov_samples
            .iter()
            .map(|s| s.dpi)
            .filter(|g| g.is_finite())
            .reduce(f64::min)
            .unwrap_or(0.0),
    };
    let non_markov = NonMarkovAudit {
        states: witness_samples.len(),
        min_cmi: witness_samples.iter().map(|s| s.0).reduce(f64::min).unwrap_or(0.0),
        max_witness_deviation: witness_samples.iter().map(|s| s.1).fold(0.0, f64::max),
    };
    let passed = markov.all_cptp
        && markov.max_cmi <= markov::MARKOV_TOL
        && markov.max_recovery_distance <= markov::RECOVERY_TOL
        && markov.max_verify_distance <= AUDIT_VERIFY_TOL
        && markov.min_dpi_gap >= -AUDIT_DPI_TOL
        && non_markov.max_witness_deviation <= AUDIT_WITNESS_TOL;
    Ok(Theorem1Report {
        seed,
        dims,
        n_isometries,
        markov,
        non_markov,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::eigenbasis_dephase;
    use crate::states::tests::lab;
    use crate::steering::{family_certificate, steer};
    use approx::assert_abs_diff_eq;

    fn env(seed: u64) -> LabeledState {
        random_state(lab(&[("E", 2)]), 2, seed).unwrap()
    }

    #[test]
    fn zero_discord_examples() {
        let inst = zero_discord_instance(2, 2, &[0.3, 0.7], None, 5).unwrap();
        let v = is_markov(&inst.state, "R", "Q", "E").unwrap();
        assert!(v.cmi_value <= 1e-10 && v.recovery_consistent());
        for i in 0..2 {
            let p = ComplexMatrix::projector(&ComplexMatrix::basis(2, i));
            let s = steer(&inst.state, "R", &p, &["Q", "E"]).unwrap();
            match &inst.family {
                FamilySpec::Generators(gs) => assert!(s.matrix().distance(gs[i].matrix()) < 1e-12),
                _ => unreachable!(),
            }
        }
        let single = zero_discord_instance(1, 3, &[1.0], None, 1).unwrap();
        assert_eq!(single.state.label("R").unwrap().dim, 1);
        assert!(is_markov(&single.state, "R", "Q", "E").unwrap().is_markov);

        let sigma = env(9);
        let same = zero_discord_instance(3, 2, &[0.2, 0.3, 0.5], Some(vec![sigma.clone(); 3]), 0).unwrap();
        assert!(is_markov(&same.state, "R", "Q", "E").unwrap().is_markov);
        let want = tensor::tensor(&ComplexMatrix::from_real_diag(&[0.2, 0.3, 0.5]), sigma.matrix()).unwrap();
        assert!(same.member.matrix().distance(&want) < 1e-14);
    }

    #[test]
    fn zero_discord_rejects_bad_probabilities() {
        for probs in [&[0.5, 0.6][..], &[1.2, -0.2], &[1.0], &[f64::NAN, 1.0]] {
            assert!(matches!(zero_discord_instance(2, 2, probs, None, 0), Err(Error::Simplex(_))));
        }
    }

    fn golden_counterexample() -> CounterexampleInstance {
        let e = |k| LabeledState::basis(SystemLabel::new("E", 2), k).unwrap();
        let mixed = LabeledState::maximally_mixed(lab(&[("E", 2)])).unwrap();
        counterexample_instance(&e(0), &e(1), &mixed).unwrap()
    }

    #[test]
    fn counterexample_examples() {
        let inst = counterexample_instance(&env(1), &env(2), &env(3)).unwrap();
        let v = is_markov(&inst.state, "R", "Q", "E").unwrap();
        assert!(v.cmi_value <= 1e-10 && v.recovery_consistent());
        assert_eq!(inst.member(0.0).unwrap(), *inst.beta());
        assert!(matches!(inst.member(1.5), Err(Error::Simplex(_))));
        let e0 = env(1);
        assert!(matches!(counterexample_instance(&e0, &e0, &env(3)), Err(Error::DegenerateInput(_))));
        assert!(family_certificate(&inst.family).unwrap().is_markov());
    }

    #[test]
    fn counterexample_dephasing_golden_values() {
        let inst = golden_counterexample();
        for (p, want) in [
            (0.25, 0.08838834764831842),
            (0.5, 0.17677669529663684),
            (0.75, 0.2651650429449553),
        ] {
            let (_, d) = eigenbasis_dephase(&inst.member(p).unwrap(), "Q").unwrap();
            assert_abs_diff_eq!(d, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn literal_bell_dilation_is_not_markov() {
        let w = bell_dilation().unwrap();
        let omega = crate::states::tests::bell("R", "Q0");
        let inst = entangled_markov_instance(&w, &omega).unwrap();
        assert_abs_diff_eq!(inst.verdict.cmi_value, 1.0, epsilon = 1e-9);
        let re = inst.state.marginal(&["R", "E"]).unwrap();
        assert!(entanglement(&re, &["R"], EntanglementMeasure::Negativity).unwrap() < 1e-9);
        let p0 = ComplexMatrix::projector(&ComplexMatrix::basis(2, 0));
        let s = steer(&inst.state, "R", &p0, &["Q", "E"]).unwrap();
        assert_abs_diff_eq!(
            entanglement(&s, &["Q"], EntanglementMeasure::Negativity).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn invertible_dilation_gives_entangled_markov_family() {
        let w = invertible_dilation().unwrap();
        let omega = crate::states::tests::bell("R", "Q0");
        let inst = entangled_markov_instance(&w, &omega).unwrap();
        assert!(inst.verdict.is_markov && inst.verdict.recovery_consistent());
        let re = inst.state.marginal(&["R", "E"]).unwrap();
        assert!(entanglement(&re, &["R"], EntanglementMeasure::Negativity).unwrap() < 1e-9);
        let p0 = ComplexMatrix::projector(&ComplexMatrix::basis(2, 0));
        let s = steer(&inst.state, "R", &p0, &["Q", "E"]).unwrap();
        assert_abs_diff_eq!(
            entanglement(&s, &["Q"], EntanglementMeasure::Negativity).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(family_certificate(&inst.family).unwrap().is_markov());

        // Separable ω, entangling W: still Markov, still entangled members.
        let sep = LabeledState::new(
            ComplexMatrix::from_real_diag(&[0.5, 0.0, 0.0, 0.5]),
            lab(&[("R", 2), ("Q0", 2)]),
        )
        .unwrap();
        let inst = entangled_markov_instance(&w, &sep).unwrap();
        assert!(inst.verdict.is_markov);
        let s = steer(&inst.state, "R", &p0, &["Q", "E"]).unwrap();
        assert!(entanglement(&s, &["Q"], EntanglementMeasure::Negativity).unwrap() > 0.1);
    }

    #[test]
    fn product_dilation_gives_factorized_family() {
        let w = Isometry::append_ket(lab(&[("Q0", 2)]), &ComplexMatrix::basis(2, 0), lab(&[("E", 2)]))
            .unwrap()
            .with_out_labels(lab(&[("Q", 2), ("E", 2)]))
            .unwrap();
        let omega = random_state(lab(&[("R", 2), ("Q0", 2)]), 4, 3).unwrap();
        let inst = entangled_markov_instance(&w, &omega).unwrap();
        assert!(inst.verdict.is_markov);
        let qe = inst.state.marginal(&["Q", "E"]).unwrap();
        let prod = qe.marginal(&["Q"]).unwrap().product(&qe.marginal(&["E"]).unwrap()).unwrap();
        assert!(qe.trace_distance(&prod).unwrap() < 1e-12);
    }

    #[test]
    fn factorization_examples() {
        let trivial = LabeledState::maximally_mixed(lab(&[("R''", 1), ("E", 2)])).unwrap();
        let r = factorization_audit(2, &trivial).unwrap();
        assert!(r.is_markov && r.is_product);
        let cc = LabeledState::new(
            ComplexMatrix::from_real_diag(&[0.5, 0.0, 0.0, 0.5]),
            lab(&[("R''", 2), ("E", 2)]),
        )
        .unwrap();
        let r = factorization_audit(2, &cc).unwrap();
        assert_abs_diff_eq!(r.cmi, 1.0, epsilon = 1e-10);
        assert!(!r.is_markov && !r.is_product);
        let prod = env(4).relabel("E", "R''").unwrap().product(&env(5)).unwrap();
        let r = factorization_audit(3, &prod).unwrap();
        assert!(r.is_markov && r.is_product);
        assert_abs_diff_eq!(r.cmi, r.mutual_info_env, epsilon = 1e-10);
        assert!(matches!(factorization_audit(2, &env(1)), Err(Error::Dimension(_))));
    }

    #[test]
    fn revival_examples() {
        let tr = revival_trace(&[0.0, std::f64::consts::FRAC_PI_2], 2).unwrap();
        assert_abs_diff_eq!(tr.concurrence_rq[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(tr.cmi_re_given_q[0], 0.0, epsilon = 1e-10);
        assert!(tr.concurrence_rq[1] <= 1e-9);

        let grid = linspace(0.0, 2.0 * std::f64::consts::PI, 201);
        let tr = revival_trace(&grid, 2).unwrap();
        assert!(!tr.revival_intervals.is_empty());
        for &(a, b) in &tr.revival_intervals {
            let i = grid.iter().position(|&t| t == a).unwrap();
            let j = grid.iter().position(|&t| t == b).unwrap();
            assert!(tr.mutual_info_rq[j] > tr.mutual_info_rq[i]);
        }
        for k in 0..grid.len() - 1 {
            if tr.concurrence_rq[k + 1] - tr.concurrence_rq[k] > REVIVAL_NOISE {
                assert!(tr.cmi_re_given_q[k] > 1e-6, "step {k}");
            }
        }
    }

    #[test]
    fn revival_errors() {
        assert!(matches!(revival_trace(&[0.0, 0.0], 2), Err(Error::Grid(_))));
        assert!(matches!(revival_trace(&[1.0, 0.5], 2), Err(Error::Grid(_))));
        assert!(matches!(revival_trace(&[0.0, f64::NAN], 2), Err(Error::Grid(_))));
        assert!(matches!(revival_trace(&[], 2), Err(Error::Grid(_))));
        assert!(matches!(revival_trace(&[0.0], 3), Err(Error::Dimension(_))));
    }

    #[test]
    fn revival_interval_detection() {
        let t = linspace(0.0, 6.0, 7);
        let c = [1.0, 0.5, 0.5, 0.7, 0.9, 0.2, 0.4];
        assert_eq!(revival_intervals(&t, &c), vec![(2.0, 4.0), (5.0, 6.0)]);
        // Increases before any decrease are not revivals.
        assert!(revival_intervals(&t[..3], &[0.1, 0.2, 0.3]).is_empty());
    }

    #[test]
    fn random_markov_states_are_markov() {
        for seed in 0..30 {
            let dims = [2 + seed as usize % 2, 2 + (seed as usize / 2) % 3, 2];
            let rho = random_markov_state(dims[0], dims[1], dims[2], seed).unwrap();
            let v = is_markov(&rho, "R", "Q", "E").unwrap();
            assert!(v.is_markov && v.recovery_consistent(), "seed {seed}: {v:?}");
        }
    }

    #[test]
    fn theorem1_audit_passes_and_is_deterministic() {
        let a = theorem1_audit(5, 4, [2, 2, 2], 17).unwrap();
        assert!(a.passed, "{a:?}");
        assert_eq!(a.markov.reductions, 20);
        let b = theorem1_audit(5, 4, [2, 2, 2], 17).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let empty = theorem1_audit(0, 10, [2, 2, 2], 1).unwrap();
        assert_eq!(empty.markov.states + empty.non_markov.states, 0);
        assert!(matches!(theorem1_audit(1, 1, [2, 5, 2], 1), Err(Error::Dimension(_))));
    }
}
