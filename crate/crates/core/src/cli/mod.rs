//! Command-line front end.
//!
//! Exit codes: 0 on success or a positive verdict, 1 for I/O and parse
//! failures, 2 for inputs that fail validation, 3 for a negative verdict
//! (not Markov, refused certificate, failed audit).

pub mod files;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::gallery::{self, ScenarioTrace};
use crate::markov::{self, embedding_witness, is_markov_with_tol, reduced_dynamics_with_tol};
use crate::states::{eigenbasis_dephase, entanglement, EntanglementMeasure, LabeledState};
use crate::steering::{family_certificate, steer, FamilyCertificate};
use crate::tensor::{ComplexMatrix, SystemLabel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

/// Environment variable consulted when `--seed` is absent.
pub const SEED_VAR: &str = "MARKOVLAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "markovlab", version, about = "Markov states, CP reduced dynamics and data processing")]
struct Cli {
    /// Seed for randomized commands; falls back to $MARKOVLAB_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide whether R − Q − E is a Markov chain.
    CheckMarkov {
        state: PathBuf,
        #[arg(long)]
        r: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        e: String,
        #[arg(long, default_value_t = markov::MARKOV_TOL)]
        tol: f64,
    },
    /// Embed QE into one system and report the data-processing violation.
    Witness {
        state: PathBuf,
        #[arg(long, default_value = "R")]
        r: String,
        #[arg(long, default_value = "Q")]
        q: String,
        #[arg(long, default_value = "E")]
        e: String,
        /// Where to write the embedding isometry.
        #[arg(long, default_value = "embedding.json")]
        out: PathBuf,
        #[arg(long, default_value_t = markov::MARKOV_TOL)]
        tol: f64,
    },
    /// Build the CPTP reduced map Q → Q' of a Markov state.
    Reduce {
        state: PathBuf,
        isometry: PathBuf,
        #[arg(long, default_value = "channel.json")]
        out: PathBuf,
        #[arg(long, default_value_t = markov::MARKOV_TOL)]
        tol: f64,
    },
    /// Certify that a family of QE states has CP reduced dynamics.
    CertifyFamily { family: PathBuf },
    /// Run a built-in example.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
    /// Run a randomized audit.
    Audit {
        #[command(subcommand)]
        which: Audit,
    },
}

#[derive(Debug, Subcommand)]
enum Demo {
    /// Entanglement revivals under a partial swap; writes a CSV trace.
    Revival {
        #[arg(long, default_value_t = 201)]
        steps: usize,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        tmax: f64,
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
    },
    /// Zero-discord family.
    Example1,
    /// Discordant family with CP reduced dynamics.
    Example2,
    /// Entangled family from a dilation.
    Example3,
    /// Full steering forces initial factorization.
    Example4,
}

#[derive(Debug, Subcommand)]
enum Audit {
    /// Markov states versus CPTP reductions and data processing.
    Theorem1 {
        #[arg(long, default_value_t = 20)]
        states: usize,
        #[arg(long, default_value_t = 10)]
        isometries: usize,
        /// Dimensions of R, Q and E.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [2, 2, 2])]
        dims: Vec<usize>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse(_) => EXIT_IO,
        Error::NotMarkov { .. } => EXIT_NEGATIVE,
        _ => EXIT_INVALID,
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{SEED_VAR}={v} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Regular output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = if ok {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return if ok { EXIT_OK } else { EXIT_IO };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn verdict_code(positive: bool) -> i32 {
    if positive {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let seed = cli.seed;
    match cli.command {
        Command::CheckMarkov { state, r, q, e, tol } => {
            let rho = files::read_state(&state)?;
            let v = is_markov_with_tol(&rho, &r, &q, &e, tol)?;
            writeln!(out, "cmi={:.6}", display_bits(v.cmi_value))?;
            writeln!(out, "markov: {}", if v.is_markov { "yes" } else { "no" })?;
            if let Some(d) = v.recovery_distance {
                writeln!(out, "petz reconstruction distance: {d:.3e}")?;
            }
            Ok(verdict_code(v.is_markov))
        }
        Command::Witness { state, r, q, e, out: path, tol } => {
            let rho = files::read_state(&state)?;
            let w = embedding_witness(&rho, &r, &q, &e)?;
            files::write_isometry(&path, &w.embedding)?;
            writeln!(out, "violation={:.6}", display_bits(w.gap))?;
            writeln!(out, "embedding written to {}", path.display())?;
            Ok(verdict_code(!w.violates(tol)))
        }
        Command::Reduce { state, isometry, out: path, tol } => {
            let rho = files::read_state(&state)?;
            let v = files::read_isometry(&isometry)?;
            match reduced_dynamics_with_tol(&rho, &v, tol) {
                Ok(c) => {
                    files::write_channel(&path, &c)?;
                    writeln!(out, "reduced channel written to {}", path.display())?;
                    Ok(EXIT_OK)
                }
                Err(Error::NotMarkov { cmi }) => {
                    writeln!(out, "not Markov: cmi={cmi:.6}; no CPTP reduction is guaranteed")?;
                    Ok(EXIT_NEGATIVE)
                }
                Err(e) => Err(e),
            }
        }
        Command::CertifyFamily { family } => {
            let spec = files::read_family(&family)?;
            let cert = family_certificate(&spec)?;
            writeln!(out, "{cert}")?;
            Ok(verdict_code(matches!(cert, FamilyCertificate::Markov { .. })))
        }
        Command::Demo { which } => match which {
            Demo::Revival { steps, tmax, out: path } => demo_revival(steps, tmax, &path, out),
            Demo::Example1 => demo_example1(resolve_seed(seed)?, out),
            Demo::Example2 => demo_example2(out),
            Demo::Example3 => demo_example3(out),
            Demo::Example4 => demo_example4(resolve_seed(seed)?, out),
        },
        Command::Audit {
            which: Audit::Theorem1 { states, isometries, dims },
        } => {
            let dims: [usize; 3] = dims
                .try_into()
                .map_err(|_| Error::Parse("--dims takes three values".into()))?;
            let report = gallery::theorem1_audit(states, isometries, dims, resolve_seed(seed)?)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            Ok(verdict_code(report.passed))
        }
    }
}

/// Rounds values that would print as `-0.000000` to zero.
fn display_bits(x: f64) -> f64 {
    if x.abs() < 5e-7 {
        0.0
    } else {
        x
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn demo_revival(steps: usize, tmax: f64, path: &Path, out: &mut dyn Write) -> Result<i32> {
    let trace = gallery::revival_trace(&gallery::linspace(0.0, tmax, steps), 2)?;
    emit_trace(&trace, path)?;
    writeln!(out, "{} points written to {}", trace.times.len(), path.display())?;
    for (a, b) in &trace.revival_intervals {
        writeln!(out, "revival: t in [{a:.4}, {b:.4}]")?;
    }
    Ok(EXIT_OK)
}

fn projector(d: usize, k: usize) -> ComplexMatrix {
    ComplexMatrix::projector(&ComplexMatrix::basis(d, k))
}

fn demo_example1(seed: u64, out: &mut dyn Write) -> Result<i32> {
    let inst = gallery::zero_discord_instance(2, 2, &[0.5, 0.5], None, seed)?;
    let v = markov::is_markov(&inst.state, "R", "Q", "E")?;
    let mut steered_ok = true;
    if let crate::steering::FamilySpec::Generators(gs) = &inst.family {
        for (i, g) in gs.iter().enumerate() {
            let s = steer(&inst.state, "R", &projector(gs.len(), i), &["Q", "E"])?;
            steered_ok &= s.trace_distance(g)? <= 1e-9;
        }
    }
    writeln!(out, "ρ_RQE Markov: {} (cmi = {:.3e})", yes(v.is_markov), v.cmi_value)?;
    writeln!(out, "Petz reconstruction distance: {:.3e}", v.recovery_distance.unwrap_or(f64::NAN))?;
    writeln!(out, "steering |i⟩⟨i| on R recovers each component: {}", yes(steered_ok))?;
    Ok(verdict_code(v.is_markov && v.recovery_consistent() && steered_ok))
}

fn demo_example2(out: &mut dyn Write) -> Result<i32> {
    let e = |k| LabeledState::basis(SystemLabel::new("E", 2), k);
    let mixed = LabeledState::maximally_mixed(vec![SystemLabel::new("E", 2)])?;
    let inst = gallery::counterexample_instance(&e(0)?, &e(1)?, &mixed)?;
    let v = markov::is_markov(&inst.state, "R", "Q", "E")?;
    let (_, d) = eigenbasis_dephase(&inst.member(0.5)?, "Q")?;
    let markov_ok = v.cmi_value < 1e-9 && v.recovery_consistent();
    writeln!(
        out,
        "ζ_RQE Markov: {} (cmi < 1e-9); dephasing distance p=0.5: {} ({d:.6})",
        yes(markov_ok),
        if d > 0.0 { ">0" } else { "0" }
    )?;
    for p in [0.25, 0.75] {
        let (_, d) = eigenbasis_dephase(&inst.member(p)?, "Q")?;
        writeln!(out, "dephasing distance p={p}: {d:.6}")?;
    }
    let cert = family_certificate(&inst.family)?;
    writeln!(out, "{cert}")?;
    Ok(verdict_code(markov_ok && d > 1e-3 && cert.is_markov()))
}

fn report_dilation(label: &str, w: &crate::channels::Isometry, out: &mut dyn Write) -> Result<bool> {
    let omega = LabeledState::pure(
        &[1.0, 0.0, 0.0, 1.0].map(|x| crate::tensor::C64::new(x * std::f64::consts::FRAC_1_SQRT_2, 0.0)),
        vec![SystemLabel::new("R", 2), SystemLabel::new("Q0", 2)],
    )?;
    let inst = gallery::entangled_markov_instance(w, &omega)?;
    let member = steer(&inst.state, "R", &projector(2, 0), &["Q", "E"])?;
    let neg_member = entanglement(&member, &["Q"], EntanglementMeasure::Negativity)?;
    let neg_re = entanglement(&inst.state.marginal(&["R", "E"])?, &["R"], EntanglementMeasure::Negativity)?;
    writeln!(out, "{label}:")?;
    writeln!(out, "  cmi = {:.6} (Markov: {})", display_bits(inst.verdict.cmi_value), yes(inst.verdict.is_markov))?;
    writeln!(out, "  negativity of the member steered by |0⟩⟨0|: {neg_member:.6}")?;
    writeln!(out, "  negativity of ρ_RE: {neg_re:.3e}")?;
    Ok(inst.verdict.is_markov && inst.verdict.recovery_consistent())
}

fn demo_example3(out: &mut dyn Write) -> Result<i32> {
    let literal = report_dilation(
        "W|0⟩=(|00⟩+|11⟩)/√2, W|1⟩=(|01⟩+|10⟩)/√2",
        &gallery::bell_dilation()?,
        out,
    )?;
    if !literal {
        writeln!(
            out,
            "  this W is not invertible on Q (Tr_E W·W† keeps only the X component), so ρ_RQE is not Markov"
        )?;
    }
    let invertible = report_dilation("W|ψ⟩=|ψ⟩⊗|Φ⁺⟩ (invertible on Q)", &gallery::invertible_dilation()?, out)?;
    Ok(verdict_code(literal && invertible))
}

fn demo_example4(seed: u64, out: &mut dyn Write) -> Result<i32> {
    use crate::states::random_state;
    let lab = |a: &str, da, b: &str, db| vec![SystemLabel::new(a, da), SystemLabel::new(b, db)];
    let product = random_state(vec![SystemLabel::new("R''", 2)], 2, seed)?
        .product(&random_state(vec![SystemLabel::new("E", 2)], 2, seed.wrapping_add(1))?)?;
    let correlated = LabeledState::new(ComplexMatrix::from_real_diag(&[0.5, 0.0, 0.0, 0.5]), lab("R''", 2, "E", 2))?;
    let trivial = LabeledState::maximally_mixed(lab("R''", 1, "E", 2))?;
    let mut ok = true;
    for (name, env) in [("trivial R''", trivial), ("product R''E", product), ("correlated R''E", correlated)] {
        let r = gallery::factorization_audit(2, &env)?;
        writeln!(
            out,
            "{name}: cmi = {:.6}, I(R'';E) = {:.6}, Markov: {}, product: {}",
            display_bits(r.cmi),
            display_bits(r.mutual_info_env),
            yes(r.is_markov),
            yes(r.is_product)
        )?;
        ok &= r.is_markov == r.is_product && (r.cmi - r.mutual_info_env).abs() <= 1e-10;
    }
    Ok(verdict_code(ok))
}

/// Formats `x` with 12 significant digits, without trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x.is_infinite() { format!("{x}") } else { "0".into() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn write_trace(trace: &ScenarioTrace, w: &mut dyn Write) -> io::Result<()> {
    writeln!(w, "t,concurrence_RQ,mutual_info_RQ,cmi_RE_given_Q,in_revival")?;
    for (k, &t) in trace.times.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_sig(t),
            format_sig(trace.concurrence_rq[k]),
            format_sig(trace.mutual_info_rq[k]),
            format_sig(trace.cmi_re_given_q[k]),
            u8::from(trace.in_revival(t))
        )?;
    }
    Ok(())
}

pub fn emit_trace(trace: &ScenarioTrace, path: &Path) -> Result<()> {
    let io_err = |e: io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write_trace(trace, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}
