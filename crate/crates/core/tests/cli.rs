use std::path::Path;
use std::process::{Command, Output};

use markovlab::channels::{choi, Channel, Isometry};
use markovlab::cli::files;
use markovlab::states::{random_state, LabeledState};
use markovlab::tensor::{SystemLabel, C64};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_markovlab"));
    c.env_remove("MARKOVLAB_SEED");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn lab(spec: &[(&str, usize)]) -> Vec<SystemLabel> {
    spec.iter().map(|(n, d)| SystemLabel::new(*n, *d)).collect()
}

fn ghz() -> LabeledState {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amp = vec![C64::new(0.0, 0.0); 8];
    amp[0] = C64::new(s, 0.0);
    amp[7] = C64::new(s, 0.0);
    LabeledState::pure(&amp, lab(&[("R", 2), ("Q", 2), ("E", 2)])).unwrap()
}

#[test]
fn check_markov_on_ghz() {
    let dir = TempDir::new().unwrap();
    files::write_state(&dir.path().join("ghz.json"), &ghz()).unwrap();
    let o = run(&["check-markov", "ghz.json", "--r", "R", "--q", "Q", "--e", "E"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let text = stdout(&o);
    assert!(text.contains("cmi=1.000000"), "{text}");
    assert!(text.contains("markov: no"));
}

#[test]
fn reduce_factorized_state_with_identity() {
    let dir = TempDir::new().unwrap();
    let rq = random_state(lab(&[("R", 2), ("Q", 2)]), 2, 3).unwrap();
    let e = random_state(lab(&[("E", 2)]), 2, 4).unwrap();
    files::write_state(&dir.path().join("state.json"), &rq.product(&e).unwrap()).unwrap();
    let v = Isometry::identity(lab(&[("Q", 2), ("E", 2)])).unwrap().with_out_labels(lab(&[("Q'", 2), ("E'", 2)])).unwrap();
    files::write_isometry(&dir.path().join("v.json"), &v).unwrap();

    let o = run(&["reduce", "state.json", "v.json", "--out", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let c = files::read_channel(&dir.path().join("c.json")).unwrap();
    let id = Channel::identity(lab(&[("Q", 2)])).unwrap();
    assert!(choi(&c).distance(choi(&id)) < 1e-9);
}

#[test]
fn reduce_refuses_non_markov() {
    let dir = TempDir::new().unwrap();
    files::write_state(&dir.path().join("ghz.json"), &ghz()).unwrap();
    let v = Isometry::identity(lab(&[("Q", 2), ("E", 2)])).unwrap();
    files::write_isometry(&dir.path().join("v.json"), &v).unwrap();
    let o = run(&["reduce", "ghz.json", "v.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(!dir.path().join("channel.json").exists());
}

#[test]
fn witness_writes_embedding() {
    let dir = TempDir::new().unwrap();
    files::write_state(&dir.path().join("ghz.json"), &ghz()).unwrap();
    let o = run(&["witness", "ghz.json", "--out", "w.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("violation=1.000000"));
    let w = files::read_isometry(&dir.path().join("w.json")).unwrap();
    assert_eq!(w.matrix().rows(), 4);
}

#[test]
fn error_exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = run(&["check-markov", "nope.json", "--r", "R", "--q", "Q", "--e", "E"], dir.path());
    assert_eq!(missing.status.code(), Some(1));

    std::fs::write(dir.path().join("junk.json"), "{ not json").unwrap();
    let junk = run(&["check-markov", "junk.json", "--r", "R", "--q", "Q", "--e", "E"], dir.path());
    assert_eq!(junk.status.code(), Some(1));

    let not_psd = r#"{"systems":[{"label":"A","dim":2}],"matrix":[[[2,0],[0,0]],[[0,0],[-1,0]]]}"#;
    std::fs::write(dir.path().join("bad.json"), not_psd).unwrap();
    let bad = run(&["check-markov", "bad.json", "--r", "A", "--q", "A", "--e", "A"], dir.path());
    assert_eq!(bad.status.code(), Some(2));

    files::write_state(&dir.path().join("ghz.json"), &ghz()).unwrap();
    let unknown = run(&["check-markov", "ghz.json", "--r", "X", "--q", "Q", "--e", "E"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));

    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn certify_family_files() {
    let dir = TempDir::new().unwrap();
    let gens: Vec<_> = (0..2)
        .map(|k| files::StateFile::from_state(&random_state(lab(&[("Q", 2), ("E", 2)]), 4, k).unwrap()))
        .collect();
    files::write_json(&dir.path().join("fam.json"), &files::FamilyFile::Generators(gens)).unwrap();
    let o = run(&["certify-family", "fam.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("not a disproof"));

    let q = files::StateFile::from_state(&LabeledState::basis(SystemLabel::new("Q", 2), 0).unwrap());
    let e = random_state(lab(&[("E", 2)]), 2, 9).unwrap();
    let prod = |s: &LabeledState| files::StateFile::from_state(&s.product(&e).unwrap());
    let q0 = q.to_state().unwrap();
    let q1 = LabeledState::basis(SystemLabel::new("Q", 2), 1).unwrap();
    files::write_json(&dir.path().join("ok.json"), &files::FamilyFile::Generators(vec![prod(&q0), prod(&q1)])).unwrap();
    assert_eq!(run(&["certify-family", "ok.json"], dir.path()).status.code(), Some(0));
}

#[test]
fn revival_demo_csv() {
    let dir = TempDir::new().unwrap();
    let o = run(&["demo", "revival", "--out", "trace.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 202);
    assert_eq!(lines[0], "t,concurrence_RQ,mutual_info_RQ,cmi_RE_given_Q,in_revival");
    assert!(stdout(&o).contains("revival: t in"));
}

#[test]
fn demos_run() {
    let dir = TempDir::new().unwrap();
    for (name, code) in [("example1", 0), ("example2", 0), ("example3", 3), ("example4", 0)] {
        let o = run(&["demo", name], dir.path());
        assert_eq!(o.status.code(), Some(code), "{name}: {}", stdout(&o));
    }
    assert!(stdout(&run(&["demo", "example2"], dir.path())).contains("dephasing distance p=0.5: >0 (0.176777)"));
}

#[test]
fn audit_is_seeded() {
    let dir = TempDir::new().unwrap();
    let args = ["audit", "theorem1", "--states", "3", "--isometries", "2"];
    let a = run(&[&args[..], &["--seed", "7"]].concat(), dir.path());
    let b = bin().args(args).env("MARKOVLAB_SEED", "7").current_dir(dir.path()).output().unwrap();
    let c = run(&[&args[..], &["--seed", "8"]].concat(), dir.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert!(stdout(&a).contains("\"passed\": true"));

    let bad = bin().args(args).env("MARKOVLAB_SEED", "seven").current_dir(dir.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
