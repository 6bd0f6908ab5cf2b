//! Runs `graphot suite paper-repro` once and re-checks every criterion from
//! the JSON report against tolerances fixed here, printing one line each.

use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Instant;

use graphot_cli::report::RunReport;

const EXAMPLE_EPS: [f64; 3] = [0.05, 0.1, 0.25];
const EXAMPLE_H: f64 = 1e-3;
const BB_H: f64 = 0.01;
const HOPF_LAX_H: f64 = 0.02;
const SUITE_BUDGET_S: f64 = 20.0 * 60.0;

struct Criterion {
    n: usize,
    name: &'static str,
    failures: Vec<String>,
    checked: usize,
}

impl Criterion {
    fn new(n: usize, name: &'static str) -> Self {
        Self { n, name, failures: Vec::new(), checked: 0 }
    }

    fn expect(&mut self, what: impl Into<String>, ok: bool, detail: String) {
        self.checked += 1;
        if !ok {
            self.failures.push(format!("{}: {detail}", what.into()));
        }
    }

    fn passed(&self) -> bool {
        self.checked > 0 && self.failures.is_empty()
    }

    fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let mut s = format!("{status} criterion {:>2} {:<34} {} checks", self.n, self.name, self.checked);
        for f in &self.failures {
            s.push_str(&format!("\n       {f}"));
        }
        s
    }
}

fn value(r: &RunReport, id: &str) -> f64 {
    r.assertions
        .iter()
        .find(|a| a.id == id)
        .unwrap_or_else(|| panic!("{} has no assertion {id}", r.command))
        .measured
}

fn entry<'a>(suite: &'a RunReport, kind: &str) -> Vec<&'a RunReport> {
    suite.entries.iter().filter(|e| e.command == kind).collect()
}

fn at_most(c: &mut Criterion, r: &RunReport, id: &str, bound: f64) {
    let v = value(r, id);
    c.expect(id, v <= bound, format!("{v:e} > {bound:e}"));
}

fn within(c: &mut Criterion, r: &RunReport, id: &str, target: f64, tol: f64) {
    let v = value(r, id);
    c.expect(id, (v - target).abs() <= tol, format!("|{v:e} - {target:e}| > {tol:e}"));
}

#[test]
fn paper_repro_suite() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("paper-repro");
    let _ = std::fs::remove_dir_all(&dir);
    let report_path = dir.join("report.json");
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get()).min(4);
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_graphot"))
        .args(["suite", "paper-repro", "--quiet", "--jobs", &jobs.to_string()])
        .arg("--out-dir")
        .arg(&dir)
        .arg("--report")
        .arg(&report_path)
        .env_remove("GRAPHOT_SEED")
        .stdout(Stdio::null())
        .status()
        .expect("graphot runs");
    let elapsed = start.elapsed().as_secs_f64();
    let suite: RunReport = serde_json::from_str(&std::fs::read_to_string(&report_path).expect("report written")).expect("report parses");

    let mut all = Vec::new();

    let mut c = Criterion::new(1, "two-branch entropy");
    let examples = entry(&suite, "example-4-1");
    c.expect("entries", examples.len() == EXAMPLE_EPS.len(), format!("{} example runs", examples.len()));
    for (r, eps) in examples.iter().zip(EXAMPLE_EPS) {
        let tag = |id: &str| format!("eps={eps} {id}");
        let (t0, t1) = ((1.0 - eps) / (2.0 - eps), 1.0 / (2.0 - eps));
        for (id, target, tol) in [
            ("c1.ent-start", (1.0 / (2.0 * eps)).ln(), 1e-6),
            ("c1.ent-end", (1.0 / eps).ln(), 1e-6),
            ("c1.kink-t0", t0, 1e-3),
            ("c1.kink-t1", t1, 1e-3),
        ] {
            let v = value(r, id);
            c.expect(tag(id), (v - target).abs() <= tol, format!("|{v:e} - {target:e}| > {tol:e}"));
        }
        for (id, bound) in [("c1.plateau-start", 1e-6), ("c1.plateau-end", 1e-6), ("c1.affine", 1e-3), ("c1.runtime", 30.0)] {
            let v = value(r, id);
            c.expect(tag(id), v <= bound, format!("{v:e} > {bound:e}"));
        }
        let v = value(r, "c1.nonconvex");
        c.expect(tag("c1.nonconvex"), v >= 1e3, format!("{v:e} < 1e3"));
    }
    if let Some(r) = examples.get(1) {
        // the worked example at eps = 0.1: plateaus log 5 and log 10, kinks 9/19 and 10/19
        within(&mut c, r, "c1.ent-start", 5f64.ln(), 1e-6);
        within(&mut c, r, "c1.ent-end", 10f64.ln(), 1e-6);
        within(&mut c, r, "c1.kink-t0", 0.473684, 1e-3);
        within(&mut c, r, "c1.kink-t1", 0.526316, 1e-3);
    }
    all.push(c);

    let mut c = Criterion::new(2, "static W2 of the example");
    for (r, eps, h) in examples.iter().zip(EXAMPLE_EPS).map(|(r, e)| (*r, e, EXAMPLE_H)).chain(entry(&suite, "bb-vs-static").into_iter().map(|r| (r, 0.1, BB_H))) {
        within(&mut c, r, "c2.w2", 2.0 - eps, 2.0 * h);
        at_most(&mut c, r, "c2.duality-gap", 1e-8 * (1.0 + (2.0 - eps) * (2.0 - eps)));
        within(&mut c, r, "c2.monotone", 0.0, 0.0);
        at_most(&mut c, r, "c2.halves", 2.0 * h);
    }
    all.push(c);

    let mut c = Criterion::new(3, "dynamic action vs static W2^2");
    for r in entry(&suite, "bb-vs-static") {
        let gaps: Vec<_> = r.assertions.iter().filter(|a| a.id.starts_with("c3.") && a.id.ends_with(".gap")).collect();
        c.expect("instances", gaps.len() == 6, format!("{} instances", gaps.len()));
        for a in r.assertions.iter().filter(|a| a.id.starts_with("c3.")) {
            let bound = if a.id.ends_with(".gap") { 0.02 } else { 300.0 };
            c.expect(a.id.clone(), a.measured <= bound, format!("{:e} > {bound:e}", a.measured));
        }
    }
    all.push(c);

    let mut c = Criterion::new(4, "regularisation");
    for r in entry(&suite, "regularize") {
        at_most(&mut c, r, "c4.mass", 1e-12);
        at_most(&mut c, r, "c4.density", 0.0);
        at_most(&mut c, r, "c4.kinetic", 1e-8);
        at_most(&mut c, r, "c4.duality", 1e-8);
    }
    all.push(c);

    let mut c = Criterion::new(5, "Hopf-Lax semigroup");
    for r in entry(&suite, "hopf-lax") {
        at_most(&mut c, r, "c5.lipschitz", 2.0 * (1.0 + 5.0 * HOPF_LAX_H));
        at_most(&mut c, r, "c5.hamilton-jacobi", 1.0);
    }
    all.push(c);

    let mut c = Criterion::new(6, "McKean-Vlasov solver");
    for r in entry(&suite, "mkv") {
        at_most(&mut c, r, "c6.mass", 1e-10);
        at_most(&mut c, r, "c6.stationary", 1e-8);
        at_most(&mut c, r, "c6.gibbs-l1", 1e-3);
        let v = value(r, "c6.positivity");
        c.expect("c6.positivity", v >= 0.0, format!("{v:e} < 0"));
    }
    all.push(c);

    let mut c = Criterion::new(7, "energy-dissipation balance");
    for r in entry(&suite, "ede") {
        at_most(&mut c, r, "c7.balance", 0.05);
        within(&mut c, r, "c7.refinement", 0.5, 0.15);
        let v = value(r, "c7.transported");
        c.expect("c7.transported", v >= 0.1, format!("{v:e} < 0.1"));
    }
    all.push(c);

    let mut c = Criterion::new(8, "minimising movements vs PDE");
    for r in entry(&suite, "jko") {
        at_most(&mut c, r, "c8.l1", 0.05);
        within(&mut c, r, "c8.monotone-heat", 1.0, 0.0);
        within(&mut c, r, "c8.monotone-drift", 1.0, 0.0);
    }
    all.push(c);

    let mut c = Criterion::new(9, "dissipation functional");
    for r in entry(&suite, "dissipation") {
        at_most(&mut c, r, "c9.gibbs", 1e-10);
        within(&mut c, r, "c9.uniform", 1.0, 0.01);
        at_most(&mut c, r, "c9.linfty", 1.0);
        within(&mut c, r, "c9.linfty-count", 10.0, 0.0);
    }
    all.push(c);

    let mut c = Criterion::new(10, "paper-repro end to end");
    c.expect("exit code", status.success(), format!("{status}"));
    c.expect("all assertions", suite.passed(), format!("{} failing", suite.all_assertions().iter().filter(|a| !a.passed).count()));
    c.expect("runtime", elapsed < SUITE_BUDGET_S, format!("{elapsed:.0} s"));
    c.expect("entries", suite.entries.len() == 10, format!("{} entries", suite.entries.len()));
    all.push(c);

    println!("paper-repro finished in {elapsed:.1} s with {jobs} jobs");
    for c in &all {
        println!("{}", c.line());
    }
    let failed: Vec<usize> = all.iter().filter(|c| !c.passed()).map(|c| c.n).collect();
    assert!(failed.is_empty(), "criteria failing: {failed:?}");
}
