//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

use std::time::{Duration, Instant};

use feec::simplicial::SimplicialComplex;
use feec::suite::{run_suite, MeshSource, ScalingSelect, Stage, SuiteConfig, SuiteOutput};
use feec::weights::Faults;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

/// All checks with one of the ids pass, and at least `min` of them exist.
fn ids_pass(out: &SuiteOutput, op: &str, ids: &[&str], min: usize) -> (bool, String) {
    let mut count = 0;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for id in ids {
        let cs = out.find(op, id);
        if cs.is_empty() {
            bad.push(format!("{id} missing"));
        }
        for c in cs {
            count += 1;
            if c.tol > 0.0 {
                worst = worst.max(c.max_err / c.tol);
            }
            if !c.pass {
                bad.push(format!("{id} err {:e} tol {:e}", c.max_err, c.tol));
            }
        }
    }
    let ok = bad.is_empty() && count >= min;
    let detail = if ok { format!("{count} checks, worst err/tol {worst:.2e}") } else { bad.join("; ") };
    (ok, detail)
}

fn structured(n: usize, m: usize) -> MeshSource {
    MeshSource::Structured { n, m }
}

fn run(cfg: SuiteConfig) -> SuiteOutput {
    run_suite(&cfg).expect("suite configuration")
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut worst = 0i64;
    for n in 1..=3 {
        for m in 1..=4 {
            let c = SimplicialComplex::structured(n, m).expect("mesh");
            worst = worst.max(c.boundary_boundary_defect()).max(c.coboundary_coboundary_defect());
        }
    }
    let dt = t.elapsed();
    outcome(worst == 0 && dt < Duration::from_secs(5), format!("max defect {worst}, {dt:.2?}"))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut ok = true;
    let mut count = 0;
    for n in 1..=3 {
        let out = run(SuiteConfig {
            mesh: structured(n, 1),
            r: 1..=4,
            stages: vec![Stage::Dimensions],
            ..SuiteConfig::default()
        });
        let (pass, _) = ids_pass(&out, "dimensions", &["dim716", "dim917"], 4 * (n + 1) * 2);
        ok &= pass;
        count += out.find("dimensions", "dim716").len() + out.find("dimensions", "dim917").len();
    }
    let dt = t.elapsed();
    outcome(ok && dt < Duration::from_secs(30), format!("{count} checks, {dt:.2?}"))
}

fn criterion_3(full: &SuiteOutput) -> Outcome {
    let (a, da) = ids_pass(full, "whitney", &["Wd", "Wd0", "Wcommute"], 7);
    let (b, db) = ids_pass(full, "scaling", &["Wbound"], 3);
    outcome(a && b, format!("rational identities: {da}; Wbound drift: {db}"))
}

fn criterion_4() -> Outcome {
    let mut ok = true;
    let mut count = 0;
    let mut cond: f64 = 0.0;
    for (n, m) in [(1, 3), (2, 2), (3, 1)] {
        let out = run(SuiteConfig {
            mesh: structured(n, m),
            r: 1..=3,
            stages: vec![Stage::Dimensions],
            ..SuiteConfig::default()
        });
        let (pass, _) = ids_pass(&out, "dimensions", &["unisolvence"], 3 * (n + 1));
        ok &= pass;
        count += out.find("dimensions", "unisolvence").len();
        for r in &out.reports {
            cond = cond.max(r.constants.get("dof_condition_max").copied().unwrap_or(f64::INFINITY));
        }
    }
    outcome(ok, format!("{count} (mesh, r, k) cases, largest DOF condition number {cond:.3e}"))
}

fn criterion_5(full: &SuiteOutput) -> Outcome {
    let (ok, d) = ids_pass(full, "extension", &["trE", "trEsig", "commuteE"], 9);
    outcome(ok, d)
}

fn criterion_6(full: &SuiteOutput) -> Outcome {
    let (a, da) = ids_pass(full, "extension", &["UU2-1", "UU3-2", "UU3"], 9);
    let (b, db) = ids_pass(full, "scaling", &["UU4"], 4);
    outcome(a && b, format!("{da}; exponent: {db}"))
}

fn criterion_7(full: &SuiteOutput, smoke: &SuiteOutput) -> Outcome {
    let (a, da) = ids_pass(full, "weights", &["ZZ0r", "ZZ1r", "ZZ2r", "ZZ3r"], 9);
    let (b, db) = ids_pass(full, "scaling", &["ZZ4r"], 9);
    let r1: Vec<_> = smoke.reports.iter().filter(|r| r.op == "scaling" && r.r == Some(1)).collect();
    let c = r1.len() == 4 && r1.iter().all(|r| r.checks.iter().any(|c| c.id == "ZZ4r" && c.pass));
    outcome(a && b && c, format!("{da}; n=2 exponent: {db}; n=3 r=1 exponent: {}", if c { "ok" } else { "failed" }))
}

fn criterion_8(full: &SuiteOutput, full_time: Duration, smoke: &SuiteOutput, smoke_time: Duration) -> Outcome {
    let ids = ["idempotence", "commutePi", "locality", "whitney_reproduction", "pi_one"];
    let (a, da) = ids_pass(full, "projection", &ids, 9);
    let (b, db) = ids_pass(full, "scaling", &["norm_drift"], 9);
    let samples_ok = full
        .reports
        .iter()
        .filter(|r| r.op == "projection" && r.k.is_some_and(|k| k < 2))
        .all(|r| r.constants.get("commute_samples").copied().unwrap_or(0.0) >= 20.0);
    let (c, _) = ids_pass(smoke, "projection", &ids, 8);
    let timing = full_time < Duration::from_secs(600) && smoke_time < Duration::from_secs(1200);
    outcome(
        a && b && c && samples_ok && timing && full.passed() && smoke.passed(),
        format!("{da}; norm drift: {db}; n=2 run {full_time:.1?}, n=3 smoke run {smoke_time:.1?}"),
    )
}

fn criterion_9() -> Outcome {
    let base = SuiteConfig { mesh: structured(2, 2), ..SuiteConfig::default() };
    let flip = run(SuiteConfig { flip_boundary: true, stages: vec![Stage::Complex], ..base.clone() });
    let flip_ok = !flip.passed() && flip.find("complex", "dd_zero").iter().any(|c| !c.pass);

    let faults = Faults { bubble_extra_cell: true, ..Faults::default() };
    let bubble = run(SuiteConfig { faults, r: 2..=2, stages: vec![Stage::Weights], ..base.clone() });
    let bubble_ok = !bubble.passed()
        && ["ZZ3r", "bubble_support"].iter().any(|id| bubble.find("weights", id).iter().any(|c| !c.pass));

    let faults = Faults { skip_mean_zero: true, ..Faults::default() };
    let mean = run(SuiteConfig { faults, stages: vec![Stage::Weights], ..base });
    let mean_ok = !mean.passed() && mean.find("weights", "compat_k1").iter().any(|c| !c.pass);

    outcome(
        flip_ok && bubble_ok && mean_ok,
        format!("dd_zero {flip_ok}, bubble_support {bubble_ok}, compat_k1 {mean_ok}"),
    )
}

fn main() {
    // `cargo test` passes harness flags; a name filter that matches nothing skips the suite.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if filter.iter().any(|f| !"acceptance".contains(f.as_str())) {
        return;
    }

    let t = Instant::now();
    let full = run(SuiteConfig { mesh: structured(2, 2), levels: 3, r: 1..=3, ..SuiteConfig::default() });
    let full_time = t.elapsed();
    let t = Instant::now();
    let smoke = run(SuiteConfig {
        mesh: structured(3, 1),
        r: 1..=2,
        k: 0..=3,
        scaling: ScalingSelect { max_r_3d: 1, ..ScalingSelect::default() },
        ..SuiteConfig::default()
    });
    let smoke_time = t.elapsed();

    let results = [
        ("1 combinatorial exactness", criterion_1()),
        ("2 dimension identities", criterion_2()),
        ("3 Whitney suite", criterion_3(&full)),
        ("4 DOF unisolvence", criterion_4()),
        ("5 extension operators", criterion_5(&full)),
        ("6 U operators", criterion_6(&full)),
        ("7 weights", criterion_7(&full, &smoke)),
        ("8 projection", criterion_8(&full, full_time, &smoke, smoke_time)),
        ("9 negative controls", criterion_9()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.ok as usize;
    }
    for (rep, c) in full.failures().into_iter().chain(smoke.failures()) {
        println!("  failing check {} {} r={:?} k={:?}: {:e} > {:e}", rep.op, c.id, rep.r, rep.k, c.max_err, c.tol);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
