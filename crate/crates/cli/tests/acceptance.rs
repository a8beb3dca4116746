//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use qpc_core::adversary::{self, AttackKind, AttackModel, AttackTarget, EntanglingAttack};
use qpc_core::analysis::{self, ExperimentReport, GuessRole};
use qpc_core::protocol::ProtocolConfig;
use qpc_core::quantum::{DecoyKind, Sign, StateVector, TwoQubitUnitary};
use qpc_core::rng::seeded;

const TRUTH_BUDGET: Duration = Duration::from_secs(1);
const CORRECTNESS_BUDGET: Duration = Duration::from_secs(60);
const DETECTION_BUDGET: Duration = Duration::from_secs(120);
const PROBE_BUDGET: Duration = Duration::from_secs(60);
const GHZ_BUDGET: Duration = Duration::from_secs(5);

const TRIALS: u64 = 10_000;
const EXACT_TOL: f64 = 1e-12;
const DISTINGUISHABILITY_TOL: f64 = 1e-10;
const ORTHONORMAL_TOL: f64 = 1e-12;
const PROBE_SAMPLES: usize = 100;
const MIN_DISTURBING: usize = 90;
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Runs a seeded Monte Carlo experiment, retrying once with a fresh seed if
/// it lands outside the band.
fn with_retry<F>(run: F) -> Result<(ExperimentReport, bool), String>
where
    F: Fn(u64) -> qpc_core::Result<ExperimentReport>,
{
    let first = run(SEED).map_err(|e| e.to_string())?;
    if first.pass {
        return Ok((first, false));
    }
    Ok((run(SEED + 1).map_err(|e| e.to_string())?, true))
}

fn describe(r: &ExperimentReport, retried: bool) -> String {
    format!(
        "{}={:.4} vs {:.4} (σ={:.4}{})",
        r.parameters.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(","),
        r.estimate,
        r.analytic.unwrap_or(f64::NAN),
        r.std_error,
        if retried { ", rerun" } else { "" }
    )
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if elapsed > budget {
        o.pass = false;
    }
    o.detail = format!("{} [{:.2}s / {:.0}s]", o.detail, elapsed.as_secs_f64(), budget.as_secs_f64());
    o
}

fn criterion_1() -> Outcome {
    timed(TRUTH_BUDGET, || match analysis::verify_truth_table() {
        Ok(r) => outcome(r.all_pass && r.rows.len() == 32, format!("{}/{} rows match", r.passed, r.rows.len())),
        Err(e) => outcome(false, e.to_string()),
    })
}

fn criterion_2() -> Outcome {
    timed(CORRECTNESS_BUDGET, || match analysis::exhaustive_correctness(5, SEED) {
        Ok(s) => {
            let pairs: u64 = s.cases.iter().map(|c| c.pairs).sum();
            let failures: u64 = s.cases.iter().map(|c| c.failures).sum();
            let exhaustive = s.cases.iter().all(|c| c.exhaustive);
            outcome(
                s.all_pass && exhaustive && s.cases.len() == 10,
                format!("{} (N,n) cases, {pairs} runs, {failures} wrong verdicts", s.cases.len()),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    })
}

fn detection_sweep(kind: AttackKind, decoys: &[usize]) -> Outcome {
    let model = AttackModel::new(kind, AttackTarget::AliceChannel);
    let config = ProtocolConfig::new(4, 2);
    let mut pass = true;
    let mut parts = Vec::new();
    for &l in decoys {
        match with_retry(|seed| analysis::detection_experiment(&model, l, TRIALS, &config, seed)) {
            Ok((r, retried)) => {
                pass &= r.pass;
                parts.push(format!("l={l}: {:.4} vs {:.4}{}", r.estimate, r.analytic.unwrap_or(f64::NAN), if retried { "*" } else { "" }));
            }
            Err(e) => return outcome(false, e),
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    timed(DETECTION_BUDGET, || {
        let analytic_ok = [1usize, 2, 4, 8].iter().all(|&l| {
            let model = AttackModel::new(AttackKind::InterceptResend, AttackTarget::AliceChannel);
            analysis::analytic_detection(&model, l)
                .map(|p| (p - (1.0 - 0.75f64.powi(l as i32))).abs() <= EXACT_TOL)
                .unwrap_or(false)
        });
        let mut o = detection_sweep(AttackKind::InterceptResend, &[1, 2, 4, 8]);
        o.pass &= analytic_ok;
        o
    })
}

fn criterion_4() -> Outcome {
    let kind = AttackKind::MeasurementResend;
    let mut exact = Vec::new();
    for d in DecoyKind::ALL {
        match adversary::decoy_error_probability(&kind, d) {
            Ok(p) => exact.push(p),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let exact_ok = exact.iter().all(|p| (p - 0.25).abs() <= EXACT_TOL);
    let mut o = detection_sweep(kind, &[1, 4]);
    o.pass &= exact_ok;
    let shown: Vec<String> = exact.iter().map(|p| format!("{p:.12}")).collect();
    o.detail = format!("exact per-decoy [{}]; {}", shown.join(", "), o.detail);
    o
}

fn criterion_5() -> Outcome {
    timed(PROBE_BUDGET, || {
        let mut rng = seeded(SEED);
        let mean_error = |u: &TwoQubitUnitary| {
            adversary::mean_decoy_error_probability(&AttackKind::EntangleMeasure(EntanglingAttack::new(u.clone())))
        };

        let mut worst_error = 0.0f64;
        let mut worst_dist = 0.0f64;
        for _ in 0..PROBE_SAMPLES {
            let u = adversary::random_constraint_satisfying(&mut rng);
            match (adversary::check_constraints(&u), mean_error(&u)) {
                (Ok(c), Ok(p)) if c.satisfied => {
                    worst_error = worst_error.max(p);
                    worst_dist = worst_dist.max(adversary::ancilla_distinguishability(&u));
                }
                _ => return outcome(false, "generated probe violates the constraints"),
            }
        }
        let part_a = worst_error <= EXACT_TOL && worst_dist <= DISTINGUISHABILITY_TOL;

        let cnot_error = mean_error(&TwoQubitUnitary::cnot()).unwrap_or(0.0);
        let mut disturbing = 0;
        let mut unexplained = 0;
        for _ in 0..PROBE_SAMPLES {
            let u = TwoQubitUnitary::random_haar(&mut rng);
            match mean_error(&u) {
                Ok(p) if p > EXACT_TOL => disturbing += 1,
                Ok(_) => {
                    if !adversary::check_constraints(&u).map(|c| c.satisfied).unwrap_or(false) {
                        unexplained += 1;
                    }
                }
                Err(e) => return outcome(false, e.to_string()),
            }
        }
        let part_b = cnot_error > EXACT_TOL && disturbing >= MIN_DISTURBING && unexplained == 0;
        outcome(
            part_a && part_b,
            format!(
                "satisfying: max error {worst_error:.1e}, max distinguishability {worst_dist:.1e}; \
                 CNOT error {cnot_error:.4}; random {disturbing}/{PROBE_SAMPLES} disturbing, {unexplained} unexplained"
            ),
        )
    })
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (n_total, n) in [(2, 2), (4, 2), (6, 2), (6, 3)] {
        let config = ProtocolConfig::new(n_total, n);
        for role in [GuessRole::Tp, GuessRole::Alice] {
            match with_retry(|seed| analysis::guess_experiment(role, &config, TRIALS, seed)) {
                Ok((r, retried)) => {
                    pass &= r.pass;
                    if !r.pass {
                        parts.push(describe(&r, retried));
                    } else {
                        parts.push(format!("({n_total},{n}) {}: {:.4}{}", role.name(), r.estimate, if retried { "*" } else { "" }));
                    }
                }
                Err(e) => return outcome(false, e),
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let exact = |n: u64, num: u64, den: u64| {
        analysis::qubit_efficiency(n)
            .map(|r| *r.efficiency.numer() == num && *r.efficiency.denom() == den)
            .unwrap_or(false)
    };
    let pinned = exact(2, 1, 3) && exact(4, 2, 5);
    let mut first_bad = None;
    for n in 2..=1_000_000u64 {
        if !analysis::qubit_efficiency(n).map(|r| r.bounds_ok).unwrap_or(false) {
            first_bad = Some(n);
            break;
        }
    }
    outcome(
        pinned && first_bad.is_none(),
        match first_bad {
            None => format!("η(2)=1/3, η(4)=2/5 {}; bounds hold for n ≤ 10^6", if pinned { "exact" } else { "WRONG" }),
            Some(n) => format!("bounds fail at n={n}"),
        },
    )
}

fn criterion_8() -> Outcome {
    timed(GHZ_BUDGET, || {
        let mut worst = 0.0f64;
        let mut sizes = Vec::new();
        for m in 3..=5usize {
            let mut family = Vec::new();
            for k in 0..1usize << (m - 1) {
                for sign in [Sign::Plus, Sign::Minus] {
                    match StateVector::canonical_ghz(k, sign, m) {
                        Ok(s) => family.push(s),
                        Err(e) => return outcome(false, e.to_string()),
                    }
                }
            }
            let dim = 1usize << m;
            if family.len() != dim {
                return outcome(false, format!("m={m}: {} states for dimension {dim}", family.len()));
            }
            // Gram matrix <ψ_i|ψ_j> against the identity
            for (i, a) in family.iter().enumerate() {
                for (j, b) in family.iter().enumerate() {
                    let g = a.inner_product(b).map(|z| z.norm()).unwrap_or(f64::NAN);
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g - target).abs());
                }
            }
            // completeness: Σ|ψ><ψ| = I, checked entrywise
            for r in 0..dim {
                for c in 0..dim {
                    let sum: f64 = family
                        .iter()
                        .map(|s| (s.amplitude(r) * s.amplitude(c).conj()).re)
                        .sum();
                    let target = if r == c { 1.0 } else { 0.0 };
                    worst = worst.max((sum - target).abs());
                }
            }
            sizes.push(format!("m={m}: {}", family.len()));
        }
        outcome(worst <= ORTHONORMAL_TOL, format!("{}; max deviation {worst:.1e}", sizes.join(", ")))
    })
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ghz-qpc"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() && out.status.code() != Some(1) {
        return Err(format!("{args:?} exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn criterion_9() -> Outcome {
    let cnot = concat!(env!("CARGO_MANIFEST_DIR"), "/unitaries/cnot.json");
    let invocations: [Vec<&str>; 3] = [
        vec!["run", "--N", "6", "--n", "2", "--secret-a", "101100", "--secret-b", "37", "--seed", "42", "--transcript", "--format", "json"],
        vec!["run", "--N", "4", "--n", "2", "--secret-a", "5", "--secret-b", "5", "--seed", "9", "--attack", "entangle", "--unitary", cnot, "--transcript"],
        vec!["attack", "--kind", "measure", "--decoys", "1,2", "--trials", "500", "--seed", "3", "--format", "json"],
    ];
    for args in &invocations {
        match (cli(args), cli(args)) {
            (Ok(a), Ok(b)) if a == b && !a.is_empty() => {}
            (Ok(_), Ok(_)) => return outcome(false, format!("{} output differs between runs", args[0])),
            (Err(e), _) | (_, Err(e)) => return outcome(false, e),
        }
    }
    outcome(true, format!("{} invocations byte-identical across repeated runs", invocations.len()))
}

type Check = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("truth table", criterion_1),
        ("honest correctness", criterion_2),
        ("intercept-resend detection", criterion_3),
        ("measurement-resend disturbance", criterion_4),
        ("entangling probe", criterion_5),
        ("guess rates", criterion_6),
        ("qubit efficiency", criterion_7),
        ("GHZ basis", criterion_8),
        ("CLI determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} {:<32} {}  {}", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
