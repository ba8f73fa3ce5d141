//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Criterion 6 synthesizes the two-room V from scratch under its 30 minute
//! budget. The B search, which cannot succeed on that model, is capped at a few
//! minutes unless `DIAGCERT_ACCEPTANCE_FULL=1` grants it the full budget. The harness always exits 0 so that the remaining test targets run;
//! failures are reported on their lines and in the closing summary.

use std::sync::mpsc;
use std::time::{Duration, Instant};

use diagcert::automaton::{label_continuous, LabelPartition, Symbol};
use diagcert::cegis::{synthesize_b, synthesize_v, CegisConfig, CegisOutcome, CegisResult};
use diagcert::certificate::{
    check_certificate, CertKind, Certificate, CheckConfig, CheckReport, CheckVerdict, Template,
};
use diagcert::diagnoser::{run_diagnoser, simulate, DiagVerdict, GridConfig};
use diagcert::falsifier::{FalsifyOutcome, Mode};
use diagcert::model::catalog::{running_example, two_room, TwoRoomParams};
use diagcert::model::{load_system, Interval, Polynomial, SystemModel};
use diagcert::product_oracle::{
    definitional_check, random_finite_model, safe_horizon, verify_exact, witness_is_valid, Witness,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn running() -> SystemModel {
    SystemModel::Finite(running_example())
}

fn room() -> SystemModel {
    SystemModel::Continuous(two_room(TwoRoomParams::default()))
}

fn load_cert(name: &str) -> Certificate {
    Certificate::load(format!("{DATA}/{name}").as_ref()).expect("bundled certificate loads")
}

fn first_failure(r: &CheckReport) -> String {
    r.conditions
        .iter()
        .find_map(|c| match &c.outcome {
            FalsifyOutcome::Counterexample { point, violation } => {
                Some(format!("{} fails at {point:?} by {violation:.3e}", c.name))
            }
            _ => None,
        })
        .unwrap_or_else(|| "no counterexample".into())
}

fn criterion1() -> Outcome {
    let t0 = Instant::now();
    let m = running();
    let yes = verify_exact(&m, 1.0, 3).unwrap();
    let no = verify_exact(&m, 1.0, 2).unwrap();
    let replay = no
        .witness
        .as_ref()
        .map(|w| witness_is_valid(&m, 1.0, 2, w))
        .unwrap_or(false);
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        yes.diagnosable && !no.diagnosable && replay && secs < 1.0,
        format!(
            "(1,3) {}, (1,2) {} with witness replay {}, {secs:.3}s",
            verdict_word(yes.diagnosable),
            verdict_word(no.diagnosable),
            if replay { "ok" } else { "failed" }
        ),
    )
}

fn verdict_word(d: bool) -> &'static str {
    if d {
        "DIAGNOSABLE"
    } else {
        "NOT DIAGNOSABLE"
    }
}

fn criterion2() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    let mut negatives = 0;
    for _ in 0..200 {
        let f = random_finite_model(&mut rng, 8, 3);
        let delta = [0.25, 0.5, 1.0, 1.5][rng.gen_range(0..4)];
        let k = rng.gen_range(0..4);
        let a = verify_exact(&SystemModel::Finite(f.clone()), delta, k).unwrap();
        let b = definitional_check(&f, delta, k, safe_horizon(&f, k)).unwrap();
        bad += usize::from(a.diagnosable != b.diagnosable);
        negatives += usize::from(!a.diagnosable);
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        bad == 0 && secs < 60.0,
        format!("200 models ({negatives} not diagnosable), {bad} disagreements, {secs:.2}s"),
    )
}

fn exhaustive_check(m: &SystemModel, cert: &Certificate, margin: f64) -> CheckReport {
    let mut cfg = CheckConfig::default();
    cfg.falsifier.margin = margin;
    check_certificate(m, cert, Mode::Certify, &cfg).unwrap()
}

fn criterion3() -> Outcome {
    let t0 = Instant::now();
    let m = running();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, file) in [
        ("B (1,3)", "b_running_k3.json"),
        ("V (1,2)", "v_running_k2.json"),
    ] {
        let cert = load_cert(file);
        let mut passed_at = None;
        let mut last = None;
        for margin in [1e-6, 1e-4] {
            let r = exhaustive_check(&m, &cert, margin);
            if r.verdict == CheckVerdict::Valid && r.exhaustive {
                passed_at = Some(margin);
                break;
            }
            last = Some(r);
        }
        match passed_at {
            Some(mg) => parts.push(format!("{name} VALID at margin {mg:e}")),
            None => {
                pass = false;
                let r = last.unwrap();
                parts.push(format!(
                    "{name} {} at margins 1e-6 and 1e-4 ({})",
                    r.verdict.as_str(),
                    first_failure(&r)
                ));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        pass && secs < 5.0,
        format!("{}; {secs:.2}s", parts.join("; ")),
    )
}

fn criterion4() -> Outcome {
    let m = running();
    let ys = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    let g = GridConfig::default();
    let a = run_diagnoser(&m, 1.0, 3, &ys(&[0.0, 2.2, 3.2, 5.2, 7.2]), &g).unwrap();
    let b = run_diagnoser(&m, 1.0, 3, &ys(&[0.0, 1.2, 3.2, 5.2, 9.0]), &g).unwrap();
    let want_a: Vec<Vec<Vec<f64>>> = vec![ys(&[0.0]), ys(&[2.2]), ys(&[4.2]), ys(&[6.2]), vec![]];
    let want_b: Vec<Vec<Vec<f64>>> =
        vec![ys(&[0.0]), ys(&[2.2]), ys(&[4.2]), ys(&[6.2]), ys(&[9.0])];
    let show = |sets: &[Vec<Vec<f64>>]| {
        sets.iter()
            .map(|s| {
                let v: Vec<String> = s.iter().map(|p| format!("{}", p[0])).collect();
                if v.is_empty() {
                    "∅".to_string()
                } else {
                    format!("{{{}}}", v.join(","))
                }
            })
            .collect::<String>()
    };
    outcome(
        a.sets == want_a && a.d == 1 && b.sets == want_b && b.d == 0,
        format!("{} D={}; {} D={}", show(&a.sets), a.d, show(&b.sets), b.d),
    )
}

/// Certificates that passed their synthesis run, kept for criterion 8.
struct Synthesized {
    model: SystemModel,
    cert: Certificate,
    exhaustive: bool,
}

fn criterion5(found: &mut Vec<Synthesized>) -> Outcome {
    let m = running();
    let cfg = CegisConfig::default();
    let t0 = Instant::now();
    let b = synthesize_b(&m, 1.0, 3, &Template::uniform(1, 3, 3), &cfg);
    let tb = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let v = synthesize_v(&m, 1.0, 2, &Template::uniform(1, 2, 2), None, &cfg);
    let tv = t1.elapsed().as_secs_f64();
    let b_ok = match (&b.outcome, &b.certificate) {
        (CegisOutcome::Certified { exhaustive: true }, Some(c)) => {
            let r = exhaustive_check(&m, c, cfg.check.falsifier.margin);
            r.verdict == CheckVerdict::Valid && r.exhaustive
        }
        _ => false,
    };
    let v_ok = matches!(v.outcome, CegisOutcome::Certified { .. });
    for r in [&b, &v] {
        if let (CegisOutcome::Certified { exhaustive }, Some(c)) = (&r.outcome, &r.certificate) {
            found.push(Synthesized {
                model: m.clone(),
                cert: c.clone(),
                exhaustive: *exhaustive,
            });
        }
    }
    outcome(
        b_ok && v_ok && tb < 60.0 && tv < 60.0,
        format!(
            "B (1,3) cubic {} in {} iterations, {tb:.2}s; V (1,2) quadratic {} in {} iterations, {tv:.2}s",
            status(&b),
            b.log.len(),
            status(&v),
            v.log.len()
        ),
    )
}

fn status(r: &CegisResult) -> &'static str {
    match r.outcome {
        CegisOutcome::Certified { exhaustive: true } => "CERTIFIED",
        CegisOutcome::Certified { exhaustive: false } => "CERTIFIED AT RESOLUTION",
        CegisOutcome::TemplateInfeasible => "TEMPLATE INFEASIBLE",
        CegisOutcome::Budget => "BUDGET",
    }
}

/// Runs a synthesis on a worker thread and gives up after `cap`.
fn capped<F>(cap: Duration, job: F) -> (Option<CegisResult>, f64)
where
    F: FnOnce() -> CegisResult + Send + 'static,
{
    let (tx, rx) = mpsc::channel();
    let t0 = Instant::now();
    std::thread::spawn(move || {
        let _ = tx.send(job());
    });
    let r = rx.recv_timeout(cap).ok();
    (r, t0.elapsed().as_secs_f64())
}

fn continuous_cfg() -> CegisConfig {
    let mut cfg = CegisConfig::default();
    cfg.check.falsifier.eps_box = 0.05;
    cfg.check.falsifier.input_grid = 5;
    cfg
}

/// Two runs from (20,20) that stay within 0.5 of each other while only the
/// first is faulty, for longer than `k` steps after the fault.
fn room_witness(k: usize) -> Witness {
    let m = room();
    let c = m.as_continuous().unwrap().clone();
    let mut u_run = vec![vec![1.0, 1.0], vec![0.3, 0.3]];
    let mut uh_run = vec![vec![1.0, 1.0], vec![0.2, 0.3]];
    let mut x_run = vec![vec![20.0, 20.0]];
    let mut xh_run = vec![vec![20.0, 20.0]];
    let mut fault = None;
    let mut i = 0;
    while fault.map(|f: usize| x_run.len() <= f + k).unwrap_or(true) {
        if u_run.len() == i {
            u_run.push(vec![0.0, 0.0]);
            uh_run.push(vec![0.0, 0.0]);
        }
        x_run.push(c.successor(x_run.last().unwrap(), &u_run[i]).unwrap());
        xh_run.push(c.successor(xh_run.last().unwrap(), &uh_run[i]).unwrap());
        i += 1;
        fault = fault.or_else(|| x_run.iter().position(|p| c.is_faulty(p)));
    }
    u_run.truncate(i);
    uh_run.truncate(i);
    Witness {
        x_run,
        xh_run,
        u_run,
        uh_run,
        fault_step: fault.unwrap(),
    }
}

fn criterion6(full: bool, found: &mut Vec<Synthesized>) -> Outcome {
    let cap = Duration::from_secs(if full { 1800 } else { 180 });
    let mut parts = Vec::new();

    // B, (0.5, 5)
    let w5 = room_witness(5);
    let not_diag = witness_is_valid(&room(), 0.5, 5, &w5);
    let (rb, tb) = capped(cap, || {
        let m = room();
        synthesize_b(&m, 0.5, 5, &Template::uniform(2, 5, 2), &continuous_cfg())
    });
    let b_ok = matches!(
        rb.as_ref().map(|r| &r.outcome),
        Some(CegisOutcome::Certified { .. })
    );
    if let Some(r) = &rb {
        if let (CegisOutcome::Certified { exhaustive }, Some(c)) = (&r.outcome, &r.certificate) {
            found.push(Synthesized {
                model: room(),
                cert: c.clone(),
                exhaustive: *exhaustive,
            });
        }
    }
    parts.push(format!(
        "B (0.5,5): {} after {tb:.0}s (cap {}s){}",
        rb.as_ref().map(status).unwrap_or("NOT FINISHED"),
        cap.as_secs(),
        if not_diag {
            "; a replayed pair of runs shows the model is not (0.5,5)-diagnosable, so no valid B exists"
        } else {
            ""
        }
    ));

    // V, (0.5, 3), always from scratch under the full cap
    let (rv, tv) = capped(Duration::from_secs(1800), || {
        let m = room();
        synthesize_v(
            &m,
            0.5,
            3,
            &Template::uniform(2, 3, 2),
            None,
            &continuous_cfg(),
        )
    });
    let v_ok = matches!(
        rv.as_ref().map(|r| &r.outcome),
        Some(CegisOutcome::Certified { .. })
    );
    if let Some(r) = &rv {
        if let (CegisOutcome::Certified { exhaustive }, Some(c)) = (&r.outcome, &r.certificate) {
            found.push(Synthesized {
                model: room(),
                cert: c.clone(),
                exhaustive: *exhaustive,
            });
        }
    }
    parts.push(format!(
        "V (0.5,3): {} after {tv:.0}s",
        rv.as_ref().map(status).unwrap_or("NOT FINISHED")
    ));

    // appendix-style B_SMT certificate
    let t0 = Instant::now();
    let cert = load_cert("b_smt_two_room.json");
    let mut cfg = CheckConfig::default();
    cfg.falsifier.margin = 1e-3;
    cfg.falsifier.eps_box = 0.1;
    let r = check_certificate(&room(), &cert, Mode::Certify, &cfg).unwrap();
    let smt_ok = r.verdict != CheckVerdict::Invalid;
    parts.push(format!(
        "B_SMT at margin 1e-3, eps-box 0.1: {} ({}) in {:.0}s",
        r.verdict.as_str(),
        first_failure(&r),
        t0.elapsed().as_secs_f64()
    ));

    let mode = if full { "full" } else { "default" };
    outcome(
        b_ok && v_ok && smt_ok,
        format!("[{mode} mode] {}", parts.join("; ")),
    )
}

fn criterion7() -> Outcome {
    let m = room();
    let inputs = vec![vec![0.5, 0.5]; 11];
    let exact = simulate(&m, &[20.0, 20.0], &inputs, 0.0, None).unwrap();
    let Some(kf) = exact.fault_step else {
        return outcome(false, "exact run never enters the faulty set");
    };
    let noisy = simulate(&m, &[20.0, 20.0], &inputs, 0.5, Some(0)).unwrap();
    let t = run_diagnoser(&m, 0.5, 5, &noisy.observations, &GridConfig::default()).unwrap();
    match t.verdict {
        DiagVerdict::FaultDetected { from, to, .. } => outcome(
            kf <= to && to <= kf + 5,
            format!(
                "exact fault entry k_f = {kf} (x = {:.3?}), detection at k = {to}, window [{from},{to}], |M(k)| = {:?}",
                exact.states[kf], t.sizes
            ),
        ),
        DiagVerdict::Running => outcome(
            false,
            format!("k_f = {kf}, no detection, |M(k)| = {:?}", t.sizes),
        ),
    }
}

fn criterion8(found: &[Synthesized]) -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // label partition
    let c = two_room(TwoRoomParams::default());
    let mut label_bad = 0;
    let parts: Vec<_> = [0.1, 0.5, 1.0, 2.5]
        .iter()
        .map(|&d| {
            let lp = LabelPartition::new(&c, d);
            (d, Symbol::ALL.map(|s| (s, lp.preimage(s))))
        })
        .collect();
    for i in 0..100_000 {
        let (d, pre) = &parts[i % parts.len()];
        let mut x: Vec<f64> = (0..2).map(|_| rng.gen_range(15.0..=30.0)).collect();
        let mut xh: Vec<f64> = (0..2).map(|_| rng.gen_range(15.0..=30.0)).collect();
        match i % 4 {
            0 => x[rng.gen_range(0..2)] = [24.0, 26.0][rng.gen_range(0..2)],
            1 => xh[rng.gen_range(0..2)] = [24.0, 26.0][rng.gen_range(0..2)],
            2 => {
                xh = x.clone();
                let j = rng.gen_range(0..2);
                xh[j] = (x[j] + d).min(30.0);
            }
            _ => {}
        }
        let pt: Vec<f64> = x.iter().chain(&xh).copied().collect();
        let hits: Vec<Symbol> = pre
            .iter()
            .filter(|(_, sets)| sets.iter().any(|s| s.contains(&pt)))
            .map(|(s, _)| *s)
            .collect();
        label_bad += usize::from(hits != vec![label_continuous(&c, *d, &x, &xh)]);
    }

    // interval enclosure
    let mut interval_bad = 0;
    for _ in 0..10_000 {
        let terms: Vec<(Vec<u32>, f64)> = (0..rng.gen_range(1..8))
            .map(|_| {
                (
                    (0..3).map(|_| rng.gen_range(0..3)).collect(),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        let p = Polynomial::from_terms(3, terms);
        let b: Vec<Interval> = (0..3)
            .map(|_| {
                let lo = rng.gen_range(-3.0..3.0);
                Interval::new(lo, lo + rng.gen_range(0.0..2.0))
            })
            .collect();
        let x: Vec<f64> = b.iter().map(|iv| rng.gen_range(iv.lo..=iv.hi)).collect();
        let whole = p.interval_eval(&b);
        let at = p.interval_eval(&x.iter().map(|&v| Interval::point(v)).collect::<Vec<_>>());
        let v = p.eval_unchecked(&x);
        let slack = 1e-12 * p.abs_eval(&x);
        if !(whole.lo <= at.lo
            && at.hi <= whole.hi
            && whole.lo - slack <= v
            && v <= whole.hi + slack)
        {
            interval_bad += 1;
        }
    }

    // K and δ monotonicity
    let mut mono_bad = 0;
    let deltas = [0.25, 0.5, 1.0, 1.5, 2.0];
    for _ in 0..100 {
        let m = SystemModel::Finite(random_finite_model(&mut rng, 8, 3));
        for k in 0..4 {
            for (i, &d) in deltas.iter().enumerate() {
                if verify_exact(&m, d, k).unwrap().diagnosable {
                    mono_bad += usize::from(!verify_exact(&m, d, k + 1).unwrap().diagnosable);
                    for &s in &deltas[..i] {
                        mono_bad += usize::from(!verify_exact(&m, s, k).unwrap().diagnosable);
                    }
                }
            }
        }
    }

    // certificate chains: checker verdict plus the independent conclusion
    let mut chain_bad = Vec::new();
    for s in found {
        let mut cfg = CheckConfig::default();
        cfg.falsifier.eps_box = 0.05;
        cfg.falsifier.input_grid = 5;
        let mode = if s.exhaustive {
            Mode::Certify
        } else {
            Mode::Falsify
        };
        let r = check_certificate(&s.model, &s.cert, mode, &cfg).unwrap();
        let checked = if s.exhaustive {
            r.verdict == CheckVerdict::Valid
        } else {
            r.verdict != CheckVerdict::Invalid
        };
        let conclusion = match (&s.model, s.cert.kind) {
            (SystemModel::Finite(_), kind) => {
                let v = verify_exact(&s.model, s.cert.delta, s.cert.k).unwrap();
                match kind {
                    CertKind::B => v.diagnosable,
                    CertKind::V => {
                        !v.diagnosable
                            && witness_is_valid(
                                &s.model,
                                s.cert.delta,
                                s.cert.k,
                                &v.witness.unwrap(),
                            )
                    }
                }
            }
            (SystemModel::Continuous(_), CertKind::V) => {
                witness_is_valid(&s.model, s.cert.delta, s.cert.k, &room_witness(s.cert.k))
            }
            (SystemModel::Continuous(_), CertKind::B) => false,
        };
        if !(checked && conclusion) {
            chain_bad.push(format!(
                "{:?} (δ={}, K={})",
                s.cert.kind, s.cert.delta, s.cert.k
            ));
        }
    }

    let secs = t0.elapsed().as_secs_f64();
    outcome(
        label_bad == 0 && interval_bad == 0 && mono_bad == 0 && chain_bad.is_empty() && secs < 300.0,
        format!(
            "label partition 1e5 points: {label_bad} violations; interval 1e4 triples: {interval_bad}; monotonicity on 100 models: {mono_bad}; certificate chains: {}/{} ok{}; {secs:.1}s",
            found.len() - chain_bad.len(),
            found.len(),
            if chain_bad.is_empty() {
                String::new()
            } else {
                format!(" (broken: {})", chain_bad.join(", "))
            }
        ),
    )
}

fn main() {
    let full = std::env::var("DIAGCERT_ACCEPTANCE_FULL").is_ok_and(|v| v == "1");
    let _ = load_system(format!("{DATA}/running.json").as_ref()).expect("bundled spec loads");
    let mut found = Vec::new();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!(
            "criterion {n}: {} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, o));
    };
    report(1, criterion1());
    report(2, criterion2());
    report(3, criterion3());
    report(4, criterion4());
    report(5, criterion5(&mut found));
    report(6, criterion6(full, &mut found));
    report(7, criterion7());
    report(8, criterion8(&found));
    let passed = results.iter().filter(|(_, o)| o.pass).count();
    let failed: Vec<String> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(n, _)| n.to_string())
        .collect();
    println!(
        "acceptance: {passed}/{} criteria passed{}",
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(", failed: {}", failed.join(", "))
        }
    );
    // a capped synthesis may still be running on its worker thread
    std::process::exit(0);
}
