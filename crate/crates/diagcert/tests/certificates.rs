//! Certificates end to end: every synthesized certificate passes the checker
//! and agrees with the exact oracle, and documents survive a round trip.

use diagcert::cegis::{synthesize_b, synthesize_v, CegisConfig, CegisOutcome};
use diagcert::certificate::{
    check_certificate, CertKind, Certificate, CheckConfig, CheckVerdict, Template,
};
use diagcert::falsifier::Mode;
use diagcert::model::catalog::{running_example, two_room, TwoRoomParams};
use diagcert::model::{load_system_str, system_to_json, SystemModel};
use diagcert::product_oracle::{random_finite_model, verify_exact, witness_is_valid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A certified B implies diagnosability and a certified V implies the
/// opposite; both are re-checked from scratch and cross-checked against the
/// oracle, including a replayable witness for the V case.
fn chain(m: &SystemModel, cert: &Certificate) {
    let rep = check_certificate(m, cert, Mode::Certify, &CheckConfig::default()).unwrap();
    assert_eq!(rep.verdict, CheckVerdict::Valid);
    assert!(rep.exhaustive);
    let v = verify_exact(m, cert.delta, cert.k).unwrap();
    match cert.kind {
        CertKind::B => assert!(v.diagnosable),
        CertKind::V => {
            assert!(!v.diagnosable);
            assert!(witness_is_valid(m, cert.delta, cert.k, &v.witness.unwrap()));
        }
    }
    assert_eq!(&Certificate::from_json(&cert.to_json()).unwrap(), cert);
}

#[test]
fn running_example_chains() {
    let m = SystemModel::Finite(running_example());
    let cfg = CegisConfig::default();
    let b = synthesize_b(&m, 1.0, 3, &Template::uniform(1, 3, 3), &cfg);
    assert_eq!(b.outcome, CegisOutcome::Certified { exhaustive: true });
    chain(&m, b.certificate.as_ref().unwrap());
    let v = synthesize_v(&m, 1.0, 2, &Template::uniform(1, 2, 2), None, &cfg);
    assert_eq!(v.outcome, CegisOutcome::Certified { exhaustive: true });
    chain(&m, v.certificate.as_ref().unwrap());
}

#[test]
fn random_model_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = CegisConfig {
        i_max: 20,
        ..CegisConfig::default()
    };
    let mut certified = 0;
    for i in 0..24 {
        let f = random_finite_model(&mut rng, 4, 2);
        let m = SystemModel::Finite(f);
        let k = 1 + i % 2;
        let t = Template::uniform(1, k, 2);
        let diag = verify_exact(&m, 1.0, k).unwrap().diagnosable;
        for kind in [CertKind::B, CertKind::V] {
            let r = match kind {
                CertKind::B => synthesize_b(&m, 1.0, k, &t, &cfg),
                CertKind::V => synthesize_v(&m, 1.0, k, &t, None, &cfg),
            };
            if let CegisOutcome::Certified { .. } = r.outcome {
                assert_eq!(
                    kind == CertKind::B,
                    diag,
                    "model {i}: {kind:?} certified against the oracle"
                );
                chain(&m, r.certificate.as_ref().unwrap());
                certified += 1;
            }
        }
    }
    assert!(certified >= 6, "only {certified} certificates found");
}

#[test]
fn system_documents_round_trip() {
    for m in [
        SystemModel::Finite(running_example()),
        SystemModel::Continuous(two_room(TwoRoomParams::default())),
    ] {
        let text = system_to_json(&m);
        assert_eq!(load_system_str(&text).unwrap(), m);
    }
}

#[test]
fn data_files_load() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let running = diagcert::model::load_system(format!("{dir}/running.json").as_ref()).unwrap();
    assert_eq!(running, SystemModel::Finite(running_example()));
    let room = diagcert::model::load_system(format!("{dir}/two_room.json").as_ref()).unwrap();
    assert_eq!(room.state_dim(), 2);
    for (f, k) in [
        ("b_running_k3.json", 3),
        ("v_running_k2.json", 2),
        ("b_smt_two_room.json", 5),
        ("v_two_room_k3.json", 3),
    ] {
        let c = Certificate::load(format!("{dir}/{f}").as_ref()).unwrap();
        assert_eq!(c.k, k);
        assert_eq!(Certificate::from_json(&c.to_json()).unwrap(), c);
    }
}

#[test]
fn stored_two_room_v_has_no_counterexample() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let room = diagcert::model::load_system(format!("{dir}/two_room.json").as_ref()).unwrap();
    let cert = Certificate::load(format!("{dir}/v_two_room_k3.json").as_ref()).unwrap();
    let mut cfg = CheckConfig::default();
    cfg.falsifier.eps_box = 0.05;
    cfg.falsifier.input_grid = 5;
    let r = check_certificate(&room, &cert, Mode::Falsify, &cfg).unwrap();
    assert!(r.conditions.iter().all(|c| !c.outcome.is_counterexample()));
}
