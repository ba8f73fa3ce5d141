//! Exact oracle: running-example verdicts, agreement with the brute-force
//! definition, monotonicity in K and δ, and witness replay.

use diagcert::model::catalog::{running_example, two_room, TwoRoomParams};
use diagcert::model::SystemModel;
use diagcert::product_oracle::{
    definitional_check, random_finite_model, safe_horizon, verify_exact, witness_is_valid, Witness,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn running_example_verdicts_and_witness() {
    let m = SystemModel::Finite(running_example());
    assert!(verify_exact(&m, 1.0, 3).unwrap().diagnosable);
    let v = verify_exact(&m, 1.0, 2).unwrap();
    assert!(!v.diagnosable);
    let w = v.witness.expect("witness for a negative verdict");
    assert!(witness_is_valid(&m, 1.0, 2, &w));
    // one step short of the required window is not a witness for K = 3
    assert!(!witness_is_valid(&m, 1.0, 3, &w));
}

#[test]
fn tampered_witness_is_rejected() {
    let m = SystemModel::Finite(running_example());
    let mut w = verify_exact(&m, 1.0, 2).unwrap().witness.unwrap();
    let last = w.xh_run.len() - 1;
    w.xh_run[last][0] += 1.0;
    assert!(!witness_is_valid(&m, 1.0, 2, &w));
}

#[test]
fn agrees_with_definition_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut disagreements = 0;
    for _ in 0..200 {
        let f = random_finite_model(&mut rng, 8, 3);
        let delta = [0.25, 0.5, 1.0, 1.5][rng.gen_range(0..4)];
        let k = rng.gen_range(0..4);
        let exact = verify_exact(&SystemModel::Finite(f.clone()), delta, k).unwrap();
        let def = definitional_check(&f, delta, k, safe_horizon(&f, k)).unwrap();
        if exact.diagnosable != def.diagnosable {
            disagreements += 1;
        }
        if let Some(w) = &exact.witness {
            assert!(
                witness_is_valid(&SystemModel::Finite(f.clone()), delta, k, w),
                "{f:?} delta {delta} k {k} {w:?}"
            );
        }
    }
    assert_eq!(disagreements, 0);
}

#[test]
fn monotone_in_k_and_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let m = SystemModel::Finite(random_finite_model(&mut rng, 8, 3));
        let deltas = [0.25, 0.5, 1.0, 1.5, 2.0];
        for k in 0..4 {
            for (i, &d) in deltas.iter().enumerate() {
                let here = verify_exact(&m, d, k).unwrap().diagnosable;
                if here {
                    assert!(verify_exact(&m, d, k + 1).unwrap().diagnosable);
                    for &smaller in &deltas[..i] {
                        assert!(verify_exact(&m, smaller, k).unwrap().diagnosable);
                    }
                }
            }
        }
    }
}

/// A pair of two-room runs that stay within δ while only one of them is
/// faulty, for longer than K steps after the fault.
fn two_room_witness(k: usize) -> (SystemModel, Witness) {
    let c = two_room(TwoRoomParams::default());
    let m = SystemModel::Continuous(c);
    let mut u_run = vec![vec![1.0, 1.0]];
    let mut uh_run = vec![vec![1.0, 1.0]];
    u_run.push(vec![0.3, 0.3]);
    uh_run.push(vec![0.2, 0.3]);
    let mut x_run = vec![vec![20.0, 20.0]];
    let mut xh_run = vec![vec![20.0, 20.0]];
    let mut fault_step = None;
    let mut i = 0;
    loop {
        let x = m.successor(x_run.last().unwrap(), &u_run[i]).unwrap();
        let xh = m.successor(xh_run.last().unwrap(), &uh_run[i]).unwrap();
        x_run.push(x);
        xh_run.push(xh);
        i += 1;
        if fault_step.is_none() {
            let c = m.as_continuous().unwrap();
            fault_step = x_run.iter().position(|p| c.is_faulty(p));
        }
        if let Some(f) = fault_step {
            if x_run.len() > f + k {
                break;
            }
        }
        if u_run.len() == i {
            u_run.push(vec![0.0, 0.0]);
            uh_run.push(vec![0.0, 0.0]);
        }
    }
    u_run.truncate(x_run.len() - 1);
    uh_run.truncate(x_run.len() - 1);
    let w = Witness {
        x_run,
        xh_run,
        u_run,
        uh_run,
        fault_step: fault_step.unwrap(),
    };
    (m, w)
}

#[test]
fn two_room_is_not_diagnosable_at_the_case_study_parameters() {
    for k in [3, 5] {
        let (m, w) = two_room_witness(k);
        assert!(witness_is_valid(&m, 0.5, k, &w), "K = {k}: {w:?}");
    }
}
