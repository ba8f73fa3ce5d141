//! Property suites for the numeric core: interval enclosure, polynomial ring
//! laws and the label partition of the pair space.

use diagcert::automaton::{label_continuous, LabelPartition, Symbol};
use diagcert::model::catalog::{two_room, TwoRoomParams};
use diagcert::model::{Interval, Polynomial};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NV: usize = 3;

fn poly_strategy() -> impl Strategy<Value = Polynomial> {
    proptest::collection::vec((proptest::collection::vec(0u32..3, NV), -5.0f64..5.0), 0..8)
        .prop_map(|terms| Polynomial::from_terms(NV, terms))
}

fn box_and_point() -> impl Strategy<Value = (Vec<Interval>, Vec<f64>)> {
    proptest::collection::vec((-3.0f64..3.0, 0.0f64..2.0, 0.0f64..=1.0), NV).prop_map(|dims| {
        let ivs = dims
            .iter()
            .map(|&(lo, w, _)| Interval::new(lo, lo + w))
            .collect();
        let pt = dims.iter().map(|&(lo, w, t)| lo + w * t).collect();
        (ivs, pt)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    /// The enclosure over a box holds the enclosure over any point inside it,
    /// and the float value at the point up to its own rounding.
    #[test]
    fn interval_enclosure_is_sound(p in poly_strategy(), (b, x) in box_and_point()) {
        let whole = p.interval_eval(&b);
        let pb: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
        let at = p.interval_eval(&pb);
        prop_assert!(whole.lo <= at.lo && at.hi <= whole.hi, "{whole:?} vs {at:?}");
        let v = p.eval_unchecked(&x);
        let slack = 1e-12 * p.abs_eval(&x);
        prop_assert!(whole.lo - slack <= v && v <= whole.hi + slack);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn ring_laws(a in poly_strategy(), b in poly_strategy(), c in poly_strategy(), x in proptest::collection::vec(-2.0f64..2.0, NV)) {
        let tol = |p: &Polynomial, q: &Polynomial| {
            1e-9 * (1.0 + p.abs_eval(&x) + q.abs_eval(&x))
        };
        let close = |p: &Polynomial, q: &Polynomial| (p.eval_unchecked(&x) - q.eval_unchecked(&x)).abs() <= tol(p, q);
        prop_assert!(a.add(&b).max_coeff_diff(&b.add(&a)) == 0.0);
        prop_assert!(a.mul(&b).max_coeff_diff(&b.mul(&a)) < 1e-9);
        prop_assert!(close(&a.mul(&b.add(&c)), &a.mul(&b).add(&a.mul(&c))));
        prop_assert!(close(&a.mul(&b).mul(&c), &a.mul(&b.mul(&c))));
        prop_assert!(a.sub(&a).is_zero());
        prop_assert!(a.mul(&Polynomial::constant(NV, 1.0)).max_coeff_diff(&a) == 0.0);
        let ev = a.mul(&b).eval_unchecked(&x);
        let prod = a.eval_unchecked(&x) * b.eval_unchecked(&x);
        prop_assert!((ev - prod).abs() <= 1e-9 * (1.0 + a.abs_eval(&x) * b.abs_eval(&x)));
        prop_assert!(close(&a.pow(2), &a.mul(&a)));
    }
}

/// Every pair of states lies in the preimage of exactly one symbol, and that
/// symbol is the pointwise label. Some coordinates are snapped to the faulty
/// box faces and some pairs are placed exactly δ apart to exercise ties.
#[test]
fn label_partition_on_1e5_points() {
    let m = two_room(TwoRoomParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let faces = [24.0, 26.0];
    let mut violations = 0;
    let mut parts = Vec::new();
    for delta in [0.1, 0.5, 1.0, 2.5] {
        let lp = LabelPartition::new(&m, delta);
        parts.push((delta, Symbol::ALL.map(|s| (s, lp.preimage(s)))));
    }
    for i in 0..100_000 {
        let (delta, pre) = &parts[i % parts.len()];
        let mut x: Vec<f64> = (0..2).map(|_| rng.gen_range(15.0..=30.0)).collect();
        let mut xh: Vec<f64> = (0..2).map(|_| rng.gen_range(15.0..=30.0)).collect();
        match i % 5 {
            0 => x[rng.gen_range(0..2)] = faces[rng.gen_range(0..2)],
            1 => xh[rng.gen_range(0..2)] = faces[rng.gen_range(0..2)],
            2 => {
                // along one axis, exactly δ apart when representable
                xh = x.clone();
                let d = rng.gen_range(0..2);
                xh[d] = (x[d] + delta).min(30.0);
            }
            3 => {
                x = vec![rng.gen_range(23.0..27.0), rng.gen_range(23.0..27.0)];
                xh = vec![
                    x[0] + rng.gen_range(-1.0..1.0),
                    x[1] + rng.gen_range(-1.0..1.0),
                ];
            }
            _ => {}
        }
        let pt: Vec<f64> = x.iter().chain(&xh).copied().collect();
        let hits: Vec<Symbol> = pre
            .iter()
            .filter(|(_, sets)| sets.iter().any(|s| s.contains(&pt)))
            .map(|(s, _)| *s)
            .collect();
        if hits != vec![label_continuous(&m, *delta, &x, &xh)] {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
