//! Built-in models used by tests, the bundled data files and the Python bindings.

use super::poly::Polynomial;
use super::sets::BoxSet;
use super::system::{ContinuousModel, FiniteModel};

/// Nine-state example: two chains out of `0`, one through the faulty state `1.2`.
pub fn running_example() -> FiniteModel {
    let vals = [0.0, 1.2, 2.2, 3.2, 4.2, 5.2, 6.2, 7.2, 9.0];
    let states: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v]).collect();
    let inputs = vec![vec![1.0], vec![2.0]];
    // successor index per state, same for both inputs except at 0
    let chain = [usize::MAX, 3, 4, 5, 6, 7, 8, 7, 8];
    let mut triples = vec![[0, 0, 1], [0, 1, 2]];
    for (s, &nx) in chain.iter().enumerate().skip(1) {
        triples.push([s, 0, nx]);
        triples.push([s, 1, nx]);
    }
    let output = states.clone();
    FiniteModel::new(states, vec![0], vec![1], inputs, &triples, output)
        .expect("running example is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoRoomParams {
    pub alpha: f64,
    pub alpha_e: f64,
    pub alpha_h: f64,
    pub t_e: f64,
    pub t_h: f64,
}

impl Default for TwoRoomParams {
    fn default() -> Self {
        TwoRoomParams {
            alpha: 0.01,
            alpha_e: 0.04,
            alpha_h: 0.145,
            t_e: 10.0,
            t_h: 50.0,
        }
    }
}

/// Two rooms exchanging heat with each other, the environment and a heater.
pub fn two_room(p: TwoRoomParams) -> ContinuousModel {
    let nv = 4;
    let x = |i| Polynomial::var(nv, i);
    let room = |me: usize, other: usize, u: usize| {
        x(me)
            .scale(1.0 - 2.0 * p.alpha - p.alpha_e)
            .sub(&x(me).mul(&x(u)).scale(p.alpha_h))
            .add(&x(other).scale(p.alpha))
            .add(&x(u).scale(p.alpha_h * p.t_h))
            .add_constant(p.alpha_e * p.t_e)
    };
    let f = vec![room(0, 1, 2), room(1, 0, 3)];
    let h = vec![Polynomial::var(2, 0), Polynomial::var(2, 1)];
    ContinuousModel::new(
        BoxSet::from_bounds(&[[15.0, 30.0], [15.0, 30.0]]),
        BoxSet::from_bounds(&[[19.5, 20.5], [19.5, 20.5]]),
        BoxSet::from_bounds(&[[24.0, 26.0], [24.0, 26.0]]),
        BoxSet::from_bounds(&[[0.0, 1.0], [0.0, 1.0]]),
        f,
        h,
    )
    .expect("two-room model is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_example_transitions() {
        let m = running_example();
        assert_eq!(m.successor(&[0.0], &[1.0]).unwrap(), vec![1.2]);
        assert_eq!(m.successor(&[0.0], &[2.0]).unwrap(), vec![2.2]);
        assert_eq!(m.successor(&[7.2], &[2.0]).unwrap(), vec![7.2]);
        assert_eq!(m.successor(&[6.2], &[1.0]).unwrap(), vec![9.0]);
        assert_eq!(m.num_states(), 9);
    }

    #[test]
    fn two_room_step() {
        let m = two_room(TwoRoomParams::default());
        let y = m.successor(&[20.0, 20.0], &[0.5, 0.5]).unwrap();
        // (1 - 0.02 - 0.04 - 0.0725)*20 + 0.2 + 3.625 + 0.4
        assert!((y[0] - 21.575).abs() < 1e-12, "{y:?}");
        assert!((y[1] - 21.575).abs() < 1e-12);
    }

    #[test]
    fn two_room_rejects_out_of_domain() {
        let m = two_room(TwoRoomParams::default());
        assert!(m.successor(&[40.0, 20.0], &[0.5, 0.5]).is_err());
        assert!(m.successor(&[20.0, 20.0], &[1.5, 0.5]).is_err());
    }
}
