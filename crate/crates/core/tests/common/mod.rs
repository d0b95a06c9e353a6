//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use fcnet::io::{load_net, LoadedNet};
use fcnet::net::{PetriNet, PlaceId};
use fcnet::routing::{PlaceRouting, RoutingSpec};

pub type Q = Ratio<i128>;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../nets").join(name)
}

pub fn load(name: &str) -> LoadedNet {
    load_net(&fixture(name), false).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn net_a() -> PetriNet {
    PetriNet::build(
        &[("p1", 1), ("p2", 0)],
        &["t1", "t2"],
        &[("p1", "t1"), ("t1", "p2"), ("p2", "t2"), ("t2", "p1")],
    )
    .unwrap()
}

pub fn net_b() -> PetriNet {
    PetriNet::build(
        &[("p0", 1), ("p1", 0), ("p2", 0)],
        &["a", "b", "c", "d"],
        &[
            ("p0", "a"),
            ("p0", "b"),
            ("a", "p1"),
            ("p1", "c"),
            ("c", "p0"),
            ("b", "p2"),
            ("p2", "d"),
            ("d", "p0"),
        ],
    )
    .unwrap()
}

pub fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

/// Solves `x R = x`, `sum(x) = 1` exactly by Gaussian elimination on
/// `(R - I)^T` with the last equation replaced by the normalization.
/// Panics when the system is singular.
pub fn left_fixed_point(r: &[Vec<Q>]) -> Vec<Q> {
    let n = r.len();
    let mut a: Vec<Vec<Q>> = (0..n)
        .map(|i| {
            let mut row: Vec<Q> = (0..n).map(|j| r[j][i]).collect();
            row[i] -= Q::one();
            row.push(Q::zero());
            row
        })
        .collect();
    a[n - 1] = vec![Q::one(); n + 1];
    for col in 0..n {
        let pivot = (col..n).find(|&i| !a[i][col].is_zero()).expect("singular system");
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = a[col].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != col && !row[col].is_zero() {
                let f = row[col];
                for (v, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                    *v -= f * p;
                }
            }
        }
    }
    a.into_iter().map(|row| row[n]).collect()
}

pub fn to_f64(x: &Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// An equitable periodic routing: each choice place gets a shuffled
/// sequence holding every output transition at least once.
pub fn periodic_routing<R: Rng>(rng: &mut R, net: &PetriNet) -> RoutingSpec {
    let choices = choice_places(net).map(|p| {
        let outs = net.consumers(p);
        let mut seq = outs.to_vec();
        for _ in 0..rng.random_range(0..3) {
            seq.push(*outs.choose(rng).unwrap());
        }
        seq.shuffle(rng);
        (p, PlaceRouting::Periodic(seq))
    });
    RoutingSpec::new(net, choices.collect::<Vec<_>>()).unwrap()
}

/// An equitable Bernoulli routing with probabilities bounded away from 0.
pub fn bernoulli_routing<R: Rng>(rng: &mut R, net: &PetriNet) -> RoutingSpec {
    let choices = choice_places(net).map(|p| {
        let outs = net.consumers(p);
        let weights: Vec<f64> = outs.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let mut probs: Vec<_> = outs.iter().zip(&weights).map(|(&t, w)| (t, w / total)).collect();
        let rest: f64 = probs[1..].iter().map(|(_, w)| w).sum();
        probs[0].1 = 1.0 - rest;
        (p, PlaceRouting::Bernoulli(probs))
    });
    RoutingSpec::new(net, choices.collect::<Vec<_>>()).unwrap()
}

fn choice_places(net: &PetriNet) -> impl Iterator<Item = PlaceId> + '_ {
    net.places().filter(|&p| net.consumers(p).len() > 1)
}
