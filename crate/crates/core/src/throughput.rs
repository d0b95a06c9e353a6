//! Routing matrix, its Perron left eigenvector, and throughput ratios.

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::PetriNet;
use crate::routing::{PlaceRouting, RoutingSpec};
use crate::timed::{simulate, SimConfig, StopRule, TimedError, TimingSpec};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum ThroughputError {
    #[error("net is not strongly connected")]
    NotStronglyConnected,
    #[error("place {0} has several output transitions but no routing probabilities")]
    MissingRoutingProb(String),
    #[error("matrix is reducible")]
    Reducible,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: u64, residual: f64 },
    #[error("spectral radius is {estimate}, not 1 (Collatz-Wielandt bounds [{lower}, {upper}])")]
    SpectralRadiusNotOne { estimate: f64, lower: f64, upper: f64 },
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Timed(#[from] TimedError),
}

/// Square nonnegative matrix indexed by transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingMatrix {
    pub transitions: Vec<String>,
    pub entries: Vec<Vec<f64>>,
}

impl RoutingMatrix {
    pub fn new(transitions: Vec<String>, entries: Vec<Vec<f64>>) -> Result<Self, ThroughputError> {
        let n = transitions.len();
        if n == 0 {
            return Err(ThroughputError::InvalidMatrix("no transitions".into()));
        }
        if entries.len() != n || entries.iter().any(|row| row.len() != n) {
            return Err(ThroughputError::InvalidMatrix(format!("expected a {n}x{n} matrix")));
        }
        if let Some(v) = entries.iter().flatten().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ThroughputError::InvalidMatrix(format!("entry {v} is not a finite nonnegative number")));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = transitions.iter().find(|t| !seen.insert(*t)) {
            return Err(ThroughputError::InvalidMatrix(format!("duplicate transition {dup}")));
        }
        Ok(RoutingMatrix { transitions, entries })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    /// Header row of transition ids, then one row of entries per transition
    /// in header order.
    pub fn from_csv(text: &str) -> Result<Self, ThroughputError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let transitions: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| ThroughputError::InvalidMatrix(format!("not a number: {f:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            entries.push(row);
        }
        Self::new(transitions, entries)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.transitions).expect("in-memory write");
        for row in &self.entries {
            w.write_record(row.iter().map(f64::to_string)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
    }

    /// `vR`
    pub fn left_multiply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (vi, row) in v.iter().zip(&self.entries) {
            for j in 0..n {
                out[j] += vi * row[j];
            }
        }
        out
    }

    /// Whether the digraph of positive entries is strongly connected.
    pub fn is_irreducible(&self) -> bool {
        let n = self.len();
        let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for i in 0..n {
            for j in 0..n {
                if self.entries[i][j] > 0.0 {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        kosaraju_scc(&g).len() == 1
    }
}

/// `R_ij = (1/|•j|) Σ_{p : i→p→j} P{p routes to j}`. Periodic routings
/// contribute the frequency of `j` in the period.
pub fn build_r(net: &PetriNet, routing: &RoutingSpec) -> Result<RoutingMatrix, ThroughputError> {
    if !net.is_strongly_connected() {
        return Err(ThroughputError::NotStronglyConnected);
    }
    let n = net.transition_count();
    let mut entries = vec![vec![0.0; n]; n];
    for p in net.places() {
        let consumers = net.consumers(p);
        if consumers.len() > 1 && matches!(routing.place(p), PlaceRouting::Trivial(_)) {
            return Err(ThroughputError::MissingRoutingProb(net.place_name(p).to_string()));
        }
        for &i in net.producers(p) {
            for &j in consumers {
                entries[i.0][j.0] += routing.probability(p, j) / net.inputs(j).len() as f64;
            }
        }
    }
    let matrix = RoutingMatrix {
        transitions: net.transitions().map(|t| net.transition_name(t).to_string()).collect(),
        entries,
    };
    if !matrix.is_irreducible() {
        return Err(ThroughputError::Reducible);
    }
    Ok(matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputVector {
    pub transitions: Vec<String>,
    /// Positive, sums to 1, `xR = x`.
    pub x: Vec<f64>,
    /// `‖xR − x‖∞`
    pub residual: f64,
    /// `Σ (xR)_j`
    pub spectral_radius: f64,
    pub iterations: u64,
}

impl ThroughputVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.transitions.iter().position(|t| t == name).map(|i| self.x[i])
    }
}

pub fn perron_vector(r: &RoutingMatrix, tol: f64, max_iter: u64) -> Result<ThroughputVector, ThroughputError> {
    let n = r.len();
    perron_vector_from(r, &vec![1.0 / n as f64; n], tol, max_iter)
}

/// Power iteration on `(R + I)/2` from a positive `start`, normalized to sum
/// 1, until `‖xR − x‖∞ < tol`.
pub fn perron_vector_from(
    r: &RoutingMatrix,
    start: &[f64],
    tol: f64,
    max_iter: u64,
) -> Result<ThroughputVector, ThroughputError> {
    if start.len() != r.len() || start.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(ThroughputError::InvalidMatrix("start vector must be positive".into()));
    }
    if !r.is_irreducible() {
        return Err(ThroughputError::Reducible);
    }
    let sum: f64 = start.iter().sum();
    let mut x: Vec<f64> = start.iter().map(|v| v / sum).collect();
    let mut residual = f64::INFINITY;
    for iteration in 0..max_iter {
        let xr = r.left_multiply(&x);
        residual = sup_distance(&x, &xr);
        if residual < tol {
            return Ok(ThroughputVector {
                transitions: r.transitions.clone(),
                spectral_radius: xr.iter().sum(),
                x,
                residual,
                iterations: iteration,
            });
        }
        let mut y: Vec<f64> = x.iter().zip(&xr).map(|(a, b)| (a + b) / 2.0).collect();
        let s: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= s);
        if sup_distance(&x, &y) < tol / 10.0 {
            // The iterate has settled on an eigenvector whose eigenvalue is not 1.
            // For positive x, min_j (xR)_j / x_j ≤ ρ(R) ≤ max_j (xR)_j / x_j.
            let ratios = x.iter().zip(&xr).map(|(a, b)| b / a);
            let lower = ratios.clone().fold(f64::INFINITY, f64::min);
            let upper = ratios.fold(f64::NEG_INFINITY, f64::max);
            if lower > 1.0 + tol || upper < 1.0 - tol {
                return Err(ThroughputError::SpectralRadiusNotOne {
                    estimate: xr.iter().sum(),
                    lower,
                    upper,
                });
            }
            return Err(ThroughputError::NoConvergence { iterations: iteration, residual });
        }
        x = y;
    }
    Err(ThroughputError::NoConvergence { iterations: max_iter, residual })
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The five-transition matrix (order `a..e`) whose branch at `c` and `e`
/// sends weight `x` to `d` and `1 − x` to `e`.
pub fn branching_family(x: f64) -> RoutingMatrix {
    RoutingMatrix {
        transitions: ["a", "b", "c", "d", "e"].map(String::from).to_vec(),
        entries: vec![
            vec![0.4, 0.3, 0.0, 0.0, 0.0],
            vec![0.4, 0.4, 0.4, 0.0, 0.0],
            vec![0.0, 0.1, 0.4, x, 1.0 - x],
            vec![0.0, 0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, x, 1.0 - x],
        ],
    }
}

/// Closed-form eigenvector of [`branching_family`]:
/// `(2x, 3x, 12x, 12x, 12 − 12x) / (12 + 17x)`.
pub fn branching_family_vector(x: f64) -> Vec<f64> {
    let d = 12.0 + 17.0 * x;
    vec![2.0 * x / d, 3.0 * x / d, 12.0 * x / d, 12.0 * x / d, (12.0 - 12.0 * x) / d]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParametricRow {
    pub x: f64,
    pub computed: Vec<f64>,
    pub expected: Vec<f64>,
    pub max_error: f64,
    pub pass: bool,
}

/// Compares the power-iteration eigenvector of [`branching_family`] with its
/// closed form at every grid point, to within `1e-8`.
pub fn parametric_check(grid: &[f64]) -> Vec<ParametricRow> {
    grid.iter()
        .map(|&x| {
            let expected = branching_family_vector(x);
            match perron_vector(&branching_family(x), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER) {
                Ok(v) => {
                    let max_error = v.x.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    ParametricRow { x, computed: v.x, expected, max_error, pass: max_error < 1e-8 }
                }
                Err(_) => ParametricRow { x, computed: Vec::new(), expected, max_error: f64::INFINITY, pass: false },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimComparison {
    pub prediction: ThroughputVector,
    /// `X_a(T) / T` at the final clock `T`.
    pub rates: Vec<f64>,
    /// Simulated rates normalized to sum to 1.
    pub sim_ratios: Vec<f64>,
    /// `max_{a≠b} |λ̂_a/λ̂_b − x_a/x_b| / (x_a/x_b)`
    pub max_rel_err: f64,
    /// `‖N·λ̂‖∞ / ‖λ̂‖∞`
    pub invariant_residual: f64,
    /// `λ̂_a / x_a` per transition.
    pub scale: Vec<f64>,
    pub clock: f64,
    pub events: u64,
}

pub fn compare_sim(
    net: &PetriNet,
    routing: &RoutingSpec,
    timing: &TimingSpec,
    stop: StopRule,
    seed: u64,
) -> Result<SimComparison, ThroughputError> {
    let prediction = perron_vector(&build_r(net, routing)?, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?;
    let outcome = simulate(net, routing, timing, &SimConfig::new(seed, stop))?;
    let clock = outcome.clock;
    let rates: Vec<f64> = if clock > 0.0 {
        outcome.log.throughput_estimate(clock).rates
    } else {
        vec![0.0; net.transition_count()]
    };
    let total: f64 = rates.iter().sum();
    let sim_ratios = rates.iter().map(|r| r / total).collect();
    let x = &prediction.x;
    let mut max_rel_err: f64 = 0.0;
    for a in 0..x.len() {
        for b in 0..x.len() {
            if a != b {
                let predicted = x[a] / x[b];
                max_rel_err = max_rel_err.max(((rates[a] / rates[b]) - predicted).abs() / predicted);
            }
        }
    }
    let incidence = net.incidence();
    let peak = rates.iter().copied().fold(0.0, f64::max);
    let invariant_residual = net
        .places()
        .map(|p| net.transitions().map(|t| f64::from(incidence.get(p, t)) * rates[t.0]).sum::<f64>().abs())
        .fold(0.0, f64::max)
        / peak;
    let scale = rates.iter().zip(x).map(|(r, xa)| r / xa).collect();
    Ok(SimComparison {
        prediction,
        rates,
        sim_ratios,
        max_rel_err,
        invariant_residual,
        scale,
        clock,
        events: outcome.events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::samples::{net_a, net_b};
    use crate::timed::Distribution;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn net_b_matrix_by_hand() {
        let b = net_b();
        let q = 0.3;
        let routing = RoutingSpec::bernoulli(&b, &[("p0", &[("a", q), ("b", 1.0 - q)])]).unwrap();
        let r = build_r(&b, &routing).unwrap();
        let expected = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [q, 1.0 - q, 0.0, 0.0],
            [q, 1.0 - q, 0.0, 0.0],
        ];
        for (row, want) in r.entries.iter().zip(expected) {
            assert!(close(row, &want, 1e-15), "{row:?}");
        }
        let v = perron_vector(&r, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!(close(&v.x, &[0.15, 0.35, 0.15, 0.35], 1e-10), "{:?}", v.x);
    }

    #[test]
    fn t_net_is_uniform_and_column_stochastic() {
        let a = net_a();
        let r = build_r(&a, &RoutingSpec::trivial(&a)).unwrap();
        let ones = r.left_multiply(&[1.0, 1.0]);
        assert_eq!(ones, vec![1.0, 1.0]);
        let v = perron_vector(&r, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        assert!(close(&v.x, &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn example_vector() {
        let v = perron_vector(&branching_family(0.3), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        let exact: Vec<f64> = [2.0, 3.0, 12.0, 12.0, 28.0].iter().map(|k| k / 57.0).collect();
        assert!(close(&v.x, &exact, 1e-10), "{:?}", v.x);
        assert!(v.residual < DEFAULT_TOLERANCE);
        assert!((v.spectral_radius - 1.0).abs() < 1e-10);
    }

    #[test]
    fn parametric_points() {
        assert!(close(&branching_family_vector(0.5), &[1.0 / 20.5, 1.5 / 20.5, 6.0 / 20.5, 6.0 / 20.5, 6.0 / 20.5], 1e-15));
        assert!(parametric_check(&[0.1, 0.5, 0.9]).iter().all(|r| r.pass));
    }

    #[test]
    fn rejects_bad_matrices() {
        let reducible = RoutingMatrix::new(vec!["a".into(), "b".into()], vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(perron_vector(&reducible, 1e-12, 1000), Err(ThroughputError::Reducible)));
        let scaled = RoutingMatrix::new(vec!["a".into(), "b".into()], vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(
            perron_vector(&scaled, 1e-12, 100_000),
            Err(ThroughputError::SpectralRadiusNotOne { .. })
        ));
        assert!(RoutingMatrix::new(vec!["a".into()], vec![vec![-1.0]]).is_err());
    }

    #[test]
    fn periodic_matrix_converges_with_damping() {
        // A pure 2-cycle: undamped iteration would oscillate for a skewed start.
        let swap = RoutingMatrix::new(vec!["a".into(), "b".into()], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let v = perron_vector_from(&swap, &[0.9, 0.1], 1e-12, 10_000).unwrap();
        assert!(close(&v.x, &[0.5, 0.5], 1e-11));
    }

    #[test]
    fn csv_round_trip() {
        let r = branching_family(0.3);
        let back = RoutingMatrix::from_csv(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert!(RoutingMatrix::from_csv("a,b\n1,x\n0,1\n").is_err());
        assert!(RoutingMatrix::from_csv("a,b\n1,0\n").is_err());
    }

    #[test]
    fn deterministic_cycle_rates() {
        let a = net_a();
        let timing = TimingSpec::named(&a, &[
            ("t1", Distribution::Deterministic { value: 1.0 }),
            ("t2", Distribution::Deterministic { value: 2.0 }),
        ])
        .unwrap();
        let c = compare_sim(&a, &RoutingSpec::trivial(&a), &timing, StopRule::MaxClock(30.0), 0).unwrap();
        assert_eq!(c.rates, vec![1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(c.max_rel_err, 0.0);
        assert_eq!(c.invariant_residual, 0.0);
    }
}
