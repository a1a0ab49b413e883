//! Exact matching against a literal minimum-weight oracle: all-pairs shortest
//! paths (boundary nodes collapsed into one) and enumeration of every pairing
//! of the defects.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use latticelock::circuits::{gen_lattice_surgery, gen_surface_memory, Basis, CircuitIR, SurgeryExperiment};
use latticelock::decoders::{build_graph, run_ler, DecoderKind, ExactMatcher, MatchingGraph};
use latticelock::noise::{annotate, NoiseModel};
use latticelock::policies::{plan_passive, PolicyKind, SyncPlan};
use latticelock::timing::LatencyProfile;

const TOL: f64 = 1e-9;

struct Oracle {
    n: usize,
    boundary: usize,
    dist: Vec<f64>,
    /// Observable masks reachable at the shortest distance.
    obs: Vec<BTreeSet<u64>>,
}

fn xor_sets(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> BTreeSet<u64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x ^ y)).collect()
}

impl Oracle {
    fn new(g: &MatchingGraph) -> Self {
        let n = g.n_detectors + 1;
        let boundary = g.n_detectors;
        let node = |v: u32| (v as usize).min(boundary);
        let mut dist = vec![f64::INFINITY; n * n];
        let mut obs = vec![BTreeSet::new(); n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
            obs[i * n + i].insert(0);
        }
        for e in &g.edges {
            let (a, b) = (node(e.u), node(e.v));
            for (x, y) in [(a, b), (b, a)] {
                let k = x * n + y;
                if e.weight < dist[k] - TOL {
                    dist[k] = e.weight;
                    obs[k] = BTreeSet::from([e.observables]);
                } else if (e.weight - dist[k]).abs() <= TOL {
                    obs[k].insert(e.observables);
                }
            }
        }
        for m in 0..n {
            for i in 0..n {
                if dist[i * n + m].is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let through = dist[i * n + m] + dist[m * n + j];
                    let k = i * n + j;
                    if through < dist[k] - TOL {
                        dist[k] = through;
                        obs[k] = xor_sets(&obs[i * n + m], &obs[m * n + j]);
                    } else if (through - dist[k]).abs() <= TOL && i != j && m != i && m != j {
                        let extra = xor_sets(&obs[i * n + m], &obs[m * n + j]);
                        obs[k].extend(extra);
                    }
                }
            }
        }
        Self { n, boundary, dist, obs }
    }

    fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.n + b]
    }

    /// Minimum total weight over all pairings (a defect may pair with the
    /// boundary) and the observable masks achieving it.
    fn solve(&self, defects: &[usize]) -> (f64, BTreeSet<u64>) {
        if defects.is_empty() {
            return (0.0, BTreeSet::from([0]));
        }
        let first = defects[0];
        let rest = &defects[1..];
        let mut best = (f64::INFINITY, BTreeSet::new());
        let mut consider = |w: f64, set: BTreeSet<u64>| {
            if w < best.0 - TOL {
                best = (w, set);
            } else if (w - best.0).abs() <= TOL {
                best.1.extend(set);
            }
        };
        let wb = self.d(first, self.boundary);
        if wb.is_finite() {
            let (w, s) = self.solve(rest);
            consider(wb + w, xor_sets(&self.obs[first * self.n + self.boundary], &s));
        }
        for i in 0..rest.len() {
            let wp = self.d(first, rest[i]);
            if wp.is_infinite() {
                continue;
            }
            let mut others = rest.to_vec();
            others.remove(i);
            let (w, s) = self.solve(&others);
            consider(wp + w, xor_sets(&self.obs[first * self.n + rest[i]], &s));
        }
        best
    }
}

fn check_random_syndromes(c: &CircuitIR, trials: usize, max_edges: usize, seed: u64) {
    let g = build_graph(c).unwrap();
    let oracle = Oracle::new(&g);
    let mut exact = ExactMatcher::new(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..trials {
        let k = rng.random_range(1..=max_edges);
        let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..g.edges.len())).collect();
        let (syn, _) = g.syndrome_of(&picks);
        if syn.len() > 10 {
            continue;
        }
        let defects: Vec<usize> = syn.iter().map(|&d| d as usize).collect();
        let (_, allowed) = oracle.solve(&defects);
        let got = exact.decode(&syn).unwrap();
        assert!(allowed.contains(&got), "syndrome {syn:?}: decoded {got:#b}, minimum-weight masks {allowed:?}");
        checked += 1;
    }
    assert!(checked > trials / 2);
}

fn noisy(c: &CircuitIR, p: f64, prof: LatencyProfile) -> CircuitIR {
    annotate(c, &NoiseModel::new(p, prof).unwrap()).unwrap()
}

#[test]
fn exact_matching_is_minimum_weight_on_memory() {
    let prof = LatencyProfile::google();
    let c = gen_surface_memory(3, 3, &SyncPlan::empty(PolicyKind::Passive), &prof).unwrap();
    check_random_syndromes(&noisy(&c, 1e-3, prof), 400, 5, 1);
}

#[test]
fn exact_matching_is_minimum_weight_on_surgery() {
    let prof = LatencyProfile::google();
    let exp = SurgeryExperiment::new(3, Basis::Z, prof.clone(), plan_passive(500));
    let c = gen_lattice_surgery(&exp).unwrap();
    check_random_syndromes(&noisy(&c, 1e-3, prof), 200, 4, 2);
}

#[test]
fn union_find_is_close_to_exact() {
    let prof = LatencyProfile::google();
    let c = gen_surface_memory(3, 4, &SyncPlan::empty(PolicyKind::Passive), &prof).unwrap();
    let c = noisy(&c, 1e-3, prof);
    let uf = run_ler(&c, DecoderKind::UnionFind, 200_000, 4).unwrap().estimates[0].clone();
    let ex = run_ler(&c, DecoderKind::Exact, 200_000, 4).unwrap().estimates[0].clone();
    assert!(ex.ler <= uf.ler * 1.05, "exact {} union-find {}", ex.ler, uf.ler);
    assert!(uf.ler <= 1.2 * ex.ler, "exact {} union-find {}", ex.ler, uf.ler);
}
