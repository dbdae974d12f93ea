//! Exact Natarajan, Graph, DS and Littlestone dimensions by exhaustive search.

use std::collections::{HashMap, HashSet};

use itertools::Itertools;
use serde::Serialize;

use crate::class::{FiniteClass, Label, Pattern, Projection};
use crate::pseudocube::{peel, PseudoCube};
use crate::trees::LittlestoneTree;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NatarajanWitness {
    pub points: Vec<usize>,
    pub f0: Pattern,
    pub f1: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphWitness {
    pub points: Vec<usize>,
    pub s: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DsWitness {
    pub points: Vec<usize>,
    pub cube: PseudoCube,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Witnesses {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub natarajan: Option<NatarajanWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds: Option<DsWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub littlestone: Option<LittlestoneTree>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimReport {
    pub natarajan: usize,
    pub graph: usize,
    pub ds: usize,
    pub littlestone: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Witnesses>,
}

/// ⌈5·log₂ K⌉, the multiplier between graph and Natarajan dimension.
pub fn graph_factor(k: u32) -> usize {
    (5.0 * (k as f64).log2()).ceil() as usize
}

impl DimReport {
    pub fn compute(class: &FiniteClass, with_witnesses: bool) -> DimReport {
        let (natarajan, nw) = natarajan_search(class);
        let (graph, gw) = graph_search(class);
        let (ds, dw) = ds_search(class);
        let littlestone = littlestone_dim(class);
        let witnesses = with_witnesses.then(|| Witnesses {
            natarajan: nw,
            graph: gw,
            ds: dw,
            littlestone: (littlestone > 0).then(|| crate::trees::littlestone_tree(class)),
        });
        DimReport { natarajan, graph, ds, littlestone, witnesses }
    }

    /// The inequalities the report must satisfy.
    pub fn chain_holds(&self, k: u32) -> bool {
        self.ds <= self.graph && (k < 2 || self.graph <= graph_factor(k) * self.natarajan)
    }
}

// Shattering is closed under taking sub-tuples, so the first d with no
// witness ends the search.
fn by_increasing_d<W>(
    class: &FiniteClass,
    mut test: impl FnMut(&[usize], &Projection) -> Option<W>,
) -> (usize, Option<W>) {
    let mut best = (0, None);
    for d in 1..=class.domain_size() {
        let hit = (0..class.domain_size()).combinations(d).find_map(|x| {
            let p = class.project(&x).expect("points in range");
            test(&x, &p)
        });
        match hit {
            Some(w) => best = (d, Some(w)),
            None => break,
        }
    }
    best
}

fn natarajan_search(class: &FiniteClass) -> (usize, Option<NatarajanWitness>) {
    by_increasing_d(class, |x, p| {
        let d = x.len();
        let set: HashSet<&[Label]> = p.patterns.iter().map(|v| v.as_slice()).collect();
        for f0 in &p.patterns {
            for f1 in &p.patterns {
                if f0.iter().zip(f1).any(|(a, b)| a == b) {
                    continue;
                }
                let mut mix = vec![0; d];
                let all = (0u64..1 << d).all(|m| {
                    for i in 0..d {
                        mix[i] = if m >> i & 1 == 1 { f1[i] } else { f0[i] };
                    }
                    set.contains(mix.as_slice())
                });
                if all {
                    return Some(NatarajanWitness { points: x.to_vec(), f0: f0.clone(), f1: f1.clone() });
                }
            }
        }
        None
    })
}

fn graph_search(class: &FiniteClass) -> (usize, Option<GraphWitness>) {
    by_increasing_d(class, |x, p| {
        let d = x.len();
        // the all-equal sign vector forces s into the projection
        for s in &p.patterns {
            let signs: HashSet<u64> = p
                .patterns
                .iter()
                .map(|h| (0..d).fold(0u64, |m, i| m | ((h[i] != s[i]) as u64) << i))
                .collect();
            if signs.len() == 1 << d {
                return Some(GraphWitness { points: x.to_vec(), s: s.clone() });
            }
        }
        None
    })
}

fn ds_search(class: &FiniteClass) -> (usize, Option<DsWitness>) {
    by_increasing_d(class, |x, p| {
        let core = peel(&p.patterns, x.len());
        (!core.is_empty()).then(|| DsWitness {
            points: x.to_vec(),
            cube: PseudoCube { d: x.len(), patterns: core },
        })
    })
}

pub fn natarajan_dim(class: &FiniteClass) -> usize {
    natarajan_search(class).0
}

pub fn graph_dim(class: &FiniteClass) -> usize {
    graph_search(class).0
}

/// Largest d with a pseudo-cube inside some projection to d distinct points.
pub fn ds_dim(class: &FiniteClass) -> usize {
    ds_search(class).0
}

pub fn littlestone_dim(class: &FiniteClass) -> usize {
    let all: Vec<u32> = (0..class.len() as u32).collect();
    let mut memo = HashMap::new();
    ldim(class, &all, &mut memo)
}

pub(crate) fn log2_floor(m: usize) -> usize {
    if m == 0 {
        0
    } else {
        (usize::BITS - 1 - m.leading_zeros()) as usize
    }
}

/// Littlestone dimension of the sub-collection `v` (sorted indices).
pub(crate) fn ldim(class: &FiniteClass, v: &[u32], memo: &mut HashMap<Vec<u32>, usize>) -> usize {
    if v.len() < 2 {
        return 0;
    }
    if let Some(&r) = memo.get(v) {
        return r;
    }
    let ceiling = log2_floor(v.len());
    let mut best = 0;
    'points: for x in 0..class.domain_size() {
        let mut groups: Vec<(Label, Vec<u32>)> = Vec::new();
        for &h in v {
            let y = class.hyp(h as usize)[x];
            match groups.iter_mut().find(|g| g.0 == y) {
                Some(g) => g.1.push(h),
                None => groups.push((y, vec![h])),
            }
        }
        if groups.len() < 2 {
            continue;
        }
        // 1 + the second largest child value
        let mut top = [0usize; 2];
        for (_, g) in &groups {
            let r = ldim(class, g, memo);
            if r > top[0] {
                top = [r, top[0]];
            } else if r > top[1] {
                top[1] = r;
            }
        }
        best = best.max(1 + top[1]);
        if best >= ceiling {
            break 'points;
        }
    }
    memo.insert(v.to_vec(), best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn six_class() -> FiniteClass {
        FiniteClass::new(
            2,
            3,
            vec![vec![0, 0], vec![1, 1], vec![2, 2], vec![0, 1], vec![1, 2], vec![2, 0]],
        )
        .unwrap()
    }

    fn thresholds(n: usize) -> FiniteClass {
        let h = (0..=n).map(|t| (0..n).map(|x| (x >= t) as u32).collect()).collect();
        FiniteClass::new(n, 2, h).unwrap()
    }

    // Independent DS oracle: scan every subset of every projection.
    fn ds_brute(c: &FiniteClass) -> usize {
        let mut best = 0;
        for d in 1..=c.domain_size() {
            for x in (0..c.domain_size()).combinations(d) {
                let p = c.project(&x).unwrap().patterns;
                if p.len() > 20 {
                    continue;
                }
                let found = (1u64..1 << p.len()).any(|s| {
                    let sub: Vec<&Pattern> =
                        (0..p.len()).filter(|e| s >> e & 1 == 1).map(|e| &p[e]).collect();
                    sub.iter().all(|h| {
                        (0..d).all(|i| {
                            sub.iter().any(|g| g[i] != h[i] && (0..d).all(|j| j == i || g[j] == h[j]))
                        })
                    })
                });
                if found {
                    best = best.max(d);
                }
            }
        }
        best
    }

    // Independent Littlestone oracle: depth-first search for a complete tree.
    fn has_tree(c: &FiniteClass, v: &[usize], depth: usize) -> bool {
        if depth == 0 {
            return !v.is_empty();
        }
        for x in 0..c.domain_size() {
            for y0 in 0..c.labels() {
                for y1 in y0 + 1..c.labels() {
                    let a: Vec<usize> = v.iter().copied().filter(|&h| c.hyp(h)[x] == y0).collect();
                    let b: Vec<usize> = v.iter().copied().filter(|&h| c.hyp(h)[x] == y1).collect();
                    if has_tree(c, &a, depth - 1) && has_tree(c, &b, depth - 1) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn ldim_brute(c: &FiniteClass) -> usize {
        let all: Vec<usize> = (0..c.len()).collect();
        (0..).take_while(|&d| has_tree(c, &all, d)).last().unwrap()
    }

    pub(crate) fn random_class(rng: &mut ChaCha8Rng) -> FiniteClass {
        let n = rng.gen_range(1..=5);
        let k = rng.gen_range(2..=4);
        let m = rng.gen_range(1..=20);
        let h = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..k)).collect()).collect();
        FiniteClass::new(n, k, h).unwrap()
    }

    #[test]
    fn full_and_singleton() {
        for (d, k) in [(1, 2), (2, 3), (3, 2)] {
            let c = FiniteClass::full(d, k);
            let r = DimReport::compute(&c, false);
            assert_eq!((r.natarajan, r.graph, r.ds), (d, d, d));
        }
        assert_eq!(littlestone_dim(&FiniteClass::full(4, 2)), 4);
        let one = FiniteClass::new(3, 2, vec![vec![0, 1, 0]]).unwrap();
        let r = DimReport::compute(&one, false);
        assert_eq!((r.natarajan, r.graph, r.ds, r.littlestone), (0, 0, 0, 0));
    }

    #[test]
    fn six_cube_class() {
        let c = six_class();
        assert_eq!(natarajan_dim(&c), 1);
        assert_eq!(ds_dim(&c), 2);
        assert_eq!(ds_brute(&c), 2);
        assert!(crate::pseudocube::is_pseudo_cube(&c.hypotheses(), 2).unwrap());
    }

    #[test]
    fn constant_functions() {
        for k in 2..=4 {
            for n in 1..=3 {
                let h = (0..k).map(|y| vec![y; n]).collect();
                assert_eq!(graph_dim(&FiniteClass::new(n, k, h).unwrap()), 1);
            }
        }
    }

    #[test]
    fn threshold_littlestone() {
        for n in 1..=15 {
            let c = thresholds(n);
            let expect = log2_floor(n + 1);
            assert_eq!(littlestone_dim(&c), expect, "n={n}");
            if n <= 7 {
                assert_eq!(ldim_brute(&c), expect);
            }
        }
    }

    #[test]
    fn witnesses_are_valid() {
        let r = DimReport::compute(&six_class(), true);
        let w = r.witnesses.unwrap();
        let nw = w.natarajan.unwrap();
        assert!(nw.f0.iter().zip(&nw.f1).all(|(a, b)| a != b));
        assert_eq!(w.ds.unwrap().cube.len(), 6);
        assert_eq!(w.graph.unwrap().points.len(), r.graph);
    }

    #[test]
    fn dim_chain_on_random_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let c = random_class(&mut rng);
            let r = DimReport::compute(&c, false);
            assert!(r.chain_holds(c.labels()), "{r:?}");
            assert!(r.natarajan <= r.ds);
            assert!(r.littlestone <= log2_floor(c.len()));
            assert_eq!(r.ds, ds_brute(&c));
            if c.len() <= 10 {
                assert_eq!(r.littlestone, ldim_brute(&c));
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_under_inclusion(seed in 0u64..10_000, keep in prop::collection::vec(any::<bool>(), 20)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_class(&mut rng);
            let idx: Vec<usize> = (0..c.len()).filter(|&i| i == 0 || keep[i]).collect();
            let sub = c.subclass(&idx).unwrap();
            let a = DimReport::compute(&sub, false);
            let b = DimReport::compute(&c, false);
            prop_assert!(a.natarajan <= b.natarajan);
            prop_assert!(a.graph <= b.graph);
            prop_assert!(a.ds <= b.ds);
            prop_assert!(a.littlestone <= b.littlestone);
        }
    }
}
