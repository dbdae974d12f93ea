//! Pseudo-cubes: the predicate, exact enumeration inside a projection,
//! the union of all cubes, and the two structural lemmas as checks.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::class::{Label, Pattern, Projection};
use crate::error::{usage, Error, Result};

pub const DEFAULT_CAP: usize = 20;

/// Enumeration cap: `UNIRATELAB_CAP` if set, else 20.
pub fn cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("UNIRATELAB_CAP")
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_CAP)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PseudoCube {
    pub d: usize,
    pub patterns: Vec<Pattern>,
}

impl PseudoCube {
    /// Sorts and dedups; fails unless the neighbor property holds.
    pub fn new(d: usize, mut patterns: Vec<Pattern>) -> Result<Self> {
        patterns.sort_unstable();
        patterns.dedup();
        if !is_pseudo_cube(&patterns, d)? {
            return Err(Error::Domain("pattern set is not a pseudo-cube".into()));
        }
        Ok(PseudoCube { d, patterns })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn contains(&self, p: &[Label]) -> bool {
        self.patterns.binary_search_by(|q| q.as_slice().cmp(p)).is_ok()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("cube serializes")
    }
}

/// Canonical order for cubes: by size, then by the sorted pattern list.
pub fn canonical_cmp(a: &PseudoCube, b: &PseudoCube) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.patterns.cmp(&b.patterns))
}

fn check_lengths(patterns: &[Pattern], d: usize) -> Result<()> {
    if let Some(p) = patterns.iter().find(|p| p.len() != d) {
        return usage(format!("pattern of length {} in a dimension-{d} set", p.len()));
    }
    Ok(())
}

/// Neighbor property over a duplicate-free pattern list.
pub fn is_pseudo_cube(patterns: &[Pattern], d: usize) -> Result<bool> {
    check_lengths(patterns, d)?;
    if patterns.is_empty() {
        return Ok(false);
    }
    let alive = vec![true; patterns.len()];
    for i in 0..d {
        let counts = slice_counts(patterns, &alive, i);
        if patterns.iter().any(|p| counts[&slice_key(p, i)] < 2) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn slice_key(p: &[Label], i: usize) -> Pattern {
    let mut k = Vec::with_capacity(p.len().saturating_sub(1));
    k.extend_from_slice(&p[..i]);
    k.extend_from_slice(&p[i + 1..]);
    k
}

fn slice_counts(patterns: &[Pattern], alive: &[bool], i: usize) -> HashMap<Pattern, usize> {
    let mut m = HashMap::new();
    for (p, &a) in patterns.iter().zip(alive) {
        if a {
            *m.entry(slice_key(p, i)).or_insert(0) += 1;
        }
    }
    m
}

/// Deletes patterns lacking some i-neighbor until nothing changes. The
/// survivors are the union of all pseudo-cubes inside the input.
pub fn peel_mask(patterns: &[Pattern], d: usize) -> Vec<bool> {
    let m = patterns.len();
    let mut alive = vec![true; m];
    if d == 0 {
        // a 0-dimensional set has no coordinates to violate
        return alive;
    }
    let mut group = vec![vec![0usize; d]; m];
    let mut size: Vec<Vec<usize>> = Vec::with_capacity(d);
    let mut members: Vec<Vec<Vec<usize>>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut ids: HashMap<Pattern, usize> = HashMap::new();
        let mut sz = Vec::new();
        let mut mem: Vec<Vec<usize>> = Vec::new();
        for (e, p) in patterns.iter().enumerate() {
            let next = ids.len();
            let g = *ids.entry(slice_key(p, i)).or_insert(next);
            if g == sz.len() {
                sz.push(0);
                mem.push(Vec::new());
            }
            sz[g] += 1;
            mem[g].push(e);
            group[e][i] = g;
        }
        size.push(sz);
        members.push(mem);
    }
    let mut stack: Vec<usize> =
        (0..m).filter(|&e| (0..d).any(|i| size[i][group[e][i]] < 2)).collect();
    for &e in &stack {
        alive[e] = false;
    }
    while let Some(e) = stack.pop() {
        for i in 0..d {
            let g = group[e][i];
            size[i][g] -= 1;
            if size[i][g] == 1 {
                if let Some(&f) = members[i][g].iter().find(|&&f| alive[f]) {
                    alive[f] = false;
                    stack.push(f);
                }
            }
        }
    }
    alive
}

pub fn peel(patterns: &[Pattern], d: usize) -> Vec<Pattern> {
    let alive = peel_mask(patterns, d);
    patterns.iter().zip(alive).filter(|(_, a)| *a).map(|(p, _)| p.clone()).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct EnumOptions {
    pub cap: usize,
    pub maximal_only: bool,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { cap: cap(), maximal_only: false }
    }
}

/// Every pseudo-cube inside the projection, in canonical order.
pub fn enumerate_pseudo_cubes(proj: &Projection) -> Result<Vec<PseudoCube>> {
    enumerate_pseudo_cubes_with(proj, EnumOptions::default())
}

pub fn enumerate_pseudo_cubes_with(proj: &Projection, opts: EnumOptions) -> Result<Vec<PseudoCube>> {
    let d = proj.dim();
    if d == 0 {
        return usage("pseudo-cube enumeration needs dimension >= 1");
    }
    check_lengths(&proj.patterns, d)?;
    let core = peel(&proj.patterns, d);
    if core.is_empty() {
        return Ok(Vec::new());
    }
    if opts.maximal_only {
        // cubes are closed under union, so the peeled core is the only maximal one
        return Ok(vec![PseudoCube { d, patterns: core }]);
    }
    let m = core.len();
    if m > opts.cap || m > 63 {
        return Err(Error::Resource(format!(
            "{m} candidate patterns exceed the enumeration cap {}",
            opts.cap
        )));
    }
    let nb = neighbor_masks(&core, d);
    let mut found: Vec<u64> = Vec::new();
    search(&nb, 0, (1u64 << m) - 1, 0, &mut found);
    found.sort_by(|a, b| {
        a.count_ones().cmp(&b.count_ones()).then_with(|| {
            // lex on ascending index lists equals lex on the sorted pattern lists
            bits(*a).cmp(bits(*b))
        })
    });
    Ok(found
        .into_iter()
        .map(|s| PseudoCube { d, patterns: bits(s).map(|e| core[e].clone()).collect() })
        .collect())
}

fn bits(mut s: u64) -> impl Iterator<Item = usize> + Clone {
    std::iter::from_fn(move || {
        if s == 0 {
            None
        } else {
            let e = s.trailing_zeros() as usize;
            s &= s - 1;
            Some(e)
        }
    })
}

/// `nb[e][i]`: patterns differing from `e` exactly at coordinate `i`.
pub(crate) fn neighbor_masks(pats: &[Pattern], d: usize) -> Vec<Vec<u64>> {
    let m = pats.len();
    let mut nb = vec![vec![0u64; d]; m];
    for i in 0..d {
        let mut by: HashMap<Pattern, u64> = HashMap::new();
        for (e, p) in pats.iter().enumerate() {
            *by.entry(slice_key(p, i)).or_insert(0) |= 1 << e;
        }
        for (e, p) in pats.iter().enumerate() {
            nb[e][i] = by[&slice_key(p, i)] & !(1 << e);
        }
    }
    nb
}

/// Largest subset of `avail` closed under the neighbor property.
pub(crate) fn peel_bits(nb: &[Vec<u64>], mut avail: u64) -> u64 {
    loop {
        let mut next = avail;
        for e in bits(avail) {
            if nb[e].iter().any(|&n| n & avail == 0) {
                next &= !(1 << e);
            }
        }
        if next == avail {
            return avail;
        }
        avail = next;
    }
}

// Branch on the lowest undecided element; `avail` is always peel-closed.
fn search(nb: &[Vec<u64>], inc: u64, avail: u64, start: usize, out: &mut Vec<u64>) {
    let undecided = avail & !inc & !((1u64 << start) - 1);
    if undecided == 0 {
        // everything is decided, so avail == inc
        if avail != 0 {
            out.push(avail);
        }
        return;
    }
    let e = undecided.trailing_zeros() as usize;
    // include e
    search(nb, inc | (1 << e), avail, e + 1, out);
    // exclude e
    let rest = peel_bits(nb, avail & !(1 << e));
    if rest & inc == inc && rest != 0 {
        search(nb, inc, rest, e + 1, out);
    }
}

/// The union of all pseudo-cubes in the projection.
pub fn pseudo_cube_union(proj: &Projection) -> Result<Vec<Pattern>> {
    check_lengths(&proj.patterns, proj.dim())?;
    if proj.dim() == 0 {
        return usage("pseudo-cube union needs dimension >= 1");
    }
    Ok(peel(&proj.patterns, proj.dim()))
}

/// Returns (#{h in C : h(j) = y}, |C| / 2).
pub fn half_mass_check(cube: &PseudoCube, j: usize, y: Label) -> (usize, f64) {
    let count = cube.patterns.iter().filter(|p| p[j] == y).count();
    (count, cube.len() as f64 / 2.0)
}

/// Patterns agreeing with `g` on `fixed`, restricted to the other coordinates.
pub fn project_fixing(cube: &PseudoCube, g: &[Label], fixed: &[usize]) -> Result<PseudoCube> {
    let d = cube.d;
    if !cube.contains(g) {
        return usage("g is not a member of the cube");
    }
    let mut j = fixed.to_vec();
    j.sort_unstable();
    j.dedup();
    if j.iter().any(|&c| c >= d) {
        return usage("fixed coordinate out of range");
    }
    if j.is_empty() || j.len() == d {
        return usage("the fixed set must be a non-empty proper subset of the coordinates");
    }
    let keep: Vec<usize> = (0..d).filter(|c| j.binary_search(c).is_err()).collect();
    let rows: Vec<Pattern> = cube
        .patterns
        .iter()
        .filter(|h| j.iter().all(|&c| h[c] == g[c]))
        .map(|h| keep.iter().map(|&c| h[c]).collect())
        .collect();
    let out = PseudoCube::new(keep.len(), rows)?;
    debug_assert!(is_pseudo_cube(&out.patterns, out.d).unwrap());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pats(v: &[&[u32]]) -> Vec<Pattern> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    fn six() -> Vec<Pattern> {
        pats(&[&[0, 0], &[1, 1], &[2, 2], &[0, 1], &[1, 2], &[2, 0]])
    }

    fn all_tuples(d: usize, k: u32) -> Vec<Pattern> {
        crate::class::FiniteClass::full(d, k).hypotheses()
    }

    // Plain subset scan: the independent oracle for enumeration.
    fn brute(all: &[Pattern], d: usize) -> Vec<Vec<Pattern>> {
        let m = all.len();
        let mut out = Vec::new();
        for s in 1u64..(1 << m) {
            let sub: Vec<Pattern> =
                (0..m).filter(|e| s >> e & 1 == 1).map(|e| all[e].clone()).collect();
            if naive_is_cube(&sub, d) {
                out.push(sub);
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    fn naive_is_cube(s: &[Pattern], d: usize) -> bool {
        !s.is_empty()
            && s.iter().all(|h| {
                (0..d).all(|i| {
                    s.iter().any(|g| g[i] != h[i] && (0..d).all(|j| j == i || g[j] == h[j]))
                })
            })
    }

    #[test]
    fn predicate_examples() {
        assert!(is_pseudo_cube(&all_tuples(2, 2), 2).unwrap());
        assert!(!is_pseudo_cube(&pats(&[&[0, 0], &[1, 1]]), 2).unwrap());
        assert!(is_pseudo_cube(&six(), 2).unwrap());
        assert!(matches!(is_pseudo_cube(&pats(&[&[0, 0], &[1]]), 2), Err(Error::Usage(_))));
    }

    #[test]
    fn enumeration_examples() {
        let sq = Projection::from_patterns(2, all_tuples(2, 2));
        let cubes = enumerate_pseudo_cubes(&sq).unwrap();
        assert_eq!(cubes.len(), 1);
        assert_eq!(cubes[0].patterns, all_tuples(2, 2));
        assert_eq!(brute(&all_tuples(2, 2), 2).len(), 1);

        let single = Projection::from_patterns(1, pats(&[&[0]]));
        assert!(enumerate_pseudo_cubes(&single).unwrap().is_empty());

        let three = Projection::from_patterns(1, pats(&[&[0], &[1], &[2]]));
        let cubes = enumerate_pseudo_cubes(&three).unwrap();
        let got: Vec<_> = cubes.iter().map(|c| c.patterns.clone()).collect();
        assert_eq!(
            got,
            vec![
                pats(&[&[0], &[1]]),
                pats(&[&[0], &[2]]),
                pats(&[&[1], &[2]]),
                pats(&[&[0], &[1], &[2]])
            ]
        );
    }

    #[test]
    fn enumeration_matches_subset_scan() {
        for (d, k) in [(1, 4), (2, 2), (2, 3), (3, 2)] {
            let all = all_tuples(d, k);
            let got: Vec<_> = enumerate_pseudo_cubes(&Projection::from_patterns(d, all.clone()))
                .unwrap()
                .into_iter()
                .map(|c| c.patterns)
                .collect();
            assert_eq!(got, brute(&all, d), "d={d} k={k}");
        }
    }

    #[test]
    fn cap_is_enforced_after_peeling() {
        let big = Projection::from_patterns(1, (0..25).map(|l| vec![l]).collect());
        let r = enumerate_pseudo_cubes_with(&big, EnumOptions { cap: 20, maximal_only: false });
        assert!(matches!(r, Err(Error::Resource(_))));
        // 25 patterns, but only 2 survive peeling
        let mut ps: Vec<Pattern> = (0..23).map(|l| vec![l, l]).collect();
        ps.push(vec![30, 0]);
        ps.push(vec![30, 1]);
        ps.push(vec![31, 0]);
        ps.push(vec![31, 1]);
        let thin = Projection::from_patterns(2, ps);
        assert_eq!(enumerate_pseudo_cubes(&thin).unwrap().len(), 1);
    }

    #[test]
    fn maximal_mode() {
        let three = Projection::from_patterns(1, pats(&[&[0], &[1], &[2]]));
        let opts = EnumOptions { cap: 20, maximal_only: true };
        let m = enumerate_pseudo_cubes_with(&three, opts).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].len(), 3);
    }

    #[test]
    fn union_examples() {
        let sq = Projection::from_patterns(2, all_tuples(2, 2));
        assert_eq!(pseudo_cube_union(&sq).unwrap(), all_tuples(2, 2));
        let diag = Projection::from_patterns(2, pats(&[&[0, 0], &[1, 1]]));
        assert!(pseudo_cube_union(&diag).unwrap().is_empty());
        let mut p = all_tuples(2, 2);
        p.push(vec![2, 2]);
        let with_iso = Projection::from_patterns(2, p);
        assert_eq!(pseudo_cube_union(&with_iso).unwrap(), all_tuples(2, 2));
    }

    #[test]
    fn half_mass_examples() {
        let sq = PseudoCube::new(2, all_tuples(2, 2)).unwrap();
        assert_eq!(half_mass_check(&sq, 0, 0), (2, 2.0));
        let c6 = PseudoCube::new(2, six()).unwrap();
        assert_eq!(half_mass_check(&c6, 1, 0), (2, 3.0));
        assert_eq!(half_mass_check(&c6, 0, 7), (0, 3.0));
    }

    #[test]
    fn project_fixing_examples() {
        let sq = PseudoCube::new(2, all_tuples(2, 2)).unwrap();
        assert_eq!(project_fixing(&sq, &[0, 0], &[0]).unwrap().patterns, pats(&[&[0], &[1]]));
        let c6 = PseudoCube::new(2, six()).unwrap();
        assert_eq!(project_fixing(&c6, &[0, 0], &[0]).unwrap().patterns, pats(&[&[0], &[1]]));
        let c3 = PseudoCube::new(3, all_tuples(3, 2)).unwrap();
        let p = project_fixing(&c3, &[0, 0, 0], &[0, 1]).unwrap();
        assert_eq!((p.d, p.patterns), (1, pats(&[&[0], &[1]])));
        assert!(matches!(project_fixing(&sq, &[0, 0], &[]), Err(Error::Usage(_))));
        assert!(matches!(project_fixing(&sq, &[0, 0], &[0, 1]), Err(Error::Usage(_))));
    }

    #[test]
    fn json_shape() {
        let sq = PseudoCube::new(2, all_tuples(2, 2)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&sq.to_json_string()).unwrap();
        assert_eq!(v["d"], 2);
        assert_eq!(v["patterns"][3], serde_json::json!([1, 1]));
    }

    #[test]
    fn binary_closure_exhaustive() {
        for d in 1..=3 {
            let all = all_tuples(d, 2);
            for c in brute(&all, d) {
                assert_eq!(c, all);
            }
        }
    }

    #[test]
    fn structural_lemmas_exhaustive() {
        for (d, k) in [(1, 3), (2, 2), (2, 3), (3, 2)] {
            let all = all_tuples(d, k);
            let cubes = enumerate_pseudo_cubes(&Projection::from_patterns(d, all)).unwrap();
            for c in &cubes {
                for j in 0..d {
                    for y in 0..k {
                        let (cnt, bound) = half_mass_check(c, j, y);
                        assert!(cnt as f64 <= bound);
                    }
                }
                if d >= 2 {
                    for g in &c.patterns {
                        for mask in 1u32..(1 << d) - 1 {
                            let jset: Vec<usize> = (0..d).filter(|i| mask >> i & 1 == 1).collect();
                            let p = project_fixing(c, g, &jset).unwrap();
                            assert!(naive_is_cube(&p.patterns, p.d));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cube_lower_bound_on_size() {
        // measured minima; the binary case forces 2^d and nothing here goes below it
        for (d, k) in [(2, 3), (3, 2)] {
            let cubes = enumerate_pseudo_cubes(&Projection::from_patterns(d, all_tuples(d, k))).unwrap();
            assert_eq!(cubes[0].len(), 1 << d);
        }
    }

    fn arb_set() -> impl Strategy<Value = (usize, Vec<Pattern>)> {
        (1usize..=3, 2u32..=3).prop_flat_map(|(d, k)| {
            prop::collection::vec(prop::collection::vec(0..k, d), 0..14).prop_map(move |mut v| {
                v.sort();
                v.dedup();
                (d, v)
            })
        })
    }

    proptest! {
        #[test]
        fn enumeration_equals_brute((d, set) in arb_set()) {
            let got: Vec<_> = enumerate_pseudo_cubes(&Projection::from_patterns(d, set.clone()))
                .unwrap()
                .into_iter()
                .map(|c| c.patterns)
                .collect();
            prop_assert_eq!(got, brute(&set, d));
        }

        #[test]
        fn union_is_union_of_enumerated((d, set) in arb_set()) {
            let proj = Projection::from_patterns(d, set);
            let mut u: Vec<Pattern> = enumerate_pseudo_cubes(&proj)
                .unwrap()
                .into_iter()
                .flat_map(|c| c.patterns)
                .collect();
            u.sort();
            u.dedup();
            prop_assert_eq!(pseudo_cube_union(&proj).unwrap(), u);
        }

        #[test]
        fn products_are_cubes(sets in prop::collection::vec(prop::collection::btree_set(0u32..5, 2..4), 1..4)) {
            let d = sets.len();
            let mut rows: Vec<Pattern> = vec![vec![]];
            for s in &sets {
                rows = rows
                    .into_iter()
                    .flat_map(|r| s.iter().map(move |&l| { let mut r = r.clone(); r.push(l); r }))
                    .collect();
            }
            rows.sort();
            prop_assert!(is_pseudo_cube(&rows, d).unwrap());
        }
    }
}
