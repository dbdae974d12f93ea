//! Generators: monotone linear classes on lattice boxes, searched
//! pseudo-cube blocks of Natarajan dimension 1, the star-padded DSL
//! counterexample, branch distributions and mass schedules.

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::class::{rat_to_f64, FiniteClass, Label, Pattern, RealizableDistribution};
use crate::class::Certificate;
use crate::dimensions::natarajan_dim;
use crate::error::{usage, Error, Result};
use crate::pseudocube::{enumerate_pseudo_cubes_with, half_mass_check, is_pseudo_cube, EnumOptions, PseudoCube};
use crate::trees::{max_dsl_depth, verify_tree, AnyTree, DslNode, DslTree, LittlestoneTree};

// ------------------------------------------------------------ lattice class

/// Labelings of the box {0..=bound}^d by x -> max argmax_k (w_k . x - b_k),
/// with w_1 = 0, w_k <= w_{k+1} coordinatewise, w entries from `weights`
/// and b_k from `biases` (all positive). Class label k-1 stands for k.
pub fn make_lattice_linear_class(d: usize, k: u32, bound: u64, weights: &[i64], biases: &[i64]) -> Result<FiniteClass> {
    if d == 0 || k == 0 {
        return usage("need d >= 1 and K >= 1");
    }
    if weights.is_empty() || biases.is_empty() {
        return usage("weight and bias grids must be non-empty");
    }
    if biases.iter().any(|&b| b <= 0) {
        return usage("biases must be positive");
    }
    let points: Vec<Vec<u64>> = (0..d).map(|_| 0..=bound).multi_cartesian_product().collect();
    let vectors: Vec<Vec<i64>> = (0..d).map(|_| weights.iter().copied()).multi_cartesian_product().collect();
    let zero = vec![0i64; d];
    let mut chains: Vec<Vec<&[i64]>> = vec![vec![&zero]];
    for _ in 1..k {
        let mut next = Vec::new();
        for c in &chains {
            let last = *c.last().unwrap();
            for v in &vectors {
                if last.iter().zip(v).all(|(a, b)| a <= b) {
                    let mut c2 = c.clone();
                    c2.push(v);
                    next.push(c2);
                }
            }
        }
        chains = next;
    }
    if chains.is_empty() {
        return usage("no monotone weight chain in the grid");
    }
    let mut rows = Vec::new();
    for c in &chains {
        for b in (0..k).map(|_| biases.iter().copied()).multi_cartesian_product() {
            let row: Pattern = points
                .iter()
                .map(|x| {
                    let mut best = (i64::MIN, 0);
                    for (j, w) in c.iter().enumerate() {
                        let s: i64 = w.iter().zip(x).map(|(a, &b)| a * b as i64).sum::<i64>() - b[j];
                        if s >= best.0 {
                            best = (s, j);
                        }
                    }
                    best.1 as Label
                })
                .collect();
            rows.push(row);
        }
    }
    let names = points.iter().map(|p| p.iter().map(|v| v.to_string()).join(",")).collect();
    let labels = (1..=k).map(|l| l.to_string()).collect();
    FiniteClass::new(points.len(), k, rows)?.with_names(Some(names), Some(labels))
}

// ------------------------------------------------------------ blocks

fn sidon(set: &[u32], m: u32) -> bool {
    let mut sums = vec![false; m as usize];
    for (i, &a) in set.iter().enumerate() {
        for &b in &set[i..] {
            let s = ((a + b) % m) as usize;
            if sums[s] {
                return false;
            }
            sums[s] = true;
        }
    }
    true
}

// offsets (p, q) give patterns (a, a+p, a+q) mod m
fn cyclic_cube_ok(o: &[(u32, u32)], m: u32) -> bool {
    let has = |p: u32, q: u32| o.contains(&(p % m, q % m));
    o.iter().all(|&(p, q)| {
        (1..m).any(|t| has(p + t, q + t))
            && (0..m).any(|pp| pp != p && has(pp, q))
            && (0..m).any(|qq| qq != q && has(p, qq))
    })
}

fn cyclic_block(m: u32) -> Option<Vec<Pattern>> {
    let sid: Vec<Vec<u32>> = (2..=5usize)
        .flat_map(|r| (0..m).combinations(r))
        .filter(|c| sidon(c, m))
        .collect();
    for pset in &sid {
        for qset in &sid {
            let cands: Vec<(u32, u32)> = pset.iter().flat_map(|&p| qset.iter().map(move |&q| (p, q))).collect();
            for size in 4..=cands.len() {
                for o in cands.iter().copied().combinations(size) {
                    let mut r: Vec<u32> = o.iter().map(|&(p, q)| (q + m - p) % m).collect();
                    r.sort_unstable();
                    r.dedup();
                    if sidon(&r, m) && cyclic_cube_ok(&o, m) {
                        let pats = (0..m)
                            .flat_map(|a| o.iter().map(move |&(p, q)| vec![a, (a + p) % m, (a + q) % m]))
                            .collect();
                        return Some(pats);
                    }
                }
            }
        }
    }
    None
}

fn natarajan_one(d: usize, k: u32, pats: &[Pattern]) -> bool {
    match FiniteClass::new(d, k, pats.to_vec()) {
        Ok(c) => natarajan_dim(&c) <= 1,
        Err(_) => false,
    }
}

/// A d-dimensional pseudo-cube over labels 0..K whose patterns, as a class
/// on d points, have Natarajan dimension 1 (d >= 2). d = 2 is exhaustive;
/// d = 3 searches cyclic families {(a, a+p, a+q) mod m} for m <= K.
pub fn find_natarajan1_pseudocube(d: usize, k: u32) -> Result<PseudoCube> {
    match d {
        1 => {
            if k < 2 {
                return Err(Error::Domain("a 1-dimensional pseudo-cube needs K >= 2".into()));
            }
            PseudoCube::new(1, vec![vec![0], vec![1]])
        }
        2 => {
            if k > 5 {
                return usage("exhaustive d = 2 search is limited to K <= 5");
            }
            let all: Vec<Pattern> = (0..2).map(|_| 0..k).multi_cartesian_product().collect();
            let proj = crate::class::Projection::from_patterns(2, all);
            let cubes = enumerate_pseudo_cubes_with(&proj, EnumOptions { cap: usize::MAX, maximal_only: false })?;
            cubes
                .into_iter()
                .find(|c| natarajan_one(2, k, &c.patterns))
                .ok_or_else(|| Error::Domain(format!("no 2-dimensional block with natarajan_dim 1 for K <= {k}")))
        }
        3 => {
            for m in 2..=k.min(12) {
                if let Some(p) = cyclic_block(m) {
                    let cube = PseudoCube::new(3, p)?;
                    if natarajan_one(3, m, &cube.patterns) {
                        return Ok(cube);
                    }
                }
            }
            Err(Error::Domain(format!("no 3-dimensional block with natarajan_dim 1 for K <= {k}")))
        }
        _ => usage("block search is limited to 1 <= d <= 3"),
    }
}

// ------------------------------------------------------ counterexample

#[derive(Debug, Clone, Serialize)]
pub struct CxNode {
    /// 1-based; a level-k node carries k points.
    pub level: usize,
    pub points: Vec<usize>,
    pub label_base: Label,
    /// (parent node, pattern index of the parent's block leading here)
    pub parent: Option<(usize, usize)>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CounterexampleClass {
    pub depth: usize,
    pub blocks: Vec<PseudoCube>,
    pub nodes: Vec<CxNode>,
    pub class: FiniteClass,
    pub star: Label,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleCheck {
    pub natarajan: usize,
    pub dsl_depth: usize,
    pub tree_ok: bool,
}

impl CounterexampleCheck {
    pub fn holds(&self, depth: usize) -> bool {
        self.natarajan == 1 && self.dsl_depth >= depth && self.tree_ok
    }
}

impl CounterexampleClass {
    /// The DSL tree the construction is built around.
    pub fn tree(&self) -> DslTree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let block = &self.blocks[n.level - 1];
                let cube = block.patterns.iter().map(|p| p.iter().map(|&y| y + n.label_base).collect()).collect();
                let children = if n.children.is_empty() {
                    vec![None; block.len()]
                } else {
                    n.children.iter().map(|&c| Some(c)).collect()
                };
                DslNode { points: n.points.clone(), cube, children }
            })
            .collect();
        DslTree { depth: self.depth, nodes }
    }

    /// natarajan_dim, max_dsl_depth and the construction tree, all checked
    /// against the assembled class.
    pub fn check(&self) -> Result<CounterexampleCheck> {
        let natarajan = natarajan_dim(&self.class);
        let (dsl_depth, _) = max_dsl_depth(&self.class, Some(self.depth));
        let tree_ok = verify_tree(&AnyTree::Dsl(self.tree()), &self.class)?.ok;
        Ok(CounterexampleCheck { natarajan, dsl_depth, tree_ok })
    }
}

/// Builds the depth-D truncation without running the checks.
pub fn assemble_counterexample(depth: usize) -> Result<CounterexampleClass> {
    if !(1..=3).contains(&depth) {
        return usage("counterexample depth must be 1, 2 or 3");
    }
    let label_budget = [2, 3, 7];
    let blocks: Vec<PseudoCube> =
        (1..=depth).map(|k| find_natarajan1_pseudocube(k, label_budget[k - 1])).collect::<Result<_>>()?;
    let width = |k: usize| blocks[k - 1].patterns.iter().flatten().max().map_or(0, |&m| m + 1);
    let mut nodes = vec![CxNode { level: 1, points: vec![0], label_base: 0, parent: None, children: Vec::new() }];
    let mut next_point = 1;
    let mut next_label = width(1);
    let mut frontier = vec![0usize];
    for k in 2..=depth {
        let mut level = Vec::new();
        for &par in &frontier {
            for j in 0..blocks[nodes[par].level - 1].len() {
                let id = nodes.len();
                nodes.push(CxNode {
                    level: k,
                    points: (next_point..next_point + k).collect(),
                    label_base: next_label,
                    parent: Some((par, j)),
                    children: Vec::new(),
                });
                next_point += k;
                next_label += width(k);
                nodes[par].children.push(id);
                level.push(id);
            }
        }
        frontier = level;
    }
    let star = next_label;
    let mut rows = Vec::new();
    for (id, node) in nodes.iter().enumerate() {
        let block = &blocks[node.level - 1];
        // ancestors' choices
        let mut fixed = vec![star; next_point];
        let mut at = id;
        while let Some((par, j)) = nodes[at].parent {
            let pn = &nodes[par];
            for (c, &x) in pn.points.iter().enumerate() {
                fixed[x] = blocks[pn.level - 1].patterns[j][c] + pn.label_base;
            }
            at = par;
        }
        for p in &block.patterns {
            let mut row = fixed.clone();
            for (c, &x) in node.points.iter().enumerate() {
                row[x] = p[c] + node.label_base;
            }
            rows.push(row);
        }
    }
    let mut label_names: Vec<String> = (0..star).map(|l| l.to_string()).collect();
    label_names.push("*".into());
    let class = FiniteClass::new(next_point, star + 1, rows)?.with_names(None, Some(label_names))?;
    Ok(CounterexampleClass { depth, blocks, nodes, class, star })
}

/// Assembles and verifies: natarajan_dim = 1 and max_dsl_depth >= D.
pub fn make_counterexample_class(depth: usize) -> Result<CounterexampleClass> {
    let cx = assemble_counterexample(depth)?;
    let c = cx.check()?;
    if !c.holds(depth) {
        return Err(Error::Domain(format!(
            "counterexample check failed: natarajan {}, dsl depth {}, tree ok {}",
            c.natarajan, c.dsl_depth, c.tree_ok
        )));
    }
    Ok(cx)
}

/// Nodes, coordinates and labels where more than half of the node's edges
/// carry that label.
pub fn neq_prop_violations(tree: &DslTree, labels: u32) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (i, node) in tree.nodes.iter().enumerate() {
        let d = node.points.len();
        let cube = PseudoCube { d, patterns: node.cube.clone() };
        if !is_pseudo_cube(&cube.patterns, d)? {
            out.push(format!("node {i}: edge labels are not a pseudo-cube"));
            continue;
        }
        for j in 0..d {
            for y in 0..labels {
                let (count, half) = half_mass_check(&cube, j, y);
                if count as f64 > half {
                    out.push(format!("node {i}, coordinate {j}, label {y}: {count} of {}", cube.len()));
                }
            }
        }
    }
    Ok(out)
}

// ------------------------------------------------------ distributions

fn pow2_inv(k: usize) -> BigRational {
    BigRational::new(1.into(), num_bigint::BigInt::one() << k)
}

fn witness_schedule(
    class: &FiniteClass,
    groups: &[Vec<(usize, Label)>],
    tails: &[BigRational],
) -> Result<Vec<(usize, f64)>> {
    let mut pairs = Vec::new();
    let mut out = Vec::new();
    for (g, tail) in groups.iter().zip(tails) {
        pairs.extend_from_slice(g);
        let h = *class
            .consistent_members(&pairs)
            .first()
            .ok_or_else(|| Error::Domain("branch prefix is not realized by the class".into()))?;
        out.push((h, rat_to_f64(tail) + 1e-15));
    }
    Ok(out)
}

/// Dyadic weights along a Littlestone branch: level k gets 2^{-k-1}, and
/// the deepest atom also takes the leftover 2^{-depth}.
pub fn littlestone_branch_distribution(
    class: &FiniteClass,
    tree: &LittlestoneTree,
    u: &[bool],
) -> Result<RealizableDistribution> {
    let depth = tree.depth;
    if depth == 0 || u.len() != depth {
        return usage(format!("branch has length {}, tree depth is {depth}", u.len()));
    }
    let v = verify_tree(&AnyTree::Littlestone(tree.clone()), class)?;
    if !v.ok {
        return Err(Error::Domain(format!("tree does not verify: {}", v.violation.unwrap_or_default())));
    }
    let mut atoms = Vec::with_capacity(depth);
    let mut idx = 0;
    for (k, &bit) in u.iter().enumerate() {
        let node = tree.nodes[idx];
        let y = if bit { node.y1 } else { node.y0 };
        let mut w = pow2_inv(k + 1);
        if k + 1 == depth {
            w += pow2_inv(depth);
        }
        atoms.push((node.x, y, w));
        idx = 2 * idx + 1 + bit as usize;
    }
    let groups: Vec<Vec<(usize, Label)>> = atoms.iter().map(|a| vec![(a.0, a.1)]).collect();
    let mut tails = Vec::with_capacity(depth);
    let mut rest = BigRational::one();
    for a in &atoms {
        rest -= &a.2;
        tails.push(rest.clone());
    }
    let sched = witness_schedule(class, &groups, &tails)?;
    RealizableDistribution::from_exact(class, atoms, Certificate::LimitRealizable(sched))
}

/// Level k of the branch contributes its k points, each with weight p_k / k.
pub fn dsl_branch_distribution(
    class: &FiniteClass,
    tree: &DslTree,
    branch: &[usize],
    schedule: &Schedule,
) -> Result<RealizableDistribution> {
    let depth = tree.depth;
    if depth == 0 || branch.len() != depth {
        return usage(format!("branch has length {}, tree depth is {depth}", branch.len()));
    }
    let p = schedule.truncated(depth);
    let mut groups = Vec::with_capacity(depth);
    let mut atoms = Vec::new();
    let mut idx = 0;
    for (lvl, &j) in branch.iter().enumerate() {
        let k = lvl + 1;
        let node = tree.nodes.get(idx).ok_or_else(|| Error::Usage(format!("missing node at level {k}")))?;
        if j >= node.cube.len() {
            return usage(format!("level {k}: child index {j} out of range 0..{}", node.cube.len()));
        }
        let y = &node.cube[j];
        let w = &p[lvl] / BigRational::from_integer((k as i64).into());
        let mut g = Vec::with_capacity(k);
        for (c, &x) in node.points.iter().enumerate() {
            g.push((x, y[c]));
            if !w.is_zero() {
                atoms.push((x, y[c], w.clone()));
            }
        }
        groups.push(g);
        if k < depth {
            idx = node.children[j].ok_or_else(|| Error::Usage(format!("level {k}: child {j} missing")))?;
        }
    }
    let mut tails = Vec::with_capacity(depth);
    let mut rest = BigRational::one();
    for pk in &p {
        rest -= pk;
        tails.push(rest.clone());
    }
    let sched = witness_schedule(class, &groups, &tails)?;
    RealizableDistribution::from_exact(class, atoms, Certificate::LimitRealizable(sched))
}

// ------------------------------------------------------------ schedules

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Checkpoint {
    pub n: u64,
    pub k: usize,
    pub r: f64,
}

/// Masses p_1, p_2, ... with checkpoints (n_i, k_i) and constant Cc.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub p: Vec<BigRational>,
    pub checkpoints: Vec<Checkpoint>,
    pub cc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleCheck {
    pub ok: bool,
    pub violations: Vec<String>,
}

impl Schedule {
    /// Explicit masses without checkpoints; must sum to 1 exactly.
    pub fn from_masses(p: Vec<BigRational>) -> Result<Self> {
        let s = Schedule { p, checkpoints: Vec::new(), cc: 1.0 };
        let c = s.check();
        if !c.ok {
            return Err(Error::Domain(c.violations.join("; ")));
        }
        Ok(s)
    }

    fn pk(&self, k: usize) -> BigRational {
        self.p.get(k - 1).cloned().unwrap_or_else(BigRational::zero)
    }

    /// The four conditions, re-verified exactly.
    pub fn check(&self) -> ScheduleCheck {
        let mut v = Vec::new();
        let total: BigRational = self.p.iter().sum();
        if total != BigRational::one() {
            v.push(format!("masses sum to {}, not 1", rat_to_f64(&total)));
        }
        if self.p.iter().any(|x| x < &BigRational::zero()) {
            v.push("negative mass".into());
        }
        if !(0.5..=1.0).contains(&self.cc) {
            v.push(format!("Cc = {} outside [1/2, 1]", self.cc));
        }
        for (i, c) in self.checkpoints.iter().enumerate() {
            let tail: BigRational = self.p.iter().skip(c.k).sum();
            if tail * BigRational::from_integer(c.n.into()) > BigRational::one() {
                v.push(format!("checkpoint {i}: tail mass beyond k = {} exceeds 1/{}", c.k, c.n));
            }
            let pk = self.pk(c.k);
            if &pk * BigRational::from_integer(c.n.into()) > BigRational::from_integer((c.k as i64).into()) {
                v.push(format!("checkpoint {i}: n p_k = {} > k = {}", c.n as f64 * rat_to_f64(&pk), c.k));
            }
            let want = BigRational::from_float(self.cc * c.r);
            if want.as_ref() != Some(&pk) {
                v.push(format!("checkpoint {i}: p_k = {} differs from Cc R(n) = {}", rat_to_f64(&pk), self.cc * c.r));
            }
        }
        ScheduleCheck { ok: v.is_empty(), violations: v }
    }

    /// First `depth` masses, the remainder folded into the last one.
    pub fn truncated(&self, depth: usize) -> Vec<BigRational> {
        let mut out: Vec<BigRational> = (1..=depth).map(|k| self.pk(k)).collect();
        let rest: BigRational = self.p.iter().skip(depth).sum();
        if let Some(last) = out.last_mut() {
            *last += rest;
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "p": self.p.iter().map(rat_to_f64).collect::<Vec<_>>(),
            "p_exact": self.p.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "checkpoints": self.checkpoints,
            "cc": self.cc,
            "check": self.check(),
        })
    }
}

/// Greedy schedule from samples (n, R(n)) on an increasing grid: walk the
/// grid, add a checkpoint whenever its mass Cc R(n) keeps every earlier tail
/// within 1/n_j, the total within 1, and k = max(⌈n p⌉, k_prev + 1, 2)
/// within the depth cap. Leftover mass goes to index 1, which lies below
/// every k_i and so never enters a tail. Cc is scanned from 1 down to 1/2
/// and the value giving most checkpoints is kept.
pub fn make_schedule(samples: &[(u64, f64)], depth_cap: usize) -> Result<Schedule> {
    if depth_cap == 0 {
        return usage("depth cap must be positive");
    }
    for w in samples.windows(2) {
        if w[1].0 <= w[0].0 {
            return usage("sample grid must be strictly increasing");
        }
        if w[1].1 > w[0].1 {
            return usage(format!("R increases between n = {} and n = {}", w[0].0, w[1].0));
        }
    }
    if samples.iter().any(|s| !(0.0..=1.0).contains(&s.1) || s.0 == 0) {
        return usage("R must lie in [0, 1] on positive n");
    }
    let mut best: Option<(Vec<(u64, usize, f64, BigRational)>, f64)> = None;
    let mut binding = String::from("no positive R value");
    for step in 0..=10 {
        let cc = 1.0 - step as f64 * 0.05;
        let mut cps: Vec<(u64, usize, f64, BigRational)> = Vec::new();
        let mut total = BigRational::zero();
        for &(n, r) in samples {
            if r == 0.0 || cps.last().is_some_and(|c| n <= c.0) {
                continue;
            }
            let Some(p) = BigRational::from_float(cc * r) else { continue };
            let np = rat_to_f64(&p) * n as f64;
            let k = (np.ceil() as usize).max(cps.last().map_or(2, |c| c.1 + 1)).max(2);
            if k > depth_cap {
                binding = format!("n p_k <= k needs k = {k} > depth cap {depth_cap} at n = {n}");
                continue;
            }
            if &total + &p > BigRational::one() {
                binding = format!("total mass would exceed 1 at n = {n}");
                continue;
            }
            // tails of earlier checkpoints gain p
            let mut tail = p.clone();
            let mut ok = true;
            for c in cps.iter().rev() {
                if &tail * BigRational::from_integer(c.0.into()) > BigRational::one() {
                    ok = false;
                    binding = format!("tail beyond k = {} would exceed 1/{} at n = {n}", c.1, c.0);
                    break;
                }
                tail += &c.3;
            }
            if !ok {
                continue;
            }
            total += &p;
            cps.push((n, k, r, p));
        }
        if best.as_ref().map_or(true, |b| cps.len() > b.0.len()) {
            best = Some((cps, cc));
        }
    }
    let (cps, cc) = best.expect("scanned at least one Cc");
    let all_zero = samples.iter().all(|s| s.1 == 0.0);
    if cps.is_empty() && !all_zero {
        return Err(Error::Domain(format!("no feasible checkpoint: {binding}")));
    }
    let len = cps.last().map_or(1, |c| c.1);
    let mut p = vec![BigRational::zero(); len];
    let mut used = BigRational::zero();
    for c in &cps {
        p[c.1 - 1] = c.3.clone();
        used += &c.3;
    }
    p[0] += BigRational::one() - used;
    let checkpoints = cps.into_iter().map(|c| Checkpoint { n: c.0, k: c.1, r: c.2 }).collect();
    Ok(Schedule { p, checkpoints, cc: if all_zero { 1.0 } else { cc } })
}

/// Samples of R on the grid 2^1..2^max_exp.
pub fn rate_samples(r: impl Fn(f64) -> f64, max_exp: u32) -> Vec<(u64, f64)> {
    (1..=max_exp).map(|e| (1u64 << e, r((1u64 << e) as f64))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::class::rat;
    use crate::dimensions::littlestone_dim;
    use crate::learners::example1_online;
    use crate::trees::littlestone_tree;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lattice_small_cases() {
        let c = make_lattice_linear_class(1, 2, 3, &[1], &[2]).unwrap();
        // score_2 = x - 2 vs -2 (ties go to the larger label)
        assert_eq!(c.hypotheses(), vec![vec![1, 1, 1, 1]]);
        let c = make_lattice_linear_class(1, 2, 4, &[1], &[1, 2, 3, 4, 5, 6]).unwrap();
        for h in c.iter() {
            assert!(h.windows(2).all(|w| w[0] <= w[1]));
        }
        assert!(c.len() >= 3);
        let one = make_lattice_linear_class(2, 1, 2, &[0, 1], &[1, 2]).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one.hyp(0).iter().all(|&y| y == 0));
        assert!(make_lattice_linear_class(1, 2, 3, &[], &[1]).is_err());
        assert_eq!(c.point_name(3), "3");
    }

    fn coords(c: &FiniteClass) -> Vec<Vec<u64>> {
        crate::learners::lattice_coords(c).unwrap()
    }

    #[test]
    fn lattice_monotone_2d() {
        let c = make_lattice_linear_class(2, 3, 3, &[0, 1, 2], &[1, 3]).unwrap();
        let xs = coords(&c);
        for h in c.iter() {
            for a in 0..xs.len() {
                for b in 0..xs.len() {
                    if xs[a].iter().zip(&xs[b]).all(|(p, q)| p <= q) {
                        assert!(h[a] <= h[b]);
                    }
                }
            }
        }
    }

    #[test]
    fn lattice_permutations_have_finite_mistakes() {
        let c = make_lattice_linear_class(1, 3, 7, &[0, 1, 2], &[1, 4, 8]).unwrap();
        let xs = coords(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let h = c.hyp(rng.gen_range(0..c.len())).to_vec();
            let pts: Vec<usize> = (0..8).filter(|_| rng.gen_bool(0.6)).take(5).collect();
            for perm in pts.iter().permutations(pts.len()) {
                let s: Vec<(Vec<u64>, u32)> = perm.iter().map(|&&x| (xs[x].clone(), h[x] + 1)).collect();
                let t = example1_online(&s).unwrap();
                assert!(t.mistakes <= s.len());
            }
        }
    }

    #[test]
    fn block_examples() {
        let b1 = find_natarajan1_pseudocube(1, 2).unwrap();
        assert_eq!(b1.patterns, vec![vec![0], vec![1]]);
        let b2 = find_natarajan1_pseudocube(2, 3).unwrap();
        assert_eq!(b2.len(), 6);
        assert!(natarajan_one(2, 3, &b2.patterns));
        assert!(matches!(find_natarajan1_pseudocube(2, 2), Err(Error::Domain(_))));
        let b3 = find_natarajan1_pseudocube(3, 7).unwrap();
        assert_eq!(b3.len(), 42);
        assert!(natarajan_one(3, 7, &b3.patterns));
        assert!(find_natarajan1_pseudocube(3, 6).is_err());
    }

    // independent check of the d = 2 search: no 2x2 grid in the projection
    #[test]
    fn block_two_has_no_grid() {
        let b = find_natarajan1_pseudocube(2, 3).unwrap();
        let has = |a: Label, c: Label| b.contains(&[a, c]);
        for (a, a2, c, c2) in (0..3).flat_map(|a| (0..3).flat_map(move |a2| (0..3).flat_map(move |c| (0..3).map(move |c2| (a, a2, c, c2))))) {
            if a != a2 && c != c2 {
                assert!(!(has(a, c) && has(a2, c2) && has(a, c2) && has(a2, c)));
            }
        }
    }

    #[test]
    fn counterexample_shapes() {
        let c1 = assemble_counterexample(1).unwrap();
        assert_eq!((c1.class.domain_size(), c1.class.len()), (1, 2));
        let ch = c1.check().unwrap();
        assert!(ch.holds(1), "{ch:?}");
        let c2 = make_counterexample_class(2).unwrap();
        assert_eq!(c2.class.domain_size(), 5);
        assert_eq!(c2.class.len(), 2 + 12);
        let c3 = assemble_counterexample(3).unwrap();
        assert_eq!(c3.class.domain_size(), 41);
        assert_eq!(c3.class.len(), 2 + 12 + 12 * 42);
        assert_eq!(c3.star, c3.class.labels() - 1);
        assert!(verify_tree(&AnyTree::Dsl(c3.tree()), &c3.class).unwrap().ok);
        assert!(assemble_counterexample(4).is_err());
    }

    #[test]
    fn neq_prop_on_counterexample_tree() {
        let c = assemble_counterexample(3).unwrap();
        assert!(neq_prop_violations(&c.tree(), c.class.labels()).unwrap().is_empty());
    }

    #[test]
    fn littlestone_branch_weights() {
        let c = FiniteClass::full(3, 2);
        let t = littlestone_tree(&c);
        assert_eq!(t.depth, littlestone_dim(&c));
        let d = littlestone_branch_distribution(&c, &t, &[true, false, true]).unwrap();
        let w = d.exact.clone().unwrap();
        assert_eq!(w, vec![rat(1, 2), rat(1, 4), rat(1, 4)]);
        let t1 = littlestone_tree(&FiniteClass::new(1, 2, vec![vec![0], vec![1]]).unwrap());
        let c1 = FiniteClass::new(1, 2, vec![vec![0], vec![1]]).unwrap();
        let d1 = littlestone_branch_distribution(&c1, &t1, &[false]).unwrap();
        assert_eq!(d1.exact.unwrap(), vec![BigRational::one()]);
        assert!(littlestone_branch_distribution(&c, &t, &[true]).is_err());
    }

    #[test]
    fn dsl_branch_weights() {
        let c = make_counterexample_class(2).unwrap();
        let tree = c.tree();
        let one = Schedule::from_masses(vec![BigRational::one()]).unwrap();
        let t1 = DslTree { depth: 1, nodes: vec![DslNode { children: vec![None; 2], ..tree.nodes[0].clone() }] };
        let d = dsl_branch_distribution(&c.class, &t1, &[1], &one).unwrap();
        assert_eq!(d.exact.unwrap(), vec![BigRational::one()]);
        let half = Schedule::from_masses(vec![rat(1, 2), rat(1, 2)]).unwrap();
        let d = dsl_branch_distribution(&c.class, &tree, &[0, 4], &half).unwrap();
        assert_eq!(d.exact.clone().unwrap(), vec![rat(1, 2), rat(1, 4), rat(1, 4)]);
        assert!(matches!(dsl_branch_distribution(&c.class, &tree, &[0, 9], &half), Err(Error::Usage(_))));
    }

    #[test]
    fn random_children_disagree_half_the_time() {
        // uniform child at each node: empirical P[label = y] <= 1/2 + noise
        let c = assemble_counterexample(3).unwrap();
        let tree = c.tree();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for node in &tree.nodes {
            for j in 0..node.points.len() {
                let y = node.cube[0][j];
                let hits = (0..4000).filter(|_| node.cube[rng.gen_range(0..node.cube.len())][j] == y).count();
                assert!((hits as f64) / 4000.0 <= 0.5 + 0.03);
            }
        }
    }

    #[test]
    fn schedules() {
        let inv = make_schedule(&rate_samples(|n| 1.0 / n, 40), 12).unwrap();
        assert!(inv.check().ok, "{:?}", inv.check());
        assert!(!inv.checkpoints.is_empty());
        let zero = make_schedule(&rate_samples(|_| 0.0, 10), 12).unwrap();
        assert_eq!(zero.p, vec![BigRational::one()]);
        assert!(zero.check().ok);
        let slow = make_schedule(&rate_samples(|n| 1.0 / (n + 1.0).ln(), 40), 12).unwrap();
        assert!(slow.check().ok, "{:?}", slow.check());
        assert!(slow.checkpoints.len() >= 2);
        assert!(make_schedule(&[(2, 0.1), (4, 0.2)], 12).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn schedules_validate(a in 0.05f64..1.0, e in 0.3f64..2.0, cap in 2usize..20) {
            let r = rate_samples(|n| (a / n.powf(e)).min(1.0), 30);
            if let Ok(s) = make_schedule(&r, cap) {
                prop_assert!(s.check().ok, "{:?}", s.check());
                prop_assert!(s.p.len() <= cap);
            }
        }

        #[test]
        fn branch_weights_sum_to_one(bits in proptest::collection::vec(any::<bool>(), 3)) {
            let c = FiniteClass::full(3, 2);
            let t = littlestone_tree(&c);
            let d = littlestone_branch_distribution(&c, &t, &bits).unwrap();
            let s: BigRational = d.exact.unwrap().into_iter().sum();
            prop_assert_eq!(s, BigRational::one());
        }
    }

    #[test]
    fn check_flags_bad_schedules() {
        let mut s = make_schedule(&rate_samples(|n| 1.0 / n, 20), 12).unwrap();
        s.p[0] += rat(1, 1000);
        assert!(!s.check().ok);
        let _ = is_pseudo_cube(&[vec![0]], 1);
    }
}
