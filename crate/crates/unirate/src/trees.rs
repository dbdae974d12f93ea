//! Finite-depth Littlestone, DSL, NL and GL trees: builders, a checker,
//! and the NL -> DSL -> GL conversions.
//!
//! Convention: a tree of depth d has nodes on levels 0..d-1 and every
//! root-to-leaf path, including the edge leaving the last level, must be
//! realized by a hypothesis.

use std::collections::{BTreeMap, HashMap};

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::class::{gather, FiniteClass, Label, Pattern};
use crate::dimensions::log2_floor;
use crate::error::{usage, Result};
use crate::pseudocube::{is_pseudo_cube, peel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LNode {
    pub x: usize,
    pub y0: Label,
    pub y1: Label,
}

/// Complete binary tree in heap order: the node at binary string u sits at
/// index 2^|u| - 1 + int(u), children at 2i+1 (edge y0) and 2i+2 (edge y1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LittlestoneTree {
    pub depth: usize,
    pub nodes: Vec<LNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DslNode {
    pub points: Vec<usize>,
    /// Edge labels, sorted; `children[j]` hangs under `cube[j]`.
    pub cube: Vec<Pattern>,
    pub children: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DslTree {
    pub depth: usize,
    pub nodes: Vec<DslNode>,
}

/// Children of NL and GL nodes are indexed by the sign vector u, bit i = u^i.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlNode {
    pub points: Vec<usize>,
    pub s0: Pattern,
    pub s1: Pattern,
    pub children: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlTree {
    pub depth: usize,
    pub nodes: Vec<NlNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlNode {
    pub points: Vec<usize>,
    pub s: Pattern,
    pub children: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlTree {
    pub depth: usize,
    pub nodes: Vec<GlNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnyTree {
    Littlestone(LittlestoneTree),
    Dsl(DslTree),
    Nl(NlTree),
    Gl(GlTree),
}

/// Outcome of `verify_tree`: `violation` names the first failing check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub ok: bool,
    pub violation: Option<String>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict { ok: true, violation: None }
    }
    fn fail(msg: impl Into<String>) -> Self {
        Verdict { ok: false, violation: Some(msg.into()) }
    }
}

fn mixture(s0: &[Label], s1: &[Label], u: usize) -> Pattern {
    (0..s0.len()).map(|i| if u >> i & 1 == 1 { s1[i] } else { s0[i] }).collect()
}

fn signs(h: &[Label], s: &[Label]) -> usize {
    h.iter().zip(s).enumerate().fold(0, |m, (i, (a, b))| m | ((a != b) as usize) << i)
}

fn bits_str(u: usize, len: usize) -> String {
    (0..len).map(|i| if u >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn filter_eq(class: &FiniteClass, v: &[u32], x: &[usize], y: &[Label]) -> Vec<u32> {
    v.iter()
        .copied()
        .filter(|&h| {
            let row = class.hyp(h as usize);
            x.iter().zip(y).all(|(&p, &l)| row[p] == l)
        })
        .collect()
}

fn active_points(class: &FiniteClass, v: &[u32]) -> Vec<usize> {
    (0..class.domain_size())
        .filter(|&x| {
            let first = class.hyp(v[0] as usize)[x];
            v.iter().any(|&h| class.hyp(h as usize)[x] != first)
        })
        .collect()
}

fn group_by(class: &FiniteClass, v: &[u32], x: &[usize]) -> BTreeMap<Pattern, Vec<u32>> {
    let mut g: BTreeMap<Pattern, Vec<u32>> = BTreeMap::new();
    for &h in v {
        g.entry(gather(class.hyp(h as usize), x)).or_default().push(h);
    }
    g
}

fn all_members(class: &FiniteClass) -> Vec<u32> {
    (0..class.len() as u32).collect()
}

// ---------------------------------------------------------------- Littlestone

struct LSearch<'a> {
    class: &'a FiniteClass,
    memo: HashMap<(Vec<u32>, usize), bool>,
}

impl LSearch<'_> {
    // Is there a complete tree of depth d inside v?
    fn exists(&mut self, v: &[u32], d: usize) -> bool {
        if d == 0 {
            return !v.is_empty();
        }
        if v.len() < (1 << d.min(40)) {
            return false;
        }
        let key = (v.to_vec(), d);
        if let Some(&b) = self.memo.get(&key) {
            return b;
        }
        let r = self.find(v, d).is_some();
        self.memo.insert(key, r);
        r
    }

    fn find(&mut self, v: &[u32], d: usize) -> Option<(LNode, Vec<u32>, Vec<u32>)> {
        let k = self.class.labels();
        for x in 0..self.class.domain_size() {
            for y0 in 0..k {
                let a = filter_eq(self.class, v, &[x], &[y0]);
                if a.is_empty() || !self.exists(&a, d - 1) {
                    continue;
                }
                for y1 in y0 + 1..k {
                    let b = filter_eq(self.class, v, &[x], &[y1]);
                    if self.exists(&b, d - 1) {
                        return Some((LNode { x, y0, y1 }, a, b));
                    }
                }
            }
        }
        None
    }

    fn build(&mut self, v: &[u32], d: usize, at: usize, nodes: &mut Vec<LNode>) {
        if d == 0 {
            return;
        }
        let (node, a, b) = self.find(v, d).expect("depth was certified");
        nodes[at] = node;
        self.build(&a, d - 1, 2 * at + 1, nodes);
        self.build(&b, d - 1, 2 * at + 2, nodes);
    }
}

/// Deepest Littlestone tree and a witness, by iterative deepening.
pub fn max_littlestone_depth(class: &FiniteClass, max_depth: Option<usize>) -> (usize, LittlestoneTree) {
    let mut s = LSearch { class, memo: HashMap::new() };
    let all = all_members(class);
    let limit = max_depth.unwrap_or(usize::MAX);
    let mut d = 0;
    while d < limit && s.exists(&all, d + 1) {
        d += 1;
    }
    let mut nodes = vec![LNode { x: 0, y0: 0, y1: 0 }; (1 << d) - 1];
    s.build(&all, d, 0, &mut nodes);
    (d, LittlestoneTree { depth: d, nodes })
}

pub fn littlestone_tree(class: &FiniteClass) -> LittlestoneTree {
    max_littlestone_depth(class, None).1
}

// ---------------------------------------------------------------------- DSL

struct DslSearch<'a> {
    class: &'a FiniteClass,
    memo: HashMap<(Vec<u32>, usize), usize>,
}

impl DslSearch<'_> {
    /// Max depth of a DSL tree inside v whose root carries m-tuples.
    fn value(&mut self, v: &[u32], m: usize) -> usize {
        if v.len() < 2 || m >= 40 || v.len() < (1 << m) {
            return 0;
        }
        let key = (v.to_vec(), m);
        if let Some(&r) = self.memo.get(&key) {
            return r;
        }
        let ceiling = log2_floor(v.len());
        let mut best = 0;
        let active = active_points(self.class, v);
        for x in active.into_iter().combinations(m) {
            if let Some((t, _)) = self.best_at(v, &x, m, best + 1) {
                best = t;
                if best >= ceiling {
                    break;
                }
            }
        }
        self.memo.insert(key, best);
        best
    }

    /// Largest t >= floor with a cube of children of depth >= t-1 at tuple x.
    fn best_at(&mut self, v: &[u32], x: &[usize], m: usize, floor: usize) -> Option<(usize, Vec<Pattern>)> {
        let groups = group_by(self.class, v, x);
        let keys: Vec<Pattern> = groups.keys().cloned().collect();
        let core = peel(&keys, m);
        if core.is_empty() {
            return None;
        }
        let vals: Vec<usize> = core.iter().map(|y| self.value(&groups[y], m + 1)).collect();
        let top = 1 + vals.iter().copied().max().unwrap_or(0);
        for t in (floor.max(1)..=top).rev() {
            let s: Vec<Pattern> =
                core.iter().zip(&vals).filter(|(_, &r)| r + 1 >= t).map(|(y, _)| y.clone()).collect();
            let c = peel(&s, m);
            if !c.is_empty() {
                return Some((t, c));
            }
        }
        None
    }

    fn build(&mut self, v: &[u32], m: usize, t: usize, nodes: &mut Vec<DslNode>) -> usize {
        let active = active_points(self.class, v);
        let (x, cube) = active
            .into_iter()
            .combinations(m)
            .find_map(|x| {
                let (got, c) = self.best_at(v, &x, m, t)?;
                (got >= t).then(|| {
                    // shrink to exactly the threshold-t set
                    let groups = group_by(self.class, v, &x);
                    let s: Vec<Pattern> = c
                        .iter()
                        .filter(|y| self.value(&groups[*y], m + 1) + 1 >= t)
                        .cloned()
                        .collect();
                    (x, peel(&s, m))
                })
            })
            .expect("depth was certified");
        let at = nodes.len();
        nodes.push(DslNode { points: x.clone(), cube: cube.clone(), children: vec![None; cube.len()] });
        if t > 1 {
            for (j, y) in cube.iter().enumerate() {
                let sub = filter_eq(self.class, v, &x, y);
                let c = self.build(&sub, m + 1, t - 1, nodes);
                nodes[at].children[j] = Some(c);
            }
        }
        at
    }
}

/// Deepest DSL tree (optionally capped) and a witness.
pub fn max_dsl_depth(class: &FiniteClass, max_depth: Option<usize>) -> (usize, DslTree) {
    let mut s = DslSearch { class, memo: HashMap::new() };
    let all = all_members(class);
    let d = s.value(&all, 1).min(max_depth.unwrap_or(usize::MAX));
    let mut nodes = Vec::new();
    if d > 0 {
        s.build(&all, 1, d, &mut nodes);
    }
    (d, DslTree { depth: d, nodes })
}

// ----------------------------------------------------------------------- NL

struct NlSearch<'a> {
    class: &'a FiniteClass,
    memo: HashMap<(Vec<u32>, usize), usize>,
}

impl NlSearch<'_> {
    fn value(&mut self, v: &[u32], m: usize) -> usize {
        if m >= 40 || v.len() < (1 << m) {
            return 0;
        }
        let key = (v.to_vec(), m);
        if let Some(&r) = self.memo.get(&key) {
            return r;
        }
        let mut best = 0;
        for x in active_points(self.class, v).into_iter().combinations(m) {
            if let Some((t, _, _)) = self.best_at(v, &x, m) {
                best = best.max(t);
            }
        }
        self.memo.insert(key, best);
        best
    }

    fn best_at(&mut self, v: &[u32], x: &[usize], m: usize) -> Option<(usize, Pattern, Pattern)> {
        let groups = group_by(self.class, v, x);
        let keys: Vec<&Pattern> = groups.keys().collect();
        let mut best: Option<(usize, Pattern, Pattern)> = None;
        for (a, s0) in keys.iter().enumerate() {
            for s1 in &keys[a + 1..] {
                if s0.iter().zip(s1.iter()).any(|(p, q)| p == q) {
                    continue;
                }
                let kids: Option<Vec<&Vec<u32>>> =
                    (0..1usize << m).map(|u| groups.get(&mixture(s0, s1, u))).collect();
                let Some(kids) = kids else { continue };
                let t = 1 + kids.iter().map(|g| self.value(g, m + 1)).min().unwrap();
                if best.as_ref().map_or(true, |b| t > b.0) {
                    best = Some((t, (*s0).clone(), (*s1).clone()));
                }
            }
        }
        best
    }

    fn build(&mut self, v: &[u32], m: usize, t: usize, nodes: &mut Vec<NlNode>) -> usize {
        let (x, s0, s1) = active_points(self.class, v)
            .into_iter()
            .combinations(m)
            .find_map(|x| {
                let (got, s0, s1) = self.first_at_least(v, &x, m, t)?;
                (got >= t).then_some((x, s0, s1))
            })
            .expect("depth was certified");
        let at = nodes.len();
        nodes.push(NlNode { points: x.clone(), s0: s0.clone(), s1: s1.clone(), children: vec![None; 1 << m] });
        if t > 1 {
            for u in 0..1usize << m {
                let sub = filter_eq(self.class, v, &x, &mixture(&s0, &s1, u));
                let c = self.build(&sub, m + 1, t - 1, nodes);
                nodes[at].children[u] = Some(c);
            }
        }
        at
    }

    // first (s0, s1) pair in order whose value reaches t
    fn first_at_least(&mut self, v: &[u32], x: &[usize], m: usize, t: usize) -> Option<(usize, Pattern, Pattern)> {
        let groups = group_by(self.class, v, x);
        let keys: Vec<Pattern> = groups.keys().cloned().collect();
        for (a, s0) in keys.iter().enumerate() {
            for s1 in &keys[a + 1..] {
                if s0.iter().zip(s1).any(|(p, q)| p == q) {
                    continue;
                }
                let mut ok = true;
                for u in 0..1usize << m {
                    match groups.get(&mixture(s0, s1, u)) {
                        Some(g) => {
                            let g = g.clone();
                            if self.value(&g, m + 1) + 1 < t {
                                ok = false;
                                break;
                            }
                        }
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Some((t, s0.clone(), s1.clone()));
                }
            }
        }
        None
    }
}

pub fn max_nl_depth(class: &FiniteClass, max_depth: Option<usize>) -> (usize, NlTree) {
    let mut s = NlSearch { class, memo: HashMap::new() };
    let all = all_members(class);
    let d = s.value(&all, 1).min(max_depth.unwrap_or(usize::MAX));
    let mut nodes = Vec::new();
    if d > 0 {
        s.build(&all, 1, d, &mut nodes);
    }
    (d, NlTree { depth: d, nodes })
}

// ----------------------------------------------------------------------- GL

struct GlSearch<'a> {
    class: &'a FiniteClass,
    memo: HashMap<(Vec<u32>, usize), usize>,
}

impl GlSearch<'_> {
    fn split(&self, v: &[u32], x: &[usize], s: &[Label], m: usize) -> Option<Vec<Vec<u32>>> {
        let mut parts = vec![Vec::new(); 1 << m];
        for &h in v {
            parts[signs(&gather(self.class.hyp(h as usize), x), s)].push(h);
        }
        parts.iter().all(|p| !p.is_empty()).then_some(parts)
    }

    fn value(&mut self, v: &[u32], m: usize) -> usize {
        if m >= 40 || v.len() < (1 << m) {
            return 0;
        }
        let key = (v.to_vec(), m);
        if let Some(&r) = self.memo.get(&key) {
            return r;
        }
        let mut best = 0;
        for x in active_points(self.class, v).into_iter().combinations(m) {
            let refs: Vec<Pattern> = group_by(self.class, v, &x).into_keys().collect();
            for s in &refs {
                if let Some(parts) = self.split(v, &x, s, m) {
                    let t = 1 + parts.iter().map(|p| self.value(p, m + 1)).min().unwrap();
                    best = best.max(t);
                }
            }
        }
        self.memo.insert(key, best);
        best
    }

    fn build(&mut self, v: &[u32], m: usize, t: usize, nodes: &mut Vec<GlNode>) -> usize {
        let mut pick = None;
        'outer: for x in active_points(self.class, v).into_iter().combinations(m) {
            let refs: Vec<Pattern> = group_by(self.class, v, &x).into_keys().collect();
            for s in refs {
                if let Some(parts) = self.split(v, &x, &s, m) {
                    if parts.iter().all(|p| self.value(p, m + 1) + 1 >= t) {
                        pick = Some((x, s, parts));
                        break 'outer;
                    }
                }
            }
        }
        let (x, s, parts) = pick.expect("depth was certified");
        let at = nodes.len();
        nodes.push(GlNode { points: x, s, children: vec![None; 1 << m] });
        if t > 1 {
            for (u, p) in parts.iter().enumerate() {
                let c = self.build(p, m + 1, t - 1, nodes);
                nodes[at].children[u] = Some(c);
            }
        }
        at
    }
}

pub fn max_gl_depth(class: &FiniteClass, max_depth: Option<usize>) -> (usize, GlTree) {
    let mut s = GlSearch { class, memo: HashMap::new() };
    let all = all_members(class);
    let d = s.value(&all, 1).min(max_depth.unwrap_or(usize::MAX));
    let mut nodes = Vec::new();
    if d > 0 {
        s.build(&all, 1, d, &mut nodes);
    }
    (d, GlTree { depth: d, nodes })
}

// ----------------------------------------------------------------- checking

fn check_point_tuple(class: &FiniteClass, pts: &[usize], level: usize, at: &str) -> Result<()> {
    if pts.len() != level + 1 {
        return usage(format!("{at}: tuple has length {}, expected {}", pts.len(), level + 1));
    }
    if let Some(&p) = pts.iter().find(|&&p| p >= class.domain_size()) {
        return usage(format!("{at}: point {p} out of range"));
    }
    Ok(())
}

fn check_labels(class: &FiniteClass, ys: &[Label], len: usize, at: &str) -> Result<()> {
    if ys.len() != len {
        return usage(format!("{at}: label tuple has length {}, expected {len}", ys.len()));
    }
    if let Some(&y) = ys.iter().find(|&&y| y >= class.labels()) {
        return usage(format!("{at}: label {y} out of range"));
    }
    Ok(())
}

// Arity and child-slot checks shared by the three tuple-labelled trees.
fn check_children(children: &[Option<usize>], want: usize, level: usize, depth: usize, n: usize, at: &str) -> Result<()> {
    if children.len() != want {
        return usage(format!("{at}: {} children, expected {want}", children.len()));
    }
    let last = level + 1 == depth;
    for c in children {
        match (c, last) {
            (None, true) => {}
            (Some(i), false) if *i < n => {}
            _ => return usage(format!("{at}: child slots do not match depth {depth}")),
        }
    }
    Ok(())
}

fn node_name(level: usize, path: &str) -> String {
    if level == 0 {
        "root".into()
    } else {
        format!("node {path}")
    }
}

/// Checks every invariant of the tree against `class`.
/// Malformed structure is a usage error; a failed invariant is a `Verdict`.
pub fn verify_tree(tree: &AnyTree, class: &FiniteClass) -> Result<Verdict> {
    let all = all_members(class);
    match tree {
        AnyTree::Littlestone(t) => verify_littlestone(t, class, &all),
        AnyTree::Dsl(t) => {
            if t.depth == 0 {
                return if t.nodes.is_empty() { Ok(Verdict::pass()) } else { usage("depth 0 tree with nodes") };
            }
            if t.nodes.is_empty() {
                return usage("tree has no root");
            }
            verify_dsl(t, class, 0, 0, &all, "")
        }
        AnyTree::Nl(t) => {
            if t.depth == 0 {
                return if t.nodes.is_empty() { Ok(Verdict::pass()) } else { usage("depth 0 tree with nodes") };
            }
            if t.nodes.is_empty() {
                return usage("tree has no root");
            }
            verify_nl(t, class, 0, 0, &all, "")
        }
        AnyTree::Gl(t) => {
            if t.depth == 0 {
                return if t.nodes.is_empty() { Ok(Verdict::pass()) } else { usage("depth 0 tree with nodes") };
            }
            if t.nodes.is_empty() {
                return usage("tree has no root");
            }
            verify_gl(t, class, 0, 0, &all, "")
        }
    }
}

fn verify_littlestone(t: &LittlestoneTree, class: &FiniteClass, all: &[u32]) -> Result<Verdict> {
    if t.depth >= 40 || t.nodes.len() != (1usize << t.depth) - 1 {
        return usage(format!("{} nodes for depth {}", t.nodes.len(), t.depth));
    }
    for (i, nd) in t.nodes.iter().enumerate() {
        let at = if i == 0 { "root".to_string() } else { format!("node {}", heap_path(i)) };
        check_point_tuple(class, &[nd.x], 0, &at)?;
        check_labels(class, &[nd.y0, nd.y1], 2, &at)?;
        if nd.y0 == nd.y1 {
            return Ok(Verdict::fail(format!("edge labels equal at {at}")));
        }
    }
    for eta in 0..1usize << t.depth {
        let mut v = all.to_vec();
        let mut i = 0;
        let mut path = String::new();
        for k in 0..t.depth {
            let b = eta >> (t.depth - 1 - k) & 1;
            let nd = t.nodes[i];
            v = filter_eq(class, &v, &[nd.x], &[if b == 1 { nd.y1 } else { nd.y0 }]);
            path.push(if b == 1 { '1' } else { '0' });
            if v.is_empty() {
                return Ok(Verdict::fail(format!("path {path} is not realized")));
            }
            i = 2 * i + 1 + b;
        }
    }
    Ok(Verdict::pass())
}

fn heap_path(mut i: usize) -> String {
    let mut s = Vec::new();
    while i > 0 {
        s.push(if i % 2 == 0 { '1' } else { '0' });
        i = (i - 1) / 2;
    }
    s.iter().rev().collect()
}

fn verify_dsl(t: &DslTree, class: &FiniteClass, i: usize, level: usize, v: &[u32], path: &str) -> Result<Verdict> {
    let nd = &t.nodes[i];
    let at = node_name(level, path);
    check_point_tuple(class, &nd.points, level, &at)?;
    for y in &nd.cube {
        check_labels(class, y, level + 1, &at)?;
    }
    check_children(&nd.children, nd.cube.len(), level, t.depth, t.nodes.len(), &at)?;
    if !nd.cube.windows(2).all(|w| w[0] < w[1]) {
        return usage(format!("{at}: edge labels are not sorted and distinct"));
    }
    if !is_pseudo_cube(&nd.cube, level + 1)? {
        return Ok(Verdict::fail(format!("edge labels at {at} are not a pseudo-cube")));
    }
    let proj = class.project(&nd.points)?;
    if let Some(y) = nd.cube.iter().find(|y| !proj.contains(y)) {
        return Ok(Verdict::fail(format!("edge {y:?} at {at} is outside the projection")));
    }
    for (j, y) in nd.cube.iter().enumerate() {
        let sub = filter_eq(class, v, &nd.points, y);
        let p = format!("{path}/{j}");
        if sub.is_empty() {
            return Ok(Verdict::fail(format!("path {p} is not realized")));
        }
        if let Some(c) = nd.children[j] {
            let r = verify_dsl(t, class, c, level + 1, &sub, &p)?;
            if !r.ok {
                return Ok(r);
            }
        }
    }
    Ok(Verdict::pass())
}

fn verify_nl(t: &NlTree, class: &FiniteClass, i: usize, level: usize, v: &[u32], path: &str) -> Result<Verdict> {
    let nd = &t.nodes[i];
    let at = node_name(level, path);
    let m = level + 1;
    check_point_tuple(class, &nd.points, level, &at)?;
    check_labels(class, &nd.s0, m, &at)?;
    check_labels(class, &nd.s1, m, &at)?;
    check_children(&nd.children, 1 << m, level, t.depth, t.nodes.len(), &at)?;
    if let Some(c) = (0..m).find(|&c| nd.s0[c] == nd.s1[c]) {
        return Ok(Verdict::fail(format!("s0 and s1 agree in coordinate {c} at {at}")));
    }
    for u in 0..1usize << m {
        let sub = filter_eq(class, v, &nd.points, &mixture(&nd.s0, &nd.s1, u));
        let p = format!("{path}/{}", bits_str(u, m));
        if sub.is_empty() {
            return Ok(Verdict::fail(format!("path {p} is not realized")));
        }
        if let Some(c) = nd.children[u] {
            let r = verify_nl(t, class, c, level + 1, &sub, &p)?;
            if !r.ok {
                return Ok(r);
            }
        }
    }
    Ok(Verdict::pass())
}

fn verify_gl(t: &GlTree, class: &FiniteClass, i: usize, level: usize, v: &[u32], path: &str) -> Result<Verdict> {
    let nd = &t.nodes[i];
    let at = node_name(level, path);
    let m = level + 1;
    check_point_tuple(class, &nd.points, level, &at)?;
    check_labels(class, &nd.s, m, &at)?;
    check_children(&nd.children, 1 << m, level, t.depth, t.nodes.len(), &at)?;
    for u in 0..1usize << m {
        let sub: Vec<u32> = v
            .iter()
            .copied()
            .filter(|&h| signs(&gather(class.hyp(h as usize), &nd.points), &nd.s) == u)
            .collect();
        let p = format!("{path}/{}", bits_str(u, m));
        if sub.is_empty() {
            return Ok(Verdict::fail(format!("path {p} is not realized")));
        }
        if let Some(c) = nd.children[u] {
            let r = verify_gl(t, class, c, level + 1, &sub, &p)?;
            if !r.ok {
                return Ok(r);
            }
        }
    }
    Ok(Verdict::pass())
}

// --------------------------------------------------------------- conversion

fn require_valid(tree: AnyTree, class: &FiniteClass) -> Result<AnyTree> {
    let v = verify_tree(&tree, class)?;
    if !v.ok {
        return usage(format!("input tree fails verification: {}", v.violation.unwrap_or_default()));
    }
    Ok(tree)
}

/// Each NL node becomes a DSL node whose cube is the Boolean cube of
/// s0/s1 mixtures.
pub fn nl_to_dsl(tree: &NlTree, class: &FiniteClass) -> Result<DslTree> {
    require_valid(AnyTree::Nl(tree.clone()), class)?;
    let nodes = tree
        .nodes
        .iter()
        .map(|nd| {
            let m = nd.points.len();
            let mut edges: Vec<(Pattern, Option<usize>)> =
                (0..1usize << m).map(|u| (mixture(&nd.s0, &nd.s1, u), nd.children[u])).collect();
            edges.sort();
            DslNode {
                points: nd.points.clone(),
                cube: edges.iter().map(|e| e.0.clone()).collect(),
                children: edges.iter().map(|e| e.1).collect(),
            }
        })
        .collect();
    Ok(DslTree { depth: tree.depth, nodes })
}

/// The reference s is the first edge label; child u is the cube element
/// reached from s by stepping to the first i-neighbor for each i with u^i = 1.
pub fn dsl_to_gl(tree: &DslTree, class: &FiniteClass) -> Result<GlTree> {
    require_valid(AnyTree::Dsl(tree.clone()), class)?;
    let nodes = tree
        .nodes
        .iter()
        .map(|nd| {
            let m = nd.points.len();
            let s = nd.cube[0].clone();
            let children = (0..1usize << m)
                .map(|u| {
                    let mut cur = s.clone();
                    for i in (0..m).filter(|i| u >> i & 1 == 1) {
                        cur = nd
                            .cube
                            .iter()
                            .find(|g| g[i] != cur[i] && (0..m).all(|j| j == i || g[j] == cur[j]))
                            .expect("pseudo-cube has every i-neighbor")
                            .clone();
                    }
                    let j = nd.cube.binary_search(&cur).expect("walk stays in the cube");
                    nd.children[j]
                })
                .collect();
            GlNode { points: nd.points.clone(), s, children }
        })
        .collect();
    Ok(GlTree { depth: tree.depth, nodes })
}

/// Takes s = s0; mixture u differs from s0 exactly where u^i = 1.
pub fn nl_to_gl(tree: &NlTree) -> GlTree {
    let nodes = tree
        .nodes
        .iter()
        .map(|nd| GlNode { points: nd.points.clone(), s: nd.s0.clone(), children: nd.children.clone() })
        .collect();
    GlTree { depth: tree.depth, nodes }
}

// --------------------------------------------------------------------- JSON

impl AnyTree {
    pub fn depth(&self) -> usize {
        match self {
            AnyTree::Littlestone(t) => t.depth,
            AnyTree::Dsl(t) => t.depth,
            AnyTree::Nl(t) => t.depth,
            AnyTree::Gl(t) => t.depth,
        }
    }

    /// `{kind, depth, nodes: [...], edges: [{from, to, label}]}`; `to` is
    /// null on edges leaving the last level.
    pub fn to_json(&self) -> Value {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let kind = match self {
            AnyTree::Littlestone(t) => {
                for (i, nd) in t.nodes.iter().enumerate() {
                    let level = log2_floor(i + 1);
                    nodes.push(json!({"id": i, "level": level, "x": nd.x}));
                    let last = level + 1 == t.depth;
                    for (b, y) in [nd.y0, nd.y1].into_iter().enumerate() {
                        let to = (!last).then_some(2 * i + 1 + b);
                        edges.push(json!({"from": i, "to": to, "label": y}));
                    }
                }
                "littlestone"
            }
            AnyTree::Dsl(t) => {
                for (i, nd) in t.nodes.iter().enumerate() {
                    nodes.push(json!({"id": i, "level": nd.points.len() - 1, "x": nd.points}));
                    for (y, c) in nd.cube.iter().zip(&nd.children) {
                        edges.push(json!({"from": i, "to": c, "label": y}));
                    }
                }
                "dsl"
            }
            AnyTree::Nl(t) => {
                for (i, nd) in t.nodes.iter().enumerate() {
                    let m = nd.points.len();
                    nodes.push(json!({"id": i, "level": m - 1, "x": nd.points, "s0": nd.s0, "s1": nd.s1}));
                    for (u, c) in nd.children.iter().enumerate() {
                        edges.push(json!({"from": i, "to": c, "label": bits_str(u, m)}));
                    }
                }
                "nl"
            }
            AnyTree::Gl(t) => {
                for (i, nd) in t.nodes.iter().enumerate() {
                    let m = nd.points.len();
                    nodes.push(json!({"id": i, "level": m - 1, "x": nd.points, "s": nd.s}));
                    for (u, c) in nd.children.iter().enumerate() {
                        edges.push(json!({"from": i, "to": c, "label": bits_str(u, m)}));
                    }
                }
                "gl"
            }
        };
        json!({"kind": kind, "depth": self.depth(), "nodes": nodes, "edges": edges})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimensions::{ds_dim, littlestone_dim};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn thresholds(n: usize) -> FiniteClass {
        let h = (0..=n).map(|t| (0..n).map(|x| (x >= t) as u32).collect()).collect();
        FiniteClass::new(n, 2, h).unwrap()
    }

    fn singleton() -> FiniteClass {
        FiniteClass::new(2, 3, vec![vec![2, 1]]).unwrap()
    }

    fn rand_class(seed: u64) -> FiniteClass {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=4);
        let k = rng.gen_range(2..=3);
        let m = rng.gen_range(1..=14);
        let h = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0..k)).collect()).collect();
        FiniteClass::new(n, k, h).unwrap()
    }

    fn ok(t: AnyTree, c: &FiniteClass) -> bool {
        verify_tree(&t, c).unwrap().ok
    }

    // Oracle for DSL depth: depth-limited search that enumerates every cube.
    fn dsl_brute(c: &FiniteClass, v: &[u32], m: usize, d: usize) -> bool {
        if d == 0 {
            return true;
        }
        for x in (0..c.domain_size()).combinations(m) {
            let p = crate::class::Projection::from_rows(
                x.clone(),
                v.iter().map(|&h| gather(c.hyp(h as usize), &x)),
            );
            if p.len() > 16 {
                continue;
            }
            for cube in crate::pseudocube::enumerate_pseudo_cubes(&p).unwrap() {
                if cube.patterns.iter().all(|y| dsl_brute(c, &filter_eq(c, v, &x, y), m + 1, d - 1)) {
                    return true;
                }
            }
        }
        false
    }

    fn dsl_brute_depth(c: &FiniteClass) -> usize {
        let all = all_members(c);
        (0..).take_while(|&d| dsl_brute(c, &all, 1, d)).last().unwrap()
    }

    #[test]
    fn littlestone_examples() {
        let (d, t) = max_littlestone_depth(&FiniteClass::full(2, 2), None);
        assert_eq!(d, 2);
        assert_eq!(t.nodes.len(), 3);
        assert!(ok(AnyTree::Littlestone(t), &FiniteClass::full(2, 2)));
        let (d, t) = max_littlestone_depth(&singleton(), None);
        assert_eq!((d, t.nodes.len()), (0, 0));
        let th = thresholds(7);
        let (d, t) = max_littlestone_depth(&th, None);
        assert_eq!(d, littlestone_dim(&th));
        assert_eq!(d, 3);
        assert!(ok(AnyTree::Littlestone(t), &th));
    }

    #[test]
    fn littlestone_violations() {
        let c = FiniteClass::full(2, 2);
        let bad = LittlestoneTree { depth: 1, nodes: vec![LNode { x: 0, y0: 1, y1: 1 }] };
        let v = verify_tree(&AnyTree::Littlestone(bad), &c).unwrap();
        assert_eq!(v.violation.as_deref(), Some("edge labels equal at root"));
        let wrong = LittlestoneTree { depth: 2, nodes: vec![LNode { x: 0, y0: 0, y1: 1 }] };
        assert!(verify_tree(&AnyTree::Littlestone(wrong), &c).is_err());
        let diag = FiniteClass::new(2, 2, vec![vec![0, 0], vec![1, 1]]).unwrap();
        let t = LittlestoneTree {
            depth: 2,
            nodes: vec![LNode { x: 0, y0: 0, y1: 1 }, LNode { x: 1, y0: 0, y1: 1 }, LNode { x: 1, y0: 0, y1: 1 }],
        };
        assert!(!ok(AnyTree::Littlestone(t), &diag));
    }

    #[test]
    fn dsl_examples() {
        let c = FiniteClass::full(3, 2);
        let (d, t) = max_dsl_depth(&c, None);
        assert_eq!(d, 2);
        assert_eq!(dsl_brute_depth(&c), 2);
        assert!(ok(AnyTree::Dsl(t), &c));
        let (d, t) = max_dsl_depth(&singleton(), None);
        assert_eq!((d, t.nodes.len()), (0, 0));
    }

    #[test]
    fn dsl_depth_on_larger_boolean_cube() {
        // levels use 1, 2 and 3 points of a 6-point Boolean cube
        let c = FiniteClass::full(6, 2);
        let (d, t) = max_dsl_depth(&c, None);
        assert_eq!(d, 3);
        assert!(ok(AnyTree::Dsl(t), &c));
        let (d, t) = max_dsl_depth(&c, Some(2));
        assert_eq!((d, t.depth), (2, 2));
        assert!(ok(AnyTree::Dsl(t), &c));
    }

    #[test]
    fn nl_violation_and_conversion_examples() {
        let c = FiniteClass::full(1, 2);
        let t = NlTree {
            depth: 1,
            nodes: vec![NlNode { points: vec![0], s0: vec![0], s1: vec![1], children: vec![None, None] }],
        };
        assert!(ok(AnyTree::Nl(t.clone()), &c));
        let d = nl_to_dsl(&t, &c).unwrap();
        assert_eq!(d.nodes[0].cube, vec![vec![0], vec![1]]);
        assert!(ok(AnyTree::Dsl(d), &c));

        let c2 = FiniteClass::full(2, 3);
        let bad = NlTree {
            depth: 2,
            nodes: vec![
                NlNode { points: vec![0], s0: vec![0], s1: vec![1], children: vec![Some(1), Some(2)] },
                NlNode { points: vec![0, 1], s0: vec![0, 0], s1: vec![2, 0], children: vec![None; 4] },
                NlNode { points: vec![0, 1], s0: vec![1, 0], s1: vec![2, 1], children: vec![None; 4] },
            ],
        };
        let v = verify_tree(&AnyTree::Nl(bad.clone()), &c2).unwrap();
        assert!(!v.ok);
        assert!(v.violation.unwrap().contains("agree in coordinate 1"));
        assert!(matches!(nl_to_dsl(&bad, &c2), Err(crate::Error::Usage(_))));

        let empty = NlTree { depth: 0, nodes: vec![] };
        assert_eq!(nl_to_dsl(&empty, &c).unwrap().depth, 0);
        assert_eq!(nl_to_gl(&empty).depth, 0);
    }

    #[test]
    fn arity_mismatch_is_usage_error() {
        let c = FiniteClass::full(1, 2);
        let t = DslTree {
            depth: 1,
            nodes: vec![DslNode { points: vec![0], cube: vec![vec![0], vec![1]], children: vec![None] }],
        };
        assert!(matches!(verify_tree(&AnyTree::Dsl(t), &c), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn dsl_to_gl_uses_first_edge_as_reference() {
        let c = FiniteClass::new(2, 3, vec![vec![0, 0], vec![1, 1], vec![2, 2], vec![0, 1], vec![1, 2], vec![2, 0]])
            .unwrap();
        let t = DslTree {
            depth: 1,
            nodes: vec![DslNode { points: vec![0], cube: vec![vec![0], vec![1], vec![2]], children: vec![None; 3] }],
        };
        let g = dsl_to_gl(&t, &c).unwrap();
        assert_eq!(g.nodes[0].s, vec![0]);
        assert!(ok(AnyTree::Gl(g), &c));
    }

    #[test]
    fn tree_json_has_node_and_edge_arrays() {
        let c = FiniteClass::full(2, 2);
        let (_, t) = max_dsl_depth(&c, None);
        let v = AnyTree::Dsl(t).to_json();
        assert_eq!(v["kind"], "dsl");
        assert_eq!(v["nodes"].as_array().unwrap().len(), 1);
        assert_eq!(v["edges"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn depth_chain_and_round_trips() {
        for seed in 0..120 {
            let c = rand_class(seed);
            let (nl, nt) = max_nl_depth(&c, Some(3));
            let (dsl, dt) = max_dsl_depth(&c, Some(3));
            let (gl, gt) = max_gl_depth(&c, Some(3));
            assert!(nl <= dsl && dsl <= gl, "seed {seed}: {nl} {dsl} {gl}");
            assert!(ok(AnyTree::Nl(nt.clone()), &c));
            assert!(ok(AnyTree::Dsl(dt.clone()), &c));
            assert!(ok(AnyTree::Gl(gt), &c));
            let conv = nl_to_dsl(&nt, &c).unwrap();
            assert_eq!(conv.depth, nl);
            assert!(ok(AnyTree::Dsl(conv), &c));
            let g1 = dsl_to_gl(&dt, &c).unwrap();
            assert!(ok(AnyTree::Gl(g1), &c));
            assert!(ok(AnyTree::Gl(nl_to_gl(&nt)), &c));
            assert!(dsl <= log2_floor(c.len()));
            assert_eq!(dsl, dsl_brute_depth(&c).min(3), "seed {seed}");
            let (l, lt) = max_littlestone_depth(&c, None);
            assert_eq!(l, littlestone_dim(&c));
            assert!(ok(AnyTree::Littlestone(lt), &c));
        }
    }

    #[test]
    fn dsl_levels_have_matching_ds_dim() {
        // each node's version space has a cube on as many points as its tuple
        let c = FiniteClass::full(5, 2);
        let (_, t) = max_dsl_depth(&c, None);
        fn walk(t: &DslTree, c: &FiniteClass, i: usize, v: Vec<u32>) {
            let nd = &t.nodes[i];
            let sub = c.subclass(&v.iter().map(|&h| h as usize).collect::<Vec<_>>()).unwrap();
            assert!(ds_dim(&sub) >= nd.points.len());
            for (y, ch) in nd.cube.iter().zip(&nd.children) {
                if let Some(j) = ch {
                    walk(t, c, *j, filter_eq(c, &v, &nd.points, y));
                }
            }
        }
        walk(&t, &c, 0, all_members(&c));
    }

    proptest! {
        #[test]
        fn built_witnesses_verify(seed in 0u64..100_000) {
            let c = rand_class(seed);
            let (_, nt) = max_nl_depth(&c, Some(2));
            let (_, dt) = max_dsl_depth(&c, Some(2));
            prop_assert!(ok(AnyTree::Dsl(nl_to_dsl(&nt, &c).unwrap()), &c));
            prop_assert!(ok(AnyTree::Gl(dsl_to_gl(&dt, &c).unwrap()), &c));
        }
    }
}
