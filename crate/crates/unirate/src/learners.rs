//! Batch learners: online-to-batch on the Littlestone game, the lattice
//! learner for the monotone linear classes, and the pattern-avoidance
//! majority-vote template with its leave-one-out reduction.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::class::{gather, FiniteClass, Label, LabeledSample, Pattern, RealizableDistribution};
use crate::error::{usage, Error, Result};
use crate::games::{avoidance_query, avoidance_step, AvoidanceState, BGame, DslGame, OnlineLearner};

/// A total prediction rule on the class domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rule {
    pub table: Vec<Label>,
}

impl Rule {
    pub fn predict(&self, x: usize) -> Label {
        self.table[x]
    }

    pub fn constant(n: usize, y: Label) -> Rule {
        Rule { table: vec![y; n] }
    }
}

/// A learner usable as the sub-learner A of the template.
pub trait UniformLearner {
    fn name(&self) -> &str;
    fn learn(&self, class: &FiniteClass, sample: &[(usize, Label)]) -> Rule;
}

/// Canonical-first ERM: the first hypothesis consistent with the sample,
/// or the first one with fewest disagreements when none is.
#[derive(Debug, Clone, Copy, Default)]
pub struct Erm;

impl UniformLearner for Erm {
    fn name(&self) -> &str {
        "erm"
    }

    fn learn(&self, class: &FiniteClass, sample: &[(usize, Label)]) -> Rule {
        let mut best: Option<(usize, usize)> = None;
        for (i, h) in class.iter().enumerate() {
            let bad = sample.iter().filter(|&&(x, y)| h[x] != y).count();
            if bad == 0 {
                return Rule { table: h.to_vec() };
            }
            if best.map_or(true, |b| bad < b.1) {
                best = Some((i, bad));
            }
        }
        let i = best.map_or(0, |b| b.0);
        Rule { table: class.hyp(i).to_vec() }
    }
}

/// Ignores the data. Breaks the consistency interface on purpose.
#[derive(Debug, Clone, Copy)]
pub struct ConstantLearner(pub Label);

impl UniformLearner for ConstantLearner {
    fn name(&self) -> &str {
        "constant"
    }

    fn learn(&self, class: &FiniteClass, _sample: &[(usize, Label)]) -> Rule {
        Rule::constant(class.domain_size(), self.0)
    }
}

// ---------------------------------------------------------------- exp rate

/// Online-to-batch: the final table of the mistake-driven learner.
pub fn exp_rate_learner(class: &FiniteClass, sample: &LabeledSample) -> Result<Rule> {
    exp_rate_learner_with(&BGame::new(class), sample)
}

/// Same, sharing the game memo across calls.
pub fn exp_rate_learner_with(game: &BGame, sample: &LabeledSample) -> Result<Rule> {
    let class = game.class();
    if let Some(t) = crate::games::first_inconsistent_prefix(class, sample) {
        return Err(Error::Domain(format!("sample prefix of length {t} is inconsistent with the class")));
    }
    let mut l = OnlineLearner::from_game(game.clone());
    for &(x, y) in &sample.pairs {
        l.observe(x, y);
    }
    Ok(Rule { table: l.table().to_vec() })
}

// ------------------------------------------------------- lattice learner

pub type LatticePoint = Vec<u64>;

fn big(v: u64) -> BigRational {
    BigRational::from_integer(v.into())
}

/// Is there a convex combination of `points` lying coordinatewise below `x`?
/// Exact phase-one simplex with Bland's rule.
pub fn dominates_hull(points: &[LatticePoint], x: &[u64]) -> bool {
    if points.is_empty() {
        return false;
    }
    let d = x.len();
    if points.iter().any(|p| p.iter().zip(x).all(|(a, b)| a <= b)) {
        return true;
    }
    // every combination is at least the coordinatewise minimum
    for j in 0..d {
        if points.iter().map(|p| p[j]).min().unwrap() > x[j] {
            return false;
        }
    }
    let m = points.len();
    // columns: alpha (m), slack (d), artificial (1); rows: d inequalities + sum row
    let cols = m + d + 1;
    let rows = d + 1;
    let mut t: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); cols + 1]; rows];
    for j in 0..d {
        for (i, p) in points.iter().enumerate() {
            t[j][i] = big(p[j]);
        }
        t[j][m + j] = BigRational::one();
        t[j][cols] = big(x[j]);
    }
    for i in 0..m {
        t[d][i] = BigRational::one();
    }
    t[d][m + d] = BigRational::one();
    t[d][cols] = BigRational::one();
    let mut basis: Vec<usize> = (0..d).map(|j| m + j).chain(std::iter::once(m + d)).collect();
    // reduced costs of "minimize artificial"
    let mut obj: Vec<BigRational> = (0..=cols).map(|c| -t[d][c].clone()).collect();
    obj[m + d] = BigRational::zero();
    loop {
        let Some(enter) = (0..cols).find(|&c| obj[c].is_negative()) else { break };
        let mut leave: Option<(usize, BigRational)> = None;
        for r in 0..rows {
            if t[r][enter].is_positive() {
                let ratio = &t[r][cols] / &t[r][enter];
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else { break };
        let piv = t[r][enter].clone();
        for c in 0..=cols {
            t[r][c] = &t[r][c] / &piv;
        }
        for rr in 0..rows {
            if rr != r && !t[rr][enter].is_zero() {
                let f = t[rr][enter].clone();
                for c in 0..=cols {
                    let v = &f * &t[r][c];
                    t[rr][c] -= v;
                }
            }
        }
        let f = obj[enter].clone();
        for c in 0..=cols {
            let v = &f * &t[r][c];
            obj[c] -= v;
        }
        basis[r] = enter;
    }
    match basis.iter().position(|&b| b == m + d) {
        Some(r) => t[r][cols].is_zero(),
        None => true,
    }
}

/// Sample points grouped by label (labels are 1..=K).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Example1Predictor {
    pub hulls: Vec<Vec<LatticePoint>>,
}

impl Example1Predictor {
    pub fn from_sample(sample: &[(LatticePoint, u32)]) -> Self {
        let mut p = Example1Predictor::default();
        for (x, y) in sample {
            p.add(x.clone(), *y);
        }
        p
    }

    pub fn add(&mut self, x: LatticePoint, y: u32) {
        let k = y as usize;
        if self.hulls.len() < k {
            self.hulls.resize(k, Vec::new());
        }
        self.hulls[k - 1].push(x);
    }

    /// Labels k whose class-k hull is dominated by `x`.
    pub fn y_set(&self, x: &[u64]) -> Vec<u32> {
        (0..self.hulls.len())
            .filter(|&k| dominates_hull(&self.hulls[k], x))
            .map(|k| k as u32 + 1)
            .collect()
    }

    /// min Y, or 1 when Y is empty.
    pub fn predict(&self, x: &[u64]) -> u32 {
        self.y_set(x).first().copied().unwrap_or(1)
    }
}

pub fn example1_predict(sample: &[(LatticePoint, u32)], query: &[u64]) -> u32 {
    Example1Predictor::from_sample(sample).predict(query)
}

#[derive(Debug, Clone, Serialize)]
pub struct Example1Round {
    pub t: usize,
    pub x: LatticePoint,
    pub y: u32,
    pub prediction: u32,
    pub mistake: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Example1Transcript {
    pub rounds: Vec<Example1Round>,
    pub mistakes: usize,
    /// Correct rounds after which some earlier stream point changed its
    /// prediction (only filled in debug builds).
    pub unfrozen: Vec<usize>,
}

fn leq(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(p, q)| p <= q)
}

pub fn example1_online(stream: &[(LatticePoint, u32)]) -> Result<Example1Transcript> {
    let d = stream.first().map_or(0, |s| s.0.len());
    let mut p = Example1Predictor::default();
    let mut rounds = Vec::with_capacity(stream.len());
    let mut unfrozen = Vec::new();
    for (t, (x, y)) in stream.iter().enumerate() {
        if x.len() != d {
            return usage(format!("round {}: point has dimension {}, expected {d}", t + 1, x.len()));
        }
        if *y == 0 {
            return usage(format!("round {}: labels start at 1", t + 1));
        }
        // monotone in x: a necessary condition for the linear class
        for (u, v) in &stream[..t] {
            if (leq(u, x) && v > y) || (leq(x, u) && y > v) {
                return Err(Error::Domain(format!(
                    "round {}: ({x:?}, {y}) and ({u:?}, {v}) violate label monotonicity",
                    t + 1
                )));
            }
        }
        let prediction = p.predict(x);
        let mistake = prediction != *y;
        let before: Vec<u32> = if cfg!(debug_assertions) && !mistake {
            stream[..t].iter().map(|(u, _)| p.predict(u)).collect()
        } else {
            Vec::new()
        };
        p.add(x.clone(), *y);
        if !before.is_empty() && stream[..t].iter().zip(&before).any(|((u, _), &b)| p.predict(u) != b) {
            unfrozen.push(t + 1);
        }
        rounds.push(Example1Round { t: t + 1, x: x.clone(), y: *y, prediction, mistake });
    }
    let mistakes = rounds.iter().filter(|r| r.mistake).count();
    Ok(Example1Transcript { rounds, mistakes, unfrozen })
}

/// Parses point names of the form "a,b,..." into lattice coordinates.
pub fn lattice_coords(class: &FiniteClass) -> Result<Vec<LatticePoint>> {
    (0..class.domain_size())
        .map(|x| {
            let name = class.point_name(x);
            name.trim_matches(|c| c == '(' || c == ')')
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<u64>, _>>()
                .map_err(|_| Error::Usage(format!("point name {name:?} is not a lattice point")))
        })
        .collect()
}

/// The lattice learner on a finite class whose points carry coordinates;
/// class label y is lattice label y + 1.
#[derive(Debug, Clone)]
pub struct Example1Learner {
    pub coords: Vec<LatticePoint>,
}

impl Example1Learner {
    pub fn for_class(class: &FiniteClass) -> Result<Self> {
        Ok(Example1Learner { coords: lattice_coords(class)? })
    }
}

impl UniformLearner for Example1Learner {
    fn name(&self) -> &str {
        "example1"
    }

    fn learn(&self, class: &FiniteClass, sample: &[(usize, Label)]) -> Rule {
        let mut p = Example1Predictor::default();
        for &(x, y) in sample {
            p.add(self.coords[x].clone(), y + 1);
        }
        let k = class.labels();
        let table = self.coords.iter().map(|c| (p.predict(c) - 1).min(k - 1)).collect();
        Rule { table }
    }
}

// ------------------------------------------------------ pattern avoidance

/// A map from k-tuples of points to avoided label tuples.
pub trait Avoider {
    fn arity(&self) -> usize;
    fn avoided(&self, points: &[usize]) -> Result<Rc<Vec<Pattern>>>;

    fn avoids(&self, points: &[usize], labels: &[Label]) -> Result<bool> {
        Ok(self.avoided(points)?.binary_search_by(|p| p.as_slice().cmp(labels)).is_ok())
    }
}

/// Ŷ_t of a fixed avoidance state, cached per tuple.
pub struct StateAvoider<'g, 'a> {
    game: &'g DslGame<'a>,
    state: AvoidanceState,
    cache: RefCell<HashMap<Vec<usize>, Rc<Vec<Pattern>>>>,
}

impl<'g, 'a> StateAvoider<'g, 'a> {
    pub fn new(game: &'g DslGame<'a>, state: AvoidanceState) -> Self {
        StateAvoider { game, state, cache: RefCell::new(HashMap::new()) }
    }

    pub fn state(&self) -> &AvoidanceState {
        &self.state
    }
}

impl Avoider for StateAvoider<'_, '_> {
    fn arity(&self) -> usize {
        self.state.tau
    }

    fn avoided(&self, points: &[usize]) -> Result<Rc<Vec<Pattern>>> {
        if let Some(v) = self.cache.borrow().get(points) {
            return Ok(v.clone());
        }
        let mut v = avoidance_query(self.game, &self.state, points)?;
        v.sort();
        let v = Rc::new(v);
        self.cache.borrow_mut().insert(points.to_vec(), v.clone());
        Ok(v)
    }
}

/// A constant avoider: the same label set on every tuple.
pub struct ConstAvoider {
    pub k: usize,
    pub patterns: Rc<Vec<Pattern>>,
}

impl ConstAvoider {
    pub fn nothing(k: usize) -> Self {
        ConstAvoider { k, patterns: Rc::new(Vec::new()) }
    }

    pub fn everything(k: usize, labels: u32) -> Self {
        let all = (0..k).map(|_| 0..labels).multi_cartesian_product().collect();
        ConstAvoider { k, patterns: Rc::new(all) }
    }
}

impl Avoider for ConstAvoider {
    fn arity(&self) -> usize {
        self.k
    }

    fn avoided(&self, _points: &[usize]) -> Result<Rc<Vec<Pattern>>> {
        Ok(self.patterns.clone())
    }
}

/// H(S, g): patterns of H|_S (over indices 0..|S|) avoiding g on every
/// tuple of distinct indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternAvoidingClass {
    pub points: Vec<usize>,
    pub arity: usize,
    pub labels: u32,
    pub patterns: Vec<Pattern>,
}

impl PatternAvoidingClass {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// As a class on the index domain; None when empty.
    pub fn to_class(&self) -> Option<FiniteClass> {
        FiniteClass::new(self.points.len(), self.labels, self.patterns.clone()).ok()
    }
}

pub fn build_avoiding_class(class: &FiniteClass, s: &[usize], g: &dyn Avoider) -> Result<PatternAvoidingClass> {
    let k = g.arity();
    if k > s.len() {
        return usage(format!("avoider arity {k} exceeds |S| = {}", s.len()));
    }
    let mut seen = std::collections::HashSet::new();
    let mut rows: Vec<Pattern> = Vec::new();
    for h in class.iter() {
        let row = gather(h, s);
        if seen.insert(row.clone()) {
            rows.push(row);
        }
    }
    let mut keep = vec![true; rows.len()];
    for idx in (0..s.len()).permutations(k) {
        let pts: Vec<usize> = idx.iter().map(|&i| s[i]).collect();
        let bad = g.avoided(&pts)?;
        if bad.is_empty() {
            continue;
        }
        for (r, row) in rows.iter().enumerate() {
            if keep[r] && bad.binary_search(&gather(row, &idx)).is_ok() {
                keep[r] = false;
            }
        }
    }
    let patterns = rows.into_iter().zip(keep).filter(|p| p.1).map(|p| p.0).collect();
    Ok(PatternAvoidingClass { points: s.to_vec(), arity: k, labels: class.labels(), patterns })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerRate {
    pub value: f64,
    #[serde(skip)]
    pub exact: Option<BigRational>,
}

/// per(g): mass of i.i.d. k-tuples whose labels g avoids, summed exactly
/// over the support.
pub fn per_rate(g: &dyn Avoider, dist: &RealizableDistribution, k: usize) -> Result<PerRate> {
    if k != g.arity() {
        return usage(format!("arity {k} does not match the avoider's {}", g.arity()));
    }
    let n = dist.atoms.len();
    let mut value = 0.0;
    let mut exact = dist.exact.as_ref().map(|_| BigRational::zero());
    for idx in (0..k).map(|_| 0..n).multi_cartesian_product() {
        let pts: Vec<usize> = idx.iter().map(|&i| dist.atoms[i].point).collect();
        let ys: Vec<Label> = idx.iter().map(|&i| dist.atoms[i].label).collect();
        if !g.avoids(&pts, &ys)? {
            continue;
        }
        value += idx.iter().map(|&i| dist.atoms[i].weight).product::<f64>();
        if let (Some(e), Some(w)) = (exact.as_mut(), dist.exact.as_ref()) {
            let mut p = BigRational::one();
            for &i in &idx {
                p *= &w[i];
            }
            *e += p;
        }
    }
    Ok(PerRate { value, exact })
}

/// Whether per(g) > 0, stopping at the first avoided support tuple.
pub fn per_positive(g: &dyn Avoider, dist: &RealizableDistribution) -> Result<bool> {
    let sup: Vec<_> = dist.atoms.iter().filter(|a| a.weight > 0.0).collect();
    for idx in (0..g.arity()).map(|_| 0..sup.len()).multi_cartesian_product() {
        let pts: Vec<usize> = idx.iter().map(|&i| sup[i].point).collect();
        let ys: Vec<Label> = idx.iter().map(|&i| sup[i].label).collect();
        if g.avoids(&pts, &ys)? {
            return Ok(true);
        }
    }
    Ok(false)
}

// ---------------------------------------------------- partial samples

/// Applies A to `train` and reads off the prediction at `test`. Rejects A
/// when it is inconsistent on a realizable training sample.
pub fn partial_sample_learn(
    a: &dyn UniformLearner,
    class: &FiniteClass,
    train: &[(usize, Label)],
    test: usize,
) -> Result<Label> {
    if test >= class.domain_size() {
        return usage(format!("test index {test} out of range"));
    }
    let rule = a.learn(class, train);
    if !class.consistent_members(train).is_empty() && train.iter().any(|&(x, y)| rule.predict(x) != y) {
        return usage(format!("learner {} is not consistent on a realizable sample", a.name()));
    }
    Ok(rule.predict(test))
}

/// Monte Carlo estimates of both sides of the leave-one-out inequality.
#[derive(Debug, Clone, Serialize)]
pub struct PartialSampleEstimate {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub reps: usize,
}

fn mean_se(hits: usize, reps: usize) -> (f64, f64) {
    let p = hits as f64 / reps as f64;
    let var = if reps > 1 { p * (1.0 - p) * reps as f64 / (reps - 1) as f64 } else { 0.0 };
    (p, (var / reps as f64).sqrt())
}

/// `labels` has n+1 entries; the class lives on indices 0..=n. LHS trains on
/// ⌈n/2⌉ uniform draws from the first n indices and tests index n; RHS
/// trains on draws from all n+1 and tests a fresh uniform index.
///
/// With `exchangeable`, every rep first relabels the indices by a uniform
/// random permutation (columns of the class and the labels move together).
/// The inequality can fail for a fixed index order; it holds on average
/// over the order for learners that commute with relabeling, such as `Erm`.
pub fn partial_sample_sides(
    a: &dyn UniformLearner,
    class: &FiniteClass,
    labels: &[Label],
    reps: usize,
    seed: u64,
    exchangeable: bool,
) -> Result<PartialSampleEstimate> {
    let n1 = labels.len();
    if n1 < 2 || class.domain_size() != n1 {
        return usage("need a class on n+1 >= 2 indices and one label per index");
    }
    if reps == 0 {
        return usage("reps must be positive");
    }
    let n = n1 - 1;
    let m = n.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lhs = 0;
    let mut rhs = 0;
    let mut perm: Vec<usize> = (0..n1).collect();
    let mut shuffled: Option<(FiniteClass, Vec<Label>)> = None;
    for _ in 0..reps {
        if exchangeable {
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
            let rows: Vec<Pattern> = class.iter().map(|h| gather(h, &perm)).collect();
            let c = FiniteClass::new(n1, class.labels(), rows)?;
            shuffled = Some((c, gather(labels, &perm)));
        }
        let (c, y) = match &shuffled {
            Some((c, y)) => (c, y.as_slice()),
            None => (class, labels),
        };
        let t: Vec<(usize, Label)> = (0..m).map(|_| rng.gen_range(0..n)).map(|i| (i, y[i])).collect();
        if partial_sample_learn(a, c, &t, n)? != y[n] {
            lhs += 1;
        }
        let t2: Vec<(usize, Label)> = (0..m).map(|_| rng.gen_range(0..n1)).map(|i| (i, y[i])).collect();
        let i = rng.gen_range(0..n1);
        if partial_sample_learn(a, c, &t2, i)? != y[i] {
            rhs += 1;
        }
    }
    let (lhs, lhs_se) = mean_se(lhs, reps);
    let (rhs, rhs_se) = mean_se(rhs, reps);
    Ok(PartialSampleEstimate { lhs, lhs_se, rhs, rhs_se, reps })
}

// ------------------------------------------------ near-linear template

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    /// ê_t from the second quarter of the sample.
    Empirical,
    /// e_t via exact per(ŷ) = 0 tests; needs the distribution.
    Exact,
}

#[derive(Debug, Clone, Copy)]
pub struct NearLinearOptions {
    /// Below max(n_guard, 8) the exponential-rate learner is used instead.
    pub n_guard: usize,
    pub estimate: Estimate,
    pub seed: u64,
}

impl Default for NearLinearOptions {
    fn default() -> Self {
        NearLinearOptions { n_guard: 32, estimate: Estimate::Exact, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NearLinearReport {
    pub rule: Rule,
    pub t_hat: Option<usize>,
    pub voters: usize,
    pub e_hat: Vec<f64>,
    pub fallback: Option<String>,
}

type StateKey = (usize, Vec<u32>);

/// Reusable caches for one (class, game); not shared across threads.
pub struct NearLinear<'g, 'a> {
    game: &'g DslGame<'a>,
    bgame: BGame<'a>,
    avoiders: RefCell<HashMap<StateKey, Rc<StateAvoider<'g, 'a>>>>,
    positive: RefCell<HashMap<StateKey, bool>>,
    // H^i(x) on the sorted point set, keyed by state and point set
    classes: RefCell<HashMap<(StateKey, Vec<usize>), Rc<Option<FiniteClass>>>>,
}

impl<'g, 'a> NearLinear<'g, 'a> {
    pub fn new(game: &'g DslGame<'a>) -> Self {
        NearLinear {
            game,
            bgame: BGame::new(game.class()),
            avoiders: RefCell::new(HashMap::new()),
            positive: RefCell::new(HashMap::new()),
            classes: RefCell::new(HashMap::new()),
        }
    }

    fn avoider(&self, state: &AvoidanceState) -> Rc<StateAvoider<'g, 'a>> {
        let key = state.key();
        if let Some(a) = self.avoiders.borrow().get(&key) {
            return a.clone();
        }
        let a = Rc::new(StateAvoider::new(self.game, state.clone()));
        self.avoiders.borrow_mut().insert(key, a.clone());
        a
    }

    fn run_block(&self, pairs: &[(usize, Label)]) -> Result<AvoidanceState> {
        let mut s = AvoidanceState::new(self.game.class());
        for &(x, y) in pairs {
            s = avoidance_step(self.game, &s, x, y)?;
        }
        Ok(s)
    }

    fn per_positive(&self, state: &AvoidanceState, dist: &RealizableDistribution) -> Result<bool> {
        let key = state.key();
        if let Some(&b) = self.positive.borrow().get(&key) {
            return Ok(b);
        }
        let b = per_positive(&*self.avoider(state), dist)?;
        self.positive.borrow_mut().insert(key, b);
        Ok(b)
    }

    /// H(pts, ŷ) over distinct sorted points; repeated indices in the index
    /// class carry equal labels, and Ŷ is empty on tuples with a repeated
    /// point, so the index class is a pullback of this one.
    fn avoiding_on(&self, state: &AvoidanceState, pts: &[usize]) -> Result<Rc<Option<FiniteClass>>> {
        let key = (state.key(), pts.to_vec());
        if let Some(c) = self.classes.borrow().get(&key) {
            return Ok(c.clone());
        }
        let g = self.avoider(state);
        let c = if g.arity() > pts.len() {
            let rows: Vec<Pattern> = self.game.class().iter().map(|h| gather(h, pts)).collect();
            FiniteClass::new(pts.len(), self.game.class().labels(), rows).ok()
        } else {
            build_avoiding_class(self.game.class(), pts, &*g)?.to_class()
        };
        let c = Rc::new(c);
        self.classes.borrow_mut().insert(key, c.clone());
        Ok(c)
    }

    pub fn learn(
        &self,
        sample: &LabeledSample,
        a: &dyn UniformLearner,
        opts: NearLinearOptions,
        dist: Option<&RealizableDistribution>,
    ) -> Result<NearLinearReport> {
        let class = self.game.class();
        let n = sample.len();
        if n < opts.n_guard.max(8) {
            let rule = exp_rate_learner_with(&self.bgame, sample)?;
            let why = format!("n = {n} below the guard {}; used the exponential-rate learner", opts.n_guard.max(8));
            return Ok(NearLinearReport { rule, t_hat: None, voters: 0, e_hat: Vec::new(), fallback: Some(why) });
        }
        if let Some(t) = crate::games::first_inconsistent_prefix(class, sample) {
            return Err(Error::Domain(format!("sample prefix of length {t} is inconsistent with the class")));
        }
        let z = &sample.pairs;
        let q = n / 4;
        let half = n / 2;
        let t_max = q - 1;
        let mut e_hat = Vec::new();
        let mut chosen: Option<(usize, Vec<AvoidanceState>)> = None;
        for t in 1..=t_max {
            let blocks = n / (4 * t);
            let states: Vec<AvoidanceState> =
                (0..blocks).map(|i| self.run_block(&z[i * t..(i + 1) * t])).collect::<Result<_>>()?;
            let mut hits = 0usize;
            for s in &states {
                let hit = match (opts.estimate, dist) {
                    (Estimate::Exact, Some(d)) => self.per_positive(s, d)?,
                    (Estimate::Exact, None) => {
                        return usage("exact e_t needs the distribution");
                    }
                    (Estimate::Empirical, _) => {
                        let g = self.avoider(s);
                        let tau = s.tau;
                        let mut hit = false;
                        let mut w = q;
                        while !hit && w + tau <= half {
                            let pts: Vec<usize> = z[w..w + tau].iter().map(|p| p.0).collect();
                            let ys: Vec<Label> = z[w..w + tau].iter().map(|p| p.1).collect();
                            hit = g.avoids(&pts, &ys)?;
                            w += 1;
                        }
                        hit
                    }
                };
                hits += hit as usize;
            }
            let e = hits as f64 / blocks as f64;
            e_hat.push(e);
            if e < 0.25 || t == t_max {
                chosen = Some((t, states));
                break;
            }
        }
        let (t_hat, states) = chosen.expect("t_max >= 1 when n >= 8");

        // second half, re-indexed from 0
        let second = &z[half..];
        let m = (n - half).div_ceil(2);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let subsamples: Vec<Vec<(usize, Label)>> = states
            .iter()
            .map(|_| (0..m).map(|_| second[rng.gen_range(0..second.len())]).collect())
            .collect();
        let mut base: Vec<usize> = second.iter().map(|p| p.0).collect();
        base.sort_unstable();
        base.dedup();

        let k = class.labels() as usize;
        let mut table = Vec::with_capacity(class.domain_size());
        for x in 0..class.domain_size() {
            let mut pts = base.clone();
            if let Err(pos) = pts.binary_search(&x) {
                pts.insert(pos, x);
            }
            let at = pts.binary_search(&x).unwrap();
            let mut votes = vec![0usize; k];
            for (s, t) in states.iter().zip(&subsamples) {
                let y = match &*self.avoiding_on(s, &pts)? {
                    Some(h) => {
                        let local: Vec<(usize, Label)> =
                            t.iter().map(|&(p, y)| (pts.binary_search(&p).unwrap(), y)).collect();
                        a.learn(h, &local).predict(at)
                    }
                    None => 0,
                };
                votes[y as usize] += 1;
            }
            let best = votes.iter().copied().max().unwrap();
            table.push(votes.iter().position(|&v| v == best).unwrap() as Label);
        }
        Ok(NearLinearReport {
            rule: Rule { table },
            t_hat: Some(t_hat),
            voters: states.len(),
            e_hat,
            fallback: None,
        })
    }
}

pub fn near_linear_learner(
    class: &FiniteClass,
    sample: &LabeledSample,
    a: &dyn UniformLearner,
    opts: NearLinearOptions,
    dist: Option<&RealizableDistribution>,
) -> Result<NearLinearReport> {
    let game = DslGame::new(class);
    NearLinear::new(&game).learn(sample, a, opts, dist)
}
