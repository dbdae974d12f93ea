//! Finite hypothesis classes, projections, version spaces, samples and
//! finite-support distributions.

use std::collections::HashSet;
use std::io::{Read, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

pub type Label = u32;
pub type Pattern = Vec<Label>;

/// Dense table of hypotheses over points `0..domain_size` and labels `0..labels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteClass {
    n: usize,
    k: u32,
    data: Vec<Label>,
    point_names: Option<Vec<String>>,
    label_names: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct ClassFile {
    domain_size: usize,
    labels: u32,
    hypotheses: Vec<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_names: Option<Vec<String>>,
}

impl FiniteClass {
    /// Builds a class, dropping repeated hypotheses (first occurrence wins).
    pub fn new(domain_size: usize, labels: u32, hypotheses: Vec<Pattern>) -> Result<Self> {
        if hypotheses.is_empty() {
            return usage("hypothesis list is empty");
        }
        let mut seen = HashSet::with_capacity(hypotheses.len());
        let mut data = Vec::with_capacity(hypotheses.len() * domain_size);
        for (i, h) in hypotheses.into_iter().enumerate() {
            if h.len() != domain_size {
                return usage(format!(
                    "hypothesis {i} has length {}, expected {domain_size}",
                    h.len()
                ));
            }
            if let Some(&l) = h.iter().find(|&&l| l >= labels) {
                return usage(format!("hypothesis {i} uses label {l} >= K={labels}"));
            }
            if seen.insert(h.clone()) {
                data.extend_from_slice(&h);
            }
        }
        Ok(FiniteClass { n: domain_size, k: labels, data, point_names: None, label_names: None })
    }

    /// All of `{0..k}^n` in lexicographic order.
    pub fn full(n: usize, k: u32) -> Self {
        let total = (k as usize).pow(n as u32);
        let mut data = Vec::with_capacity(total * n);
        let mut cur = vec![0u32; n];
        for _ in 0..total {
            data.extend_from_slice(&cur);
            for j in (0..n).rev() {
                cur[j] += 1;
                if cur[j] < k {
                    break;
                }
                cur[j] = 0;
            }
        }
        FiniteClass { n, k, data, point_names: None, label_names: None }
    }

    pub fn with_names(
        mut self,
        point_names: Option<Vec<String>>,
        label_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(p) = &point_names {
            if p.len() != self.n {
                return usage("point_names length differs from domain_size");
            }
        }
        if let Some(l) = &label_names {
            if l.len() != self.k as usize {
                return usage("label_names length differs from labels");
            }
        }
        self.point_names = point_names;
        self.label_names = label_names;
        Ok(self)
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        if self.n == 0 {
            1
        } else {
            self.data.len() / self.n
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hyp(&self, i: usize) -> &[Label] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Label]> + '_ {
        (0..self.len()).map(move |i| self.hyp(i))
    }

    pub fn hypotheses(&self) -> Vec<Pattern> {
        self.iter().map(|h| h.to_vec()).collect()
    }

    pub fn point_name(&self, x: usize) -> String {
        match &self.point_names {
            Some(v) => v[x].clone(),
            None => x.to_string(),
        }
    }

    pub fn label_name(&self, y: Label) -> String {
        match &self.label_names {
            Some(v) => v[y as usize].clone(),
            None => y.to_string(),
        }
    }

    /// Index of the given hypothesis, if present.
    pub fn position(&self, h: &[Label]) -> Option<usize> {
        self.iter().position(|g| g == h)
    }

    fn check_point(&self, x: usize) -> Result<()> {
        if x >= self.n {
            return usage(format!("point {x} out of range (domain_size {})", self.n));
        }
        Ok(())
    }

    fn check_pairs(&self, pairs: &[(usize, Label)]) -> Result<()> {
        for &(x, y) in pairs {
            self.check_point(x)?;
            if y >= self.k {
                return usage(format!("label {y} out of range (K={})", self.k));
            }
        }
        Ok(())
    }

    /// Indices of hypotheses consistent with all pairs.
    pub fn consistent_members(&self, pairs: &[(usize, Label)]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let h = self.hyp(i);
                pairs.iter().all(|&(x, y)| h[x] == y)
            })
            .collect()
    }

    pub fn restrict(&self, constraints: &[(usize, Label)]) -> Result<VersionSpace<'_>> {
        self.check_pairs(constraints)?;
        let members = self.consistent_members(constraints);
        Ok(VersionSpace { base: self, constraints: constraints.to_vec(), members })
    }

    pub fn project(&self, points: &[usize]) -> Result<Projection> {
        for &x in points {
            self.check_point(x)?;
        }
        Ok(Projection::from_rows(points.to_vec(), self.iter().map(|h| gather(h, points))))
    }

    /// Projection of the sub-collection `members`.
    pub fn project_members(&self, members: &[usize], points: &[usize]) -> Projection {
        Projection::from_rows(points.to_vec(), members.iter().map(|&i| gather(self.hyp(i), points)))
    }

    pub fn is_consistent(&self, sample: &LabeledSample) -> bool {
        sample.pairs.iter().all(|&(x, y)| x < self.n && y < self.k)
            && self.iter().any(|h| sample.pairs.iter().all(|&(x, y)| h[x] == y))
    }

    /// Some pair of hypotheses agrees somewhere and disagrees somewhere.
    pub fn is_nondegenerate(&self) -> bool {
        let m = self.len();
        for a in 0..m {
            let ha = self.hyp(a);
            for b in a + 1..m {
                let hb = self.hyp(b);
                let agree = ha.iter().zip(hb).any(|(u, v)| u == v);
                let differ = ha.iter().zip(hb).any(|(u, v)| u != v);
                if agree && differ {
                    return true;
                }
            }
        }
        false
    }

    /// New class made of the listed members (in that order).
    pub fn subclass(&self, members: &[usize]) -> Result<FiniteClass> {
        let hyps = members.iter().map(|&i| self.hyp(i).to_vec()).collect();
        FiniteClass::new(self.n, self.k, hyps)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: ClassFile = serde_json::from_str(s)?;
        FiniteClass::new(f.domain_size, f.labels, f.hypotheses)?
            .with_names(f.point_names, f.label_names)
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let f: ClassFile = serde_json::from_reader(r)?;
        FiniteClass::new(f.domain_size, f.labels, f.hypotheses)?
            .with_names(f.point_names, f.label_names)
    }

    pub fn to_json_string(&self) -> String {
        let f = ClassFile {
            domain_size: self.n,
            labels: self.k,
            hypotheses: self.hypotheses(),
            point_names: self.point_names.clone(),
            label_names: self.label_names.clone(),
        };
        serde_json::to_string(&f).expect("class serializes")
    }
}

pub fn gather(h: &[Label], points: &[usize]) -> Pattern {
    points.iter().map(|&x| h[x]).collect()
}

/// Distinct label tuples of a class on an ordered point tuple, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<usize>,
    pub patterns: Vec<Pattern>,
}

impl Projection {
    pub fn from_rows(points: Vec<usize>, rows: impl Iterator<Item = Pattern>) -> Self {
        let mut patterns: Vec<Pattern> = rows.collect();
        patterns.sort_unstable();
        patterns.dedup();
        Projection { points, patterns }
    }

    /// Projection with no attached points, for raw pattern sets.
    pub fn from_patterns(d: usize, patterns: Vec<Pattern>) -> Self {
        Projection::from_rows((0..d).collect(), patterns.into_iter())
    }

    pub fn dim(&self) -> usize {
        self.points.len()
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
}

/// Hypotheses of `base` satisfying all constraints.
#[derive(Debug, Clone)]
pub struct VersionSpace<'a> {
    pub base: &'a FiniteClass,
    pub constraints: Vec<(usize, Label)>,
    pub members: Vec<usize>,
}

impl<'a> VersionSpace<'a> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn hypotheses(&self) -> impl Iterator<Item = &'a [Label]> + '_ {
        self.members.iter().map(move |&i| self.base.hyp(i))
    }

    pub fn restrict(&self, more: &[(usize, Label)]) -> Result<VersionSpace<'a>> {
        self.base.check_pairs(more)?;
        let members = self
            .members
            .iter()
            .copied()
            .filter(|&i| more.iter().all(|&(x, y)| self.base.hyp(i)[x] == y))
            .collect();
        let mut constraints = self.constraints.clone();
        constraints.extend_from_slice(more);
        Ok(VersionSpace { base: self.base, constraints, members })
    }

    pub fn project(&self, points: &[usize]) -> Result<Projection> {
        for &x in points {
            self.base.check_point(x)?;
        }
        Ok(self.base.project_members(&self.members, points))
    }
}

/// A finite sequence of (point, label) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub pairs: Vec<(usize, Label)>,
}

impl LabeledSample {
    pub fn new(pairs: Vec<(usize, Label)>) -> Self {
        LabeledSample { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn points(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    /// Reads `point,label` rows; a non-numeric first row is taken as a header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return usage(format!("sample row {} has {} fields, expected 2", i + 1, rec.len()));
            }
            match (rec[0].parse::<usize>(), rec[1].parse::<Label>()) {
                (Ok(x), Ok(y)) => pairs.push((x, y)),
                _ if i == 0 => continue,
                _ => return usage(format!("sample row {} is not `point,label`", i + 1)),
            }
        }
        Ok(LabeledSample { pairs })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for &(x, y) in &self.pairs {
            wtr.serialize((x, y))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: usize,
    pub label: Label,
    pub weight: f64,
}

/// How realizability of a distribution is certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Certificate {
    /// A hypothesis with zero error on the support.
    Witness(usize),
    /// Only `inf er = 0`: each entry is (hypothesis index, error bound).
    LimitRealizable(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizableDistribution {
    pub atoms: Vec<Atom>,
    pub exact: Option<Vec<BigRational>>,
    pub certificate: Certificate,
}

#[derive(Serialize, Deserialize)]
struct DistFile {
    atoms: Vec<(usize, Label, f64)>,
    witness: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schedule: Option<Vec<(usize, f64)>>,
}

const MASS_TOL: f64 = 1e-12;

impl RealizableDistribution {
    /// Checks weights and the certificate against `class`.
    pub fn new(class: &FiniteClass, atoms: Vec<Atom>, certificate: Certificate) -> Result<Self> {
        let d = RealizableDistribution { atoms, exact: None, certificate };
        d.validate(class)?;
        Ok(d)
    }

    /// Exact-weight variant; the float weights are derived from the rationals.
    pub fn from_exact(
        class: &FiniteClass,
        atoms: Vec<(usize, Label, BigRational)>,
        certificate: Certificate,
    ) -> Result<Self> {
        let total: BigRational = atoms.iter().map(|a| a.2.clone()).sum();
        if total != BigRational::one() {
            return Err(Error::Domain(format!("exact weights sum to {total}, not 1")));
        }
        if atoms.iter().any(|a| a.2.is_negative()) {
            return Err(Error::Domain("negative weight".into()));
        }
        let exact: Vec<BigRational> = atoms.iter().map(|a| a.2.clone()).collect();
        let atoms = atoms
            .into_iter()
            .map(|(point, label, w)| Atom { point, label, weight: rat_to_f64(&w) })
            .collect();
        let d = RealizableDistribution { atoms, exact: Some(exact), certificate };
        d.validate(class)?;
        Ok(d)
    }

    /// Finds a zero-error witness in `class` automatically.
    pub fn with_found_witness(class: &FiniteClass, atoms: Vec<Atom>) -> Result<Self> {
        let pairs: Vec<(usize, Label)> = atoms
            .iter()
            .filter(|a| a.weight > 0.0)
            .map(|a| (a.point, a.label))
            .collect();
        class.check_pairs(&pairs)?;
        match class.consistent_members(&pairs).first() {
            Some(&w) => RealizableDistribution::new(class, atoms, Certificate::Witness(w)),
            None => Err(Error::Domain("no hypothesis realizes the distribution".into())),
        }
    }

    fn validate(&self, class: &FiniteClass) -> Result<()> {
        if self.atoms.is_empty() {
            return usage("distribution has no atoms");
        }
        for a in &self.atoms {
            class.check_pairs(&[(a.point, a.label)])?;
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(Error::Domain(format!("bad weight {}", a.weight)));
            }
        }
        let total: f64 = self.atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        match &self.certificate {
            Certificate::Witness(w) => {
                if *w >= class.len() {
                    return usage(format!("witness {w} out of range"));
                }
                if !self.support_agrees(class.hyp(*w)) {
                    return Err(Error::Domain(format!("witness {w} has positive error")));
                }
            }
            Certificate::LimitRealizable(sched) => {
                if sched.is_empty() {
                    return Err(Error::Domain("empty witness schedule".into()));
                }
                for &(h, bound) in sched {
                    if h >= class.len() {
                        return usage(format!("schedule hypothesis {h} out of range"));
                    }
                    let e = self.er(class.hyp(h));
                    if e > bound + MASS_TOL {
                        return Err(Error::Domain(format!(
                            "schedule hypothesis {h} has error {e} > {bound}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn support_agrees(&self, h: &[Label]) -> bool {
        self.atoms.iter().all(|a| a.weight == 0.0 || h[a.point] == a.label)
    }

    /// Probability mass misclassified by `h`.
    pub fn er(&self, h: &[Label]) -> f64 {
        self.atoms.iter().filter(|a| h[a.point] != a.label).map(|a| a.weight).sum()
    }

    pub fn er_exact(&self, h: &[Label]) -> Option<BigRational> {
        let ex = self.exact.as_ref()?;
        let mut s = BigRational::zero();
        for (a, w) in self.atoms.iter().zip(ex) {
            if h[a.point] != a.label {
                s += w;
            }
        }
        Some(s)
    }

    pub fn support(&self) -> Vec<(usize, Label)> {
        self.atoms.iter().filter(|a| a.weight > 0.0).map(|a| (a.point, a.label)).collect()
    }

    /// `n` i.i.d. draws, reproducible from `seed`.
    pub fn sample_iid(&self, n: usize, seed: u64) -> LabeledSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> LabeledSample {
        if n == 0 {
            return LabeledSample::default();
        }
        let idx = WeightedIndex::new(self.atoms.iter().map(|a| a.weight))
            .expect("validated weights");
        let pairs = (0..n)
            .map(|_| {
                let a = &self.atoms[idx.sample(rng)];
                (a.point, a.label)
            })
            .collect();
        LabeledSample { pairs }
    }

    pub fn from_json_str(class: &FiniteClass, s: &str) -> Result<Self> {
        let f: DistFile = serde_json::from_str(s)?;
        let atoms: Vec<Atom> = f
            .atoms
            .into_iter()
            .map(|(point, label, weight)| Atom { point, label, weight })
            .collect();
        match (f.witness, f.schedule) {
            (Some(w), _) => RealizableDistribution::new(class, atoms, Certificate::Witness(w)),
            (None, Some(s)) => {
                RealizableDistribution::new(class, atoms, Certificate::LimitRealizable(s))
            }
            (None, None) => RealizableDistribution::with_found_witness(class, atoms),
        }
    }

    pub fn to_json_string(&self) -> String {
        let (witness, schedule) = match &self.certificate {
            Certificate::Witness(w) => (Some(*w), None),
            Certificate::LimitRealizable(s) => (None, Some(s.clone())),
        };
        let f = DistFile {
            atoms: self.atoms.iter().map(|a| (a.point, a.label, a.weight)).collect(),
            witness,
            schedule,
        };
        serde_json::to_string(&f).expect("distribution serializes")
    }
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // very small or large ratios: scale through the integer parts
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

/// `num / den` as a big rational.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cls(n: usize, k: u32, h: &[&[u32]]) -> FiniteClass {
        FiniteClass::new(n, k, h.iter().map(|v| v.to_vec()).collect()).unwrap()
    }

    #[test]
    fn restrict_examples() {
        let full = FiniteClass::full(2, 2);
        let vs = full.restrict(&[(0, 1)]).unwrap();
        let got: Vec<_> = vs.hypotheses().map(|h| h.to_vec()).collect();
        assert_eq!(got, vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(full.restrict(&[]).unwrap().len(), 4);
        let diag = cls(2, 2, &[&[0, 0], &[1, 1]]);
        assert!(diag.restrict(&[(0, 0), (1, 1)]).unwrap().is_empty());
        assert!(matches!(full.restrict(&[(5, 0)]), Err(Error::Usage(_))));
    }

    #[test]
    fn project_examples() {
        let full = FiniteClass::full(3, 2);
        assert_eq!(full.project(&[0, 2]).unwrap().len(), 4);
        let one = cls(3, 2, &[&[0, 1, 0]]);
        assert_eq!(one.project(&[2, 1, 1]).unwrap().patterns, vec![vec![0, 1, 1]]);
        let c = cls(3, 3, &[&[0, 1, 2], &[0, 2, 1], &[1, 1, 1]]);
        assert_eq!(c.project(&[1, 1]).unwrap().patterns, vec![vec![1, 1], vec![2, 2]]);
    }

    #[test]
    fn consistency_examples() {
        let c = cls(2, 2, &[&[0, 0], &[1, 1]]);
        assert!(c.is_consistent(&LabeledSample::default()));
        assert!(c.is_consistent(&LabeledSample::new(vec![(0, 1), (1, 1)])));
        assert!(!c.is_consistent(&LabeledSample::new(vec![(0, 0), (1, 1)])));
    }

    #[test]
    fn dedup_and_validation() {
        let c = cls(2, 2, &[&[0, 1], &[0, 1], &[1, 1]]);
        assert_eq!(c.len(), 2);
        assert!(FiniteClass::new(2, 2, vec![]).is_err());
        assert!(FiniteClass::new(2, 2, vec![vec![0, 2]]).is_err());
        assert!(FiniteClass::new(2, 2, vec![vec![0]]).is_err());
    }

    #[test]
    fn nondegenerate_flag() {
        assert!(FiniteClass::full(2, 2).is_nondegenerate());
        assert!(!cls(2, 2, &[&[0, 0], &[1, 1]]).is_nondegenerate());
        assert!(!cls(3, 2, &[&[0, 1, 0]]).is_nondegenerate());
    }

    #[test]
    fn class_json_round_trip() {
        let c = cls(2, 3, &[&[0, 2], &[1, 1]])
            .with_names(Some(vec!["a".into(), "b".into()]), None)
            .unwrap();
        let back = FiniteClass::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.point_name(1), "b");
        assert_eq!(back.label_name(2), "2");
    }

    #[test]
    fn sample_iid_examples() {
        let c = FiniteClass::full(2, 2);
        let one = RealizableDistribution::with_found_witness(
            &c,
            vec![Atom { point: 1, label: 0, weight: 1.0 }],
        )
        .unwrap();
        assert!(one.sample_iid(0, 3).is_empty());
        assert_eq!(one.sample_iid(5, 3).pairs, vec![(1, 0); 5]);
        let two = RealizableDistribution::with_found_witness(
            &c,
            vec![
                Atom { point: 0, label: 0, weight: 0.5 },
                Atom { point: 1, label: 1, weight: 0.5 },
            ],
        )
        .unwrap();
        let s = two.sample_iid(100_000, 11);
        let f = s.pairs.iter().filter(|p| p.0 == 0).count() as f64 / 1e5;
        assert!((f - 0.5).abs() < 0.02, "{f}");
        assert_eq!(s, two.sample_iid(100_000, 11));
    }

    #[test]
    fn distribution_validation() {
        let c = cls(2, 2, &[&[0, 0], &[1, 1]]);
        let bad = vec![
            Atom { point: 0, label: 0, weight: 0.5 },
            Atom { point: 1, label: 1, weight: 0.5 },
        ];
        assert!(matches!(
            RealizableDistribution::with_found_witness(&c, bad.clone()),
            Err(Error::Domain(_))
        ));
        assert!(RealizableDistribution::new(&c, bad, Certificate::Witness(0)).is_err());
        let short = vec![Atom { point: 0, label: 0, weight: 0.4 }];
        assert!(RealizableDistribution::new(&c, short, Certificate::Witness(0)).is_err());
        let ex = RealizableDistribution::from_exact(
            &c,
            vec![(0, 1, rat(1, 3)), (1, 1, rat(2, 3))],
            Certificate::Witness(1),
        )
        .unwrap();
        assert_eq!(ex.er_exact(&[0, 1]).unwrap(), rat(1, 3));
        assert!((ex.er(&[0, 0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn limit_schedule_is_checked() {
        let c = cls(2, 2, &[&[0, 0], &[1, 1]]);
        let atoms = vec![
            Atom { point: 0, label: 0, weight: 0.75 },
            Atom { point: 1, label: 1, weight: 0.25 },
        ];
        let ok = Certificate::LimitRealizable(vec![(0, 0.25)]);
        assert!(RealizableDistribution::new(&c, atoms.clone(), ok).is_ok());
        let tight = Certificate::LimitRealizable(vec![(0, 0.1)]);
        assert!(RealizableDistribution::new(&c, atoms, tight).is_err());
    }

    #[test]
    fn dist_json_round_trip() {
        let c = FiniteClass::full(2, 2);
        let s = r#"{"atoms": [[0, 1, 0.25], [1, 0, 0.75]], "witness": null}"#;
        let d = RealizableDistribution::from_json_str(&c, s).unwrap();
        assert_eq!(d.certificate, Certificate::Witness(2));
        let back = RealizableDistribution::from_json_str(&c, &d.to_json_string()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_round_trip() {
        let s = LabeledSample::new(vec![(0, 1), (3, 0)]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(LabeledSample::read_csv(buf.as_slice()).unwrap(), s);
        let with_header = "point,label\n2,1\n";
        assert_eq!(LabeledSample::read_csv(with_header.as_bytes()).unwrap().pairs, vec![(2, 1)]);
        assert!(LabeledSample::read_csv("1,x\n2,y\n".as_bytes()).is_err());
    }

    fn small_class() -> impl Strategy<Value = FiniteClass> {
        (1usize..=4, 2u32..=3).prop_flat_map(|(n, k)| {
            prop::collection::vec(prop::collection::vec(0..k, n), 1..12)
                .prop_map(move |h| FiniteClass::new(n, k, h).unwrap())
        })
    }

    proptest! {
        #[test]
        fn restrict_project_commute(c in small_class(), y in 0u32..3) {
            let n = c.domain_size();
            let k = c.labels();
            let y = y % k;
            // every tuple of length <= 2 over the domain, every single-point constraint
            for x in 0..n {
                let vs = c.restrict(&[(x, y)]).unwrap();
                for a in 0..n {
                    for b in 0..n {
                        let lhs = vs.project(&[a, b]).unwrap();
                        let rhs = Projection::from_rows(
                            vec![a, b],
                            c.iter().filter(|h| h[x] == y).map(|h| vec![h[a], h[b]]),
                        );
                        prop_assert_eq!(lhs, rhs);
                    }
                }
            }
        }

        #[test]
        fn projection_size_bound(c in small_class(), pts in prop::collection::vec(0usize..4, 0..4)) {
            let pts: Vec<usize> = pts.into_iter().map(|p| p % c.domain_size()).collect();
            let p = c.project(&pts).unwrap();
            let cap = (c.labels() as usize).pow(pts.len() as u32);
            prop_assert!(p.len() <= c.len().min(cap));
        }

        #[test]
        fn consistency_monotone(c in small_class(), raw in prop::collection::vec((0usize..4, 0u32..3), 0..6)) {
            let pairs: Vec<(usize, u32)> = raw
                .into_iter()
                .map(|(x, y)| (x % c.domain_size(), y % c.labels()))
                .collect();
            let mut prev = true;
            for t in 0..=pairs.len() {
                let now = c.is_consistent(&LabeledSample::new(pairs[..t].to_vec()));
                prop_assert!(prev || !now);
                prev = now;
            }
        }

        #[test]
        fn witness_has_zero_error(c in small_class(), w in 0usize..12, ws in prop::collection::vec(1u32..10, 1..5)) {
            let w = w % c.len();
            let h = c.hyp(w).to_vec();
            let total: u32 = ws.iter().sum();
            let atoms: Vec<Atom> = ws
                .iter()
                .enumerate()
                .map(|(i, &q)| {
                    let x = i % c.domain_size();
                    Atom { point: x, label: h[x], weight: q as f64 / total as f64 }
                })
                .collect();
            if let Ok(d) = RealizableDistribution::new(&c, atoms, Certificate::Witness(w)) {
                prop_assert_eq!(d.er(&h), 0.0);
            }
        }
    }
}
