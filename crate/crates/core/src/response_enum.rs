//! Enumeration of response functions as set partitions of the database space,
//! reduction to distinct points c_q, and the convex-hull vertex filter.

use std::collections::{BTreeSet, HashMap};

use num::{BigInt, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_columns, Cmp, ColumnOutcome, ExplicitColumns};
use crate::numeric::{int, Rational};
use crate::source_coding::{huffman_lengths, state_count, state_digits, ResponseFunction};

pub const DEFAULT_ENUM_CAP: usize = 15;

/// Bell numbers by the triangle recurrence.
pub fn bell(n: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for v in &row {
            let x = *next.last().unwrap() + v;
            next.push(x);
        }
        row = next;
    }
    row[0]
}

/// Restricted growth strings of length `n` in lexicographic order, optionally
/// constrained to start with `prefix`.
#[derive(Debug, Clone)]
pub struct PartitionIter {
    a: Vec<u32>,
    // max of a[0..=i]
    maxes: Vec<u32>,
    fixed: usize,
    started: bool,
    done: bool,
}

impl PartitionIter {
    pub fn with_prefix(n: usize, prefix: &[u32]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("partitions of an empty set".into()));
        }
        if prefix.len() > n || !is_rgs(prefix) {
            return Err(Error::Invalid("prefix is not a restricted growth string".into()));
        }
        let mut a = prefix.to_vec();
        a.resize(n, 0);
        let mut maxes = vec![0; n];
        let mut m = 0;
        for i in 0..n {
            m = m.max(a[i]);
            maxes[i] = m;
        }
        Ok(Self { a, maxes, fixed: prefix.len().max(1), started: false, done: false })
    }

    /// Advances in place; returns false when exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        if !self.started {
            self.started = true;
            return true;
        }
        let n = self.a.len();
        let mut i = n;
        while i > self.fixed {
            i -= 1;
            if self.a[i] <= self.maxes[i - 1] {
                self.a[i] += 1;
                self.maxes[i] = self.maxes[i - 1].max(self.a[i]);
                for j in i + 1..n {
                    self.a[j] = 0;
                    self.maxes[j] = self.maxes[j - 1];
                }
                return true;
            }
        }
        self.done = true;
        false
    }

    pub fn current(&self) -> &[u32] {
        &self.a
    }
}

impl Iterator for PartitionIter {
    type Item = Vec<u32>;
    fn next(&mut self) -> Option<Vec<u32>> {
        self.advance().then(|| self.a.clone())
    }
}

fn is_rgs(a: &[u32]) -> bool {
    let mut m: i64 = -1;
    for &x in a {
        if x as i64 > m + 1 {
            return false;
        }
        m = m.max(x as i64);
    }
    true
}

/// All set partitions of an `n`-element set, refusing sizes above `cap`.
pub fn enumerate_partitions(n: usize, cap: usize) -> Result<PartitionIter> {
    if n > cap {
        return Err(Error::Limit(format!(
            "{n} elements have {} set partitions (cap {cap}); use a compressor pool instead",
            bell(n)
        )));
    }
    PartitionIter::with_prefix(n, &[])
}

/// All restricted growth strings of length `k` (used to split enumeration work).
pub fn rgs_prefixes(k: usize) -> Vec<Vec<u32>> {
    if k == 0 {
        return vec![vec![]];
    }
    PartitionIter::with_prefix(k, &[]).expect("k > 0").collect()
}

/// The point (R_q, D_q^(1..M)) as integers over the common denominator N·β,
/// where N is the number of database states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntPoint {
    pub bits: u64,
    pub errors: Vec<u64>,
}

impl IntPoint {
    pub fn to_rational(&self, denom: u64) -> Vec<Rational> {
        let d = BigInt::from(denom);
        let mut v = vec![Rational::new(BigInt::from(self.bits), d.clone())];
        v.extend(self.errors.iter().map(|&e| Rational::new(BigInt::from(e), d.clone())));
        v
    }
}

/// Evaluates partitions of X^{Mβ} quickly with integer arithmetic (ML reconstruction, Hamming).
#[derive(Debug, Clone)]
pub struct PointEvaluator {
    pub alphabet_size: u32,
    pub num_files: usize,
    pub file_len: usize,
    n_states: usize,
    digits: Vec<Vec<u8>>,
}

impl PointEvaluator {
    pub fn new(alphabet_size: u32, num_files: usize, file_len: usize) -> Result<Self> {
        let n_states = state_count(alphabet_size, num_files, file_len)? as usize;
        let n = num_files * file_len;
        let digits = (0..n_states as u64).map(|s| state_digits(alphabet_size, n, s)).collect();
        Ok(Self { alphabet_size, num_files, file_len, n_states, digits })
    }

    pub fn num_states(&self) -> usize {
        self.n_states
    }

    pub fn denominator(&self) -> u64 {
        (self.n_states * self.file_len) as u64
    }

    pub fn eval(&self, labels: &[u32]) -> IntPoint {
        let k = self.alphabet_size as usize;
        let n = self.num_files * self.file_len;
        let blocks = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut sizes = vec![0u64; blocks];
        let mut counts = vec![0u32; blocks * n * k];
        for (s, &b) in labels.iter().enumerate() {
            sizes[b as usize] += 1;
            let base = b as usize * n * k;
            for (pos, &d) in self.digits[s].iter().enumerate() {
                counts[base + pos * k + d as usize] += 1;
            }
        }
        let lengths = huffman_lengths(&sizes).expect("nonempty");
        let bits: u64 = sizes.iter().zip(&lengths).map(|(&s, &l)| s * l as u64).sum();
        let mut errors = vec![0u64; self.num_files];
        for b in 0..blocks {
            for pos in 0..n {
                let c = &counts[(b * n + pos) * k..(b * n + pos + 1) * k];
                let best = *c.iter().max().unwrap() as u64;
                errors[pos / self.file_len] += sizes[b] - best;
            }
        }
        IntPoint { bits, errors }
    }

    /// c_max: the identity partition has the largest rate, the one-part partition the largest distortions.
    pub fn c_max(&self) -> IntPoint {
        let identity: Vec<u32> = (0..self.n_states as u32).collect();
        let single = vec![0u32; self.n_states];
        IntPoint { bits: self.eval(&identity).bits, errors: self.eval(&single).errors }
    }
}

/// A candidate response: its point c_q and, when available, the response itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePoint {
    pub c: Vec<Rational>,
    pub source: Option<ResponseFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    #[default]
    None,
    /// Bit permutations inside each file, file permutations, and global complement for binary alphabets.
    Full,
}

/// The symmetry group acting on database states, as permutations of state indices.
pub fn symmetry_group(alphabet_size: u32, num_files: usize, file_len: usize) -> Result<Vec<Vec<u32>>> {
    let n_states = state_count(alphabet_size, num_files, file_len)? as usize;
    let n = num_files * file_len;
    let file_perms = permutations(num_files);
    let bit_perms = permutations(file_len);
    // one position permutation per choice of file order and per-file bit order
    let mut pos_perms: Vec<Vec<usize>> = Vec::new();
    let per_file_choices = num::pow(bit_perms.len(), num_files);
    for fp in &file_perms {
        for mut c in 0..per_file_choices {
            let mut perm = vec![0; n];
            for f in 0..num_files {
                let bp = &bit_perms[c % bit_perms.len()];
                c /= bit_perms.len();
                for i in 0..file_len {
                    perm[fp[f] * file_len + bp[i]] = f * file_len + i;
                }
            }
            pos_perms.push(perm);
        }
    }
    let complements: &[bool] = if alphabet_size == 2 { &[false, true] } else { &[false] };
    let mut group = Vec::new();
    for perm in &pos_perms {
        for &comp in complements {
            let g: Vec<u32> = (0..n_states as u64)
                .map(|s| {
                    let d = state_digits(alphabet_size, n, s);
                    let mut out = vec![0u8; n];
                    for (p, &q) in perm.iter().enumerate() {
                        out[p] = if comp { 1 - d[q] } else { d[q] };
                    }
                    crate::source_coding::digits_to_state(alphabet_size, &out) as u32
                })
                .collect();
            group.push(g);
        }
    }
    Ok(group)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn rec(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == p.len() {
            out.push(p.clone());
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, out);
            p.swap(k, i);
        }
    }
    rec(0, &mut p, &mut out);
    out.sort();
    out
}

/// Whether `labels` is the lexicographically smallest restricted growth string in its orbit.
pub fn is_canonical(labels: &[u32], group: &[Vec<u32>], scratch: &mut Vec<u32>) -> bool {
    let n = labels.len();
    scratch.resize(n, 0);
    let mut relabel = vec![u32::MAX; n];
    for g in group {
        // image partition: state g[s] carries the block of s
        for s in 0..n {
            scratch[g[s] as usize] = labels[s];
        }
        relabel.iter_mut().for_each(|r| *r = u32::MAX);
        let mut next = 0;
        for i in 0..n {
            let b = scratch[i] as usize;
            if relabel[b] == u32::MAX {
                relabel[b] = next;
                next += 1;
            }
            let v = relabel[b];
            if v < labels[i] {
                return false;
            }
            if v > labels[i] {
                break;
            }
        }
    }
    true
}

/// Orbit representative of a point under file permutations (distortions sorted).
fn orbit_key(p: &IntPoint) -> IntPoint {
    let mut e = p.errors.clone();
    e.sort_unstable();
    IntPoint { bits: p.bits, errors: e }
}

/// Distinct points of a stream of partitions. With [`Symmetry::Full`] only canonical
/// partitions are evaluated and points are reported once per file-permutation orbit.
pub fn equivalence_reduce<I: IntoIterator<Item = Vec<u32>>>(
    partitions: I,
    eval: &PointEvaluator,
    symmetry: Symmetry,
) -> Result<Vec<CandidatePoint>> {
    let group = match symmetry {
        Symmetry::None => Vec::new(),
        Symmetry::Full => symmetry_group(eval.alphabet_size, eval.num_files, eval.file_len)?,
    };
    let mut seen: HashMap<IntPoint, Vec<u32>> = HashMap::new();
    let mut order = Vec::new();
    let mut scratch = Vec::new();
    for labels in partitions {
        if symmetry == Symmetry::Full && !is_canonical(&labels, &group, &mut scratch) {
            continue;
        }
        let mut p = eval.eval(&labels);
        if symmetry == Symmetry::Full {
            p = orbit_key(&p);
        }
        if !seen.contains_key(&p) {
            order.push(p.clone());
            seen.insert(p, labels);
        }
    }
    let denom = eval.denominator();
    order
        .into_iter()
        .map(|p| {
            let labels = &seen[&p];
            let rf = ResponseFunction::from_labels(eval.alphabet_size, eval.num_files, eval.file_len, labels)?;
            let mut c = p.to_rational(denom);
            if symmetry == Symmetry::Full {
                // the evaluated partition realizes some permutation of the sorted key
                c = rf.point();
            }
            Ok(CandidatePoint { c, source: Some(rf) })
        })
        .collect()
}

/// All file permutations of the distortion coordinates of each point, deduplicated.
pub fn expand_file_orbits(points: &[Vec<Rational>], num_files: usize) -> Vec<Vec<Rational>> {
    let mut out: Vec<Vec<Rational>> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in points {
        for perm in permutations(num_files) {
            let mut q = vec![p[0].clone()];
            q.extend(perm.iter().map(|&f| p[1 + f].clone()));
            if seen.insert(q.clone()) {
                out.push(q);
            }
        }
    }
    out
}

fn coordinate_max(points: &[Vec<Rational>]) -> Vec<Rational> {
    let mut c = points[0].clone();
    for p in &points[1..] {
        for (a, b) in c.iter_mut().zip(p) {
            if b > a {
                *a = b.clone();
            }
        }
    }
    c
}

/// Whether `p` is a convex combination of `others`.
pub fn in_convex_hull(p: &[Rational], others: &[&Vec<Rational>]) -> Result<bool> {
    if others.is_empty() {
        return Ok(false);
    }
    let dim = p.len();
    let mut columns = Vec::with_capacity(others.len());
    for o in others {
        let mut col = o.to_vec();
        col.push(int(1));
        columns.push(col);
    }
    let src = ExplicitColumns { rows: dim + 1, costs: vec![Rational::zero(); others.len()], columns };
    let mut rhs = p.to_vec();
    rhs.push(int(1));
    let cmps = vec![Cmp::Eq; dim + 1];
    Ok(matches!(solve_columns(&src, &cmps, &rhs)?, ColumnOutcome::Optimal(_)))
}

/// Indices of the points that are vertices of conv(points ∪ {c_max}), c_max excluded.
/// Exact duplicates are represented by their first occurrence.
pub fn vertex_filter(points: &[Vec<Rational>]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::Invalid("no points to filter".into()));
    }
    let cmax = coordinate_max(points);
    let mut first: Vec<usize> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        if *p != cmax && seen.insert(p.clone()) {
            first.push(i);
        }
    }
    if first.is_empty() {
        // every point equals c_max
        return Ok(vec![0]);
    }
    let keep: Vec<Option<usize>> = first
        .par_iter()
        .map(|&i| {
            let mut others: Vec<&Vec<Rational>> =
                first.iter().filter(|&&j| j != i).map(|&j| &points[j]).collect();
            others.push(&cmax);
            in_convex_hull(&points[i], &others).map(|inside| (!inside).then_some(i))
        })
        .collect::<Result<_>>()?;
    Ok(keep.into_iter().flatten().collect())
}

/// Whether point `a` is at least `b` in every coordinate and differs from it.
pub fn dominates(b: &[Rational], a: &[Rational]) -> bool {
    a != b && a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Progress of a long enumeration, suitable for checkpoint files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnumerationState {
    pub alphabet_size: u32,
    pub num_files: usize,
    pub file_len: usize,
    pub symmetry: Symmetry,
    pub prefix_len: usize,
    pub completed_prefixes: Vec<usize>,
    pub survivors: Vec<IntPoint>,
    pub partitions_seen: u64,
}

/// Streaming enumerate-and-filter over all partitions of X^{Mβ}.
///
/// Work is split by restricted-growth prefixes; `on_progress` is called after each
/// prefix with the current state (for checkpointing). Survivors are kept as the
/// vertex set of conv(seen ∪ c_max), where c_max is known up front.
pub fn enumerate_vertices(
    eval: &PointEvaluator,
    symmetry: Symmetry,
    prefix_len: usize,
    resume: Option<EnumerationState>,
    mut on_progress: impl FnMut(&EnumerationState),
) -> Result<EnumerationState> {
    let n = eval.num_states();
    let prefix_len = prefix_len.min(n);
    let group = match symmetry {
        Symmetry::None => Vec::new(),
        Symmetry::Full => symmetry_group(eval.alphabet_size, eval.num_files, eval.file_len)?,
    };
    let mut state = resume.unwrap_or_else(|| EnumerationState {
        alphabet_size: eval.alphabet_size,
        num_files: eval.num_files,
        file_len: eval.file_len,
        symmetry,
        prefix_len,
        ..Default::default()
    });
    if state.prefix_len != prefix_len
        || state.symmetry != symmetry
        || (state.alphabet_size, state.num_files, state.file_len) != (eval.alphabet_size, eval.num_files, eval.file_len)
    {
        return Err(Error::Invalid("checkpoint does not match the requested enumeration".into()));
    }
    let denom = eval.denominator();
    let cmax_int = eval.c_max();
    let cmax = cmax_int.to_rational(denom);
    let prefixes = rgs_prefixes(prefix_len);
    let done: BTreeSet<usize> = state.completed_prefixes.iter().copied().collect();
    let mut survivors: Vec<Vec<Rational>> = state.survivors.iter().map(|p| p.to_rational(denom)).collect();
    for (pi, prefix) in prefixes.iter().enumerate() {
        if done.contains(&pi) {
            continue;
        }
        let mut it = PartitionIter::with_prefix(n, prefix)?;
        let mut distinct: BTreeSet<IntPoint> = BTreeSet::new();
        let mut scratch = Vec::new();
        let mut count = 0u64;
        while it.advance() {
            count += 1;
            let labels = it.current();
            if symmetry == Symmetry::Full && !is_canonical(labels, &group, &mut scratch) {
                continue;
            }
            distinct.insert(eval.eval(labels));
        }
        let mut fresh: Vec<Vec<Rational>> = distinct.iter().map(|p| p.to_rational(denom)).collect();
        if symmetry == Symmetry::Full {
            fresh = expand_file_orbits(&fresh, eval.num_files);
        }
        for p in fresh {
            if p == cmax || survivors.contains(&p) {
                continue;
            }
            let mut hull: Vec<&Vec<Rational>> = survivors.iter().collect();
            hull.push(&cmax);
            if !in_convex_hull(&p, &hull)? {
                survivors.push(p);
            }
        }
        // drop survivors that the new points have absorbed
        if survivors.len() > 1 {
            let mut all = survivors.clone();
            all.push(cmax.clone());
            let keep = vertex_filter(&all)?;
            survivors = keep.into_iter().map(|i| all[i].clone()).collect();
        }
        state.partitions_seen += count;
        state.completed_prefixes.push(pi);
        state.survivors = survivors.iter().map(|p| rational_to_int(p, denom)).collect();
        on_progress(&state);
    }
    Ok(state)
}

fn rational_to_int(p: &[Rational], denom: u64) -> IntPoint {
    let scaled: Vec<u64> = p
        .iter()
        .map(|x| {
            let v = x * int(denom as i64);
            assert!(v.is_integer());
            num::ToPrimitive::to_u64(&v.to_integer()).expect("fits")
        })
        .collect();
    IntPoint { bits: scaled[0], errors: scaled[1..].to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    #[test]
    fn bell_numbers() {
        let want = [1u128, 1, 2, 5, 15, 52, 203, 877, 4140, 21147];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(bell(n), *w);
        }
        assert_eq!(bell(16), 10_480_142_147);
    }

    #[test]
    fn partition_counts_match_bell() {
        for n in 1..=8 {
            let v: Vec<Vec<u32>> = enumerate_partitions(n, 15).unwrap().collect();
            assert_eq!(v.len() as u128, bell(n));
            assert!(v.iter().all(|a| is_rgs(a)));
            let set: BTreeSet<_> = v.iter().cloned().collect();
            assert_eq!(set.len(), v.len());
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(enumerate_partitions(16, 15).is_err());
    }

    #[test]
    fn prefixes_split_the_enumeration() {
        for k in 0..=4 {
            let total: usize = rgs_prefixes(k)
                .iter()
                .map(|p| PartitionIter::with_prefix(7, p).unwrap().count())
                .sum();
            assert_eq!(total as u128, bell(7));
        }
    }

    #[test]
    fn fast_points_match_response_functions() {
        let ev = PointEvaluator::new(2, 2, 1).unwrap();
        for labels in enumerate_partitions(4, 15).unwrap() {
            let rf = ResponseFunction::from_labels(2, 2, 1, &labels).unwrap();
            assert_eq!(ev.eval(&labels).to_rational(ev.denominator()), rf.point());
        }
        let ev = PointEvaluator::new(3, 1, 2).unwrap();
        for labels in enumerate_partitions(9, 15).unwrap().step_by(97) {
            let rf = ResponseFunction::from_labels(3, 1, 2, &labels).unwrap();
            assert_eq!(ev.eval(&labels).to_rational(ev.denominator()), rf.point());
        }
    }

    #[test]
    fn two_bit_database_reduces_to_nine_or_seven() {
        let ev = PointEvaluator::new(2, 2, 1).unwrap();
        let plain = equivalence_reduce(enumerate_partitions(4, 15).unwrap(), &ev, Symmetry::None).unwrap();
        assert_eq!(plain.len(), 9);
        let sym = equivalence_reduce(enumerate_partitions(4, 15).unwrap(), &ev, Symmetry::Full).unwrap();
        assert_eq!(sym.len(), 7);
        let expanded = expand_file_orbits(&sym.iter().map(|c| c.c.clone()).collect::<Vec<_>>(), 2);
        let a: BTreeSet<_> = expanded.into_iter().collect();
        let b: BTreeSet<_> = plain.into_iter().map(|c| c.c).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn group_sizes() {
        assert_eq!(symmetry_group(2, 2, 1).unwrap().len(), 4);
        assert_eq!(symmetry_group(2, 2, 2).unwrap().len(), 16);
        assert_eq!(symmetry_group(2, 1, 4).unwrap().len(), 48);
        for g in symmetry_group(2, 2, 2).unwrap() {
            let set: BTreeSet<_> = g.iter().collect();
            assert_eq!(set.len(), 16);
        }
    }

    #[test]
    fn single_point_is_a_vertex() {
        assert_eq!(vertex_filter(&[vec![int(1), ratio(1, 4)]]).unwrap(), vec![0]);
    }

    #[test]
    fn duplicates_kept_once() {
        let p = vec![int(1), ratio(1, 8)];
        let q = vec![int(0), ratio(1, 2)];
        let r = vec![int(2), int(0)];
        let kept = vertex_filter(&[p.clone(), p.clone(), q, r]).unwrap();
        assert_eq!(kept, vec![0, 2, 3]);
    }

    #[test]
    fn streaming_matches_batch_filter() {
        for (m, beta) in [(2usize, 1usize), (1, 2), (1, 3), (3, 1)] {
            let ev = PointEvaluator::new(2, m, beta).unwrap();
            let n = ev.num_states();
            let all: Vec<Vec<Rational>> = enumerate_partitions(n, 15)
                .unwrap()
                .map(|l| ev.eval(&l).to_rational(ev.denominator()))
                .collect();
            let batch: BTreeSet<Vec<Rational>> = vertex_filter(&all).unwrap().into_iter().map(|i| all[i].clone()).collect();
            for sym in [Symmetry::None, Symmetry::Full] {
                let st = enumerate_vertices(&ev, sym, 3.min(n), None, |_| {}).unwrap();
                let got: BTreeSet<Vec<Rational>> = st.survivors.iter().map(|p| p.to_rational(ev.denominator())).collect();
                assert_eq!(got, batch, "M={m} beta={beta} {sym:?}");
            }
        }
    }

    #[test]
    fn checkpoint_resume_gives_same_result() {
        let ev = PointEvaluator::new(2, 3, 1).unwrap();
        let full = enumerate_vertices(&ev, Symmetry::None, 3, None, |_| {}).unwrap();
        let mut snapshots = Vec::new();
        enumerate_vertices(&ev, Symmetry::None, 3, None, |s| snapshots.push(s.clone())).unwrap();
        let mid = snapshots[1].clone();
        let json = serde_json::to_string(&mid).unwrap();
        let resumed = enumerate_vertices(&ev, Symmetry::None, 3, Some(serde_json::from_str(&json).unwrap()), |_| {}).unwrap();
        let a: BTreeSet<_> = full.survivors.into_iter().collect();
        let b: BTreeSet<_> = resumed.survivors.into_iter().collect();
        assert_eq!(a, b);
        assert_eq!(resumed.partitions_seen as u128, bell(8));
    }
}
