//! Optimal prefix-code lengths and response functions (partitions of the
//! database space with per-part reconstructions).

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::ops::Add;

use num::{BigInt, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{int, Rational};

/// Largest database space a [`ResponseFunction`] is allowed to tabulate.
pub const MAX_TABLE_STATES: u64 = 1 << 24;

/// Binary Huffman code lengths for the given weights (need not be normalized).
///
/// The two lightest nodes are merged first; equal weights are broken by the
/// smaller node index, original symbols first. A single symbol gets length 0.
pub fn huffman_lengths<W: Ord + Clone + Add<Output = W>>(weights: &[W]) -> Result<Vec<u32>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::Invalid("empty distribution".into()));
    }
    if n == 1 {
        return Ok(vec![0]);
    }
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut heap: BinaryHeap<Reverse<(W, usize)>> =
        weights.iter().cloned().enumerate().map(|(i, w)| Reverse((w, i))).collect();
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((w1, a)) = heap.pop().unwrap();
        let Reverse((w2, b)) = heap.pop().unwrap();
        parent[a] = next;
        parent[b] = next;
        heap.push(Reverse((w1 + w2, next)));
        next += 1;
    }
    let root = next - 1;
    let mut depth = vec![0u32; 2 * n - 1];
    for v in (0..root).rev() {
        depth[v] = depth[parent[v]] + 1;
    }
    Ok(depth[..n].to_vec())
}

/// A probability mass function over a finite answer alphabet, stored exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: Vec<Rational>,
}

impl Pmf {
    pub fn new(probs: Vec<Rational>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Invalid("empty distribution".into()));
        }
        if probs.iter().any(|p| p < &Rational::zero()) {
            return Err(Error::Invalid("negative probability".into()));
        }
        let total: Rational = probs.iter().cloned().sum();
        if !total.is_one() {
            return Err(Error::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Invalid("all counts are zero".into()));
        }
        Self::new(counts.iter().map(|&c| Rational::new(BigInt::from(c), BigInt::from(total))).collect())
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    /// Huffman lengths and the exact average length in bits.
    pub fn huffman(&self) -> (Vec<u32>, Rational) {
        let lengths = huffman_lengths(&self.probs).expect("nonempty");
        let avg = self.probs.iter().zip(&lengths).map(|(p, &l)| p * int(l as i64)).sum();
        (lengths, avg)
    }

    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .map(|p| crate::numeric::rat_to_f64(p))
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }
}

/// Per-symbol distortion measure for reconstruction quality.
#[derive(Debug, Clone, PartialEq)]
pub enum DistortionMeasure {
    Hamming,
    /// `matrix[a][b]` is the cost of reconstructing symbol `a` as `b`.
    Matrix(Vec<Vec<Rational>>),
}

impl DistortionMeasure {
    fn cost(&self, a: usize, b: usize) -> Rational {
        match self {
            DistortionMeasure::Hamming => {
                if a == b {
                    Rational::zero()
                } else {
                    Rational::one()
                }
            }
            DistortionMeasure::Matrix(m) => m[a][b].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part {
    /// Database states (base-|X| integers, file 1 most significant).
    pub members: Vec<u64>,
    /// One reconstruction of length `file_len` per file.
    pub reconstructions: Vec<Vec<u8>>,
}

/// A deterministic answer function of the whole database, given as the partition
/// it induces together with the decoder's reconstruction for every part.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseFunction {
    alphabet_size: u32,
    num_files: usize,
    file_len: usize,
    parts: Vec<Part>,
    lookup: Vec<u32>,
}

pub fn state_count(alphabet_size: u32, num_files: usize, file_len: usize) -> Result<u64> {
    let n = (num_files * file_len) as u32;
    (alphabet_size as u64)
        .checked_pow(n)
        .filter(|&c| c <= MAX_TABLE_STATES)
        .ok_or_else(|| {
            Error::Limit(format!(
                "database space {alphabet_size}^{n} is too large to tabulate; use block or group composition"
            ))
        })
}

impl ResponseFunction {
    pub fn new(alphabet_size: u32, num_files: usize, file_len: usize, parts: Vec<Part>) -> Result<Self> {
        if alphabet_size < 2 || num_files == 0 || file_len == 0 {
            return Err(Error::Invalid("alphabet ≥ 2, M ≥ 1 and β ≥ 1 are required".into()));
        }
        let n = state_count(alphabet_size, num_files, file_len)?;
        let mut lookup = vec![u32::MAX; n as usize];
        for (i, part) in parts.iter().enumerate() {
            if part.members.is_empty() {
                return Err(Error::Invalid(format!("part {i} is empty")));
            }
            if part.reconstructions.len() != num_files
                || part.reconstructions.iter().any(|r| r.len() != file_len || r.iter().any(|&s| s as u32 >= alphabet_size))
            {
                return Err(Error::Invalid(format!("part {i} has malformed reconstructions")));
            }
            for &s in &part.members {
                if s >= n {
                    return Err(Error::Invalid(format!("state {s} outside the database space")));
                }
                if lookup[s as usize] != u32::MAX {
                    return Err(Error::Invalid(format!("state {s} appears in two parts")));
                }
                lookup[s as usize] = i as u32;
            }
        }
        if lookup.iter().any(|&p| p == u32::MAX) {
            return Err(Error::Invalid("parts do not cover the database space".into()));
        }
        Ok(Self { alphabet_size, num_files, file_len, parts, lookup })
    }

    /// Builds the response with per-symbol maximum-likelihood reconstructions.
    pub fn with_ml(alphabet_size: u32, num_files: usize, file_len: usize, blocks: Vec<Vec<u64>>) -> Result<Self> {
        let parts = blocks
            .into_iter()
            .map(|members| {
                let reconstructions = ml_reconstruction(alphabet_size, num_files, file_len, &members);
                Part { members, reconstructions }
            })
            .collect();
        Self::new(alphabet_size, num_files, file_len, parts)
    }

    /// Response from a block label per database state (e.g. a restricted growth string).
    pub fn from_labels(alphabet_size: u32, num_files: usize, file_len: usize, labels: &[u32]) -> Result<Self> {
        let k = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut blocks = vec![Vec::new(); k];
        for (s, &l) in labels.iter().enumerate() {
            blocks[l as usize].push(s as u64);
        }
        blocks.retain(|b| !b.is_empty());
        Self::with_ml(alphabet_size, num_files, file_len, blocks)
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }
    pub fn num_files(&self) -> usize {
        self.num_files
    }
    pub fn file_len(&self) -> usize {
        self.file_len
    }
    pub fn parts(&self) -> &[Part] {
        &self.parts
    }
    pub fn num_states(&self) -> u64 {
        self.lookup.len() as u64
    }

    /// Index of the part containing `state`.
    pub fn part_of(&self, state: u64) -> usize {
        self.lookup[state as usize] as usize
    }

    pub fn part_sizes(&self) -> Vec<u64> {
        self.parts.iter().map(|p| p.members.len() as u64).collect()
    }

    pub fn answer_pmf(&self) -> Pmf {
        Pmf::from_counts(&self.part_sizes()).expect("parts cover a nonempty space")
    }

    /// Codeword length of each part under the Huffman code of the answer distribution.
    pub fn code_lengths(&self) -> Vec<u32> {
        huffman_lengths(&self.part_sizes()).expect("nonempty")
    }

    /// R_q: average Huffman length of the answer divided by β.
    pub fn rate(&self) -> Rational {
        let sizes = self.part_sizes();
        let lengths = huffman_lengths(&sizes).expect("nonempty");
        let bits: u64 = sizes.iter().zip(&lengths).map(|(&s, &l)| s * l as u64).sum();
        Rational::new(BigInt::from(bits), BigInt::from(self.num_states()) * BigInt::from(self.file_len))
    }

    pub fn distortions(&self) -> Vec<Rational> {
        self.distortions_with(&DistortionMeasure::Hamming)
    }

    /// D_q^(m) for every file under the given per-symbol measure.
    pub fn distortions_with(&self, measure: &DistortionMeasure) -> Vec<Rational> {
        let k = self.alphabet_size as usize;
        let beta = self.file_len;
        let n = self.num_files * beta;
        let mut totals = vec![Rational::zero(); self.num_files];
        let mut counts = vec![0u64; n * k];
        for part in &self.parts {
            symbol_counts(self.alphabet_size, n, &part.members, &mut counts);
            for m in 0..self.num_files {
                for i in 0..beta {
                    let pos = m * beta + i;
                    let rec = part.reconstructions[m][i] as usize;
                    for a in 0..k {
                        let c = counts[pos * k + a];
                        if c > 0 {
                            totals[m] += measure.cost(a, rec) * int(c as i64);
                        }
                    }
                }
            }
        }
        let denom = int(self.num_states() as i64) * int(beta as i64);
        totals.into_iter().map(|t| t / &denom).collect()
    }

    /// The point (R_q, D_q^(1), ..., D_q^(M)).
    pub fn point(&self) -> Vec<Rational> {
        let mut v = vec![self.rate()];
        v.extend(self.distortions());
        v
    }

    /// Replaces the reconstructions; used to check that the ML choice is optimal.
    pub fn with_reconstructions(&self, recs: Vec<Vec<Vec<u8>>>) -> Result<Self> {
        let parts = self
            .parts
            .iter()
            .zip(recs)
            .map(|(p, r)| Part { members: p.members.clone(), reconstructions: r })
            .collect();
        Self::new(self.alphabet_size, self.num_files, self.file_len, parts)
    }
}

/// Symbol value of `state` at position `pos` (0 = most significant) among `n` digits.
pub fn digit(alphabet_size: u32, n: usize, state: u64, pos: usize) -> u8 {
    let k = alphabet_size as u64;
    ((state / k.pow((n - 1 - pos) as u32)) % k) as u8
}

pub fn state_digits(alphabet_size: u32, n: usize, mut state: u64) -> Vec<u8> {
    let k = alphabet_size as u64;
    let mut d = vec![0u8; n];
    for i in (0..n).rev() {
        d[i] = (state % k) as u8;
        state /= k;
    }
    d
}

pub fn digits_to_state(alphabet_size: u32, digits: &[u8]) -> u64 {
    digits.iter().fold(0u64, |acc, &d| acc * alphabet_size as u64 + d as u64)
}

fn symbol_counts(alphabet_size: u32, n: usize, members: &[u64], counts: &mut [u64]) {
    let k = alphabet_size as usize;
    counts.iter_mut().for_each(|c| *c = 0);
    for &s in members {
        let mut s = s;
        for pos in (0..n).rev() {
            counts[pos * k + (s % k as u64) as usize] += 1;
            s /= k as u64;
        }
    }
}

/// Per-position majority symbol of a part (ties toward the smaller symbol), grouped by file.
pub fn ml_reconstruction(alphabet_size: u32, num_files: usize, file_len: usize, members: &[u64]) -> Vec<Vec<u8>> {
    let k = alphabet_size as usize;
    let n = num_files * file_len;
    let mut counts = vec![0u64; n * k];
    symbol_counts(alphabet_size, n, members, &mut counts);
    (0..num_files)
        .map(|m| {
            (0..file_len)
                .map(|i| {
                    let c = &counts[(m * file_len + i) * k..(m * file_len + i + 1) * k];
                    let mut best = 0;
                    for a in 1..k {
                        if c[a] > c[best] {
                            best = a;
                        }
                    }
                    best as u8
                })
                .collect()
        })
        .collect()
}

fn symbol_char(d: u8) -> char {
    std::char::from_digit(d as u32, 36).expect("alphabet up to 36 symbols")
}

fn parse_symbols(s: &str, alphabet_size: u32, len: usize) -> std::result::Result<Vec<u8>, String> {
    if s.chars().count() != len {
        return Err(format!("'{s}' should have {len} symbols"));
    }
    s.chars()
        .map(|c| {
            c.to_digit(36)
                .filter(|&d| d < alphabet_size)
                .map(|d| d as u8)
                .ok_or_else(|| format!("symbol '{c}' not in alphabet of size {alphabet_size}"))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PartJson {
    members: Vec<String>,
    reconstructions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ResponseFunctionJson {
    alphabet_size: u32,
    num_files: usize,
    file_len: usize,
    parts: Vec<PartJson>,
}

impl Serialize for ResponseFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.num_files * self.file_len;
        let enc = |d: &[u8]| d.iter().map(|&x| symbol_char(x)).collect::<String>();
        let parts = self
            .parts
            .iter()
            .map(|p| PartJson {
                members: p.members.iter().map(|&m| enc(&state_digits(self.alphabet_size, n, m))).collect(),
                reconstructions: p.reconstructions.iter().map(|r| enc(r)).collect(),
            })
            .collect();
        ResponseFunctionJson {
            alphabet_size: self.alphabet_size,
            num_files: self.num_files,
            file_len: self.file_len,
            parts,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ResponseFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = ResponseFunctionJson::deserialize(d)?;
        let n = j.num_files * j.file_len;
        let mut parts = Vec::with_capacity(j.parts.len());
        for p in j.parts {
            let members = p
                .members
                .iter()
                .map(|m| parse_symbols(m, j.alphabet_size, n).map(|ds| digits_to_state(j.alphabet_size, &ds)))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(D::Error::custom)?;
            let reconstructions = p
                .reconstructions
                .iter()
                .map(|r| parse_symbols(r, j.alphabet_size, j.file_len))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(D::Error::custom)?;
            parts.push(Part { members, reconstructions });
        }
        ResponseFunction::new(j.alphabet_size, j.num_files, j.file_len, parts).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    fn bits(s: &str) -> u64 {
        u64::from_str_radix(s, 2).unwrap()
    }

    fn rf(m: usize, beta: usize, blocks: &[&[&str]]) -> ResponseFunction {
        let blocks = blocks.iter().map(|b| b.iter().map(|s| bits(s)).collect()).collect();
        ResponseFunction::with_ml(2, m, beta, blocks).unwrap()
    }

    fn avg(probs: &[Rational]) -> Rational {
        Pmf::new(probs.to_vec()).unwrap().huffman().1
    }

    #[test]
    fn huffman_examples() {
        let q = ratio(1, 4);
        let (l, a) = Pmf::new(vec![q.clone(), q.clone(), q.clone(), q.clone()]).unwrap().huffman();
        assert_eq!(l, vec![2, 2, 2, 2]);
        assert_eq!(a, int(2));
        assert_eq!(avg(&[ratio(1, 2), q.clone(), q.clone()]), ratio(3, 2));
        let (l, a) = Pmf::new(vec![ratio(3, 4), q]).unwrap().huffman();
        assert_eq!(l, vec![1, 1]);
        assert_eq!(a, int(1));
        let (l, a) = Pmf::new(vec![int(1)]).unwrap().huffman();
        assert_eq!(l, vec![0]);
        assert_eq!(a, int(0));
        assert!(huffman_lengths::<u64>(&[]).is_err());
        assert!(Pmf::new(vec![ratio(1, 2)]).is_err());
    }

    #[test]
    fn table_rows_for_two_bits() {
        let r = rf(2, 1, &[&["00", "11"], &["01"], &["10"]]);
        assert_eq!(r.rate(), ratio(3, 2));
        assert_eq!(r.distortions(), vec![ratio(1, 4), ratio(1, 4)]);
        let id = rf(2, 1, &[&["00"], &["01"], &["10"], &["11"]]);
        assert_eq!(id.rate(), int(2));
        let r = rf(2, 1, &[&["00", "01"], &["10", "11"]]);
        assert_eq!(r.distortions(), vec![int(0), ratio(1, 2)]);
    }

    #[test]
    fn ml_tie_goes_to_zero() {
        let r = rf(2, 1, &[&["00", "11"], &["01", "10"]]);
        assert_eq!(r.parts()[0].reconstructions, vec![vec![0], vec![0]]);
        // one of the two members is wrong in each file
        assert_eq!(r.distortions(), vec![ratio(1, 2), ratio(1, 2)]);
    }

    #[test]
    fn ml_majority_and_singletons() {
        let rec = ml_reconstruction(2, 1, 4, &[bits("1100"), bits("1010"), bits("0110"), bits("1110"), bits("1111")]);
        assert_eq!(rec, vec![vec![1, 1, 1, 0]]);
        let rec = ml_reconstruction(2, 2, 2, &[bits("0110")]);
        assert_eq!(rec, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn compressor_three_as_two_files() {
        let a: Vec<u64> = ["1100", "1010", "0110", "1110", "1111"].iter().map(|s| bits(s)).collect();
        let b: Vec<u64> = (0..16).filter(|s| !a.contains(s)).collect();
        let r = ResponseFunction::with_ml(2, 2, 2, vec![a, b]).unwrap();
        assert_eq!(r.distortions(), vec![ratio(5, 16), ratio(5, 16)]);
        assert_eq!(r.rate(), ratio(1, 2));
    }

    #[test]
    fn compressor_one_rate() {
        let r = rf(
            1,
            4,
            &[
                &["0000", "0001", "1001", "0101", "0011"],
                &["1110", "1101", "1011", "0111", "1111"],
                &["1000"],
                &["0100"],
                &["1100"],
                &["0010"],
                &["1010"],
                &["0110"],
            ],
        );
        assert_eq!(r.rate(), ratio(21, 32));
        assert_eq!(r.distortions(), vec![ratio(1, 8)]);
    }

    #[test]
    fn invalid_partitions_rejected() {
        let p = |m: Vec<u64>| Part { members: m, reconstructions: vec![vec![0], vec![0]] };
        assert!(ResponseFunction::new(2, 2, 1, vec![p(vec![0, 1]), p(vec![2])]).is_err());
        assert!(ResponseFunction::new(2, 2, 1, vec![p(vec![0, 1, 2]), p(vec![2, 3])]).is_err());
        assert!(ResponseFunction::new(2, 2, 1, vec![p(vec![0, 1, 2, 3]), p(vec![])]).is_err());
        assert!(ResponseFunction::new(2, 30, 1, vec![]).is_err());
    }

    #[test]
    fn json_round_trip_and_format() {
        let r = rf(2, 1, &[&["00", "11"], &["01"], &["10"]]);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains(r#""members":["00","11"]"#), "{s}");
        let back: ResponseFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
        let bad = r#"{"alphabet_size":2,"num_files":1,"file_len":1,"parts":[{"members":["2"],"reconstructions":["0"]}]}"#;
        assert!(serde_json::from_str::<ResponseFunction>(bad).is_err());
    }

    #[test]
    fn ternary_alphabet() {
        // one file of one ternary symbol; merge 0 and 1
        let r = ResponseFunction::with_ml(3, 1, 1, vec![vec![0, 1], vec![2]]).unwrap();
        assert_eq!(r.distortions(), vec![ratio(1, 3)]);
        assert_eq!(r.rate(), ratio(1, 1));
        let m = DistortionMeasure::Matrix(vec![
            vec![int(0), int(2), int(2)],
            vec![int(2), int(0), int(2)],
            vec![int(2), int(2), int(0)],
        ]);
        assert_eq!(r.distortions_with(&m), vec![ratio(2, 3)]);
    }
}
