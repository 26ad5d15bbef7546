//! Response trees: tabulated response functions plus the structural
//! constructions (blocks, file groups, file relabeling) that keep large
//! schemes evaluable without tabulating the whole database.

use num::{BigUint, One};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{int, ratio, Rational};
use crate::source_coding::{digits_to_state, huffman_lengths, ResponseFunction};

/// Largest product alphabet accepted by joint re-encoding.
pub const DEFAULT_JOINT_CAP: u64 = 1 << 20;
/// Hard limit on any jointly coded product alphabet.
pub const MAX_JOINT_ALPHABET: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Table(ResponseFunction),
    Composite(Composite),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Composite {
    /// Files of length `blocks·β`; the inner response answers each block separately.
    /// With `joint`, the tuple of block answers is Huffman coded as one symbol.
    Blocked { inner: Box<Response>, blocks: usize, joint: bool },
    /// Factors answer consecutive groups of files; answers coded separately.
    Product { factors: Vec<Response> },
    /// Inner file `i` is database file `perm[i]`.
    Permuted { inner: Box<Response>, perm: Vec<usize> },
    /// Sends nothing; every file is reconstructed as all zeros.
    Blank { alphabet_size: u32, num_files: usize, file_len: usize },
}

impl From<ResponseFunction> for Response {
    fn from(rf: ResponseFunction) -> Self {
        Response::Table(rf)
    }
}

impl Response {
    pub fn blocked(inner: Response, blocks: usize, joint: bool) -> Self {
        Response::Composite(Composite::Blocked { inner: Box::new(inner), blocks, joint })
    }

    pub fn product(factors: Vec<Response>) -> Self {
        Response::Composite(Composite::Product { factors })
    }

    pub fn permuted(inner: Response, perm: Vec<usize>) -> Self {
        Response::Composite(Composite::Permuted { inner: Box::new(inner), perm })
    }

    pub fn blank(alphabet_size: u32, num_files: usize, file_len: usize) -> Self {
        Response::Composite(Composite::Blank { alphabet_size, num_files, file_len })
    }

    pub fn alphabet_size(&self) -> u32 {
        match self {
            Response::Table(rf) => rf.alphabet_size(),
            Response::Composite(c) => match c {
                Composite::Blocked { inner, .. } | Composite::Permuted { inner, .. } => inner.alphabet_size(),
                Composite::Product { factors } => factors.first().map_or(0, |f| f.alphabet_size()),
                Composite::Blank { alphabet_size, .. } => *alphabet_size,
            },
        }
    }

    pub fn num_files(&self) -> usize {
        match self {
            Response::Table(rf) => rf.num_files(),
            Response::Composite(c) => match c {
                Composite::Blocked { inner, .. } | Composite::Permuted { inner, .. } => inner.num_files(),
                Composite::Product { factors } => factors.iter().map(|f| f.num_files()).sum(),
                Composite::Blank { num_files, .. } => *num_files,
            },
        }
    }

    pub fn file_len(&self) -> usize {
        match self {
            Response::Table(rf) => rf.file_len(),
            Response::Composite(c) => match c {
                Composite::Blocked { inner, blocks, .. } => inner.file_len() * blocks,
                Composite::Permuted { inner, .. } => inner.file_len(),
                Composite::Product { factors } => factors.first().map_or(0, |f| f.file_len()),
                Composite::Blank { file_len, .. } => *file_len,
            },
        }
    }

    /// Checks internal consistency (matching factor dimensions, valid permutations,
    /// joint blocks over a table within the alphabet cap).
    pub fn validate(&self) -> Result<()> {
        match self {
            Response::Table(_) => Ok(()),
            Response::Composite(c) => match c {
                Composite::Blocked { inner, blocks, joint } => {
                    if *blocks == 0 {
                        return Err(Error::Invalid("block count must be positive".into()));
                    }
                    inner.validate()?;
                    if *joint {
                        joint_alphabet(inner, *blocks, MAX_JOINT_ALPHABET)?;
                    }
                    Ok(())
                }
                Composite::Product { factors } => {
                    let first = factors.first().ok_or_else(|| Error::Invalid("empty product".into()))?;
                    for f in factors {
                        f.validate()?;
                        if f.file_len() != first.file_len() || f.alphabet_size() != first.alphabet_size() {
                            return Err(Error::Dimension("product factors differ in file length or alphabet".into()));
                        }
                    }
                    Ok(())
                }
                Composite::Permuted { inner, perm } => {
                    inner.validate()?;
                    let mut seen = vec![false; perm.len()];
                    if perm.len() != inner.num_files() || perm.iter().any(|&p| p >= perm.len() || std::mem::replace(&mut seen[p], true)) {
                        return Err(Error::Invalid(format!("{perm:?} is not a permutation of the files")));
                    }
                    Ok(())
                }
                Composite::Blank { alphabet_size, num_files, file_len } => {
                    if *alphabet_size < 2 || *num_files == 0 || *file_len == 0 {
                        return Err(Error::Invalid("blank response needs alphabet ≥ 2, M ≥ 1, β ≥ 1".into()));
                    }
                    Ok(())
                }
            },
        }
    }

    /// Expected answer length per file symbol.
    pub fn rate(&self) -> Result<Rational> {
        match self {
            Response::Table(rf) => Ok(rf.rate()),
            Response::Composite(c) => match c {
                Composite::Blocked { inner, joint: false, .. } => inner.rate(),
                Composite::Blocked { inner, blocks, joint: true } => {
                    let (weights, lengths) = joint_code(inner, *blocks, MAX_JOINT_ALPHABET)?;
                    let total: BigUint = weights.iter().sum();
                    let bits: BigUint = weights.iter().zip(&lengths).map(|(w, &l)| w * BigUint::from(l)).sum();
                    let beta = inner.file_len() * blocks;
                    Ok(Rational::new(bits.into(), (total * BigUint::from(beta)).into()))
                }
                Composite::Product { factors } => {
                    // composed schemes repeat one factor many times; rate it once
                    let mut total = int(0);
                    let mut last: Option<(&Response, Rational)> = None;
                    for f in factors {
                        let r = match &last {
                            Some((g, r)) if *g == f => r.clone(),
                            _ => f.rate()?,
                        };
                        total += &r;
                        last = Some((f, r));
                    }
                    Ok(total)
                }
                Composite::Permuted { inner, .. } => inner.rate(),
                Composite::Blank { .. } => Ok(int(0)),
            },
        }
    }

    /// Hamming distortion of every file, uniform database.
    pub fn distortions(&self) -> Result<Vec<Rational>> {
        match self {
            Response::Table(rf) => Ok(rf.distortions()),
            Response::Composite(c) => match c {
                Composite::Blocked { inner, .. } => inner.distortions(),
                Composite::Product { factors } => {
                    let mut v = Vec::new();
                    for f in factors {
                        v.extend(f.distortions()?);
                    }
                    Ok(v)
                }
                Composite::Permuted { inner, perm } => {
                    let d = inner.distortions()?;
                    let mut out = vec![int(0); d.len()];
                    for (i, x) in d.into_iter().enumerate() {
                        out[perm[i]] = x;
                    }
                    Ok(out)
                }
                Composite::Blank { alphabet_size, num_files, .. } => {
                    let k = *alphabet_size as i64;
                    Ok(vec![ratio(k - 1, k); *num_files])
                }
            },
        }
    }
}

pub(crate) fn joint_alphabet(inner: &Response, blocks: usize, cap: u64) -> Result<u64> {
    let Response::Table(rf) = inner else {
        return Err(Error::Unsupported("joint re-encoding needs a tabulated block response".into()));
    };
    let parts = rf.parts().len() as u64;
    parts
        .checked_pow(blocks as u32)
        .filter(|&n| n <= cap)
        .ok_or_else(|| Error::Limit(format!("{parts}^{blocks} joint answers exceed the cap {cap}")))
}

/// Product-alphabet weights (unnormalized) and Huffman lengths; the joint answer
/// index is the block answers read as base-(#parts) digits, first block most significant.
pub(crate) fn joint_code(inner: &Response, blocks: usize, cap: u64) -> Result<(Vec<BigUint>, Vec<u32>)> {
    let n = joint_alphabet(inner, blocks, cap)? as usize;
    let Response::Table(rf) = inner else { unreachable!() };
    let sizes: Vec<BigUint> = rf.part_sizes().into_iter().map(BigUint::from).collect();
    let p = sizes.len();
    let mut weights = vec![BigUint::one(); n];
    for (idx, w) in weights.iter_mut().enumerate() {
        let mut r = idx;
        for _ in 0..blocks {
            *w *= &sizes[r % p];
            r /= p;
        }
    }
    let lengths = huffman_lengths(&weights)?;
    Ok((weights, lengths))
}

/// A response with code lengths precomputed, for sampling answers.
pub(crate) enum Prepared {
    Table { rf: ResponseFunction, lengths: Vec<u32> },
    Blocked { inner: Box<Prepared>, blocks: usize, block_len: usize, joint: Option<(usize, Vec<u32>)> },
    Product { factors: Vec<(usize, Prepared)> },
    Permuted { inner: Box<Prepared>, perm: Vec<usize> },
    Blank,
}

impl Prepared {
    pub(crate) fn new(r: &Response) -> Result<Self> {
        Ok(match r {
            Response::Table(rf) => Prepared::Table { rf: rf.clone(), lengths: rf.code_lengths() },
            Response::Composite(c) => match c {
                Composite::Blocked { inner, blocks, joint } => Prepared::Blocked {
                    inner: Box::new(Prepared::new(inner)?),
                    blocks: *blocks,
                    block_len: inner.file_len(),
                    joint: if *joint {
                        let parts = match &**inner {
                            Response::Table(rf) => rf.parts().len(),
                            _ => 0,
                        };
                        Some((parts, joint_code(inner, *blocks, MAX_JOINT_ALPHABET)?.1))
                    } else {
                        None
                    },
                },
                Composite::Product { factors } => Prepared::Product {
                    factors: factors.iter().map(|f| Ok((f.num_files(), Prepared::new(f)?))).collect::<Result<_>>()?,
                },
                Composite::Permuted { inner, perm } => {
                    Prepared::Permuted { inner: Box::new(Prepared::new(inner)?), perm: perm.clone() }
                }
                Composite::Blank { .. } => Prepared::Blank,
            },
        })
    }

    /// Answers a database and returns (codeword bits, answer index for tables,
    /// reconstructions of all files written into `out`).
    pub(crate) fn answer(&self, files: &[&[u8]], out: &mut [Vec<u8>]) -> (u64, usize) {
        match self {
            Prepared::Table { rf, lengths } => {
                let k = rf.alphabet_size();
                let digits: Vec<u8> = files.iter().flat_map(|f| f.iter().copied()).collect();
                let part = rf.part_of(digits_to_state(k, &digits));
                for (o, r) in out.iter_mut().zip(&rf.parts()[part].reconstructions) {
                    o.clear();
                    o.extend_from_slice(r);
                }
                (lengths[part] as u64, part)
            }
            Prepared::Blocked { inner, blocks, block_len, joint } => {
                let mut bits = 0;
                let mut index = 0usize;
                let mut sub_out: Vec<Vec<u8>> = vec![Vec::new(); files.len()];
                for o in out.iter_mut() {
                    o.clear();
                }
                for b in 0..*blocks {
                    let range = b * block_len..(b + 1) * block_len;
                    let sub: Vec<&[u8]> = files.iter().map(|f| &f[range.clone()]).collect();
                    let (l, part) = inner.answer(&sub, &mut sub_out);
                    bits += l;
                    if let Some((p, _)) = joint {
                        index = index * p + part;
                    }
                    for (o, s) in out.iter_mut().zip(&sub_out) {
                        o.extend_from_slice(s);
                    }
                }
                match joint {
                    Some((_, lengths)) => (lengths[index] as u64, index),
                    None => (bits, 0),
                }
            }
            Prepared::Product { factors } => {
                let mut bits = 0;
                let mut start = 0;
                for (n, f) in factors {
                    let (l, _) = f.answer(&files[start..start + n], &mut out[start..start + n]);
                    bits += l;
                    start += n;
                }
                (bits, 0)
            }
            Prepared::Permuted { inner, perm } => {
                let sub: Vec<&[u8]> = perm.iter().map(|&p| files[p]).collect();
                let mut sub_out: Vec<Vec<u8>> = vec![Vec::new(); perm.len()];
                let (l, _) = inner.answer(&sub, &mut sub_out);
                for (i, s) in sub_out.into_iter().enumerate() {
                    out[perm[i]] = s;
                }
                (l, 0)
            }
            Prepared::Blank => {
                for (o, f) in out.iter_mut().zip(files) {
                    o.clear();
                    o.resize(f.len(), 0);
                }
                (0, 0)
            }
        }
    }
}

/// Restricts a table to the states whose dropped files are all zero, keeping
/// the first `keep` files. Parts that become empty are removed.
pub fn restrict_to_zero_files(rf: &ResponseFunction, keep: usize) -> Result<ResponseFunction> {
    let m = rf.num_files();
    if keep == 0 || keep > m {
        return Err(Error::Invalid(format!("cannot keep {keep} of {m} files")));
    }
    let k = rf.alphabet_size() as u64;
    let drop_digits = ((m - keep) * rf.file_len()) as u32;
    let shift = k.pow(drop_digits);
    let mut parts = Vec::new();
    for p in rf.parts() {
        let members: Vec<u64> = p.members.iter().filter(|&&s| s % shift == 0).map(|&s| s / shift).collect();
        if !members.is_empty() {
            parts.push(crate::source_coding::Part { members, reconstructions: p.reconstructions[..keep].to_vec() });
        }
    }
    ResponseFunction::new(rf.alphabet_size(), keep, rf.file_len(), parts)
}

/// The table answering as `rf` does when inner file `i` is database file `perm[i]`.
pub fn permute_table(rf: &ResponseFunction, perm: &[usize]) -> Result<ResponseFunction> {
    let m = rf.num_files();
    let beta = rf.file_len();
    let k = rf.alphabet_size();
    if perm.len() != m {
        return Err(Error::Dimension(format!("permutation of {} files for a {m}-file table", perm.len())));
    }
    let map = |s: u64| {
        let d = crate::source_coding::state_digits(k, m * beta, s);
        let mut out = vec![0u8; m * beta];
        for (i, &p) in perm.iter().enumerate() {
            out[p * beta..(p + 1) * beta].copy_from_slice(&d[i * beta..(i + 1) * beta]);
        }
        digits_to_state(k, &out)
    };
    let parts = rf
        .parts()
        .iter()
        .map(|p| {
            let mut reconstructions = vec![Vec::new(); m];
            for (i, &q) in perm.iter().enumerate() {
                reconstructions[q] = p.reconstructions[i].clone();
            }
            crate::source_coding::Part { members: p.members.iter().map(|&s| map(s)).collect(), reconstructions }
        })
        .collect();
    ResponseFunction::new(k, m, beta, parts)
}
