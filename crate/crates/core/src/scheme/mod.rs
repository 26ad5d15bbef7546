//! Concrete schemes: a query distribution with one response per query, exact
//! evaluation, composition constructions, symmetrization and Monte Carlo checks.

mod response;
mod simulate;

pub use response::{permute_table, restrict_to_zero_files, Composite, Response, DEFAULT_JOINT_CAP};
pub use simulate::{simulate, SimReport};

use num::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::QueryDistribution;
use crate::numeric::{int, rationalize, serde_rational, serde_rational_vec, Rational};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    /// P(q|m) for every file m.
    #[serde(with = "serde_rational_vec")]
    pub p_given_m: Vec<Rational>,
    pub response: Response,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub alphabet_size: u32,
    pub num_files: usize,
    pub file_len: usize,
    pub queries: Vec<Query>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(with = "serde_rational")]
    pub rate: Rational,
    #[serde(with = "serde_rational")]
    pub distortion: Rational,
    #[serde(with = "serde_rational_vec")]
    pub per_file_distortion: Vec<Rational>,
    #[serde(with = "serde_rational")]
    pub leakage: Rational,
}

impl EvalReport {
    pub fn as_f64(&self) -> (f64, f64, f64) {
        use crate::numeric::rat_to_f64;
        (rat_to_f64(&self.rate), rat_to_f64(&self.distortion), rat_to_f64(&self.leakage))
    }
}

impl Scheme {
    pub fn new(alphabet_size: u32, num_files: usize, file_len: usize, queries: Vec<Query>) -> Result<Self> {
        let s = Self { alphabet_size, num_files, file_len, queries };
        s.validate()?;
        Ok(s)
    }

    /// One query sent for every file.
    pub fn single(response: Response) -> Result<Self> {
        let m = response.num_files();
        let q = Query { id: "0".into(), p_given_m: vec![int(1); m], response };
        Self::new(q.response.alphabet_size(), m, q.response.file_len(), vec![q])
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries.is_empty() {
            return Err(Error::Invalid("scheme has no queries".into()));
        }
        let mut sums = vec![Rational::zero(); self.num_files];
        for q in &self.queries {
            if q.p_given_m.len() != self.num_files {
                return Err(Error::Dimension(format!("query {} has {} probabilities for {} files", q.id, q.p_given_m.len(), self.num_files)));
            }
            let r = &q.response;
            r.validate()?;
            if (r.alphabet_size(), r.num_files(), r.file_len()) != (self.alphabet_size, self.num_files, self.file_len) {
                return Err(Error::Dimension(format!(
                    "query {} answers (|X|, M, β) = ({}, {}, {}), scheme is ({}, {}, {})",
                    q.id,
                    r.alphabet_size(),
                    r.num_files(),
                    r.file_len(),
                    self.alphabet_size,
                    self.num_files,
                    self.file_len
                )));
            }
            for (s, p) in sums.iter_mut().zip(&q.p_given_m) {
                if p < &Rational::zero() {
                    return Err(Error::Invalid(format!("negative probability in query {}", q.id)));
                }
                *s += p;
            }
        }
        if let Some(m) = sums.iter().position(|s| !s.is_one()) {
            return Err(Error::Invalid(format!("P(q|m) does not sum to 1 for file {m}")));
        }
        Ok(())
    }

    pub fn query_distribution(&self) -> QueryDistribution<Rational> {
        let rows = (0..self.num_files).map(|m| self.queries.iter().map(|q| q.p_given_m[m].clone()).collect()).collect();
        QueryDistribution::new(rows).expect("validated scheme")
    }

    pub fn leakage(&self) -> Rational {
        self.query_distribution().leakage()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scheme: Scheme = serde_json::from_str(s)?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Exact (R, D, L): R = (1/M)Σ P(q|m)R_q, D^(m) = Σ_q P(q|m)D_q^(m).
pub fn evaluate(scheme: &Scheme) -> Result<EvalReport> {
    scheme.validate()?;
    let m = scheme.num_files;
    let mut rate = Rational::zero();
    let mut per = vec![Rational::zero(); m];
    for q in &scheme.queries {
        if q.p_given_m.iter().all(|p| p.is_zero()) {
            continue;
        }
        let r = q.response.rate()?;
        let d = q.response.distortions()?;
        for f in 0..m {
            rate += &q.p_given_m[f] * &r;
            per[f] += &q.p_given_m[f] * &d[f];
        }
    }
    let mm = int(m as i64);
    let distortion = per.iter().fold(Rational::zero(), |a, x| a + x) / &mm;
    Ok(EvalReport { rate: rate / mm, distortion, per_file_distortion: per, leakage: scheme.leakage() })
}

/// Splits every file into `t` blocks of the current length, each answered by the
/// original responses.
pub fn block_split(scheme: &Scheme, t: usize) -> Result<Scheme> {
    if t == 0 {
        return Err(Error::Invalid("block count must be at least 1".into()));
    }
    if t == 1 {
        return Ok(scheme.clone());
    }
    let queries = scheme
        .queries
        .iter()
        .map(|q| Query { id: q.id.clone(), p_given_m: q.p_given_m.clone(), response: Response::blocked(q.response.clone(), t, false) })
        .collect();
    Scheme::new(scheme.alphabet_size, scheme.num_files, scheme.file_len * t, queries)
}

/// Codes the tuple of block answers of every blocked response with one Huffman code
/// over the product alphabet (at most `cap` symbols).
pub fn reencode_joint(scheme: &Scheme, cap: u64) -> Result<Scheme> {
    let mut out = scheme.clone();
    for q in out.queries.iter_mut() {
        if let Response::Composite(Composite::Blocked { inner, blocks, joint }) = &mut q.response {
            response::joint_alphabet(inner, *blocks, cap)?;
            *joint = true;
        } else {
            return Err(Error::Invalid(format!("query {} is not block split", q.id)));
        }
    }
    Ok(out)
}

/// Like [`reencode_joint`], but responses that are not block split or whose
/// product alphabet exceeds `cap` keep their per-block codes. Returns the scheme
/// and the number of responses left unchanged.
pub fn reencode_joint_within(scheme: &Scheme, cap: u64) -> Result<(Scheme, usize)> {
    let mut out = scheme.clone();
    let mut skipped = 0;
    for q in out.queries.iter_mut() {
        match &mut q.response {
            Response::Composite(Composite::Blocked { inner, blocks, joint }) if response::joint_alphabet(inner, *blocks, cap).is_ok() => {
                *joint = true;
            }
            _ => skipped += 1,
        }
    }
    Ok((out, skipped))
}

/// M = G·M₀ files in G groups. The user sends the small scheme's query for its
/// within-group index, and every group is answered by the same small response.
/// The server sees only the small query, so L = L₀/G, R = G·R₀, D = D₀.
///
/// With `pad_to`, the last group may be partial: the missing files are treated as
/// all-zero dummies that are never requested (tabulated responses only).
pub fn file_subset_compose(small: &Scheme, groups: usize, pad_to: Option<usize>) -> Result<Scheme> {
    if groups == 0 {
        return Err(Error::Invalid("need at least one group".into()));
    }
    let m0 = small.num_files;
    let full = groups * m0;
    let m = pad_to.unwrap_or(full);
    if m > full || m + m0 <= full {
        return Err(Error::Invalid(format!("{m} files do not fill {groups} groups of {m0}")));
    }
    if groups == 1 && m == m0 {
        return Ok(small.clone());
    }
    let last = m - (groups - 1) * m0;
    let mut queries = Vec::with_capacity(small.queries.len());
    for q in &small.queries {
        let mut factors = vec![q.response.clone(); groups - 1];
        factors.push(if last == m0 { q.response.clone() } else { pad_response(&q.response, last)? });
        let p_given_m = (0..m).map(|f| q.p_given_m[f % m0].clone()).collect();
        queries.push(Query { id: q.id.clone(), p_given_m, response: Response::product(factors) });
    }
    Scheme::new(small.alphabet_size, m, small.file_len, queries)
}

fn pad_response(r: &Response, keep: usize) -> Result<Response> {
    match r {
        Response::Table(rf) => Ok(Response::Table(restrict_to_zero_files(rf, keep)?)),
        Response::Composite(Composite::Blocked { inner, blocks, joint }) => {
            Ok(Response::blocked(pad_response(inner, keep)?, *blocks, *joint))
        }
        _ => Err(Error::Unsupported("padding needs tabulated (optionally block split) responses".into())),
    }
}

/// M = G·M₀ files where the query reveals the group: group g gets the small
/// response, all other groups are sent nothing. L = L₀, R = R₀, D = D₀.
pub fn select_compose(small: &Scheme, groups: usize) -> Result<Scheme> {
    if groups == 0 {
        return Err(Error::Invalid("need at least one group".into()));
    }
    if groups == 1 {
        return Ok(small.clone());
    }
    let m0 = small.num_files;
    let blank = Response::blank(small.alphabet_size, m0, small.file_len);
    let mut queries = Vec::new();
    for g in 0..groups {
        for q in &small.queries {
            let mut factors = vec![blank.clone(); groups];
            factors[g] = q.response.clone();
            let mut p_given_m = vec![int(0); groups * m0];
            p_given_m[g * m0..(g + 1) * m0].clone_from_slice(&q.p_given_m);
            queries.push(Query { id: format!("{g}.{}", q.id), p_given_m, response: Response::product(factors) });
        }
    }
    Scheme::new(small.alphabet_size, groups * m0, small.file_len, queries)
}

/// Disjoint union of the schemes' queries with P(q|m) scaled by the weights.
pub fn time_share(schemes: &[Scheme], weights: &[Rational]) -> Result<Scheme> {
    let first = schemes.first().ok_or_else(|| Error::Invalid("nothing to time-share".into()))?;
    if schemes.len() != weights.len() {
        return Err(Error::Dimension(format!("{} schemes but {} weights", schemes.len(), weights.len())));
    }
    if weights.iter().any(|w| w < &Rational::zero()) || !weights.iter().fold(Rational::zero(), |a, w| a + w).is_one() {
        return Err(Error::Invalid("weights must be nonnegative and sum to 1".into()));
    }
    let mut queries = Vec::new();
    for (i, (s, w)) in schemes.iter().zip(weights).enumerate() {
        if (s.alphabet_size, s.num_files, s.file_len) != (first.alphabet_size, first.num_files, first.file_len) {
            return Err(Error::Dimension(format!("scheme {i} differs in (|X|, M, β)")));
        }
        if w.is_zero() {
            continue;
        }
        for q in &s.queries {
            queries.push(Query {
                id: if schemes.len() == 1 { q.id.clone() } else { format!("{i}.{}", q.id) },
                p_given_m: q.p_given_m.iter().map(|p| p * w).collect(),
                response: q.response.clone(),
            });
        }
    }
    Scheme::new(first.alphabet_size, first.num_files, first.file_len, queries)
}

/// Equal-weight mixture of the file-relabeled copies of a scheme: all M! relabelings
/// for M ≤ 5, the M cyclic shifts otherwise. Per-file distortions become equal;
/// R, L and the average distortion are unchanged.
pub fn symmetrize(scheme: &Scheme) -> Result<Scheme> {
    let m = scheme.num_files;
    let perms: Vec<Vec<usize>> = if m <= 5 {
        crate::response_enum::permutations(m)
    } else {
        (0..m).map(|s| (0..m).map(|i| (i + s) % m).collect()).collect()
    };
    let w = Rational::new(1.into(), (perms.len() as u64).into());
    let mut queries = Vec::new();
    for (pi, perm) in perms.iter().enumerate() {
        let identity = perm.iter().enumerate().all(|(i, &p)| i == p);
        for q in &scheme.queries {
            // database file perm[i] plays the role of file i
            let mut p_given_m = vec![int(0); m];
            for (i, &p) in perm.iter().enumerate() {
                p_given_m[p] = &q.p_given_m[i] * &w;
            }
            let response = match &q.response {
                _ if identity => q.response.clone(),
                Response::Table(rf) => Response::Table(permute_table(rf, perm)?),
                r => Response::permuted(r.clone(), perm.clone()),
            };
            queries.push(Query { id: format!("{pi}.{}", q.id), p_given_m, response });
        }
    }
    Scheme::new(scheme.alphabet_size, m, scheme.file_len, queries)
}

/// Rational image of a float query distribution: entries are rationalized with
/// denominators up to 2^40 and the largest entry of each row absorbs the rounding.
pub fn rationalize_distribution(p: &QueryDistribution<f64>) -> Result<QueryDistribution<Rational>> {
    let rows = p
        .rows()
        .iter()
        .map(|row| {
            let mut r: Vec<Rational> = row.iter().map(|&x| if x <= 1e-12 { int(0) } else { rationalize(x, 1 << 40) }).collect();
            let big = row.iter().enumerate().fold(0, |b, (i, x)| if *x > row[b] { i } else { b });
            let rest = r.iter().enumerate().filter(|(i, _)| *i != big).fold(Rational::zero(), |a, (_, x)| a + x);
            r[big] = Rational::one() - rest;
            r
        })
        .collect();
    QueryDistribution::new(rows)
}

/// Scheme realizing a solved LP over a pool of responses; queries with zero
/// probability for every file are dropped.
pub fn scheme_from_distribution(pool: &[Response], p: &QueryDistribution<Rational>) -> Result<Scheme> {
    if pool.len() != p.num_queries() {
        return Err(Error::Dimension(format!("{} responses for {} queries", pool.len(), p.num_queries())));
    }
    let m = p.num_files();
    let queries = pool
        .iter()
        .enumerate()
        .filter(|(q, _)| (0..m).any(|f| !p.get(f, *q).is_zero()))
        .map(|(q, r)| Query { id: q.to_string(), p_given_m: (0..m).map(|f| p.get(f, q).clone()).collect(), response: r.clone() })
        .collect();
    let first = &pool[0];
    Scheme::new(first.alphabet_size(), m, first.file_len(), queries)
}
