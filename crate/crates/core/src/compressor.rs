//! Small lossy compressors: a fixed catalog on 4-bit inputs, a simulated-annealing
//! search over balanced maps, and the random-coding bound for finite block lengths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{rat_to_f64, Rational};
use crate::ratedist::{lower_hull, TradeoffCurve, TradeoffPoint};
use crate::scheme::Response;
use crate::source_coding::{Part, ResponseFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Codebook {
    /// Explicit partition with reconstructions, as a one-file response.
    Partition { response: ResponseFunction },
    /// `bins[x]` is the bin of input `x`; all bins have the same size.
    Balanced { bins: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressorSpec {
    pub name: String,
    pub beta_in: usize,
    pub codebook: Codebook,
    pub rate: f64,
    pub distortion: f64,
}

impl CompressorSpec {
    /// The compressor as a one-file response (majority reconstruction for balanced maps).
    pub fn response(&self) -> Result<ResponseFunction> {
        match &self.codebook {
            Codebook::Partition { response } => Ok(response.clone()),
            Codebook::Balanced { bins } => ResponseFunction::from_labels(2, 1, self.beta_in, bins),
        }
    }

    /// Exact (rate, distortion) recomputed from the codebook. Balanced maps are
    /// coded with fixed-length indices, which is also their Huffman length.
    pub fn exact_point(&self) -> Result<(Rational, Rational)> {
        let rf = self.response()?;
        Ok((rf.rate(), rf.distortions()[0].clone()))
    }
}

fn parse_bits(s: &str) -> u64 {
    u64::from_str_radix(s, 2).expect("bit string")
}

fn partition(beta: usize, parts: &[(&[&str], &str)]) -> ResponseFunction {
    let parts = parts
        .iter()
        .map(|(members, rec)| Part {
            members: members.iter().map(|s| parse_bits(s)).collect(),
            reconstructions: vec![rec.bytes().map(|b| b - b'0').collect()],
        })
        .collect();
    ResponseFunction::new(2, 1, beta, parts).expect("catalog entry")
}

fn spec_from(name: &str, response: ResponseFunction) -> CompressorSpec {
    let rate = rat_to_f64(&response.rate());
    let distortion = rat_to_f64(&response.distortions()[0]);
    CompressorSpec { name: name.into(), beta_in: response.file_len(), codebook: Codebook::Partition { response }, rate, distortion }
}

fn singletons(beta: usize) -> ResponseFunction {
    let n = 1u64 << beta;
    let parts = (0..n)
        .map(|s| Part { members: vec![s], reconstructions: vec![(0..beta).map(|i| (s >> (beta - 1 - i) & 1) as u8).collect()] })
        .collect();
    ResponseFunction::new(2, 1, beta, parts).expect("lossless")
}

fn single_part(beta: usize) -> ResponseFunction {
    ResponseFunction::new(2, 1, beta, vec![Part { members: (0..1u64 << beta).collect(), reconstructions: vec![vec![0; beta]] }])
        .expect("constant")
}

/// Three 4-bit compressors with rates 21/32, 1/2, 1/4 plus the lossless and
/// constant compressors.
pub fn catalog() -> Vec<CompressorSpec> {
    let c1 = partition(
        4,
        &[
            (&["0000", "0001", "1001", "0101", "0011"], "0001"),
            (&["1110", "1101", "1011", "0111", "1111"], "1111"),
            (&["1000"], "1000"),
            (&["0100"], "0100"),
            (&["1100"], "1100"),
            (&["0010"], "0010"),
            (&["1010"], "1010"),
            (&["0110"], "0110"),
        ],
    );
    let c2 = partition(
        4,
        &[
            (&["0000", "0010", "1010", "0110", "0011"], "0010"),
            (&["1000", "0001", "1001", "1101", "1011"], "1001"),
            (&["0100", "1100", "1110"], "1100"),
            (&["0101", "0111", "1111"], "0111"),
        ],
    );
    let c3 = partition(
        4,
        &[
            (&["1100", "1010", "0110", "1110", "1111"], "1110"),
            (&["0000", "0001", "0010", "0011", "0100", "0101", "0111", "1000", "1001", "1011", "1101"], "0001"),
        ],
    );
    vec![
        spec_from("compressor-1", c1),
        spec_from("compressor-2", c2),
        spec_from("compressor-3", c3),
        spec_from("lossless", singletons(4)),
        spec_from("constant", single_part(4)),
    ]
}

/// Reads a one-file, 4-bit table as a response on two files of two bits each
/// (file 1 = the first two bits).
pub fn as_two_files(rf: &ResponseFunction) -> Result<ResponseFunction> {
    if rf.num_files() != 1 || rf.file_len() % 2 != 0 {
        return Err(Error::Invalid("need a one-file table of even length".into()));
    }
    let h = rf.file_len() / 2;
    let parts = rf
        .parts()
        .iter()
        .map(|p| {
            let r = &p.reconstructions[0];
            Part { members: p.members.clone(), reconstructions: vec![r[..h].to_vec(), r[h..].to_vec()] }
        })
        .collect();
    ResponseFunction::new(rf.alphabet_size(), 2, h, parts)
}

/// Response pool for M = 2, β = 2: the five catalog compressors on the joint
/// database, plus "one file exactly, nothing of the other" for each file.
pub fn catalog_pool_two_files() -> Vec<(String, Response)> {
    let mut pool: Vec<(String, Response)> = catalog()
        .into_iter()
        .map(|c| {
            let rf = c.response().expect("catalog");
            (c.name, Response::Table(as_two_files(&rf).expect("4-bit")))
        })
        .collect();
    let exact = Response::Table(singletons(2));
    let none = Response::Table(single_part(2));
    pool.push(("file-1-only".into(), Response::product(vec![exact.clone(), none.clone()])));
    pool.push(("file-2-only".into(), Response::product(vec![none, exact])));
    pool
}

/// Exact (R, D1, ..., DM) points of a response pool.
pub fn pool_points(pool: &[(String, Response)]) -> Result<Vec<Vec<Rational>>> {
    pool.iter()
        .map(|(_, r)| {
            let mut v = vec![r.rate()?];
            v.extend(r.distortions()?);
            Ok(v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaConfig {
    pub iterations: u64,
    pub restarts: u32,
    pub seed: u64,
    /// T₀ as a fraction of the initial distortion.
    pub t0_factor: f64,
    /// T_end as a fraction of T₀.
    pub t_end_factor: f64,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self { iterations: 1_000_000, restarts: 32, seed: 0, t0_factor: 0.1, t_end_factor: 1e-4 }
    }
}

const DRIFT_CHECK: u64 = 10_000;

struct Annealer {
    beta: usize,
    bin_size: u32,
    members: Vec<Vec<u32>>,
    /// ones[bin * β + bit]
    ones: Vec<u32>,
    errors: u64,
}

impl Annealer {
    fn new(beta: usize, bin_bits: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = 1u32 << beta;
        let bins = 1usize << bin_bits;
        let mut inputs: Vec<u32> = (0..n).collect();
        for i in (1..inputs.len()).rev() {
            let j = rng.gen_range(0..=i);
            inputs.swap(i, j);
        }
        let bin_size = n >> bin_bits;
        let members: Vec<Vec<u32>> = inputs.chunks(bin_size as usize).map(|c| c.to_vec()).collect();
        debug_assert_eq!(members.len(), bins);
        let mut a = Self { beta, bin_size, members, ones: Vec::new(), errors: 0 };
        a.recount();
        a
    }

    fn recount(&mut self) {
        let beta = self.beta;
        self.ones = vec![0; self.members.len() * beta];
        for (b, ms) in self.members.iter().enumerate() {
            for &x in ms {
                for i in 0..beta {
                    self.ones[b * beta + i] += x >> (beta - 1 - i) & 1;
                }
            }
        }
        self.errors = self.count_errors();
    }

    fn count_errors(&self) -> u64 {
        self.ones.iter().map(|&o| o.min(self.bin_size - o) as u64).sum()
    }

    /// Change in total bit errors if `x` (bin a) and `y` (bin b) swap bins.
    fn delta(&self, a: usize, b: usize, x: u32, y: u32) -> i64 {
        let beta = self.beta;
        let s = self.bin_size as i64;
        let mut diff = x ^ y;
        let mut d = 0i64;
        while diff != 0 {
            let bit = diff.trailing_zeros() as usize;
            diff &= diff - 1;
            let i = beta - 1 - bit;
            let step = if y >> bit & 1 == 1 { 1i64 } else { -1 };
            let f = |o: i64| o.min(s - o);
            let oa = self.ones[a * beta + i] as i64;
            let ob = self.ones[b * beta + i] as i64;
            d += f(oa + step) - f(oa) + f(ob - step) - f(ob);
        }
        d
    }

    fn apply(&mut self, a: usize, i: usize, b: usize, j: usize, d: i64) {
        let beta = self.beta;
        let x = self.members[a][i];
        let y = self.members[b][j];
        let mut diff = x ^ y;
        while diff != 0 {
            let bit = diff.trailing_zeros() as usize;
            diff &= diff - 1;
            let k = beta - 1 - bit;
            if y >> bit & 1 == 1 {
                self.ones[a * beta + k] += 1;
                self.ones[b * beta + k] -= 1;
            } else {
                self.ones[a * beta + k] -= 1;
                self.ones[b * beta + k] += 1;
            }
        }
        self.members[a][i] = y;
        self.members[b][j] = x;
        self.errors = (self.errors as i64 + d) as u64;
    }

    fn labels(&self) -> Vec<u32> {
        let mut l = vec![0u32; 1 << self.beta];
        for (b, ms) in self.members.iter().enumerate() {
            for &x in ms {
                l[x as usize] = b as u32;
            }
        }
        l
    }
}

/// One annealing run; returns (best bit-error total, labels of the best map).
fn anneal(beta: usize, bin_bits: usize, cfg: &SaConfig, stream: u64) -> Result<(u64, Vec<u32>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut st = Annealer::new(beta, bin_bits, &mut rng);
    let bins = st.members.len();
    if bins < 2 || st.bin_size < 2 {
        return Ok((st.errors, st.labels()));
    }
    // large maps are too costly to snapshot on every improvement; their result
    // is the final state, which at T_end is effectively a greedy local optimum
    let snapshot = beta <= 12;
    let mut best = (st.errors, if snapshot { st.labels() } else { Vec::new() });
    let total = (beta as f64) * (1u64 << beta) as f64;
    // Δ is the change in the integer bit-error total, T₀ a fraction of the initial distortion
    let t0 = cfg.t0_factor * st.errors as f64 / total;
    let t_end = t0 * cfg.t_end_factor;
    let cool = if cfg.iterations > 1 { (t_end / t0).powf(1.0 / (cfg.iterations - 1) as f64) } else { 1.0 };
    let mut t = t0;
    for it in 0..cfg.iterations {
        let a = rng.gen_range(0..bins);
        let mut b = rng.gen_range(0..bins - 1);
        if b >= a {
            b += 1;
        }
        let i = rng.gen_range(0..st.bin_size as usize);
        let j = rng.gen_range(0..st.bin_size as usize);
        let d = st.delta(a, b, st.members[a][i], st.members[b][j]);
        if d <= 0 || (t > 0.0 && rng.gen::<f64>() < (-(d as f64) / t).exp()) {
            st.apply(a, i, b, j, d);
            if snapshot && st.errors < best.0 {
                best = (st.errors, st.labels());
            }
        }
        if (it + 1) % DRIFT_CHECK == 0 && st.count_errors() != st.errors {
            return Err(Error::Numerical("incremental distortion drifted from recount".into()));
        }
        t *= cool;
    }
    if !snapshot {
        best = (st.errors, st.labels());
    }
    let mut check = st;
    check.members = vec![Vec::new(); bins];
    for (x, &l) in best.1.iter().enumerate() {
        check.members[l as usize].push(x as u32);
    }
    check.recount();
    if check.errors != best.0 {
        return Err(Error::Numerical("best map does not reproduce its distortion".into()));
    }
    Ok(best)
}

/// Best balanced map from `restarts` annealing runs (run `i` uses RNG stream `i`).
pub fn sa_search(beta_in: usize, rate: f64, cfg: &SaConfig) -> Result<CompressorSpec> {
    if beta_in == 0 || beta_in > 24 {
        return Err(Error::Domain(format!("input length {beta_in} outside 1..=24")));
    }
    let b = rate * beta_in as f64;
    if !(0.0..=beta_in as f64).contains(&b) || (b - b.round()).abs() > 1e-9 {
        return Err(Error::Domain(format!("β·R = {b} is not an integer number of bin bits")));
    }
    let bin_bits = b.round() as usize;
    let runs: Vec<(u64, Vec<u32>)> =
        (0..cfg.restarts.max(1) as u64).into_par_iter().map(|r| anneal(beta_in, bin_bits, cfg, r)).collect::<Result<_>>()?;
    let (errors, labels) = runs.into_iter().min_by_key(|r| r.0).expect("at least one run");
    let distortion = errors as f64 / (beta_in as f64 * (1u64 << beta_in) as f64);
    Ok(CompressorSpec {
        name: format!("sa-{beta_in}-{bin_bits}"),
        beta_in,
        codebook: Codebook::Balanced { bins: labels },
        rate: bin_bits as f64 / beta_in as f64,
        distortion,
    })
}

/// Total bit errors of a balanced map under majority reconstruction.
pub fn balanced_map_errors(beta_in: usize, bins: &[u32]) -> Result<u64> {
    let n = 1usize << beta_in;
    if bins.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} inputs", bins.len())));
    }
    let k = bins.iter().max().map_or(0, |&m| m as usize + 1);
    let mut sizes = vec![0u64; k];
    let mut ones = vec![0u64; k * beta_in];
    for (x, &b) in bins.iter().enumerate() {
        sizes[b as usize] += 1;
        for i in 0..beta_in {
            ones[b as usize * beta_in + i] += (x >> (beta_in - 1 - i) & 1) as u64;
        }
    }
    if sizes.iter().any(|&s| s != sizes[0]) {
        return Err(Error::Invalid("map is not balanced".into()));
    }
    Ok(ones.iter().enumerate().map(|(j, &o)| o.min(sizes[j / beta_in] - o)).sum())
}

fn ln_binomials(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    for j in 0..n {
        v[j + 1] = v[j] + ((n - j) as f64).ln() - ((j + 1) as f64).ln();
    }
    v
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Average Hamming distortion of a random codebook with 2^{βR} uniform codewords:
/// (1/β) Σ_{k<β} (1 − 2^{−β} Σ_{j≤k} C(β, j))^{2^{βR}}, evaluated in the log domain.
pub fn kv_average_distortion(beta_in: usize, rate: f64) -> Result<f64> {
    if beta_in == 0 || !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("need β ≥ 1 and R in [0, 1], got β={beta_in}, R={rate}")));
    }
    let n = beta_in;
    let lnc = ln_binomials(n);
    let ln2 = std::f64::consts::LN_2;
    let codewords = (n as f64 * rate * ln2).exp();
    let mut total = 0.0;
    for k in 0..n {
        // ln(1 − x) with x = 2^{−n} S(n, k): log1p when x is small, the binomial
        // tail above k otherwise
        let ln_head = log_sum_exp(&lnc[..=k]) - n as f64 * ln2;
        let ln_tail = if ln_head < -1.0 { (-ln_head.exp()).ln_1p() } else { log_sum_exp(&lnc[k + 1..]) - n as f64 * ln2 };
        total += (codewords * ln_tail).exp();
    }
    Ok(total / n as f64)
}

/// Subset-request scheme with joint random coding of the N requested files at
/// per-symbol rate r: points (D = kv(N·β, r), R = N·r, L = 1/N) per N, reduced to
/// the nonincreasing lower hull over the rate grid.
pub fn kv_wpir_lc_curve(m: usize, beta: usize, n_values: &[usize], rate_grid: &[f64]) -> Result<Vec<TradeoffCurve>> {
    n_values
        .iter()
        .map(|&n| {
            if n == 0 || n > m {
                return Err(Error::Domain(format!("subset size {n} outside 1..={m}")));
            }
            let l = 1.0 / n as f64;
            let pts = rate_grid
                .iter()
                .map(|&r| Ok(TradeoffPoint { distortion: kv_average_distortion(n * beta, r)?, rate: n as f64 * r, leakage: l }))
                .collect::<Result<Vec<_>>>()?;
            Ok(TradeoffCurve::new(format!("kv-N{n}"), nonincreasing_hull(&pts)))
        })
        .collect()
}

/// Lower hull cut at its minimum rate, so rate is nonincreasing in distortion.
pub fn nonincreasing_hull(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let mut h = lower_hull(points);
    if let Some(i) = h.iter().enumerate().min_by(|a, b| a.1.rate.total_cmp(&b.1.rate)).map(|(i, _)| i) {
        h.truncate(i + 1);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{int, ratio};
    use crate::ratedist::RateDistortionCurve;

    #[test]
    fn catalog_values() {
        let want = [(ratio(21, 32), ratio(1, 8)), (ratio(1, 2), ratio(3, 16)), (ratio(1, 4), ratio(5, 16)), (int(1), int(0)), (int(0), ratio(1, 2))];
        for (c, w) in catalog().iter().zip(want) {
            assert_eq!(c.exact_point().unwrap(), w, "{}", c.name);
            assert_eq!(c.rate, rat_to_f64(&w.0));
        }
    }

    #[test]
    fn catalog_reconstructions_are_majority() {
        for c in catalog().iter().take(4) {
            let rf = c.response().unwrap();
            let blocks = rf.parts().iter().map(|p| p.members.clone()).collect();
            let ml = ResponseFunction::with_ml(2, 1, 4, blocks).unwrap();
            assert_eq!(ml.distortions(), rf.distortions(), "{}", c.name);
        }
    }

    #[test]
    fn two_file_pool_points() {
        let pts = pool_points(&catalog_pool_two_files()).unwrap();
        assert_eq!(pts.len(), 7);
        assert_eq!(pts[2], vec![ratio(1, 2), ratio(5, 16), ratio(5, 16)]);
        assert_eq!(pts[5], vec![int(1), int(0), ratio(1, 2)]);
        assert_eq!(pts[6], vec![int(1), ratio(1, 2), int(0)]);
        for p in &pts[..5] {
            assert_eq!(&p[1] + &p[2], int(2) * catalog_avg(p));
        }
    }

    fn catalog_avg(p: &[Rational]) -> Rational {
        (&p[1] + &p[2]) / int(2)
    }

    #[test]
    fn kv_small_cases() {
        assert!((kv_average_distortion(1, 0.0).unwrap() - 0.5).abs() < 1e-15);
        // one bit, two codewords: 1/4 chance both miss
        assert!((kv_average_distortion(1, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(kv_average_distortion(4, -0.1).is_err());
    }

    #[test]
    fn kv_monotone_and_above_limit() {
        let c = RateDistortionCurve::binary();
        for beta in [20usize, 320] {
            let mut prev = f64::INFINITY;
            for i in 1..=20 {
                let r = i as f64 / 20.0;
                let d = kv_average_distortion(beta, r).unwrap();
                assert!(d <= prev + 1e-15 && (0.0..=0.5).contains(&d));
                assert!(d >= c.inverse(r).unwrap() - 1e-12);
                prev = d;
            }
        }
        let d5 = kv_average_distortion(320, 0.5).unwrap();
        assert!(d5 > 0.11 && d5 < 0.5);
        assert!(kv_average_distortion(320, 0.6).unwrap() < d5);
    }

    #[test]
    fn sa_small_exhaustive_optimum() {
        let cfg = SaConfig { iterations: 20_000, restarts: 4, seed: 1, ..Default::default() };
        let c = sa_search(4, 0.25, &cfg).unwrap();
        assert_eq!(c.distortion, 5.0 / 16.0);
        let Codebook::Balanced { bins } = &c.codebook else { panic!() };
        assert_eq!(balanced_map_errors(4, bins).unwrap(), 20);
        assert_eq!(c.exact_point().unwrap(), (ratio(1, 4), ratio(5, 16)));
        let c = sa_search(4, 1.0, &cfg).unwrap();
        assert_eq!(c.distortion, 0.0);
        assert!(sa_search(4, 0.3, &cfg).is_err());
    }

    #[test]
    fn sa_is_deterministic() {
        let cfg = SaConfig { iterations: 5_000, restarts: 2, seed: 9, ..Default::default() };
        assert_eq!(sa_search(6, 0.5, &cfg).unwrap(), sa_search(6, 0.5, &cfg).unwrap());
    }

    #[test]
    fn kv_curve_shapes() {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let curves = kv_wpir_lc_curve(16, 20, &[1, 8, 16], &grid).unwrap();
        assert_eq!(curves.len(), 3);
        for c in &curves {
            c.check_convex_nonincreasing(1e-9).unwrap();
        }
        assert!(kv_wpir_lc_curve(4, 20, &[5], &grid).is_err());
    }
}
