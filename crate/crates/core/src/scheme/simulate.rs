use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::response::Prepared;
use super::Scheme;
use crate::error::{Error, Result};
use crate::numeric::rat_to_f64;

/// Trials per RNG stream; chunk `i` uses stream `i` of the seeded generator.
const CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trials: u64,
    pub seed: u64,
    pub rate: f64,
    pub rate_se: f64,
    pub distortion: f64,
    pub distortion_se: f64,
    pub leakage: f64,
    pub leakage_se: f64,
}

#[derive(Default, Clone, Copy)]
struct Sums {
    bits: u128,
    bits_sq: u128,
    errors: u128,
    errors_sq: u128,
    hits: u64,
}

impl Sums {
    fn merge(self, o: Sums) -> Sums {
        Sums {
            bits: self.bits + o.bits,
            bits_sq: self.bits_sq + o.bits_sq,
            errors: self.errors + o.errors,
            errors_sq: self.errors_sq + o.errors_sq,
            hits: self.hits + o.hits,
        }
    }
}

/// Monte Carlo estimate of (R, D, L): a uniform file index, a uniform database and
/// a query from P(·|m) per trial; measures the codeword length, the Hamming
/// distortion of the requested file and whether the server's ML guess is right.
/// Deterministic given the seed regardless of thread count.
pub fn simulate(scheme: &Scheme, trials: u64, seed: u64) -> Result<SimReport> {
    if trials == 0 {
        return Err(Error::Invalid("need at least one trial".into()));
    }
    scheme.validate()?;
    let m = scheme.num_files;
    let beta = scheme.file_len;
    let k = scheme.alphabet_size;
    let prepared: Vec<Prepared> = scheme.queries.iter().map(|q| Prepared::new(&q.response)).collect::<Result<_>>()?;
    let samplers: Vec<WeightedIndex<f64>> = (0..m)
        .map(|f| WeightedIndex::new(scheme.queries.iter().map(|q| rat_to_f64(&q.p_given_m[f]))))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Invalid(format!("query distribution: {e}")))?;
    // ML guess per query, ties to the smaller file index
    let guess: Vec<usize> = scheme
        .queries
        .iter()
        .map(|q| (0..m).fold(0, |b, f| if q.p_given_m[f] > q.p_given_m[b] { f } else { b }))
        .collect();

    let chunks = trials.div_ceil(CHUNK);
    let sums = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut files = vec![vec![0u8; beta]; m];
            let mut out = vec![Vec::new(); m];
            let mut s = Sums::default();
            for _ in 0..n {
                let want = rng.gen_range(0..m);
                for f in files.iter_mut() {
                    for x in f.iter_mut() {
                        *x = rng.gen_range(0..k) as u8;
                    }
                }
                let q = samplers[want].sample(&mut rng);
                let views: Vec<&[u8]> = files.iter().map(|f| f.as_slice()).collect();
                let (bits, _) = prepared[q].answer(&views, &mut out);
                let errors = files[want].iter().zip(&out[want]).filter(|(a, b)| a != b).count() as u128;
                s.bits += bits as u128;
                s.bits_sq += (bits as u128) * (bits as u128);
                s.errors += errors;
                s.errors_sq += errors * errors;
                s.hits += (guess[q] == want) as u64;
            }
            s
        })
        .reduce(Sums::default, Sums::merge);

    let n = trials as f64;
    let mean_se = |sum: u128, sq: u128, scale: f64| {
        let mean = sum as f64 / n;
        let var = (sq as f64 / n - mean * mean).max(0.0);
        (mean / scale, (var / n).sqrt() / scale)
    };
    let (rate, rate_se) = mean_se(sums.bits, sums.bits_sq, beta as f64);
    let (distortion, distortion_se) = mean_se(sums.errors, sums.errors_sq, beta as f64);
    let (leakage, leakage_se) = mean_se(sums.hits as u128, sums.hits as u128, 1.0);
    Ok(SimReport { trials, seed, rate, rate_se, distortion, distortion_se, leakage, leakage_se })
}
