use super::hyper::StringNormalization;
use super::ln_or_zero;
use crate::data::FieldSpec;

/// Edit distance over Unicode scalar values, case-sensitive.
pub fn levenshtein(a: &str, b: &str) -> usize {
    strsim::levenshtein(a, b)
}

/// Distortion distribution over the observed support of a string field:
/// `zeta[s] ∝ freq[s] * exp(-lambda * d(s, truth))`, normalized to one.
pub fn string_distortion_pmf(field: &FieldSpec, truth: usize, lambda: f64) -> Vec<f64> {
    let t = &field.levels[truth];
    let mut z: Vec<f64> = field
        .levels
        .iter()
        .zip(&field.empirical_freq)
        .map(|(s, &g)| g * (-lambda * levenshtein(s, t) as f64).exp())
        .collect();
    let sum: f64 = z.iter().sum();
    z.iter_mut().for_each(|v| *v /= sum);
    z
}

/// Cached distortion terms of one string field, indexed by level.
#[derive(Debug, Clone)]
pub struct StringTable {
    n: usize,
    lambda: f64,
    dist: Vec<u32>,
    log_h: Vec<f64>,
    log_freq: Vec<f64>,
}

impl StringTable {
    pub fn new(field: &FieldSpec, lambda: f64, norm: StringNormalization) -> Self {
        let n = field.n_levels();
        let mut dist = vec![0u32; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let d = levenshtein(&field.levels[a], &field.levels[b]) as u32;
                dist[a * n + b] = d;
                dist[b * n + a] = d;
            }
        }
        let log_h = (0..n)
            .map(|t| {
                let sum: f64 = (0..n)
                    .map(|s| {
                        let w = match norm {
                            StringNormalization::Weighted => field.empirical_freq[s],
                            StringNormalization::Unweighted => 1.0,
                        };
                        w * (-lambda * dist[s * n + t] as f64).exp()
                    })
                    .sum();
                -sum.ln()
            })
            .collect();
        StringTable {
            n,
            lambda,
            dist,
            log_h,
            log_freq: field.empirical_freq.iter().map(|&g| ln_or_zero(g)).collect(),
        }
    }

    #[inline]
    pub fn distance(&self, a: usize, b: usize) -> u32 {
        self.dist[a * self.n + b]
    }

    /// `ln h(truth)`, the log reciprocal normalizer of the distortion kernel.
    #[inline]
    pub fn log_h(&self, truth: usize) -> f64 {
        self.log_h[truth]
    }

    #[inline]
    pub fn log_freq(&self, level: usize) -> f64 {
        self.log_freq[level]
    }

    /// `ln [freq(p) h(truth) exp(-lambda d(p, truth))]`.
    #[inline]
    pub fn log_distort(&self, truth: usize, observed: usize) -> f64 {
        self.log_freq[observed] + self.log_h[truth] - self.lambda * self.distance(observed, truth) as f64
    }

    pub fn n_levels(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}
