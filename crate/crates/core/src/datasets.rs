//! Synthetic species samples and frequency-file input/output.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{domain, Error, Result};
use crate::model::{PyParams, SampleSummary};
use crate::rng::RngStream;
use crate::samplers::sample_partition;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetKind {
    /// Mass proportional to `k^-shape` on ranks `1..=N`.
    Zipf {
        shape: f64,
    },
    /// Sequential urn: label `i` is drawn with weight `weights[i] + count_i`.
    Polya {
        weights: Vec<f64>,
    },
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub support_size: usize,
    pub n: u64,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn zipf(support_size: usize, shape: f64, n: u64, seed: u64) -> Self {
        DatasetSpec {
            kind: DatasetKind::Zipf { shape },
            support_size,
            n,
            seed,
        }
    }

    pub fn polya(weights: Vec<f64>, n: u64, seed: u64) -> Self {
        DatasetSpec {
            support_size: weights.len(),
            kind: DatasetKind::Polya { weights },
            n,
            seed,
        }
    }

    pub fn uniform(support_size: usize, n: u64, seed: u64) -> Self {
        DatasetSpec {
            kind: DatasetKind::Uniform,
            support_size,
            n,
            seed,
        }
    }

    /// The four synthetic benchmark generators, `"A"` to `"D"`.
    pub fn preset(id: &str, seed: u64) -> Option<Self> {
        Some(match id {
            "A" => Self::zipf(301, 2.0, 977, seed),
            "B" => Self::zipf(101, 1.5, 1877, seed),
            "C" => {
                let mut w = vec![500.0; 500];
                w[0] = 2.0;
                w[1] = 2.0;
                Self::polya(w, 2000, seed)
            }
            "D" => Self::uniform(501, 2000, seed),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.support_size == 0 || self.n == 0 {
            return domain("support size and n must be positive");
        }
        match &self.kind {
            DatasetKind::Zipf { shape } if !(*shape >= 0.0 && shape.is_finite()) => {
                domain(format!("Zipf shape {shape} must be finite and nonnegative"))
            }
            DatasetKind::Polya { weights } if weights.len() != self.support_size => {
                domain("one Pólya weight per label is required")
            }
            DatasetKind::Polya { weights }
                if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) =>
            {
                domain("Pólya weights must be positive and finite")
            }
            _ => Ok(()),
        }
    }
}

/// Per-label counts of `spec.n` draws, indexed by label.
pub fn generate_counts(spec: &DatasetSpec, rng: &mut RngStream) -> Result<Vec<u64>> {
    spec.validate()?;
    let size = spec.support_size;
    let mut counts = vec![0u64; size];
    match &spec.kind {
        DatasetKind::Zipf { shape } => {
            let zipf = Zipf::new(size as f64, *shape).map_err(|e| Error::Domain(e.to_string()))?;
            for _ in 0..spec.n {
                counts[zipf.sample(rng) as usize - 1] += 1;
            }
        }
        DatasetKind::Uniform => {
            for _ in 0..spec.n {
                counts[rng.random_range(0..size)] += 1;
            }
        }
        DatasetKind::Polya { weights } => {
            let cumulative: Vec<f64> = weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w;
                    Some(*acc)
                })
                .collect();
            let base = cumulative[size - 1];
            let mut draws: Vec<usize> = Vec::with_capacity(spec.n as usize);
            for t in 0..spec.n as usize {
                let label = if rng.random::<f64>() * (base + t as f64) < base {
                    let x = rng.random::<f64>() * base;
                    cumulative.partition_point(|&c| c <= x).min(size - 1)
                } else {
                    draws[rng.random_range(0..t)]
                };
                draws.push(label);
                counts[label] += 1;
            }
        }
    }
    Ok(counts)
}

/// Sample statistics of one realization of `spec`, using stream 0 of `spec.seed`.
pub fn generate(spec: &DatasetSpec) -> Result<SampleSummary> {
    generate_with(spec, &mut RngStream::new(spec.seed, 0))
}

pub fn generate_with(spec: &DatasetSpec, rng: &mut RngStream) -> Result<SampleSummary> {
    let freqs = generate_counts(spec, rng)?
        .into_iter()
        .filter(|&c| c > 0)
        .collect();
    SampleSummary::from_freqs(freqs)
}

/// A Pitman-Yor partition of `n` draws conditioned to have exactly `j` blocks.
///
/// Given the block count, the Ewens-Pitman law of the block sizes does not
/// depend on `theta`, so `theta` only tunes the acceptance rate of the
/// rejection loop.
pub fn generate_with_blocks(
    params: &PyParams,
    n: u64,
    j: u64,
    max_tries: u64,
    rng: &mut RngStream,
) -> Result<SampleSummary> {
    if j == 0 || j > n {
        return domain(format!("need 1 <= j <= n, got n={n}, j={j}"));
    }
    for _ in 0..max_tries {
        let s = sample_partition(params, n, rng)?;
        if s.j() == j {
            return Ok(s);
        }
    }
    Err(Error::NonConvergence(max_tries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// One species label per line.
    Labels,
    /// `label<TAB>count` per line.
    LabelCount,
}

impl FromStr for IngestMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labels" => Ok(IngestMode::Labels),
            "label_count" => Ok(IngestMode::LabelCount),
            other => domain(format!(
                "unknown input mode {other:?} (labels | label_count)"
            )),
        }
    }
}

/// Parses observations from text. Frequencies are reported in order of
/// first appearance; blank lines are skipped.
pub fn parse(text: &str, mode: IngestMode) -> Result<SampleSummary> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut freqs: Vec<u64> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let (label, count) = match mode {
            IngestMode::Labels => (line, 1),
            IngestMode::LabelCount => {
                let (label, count) = line.rsplit_once('\t').ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: "expected `label<TAB>count`".into(),
                })?;
                let count: u64 = count.trim().parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("count {count:?} is not a nonnegative integer"),
                })?;
                if count == 0 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "counts must be positive".into(),
                    });
                }
                (label, count)
            }
        };
        let slot = *index.entry(label).or_insert_with(|| {
            freqs.push(0);
            freqs.len() - 1
        });
        freqs[slot] += count;
    }
    if freqs.is_empty() {
        return Err(Error::EmptyInput);
    }
    SampleSummary::from_freqs(freqs)
}

pub fn ingest(path: impl AsRef<Path>, mode: IngestMode) -> Result<SampleSummary> {
    parse(&fs::read_to_string(path)?, mode)
}

/// Writes `sample` in `label_count` form with labels `s1, s2, ...`.
pub fn export(sample: &SampleSummary, path: impl AsRef<Path>) -> Result<()> {
    let freqs = sample
        .freqs()
        .ok_or_else(|| Error::Domain("cannot export a sample without frequencies".into()))?;
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for (i, f) in freqs.iter().enumerate() {
        writeln!(out, "s{}\t{f}", i + 1)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_label_uniform() {
        let s = generate(&DatasetSpec::uniform(1, 50, 3)).unwrap();
        assert_eq!((s.n(), s.j(), s.freqs().unwrap()), (50, 1, &[50u64][..]));
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        for id in ["A", "B", "C", "D"] {
            let a = generate(&DatasetSpec::preset(id, 17).unwrap()).unwrap();
            let b = generate(&DatasetSpec::preset(id, 17).unwrap()).unwrap();
            let c = generate(&DatasetSpec::preset(id, 18).unwrap()).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
            assert_eq!(a.n(), DatasetSpec::preset(id, 0).unwrap().n);
        }
    }

    #[test]
    fn block_count_matches_occupancy_mean() {
        for id in ["A", "B", "D"] {
            let spec = DatasetSpec::preset(id, 0).unwrap();
            let probs: Vec<f64> = match spec.kind {
                DatasetKind::Zipf { shape } => {
                    let w: Vec<f64> = (1..=spec.support_size)
                        .map(|k| (k as f64).powf(-shape))
                        .collect();
                    let z: f64 = w.iter().sum();
                    w.iter().map(|x| x / z).collect()
                }
                _ => vec![1.0 / spec.support_size as f64; spec.support_size],
            };
            let expected: f64 = probs
                .iter()
                .map(|p| 1.0 - (1.0 - p).powf(spec.n as f64))
                .sum();
            let reps = 200;
            let mean = (0..reps)
                .map(|seed| {
                    generate(&DatasetSpec {
                        seed,
                        ..spec.clone()
                    })
                    .unwrap()
                    .j() as f64
                })
                .sum::<f64>()
                / reps as f64;
            assert!((mean - expected).abs() < 1.0, "{id}: {mean} vs {expected}");
        }
    }

    #[test]
    fn zipf_ranks_follow_power_law() {
        let spec = DatasetSpec::zipf(5, 1.0, 200_000, 1);
        let counts = generate_counts(&spec, &mut RngStream::new(1, 0)).unwrap();
        let h: f64 = (1..=5).map(|k| 1.0 / k as f64).sum();
        for (k, &c) in counts.iter().enumerate() {
            let p = 1.0 / ((k + 1) as f64 * h);
            let se = (p * (1.0 - p) / 200_000.0).sqrt();
            assert!((c as f64 / 200_000.0 - p).abs() < 5.0 * se);
        }
    }

    #[test]
    fn heavy_polya_approaches_uniform() {
        let reps = 200;
        let hist = |spec: &dyn Fn(u64) -> DatasetSpec| {
            let mut h: HashMap<u64, f64> = HashMap::new();
            for r in 0..reps {
                *h.entry(generate(&spec(r)).unwrap().j()).or_default() += 1.0 / reps as f64;
            }
            h
        };
        let polya = hist(&|r| DatasetSpec::polya(vec![1e12; 30], 40, r));
        let uniform = hist(&|r| DatasetSpec::uniform(30, 40, 1000 + r));
        let keys: std::collections::BTreeSet<u64> =
            polya.keys().chain(uniform.keys()).copied().collect();
        let tv: f64 = 0.5
            * keys
                .iter()
                .map(|k| (polya.get(k).unwrap_or(&0.0) - uniform.get(k).unwrap_or(&0.0)).abs())
                .sum::<f64>();
        // Two independent 200-draw histograms differ by about this much on their own.
        assert!(tv < 0.2, "{tv}");
    }

    #[test]
    fn polya_small_weights_concentrate() {
        let s = generate(&DatasetSpec::polya(vec![0.01; 100], 1000, 5)).unwrap();
        assert!(s.j() < 20);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&DatasetSpec::polya(vec![1.0, -1.0], 10, 0)).is_err());
        let mut spec = DatasetSpec::polya(vec![1.0; 3], 10, 0);
        spec.support_size = 4;
        assert!(generate(&spec).is_err());
        assert!(generate(&DatasetSpec::zipf(10, f64::NAN, 10, 0)).is_err());
        assert!(generate(&DatasetSpec::uniform(0, 10, 0)).is_err());
    }

    #[test]
    fn conditioned_partition_has_requested_shape() {
        let p = PyParams::new(0.612, 741.0).unwrap();
        let s = generate_with_blocks(&p, 2586, 1825, 100_000, &mut RngStream::new(2, 0)).unwrap();
        assert_eq!((s.n(), s.j()), (2586, 1825));
    }

    #[test]
    fn parse_modes() {
        let s = parse("a\nb\na\n", IngestMode::Labels).unwrap();
        assert_eq!((s.n(), s.j(), s.freqs().unwrap()), (3, 2, &[2u64, 1][..]));
        let s = parse("x\t5\n", IngestMode::LabelCount).unwrap();
        assert_eq!((s.n(), s.j()), (5, 1));
        let s = parse("x y\t2\r\n\nz\t3\nx y\t1\n", IngestMode::LabelCount).unwrap();
        assert_eq!(s.freqs().unwrap(), &[3, 3]);
        assert!(matches!(
            parse("", IngestMode::Labels),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            parse("\n\n", IngestMode::LabelCount),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            parse("a\t1\nb 2\n", IngestMode::LabelCount),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("a\t1\nb\t-2\n", IngestMode::LabelCount),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("a\t0\n", IngestMode::LabelCount),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!("csv".parse::<IngestMode>().is_err());
    }

    #[test]
    fn export_ingest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tomato.tsv");
        let p = PyParams::new(0.612, 741.0).unwrap();
        let s = generate_with_blocks(&p, 2586, 1825, 100_000, &mut RngStream::new(4, 0)).unwrap();
        export(&s, &path).unwrap();
        let back = ingest(&path, IngestMode::LabelCount).unwrap();
        assert_eq!((back.n(), back.j()), (s.n(), s.j()));
        assert_eq!(back.sorted_freqs(), s.sorted_freqs());
        assert!(ingest(dir.path().join("missing"), IngestMode::Labels).is_err());
    }
}
