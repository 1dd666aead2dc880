//! Interval tables and coverage sweeps over follow-up sizes `m`.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::gaussian_interval;
use crate::datasets::{generate, DatasetSpec};
use crate::empirical_bayes::{fit_empirical_bayes, FitOptions};
use crate::error::{domain, Error, Result};
use crate::intervals::{coverage, exact_interval, ml_interval, CredibleInterval};
use crate::model::{posterior_mean, PyParams, SampleSummary};
use crate::rng::RngStream;

pub const CSV_HEADER: &str =
    "dataset,n,j,alpha,theta,m,k_hat,exact_lo,exact_hi,ml_lo,ml_hi,gauss_lo,gauss_hi,ml_cov,gauss_cov";

pub const DEFAULT_MC_SAMPLES: usize = 2000;

/// Fitted `(n, j, alpha, theta)` of the four synthetic benchmark datasets.
pub const REFERENCE_SYNTHETIC: [(&str, u64, u64, f64, f64); 4] = [
    ("A", 977, 300, 0.54, 26.67),
    ("B", 1877, 100, 0.38, 4.66),
    ("C", 2000, 215, 0.64, 2.39),
    ("D", 2000, 447, 0.0, 178.48),
];

/// Fitted `(n, j, alpha, theta)` of five EST libraries.
pub const REFERENCE_EST: [(&str, u64, u64, f64, f64); 5] = [
    ("tomato", 2586, 1825, 0.612, 741.0),
    ("mastigamoeba", 715, 460, 0.770, 46.0),
    ("mastigamoeba_normalized", 363, 248, 0.700, 57.0),
    ("naegleria_aerobic", 959, 473, 0.670, 46.3),
    ("naegleria_anaerobic", 969, 631, 0.660, 155.5),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub dataset: String,
    pub n: u64,
    pub j: u64,
    pub alpha: f64,
    pub theta: f64,
    pub m: u64,
    pub k_hat: f64,
    pub exact: Option<(f64, f64)>,
    pub ml: Option<(f64, f64)>,
    pub gauss: Option<(f64, f64)>,
    pub ml_cov: Option<f64>,
    pub gauss_cov: Option<f64>,
    /// Why a requested column is empty.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BenchmarkRow {
    pub fn to_csv_line(&self) -> String {
        let mut s = String::new();
        let real = |x: f64| format!("{x:.4}");
        let pair = |p: Option<(f64, f64)>| match p {
            Some((lo, hi)) => format!("{},{}", real(lo), real(hi)),
            None => ",".to_string(),
        };
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.1}")).unwrap_or_default();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.dataset,
            self.n,
            self.j,
            self.alpha,
            self.theta,
            self.m,
            real(self.k_hat),
            pair(self.exact),
            pair(self.ml),
            pair(self.gauss),
            opt(self.ml_cov),
            opt(self.gauss_cov),
        );
        s
    }
}

pub fn write_csv<W: Write>(rows: &[BenchmarkRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    out.flush()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Methods {
    pub exact: bool,
    pub ml: bool,
    pub gaussian: bool,
}

impl Default for Methods {
    fn default() -> Self {
        Methods {
            exact: true,
            ml: true,
            gaussian: true,
        }
    }
}

impl FromStr for Methods {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut m = Methods {
            exact: false,
            ml: false,
            gaussian: false,
        };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "exact" => m.exact = true,
                "ml" => m.ml = true,
                "gaussian" | "gauss" => m.gaussian = true,
                other => return domain(format!("unknown method {other:?} (exact, ml, gaussian)")),
            }
        }
        if !(m.exact || m.ml || m.gaussian) {
            return domain("no interval method selected");
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    pub level: f64,
    pub methods: Methods,
    pub samples: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            level: 0.95,
            methods: Methods::default(),
            samples: DEFAULT_MC_SAMPLES,
        }
    }
}

fn bounds(ci: &CredibleInterval) -> (f64, f64) {
    (ci.lo, ci.hi)
}

/// Point estimate and the requested intervals for one follow-up size.
///
/// The exact and Mittag-Leffler intervals use children 0 and 1 of `rng`;
/// their draws are charged to `rng`.
pub fn estimate_row(
    dataset: &str,
    params: &PyParams,
    sample: &SampleSummary,
    m: u64,
    config: &EstimateConfig,
    rng: &mut RngStream,
) -> Result<BenchmarkRow> {
    let methods = config.methods;
    let level = config.level;
    let mut notes = Vec::new();

    let exact = if methods.exact {
        let mut child = rng.child(0);
        let ci = exact_interval(params, sample, m, level, config.samples, &mut child)?;
        rng.charge(child.draws());
        Some(ci)
    } else {
        None
    };

    let ml = if !methods.ml {
        None
    } else if params.is_dirichlet() {
        notes.push("ml: the Mittag-Leffler limit needs alpha > 0".to_string());
        None
    } else if m == 0 {
        Some(CredibleInterval::degenerate(
            level,
            crate::intervals::Method::MittagLeffler,
            None,
        ))
    } else {
        let mut child = rng.child(1);
        let ci = ml_interval(params, sample, m, level, config.samples, &mut child)?;
        rng.charge(child.draws());
        Some(ci)
    };

    let gauss = if !methods.gaussian {
        None
    } else {
        match gaussian_interval(params, sample, m, level) {
            Ok(ci) => Some(ci),
            Err(Error::Domain(msg)) if *params.theta() <= 0.0 => {
                notes.push(format!("gaussian: {msg}"));
                None
            }
            Err(e) => return Err(e),
        }
    };

    let cov = |approx: &Option<CredibleInterval>| match (approx, &exact) {
        (Some(a), Some(e)) => Some(coverage(a, e)),
        _ => None,
    };
    Ok(BenchmarkRow {
        dataset: dataset.to_string(),
        n: sample.n(),
        j: sample.j(),
        alpha: *params.alpha(),
        theta: *params.theta(),
        m,
        k_hat: posterior_mean(params, sample, m),
        ml_cov: cov(&ml),
        gauss_cov: cov(&gauss),
        exact: exact.as_ref().map(bounds),
        ml: ml.as_ref().map(bounds),
        gauss: gauss.as_ref().map(bounds),
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPoint {
    Absolute(u64),
    /// A multiple of the observed sample size.
    TimesN(f64),
}

impl GridPoint {
    fn resolve(self, n: u64) -> u64 {
        match self {
            GridPoint::Absolute(m) => m,
            GridPoint::TimesN(k) => (k * n as f64 + 0.5).floor() as u64,
        }
    }
}

impl FromStr for GridPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Domain(format!("bad m value {s:?}"));
        if let Some(k) = s.strip_suffix('n') {
            let k: f64 = if k.is_empty() {
                1.0
            } else {
                k.parse().map_err(|_| bad())?
            };
            if !(k >= 0.0 && k.is_finite()) {
                return Err(bad());
            }
            Ok(GridPoint::TimesN(k))
        } else {
            s.parse().map(GridPoint::Absolute).map_err(|_| bad())
        }
    }
}

/// Follow-up sizes to evaluate, resolved against each dataset's `n`.
///
/// Parsed from either a uniform mesh `LO..HI/POINTS` (for example
/// `0..5n/50`) or a comma-separated list such as `n,2n,10n,5000`.
#[derive(Debug, Clone, PartialEq)]
pub enum MGrid {
    Mesh {
        lo: GridPoint,
        hi: GridPoint,
        points: usize,
    },
    List(Vec<GridPoint>),
}

impl Default for MGrid {
    fn default() -> Self {
        MGrid::Mesh {
            lo: GridPoint::Absolute(0),
            hi: GridPoint::TimesN(5.0),
            points: 50,
        }
    }
}

impl MGrid {
    pub fn resolve(&self, n: u64) -> Vec<u64> {
        match self {
            MGrid::List(points) => points.iter().map(|p| p.resolve(n)).collect(),
            MGrid::Mesh { lo, hi, points } => {
                let (lo, hi) = (lo.resolve(n) as f64, hi.resolve(n) as f64);
                if *points == 1 {
                    return vec![lo as u64];
                }
                (0..*points)
                    .map(|i| {
                        (lo + (hi - lo) * i as f64 / (*points - 1) as f64 + 0.5).floor() as u64
                    })
                    .collect()
            }
        }
    }
}

impl FromStr for MGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some((range, points)) = s.split_once('/') {
            let (lo, hi) = range
                .split_once("..")
                .ok_or_else(|| Error::Domain(format!("bad mesh {s:?}, expected LO..HI/POINTS")))?;
            let points: usize = points
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("bad mesh point count in {s:?}")))?;
            if points == 0 {
                return domain("a mesh needs at least one point");
            }
            return Ok(MGrid::Mesh {
                lo: lo.parse()?,
                hi: hi.parse()?,
                points,
            });
        }
        let list = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<GridPoint>>>()?;
        if list.is_empty() {
            return domain("empty m grid");
        }
        Ok(MGrid::List(list))
    }
}

/// One dataset of a benchmark suite with the parameters used for its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkInput {
    pub id: String,
    pub params: PyParams,
    pub sample: SampleSummary,
}

impl BenchmarkInput {
    pub fn fitted(
        id: impl Into<String>,
        sample: SampleSummary,
        options: &FitOptions,
    ) -> Result<Self> {
        let fit = fit_empirical_bayes(&sample, options)?;
        Ok(BenchmarkInput {
            id: id.into(),
            params: PyParams::new(fit.alpha_hat, fit.theta_hat)?,
            sample,
        })
    }

    pub fn reference(id: &str, n: u64, j: u64, alpha: f64, theta: f64) -> Result<Self> {
        Ok(BenchmarkInput {
            id: id.to_string(),
            params: PyParams::new(alpha, theta)?,
            sample: SampleSummary::from_counts(n, j)?,
        })
    }
}

/// The synthetic suite as tabulated: reference `(n, j, alpha, theta)`.
pub fn synthetic_reference() -> Vec<BenchmarkInput> {
    REFERENCE_SYNTHETIC
        .iter()
        .map(|&(id, n, j, a, t)| {
            BenchmarkInput::reference(id, n, j, a, t).expect("valid reference")
        })
        .collect()
}

pub fn est_reference() -> Vec<BenchmarkInput> {
    REFERENCE_EST
        .iter()
        .map(|&(id, n, j, a, t)| {
            BenchmarkInput::reference(id, n, j, a, t).expect("valid reference")
        })
        .collect()
}

/// The synthetic suite regenerated from the four generators with `seed` and
/// refitted by empirical Bayes.
pub fn synthetic_regenerated(seed: u64, options: &FitOptions) -> Result<Vec<BenchmarkInput>> {
    ["A", "B", "C", "D"]
        .iter()
        .map(|id| {
            let spec = DatasetSpec::preset(id, seed).expect("known preset");
            BenchmarkInput::fitted(*id, generate(&spec)?, options)
        })
        .collect()
}

/// Rows for every `(dataset, m)` pair, in input order. Pair `(d, i)` draws
/// from stream `d << 32 | i` of `seed`. Returns the total number of draws.
pub fn run_suite(
    inputs: &[BenchmarkInput],
    grid: &MGrid,
    config: &EstimateConfig,
    seed: u64,
) -> Result<(Vec<BenchmarkRow>, u64)> {
    let pairs: Vec<(usize, usize, u64)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(d, input)| {
            grid.resolve(input.sample.n())
                .into_iter()
                .enumerate()
                .map(move |(i, m)| (d, i, m))
        })
        .collect();
    let rows: Vec<(BenchmarkRow, u64)> = pairs
        .par_iter()
        .map(|&(d, i, m)| {
            let input = &inputs[d];
            let mut rng = RngStream::new(seed, ((d as u64) << 32) | i as u64);
            let row = estimate_row(&input.id, &input.params, &input.sample, m, config, &mut rng)?;
            Ok((row, rng.draws()))
        })
        .collect::<Result<_>>()?;
    let draws = rows.iter().map(|(_, d)| d).sum();
    Ok((rows.into_iter().map(|(r, _)| r).collect(), draws))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zipf_a() -> BenchmarkInput {
        synthetic_reference().remove(0)
    }

    #[test]
    fn grid_parsing_and_resolution() {
        let g: MGrid = "0..5n/50".parse().unwrap();
        assert_eq!(g, MGrid::default());
        let ms = g.resolve(977);
        assert_eq!(ms.len(), 50);
        assert_eq!((ms[0], ms[49]), (0, 4885));
        assert!(ms.windows(2).all(|w| w[0] < w[1]));
        let g: MGrid = "n, 2n,0.5n,1000".parse().unwrap();
        assert_eq!(g.resolve(977), vec![977, 1954, 489, 1000]);
        assert_eq!("7..7/1".parse::<MGrid>().unwrap().resolve(3), vec![7]);
        for bad in ["", "0..5n", "0..5n/0", "xn", "-1", "a..b/3", "-2n"] {
            assert!(bad.parse::<MGrid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn methods_parsing() {
        assert_eq!(
            "exact,ml,gaussian".parse::<Methods>().unwrap(),
            Methods::default()
        );
        let g: Methods = "gaussian".parse().unwrap();
        assert!(g.gaussian && !g.exact && !g.ml);
        assert!("".parse::<Methods>().is_err());
        assert!("exact,bootstrap".parse::<Methods>().is_err());
    }

    #[test]
    fn gaussian_only_draws_nothing() {
        let a = zipf_a();
        let config = EstimateConfig {
            methods: "gaussian".parse().unwrap(),
            ..Default::default()
        };
        let mut rng = RngStream::new(1, 0);
        let row = estimate_row("A", &a.params, &a.sample, 977, &config, &mut rng).unwrap();
        assert_eq!(rng.draws(), 0);
        assert!(row.exact.is_none() && row.ml.is_none() && row.gauss_cov.is_none());
        let (lo, hi) = row.gauss.unwrap();
        assert!((lo.round() - 129.0).abs() <= 2.0 && (hi.round() - 183.0).abs() <= 2.0);
    }

    #[test]
    fn zero_follow_up_row() {
        let a = zipf_a();
        let mut rng = RngStream::new(1, 0);
        let row = estimate_row(
            "A",
            &a.params,
            &a.sample,
            0,
            &EstimateConfig::default(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(row.k_hat, 0.0);
        for p in [row.exact, row.ml, row.gauss] {
            assert_eq!(p, Some((0.0, 0.0)));
        }
        assert_eq!((row.ml_cov, row.gauss_cov), (Some(100.0), Some(100.0)));
    }

    #[test]
    fn dirichlet_rows_leave_ml_empty() {
        let d = synthetic_reference().remove(3);
        let config = EstimateConfig {
            samples: 200,
            ..Default::default()
        };
        let row = estimate_row(
            "D",
            &d.params,
            &d.sample,
            2000,
            &config,
            &mut RngStream::new(3, 0),
        )
        .unwrap();
        assert!(row.ml.is_none() && row.ml_cov.is_none());
        assert_eq!(row.notes.len(), 1);
        assert!(row.to_csv_line().contains(",,,"));
        assert_eq!(
            row.to_csv_line().split(',').count(),
            CSV_HEADER.split(',').count()
        );
    }

    #[test]
    fn negative_theta_skips_gaussian() {
        let p = PyParams::new(0.5, -0.2).unwrap();
        let s = SampleSummary::from_counts(50, 20).unwrap();
        let config = EstimateConfig {
            samples: 200,
            ..Default::default()
        };
        let row = estimate_row("x", &p, &s, 50, &config, &mut RngStream::new(3, 0)).unwrap();
        assert!(row.gauss.is_none() && row.exact.is_some() && row.ml.is_some());
    }

    #[test]
    fn suite_is_deterministic_and_ordered() {
        let inputs = synthetic_reference();
        let grid: MGrid = "0..2n/4".parse().unwrap();
        let config = EstimateConfig {
            samples: 200,
            ..Default::default()
        };
        let (a, da) = run_suite(&inputs, &grid, &config, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .unwrap();
        let (b, db) = pool
            .install(|| run_suite(&inputs, &grid, &config, 9))
            .unwrap();
        assert_eq!((a.len(), da), (16, db));
        assert_eq!(a, b);
        let ids: Vec<&str> = a.iter().map(|r| r.dataset.as_str()).collect();
        assert_eq!(ids[..5], ["A", "A", "A", "A", "B"]);
        let (c, _) = run_suite(&inputs, &grid, &config, 10).unwrap();
        assert_ne!(a, c);
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
        assert_eq!(text.lines().count(), 17);
    }

    #[test]
    fn regenerated_suite_fits_each_dataset() {
        let inputs = synthetic_regenerated(5, &FitOptions::default()).unwrap();
        assert_eq!(inputs.len(), 4);
        assert_eq!(inputs[3].sample.n(), 2000);
    }
}
