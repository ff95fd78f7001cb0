//! Per-replicate result rows, their CSV form and per-n summaries.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::distances::interval_sup_distance;
use crate::error::{Error, Result};
use crate::univariate::{Dist1d, WeightedSample};

/// One `(n, replicate)` record. Quantities that do not apply are NaN.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: String,
    pub n: usize,
    pub k: usize,
    pub replicate: usize,
    pub seed: u64,
    pub sigma: f64,
    pub tv: f64,
    pub tv_se: f64,
    pub tv_lower: f64,
    pub tv_upper: f64,
    pub tv_method: String,
    /// Monte Carlo cross-check of an exact TV.
    pub tv_mc: f64,
    pub tv_mc_se: f64,
    pub ess: f64,
    pub interval_sup: f64,
    /// Standardized frequentist statistic of this replicate.
    pub freq_stat: f64,
    /// 1 when the credible interval covers the target, 0 otherwise.
    pub coverage: f64,
    pub bias_term: f64,
    pub cond_prior: f64,
    pub cond_signal: f64,
    pub cond_dimension: f64,
    pub flag: String,
    /// Posterior mass outside each contraction radius, aligned with the result's `lambdas`.
    pub outside: Vec<f64>,
}

impl ResultRow {
    pub fn new(experiment: &str, n: usize, k: usize, replicate: usize, seed: u64, sigma: f64, n_lambdas: usize) -> Self {
        Self {
            experiment: experiment.to_string(),
            n,
            k,
            replicate,
            seed,
            sigma,
            tv: f64::NAN,
            tv_se: f64::NAN,
            tv_lower: f64::NAN,
            tv_upper: f64::NAN,
            tv_method: String::new(),
            tv_mc: f64::NAN,
            tv_mc_se: f64::NAN,
            ess: f64::NAN,
            interval_sup: f64::NAN,
            freq_stat: f64::NAN,
            coverage: f64::NAN,
            bias_term: f64::NAN,
            cond_prior: f64::NAN,
            cond_signal: f64::NAN,
            cond_dimension: f64::NAN,
            flag: String::new(),
            outside: vec![f64::NAN; n_lambdas],
        }
    }

    fn numbers(&self) -> [f64; 15] {
        [
            self.sigma,
            self.tv,
            self.tv_se,
            self.tv_lower,
            self.tv_upper,
            self.tv_mc,
            self.tv_mc_se,
            self.ess,
            self.interval_sup,
            self.freq_stat,
            self.coverage,
            self.bias_term,
            self.cond_prior,
            self.cond_signal,
            self.cond_dimension,
        ]
    }
}

fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

impl PartialEq for ResultRow {
    fn eq(&self, other: &Self) -> bool {
        self.experiment == other.experiment
            && self.n == other.n
            && self.k == other.k
            && self.replicate == other.replicate
            && self.seed == other.seed
            && self.tv_method == other.tv_method
            && self.flag == other.flag
            && self.numbers().iter().zip(other.numbers().iter()).all(|(a, b)| same(*a, *b))
            && self.outside.len() == other.outside.len()
            && self.outside.iter().zip(&other.outside).all(|(a, b)| same(*a, *b))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    /// Contraction radii multipliers; empty for other experiments.
    pub lambdas: Vec<f64>,
    pub rows: Vec<ResultRow>,
}

const FIXED_COLUMNS: [&str; 22] = [
    "experiment",
    "n",
    "k",
    "replicate",
    "seed",
    "sigma",
    "tv",
    "tv_se",
    "tv_lower",
    "tv_upper",
    "tv_method",
    "tv_mc",
    "tv_mc_se",
    "ess",
    "interval_sup",
    "freq_stat",
    "coverage",
    "bias_term",
    "cond_prior",
    "cond_signal",
    "cond_dimension",
    "flag",
];

const OUTSIDE_PREFIX: &str = "outside@";

/// Shortest decimal that reads back to the same bits (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn header(lambdas: &[f64]) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(lambdas.iter().map(|l| format!("{OUTSIDE_PREFIX}{l}")))
        .collect()
}

fn record(row: &ResultRow) -> Vec<String> {
    let mut out = vec![
        row.experiment.clone(),
        row.n.to_string(),
        row.k.to_string(),
        row.replicate.to_string(),
        row.seed.to_string(),
    ];
    for x in [row.sigma, row.tv, row.tv_se, row.tv_lower, row.tv_upper] {
        out.push(fmt_f64(x));
    }
    out.push(row.tv_method.clone());
    for x in [
        row.tv_mc,
        row.tv_mc_se,
        row.ess,
        row.interval_sup,
        row.freq_stat,
        row.coverage,
        row.bias_term,
        row.cond_prior,
        row.cond_signal,
        row.cond_dimension,
    ] {
        out.push(fmt_f64(x));
    }
    out.push(row.flag.clone());
    out.extend(row.outside.iter().map(|x| fmt_f64(*x)));
    out
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Writes a header line and one line per row, replacing any existing file.
pub fn write_results(result: &ExperimentResult, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header(&result.lambdas)).map_err(|e| csv_error(path, e))?;
    for row in &result.rows {
        w.write_record(record(row)).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows to `path`, writing the header first when the file is new.
pub fn append_results(result: &ExperimentResult, path: &Path) -> Result<()> {
    let expected = header(&result.lambdas).join(",");
    let fresh = match std::fs::File::open(path) {
        Ok(f) => {
            let mut first = String::new();
            BufReader::new(f).read_line(&mut first)?;
            let first = first.trim_end();
            if !first.is_empty() && first != expected {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: "existing header does not match the rows being appended".into(),
                });
            }
            first.is_empty()
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => true,
        Err(e) => return Err(e.into()),
    };
    if fresh {
        return write_results(result, path);
    }
    let file = OpenOptions::new().append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for row in &result.rows {
        w.write_record(record(row)).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<ExperimentResult> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let head = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = head.iter().collect();
    if names.len() < FIXED_COLUMNS.len() || names[..FIXED_COLUMNS.len()] != FIXED_COLUMNS {
        return Err(parse_err(1, "unexpected header".into()));
    }
    let lambdas = names[FIXED_COLUMNS.len()..]
        .iter()
        .map(|c| {
            c.strip_prefix(OUTSIDE_PREFIX)
                .and_then(|l| l.parse::<f64>().ok())
                .ok_or_else(|| parse_err(1, format!("unexpected column '{c}'")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != names.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", names.len(), rec.len())));
        }
        let int = |i: usize| {
            rec[i]
                .parse::<u64>()
                .map_err(|_| parse_err(line, format!("column {} holds '{}', expected an integer", names[i], &rec[i])))
        };
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("column {} holds '{}', expected a number", names[i], &rec[i])))
        };
        rows.push(ResultRow {
            experiment: rec[0].to_string(),
            n: int(1)? as usize,
            k: int(2)? as usize,
            replicate: int(3)? as usize,
            seed: int(4)?,
            sigma: num(5)?,
            tv: num(6)?,
            tv_se: num(7)?,
            tv_lower: num(8)?,
            tv_upper: num(9)?,
            tv_method: rec[10].to_string(),
            tv_mc: num(11)?,
            tv_mc_se: num(12)?,
            ess: num(13)?,
            interval_sup: num(14)?,
            freq_stat: num(15)?,
            coverage: num(16)?,
            bias_term: num(17)?,
            cond_prior: num(18)?,
            cond_signal: num(19)?,
            cond_dimension: num(20)?,
            flag: rec[21].to_string(),
            outside: (FIXED_COLUMNS.len()..names.len()).map(num).collect::<Result<Vec<f64>>>()?,
        });
    }
    Ok(ExperimentResult { lambdas, rows })
}

/// Mean and standard error over the finite entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

pub fn mean_se(values: impl Iterator<Item = f64>) -> MeanSe {
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    let m = v.len();
    if m == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            count: 0,
        };
    }
    let mean = v.iter().sum::<f64>() / m as f64;
    let se = if m > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64 / m as f64).sqrt()
    } else {
        f64::NAN
    };
    MeanSe { mean, se, count: m }
}

/// Aggregates for one sample size.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub n: usize,
    pub k: usize,
    pub replicates: usize,
    pub tv: MeanSe,
    pub tv_lower: f64,
    pub tv_upper: f64,
    pub tv_mc: MeanSe,
    pub interval_sup: MeanSe,
    /// Interval-sup distance between the replicates' frequentist statistics and `N(0, 1)`.
    pub freq_interval_sup: f64,
    pub coverage: MeanSe,
    pub bias_term: MeanSe,
    pub outside: Vec<MeanSe>,
    pub flagged: usize,
}

/// Per-n aggregates in grid order.
pub fn summarize(result: &ExperimentResult) -> Vec<SummaryRow> {
    let mut ns: Vec<usize> = Vec::new();
    for r in &result.rows {
        if !ns.contains(&r.n) {
            ns.push(r.n);
        }
    }
    ns.into_iter()
        .map(|n| {
            let rows: Vec<&ResultRow> = result.rows.iter().filter(|r| r.n == n).collect();
            let stats: Vec<f64> = rows.iter().map(|r| r.freq_stat).filter(|x| x.is_finite()).collect();
            let freq_interval_sup = if stats.len() >= 2 {
                let sample = Dist1d::Weighted(WeightedSample::unweighted(&stats).expect("finite statistics"));
                interval_sup_distance(&sample, &Dist1d::standard_normal())
            } else {
                f64::NAN
            };
            SummaryRow {
                n,
                k: rows[0].k,
                replicates: rows.len(),
                tv: mean_se(rows.iter().map(|r| r.tv)),
                tv_lower: mean_se(rows.iter().map(|r| r.tv_lower)).mean,
                tv_upper: mean_se(rows.iter().map(|r| r.tv_upper)).mean,
                tv_mc: mean_se(rows.iter().map(|r| r.tv_mc)),
                interval_sup: mean_se(rows.iter().map(|r| r.interval_sup)),
                freq_interval_sup,
                coverage: mean_se(rows.iter().map(|r| r.coverage)),
                bias_term: mean_se(rows.iter().map(|r| r.bias_term)),
                outside: (0..result.lambdas.len())
                    .map(|i| mean_se(rows.iter().map(|r| r.outside[i])))
                    .collect(),
                flagged: rows.iter().filter(|r| !r.flag.is_empty()).count(),
            }
        })
        .collect()
}

/// `results.csv` → `results.summary.csv`.
pub fn summary_path(results: &Path) -> PathBuf {
    let stem = results.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    results.with_file_name(format!("{stem}.summary.csv"))
}

pub fn write_summary(summary: &[SummaryRow], lambdas: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut head: Vec<String> = [
        "n",
        "k",
        "replicates",
        "tv_mean",
        "tv_se",
        "tv_lower_mean",
        "tv_upper_mean",
        "tv_mc_mean",
        "tv_mc_se",
        "interval_sup_mean",
        "interval_sup_se",
        "freq_interval_sup",
        "coverage",
        "coverage_se",
        "bias_term_mean",
        "bias_term_se",
        "flagged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for l in lambdas {
        head.push(format!("{OUTSIDE_PREFIX}{l}_mean"));
        head.push(format!("{OUTSIDE_PREFIX}{l}_se"));
    }
    w.write_record(&head).map_err(|e| csv_error(path, e))?;
    for s in summary {
        let mut rec = vec![s.n.to_string(), s.k.to_string(), s.replicates.to_string()];
        for x in [
            s.tv.mean,
            s.tv.se,
            s.tv_lower,
            s.tv_upper,
            s.tv_mc.mean,
            s.tv_mc.se,
            s.interval_sup.mean,
            s.interval_sup.se,
            s.freq_interval_sup,
            s.coverage.mean,
            s.coverage.se,
            s.bias_term.mean,
            s.bias_term.se,
        ] {
            rec.push(fmt_f64(x));
        }
        rec.push(s.flagged.to_string());
        for o in &s.outside {
            rec.push(fmt_f64(o.mean));
            rec.push(fmt_f64(o.se));
        }
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}
