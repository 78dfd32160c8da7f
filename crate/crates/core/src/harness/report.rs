//! Tabular experiment output, least-squares rate fits and verdicts.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Unreliable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Unreliable => "UNRELIABLE",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub doc: String,
    pub integer: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub column: String,
    /// Slope of `log e` against `log h`; NaN when no fit was made.
    pub rate: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
    /// Every error was at or below the exact-zero threshold.
    pub exact: bool,
}

/// Bounds and thresholds applied to one rate fit.
#[derive(Debug, Clone, Copy)]
pub struct RateRule {
    pub min: f64,
    pub max: Option<f64>,
    pub max_residual: f64,
    pub exact_zero: f64,
}

/// Least-squares slope and RMS residual of `log y` against `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    (slope, (ss / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub description: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub fits: Vec<RateFit>,
    pub checks: Vec<Check>,
}

impl ConvergenceReport {
    pub fn new(name: &str, description: &str) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            columns: Vec::new(),
            rows: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn int_column(&mut self, name: &str, doc: &str) -> &mut Self {
        self.push_column(name, doc, true)
    }

    pub fn column(&mut self, name: &str, doc: &str) -> &mut Self {
        self.push_column(name, doc, false)
    }

    fn push_column(&mut self, name: &str, doc: &str, integer: bool) -> &mut Self {
        self.columns.push(Column {
            name: name.into(),
            doc: doc.into(),
            integer,
        });
        self
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width in report {}", self.name);
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn values(&self, name: &str) -> Vec<f64> {
        let i = self
            .column_index(name)
            .unwrap_or_else(|| panic!("no column {name} in report {}", self.name));
        self.rows.iter().map(|r| r[i]).collect()
    }

    pub fn check(&mut self, name: &str, verdict: Verdict, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            verdict,
            detail,
        });
    }

    pub fn check_bool(&mut self, name: &str, ok: bool, detail: String) {
        self.check(name, if ok { Verdict::Pass } else { Verdict::Fail }, detail);
    }

    /// Fits the rate of column `err` against column `h` and records a check
    /// named `rate_<err>`.
    pub fn fit_rate(&mut self, h: &str, err: &str, rule: RateRule) -> RateFit {
        let hs = self.values(h);
        let es = self.values(err);
        let points = es.len();
        let mut fit = RateFit {
            column: err.into(),
            rate: f64::NAN,
            residual: f64::NAN,
            points,
            exact: false,
        };
        let name = format!("rate_{err}");
        if es.iter().all(|e| e.abs() <= rule.exact_zero) {
            fit.exact = true;
            self.check(&name, Verdict::Pass, format!("all {points} errors at or below {:e}", rule.exact_zero));
        } else if points < 3 {
            self.check(&name, Verdict::Unreliable, format!("only {points} levels; a rate needs 3"));
        } else if es.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            self.check(&name, Verdict::Unreliable, "non-positive error among nonzero errors".into());
        } else {
            let (rate, residual) = loglog_fit(&hs, &es);
            fit.rate = rate;
            fit.residual = residual;
            let bounds = match rule.max {
                Some(max) => format!("[{:.3}, {:.3}]", rule.min, max),
                None => format!(">= {:.3}", rule.min),
            };
            let detail = format!("rate {rate:.4} (want {bounds}), residual {residual:.3e}");
            if residual > rule.max_residual {
                self.check(&name, Verdict::Unreliable, detail);
            } else {
                let ok = rate >= rule.min && rule.max.map_or(true, |m| rate <= m);
                self.check_bool(&name, ok, detail);
            }
        }
        self.fits.push(fit.clone());
        fit
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let docs: Vec<String> = self.columns.iter().map(|c| format!("{} = {}", c.name, c.doc)).collect();
        s.push_str(&format!("# {}. Columns: {}\n", self.description, docs.join("; ")));
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        s.push_str(&names.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&self.columns)
                .map(|(v, c)| if c.integer { format!("{}", *v as i64) } else { fmt_float(*v) })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn verdicts_csv(&self) -> String {
        let mut s = format!("# Checks for {}. verdict is PASS, FAIL or UNRELIABLE\ncheck,verdict,detail\n", self.name);
        for c in &self.checks {
            s.push_str(&format!("{},{},\"{}\"\n", c.name, c.verdict, c.detail.replace('"', "'")));
        }
        s
    }

    /// Writes `<name>.csv` and `<name>_verdicts.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let data = dir.join(format!("{}.csv", self.name));
        let verdicts = dir.join(format!("{}_verdicts.csv", self.name));
        write_atomic(&data, &self.to_csv())?;
        write_atomic(&verdicts, &self.verdicts_csv())?;
        Ok(vec![data, verdicts])
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}: {}\n", self.name, if self.passed() { "PASS" } else { "FAIL" });
        for c in &self.checks {
            s.push_str(&format!("  [{}] {}: {}\n", c.verdict, c.name, c.detail));
        }
        s
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
