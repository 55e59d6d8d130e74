//! Measured transmission traces: container, Touchstone and CSV readers.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::FitError;

/// Complex S21 over a strictly increasing frequency grid (GHz).
#[derive(Debug, Clone, PartialEq)]
pub struct S21Trace {
    pub frequencies_ghz: Vec<f64>,
    pub s21: Vec<Complex64>,
    pub source: String,
}

impl S21Trace {
    pub fn new(
        frequencies_ghz: Vec<f64>,
        s21: Vec<Complex64>,
        source: impl Into<String>,
    ) -> Result<Self, FitError> {
        if frequencies_ghz.len() != s21.len() {
            return Err(FitError::InvalidTrace(format!(
                "{} frequencies but {} samples",
                frequencies_ghz.len(),
                s21.len()
            )));
        }
        if frequencies_ghz.is_empty() {
            return Err(FitError::InvalidTrace("empty trace".into()));
        }
        if let Some(k) = frequencies_ghz.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(FitError::InvalidTrace(format!(
                "frequency {} does not increase",
                k + 1
            )));
        }
        if frequencies_ghz.iter().any(|f| !f.is_finite()) || s21.iter().any(|v| !v.is_finite()) {
            return Err(FitError::InvalidTrace("non-finite value".into()));
        }
        Ok(Self {
            frequencies_ghz,
            s21,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.s21.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s21.is_empty()
    }

    /// Sub-trace of samples with frequency in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> S21Trace {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&k| (lo..=hi).contains(&self.frequencies_ghz[k]))
            .collect();
        S21Trace {
            frequencies_ghz: idx.iter().map(|&k| self.frequencies_ghz[k]).collect(),
            s21: idx.iter().map(|&k| self.s21[k]).collect(),
            source: self.source.clone(),
        }
    }

    /// CSV with header `freq_GHz,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FitError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["freq_GHz", "re", "im"]).map_err(csv_err)?;
        for (f, s) in self.frequencies_ghz.iter().zip(&self.s21) {
            w.write_record([f.to_string(), s.re.to_string(), s.im.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> FitError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    FitError::Parse {
        line,
        reason: e.to_string(),
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> FitError {
    FitError::Parse {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PairFormat {
    Ri,
    Ma,
    Db,
}

/// Touchstone v1 two-port data; returns the S21 column.
///
/// The option line (`# <unit> S <RI|MA|DB> R <z>`) defaults to
/// `# GHZ S MA R 50`. Data records may wrap across lines.
pub fn parse_touchstone(text: &str, source: &str) -> Result<S21Trace, FitError> {
    let mut scale = 1.0; // to GHz
    let mut format = PairFormat::Ma;
    let mut seen_option = false;
    let mut pending: Vec<f64> = Vec::with_capacity(9);
    let mut pending_line = 0;
    let mut freqs = Vec::new();
    let mut s21 = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_option {
                continue; // later option lines are ignored
            }
            seen_option = true;
            let toks: Vec<String> = opts
                .split_whitespace()
                .map(str::to_ascii_uppercase)
                .collect();
            let mut k = 0;
            while k < toks.len() {
                match toks[k].as_str() {
                    "HZ" => scale = 1e-9,
                    "KHZ" => scale = 1e-6,
                    "MHZ" => scale = 1e-3,
                    "GHZ" => scale = 1.0,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => {
                        return Err(parse_err(
                            line_no,
                            format!("parameter type {} is not S", toks[k]),
                        ))
                    }
                    "RI" => format = PairFormat::Ri,
                    "MA" => format = PairFormat::Ma,
                    "DB" => format = PairFormat::Db,
                    "R" => {
                        k += 1;
                        let z = toks.get(k).and_then(|t| t.parse::<f64>().ok());
                        if !z.is_some_and(|z| z > 0.0) {
                            return Err(parse_err(
                                line_no,
                                "reference impedance missing or not positive",
                            ));
                        }
                    }
                    other => return Err(parse_err(line_no, format!("unknown option {other}"))),
                }
                k += 1;
            }
            continue;
        }
        if pending.is_empty() {
            pending_line = line_no;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("not a number: {tok}")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, "non-finite value"));
            }
            pending.push(v);
            if pending.len() == 9 {
                let f = pending[0] * scale;
                if freqs.last().is_some_and(|&prev| !(f > prev)) {
                    return Err(parse_err(
                        pending_line,
                        format!("frequency {f} GHz does not increase"),
                    ));
                }
                freqs.push(f);
                let (a, b) = (pending[3], pending[4]);
                s21.push(match format {
                    PairFormat::Ri => Complex64::new(a, b),
                    PairFormat::Ma => Complex64::from_polar(a, b.to_radians()),
                    PairFormat::Db => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
                });
                pending.clear();
                pending_line = line_no;
            }
        }
    }
    if !pending.is_empty() {
        return Err(parse_err(
            pending_line,
            format!("incomplete record: {} of 9 values", pending.len()),
        ));
    }
    if freqs.is_empty() {
        return Err(parse_err(text.lines().count(), "no data records"));
    }
    S21Trace::new(freqs, s21, source)
}

/// CSV with a required `freq_GHz,re,im` header.
pub fn parse_csv_trace(text: &str, source: &str) -> Result<S21Trace, FitError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["freq_GHz", "re", "im"] {
        return Err(parse_err(1, "header must be freq_GHz,re,im"));
    }
    let mut freqs = Vec::new();
    let mut s21 = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let num = |k: usize| -> Result<f64, FitError> {
            let v: f64 = rec[k]
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: {}", &rec[k])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, "non-finite value"))
            }
        };
        let f = num(0)?;
        if let Some(&prev) = freqs.last() {
            if !(f > prev) {
                return Err(parse_err(line, format!("frequency {f} does not increase")));
            }
        }
        freqs.push(f);
        s21.push(Complex64::new(num(1)?, num(2)?));
    }
    if freqs.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    S21Trace::new(freqs, s21, source)
}

/// Reads `.s2p` (any case) as Touchstone, anything else as CSV.
pub fn read_trace(path: &Path) -> Result<S21Trace, FitError> {
    let text = std::fs::read_to_string(path)?;
    let source = path.display().to_string();
    let is_s2p = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("s2p"));
    if is_s2p {
        parse_touchstone(&text, &source)
    } else {
        parse_csv_trace(&text, &source)
    }
}
