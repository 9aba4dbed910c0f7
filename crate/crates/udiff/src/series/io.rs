//! Plain-text serialization.
//!
//! ```text
//! # comment lines start with '#'
//! ftseries n=2 n_w=0 kmax=8 d_i=2 d_w=0 s=0.5 delta=1 h=1
//! k_1 .. k_n  m_1 .. m_n  w_1 .. w_{n_w}  re  im
//! ```
//! Only nonzero coefficients are written; floats use shortest round-trip form.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{FTSeries, Layout, Widths};
use crate::error::{Error, Result};

impl FTSeries {
    pub fn to_text(&self) -> String {
        let lay = self.layout();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "ftseries n={} n_w={} kmax={} d_i={} d_w={} s={} delta={} h={}",
            lay.n(),
            lay.n_w(),
            lay.kmax(),
            lay.d_i(),
            lay.d_w(),
            self.widths.s,
            self.widths.delta,
            self.widths.h
        );
        let nm = lay.n_modes();
        for p in 0..lay.n_poly() {
            let (a, b) = lay.split_poly(p);
            for mode in 0..nm {
                let c = self.coeffs()[p * nm + mode];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let mut fields: Vec<String> = lay.mode(mode).iter().map(|x| x.to_string()).collect();
                fields.extend(lay.action_monomial(a).iter().map(|x| x.to_string()));
                fields.extend(lay.param_monomial(b).iter().map(|x| x.to_string()));
                fields.push(c.re.to_string());
                fields.push(c.im.to_string());
                let _ = writeln!(out, "{}", fields.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<FTSeries> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Config("empty series file".into()))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("ftseries") {
            return Err(Error::Config("series file must start with 'ftseries'".into()));
        }
        let mut kv = HashMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| Error::Config(format!("bad header field '{f}'")))?;
            kv.insert(k, v);
        }
        let get_usize = |key: &str, default: Option<usize>| -> Result<usize> {
            match kv.get(key) {
                Some(v) => v.parse().map_err(|_| Error::Config(format!("header field {key}={v} is not an integer"))),
                None => default.ok_or_else(|| Error::Config(format!("header is missing {key}"))),
            }
        };
        let get_f64 = |key: &str| -> Result<f64> {
            match kv.get(key) {
                Some(v) => v.parse().map_err(|_| Error::Config(format!("header field {key}={v} is not a number"))),
                None => Ok(1.0),
            }
        };
        let n = get_usize("n", None)?;
        let n_w = get_usize("n_w", Some(0))?;
        let layout = Layout::new(n, n_w, get_usize("kmax", None)?, get_usize("d_i", Some(0))?, get_usize("d_w", Some(0))?)?;
        let mut f = FTSeries::zero(layout);
        f.widths = Widths { s: get_f64("s")?, delta: get_f64("delta")?, h: get_f64("h")? };
        let width = 2 * n + n_w + 2;
        for (lineno, line) in lines.enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != width {
                return Err(Error::Config(format!("coefficient line {} has {} fields, expected {width}", lineno + 2, toks.len())));
            }
            let bad = |t: &str| Error::Config(format!("cannot parse '{t}' on coefficient line {}", lineno + 2));
            let k = toks[..n].iter().map(|t| t.parse::<i64>().map_err(|_| bad(t))).collect::<Result<Vec<_>>>()?;
            let m = toks[n..2 * n].iter().map(|t| t.parse::<u32>().map_err(|_| bad(t))).collect::<Result<Vec<_>>>()?;
            let w = toks[2 * n..2 * n + n_w].iter().map(|t| t.parse::<u32>().map_err(|_| bad(t))).collect::<Result<Vec<_>>>()?;
            let re: f64 = toks[width - 2].parse().map_err(|_| bad(toks[width - 2]))?;
            let im: f64 = toks[width - 1].parse().map_err(|_| bad(toks[width - 1]))?;
            f.add(&k, &m, &w, Complex64::new(re, im)).map_err(|e| Error::Config(e.to_string()))?;
        }
        f.real = f.reality_defect() <= 1e-14 * f.max_abs().max(1.0);
        Ok(f)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<FTSeries> {
        let text = std::fs::read_to_string(path)?;
        FTSeries::from_text(&text)
    }
}
