//! Plain-text artifacts. Floats are written with `{:e}`, which prints the
//! shortest representation that parses back to the same bits.

use std::fmt::Write as _;

use num_complex::Complex64;

use maxinv_core::forward::{Dataset, IncidentWave, TraceData};
use maxinv_core::Error;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Header `# key value` lines followed by body lines.
struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    header: Vec<(String, String)>,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str, kind: &str) -> Result<Reader<'a>, Error> {
        let mut header = Vec::new();
        let mut lines = Vec::new();
        let mut first = true;
        for (i, l) in text.lines().enumerate() {
            if first {
                if l.trim() != format!("# maxinv {kind}") {
                    return Err(parse_err(i + 1, format!("expected '# maxinv {kind}' header")));
                }
                first = false;
                continue;
            }
            if let Some(rest) = l.strip_prefix("# ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                header.push((k.to_string(), v.to_string()));
            } else if !l.trim().is_empty() {
                lines.push((i + 1, l));
            }
        }
        if first {
            return Err(parse_err(0, "empty file"));
        }
        Ok(Reader { lines, pos: 0, header })
    }

    fn header(&self, key: &str) -> Result<&str, Error> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| parse_err(1, format!("missing header '{key}'")))
    }

    fn next(&mut self) -> Result<(usize, Vec<&'a str>), Error> {
        let last = self.lines.last().map_or(0, |l| l.0);
        let (n, l) = *self
            .lines
            .get(self.pos)
            .ok_or_else(|| parse_err(last + 1, "unexpected end of file"))?;
        self.pos += 1;
        Ok((n, l.split_whitespace().collect()))
    }

    fn keyed(&mut self, key: &str, count: usize) -> Result<(usize, Vec<&'a str>), Error> {
        let (n, f) = self.next()?;
        if f.first() != Some(&key) || f.len() != count + 1 {
            return Err(parse_err(n, format!("expected '{key}' with {count} values")));
        }
        Ok((n, f[1..].to_vec()))
    }

    fn done(&self) -> Result<(), Error> {
        match self.lines.get(self.pos) {
            Some((n, _)) => Err(parse_err(*n, "trailing content")),
            None => Ok(()),
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, Error> {
    s.parse().map_err(|_| parse_err(line, format!("cannot parse '{s}'")))
}

fn write_trace(out: &mut String, name: &str, t: &TraceData) {
    writeln!(out, "trace {name} {} {} {}", t.tag, t.num_points(), t.num_waves()).unwrap();
    for i in 0..t.num_points() {
        let p = t.midpoints[i];
        write!(out, "{:e} {:e} {:e}", p[0], p[1], t.lengths[i]).unwrap();
        for w in &t.waves {
            write!(out, " {:e} {:e}", w[i].re, w[i].im).unwrap();
        }
        out.push('\n');
    }
}

fn read_trace(r: &mut Reader, name: &str) -> Result<TraceData, Error> {
    let (n, f) = r.keyed("trace", 4)?;
    if f[0] != name {
        return Err(parse_err(n, format!("expected trace '{name}', found '{}'", f[0])));
    }
    let tag = f[1].to_string();
    let (points, waves): (usize, usize) = (num(n, f[2])?, num(n, f[3])?);
    let mut t = TraceData {
        tag,
        midpoints: Vec::with_capacity(points),
        lengths: Vec::with_capacity(points),
        waves: vec![Vec::with_capacity(points); waves],
    };
    for _ in 0..points {
        let (n, f) = r.next()?;
        if f.len() != 3 + 2 * waves {
            return Err(parse_err(n, format!("expected {} values", 3 + 2 * waves)));
        }
        t.midpoints.push([num(n, f[0])?, num(n, f[1])?]);
        t.lengths.push(num(n, f[2])?);
        for (m, w) in t.waves.iter_mut().enumerate() {
            w.push(Complex64::new(num(n, f[3 + 2 * m])?, num(n, f[4 + 2 * m])?));
        }
    }
    Ok(t)
}

/// Synthetic measurements with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub config_checksum: String,
    pub seed: u64,
    pub eta: f64,
    pub amplitude: f64,
    pub dataset: Dataset,
}

impl DatasetFile {
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let mut s = String::from("# maxinv dataset\n");
        writeln!(s, "# config-sha256 {}", self.config_checksum).unwrap();
        writeln!(s, "# mesh-sha256 {}", d.mesh_checksum).unwrap();
        writeln!(s, "# seed {}", self.seed).unwrap();
        writeln!(s, "# eta {:e}", self.eta).unwrap();
        writeln!(s, "# amplitude {:e}", self.amplitude).unwrap();
        writeln!(s, "h {:e}", d.h).unwrap();
        writeln!(s, "waves {}", d.waves.len()).unwrap();
        for w in &d.waves {
            writeln!(s, "{:e} {:e}", w.direction[0], w.direction[1]).unwrap();
        }
        write_trace(&mut s, "gamma0_total", &d.gamma0_total);
        write_trace(&mut s, "gamma0_background", &d.gamma0_background);
        write_trace(&mut s, "interior_delta", &d.interior_delta);
        s
    }

    pub fn from_text(text: &str) -> Result<DatasetFile, Error> {
        let mut r = Reader::new(text, "dataset")?;
        let config_checksum = r.header("config-sha256")?.to_string();
        let mesh_checksum = r.header("mesh-sha256")?.to_string();
        let seed = num(1, r.header("seed")?)?;
        let eta = num(1, r.header("eta")?)?;
        let amplitude = num(1, r.header("amplitude")?)?;
        let (n, f) = r.keyed("h", 1)?;
        let h = num(n, f[0])?;
        let (n, f) = r.keyed("waves", 1)?;
        let count: usize = num(n, f[0])?;
        let mut waves = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, f) = r.next()?;
            if f.len() != 2 {
                return Err(parse_err(n, "expected a wave direction"));
            }
            waves.push(IncidentWave::new([num(n, f[0])?, num(n, f[1])?]).map_err(|e| parse_err(n, e.to_string()))?);
        }
        let gamma0_total = read_trace(&mut r, "gamma0_total")?;
        let gamma0_background = read_trace(&mut r, "gamma0_background")?;
        let interior_delta = read_trace(&mut r, "interior_delta")?;
        r.done()?;
        Ok(DatasetFile {
            config_checksum,
            seed,
            eta,
            amplitude,
            dataset: Dataset {
                mesh_checksum,
                h,
                waves,
                gamma0_total,
                gamma0_background,
                interior_delta,
            },
        })
    }
}

/// Difference traces on the interior curve, completed or exact.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletedFile {
    pub config_checksum: String,
    /// `qr` or `exact`.
    pub source: String,
    pub qr_delta: f64,
    pub qr_max_iters: usize,
    pub qr_scaled: bool,
    pub iterations: Vec<usize>,
    pub final_residuals: Vec<f64>,
    pub traces: TraceData,
}

impl CompletedFile {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# maxinv completed\n");
        writeln!(s, "# config-sha256 {}", self.config_checksum).unwrap();
        writeln!(s, "# source {}", self.source).unwrap();
        writeln!(s, "# qr-delta {:e}", self.qr_delta).unwrap();
        writeln!(s, "# qr-max-iters {}", self.qr_max_iters).unwrap();
        writeln!(s, "# qr-scaled {}", self.qr_scaled).unwrap();
        let its: Vec<String> = self.iterations.iter().map(|i| i.to_string()).collect();
        writeln!(s, "# qr-iterations {}", its.join(" ")).unwrap();
        let res: Vec<String> = self.final_residuals.iter().map(|v| format!("{v:e}")).collect();
        writeln!(s, "# qr-residuals {}", res.join(" ")).unwrap();
        write_trace(&mut s, "interior", &self.traces);
        s
    }

    pub fn from_text(text: &str) -> Result<CompletedFile, Error> {
        let mut r = Reader::new(text, "completed")?;
        let list = |v: &str| -> Vec<String> { v.split_whitespace().map(str::to_string).collect() };
        let iterations = list(r.header("qr-iterations")?)
            .iter()
            .map(|v| num(1, v))
            .collect::<Result<_, _>>()?;
        let final_residuals = list(r.header("qr-residuals")?)
            .iter()
            .map(|v| num(1, v))
            .collect::<Result<_, _>>()?;
        let out = CompletedFile {
            config_checksum: r.header("config-sha256")?.to_string(),
            source: r.header("source")?.to_string(),
            qr_delta: num(1, r.header("qr-delta")?)?,
            qr_max_iters: num(1, r.header("qr-max-iters")?)?,
            qr_scaled: num(1, r.header("qr-scaled")?)?,
            iterations,
            final_residuals,
            traces: read_trace(&mut r, "interior")?,
        };
        r.done()?;
        Ok(out)
    }
}
