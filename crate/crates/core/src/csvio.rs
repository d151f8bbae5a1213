//! CSV persistence for every stage artifact.
//!
//! Files start with optional `# key = value` metadata lines followed by a
//! header row. Columns are matched by name on read. Floats are written in
//! shortest round-trip form so a write/read cycle is bit-exact, and every
//! write goes through a temporary file that is renamed into place.

use nalgebra::Vector3;
use num_complex::Complex64;
use std::io::Write;
use std::path::Path;

use crate::analysis::{DopplerSpectrum, Overlay, VelocityPdf};
use crate::arm::TrackingResult;
use crate::calibration::{ErrorTerms, OnePortTerms};
use crate::channel::{S21Series, SounderConfig};
use crate::quadcopter::{Trajectory, TrajectorySample};
use crate::wind::TurbulenceSeries;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Schema {
        path: String,
        line: u64,
        message: String,
    },
}

type Result<T> = std::result::Result<T, CsvError>;

fn io_err(path: &Path, source: std::io::Error) -> CsvError {
    CsvError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parsed file: metadata pairs plus the requested columns in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Writes `rows` under `header` with `meta` comment lines, atomically.
pub fn write_table<I>(path: &Path, meta: &[(&str, String)], header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut buf = Vec::new();
    for (k, v) in meta {
        writeln!(buf, "# {k} = {v}").map_err(|e| io_err(path, e))?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let fail = |e: csv::Error| io_err(path, std::io::Error::other(e));
        w.write_record(header).map_err(fail)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(|x| fmt(*x))).map_err(fail)?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
    }
    write_atomic(path, &buf)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Reads the named columns; extra columns are ignored.
pub fn read_table(path: &Path, required: &[&str]) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_table(&text, required).map_err(|(line, message)| CsvError::Schema {
        path: path.display().to_string(),
        line,
        message,
    })
}

fn parse_table(text: &str, required: &[&str]) -> std::result::Result<Table, (u64, String)> {
    let mut meta = Vec::new();
    let mut skipped = 0u64;
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if let Some(c) = t.strip_prefix('#') {
            if let Some((k, v)) = c.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else if !t.is_empty() {
            break;
        }
        skipped += 1;
        body_start += line.len();
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text[body_start..].as_bytes());
    let header_line = skipped + 1;
    let headers = rdr
        .headers()
        .map_err(|e| (header_line, e.to_string()))?
        .clone();
    let idx = required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| (header_line, format!("missing column `{name}`")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let mut columns = vec![Vec::new(); required.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(header_line, |p| p.line() + skipped);
            (line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line()) + skipped;
        for (c, &i) in idx.iter().enumerate() {
            let field = rec.get(i).unwrap_or("");
            let x = field.parse::<f64>().map_err(|_| {
                (
                    line,
                    format!("column `{}`: `{field}` is not a number", required[c]),
                )
            })?;
            columns[c].push(x);
        }
    }
    Ok(Table { meta, columns })
}

fn meta_num<T: std::str::FromStr>(path: &Path, t: &Table, key: &str) -> Result<T> {
    t.meta(key)
        .ok_or_else(|| format!("missing `# {key}` metadata"))
        .and_then(|v| {
            v.parse::<T>()
                .map_err(|_| format!("bad `# {key}` value `{v}`"))
        })
        .map_err(|message| CsvError::Schema {
            path: path.display().to_string(),
            line: 1,
            message,
        })
}

fn schema(path: &Path, message: impl Into<String>) -> CsvError {
    CsvError::Schema {
        path: path.display().to_string(),
        line: 1,
        message: message.into(),
    }
}

const TURB: [&str; 4] = ["t_s", "u", "v", "w"];
const TURB_NED: [&str; 3] = ["wind_n", "wind_e", "wind_d"];

pub fn write_turbulence(path: &Path, s: &TurbulenceSeries) -> Result<()> {
    let mut header = TURB.to_vec();
    if s.vw.is_some() {
        header.extend(TURB_NED);
    }
    let rows = (0..s.len()).map(|i| {
        let mut r = vec![s.t[i], s.u[i], s.v[i], s.w[i]];
        if let Some(vw) = &s.vw {
            r.extend(vw[i].iter());
        }
        r
    });
    write_table(path, &[], &header, rows)
}

pub fn read_turbulence(path: &Path) -> Result<TurbulenceSeries> {
    let t = read_table(path, &TURB)?;
    let [tt, u, v, w]: [Vec<f64>; 4] = t.columns.try_into().expect("four columns");
    let vw = match read_table(path, &TURB_NED) {
        Ok(n) => Some(
            (0..n.rows())
                .map(|i| Vector3::new(n.columns[0][i], n.columns[1][i], n.columns[2][i]))
                .collect(),
        ),
        Err(CsvError::Schema { ref message, .. }) if message.starts_with("missing column") => None,
        Err(e) => return Err(e),
    };
    Ok(TurbulenceSeries { t: tt, u, v, w, vw })
}

const TRAJ: [&str; 13] = [
    "t_s",
    "north_m",
    "east_m",
    "down_m",
    "phi_rad",
    "theta_rad",
    "psi_rad",
    "v_north",
    "v_east",
    "v_down",
    "phi_dot",
    "theta_dot",
    "psi_dot",
];

pub fn write_trajectory(path: &Path, tr: &Trajectory) -> Result<()> {
    let rows = tr.samples.iter().map(|s| {
        let mut r = vec![s.t];
        r.extend(s.position.iter());
        r.extend(s.attitude.iter());
        r.extend(s.velocity.iter());
        r.extend(s.attitude_rate.iter());
        r
    });
    write_table(path, &[("dt_s", fmt(tr.dt))], &TRAJ, rows)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let t = read_table(path, &TRAJ)?;
    let dt: f64 = meta_num(path, &t, "dt_s")?;
    let c = &t.columns;
    let v3 = |k: usize, i: usize| Vector3::new(c[k][i], c[k + 1][i], c[k + 2][i]);
    let samples = (0..t.rows())
        .map(|i| TrajectorySample {
            t: c[0][i],
            position: v3(1, i),
            attitude: v3(4, i),
            velocity: v3(7, i),
            attitude_rate: v3(10, i),
        })
        .collect();
    Ok(Trajectory { dt, samples })
}

/// Tool path of the arm in its base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionLog {
    pub t: Vec<f64>,
    pub position: Vec<Vector3<f64>>,
    pub velocity: Vec<Vector3<f64>>,
}

impl MotionLog {
    pub fn from_tracking(r: &TrackingResult) -> Self {
        Self {
            t: r.states.iter().map(|s| s.t).collect(),
            position: r.states.iter().map(|s| s.pose.position).collect(),
            velocity: r.states.iter().map(|s| s.linear_velocity()).collect(),
        }
    }
}

const MOTION: [&str; 7] = ["t_s", "x_m", "y_m", "z_m", "vx", "vy", "vz"];

/// Writes tool position, velocity, orientation and joint angles per tick.
pub fn write_motion_log(path: &Path, r: &TrackingResult) -> Result<()> {
    let mut header = MOTION.to_vec();
    header.extend(["roll_rad", "pitch_rad", "yaw_rad"]);
    header.extend(["q1", "q2", "q3", "q4", "q5", "q6", "q7"]);
    let rows = r.states.iter().map(|s| {
        let mut row = vec![s.t];
        row.extend(s.pose.position.iter());
        row.extend(s.linear_velocity().iter());
        row.extend(s.pose.ypr().iter());
        row.extend(s.q.iter());
        row
    });
    write_table(path, &[], &header, rows)
}

pub fn read_motion_log(path: &Path) -> Result<MotionLog> {
    let t = read_table(path, &MOTION)?;
    let c = &t.columns;
    let v3 = |k: usize, i: usize| Vector3::new(c[k][i], c[k + 1][i], c[k + 2][i]);
    Ok(MotionLog {
        t: c[0].clone(),
        position: (0..t.rows()).map(|i| v3(1, i)).collect(),
        velocity: (0..t.rows()).map(|i| v3(4, i)).collect(),
    })
}

const S21: [&str; 3] = ["t_s", "re", "im"];

pub fn write_s21(path: &Path, s: &S21Series) -> Result<()> {
    let c = &s.config;
    let meta = [
        ("f_c_hz", fmt(c.f_c)),
        ("ts_s", fmt(c.ts)),
        ("n_points", c.n_points.to_string()),
        ("distance_ft", fmt(s.distance_ft)),
        ("if_bandwidth_hz", fmt(c.if_bandwidth)),
        (
            "noise_floor_db",
            c.noise_floor_db.map_or("none".into(), fmt),
        ),
    ];
    let rows = s
        .samples
        .iter()
        .enumerate()
        .map(|(i, x)| vec![s.time(i), x.re, x.im]);
    write_table(path, &meta, &S21, rows)
}

pub fn read_s21(path: &Path) -> Result<S21Series> {
    let t = read_table(path, &S21)?;
    let defaults = SounderConfig::default();
    let noise_floor_db = match t.meta("noise_floor_db") {
        None | Some("none") => None,
        Some(_) => Some(meta_num(path, &t, "noise_floor_db")?),
    };
    let config = SounderConfig {
        f_c: meta_num(path, &t, "f_c_hz")?,
        ts: meta_num(path, &t, "ts_s")?,
        n_points: meta_num(path, &t, "n_points")?,
        if_bandwidth: match t.meta("if_bandwidth_hz") {
            Some(_) => meta_num(path, &t, "if_bandwidth_hz")?,
            None => defaults.if_bandwidth,
        },
        noise_floor_db,
    };
    if t.rows() != config.n_points {
        return Err(schema(
            path,
            format!("n_points = {} but {} rows", config.n_points, t.rows()),
        ));
    }
    Ok(S21Series {
        samples: (0..t.rows())
            .map(|i| Complex64::new(t.columns[1][i], t.columns[2][i]))
            .collect(),
        distance_ft: meta_num(path, &t, "distance_ft")?,
        config,
    })
}

const TERMS: [&str; 7] = [
    "t_s",
    "e00_re",
    "e00_im",
    "e11_re",
    "e11_im",
    "e10e01_re",
    "e10e01_im",
];

pub fn write_error_terms(path: &Path, e: &ErrorTerms) -> Result<()> {
    let rows = e.terms.iter().enumerate().map(|(i, t)| {
        vec![
            i as f64 * e.ts,
            t.e00.re,
            t.e00.im,
            t.e11.re,
            t.e11.im,
            t.e10e01.re,
            t.e10e01.im,
        ]
    });
    write_table(path, &[("ts_s", fmt(e.ts))], &TERMS, rows)
}

pub fn read_error_terms(path: &Path) -> Result<ErrorTerms> {
    let t = read_table(path, &TERMS)?;
    let c = &t.columns;
    let z = |k: usize, i: usize| Complex64::new(c[k][i], c[k + 1][i]);
    Ok(ErrorTerms {
        ts: meta_num(path, &t, "ts_s")?,
        terms: (0..t.rows())
            .map(|i| OnePortTerms {
                e00: z(1, i),
                e11: z(3, i),
                e10e01: z(5, i),
            })
            .collect(),
    })
}

const SPECTRUM: [&str; 2] = ["freq_hz", "power_db"];

pub fn write_spectrum(path: &Path, s: &DopplerSpectrum) -> Result<()> {
    let rows = s.freqs.iter().zip(&s.power_db).map(|(f, p)| vec![*f, *p]);
    write_table(path, &[], &SPECTRUM, rows)
}

pub fn read_spectrum(path: &Path) -> Result<DopplerSpectrum> {
    let mut t = read_table(path, &SPECTRUM)?;
    let p = t.columns.pop().unwrap_or_default();
    let f = t.columns.pop().unwrap_or_default();
    DopplerSpectrum::from_power(f, p).map_err(|e| schema(path, e.to_string()))
}

/// One row of the per-distance spread table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadRow {
    pub distance_ft: f64,
    pub f_neg: f64,
    pub f_pos: f64,
}

const SPREAD: [&str; 3] = ["distance_ft", "f_neg_hz", "f_pos_hz"];

pub fn write_spread_table(path: &Path, rows: &[SpreadRow]) -> Result<()> {
    write_table(
        path,
        &[],
        &SPREAD,
        rows.iter().map(|r| vec![r.distance_ft, r.f_neg, r.f_pos]),
    )
}

pub fn read_spread_table(path: &Path) -> Result<Vec<SpreadRow>> {
    let t = read_table(path, &SPREAD)?;
    let c = &t.columns;
    Ok((0..t.rows())
        .map(|i| SpreadRow {
            distance_ft: c[0][i],
            f_neg: c[1][i],
            f_pos: c[2][i],
        })
        .collect())
}

const PATHLOSS: [&str; 2] = ["distance_m", "pg_db"];

pub fn write_path_loss_points(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    write_table(
        path,
        &[],
        &PATHLOSS,
        points.iter().map(|(d, g)| vec![*d, *g]),
    )
}

pub fn read_path_loss_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let t = read_table(path, &PATHLOSS)?;
    Ok(t.columns[0]
        .iter()
        .copied()
        .zip(t.columns[1].iter().copied())
        .collect())
}

pub fn write_overlay(path: &Path, o: &Overlay) -> Result<()> {
    write_table(
        path,
        &[("offset_db", fmt(o.offset_db))],
        &["freq_hz", "measured_db", "theoretical_db"],
        o.rows
            .iter()
            .map(|r| vec![r.freq, r.measured_db, r.theoretical_db]),
    )
}

pub fn write_velocity_pdf(path: &Path, p: &VelocityPdf) -> Result<()> {
    write_table(
        path,
        &[("bin_width", fmt(p.bin_width))],
        &["lo_mps", "hi_mps", "density"],
        p.density
            .iter()
            .enumerate()
            .map(|(i, d)| vec![p.edges[i], p.edges[i + 1], *d]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_roundtrips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE, -0.0] {
            assert_eq!(fmt(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn metadata_and_columns() {
        let t = parse_table("# a = 1\n# b = x y\nq,p\n1,2\n3,4\n", &["p", "q"]).unwrap();
        assert_eq!(t.meta("b"), Some("x y"));
        assert_eq!(t.columns, vec![vec![2.0, 4.0], vec![1.0, 3.0]]);
    }

    #[test]
    fn schema_errors_report_lines() {
        let e = parse_table("# a = 1\nq,p\n1,2\n3,oops\n", &["p"]).unwrap_err();
        assert_eq!(e.0, 4);
        let e = parse_table("q,p\n1,2\n", &["r"]).unwrap_err();
        assert_eq!(e, (1, "missing column `r`".into()));
    }

    #[test]
    fn s21_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = S21Series {
            config: SounderConfig {
                n_points: 4,
                ..Default::default()
            },
            samples: vec![
                Complex64::new(0.1, -0.2),
                Complex64::new(1.0 / 3.0, 0.0),
                Complex64::new(-1e-9, 7.0),
                Complex64::new(0.0, -0.0),
            ],
            distance_ft: 5.5,
        };
        write_s21(&path, &s).unwrap();
        assert_eq!(read_s21(&path).unwrap(), s);
    }
}
