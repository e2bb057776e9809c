//! Trajectory logs: CSV output, read-back and per-figure plot data.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::StepRecord;

pub const HEADER: [&str; 10] = ["t", "P1", "P2", "P3", "P4", "tip_x", "tip_y", "tip_z", "e_k", "u_k"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<StepRecord>,
}

// Debug formatting is the shortest representation that parses back to the
// same value, with '.' as the decimal separator.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl TrajectoryLog {
    pub fn push(&mut self, r: StepRecord) {
        self.rows.push(r);
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.rows.last()
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::Config(format!("csv: {e}"));
        w.write_record(HEADER).map_err(wrap)?;
        for r in &self.rows {
            let mut rec = vec![num(r.t)];
            rec.extend(r.pressures.iter().map(|&p| num(p)));
            rec.extend(r.tip.iter().map(|&p| num(p)));
            rec.push(opt(r.e_k));
            rec.push(opt(r.u_k));
            w.write_record(&rec).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Parses a log written by [`TrajectoryLog::write_csv`]. Step indices are
    /// recovered from the row position and `stride`.
    pub fn from_csv_str(text: &str, stride: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        if header.iter().ne(HEADER) {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let field = |k: usize| -> Result<Option<f64>> {
                let s = rec.get(k).unwrap_or("");
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number {s:?} in column {}", HEADER[k]),
                })
            };
            let req = |k: usize| -> Result<f64> {
                field(k)?.ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("missing {}", HEADER[k]),
                })
            };
            rows.push(StepRecord {
                step: i * stride,
                t: req(0)?,
                pressures: [req(1)?, req(2)?, req(3)?, req(4)?],
                tip: [req(5)?, req(6)?, req(7)?],
                e_k: field(8)?,
                u_k: field(9)?,
            });
        }
        Ok(TrajectoryLog { rows })
    }

    pub fn read_csv(path: impl AsRef<Path>, stride: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text, stride)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = HEADER.iter().position(|h| *h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match k {
                    0 => r.t,
                    1..=4 => r.pressures[k - 1],
                    5..=7 => r.tip[k - 5],
                    8 => r.e_k.unwrap_or(f64::NAN),
                    _ => r.u_k.unwrap_or(f64::NAN),
                })
                .collect(),
        )
    }

    /// Whitespace-separated columns for plotting: time, the merged pair
    /// pressures, tip displacement in cm, then e_k and u_k.
    pub fn plotdata(&self) -> String {
        let mut s = String::from("# t P_left P_right P1 P2 P3 P4 tip_x_cm tip_y_cm tip_z_cm e_k u_k\n");
        for r in &self.rows {
            let [p1, p2, p3, p4] = r.pressures;
            let cols = [
                r.t,
                p2 + p4,
                p1 + p3,
                p1,
                p2,
                p3,
                p4,
                100.0 * r.tip[0],
                100.0 * r.tip[1],
                100.0 * r.tip[2],
                r.e_k.unwrap_or(f64::NAN),
                r.u_k.unwrap_or(f64::NAN),
            ];
            let line: Vec<String> = cols.iter().map(|x| num(*x)).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write_plotdata(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.plotdata()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(step: usize, t: f64, e: Option<f64>) -> StepRecord {
        StepRecord {
            step,
            t,
            pressures: [0.1, 0.2, 1.3, 0.0],
            tip: [1e-7, -0.015, 0.0123456789],
            e_k: e,
            u_k: e.map(|x| x * 2e-6),
        }
    }

    #[test]
    fn empty_log_is_header_only() {
        assert_eq!(TrajectoryLog::default().to_csv_string(), "t,P1,P2,P3,P4,tip_x,tip_y,tip_z,e_k,u_k\n");
    }

    #[test]
    fn periodic_rows_leave_controller_cells_blank() {
        let log = TrajectoryLog {
            rows: vec![row(0, 0.0, None)],
        };
        let text = log.to_csv_string();
        let line = text.lines().nth(1).unwrap();
        assert!(line.ends_with(",,"), "{line}");
        assert!(!line.contains(' '));
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(TrajectoryLog::from_csv_str("t,P1\n0,1\n", 1).is_err());
    }

    #[test]
    fn plotdata_reports_pair_sums() {
        let log = TrajectoryLog {
            rows: vec![row(0, 0.0, Some(1.0))],
        };
        let data = log.plotdata();
        let cols: Vec<f64> = data.lines().nth(1).unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(cols[1], 0.2);
        assert_eq!(cols[2], 0.1 + 1.3);
        assert_eq!(cols[8], -1.5);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            vals in proptest::collection::vec((-1e3f64..1e3, any::<bool>()), 0..20),
            tiny in -1e-300f64..1e-300,
        ) {
            let rows: Vec<StepRecord> = vals
                .iter()
                .enumerate()
                .map(|(k, &(v, ctl))| StepRecord {
                    step: k,
                    t: k as f64 * 0.01,
                    pressures: [v, tiny, 0.0, -0.0],
                    tip: [v * 1e-9, v, f64::MIN_POSITIVE],
                    e_k: ctl.then_some(v.abs()),
                    u_k: ctl.then_some(v.abs() * 1e-6),
                })
                .collect();
            let log = TrajectoryLog { rows };
            let back = TrajectoryLog::from_csv_str(&log.to_csv_string(), 1).unwrap();
            prop_assert_eq!(back, log);
        }
    }
}
