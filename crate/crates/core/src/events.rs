//! Time-tagged detection events and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 3] = ["x_mm", "y_mm", "t_s"];

/// One detected particle: transverse position `x`, position `y` across the
/// fringes (both mm) and arrival time `t` (s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// Events ordered by arrival time, recorded over `duration` s on a detector
/// window of width `window` mm.
#[derive(Debug, Clone, PartialEq)]
pub struct EventList {
    events: Vec<Event>,
    duration: f64,
    window: f64,
}

impl EventList {
    pub fn new(events: Vec<Event>, duration: f64, window: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::Input(format!("duration must be > 0, got {duration}")));
        }
        if !(window.is_finite() && window > 0.0) {
            return Err(Error::Input(format!("window must be > 0, got {window}")));
        }
        let mut last = f64::NEG_INFINITY;
        for (i, e) in events.iter().enumerate() {
            if !(e.x.is_finite() && e.y.is_finite() && e.t.is_finite()) {
                return Err(Error::Input(format!("event {i} has a non-finite coordinate")));
            }
            if !(0.0..window).contains(&e.y) {
                return Err(Error::Input(format!(
                    "event {i}: y = {} outside [0, {window})",
                    e.y
                )));
            }
            if !(0.0..=duration).contains(&e.t) {
                return Err(Error::Input(format!(
                    "event {i}: t = {} outside [0, {duration}]",
                    e.t
                )));
            }
            if e.t < last {
                return Err(Error::Input(format!("event {i}: arrival times decrease")));
            }
            last = e.t;
        }
        Ok(EventList {
            events,
            duration,
            window,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Events with `t` in `[start, end)`.
    pub fn slice_time(&self, start: f64, end: f64) -> &[Event] {
        let a = self.events.partition_point(|e| e.t < start);
        let b = self.events.partition_point(|e| e.t < end);
        &self.events[a..b]
    }

    pub fn read_csv<R: Read>(reader: R, duration: f64, window: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(Error::Input(format!(
                "expected header {}, found {}",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut events = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Input(format!("row {}: expected 3 fields", i + 1)));
            }
            let field = |k: usize| -> Result<f64> {
                rec[k].trim().parse::<f64>().map_err(|e| {
                    Error::Input(format!("row {}, column {}: {e}", i + 1, CSV_HEADER[k]))
                })
            };
            events.push(Event {
                x: field(0)?,
                y: field(1)?,
                t: field(2)?,
            });
        }
        EventList::new(events, duration, window)
    }

    pub fn read_csv_path(path: &Path, duration: f64, window: f64) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| Error::Input(format!("cannot open {}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f), duration, window)
    }

    /// Writes the canonical form: shortest round-trip decimal for each value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(CSV_HEADER)?;
        let mut buf = [String::new(), String::new(), String::new()];
        for e in &self.events {
            buf[0] = e.x.to_string();
            buf[1] = e.y.to_string();
            buf[2] = e.t.to_string();
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(x: f64, y: f64, t: f64) -> Event {
        Event { x, y, t }
    }

    #[test]
    fn validation() {
        assert!(EventList::new(vec![ev(0.0, 1.0, 0.5)], 1.0, 2.0).is_ok());
        assert!(EventList::new(vec![ev(0.0, 2.0, 0.5)], 1.0, 2.0).is_err());
        assert!(EventList::new(vec![ev(0.0, 1.0, 1.5)], 1.0, 2.0).is_err());
        assert!(EventList::new(vec![ev(0.0, 1.0, 0.5), ev(0.0, 1.0, 0.4)], 1.0, 2.0).is_err());
        assert!(EventList::new(vec![], 0.0, 2.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let list = EventList::new(
            vec![ev(0.1, 0.25, 0.0), ev(3.0, 1e-7, 0.012_5), ev(2.5, 1.999_999, 0.9)],
            1.0,
            2.0,
        )
        .unwrap();
        let mut out = Vec::new();
        list.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out.clone()).unwrap();
        assert!(text.starts_with("x_mm,y_mm,t_s\n0.1,0.25,0\n"));
        let back = EventList::read_csv(&out[..], 1.0, 2.0).unwrap();
        assert_eq!(back, list);
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn csv_errors() {
        let bad_header = "a,b,c\n1,2,3\n";
        assert!(EventList::read_csv(bad_header.as_bytes(), 1.0, 5.0).is_err());
        let bad_value = "x_mm,y_mm,t_s\n1,abc,0.1\n";
        assert!(EventList::read_csv(bad_value.as_bytes(), 1.0, 5.0).is_err());
        let unsorted = "x_mm,y_mm,t_s\n1,1,0.5\n1,1,0.1\n";
        assert!(EventList::read_csv(unsorted.as_bytes(), 1.0, 5.0).is_err());
    }

    #[test]
    fn time_slices() {
        let list = EventList::new(
            (0..10).map(|i| ev(0.0, 0.5, i as f64 * 0.1)).collect(),
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(list.slice_time(0.25, 0.55).len(), 3);
        assert_eq!(list.slice_time(2.0, 3.0).len(), 0);
    }
}
