//! Labeled instantaneous-sample CSV.
//!
//! ```text
//! t,i_a,i_b,i_c,label
//! # series 0-0 class=100000 sample_rate=25600 frequency=50 phase_deg=12.500000 timeline=0.000000000@100000
//! 0.000000000,0.000000,-12.366839,12.366839,000000
//! ```
//!
//! Times carry 9 decimals, currents 6. A `# series <id> key=value ...` line
//! opens each series; other `#` lines are ignored.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forest::TrainingSet;
use crate::label::FaultLabel;
use crate::sim::{FaultEvent, PhaseSample, TriPhaseSeries};

pub const DATASET_HEADER: &str = "t,i_a,i_b,i_c,label";
pub const CURRENT_FEATURES: [&str; 3] = ["i_a", "i_b", "i_c"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRow {
    pub t: f64,
    pub currents: [f64; 3],
    pub label: FaultLabel,
}

/// Ordered `key=value` pairs from a series comment line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeriesMeta(Vec<(String, String)>);

impl SeriesMeta {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.0.push((key.to_string(), value)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBlock {
    /// Empty only for rows that precede any series line.
    pub id: String,
    pub meta: SeriesMeta,
    pub rows: Vec<DatasetRow>,
}

pub fn format_timeline(timeline: &[FaultEvent]) -> String {
    if timeline.is_empty() {
        return "none".into();
    }
    timeline.iter().map(|e| format!("{:.9}@{}", e.time, e.label)).collect::<Vec<_>>().join(";")
}

pub fn parse_timeline(s: &str) -> Result<Vec<FaultEvent>> {
    if s == "none" || s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|item| {
            let (t, l) = item
                .split_once('@')
                .ok_or_else(|| Error::InvalidArgument(format!("timeline entry {item:?} is not <t>@<label>")))?;
            let time: f64 = t.parse().map_err(|_| Error::InvalidArgument(format!("invalid timeline time {t:?}")))?;
            Ok(FaultEvent::new(time, l.parse()?))
        })
        .collect()
}

impl SeriesBlock {
    /// Block carrying every sample of `series`, labeled by `labels`.
    pub fn from_series(id: impl Into<String>, series: &TriPhaseSeries, labels: &[FaultLabel]) -> Result<SeriesBlock> {
        if labels.len() != series.len() {
            return Err(Error::InvalidArgument("one label per sample is required".into()));
        }
        let mut meta = SeriesMeta::default();
        meta.set("sample_rate", series.sample_rate.to_string());
        meta.set("frequency", series.frequency.to_string());
        meta.set("phase_deg", format!("{:.6}", series.phase_deg));
        meta.set("timeline", format_timeline(&series.fault_timeline));
        let rows = series
            .samples
            .iter()
            .zip(labels)
            .map(|(s, l)| DatasetRow { t: s.t, currents: s.currents, label: *l })
            .collect();
        Ok(SeriesBlock { id: id.into(), meta, rows })
    }

    fn meta_f64(&self, key: &str) -> Result<Option<f64>> {
        self.meta
            .get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::InvalidArgument(format!("series {}: invalid {key} {v:?}", self.id)))
            })
            .transpose()
    }

    /// Rebuild a uniformly sampled series. The sample rate comes from the
    /// metadata, or from the first two timestamps when absent.
    pub fn to_series(&self) -> Result<TriPhaseSeries> {
        if self.rows.len() < 2 {
            return Err(Error::InvalidArgument(format!("series {:?} has fewer than 2 rows", self.id)));
        }
        let sample_rate = match self.meta_f64("sample_rate")? {
            Some(fs) => fs,
            None => 1.0 / (self.rows[1].t - self.rows[0].t),
        };
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("series {:?}: bad sample rate", self.id)));
        }
        let t0 = self.rows[0].t;
        let dt = 1.0 / sample_rate;
        let mut samples = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let t = t0 + i as f64 * dt;
            // timestamps are printed with 9 decimals
            if (row.t - t).abs() > 1e-8 + 1e-9 * t.abs() {
                return Err(Error::InvalidArgument(format!(
                    "series {:?} is not uniformly sampled at {sample_rate} Hz (row {i})",
                    self.id
                )));
            }
            samples.push(PhaseSample { t, currents: row.currents });
        }
        Ok(TriPhaseSeries {
            sample_rate,
            frequency: self.meta_f64("frequency")?.unwrap_or(50.0),
            phase_deg: self.meta_f64("phase_deg")?.unwrap_or(0.0),
            samples,
            fault_timeline: parse_timeline(self.meta.get("timeline").unwrap_or("none"))?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetFile {
    pub blocks: Vec<SeriesBlock>,
}

impl DatasetFile {
    pub fn rows(&self) -> impl Iterator<Item = &DatasetRow> {
        self.blocks.iter().flat_map(|b| b.rows.iter())
    }

    pub fn row_count(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    /// Instantaneous samples as a 3-feature training set.
    pub fn to_training_set(&self) -> TrainingSet {
        let mut set = TrainingSet::new(CURRENT_FEATURES.map(String::from).to_vec()).expect("non-empty names");
        for row in self.rows() {
            set.push(&row.currents, row.label).expect("width 3");
        }
        set
    }

    pub fn write_string(&self) -> Result<String> {
        let mut out = String::with_capacity(64 + self.row_count() * 48);
        out.push_str(DATASET_HEADER);
        out.push('\n');
        for (i, block) in self.blocks.iter().enumerate() {
            if block.id.is_empty() {
                if i > 0 {
                    return Err(Error::InvalidArgument("only the first series may have an empty id".into()));
                }
            } else {
                if block.id.contains(char::is_whitespace) {
                    return Err(Error::InvalidArgument(format!("series id {:?} contains whitespace", block.id)));
                }
                out.push_str("# series ");
                out.push_str(&block.id);
                for (k, v) in block.meta.iter() {
                    if k.contains(['=', ' ']) || v.contains(char::is_whitespace) || v.is_empty() {
                        return Err(Error::InvalidArgument(format!("metadata {k}={v:?} cannot be written")));
                    }
                    let _ = write!(out, " {k}={v}");
                }
                out.push('\n');
            }
            for r in &block.rows {
                let _ = writeln!(
                    out,
                    "{:.9},{:.6},{:.6},{:.6},{}",
                    r.t, r.currents[0], r.currents[1], r.currents[2], r.label
                );
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<DatasetFile> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, h)) if h == DATASET_HEADER => {}
            Some((n, h)) => return Err(Error::parse(n, format!("expected header {DATASET_HEADER:?}, found {h:?}"))),
            None => return Err(Error::parse(1, "empty dataset file")),
        }

        let mut blocks: Vec<SeriesBlock> = Vec::new();
        for (n, line) in lines {
            if let Some(rest) = line.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                if parts.next() != Some("series") {
                    continue;
                }
                let id = parts.next().ok_or_else(|| Error::parse(n, "series line without id"))?;
                let mut meta = SeriesMeta::default();
                for kv in parts {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::parse(n, format!("metadata item {kv:?} is not key=value")))?;
                    meta.set(k, v);
                }
                blocks.push(SeriesBlock { id: id.to_string(), meta, rows: Vec::new() });
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let row = parse_row(n, line)?;
            if blocks.is_empty() {
                blocks.push(SeriesBlock { id: String::new(), meta: SeriesMeta::default(), rows: Vec::new() });
            }
            let block = blocks.last_mut().expect("pushed above");
            if block.rows.last().is_some_and(|prev| !(row.t > prev.t)) {
                return Err(Error::parse(n, "rows are not time-ordered within the series"));
            }
            block.rows.push(row);
        }
        Ok(DatasetFile { blocks })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DatasetFile> {
        DatasetFile::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.write_string()?)?;
        Ok(())
    }
}

fn parse_row(n: usize, line: &str) -> Result<DatasetRow> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 5 {
        return Err(Error::parse(n, format!("expected 5 fields, found {}", fields.len())));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::parse(n, format!("invalid {what} {s:?}")))
    };
    let label: FaultLabel = fields[4].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?;
    Ok(DatasetRow {
        t: num(fields[0], "time")?,
        currents: [num(fields[1], "i_a")?, num(fields[2], "i_b")?, num(fields[3], "i_c")?],
        label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimConfig};

    fn sample_file() -> DatasetFile {
        let cfg = SimConfig { phase_deg: 12.5, ..SimConfig::default() };
        let tl = [FaultEvent::new(0.005, "100000".parse().unwrap())];
        let s = simulate(&cfg, &tl, 0.01).unwrap();
        let labels: Vec<FaultLabel> = s.samples.iter().map(|p| crate::sim::label_at(&tl, p.t)).collect();
        let mut block = SeriesBlock::from_series("a", &s, &labels).unwrap();
        block.meta.set("class", "100000");
        DatasetFile { blocks: vec![block] }
    }

    #[test]
    fn save_load_save_is_identical() {
        let text = sample_file().write_string().unwrap();
        let parsed = DatasetFile::parse(&text).unwrap();
        assert_eq!(parsed.write_string().unwrap(), text);
        assert!(text.starts_with("t,i_a,i_b,i_c,label\n# series a sample_rate=25600 frequency=50 phase_deg=12.500000"));
    }

    #[test]
    fn block_round_trips_to_series() {
        let file = DatasetFile::parse(&sample_file().write_string().unwrap()).unwrap();
        let s = file.blocks[0].to_series().unwrap();
        assert_eq!(s.sample_rate, 25_600.0);
        assert_eq!(s.phase_deg, 12.5);
        assert_eq!(s.fault_timeline.len(), 1);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn truncated_row_reports_line() {
        let text = sample_file().write_string().unwrap();
        let cut = &text[..text.len() - 20];
        let last_line = cut.lines().count();
        match DatasetFile::parse(cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, last_line),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_and_label_errors() {
        assert!(DatasetFile::parse("t,a,b,c,label\n").is_err());
        assert!(DatasetFile::parse("").is_err());
        let bad_label = format!("{DATASET_HEADER}\n0.0,1,2,3,10201\n");
        assert!(matches!(DatasetFile::parse(&bad_label), Err(Error::Parse { line: 2, .. })));
        let unordered = format!("{DATASET_HEADER}\n0.1,1,2,3,000000\n0.0,1,2,3,000000\n");
        assert!(matches!(DatasetFile::parse(&unordered), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn rows_without_series_line() {
        let text = format!("{DATASET_HEADER}\n0.000000000,1.000000,2.000000,3.000000,000000\n");
        let file = DatasetFile::parse(&text).unwrap();
        assert_eq!(file.blocks[0].id, "");
        assert_eq!(file.write_string().unwrap(), text);
        assert_eq!(file.to_training_set().len(), 1);
    }

    #[test]
    fn timeline_text() {
        let tl = parse_timeline("0.040000000@101000;0.100000000@111000").unwrap();
        assert_eq!(tl.len(), 2);
        assert_eq!(format_timeline(&tl), "0.040000000@101000;0.100000000@111000");
        assert!(parse_timeline("none").unwrap().is_empty());
        assert!(parse_timeline("0.1:101000").is_err());
    }
}
