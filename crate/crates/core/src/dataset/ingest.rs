//! JSONL and CSV readers and writers.
//!
//! JSONL: one object per line,
//! `{"algorithm": str, "environment": str, "hypers": {...}, "run": int, "score": number}`.
//! CSV: header `algorithm,environment,run,score,hp.<name>,...`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use super::setting::format_number;
use super::{Dataset, DatasetBuilder, HpValue, HyperparameterSetting, ScoreRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::arg(format!("unknown format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: Format) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        Format::Jsonl => read_jsonl(BufReader::new(file)),
        Format::Csv => read_csv(file),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_score(raw: &str, line: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("score {raw:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::NonFiniteScore { line });
    }
    Ok(v)
}

fn parse_run(raw: &str, line: usize) -> Result<u64> {
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("run {raw:?} is not a non-negative integer")))
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut b = DatasetBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| parse_err(n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line).map_err(|e| parse_err(n, e.to_string()))?;
        let obj = v
            .as_object()
            .ok_or_else(|| parse_err(n, "expected a JSON object"))?;
        let text = |k: &str| -> Result<String> {
            obj.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| parse_err(n, format!("missing string field {k:?}")))
        };
        let algorithm = text("algorithm")?;
        let environment = text("environment")?;
        let run = match obj.get("run") {
            Some(Value::Number(x)) => x
                .as_u64()
                .ok_or_else(|| parse_err(n, "run must be a non-negative integer"))?,
            Some(Value::String(s)) => parse_run(s, n)?,
            _ => return Err(parse_err(n, "missing field \"run\"")),
        };
        let score = match obj.get("score") {
            Some(Value::Number(x)) => {
                let v = x.as_f64().ok_or_else(|| parse_err(n, "bad score"))?;
                if !v.is_finite() {
                    return Err(Error::NonFiniteScore { line: n });
                }
                v
            }
            Some(Value::String(s)) => parse_score(s, n)?,
            _ => return Err(parse_err(n, "missing numeric field \"score\"")),
        };
        let entries = match obj.get("hypers") {
            Some(Value::Object(m)) => m
                .iter()
                .map(|(k, v)| Ok((k.clone(), HpValue::from_json(v)?)))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| parse_err(n, e.to_string()))?,
            None | Some(Value::Null) => Vec::new(),
            _ => return Err(parse_err(n, "\"hypers\" must be an object")),
        };
        let setting =
            HyperparameterSetting::new(entries).map_err(|e| parse_err(n, e.to_string()))?;
        b.push(
            ScoreRecord {
                algorithm,
                environment,
                setting,
                run,
                score,
            },
            Some(n),
        )?;
    }
    b.finish()
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let (ia, ie, ir, is) = (
        col("algorithm")?,
        col("environment")?,
        col("run")?,
        col("score")?,
    );
    let mut hp_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if [ia, ie, ir, is].contains(&i) {
            continue;
        }
        match h.strip_prefix("hp.") {
            Some(name) if !name.is_empty() => hp_cols.push((i, name.to_string())),
            _ => return Err(parse_err(1, format!("unexpected column {h:?}"))),
        }
    }

    let mut b = DatasetBuilder::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let n = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut entries = Vec::with_capacity(hp_cols.len());
        for (i, name) in &hp_cols {
            let raw = &row[*i];
            if raw.is_empty() {
                return Err(parse_err(n, format!("missing value for hp.{name}")));
            }
            entries.push((
                name.clone(),
                HpValue::parse(raw).map_err(|e| parse_err(n, e.to_string()))?,
            ));
        }
        let setting =
            HyperparameterSetting::new(entries).map_err(|e| parse_err(n, e.to_string()))?;
        b.push(
            ScoreRecord {
                algorithm: row[ia].to_string(),
                environment: row[ie].to_string(),
                setting,
                run: parse_run(&row[ir], n)?,
                score: parse_score(&row[is], n)?,
            },
            Some(n),
        )?;
    }
    b.finish()
}

pub fn write_jsonl<W: Write>(ds: &Dataset, mut w: W) -> std::io::Result<()> {
    for r in ds.records() {
        let line = serde_json::json!({
            "algorithm": r.algorithm,
            "environment": r.environment,
            "hypers": r.setting,
            "run": r.run,
            "score": r.score,
        });
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes CSV. Every algorithm's settings must share the union of
/// hyperparameter names; absent names are an error in the format.
pub fn write_csv<W: Write>(ds: &Dataset, w: W) -> Result<()> {
    let mut names: Vec<String> = (0..ds.n_algorithms())
        .flat_map(|a| ds.settings(a).iter())
        .flat_map(|s| s.entries().iter().map(|(n, _)| n.clone()))
        .collect();
    names.sort();
    names.dedup();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![
        "algorithm".to_string(),
        "environment".into(),
        "run".into(),
        "score".into(),
    ];
    header.extend(names.iter().map(|n| format!("hp.{n}")));
    wtr.write_record(&header)
        .map_err(|e| Error::arg(e.to_string()))?;
    for r in ds.records() {
        let mut row = vec![
            r.algorithm.clone(),
            r.environment.clone(),
            r.run.to_string(),
            format!("{:?}", r.score),
        ];
        for n in &names {
            let v = r.setting.get(n).ok_or_else(|| {
                Error::arg(format!(
                    "setting {} lacks hyperparameter {n}; CSV needs a rectangular grid",
                    r.setting
                ))
            })?;
            row.push(match v {
                HpValue::Number(x) => format_number(*x),
                HpValue::Text(t) => t.clone(),
            });
        }
        wtr.write_record(&row)
            .map_err(|e| Error::arg(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::arg(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CellKey;

    fn jsonl_rows() -> String {
        let mut s = String::new();
        for alg in ["A", "B"] {
            for env in ["X", "Y"] {
                for lr in [0.1, 0.2] {
                    for run in 0..3 {
                        s.push_str(&format!(
                            "{{\"algorithm\":\"{alg}\",\"environment\":\"{env}\",\"hypers\":{{\"lr\":{lr}}},\"run\":{run},\"score\":{}}}\n",
                            run as f64 * lr
                        ));
                    }
                }
            }
        }
        s
    }

    #[test]
    fn jsonl_grid() {
        let ds = read_jsonl(jsonl_rows().as_bytes()).unwrap();
        assert_eq!(ds.n_cells(), 8);
        assert_eq!(ds.len(), 24);
        let key = CellKey::new("B", "Y", "lr=0.2").unwrap();
        assert_eq!(ds.cell_scores(&key).unwrap(), &[0.0, 0.2, 0.4]);
    }

    #[test]
    fn jsonl_nan_names_line() {
        let mut rows: Vec<String> = jsonl_rows().lines().map(String::from).collect();
        rows[6] =
            r#"{"algorithm":"A","environment":"X","hypers":{"lr":0.1},"run":9,"score":"NaN"}"#
                .into();
        let err = read_jsonl(rows.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteScore { line: 7 }), "{err}");
        assert!(err.to_string().contains("line 7"));
    }

    #[test]
    fn csv_nan_names_line() {
        let mut s = String::from("algorithm,environment,run,score,hp.lr\n");
        for run in 0..5 {
            s.push_str(&format!("A,X,{run},1.0,0.1\n"));
        }
        s.push_str("A,X,5,NaN,0.1\n");
        let err = read_csv(s.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteScore { line: 7 }), "{err}");
    }

    #[test]
    fn csv_missing_hp_value() {
        let s = "algorithm,environment,run,score,hp.lr\nA,X,0,1.0,\n";
        let err = read_csv(s.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn csv_short_row() {
        let s = "algorithm,environment,run,score,hp.lr\nA,X,0,1.0\n";
        assert!(matches!(read_csv(s.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_and_jsonl_agree() {
        let ds = read_jsonl(jsonl_rows().as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn malformed_json_line() {
        let s = "{\"algorithm\":\"A\"\n";
        assert!(matches!(
            read_jsonl(s.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn ragged_file() {
        let s = r#"{"algorithm":"A","environment":"X","hypers":{},"run":0,"score":1}
{"algorithm":"B","environment":"X","hypers":{},"run":0,"score":1}
{"algorithm":"B","environment":"Y","hypers":{},"run":0,"score":1}
"#;
        assert!(matches!(
            read_jsonl(s.as_bytes()),
            Err(Error::RaggedCoverage(_))
        ));
    }

    #[test]
    fn duplicate_run_in_file_names_line() {
        let s = r#"{"algorithm":"A","environment":"X","hypers":{},"run":0,"score":1}
{"algorithm":"A","environment":"X","hypers":{},"run":0,"score":2}
"#;
        match read_jsonl(s.as_bytes()) {
            Err(Error::DuplicateRun {
                run: 0,
                line: Some(2),
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }
}
