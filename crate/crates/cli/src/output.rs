//! Rows, replica averages and the CSV / JSON-lines writers.

use std::io::Write;

use serde_json::Value;

use crate::config::{Command, Format, Grid};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Row(pub Vec<(String, Value)>);

impl Row {
    pub fn new() -> Row {
        Row(Vec::new())
    }

    pub fn push(&mut self, k: impl Into<String>, v: impl Into<Value>) -> &mut Row {
        self.0.push((k.into(), v.into()));
        self
    }

    /// Non-finite floats become strings so every row stays valid JSON.
    pub fn num(&mut self, k: impl Into<String>, x: f64) -> &mut Row {
        let v = serde_json::Number::from_f64(x).map_or_else(|| Value::String(format!("{x}")), Value::Number);
        self.push(k, v)
    }

    pub fn opt(&mut self, k: impl Into<String>, x: Option<f64>) -> &mut Row {
        match x {
            Some(x) => self.num(k, x),
            None => self.push(k, Value::Null),
        }
    }

    pub fn prepend(&self, head: &Row) -> Row {
        let mut r = head.clone();
        r.0.extend(self.0.iter().cloned());
        r
    }

    pub fn keys(&self) -> Vec<&str> {
        self.0.iter().map(|(k, _)| k.as_str()).collect()
    }

    #[cfg(test)]
    pub fn get(&self, k: &str) -> Option<&Value> {
        self.0.iter().find(|(key, _)| key == k).map(|(_, v)| v)
    }
}

/// Mean over replicas of row-aligned results. Columns named `*_stderr`
/// combine as √(Σ se²)/R, booleans by "any", other non-numbers are dropped.
pub fn replica_mean(per: &[Vec<Row>]) -> Vec<Row> {
    let r = per.len() as f64;
    let mut out = Vec::new();
    for (i, first) in per[0].iter().enumerate() {
        let mut row = Row::new();
        for (j, (k, v)) in first.0.iter().enumerate() {
            let col: Vec<&Value> = per.iter().map(|rows| &rows[i].0[j].1).collect();
            match v {
                Value::Number(_) => {
                    let xs: Vec<f64> = col.iter().filter_map(|v| v.as_f64()).collect();
                    if xs.len() < col.len() {
                        row.push(k.clone(), Value::Null);
                    } else if k.ends_with("_stderr") {
                        row.num(k.clone(), xs.iter().map(|s| s * s).sum::<f64>().sqrt() / r);
                    } else {
                        row.num(k.clone(), xs.iter().sum::<f64>() / r);
                    }
                }
                Value::Bool(_) => {
                    row.push(k.clone(), col.iter().any(|v| v.as_bool() == Some(true)));
                }
                _ => {
                    row.push(k.clone(), Value::Null);
                }
            }
        }
        out.push(row);
    }
    out
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn write_rows(rows: &[Row], format: Format, out: &mut dyn Write) -> anyhow::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            if let Some(first) = rows.first() {
                w.write_record(first.keys())?;
            }
            for r in rows {
                w.write_record(r.0.iter().map(|(_, v)| csv_field(v)))?;
            }
            w.flush()?;
        }
        Format::Json => {
            for r in rows {
                // serde_json's Map sorts keys; keep the column order instead
                let body: Vec<String> = r
                    .0
                    .iter()
                    .map(|(k, v)| format!("{}:{}", Value::String(k.clone()), v))
                    .collect();
                writeln!(out, "{{{}}}", body.join(","))?;
            }
        }
    }
    Ok(())
}

/// A gnuplot script that reads the CSV at `data`.
pub fn gnuplot_script(command: Command, data: &str, grid: Option<Grid>) -> Option<String> {
    let head = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset grid\ndata = '{}'\n",
        data.replace('\'', "''")
    );
    let body = match command {
        Command::SweepBeta => {
            "set xlabel 'beta'\nset ylabel 'F_N(beta)'\nset y2label 'P(S_alpha)'\nset y2tics\n\
             plot data using 'beta':'F':'F_stderr' with yerrorbars title 'F', \\\n     \
             data using 'beta':'P_S_alpha' axes x1y2 with linespoints title 'P(S_alpha)'\n"
                .to_string()
        }
        Command::RateFn => {
            let g = grid?;
            format!(
                "set xlabel 'epsilon'\nset ylabel 'I(epsilon)'\nset xrange [{}:{}]\n\
                 plot data using 'epsilon':'I' with linespoints title 'I'\n",
                g.from, g.to
            )
        }
        _ => return None,
    };
    Some(head + &body + "pause mouse close\n")
}
