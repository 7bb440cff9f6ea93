//! CSV readers and writers for sample sets, query matrices and predictions.
//!
//! Sample files carry a header row naming the columns `x1..xn` followed by
//! `f1..fm`; query files carry only `x` columns. Lines starting with `#` are
//! comments. All numbers are written with 17 significant digits so a
//! write/read cycle reproduces every f64 bit for bit.

use crate::approximator::SampleSet;
use crate::error::{MmlsError, Result};
use nalgebra::DVector;
use std::io::{BufRead, Write};

/// Round-trip decimal formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| MmlsError::Parse {
        line,
        msg: format!("expected a number, found '{}'", s.trim()),
    })
}

/// Split a header row into the count of `x` columns and `f` columns.
fn parse_header(fields: &[&str], line: usize) -> Result<(usize, usize)> {
    let mut n_x = 0usize;
    let mut n_f = 0usize;
    for (i, raw) in fields.iter().enumerate() {
        let name = raw.trim();
        if name.starts_with('x') && n_f == 0 {
            n_x += 1;
        } else if name.starts_with('f') {
            n_f += 1;
        } else {
            return Err(MmlsError::Parse {
                line,
                msg: format!(
                    "unexpected column '{name}' at position {}: want x1..xn then f1..fm",
                    i + 1
                ),
            });
        }
    }
    if n_x == 0 {
        return Err(MmlsError::Parse {
            line,
            msg: "header declares no x columns".into(),
        });
    }
    Ok((n_x, n_f))
}

/// Read a samples CSV (`x1..xn, f1..fm` header) into a [`SampleSet`].
pub fn read_samples_csv<R: BufRead>(reader: R) -> Result<SampleSet> {
    let mut points = Vec::new();
    let mut values = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| MmlsError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        match dims {
            None => {
                let (n, m) = parse_header(&fields, line_no)?;
                if m == 0 {
                    return Err(MmlsError::Parse {
                        line: line_no,
                        msg: "sample files need at least one f column".into(),
                    });
                }
                dims = Some((n, m));
            }
            Some((n, m)) => {
                if fields.len() != n + m {
                    return Err(MmlsError::Parse {
                        line: line_no,
                        msg: format!("expected {} fields, found {}", n + m, fields.len()),
                    });
                }
                let mut p = DVector::zeros(n);
                for c in 0..n {
                    p[c] = parse_f64(fields[c], line_no)?;
                }
                let mut v = DVector::zeros(m);
                for c in 0..m {
                    v[c] = parse_f64(fields[n + c], line_no)?;
                }
                points.push(p);
                values.push(v);
            }
        }
    }
    if dims.is_none() {
        return Err(MmlsError::Parse {
            line: 0,
            msg: "file contains no header row".into(),
        });
    }
    SampleSet::new(points, values)
}

/// Write a [`SampleSet`] in the samples CSV layout.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &SampleSet) -> std::io::Result<()> {
    let n = samples.ambient_dim();
    let m = samples.value_dim();
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend((1..=m).map(|i| format!("f{i}")));
    writeln!(w, "{}", header.join(","))?;
    for i in 0..samples.len() {
        let mut fields: Vec<String> = samples.point(i).iter().map(|&v| fmt_f64(v)).collect();
        fields.extend(samples.value(i).iter().map(|&v| fmt_f64(v)));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Read a queries CSV (header `x1..xn`, no value columns). An empty body is
/// fine and yields an empty vector.
pub fn read_queries_csv<R: BufRead>(reader: R) -> Result<Vec<DVector<f64>>> {
    let mut queries = Vec::new();
    let mut n_cols: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| MmlsError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        match n_cols {
            None => {
                let (n, m) = parse_header(&fields, line_no)?;
                if m != 0 {
                    return Err(MmlsError::Parse {
                        line: line_no,
                        msg: "query files must not declare f columns".into(),
                    });
                }
                n_cols = Some(n);
            }
            Some(n) => {
                if fields.len() != n {
                    return Err(MmlsError::Parse {
                        line: line_no,
                        msg: format!("expected {n} fields, found {}", fields.len()),
                    });
                }
                let mut p = DVector::zeros(n);
                for c in 0..n {
                    p[c] = parse_f64(fields[c], line_no)?;
                }
                queries.push(p);
            }
        }
    }
    if n_cols.is_none() {
        return Err(MmlsError::Parse {
            line: 0,
            msg: "file contains no header row".into(),
        });
    }
    Ok(queries)
}

/// Write points as a queries CSV.
pub fn write_queries_csv<W: Write>(mut w: W, queries: &[DVector<f64>]) -> std::io::Result<()> {
    let n = queries.first().map(|q| q.len()).unwrap_or(1);
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for q in queries {
        let fields: Vec<String> = q.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Write per-query outputs with a trailing status column: `ok`, or the
/// error text (commas replaced) for failed queries, whose value fields are
/// left empty.
pub fn write_predictions_csv<W: Write>(
    mut w: W,
    results: &[Result<DVector<f64>>],
    n_out: usize,
) -> std::io::Result<()> {
    let mut header: Vec<String> = (1..=n_out).map(|i| format!("f{i}")).collect();
    header.push("status".into());
    writeln!(w, "{}", header.join(","))?;
    for r in results {
        match r {
            Ok(v) => {
                let mut fields: Vec<String> = v.iter().map(|&x| fmt_f64(x)).collect();
                fields.push("ok".into());
                writeln!(w, "{}", fields.join(","))?;
            }
            Err(e) => {
                let mut fields = vec![String::new(); n_out];
                fields.push(e.to_string().replace(',', ";"));
                writeln!(w, "{}", fields.join(","))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn samples_roundtrip_is_bitwise() {
        let set = crate::datasets::gen_helix(
            10,
            (-1.0, 1.0),
            &crate::datasets::NoiseModel {
                sigma_domain: crate::datasets::SigmaField::Constant(0.37),
                sigma_target: 0.91,
                seed: 3,
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &set).unwrap();
        let back = read_samples_csv(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(back.len(), set.len());
        for i in 0..set.len() {
            assert_eq!(back.point(i), set.point(i), "point {i} must round-trip bitwise");
            assert_eq!(back.value(i), set.value(i));
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "x1,x2,f1\n1.0,2.0,3.0\n4.0,oops,6.0\n";
        match read_samples_csv(BufReader::new(text.as_bytes())) {
            Err(MmlsError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected Parse error, got {other:?}"),
        }
        let short = "x1,x2,f1\n1.0,2.0\n";
        match read_samples_csv(BufReader::new(short.as_bytes())) {
            Err(MmlsError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_query_body_is_ok() {
        let queries = read_queries_csv(BufReader::new("x1,x2\n".as_bytes())).unwrap();
        assert!(queries.is_empty());
        assert!(read_queries_csv(BufReader::new("".as_bytes())).is_err());
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let text = "# generated\nx1,f1\n# mid comment\n\n0.5,1.5\n";
        let set = read_samples_csv(BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.point(0)[0], 0.5);
    }

    #[test]
    fn predictions_mark_failures_in_place() {
        let results = vec![
            Ok(DVector::from_row_slice(&[1.0])),
            Err(MmlsError::Config("bad, very bad".into())),
        ];
        let mut buf = Vec::new();
        write_predictions_csv(&mut buf, &results, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",ok"));
        assert!(lines[2].starts_with(','));
        assert!(!lines[2].contains("bad, very"));
    }
}
